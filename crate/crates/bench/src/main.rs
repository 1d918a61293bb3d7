fn main() {
    std::process::exit(taskred::cli::run());
}
