//! Debug dump format for blocked sparse matrices.
//!
//! Text header `NB BS`, then for each allocated block (row-major scan): a
//! line `ii jj` followed by `BS` lines of `BS` values each. Values print in
//! shortest round-trip form.

use std::io::{self, BufRead, Write};

use taskred_core::BlockedSparseMatrix;

pub fn write_dump(m: &BlockedSparseMatrix, w: &mut impl Write) -> io::Result<()> {
    writeln!(w, "{} {}", m.nb(), m.bs())?;
    let bs = m.bs();
    for ii in 0..m.nb() {
        for jj in 0..m.nb() {
            if let Some(block) = m.block(ii, jj) {
                writeln!(w, "{ii} {jj}")?;
                for row in block.chunks(bs) {
                    let mut line = String::new();
                    for (k, v) in row.iter().enumerate() {
                        if k > 0 {
                            line.push(' ');
                        }
                        line.push_str(&v.to_string());
                    }
                    writeln!(w, "{line}")?;
                }
            }
        }
    }
    Ok(())
}

fn bad(msg: impl Into<String>) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg.into())
}

pub fn read_dump(r: &mut impl BufRead) -> io::Result<BlockedSparseMatrix> {
    let mut lines = r.lines();
    let header = lines.next().ok_or_else(|| bad("empty dump"))??;
    let mut parts = header.split_whitespace();
    let nb: usize = parts
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| bad("bad header"))?;
    let bs: usize = parts
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| bad("bad header"))?;

    let mut m = BlockedSparseMatrix::empty(nb, bs);
    while let Some(coords) = lines.next() {
        let coords = coords?;
        if coords.trim().is_empty() {
            continue;
        }
        let mut parts = coords.split_whitespace();
        let ii: usize = parts
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| bad("bad block coordinates"))?;
        let jj: usize = parts
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| bad("bad block coordinates"))?;
        if ii >= nb || jj >= nb {
            return Err(bad(format!("block ({ii}, {jj}) out of range")));
        }
        let block = m.alloc_zeroed(ii, jj);
        for i in 0..bs {
            let row = lines
                .next()
                .ok_or_else(|| bad("truncated block"))??;
            let mut count = 0;
            for (j, tok) in row.split_whitespace().enumerate() {
                if j >= bs {
                    return Err(bad("too many values in block row"));
                }
                block[i * bs + j] = tok.parse().map_err(|_| bad("bad value"))?;
                count += 1;
            }
            if count != bs {
                return Err(bad("short block row"));
            }
        }
    }
    Ok(m)
}
