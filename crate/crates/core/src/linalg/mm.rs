//! MatrixMarket coordinate files (real, symmetric for matrices; general
//! single-column arrays for vectors).

use std::io::{BufRead, Write};

use super::SparseSym;
use crate::error::{Error, Result};

/// Writes the lower triangle of `a` as a symmetric coordinate matrix.
pub fn write_matrix<W: Write>(mut w: W, a: &SparseSym) -> Result<()> {
    let n = a.dim();
    let nnz_lower: usize = (0..n).map(|r| a.row(r).filter(|&(c, _)| c <= r).count()).sum();
    writeln!(w, "%%MatrixMarket matrix coordinate real symmetric")?;
    writeln!(w, "{n} {n} {nnz_lower}")?;
    for r in 0..n {
        for (c, v) in a.row(r) {
            if c <= r {
                writeln!(w, "{} {} {:e}", r + 1, c + 1, v)?;
            }
        }
    }
    Ok(())
}

/// Writes a dense vector as an `n x 1` array.
pub fn write_vector<W: Write>(mut w: W, v: &[f64]) -> Result<()> {
    writeln!(w, "%%MatrixMarket matrix array real general")?;
    writeln!(w, "{} 1", v.len())?;
    for x in v {
        writeln!(w, "{x:e}")?;
    }
    Ok(())
}

fn parse_err(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Parse(format!("MatrixMarket line {line}: {msg}"))
}

/// Reads a square coordinate matrix. `symmetric` files are expanded to both
/// triangles; `general` files must already be symmetric.
pub fn read_matrix<R: BufRead>(r: R) -> Result<SparseSym> {
    let mut lines = r.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| parse_err(1, "empty input"))?;
    let header = header?;
    let fields: Vec<String> = header.split_whitespace().map(|s| s.to_ascii_lowercase()).collect();
    if fields.len() != 5 || fields[0] != "%%matrixmarket" || fields[1] != "matrix" || fields[2] != "coordinate" {
        return Err(parse_err(1, "expected '%%MatrixMarket matrix coordinate <field> <symmetry>'"));
    }
    if fields[3] != "real" && fields[3] != "integer" {
        return Err(parse_err(1, format!("unsupported field '{}'", fields[3])));
    }
    let symmetric = match fields[4].as_str() {
        "symmetric" => true,
        "general" => false,
        s => return Err(parse_err(1, format!("unsupported symmetry '{s}'"))),
    };
    let mut size: Option<(usize, usize)> = None;
    let mut triplets = Vec::new();
    for (i, line) in lines {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        let parts: Vec<&str> = t.split_whitespace().collect();
        match size {
            None => {
                if parts.len() != 3 {
                    return Err(parse_err(i + 1, "expected 'rows cols nnz'"));
                }
                let p = |s: &str| s.parse::<usize>().map_err(|e| parse_err(i + 1, e));
                let (nr, nc, nnz) = (p(parts[0])?, p(parts[1])?, p(parts[2])?);
                if nr != nc {
                    return Err(parse_err(i + 1, "matrix must be square"));
                }
                if nnz > nr.saturating_mul(nc) {
                    return Err(parse_err(i + 1, "more entries than matrix positions"));
                }
                size = Some((nr, nnz));
                triplets.reserve(nnz.min(1 << 20) * if symmetric { 2 } else { 1 });
            }
            Some((n, _)) => {
                if parts.len() != 3 {
                    return Err(parse_err(i + 1, "expected 'row col value'"));
                }
                let ri: usize = parts[0].parse().map_err(|e| parse_err(i + 1, e))?;
                let ci: usize = parts[1].parse().map_err(|e| parse_err(i + 1, e))?;
                let v: f64 = parts[2].parse().map_err(|e| parse_err(i + 1, e))?;
                if ri == 0 || ci == 0 || ri > n || ci > n {
                    return Err(parse_err(i + 1, "index out of range"));
                }
                if !v.is_finite() {
                    return Err(parse_err(i + 1, "non-finite value"));
                }
                if symmetric && ci > ri {
                    return Err(parse_err(i + 1, "symmetric files store the lower triangle only"));
                }
                triplets.push((ri - 1, ci - 1, v));
                if symmetric && ri != ci {
                    triplets.push((ci - 1, ri - 1, v));
                }
            }
        }
    }
    let (n, nnz) = size.ok_or_else(|| parse_err(1, "missing size line"))?;
    let stored = triplets.iter().filter(|t| !symmetric || t.0 >= t.1).count();
    if stored != nnz {
        return Err(Error::Parse(format!("MatrixMarket: header announces {nnz} entries, found {stored}")));
    }
    let a = SparseSym::from_triplets(n, &triplets)?;
    if !symmetric && a.asymmetry() > 0.0 {
        return Err(Error::Parse("MatrixMarket: general matrix is not symmetric".into()));
    }
    Ok(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    #[test]
    fn round_trip() {
        let a = SparseSym::from_dense(&DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.0, 1.0, 5.0, -2.5, 0.0, -2.5, 6.0]));
        let mut buf = Vec::new();
        write_matrix(&mut buf, &a).unwrap();
        let b = read_matrix(buf.as_slice()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn general_input_and_comments() {
        let s = "%%MatrixMarket matrix coordinate real general\n% comment\n2 2 3\n1 1 2\n1 2 1\n2 1 1\n";
        let a = read_matrix(s.as_bytes()).unwrap();
        assert_eq!(a.to_dense(), DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 0.0]));
    }

    #[test]
    fn rejects_malformed() {
        for s in [
            "",
            "%%MatrixMarket matrix array real general\n2 1\n1\n2\n",
            "%%MatrixMarket matrix coordinate real symmetric\n2 3 1\n1 1 1\n",
            "%%MatrixMarket matrix coordinate real symmetric\n2 2 1\n3 1 1\n",
            "%%MatrixMarket matrix coordinate real symmetric\n2 2 2\n1 1 1\n",
            "%%MatrixMarket matrix coordinate real symmetric\n2 2 1\n1 2 1\n",
            "%%MatrixMarket matrix coordinate real general\n2 2 1\n1 2 1\n",
            "%%MatrixMarket matrix coordinate real symmetric\n2 2 1\n1 1 x\n",
        ] {
            assert!(read_matrix(s.as_bytes()).is_err(), "{s:?}");
        }
    }

    #[test]
    fn vector_output() {
        let mut buf = Vec::new();
        write_vector(&mut buf, &[1.0, 0.5]).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("%%MatrixMarket matrix array real general\n2 1\n"));
    }
}
