//! Matrix Market coordinate format.
//!
//! Reads `real`/`integer`/`double` coordinate files with `symmetric` or
//! `general` headers. Writes the symmetric form (lower triangle) with 17
//! significant digits so that a round trip reproduces every value exactly.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{SparseError, SparseSymMatrix, Symmetry};

fn parse_err(line: usize, message: impl Into<String>) -> SparseError {
    SparseError::Parse {
        line,
        message: message.into(),
    }
}

pub fn read_matrix_market(path: impl AsRef<Path>) -> Result<SparseSymMatrix, SparseError> {
    let file = File::open(path)?;
    read_matrix_market_from(BufReader::new(file))
}

pub fn read_matrix_market_from<R: BufRead>(reader: R) -> Result<SparseSymMatrix, SparseError> {
    let mut lines = reader.lines().enumerate().map(|(k, l)| (k + 1, l));

    let (_, header) = lines.next().ok_or_else(|| parse_err(1, "empty input"))?;
    let header = header?;
    let tokens: Vec<String> = header
        .split_whitespace()
        .map(str::to_ascii_lowercase)
        .collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(parse_err(
            1,
            "expected '%%MatrixMarket matrix coordinate <field> <symmetry>'",
        ));
    }
    if tokens[2] != "coordinate" {
        return Err(parse_err(1, format!("unsupported format '{}'", tokens[2])));
    }
    if !matches!(tokens[3].as_str(), "real" | "double" | "integer") {
        return Err(parse_err(1, format!("unsupported field '{}'", tokens[3])));
    }
    let symmetry = match tokens[4].as_str() {
        "symmetric" => Symmetry::Mirror,
        "general" => Symmetry::Full,
        other => return Err(parse_err(1, format!("unsupported symmetry '{other}'"))),
    };

    let mut size: Option<(usize, usize)> = None;
    let mut triplets = Vec::new();
    let mut last_line = 1;
    for (lineno, line) in lines {
        let line = line?;
        last_line = lineno;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        match size {
            None => {
                if fields.len() != 3 {
                    return Err(parse_err(lineno, "size line must have three fields"));
                }
                let parse = |s: &str| {
                    s.parse::<usize>()
                        .map_err(|e| parse_err(lineno, format!("bad size '{s}': {e}")))
                };
                let (rows, cols, nnz) = (parse(fields[0])?, parse(fields[1])?, parse(fields[2])?);
                if rows != cols {
                    return Err(parse_err(
                        lineno,
                        format!("matrix is {rows}x{cols}, not square"),
                    ));
                }
                if rows == 0 {
                    return Err(parse_err(lineno, "matrix dimension must be positive"));
                }
                size = Some((rows, nnz));
                triplets.reserve(nnz);
            }
            Some((n, nnz)) => {
                if fields.len() != 3 {
                    return Err(parse_err(lineno, "entry line must have three fields"));
                }
                if triplets.len() == nnz {
                    return Err(parse_err(
                        lineno,
                        format!("more than the declared {nnz} entries"),
                    ));
                }
                let index = |s: &str| -> Result<usize, SparseError> {
                    let k = s
                        .parse::<usize>()
                        .map_err(|e| parse_err(lineno, format!("bad index '{s}': {e}")))?;
                    if k == 0 || k > n {
                        return Err(parse_err(lineno, format!("index {k} outside 1..={n}")));
                    }
                    Ok(k - 1)
                };
                let (i, j) = (index(fields[0])?, index(fields[1])?);
                let v = fields[2]
                    .parse::<f64>()
                    .map_err(|e| parse_err(lineno, format!("bad value '{}': {e}", fields[2])))?;
                triplets.push((i, j, v));
            }
        }
    }
    let (n, nnz) = size.ok_or_else(|| parse_err(last_line, "missing size line"))?;
    if triplets.len() != nnz {
        return Err(parse_err(
            last_line,
            format!("declared {nnz} entries but found {}", triplets.len()),
        ));
    }
    SparseSymMatrix::from_coordinates(n, &triplets, symmetry)
}

pub fn write_matrix_market(a: &SparseSymMatrix, path: impl AsRef<Path>) -> Result<(), SparseError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_matrix_market_to(a, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn write_matrix_market_to<W: Write>(a: &SparseSymMatrix, w: &mut W) -> Result<(), SparseError> {
    let lower: Vec<_> = a.triplets().filter(|&(i, j, _)| j <= i).collect();
    writeln!(w, "%%MatrixMarket matrix coordinate real symmetric")?;
    writeln!(w, "{} {} {}", a.n(), a.n(), lower.len())?;
    for (i, j, v) in lower {
        writeln!(w, "{} {} {:.16e}", i + 1, j + 1, v)?;
    }
    Ok(())
}
