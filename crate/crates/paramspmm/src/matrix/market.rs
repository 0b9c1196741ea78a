//! Matrix Market coordinate-format I/O.
//!
//! Supports the `%%MatrixMarket matrix coordinate (real|integer|pattern)
//! (general|symmetric)` header family with 1-based indices. Symmetric
//! inputs are expanded to both triangles, pattern entries get value 1.0,
//! duplicates are summed, and explicit zeros are dropped. Non-square
//! inputs are padded to `n = max(rows, cols)` so the result is always a
//! valid square operand.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::{CooEntry, CsrMatrix};

#[derive(Clone, Copy, PartialEq)]
enum Field {
    Real,
    Pattern,
}

#[derive(Clone, Copy, PartialEq)]
enum Symmetry {
    General,
    Symmetric,
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

/// Loads a Matrix Market coordinate file into a canonical [`CsrMatrix`].
pub fn load_matrix_market(path: impl AsRef<Path>) -> Result<CsrMatrix> {
    let file = File::open(path.as_ref())?;
    read_matrix_market(BufReader::new(file))
}

/// Parses Matrix Market coordinate data from any reader.
pub fn read_matrix_market(reader: impl BufRead) -> Result<CsrMatrix> {
    let mut lines = reader.lines().enumerate();

    let (lineno, header) = match lines.next() {
        Some((i, line)) => (i + 1, line?),
        None => return Err(parse_err(1, "empty file")),
    };
    let (field, symmetry) = parse_header(lineno, &header)?;

    // size line: first non-comment line after the header
    let mut size: Option<(usize, usize, usize)> = None;
    let mut size_lineno = 0;
    for (i, line) in lines.by_ref() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        let toks: Vec<&str> = trimmed.split_whitespace().collect();
        if toks.len() != 3 {
            return Err(parse_err(i + 1, "size line must be `rows cols nnz`"));
        }
        let parse = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| parse_err(i + 1, format!("not a count: {s:?}")))
        };
        size = Some((parse(toks[0])?, parse(toks[1])?, parse(toks[2])?));
        size_lineno = i + 1;
        break;
    }
    let (rows, cols, declared_nnz) =
        size.ok_or_else(|| parse_err(size_lineno.max(2), "missing size line"))?;
    if rows == 0 || cols == 0 {
        return Err(parse_err(size_lineno, "rows and cols must be positive"));
    }

    let n = rows.max(cols);
    let mut entries: Vec<CooEntry> = Vec::with_capacity(declared_nnz);
    let mut seen = 0usize;
    for (i, line) in lines {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        let lineno = i + 1;
        let toks: Vec<&str> = trimmed.split_whitespace().collect();
        let expected = match field {
            Field::Pattern => 2,
            Field::Real => 3,
        };
        if toks.len() != expected {
            return Err(parse_err(
                lineno,
                format!("expected {expected} tokens, found {}", toks.len()),
            ));
        }
        let row1: usize = toks[0]
            .parse()
            .map_err(|_| parse_err(lineno, format!("bad row index {:?}", toks[0])))?;
        let col1: usize = toks[1]
            .parse()
            .map_err(|_| parse_err(lineno, format!("bad column index {:?}", toks[1])))?;
        if row1 == 0 || row1 > rows || col1 == 0 || col1 > cols {
            return Err(parse_err(
                lineno,
                format!("index ({row1}, {col1}) outside {rows} x {cols}"),
            ));
        }
        let value: f32 = match field {
            Field::Pattern => 1.0,
            Field::Real => toks[2]
                .parse()
                .map_err(|_| parse_err(lineno, format!("bad value {:?}", toks[2])))?,
        };
        let (row, col) = (row1 - 1, col1 - 1);
        entries.push(CooEntry { row, col, value });
        if symmetry == Symmetry::Symmetric && row != col {
            entries.push(CooEntry { row: col, col: row, value });
        }
        seen += 1;
    }
    if seen != declared_nnz {
        return Err(parse_err(
            size_lineno,
            format!("size line declares {declared_nnz} entries, file has {seen}"),
        ));
    }

    CsrMatrix::from_coo(n, &entries)
}

fn parse_header(lineno: usize, header: &str) -> Result<(Field, Symmetry)> {
    let toks: Vec<String> = header.split_whitespace().map(|t| t.to_lowercase()).collect();
    if toks.len() != 5 || toks[0] != "%%matrixmarket" {
        return Err(parse_err(lineno, "expected `%%MatrixMarket matrix coordinate <field> <symmetry>`"));
    }
    if toks[1] != "matrix" || toks[2] != "coordinate" {
        return Err(parse_err(lineno, format!("unsupported object/format `{} {}`", toks[1], toks[2])));
    }
    let field = match toks[3].as_str() {
        "real" | "integer" => Field::Real,
        "pattern" => Field::Pattern,
        other => return Err(parse_err(lineno, format!("unsupported field type `{other}`"))),
    };
    let symmetry = match toks[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        other => return Err(parse_err(lineno, format!("unsupported symmetry `{other}`"))),
    };
    Ok((field, symmetry))
}

/// Writes a matrix as `coordinate real general` with 1-based indices.
///
/// Values print in Rust's shortest round-trip form, so reloading the file
/// reproduces the matrix exactly.
pub fn write_matrix_market(a: &CsrMatrix, path: impl AsRef<Path>) -> Result<()> {
    let file = File::create(path.as_ref())?;
    let mut w = BufWriter::new(file);
    writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(w, "{} {} {}", a.n(), a.n(), a.nnz())?;
    for e in a.to_coo() {
        writeln!(w, "{} {} {}", e.row + 1, e.col + 1, e.value)?;
    }
    Ok(())
}
