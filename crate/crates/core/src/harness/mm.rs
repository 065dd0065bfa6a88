//! Matrix Market coordinate files (real, integer or pattern; general or symmetric).

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::HarnessError;
use crate::sparsela::SparseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Field {
    Real,
    Pattern,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Symmetry {
    General,
    Symmetric,
}

pub fn read_matrix_market(path: &Path) -> Result<SparseMatrix, HarnessError> {
    let file = File::open(path).map_err(|e| HarnessError::io(path, e))?;
    parse_matrix_market(BufReader::new(file), &path.display().to_string())
}

/// Parses coordinate-format Matrix Market text. `name` labels error messages.
///
/// Symmetric storage is expanded (off-diagonal entries mirrored, diagonal kept once).
/// Pattern matrices get value 1.0 per entry. Duplicate coordinates are rejected.
pub fn parse_matrix_market<R: BufRead>(reader: R, name: &str) -> Result<SparseMatrix, HarnessError> {
    let err = |line: usize, message: String| HarnessError::Parse {
        path: name.to_string(),
        line,
        message,
    };
    let mut lines = reader.lines().enumerate().map(|(i, l)| (i + 1, l));

    let (lineno, header) = match lines.next() {
        Some((n, l)) => (n, l.map_err(|e| HarnessError::io(Path::new(name), e))?),
        None => return Err(err(1, "empty file".into())),
    };
    let tokens: Vec<String> = header
        .split_whitespace()
        .map(|t| t.to_ascii_lowercase())
        .collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(err(
            lineno,
            "header must read `%%MatrixMarket matrix coordinate <field> <symmetry>`".into(),
        ));
    }
    if tokens[2] != "coordinate" {
        return Err(err(lineno, format!("unsupported format `{}`", tokens[2])));
    }
    let field = match tokens[3].as_str() {
        "real" | "double" | "integer" => Field::Real,
        "pattern" => Field::Pattern,
        other => return Err(err(lineno, format!("unsupported field `{other}`"))),
    };
    let symmetry = match tokens[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        other => return Err(err(lineno, format!("unsupported symmetry `{other}`"))),
    };

    let mut size: Option<(usize, usize, usize)> = None;
    let mut triplets = Vec::new();
    let mut seen: HashMap<(usize, usize), usize> = HashMap::new();
    let mut entries = 0usize;
    for (lineno, line) in lines {
        let line = line.map_err(|e| HarnessError::io(Path::new(name), e))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let parse_index = |s: &str, what: &str| {
            s.parse::<usize>()
                .map_err(|e| err(lineno, format!("bad {what} `{s}`: {e}")))
        };
        let Some((m, n, nnz)) = size else {
            if fields.len() != 3 {
                return Err(err(lineno, "size line must hold `rows cols entries`".into()));
            }
            let m = parse_index(fields[0], "row count")?;
            let n = parse_index(fields[1], "column count")?;
            let nnz = parse_index(fields[2], "entry count")?;
            if m.checked_mul(n).is_none() {
                return Err(err(lineno, format!("{m}x{n} overflows the index type")));
            }
            if symmetry == Symmetry::Symmetric && m != n {
                return Err(err(lineno, "symmetric matrix must be square".into()));
            }
            size = Some((m, n, nnz));
            triplets.reserve(nnz);
            continue;
        };
        let expected = if field == Field::Pattern { 2 } else { 3 };
        if fields.len() != expected {
            return Err(err(lineno, format!("expected {expected} fields per entry")));
        }
        let i = parse_index(fields[0], "row index")?;
        let j = parse_index(fields[1], "column index")?;
        if i == 0 || j == 0 || i > m || j > n {
            return Err(err(lineno, format!("entry ({i}, {j}) outside {m}x{n}")));
        }
        let value = match field {
            Field::Pattern => 1.0,
            Field::Real => fields[2]
                .parse::<f64>()
                .map_err(|e| err(lineno, format!("bad value `{}`: {e}", fields[2])))?,
        };
        entries += 1;
        if entries > nnz {
            return Err(err(lineno, format!("more than the declared {nnz} entries")));
        }
        let mut push = |r: usize, c: usize| -> Result<(), HarnessError> {
            if let Some(first) = seen.insert((r, c), lineno) {
                return Err(err(
                    lineno,
                    format!("duplicate entry ({}, {}), first seen on line {first}", r + 1, c + 1),
                ));
            }
            triplets.push((r, c, value));
            Ok(())
        };
        push(i - 1, j - 1)?;
        if symmetry == Symmetry::Symmetric && i != j {
            push(j - 1, i - 1)?;
        }
    }
    let Some((m, n, nnz)) = size else {
        return Err(err(1, "missing size line".into()));
    };
    if entries != nnz {
        return Err(err(0, format!("declared {nnz} entries, found {entries}")));
    }
    Ok(SparseMatrix::from_triplets(m, n, &triplets)?)
}

/// Writes `a` as `coordinate real general`, values in shortest round-trip form.
pub fn write_matrix_market(a: &SparseMatrix, path: &Path) -> Result<(), HarnessError> {
    let file = File::create(path).map_err(|e| HarnessError::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| HarnessError::io(path, e);
    writeln!(w, "%%MatrixMarket matrix coordinate real general").map_err(io)?;
    writeln!(w, "{} {} {}", a.nrows(), a.ncols(), a.nnz()).map_err(io)?;
    for (i, j, v) in a.triplets() {
        writeln!(w, "{} {} {:e}", i + 1, j + 1, v).map_err(io)?;
    }
    w.flush().map_err(io)
}
