//! Matrix Market coordinate and array formats (real matrices, 1-based
//! indices, `%%MatrixMarket matrix ...` banner).

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::dense::DenseMatrix;
use crate::linalg::sparse::CsrMatrix;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Layout {
    Coordinate,
    Array,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Symmetry {
    General,
    Symmetric,
}

fn parse_banner(path: &str, line: &str) -> Result<(Layout, Symmetry)> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() < 4 || fields[0] != "%%MatrixMarket" || fields[1] != "matrix" {
        return Err(Error::parse(path, 1, "expected '%%MatrixMarket matrix ...' banner"));
    }
    let layout = match fields[2] {
        "coordinate" => Layout::Coordinate,
        "array" => Layout::Array,
        other => return Err(Error::parse(path, 1, format!("unsupported layout '{other}'"))),
    };
    match fields[3] {
        "real" | "integer" => {}
        other => return Err(Error::parse(path, 1, format!("unsupported field type '{other}'"))),
    }
    let symmetry = match fields.get(4).copied().unwrap_or("general") {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        other => return Err(Error::parse(path, 1, format!("unsupported symmetry '{other}'"))),
    };
    Ok((layout, symmetry))
}

struct MmContent<T> {
    rows: usize,
    cols: usize,
    triplets: Vec<(usize, usize, T)>,
}

fn read_content<T: Scalar>(path: &Path) -> Result<MmContent<T>> {
    let pathstr = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(&pathstr, e))?;
    let mut lines = text.lines().enumerate();
    let (_, banner) = lines
        .next()
        .ok_or_else(|| Error::parse(&pathstr, 1, "empty file"))?;
    let (layout, symmetry) = parse_banner(&pathstr, banner)?;

    let mut size_line = None;
    for (idx, line) in lines.by_ref() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        size_line = Some((idx + 1, trimmed.to_string()));
        break;
    }
    let (size_lineno, size_text) =
        size_line.ok_or_else(|| Error::parse(&pathstr, 1, "missing size line"))?;
    let sizes: Vec<usize> = size_text
        .split_whitespace()
        .map(|t| {
            t.parse::<usize>()
                .map_err(|_| Error::parse(&pathstr, size_lineno, format!("bad size token '{t}'")))
        })
        .collect::<Result<_>>()?;

    let mut triplets = Vec::new();
    match layout {
        Layout::Coordinate => {
            if sizes.len() != 3 {
                return Err(Error::parse(
                    &pathstr,
                    size_lineno,
                    "coordinate size line must be 'rows cols nnz'",
                ));
            }
            let (rows, cols, nnz) = (sizes[0], sizes[1], sizes[2]);
            let mut seen = 0usize;
            for (idx, line) in lines {
                let lineno = idx + 1;
                let trimmed = line.trim();
                if trimmed.is_empty() || trimmed.starts_with('%') {
                    continue;
                }
                let toks: Vec<&str> = trimmed.split_whitespace().collect();
                if toks.len() != 3 {
                    return Err(Error::parse(&pathstr, lineno, "expected 'i j value'"));
                }
                let i: usize = toks[0]
                    .parse()
                    .map_err(|_| Error::parse(&pathstr, lineno, "bad row index"))?;
                let j: usize = toks[1]
                    .parse()
                    .map_err(|_| Error::parse(&pathstr, lineno, "bad column index"))?;
                let v: f64 = toks[2]
                    .parse()
                    .map_err(|_| Error::parse(&pathstr, lineno, "bad value"))?;
                if i == 0 || j == 0 || i > rows || j > cols {
                    return Err(Error::parse(
                        &pathstr,
                        lineno,
                        format!("index ({i},{j}) outside {rows}x{cols} (1-based)"),
                    ));
                }
                triplets.push((i - 1, j - 1, T::of(v)));
                if symmetry == Symmetry::Symmetric && i != j {
                    triplets.push((j - 1, i - 1, T::of(v)));
                }
                seen += 1;
            }
            if seen != nnz {
                return Err(Error::parse(
                    &pathstr,
                    size_lineno,
                    format!("declared {nnz} entries, found {seen}"),
                ));
            }
            Ok(MmContent { rows, cols, triplets })
        }
        Layout::Array => {
            if sizes.len() != 2 {
                return Err(Error::parse(
                    &pathstr,
                    size_lineno,
                    "array size line must be 'rows cols'",
                ));
            }
            let (rows, cols) = (sizes[0], sizes[1]);
            // array entries are column-major
            let mut values = Vec::with_capacity(rows * cols);
            for (idx, line) in lines {
                let lineno = idx + 1;
                let trimmed = line.trim();
                if trimmed.is_empty() || trimmed.starts_with('%') {
                    continue;
                }
                for tok in trimmed.split_whitespace() {
                    let v: f64 = tok
                        .parse()
                        .map_err(|_| Error::parse(&pathstr, lineno, format!("bad value '{tok}'")))?;
                    values.push(v);
                }
            }
            let expected = match symmetry {
                Symmetry::General => rows * cols,
                Symmetry::Symmetric => rows * (rows + 1) / 2,
            };
            if values.len() != expected {
                return Err(Error::parse(
                    &pathstr,
                    size_lineno,
                    format!("expected {expected} array entries, found {}", values.len()),
                ));
            }
            let mut k = 0usize;
            match symmetry {
                Symmetry::General => {
                    for j in 0..cols {
                        for i in 0..rows {
                            let v = values[k];
                            k += 1;
                            if v != 0.0 {
                                triplets.push((i, j, T::of(v)));
                            }
                        }
                    }
                }
                Symmetry::Symmetric => {
                    for j in 0..cols {
                        for i in j..rows {
                            let v = values[k];
                            k += 1;
                            if v != 0.0 {
                                triplets.push((i, j, T::of(v)));
                                if i != j {
                                    triplets.push((j, i, T::of(v)));
                                }
                            }
                        }
                    }
                }
            }
            Ok(MmContent { rows, cols, triplets })
        }
    }
}

pub fn read_dense<T: Scalar>(path: impl AsRef<Path>) -> Result<DenseMatrix<T>> {
    let c = read_content::<T>(path.as_ref())?;
    let mut m = DenseMatrix::zeros(c.rows, c.cols);
    for (i, j, v) in c.triplets {
        m.set(i, j, m.get(i, j) + v);
    }
    Ok(m)
}

pub fn read_csr<T: Scalar>(path: impl AsRef<Path>) -> Result<CsrMatrix<T>> {
    let c = read_content::<T>(path.as_ref())?;
    Ok(CsrMatrix::from_triplets(c.rows, c.cols, &c.triplets))
}

/// Read a vector stored as an n-by-1 (or 1-by-n) matrix.
pub fn read_vector<T: Scalar>(path: impl AsRef<Path>) -> Result<Vec<T>> {
    let d = read_dense::<T>(path.as_ref())?;
    if d.cols() == 1 {
        Ok((0..d.rows()).map(|i| d.get(i, 0)).collect())
    } else if d.rows() == 1 {
        Ok((0..d.cols()).map(|j| d.get(0, j)).collect())
    } else {
        Err(Error::Dimension(format!(
            "{} holds a {}x{} matrix, expected a vector",
            path.as_ref().display(),
            d.rows(),
            d.cols()
        )))
    }
}

pub fn write_dense<T: Scalar>(path: impl AsRef<Path>, m: &DenseMatrix<T>) -> Result<()> {
    let mut out = String::new();
    out.push_str("%%MatrixMarket matrix array real general\n");
    let _ = writeln!(out, "{} {}", m.rows(), m.cols());
    for j in 0..m.cols() {
        for i in 0..m.rows() {
            let _ = writeln!(out, "{:e}", m.get(i, j).to_f64_lossy());
        }
    }
    std::fs::write(path.as_ref(), out).map_err(|e| Error::io(path.as_ref().display().to_string(), e))
}

pub fn write_csr<T: Scalar>(path: impl AsRef<Path>, m: &CsrMatrix<T>) -> Result<()> {
    let mut out = String::new();
    out.push_str("%%MatrixMarket matrix coordinate real general\n");
    let _ = writeln!(out, "{} {} {}", m.rows(), m.cols(), m.nnz());
    for i in 0..m.rows() {
        for (j, v) in m.row_entries(i) {
            let _ = writeln!(out, "{} {} {:e}", i + 1, j + 1, v.to_f64_lossy());
        }
    }
    std::fs::write(path.as_ref(), out).map_err(|e| Error::io(path.as_ref().display().to_string(), e))
}
