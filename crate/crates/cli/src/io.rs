use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;
use npgm::error::{Error, Result};
use npgm::graph::EdgeMatrix;

/// 17 significant digits, enough to round-trip every `f64`.
pub fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

/// Numeric CSV matrix, rows are observations. A first row with no numeric
/// field is taken as a header and skipped.
pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Input(format!("{}: row {}: {e}", path.display(), r + 1)))?;
        if r == 0 && record.iter().all(|f| f.parse::<f64>().is_err()) {
            continue;
        }
        let mut row = Vec::with_capacity(record.len());
        for (c, field) in record.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                Error::Input(format!("{}: row {}, column {}: cannot parse {field:?} as a number", path.display(), r + 1, c + 1))
            })?;
            if !v.is_finite() {
                return Err(Error::Input(format!("{}: row {}, column {}: non-finite value", path.display(), r + 1, c + 1)));
            }
            row.push(v);
        }
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Input(format!(
                    "{}: row {} has {} columns, expected {}",
                    path.display(),
                    r + 1,
                    row.len(),
                    first.len()
                )));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Input(format!("{}: no data rows", path.display())));
    }
    let p = rows[0].len();
    Ok(DMatrix::from_fn(rows.len(), p, |i, j| rows[i][j]))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

pub fn write_matrix(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut w = create(path)?;
    for row in m.row_iter() {
        let line: Vec<String> = row.iter().map(|v| fmt(*v)).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_adjacency(path: &Path, edges: &EdgeMatrix) -> Result<()> {
    let mut w = create(path)?;
    let adj = edges.adjacency();
    for row in adj.row_iter() {
        let line: Vec<&str> = row.iter().map(|b| if *b { "1" } else { "0" }).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;
    Ok(())
}

/// One `i j` pair per line, 1-based, `i < j`.
pub fn write_edge_list(path: &Path, edges: &EdgeMatrix) -> Result<()> {
    let mut w = create(path)?;
    for (i, j) in edges.edges() {
        writeln!(w, "{} {}", i + 1, j + 1)?;
    }
    w.flush()?;
    Ok(())
}

/// Header plus rows of preformatted fields.
pub fn write_table(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "{}", header.join(","))?;
    for row in rows {
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// Square matrix whose nonzero off-diagonal entries are edges.
pub fn read_edges(path: &Path) -> Result<(EdgeMatrix, DMatrix<f64>)> {
    let m = read_matrix(path)?;
    if m.nrows() != m.ncols() {
        return Err(Error::Input(format!("{}: expected a square matrix, got {} x {}", path.display(), m.nrows(), m.ncols())));
    }
    let sym = (0..m.nrows()).all(|i| (0..i).all(|j| (m[(i, j)] != 0.0) == (m[(j, i)] != 0.0)));
    if !sym {
        return Err(Error::Input(format!("{}: support is not symmetric", path.display())));
    }
    Ok((EdgeMatrix::support(&m), m))
}
