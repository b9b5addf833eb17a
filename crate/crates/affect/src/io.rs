//! CSV serialization for proximity matrices, label files, and step
//! directories.
//!
//! A matrix file starts with a header row of object ids (optionally led by a
//! literal `id` corner cell), followed by one row per object: the object's
//! id, then its n values. Values are written with Rust's shortest
//! round-tripping float formatting, so a write/read cycle reproduces every
//! bit. A sequence of observations is a directory of files named
//! `step_0000.csv`, `step_0001.csv`, and so on; the proximity kind is
//! supplied by the caller, not stored in the files.

use crate::assignment::ClusterAssignment;
use crate::error::{Error, Result};
use crate::proximity::{ProximityKind, ProximityMatrix};
use ndarray::Array2;
use std::fs;
use std::path::{Path, PathBuf};

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        file: path.display().to_string(),
        line,
        message: message.into(),
    }
}

fn record_line(record: &csv::StringRecord) -> usize {
    record.position().map(|p| p.line() as usize).unwrap_or(0)
}

/// Writes a square matrix with its ids in the header and per-row leaders.
pub fn write_matrix_csv(path: &Path, values: &Array2<f64>, ids: &[String]) -> Result<()> {
    let n = ids.len();
    let mut writer = csv::Writer::from_path(path)?;
    let mut header = Vec::with_capacity(n + 1);
    header.push("id".to_string());
    header.extend(ids.iter().cloned());
    writer.write_record(&header)?;
    for (i, id) in ids.iter().enumerate() {
        let mut row = Vec::with_capacity(n + 1);
        row.push(id.clone());
        for j in 0..n {
            row.push(format!("{}", values[[i, j]]));
        }
        writer.write_record(&row)?;
    }
    writer.flush().map_err(Error::Io)?;
    Ok(())
}

/// Reads a square matrix plus its ids. Only the file layout is validated
/// here; symmetry and kind rules are the caller's concern.
pub fn read_matrix_csv(path: &Path) -> Result<(Array2<f64>, Vec<String>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)?;
    let mut records = reader.records();
    let header = match records.next() {
        Some(record) => record.map_err(|e| parse_error(path, 1, e.to_string()))?,
        None => return Err(parse_error(path, 1, "empty file")),
    };
    let mut fields: Vec<String> = header.iter().map(|f| f.trim().to_string()).collect();
    if fields
        .first()
        .is_some_and(|f| f.eq_ignore_ascii_case("id"))
    {
        fields.remove(0);
    }
    let ids = fields;
    let n = ids.len();
    if n == 0 {
        return Err(parse_error(path, 1, "header names no objects"));
    }

    let mut values = Array2::zeros((n, n));
    let mut row = 0usize;
    for record in records {
        let record = record.map_err(|e| parse_error(path, 0, e.to_string()))?;
        let line = record_line(&record);
        if row >= n {
            return Err(parse_error(
                path,
                line,
                format!("more than {n} data rows for {n} header ids"),
            ));
        }
        if record.len() != n + 1 {
            return Err(parse_error(
                path,
                line,
                format!("expected {} fields, found {}", n + 1, record.len()),
            ));
        }
        let row_id = record.get(0).unwrap_or("").trim();
        if row_id != ids[row] {
            return Err(parse_error(
                path,
                line,
                format!("row id {row_id:?} does not match header id {:?}", ids[row]),
            ));
        }
        for j in 0..n {
            let field = record.get(j + 1).unwrap_or("").trim();
            values[[row, j]] = field.parse::<f64>().map_err(|_| {
                parse_error(path, line, format!("bad number {field:?} in column {}", j + 2))
            })?;
        }
        row += 1;
    }
    if row != n {
        return Err(parse_error(
            path,
            0,
            format!("expected {n} data rows, found {row}"),
        ));
    }
    Ok((values, ids))
}

pub fn write_proximity_csv(path: &Path, matrix: &ProximityMatrix) -> Result<()> {
    write_matrix_csv(path, matrix.values(), matrix.ids())
}

/// Reads a matrix file and validates it under the given kind.
pub fn read_proximity_csv(path: &Path, kind: ProximityKind) -> Result<ProximityMatrix> {
    let (values, ids) = read_matrix_csv(path)?;
    ProximityMatrix::new(kind, values, ids)
}

/// Writes one `id,label` row per object.
pub fn write_labels_csv(path: &Path, assignment: &ClusterAssignment) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["id", "label"])?;
    for (id, label) in assignment.ids().iter().zip(assignment.labels()) {
        writer.write_record([id.as_str(), &label.to_string()])?;
    }
    writer.flush().map_err(Error::Io)?;
    Ok(())
}

/// Reads an `id,label` file back into an assignment. Label gaps are kept as
/// written, so the label space is the largest label plus one.
pub fn read_labels_csv(path: &Path) -> Result<ClusterAssignment> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)?;
    let mut ids = Vec::new();
    let mut labels = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| parse_error(path, 0, e.to_string()))?;
        let line = record_line(&record);
        if record.len() != 2 {
            return Err(parse_error(
                path,
                line,
                format!("expected 2 fields, found {}", record.len()),
            ));
        }
        ids.push(record.get(0).unwrap_or("").trim().to_string());
        let field = record.get(1).unwrap_or("").trim();
        labels.push(
            field
                .parse::<usize>()
                .map_err(|_| parse_error(path, line, format!("bad label {field:?}")))?,
        );
    }
    if ids.is_empty() {
        return Err(parse_error(path, 1, "no label rows"));
    }
    let k = labels.iter().copied().max().unwrap_or(0) + 1;
    ClusterAssignment::with_label_space(ids, labels, k)
}

/// The canonical file name for one step of a dumped sequence.
pub fn step_file_name(index: usize) -> String {
    format!("step_{index:04}.csv")
}

fn parse_step_index(name: &str) -> Option<usize> {
    let digits = name.strip_prefix("step_")?.strip_suffix(".csv")?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

/// Lists a directory's `step_NNNN.csv` files in step order. Fails when no
/// step files are present.
pub fn step_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut found: Vec<(usize, PathBuf)> = Vec::new();
    for entry in fs::read_dir(dir)? {
        let entry = entry?;
        let name = entry.file_name();
        let Some(name) = name.to_str() else { continue };
        if let Some(index) = parse_step_index(name) {
            found.push((index, entry.path()));
        }
    }
    if found.is_empty() {
        return Err(parse_error(dir, 0, "no step_NNNN.csv files in directory"));
    }
    found.sort_by_key(|(index, _)| *index);
    Ok(found.into_iter().map(|(_, path)| path).collect())
}

/// Reads an ordered observation sequence from a step directory. Object sets
/// may differ between steps; alignment is handled downstream.
pub fn ingest_dir(dir: &Path, kind: ProximityKind) -> Result<Vec<ProximityMatrix>> {
    step_files(dir)?
        .iter()
        .map(|path| read_proximity_csv(path, kind))
        .collect()
}
