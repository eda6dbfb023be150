//! CSV ingestion for observation matrices and graphs.

use std::path::Path;

use nalgebra::DMatrix;

use super::NetworkData;
use crate::error::{Error, Result};

/// Numeric rows of a CSV file, with the 1-based line number of each row.
/// A first row that does not parse as numbers is taken as a header.
fn numeric_rows(text: &str) -> Result<Vec<(usize, Vec<f64>)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (k, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Data(format!("csv: {e}")))?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(k + 1);
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(v) => rows.push((line, v)),
            Err(_) if rows.is_empty() && k == 0 => continue,
            Err(_) => return Err(Error::Data(format!("row {line}: non-numeric field"))),
        }
    }
    Ok(rows)
}

/// Parse an `N x n` observation matrix (rows are observations).
pub fn parse_observations_csv(text: &str) -> Result<DMatrix<f64>> {
    let rows = numeric_rows(text)?;
    let Some((_, first)) = rows.first() else {
        return Err(Error::Data("no observations in file".into()));
    };
    let width = first.len();
    for (line, r) in &rows {
        if r.len() != width {
            return Err(Error::Data(format!(
                "row {line}: ragged row with {} columns, expected {width}",
                r.len()
            )));
        }
        if r.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data(format!("row {line}: non-finite value")));
        }
    }
    Ok(DMatrix::from_row_iterator(
        rows.len(),
        width,
        rows.iter().flat_map(|(_, r)| r.iter().copied()),
    ))
}

pub fn read_observations_csv(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    parse_observations_csv(&std::fs::read_to_string(path)?)
}

/// Parse a graph: a two-column file is an edge list of 0-based node ids,
/// anything square is a dense 0/1 adjacency matrix. `n_nodes` overrides the
/// node count of an edge list (default: largest id + 1).
pub fn parse_network_csv(text: &str, n_nodes: Option<usize>) -> Result<NetworkData> {
    let rows = numeric_rows(text)?;
    if rows.is_empty() {
        return Err(Error::Data("empty graph file".into()));
    }
    let width = rows[0].1.len();
    for (line, r) in &rows {
        if r.len() != width {
            return Err(Error::Data(format!(
                "row {line}: ragged row with {} columns, expected {width}",
                r.len()
            )));
        }
    }
    let as_index = |line: usize, v: f64| -> Result<usize> {
        if v >= 0.0 && v.fract() == 0.0 && v < u32::MAX as f64 {
            Ok(v as usize)
        } else {
            Err(Error::Data(format!("row {line}: {v} is not a node id")))
        }
    };
    if width == 2 {
        let mut edges = Vec::with_capacity(rows.len());
        for (line, r) in &rows {
            edges.push((as_index(*line, r[0])?, as_index(*line, r[1])?));
        }
        let implied = edges.iter().map(|&(a, b)| a.max(b) + 1).max().unwrap_or(0);
        NetworkData::from_edges(n_nodes.unwrap_or(implied), &edges)
    } else if width == rows.len() {
        let mut entries = Vec::with_capacity(width * width);
        for (line, r) in &rows {
            for &v in r {
                if v != 0.0 && v != 1.0 {
                    return Err(Error::Data(format!("row {line}: adjacency entry {v} is not 0/1")));
                }
                entries.push(v as u8);
            }
        }
        NetworkData::from_dense(width, &entries)
    } else {
        Err(Error::Data(format!(
            "graph file has {} rows of {width} columns: neither an edge list nor a square matrix",
            rows.len()
        )))
    }
}

pub fn read_network_csv(path: impl AsRef<Path>, n_nodes: Option<usize>) -> Result<NetworkData> {
    parse_network_csv(&std::fs::read_to_string(path)?, n_nodes)
}
