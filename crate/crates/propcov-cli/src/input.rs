//! Input file handling: JSON group documents and single-matrix CSV.

use std::fs;
use std::path::Path;

use serde::Deserialize;

use propcov::{GroupSample, SampleSet, SymMatrix};

use crate::CliError;

/// On-disk document: `{"groups": [{"n": ..., "S": [[...]]}, ...]}`.
#[derive(Debug, Deserialize)]
pub struct InputDocument {
    pub groups: Vec<InputGroup>,
}

#[derive(Debug, Deserialize)]
pub struct InputGroup {
    pub n: usize,
    #[serde(rename = "S")]
    pub s: Vec<Vec<f64>>,
    #[serde(default)]
    pub label: Option<String>,
}

/// Reads either a JSON document or, for `.csv` paths, a single matrix
/// (one group; requires the degrees-of-freedom flag).
pub fn read_samples(path: &Path, csv_df: Option<usize>) -> Result<(SampleSet, Vec<String>), CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::parse(format!("cannot read {}: {e}", path.display())))?;
    if path.extension().and_then(|e| e.to_str()) == Some("csv") {
        let n = csv_df.ok_or_else(|| {
            CliError::parse("CSV input needs --n to supply the degrees of freedom".into())
        })?;
        let rows = parse_csv_matrix(&text)?;
        let set = build_sample_set(vec![(n, rows)])?;
        return Ok((set, vec!["group 1".into()]));
    }

    let doc: InputDocument = serde_json::from_str(&text).map_err(|e| {
        CliError::parse(format!(
            "JSON parse error at line {} column {}: {e}",
            e.line(),
            e.column()
        ))
    })?;
    if doc.groups.is_empty() {
        return Err(CliError::parse("input document has no groups".into()));
    }
    let labels = doc
        .groups
        .iter()
        .enumerate()
        .map(|(i, g)| g.label.clone().unwrap_or_else(|| format!("group {}", i + 1)))
        .collect();
    let set = build_sample_set(doc.groups.into_iter().map(|g| (g.n, g.s)).collect())?;
    Ok((set, labels))
}

fn parse_csv_matrix(text: &str) -> Result<Vec<Vec<f64>>, CliError> {
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|cell| {
                cell.trim().parse::<f64>().map_err(|e| {
                    CliError::parse(format!("CSV line {}: bad number {cell:?}: {e}", lineno + 1))
                })
            })
            .collect::<Result<Vec<f64>, CliError>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::parse("CSV input is empty".into()));
    }
    Ok(rows)
}

fn build_sample_set(groups: Vec<(usize, Vec<Vec<f64>>)>) -> Result<SampleSet, CliError> {
    let built = groups
        .into_iter()
        .enumerate()
        .map(|(i, (n, rows))| {
            let p = rows.len();
            if rows.iter().any(|r| r.len() != p) {
                return Err(CliError::parse(format!(
                    "group {}: matrix is not square",
                    i + 1
                )));
            }
            let s = SymMatrix::from_rows(&rows)
                .map_err(|e| CliError::invalid_matrix(format!("group {}: {e}", i + 1)))?;
            GroupSample::new(s, n)
                .map_err(|e| CliError::invalid_matrix(format!("group {}: {e}", i + 1)))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    SampleSet::new(built).map_err(|e| CliError::invalid_matrix(e.to_string()))
}
