use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Dataset;

use super::FitRequest;

/// Standardization constants of one covariate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnScaling {
    pub column: String,
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedData {
    pub dataset: Dataset,
    pub standardization: Vec<ColumnScaling>,
}

fn column_index(headers: &csv::StringRecord, name: &str, path: &Path) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| Error::MissingColumn {
            path: path.to_path_buf(),
            column: name.to_string(),
        })
}

/// Reads the response and the covariates named in `req`. Intercept columns
/// are prepended to both designs; rows are numbered from 1 after the header.
pub fn parse_csv(path: &Path, req: &FitRequest) -> Result<ParsedData> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let headers = reader.headers()?.clone();
    if headers.is_empty() {
        return Err(Error::EmptyFile {
            path: path.to_path_buf(),
        });
    }
    let mut names: Vec<&str> = vec![req.response.as_str()];
    for c in req.x_cols.iter().chain(&req.z_cols) {
        if !names.contains(&c.as_str()) {
            names.push(c);
        }
    }
    let idx: Vec<usize> = names
        .iter()
        .map(|n| column_index(&headers, n, path))
        .collect::<Result<_>>()?;

    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
    for (row0, record) in reader.records().enumerate() {
        let row = row0 + 1;
        let record = record.map_err(|e| Error::MalformedRow {
            path: path.to_path_buf(),
            row,
            message: e.to_string(),
        })?;
        for (j, &col) in idx.iter().enumerate() {
            let raw = record.get(col).unwrap_or("");
            let value: f64 = raw
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| Error::NonNumeric {
                    path: path.to_path_buf(),
                    row,
                    column: names[j].to_string(),
                    value: raw.to_string(),
                })?;
            if j == 0 && value < 0.0 {
                return Err(Error::NegativeResponse {
                    path: path.to_path_buf(),
                    row,
                    column: names[j].to_string(),
                    value,
                });
            }
            columns[j].push(value);
        }
    }
    let n = columns[0].len();
    if n == 0 {
        return Err(Error::EmptyFile {
            path: path.to_path_buf(),
        });
    }

    let mut standardization = Vec::new();
    if req.standardize {
        for (j, name) in names.iter().enumerate().skip(1) {
            let col = &mut columns[j];
            let mean = col.iter().sum::<f64>() / n as f64;
            let sd = if n > 1 {
                (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
            } else {
                0.0
            };
            if sd.is_nan() || sd <= 0.0 {
                return Err(Error::ZeroVariance {
                    column: name.to_string(),
                });
            }
            for v in col.iter_mut() {
                *v = (*v - mean) / sd;
            }
            standardization.push(ColumnScaling {
                column: name.to_string(),
                mean,
                sd,
            });
        }
    }

    let design = |cols: &[String]| {
        let pos: Vec<usize> = cols
            .iter()
            .map(|c| names.iter().position(|n| n == c).unwrap())
            .collect();
        DMatrix::from_fn(
            n,
            cols.len() + 1,
            |i, j| if j == 0 { 1.0 } else { columns[pos[j - 1]][i] },
        )
    };
    let x = design(&req.x_cols);
    let z = design(&req.z_cols);
    let dataset = Dataset::new(columns[0].clone(), x, z, req.transform)?;
    Ok(ParsedData {
        dataset,
        standardization,
    })
}
