//! Plain-text table formats. Every CSV opens with a `#` metadata line that
//! carries the schema version; floats are written in shortest round-trip
//! form so that reading a file back reproduces the exact values.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::RepSummary;

use super::commands::CurveRow;
use super::SCHEMA_VERSION;

/// Retained draws as named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct DrawsTable {
    pub tau: f64,
    pub iterations: Vec<usize>,
    pub names: Vec<String>,
    /// One vector per name, each with one entry per iteration.
    pub columns: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    /// One-based row number of the observation in the input file.
    pub obs_id: usize,
    pub tau: f64,
    pub prob: f64,
    /// Posterior mean of the conditional quantile on the modelled scale.
    pub quantile: f64,
    /// Posterior mean of the back-transformed quantile; present only for
    /// the square-root transform.
    pub quantile_response: Option<f64>,
}

fn header_line(kind: &str, extra: &str) -> String {
    let mut line = format!("#zeroquant {kind} schema_version={SCHEMA_VERSION}");
    if !extra.is_empty() {
        line.push(' ');
        line.push_str(extra);
    }
    line.push('\n');
    line
}

/// Parses the `key=value` pairs of the metadata line and checks the kind and
/// schema version.
fn read_header(path: &Path, kind: &str) -> Result<Vec<(String, String)>> {
    let file = fs::File::open(path)?;
    let mut first = String::new();
    BufReader::new(file).read_line(&mut first)?;
    let mut parts = first.split_whitespace();
    if parts.next() != Some("#zeroquant") || parts.next() != Some(kind) {
        return Err(Error::MalformedRow {
            path: path.to_path_buf(),
            row: 0,
            message: format!("expected a '#zeroquant {kind}' metadata line"),
        });
    }
    let pairs: Vec<(String, String)> = parts
        .filter_map(|p| p.split_once('=').map(|(k, v)| (k.to_string(), v.to_string())))
        .collect();
    let version = pairs
        .iter()
        .find(|(k, _)| k == "schema_version")
        .map(|(_, v)| v.as_str());
    if version != Some(&SCHEMA_VERSION.to_string()) {
        return Err(Error::Config(format!(
            "{}: unsupported schema version {:?}",
            path.display(),
            version
        )));
    }
    Ok(pairs)
}

fn reader(path: &Path) -> Result<csv::Reader<fs::File>> {
    Ok(csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path)?)
}

fn writer(path: &Path, meta: &str) -> Result<csv::Writer<fs::File>> {
    fs::write(path, meta)?;
    let file = fs::OpenOptions::new().append(true).open(path)?;
    Ok(csv::Writer::from_writer(file))
}

fn malformed(path: &Path, row: usize, message: impl Into<String>) -> Error {
    Error::MalformedRow {
        path: path.to_path_buf(),
        row,
        message: message.into(),
    }
}

pub fn write_draws(path: &Path, table: &DrawsTable) -> Result<()> {
    let mut out = header_line("draws", &format!("tau={}", table.tau));
    out.push_str("iter");
    for name in &table.names {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for (row, it) in table.iterations.iter().enumerate() {
        write!(out, "{it}").unwrap();
        for col in &table.columns {
            write!(out, ",{}", col[row]).unwrap();
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_draws(path: &Path) -> Result<DrawsTable> {
    let meta = read_header(path, "draws")?;
    let tau = meta
        .iter()
        .find(|(k, _)| k == "tau")
        .and_then(|(_, v)| v.parse::<f64>().ok())
        .ok_or_else(|| malformed(path, 0, "metadata line lacks tau"))?;
    let mut rdr = reader(path)?;
    let headers = rdr.headers()?.clone();
    if headers.get(0) != Some("iter") {
        return Err(Error::MissingColumn {
            path: path.to_path_buf(),
            column: "iter".into(),
        });
    }
    let names: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    let mut table = DrawsTable {
        tau,
        iterations: Vec::new(),
        columns: vec![Vec::new(); names.len()],
        names,
    };
    for (row0, rec) in rdr.records().enumerate() {
        let row = row0 + 1;
        let rec = rec.map_err(|e| malformed(path, row, e.to_string()))?;
        let cell = |j: usize| rec.get(j).unwrap_or("");
        table.iterations.push(cell(0).parse().map_err(|_| Error::NonNumeric {
            path: path.to_path_buf(),
            row,
            column: "iter".into(),
            value: cell(0).into(),
        })?);
        for (j, col) in table.columns.iter_mut().enumerate() {
            col.push(cell(j + 1).parse().map_err(|_| Error::NonNumeric {
                path: path.to_path_buf(),
                row,
                column: table.names[j].clone(),
                value: cell(j + 1).into(),
            })?);
        }
    }
    Ok(table)
}

fn write_rows<T: Serialize>(path: &Path, kind: &str, rows: &[T], headers: &[&str]) -> Result<()> {
    let mut w = writer(path, &header_line(kind, ""))?;
    if rows.is_empty() {
        w.write_record(headers)?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path, kind: &str) -> Result<Vec<T>> {
    read_header(path, kind)?;
    let mut rdr = reader(path)?;
    rdr.deserialize()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| malformed(path, i + 1, e.to_string())))
        .collect()
}

pub fn write_profiles(path: &Path, rows: &[ProfileRow]) -> Result<()> {
    write_rows(
        path,
        "censor_profile",
        rows,
        &["obs_id", "tau", "prob", "quantile", "quantile_response"],
    )
}

pub fn read_profiles(path: &Path) -> Result<Vec<ProfileRow>> {
    read_rows(path, "censor_profile")
}

const REP_HEADERS: [&str; 10] = [
    "replication",
    "tau",
    "zeta_c",
    "zeta_d",
    "beta2_mean",
    "gamma1_mean",
    "gamma2_mean",
    "zero_fraction",
    "censored_fraction",
    "mh_acceptance",
];

pub fn write_rep_summaries(path: &Path, rows: &[RepSummary]) -> Result<()> {
    write_rows(path, "replications", rows, &REP_HEADERS)
}

pub fn read_rep_summaries(path: &Path) -> Result<Vec<RepSummary>> {
    read_rows(path, "replications")
}

pub fn write_curve(path: &Path, rows: &[CurveRow]) -> Result<()> {
    write_rows(path, "censor_curve", rows, &["mu", "sigma", "tau", "p", "f0", "prob"])
}

pub fn read_curve(path: &Path) -> Result<Vec<CurveRow>> {
    read_rows(path, "censor_curve")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn draws_round_trip_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let table = DrawsTable {
            tau: 0.1 + 0.2,
            iterations: vec![3, 7, 11],
            names: vec!["beta_0".into(), "sigma".into()],
            columns: vec![
                vec![1.0 / 3.0, -2.5e-300, 1e22],
                vec![f64::MIN_POSITIVE, 0.7, 12345.678901234567],
            ],
        };
        write_draws(&path, &table).unwrap();
        assert_eq!(read_draws(&path).unwrap(), table);
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("#zeroquant draws schema_version=1 tau=0.30000000000000004\niter,beta_0,sigma\n"));
    }

    #[test]
    fn profiles_and_replications_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("p.csv");
        let rows = vec![
            ProfileRow {
                obs_id: 1,
                tau: 0.5,
                prob: 0.25,
                quantile: -0.125,
                quantile_response: None,
            },
            ProfileRow {
                obs_id: 4,
                tau: 0.5,
                prob: 1.0 / 7.0,
                quantile: 0.3,
                quantile_response: Some(0.09),
            },
        ];
        write_profiles(&p, &rows).unwrap();
        assert_eq!(read_profiles(&p).unwrap(), rows);

        write_profiles(&p, &[]).unwrap();
        assert!(read_profiles(&p).unwrap().is_empty());

        let r = dir.path().join("r.csv");
        let reps = vec![RepSummary {
            replication: 0,
            tau: 0.25,
            zeta_c: Some(0.4),
            zeta_d: None,
            beta2_mean: 1.5,
            gamma1_mean: 9.75,
            gamma2_mean: -10.0 / 3.0,
            zero_fraction: 0.6,
            censored_fraction: 0.1,
            mh_acceptance: Some(0.31),
        }];
        write_rep_summaries(&r, &reps).unwrap();
        assert_eq!(read_rep_summaries(&r).unwrap(), reps);
    }

    #[test]
    fn wrong_kind_or_version_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.csv");
        fs::write(&p, "#zeroquant draws schema_version=1 tau=0.5\niter,sigma\n").unwrap();
        assert!(read_profiles(&p).is_err());
        fs::write(&p, "#zeroquant draws schema_version=99 tau=0.5\niter,sigma\n").unwrap();
        assert!(matches!(read_draws(&p), Err(Error::Config(_))));
    }
}
