//! CSV ingestion and report serialization.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{FitResult, Signal};
use crate::selection::SweepRow;
use crate::sim::MetricsRow;

/// How to pick the value column of a delimited file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ColumnSpec {
    Name(String),
    Index(usize),
}

impl ColumnSpec {
    /// Parse either a 0-based column index or a header name.
    pub fn parse(s: &str) -> Self {
        match s.parse::<usize>() {
            Ok(i) => ColumnSpec::Index(i),
            Err(_) => ColumnSpec::Name(s.to_string()),
        }
    }
}

/// A series loaded from disk: values in file order, the 1-based data-row
/// numbers they came from, and how many rows were dropped for missing or
/// non-numeric values.
#[derive(Debug, Clone)]
pub struct LoadedSeries {
    pub signal: Signal,
    pub rows: Vec<usize>,
    pub dropped: usize,
}

/// Read one numeric column from a headered CSV file, preserving row
/// order. Rows whose value is missing or non-numeric are dropped and
/// counted; more than half the rows failing to parse (and at least 10) is
/// treated as a malformed file.
pub fn load_series_csv(path: &Path, column: &ColumnSpec) -> Result<LoadedSeries> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)?;
    let col = match column {
        ColumnSpec::Index(i) => *i,
        ColumnSpec::Name(name) => {
            let headers = reader.headers()?;
            headers
                .iter()
                .position(|h| h.trim() == name)
                .ok_or_else(|| {
                    Error::MalformedInput(format!(
                        "column '{name}' not found in header {:?}",
                        headers.iter().collect::<Vec<_>>()
                    ))
                })?
        }
    };

    let mut values = Vec::new();
    let mut rows = Vec::new();
    let mut dropped = 0usize;
    let mut total = 0usize;
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        total += 1;
        match record
            .get(col)
            .map(str::trim)
            .filter(|f| !f.is_empty())
            .and_then(|f| f.parse::<f64>().ok())
            .filter(|v| v.is_finite())
        {
            Some(v) => {
                values.push(v);
                rows.push(i + 1);
            }
            None => dropped += 1,
        }
    }
    if values.is_empty() {
        return Err(Error::MalformedInput(format!(
            "no numeric rows in column {column:?} of {}",
            path.display()
        )));
    }
    if dropped > 10 && dropped * 2 > total {
        return Err(Error::MalformedInput(format!(
            "{dropped} of {total} rows malformed in {}",
            path.display()
        )));
    }
    Ok(LoadedSeries {
        signal: Signal::new(values)?,
        rows,
        dropped,
    })
}

/// Format a float with 17 significant digits (round-trippable).
pub fn fmt_g17(x: f64) -> String {
    format!("{x:.16e}")
}

/// One fitted block in report coordinates (1-based inclusive indices).
#[derive(Debug, Clone, Serialize)]
pub struct BlockOut {
    pub start: usize,
    pub end: usize,
    pub level: f64,
}

/// JSON report for a single fit or segmentation.
#[derive(Debug, Clone, Serialize)]
pub struct FitReport {
    pub n: usize,
    pub lambda1: f64,
    pub lambda2: f64,
    pub loss: String,
    pub objective: f64,
    pub df_hat: usize,
    /// 1-based indices i such that mu[i] != mu[i-1].
    pub jumps: Vec<usize>,
    pub blocks: Vec<BlockOut>,
    pub mu_hat: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub criterion: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub criterion_value: Option<f64>,
}

impl FitReport {
    pub fn new(fit: &FitResult) -> Self {
        let part = fit.partition();
        let blocks = (0..part.block_count())
            .map(|j| {
                let r = part.block_range(j);
                BlockOut {
                    start: r.start + 1,
                    end: r.end,
                    level: part.levels()[j],
                }
            })
            .collect();
        Self {
            n: fit.n(),
            lambda1: fit.params().lambda1(),
            lambda2: fit.params().lambda2(),
            loss: fit.loss_kind().to_string(),
            objective: fit.objective(),
            df_hat: part.nonzero_blocks().len(),
            jumps: part.jump_indices().iter().map(|i| i + 1).collect(),
            blocks,
            mu_hat: fit.mu_hat().to_vec(),
            criterion: None,
            criterion_value: None,
        }
    }

    pub fn with_criterion(mut self, kind: String, value: f64) -> Self {
        self.criterion = Some(kind);
        self.criterion_value = Some(value);
        self
    }
}

/// Write the plot-ready (index, y, mu_hat) table.
pub fn write_fit_csv<W: Write>(mut w: W, y: &Signal, fit: &FitResult) -> Result<()> {
    writeln!(w, "index,y,mu_hat")?;
    for (i, (v, m)) in y.values().iter().zip(fit.mu_hat()).enumerate() {
        writeln!(w, "{},{},{}", i + 1, fmt_g17(*v), fmt_g17(*m))?;
    }
    Ok(())
}

/// Write the criterion sweep table.
pub fn write_sweep_csv<W: Write>(mut w: W, rows: &[SweepRow]) -> Result<()> {
    writeln!(w, "lambda1,lambda2,residual_l1,df_hat,aicr,bic,gcv")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            fmt_g17(r.lambda1),
            fmt_g17(r.lambda2),
            fmt_g17(r.residual_l1),
            r.df_hat,
            fmt_g17(r.aicr),
            fmt_g17(r.bic),
            r.gcv.map(fmt_g17).unwrap_or_default(),
        )?;
    }
    Ok(())
}

/// Write the aggregated benchmark table.
pub fn write_bench_csv<W: Write>(mut w: W, rows: &[MetricsRow]) -> Result<()> {
    writeln!(
        w,
        "family,sigma,method,replicates,lare_mean,cfr_plus_k_pct,exact_recovery_pct,jump_mean,jump_sd"
    )?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            r.family,
            fmt_g17(r.sigma),
            r.method,
            r.replicates,
            fmt_g17(r.lare_mean),
            fmt_g17(r.cfr_plus_k),
            fmt_g17(r.exact_recovery),
            fmt_g17(r.jump_mean),
            fmt_g17(r.jump_sd),
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write as _;

    fn write_temp(name: &str, contents: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join("lad-flsa-io-tests");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join(name);
        let mut f = std::fs::File::create(&path).unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        path
    }

    #[test]
    fn loads_named_column() {
        let path = write_temp("basic.csv", "pos,logratio\n1,0.1\n2,-0.2\n");
        let loaded = load_series_csv(&path, &ColumnSpec::Name("logratio".into())).unwrap();
        assert_eq!(loaded.signal.values(), &[0.1, -0.2]);
        assert_eq!(loaded.rows, vec![1, 2]);
        assert_eq!(loaded.dropped, 0);
    }

    #[test]
    fn drops_blank_rows_with_count() {
        let path = write_temp("blank.csv", "pos,logratio\n1,0.1\n2,\n");
        let loaded = load_series_csv(&path, &ColumnSpec::Index(1)).unwrap();
        assert_eq!(loaded.signal.len(), 1);
        assert_eq!(loaded.dropped, 1);
    }

    #[test]
    fn rejects_missing_column_and_empty_data() {
        let path = write_temp("missing.csv", "a,b\n1,2\n");
        assert!(load_series_csv(&path, &ColumnSpec::Name("zz".into())).is_err());
        let empty = write_temp("textonly.csv", "a,b\nx,y\nx,y\n");
        assert!(load_series_csv(&empty, &ColumnSpec::Index(1)).is_err());
    }

    #[test]
    fn g17_round_trips() {
        for x in [0.1, -3.25e-7, 12345.6789, 1.0 / 3.0] {
            let s = fmt_g17(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
        }
    }
}
