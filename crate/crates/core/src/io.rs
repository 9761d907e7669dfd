//! CSV input and the result files written by the command-line tool.
//!
//! Every output is comma-delimited UTF-8 with one header row. Floats are
//! written with Rust's shortest round-trip formatting so that reading a file
//! back with [`read_table`] and parsing the fields reproduces the values.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::glm::Family;
use crate::harness::CellRun;
use crate::inference::BootstrapResult;
use crate::tsc::TreeFit;

/// Reads `unit,y,<covariates...>` long-format data.
///
/// Errors name the 1-based line of the offending record (the header is
/// line 1).
pub fn read_dataset<R: Read>(reader: R, family: Family) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers().map_err(|e| Error::Input {
        line: 1,
        message: format!("unreadable header: {e}"),
    })?;
    let names: Vec<String> = header.iter().map(str::to_string).collect();
    if names.len() < 2 || names[0] != "unit" || names[1] != "y" {
        return Err(Error::Input {
            line: 1,
            message: format!("header must start with 'unit,y', got '{}'", names.join(",")),
        });
    }
    let covariate_names = names[2..].to_vec();
    let p = covariate_names.len();
    let mut labels = Vec::new();
    let mut y = Vec::new();
    let mut cov = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| Error::Input {
            line: e.position().map_or(0, |pos| pos.line() as usize),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |pos| pos.line() as usize);
        if record.len() != p + 2 {
            return Err(Error::Input {
                line,
                message: format!("expected {} fields, found {}", p + 2, record.len()),
            });
        }
        let unit = &record[0];
        if unit.is_empty() {
            return Err(Error::Input {
                line,
                message: "empty unit id".into(),
            });
        }
        let parse = |field: &str, name: &str| -> Result<f64> {
            field
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Input {
                    line,
                    message: format!("{name} value '{field}' is not a finite number"),
                })
        };
        let response = parse(&record[1], "y")?;
        if family == Family::BinomialLogit && response != 0.0 && response != 1.0 {
            return Err(Error::Input {
                line,
                message: format!("binomial response must be 0 or 1, got '{}'", &record[1]),
            });
        }
        labels.push(unit.to_string());
        y.push(response);
        for j in 0..p {
            cov.push(parse(&record[2 + j], &covariate_names[j])?);
        }
    }
    if y.is_empty() {
        return Err(Error::Input {
            line: 2,
            message: "no data rows".into(),
        });
    }
    let covariates = DMatrix::from_row_slice(y.len(), p, &cov);
    Dataset::from_labeled(&labels, y, covariates, covariate_names)
}

pub fn read_dataset_file(path: &Path, family: Family) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| Error::Input {
        line: 0,
        message: format!("cannot open {}: {e}", path.display()),
    })?;
    read_dataset(file, family)
}

/// Writes `dataset` in the input format.
pub fn write_dataset<W: Write>(writer: W, data: &Dataset) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["unit".to_string(), "y".to_string()];
    header.extend(data.covariate_names().iter().cloned());
    w.write_record(&header)?;
    for obs in 0..data.n_obs() {
        let mut row = vec![
            data.unit_labels()[data.unit_of()[obs]].clone(),
            data.y()[obs].to_string(),
        ];
        row.extend(data.covariates().row(obs).iter().map(f64::to_string));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }
}

pub fn read_table(path: &Path) -> Result<Table> {
    let mut rdr = csv::Reader::from_path(path)?;
    let header = rdr.headers()?.iter().map(str::to_string).collect();
    let rows = rdr
        .records()
        .map(|r| r.map(|rec| rec.iter().map(str::to_string).collect()))
        .collect::<std::result::Result<_, _>>()?;
    Ok(Table { header, rows })
}

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    Ok(csv::Writer::from_path(path)?)
}

/// `unit,cluster` with clusters numbered from 1 along the ordering.
pub fn write_partition(path: &Path, data: &Dataset, fit: &TreeFit) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["unit", "cluster"])?;
    for (label, &k) in data.unit_labels().iter().zip(fit.partition.cluster_of()) {
        w.write_record([label.as_str(), &(k + 1).to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// `step,unit,intercept` for every accepted step (step 0 = single intercept).
pub fn write_path(path: &Path, data: &Dataset, fit: &TreeFit) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["step", "unit", "intercept"])?;
    for (step, row) in fit.path.iter().enumerate() {
        for (label, v) in data.unit_labels().iter().zip(row) {
            w.write_record([step.to_string(), label.clone(), v.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `item,label,value` rows: shared coefficients, cluster intercepts and
/// sizes, per-step global p-values and a few scalars.
pub fn write_summary(path: &Path, data: &Dataset, fit: &TreeFit) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["item", "label", "value"])?;
    for (name, b) in data.covariate_names().iter().zip(&fit.shared_beta) {
        w.write_record(["shared", name.as_str(), &b.to_string()])?;
    }
    let members = fit.partition.members();
    for (k, v) in fit.cluster_intercepts.values.iter().enumerate() {
        w.write_record(["cluster_intercept", &(k + 1).to_string(), &v.to_string()])?;
        w.write_record(["cluster_size", &(k + 1).to_string(), &members[k].len().to_string()])?;
    }
    for r in &fit.records {
        w.write_record(["global_p", &r.step.to_string(), &r.global_p.to_string()])?;
    }
    w.write_record(["n_clusters", "", &fit.n_clusters().to_string()])?;
    w.write_record(["log_likelihood", "", &fit.final_log_likelihood.to_string()])?;
    w.write_record(["alpha", "", &fit.spec.alpha.to_string()])?;
    w.flush()?;
    Ok(())
}

/// One row per step record.
pub fn write_steps(path: &Path, fit: &TreeFit) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record([
        "step",
        "threshold",
        "split_statistic",
        "split_p",
        "global_statistic",
        "global_df",
        "global_p",
        "accepted",
    ])?;
    for r in &fit.records {
        let chosen = r
            .candidate_stats
            .iter()
            .find(|c| c.threshold == r.chosen_threshold)
            .copied();
        w.write_record([
            r.step.to_string(),
            r.chosen_threshold.to_string(),
            chosen.map_or(f64::NAN, |c| c.statistic).to_string(),
            chosen.map_or(f64::NAN, |c| c.p_value).to_string(),
            r.global_stat.to_string(),
            r.global_df.to_string(),
            r.global_p.to_string(),
            r.accepted.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `parameter,estimate,lower,upper`; clusters appear as `cluster_<k>`.
pub fn write_intervals(path: &Path, result: &BootstrapResult) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["parameter", "estimate", "lower", "upper"])?;
    for ((name, est), iv) in result
        .parameter_names
        .iter()
        .zip(&result.estimates)
        .zip(&result.intervals)
    {
        w.write_record([name.clone(), est.to_string(), iv.lower.to_string(), iv.upper.to_string()])?;
    }
    for (k, (est, iv)) in result
        .cluster_estimates
        .iter()
        .zip(&result.cluster_intervals)
        .enumerate()
    {
        w.write_record([
            format!("cluster_{}", k + 1),
            est.to_string(),
            iv.lower.to_string(),
            iv.upper.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Per-replication metrics of one or more cells.
pub fn write_raw_metrics(path: &Path, runs: &[CellRun]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record([
        "m0",
        "replication",
        "method",
        "status",
        "mse_intercepts",
        "mse_linear",
        "n_clusters",
    ])?;
    for run in runs {
        for row in &run.rows {
            let (status, a, b, c) = match &row.outcome {
                Ok(m) => (
                    "ok".to_string(),
                    m.mse_intercepts.to_string(),
                    m.mse_linear.to_string(),
                    m.n_clusters.to_string(),
                ),
                Err(msg) => (format!("failed: {msg}"), String::new(), String::new(), String::new()),
            };
            w.write_record([
                run.scenario.m0.to_string(),
                row.replication.to_string(),
                row.method.label().to_string(),
                status,
                a,
                b,
                c,
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Mean table: one row per method; for each metric one column per m0.
/// Methods without any successful replication get empty cells.
pub fn write_cell_table(path: &Path, runs: &[CellRun]) -> Result<()> {
    let mut w = writer(path)?;
    let metrics = ["mse_intercepts", "mse_linear", "n_clusters"];
    let mut header = vec!["method".to_string()];
    for m in metrics {
        for run in runs {
            header.push(format!("{m}_m0_{}", run.scenario.m0));
        }
    }
    for run in runs {
        header.push(format!("failed_m0_{}", run.scenario.m0));
    }
    w.write_record(&header)?;
    let methods = runs.first().map(|r| r.methods.clone()).unwrap_or_default();
    for method in methods {
        let mut row = vec![method.label().to_string()];
        for metric in 0..metrics.len() {
            for run in runs {
                row.push(run.summary(method).map_or(String::new(), |s| {
                    let spread = [s.mse_intercepts, s.mse_linear, s.n_clusters][metric];
                    spread.mean.to_string()
                }));
            }
        }
        for run in runs {
            row.push(run.failures(method).to_string());
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// `m0,method,metric,mean,p10,p90,reps`.
pub fn write_cell_spread(path: &Path, runs: &[CellRun]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["m0", "method", "metric", "mean", "p10", "p90", "reps"])?;
    for run in runs {
        for s in &run.summaries {
            for (name, spread) in [
                ("mse_intercepts", s.mse_intercepts),
                ("mse_linear", s.mse_linear),
                ("n_clusters", s.n_clusters),
            ] {
                w.write_record([
                    run.scenario.m0.to_string(),
                    s.method.label().to_string(),
                    name.to_string(),
                    spread.mean.to_string(),
                    spread.p10.to_string(),
                    spread.p90.to_string(),
                    s.reps.to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_labeled_units() {
        let csv = "unit,y,x1\nA,1.5,0.2\nB,2.5,0.1\nA,0.5,-1\n";
        let d = read_dataset(csv.as_bytes(), Family::GaussianIdentity).unwrap();
        assert_eq!(d.n_units(), 2);
        assert_eq!(d.unit_labels(), &["A", "B"]);
        assert_eq!(d.covariate_names(), &["x1"]);
        assert_eq!(d.covariates()[(2, 0)], -1.0);
    }

    #[test]
    fn binomial_rejects_non_binary_response_with_line() {
        let csv = "unit,y\nA,1\nA,0\nB,2\n";
        match read_dataset(csv.as_bytes(), Family::BinomialLogit) {
            Err(Error::Input { line, .. }) => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_rows_name_their_line() {
        let csv = "unit,y,x\nA,1,2\nB,abc,3\n";
        assert!(matches!(
            read_dataset(csv.as_bytes(), Family::GaussianIdentity),
            Err(Error::Input { line: 3, .. })
        ));
        let csv = "unit,y,x\nA,1,2\nB,1\n";
        assert!(matches!(
            read_dataset(csv.as_bytes(), Family::GaussianIdentity),
            Err(Error::Input { line: 3, .. })
        ));
        let csv = "id,y\nA,1\n";
        assert!(matches!(
            read_dataset(csv.as_bytes(), Family::GaussianIdentity),
            Err(Error::Input { line: 1, .. })
        ));
    }

    #[test]
    fn dataset_write_read_round_trip() {
        let csv = "unit,y,x1\nA,1.5,0.2\nB,2.5,0.1\nA,0.1,-1e-7\n";
        let d = read_dataset(csv.as_bytes(), Family::GaussianIdentity).unwrap();
        let mut buf = Vec::new();
        write_dataset(&mut buf, &d).unwrap();
        let back = read_dataset(buf.as_slice(), Family::GaussianIdentity).unwrap();
        assert_eq!(back, d);
    }
}
