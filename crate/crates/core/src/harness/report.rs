use std::fs;
use std::path::Path;

use super::experiment::{rejection_histogram, ScenarioReport};
use crate::error::{Error, Result};

fn csv_err(e: csv::Error) -> Error {
    Error::Harness(format!("csv: {e}"))
}

/// Writes `report.csv`, `summary.csv`, `rejections_by_dc.csv`,
/// `ecu_by_layer.csv` and `timings.csv` (plus `failures.csv` when a method
/// failed) into `dir`.
pub fn write_report(report: &ScenarioReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;

    let mut w = csv::Writer::from_path(dir.join("report.csv")).map_err(csv_err)?;
    w.write_record(["method", "metric", "repetition", "value"]).map_err(csv_err)?;
    for run in &report.runs {
        for m in &run.methods {
            for (k, v) in &m.metrics {
                w.write_record([m.method.as_str(), k, &run.repetition.to_string(), &v.to_string()]).map_err(csv_err)?;
            }
        }
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("summary.csv")).map_err(csv_err)?;
    w.write_record(["method", "metric", "mean", "std", "n"]).map_err(csv_err)?;
    for r in &report.summary {
        w.write_record([&r.method, &r.metric, &r.mean.to_string(), &r.std.to_string(), &r.n.to_string()])
            .map_err(csv_err)?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("rejections_by_dc.csv")).map_err(csv_err)?;
    w.write_record(["repetition", "method", "rank", "dc", "offered", "rejected"]).map_err(csv_err)?;
    for run in &report.runs {
        for m in &run.methods {
            for (rank, (dc, offered, rejected)) in rejection_histogram(run, &m.method).into_iter().enumerate() {
                w.write_record([
                    run.repetition.to_string(),
                    m.method.clone(),
                    rank.to_string(),
                    dc.0.to_string(),
                    offered.to_string(),
                    rejected.to_string(),
                ])
                .map_err(csv_err)?;
            }
        }
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("ecu_by_layer.csv")).map_err(csv_err)?;
    w.write_record(["repetition", "method", "layer", "ecu", "share"]).map_err(csv_err)?;
    for run in &report.runs {
        for m in &run.methods {
            let total: f64 = m.ecu_by_layer.iter().sum();
            for (layer, v) in ["edge", "transport", "core"].iter().zip(m.ecu_by_layer) {
                let share = if total > 0.0 { v / total } else { 0.0 };
                w.write_record([
                    run.repetition.to_string(),
                    m.method.clone(),
                    layer.to_string(),
                    v.to_string(),
                    share.to_string(),
                ])
                .map_err(csv_err)?;
            }
        }
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("timings.csv")).map_err(csv_err)?;
    w.write_record(["repetition", "users", "phase", "seconds"]).map_err(csv_err)?;
    for run in &report.runs {
        for (phase, s) in &run.timings {
            w.write_record([run.repetition.to_string(), run.users.to_string(), phase.clone(), s.to_string()])
                .map_err(csv_err)?;
        }
    }
    w.flush()?;

    let failures: Vec<_> =
        report.runs.iter().flat_map(|r| r.failures.iter().map(move |(m, e)| (r.repetition, m, e))).collect();
    if !failures.is_empty() {
        let mut w = csv::Writer::from_path(dir.join("failures.csv")).map_err(csv_err)?;
        w.write_record(["repetition", "method", "error"]).map_err(csv_err)?;
        for (r, m, e) in failures {
            w.write_record([r.to_string(), m.clone(), e.clone()]).map_err(csv_err)?;
        }
        w.flush()?;
    }
    Ok(())
}
