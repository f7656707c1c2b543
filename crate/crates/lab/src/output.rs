//! CSV and JSONL writers. Floats use the shortest round-trip form.

use std::io::Write;

use anyhow::Result;
use qubus_core::growth::{ComparisonRow, GrowthStats, ScalingPoint, StrategyConfig, TrialRecord};
use serde::Serialize;

pub const GROWTH_COLUMNS: [&str; 11] = [
    "variant",
    "p",
    "L",
    "trials",
    "mean_ops",
    "ci_ops",
    "mean_time",
    "ci_time",
    "mean_wasted",
    "analytic_ops",
    "z_score",
];

pub const SCALING_COLUMNS: [&str; 4] = ["figure", "L", "series", "value"];

pub const GATE_COLUMNS: [&str; 6] = ["gate", "label", "probability", "window_probability", "fidelity", "corrections"];

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// The comparison row behind the `analytic_ops` column: plain `ops`, else the all-rounds sum.
pub fn ops_row(rows: &[ComparisonRow]) -> Option<&ComparisonRow> {
    rows.iter()
        .find(|r| r.metric == "ops")
        .or_else(|| rows.iter().find(|r| r.metric == "ops@all_rounds"))
}

pub fn growth_csv(stats: &GrowthStats, point: &ScalingPoint, rows: &[ComparisonRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(GROWTH_COLUMNS)?;
    let ops = ops_row(rows);
    w.write_record([
        stats.config.variant.name().to_string(),
        stats.config.p.to_string(),
        point.l.to_string(),
        stats.trials.to_string(),
        stats.ops.mean.to_string(),
        stats.ops.ci95.to_string(),
        stats.time.mean.to_string(),
        stats.time.ci95.to_string(),
        stats.wasted.mean.to_string(),
        opt(ops.map(|r| r.analytic)),
        opt(ops.map(|r| r.z)),
    ])?;
    Ok(String::from_utf8(w.into_inner()?)?)
}

pub fn comparison_csv(rows: &[ComparisonRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["metric", "empirical", "stderr", "analytic", "z", "relative", "status"])?;
    for r in rows {
        w.write_record([
            r.metric.clone(),
            r.empirical.to_string(),
            r.stderr.to_string(),
            r.analytic.to_string(),
            r.z.to_string(),
            r.relative.to_string(),
            r.status.to_string(),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

#[derive(Serialize)]
struct TrialLine<'a> {
    config: &'a StrategyConfig,
    trial: &'a TrialRecord,
}

/// One JSON object per trial, each carrying the full configuration.
pub fn write_trials_jsonl<W: Write>(mut out: W, config: &StrategyConfig, records: &[TrialRecord]) -> Result<()> {
    for trial in records {
        serde_json::to_writer(&mut out, &TrialLine { config, trial })?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn rows_csv<I, R>(header: &[&str], rows: I) -> Result<String>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}
