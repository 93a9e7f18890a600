//! CSV/JSON emission. Floats are printed with 17 significant digits.

use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::{AttributionRecord, BenchmarkOutcome, CharacterizationRow, SetupFailure};

pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_json<S: Serialize + ?Sized>(path: &Path, value: &S) -> Result<()> {
    std::fs::write(path, serde_json::to_vec_pretty(value)?).map_err(|e| Error::io(path, e))
}

fn write_failures(dir: &Path, failures: &[SetupFailure]) -> Result<()> {
    write_json(&dir.join("failures.json"), failures)
}

fn write_calls(dir: &Path, records: &[AttributionRecord]) -> Result<()> {
    write_csv(
        &dir.join("calls.csv"),
        &["setup", "image", "method", "calls"],
        records
            .iter()
            .map(|r| vec![r.setup_id.clone(), r.image_id.clone(), r.method_id.clone(), r.calls.to_string()]),
    )
}

/// `measures.csv`/`.json`, `curves.csv`, `calls.csv`, `failures.json`.
pub fn write_benchmark<T: Scalar + Serialize>(dir: &Path, outcome: &BenchmarkOutcome<T>) -> Result<()> {
    let mut rows = Vec::new();
    let mut curves = Vec::new();
    for a in &outcome.artifacts {
        let r = &a.result;
        let s = &r.setup;
        for m in &r.records {
            rows.push(vec![
                s.id(),
                s.imputer_id.clone(),
                s.segmenter_id.clone(),
                s.n_superpixels.to_string(),
                s.predictor_id.clone(),
                m.method_id.clone(),
                fmt_float(m.mif.as_f64()),
                fmt_float(m.lif.as_f64()),
                fmt_float(m.mrg.as_f64()),
                fmt_float(m.lrg.as_f64()),
                fmt_float(m.srg.as_f64()),
                fmt_float(r.r_oms_bar.as_f64()),
                fmt_float(r.nr_oms_bar.as_f64()),
            ]);
        }
        let labelled = r
            .mean_mif_curves
            .iter()
            .map(|c| (c, "mif"))
            .chain(r.mean_lif_curves.iter().map(|c| (c, "lif")))
            .chain(std::iter::once((&r.mean_random_curve, "random")));
        for (c, direction) in labelled {
            let method = c.ordering_id.split(':').next().unwrap_or_default().to_string();
            for (step, v) in c.values.iter().enumerate() {
                curves.push(vec![
                    step.to_string(),
                    fmt_float(v.as_f64()),
                    method.clone(),
                    direction.to_string(),
                    s.id(),
                ]);
            }
        }
    }
    write_csv(
        &dir.join("measures.csv"),
        &[
            "setup", "imputer", "segmenter", "n", "predictor", "method", "mif", "lif", "mrg", "lrg", "srg",
            "r_oms_bar", "nr_oms_bar",
        ],
        rows,
    )?;
    write_json(&dir.join("measures.json"), &outcome.results())?;
    write_csv(&dir.join("curves.csv"), &["s", "value", "method", "direction", "setup"], curves)?;
    let records: Vec<AttributionRecord> = outcome.artifacts.iter().flat_map(|a| a.attributions.iter().cloned()).collect();
    write_calls(dir, &records)?;
    write_failures(dir, &outcome.failures)
}

/// `attributions.jsonl`, `calls.csv`, `failures.json`.
pub fn write_attributions(dir: &Path, records: &[AttributionRecord], failures: &[SetupFailure]) -> Result<()> {
    let mut lines = String::new();
    for r in records {
        lines.push_str(&serde_json::to_string(r)?);
        lines.push('\n');
    }
    let path = dir.join("attributions.jsonl");
    std::fs::write(&path, lines).map_err(|e| Error::io(&path, e))?;
    write_calls(dir, records)?;
    write_failures(dir, failures)
}

/// `characterize.csv`, `failures.json`.
pub fn write_characterization(dir: &Path, rows: &[CharacterizationRow], failures: &[SetupFailure]) -> Result<()> {
    write_csv(
        &dir.join("characterize.csv"),
        &["setup", "fraction", "occluded", "r_oms_mean", "r_oms_std", "nr_oms_mean", "nr_oms_std"],
        rows.iter().map(|r| {
            vec![
                r.setup_id.clone(),
                fmt_float(r.fraction),
                r.occluded.to_string(),
                fmt_float(r.r_oms_mean),
                fmt_float(r.r_oms_std),
                fmt_float(r.nr_oms_mean),
                fmt_float(r.nr_oms_std),
            ]
        }),
    )?;
    write_failures(dir, failures)
}
