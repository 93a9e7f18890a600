//! Report tables over finished setups: rank grids, consistency analysis,
//! per-imputer quartiles and the matching-imputer cross table.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::SetupResult;
use crate::ranking::{consistency_report, distinct_rankings, most_frequent_ranking, setup_rankings, spread_correlation, Measure};

use super::output::{fmt_float, write_csv, write_json};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReportKind {
    Rankings,
    Consistency,
    Boxplot,
    MatchingImputer,
}

impl ReportKind {
    pub const ALL: [ReportKind; 4] = [
        ReportKind::Rankings,
        ReportKind::Consistency,
        ReportKind::Boxplot,
        ReportKind::MatchingImputer,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ReportKind::Rankings => "rankings",
            ReportKind::Consistency => "consistency",
            ReportKind::Boxplot => "boxplot",
            ReportKind::MatchingImputer => "matching-imputer",
        }
    }
}

impl std::str::FromStr for ReportKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ReportKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown report kind `{s}`")))
    }
}

/// Emits the tables of `kind` into `dir` and returns the written paths.
pub fn report(results: &[SetupResult<f64>], kind: ReportKind, dir: &Path, master_seed: u64) -> Result<Vec<PathBuf>> {
    if results.is_empty() {
        return Err(Error::InvalidArgument("no finished setups to report on".into()));
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    match kind {
        ReportKind::Rankings => rank_grids(results, dir),
        ReportKind::Consistency => consistency(results, dir, master_seed),
        ReportKind::Boxplot => boxplot(results, dir),
        ReportKind::MatchingImputer => matching_imputer(results, dir),
    }
}

/// Setup indices sorted by ascending `R̄-OMS` (grid order on ties).
fn by_baseline(results: &[SetupResult<f64>]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..results.len()).collect();
    order.sort_by(|&a, &b| results[a].r_oms_bar.total_cmp(&results[b].r_oms_bar).then(a.cmp(&b)));
    order
}

/// Rank of every method (rows) in every setup (columns, sorted by `R̄-OMS`).
fn rank_grids(results: &[SetupResult<f64>], dir: &Path) -> Result<Vec<PathBuf>> {
    let order = by_baseline(results);
    let mut written = Vec::new();
    for measure in Measure::ALL {
        let rankings = setup_rankings(results, measure)?;
        let reference = most_frequent_ranking(&rankings)?;
        let mut header = vec!["method".to_string()];
        header.extend(order.iter().map(|&i| results[i].setup.id()));
        let mut rows = vec![std::iter::once("r_oms_bar".to_string())
            .chain(order.iter().map(|&i| fmt_float(results[i].r_oms_bar)))
            .collect::<Vec<_>>()];
        for method in &reference.methods {
            let mut row = vec![method.clone()];
            row.extend(order.iter().map(|&i| {
                rankings[i].position(method).map_or_else(String::new, |p| (p + 1).to_string())
            }));
            rows.push(row);
        }
        let path = dir.join(format!("rankings_{}.csv", measure.name()));
        write_csv(&path, &header.iter().map(String::as_str).collect::<Vec<_>>(), rows)?;
        written.push(path);
    }
    Ok(written)
}

/// Long-format ranking table plus the distinct-ranking counts.
pub fn rank_tables(results: &[SetupResult<f64>], dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut rows = Vec::new();
    let mut counts = Vec::new();
    for measure in Measure::ALL {
        let rankings = setup_rankings(results, measure)?;
        counts.push(vec![measure.name().to_string(), distinct_rankings(&rankings).to_string(), rankings.len().to_string()]);
        for (r, res) in rankings.iter().zip(results) {
            for (p, m) in r.methods.iter().enumerate() {
                rows.push(vec![
                    r.setup_id.clone(),
                    fmt_float(res.r_oms_bar),
                    measure.name().to_string(),
                    (p + 1).to_string(),
                    m.clone(),
                ]);
            }
        }
    }
    let table = dir.join("rankings.csv");
    write_csv(&table, &["setup", "r_oms_bar", "measure", "position", "method"], rows)?;
    let distinct = dir.join("distinct_rankings.csv");
    write_csv(&distinct, &["measure", "distinct", "setups"], counts)?;
    Ok(vec![table, distinct])
}

#[derive(Serialize)]
struct SpreadEntry {
    measure: Measure,
    correlation: Option<f64>,
    error: Option<String>,
}

fn consistency(results: &[SetupResult<f64>], dir: &Path, master_seed: u64) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let mut rows = Vec::new();
    for measure in [Measure::Mif, Measure::Lif, Measure::Srg] {
        let rep = consistency_report(results, measure, master_seed)?;
        for c in &rep.correlations {
            rows.push(vec![
                c.variable.name().to_string(),
                measure.name().to_string(),
                fmt_float(c.value),
                c.std.map(fmt_float).unwrap_or_default(),
            ]);
        }
        let path = dir.join(format!("consistency_{}.json", measure.name()));
        write_json(&path, &rep)?;
        written.push(path);
    }
    let path = dir.join("correlations.csv");
    write_csv(&path, &["variable", "measure", "correlation", "std"], rows)?;
    written.push(path);

    let spread: Vec<SpreadEntry> = [Measure::Mif, Measure::Lif]
        .into_iter()
        .map(|measure| match spread_correlation(results, measure) {
            Ok(c) => SpreadEntry {
                measure,
                correlation: Some(c),
                error: None,
            },
            Err(e) => SpreadEntry {
                measure,
                correlation: None,
                error: Some(e.to_string()),
            },
        })
        .collect();
    let path = dir.join("spread_correlation.json");
    write_json(&path, &spread)?;
    written.push(path);
    Ok(written)
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn boxplot(results: &[SetupResult<f64>], dir: &Path) -> Result<Vec<PathBuf>> {
    // (imputer, measure, method) -> values across setups; "all" pools every imputer.
    let mut groups: BTreeMap<(String, Measure, String), Vec<f64>> = BTreeMap::new();
    for r in results {
        for rec in &r.records {
            for measure in Measure::ALL {
                for imputer in [r.setup.imputer_id.clone(), "all".to_string()] {
                    groups
                        .entry((imputer, measure, rec.method_id.clone()))
                        .or_default()
                        .push(measure.of(rec));
                }
            }
        }
    }
    let rows = groups.into_iter().map(|((imputer, measure, method), mut v)| {
        v.sort_by(f64::total_cmp);
        let mut row = vec![imputer, measure.name().to_string(), method, v.len().to_string()];
        row.extend([0.0, 0.25, 0.5, 0.75, 1.0].map(|q| fmt_float(quantile(&v, q))));
        row
    });
    let path = dir.join("boxplot.csv");
    write_csv(&path, &["imputer", "measure", "method", "count", "min", "q1", "median", "q3", "max"], rows)?;
    Ok(vec![path])
}

/// Cross table of attribution imputer × PF imputer. `delta_to_matched` is the
/// SRG of the matched attribution minus this one, under the same PF imputer.
fn matching_imputer(results: &[SetupResult<f64>], dir: &Path) -> Result<Vec<PathBuf>> {
    // (method, attribution imputer, pf imputer) -> SRGs
    let mut cells: BTreeMap<(String, String, String), Vec<f64>> = BTreeMap::new();
    for r in results {
        for rec in &r.records {
            if let Some((method, attr)) = rec.method_id.split_once('@') {
                cells
                    .entry((method.to_string(), attr.to_string(), r.setup.imputer_id.clone()))
                    .or_default()
                    .push(rec.srg);
            }
        }
    }
    if cells.is_empty() {
        return Err(Error::InvalidArgument(
            "no matching-experiment results (method ids of the form method@imputer)".into(),
        ));
    }
    let mean: BTreeMap<_, f64> = cells
        .into_iter()
        .map(|(k, v)| {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            (k, m)
        })
        .collect();
    let pf_imputers: BTreeSet<&String> = mean.keys().map(|k| &k.2).collect();
    let mut rows = Vec::new();
    for ((method, attr, pf), srg) in &mean {
        let matched = attr == pf;
        let delta = mean
            .get(&(method.clone(), pf.clone(), pf.clone()))
            .map(|m| fmt_float(m - srg))
            .unwrap_or_default();
        rows.push(vec![
            method.clone(),
            attr.clone(),
            pf.clone(),
            fmt_float(*srg),
            delta,
            if matched { "matched".into() } else { String::new() },
        ]);
    }
    log::debug!("matching table over {} PF imputers", pf_imputers.len());
    let path = dir.join("matching_imputer.csv");
    write_csv(
        &path,
        &["method", "attribution_imputer", "pf_imputer", "srg", "delta_to_matched", "matched"],
        rows,
    )?;
    Ok(vec![path])
}
