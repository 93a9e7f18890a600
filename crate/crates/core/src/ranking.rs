//! Method rankings across setups and how consistent they are: the modal
//! ranking, nDCG against it, and correlations of nDCG with setup variables.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::domain::MeasureRecord;
use crate::error::{Error, Result};
use crate::measures::{curve_spread, SetupResult};
use crate::rng;
use crate::scalar::Scalar;

pub const RANDOM_SORTINGS: usize = 1000;
pub const MAX_CATEGORY_LEVELS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Measure {
    Mif,
    Lif,
    Mrg,
    Lrg,
    Srg,
}

impl Measure {
    pub const ALL: [Measure; 5] = [Measure::Mif, Measure::Lif, Measure::Mrg, Measure::Lrg, Measure::Srg];

    pub fn lower_is_better(self) -> bool {
        self == Measure::Mif
    }

    pub fn of<T: Scalar>(self, r: &MeasureRecord<T>) -> f64 {
        match self {
            Measure::Mif => r.mif,
            Measure::Lif => r.lif,
            Measure::Mrg => r.mrg,
            Measure::Lrg => r.lrg,
            Measure::Srg => r.srg,
        }
        .as_f64()
    }

    pub fn name(self) -> &'static str {
        match self {
            Measure::Mif => "mif",
            Measure::Lif => "lif",
            Measure::Mrg => "mrg",
            Measure::Lrg => "lrg",
            Measure::Srg => "srg",
        }
    }
}

impl std::str::FromStr for Measure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Measure::ALL
            .into_iter()
            .find(|m| m.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::InvalidArgument(format!("unknown measure {s}")))
    }
}

/// Methods of one setup, best first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ranking {
    pub setup_id: String,
    pub methods: Vec<String>,
    pub measure: Measure,
}

impl Ranking {
    pub fn position(&self, method: &str) -> Option<usize> {
        self.methods.iter().position(|m| m == method)
    }

    fn method_set(&self) -> BTreeSet<&str> {
        self.methods.iter().map(String::as_str).collect()
    }
}

/// Sorts methods by `measure` in its better-first direction; ties go to the
/// lexicographically smaller method id.
pub fn extract_ranking<T: Scalar>(records: &[MeasureRecord<T>], measure: Measure) -> Result<Ranking> {
    let first = records
        .first()
        .ok_or_else(|| Error::Ranking("no records to rank".into()))?;
    let mut seen = BTreeSet::new();
    for r in records {
        if !seen.insert(r.method_id.as_str()) {
            return Err(Error::Ranking(format!("duplicate method {}", r.method_id)));
        }
        if r.setup_id != first.setup_id {
            return Err(Error::Ranking("records span several setups".into()));
        }
    }
    let mut rows: Vec<(f64, &str)> = records.iter().map(|r| (measure.of(r), r.method_id.as_str())).collect();
    if let Some((v, m)) = rows.iter().find(|(v, _)| !v.is_finite()) {
        return Err(Error::Ranking(format!("method {m} has measure {v}")));
    }
    rows.sort_by(|a, b| {
        let by_value = if measure.lower_is_better() {
            a.0.total_cmp(&b.0)
        } else {
            b.0.total_cmp(&a.0)
        };
        by_value.then_with(|| a.1.cmp(b.1))
    });
    Ok(Ranking {
        setup_id: first.setup_id.clone(),
        methods: rows.into_iter().map(|(_, m)| m.to_string()).collect(),
        measure,
    })
}

fn check_same_methods(a: &Ranking, b: &Ranking) -> Result<()> {
    if a.methods.len() != b.methods.len() || a.method_set() != b.method_set() || a.method_set().len() != a.methods.len() {
        return Err(Error::Ranking(format!(
            "method sets differ between {} and {}",
            a.setup_id, b.setup_id
        )));
    }
    Ok(())
}

/// Number of distinct method sequences.
pub fn distinct_rankings(rankings: &[Ranking]) -> usize {
    rankings.iter().map(|r| &r.methods).collect::<BTreeSet<_>>().len()
}

/// Modal ranking; equally frequent candidates resolve to the lexicographically
/// smallest method sequence.
pub fn most_frequent_ranking(rankings: &[Ranking]) -> Result<Ranking> {
    let first = rankings
        .first()
        .ok_or_else(|| Error::Ranking("no rankings".into()))?;
    let mut counts: BTreeMap<&Vec<String>, usize> = BTreeMap::new();
    for r in rankings {
        check_same_methods(first, r)?;
        *counts.entry(&r.methods).or_default() += 1;
    }
    let best = counts.values().copied().max().expect("non-empty");
    // BTreeMap iterates in lexicographic order, so the first hit is the smallest.
    let methods = counts
        .into_iter()
        .find(|(_, c)| *c == best)
        .map(|(m, _)| m.clone())
        .expect("non-empty");
    Ok(Ranking {
        setup_id: "most_frequent".into(),
        methods,
        measure: first.measure,
    })
}

/// Linear relevance: `k − position` in the reference.
pub fn linear_gain(k: usize, reference_position: usize) -> f64 {
    (k - reference_position) as f64
}

/// nDCG with linear relevance and `log2(i + 1)` discount.
pub fn ndcg(ranking: &Ranking, reference: &Ranking) -> Result<f64> {
    ndcg_with_gain(ranking, reference, linear_gain)
}

/// nDCG with a custom relevance `gain(k, reference_position)`.
pub fn ndcg_with_gain(ranking: &Ranking, reference: &Ranking, gain: impl Fn(usize, usize) -> f64) -> Result<f64> {
    check_same_methods(ranking, reference)?;
    let k = reference.methods.len();
    let pos: HashMap<&str, usize> = reference.methods.iter().enumerate().map(|(i, m)| (m.as_str(), i)).collect();
    let dcg = |methods: &[String]| -> f64 {
        methods
            .iter()
            .enumerate()
            .map(|(i, m)| gain(k, pos[m.as_str()]) / ((i + 2) as f64).log2())
            .sum()
    };
    let ideal = dcg(&reference.methods);
    if !(ideal > 0.0) {
        return Err(Error::Ranking("ideal DCG is not positive".into()));
    }
    Ok(dcg(&ranking.methods) / ideal)
}

/// Pearson correlation from a single pass of running co-moments.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} values", x.len()),
            actual: format!("{}", y.len()),
        });
    }
    if x.len() < 2 {
        return Err(Error::UndefinedCorrelation("fewer than two points".into()));
    }
    let (mut mx, mut my, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (k, (&a, &b)) in x.iter().zip(y).enumerate() {
        let n = (k + 1) as f64;
        let dx = a - mx;
        let dy = b - my;
        mx += dx / n;
        my += dy / n;
        sxx += dx * (a - mx);
        syy += dy * (b - my);
        sxy += dx * (b - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return Err(Error::UndefinedCorrelation("zero variance".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SortVariable {
    NSuperpixels,
    Imputer,
    Model,
    ROmsBar,
    NrOmsBar,
    Random,
}

impl SortVariable {
    pub const ALL: [SortVariable; 6] = [
        SortVariable::NSuperpixels,
        SortVariable::Imputer,
        SortVariable::Model,
        SortVariable::ROmsBar,
        SortVariable::NrOmsBar,
        SortVariable::Random,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SortVariable::NSuperpixels => "n_superpixels",
            SortVariable::Imputer => "imputer",
            SortVariable::Model => "model",
            SortVariable::ROmsBar => "r_oms_bar",
            SortVariable::NrOmsBar => "nr_oms_bar",
            SortVariable::Random => "random",
        }
    }
}

/// Correlation of a sorting variable with per-setup nDCG; `std` is set for
/// the random variable only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub variable: SortVariable,
    pub value: f64,
    pub std: Option<f64>,
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(k - 1) {
        for at in 0..=p.len() {
            let mut q = p.clone();
            q.insert(at, k - 1);
            out.push(q);
        }
    }
    out
}

/// Maximum Pearson correlation over every assignment of ranks to the levels.
pub fn categorical_correlation(levels: &[&str], y: &[f64]) -> Result<f64> {
    let distinct: Vec<&str> = levels.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    if distinct.len() > MAX_CATEGORY_LEVELS {
        return Err(Error::InvalidArgument(format!(
            "{} levels exceed the {MAX_CATEGORY_LEVELS}-level limit",
            distinct.len()
        )));
    }
    if distinct.len() < 2 {
        return Err(Error::UndefinedCorrelation("a single level has zero variance".into()));
    }
    let index: HashMap<&str, usize> = distinct.iter().enumerate().map(|(i, l)| (*l, i)).collect();
    let mut best = f64::NEG_INFINITY;
    for perm in permutations(distinct.len()) {
        let x: Vec<f64> = levels.iter().map(|l| perm[index[l]] as f64).collect();
        best = best.max(pearson(&x, y)?);
    }
    Ok(best)
}

/// Mean and population σ of the correlation between `y` and `draws` uniform
/// random variables.
pub fn random_correlation(y: &[f64], draws: usize, master_seed: u64) -> Result<(f64, f64)> {
    let values: Vec<f64> = (0..draws)
        .map(|d| {
            let mut stream = rng::stream(master_seed, &[rng::hash_str("random_sorting"), d as u64]);
            let x: Vec<f64> = y.iter().map(|_| stream.random::<f64>()).collect();
            pearson(&x, y)
        })
        .collect::<Result<_>>()?;
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Ok((mean, var.sqrt()))
}

fn require_setups<T>(setups: &[SetupResult<T>]) -> Result<()> {
    if setups.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "needs at least 3 setups, got {}",
            setups.len()
        )));
    }
    Ok(())
}

/// Correlation between a setup variable and the setups' nDCG values.
pub fn sort_consistency<T: Scalar>(
    setups: &[SetupResult<T>],
    ndcgs: &[f64],
    variable: SortVariable,
    master_seed: u64,
) -> Result<Correlation> {
    require_setups(setups)?;
    let numeric = |f: &dyn Fn(&SetupResult<T>) -> f64| -> Result<f64> {
        pearson(&setups.iter().map(f).collect::<Vec<_>>(), ndcgs)
    };
    let (value, std) = match variable {
        SortVariable::NSuperpixels => (numeric(&|s| s.setup.n_superpixels as f64)?, None),
        SortVariable::ROmsBar => (numeric(&|s| s.r_oms_bar.as_f64())?, None),
        SortVariable::NrOmsBar => (numeric(&|s| s.nr_oms_bar.as_f64())?, None),
        SortVariable::Imputer => {
            let levels: Vec<&str> = setups.iter().map(|s| s.setup.imputer_id.as_str()).collect();
            (categorical_correlation(&levels, ndcgs)?, None)
        }
        SortVariable::Model => {
            let levels: Vec<&str> = setups.iter().map(|s| s.setup.predictor_id.as_str()).collect();
            (categorical_correlation(&levels, ndcgs)?, None)
        }
        SortVariable::Random => {
            let (m, s) = random_correlation(ndcgs, RANDOM_SORTINGS, master_seed)?;
            (m, Some(s))
        }
    };
    Ok(Correlation { variable, value, std })
}

/// Pearson correlation between per-setup curve spread (MIF or LIF direction)
/// and per-setup `R̄-OMS`.
pub fn spread_correlation<T: Scalar>(setups: &[SetupResult<T>], measure: Measure) -> Result<f64> {
    require_setups(setups)?;
    let spreads: Vec<f64> = setups
        .iter()
        .map(|s| {
            let curves = match measure {
                Measure::Mif => &s.mean_mif_curves,
                Measure::Lif => &s.mean_lif_curves,
                _ => return Err(Error::InvalidArgument("spread is defined for mif or lif".into())),
            };
            Ok(curve_spread(curves)?.as_f64())
        })
        .collect::<Result<_>>()?;
    let rbar: Vec<f64> = setups.iter().map(|s| s.r_oms_bar.as_f64()).collect();
    pearson(&spreads, &rbar)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SetupNdcg {
    pub setup_id: String,
    pub r_oms_bar: f64,
    pub ndcg: f64,
    pub ranking: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub measure: Measure,
    pub reference: Ranking,
    pub per_setup: Vec<SetupNdcg>,
    pub correlations: Vec<Correlation>,
    /// Correlation that could not be computed, with the reason.
    pub undefined: Vec<(SortVariable, String)>,
    pub distinct_rankings: usize,
}

pub fn setup_rankings<T: Scalar>(setups: &[SetupResult<T>], measure: Measure) -> Result<Vec<Ranking>> {
    setups.iter().map(|s| extract_ranking(&s.records, measure)).collect()
}

/// Reference ranking, per-setup nDCG and every sorting-variable correlation.
/// Variables whose correlation is undefined (e.g. a single imputer in the
/// grid) are listed in `undefined` instead of failing the report.
pub fn consistency_report<T: Scalar>(setups: &[SetupResult<T>], measure: Measure, master_seed: u64) -> Result<ConsistencyReport> {
    require_setups(setups)?;
    let rankings = setup_rankings(setups, measure)?;
    let reference = most_frequent_ranking(&rankings)?;
    let ndcgs: Vec<f64> = rankings.iter().map(|r| ndcg(r, &reference)).collect::<Result<_>>()?;
    let mut correlations = Vec::new();
    let mut undefined = Vec::new();
    for v in SortVariable::ALL {
        match sort_consistency(setups, &ndcgs, v, master_seed) {
            Ok(c) => correlations.push(c),
            Err(Error::UndefinedCorrelation(why)) => undefined.push((v, why)),
            Err(e) => return Err(e),
        }
    }
    Ok(ConsistencyReport {
        measure,
        per_setup: setups
            .iter()
            .zip(&rankings)
            .zip(&ndcgs)
            .map(|((s, r), &g)| SetupNdcg {
                setup_id: s.setup.id(),
                r_oms_bar: s.r_oms_bar.as_f64(),
                ndcg: g,
                ranking: r.methods.clone(),
            })
            .collect(),
        reference,
        correlations,
        undefined,
        distinct_rankings: distinct_rankings(&rankings),
    })
}
