//! Config-driven runs over the grid of occlusion setups.
//!
//! Each setup is persisted to `<output_dir>/setups/NNNN.json` as soon as it
//! finishes; `resume` skips setups whose file matches the current
//! configuration. Images inside a setup run on a worker pool, and every
//! random draw is keyed by (master seed, task), so the worker count never
//! changes a result.

pub mod config;
pub mod data;
pub mod output;
pub mod report;

use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::attribution::{attribute, AttributionMethod};
use crate::domain::{ExperimentSetup, ImageTensor, SuperpixelMask};
use crate::error::{Error, Result};
use crate::imputation::{Imputer, ImputerDescriptor};
use crate::measures::{aggregate_setup, attribution_curves, ImageMeasures, SetupResult};
use crate::predictor::{probe_model_scope, Predictor, PredictorDescriptor, ScopeSample};
use crate::rng;
use crate::scalar::Scalar;
use crate::segmentation::Segmenter;
use crate::value::{random_pf_baseline, OcclusionCache, OcclusionContext};

pub use config::{ExperimentConfig, ImageSource, Precision};
pub use data::Dataset;

/// Scalars the harness can persist.
pub trait RunScalar: Scalar + Serialize + DeserializeOwned {}

impl<T: Scalar + Serialize + DeserializeOwned> RunScalar for T {}

pub const CACHE_FILE: &str = "occlusion.cache";

/// One point of the grid with its ingredients.
#[derive(Debug, Clone)]
pub struct SetupPlan<'c> {
    pub index: usize,
    pub predictor: &'c PredictorDescriptor,
    pub imputer: &'c ImputerDescriptor,
    pub segmenter: &'c Segmenter,
    pub n: usize,
    pub setup: ExperimentSetup,
}

/// Grid points in predictor, imputer, segmenter, n order.
pub fn plan_setups(config: &ExperimentConfig) -> Vec<SetupPlan<'_>> {
    let g = &config.grid;
    let mut plans = Vec::new();
    for predictor in &g.predictors {
        for imputer in &g.imputers {
            for segmenter in &g.segmenters {
                for &n in &g.n_superpixels {
                    let samples = if imputer.is_deterministic() { 1 } else { config.imputer_samples };
                    plans.push(SetupPlan {
                        index: plans.len(),
                        predictor,
                        imputer,
                        segmenter,
                        n,
                        setup: ExperimentSetup {
                            imputer_id: imputer.id(),
                            segmenter_id: segmenter.id(),
                            n_superpixels: n,
                            predictor_id: predictor.id().to_string(),
                            imputer_samples: samples,
                            baseline_orderings: config.baseline_orderings,
                            master_seed: config.master_seed,
                        },
                    });
                }
            }
        }
    }
    plans
}

/// Attribution of one method on one image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionRecord {
    pub setup_id: String,
    pub image_id: String,
    pub method_id: String,
    pub phi: Vec<f64>,
    /// Coalition evaluations spent (0 for model-free methods).
    pub calls: u64,
}

/// A setup that was skipped, with the first error met.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetupFailure {
    pub setup_id: String,
    pub reason: String,
}

/// Everything persisted per finished setup.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SetupArtifact<T> {
    pub index: usize,
    pub fingerprint: u64,
    pub result: SetupResult<T>,
    pub attributions: Vec<AttributionRecord>,
}

#[derive(Debug, Clone)]
pub struct BenchmarkOutcome<T> {
    pub artifacts: Vec<SetupArtifact<T>>,
    pub failures: Vec<SetupFailure>,
}

impl<T> BenchmarkOutcome<T> {
    pub fn results(&self) -> Vec<&SetupResult<T>> {
        self.artifacts.iter().map(|a| &a.result).collect()
    }
}

/// Hash of everything that determines a setup's outcome.
fn fingerprint(config: &ExperimentConfig, plan: &SetupPlan<'_>) -> Result<u64> {
    let key = serde_json::to_string(&(
        &plan.setup,
        plan.predictor,
        plan.imputer,
        plan.segmenter,
        &config.images,
        &config.methods,
        &config.matching,
        config.epsilon_floor,
        config.precision,
    ))?;
    Ok(rng::hash_str(&key))
}

pub fn setups_dir(output_dir: &Path) -> PathBuf {
    output_dir.join("setups")
}

fn artifact_path(output_dir: &Path, index: usize) -> PathBuf {
    setups_dir(output_dir).join(format!("{index:04}.json"))
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Finished setups found under `output_dir`, in grid order.
pub fn load_artifacts<T: RunScalar>(output_dir: &Path) -> Result<Vec<SetupArtifact<T>>> {
    let dir = setups_dir(output_dir);
    let mut files: Vec<PathBuf> = std::fs::read_dir(&dir)
        .map_err(|e| Error::io(&dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    files.sort();
    files
        .iter()
        .map(|f| {
            let text = std::fs::read(f).map_err(|e| Error::io(f, e))?;
            Ok(serde_json::from_slice(&text)?)
        })
        .collect()
}

fn worker_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))
}

fn open_cache(config: &ExperimentConfig) -> Result<Option<OcclusionCache>> {
    match &config.cache_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            Ok(Some(OcclusionCache::open(&dir.join(CACHE_FILE))?))
        }
        None => Ok(None),
    }
}

/// Setup-wide resources shared by its images.
struct SetupRun<'a, T: Scalar> {
    config: &'a ExperimentConfig,
    plan: &'a SetupPlan<'a>,
    data: &'a Dataset<T>,
    cache: Option<&'a OcclusionCache>,
    shared_predictor: Option<Arc<dyn Predictor<T>>>,
    parallel: bool,
}

/// Per-image occlusion state: mask, predictor and PF imputer.
struct ImageState<T: Scalar> {
    id: String,
    image: Arc<ImageTensor<T>>,
    mask: SuperpixelMask,
    predictor: Arc<dyn Predictor<T>>,
    imputer: Box<dyn Imputer<T>>,
}

impl<'a, T: Scalar> SetupRun<'a, T> {
    fn new(config: &'a ExperimentConfig, plan: &'a SetupPlan<'a>, data: &'a Dataset<T>, cache: Option<&'a OcclusionCache>) -> Result<Self> {
        let shared_predictor = if plan.predictor.is_per_image() {
            None
        } else {
            Some(plan.predictor.build(config.master_seed, None)?)
        };
        Ok(Self {
            config,
            plan,
            data,
            cache,
            shared_predictor,
            parallel: config.workers > 1,
        })
    }

    fn state(&self, index: usize) -> Result<ImageState<T>> {
        let id = self.data.ids[index].clone();
        let image = self.data.images[index].clone();
        let seed = self.config.master_seed;
        let mask = self.plan.segmenter.segment(&*image, &id, self.plan.n, seed)?;
        let predictor = match &self.shared_predictor {
            Some(p) => p.clone(),
            None => self.plan.predictor.build(seed, Some((&image, rng::hash_str(&id), &mask)))?,
        };
        let imputer = self.build_imputer(self.plan.imputer, &id)?;
        Ok(ImageState {
            id,
            image,
            mask,
            predictor,
            imputer,
        })
    }

    fn build_imputer(&self, d: &ImputerDescriptor, image_id: &str) -> Result<Box<dyn Imputer<T>>> {
        d.build(&self.data.channel_means, self.data.pool.clone(), image_id, self.config.master_seed)
    }

    fn context<'s>(&self, st: &'s ImageState<T>, imputer: &'s dyn Imputer<T>, imputer_id: &str) -> Result<OcclusionContext<'s, T>>
    where
        'a: 's,
    {
        let ctx = OcclusionContext::new(
            &*st.predictor,
            &st.image,
            &st.id,
            &st.mask,
            imputer,
            self.config.imputer_samples,
            self.config.master_seed,
        )?
        .with_batch_size(self.config.batch_size);
        Ok(match self.cache {
            Some(cache) => {
                let key = rng::combine(&[
                    rng::hash_str(self.plan.predictor.id()),
                    rng::hash_str(imputer_id),
                    rng::hash_str(&self.plan.segmenter.id()),
                    self.plan.n as u64,
                    rng::hash_str(&st.id),
                    self.config.master_seed,
                    ctx.target_class() as u64,
                    std::mem::size_of::<T>() as u64,
                ]);
                ctx.with_cache(cache, key)
            }
            None => ctx,
        })
    }

    /// Attributions of every configured method; model-based methods run once
    /// per attribution imputer when a matching experiment is configured.
    fn attributions(
        &self,
        st: &ImageState<T>,
        pf_ctx: &OcclusionContext<'_, T>,
    ) -> Result<Vec<crate::attribution::AttributionOutcome<T>>> {
        let spec = self.config.value_spec();
        let setup_id = self.plan.setup.id();
        let mut out = Vec::new();
        for method in &self.config.methods {
            match (&self.config.matching, method.uses_model()) {
                (Some(matching), true) => {
                    for d in &matching.attribution_imputers {
                        let imputer = self.build_imputer(d, &st.id)?;
                        let ctx = self.context(st, &*imputer, &d.id())?;
                        let mut o = attribute(method, &ctx, &st.id, &st.mask, &spec, &setup_id, self.parallel)?;
                        o.vector.method_id = matched_method_id(method, d);
                        out.push(o);
                    }
                }
                _ => out.push(attribute(method, pf_ctx, &st.id, &st.mask, &spec, &setup_id, self.parallel)?),
            }
        }
        Ok(out)
    }

    fn image_measures(&self, index: usize) -> Result<(ImageMeasures<T>, Vec<AttributionRecord>)> {
        let st = self.state(index)?;
        let ctx = self.context(&st, &*st.imputer, &self.plan.imputer.id())?;
        let baseline = random_pf_baseline(&ctx, self.config.baseline_orderings)?;
        let outcomes = self.attributions(&st, &ctx)?;
        let mut curves = Vec::with_capacity(outcomes.len());
        for o in &outcomes {
            curves.push((o.vector.method_id.clone(), attribution_curves(&ctx, &o.vector)?));
        }
        Ok((
            ImageMeasures {
                r_oms_bar: baseline.r_oms_bar,
                nr_oms_bar: baseline.nr_oms_bar,
                random_curve: baseline.mean_curve,
                curves,
            },
            records(&st.id, &self.plan.setup.id(), outcomes),
        ))
    }

    fn image_attributions(&self, index: usize) -> Result<Vec<AttributionRecord>> {
        let st = self.state(index)?;
        let ctx = self.context(&st, &*st.imputer, &self.plan.imputer.id())?;
        Ok(records(&st.id, &self.plan.setup.id(), self.attributions(&st, &ctx)?))
    }

    fn image_scope(&self, index: usize) -> Result<Vec<ScopeSample>> {
        let st = self.state(index)?;
        let ctx = self.context(&st, &*st.imputer, &self.plan.imputer.id())?;
        probe_model_scope(&ctx, &self.config.characterize.fractions, self.config.characterize.draws)
    }
}

/// `method@imputer` label of a matching-experiment attribution.
pub fn matched_method_id(method: &AttributionMethod, imputer: &ImputerDescriptor) -> String {
    format!("{}@{}", method.id(), imputer.id())
}

fn records<T: Scalar>(image_id: &str, setup_id: &str, outcomes: Vec<crate::attribution::AttributionOutcome<T>>) -> Vec<AttributionRecord> {
    outcomes
        .into_iter()
        .map(|o| AttributionRecord {
            setup_id: setup_id.to_string(),
            image_id: image_id.to_string(),
            method_id: o.vector.method_id,
            phi: o.vector.phi.iter().map(|v| v.as_f64()).collect(),
            calls: o.calls,
        })
        .collect()
}

/// Runs `f` for every image on the pool and keeps image order.
fn per_image<R: Send>(pool: &rayon::ThreadPool, count: usize, f: impl Fn(usize) -> Result<R> + Sync) -> Result<Vec<R>> {
    pool.install(|| (0..count).into_par_iter().map(&f).collect::<Vec<_>>())
        .into_iter()
        .collect()
}

fn prepare(config: &ExperimentConfig) -> Result<()> {
    config.validate()?;
    let dir = setups_dir(&config.output_dir);
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))
}

/// Full benchmark: baseline, attributions, curves and measures per setup.
pub fn run_benchmark<T: RunScalar>(config: &ExperimentConfig, resume: bool) -> Result<BenchmarkOutcome<T>> {
    prepare(config)?;
    let data: Dataset<T> = Dataset::load(&config.images, config.master_seed)?;
    let cache = open_cache(config)?;
    let pool = worker_pool(config.workers)?;
    let mut outcome = BenchmarkOutcome {
        artifacts: Vec::new(),
        failures: Vec::new(),
    };
    for plan in plan_setups(config) {
        let fp = fingerprint(config, &plan)?;
        let path = artifact_path(&config.output_dir, plan.index);
        if resume && path.exists() {
            let stored: Result<SetupArtifact<T>> = std::fs::read(&path)
                .map_err(|e| Error::io(&path, e))
                .and_then(|b| Ok(serde_json::from_slice(&b)?));
            match stored {
                Ok(a) if a.fingerprint == fp => {
                    log::info!("setup {} already done", plan.setup.id());
                    outcome.artifacts.push(a);
                    continue;
                }
                _ => log::info!("setup {} is stale, recomputing", plan.setup.id()),
            }
        }
        log::info!("setup {}/{}: {}", plan.index + 1, config.grid_len(), plan.setup.id());
        let run = SetupRun::new(config, &plan, &data, cache.as_ref()).and_then(|run| {
            let per = per_image(&pool, data.len(), |i| run.image_measures(i))?;
            let (measures, attributions): (Vec<_>, Vec<_>) = per.into_iter().unzip();
            let result = aggregate_setup(&plan.setup, &measures)?;
            Ok(SetupArtifact {
                index: plan.index,
                fingerprint: fp,
                result,
                attributions: attributions.into_iter().flatten().collect(),
            })
        });
        if let Some(c) = &cache {
            c.flush()?;
        }
        match run {
            Ok(artifact) => {
                write_atomic(&path, &serde_json::to_vec_pretty(&artifact)?)?;
                outcome.artifacts.push(artifact);
            }
            Err(e) => {
                log::warn!("setup {} failed: {e}", plan.setup.id());
                outcome.failures.push(SetupFailure {
                    setup_id: plan.setup.id(),
                    reason: e.to_string(),
                });
            }
        }
    }
    output::write_benchmark(&config.output_dir, &outcome)?;
    Ok(outcome)
}

/// Attributions only, for every setup and image.
pub fn run_attributions<T: RunScalar>(config: &ExperimentConfig) -> Result<(Vec<AttributionRecord>, Vec<SetupFailure>)> {
    prepare(config)?;
    let data: Dataset<T> = Dataset::load(&config.images, config.master_seed)?;
    let cache = open_cache(config)?;
    let pool = worker_pool(config.workers)?;
    let mut all = Vec::new();
    let mut failures = Vec::new();
    for plan in plan_setups(config) {
        let run = SetupRun::new(config, &plan, &data, cache.as_ref())
            .and_then(|run| per_image(&pool, data.len(), |i| run.image_attributions(i)));
        match run {
            Ok(r) => all.extend(r.into_iter().flatten()),
            Err(e) => failures.push(SetupFailure {
                setup_id: plan.setup.id(),
                reason: e.to_string(),
            }),
        }
    }
    if let Some(c) = &cache {
        c.flush()?;
    }
    output::write_attributions(&config.output_dir, &all, &failures)?;
    Ok((all, failures))
}

/// R-OMS / NR-OMS at each occlusion fraction, pooled over images.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacterizationRow {
    pub setup_id: String,
    pub fraction: f64,
    pub occluded: usize,
    pub r_oms_mean: f64,
    pub r_oms_std: f64,
    pub nr_oms_mean: f64,
    pub nr_oms_std: f64,
}

/// Pools per-image (mean, std) pairs of equal sample size.
fn pooled(stats: &[(f64, f64)]) -> (f64, f64) {
    let k = stats.len() as f64;
    let mean = stats.iter().map(|s| s.0).sum::<f64>() / k;
    let second = stats.iter().map(|s| s.1 * s.1 + s.0 * s.0).sum::<f64>() / k;
    (mean, (second - mean * mean).max(0.0).sqrt())
}

pub fn run_characterization<T: RunScalar>(config: &ExperimentConfig) -> Result<(Vec<CharacterizationRow>, Vec<SetupFailure>)> {
    prepare(config)?;
    let data: Dataset<T> = Dataset::load(&config.images, config.master_seed)?;
    let cache = open_cache(config)?;
    let pool = worker_pool(config.workers)?;
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for plan in plan_setups(config) {
        let run = SetupRun::new(config, &plan, &data, cache.as_ref())
            .and_then(|run| per_image(&pool, data.len(), |i| run.image_scope(i)));
        match run {
            Ok(per) => {
                for (f, &fraction) in config.characterize.fractions.iter().enumerate() {
                    let r: Vec<(f64, f64)> = per.iter().map(|s| (s[f].r_oms_mean, s[f].r_oms_std)).collect();
                    let nr: Vec<(f64, f64)> = per.iter().map(|s| (s[f].nr_oms_mean, s[f].nr_oms_std)).collect();
                    let ((r_oms_mean, r_oms_std), (nr_oms_mean, nr_oms_std)) = (pooled(&r), pooled(&nr));
                    rows.push(CharacterizationRow {
                        setup_id: plan.setup.id(),
                        fraction,
                        occluded: per[0][f].occluded,
                        r_oms_mean,
                        r_oms_std,
                        nr_oms_mean,
                        nr_oms_std,
                    });
                }
            }
            Err(e) => failures.push(SetupFailure {
                setup_id: plan.setup.id(),
                reason: e.to_string(),
            }),
        }
    }
    if let Some(c) = &cache {
        c.flush()?;
    }
    output::write_characterization(&config.output_dir, &rows, &failures)?;
    Ok((rows, failures))
}

impl ExperimentConfig {
    /// Number of setups in the grid.
    pub fn grid_len(&self) -> usize {
        let g = &self.grid;
        g.predictors.len() * g.imputers.len() * g.segmenters.len() * g.n_superpixels.len()
    }
}
