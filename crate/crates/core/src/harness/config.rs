//! Experiment configuration (TOML).

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::attribution::{AttributionMethod, ShapleyMode, MAX_EXACT_PLAYERS};
use crate::error::{Error, Result};
use crate::imputation::ImputerDescriptor;
use crate::predictor::PredictorDescriptor;
use crate::segmentation::Segmenter;
use crate::value::ValueFunctionSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F32,
    #[default]
    F64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ImageSource {
    /// Generated smooth color images plus a donor pool for the train-set imputer.
    Synthetic {
        #[serde(default = "default_count")]
        count: usize,
        #[serde(default = "default_side")]
        width: usize,
        #[serde(default = "default_side")]
        height: usize,
        #[serde(default = "default_pool_size")]
        pool_size: usize,
    },
    /// PNG files of a directory in file-name order.
    Directory {
        path: PathBuf,
        #[serde(default)]
        limit: Option<usize>,
        /// Donor images for the train-set imputer.
        #[serde(default)]
        pool_dir: Option<PathBuf>,
    },
}

fn default_count() -> usize {
    8
}

fn default_side() -> usize {
    32
}

fn default_pool_size() -> usize {
    16
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub n_superpixels: Vec<usize>,
    pub imputers: Vec<ImputerDescriptor>,
    pub segmenters: Vec<Segmenter>,
    pub predictors: Vec<PredictorDescriptor>,
}

/// Attributions computed under other imputers than the PF imputer. Every
/// model-based method `m` is reported as `m@<imputer id>` per entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matching {
    pub attribution_imputers: Vec<ImputerDescriptor>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Characterization {
    #[serde(default = "default_fractions")]
    pub fractions: Vec<f64>,
    /// Random coalitions per fraction and image.
    #[serde(default = "default_draws")]
    pub draws: usize,
}

impl Default for Characterization {
    fn default() -> Self {
        Self {
            fractions: default_fractions(),
            draws: default_draws(),
        }
    }
}

fn default_fractions() -> Vec<f64> {
    vec![0.0, 0.25, 0.5, 0.75, 1.0]
}

fn default_draws() -> usize {
    16
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub output_dir: PathBuf,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default)]
    pub precision: Precision,
    /// K: imputations averaged per coalition (probabilistic imputers only).
    #[serde(default = "default_k")]
    pub imputer_samples: usize,
    /// R: random orderings behind the baseline.
    #[serde(default = "default_r")]
    pub baseline_orderings: usize,
    #[serde(default = "default_epsilon")]
    pub epsilon_floor: f64,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    /// Persistent occlusion cache; disabled when unset.
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
    pub images: ImageSource,
    pub grid: Grid,
    pub methods: Vec<AttributionMethod>,
    #[serde(default)]
    pub matching: Option<Matching>,
    #[serde(default)]
    pub characterize: Characterization,
}

fn default_workers() -> usize {
    1
}

fn default_k() -> usize {
    5
}

fn default_r() -> usize {
    20
}

fn default_epsilon() -> f64 {
    crate::value::DEFAULT_EPSILON_FLOOR
}

fn default_batch() -> usize {
    crate::value::DEFAULT_BATCH_SIZE
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

fn unique(what: &str, ids: impl IntoIterator<Item = String>) -> Result<()> {
    let mut seen = BTreeSet::new();
    for id in ids {
        if !seen.insert(id.clone()) {
            return Err(Error::Config(format!("duplicate {what} id `{id}`")));
        }
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Parses `path`; relative paths inside are taken relative to its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = Self::from_toml(&text)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        config.resolve_paths(&base);
        Ok(config)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        resolve(base, &mut self.output_dir);
        if let Some(c) = &mut self.cache_dir {
            resolve(base, c);
        }
        if let ImageSource::Directory { path, pool_dir, .. } = &mut self.images {
            resolve(base, path);
            if let Some(p) = pool_dir {
                resolve(base, p);
            }
        }
        for s in &mut self.grid.segmenters {
            if let Segmenter::Import { dir } = s {
                resolve(base, dir);
            }
        }
        for p in &mut self.grid.predictors {
            if let PredictorDescriptor::GraphModel { path, .. } = p {
                resolve(base, path);
            }
        }
        for m in &mut self.methods {
            if let AttributionMethod::Imported { dir, .. } = m {
                resolve(base, dir);
            }
        }
        let imputers = self
            .grid
            .imputers
            .iter_mut()
            .chain(self.matching.iter_mut().flat_map(|m| m.attribution_imputers.iter_mut()));
        for i in imputers {
            if let ImputerDescriptor::External { endpoint } = i {
                if let Some(w) = &mut endpoint.work_dir {
                    resolve(base, w);
                }
            }
        }
    }

    pub fn value_spec(&self) -> ValueFunctionSpec {
        ValueFunctionSpec {
            epsilon_floor: self.epsilon_floor,
            ..ValueFunctionSpec::default()
        }
    }

    fn has_pool(&self) -> bool {
        match &self.images {
            ImageSource::Synthetic { pool_size, .. } => *pool_size > 0,
            ImageSource::Directory { pool_dir, .. } => pool_dir.is_some(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.grid;
        if g.n_superpixels.is_empty() || g.imputers.is_empty() || g.segmenters.is_empty() || g.predictors.is_empty() {
            return Err(Error::Config("every grid list must be non-empty".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("no attribution methods configured".into()));
        }
        if let Some(&n) = g.n_superpixels.iter().find(|&&n| n < 2) {
            return Err(Error::Config(format!("n_superpixels {n} is below 2")));
        }
        if self.imputer_samples == 0 || self.baseline_orderings == 0 || self.workers == 0 || self.batch_size == 0 {
            return Err(Error::Config(
                "imputer_samples, baseline_orderings, workers and batch_size must be positive".into(),
            ));
        }
        self.value_spec().validate().map_err(|e| Error::Config(e.to_string()))?;
        unique("imputer", g.imputers.iter().map(ImputerDescriptor::id))?;
        unique("segmenter", g.segmenters.iter().map(Segmenter::id))?;
        unique("predictor", g.predictors.iter().map(|p| p.id().to_string()))?;
        unique("method", self.methods.iter().map(|m| m.id().to_string()))?;
        if self.methods.iter().any(|m| m.id().contains('@')) {
            return Err(Error::Config("method ids must not contain `@`".into()));
        }

        match &self.images {
            ImageSource::Synthetic { count, width, height, .. } => {
                if *count == 0 || *width < 2 || *height < 2 {
                    return Err(Error::Config("synthetic suite needs images of at least 2x2".into()));
                }
                if let Some(&n) = g.n_superpixels.iter().find(|&&n| n > width * height) {
                    return Err(Error::Config(format!("n_superpixels {n} exceeds the {width}x{height} pixel count")));
                }
            }
            ImageSource::Directory { path, pool_dir, limit } => {
                if !path.is_dir() {
                    return Err(Error::Config(format!("image directory {} not found", path.display())));
                }
                if let Some(p) = pool_dir {
                    if !p.is_dir() {
                        return Err(Error::Config(format!("pool directory {} not found", p.display())));
                    }
                }
                if *limit == Some(0) {
                    return Err(Error::Config("limit must be positive".into()));
                }
            }
        }

        let mut imputers: Vec<&ImputerDescriptor> = g.imputers.iter().collect();
        if let Some(m) = &self.matching {
            if m.attribution_imputers.is_empty() {
                return Err(Error::Config("matching.attribution_imputers is empty".into()));
            }
            unique("attribution imputer", m.attribution_imputers.iter().map(ImputerDescriptor::id))?;
            imputers.extend(&m.attribution_imputers);
        }
        for imp in imputers {
            if matches!(imp, ImputerDescriptor::Trainset) && !self.has_pool() {
                return Err(Error::Config("the trainset imputer needs a donor pool".into()));
            }
            if let ImputerDescriptor::Inpaint { radius } = imp {
                if *radius == 0 {
                    return Err(Error::Config("inpaint radius must be positive".into()));
                }
            }
        }
        for s in &g.segmenters {
            match s {
                Segmenter::Import { dir } if !dir.is_dir() => {
                    return Err(Error::Config(format!("mask directory {} not found", dir.display())))
                }
                Segmenter::Slic { compactness, max_iterations } if !(*compactness > 0.0) || *max_iterations == 0 => {
                    return Err(Error::Config("slic needs positive compactness and iterations".into()))
                }
                _ => {}
            }
        }
        for p in &g.predictors {
            p.validate()?;
        }
        let max_n = g.n_superpixels.iter().copied().max().unwrap_or(0);
        for m in &self.methods {
            m.validate()?;
            if let AttributionMethod::Shapley { mode: ShapleyMode::Exact, .. } = m {
                if max_n > MAX_EXACT_PLAYERS {
                    return Err(Error::Config(format!(
                        "exact Shapley values need n <= {MAX_EXACT_PLAYERS}, grid has {max_n}"
                    )));
                }
            }
        }
        let c = &self.characterize;
        if c.draws == 0 || c.fractions.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return Err(Error::Config("characterize needs draws >= 1 and fractions in [0, 1]".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        output_dir = "out"
        [images]
        kind = "synthetic"
        [grid]
        n_superpixels = [4]
        imputers = [{ kind = "mean" }, { kind = "histogram" }]
        segmenters = [{ kind = "grid" }]
        predictors = [{ kind = "additive_logit", id = "add" }]
        [[methods]]
        kind = "shapley"
        mode = "exact"
        [[methods]]
        kind = "random"
    "#;

    #[test]
    fn parses_with_defaults() {
        let c = ExperimentConfig::from_toml(MINIMAL).unwrap();
        c.validate().unwrap();
        assert_eq!(c.imputer_samples, 5);
        assert_eq!(c.baseline_orderings, 20);
        assert_eq!(c.epsilon_floor, 1e-9);
        assert_eq!(c.characterize.fractions.len(), 5);
        assert_eq!(c.methods[0].id(), "shapley");
    }

    #[test]
    fn rejects_bad_configs() {
        let dup = MINIMAL.replace(r#"{ kind = "histogram" }"#, r#"{ kind = "mean" }"#);
        assert!(ExperimentConfig::from_toml(&dup).unwrap().validate().is_err());
        let big = MINIMAL.replace("[4]", "[25]");
        assert!(ExperimentConfig::from_toml(&big).unwrap().validate().is_err());
        let missing = MINIMAL.replace(r#"kind = "synthetic""#, "kind = \"directory\"\npath = \"/no/such/dir\"");
        assert!(ExperimentConfig::from_toml(&missing).unwrap().validate().is_err());
        assert!(ExperimentConfig::from_toml("output_dir = 3").is_err());
    }

    #[test]
    fn relative_paths_follow_the_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("exp.toml");
        std::fs::write(&path, MINIMAL).unwrap();
        let c = ExperimentConfig::load(&path).unwrap();
        assert_eq!(c.output_dir, dir.path().join("out"));
    }
}
