//! Occluded predictions and the value functions built on them: the PF value
//! `f_ĉ(x_S)`, the Shapley value `log f_ĉ(x_S)`, R-OMS / NR-OMS scores and the
//! random-ordering baseline.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Mutex, RwLock};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::domain::{Coalition, FeatureOrdering, ImageTensor, PFCurve, SuperpixelMask};
use crate::error::{Error, Result};
use crate::imputation::{Imputer, OcclusionRequest};
use crate::measures::auc;
use crate::predictor::{Predictor, ProbabilityVector};
use crate::rng::{self, StreamRng};
use crate::scalar::Scalar;

pub const DEFAULT_EPSILON_FLOOR: f64 = 1e-9;
pub const DEFAULT_BATCH_SIZE: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueKind {
    PfProbability,
    LogProbability,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValueFunctionSpec {
    pub kind: ValueKind,
    /// Overrides the context's target class when set.
    pub class_index: Option<usize>,
    pub epsilon_floor: f64,
}

impl Default for ValueFunctionSpec {
    fn default() -> Self {
        Self {
            kind: ValueKind::LogProbability,
            class_index: None,
            epsilon_floor: DEFAULT_EPSILON_FLOOR,
        }
    }
}

impl ValueFunctionSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon_floor > 0.0 && self.epsilon_floor <= 1e-3) {
            return Err(Error::InvalidArgument(format!(
                "epsilon_floor {} outside (0, 1e-3]",
                self.epsilon_floor
            )));
        }
        Ok(())
    }
}

type CacheKey = (u64, u64, u32);

/// Concurrent map of occluded predictions, optionally backed by an
/// append-only log so interrupted runs can resume.
///
/// Log record (little endian): `u64 context | u64 coalition | u32 K | u32 len | len × f64`.
pub struct OcclusionCache {
    map: RwLock<HashMap<CacheKey, Vec<f64>>>,
    log: Option<Mutex<BufWriter<File>>>,
    path: Option<PathBuf>,
}

impl Default for OcclusionCache {
    fn default() -> Self {
        Self::in_memory()
    }
}

impl OcclusionCache {
    pub fn in_memory() -> Self {
        Self {
            map: RwLock::new(HashMap::new()),
            log: None,
            path: None,
        }
    }

    /// Opens (or creates) a persistent cache, replaying every complete record.
    pub fn open(path: &Path) -> Result<Self> {
        let mut map = HashMap::new();
        if path.exists() {
            let file = File::open(path).map_err(|e| Error::io(path, e))?;
            let mut reader = BufReader::new(file);
            let mut bytes = Vec::new();
            reader.read_to_end(&mut bytes).map_err(|e| Error::io(path, e))?;
            let mut at = 0;
            let mut valid = 0;
            while at + 24 <= bytes.len() {
                let u64_at = |i: usize| u64::from_le_bytes(bytes[i..i + 8].try_into().expect("8 bytes"));
                let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4 bytes"));
                let (ctx, coal, k, len) = (u64_at(at), u64_at(at + 8), u32_at(at + 16), u32_at(at + 20) as usize);
                let end = at + 24 + 8 * len;
                if end > bytes.len() {
                    break;
                }
                let probs = bytes[at + 24..end]
                    .chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                    .collect();
                map.insert((ctx, coal, k), probs);
                at = end;
                valid = end;
            }
            if valid < bytes.len() {
                // Drop a torn trailing record so later appends stay aligned.
                let file = OpenOptions::new().write(true).open(path).map_err(|e| Error::io(path, e))?;
                file.set_len(valid as u64).map_err(|e| Error::io(path, e))?;
            }
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        Ok(Self {
            map: RwLock::new(map),
            log: Some(Mutex::new(BufWriter::new(file))),
            path: Some(path.to_path_buf()),
        })
    }

    pub fn len(&self) -> usize {
        self.map.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn get(&self, key: &CacheKey) -> Option<Vec<f64>> {
        self.map.read().expect("cache lock").get(key).cloned()
    }

    fn insert(&self, key: CacheKey, probs: Vec<f64>) -> Result<()> {
        let mut map = self.map.write().expect("cache lock");
        if map.contains_key(&key) {
            return Ok(());
        }
        if let Some(log) = &self.log {
            let mut w = log.lock().expect("cache log lock");
            let mut rec = Vec::with_capacity(24 + 8 * probs.len());
            rec.extend_from_slice(&key.0.to_le_bytes());
            rec.extend_from_slice(&key.1.to_le_bytes());
            rec.extend_from_slice(&key.2.to_le_bytes());
            rec.extend_from_slice(&(probs.len() as u32).to_le_bytes());
            for p in &probs {
                rec.extend_from_slice(&p.to_le_bytes());
            }
            w.write_all(&rec)
                .map_err(|e| Error::io(self.path.clone().unwrap_or_default(), e))?;
        }
        map.insert(key, probs);
        Ok(())
    }

    pub fn flush(&self) -> Result<()> {
        if let Some(log) = &self.log {
            log.lock()
                .expect("cache log lock")
                .flush()
                .map_err(|e| Error::io(self.path.clone().unwrap_or_default(), e))?;
        }
        Ok(())
    }
}

impl Drop for OcclusionCache {
    fn drop(&mut self) {
        let _ = self.flush();
    }
}

/// Everything needed to evaluate `f(x_S)` for one image under one occlusion
/// strategy. The predicted class `ĉ` is the top-1 class of the clean image
/// unless overridden.
pub struct OcclusionContext<'a, T: Scalar> {
    predictor: &'a dyn Predictor<T>,
    image: &'a ImageTensor<T>,
    image_key: u64,
    mask: &'a SuperpixelMask,
    imputer: &'a dyn Imputer<T>,
    samples: usize,
    master_seed: u64,
    target_class: usize,
    clean: ProbabilityVector<T>,
    batch_size: usize,
    cache: Option<(&'a OcclusionCache, u64)>,
    calls: AtomicU64,
}

impl<'a, T: Scalar> OcclusionContext<'a, T> {
    pub fn new(
        predictor: &'a dyn Predictor<T>,
        image: &'a ImageTensor<T>,
        image_id: &str,
        mask: &'a SuperpixelMask,
        imputer: &'a dyn Imputer<T>,
        samples: usize,
        master_seed: u64,
    ) -> Result<Self> {
        mask.matches(image)?;
        if samples == 0 {
            return Err(Error::InvalidArgument("K must be at least 1".into()));
        }
        let clean = predictor.predict(image)?;
        let samples = if imputer.is_deterministic() { 1 } else { samples };
        Ok(Self {
            predictor,
            image,
            image_key: rng::hash_str(image_id),
            mask,
            imputer,
            samples,
            master_seed,
            target_class: clean.argmax(),
            clean,
            batch_size: DEFAULT_BATCH_SIZE,
            cache: None,
            calls: AtomicU64::new(0),
        })
    }

    pub fn with_target_class(mut self, class: usize) -> Result<Self> {
        if class >= self.clean.class_count() {
            return Err(Error::OutOfBounds {
                index: class,
                len: self.clean.class_count(),
            });
        }
        self.target_class = class;
        Ok(self)
    }

    pub fn with_batch_size(mut self, batch_size: usize) -> Self {
        self.batch_size = batch_size.max(1);
        self
    }

    /// Attaches a cache; `context_key` must identify everything besides the
    /// coalition and K that influences the prediction.
    pub fn with_cache(mut self, cache: &'a OcclusionCache, context_key: u64) -> Self {
        self.cache = Some((cache, context_key));
        self
    }

    pub fn n(&self) -> usize {
        self.mask.n()
    }

    pub fn target_class(&self) -> usize {
        self.target_class
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn image_key(&self) -> u64 {
        self.image_key
    }

    pub fn clean_prediction(&self) -> &ProbabilityVector<T> {
        &self.clean
    }

    /// Number of coalition evaluations requested so far.
    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }

    pub fn reset_calls(&self) {
        self.calls.store(0, Ordering::Relaxed);
    }

    /// Random stream keyed by this image and `parts`.
    pub fn stream(&self, parts: &[u64]) -> StreamRng {
        let mut key = Vec::with_capacity(parts.len() + 1);
        key.push(self.image_key);
        key.extend_from_slice(parts);
        rng::stream(self.master_seed, &key)
    }

    /// `f(x_S)` averaged over K imputations, for each coalition.
    pub fn occluded_predictions(&self, coalitions: &[Coalition]) -> Result<Vec<ProbabilityVector<T>>> {
        self.calls.fetch_add(coalitions.len() as u64, Ordering::Relaxed);
        let n = self.n();
        let mut results: Vec<Option<ProbabilityVector<T>>> = vec![None; coalitions.len()];
        let mut pending = Vec::new();
        for (slot, s) in coalitions.iter().enumerate() {
            if s.n() != n {
                return Err(Error::DimensionMismatch {
                    expected: format!("coalition over {n} superpixels"),
                    actual: format!("{}", s.n()),
                });
            }
            if s.len() == n {
                results[slot] = Some(self.clean.clone());
                continue;
            }
            if let Some((cache, ctx)) = self.cache {
                if let Some(hit) = cache.get(&(ctx, s.hash64(), self.samples as u32)) {
                    results[slot] = Some(ProbabilityVector::new(hit.into_iter().map(T::of).collect())?);
                    continue;
                }
            }
            pending.push(slot);
        }

        for chunk in pending.chunks(self.batch_size.div_ceil(self.samples).max(1)) {
            let mut images = Vec::with_capacity(chunk.len() * self.samples);
            for &slot in chunk {
                let s = &coalitions[slot];
                let hash = s.hash64();
                for k in 0..self.samples {
                    let req = OcclusionRequest::new(self.image, self.mask, s, k as u64)?;
                    let mut stream = rng::stream(self.master_seed, &[self.image_key, hash, k as u64]);
                    images.push(self.imputer.impute(&req, &mut stream)?);
                }
            }
            let preds = self.predictor.predict_batch(&images)?;
            if preds.len() != images.len() {
                return Err(Error::Model(format!(
                    "predictor returned {} outputs for {} images",
                    preds.len(),
                    images.len()
                )));
            }
            for (&slot, group) in chunk.iter().zip(preds.chunks(self.samples)) {
                let averaged = if self.samples == 1 {
                    group[0].clone()
                } else {
                    ProbabilityVector::mean(group)?
                };
                if let Some((cache, ctx)) = self.cache {
                    cache.insert(
                        (ctx, coalitions[slot].hash64(), self.samples as u32),
                        averaged.probs().iter().map(|p| p.as_f64()).collect(),
                    )?;
                }
                results[slot] = Some(averaged);
            }
        }
        Ok(results.into_iter().map(|r| r.expect("every slot filled")).collect())
    }

    pub fn occluded_prediction(&self, present: &Coalition) -> Result<ProbabilityVector<T>> {
        Ok(self.occluded_predictions(std::slice::from_ref(present))?.remove(0))
    }

    /// R-OMS: `f_ĉ(x_S)`.
    pub fn r_oms(&self, present: &Coalition) -> Result<T> {
        Ok(self.occluded_prediction(present)?.prob(self.target_class))
    }

    /// NR-OMS of the occluded prediction (maximum softmax probability).
    pub fn nr_oms(&self, present: &Coalition) -> Result<T> {
        Ok(nr_oms(&self.occluded_prediction(present)?))
    }

    /// Value of one coalition under `spec`.
    pub fn value(&self, present: &Coalition, spec: &ValueFunctionSpec) -> Result<T> {
        Ok(self.values(std::slice::from_ref(present), spec)?.remove(0))
    }

    pub fn values(&self, coalitions: &[Coalition], spec: &ValueFunctionSpec) -> Result<Vec<T>> {
        let class = spec.class_index.unwrap_or(self.target_class);
        let preds = self.occluded_predictions(coalitions)?;
        Ok(preds
            .iter()
            .map(|p| {
                let f = p.prob(class);
                match spec.kind {
                    ValueKind::PfProbability => f,
                    ValueKind::LogProbability => log_value(f, spec.epsilon_floor),
                }
            })
            .collect())
    }

    /// Occluded predictions along a deletion ordering: entry `s` keeps
    /// `N \ Π(s)`.
    pub fn deletion_predictions(&self, ordering: &FeatureOrdering) -> Result<Vec<ProbabilityVector<T>>> {
        let n = self.n();
        if ordering.n() != n {
            return Err(Error::InvalidOrdering(format!(
                "ordering over {} features for a mask with {n}",
                ordering.n()
            )));
        }
        let mut present = Coalition::full(n);
        let mut coalitions = Vec::with_capacity(n + 1);
        coalitions.push(present.clone());
        for &i in ordering.as_slice() {
            present.remove(i);
            coalitions.push(present.clone());
        }
        self.occluded_predictions(&coalitions)
    }
}

/// `log(max(f, ε))`.
pub fn log_value<T: Scalar>(f: T, epsilon_floor: f64) -> T {
    f.max(T::of(epsilon_floor)).ln()
}

/// Maximum softmax probability.
pub fn nr_oms<T: Scalar>(prediction: &ProbabilityVector<T>) -> T {
    prediction.max_prob()
}

/// Shapley value function `log f_ĉ(x_S)` for one coalition.
pub fn shapley_value_function<T: Scalar>(
    ctx: &OcclusionContext<'_, T>,
    present: &Coalition,
    spec: &ValueFunctionSpec,
) -> Result<T> {
    if spec.kind != ValueKind::LogProbability {
        return Err(Error::InvalidArgument("Shapley value function uses log_probability".into()));
    }
    spec.validate()?;
    ctx.value(present, spec)
}

/// Cooperative game over `players()` features.
pub trait ValueFunction<V>: Sync {
    fn players(&self) -> usize;

    fn evaluate(&self, coalitions: &[Coalition]) -> Result<Vec<V>>;
}

/// Game defined by a closure.
pub struct FnGame<F> {
    n: usize,
    f: F,
}

impl<F> FnGame<F> {
    pub fn new(n: usize, f: F) -> Self {
        Self { n, f }
    }
}

impl<V, F> ValueFunction<V> for FnGame<F>
where
    F: Fn(&Coalition) -> V + Sync,
{
    fn players(&self) -> usize {
        self.n
    }

    fn evaluate(&self, coalitions: &[Coalition]) -> Result<Vec<V>> {
        Ok(coalitions.iter().map(&self.f).collect())
    }
}

/// Occluded-model game over the context's superpixels.
pub struct ModelGame<'c, 'a, T: Scalar> {
    pub ctx: &'c OcclusionContext<'a, T>,
    pub spec: ValueFunctionSpec,
}

impl<T: Scalar> ValueFunction<T> for ModelGame<'_, '_, T> {
    fn players(&self) -> usize {
        self.ctx.n()
    }

    fn evaluate(&self, coalitions: &[Coalition]) -> Result<Vec<T>> {
        self.ctx.values(coalitions, &self.spec)
    }
}

/// Random-ordering baseline of one image.
#[derive(Debug, Clone)]
pub struct BaselineEstimate<T> {
    /// Mean AUC of the R-OMS curve over random orderings.
    pub r_oms_bar: T,
    /// Mean AUC of the NR-OMS curve over the same orderings.
    pub nr_oms_bar: T,
    pub aucs: Vec<T>,
    pub mean_curve: PFCurve<T>,
}

/// Uniformly random orderings for the baseline of this context.
pub fn baseline_orderings<T: Scalar>(ctx: &OcclusionContext<'_, T>, count: usize) -> Vec<FeatureOrdering> {
    (0..count)
        .map(|r| {
            let mut order: Vec<usize> = (0..ctx.n()).collect();
            order.shuffle(&mut ctx.stream(&[rng::hash_str("baseline"), r as u64]));
            FeatureOrdering::new(order).expect("shuffle is a permutation")
        })
        .collect()
}

/// `R̄-OMS`: mean PF AUC over `orderings` uniformly random orderings.
pub fn random_pf_baseline<T: Scalar>(ctx: &OcclusionContext<'_, T>, orderings: usize) -> Result<BaselineEstimate<T>> {
    if orderings == 0 {
        return Err(Error::InvalidArgument("R must be at least 1".into()));
    }
    let mut aucs = Vec::with_capacity(orderings);
    let mut nr_aucs = Vec::with_capacity(orderings);
    let mut curves = Vec::with_capacity(orderings);
    for pi in baseline_orderings(ctx, orderings) {
        let preds = ctx.deletion_predictions(&pi)?;
        let r = PFCurve::new(preds.iter().map(|p| p.prob(ctx.target_class())).collect(), "random")?;
        let nr = PFCurve::new(preds.iter().map(nr_oms).collect(), "random")?;
        aucs.push(auc(&r));
        nr_aucs.push(auc(&nr));
        curves.push(r);
    }
    let k = T::of_usize(orderings);
    Ok(BaselineEstimate {
        r_oms_bar: aucs.iter().copied().sum::<T>() / k,
        nr_oms_bar: nr_aucs.iter().copied().sum::<T>() / k,
        aucs,
        mean_curve: PFCurve::mean(&curves, "random")?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imputation::{HistogramImputer, MeanImputer};
    use crate::predictor::{make_additive_logit_predictor, ConstantPredictor, OcclusionFractionPredictor, ResponseCurve};
    use crate::segmentation::grid_mask;
    use std::sync::Arc;

    fn sigmoid(x: f64) -> f64 {
        1.0 / (1.0 + (-x).exp())
    }

    fn textured(w: usize, h: usize) -> ImageTensor<f64> {
        ImageTensor::from_fn(w, h, 3, |x, y, c| 0.2 + 0.6 * (((x * 7 + y * 13 + c * 5) % 17) as f64 / 17.0)).unwrap()
    }

    #[test]
    fn full_coalition_equals_clean_prediction() {
        let img = textured(12, 12);
        let mask = grid_mask(12, 12, 4).unwrap();
        let p = make_additive_logit_predictor(&mask, Arc::new(img.clone()), vec![1.0, 0.5, 2.0, 0.1], vec![0.0; 3], 2).unwrap();
        let imputer = HistogramImputer;
        let ctx = OcclusionContext::new(&p, &img, "a", &mask, &imputer, 5, 1).unwrap();
        assert_eq!(ctx.occluded_prediction(&Coalition::full(4)).unwrap(), p.predict(&img).unwrap());
        assert_eq!(ctx.r_oms(&Coalition::full(4)).unwrap(), p.predict(&img).unwrap().max_prob());
    }

    #[test]
    fn deterministic_imputer_forces_single_sample() {
        let img = textured(12, 12);
        let mask = grid_mask(12, 12, 4).unwrap();
        let p = make_additive_logit_predictor(&mask, Arc::new(img.clone()), vec![1.0; 4], vec![0.0; 3], 2).unwrap();
        let imputer = MeanImputer::new(vec![0.0; 3]);
        let s = Coalition::from_members(4, [1, 2]).unwrap();
        let k1 = OcclusionContext::new(&p, &img, "a", &mask, &imputer, 1, 1).unwrap();
        let k7 = OcclusionContext::new(&p, &img, "a", &mask, &imputer, 7, 1).unwrap();
        assert_eq!(k7.samples(), 1);
        assert_eq!(k1.occluded_prediction(&s).unwrap(), k7.occluded_prediction(&s).unwrap());
    }

    #[test]
    fn additive_closed_form_and_log_value() {
        let img = textured(12, 12);
        let mask = grid_mask(12, 12, 4).unwrap();
        let a = [1.5, 0.5, 0.25, 2.0];
        let p = make_additive_logit_predictor(&mask, Arc::new(img.clone()), a.to_vec(), vec![0.0; 3], 2).unwrap();
        let imputer = MeanImputer::new(vec![0.0; 3]);
        let ctx = OcclusionContext::new(&p, &img, "a", &mask, &imputer, 1, 1).unwrap();
        let s = Coalition::from_members(4, [1, 3]).unwrap();
        let expected = sigmoid(a[1] + a[3]);
        assert!((ctx.r_oms(&s).unwrap() - expected).abs() < 1e-12);

        let s2 = Coalition::from_members(4, [3]).unwrap();
        let v = shapley_value_function(&ctx, &s2, &ValueFunctionSpec::default()).unwrap();
        assert!((v - (-0.1269)).abs() < 1e-4, "{v}");
    }

    #[test]
    fn log_value_floor() {
        assert_eq!(log_value(1.0f64, 1e-9), 0.0);
        assert_eq!(log_value(0.0f64, 1e-9), (1e-9f64).ln());
        assert!(ValueFunctionSpec { epsilon_floor: 0.0, ..Default::default() }.validate().is_err());
        assert!(ValueFunctionSpec { epsilon_floor: 1e-2, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn nr_oms_examples() {
        let uniform = ProbabilityVector::new(vec![0.1f64; 10]).unwrap();
        assert!((nr_oms(&uniform) - 0.1).abs() < 1e-15);
        let onehot = ProbabilityVector::new(vec![0.0f64, 1.0, 0.0]).unwrap();
        assert_eq!(nr_oms(&onehot), 1.0);
    }

    #[test]
    fn one_hot_predictor_clean_r_oms() {
        let img = textured(8, 8);
        let mask = grid_mask(8, 8, 4).unwrap();
        let p = ConstantPredictor { id: "one".into(), probs: ProbabilityVector::new(vec![0.0f64, 1.0]).unwrap() };
        let imputer = MeanImputer::new(vec![0.5; 3]);
        let ctx = OcclusionContext::new(&p, &img, "a", &mask, &imputer, 1, 1).unwrap();
        assert_eq!(ctx.target_class(), 1);
        assert_eq!(ctx.r_oms(&Coalition::full(4)).unwrap(), 1.0);
    }

    #[test]
    fn fraction_predictor_r_oms() {
        let fill = vec![0.5f64; 3];
        let img = ImageTensor::filled(8, 8, &[0.1, 0.2, 0.3]).unwrap();
        let mask = grid_mask(8, 8, 4).unwrap();
        let p = OcclusionFractionPredictor::new(fill.clone(), ResponseCurve::Linear, 2).unwrap();
        let imputer = MeanImputer::new(fill);
        let ctx = OcclusionContext::new(&p, &img, "a", &mask, &imputer, 1, 1).unwrap();
        let s = Coalition::full(4).without(2);
        assert!((ctx.r_oms(&s).unwrap() - 0.75).abs() < 1e-15);
        assert!(ctx.nr_oms(&s).unwrap() >= ctx.r_oms(&s).unwrap());
    }

    #[test]
    fn baseline_symmetric_and_constant_models() {
        let fill = vec![0.5f64; 3];
        let img = ImageTensor::filled(8, 8, &[0.1, 0.2, 0.3]).unwrap();
        let mask = grid_mask(8, 8, 16).unwrap();
        let p = OcclusionFractionPredictor::new(fill.clone(), ResponseCurve::Linear, 2).unwrap();
        let imputer = MeanImputer::new(fill);
        let ctx = OcclusionContext::new(&p, &img, "a", &mask, &imputer, 1, 1).unwrap();
        for r in [1, 3, 10] {
            let b = random_pf_baseline(&ctx, r).unwrap();
            assert!((b.r_oms_bar - 0.5).abs() < 1e-12);
            assert!(b.mean_curve.values.windows(2).all(|w| w[0] >= w[1]));
        }
        let c = ConstantPredictor { id: "c".into(), probs: ProbabilityVector::new(vec![0.7f64, 0.3]).unwrap() };
        let ctx = OcclusionContext::new(&c, &img, "a", &mask, &imputer, 1, 1).unwrap();
        assert!((random_pf_baseline(&ctx, 4).unwrap().r_oms_bar - 0.7).abs() < 1e-12);
    }

    #[test]
    fn cache_is_transparent_and_persistent() {
        let img = textured(12, 12);
        let mask = grid_mask(12, 12, 9).unwrap();
        let p = make_additive_logit_predictor(&mask, Arc::new(img.clone()), (0..9).map(|i| i as f64 / 4.0).collect(), vec![0.0; 3], 2).unwrap();
        let imputer = HistogramImputer;
        let plain = OcclusionContext::new(&p, &img, "a", &mask, &imputer, 3, 5).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.bin");
        let pi = FeatureOrdering::new(vec![4, 2, 8, 0, 1, 3, 5, 7, 6]).unwrap();
        let expected = plain.deletion_predictions(&pi).unwrap();
        {
            let cache = OcclusionCache::open(&path).unwrap();
            let ctx = OcclusionContext::new(&p, &img, "a", &mask, &imputer, 3, 5).unwrap().with_cache(&cache, 42);
            assert_eq!(ctx.deletion_predictions(&pi).unwrap(), expected);
            assert_eq!(ctx.deletion_predictions(&pi).unwrap(), expected);
            assert_eq!(cache.len(), 9);
        }
        let reloaded = OcclusionCache::open(&path).unwrap();
        assert_eq!(reloaded.len(), 9);
        let ctx = OcclusionContext::new(&p, &img, "a", &mask, &imputer, 3, 5).unwrap().with_cache(&reloaded, 42);
        assert_eq!(ctx.deletion_predictions(&pi).unwrap(), expected);
    }

    #[test]
    fn cache_drops_torn_record() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.bin");
        {
            let cache = OcclusionCache::open(&path).unwrap();
            cache.insert((1, 2, 1), vec![0.25, 0.75]).unwrap();
        }
        let mut bytes = std::fs::read(&path).unwrap();
        bytes.extend_from_slice(&[7u8; 13]);
        std::fs::write(&path, bytes).unwrap();
        let cache = OcclusionCache::open(&path).unwrap();
        assert_eq!(cache.get(&(1, 2, 1)), Some(vec![0.25, 0.75]));
        cache.insert((3, 4, 1), vec![1.0, 0.0]).unwrap();
        drop(cache);
        assert_eq!(OcclusionCache::open(&path).unwrap().len(), 2);
    }

    #[test]
    fn batch_size_does_not_change_results() {
        let img = textured(12, 12);
        let mask = grid_mask(12, 12, 9).unwrap();
        let p = make_additive_logit_predictor(&mask, Arc::new(img.clone()), vec![0.7; 9], vec![0.0; 3], 2).unwrap();
        let imputer = HistogramImputer;
        let pi = FeatureOrdering::new((0..9).rev().collect()).unwrap();
        let a = OcclusionContext::new(&p, &img, "a", &mask, &imputer, 4, 5).unwrap().with_batch_size(1);
        let b = OcclusionContext::new(&p, &img, "a", &mask, &imputer, 4, 5).unwrap().with_batch_size(64);
        assert_eq!(a.deletion_predictions(&pi).unwrap(), b.deletion_predictions(&pi).unwrap());
    }
}
