//! The model boundary: images in, class probabilities out.
//!
//! Besides the optional inference-graph backend, two synthetic predictors
//! make closed-form expectations available for testing:
//!
//! * [`OcclusionFractionPredictor`] responds only to how many pixels carry the
//!   fill color,
//! * [`AdditiveLogitPredictor`] has a target logit that is exactly additive in
//!   per-superpixel agreement with a reference image.

use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::domain::{Coalition, ImageTensor, SuperpixelMask};
use crate::error::{Error, Result};
use crate::rng;
use crate::scalar::Scalar;
use crate::value::OcclusionContext;

/// Tolerance under which two channel values count as equal (one 8-bit step).
pub const MATCH_TOLERANCE: f64 = 1.0 / 255.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityVector<T> {
    probs: Vec<T>,
}

impl<T: Scalar> ProbabilityVector<T> {
    pub fn new(probs: Vec<T>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidProbabilities("no classes".into()));
        }
        if let Some(bad) = probs
            .iter()
            .find(|p| !p.is_finite() || **p < T::zero() || **p > T::one())
        {
            return Err(Error::InvalidProbabilities(format!("entry {bad}")));
        }
        let total: f64 = probs.iter().map(|p| p.as_f64()).sum();
        if (total - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidProbabilities(format!("sum {total}")));
        }
        Ok(Self { probs })
    }

    /// Numerically stable softmax.
    pub fn softmax(logits: &[T]) -> Result<Self> {
        let max = logits
            .iter()
            .copied()
            .fold(T::neg_infinity(), T::max);
        if !max.is_finite() {
            return Err(Error::InvalidProbabilities("non-finite logits".into()));
        }
        let exp: Vec<f64> = logits.iter().map(|l| (*l - max).as_f64().exp()).collect();
        let z: f64 = exp.iter().sum();
        Self::new(exp.into_iter().map(|e| T::of(e / z)).collect())
    }

    /// Mean of equally sized vectors, renormalized.
    pub fn mean(vectors: &[Self]) -> Result<Self> {
        let first = vectors
            .first()
            .ok_or_else(|| Error::InvalidProbabilities("empty average".into()))?;
        let k = first.probs.len();
        let mut acc = vec![0.0f64; k];
        for v in vectors {
            if v.probs.len() != k {
                return Err(Error::InvalidProbabilities("class count differs".into()));
            }
            for (a, p) in acc.iter_mut().zip(&v.probs) {
                *a += p.as_f64();
            }
        }
        let total: f64 = acc.iter().sum();
        Self::new(acc.into_iter().map(|a| T::of((a / total).clamp(0.0, 1.0))).collect())
    }

    pub fn probs(&self) -> &[T] {
        &self.probs
    }

    pub fn class_count(&self) -> usize {
        self.probs.len()
    }

    pub fn prob(&self, class: usize) -> T {
        self.probs[class]
    }

    /// Maximum softmax probability.
    pub fn max_prob(&self) -> T {
        self.probs.iter().copied().fold(T::zero(), T::max)
    }

    /// Top-1 class; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (c, p) in self.probs.iter().enumerate() {
            if *p > self.probs[best] {
                best = c;
            }
        }
        best
    }
}

pub trait Predictor<T: Scalar>: Send + Sync {
    fn id(&self) -> &str;

    fn class_count(&self) -> usize;

    /// One probability vector per image, in order.
    fn predict_batch(&self, images: &[ImageTensor<T>]) -> Result<Vec<ProbabilityVector<T>>>;

    fn predict(&self, image: &ImageTensor<T>) -> Result<ProbabilityVector<T>> {
        let mut out = self.predict_batch(std::slice::from_ref(image))?;
        Ok(out.pop().expect("one output per image"))
    }
}

/// Monotone response `g` applied to the kept fraction of pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ResponseCurve {
    Linear,
    /// `u^gamma`
    Power { gamma: f64 },
    /// Logistic through `(midpoint, 1/2)`, rescaled to map `[0,1]` onto `[0,1]`.
    Logistic { midpoint: f64, steepness: f64 },
}

impl ResponseCurve {
    pub fn apply(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        match *self {
            ResponseCurve::Linear => u,
            ResponseCurve::Power { gamma } => u.powf(gamma),
            ResponseCurve::Logistic { midpoint, steepness } => {
                let s = |v: f64| 1.0 / (1.0 + (-(v - midpoint) * steepness).exp());
                ((s(u) - s(0.0)) / (s(1.0) - s(0.0))).clamp(0.0, 1.0)
            }
        }
    }
}

fn color_matches<T: Scalar>(a: &[T], b: &[T], tol: f64) -> bool {
    a.iter().zip(b).all(|(x, y)| (x.as_f64() - y.as_f64()).abs() <= tol)
}

/// `p(ĉ | x) = g(1 - ρ)` where `ρ` is the fraction of pixels equal to the
/// fill color; the remaining mass is split evenly over the other classes.
pub struct OcclusionFractionPredictor<T> {
    pub id: String,
    pub fill_color: Vec<T>,
    pub curve: ResponseCurve,
    pub class_count: usize,
    pub target_class: usize,
}

impl<T: Scalar> OcclusionFractionPredictor<T> {
    pub fn new(fill_color: Vec<T>, curve: ResponseCurve, class_count: usize) -> Result<Self> {
        if class_count < 2 {
            return Err(Error::InvalidArgument("class_count must be at least 2".into()));
        }
        Ok(Self {
            id: "occlusion_fraction".into(),
            fill_color,
            curve,
            class_count,
            target_class: 0,
        })
    }

    pub fn occluded_fraction(&self, image: &ImageTensor<T>) -> f64 {
        let hits = (0..image.pixel_count())
            .filter(|&p| color_matches(image.pixel(p), &self.fill_color, 0.5 * MATCH_TOLERANCE))
            .count();
        hits as f64 / image.pixel_count() as f64
    }
}

impl<T: Scalar> Predictor<T> for OcclusionFractionPredictor<T> {
    fn id(&self) -> &str {
        &self.id
    }

    fn class_count(&self) -> usize {
        self.class_count
    }

    fn predict_batch(&self, images: &[ImageTensor<T>]) -> Result<Vec<ProbabilityVector<T>>> {
        images
            .iter()
            .map(|img| {
                if img.channels() != self.fill_color.len() {
                    return Err(Error::DimensionMismatch {
                        expected: format!("{} channels", self.fill_color.len()),
                        actual: format!("{}", img.channels()),
                    });
                }
                let target = self.curve.apply(1.0 - self.occluded_fraction(img));
                let rest = (1.0 - target) / (self.class_count - 1) as f64;
                let probs = (0..self.class_count)
                    .map(|c| T::of(if c == self.target_class { target } else { rest }))
                    .collect();
                ProbabilityVector::new(probs)
            })
            .collect()
    }
}

/// Target logit `bias[ĉ] + Σ_i a_i · match_i(x)` with `match_i` the fraction
/// of superpixel `i` whose pixels agree with the reference image; other
/// classes get their bias logit.
pub struct AdditiveLogitPredictor<T> {
    pub id: String,
    pub mask: SuperpixelMask,
    pub reference: Arc<ImageTensor<T>>,
    pub coefficients: Vec<T>,
    pub bias: Vec<T>,
    pub anchor_color: Vec<T>,
    pub target_class: usize,
    pub tolerance: f64,
}

/// Additive-logit predictor over `mask` with zero bias logits.
pub fn make_additive_logit_predictor<T: Scalar>(
    mask: &SuperpixelMask,
    reference: Arc<ImageTensor<T>>,
    coefficients: Vec<T>,
    anchor_color: Vec<T>,
    class_count: usize,
) -> Result<AdditiveLogitPredictor<T>> {
    if coefficients.len() != mask.n() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} coefficients", mask.n()),
            actual: format!("{}", coefficients.len()),
        });
    }
    if class_count < 2 {
        return Err(Error::InvalidArgument("class_count must be at least 2".into()));
    }
    mask.matches(&reference)?;
    Ok(AdditiveLogitPredictor {
        id: "additive_logit".into(),
        mask: mask.clone(),
        reference,
        coefficients,
        bias: vec![T::zero(); class_count],
        anchor_color,
        target_class: 0,
        tolerance: MATCH_TOLERANCE,
    })
}

impl<T: Scalar> AdditiveLogitPredictor<T> {
    pub fn with_bias(mut self, bias: Vec<T>) -> Result<Self> {
        if bias.len() != self.bias.len() {
            return Err(Error::DimensionMismatch {
                expected: format!("{} bias logits", self.bias.len()),
                actual: format!("{}", bias.len()),
            });
        }
        self.bias = bias;
        Ok(self)
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    /// `match_i(x)` for every superpixel.
    pub fn matches(&self, image: &ImageTensor<T>) -> Result<Vec<f64>> {
        self.reference.ensure_same_shape(image)?;
        Ok((0..self.mask.n())
            .map(|i| {
                let seg = self.mask.segment(i);
                let hits = seg
                    .iter()
                    .filter(|&&p| {
                        color_matches(image.pixel(p as usize), self.reference.pixel(p as usize), self.tolerance)
                    })
                    .count();
                hits as f64 / seg.len() as f64
            })
            .collect())
    }

    pub fn target_logit(&self, image: &ImageTensor<T>) -> Result<f64> {
        let m = self.matches(image)?;
        Ok(self.bias[self.target_class].as_f64()
            + m.iter()
                .zip(&self.coefficients)
                .map(|(mi, a)| mi * a.as_f64())
                .sum::<f64>())
    }
}

impl<T: Scalar> Predictor<T> for AdditiveLogitPredictor<T> {
    fn id(&self) -> &str {
        &self.id
    }

    fn class_count(&self) -> usize {
        self.bias.len()
    }

    fn predict_batch(&self, images: &[ImageTensor<T>]) -> Result<Vec<ProbabilityVector<T>>> {
        images
            .iter()
            .map(|img| {
                let target = self.target_logit(img)?;
                let logits: Vec<f64> = self
                    .bias
                    .iter()
                    .enumerate()
                    .map(|(c, b)| if c == self.target_class { target } else { b.as_f64() })
                    .collect();
                let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let exp: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
                let z: f64 = exp.iter().sum();
                ProbabilityVector::new(exp.into_iter().map(|e| T::of(e / z)).collect())
            })
            .collect()
    }
}

/// Fixed output regardless of input.
pub struct ConstantPredictor<T> {
    pub id: String,
    pub probs: ProbabilityVector<T>,
}

impl<T: Scalar> Predictor<T> for ConstantPredictor<T> {
    fn id(&self) -> &str {
        &self.id
    }

    fn class_count(&self) -> usize {
        self.probs.class_count()
    }

    fn predict_batch(&self, images: &[ImageTensor<T>]) -> Result<Vec<ProbabilityVector<T>>> {
        Ok(vec![self.probs.clone(); images.len()])
    }
}

/// Input preprocessing applied before the inference graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preprocessing {
    /// Target `[width, height]`; nearest-neighbor resize when it differs.
    #[serde(default)]
    pub resize: Option<[usize; 2]>,
    #[serde(default = "default_norm_mean")]
    pub mean: Vec<f64>,
    #[serde(default = "default_norm_std")]
    pub std: Vec<f64>,
    /// `nchw` or `nhwc`.
    #[serde(default = "default_layout")]
    pub layout: String,
}

fn default_norm_mean() -> Vec<f64> {
    vec![0.485, 0.456, 0.406]
}

fn default_norm_std() -> Vec<f64> {
    vec![0.229, 0.224, 0.225]
}

fn default_layout() -> String {
    "nchw".into()
}

impl Default for Preprocessing {
    fn default() -> Self {
        Self {
            resize: None,
            mean: default_norm_mean(),
            std: default_norm_std(),
            layout: default_layout(),
        }
    }
}

impl Preprocessing {
    /// Flattened, normalized input tensor for a batch, plus its shape.
    pub fn tensor<T: Scalar>(&self, images: &[ImageTensor<T>]) -> Result<(Vec<usize>, Vec<f32>)> {
        let first = images
            .first()
            .ok_or_else(|| Error::InvalidArgument("empty batch".into()))?;
        let ch = first.channels();
        if self.mean.len() != ch || self.std.len() != ch {
            return Err(Error::Config(format!(
                "normalization has {} means / {} stds for {ch} channels",
                self.mean.len(),
                self.std.len()
            )));
        }
        let [tw, th] = self.resize.unwrap_or([first.width(), first.height()]);
        let nchw = match self.layout.as_str() {
            "nchw" => true,
            "nhwc" => false,
            other => return Err(Error::Config(format!("unknown layout {other}"))),
        };
        let mut data = vec![0f32; images.len() * ch * th * tw];
        for (b, img) in images.iter().enumerate() {
            first.ensure_same_shape(img)?;
            for y in 0..th {
                let sy = y * img.height() / th;
                for x in 0..tw {
                    let sx = x * img.width() / tw;
                    let px = img.pixel_at(sx, sy);
                    for (c, p) in px.iter().enumerate().take(ch) {
                        let v = ((p.as_f64() - self.mean[c]) / self.std[c]) as f32;
                        let idx = if nchw {
                            ((b * ch + c) * th + y) * tw + x
                        } else {
                            ((b * th + y) * tw + x) * ch + c
                        };
                        data[idx] = v;
                    }
                }
            }
        }
        let shape = if nchw {
            vec![images.len(), ch, th, tw]
        } else {
            vec![images.len(), th, tw, ch]
        };
        Ok((shape, data))
    }
}

/// Turns raw model outputs into probabilities: softmax unless the row
/// already is a distribution.
pub fn normalize_outputs<T: Scalar>(row: &[f32]) -> Result<ProbabilityVector<T>> {
    let is_distribution = row.iter().all(|v| (0.0..=1.0).contains(v))
        && (row.iter().map(|&v| f64::from(v)).sum::<f64>() - 1.0).abs() <= 1e-6;
    if is_distribution {
        ProbabilityVector::new(row.iter().map(|&v| T::of(f64::from(v))).collect())
    } else {
        let logits: Vec<T> = row.iter().map(|&v| T::of(f64::from(v))).collect();
        ProbabilityVector::softmax(&logits)
    }
}

#[cfg(feature = "onnx")]
mod graph {
    use super::*;
    use tract_onnx::prelude::*;

    type Plan = SimplePlan<TypedFact, Box<dyn TypedOp>, Graph<TypedFact, Box<dyn TypedOp>>>;

    /// ONNX classifier executed on the CPU.
    pub struct GraphModelPredictor {
        id: String,
        plan: Plan,
        preprocessing: Preprocessing,
        class_count: usize,
    }

    impl GraphModelPredictor {
        pub fn load(id: &str, path: &std::path::Path, preprocessing: Preprocessing, class_count: usize) -> Result<Self> {
            let plan = tract_onnx::onnx()
                .model_for_path(path)
                .and_then(|m| m.into_optimized())
                .and_then(|m| m.into_runnable())
                .map_err(|e| Error::Model(format!("{}: {e}", path.display())))?;
            Ok(Self {
                id: id.into(),
                plan,
                preprocessing,
                class_count,
            })
        }
    }

    impl<T: Scalar> Predictor<T> for GraphModelPredictor {
        fn id(&self) -> &str {
            &self.id
        }

        fn class_count(&self) -> usize {
            self.class_count
        }

        fn predict_batch(&self, images: &[ImageTensor<T>]) -> Result<Vec<ProbabilityVector<T>>> {
            let mut out = Vec::with_capacity(images.len());
            // One image per run keeps graphs with a fixed batch dimension usable.
            for img in images {
                let (shape, data) = self.preprocessing.tensor(std::slice::from_ref(img))?;
                let input = tract_ndarray::ArrayD::from_shape_vec(shape, data)
                    .map_err(|e| Error::Model(e.to_string()))?;
                let result = self
                    .plan
                    .run(tvec!(Tensor::from(input).into()))
                    .map_err(|e| Error::Model(e.to_string()))?;
                let view = result[0]
                    .to_array_view::<f32>()
                    .map_err(|e| Error::Model(e.to_string()))?;
                let row: Vec<f32> = view.iter().copied().collect();
                if row.len() != self.class_count {
                    return Err(Error::Model(format!(
                        "model emitted {} outputs, expected {}",
                        row.len(),
                        self.class_count
                    )));
                }
                out.push(normalize_outputs(&row)?);
            }
            Ok(out)
        }
    }
}

#[cfg(feature = "onnx")]
pub use graph::GraphModelPredictor;

/// Configured predictor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PredictorDescriptor {
    /// Serialized inference graph (ONNX), requires the `onnx` feature.
    GraphModel {
        id: String,
        path: PathBuf,
        class_count: usize,
        #[serde(default)]
        preprocessing: Preprocessing,
    },
    /// Synthetic additive-logit model bound to each image and its segmentation.
    /// Coefficients are drawn uniformly from `[coef_low, coef_high]` per
    /// superpixel from the master seed.
    AdditiveLogit {
        id: String,
        #[serde(default)]
        bias: f64,
        #[serde(default = "default_coef_low")]
        coef_low: f64,
        #[serde(default = "default_coef_high")]
        coef_high: f64,
        #[serde(default = "default_class_count")]
        class_count: usize,
    },
    OcclusionFraction {
        id: String,
        fill_color: Vec<f64>,
        #[serde(default = "default_curve")]
        curve: ResponseCurve,
        #[serde(default = "default_class_count")]
        class_count: usize,
    },
}

fn default_coef_low() -> f64 {
    0.2
}

fn default_coef_high() -> f64 {
    2.0
}

fn default_class_count() -> usize {
    2
}

fn default_curve() -> ResponseCurve {
    ResponseCurve::Linear
}

impl PredictorDescriptor {
    pub fn id(&self) -> &str {
        match self {
            PredictorDescriptor::GraphModel { id, .. }
            | PredictorDescriptor::AdditiveLogit { id, .. }
            | PredictorDescriptor::OcclusionFraction { id, .. } => id,
        }
    }

    pub fn class_count(&self) -> usize {
        match self {
            PredictorDescriptor::GraphModel { class_count, .. }
            | PredictorDescriptor::AdditiveLogit { class_count, .. }
            | PredictorDescriptor::OcclusionFraction { class_count, .. } => *class_count,
        }
    }

    /// Whether [`build`](Self::build) needs the image and its mask.
    pub fn is_per_image(&self) -> bool {
        matches!(self, PredictorDescriptor::AdditiveLogit { .. })
    }

    pub fn validate(&self) -> Result<()> {
        if self.class_count() < 2 {
            return Err(Error::Config(format!("predictor {}: class_count < 2", self.id())));
        }
        match self {
            PredictorDescriptor::GraphModel { path, .. } => {
                if !path.exists() {
                    return Err(Error::Config(format!("model file {} not found", path.display())));
                }
                if !cfg!(feature = "onnx") {
                    return Err(Error::Config(
                        "graph_model predictors need the `onnx` cargo feature".into(),
                    ));
                }
            }
            PredictorDescriptor::AdditiveLogit { coef_low, coef_high, .. } => {
                if !(coef_low <= coef_high) {
                    return Err(Error::Config("coef_low must not exceed coef_high".into()));
                }
            }
            PredictorDescriptor::OcclusionFraction { .. } => {}
        }
        Ok(())
    }

    /// Instantiates the predictor. Per-image kinds need `image`, `image_key`
    /// and `mask`; shared kinds ignore them.
    pub fn build<T: Scalar>(
        &self,
        master_seed: u64,
        image: Option<(&Arc<ImageTensor<T>>, u64, &SuperpixelMask)>,
    ) -> Result<Arc<dyn Predictor<T>>> {
        match self {
            PredictorDescriptor::OcclusionFraction {
                id,
                fill_color,
                curve,
                class_count,
            } => {
                let mut p = OcclusionFractionPredictor::new(
                    fill_color.iter().map(|&v| T::of(v)).collect(),
                    *curve,
                    *class_count,
                )?;
                p.id = id.clone();
                Ok(Arc::new(p))
            }
            PredictorDescriptor::AdditiveLogit {
                id,
                bias,
                coef_low,
                coef_high,
                class_count,
            } => {
                let (reference, image_key, mask) = image.ok_or_else(|| {
                    Error::InvalidArgument("additive_logit predictor needs an image".into())
                })?;
                use rand::Rng;
                let mut stream = rng::stream(master_seed, &[rng::hash_str("coefficients"), image_key, mask.fingerprint()]);
                let coefficients = (0..mask.n())
                    .map(|_| T::of(*coef_low + (coef_high - coef_low) * stream.random::<f64>()))
                    .collect();
                let mut bias_logits = vec![T::zero(); *class_count];
                bias_logits[0] = T::of(*bias);
                let p = make_additive_logit_predictor(
                    mask,
                    reference.clone(),
                    coefficients,
                    vec![T::zero(); reference.channels()],
                    *class_count,
                )?
                .with_bias(bias_logits)?
                .with_id(id.clone());
                Ok(Arc::new(p))
            }
            #[cfg(feature = "onnx")]
            PredictorDescriptor::GraphModel {
                id,
                path,
                class_count,
                preprocessing,
            } => Ok(Arc::new(GraphModelPredictor::load(id, path, preprocessing.clone(), *class_count)?)),
            #[cfg(not(feature = "onnx"))]
            PredictorDescriptor::GraphModel { .. } => Err(Error::Model(
                "graph_model predictors need the `onnx` cargo feature".into(),
            )),
        }
    }
}

/// R-OMS (and NR-OMS) statistics at one occlusion fraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScopeSample {
    pub fraction: f64,
    pub occluded: usize,
    pub r_oms_mean: f64,
    pub r_oms_std: f64,
    pub nr_oms_mean: f64,
    pub nr_oms_std: f64,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Average occluded prediction over `draws` random coalitions per fraction;
/// the occluded count is `round(fraction * n)`.
pub fn probe_model_scope<T: Scalar>(
    ctx: &OcclusionContext<'_, T>,
    fractions: &[f64],
    draws: usize,
) -> Result<Vec<ScopeSample>> {
    use rand::seq::SliceRandom;
    let n = ctx.n();
    if draws == 0 {
        return Err(Error::InvalidArgument("draws must be positive".into()));
    }
    fractions
        .iter()
        .enumerate()
        .map(|(fi, &fraction)| {
            if !(0.0..=1.0).contains(&fraction) {
                return Err(Error::InvalidArgument(format!("fraction {fraction} outside [0, 1]")));
            }
            let occluded = ((fraction * n as f64).round() as usize).min(n);
            let coalitions: Vec<Coalition> = (0..draws)
                .map(|d| {
                    let mut order: Vec<usize> = (0..n).collect();
                    let mut stream = ctx.stream(&[rng::hash_str("scope"), fi as u64, d as u64]);
                    order.shuffle(&mut stream);
                    Coalition::from_members(n, order[occluded..].iter().copied()).expect("in range")
                })
                .collect();
            let preds = ctx.occluded_predictions(&coalitions)?;
            let r: Vec<f64> = preds.iter().map(|p| p.prob(ctx.target_class()).as_f64()).collect();
            let nr: Vec<f64> = preds.iter().map(|p| p.max_prob().as_f64()).collect();
            let (r_oms_mean, r_oms_std) = mean_std(&r);
            let (nr_oms_mean, nr_oms_std) = mean_std(&nr);
            Ok(ScopeSample {
                fraction,
                occluded,
                r_oms_mean,
                r_oms_std,
                nr_oms_mean,
                nr_oms_std,
            })
        })
        .collect()
}
