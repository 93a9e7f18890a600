//! Benchmarking pixel-flipping evaluations of superpixel attributions.
//!
//! The pipeline: segment an image into superpixels, occlude coalitions of
//! them with an imputer, query a classifier, attribute, and score the
//! attribution with deletion curves (MIF/LIF/SRG). The [`harness`] runs whole
//! grids of occlusion setups and the [`ranking`] module analyses how stable
//! method rankings are across them.
//!
//! Numeric code is generic over [`Scalar`] (`f32`/`f64`); exact Shapley
//! values also accept any [`GameValue`], e.g. rationals.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attribution;
pub mod domain;
pub mod error;
pub mod harness;
pub mod imputation;
pub mod io;
pub mod measures;
pub mod predictor;
pub mod ranking;
pub mod rng;
pub mod scalar;
pub mod segmentation;
pub mod value;

pub use domain::{
    ordering_from_attribution, AttributionVector, Coalition, ExperimentSetup, FeatureOrdering, ImageTensor,
    MeasureRecord, PFCurve, SuperpixelMask,
};
pub use error::{Error, Result};
pub use scalar::{GameValue, Scalar};

pub type Image = ImageTensor<f64>;
pub type Image32 = ImageTensor<f32>;
pub type Attribution = AttributionVector<f64>;
pub type Attribution32 = AttributionVector<f32>;
pub type Curve = PFCurve<f64>;
pub type Curve32 = PFCurve<f32>;
pub type Record = MeasureRecord<f64>;
pub type Record32 = MeasureRecord<f32>;
pub type Probabilities = predictor::ProbabilityVector<f64>;
pub type Probabilities32 = predictor::ProbabilityVector<f32>;
