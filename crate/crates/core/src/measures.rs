//! Pixel-flipping curves, their AUC and the MIF/LIF/MRG/LRG/SRG family.
//!
//! Curves use deletion semantics: point `s` is the prediction with the first
//! `s` features of the ordering occluded. AUC is the mean of the `n + 1`
//! points, so it always lies in `[0, 1]`.

use serde::{Deserialize, Serialize};

use crate::domain::{AttributionVector, ExperimentSetup, FeatureOrdering, MeasureRecord, PFCurve};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::value::{nr_oms, OcclusionContext};

/// R-OMS deletion curve of one ordering.
pub fn pf_curve<T: Scalar>(ctx: &OcclusionContext<'_, T>, pi: &FeatureOrdering, ordering_id: &str) -> Result<PFCurve<T>> {
    let preds = ctx.deletion_predictions(pi)?;
    PFCurve::new(preds.iter().map(|p| p.prob(ctx.target_class())).collect(), ordering_id)
}

/// R-OMS and NR-OMS deletion curves of one ordering from the same predictions.
pub fn pf_curves<T: Scalar>(
    ctx: &OcclusionContext<'_, T>,
    pi: &FeatureOrdering,
    ordering_id: &str,
) -> Result<(PFCurve<T>, PFCurve<T>)> {
    let preds = ctx.deletion_predictions(pi)?;
    Ok((
        PFCurve::new(preds.iter().map(|p| p.prob(ctx.target_class())).collect(), ordering_id)?,
        PFCurve::new(preds.iter().map(nr_oms).collect(), ordering_id)?,
    ))
}

pub fn auc<T: Scalar>(curve: &PFCurve<T>) -> T {
    curve.values.iter().copied().sum::<T>() / T::of_usize(curve.values.len())
}

/// MIF- and LIF-direction curves of one attribution on one image.
#[derive(Debug, Clone)]
pub struct AttributionCurves<T> {
    pub mif: PFCurve<T>,
    pub lif: PFCurve<T>,
}

pub fn attribution_curves<T: Scalar>(
    ctx: &OcclusionContext<'_, T>,
    phi: &AttributionVector<T>,
) -> Result<AttributionCurves<T>> {
    let pi = phi.ordering()?;
    Ok(AttributionCurves {
        mif: pf_curve(ctx, &pi, &format!("{}:mif", phi.method_id))?,
        lif: pf_curve(ctx, &pi.reversed(), &format!("{}:lif", phi.method_id))?,
    })
}

/// `(MIF, LIF)`: AUC of the descending-φ ordering and of its reverse.
pub fn mif_lif<T: Scalar>(ctx: &OcclusionContext<'_, T>, phi: &AttributionVector<T>) -> Result<(T, T)> {
    let c = attribution_curves(ctx, phi)?;
    Ok((auc(&c.mif), auc(&c.lif)))
}

/// `(MRG, LRG, SRG) = (r̄ − MIF, LIF − r̄, LIF − MIF)`.
pub fn relevance_gains<T: Scalar>(mif: T, lif: T, r_oms_bar: T) -> (T, T, T) {
    (r_oms_bar - mif, lif - r_oms_bar, lif - mif)
}

/// Mean over method pairs of the mean absolute pointwise difference.
pub fn curve_spread<T: Scalar>(curves: &[PFCurve<T>]) -> Result<T> {
    if curves.len() < 2 {
        return Err(Error::InvalidArgument("curve spread needs at least two curves".into()));
    }
    let len = curves[0].values.len();
    if curves.iter().any(|c| c.values.len() != len) {
        return Err(Error::DimensionMismatch {
            expected: format!("curves of {len} points"),
            actual: "curves of differing length".into(),
        });
    }
    let mut total = T::zero();
    let mut pairs = 0usize;
    for (i, a) in curves.iter().enumerate() {
        for b in &curves[i + 1..] {
            let d: T = a.values.iter().zip(&b.values).map(|(&x, &y)| (x - y).abs()).sum();
            total = total + d / T::of_usize(len);
            pairs += 1;
        }
    }
    Ok(total / T::of_usize(pairs))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gain {
    Mrg,
    Lrg,
    Srg,
}

impl Gain {
    pub fn of<T: Scalar>(self, record: &MeasureRecord<T>) -> T {
        match self {
            Gain::Mrg => record.mrg,
            Gain::Lrg => record.lrg,
            Gain::Srg => record.srg,
        }
    }
}

/// Population variance of one gain across setups.
pub fn cross_setup_variance<T: Scalar>(records: &[MeasureRecord<T>], measure: Gain) -> Result<T> {
    if records.len() < 2 {
        return Err(Error::InvalidArgument("variance needs at least two records".into()));
    }
    Ok(population_variance(&records.iter().map(|r| measure.of(r)).collect::<Vec<_>>()))
}

pub fn population_variance<T: Scalar>(xs: &[T]) -> T {
    let n = T::of_usize(xs.len());
    let mean = xs.iter().copied().sum::<T>() / n;
    xs.iter().map(|&x| (x - mean) * (x - mean)).sum::<T>() / n
}

/// Outcome of one PF setup averaged over images.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SetupResult<T> {
    pub setup: ExperimentSetup,
    pub r_oms_bar: T,
    pub nr_oms_bar: T,
    pub images: usize,
    /// Measures computed on the mean curves.
    pub records: Vec<MeasureRecord<T>>,
    /// Means of per-image measures; equal to `records` up to rounding.
    pub per_image_mean: Vec<MeasureRecord<T>>,
    pub mean_mif_curves: Vec<PFCurve<T>>,
    pub mean_lif_curves: Vec<PFCurve<T>>,
    pub mean_random_curve: PFCurve<T>,
}

impl<T: Scalar> SetupResult<T> {
    pub fn record(&self, method_id: &str) -> Option<&MeasureRecord<T>> {
        self.records.iter().find(|r| r.method_id == method_id)
    }
}

/// Per-image ingredients for [`aggregate_setup`].
#[derive(Debug, Clone)]
pub struct ImageMeasures<T> {
    pub r_oms_bar: T,
    pub nr_oms_bar: T,
    pub random_curve: PFCurve<T>,
    /// One entry per method, same order across images.
    pub curves: Vec<(String, AttributionCurves<T>)>,
}

/// Averages per-image curves pointwise and derives the setup measures.
pub fn aggregate_setup<T: Scalar>(setup: &ExperimentSetup, images: &[ImageMeasures<T>]) -> Result<SetupResult<T>> {
    let first = images
        .first()
        .ok_or_else(|| Error::InvalidArgument("no images to aggregate".into()))?;
    let count = T::of_usize(images.len());
    let mean = |xs: Vec<T>| xs.into_iter().sum::<T>() / count;
    let r_oms_bar = mean(images.iter().map(|m| m.r_oms_bar).collect());
    let nr_oms_bar = mean(images.iter().map(|m| m.nr_oms_bar).collect());
    let setup_id = setup.id();
    let mut records = Vec::new();
    let mut per_image_mean = Vec::new();
    let mut mean_mif_curves = Vec::new();
    let mut mean_lif_curves = Vec::new();
    for (k, (method, _)) in first.curves.iter().enumerate() {
        let mut mifs = Vec::with_capacity(images.len());
        let mut lifs = Vec::with_capacity(images.len());
        for m in images {
            let (name, c) = m.curves.get(k).ok_or_else(|| Error::InvalidArgument("method lists differ across images".into()))?;
            if name != method {
                return Err(Error::InvalidArgument(format!("method {name} where {method} expected")));
            }
            mifs.push(c.mif.clone());
            lifs.push(c.lif.clone());
        }
        let mean_mif = PFCurve::mean(&mifs, format!("{method}:mif"))?;
        let mean_lif = PFCurve::mean(&lifs, format!("{method}:lif"))?;
        records.push(MeasureRecord::from_aucs(&setup_id, method, auc(&mean_mif), auc(&mean_lif), r_oms_bar));
        per_image_mean.push(MeasureRecord::from_aucs(
            &setup_id,
            method,
            mean(mifs.iter().map(auc).collect()),
            mean(lifs.iter().map(auc).collect()),
            r_oms_bar,
        ));
        mean_mif_curves.push(mean_mif);
        mean_lif_curves.push(mean_lif);
    }
    let randoms: Vec<_> = images.iter().map(|m| m.random_curve.clone()).collect();
    Ok(SetupResult {
        setup: setup.clone(),
        r_oms_bar,
        nr_oms_bar,
        images: images.len(),
        records,
        per_image_mean,
        mean_mif_curves,
        mean_lif_curves,
        mean_random_curve: PFCurve::mean(&randoms, "random")?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::ImageTensor;
    use crate::imputation::MeanImputer;
    use crate::predictor::{OcclusionFractionPredictor, ResponseCurve};
    use crate::segmentation::grid_mask;
    use proptest::prelude::*;

    fn curve(v: &[f64]) -> PFCurve<f64> {
        PFCurve::new(v.to_vec(), "t").unwrap()
    }

    #[test]
    fn auc_examples() {
        assert!((auc(&curve(&[0.3; 5])) - 0.3).abs() < 1e-15);
        assert_eq!(auc(&curve(&[1.0, 0.5, 0.0])), 0.5);
        for n in 1..12 {
            let v: Vec<f64> = (0..=n).map(|s| 1.0 - s as f64 / n as f64).collect();
            assert!((auc(&curve(&v)) - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn gains_example() {
        let (m, l, s) = relevance_gains(0.2f64, 0.7, 0.4);
        assert!((m - 0.2).abs() < 1e-15 && (l - 0.3).abs() < 1e-15 && (s - 0.5).abs() < 1e-15);
    }

    #[test]
    fn spread_examples() {
        let a = curve(&[0.9, 0.5, 0.1]);
        assert_eq!(curve_spread(&[a.clone(), a.clone()]).unwrap(), 0.0);
        let b = curve(&[0.8, 0.4, 0.0]);
        assert!((curve_spread(&[a.clone(), b]).unwrap() - 0.1).abs() < 1e-12);
        let cs = [curve(&[0.0; 3]), curve(&[0.3; 3]), curve(&[0.6; 3])];
        assert!((curve_spread(&cs).unwrap() - 0.4).abs() < 1e-12);
        assert!(curve_spread(&[a]).is_err());
    }

    #[test]
    fn variance_examples() {
        let rec = |srg: f64| MeasureRecord::from_aucs("s", "m", 0.5 - srg / 2.0, 0.5 + srg / 2.0, 0.5);
        assert_eq!(cross_setup_variance(&[rec(0.2), rec(0.2), rec(0.2)], Gain::Srg).unwrap(), 0.0);
        assert!((cross_setup_variance(&[rec(0.1), rec(0.3)], Gain::Srg).unwrap() - 0.01).abs() < 1e-12);
        assert!(cross_setup_variance(&[rec(0.1)], Gain::Srg).is_err());
    }

    #[test]
    fn fraction_predictor_curve_is_linear() {
        let fill = vec![0.5f64; 3];
        let img = ImageTensor::filled(12, 12, &[0.1, 0.2, 0.3]).unwrap();
        let mask = grid_mask(12, 12, 9).unwrap();
        let p = OcclusionFractionPredictor::new(fill.clone(), ResponseCurve::Linear, 2).unwrap();
        let imputer = MeanImputer::new(fill);
        let ctx = OcclusionContext::new(&p, &img, "a", &mask, &imputer, 1, 1).unwrap();
        let pi = FeatureOrdering::new(vec![3, 1, 4, 0, 5, 8, 2, 6, 7]).unwrap();
        let c = pf_curve(&ctx, &pi, "x").unwrap();
        for (s, v) in c.values.iter().enumerate() {
            assert!((v - (1.0 - s as f64 / 9.0)).abs() < 1e-12);
        }
        // A size-only model cannot tell orderings apart.
        let phi = AttributionVector::new(vec![0.3, 0.1, 0.9, 0.2, 0.5, 0.4, 0.7, 0.8, 0.6], "m", "s").unwrap();
        let (mif, lif) = mif_lif(&ctx, &phi).unwrap();
        assert!((mif - lif).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn gains_identity(mif in 0.0f64..=1.0, lif in 0.0f64..=1.0, r in 0.0f64..=1.0) {
            let (m, l, s) = relevance_gains(mif, lif, r);
            prop_assert!((s - (m + l)).abs() < 1e-12);
            prop_assert!(m <= r && l <= 1.0 - r + 1e-15 && (-1.0..=1.0).contains(&s));
        }

        #[test]
        fn auc_in_unit_interval(v in proptest::collection::vec(0.0f64..=1.0, 2..30)) {
            let a = auc(&curve(&v));
            prop_assert!((0.0..=1.0).contains(&a));
        }
    }
}
