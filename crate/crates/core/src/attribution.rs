//! Superpixel attributions: exact and permutation-sampled Shapley values,
//! PredDiff, ArchAttribute, a random baseline and imported pixel maps.

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{AttributionVector, Coalition, SuperpixelMask};
use crate::error::{Error, Result};
use crate::io;
use crate::rng;
use crate::scalar::{GameValue, Scalar};
use crate::value::{ModelGame, OcclusionContext, ValueFunction, ValueFunctionSpec};

pub const MAX_EXACT_PLAYERS: usize = 20;
const ENUMERATION_CHUNK: usize = 1 << 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapleyMode {
    Exact,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapleyConfig {
    pub mode: ShapleyMode,
    pub mc_samples: usize,
    #[serde(default)]
    pub value_spec: ValueFunctionSpec,
}

impl ShapleyConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        self.value_spec.validate()?;
        if self.mode == ShapleyMode::Exact && n > MAX_EXACT_PLAYERS {
            return Err(Error::TooManyPlayers { n, max: MAX_EXACT_PLAYERS });
        }
        if self.mc_samples == 0 {
            return Err(Error::InvalidArgument("mc_samples must be at least 1".into()));
        }
        Ok(())
    }
}

/// `C(n, k)` as a game value.
fn binomial<V: GameValue>(n: usize, k: usize) -> V {
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for j in 0..k {
        c = c * (n - j) as u128 / (j + 1) as u128;
    }
    V::from_u128(c).expect("binomial fits the value type")
}

/// Exact Shapley values by full enumeration of the `2^n` coalitions.
pub fn shapley_exact<V, G>(game: &G, parallel: bool) -> Result<Vec<V>>
where
    V: GameValue,
    G: ValueFunction<V> + ?Sized,
{
    let n = game.players();
    if n > MAX_EXACT_PLAYERS {
        return Err(Error::TooManyPlayers { n, max: MAX_EXACT_PLAYERS });
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let total = 1usize << n;
    let chunks: Vec<(usize, usize)> = (0..total)
        .step_by(ENUMERATION_CHUNK)
        .map(|lo| (lo, (lo + ENUMERATION_CHUNK).min(total)))
        .collect();
    let eval = |&(lo, hi): &(usize, usize)| {
        let coalitions: Vec<Coalition> = (lo..hi).map(|m| Coalition::from_bitmask(n, m as u64)).collect();
        game.evaluate(&coalitions)
    };
    let parts: Vec<Vec<V>> = if parallel {
        chunks.par_iter().map(eval).collect::<Result<_>>()?
    } else {
        chunks.iter().map(eval).collect::<Result<_>>()?
    };
    let values: Vec<V> = parts.into_iter().flatten().collect();
    if values.len() != total {
        return Err(Error::InvalidArgument("value function returned the wrong count".into()));
    }

    // weight(s) = s!(n-s-1)!/n! = 1 / (n * C(n-1, s))
    let nv = V::from_usize(n).expect("n fits");
    let weights: Vec<V> = (0..n).map(|s| V::one() / (nv.clone() * binomial::<V>(n - 1, s))).collect();
    let mut phi = vec![V::zero(); n];
    for (i, p) in phi.iter_mut().enumerate() {
        let bit = 1usize << i;
        for m in 0..total {
            if m & bit == 0 {
                let s = m.count_ones() as usize;
                *p = p.clone() + weights[s].clone() * (values[m | bit].clone() - values[m].clone());
            }
        }
    }
    Ok(phi)
}

/// Uniform random permutation for sample `index`.
pub fn sample_permutation(n: usize, master_seed: u64, index: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(master_seed, &[rng::hash_str("permutation"), index as u64]));
    order
}

/// Permutation-sampling Shapley estimate over `samples` permutations.
///
/// `v(∅)` is evaluated once and every permutation adds `n` evaluations.
/// Per-permutation gains are summed in permutation order, so the result does
/// not depend on `parallel`.
pub fn shapley_mc<V, G>(game: &G, samples: usize, master_seed: u64, parallel: bool) -> Result<Vec<V>>
where
    V: GameValue,
    G: ValueFunction<V> + ?Sized,
{
    if samples == 0 {
        return Err(Error::InvalidArgument("M must be at least 1".into()));
    }
    let n = game.players();
    let empty = game.evaluate(&[Coalition::empty(n)])?.remove(0);
    let gains = |m: usize| -> Result<Vec<V>> {
        let order = sample_permutation(n, master_seed, m);
        let mut s = Coalition::empty(n);
        let chain: Vec<Coalition> = order
            .iter()
            .map(|&i| {
                s.insert(i);
                s.clone()
            })
            .collect();
        let values = game.evaluate(&chain)?;
        let mut g = vec![V::zero(); n];
        let mut prev = empty.clone();
        for (&i, v) in order.iter().zip(values) {
            g[i] = v.clone() - prev;
            prev = v;
        }
        Ok(g)
    };
    let per: Vec<Vec<V>> = if parallel {
        (0..samples).into_par_iter().map(gains).collect::<Result<_>>()?
    } else {
        (0..samples).map(gains).collect::<Result<_>>()?
    };
    let mut phi = vec![V::zero(); n];
    for g in per {
        for (p, x) in phi.iter_mut().zip(g) {
            *p = p.clone() + x;
        }
    }
    let m = V::from_usize(samples).expect("M fits");
    Ok(phi.into_iter().map(|p| p / m.clone()).collect())
}

/// `φ_i = v(N) − v(N ∖ {i})`, `n + 1` evaluations.
pub fn preddiff<V, G>(game: &G) -> Result<Vec<V>>
where
    V: GameValue,
    G: ValueFunction<V> + ?Sized,
{
    let n = game.players();
    let full = Coalition::full(n);
    let mut coalitions = vec![full.clone()];
    coalitions.extend((0..n).map(|i| full.without(i)));
    let v = game.evaluate(&coalitions)?;
    Ok(v[1..].iter().map(|x| v[0].clone() - x.clone()).collect())
}

/// `φ_i = v({i}) − v(∅)`, `n + 1` evaluations.
pub fn arch_attribute<V, G>(game: &G) -> Result<Vec<V>>
where
    V: GameValue,
    G: ValueFunction<V> + ?Sized,
{
    let n = game.players();
    let empty = Coalition::empty(n);
    let mut coalitions = vec![empty.clone()];
    coalitions.extend((0..n).map(|i| empty.with(i)));
    let v = game.evaluate(&coalitions)?;
    Ok(v[1..].iter().map(|x| x.clone() - v[0].clone()).collect())
}

/// I.i.d. uniform `[0, 1)` scores from the stream keyed by `parts`.
pub fn random_attribution<T: Scalar>(n: usize, master_seed: u64, parts: &[u64]) -> Vec<T> {
    let mut key = vec![rng::hash_str("random_attribution")];
    key.extend_from_slice(parts);
    let mut stream = rng::stream(master_seed, &key);
    (0..n).map(|_| T::of(stream.random::<f64>())).collect()
}

/// Superpixel means of a pixel-attribution map (optionally of `|value|`).
pub fn superpixel_means(width: usize, height: usize, values: &[f64], mask: &SuperpixelMask, take_abs: bool) -> Result<Vec<f64>> {
    if (width, height) != (mask.width(), mask.height()) || values.len() != width * height {
        return Err(Error::DimensionMismatch {
            expected: format!("{}x{}", mask.width(), mask.height()),
            actual: format!("{width}x{height}"),
        });
    }
    if let Some(p) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidAttribution(format!("pixel {p} is {}", values[p])));
    }
    Ok((0..mask.n())
        .map(|i| {
            let seg = mask.segment(i);
            let sum: f64 = seg
                .iter()
                .map(|&p| {
                    let v = values[p as usize];
                    if take_abs {
                        v.abs()
                    } else {
                        v
                    }
                })
                .sum();
            sum / seg.len() as f64
        })
        .collect())
}

pub fn import_pixel_attribution(path: &Path, mask: &SuperpixelMask, take_abs: bool) -> Result<Vec<f64>> {
    let (w, h, values) = io::read_pixel_map(path)?;
    superpixel_means(w, h, &values, mask, take_abs)
}

/// First existing `{dir}/{image_id}.{pxat,npy}`.
pub fn find_pixel_map(dir: &Path, image_id: &str) -> Result<PathBuf> {
    ["pxat", "npy"]
        .iter()
        .map(|ext| dir.join(format!("{image_id}.{ext}")))
        .find(|p| p.exists())
        .ok_or_else(|| Error::Config(format!("no pixel map for {image_id} in {}", dir.display())))
}

/// Configured attribution method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AttributionMethod {
    Shapley {
        #[serde(default = "default_shapley_id")]
        id: String,
        mode: ShapleyMode,
        #[serde(default = "default_mc_samples")]
        mc_samples: usize,
    },
    Preddiff {
        #[serde(default = "default_preddiff_id")]
        id: String,
    },
    ArchAttribute {
        #[serde(default = "default_arch_id")]
        id: String,
    },
    Random {
        #[serde(default = "default_random_id")]
        id: String,
    },
    /// Pixel maps `{dir}/{image_id}.pxat` (or `.npy`) averaged per superpixel.
    Imported {
        id: String,
        dir: PathBuf,
        #[serde(default)]
        take_abs: bool,
    },
}

fn default_shapley_id() -> String {
    "shapley".into()
}

fn default_mc_samples() -> usize {
    2000
}

fn default_preddiff_id() -> String {
    "preddiff".into()
}

fn default_arch_id() -> String {
    "archattribute".into()
}

fn default_random_id() -> String {
    "random".into()
}

impl AttributionMethod {
    pub fn id(&self) -> &str {
        match self {
            AttributionMethod::Shapley { id, .. }
            | AttributionMethod::Preddiff { id }
            | AttributionMethod::ArchAttribute { id }
            | AttributionMethod::Random { id }
            | AttributionMethod::Imported { id, .. } => id,
        }
    }

    /// Whether the method queries the occluded model.
    pub fn uses_model(&self) -> bool {
        !matches!(self, AttributionMethod::Random { .. } | AttributionMethod::Imported { .. })
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            AttributionMethod::Shapley { mc_samples, .. } if *mc_samples == 0 => {
                Err(Error::Config("mc_samples must be at least 1".into()))
            }
            AttributionMethod::Imported { dir, .. } if !dir.is_dir() => {
                Err(Error::Config(format!("attribution directory {} not found", dir.display())))
            }
            _ => Ok(()),
        }
    }
}

/// Attribution plus the number of coalition evaluations it needed.
#[derive(Debug, Clone)]
pub struct AttributionOutcome<T> {
    pub vector: AttributionVector<T>,
    pub calls: u64,
}

/// Runs `method` against the occluded model of `ctx`.
pub fn attribute<T: Scalar>(
    method: &AttributionMethod,
    ctx: &OcclusionContext<'_, T>,
    image_id: &str,
    mask: &SuperpixelMask,
    spec: &ValueFunctionSpec,
    setup_id: &str,
    parallel: bool,
) -> Result<AttributionOutcome<T>> {
    let game = ModelGame { ctx, spec: *spec };
    let before = ctx.calls();
    let phi: Vec<T> = match method {
        AttributionMethod::Shapley { mode, mc_samples, .. } => {
            ShapleyConfig { mode: *mode, mc_samples: *mc_samples, value_spec: *spec }.validate(ctx.n())?;
            match mode {
                ShapleyMode::Exact => shapley_exact(&game, parallel)?,
                ShapleyMode::MonteCarlo => shapley_mc(
                    &game,
                    *mc_samples,
                    rng::combine(&[ctx.master_seed(), ctx.image_key()]),
                    parallel,
                )?,
            }
        }
        AttributionMethod::Preddiff { .. } => preddiff(&game)?,
        AttributionMethod::ArchAttribute { .. } => arch_attribute(&game)?,
        AttributionMethod::Random { id } => {
            random_attribution(ctx.n(), ctx.master_seed(), &[ctx.image_key(), rng::hash_str(id)])
        }
        AttributionMethod::Imported { dir, take_abs, .. } => import_pixel_attribution(&find_pixel_map(dir, image_id)?, mask, *take_abs)?
            .into_iter()
            .map(T::of)
            .collect(),
    };
    Ok(AttributionOutcome {
        vector: AttributionVector::new(phi, method.id(), setup_id)?,
        calls: ctx.calls() - before,
    })
}
