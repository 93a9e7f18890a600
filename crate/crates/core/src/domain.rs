//! Domain types shared by every stage of the benchmark, plus ordering and
//! coalition arithmetic.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::scalar::Scalar;

/// Float raster with channel-last, row-major layout and values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageTensor<T> {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<T>,
}

impl<T: Scalar> ImageTensor<T> {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<T>) -> Result<Self> {
        if width == 0 || height == 0 || channels == 0 {
            return Err(Error::InvalidImage(format!(
                "zero dimension {width}x{height}x{channels}"
            )));
        }
        if data.len() != width * height * channels {
            return Err(Error::InvalidImage(format!(
                "expected {} values, got {}",
                width * height * channels,
                data.len()
            )));
        }
        if let Some(bad) = data
            .iter()
            .position(|v| !v.is_finite() || *v < T::zero() || *v > T::one())
        {
            return Err(Error::InvalidImage(format!(
                "value {} at index {bad} outside [0, 1]",
                data[bad]
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    /// Image with every pixel set to `color`.
    pub fn filled(width: usize, height: usize, color: &[T]) -> Result<Self> {
        let data = color
            .iter()
            .copied()
            .cycle()
            .take(width * height * color.len())
            .collect();
        Self::new(width, height, color.len(), data)
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> T,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(x, y, c));
                }
            }
        }
        Self::new(width, height, channels, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    /// Pixel at flat index `p = y * width + x`.
    #[inline]
    pub fn pixel(&self, p: usize) -> &[T] {
        &self.data[p * self.channels..(p + 1) * self.channels]
    }

    #[inline]
    pub fn pixel_at(&self, x: usize, y: usize) -> &[T] {
        self.pixel(y * self.width + x)
    }

    /// Writes a pixel. Values are clamped to `[0, 1]` so the range invariant
    /// survives arithmetic round-off in imputers.
    #[inline]
    pub fn set_pixel(&mut self, p: usize, color: &[T]) {
        let c = self.channels;
        for (dst, src) in self.data[p * c..(p + 1) * c].iter_mut().zip(color) {
            *dst = src.max(T::zero()).min(T::one());
        }
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    pub fn shape_string(&self) -> String {
        format!("{}x{}x{}", self.width, self.height, self.channels)
    }

    pub fn ensure_same_shape(&self, other: &Self) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.shape_string(),
                actual: other.shape_string(),
            })
        }
    }

    /// Per-channel mean over all pixels.
    pub fn channel_means(&self) -> Vec<T> {
        let mut sums = vec![0.0f64; self.channels];
        for px in self.data.chunks_exact(self.channels) {
            for (s, v) in sums.iter_mut().zip(px) {
                *s += v.as_f64();
            }
        }
        let count = self.pixel_count() as f64;
        sums.into_iter().map(|s| T::of(s / count)).collect()
    }

    pub fn cast<U: Scalar>(&self) -> ImageTensor<U> {
        ImageTensor {
            width: self.width,
            height: self.height,
            channels: self.channels,
            data: self.data.iter().map(|v| U::of(v.as_f64())).collect(),
        }
    }
}

/// Partition of an image's pixels into `n` non-empty superpixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuperpixelMask {
    width: usize,
    height: usize,
    labels: Vec<u32>,
    segments: Vec<Vec<u32>>,
}

impl SuperpixelMask {
    /// Validates that `labels` covers `{0, ..., n-1}` with no empty label.
    pub fn new(width: usize, height: usize, labels: Vec<u32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidMask("zero dimension".into()));
        }
        if labels.len() != width * height {
            return Err(Error::InvalidMask(format!(
                "expected {} labels, got {}",
                width * height,
                labels.len()
            )));
        }
        let n = labels.iter().max().map_or(0, |&m| m as usize + 1);
        let mut segments: Vec<Vec<u32>> = vec![Vec::new(); n];
        for (p, &l) in labels.iter().enumerate() {
            segments[l as usize].push(p as u32);
        }
        if let Some(empty) = segments.iter().position(Vec::is_empty) {
            return Err(Error::InvalidMask(format!("label {empty} covers no pixel")));
        }
        Ok(Self {
            width,
            height,
            labels,
            segments,
        })
    }

    /// Relabels arbitrary labels to `0..n` preserving their numeric order.
    pub fn compacted(width: usize, height: usize, raw: &[u32]) -> Result<Self> {
        let mut used: Vec<u32> = raw.to_vec();
        used.sort_unstable();
        used.dedup();
        let labels = raw
            .iter()
            .map(|l| used.binary_search(l).expect("label present") as u32)
            .collect();
        Self::new(width, height, labels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Number of superpixels.
    pub fn n(&self) -> usize {
        self.segments.len()
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    #[inline]
    pub fn label(&self, p: usize) -> usize {
        self.labels[p] as usize
    }

    /// Flat pixel indices belonging to superpixel `i`.
    pub fn segment(&self, i: usize) -> &[u32] {
        &self.segments[i]
    }

    pub fn segment_sizes(&self) -> Vec<usize> {
        self.segments.iter().map(Vec::len).collect()
    }

    pub fn matches<T: Scalar>(&self, image: &ImageTensor<T>) -> Result<()> {
        if image.width() == self.width && image.height() == self.height {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: format!("{}x{}", self.width, self.height),
                actual: format!("{}x{}", image.width(), image.height()),
            })
        }
    }

    /// Order-independent fingerprint of the partition.
    pub fn fingerprint(&self) -> u64 {
        let mut h = rng::combine(&[self.width as u64, self.height as u64]);
        for chunk in self.labels.chunks(64) {
            let words: Vec<u64> = chunk.iter().map(|&l| u64::from(l)).collect();
            h = rng::combine(&[h, rng::combine(&words)]);
        }
        h
    }
}

/// Subset `S` of the feature set `N = {0, ..., n-1}` stored as a bitset.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Coalition {
    n: usize,
    bits: Vec<u64>,
}

impl Coalition {
    pub fn empty(n: usize) -> Self {
        Self {
            n,
            bits: vec![0; n.div_ceil(64)],
        }
    }

    pub fn full(n: usize) -> Self {
        let mut c = Self::empty(n);
        for i in 0..n {
            c.insert(i);
        }
        c
    }

    pub fn from_members(n: usize, members: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut c = Self::empty(n);
        for i in members {
            if i >= n {
                return Err(Error::OutOfBounds { index: i, len: n });
            }
            c.insert(i);
        }
        Ok(c)
    }

    /// Coalition whose members are the set bits of `mask` (n ≤ 64).
    pub fn from_bitmask(n: usize, mask: u64) -> Self {
        debug_assert!(n <= 64);
        let mut c = Self::empty(n);
        if n > 0 {
            c.bits[0] = mask;
        }
        c
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn contains(&self, i: usize) -> bool {
        i < self.n && self.bits[i / 64] & (1 << (i % 64)) != 0
    }

    #[inline]
    pub fn insert(&mut self, i: usize) {
        debug_assert!(i < self.n);
        self.bits[i / 64] |= 1 << (i % 64);
    }

    #[inline]
    pub fn remove(&mut self, i: usize) {
        debug_assert!(i < self.n);
        self.bits[i / 64] &= !(1 << (i % 64));
    }

    pub fn with(&self, i: usize) -> Self {
        let mut c = self.clone();
        c.insert(i);
        c
    }

    pub fn without(&self, i: usize) -> Self {
        let mut c = self.clone();
        c.remove(i);
        c
    }

    /// Cardinality `|S|`.
    pub fn len(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.iter().all(|&w| w == 0)
    }

    pub fn complement(&self) -> Self {
        let mut c = Self::full(self.n);
        for (dst, src) in c.bits.iter_mut().zip(&self.bits) {
            *dst &= !src;
        }
        c
    }

    pub fn members(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(|&i| self.contains(i))
    }

    pub fn is_disjoint(&self, other: &Self) -> bool {
        self.bits.iter().zip(&other.bits).all(|(a, b)| a & b == 0)
    }

    pub fn union(&self, other: &Self) -> Self {
        let mut c = self.clone();
        for (dst, src) in c.bits.iter_mut().zip(&other.bits) {
            *dst |= src;
        }
        c
    }

    /// 64-bit hash of the membership bitset; depends only on the set.
    pub fn hash64(&self) -> u64 {
        let mut parts = Vec::with_capacity(self.bits.len() + 1);
        parts.push(self.n as u64);
        parts.extend_from_slice(&self.bits);
        rng::combine(&parts)
    }
}

/// Permutation `π` of `{0, ..., n-1}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureOrdering {
    order: Vec<usize>,
}

impl FeatureOrdering {
    pub fn new(order: Vec<usize>) -> Result<Self> {
        let n = order.len();
        let mut seen = vec![false; n];
        for &i in &order {
            if i >= n || seen[i] {
                return Err(Error::InvalidOrdering(format!(
                    "{order:?} is not a permutation of 0..{n}"
                )));
            }
            seen[i] = true;
        }
        Ok(Self { order })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            order: (0..n).collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.order.len()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.order
    }

    /// `π^r = [π_n, ..., π_1]`.
    pub fn reversed(&self) -> Self {
        Self {
            order: self.order.iter().rev().copied().collect(),
        }
    }

    /// `Π(s) = {π_1, ..., π_s}`.
    pub fn leading_set(&self, s: usize) -> Result<Coalition> {
        if s > self.n() {
            return Err(Error::OutOfBounds {
                index: s,
                len: self.n() + 1,
            });
        }
        Coalition::from_members(self.n(), self.order[..s].iter().copied())
    }
}

/// One score per superpixel for a `(method, image, setup)` triple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionVector<T> {
    pub phi: Vec<T>,
    pub method_id: String,
    pub setup_id: String,
}

impl<T: Scalar> AttributionVector<T> {
    pub fn new(phi: Vec<T>, method_id: impl Into<String>, setup_id: impl Into<String>) -> Result<Self> {
        if let Some(i) = phi.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidAttribution(format!(
                "entry {i} is {}",
                phi[i]
            )));
        }
        Ok(Self {
            phi,
            method_id: method_id.into(),
            setup_id: setup_id.into(),
        })
    }

    pub fn n(&self) -> usize {
        self.phi.len()
    }

    /// Ordering by descending score (signed).
    pub fn ordering(&self) -> Result<FeatureOrdering> {
        ordering_from_attribution(&self.phi, false)
    }
}

/// Indices sorted by descending score, ties broken by ascending index.
///
/// With `take_abs` the magnitudes `|φ_i|` are ranked instead.
pub fn ordering_from_attribution<T: Scalar>(phi: &[T], take_abs: bool) -> Result<FeatureOrdering> {
    if let Some(i) = phi.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidAttribution(format!("entry {i} is {}", phi[i])));
    }
    let key = |i: usize| if take_abs { phi[i].abs() } else { phi[i] };
    let mut order: Vec<usize> = (0..phi.len()).collect();
    order.sort_by(|&a, &b| {
        key(b)
            .partial_cmp(&key(a))
            .expect("finite")
            .then(a.cmp(&b))
    });
    Ok(FeatureOrdering { order })
}

/// Occluded predictions along an ordering: `values[s]` is the prediction
/// after removing the first `s` features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PFCurve<T> {
    pub values: Vec<T>,
    pub ordering_id: String,
}

impl<T: Scalar> PFCurve<T> {
    pub fn new(values: Vec<T>, ordering_id: impl Into<String>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("empty PF curve".into()));
        }
        if let Some(i) = values
            .iter()
            .position(|v| !v.is_finite() || *v < T::zero() || *v > T::one())
        {
            return Err(Error::InvalidProbabilities(format!(
                "curve value {} at step {i}",
                values[i]
            )));
        }
        Ok(Self {
            values,
            ordering_id: ordering_id.into(),
        })
    }

    /// Feature count `n`; the curve holds `n + 1` points.
    pub fn n(&self) -> usize {
        self.values.len() - 1
    }

    /// Pointwise mean of equally long curves.
    pub fn mean(curves: &[PFCurve<T>], ordering_id: impl Into<String>) -> Result<Self> {
        let first = curves
            .first()
            .ok_or_else(|| Error::InvalidArgument("no curves to average".into()))?;
        let len = first.values.len();
        if curves.iter().any(|c| c.values.len() != len) {
            return Err(Error::InvalidArgument("curves differ in length".into()));
        }
        let k = T::of_usize(curves.len());
        let values = (0..len)
            .map(|s| {
                let m = curves.iter().map(|c| c.values[s]).sum::<T>() / k;
                m.max(T::zero()).min(T::one())
            })
            .collect();
        Self::new(values, ordering_id)
    }
}

/// One point of the design-choice grid.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExperimentSetup {
    pub imputer_id: String,
    pub segmenter_id: String,
    pub n_superpixels: usize,
    pub predictor_id: String,
    pub imputer_samples: usize,
    pub baseline_orderings: usize,
    pub master_seed: u64,
}

impl ExperimentSetup {
    pub fn validate(&self) -> Result<()> {
        if self.n_superpixels < 2 {
            return Err(Error::Config("n_superpixels must be at least 2".into()));
        }
        if self.imputer_samples == 0 || self.baseline_orderings == 0 {
            return Err(Error::Config(
                "imputer_samples and baseline_orderings must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn id(&self) -> String {
        format!(
            "{}|{}|n{}|{}",
            self.imputer_id, self.segmenter_id, self.n_superpixels, self.predictor_id
        )
    }
}

/// MIF/LIF and the derived relevance gains for one (setup, method).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureRecord<T> {
    pub setup_id: String,
    pub method_id: String,
    pub mif: T,
    pub lif: T,
    pub mrg: T,
    pub lrg: T,
    pub srg: T,
    pub r_oms_bar: T,
}

impl<T: Scalar> MeasureRecord<T> {
    pub fn from_aucs(
        setup_id: impl Into<String>,
        method_id: impl Into<String>,
        mif: T,
        lif: T,
        r_oms_bar: T,
    ) -> Self {
        let (mrg, lrg, srg) = crate::measures::relevance_gains(mif, lif, r_oms_bar);
        Self {
            setup_id: setup_id.into(),
            method_id: method_id.into(),
            mif,
            lif,
            mrg,
            lrg,
            srg,
            r_oms_bar,
        }
    }

    pub fn cast<U: Scalar>(&self) -> MeasureRecord<U> {
        MeasureRecord {
            setup_id: self.setup_id.clone(),
            method_id: self.method_id.clone(),
            mif: U::of(self.mif.as_f64()),
            lif: U::of(self.lif.as_f64()),
            mrg: U::of(self.mrg.as_f64()),
            lrg: U::of(self.lrg.as_f64()),
            srg: U::of(self.srg.as_f64()),
            r_oms_bar: U::of(self.r_oms_bar.as_f64()),
        }
    }
}
