//! Imputers: artificial values for occluded superpixels.

use std::collections::BinaryHeap;
use std::cmp::Ordering;
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{Coalition, ImageTensor, SuperpixelMask};
use crate::error::{Error, Result};
use crate::io;
use crate::rng::StreamRng;
use crate::scalar::Scalar;

/// ImageNet channel means, the conventional default fill for the mean imputer.
pub const IMAGENET_MEAN: [f64; 3] = [0.485, 0.456, 0.406];

/// Image to occlude, its segmentation, and the kept coalition `S`.
#[derive(Debug, Clone, Copy)]
pub struct OcclusionRequest<'a, T> {
    pub image: &'a ImageTensor<T>,
    pub mask: &'a SuperpixelMask,
    pub present: &'a Coalition,
    pub sample_index: u64,
}

impl<'a, T: Scalar> OcclusionRequest<'a, T> {
    pub fn new(
        image: &'a ImageTensor<T>,
        mask: &'a SuperpixelMask,
        present: &'a Coalition,
        sample_index: u64,
    ) -> Result<Self> {
        mask.matches(image)?;
        if present.n() != mask.n() {
            return Err(Error::DimensionMismatch {
                expected: format!("coalition over {} superpixels", mask.n()),
                actual: format!("{}", present.n()),
            });
        }
        Ok(Self {
            image,
            mask,
            present,
            sample_index,
        })
    }

    /// Occluded superpixel indices, ascending.
    pub fn occluded(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.mask.n()).filter(|&i| !self.present.contains(i))
    }

    /// Per-pixel flag: true where the pixel must be imputed.
    pub fn hole(&self) -> Vec<bool> {
        self.mask
            .labels()
            .iter()
            .map(|&l| !self.present.contains(l as usize))
            .collect()
    }
}

pub trait Imputer<T: Scalar>: Send + Sync {
    fn id(&self) -> &str;

    /// Deterministic imputers ignore the random stream.
    fn is_deterministic(&self) -> bool;

    fn impute(&self, req: &OcclusionRequest<'_, T>, rng: &mut StreamRng) -> Result<ImageTensor<T>>;
}

fn fill_superpixel<T: Scalar>(out: &mut ImageTensor<T>, mask: &SuperpixelMask, i: usize, color: &[T]) {
    for &p in mask.segment(i) {
        out.set_pixel(p as usize, color);
    }
}

/// Constant channel-wise fill of every occluded superpixel.
pub fn mean_impute<T: Scalar>(req: &OcclusionRequest<'_, T>, channel_means: &[T]) -> Result<ImageTensor<T>> {
    if channel_means.len() != req.image.channels() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} channel means", req.image.channels()),
            actual: format!("{}", channel_means.len()),
        });
    }
    let mut out = req.image.clone();
    for i in req.occluded() {
        fill_superpixel(&mut out, req.mask, i, channel_means);
    }
    Ok(out)
}

/// Occluded pixels copied co-located from one uniformly drawn pool image.
pub fn trainset_impute<T: Scalar>(
    req: &OcclusionRequest<'_, T>,
    pool: &[ImageTensor<T>],
    rng: &mut StreamRng,
) -> Result<ImageTensor<T>> {
    if pool.is_empty() {
        return Err(Error::EmptyPool);
    }
    for reference in pool {
        req.image.ensure_same_shape(reference)?;
    }
    let donor = &pool[rng.random_range(0..pool.len())];
    let mut out = req.image.clone();
    for i in req.occluded() {
        for &p in req.mask.segment(i) {
            out.set_pixel(p as usize, donor.pixel(p as usize));
        }
    }
    Ok(out)
}

/// Each occluded superpixel gets the color of one uniformly drawn pixel of
/// the original image.
pub fn histogram_impute<T: Scalar>(req: &OcclusionRequest<'_, T>, rng: &mut StreamRng) -> Result<ImageTensor<T>> {
    let mut out = req.image.clone();
    let pixels = req.image.pixel_count();
    for i in req.occluded() {
        let source = rng.random_range(0..pixels);
        let color: Vec<T> = req.image.pixel(source).to_vec();
        fill_superpixel(&mut out, req.mask, i, &color);
    }
    Ok(out)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Flag {
    Known,
    Band,
    Inside,
}

#[derive(Clone, Copy)]
struct Front {
    t: f64,
    seq: u64,
    p: usize,
}

impl PartialEq for Front {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Front {}
impl PartialOrd for Front {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Front {
    // Min-heap on (t, seq).
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .t
            .total_cmp(&self.t)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Telea fast-marching inpainting of the pixels flagged in `hole`.
///
/// Each hole pixel, visited in order of arrival time of the marching front,
/// becomes a positively weighted average of already known pixels within
/// `radius`. Fails with [`Error::NoBoundary`] when nothing is known.
pub fn telea_inpaint<T: Scalar>(image: &ImageTensor<T>, hole: &[bool], radius: usize) -> Result<ImageTensor<T>> {
    let (w, h, ch) = (image.width(), image.height(), image.channels());
    if hole.len() != w * h {
        return Err(Error::DimensionMismatch {
            expected: format!("{} hole flags", w * h),
            actual: format!("{}", hole.len()),
        });
    }
    if hole.iter().all(|&f| f) {
        return Err(Error::NoBoundary);
    }
    let mut out = image.clone();
    if !hole.iter().any(|&f| f) {
        return Ok(out);
    }

    let mut flag: Vec<Flag> = hole.iter().map(|&f| if f { Flag::Inside } else { Flag::Known }).collect();
    let mut time = vec![0.0f64; w * h];
    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;
    for p in 0..w * h {
        if hole[p] {
            time[p] = f64::INFINITY;
            continue;
        }
        let (x, y) = (p % w, p / w);
        let touches_hole = (x > 0 && hole[p - 1])
            || (x + 1 < w && hole[p + 1])
            || (y > 0 && hole[p - w])
            || (y + 1 < h && hole[p + w]);
        if touches_hole {
            flag[p] = Flag::Band;
            heap.push(Front { t: 0.0, seq, p });
            seq += 1;
        }
    }

    let r = radius.max(1) as isize;
    let r2 = (r * r) as f64;
    let mut value = vec![0.0f64; ch];

    let solve = |flag: &[Flag], time: &[f64], a: Option<usize>, b: Option<usize>| -> f64 {
        let ta = a.filter(|&q| flag[q] != Flag::Inside).map(|q| time[q]);
        let tb = b.filter(|&q| flag[q] != Flag::Inside).map(|q| time[q]);
        match (ta, tb) {
            (Some(t1), Some(t2)) => {
                let d = 2.0 - (t1 - t2).powi(2);
                if d > 0.0 {
                    let r = d.sqrt();
                    let s = (t1 + t2 - r) / 2.0;
                    if s >= t1 && s >= t2 {
                        return s;
                    }
                    let s = s + r;
                    if s >= t1 && s >= t2 {
                        return s;
                    }
                }
                1.0 + t1.min(t2)
            }
            (Some(t), None) | (None, Some(t)) => 1.0 + t,
            (None, None) => f64::INFINITY,
        }
    };

    while let Some(Front { p, .. }) = heap.pop() {
        if flag[p] == Flag::Known {
            continue;
        }
        flag[p] = Flag::Known;
        let (x, y) = (p % w, p / w);
        let neighbors = [
            (x.wrapping_sub(1), y),
            (x + 1, y),
            (x, y.wrapping_sub(1)),
            (x, y + 1),
        ];
        for (nx, ny) in neighbors {
            if nx >= w || ny >= h {
                continue;
            }
            let q = ny * w + nx;
            if flag[q] != Flag::Inside {
                continue;
            }
            let at = |xx: usize, yy: usize| (xx < w && yy < h).then(|| yy * w + xx);
            let left = at(nx.wrapping_sub(1), ny);
            let right = at(nx + 1, ny);
            let up = at(nx, ny.wrapping_sub(1));
            let down = at(nx, ny + 1);
            let t = solve(&flag, &time, left, up)
                .min(solve(&flag, &time, right, up))
                .min(solve(&flag, &time, left, down))
                .min(solve(&flag, &time, right, down));
            time[q] = t;

            // Gradient of the arrival time at q.
            let known_t = |o: Option<usize>| o.filter(|&o| flag[o] != Flag::Inside).map(|o| time[o]);
            let grad = |lo: Option<usize>, hi: Option<usize>| match (known_t(lo), known_t(hi)) {
                (Some(a), Some(b)) => (b - a) / 2.0,
                (Some(a), None) => t - a,
                (None, Some(b)) => b - t,
                (None, None) => 0.0,
            };
            let (gx, gy) = (grad(left, right), grad(up, down));

            value.iter_mut().for_each(|v| *v = 0.0);
            let mut weight_sum = 0.0;
            for dy in -r..=r {
                for dx in -r..=r {
                    let (kx, ky) = (nx as isize + dx, ny as isize + dy);
                    if kx < 0 || ky < 0 || kx >= w as isize || ky >= h as isize {
                        continue;
                    }
                    let dist2 = (dx * dx + dy * dy) as f64;
                    if dist2 > r2 {
                        continue;
                    }
                    let k = ky as usize * w + kx as usize;
                    if flag[k] == Flag::Inside || k == q {
                        continue;
                    }
                    // Vector from neighbor to q.
                    let (vx, vy) = (-dx as f64, -dy as f64);
                    let direction = ((vx * gx + vy * gy).abs() / dist2.sqrt()).max(1e-6);
                    let distance = 1.0 / dist2;
                    let level = 1.0 / (1.0 + (time[k] - t).abs());
                    let wgt = direction * distance * level;
                    weight_sum += wgt;
                    for (acc, c) in value.iter_mut().zip(out.pixel(k)) {
                        *acc += wgt * c.as_f64();
                    }
                }
            }
            if weight_sum > 0.0 {
                let color: Vec<T> = value.iter().map(|v| T::of(v / weight_sum)).collect();
                out.set_pixel(q, &color);
            }
            flag[q] = Flag::Band;
            heap.push(Front { t, seq, p: q });
            seq += 1;
        }
    }
    Ok(out)
}

/// Telea inpainting of all occluded superpixels.
pub fn inpaint_impute<T: Scalar>(req: &OcclusionRequest<'_, T>, radius: usize) -> Result<ImageTensor<T>> {
    if req.present.is_empty() {
        return Err(Error::NoBoundary);
    }
    let inpainted = telea_inpaint(req.image, &req.hole(), radius)?;
    Ok(restore_kept(req, inpainted))
}

/// Copies kept superpixels back from the original, bit-exactly.
fn restore_kept<T: Scalar>(req: &OcclusionRequest<'_, T>, mut out: ImageTensor<T>) -> ImageTensor<T> {
    for i in req.present.members() {
        for &p in req.mask.segment(i) {
            out.set_pixel(p as usize, req.image.pixel(p as usize));
        }
    }
    out
}

/// External inpainting tool invoked through a request directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalEndpoint {
    /// Program to run; the request directory is appended as last argument.
    pub command: String,
    #[serde(default)]
    pub args: Vec<String>,
    #[serde(default = "default_deadline_secs")]
    pub timeout_secs: f64,
    /// Parent directory for request directories; the system temp dir when unset.
    #[serde(default)]
    pub work_dir: Option<PathBuf>,
}

fn default_deadline_secs() -> f64 {
    300.0
}

#[derive(Serialize)]
struct ExternalMeta<'a> {
    image_id: &'a str,
    seed: u64,
    sample_index: u64,
    width: usize,
    height: usize,
}

/// Sends the request (mean pre-filled `input.png`, `mask.png` with 255 on
/// occluded pixels, `meta.json`) to an external tool and reads back
/// `output.png`. Kept pixels are always restored from the original.
pub fn external_impute<T: Scalar>(
    req: &OcclusionRequest<'_, T>,
    endpoint: &ExternalEndpoint,
    channel_means: &[T],
    image_id: &str,
    seed: u64,
) -> Result<ImageTensor<T>> {
    let prefilled = mean_impute(req, channel_means)?;
    let dir = match &endpoint.work_dir {
        Some(parent) => tempfile::Builder::new().prefix("pfbench-req").tempdir_in(parent),
        None => tempfile::Builder::new().prefix("pfbench-req").tempdir(),
    }
    .map_err(|e| Error::io("request directory", e))?;
    let path = dir.path();
    io::write_image_png8(&prefilled, &path.join("input.png"))?;
    io::write_binary_mask_png(req.image.width(), req.image.height(), &req.hole(), &path.join("mask.png"))?;
    let meta = ExternalMeta {
        image_id,
        seed,
        sample_index: req.sample_index,
        width: req.image.width(),
        height: req.image.height(),
    };
    std::fs::write(path.join("meta.json"), serde_json::to_vec_pretty(&meta)?)
        .map_err(|e| Error::io(path.join("meta.json"), e))?;

    let mut child = Command::new(&endpoint.command)
        .args(&endpoint.args)
        .arg(path)
        .stdin(Stdio::null())
        .stdout(Stdio::null())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| Error::External(format!("cannot start `{}`: {e}", endpoint.command)))?;
    let deadline = Duration::from_secs_f64(endpoint.timeout_secs.max(0.0));
    let started = Instant::now();
    let status = loop {
        match child.try_wait().map_err(|e| Error::External(e.to_string()))? {
            Some(status) => break status,
            None if started.elapsed() >= deadline => {
                let _ = child.kill();
                let _ = child.wait();
                return Err(Error::Timeout(deadline));
            }
            None => std::thread::sleep(Duration::from_millis(5)),
        }
    };
    if !status.success() {
        let mut stderr = String::new();
        if let Some(mut s) = child.stderr.take() {
            use std::io::Read;
            let _ = s.read_to_string(&mut stderr);
        }
        return Err(Error::External(format!("exit status {status}: {}", stderr.trim())));
    }
    let output: ImageTensor<T> = io::read_image(&path.join("output.png"))
        .map_err(|e| Error::External(format!("malformed response: {e}")))?;
    if output.width() != req.image.width() || output.height() != req.image.height() {
        return Err(Error::DimensionMismatch {
            expected: req.image.shape_string(),
            actual: output.shape_string(),
        });
    }
    let output = match (output.channels(), req.image.channels()) {
        (a, b) if a == b => output,
        (3, 1) => ImageTensor::from_fn(output.width(), output.height(), 1, |x, y, _| {
            let px = output.pixel_at(x, y);
            (px[0] + px[1] + px[2]) / T::of(3.0)
        })?,
        (1, 3) => ImageTensor::from_fn(output.width(), output.height(), 3, |x, y, _| output.pixel_at(x, y)[0])?,
        _ => {
            return Err(Error::DimensionMismatch {
                expected: req.image.shape_string(),
                actual: output.shape_string(),
            })
        }
    };
    Ok(restore_kept(req, output))
}

/// Configured imputer. Pool-backed and external imputers are bound to their
/// resources in [`ImputerDescriptor::build`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ImputerDescriptor {
    Mean {
        #[serde(default)]
        channel_means: Option<Vec<f64>>,
    },
    Trainset,
    Histogram,
    Inpaint {
        #[serde(default = "default_radius")]
        radius: usize,
    },
    External {
        #[serde(flatten)]
        endpoint: ExternalEndpoint,
    },
}

fn default_radius() -> usize {
    3
}

impl ImputerDescriptor {
    pub fn id(&self) -> String {
        match self {
            ImputerDescriptor::Mean { .. } => "mean".into(),
            ImputerDescriptor::Trainset => "trainset".into(),
            ImputerDescriptor::Histogram => "histogram".into(),
            ImputerDescriptor::Inpaint { .. } => "cv2".into(),
            ImputerDescriptor::External { .. } => "external".into(),
        }
    }

    pub fn is_deterministic(&self) -> bool {
        matches!(self, ImputerDescriptor::Mean { .. } | ImputerDescriptor::Inpaint { .. })
    }

    pub fn is_conditional(&self) -> bool {
        matches!(
            self,
            ImputerDescriptor::Histogram | ImputerDescriptor::Inpaint { .. } | ImputerDescriptor::External { .. }
        )
    }

    /// `channel_means` is the fallback fill when the descriptor carries none;
    /// `pool` backs the train-set imputer. `image_id` and `seed` are passed on
    /// to external tools.
    pub fn build<T: Scalar>(
        &self,
        channel_means: &[f64],
        pool: Option<Arc<Vec<ImageTensor<T>>>>,
        image_id: &str,
        seed: u64,
    ) -> Result<Box<dyn Imputer<T>>> {
        let means = |own: &Option<Vec<f64>>| -> Vec<T> {
            own.as_deref().unwrap_or(channel_means).iter().map(|&v| T::of(v)).collect()
        };
        Ok(match self {
            ImputerDescriptor::Mean { channel_means: own } => Box::new(MeanImputer::new(means(own))),
            ImputerDescriptor::Trainset => {
                let pool = pool.ok_or(Error::EmptyPool)?;
                if pool.is_empty() {
                    return Err(Error::EmptyPool);
                }
                Box::new(TrainsetImputer { pool })
            }
            ImputerDescriptor::Histogram => Box::new(HistogramImputer),
            ImputerDescriptor::Inpaint { radius } => Box::new(InpaintImputer {
                radius: *radius,
                fallback_means: means(&None),
            }),
            ImputerDescriptor::External { endpoint } => Box::new(ExternalImputer {
                endpoint: endpoint.clone(),
                channel_means: means(&None),
                seed,
                image_id: image_id.to_string(),
            }),
        })
    }
}

pub struct MeanImputer<T> {
    pub channel_means: Vec<T>,
}

impl<T: Scalar> MeanImputer<T> {
    pub fn new(channel_means: Vec<T>) -> Self {
        Self { channel_means }
    }
}

impl<T: Scalar> Imputer<T> for MeanImputer<T> {
    fn id(&self) -> &str {
        "mean"
    }
    fn is_deterministic(&self) -> bool {
        true
    }
    fn impute(&self, req: &OcclusionRequest<'_, T>, _rng: &mut StreamRng) -> Result<ImageTensor<T>> {
        mean_impute(req, &self.channel_means)
    }
}

pub struct TrainsetImputer<T> {
    pub pool: Arc<Vec<ImageTensor<T>>>,
}

impl<T: Scalar> Imputer<T> for TrainsetImputer<T> {
    fn id(&self) -> &str {
        "trainset"
    }
    fn is_deterministic(&self) -> bool {
        false
    }
    fn impute(&self, req: &OcclusionRequest<'_, T>, rng: &mut StreamRng) -> Result<ImageTensor<T>> {
        trainset_impute(req, &self.pool, rng)
    }
}

pub struct HistogramImputer;

impl<T: Scalar> Imputer<T> for HistogramImputer {
    fn id(&self) -> &str {
        "histogram"
    }
    fn is_deterministic(&self) -> bool {
        false
    }
    fn impute(&self, req: &OcclusionRequest<'_, T>, rng: &mut StreamRng) -> Result<ImageTensor<T>> {
        histogram_impute(req, rng)
    }
}

/// Telea inpainting; a fully occluded image falls back to the mean fill.
pub struct InpaintImputer<T> {
    pub radius: usize,
    pub fallback_means: Vec<T>,
}

impl<T: Scalar> Imputer<T> for InpaintImputer<T> {
    fn id(&self) -> &str {
        "cv2"
    }
    fn is_deterministic(&self) -> bool {
        true
    }
    fn impute(&self, req: &OcclusionRequest<'_, T>, _rng: &mut StreamRng) -> Result<ImageTensor<T>> {
        match inpaint_impute(req, self.radius) {
            Err(Error::NoBoundary) => {
                log::warn!("inpainting a fully occluded image; falling back to the mean fill");
                mean_impute(req, &self.fallback_means)
            }
            other => other,
        }
    }
}

pub struct ExternalImputer<T> {
    pub endpoint: ExternalEndpoint,
    pub channel_means: Vec<T>,
    pub seed: u64,
    pub image_id: String,
}

impl<T: Scalar> Imputer<T> for ExternalImputer<T> {
    fn id(&self) -> &str {
        "external"
    }
    fn is_deterministic(&self) -> bool {
        false
    }
    fn impute(&self, req: &OcclusionRequest<'_, T>, _rng: &mut StreamRng) -> Result<ImageTensor<T>> {
        external_impute(req, &self.endpoint, &self.channel_means, &self.image_id, self.seed)
    }
}
