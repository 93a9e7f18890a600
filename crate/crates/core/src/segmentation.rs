//! Superpixel segmenters: rectangular grid, SLIC, and imported label masks.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::domain::{ImageTensor, SuperpixelMask};
use crate::error::{Error, Result};
use crate::io;
use crate::scalar::Scalar;

/// SLIC parameters. `compactness` weighs spatial against color distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlicParams {
    pub n_target: usize,
    pub compactness: f64,
    pub max_iterations: usize,
}

impl SlicParams {
    pub fn new(n_target: usize, compactness: f64) -> Self {
        Self {
            n_target,
            compactness,
            max_iterations: 10,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_target < 2 {
            return Err(Error::InvalidArgument("SLIC needs n_target >= 2".into()));
        }
        if !(self.compactness > 0.0) || !self.compactness.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "compactness must be positive, got {}",
                self.compactness
            )));
        }
        Ok(())
    }
}

/// Rows and columns of the grid for `n_target` cells on a `width x height`
/// image: the exact factor pair `r * c = n_target` minimizing `|r/c - h/w|`.
pub fn grid_shape(width: usize, height: usize, n_target: usize) -> Result<(usize, usize)> {
    if n_target < 2 {
        return Err(Error::InvalidArgument("grid needs n_target >= 2".into()));
    }
    if n_target > width * height {
        return Err(Error::TooManySuperpixels {
            requested: n_target,
            pixels: width * height,
        });
    }
    let aspect = height as f64 / width as f64;
    (1..=n_target)
        .filter(|r| n_target.is_multiple_of(*r))
        .map(|r| (r, n_target / r))
        .filter(|&(r, c)| r <= height && c <= width)
        .min_by(|a, b| {
            let da = (a.0 as f64 / a.1 as f64 - aspect).abs();
            let db = (b.0 as f64 / b.1 as f64 - aspect).abs();
            da.partial_cmp(&db).expect("finite")
        })
        .ok_or_else(|| {
            Error::InvalidArgument(format!(
                "no {n_target}-cell grid fits a {width}x{height} image"
            ))
        })
}

/// Rectangular patches; cell edges at `floor(extent * k / cells)`.
pub fn grid_segment<T: Scalar>(image: &ImageTensor<T>, n_target: usize) -> Result<SuperpixelMask> {
    grid_mask(image.width(), image.height(), n_target)
}

pub fn grid_mask(width: usize, height: usize, n_target: usize) -> Result<SuperpixelMask> {
    let (rows, cols) = grid_shape(width, height, n_target)?;
    let row_of = |y: usize| (y * rows / height).min(rows - 1);
    let col_of = |x: usize| (x * cols / width).min(cols - 1);
    let mut labels = Vec::with_capacity(width * height);
    for y in 0..height {
        for x in 0..width {
            // cell k spans [floor(extent*k/cells), floor(extent*(k+1)/cells))
            let r = cell_index(y, height, rows, row_of(y));
            let c = cell_index(x, width, cols, col_of(x));
            labels.push((r * cols + c) as u32);
        }
    }
    SuperpixelMask::new(width, height, labels)
}

// Adjusts a first guess so that floor(extent*k/cells) <= pos < floor(extent*(k+1)/cells).
fn cell_index(pos: usize, extent: usize, cells: usize, guess: usize) -> usize {
    let start = |k: usize| extent * k / cells;
    let mut k = guess;
    while k > 0 && pos < start(k) {
        k -= 1;
    }
    while k + 1 < cells && pos >= start(k + 1) {
        k += 1;
    }
    k
}

fn srgb_to_linear(c: f64) -> f64 {
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

/// CIELAB (D65) of an sRGB color in `[0,1]`.
pub fn rgb_to_lab(rgb: [f64; 3]) -> [f64; 3] {
    let [r, g, b] = rgb.map(srgb_to_linear);
    let x = (0.412_456_4 * r + 0.357_576_1 * g + 0.180_437_5 * b) / 0.950_47;
    let y = 0.212_672_9 * r + 0.715_152_2 * g + 0.072_175 * b;
    let z = (0.019_333_9 * r + 0.119_192 * g + 0.950_304_1 * b) / 1.088_83;
    let f = |t: f64| {
        if t > 216.0 / 24389.0 {
            t.cbrt()
        } else {
            (24389.0 / 27.0 * t + 16.0) / 116.0
        }
    };
    let (fx, fy, fz) = (f(x), f(y), f(z));
    [116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)]
}

/// Color features used by SLIC: CIELAB for RGB, intensity scaled to `[0,100]` otherwise.
fn color_features<T: Scalar>(image: &ImageTensor<T>) -> (usize, Vec<f64>) {
    let n = image.pixel_count();
    if image.channels() == 3 {
        let mut out = Vec::with_capacity(3 * n);
        for p in 0..n {
            let px = image.pixel(p);
            out.extend_from_slice(&rgb_to_lab([px[0].as_f64(), px[1].as_f64(), px[2].as_f64()]));
        }
        (3, out)
    } else {
        (
            image.channels(),
            image.data().iter().map(|v| v.as_f64() * 100.0).collect(),
        )
    }
}

/// Initial SLIC centers: a `cols x rows` lattice with `rows * cols ≈ n_target`.
pub fn slic_lattice(width: usize, height: usize, n_target: usize) -> (usize, usize, Vec<(f64, f64)>) {
    let step = ((width * height) as f64 / n_target as f64).sqrt();
    let cols = ((width as f64 / step).round() as usize).clamp(1, width);
    let rows = ((height as f64 / step).round() as usize).clamp(1, height);
    let mut centers = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            centers.push((
                (c as f64 + 0.5) * width as f64 / cols as f64 - 0.5,
                (r as f64 + 0.5) * height as f64 / rows as f64 - 0.5,
            ));
        }
    }
    (cols, rows, centers)
}

/// Label of the nearest initial lattice center for every pixel.
pub fn lattice_labels(width: usize, height: usize, n_target: usize) -> Vec<u32> {
    let (cols, rows, _) = slic_lattice(width, height, n_target);
    let mut labels = Vec::with_capacity(width * height);
    for y in 0..height {
        for x in 0..width {
            let r = (y * rows / height).min(rows - 1);
            let c = (x * cols / width).min(cols - 1);
            labels.push((r * cols + c) as u32);
        }
    }
    labels
}

/// Simple linear iterative clustering in CIELAB + xy space with distance
/// `sqrt(d_lab² + λ²·(d_xy/S)²)`, followed by connectivity enforcement.
///
/// The algorithm is deterministic; `seed` is accepted so every segmenter shares
/// one calling convention.
pub fn slic_segment<T: Scalar>(
    image: &ImageTensor<T>,
    params: &SlicParams,
    _seed: u64,
) -> Result<SuperpixelMask> {
    params.validate()?;
    let (w, h) = (image.width(), image.height());
    if params.n_target > w * h {
        return Err(Error::TooManySuperpixels {
            requested: params.n_target,
            pixels: w * h,
        });
    }
    let (dims, color) = color_features(image);
    let step = ((w * h) as f64 / params.n_target as f64).sqrt();
    let (_, _, lattice) = slic_lattice(w, h, params.n_target);

    let grad = |x: usize, y: usize| -> f64 {
        let at = |xx: usize, yy: usize| &color[(yy * w + xx) * dims..(yy * w + xx + 1) * dims];
        let (xl, xr) = (x.saturating_sub(1), (x + 1).min(w - 1));
        let (yu, yd) = (y.saturating_sub(1), (y + 1).min(h - 1));
        let d = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum::<f64>();
        d(at(xr, y), at(xl, y)) + d(at(x, yd), at(x, yu))
    };

    // Centers: (x, y, color...)
    let mut centers: Vec<Vec<f64>> = lattice
        .iter()
        .map(|&(cx, cy)| {
            let (mut bx, mut by) = (
                (cx.round() as usize).min(w - 1),
                (cy.round() as usize).min(h - 1),
            );
            let mut best = grad(bx, by);
            let (x0, y0) = (bx, by);
            for yy in y0.saturating_sub(1)..=(y0 + 1).min(h - 1) {
                for xx in x0.saturating_sub(1)..=(x0 + 1).min(w - 1) {
                    let g = grad(xx, yy);
                    if g < best {
                        best = g;
                        bx = xx;
                        by = yy;
                    }
                }
            }
            let p = by * w + bx;
            let mut c = vec![bx as f64, by as f64];
            c.extend_from_slice(&color[p * dims..(p + 1) * dims]);
            c
        })
        .collect();

    let spatial_weight = (params.compactness / step).powi(2);
    let window = (2.0 * step).ceil() as isize;
    let mut labels = vec![u32::MAX; w * h];
    let mut dist = vec![f64::INFINITY; w * h];

    for _ in 0..params.max_iterations.max(1) {
        dist.iter_mut().for_each(|d| *d = f64::INFINITY);
        for (k, c) in centers.iter().enumerate() {
            let (cx, cy) = (c[0].round() as isize, c[1].round() as isize);
            let ys = (cy - window).max(0)..=(cy + window).min(h as isize - 1);
            for y in ys {
                let xs = (cx - window).max(0)..=(cx + window).min(w as isize - 1);
                for x in xs {
                    let p = y as usize * w + x as usize;
                    let dc: f64 = color[p * dims..(p + 1) * dims]
                        .iter()
                        .zip(&c[2..])
                        .map(|(a, b)| (a - b).powi(2))
                        .sum();
                    let ds = (x as f64 - c[0]).powi(2) + (y as f64 - c[1]).powi(2);
                    let d = dc + spatial_weight * ds;
                    if d < dist[p] {
                        dist[p] = d;
                        labels[p] = k as u32;
                    }
                }
            }
        }
        let mut sums = vec![vec![0.0; 2 + dims]; centers.len()];
        let mut counts = vec![0usize; centers.len()];
        for (p, &l) in labels.iter().enumerate() {
            if l == u32::MAX {
                continue;
            }
            let s = &mut sums[l as usize];
            s[0] += (p % w) as f64;
            s[1] += (p / w) as f64;
            for (acc, v) in s[2..].iter_mut().zip(&color[p * dims..(p + 1) * dims]) {
                *acc += v;
            }
            counts[l as usize] += 1;
        }
        let mut moved = 0.0f64;
        for ((c, s), &cnt) in centers.iter_mut().zip(&sums).zip(&counts) {
            if cnt == 0 {
                continue;
            }
            let next: Vec<f64> = s.iter().map(|v| v / cnt as f64).collect();
            moved = moved.max((next[0] - c[0]).abs() + (next[1] - c[1]).abs());
            *c = next;
        }
        if moved < 1e-3 {
            break;
        }
    }

    // Pixels outside every window (only possible on degenerate inputs) join the nearest center.
    for (p, l) in labels.iter_mut().enumerate() {
        if *l == u32::MAX {
            let (x, y) = ((p % w) as f64, (p / w) as f64);
            *l = centers
                .iter()
                .enumerate()
                .min_by(|a, b| {
                    let da = (a.1[0] - x).powi(2) + (a.1[1] - y).powi(2);
                    let db = (b.1[0] - x).powi(2) + (b.1[1] - y).powi(2);
                    da.partial_cmp(&db).expect("finite")
                })
                .map(|(k, _)| k as u32)
                .expect("at least one center");
        }
    }

    let min_size = ((w * h) as f64 / params.n_target as f64 / 4.0).floor() as usize;
    let merged = enforce_connectivity(w, h, &labels, min_size);
    SuperpixelMask::compacted(w, h, &merged)
}

/// Splits every label into 4-connected components and merges components
/// smaller than `min_size` into the neighbor sharing the longest boundary.
/// Returns component labels (not necessarily contiguous).
pub fn enforce_connectivity(width: usize, height: usize, labels: &[u32], min_size: usize) -> Vec<u32> {
    let n = width * height;
    let mut comp = vec![usize::MAX; n];
    let mut sizes = Vec::new();
    let mut stack = Vec::new();
    for start in 0..n {
        if comp[start] != usize::MAX {
            continue;
        }
        let id = sizes.len();
        let label = labels[start];
        comp[start] = id;
        stack.push(start);
        let mut size = 0;
        while let Some(p) = stack.pop() {
            size += 1;
            let (x, y) = (p % width, p / width);
            let mut visit = |q: usize| {
                if comp[q] == usize::MAX && labels[q] == label {
                    comp[q] = id;
                    stack.push(q);
                }
            };
            if x > 0 {
                visit(p - 1);
            }
            if x + 1 < width {
                visit(p + 1);
            }
            if y > 0 {
                visit(p - width);
            }
            if y + 1 < height {
                visit(p + width);
            }
        }
        sizes.push(size);
    }

    let k = sizes.len();
    let mut adjacency: Vec<HashMap<usize, usize>> = vec![HashMap::new(); k];
    for p in 0..n {
        let (x, y) = (p % width, p / width);
        let a = comp[p];
        let mut edge = |q: usize| {
            let b = comp[q];
            if a != b {
                *adjacency[a].entry(b).or_default() += 1;
                *adjacency[b].entry(a).or_default() += 1;
            }
        };
        if x + 1 < width {
            edge(p + 1);
        }
        if y + 1 < height {
            edge(p + width);
        }
    }

    let mut parent: Vec<usize> = (0..k).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }

    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by_key(|&c| (sizes[c], c));
    for c in order {
        if find(&mut parent, c) != c || sizes[c] >= min_size {
            continue;
        }
        // Resolve neighbors to current roots, summing shared edges.
        let mut shared: HashMap<usize, usize> = HashMap::new();
        for (&nb, &cnt) in &adjacency[c] {
            let r = find(&mut parent, nb);
            if r != c {
                *shared.entry(r).or_default() += cnt;
            }
        }
        let Some((&target, _)) = shared
            .iter()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
        else {
            continue;
        };
        parent[c] = target;
        sizes[target] += sizes[c];
        let moved = std::mem::take(&mut adjacency[c]);
        for (nb, cnt) in moved {
            *adjacency[target].entry(nb).or_default() += cnt;
        }
    }

    comp.iter().map(|&c| find(&mut parent, c) as u32).collect()
}

/// Loads an externally produced label mask (e.g. from a semantic segmenter).
/// Labels are compacted to `0..n`.
pub fn import_mask(path: &Path, expected: Option<(usize, usize)>) -> Result<SuperpixelMask> {
    let (w, h, raw) = io::read_mask_labels(path)?;
    if let Some((ew, eh)) = expected {
        if (ew, eh) != (w, h) {
            return Err(Error::DimensionMismatch {
                expected: format!("{ew}x{eh}"),
                actual: format!("{w}x{h}"),
            });
        }
    }
    SuperpixelMask::compacted(w, h, &raw)
}

/// Crops a raw label array and validates that every label of `0..n` survives.
pub fn crop_labels(
    width: usize,
    labels: &[u32],
    x0: usize,
    y0: usize,
    cw: usize,
    ch: usize,
) -> Result<SuperpixelMask> {
    let mut out = Vec::with_capacity(cw * ch);
    for y in y0..y0 + ch {
        out.extend_from_slice(&labels[y * width + x0..y * width + x0 + cw]);
    }
    SuperpixelMask::new(cw, ch, out)
}

/// Segmenter choice for a benchmark setup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Segmenter {
    Grid,
    Slic {
        #[serde(default = "default_compactness")]
        compactness: f64,
        #[serde(default = "default_iterations")]
        max_iterations: usize,
    },
    /// Masks named `<image_id>.png` inside `dir`.
    Import { dir: std::path::PathBuf },
}

fn default_compactness() -> f64 {
    1.0
}

fn default_iterations() -> usize {
    10
}

impl Segmenter {
    pub fn id(&self) -> String {
        match self {
            Segmenter::Grid => "grid".into(),
            Segmenter::Slic { compactness, .. } => format!("slic{compactness}"),
            Segmenter::Import { dir } => format!(
                "import:{}",
                dir.file_name().map_or_else(|| dir.display().to_string(), |d| d.to_string_lossy().into_owned())
            ),
        }
    }

    pub fn segment<T: Scalar>(
        &self,
        image: &ImageTensor<T>,
        image_id: &str,
        n_target: usize,
        seed: u64,
    ) -> Result<SuperpixelMask> {
        match self {
            Segmenter::Grid => grid_segment(image, n_target),
            Segmenter::Slic {
                compactness,
                max_iterations,
            } => slic_segment(
                image,
                &SlicParams {
                    n_target,
                    compactness: *compactness,
                    max_iterations: *max_iterations,
                },
                seed,
            ),
            Segmenter::Import { dir } => import_mask(
                &dir.join(format!("{image_id}.png")),
                Some((image.width(), image.height())),
            ),
        }
    }
}
