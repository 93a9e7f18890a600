//! Image sets for a run: the synthetic suite or a directory of PNGs.

use std::path::Path;
use std::sync::Arc;

use rand::Rng;

use crate::domain::ImageTensor;
use crate::error::{Error, Result};
use crate::io::read_image;
use crate::rng;
use crate::scalar::Scalar;

use super::config::ImageSource;

/// Smooth random color image: a background gradient plus a few Gaussian blobs.
pub fn synthetic_image(width: usize, height: usize, master_seed: u64, key: &str) -> ImageTensor<f64> {
    let mut s = rng::stream(master_seed, &[rng::hash_str("synthetic"), rng::hash_str(key)]);
    let corner: Vec<[f64; 3]> = (0..2).map(|_| [s.random(), s.random(), s.random()]).collect();
    let blobs: Vec<(f64, f64, f64, [f64; 3])> = (0..6)
        .map(|_| {
            (
                s.random::<f64>() * width as f64,
                s.random::<f64>() * height as f64,
                (0.1 + 0.25 * s.random::<f64>()) * width.max(height) as f64,
                [s.random::<f64>() - 0.5, s.random::<f64>() - 0.5, s.random::<f64>() - 0.5],
            )
        })
        .collect();
    ImageTensor::from_fn(width, height, 3, |x, y, c| {
        let t = (x + y) as f64 / (width + height - 2).max(1) as f64;
        let mut v = corner[0][c] * (1.0 - t) + corner[1][c] * t;
        for (bx, by, r, color) in &blobs {
            let d2 = (x as f64 - bx).powi(2) + (y as f64 - by).powi(2);
            v += color[c] * (-d2 / (2.0 * r * r)).exp();
        }
        v.clamp(0.02, 0.98)
    })
    .expect("values are clamped into range")
}

pub struct Dataset<T> {
    pub ids: Vec<String>,
    pub images: Vec<Arc<ImageTensor<T>>>,
    pub pool: Option<Arc<Vec<ImageTensor<T>>>>,
    /// Mean color over the benchmark images.
    pub channel_means: Vec<f64>,
}

fn png_files(dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("png")))
        .collect();
    files.sort();
    Ok(files)
}

fn stem(p: &Path) -> String {
    p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

impl<T: Scalar> Dataset<T> {
    pub fn load(source: &ImageSource, master_seed: u64) -> Result<Self> {
        let (ids, images, pool) = match source {
            ImageSource::Synthetic {
                count,
                width,
                height,
                pool_size,
            } => {
                let ids: Vec<String> = (0..*count).map(|i| format!("synthetic_{i:03}")).collect();
                let images = ids
                    .iter()
                    .map(|id| Arc::new(synthetic_image(*width, *height, master_seed, id).cast::<T>()))
                    .collect();
                let pool: Vec<ImageTensor<T>> = (0..*pool_size)
                    .map(|i| synthetic_image(*width, *height, master_seed, &format!("pool_{i:03}")).cast())
                    .collect();
                (ids, images, (!pool.is_empty()).then(|| Arc::new(pool)))
            }
            ImageSource::Directory { path, limit, pool_dir } => {
                let mut files = png_files(path)?;
                if let Some(l) = limit {
                    files.truncate(*l);
                }
                if files.is_empty() {
                    return Err(Error::Config(format!("no PNG images in {}", path.display())));
                }
                let images = files
                    .iter()
                    .map(|f| read_image(f).map(Arc::new))
                    .collect::<Result<Vec<_>>>()?;
                let pool = match pool_dir {
                    Some(dir) => Some(Arc::new(
                        png_files(dir)?.iter().map(|f| read_image(f)).collect::<Result<Vec<_>>>()?,
                    )),
                    None => None,
                };
                (files.iter().map(|f| stem(f)).collect(), images, pool)
            }
        };
        let channels = images[0].channels();
        if images.iter().any(|i| i.channels() != channels) {
            return Err(Error::InvalidImage("images mix grayscale and color".into()));
        }
        let mut channel_means = vec![0.0; channels];
        for img in &images {
            for (m, v) in channel_means.iter_mut().zip(img.channel_means()) {
                *m += v.as_f64() / images.len() as f64;
            }
        }
        Ok(Self {
            ids,
            images,
            pool,
            channel_means,
        })
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }
}
