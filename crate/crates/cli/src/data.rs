//! Dataset construction: synthetic mixtures and image folders.

use crate::config::{mix_seed, DatasetSpec};
use distillkit::dataset::LabeledDataset;
use distillkit::error::{DistillError, Result};
use distillkit::rng::{derive_rng, standard_normal_vec};
use image::imageops::FilterType;
use rand::Rng;
use std::path::Path;

/// Ground truth of one synthetic class: equal-weight isotropic modes.
#[derive(Debug, Clone)]
pub struct ClassMixture {
    pub means: Vec<Vec<f64>>,
    pub sigma: f64,
}

impl ClassMixture {
    pub fn sample(&self, rng: &mut impl Rng) -> Vec<f64> {
        let k = rng.gen_range(0..self.means.len());
        let noise = standard_normal_vec(rng, self.means[k].len());
        self.means[k]
            .iter()
            .zip(&noise)
            .map(|(m, n)| m + self.sigma * n)
            .collect()
    }

    /// Index of the nearest mode, for mode-coverage diagnostics.
    pub fn nearest_mode(&self, point: &[f64]) -> usize {
        let mut best = (0usize, f64::INFINITY);
        for (k, m) in self.means.iter().enumerate() {
            let d: f64 = m.iter().zip(point).map(|(a, b)| (a - b) * (a - b)).sum();
            if d < best.1 {
                best = (k, d);
            }
        }
        best.0
    }
}

/// Mode layout for each class: a ring of `modes_per_class` modes of radius
/// `mode_spread` around the class center; class centers sit on a ring of
/// radius `class_radius` (or at the origin for a single class).
pub fn class_mixtures(spec: &DatasetSpec) -> Result<Vec<ClassMixture>> {
    let DatasetSpec::Synthetic {
        classes,
        modes_per_class,
        class_radius,
        mode_spread,
        noise_sigma,
        ..
    } = spec
    else {
        return Err(DistillError::invalid("not a synthetic dataset spec"));
    };
    let mut out = Vec::with_capacity(*classes);
    for c in 0..*classes {
        let center = if *classes == 1 {
            [0.0, 0.0]
        } else {
            let angle = 2.0 * std::f64::consts::PI * c as f64 / *classes as f64;
            [class_radius * angle.cos(), class_radius * angle.sin()]
        };
        let means = (0..*modes_per_class)
            .map(|k| {
                if *modes_per_class == 1 {
                    vec![center[0], center[1]]
                } else {
                    let angle = 2.0 * std::f64::consts::PI * k as f64 / *modes_per_class as f64;
                    vec![
                        center[0] + mode_spread * angle.cos(),
                        center[1] + mode_spread * angle.sin(),
                    ]
                }
            })
            .collect();
        out.push(ClassMixture {
            means,
            sigma: *noise_sigma,
        });
    }
    Ok(out)
}

/// Seed-deterministic synthetic draws; per-class RNG streams.
pub fn make_synthetic_dataset(
    spec: &DatasetSpec,
    n_per_class: usize,
    seed: u64,
) -> Result<(LabeledDataset, Vec<ClassMixture>)> {
    if n_per_class == 0 {
        return Err(DistillError::invalid("n_per_class must be positive"));
    }
    let mixtures = class_mixtures(spec)?;
    let mut features = Vec::with_capacity(mixtures.len() * n_per_class);
    let mut labels = Vec::with_capacity(mixtures.len() * n_per_class);
    for (c, mixture) in mixtures.iter().enumerate() {
        let mut rng = derive_rng(mix_seed(&[seed, c as u64]), 0);
        for _ in 0..n_per_class {
            features.push(mixture.sample(&mut rng));
            labels.push(c);
        }
    }
    let ds = LabeledDataset::new(features, labels, mixtures.len())?;
    Ok((ds, mixtures))
}

/// Loads a directory of class subdirectories. Class order and file order
/// are lexicographic, so a reshuffled file system lists identically.
/// Pixels are scaled to [-1, 1], channel-major.
pub fn load_image_folder(
    path: &Path,
    resolution: usize,
    channels: usize,
) -> Result<(LabeledDataset, Vec<String>)> {
    let mut class_dirs: Vec<_> = std::fs::read_dir(path)
        .map_err(|e| DistillError::invalid(format!("cannot list {}: {e}", path.display())))?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_dir())
        .map(|e| e.path())
        .collect();
    class_dirs.sort();
    if class_dirs.is_empty() {
        return Err(DistillError::invalid(format!(
            "no class subdirectories under {}",
            path.display()
        )));
    }
    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut class_names = Vec::new();
    for (label, dir) in class_dirs.iter().enumerate() {
        let class_name = dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let mut files: Vec<_> = std::fs::read_dir(dir)
            .map_err(|e| DistillError::invalid(format!("cannot list {}: {e}", dir.display())))?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| {
                p.extension()
                    .and_then(|e| e.to_str())
                    .map(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "jpg" | "jpeg"))
                    .unwrap_or(false)
            })
            .collect();
        files.sort();
        if files.is_empty() {
            return Err(DistillError::invalid(format!(
                "ingestion error: class directory {class_name} is empty"
            )));
        }
        for file in files {
            let img = image::open(&file).map_err(|e| {
                DistillError::invalid(format!("ingestion error reading {}: {e}", file.display()))
            })?;
            let resized = img.resize_exact(resolution as u32, resolution as u32, FilterType::Triangle);
            let mut buf = Vec::with_capacity(channels * resolution * resolution);
            match channels {
                1 => {
                    let gray = resized.to_luma8();
                    for p in gray.pixels() {
                        buf.push(p.0[0] as f64 / 127.5 - 1.0);
                    }
                }
                3 => {
                    let rgb = resized.to_rgb8();
                    for c in 0..3 {
                        for p in rgb.pixels() {
                            buf.push(p.0[c] as f64 / 127.5 - 1.0);
                        }
                    }
                }
                other => {
                    return Err(DistillError::invalid(format!(
                        "unsupported channel count {other}"
                    )))
                }
            }
            features.push(buf);
            labels.push(label);
        }
        class_names.push(class_name);
    }
    let class_count = class_names.len();
    Ok((LabeledDataset::new(features, labels, class_count)?, class_names))
}
