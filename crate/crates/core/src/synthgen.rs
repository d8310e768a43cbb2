//! Deterministic synthetic hyperspectral scene generator.
//!
//! Real benchmark scenes have classes that occupy continuous spatial
//! regions; the generator reproduces that property with two layout
//! families: irregular Voronoi blobs and exactly enumerable grid
//! blocks. Pixel spectra are class mean signatures plus i.i.d.
//! Gaussian noise. Identical config (including seed) gives
//! bit-identical output.

use crate::datamodel::{HyperCube, LabelMap};
use crate::error::{Error, Result};
use crate::rng::{derive_stream, CounterRng};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Layout {
    /// Each class seeds `seeds_per_class` Voronoi sites; pixels take
    /// the class of the nearest site.
    VoronoiBlobs { seeds_per_class: usize },
    /// Axis-aligned blocks of the given side. Block (by, bx) gets
    /// class (2*(by%2) + bx%2 + 4*(by/2 + bx/2)) mod C + 1: with C = 4
    /// no two 8-adjacent blocks share a class, so every block is its
    /// own connected partition; with C = 2 the pattern degenerates to
    /// vertical stripes of width `block`.
    GridBlocks { block: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneConfig {
    pub height: usize,
    pub width: usize,
    pub bands: usize,
    pub classes: u16,
    pub layout: Layout,
    /// Minimum pairwise L2 distance between class mean spectra.
    pub signature_separation: f64,
    /// Per-band additive Gaussian noise standard deviation.
    pub noise_sigma: f64,
    pub rng_seed: u64,
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        if self.height == 0 || self.width == 0 || self.bands == 0 {
            return Err(Error::InvalidConfig("scene dimensions must be >= 1".into()));
        }
        if self.classes < 2 {
            return Err(Error::InvalidConfig("scene needs >= 2 classes".into()));
        }
        if self.noise_sigma < 0.0 || !self.noise_sigma.is_finite() {
            return Err(Error::InvalidConfig("noise_sigma must be >= 0".into()));
        }
        if self.signature_separation <= 0.0 || !self.signature_separation.is_finite() {
            return Err(Error::InvalidConfig(
                "signature_separation must be > 0".into(),
            ));
        }
        match self.layout {
            Layout::GridBlocks { block } => {
                if block == 0 || block > self.height || block > self.width {
                    return Err(Error::InvalidConfig(format!(
                        "block size {block} does not fit a {}x{} image",
                        self.height, self.width
                    )));
                }
            }
            Layout::VoronoiBlobs { seeds_per_class } => {
                if seeds_per_class == 0 {
                    return Err(Error::InvalidConfig("seeds_per_class must be >= 1".into()));
                }
                let sites = seeds_per_class * self.classes as usize;
                if sites > self.height * self.width {
                    return Err(Error::InvalidConfig(format!(
                        "{sites} voronoi sites exceed {} pixels",
                        self.height * self.width
                    )));
                }
            }
        }
        Ok(())
    }
}

const SIGNATURE_RETRIES: usize = 100;

/// Class mean spectra: uniform draws in [0,1]^B rescaled so the minimum
/// pairwise L2 distance meets `signature_separation`. Deterministic in
/// the config seed.
pub fn class_signatures(config: &SceneConfig) -> Result<Vec<Vec<f64>>> {
    config.validate()?;
    let c = config.classes as usize;
    let b = config.bands;
    let mut rng = CounterRng::new(derive_stream(config.rng_seed, 0));
    for _ in 0..SIGNATURE_RETRIES {
        let sigs: Vec<Vec<f64>> = (0..c)
            .map(|_| (0..b).map(|_| rng.next_f64()).collect())
            .collect();
        let mut min_dist = f64::INFINITY;
        for i in 0..c {
            for j in (i + 1)..c {
                let d: f64 = sigs[i]
                    .iter()
                    .zip(&sigs[j])
                    .map(|(a, v)| (a - v) * (a - v))
                    .sum::<f64>()
                    .sqrt();
                min_dist = min_dist.min(d);
            }
        }
        if min_dist <= 0.0 {
            continue; // coincident draw, retry
        }
        let scale = if min_dist < config.signature_separation {
            config.signature_separation / min_dist
        } else {
            1.0
        };
        if !scale.is_finite() {
            continue;
        }
        return Ok(sigs
            .into_iter()
            .map(|s| s.into_iter().map(|v| v * scale).collect())
            .collect());
    }
    Err(Error::InvalidConfig(format!(
        "could not meet signature separation {} with {} bands after {SIGNATURE_RETRIES} attempts",
        config.signature_separation, config.bands
    )))
}

fn layout_labels(config: &SceneConfig, rng: &mut CounterRng) -> Vec<u16> {
    let (h, w) = (config.height, config.width);
    let c = config.classes as usize;
    match config.layout {
        Layout::GridBlocks { block } => {
            let mut labels = vec![0u16; h * w];
            for y in 0..h {
                for x in 0..w {
                    let (by, bx) = (y / block, x / block);
                    let cls = 2 * (by % 2) + bx % 2 + 4 * (by / 2 + bx / 2);
                    labels[y * w + x] = (cls % c) as u16 + 1;
                }
            }
            labels
        }
        Layout::VoronoiBlobs { seeds_per_class } => {
            // sites interleave classes: site i belongs to class i % C
            let n_sites = seeds_per_class * c;
            let sites: Vec<(usize, usize, u16)> = (0..n_sites)
                .map(|i| {
                    (
                        rng.next_below(h),
                        rng.next_below(w),
                        (i % c) as u16 + 1,
                    )
                })
                .collect();
            let mut labels = vec![0u16; h * w];
            for y in 0..h {
                for x in 0..w {
                    let mut best = (u64::MAX, 0u16);
                    for &(sy, sx, cls) in &sites {
                        let dy = y as i64 - sy as i64;
                        let dx = x as i64 - sx as i64;
                        let d = (dy * dy + dx * dx) as u64;
                        if d < best.0 {
                            best = (d, cls);
                        }
                    }
                    labels[y * w + x] = best.1;
                }
            }
            labels
        }
    }
}

/// Generate a labeled scene. Every pixel is labeled; a pixel's spectrum
/// is its class signature plus Gaussian noise, quantized to f32 so the
/// cube round-trips the binary file format exactly.
pub fn generate_scene(config: &SceneConfig) -> Result<(HyperCube, LabelMap)> {
    config.validate()?;
    let sigs = class_signatures(config)?;
    let mut layout_rng = CounterRng::new(derive_stream(config.rng_seed, 1));
    let labels = layout_labels(config, &mut layout_rng);

    // Voronoi layouts can drop a class entirely when its sites are all
    // shadowed; LabelMap construction rejects that, which we surface as
    // a config error.
    let present: std::collections::HashSet<u16> = labels.iter().copied().collect();
    if (1..=config.classes).any(|c| !present.contains(&c)) {
        return Err(Error::InvalidConfig(
            "layout produced an empty class; use more seeds per class or a larger image".into(),
        ));
    }

    let mut noise_rng = CounterRng::new(derive_stream(config.rng_seed, 2));
    let (h, w, b) = (config.height, config.width, config.bands);
    let mut values = Vec::with_capacity(h * w * b);
    for &label in labels.iter() {
        let sig = &sigs[label as usize - 1];
        for &s in sig.iter() {
            let v = s + config.noise_sigma * noise_rng.next_gaussian();
            values.push(v as f32 as f64);
        }
    }
    let cube = HyperCube::new(h, w, b, values)?;
    let map = LabelMap::new(h, w, labels)?;
    Ok((cube, map))
}
