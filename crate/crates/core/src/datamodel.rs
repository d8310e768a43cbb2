//! Core value types shared by every other module.
//!
//! All types validate their invariants at construction and are immutable
//! afterwards; they can be shared freely across threads for reading.
//! Index order is (y, x, band), row-major, everywhere in the crate.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// H x W x B cube of spectral responses, stored row-major as
/// `values[(y * width + x) * bands + band]`.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperCube {
    height: usize,
    width: usize,
    bands: usize,
    values: Vec<f64>,
}

impl HyperCube {
    pub fn new(height: usize, width: usize, bands: usize, values: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || bands == 0 {
            return Err(Error::InvalidData(format!(
                "cube dimensions must be positive, got {height}x{width}x{bands}"
            )));
        }
        let expected = height
            .checked_mul(width)
            .and_then(|p| p.checked_mul(bands))
            .ok_or_else(|| Error::InvalidData("cube dimensions overflow".into()))?;
        if values.len() != expected {
            return Err(Error::InvalidData(format!(
                "cube payload length {} does not match {height}x{width}x{bands} = {expected}",
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!(
                "cube contains non-finite value {bad}"
            )));
        }
        Ok(HyperCube {
            height,
            width,
            bands,
            values,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, band: usize) -> f64 {
        debug_assert!(y < self.height && x < self.width && band < self.bands);
        self.values[(y * self.width + x) * self.bands + band]
    }

    /// Copy of the B band values at a pixel. Signed indices so caller
    /// bugs like (-1, 0) surface as errors rather than wrapping.
    pub fn spectrum_at(&self, y: i64, x: i64) -> Result<Vec<f64>> {
        if y < 0 || x < 0 || y as usize >= self.height || x as usize >= self.width {
            return Err(Error::OutOfBounds {
                y,
                x,
                height: self.height,
                width: self.width,
            });
        }
        let (y, x) = (y as usize, x as usize);
        let start = (y * self.width + x) * self.bands;
        Ok(self.values[start..start + self.bands].to_vec())
    }
}

/// Per-pixel class labels. 0 means unlabeled background; class ids form
/// a contiguous range 1..=C with every class present at least once.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMap {
    height: usize,
    width: usize,
    classes: u16,
    labels: Vec<u16>,
}

impl LabelMap {
    pub fn new(height: usize, width: usize, labels: Vec<u16>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidData(format!(
                "label map dimensions must be positive, got {height}x{width}"
            )));
        }
        if labels.len() != height * width {
            return Err(Error::InvalidData(format!(
                "label payload length {} does not match {height}x{width}",
                labels.len()
            )));
        }
        let max = labels.iter().copied().max().unwrap_or(0);
        if max > 0 {
            let mut present = vec![false; max as usize + 1];
            for &l in &labels {
                present[l as usize] = true;
            }
            if let Some(missing) = (1..=max).find(|&c| !present[c as usize]) {
                return Err(Error::InvalidData(format!(
                    "class ids not contiguous: class {missing} absent but max id is {max}"
                )));
            }
        }
        Ok(LabelMap {
            height,
            width,
            classes: max,
            labels,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Number of classes C (labels run 1..=C).
    pub fn classes(&self) -> u16 {
        self.classes
    }

    pub fn labels(&self) -> &[u16] {
        &self.labels
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> u16 {
        self.labels[y * self.width + x]
    }

    /// Count of labeled pixels per class; classes only, never the
    /// 0 background.
    pub fn class_counts(&self) -> BTreeMap<u16, usize> {
        let mut counts = BTreeMap::new();
        for &l in &self.labels {
            if l > 0 {
                *counts.entry(l).or_insert(0) += 1;
            }
        }
        counts
    }

    /// Scanline-ordered coordinates of the pixels of one class.
    pub fn pixels_of_class(&self, class_id: u16) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(y, x) == class_id {
                    out.push((y, x));
                }
            }
        }
        out
    }
}

/// Per-pixel train/test/excluded designation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitState {
    Excluded,
    Train,
    Test,
}

/// Output of a sampling strategy. Train and Test occur only at labeled
/// pixels; every unlabeled pixel is Excluded. Carries the RNG seed the
/// split was drawn with for reproducibility.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitMask {
    height: usize,
    width: usize,
    states: Vec<SplitState>,
    rng_seed: u64,
}

impl SplitMask {
    /// Validates against the label map it was drawn from.
    pub fn new(labels: &LabelMap, states: Vec<SplitState>, rng_seed: u64) -> Result<Self> {
        if states.len() != labels.height() * labels.width() {
            return Err(Error::DimensionMismatch(format!(
                "split has {} states for a {}x{} map",
                states.len(),
                labels.height(),
                labels.width()
            )));
        }
        for (i, &s) in states.iter().enumerate() {
            let labeled = labels.labels()[i] > 0;
            if s != SplitState::Excluded && !labeled {
                return Err(Error::InvalidData(format!(
                    "pixel {i} is unlabeled but marked {s:?}"
                )));
            }
        }
        Ok(SplitMask {
            height: labels.height(),
            width: labels.width(),
            states,
            rng_seed,
        })
    }

    /// Construct without a label map; every non-Excluded pixel is
    /// trusted to be labeled. Used by the file reader, which re-checks
    /// against labels when both are present.
    pub fn from_states(
        height: usize,
        width: usize,
        states: Vec<SplitState>,
        rng_seed: u64,
    ) -> Result<Self> {
        if height == 0 || width == 0 || states.len() != height * width {
            return Err(Error::DimensionMismatch(format!(
                "split payload length {} does not match {height}x{width}",
                states.len()
            )));
        }
        Ok(SplitMask {
            height,
            width,
            states,
            rng_seed,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn rng_seed(&self) -> u64 {
        self.rng_seed
    }

    pub fn states(&self) -> &[SplitState] {
        &self.states
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> SplitState {
        self.states[y * self.width + x]
    }

    pub fn pixels_in_state(&self, state: SplitState) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(y, x) == state {
                    out.push((y, x));
                }
            }
        }
        out
    }
}

/// Per-pixel feature vectors of uniform dimension, decoupled from how
/// they were extracted. `coords[i]` is the (y, x) provenance of row i.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    count: usize,
    dim: usize,
    vectors: Vec<f64>,
    coords: Vec<(usize, usize)>,
}

impl FeatureSet {
    pub fn new(dim: usize, vectors: Vec<f64>, coords: Vec<(usize, usize)>) -> Result<Self> {
        let count = coords.len();
        if dim == 0 {
            return Err(Error::InvalidData("feature dimension must be >= 1".into()));
        }
        if vectors.len() != count * dim {
            return Err(Error::InvalidData(format!(
                "feature payload length {} does not match {count} rows x dim {dim}",
                vectors.len()
            )));
        }
        if let Some(bad) = vectors.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!(
                "feature set contains non-finite value {bad}"
            )));
        }
        let mut seen = std::collections::HashSet::with_capacity(count);
        for &c in &coords {
            if !seen.insert(c) {
                return Err(Error::InvalidData(format!("duplicate coordinate {c:?}")));
            }
        }
        Ok(FeatureSet {
            count,
            dim,
            vectors,
            coords,
        })
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coords(&self) -> &[(usize, usize)] {
        &self.coords
    }

    pub fn vectors(&self) -> &[f64] {
        &self.vectors
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.vectors[i * self.dim..(i + 1) * self.dim]
    }

    /// Rows whose coordinates fall in the given split state, with the
    /// matching class labels. Row order follows this set's row order.
    pub fn select_by_state(
        &self,
        split: &SplitMask,
        labels: &LabelMap,
        state: SplitState,
    ) -> Result<(FeatureSet, Vec<u16>)> {
        if split.height() != labels.height() || split.width() != labels.width() {
            return Err(Error::DimensionMismatch(
                "split and label map dimensions differ".into(),
            ));
        }
        let mut vectors = Vec::new();
        let mut coords = Vec::new();
        let mut classes = Vec::new();
        for i in 0..self.count {
            let (y, x) = self.coords[i];
            if split.get(y, x) == state {
                vectors.extend_from_slice(self.row(i));
                coords.push((y, x));
                classes.push(labels.get(y, x));
            }
        }
        if coords.is_empty() {
            return Err(Error::InvalidData(format!(
                "no feature rows in state {state:?}"
            )));
        }
        Ok((FeatureSet::new(self.dim, vectors, coords)?, classes))
    }
}

/// C x C prediction-vs-truth counts; rows are truth, columns prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn zeros(classes: usize) -> Result<Self> {
        if classes == 0 {
            return Err(Error::InvalidData(
                "confusion matrix needs at least one class".into(),
            ));
        }
        Ok(ConfusionMatrix {
            classes,
            counts: vec![0; classes * classes],
        })
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    #[inline]
    pub fn get(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth * self.classes + pred]
    }

    pub fn increment(&mut self, truth: usize, pred: usize) {
        self.counts[truth * self.classes + pred] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn row_total(&self, truth: usize) -> u64 {
        (0..self.classes).map(|p| self.get(truth, p)).sum()
    }

    pub fn col_total(&self, pred: usize) -> u64 {
        (0..self.classes).map(|t| self.get(t, pred)).sum()
    }
}
