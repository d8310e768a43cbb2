//! Per-pixel feature extractors: raw spectra, spatial coordinates,
//! undecimated 3D wavelet packets, and extended morphological profiles.

use crate::datamodel::{FeatureSet, HyperCube, LabelMap};
use crate::error::{Error, Result};
use crate::filters::{mean_filter, WindowSpec};

/// Scanline-ordered coordinates of all labeled pixels.
pub fn labeled_pixels(labels: &LabelMap) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for y in 0..labels.height() {
        for x in 0..labels.width() {
            if labels.get(y, x) > 0 {
                out.push((y, x));
            }
        }
    }
    out
}

/// All pixel coordinates in scanline order.
pub fn all_pixels(height: usize, width: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(height * width);
    for y in 0..height {
        for x in 0..width {
            out.push((y, x));
        }
    }
    out
}

fn check_selection(cube: &HyperCube, selection: &[(usize, usize)]) -> Result<()> {
    if selection.is_empty() {
        return Err(Error::InvalidData("empty pixel selection".into()));
    }
    for &(y, x) in selection {
        if y >= cube.height() || x >= cube.width() {
            return Err(Error::OutOfBounds {
                y: y as i64,
                x: x as i64,
                height: cube.height(),
                width: cube.width(),
            });
        }
    }
    Ok(())
}

/// D = B; each row is the pixel's spectrum copied from the cube.
pub fn raw_spectral(cube: &HyperCube, selection: &[(usize, usize)]) -> Result<FeatureSet> {
    check_selection(cube, selection)?;
    let b = cube.bands();
    let mut vectors = Vec::with_capacity(selection.len() * b);
    for &(y, x) in selection {
        for band in 0..b {
            vectors.push(cube.get(y, x, band));
        }
    }
    FeatureSet::new(b, vectors, selection.to_vec())
}

/// D = 2; rows are (y, x) normalized to [0, 1] by the image extent.
/// No spectral information at all.
pub fn spatial_coords(cube: &HyperCube, selection: &[(usize, usize)]) -> Result<FeatureSet> {
    check_selection(cube, selection)?;
    let norm = |i: usize, n: usize| {
        if n <= 1 {
            0.0
        } else {
            i as f64 / (n - 1) as f64
        }
    };
    let mut vectors = Vec::with_capacity(selection.len() * 2);
    for &(y, x) in selection {
        vectors.push(norm(y, cube.height()));
        vectors.push(norm(x, cube.width()));
    }
    FeatureSet::new(2, vectors, selection.to_vec())
}

// ---------------------------------------------------------------------------
// Undecimated 3D wavelet packet features
// ---------------------------------------------------------------------------

pub const DWT_LEVELS: usize = 3;
/// Wavelet packet tree nodes per axis: root + 2 + 4 + 8.
pub const DWT_NODES_PER_AXIS: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DwtAxis {
    X,
    Y,
    Lambda,
}

/// Haar pair on one axis, undecimated with edge replication: for each
/// sample i, low(i) = (s(i) + s(i+1)) / 2 and high(i) = (s(i) - s(i+1))
/// / 2, where s(i+1) replicates the last sample past the end. The
/// (average, half-difference) normalization makes constants fixed
/// points and gives the exact reconstruction low(i) + high(i) = s(i).
fn haar_pair(values: &[f64], dims: (usize, usize, usize), axis: DwtAxis) -> (Vec<f64>, Vec<f64>) {
    let (h, w, b) = dims;
    let mut low = vec![0.0; values.len()];
    let mut high = vec![0.0; values.len()];
    let idx = |y: usize, x: usize, band: usize| (y * w + x) * b + band;
    for y in 0..h {
        for x in 0..w {
            for band in 0..b {
                let i = idx(y, x, band);
                let next = match axis {
                    DwtAxis::X => idx(y, (x + 1).min(w - 1), band),
                    DwtAxis::Y => idx((y + 1).min(h - 1), x, band),
                    DwtAxis::Lambda => idx(y, x, (band + 1).min(b - 1)),
                };
                low[i] = (values[i] + values[next]) / 2.0;
                high[i] = (values[i] - values[next]) / 2.0;
            }
        }
    }
    (low, high)
}

/// The 15 wavelet-packet tree nodes (root plus 14 descendants of a
/// 3-level decomposition, breadth-first) along the given axis, each
/// smoothed by a 3x3 spatial mean filter. Every node keeps the cube's
/// dimensions.
pub fn dwt_subcubes(cube: &HyperCube, axis: DwtAxis) -> Result<Vec<HyperCube>> {
    check_dwt_size(cube)?;
    let dims = (cube.height(), cube.width(), cube.bands());
    let mut nodes: Vec<Vec<f64>> = vec![cube.values().to_vec()];
    let mut level_start = 0usize;
    for _ in 0..DWT_LEVELS {
        let level_end = nodes.len();
        for i in level_start..level_end {
            let (low, high) = haar_pair(&nodes[i], dims, axis);
            nodes.push(low);
            nodes.push(high);
        }
        level_start = level_end;
    }
    debug_assert_eq!(nodes.len(), DWT_NODES_PER_AXIS);
    nodes
        .into_iter()
        .map(|v| {
            let c = HyperCube::new(dims.0, dims.1, dims.2, v)?;
            mean_filter(&c, WindowSpec::square(3))
        })
        .collect()
}

fn check_dwt_size(cube: &HyperCube) -> Result<()> {
    let min = 1 << DWT_LEVELS;
    if cube.height() < min || cube.width() < min || cube.bands() < min {
        return Err(Error::InvalidData(format!(
            "wavelet features need height, width and bands all >= {min}, got {}x{}x{}",
            cube.height(),
            cube.width(),
            cube.bands()
        )));
    }
    Ok(())
}

/// 3D-DWT feature: concatenation, over the x, y and spectral axes, of
/// the pixel's B values in each of the 15 smoothed packet nodes.
/// D = 45 * B.
pub fn dwt3d_features(cube: &HyperCube, selection: &[(usize, usize)]) -> Result<FeatureSet> {
    check_selection(cube, selection)?;
    check_dwt_size(cube)?;
    let b = cube.bands();
    let axes = [DwtAxis::X, DwtAxis::Y, DwtAxis::Lambda];
    let mut subcubes = Vec::with_capacity(3 * DWT_NODES_PER_AXIS);
    for axis in axes {
        subcubes.extend(dwt_subcubes(cube, axis)?);
    }
    let dim = subcubes.len() * b;
    let mut vectors = Vec::with_capacity(selection.len() * dim);
    for &(y, x) in selection {
        for sc in &subcubes {
            for band in 0..b {
                vectors.push(sc.get(y, x, band));
            }
        }
    }
    FeatureSet::new(dim, vectors, selection.to_vec())
}

// ---------------------------------------------------------------------------
// PCA
// ---------------------------------------------------------------------------

/// Project onto the top-m principal components of the B x B spectral
/// covariance over all pixels. Scores are mean-centered; each
/// component's sign is fixed so its largest-magnitude loading is
/// positive. Errors when m exceeds the covariance rank.
pub fn pca_project(cube: &HyperCube, m: usize) -> Result<HyperCube> {
    let b = cube.bands();
    let n = cube.height() * cube.width();
    if m == 0 || m > b {
        return Err(Error::InvalidConfig(format!(
            "component count {m} outside 1..={b}"
        )));
    }
    if n < 2 {
        return Err(Error::InvalidData("pca needs at least 2 pixels".into()));
    }
    let mut mean = vec![0.0f64; b];
    for y in 0..cube.height() {
        for x in 0..cube.width() {
            for (band, m) in mean.iter_mut().enumerate() {
                *m += cube.get(y, x, band);
            }
        }
    }
    for v in &mut mean {
        *v /= n as f64;
    }
    let mut cov = nalgebra::DMatrix::<f64>::zeros(b, b);
    for y in 0..cube.height() {
        for x in 0..cube.width() {
            for i in 0..b {
                let di = cube.get(y, x, i) - mean[i];
                for j in i..b {
                    cov[(i, j)] += di * (cube.get(y, x, j) - mean[j]);
                }
            }
        }
    }
    for i in 0..b {
        for j in i..b {
            cov[(i, j)] /= (n - 1) as f64;
            cov[(j, i)] = cov[(i, j)];
        }
    }
    let eig = nalgebra::SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..b).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .partial_cmp(&eig.eigenvalues[i])
            .unwrap()
            .then(i.cmp(&j))
    });
    let max_eig = eig.eigenvalues[order[0]].max(0.0);
    let rank = order
        .iter()
        .filter(|&&i| eig.eigenvalues[i] > 1e-9 * max_eig && eig.eigenvalues[i] > 0.0)
        .count();
    if m > rank {
        return Err(Error::InvalidData(format!(
            "requested {m} components but spectral covariance rank is {rank}"
        )));
    }
    // sign convention: largest-magnitude loading positive
    let mut components: Vec<Vec<f64>> = Vec::with_capacity(m);
    for &k in order.iter().take(m) {
        let col = eig.eigenvectors.column(k);
        let mut best = 0usize;
        for i in 1..b {
            if col[i].abs() > col[best].abs() {
                best = i;
            }
        }
        let sign = if col[best] < 0.0 { -1.0 } else { 1.0 };
        components.push((0..b).map(|i| sign * col[i]).collect());
    }
    let mut values = Vec::with_capacity(n * m);
    for y in 0..cube.height() {
        for x in 0..cube.width() {
            for comp in &components {
                let mut s = 0.0;
                for band in 0..b {
                    s += (cube.get(y, x, band) - mean[band]) * comp[band];
                }
                values.push(s);
            }
        }
    }
    HyperCube::new(cube.height(), cube.width(), m, values)
}

/// Eigenvalues of the spectral covariance, descending. Exposed for
/// variance-accounting checks.
pub fn spectral_eigenvalues(cube: &HyperCube) -> Result<Vec<f64>> {
    let b = cube.bands();
    let n = cube.height() * cube.width();
    if n < 2 {
        return Err(Error::InvalidData("pca needs at least 2 pixels".into()));
    }
    let mut mean = vec![0.0f64; b];
    for v in cube.values().chunks(b) {
        for (m, x) in mean.iter_mut().zip(v) {
            *m += x;
        }
    }
    for v in &mut mean {
        *v /= n as f64;
    }
    let mut cov = nalgebra::DMatrix::<f64>::zeros(b, b);
    for v in cube.values().chunks(b) {
        for i in 0..b {
            for j in 0..b {
                cov[(i, j)] += (v[i] - mean[i]) * (v[j] - mean[j]) / (n - 1) as f64;
            }
        }
    }
    let mut eigs: Vec<f64> = nalgebra::SymmetricEigen::new(cov)
        .eigenvalues
        .iter()
        .copied()
        .collect();
    eigs.sort_by(|a, b| b.partial_cmp(a).unwrap());
    Ok(eigs)
}

// ---------------------------------------------------------------------------
// Grayscale morphology
// ---------------------------------------------------------------------------

/// Structuring element of radius r: the r-fold dilation of the unit
/// disk {(dy,dx): dy^2+dx^2 <= 1}, i.e. the L1 ball |dy|+|dx| <= r.
/// It coincides with the Euclidean disk for r <= 2 and, unlike
/// Euclidean disks at r >= 3, the family is closed under opening by
/// smaller members, so openings at growing radii form a sieve:
/// o(r+1) <= o(r) pointwise.
fn disk_offsets(radius: usize) -> Vec<(i64, i64)> {
    let r = radius as i64;
    let mut out = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            if dy.abs() + dx.abs() <= r {
                out.push((dy, dx));
            }
        }
    }
    out
}

fn morph_extremum(plane: &[f64], h: usize, w: usize, radius: usize, maximum: bool) -> Vec<f64> {
    let offsets = disk_offsets(radius);
    let mut out = vec![0.0; plane.len()];
    for y in 0..h {
        for x in 0..w {
            let mut acc = if maximum { f64::MIN } else { f64::MAX };
            for &(dy, dx) in &offsets {
                let ny = (y as i64 + dy).clamp(0, h as i64 - 1) as usize;
                let nx = (x as i64 + dx).clamp(0, w as i64 - 1) as usize;
                let v = plane[ny * w + nx];
                acc = if maximum { acc.max(v) } else { acc.min(v) };
            }
            out[y * w + x] = acc;
        }
    }
    out
}

/// Grayscale erosion with the discrete disk from `disk_offsets`,
/// edge replication.
pub fn erode(plane: &[f64], h: usize, w: usize, radius: usize) -> Vec<f64> {
    morph_extremum(plane, h, w, radius, false)
}

/// Grayscale dilation, same structuring element.
pub fn dilate(plane: &[f64], h: usize, w: usize, radius: usize) -> Vec<f64> {
    morph_extremum(plane, h, w, radius, true)
}

/// Opening: erosion then dilation.
pub fn morph_open(plane: &[f64], h: usize, w: usize, radius: usize) -> Vec<f64> {
    dilate(&erode(plane, h, w, radius), h, w, radius)
}

/// Closing: dilation then erosion.
pub fn morph_close(plane: &[f64], h: usize, w: usize, radius: usize) -> Vec<f64> {
    erode(&dilate(plane, h, w, radius), h, w, radius)
}

// ---------------------------------------------------------------------------
// Extended morphological profiles
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EmpSpec {
    /// Number of leading principal components profiled.
    pub pca_components: usize,
    /// Disk radii 1..=max_se_radius; profile length per component is
    /// 2 * max_se_radius + 1.
    pub max_se_radius: usize,
}

impl EmpSpec {
    fn validate(&self, bands: usize) -> Result<()> {
        if self.pca_components == 0 || self.pca_components > bands {
            return Err(Error::InvalidConfig(format!(
                "pca_components {} outside 1..={bands}",
                self.pca_components
            )));
        }
        if self.max_se_radius == 0 {
            return Err(Error::InvalidConfig("max_se_radius must be >= 1".into()));
        }
        Ok(())
    }
}

/// Extended morphological profile: per principal-component plane the
/// profile [o(n), ..., o(1), plane, c(1), ..., c(n)], all m profiles
/// stacked and the raw spectrum appended. D = m * (2n + 1) + B.
pub fn emp_features(
    cube: &HyperCube,
    selection: &[(usize, usize)],
    spec: EmpSpec,
) -> Result<FeatureSet> {
    check_selection(cube, selection)?;
    spec.validate(cube.bands())?;
    let (h, w, b) = (cube.height(), cube.width(), cube.bands());
    let scores = pca_project(cube, spec.pca_components)?;
    let n = spec.max_se_radius;
    // profile planes per component, in feature order
    let mut planes: Vec<Vec<f64>> = Vec::with_capacity(spec.pca_components * (2 * n + 1));
    for comp in 0..spec.pca_components {
        let plane: Vec<f64> = (0..h * w)
            .map(|i| scores.get(i / w, i % w, comp))
            .collect();
        for r in (1..=n).rev() {
            planes.push(morph_open(&plane, h, w, r));
        }
        planes.push(plane.clone());
        for r in 1..=n {
            planes.push(morph_close(&plane, h, w, r));
        }
    }
    let dim = planes.len() + b;
    let mut vectors = Vec::with_capacity(selection.len() * dim);
    for &(y, x) in selection {
        for plane in &planes {
            vectors.push(plane[y * w + x]);
        }
        for band in 0..b {
            vectors.push(cube.get(y, x, band));
        }
    }
    FeatureSet::new(dim, vectors, selection.to_vec())
}
