//! Train/test dependence diagnostics: window overlap and spectral
//! correlation decay.
//!
//! "Covered" uses the Chebyshev (square-window) metric matching the
//! square feature-extraction windows. Correlation is the Pearson
//! coefficient between two pixels' band vectors, averaged over
//! positions; constant-spectrum pixels (zero spectral variance) are
//! excluded rather than assigned 0, since the coefficient is undefined
//! there.

use crate::datamodel::{HyperCube, SplitMask, SplitState};
use crate::error::{Error, Result};

/// Overlap-rate values per (sampling rate, window size).
#[derive(Debug, Clone, PartialEq)]
pub struct OverlapCurve {
    pub window_sizes: Vec<usize>,
    pub rates: Vec<f64>,
    /// values[rate_idx][window_idx], each in [0, 1]
    pub values: Vec<Vec<f64>>,
}

/// Mean correlation per pixel lag.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationCurve {
    pub lags: Vec<usize>,
    /// None when every pixel pair at the lag was excluded
    pub rho: Vec<Option<f64>>,
}

fn check_odd(w: usize) -> Result<()> {
    if w == 0 || w.is_multiple_of(2) {
        return Err(Error::InvalidConfig(format!(
            "window size must be odd and >= 1, got {w}"
        )));
    }
    Ok(())
}

/// Fraction of two w x w windows' area shared when their centers are
/// offset by (dy, dx): max(0, w-|dy|) * max(0, w-|dx|) / w^2.
pub fn pairwise_window_overlap(w: usize, offset: (i64, i64)) -> Result<f64> {
    check_odd(w)?;
    let side = |d: i64| (w as i64 - d.abs()).max(0) as f64;
    Ok(side(offset.0) * side(offset.1) / (w * w) as f64)
}

/// Fraction of Test pixels lying within the w x w window (Chebyshev
/// radius (w-1)/2) of at least one Train pixel.
pub fn overlap_rate(split: &SplitMask, w: usize) -> Result<f64> {
    check_odd(w)?;
    let (h, width) = (split.height(), split.width());
    let r = (w - 1) / 2;
    let mut test_total = 0usize;
    let mut covered = 0usize;
    for y in 0..h {
        for x in 0..width {
            if split.get(y, x) != SplitState::Test {
                continue;
            }
            test_total += 1;
            let y0 = y.saturating_sub(r);
            let x0 = x.saturating_sub(r);
            let y1 = (y + r).min(h - 1);
            let x1 = (x + r).min(width - 1);
            'scan: for ny in y0..=y1 {
                for nx in x0..=x1 {
                    if split.get(ny, nx) == SplitState::Train {
                        covered += 1;
                        break 'scan;
                    }
                }
            }
        }
    }
    if test_total == 0 {
        return Err(Error::InvalidData(
            "split has no test pixels; overlap rate undefined".into(),
        ));
    }
    Ok(covered as f64 / test_total as f64)
}

/// Pearson correlation between two band vectors; None when either has
/// zero spectral variance.
fn spectral_rho(cube: &HyperCube, a: (usize, usize), b: (usize, usize)) -> Option<f64> {
    let bands = cube.bands();
    let (mut ma, mut mb) = (0.0, 0.0);
    for band in 0..bands {
        ma += cube.get(a.0, a.1, band);
        mb += cube.get(b.0, b.1, band);
    }
    ma /= bands as f64;
    mb /= bands as f64;
    let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
    for band in 0..bands {
        let da = cube.get(a.0, a.1, band) - ma;
        let db = cube.get(b.0, b.1, band) - mb;
        cov += da * db;
        va += da * da;
        vb += db * db;
    }
    if va <= 0.0 || vb <= 0.0 {
        return None;
    }
    Some(cov / (va.sqrt() * vb.sqrt()))
}

/// (2*radius+1)^2 patch of mean spectral correlation between a pixel
/// and its neighbor at each offset, averaged over all centers where
/// both pixels are in bounds and non-constant. Entry order is row-major
/// over offsets (dy, dx) in [-radius, radius]^2.
pub fn correlation_patch(cube: &HyperCube, radius: usize) -> Result<Vec<Option<f64>>> {
    if radius == 0 {
        return Err(Error::InvalidConfig("patch radius must be >= 1".into()));
    }
    let (h, w) = (cube.height(), cube.width());
    let side = 2 * radius + 1;
    let mut out = Vec::with_capacity(side * side);
    for dy in -(radius as i64)..=radius as i64 {
        for dx in -(radius as i64)..=radius as i64 {
            let mut sum = 0.0;
            let mut n = 0usize;
            for y in 0..h {
                for x in 0..w {
                    let (ny, nx) = (y as i64 + dy, x as i64 + dx);
                    if ny < 0 || nx < 0 || ny as usize >= h || nx as usize >= w {
                        continue;
                    }
                    if let Some(rho) =
                        spectral_rho(cube, (y, x), (ny as usize, nx as usize))
                    {
                        sum += rho;
                        n += 1;
                    }
                }
            }
            out.push((n > 0).then(|| sum / n as f64));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

/// Mean spectral correlation at lags 0..=max_lag along the positive
/// axis direction. Lag 0 is included and equals 1 wherever any
/// non-constant pixel exists.
pub fn correlation_decay(cube: &HyperCube, axis: Axis, max_lag: usize) -> Result<CorrelationCurve> {
    let extent = match axis {
        Axis::X => cube.width(),
        Axis::Y => cube.height(),
    };
    if max_lag >= extent {
        return Err(Error::InvalidConfig(format!(
            "max_lag {max_lag} must be smaller than the axis extent {extent}"
        )));
    }
    let (h, w) = (cube.height(), cube.width());
    let mut lags = Vec::with_capacity(max_lag + 1);
    let mut rho = Vec::with_capacity(max_lag + 1);
    for lag in 0..=max_lag {
        let mut sum = 0.0;
        let mut n = 0usize;
        for y in 0..h {
            for x in 0..w {
                let (ny, nx) = match axis {
                    Axis::X => (y, x + lag),
                    Axis::Y => (y + lag, x),
                };
                if ny >= h || nx >= w {
                    continue;
                }
                if let Some(r) = spectral_rho(cube, (y, x), (ny, nx)) {
                    sum += r;
                    n += 1;
                }
            }
        }
        lags.push(lag);
        rho.push((n > 0).then(|| sum / n as f64));
    }
    Ok(CorrelationCurve { lags, rho })
}
