//! Per-band spatial preprocessing filters: box mean and Gaussian.
//!
//! Both operate band-independently with edge replication (clamped
//! indices), so the output keeps the input's dimensions and every
//! labeled pixel stays usable.

use crate::datamodel::HyperCube;
use crate::error::{Error, Result};

/// Odd M x N window for the mean filter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowSpec {
    pub m_width: usize,
    pub n_height: usize,
}

impl WindowSpec {
    pub fn square(w: usize) -> Self {
        WindowSpec {
            m_width: w,
            n_height: w,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.m_width == 0 || self.n_height == 0 || self.m_width.is_multiple_of(2) || self.n_height.is_multiple_of(2)
        {
            return Err(Error::InvalidConfig(format!(
                "mean filter window must be odd and >= 1, got {}x{}",
                self.m_width, self.n_height
            )));
        }
        Ok(())
    }
}

/// Gaussian filter parameter; the kernel is truncated at radius
/// ceil(3*sigma) and renormalized to sum 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianSpec {
    pub sigma: f64,
}

impl GaussianSpec {
    pub fn truncation_radius(&self) -> usize {
        (3.0 * self.sigma).ceil() as usize
    }

    /// Effective odd window size: 2 * ceil(3*sigma) + 1.
    pub fn window(&self) -> usize {
        2 * self.truncation_radius() + 1
    }

    pub fn kernel(&self) -> Result<Vec<f64>> {
        if self.sigma <= 0.0 || !self.sigma.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "gaussian sigma must be > 0, got {}",
                self.sigma
            )));
        }
        let r = self.truncation_radius() as i64;
        let mut k: Vec<f64> = (-r..=r)
            .map(|i| (-(i * i) as f64 / (2.0 * self.sigma * self.sigma)).exp())
            .collect();
        let sum: f64 = k.iter().sum();
        for v in &mut k {
            *v /= sum;
        }
        Ok(k)
    }
}

#[inline]
fn clamp(i: i64, n: usize) -> usize {
    i.clamp(0, n as i64 - 1) as usize
}

/// Separable 1-D convolution pass over every band. `kernel` is centered
/// (odd length); `vertical` selects the axis. Edge replication.
fn convolve_axis(cube: &HyperCube, kernel: &[f64], vertical: bool) -> HyperCube {
    let (h, w, b) = (cube.height(), cube.width(), cube.bands());
    let r = (kernel.len() / 2) as i64;
    let mut out = vec![0.0f64; h * w * b];
    for y in 0..h {
        for x in 0..w {
            for band in 0..b {
                let mut acc = 0.0;
                for (k, &kv) in kernel.iter().enumerate() {
                    let o = k as i64 - r;
                    let (sy, sx) = if vertical {
                        (clamp(y as i64 + o, h), x)
                    } else {
                        (y, clamp(x as i64 + o, w))
                    };
                    acc += kv * cube.get(sy, sx, band);
                }
                out[(y * w + x) * b + band] = acc;
            }
        }
    }
    HyperCube::new(h, w, b, out).expect("filtered cube keeps dimensions and finiteness")
}

/// Box mean filter: each output sample is the mean of the clamped
/// M x N window around it, per band. A 1x1 window is the identity.
pub fn mean_filter(cube: &HyperCube, w: WindowSpec) -> Result<HyperCube> {
    w.validate()?;
    if w.m_width == 1 && w.n_height == 1 {
        return Ok(cube.clone());
    }
    // box is separable; clamping acts independently per axis
    let kx = vec![1.0 / w.m_width as f64; w.m_width];
    let ky = vec![1.0 / w.n_height as f64; w.n_height];
    let hpass = convolve_axis(cube, &kx, false);
    Ok(convolve_axis(&hpass, &ky, true))
}

/// Separable Gaussian smoothing per band, kernel truncated at
/// ceil(3*sigma) and renormalized.
pub fn gaussian_filter(cube: &HyperCube, g: GaussianSpec) -> Result<HyperCube> {
    let k = g.kernel()?;
    let hpass = convolve_axis(cube, &k, false);
    Ok(convolve_axis(&hpass, &k, true))
}
