//! Dual polynomial spectrum `||V^H a(theta)||_2` and peak localization.

use std::f64::consts::PI;

use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMat, ZERO};
use crate::scene::ArrayGeometry;

/// Default spectrum grid for an `n`-element array.
pub fn default_grid_size(n_antennas: usize) -> usize {
    8192.max(32 * n_antennas)
}

/// Norm of the vector dual polynomial at one angle.
pub fn q_norm(v: &CMat, geometry: &ArrayGeometry, theta: f64) -> f64 {
    let a = geometry.steering_at_frequency(geometry.spatial_frequency(theta));
    (v.adjoint() * a).norm()
}

#[derive(Debug, Clone)]
pub struct DualSpectrum {
    /// Strictly increasing angles in (0, pi).
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub geometry: ArrayGeometry,
    /// Dual matrix the spectrum was evaluated from; used for off-grid refinement.
    pub v: CMat,
}

impl DualSpectrum {
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }
}

/// Evaluates `||V^H a(theta)||_2` on a grid uniform in spatial frequency.
///
/// Every column of `V` is a trigonometric polynomial in `f = delta_r cos(theta)`,
/// so one zero-padded FFT per column evaluates it at `f = g / grid_size`.
/// Grid sizes below the array length are raised to it.
pub fn evaluate_spectrum(v: &CMat, geometry: &ArrayGeometry, grid_size: usize) -> DualSpectrum {
    let (n, t) = v.shape();
    let size = grid_size.max(n).max(2);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(size);
    let mut power = vec![0.0f64; size];
    let mut buf = vec![ZERO; size];
    for col in 0..t {
        buf.fill(ZERO);
        for i in 0..n {
            buf[i] = v[(i, col)].conj();
        }
        fft.process(&mut buf);
        for (p, z) in power.iter_mut().zip(&buf) {
            *p += z.norm_sqr();
        }
    }

    let delta = geometry.delta_r;
    let scale = 1.0 / n as f64;
    let mut points: Vec<(f64, f64)> = Vec::with_capacity(size);
    for (g, p) in power.iter().enumerate() {
        let base = g as f64 / size as f64;
        // all aliases f + m that fall inside the visible region |f| < delta_r
        let m_lo = (-delta - base).ceil() as i64;
        let m_hi = (delta - base).floor() as i64;
        for m in m_lo..=m_hi {
            let f = base + m as f64;
            if f.abs() < delta {
                let theta = (f / delta).acos();
                if theta > 0.0 && theta < PI {
                    points.push((theta, (p * scale).sqrt()));
                }
            }
        }
    }
    points.sort_by(|a, b| a.0.total_cmp(&b.0));
    points.dedup_by(|a, b| a.0 == b.0);
    let (grid, values) = points.into_iter().unzip();
    DualSpectrum {
        grid,
        values,
        geometry: *geometry,
        v: v.clone(),
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PeakSet {
    /// Ascending, pairwise distinct.
    pub angles: Vec<f64>,
    pub heights: Vec<f64>,
}

impl PeakSet {
    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section maximization of `f` on `[lo, hi]`.
fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> (f64, f64) {
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > 1e-12 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Grid-local maxima with height at least `1 - epsilon`, each refined
/// off-grid inside its bracketing cells.
pub fn locate_peaks(spectrum: &DualSpectrum, epsilon: f64) -> Result<PeakSet> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidConfig(format!("peak epsilon {epsilon} not in (0, 1)")));
    }
    let vals = &spectrum.values;
    let grid = &spectrum.grid;
    let len = vals.len();
    let threshold = 1.0 - epsilon;
    let eval = |theta: f64| q_norm(&spectrum.v, &spectrum.geometry, theta);

    let mut found: Vec<(f64, f64)> = Vec::new();
    for g in 0..len {
        let left = if g == 0 { f64::NEG_INFINITY } else { vals[g - 1] };
        let right = if g + 1 == len { f64::NEG_INFINITY } else { vals[g + 1] };
        if !(vals[g] >= threshold && vals[g] > left && vals[g] >= right) {
            continue;
        }
        let lo = if g == 0 { 0.5 * grid[0] } else { grid[g - 1] };
        let hi = if g + 1 == len { 0.5 * (grid[g] + PI) } else { grid[g + 1] };
        let (theta, height) = golden_max(eval, lo, hi);
        if height >= vals[g] {
            found.push((theta, height));
        } else {
            found.push((grid[g], vals[g]));
        }
    }
    found.sort_by(|a, b| a.0.total_cmp(&b.0));
    // two grid maxima can refine onto the same flat top
    let mut merged: Vec<(f64, f64)> = Vec::with_capacity(found.len());
    for p in found {
        match merged.last_mut() {
            Some(last) if p.0 - last.0 < 1e-7 => {
                if p.1 > last.1 {
                    *last = p;
                }
            }
            _ => merged.push(p),
        }
    }
    let (angles, heights) = merged.into_iter().unzip();
    Ok(PeakSet { angles, heights })
}
