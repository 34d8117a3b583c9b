//! Brute-force references: an on-grid group-lasso stand-in for the atomic
//! norm primal, and exhaustive single-atom fitting. Slow by design; used by
//! the test suites and the `oracle` CLI cross-check.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::als::phase_fix;
use crate::error::{Error, Result};
use crate::linalg::{frob, CMat, CVec, ZERO};
use crate::scene::{restrict_rows, ArrayGeometry};
use crate::serde_cx;

/// Angles (ascending) of the points `f = g / grid_size` inside the visible region.
pub fn frequency_grid(geometry: &ArrayGeometry, grid_size: usize) -> Vec<f64> {
    let delta = geometry.delta_r;
    let mut out = Vec::with_capacity(grid_size);
    for g in 0..grid_size {
        let base = g as f64 / grid_size as f64;
        let m_lo = (-delta - base).ceil() as i64;
        let m_hi = (delta - base).floor() as i64;
        for m in m_lo..=m_hi {
            let f = base + m as f64;
            if f.abs() < delta {
                let theta = (f / delta).acos();
                if theta > 0.0 && theta < std::f64::consts::PI {
                    out.push(theta);
                }
            }
        }
    }
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridPrimalSolution {
    pub grid: Vec<f64>,
    /// Row `g` holds the T coefficients attached to grid angle `g`.
    #[serde(with = "serde_cx::mat")]
    pub coefficients: CMat,
    /// Sum of row norms of `coefficients`.
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct GridPrimalOptions {
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for GridPrimalOptions {
    fn default() -> Self {
        Self {
            max_iters: 50_000,
            tol: 1e-10,
        }
    }
}

/// Projection onto `{C : ||A C - Y||_F <= eta}` through the SVD of a full
/// row-rank `A`.
struct BallProjector {
    u: CMat,
    s: Vec<f64>,
    v: CMat,
    a: CMat,
    y: CMat,
    eta: f64,
}

impl BallProjector {
    fn new(a: CMat, y: CMat, eta: f64) -> Result<Self> {
        let svd = a.clone().svd(true, true);
        let u = svd.u.ok_or_else(|| Error::Degenerate("svd U".into()))?;
        let v = svd.v_t.ok_or_else(|| Error::Degenerate("svd V".into()))?.adjoint();
        let s: Vec<f64> = svd.singular_values.iter().copied().collect();
        let s_max = s.iter().cloned().fold(0.0, f64::max);
        if s.iter().any(|&x| x <= 1e-10 * s_max) {
            return Err(Error::Degenerate("grid dictionary is not full row rank".into()));
        }
        Ok(Self { u, s, v, a, y, eta })
    }

    fn project(&self, w: &CMat) -> CMat {
        let r = &self.a * w - &self.y;
        let r_norm = frob(&r);
        if r_norm <= self.eta {
            return w.clone();
        }
        let rt = self.u.adjoint() * &r;
        let row_sq: Vec<f64> = (0..rt.nrows()).map(|i| rt.row(i).norm_squared()).collect();
        // residual norm after the step as a function of mu, increasing in mu
        let resid = |mu: f64| -> f64 {
            row_sq
                .iter()
                .zip(&self.s)
                .map(|(&q, &s)| (mu / (s * s + mu)).powi(2) * q)
                .sum::<f64>()
                .sqrt()
        };
        let mu = if self.eta == 0.0 {
            0.0
        } else {
            let (mut lo, mut hi) = (0.0, 1.0);
            while resid(hi) < self.eta {
                hi *= 2.0;
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if resid(mid) < self.eta {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        };
        let mut scaled = rt;
        for (i, &s) in self.s.iter().enumerate() {
            scaled.row_mut(i).scale_mut(s / (s * s + mu));
        }
        w - &self.v * scaled
    }
}

fn group_norm_sum(c: &CMat) -> f64 {
    (0..c.nrows()).map(|g| c.row(g).norm()).sum()
}

/// On-grid surrogate of the atomic-norm primal:
/// `min sum_g ||C_g||_2  s.t.  ||Y - A_Omega(grid) C||_F <= eta`, by ADMM
/// between the constraint ball and row-wise soft thresholding. The returned
/// objective is evaluated on the feasible iterate.
pub fn grid_primal(
    y_omega: &CMat,
    omega: &[usize],
    geometry: &ArrayGeometry,
    eta: f64,
    grid_size: usize,
) -> Result<GridPrimalSolution> {
    grid_primal_with(y_omega, omega, geometry, eta, grid_size, &GridPrimalOptions::default())
}

pub fn grid_primal_with(
    y_omega: &CMat,
    omega: &[usize],
    geometry: &ArrayGeometry,
    eta: f64,
    grid_size: usize,
    opts: &GridPrimalOptions,
) -> Result<GridPrimalSolution> {
    if y_omega.nrows() != omega.len() {
        return Err(Error::Dimension("rows of y_omega must match omega".into()));
    }
    let grid = frequency_grid(geometry, grid_size);
    let t = y_omega.ncols();
    let g = grid.len();
    if frob(y_omega) <= eta {
        return Ok(GridPrimalSolution {
            grid,
            coefficients: CMat::zeros(g, t),
            objective: 0.0,
            iterations: 0,
            converged: true,
        });
    }
    let a = restrict_rows(&geometry.steering_matrix(&grid)?, omega);
    let proj = BallProjector::new(a, y_omega.clone(), eta)?;

    let mut rho = 1.0 / (frob(y_omega) / (y_omega.nrows() as f64).sqrt()).max(1e-12);
    let mut z = CMat::zeros(g, t);
    let mut u = CMat::zeros(g, t);
    let mut c = proj.project(&z);
    let mut converged = false;
    let mut iterations = 0;
    for it in 1..=opts.max_iters {
        iterations = it;
        c = proj.project(&(&z - &u));
        let w = &c + &u;
        let z_old = std::mem::replace(&mut z, w);
        let tau = 1.0 / rho;
        for row in 0..g {
            let n = z.row(row).norm();
            if n <= tau {
                z.row_mut(row).fill(ZERO);
            } else {
                z.row_mut(row).scale_mut(1.0 - tau / n);
            }
        }
        let r = &c - &z;
        u += &r;
        let r_norm = frob(&r);
        let s_norm = rho * frob(&(&z - &z_old));
        let scale = frob(&c).max(1.0);
        if r_norm < opts.tol * scale && s_norm < opts.tol * scale {
            converged = true;
            break;
        }
        if it % 20 == 0 {
            if r_norm > 10.0 * s_norm {
                rho *= 2.0;
                u.unscale_mut(2.0);
            } else if s_norm > 10.0 * r_norm {
                rho /= 2.0;
                u.scale_mut(2.0);
            }
        }
    }
    let objective = group_norm_sum(&c);
    Ok(GridPrimalSolution {
        grid,
        coefficients: c,
        objective,
        iterations,
        converged,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingleAtomFit {
    pub theta: f64,
    pub c: Complex64,
    #[serde(with = "serde_cx::vec")]
    pub phi: CVec,
    pub residual: f64,
}

/// Best single atom `c a(theta) phi^H` over a frequency grid.
///
/// For a fixed unit-norm `a`, the optimal `c phi^H` is `a^H Y`, so the fit at
/// each grid point is closed form. The result is phase-fixed.
pub fn exhaustive_single_atom_fit(y: &CMat, geometry: &ArrayGeometry, grid_size: usize) -> Result<SingleAtomFit> {
    if y.nrows() != geometry.n_antennas {
        return Err(Error::Dimension(format!("{} rows for {} antennas", y.nrows(), geometry.n_antennas)));
    }
    let grid = frequency_grid(geometry, grid_size);
    let y_energy = frob(y).powi(2);
    let mut best: Option<(f64, f64, CVec)> = None;
    for &theta in &grid {
        let a = geometry.steering_at_frequency(geometry.spatial_frequency(theta));
        let corr = y.adjoint() * &a;
        let gain = corr.norm_squared();
        if best.as_ref().is_none_or(|b| gain > b.1) {
            best = Some((theta, gain, corr));
        }
    }
    let (theta, gain, corr) = best.ok_or_else(|| Error::InvalidConfig("empty grid".into()))?;
    let residual = (y_energy - gain).max(0.0).sqrt();
    let mag = gain.sqrt();
    if mag == 0.0 {
        return Ok(SingleAtomFit {
            theta,
            c: ZERO,
            phi: CVec::zeros(y.ncols()),
            residual,
        });
    }
    let mut cv = CVec::from_element(1, Complex64::new(mag, 0.0));
    let mut phi = corr.unscale(mag);
    phase_fix(&mut cv, &mut phi);
    Ok(SingleAtomFit {
        theta,
        c: cv[0],
        phi,
        residual,
    })
}
