//! Alternating least squares for per-user path gains and data signatures
//! once each user's steering matrix is known.
//!
//! Model on the observed rows: `Y = sum_k A_k c_k phi_k^H + W`.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cluster::ClusterResult;
use crate::error::{Error, Result};
use crate::linalg::{c, frob, lstsq_min_norm, CMat, CVec, ZERO};
use crate::scene::ArrayGeometry;
use crate::serde_cx;

pub const DEFAULT_MAXITER: usize = 5;

/// Recovered parameters of one detected user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserEstimate {
    pub angles: Vec<f64>,
    /// Path gains absorbing the data norm.
    #[serde(with = "serde_cx::vec")]
    pub c: CVec,
    /// Unit-norm data signature after the phase fix.
    #[serde(with = "serde_cx::vec")]
    pub phi: CVec,
    /// Per-path gains; equal to `c` because transmitted data has unit norm.
    #[serde(with = "serde_cx::vec")]
    pub alpha: CVec,
    /// Channel over the full array.
    #[serde(with = "serde_cx::vec")]
    pub h: CVec,
    /// Set when the user's fitted column collapsed to zero.
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlsReport {
    /// Residual `||Y - sum_k A_k c_k phi_k^H||_F` after each (c, phi) alternation.
    pub residual_trace: Vec<f64>,
    pub iterations_run: usize,
}

/// Initial data vectors with entries uniform on (0, 5].
pub fn init_phi<R: Rng + ?Sized>(t: usize, k_active: usize, rng: &mut R) -> Vec<CVec> {
    (0..k_active)
        .map(|_| CVec::from_fn(t, |_, _| c(5.0 * crate::scene::unit_open_closed(rng), 0.0)))
        .collect()
}

fn check_shapes(y: &CMat, steering: &[CMat]) -> Result<()> {
    for (k, a) in steering.iter().enumerate() {
        if a.nrows() != y.nrows() {
            return Err(Error::Dimension(format!(
                "steering matrix {k} has {} rows, data has {}",
                a.nrows(),
                y.nrows()
            )));
        }
    }
    Ok(())
}

/// Joint least-squares gains for fixed data vectors.
///
/// `vec(A c phi^H) = (conj(phi) kron A) c`, so all users stack into one
/// `MT x sum(L_k)` system solved in the minimum-norm sense.
pub fn c_step(y: &CMat, steering: &[CMat], phis: &[CVec]) -> Result<Vec<CVec>> {
    check_shapes(y, steering)?;
    if steering.len() != phis.len() {
        return Err(Error::Dimension("one data vector per steering matrix".into()));
    }
    let (m, t) = y.shape();
    let total: usize = steering.iter().map(|a| a.ncols()).sum();
    let mut big = CMat::zeros(m * t, total);
    let mut col0 = 0;
    for (a, phi) in steering.iter().zip(phis) {
        if phi.len() != t {
            return Err(Error::Dimension(format!("data vector length {} != T = {t}", phi.len())));
        }
        for tt in 0..t {
            let w = phi[tt].conj();
            for l in 0..a.ncols() {
                for r in 0..m {
                    big[(tt * m + r, col0 + l)] = w * a[(r, l)];
                }
            }
        }
        col0 += a.ncols();
    }
    if big.iter().all(|z| *z == ZERO) {
        return Err(Error::Degenerate("stacked c-step matrix is identically zero".into()));
    }
    let rhs = CMat::from_column_slice(m * t, 1, y.as_slice());
    let sol = lstsq_min_norm(&big, &rhs)?;
    let mut out = Vec::with_capacity(steering.len());
    let mut col0 = 0;
    for a in steering {
        out.push(CVec::from_fn(a.ncols(), |l, _| sol[(col0 + l, 0)]));
        col0 += a.ncols();
    }
    Ok(out)
}

/// Output of [`phi_step`].
#[derive(Debug, Clone)]
pub struct PhiStep {
    /// Unnormalized data vectors; zero for flagged users.
    pub phis: Vec<CVec>,
    pub flagged: Vec<bool>,
}

/// Least-squares data vectors for fixed gains: `Phi = B^+ Y`, `B = [A_k c_k]`.
///
/// Row `k` of `Phi` is `phi_k^H`. Users whose column `A_k c_k` vanishes are
/// flagged and solved out of the system.
pub fn phi_step(y: &CMat, steering: &[CMat], cs: &[CVec]) -> Result<PhiStep> {
    check_shapes(y, steering)?;
    if steering.len() != cs.len() {
        return Err(Error::Dimension("one gain vector per steering matrix".into()));
    }
    let t = y.ncols();
    let cols: Vec<CVec> = steering.iter().zip(cs).map(|(a, ck)| a * ck).collect();
    let flagged: Vec<bool> = cols.iter().map(|b| b.iter().all(|z| *z == ZERO)).collect();
    let live: Vec<usize> = (0..cols.len()).filter(|&k| !flagged[k]).collect();
    let mut phis = vec![CVec::zeros(t); cols.len()];
    if !live.is_empty() {
        let b = CMat::from_columns(&live.iter().map(|&k| cols[k].clone()).collect::<Vec<_>>());
        let rows = lstsq_min_norm(&b, y)?;
        for (r, &k) in live.iter().enumerate() {
            phis[k] = rows.row(r).adjoint();
        }
    }
    Ok(PhiStep { phis, flagged })
}

/// `||Y - sum_k A_k c_k phi_k^H||_F`
pub fn model_residual(y: &CMat, steering: &[CMat], cs: &[CVec], phis: &[CVec]) -> f64 {
    let mut r = y.clone();
    for ((a, ck), phi) in steering.iter().zip(cs).zip(phis) {
        r -= (a * ck) * phi.adjoint();
    }
    frob(&r)
}

/// Rotates `(c, phi)` by a common unit scalar so that `sum_t phi(t)` is real
/// and positive. The product `c phi^H` is unchanged.
pub fn phase_fix(c_vec: &mut CVec, phi: &mut CVec) {
    let s: Complex64 = phi.iter().sum();
    let mag = s.norm();
    if mag == 0.0 {
        return;
    }
    let rot = s.conj() / mag;
    for z in phi.iter_mut() {
        *z *= rot;
    }
    for z in c_vec.iter_mut() {
        *z *= rot;
    }
}

/// Algorithm loop: `maxiter` rounds of c-step, phi-step and per-user
/// normalization, then the phase fix and full-array channel assembly.
pub fn run_als<R: Rng + ?Sized>(
    y: &CMat,
    clusters: &ClusterResult,
    geometry: &ArrayGeometry,
    maxiter: usize,
    rng: &mut R,
) -> Result<(Vec<UserEstimate>, AlsReport)> {
    if maxiter == 0 {
        return Err(Error::InvalidConfig("ALS maxiter must be >= 1".into()));
    }
    let steering = &clusters.steering;
    check_shapes(y, steering)?;
    let k_users = steering.len();
    let t = y.ncols();
    let mut phis = init_phi(t, k_users, rng);
    let mut cs: Vec<CVec> = steering.iter().map(|a| CVec::zeros(a.ncols())).collect();
    let mut flagged = vec![false; k_users];
    let mut trace = Vec::with_capacity(maxiter);
    let mut iterations_run = 0;

    for _ in 0..maxiter {
        let live: Vec<usize> = (0..k_users).filter(|&k| !flagged[k]).collect();
        if live.is_empty() {
            break;
        }
        iterations_run += 1;
        let live_a: Vec<CMat> = live.iter().map(|&k| steering[k].clone()).collect();
        let live_phi: Vec<CVec> = live.iter().map(|&k| phis[k].clone()).collect();
        let new_c = c_step(y, &live_a, &live_phi)?;
        for (&k, ck) in live.iter().zip(new_c) {
            cs[k] = ck;
        }
        let step = phi_step(y, steering, &cs)?;
        for k in 0..k_users {
            flagged[k] |= step.flagged[k];
        }
        phis = step.phis;
        trace.push(model_residual(y, steering, &cs, &phis));
        for k in 0..k_users {
            let norm = phis[k].norm();
            if flagged[k] || norm == 0.0 {
                flagged[k] = true;
                phis[k].fill(ZERO);
                cs[k].fill(ZERO);
            } else {
                phis[k].unscale_mut(norm);
                cs[k].scale_mut(norm);
            }
        }
    }

    let mut estimates = Vec::with_capacity(k_users);
    for k in 0..k_users {
        let (mut ck, mut phi) = (cs[k].clone(), phis[k].clone());
        phase_fix(&mut ck, &mut phi);
        let h = geometry.steering_matrix(&clusters.members[k])? * &ck;
        estimates.push(UserEstimate {
            angles: clusters.members[k].clone(),
            alpha: ck.clone(),
            c: ck,
            phi,
            h,
            flagged: flagged[k],
        });
    }
    Ok((
        estimates,
        AlsReport {
            residual_trace: trace,
            iterations_run,
        },
    ))
}
