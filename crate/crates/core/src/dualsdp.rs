//! Dual atomic-norm problem for multi-snapshot line spectra, solved by ADMM
//! on the lifted semidefinite block.
//!
//! The dual variable `V` (N x T, supported on the observed rows) maximizes
//!
//! ```text
//!     Re<V, Y> - eta * ||V||_F
//!     s.t. [[Q, V], [V^H, I_T]] >= 0,   T*(Q) = T*(I_N),   V[i, :] = 0 for i not in Omega
//! ```
//!
//! where `T*` sums the diagonals of `Q`. By the bounded real lemma the LMI
//! is equivalent to `sup_theta ||V^H a(theta)||_2 <= 1` for unit-norm steering
//! vectors.
//!
//! Splitting: `X` carries the affine structure and the objective, `Z` the PSD
//! cone, with `X = Z` enforced through a scaled multiplier `U`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, frob, hermitian_eigen, hermitian_part, min_eigenvalue, CMat, ZERO};
use crate::scene::ArrayGeometry;
use crate::serde_cx;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    /// Initial ADMM penalty.
    pub rho: f64,
    pub max_iters: usize,
    pub tol_abs: f64,
    pub tol_rel: f64,
    /// Grid used when checking certificate feasibility after the solve.
    pub grid_check_size: usize,
    /// Residual balancing of `rho`.
    pub adaptive_rho: bool,
    /// Residual trace sampling period in iterations.
    pub trace_every: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            rho: 1.0,
            max_iters: 5000,
            tol_abs: 1e-6,
            tol_rel: 1e-5,
            grid_check_size: 0,
            adaptive_rho: true,
            trace_every: 25,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0) || !(self.tol_abs > 0.0) || !(self.tol_rel > 0.0) {
            return Err(Error::InvalidConfig("rho and tolerances must be > 0".into()));
        }
        if self.max_iters == 0 || self.trace_every == 0 {
            return Err(Error::InvalidConfig("max_iters and trace_every must be >= 1".into()));
        }
        Ok(())
    }
}

/// Problem data for one dual solve.
#[derive(Debug, Clone)]
pub struct DualProblem {
    pub y_omega: CMat,
    pub omega: Vec<usize>,
    pub eta: f64,
    pub n_antennas: usize,
    pub options: SolverOptions,
}

impl DualProblem {
    fn validate(&self) -> Result<()> {
        self.options.validate()?;
        let n = self.n_antennas;
        if self.y_omega.nrows() != self.omega.len() {
            return Err(Error::Dimension(format!(
                "{} observed rows but |omega| = {}",
                self.y_omega.nrows(),
                self.omega.len()
            )));
        }
        if self.y_omega.ncols() == 0 {
            return Err(Error::Dimension("no snapshots".into()));
        }
        if !self.omega.windows(2).all(|w| w[0] < w[1]) || self.omega.last().is_some_and(|&i| i >= n) {
            return Err(Error::Dimension("omega must be strictly ascending within 0..N".into()));
        }
        if !(self.eta >= 0.0) {
            return Err(Error::InvalidConfig(format!("eta = {} must be >= 0", self.eta)));
        }
        Ok(())
    }

    /// Observed data scattered into an `N x T` matrix (zeros off `omega`).
    pub fn embedded_data(&self) -> CMat {
        let mut y = CMat::zeros(self.n_antennas, self.y_omega.ncols());
        for (r, &i) in self.omega.iter().enumerate() {
            y.row_mut(i).copy_from(&self.y_omega.row(r));
        }
        y
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualSample {
    pub iteration: usize,
    pub primal: f64,
    pub dual: f64,
    /// `sqrt(rho * primal^2 + dual^2 / rho)`, non-increasing under fixed rho.
    pub combined: f64,
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverDiagnostics {
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub converged: bool,
    pub residual_trace: Vec<ResidualSample>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DualSolution {
    /// Dual matrix, rows outside the observed set are exactly zero.
    #[serde(with = "serde_cx::mat")]
    pub v: CMat,
    /// Hermitian `N x N` certificate block.
    #[serde(with = "serde_cx::mat")]
    pub q_cert: CMat,
    /// Primal estimate of the noiseless full-array signal, recovered from the
    /// PSD multiplier; on the observed rows it equals `Y - eta V / ||V||_F`.
    #[serde(with = "serde_cx::mat")]
    pub primal: CMat,
    pub objective: f64,
    pub diagnostics: SolverDiagnostics,
}

impl DualSolution {
    /// `[[Q, V], [V^H, I_T]]`
    pub fn lifted_block(&self) -> CMat {
        lift(&self.q_cert, &self.v)
    }

    /// Smallest eigenvalue of the lifted block.
    pub fn certificate_min_eigenvalue(&self) -> Result<f64> {
        min_eigenvalue(&self.lifted_block())
    }
}

fn lift(q: &CMat, v: &CMat) -> CMat {
    let (n, t) = v.shape();
    let mut x = CMat::identity(n + t, n + t);
    x.view_mut((0, 0), (n, n)).copy_from(q);
    x.view_mut((0, n), (n, t)).copy_from(v);
    x.view_mut((n, 0), (t, n)).copy_from(&v.adjoint());
    x
}

/// Diagonal sums of a square matrix.
///
/// Entry `k + N - 1` of the result is `sum_i z[i, i - k]` for
/// `k = -(N-1) ..= N-1` (positive `k` walks below the main diagonal).
pub fn toeplitz_adjoint(z: &CMat) -> Result<Vec<num_complex::Complex64>> {
    let n = z.nrows();
    if z.ncols() != n {
        return Err(Error::Dimension(format!("toeplitz_adjoint: {}x{} is not square", n, z.ncols())));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut out = vec![ZERO; 2 * n - 1];
    for i in 0..n {
        for j in 0..n {
            // k = i - j
            out[i + n - 1 - j] += z[(i, j)];
        }
    }
    Ok(out)
}

/// Frobenius-nearest positive semidefinite matrix (negative eigenvalues clipped).
pub fn psd_project(h: &CMat) -> Result<CMat> {
    let (vals, vecs) = hermitian_eigen(&hermitian_part(h))?;
    Ok(psd_from_eigen(&vals, &vecs))
}

fn psd_from_eigen(vals: &[f64], vecs: &CMat) -> CMat {
    let n = vecs.nrows();
    let keep: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] > 0.0).collect();
    if keep.is_empty() {
        return CMat::zeros(n, n);
    }
    let mut scaled = CMat::zeros(n, keep.len());
    let mut plain = CMat::zeros(n, keep.len());
    for (col, &i) in keep.iter().enumerate() {
        plain.set_column(col, &vecs.column(i));
        scaled.set_column(col, &vecs.column(i).scale(vals[i]));
    }
    let out = scaled * plain.adjoint();
    hermitian_part(&out)
}

/// Projects the `N x N` block onto `{Q : T*(Q) = T*(I_N)}` in place.
fn project_diagonal_sums(q: &mut CMat) {
    let n = q.nrows();
    for k in -(n as isize - 1)..=(n as isize - 1) {
        let len = n - k.unsigned_abs();
        let target = if k == 0 { n as f64 } else { 0.0 };
        let idx = |s: usize| -> (usize, usize) {
            if k >= 0 {
                (s + k as usize, s)
            } else {
                (s, s + (-k) as usize)
            }
        };
        let mut sum = ZERO;
        for s in 0..len {
            sum += q[idx(s)];
        }
        let shift = (sum - c(target, 0.0)) / len as f64;
        for s in 0..len {
            q[idx(s)] -= shift;
        }
    }
}

/// `x * max(0, 1 - tau / ||x||_F)`
fn frobenius_shrink(x: &mut CMat, tau: f64) {
    let norm = frob(x);
    if norm <= tau {
        x.fill(ZERO);
    } else {
        x.scale_mut(1.0 - tau / norm);
    }
}

struct Workspace<'a> {
    problem: &'a DualProblem,
    y_full: CMat,
    observed: Vec<bool>,
    n: usize,
    t: usize,
}

impl Workspace<'_> {
    /// Proximal step of the objective plus affine constraints at `w`.
    fn affine_prox(&self, w: &CMat, rho: f64) -> CMat {
        let (n, t) = (self.n, self.t);
        let mut q = hermitian_part(&w.view((0, 0), (n, n)).into_owned());
        project_diagonal_sums(&mut q);

        // V appears twice in the Hermitian lift, hence the factor 2 on rho.
        let b = (w.view((0, n), (n, t)) + w.view((n, 0), (t, n)).adjoint()).scale(0.5);
        let mut v_obs = CMat::zeros(self.problem.omega.len(), t);
        for (r, &i) in self.problem.omega.iter().enumerate() {
            for j in 0..t {
                v_obs[(r, j)] = b[(i, j)] + self.y_full[(i, j)] / (2.0 * rho);
            }
        }
        frobenius_shrink(&mut v_obs, self.problem.eta / (2.0 * rho));
        let mut v = CMat::zeros(n, t);
        for (r, &i) in self.problem.omega.iter().enumerate() {
            v.row_mut(i).copy_from(&v_obs.row(r));
        }
        debug_assert!(self.observed.len() == n);
        lift(&q, &v)
    }

    fn objective(&self, v: &CMat) -> f64 {
        let inner: f64 = v.iter().zip(self.y_full.iter()).map(|(a, b)| (a * b.conj()).re).sum();
        inner - self.problem.eta * frob(v)
    }
}

/// Solves the dual problem.
///
/// Non-convergence is not an error: the last iterate is returned with
/// `diagnostics.converged == false`.
pub fn solve_dual(problem: &DualProblem) -> Result<DualSolution> {
    problem.validate()?;
    let opts = &problem.options;
    let n = problem.n_antennas;
    let t = problem.y_omega.ncols();
    let dim = n + t;
    let mut observed = vec![false; n];
    for &i in &problem.omega {
        observed[i] = true;
    }
    let ws = Workspace {
        problem,
        y_full: problem.embedded_data(),
        observed,
        n,
        t,
    };

    let mut rho = opts.rho;
    let mut z = CMat::identity(dim, dim);
    let mut u = CMat::zeros(dim, dim);
    let mut x = z.clone();
    let mut trace = Vec::new();
    let (mut r_norm, mut s_norm) = (f64::INFINITY, f64::INFINITY);
    let mut converged = false;
    let mut iterations = 0;
    let scale_abs = dim as f64;

    for it in 1..=opts.max_iters {
        iterations = it;
        x = ws.affine_prox(&(&z - &u), rho);
        let (vals, vecs) = hermitian_eigen(&hermitian_part(&(&x + &u)))?;
        let z_new = psd_from_eigen(&vals, &vecs);
        let r = &x - &z_new;
        s_norm = rho * frob(&(&z_new - &z));
        r_norm = frob(&r);
        z = z_new;
        u += r;

        if it % opts.trace_every == 0 || it == 1 {
            trace.push(ResidualSample {
                iteration: it,
                primal: r_norm,
                dual: s_norm,
                combined: (rho * r_norm * r_norm + s_norm * s_norm / rho).sqrt(),
                rho,
            });
        }

        let eps_pri = scale_abs * opts.tol_abs + opts.tol_rel * frob(&x).max(frob(&z));
        let eps_dual = scale_abs * opts.tol_abs + opts.tol_rel * rho * frob(&u);
        if r_norm <= eps_pri && s_norm <= eps_dual {
            converged = true;
            break;
        }

        if opts.adaptive_rho && it % 10 == 0 {
            if r_norm > 10.0 * s_norm {
                rho *= 2.0;
                u.unscale_mut(2.0);
            } else if s_norm > 10.0 * r_norm {
                rho /= 2.0;
                u.scale_mut(2.0);
            }
        }
    }

    let mut q_cert = hermitian_part(&x.view((0, 0), (n, n)).into_owned());
    let mut v = x.view((0, n), (n, t)).into_owned();
    // blend toward the strictly feasible lift(I, 0) so the certificate is PSD
    let lambda = min_eigenvalue(&lift(&q_cert, &v))?;
    if lambda < 0.0 {
        let s = -lambda / (1.0 - lambda);
        q_cert = q_cert.scale(1.0 - s) + CMat::identity(n, n).scale(s);
        v.scale_mut(1.0 - s);
    }
    let objective = ws.objective(&v);
    // rho U is the multiplier of X = Z; its off-diagonal block carries X / 2
    let primal = u.view((0, n), (n, t)).scale(2.0 * rho);
    Ok(DualSolution {
        v,
        q_cert,
        primal,
        objective,
        diagnostics: SolverDiagnostics {
            iterations,
            primal_residual: r_norm,
            dual_residual: s_norm,
            converged,
            residual_trace: trace,
        },
    })
}

/// `max_theta ||v^H a(theta)||_2` over `grid_size` equispaced angles in (0, pi).
pub fn dual_norm_on_grid(v: &CMat, grid_size: usize, geometry: &ArrayGeometry) -> f64 {
    let step = std::f64::consts::PI / grid_size as f64;
    (0..grid_size)
        .map(|g| {
            let theta = (g as f64 + 0.5) * step;
            let a = geometry.steering_at_frequency(geometry.spatial_frequency(theta));
            (v.adjoint() * a).norm()
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::CVec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_cmat(rng: &mut impl Rng, r: usize, cc: usize) -> CMat {
        CMat::from_fn(r, cc, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    #[test]
    fn adjoint_of_identity() {
        let out = toeplitz_adjoint(&CMat::identity(3, 3)).unwrap();
        let want = [0.0, 0.0, 3.0, 0.0, 0.0];
        for (o, w) in out.iter().zip(want) {
            assert_eq!(*o, c(w, 0.0));
        }
    }

    #[test]
    fn adjoint_of_ones() {
        let out = toeplitz_adjoint(&CMat::from_element(2, 2, c(1.0, 0.0))).unwrap();
        assert_eq!(out, vec![c(1.0, 0.0), c(2.0, 0.0), c(1.0, 0.0)]);
    }

    #[test]
    fn adjoint_matches_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let z = random_cmat(&mut rng, 4, 4);
        let out = toeplitz_adjoint(&z).unwrap();
        for k in -3isize..=3 {
            let mut acc = ZERO;
            for i in 0..4isize {
                let j = i - k;
                if (0..4).contains(&j) {
                    acc += z[(i as usize, j as usize)];
                }
            }
            assert!((out[(k + 3) as usize] - acc).norm() < 1e-14);
        }
    }

    #[test]
    fn adjoint_rejects_rectangular() {
        assert!(matches!(toeplitz_adjoint(&CMat::zeros(2, 3)), Err(Error::Dimension(_))));
    }

    #[test]
    fn adjoint_is_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let z1 = random_cmat(&mut rng, 5, 5);
        let z2 = random_cmat(&mut rng, 5, 5);
        let (a, b) = (c(0.3, -1.2), c(2.0, 0.5));
        let lhs = toeplitz_adjoint(&(z1.map(|x| x * a) + z2.map(|x| x * b))).unwrap();
        let r1 = toeplitz_adjoint(&z1).unwrap();
        let r2 = toeplitz_adjoint(&z2).unwrap();
        for k in 0..lhs.len() {
            assert!((lhs[k] - (a * r1[k] + b * r2[k])).norm() < 1e-12);
        }
    }

    #[test]
    fn diagonal_sum_projection_hits_target() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut q = hermitian_part(&random_cmat(&mut rng, 6, 6));
        project_diagonal_sums(&mut q);
        let sums = toeplitz_adjoint(&q).unwrap();
        for (k, s) in sums.iter().enumerate() {
            let want = if k == 5 { 6.0 } else { 0.0 };
            assert!((s - c(want, 0.0)).norm() < 1e-12);
        }
        assert!(frob(&(q.adjoint() - &q)) < 1e-14);
    }

    #[test]
    fn psd_project_clips_diagonal() {
        let h = CMat::from_diagonal(&CVec::from_vec(vec![c(2.0, 0.0), c(-1.0, 0.0)]));
        let p = psd_project(&h).unwrap();
        let want = CMat::from_diagonal(&CVec::from_vec(vec![c(2.0, 0.0), ZERO]));
        assert!(frob(&(p - want)) < 1e-12);
    }

    #[test]
    fn psd_project_is_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let g = random_cmat(&mut rng, 5, 5);
        let psd = &g * g.adjoint();
        let p = psd_project(&psd).unwrap();
        assert!(frob(&(p - psd)) < 1e-10);
    }

    #[test]
    fn zero_data_gives_zero_dual() {
        let problem = DualProblem {
            y_omega: CMat::zeros(8, 2),
            omega: (0..8).collect(),
            eta: 0.0,
            n_antennas: 8,
            options: SolverOptions::default(),
        };
        let sol = solve_dual(&problem).unwrap();
        assert!(frob(&sol.v) < 1e-8);
        assert!(sol.objective.abs() < 1e-8);
    }

    #[test]
    fn rows_outside_omega_are_exactly_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let omega = vec![0, 2, 3, 7, 9, 11];
        let problem = DualProblem {
            y_omega: random_cmat(&mut rng, omega.len(), 2),
            omega: omega.clone(),
            eta: 0.1,
            n_antennas: 12,
            options: SolverOptions {
                max_iters: 200,
                ..SolverOptions::default()
            },
        };
        let sol = solve_dual(&problem).unwrap();
        for i in (0..12).filter(|i| !omega.contains(i)) {
            assert!(sol.v.row(i).iter().all(|z| *z == ZERO));
        }
        assert!(frob(&(sol.q_cert.adjoint() - &sol.q_cert)) < 1e-10);
    }

    #[test]
    fn malformed_problem_rejected() {
        let problem = DualProblem {
            y_omega: CMat::zeros(3, 2),
            omega: vec![0, 1],
            eta: 0.0,
            n_antennas: 4,
            options: SolverOptions::default(),
        };
        assert!(matches!(solve_dual(&problem), Err(Error::Dimension(_))));
    }

    #[test]
    fn primal_completes_noiseless_two_atom_signal() {
        let g = ArrayGeometry::half_wavelength(16).unwrap();
        let a = g.steering_matrix(&[1.1, 1.9]).unwrap();
        let b = CMat::from_row_slice(2, 2, &[c(0.8, 0.1), c(0.2, -0.4), c(-0.5, 0.6), c(0.3, 0.3)]);
        let x = &a * b.adjoint();
        let omega = vec![0, 1, 3, 4, 6, 7, 8, 10, 12, 13, 15];
        let problem = DualProblem {
            y_omega: crate::scene::restrict_rows(&x, &omega),
            omega,
            eta: 0.0,
            n_antennas: 16,
            options: SolverOptions::default(),
        };
        let sol = solve_dual(&problem).unwrap();
        assert!(sol.diagnostics.converged);
        assert!(frob(&(&sol.primal - &x)) < 1e-3 * frob(&x), "{}", frob(&(&sol.primal - &x)));
    }

    #[test]
    fn primal_matches_shrunk_data_on_observed_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let omega: Vec<usize> = (0..10).collect();
        let y = random_cmat(&mut rng, 10, 3);
        let problem = DualProblem {
            y_omega: y.clone(),
            omega: omega.clone(),
            eta: 0.3,
            n_antennas: 10,
            options: SolverOptions {
                tol_abs: 1e-8,
                tol_rel: 1e-7,
                max_iters: 20000,
                ..SolverOptions::default()
            },
        };
        let sol = solve_dual(&problem).unwrap();
        let want = &y - sol.v.scale(0.3 / frob(&sol.v));
        assert!(frob(&(&sol.primal - &want)) < 1e-3 * frob(&y));
    }

    #[test]
    fn dual_norm_of_zero_is_zero() {
        let g = ArrayGeometry::half_wavelength(8).unwrap();
        assert_eq!(dual_norm_on_grid(&CMat::zeros(8, 3), 64, &g), 0.0);
    }
}
