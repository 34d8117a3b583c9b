//! Figures of merit for blind recovery: estimates are matched to true
//! active users by their angular signature before any error is computed.

use serde::{Deserialize, Serialize};

use crate::als::{phase_fix, UserEstimate};
use crate::linalg::CVec;
use crate::scene::Scene;

/// Default matching tolerance, about two degrees.
pub const DEFAULT_ANGLE_TOLERANCE: f64 = 0.035;

/// Symmetric sum of nearest-neighbour distances between two angle sets.
pub fn chamfer(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return if a.is_empty() && b.is_empty() { 0.0 } else { f64::INFINITY };
    }
    let one_way = |x: &[f64], y: &[f64]| -> f64 {
        x.iter()
            .map(|&p| y.iter().map(|&q| (p - q).abs()).fold(f64::INFINITY, f64::min))
            .sum()
    };
    one_way(a, b) + one_way(b, a)
}

/// Minimum-cost assignment of rows to columns (`rows <= cols`), returned as
/// the column chosen for each row. Kuhn-Munkres with potentials.
fn hungarian_wide(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    let m = cost[0].len();
    debug_assert!(n <= m);
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![0; n];
    for j in 1..=m {
        if p[j] != 0 {
            out[p[j] - 1] = j - 1;
        }
    }
    out
}

/// Optimal injective assignment for a rectangular cost matrix, as
/// `(row, col)` pairs. Infinite costs are replaced by a large finite value.
pub fn min_cost_assignment(cost: &[Vec<f64>]) -> Vec<(usize, usize)> {
    let rows = cost.len();
    if rows == 0 {
        return Vec::new();
    }
    let cols = cost[0].len();
    if cols == 0 {
        return Vec::new();
    }
    let finite_max = cost
        .iter()
        .flatten()
        .filter(|x| x.is_finite())
        .fold(0.0f64, |a, &b| a.max(b.abs()));
    let big = 1e6 * (1.0 + finite_max);
    let clean = |x: f64| if x.is_finite() { x } else { big };
    if rows <= cols {
        let m: Vec<Vec<f64>> = cost.iter().map(|r| r.iter().map(|&x| clean(x)).collect()).collect();
        hungarian_wide(&m).into_iter().enumerate().collect()
    } else {
        let m: Vec<Vec<f64>> = (0..cols).map(|j| (0..rows).map(|i| clean(cost[i][j])).collect()).collect();
        let mut pairs: Vec<(usize, usize)> = hungarian_wide(&m).into_iter().enumerate().map(|(j, i)| (i, j)).collect();
        pairs.sort_unstable();
        pairs
    }
}

/// Matching between estimated clusters and true active users.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alignment {
    /// `(estimate index, true active index)` pairs; true indices point into
    /// `scene.active_set`.
    pub assignment: Vec<(usize, usize)>,
    /// Per true active user.
    pub matched: Vec<bool>,
    pub angle_tolerance: f64,
    /// Chamfer cost of every accepted pair, parallel to `assignment`.
    pub costs: Vec<f64>,
}

impl Alignment {
    pub fn n_matched(&self) -> usize {
        self.assignment.len()
    }
}

/// Optimal assignment on Chamfer cost, then rejection of pairs whose cost
/// exceeds `L_k * tolerance`.
pub fn align(scene: &Scene, estimates: &[UserEstimate], tolerance: f64) -> Alignment {
    let truth: Vec<&[f64]> = scene.active_users().map(|(u, _)| u.angles.as_slice()).collect();
    let cost: Vec<Vec<f64>> = estimates
        .iter()
        .map(|e| truth.iter().map(|t| chamfer(&e.angles, t)).collect())
        .collect();
    let mut matched = vec![false; truth.len()];
    let mut assignment = Vec::new();
    let mut costs = Vec::new();
    for (j, k) in min_cost_assignment(&cost) {
        let cst = cost[j][k];
        if cst <= truth[k].len() as f64 * tolerance {
            matched[k] = true;
            assignment.push((j, k));
            costs.push(cst);
        }
    }
    Alignment {
        assignment,
        matched,
        angle_tolerance: tolerance,
        costs,
    }
}

/// Per-trial figures of merit. An NMSE is `None` when no user was matched.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialMetrics {
    pub nmse_phi: Option<f64>,
    pub nmse_alpha: Option<f64>,
    pub nmse_theta: Option<f64>,
    pub nmse_h: Option<f64>,
    /// Fraction of true active users detected.
    pub detection_rate: f64,
    /// Number of undetected active users.
    pub misses: usize,
}

impl TrialMetrics {
    /// All NMSEs undefined, nothing detected.
    pub fn failed(n_active: usize) -> Self {
        Self {
            nmse_phi: None,
            nmse_alpha: None,
            nmse_theta: None,
            nmse_h: None,
            detection_rate: 0.0,
            misses: n_active,
        }
    }
}

/// Path correspondence between true and estimated angle lists (both ascending).
///
/// Equal lengths pair in order; otherwise pairs are taken greedily by
/// smallest angular distance and the rest stay unmatched.
pub fn match_paths(truth: &[f64], est: &[f64]) -> Vec<(Option<usize>, Option<usize>)> {
    if truth.len() == est.len() {
        return (0..truth.len()).map(|i| (Some(i), Some(i))).collect();
    }
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(truth.len() * est.len());
    for (i, &a) in truth.iter().enumerate() {
        for (j, &b) in est.iter().enumerate() {
            pairs.push(((a - b).abs(), i, j));
        }
    }
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let mut t_used = vec![false; truth.len()];
    let mut e_used = vec![false; est.len()];
    let mut out = Vec::new();
    for (_, i, j) in pairs {
        if !t_used[i] && !e_used[j] {
            t_used[i] = true;
            e_used[j] = true;
            out.push((Some(i), Some(j)));
        }
    }
    out.extend((0..truth.len()).filter(|&i| !t_used[i]).map(|i| (Some(i), None)));
    out.extend((0..est.len()).filter(|&j| !e_used[j]).map(|j| (None, Some(j))));
    out
}

#[derive(Default)]
struct Ratio {
    err: f64,
    energy: f64,
}

impl Ratio {
    fn value(&self) -> Option<f64> {
        (self.energy > 0.0).then(|| (self.err / self.energy).sqrt())
    }
}

/// Root normalized squared errors over the matched users.
pub fn nmse_all(scene: &Scene, estimates: &[UserEstimate], alignment: &Alignment) -> TrialMetrics {
    let n_active = scene.n_active();
    let detection_rate = detection_rate(scene, alignment);
    let misses = alignment.matched.iter().filter(|&&m| !m).count();
    if alignment.assignment.is_empty() {
        return TrialMetrics {
            detection_rate,
            misses,
            ..TrialMetrics::failed(n_active)
        };
    }
    let truth: Vec<_> = scene.active_users().collect();
    let (mut th, mut al, mut ph, mut hh) = (Ratio::default(), Ratio::default(), Ratio::default(), Ratio::default());
    for &(j, k) in &alignment.assignment {
        let (user, s) = truth[k];
        let est = &estimates[j];

        let (mut c_hat, mut phi_hat) = (est.c.clone(), est.phi.clone());
        phase_fix(&mut c_hat, &mut phi_hat);
        let phi_true = s.unscale(s.norm());
        ph.err += (&phi_true - &phi_hat).norm_squared();
        ph.energy += phi_true.norm_squared();

        for (ti, ej) in match_paths(&user.angles, &est.angles) {
            let (t_theta, t_gain) = ti.map_or((0.0, 0.0), |i| (user.angles[i], user.gains[i].norm_sqr()));
            match (ti, ej) {
                (Some(i), Some(j2)) => {
                    th.err += (user.angles[i] - est.angles[j2]).powi(2);
                    al.err += (user.gains[i] - c_hat[j2]).norm_sqr();
                }
                (Some(_), None) => {
                    th.err += t_theta * t_theta;
                    al.err += t_gain;
                }
                (None, Some(j2)) => {
                    th.err += est.angles[j2].powi(2);
                    al.err += c_hat[j2].norm_sqr();
                }
                (None, None) => {}
            }
        }
        th.energy += user.angles.iter().map(|t| t * t).sum::<f64>();
        al.energy += user.gains.iter().map(|g| g.norm_sqr()).sum::<f64>();

        let h_true = user
            .channel(&scene.geometry)
            .unwrap_or_else(|_| CVec::zeros(scene.geometry.n_antennas));
        hh.err += (&h_true - &est.h).norm_squared();
        hh.energy += h_true.norm_squared();
    }
    TrialMetrics {
        nmse_phi: ph.value(),
        nmse_alpha: al.value(),
        nmse_theta: th.value(),
        nmse_h: hh.value(),
        detection_rate,
        misses,
    }
}

/// Fraction of true active users with a matched estimate.
pub fn detection_rate(scene: &Scene, alignment: &Alignment) -> f64 {
    let k = scene.n_active();
    if k == 0 {
        return 0.0;
    }
    alignment.matched.iter().filter(|&&m| m).count() as f64 / k as f64
}
