//! One-dimensional k-means over located angles, and per-user steering
//! matrices assembled from the resulting clusters.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CMat;
use crate::scene::{restrict_rows, ArrayGeometry};

pub const DEFAULT_RESTARTS: usize = 50;
const MAX_LLOYD_ITERS: usize = 200;

/// Labels and centers of a k-means fit, centers in ascending order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansFit {
    /// Zero-based cluster index of every input angle.
    pub labels: Vec<usize>,
    pub centers: Vec<f64>,
    /// Within-cluster sum of squares.
    pub inertia: f64,
}

/// Index of the nearest center; ties go to the lower index.
fn nearest(x: f64, centers: &[f64]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, &c) in centers.iter().enumerate() {
        let d = (x - c).abs();
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    best
}

fn seed_plus_plus<R: Rng + ?Sized>(xs: &[f64], k: usize, rng: &mut R) -> Vec<f64> {
    let mut centers = Vec::with_capacity(k);
    centers.push(xs[rng.random_range(0..xs.len())]);
    let mut d2: Vec<f64> = xs.iter().map(|&x| (x - centers[0]).powi(2)).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut idx = xs.len() - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    idx = i;
                    break;
                }
                target -= w;
            }
            idx
        } else {
            rng.random_range(0..xs.len())
        };
        let c = xs[pick];
        centers.push(c);
        for (d, &x) in d2.iter_mut().zip(xs) {
            *d = d.min((x - c).powi(2));
        }
    }
    centers
}

fn lloyd(xs: &[f64], mut centers: Vec<f64>) -> KMeansFit {
    let k = centers.len();
    let mut labels: Vec<usize> = xs.iter().map(|&x| nearest(x, &centers)).collect();
    for _ in 0..MAX_LLOYD_ITERS {
        let mut sums = vec![0.0; k];
        let mut counts = vec![0usize; k];
        for (&x, &l) in xs.iter().zip(&labels) {
            sums[l] += x;
            counts[l] += 1;
        }
        for j in 0..k {
            if counts[j] > 0 {
                centers[j] = sums[j] / counts[j] as f64;
            }
        }
        let next: Vec<usize> = xs.iter().map(|&x| nearest(x, &centers)).collect();
        if next == labels {
            break;
        }
        labels = next;
    }
    let inertia = xs.iter().zip(&labels).map(|(&x, &l)| (x - centers[l]).powi(2)).sum();
    KMeansFit { labels, centers, inertia }
}

/// Relabels so that centers ascend.
fn canonicalize(fit: KMeansFit) -> KMeansFit {
    let mut order: Vec<usize> = (0..fit.centers.len()).collect();
    order.sort_by(|&a, &b| fit.centers[a].total_cmp(&fit.centers[b]));
    let mut rank = vec![0; order.len()];
    for (new, &old) in order.iter().enumerate() {
        rank[old] = new;
    }
    KMeansFit {
        labels: fit.labels.iter().map(|&l| rank[l]).collect(),
        centers: order.iter().map(|&o| fit.centers[o]).collect(),
        inertia: fit.inertia,
    }
}

/// Lloyd's algorithm with k-means++ seeding; keeps the restart with the
/// smallest within-cluster sum of squares.
pub fn kmeans_angles<R: Rng + ?Sized>(angles: &[f64], k: usize, restarts: usize, rng: &mut R) -> Result<KMeansFit> {
    if k == 0 {
        return Err(Error::InvalidConfig("k-means needs k >= 1".into()));
    }
    if angles.len() < k {
        return Err(Error::UnderDetection {
            found: angles.len(),
            expected: k,
        });
    }
    let mut best: Option<KMeansFit> = None;
    for _ in 0..restarts.max(1) {
        let fit = lloyd(angles, seed_plus_plus(angles, k, rng));
        if best.as_ref().is_none_or(|b| fit.inertia < b.inertia) {
            best = Some(fit);
        }
    }
    Ok(canonicalize(best.expect("at least one restart")))
}

/// Angles grouped per detected user with their row-sampled steering matrices.
#[derive(Debug, Clone)]
pub struct ClusterResult {
    pub labels: Vec<usize>,
    pub centers: Vec<f64>,
    /// Ascending angles of each cluster.
    pub members: Vec<Vec<f64>>,
    /// `M x L_k` steering matrix of each cluster on the observed rows.
    pub steering: Vec<CMat>,
}

impl ClusterResult {
    pub fn n_clusters(&self) -> usize {
        self.members.len()
    }
}

pub fn build_user_estimates(
    fit: &KMeansFit,
    angles: &[f64],
    omega: &[usize],
    geometry: &ArrayGeometry,
) -> Result<ClusterResult> {
    if fit.labels.len() != angles.len() {
        return Err(Error::Dimension(format!(
            "{} labels for {} angles",
            fit.labels.len(),
            angles.len()
        )));
    }
    let k = fit.centers.len();
    let mut members = vec![Vec::new(); k];
    for (&theta, &label) in angles.iter().zip(&fit.labels) {
        if label >= k {
            return Err(Error::Dimension(format!("label {label} >= {k} clusters")));
        }
        members[label].push(theta);
    }
    let mut steering = Vec::with_capacity(k);
    for (j, m) in members.iter_mut().enumerate() {
        if m.is_empty() {
            return Err(Error::EmptyCluster(j));
        }
        m.sort_by(f64::total_cmp);
        steering.push(restrict_rows(&geometry.steering_matrix(m)?, omega));
    }
    Ok(ClusterResult {
        labels: fit.labels.clone(),
        centers: fit.centers.clone(),
        members,
        steering,
    })
}
