//! Interchangeable angle-localization strategies, registered by name.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dualsdp::{solve_dual, DualProblem, DualSolution, SolverOptions};
use crate::error::{Error, Result};
use crate::linalg::{lstsq_min_norm, CMat};
use crate::oracle::grid_primal;
use crate::scene::{ArrayGeometry, Observation};
use crate::spectrum::{default_grid_size, evaluate_spectrum, locate_peaks, DualSpectrum};

pub const DEFAULT_AMPLITUDE_FLOOR: f64 = 2.0;
pub const DEFAULT_MIN_SEPARATION_CELLS: f64 = 1.0;

/// Knobs shared by every estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorParams {
    pub solver: SolverOptions,
    /// Spectrum grid; `None` selects [`default_grid_size`].
    pub grid_size: Option<usize>,
    /// Peaks must reach `1 - peak_epsilon`.
    pub peak_epsilon: f64,
    /// Peaks whose recovered atom amplitude falls below this multiple of the
    /// per-entry noise level `eta / sqrt(M T)` are dropped; 0 keeps all.
    pub amplitude_floor: f64,
    /// Peaks closer than this many resolution cells (`1/N` in spatial
    /// frequency) to a stronger peak are dropped; 0 keeps all.
    pub min_separation_cells: f64,
}

impl Default for EstimatorParams {
    fn default() -> Self {
        Self {
            solver: SolverOptions::default(),
            grid_size: None,
            peak_epsilon: 0.05,
            amplitude_floor: DEFAULT_AMPLITUDE_FLOOR,
            min_separation_cells: DEFAULT_MIN_SEPARATION_CELLS,
        }
    }
}

/// Located angles plus whatever solver state produced them.
#[derive(Debug, Clone)]
pub struct AngleEstimate {
    pub angles: Vec<f64>,
    pub heights: Vec<f64>,
    /// Atom amplitude at each angle, when the estimator provides one.
    pub amplitudes: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub dual: Option<DualSolution>,
    pub spectrum: Option<DualSpectrum>,
}

/// Per-entry noise standard deviation implied by the noise-ball radius.
pub fn noise_level(obs: &Observation) -> f64 {
    let entries = obs.y_omega.nrows() * obs.y_omega.ncols();
    if entries == 0 {
        0.0
    } else {
        obs.eta / (entries as f64).sqrt()
    }
}

/// Row norms of the least-squares coefficients of `signal` (full array)
/// on the steering vectors at `angles`.
pub fn atom_amplitudes(signal: &CMat, geometry: &ArrayGeometry, angles: &[f64]) -> Result<Vec<f64>> {
    if angles.is_empty() {
        return Ok(Vec::new());
    }
    let coef = lstsq_min_norm(&geometry.steering_matrix(angles)?, signal)?;
    Ok((0..coef.nrows()).map(|i| coef.row(i).norm()).collect())
}

/// Indices (ascending) of the peaks kept after greedy resolution pruning:
/// peaks are visited by decreasing matched-filter response `||signal^H a||`
/// and kept when at least `min_cells / N` away in spatial frequency from
/// every peak already kept.
pub fn resolve_peaks(signal: &CMat, geometry: &ArrayGeometry, angles: &[f64], min_cells: f64) -> Result<Vec<usize>> {
    let min_gap = min_cells / geometry.n_antennas as f64;
    let freqs: Vec<f64> = angles.iter().map(|&t| geometry.spatial_frequency(t)).collect();
    let mut response = Vec::with_capacity(angles.len());
    for &t in angles {
        response.push((signal.adjoint() * geometry.steering_vector(t)?).norm());
    }
    let mut order: Vec<usize> = (0..angles.len()).collect();
    order.sort_by(|&a, &b| response[b].total_cmp(&response[a]).then(a.cmp(&b)));
    let mut kept: Vec<usize> = Vec::new();
    for i in order {
        let clear = kept.iter().all(|&j| {
            let d = (freqs[i] - freqs[j]).rem_euclid(1.0);
            d.min(1.0 - d) >= min_gap
        });
        if clear {
            kept.push(i);
        }
    }
    kept.sort_unstable();
    Ok(kept)
}

pub trait AngleEstimator: Send + Sync {
    fn name(&self) -> &'static str;

    fn description(&self) -> &'static str;

    fn estimate(&self, obs: &Observation, geometry: &ArrayGeometry, params: &EstimatorParams) -> Result<AngleEstimate>;
}

/// Dual atomic-norm certificate solved by ADMM, peaks of `||V^H a(theta)||`.
pub struct AtomicDual;

impl AngleEstimator for AtomicDual {
    fn name(&self) -> &'static str {
        "atomic-dual"
    }

    fn description(&self) -> &'static str {
        "off-grid: ADMM on the dual atomic-norm SDP, peaks of the dual polynomial"
    }

    fn estimate(&self, obs: &Observation, geometry: &ArrayGeometry, params: &EstimatorParams) -> Result<AngleEstimate> {
        let problem = DualProblem {
            y_omega: obs.y_omega.clone(),
            omega: obs.omega.clone(),
            eta: obs.eta,
            n_antennas: geometry.n_antennas,
            options: params.solver.clone(),
        };
        let dual = solve_dual(&problem)?;
        let grid = params.grid_size.unwrap_or_else(|| default_grid_size(geometry.n_antennas));
        let spectrum = evaluate_spectrum(&dual.v, geometry, grid);
        let peaks = locate_peaks(&spectrum, params.peak_epsilon)?;
        let resolved = resolve_peaks(&dual.primal, geometry, &peaks.angles, params.min_separation_cells)?;
        let angles: Vec<f64> = resolved.iter().map(|&i| peaks.angles[i]).collect();
        let amplitudes = atom_amplitudes(&dual.primal, geometry, &angles)?;
        let floor = params.amplitude_floor * noise_level(obs);
        let keep: Vec<usize> = (0..amplitudes.len()).filter(|&i| amplitudes[i] >= floor).collect();
        Ok(AngleEstimate {
            angles: keep.iter().map(|&i| angles[i]).collect(),
            heights: keep.iter().map(|&i| peaks.heights[resolved[i]]).collect(),
            amplitudes: keep.iter().map(|&i| amplitudes[i]).collect(),
            iterations: dual.diagnostics.iterations,
            converged: dual.diagnostics.converged,
            dual: Some(dual),
            spectrum: Some(spectrum),
        })
    }
}

/// On-grid group lasso; local maxima of the per-angle coefficient norms.
pub struct GridLasso;

impl AngleEstimator for GridLasso {
    fn name(&self) -> &'static str {
        "grid-lasso"
    }

    fn description(&self) -> &'static str {
        "on-grid: group-sparse basis pursuit over a 16N-point frequency grid"
    }

    fn estimate(&self, obs: &Observation, geometry: &ArrayGeometry, params: &EstimatorParams) -> Result<AngleEstimate> {
        let grid = params.grid_size.unwrap_or(16 * geometry.n_antennas).min(64 * geometry.n_antennas);
        let sol = grid_primal(&obs.y_omega, &obs.omega, geometry, obs.eta, grid)?;
        let norms: Vec<f64> = (0..sol.grid.len()).map(|g| sol.coefficients.row(g).norm()).collect();
        let top = norms.iter().cloned().fold(0.0, f64::max);
        let mut angles = Vec::new();
        let mut heights = Vec::new();
        if top > 0.0 {
            for g in 0..norms.len() {
                let left = if g == 0 { 0.0 } else { norms[g - 1] };
                let right = norms.get(g + 1).copied().unwrap_or(0.0);
                let h = norms[g] / top;
                if h >= params.peak_epsilon && norms[g] > left && norms[g] >= right {
                    angles.push(sol.grid[g]);
                    heights.push(h);
                }
            }
        }
        Ok(AngleEstimate {
            angles,
            heights,
            amplitudes: Vec::new(),
            iterations: sol.iterations,
            converged: sol.converged,
            dual: None,
            spectrum: None,
        })
    }
}

/// Name-indexed collection of estimators.
#[derive(Clone, Default)]
pub struct EstimatorRegistry {
    entries: BTreeMap<String, Arc<dyn AngleEstimator>>,
}

impl EstimatorRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registry holding every estimator shipped with the crate.
    pub fn with_builtin() -> Self {
        let mut reg = Self::new();
        reg.register(AtomicDual);
        reg.register(GridLasso);
        reg
    }

    pub fn register<E: AngleEstimator + 'static>(&mut self, estimator: E) {
        self.entries.insert(estimator.name().to_string(), Arc::new(estimator));
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn AngleEstimator>> {
        self.entries
            .get(name)
            .cloned()
            .ok_or_else(|| Error::UnknownEstimator(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_names() {
        let reg = EstimatorRegistry::with_builtin();
        assert_eq!(reg.names().collect::<Vec<_>>(), vec!["atomic-dual", "grid-lasso"]);
        assert_eq!(reg.get("atomic-dual").unwrap().name(), "atomic-dual");
        assert!(matches!(reg.get("music"), Err(Error::UnknownEstimator(_))));
    }

    #[test]
    fn resolution_pruning_keeps_the_stronger_of_close_peaks() {
        let g = ArrayGeometry::half_wavelength(16).unwrap();
        let angles = [1.0, 1.02, 2.0];
        let a = g.steering_matrix(&[1.0, 2.0]).unwrap();
        let signal = a * CMat::from_row_slice(2, 1, &[crate::linalg::c(2.0, 0.0), crate::linalg::c(1.0, 0.0)]);
        assert_eq!(resolve_peaks(&signal, &g, &angles, 1.0).unwrap(), vec![0, 2]);
        assert_eq!(resolve_peaks(&signal, &g, &angles, 0.0).unwrap(), vec![0, 1, 2]);
        let amps = atom_amplitudes(&signal, &g, &[1.0, 2.0]).unwrap();
        assert!((amps[0] - 2.0).abs() < 1e-10 && (amps[1] - 1.0).abs() < 1e-10);
    }
}
