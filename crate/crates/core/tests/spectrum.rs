mod common;

use blindsr::dualsdp::{solve_dual, DualProblem, SolverOptions};
use blindsr::linalg::CMat;
use blindsr::scene::{generate_scene, synthesize, ArrayGeometry, SceneConfig};
use blindsr::spectrum::{evaluate_spectrum, locate_peaks, q_norm};
use common::{angle_at, atoms, cn_mat, geo, positive_unit, rng};
use proptest::prelude::*;

fn noiseless_dual(y: &CMat) -> CMat {
    let n = y.nrows();
    let problem = DualProblem {
        y_omega: y.clone(),
        omega: (0..n).collect(),
        eta: 0.0,
        n_antennas: n,
        options: SolverOptions::default(),
    };
    solve_dual(&problem).unwrap().v
}

fn grid_maxima_above(values: &[f64], level: f64) -> usize {
    (0..values.len())
        .filter(|&g| {
            let left = if g == 0 { f64::NEG_INFINITY } else { values[g - 1] };
            let right = values.get(g + 1).copied().unwrap_or(f64::NEG_INFINITY);
            values[g] > level && values[g] > left && values[g] >= right
        })
        .count()
}

fn two_atom_dual(g: &ArrayGeometry, f1: f64, f2: f64) -> CMat {
    let mut r = rng(9);
    let phis = vec![positive_unit(&mut r, 3), positive_unit(&mut r, 3)];
    noiseless_dual(&atoms(g, &[angle_at(f1), angle_at(f2)], &[1.0, 2.0], &phis))
}

#[test]
fn solved_two_atom_certificate_has_two_unit_maxima() {
    let g = geo(24);
    let v = two_atom_dual(&g, 0.21, -0.13);
    let spec = evaluate_spectrum(&v, &g, 32 * 24);
    assert_eq!(grid_maxima_above(&spec.values, 0.99), 2);
}

#[test]
fn atoms_six_cells_apart_are_located() {
    let n = 32;
    let g = geo(n);
    let (f1, f2) = (0.05, 0.05 + 6.0 / n as f64);
    let v = two_atom_dual(&g, f1, f2);
    let peaks = locate_peaks(&evaluate_spectrum(&v, &g, 8192), 0.01).unwrap();
    assert_eq!(peaks.len(), 2, "{:?}", peaks.angles);
    let mut truth = [angle_at(f1), angle_at(f2)];
    truth.sort_by(f64::total_cmp);
    for (est, t) in peaks.angles.iter().zip(truth) {
        assert!((est - t).abs() < 1e-3, "{est} vs {t}");
    }
}

#[test]
fn doubling_the_grid_barely_moves_peaks() {
    let g = geo(24);
    let v = two_atom_dual(&g, 0.3, -0.02);
    let coarse = locate_peaks(&evaluate_spectrum(&v, &g, 8 * 24), 0.05).unwrap();
    let fine = locate_peaks(&evaluate_spectrum(&v, &g, 16 * 24), 0.05).unwrap();
    assert_eq!(coarse.len(), fine.len());
    let cell = std::f64::consts::PI / (8 * 24) as f64;
    for (a, b) in coarse.angles.iter().zip(&fine.angles) {
        assert!((a - b).abs() < cell);
    }
}

#[test]
fn noiseless_scenes_yield_one_peak_per_path() {
    let config = SceneConfig {
        n_active: 2,
        l_min: 2,
        l_max: 2,
        snapshots: 4,
        ..SceneConfig::for_array(32)
    };
    let trials = 50;
    let mut exact = 0;
    for seed in 0..trials {
        let mut r = rng(seed);
        let scene = generate_scene(&config, &mut r).unwrap();
        let obs = synthesize(&scene, &config, &mut r).unwrap();
        let v = noiseless_dual(&obs.y_omega);
        let peaks = locate_peaks(&evaluate_spectrum(&v, &scene.geometry, 8192), 0.05).unwrap();
        let paths: usize = scene.active_users().map(|(u, _)| u.n_paths()).sum();
        exact += usize::from(peaks.len() == paths);
    }
    assert!(exact * 100 >= 95 * trials as usize, "{exact}/{trials}");
}

proptest! {
    #[test]
    fn peaks_are_sorted_distinct_and_not_lowered(seed in any::<u64>(), n in 4usize..20) {
        let g = geo(n);
        let v = cn_mat(&mut rng(seed), n, 2);
        let spec = evaluate_spectrum(&v, &g, 16 * n);
        let top = spec.max_value();
        let scaled = v.unscale(top);
        let spec = evaluate_spectrum(&scaled, &g, 16 * n);
        let peaks = locate_peaks(&spec, 0.5).unwrap();
        prop_assert!(!peaks.is_empty());
        prop_assert!(peaks.angles.windows(2).all(|w| w[0] < w[1]));
        let grid_top = spec.max_value();
        let best = peaks.heights.iter().cloned().fold(0.0, f64::max);
        prop_assert!(best >= grid_top - 1e-12);
        for (&theta, &h) in peaks.angles.iter().zip(&peaks.heights) {
            prop_assert!(h >= 0.5);
            prop_assert!((q_norm(&scaled, &g, theta) - h).abs() < 1e-12);
        }
    }
}
