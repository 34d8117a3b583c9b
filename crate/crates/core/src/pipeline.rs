//! End-to-end trial runner and seeded Monte-Carlo sweeps.

use std::io::Write;
use std::time::Instant;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::als::{run_als, AlsReport, UserEstimate, DEFAULT_MAXITER};
use crate::cluster::{build_user_estimates, kmeans_angles, ClusterResult, DEFAULT_RESTARTS};
use crate::dualsdp::SolverOptions;
use crate::error::{Error, Result};
use crate::estimator::{AngleEstimate, AngleEstimator, EstimatorParams, EstimatorRegistry};
use crate::linalg::CVec;
use crate::metrics::{align, nmse_all, Alignment, TrialMetrics, DEFAULT_ANGLE_TOLERANCE};
use crate::scene::{generate_scene, synthesize, Observation, Scene, SceneConfig};
use crate::serde_cx;

pub const TRIAL_CSV_HEADER: &str =
    "sweep_value,trial,seed,detected_users,nmse_theta,nmse_alpha,nmse_phi,nmse_h,dr,solver_iters,converged,wall_ms";

pub const AGGREGATE_CSV_HEADER: &str = "sweep_value,n_trials,n_failed,\
mean_nmse_theta,se_nmse_theta,mean_nmse_alpha,se_nmse_alpha,mean_nmse_phi,se_nmse_phi,\
mean_nmse_h,se_nmse_h,mean_dr,se_dr,converged_fraction";

/// Parameter swept by [`run_sweep`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// A single point at the scene's own settings.
    #[default]
    None,
    SnrDb(#[serde(with = "serde_cx::extended_f64_vec")] Vec<f64>),
    Antennas(Vec<usize>),
}

/// Everything needed to reproduce an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub scene: SceneConfig,
    pub solver: SolverOptions,
    /// Name in the estimator registry.
    pub estimator: String,
    pub peak_epsilon: f64,
    pub amplitude_floor: f64,
    pub min_separation_cells: f64,
    pub grid_size: Option<usize>,
    pub kmeans_restarts: usize,
    pub als_maxiter: usize,
    /// Per-path angle tolerance (radians) used by the alignment.
    pub angle_tolerance: f64,
    pub sweep: SweepAxis,
    pub n_trials: usize,
    pub master_seed: u64,
    /// Worker threads; 0 uses every core.
    pub jobs: usize,
    /// Fill the `wall_ms` column. Off by default so output is reproducible.
    pub record_timing: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scene: SceneConfig::default(),
            solver: SolverOptions::default(),
            estimator: "atomic-dual".into(),
            peak_epsilon: EstimatorParams::default().peak_epsilon,
            amplitude_floor: EstimatorParams::default().amplitude_floor,
            min_separation_cells: EstimatorParams::default().min_separation_cells,
            grid_size: None,
            kmeans_restarts: DEFAULT_RESTARTS,
            als_maxiter: DEFAULT_MAXITER,
            angle_tolerance: DEFAULT_ANGLE_TOLERANCE,
            sweep: SweepAxis::None,
            n_trials: 1,
            master_seed: 0,
            jobs: 0,
            record_timing: false,
        }
    }
}

impl ExperimentConfig {
    /// First experiment: N=64, M=30, K=10, K_a=3, T=2, L_max=3, 10 dB, 50 trials.
    pub fn exp1() -> Self {
        let scene = SceneConfig {
            n_observed: 30,
            n_users: 10,
            n_active: 3,
            snapshots: 2,
            l_max: 3,
            snr_db: 10.0,
            ..SceneConfig::for_array(64)
        };
        Self {
            scene,
            n_trials: 50,
            ..Self::default()
        }
    }

    /// Second experiment: N=M=64, K=40, K_a=12, T=10, L_max=3, SNR 0..20 dB.
    pub fn exp2() -> Self {
        let scene = SceneConfig {
            n_users: 40,
            n_active: 12,
            snapshots: 10,
            l_max: 3,
            // twelve clusters only fit with tighter clusters four cells apart
            angular_spread: 0.05,
            min_center_separation: 4.0 / (64.0 * 0.5),
            ..SceneConfig::for_array(64)
        };
        Self {
            scene,
            sweep: SweepAxis::SnrDb(vec![0.0, 5.0, 10.0, 15.0, 20.0]),
            n_trials: 50,
            ..Self::default()
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "exp1" => Ok(Self::exp1()),
            "exp2" => Ok(Self::exp2()),
            other => Err(Error::InvalidConfig(format!("unknown preset `{other}` (expected exp1 or exp2)"))),
        }
    }

    pub fn estimator_params(&self) -> EstimatorParams {
        EstimatorParams {
            solver: self.solver.clone(),
            grid_size: self.grid_size,
            peak_epsilon: self.peak_epsilon,
            amplitude_floor: self.amplitude_floor,
            min_separation_cells: self.min_separation_cells,
        }
    }

    /// Values of the sweep axis, or the scene SNR when there is no sweep.
    pub fn sweep_values(&self) -> Vec<f64> {
        match &self.sweep {
            SweepAxis::None => vec![self.scene.snr_db],
            SweepAxis::SnrDb(v) => v.clone(),
            SweepAxis::Antennas(v) => v.iter().map(|&n| n as f64).collect(),
        }
    }

    /// Scene settings at one sweep point. When the base config observes the
    /// whole array, an antenna sweep keeps observing the whole array.
    pub fn scene_at(&self, index: usize) -> SceneConfig {
        let mut scene = self.scene.clone();
        match &self.sweep {
            SweepAxis::None => {}
            SweepAxis::SnrDb(v) => scene.snr_db = v[index],
            SweepAxis::Antennas(v) => {
                let n = v[index];
                scene.n_observed = if self.scene.n_observed == self.scene.n_antennas {
                    n
                } else {
                    self.scene.n_observed.min(n)
                };
                scene.n_antennas = n;
            }
        }
        scene
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n_trials == 0 {
            return bad("n_trials must be >= 1".into());
        }
        if self.kmeans_restarts == 0 || self.als_maxiter == 0 {
            return bad("kmeans_restarts and als_maxiter must be >= 1".into());
        }
        if !(self.peak_epsilon > 0.0 && self.peak_epsilon < 1.0) {
            return bad(format!("peak_epsilon {} outside (0, 1)", self.peak_epsilon));
        }
        if !(self.amplitude_floor >= 0.0) || !(self.min_separation_cells >= 0.0) {
            return bad("amplitude_floor and min_separation_cells must be >= 0".into());
        }
        if !(self.angle_tolerance > 0.0) {
            return bad("angle_tolerance must be positive".into());
        }
        self.solver.validate()?;
        let values = self.sweep_values();
        if values.is_empty() {
            return bad("sweep axis is empty".into());
        }
        if values.windows(2).any(|w| !(w[1] > w[0])) {
            return bad("sweep values must be strictly increasing".into());
        }
        for i in 0..values.len() {
            self.scene_at(i).validate()?;
        }
        Ok(())
    }
}

/// Why a trial's error metrics are undefined, if they are.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialStatus {
    Ok,
    NotConverged,
    UnderDetected { found: usize, expected: usize },
    Numerical(String),
}

impl TrialStatus {
    pub fn is_ok(&self) -> bool {
        matches!(self, TrialStatus::Ok)
    }
}

/// Milliseconds spent per stage.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StageTimings {
    pub scene_ms: f64,
    pub localize_ms: f64,
    pub cluster_ms: f64,
    pub als_ms: f64,
    pub metrics_ms: f64,
    pub total_ms: f64,
}

impl StageTimings {
    pub fn stage_sum(&self) -> f64 {
        self.scene_ms + self.localize_ms + self.cluster_ms + self.als_ms + self.metrics_ms
    }

    fn accumulate(&mut self, other: &StageTimings) {
        self.scene_ms += other.scene_ms;
        self.localize_ms += other.localize_ms;
        self.cluster_ms += other.cluster_ms;
        self.als_ms += other.als_ms;
        self.metrics_ms += other.metrics_ms;
        self.total_ms += other.total_ms;
    }
}

/// All artifacts of one trial.
#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub scene: Scene,
    pub observation: Observation,
    pub angles: Option<AngleEstimate>,
    pub clusters: Option<ClusterResult>,
    pub estimates: Vec<UserEstimate>,
    pub als: Option<AlsReport>,
    pub alignment: Option<Alignment>,
    pub metrics: TrialMetrics,
    pub status: TrialStatus,
    pub timings: StageTimings,
}

fn elapsed_ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Stand-ins carrying only angles, so detection can still be scored.
fn angle_only_estimates(clusters: &ClusterResult, snapshots: usize, n_antennas: usize) -> Vec<UserEstimate> {
    clusters
        .members
        .iter()
        .map(|m| UserEstimate {
            angles: m.clone(),
            c: CVec::zeros(m.len()),
            phi: CVec::zeros(snapshots),
            alpha: CVec::zeros(m.len()),
            h: CVec::zeros(n_antennas),
            flagged: true,
        })
        .collect()
}

/// Runs the full chain on `config.scene` with the configured estimator.
pub fn run_pipeline<R: Rng + ?Sized>(config: &ExperimentConfig, rng: &mut R) -> Result<PipelineRun> {
    let estimator = EstimatorRegistry::with_builtin().get(&config.estimator)?;
    run_pipeline_with(config, &config.scene, estimator.as_ref(), rng)
}

/// Scene generation, angle localization, clustering, ALS and scoring.
///
/// Only configuration problems are errors. Numerical trouble downstream of
/// the scene yields a run whose status is not [`TrialStatus::Ok`]: its NMSEs
/// are undefined while detection is still scored on whatever was found.
pub fn run_pipeline_with<R: Rng + ?Sized>(
    config: &ExperimentConfig,
    scene_config: &SceneConfig,
    estimator: &dyn AngleEstimator,
    rng: &mut R,
) -> Result<PipelineRun> {
    let start = Instant::now();
    let mut timings = StageTimings::default();

    let t = Instant::now();
    let scene = generate_scene(scene_config, rng)?;
    let observation = synthesize(&scene, scene_config, rng)?;
    let geometry = scene.geometry;
    let k_active = scene.n_active();
    timings.scene_ms = elapsed_ms(t);

    let mut run = PipelineRun {
        scene,
        observation,
        angles: None,
        clusters: None,
        estimates: Vec::new(),
        als: None,
        alignment: None,
        metrics: TrialMetrics::failed(k_active),
        status: TrialStatus::Ok,
        timings,
    };
    let finish = |mut run: PipelineRun| {
        run.timings.total_ms = elapsed_ms(start);
        run
    };

    let t = Instant::now();
    let estimate = estimator.estimate(&run.observation, &geometry, &config.estimator_params());
    run.timings.localize_ms = elapsed_ms(t);
    let estimate = match estimate {
        Ok(e) => e,
        Err(e) => {
            run.status = TrialStatus::Numerical(e.to_string());
            return Ok(finish(run));
        }
    };
    if !estimate.converged {
        run.status = TrialStatus::NotConverged;
    }
    let found = estimate.angles.len();
    let k = k_active.min(found);
    if found < k_active {
        run.status = TrialStatus::UnderDetected {
            found,
            expected: k_active,
        };
    }
    let angles = estimate.angles.clone();
    run.angles = Some(estimate);
    if k == 0 {
        return Ok(finish(run));
    }

    let t = Instant::now();
    let clusters = kmeans_angles(&angles, k, config.kmeans_restarts, rng)
        .and_then(|fit| build_user_estimates(&fit, &angles, &run.observation.omega, &geometry));
    run.timings.cluster_ms = elapsed_ms(t);
    let clusters = match clusters {
        Ok(c) => c,
        Err(e) => {
            run.status = TrialStatus::Numerical(e.to_string());
            return Ok(finish(run));
        }
    };

    let t = Instant::now();
    match run_als(&run.observation.y_omega, &clusters, &geometry, config.als_maxiter, rng) {
        Ok((estimates, report)) => {
            run.estimates = estimates;
            run.als = Some(report);
        }
        Err(e) => {
            run.status = TrialStatus::Numerical(e.to_string());
            run.estimates = angle_only_estimates(&clusters, run.observation.snapshots(), geometry.n_antennas);
        }
    }
    run.clusters = Some(clusters);
    run.timings.als_ms = elapsed_ms(t);

    let t = Instant::now();
    let alignment = align(&run.scene, &run.estimates, config.angle_tolerance);
    let metrics = nmse_all(&run.scene, &run.estimates, &alignment);
    run.metrics = if run.status.is_ok() {
        metrics
    } else {
        TrialMetrics {
            detection_rate: metrics.detection_rate,
            misses: metrics.misses,
            ..TrialMetrics::failed(k_active)
        }
    };
    run.alignment = Some(alignment);
    run.timings.metrics_ms = elapsed_ms(t);
    Ok(finish(run))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trial `trial` at sweep point `sweep_index`.
pub fn trial_seed(master_seed: u64, sweep_index: usize, trial: usize) -> u64 {
    let h = splitmix64(master_seed);
    let h = splitmix64(h ^ (sweep_index as u64).wrapping_mul(0xD6E8_FEB8_6659_FD93));
    splitmix64(h ^ (trial as u64).wrapping_mul(0xA076_1D64_78BD_642F))
}

/// One row of the per-trial table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub sweep_index: usize,
    #[serde(with = "serde_cx::extended_f64")]
    pub sweep_value: f64,
    pub trial: usize,
    pub seed: u64,
    pub detected_users: usize,
    pub metrics: TrialMetrics,
    pub solver_iters: usize,
    pub converged: bool,
    pub status: TrialStatus,
    pub wall_ms: Option<f64>,
}

/// Mean and standard error of one metric at one sweep point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
    pub count: usize,
}

/// Mean and standard error of the mean (sample standard deviation over
/// `sqrt(n)`). Empty input gives NaN; a single value has zero error.
pub fn mean_se(values: &[f64]) -> MeanSe {
    let n = values.len();
    if n == 0 {
        return MeanSe {
            mean: f64::NAN,
            se: f64::NAN,
            count: 0,
        };
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let se = if n > 1 {
        let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    } else {
        0.0
    };
    MeanSe { mean, se, count: n }
}

/// Aggregates at one sweep point. NMSE statistics skip failed trials;
/// detection statistics include every trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    #[serde(with = "serde_cx::extended_f64")]
    pub sweep_value: f64,
    pub n_trials: usize,
    pub n_failed: usize,
    pub nmse_theta: MeanSe,
    pub nmse_alpha: MeanSe,
    pub nmse_phi: MeanSe,
    pub nmse_h: MeanSe,
    pub dr: MeanSe,
    pub converged_fraction: f64,
}

impl AggregateRow {
    pub fn from_trials(sweep_value: f64, rows: &[&TrialRecord]) -> Self {
        let pick = |f: fn(&TrialMetrics) -> Option<f64>| -> MeanSe {
            let vals: Vec<f64> = rows.iter().filter_map(|r| f(&r.metrics)).collect();
            mean_se(&vals)
        };
        let dr: Vec<f64> = rows.iter().map(|r| r.metrics.detection_rate).collect();
        let n = rows.len();
        Self {
            sweep_value,
            n_trials: n,
            n_failed: rows.iter().filter(|r| r.metrics.nmse_theta.is_none()).count(),
            nmse_theta: pick(|m| m.nmse_theta),
            nmse_alpha: pick(|m| m.nmse_alpha),
            nmse_phi: pick(|m| m.nmse_phi),
            nmse_h: pick(|m| m.nmse_h),
            dr: mean_se(&dr),
            converged_fraction: rows.iter().filter(|r| r.converged).count() as f64 / n.max(1) as f64,
        }
    }
}

/// Per-trial rows, per-point aggregates, the config that produced them and
/// the summed stage timings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub trials: Vec<TrialRecord>,
    pub aggregates: Vec<AggregateRow>,
    pub timings: StageTimings,
}

fn record_from_run(
    config: &ExperimentConfig,
    sweep_index: usize,
    sweep_value: f64,
    trial: usize,
    seed: u64,
    run: &PipelineRun,
) -> TrialRecord {
    let (solver_iters, converged) = run.angles.as_ref().map_or((0, false), |a| (a.iterations, a.converged));
    TrialRecord {
        sweep_index,
        sweep_value,
        trial,
        seed,
        detected_users: run.estimates.len(),
        metrics: run.metrics.clone(),
        solver_iters,
        converged,
        status: run.status.clone(),
        wall_ms: config.record_timing.then_some(run.timings.total_ms),
    }
}

/// Runs `n_trials` seeded trials per sweep point on up to `jobs` threads.
///
/// Rows come back sorted by (sweep index, trial), so the report does not
/// depend on the degree of parallelism.
pub fn run_sweep(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let estimator = EstimatorRegistry::with_builtin().get(&config.estimator)?;
    let values = config.sweep_values();
    let scenes: Vec<SceneConfig> = (0..values.len()).map(|i| config.scene_at(i)).collect();
    let jobs: Vec<(usize, usize)> = (0..values.len())
        .flat_map(|s| (0..config.n_trials).map(move |t| (s, t)))
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    let results: Vec<Result<(TrialRecord, StageTimings)>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(s, t)| {
                let seed = trial_seed(config.master_seed, s, t);
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let run = run_pipeline_with(config, &scenes[s], estimator.as_ref(), &mut rng)?;
                Ok((record_from_run(config, s, values[s], t, seed, &run), run.timings))
            })
            .collect()
    });

    let mut trials = Vec::with_capacity(results.len());
    let mut timings = StageTimings::default();
    for r in results {
        let (rec, tm) = r?;
        timings.accumulate(&tm);
        trials.push(rec);
    }
    trials.sort_by_key(|r| (r.sweep_index, r.trial));
    let aggregates = values
        .iter()
        .enumerate()
        .map(|(s, &v)| {
            let rows: Vec<&TrialRecord> = trials.iter().filter(|r| r.sweep_index == s).collect();
            AggregateRow::from_trials(v, &rows)
        })
        .collect();
    Ok(ExperimentReport {
        config: config.clone(),
        trials,
        aggregates,
        timings,
    })
}

/// Shortest decimal that parses back to the same value; `inf` for infinities.
pub fn format_value(x: f64) -> String {
    if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else if x.is_nan() {
        "nan".into()
    } else {
        format!("{x}")
    }
}

fn format_metric(x: Option<f64>) -> String {
    x.map_or_else(|| "inf".into(), |v| format!("{v:e}"))
}

/// Parses a cell written by [`write_trials_csv`]; the `inf` sentinel is `None`.
pub fn parse_metric(cell: &str) -> Option<f64> {
    match cell {
        "inf" => None,
        s => s.parse().ok(),
    }
}

pub fn write_trials_csv<W: Write>(trials: &[TrialRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::InvalidConfig(format!("writing CSV: {e}"));
    w.write_record(TRIAL_CSV_HEADER.split(',')).map_err(io)?;
    for r in trials {
        let m = &r.metrics;
        w.write_record([
            format_value(r.sweep_value),
            r.trial.to_string(),
            r.seed.to_string(),
            r.detected_users.to_string(),
            format_metric(m.nmse_theta),
            format_metric(m.nmse_alpha),
            format_metric(m.nmse_phi),
            format_metric(m.nmse_h),
            format_value(m.detection_rate),
            r.solver_iters.to_string(),
            r.converged.to_string(),
            r.wall_ms.map_or_else(String::new, |ms| format!("{ms:.3}")),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::InvalidConfig(format!("writing CSV: {e}")))?;
    Ok(())
}

pub fn write_aggregate_csv<W: Write>(rows: &[AggregateRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::InvalidConfig(format!("writing CSV: {e}"));
    w.write_record(AGGREGATE_CSV_HEADER.split(',')).map_err(io)?;
    for r in rows {
        let mut rec = vec![format_value(r.sweep_value), r.n_trials.to_string(), r.n_failed.to_string()];
        for ms in [&r.nmse_theta, &r.nmse_alpha, &r.nmse_phi, &r.nmse_h, &r.dr] {
            rec.push(format_value(ms.mean));
            rec.push(format_value(ms.se));
        }
        rec.push(format_value(r.converged_fraction));
        w.write_record(&rec).map_err(io)?;
    }
    w.flush().map_err(|e| Error::InvalidConfig(format!("writing CSV: {e}")))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> ExperimentConfig {
        let scene = SceneConfig {
            n_users: 4,
            n_active: 1,
            snapshots: 2,
            l_min: 1,
            l_max: 1,
            ..SceneConfig::for_array(16)
        };
        ExperimentConfig {
            scene,
            n_trials: 3,
            kmeans_restarts: 5,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn trial_seeds_differ_and_repeat() {
        assert_eq!(trial_seed(7, 1, 2), trial_seed(7, 1, 2));
        assert_ne!(trial_seed(7, 1, 2), trial_seed(7, 2, 1));
        assert_ne!(trial_seed(7, 0, 0), trial_seed(8, 0, 0));
    }

    #[test]
    fn mean_se_basics() {
        let m = mean_se(&[1.0, 2.0, 3.0]);
        assert_eq!(m.mean, 2.0);
        assert!((m.se - (1.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_se(&[4.0]).se, 0.0);
        assert!(mean_se(&[]).mean.is_nan());
    }

    #[test]
    fn presets_validate() {
        ExperimentConfig::exp1().validate().unwrap();
        ExperimentConfig::exp2().validate().unwrap();
        assert!(ExperimentConfig::preset("exp3").is_err());
    }

    #[test]
    fn non_increasing_sweep_rejected() {
        let cfg = ExperimentConfig {
            sweep: SweepAxis::SnrDb(vec![10.0, 5.0]),
            ..small_config()
        };
        assert!(matches!(cfg.validate(), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn antenna_sweep_tracks_full_observation() {
        let cfg = ExperimentConfig {
            sweep: SweepAxis::Antennas(vec![16, 24]),
            ..small_config()
        };
        let s = cfg.scene_at(1);
        assert_eq!((s.n_antennas, s.n_observed), (24, 24));
    }

    #[test]
    fn config_round_trips_through_json() {
        let mut cfg = ExperimentConfig::exp2();
        cfg.sweep = SweepAxis::SnrDb(vec![0.0, f64::INFINITY]);
        let text = serde_json::to_string(&cfg).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
        let partial: ExperimentConfig = serde_json::from_str(r#"{"n_trials": 4}"#).unwrap();
        assert_eq!(partial.n_trials, 4);
        assert_eq!(partial.estimator, "atomic-dual");
    }

    #[test]
    fn csv_header_is_exact() {
        let mut buf = Vec::new();
        write_trials_csv(&[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), format!("{TRIAL_CSV_HEADER}\n"));
    }

    #[test]
    fn metric_cells_round_trip() {
        for x in [0.1, 1e-7, 3.0e-300, 0.123456789012345] {
            assert_eq!(parse_metric(&format_metric(Some(x))), Some(x));
        }
        assert_eq!(parse_metric(&format_metric(None)), None);
    }

    #[test]
    fn noiseless_single_atom_is_recovered() {
        let cfg = small_config();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let run = run_pipeline(&cfg, &mut rng).unwrap();
        assert!(run.status.is_ok(), "{:?}", run.status);
        assert_eq!(run.metrics.detection_rate, 1.0);
        assert!(run.metrics.nmse_theta.unwrap() <= 1e-4);
        assert!(run.metrics.nmse_phi.unwrap() <= 1e-4);
    }

    #[test]
    fn sweep_is_sorted_and_reproducible() {
        let cfg = ExperimentConfig {
            sweep: SweepAxis::SnrDb(vec![10.0, 20.0]),
            jobs: 2,
            ..small_config()
        };
        let a = run_sweep(&cfg).unwrap();
        let b = run_sweep(&ExperimentConfig { jobs: 1, ..cfg.clone() }).unwrap();
        assert_eq!(a.trials, b.trials);
        assert_eq!(a.aggregates.len(), 2);
        let keys: Vec<_> = a.trials.iter().map(|r| (r.sweep_index, r.trial)).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
    }
}
