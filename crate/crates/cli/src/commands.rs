use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use blindsr::dualsdp::{dual_norm_on_grid, solve_dual, DualProblem};
use blindsr::oracle::grid_primal;
use blindsr::pipeline::{
    run_pipeline, run_sweep, trial_seed, write_aggregate_csv, write_trials_csv, ExperimentConfig, ExperimentReport,
    SweepAxis, TrialRecord,
};
use blindsr::scene::{generate_scene, synthesize};
use blindsr::spectrum::{default_grid_size, evaluate_spectrum, DualSpectrum};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::{config, plot, RunArgs};

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    Ok(BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let mut w = create(dir, name)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    Ok(())
}

fn write_spectrum_csv(dir: &Path, spectrum: &DualSpectrum) -> Result<()> {
    let mut w = create(dir, "spectrum.csv")?;
    writeln!(w, "theta_rad,q_norm")?;
    for (t, q) in spectrum.grid.iter().zip(&spectrum.values) {
        writeln!(w, "{t},{q}")?;
    }
    w.flush()?;
    Ok(())
}

fn summarize(report: &ExperimentReport) {
    eprintln!(
        "{:>10} {:>6} {:>6} {:>12} {:>12} {:>12} {:>12} {:>8}",
        "sweep", "trials", "failed", "nmse_theta", "nmse_alpha", "nmse_phi", "nmse_h", "dr"
    );
    for r in &report.aggregates {
        eprintln!(
            "{:>10} {:>6} {:>6} {:>12.3e} {:>12.3e} {:>12.3e} {:>12.3e} {:>8.3}",
            r.sweep_value, r.n_trials, r.n_failed, r.nmse_theta.mean, r.nmse_alpha.mean, r.nmse_phi.mean,
            r.nmse_h.mean, r.dr.mean
        );
    }
}

fn write_report(cfg: &ExperimentConfig, report: &ExperimentReport, out: &Path) -> Result<()> {
    write_trials_csv(&report.trials, create(out, "trials.csv")?)?;
    write_aggregate_csv(&report.aggregates, create(out, "aggregate.csv")?)?;
    write_json(out, "report.json", report)?;
    match cfg.sweep {
        SweepAxis::SnrDb(_) => plot::nmse_vs_snr(&report.aggregates, &out.join("nmse_vs_snr.svg"))?,
        SweepAxis::Antennas(_) => plot::dr_vs_antennas(&report.aggregates, &out.join("dr_vs_antennas.svg"))?,
        SweepAxis::None => {}
    }
    summarize(report);
    eprintln!("wrote {}", out.display());
    Ok(())
}

pub fn sweep(args: &RunArgs) -> Result<()> {
    let cfg = config::resolve(args)?;
    let report = run_sweep(&cfg)?;
    write_report(&cfg, &report, &args.out)
}

pub fn demo(args: &RunArgs) -> Result<()> {
    if args.preset.is_none() {
        bail!("demo needs --preset exp1 or --preset exp2");
    }
    sweep(args)
}

pub fn simulate(args: &RunArgs) -> Result<()> {
    let cfg = config::resolve(args)?;
    let seed = trial_seed(cfg.master_seed, 0, 0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let run = run_pipeline(&cfg, &mut rng)?;
    let out = &args.out;
    write_json(out, "config.json", &cfg)?;
    write_json(out, "scene.json", &run.scene)?;
    write_json(out, "observation.json", &run.observation)?;
    write_json(out, "estimates.json", &run.estimates)?;
    write_json(out, "metrics.json", &run.metrics)?;
    if let Some(a) = &run.angles {
        if let Some(s) = &a.spectrum {
            write_spectrum_csv(out, s)?;
        }
    }
    let record = TrialRecord {
        sweep_index: 0,
        sweep_value: cfg.scene.snr_db,
        trial: 0,
        seed,
        detected_users: run.estimates.len(),
        metrics: run.metrics.clone(),
        solver_iters: run.angles.as_ref().map_or(0, |a| a.iterations),
        converged: run.angles.as_ref().is_some_and(|a| a.converged),
        status: run.status.clone(),
        wall_ms: cfg.record_timing.then_some(run.timings.total_ms),
    };
    write_trials_csv(&[record], create(out, "trials.csv")?)?;
    let truth: Vec<_> = run.scene.active_users().map(|(u, _)| u.angles.clone()).collect();
    eprintln!("status      {:?}", run.status);
    eprintln!("true angles {truth:.4?}");
    for (k, e) in run.estimates.iter().enumerate() {
        eprintln!("user {k:<6} {:.4?}", e.angles);
    }
    eprintln!("metrics     {:?}", run.metrics);
    eprintln!("wrote {}", out.display());
    Ok(())
}

pub fn spectrum(args: &RunArgs) -> Result<()> {
    let cfg = config::resolve(args)?;
    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(cfg.master_seed, 0, 0));
    let scene = generate_scene(&cfg.scene, &mut rng)?;
    let obs = synthesize(&scene, &cfg.scene, &mut rng)?;
    let problem = DualProblem {
        y_omega: obs.y_omega.clone(),
        omega: obs.omega.clone(),
        eta: obs.eta,
        n_antennas: scene.geometry.n_antennas,
        options: cfg.solver.clone(),
    };
    let dual = solve_dual(&problem)?;
    let grid = cfg.grid_size.unwrap_or_else(|| default_grid_size(scene.geometry.n_antennas));
    let spec = evaluate_spectrum(&dual.v, &scene.geometry, grid);
    write_spectrum_csv(&args.out, &spec)?;
    eprintln!(
        "{} grid points, max {:.6}, solver {} iterations (converged: {})",
        spec.len(),
        spec.max_value(),
        dual.diagnostics.iterations,
        dual.diagnostics.converged
    );
    eprintln!("wrote {}", args.out.join("spectrum.csv").display());
    Ok(())
}

/// Per instance: dual objective, on-grid primal objective and certificate checks.
pub fn oracle(args: &RunArgs) -> Result<()> {
    let cfg = config::resolve(args)?;
    let mut w = create(&args.out, "oracle.csv")?;
    writeln!(w, "trial,seed,dual_objective,primal_objective,gap,grid_norm,min_eig,converged")?;
    let mut worst_gap = f64::NEG_INFINITY;
    for t in 0..cfg.n_trials {
        let seed = trial_seed(cfg.master_seed, 0, t);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scene = generate_scene(&cfg.scene, &mut rng)?;
        let obs = synthesize(&scene, &cfg.scene, &mut rng)?;
        let geometry = scene.geometry;
        let problem = DualProblem {
            y_omega: obs.y_omega.clone(),
            omega: obs.omega.clone(),
            eta: obs.eta,
            n_antennas: geometry.n_antennas,
            options: cfg.solver.clone(),
        };
        let dual = solve_dual(&problem)?;
        let primal = grid_primal(&obs.y_omega, &obs.omega, &geometry, obs.eta, 16 * geometry.n_antennas)?;
        let gap = dual.objective - primal.objective;
        worst_gap = worst_gap.max(gap);
        writeln!(
            w,
            "{t},{seed},{},{},{gap},{},{},{}",
            dual.objective,
            primal.objective,
            dual_norm_on_grid(&dual.v, 16 * geometry.n_antennas, &geometry),
            dual.certificate_min_eigenvalue()?,
            dual.diagnostics.converged
        )?;
    }
    w.flush()?;
    eprintln!("{} instances, worst dual - primal gap {worst_gap:.3e}", cfg.n_trials);
    eprintln!("wrote {}", args.out.join("oracle.csv").display());
    Ok(())
}
