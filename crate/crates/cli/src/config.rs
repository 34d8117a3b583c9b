//! Layered experiment configuration: preset, then JSON file, then flags.

use std::fs;

use anyhow::{Context, Result};
use blindsr::pipeline::{ExperimentConfig, SweepAxis};
use serde_json::Value;

use crate::RunArgs;

/// Recursively overwrites `base` with the fields present in `patch`.
fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

pub fn resolve(args: &RunArgs) -> Result<ExperimentConfig> {
    let base = match args.preset {
        Some(p) => ExperimentConfig::preset(p.name())?,
        None => ExperimentConfig::default(),
    };
    let mut cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let patch: Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
            let mut value = serde_json::to_value(&base)?;
            merge(&mut value, patch);
            serde_json::from_value(value).with_context(|| format!("invalid config {}", path.display()))?
        }
        None => base,
    };
    if let Some(seed) = args.seed {
        cfg.master_seed = seed;
    }
    if let Some(n) = args.trials {
        cfg.n_trials = n;
    }
    if let Some(j) = args.jobs {
        cfg.jobs = j;
    }
    if let Some(name) = &args.estimator {
        cfg.estimator = name.clone();
    }
    if args.timing {
        cfg.record_timing = true;
    }
    match (&args.snr, &args.antennas) {
        (Some(_), Some(_)) => anyhow::bail!("--snr and --antennas cannot be combined"),
        (Some(v), None) if v.len() == 1 => {
            cfg.scene.snr_db = v[0];
            if matches!(cfg.sweep, SweepAxis::SnrDb(_)) {
                cfg.sweep = SweepAxis::None;
            }
        }
        (Some(v), None) => cfg.sweep = SweepAxis::SnrDb(v.clone()),
        (None, Some(v)) => cfg.sweep = SweepAxis::Antennas(v.clone()),
        (None, None) => {}
    }
    cfg.validate()?;
    Ok(cfg)
}
