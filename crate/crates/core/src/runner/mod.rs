//! Replications, statistics, scenario sweeps and report rendering.

mod report;
pub mod stats;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::elements::{CompiledModel, RunOptions};
use crate::error::RunError;
use crate::model::{DurationNoise, ElementKind, ModelDef, ScenarioOverlay};
use crate::sim::RunResult;
use crate::stochastics::{derive_stream, Distribution};

pub use report::{render, render_sweep, ReportFormat, REPORT_CSV_HEADER, REPORT_SCHEMA};

/// Seed of replication `index` under `master_seed`.
pub fn replication_seed(master_seed: u64, index: usize) -> u64 {
    derive_stream(master_seed, &format!("rep.{index}")).next_u64()
}

/// Applies an overlay to a model: resource counts, submodel switches and
/// optional duration noise. Submodels stay unexpanded.
pub fn prepare(model: &ModelDef, overlay: &ScenarioOverlay) -> Result<ModelDef, RunError> {
    let err = |message: String| RunError::Scenario {
        scenario: overlay.name.clone(),
        message,
    };
    let mut m = model.clone();
    for (name, &k) in &overlay.resource_overrides {
        match m.resource_mut(name) {
            Some(r) => r.servers = k,
            None => return Err(err(format!("unknown resource `{name}`"))),
        }
    }
    for (name, &on) in &overlay.submodel_toggles {
        match m.submodel_mut(name) {
            Some(s) => s.enabled = on,
            None => return Err(err(format!("unknown submodel `{name}`"))),
        }
    }
    if overlay.duration_noise == DurationNoise::Triangular10 {
        for e in &mut m.elements {
            if let ElementKind::Task { duration, .. } = &mut e.kind {
                if let Distribution::Constant { value } = *duration {
                    if value > 0.0 {
                        *duration = Distribution::Triangular {
                            low: 0.9 * value,
                            mode: value,
                            high: 1.1 * value,
                        };
                    }
                }
            }
        }
    }
    Ok(m)
}

/// Replication statistics for one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub scenario: String,
    pub replications: u32,
    pub master_seed: u64,
    pub mean_days: f64,
    pub std_days: f64,
    pub ci95_halfwidth_days: f64,
    pub min_days: f64,
    pub max_days: f64,
    pub production_rate_m_per_day: f64,
    pub berth_length_m: f64,
    /// Mean busy fraction per resource.
    pub utilization: BTreeMap<String, f64>,
    /// Mean count per replication for every counter tally, including
    /// disruption events.
    pub counters: BTreeMap<String, f64>,
    pub comment: String,
}

/// Runs `reps` replications of an already compiled model in parallel;
/// results come back in replication order.
pub fn run_replications(cm: &CompiledModel, master_seed: u64, reps: u32) -> Result<Vec<RunResult>, RunError> {
    (0..reps as usize)
        .into_par_iter()
        .map(|i| {
            cm.run(replication_seed(master_seed, i), &RunOptions::default())
                .map_err(|source| RunError::Replication { replication: i, source })
        })
        .collect()
}

pub fn summarize_runs(
    overlay_name: &str,
    comment: &str,
    master_seed: u64,
    length_m: f64,
    runs: &[RunResult],
) -> ScenarioReport {
    let days: Vec<f64> = runs.iter().map(|r| r.end_time).collect();
    let s = stats::summarize(&days);
    let n = runs.len().max(1) as f64;
    let mut utilization = BTreeMap::new();
    let mut counters = BTreeMap::new();
    for r in runs {
        for (k, v) in &r.utilization {
            *utilization.entry(k.clone()).or_insert(0.0) += v / n;
        }
        for (k, v) in &r.counters {
            *counters.entry(k.clone()).or_insert(0.0) += *v as f64 / n;
        }
    }
    ScenarioReport {
        scenario: overlay_name.to_string(),
        replications: runs.len() as u32,
        master_seed,
        mean_days: s.mean,
        std_days: s.std,
        ci95_halfwidth_days: s.ci95_halfwidth,
        min_days: s.min,
        max_days: s.max,
        production_rate_m_per_day: length_m / s.mean,
        berth_length_m: length_m,
        utilization,
        counters,
        comment: comment.to_string(),
    }
}

/// Runs the overlay's replications with per-replication derived seeds.
pub fn replicate(model: &ModelDef, overlay: &ScenarioOverlay) -> Result<ScenarioReport, RunError> {
    let m = prepare(model, overlay)?;
    let cm = CompiledModel::new(&m).map_err(|e| RunError::Invalid(e.to_string()))?;
    let runs = run_replications(&cm, overlay.seed(), overlay.reps())?;
    Ok(summarize_runs(
        &overlay.name,
        &overlay.comment,
        overlay.seed(),
        cm.length_m(),
        &runs,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub master_seed: u64,
    pub reports: Vec<ScenarioReport>,
    /// Non-cumulative ladder steps.
    pub warnings: Vec<String>,
}

/// Replicates each overlay of a cumulative ladder under one shared master
/// seed (the first overlay's, unless `seed` is given), so the scenarios see
/// common random numbers.
pub fn sweep(
    model: &ModelDef,
    ladder: &[ScenarioOverlay],
    reps: Option<u32>,
    seed: Option<u64>,
) -> Result<SweepResult, RunError> {
    let Some(first) = ladder.first() else {
        return Err(RunError::Scenario {
            scenario: String::new(),
            message: "empty ladder".into(),
        });
    };
    let master_seed = seed.unwrap_or(first.seed());
    let mut warnings = Vec::new();
    for pair in ladder.windows(2) {
        for r in pair[1].retractions(&pair[0]) {
            warnings.push(format!("non-cumulative ladder at `{}`: {r}", pair[1].name));
        }
    }
    let mut reports = Vec::with_capacity(ladder.len());
    for o in ladder {
        let mut o = o.clone();
        o.master_seed = Some(master_seed);
        if let Some(r) = reps {
            o.replications = Some(r);
        }
        reports.push(replicate(model, &o)?);
    }
    Ok(SweepResult {
        master_seed,
        reports,
        warnings,
    })
}
