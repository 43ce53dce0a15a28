use serde::{Deserialize, Serialize};

use crate::disruptions::DisruptionSpec;
use crate::error::RunError;
use crate::model::{ModelDef, ScenarioOverlay};
use crate::runner::replicate;

/// A free magnitude of a submodel, written `<submodel>.<field>`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FreeParam {
    pub submodel: String,
    /// One of `outage`, `p`, `cycle` (weather) or `trigger`, `minor`,
    /// `major`, `p_major` (breakdown).
    pub field: String,
}

impl std::fmt::Display for FreeParam {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}.{}", self.submodel, self.field)
    }
}

impl FreeParam {
    pub fn parse(s: &str) -> Option<Self> {
        let (sub, field) = s.rsplit_once('.')?;
        Some(FreeParam {
            submodel: sub.to_string(),
            field: field.to_string(),
        })
    }

    /// Current value: the mean for distribution fields.
    pub fn get(&self, m: &ModelDef) -> Result<f64, RunError> {
        let spec = &self.lookup(m)?.spec;
        match (spec, self.field.as_str()) {
            (DisruptionSpec::Weather(w), "outage") => Ok(w.outage.mean()),
            (DisruptionSpec::Weather(w), "p") => Ok(w.probability),
            (DisruptionSpec::Weather(w), "cycle") => Ok(w.cycle_days),
            (DisruptionSpec::Breakdown(b), "trigger") => Ok(b.trigger.mean()),
            (DisruptionSpec::Breakdown(b), "minor") => Ok(b.minor_repair.mean()),
            (DisruptionSpec::Breakdown(b), "major") => Ok(b.major_repair.mean()),
            (DisruptionSpec::Breakdown(b), "p_major") => Ok(b.p_major),
            _ => Err(self.unknown()),
        }
    }

    /// Sets the value; distribution fields keep their shape and move their
    /// mean.
    pub fn set(&self, m: &mut ModelDef, x: f64) -> Result<(), RunError> {
        let err = self.unknown();
        let sub = m.submodel_mut(&self.submodel).ok_or_else(|| err.clone())?;
        match (&mut sub.spec, self.field.as_str()) {
            (DisruptionSpec::Weather(w), "outage") => w.outage = w.outage.with_mean(x),
            (DisruptionSpec::Weather(w), "p") => w.probability = x,
            (DisruptionSpec::Weather(w), "cycle") => w.cycle_days = x,
            (DisruptionSpec::Breakdown(b), "trigger") => b.trigger = b.trigger.with_mean(x),
            (DisruptionSpec::Breakdown(b), "minor") => b.minor_repair = b.minor_repair.with_mean(x),
            (DisruptionSpec::Breakdown(b), "major") => b.major_repair = b.major_repair.with_mean(x),
            (DisruptionSpec::Breakdown(b), "p_major") => b.p_major = x,
            _ => return Err(err),
        }
        Ok(())
    }

    fn lookup<'a>(&self, m: &'a ModelDef) -> Result<&'a crate::model::Submodel, RunError> {
        m.submodel(&self.submodel).ok_or_else(|| self.unknown())
    }

    fn unknown(&self) -> RunError {
        RunError::Disruption {
            submodel: self.submodel.clone(),
            message: format!("no calibratable parameter `{self}`"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTarget {
    pub param: FreeParam,
    /// Scenario whose mean duration is matched.
    pub scenario: String,
    pub target_days: f64,
    pub low: f64,
    pub high: f64,
}

/// Parsed targets file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetsFile {
    /// Scenario file, relative to the targets file.
    pub scenarios: Option<String>,
    pub reps: Option<u32>,
    pub seed: Option<u64>,
    /// Allowed |achieved - target| in days.
    pub tolerance: f64,
    pub targets: Vec<CalibrationTarget>,
}

/// Parses a targets file:
///
/// ```text
/// scenarios = disruptions.scn
/// reps = 100
/// tolerance = 0.5
/// calibrate weather.outage scenario=bad_weather target=195.38 low=0 high=3
/// ```
pub fn parse_targets(text: &str) -> Result<TargetsFile, String> {
    let mut tf = TargetsFile {
        scenarios: None,
        reps: None,
        seed: None,
        tolerance: 0.5,
        targets: Vec::new(),
    };
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let at = |msg: String| format!("{}:1: error: {msg}", i + 1);
        let num = |v: &str| v.parse::<f64>().map_err(|_| at(format!("`{v}` is not a number")));
        if let Some(rest) = line.strip_prefix("calibrate ") {
            let mut words = rest.split_whitespace();
            let param = words
                .next()
                .and_then(FreeParam::parse)
                .ok_or_else(|| at("expected <submodel>.<field>".into()))?;
            let (mut scenario, mut target, mut low, mut high) = (None, None, None, None);
            for w in words {
                let (k, v) = w
                    .split_once('=')
                    .ok_or_else(|| at(format!("expected key=value, got `{w}`")))?;
                match k {
                    "scenario" => scenario = Some(v.to_string()),
                    "target" => target = Some(num(v)?),
                    "low" => low = Some(num(v)?),
                    "high" => high = Some(num(v)?),
                    _ => return Err(at(format!("unknown key `{k}`"))),
                }
            }
            let (Some(scenario), Some(target_days), Some(low), Some(high)) = (scenario, target, low, high) else {
                return Err(at("calibrate needs scenario=, target=, low= and high=".into()));
            };
            if low.is_nan() || high.is_nan() || low > high {
                return Err(at("low must not exceed high".into()));
            }
            tf.targets.push(CalibrationTarget {
                param,
                scenario,
                target_days,
                low,
                high,
            });
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| at(format!("cannot parse `{line}`")))?;
        match k {
            "scenarios" => tf.scenarios = Some(v.to_string()),
            "reps" => tf.reps = Some(v.parse().map_err(|_| at("reps must be a positive integer".into()))?),
            "seed" => tf.seed = Some(v.parse().map_err(|_| at("seed must be an integer".into()))?),
            "tolerance" => tf.tolerance = num(v)?,
            _ => return Err(at(format!("unknown setting `{k}`"))),
        }
    }
    if tf.targets.is_empty() {
        return Err("targets file has no calibrate lines".into());
    }
    Ok(tf)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationEntry {
    pub parameter: String,
    pub scenario: String,
    pub value: f64,
    pub target: f64,
    pub achieved: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub schema: String,
    pub replications: u32,
    pub master_seed: u64,
    pub tolerance: f64,
    pub converged: bool,
    pub entries: Vec<CalibrationEntry>,
}

impl CalibrationReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

const MAX_EVALS: usize = 40;

/// Fits each free parameter in turn by bisection so that its scenario's
/// mean duration hits the target. Later targets see earlier fitted values.
/// All evaluations share the master seed (common random numbers), which
/// keeps the mean monotone in each magnitude.
pub fn calibrate(
    model: &ModelDef,
    scenarios: &[ScenarioOverlay],
    targets: &TargetsFile,
) -> Result<(ModelDef, CalibrationReport), RunError> {
    let mut m = model.clone();
    let reps = targets.reps.unwrap_or(crate::model::DEFAULT_REPLICATIONS);
    let seed = targets.seed.unwrap_or(crate::model::DEFAULT_SEED);
    let mut entries = Vec::new();
    for t in &targets.targets {
        let mut overlay = scenarios
            .iter()
            .find(|s| s.name == t.scenario)
            .cloned()
            .ok_or_else(|| RunError::Scenario {
                scenario: t.scenario.clone(),
                message: "not found in the scenario file".into(),
            })?;
        overlay.replications = Some(reps);
        overlay.master_seed = Some(seed);
        t.param.get(&m)?;

        let eval = |x: f64, m: &mut ModelDef| -> Result<f64, RunError> {
            t.param.set(m, x)?;
            Ok(replicate(m, &overlay)?.mean_days - t.target_days)
        };
        let (mut lo, mut hi) = (t.low, t.high);
        let f_lo = eval(lo, &mut m)?;
        let mut best = (lo, f_lo);
        let consider = |x: f64, f: f64, best: &mut (f64, f64)| {
            if f.abs() < best.1.abs() {
                *best = (x, f);
            }
        };
        if f_lo < 0.0 {
            let f_hi = eval(hi, &mut m)?;
            consider(hi, f_hi, &mut best);
            if f_hi > 0.0 {
                for _ in 0..MAX_EVALS {
                    if best.1.abs() <= targets.tolerance * 0.05 || hi - lo < 1e-6 {
                        break;
                    }
                    let mid = 0.5 * (lo + hi);
                    let f = eval(mid, &mut m)?;
                    consider(mid, f, &mut best);
                    if f < 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
            }
        }
        t.param.set(&mut m, best.0)?;
        entries.push(CalibrationEntry {
            parameter: t.param.to_string(),
            scenario: t.scenario.clone(),
            value: best.0,
            target: t.target_days,
            achieved: t.target_days + best.1,
            residual: best.1,
        });
    }
    let converged = entries.iter().all(|e| e.residual.abs() <= targets.tolerance);
    let report = CalibrationReport {
        schema: "berthsim.calibration/1".into(),
        replications: reps,
        master_seed: seed,
        tolerance: targets.tolerance,
        converged,
        entries,
    };
    if converged {
        Ok((m, report))
    } else {
        Err(RunError::CalibrationFailed {
            report: Box::new(report),
        })
    }
}
