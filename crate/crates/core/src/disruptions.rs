//! Disruption templates (weather outages, equipment breakdowns) compiled
//! into ordinary element graphs, plus calibration of their free magnitudes.

use serde::{Deserialize, Serialize};

use crate::error::RunError;
use crate::model::{ElementDef, ElementKind, Link, ModelDef, Request};
use crate::stochastics::Distribution;

mod calibrate;

pub use calibrate::{
    calibrate, parse_targets, CalibrationEntry, CalibrationReport, CalibrationTarget, FreeParam, TargetsFile,
};

/// Periodic weather check that may close a valve for an outage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeatherSpec {
    pub cycle_days: f64,
    pub probability: f64,
    pub outage: Distribution,
    /// Valve element gating the weather-sensitive tasks.
    pub valve: String,
    /// Tasks carrying this sensitivity tag are governed by `valve`.
    pub tag: String,
}

impl Default for WeatherSpec {
    fn default() -> Self {
        WeatherSpec {
            cycle_days: 10.0,
            probability: 0.3,
            outage: Distribution::constant(1.0),
            valve: "weather_valve".into(),
            tag: "weather".into(),
        }
    }
}

impl WeatherSpec {
    /// Parameter problems, as messages.
    pub fn check(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.cycle_days.is_finite() && self.cycle_days > 0.0) {
            out.push(format!("cycle must be positive, got {}", self.cycle_days));
        }
        if !(0.0..=1.0).contains(&self.probability) {
            out.push(format!("probability must lie in [0,1], got {}", self.probability));
        }
        nonneg(&mut out, "outage", &self.outage);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BreakdownClock {
    /// Time to failure accumulates only while the resource is busy.
    Usage,
    Calendar,
}

/// Failure/repair cycle of one resource.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreakdownSpec {
    pub resource: String,
    /// Days (busy or calendar, per `clock`) between failures.
    pub trigger: Distribution,
    /// Probability that a failure is major.
    pub p_major: f64,
    pub minor_repair: Distribution,
    pub major_repair: Distribution,
    pub clock: BreakdownClock,
}

impl BreakdownSpec {
    pub fn new(resource: &str) -> Self {
        BreakdownSpec {
            resource: resource.into(),
            trigger: Distribution::constant(5.0),
            p_major: 0.0,
            minor_repair: Distribution::constant(1.0),
            major_repair: Distribution::constant(7.0),
            clock: BreakdownClock::Usage,
        }
    }

    pub fn check(&self) -> Vec<String> {
        let mut out = Vec::new();
        match self.trigger.validate() {
            Err(e) => out.push(format!("trigger: {e}")),
            Ok(()) if self.trigger.support().0 < 0.0 || self.trigger.mean() <= 0.0 => {
                out.push("trigger samples must be positive".to_string())
            }
            Ok(()) => {}
        }
        if !(0.0..=1.0).contains(&self.p_major) {
            out.push(format!("p_major must lie in [0,1], got {}", self.p_major));
        }
        nonneg(&mut out, "minor repair", &self.minor_repair);
        nonneg(&mut out, "major repair", &self.major_repair);
        out
    }
}

fn nonneg(out: &mut Vec<String>, what: &str, d: &Distribution) {
    match d.validate() {
        Err(e) => out.push(format!("{what}: {e}")),
        Ok(()) if d.support().0 < 0.0 => out.push(format!("{what} samples must be non-negative")),
        Ok(()) => {}
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DisruptionSpec {
    Weather(WeatherSpec),
    Breakdown(BreakdownSpec),
}

struct Builder<'a> {
    m: ModelDef,
    prefix: &'a str,
}

impl Builder<'_> {
    fn id(&self, suffix: &str) -> String {
        format!("{}.{}", self.prefix, suffix)
    }

    fn add(&mut self, suffix: &str, kind: ElementKind) -> Result<(), RunError> {
        let id = self.id(suffix);
        if self.m.element(&id).is_some() {
            return Err(RunError::Disruption {
                submodel: self.prefix.to_string(),
                message: format!("element id `{id}` is already taken"),
            });
        }
        self.m.elements.push(ElementDef { id, kind });
        Ok(())
    }

    fn link(&mut self, from: &str, port: u32, to: &str) {
        let (from, to) = (self.id(from), self.id(to));
        self.m.links.push(Link { from, port, to });
    }

    fn daemon(&mut self) -> Result<(), RunError> {
        self.add(
            "gen",
            ElementKind::Create {
                count: 1,
                interarrival: Distribution::constant(0.0),
                daemon: true,
            },
        )
    }
}

fn task(duration: Distribution, usage: Option<String>) -> ElementKind {
    ElementKind::Task {
        duration,
        tags: Vec::new(),
        valve: None,
        usage,
    }
}

fn fail(name: &str, message: impl Into<String>) -> RunError {
    RunError::Disruption {
        submodel: name.to_string(),
        message: message.into(),
    }
}

/// Adds a weather generator named `name` to `m`: every `cycle_days` a
/// background entity draws bernoulli(probability); on success it closes the
/// valve for an outage sample and reopens it. Tasks tagged `w.tag` without a
/// governing valve are put under the weather valve.
pub fn compile_weather(w: &WeatherSpec, m: &ModelDef, name: &str) -> Result<ModelDef, RunError> {
    if !matches!(m.element(&w.valve).map(|e| &e.kind), Some(ElementKind::Valve { .. })) {
        return Err(fail(name, format!("missing valve `{}`", w.valve)));
    }
    if let Some(msg) = w.check().into_iter().next() {
        return Err(fail(name, msg));
    }
    let mut b = Builder {
        m: m.clone(),
        prefix: name,
    };
    for e in &mut b.m.elements {
        if let ElementKind::Task { tags, valve, .. } = &mut e.kind {
            if valve.is_none() && tags.contains(&w.tag) {
                *valve = Some(w.valve.clone());
            }
        }
    }
    b.daemon()?;
    b.add("cycle", task(Distribution::constant(w.cycle_days), None))?;
    b.add("split", ElementKind::Generate { clones: 1 })?;
    b.add(
        "roll",
        ElementKind::ProbabilisticBranch {
            probs: vec![1.0 - w.probability, w.probability],
        },
    )?;
    b.add(
        "close",
        ElementKind::Activator {
            valve: w.valve.clone(),
            open: false,
        },
    )?;
    b.add(
        "count",
        ElementKind::Counter {
            tally: Some(name.to_string()),
        },
    )?;
    b.add("outage", task(w.outage.clone(), None))?;
    b.add(
        "open",
        ElementKind::Activator {
            valve: w.valve.clone(),
            open: true,
        },
    )?;
    b.add("done", ElementKind::Destroy)?;
    b.link("gen", 0, "cycle");
    b.link("cycle", 0, "split");
    b.link("split", 0, "cycle");
    b.link("split", 1, "roll");
    b.link("roll", 0, "done");
    b.link("roll", 1, "close");
    b.link("close", 0, "count");
    b.link("count", 0, "outage");
    b.link("outage", 0, "open");
    b.link("open", 0, "done");
    Ok(b.m)
}

/// Adds a failure/repair loop named `name` for one resource: wear for a
/// trigger sample (busy or calendar days), preempt one server, repair for a
/// minor or major sample, then resume the server.
pub fn compile_breakdown(bd: &BreakdownSpec, m: &ModelDef, name: &str) -> Result<ModelDef, RunError> {
    if m.resource(&bd.resource).is_none() {
        return Err(fail(name, format!("unknown resource `{}`", bd.resource)));
    }
    if let Some(msg) = bd.check().into_iter().next() {
        return Err(fail(name, msg));
    }
    let mut b = Builder {
        m: m.clone(),
        prefix: name,
    };
    let usage = match bd.clock {
        BreakdownClock::Usage => Some(bd.resource.clone()),
        BreakdownClock::Calendar => None,
    };
    b.daemon()?;
    b.add("wear", task(bd.trigger.clone(), usage))?;
    b.add(
        "fail",
        ElementKind::Preempt {
            resource: bd.resource.clone(),
        },
    )?;
    b.add(
        "count",
        ElementKind::Counter {
            tally: Some(name.to_string()),
        },
    )?;
    b.add(
        "severity",
        ElementKind::ProbabilisticBranch {
            probs: vec![1.0 - bd.p_major, bd.p_major],
        },
    )?;
    b.add("minor", task(bd.minor_repair.clone(), None))?;
    b.add("major", task(bd.major_repair.clone(), None))?;
    b.add(
        "fix",
        ElementKind::Release {
            releases: vec![Request {
                resource: bd.resource.clone(),
                servers: 1,
            }],
        },
    )?;
    b.link("gen", 0, "wear");
    b.link("wear", 0, "fail");
    b.link("fail", 0, "count");
    b.link("count", 0, "severity");
    b.link("severity", 0, "minor");
    b.link("severity", 1, "major");
    b.link("minor", 0, "fix");
    b.link("major", 0, "fix");
    b.link("fix", 0, "wear");
    Ok(b.m)
}

/// Compiles every enabled submodel into the element graph and drops the
/// submodel declarations.
pub fn expand(m: &ModelDef) -> Result<ModelDef, RunError> {
    let mut out = m.clone();
    out.submodels.clear();
    for s in m.submodels.iter().filter(|s| s.enabled) {
        out = match &s.spec {
            DisruptionSpec::Weather(w) => compile_weather(w, &out, &s.name)?,
            DisruptionSpec::Breakdown(b) => compile_breakdown(b, &out, &s.name)?,
        };
    }
    Ok(out)
}
