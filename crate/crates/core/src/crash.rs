//! Resource crashing: which servers to add, and in what order, to shorten
//! the mean project duration under a cost budget.
//!
//! Every configuration is simulated under the incumbent overlay's master
//! seed, so all comparisons use common random numbers.

use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::RunError;
use crate::model::{ModelDef, ScenarioOverlay};
use crate::runner::{replicate, ReportFormat};

pub const PLAN_SCHEMA: &str = "berthsim.crash/1";

/// Exhaustive search refuses lattices with this many points or more.
pub const EXHAUSTIVE_LIMIT: u64 = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourceOption {
    pub resource: String,
    pub max_added: u32,
    pub cost_per_unit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub base_cost: f64,
    pub delay_penalty_per_day: f64,
    pub bid_days: f64,
    /// Budget from the costs file; callers may override it.
    pub budget: Option<f64>,
    pub options: Vec<ResourceOption>,
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel {
            base_cost: 0.0,
            delay_penalty_per_day: 0.0,
            bid_days: 156.0,
            budget: None,
            options: Vec::new(),
        }
    }
}

/// Parses a costs file. Lines are `key = value` settings (`base_cost`,
/// `penalty_per_day`, `budget`, `bid_days`) or
/// `option <resource> max=<k> unit_cost=<usd>`; `#` starts a comment.
pub fn parse_costs(text: &str) -> Result<CostModel, String> {
    let mut cm = CostModel::default();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let at = |msg: String| format!("{}:1: error: {msg}", i + 1);
        let usd = |v: &str| match v.trim().parse::<f64>() {
            Ok(x) if x.is_finite() && x >= 0.0 => Ok(x),
            _ => Err(at(format!("`{}` is not a non-negative amount", v.trim()))),
        };
        if let Some(rest) = line.strip_prefix("option ") {
            let mut words = rest.split_whitespace();
            let resource = words.next().ok_or_else(|| at("option needs a resource name".into()))?;
            let (mut max, mut cost) = (None, None);
            for w in words {
                match w.split_once('=') {
                    Some(("max", v)) => {
                        max = Some(v.parse::<u32>().map_err(|_| at(format!("max `{v}` is not a count")))?)
                    }
                    Some(("unit_cost", v)) => cost = Some(usd(v)?),
                    _ => return Err(at(format!("unexpected `{w}`"))),
                }
            }
            let (Some(max_added), Some(cost_per_unit)) = (max, cost) else {
                return Err(at("option needs max= and unit_cost=".into()));
            };
            if cm.options.iter().any(|o| o.resource == resource) {
                return Err(at(format!("duplicate option for `{resource}`")));
            }
            cm.options.push(ResourceOption {
                resource: resource.to_string(),
                max_added,
                cost_per_unit,
            });
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| at(format!("cannot parse `{line}`")))?;
        match k.trim() {
            "base_cost" => cm.base_cost = usd(v)?,
            "penalty_per_day" => cm.delay_penalty_per_day = usd(v)?,
            "budget" => cm.budget = Some(usd(v)?),
            "bid_days" => cm.bid_days = usd(v)?,
            other => return Err(at(format!("unknown setting `{other}`"))),
        }
    }
    Ok(cm)
}

/// Added units per resource; resources at zero are left out.
pub type Additions = BTreeMap<String, u32>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Delta {
    pub days: f64,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrashStep {
    pub resource: String,
    pub added: u32,
    pub mean_days: f64,
    pub cumulative_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierPoint {
    pub additions: Additions,
    pub cost: f64,
    pub mean_days: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrashPlan {
    pub scenario: String,
    pub master_seed: u64,
    pub replications: u32,
    pub budget: f64,
    pub baseline_days: f64,
    pub steps: Vec<CrashStep>,
    /// Nondominated (cost, days) points, by increasing cost.
    pub frontier: Vec<FrontierPoint>,
    pub exhaustive: bool,
}

impl CrashPlan {
    pub fn final_days(&self) -> f64 {
        self.steps.last().map_or(self.baseline_days, |s| s.mean_days)
    }

    pub fn total_cost(&self) -> f64 {
        self.steps.last().map_or(0.0, |s| s.cumulative_cost)
    }
}

fn overlay_with(model: &ModelDef, base: &ScenarioOverlay, adds: &Additions) -> Result<ScenarioOverlay, RunError> {
    let mut o = base.clone();
    for (r, &k) in adds {
        let current = match o.resource_overrides.get(r) {
            Some(&n) => n,
            None => model
                .resource(r)
                .map(|d| d.servers)
                .ok_or_else(|| RunError::Crash(format!("unknown resource `{r}`")))?,
        };
        o.resource_overrides.insert(r.clone(), current + k);
    }
    Ok(o)
}

fn cost_of(cm: &CostModel, adds: &Additions) -> f64 {
    cm.options
        .iter()
        .map(|o| o.cost_per_unit * f64::from(adds.get(&o.resource).copied().unwrap_or(0)))
        .sum()
}

/// Memoised mean durations per configuration.
struct Evaluator<'a> {
    model: &'a ModelDef,
    base: &'a ScenarioOverlay,
    cache: BTreeMap<Additions, f64>,
}

impl<'a> Evaluator<'a> {
    fn new(model: &'a ModelDef, base: &'a ScenarioOverlay) -> Self {
        Evaluator {
            model,
            base,
            cache: BTreeMap::new(),
        }
    }

    fn mean(&mut self, adds: &Additions) -> Result<f64, RunError> {
        if let Some(&d) = self.cache.get(adds) {
            return Ok(d);
        }
        let o = overlay_with(self.model, self.base, adds)?;
        let d = replicate(self.model, &o)?.mean_days;
        self.cache.insert(adds.clone(), d);
        Ok(d)
    }
}

fn plus(adds: &Additions, resource: &str, units: u32) -> Additions {
    let mut a = adds.clone();
    if units > 0 {
        *a.entry(resource.to_string()).or_insert(0) += units;
    }
    a
}

/// Effect of adding `units` servers of `option.resource` to the overlay:
/// change in mean duration (negative is faster) and in cost.
pub fn evaluate(
    model: &ModelDef,
    overlay: &ScenarioOverlay,
    option: &ResourceOption,
    units: u32,
) -> Result<Delta, RunError> {
    if model.resource(&option.resource).is_none() {
        return Err(RunError::Crash(format!("unknown resource `{}`", option.resource)));
    }
    if units == 0 {
        return Ok(Delta { days: 0.0, cost: 0.0 });
    }
    let mut ev = Evaluator::new(model, overlay);
    let before = ev.mean(&Additions::new())?;
    let after = ev.mean(&plus(&Additions::new(), &option.resource, units))?;
    Ok(Delta {
        days: after - before,
        cost: option.cost_per_unit * f64::from(units),
    })
}

/// Points not beaten on both cost and days by another point, sorted by
/// cost. Exact duplicates keep their first occurrence.
pub fn nondominated(points: &[FrontierPoint]) -> Vec<FrontierPoint> {
    let beats = |q: &FrontierPoint, p: &FrontierPoint| {
        q.cost <= p.cost && q.mean_days <= p.mean_days && (q.cost < p.cost || q.mean_days < p.mean_days)
    };
    let mut out: Vec<FrontierPoint> = Vec::new();
    for (i, p) in points.iter().enumerate() {
        let dominated = points.iter().any(|q| beats(q, p));
        let duplicate = points[..i]
            .iter()
            .any(|q| q.cost == p.cost && q.mean_days == p.mean_days);
        if !dominated && !duplicate {
            out.push(p.clone());
        }
    }
    out.sort_by(|a, b| a.cost.total_cmp(&b.cost).then(a.mean_days.total_cmp(&b.mean_days)));
    out
}

fn check_options(model: &ModelDef, cm: &CostModel, budget: f64) -> Result<(), RunError> {
    if budget.is_nan() || budget < 0.0 {
        return Err(RunError::Crash(format!("budget must be >= 0, got {budget}")));
    }
    for o in &cm.options {
        if model.resource(&o.resource).is_none() {
            return Err(RunError::Crash(format!("unknown resource `{}`", o.resource)));
        }
    }
    Ok(())
}

fn greedy(ev: &mut Evaluator, cm: &CostModel, budget: f64) -> Result<(Vec<CrashStep>, Vec<FrontierPoint>), RunError> {
    let mut adds = Additions::new();
    let mut current = ev.mean(&adds)?;
    let mut spent = 0.0;
    let mut steps = Vec::new();
    let mut visited = vec![FrontierPoint {
        additions: adds.clone(),
        cost: 0.0,
        mean_days: current,
    }];
    loop {
        // (ratio, saved, resource, cost, days)
        let mut best: Option<(f64, f64, &str, f64, f64)> = None;
        for o in &cm.options {
            let have = adds.get(&o.resource).copied().unwrap_or(0);
            if have >= o.max_added || spent + o.cost_per_unit > budget {
                continue;
            }
            let days = ev.mean(&plus(&adds, &o.resource, 1))?;
            let saved = current - days;
            let ratio = if o.cost_per_unit > 0.0 {
                saved / o.cost_per_unit
            } else if saved > 0.0 {
                f64::INFINITY
            } else {
                0.0
            };
            let better = match best {
                None => true,
                Some((r, s, name, _, _)) => {
                    ratio > r || (ratio == r && (saved > s || (saved == s && o.resource.as_str() < name)))
                }
            };
            if better {
                best = Some((ratio, saved, &o.resource, o.cost_per_unit, days));
            }
        }
        let Some((_, saved, resource, cost, days)) = best else {
            break;
        };
        if saved <= 0.0 {
            break;
        }
        adds = plus(&adds, resource, 1);
        spent += cost;
        current = days;
        steps.push(CrashStep {
            resource: resource.to_string(),
            added: 1,
            mean_days: days,
            cumulative_cost: spent,
        });
        visited.push(FrontierPoint {
            additions: adds.clone(),
            cost: spent,
            mean_days: days,
        });
    }
    Ok((steps, visited))
}

/// Greedy marginal search: repeatedly adds the single unit with the best
/// days saved per dollar (ties: more days saved, then resource name) until
/// the budget is spent or no unit saves time.
pub fn greedy_crash(
    model: &ModelDef,
    overlay: &ScenarioOverlay,
    cost_model: &CostModel,
    budget: f64,
) -> Result<CrashPlan, RunError> {
    check_options(model, cost_model, budget)?;
    let mut ev = Evaluator::new(model, overlay);
    let (steps, visited) = greedy(&mut ev, cost_model, budget)?;
    Ok(CrashPlan {
        scenario: overlay.name.clone(),
        master_seed: overlay.seed(),
        replications: overlay.reps(),
        budget,
        baseline_days: visited[0].mean_days,
        steps,
        frontier: nondominated(&visited),
        exhaustive: false,
    })
}

/// Simulates every affordable point of the option lattice and returns the
/// greedy steps together with the full nondominated frontier.
pub fn exhaustive_crash(
    model: &ModelDef,
    overlay: &ScenarioOverlay,
    cost_model: &CostModel,
    budget: f64,
) -> Result<CrashPlan, RunError> {
    check_options(model, cost_model, budget)?;
    let size = cost_model
        .options
        .iter()
        .try_fold(1u64, |acc, o| acc.checked_mul(u64::from(o.max_added) + 1))
        .unwrap_or(u64::MAX);
    if size >= EXHAUSTIVE_LIMIT {
        return Err(RunError::Crash(format!(
            "option lattice has {size} points; exhaustive search is limited to {EXHAUSTIVE_LIMIT}"
        )));
    }
    let mut lattice = vec![Additions::new()];
    for o in &cost_model.options {
        lattice = lattice
            .iter()
            .flat_map(|a| (0..=o.max_added).map(move |k| plus(a, &o.resource, k)))
            .collect();
    }
    let mut ev = Evaluator::new(model, overlay);
    let mut points = Vec::new();
    for adds in lattice {
        let cost = cost_of(cost_model, &adds);
        if cost <= budget {
            let mean_days = ev.mean(&adds)?;
            points.push(FrontierPoint {
                additions: adds,
                cost,
                mean_days,
            });
        }
    }
    let (steps, _) = greedy(&mut ev, cost_model, budget)?;
    Ok(CrashPlan {
        scenario: overlay.name.clone(),
        master_seed: overlay.seed(),
        replications: overlay.reps(),
        budget,
        baseline_days: points[0].mean_days,
        steps,
        frontier: nondominated(&points),
        exhaustive: true,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub point: FrontierPoint,
    pub delay_days: f64,
    pub penalty: f64,
    /// Base cost plus added resources plus delay penalty.
    pub total_cost: f64,
}

/// Days beyond the bid schedule, or zero when on time.
pub fn delay_days(mean_days: f64, bid_days: f64) -> f64 {
    (mean_days - bid_days).max(0.0)
}

/// Picks the frontier point with the lowest total cost once late delivery
/// is charged at the penalty rate. Ties go to the cheaper point.
pub fn tradeoff(plan: &CrashPlan, cost_model: &CostModel) -> Option<Recommendation> {
    plan.frontier
        .iter()
        .map(|p| {
            let delay = delay_days(p.mean_days, cost_model.bid_days);
            let penalty = delay * cost_model.delay_penalty_per_day;
            Recommendation {
                point: p.clone(),
                delay_days: delay,
                penalty,
                total_cost: cost_model.base_cost + p.cost + penalty,
            }
        })
        .min_by(|a, b| {
            a.total_cost
                .total_cmp(&b.total_cost)
                .then(a.point.cost.total_cmp(&b.point.cost))
        })
}

fn describe(adds: &Additions) -> String {
    if adds.is_empty() {
        return "baseline".into();
    }
    adds.iter()
        .map(|(r, k)| format!("{r}+{k}"))
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn render_plan(plan: &CrashPlan, rec: Option<&Recommendation>, format: ReportFormat) -> String {
    let mut out = String::new();
    match format {
        ReportFormat::Table => {
            let _ = writeln!(out, "Baseline: {:.2} days ({})", plan.baseline_days, plan.scenario);
            let adds: Vec<String> = plan
                .steps
                .iter()
                .map(|s| format!("{} +{}", s.resource, s.added))
                .collect();
            let w = adds.iter().map(String::len).max().unwrap_or(0).max(3);
            let _ = writeln!(
                out,
                "{:<4} | {:<w$} | {:>10} | {:>14}",
                "Step", "Add", "Mean days", "Added cost"
            );
            let _ = writeln!(out, "{}", "-".repeat(w + 37));
            for (i, (s, add)) in plan.steps.iter().zip(&adds).enumerate() {
                let _ = writeln!(
                    out,
                    "{:<4} | {:<w$} | {:>10.2} | {:>14.2}",
                    i + 1,
                    add,
                    s.mean_days,
                    s.cumulative_cost
                );
            }
            let _ = writeln!(out, "\nFrontier:");
            for p in &plan.frontier {
                let _ = writeln!(
                    out,
                    "  {:>14.2} USD  {:>8.2} days  {}",
                    p.cost,
                    p.mean_days,
                    describe(&p.additions)
                );
            }
            if let Some(r) = rec {
                let _ = writeln!(
                    out,
                    "\nRecommended: {} ({:.2} days, delay {:.2} days, total {:.2} USD)",
                    describe(&r.point.additions),
                    r.point.mean_days,
                    r.delay_days,
                    r.total_cost
                );
            }
        }
        ReportFormat::Csv => {
            out.push_str("kind,index,resource,added,mean_days,cost\n");
            for (i, s) in plan.steps.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "step,{},{},{},{},{}",
                    i + 1,
                    s.resource,
                    s.added,
                    s.mean_days,
                    s.cumulative_cost
                );
            }
            for (i, p) in plan.frontier.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "frontier,{},{},,{},{}",
                    i,
                    describe(&p.additions),
                    p.mean_days,
                    p.cost
                );
            }
        }
        ReportFormat::Json => {
            let doc = json!({
                "schema": PLAN_SCHEMA,
                "plan": plan,
                "recommendation": rec,
            });
            out = serde_json::to_string_pretty(&doc).expect("plan serializes");
            out.push('\n');
        }
    }
    out
}
