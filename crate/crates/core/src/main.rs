use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use berthsim::crash::{self, parse_costs};
use berthsim::disruptions::{calibrate, parse_targets};
use berthsim::model::{parse_scenarios, parse_with_source_map, validate, ScenarioOverlay, Severity, DEFAULT_SEED};
use berthsim::runner::{self, render, render_sweep, ReportFormat};
use berthsim::sim::write_csv;
use berthsim::{berth, serialize, CompiledModel, ModelDef, RunError, RunOptions};

#[derive(Parser)]
#[command(
    name = "berthsim",
    version,
    about = "Discrete-event simulation of construction operations"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(clap::Args)]
struct Common {
    /// Replications per scenario (overrides the scenario file)
    #[arg(long)]
    reps: Option<u32>,
    /// Master seed; falls back to the scenario file, then BERTHSIM_SEED, then 42
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "table", value_parser = parse_format)]
    format: ReportFormat,
}

#[derive(Subcommand)]
enum Cmd {
    /// Parse and check a model; diagnostics go to stderr
    Validate { model: PathBuf },
    /// Replicate one scenario, or every scenario of a .scn file
    Run {
        model: PathBuf,
        /// Scenario name (bundled ladders or --scenarios) or a .scn file
        #[arg(long)]
        scenario: Option<String>,
        /// Extra scenario file searched for --scenario names
        #[arg(long)]
        scenarios: Option<PathBuf>,
        /// Write the trace of replication 0 as CSV
        #[arg(long)]
        trace: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Run a cumulative ladder under one shared seed
    Sweep {
        model: PathBuf,
        /// A .scn file, or `disruptions` / `resources` for the bundled ladders
        #[arg(long)]
        ladder: String,
        #[command(flatten)]
        common: Common,
    },
    /// Fit disruption parameters to target mean durations
    Calibrate {
        model: PathBuf,
        #[arg(long)]
        targets: PathBuf,
        /// Write the calibrated model here
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the calibration report (JSON) here instead of stdout
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Search for resource additions that shorten the project
    Crash {
        model: PathBuf,
        #[arg(long)]
        costs: PathBuf,
        /// Budget in USD for added resources; overrides the costs file
        #[arg(long)]
        budget: Option<f64>,
        /// Scenario to crash from (default: the model as written)
        #[arg(long)]
        scenario: Option<String>,
        #[arg(long)]
        scenarios: Option<PathBuf>,
        /// Simulate the whole option lattice for the frontier
        #[arg(long)]
        exhaustive: bool,
        #[command(flatten)]
        common: Common,
    },
}

fn parse_format(s: &str) -> Result<ReportFormat, String> {
    s.parse()
}

/// Failure classes mapped onto exit codes.
enum Failure {
    Invalid(String),
    Runtime(String),
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        match e {
            RunError::Invalid(m) => Failure::Invalid(m),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

fn write_out(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

/// Parses and validates a model file, printing diagnostics. Errors of either
/// kind make the model unusable.
fn load_model(path: &Path) -> Result<ModelDef, Failure> {
    let text = read(path)?;
    let file = path.display();
    let (model, map) = match parse_with_source_map(&text) {
        Ok(x) => x,
        Err(errs) => {
            for e in &errs.0 {
                eprintln!("{file}:{e}");
            }
            return Err(Failure::Invalid(format!("{} syntax error(s)", errs.0.len())));
        }
    };
    let diags = validate(&model);
    for d in &diags {
        let (line, col) = map.locate(d.subject.as_deref());
        eprintln!("{file}:{line}:{col}: {d}");
    }
    let errors = diags.iter().filter(|d| d.severity == Severity::Error).count();
    if errors > 0 {
        return Err(Failure::Invalid(format!("{errors} validation error(s)")));
    }
    Ok(model)
}

fn env_seed() -> Result<Option<u64>, Failure> {
    match std::env::var("BERTHSIM_SEED") {
        Ok(s) => s
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Failure::Runtime(format!("BERTHSIM_SEED `{s}` is not an unsigned integer"))),
        Err(_) => Ok(None),
    }
}

fn load_scn(path: &Path) -> Result<Vec<ScenarioOverlay>, Failure> {
    let text = read(path)?;
    parse_scenarios(&text).map_err(|errs| {
        for e in &errs.0 {
            eprintln!("{}:{e}", path.display());
        }
        Failure::Runtime(format!("{}: cannot parse scenarios", path.display()))
    })
}

/// Resolves `--scenario`: an existing file yields all its overlays, a name
/// is looked up in `--scenarios` and then in the bundled ladders.
fn resolve_scenarios(spec: Option<&str>, extra: Option<&Path>) -> Result<Vec<ScenarioOverlay>, Failure> {
    let Some(spec) = spec else {
        return match extra {
            Some(p) => load_scn(p),
            None => Ok(vec![ScenarioOverlay::new("base")]),
        };
    };
    let as_path = Path::new(spec);
    if as_path.is_file() {
        return load_scn(as_path);
    }
    let mut pool = match extra {
        Some(p) => load_scn(p)?,
        None => Vec::new(),
    };
    pool.extend(berth::disruption_ladder());
    pool.extend(berth::resource_ladder());
    pool.into_iter()
        .find(|o| o.name == spec)
        .map(|o| vec![o])
        .ok_or_else(|| Failure::Runtime(format!("no scenario or file named `{spec}`")))
}

fn apply_common(o: &mut ScenarioOverlay, common: &Common, env: Option<u64>) {
    if let Some(r) = common.reps {
        o.replications = Some(r);
    }
    o.master_seed = common.seed.or(o.master_seed).or(env).or(Some(DEFAULT_SEED));
}

fn cmd_run(
    model: &Path,
    scenario: Option<&str>,
    scenarios: Option<&Path>,
    trace: Option<&Path>,
    common: &Common,
) -> Result<String, Failure> {
    let m = load_model(model)?;
    let env = env_seed()?;
    let mut overlays = resolve_scenarios(scenario, scenarios)?;
    if overlays.is_empty() {
        return Err(Failure::Runtime("no scenarios to run".into()));
    }
    if trace.is_some() && overlays.len() != 1 {
        return Err(Failure::Runtime("--trace needs exactly one scenario".into()));
    }
    let mut reports = Vec::with_capacity(overlays.len());
    for o in &mut overlays {
        apply_common(o, common, env);
        reports.push(runner::replicate(&m, o)?);
        if let Some(path) = trace {
            let prepared = runner::prepare(&m, o)?;
            let cm = CompiledModel::new(&prepared).map_err(|e| Failure::Invalid(e.to_string()))?;
            let opts = RunOptions {
                trace: true,
                ..RunOptions::default()
            };
            let run = cm
                .run(runner::replication_seed(o.seed(), 0), &opts)
                .map_err(|e| Failure::Runtime(e.to_string()))?;
            let mut buf = Vec::new();
            write_csv(run.trace.as_deref().unwrap_or(&[]), &mut buf).expect("writing to memory");
            fs::write(path, buf).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
        }
    }
    // Several scenarios share one document; the top-level seed is the first's.
    if let [one] = reports.as_slice() {
        return Ok(render(one, common.format));
    }
    let result = runner::SweepResult {
        master_seed: reports[0].master_seed,
        reports,
        warnings: Vec::new(),
    };
    Ok(render_sweep(&result, common.format))
}

fn cmd_sweep(model: &Path, ladder: &str, common: &Common) -> Result<String, Failure> {
    let m = load_model(model)?;
    let env = env_seed()?;
    let overlays = match ladder {
        "disruptions" => berth::disruption_ladder(),
        "resources" => berth::resource_ladder(),
        path => load_scn(Path::new(path))?,
    };
    let seed = common.seed.or(overlays.first().and_then(|o| o.master_seed)).or(env);
    let result = runner::sweep(&m, &overlays, common.reps, seed)?;
    for w in &result.warnings {
        eprintln!("warning: {w}");
    }
    Ok(render_sweep(&result, common.format))
}

fn cmd_calibrate(model: &Path, targets: &Path, out: Option<&Path>, report: Option<&Path>) -> Result<String, Failure> {
    let m = load_model(model)?;
    let text = read(targets)?;
    let tf = parse_targets(&text).map_err(|e| Failure::Runtime(format!("{}:{e}", targets.display())))?;
    let scn = tf
        .scenarios
        .as_deref()
        .ok_or_else(|| Failure::Runtime(format!("{}: missing `scenarios = <file>`", targets.display())))?;
    let scn_path = targets.parent().unwrap_or(Path::new(".")).join(scn);
    let overlays = load_scn(&scn_path)?;
    let emit = |json: &str| -> Result<String, Failure> {
        match report {
            Some(p) => write_out(p, json).map(|_| String::new()),
            None => Ok(json.to_string()),
        }
    };
    match calibrate(&m, &overlays, &tf) {
        Ok((fitted, rep)) => {
            if let Some(p) = out {
                write_out(p, &serialize(&fitted))?;
            }
            emit(&rep.to_json())
        }
        Err(RunError::CalibrationFailed { report: rep }) => {
            let text = emit(&rep.to_json())?;
            print!("{text}");
            Err(Failure::Runtime(
                RunError::CalibrationFailed { report: rep }.to_string(),
            ))
        }
        Err(e) => Err(e.into()),
    }
}

fn cmd_crash(
    model: &Path,
    costs: &Path,
    budget: Option<f64>,
    scenario: Option<&str>,
    scenarios: Option<&Path>,
    exhaustive: bool,
    common: &Common,
) -> Result<String, Failure> {
    let m = load_model(model)?;
    let env = env_seed()?;
    let cm = parse_costs(&read(costs)?).map_err(|e| Failure::Runtime(format!("{}:{e}", costs.display())))?;
    let mut overlays = resolve_scenarios(scenario, scenarios)?;
    if overlays.len() != 1 {
        return Err(Failure::Runtime("crash needs exactly one scenario".into()));
    }
    let mut base = overlays.remove(0);
    apply_common(&mut base, common, env);
    let budget = budget.or(cm.budget).unwrap_or(f64::INFINITY);
    let plan = if exhaustive {
        crash::exhaustive_crash(&m, &base, &cm, budget)?
    } else {
        crash::greedy_crash(&m, &base, &cm, budget)?
    };
    let rec = crash::tradeoff(&plan, &cm);
    Ok(crash::render_plan(&plan, rec.as_ref(), common.format))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.cmd {
        Cmd::Validate { model } => load_model(model).map(|m| {
            format!(
                "{}: ok ({} elements, {} resources, {} submodels)\n",
                model.display(),
                m.elements.len(),
                m.resources.len(),
                m.submodels.len()
            )
        }),
        Cmd::Run {
            model,
            scenario,
            scenarios,
            trace,
            common,
        } => cmd_run(
            model,
            scenario.as_deref(),
            scenarios.as_deref(),
            trace.as_deref(),
            common,
        ),
        Cmd::Sweep { model, ladder, common } => cmd_sweep(model, ladder, common),
        Cmd::Calibrate {
            model,
            targets,
            out,
            report,
        } => cmd_calibrate(model, targets, out.as_deref(), report.as_deref()),
        Cmd::Crash {
            model,
            costs,
            budget,
            scenario,
            scenarios,
            exhaustive,
            common,
        } => cmd_crash(
            model,
            costs,
            *budget,
            scenario.as_deref(),
            scenarios.as_deref(),
            *exhaustive,
            common,
        ),
    };
    match result {
        Ok(text) => {
            let mut stdout = io::stdout().lock();
            // a closed pipe is not worth a panic
            let _ = stdout.write_all(text.as_bytes());
            ExitCode::SUCCESS
        }
        Err(Failure::Invalid(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
