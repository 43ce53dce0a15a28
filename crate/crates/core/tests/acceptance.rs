//! Acceptance suite. Prints one PASS/FAIL line per criterion, then fails if
//! any criterion failed. Run with `--nocapture` to see the lines.

mod support;

use std::panic::{self, AssertUnwindSafe};
use std::process::Command;
use std::time::{Duration, Instant};

use sha2::{Digest, Sha256};

use berthsim::berth::{self, BERTH_LENGTH_M};
use berthsim::crash::{exhaustive_crash, greedy_crash, parse_costs, FrontierPoint};
use berthsim::disruptions::{calibrate, parse_targets, FreeParam};
use berthsim::model::parse_scenarios;
use berthsim::sim::Action;
use berthsim::{derive_stream, parse, replicate, sweep, CompiledModel, Distribution, ModelDef, RunOptions};
use support::props;

struct Outcome {
    id: u8,
    pass: bool,
    line: String,
}

/// Runs one criterion; a panic or an overrun of `limit` counts as failure.
fn criterion(id: u8, title: &str, limit: Option<Duration>, f: impl FnOnce() -> Result<String, String>) -> Outcome {
    let start = Instant::now();
    let result = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Err(format!("panicked: {msg}"))
    });
    let elapsed = start.elapsed();
    let over = limit.is_some_and(|l| elapsed > l);
    let pass = result.is_ok() && !over;
    let timing = match limit {
        Some(l) => format!("{:.2} s, limit {} s", elapsed.as_secs_f64(), l.as_secs()),
        None => format!("{:.2} s", elapsed.as_secs_f64()),
    };
    let mut detail = match result {
        Ok(d) | Err(d) => d,
    };
    if over {
        detail.push_str("; over the time limit");
    }
    let line = format!(
        "criterion {id} {}: {title} ({timing}): {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    println!("{line}");
    Outcome { id, pass, line }
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn end_time(src: &str) -> Result<(f64, berthsim::sim::RunResult), String> {
    let m = parse(src).map_err(|e| e.to_string())?;
    let cm = CompiledModel::new(&m).map_err(|e| e.to_string())?;
    let r = cm
        .run(
            1,
            &RunOptions {
                trace: true,
                ..Default::default()
            },
        )
        .map_err(|e| e.to_string())?;
    Ok((r.end_time, r))
}

fn micro_oracles() -> Result<String, String> {
    let single = "model m {\n create c\n task t dur=const(5)\n destroy d\n link c -> t\n link t -> d\n}\n";
    let contention = concat!(
        "model m {\n resource J servers=1\n create c count=2\n capture k J:1\n task t dur=const(3)\n",
        " release r J:1\n destroy d\n link c -> k\n link k -> t\n link t -> r\n link r -> d\n}\n"
    );
    let batch = concat!(
        "model m {\n create c count=4 interarrival=const(1)\n batch b n=4\n task t dur=const(2)\n unbatch u\n destroy d\n",
        " link c -> b\n link b -> t\n link t -> u\n link u -> d\n}\n"
    );
    let valve = concat!(
        "model m {\n state ok = true\n valve v state=ok\n",
        " create c\n task t dur=const(10) valve=v\n destroy d\n link c -> t\n link t -> d\n",
        " create w daemon\n task w4 dur=const(4)\n activator shut valve=v open=false\n",
        " task w2 dur=const(2)\n activator reopen valve=v open=true\n destroy wd\n",
        " link w -> w4\n link w4 -> shut\n link shut -> w2\n link w2 -> reopen\n link reopen -> wd\n}\n"
    );
    let preempt = concat!(
        "model m {\n resource Jackhammer servers=1\n",
        " create c\n capture k Jackhammer:1\n task t dur=const(30)\n release r Jackhammer:1\n destroy d\n",
        " link c -> k\n link k -> t\n link t -> r\n link r -> d\n",
        " create b daemon\n task wait dur=const(10)\n preempt p resource=Jackhammer\n task fix dur=const(7)\n",
        " release back Jackhammer:1\n destroy bd\n",
        " link b -> wait\n link wait -> p\n link p -> fix\n link fix -> back\n link back -> bd\n}\n"
    );
    // Hand timelines: 5; 3 + 3; last arrival at 3 plus 2; 4 + 2 closed + 6; 10 + 7 + 20.
    let expected = [
        ("single", single, 5.0),
        ("contention", contention, 6.0),
        ("batch", batch, 5.0),
        ("valve", valve, 12.0),
        ("preempt", preempt, 37.0),
    ];
    let mut parts = Vec::new();
    for (name, src, want) in expected {
        let (got, run) = end_time(src)?;
        ensure(got == want, || format!("{name}: end {got}, expected {want}"))?;
        if name == "batch" {
            let ids: Vec<u64> = run
                .trace
                .as_deref()
                .unwrap_or(&[])
                .iter()
                .filter(|x| x.action == Action::Destroy && x.element == "d")
                .filter_map(|x| x.entity.map(|e| e.0))
                .collect();
            ensure(ids == [1, 2, 3, 4], || format!("batch: unbatched ids {ids:?}"))?;
        }
        parts.push(format!("{name}={got}"));
    }
    Ok(parts.join(" "))
}

fn ideal_conditions() -> Result<String, String> {
    let m = berth::load_reference_model();
    let mut ideal = berth::disruption_ladder().remove(0);
    ideal.replications = Some(100);
    let r = replicate(&m, &ideal).map_err(|e| e.to_string())?;
    let rate = format!("{:.2}", r.production_rate_m_per_day);
    let product = r.production_rate_m_per_day * r.mean_days;
    ensure((r.mean_days - 193.38).abs() <= 2.0, || {
        format!("mean {:.3}, expected 193.38 +/- 2", r.mean_days)
    })?;
    ensure(rate == "0.52", || format!("rate {rate}, expected 0.52"))?;
    ensure(((product - BERTH_LENGTH_M) / BERTH_LENGTH_M).abs() <= 1e-9, || {
        format!("rate x mean = {product}")
    })?;
    Ok(format!(
        "mean {:.3} d, rate {rate} m/day, rate x mean {product}",
        r.mean_days
    ))
}

fn disruption_ladder() -> Result<String, String> {
    let m = berth::load_reference_model();
    let ladder = berth::disruption_ladder();
    let tf = parse_targets(berth::CALIBRATION_TARGETS_SOURCE)?;
    let (fitted, report) = calibrate(&m, &ladder, &tf).map_err(|e| e.to_string())?;
    ensure(report.converged, || "calibration did not converge".into())?;
    for e in &report.entries {
        let p = FreeParam::parse(&e.parameter).ok_or_else(|| format!("bad parameter {}", e.parameter))?;
        let bundled = p.get(&m).map_err(|e| e.to_string())?;
        ensure(bundled == e.value, || {
            format!("{} fitted {} but the model has {bundled}", e.parameter, e.value)
        })?;
    }
    let result = sweep(&fitted, &ladder, Some(100), None).map_err(|e| e.to_string())?;
    let means: Vec<f64> = result.reports.iter().map(|r| r.mean_days).collect();
    let targets = [195.38, 215.00, 233.46];
    for (got, want) in means[1..].iter().zip(targets) {
        ensure((got - want).abs() <= 3.0, || {
            format!("mean {got:.3}, expected {want} +/- 3")
        })?;
    }
    ensure(means.windows(2).all(|w| w[1] > w[0]), || {
        format!("not increasing: {means:?}")
    })?;
    Ok(format!("calibrated, means {}", fmt_days(&means)))
}

fn fmt_days(xs: &[f64]) -> String {
    xs.iter().map(|x| format!("{x:.2}")).collect::<Vec<_>>().join(", ")
}

fn resource_ladder(final_mean: &mut f64) -> Result<String, String> {
    let m = berth::load_reference_model();
    let result = sweep(&m, &berth::resource_ladder(), Some(100), None).map_err(|e| e.to_string())?;
    let means: Vec<f64> = result.reports.iter().map(|r| r.mean_days).collect();
    let targets = [211.21, 191.46, 170.00, 166.71, 161.71];
    ensure(means.len() == 6, || format!("{} scenarios", means.len()))?;
    for (got, want) in means[1..].iter().zip(targets) {
        ensure((got - want).abs() <= 5.0, || {
            format!("mean {got:.3}, expected {want} +/- 5")
        })?;
    }
    ensure(means.windows(2).all(|w| w[1] < w[0]), || {
        format!("not decreasing: {means:?}")
    })?;
    let last = result.reports.last().unwrap();
    let rate = format!("{:.2}", last.production_rate_m_per_day);
    ensure(rate == "0.62", || format!("final rate {rate}, expected 0.62"))?;
    *final_mean = last.mean_days;
    Ok(format!("means {}, final rate {rate} m/day", fmt_days(&means)))
}

fn cli_determinism() -> Result<String, String> {
    let bin = env!("CARGO_BIN_EXE_berthsim");
    let models = concat!(env!("CARGO_MANIFEST_DIR"), "/../../models");
    let model = format!("{models}/berth.psm");
    let costs = format!("{models}/costs.usd");
    let invocations: Vec<Vec<String>> = [
        vec![
            "run",
            &model,
            "--scenario",
            "all_uncertainties",
            "--reps",
            "20",
            "--seed",
            "5",
        ],
        vec!["sweep", &model, "--ladder", "resources", "--reps", "10"],
        vec![
            "crash",
            &model,
            "--costs",
            &costs,
            "--scenario",
            "all_uncertainties",
            "--reps",
            "3",
        ],
    ]
    .into_iter()
    .map(|v| {
        v.into_iter()
            .map(String::from)
            .chain(["--format".into(), "json".into()])
            .collect()
    })
    .collect();
    let mut hashes = Vec::new();
    for args in &invocations {
        let digest = |_: u8| -> Result<String, String> {
            let out = Command::new(bin)
                .args(args)
                .env_remove("BERTHSIM_SEED")
                .output()
                .map_err(|e| e.to_string())?;
            ensure(out.status.success(), || {
                format!("{} exited {:?}", args[0], out.status.code())
            })?;
            serde_json::from_slice::<serde_json::Value>(&out.stdout).map_err(|e| format!("{}: {e}", args[0]))?;
            Ok(Sha256::digest(&out.stdout).iter().map(|b| format!("{b:02x}")).collect())
        };
        let (a, b) = (digest(0)?, digest(1)?);
        ensure(a == b, || format!("{}: {a} != {b}", args[0]))?;
        hashes.push(format!("{} {}", args[0], &a[..12]));
    }
    Ok(hashes.join(", "))
}

fn property_suites() -> Result<String, String> {
    let completed = props::conservation(1000)?;
    ensure(completed >= 800, || {
        format!("only {completed} of 1000 generated models completed")
    })?;
    let parsed = props::fuzz(100_000)?;
    props::round_trip()?;
    Ok(format!(
        "1000 generated models conserve servers ({completed} ran to completion), 100000 fuzz inputs ({parsed} parsed), round trip fixed"
    ))
}

fn statistics() -> Result<String, String> {
    let d = Distribution::Bernoulli { p: 0.3 };
    let mut s = derive_stream(42, "acceptance.bernoulli");
    let hits: f64 = (0..10_000).map(|_| s.sample(&d).unwrap()).sum();
    let freq = hits / 10_000.0;
    ensure((freq - 0.3).abs() <= 0.02, || {
        format!("bernoulli(0.3) frequency {freq}")
    })?;

    let m = berth::load_reference_model();
    let mut ideal = berth::disruption_ladder().remove(0);
    ideal.replications = Some(20);
    let r = replicate(&m, &ideal).map_err(|e| e.to_string())?;
    ensure(r.std_days == 0.0, || {
        format!("deterministic scenario std {}", r.std_days)
    })?;

    let halfwidth = |n: u32, m: &ModelDef| -> Result<f64, String> {
        let mut o = berth::resource_ladder().remove(0);
        o.replications = Some(n);
        Ok(replicate(m, &o).map_err(|e| e.to_string())?.ci95_halfwidth_days)
    };
    let (h10, h1000) = (halfwidth(10, &m)?, halfwidth(1000, &m)?);
    ensure(h1000 < h10, || format!("CI halfwidth {h10} at n=10, {h1000} at n=1000"))?;
    Ok(format!(
        "bernoulli freq {freq:.4}, ideal std 0, CI halfwidth {h10:.3} (n=10) -> {h1000:.3} (n=1000)"
    ))
}

fn crash_advisor(ladder_final: f64) -> Result<String, String> {
    let m = berth::load_reference_model();
    let cm = parse_costs(berth::COSTS_SOURCE)?;
    let uniform = cm
        .options
        .iter()
        .all(|o| o.cost_per_unit == cm.options[0].cost_per_unit);
    ensure(uniform, || "unit costs are not uniform".into())?;
    let expected: Vec<String> = parse_scenarios(berth::RESOURCE_LADDER_SOURCE)
        .map_err(|e| e.to_string())?
        .last()
        .map(|o| o.resource_overrides.keys().cloned().collect())
        .unwrap_or_default();
    let mut offered: Vec<String> = cm.options.iter().map(|o| o.resource.clone()).collect();
    offered.sort();
    ensure(offered == expected, || {
        format!("options {offered:?} differ from ladder resources {expected:?}")
    })?;

    let mut base = berth::resource_ladder().remove(0);
    base.replications = Some(100);
    let plan = greedy_crash(&m, &base, &cm, f64::INFINITY).map_err(|e| e.to_string())?;
    ensure((plan.final_days() - ladder_final).abs() <= 1.0, || {
        format!("greedy final {:.3}, ladder final {ladder_final:.3}", plan.final_days())
    })?;
    let cost = plan.total_cost();
    ensure((198_450.0..=595_350.0).contains(&cost), || {
        format!("added cost {cost} outside the envelope")
    })?;

    let zero = greedy_crash(&m, &base, &cm, 0.0).map_err(|e| e.to_string())?;
    ensure(
        zero.steps.is_empty() && zero.frontier.len() == 1 && zero.frontier[0].additions.is_empty(),
        || {
            format!(
                "budget 0 gave {} steps, {} frontier points",
                zero.steps.len(),
                zero.frontier.len()
            )
        },
    )?;

    let full = exhaustive_crash(&m, &base, &cm, f64::INFINITY).map_err(|e| e.to_string())?;
    let dominated = |p: &FrontierPoint| {
        full.frontier
            .iter()
            .any(|q| q.cost <= p.cost && q.mean_days <= p.mean_days && (q.cost < p.cost || q.mean_days < p.mean_days))
    };
    ensure(!full.frontier.iter().any(dominated), || {
        "frontier has a dominated point".into()
    })?;
    Ok(format!(
        "greedy final {:.2} d vs ladder {ladder_final:.2} d, {} steps, added cost {cost:.2} USD; budget 0 keeps baseline {:.2} d; exhaustive frontier of {} points nondominated",
        plan.final_days(),
        plan.steps.len(),
        zero.baseline_days,
        full.frontier.len()
    ))
}

#[test]
fn acceptance() {
    let secs = |s| Some(Duration::from_secs(s));
    let mut ladder_final = f64::NAN;
    let outcomes = [
        criterion(1, "micro-model oracles", secs(1), micro_oracles),
        criterion(2, "ideal conditions", secs(5), ideal_conditions),
        criterion(3, "disruption ladder", secs(20), disruption_ladder),
        criterion(4, "resource ladder", secs(30), || resource_ladder(&mut ladder_final)),
        criterion(5, "CLI determinism", None, cli_determinism),
        criterion(6, "property suites", None, property_suites),
        criterion(7, "statistics", None, statistics),
        criterion(8, "crash advisor", None, || crash_advisor(ladder_final)),
    ];
    let failed: Vec<&Outcome> = outcomes.iter().filter(|o| !o.pass).collect();
    println!(
        "{} of {} criteria passed",
        outcomes.len() - failed.len(),
        outcomes.len()
    );
    assert!(
        failed.is_empty(),
        "failed criteria: {}",
        failed
            .iter()
            .map(|o| format!("\n  {} {}", o.id, o.line))
            .collect::<String>()
    );
}
