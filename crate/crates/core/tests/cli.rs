//! End-to-end checks on the `berthsim` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

const BIN: &str = env!("CARGO_BIN_EXE_berthsim");

fn models_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../models")
}

fn reference() -> PathBuf {
    models_dir().join("berth.psm")
}

fn berthsim(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("BERTHSIM_SEED")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

const NOISY: &str = "model m {
 resource Crew servers=1
 create c count=3
 capture k Crew:1
 task t dur=tri(2,4,9)
 release r Crew:1
 destroy d
 link c -> k
 link k -> t
 link t -> r
 link r -> d
}
";

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn validate_reports_counts_and_exit_codes() {
    let out = berthsim(&["validate", reference().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).contains(": ok ("), "{}", stdout(&out));
    assert!(stdout(&out).contains("3 submodels"));

    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.psm", "model m {\n create c\n task t dur=const(1\n}\n");
    let out = berthsim(&["validate", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("bad.psm:3:"), "{}", stderr(&out));

    let dangling = write(
        dir.path(),
        "dangling.psm",
        "model m {\n create c\n destroy d\n link c -> d\n link d -> nowhere\n}\n",
    );
    let out = berthsim(&["validate", dangling.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("dangling.psm:5:"), "{}", stderr(&out));
}

#[test]
fn runtime_failures_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    // Both entities hold one server and wait for the other's.
    let deadlock = write(
        dir.path(),
        "deadlock.psm",
        "model m {
 resource A servers=1
 resource B servers=1
 create x
 capture xa A:1
 task xt dur=const(1)
 capture xb B:1
 destroy xd
 create y
 capture yb B:1
 task yt dur=const(1)
 capture ya A:1
 destroy yd
 link x -> xa
 link xa -> xt
 link xt -> xb
 link xb -> xd
 link y -> yb
 link yb -> yt
 link yt -> ya
 link ya -> yd
}
",
    );
    let out = berthsim(&["run", deadlock.to_str().unwrap(), "--reps", "1"]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert!(stderr(&out).to_lowercase().contains("deadlock"), "{}", stderr(&out));

    let out = berthsim(&["run", "/nonexistent/model.psm"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn repeated_json_runs_are_byte_identical() {
    let model = reference();
    let scn = models_dir().join("resources.scn");
    let args: [&[&str]; 2] = [
        &[
            "run",
            model.to_str().unwrap(),
            "--scenarios",
            scn.to_str().unwrap(),
            "--reps",
            "5",
            "--seed",
            "9",
            "--format",
            "json",
        ],
        &[
            "sweep",
            model.to_str().unwrap(),
            "--ladder",
            "disruptions",
            "--reps",
            "5",
            "--format",
            "json",
        ],
    ];
    for a in args {
        let first = berthsim(a);
        let second = berthsim(a);
        assert_eq!(first.status.code(), Some(0), "{}", stderr(&first));
        assert_eq!(digest(&first.stdout), digest(&second.stdout));
        let doc: serde_json::Value = serde_json::from_slice(&first.stdout).unwrap();
        assert_eq!(doc["schema"], "berthsim.report/1");
    }
}

#[test]
fn seed_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let model = write(dir.path(), "m.psm", NOISY);
    let m = model.to_str().unwrap();
    let run = |extra: &[&str], env: Option<&str>| {
        let mut c = Command::new(BIN);
        c.args(["run", m, "--reps", "4", "--format", "json"])
            .args(extra)
            .env_remove("BERTHSIM_SEED");
        if let Some(s) = env {
            c.env("BERTHSIM_SEED", s);
        }
        let out = c.output().unwrap();
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
        let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        (
            doc["master_seed"].as_u64().unwrap(),
            doc["scenarios"][0]["mean_days"].as_f64().unwrap(),
        )
    };
    let default = run(&[], None);
    assert_eq!(default.0, 42);
    let from_env = run(&[], Some("7"));
    assert_eq!(from_env.0, 7);
    assert_ne!(from_env.1, default.1);
    assert_eq!(run(&["--seed", "7"], None), from_env);
    assert_eq!(run(&["--seed", "3"], Some("7")).0, 3);

    let scn = write(dir.path(), "s.scn", "scenario pinned {\n  seed = 11\n}\n");
    let pinned = ["--scenarios", scn.to_str().unwrap()];
    assert_eq!(run(&pinned, Some("7")).0, 11);
    assert_eq!(run(&[&pinned[..], &["--seed", "3"]].concat(), Some("7")).0, 3);

    let out = Command::new(BIN)
        .args(["run", m])
        .env("BERTHSIM_SEED", "x")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn trace_is_written_as_csv() {
    let dir = tempfile::tempdir().unwrap();
    let model = write(dir.path(), "m.psm", NOISY);
    let trace = dir.path().join("trace.csv");
    let out = berthsim(&[
        "run",
        model.to_str().unwrap(),
        "--reps",
        "2",
        "--trace",
        trace.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = fs::read_to_string(&trace).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("time,seq,element_id,entity_id,action"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.iter().filter(|r| r.ends_with(",capture")).count(), 3);
    assert!(rows.iter().all(|r| r.split(',').count() == 5));
}

#[test]
fn sweep_warns_on_non_cumulative_ladders() {
    let dir = tempfile::tempdir().unwrap();
    let model = write(dir.path(), "m.psm", NOISY);
    let ladder = write(
        dir.path(),
        "l.scn",
        "scenario a {\n  resource Crew = 2\n}\n\nscenario b {\n}\n",
    );
    let out = berthsim(&[
        "sweep",
        model.to_str().unwrap(),
        "--ladder",
        ladder.to_str().unwrap(),
        "--reps",
        "3",
        "--format",
        "csv",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(
        stderr(&out).contains("warning: non-cumulative ladder at `b`"),
        "{}",
        stderr(&out)
    );
    assert_eq!(stdout(&out).lines().count(), 3);
}

#[test]
fn crash_with_zero_budget_keeps_the_baseline() {
    let out = berthsim(&[
        "crash",
        reference().to_str().unwrap(),
        "--costs",
        models_dir().join("costs.usd").to_str().unwrap(),
        "--budget",
        "0",
        "--reps",
        "2",
        "--format",
        "json",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["schema"], "berthsim.crash/1");
    assert_eq!(doc["plan"]["steps"], serde_json::json!([]));
    assert_eq!(doc["plan"]["frontier"].as_array().unwrap().len(), 1);
}

#[test]
fn calibrate_recovers_a_known_outage() {
    // Certain weather every 10 days on a 30-day task: end = 30 + 3 * outage
    // while the outage is shorter than the gap to the next check.
    let dir = tempfile::tempdir().unwrap();
    let model = write(
        dir.path(),
        "w.psm",
        "model m {
 state ok = true
 valve wx state=ok
 create c
 task t dur=const(30) sensitive=weather
 destroy d
 link c -> t
 link t -> d
 submodel weather enabled=false {
  weather valve=wx cycle=10 p=1 outage=const(1) tag=weather
 }
}
",
    );
    write(dir.path(), "w.scn", "scenario wet {\n  submodel weather = on\n}\n");
    let targets = write(
        dir.path(),
        "w.targets",
        "scenarios = w.scn\nreps = 2\ntolerance = 0.01\ncalibrate weather.outage scenario=wet target=36 low=0 high=5\n",
    );
    let fitted = dir.path().join("fitted.psm");
    let out = berthsim(&[
        "calibrate",
        model.to_str().unwrap(),
        "--targets",
        targets.to_str().unwrap(),
        "--out",
        fitted.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["converged"], true);
    let value = doc["entries"][0]["value"].as_f64().unwrap();
    assert!((value - 2.0).abs() < 0.01 / 3.0 + 1e-9, "{value}");
    let check = berthsim(&["validate", fitted.to_str().unwrap()]);
    assert_eq!(check.status.code(), Some(0), "{}", stderr(&check));
}
