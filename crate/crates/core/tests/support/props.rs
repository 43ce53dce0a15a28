//! Random-model generator and the property suites shared by the
//! `properties` and `acceptance` targets.

use std::collections::HashMap;

use berthsim::berth;
use berthsim::model::{parse_scenarios, write_scenarios};
use berthsim::sim::{Action, TraceRecord};
use berthsim::{derive_stream, parse, serialize, validate, CompiledModel, RunOptions, SimError};
use proptest::prelude::*;

#[derive(Debug, Clone)]
enum Block {
    /// Atomic capture of one or two resources around a task.
    Hold {
        res: Vec<(usize, u32)>,
        dur: f64,
    },
    /// Capture one resource, then a second with a higher index.
    Nested {
        first: usize,
        second: usize,
        d1: f64,
        d2: f64,
    },
    Preempt {
        res: usize,
        dur: f64,
    },
    Branch {
        p: f64,
        d1: f64,
        d2: f64,
    },
    Batch {
        dur: f64,
    },
    Fork {
        dur: f64,
    },
    Gate {
        dur: f64,
    },
}

impl Block {
    fn size(&self) -> usize {
        match self {
            Block::Nested { .. } => 6,
            Block::Gate { .. } => 4,
            _ => 3,
        }
    }
}

#[derive(Debug, Clone)]
struct Shape {
    servers: Vec<u32>,
    count: u32,
    exp_arrivals: bool,
    blocks: Vec<Block>,
}

fn dur() -> impl Strategy<Value = f64> {
    prop_oneof![Just(0.0), 0.1f64..5.0]
}

fn block(nres: usize) -> impl Strategy<Value = Block> {
    let hold = (prop::collection::btree_set(0..nres, 1..=nres.min(2)), 1u32..=3, dur()).prop_map(|(set, a, dur)| {
        Block::Hold {
            res: set.into_iter().map(|r| (r, a)).collect(),
            dur,
        }
    });
    // distinct resources in index order, so nested holds cannot form a cycle
    let nested = (0..nres, 0..nres, dur(), dur()).prop_map(|(a, b, d1, d2)| {
        if a == b {
            Block::Hold {
                res: vec![(a, 1)],
                dur: d1 + d2,
            }
        } else {
            Block::Nested {
                first: a.min(b),
                second: a.max(b),
                d1,
                d2,
            }
        }
    });
    prop_oneof![
        3 => hold,
        2 => nested,
        1 => (0..nres, dur()).prop_map(|(res, dur)| Block::Preempt { res, dur }),
        1 => (0.05f64..0.95, dur(), dur()).prop_map(|(p, d1, d2)| Block::Branch { p, d1, d2 }),
        1 => dur().prop_map(|dur| Block::Batch { dur }),
        1 => dur().prop_map(|dur| Block::Fork { dur }),
        1 => dur().prop_map(|dur| Block::Gate { dur }),
    ]
}

fn shape() -> impl Strategy<Value = Shape> {
    prop::collection::vec(1u32..=3, 1..=3).prop_flat_map(|servers| {
        let n = servers.len();
        (
            Just(servers),
            prop_oneof![Just(2u32), Just(4), Just(6), Just(8)],
            any::<bool>(),
            prop::collection::vec(block(n), 1..=6),
        )
            .prop_map(|(servers, count, exp_arrivals, blocks)| Shape {
                servers,
                count,
                exp_arrivals,
                blocks,
            })
    })
}

/// Renders the shape as model source, keeping at most 20 elements.
fn render(shape: &Shape) -> String {
    let mut s = String::from("model rnd {\n");
    for (i, k) in shape.servers.iter().enumerate() {
        s += &format!("  resource R{i} servers={k}\n");
    }
    let ia = if shape.exp_arrivals { "exp(1.5)" } else { "const(1)" };
    s += &format!("  create src count={} interarrival={ia}\n", shape.count);
    let mut links = Vec::new();
    let mut tails = vec!["src".to_string()];
    let mut used = 2;
    for (b, blk) in shape.blocks.iter().enumerate() {
        if used + blk.size() > 20 {
            break;
        }
        used += blk.size();
        let id = |x: &str| format!("b{b}.{x}");
        let mut chain = |ids: &[String], tails: &mut Vec<String>| {
            for t in tails.drain(..) {
                links.push(format!("{t} -> {}", ids[0]));
            }
            for w in ids.windows(2) {
                links.push(format!("{} -> {}", w[0], w[1]));
            }
            tails.push(ids[ids.len() - 1].clone());
        };
        match blk {
            Block::Hold { res, dur } => {
                let req: Vec<String> = res
                    .iter()
                    .map(|(r, a)| format!("R{r}:{}", a.min(&shape.servers[*r])))
                    .collect();
                s += &format!("  capture {} {}\n", id("get"), req.join(" "));
                s += &format!("  task {} dur=const({dur})\n", id("work"));
                s += &format!("  release {} {}\n", id("put"), req.join(" "));
                chain(&[id("get"), id("work"), id("put")], &mut tails);
            }
            Block::Nested { first, second, d1, d2 } => {
                s += &format!("  capture {} R{first}:1\n", id("ga"));
                s += &format!("  task {} dur=const({d1})\n", id("wa"));
                s += &format!("  capture {} R{second}:1\n", id("gb"));
                s += &format!("  task {} dur=const({d2})\n", id("wb"));
                s += &format!("  release {} R{second}:1\n", id("pb"));
                s += &format!("  release {} R{first}:1\n", id("pa"));
                chain(
                    &[id("ga"), id("wa"), id("gb"), id("wb"), id("pb"), id("pa")],
                    &mut tails,
                );
            }
            Block::Preempt { res, dur } => {
                s += &format!("  preempt {} resource=R{res}\n", id("take"));
                s += &format!("  task {} dur=const({dur})\n", id("work"));
                s += &format!("  release {} R{res}:1\n", id("give"));
                chain(&[id("take"), id("work"), id("give")], &mut tails);
            }
            Block::Branch { p, d1, d2 } => {
                s += &format!("  probabilistic_branch {} probs={p},{}\n", id("br"), 1.0 - p);
                s += &format!("  task {} dur=exp({})\n", id("x"), d1.max(0.1));
                s += &format!("  task {} dur=uniform(0,{d2})\n", id("y"));
                for t in tails.drain(..) {
                    links.push(format!("{t} -> {}", id("br")));
                }
                links.push(format!("{} -> {}", id("br"), id("x")));
                links.push(format!("{}.1 -> {}", id("br"), id("y")));
                tails.push(id("x"));
                tails.push(id("y"));
            }
            Block::Batch { dur } => {
                s += &format!("  batch {} n=2\n", id("pack"));
                s += &format!("  task {} dur=const({dur})\n", id("move"));
                s += &format!("  unbatch {}\n", id("unpack"));
                chain(&[id("pack"), id("move"), id("unpack")], &mut tails);
            }
            Block::Fork { dur } => {
                s += &format!("  generate {} clones=1\n", id("fork"));
                s += &format!("  task {} dur=const({dur})\n", id("work"));
                s += &format!("  consolidate {} n=2\n", id("join"));
                for t in tails.drain(..) {
                    links.push(format!("{t} -> {}", id("fork")));
                }
                links.push(format!("{} -> {}", id("fork"), id("work")));
                links.push(format!("{}.1 -> {}", id("fork"), id("work")));
                links.push(format!("{} -> {}", id("work"), id("join")));
                tails.push(id("join"));
            }
            Block::Gate { dur } => {
                s += &format!("  state g{b} = true\n");
                s += &format!("  activator {} valve={} open=false\n", id("shut"), id("gate"));
                s += &format!("  task {} dur=const({dur})\n", id("work"));
                s += &format!("  activator {} valve={} open=true\n", id("open"), id("gate"));
                s += &format!("  valve {} state=g{b}\n", id("gate"));
                chain(&[id("shut"), id("work"), id("open"), id("gate")], &mut tails);
            }
        }
    }
    s += "  destroy sink\n";
    for t in tails {
        links.push(format!("{t} -> sink"));
    }
    for l in links {
        s += &format!("  link {l}\n");
    }
    s += "}\n";
    s
}

/// Replays a trace, checking server accounting against the recorded levels.
fn check_trace(cm: &CompiledModel, servers: &[u32], trace: &[TraceRecord]) -> Result<(), String> {
    let names = cm.resource_names();
    let index: HashMap<&str, usize> = names.iter().enumerate().map(|(i, n)| (*n, i)).collect();
    let n = names.len();
    let mut level = vec![(0u32, 0u32); n];
    let mut held: HashMap<(u64, usize), u32> = HashMap::new();
    let mut tokens = vec![0u32; n];
    for rec in trace {
        if rec.levels.is_empty() {
            continue;
        }
        let amounts: Vec<(usize, u32)> = rec.resources.iter().map(|(r, a)| (index[r.as_str()], *a)).collect();
        let ent = rec.entity.map(|e| e.0).ok_or("resource record without entity")?;
        let touched = |r: usize| amounts.iter().find(|(x, _)| *x == r).map(|(_, a)| *a);
        for (r, (&(b0, p0), &(b1, p1))) in level.iter().zip(&rec.levels).enumerate() {
            if b1 + p1 > servers[r] {
                return Err(format!(
                    "t={} {}: {b1}+{p1} servers in use of {}",
                    rec.time, names[r], servers[r]
                ));
            }
            let ok = match (rec.action, touched(r)) {
                (_, None) => b1 == b0 && p1 == p0,
                (Action::Capture, Some(a)) => b1 == b0 + a && p1 == p0,
                (Action::Preempt, Some(1)) => p1 == p0 + 1 && (b1 == b0 || b1 + 1 == b0),
                (Action::Resume, Some(k)) => p1 + k == p0 && b1 >= b0 && b1 <= b0 + k,
                (Action::Release, Some(a)) => p1 == p0 && b1 <= b0 && b0 - b1 <= a,
                _ => false,
            };
            if !ok {
                return Err(format!(
                    "t={} {} {}: ({b0},{p0}) -> ({b1},{p1}) with {:?}",
                    rec.time, rec.element, rec.action, amounts
                ));
            }
        }
        for &(r, a) in &amounts {
            match rec.action {
                Action::Capture => *held.entry((ent, r)).or_insert(0) += a,
                Action::Release => {
                    let h = held.entry((ent, r)).or_insert(0);
                    if *h < a {
                        return Err(format!("entity {ent} releases {a} of {} holding {h}", names[r]));
                    }
                    *h -= a;
                }
                Action::Preempt => tokens[r] += a,
                Action::Resume => tokens[r] -= a,
                _ => {}
            }
        }
        level.copy_from_slice(&rec.levels);
        for r in 0..n {
            let total: u32 = held.iter().filter(|((_, x), _)| *x == r).map(|(_, h)| h).sum();
            let (b, _) = level[r];
            // suspended grants are covered by preemption tokens
            if total < b || total > b + tokens[r] {
                return Err(format!("{}: held {total}, busy {b}, tokens {}", names[r], tokens[r]));
            }
        }
    }
    if level.iter().any(|&l| l != (0, 0)) || held.values().any(|&h| h > 0) {
        return Err(format!("servers still in use at the end: {level:?}"));
    }
    Ok(())
}

/// Parses, runs and replays one generated model; returns whether the run
/// completed.
fn run_generated(shape: &Shape, seed: u64) -> Result<bool, TestCaseError> {
    let src = render(shape);
    let m = parse(&src).map_err(|e| TestCaseError::fail(format!("{e}\n{src}")))?;
    prop_assert!(m.elements.len() <= 20);
    let diags = validate(&m);
    prop_assert!(diags.is_empty(), "{:?}\n{}", diags, src);
    let cm = CompiledModel::new(&m).unwrap();
    let opts = RunOptions {
        trace: true,
        ..RunOptions::default()
    };
    match cm.run(seed, &opts) {
        Ok(run) => {
            let trace = run.trace.expect("trace requested");
            check_trace(&cm, &shape.servers, &trace).map_err(|msg| TestCaseError::fail(format!("{msg}\n{src}")))?;
            prop_assert_eq!(run.created, run.destroyed);
            Ok(true)
        }
        // two preemptors may outnumber the servers; that is a modelled fault
        Err(SimError::AlreadyFullyPreempted(_)) => Ok(false),
        Err(e) => Err(TestCaseError::fail(format!("{e}\n{src}"))),
    }
}

/// Generates `cases` random models, runs each once and replays its trace.
/// Returns how many runs completed.
pub fn conservation(cases: u32) -> Result<u32, String> {
    use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
    use std::cell::Cell;

    let completed = Cell::new(0u32);
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    let mut runner = TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    runner
        .run(&(shape(), any::<u64>()), |(shape, seed)| {
            if run_generated(&shape, seed)? {
                completed.set(completed.get() + 1);
            }
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok(completed.get())
}

/// Parse/serialize is a fixed point on the bundled model and ladders.
pub fn round_trip() -> Result<(), String> {
    let m = berth::load_reference_model();
    let text = serialize(&m);
    let again = parse(&text).map_err(|e| e.to_string())?;
    if again != m {
        return Err("reparsed reference model differs".into());
    }
    if serialize(&again) != text {
        return Err("second serialization differs".into());
    }
    for src in [berth::DISRUPTION_LADDER_SOURCE, berth::RESOURCE_LADDER_SOURCE] {
        let ladder = parse_scenarios(src).map_err(|e| e.to_string())?;
        let text = write_scenarios(&ladder);
        if parse_scenarios(&text).map_err(|e| e.to_string())? != ladder {
            return Err("scenario ladder does not round-trip".into());
        }
    }
    Ok(())
}

const FRAGMENTS: &[&str] = &[
    "model",
    "m",
    "{",
    "}",
    "\n",
    " ",
    "=",
    "->",
    ".",
    ".1",
    "#",
    "\"",
    "resource",
    "servers=",
    "create",
    "task",
    "capture",
    "release",
    "preempt",
    "batch",
    "unbatch",
    "generate",
    "consolidate",
    "conditional_branch",
    "probabilistic_branch",
    "valve",
    "activator",
    "execute",
    "counter",
    "destroy",
    "link",
    "state",
    "submodel",
    "weather",
    "breakdown",
    "length",
    "dur=",
    "const(",
    "tri(",
    "exp(",
    "disc(",
    ")",
    ",",
    ":",
    "1",
    "0",
    "-3",
    "1e309",
    "nan",
    "R:1",
    "probs=",
    "0.5",
    "count=",
    "n=",
    "open=true",
    "\"x > 1 && y\"",
    "\"a = b + 1\"",
];

/// Splices random fragments and raw bytes into valid sources and parses
/// them; a panic propagates. Returns how many inputs parsed.
pub fn fuzz(inputs: usize) -> Result<usize, String> {
    let base = [
        berth::MODEL_SOURCE,
        "model a {\n  resource R servers=2\n  create c count=3 interarrival=exp(2)\n  capture g R:1\n  task t dur=tri(1,2,3)\n  release p R:1\n  destroy d\n  link c -> g\n  link g -> t\n  link t -> p\n  link p -> d\n}\n",
    ];
    let mut rng = derive_stream(7, "fuzz");
    let mut parsed = 0;
    for i in 0..inputs {
        let mut bytes: Vec<u8> = if i % 3 == 0 {
            Vec::new()
        } else {
            let b = base[(rng.next_u64() % 2) as usize].as_bytes();
            let cut = (rng.next_u64() as usize) % (b.len().min(600) + 1);
            b[..cut].to_vec()
        };
        for _ in 0..(rng.next_u64() % 12) {
            let pos = (rng.next_u64() as usize) % (bytes.len() + 1);
            let piece: Vec<u8> = if rng.next_u64().is_multiple_of(4) {
                (0..(1 + rng.next_u64() % 4)).map(|_| rng.next_u64() as u8).collect()
            } else {
                FRAGMENTS[(rng.next_u64() as usize) % FRAGMENTS.len()]
                    .as_bytes()
                    .to_vec()
            };
            bytes.splice(pos..pos, piece);
        }
        let text = String::from_utf8_lossy(&bytes);
        if let Ok(m) = parse(&text) {
            parsed += 1;
            let _ = validate(&m);
            let again = parse(&serialize(&m)).map_err(|e| format!("serialized text fails to parse: {e}"))?;
            if again != m {
                return Err(format!("round trip changed the model parsed from {text:?}"));
            }
        }
        let _ = parse_scenarios(&text);
    }
    Ok(parsed)
}
