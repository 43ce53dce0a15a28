use std::fmt::Write;

use crate::disruptions::{BreakdownClock, DisruptionSpec};
use crate::model::{ElementKind, ModelDef, Request};

fn requests(out: &mut String, rs: &[Request]) {
    for r in rs {
        let _ = write!(out, " {}:{}", r.resource, r.servers);
    }
}

fn quoted(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

/// Writes a model back to source form. Comments and layout of the original
/// text are not preserved; `parse(serialize(m)) == m` for any valid model.
pub fn serialize(m: &ModelDef) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "model {} {{", m.name);
    let _ = writeln!(out, "  length = {}", m.length_m);
    for r in &m.resources {
        let _ = writeln!(out, "  resource {} servers={}", r.name, r.servers);
    }
    for f in &m.files {
        let _ = writeln!(out, "  file {f}");
    }
    for s in &m.states {
        let _ = writeln!(out, "  state {} = {}", s.name, s.init);
    }
    for e in &m.elements {
        let mut line = format!("  {} {}", e.kind.keyword(), e.id);
        match &e.kind {
            ElementKind::Create {
                count,
                interarrival,
                daemon,
            } => {
                let _ = write!(line, " count={count} interarrival={interarrival}");
                if *daemon {
                    line.push_str(" daemon");
                }
            }
            ElementKind::Task {
                duration,
                tags,
                valve,
                usage,
            } => {
                let _ = write!(line, " dur={duration}");
                for t in tags {
                    let _ = write!(line, " sensitive={t}");
                }
                if let Some(v) = valve {
                    let _ = write!(line, " valve={v}");
                }
                if let Some(u) = usage {
                    let _ = write!(line, " usage={u}");
                }
            }
            ElementKind::Capture { requests: rs, file } => {
                requests(&mut line, rs);
                if let Some(f) = file {
                    let _ = write!(line, " file={f}");
                }
            }
            ElementKind::Release { releases } => requests(&mut line, releases),
            ElementKind::Preempt { resource } => {
                let _ = write!(line, " resource={resource}");
            }
            ElementKind::Batch { size } | ElementKind::Consolidate { size } => {
                let _ = write!(line, " n={size}");
            }
            ElementKind::Generate { clones } => {
                let _ = write!(line, " clones={clones}");
            }
            ElementKind::ConditionalBranch { predicate } => {
                let _ = write!(line, " {}", quoted(&predicate.to_string()));
            }
            ElementKind::ProbabilisticBranch { probs } => {
                let ps: Vec<String> = probs.iter().map(|p| p.to_string()).collect();
                let _ = write!(line, " probs={}", ps.join(","));
            }
            ElementKind::Valve { state } => {
                let _ = write!(line, " state={state}");
            }
            ElementKind::Activator { valve, open } => {
                let _ = write!(line, " valve={valve} open={open}");
            }
            ElementKind::Execute { formula } => {
                let _ = write!(line, " {}", quoted(&formula.to_string()));
            }
            ElementKind::Counter { tally } => {
                if let Some(t) = tally {
                    let _ = write!(line, " name={t}");
                }
            }
            ElementKind::Unbatch | ElementKind::Destroy => {}
        }
        out.push_str(&line);
        out.push('\n');
    }
    for l in &m.links {
        if l.port == 0 {
            let _ = writeln!(out, "  link {} -> {}", l.from, l.to);
        } else {
            let _ = writeln!(out, "  link {}.{} -> {}", l.from, l.port, l.to);
        }
    }
    for s in &m.submodels {
        let enabled = if s.enabled { "" } else { " enabled=false" };
        let _ = writeln!(out, "  submodel {}{} {{", s.name, enabled);
        match &s.spec {
            DisruptionSpec::Weather(w) => {
                let _ = writeln!(
                    out,
                    "    weather valve={} cycle={} p={} outage={} tag={}",
                    w.valve, w.cycle_days, w.probability, w.outage, w.tag
                );
            }
            DisruptionSpec::Breakdown(b) => {
                let clock = match b.clock {
                    BreakdownClock::Usage => "usage",
                    BreakdownClock::Calendar => "calendar",
                };
                let _ = writeln!(
                    out,
                    "    breakdown resource={} trigger={} p_major={} minor={} major={} clock={clock}",
                    b.resource, b.trigger, b.p_major, b.minor_repair, b.major_repair
                );
            }
        }
        out.push_str("  }\n");
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse;

    #[test]
    fn round_trip_preserves_structure_and_link_order() {
        let src = concat!(
            "model demo {\n",
            " length = 42.5\n",
            " resource R servers=2\n",
            " file q\n",
            " state open = true\n",
            " state n = 0\n",
            " create c count=3 interarrival=tri(1,2,3)\n",
            " capture k R:2 file=q\n",
            " conditional_branch cb \"n >= 2 && !(open == 0)\"\n",
            " execute e \"n = n + 1\"\n",
            " release r R:2\n",
            " probabilistic_branch p probs=0.25,0.75\n",
            " counter k2 name=done\n",
            " valve v state=open\n",
            " destroy d\n",
            " link c -> k\n link k -> cb\n link cb.1 -> e\n link cb -> e\n link e -> r\n",
            " link r -> p\n link p.1 -> k2\n link p -> k2\n link k2 -> d\n",
            " submodel wx enabled=false {\n  weather valve=v p=0.5 outage=exp(0.25)\n }\n",
            " submodel bd {\n  breakdown resource=R trigger=disc(1:0.5,2:0.5)\n }\n",
            "}\n"
        );
        let m = parse(src).unwrap();
        let text = serialize(&m);
        let again = parse(&text).unwrap();
        assert_eq!(m, again);
        assert_eq!(serialize(&again), text);
    }
}
