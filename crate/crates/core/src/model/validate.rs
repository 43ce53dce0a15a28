use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::disruptions::DisruptionSpec;
use crate::model::{ElementKind, ModelDef};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Warning,
    Error,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Warning => "warning",
            Severity::Error => "error",
        })
    }
}

/// A validation finding. `subject` names the element, resource or submodel
/// the finding is about, when there is one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub subject: Option<String>,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.subject {
            Some(s) => write!(f, "{}: `{}`: {}", self.severity, s, self.message),
            None => write!(f, "{}: {}", self.severity, self.message),
        }
    }
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
}

struct Sink(Vec<Diagnostic>);

impl Sink {
    fn error(&mut self, subject: Option<&str>, message: impl Into<String>) {
        self.0.push(Diagnostic {
            severity: Severity::Error,
            subject: subject.map(str::to_string),
            message: message.into(),
        });
    }
}

/// Checks every structural invariant of a model. Returns an empty list iff
/// the model is well formed.
pub fn validate(m: &ModelDef) -> Vec<Diagnostic> {
    let mut d = Sink(Vec::new());

    if !is_identifier(&m.name) {
        d.error(None, format!("model name `{}` is not an identifier", m.name));
    }
    if !(m.length_m.is_finite() && m.length_m > 0.0) {
        d.error(None, format!("length must be positive, got {}", m.length_m));
    }

    let mut resources = HashMap::new();
    for r in &m.resources {
        if !is_identifier(&r.name) {
            d.error(Some(&r.name), "resource name is not an identifier");
        }
        if resources.insert(r.name.as_str(), r.servers).is_some() {
            d.error(Some(&r.name), "duplicate resource");
        }
        if r.servers == 0 {
            d.error(Some(&r.name), "resource needs at least one server");
        }
    }
    let mut files = HashSet::new();
    for f in &m.files {
        if !is_identifier(f) {
            d.error(Some(f), "file name is not an identifier");
        }
        if !files.insert(f.as_str()) {
            d.error(Some(f), "duplicate file");
        }
    }
    let mut states = HashSet::new();
    for s in &m.states {
        if !is_identifier(&s.name) {
            d.error(Some(&s.name), "state name is not an identifier");
        }
        if !states.insert(s.name.as_str()) {
            d.error(Some(&s.name), "duplicate state variable");
        }
        if let crate::sim::Value::Num(x) = s.init {
            if !x.is_finite() {
                d.error(Some(&s.name), "state initial value must be finite");
            }
        }
    }

    let mut elements: HashMap<&str, &ElementKind> = HashMap::new();
    for e in &m.elements {
        if !is_identifier(&e.id) {
            d.error(Some(&e.id), "element id is not an identifier");
        }
        if elements.insert(e.id.as_str(), &e.kind).is_some() {
            d.error(Some(&e.id), "duplicate element id");
        }
    }
    for e in &m.elements {
        if let Some((head, tail)) = e.id.rsplit_once('.') {
            if elements.contains_key(head) && tail.parse::<u32>().is_ok() {
                d.error(
                    Some(&e.id),
                    format!("element id is ambiguous with port {tail} of `{head}`"),
                );
            }
        }
    }
    let is_valve = |id: &str| matches!(elements.get(id), Some(ElementKind::Valve { .. }));

    let check_resource = |d: &mut Sink, el: &str, res: &str, n: Option<u32>| match resources.get(res) {
        None => d.error(Some(el), format!("references undeclared resource `{res}`")),
        Some(&total) => {
            if let Some(n) = n {
                if n == 0 {
                    d.error(Some(el), format!("request for `{res}` must be at least 1"));
                } else if n > total {
                    d.error(
                        Some(el),
                        format!("unsatisfiable request: {n} of `{res}` but only {total} server(s) declared"),
                    );
                }
            }
        }
    };

    let mut creates = 0;
    let mut destroys = 0;
    for e in &m.elements {
        let id = e.id.as_str();
        let dist_ok = |d: &mut Sink, what: &str, dist: &crate::stochastics::Distribution| {
            if let Err(err) = dist.validate() {
                d.error(Some(id), format!("{what}: {err}"));
            }
        };
        match &e.kind {
            ElementKind::Create {
                count, interarrival, ..
            } => {
                creates += 1;
                if *count == 0 {
                    d.error(Some(id), "create count must be at least 1");
                }
                dist_ok(&mut d, "interarrival", interarrival);
            }
            ElementKind::Task {
                duration,
                tags,
                valve,
                usage,
            } => {
                dist_ok(&mut d, "duration", duration);
                for t in tags {
                    if !is_identifier(t) {
                        d.error(Some(id), format!("tag `{t}` is not an identifier"));
                    }
                }
                if let Some(v) = valve {
                    if !is_valve(v) {
                        d.error(Some(id), format!("governing valve `{v}` is not a declared valve"));
                    }
                }
                if let Some(r) = usage {
                    check_resource(&mut d, id, r, None);
                }
            }
            ElementKind::Capture { requests, file } => {
                if requests.is_empty() {
                    d.error(Some(id), "capture requests no resources");
                }
                let mut seen = HashSet::new();
                for r in requests {
                    if !seen.insert(&r.resource) {
                        d.error(Some(id), format!("resource `{}` requested twice", r.resource));
                    }
                    check_resource(&mut d, id, &r.resource, Some(r.servers));
                }
                if let Some(f) = file {
                    if !files.contains(f.as_str()) {
                        d.error(Some(id), format!("references undeclared file `{f}`"));
                    }
                }
            }
            ElementKind::Release { releases } => {
                if releases.is_empty() {
                    d.error(Some(id), "release lists no resources");
                }
                for r in releases {
                    check_resource(&mut d, id, &r.resource, Some(r.servers));
                }
            }
            ElementKind::Preempt { resource } => check_resource(&mut d, id, resource, None),
            ElementKind::Batch { size } | ElementKind::Consolidate { size } => {
                if *size == 0 {
                    d.error(Some(id), "size must be at least 1");
                }
            }
            ElementKind::Generate { clones } => {
                if *clones == 0 {
                    d.error(Some(id), "clone count must be at least 1");
                }
            }
            ElementKind::ProbabilisticBranch { probs } => {
                let sum: f64 = probs.iter().sum();
                if probs.is_empty() || probs.iter().any(|p| !(0.0..=1.0).contains(p)) || (sum - 1.0).abs() > 1e-9 {
                    d.error(
                        Some(id),
                        format!("bad probabilities: {probs:?} must lie in [0,1] and sum to 1 (sum is {sum})"),
                    );
                }
            }
            ElementKind::Valve { state } => {
                if !states.contains(state.as_str()) {
                    d.error(Some(id), format!("references undeclared state `{state}`"));
                }
            }
            ElementKind::Activator { valve, .. } => {
                if !is_valve(valve) {
                    d.error(Some(id), format!("unknown valve `{valve}`"));
                }
            }
            ElementKind::Counter { tally } => {
                if let Some(t) = tally {
                    if !is_identifier(t) {
                        d.error(Some(id), "counter name is not an identifier");
                    }
                }
            }
            ElementKind::Destroy => destroys += 1,
            ElementKind::Unbatch | ElementKind::ConditionalBranch { .. } | ElementKind::Execute { .. } => {}
        }
    }
    if creates == 0 {
        d.error(None, "model has no create element");
    }
    if destroys == 0 {
        d.error(None, "model has no destroy element");
    }

    // Links: endpoints, ports, one link per output port.
    let mut out_links: HashMap<(&str, u32), usize> = HashMap::new();
    let mut succ: HashMap<&str, Vec<&str>> = HashMap::new();
    let mut has_input: HashSet<&str> = HashSet::new();
    for l in &m.links {
        let from = elements.get(l.from.as_str());
        let to = elements.get(l.to.as_str());
        if from.is_none() {
            d.error(
                Some(&l.from),
                format!("dangling link: `{}` is not a declared element", l.from),
            );
        }
        if to.is_none() {
            d.error(
                Some(&l.to),
                format!("dangling link: `{}` is not a declared element", l.to),
            );
        }
        if let Some(k) = to {
            if matches!(k, ElementKind::Create { .. }) {
                d.error(Some(&l.to), "create elements take no input links");
            }
        }
        if let Some(k) = from {
            if l.port >= k.out_ports() {
                d.error(
                    Some(&l.from),
                    format!(
                        "link uses port {} but `{}` has {} output port(s)",
                        l.port,
                        k.keyword(),
                        k.out_ports()
                    ),
                );
            }
        }
        *out_links.entry((l.from.as_str(), l.port)).or_default() += 1;
        succ.entry(l.from.as_str()).or_default().push(l.to.as_str());
        has_input.insert(l.to.as_str());
    }
    for e in &m.elements {
        let standalone_valve = matches!(e.kind, ElementKind::Valve { .. }) && !has_input.contains(e.id.as_str());
        for port in 0..e.kind.out_ports() {
            match out_links.get(&(e.id.as_str(), port)).copied().unwrap_or(0) {
                0 if !standalone_valve => d.error(Some(&e.id), format!("unlinked output port {port}")),
                0 | 1 => {}
                n => d.error(Some(&e.id), format!("output port {port} has {n} links; expected one")),
            }
        }
    }

    // Reachability from creates. Valves with no inputs only govern tasks.
    let mut seen: HashSet<&str> = HashSet::new();
    let mut queue: VecDeque<&str> = m
        .elements
        .iter()
        .filter(|e| matches!(e.kind, ElementKind::Create { .. }))
        .map(|e| e.id.as_str())
        .collect();
    while let Some(id) = queue.pop_front() {
        if seen.insert(id) {
            for &n in succ.get(id).map(Vec::as_slice).unwrap_or(&[]) {
                queue.push_back(n);
            }
        }
    }
    for e in &m.elements {
        let standalone_valve = matches!(e.kind, ElementKind::Valve { .. }) && !has_input.contains(e.id.as_str());
        if !seen.contains(e.id.as_str()) && !standalone_valve {
            d.error(Some(&e.id), "element is not reachable from any create");
        }
    }

    let mut subs = HashSet::new();
    for s in &m.submodels {
        let name = Some(s.name.as_str());
        if !is_identifier(&s.name) {
            d.error(name, "submodel name is not an identifier");
        }
        if !subs.insert(s.name.as_str()) {
            d.error(name, "duplicate submodel");
        }
        match &s.spec {
            DisruptionSpec::Weather(w) => {
                if !is_valve(&w.valve) {
                    d.error(name, format!("missing valve `{}`", w.valve));
                }
                for msg in w.check() {
                    d.error(name, msg);
                }
            }
            DisruptionSpec::Breakdown(b) => {
                if !resources.contains_key(b.resource.as_str()) {
                    d.error(name, format!("unknown resource `{}`", b.resource));
                }
                for msg in b.check() {
                    d.error(name, msg);
                }
            }
        }
    }

    d.0
}
