//! Executable element library: compiles a [`ModelDef`] into an indexed
//! graph and runs it on the event kernel.

mod engine;

use std::collections::HashMap;

use crate::disruptions;
use crate::error::SimError;
use crate::model::{validate, ElementKind, Expr, Formula, ModelDef, Severity};
use crate::sim::{RunResult, Value, DEFAULT_EVENT_CEILING};
use crate::stochastics::Distribution;

pub use engine::Simulation;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub trace: bool,
    pub event_ceiling: u64,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            trace: false,
            event_ceiling: DEFAULT_EVENT_CEILING,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) enum CKind {
    Create {
        count: u64,
        interarrival: Distribution,
        daemon: bool,
    },
    Task {
        duration: Distribution,
        valve: Option<usize>,
        usage: Option<usize>,
    },
    Capture {
        requests: Vec<(usize, u32)>,
        file: usize,
    },
    Release {
        releases: Vec<(usize, u32)>,
    },
    Preempt {
        resource: usize,
    },
    Batch {
        size: usize,
    },
    Unbatch,
    Generate {
        clones: u32,
    },
    Consolidate {
        size: usize,
    },
    Conditional {
        predicate: Expr,
    },
    Probabilistic {
        cumulative: Vec<f64>,
    },
    Valve {
        state: String,
    },
    Activator {
        valve: usize,
        open: bool,
    },
    Execute {
        formula: Formula,
    },
    Counter {
        tally: usize,
    },
    Destroy,
}

#[derive(Debug, Clone)]
pub(crate) struct CElement {
    pub id: String,
    pub kind: CKind,
    /// Target element per output port; `usize::MAX` for an unlinked port of
    /// a standalone valve.
    pub out: Vec<usize>,
}

/// A validated, index-resolved model with all enabled submodels expanded.
/// Immutable and shareable across parallel replications.
#[derive(Debug, Clone)]
pub struct CompiledModel {
    pub(crate) name: String,
    pub(crate) length_m: f64,
    pub(crate) elements: Vec<CElement>,
    pub(crate) resources: Vec<(String, u32)>,
    pub(crate) files: Vec<String>,
    pub(crate) states: Vec<(String, Value)>,
    /// State variable -> valve elements bound to it.
    pub(crate) state_valves: HashMap<String, Vec<usize>>,
    pub(crate) tallies: Vec<String>,
}

impl CompiledModel {
    /// Expands enabled submodels, validates and resolves names to indices.
    pub fn new(model: &ModelDef) -> Result<Self, SimError> {
        let m = disruptions::expand(model).map_err(|e| SimError::InvalidModel(e.to_string()))?;
        let errors: Vec<String> = validate(&m)
            .into_iter()
            .filter(|d| d.severity == Severity::Error)
            .map(|d| d.to_string())
            .collect();
        if !errors.is_empty() {
            return Err(SimError::InvalidModel(errors.join("; ")));
        }

        let index: HashMap<&str, usize> = m.elements.iter().enumerate().map(|(i, e)| (e.id.as_str(), i)).collect();
        let res_index: HashMap<&str, usize> = m
            .resources
            .iter()
            .enumerate()
            .map(|(i, r)| (r.name.as_str(), i))
            .collect();
        let mut files: Vec<String> = m.files.clone();
        let mut tallies: Vec<String> = Vec::new();
        let mut state_valves: HashMap<String, Vec<usize>> = HashMap::new();

        let reqs = |rs: &[crate::model::Request]| -> Vec<(usize, u32)> {
            rs.iter().map(|r| (res_index[r.resource.as_str()], r.servers)).collect()
        };

        let mut elements = Vec::with_capacity(m.elements.len());
        for (i, e) in m.elements.iter().enumerate() {
            let kind = match &e.kind {
                ElementKind::Create {
                    count,
                    interarrival,
                    daemon,
                } => CKind::Create {
                    count: *count,
                    interarrival: interarrival.clone(),
                    daemon: *daemon,
                },
                ElementKind::Task {
                    duration, valve, usage, ..
                } => CKind::Task {
                    duration: duration.clone(),
                    valve: valve.as_ref().map(|v| index[v.as_str()]),
                    usage: usage.as_ref().map(|r| res_index[r.as_str()]),
                },
                ElementKind::Capture { requests, file } => {
                    let file = match file {
                        Some(f) => files.iter().position(|x| x == f).expect("validated"),
                        None => {
                            // Implicit file per capture element.
                            files.push(format!("{}.file", e.id));
                            files.len() - 1
                        }
                    };
                    CKind::Capture {
                        requests: reqs(requests),
                        file,
                    }
                }
                ElementKind::Release { releases } => CKind::Release {
                    releases: reqs(releases),
                },
                ElementKind::Preempt { resource } => CKind::Preempt {
                    resource: res_index[resource.as_str()],
                },
                ElementKind::Batch { size } => CKind::Batch { size: *size as usize },
                ElementKind::Unbatch => CKind::Unbatch,
                ElementKind::Generate { clones } => CKind::Generate { clones: *clones },
                ElementKind::Consolidate { size } => CKind::Consolidate { size: *size as usize },
                ElementKind::ConditionalBranch { predicate } => CKind::Conditional {
                    predicate: predicate.clone(),
                },
                ElementKind::ProbabilisticBranch { probs } => {
                    let mut acc = 0.0;
                    let cumulative = probs
                        .iter()
                        .map(|p| {
                            acc += p;
                            acc
                        })
                        .collect();
                    CKind::Probabilistic { cumulative }
                }
                ElementKind::Valve { state } => {
                    state_valves.entry(state.clone()).or_default().push(i);
                    CKind::Valve { state: state.clone() }
                }
                ElementKind::Activator { valve, open } => CKind::Activator {
                    valve: index[valve.as_str()],
                    open: *open,
                },
                ElementKind::Execute { formula } => CKind::Execute {
                    formula: formula.clone(),
                },
                ElementKind::Counter { tally } => {
                    let name = tally.clone().unwrap_or_else(|| e.id.clone());
                    let t = match tallies.iter().position(|x| *x == name) {
                        Some(t) => t,
                        None => {
                            tallies.push(name);
                            tallies.len() - 1
                        }
                    };
                    CKind::Counter { tally: t }
                }
                ElementKind::Destroy => CKind::Destroy,
            };
            let mut out = vec![usize::MAX; e.kind.out_ports() as usize];
            for l in m.links.iter().filter(|l| l.from == e.id) {
                out[l.port as usize] = index[l.to.as_str()];
            }
            elements.push(CElement {
                id: e.id.clone(),
                kind,
                out,
            });
        }

        Ok(CompiledModel {
            name: m.name.clone(),
            length_m: m.length_m,
            elements,
            resources: m.resources.iter().map(|r| (r.name.clone(), r.servers)).collect(),
            files,
            states: m.states.iter().map(|s| (s.name.clone(), s.init)).collect(),
            state_valves,
            tallies,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn length_m(&self) -> f64 {
        self.length_m
    }

    pub fn resource_names(&self) -> Vec<&str> {
        self.resources.iter().map(|r| r.0.as_str()).collect()
    }

    pub fn element_ids(&self) -> Vec<&str> {
        self.elements.iter().map(|e| e.id.as_str()).collect()
    }

    /// Runs one replication to completion.
    pub fn run(&self, seed: u64, opts: &RunOptions) -> Result<RunResult, SimError> {
        let mut sim = Simulation::new(self, seed, *opts)?;
        sim.run_to_end()
    }
}

/// Convenience: compile and run once.
pub fn run(model: &ModelDef, seed: u64, opts: &RunOptions) -> Result<RunResult, SimError> {
    CompiledModel::new(model)?.run(seed, opts)
}
