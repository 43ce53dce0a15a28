//! Textual model-definition format: AST, parser, validator and serializer.
//!
//! A model file holds one `model <name> { ... }` block of line-oriented
//! declarations. See `docs/model-format.md` for the grammar.

mod expr;
mod lexer;
mod parser;
mod scenario;
mod serialize;
mod validate;

use serde::{Deserialize, Serialize};

use crate::disruptions::DisruptionSpec;
use crate::sim::Value;
use crate::stochastics::Distribution;

pub use expr::{parse_expr, parse_formula, BinOp, Expr, ExprError, Formula, UnOp};
pub use lexer::{tokenize, Tok, Token};
pub use parser::{parse, parse_with_source_map, SourceMap};
pub use scenario::{
    parse_scenarios, write_scenarios, DurationNoise, ScenarioOverlay, DEFAULT_REPLICATIONS, DEFAULT_SEED,
};
pub use serialize::serialize;
pub use validate::{validate, Diagnostic, Severity};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDef {
    pub name: String,
    /// Length of the structure produced by one run, in metres.
    pub length_m: f64,
    pub resources: Vec<ResourceDecl>,
    pub files: Vec<String>,
    pub states: Vec<StateDecl>,
    pub elements: Vec<ElementDef>,
    pub links: Vec<Link>,
    pub submodels: Vec<Submodel>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceDecl {
    pub name: String,
    pub servers: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateDecl {
    pub name: String,
    pub init: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementDef {
    pub id: String,
    pub kind: ElementKind,
}

/// `(resource, servers)` pair used by capture and release.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Request {
    pub resource: String,
    pub servers: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ElementKind {
    Create {
        count: u64,
        interarrival: Distribution,
        /// Background entities (disruption generators) do not keep the run
        /// alive.
        daemon: bool,
    },
    Task {
        duration: Distribution,
        /// Sensitivity tags, e.g. `weather`.
        tags: Vec<String>,
        /// Valve whose closure suspends the task.
        valve: Option<String>,
        /// Progress is measured in busy server-days of this resource
        /// instead of calendar days.
        usage: Option<String>,
    },
    Capture {
        requests: Vec<Request>,
        file: Option<String>,
    },
    Release {
        releases: Vec<Request>,
    },
    Preempt {
        resource: String,
    },
    Batch {
        size: u32,
    },
    Unbatch,
    Generate {
        clones: u32,
    },
    Consolidate {
        size: u32,
    },
    ConditionalBranch {
        predicate: Expr,
    },
    ProbabilisticBranch {
        probs: Vec<f64>,
    },
    Valve {
        state: String,
    },
    Activator {
        valve: String,
        open: bool,
    },
    Execute {
        formula: Formula,
    },
    Counter {
        tally: Option<String>,
    },
    Destroy,
}

impl ElementKind {
    pub fn keyword(&self) -> &'static str {
        match self {
            ElementKind::Create { .. } => "create",
            ElementKind::Task { .. } => "task",
            ElementKind::Capture { .. } => "capture",
            ElementKind::Release { .. } => "release",
            ElementKind::Preempt { .. } => "preempt",
            ElementKind::Batch { .. } => "batch",
            ElementKind::Unbatch => "unbatch",
            ElementKind::Generate { .. } => "generate",
            ElementKind::Consolidate { .. } => "consolidate",
            ElementKind::ConditionalBranch { .. } => "conditional_branch",
            ElementKind::ProbabilisticBranch { .. } => "probabilistic_branch",
            ElementKind::Valve { .. } => "valve",
            ElementKind::Activator { .. } => "activator",
            ElementKind::Execute { .. } => "execute",
            ElementKind::Counter { .. } => "counter",
            ElementKind::Destroy => "destroy",
        }
    }

    /// Number of output ports.
    pub fn out_ports(&self) -> u32 {
        match self {
            ElementKind::Destroy => 0,
            ElementKind::Generate { .. } | ElementKind::ConditionalBranch { .. } => 2,
            ElementKind::ProbabilisticBranch { probs } => probs.len() as u32,
            _ => 1,
        }
    }
}

pub const ELEMENT_KEYWORDS: [&str; 16] = [
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
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Link {
    pub from: String,
    pub port: u32,
    pub to: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Submodel {
    pub name: String,
    pub enabled: bool,
    pub spec: DisruptionSpec,
}

impl ModelDef {
    pub fn element(&self, id: &str) -> Option<&ElementDef> {
        self.elements.iter().find(|e| e.id == id)
    }

    pub fn resource(&self, name: &str) -> Option<&ResourceDecl> {
        self.resources.iter().find(|r| r.name == name)
    }

    pub fn resource_mut(&mut self, name: &str) -> Option<&mut ResourceDecl> {
        self.resources.iter_mut().find(|r| r.name == name)
    }

    pub fn submodel(&self, name: &str) -> Option<&Submodel> {
        self.submodels.iter().find(|s| s.name == name)
    }

    pub fn submodel_mut(&mut self, name: &str) -> Option<&mut Submodel> {
        self.submodels.iter_mut().find(|s| s.name == name)
    }
}
