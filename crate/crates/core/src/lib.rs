//! Discrete-event simulation of resource-constrained construction processes.
//!
//! The crate is layered: [`sim`] is the event kernel, [`stochastics`] the
//! seeded random streams, [`model`] the textual model format, [`elements`]
//! the executable element library, [`disruptions`] the weather/breakdown
//! templates, [`runner`] replication and reporting, [`crash`] the resource
//! crashing advisor and [`berth`] the bundled reference model.

pub mod berth;
pub mod crash;
pub mod disruptions;
pub mod elements;
pub mod error;
pub mod model;
pub mod runner;
pub mod sim;
pub mod stochastics;

pub use elements::{CompiledModel, RunOptions, Simulation};
pub use error::{DistError, ParseErrors, RunError, SimError, SyntaxError};
pub use model::{parse, serialize, validate, ModelDef, ScenarioOverlay};
pub use runner::{replicate, sweep, ScenarioReport, SweepResult};
pub use stochastics::{derive_stream, Distribution, RandomStream};
