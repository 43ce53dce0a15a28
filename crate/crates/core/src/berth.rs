//! The bundled berth rehabilitation model: task table, baseline resources,
//! model loader and the two scenario ladders.
//!
//! The model source lives in `models/` at the workspace root and is compiled
//! into the library, so the loaders need no file system access.

use crate::model::{parse, parse_scenarios, ModelDef, ScenarioOverlay};

pub const MODEL_SOURCE: &str = include_str!("../../../models/berth.psm");
pub const DISRUPTION_LADDER_SOURCE: &str = include_str!("../../../models/disruptions.scn");
pub const RESOURCE_LADDER_SOURCE: &str = include_str!("../../../models/resources.scn");
pub const COSTS_SOURCE: &str = include_str!("../../../models/costs.usd");
pub const CALIBRATION_TARGETS_SOURCE: &str = include_str!("../../../models/calibration.targets");

pub const BERTH_LENGTH_M: f64 = 100.0;

/// Tally incremented once per completed phase.
pub const PHASE_TALLY: &str = "phases";

/// One of the 19 work phases.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaskSpec {
    pub task_no: u8,
    pub name: &'static str,
    pub duration_days: f64,
    pub resources: &'static [(&'static str, u32)],
    pub weather_sensitive: bool,
    pub predecessors: &'static [u8],
}

impl TaskSpec {
    /// Id of the counter element that marks this phase complete.
    pub fn counter_id(&self) -> String {
        format!("t{:02}.done", self.task_no)
    }
}

const fn task(
    task_no: u8,
    name: &'static str,
    duration_days: f64,
    resources: &'static [(&'static str, u32)],
    weather_sensitive: bool,
    predecessors: &'static [u8],
) -> TaskSpec {
    TaskSpec {
        task_no,
        name,
        duration_days,
        resources,
        weather_sensitive,
        predecessors,
    }
}

pub const TASKS: [TaskSpec; 19] = [
    task(
        1,
        "Jackhammering concrete",
        30.0,
        &[("Jackhammer", 1), ("GeneralLabor", 1)],
        true,
        &[],
    ),
    task(2, "Excavation", 10.0, &[("Excavator", 1)], true, &[1]),
    task(3, "Hauling", 4.0, &[("DumpTrucks", 1)], true, &[2]),
    task(4, "Applying epoxy to steel", 3.25, &[("GeneralLabor", 1)], true, &[3]),
    task(5, "Treating pile heads", 30.0, &[("PilingCrew", 1)], true, &[3]),
    task(
        6,
        "Installing new reinforcement",
        24.0,
        &[("ConcreteCrew", 1)],
        true,
        &[4],
    ),
    task(7, "Installing formwork", 15.0, &[("Crane", 1)], true, &[5, 6]),
    task(
        8,
        "Pouring beam concrete",
        3.0,
        &[("ConcreteTrucks", 1), ("ConcretePump", 1), ("ConcreteCrew", 1)],
        true,
        &[7],
    ),
    task(9, "Curing beam", 3.0, &[("ConcreteCrew", 1)], false, &[8]),
    task(10, "Removing formwork", 10.0, &[("Crane", 1)], true, &[9]),
    task(
        11,
        "Inner piling",
        15.0,
        &[("Crane", 1), ("PileHammer", 1), ("PilingCrew", 1)],
        true,
        &[8],
    ),
    task(
        12,
        "Outer piling",
        22.0,
        &[("Crane", 1), ("PileHammer", 1), ("PilingCrew", 1)],
        true,
        &[10, 11],
    ),
    task(13, "Installing precast slabs", 2.0, &[("Crane", 1)], true, &[12]),
    task(14, "Deck reinforcement", 8.0, &[("ConcreteCrew", 1)], true, &[13]),
    task(
        15,
        "Pouring deck concrete",
        2.0,
        &[("ConcreteTrucks", 1), ("ConcretePump", 1), ("ConcreteCrew", 1)],
        true,
        &[14],
    ),
    task(16, "Curing deck", 3.0, &[("ConcreteCrew", 1)], false, &[15]),
    task(
        17,
        "Timber fenders",
        8.0,
        &[("Crane", 1), ("Forklift", 1), ("GeneralLabor", 1)],
        true,
        &[16],
    ),
    task(
        18,
        "Rubber fenders",
        10.0,
        &[("Crane", 1), ("Forklift", 1), ("GeneralLabor", 1)],
        true,
        &[17],
    ),
    task(19, "Painting", 2.0, &[("GeneralLabor", 1)], true, &[18]),
];

/// Server counts of the reference model before any scenario overrides.
pub const BASELINE_RESOURCES: [(&str, u32); 11] = [
    ("Crane", 1),
    ("Excavator", 1),
    ("Jackhammer", 1),
    ("PileHammer", 1),
    ("DumpTrucks", 2),
    ("ConcretePump", 1),
    ("ConcreteTrucks", 2),
    ("Forklift", 1),
    ("PilingCrew", 1),
    ("ConcreteCrew", 1),
    ("GeneralLabor", 1),
];

/// Sum of the nominal phase durations, with no overlap.
pub fn serial_days() -> f64 {
    TASKS.iter().map(|t| t.duration_days).sum()
}

pub fn load_reference_model() -> ModelDef {
    parse(MODEL_SOURCE).expect("bundled model parses")
}

/// Ideal, then weather, crane breakdowns and jackhammer breakdowns added
/// one at a time.
pub fn disruption_ladder() -> Vec<ScenarioOverlay> {
    parse_scenarios(DISRUPTION_LADDER_SOURCE).expect("bundled ladder parses")
}

/// All disruptions on, then concrete trucks, jackhammers, labor, concrete
/// crew and pumps increased one at a time.
pub fn resource_ladder() -> Vec<ScenarioOverlay> {
    parse_scenarios(RESOURCE_LADDER_SOURCE).expect("bundled ladder parses")
}
