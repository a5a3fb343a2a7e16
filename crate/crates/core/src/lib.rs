//! Adaptive menus: a text definition format, usage statistics with
//! exponential decay, weighted scoring, short/long view composition,
//! validated structural editing and cost replay over usage traces.

pub mod adaptation;
pub mod editor;
pub mod engine;
pub mod heuristics;
pub mod model;
pub mod sim;
#[cfg(any(test, feature = "testkit"))]
pub mod testkit;
pub mod usage;

pub use adaptation::{compose_view, AdaptError, Customization, MenuView, SessionState, Transition, ViewEntry, ViewMode};
pub use engine::{Command, Engine, EngineError};
pub use editor::{apply_edit, apply_script, parse_script, render_branches, EditError, EditErrorKind, EditOp};
pub use heuristics::{compare, rank, score, Arrangement, HeuristicConfig, Score};
pub use model::{
    parse_definition, serialize_definition, DefinitionError, Menu, MenuDefinition, MenuId, Node, NodeId, NodePath,
    PanelState, Tier, Violation, ViolationKind,
};
pub use sim::{navigation_cost, replay, synth, CostReport, Policy, SynthParams, Trace};
pub use usage::{snapshot, EventKind, LogError, NodeKey, Snapshot, UsageEvent, UsageLog};
