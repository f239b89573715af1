//! Model-based test-case generation for mobile applications.
//!
//! User behaviour is modelled as view state machines composed into device
//! state machines through a connection relation. The explorer enumerates
//! every bounded interaction sequence of one or more devices; the emitters
//! turn those sequences into action scripts, UiAutomator-style sources, a
//! PROMELA model for cross-checking with SPIN, and a generation report.

pub mod emit;
pub mod error;
pub mod explorer;
pub mod io;
pub mod model;
pub mod por;
pub mod replay;
pub mod semantics;

pub use error::{EmitError, ExploreError, LowerError, ModelError, ParseError, ReplayError};
pub use explorer::{
    canonicalize, explore_device, explore_multi, flows, ExplorationBound, ExplorationResult, ExplorationStats,
    ExploreOptions, Step, TestCase,
};
pub use model::{validate_system, validate_view_machine, SystemModel, ViewStateMachine, Violation};
pub use semantics::{Configuration, MultiDeviceState, ReceivePolicy, Rule, Semantics};
