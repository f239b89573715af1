//! Scripts, PROMELA and reports.

pub mod promela;
pub mod report;
pub mod script;

pub use promela::{emit_promela, transition_table, PromelaTransition};
pub use report::{emit_report, GenerationReport, ReportFormat};
pub use script::{emit_script, model_hash, ActionScript, ScriptFormat, ScriptHeader, ScriptStep};
