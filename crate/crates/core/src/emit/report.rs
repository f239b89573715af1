//! Generation statistics in the shape of a results table row.

use serde::{Deserialize, Serialize};

use crate::error::EmitError;
use crate::explorer::ExplorationResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Csv,
    Json,
}

/// One generation run. `time_s` and `memory_mb` vary between runs; every
/// other field is a function of the inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationReport {
    pub devices: Vec<String>,
    /// Deepest backstack reached.
    pub backstack: u64,
    /// Labelled transitions allowed per device.
    pub transitions: usize,
    pub test_cases: usize,
    pub time_s: f64,
    /// Search nodes expanded.
    pub states: u64,
    pub state_size_b: u64,
    pub memory_mb: f64,
}

impl GenerationReport {
    pub fn from_result(devices: Vec<String>, bound: usize, result: &ExplorationResult, time_s: f64) -> Self {
        GenerationReport {
            devices,
            backstack: result.stats.max_backstack,
            transitions: bound,
            test_cases: result.test_cases.len(),
            time_s,
            states: result.stats.expanded,
            state_size_b: result.stats.max_state_size,
            memory_mb: peak_memory_mb().unwrap_or(0.0),
        }
    }
}

/// Peak resident set size of this process, where the platform reports it.
pub fn peak_memory_mb() -> Option<f64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    let kb: f64 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kb / 1024.0)
}

pub const CSV_HEADER: [&str; 8] = [
    "devices",
    "backstack",
    "transitions",
    "test_cases",
    "time_s",
    "states",
    "state_size_b",
    "memory_mb",
];

pub fn emit_report(report: &GenerationReport, format: ReportFormat) -> Result<String, EmitError> {
    match format {
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(report)?;
            s.push('\n');
            Ok(s)
        }
        ReportFormat::Csv => {
            let mut w = csv::WriterBuilder::new()
                .terminator(csv::Terminator::Any(b'\n'))
                .from_writer(Vec::new());
            w.write_record(CSV_HEADER)?;
            w.write_record([
                report.devices.join(";"),
                report.backstack.to_string(),
                report.transitions.to_string(),
                report.test_cases.to_string(),
                format!("{:.3}", report.time_s),
                report.states.to_string(),
                report.state_size_b.to_string(),
                format!("{:.1}", report.memory_mb),
            ])?;
            let bytes = w.into_inner().map_err(|e| EmitError::Csv(e.into_error().into()))?;
            Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
        }
        ReportFormat::Text => Ok(format!(
            "devices       {}\nbackstack     {}\ntransitions   {}\ntest cases    {}\ntime (s)      {:.3}\nstates        {}\nstate size(B) {}\nmemory (MB)   {:.1}\n",
            report.devices.join(", "),
            report.backstack,
            report.transitions,
            report.test_cases,
            report.time_s,
            report.states,
            report.state_size_b,
            report.memory_mb,
        )),
    }
}
