//! Action scripts (JSON) and UiAutomator-style test classes.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::EmitError;
use crate::explorer::{Step, TestCase};
use crate::model::{Action, EventKind, SystemModel};
use crate::semantics::{ReceivePolicy, Rule};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScriptFormat {
    Json,
    UiAuto,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ScriptHeader {
    pub model_hash: String,
    pub bound: usize,
    pub policy: ReceivePolicy,
    pub devices: Vec<String>,
    /// Every device finished; otherwise the script is a truncated prefix.
    pub complete: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ScriptStep {
    pub device_id: String,
    pub action: Action,
    pub control_group: String,
    pub classname: String,
    pub index: u32,
    pub text: String,
    pub parameter: Option<String>,
    /// Absent for returns.
    pub event: Option<String>,
    pub rule: Rule,
    pub machine: String,
    pub target_machine: String,
    pub target: String,
    pub transition: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionScript {
    pub header: ScriptHeader,
    pub steps: Vec<ScriptStep>,
}

/// Hex SHA-256 of the model's JSON form.
pub fn model_hash(model: &SystemModel) -> String {
    let json = serde_json::to_vec(model).expect("models always serialize");
    hex::encode(Sha256::digest(&json))
}

fn script_step(step: &Step, model: &SystemModel) -> Result<ScriptStep, EmitError> {
    let mut out = ScriptStep {
        device_id: step.device.clone(),
        action: Action::Back,
        control_group: String::new(),
        classname: String::new(),
        index: 0,
        text: String::new(),
        parameter: None,
        event: step.event.as_ref().map(|e| e.name.clone()),
        rule: step.rule,
        machine: step.machine.clone(),
        target_machine: step.target_machine.clone(),
        target: step.target.clone(),
        transition: step.origin.as_ref().map(|o| o.id.clone()),
    };
    let Some(event) = &step.event else {
        return Ok(out);
    };
    if event.kind == EventKind::System {
        out.action = Action::WaitEvent;
        out.parameter = step.channel.clone();
        return Ok(out);
    }
    let b = model
        .binding(&step.machine, &event.name)
        .ok_or_else(|| EmitError::Unbound {
            machine: step.machine.clone(),
            event: event.name.clone(),
        })?;
    out.action = b.action;
    out.control_group = b.control_group.clone();
    out.classname = b.selector.classname.clone();
    out.index = b.selector.index;
    out.text = b.selector.text.clone();
    out.parameter = b.parameter.clone();
    Ok(out)
}

impl ActionScript {
    pub fn build(tc: &TestCase, model: &SystemModel, bound: usize, policy: ReceivePolicy) -> Result<Self, EmitError> {
        Ok(ActionScript {
            header: ScriptHeader {
                model_hash: model_hash(model),
                bound,
                policy,
                devices: model.devices.iter().map(|d| d.id.clone()).collect(),
                complete: tc.complete,
            },
            steps: tc
                .steps
                .iter()
                .map(|s| script_step(s, model))
                .collect::<Result<_, _>>()?,
        })
    }

    pub fn to_json(&self) -> Result<String, EmitError> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

pub fn emit_script(
    tc: &TestCase,
    model: &SystemModel,
    bound: usize,
    policy: ReceivePolicy,
    format: ScriptFormat,
) -> Result<String, EmitError> {
    let script = ActionScript::build(tc, model, bound, policy)?;
    match format {
        ScriptFormat::Json => script.to_json(),
        ScriptFormat::UiAuto => Ok(uiauto(&script, tc)),
    }
}

fn java_string(s: &str) -> String {
    let mut out = String::from("\"");
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn ident(s: &str) -> String {
    s.chars().filter(char::is_ascii_alphanumeric).collect()
}

fn uiauto(script: &ActionScript, tc: &TestCase) -> String {
    let mut out = String::new();
    for (d, device) in script.header.devices.iter().enumerate() {
        let _ = writeln!(out, "// device {device}");
        let _ = writeln!(out, "public class TestDevice{} extends UiAutomatorTestCase {{", d + 1);
        let mut used: BTreeMap<String, usize> = BTreeMap::new();
        for (s, step) in script
            .steps
            .iter()
            .zip(&tc.steps)
            .filter(|(s, _)| &s.device_id == device)
        {
            let base = match (&step.origin, &s.event) {
                (Some(o), _) => format!("Test{}{}{}", ident(&o.application), ident(&o.event), o.id),
                (None, Some(e)) => format!("Test{}", ident(e)),
                (None, None) => "TestBack".to_string(),
            };
            let n = used.entry(base.clone()).or_insert(0);
            *n += 1;
            let name = if *n == 1 { base } else { format!("{base}_{n}") };
            match &step.origin {
                Some(o) => {
                    let _ = writeln!(
                        out,
                        "    // Transition {}: previous {} next {} on view {}",
                        o.id, o.prev, o.next, o.view
                    );
                }
                None if s.rule == Rule::R5 => {
                    let _ = writeln!(out, "    // Return to {} in {}", s.target, s.target_machine);
                }
                None => {}
            }
            let _ = writeln!(out, "    public void {name}() throws UiObjectNotFoundException {{");
            match s.action {
                Action::Back => out.push_str("        getUiDevice().pressBack();\n"),
                Action::WaitEvent => {
                    let _ = writeln!(
                        out,
                        "        // blocks until {} arrives",
                        s.parameter.as_deref().or(s.event.as_deref()).unwrap_or("the event")
                    );
                    out.push_str("        getUiDevice().waitForIdle();\n");
                }
                action => {
                    let mut sel = format!(
                        "new UiSelector().className({}).index({})",
                        java_string(&s.classname),
                        s.index
                    );
                    if !s.text.is_empty() {
                        let _ = write!(sel, ".textContains({})", java_string(&s.text));
                    }
                    let _ = writeln!(out, "        UiObject control = new UiObject({sel});");
                    match action {
                        Action::Click => out.push_str("        control.click();\n"),
                        Action::Swipe => out.push_str("        control.swipeUp(20);\n"),
                        _ => {
                            let _ = writeln!(
                                out,
                                "        control.setText({});",
                                java_string(s.parameter.as_deref().unwrap_or(""))
                            );
                        }
                    }
                }
            }
            out.push_str("    }\n");
        }
        out.push_str("}\n");
    }
    out
}
