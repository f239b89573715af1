//! Re-running an action script against the semantics.

use crate::emit::ActionScript;
use crate::error::ReplayError;
use crate::model::SystemModel;
use crate::semantics::{MultiDeviceState, Semantics};

/// The event sequence a script replays to.
pub type Replayed = Vec<(String, Option<String>)>;

/// Replays `script` step by step under the policy in its header. Each step
/// must match an enabled successor on device, rule, event and target; a
/// complete script must leave every device finished, and no script may end
/// owing a send.
pub fn replay(model: &SystemModel, script: &ActionScript) -> Result<Replayed, ReplayError> {
    let sem = Semantics::new(model)?;
    let devices: Vec<usize> = script
        .steps
        .iter()
        .map(|s| {
            model
                .devices
                .iter()
                .position(|d| d.id == s.device_id)
                .ok_or_else(|| ReplayError::UnknownDevice(s.device_id.clone()))
        })
        .collect::<Result<_, _>>()?;

    let mut deepest = 0;
    for start in sem.initial_states() {
        if walk(&sem, script, &devices, start, 0, &mut deepest) {
            return Ok(script
                .steps
                .iter()
                .map(|s| (s.device_id.clone(), s.event.clone()))
                .collect());
        }
    }
    if deepest == script.steps.len() {
        return Err(ReplayError::Incomplete);
    }
    let s = &script.steps[deepest];
    Err(ReplayError::NoMatch {
        index: deepest,
        what: format!(
            "{} {} {} -> {}.{}",
            s.device_id,
            s.rule,
            s.event.as_deref().unwrap_or("(return)"),
            s.target_machine,
            s.target
        ),
    })
}

fn walk(
    sem: &Semantics<'_>,
    script: &ActionScript,
    devices: &[usize],
    ms: MultiDeviceState,
    i: usize,
    deepest: &mut usize,
) -> bool {
    *deepest = (*deepest).max(i);
    if i == script.steps.len() {
        return ms.debt_free() && (!script.header.complete || ms.all_finished());
    }
    let want = &script.steps[i];
    for (choice, next) in sem.enabled_multi(&ms, script.header.policy) {
        if choice.device != devices[i] || choice.rule != want.rule {
            continue;
        }
        let event = choice.mv.map(|mv| sem.label(mv).name.as_str());
        let cfg = &next.per_device[choice.device];
        if event != want.event.as_deref()
            || sem.machine_id(cfg.current.machine) != want.target_machine
            || sem.state_name(cfg.current) != want.target
        {
            continue;
        }
        if walk(sem, script, devices, next, i + 1, deepest) {
            return true;
        }
    }
    false
}
