//! Lowering a [`ModelDocument`] to a [`SystemModel`].
//!
//! Machine ids are `App.View.Machine`. An empty `prev` becomes a fresh
//! initial state (`init`), an empty `next` a fresh final state (`end`).
//! View and StateMachine transitions become connection edges labelled
//! `event#through`; their source becomes a connection state that resumes at
//! `next`.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{LowerError, ModelError};
use crate::io::controls::ControlDefinition;
use crate::io::document::{Application, ModelDocument, StateMachineDecl, TransitionDecl, TransitionType, View};
use crate::model::{
    self, Action, CallEventAttributes, ChannelBinding, ConnectionEdge, ControlBinding, DeviceAssignment, EventKind,
    EventLabel, MachineOrigin, Selector, SystemModel, Transition, TransitionOrigin, ViewStateMachine,
};

pub const DEFAULT_DEVICE: &str = "device0";

struct Names {
    id: String,
    init: String,
    end: String,
}

fn fresh(base: &str, taken: &BTreeSet<&str>) -> String {
    let mut name = base.to_string();
    while taken.contains(name.as_str()) {
        name.push('_');
    }
    name
}

fn names(app: &Application, view: &View, m: &StateMachineDecl) -> Names {
    let taken: BTreeSet<&str> = m.states.iter().map(|s| s.name.as_str()).collect();
    Names {
        id: format!("{}.{}.{}", app.name, view.name, m.name),
        init: fresh("init", &taken),
        end: fresh("end", &taken),
    }
}

fn machines(doc: &ModelDocument) -> impl Iterator<Item = (&Application, &View, &StateMachineDecl)> {
    doc.applications.iter().flat_map(|a| {
        a.views
            .iter()
            .flat_map(move |v| v.state_machines.iter().map(move |m| (a, v, m)))
    })
}

pub fn call_event_name(t: &TransitionDecl) -> String {
    format!("{}#{}", t.event, t.through.as_deref().unwrap_or(""))
}

/// The id of the machine a call transition enters. Same-application
/// matches win over matches elsewhere.
fn callee(doc: &ModelDocument, caller: &Application, t: &TransitionDecl) -> Result<String, LowerError> {
    let through = t.through.as_deref().unwrap_or("");
    let mut candidates: Vec<String> = Vec::new();
    for own in [true, false] {
        for app in doc.applications.iter().filter(|a| (a.name == caller.name) == own) {
            for view in &app.views {
                match t.kind_of_transition {
                    TransitionType::View if view.name == through => match view.state_machines.first() {
                        Some(m) => candidates.push(format!("{}.{}.{}", app.name, view.name, m.name)),
                        None => {
                            return Err(LowerError::MissingEntry {
                                machine: format!("{}.{}", app.name, view.name),
                            })
                        }
                    },
                    TransitionType::StateMachine => candidates.extend(
                        view.state_machines
                            .iter()
                            .filter(|m| m.name == through)
                            .map(|m| format!("{}.{}.{}", app.name, view.name, m.name)),
                    ),
                    _ => {}
                }
            }
        }
        match candidates.len() {
            0 => continue,
            1 => return Ok(candidates.remove(0)),
            _ => {
                return Err(LowerError::Config(format!(
                    "`{through}` is ambiguous: {}",
                    candidates.join(", ")
                )))
            }
        }
    }
    Err(LowerError::Config(format!(
        "`{through}` names no view or state machine"
    )))
}

/// Builds machines, connection edges, call attributes, devices and channels.
/// Control bindings are left empty; see [`bind_controls`].
pub fn lower_structure(doc: &ModelDocument) -> Result<SystemModel, LowerError> {
    let mut entry_state: BTreeMap<String, Option<String>> = BTreeMap::new();
    for (a, v, m) in machines(doc) {
        let n = names(a, v, m);
        let has_entry = m.transitions.iter().any(|t| t.prev.is_empty());
        entry_state.insert(n.id, has_entry.then_some(n.init));
    }

    let mut model = SystemModel::default();
    let mut attrs: BTreeMap<String, (Option<bool>, Option<bool>)> = BTreeMap::new();
    for (app, view, decl) in machines(doc) {
        let n = names(app, view, decl);
        let mut m = ViewStateMachine::new(n.id.clone()).with_states(decl.states.iter().map(|s| s.name.clone()));
        m.origin = Some(MachineOrigin {
            application: app.name.clone(),
            view: view.name.clone(),
            machine: decl.name.clone(),
        });
        let state = |s: &str, fresh: &str| if s.is_empty() { fresh.to_string() } else { s.to_string() };
        for t in &decl.transitions {
            if t.prev.is_empty() && !m.initial.contains(&n.init) {
                m.states.push(n.init.clone());
                m.initial.insert(n.init.clone());
            }
            if t.next.is_empty() && !m.final_states.contains(&n.end) {
                m.states.push(n.end.clone());
                m.final_states.insert(n.end.clone());
            }
            let source = state(&t.prev, &n.init);
            let target = state(&t.next, &n.end);
            let origin = TransitionOrigin {
                application: app.name.clone(),
                view: view.name.clone(),
                id: t.id.clone(),
                event: t.event.clone(),
                prev: t.prev.clone(),
                next: t.next.clone(),
            };
            if t.kind_of_transition == TransitionType::Simple {
                let label = EventLabel::new(t.event.clone(), t.kind.unwrap_or(EventKind::User));
                let mut tr = Transition::new(source, label, target);
                tr.origin = Some(origin);
                m.transitions.push(tr);
                continue;
            }
            if let Some(first) = m.return_of.get(&source) {
                if *first != target {
                    return Err(LowerError::ConflictingReturn {
                        machine: n.id.clone(),
                        state: source,
                        first: first.clone(),
                        second: target,
                    });
                }
            }
            m.connection.insert(source.clone());
            m.return_of.insert(source.clone(), target);
            let callee_id = callee(doc, app, t)?;
            let entry = entry_state
                .get(&callee_id)
                .cloned()
                .flatten()
                .ok_or_else(|| LowerError::MissingEntry {
                    machine: callee_id.clone(),
                })?;
            let event = call_event_name(t);
            let mut edge = ConnectionEdge::new(n.id.clone(), source, event.clone(), callee_id, entry);
            edge.origin = Some(origin);
            model.connection.edges.push(edge);

            let slot = attrs.entry(event.clone()).or_insert((None, None));
            for (have, new) in [(&mut slot.0, t.reuse), (&mut slot.1, t.auto_return)] {
                match (*have, new) {
                    (Some(a), Some(b)) if a != b => return Err(LowerError::ConflictingCallAttributes { event }),
                    (None, Some(b)) => *have = Some(b),
                    _ => {}
                }
            }
        }
        model.machines.push(m);
    }
    let defaults = CallEventAttributes::default();
    model.call_attrs = attrs
        .into_iter()
        .map(|(event, (reuse, auto_return))| CallEventAttributes {
            event,
            reuse: reuse.unwrap_or(defaults.reuse),
            auto_return: auto_return.unwrap_or(defaults.auto_return),
        })
        .collect();

    let entry_of = |app_name: &str| -> Result<String, LowerError> {
        let app = doc
            .applications
            .iter()
            .find(|a| a.name == app_name)
            .ok_or_else(|| LowerError::Config(format!("unknown application `{app_name}`")))?;
        let view = app.views.first().ok_or_else(|| LowerError::MissingEntry {
            machine: app.name.clone(),
        })?;
        let m = view.state_machines.first().ok_or_else(|| LowerError::MissingEntry {
            machine: format!("{}.{}", app.name, view.name),
        })?;
        Ok(format!("{}.{}.{}", app.name, view.name, m.name))
    };
    if doc.devices.is_empty() {
        let entries = doc
            .applications
            .iter()
            .map(|a| entry_of(&a.name))
            .collect::<Result<Vec<_>, _>>()?;
        model.devices.push(DeviceAssignment::new(DEFAULT_DEVICE, entries));
    } else {
        for d in &doc.devices {
            if d.applications.is_empty() {
                return Err(LowerError::Config(format!("device `{}` has no application", d.id)));
            }
            let entries = d
                .applications
                .iter()
                .map(|a| entry_of(a))
                .collect::<Result<Vec<_>, _>>()?;
            model.devices.push(DeviceAssignment::new(d.id.clone(), entries));
        }
    }

    for c in &doc.channels {
        let pick = |kind: EventKind| -> Result<String, LowerError> {
            let events: BTreeSet<&str> = doc
                .transitions()
                .filter(|t| t.channel.as_deref() == Some(c.name.as_str()))
                .filter(|t| t.kind.unwrap_or(EventKind::User) == kind)
                .map(|t| t.event.as_str())
                .collect();
            let mut it = events.into_iter();
            match (it.next(), it.next()) {
                (Some(e), None) => Ok(e.to_string()),
                _ => Err(LowerError::Config(format!(
                    "channel `{}` needs exactly one {kind} event",
                    c.name
                ))),
            }
        };
        model.channels.push(ChannelBinding {
            name: c.name.clone(),
            send_event: pick(EventKind::User)?,
            sender: c.sender.clone(),
            receive_event: pick(EventKind::System)?,
            receiver: c.receiver.clone(),
        });
    }
    Ok(model)
}

/// Binds every user event of `model` (in-machine and call events) to a
/// control of its view. `controls` is keyed by view name.
pub fn bind_controls(
    doc: &ModelDocument,
    model: &mut SystemModel,
    controls: &BTreeMap<String, ControlDefinition>,
) -> Result<(), LowerError> {
    let empty = ControlDefinition::default();
    let mut bindings: Vec<ControlBinding> = Vec::new();
    for (app, view, decl) in machines(doc) {
        let machine = names(app, view, decl).id;
        let tree = controls.get(&view.name).unwrap_or(&empty);
        for t in &decl.transitions {
            if t.kind == Some(EventKind::System) && t.kind_of_transition == TransitionType::Simple {
                continue;
            }
            let event = match t.kind_of_transition {
                TransitionType::Simple => t.event.clone(),
                _ => call_event_name(t),
            };
            let group = t.control.clone().unwrap_or_else(|| t.event.clone());
            let node = tree.find_group(&group).ok_or_else(|| LowerError::Bind {
                view: view.name.clone(),
                event: t.event.clone(),
                group: group.clone(),
            })?;
            let parameter = node.parameter()?;
            let action = match t.action.as_deref() {
                Some(a) => match Action::parse(a) {
                    Some(act @ (Action::Click | Action::Swipe | Action::SetText)) => act,
                    _ => {
                        return Err(LowerError::UnknownAction {
                            view: view.name.clone(),
                            event: t.event.clone(),
                            action: a.to_string(),
                        })
                    }
                },
                None if parameter.is_some() => Action::SetText,
                None if node.scrollable && !node.clickable => Action::Swipe,
                None => Action::Click,
            };
            let capable = match action {
                Action::Click => node.clickable,
                Action::Swipe => node.scrollable,
                _ => true,
            };
            if !capable {
                return Err(LowerError::Capability {
                    view: view.name.clone(),
                    group,
                    action: action.to_string(),
                });
            }
            let binding = ControlBinding {
                machine: machine.clone(),
                event,
                control_group: group,
                action,
                selector: Selector {
                    classname: node.class.clone(),
                    index: node.index,
                    text: node.text.clone(),
                    resource_id: node.resource_id.clone(),
                },
                parameter,
            };
            match bindings
                .iter()
                .find(|b| b.machine == binding.machine && b.event == binding.event)
            {
                Some(b) if *b != binding => {
                    return Err(LowerError::Config(format!(
                        "event `{}` of `{}` is bound to two different controls",
                        b.event, b.machine
                    )))
                }
                Some(_) => {}
                None => bindings.push(binding),
            }
        }
    }
    model.control_bindings = bindings;
    Ok(())
}

/// Lowers, validates and binds. Validation warnings do not fail the build.
pub fn build_system_model(
    doc: &ModelDocument,
    controls: &BTreeMap<String, ControlDefinition>,
) -> Result<SystemModel, LowerError> {
    let mut model = lower_structure(doc)?;
    let violations = model::validate_system(&model);
    if model::errors(&violations).next().is_some() {
        return Err(ModelError::Invalid(violations).into());
    }
    bind_controls(doc, &mut model, controls)?;
    Ok(model)
}
