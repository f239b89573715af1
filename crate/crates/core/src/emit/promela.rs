//! PROMELA rendering of a system model, for cross-checking with SPIN.
//!
//! Each device is one process. Its backstack holds the return states below
//! the current state, with the machine of every entry and the call event
//! that pushed it. A dispatcher loop hands control to the inline of the
//! current machine, pops on auto-return and stops at a terminal final state.
//! Every machine inline is a single do-loop with one branch per transition
//! or outgoing connection edge. `traceCloser` prints each finished trace as
//! `TC d:v:id d:v:id ...` where `v` is the view code and `id` the
//! transition ID. Receives always follow the strict policy.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::explorer::ExplorationBound;
use crate::model::{EventKind, SystemModel};

/// Maps model names to unique PROMELA identifiers.
#[derive(Debug, Default)]
struct Mangler {
    names: BTreeMap<String, String>,
    used: BTreeSet<String>,
}

impl Mangler {
    fn get(&mut self, prefix: &str, name: &str) -> String {
        let key = format!("{prefix}\u{0}{name}");
        if let Some(m) = self.names.get(&key) {
            return m.clone();
        }
        let clean: String = name
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
            .collect();
        let base = format!("{prefix}{clean}");
        let mut candidate = base.clone();
        let mut n = 1;
        while !self.used.insert(candidate.clone()) {
            n += 1;
            candidate = format!("{base}{n}");
        }
        self.names.insert(key, candidate.clone());
        candidate
    }
}

/// One `transition(device, view, id)` call site.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromelaTransition {
    pub view: u32,
    pub id: u32,
    pub machine: String,
    pub event: String,
}

/// The view/ID codes used by the emitted model, in emission order.
pub fn transition_table(model: &SystemModel) -> Vec<PromelaTransition> {
    let views = view_codes(model);
    let mut out = Vec::new();
    let mut next_id = 1u32;
    let mut id_of = |origin: Option<&str>| match origin.and_then(|o| o.parse().ok()) {
        Some(n) => n,
        None => {
            let n = 1000 + next_id;
            next_id += 1;
            n
        }
    };
    for m in &model.machines {
        let view = views[&view_key(model, &m.id)];
        for t in &m.transitions {
            out.push(PromelaTransition {
                view,
                id: id_of(t.origin.as_ref().map(|o| o.id.as_str())),
                machine: m.id.clone(),
                event: t.event.name.clone(),
            });
        }
        for e in model.connection.edges.iter().filter(|e| e.source_machine == m.id) {
            out.push(PromelaTransition {
                view,
                id: id_of(e.origin.as_ref().map(|o| o.id.as_str())),
                machine: m.id.clone(),
                event: e.event.name.clone(),
            });
        }
    }
    out
}

fn view_key(model: &SystemModel, machine: &str) -> String {
    match model.machine(machine).and_then(|m| m.origin.as_ref()) {
        Some(o) => format!("{}.{}", o.application, o.view),
        None => machine.to_string(),
    }
}

fn view_codes(model: &SystemModel) -> BTreeMap<String, u32> {
    let mut codes = BTreeMap::new();
    for m in &model.machines {
        let key = view_key(model, &m.id);
        let next = codes.len() as u32 + 1;
        codes.entry(key).or_insert(next);
    }
    codes
}

fn or_list(items: &[String]) -> String {
    if items.is_empty() {
        "false".to_string()
    } else {
        format!("({})", items.join(" || "))
    }
}

pub fn emit_promela(model: &SystemModel, bound: &ExplorationBound) -> String {
    let mut mg = Mangler::default();
    let table = transition_table(model);
    let views = view_codes(model);
    let mut out = String::new();

    let devices = model.devices.len().max(1);
    let _ = writeln!(
        out,
        "/* test-case generation model; receives follow the strict policy */"
    );
    let _ = writeln!(out, "#define DEVICES {devices}");
    let _ = writeln!(out, "#define MAX_TR {}", bound.max_transitions_per_device);
    let _ = writeln!(out, "#define MAX_BK (MAX_TR + 2)");
    let _ = writeln!(out, "#define CHANNELS {}", model.channels.len().max(1));
    out.push('\n');

    // names
    let mut state_names = Vec::new();
    for m in &model.machines {
        for s in &m.states {
            state_names.push(mg.get("State_", &format!("{}_{}", m.id, s)));
        }
    }
    let _ = writeln!(out, "mtype = {{ {} }};", state_names.join(", "));
    for (i, m) in model.machines.iter().enumerate() {
        let _ = writeln!(out, "#define {} {}", mg.get("M_", &m.id), i);
    }
    for (key, code) in &views {
        let _ = writeln!(out, "#define {} {}", mg.get("VIEW_", key), code);
    }
    let calls: Vec<&str> = model
        .connection
        .edges
        .iter()
        .map(|e| e.event.name.as_str())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    for (i, c) in calls.iter().enumerate() {
        let _ = writeln!(out, "#define {} {}", mg.get("CALL_", c), i + 1);
    }
    for (i, d) in model.devices.iter().enumerate() {
        let _ = writeln!(out, "#define {} {}", mg.get("D_", &d.id), i);
    }
    out.push('\n');

    let _ = writeln!(
        out,
        "typedef Backstack {{ mtype states[MAX_BK]; byte machines[MAX_BK]; byte events[MAX_BK]; short index; }}"
    );
    let _ = writeln!(
        out,
        "typedef Device {{ short count; bool finished; Backstack backstack }}"
    );
    let _ = writeln!(out, "Device devices[DEVICES];");
    let _ = writeln!(out, "short pending[CHANNELS];");
    let _ = writeln!(out, "typedef Step {{ byte device; byte view; short id }}");
    let _ = writeln!(out, "Step trace[DEVICES * MAX_TR];");
    let _ = writeln!(out, "short traceLen;");
    out.push('\n');
    let _ = writeln!(out, "#define currentBackstack devices[device].backstack");
    let _ = writeln!(
        out,
        "#define currentState currentBackstack.states[currentBackstack.index]"
    );
    let _ = writeln!(
        out,
        "#define currentMachine currentBackstack.machines[currentBackstack.index]"
    );
    let _ = writeln!(out, "#define room(device) (devices[device].count < MAX_TR)");
    let finals: Vec<String> = model
        .machines
        .iter()
        .flat_map(|m| m.final_states.iter().map(move |s| (m, s)))
        .map(|(m, s)| format!("s == {}", mg.get("State_", &format!("{}_{}", m.id, s))))
        .collect();
    let _ = writeln!(out, "#define IS_FINAL(s) {}", or_list(&finals));
    let auto: Vec<String> = calls
        .iter()
        .filter(|c| model.call_attributes(c).is_none_or(|a| a.auto_return))
        .map(|c| format!("e == {}", mg.get("CALL_", c)))
        .collect();
    let _ = writeln!(out, "#define AUTO_RETURN(e) {}", or_list(&auto));
    out.push('\n');

    out.push_str(
        "inline transition(device, view, id) {\n\
         \x20   trace[traceLen].device = device;\n\
         \x20   trace[traceLen].view = view;\n\
         \x20   trace[traceLen].id = id;\n\
         \x20   traceLen++;\n\
         \x20   devices[device].count++\n\
         }\n\n\
         inline pushToBackstack(device, machine, state, call) {\n\
         \x20   currentBackstack.index++;\n\
         \x20   currentState = state;\n\
         \x20   currentMachine = machine;\n\
         \x20   currentBackstack.events[currentBackstack.index] = call\n\
         }\n\n\
         inline popFromBackstack(device) {\n\
         \x20   currentBackstack.index--\n\
         }\n\n\
         /* resume the last backstack entry of `machine`, or enter it afresh */\n\
         inline reuseMachine(device, machine, state, call, ret) {\n\
         \x20   k = currentBackstack.index - 1;\n\
         \x20   do\n\
         \x20   :: k >= 0 && currentBackstack.machines[k] != machine -> k--\n\
         \x20   :: else -> break\n\
         \x20   od;\n\
         \x20   if\n\
         \x20   :: k >= 0 -> currentBackstack.index = k\n\
         \x20   :: else -> currentState = ret; pushToBackstack(device, machine, state, call)\n\
         \x20   fi\n\
         }\n\n",
    );

    // entering views and machines
    let mut entered = BTreeSet::new();
    for e in &model.connection.edges {
        if !entered.insert((e.target_machine.clone(), e.target.clone())) {
            continue;
        }
        let inline = enter_name(&mut mg, model, &e.target_machine, &e.target);
        let _ = writeln!(out, "inline {inline}(device, call) {{");
        let _ = writeln!(
            out,
            "    pushToBackstack(device, {}, {}, call)",
            mg.get("M_", &e.target_machine),
            mg.get("State_", &format!("{}_{}", e.target_machine, e.target))
        );
        out.push_str("}\n\n");
    }

    // one inline per machine
    let mut ids = table.iter();
    for m in &model.machines {
        let view = mg.get("VIEW_", &view_key(model, &m.id));
        let st = |mg: &mut Mangler, s: &str| mg.get("State_", &format!("{}_{}", m.id, s));
        let _ = writeln!(out, "inline {}(device) {{", machine_inline(&mut mg, model, &m.id));
        let edges: Vec<_> = model
            .connection
            .edges
            .iter()
            .filter(|e| e.source_machine == m.id)
            .collect();
        if m.transitions.is_empty() && edges.is_empty() {
            out.push_str("    false /* no transitions */\n}\n\n");
            continue;
        }
        out.push_str("    do\n");
        for t in &m.transitions {
            let id = ids.next().expect("table covers every transition").id;
            let mut guard = format!("currentState == {} && room(device)", st(&mut mg, &t.source));
            let mut effect = String::new();
            if let Some((c, dev)) = channel_of(model, &t.event.name, t.event.kind) {
                let dev = mg.get("D_", dev);
                if t.event.kind == EventKind::System {
                    let _ = write!(guard, " && (device != {dev} || pending[{c}] > 0)");
                    let _ = write!(effect, "; if :: device == {dev} -> pending[{c}]-- :: else -> skip fi");
                } else {
                    let _ = write!(effect, "; if :: device == {dev} -> pending[{c}]++ :: else -> skip fi");
                }
            }
            let target = st(&mut mg, &t.target);
            let brk = if m.final_states.contains(&t.target) {
                "; break"
            } else {
                ""
            };
            let _ = writeln!(
                out,
                "    :: atomic {{ {guard} -> transition(device, {view}, {id}){effect}; currentState = {target} }}{brk}"
            );
        }
        for e in edges {
            let id = ids.next().expect("table covers every transition").id;
            let source = st(&mut mg, &e.source);
            let ret = st(
                &mut mg,
                m.return_of.get(&e.source).map_or(e.source.as_str(), String::as_str),
            );
            let call = mg.get("CALL_", &e.event.name);
            let reuse = model.call_attributes(&e.event.name).is_some_and(|a| a.reuse);
            let body = if reuse {
                format!(
                    "reuseMachine(device, {}, {}, {call}, {ret})",
                    mg.get("M_", &e.target_machine),
                    mg.get("State_", &format!("{}_{}", e.target_machine, e.target))
                )
            } else {
                format!(
                    "currentState = {ret}; {}(device, {call})",
                    enter_name(&mut mg, model, &e.target_machine, &e.target)
                )
            };
            let _ = writeln!(
                out,
                "    :: atomic {{ currentState == {source} && room(device) -> transition(device, {view}, {id}); {body} }}; break"
            );
        }
        out.push_str("    od\n}\n\n");
    }

    // devices
    for dev in &model.devices {
        let dname = mg.get("D_", &dev.id);
        let mut starts = Vec::new();
        for entry in &dev.entries {
            let Some(m) = model.machine(entry) else { continue };
            let app_name = m.origin.as_ref().map_or(m.id.clone(), |o| o.application.clone());
            let inline = mg.get("app_", &format!("{}_{}_{}", dev.id, app_name, m.id));
            let _ = writeln!(out, "inline {inline}(device) {{");
            out.push_str("    if\n");
            for s in &m.initial {
                let _ = writeln!(
                    out,
                    "    :: true -> currentBackstack.index = 0; currentState = {}; currentMachine = {}",
                    mg.get("State_", &format!("{}_{}", m.id, s)),
                    mg.get("M_", &m.id)
                );
            }
            out.push_str("    fi\n}\n\n");
            starts.push(inline);
        }
        let _ = writeln!(out, "active proctype {}() {{", mg.get("device_", &dev.id));
        let _ = writeln!(out, "    byte device = {dname};");
        out.push_str("    short k;\n    if\n");
        for s in &starts {
            let _ = writeln!(out, "    :: true -> {s}(device)");
        }
        out.push_str(
            "    fi;\n\
             \x20   do\n\
             \x20   :: IS_FINAL(currentState) ->\n\
             \x20       if\n\
             \x20       :: currentBackstack.index > 0 && AUTO_RETURN(currentBackstack.events[currentBackstack.index]) -> popFromBackstack(device)\n\
             \x20       :: else -> break\n\
             \x20       fi\n\
             \x20   :: else ->\n\
             \x20       if\n",
        );
        for m in &model.machines {
            let _ = writeln!(
                out,
                "        :: currentMachine == {} -> {}(device)",
                mg.get("M_", &m.id),
                machine_inline(&mut mg, model, &m.id)
            );
        }
        out.push_str("        fi\n    od;\n    devices[device].finished = true\n}\n\n");
    }

    let all: Vec<String> = (0..model.devices.len())
        .map(|i| format!("devices[{i}].finished"))
        .collect();
    let _ = writeln!(
        out,
        "active proctype traceCloser() provided ({}) {{",
        if all.is_empty() {
            "false".to_string()
        } else {
            all.join(" && ")
        }
    );
    out.push_str(
        "    short i = 0;\n\
         end_tc:\n\
         \x20   atomic {\n\
         \x20       printf(\"TC\");\n\
         \x20       do\n\
         \x20       :: i < traceLen -> printf(\" %d:%d:%d\", trace[i].device, trace[i].view, trace[i].id); i++\n\
         \x20       :: else -> break\n\
         \x20       od;\n\
         \x20       printf(\"\\n\")\n\
         \x20   }\n\
         }\n",
    );
    out
}

fn machine_inline(mg: &mut Mangler, model: &SystemModel, machine: &str) -> String {
    let name = match model.machine(machine).and_then(|m| m.origin.as_ref()) {
        Some(o) => format!("{}_{}_{}", o.application, o.view, o.machine),
        None => machine.to_string(),
    };
    mg.get("statemachine_", &name)
}

/// `view_<App>_<View>` when the callee is its view's entry machine,
/// `enter_<machine>_<state>` otherwise.
fn enter_name(mg: &mut Mangler, model: &SystemModel, machine: &str, state: &str) -> String {
    match model.machine(machine).and_then(|m| m.origin.as_ref()) {
        Some(o) => mg.get(
            "view_",
            &format!("{}_{}_{}_{}", o.application, o.view, o.machine, state),
        ),
        None => mg.get("enter_", &format!("{machine}_{state}")),
    }
}

/// The channel an event belongs to, with the device it counts on.
fn channel_of<'m>(model: &'m SystemModel, event: &str, kind: EventKind) -> Option<(usize, &'m str)> {
    model.channels.iter().enumerate().find_map(|(i, c)| match kind {
        EventKind::System if c.receive_event == event => Some((i, c.receiver.as_str())),
        EventKind::User if c.send_event == event => Some((i, c.sender.as_str())),
        _ => None,
    })
}
