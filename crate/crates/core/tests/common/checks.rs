//! Whole-criterion checks shared by the crate tests and the acceptance
//! target. Each returns a one-line summary or the first failure.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use mbtgen::emit::{emit_promela, transition_table, ActionScript};
use mbtgen::io::{self, TransitionType};
use mbtgen::model::*;
use mbtgen::replay::replay;
use mbtgen::semantics::{top, CallId, Configuration, Rule, Semantics, StateRef};
use mbtgen::{explore_multi, ExplorationBound, ExploreOptions, ReceivePolicy};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// M1: i -a-> c, r -b-> f with c calling M2 (resume at r); M2: j -x-> g.
pub fn caller_callee(reuse: bool, auto_return: bool) -> SystemModel {
    SystemModel {
        machines: vec![
            ViewStateMachine::new("M1")
                .with_states(["i", "c", "r", "f"])
                .with_initial("i")
                .with_connection("c", "r")
                .with_final("f")
                .with_transition("i", EventLabel::user("a"), "c")
                .with_transition("r", EventLabel::user("b"), "f"),
            ViewStateMachine::new("M2")
                .with_states(["j", "g"])
                .with_initial("j")
                .with_final("g")
                .with_transition("j", EventLabel::user("x"), "g"),
        ],
        connection: ConnectionRelation {
            edges: vec![ConnectionEdge::new("M1", "c", "v", "M2", "j")],
        },
        call_attrs: vec![CallEventAttributes::new("v", reuse, auto_return)],
        devices: vec![DeviceAssignment::new("d", ["M1"])],
        ..SystemModel::default()
    }
}

pub fn cfg(current: StateRef, history: Vec<StateRef>, events: Vec<CallId>) -> Configuration {
    Configuration {
        current,
        state_history: history,
        event_history: events,
    }
}

/// The rule that justifies a successor, worked out from the model itself.
pub fn derive_rule(model: &SystemModel, sem: &Semantics, from: &Configuration, label: Option<&EventLabel>) -> Rule {
    let Some(label) = label else { return Rule::R5 };
    if label.kind != EventKind::Call {
        return Rule::R1;
    }
    let machine = sem.machine_id(from.current.machine);
    let state = sem.state_name(from.current);
    let edge = model
        .connection
        .edges
        .iter()
        .find(|e| e.source_machine == machine && e.source == state && e.event == *label)
        .unwrap();
    let attrs = model.call_attributes(&label.name).unwrap();
    if !attrs.reuse {
        return Rule::R2;
    }
    let target = sem.state(&edge.target_machine, &edge.target).unwrap();
    if from.state_history.iter().any(|s| s.machine == target.machine) {
        Rule::R4
    } else {
        Rule::R3
    }
}

fn single_step(sem: &Semantics, from: &Configuration, rule: Rule, want: &Configuration) -> Result<(), String> {
    let succ = sem.enabled_single(from);
    ensure(succ.len() == 1, || format!("{rule}: {} successors", succ.len()))?;
    ensure(succ[0].rule == rule, || format!("{rule}: tagged {}", succ[0].rule))?;
    ensure(succ[0].config == *want, || format!("{rule}: got {:?}", succ[0].config))
}

/// One directed configuration per rule, then random walks where every
/// successor's tag is compared against [`derive_rule`].
pub fn rule_suite() -> Check {
    let start = Instant::now();
    let plain = caller_callee(false, true);
    let sem = Semantics::new(&plain).map_err(|e| e.to_string())?;
    let s = |m, n| sem.state(m, n).unwrap();
    let v = sem.call("v").unwrap();
    single_step(
        &sem,
        &Configuration::initial(s("M1", "i")),
        Rule::R1,
        &Configuration::initial(s("M1", "c")),
    )?;
    single_step(
        &sem,
        &Configuration::initial(s("M1", "c")),
        Rule::R2,
        &cfg(s("M2", "j"), vec![s("M1", "r")], vec![v]),
    )?;
    single_step(
        &sem,
        &cfg(s("M2", "g"), vec![s("M1", "r")], vec![v]),
        Rule::R5,
        &Configuration::initial(s("M1", "r")),
    )?;

    let reuse = caller_callee(true, true);
    let sem = Semantics::new(&reuse).map_err(|e| e.to_string())?;
    let s = |m, n| sem.state(m, n).unwrap();
    let v = sem.call("v").unwrap();
    single_step(
        &sem,
        &cfg(s("M1", "c"), vec![s("M1", "i")], vec![v]),
        Rule::R3,
        &cfg(s("M2", "j"), vec![s("M1", "i"), s("M1", "r")], vec![v, v]),
    )?;
    let before = cfg(
        s("M1", "c"),
        vec![s("M1", "i"), s("M2", "j"), s("M1", "r")],
        vec![v, v, v],
    );
    ensure(top(&before.state_history, s("M2", "j").machine) == Some(1), || {
        "top".into()
    })?;
    single_step(&sem, &before, Rule::R4, &cfg(s("M2", "j"), vec![s("M1", "i")], vec![v]))?;

    let mut checked = 0;
    for seed in 0..64u64 {
        let model = super::random_model(seed);
        let sem = Semantics::new(&model).map_err(|e| e.to_string())?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for d in 0..sem.device_count() {
            for mut now in sem.initial_configs(d) {
                for _ in 0..12 {
                    let succ = sem.enabled_single(&now);
                    if succ.is_empty() {
                        break;
                    }
                    for st in &succ {
                        let label = st.mv.map(|mv| sem.label(mv));
                        let want = derive_rule(&model, &sem, &now, label);
                        ensure(st.rule == want, || {
                            format!("seed {seed}: tagged {} expected {want}", st.rule)
                        })?;
                        checked += 1;
                    }
                    now = succ[rng.gen_range(0..succ.len())].config.clone();
                }
            }
        }
    }
    let took = start.elapsed();
    ensure(took < Duration::from_secs(1), || format!("took {took:?}"))?;
    Ok(format!("5 directed rules, {checked} random successors, {took:.2?}"))
}

pub fn oracle_equivalence(models: u64) -> Check {
    let start = Instant::now();
    let mut cases = 0;
    for seed in 0..models {
        cases += super::check_oracle(seed)?;
    }
    let took = start.elapsed();
    ensure(took < Duration::from_secs(60), || format!("took {took:?}"))?;
    Ok(format!("{models} models, {cases} test cases, {took:.2?}"))
}

pub fn reduction_soundness(models: u64) -> Check {
    let (mut reduced, mut full) = (0, 0);
    for seed in 0..models {
        let (r, f) = super::check_reduction(seed)?;
        reduced += r;
        full += f;
    }
    Ok(format!("{models} models, {reduced} reduced vs {full} unreduced"))
}

/// e+ on one device, e- on another, joined by a channel.
pub fn send_receive_model() -> SystemModel {
    SystemModel {
        machines: vec![
            ViewStateMachine::new("A")
                .with_states(["i", "f"])
                .with_initial("i")
                .with_final("f")
                .with_transition("i", EventLabel::user("e+"), "f"),
            ViewStateMachine::new("B")
                .with_states(["i", "f"])
                .with_initial("i")
                .with_final("f")
                .with_transition("i", EventLabel::system("e-"), "f"),
        ],
        devices: vec![DeviceAssignment::new("a", ["A"]), DeviceAssignment::new("b", ["B"])],
        channels: vec![ChannelBinding {
            name: "e".into(),
            send_event: "e+".into(),
            sender: "a".into(),
            receive_event: "e-".into(),
            receiver: "b".into(),
        }],
        ..SystemModel::default()
    }
}

fn event_names(model: &SystemModel, bound: usize, policy: ReceivePolicy) -> Result<BTreeSet<Vec<String>>, String> {
    let sem = Semantics::new(model).map_err(|e| e.to_string())?;
    let opts = ExploreOptions::new(ExplorationBound::new(bound).unwrap()).with_policy(policy);
    let r = explore_multi(&sem, &opts).map_err(|e| e.to_string())?;
    Ok(r.test_cases
        .iter()
        .map(|t| t.events().into_iter().map(|(_, e)| e).collect())
        .collect())
}

pub fn channel_policies() -> Check {
    let model = send_receive_model();
    let seq = |s: &[&str]| s.iter().map(|e| e.to_string()).collect::<Vec<_>>();
    let relaxed = event_names(&model, 2, ReceivePolicy::Relaxed)?;
    let want: BTreeSet<_> = [seq(&["e+", "e-"]), seq(&["e-", "e+"])].into();
    ensure(relaxed == want, || format!("relaxed gave {relaxed:?}"))?;
    let strict = event_names(&model, 2, ReceivePolicy::Strict)?;
    let want: BTreeSet<_> = [seq(&["e+", "e-"])].into();
    ensure(strict == want, || format!("strict gave {strict:?}"))?;
    Ok("relaxed {e+ e-, e- e+}, strict {e+ e-}".into())
}

/// (test cases, states expanded) for the fixture at `bound`.
pub fn fixture_run(bound: usize) -> Result<(usize, u64), String> {
    let model = super::load_fixture("facebook_youtube.xml");
    let sem = Semantics::new(&model).map_err(|e| e.to_string())?;
    let r =
        explore_multi(&sem, &ExploreOptions::new(ExplorationBound::new(bound).unwrap())).map_err(|e| e.to_string())?;
    Ok((r.test_cases.len(), r.stats.expanded))
}

pub fn growth() -> Check {
    let runs: Vec<(usize, (usize, u64))> = [4, 6, 8, 10]
        .into_iter()
        .map(|b| fixture_run(b).map(|r| (b, r)))
        .collect::<Result<_, _>>()?;
    for w in runs.windows(2) {
        let ((b0, (c0, s0)), (b1, (c1, s1))) = (w[0], w[1]);
        ensure(c1 > c0, || format!("test cases {c0} at {b0}, {c1} at {b1}"))?;
        ensure(s1 > s0, || format!("states {s0} at {b0}, {s1} at {b1}"))?;
    }
    let shown: Vec<String> = runs.iter().map(|(b, (c, s))| format!("b={b}: {c}/{s}")).collect();
    Ok(format!("cases/states {}", shown.join(", ")))
}

pub fn golden_parse() -> Check {
    let path = super::fixture("facebook_youtube.xml");
    let text = std::fs::read_to_string(&path).map_err(|e| e.to_string())?;
    let doc = io::parse_model(&text).map_err(|e| e.to_string())?;
    let home = doc.state_machine("HomeUpdate").ok_or("no HomeUpdate machine")?;
    let count = |k: TransitionType| home.transitions.iter().filter(|t| t.kind_of_transition == k).count();
    let kinds = (
        count(TransitionType::Simple),
        count(TransitionType::View),
        count(TransitionType::StateMachine),
    );
    ensure(home.transitions.len() == 7, || {
        format!("{} transitions", home.transitions.len())
    })?;
    ensure(kinds == (4, 2, 1), || format!("types {kinds:?}"))?;
    let again = io::serialize_model(&doc);
    ensure(again == text, || "serialized text differs from the file".into())?;
    ensure(io::parse_model(&again).map_err(|e| e.to_string())? == doc, || {
        "reparse differs".into()
    })?;
    Ok("7 transitions (Simple 4, View 2, StateMachine 1), round trip byte-identical".into())
}

/// Body of `inline statemachine_<name>(device) { ... }`.
pub fn machine_block<'a>(pml: &'a str, mangled: &str) -> Option<&'a str> {
    let head = format!("inline statemachine_{mangled}(device) {{\n");
    let start = pml.find(&head)? + head.len();
    let len = pml[start..].find("\n}\n")?;
    Some(&pml[start..start + len])
}

pub fn promela_structure() -> Check {
    let model = super::load_fixture("facebook_youtube.xml");
    let pml = emit_promela(&model, &ExplorationBound::new(8).unwrap());
    let proctypes = pml.matches("proctype ").count();
    ensure(proctypes == model.devices.len() + 1, || {
        format!("{proctypes} proctypes")
    })?;
    for d in &model.devices {
        ensure(pml.contains(&format!("active proctype device_{}()", d.id)), || {
            format!("no proctype for {}", d.id)
        })?;
    }
    ensure(pml.contains("proctype traceCloser()"), || "no traceCloser".into())?;
    ensure(pml.contains("typedef Backstack {"), || "no Backstack typedef".into())?;
    let table = transition_table(&model);
    for m in &model.machines {
        let mangled = m.id.replace('.', "_");
        let block = machine_block(&pml, &mangled).ok_or_else(|| format!("no inline for {}", m.id))?;
        let branches = block.matches(":: atomic {").count();
        let transitions = table.iter().filter(|t| t.machine == m.id).count();
        ensure(branches == transitions, || {
            format!("{}: {branches} branches, {transitions} transitions", m.id)
        })?;
    }
    Ok(format!(
        "{} device proctype(s) + traceCloser, Backstack typedef, {} branches over {} machines",
        model.devices.len(),
        table.len(),
        model.machines.len()
    ))
}

/// Binds every user and call event without a binding to a button.
pub fn bind_buttons(model: &mut SystemModel) {
    let mut wanted = BTreeSet::new();
    for m in &model.machines {
        for t in &m.transitions {
            if t.event.kind != EventKind::System {
                wanted.insert((m.id.clone(), t.event.name.clone()));
            }
        }
    }
    for e in &model.connection.edges {
        wanted.insert((e.source_machine.clone(), e.event.name.clone()));
    }
    for (i, (machine, event)) in wanted.into_iter().enumerate() {
        if model.binding(&machine, &event).is_none() {
            model.control_bindings.push(ControlBinding {
                machine,
                event: event.clone(),
                control_group: event.clone(),
                action: Action::Click,
                selector: Selector {
                    classname: "android.widget.Button".into(),
                    index: i as u32,
                    text: event,
                    resource_id: String::new(),
                },
                parameter: None,
            });
        }
    }
}

/// Scripts for every test case of `model`, replayed after a JSON round trip.
pub fn replay_model(model: &SystemModel, opts: &ExploreOptions) -> Result<usize, String> {
    let mut bound = model.clone();
    bind_buttons(&mut bound);
    let model = &bound;
    let sem = Semantics::new(model).map_err(|e| e.to_string())?;
    let r = explore_multi(&sem, opts).map_err(|e| e.to_string())?;
    for (i, tc) in r.test_cases.iter().enumerate() {
        let script = ActionScript::build(tc, model, opts.bound.max_transitions_per_device, opts.policy)
            .map_err(|e| e.to_string())?;
        let back = ActionScript::from_json(&script.to_json().map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        let replayed = replay(model, &back).map_err(|e| format!("case {i}: {e}"))?;
        let labelled: Vec<(String, String)> = replayed.into_iter().filter_map(|(d, e)| e.map(|e| (d, e))).collect();
        ensure(labelled == tc.events(), || {
            format!("case {i}: replayed different events")
        })?;
    }
    Ok(r.test_cases.len())
}

pub fn replay_fidelity() -> Check {
    let fixture = super::load_fixture("facebook_youtube.xml");
    let mut total = 0;
    for b in [4, 6, 8] {
        total += replay_model(&fixture, &ExploreOptions::new(ExplorationBound::new(b).unwrap()))?;
    }
    let channel = send_receive_model();
    let relaxed = ExploreOptions::new(ExplorationBound::new(2).unwrap()).with_policy(ReceivePolicy::Relaxed);
    total += replay_model(&channel, &relaxed)?;
    for seed in 0..40 {
        let model = super::random_model(seed);
        let (bound, policy, truncated) = super::oracle_settings(&model, seed);
        let mut b = ExplorationBound::new(bound).unwrap();
        b.emit_truncated = truncated;
        total += replay_model(&model, &ExploreOptions::new(b).with_policy(policy))?;
    }
    Ok(format!("{total} scripts replayed"))
}
