//! Shared helpers: a seeded random model generator and a brute-force
//! enumerator that applies the transition rules directly on names.

#![allow(dead_code)]

pub mod checks;

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use mbtgen::model::*;
use mbtgen::ReceivePolicy;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

pub fn load_fixture(name: &str) -> SystemModel {
    use mbtgen::io;
    let path = fixture(name);
    let text = std::fs::read_to_string(&path).unwrap();
    let doc = io::parse_model(&text).unwrap();
    let mut controls = BTreeMap::new();
    for (view, p) in io::controls_paths(&doc, &fixture("controls")) {
        controls.insert(view, io::parse_controls(&std::fs::read_to_string(p).unwrap()).unwrap());
    }
    io::build_system_model(&doc, &controls).unwrap()
}

/// A valid model with at most 2 devices, 2 machines per device and 6
/// states per machine. Devices may share a send/receive channel.
pub fn random_model(seed: u64) -> SystemModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let devices = rng.gen_range(1..=2);
    let mut model = SystemModel::default();
    let mut owners = Vec::new();
    for d in 0..devices {
        for k in 0..rng.gen_range(1..=2) {
            owners.push((d, format!("d{d}m{k}")));
        }
    }
    let channel = devices == 2 && rng.gen_bool(0.5);
    let user = ["a", "b", "c"];
    for (d, id) in &owners {
        let n = rng.gen_range(2..=6);
        let states: Vec<String> = (0..n).map(|i| format!("s{i}")).collect();
        let mut m = ViewStateMachine::new(id.clone())
            .with_states(states.clone())
            .with_initial("s0")
            .with_final(states[n - 1].clone());
        // connection states come from the middle; each gets at least one call edge
        let mut connection = BTreeSet::new();
        for s in &states[1..n - 1] {
            if rng.gen_bool(0.3) {
                connection.insert(s.clone());
            }
        }
        let mut alphabet: Vec<(&str, EventKind)> = user.iter().map(|e| (*e, EventKind::User)).collect();
        if channel {
            alphabet.push(if *d == 0 {
                ("snd", EventKind::User)
            } else {
                ("rcv", EventKind::System)
            });
        }
        for (i, s) in states[..n - 1].iter().enumerate() {
            let mut events = alphabet.clone();
            events.shuffle(&mut rng);
            let fanout = rng.gen_range(1..=2);
            for (k, (e, kind)) in events.into_iter().take(fanout).enumerate() {
                // the first transition usually moves towards the final state
                let target = if k == 0 && rng.gen_bool(0.7) {
                    states[i + 1].clone()
                } else {
                    states[rng.gen_range(0..n)].clone()
                };
                m = m.with_transition(s, EventLabel::new(e, kind), &target);
            }
        }
        for c in &connection {
            let ret = states[rng.gen_range(0..n)].clone();
            m = m.with_connection(c.clone(), ret);
        }
        model.machines.push(m);
    }
    let ids: Vec<String> = owners.iter().map(|(_, id)| id.clone()).collect();
    let mut call = 0;
    for m in model.machines.clone() {
        for c in &m.connection {
            for _ in 0..rng.gen_range(1..=2) {
                let target = ids.choose(&mut rng).unwrap().clone();
                let name = format!("call{call}");
                call += 1;
                model
                    .connection
                    .edges
                    .push(ConnectionEdge::new(m.id.clone(), c.clone(), name.clone(), target, "s0"));
                model
                    .call_attrs
                    .push(CallEventAttributes::new(name, rng.gen_bool(0.4), rng.gen_bool(0.8)));
            }
        }
    }
    for d in 0..devices {
        let mine: Vec<&String> = owners.iter().filter(|(o, _)| *o == d).map(|(_, id)| id).collect();
        let entries: Vec<String> = if mine.len() > 1 && rng.gen_bool(0.3) {
            mine.iter().map(|s| s.to_string()).collect()
        } else {
            vec![mine[0].clone()]
        };
        model.devices.push(DeviceAssignment::new(format!("dev{d}"), entries));
    }
    if channel {
        let used = |e: &str| {
            model
                .machines
                .iter()
                .flat_map(|m| &m.transitions)
                .any(|t| t.event.name == e)
        };
        if used("snd") && used("rcv") {
            model.channels.push(ChannelBinding {
                name: "ch".into(),
                send_event: "snd".into(),
                sender: "dev0".into(),
                receive_event: "rcv".into(),
                receiver: "dev1".into(),
            });
        }
    }
    let violations = validate_system(&model);
    assert!(
        errors(&violations).next().is_none(),
        "generator produced an invalid model (seed {seed}): {violations:?}"
    );
    model
}

type Node = (String, String);

#[derive(Clone, Debug)]
struct Config {
    current: Node,
    history: Vec<Node>,
    events: Vec<String>,
}

/// Successors of one configuration as `(label, next)`; `None` is a return.
fn single(model: &SystemModel, c: &Config) -> Vec<(Option<EventLabel>, Config)> {
    let (mi, s) = &c.current;
    let m = model.machine(mi).unwrap();
    let mut out = Vec::new();
    for t in m.transitions.iter().filter(|t| &t.source == s) {
        let mut n = c.clone();
        n.current = (mi.clone(), t.target.clone());
        out.push((Some(t.event.clone()), n));
    }
    for e in model
        .connection
        .edges
        .iter()
        .filter(|e| &e.source_machine == mi && &e.source == s)
    {
        let attrs = model.call_attributes(&e.event.name).unwrap();
        let last = c.history.iter().rposition(|(hm, _)| *hm == e.target_machine);
        let mut n = c.clone();
        match (attrs.reuse, last) {
            (true, Some(k)) => {
                n.current = c.history[k].clone();
                n.history.truncate(k);
                n.events.truncate(k);
            }
            _ => {
                n.history.push((mi.clone(), m.return_of[s].clone()));
                n.events.push(e.event.name.clone());
                n.current = (e.target_machine.clone(), e.target.clone());
            }
        }
        out.push((Some(e.event.clone()), n));
    }
    if m.final_states.contains(s) {
        if let Some(top) = c.events.last() {
            if model.call_attributes(top).unwrap().auto_return {
                let mut n = c.clone();
                n.current = n.history.pop().unwrap();
                n.events.pop();
                out.push((None, n));
            }
        }
    }
    out
}

fn finished(model: &SystemModel, c: &Config) -> bool {
    let m = model.machine(&c.current.0).unwrap();
    m.final_states.contains(&c.current.1) && single(model, c).is_empty()
}

pub type Sequence = Vec<(String, String)>;

/// Every emitted `(device, event)` sequence mapped to whether some trace
/// with that sequence completes.
pub fn oracle(
    model: &SystemModel,
    bound: usize,
    policy: ReceivePolicy,
    emit_truncated: bool,
) -> BTreeMap<Sequence, bool> {
    let mut starts: Vec<Vec<Config>> = vec![Vec::new()];
    for d in &model.devices {
        let mut next = Vec::new();
        for prefix in &starts {
            for entry in &d.entries {
                for s in &model.machine(entry).unwrap().initial {
                    let mut p = prefix.clone();
                    p.push(Config {
                        current: (entry.clone(), s.clone()),
                        history: vec![],
                        events: vec![],
                    });
                    next.push(p);
                }
            }
        }
        starts = next;
    }
    let mut out = BTreeMap::new();
    for start in starts {
        let done = vec![false; start.len()];
        let counts = vec![0; start.len()];
        let pending = vec![0i32; model.channels.len()];
        walk(
            model,
            bound,
            policy,
            emit_truncated,
            start,
            done,
            counts,
            pending,
            &mut Vec::new(),
            &mut out,
        );
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn walk(
    model: &SystemModel,
    bound: usize,
    policy: ReceivePolicy,
    emit_truncated: bool,
    configs: Vec<Config>,
    done: Vec<bool>,
    counts: Vec<usize>,
    pending: Vec<i32>,
    trace: &mut Sequence,
    out: &mut BTreeMap<Sequence, bool>,
) {
    let debt_free = pending.iter().all(|p| *p >= 0);
    let complete = done.iter().all(|d| *d) && debt_free;
    if !trace.is_empty() && (complete || (emit_truncated && debt_free)) {
        let e = out.entry(trace.clone()).or_insert(false);
        *e |= complete;
    }
    for (d, c) in configs.iter().enumerate() {
        if done[d] {
            continue;
        }
        let dev = &model.devices[d].id;
        for (label, next) in single(model, c) {
            let mut pend = pending.clone();
            if let Some(l) = &label {
                if counts[d] >= bound {
                    continue;
                }
                for (i, ch) in model.channels.iter().enumerate() {
                    if ch.send_event == l.name && &ch.sender == dev {
                        pend[i] += 1;
                    }
                    if ch.receive_event == l.name && &ch.receiver == dev {
                        if policy == ReceivePolicy::Strict && pend[i] <= 0 {
                            pend[i] = i32::MIN;
                        } else {
                            pend[i] -= 1;
                        }
                    }
                }
                if pend.contains(&i32::MIN) {
                    continue;
                }
            }
            let mut cs = configs.clone();
            let mut ds = done.clone();
            let mut ns = counts.clone();
            ds[d] = finished(model, &next);
            cs[d] = next;
            if let Some(l) = &label {
                ns[d] += 1;
                trace.push((dev.clone(), l.name.clone()));
            }
            walk(model, bound, policy, emit_truncated, cs, ds, ns, pend, trace, out);
            if label.is_some() {
                trace.pop();
            }
        }
    }
}

/// Bound, policy and truncation setting used for a random model.
pub fn oracle_settings(model: &SystemModel, seed: u64) -> (usize, ReceivePolicy, bool) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let max = if model.devices.len() == 1 { 6 } else { 4 };
    let policy = if rng.gen_bool(0.5) {
        ReceivePolicy::Strict
    } else {
        ReceivePolicy::Relaxed
    };
    let longest = model.machines.iter().map(|m| m.states.len()).max().unwrap_or(1);
    let low = longest.saturating_sub(1).clamp(1, max);
    let bound = if rng.gen_bool(0.2) {
        rng.gen_range(1..=max)
    } else {
        rng.gen_range(low..=max)
    };
    (bound, policy, rng.gen_bool(0.3))
}

fn options(bound: usize, policy: ReceivePolicy, truncated: bool) -> mbtgen::ExploreOptions {
    let mut b = mbtgen::ExplorationBound::new(bound).unwrap();
    b.emit_truncated = truncated;
    mbtgen::ExploreOptions::new(b).with_policy(policy)
}

/// Explorer output as `sequence -> complete`.
pub fn explored(cases: &[mbtgen::TestCase]) -> BTreeMap<Sequence, bool> {
    let mut out = BTreeMap::new();
    for tc in cases {
        assert!(
            out.insert(tc.events(), tc.complete).is_none(),
            "duplicate sequence {:?}",
            tc.events()
        );
    }
    out
}

/// Explorer output equals the brute-force enumeration for the model of `seed`.
pub fn check_oracle(seed: u64) -> Result<usize, String> {
    let model = random_model(seed);
    let (bound, policy, truncated) = oracle_settings(&model, seed);
    let sem = mbtgen::Semantics::new(&model).unwrap();
    let result = mbtgen::explore_multi(&sem, &options(bound, policy, truncated)).map_err(|e| e.to_string())?;
    let got = explored(&result.test_cases);
    let want = oracle(&model, bound, policy, truncated);
    if got != want {
        let missing: Vec<_> = want.keys().filter(|k| !got.contains_key(*k)).take(3).collect();
        let extra: Vec<_> = got.keys().filter(|k| !want.contains_key(*k)).take(3).collect();
        return Err(format!(
            "seed {seed} bound {bound} {policy}: {} vs {} cases; missing {missing:?}, extra {extra:?}",
            got.len(),
            want.len()
        ));
    }
    Ok(got.len())
}

/// All step sequences reachable from `steps` by swapping adjacent
/// independent steps.
pub fn swap_closure(steps: &[mbtgen::Step]) -> BTreeSet<Vec<mbtgen::Step>> {
    use mbtgen::por::IndependenceRelation;
    let mut seen = BTreeSet::new();
    let mut todo = vec![steps.to_vec()];
    while let Some(t) = todo.pop() {
        if !seen.insert(t.clone()) {
            continue;
        }
        let rel = IndependenceRelation::for_trace(&t);
        for i in 0..t.len().saturating_sub(1) {
            if rel.independent(i, i + 1) {
                let mut u = t.clone();
                u.swap(i, i + 1);
                if !seen.contains(&u) {
                    todo.push(u);
                }
            }
        }
    }
    seen
}

/// Reduced output closed under independent swaps gives back the unreduced
/// output, and is no larger. Returns (reduced, unreduced) counts.
pub fn check_reduction(seed: u64) -> Result<(usize, usize), String> {
    let model = random_model(seed);
    let (bound, policy, _) = oracle_settings(&model, seed);
    let sem = mbtgen::Semantics::new(&model).unwrap();
    let full = mbtgen::explore_multi(&sem, &options(bound, policy, false)).map_err(|e| e.to_string())?;
    let reduced =
        mbtgen::explore_multi(&sem, &options(bound, policy, false).with_reduction(true)).map_err(|e| e.to_string())?;
    let want: BTreeSet<Sequence> = full.test_cases.iter().map(|t| t.events()).collect();
    let mut got = BTreeSet::new();
    for tc in &reduced.test_cases {
        for steps in swap_closure(&tc.steps) {
            let t = mbtgen::TestCase {
                steps,
                complete: tc.complete,
            };
            got.insert(t.events());
        }
    }
    if got != want {
        return Err(format!(
            "seed {seed}: closure has {} sequences, unreduced {}",
            got.len(),
            want.len()
        ));
    }
    if reduced.test_cases.len() > full.test_cases.len() {
        return Err(format!("seed {seed}: reduction grew the output"));
    }
    Ok((reduced.test_cases.len(), full.test_cases.len()))
}
