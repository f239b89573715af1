//! Executable transition rules over device configurations.
//!
//! Single-device steps follow rules R1 to R5 over configurations
//! `⟨current, state history, call-event history⟩`; multi-device steps
//! interleave devices and track the pending multiset of channel sends (R6/R7).

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::model::{self, EventKind, EventLabel, SystemModel, TransitionOrigin};

/// A state of some machine, by index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StateRef {
    pub machine: u32,
    pub state: u32,
}

/// A call event, by index into the model's call-event table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CallId(pub u32);

/// An R1 transition or a connection edge, by index into the move table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MoveId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Rule {
    R1,
    R2,
    R3,
    R4,
    R5,
    R6,
    R7,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Configuration {
    pub current: StateRef,
    pub state_history: Vec<StateRef>,
    pub event_history: Vec<CallId>,
}

impl Configuration {
    pub fn initial(state: StateRef) -> Self {
        Self {
            current: state,
            state_history: Vec::new(),
            event_history: Vec::new(),
        }
    }

    pub fn machine(&self) -> u32 {
        self.current.machine
    }
}

/// One successor of a single configuration. `mv` is absent exactly for R5.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Successor {
    pub rule: Rule,
    pub mv: Option<MoveId>,
    pub config: Configuration,
}

/// How a receive event relates to the pending sends of its channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReceivePolicy {
    /// A receive needs a matching send already pending.
    #[default]
    Strict,
    /// A receive may run ahead of its send; the trace owes the send.
    Relaxed,
}

impl fmt::Display for ReceivePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReceivePolicy::Strict => "strict",
            ReceivePolicy::Relaxed => "relaxed",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MultiDeviceState {
    pub per_device: Vec<Configuration>,
    /// Per channel: sends not yet received. Negative values are receives
    /// still owed a send (relaxed policy only).
    pub pending: Vec<i32>,
    pub finished: Vec<bool>,
}

impl MultiDeviceState {
    /// No receive is still waiting for its send.
    pub fn debt_free(&self) -> bool {
        self.pending.iter().all(|p| *p >= 0)
    }

    pub fn all_finished(&self) -> bool {
        self.finished.iter().all(|f| *f)
    }

    /// Canonical little-endian encoding: per device the current state, the
    /// history length and entries, the call-event history, and the finished
    /// flag; then one signed counter per channel.
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend((self.per_device.len() as u16).to_le_bytes());
        for (cfg, fin) in self.per_device.iter().zip(&self.finished) {
            push_state(&mut out, cfg.current);
            out.extend((cfg.state_history.len() as u16).to_le_bytes());
            for s in &cfg.state_history {
                push_state(&mut out, *s);
            }
            for e in &cfg.event_history {
                out.extend((e.0 as u16).to_le_bytes());
            }
            out.push(u8::from(*fin));
        }
        for p in &self.pending {
            out.extend((*p as i16).to_le_bytes());
        }
        out
    }
}

fn push_state(out: &mut Vec<u8>, s: StateRef) {
    out.extend((s.machine as u16).to_le_bytes());
    out.extend((s.state as u16).to_le_bytes());
}

/// A step of a multi-device execution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StepChoice {
    pub device: usize,
    pub rule: Rule,
    pub mv: Option<MoveId>,
}

/// Returns the index `k` of the last history entry belonging to `machine`.
pub fn top(history: &[StateRef], machine: u32) -> Option<usize> {
    history.iter().rposition(|s| s.machine == machine)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MoveKind {
    Local {
        target: StateRef,
    },
    Call {
        call: CallId,
        target: StateRef,
        edge: usize,
    },
}

#[derive(Debug, Clone)]
pub struct Move<'m> {
    pub source: StateRef,
    pub kind: MoveKind,
    pub label: &'m EventLabel,
    pub origin: Option<&'m TransitionOrigin>,
    /// Interned (kind, name) of the label.
    pub name_id: u32,
}

#[derive(Debug, Clone, Copy, Default)]
struct StateInfo {
    initial: bool,
    connection: bool,
    is_final: bool,
    return_to: Option<u32>,
}

#[derive(Debug, Clone, Copy)]
struct ChannelEnd {
    device: usize,
    name_id: u32,
    channel: usize,
}

/// The executable form of a validated [`SystemModel`].
#[derive(Debug)]
pub struct Semantics<'m> {
    model: &'m SystemModel,
    machine_index: HashMap<&'m str, u32>,
    state_index: Vec<HashMap<&'m str, u32>>,
    states: Vec<Vec<StateInfo>>,
    moves: Vec<Move<'m>>,
    /// Per machine, per state: outgoing moves in enumeration order.
    outgoing: Vec<Vec<Vec<MoveId>>>,
    calls: Vec<&'m str>,
    call_flags: Vec<(bool, bool)>,
    names: Vec<(EventKind, &'m str)>,
    sends: Vec<ChannelEnd>,
    receives: Vec<ChannelEnd>,
}

impl<'m> Semantics<'m> {
    /// Validates the model and builds lookup tables. Warnings do not fail.
    pub fn new(model: &'m SystemModel) -> Result<Self, ModelError> {
        let violations: Vec<_> = model::errors(&model::validate_system(model)).cloned().collect();
        if !violations.is_empty() {
            return Err(ModelError::Invalid(violations));
        }

        let machine_index: HashMap<&str, u32> = model
            .machines
            .iter()
            .enumerate()
            .map(|(i, m)| (m.id.as_str(), i as u32))
            .collect();
        let state_index: Vec<HashMap<&str, u32>> = model
            .machines
            .iter()
            .map(|m| {
                m.states
                    .iter()
                    .enumerate()
                    .map(|(i, s)| (s.as_str(), i as u32))
                    .collect()
            })
            .collect();
        let sref = |machine: &str, state: &str| -> StateRef {
            let mi = machine_index[machine];
            StateRef {
                machine: mi,
                state: state_index[mi as usize][state],
            }
        };

        let mut states: Vec<Vec<StateInfo>> = Vec::new();
        for (mi, m) in model.machines.iter().enumerate() {
            let idx = &state_index[mi];
            let infos = m
                .states
                .iter()
                .map(|s| StateInfo {
                    initial: m.initial.contains(s),
                    connection: m.connection.contains(s),
                    is_final: m.final_states.contains(s),
                    return_to: m.return_of.get(s).map(|r| idx[r.as_str()]),
                })
                .collect();
            states.push(infos);
        }

        let mut names: Vec<(EventKind, &str)> = Vec::new();
        let mut name_ids: HashMap<(EventKind, &str), u32> = HashMap::new();
        let mut intern = |label: &'m EventLabel| -> u32 {
            *name_ids.entry((label.kind, label.name.as_str())).or_insert_with(|| {
                names.push((label.kind, label.name.as_str()));
                (names.len() - 1) as u32
            })
        };

        let mut calls: Vec<&str> = Vec::new();
        let mut call_ids: HashMap<&str, CallId> = HashMap::new();
        for edge in &model.connection.edges {
            call_ids.entry(edge.event.name.as_str()).or_insert_with(|| {
                calls.push(edge.event.name.as_str());
                CallId((calls.len() - 1) as u32)
            });
        }
        let call_flags = calls
            .iter()
            .map(|c| {
                let a = model.call_attributes(c).expect("validated");
                (a.reuse, a.auto_return)
            })
            .collect();

        let mut moves = Vec::new();
        for m in &model.machines {
            for t in &m.transitions {
                moves.push(Move {
                    source: sref(&m.id, &t.source),
                    kind: MoveKind::Local {
                        target: sref(&m.id, &t.target),
                    },
                    label: &t.event,
                    origin: t.origin.as_ref(),
                    name_id: intern(&t.event),
                });
            }
        }
        for (i, edge) in model.connection.edges.iter().enumerate() {
            moves.push(Move {
                source: sref(&edge.source_machine, &edge.source),
                kind: MoveKind::Call {
                    call: call_ids[edge.event.name.as_str()],
                    target: sref(&edge.target_machine, &edge.target),
                    edge: i,
                },
                label: &edge.event,
                origin: edge.origin.as_ref(),
                name_id: intern(&edge.event),
            });
        }

        let mut outgoing: Vec<Vec<Vec<MoveId>>> = states.iter().map(|s| vec![Vec::new(); s.len()]).collect();
        for (i, mv) in moves.iter().enumerate() {
            outgoing[mv.source.machine as usize][mv.source.state as usize].push(MoveId(i as u32));
        }
        // R1 before calls, then by event name, then by target
        for per_machine in &mut outgoing {
            for list in per_machine.iter_mut() {
                list.sort_by(|a, b| {
                    let (ma, mb) = (&moves[a.0 as usize], &moves[b.0 as usize]);
                    let key = |m: &Move| match m.kind {
                        MoveKind::Local { target } => (0, target),
                        MoveKind::Call { target, .. } => (1, target),
                    };
                    let (ka, kb) = (key(ma), key(mb));
                    ka.0.cmp(&kb.0)
                        .then_with(|| ma.label.name.cmp(&mb.label.name))
                        .then_with(|| ka.1.cmp(&kb.1))
                        .then_with(|| a.cmp(b))
                });
            }
        }

        let device_index: HashMap<&str, usize> = model
            .devices
            .iter()
            .enumerate()
            .map(|(i, d)| (d.id.as_str(), i))
            .collect();
        let mut sends = Vec::new();
        let mut receives = Vec::new();
        for (c, ch) in model.channels.iter().enumerate() {
            let send = name_ids.get(&(EventKind::User, ch.send_event.as_str()));
            let recv = name_ids.get(&(EventKind::System, ch.receive_event.as_str()));
            if let Some(&name_id) = send {
                sends.push(ChannelEnd {
                    device: device_index[ch.sender.as_str()],
                    name_id,
                    channel: c,
                });
            }
            if let Some(&name_id) = recv {
                receives.push(ChannelEnd {
                    device: device_index[ch.receiver.as_str()],
                    name_id,
                    channel: c,
                });
            }
        }

        Ok(Self {
            model,
            machine_index,
            state_index,
            states,
            moves,
            outgoing,
            calls,
            call_flags,
            names,
            sends,
            receives,
        })
    }

    pub fn model(&self) -> &'m SystemModel {
        self.model
    }

    pub fn state(&self, machine: &str, state: &str) -> Option<StateRef> {
        let mi = *self.machine_index.get(machine)?;
        let si = *self.state_index[mi as usize].get(state)?;
        Some(StateRef { machine: mi, state: si })
    }

    pub fn call(&self, event: &str) -> Option<CallId> {
        self.calls.iter().position(|c| *c == event).map(|i| CallId(i as u32))
    }

    pub fn call_name(&self, call: CallId) -> &'m str {
        self.calls[call.0 as usize]
    }

    pub fn machine_id(&self, machine: u32) -> &'m str {
        &self.model.machines[machine as usize].id
    }

    pub fn state_name(&self, s: StateRef) -> &'m str {
        &self.model.machines[s.machine as usize].states[s.state as usize]
    }

    pub fn get_move(&self, mv: MoveId) -> &Move<'m> {
        &self.moves[mv.0 as usize]
    }

    pub fn moves(&self) -> &[Move<'m>] {
        &self.moves
    }

    pub fn label(&self, mv: MoveId) -> &'m EventLabel {
        self.moves[mv.0 as usize].label
    }

    pub fn name_count(&self) -> usize {
        self.names.len()
    }

    pub fn name(&self, name_id: u32) -> (EventKind, &'m str) {
        self.names[name_id as usize]
    }

    pub fn device_count(&self) -> usize {
        self.model.devices.len()
    }

    pub fn channel_count(&self) -> usize {
        self.model.channels.len()
    }

    fn info(&self, s: StateRef) -> StateInfo {
        self.states[s.machine as usize][s.state as usize]
    }

    pub fn is_final(&self, s: StateRef) -> bool {
        self.info(s).is_final
    }

    pub fn is_initial(&self, s: StateRef) -> bool {
        self.info(s).initial
    }

    pub fn is_connection(&self, s: StateRef) -> bool {
        self.info(s).connection
    }

    pub fn return_of(&self, s: StateRef) -> Option<StateRef> {
        self.info(s).return_to.map(|state| StateRef {
            machine: s.machine,
            state,
        })
    }

    pub fn reuse(&self, call: CallId) -> bool {
        self.call_flags[call.0 as usize].0
    }

    pub fn auto_return(&self, call: CallId) -> bool {
        self.call_flags[call.0 as usize].1
    }

    /// Initial configurations `⟨s0, ε, ε⟩` for every initial state of the
    /// device's entry machines, in model order.
    pub fn initial_configs(&self, device: usize) -> Vec<Configuration> {
        let mut out = Vec::new();
        for entry in &self.model.devices[device].entries {
            let mi = self.machine_index[entry.as_str()];
            for (si, info) in self.states[mi as usize].iter().enumerate() {
                if info.initial {
                    out.push(Configuration::initial(StateRef {
                        machine: mi,
                        state: si as u32,
                    }));
                }
            }
        }
        out.sort_by_key(|c| c.current);
        out.dedup();
        out
    }

    /// All initial multi-device states: the product of per-device initial
    /// configurations, first device varying slowest.
    pub fn initial_states(&self) -> Vec<MultiDeviceState> {
        let per_device: Vec<Vec<Configuration>> = (0..self.device_count()).map(|d| self.initial_configs(d)).collect();
        let mut out: Vec<Vec<Configuration>> = vec![Vec::new()];
        for options in &per_device {
            let mut next = Vec::new();
            for prefix in &out {
                for cfg in options {
                    let mut p = prefix.clone();
                    p.push(cfg.clone());
                    next.push(p);
                }
            }
            out = next;
        }
        out.into_iter().map(|configs| self.multi_state(configs)).collect()
    }

    /// Wraps per-device configurations with an empty pending set.
    pub fn multi_state(&self, per_device: Vec<Configuration>) -> MultiDeviceState {
        let finished = per_device.iter().map(|c| self.is_finished(c)).collect();
        MultiDeviceState {
            per_device,
            pending: vec![0; self.channel_count()],
            finished,
        }
    }

    /// Successors of one configuration under R1 to R5, in enumeration order.
    pub fn enabled_single(&self, cfg: &Configuration) -> Vec<Successor> {
        let mut out = Vec::new();
        let cur = cfg.current;
        let info = self.info(cur);
        for &mv in &self.outgoing[cur.machine as usize][cur.state as usize] {
            match self.moves[mv.0 as usize].kind {
                MoveKind::Local { target } => out.push(Successor {
                    rule: Rule::R1,
                    mv: Some(mv),
                    config: Configuration {
                        current: target,
                        ..cfg.clone()
                    },
                }),
                MoveKind::Call { call, target, .. } => {
                    if !info.connection {
                        continue;
                    }
                    let ret = self.return_of(cur).expect("connection state has a return");
                    let push = || {
                        let mut next = cfg.clone();
                        next.current = target;
                        next.state_history.push(ret);
                        next.event_history.push(call);
                        next
                    };
                    if !self.reuse(call) {
                        out.push(Successor {
                            rule: Rule::R2,
                            mv: Some(mv),
                            config: push(),
                        });
                    } else if let Some(k) = top(&cfg.state_history, target.machine) {
                        out.push(Successor {
                            rule: Rule::R4,
                            mv: Some(mv),
                            config: Configuration {
                                current: cfg.state_history[k],
                                state_history: cfg.state_history[..k].to_vec(),
                                event_history: cfg.event_history[..k].to_vec(),
                            },
                        });
                    } else {
                        out.push(Successor {
                            rule: Rule::R3,
                            mv: Some(mv),
                            config: push(),
                        });
                    }
                }
            }
        }
        if info.is_final {
            if let (Some(&ret), Some(&call)) = (cfg.state_history.last(), cfg.event_history.last()) {
                if self.auto_return(call) {
                    let mut next = cfg.clone();
                    next.state_history.pop();
                    next.event_history.pop();
                    next.current = ret;
                    out.push(Successor {
                        rule: Rule::R5,
                        mv: None,
                        config: next,
                    });
                }
            }
        }
        out.sort_by_key(|s| s.rule);
        out
    }

    pub fn is_terminal(&self, cfg: &Configuration) -> bool {
        self.enabled_single(cfg).is_empty()
    }

    /// Terminal at a final state: the device has completed its flow.
    pub fn is_finished(&self, cfg: &Configuration) -> bool {
        self.is_final(cfg.current) && self.is_terminal(cfg)
    }

    pub fn send_channel(&self, device: usize, mv: MoveId) -> Option<usize> {
        let name_id = self.moves[mv.0 as usize].name_id;
        self.sends
            .iter()
            .find(|s| s.device == device && s.name_id == name_id)
            .map(|s| s.channel)
    }

    pub fn receive_channel(&self, device: usize, mv: MoveId) -> Option<usize> {
        let name_id = self.moves[mv.0 as usize].name_id;
        self.receives
            .iter()
            .find(|s| s.device == device && s.name_id == name_id)
            .map(|s| s.channel)
    }

    /// Interleaved successors of a multi-device state (R6/R7 for channel
    /// events, the single-device rule otherwise), device by device.
    pub fn enabled_multi(&self, ms: &MultiDeviceState, policy: ReceivePolicy) -> Vec<(StepChoice, MultiDeviceState)> {
        let mut out = Vec::new();
        for (d, cfg) in ms.per_device.iter().enumerate() {
            if ms.finished[d] {
                continue;
            }
            for succ in self.enabled_single(cfg) {
                let mut rule = succ.rule;
                let mut pending = ms.pending.clone();
                if let Some(mv) = succ.mv {
                    if let Some(c) = self.send_channel(d, mv) {
                        rule = Rule::R6;
                        pending[c] += 1;
                    } else if let Some(c) = self.receive_channel(d, mv) {
                        if policy == ReceivePolicy::Strict && pending[c] <= 0 {
                            continue;
                        }
                        rule = Rule::R7;
                        pending[c] -= 1;
                    }
                }
                let mut next = MultiDeviceState {
                    per_device: ms.per_device.clone(),
                    pending,
                    finished: ms.finished.clone(),
                };
                next.finished[d] = self.is_finished(&succ.config);
                next.per_device[d] = succ.config;
                out.push((
                    StepChoice {
                        device: d,
                        rule,
                        mv: succ.mv,
                    },
                    next,
                ));
            }
        }
        out
    }
}
