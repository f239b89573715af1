//! Domain types for view state machines and whole-system models.
//!
//! A [`SystemModel`] is plain data: machines are described by state names, so
//! that malformed models can still be represented and reported on by
//! [`validate_system`]. The executable form lives in [`crate::semantics`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

/// Whether an event is fired by the user, awaited from the system, or switches views.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    #[default]
    User,
    System,
    Call,
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EventKind::User => "user",
            EventKind::System => "system",
            EventKind::Call => "call",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EventLabel {
    pub name: String,
    #[serde(default)]
    pub kind: EventKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub params: Vec<(String, String)>,
}

impl EventLabel {
    pub fn new(name: impl Into<String>, kind: EventKind) -> Self {
        Self {
            name: name.into(),
            kind,
            params: Vec::new(),
        }
    }

    pub fn user(name: impl Into<String>) -> Self {
        Self::new(name, EventKind::User)
    }

    pub fn system(name: impl Into<String>) -> Self {
        Self::new(name, EventKind::System)
    }

    pub fn call(name: impl Into<String>) -> Self {
        Self::new(name, EventKind::Call)
    }
}

/// Where a transition came from in the model document, when it came from one.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TransitionOrigin {
    pub application: String,
    pub view: String,
    pub id: String,
    /// The `event` attribute as written, without any call-event decoration.
    pub event: String,
    pub prev: String,
    pub next: String,
}

/// Application/view grouping of a machine, used by the emitters for naming.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MachineOrigin {
    pub application: String,
    pub view: String,
    pub machine: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    pub source: String,
    pub event: EventLabel,
    pub target: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<TransitionOrigin>,
}

impl Transition {
    pub fn new(source: impl Into<String>, event: EventLabel, target: impl Into<String>) -> Self {
        Self {
            source: source.into(),
            event,
            target: target.into(),
            origin: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ViewStateMachine {
    pub id: String,
    pub states: Vec<String>,
    pub initial: BTreeSet<String>,
    pub connection: BTreeSet<String>,
    pub final_states: BTreeSet<String>,
    pub transitions: Vec<Transition>,
    /// Return state for every connection state.
    pub return_of: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<MachineOrigin>,
}

impl ViewStateMachine {
    pub fn new(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            ..Self::default()
        }
    }

    pub fn with_states<I, S>(mut self, states: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.states.extend(states.into_iter().map(Into::into));
        self
    }

    pub fn with_initial(mut self, state: impl Into<String>) -> Self {
        self.initial.insert(state.into());
        self
    }

    pub fn with_final(mut self, state: impl Into<String>) -> Self {
        self.final_states.insert(state.into());
        self
    }

    pub fn with_connection(mut self, state: impl Into<String>, returns_to: impl Into<String>) -> Self {
        let state = state.into();
        self.return_of.insert(state.clone(), returns_to.into());
        self.connection.insert(state);
        self
    }

    pub fn with_transition(mut self, source: &str, event: EventLabel, target: &str) -> Self {
        self.transitions.push(Transition::new(source, event, target));
        self
    }

    pub fn has_state(&self, state: &str) -> bool {
        self.states.iter().any(|s| s == state)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConnectionEdge {
    pub source_machine: String,
    pub source: String,
    pub event: EventLabel,
    pub target_machine: String,
    pub target: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<TransitionOrigin>,
}

impl ConnectionEdge {
    pub fn new(
        source_machine: impl Into<String>,
        source: impl Into<String>,
        event: impl Into<String>,
        target_machine: impl Into<String>,
        target: impl Into<String>,
    ) -> Self {
        Self {
            source_machine: source_machine.into(),
            source: source.into(),
            event: EventLabel::call(event),
            target_machine: target_machine.into(),
            target: target.into(),
            origin: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConnectionRelation {
    pub edges: Vec<ConnectionEdge>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallEventAttributes {
    pub event: String,
    pub reuse: bool,
    pub auto_return: bool,
}

impl CallEventAttributes {
    pub fn new(event: impl Into<String>, reuse: bool, auto_return: bool) -> Self {
        Self {
            event: event.into(),
            reuse,
            auto_return,
        }
    }
}

impl Default for CallEventAttributes {
    fn default() -> Self {
        Self {
            event: String::new(),
            reuse: false,
            auto_return: true,
        }
    }
}

/// A sender-side user event paired with a receiver-side system event.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelBinding {
    pub name: String,
    pub send_event: String,
    pub sender: String,
    pub receive_event: String,
    pub receiver: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeviceAssignment {
    pub id: String,
    /// Machines whose initial states a device may start from.
    pub entries: Vec<String>,
}

impl DeviceAssignment {
    pub fn new<I, S>(id: impl Into<String>, entries: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            id: id.into(),
            entries: entries.into_iter().map(Into::into).collect(),
        }
    }
}

/// The closed action vocabulary of generated scripts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Action {
    Click,
    Swipe,
    SetText,
    WaitEvent,
    Back,
}

impl Action {
    pub fn as_str(self) -> &'static str {
        match self {
            Action::Click => "click",
            Action::Swipe => "swipe",
            Action::SetText => "setText",
            Action::WaitEvent => "waitEvent",
            Action::Back => "back",
        }
    }

    pub fn parse(s: &str) -> Option<Action> {
        Some(match s {
            "click" => Action::Click,
            "swipe" => Action::Swipe,
            "setText" => Action::SetText,
            "waitEvent" => Action::WaitEvent,
            "back" => Action::Back,
            _ => return None,
        })
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Selector {
    pub classname: String,
    pub index: u32,
    pub text: String,
    #[serde(default)]
    pub resource_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControlBinding {
    pub machine: String,
    pub event: String,
    pub control_group: String,
    pub action: Action,
    pub selector: Selector,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parameter: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SystemModel {
    pub machines: Vec<ViewStateMachine>,
    pub connection: ConnectionRelation,
    pub call_attrs: Vec<CallEventAttributes>,
    pub devices: Vec<DeviceAssignment>,
    pub channels: Vec<ChannelBinding>,
    pub control_bindings: Vec<ControlBinding>,
}

impl SystemModel {
    pub fn machine(&self, id: &str) -> Option<&ViewStateMachine> {
        self.machines.iter().find(|m| m.id == id)
    }

    pub fn call_attributes(&self, event: &str) -> Option<&CallEventAttributes> {
        self.call_attrs.iter().find(|a| a.event == event)
    }

    pub fn binding(&self, machine: &str, event: &str) -> Option<&ControlBinding> {
        self.control_bindings
            .iter()
            .find(|b| b.machine == machine && b.event == event)
    }

    /// Applies the default attributes (no reuse, auto return) to every call
    /// event that has no record yet.
    pub fn fill_default_call_attrs(&mut self) {
        let mut seen: BTreeSet<String> = self.call_attrs.iter().map(|a| a.event.clone()).collect();
        for edge in &self.connection.edges {
            if seen.insert(edge.event.name.clone()) {
                self.call_attrs.push(CallEventAttributes {
                    event: edge.event.name.clone(),
                    ..CallEventAttributes::default()
                });
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ViolationKind {
    EmptyEventName,
    EventKindConflict,
    CallEventInMachine,
    DuplicateState,
    UnknownState,
    Disjointness,
    EmptyInitial,
    TransitionFromFinal,
    Determinism,
    MissingReturn,
    ReturnOnNonConnection,
    NoFlowEnd,
    DuplicateMachine,
    UnknownMachine,
    ConnectionSource,
    ConnectionTarget,
    ConnectionEventKind,
    MissingCallAttributes,
    DuplicateCallAttributes,
    OrphanCallAttributes,
    DuplicateDevice,
    NoDevices,
    DeviceWithoutEntry,
    ChannelDevice,
    ChannelEventKind,
    ChannelEventReused,
}

/// A structural defect found by validation.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Violation {
    EmptyEventName {
        machine: String,
    },
    EventKindConflict {
        machine: String,
        event: String,
    },
    CallEventInMachine {
        machine: String,
        event: String,
    },
    DuplicateState {
        machine: String,
        state: String,
    },
    UnknownState {
        machine: String,
        state: String,
        context: String,
    },
    Disjointness {
        machine: String,
        state: String,
        sets: Vec<&'static str>,
    },
    EmptyInitial {
        machine: String,
    },
    TransitionFromFinal {
        machine: String,
        state: String,
        event: String,
    },
    Determinism {
        machine: String,
        state: String,
        event: String,
        targets: Vec<String>,
    },
    MissingReturn {
        machine: String,
        state: String,
    },
    ReturnOnNonConnection {
        machine: String,
        state: String,
    },
    /// Warning only: the machine has neither final nor connection states.
    NoFlowEnd {
        machine: String,
    },
    DuplicateMachine {
        machine: String,
    },
    UnknownMachine {
        machine: String,
        context: String,
    },
    ConnectionSource {
        machine: String,
        state: String,
        event: String,
    },
    ConnectionTarget {
        machine: String,
        state: String,
        event: String,
    },
    ConnectionEventKind {
        event: String,
    },
    MissingCallAttributes {
        event: String,
    },
    DuplicateCallAttributes {
        event: String,
    },
    OrphanCallAttributes {
        event: String,
    },
    DuplicateDevice {
        device: String,
    },
    NoDevices,
    DeviceWithoutEntry {
        device: String,
    },
    ChannelDevice {
        channel: String,
        device: String,
    },
    ChannelEventKind {
        channel: String,
        event: String,
    },
    ChannelEventReused {
        channel: String,
        event: String,
    },
}

impl Violation {
    pub fn kind(&self) -> ViolationKind {
        use Violation as V;
        use ViolationKind as K;
        match self {
            V::EmptyEventName { .. } => K::EmptyEventName,
            V::EventKindConflict { .. } => K::EventKindConflict,
            V::CallEventInMachine { .. } => K::CallEventInMachine,
            V::DuplicateState { .. } => K::DuplicateState,
            V::UnknownState { .. } => K::UnknownState,
            V::Disjointness { .. } => K::Disjointness,
            V::EmptyInitial { .. } => K::EmptyInitial,
            V::TransitionFromFinal { .. } => K::TransitionFromFinal,
            V::Determinism { .. } => K::Determinism,
            V::MissingReturn { .. } => K::MissingReturn,
            V::ReturnOnNonConnection { .. } => K::ReturnOnNonConnection,
            V::NoFlowEnd { .. } => K::NoFlowEnd,
            V::DuplicateMachine { .. } => K::DuplicateMachine,
            V::UnknownMachine { .. } => K::UnknownMachine,
            V::ConnectionSource { .. } => K::ConnectionSource,
            V::ConnectionTarget { .. } => K::ConnectionTarget,
            V::ConnectionEventKind { .. } => K::ConnectionEventKind,
            V::MissingCallAttributes { .. } => K::MissingCallAttributes,
            V::DuplicateCallAttributes { .. } => K::DuplicateCallAttributes,
            V::OrphanCallAttributes { .. } => K::OrphanCallAttributes,
            V::DuplicateDevice { .. } => K::DuplicateDevice,
            V::NoDevices => K::NoDevices,
            V::DeviceWithoutEntry { .. } => K::DeviceWithoutEntry,
            V::ChannelDevice { .. } => K::ChannelDevice,
            V::ChannelEventKind { .. } => K::ChannelEventKind,
            V::ChannelEventReused { .. } => K::ChannelEventReused,
        }
    }

    pub fn is_warning(&self) -> bool {
        matches!(self, Violation::NoFlowEnd { .. })
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Violation as V;
        match self {
            V::EmptyEventName { machine } => write!(f, "{machine}: EmptyEventName"),
            V::EventKindConflict { machine, event } => {
                write!(f, "{machine}: EventKindConflict event={event}")
            }
            V::CallEventInMachine { machine, event } => {
                write!(f, "{machine}: CallEventInMachine event={event}")
            }
            V::DuplicateState { machine, state } => {
                write!(f, "{machine}: DuplicateState state={state}")
            }
            V::UnknownState {
                machine,
                state,
                context,
            } => {
                write!(f, "{machine}: UnknownState state={state} ({context})")
            }
            V::Disjointness { machine, state, sets } => {
                write!(
                    f,
                    "{machine}: DisjointnessViolation state={state} sets={}",
                    sets.join("+")
                )
            }
            V::EmptyInitial { machine } => write!(f, "{machine}: EmptyInitial"),
            V::TransitionFromFinal { machine, state, event } => {
                write!(f, "{machine}: TransitionFromFinal state={state} event={event}")
            }
            V::Determinism {
                machine,
                state,
                event,
                targets,
            } => write!(
                f,
                "{machine}: DeterminismViolation state={state} event={event} targets={}",
                targets.join(",")
            ),
            V::MissingReturn { machine, state } => {
                write!(f, "{machine}: MissingReturn state={state}")
            }
            V::ReturnOnNonConnection { machine, state } => {
                write!(f, "{machine}: ReturnOnNonConnection state={state}")
            }
            V::NoFlowEnd { machine } => {
                write!(f, "{machine}: warning: NoFlowEnd (no final or connection states)")
            }
            V::DuplicateMachine { machine } => write!(f, "{machine}: DuplicateMachine"),
            V::UnknownMachine { machine, context } => {
                write!(f, "{machine}: UnknownMachine ({context})")
            }
            V::ConnectionSource { machine, state, event } => {
                write!(f, "{machine}: ConnectionSourceViolation state={state} event={event}")
            }
            V::ConnectionTarget { machine, state, event } => {
                write!(f, "{machine}: ConnectionTargetViolation state={state} event={event}")
            }
            V::ConnectionEventKind { event } => {
                write!(f, "connection: ConnectionEventKind event={event}")
            }
            V::MissingCallAttributes { event } => {
                write!(f, "connection: MissingCallAttributes event={event}")
            }
            V::DuplicateCallAttributes { event } => {
                write!(f, "connection: DuplicateCallAttributes event={event}")
            }
            V::OrphanCallAttributes { event } => {
                write!(f, "connection: OrphanCallAttributes event={event}")
            }
            V::DuplicateDevice { device } => write!(f, "{device}: DuplicateDevice"),
            V::NoDevices => write!(f, "devices: NoDevices"),
            V::DeviceWithoutEntry { device } => write!(f, "{device}: DeviceWithoutEntry"),
            V::ChannelDevice { channel, device } => {
                write!(f, "channel {channel}: ChannelDevice device={device}")
            }
            V::ChannelEventKind { channel, event } => {
                write!(f, "channel {channel}: ChannelEventKind event={event}")
            }
            V::ChannelEventReused { channel, event } => {
                write!(f, "channel {channel}: ChannelEventReused event={event}")
            }
        }
    }
}

/// Checks the per-machine structural rules. Violations are returned in a
/// deterministic order.
pub fn validate_view_machine(m: &ViewStateMachine) -> Vec<Violation> {
    let mut out = Vec::new();
    let machine = || m.id.clone();

    let mut declared = BTreeSet::new();
    for s in &m.states {
        if !declared.insert(s.as_str()) {
            out.push(Violation::DuplicateState {
                machine: machine(),
                state: s.clone(),
            });
        }
    }

    let unknown = |state: &str, context: &str| Violation::UnknownState {
        machine: m.id.clone(),
        state: state.to_string(),
        context: context.to_string(),
    };
    for (set, name) in [
        (&m.initial, "initial"),
        (&m.connection, "connection"),
        (&m.final_states, "final"),
    ] {
        for s in set {
            if !declared.contains(s.as_str()) {
                out.push(unknown(s, name));
            }
        }
    }

    for s in &m.states {
        let sets: Vec<&'static str> = [
            (&m.initial, "initial"),
            (&m.connection, "connection"),
            (&m.final_states, "final"),
        ]
        .into_iter()
        .filter(|(set, _)| set.contains(s))
        .map(|(_, name)| name)
        .collect();
        if sets.len() > 1 && declared.contains(s.as_str()) {
            out.push(Violation::Disjointness {
                machine: machine(),
                state: s.clone(),
                sets,
            });
        }
    }

    if m.initial.is_empty() {
        out.push(Violation::EmptyInitial { machine: machine() });
    }

    let mut kinds: BTreeMap<&str, EventKind> = BTreeMap::new();
    let mut targets: BTreeMap<(&str, &str), BTreeSet<&str>> = BTreeMap::new();
    for t in &m.transitions {
        if t.event.name.is_empty() {
            out.push(Violation::EmptyEventName { machine: machine() });
        }
        if t.event.kind == EventKind::Call {
            out.push(Violation::CallEventInMachine {
                machine: machine(),
                event: t.event.name.clone(),
            });
        }
        match kinds.get(t.event.name.as_str()) {
            Some(k) if *k != t.event.kind => out.push(Violation::EventKindConflict {
                machine: machine(),
                event: t.event.name.clone(),
            }),
            Some(_) => {}
            None => {
                kinds.insert(&t.event.name, t.event.kind);
            }
        }
        if !declared.contains(t.source.as_str()) {
            out.push(unknown(&t.source, "transition source"));
        }
        if !declared.contains(t.target.as_str()) {
            out.push(unknown(&t.target, "transition target"));
        }
        if m.final_states.contains(&t.source) {
            out.push(Violation::TransitionFromFinal {
                machine: machine(),
                state: t.source.clone(),
                event: t.event.name.clone(),
            });
        }
        targets
            .entry((t.source.as_str(), t.event.name.as_str()))
            .or_default()
            .insert(t.target.as_str());
    }
    // reported per (state, event), not per offending pair
    for ((state, event), ts) in &targets {
        if ts.len() > 1 {
            out.push(Violation::Determinism {
                machine: machine(),
                state: state.to_string(),
                event: event.to_string(),
                targets: ts.iter().map(|s| s.to_string()).collect(),
            });
        }
    }

    for c in &m.connection {
        match m.return_of.get(c) {
            None => out.push(Violation::MissingReturn {
                machine: machine(),
                state: c.clone(),
            }),
            Some(r) if !declared.contains(r.as_str()) => out.push(unknown(r, "return state")),
            Some(_) => {}
        }
    }
    for s in m.return_of.keys() {
        if !m.connection.contains(s) {
            out.push(Violation::ReturnOnNonConnection {
                machine: machine(),
                state: s.clone(),
            });
        }
    }

    if m.final_states.is_empty() && m.connection.is_empty() {
        out.push(Violation::NoFlowEnd { machine: machine() });
    }
    out
}

/// Checks every machine plus the cross-machine rules: connection edges,
/// call-event attributes, devices and channels.
pub fn validate_system(model: &SystemModel) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut ids = BTreeSet::new();
    for m in &model.machines {
        if !ids.insert(m.id.as_str()) {
            out.push(Violation::DuplicateMachine { machine: m.id.clone() });
        }
        out.extend(validate_view_machine(m));
    }

    let mut call_events = BTreeSet::new();
    for edge in &model.connection.edges {
        let context = format!("connection edge {}", edge.event.name);
        if edge.event.kind != EventKind::Call {
            out.push(Violation::ConnectionEventKind {
                event: edge.event.name.clone(),
            });
        }
        call_events.insert(edge.event.name.as_str());
        match model.machine(&edge.source_machine) {
            None => out.push(Violation::UnknownMachine {
                machine: edge.source_machine.clone(),
                context: context.clone(),
            }),
            Some(m) if !m.connection.contains(&edge.source) => out.push(Violation::ConnectionSource {
                machine: m.id.clone(),
                state: edge.source.clone(),
                event: edge.event.name.clone(),
            }),
            Some(_) => {}
        }
        match model.machine(&edge.target_machine) {
            None => out.push(Violation::UnknownMachine {
                machine: edge.target_machine.clone(),
                context,
            }),
            Some(m) if !m.initial.contains(&edge.target) || !m.has_state(&edge.target) => {
                out.push(Violation::ConnectionTarget {
                    machine: m.id.clone(),
                    state: edge.target.clone(),
                    event: edge.event.name.clone(),
                })
            }
            Some(_) => {}
        }
    }

    let mut attr_events = BTreeSet::new();
    for a in &model.call_attrs {
        if !attr_events.insert(a.event.as_str()) {
            out.push(Violation::DuplicateCallAttributes { event: a.event.clone() });
        }
        if !call_events.contains(a.event.as_str()) {
            out.push(Violation::OrphanCallAttributes { event: a.event.clone() });
        }
    }
    for e in &call_events {
        if !attr_events.contains(e) {
            out.push(Violation::MissingCallAttributes { event: e.to_string() });
        }
    }

    if model.devices.is_empty() {
        out.push(Violation::NoDevices);
    }
    let mut devices = BTreeSet::new();
    for d in &model.devices {
        if !devices.insert(d.id.as_str()) {
            out.push(Violation::DuplicateDevice { device: d.id.clone() });
        }
        if d.entries.is_empty() {
            out.push(Violation::DeviceWithoutEntry { device: d.id.clone() });
        }
        for e in &d.entries {
            if model.machine(e).is_none() {
                out.push(Violation::UnknownMachine {
                    machine: e.clone(),
                    context: format!("entry of device {}", d.id),
                });
            }
        }
    }

    let kind_of = |name: &str| -> BTreeSet<EventKind> {
        model
            .machines
            .iter()
            .flat_map(|m| &m.transitions)
            .filter(|t| t.event.name == name)
            .map(|t| t.event.kind)
            .collect()
    };
    let mut channel_events = BTreeSet::new();
    for ch in &model.channels {
        for device in [&ch.sender, &ch.receiver] {
            if !devices.contains(device.as_str()) {
                out.push(Violation::ChannelDevice {
                    channel: ch.name.clone(),
                    device: device.clone(),
                });
            }
        }
        if ch.sender == ch.receiver {
            out.push(Violation::ChannelDevice {
                channel: ch.name.clone(),
                device: ch.sender.clone(),
            });
        }
        for (event, kind) in [
            (&ch.send_event, EventKind::User),
            (&ch.receive_event, EventKind::System),
        ] {
            let kinds = kind_of(event);
            if kinds.is_empty() || kinds.iter().any(|k| *k != kind) {
                out.push(Violation::ChannelEventKind {
                    channel: ch.name.clone(),
                    event: event.clone(),
                });
            }
            if !channel_events.insert(event.as_str()) {
                out.push(Violation::ChannelEventReused {
                    channel: ch.name.clone(),
                    event: event.clone(),
                });
            }
        }
    }
    out
}

/// Validation errors only, warnings dropped.
pub fn errors(violations: &[Violation]) -> impl Iterator<Item = &Violation> {
    violations.iter().filter(|v| !v.is_warning())
}
