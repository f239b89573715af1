//! Bounded exhaustive generation of flows and test cases.
//!
//! The search is a depth-first walk over multi-device states with an explicit
//! stack. States are never merged across traces: two prefixes reaching the
//! same configuration are both continued, so the tree is pruned only by the
//! per-device transition bound. Deduplication happens on the emitted event
//! sequences.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::ExploreError;
use crate::model::{EventLabel, TransitionOrigin, ViewStateMachine};
use crate::por::{self, Direction, TraceStep};
use crate::semantics::{Configuration, MoveId, MultiDeviceState, ReceivePolicy, Rule, Semantics, StateRef, StepChoice};

pub const DEFAULT_GLOBAL_CAP: u64 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExplorationBound {
    pub max_transitions_per_device: usize,
    /// Emit only traces in which every device finished.
    pub require_all_finished: bool,
    /// Also emit traces cut by the bound or stuck before finishing.
    pub emit_truncated: bool,
}

impl ExplorationBound {
    pub fn new(max_transitions_per_device: usize) -> Result<Self, ExploreError> {
        if max_transitions_per_device == 0 {
            return Err(ExploreError::BoundTooSmall);
        }
        Ok(Self {
            max_transitions_per_device,
            require_all_finished: false,
            emit_truncated: false,
        })
    }

    pub fn emitting_truncated(mut self) -> Self {
        self.emit_truncated = true;
        self
    }

    pub fn requiring_all_finished(mut self) -> Self {
        self.require_all_finished = true;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExploreOptions {
    pub bound: ExplorationBound,
    pub policy: ReceivePolicy,
    pub reduce: bool,
    /// Hard limit on expanded search nodes.
    pub global_cap: u64,
    pub jobs: usize,
}

impl ExploreOptions {
    pub fn new(bound: ExplorationBound) -> Self {
        Self {
            bound,
            policy: ReceivePolicy::Strict,
            reduce: false,
            global_cap: DEFAULT_GLOBAL_CAP,
            jobs: 1,
        }
    }

    pub fn with_policy(mut self, policy: ReceivePolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn with_reduction(mut self, reduce: bool) -> Self {
        self.reduce = reduce;
        self
    }

    pub fn with_jobs(mut self, jobs: usize) -> Self {
        self.jobs = jobs.max(1);
        self
    }

    pub fn with_global_cap(mut self, cap: u64) -> Self {
        self.global_cap = cap;
        self
    }
}

/// One step of a test case. `event` is absent for returns (R5).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Step {
    pub device: String,
    pub device_index: usize,
    pub rule: Rule,
    pub event: Option<EventLabel>,
    /// Machine the step leaves from.
    pub machine: String,
    pub target_machine: String,
    pub target: String,
    pub channel: Option<String>,
    pub origin: Option<TransitionOrigin>,
}

impl Step {
    pub fn is_return(&self) -> bool {
        self.rule == Rule::R5
    }
}

impl TraceStep for Step {
    type Channel = String;

    fn device(&self) -> usize {
        self.device_index
    }

    fn channel(&self) -> Option<(String, Direction)> {
        let c = self.channel.clone()?;
        match self.rule {
            Rule::R6 => Some((c, Direction::Send)),
            Rule::R7 => Some((c, Direction::Receive)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestCase {
    pub steps: Vec<Step>,
    /// Every device reached a finished configuration.
    pub complete: bool,
}

impl TestCase {
    /// The labelled steps as `(device, event)` pairs; returns are skipped.
    pub fn events(&self) -> Vec<(String, String)> {
        self.steps
            .iter()
            .filter_map(|s| s.event.as_ref().map(|e| (s.device.clone(), e.name.clone())))
            .collect()
    }

    pub fn labelled_len(&self) -> usize {
        self.steps.iter().filter(|s| s.event.is_some()).count()
    }

    fn sort_key(&self) -> (usize, Vec<(usize, &str, Rule)>, bool) {
        (
            self.labelled_len(),
            self.steps
                .iter()
                .map(|s| (s.device_index, s.event.as_ref().map_or("", |e| e.name.as_str()), s.rule))
                .collect(),
            !self.complete,
        )
    }
}

/// Canonical representative of `tc` under reordering of independent steps.
pub fn canonicalize(tc: &TestCase) -> TestCase {
    TestCase {
        steps: por::canonicalize(&tc.steps),
        complete: tc.complete,
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExplorationStats {
    pub expanded: u64,
    /// Search nodes where the bound cut off an enabled step.
    pub truncated: u64,
    /// Search nodes with no enabled step where some device had not finished.
    pub stuck: u64,
    /// Deepest stack of live search nodes.
    pub peak_live: u64,
    /// Largest encoded multi-device state, in bytes.
    pub max_state_size: u64,
    pub max_backstack: u64,
}

impl ExplorationStats {
    fn merge(&mut self, other: &ExplorationStats) {
        self.expanded += other.expanded;
        self.truncated += other.truncated;
        self.stuck += other.stuck;
        self.peak_live = self.peak_live.max(other.peak_live);
        self.max_state_size = self.max_state_size.max(other.max_state_size);
        self.max_backstack = self.max_backstack.max(other.max_backstack);
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExplorationResult {
    pub test_cases: Vec<TestCase>,
    pub stats: ExplorationStats,
}

/// A path through one view machine from an initial state to a final or
/// connection state.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Flow {
    pub states: Vec<String>,
    pub events: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FlowWarning {
    /// No flow from this initial state fits in the bound.
    BoundTooSmall { machine: String, initial: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FlowSet {
    pub flows: Vec<Flow>,
    pub warnings: Vec<FlowWarning>,
}

/// Flows of a single view machine with at most `bound` transitions.
pub fn flows(m: &ViewStateMachine, bound: &ExplorationBound) -> FlowSet {
    let mut transitions: Vec<_> = m.transitions.iter().collect();
    transitions.sort_by(|a, b| (&a.event.name, &a.target).cmp(&(&b.event.name, &b.target)));
    let ends = |s: &str| m.final_states.contains(s) || m.connection.contains(s);

    let mut out = FlowSet::default();
    for init in &m.initial {
        let before = out.flows.len();
        let mut stack = vec![(vec![init.clone()], Vec::<String>::new())];
        while let Some((states, events)) = stack.pop() {
            let last = states.last().expect("non-empty path");
            if !events.is_empty() && ends(last) {
                out.flows.push(Flow {
                    states: states.clone(),
                    events: events.clone(),
                });
            }
            if events.len() == bound.max_transitions_per_device {
                continue;
            }
            for t in transitions.iter().rev().filter(|t| &t.source == last) {
                let mut s = states.clone();
                s.push(t.target.clone());
                let mut e = events.clone();
                e.push(t.event.name.clone());
                stack.push((s, e));
            }
        }
        if out.flows.len() == before {
            out.warnings.push(FlowWarning::BoundTooSmall {
                machine: m.id.clone(),
                initial: init.clone(),
            });
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
struct RawStep {
    device: u32,
    rule: Rule,
    mv: Option<MoveId>,
    target: StateRef,
    channel: Option<u32>,
}

impl TraceStep for RawStep {
    type Channel = u32;

    fn device(&self) -> usize {
        self.device as usize
    }

    fn channel(&self) -> Option<(u32, Direction)> {
        let c = self.channel?;
        match self.rule {
            Rule::R6 => Some((c, Direction::Send)),
            Rule::R7 => Some((c, Direction::Receive)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mode {
    /// One device, channel semantics off; steps attributed to this device.
    Device(usize),
    Multi(ReceivePolicy),
}

#[derive(Debug, Clone)]
struct Found {
    steps: Vec<RawStep>,
    complete: bool,
}

type Key = Vec<(u32, u32)>;

struct Task {
    state: MultiDeviceState,
    counts: Vec<usize>,
    path: Vec<RawStep>,
}

struct Search<'a, 'm> {
    sem: &'a Semantics<'m>,
    opts: &'a ExploreOptions,
    mode: Mode,
    expanded: &'a AtomicU64,
    found: BTreeMap<Key, Found>,
    stats: ExplorationStats,
}

impl<'a, 'm> Search<'a, 'm> {
    fn new(sem: &'a Semantics<'m>, opts: &'a ExploreOptions, mode: Mode, expanded: &'a AtomicU64) -> Self {
        Self {
            sem,
            opts,
            mode,
            expanded,
            found: BTreeMap::new(),
            stats: ExplorationStats::default(),
        }
    }

    fn successors(&self, ms: &MultiDeviceState) -> Vec<(StepChoice, MultiDeviceState)> {
        match self.mode {
            Mode::Multi(policy) => self.sem.enabled_multi(ms, policy),
            Mode::Device(d) => {
                let cfg = &ms.per_device[0];
                self.sem
                    .enabled_single(cfg)
                    .into_iter()
                    .map(|s| {
                        let finished = self.sem.is_finished(&s.config);
                        let next = MultiDeviceState {
                            per_device: vec![s.config],
                            pending: Vec::new(),
                            finished: vec![finished],
                        };
                        (
                            StepChoice {
                                device: d,
                                rule: s.rule,
                                mv: s.mv,
                            },
                            next,
                        )
                    })
                    .collect()
            }
        }
    }

    fn device_slot(&self, choice: &StepChoice) -> usize {
        match self.mode {
            Mode::Device(_) => 0,
            Mode::Multi(_) => choice.device,
        }
    }

    /// Visits one node: counts it, records emissions, and returns the
    /// in-bound successors.
    fn expand(
        &mut self,
        state: &MultiDeviceState,
        counts: &[usize],
        path: &[RawStep],
    ) -> Result<Vec<(RawStep, MultiDeviceState)>, ExploreError> {
        let n = self.expanded.fetch_add(1, Ordering::Relaxed) + 1;
        if n > self.opts.global_cap {
            return Err(ExploreError::CapExceeded {
                cap: self.opts.global_cap,
            });
        }
        self.stats.expanded += 1;
        self.stats.peak_live = self.stats.peak_live.max(path.len() as u64 + 1);
        self.stats.max_state_size = self.stats.max_state_size.max(state.encode().len() as u64);
        let depth = state
            .per_device
            .iter()
            .map(|c| c.state_history.len())
            .max()
            .unwrap_or(0);
        self.stats.max_backstack = self.stats.max_backstack.max(depth as u64);

        let bound = self.opts.bound.max_transitions_per_device;
        let mut cut = false;
        let succs: Vec<_> = self
            .successors(state)
            .into_iter()
            .filter(|(choice, _)| {
                let over = choice.mv.is_some() && counts[self.device_slot(choice)] >= bound;
                cut |= over;
                !over
            })
            .map(|(choice, next)| {
                let slot = self.device_slot(&choice);
                let channel = choice.mv.and_then(|mv| match (self.mode, choice.rule) {
                    (Mode::Multi(_), Rule::R6) => self.sem.send_channel(choice.device, mv),
                    (Mode::Multi(_), Rule::R7) => self.sem.receive_channel(choice.device, mv),
                    _ => None,
                });
                let step = RawStep {
                    device: choice.device as u32,
                    rule: choice.rule,
                    mv: choice.mv,
                    target: next.per_device[slot].current,
                    channel: channel.map(|c| c as u32),
                };
                (step, next)
            })
            .collect();

        let complete = state.all_finished() && state.debt_free();
        if cut {
            self.stats.truncated += 1;
        } else if succs.is_empty() && !complete {
            self.stats.stuck += 1;
        }

        let b = &self.opts.bound;
        let emit = complete || (b.emit_truncated && !b.require_all_finished && state.debt_free());
        if emit && path.iter().any(|s| s.mv.is_some()) {
            self.record(path, complete);
        }
        Ok(succs)
    }

    fn record(&mut self, path: &[RawStep], complete: bool) {
        let steps = if self.opts.reduce {
            por::canonicalize(path)
        } else {
            path.to_vec()
        };
        let key: Key = steps
            .iter()
            .filter_map(|s| s.mv.map(|mv| (s.device, self.sem.get_move(mv).name_id)))
            .collect();
        merge_found(&mut self.found, key, Found { steps, complete });
    }

    fn run(&mut self, task: Task) -> Result<(), ExploreError> {
        struct Frame {
            succs: std::vec::IntoIter<(RawStep, MultiDeviceState)>,
        }
        let Task {
            state,
            mut counts,
            mut path,
        } = task;
        let first = self.expand(&state, &counts, &path)?;
        let mut stack = vec![Frame {
            succs: first.into_iter(),
        }];
        let base = path.len();
        while let Some(frame) = stack.last_mut() {
            match frame.succs.next() {
                Some((step, next)) => {
                    let slot = self.slot_of(&step);
                    if step.mv.is_some() {
                        counts[slot] += 1;
                    }
                    path.push(step);
                    let succs = self.expand(&next, &counts, &path)?;
                    stack.push(Frame {
                        succs: succs.into_iter(),
                    });
                }
                None => {
                    stack.pop();
                    if path.len() > base {
                        let step = path.pop().expect("path tracks the stack");
                        if step.mv.is_some() {
                            counts[self.slot_of(&step)] -= 1;
                        }
                    }
                }
            }
        }
        Ok(())
    }

    fn slot_of(&self, step: &RawStep) -> usize {
        match self.mode {
            Mode::Device(_) => 0,
            Mode::Multi(_) => step.device as usize,
        }
    }
}

fn merge_found(found: &mut BTreeMap<Key, Found>, key: Key, new: Found) {
    match found.get_mut(&key) {
        None => {
            found.insert(key, new);
        }
        Some(old) => {
            let better = (new.complete && !old.complete) || (new.complete == old.complete && new.steps < old.steps);
            if better {
                *old = new;
            }
        }
    }
}

/// Runs the search from the given roots. The roots are expanded first and
/// their subtrees become independent tasks, run in order or on a pool; the
/// result does not depend on how tasks are scheduled.
fn search(
    sem: &Semantics<'_>,
    opts: &ExploreOptions,
    mode: Mode,
    roots: Vec<MultiDeviceState>,
) -> Result<ExplorationResult, ExploreError> {
    let expanded = AtomicU64::new(0);
    let slots = roots.first().map_or(0, |r| r.per_device.len());
    let mut top = Search::new(sem, opts, mode, &expanded);
    let mut tasks = Vec::new();
    for root in &roots {
        let counts = vec![0; slots];
        for (step, state) in top.expand(root, &counts, &[])? {
            let mut counts = counts.clone();
            if step.mv.is_some() {
                counts[top.slot_of(&step)] += 1;
            }
            tasks.push(Task {
                state,
                counts,
                path: vec![step],
            });
        }
    }

    let run_task = |task: Task| -> Result<(BTreeMap<Key, Found>, ExplorationStats), ExploreError> {
        let mut s = Search::new(sem, opts, mode, &expanded);
        s.run(task)?;
        Ok((s.found, s.stats))
    };
    let parts: Vec<_> = if opts.jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(opts.jobs)
            .build()
            .expect("thread pool");
        pool.install(|| tasks.into_par_iter().map(run_task).collect::<Result<Vec<_>, _>>())?
    } else {
        tasks.into_iter().map(run_task).collect::<Result<Vec<_>, _>>()?
    };

    let mut found = top.found;
    let mut stats = top.stats;
    for (f, s) in parts {
        stats.merge(&s);
        for (k, v) in f {
            merge_found(&mut found, k, v);
        }
    }

    let mut test_cases: Vec<TestCase> = found.into_values().map(|f| materialize(sem, mode, &f)).collect();
    test_cases.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    Ok(ExplorationResult { test_cases, stats })
}

fn materialize(sem: &Semantics<'_>, mode: Mode, found: &Found) -> TestCase {
    let model = sem.model();
    let machine_of = |device: usize, step: &RawStep, prev: &mut BTreeMap<usize, u32>| -> String {
        let m = match step.mv {
            Some(mv) => sem.get_move(mv).source.machine,
            None => *prev.get(&device).expect("a return follows an earlier step"),
        };
        prev.insert(device, step.target.machine);
        sem.machine_id(m).to_string()
    };
    let mut current = BTreeMap::new();
    let steps = found
        .steps
        .iter()
        .map(|s| {
            let device = s.device as usize;
            let machine = machine_of(device, s, &mut current);
            Step {
                device: model.devices[device].id.clone(),
                device_index: device,
                rule: s.rule,
                event: s.mv.map(|mv| sem.label(mv).clone()),
                machine,
                target_machine: sem.machine_id(s.target.machine).to_string(),
                target: sem.state_name(s.target).to_string(),
                channel: match mode {
                    Mode::Multi(_) => s.channel.map(|c| model.channels[c as usize].name.clone()),
                    Mode::Device(_) => None,
                },
                origin: s.mv.and_then(|mv| sem.get_move(mv).origin.cloned()),
            }
        })
        .collect();
    TestCase {
        steps,
        complete: found.complete,
    }
}

/// Test cases of one device started from `entries`, channel events treated
/// as ordinary events.
pub fn explore_device(
    sem: &Semantics<'_>,
    device: usize,
    entries: &[Configuration],
    opts: &ExploreOptions,
) -> Result<ExplorationResult, ExploreError> {
    if device >= sem.device_count() {
        return Err(ExploreError::NoSuchDevice(device));
    }
    let roots = entries
        .iter()
        .map(|c| MultiDeviceState {
            finished: vec![sem.is_finished(c)],
            per_device: vec![c.clone()],
            pending: Vec::new(),
        })
        .collect();
    search(sem, opts, Mode::Device(device), roots)
}

/// Test cases of all devices interleaved, starting from every combination of
/// device entry states.
pub fn explore_multi(sem: &Semantics<'_>, opts: &ExploreOptions) -> Result<ExplorationResult, ExploreError> {
    search(sem, opts, Mode::Multi(opts.policy), sem.initial_states())
}

/// Distinct `(device, event)` sequences in a result.
pub fn event_sequences(cases: &[TestCase]) -> BTreeSet<Vec<(String, String)>> {
    cases.iter().map(TestCase::events).collect()
}
