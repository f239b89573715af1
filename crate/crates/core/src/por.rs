//! Trace equivalence under reordering of independent steps.
//!
//! Two steps are independent when they run on different devices and are not
//! the matched send and receive of one channel message. The `k`-th send of a
//! channel is matched with its `k`-th receive, whichever comes first.
//! [`canonicalize`] picks the lexicographically least member of a trace's
//! equivalence class, ordering steps by device and then by their position
//! within that device.

use std::collections::HashMap;
use std::hash::Hash;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Send,
    Receive,
}

pub trait TraceStep {
    type Channel: Eq + Hash + Clone;

    fn device(&self) -> usize;
    fn channel(&self) -> Option<(Self::Channel, Direction)>;
}

/// Dependence information for one concrete trace.
#[derive(Debug, Clone)]
pub struct IndependenceRelation {
    devices: Vec<usize>,
    partner: Vec<Option<usize>>,
}

impl IndependenceRelation {
    pub fn for_trace<S: TraceStep>(steps: &[S]) -> Self {
        let mut partner = vec![None; steps.len()];
        let mut sends: HashMap<S::Channel, Vec<usize>> = HashMap::new();
        let mut receives: HashMap<S::Channel, Vec<usize>> = HashMap::new();
        for (i, s) in steps.iter().enumerate() {
            match s.channel() {
                Some((c, Direction::Send)) => sends.entry(c).or_default().push(i),
                Some((c, Direction::Receive)) => receives.entry(c).or_default().push(i),
                None => {}
            }
        }
        for (c, ss) in &sends {
            if let Some(rs) = receives.get(c) {
                for (&s, &r) in ss.iter().zip(rs) {
                    partner[s] = Some(r);
                    partner[r] = Some(s);
                }
            }
        }
        Self {
            devices: steps.iter().map(TraceStep::device).collect(),
            partner,
        }
    }

    /// Symmetric and irreflexive.
    pub fn independent(&self, i: usize, j: usize) -> bool {
        i != j && self.devices[i] != self.devices[j] && self.partner[i] != Some(j)
    }

    /// Ordering key of step `i`: its device, then its rank on that device.
    pub fn keys(&self) -> Vec<(usize, usize)> {
        let mut seen: HashMap<usize, usize> = HashMap::new();
        self.devices
            .iter()
            .map(|&d| {
                let n = seen.entry(d).or_insert(0);
                *n += 1;
                (d, *n - 1)
            })
            .collect()
    }
}

/// Returns the original indices of the lexicographically least trace
/// equivalent to `steps`.
pub fn canonical_order<S: TraceStep>(steps: &[S]) -> Vec<usize> {
    let rel = IndependenceRelation::for_trace(steps);
    let keys = rel.keys();
    let n = steps.len();
    let mut blockers = vec![0usize; n];
    let mut successors: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (j, blocked_by) in blockers.iter_mut().enumerate() {
        for (i, after) in successors.iter_mut().enumerate().take(j) {
            if !rel.independent(i, j) {
                *blocked_by += 1;
                after.push(j);
            }
        }
    }
    let mut placed = vec![false; n];
    let mut order = Vec::with_capacity(n);
    for _ in 0..n {
        let next = (0..n)
            .filter(|&i| !placed[i] && blockers[i] == 0)
            .min_by_key(|&i| keys[i])
            .expect("dependence order is acyclic");
        placed[next] = true;
        order.push(next);
        for &j in &successors[next] {
            blockers[j] -= 1;
        }
    }
    order
}

pub fn canonicalize<S: TraceStep + Clone>(steps: &[S]) -> Vec<S> {
    canonical_order(steps).into_iter().map(|i| steps[i].clone()).collect()
}
