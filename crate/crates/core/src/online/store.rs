//! Per-pair sufficient statistics kept between windows.

use std::collections::{BTreeMap, VecDeque};

use crate::model::Event;

/// Poisson models keep cumulative counts per pair; Hawkes models keep the
/// timestamps that are still within the trim radius of the current time.
///
/// Ordered maps keep iteration, and therefore floating-point summation order,
/// identical from run to run.
#[derive(Debug, Clone, PartialEq)]
pub enum HistoryStore {
    Counts(BTreeMap<(u32, u32), u64>),
    Queues {
        radius: f64,
        queues: BTreeMap<(u32, u32), VecDeque<f64>>,
    },
}

impl HistoryStore {
    pub fn counts() -> Self {
        HistoryStore::Counts(BTreeMap::new())
    }

    pub fn queues(radius: f64) -> Self {
        HistoryStore::Queues {
            radius,
            queues: BTreeMap::new(),
        }
    }

    /// Folds a window's events into the store; queues are trimmed at `t_current`.
    pub fn absorb(&mut self, t_current: f64, new_events: &[Event]) {
        match self {
            HistoryStore::Counts(map) => {
                for e in new_events {
                    *map.entry(e.pair()).or_insert(0) += 1;
                }
            }
            HistoryStore::Queues { radius, queues } => trim_history(queues, *radius, t_current, new_events),
        }
    }

    /// Number of keys.
    pub fn len(&self) -> usize {
        match self {
            HistoryStore::Counts(map) => map.len(),
            HistoryStore::Queues { queues, .. } => queues.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Total stored timestamps (zero for count stores).
    pub fn stored_times(&self) -> usize {
        match self {
            HistoryStore::Counts(_) => 0,
            HistoryStore::Queues { queues, .. } => queues.values().map(VecDeque::len).sum(),
        }
    }

    /// Approximate heap footprint of the stored statistics in bytes.
    pub fn footprint_bytes(&self) -> usize {
        let key = std::mem::size_of::<(u32, u32)>();
        match self {
            HistoryStore::Counts(map) => map.len() * (key + std::mem::size_of::<u64>()),
            HistoryStore::Queues { queues, .. } => {
                queues.len() * (key + std::mem::size_of::<VecDeque<f64>>())
                    + self.stored_times() * std::mem::size_of::<f64>()
            }
        }
    }

    pub fn cumulative_count(&self, src: u32, dst: u32) -> Option<u64> {
        match self {
            HistoryStore::Counts(map) => map.get(&(src, dst)).copied(),
            HistoryStore::Queues { .. } => None,
        }
    }

    pub fn queue(&self, src: u32, dst: u32) -> Option<&VecDeque<f64>> {
        match self {
            HistoryStore::Queues { queues, .. } => queues.get(&(src, dst)),
            HistoryStore::Counts(_) => None,
        }
    }
}

/// Appends `new_events` to their pairs' queues, then pops every front with
/// `t_current - front > radius`. Queues left empty are dropped.
pub fn trim_history(
    queues: &mut BTreeMap<(u32, u32), VecDeque<f64>>,
    radius: f64,
    t_current: f64,
    new_events: &[Event],
) {
    for e in new_events {
        queues.entry(e.pair()).or_default().push_back(e.t);
    }
    queues.retain(|_, q| {
        while let Some(&front) = q.front() {
            if t_current - front > radius {
                q.pop_front();
            } else {
                break;
            }
        }
        !q.is_empty()
    });
}
