//! Per-execution state for `mem` and `DPmem`.
//!
//! Tables are keyed by the memoized procedure's birth address plus the
//! printed key of its arguments, so OK/stale decisions during replay never
//! depend on pointer identity. The state lives for one execution of a model:
//! every sample, replay or enumeration path rebuilds it from its choices.

use std::rc::Rc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rustc_hash::FxHashMap;

use crate::trace::Address;
use crate::value::Value;

#[derive(Default)]
pub struct MemoState {
    memo: FxHashMap<(Address, Rc<str>), Value>,
    restaurants: FxHashMap<(Address, Rc<str>), Restaurant>,
}

/// Seating state of one `DPmem` argument key.
#[derive(Default)]
pub struct Restaurant {
    pub tables: Vec<TableState>,
    /// Seating events so far, used to sequence seat choices in the trace.
    pub seatings: u32,
}

pub struct TableState {
    pub count: u32,
    pub dish: Value,
}

impl Restaurant {
    pub fn counts(&self) -> Vec<u32> {
        self.tables.iter().map(|t| t.count).collect()
    }
}

impl MemoState {
    pub fn new() -> MemoState {
        MemoState::default()
    }

    pub fn lookup(&self, birth: &Address, key: &Rc<str>) -> Option<Value> {
        self.memo.get(&(birth.clone(), key.clone())).cloned()
    }

    pub fn store(&mut self, birth: Address, key: Rc<str>, value: Value) {
        self.memo.insert((birth, key), value);
    }

    pub fn restaurant_mut(&mut self, birth: &Address, key: &Rc<str>) -> &mut Restaurant {
        self.restaurants.entry((birth.clone(), key.clone())).or_default()
    }
}

/// Draw a seat from the Chinese-restaurant rule: an existing table in
/// proportion to its count, the next unused index in proportion to `alpha`.
/// An empty restaurant opens table 0 outright, whatever `alpha` is.
pub fn crp_next_table(counts: &[u32], alpha: f64, rng: &mut ChaCha8Rng) -> usize {
    if counts.is_empty() {
        return 0;
    }
    let n: u32 = counts.iter().sum();
    let u: f64 = rng.gen::<f64>() * (n as f64 + alpha);
    let mut acc = 0.0;
    for (table, count) in counts.iter().enumerate() {
        acc += *count as f64;
        if u < acc {
            return table;
        }
    }
    counts.len()
}
