//! Computation traces: structural addresses for random choices, the records
//! stored at them, and the drivers that decide how a choice is resolved
//! (sampled, recorded, replayed against constraints, or enumerated).
//!
//! An address is the call path from the top of the program to the choice
//! point, so it names the same logical choice across executions that reach it
//! the same way. Memoized bodies start their own namespace keyed by the memo
//! identity and argument key, which keeps their choices stable no matter
//! where the first call happens to come from.

use std::collections::BTreeMap;
use std::fmt;
use std::rc::Rc;

use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::erp::{ErpKind, Support};
use crate::expr::NodeId;
use crate::value::{values_equal, Value};

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Frame {
    /// n-th top-level form of a run.
    Top(u32),
    /// Operator (0) or n-th operand of an application; also the three parts
    /// of an `if` and the value of a `define`.
    Arg(u32),
    /// Body of the lambda with this static id.
    Body(NodeId),
    /// Body of an expression built and run by `eval`.
    EvalBody,
    /// Body of a memoized call: a fresh namespace, not an extension of the
    /// caller's path.
    Memo { birth: Address, key: Rc<str> },
    /// Table-selection choice inside a DP-memoized call; `seq` counts the
    /// seatings of that restaurant within one execution.
    DpSeat { birth: Address, key: Rc<str>, seq: u32 },
    /// Evaluation of a new table's value; also a fresh namespace.
    DpDish { birth: Address, key: Rc<str>, table: u32 },
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Default)]
pub struct Address(Rc<[Frame]>);

impl Address {
    pub fn root() -> Address {
        Address::default()
    }

    pub fn capture(path: &[Frame]) -> Address {
        Address(path.into())
    }

    pub fn frames(&self) -> &[Frame] {
        &self.0
    }
}

impl fmt::Display for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Keys get a length prefix so distinct addresses can never print
        // alike, whatever bytes the keys contain.
        match self {
            Frame::Top(i) => write!(f, "t{}", i),
            Frame::Arg(i) => write!(f, "a{}", i),
            Frame::Body(id) => write!(f, "b{}", id.0),
            Frame::EvalBody => write!(f, "e"),
            Frame::Memo { birth, key } => write!(f, "m[{}]{}:{}", birth, key.len(), key),
            Frame::DpSeat { birth, key, seq } => {
                write!(f, "s[{}]{}:{}#{}", birth, key.len(), key, seq)
            }
            Frame::DpDish { birth, key, table } => {
                write!(f, "d[{}]{}:{}@{}", birth, key.len(), key, table)
            }
        }
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, frame) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, "/")?;
            }
            write!(f, "{}", frame)?;
        }
        Ok(())
    }
}

/// One random choice as it happened: which primitive, at what parameters,
/// what came out, and how likely that was.
#[derive(Clone, Debug)]
pub struct ChoiceRecord {
    pub erp: ErpKind,
    pub params: Vec<Value>,
    pub value: Value,
    pub logp: f64,
}

/// A full record of one execution's random choices.
#[derive(Clone, Default)]
pub struct ComputationTrace {
    pub choices: BTreeMap<Address, ChoiceRecord>,
}

impl ComputationTrace {
    pub fn log_prob(&self) -> f64 {
        self.choices.values().map(|c| c.logp).sum()
    }

    pub fn len(&self) -> usize {
        self.choices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.choices.is_empty()
    }

    /// Address of the n-th choice in address order.
    pub fn nth_address(&self, n: usize) -> Option<&Address> {
        self.choices.keys().nth(n)
    }

    /// Human-oriented listing, one choice per line, in address order.
    pub fn dump(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        for (addr, rec) in &self.choices {
            let _ = writeln!(
                out,
                "{} {} -> {} (logp {:.6})",
                addr,
                rec.erp.name(),
                crate::value::display_value(&rec.value),
                rec.logp
            );
        }
        out
    }
}

/// Mechanical failures of an execution, as opposed to the language's own
/// contagious `error` value.
#[derive(Error, Clone, Debug)]
pub enum Fault {
    #[error("recursion limit of {limit} applications exceeded")]
    DepthLimit { limit: usize },
    #[error("two random choices share the address {address}")]
    DuplicateAddress { address: Address },
    #[error("cannot enumerate a continuous choice ({erp})")]
    ContinuousChoice { erp: &'static str },
    #[error("path abandoned by the enumeration bounds")]
    Truncated,
    #[error("query forms inside a model are only supported while sampling")]
    NestedQuery,
    #[error("nested query exhausted its attempt budget")]
    NestedQueryBudget,
}

/// How the evaluator resolves random choices.
pub enum Driver {
    /// Draw from the prior; remember nothing.
    Sample,
    /// Draw from the prior and record every choice.
    Record(TraceBuilder),
    /// Re-execute against a constraint set, sampling only where the
    /// constraints are silent or stale.
    Replay(ReplayState),
    /// Deterministic branch-by-branch exploration; no randomness at all.
    Enumerate(EnumState),
}

#[derive(Default)]
pub struct TraceBuilder {
    pub choices: BTreeMap<Address, ChoiceRecord>,
}

impl TraceBuilder {
    pub fn resolve(
        &mut self,
        addr: Address,
        erp: ErpKind,
        params: &[Value],
        rng: &mut ChaCha8Rng,
    ) -> Result<Value, Fault> {
        let value = erp.sample(params, rng).expect("validated params");
        let logp = erp.score(params, &value).expect("validated params");
        let record = ChoiceRecord { erp, params: params.to_vec(), value: value.clone(), logp };
        if self.choices.insert(addr.clone(), record).is_some() {
            return Err(Fault::DuplicateAddress { address: addr });
        }
        Ok(value)
    }

    pub fn into_trace(self) -> ComputationTrace {
        ComputationTrace { choices: self.choices }
    }
}

pub struct ReplayState {
    /// Choices proposed for reuse; entries are consumed as they match.
    constraints: BTreeMap<Address, ChoiceRecord>,
    /// The trace of this execution, reused and fresh alike.
    choices: BTreeMap<Address, ChoiceRecord>,
    /// Total log probability of freshly sampled choices.
    fresh_logp: f64,
}

impl ReplayState {
    pub fn new(constraints: BTreeMap<Address, ChoiceRecord>) -> ReplayState {
        ReplayState { constraints, choices: BTreeMap::new(), fresh_logp: 0.0 }
    }

    pub fn resolve(
        &mut self,
        addr: Address,
        erp: ErpKind,
        params: &[Value],
        rng: &mut ChaCha8Rng,
    ) -> Result<Value, Fault> {
        let reusable = match self.constraints.get(&addr) {
            Some(rec) => rec.erp == erp && params_equal(&rec.params, params),
            None => false,
        };
        let (value, logp) = if reusable {
            let rec = self.constraints.remove(&addr).expect("present");
            // Rescore rather than trust the stored number: a constraint may
            // pin a value this choice could never produce.
            let logp = erp.score(params, &rec.value).expect("validated params");
            (rec.value, logp)
        } else {
            let value = erp.sample(params, rng).expect("validated params");
            let logp = erp.score(params, &value).expect("validated params");
            self.fresh_logp += logp;
            (value, logp)
        };
        let record = ChoiceRecord { erp, params: params.to_vec(), value: value.clone(), logp };
        if self.choices.insert(addr.clone(), record).is_some() {
            return Err(Fault::DuplicateAddress { address: addr });
        }
        Ok(value)
    }

    /// Log probability of freshly sampled choices.
    pub fn fresh_logp(&self) -> f64 {
        self.fresh_logp
    }

    /// Log probability of constraint entries that went unused.
    pub fn stale_logp(&self) -> f64 {
        self.constraints.values().map(|c| c.logp).sum()
    }

    pub fn into_trace(self) -> ComputationTrace {
        ComputationTrace { choices: self.choices }
    }
}

pub fn params_equal(a: &[Value], b: &[Value]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| values_equal(x, y))
}

/// State of one enumeration path. The path is identified by the values of
/// its choices in encounter order; the first `forced` of them are mandated,
/// the rest branch.
pub struct EnumState {
    taken: Vec<Value>,
    forced: usize,
    pos: usize,
    logp: f64,
    /// Natural-log floor below which a branch is abandoned.
    ln_min: f64,
    max_choices: usize,
    /// Sibling prefixes discovered at frontiers, ready to explore.
    pub pending: Vec<Vec<Value>>,
    /// Probability mass of abandoned branches.
    pub residual: f64,
}

impl EnumState {
    pub fn new(prefix: Vec<Value>, min_path_prob: f64, max_choices: usize) -> EnumState {
        let ln_min = if min_path_prob > 0.0 { min_path_prob.ln() } else { f64::NEG_INFINITY };
        EnumState {
            forced: prefix.len(),
            taken: prefix,
            pos: 0,
            logp: 0.0,
            ln_min,
            max_choices,
            pending: Vec::new(),
            residual: 0.0,
        }
    }

    pub fn log_prob(&self) -> f64 {
        self.logp
    }

    pub fn resolve(&mut self, erp: ErpKind, params: &[Value]) -> Result<Value, Fault> {
        if self.pos < self.forced {
            let value = self.taken[self.pos].clone();
            let logp = erp.score(params, &value).expect("validated params");
            debug_assert!(logp > f64::NEG_INFINITY, "forced value off support");
            self.pos += 1;
            self.logp += logp;
            return Ok(value);
        }
        if self.taken.len() >= self.max_choices {
            self.residual += self.logp.exp();
            return Err(Fault::Truncated);
        }
        let entries = match erp.support(params).expect("validated params") {
            Support::Finite(entries) => entries,
            Support::Continuous => {
                return Err(Fault::ContinuousChoice { erp: erp.name() });
            }
        };
        let mut first: Option<(Value, f64)> = None;
        for (value, logp) in entries {
            let child_logp = self.logp + logp;
            if child_logp <= self.ln_min + 1e-9 {
                self.residual += child_logp.exp();
            } else if first.is_none() {
                first = Some((value, logp));
            } else {
                let mut sibling = self.taken.clone();
                sibling.push(value);
                self.pending.push(sibling);
            }
        }
        match first {
            Some((value, logp)) => {
                self.taken.push(value.clone());
                self.pos += 1;
                self.logp += logp;
                Ok(value)
            }
            None => Err(Fault::Truncated),
        }
    }
}
