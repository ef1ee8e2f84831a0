//! Elementary random procedures: paired samplers and exact scorers.
//!
//! Every ERP can both draw a value and score an arbitrary value in log space
//! (nats), returning negative infinity off support. `CrpSeat` is internal: it
//! is the table-selection choice made by `DPmem`, expressed as an ERP so that
//! traces can record, rescore and enumerate it like any other choice.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

use crate::value::{values_equal, Value};

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum ErpKind {
    Flip,
    Random,
    Beta,
    Normal,
    Multinomial,
    UniformDraw,
    CrpSeat,
}

#[derive(Error, Debug, Clone)]
#[error("{erp}: {message}")]
pub struct ErpParamError {
    pub erp: &'static str,
    pub message: String,
}

/// Support of a choice at given parameters.
pub enum Support {
    /// Values with their log probabilities; only positive-probability entries.
    Finite(Vec<(Value, f64)>),
    Continuous,
}

/// Parameters checked and unpacked once per application.
enum Params {
    Flip(f64),
    Random,
    Beta(f64, f64),
    Normal(f64, f64),
    Multinomial(Vec<Value>, Vec<f64>),
    UniformDraw(Vec<Value>),
    CrpSeat(Vec<u32>, f64),
}

impl ErpKind {
    pub fn name(self) -> &'static str {
        match self {
            ErpKind::Flip => "flip",
            ErpKind::Random => "random",
            ErpKind::Beta => "beta",
            ErpKind::Normal => "normal",
            ErpKind::Multinomial => "multinomial",
            ErpKind::UniformDraw => "uniform-draw",
            ErpKind::CrpSeat => "crp-seat",
        }
    }

    pub fn is_continuous(self) -> bool {
        matches!(self, ErpKind::Random | ErpKind::Beta | ErpKind::Normal)
    }

    fn err(self, message: impl Into<String>) -> ErpParamError {
        ErpParamError { erp: self.name(), message: message.into() }
    }

    fn unpack(self, params: &[Value]) -> Result<Params, ErpParamError> {
        let num = |v: &Value, what: &str| {
            v.as_number().ok_or_else(|| self.err(format!("{} must be a number", what)))
        };
        match self {
            ErpKind::Flip => match params {
                [] => Ok(Params::Flip(0.5)),
                [w] => {
                    let w = num(w, "weight")?;
                    if !(0.0..=1.0).contains(&w) {
                        return Err(self.err(format!("weight {} outside [0, 1]", w)));
                    }
                    Ok(Params::Flip(w))
                }
                _ => Err(self.err("expects zero or one argument")),
            },
            ErpKind::Random => match params {
                [] => Ok(Params::Random),
                _ => Err(self.err("expects no arguments")),
            },
            ErpKind::Beta => match params {
                [a, b] => {
                    let a = num(a, "alpha")?;
                    let b = num(b, "beta")?;
                    if !(a > 0.0 && b > 0.0) {
                        return Err(self.err("shape parameters must be positive"));
                    }
                    Ok(Params::Beta(a, b))
                }
                _ => Err(self.err("expects two arguments")),
            },
            ErpKind::Normal => match params {
                [m, s] => {
                    let m = num(m, "mean")?;
                    let s = num(s, "stddev")?;
                    if !(s > 0.0) {
                        return Err(self.err("stddev must be positive"));
                    }
                    Ok(Params::Normal(m, s))
                }
                _ => Err(self.err("expects two arguments")),
            },
            ErpKind::Multinomial => match params {
                [values, probs] => {
                    let values = values
                        .list_items()
                        .ok_or_else(|| self.err("values must be a list"))?;
                    let probs = probs
                        .list_items()
                        .ok_or_else(|| self.err("probabilities must be a list"))?;
                    if values.is_empty() || values.len() != probs.len() {
                        return Err(self.err("values and probabilities must be equal-length, non-empty lists"));
                    }
                    let mut ps = Vec::with_capacity(probs.len());
                    for p in &probs {
                        let p = num(p, "probability")?;
                        if !(0.0..=1.0).contains(&p) {
                            return Err(self.err(format!("probability {} outside [0, 1]", p)));
                        }
                        ps.push(p);
                    }
                    let total: f64 = ps.iter().sum();
                    if (total - 1.0).abs() > 1e-6 {
                        return Err(self.err(format!("probabilities sum to {}", total)));
                    }
                    Ok(Params::Multinomial(values, ps))
                }
                _ => Err(self.err("expects two arguments")),
            },
            ErpKind::UniformDraw => match params {
                [list] => {
                    let items = list
                        .list_items()
                        .ok_or_else(|| self.err("argument must be a list"))?;
                    if items.is_empty() {
                        return Err(self.err("argument must be a non-empty list"));
                    }
                    Ok(Params::UniformDraw(items))
                }
                _ => Err(self.err("expects one argument")),
            },
            ErpKind::CrpSeat => match params {
                [counts, alpha] => {
                    let counts = counts
                        .list_items()
                        .ok_or_else(|| self.err("counts must be a list"))?
                        .iter()
                        .map(|v| match v {
                            Value::Int(n) if *n > 0 => Ok(*n as u32),
                            _ => Err(self.err("counts must be positive integers")),
                        })
                        .collect::<Result<Vec<_>, _>>()?;
                    let alpha = num(alpha, "alpha")?;
                    if alpha < 0.0 {
                        return Err(self.err("concentration must be nonnegative"));
                    }
                    Ok(Params::CrpSeat(counts, alpha))
                }
                _ => Err(self.err("expects counts and a concentration")),
            },
        }
    }

    pub fn validate(self, params: &[Value]) -> Result<(), ErpParamError> {
        self.unpack(params).map(|_| ())
    }

    pub fn sample(self, params: &[Value], rng: &mut ChaCha8Rng) -> Result<Value, ErpParamError> {
        Ok(match self.unpack(params)? {
            Params::Flip(w) => Value::Bool(rng.gen::<f64>() < w),
            Params::Random => Value::Real(rng.gen::<f64>()),
            Params::Beta(a, b) => {
                let d = rand_distr::Beta::new(a, b)
                    .map_err(|e| self.err(format!("invalid shape: {}", e)))?;
                Value::Real(d.sample(rng))
            }
            Params::Normal(m, s) => {
                let d = rand_distr::Normal::new(m, s)
                    .map_err(|e| self.err(format!("invalid parameters: {}", e)))?;
                Value::Real(d.sample(rng))
            }
            Params::Multinomial(values, probs) => {
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                let mut chosen = values.len() - 1;
                for (i, p) in probs.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        chosen = i;
                        break;
                    }
                }
                values[chosen].clone()
            }
            Params::UniformDraw(items) => {
                let i = rng.gen_range(0..items.len());
                items[i].clone()
            }
            Params::CrpSeat(counts, alpha) => {
                Value::Int(crate::memo::crp_next_table(&counts, alpha, rng) as i64)
            }
        })
    }

    /// Exact log probability (or log density) of `value` at `params`;
    /// negative infinity off support.
    pub fn score(self, params: &[Value], value: &Value) -> Result<f64, ErpParamError> {
        Ok(match self.unpack(params)? {
            Params::Flip(w) => match value {
                Value::Bool(true) => w.ln(),
                Value::Bool(false) => (1.0 - w).ln(),
                _ => f64::NEG_INFINITY,
            },
            Params::Random => match value {
                Value::Real(x) if (0.0..1.0).contains(x) => 0.0,
                _ => f64::NEG_INFINITY,
            },
            Params::Beta(a, b) => match value {
                Value::Real(x) if (0.0..=1.0).contains(x) && *x > 0.0 && *x < 1.0 => {
                    let ln_beta = ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b);
                    (a - 1.0) * x.ln() + (b - 1.0) * (1.0 - x).ln() - ln_beta
                }
                _ => f64::NEG_INFINITY,
            },
            Params::Normal(m, s) => match value {
                Value::Real(x) => {
                    let z = (x - m) / s;
                    -0.5 * z * z - s.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
                }
                _ => f64::NEG_INFINITY,
            },
            Params::Multinomial(values, probs) => {
                let total: f64 = values
                    .iter()
                    .zip(&probs)
                    .filter(|(v, _)| values_equal(v, value))
                    .map(|(_, p)| p)
                    .sum();
                total.ln()
            }
            Params::UniformDraw(items) => {
                let hits = items.iter().filter(|v| values_equal(v, value)).count();
                ((hits as f64) / (items.len() as f64)).ln()
            }
            Params::CrpSeat(counts, alpha) => {
                let table = match value {
                    Value::Int(t) if *t >= 0 => *t as usize,
                    _ => return Ok(f64::NEG_INFINITY),
                };
                crp_seat_logp(&counts, alpha, table)
            }
        })
    }

    pub fn support(self, params: &[Value]) -> Result<Support, ErpParamError> {
        Ok(match self.unpack(params)? {
            Params::Random | Params::Beta(..) | Params::Normal(..) => Support::Continuous,
            Params::Flip(w) => {
                let mut entries = Vec::new();
                if w > 0.0 {
                    entries.push((Value::Bool(true), w.ln()));
                }
                if w < 1.0 {
                    entries.push((Value::Bool(false), (1.0 - w).ln()));
                }
                Support::Finite(entries)
            }
            Params::Multinomial(values, probs) => Support::Finite(
                values
                    .into_iter()
                    .zip(probs)
                    .filter(|(_, p)| *p > 0.0)
                    .map(|(v, p)| (v, p.ln()))
                    .collect(),
            ),
            Params::UniformDraw(items) => {
                let logp = -(items.len() as f64).ln();
                Support::Finite(items.into_iter().map(|v| (v, logp)).collect())
            }
            Params::CrpSeat(counts, alpha) => {
                let mut entries = Vec::new();
                for t in 0..counts.len() {
                    let logp = crp_seat_logp(&counts, alpha, t);
                    if logp > f64::NEG_INFINITY {
                        entries.push((Value::Int(t as i64), logp));
                    }
                }
                let new = crp_seat_logp(&counts, alpha, counts.len());
                if new > f64::NEG_INFINITY {
                    entries.push((Value::Int(counts.len() as i64), new));
                }
                Support::Finite(entries)
            }
        })
    }
}

/// Seating log probability: existing table `t` with weight `count/(n+alpha)`,
/// the next unused index with weight `alpha/(n+alpha)`. An empty restaurant
/// always opens the first table, whatever alpha is.
pub fn crp_seat_logp(counts: &[u32], alpha: f64, table: usize) -> f64 {
    let n: u32 = counts.iter().sum();
    if counts.is_empty() {
        return if table == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    let denom = n as f64 + alpha;
    if table < counts.len() {
        (counts[table] as f64 / denom).ln()
    } else if table == counts.len() && alpha > 0.0 {
        (alpha / denom).ln()
    } else {
        f64::NEG_INFINITY
    }
}
