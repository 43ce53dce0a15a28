//! Seeded random variates on named, independently reproducible streams.
//!
//! A stream is a ChaCha8 keystream keyed by SHA-256 of the master seed and
//! stream name. Every sample consumes exactly one 64-bit word, so the state
//! `(master_seed, name, draw_count)` pins down the next variate.

use std::fmt;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::DistError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Distribution {
    Constant { value: f64 },
    Uniform { low: f64, high: f64 },
    Triangular { low: f64, mode: f64, high: f64 },
    Exponential { mean: f64 },
    Bernoulli { p: f64 },
    Discrete { outcomes: Vec<(f64, f64)> },
}

impl Distribution {
    pub fn constant(value: f64) -> Self {
        Distribution::Constant { value }
    }

    pub fn validate(&self) -> Result<(), DistError> {
        let bad = |msg: String| Err(DistError::InvalidParams(msg));
        let finite = |xs: &[f64]| xs.iter().all(|x| x.is_finite());
        match *self {
            Distribution::Constant { value } if !value.is_finite() => bad(format!("const({value}) is not finite")),
            Distribution::Uniform { low, high } if !finite(&[low, high]) || low > high => {
                bad(format!("uniform({low},{high}) needs a <= b"))
            }
            Distribution::Triangular { low, mode, high }
                if !finite(&[low, mode, high]) || !(low <= mode && mode <= high) =>
            {
                bad(format!("tri({low},{mode},{high}) needs a <= m <= b"))
            }
            Distribution::Exponential { mean } if !(mean.is_finite() && mean > 0.0) => {
                bad(format!("exp({mean}) needs mean > 0"))
            }
            Distribution::Bernoulli { p } if !(0.0..=1.0).contains(&p) => bad(format!("bern({p}) needs p in [0,1]")),
            Distribution::Discrete { ref outcomes } => {
                if outcomes.is_empty() {
                    return bad("disc() needs at least one outcome".into());
                }
                for &(v, w) in outcomes {
                    if !v.is_finite() || !(w.is_finite() && w > 0.0) {
                        return bad(format!("disc outcome {v}:{w} needs finite value and positive weight"));
                    }
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Analytic mean.
    pub fn mean(&self) -> f64 {
        match *self {
            Distribution::Constant { value } => value,
            Distribution::Uniform { low, high } => 0.5 * (low + high),
            Distribution::Triangular { low, mode, high } => (low + mode + high) / 3.0,
            Distribution::Exponential { mean } => mean,
            Distribution::Bernoulli { p } => p,
            Distribution::Discrete { ref outcomes } => {
                let total: f64 = outcomes.iter().map(|o| o.1).sum();
                outcomes.iter().map(|&(v, w)| v * w).sum::<f64>() / total
            }
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            Distribution::Constant { .. } => 0.0,
            Distribution::Uniform { low, high } => (high - low).powi(2) / 12.0,
            Distribution::Triangular {
                low: a,
                mode: m,
                high: b,
            } => (a * a + m * m + b * b - a * m - a * b - m * b) / 18.0,
            Distribution::Exponential { mean } => mean * mean,
            Distribution::Bernoulli { p } => p * (1.0 - p),
            Distribution::Discrete { ref outcomes } => {
                let mu = self.mean();
                let total: f64 = outcomes.iter().map(|o| o.1).sum();
                outcomes.iter().map(|&(v, w)| w * (v - mu).powi(2)).sum::<f64>() / total
            }
        }
    }

    /// Support as a closed interval.
    pub fn support(&self) -> (f64, f64) {
        match *self {
            Distribution::Constant { value } => (value, value),
            Distribution::Uniform { low, high } => (low, high),
            Distribution::Triangular { low, high, .. } => (low, high),
            Distribution::Exponential { .. } => (0.0, f64::INFINITY),
            Distribution::Bernoulli { .. } => (0.0, 1.0),
            Distribution::Discrete { ref outcomes } => outcomes
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(v, _)| {
                    (lo.min(v), hi.max(v))
                }),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Distribution::Constant { .. })
    }

    /// Same shape, rescaled so the mean becomes `target`.
    ///
    /// Constants and exponentials take `target` directly; a zero-mean shape
    /// (or an exponential asked for mean zero) falls back to `const(target)`.
    pub fn with_mean(&self, target: f64) -> Distribution {
        match *self {
            Distribution::Constant { .. } => Distribution::constant(target),
            Distribution::Exponential { .. } if target > 0.0 => Distribution::Exponential { mean: target },
            Distribution::Exponential { .. } => Distribution::constant(target),
            _ => {
                let mu = self.mean();
                if mu == 0.0 {
                    return Distribution::constant(target);
                }
                let k = target / mu;
                match *self {
                    Distribution::Uniform { low, high } => Distribution::Uniform {
                        low: low * k,
                        high: high * k,
                    },
                    Distribution::Triangular { low, mode, high } => Distribution::Triangular {
                        low: low * k,
                        mode: mode * k,
                        high: high * k,
                    },
                    Distribution::Bernoulli { .. } => Distribution::Bernoulli {
                        p: target.clamp(0.0, 1.0),
                    },
                    Distribution::Discrete { ref outcomes } => Distribution::Discrete {
                        outcomes: outcomes.iter().map(|&(v, w)| (v * k, w)).collect(),
                    },
                    Distribution::Constant { .. } | Distribution::Exponential { .. } => unreachable!(),
                }
            }
        }
    }

    /// Inverse-CDF transform of a uniform `u` in `[0, 1)`.
    fn quantile(&self, u: f64) -> f64 {
        match *self {
            Distribution::Constant { value } => value,
            Distribution::Uniform { low, high } => low + (high - low) * u,
            Distribution::Triangular {
                low: a,
                mode: m,
                high: b,
            } => {
                if b == a {
                    return a;
                }
                let split = (m - a) / (b - a);
                let x = if u < split {
                    a + (u * (b - a) * (m - a)).sqrt()
                } else {
                    b - ((1.0 - u) * (b - a) * (b - m)).sqrt()
                };
                x.clamp(a, b)
            }
            Distribution::Exponential { mean } => -mean * (1.0 - u).ln(),
            Distribution::Bernoulli { p } => {
                if u < p {
                    1.0
                } else {
                    0.0
                }
            }
            Distribution::Discrete { ref outcomes } => {
                let total: f64 = outcomes.iter().map(|o| o.1).sum();
                let mut acc = 0.0;
                let target = u * total;
                for &(v, w) in outcomes {
                    acc += w;
                    if target < acc {
                        return v;
                    }
                }
                outcomes.last().map(|o| o.0).unwrap_or(0.0)
            }
        }
    }
}

fn fmt_num(x: f64) -> String {
    format!("{x}")
}

impl fmt::Display for Distribution {
    /// Model-format literal: `const(30)`, `tri(2,3,4)`, `disc(1:0.5, 2:0.5)`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Distribution::Constant { value } => write!(f, "const({})", fmt_num(*value)),
            Distribution::Uniform { low, high } => write!(f, "uniform({},{})", fmt_num(*low), fmt_num(*high)),
            Distribution::Triangular { low, mode, high } => {
                write!(f, "tri({},{},{})", fmt_num(*low), fmt_num(*mode), fmt_num(*high))
            }
            Distribution::Exponential { mean } => write!(f, "exp({})", fmt_num(*mean)),
            Distribution::Bernoulli { p } => write!(f, "bern({})", fmt_num(*p)),
            Distribution::Discrete { outcomes } => {
                f.write_str("disc(")?;
                for (i, (v, w)) in outcomes.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{}:{}", fmt_num(*v), fmt_num(*w))?;
                }
                f.write_str(")")
            }
        }
    }
}

/// A named random stream.
#[derive(Clone)]
pub struct RandomStream {
    name: String,
    master_seed: u64,
    draw_count: u64,
    rng: ChaCha8Rng,
}

impl fmt::Debug for RandomStream {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RandomStream")
            .field("name", &self.name)
            .field("master_seed", &self.master_seed)
            .field("draw_count", &self.draw_count)
            .finish()
    }
}

/// Deterministic stream for `(master_seed, stream_name)`.
pub fn derive_stream(master_seed: u64, stream_name: &str) -> RandomStream {
    let mut h = Sha256::new();
    h.update(b"berthsim.stream.v1\0");
    h.update(master_seed.to_le_bytes());
    h.update(stream_name.as_bytes());
    let digest = h.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    RandomStream {
        name: stream_name.to_string(),
        master_seed,
        draw_count: 0,
        rng: ChaCha8Rng::from_seed(key),
    }
}

impl RandomStream {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn draw_count(&self) -> u64 {
        self.draw_count
    }

    pub fn next_u64(&mut self) -> u64 {
        self.draw_count += 1;
        self.rng.next_u64()
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    pub fn next_unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Draws one variate. Consumes exactly one word, constants included.
    pub fn sample(&mut self, d: &Distribution) -> Result<f64, DistError> {
        d.validate()?;
        Ok(self.sample_unchecked(d))
    }

    /// Like [`sample`](Self::sample) for distributions already validated.
    pub fn sample_unchecked(&mut self, d: &Distribution) -> f64 {
        let u = self.next_unit();
        d.quantile(u)
    }
}

/// Convenience wrapper matching the stream-first call shape.
pub fn sample(d: &Distribution, s: &mut RandomStream) -> Result<f64, DistError> {
    s.sample(d)
}
