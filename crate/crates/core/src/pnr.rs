//! Click statistics of a photon-number-resolving detector with finite
//! resolution `M`.
//!
//! A PNR(M) detector reports the exact photon number for `n < M` and a single
//! saturation outcome `M` for everything at or above `M`. Fed with a coherent
//! state of mean energy `mu` it produces a Poisson law whose tail is folded
//! into the last bin.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::numeric::CompensatedSum;

/// Default number of exact `ln n!` entries kept in the shared table.
pub const DEFAULT_LOG_FACTORIAL_CAP: usize = 512;

/// Above this mean `exp(-mu)` leaves the normal range, so Poisson terms are
/// formed in log-space instead of by the multiplicative recurrence.
const RECURRENCE_MU_LIMIT: f64 = 700.0;

/// Relative size at which the upper-tail series is truncated.
const TAIL_REL_EPS: f64 = 1e-18;

/// Maximum resolvable photon number of a PNR detector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct PnrResolution(u32);

impl PnrResolution {
    pub fn new(m: u32) -> Result<Self> {
        if m == 0 {
            return Err(Error::domain("PNR resolution M must be at least 1"));
        }
        Ok(Self(m))
    }

    #[inline]
    pub fn get(self) -> usize {
        self.0 as usize
    }

    /// Number of detector outcomes, `M + 1`.
    #[inline]
    pub fn outcomes(self) -> usize {
        self.0 as usize + 1
    }
}

impl TryFrom<u32> for PnrResolution {
    type Error = Error;

    fn try_from(m: u32) -> Result<Self> {
        Self::new(m)
    }
}

impl From<PnrResolution> for u32 {
    fn from(m: PnrResolution) -> u32 {
        m.0
    }
}

impl std::fmt::Display for PnrResolution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Table of `ln n!` for `n <= cap`, with a Stirling fallback above the cap.
#[derive(Debug, Clone)]
pub struct LogFactorials {
    table: Vec<f64>,
}

impl LogFactorials {
    pub fn with_cap(cap: usize) -> Self {
        let mut table = Vec::with_capacity(cap + 1);
        let mut factorial = 1.0_f64;
        for n in 0..=cap {
            if n > 0 {
                factorial *= n as f64;
            }
            // n! is finite in f64 up to 170!
            let value = if n <= 170 {
                factorial.ln()
            } else {
                ln_gamma(n as f64 + 1.0)
            };
            table.push(value);
        }
        Self { table }
    }

    pub fn cap(&self) -> usize {
        self.table.len() - 1
    }

    pub fn ln_factorial(&self, n: usize) -> f64 {
        match self.table.get(n) {
            Some(&v) => v,
            None => ln_gamma(n as f64 + 1.0),
        }
    }
}

fn shared_log_factorials() -> &'static LogFactorials {
    static TABLE: OnceLock<LogFactorials> = OnceLock::new();
    TABLE.get_or_init(|| LogFactorials::with_cap(DEFAULT_LOG_FACTORIAL_CAP))
}

/// Natural log of the untruncated Poisson mass `e^-mu mu^n / n!`, for `mu > 0`.
fn ln_poisson_mass(n: usize, mu: f64) -> f64 {
    n as f64 * mu.ln() - mu - shared_log_factorials().ln_factorial(n)
}

/// Click distribution `q_n(mu)`, `n = 0..=M`, of a PNR(M) detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClickProbabilities {
    probs: Vec<f64>,
    mean_energy: f64,
}

impl ClickProbabilities {
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn mean_energy(&self) -> f64 {
        self.mean_energy
    }

    pub fn resolution(&self) -> usize {
        self.probs.len() - 1
    }

    pub fn get(&self, n: usize) -> Option<f64> {
        self.probs.get(n).copied()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.probs
    }
}

fn check_mean(mu: f64) -> Result<()> {
    if !mu.is_finite() || mu < 0.0 {
        return Err(Error::domain(format!(
            "mean photon number must be finite and non-negative, got {mu}"
        )));
    }
    Ok(())
}

/// Truncated Poisson statistics of a PNR(M) detector fed with mean energy `mu`.
pub fn truncated_poisson(mu: f64, m: PnrResolution) -> Result<ClickProbabilities> {
    check_mean(mu)?;
    let mut probs = vec![0.0; m.outcomes()];
    fill_truncated_poisson(mu, &mut probs);
    Ok(ClickProbabilities {
        probs,
        mean_energy: mu,
    })
}

/// `log2 q_n(mu)`; zero-probability outcomes map to `f64::NEG_INFINITY`.
pub fn log_truncated_poisson(mu: f64, m: PnrResolution, n: usize) -> Result<f64> {
    check_mean(mu)?;
    let m = m.get();
    if n > m {
        return Err(Error::domain(format!(
            "outcome index {n} out of range 0..={m}"
        )));
    }
    if mu == 0.0 {
        return Ok(if n == 0 { 0.0 } else { f64::NEG_INFINITY });
    }
    if n < m {
        return Ok(ln_poisson_mass(n, mu) / std::f64::consts::LN_2);
    }
    let mut probs = vec![0.0; m + 1];
    fill_truncated_poisson(mu, &mut probs);
    let q = probs[m];
    Ok(if q > 0.0 {
        q.log2()
    } else {
        f64::NEG_INFINITY
    })
}

/// Writes `q_0(mu) ..= q_M(mu)` into `out`, where `M = out.len() - 1`.
///
/// No validation: `mu` must be finite and non-negative and `out` must hold at
/// least two entries.
pub(crate) fn fill_truncated_poisson(mu: f64, out: &mut [f64]) {
    let m = out.len() - 1;
    debug_assert!(m >= 1);
    if mu == 0.0 {
        out.fill(0.0);
        out[0] = 1.0;
        return;
    }

    let use_recurrence = mu <= RECURRENCE_MU_LIMIT;
    if use_recurrence {
        let mut term = (-mu).exp();
        out[0] = term;
        for (n, slot) in out.iter_mut().enumerate().take(m).skip(1) {
            term = term * mu / n as f64;
            *slot = term;
        }
    } else {
        for (n, slot) in out.iter_mut().enumerate().take(m) {
            *slot = ln_poisson_mass(n, mu).exp();
        }
    }

    let tail = if mu < m as f64 {
        // The upper-tail series converges geometrically here and keeps full
        // relative accuracy even when q_M is far below machine epsilon.
        let mut term = if use_recurrence {
            out[m - 1] * mu / m as f64
        } else {
            ln_poisson_mass(m, mu).exp()
        };
        let mut acc = CompensatedSum::new();
        let mut j = m;
        while term > 0.0 {
            acc.add(term);
            j += 1;
            term = term * mu / j as f64;
            if term <= acc.value() * TAIL_REL_EPS {
                break;
            }
        }
        acc.value()
    } else {
        let head: CompensatedSum = out[..m].iter().copied().collect();
        1.0 - head.value()
    };
    out[m] = tail.clamp(0.0, 1.0);
}
