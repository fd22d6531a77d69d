//! Closed-form reference capacities and the pure-loss energy mapping.
//!
//! All capacities are in bits per channel use as functions of the mean
//! received photon number `n_s`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Euler-Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_86;

/// Smallest energy accepted by [`dd_upper_bound`].
pub const DD_MIN_ENERGY: f64 = 1e-12;

/// Absolute tolerance of [`find_crossover`] in `n_s`.
pub const CROSSOVER_TOL: f64 = 1e-4;

/// Pure-loss channel: transmissivity `tau` maps input energy `n_bar` to
/// received energy `n_s = tau * n_bar`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    tau: f64,
    n_bar: f64,
    n_s: f64,
}

impl ChannelParams {
    pub fn new(tau: f64, n_bar: f64) -> Result<Self> {
        if !(tau > 0.0 && tau <= 1.0) {
            return Err(Error::domain(format!(
                "transmissivity must lie in (0, 1], got {tau}"
            )));
        }
        if !n_bar.is_finite() || n_bar < 0.0 {
            return Err(Error::domain(format!(
                "input energy must be finite and non-negative, got {n_bar}"
            )));
        }
        Ok(Self {
            tau,
            n_bar,
            n_s: tau * n_bar,
        })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn n_bar(&self) -> f64 {
        self.n_bar
    }

    pub fn received_energy(&self) -> f64 {
        self.n_s
    }
}

/// Single-homodyne Shannon capacity `log2(1 + 4 n_s) / 2`.
pub fn shannon_sh(n_s: f64) -> f64 {
    0.5 * (4.0 * n_s).ln_1p() / std::f64::consts::LN_2
}

/// Double-homodyne Shannon capacity `log2(1 + n_s)`.
pub fn shannon_dh(n_s: f64) -> f64 {
    n_s.ln_1p() / std::f64::consts::LN_2
}

/// Holevo capacity `g(n_s) = (n_s + 1) log2(n_s + 1) - n_s log2 n_s`.
pub fn holevo(n_s: f64) -> f64 {
    if n_s == 0.0 {
        return 0.0;
    }
    ((n_s + 1.0) * n_s.ln_1p() - n_s * n_s.ln()) / std::f64::consts::LN_2
}

/// Upper bound on the capacity of direct detection (discrete-time Poisson
/// channel) with mean energy `n_s`.
pub fn dd_upper_bound(n_s: f64) -> Result<f64> {
    if !(n_s >= DD_MIN_ENERGY) || !n_s.is_finite() {
        return Err(Error::domain(format!(
            "DD bound needs n_s >= {DD_MIN_ENERGY:e}, got {n_s}"
        )));
    }
    let e = (1.0 + EULER_GAMMA).exp();
    let numerator = 1.0 + (1.0 + e) * n_s + 2.0 * n_s * n_s;
    let first = n_s * (numerator / (e * n_s + 2.0 * n_s * n_s)).log2();
    let root = (numerator / (1.0 + n_s)).sqrt();
    let second = (1.0 + (root - 1.0) / (2.0 * std::f64::consts::E).sqrt()).log2();
    Ok(first + second)
}

/// Reference capacity used for ratios and gains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Baseline {
    Sh,
    Dh,
    Dd,
    Holevo,
}

impl Baseline {
    pub fn capacity(self, n_s: f64) -> Result<f64> {
        match self {
            Baseline::Sh => Ok(shannon_sh(n_s)),
            Baseline::Dh => Ok(shannon_dh(n_s)),
            Baseline::Holevo => Ok(holevo(n_s)),
            Baseline::Dd => dd_upper_bound(n_s),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Baseline::Sh => "sh",
            Baseline::Dh => "dh",
            Baseline::Dd => "dd",
            Baseline::Holevo => "holevo",
        }
    }
}

/// Root of `f - g` on `bracket` by bisection, to [`CROSSOVER_TOL`].
pub fn find_crossover<F, G>(f: F, g: G, bracket: (f64, f64)) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
    G: Fn(f64) -> Result<f64>,
{
    find_crossover_within(f, g, bracket, CROSSOVER_TOL)
}

/// [`find_crossover`] with an explicit bracket-width tolerance, for curves
/// that are expensive to evaluate.
pub fn find_crossover_within<F, G>(f: F, g: G, bracket: (f64, f64), tol: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
    G: Fn(f64) -> Result<f64>,
{
    if !(tol > 0.0) {
        return Err(Error::config(format!("bisection tolerance must be positive, got {tol}")));
    }
    let (mut lo, mut hi) = bracket;
    let diff = |x: f64| -> Result<f64> { Ok(f(x)? - g(x)?) };
    let mut d_lo = diff(lo)?;
    let d_hi = diff(hi)?;
    if !d_lo.is_finite() || !d_hi.is_finite() {
        return Err(Error::numeric(
            format!("bracket [{lo}, {hi}]"),
            "non-finite curve difference",
        ));
    }
    if d_lo == 0.0 {
        return Ok(lo);
    }
    if d_hi == 0.0 {
        return Ok(hi);
    }
    if d_lo.signum() == d_hi.signum() {
        return Err(Error::Bracket { lo, hi });
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let d_mid = diff(mid)?;
        if d_mid == 0.0 {
            return Ok(mid);
        }
        if d_mid.signum() == d_lo.signum() {
            lo = mid;
            d_lo = d_mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
