//! Outcome statistics of weak-field homodyne receivers.
//!
//! The signal `|alpha>` is mixed with a weak local oscillator `|z e^{i theta}>`
//! on a balanced beam splitter and both outputs are counted by PNR(M)
//! detectors:
//!
//! * WH keeps both counts `(n1, n2)`;
//! * HL keeps only the difference `n1 - n2`;
//! * DW splits the signal and runs WH on the `q` (`theta = 0`) and `p`
//!   (`theta = pi/2`) quadratures, keeping all four counts.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pnr::{fill_truncated_poisson, PnrResolution};

/// Complex amplitude of a coherent state in shot-noise units.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CoherentAmplitude {
    pub re: f64,
    pub im: f64,
}

impl CoherentAmplitude {
    pub fn new(re: f64, im: f64) -> Result<Self> {
        if !re.is_finite() || !im.is_finite() {
            return Err(Error::domain(format!(
                "coherent amplitude must be finite, got ({re}, {im})"
            )));
        }
        Ok(Self { re, im })
    }

    pub const fn real(x: f64) -> Self {
        Self { re: x, im: 0.0 }
    }

    pub const fn zero() -> Self {
        Self { re: 0.0, im: 0.0 }
    }

    /// Mean photon number `|alpha|^2`.
    pub fn energy(self) -> f64 {
        self.re * self.re + self.im * self.im
    }

    pub fn scale(self, factor: f64) -> Self {
        Self {
            re: self.re * factor,
            im: self.im * factor,
        }
    }
}

/// One weak-field measurement: PNR resolution, LO amplitude and LO phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    resolution: PnrResolution,
    lo_amplitude: f64,
    lo_phase: f64,
}

impl DetectorConfig {
    pub fn new(resolution: PnrResolution, lo_amplitude: f64, lo_phase: f64) -> Result<Self> {
        if !lo_amplitude.is_finite() || lo_amplitude < 0.0 {
            return Err(Error::domain(format!(
                "LO amplitude must be finite and non-negative, got {lo_amplitude}"
            )));
        }
        if !(0.0..PI).contains(&lo_phase) {
            return Err(Error::domain(format!(
                "LO phase must lie in [0, pi), got {lo_phase}"
            )));
        }
        Ok(Self {
            resolution,
            lo_amplitude,
            lo_phase,
        })
    }

    /// Measurement of the `q` quadrature (`theta = 0`).
    pub fn q_quadrature(resolution: PnrResolution, lo_amplitude: f64) -> Result<Self> {
        Self::new(resolution, lo_amplitude, 0.0)
    }

    pub fn resolution(&self) -> PnrResolution {
        self.resolution
    }

    pub fn lo_amplitude(&self) -> f64 {
        self.lo_amplitude
    }

    pub fn lo_phase(&self) -> f64 {
        self.lo_phase
    }

    pub fn with_lo_amplitude(self, lo_amplitude: f64) -> Result<Self> {
        Self::new(self.resolution, lo_amplitude, self.lo_phase)
    }
}

/// Mean energies `mu_+/-  = |alpha +/- z e^{i theta}|^2 / 2` on the two outputs.
pub fn branch_energies(alpha: CoherentAmplitude, cfg: &DetectorConfig) -> (f64, f64) {
    lo_branch_energies(alpha, cfg.lo_amplitude, cfg.lo_phase)
}

#[inline]
fn lo_branch_energies(alpha: CoherentAmplitude, z: f64, theta: f64) -> (f64, f64) {
    let (s, c) = theta.sin_cos();
    let (lo_re, lo_im) = (z * c, z * s);
    let plus = (alpha.re + lo_re).powi(2) + (alpha.im + lo_im).powi(2);
    let minus = (alpha.re - lo_re).powi(2) + (alpha.im - lo_im).powi(2);
    (0.5 * plus, 0.5 * minus)
}

/// Per-arm click distributions of a WH measurement; the joint law is their
/// outer product.
#[derive(Debug, Clone)]
pub(crate) struct ArmStatistics {
    pub plus: Vec<f64>,
    pub minus: Vec<f64>,
}

impl ArmStatistics {
    pub fn new(outcomes: usize) -> Self {
        Self {
            plus: vec![0.0; outcomes],
            minus: vec![0.0; outcomes],
        }
    }

    pub fn fill(&mut self, alpha: CoherentAmplitude, z: f64, theta: f64) {
        let (mu_plus, mu_minus) = lo_branch_energies(alpha, z, theta);
        fill_truncated_poisson(mu_plus, &mut self.plus);
        fill_truncated_poisson(mu_minus, &mut self.minus);
    }

    /// Law of `n1 - n2`, indexed by `delta + M`.
    pub fn difference_into(&self, out: &mut [f64]) {
        let m = self.plus.len() - 1;
        debug_assert_eq!(out.len(), 2 * m + 1);
        out.fill(0.0);
        for (n1, &a) in self.plus.iter().enumerate() {
            for (n2, &b) in self.minus.iter().enumerate() {
                out[n1 + m - n2] += a * b;
            }
        }
    }
}

/// Joint WH law `P(n1, n2)` as a dense `(M+1) x (M+1)` row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct WhOutcomeDistribution {
    outcomes: usize,
    probs: Vec<f64>,
}

impl WhOutcomeDistribution {
    pub fn resolution(&self) -> usize {
        self.outcomes - 1
    }

    pub fn get(&self, n1: usize, n2: usize) -> f64 {
        self.probs[n1 * self.outcomes + n2]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }
}

pub fn wh_distribution(alpha: CoherentAmplitude, cfg: &DetectorConfig) -> WhOutcomeDistribution {
    let k = cfg.resolution.outcomes();
    let mut arms = ArmStatistics::new(k);
    arms.fill(alpha, cfg.lo_amplitude, cfg.lo_phase);
    let probs = arms
        .plus
        .iter()
        .flat_map(|&a| arms.minus.iter().map(move |&b| a * b))
        .collect();
    WhOutcomeDistribution { outcomes: k, probs }
}

/// HL law of the click difference `delta = n1 - n2 in -M..=M`.
#[derive(Debug, Clone, PartialEq)]
pub struct HlOutcomeDistribution {
    resolution: usize,
    probs: Vec<f64>,
}

impl HlOutcomeDistribution {
    pub fn resolution(&self) -> usize {
        self.resolution
    }

    /// Probability of `delta`; zero outside `-M..=M`.
    pub fn get(&self, delta: i64) -> f64 {
        let idx = delta + self.resolution as i64;
        if idx < 0 {
            return 0.0;
        }
        self.probs.get(idx as usize).copied().unwrap_or(0.0)
    }

    /// Probabilities ordered from `delta = -M` to `delta = M`.
    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        let m = self.resolution as i64;
        self.probs.iter().enumerate().map(move |(i, &p)| (i as i64 - m, p))
    }
}

pub fn hl_distribution(alpha: CoherentAmplitude, cfg: &DetectorConfig) -> HlOutcomeDistribution {
    let m = cfg.resolution.get();
    let mut arms = ArmStatistics::new(m + 1);
    arms.fill(alpha, cfg.lo_amplitude, cfg.lo_phase);
    let mut probs = vec![0.0; 2 * m + 1];
    arms.difference_into(&mut probs);
    HlOutcomeDistribution {
        resolution: m,
        probs,
    }
}

/// DW law `P(n1, n2, m1, m2)`, dense and row-major with `m2` fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct DwOutcomeDistribution {
    outcomes: usize,
    probs: Vec<f64>,
}

impl DwOutcomeDistribution {
    pub fn resolution(&self) -> usize {
        self.outcomes - 1
    }

    pub fn get(&self, n1: usize, n2: usize, m1: usize, m2: usize) -> f64 {
        let k = self.outcomes;
        self.probs[((n1 * k + n2) * k + m1) * k + m2]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }
}

/// Configurations of the two WH arms of a DW receiver with LO amplitude `z`.
pub fn dw_arms(resolution: PnrResolution, z: f64) -> Result<(DetectorConfig, DetectorConfig)> {
    Ok((
        DetectorConfig::new(resolution, z, 0.0)?,
        DetectorConfig::new(resolution, z, FRAC_PI_2)?,
    ))
}

/// Signal amplitude reaching each DW arm after the balanced split.
pub fn dw_arm_amplitude(alpha: CoherentAmplitude) -> CoherentAmplitude {
    alpha.scale(FRAC_1_SQRT_2)
}

pub fn dw_distribution(
    alpha: CoherentAmplitude,
    resolution: PnrResolution,
    z: f64,
) -> Result<DwOutcomeDistribution> {
    let (q_arm, p_arm) = dw_arms(resolution, z)?;
    let arm_alpha = dw_arm_amplitude(alpha);
    let q = wh_distribution(arm_alpha, &q_arm);
    let p = wh_distribution(arm_alpha, &p_arm);
    let probs = q
        .as_slice()
        .iter()
        .flat_map(|&a| p.as_slice().iter().map(move |&b| a * b))
        .collect();
    Ok(DwOutcomeDistribution {
        outcomes: resolution.outcomes(),
        probs,
    })
}

/// Raw moment `sum_delta delta^order S(delta)` of the HL distribution.
pub fn hl_difference_moments(
    cfg: &DetectorConfig,
    alpha: CoherentAmplitude,
    order: u32,
) -> Result<f64> {
    if !(1..=4).contains(&order) {
        return Err(Error::domain(format!(
            "moment order must be 1..=4, got {order}"
        )));
    }
    let dist = hl_distribution(alpha, cfg);
    let order = order as i32;
    Ok(dist
        .iter()
        .map(|(delta, p)| (delta as f64).powi(order) * p)
        .sum())
}
