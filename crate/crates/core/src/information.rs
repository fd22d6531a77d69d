//! Entropies, mutual information of the weak-field receivers under a prior,
//! and the derived figures of merit.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::adaptive::QuadraturePlan;
use crate::baselines::{dd_upper_bound, Baseline};
use crate::detectors::{dw_arm_amplitude, ArmStatistics, DetectorConfig};
use crate::error::{Error, Result};
use crate::modulation::{ModulationScheme, QuadratureRule, Shape, Symmetry};
use crate::numeric::CompensatedSum;
use crate::pnr::PnrResolution;

/// Probabilities below this are treated as exact zeros in entropy sums.
pub const ENTROPY_FLOOR: f64 = 1e-300;

/// Negative mutual information above this is quadrature noise and clamps to 0.
pub const NEGATIVE_MI_TOLERANCE: f64 = 1e-9;

const NORMALIZATION_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DetectorKind {
    Wh,
    Hl,
    Dw,
}

impl DetectorKind {
    pub fn label(self) -> &'static str {
        match self {
            DetectorKind::Wh => "wh",
            DetectorKind::Hl => "hl",
            DetectorKind::Dw => "dw",
        }
    }

    /// DW measures both quadratures and needs a two-quadrature prior.
    pub fn is_bivariate(self) -> bool {
        matches!(self, DetectorKind::Dw)
    }

    /// Shannon capacity this receiver is compared against.
    pub fn shannon_baseline(self) -> Baseline {
        if self.is_bivariate() {
            Baseline::Dh
        } else {
            Baseline::Sh
        }
    }
}

impl std::str::FromStr for DetectorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "wh" => Ok(DetectorKind::Wh),
            "hl" => Ok(DetectorKind::Hl),
            "dw" => Ok(DetectorKind::Dw),
            other => Err(Error::config(format!("unknown detector `{other}`"))),
        }
    }
}

/// A receiver: detector kind plus its weak-field configuration. For DW the
/// LO phase is ignored; both arms use the same LO amplitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detector {
    pub kind: DetectorKind,
    pub config: DetectorConfig,
}

impl Detector {
    pub fn new(kind: DetectorKind, resolution: PnrResolution, lo_amplitude: f64) -> Result<Self> {
        Ok(Self {
            kind,
            config: DetectorConfig::q_quadrature(resolution, lo_amplitude)?,
        })
    }
}

/// Shannon entropy in bits, with `0 log 0 = 0`.
///
/// The input is renormalized when its total is within `1e-6` of one.
pub fn shannon_entropy(dist: &[f64]) -> Result<f64> {
    if dist.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
        return Err(Error::domain(
            "probabilities must be finite and non-negative",
        ));
    }
    let total: f64 = dist.iter().copied().collect::<CompensatedSum>().value();
    if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
        return Err(Error::domain(format!(
            "distribution sums to {total}, not 1"
        )));
    }
    let h = entropy_bits(dist.iter().map(|&p| p / total));
    Ok(h.max(0.0))
}

#[inline]
fn entropy_bits(probs: impl Iterator<Item = f64>) -> f64 {
    let mut acc = CompensatedSum::new();
    for p in probs {
        if p > ENTROPY_FLOOR {
            acc.add(-p * p.log2());
        }
    }
    acc.value()
}

fn check_arity(kind: DetectorKind, scheme: &ModulationScheme) -> Result<()> {
    if kind.is_bivariate() != scheme.is_bivariate() {
        return Err(Error::config(format!(
            "detector {} needs a {} prior, got {:?}",
            kind.label(),
            if kind.is_bivariate() {
                "two-quadrature"
            } else {
                "single-quadrature"
            },
            scheme.kind()
        )));
    }
    Ok(())
}

/// `I = H[p_B] - sum_i w_i H[p_{B|A}(. | alpha_i)]` for the given receiver,
/// averaged over `rule`.
///
/// The output marginal is accumulated with compensated summation. Conditional
/// entropies use the product structure of the WH and DW laws. Small negative
/// results from quadrature noise are clamped to zero.
pub fn mutual_information(
    detector: &Detector,
    scheme: &ModulationScheme,
    rule: &QuadratureRule,
) -> Result<f64> {
    check_arity(detector.kind, scheme)?;
    if rule.len() == 1 {
        // a point-mass prior carries no information
        return Ok(0.0);
    }
    let m = detector.config.resolution();
    let z = detector.config.lo_amplitude();
    let theta = detector.config.lo_phase();
    let k = m.outcomes();

    let mut conditional = CompensatedSum::new();
    let mut marginal: Vec<f64> = match detector.kind {
        DetectorKind::Wh => {
            let mut arms = ArmStatistics::new(k);
            let mut acc = vec![CompensatedSum::new(); k * k];
            for (alpha, w) in rule.iter() {
                arms.fill(alpha, z, theta);
                conditional.add(w * (arm_entropy(&arms.plus) + arm_entropy(&arms.minus)));
                for (row, &a) in acc.chunks_exact_mut(k).zip(&arms.plus) {
                    let wa = w * a;
                    for (cell, &b) in row.iter_mut().zip(&arms.minus) {
                        cell.add(wa * b);
                    }
                }
            }
            acc.iter().map(CompensatedSum::value).collect()
        }
        DetectorKind::Hl => {
            let mut arms = ArmStatistics::new(k);
            let mut diff = vec![0.0; 2 * k - 1];
            let mut acc = vec![CompensatedSum::new(); 2 * k - 1];
            for (alpha, w) in rule.iter() {
                arms.fill(alpha, z, theta);
                arms.difference_into(&mut diff);
                conditional.add(w * entropy_bits(diff.iter().copied()));
                for (cell, &p) in acc.iter_mut().zip(&diff) {
                    cell.add(w * p);
                }
            }
            acc.iter().map(CompensatedSum::value).collect()
        }
        DetectorKind::Dw => dw_marginal(rule, k, z, &mut conditional),
    };
    symmetrize(detector.kind, rule.symmetry(), k, &mut marginal);

    let output_entropy = entropy_bits(marginal.iter().copied());
    let info = output_entropy - conditional.value();
    if !info.is_finite() {
        return Err(Error::numeric(
            format!(
                "{} M={} z={z} n_s={}",
                detector.kind.label(),
                m,
                scheme.mean_energy()
            ),
            "mutual information is not finite",
        ));
    }
    if info < 0.0 {
        if info > -NEGATIVE_MI_TOLERANCE {
            return Ok(0.0);
        }
        return Err(Error::numeric(
            format!(
                "{} M={} z={z} n_s={}",
                detector.kind.label(),
                m,
                scheme.mean_energy()
            ),
            format!("mutual information {info:e} is negative beyond quadrature noise"),
        ));
    }
    Ok(info)
}

/// Mutual information using the rule `plan` selects for this receiver,
/// together with the number of nodes of that rule.
pub fn planned_information(
    detector: &Detector,
    scheme: &ModulationScheme,
    plan: &QuadraturePlan,
) -> Result<(f64, usize)> {
    let rule = plan.rule_for(detector, scheme)?;
    Ok((mutual_information(detector, scheme, &rule)?, rule.len()))
}

#[inline]
fn arm_entropy(q: &[f64]) -> f64 {
    entropy_bits(q.iter().copied())
}

#[inline]
fn outer_into(a: &[f64], b: &[f64], out: &mut [f64]) {
    for (row, &x) in out.chunks_exact_mut(b.len()).zip(a) {
        for (cell, &y) in row.iter_mut().zip(b) {
            *cell = x * y;
        }
    }
}

/// Nodes per matrix product in the DW marginal.
const DW_BLOCK: usize = 512;

/// DW output marginal `sum_i w_i q_i (x) p_i` over the joint laws of the two
/// arms, accumulated as blocked matrix products whose partial results are
/// summed with compensation. Adds the conditional entropies to `conditional`.
fn dw_marginal(
    rule: &QuadratureRule,
    k: usize,
    z: f64,
    conditional: &mut CompensatedSum,
) -> Vec<f64> {
    let k2 = k * k;
    let mut q_arm = ArmStatistics::new(k);
    let mut p_arm = ArmStatistics::new(k);
    let mut joint = vec![0.0; k2];
    // q-arm laws as columns (scaled by the weight), p-arm laws as rows
    let mut q_block = DMatrix::<f64>::zeros(k2, DW_BLOCK);
    let mut p_block = DMatrix::<f64>::zeros(DW_BLOCK, k2);
    let mut partial = DMatrix::<f64>::zeros(k2, k2);
    let mut acc = vec![CompensatedSum::new(); k2 * k2];

    let nodes = rule.nodes();
    let weights = rule.weights();
    for start in (0..nodes.len()).step_by(DW_BLOCK) {
        let len = DW_BLOCK.min(nodes.len() - start);
        for j in 0..len {
            let alpha = dw_arm_amplitude(nodes[start + j]);
            let w = weights[start + j];
            q_arm.fill(alpha, z, 0.0);
            p_arm.fill(alpha, z, std::f64::consts::FRAC_PI_2);
            conditional.add(
                w * (arm_entropy(&q_arm.plus)
                    + arm_entropy(&q_arm.minus)
                    + arm_entropy(&p_arm.plus)
                    + arm_entropy(&p_arm.minus)),
            );
            outer_into(&q_arm.plus, &q_arm.minus, &mut joint);
            for (dst, &v) in q_block.column_mut(j).iter_mut().zip(&joint) {
                *dst = w * v;
            }
            outer_into(&p_arm.plus, &p_arm.minus, &mut joint);
            for (c, &v) in joint.iter().enumerate() {
                p_block[(j, c)] = v;
            }
        }
        partial.gemm(1.0, &q_block.columns(0, len), &p_block.rows(0, len), 0.0);
        // partial is column-major: entry (r, c) at c * k2 + r
        for c in 0..k2 {
            for r in 0..k2 {
                acc[r * k2 + c].add(partial[(r, c)]);
            }
        }
    }
    acc.iter().map(CompensatedSum::value).collect()
}

/// Averages the marginal over the mirror images represented by a folded
/// rule. Flipping the sign of the in-phase amplitude swaps the two detectors
/// of the arm whose LO is in phase with it; flipping the quadrature amplitude
/// does the same for the DW p arm.
fn symmetrize(kind: DetectorKind, symmetry: Symmetry, k: usize, marginal: &mut [f64]) {
    if symmetry == Symmetry::None {
        return;
    }
    let original = marginal.to_vec();
    match kind {
        DetectorKind::Wh => {
            for a in 0..k {
                for b in 0..k {
                    marginal[a * k + b] = 0.5 * (original[a * k + b] + original[b * k + a]);
                }
            }
        }
        DetectorKind::Hl => {
            let len = original.len();
            for (i, cell) in marginal.iter_mut().enumerate() {
                *cell = 0.5 * (original[i] + original[len - 1 - i]);
            }
        }
        DetectorKind::Dw => {
            let k2 = k * k;
            let swap = |idx: usize| (idx % k) * k + idx / k;
            let both = symmetry == Symmetry::MirrorBoth;
            for q in 0..k2 {
                for p in 0..k2 {
                    let mut total = original[q * k2 + p] + original[swap(q) * k2 + p];
                    let mut count = 2.0;
                    if both {
                        total += original[q * k2 + swap(p)] + original[swap(q) * k2 + swap(p)];
                        count += 2.0;
                    }
                    marginal[q * k2 + p] = total / count;
                }
            }
        }
    }
}

/// Photon information efficiency, bits per received photon.
pub fn pie(bits_per_use: f64, n_s: f64) -> Result<f64> {
    if !(n_s > 0.0) {
        return Err(Error::domain(format!(
            "PIE needs a positive energy, got {n_s}"
        )));
    }
    Ok(bits_per_use / n_s)
}

/// `(I / C_baseline, I / C_DD - 1)`.
pub fn ratio_and_gain(bits_per_use: f64, n_s: f64, baseline: Baseline) -> Result<(f64, f64)> {
    if !(n_s > 0.0) {
        return Err(Error::domain(format!(
            "ratio and gain need a positive energy, got {n_s}"
        )));
    }
    let reference = baseline.capacity(n_s)?;
    let dd = dd_upper_bound(n_s)?;
    if reference == 0.0 || dd == 0.0 {
        return Err(Error::domain(format!(
            "baseline capacity vanishes at n_s = {n_s}"
        )));
    }
    Ok((bits_per_use / reference, bits_per_use / dd - 1.0))
}

/// Rate of one receiver/prior pair together with the maximizing parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateResult {
    pub bits_per_use: f64,
    pub pie_bits_per_photon: f64,
    pub z_opt: f64,
    /// Gamma shape at the optimum; present only for the non-Gaussian search.
    pub nu_opt: Option<Shape>,
    pub scheme: ModulationScheme,
    pub detector: DetectorKind,
    pub resolution: PnrResolution,
}

impl RateResult {
    pub fn new(
        bits_per_use: f64,
        z_opt: f64,
        nu_opt: Option<Shape>,
        scheme: ModulationScheme,
        detector: DetectorKind,
        resolution: PnrResolution,
    ) -> Self {
        let n_s = scheme.mean_energy();
        let pie_bits_per_photon = if n_s > 0.0 { bits_per_use / n_s } else { 0.0 };
        Self {
            bits_per_use,
            pie_bits_per_photon,
            z_opt,
            nu_opt,
            scheme,
            detector,
            resolution,
        }
    }

    /// Ratio to the matching Shannon capacity and gain over the DD bound.
    pub fn ratio_and_gain(&self) -> Result<(f64, f64)> {
        ratio_and_gain(
            self.bits_per_use,
            self.scheme.mean_energy(),
            self.detector.shannon_baseline(),
        )
    }
}
