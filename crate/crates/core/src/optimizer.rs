//! Maximization of the mutual information over the LO energy `z^2`, and over
//! `(z, nu)` for the Gamma energy prior.
//!
//! The search runs in `u = ln z^2`: a log-spaced coarse scan, then
//! golden-section refinement inside the neighbouring grid cells of the best
//! few coarse points. No unimodality is assumed.

use serde::{Deserialize, Serialize};

use crate::adaptive::{QuadraturePlan, Refinement};
use crate::error::{Error, Result};
use crate::information::{planned_information, Detector, DetectorKind};
use crate::modulation::{ModulationScheme, Shape};
use crate::numeric::log_space;
use crate::pnr::PnrResolution;

const INV_PHI: f64 = 0.618_033_988_749_894_8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerSettings {
    pub z2_min: f64,
    pub z2_max: f64,
    pub coarse_points: usize,
    /// Relative tolerance on `z^2` of the golden-section refinement.
    pub refine_tol: f64,
    /// Number of best coarse points refined independently.
    pub starts: usize,
    pub nu_grid: Vec<Shape>,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self {
            z2_min: 1e-6,
            z2_max: 1e2,
            coarse_points: 25,
            refine_tol: 1e-3,
            starts: 3,
            nu_grid: default_nu_grid(0.6, 1e3, 25),
        }
    }
}

/// `{1/2}`, `points` log-spaced shapes in `[lo, hi]`, and BPSK.
pub fn default_nu_grid(lo: f64, hi: f64, points: usize) -> Vec<Shape> {
    std::iter::once(Shape::GAUSSIAN)
        .chain(log_space(lo, hi, points).into_iter().map(Shape::Finite))
        .chain(std::iter::once(Shape::Bpsk))
        .collect()
}

impl OptimizerSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.z2_min > 0.0 && self.z2_min < self.z2_max && self.z2_max.is_finite()) {
            return Err(Error::config(format!(
                "need 0 < z2_min < z2_max, got [{}, {}]",
                self.z2_min, self.z2_max
            )));
        }
        if self.coarse_points < 3 {
            return Err(Error::config("coarse scan needs at least 3 points"));
        }
        if !(self.refine_tol > 0.0) {
            return Err(Error::config("refine_tol must be positive"));
        }
        if self.starts == 0 {
            return Err(Error::config("at least one refinement start is required"));
        }
        if self.nu_grid.is_empty() {
            return Err(Error::config("nu grid is empty"));
        }
        for s in &self.nu_grid {
            if let Shape::Finite(nu) = s {
                if !(nu.is_finite() && *nu >= 0.5) {
                    return Err(Error::config(format!("nu grid value {nu} is below 1/2")));
                }
            }
        }
        Ok(())
    }

    fn coarse_grid(&self) -> Vec<f64> {
        let (a, b) = (self.z2_min.ln(), self.z2_max.ln());
        let last = (self.coarse_points - 1) as f64;
        (0..self.coarse_points)
            .map(|i| a + (b - a) * i as f64 / last)
            .collect()
    }
}

/// Maximizer over the LO amplitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZOptimum {
    pub z_opt: f64,
    pub bits: f64,
    /// Size of the averaging rule at the optimum.
    pub nodes: usize,
}

impl ZOptimum {
    pub fn z2_opt(&self) -> f64 {
        self.z_opt * self.z_opt
    }
}

/// Golden-section maximization of `f` on `[a, b]` until the bracket is
/// narrower than `tol`. Returns the best point seen.
pub fn golden_section_max<F>(mut f: F, a: f64, b: f64, tol: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let (mut a, mut b) = if a <= b { (a, b) } else { (b, a) };
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    let mut best = if fd > fc { (d, fd) } else { (c, fc) };
    while b - a > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c)?;
            if fc > best.1 {
                best = (c, fc);
            }
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d)?;
            if fd > best.1 {
                best = (d, fd);
            }
        }
    }
    Ok(best)
}

/// A point of the search: `u = ln z^2`, the rate there and the rule size.
#[derive(Debug, Clone, Copy)]
struct Probe {
    u: f64,
    bits: f64,
    nodes: usize,
}

impl Probe {
    fn optimum(self) -> ZOptimum {
        ZOptimum {
            z_opt: (0.5 * self.u).exp(),
            bits: self.bits,
            nodes: self.nodes,
        }
    }
}

/// The objective of one search: rate of a receiver as a function of `u`.
struct Objective<'a> {
    kind: DetectorKind,
    resolution: PnrResolution,
    scheme: &'a ModulationScheme,
    plan: &'a QuadraturePlan,
}

impl Objective<'_> {
    fn probe(&self, u: f64) -> Result<Probe> {
        let z = (0.5 * u).exp();
        let detector = Detector::new(self.kind, self.resolution, z)?;
        let (bits, nodes) = planned_information(&detector, self.scheme, self.plan)?;
        if !bits.is_finite() {
            return Err(Error::numeric(
                format!("z^2 = {:e}", z * z),
                "objective is not finite",
            ));
        }
        Ok(Probe { u, bits, nodes })
    }

    fn scan(&self, settings: &OptimizerSettings) -> Result<Vec<Probe>> {
        settings
            .coarse_grid()
            .into_iter()
            .map(|u| self.probe(u))
            .collect()
    }

    /// Golden-section refinement inside the grid cells adjacent to coarse
    /// point `i`; never worse than the coarse point itself.
    fn refine_around(&self, settings: &OptimizerSettings, scan: &[Probe], i: usize) -> Result<Probe> {
        let lo = scan[i.saturating_sub(1)].u;
        let hi = scan[(i + 1).min(scan.len() - 1)].u;
        let tol = settings.refine_tol.ln_1p();
        let mut best = scan[i];
        golden_section_max(
            |u| {
                let p = self.probe(u)?;
                if p.bits > best.bits {
                    best = p;
                }
                Ok(p.bits)
            },
            lo,
            hi,
            tol,
        )?;
        Ok(best)
    }
}

/// Indices of the `count` best coarse points, best first.
fn best_indices(scan: &[Probe], count: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scan.len()).collect();
    idx.sort_by(|&i, &j| scan[j].bits.total_cmp(&scan[i].bits).then(i.cmp(&j)));
    idx.truncate(count);
    idx
}

/// Maximizes the mutual information of `kind` over the LO energy.
///
/// The returned value is never below the best coarse-grid value.
pub fn optimize_z(
    kind: DetectorKind,
    resolution: PnrResolution,
    scheme: &ModulationScheme,
    plan: &QuadraturePlan,
    settings: &OptimizerSettings,
) -> Result<ZOptimum> {
    settings.validate()?;
    let objective = Objective {
        kind,
        resolution,
        scheme,
        plan,
    };
    let scan = objective.scan(settings)?;
    let mut best = scan[best_indices(&scan, 1)[0]];
    for i in best_indices(&scan, settings.starts) {
        let candidate = objective.refine_around(settings, &scan, i)?;
        if candidate.bits > best.bits {
            best = candidate;
        }
    }
    Ok(best.optimum())
}

/// Refinements started independently from each of the `count` best coarse
/// points, best start first. Exposed for self-consistency checks.
pub fn refine_from_best_starts(
    kind: DetectorKind,
    resolution: PnrResolution,
    scheme: &ModulationScheme,
    plan: &QuadraturePlan,
    settings: &OptimizerSettings,
    count: usize,
) -> Result<Vec<ZOptimum>> {
    settings.validate()?;
    let objective = Objective {
        kind,
        resolution,
        scheme,
        plan,
    };
    let scan = objective.scan(settings)?;
    best_indices(&scan, count)
        .into_iter()
        .map(|i| objective.refine_around(settings, &scan, i).map(Probe::optimum))
        .collect()
}

/// Joint optimum of the WH rate over the LO amplitude and the prior shape.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZNuOptimum {
    pub z_opt: f64,
    pub nu_opt: Shape,
    pub bits: f64,
    pub nodes: usize,
}

/// Maximizes the single-quadrature WH rate over `z` and the Gamma shape
/// `nu` from `settings.nu_grid` (BPSK standing in for `nu -> inf`).
///
/// Ties keep the earlier grid entry, so `nu = 1/2` wins whenever no shape
/// improves on the Gaussian prior.
pub fn optimize_z_nu(
    resolution: PnrResolution,
    n_s: f64,
    settings: &OptimizerSettings,
    refinement: &Refinement,
) -> Result<ZNuOptimum> {
    settings.validate()?;
    let plan = QuadraturePlan::Adapted(*refinement);
    let mut best: Option<ZNuOptimum> = None;
    for &shape in &settings.nu_grid {
        let scheme = ModulationScheme::single_quadrature(n_s, shape)?;
        let opt = optimize_z(DetectorKind::Wh, resolution, &scheme, &plan, settings)?;
        if best.map_or(true, |b| opt.bits > b.bits) {
            best = Some(ZNuOptimum {
                z_opt: opt.z_opt,
                nu_opt: shape,
                bits: opt.bits,
                nodes: opt.nodes,
            });
        }
    }
    // validate() guarantees a non-empty grid
    Ok(best.expect("non-empty nu grid"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_section_finds_parabola_peak() {
        let (x, fx) = golden_section_max(|x| Ok(-(x - 0.3) * (x - 0.3) + 2.0), -1.0, 2.0, 1e-8)
            .unwrap();
        assert!((x - 0.3).abs() < 1e-7);
        assert!((fx - 2.0).abs() < 1e-12);
    }

    #[test]
    fn golden_section_propagates_errors() {
        let r = golden_section_max(|_| Err(Error::numeric("here", "boom")), 0.0, 1.0, 1e-3);
        assert!(matches!(r, Err(Error::Numeric { .. })));
    }

    #[test]
    fn default_grid_contents() {
        let s = OptimizerSettings::default();
        assert_eq!(s.nu_grid.len(), 27);
        assert_eq!(s.nu_grid[0], Shape::GAUSSIAN);
        assert_eq!(*s.nu_grid.last().unwrap(), Shape::Bpsk);
        assert_eq!(s.nu_grid[1], Shape::Finite(0.6));
        assert_eq!(s.nu_grid[25], Shape::Finite(1e3));
        let grid = s.coarse_grid();
        assert_eq!(grid.len(), 25);
        assert!((grid[0] - 1e-6f64.ln()).abs() < 1e-12);
        assert!((grid[24] - 1e2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn settings_validation() {
        let mut s = OptimizerSettings::default();
        s.z2_min = 10.0;
        s.z2_max = 1.0;
        assert!(s.validate().is_err());
        let mut s = OptimizerSettings::default();
        s.refine_tol = 0.0;
        assert!(s.validate().is_err());
        let mut s = OptimizerSettings::default();
        s.nu_grid = vec![Shape::Finite(0.2)];
        assert!(s.validate().is_err());
    }

    #[test]
    fn zero_energy_objective_is_flat() {
        let m = PnrResolution::new(3).unwrap();
        let scheme = ModulationScheme::gaussian_uni(0.0).unwrap();
        let plan = QuadraturePlan::default();
        let opt = optimize_z(DetectorKind::Wh, m, &scheme, &plan, &OptimizerSettings::default())
            .unwrap();
        assert_eq!(opt.bits, 0.0);
        assert!(opt.z_opt > 0.0);
    }
}
