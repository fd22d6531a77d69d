//! Composite Gauss-Legendre rules adapted to a receiver.
//!
//! Away from a few points the conditional output law of a weak-field receiver
//! is analytic in the signal amplitude. Where one of its detectors sees the
//! vacuum (`mu = 0`), the click probabilities vanish like powers of the
//! distance and the conditional entropy picks up `r^2 log r` terms, which a
//! Gauss rule for the prior alone resolves only algebraically. The rules here
//! put panel edges on those points and grade geometrically towards them (one
//! quadrature) or use a Duffy map on the cells that touch them (two
//! quadratures). Inside a window around each LO displacement panels are sized
//! to the click-statistics scale; outside it every detector is saturated and
//! panels follow the prior.
//!
//! The priors and the receivers are symmetric under sign flips of the
//! amplitude, so the rules are folded onto `re >= 0` (and `im >= 0`).

use std::borrow::Cow;

use serde::{Deserialize, Serialize};

use crate::detectors::CoherentAmplitude;
use crate::error::{Error, Result};
use crate::information::{Detector, DetectorKind};
use crate::modulation::{
    build_rule, gamma_amplitude_density, ModulationScheme, QuadratureRule, Symmetry, MIN_NODES,
};
use crate::pnr::PnrResolution;
use crate::quadrature::gauss_legendre;

/// Half-width of the Gaussian support in standard deviations.
const TAIL_SIGMAS: f64 = 9.0;

/// Ratio between consecutive graded panels.
const GRADING_RATIO: f64 = 0.3;

/// Resolution of the adapted rules.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Refinement {
    /// Gauss-Legendre points per panel (per side for two quadratures).
    pub order: usize,
    /// Panel width inside the detectors' active windows, in units of the
    /// amplitude reaching a detector arm.
    pub fine_width: f64,
    /// Panel width outside the windows, as a fraction of the prior's scale.
    pub prior_width: f64,
    /// Geometric panels between a vacuum point and its neighbouring panel.
    pub grading_levels: usize,
}

impl Default for Refinement {
    fn default() -> Self {
        Self {
            order: 8,
            fine_width: 1.0,
            prior_width: 0.5,
            grading_levels: 8,
        }
    }
}

impl Refinement {
    /// Same panels with twice the points in each.
    pub fn doubled(self) -> Self {
        Self {
            order: 2 * self.order,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.order < 2 {
            return Err(Error::config("panel order must be at least 2"));
        }
        if !(self.fine_width > 1e-3 && self.fine_width.is_finite()) {
            return Err(Error::config(format!(
                "fine panel width must lie above 1e-3, got {}",
                self.fine_width
            )));
        }
        if !(self.prior_width > 1e-3 && self.prior_width.is_finite()) {
            return Err(Error::config(format!(
                "prior panel width must lie above 1e-3, got {}",
                self.prior_width
            )));
        }
        Ok(())
    }
}

/// Mean arm energy beyond which every outcome of a PNR(M) detector is the
/// saturation bin to double precision.
fn saturation_energy(resolution: PnrResolution) -> f64 {
    let m = resolution.get() as f64;
    m + 8.0 * m.sqrt() + 30.0
}

/// Panels tiling `[lo, hi]`.
///
/// `graded` points get a panel edge and geometric refinement on both sides;
/// `windows` are intervals meshed at `fine` rather than `coarse`.
fn panels_1d(
    lo: f64,
    hi: f64,
    graded: &[f64],
    windows: &[(f64, f64)],
    fine: f64,
    coarse: f64,
    levels: usize,
) -> Vec<(f64, f64)> {
    let mut cuts = vec![lo, hi];
    let inside = |x: f64| x > lo && x < hi;
    cuts.extend(graded.iter().copied().filter(|&x| inside(x)));
    for &(a, b) in windows {
        cuts.extend([a, b].into_iter().filter(|&x| inside(x)));
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let is_graded = |x: f64| graded.contains(&x);
    let in_window = |x: f64| windows.iter().any(|&(a, b)| x >= a && x <= b);
    let mut panels = Vec::new();
    for seg in cuts.windows(2) {
        let (u, v) = (seg[0], seg[1]);
        let width = if in_window(0.5 * (u + v)) {
            fine.min(coarse)
        } else {
            coarse
        };
        let mut count = ((v - u) / width).ceil().max(1.0) as usize;
        if count == 1 && is_graded(u) && is_graded(v) {
            count = 2;
        }
        let edge = |i: usize| match i {
            0 => u,
            i if i == count => v,
            i => u + (v - u) * i as f64 / count as f64,
        };
        for i in 0..count {
            let (a, b) = (edge(i), edge(i + 1));
            if i == 0 && is_graded(a) {
                push_graded(&mut panels, a, b, levels);
            } else if i + 1 == count && is_graded(b) {
                push_graded(&mut panels, b, a, levels);
            } else {
                panels.push((a, b));
            }
        }
    }
    panels
}

/// Splits the panel between `point` and `far` geometrically towards `point`.
fn push_graded(panels: &mut Vec<(f64, f64)>, point: f64, far: f64, levels: usize) {
    let span = far - point;
    let mut edges: Vec<f64> = (0..=levels)
        .map(|k| point + span * GRADING_RATIO.powi(k as i32))
        .collect();
    edges.push(point);
    edges[0] = far;
    if point < far {
        edges.reverse();
    }
    panels.extend(edges.windows(2).map(|w| (w[0], w[1])));
}

/// Gauss-Legendre nodes and unit-mass weights on `[0, 1]`.
fn unit_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    let (t, w) = gauss_legendre(order);
    (t.iter().map(|&t| 0.5 * (1.0 + t)).collect(), w)
}

/// Collects positive-weight nodes and normalizes them to unit mass.
fn finish(
    nodes: Vec<CoherentAmplitude>,
    weights: Vec<f64>,
    symmetry: Symmetry,
) -> Result<QuadratureRule> {
    let mut kept_nodes = Vec::with_capacity(nodes.len());
    let mut kept_weights = Vec::with_capacity(nodes.len());
    for (a, w) in nodes.into_iter().zip(weights) {
        if !w.is_finite() {
            return Err(Error::numeric(
                format!("node ({}, {})", a.re, a.im),
                "prior density is not finite",
            ));
        }
        if w > 0.0 {
            kept_nodes.push(a);
            kept_weights.push(w);
        }
    }
    let total: f64 = kept_weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::numeric("adapted rule", "prior mass vanished"));
    }
    kept_weights.iter_mut().for_each(|w| *w /= total);
    QuadratureRule::folded(kept_nodes, kept_weights, symmetry)
}

fn rule_1d(
    panels: &[(f64, f64)],
    order: usize,
    mut density: impl FnMut(f64) -> f64,
) -> Result<QuadratureRule> {
    let (s, w) = unit_legendre(order);
    let mut nodes = Vec::with_capacity(panels.len() * order);
    let mut weights = Vec::with_capacity(panels.len() * order);
    for &(a, b) in panels {
        for (&si, &wi) in s.iter().zip(&w) {
            let x = a + (b - a) * si;
            nodes.push(CoherentAmplitude::real(x));
            weights.push((b - a) * wi * density(x));
        }
    }
    finish(nodes, weights, Symmetry::MirrorRe)
}

fn gaussian_shape(x: f64, sigma2: f64) -> f64 {
    (-0.5 * x * x / sigma2).exp()
}

/// Folded single-quadrature rule for a Gaussian or Gamma prior and a WH/HL
/// receiver with real LO amplitude `z`.
fn uni_rule(
    scheme: &ModulationScheme,
    resolution: PnrResolution,
    z: f64,
    refinement: &Refinement,
) -> Result<QuadratureRule> {
    let radius = (2.0 * saturation_energy(resolution)).sqrt();
    let windows = [(z - radius, z + radius)];
    let fine = refinement.fine_width;
    match *scheme {
        ModulationScheme::GaussianUni { n_s } => {
            let sigma = n_s.sqrt();
            let panels = panels_1d(
                0.0,
                TAIL_SIGMAS * sigma,
                &[z],
                &windows,
                fine,
                refinement.prior_width * sigma,
                refinement.grading_levels,
            );
            rule_1d(&panels, refinement.order, |x| gaussian_shape(x, n_s))
        }
        ModulationScheme::GammaUni { n_s, nu } => {
            // energy support of Gamma(nu, n_s / nu) to ~1e-20 tail mass
            let theta = n_s / nu;
            let hi = (theta * (nu + 12.0 * nu.sqrt() + 45.0)).sqrt();
            let lo = (theta * (nu - 12.0 * nu.sqrt()).max(0.0)).sqrt();
            let scale = (n_s / (4.0 * nu)).sqrt();
            // |x|^(2 nu - 1) is singular at the origin
            let graded: Vec<f64> = if lo == 0.0 { vec![0.0, z] } else { vec![z] };
            let panels = panels_1d(
                lo,
                hi,
                &graded,
                &windows,
                fine,
                refinement.prior_width * scale,
                refinement.grading_levels,
            );
            let mut failure = None;
            let rule = rule_1d(&panels, refinement.order, |x| {
                gamma_amplitude_density(x, nu, n_s).unwrap_or_else(|e| {
                    failure = Some(e);
                    f64::NAN
                })
            });
            match failure {
                Some(e) => Err(e),
                None => rule,
            }
        }
        _ => Err(Error::config(format!(
            "no single-quadrature adapted rule for {:?}",
            scheme.kind()
        ))),
    }
}

/// Folded two-quadrature rule for the Gaussian prior and the DW receiver.
fn bi_rule(
    n_s: f64,
    resolution: PnrResolution,
    z: f64,
    refinement: &Refinement,
) -> Result<QuadratureRule> {
    let sigma2 = 0.5 * n_s;
    let sigma = sigma2.sqrt();
    let hi = TAIL_SIGMAS * sigma;
    // each arm receives alpha / sqrt(2); its detectors see the vacuum at
    // alpha = -/+ sqrt(2) z (q arm) and -/+ i sqrt(2) z (p arm)
    let c = std::f64::consts::SQRT_2 * z;
    let radius = 2.0 * saturation_energy(resolution).sqrt();
    let windows = [(-radius, radius), (c - radius, c + radius)];
    let fine = std::f64::consts::SQRT_2 * refinement.fine_width;
    let panels = panels_1d(
        0.0,
        hi,
        &[0.0, c],
        &windows,
        fine,
        refinement.prior_width * sigma,
        0,
    );
    let singular: Vec<(f64, f64)> = if c < hi {
        let mut pts = vec![(c, 0.0), (0.0, c)];
        pts.dedup();
        pts
    } else {
        Vec::new()
    };

    let order = refinement.order;
    let (s, w) = unit_legendre(order);
    let density = |x: f64, y: f64| gaussian_shape(x, sigma2) * gaussian_shape(y, sigma2);
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    for &(xa, xb) in &panels {
        for &(ya, yb) in &panels {
            let corner = singular.iter().copied().find(|&(px, py)| {
                (px == xa || px == xb) && (py == ya || py == yb)
            });
            match corner {
                None => {
                    let area = (xb - xa) * (yb - ya);
                    for (&si, &wi) in s.iter().zip(&w) {
                        let x = xa + (xb - xa) * si;
                        for (&sj, &wj) in s.iter().zip(&w) {
                            let y = ya + (yb - ya) * sj;
                            nodes.push(CoherentAmplitude { re: x, im: y });
                            weights.push(area * wi * wj * density(x, y));
                        }
                    }
                }
                Some((px, py)) => {
                    // Duffy map: the two triangles meeting at the corner are
                    // swept radially, the Jacobian cancels the singular scale
                    let fx = if px == xa { xb } else { xa };
                    let fy = if py == ya { yb } else { ya };
                    let area = ((fx - px) * (fy - py)).abs();
                    for (&si, &wi) in s.iter().zip(&w) {
                        for (&tj, &wj) in s.iter().zip(&w) {
                            let jac = area * wi * wj * si;
                            for (u, v) in [(si, si * tj), (si * tj, si)] {
                                let x = px + (fx - px) * u;
                                let y = py + (fy - py) * v;
                                nodes.push(CoherentAmplitude { re: x, im: y });
                                weights.push(jac * density(x, y));
                            }
                        }
                    }
                }
            }
        }
    }
    finish(nodes, weights, Symmetry::MirrorBoth)
}

/// Rule for averaging the output law of `kind` with LO amplitude `z` over
/// `scheme`.
///
/// BPSK and zero-energy priors get their exact rules from [`build_rule`].
pub fn adapted_rule(
    scheme: &ModulationScheme,
    kind: DetectorKind,
    resolution: PnrResolution,
    z: f64,
    refinement: &Refinement,
) -> Result<QuadratureRule> {
    refinement.validate()?;
    if !(z >= 0.0 && z.is_finite()) {
        return Err(Error::domain(format!(
            "LO amplitude must be finite and non-negative, got {z}"
        )));
    }
    if kind.is_bivariate() != scheme.is_bivariate() {
        return Err(Error::config(format!(
            "detector {} does not match prior {}",
            kind.label(),
            scheme.kind().label()
        )));
    }
    if scheme.mean_energy() == 0.0 {
        return build_rule(scheme, MIN_NODES);
    }
    match *scheme {
        ModulationScheme::BpskUni { .. } => build_rule(scheme, MIN_NODES),
        ModulationScheme::GaussianBi { n_s } => bi_rule(n_s, resolution, z, refinement),
        _ => uni_rule(scheme, resolution, z, refinement),
    }
}

/// How the prior average is discretized.
#[derive(Debug, Clone, PartialEq)]
pub enum QuadraturePlan {
    /// One rule for every LO setting.
    Fixed(QuadratureRule),
    /// A rule rebuilt for each receiver setting.
    Adapted(Refinement),
}

impl Default for QuadraturePlan {
    fn default() -> Self {
        QuadraturePlan::Adapted(Refinement::default())
    }
}

impl QuadraturePlan {
    pub fn rule_for(
        &self,
        detector: &Detector,
        scheme: &ModulationScheme,
    ) -> Result<Cow<'_, QuadratureRule>> {
        match self {
            QuadraturePlan::Fixed(rule) => Ok(Cow::Borrowed(rule)),
            QuadraturePlan::Adapted(refinement) => adapted_rule(
                scheme,
                detector.kind,
                detector.config.resolution(),
                detector.config.lo_amplitude(),
                refinement,
            )
            .map(Cow::Owned),
        }
    }

    /// The same plan with every node count doubled.
    pub fn doubled(&self, scheme: &ModulationScheme) -> Result<Self> {
        match self {
            QuadraturePlan::Adapted(r) => Ok(QuadraturePlan::Adapted(r.doubled())),
            QuadraturePlan::Fixed(rule) => {
                let n = match scheme.kind() {
                    crate::modulation::ModulationKind::GaussianBi => {
                        (rule.len() as f64).sqrt().round() as usize
                    }
                    crate::modulation::ModulationKind::GammaUni => rule.len() / 2,
                    _ => rule.len(),
                };
                Ok(QuadraturePlan::Fixed(build_rule(scheme, 2 * n.max(MIN_NODES / 2))?))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn res(m: u32) -> PnrResolution {
        PnrResolution::new(m).unwrap()
    }

    #[test]
    fn panels_tile_the_interval() {
        let p = panels_1d(0.0, 10.0, &[3.0], &[(1.0, 5.0)], 0.5, 2.0, 4);
        assert_eq!(p[0].0, 0.0);
        assert_eq!(p.last().unwrap().1, 10.0);
        for w in p.windows(2) {
            assert_eq!(w[0].1, w[1].0);
            assert!(w[0].0 < w[0].1);
        }
        // graded on both sides of 3
        let touching: Vec<_> = p.iter().filter(|&&(a, b)| a == 3.0 || b == 3.0).collect();
        assert_eq!(touching.len(), 2);
        for &&(a, b) in &touching {
            assert!(b - a < 0.5 * 0.3f64.powi(4) + 1e-12);
        }
    }

    #[test]
    fn adjacent_graded_points_are_separated() {
        let p = panels_1d(0.0, 1.0, &[0.0, 1.0], &[], 5.0, 5.0, 0);
        assert_eq!(p, vec![(0.0, 0.5), (0.5, 1.0)]);
    }

    #[test]
    fn gaussian_moments() {
        for n_s in [1e-6, 0.3, 10.0, 200.0] {
            let s = ModulationScheme::gaussian_uni(n_s).unwrap();
            let r = adapted_rule(&s, DetectorKind::Wh, res(5), 1.3, &Refinement::default()).unwrap();
            assert_eq!(r.symmetry(), Symmetry::MirrorRe);
            assert_relative_eq!(r.integrate(|a| a.re * a.re), n_s, max_relative = 1e-10);
            assert_relative_eq!(
                r.integrate(|a| a.re.powi(4)),
                3.0 * n_s * n_s,
                max_relative = 1e-10
            );
            assert!(r.integrate(|a| a.re).abs() < 1e-15);
        }
    }

    #[test]
    fn gamma_moments() {
        for (n_s, nu) in [(0.3, 0.7), (2.0, 3.0), (1e-3, 40.0), (5.0, 1e3)] {
            let s = ModulationScheme::gamma_uni(n_s, nu).unwrap();
            let r = adapted_rule(&s, DetectorKind::Hl, res(3), 0.8, &Refinement::default()).unwrap();
            assert_relative_eq!(r.integrate(|a| a.energy()), n_s, max_relative = 1e-9);
            // Var(eps) = n_s^2 / nu
            assert_relative_eq!(
                r.integrate(|a| a.energy().powi(2)),
                n_s * n_s * (1.0 + 1.0 / nu),
                max_relative = 1e-9
            );
        }
    }

    #[test]
    fn bivariate_moments() {
        for n_s in [1e-4, 2.0, 50.0] {
            let s = ModulationScheme::gaussian_bi(n_s).unwrap();
            let r = adapted_rule(&s, DetectorKind::Dw, res(3), 0.9, &Refinement::default()).unwrap();
            assert_eq!(r.symmetry(), Symmetry::MirrorBoth);
            assert_relative_eq!(r.integrate(|a| a.energy()), n_s, max_relative = 1e-10);
            assert_relative_eq!(r.integrate(|a| a.re * a.re), n_s / 2.0, max_relative = 1e-10);
            assert!(r.integrate(|a| a.re * a.im).abs() < 1e-14);
        }
    }

    #[test]
    fn duffy_cells_integrate_corner_singularity() {
        // E[r^2 log r] around the vacuum point of the q arm; reference from the
        // same prior on a much finer rule
        let s = ModulationScheme::gaussian_bi(2.0).unwrap();
        let z = 0.8;
        let c = std::f64::consts::SQRT_2 * z;
        let f = |a: CoherentAmplitude| {
            let r2 = (a.re + c).powi(2) + a.im * a.im;
            if r2 > 0.0 { r2 * r2.ln() } else { 0.0 }
        };
        let coarse = adapted_rule(&s, DetectorKind::Dw, res(2), z, &Refinement::default()).unwrap();
        let fine = Refinement {
            order: 24,
            ..Refinement::default()
        };
        let fine = adapted_rule(&s, DetectorKind::Dw, res(2), z, &fine).unwrap();
        let (a, b) = (coarse.integrate(f), fine.integrate(f));
        assert!((a - b).abs() < 1e-8, "{a} vs {b}");
    }

    #[test]
    fn mismatched_detector_is_rejected() {
        let s = ModulationScheme::gaussian_uni(1.0).unwrap();
        assert!(adapted_rule(&s, DetectorKind::Dw, res(2), 1.0, &Refinement::default()).is_err());
        let s = ModulationScheme::gaussian_bi(1.0).unwrap();
        assert!(adapted_rule(&s, DetectorKind::Wh, res(2), 1.0, &Refinement::default()).is_err());
    }

    #[test]
    fn exact_rules_pass_through() {
        let s = ModulationScheme::bpsk(0.4).unwrap();
        let r = adapted_rule(&s, DetectorKind::Wh, res(2), 1.0, &Refinement::default()).unwrap();
        assert_eq!(r.len(), 2);
        let s = ModulationScheme::gaussian_uni(0.0).unwrap();
        let r = adapted_rule(&s, DetectorKind::Wh, res(2), 1.0, &Refinement::default()).unwrap();
        assert_eq!(r.len(), 1);
    }
}
