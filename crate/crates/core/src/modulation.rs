//! Input priors over coherent amplitudes and the rules used to average over
//! them.
//!
//! * Gaussian, single quadrature: `x ~ N(0, n_S)`.
//! * Gaussian, both quadratures: `x, y ~ N(0, n_S / 2)` independently.
//! * Gamma energy (non-Gaussian): `x^2 ~ Gamma(nu, n_S / nu)` with a random
//!   sign. `nu = 1/2` is the Gaussian prior again and `nu -> inf` tends to the
//!   binary prior `+/- sqrt(n_S)` (BPSK), which is kept as its own kind.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::detectors::CoherentAmplitude;
use crate::error::{Error, Result};
use crate::quadrature::{gauss_hermite, gauss_laguerre};

pub const DEFAULT_UNI_NODES: usize = 64;
pub const DEFAULT_BI_NODES: usize = 48;
pub const DEFAULT_GAMMA_NODES: usize = 64;
pub const MIN_NODES: usize = 8;

/// Shape parameter of the Gamma energy prior, with BPSK as the `nu -> inf`
/// member.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Shape {
    Finite(f64),
    Bpsk,
}

impl Shape {
    pub const GAUSSIAN: Shape = Shape::Finite(0.5);

    /// `nu` as a float, `inf` for BPSK.
    pub fn value(self) -> f64 {
        match self {
            Shape::Finite(nu) => nu,
            Shape::Bpsk => f64::INFINITY,
        }
    }

    pub fn is_gaussian(self) -> bool {
        self == Self::GAUSSIAN
    }
}

impl std::fmt::Display for Shape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Shape::Finite(nu) => write!(f, "{nu}"),
            Shape::Bpsk => f.write_str("inf"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModulationKind {
    GaussianUni,
    GaussianBi,
    GammaUni,
    BpskUni,
}

impl ModulationKind {
    pub fn label(self) -> &'static str {
        match self {
            ModulationKind::GaussianUni => "gaussian",
            ModulationKind::GaussianBi => "gaussian_bi",
            ModulationKind::GammaUni => "gamma",
            ModulationKind::BpskUni => "bpsk",
        }
    }
}

/// Prior over coherent amplitudes with mean received energy `n_s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ModulationScheme {
    GaussianUni { n_s: f64 },
    GaussianBi { n_s: f64 },
    GammaUni { n_s: f64, nu: f64 },
    BpskUni { n_s: f64 },
}

fn check_energy(n_s: f64) -> Result<()> {
    if !n_s.is_finite() || n_s < 0.0 {
        return Err(Error::domain(format!(
            "mean received energy must be finite and non-negative, got {n_s}"
        )));
    }
    Ok(())
}

impl ModulationScheme {
    pub fn gaussian_uni(n_s: f64) -> Result<Self> {
        check_energy(n_s)?;
        Ok(Self::GaussianUni { n_s })
    }

    pub fn gaussian_bi(n_s: f64) -> Result<Self> {
        check_energy(n_s)?;
        Ok(Self::GaussianBi { n_s })
    }

    pub fn gamma_uni(n_s: f64, nu: f64) -> Result<Self> {
        check_energy(n_s)?;
        if !nu.is_finite() || nu < 0.5 {
            return Err(Error::domain(format!(
                "Gamma shape must be finite and at least 1/2, got {nu}"
            )));
        }
        Ok(Self::GammaUni { n_s, nu })
    }

    pub fn bpsk(n_s: f64) -> Result<Self> {
        check_energy(n_s)?;
        Ok(Self::BpskUni { n_s })
    }

    /// Single-quadrature prior for a given shape; `nu = 1/2` is returned as
    /// the plain Gaussian kind.
    pub fn single_quadrature(n_s: f64, shape: Shape) -> Result<Self> {
        match shape {
            Shape::Bpsk => Self::bpsk(n_s),
            s if s.is_gaussian() => Self::gaussian_uni(n_s),
            Shape::Finite(nu) => Self::gamma_uni(n_s, nu),
        }
    }

    pub fn kind(&self) -> ModulationKind {
        match self {
            Self::GaussianUni { .. } => ModulationKind::GaussianUni,
            Self::GaussianBi { .. } => ModulationKind::GaussianBi,
            Self::GammaUni { .. } => ModulationKind::GammaUni,
            Self::BpskUni { .. } => ModulationKind::BpskUni,
        }
    }

    pub fn mean_energy(&self) -> f64 {
        match *self {
            Self::GaussianUni { n_s }
            | Self::GaussianBi { n_s }
            | Self::GammaUni { n_s, .. }
            | Self::BpskUni { n_s } => n_s,
        }
    }

    pub fn is_bivariate(&self) -> bool {
        matches!(self, Self::GaussianBi { .. })
    }

    /// Shape parameter of the energy prior; Gaussian single-quadrature is
    /// `nu = 1/2`, the two-quadrature Gaussian has none.
    pub fn shape(&self) -> Option<Shape> {
        match *self {
            Self::GaussianUni { .. } => Some(Shape::GAUSSIAN),
            Self::GaussianBi { .. } => None,
            Self::GammaUni { nu, .. } => Some(Shape::Finite(nu)),
            Self::BpskUni { .. } => Some(Shape::Bpsk),
        }
    }

    /// Variance of each modulated quadrature amplitude, for the Gaussian kinds.
    pub fn quadrature_variance(&self) -> Option<f64> {
        match *self {
            Self::GaussianUni { n_s } => Some(n_s),
            Self::GaussianBi { n_s } => Some(n_s / 2.0),
            _ => None,
        }
    }
}

/// `N_{sigma2}(x) = exp(-x^2 / (2 sigma2)) / sqrt(2 pi sigma2)`.
pub fn gaussian_density(x: f64, sigma2: f64) -> Result<f64> {
    if !(sigma2 > 0.0) || !sigma2.is_finite() {
        return Err(Error::domain(format!(
            "Gaussian variance must be positive, got {sigma2}"
        )));
    }
    Ok((-x * x / (2.0 * sigma2)).exp() / (2.0 * PI * sigma2).sqrt())
}

/// Density of the amplitude `x = +/- sqrt(eps)` when `eps ~ Gamma(nu, n_s / nu)`.
pub fn gamma_amplitude_density(x: f64, nu: f64, n_s: f64) -> Result<f64> {
    if !nu.is_finite() || nu < 0.5 {
        return Err(Error::domain(format!(
            "Gamma shape must be at least 1/2 for a non-singular density, got {nu}"
        )));
    }
    if !(n_s > 0.0) || !n_s.is_finite() {
        return Err(Error::domain(format!(
            "mean energy must be positive, got {n_s}"
        )));
    }
    let x2 = x * x;
    let power = nu - 0.5;
    let log_x2_term = if power == 0.0 {
        0.0
    } else if x2 == 0.0 {
        return Ok(0.0);
    } else {
        power * x2.ln()
    };
    let ln_norm = nu * nu.ln() - ln_gamma(nu) - nu * n_s.ln();
    Ok((ln_norm + log_x2_term - nu * x2 / n_s).exp())
}

/// Mirror images represented by each node of a folded rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum Symmetry {
    /// Every node stands for itself only.
    #[default]
    None,
    /// Nodes have `re >= 0`; each also stands for `(-re, im)`.
    MirrorRe,
    /// Nodes have `re, im >= 0`; each stands for all four sign flips.
    MirrorBoth,
}

impl Symmetry {
    /// Images of `alpha` represented by a node, itself first.
    pub fn images(self, alpha: CoherentAmplitude) -> impl Iterator<Item = CoherentAmplitude> {
        let CoherentAmplitude { re, im } = alpha;
        let all = [(re, im), (-re, im), (re, -im), (-re, -im)];
        let count = match self {
            Symmetry::None => 1,
            Symmetry::MirrorRe => 2,
            Symmetry::MirrorBoth => 4,
        };
        all.into_iter()
            .take(count)
            .map(|(re, im)| CoherentAmplitude { re, im })
    }
}

/// Nodes and unit-sum weights for averaging over a prior.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<CoherentAmplitude>,
    weights: Vec<f64>,
    symmetry: Symmetry,
}

impl QuadratureRule {
    pub fn new(nodes: Vec<CoherentAmplitude>, weights: Vec<f64>) -> Result<Self> {
        Self::folded(nodes, weights, Symmetry::None)
    }

    /// A rule whose nodes each stand for their mirror images under
    /// `symmetry`; the weights carry the total mass of all images.
    pub fn folded(
        nodes: Vec<CoherentAmplitude>,
        weights: Vec<f64>,
        symmetry: Symmetry,
    ) -> Result<Self> {
        let in_domain = |a: &CoherentAmplitude| match symmetry {
            Symmetry::None => true,
            Symmetry::MirrorRe => a.re >= 0.0,
            Symmetry::MirrorBoth => a.re >= 0.0 && a.im >= 0.0,
        };
        if !nodes.iter().all(in_domain) {
            return Err(Error::config(format!(
                "folded rule ({symmetry:?}) has nodes outside its fundamental domain"
            )));
        }
        if nodes.is_empty() || nodes.len() != weights.len() {
            return Err(Error::config(
                "quadrature rule needs matching, non-empty node and weight lists",
            ));
        }
        if weights.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
            return Err(Error::config("quadrature weights must be positive"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::config(format!(
                "quadrature weights must sum to 1, got {total}"
            )));
        }
        Ok(Self {
            nodes,
            weights,
            symmetry,
        })
    }

    pub fn nodes(&self) -> &[CoherentAmplitude] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn symmetry(&self) -> Symmetry {
        self.symmetry
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (CoherentAmplitude, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }

    /// `sum_i w_i f(alpha_i)`, averaging `f` over the images of folded nodes.
    pub fn integrate(&self, mut f: impl FnMut(CoherentAmplitude) -> f64) -> f64 {
        let symmetry = self.symmetry;
        self.iter()
            .map(|(a, w)| {
                let (sum, count) = symmetry
                    .images(a)
                    .fold((0.0, 0.0), |(s, c), image| (s + f(image), c + 1.0));
                w * sum / count
            })
            .sum()
    }

    pub(crate) fn point_mass(alpha: CoherentAmplitude) -> Self {
        Self {
            nodes: vec![alpha],
            weights: vec![1.0],
            symmetry: Symmetry::None,
        }
    }
}

/// Builds the averaging rule for `scheme`.
///
/// `node_count` is the number of Gauss points per quadrature for the Gaussian
/// kinds (the two-quadrature rule is the `node_count^2` tensor product) and
/// the number of energy points for the Gamma kind (each mirrored to `+/- x`).
/// BPSK is always the exact two-point rule. A prior with zero energy
/// collapses to the single vacuum node.
pub fn build_rule(scheme: &ModulationScheme, node_count: usize) -> Result<QuadratureRule> {
    if node_count < MIN_NODES {
        return Err(Error::config(format!(
            "quadrature needs at least {MIN_NODES} nodes, got {node_count}"
        )));
    }
    if scheme.mean_energy() == 0.0 {
        return Ok(QuadratureRule::point_mass(CoherentAmplitude::zero()));
    }
    let rule = match *scheme {
        ModulationScheme::GaussianUni { n_s } => {
            let (t, w) = gauss_hermite(node_count);
            let scale = (2.0 * n_s).sqrt();
            QuadratureRule {
                nodes: t.iter().map(|&t| CoherentAmplitude::real(scale * t)).collect(),
                weights: w,
                symmetry: Symmetry::None,
            }
        }
        ModulationScheme::GaussianBi { n_s } => {
            let (t, w) = gauss_hermite(node_count);
            // per-quadrature variance n_s / 2
            let scale = n_s.sqrt();
            let mut nodes = Vec::with_capacity(node_count * node_count);
            let mut weights = Vec::with_capacity(node_count * node_count);
            for (&tx, &wx) in t.iter().zip(&w) {
                for (&ty, &wy) in t.iter().zip(&w) {
                    nodes.push(CoherentAmplitude {
                        re: scale * tx,
                        im: scale * ty,
                    });
                    weights.push(wx * wy);
                }
            }
            QuadratureRule {
                nodes,
                weights,
                symmetry: Symmetry::None,
            }
        }
        ModulationScheme::GammaUni { n_s, nu } => {
            // eps = t n_s / nu with t ~ t^{nu-1} e^{-t}
            let (t, w) = gauss_laguerre(node_count, nu - 1.0);
            let mut nodes = Vec::with_capacity(2 * node_count);
            let mut weights = Vec::with_capacity(2 * node_count);
            for (&ti, &wi) in t.iter().zip(&w).rev() {
                nodes.push(CoherentAmplitude::real(-(ti * n_s / nu).sqrt()));
                weights.push(0.5 * wi);
            }
            for (&ti, &wi) in t.iter().zip(&w) {
                nodes.push(CoherentAmplitude::real((ti * n_s / nu).sqrt()));
                weights.push(0.5 * wi);
            }
            QuadratureRule {
                nodes,
                weights,
                symmetry: Symmetry::None,
            }
        }
        ModulationScheme::BpskUni { n_s } => {
            let x = n_s.sqrt();
            QuadratureRule {
                nodes: vec![CoherentAmplitude::real(x), CoherentAmplitude::real(-x)],
                weights: vec![0.5, 0.5],
                symmetry: Symmetry::None,
            }
        }
    };
    Ok(rule)
}

/// Node counts per prior family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeCounts {
    pub uni: usize,
    pub bi: usize,
    pub gamma: usize,
}

impl Default for NodeCounts {
    fn default() -> Self {
        Self {
            uni: DEFAULT_UNI_NODES,
            bi: DEFAULT_BI_NODES,
            gamma: DEFAULT_GAMMA_NODES,
        }
    }
}

impl NodeCounts {
    pub fn doubled(self) -> Self {
        Self {
            uni: 2 * self.uni,
            bi: 2 * self.bi,
            gamma: 2 * self.gamma,
        }
    }

    pub fn for_scheme(&self, scheme: &ModulationScheme) -> usize {
        match scheme.kind() {
            ModulationKind::GaussianUni => self.uni,
            ModulationKind::GaussianBi => self.bi,
            ModulationKind::GammaUni => self.gamma,
            // exact two-point rule, the count is only validated
            ModulationKind::BpskUni => MIN_NODES,
        }
    }

    pub fn rule(&self, scheme: &ModulationScheme) -> Result<QuadratureRule> {
        build_rule(scheme, self.for_scheme(scheme))
    }
}
