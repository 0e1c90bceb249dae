//! Scattering problem definition: materials, the incoming plane wavelet,
//! external sources, scatterers and the named benchmark cases.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::femspace::FeSpace;

/// A point in the plane. One-dimensional problems use `x[1] = 0`.
pub type Point = [f64; 2];

/// Support half-width of the wavelet profile.
pub const XI0: f64 = PI;

/// Normalisation `3840 π (21 - 2π²)` of the wavelet profile.
fn psi_denominator() -> f64 {
    3840.0 * PI * (21.0 - 2.0 * PI * PI)
}

/// Wavelet profile `ψ(ξ) = (ξ-π)⁴(ξ+π)⁴ / (3840π(21-2π²))` on `(-π, π)`, zero elsewhere.
pub fn psi(xi: f64) -> f64 {
    if xi.abs() >= XI0 {
        return 0.0;
    }
    let a = (xi - PI) * (xi + PI);
    let a2 = a * a;
    a2 * a2 / psi_denominator()
}

/// Derivative of [`psi`].
pub fn psi_deriv(xi: f64) -> f64 {
    if xi.abs() >= XI0 {
        return 0.0;
    }
    let a = xi * xi - PI * PI;
    8.0 * xi * a * a * a / psi_denominator()
}

/// The compactly supported wavelet profile together with its support half-width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveletProfile {
    pub xi0: f64,
}

impl Default for WaveletProfile {
    fn default() -> Self {
        Self { xi0: XI0 }
    }
}

impl WaveletProfile {
    pub fn eval(&self, xi: f64) -> f64 {
        psi(xi)
    }

    /// `∫ e^{iξ} ψ(ξ) dξ` by composite Gauss–Legendre quadrature over the support.
    pub fn fourier_at_minus_one(&self, panels: usize) -> num_complex::Complex64 {
        let (x, w) = crate::femspace::basis::gauss_legendre(8);
        let a = -self.xi0;
        let h = 2.0 * self.xi0 / panels as f64;
        let mut acc = num_complex::Complex64::new(0.0, 0.0);
        for k in 0..panels {
            let lo = a + k as f64 * h;
            for (xi, wi) in x.iter().zip(&w) {
                let s = lo + xi * h;
                acc += num_complex::Complex64::from_polar(wi * h * psi(s), s);
            }
        }
        acc
    }
}

/// Axis-aligned box `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub lo: Point,
    pub hi: Point,
}

impl Aabb {
    pub fn new(lo: Point, hi: Point) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, x: &Point, dim: usize) -> bool {
        (0..dim).all(|a| x[a] >= self.lo[a] && x[a] <= self.hi[a])
    }
}

/// Tags of the closed-form material models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MaterialCase {
    #[serde(rename = "1d_bump")]
    Bump1d,
    #[serde(rename = "2d_bump")]
    Bump2d,
    #[serde(rename = "2d_trap")]
    Trap2d,
}

impl FromStr for MaterialCase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "1d_bump" => Ok(Self::Bump1d),
            "2d_bump" => Ok(Self::Bump2d),
            "2d_trap" => Ok(Self::Trap2d),
            other => Err(Error::UnknownCase(other.to_string())),
        }
    }
}

fn bump(r: f64) -> f64 {
    if r.abs() < 0.5 {
        let a = (1.0 - 2.0 * r) * (1.0 + 2.0 * r);
        1.0 + 3.0 * a * a
    } else {
        1.0
    }
}

/// Evaluates a named material model at `x`, returning `(α, β)`.
pub fn material(case: MaterialCase, x: &Point) -> (f64, f64) {
    match case {
        MaterialCase::Bump1d => (bump(x[0]), 1.0),
        MaterialCase::Bump2d => (bump(x[0].hypot(x[1])), 1.0),
        MaterialCase::Trap2d => (1.0, 1.0),
    }
}

/// Evaluates a material model given by its tag string.
pub fn material_by_tag(tag: &str, x: &Point) -> Result<(f64, f64)> {
    Ok(material(tag.parse()?, x))
}

type ScalarFn = Arc<dyn Fn(&Point) -> f64 + Send + Sync>;

/// Spatially varying coefficients `α`, `β`, constant `(α₀, β₀)` outside `Ω_in`.
#[derive(Clone)]
pub enum Medium {
    Named(MaterialCase),
    Custom {
        alpha: ScalarFn,
        beta: ScalarFn,
        exterior: (f64, f64),
        inner: Option<Aabb>,
    },
}

impl fmt::Debug for Medium {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Medium::Named(c) => write!(f, "Medium::Named({c:?})"),
            Medium::Custom {
                exterior, inner, ..
            } => write!(f, "Medium::Custom {{ exterior: {exterior:?}, inner: {inner:?} }}"),
        }
    }
}

impl Medium {
    pub fn homogeneous(alpha0: f64, beta0: f64) -> Self {
        Medium::Custom {
            alpha: Arc::new(move |_| alpha0),
            beta: Arc::new(move |_| beta0),
            exterior: (alpha0, beta0),
            inner: None,
        }
    }

    pub fn coefficients(&self, x: &Point) -> (f64, f64) {
        match self {
            Medium::Named(c) => material(*c, x),
            Medium::Custom { alpha, beta, .. } => (alpha(x), beta(x)),
        }
    }

    pub fn exterior(&self) -> (f64, f64) {
        match self {
            Medium::Named(_) => (1.0, 1.0),
            Medium::Custom { exterior, .. } => *exterior,
        }
    }

    /// Bounding box of `Ω_in`, the closed support of `(α-α₀, β-β₀)`; `None` if homogeneous.
    pub fn inner_box(&self) -> Option<Aabb> {
        match self {
            Medium::Named(MaterialCase::Bump1d) | Medium::Named(MaterialCase::Bump2d) => {
                Some(Aabb::new([-0.5, -0.5], [0.5, 0.5]))
            }
            Medium::Named(MaterialCase::Trap2d) => None,
            Medium::Custom { inner, .. } => *inner,
        }
    }

    pub fn is_exterior_value(&self, x: &Point) -> bool {
        let (a, b) = self.coefficients(x);
        let (a0, b0) = self.exterior();
        a == a0 && b == b0
    }
}

/// Closed-form external source `F(x)`.
#[derive(Clone)]
pub enum ExternalSource {
    /// `F = (200/λ²) f₀(ρ / (λ/2))`, `f₀(ξ) = (ξ²-1)⁴` on `|ξ| ≤ 1`.
    SmearedPoint { center: Point },
    Custom { f: ScalarFn, support: Aabb },
}

impl fmt::Debug for ExternalSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExternalSource::SmearedPoint { center } => {
                write!(f, "SmearedPoint {{ center: {center:?} }}")
            }
            ExternalSource::Custom { support, .. } => write!(f, "Custom {{ support: {support:?} }}"),
        }
    }
}

#[derive(Debug, Clone)]
pub enum Source {
    PlaneWavelet,
    External(ExternalSource),
}

/// Sound-soft obstacle given as a union of closed boxes. Boxes must align with
/// the coarsest mesh level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scatterer {
    pub boxes: Vec<Aabb>,
}

impl Scatterer {
    /// True if the open box `(lo, hi)` lies inside one of the obstacle boxes.
    pub fn contains_box(&self, lo: &Point, hi: &Point, dim: usize) -> bool {
        self.boxes
            .iter()
            .any(|b| (0..dim).all(|a| lo[a] >= b.lo[a] - 1e-12 && hi[a] <= b.hi[a] + 1e-12))
    }

    pub fn bounding_box(&self) -> Option<Aabb> {
        let mut it = self.boxes.iter();
        let first = *it.next()?;
        Some(it.fold(first, |acc, b| {
            Aabb::new(
                [acc.lo[0].min(b.lo[0]), acc.lo[1].min(b.lo[1])],
                [acc.hi[0].max(b.hi[0]), acc.hi[1].max(b.hi[1])],
            )
        }))
    }
}

/// Benchmark cases with their default configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CaseTag {
    #[serde(rename = "1d_bump")]
    Bump1d,
    #[serde(rename = "2d_bump")]
    Bump2d,
    #[serde(rename = "2d_point")]
    Point2d,
    #[serde(rename = "2d_trap")]
    Trap2d,
}

impl CaseTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            CaseTag::Bump1d => "1d_bump",
            CaseTag::Bump2d => "2d_bump",
            CaseTag::Point2d => "2d_point",
            CaseTag::Trap2d => "2d_trap",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            CaseTag::Bump1d => 1,
            _ => 2,
        }
    }
}

impl fmt::Display for CaseTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CaseTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "1d_bump" => Ok(Self::Bump1d),
            "2d_bump" => Ok(Self::Bump2d),
            "2d_point" => Ok(Self::Point2d),
            "2d_trap" => Ok(Self::Trap2d),
            other => Err(Error::UnknownCase(other.to_string())),
        }
    }
}

/// Open cavity used for the trapping check: a U-shaped obstacle whose opening
/// faces the incoming wave. All walls lie on the `1/10` lattice.
pub fn cavity_scatterer() -> Scatterer {
    Scatterer {
        boxes: vec![
            Aabb::new([0.8, -0.4], [0.9, 0.4]),
            Aabb::new([0.4, 0.3], [0.8, 0.4]),
            Aabb::new([0.4, -0.4], [0.8, -0.3]),
        ],
    }
}

/// Full description of one Helmholtz scattering problem.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub dim: usize,
    pub omega: f64,
    pub direction: Point,
    /// Half-widths `L_i` of the region of interest `Ω₀`.
    pub half_width: Point,
    /// Absorbing layer width `W`.
    pub pml_width: f64,
    /// Expected artificial reflection of the absorbing layer.
    pub reflection: f64,
    pub medium: Medium,
    pub source: Source,
    pub scatterer: Option<Scatterer>,
    pub wavelet: WaveletProfile,
}

impl ProblemSpec {
    /// Benchmark defaults for a named case at angular frequency `omega`.
    pub fn named(case: CaseTag, omega: f64) -> Result<Self> {
        if !(omega > 0.0) || !omega.is_finite() {
            return Err(Error::InvalidConfig(format!("omega must be positive, got {omega}")));
        }
        let (dim, medium, source, scatterer) = match case {
            CaseTag::Bump1d => (1, Medium::Named(MaterialCase::Bump1d), Source::PlaneWavelet, None),
            CaseTag::Bump2d => (2, Medium::Named(MaterialCase::Bump2d), Source::PlaneWavelet, None),
            CaseTag::Point2d => (
                2,
                Medium::Named(MaterialCase::Bump2d),
                Source::External(ExternalSource::SmearedPoint { center: [0.5, 0.5] }),
                None,
            ),
            CaseTag::Trap2d => (
                2,
                Medium::Named(MaterialCase::Trap2d),
                Source::PlaneWavelet,
                Some(cavity_scatterer()),
            ),
        };
        let spec = Self {
            dim,
            omega,
            direction: [1.0, 0.0],
            half_width: [1.0, if dim == 2 { 1.0 } else { 0.0 }],
            pml_width: PI / omega,
            reflection: 1e-10,
            medium,
            source,
            scatterer,
            wavelet: WaveletProfile::default(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim != 1 && self.dim != 2 {
            return Err(Error::InvalidConfig(format!("dimension must be 1 or 2, got {}", self.dim)));
        }
        if !(self.omega > 0.0) || !self.omega.is_finite() {
            return Err(Error::InvalidConfig(format!("omega must be positive, got {}", self.omega)));
        }
        let norm = (0..self.dim).map(|a| self.direction[a].powi(2)).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-14 {
            return Err(Error::InvalidConfig(format!("direction must be a unit vector (norm {norm})")));
        }
        if !(self.pml_width > 0.0) {
            return Err(Error::InvalidConfig("absorbing layer width must be positive".into()));
        }
        if (0..self.dim).any(|a| !(self.half_width[a] > 0.0)) {
            return Err(Error::InvalidConfig("half-widths must be positive".into()));
        }
        if !(self.reflection > 0.0 && self.reflection <= 1.0) {
            return Err(Error::InvalidConfig("reflection factor must lie in (0, 1]".into()));
        }
        let (a0, b0) = self.medium.exterior();
        if !(a0 > 0.0 && b0 > 0.0) {
            return Err(Error::InvalidConfig("exterior coefficients must be positive".into()));
        }
        if self.scatterer.is_some() && self.dim != 2 {
            return Err(Error::InvalidConfig("scatterers are supported in 2D only".into()));
        }
        Ok(())
    }

    /// Exterior wave speed `c₀ = √(α₀/β₀)`.
    pub fn c0(&self) -> f64 {
        let (a0, b0) = self.medium.exterior();
        (a0 / b0).sqrt()
    }

    /// Wave length `λ = 2π c₀ / ω` in the exterior medium.
    pub fn wavelength(&self) -> f64 {
        2.0 * PI * self.c0() / self.omega
    }

    pub fn is_plane_wave(&self) -> bool {
        matches!(self.source, Source::PlaneWavelet)
    }

    fn dot_dir(&self, x: &Point) -> f64 {
        (0..self.dim).map(|a| self.direction[a] * x[a]).sum()
    }

    /// Range of `r̂·x` over the closed box `[lo, hi]`.
    pub fn direction_range(&self, lo: &Point, hi: &Point) -> (f64, f64) {
        let mut min = 0.0;
        let mut max = 0.0;
        for a in 0..self.dim {
            let (u, v) = (self.direction[a] * lo[a], self.direction[a] * hi[a]);
            min += u.min(v);
            max += u.max(v);
        }
        (min, max)
    }

    /// Incoming plane wavelet `u_I(x, t) = ω ψ(ω(t - r̂·x/c₀))`.
    pub fn incoming_wavelet(&self, x: &Point, t: f64) -> f64 {
        self.omega * psi(self.omega * (t - self.dot_dir(x) / self.c0()))
    }

    /// Spatial gradient of the incoming wavelet.
    pub fn incoming_wavelet_grad(&self, x: &Point, t: f64) -> Point {
        let c0 = self.c0();
        let d = -self.omega * self.omega / c0 * psi_deriv(self.omega * (t - self.dot_dir(x) / c0));
        [d * self.direction[0], d * self.direction[1]]
    }

    /// True if the closed box meets the closed support of `u_I(·, t)`.
    pub fn wavelet_meets_box(&self, lo: &Point, hi: &Point, t: f64) -> bool {
        let c0 = self.c0();
        let (dmin, dmax) = self.direction_range(lo, hi);
        let half = self.wavelet.xi0 / self.omega;
        // t - r̂·x/c₀ ranges over [t - dmax/c₀, t - dmin/c₀].
        t - dmax / c0 <= half && t - dmin / c0 >= -half
    }

    /// Box bounding the region where the source acts (`Ω_in`, the scatterer or supp F).
    pub fn source_box(&self) -> Option<Aabb> {
        match &self.source {
            Source::PlaneWavelet => {
                let inner = self.medium.inner_box();
                let sc = self.scatterer.as_ref().and_then(|s| s.bounding_box());
                match (inner, sc) {
                    (Some(a), Some(b)) => Some(Aabb::new(
                        [a.lo[0].min(b.lo[0]), a.lo[1].min(b.lo[1])],
                        [a.hi[0].max(b.hi[0]), a.hi[1].max(b.hi[1])],
                    )),
                    (a, b) => a.or(b),
                }
            }
            Source::External(ExternalSource::SmearedPoint { center }) => {
                let r = 0.5 * self.wavelength();
                Some(Aabb::new([center[0] - r, center[1] - r], [center[0] + r, center[1] + r]))
            }
            Source::External(ExternalSource::Custom { support, .. }) => Some(*support),
        }
    }

    /// Initial time `t₀`: first instant at which the source is non-zero.
    pub fn t0(&self) -> f64 {
        let half = self.wavelet.xi0 / self.omega;
        match &self.source {
            Source::PlaneWavelet => match self.source_box() {
                Some(b) => self.direction_range(&b.lo, &b.hi).0 / self.c0() - half,
                None => -half,
            },
            Source::External(_) => -half,
        }
    }

    /// Final source time `t_f`: after it the discrete source vanishes.
    pub fn t_f(&self) -> f64 {
        let half = self.wavelet.xi0 / self.omega;
        match &self.source {
            Source::PlaneWavelet => match self.source_box() {
                Some(b) => self.direction_range(&b.lo, &b.hi).1 / self.c0() + half,
                None => half,
            },
            Source::External(_) => half,
        }
    }

    /// External source profile `F(x)`; zero for plane-wavelet problems.
    pub fn external_f(&self, x: &Point) -> f64 {
        match &self.source {
            Source::PlaneWavelet => 0.0,
            Source::External(ExternalSource::SmearedPoint { center }) => {
                point_source_f(x, center, self.wavelength(), self.dim)
            }
            Source::External(ExternalSource::Custom { f, .. }) => f(x),
        }
    }

    /// Time factor `ω ψ(ω t)` of an external source.
    pub fn external_time_factor(&self, t: f64) -> f64 {
        self.omega * psi(self.omega * t)
    }

    /// Largest sampled `α` and smallest `β` over a set of points.
    pub fn coefficient_bounds<'a>(&self, points: impl IntoIterator<Item = &'a Point>) -> (f64, f64, f64) {
        let mut amax = f64::MIN;
        let mut bmin = f64::MAX;
        let mut cmax = 0.0f64;
        for x in points {
            let (a, b) = self.medium.coefficients(x);
            amax = amax.max(a);
            bmin = bmin.min(b);
            cmax = cmax.max((a / b).sqrt());
        }
        (amax, bmin, cmax)
    }
}

/// Smeared point source `F = (200/λ²) f₀(ρ/(λ/2))`.
pub fn point_source_f(x: &Point, center: &Point, wavelength: f64, dim: usize) -> f64 {
    let rho = (0..dim).map(|a| (x[a] - center[a]).powi(2)).sum::<f64>().sqrt();
    let xi = rho / (0.5 * wavelength);
    if xi > 1.0 {
        return 0.0;
    }
    let a = xi * xi - 1.0;
    let a2 = a * a;
    200.0 / (wavelength * wavelength) * a2 * a2
}

/// Per-mesh evaluator of the discrete source `f_𝒯(·, tⁿ)`.
///
/// For plane wavelets the nodal source is
/// `-(β-β₀)/β · D_t² u_I - ((α-α₀)∇u_I, ∇w_x)_𝒯 / (β σ_x)`; for external
/// sources it is `ω ψ(ω t) (F, w_x)_𝒯 / σ_x`.
pub struct SourceTerm {
    /// Elements on which `α - α₀` is not identically zero, with the local differences.
    inhomogeneous: Vec<(usize, Vec<f64>)>,
    /// Nodes where `β ≠ β₀`, with `(β - β₀)/β`.
    beta_nodes: Vec<(usize, f64)>,
    /// Lumped projection of the external profile `F`.
    external: Option<Vec<f64>>,
}

impl SourceTerm {
    pub fn new(space: &FeSpace, spec: &ProblemSpec) -> Self {
        let (a0, b0) = spec.medium.exterior();
        let mut inhomogeneous = Vec::new();
        let mut beta_nodes = Vec::new();
        let mut external = None;
        match &spec.source {
            Source::PlaneWavelet => {
                for e in 0..space.elements().len() {
                    let diff: Vec<f64> = space
                        .element_points(e)
                        .iter()
                        .map(|x| spec.medium.coefficients(x).0 - a0)
                        .collect();
                    if diff.iter().any(|d| *d != 0.0) {
                        inhomogeneous.push((e, diff));
                    }
                }
                for (i, x) in space.coords().iter().enumerate() {
                    let b = spec.medium.coefficients(x).1;
                    if b != b0 {
                        beta_nodes.push((i, (b - b0) / b));
                    }
                }
            }
            Source::External(_) => {
                let vals = space.lumped_projection(|x| spec.external_f(x));
                external = Some(vals);
            }
        }
        Self {
            inhomogeneous,
            beta_nodes,
            external,
        }
    }

    /// Writes `f_𝒯(·, t)` into `out` (length = number of nodes).
    pub fn eval(&self, space: &FeSpace, spec: &ProblemSpec, t: f64, dt: f64, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        if let Some(ext) = &self.external {
            let s = spec.external_time_factor(t);
            if s != 0.0 {
                for (o, f) in out.iter_mut().zip(ext) {
                    *o = s * f;
                }
            }
            space.zero_dirichlet(out);
            return;
        }
        let mut any = false;
        let nloc = space.nloc();
        let mut ui = vec![0.0; nloc];
        for (e, diff) in &self.inhomogeneous {
            let (lo, hi) = space.element_bounds(*e);
            if !spec.wavelet_meets_box(&lo, &hi, t) {
                continue;
            }
            for (q, x) in space.element_points(*e).iter().enumerate() {
                ui[q] = spec.incoming_wavelet(x, t);
            }
            space.add_element_stiffness(*e, &ui, diff, out);
            any = true;
        }
        if any {
            space.finish_operator(out);
            out.iter_mut().for_each(|v| *v = -*v);
        }
        for &(i, ratio) in &self.beta_nodes {
            let x = space.coords()[i];
            let d2 = (spec.incoming_wavelet(&x, t + dt) - 2.0 * spec.incoming_wavelet(&x, t)
                + spec.incoming_wavelet(&x, t - dt))
                / (dt * dt);
            out[i] -= ratio * d2;
        }
        space.zero_dirichlet(out);
    }
}

/// Convenience wrapper returning the discrete source on `space` at time `t`.
pub fn discrete_source(space: &FeSpace, t: f64, dt: f64, spec: &ProblemSpec) -> Vec<f64> {
    let term = SourceTerm::new(space, spec);
    let mut out = vec![0.0; space.num_nodes()];
    term.eval(space, spec, t, dt, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn psi_values() {
        assert_eq!(psi(PI), 0.0);
        assert_eq!(psi(-PI), 0.0);
        assert_eq!(psi(4.0), 0.0);
        let expected = PI.powi(7) / (3840.0 * (21.0 - 2.0 * PI * PI));
        assert!((psi(0.0) - expected).abs() < 1e-15);
        assert!((psi(0.0) - 0.62384).abs() < 1e-5);
    }

    #[test]
    fn psi_normalisation() {
        let v = WaveletProfile::default().fourier_at_minus_one(64);
        assert!((v.re - 1.0).abs() < 1e-10, "{v}");
        assert!(v.im.abs() < 1e-10, "{v}");
    }

    #[test]
    fn psi_derivative_matches_finite_difference() {
        for &x in &[-2.5, -1.0, 0.0, 0.3, 2.9] {
            let h = 1e-6;
            let fd = (psi(x + h) - psi(x - h)) / (2.0 * h);
            assert!((fd - psi_deriv(x)).abs() < 1e-7);
        }
    }

    #[test]
    fn psi_is_smooth_at_support_edge() {
        // One-sided differences at ±π agree and tend to zero like h³.
        for h in [1e-2, 5e-3] {
            let left = (psi(PI) - psi(PI - h)) / h;
            let right = (psi(PI + h) - psi(PI)) / h;
            assert!((left - right).abs() < 10.0 * h * h);
        }
    }

    #[test]
    fn wavelet_values() {
        let spec = ProblemSpec::named(CaseTag::Bump1d, 10.0 * PI).unwrap();
        let t = 0.3;
        assert_eq!(spec.incoming_wavelet(&[t - 1.0, 0.0], t), 0.0);
        let v = spec.incoming_wavelet(&[t, 0.0], t);
        assert!((v - 10.0 * PI * psi(0.0)).abs() < 1e-12);
        assert!((v - 19.60).abs() < 0.01);
    }

    #[test]
    fn materials() {
        assert_eq!(material(MaterialCase::Bump1d, &[0.75, 0.0]), (1.0, 1.0));
        assert_eq!(material(MaterialCase::Bump1d, &[0.0, 0.0]), (4.0, 1.0));
        assert_eq!(material(MaterialCase::Bump2d, &[0.0, 0.0]), (4.0, 1.0));
        assert_eq!(material(MaterialCase::Trap2d, &[0.1, 0.2]), (1.0, 1.0));
        assert!(material_by_tag("3d_bump", &[0.0, 0.0]).is_err());
    }

    #[test]
    fn point_source_values() {
        let lambda = 0.25;
        let c = [0.5, 0.5];
        assert_eq!(point_source_f(&[0.625, 0.5], &c, lambda, 2), 0.0);
        assert!((point_source_f(&c, &c, lambda, 2) - 200.0 / (lambda * lambda)).abs() < 1e-9);
    }

    #[test]
    fn case_times() {
        let spec = ProblemSpec::named(CaseTag::Bump1d, 10.0 * PI).unwrap();
        assert!((spec.t0() - (-0.5 - 0.1)).abs() < 1e-14);
        assert!((spec.t_f() - 0.6).abs() < 1e-14);
        let p = ProblemSpec::named(CaseTag::Point2d, 10.0 * PI).unwrap();
        assert!((p.t0() + 0.1).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(ProblemSpec::named(CaseTag::Bump1d, 0.0).is_err());
        assert!(ProblemSpec::named(CaseTag::Bump1d, -3.0).is_err());
        let mut spec = ProblemSpec::named(CaseTag::Bump2d, 10.0).unwrap();
        spec.direction = [1.0, 1.0];
        assert!(spec.validate().is_err());
    }
}
