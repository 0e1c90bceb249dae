//! Explicit leapfrog update with the absorbing-layer auxiliary field.

use crate::femspace::{FeSpace, PmlField};
use crate::hierarchy::NestedHierarchy;
use crate::problem::{Point, ProblemSpec, SourceTerm};

/// Damping rate `|log R| · 3/(2W) · ((|x| - L)/W)²` for `|x| > L`, else 0.
pub fn zeta(x: f64, half_width: f64, width: f64, reflection: f64) -> f64 {
    let d = x.abs() - half_width;
    if d <= 0.0 || width <= 0.0 {
        return 0.0;
    }
    let r = d / width;
    reflection.ln().abs() * 1.5 / width * r * r
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PmlProfile {
    pub dim: usize,
    pub half_width: Point,
    pub width: f64,
    pub reflection: f64,
}

impl PmlProfile {
    pub fn new(hier: &NestedHierarchy, reflection: f64) -> Self {
        Self {
            dim: hier.dim(),
            half_width: hier.half_width(),
            width: hier.pml_width(),
            reflection,
        }
    }

    /// `(ζ₁(x₁), ζ₂(x₂))`; `ζ₂ ≡ 0` in 1D.
    pub fn rates(&self, x: &Point) -> (f64, f64) {
        let z1 = zeta(x[0], self.half_width[0], self.width, self.reflection);
        let z2 = if self.dim == 2 {
            zeta(x[1], self.half_width[1], self.width, self.reflection)
        } else {
            0.0
        };
        (z1, z2)
    }
}

/// Sampled bounds `(α_max, β_min, c_max)` over the Gauss–Lobatto points of the finest level.
pub fn coefficient_bounds(spec: &ProblemSpec, hier: &NestedHierarchy, p: usize) -> (f64, f64, f64) {
    let (xi, _) = crate::femspace::basis::gauss_lobatto(p);
    let n = hier.lattice_cells();
    let axis = |a: usize| -> Vec<f64> {
        if a >= hier.dim() {
            return vec![0.0];
        }
        let mut v = Vec::with_capacity(p * n[a] as usize + 1);
        for c in 0..n[a] {
            for &x in &xi[..p] {
                v.push(hier.lattice_to_x(a, c as f64 + x));
            }
        }
        v.push(hier.lattice_to_x(a, n[a] as f64));
        v
    };
    let (xs, ys) = (axis(0), axis(1));
    let pts: Vec<Point> = ys.iter().flat_map(|&y| xs.iter().map(move |&x| [x, y])).collect();
    spec.coefficient_bounds(&pts)
}

/// Time step `Δt = T_up / m` with the smallest `m` such that
/// `Δt ≤ c_CFL · 2 / √λ*`, `λ* = (α_max/β_min) · d · λ̂ / h_K²`.
pub fn cfl_timestep(t_up: f64, spec: &ProblemSpec, hier: &NestedHierarchy, c_cfl: f64, p: usize) -> (f64, usize) {
    let (amax, bmin, _) = coefficient_bounds(spec, hier, p);
    cfl_from_bounds(t_up, amax / bmin, hier.dim(), hier.h_fine(), c_cfl, p)
}

pub fn cfl_from_bounds(t_up: f64, ratio: f64, dim: usize, h: f64, c_cfl: f64, p: usize) -> (f64, usize) {
    let ref_eig = crate::femspace::LagrangeBasis::gauss_lobatto(p).reference_eigenvalue();
    let lambda = ratio * dim as f64 * ref_eig / (h * h);
    let bound = c_cfl * 2.0 / lambda.sqrt();
    let m = ((t_up / bound) * (1.0 - 1e-14)).ceil().max(1.0) as usize;
    (t_up / m as f64, m)
}

/// Nodal wave field at two time levels plus the auxiliary field.
#[derive(Debug, Clone)]
pub struct WaveState {
    pub u: Vec<f64>,
    pub u_old: Vec<f64>,
    pub s: PmlField,
    pub n: u64,
    pub t0: f64,
    pub dt: f64,
}

impl WaveState {
    /// Zero initial data at `t₀`.
    pub fn zeros(space: &FeSpace, t0: f64, dt: f64) -> Self {
        Self {
            u: vec![0.0; space.num_nodes()],
            u_old: vec![0.0; space.num_nodes()],
            s: PmlField::zeros(space),
            n: 0,
            t0,
            dt,
        }
    }

    pub fn time(&self) -> f64 {
        self.t0 + self.n as f64 * self.dt
    }

    pub fn max_abs(&self) -> f64 {
        self.u.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Boundary treatment on `∂Ω`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Boundary {
    /// Homogeneous Dirichlet data behind an absorbing layer.
    Dirichlet,
    /// First-order characteristic condition `∂ₜu + c₀∂ₙu = 0` (1D only).
    Characteristic,
}

/// Per-mesh coefficients of the explicit update.
pub struct Stepper {
    dt: f64,
    z1: Vec<f64>,
    z2: Vec<f64>,
    z3_inv: Vec<f64>,
    /// `s' = sa·s + sb·∇u^{n+½}` per strip slot, component and local point.
    sa: Vec<f64>,
    sb: Vec<f64>,
    source: SourceTerm,
    lu: Vec<f64>,
    f: Vec<f64>,
    obstacle_nodes: Vec<usize>,
}

impl Stepper {
    pub fn new(space: &FeSpace, spec: &ProblemSpec, dt: f64, pml: &PmlProfile) -> Self {
        Self::with_boundary(space, spec, dt, pml, Boundary::Dirichlet)
    }

    /// Stepper for `space`. With [`Boundary::Characteristic`] the space must
    /// have its boundary released (see [`FeSpace::release_boundary`]).
    pub fn with_boundary(space: &FeSpace, spec: &ProblemSpec, dt: f64, pml: &PmlProfile, boundary: Boundary) -> Self {
        let nn = space.num_nodes();
        let dim = space.dim();
        let mut z1 = vec![0.0; nn];
        let mut z2 = vec![0.0; nn];
        let mut z3_inv = vec![0.0; nn];
        let (a0, _) = spec.medium.exterior();
        let c0 = spec.c0();
        for (i, x) in space.coords().iter().enumerate() {
            let (mut zs, zp) = {
                let (a, b) = pml.rates(x);
                (a + b, a * b)
            };
            if boundary == Boundary::Characteristic && is_domain_end(space, x) {
                zs += a0 / c0 * space.inv_beta_sigma()[i];
            }
            z1[i] = -1.0 + 0.5 * dt * zs;
            z2[i] = 2.0 - dt * dt * zp;
            z3_inv[i] = 1.0 / (1.0 + 0.5 * dt * zs);
        }
        let nloc = space.nloc();
        let slots = space.pml_elements().len();
        let mut sa = vec![0.0; slots * dim * nloc];
        let mut sb = vec![0.0; slots * dim * nloc];
        for (slot, &e) in space.pml_elements().iter().enumerate() {
            for (q, x) in space.element_points(e as usize).iter().enumerate() {
                let (z1r, z2r) = pml.rates(x);
                let zs = [z1r, z2r];
                for c in 0..dim {
                    let z2ii = if dim == 1 { z1r } else if c == 0 { z1r - z2r } else { z2r - z1r };
                    let den = 1.0 + 0.5 * dt * zs[c];
                    let k = (slot * dim + c) * nloc + q;
                    sa[k] = (1.0 - 0.5 * dt * zs[c]) / den;
                    sb[k] = -dt * z2ii / den;
                }
            }
        }
        let obstacle_nodes = (0..nn).filter(|&i| space.is_obstacle(i)).collect();
        Self {
            dt,
            z1,
            z2,
            z3_inv,
            sa,
            sb,
            source: SourceTerm::new(space, spec),
            lu: vec![0.0; nn],
            f: vec![0.0; nn],
            obstacle_nodes,
        }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Imposes the obstacle data `-u_I(x, t)` on obstacle nodes.
    pub fn apply_dirichlet(&self, space: &FeSpace, spec: &ProblemSpec, u: &mut [f64], t: f64) {
        for &i in &self.obstacle_nodes {
            u[i] = -spec.incoming_wavelet(&space.coords()[i], t);
        }
    }

    /// Advances `state` by one step: `uⁿ⁺¹` from `uⁿ, uⁿ⁻¹, sⁿ`, then `sⁿ⁺¹` from the midpoint field.
    pub fn step(&mut self, space: &FeSpace, spec: &ProblemSpec, state: &mut WaveState) {
        let t = state.time();
        let dt = self.dt;
        space.apply_operator(&state.u, Some(&state.s), &mut self.lu);
        self.source.eval(space, spec, t, dt, &mut self.f);
        let dt2 = dt * dt;
        let mut u_new = std::mem::take(&mut state.u_old);
        for i in 0..u_new.len() {
            if space.is_pinned(i) {
                u_new[i] = 0.0;
                continue;
            }
            u_new[i] = (self.z1[i] * u_new[i] + self.z2[i] * state.u[i] + dt2 * (self.f[i] - self.lu[i])) * self.z3_inv[i];
        }
        self.apply_dirichlet(space, spec, &mut u_new, t + dt);
        self.update_s(space, &state.u, &u_new, &mut state.s);
        state.u_old = std::mem::replace(&mut state.u, u_new);
        state.n += 1;
    }

    fn update_s(&self, space: &FeSpace, u: &[f64], u_new: &[f64], s: &mut PmlField) {
        let nloc = space.nloc();
        let dim = space.dim();
        let mut a = vec![0.0; nloc];
        let mut b = vec![0.0; nloc];
        let mut gx = vec![0.0; nloc];
        let mut gy = vec![0.0; nloc];
        for (slot, &e) in space.pml_elements().iter().enumerate() {
            let e = e as usize;
            space.gather(e, u, &mut a);
            space.gather(e, u_new, &mut b);
            for q in 0..nloc {
                a[q] = 0.5 * (a[q] + b[q]);
            }
            space.local_gradient(e, &a, &mut gx, &mut gy);
            let (s1, s2) = s.element_mut(slot);
            let k1 = slot * dim * nloc;
            for q in 0..nloc {
                s1[q] = self.sa[k1 + q] * s1[q] + self.sb[k1 + q] * gx[q];
            }
            if dim == 2 {
                let k2 = k1 + nloc;
                for q in 0..nloc {
                    s2[q] = self.sa[k2 + q] * s2[q] + self.sb[k2 + q] * gy[q];
                }
            }
        }
    }
}

fn is_domain_end(space: &FeSpace, x: &Point) -> bool {
    let (lo, hi) = space.hierarchy().domain_box();
    let tol = 1e-12 * space.hierarchy().h_fine();
    (0..space.dim()).any(|a| (x[a] - lo[a]).abs() < tol || (x[a] - hi[a]).abs() < tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::femspace::build_space;
    use crate::hierarchy::{build_hierarchy, AdaptedMesh};
    use crate::problem::{CaseTag, Medium};
    use std::f64::consts::PI;
    use std::sync::Arc;

    #[test]
    fn zeta_profile() {
        let r = 1e-10f64;
        let w = 0.1;
        assert_eq!(zeta(0.7, 1.0, w, r), 0.0);
        assert_eq!(zeta(-1.0, 1.0, w, r), 0.0);
        let end = r.ln().abs() * 3.0 / (2.0 * w);
        assert!((zeta(1.1, 1.0, w, r) - end).abs() < 1e-12 * end);
        assert!((zeta(-1.05, 1.0, w, r) - 0.25 * end).abs() < 1e-12 * end);
        assert_eq!(zeta(1.05, 1.0, w, 1.0), 0.0);
    }

    #[test]
    fn cfl_counts() {
        let omega = 10.0 * PI;
        let spec = ProblemSpec::named(CaseTag::Bump1d, omega).unwrap();
        let h = build_hierarchy(&[0.2, 0.02], [1.0, 0.0], PI / omega, 1).unwrap();
        let (dt, m) = cfl_timestep(0.1, &spec, &h, 0.9, 2);
        assert_eq!(m, 28);
        assert!((dt - 0.1 / 28.0).abs() < 1e-16);
        let spec2 = ProblemSpec::named(CaseTag::Bump2d, omega).unwrap();
        let h2 = build_hierarchy(&[0.2, 0.02], [1.0, 1.0], PI / omega, 2).unwrap();
        assert_eq!(cfl_timestep(0.1, &spec2, &h2, 0.9, 2).1, 39);
        // Four times the stiffness doubles the step count up to rounding.
        let (_, m1) = cfl_from_bounds(0.1, 1.0, 1, 0.02, 0.9, 2);
        let (_, m4) = cfl_from_bounds(0.1, 4.0, 1, 0.02, 0.9, 2);
        assert!(m4 == 2 * m1 || m4 + 1 == 2 * m1);
    }

    #[test]
    fn zero_state_stays_zero() {
        let mut spec = ProblemSpec::named(CaseTag::Bump1d, 10.0 * PI).unwrap();
        spec.medium = Medium::homogeneous(1.0, 1.0);
        let h = Arc::new(build_hierarchy(&[0.02], [1.0, 0.0], 0.1, 1).unwrap());
        let space = build_space(&AdaptedMesh::finest(h.clone()), 2, &spec).unwrap();
        let pml = PmlProfile::new(&h, 1e-10);
        let mut st = Stepper::new(&space, &spec, 1e-3, &pml);
        let mut state = WaveState::zeros(&space, 0.0, 1e-3);
        for _ in 0..5 {
            st.step(&space, &spec, &mut state);
        }
        assert!(state.u.iter().all(|&v| v == 0.0));
        assert_eq!(state.s.max_abs(), 0.0);
    }

    #[test]
    fn undamped_update_is_leapfrog() {
        let mut spec = ProblemSpec::named(CaseTag::Bump1d, 10.0 * PI).unwrap();
        spec.medium = Medium::homogeneous(1.0, 1.0);
        let h = Arc::new(build_hierarchy(&[0.05], [1.0, 0.0], 0.1, 1).unwrap());
        let space = build_space(&AdaptedMesh::finest(h.clone()), 2, &spec).unwrap();
        let pml = PmlProfile::new(&h, 1.0);
        let dt = 2e-3;
        let mut st = Stepper::new(&space, &spec, dt, &pml);
        let mut state = WaveState::zeros(&space, 0.0, dt);
        state.u = space.interpolate(|x| (-40.0 * x[0] * x[0]).exp());
        space.zero_dirichlet(&mut state.u);
        state.u_old = state.u.clone();
        let (u0, uo) = (state.u.clone(), state.u_old.clone());
        st.step(&space, &spec, &mut state);
        let mut lu = vec![0.0; space.num_nodes()];
        space.apply_operator(&u0, None, &mut lu);
        for i in 0..space.num_nodes() {
            let expect = if space.is_boundary(i) { 0.0 } else { -uo[i] + 2.0 * u0[i] - dt * dt * lu[i] };
            assert!((state.u[i] - expect).abs() < 1e-14);
        }
    }
}
