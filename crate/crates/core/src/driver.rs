//! Full runs: the adaptive solve with on-the-fly transform, uniform-mesh
//! baselines, the 1D characteristic-boundary reference and the error metrics.

use std::f64::consts::PI;
use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex64;
use serde::Serialize;

use crate::adapt::{should_stop, update_mesh, AdaptParams};
use crate::femspace::basis::{gauss_legendre, LagrangeBasis};
use crate::femspace::{build_space, project_s, project_u, FeSpace};
use crate::fourier::{FineGrid, FourierAccumulator, NaiveAccumulator};
use crate::hierarchy::{build_hierarchy, AdaptedMesh, NestedHierarchy};
use crate::problem::{CaseTag, Point, ProblemSpec, Scatterer};
use crate::stepper::{cfl_from_bounds, coefficient_bounds, Boundary, PmlProfile, Stepper, WaveState};
use crate::{Error, Result};

/// Numerical parameters of one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverConfig {
    /// Nested mesh widths `h₁ > … > h_K`.
    pub levels: Vec<f64>,
    pub degree: usize,
    pub cfl: f64,
    pub t_up: f64,
    pub eta0: f64,
    pub eps0: f64,
    /// Abort once `t - t₀` exceeds this without the stopping rule firing.
    pub t_max: f64,
}

impl SolverConfig {
    /// Defaults of the named benchmark at `omega`.
    pub fn for_case(case: CaseTag, omega: f64) -> Self {
        let levels = match case {
            CaseTag::Trap2d => vec![0.1, PI / (5.0 * omega)],
            _ if (omega - 10.0 * PI).abs() < 1e-9 * omega => vec![0.2, 0.02],
            _ => vec![0.2, 2.0 * PI / omega, PI / (5.0 * omega)],
        };
        let eps0 = if case == CaseTag::Trap2d { 5.0 * omega / 100.0 } else { omega / 100.0 };
        Self {
            levels,
            degree: 2,
            cfl: 0.9,
            t_up: PI / omega,
            eta0: omega / 100.0,
            eps0,
            t_max: 100.0,
        }
    }

    pub fn h_fine(&self) -> f64 {
        *self.levels.last().unwrap_or(&0.0)
    }
}

/// Summary of an adaptive run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub j_stop: usize,
    pub m: usize,
    pub dt: f64,
    pub t0: f64,
    pub t_stop: f64,
    /// `|𝒳(𝒯ⱼ)|` for `j = 1..j_stop`.
    pub dofs: Vec<usize>,
    pub n_dof_avg: f64,
    pub wall_seconds: f64,
}

/// Complex field given by its values at the Gauss–Lobatto points of the
/// finest level of a hierarchy; piecewise polynomial of degree `p` per cell.
#[derive(Debug, Clone)]
pub struct GridField {
    pub hier: Arc<NestedHierarchy>,
    pub p: usize,
    pub values: Vec<Complex64>,
    basis: LagrangeBasis,
}

impl GridField {
    pub fn new(hier: Arc<NestedHierarchy>, p: usize, values: Vec<Complex64>) -> Self {
        Self {
            hier,
            p,
            values,
            basis: LagrangeBasis::gauss_lobatto(p),
        }
    }

    pub fn shape(&self) -> [usize; 2] {
        let n = self.hier.lattice_cells();
        [self.p * n[0] as usize + 1, if self.hier.dim() == 2 { self.p * n[1] as usize + 1 } else { 1 }]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    pub fn evaluate(&self, x: &Point) -> Complex64 {
        let h = &self.hier;
        let n = h.lattice_cells();
        let shape = self.shape();
        let p = self.p;
        let mut cell = [0usize; 2];
        let mut t = [0.0; 2];
        for a in 0..h.dim() {
            let l = h.x_to_lattice(a, x[a]).clamp(0.0, n[a] as f64);
            let c = (l.floor() as usize).min(n[a] as usize - 1);
            cell[a] = c;
            t[a] = l - c as f64;
        }
        let mut l0 = vec![0.0; p + 1];
        let mut l1 = vec![1.0; p + 1];
        self.basis.eval_into(t[0], &mut l0);
        let ny = if h.dim() == 2 {
            self.basis.eval_into(t[1], &mut l1);
            p + 1
        } else {
            1
        };
        let mut s = Complex64::new(0.0, 0.0);
        for b in 0..ny {
            let row = if h.dim() == 2 { (cell[1] * p + b) * shape[0] } else { 0 };
            for a in 0..=p {
                s += self.values[row + cell[0] * p + a] * (l0[a] * l1[b]);
            }
        }
        s
    }
}

/// Output of [`solve_helmholtz`].
#[derive(Debug, Clone)]
pub struct Solution {
    pub field: GridField,
    pub report: RunReport,
    /// Direct accumulation at the fine nodes, when requested.
    pub naive: Option<Vec<Complex64>>,
    /// Final adapted mesh.
    pub mesh: AdaptedMesh,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Also accumulate the transform directly at the fine nodes.
    pub record_naive: bool,
}

fn hierarchy_for(spec: &ProblemSpec, levels: &[f64], pml_width: f64) -> Result<Arc<NestedHierarchy>> {
    Ok(Arc::new(build_hierarchy(levels, spec.half_width, pml_width, spec.dim)?))
}

/// `(Δt, m)` and `c_max` for the finest level of `hier`.
pub fn time_step(spec: &ProblemSpec, hier: &NestedHierarchy, cfg: &SolverConfig) -> ((f64, usize), f64) {
    let (amax, bmin, cmax) = coefficient_bounds(spec, hier, cfg.degree);
    (cfl_from_bounds(cfg.t_up, amax / bmin, hier.dim(), hier.h_fine(), cfg.cfl, cfg.degree), cmax)
}

/// Adaptive solve with on-the-fly Fourier transform.
pub fn solve_helmholtz(spec: &ProblemSpec, cfg: &SolverConfig) -> Result<Solution> {
    solve_helmholtz_with(spec, cfg, RunOptions::default())
}

pub fn solve_helmholtz_with(spec: &ProblemSpec, cfg: &SolverConfig, opts: RunOptions) -> Result<Solution> {
    spec.validate()?;
    let start = Instant::now();
    let hier = hierarchy_for(spec, &cfg.levels, spec.pml_width)?;
    let ((dt, m), c_max) = time_step(spec, &hier, cfg);
    let params = AdaptParams {
        eta0: cfg.eta0,
        eps0: cfg.eps0,
        t_up: cfg.t_up,
        c_max,
    };
    let pml = PmlProfile::new(&hier, spec.reflection);
    let t0 = spec.t0();
    let mut space = build_space(&AdaptedMesh::finest(hier.clone()), cfg.degree, spec)?;
    let mut state = WaveState::zeros(&space, t0, dt);
    let grid = FineGrid::new(hier.clone(), cfg.degree, spec);
    let mut naive = opts.record_naive.then(|| NaiveAccumulator::new(grid.len(), spec.omega));
    let mut acc = FourierAccumulator::new(grid.clone(), spec.omega);
    acc.initialise_new_increments(space.mesh());
    let mut stepper: Option<Stepper> = None;
    let mut dofs = Vec::new();
    loop {
        let t = state.time();
        if should_stop(&state.u, t, spec, cfg.eps0) {
            break;
        }
        if t - t0 > cfg.t_max {
            return Err(Error::RunAborted { t, t_max: t0 + cfg.t_max });
        }
        let mesh = update_mesh(&space, &state.u, t, spec, &params)?;
        if !mesh.same_leaves(space.mesh()) {
            acc.remesh(&mesh);
            let next = build_space(&mesh, cfg.degree, spec)?;
            let mut u = project_u(&space, &state.u, &next);
            let mut u_old = project_u(&space, &state.u_old, &next);
            let s = project_s(&space, &state.s, &next);
            let st = Stepper::new(&next, spec, dt, &pml);
            st.apply_dirichlet(&next, spec, &mut u, t);
            st.apply_dirichlet(&next, spec, &mut u_old, t - dt);
            state.u = u;
            state.u_old = u_old;
            state.s = s;
            space = next;
            stepper = Some(st);
        }
        let st = stepper.get_or_insert_with(|| Stepper::new(&space, spec, dt, &pml));
        dofs.push(space.num_nodes());
        for _ in 0..m {
            st.step(&space, spec, &mut state);
            let tn = state.time();
            acc.update_increments(&space, &state.u, tn, dt);
            if let Some(n) = naive.as_mut() {
                n.add(&grid.sample(&space, &state.u), tn, dt);
            }
        }
    }
    let j_stop = dofs.len();
    let n_dof_avg = if j_stop > 0 { dofs.iter().sum::<usize>() as f64 / j_stop as f64 } else { 0.0 };
    let report = RunReport {
        j_stop,
        m,
        dt,
        t0,
        t_stop: state.time(),
        dofs,
        n_dof_avg,
        wall_seconds: start.elapsed().as_secs_f64(),
    };
    let mesh = space.mesh().clone();
    Ok(Solution {
        field: GridField::new(hier, cfg.degree, acc.finish()),
        report,
        naive: naive.map(|n| n.values),
        mesh,
    })
}

/// Fixed uniform mesh of width `h`, same stepper and absorbing layer,
/// direct accumulation over `n_steps` steps of size `dt` from `t₀`.
pub fn solve_uniform_reference(spec: &ProblemSpec, h: f64, degree: usize, dt: f64, n_steps: usize) -> Result<(GridField, usize)> {
    let hier = hierarchy_for(spec, &[h], spec.pml_width)?;
    let space = build_space(&AdaptedMesh::finest(hier.clone()), degree, spec)?;
    let pml = PmlProfile::new(&hier, spec.reflection);
    let stepper = Stepper::new(&space, spec, dt, &pml);
    let field = run_fixed(spec, &space, stepper, hier, dt, n_steps)?;
    Ok((field, space.num_nodes()))
}

fn run_fixed(spec: &ProblemSpec, space: &FeSpace, mut stepper: Stepper, hier: Arc<NestedHierarchy>, dt: f64, n_steps: usize) -> Result<GridField> {
    let index = space
        .fine_grid_indices()
        .ok_or_else(|| Error::InvalidMesh("reference mesh is not uniform".into()))?;
    let grid_len = GridField::new(hier.clone(), space.degree(), Vec::new()).shape().iter().product();
    let mut acc = NaiveAccumulator::new(grid_len, spec.omega);
    let mut state = WaveState::zeros(space, spec.t0(), dt);
    for _ in 0..n_steps {
        stepper.step(space, spec, &mut state);
        acc.add_indexed(&state.u, &index, state.time(), dt);
    }
    Ok(GridField::new(hier, space.degree(), acc.values))
}

/// Variants of the 1D reference with the characteristic boundary condition on `∂Ω₀`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AbcVariant {
    /// Same time interval as the run being assessed.
    SameHorizon,
    /// Time interval `(t₀, t₀ + 100)`.
    LongHorizon,
}

/// 1D uniform solve on `Ω₀` with `∂ₜu + c₀∂ₙu = 0` on its boundary instead of an absorbing layer.
pub fn solve_1d_abc_reference(spec: &ProblemSpec, variant: AbcVariant, h: f64, degree: usize, dt: f64, n_steps: usize) -> Result<GridField> {
    if spec.dim != 1 {
        return Err(Error::Unsupported("the characteristic-boundary reference is 1D only".into()));
    }
    let hier = hierarchy_for(spec, &[h], 0.0)?;
    let mut space = build_space(&AdaptedMesh::finest(hier.clone()), degree, spec)?;
    space.release_boundary();
    let pml = PmlProfile::new(&hier, spec.reflection);
    let stepper = Stepper::with_boundary(&space, spec, dt, &pml, Boundary::Characteristic);
    let n = match variant {
        AbcVariant::SameHorizon => n_steps,
        AbcVariant::LongHorizon => (100.0 / dt).round() as usize,
    };
    run_fixed(spec, &space, stepper, hier, dt, n)
}

/// `‖U_a − U_b‖_{L²(Ω₀)}` by Gauss–Legendre quadrature with `p + 1` points per
/// cell of the finer of the two grids, restricted to `|x_i| ≤ L_i` and to the
/// outside of `exclude`.
pub fn error_l2(a: &GridField, b: &GridField, exclude: Option<&Scatterer>) -> f64 {
    let fine = if a.hier.h_fine() <= b.hier.h_fine() { a } else { b };
    let h = &fine.hier;
    let dim = h.dim();
    let l = h.half_width();
    let hf = h.h_fine();
    let (xq, wq) = gauss_legendre(fine.p.max(a.p).max(b.p) + 1);
    let cells: Vec<usize> = (0..dim).map(|a| (2.0 * l[a] / hf).round() as usize).collect();
    let ny = if dim == 2 { cells[1] } else { 1 };
    let nqy = if dim == 2 { xq.len() } else { 1 };
    let mut sum = 0.0;
    for cy in 0..ny {
        for cx in 0..cells[0] {
            for qy in 0..nqy {
                for qx in 0..xq.len() {
                    let mut x = [-l[0] + (cx as f64 + xq[qx]) * hf, 0.0];
                    let mut w = wq[qx] * hf;
                    if dim == 2 {
                        x[1] = -l[1] + (cy as f64 + xq[qy]) * hf;
                        w *= wq[qy] * hf;
                    }
                    if exclude.is_some_and(|s| s.boxes.iter().any(|bx| bx.contains(&x, dim))) {
                        continue;
                    }
                    sum += w * (a.evaluate(&x) - b.evaluate(&x)).norm_sqr();
                }
            }
        }
    }
    sum.sqrt()
}

/// Ratio `n̄(2ω)/n̄(ω)` and rate `log₂` of consecutive reports.
pub fn dof_growth_rates(reports: &[RunReport]) -> Vec<(f64, f64)> {
    reports
        .windows(2)
        .map(|w| {
            let r = w[1].n_dof_avg / w[0].n_dof_avg;
            (r, r.log2())
        })
        .collect()
}

/// Adaptive run together with its error estimate and, optionally, the uniform baseline.
#[derive(Debug, Clone)]
pub struct CaseOutcome {
    pub solution: Solution,
    pub reference: GridField,
    pub err2: f64,
    pub baseline: Option<Baseline>,
}

#[derive(Debug, Clone)]
pub struct Baseline {
    pub field: GridField,
    pub err2: f64,
    pub n_dof: usize,
}

/// Reference on the uniform mesh of width `h_K/2` with its own step size, over `(t₀, t_stop)`.
pub fn reference_for(spec: &ProblemSpec, cfg: &SolverConfig, report: &RunReport) -> Result<GridField> {
    let h = cfg.h_fine() / 2.0;
    let hier = hierarchy_for(spec, &[h], spec.pml_width)?;
    let ((dt, m), _) = time_step(spec, &hier, cfg);
    Ok(solve_uniform_reference(spec, h, cfg.degree, dt, report.j_stop * m)?.0)
}

/// Splits the reference error of a 1D run into the absorbing-layer part
/// `‖U¹ − U²‖` and the time-truncation part `‖U² − U³‖`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Decomposition {
    pub layer: f64,
    pub truncation: f64,
}

pub fn decompose_1d(spec: &ProblemSpec, cfg: &SolverConfig, report: &RunReport) -> Result<Decomposition> {
    let h = cfg.h_fine() / 2.0;
    let hier = hierarchy_for(spec, &[h], spec.pml_width)?;
    let ((dt, m), _) = time_step(spec, &hier, cfg);
    let n = report.j_stop * m;
    let u1 = solve_uniform_reference(spec, h, cfg.degree, dt, n)?.0;
    let u2 = solve_1d_abc_reference(spec, AbcVariant::SameHorizon, h, cfg.degree, dt, n)?;
    let u3 = solve_1d_abc_reference(spec, AbcVariant::LongHorizon, h, cfg.degree, dt, n)?;
    Ok(Decomposition {
        layer: error_l2(&u1, &u2, None),
        truncation: error_l2(&u2, &u3, None),
    })
}

pub fn run_case(spec: &ProblemSpec, cfg: &SolverConfig, with_baseline: bool) -> Result<CaseOutcome> {
    let solution = solve_helmholtz(spec, cfg)?;
    let reference = reference_for(spec, cfg, &solution.report)?;
    let err2 = error_l2(&solution.field, &reference, spec.scatterer.as_ref());
    let baseline = if with_baseline {
        let r = &solution.report;
        let (field, n_dof) = solve_uniform_reference(spec, cfg.h_fine(), cfg.degree, r.dt, r.j_stop * r.m)?;
        let err2 = error_l2(&field, &reference, spec.scatterer.as_ref());
        Some(Baseline { field, err2, n_dof })
    } else {
        None
    };
    Ok(CaseOutcome {
        solution,
        reference,
        err2,
        baseline,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_defaults() {
        assert_eq!(SolverConfig::for_case(CaseTag::Bump1d, 10.0 * PI).levels, vec![0.2, 0.02]);
        let l = SolverConfig::for_case(CaseTag::Bump2d, 20.0 * PI).levels;
        assert!((l[1] - 0.1).abs() < 1e-15 && (l[2] - 0.01).abs() < 1e-15);
        let t = SolverConfig::for_case(CaseTag::Trap2d, 10.0 * PI);
        assert!((t.levels[1] - 0.02).abs() < 1e-15);
        assert!((t.eps0 - 5.0 * t.eta0).abs() < 1e-12);
    }

    #[test]
    fn l2_of_constant_difference() {
        let spec = ProblemSpec::named(CaseTag::Bump1d, 10.0 * PI).unwrap();
        let ha = hierarchy_for(&spec, &[0.1], 0.1).unwrap();
        let hb = hierarchy_for(&spec, &[0.05], 0.1).unwrap();
        let a = GridField::new(ha.clone(), 2, vec![Complex64::new(1.0, 0.0); GridField::new(ha, 2, vec![]).shape()[0]]);
        let b = GridField::new(hb.clone(), 2, vec![Complex64::new(0.0, 0.0); GridField::new(hb, 2, vec![]).shape()[0]]);
        assert!((error_l2(&a, &b, None) - 2f64.sqrt()).abs() < 1e-13);
        assert_eq!(error_l2(&a, &a, None), 0.0);
    }

    #[test]
    fn grid_field_reproduces_quadratics() {
        let spec = ProblemSpec::named(CaseTag::Bump2d, 10.0 * PI).unwrap();
        let h = hierarchy_for(&spec, &[0.25], 0.25).unwrap();
        let g = FineGrid::new(h.clone(), 2, &spec);
        let f = |x: &Point| Complex64::new(x[0] * x[1] + x[0] * x[0], x[1] * x[1]);
        let vals = g.positions().iter().map(f).collect();
        let field = GridField::new(h, 2, vals);
        for x in [[0.13, -0.71], [1.25, 1.25], [-1.25, 0.4]] {
            assert!((field.evaluate(&x) - f(&x)).norm() < 1e-13);
        }
    }

    #[test]
    fn growth_rates() {
        let r = RunReport {
            j_stop: 1,
            m: 1,
            dt: 1.0,
            t0: 0.0,
            t_stop: 1.0,
            dofs: vec![10],
            n_dof_avg: 10.0,
            wall_seconds: 0.0,
        };
        let mut r2 = r.clone();
        r2.n_dof_avg = 20.0;
        assert_eq!(dof_growth_rates(&[r.clone(), r.clone()]), vec![(1.0, 0.0)]);
        assert_eq!(dof_growth_rates(&[r, r2]), vec![(2.0, 1.0)]);
    }

    #[test]
    fn abc_reference_rejects_2d() {
        let spec = ProblemSpec::named(CaseTag::Bump2d, 10.0 * PI).unwrap();
        assert!(matches!(
            solve_1d_abc_reference(&spec, AbcVariant::SameHorizon, 0.01, 2, 1e-3, 1),
            Err(Error::Unsupported(_))
        ));
    }
}
