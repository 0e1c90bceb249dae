//! Helpers shared by the integration and acceptance tests.
#![allow(dead_code)]

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tdhelm::femspace::{build_space, FeSpace};
use tdhelm::hierarchy::{build_hierarchy, get_child_elements, AdaptedMesh, NestedHierarchy};
use tdhelm::problem::{CaseTag, Medium, ProblemSpec};
use tdhelm::stepper::{cfl_timestep, PmlProfile, Stepper, WaveState};

/// Small three-level hierarchy for mesh invariants.
pub fn small_hierarchy(dim: usize) -> (ProblemSpec, Arc<NestedHierarchy>) {
    let case = if dim == 1 { CaseTag::Bump1d } else { CaseTag::Bump2d };
    let spec = ProblemSpec::named(case, 4.0 * PI).unwrap();
    let levels = if dim == 1 { vec![0.5, 0.25, 0.05] } else { vec![0.5, 0.25, 0.125] };
    let hier = Arc::new(build_hierarchy(&levels, spec.half_width, spec.pml_width, dim).unwrap());
    (spec, hier)
}

/// Random parent set closed under ancestors, turned into a leaf mesh.
pub fn random_mesh(hier: &Arc<NestedHierarchy>, seed: u64, density: f64) -> AdaptedMesh {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut parents = BTreeSet::new();
    let mut frontier: Vec<_> = hier.elements(0).collect();
    while let Some(e) = frontier.pop() {
        if e.level as usize + 1 >= hier.num_levels() || !rng.gen_bool(density) {
            continue;
        }
        parents.insert(e);
        frontier.extend(hier.subelements(&e).unwrap());
    }
    get_child_elements(hier, &parents).unwrap()
}

pub fn random_field(space: &FeSpace, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..space.num_nodes())
        .map(|i| if space.is_pinned(i) { 0.0 } else { rng.gen_range(-1.0..1.0) })
        .collect()
}

pub fn uniform(spec: &ProblemSpec, h: f64) -> (FeSpace, PmlProfile) {
    let hier = Arc::new(build_hierarchy(&[h], spec.half_width, spec.pml_width, spec.dim).unwrap());
    let space = build_space(&AdaptedMesh::finest(hier.clone()), 2, spec).unwrap();
    (space, PmlProfile::new(&hier, spec.reflection))
}

pub fn cfl_dt(spec: &ProblemSpec, space: &FeSpace) -> f64 {
    cfl_timestep(PI / spec.omega, spec, space.hierarchy(), 0.9, 2).0
}

pub fn run(spec: &ProblemSpec, space: &FeSpace, pml: &PmlProfile, dt: f64, steps: usize) -> Vec<f64> {
    let mut st = Stepper::new(space, spec, dt, pml);
    let mut state = WaveState::zeros(space, spec.t0(), dt);
    for _ in 0..steps {
        st.step(space, spec, &mut state);
    }
    state.u
}

pub fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Errors of `Δt, Δt/2, Δt/4` against `Δt/16` at a fixed time, 1D, no damping.
pub fn time_errors() -> [f64; 3] {
    let mut spec = ProblemSpec::named(CaseTag::Bump1d, 10.0 * PI).unwrap();
    // R = 1 switches the damping off.
    spec.reflection = 1.0;
    let (space, pml) = uniform(&spec, 0.02);
    let dt = cfl_dt(&spec, &space);
    let n = (0.6 / dt).round() as usize;
    let reference = run(&spec, &space, &pml, dt / 16.0, 16 * n);
    assert!(reference.iter().any(|v| v.abs() > 0.1));
    [1, 2, 4].map(|k| max_diff(&run(&spec, &space, &pml, dt / k as f64, k * n), &reference))
}

/// Leapfrog energy `Σ βσ ((uⁿ⁺¹-uⁿ)/Δt)² + (K uⁿ⁺¹, uⁿ)`, conserved without damping.
pub fn energy(space: &FeSpace, u_old: &[f64], u: &[f64], dt: f64) -> f64 {
    let mut lu = vec![0.0; u.len()];
    space.apply_operator(u, None, &mut lu);
    let ibs = space.inv_beta_sigma();
    (0..u.len())
        .filter(|&i| !space.is_pinned(i))
        .map(|i| {
            let v = (u[i] - u_old[i]) / dt;
            (v * v + u_old[i] * lu[i]) / ibs[i]
        })
        .sum()
}

pub fn random_state(space: &FeSpace, seed: u64, dt: f64) -> WaveState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = WaveState::zeros(space, 50.0, dt);
    for i in (0..space.num_nodes()).filter(|&i| !space.is_pinned(i)) {
        state.u[i] = rng.gen_range(-1.0..1.0);
        state.u_old[i] = rng.gen_range(-1.0..1.0);
    }
    state
}

pub fn source_free(case: CaseTag, reflection: f64) -> ProblemSpec {
    let mut spec = ProblemSpec::named(case, 10.0 * PI).unwrap();
    spec.medium = Medium::homogeneous(1.0, 1.0);
    spec.reflection = reflection;
    spec
}

/// Energy after `steps` source-free steps from random data, relative to the
/// start: `(max over the run, final)`.
pub fn energy_history(spec: &ProblemSpec, space: &FeSpace, pml: &PmlProfile, seed: u64, steps: usize) -> (f64, f64) {
    let dt = cfl_dt(spec, space);
    let mut state = random_state(space, seed, dt);
    let mut st = Stepper::new(space, spec, dt, pml);
    let e0 = energy(space, &state.u_old, &state.u, dt);
    assert!(e0 > 0.0);
    let mut top: f64 = 0.0;
    for _ in 0..steps {
        st.step(space, spec, &mut state);
        top = top.max(energy(space, &state.u_old, &state.u, dt));
    }
    let last = energy(space, &state.u_old, &state.u, dt);
    (top / e0, last / e0)
}

/// Field left in `Ω₀` after the pulse has gone, measured against a run on a
/// domain wide enough that nothing returns from its boundary in the window.
/// Returns `(residual, peak)`, the residual relative to the interior peak.
pub fn layer_residual(h: f64, window: f64) -> (f64, f64) {
    let spec = ProblemSpec::named(CaseTag::Bump1d, 10.0 * PI).unwrap();
    let mut wide = spec.clone();
    wide.half_width = [1.0 + window, 0.0];
    let t0 = spec.t0();
    let run_to = |spec: &ProblemSpec| {
        let (space, pml) = uniform(spec, h);
        let dt = cfl_dt(spec, &space);
        let mut st = Stepper::new(&space, spec, dt, &pml);
        let mut state = WaveState::zeros(&space, t0, dt);
        let inside: Vec<usize> = (0..space.num_nodes()).filter(|&i| space.coords()[i][0].abs() <= 1.0).collect();
        let mut peak: f64 = 0.0;
        while state.time() < t0 + window {
            st.step(&space, spec, &mut state);
            peak = inside.iter().fold(peak, |m, &i| m.max(state.u[i].abs()));
        }
        (space, state.u, inside, peak)
    };
    let (space, u, inside, peak) = run_to(&spec);
    let (wide_space, wide_u, _, _) = run_to(&wide);
    let diff = inside.iter().fold(0.0f64, |m, &i| {
        let x = space.coords()[i];
        m.max((u[i] - wide_space.evaluate(&wide_u, &x).unwrap()).abs())
    });
    (diff / peak, peak)
}
