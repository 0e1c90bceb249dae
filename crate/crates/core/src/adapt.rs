//! Mesh update: mark parents near the front, dilate, rebuild the leaves.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use crate::femspace::{project_element, FeSpace};
use crate::hierarchy::{get_child_elements, get_parent_elements, mark_nearby_elements, AdaptedMesh, ElementId};
use crate::problem::{Point, ProblemSpec, Source};
use crate::Result;

/// Thresholds and horizon of the mesh update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptParams {
    /// Projection error threshold `η₀`.
    pub eta0: f64,
    /// Stopping threshold `ε₀`.
    pub eps0: f64,
    /// Time between mesh updates.
    pub t_up: f64,
    /// Maximal wave speed used for the safety dilation.
    pub c_max: f64,
}

impl AdaptParams {
    pub fn defaults(omega: f64, c_max: f64) -> Self {
        Self {
            eta0: omega / 100.0,
            eps0: omega / 100.0,
            t_up: PI / omega,
            c_max,
        }
    }

    pub fn dilation_radius(&self) -> f64 {
        self.c_max * self.t_up
    }
}

/// True if the closed box meets the support of the source data at time `t`:
/// the incoming wavelet for plane-wave problems, `supp F` while `ψ(ωt) ≠ 0`
/// for external sources.
pub fn source_meets_box(spec: &ProblemSpec, lo: &Point, hi: &Point, t: f64) -> bool {
    match &spec.source {
        Source::PlaneWavelet => spec.wavelet_meets_box(lo, hi, t),
        Source::External(_) => {
            if (spec.omega * t).abs() > spec.wavelet.xi0 {
                return false;
            }
            match spec.source_box() {
                Some(b) => (0..spec.dim).all(|a| lo[a] <= b.hi[a] && hi[a] >= b.lo[a]),
                None => false,
            }
        }
    }
}

/// Refinement test for a parent whose subelements are leaves of `space`.
pub fn needs_refinement(space: &FeSpace, e: &ElementId, u: &[f64], t: f64, spec: &ProblemSpec, eta0: f64) -> Result<bool> {
    let (lo, hi) = space.hierarchy().bounds(e);
    if source_meets_box(spec, &lo, &hi, t) {
        return Ok(true);
    }
    let (_, eta) = project_element(space, u, e)?;
    Ok(eta > eta0)
}

/// Parents that keep their refinement.
pub fn mark_elements(
    space: &FeSpace,
    parents: &BTreeSet<ElementId>,
    u: &[f64],
    t: f64,
    spec: &ProblemSpec,
    eta0: f64,
) -> Result<BTreeSet<ElementId>> {
    let h = space.hierarchy();
    let mut marked = BTreeSet::new();
    for e in parents {
        let has_sub_parent = h.subelements(e)?.iter().any(|c| parents.contains(c));
        if has_sub_parent || needs_refinement(space, e, u, t, spec, eta0)? {
            marked.insert(*e);
        }
    }
    Ok(marked)
}

/// Next adapted mesh from the field `u` on `space` at time `t`.
pub fn update_mesh(space: &FeSpace, u: &[f64], t: f64, spec: &ProblemSpec, params: &AdaptParams) -> Result<AdaptedMesh> {
    let mesh = space.mesh();
    let parents = get_parent_elements(mesh);
    let marked = mark_elements(space, &parents, u, t, spec, params.eta0)?;
    let next = mark_nearby_elements(mesh.hierarchy(), &marked, params.dilation_radius());
    get_child_elements(mesh.hierarchy(), &next)
}

/// Global stopping rule: past the source horizon and the field is small at every node.
pub fn should_stop(u: &[f64], t: f64, spec: &ProblemSpec, eps0: f64) -> bool {
    t > spec.t_f() && u.iter().all(|v| v.abs() <= eps0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::femspace::build_space;
    use crate::hierarchy::build_hierarchy;
    use crate::problem::CaseTag;
    use std::sync::Arc;

    fn setup_1d() -> (ProblemSpec, Arc<crate::hierarchy::NestedHierarchy>) {
        let omega = 10.0 * PI;
        let spec = ProblemSpec::named(CaseTag::Bump1d, omega).unwrap();
        let h = Arc::new(build_hierarchy(&[0.2, 0.02], [1.0, 0.0], PI / omega, 1).unwrap());
        (spec, h)
    }

    fn coarse_at(h: &Arc<crate::hierarchy::NestedHierarchy>, x: f64) -> ElementId {
        let m = AdaptedMesh::coarsest(h.clone());
        m.leaves()[m.locate(&[x, 0.0]).unwrap()]
    }

    #[test]
    fn zero_field_coarsens_fully() {
        let (spec, h) = setup_1d();
        let space = build_space(&AdaptedMesh::finest(h.clone()), 2, &spec).unwrap();
        let u = vec![0.0; space.num_nodes()];
        let params = AdaptParams::defaults(spec.omega, 2.0);
        let mesh = update_mesh(&space, &u, 10.0, &spec, &params).unwrap();
        assert!(mesh.same_leaves(&AdaptedMesh::coarsest(h.clone())));
        let parents = get_parent_elements(&AdaptedMesh::coarsest(h));
        assert!(parents.is_empty());
    }

    #[test]
    fn front_is_refined() {
        let (spec, h) = setup_1d();
        let space = build_space(&AdaptedMesh::finest(h.clone()), 2, &spec).unwrap();
        let u = vec![0.0; space.num_nodes()];
        let params = AdaptParams::defaults(spec.omega, 2.0);
        // Wavelet centre at x = 0.3.
        let t = 0.3;
        let mesh = update_mesh(&space, &u, t, &spec, &params).unwrap();
        let i = mesh.locate(&[0.3, 0.0]).unwrap();
        assert_eq!(mesh.leaves()[i].level, 1);
        let far = mesh.locate(&[-0.7, 0.0]).unwrap();
        assert_eq!(mesh.leaves()[far].level, 0);
        let e = coarse_at(&h, 0.3);
        assert!(needs_refinement(&space, &e, &u, 0.3, &spec, 1.0).unwrap());
        // Idempotent for a static field.
        let space2 = build_space(&mesh, 2, &spec).unwrap();
        let u2 = vec![0.0; space2.num_nodes()];
        let again = update_mesh(&space2, &u2, t, &spec, &params).unwrap();
        assert!(again.same_leaves(&mesh));
    }

    #[test]
    fn polynomial_field_is_not_marked() {
        let (spec, h) = setup_1d();
        let space = build_space(&AdaptedMesh::finest(h.clone()), 2, &spec).unwrap();
        let u = space.interpolate(|x| 3.0 * x[0] - 1.0);
        let e = coarse_at(&h, -0.5);
        assert!(!needs_refinement(&space, &e, &u, -5.0, &spec, 1e-9).unwrap());
        let k = space.interpolate(|x| (x[0] - 0.51).abs());
        let e = coarse_at(&h, 0.5);
        assert!(needs_refinement(&space, &e, &k, -5.0, &spec, 1e-4).unwrap());
    }

    #[test]
    fn stop_rule() {
        let (spec, _) = setup_1d();
        let tf = spec.t_f();
        assert!(should_stop(&[0.0, 0.01], tf + 0.1, &spec, 0.1));
        assert!(!should_stop(&[0.0], tf, &spec, 0.1));
        assert!(!should_stop(&[0.0, 0.5], tf + 0.1, &spec, 0.1));
    }

    #[test]
    fn point_source_support() {
        let spec = ProblemSpec::named(CaseTag::Point2d, 10.0 * PI).unwrap();
        assert!(source_meets_box(&spec, &[0.4, 0.4], &[0.6, 0.6], 0.0));
        assert!(!source_meets_box(&spec, &[0.4, 0.4], &[0.6, 0.6], 0.2));
        assert!(!source_meets_box(&spec, &[-0.6, -0.6], &[-0.4, -0.4], 0.0));
    }
}
