//! Incremental time-to-frequency transform over a sequence of adapted meshes.
//!
//! Each live element carries its own running sum `ΔU_E` at its local points.
//! When an element retires, its polynomial is evaluated at the points of the
//! finest grid it owns and added to `U_h`. Ownership follows the half-open
//! cell rule, so every fine node receives each element's share exactly once.

use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex64;

use crate::femspace::basis::LagrangeBasis;
use crate::femspace::FeSpace;
use crate::hierarchy::{AdaptedMesh, ElementId, NestedHierarchy};
use crate::problem::{Point, ProblemSpec};

const NO_OWNER: u32 = u32::MAX;

/// Gauss–Lobatto points of the finest mesh `𝒯ᴷ`: `p·n + 1` per axis.
#[derive(Debug, Clone)]
pub struct FineGrid {
    hier: Arc<NestedHierarchy>,
    p: usize,
    shape: [usize; 2],
    xi: Vec<f64>,
    /// Finest cell whose element deposits at each node, as a flat cell index.
    owner: Vec<u32>,
}

impl FineGrid {
    pub fn new(hier: Arc<NestedHierarchy>, p: usize, spec: &ProblemSpec) -> Self {
        let dim = hier.dim();
        let n = hier.lattice_cells();
        let shape = [p * n[0] as usize + 1, if dim == 2 { p * n[1] as usize + 1 } else { 1 }];
        let (xi, _) = crate::femspace::basis::gauss_lobatto(p);
        let ncx = n[0] as usize;
        let void_cell = |c: [u32; 2]| -> bool {
            spec.scatterer.as_ref().is_some_and(|s| {
                let e = ElementId::new((hier.num_levels() - 1) as u8, c);
                let (lo, hi) = hier.bounds(&e);
                s.contains_box(&lo, &hi, dim)
            })
        };
        let mut owner = vec![NO_OWNER; shape[0] * shape[1]];
        for iy in 0..shape[1] {
            let cy = cell_candidates(iy, p, n[1].max(1));
            for ix in 0..shape[0] {
                let cx = cell_candidates(ix, p, n[0]);
                // Half-open cell first, then the neighbours sharing the node.
                let order = [(cx.0, cy.0), (cx.1, cy.0), (cx.0, cy.1), (cx.1, cy.1)];
                for (a, b) in order {
                    let (Some(a), Some(b)) = (a, b) else { continue };
                    if !void_cell([a, b]) {
                        owner[iy * shape[0] + ix] = (b as usize * ncx + a as usize) as u32;
                        break;
                    }
                }
            }
        }
        Self { hier, p, shape, xi, owner }
    }

    pub fn hierarchy(&self) -> &Arc<NestedHierarchy> {
        &self.hier
    }

    pub fn degree(&self) -> usize {
        self.p
    }

    /// Points per axis (`ny = 1` in 1D).
    pub fn shape(&self) -> [usize; 2] {
        self.shape
    }

    pub fn len(&self) -> usize {
        self.shape[0] * self.shape[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Lattice coordinate of index `i` along one axis.
    pub fn lattice(&self, i: usize) -> f64 {
        (i / self.p) as f64 + self.xi[i % self.p]
    }

    pub fn position(&self, k: usize) -> Point {
        let (ix, iy) = (k % self.shape[0], k / self.shape[0]);
        let mut x = [self.hier.lattice_to_x(0, self.lattice(ix)), 0.0];
        if self.hier.dim() == 2 {
            x[1] = self.hier.lattice_to_x(1, self.lattice(iy));
        }
        x
    }

    pub fn positions(&self) -> Vec<Point> {
        (0..self.len()).map(|k| self.position(k)).collect()
    }

    /// Finest cell assigned to node `k`, or `None` inside an obstacle.
    pub fn owner_cell(&self, k: usize) -> Option<[u32; 2]> {
        let c = self.owner[k];
        if c == NO_OWNER {
            return None;
        }
        let ncx = self.hier.lattice_cells()[0];
        Some([c % ncx, c / ncx])
    }

    /// Samples a field of `space` at every fine node through the owning element.
    pub fn sample(&self, space: &FeSpace, u: &[f64]) -> Vec<f64> {
        let mesh = space.mesh();
        let mut out = vec![0.0; self.len()];
        let mut cache: HashMap<usize, (Vec<f64>, [u32; 2], [u32; 2])> = HashMap::new();
        let nl = space.local_shape();
        let basis = space.basis();
        let mut l0 = vec![0.0; nl[0]];
        let mut l1 = vec![0.0; nl[1]];
        for (k, o) in out.iter_mut().enumerate() {
            let Some(cell) = self.owner_cell(k) else { continue };
            let e = mesh.owner_of_cell(cell);
            let (loc, lo, hi) = cache.entry(e).or_insert_with(|| {
                let mut v = vec![0.0; space.nloc()];
                space.gather(e, u, &mut v);
                let el = &space.elements()[e];
                (v, el.lo, el.hi)
            });
            let idx = [k % self.shape[0], k / self.shape[0]];
            eval_tensor(basis, self, idx, *lo, *hi, &mut l0, &mut l1);
            let mut s = 0.0;
            for b in 0..nl[1] {
                for a in 0..nl[0] {
                    s += l0[a] * l1[b] * loc[b * nl[0] + a];
                }
            }
            *o = s;
        }
        out
    }
}

/// `(half-open cell, lower neighbour)` along one axis for node index `i`.
fn cell_candidates(i: usize, p: usize, n: u32) -> (Option<u32>, Option<u32>) {
    let c = (i / p) as u32;
    if i % p != 0 {
        return (Some(c), None);
    }
    let own = if c < n { Some(c) } else { None };
    let below = if c > 0 { Some(c - 1) } else { None };
    match own {
        Some(_) => (own, below),
        // Upper domain boundary belongs to the last cell.
        None => (below, None),
    }
}

fn eval_tensor(basis: &LagrangeBasis, grid: &FineGrid, idx: [usize; 2], lo: [u32; 2], hi: [u32; 2], l0: &mut [f64], l1: &mut [f64]) {
    let t0 = (grid.lattice(idx[0]) - lo[0] as f64) / (hi[0] - lo[0]) as f64;
    basis.eval_into(t0, l0);
    if grid.hier.dim() == 2 {
        let t1 = (grid.lattice(idx[1]) - lo[1] as f64) / (hi[1] - lo[1]) as f64;
        basis.eval_into(t1, l1);
    } else {
        l1[0] = 1.0;
    }
}

/// Half-open box indicator `χ_E` with the upper domain boundary included.
pub fn chi_e(hier: &NestedHierarchy, e: &ElementId, x: &Point) -> bool {
    let (lo, hi) = hier.lattice_box(e);
    let n = hier.lattice_cells();
    (0..hier.dim()).all(|a| {
        let mut l = hier.x_to_lattice(a, x[a]);
        let r = l.round();
        if (l - r).abs() < 1e-9 * (1.0 + r.abs()) {
            l = r;
        }
        let (lo, hi) = (lo[a] as f64, hi[a] as f64);
        (lo <= l && l < hi) || (l == hi && hi == n[a] as f64)
    })
}

/// Running transform `U_h = Σₙ Δt e^{iωtⁿ} uⁿ` split into deposited and live parts.
#[derive(Debug, Clone)]
pub struct FourierAccumulator {
    grid: FineGrid,
    omega: f64,
    u_h: Vec<Complex64>,
    mesh: Option<AdaptedMesh>,
    /// Live increments, aligned with the leaves of `mesh`.
    incr: Vec<Vec<Complex64>>,
    nl: [usize; 2],
    basis: LagrangeBasis,
}

impl FourierAccumulator {
    pub fn new(grid: FineGrid, omega: f64) -> Self {
        let p = grid.p;
        let nl = [p + 1, if grid.hier.dim() == 2 { p + 1 } else { 1 }];
        let n = grid.len();
        Self {
            grid,
            omega,
            u_h: vec![Complex64::new(0.0, 0.0); n],
            mesh: None,
            incr: Vec::new(),
            nl,
            basis: LagrangeBasis::gauss_lobatto(p),
        }
    }

    pub fn grid(&self) -> &FineGrid {
        &self.grid
    }

    /// Deposited part of `U_h` (excludes live increments).
    pub fn deposited(&self) -> &[Complex64] {
        &self.u_h
    }

    pub fn live_mesh(&self) -> Option<&AdaptedMesh> {
        self.mesh.as_ref()
    }

    /// Live increment of one element, if it is a leaf of the live mesh.
    pub fn increment(&self, e: &ElementId) -> Option<&[Complex64]> {
        let m = self.mesh.as_ref()?;
        m.index_of(e).map(|i| self.incr[i].as_slice())
    }

    /// `ΔU_E += Δt e^{iωt} u|_E` for every live, non-void element.
    pub fn update_increments(&mut self, space: &FeSpace, u: &[f64], t: f64, dt: f64) {
        debug_assert!(self.mesh.as_ref().is_some_and(|m| m.same_leaves(space.mesh())));
        let w = Complex64::from_polar(dt, self.omega * t);
        let mut loc = vec![0.0; space.nloc()];
        for (e, el) in space.elements().iter().enumerate() {
            if el.void {
                continue;
            }
            space.gather(e, u, &mut loc);
            for (d, &v) in self.incr[e].iter_mut().zip(&loc) {
                *d += w * v;
            }
        }
    }

    /// Deposits the increments of live elements that are not leaves of `new`
    /// (all of them when `new` is `None`).
    pub fn update_ft(&mut self, new: Option<&AdaptedMesh>) {
        let Some(old) = self.mesh.as_ref() else { return };
        let h = self.grid.hier.clone();
        let p = self.grid.p;
        let ncx = h.lattice_cells()[0];
        let mut l0 = vec![0.0; self.nl[0]];
        let mut l1 = vec![0.0; self.nl[1]];
        for (i, e) in old.leaves().iter().enumerate() {
            if new.is_some_and(|m| m.contains(e)) {
                continue;
            }
            let d = &self.incr[i];
            if d.iter().all(|z| z.re == 0.0 && z.im == 0.0) {
                continue;
            }
            let (lo, hi) = h.lattice_box(e);
            let yr = if h.dim() == 2 { lo[1] as usize * p..=hi[1] as usize * p } else { 0..=0 };
            for iy in yr {
                for ix in lo[0] as usize * p..=hi[0] as usize * p {
                    let k = iy * self.grid.shape[0] + ix;
                    let c = self.grid.owner[k];
                    if c == NO_OWNER {
                        continue;
                    }
                    let (cx, cy) = (c % ncx, c / ncx);
                    if cx < lo[0] || cx >= hi[0] || (h.dim() == 2 && (cy < lo[1] || cy >= hi[1])) {
                        continue;
                    }
                    eval_tensor(&self.basis, &self.grid, [ix, iy], lo, hi, &mut l0, &mut l1);
                    let mut s = Complex64::new(0.0, 0.0);
                    for b in 0..self.nl[1] {
                        for a in 0..self.nl[0] {
                            s += d[b * self.nl[0] + a] * (l0[a] * l1[b]);
                        }
                    }
                    self.u_h[k] += s;
                }
            }
        }
    }

    /// Re-aligns the live increments with `new`: survivors keep theirs, new elements start at zero.
    pub fn initialise_new_increments(&mut self, new: &AdaptedMesh) {
        let nloc = self.nl[0] * self.nl[1];
        let zero = Complex64::new(0.0, 0.0);
        let mut incr = Vec::with_capacity(new.len());
        for e in new.leaves() {
            let kept = self.mesh.as_ref().and_then(|m| m.index_of(e)).map(|i| std::mem::take(&mut self.incr[i]));
            incr.push(kept.unwrap_or_else(|| vec![zero; nloc]));
        }
        self.incr = incr;
        self.mesh = Some(new.clone());
    }

    /// Mesh change: deposit retiring elements, then re-align.
    pub fn remesh(&mut self, new: &AdaptedMesh) {
        self.update_ft(Some(new));
        self.initialise_new_increments(new);
    }

    /// Deposits everything still live and returns `U_h` on the fine grid.
    pub fn finish(mut self) -> Vec<Complex64> {
        self.update_ft(None);
        self.u_h
    }

    /// `U_h` as it would be after a final flush, without consuming the accumulator.
    pub fn snapshot(&self) -> Vec<Complex64> {
        let mut c = self.clone();
        c.update_ft(None);
        c.u_h
    }
}

/// Direct accumulation of `Σₙ Δt e^{iωtⁿ} uⁿ` at the fine nodes.
#[derive(Debug, Clone)]
pub struct NaiveAccumulator {
    omega: f64,
    pub values: Vec<Complex64>,
}

impl NaiveAccumulator {
    pub fn new(len: usize, omega: f64) -> Self {
        Self {
            omega,
            values: vec![Complex64::new(0.0, 0.0); len],
        }
    }

    pub fn add(&mut self, samples: &[f64], t: f64, dt: f64) {
        let w = Complex64::from_polar(dt, self.omega * t);
        for (v, &s) in self.values.iter_mut().zip(samples) {
            *v += w * s;
        }
    }

    /// Adds node values of a space whose nodes map onto the fine grid through `index`.
    pub fn add_indexed(&mut self, u: &[f64], index: &[usize], t: f64, dt: f64) {
        let w = Complex64::from_polar(dt, self.omega * t);
        for (&k, &s) in index.iter().zip(u) {
            self.values[k] += w * s;
        }
    }
}
