//! Continuous tensor-product Gauss–Lobatto space on an adapted mesh.
//!
//! Hanging nodes are eliminated when the space is built: every local
//! Gauss–Lobatto point of every leaf stores a short list of `(node, weight)`
//! pairs expressing its value through true nodes. A point on a fine edge that
//! lies inside a longer neighbouring edge takes the value of that edge's
//! polynomial; edge end points that hang in turn are resolved recursively.

pub mod basis;

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::hierarchy::{AdaptedMesh, ElementId, NestedHierarchy};
use crate::problem::{Point, ProblemSpec};

pub use basis::LagrangeBasis;

/// Position of a node along one axis, in lattice units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum AxisPos {
    /// Twice the lattice coordinate (vertices and, for even degree, segment midpoints).
    Exact(u32),
    /// Interior Gauss–Lobatto point `j` of the segment `[start, start + width]`.
    Inner { start: u32, width: u32, j: u8 },
}

type NodeKey = [AxisPos; 2];

fn axis_pos(p: usize, start: u32, width: u32, j: usize) -> AxisPos {
    if j == 0 {
        AxisPos::Exact(2 * start)
    } else if j == p {
        AxisPos::Exact(2 * (start + width))
    } else if 2 * j == p {
        AxisPos::Exact(2 * start + width)
    } else {
        AxisPos::Inner {
            start,
            width,
            j: j as u8,
        }
    }
}

/// Per-leaf data of the space.
#[derive(Debug, Clone)]
pub struct ElementData {
    pub id: ElementId,
    /// Lattice box.
    pub lo: [u32; 2],
    pub hi: [u32; 2],
    /// Physical side lengths (1 along the unused axis in 1D).
    pub sides: [f64; 2],
    pub measure: f64,
    /// Inside a sound-soft obstacle; excluded from all integrals.
    pub void: bool,
    /// Slot of the auxiliary absorbing-layer field, if the element lies in the strip.
    pub pml_slot: Option<u32>,
}

/// Nodal space `𝒰_𝒯` on one adapted mesh together with everything needed to
/// apply the lumped operator and the projections.
#[derive(Debug, Clone)]
pub struct FeSpace {
    mesh: AdaptedMesh,
    dim: usize,
    basis: LagrangeBasis,
    /// Local point counts per axis (`[p+1, 1]` in 1D).
    nl: [usize; 2],
    keys: Vec<NodeKey>,
    coords: Vec<Point>,
    sigma: Vec<f64>,
    inv_beta_sigma: Vec<f64>,
    boundary: Vec<bool>,
    obstacle: Vec<bool>,
    elements: Vec<ElementData>,
    con_ptr: Vec<u32>,
    con_node: Vec<u32>,
    con_w: Vec<f64>,
    /// `α` at the local points of each element.
    alpha: Vec<f64>,
    /// Reference quadrature weight of each local point.
    qw: Vec<f64>,
    pml_elements: Vec<u32>,
}

struct Builder<'a> {
    mesh: &'a AdaptedMesh,
    h: &'a NestedHierarchy,
    basis: &'a LagrangeBasis,
    p: usize,
    keys: Vec<NodeKey>,
    key_index: HashMap<NodeKey, u32>,
    vertex_memo: HashMap<[u32; 2], Vec<(u32, f64)>>,
}

impl<'a> Builder<'a> {
    fn node(&mut self, key: NodeKey) -> u32 {
        if let Some(&i) = self.key_index.get(&key) {
            return i;
        }
        let i = self.keys.len() as u32;
        self.keys.push(key);
        self.key_index.insert(key, i);
        i
    }

    fn leaf_box(&self, cell: [u32; 2]) -> ([u32; 2], [u32; 2]) {
        let li = self.mesh.owner_of_cell(cell);
        self.h.lattice_box(&self.mesh.leaves()[li])
    }

    /// Values along a segment `[s0, s1]` on the line `x_normal = c`, expressed
    /// through true nodes, at lattice position `t` along the tangential axis.
    fn on_segment(&mut self, normal: usize, c: u32, s0: u32, s1: u32, t: f64, depth: usize) -> Vec<(u32, f64)> {
        let tangent = 1 - normal;
        let eta = (t - s0 as f64) / (s1 - s0) as f64;
        let l = self.basis.eval(eta);
        let mut out: Vec<(u32, f64)> = Vec::new();
        for (j, &w) in l.iter().enumerate() {
            if w.abs() < 1e-14 {
                continue;
            }
            if j == 0 || j == self.p {
                let end = if j == 0 { s0 } else { s1 };
                let mut v = [0u32; 2];
                v[normal] = c;
                v[tangent] = end;
                for (n, wv) in self.vertex(v, depth + 1) {
                    push_merge(&mut out, n, w * wv);
                }
            } else {
                let mut key = [AxisPos::Exact(0); 2];
                key[normal] = AxisPos::Exact(2 * c);
                key[tangent] = axis_pos(self.p, s0, s1 - s0, j);
                let n = self.node(key);
                push_merge(&mut out, n, w);
            }
        }
        out
    }

    fn vertex(&mut self, v: [u32; 2], depth: usize) -> Vec<(u32, f64)> {
        assert!(depth < 64, "hanging-node constraints do not terminate");
        if let Some(r) = self.vertex_memo.get(&v) {
            return r.clone();
        }
        let n = self.h.lattice_cells();
        let mut hang: Option<(usize, u32, u32, u32)> = None;
        'search: for dy in 0..2u32 {
            for dx in 0..2u32 {
                if (v[0] == 0 && dx == 0) || (v[1] == 0 && dy == 0) {
                    continue;
                }
                let cell = [v[0] + dx - 1, v[1] + dy - 1];
                if cell[0] >= n[0] || cell[1] >= n[1] {
                    continue;
                }
                let (lo, hi) = self.leaf_box(cell);
                for normal in 0..2 {
                    let t = 1 - normal;
                    if (v[normal] == lo[normal] || v[normal] == hi[normal]) && lo[t] < v[t] && v[t] < hi[t] {
                        hang = Some((normal, v[normal], lo[t], hi[t]));
                        break 'search;
                    }
                }
            }
        }
        let r = match hang {
            Some((normal, c, s0, s1)) => self.on_segment(normal, c, s0, s1, v[1 - normal] as f64, depth),
            None => vec![(self.node([AxisPos::Exact(2 * v[0]), AxisPos::Exact(2 * v[1])]), 1.0)],
        };
        self.vertex_memo.insert(v, r.clone());
        r
    }

    /// Constraint of local point `(a, b)` of a 2D leaf with lattice box `lo..hi`.
    fn local_2d(&mut self, lo: [u32; 2], hi: [u32; 2], ab: [usize; 2]) -> Vec<(u32, f64)> {
        let p = self.p;
        let n = self.h.lattice_cells();
        let on = [ab[0] == 0 || ab[0] == p, ab[1] == 0 || ab[1] == p];
        let corner = |a: usize| if ab[a] == 0 { lo[a] } else { hi[a] };
        match on {
            [false, false] => {
                let key = [
                    axis_pos(p, lo[0], hi[0] - lo[0], ab[0]),
                    axis_pos(p, lo[1], hi[1] - lo[1], ab[1]),
                ];
                vec![(self.node(key), 1.0)]
            }
            [true, true] => self.vertex([corner(0), corner(1)], 0),
            _ => {
                let normal = if on[0] { 0 } else { 1 };
                let t = 1 - normal;
                let c = corner(normal);
                let (s0, s1) = (lo[t], hi[t]);
                let tpos = s0 as f64 + (s1 - s0) as f64 * self.basis.nodes()[ab[t]];
                let own = |this: &mut Self| {
                    let mut key = [AxisPos::Exact(0); 2];
                    key[normal] = AxisPos::Exact(2 * c);
                    key[t] = axis_pos(p, s0, s1 - s0, ab[t]);
                    vec![(this.node(key), 1.0)]
                };
                let outward_low = ab[normal] == 0;
                if (outward_low && c == 0) || (!outward_low && c == n[normal]) {
                    return own(self);
                }
                let mut cell = [0u32; 2];
                cell[normal] = if outward_low { c - 1 } else { c };
                cell[t] = s0;
                let (nlo, nhi) = self.leaf_box(cell);
                if nlo[t] <= s0 && nhi[t] >= s1 && nhi[t] - nlo[t] > s1 - s0 {
                    self.on_segment(normal, c, nlo[t], nhi[t], tpos, 0)
                } else {
                    own(self)
                }
            }
        }
    }
}

fn push_merge(out: &mut Vec<(u32, f64)>, n: u32, w: f64) {
    if let Some(e) = out.iter_mut().find(|e| e.0 == n) {
        e.1 += w;
    } else {
        out.push((n, w));
    }
}

/// Builds the Gauss–Lobatto space of degree `p` on `mesh`.
pub fn build_space(mesh: &AdaptedMesh, p: usize, spec: &ProblemSpec) -> Result<FeSpace> {
    if p == 0 || p > 16 {
        return Err(Error::InvalidConfig(format!("polynomial degree must lie in 1..=16, got {p}")));
    }
    let h = mesh.hierarchy().clone();
    if h.dim() != spec.dim {
        return Err(Error::InvalidConfig("mesh and problem dimensions differ".into()));
    }
    let dim = h.dim();
    let basis = LagrangeBasis::gauss_lobatto(p);
    let nl = [p + 1, if dim == 2 { p + 1 } else { 1 }];
    let nloc = nl[0] * nl[1];
    let hf = h.h_fine();
    let mut b = Builder {
        mesh,
        h: &h,
        basis: &basis,
        p,
        keys: Vec::new(),
        key_index: HashMap::new(),
        vertex_memo: HashMap::new(),
    };
    let mut elements = Vec::with_capacity(mesh.len());
    let mut con_ptr = Vec::with_capacity(mesh.len() * nloc + 1);
    let mut con_node = Vec::with_capacity(mesh.len() * nloc);
    let mut con_w = Vec::with_capacity(mesh.len() * nloc);
    con_ptr.push(0u32);
    let mut pml_elements = Vec::new();
    for e in mesh.leaves() {
        let (lo, hi) = h.lattice_box(e);
        let mut sides = [1.0; 2];
        for a in 0..dim {
            sides[a] = (hi[a] - lo[a]) as f64 * hf;
        }
        let (blo, bhi) = h.bounds(e);
        let void = spec
            .scatterer
            .as_ref()
            .is_some_and(|s| s.contains_box(&blo, &bhi, dim));
        let pml_slot = if h.is_pml(e) && !void {
            pml_elements.push(elements.len() as u32);
            Some(pml_elements.len() as u32 - 1)
        } else {
            None
        };
        elements.push(ElementData {
            id: *e,
            lo,
            hi,
            sides,
            measure: sides[0] * sides[1],
            void,
            pml_slot,
        });
        for bq in 0..nl[1] {
            for aq in 0..nl[0] {
                let entries = if dim == 1 {
                    let key = [axis_pos(p, lo[0], hi[0] - lo[0], aq), AxisPos::Exact(0)];
                    vec![(b.node(key), 1.0)]
                } else {
                    b.local_2d(lo, hi, [aq, bq])
                };
                for (n, w) in entries {
                    con_node.push(n);
                    con_w.push(w);
                }
                con_ptr.push(con_node.len() as u32);
            }
        }
    }
    let keys = b.keys;
    let n = h.lattice_cells();
    let coord_of = |ap: &AxisPos| -> f64 {
        match *ap {
            AxisPos::Exact(i2) => i2 as f64 / 2.0,
            AxisPos::Inner { start, width, j } => start as f64 + width as f64 * basis.nodes()[j as usize],
        }
    };
    let coords: Vec<Point> = keys
        .iter()
        .map(|k| {
            let mut x = [0.0; 2];
            for a in 0..dim {
                x[a] = h.lattice_to_x(a, coord_of(&k[a]));
            }
            x
        })
        .collect();
    let boundary: Vec<bool> = keys
        .iter()
        .map(|k| (0..dim).any(|a| matches!(k[a], AxisPos::Exact(i2) if i2 == 0 || i2 == 2 * n[a])))
        .collect();

    let w1 = basis.weights();
    let mut qw = vec![0.0; nloc];
    for bq in 0..nl[1] {
        for aq in 0..nl[0] {
            qw[bq * nl[0] + aq] = w1[aq] * if dim == 2 { w1[bq] } else { 1.0 };
        }
    }

    let nn = keys.len();
    let mut sigma = vec![0.0; nn];
    let mut obstacle = vec![false; nn];
    let mut alpha = vec![0.0; elements.len() * nloc];
    for (ei, el) in elements.iter().enumerate() {
        let base = ei * nloc;
        for q in 0..nloc {
            let r = con_ptr[base + q] as usize..con_ptr[base + q + 1] as usize;
            if el.void {
                for k in r {
                    obstacle[con_node[k] as usize] = true;
                }
                continue;
            }
            let wq = qw[q] * el.measure;
            for k in r {
                sigma[con_node[k] as usize] += wq * con_w[k];
            }
        }
    }
    let mut space = FeSpace {
        mesh: mesh.clone(),
        dim,
        basis,
        nl,
        keys,
        coords,
        sigma,
        inv_beta_sigma: Vec::new(),
        boundary,
        obstacle,
        elements,
        con_ptr,
        con_node,
        con_w,
        alpha: Vec::new(),
        qw,
        pml_elements,
    };
    for ei in 0..space.elements.len() {
        let pts = space.element_points(ei);
        for (q, x) in pts.iter().enumerate() {
            alpha[ei * nloc + q] = spec.medium.coefficients(x).0;
        }
    }
    space.alpha = alpha;
    space.inv_beta_sigma = space
        .coords
        .iter()
        .zip(&space.sigma)
        .map(|(x, &s)| {
            let beta = spec.medium.coefficients(x).1;
            if s > 0.0 {
                1.0 / (beta * s)
            } else {
                0.0
            }
        })
        .collect();
    Ok(space)
}

impl FeSpace {
    pub fn mesh(&self) -> &AdaptedMesh {
        &self.mesh
    }

    pub fn hierarchy(&self) -> &NestedHierarchy {
        self.mesh.hierarchy()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.basis.degree()
    }

    pub fn basis(&self) -> &LagrangeBasis {
        &self.basis
    }

    /// Number of local points per element.
    pub fn nloc(&self) -> usize {
        self.nl[0] * self.nl[1]
    }

    pub fn local_shape(&self) -> [usize; 2] {
        self.nl
    }

    pub fn num_nodes(&self) -> usize {
        self.keys.len()
    }

    pub fn coords(&self) -> &[Point] {
        &self.coords
    }

    /// Lumped weights `σ_x`.
    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn inv_beta_sigma(&self) -> &[f64] {
        &self.inv_beta_sigma
    }

    pub fn is_boundary(&self, i: usize) -> bool {
        self.boundary[i]
    }

    /// Nodes touched by an obstacle element; they carry Dirichlet data.
    pub fn is_obstacle(&self, i: usize) -> bool {
        self.obstacle[i]
    }

    pub fn is_pinned(&self, i: usize) -> bool {
        self.boundary[i] || self.obstacle[i]
    }

    /// Frees the nodes on `∂Ω` so that a boundary condition other than
    /// homogeneous Dirichlet can act there.
    pub fn release_boundary(&mut self) {
        self.boundary.iter_mut().for_each(|b| *b = false);
    }

    pub fn elements(&self) -> &[ElementData] {
        &self.elements
    }

    /// Element indices carrying the auxiliary field, in slot order.
    pub fn pml_elements(&self) -> &[u32] {
        &self.pml_elements
    }

    pub fn quadrature_weights(&self) -> &[f64] {
        &self.qw
    }

    pub fn element_bounds(&self, e: usize) -> (Point, Point) {
        self.hierarchy().bounds(&self.elements[e].id)
    }

    /// Constraint entries `(node, weight)` of local point `q` of element `e`.
    #[inline]
    pub fn constraints(&self, e: usize, q: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let k = e * self.nloc() + q;
        let r = self.con_ptr[k] as usize..self.con_ptr[k + 1] as usize;
        self.con_node[r.clone()]
            .iter()
            .zip(&self.con_w[r])
            .map(|(&n, &w)| (n as usize, w))
    }

    /// True if local point `q` of `e` is a true node (no hanging constraint).
    pub fn is_free_point(&self, e: usize, q: usize) -> bool {
        let k = e * self.nloc() + q;
        self.con_ptr[k + 1] - self.con_ptr[k] == 1 && self.con_w[self.con_ptr[k] as usize] == 1.0
    }

    /// Physical coordinates of the local points of element `e`.
    pub fn element_points(&self, e: usize) -> Vec<Point> {
        let el = &self.elements[e];
        let h = self.hierarchy();
        let xi = self.basis.nodes();
        let mut out = Vec::with_capacity(self.nloc());
        for b in 0..self.nl[1] {
            for a in 0..self.nl[0] {
                let mut x = [0.0; 2];
                x[0] = h.lattice_to_x(0, el.lo[0] as f64 + (el.hi[0] - el.lo[0]) as f64 * xi[a]);
                if self.dim == 2 {
                    x[1] = h.lattice_to_x(1, el.lo[1] as f64 + (el.hi[1] - el.lo[1]) as f64 * xi[b]);
                }
                out.push(x);
            }
        }
        out
    }

    /// Local values of a nodal field on element `e`.
    #[inline]
    pub fn gather(&self, e: usize, u: &[f64], out: &mut [f64]) {
        let nloc = self.nloc();
        let base = e * nloc;
        for (q, o) in out.iter_mut().enumerate().take(nloc) {
            let (s, t) = (self.con_ptr[base + q] as usize, self.con_ptr[base + q + 1] as usize);
            let mut v = 0.0;
            for k in s..t {
                v += self.con_w[k] * u[self.con_node[k] as usize];
            }
            *o = v;
        }
    }

    /// Adds local contributions `r` to global nodes through the constraints.
    #[inline]
    pub fn scatter(&self, e: usize, r: &[f64], out: &mut [f64]) {
        let nloc = self.nloc();
        let base = e * nloc;
        for (q, &rv) in r.iter().enumerate().take(nloc) {
            let (s, t) = (self.con_ptr[base + q] as usize, self.con_ptr[base + q + 1] as usize);
            for k in s..t {
                out[self.con_node[k] as usize] += self.con_w[k] * rv;
            }
        }
    }

    /// Gradient of the local polynomial at the local points.
    pub fn local_gradient(&self, e: usize, u_loc: &[f64], gx: &mut [f64], gy: &mut [f64]) {
        let el = &self.elements[e];
        let [n0, n1] = self.nl;
        let d = self.basis.deriv_matrix();
        let p1 = self.basis.len();
        let ihx = 1.0 / el.sides[0];
        for b in 0..n1 {
            for a in 0..n0 {
                let mut s = 0.0;
                for i in 0..n0 {
                    s += d[a * p1 + i] * u_loc[b * n0 + i];
                }
                gx[b * n0 + a] = s * ihx;
            }
        }
        if self.dim == 2 {
            let ihy = 1.0 / el.sides[1];
            for b in 0..n1 {
                for a in 0..n0 {
                    let mut s = 0.0;
                    for j in 0..n1 {
                        s += d[b * p1 + j] * u_loc[j * n0 + a];
                    }
                    gy[b * n0 + a] = s * ihy;
                }
            }
        }
    }

    /// Local stiffness action `r_i = Σ_q W_q |E| c(q) (∇u + s)(q)·∇φ_i(q)`.
    fn kernel(&self, e: usize, u_loc: &[f64], coef: &[f64], s: Option<(&[f64], &[f64])>, scratch: &mut Scratch, r: &mut [f64]) {
        let el = &self.elements[e];
        let [n0, n1] = self.nl;
        let nloc = n0 * n1;
        let d = self.basis.deriv_matrix();
        let p1 = self.basis.len();
        let (gx, gy) = (&mut scratch.gx[..nloc], &mut scratch.gy[..nloc]);
        self.local_gradient(e, u_loc, gx, gy);
        for q in 0..nloc {
            let c = self.qw[q] * el.measure * coef[q];
            let (sx, sy) = match s {
                Some((sx, sy)) => (sx[q], if self.dim == 2 { sy[q] } else { 0.0 }),
                None => (0.0, 0.0),
            };
            gx[q] = c * (gx[q] + sx);
            gy[q] = c * (gy[q] + sy);
        }
        let ihx = 1.0 / el.sides[0];
        for b in 0..n1 {
            for i in 0..n0 {
                let mut acc = 0.0;
                for a in 0..n0 {
                    acc += d[a * p1 + i] * gx[b * n0 + a];
                }
                r[b * n0 + i] = acc * ihx;
            }
        }
        if self.dim == 2 {
            let ihy = 1.0 / el.sides[1];
            for j in 0..n1 {
                for a in 0..n0 {
                    let mut acc = 0.0;
                    for b in 0..n1 {
                        acc += d[b * p1 + j] * gy[b * n0 + a];
                    }
                    r[j * n0 + a] += acc * ihy;
                }
            }
        }
    }

    /// Adds `(c ∇u_loc, ∇w_x)_E` to `out` for local values `u_loc` and a
    /// coefficient `c` given at the local points.
    pub fn add_element_stiffness(&self, e: usize, u_loc: &[f64], coef: &[f64], out: &mut [f64]) {
        let mut scratch = Scratch::new(self.nloc());
        let mut r = vec![0.0; self.nloc()];
        self.kernel(e, u_loc, coef, None, &mut scratch, &mut r);
        self.scatter(e, &r, out);
    }

    /// Divides an assembled vector by `β σ_x` and zeroes pinned nodes.
    pub fn finish_operator(&self, out: &mut [f64]) {
        for (o, &ibs) in out.iter_mut().zip(&self.inv_beta_sigma) {
            *o *= ibs;
        }
        self.zero_dirichlet(out);
    }

    pub fn zero_dirichlet(&self, out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            if self.boundary[i] || self.obstacle[i] {
                *o = 0.0;
            }
        }
    }

    /// `ℒ_𝒯(u, s)(x) = (α(∇u + s), ∇w_x)_𝒯 / (β(x) σ_x)`, zero at pinned nodes.
    pub fn apply_operator(&self, u: &[f64], s: Option<&PmlField>, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        let nloc = self.nloc();
        let mut scratch = Scratch::new(nloc);
        let mut u_loc = vec![0.0; nloc];
        let mut r = vec![0.0; nloc];
        for (e, el) in self.elements.iter().enumerate() {
            if el.void {
                continue;
            }
            self.gather(e, u, &mut u_loc);
            let coef = &self.alpha[e * nloc..(e + 1) * nloc];
            let sl = match (s, el.pml_slot) {
                (Some(f), Some(slot)) => Some(f.element(slot as usize)),
                _ => None,
            };
            self.kernel(e, &u_loc, coef, sl, &mut scratch, &mut r);
            self.scatter(e, &r, out);
        }
        self.finish_operator(out);
    }

    /// Lumped projection `(F, w_x)_𝒯 / σ_x` of a function.
    pub fn lumped_projection(&self, f: impl Fn(&Point) -> f64) -> Vec<f64> {
        let mut out = vec![0.0; self.num_nodes()];
        for (e, el) in self.elements.iter().enumerate() {
            if el.void {
                continue;
            }
            let pts = self.element_points(e);
            let r: Vec<f64> = pts
                .iter()
                .enumerate()
                .map(|(q, x)| self.qw[q] * el.measure * f(x))
                .collect();
            self.scatter(e, &r, &mut out);
        }
        for (o, &s) in out.iter_mut().zip(&self.sigma) {
            *o = if s > 0.0 { *o / s } else { 0.0 };
        }
        out
    }

    /// Nodal interpolant of a function.
    pub fn interpolate(&self, f: impl Fn(&Point) -> f64) -> Vec<f64> {
        self.coords.iter().map(f).collect()
    }

    /// 1D Lagrange values at local coordinate `xi` of each axis, tensorised.
    fn tensor_basis(&self, xi: [f64; 2], out: &mut [f64]) {
        let [n0, n1] = self.nl;
        let mut l0 = [0.0; 17];
        let mut l1 = [0.0; 17];
        self.basis.eval_into(xi[0], &mut l0[..n0]);
        if self.dim == 2 {
            self.basis.eval_into(xi[1], &mut l1[..n1]);
        } else {
            l1[0] = 1.0;
        }
        for b in 0..n1 {
            for a in 0..n0 {
                out[b * n0 + a] = l0[a] * l1[b];
            }
        }
    }

    /// Local coordinates of a lattice position inside element `e`.
    fn local_coords(&self, e: usize, lat: [f64; 2]) -> [f64; 2] {
        let el = &self.elements[e];
        let mut xi = [0.0; 2];
        for a in 0..self.dim {
            xi[a] = (lat[a] - el.lo[a] as f64) / (el.hi[a] - el.lo[a]) as f64;
        }
        xi
    }

    /// Value of the piecewise polynomial at `x`.
    pub fn evaluate(&self, u: &[f64], x: &Point) -> Result<f64> {
        let e = self.mesh.locate(x)?;
        let h = self.hierarchy();
        let lat = [h.x_to_lattice(0, x[0]), h.x_to_lattice(1, x[1])];
        let xi = self.local_coords(e, lat);
        let nloc = self.nloc();
        let mut phi = vec![0.0; nloc];
        let mut loc = vec![0.0; nloc];
        self.tensor_basis(xi, &mut phi);
        self.gather(e, u, &mut loc);
        Ok(phi.iter().zip(&loc).map(|(a, b)| a * b).sum())
    }

    /// Value of the local polynomial of element `e` at physical point `x`,
    /// which may lie on the element boundary.
    pub fn evaluate_in_element(&self, u: &[f64], e: usize, x: &Point) -> f64 {
        let h = self.hierarchy();
        let lat = [h.x_to_lattice(0, x[0]), h.x_to_lattice(1, x[1])];
        let xi = self.local_coords(e, lat);
        let nloc = self.nloc();
        let mut phi = vec![0.0; nloc];
        let mut loc = vec![0.0; nloc];
        self.tensor_basis(xi, &mut phi);
        self.gather(e, u, &mut loc);
        phi.iter().zip(&loc).map(|(a, b)| a * b).sum()
    }

    /// Node index for a position on the finest uniform grid, when the space is
    /// built on a uniform single-width mesh. Returns `None` otherwise.
    pub fn fine_grid_indices(&self) -> Option<Vec<usize>> {
        let h = self.hierarchy();
        if self.elements.iter().any(|e| (0..self.dim).any(|a| e.hi[a] - e.lo[a] != 1)) {
            return None;
        }
        let p = self.degree();
        let n = h.lattice_cells();
        let stride = p * n[0] as usize + 1;
        let conv = |ap: &AxisPos| -> usize {
            match *ap {
                AxisPos::Exact(i2) if i2 % 2 == 0 => (i2 / 2) as usize * p,
                AxisPos::Exact(i2) => ((i2 - 1) / 2) as usize * p + p / 2,
                AxisPos::Inner { start, j, .. } => start as usize * p + j as usize,
            }
        };
        Some(
            self.keys
                .iter()
                .map(|k| conv(&k[0]) + if self.dim == 2 { conv(&k[1]) * stride } else { 0 })
                .collect(),
        )
    }
}

/// Scratch buffers for the element kernel.
struct Scratch {
    gx: Vec<f64>,
    gy: Vec<f64>,
}

impl Scratch {
    fn new(n: usize) -> Self {
        Self {
            gx: vec![0.0; n],
            gy: vec![0.0; n],
        }
    }
}

/// Auxiliary absorbing-layer field: per strip element, `d` components at the local points.
#[derive(Debug, Clone, PartialEq)]
pub struct PmlField {
    dim: usize,
    nloc: usize,
    data: Vec<f64>,
}

impl PmlField {
    pub fn zeros(space: &FeSpace) -> Self {
        Self {
            dim: space.dim(),
            nloc: space.nloc(),
            data: vec![0.0; space.pml_elements().len() * space.dim() * space.nloc()],
        }
    }

    pub fn slots(&self) -> usize {
        self.data.len() / (self.dim * self.nloc).max(1)
    }

    /// `(s₁, s₂)` local values of one slot; `s₂` is empty in 1D.
    pub fn element(&self, slot: usize) -> (&[f64], &[f64]) {
        let stride = self.dim * self.nloc;
        let chunk = &self.data[slot * stride..(slot + 1) * stride];
        chunk.split_at(self.nloc)
    }

    pub fn element_mut(&mut self, slot: usize) -> (&mut [f64], &mut [f64]) {
        let stride = self.dim * self.nloc;
        let chunk = &mut self.data[slot * stride..(slot + 1) * stride];
        chunk.split_at_mut(self.nloc)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// How a new element relates to the old mesh.
enum Overlay {
    /// Contained in (or equal to) one old leaf.
    Inside(usize),
    /// Covers several old leaves.
    Covers(Vec<usize>),
}

fn overlay(old: &FeSpace, new: &FeSpace, e: usize) -> Overlay {
    let h = new.hierarchy();
    let id = new.elements[e].id;
    for l in (0..=id.level).rev() {
        if let Some(a) = h.ancestor(&id, l) {
            if let Some(i) = old.mesh.index_of(&a) {
                return Overlay::Inside(i);
            }
        }
    }
    let el = &new.elements[e];
    let mut out = Vec::new();
    for j in el.lo[1]..el.hi[1] {
        for i in el.lo[0]..el.hi[0] {
            let li = old.mesh.owner_of_cell([i, j]);
            if !out.contains(&li) {
                out.push(li);
            }
        }
    }
    Overlay::Covers(out)
}

impl FeSpace {
    /// Lattice coordinates of local point `q` of element `e`.
    fn point_lattice(&self, e: usize, q: usize) -> [f64; 2] {
        let el = &self.elements[e];
        let xi = self.basis.nodes();
        let (a, b) = (q % self.nl[0], q / self.nl[0]);
        [
            el.lo[0] as f64 + (el.hi[0] - el.lo[0]) as f64 * xi[a],
            if self.dim == 2 {
                el.lo[1] as f64 + (el.hi[1] - el.lo[1]) as f64 * xi[b]
            } else {
                0.0
            },
        ]
    }

    /// Values of a local polynomial (given by local values) at the local points
    /// of another element of the same hierarchy.
    fn eval_local_at_points(&self, src: usize, src_loc: &[f64], dst: &FeSpace, e: usize, out: &mut [f64]) {
        let nloc = self.nloc();
        let mut phi = vec![0.0; nloc];
        for (q, o) in out.iter_mut().enumerate().take(dst.nloc()) {
            let xi = self.local_coords(src, dst.point_lattice(e, q));
            self.tensor_basis(xi, &mut phi);
            *o = phi.iter().zip(src_loc).map(|(a, b)| a * b).sum();
        }
    }

    /// Adds `Σ_C Σ_q W_q |C| v_C(q) φ_k(q)` over covered old leaves `C` into `acc[k]`.
    fn accumulate_covered<F>(&self, old: &FeSpace, e: usize, covered: &[usize], mut values: F, acc: &mut [f64])
    where
        F: FnMut(usize, &mut [f64]),
    {
        let nloc = self.nloc();
        let mut v = vec![0.0; old.nloc()];
        let mut phi = vec![0.0; nloc];
        for &c in covered {
            values(c, &mut v);
            let mc = old.elements[c].measure;
            for (q, &vq) in v.iter().enumerate() {
                let w = old.qw[q] * mc * vq;
                if w == 0.0 {
                    continue;
                }
                let xi = self.local_coords(e, old.point_lattice(c, q));
                self.tensor_basis(xi, &mut phi);
                for k in 0..nloc {
                    acc[k] += w * phi[k];
                }
            }
        }
    }
}

/// `Π u(x) = (u, w_x)_{𝒯_old + 𝒯_new} / σ_x`, evaluated on the union overlay.
/// Identical meshes return `u` unchanged.
pub fn project_u(old: &FeSpace, u: &[f64], new: &FeSpace) -> Vec<f64> {
    if old.mesh.same_leaves(&new.mesh) && old.degree() == new.degree() {
        return u.to_vec();
    }
    let nloc = new.nloc();
    let mut num = vec![0.0; new.num_nodes()];
    let mut src = vec![0.0; old.nloc()];
    let mut at = vec![0.0; nloc];
    let mut r = vec![0.0; nloc];
    for (e, el) in new.elements.iter().enumerate() {
        if el.void {
            continue;
        }
        match overlay(old, new, e) {
            Overlay::Inside(a) => {
                old.gather(a, u, &mut src);
                if old.elements[a].id == el.id {
                    at.copy_from_slice(&src);
                } else {
                    old.eval_local_at_points(a, &src, new, e, &mut at);
                }
                for q in 0..nloc {
                    r[q] = new.qw[q] * el.measure * at[q];
                }
            }
            Overlay::Covers(cs) => {
                r.iter_mut().for_each(|v| *v = 0.0);
                new.accumulate_covered(old, e, &cs, |c, v| old.gather(c, u, v), &mut r);
            }
        }
        new.scatter(e, &r, &mut num);
    }
    for (i, v) in num.iter_mut().enumerate() {
        let s = new.sigma[i];
        *v = if s > 0.0 && !new.boundary[i] { *v / s } else { 0.0 };
    }
    num
}

/// Element-local projection of the auxiliary field onto the strip elements of `new`.
pub fn project_s(old: &FeSpace, s: &PmlField, new: &FeSpace) -> PmlField {
    if old.mesh.same_leaves(&new.mesh) && old.degree() == new.degree() {
        return s.clone();
    }
    let mut out = PmlField::zeros(new);
    let nloc = new.nloc();
    let dim = new.dim;
    let mut at = vec![0.0; nloc];
    let mut acc = vec![0.0; nloc];
    for (slot, &e) in new.pml_elements.iter().enumerate() {
        let e = e as usize;
        let el = &new.elements[e];
        let ov = overlay(old, new, e);
        for comp in 0..dim {
            match &ov {
                Overlay::Inside(a) => {
                    let Some(os) = old.elements[*a].pml_slot else { continue };
                    let src = if comp == 0 { s.element(os as usize).0 } else { s.element(os as usize).1 };
                    if old.elements[*a].id == el.id {
                        at.copy_from_slice(src);
                    } else {
                        old.eval_local_at_points(*a, src, new, e, &mut at);
                    }
                }
                Overlay::Covers(cs) => {
                    acc.iter_mut().for_each(|v| *v = 0.0);
                    new.accumulate_covered(
                        old,
                        e,
                        cs,
                        |c, v| match old.elements[c].pml_slot {
                            Some(os) => {
                                let (a, b) = s.element(os as usize);
                                v.copy_from_slice(if comp == 0 { a } else { b });
                            }
                            None => v.iter_mut().for_each(|x| *x = 0.0),
                        },
                        &mut acc,
                    );
                    for k in 0..nloc {
                        at[k] = acc[k] / (new.qw[k] * el.measure);
                    }
                }
            }
            let (d0, d1) = out.element_mut(slot);
            let dst = if comp == 0 { d0 } else { d1 };
            dst.copy_from_slice(&at);
        }
    }
    out
}

/// Element-local projection `Π_E u` of a parent whose children are leaves of
/// `space`, and the nodal error `η_E = max |u - Π_E u|` over the children's points.
pub fn project_element(space: &FeSpace, u: &[f64], parent: &ElementId) -> Result<(Vec<f64>, f64)> {
    let h = space.hierarchy();
    let children = h.subelements(parent)?;
    let mut idx = Vec::with_capacity(children.len());
    for c in &children {
        idx.push(
            space
                .mesh
                .index_of(c)
                .ok_or_else(|| Error::InvalidMesh(format!("{c} is not a leaf")))?,
        );
    }
    let (lo, hi) = h.lattice_box(parent);
    let dim = space.dim;
    let nloc = space.nloc();
    let mut measure = 1.0;
    for a in 0..dim {
        measure *= (hi[a] - lo[a]) as f64 * h.h_fine();
    }
    let local = |lat: [f64; 2]| {
        let mut t = [0.0; 2];
        for a in 0..dim {
            t[a] = (lat[a] - lo[a] as f64) / (hi[a] - lo[a]) as f64;
        }
        t
    };
    let mut acc = vec![0.0; nloc];
    let mut phi = vec![0.0; nloc];
    let mut vals: Vec<Vec<f64>> = Vec::with_capacity(idx.len());
    for &c in &idx {
        let mut v = vec![0.0; nloc];
        space.gather(c, u, &mut v);
        let mc = space.elements[c].measure;
        for q in 0..nloc {
            let t = local(space.point_lattice(c, q));
            space.tensor_basis(t, &mut phi);
            let w = space.qw[q] * mc * v[q];
            for k in 0..nloc {
                acc[k] += w * phi[k];
            }
        }
        vals.push(v);
    }
    let coarse: Vec<f64> = (0..nloc).map(|k| acc[k] / (space.qw[k] * measure)).collect();
    let mut eta = 0.0f64;
    for (ci, &c) in idx.iter().enumerate() {
        for q in 0..nloc {
            let t = local(space.point_lattice(c, q));
            space.tensor_basis(t, &mut phi);
            let pv: f64 = phi.iter().zip(&coarse).map(|(a, b)| a * b).sum();
            eta = eta.max((vals[ci][q] - pv).abs());
        }
    }
    Ok((coarse, eta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hierarchy::{build_hierarchy, get_child_elements};
    use crate::problem::{CaseTag, Medium, ProblemSpec};
    use std::collections::BTreeSet;
    use std::sync::Arc;

    fn homogeneous(dim: usize) -> ProblemSpec {
        let mut spec = ProblemSpec::named(if dim == 1 { CaseTag::Bump1d } else { CaseTag::Bump2d }, 10.0).unwrap();
        spec.medium = Medium::homogeneous(1.0, 1.0);
        spec
    }

    fn mesh_2d_hanging() -> AdaptedMesh {
        let h = Arc::new(build_hierarchy(&[0.5, 0.25, 0.125], [1.0, 1.0], 0.125, 2).unwrap());
        let mut parents = BTreeSet::new();
        let a = h.elements(0).nth(h.level_shape(0)[0] as usize + 2).unwrap();
        parents.insert(a);
        let kids = h.subelements(&a).unwrap();
        parents.insert(kids[0]);
        get_child_elements(&h, &parents).unwrap()
    }

    #[test]
    fn uniform_1d_node_count() {
        let h = Arc::new(build_hierarchy(&[0.2], [1.0, 0.0], 0.2, 1).unwrap());
        let m = AdaptedMesh::finest(h);
        let s = build_space(&m, 2, &homogeneous(1)).unwrap();
        assert_eq!(m.len(), 12);
        assert_eq!(s.num_nodes(), 2 * 12 + 1);
        assert_eq!((0..s.num_nodes()).filter(|&i| s.is_boundary(i)).count(), 2);
    }

    #[test]
    fn single_element_weights() {
        // Two elements of width 1: end weights h/6, midpoints 4h/6, shared vertex 2h/6.
        let h = Arc::new(build_hierarchy(&[1.0], [1.0, 0.0], 0.0, 1).unwrap());
        let m = AdaptedMesh::finest(h);
        let s = build_space(&m, 2, &homogeneous(1)).unwrap();
        let mut sig: Vec<(f64, f64)> = s.coords().iter().map(|x| x[0]).zip(s.sigma().iter().copied()).collect();
        sig.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let expect = [1.0 / 6.0, 4.0 / 6.0, 2.0 / 6.0, 4.0 / 6.0, 1.0 / 6.0];
        for (v, e) in sig.iter().zip(expect) {
            assert!((v.1 - e).abs() < 1e-15);
        }
    }

    #[test]
    fn hanging_edge_has_three_coarse_nodes() {
        let m = mesh_2d_hanging();
        let s = build_space(&m, 2, &homogeneous(2)).unwrap();
        let hanging: usize = (0..m.len())
            .map(|e| (0..s.nloc()).filter(|&q| !s.is_free_point(e, q)).count())
            .sum();
        assert!(hanging > 0);
        let area: f64 = s.sigma().iter().sum();
        assert!((area - 2.25f64 * 2.25).abs() < 1e-12);
        assert!(s.sigma().iter().all(|&v| v > 0.0));
    }

    #[test]
    fn operator_annihilates_constants_and_is_exact_on_quadratics() {
        let h = Arc::new(build_hierarchy(&[0.1], [1.0, 0.0], 0.1, 1).unwrap());
        let m = AdaptedMesh::finest(h);
        let s = build_space(&m, 2, &homogeneous(1)).unwrap();
        let mut out = vec![0.0; s.num_nodes()];
        s.apply_operator(&vec![1.0; s.num_nodes()], None, &mut out);
        assert!(out.iter().all(|v| v.abs() < 1e-10));
        let u = s.interpolate(|x| x[0] * x[0]);
        s.apply_operator(&u, None, &mut out);
        for i in 0..s.num_nodes() {
            if !s.is_boundary(i) {
                assert!((out[i] + 2.0).abs() < 1e-9, "{} {}", s.coords()[i][0], out[i]);
            }
        }
    }

    #[test]
    fn conformity_across_hanging_edges() {
        let m = mesh_2d_hanging();
        let s = build_space(&m, 2, &homogeneous(2)).unwrap();
        let u: Vec<f64> = (0..s.num_nodes()).map(|i| ((i * 7919) % 101) as f64 / 50.0 - 1.0).collect();
        let h = m.hierarchy();
        for (e, el) in s.elements().iter().enumerate() {
            let (lo, hi) = h.bounds(&el.id);
            for t in [0.1, 0.37, 0.5, 0.81] {
                for pt in [
                    [lo[0], lo[1] + t * (hi[1] - lo[1])],
                    [hi[0], lo[1] + t * (hi[1] - lo[1])],
                    [lo[0] + t * (hi[0] - lo[0]), lo[1]],
                    [lo[0] + t * (hi[0] - lo[0]), hi[1]],
                ] {
                    let mine = s.evaluate_in_element(&u, e, &pt);
                    for (f, g) in s.elements().iter().enumerate() {
                        let (l2, h2) = h.bounds(&g.id);
                        let inside = (0..2).all(|a| pt[a] >= l2[a] - 1e-12 && pt[a] <= h2[a] + 1e-12);
                        if inside && f != e {
                            let other = s.evaluate_in_element(&u, f, &pt);
                            assert!((mine - other).abs() < 1e-12, "{:?} {mine} {other}", pt);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn projection_identity_and_constants() {
        let m = mesh_2d_hanging();
        let spec = homogeneous(2);
        let s = build_space(&m, 2, &spec).unwrap();
        let u: Vec<f64> = (0..s.num_nodes()).map(|i| (i as f64).sin()).collect();
        assert_eq!(project_u(&s, &u, &s), u);
        let fine = build_space(&AdaptedMesh::finest(m.hierarchy().clone()), 2, &spec).unwrap();
        let coarse = build_space(&AdaptedMesh::coarsest(m.hierarchy().clone()), 2, &spec).unwrap();
        for (a, b) in [(&s, &fine), (&fine, &coarse), (&coarse, &s), (&s, &coarse)] {
            let one = project_u(a, &vec![1.0; a.num_nodes()], b);
            for i in 0..b.num_nodes() {
                if !b.is_boundary(i) {
                    assert!((one[i] - 1.0).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn refinement_reproduces_polynomials() {
        let spec = homogeneous(2);
        let h = mesh_2d_hanging().hierarchy().clone();
        let coarse = build_space(&AdaptedMesh::coarsest(h.clone()), 2, &spec).unwrap();
        let fine = build_space(&AdaptedMesh::finest(h), 2, &spec).unwrap();
        let f = |x: &Point| 0.3 + x[0] * x[1] - 0.5 * x[0] * x[0];
        let u = coarse.interpolate(f);
        let v = project_u(&coarse, &u, &fine);
        for i in 0..fine.num_nodes() {
            if !fine.is_boundary(i) {
                assert!((v[i] - f(&fine.coords()[i])).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn element_projection_error() {
        let h = Arc::new(build_hierarchy(&[0.5, 0.25], [1.0, 1.0], 0.25, 2).unwrap());
        let spec = homogeneous(2);
        let fine = build_space(&AdaptedMesh::finest(h.clone()), 2, &spec).unwrap();
        let parent = h.elements(0).find(|e| !h.is_pml(e)).unwrap();
        // The lumped projection reproduces bilinear fields; quadratics leave an O(h²) residual.
        let lin = fine.interpolate(|x| 1.0 + x[0] - 2.0 * x[1] + 0.5 * x[0] * x[1]);
        let (_, eta) = project_element(&fine, &lin, &parent).unwrap();
        assert!(eta < 1e-12, "{eta}");
        let quad = fine.interpolate(|x| x[0] * x[0]);
        let (_, eta) = project_element(&fine, &quad, &parent).unwrap();
        assert!(eta > 0.0 && eta < 0.05, "{eta}");
        let kink = fine.interpolate(|x| (x[0] + 0.625).abs());
        let (_, eta) = project_element(&fine, &kink, &parent).unwrap();
        assert!(eta > 1e-3);
    }
}
