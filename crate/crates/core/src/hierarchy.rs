//! Nested Cartesian mesh levels and the adapted leaf meshes drawn from them.
//!
//! Geometry lives on the integer lattice of the finest spacing `h_K`, with
//! lattice coordinate 0 at the lower domain boundary `-(L + W)`. Interior
//! cells of level `k` span `h_k / h_K` lattice units; cells in the absorbing
//! strips always span one unit along the axis normal to the strip.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::Point;

/// Relative tolerance used when checking that mesh widths nest and that
/// lengths are commensurate with the lattice.
const LATTICE_TOL: f64 = 1e-9;

/// An element of level `level` (0-based, so level 0 is `𝒯¹`) with per-axis
/// cell indices into that level's grid. One-dimensional meshes use `ix[1] = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ElementId {
    pub level: u8,
    pub ix: [u32; 2],
}

impl ElementId {
    pub fn new(level: u8, ix: [u32; 2]) -> Self {
        Self { level, ix }
    }
}

impl fmt::Display for ElementId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "E{}[{}, {}]", self.level + 1, self.ix[0], self.ix[1])
    }
}

#[derive(Debug, Clone)]
struct AxisLevel {
    /// Cell start positions followed by the axis end; `starts.len() = cells + 1`.
    starts: Vec<u32>,
    /// Index of the containing cell one level up (empty on level 0).
    parent: Vec<u32>,
    /// First child index one level down, with a trailing sentinel (empty on the last level).
    first_child: Vec<u32>,
}

impl AxisLevel {
    fn cells(&self) -> usize {
        self.starts.len() - 1
    }

    /// Cell containing lattice position `pos` under the half-open convention;
    /// the upper axis end belongs to the last cell.
    fn locate(&self, pos: f64) -> usize {
        let n = self.cells();
        let k = self.starts.partition_point(|&s| (s as f64) <= pos);
        k.clamp(1, n) - 1
    }
}

fn axis_levels(ratios: &[u32], half_cells: u32, pml_cells: u32) -> Vec<AxisLevel> {
    let total = 2 * (half_cells + pml_cells);
    let mut levels: Vec<AxisLevel> = ratios
        .iter()
        .map(|&r| {
            let mut starts = Vec::new();
            starts.extend(0..pml_cells);
            starts.extend((0..2 * half_cells / r).map(|j| pml_cells + j * r));
            starts.extend((0..pml_cells).map(|i| pml_cells + 2 * half_cells + i));
            starts.push(total);
            AxisLevel {
                starts,
                parent: Vec::new(),
                first_child: Vec::new(),
            }
        })
        .collect();
    link_levels(&mut levels);
    levels
}

fn flat_axis_levels(k: usize) -> Vec<AxisLevel> {
    let mut levels = vec![
        AxisLevel {
            starts: vec![0, 1],
            parent: Vec::new(),
            first_child: Vec::new(),
        };
        k
    ];
    link_levels(&mut levels);
    levels
}

fn link_levels(levels: &mut [AxisLevel]) {
    for k in 1..levels.len() {
        let (coarse, fine) = levels.split_at_mut(k);
        let coarse = &mut coarse[k - 1];
        let fine = &mut fine[0];
        fine.parent = fine.starts[..fine.cells()]
            .iter()
            .map(|&s| coarse.locate(s as f64) as u32)
            .collect();
        coarse.first_child = coarse
            .starts
            .iter()
            .map(|&s| fine.starts.partition_point(|&f| f < s) as u32)
            .collect();
    }
}

/// The a-priori mesh levels `𝒯¹ … 𝒯ᴷ`.
#[derive(Debug, Clone)]
pub struct NestedHierarchy {
    dim: usize,
    widths: Vec<f64>,
    ratios: Vec<u32>,
    half_width: Point,
    half_cells: [u32; 2],
    pml_cells: u32,
    n: [u32; 2],
    axes: [Vec<AxisLevel>; 2],
}

fn integer_ratio(a: f64, b: f64, what: &str) -> Result<u32> {
    let r = a / b;
    let rr = r.round();
    if rr < 1.0 || (r - rr).abs() > LATTICE_TOL * r.max(1.0) {
        return Err(Error::InvalidHierarchy(format!("{what}: ratio {r} is not a positive integer")));
    }
    Ok(rr as u32)
}

/// Builds the nested levels for mesh widths `h_list` on `Ω₀ = (-L, L)^d`
/// surrounded by an absorbing strip of width `W`. `W` is rounded up to a
/// multiple of the finest width.
pub fn build_hierarchy(h_list: &[f64], half_width: Point, pml_width: f64, dim: usize) -> Result<NestedHierarchy> {
    if dim != 1 && dim != 2 {
        return Err(Error::InvalidHierarchy(format!("dimension must be 1 or 2, got {dim}")));
    }
    if h_list.is_empty() {
        return Err(Error::InvalidHierarchy("at least one mesh width is required".into()));
    }
    if h_list.iter().any(|h| !(*h > 0.0) || !h.is_finite()) {
        return Err(Error::InvalidHierarchy("mesh widths must be positive".into()));
    }
    if h_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidHierarchy("mesh widths must be strictly decreasing".into()));
    }
    if h_list.len() > u8::MAX as usize {
        return Err(Error::InvalidHierarchy("too many levels".into()));
    }
    for w in h_list.windows(2) {
        integer_ratio(w[0], w[1], "consecutive widths")?;
    }
    let hf = *h_list.last().unwrap();
    let ratios = h_list
        .iter()
        .map(|&h| integer_ratio(h, hf, "width to finest width"))
        .collect::<Result<Vec<u32>>>()?;
    if !(pml_width >= 0.0) || !pml_width.is_finite() {
        return Err(Error::InvalidHierarchy("absorbing strip width must be non-negative".into()));
    }
    let pml_cells = (pml_width / hf - LATTICE_TOL).ceil().max(0.0) as u32;
    let mut half_cells = [0u32; 2];
    for a in 0..dim {
        if !(half_width[a] > 0.0) {
            return Err(Error::InvalidHierarchy("half-widths must be positive".into()));
        }
        let coarse = integer_ratio(2.0 * half_width[a], h_list[0], "domain width to coarsest width")?;
        half_cells[a] = coarse * ratios[0] / 2;
        if coarse * ratios[0] % 2 != 0 {
            return Err(Error::InvalidHierarchy("domain is not symmetric on the finest lattice".into()));
        }
    }
    let mut n = [1u32; 2];
    for a in 0..dim {
        n[a] = 2 * (half_cells[a] + pml_cells);
    }
    let axes = [
        axis_levels(&ratios, half_cells[0], pml_cells),
        if dim == 2 {
            axis_levels(&ratios, half_cells[1], pml_cells)
        } else {
            flat_axis_levels(ratios.len())
        },
    ];
    Ok(NestedHierarchy {
        dim,
        widths: h_list.to_vec(),
        ratios,
        half_width: if dim == 2 { half_width } else { [half_width[0], 0.0] },
        half_cells,
        pml_cells,
        n,
        axes,
    })
}

impl NestedHierarchy {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_levels(&self) -> usize {
        self.widths.len()
    }

    pub fn widths(&self) -> &[f64] {
        &self.widths
    }

    /// Interior width of `level` in lattice units.
    pub fn ratio(&self, level: usize) -> u32 {
        self.ratios[level]
    }

    pub fn h_fine(&self) -> f64 {
        *self.widths.last().unwrap()
    }

    pub fn half_width(&self) -> Point {
        self.half_width
    }

    /// Width of the absorbing strip after rounding to the lattice.
    pub fn pml_width(&self) -> f64 {
        self.pml_cells as f64 * self.h_fine()
    }

    pub fn pml_cells(&self) -> u32 {
        self.pml_cells
    }

    pub fn half_cells(&self) -> [u32; 2] {
        self.half_cells
    }

    /// Number of finest cells per axis (1 along the unused axis in 1D).
    pub fn lattice_cells(&self) -> [u32; 2] {
        self.n
    }

    pub fn finest_cell_count(&self) -> usize {
        self.n[0] as usize * self.n[1] as usize
    }

    /// Physical coordinate of lattice position `l` along `axis`.
    #[inline]
    pub fn lattice_to_x(&self, axis: usize, l: f64) -> f64 {
        if axis >= self.dim {
            return 0.0;
        }
        (l - (self.n[axis] / 2) as f64) * self.h_fine()
    }

    #[inline]
    pub fn x_to_lattice(&self, axis: usize, x: f64) -> f64 {
        if axis >= self.dim {
            return 0.0;
        }
        x / self.h_fine() + (self.n[axis] / 2) as f64
    }

    /// Closed domain `Ω = [-(L+W), L+W]^d`.
    pub fn domain_box(&self) -> (Point, Point) {
        let mut lo = [0.0; 2];
        let mut hi = [0.0; 2];
        for a in 0..self.dim {
            lo[a] = self.lattice_to_x(a, 0.0);
            hi[a] = self.lattice_to_x(a, self.n[a] as f64);
        }
        (lo, hi)
    }

    pub fn level_shape(&self, level: usize) -> [u32; 2] {
        [self.axes[0][level].cells() as u32, self.axes[1][level].cells() as u32]
    }

    pub fn element_count(&self, level: usize) -> usize {
        let s = self.level_shape(level);
        s[0] as usize * s[1] as usize
    }

    /// All elements of one level in row-major order (axis 0 fastest).
    pub fn elements(&self, level: usize) -> impl Iterator<Item = ElementId> + '_ {
        let s = self.level_shape(level);
        (0..s[1]).flat_map(move |j| (0..s[0]).map(move |i| ElementId::new(level as u8, [i, j])))
    }

    pub fn contains_id(&self, e: &ElementId) -> bool {
        (e.level as usize) < self.num_levels() && {
            let s = self.level_shape(e.level as usize);
            e.ix[0] < s[0] && e.ix[1] < s[1]
        }
    }

    /// Lattice box `[lo, hi]` of an element.
    #[inline]
    pub fn lattice_box(&self, e: &ElementId) -> ([u32; 2], [u32; 2]) {
        let k = e.level as usize;
        let mut lo = [0u32; 2];
        let mut hi = [1u32; 2];
        for a in 0..2 {
            let st = &self.axes[a][k].starts;
            lo[a] = st[e.ix[a] as usize];
            hi[a] = st[e.ix[a] as usize + 1];
        }
        (lo, hi)
    }

    /// Physical closed box of an element.
    pub fn bounds(&self, e: &ElementId) -> (Point, Point) {
        let (lo, hi) = self.lattice_box(e);
        let mut plo = [0.0; 2];
        let mut phi = [0.0; 2];
        for a in 0..self.dim {
            plo[a] = self.lattice_to_x(a, lo[a] as f64);
            phi[a] = self.lattice_to_x(a, hi[a] as f64);
        }
        (plo, phi)
    }

    /// Side lengths of an element.
    pub fn sides(&self, e: &ElementId) -> Point {
        let (lo, hi) = self.lattice_box(e);
        let mut s = [0.0; 2];
        for a in 0..self.dim {
            s[a] = (hi[a] - lo[a]) as f64 * self.h_fine();
        }
        s
    }

    pub fn measure(&self, e: &ElementId) -> f64 {
        let s = self.sides(e);
        (0..self.dim).map(|a| s[a]).product()
    }

    /// True if the element lies in the absorbing strip on at least one axis.
    pub fn is_pml(&self, e: &ElementId) -> bool {
        let (lo, hi) = self.lattice_box(e);
        (0..self.dim).any(|a| lo[a] < self.pml_cells || hi[a] > self.pml_cells + 2 * self.half_cells[a])
    }

    pub fn parent(&self, e: &ElementId) -> Option<ElementId> {
        if e.level == 0 {
            return None;
        }
        let k = e.level as usize;
        Some(ElementId::new(
            e.level - 1,
            [
                self.axes[0][k].parent[e.ix[0] as usize],
                self.axes[1][k].parent[e.ix[1] as usize],
            ],
        ))
    }

    /// Ancestor (or the element itself) at a coarser or equal `level`.
    pub fn ancestor(&self, e: &ElementId, level: u8) -> Option<ElementId> {
        if level > e.level {
            return None;
        }
        let mut cur = *e;
        while cur.level > level {
            cur = self.parent(&cur)?;
        }
        Some(cur)
    }

    pub fn is_ancestor_or_self(&self, a: &ElementId, e: &ElementId) -> bool {
        self.ancestor(e, a.level).as_ref() == Some(a)
    }

    /// Children of `e` on the next level, row-major.
    pub fn subelements(&self, e: &ElementId) -> Result<Vec<ElementId>> {
        let k = e.level as usize;
        if k + 1 >= self.num_levels() {
            return Err(Error::InvalidMesh(format!("{e} is on the finest level and has no subelements")));
        }
        let r0 = &self.axes[0][k].first_child;
        let r1 = &self.axes[1][k].first_child;
        let (i0, i1) = (r0[e.ix[0] as usize], r0[e.ix[0] as usize + 1]);
        let (j0, j1) = (r1[e.ix[1] as usize], r1[e.ix[1] as usize + 1]);
        let mut out = Vec::with_capacity(((i1 - i0) * (j1 - j0)) as usize);
        for j in j0..j1 {
            for i in i0..i1 {
                out.push(ElementId::new(e.level + 1, [i, j]));
            }
        }
        Ok(out)
    }

    /// Element of `level` containing the finest cell `cell`.
    pub fn element_at_cell(&self, level: usize, cell: [u32; 2]) -> ElementId {
        ElementId::new(
            level as u8,
            [
                self.axes[0][level].locate(cell[0] as f64 + 0.5) as u32,
                self.axes[1][level].locate(cell[1] as f64 + 0.5) as u32,
            ],
        )
    }

    /// Cell indices along `axis` on `level` whose closed extent meets `[lo, hi]` (lattice units).
    fn cells_meeting(&self, axis: usize, level: usize, lo: f64, hi: f64) -> std::ops::Range<usize> {
        let st = &self.axes[axis][level].starts;
        let n = st.len() - 1;
        // first cell with end >= lo, last cell with start <= hi
        let first = st[1..].partition_point(|&e| (e as f64) < lo);
        let last = st[..n].partition_point(|&s| (s as f64) <= hi);
        first..last.max(first)
    }
}

/// Closed-box Euclidean distance between two elements.
pub fn element_distance(h: &NestedHierarchy, e1: &ElementId, e2: &ElementId) -> f64 {
    lattice_gap2(h, e1, e2).sqrt() * h.h_fine()
}

fn lattice_gap2(h: &NestedHierarchy, e1: &ElementId, e2: &ElementId) -> f64 {
    let (a_lo, a_hi) = h.lattice_box(e1);
    let (b_lo, b_hi) = h.lattice_box(e2);
    let mut d2 = 0u64;
    for a in 0..h.dim() {
        let gap = if b_lo[a] > a_hi[a] {
            b_lo[a] - a_hi[a]
        } else if a_lo[a] > b_hi[a] {
            a_lo[a] - b_hi[a]
        } else {
            0
        } as u64;
        d2 += gap * gap;
    }
    d2 as f64
}

/// Closed-box distance between two axis-aligned boxes.
pub fn box_distance(a_lo: &Point, a_hi: &Point, b_lo: &Point, b_hi: &Point, dim: usize) -> f64 {
    (0..dim)
        .map(|a| {
            let g = (b_lo[a] - a_hi[a]).max(a_lo[a] - b_hi[a]).max(0.0);
            g * g
        })
        .sum::<f64>()
        .sqrt()
}

/// A leaf set drawn from the hierarchy that tiles `Ω` exactly once.
#[derive(Debug, Clone)]
pub struct AdaptedMesh {
    hier: Arc<NestedHierarchy>,
    leaves: Vec<ElementId>,
    index: HashMap<ElementId, u32>,
    /// Leaf index owning each finest cell, row-major.
    owner: Vec<u32>,
}

impl AdaptedMesh {
    pub fn from_leaves(hier: Arc<NestedHierarchy>, mut leaves: Vec<ElementId>) -> Result<Self> {
        leaves.sort_unstable();
        let n = hier.lattice_cells();
        let mut owner = vec![u32::MAX; hier.finest_cell_count()];
        let mut index = HashMap::with_capacity(leaves.len());
        for (li, e) in leaves.iter().enumerate() {
            if !hier.contains_id(e) {
                return Err(Error::InvalidMesh(format!("{e} is not part of the hierarchy")));
            }
            if index.insert(*e, li as u32).is_some() {
                return Err(Error::InvalidMesh(format!("{e} appears twice")));
            }
            let (lo, hi) = hier.lattice_box(e);
            for j in lo[1]..hi[1] {
                for i in lo[0]..hi[0] {
                    let c = &mut owner[(j * n[0] + i) as usize];
                    if *c != u32::MAX {
                        return Err(Error::InvalidMesh(format!("{e} overlaps another leaf")));
                    }
                    *c = li as u32;
                }
            }
        }
        if owner.iter().any(|&o| o == u32::MAX) {
            return Err(Error::InvalidMesh("leaves do not cover the domain".into()));
        }
        Ok(Self {
            hier,
            leaves,
            index,
            owner,
        })
    }

    /// The finest uniform mesh `𝒯ᴷ`.
    pub fn finest(hier: Arc<NestedHierarchy>) -> Self {
        let k = hier.num_levels() - 1;
        let leaves = hier.elements(k).collect();
        Self::from_leaves(hier, leaves).expect("a full level tiles the domain")
    }

    /// The coarsest mesh `𝒯¹`.
    pub fn coarsest(hier: Arc<NestedHierarchy>) -> Self {
        let leaves = hier.elements(0).collect();
        Self::from_leaves(hier, leaves).expect("a full level tiles the domain")
    }

    pub fn hierarchy(&self) -> &Arc<NestedHierarchy> {
        &self.hier
    }

    pub fn leaves(&self) -> &[ElementId] {
        &self.leaves
    }

    pub fn len(&self) -> usize {
        self.leaves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.leaves.is_empty()
    }

    pub fn index_of(&self, e: &ElementId) -> Option<usize> {
        self.index.get(e).map(|&i| i as usize)
    }

    pub fn contains(&self, e: &ElementId) -> bool {
        self.index.contains_key(e)
    }

    /// Leaf index owning the finest cell `cell`.
    #[inline]
    pub fn owner_of_cell(&self, cell: [u32; 2]) -> usize {
        self.owner[(cell[1] * self.hier.n[0] + cell[0]) as usize] as usize
    }

    /// Leaf containing `x` under the half-open convention (upper domain boundary included).
    pub fn locate(&self, x: &Point) -> Result<usize> {
        let h = &self.hier;
        let (lo, hi) = h.domain_box();
        let tol = 1e-12 * h.h_fine();
        let mut cell = [0u32; 2];
        for a in 0..h.dim() {
            if x[a] < lo[a] - tol || x[a] > hi[a] + tol {
                return Err(Error::OutsideDomain(*x));
            }
            let mut l = h.x_to_lattice(a, x[a]);
            if (l - l.round()).abs() < LATTICE_TOL {
                l = l.round();
            }
            cell[a] = (l.floor().max(0.0) as u32).min(h.n[a] - 1);
        }
        Ok(self.owner_of_cell(cell))
    }

    pub fn same_leaves(&self, other: &AdaptedMesh) -> bool {
        Arc::ptr_eq(&self.hier, &other.hier) && self.leaves == other.leaves
    }

    /// Count of leaves per level.
    pub fn level_histogram(&self) -> Vec<usize> {
        let mut hist = vec![0; self.hier.num_levels()];
        for e in &self.leaves {
            hist[e.level as usize] += 1;
        }
        hist
    }
}

/// Strict ancestors of the current leaves.
pub fn get_parent_elements(mesh: &AdaptedMesh) -> BTreeSet<ElementId> {
    let h = mesh.hierarchy();
    let mut out = BTreeSet::new();
    for e in mesh.leaves() {
        let mut cur = *e;
        while let Some(p) = h.parent(&cur) {
            if !out.insert(p) {
                break;
            }
            cur = p;
        }
    }
    out
}

/// Children of one element on the next level.
pub fn get_subelements(h: &NestedHierarchy, e: &ElementId) -> Result<Vec<ElementId>> {
    h.subelements(e)
}

/// Rebuilds the leaf mesh from a parent set closed under taking ancestors.
pub fn get_child_elements(hier: &Arc<NestedHierarchy>, parents: &BTreeSet<ElementId>) -> Result<AdaptedMesh> {
    let k = hier.num_levels();
    let mut leaves = Vec::new();
    for p in parents {
        if !hier.contains_id(p) || p.level as usize + 1 >= k {
            return Err(Error::InvalidMesh(format!("{p} cannot be a parent element")));
        }
        if let Some(pp) = hier.parent(p) {
            if !parents.contains(&pp) {
                return Err(Error::InvalidMesh(format!("parent set is not closed: {p} without {pp}")));
            }
        }
        for c in hier.subelements(p)? {
            if !parents.contains(&c) {
                leaves.push(c);
            }
        }
    }
    leaves.extend(hier.elements(0).filter(|e| !parents.contains(e)));
    AdaptedMesh::from_leaves(hier.clone(), leaves)
}

/// For every non-finest level, all elements within `radius` (closed-box
/// distance, relative tolerance 1e-9) of a marked element of the same level.
pub fn mark_nearby_elements(h: &NestedHierarchy, marked: &BTreeSet<ElementId>, radius: f64) -> BTreeSet<ElementId> {
    let k = h.num_levels();
    let rl = radius.max(0.0) / h.h_fine();
    let reach = rl * (1.0 - LATTICE_TOL);
    let reach2 = reach * reach;
    let mut seen: Vec<Vec<bool>> = (0..k.saturating_sub(1)).map(|l| vec![false; h.element_count(l)]).collect();
    let mut out = BTreeSet::new();
    for e in marked {
        let level = e.level as usize;
        if level + 1 >= k {
            continue;
        }
        let (lo, hi) = h.lattice_box(e);
        let shape = h.level_shape(level);
        let rx = h.cells_meeting(0, level, lo[0] as f64 - reach, hi[0] as f64 + reach);
        let ry = if h.dim() == 2 {
            h.cells_meeting(1, level, lo[1] as f64 - reach, hi[1] as f64 + reach)
        } else {
            0..1
        };
        for j in ry {
            for i in rx.clone() {
                let c = ElementId::new(e.level, [i as u32, j as u32]);
                let flat = j * shape[0] as usize + i;
                if seen[level][flat] {
                    continue;
                }
                if lattice_gap2(h, e, &c) <= reach2 {
                    seen[level][flat] = true;
                    out.insert(c);
                }
            }
        }
    }
    out
}
