//! Plain-text artifacts: nodal CSV, uniform raster, level map.
//!
//! Floats are written with 17 significant digits so a read-back is exact.

use std::io::{BufRead, Write};

use num_complex::Complex64;

use crate::driver::GridField;
use crate::hierarchy::{get_parent_elements, AdaptedMesh};
use crate::problem::Point;
use crate::{Error, Result};

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

/// `x,y,re,im` per node, preceded by `#` comment lines.
pub fn write_nodes_csv<W: Write>(mut w: W, points: &[Point], values: &[Complex64], comments: &[String]) -> Result<()> {
    if points.len() != values.len() {
        return Err(Error::InvalidConfig("point and value counts differ".into()));
    }
    for c in comments {
        writeln!(w, "# {c}")?;
    }
    writeln!(w, "x,y,re,im")?;
    for (p, v) in points.iter().zip(values) {
        writeln!(w, "{},{},{},{}", fmt(p[0]), fmt(p[1]), fmt(v.re), fmt(v.im))?;
    }
    Ok(())
}

pub fn read_nodes_csv<R: BufRead>(r: R) -> Result<Vec<(Point, Complex64)>> {
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with('x') {
            continue;
        }
        let f: Vec<f64> = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::InvalidConfig(format!("bad CSV row `{line}`: {e}")))?;
        if f.len() != 4 {
            return Err(Error::InvalidConfig(format!("bad CSV row `{line}`")));
        }
        out.push(([f[0], f[1]], Complex64::new(f[2], f[3])));
    }
    Ok(out)
}

/// Raster geometry `(nx, ny, x0, y0, dx, dy)` of the finest lattice vertices.
pub fn raster_geometry(field: &GridField) -> (usize, usize, f64, f64, f64, f64) {
    let h = &field.hier;
    let n = h.lattice_cells();
    let (lo, _) = h.domain_box();
    let hf = h.h_fine();
    if h.dim() == 2 {
        (n[0] as usize + 1, n[1] as usize + 1, lo[0], lo[1], hf, hf)
    } else {
        (n[0] as usize + 1, 1, lo[0], 0.0, hf, 0.0)
    }
}

/// Samples the field at the finest lattice vertices, row-major, one `re im` pair per line,
/// after the header `# nx ny x0 y0 dx dy`. Trailing `#` lines carry `comments`.
pub fn write_raster<W: Write>(mut w: W, field: &GridField, comments: &[String]) -> Result<()> {
    let (nx, ny, x0, y0, dx, dy) = raster_geometry(field);
    writeln!(w, "# {nx} {ny} {} {} {} {}", fmt(x0), fmt(y0), fmt(dx), fmt(dy))?;
    let p = field.p;
    let sx = field.shape()[0];
    for j in 0..ny {
        for i in 0..nx {
            let k = if field.hier.dim() == 2 { j * p * sx + i * p } else { i * p };
            let v = field.values[k];
            writeln!(w, "{} {}", fmt(v.re), fmt(v.im))?;
        }
    }
    for c in comments {
        writeln!(w, "# {c}")?;
    }
    Ok(())
}

/// Per finest cell, the 1-based level of the finest parent element of `mesh`
/// covering it, 0 where no parent covers it. Row-major `(nx, ny)` cells.
pub fn level_map(mesh: &AdaptedMesh) -> (usize, usize, Vec<u8>) {
    let h = mesh.hierarchy();
    let n = h.lattice_cells();
    let (nx, ny) = (n[0] as usize, n[1].max(1) as usize);
    let mut out = vec![0u8; nx * ny];
    for e in get_parent_elements(mesh) {
        let (lo, hi) = h.lattice_box(&e);
        let yr = if h.dim() == 2 { lo[1]..hi[1] } else { 0..1 };
        for j in yr {
            for i in lo[0]..hi[0] {
                let c = &mut out[j as usize * nx + i as usize];
                *c = (*c).max(e.level + 1);
            }
        }
    }
    (nx, ny, out)
}

pub fn write_level_map<W: Write>(mut w: W, mesh: &AdaptedMesh) -> Result<()> {
    let h = mesh.hierarchy();
    let (nx, ny, map) = level_map(mesh);
    let (lo, _) = h.domain_box();
    let hf = h.h_fine();
    writeln!(w, "# {nx} {ny} {} {} {} {}", fmt(lo[0] + 0.5 * hf), fmt(lo[1] + 0.5 * hf), fmt(hf), fmt(hf))?;
    for row in map.chunks(nx) {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    Ok(())
}
