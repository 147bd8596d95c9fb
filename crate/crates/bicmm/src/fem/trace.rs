//! Boundary traces on the opening, point evaluation, and conversion of a
//! finite-element eigenbasis into the mode-matching basis form.

use crate::basis::{CavityBasis, LinSeg, Provenance, TraceFn};
use crate::fem::eigen::EigenBasis;
use crate::fem::mesh::Mesh;

/// Exact P1 trace of one nodal vector on the opening edges, ascending in
/// `x2`, plus the interpolated value at the opening center `o`.
pub fn boundary_trace_one(mesh: &Mesh, v: &[f64]) -> (TraceFn, f64) {
    assert!(
        !mesh.gamma_edges.is_empty(),
        "mesh carries no opening edges"
    );
    let segs: Vec<LinSeg> = mesh
        .gamma_edges
        .iter()
        .map(|e| LinSeg {
            y0: mesh.nodes[e[0]][1],
            y1: mesh.nodes[e[1]][1],
            v0: v[e[0]],
            v1: v[e[1]],
        })
        .collect();
    let mut at_o = 0.0;
    for s in &segs {
        if s.y0 <= 0.0 && 0.0 <= s.y1 {
            let t = if s.y1 > s.y0 { -s.y0 / (s.y1 - s.y0) } else { 0.0 };
            at_o = s.v0 + t * (s.v1 - s.v0);
            break;
        }
    }
    (TraceFn::PiecewiseLinear { segs }, at_o)
}

/// Traces and center values for every mode of a basis.
pub fn boundary_trace(basis: &EigenBasis, mesh: &Mesh) -> (Vec<TraceFn>, Vec<f64>) {
    let mut traces = Vec::with_capacity(basis.vectors.len());
    let mut at_o = Vec::with_capacity(basis.vectors.len());
    for v in &basis.vectors {
        let (t, o) = boundary_trace_one(mesh, v);
        traces.push(t);
        at_o.push(o);
    }
    (traces, at_o)
}

/// Packages eigenvalues plus opening data into the common basis form.
pub fn to_cavity_basis(basis: &EigenBasis, mesh: &Mesh) -> CavityBasis {
    let (traces, origin_values) = boundary_trace(basis, mesh);
    CavityBasis {
        delta: basis.delta,
        lambdas: basis.lambdas.clone(),
        traces,
        origin_values,
        provenance: Provenance::FemTrace,
    }
}

/// Uniform-bin point locator for P1 interpolation on arbitrary meshes.
pub struct PointLocator<'a> {
    mesh: &'a Mesh,
    x_lo: f64,
    y_lo: f64,
    inv_dx: f64,
    inv_dy: f64,
    nx: usize,
    ny: usize,
    bins: Vec<Vec<usize>>,
}

impl<'a> PointLocator<'a> {
    pub fn new(mesh: &'a Mesh) -> Self {
        let (mut x_lo, mut x_hi, mut y_lo, mut y_hi) = (
            f64::INFINITY,
            f64::NEG_INFINITY,
            f64::INFINITY,
            f64::NEG_INFINITY,
        );
        for p in &mesh.nodes {
            x_lo = x_lo.min(p[0]);
            x_hi = x_hi.max(p[0]);
            y_lo = y_lo.min(p[1]);
            y_hi = y_hi.max(p[1]);
        }
        let n_bins = (mesh.triangles.len() as f64).sqrt().ceil() as usize;
        let nx = n_bins.max(1);
        let ny = n_bins.max(1);
        let inv_dx = nx as f64 / (x_hi - x_lo).max(1e-300);
        let inv_dy = ny as f64 / (y_hi - y_lo).max(1e-300);
        let mut bins = vec![Vec::new(); nx * ny];
        for (t, tri) in mesh.triangles.iter().enumerate() {
            let xs: Vec<f64> = tri.iter().map(|&v| mesh.nodes[v][0]).collect();
            let ys: Vec<f64> = tri.iter().map(|&v| mesh.nodes[v][1]).collect();
            let bx0 = (((xs.iter().cloned().fold(f64::INFINITY, f64::min) - x_lo) * inv_dx)
                .floor() as isize)
                .clamp(0, nx as isize - 1) as usize;
            let bx1 = (((xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - x_lo) * inv_dx)
                .floor() as isize)
                .clamp(0, nx as isize - 1) as usize;
            let by0 = (((ys.iter().cloned().fold(f64::INFINITY, f64::min) - y_lo) * inv_dy)
                .floor() as isize)
                .clamp(0, ny as isize - 1) as usize;
            let by1 = (((ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - y_lo) * inv_dy)
                .floor() as isize)
                .clamp(0, ny as isize - 1) as usize;
            for bx in bx0..=bx1 {
                for by in by0..=by1 {
                    bins[by * nx + bx].push(t);
                }
            }
        }
        PointLocator {
            mesh,
            x_lo,
            y_lo,
            inv_dx,
            inv_dy,
            nx,
            ny,
            bins,
        }
    }

    /// P1 interpolation of nodal values at `(x, y)`; `None` outside the mesh.
    pub fn interpolate(&self, v: &[f64], x: f64, y: f64) -> Option<f64> {
        let bx = (((x - self.x_lo) * self.inv_dx).floor() as isize).clamp(0, self.nx as isize - 1)
            as usize;
        let by = (((y - self.y_lo) * self.inv_dy).floor() as isize).clamp(0, self.ny as isize - 1)
            as usize;
        for &t in &self.bins[by * self.nx + bx] {
            let [a, b, c] = self.mesh.triangles[t];
            let (pa, pb, pc) = (self.mesh.nodes[a], self.mesh.nodes[b], self.mesh.nodes[c]);
            let det = (pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1]);
            let la = ((pb[0] - x) * (pc[1] - y) - (pc[0] - x) * (pb[1] - y)) / det;
            let lb = ((pc[0] - x) * (pa[1] - y) - (pa[0] - x) * (pc[1] - y)) / det;
            let lc = 1.0 - la - lb;
            let eps = -1e-10;
            if la >= eps && lb >= eps && lc >= eps {
                return Some(la * v[a] + lb * v[b] + lc * v[c]);
            }
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::assemble::assemble;
    use crate::fem::eigen::{solve_eigen, SolveOpts};
    use crate::fem::mesh::build_mesh;
    use crate::problem::validate_spec;
    use std::collections::HashMap;

    #[test]
    fn constant_mode_trace_is_flat() {
        let spec = crate::presets::offset_rectangle();
        let v = validate_spec(&spec).unwrap();
        let mesh = build_mesh(&v, 5).unwrap();
        let (k, m) = assemble(&mesh, &HashMap::from([(0u32, 1.0)])).unwrap();
        let basis = solve_eigen(&k, &m, 1, &SolveOpts::default(), None).unwrap();
        let (trace, at_o) = boundary_trace_one(&mesh, &basis.vectors[0]);
        let area = v.cavity.width() * v.cavity.height();
        let expect = 1.0 / area.sqrt();
        assert!((at_o.abs() - expect).abs() < 1e-6);
        if let TraceFn::PiecewiseLinear { segs } = trace {
            for s in segs {
                assert!((s.v0.abs() - expect).abs() < 1e-6);
            }
        } else {
            panic!("expected a piecewise-linear trace");
        }
    }

    #[test]
    fn point_interpolation_reproduces_linears() {
        let spec = crate::presets::offset_rectangle();
        let v = validate_spec(&spec).unwrap();
        let mesh = build_mesh(&v, 4).unwrap();
        let vals: Vec<f64> = mesh.nodes.iter().map(|p| 2.0 * p[0] - 0.7 * p[1]).collect();
        let loc = PointLocator::new(&mesh);
        let got = loc.interpolate(&vals, -1.1, 0.4).unwrap();
        assert!((got - (2.0 * -1.1 - 0.7 * 0.4)).abs() < 1e-12);
        assert!(loc.interpolate(&vals, 5.0, 0.0).is_none());
    }
}
