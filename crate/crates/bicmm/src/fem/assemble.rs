//! P1 stiffness and mass assembly. The stiffness carries the `1/n^2`
//! material weight; the mass is the consistent (unlumped) one.

use crate::error::{Error, Result};
use crate::fem::band::SymBand;
use crate::fem::mesh::Mesh;
use crate::geom::Rect;
use std::collections::HashMap;

/// Assembles `K = sum_T (1/n_T^2) (grad stiffness)` and the consistent mass
/// `M`. Every region id appearing in the mesh must be present in `n_map`
/// with a positive index value.
pub fn assemble(mesh: &Mesh, n_map: &HashMap<u32, f64>) -> Result<(SymBand, SymBand)> {
    let n = mesh.nodes.len();
    let hbw = mesh.bandwidth();
    let mut k = SymBand::zeros(n, hbw);
    let mut m = SymBand::zeros(n, hbw);

    let mut weight_of = HashMap::new();
    for &region in mesh.material.iter() {
        if !weight_of.contains_key(&region) {
            let n_val = *n_map.get(&region).ok_or_else(|| {
                Error::Config(format!("region {region} missing from the index map"))
            })?;
            if !(n_val > 0.0) {
                return Err(Error::BadIndexBounds(format!(
                    "region {region} has n = {n_val}"
                )));
            }
            weight_of.insert(region, 1.0 / (n_val * n_val));
        }
    }

    for (t, tri) in mesh.triangles.iter().enumerate() {
        let [a, b, c] = *tri;
        let (pa, pb, pc) = (mesh.nodes[a], mesh.nodes[b], mesh.nodes[c]);
        let area = mesh.triangle_area(t);
        debug_assert!(area > 0.0, "triangle {t} not positively oriented");
        // gradient coefficients: grad lambda_i = (bi, ci) / (2 area)
        let bs = [pb[1] - pc[1], pc[1] - pa[1], pa[1] - pb[1]];
        let cs = [pc[0] - pb[0], pa[0] - pc[0], pb[0] - pa[0]];
        let w = weight_of[&mesh.material[t]];
        let nodes = [a, b, c];
        for i in 0..3 {
            for j in i..3 {
                let kij = w * (bs[i] * bs[j] + cs[i] * cs[j]) / (4.0 * area);
                k.add(nodes[i], nodes[j], kij);
                let mij = if i == j { area / 6.0 } else { area / 12.0 };
                m.add(nodes[i], nodes[j], mij);
            }
        }
    }
    Ok((k, m))
}

/// `|| (1/n) grad v ||^2` over the triangles whose centroid falls in `zone`.
pub fn grad_norm_sq_in(mesh: &Mesh, n_map: &HashMap<u32, f64>, v: &[f64], zone: &Rect) -> f64 {
    let mut acc = 0.0;
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let [a, b, c] = *tri;
        let cx = (mesh.nodes[a][0] + mesh.nodes[b][0] + mesh.nodes[c][0]) / 3.0;
        let cy = (mesh.nodes[a][1] + mesh.nodes[b][1] + mesh.nodes[c][1]) / 3.0;
        if !zone.contains([cx, cy]) {
            continue;
        }
        let (pa, pb, pc) = (mesh.nodes[a], mesh.nodes[b], mesh.nodes[c]);
        let area = mesh.triangle_area(t);
        let bs = [pb[1] - pc[1], pc[1] - pa[1], pa[1] - pb[1]];
        let cs = [pc[0] - pb[0], pa[0] - pc[0], pb[0] - pa[0]];
        let vals = [v[a], v[b], v[c]];
        let mut gx = 0.0;
        let mut gy = 0.0;
        for i in 0..3 {
            gx += vals[i] * bs[i] / (2.0 * area);
            gy += vals[i] * cs[i] / (2.0 * area);
        }
        let n_val = n_map.get(&mesh.material[t]).copied().unwrap_or(1.0);
        acc += area * (gx * gx + gy * gy) / (n_val * n_val);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Rect;
    use crate::fem::mesh::Mesh;

    fn background_map() -> HashMap<u32, f64> {
        HashMap::from([(0u32, 1.0)])
    }

    #[test]
    fn reference_triangle_stiffness() {
        // unit right triangle: K = 1/2 [[2,-1,-1],[-1,1,0],[-1,0,1]]
        let mesh = Mesh {
            nodes: vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            triangles: vec![[0, 1, 2]],
            material: vec![0],
            boundary_edges: vec![],
            gamma_edges: vec![],
        };
        let (k, _) = assemble(&mesh, &background_map()).unwrap();
        let expect = [
            [1.0, -0.5, -0.5],
            [-0.5, 0.5, 0.0],
            [-0.5, 0.0, 0.5],
        ];
        for i in 0..3 {
            for j in 0..3 {
                assert!(
                    (k.get(i, j) - expect[i][j]).abs() < 1e-14,
                    "K[{i}][{j}] = {}",
                    k.get(i, j)
                );
            }
        }
    }

    #[test]
    fn mass_row_sums_partition_area() {
        let rect = Rect {
            x_lo: -1.0,
            x_hi: 0.0,
            y_lo: 0.0,
            y_hi: 2.0,
        };
        let mesh = Mesh::structured(&rect, 3, &[]).unwrap();
        let (_, m) = assemble(&mesh, &background_map()).unwrap();
        // row sums of M aggregate element-area/3 per node
        let mut expect = vec![0.0; mesh.nodes.len()];
        for (t, tri) in mesh.triangles.iter().enumerate() {
            for &v in tri {
                expect[v] += mesh.triangle_area(t) / 3.0;
            }
        }
        let ones = vec![1.0; mesh.nodes.len()];
        let mut sums = vec![0.0; mesh.nodes.len()];
        m.matvec(&ones, &mut sums);
        for (s, e) in sums.iter().zip(expect.iter()) {
            assert!((s - e).abs() < 1e-13);
        }
        let total: f64 = sums.iter().sum();
        assert!((total - 2.0).abs() < 1e-12);
    }

    #[test]
    fn stiffness_annihilates_constants() {
        let rect = Rect {
            x_lo: -2.0,
            x_hi: 0.0,
            y_lo: -1.0,
            y_hi: 1.0,
        };
        let mesh = Mesh::structured(&rect, 4, &[-0.3, 0.3]).unwrap();
        let (k, _) = assemble(&mesh, &background_map()).unwrap();
        let ones = vec![1.0; mesh.nodes.len()];
        let mut out = vec![0.0; mesh.nodes.len()];
        k.matvec(&ones, &mut out);
        let worst = out.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        assert!(worst < 1e-12 * k.max_abs(), "||K 1||_inf = {worst}");
    }
}
