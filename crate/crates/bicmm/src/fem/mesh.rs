//! Structured triangulations of the cavity rectangle, with mesh lines
//! snapped to the waveguide opening, plus Triangle-format import/export.

use crate::error::{Error, Result};
use crate::geom::Rect;
use crate::problem::ValidatedSpec;
use std::collections::HashMap;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum WallTag {
    Left,
    Right,
    Bottom,
    Top,
}

/// Conforming P1 triangulation with per-triangle material and the ordered
/// edges of the waveguide opening.
#[derive(Debug, Clone)]
pub struct Mesh {
    pub nodes: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    /// Region id per triangle; 0 is the background.
    pub material: Vec<u32>,
    /// Boundary edges with their wall tag.
    pub boundary_edges: Vec<([usize; 2], WallTag)>,
    /// Edges tiling the opening `[-h/2, h/2]` on the `x1 = 0` wall,
    /// ascending in `x2`.
    pub gamma_edges: Vec<[usize; 2]>,
}

fn uniform_lines(lo: f64, hi: f64, cells: usize) -> Vec<f64> {
    (0..=cells)
        .map(|i| lo + (hi - lo) * i as f64 / cells as f64)
        .collect()
}

/// Moves the nearest interior grid line onto each snap target.
fn snap_lines(lines: &mut [f64], targets: &[f64]) -> Result<()> {
    let n = lines.len();
    let mut used = vec![false; n];
    used[0] = true;
    used[n - 1] = true;
    for &t in targets {
        if t <= lines[0] || t >= lines[n - 1] {
            return Err(Error::SnapFailure(format!(
                "target {t} outside the wall ({}, {})",
                lines[0],
                lines[n - 1]
            )));
        }
        let mut best = None;
        let mut best_d = f64::INFINITY;
        for (i, (&y, &u)) in lines.iter().zip(used.iter()).enumerate() {
            if u {
                continue;
            }
            let d = (y - t).abs();
            if d < best_d {
                best_d = d;
                best = Some(i);
            }
        }
        let Some(i) = best else {
            return Err(Error::SnapFailure(format!(
                "no free grid line left for target {t}"
            )));
        };
        lines[i] = t;
        used[i] = true;
    }
    for w in lines.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::SnapFailure(
                "snapping destroyed monotonicity; resolution too coarse for the opening".into(),
            ));
        }
    }
    Ok(())
}

impl Mesh {
    /// Structured triangulation of a rectangle with about
    /// `2 * resolution^2` cells per unit square; `snap_ys` lists `x2`
    /// coordinates that must land exactly on grid lines.
    ///
    /// Cell diagonals alternate in a criss-cross pattern. With an odd row
    /// count (`force_odd_rows`) and mirror-symmetric snap targets the
    /// triangulation is exactly symmetric about the cavity midline, so
    /// eigenmodes of symmetric cavities keep their exact parity and
    /// transversal crossings stay crossings instead of turning into
    /// mesh-induced avoided ones.
    pub fn structured(rect: &Rect, resolution: usize, snap_ys: &[f64]) -> Result<Mesh> {
        Mesh::structured_opts(rect, resolution, snap_ys, false)
    }

    pub fn structured_opts(
        rect: &Rect,
        resolution: usize,
        snap_ys: &[f64],
        force_odd_rows: bool,
    ) -> Result<Mesh> {
        assert!(resolution >= 2, "resolution must be at least 2");
        let nx = ((rect.width() * resolution as f64).round() as usize).max(2);
        let mut ny = ((rect.height() * resolution as f64).round() as usize).max(2);
        if force_odd_rows && ny % 2 == 0 {
            ny += 1;
        }
        let xs = uniform_lines(rect.x_lo, rect.x_hi, nx);
        let mut ys = uniform_lines(rect.y_lo, rect.y_hi, ny);
        snap_lines(&mut ys, snap_ys)?;

        let node = |ix: usize, iy: usize| iy * (nx + 1) + ix;
        let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
        for &y in &ys {
            for &x in &xs {
                nodes.push([x, y]);
            }
        }
        let mut triangles = Vec::with_capacity(2 * nx * ny);
        for iy in 0..ny {
            for ix in 0..nx {
                let (n00, n10) = (node(ix, iy), node(ix + 1, iy));
                let (n01, n11) = (node(ix, iy + 1), node(ix + 1, iy + 1));
                if (ix + iy) % 2 == 0 {
                    triangles.push([n00, n10, n11]);
                    triangles.push([n00, n11, n01]);
                } else {
                    triangles.push([n00, n10, n01]);
                    triangles.push([n10, n11, n01]);
                }
            }
        }
        let material = vec![0; triangles.len()];

        let mut boundary_edges = Vec::new();
        for iy in 0..ny {
            boundary_edges.push(([node(0, iy), node(0, iy + 1)], WallTag::Left));
            boundary_edges.push(([node(nx, iy), node(nx, iy + 1)], WallTag::Right));
        }
        for ix in 0..nx {
            boundary_edges.push(([node(ix, 0), node(ix + 1, 0)], WallTag::Bottom));
            boundary_edges.push(([node(ix, ny), node(ix + 1, ny)], WallTag::Top));
        }

        Ok(Mesh {
            nodes,
            triangles,
            material,
            boundary_edges,
            gamma_edges: Vec::new(),
        })
    }

    /// Fills per-triangle materials by centroid-in-disk tests.
    pub fn assign_materials(&mut self, inclusions: &[crate::geom::Inclusion]) {
        for (t, tri) in self.triangles.iter().enumerate() {
            let c = self.centroid(*tri);
            self.material[t] = inclusions
                .iter()
                .find(|inc| inc.contains(c))
                .map(|inc| inc.region_id)
                .unwrap_or(0);
        }
    }

    fn centroid(&self, tri: [usize; 3]) -> [f64; 2] {
        let mut c = [0.0, 0.0];
        for &v in &tri {
            c[0] += self.nodes[v][0] / 3.0;
            c[1] += self.nodes[v][1] / 3.0;
        }
        c
    }

    /// Collects the opening edges on the `x1 = x_wall` wall; they must tile
    /// `[-h/2, h/2]` exactly.
    pub fn collect_gamma_edges(&mut self, x_wall: f64, h: f64) -> Result<()> {
        let scale = self
            .nodes
            .iter()
            .map(|p| p[0].abs().max(p[1].abs()))
            .fold(0.0f64, f64::max);
        let tol = 1e-9 * scale.max(1.0);
        let mut edges: Vec<[usize; 2]> = self
            .boundary_edges
            .iter()
            .map(|(e, _)| *e)
            .filter(|e| {
                let (a, b) = (self.nodes[e[0]], self.nodes[e[1]]);
                (a[0] - x_wall).abs() < tol
                    && (b[0] - x_wall).abs() < tol
                    && a[1] >= -h / 2.0 - tol
                    && b[1] >= -h / 2.0 - tol
                    && a[1] <= h / 2.0 + tol
                    && b[1] <= h / 2.0 + tol
            })
            .collect();
        for e in edges.iter_mut() {
            if self.nodes[e[0]][1] > self.nodes[e[1]][1] {
                e.swap(0, 1);
            }
        }
        edges.sort_by(|a, b| {
            self.nodes[a[0]][1]
                .partial_cmp(&self.nodes[b[0]][1])
                .unwrap()
        });
        // verify exact tiling
        if edges.is_empty() {
            return Err(Error::SnapFailure("no edges found on the opening".into()));
        }
        let y_first = self.nodes[edges[0][0]][1];
        let y_last = self.nodes[edges[edges.len() - 1][1]][1];
        if (y_first + h / 2.0).abs() > tol || (y_last - h / 2.0).abs() > tol {
            return Err(Error::SnapFailure(format!(
                "opening edges span ({y_first}, {y_last}) instead of (-{0}, {0})",
                h / 2.0
            )));
        }
        for w in edges.windows(2) {
            if (self.nodes[w[0][1]][1] - self.nodes[w[1][0]][1]).abs() > tol {
                return Err(Error::SnapFailure("gap in the opening edges".into()));
            }
        }
        self.gamma_edges = edges;
        Ok(())
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        let (pa, pb, pc) = (self.nodes[a], self.nodes[b], self.nodes[c]);
        0.5 * ((pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1]))
    }

    /// Largest index distance within one triangle; the assembled band width.
    pub fn bandwidth(&self) -> usize {
        self.triangles
            .iter()
            .map(|t| {
                let hi = t.iter().max().unwrap();
                let lo = t.iter().min().unwrap();
                hi - lo
            })
            .max()
            .unwrap_or(0)
    }

    /// Reverse Cuthill-McKee renumbering; used after import to keep the
    /// band solver viable on meshes with arbitrary node order.
    pub fn renumber_rcm(&mut self) {
        let n = self.nodes.len();
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
        for t in &self.triangles {
            for &(a, b) in &[(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                adj[a].push(b);
                adj[b].push(a);
            }
        }
        for l in adj.iter_mut() {
            l.sort_unstable();
            l.dedup();
        }
        let mut order = Vec::with_capacity(n);
        let mut seen = vec![false; n];
        let mut by_degree: Vec<usize> = (0..n).collect();
        by_degree.sort_by_key(|&i| adj[i].len());
        for &start in &by_degree {
            if seen[start] {
                continue;
            }
            let mut queue = std::collections::VecDeque::new();
            queue.push_back(start);
            seen[start] = true;
            while let Some(v) = queue.pop_front() {
                order.push(v);
                let mut nb: Vec<usize> = adj[v].iter().copied().filter(|&u| !seen[u]).collect();
                nb.sort_by_key(|&u| adj[u].len());
                for u in nb {
                    seen[u] = true;
                    queue.push_back(u);
                }
            }
        }
        order.reverse();
        // order[k] = old index of new node k; build the inverse map
        let mut new_of_old = vec![0usize; n];
        for (new, &old) in order.iter().enumerate() {
            new_of_old[old] = new;
        }
        let mut nodes = vec![[0.0; 2]; n];
        for (old, &new) in new_of_old.iter().enumerate() {
            nodes[new] = self.nodes[old];
        }
        self.nodes = nodes;
        for t in self.triangles.iter_mut() {
            for v in t.iter_mut() {
                *v = new_of_old[*v];
            }
        }
        for (e, _) in self.boundary_edges.iter_mut() {
            e[0] = new_of_old[e[0]];
            e[1] = new_of_old[e[1]];
        }
        for e in self.gamma_edges.iter_mut() {
            e[0] = new_of_old[e[0]];
            e[1] = new_of_old[e[1]];
        }
    }

    /// Triangle-format export: `<stem>.node` / `<stem>.ele` with the region
    /// id as the element attribute.
    pub fn write_triangle(&self, stem: &Path) -> std::io::Result<()> {
        use std::io::Write;
        let mut node = std::fs::File::create(stem.with_extension("node"))?;
        writeln!(node, "{} 2 0 0", self.nodes.len())?;
        for (i, p) in self.nodes.iter().enumerate() {
            writeln!(node, "{} {:.17e} {:.17e}", i + 1, p[0], p[1])?;
        }
        let mut ele = std::fs::File::create(stem.with_extension("ele"))?;
        writeln!(ele, "{} 3 1", self.triangles.len())?;
        for (i, (t, m)) in self.triangles.iter().zip(self.material.iter()).enumerate() {
            writeln!(ele, "{} {} {} {} {}", i + 1, t[0] + 1, t[1] + 1, t[2] + 1, m)?;
        }
        Ok(())
    }

    /// Triangle-format import. Node numbering may be 0- or 1-based; a
    /// trailing element attribute is read as the region id. The mesh is
    /// RCM-renumbered and orientations are fixed.
    pub fn read_triangle(stem: &Path, opening: Option<(f64, f64)>) -> Result<Mesh> {
        let read = |ext: &str| -> Result<String> {
            std::fs::read_to_string(stem.with_extension(ext))
                .map_err(|e| Error::Config(format!("cannot read {stem:?}.{ext}: {e}")))
        };
        let node_text = read("node")?;
        let ele_text = read("ele")?;

        fn tokens(text: &str) -> impl Iterator<Item = &str> {
            text.lines()
                .map(|l| l.split('#').next().unwrap_or(""))
                .flat_map(|l| l.split_whitespace())
        }

        let mut nt = tokens(&node_text);
        let n_nodes: usize = nt
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Config("bad .node header".into()))?;
        let dim: usize = nt.next().and_then(|s| s.parse().ok()).unwrap_or(2);
        let n_attr: usize = nt.next().and_then(|s| s.parse().ok()).unwrap_or(0);
        let n_bm: usize = nt.next().and_then(|s| s.parse().ok()).unwrap_or(0);
        if dim != 2 {
            return Err(Error::Config(format!(".node dimension {dim} != 2")));
        }
        let mut raw_nodes = Vec::with_capacity(n_nodes);
        let mut first_index = None;
        for _ in 0..n_nodes {
            let idx: usize = nt
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Config("truncated .node".into()))?;
            first_index.get_or_insert(idx);
            let x: f64 = nt
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Config("bad node x".into()))?;
            let y: f64 = nt
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Config("bad node y".into()))?;
            for _ in 0..n_attr + n_bm {
                nt.next();
            }
            raw_nodes.push([x, y]);
        }
        let base = first_index.unwrap_or(0);

        let mut et = tokens(&ele_text);
        let n_tri: usize = et
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Config("bad .ele header".into()))?;
        let per: usize = et.next().and_then(|s| s.parse().ok()).unwrap_or(3);
        let e_attr: usize = et.next().and_then(|s| s.parse().ok()).unwrap_or(0);
        if per != 3 {
            return Err(Error::Config("only linear (3-node) triangles supported".into()));
        }
        let mut triangles = Vec::with_capacity(n_tri);
        let mut material = Vec::with_capacity(n_tri);
        for _ in 0..n_tri {
            let _idx: usize = et
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Config("truncated .ele".into()))?;
            let mut tri = [0usize; 3];
            for v in tri.iter_mut() {
                let raw: usize = et
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| Error::Config("bad element vertex".into()))?;
                *v = raw - base;
            }
            let mut region = 0u32;
            for a in 0..e_attr {
                let val: f64 = et.next().and_then(|s| s.parse().ok()).unwrap_or(0.0);
                if a == 0 {
                    region = val.round().max(0.0) as u32;
                }
            }
            triangles.push(tri);
            material.push(region);
        }

        let mut mesh = Mesh {
            nodes: raw_nodes,
            triangles,
            material,
            boundary_edges: Vec::new(),
            gamma_edges: Vec::new(),
        };
        // fix orientation
        for t in 0..mesh.triangles.len() {
            if mesh.triangle_area(t) < 0.0 {
                mesh.triangles[t].swap(1, 2);
            }
        }
        mesh.rebuild_boundary();
        mesh.renumber_rcm();
        mesh.rebuild_boundary();
        if let Some((x_wall, h)) = opening {
            mesh.collect_gamma_edges(x_wall, h)?;
        }
        Ok(mesh)
    }

    /// Recomputes boundary edges as those belonging to exactly one triangle.
    pub fn rebuild_boundary(&mut self) {
        let mut count: HashMap<(usize, usize), usize> = HashMap::new();
        for t in &self.triangles {
            for &(a, b) in &[(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                let key = (a.min(b), a.max(b));
                *count.entry(key).or_insert(0) += 1;
            }
        }
        let (mut x_lo, mut x_hi, mut y_lo, mut y_hi) =
            (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for p in &self.nodes {
            x_lo = x_lo.min(p[0]);
            x_hi = x_hi.max(p[0]);
            y_lo = y_lo.min(p[1]);
            y_hi = y_hi.max(p[1]);
        }
        let tol = 1e-9 * (x_hi - x_lo).max(y_hi - y_lo).max(1.0);
        let mut edges: Vec<([usize; 2], WallTag)> = count
            .into_iter()
            .filter(|&(_, c)| c == 1)
            .map(|((a, b), _)| {
                let (pa, pb) = (self.nodes[a], self.nodes[b]);
                let tag = if (pa[0] - x_lo).abs() < tol && (pb[0] - x_lo).abs() < tol {
                    WallTag::Left
                } else if (pa[0] - x_hi).abs() < tol && (pb[0] - x_hi).abs() < tol {
                    WallTag::Right
                } else if (pa[1] - y_lo).abs() < tol && (pb[1] - y_lo).abs() < tol {
                    WallTag::Bottom
                } else {
                    WallTag::Top
                };
                ([a, b], tag)
            })
            .collect();
        edges.sort();
        self.boundary_edges = edges;
    }
}

/// Builds the cavity mesh for a validated spec: structured grid, lines
/// snapped to the opening endpoints (plus any `extra_snaps`) and to their
/// mirror images about the cavity midline, materials by centroid, and the
/// opening edges collected.
pub fn build_mesh_with_snaps(
    v: &ValidatedSpec,
    resolution: usize,
    extra_snaps: &[f64],
) -> Result<Mesh> {
    let h = v.h();
    let y_mid = 0.5 * (v.cavity.y_lo + v.cavity.y_hi);
    let mut snaps = vec![-h / 2.0, h / 2.0];
    snaps.extend_from_slice(extra_snaps);
    for i in 0..snaps.len() {
        snaps.push(2.0 * y_mid - snaps[i]);
    }
    let tol = 1e-12 * v.cavity.height();
    snaps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    snaps.dedup_by(|a, b| (*a - *b).abs() < tol);
    snaps.retain(|&y| y > v.cavity.y_lo + tol && y < v.cavity.y_hi - tol);
    let mut mesh = Mesh::structured_opts(&v.cavity, resolution, &snaps, true)?;
    mesh.assign_materials(&v.spec.inclusions);
    mesh.collect_gamma_edges(v.cavity.x_hi, h)?;
    Ok(mesh)
}

/// Builds the cavity mesh for a validated spec at the given resolution.
pub fn build_mesh(v: &ValidatedSpec, resolution: usize) -> Result<Mesh> {
    build_mesh_with_snaps(v, resolution, &[])
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn unit_square_resolution_two() {
        let rect = Rect {
            x_lo: -1.0,
            x_hi: 0.0,
            y_lo: 0.0,
            y_hi: 1.0,
        };
        let mesh = Mesh::structured(&rect, 2, &[]).unwrap();
        assert_eq!(mesh.nodes.len(), 9);
        assert_eq!(mesh.triangles.len(), 8);
        for t in 0..8 {
            assert!(mesh.triangle_area(t) > 0.0);
        }
    }

    #[test]
    fn snapped_opening_tiles_exactly() {
        let spec = crate::presets::example1();
        let v = crate::problem::validate_spec(&spec).unwrap();
        let mesh = build_mesh(&v, 6).unwrap();
        let h = v.h();
        assert!(!mesh.gamma_edges.is_empty());
        let first = mesh.gamma_edges.first().unwrap();
        let last = mesh.gamma_edges.last().unwrap();
        assert_eq!(mesh.nodes[first[0]][1], -h / 2.0);
        assert_eq!(mesh.nodes[last[1]][1], h / 2.0);
    }

    #[test]
    fn inclusion_area_fraction_converges() {
        let spec = crate::presets::example1();
        let v = crate::problem::validate_spec(&spec).unwrap();
        let expect = 6.0 * PI * 0.48 * 0.48 / (PI * 2.0 * PI);
        let mut errs = Vec::new();
        for &res in &[8usize, 16, 32] {
            let mesh = build_mesh(&v, res).unwrap();
            let mut inc_area = 0.0;
            let mut total = 0.0;
            for t in 0..mesh.triangles.len() {
                let a = mesh.triangle_area(t);
                total += a;
                if mesh.material[t] != 0 {
                    inc_area += a;
                }
            }
            errs.push((inc_area / total - expect).abs());
        }
        assert!(errs[2] < errs[0], "fraction errors not shrinking: {errs:?}");
        assert!(errs[2] < 5e-3, "fraction error too large: {errs:?}");
    }

    #[test]
    fn triangle_round_trip() {
        let spec = crate::presets::example1();
        let v = crate::problem::validate_spec(&spec).unwrap();
        let mesh = build_mesh(&v, 4).unwrap();
        let dir = std::env::temp_dir().join("bicmm_mesh_roundtrip");
        std::fs::create_dir_all(&dir).unwrap();
        let stem = dir.join("cavity");
        mesh.write_triangle(&stem).unwrap();
        let back = Mesh::read_triangle(&stem, Some((0.0, v.h()))).unwrap();
        assert_eq!(back.nodes.len(), mesh.nodes.len());
        assert_eq!(back.triangles.len(), mesh.triangles.len());
        assert_eq!(back.gamma_edges.len(), mesh.gamma_edges.len());
        let total: f64 = (0..back.triangles.len())
            .map(|t| back.triangle_area(t))
            .sum();
        assert!((total - 2.0 * PI * PI).abs() < 1e-9);
    }

    #[test]
    fn coarse_snap_fails_cleanly() {
        let rect = Rect {
            x_lo: -1.0,
            x_hi: 0.0,
            y_lo: -0.5,
            y_hi: 0.5,
        };
        // resolution 2 has a single interior line; two targets cannot fit
        let r = Mesh::structured(&rect, 2, &[-0.1, 0.1]);
        assert!(matches!(r, Err(Error::SnapFailure(_))));
    }
}
