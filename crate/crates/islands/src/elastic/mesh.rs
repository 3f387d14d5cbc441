//! Terrain-following triangulation of the subgraph domain Ω_h.
//!
//! Mesh lines sit on (a stride of) the profile nodes. Each line carries a
//! number of layers proportional to its height, graded toward y = 0 where
//! the misfit boundary condition concentrates the field. Neighboring lines
//! may carry different layer counts; the strip between two lines is
//! triangulated by zipping the two node chains bottom-to-top, which keeps
//! the mesh conforming (shared edges live on the lines and are identical
//! for both strips).
//!
//! Lines whose height falls below the floor are void: they contribute a
//! single substrate node, so the film closes with a ramp triangle and the
//! trace condition u(x,0) = x is imposed exactly where the film touches
//! down.

use crate::error::{Error, Result};
use crate::profile::Profile;
use serde::{Deserialize, Serialize};

/// Resolution controls for the subgraph mesh and its linear solver.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MeshControl {
    /// Layers on the tallest column.
    pub max_layers: usize,
    /// Minimum layers on any column above the floor.
    pub min_layers: usize,
    /// Grading exponent p in y_k = H·(k/m)^p; p = 2 refines toward y = 0.
    pub grading: f64,
    /// Cap on the number of mesh cells in x; profile cells are merged in
    /// uniform strides until the cap holds (0 = one mesh line per node).
    pub max_columns: usize,
    /// Height floor relative to max h below which a column is void. Film
    /// below the floor is not meshed; its energy is closed with the
    /// thin-film limit E ≈ volume, which the solver reports separately.
    pub floor_rel: f64,
    /// Relative residual tolerance for the conjugate-gradient solve.
    pub cg_tol: f64,
    pub cg_max_iters: usize,
}

impl Default for MeshControl {
    fn default() -> Self {
        Self {
            max_layers: 24,
            min_layers: 2,
            grading: 2.0,
            max_columns: 240,
            floor_rel: 1e-2,
            cg_tol: 1e-12,
            cg_max_iters: 200_000,
        }
    }
}

impl MeshControl {
    pub fn validate(&self) -> Result<()> {
        if self.max_layers < 2 || self.min_layers < 2 || self.min_layers > self.max_layers {
            return Err(Error::InvalidParameter(format!(
                "layer counts must satisfy 2 <= min <= max, got {}..{}",
                self.min_layers, self.max_layers
            )));
        }
        if !(self.grading >= 1.0) {
            return Err(Error::InvalidParameter("grading exponent must be >= 1".into()));
        }
        if !(self.cg_tol > 0.0) {
            return Err(Error::InvalidParameter("cg tolerance must be positive".into()));
        }
        Ok(())
    }

    /// A coarser copy for inner optimization loops.
    pub fn with_max_columns(mut self, c: usize) -> Self {
        self.max_columns = c;
        self
    }
}

/// A mesh line station given as a position inside the profile grid:
/// x = node_x(cell) + frac·Δx. Stride-selected lines sit on profile nodes
/// (frac = 0); steep cells get fractional sub-lines so that wall wedges are
/// triangulated by graded chains instead of a single-vertex fan, which
/// would otherwise carry an O(1) spurious energy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshLine {
    pub cell: u32,
    pub frac: f64,
}

impl MeshLine {
    fn at_node(i: usize) -> Self {
        MeshLine { cell: i as u32, frac: 0.0 }
    }

    pub fn x(&self, grid: &crate::profile::Grid1D) -> f64 {
        grid.node_x(self.cell as usize) + self.frac * grid.dx()
    }

    pub fn height(&self, p: &Profile) -> f64 {
        let h = p.heights();
        let c = self.cell as usize;
        if self.frac == 0.0 || c + 1 >= h.len() {
            h[c]
        } else {
            h[c] * (1.0 - self.frac) + h[c + 1] * self.frac
        }
    }

    fn key(&self) -> (u32, f64) {
        (self.cell, self.frac)
    }
}

/// The x-stations and per-station layer counts of a mesh. Freezing a layout
/// while the profile evolves keeps the node count and connectivity fixed,
/// which makes energies comparable between flow iterates and lets the
/// solver warm-start from the previous solution.
#[derive(Debug, Clone, PartialEq)]
pub struct MeshLayout {
    /// Stations in strictly increasing x.
    pub lines: Vec<MeshLine>,
    /// Layers per line; 0 marks a void line (single substrate node).
    pub layers: Vec<usize>,
    /// Grading exponent (copied from the control).
    pub grading: f64,
    /// The misfit field decays on the support-width scale, not the column
    /// height; columns taller than this split point put most of their
    /// layers below it and spread the rest uniformly above.
    pub y_split: f64,
}

impl MeshLayout {
    /// Derive a layout from the current nodal heights.
    pub fn from_profile(p: &Profile, ctl: &MeshControl) -> Result<MeshLayout> {
        ctl.validate()?;
        let n_nodes = p.grid().n_nodes();
        let stride = if ctl.max_columns == 0 {
            1
        } else {
            (p.grid().n_cells + ctl.max_columns - 1) / ctl.max_columns
        }
        .max(1);
        let hmax = p.sup_norm();
        if hmax <= 0.0 {
            return Err(Error::EmptyFilm);
        }
        let floor = ctl.floor_rel * hmax;

        let mut stations: Vec<usize> = (0..n_nodes).step_by(stride).collect();
        if *stations.last().unwrap() != n_nodes - 1 {
            stations.push(n_nodes - 1);
        }
        // Pin stations to the support edges and grade them geometrically
        // into the island: the contact region drives the Euler–Lagrange
        // balance there and needs trace resolution finer than the interior
        // stride.
        for (s, e) in p.components(floor) {
            if s > 0 {
                stations.push(s - 1);
            }
            if e + 1 < n_nodes {
                stations.push(e + 1);
            }
            let mut k = 0usize;
            loop {
                let (a, b) = (s + k, e.saturating_sub(k));
                if a >= b || k > 8 * stride {
                    break;
                }
                stations.push(a);
                stations.push(b);
                k = if k == 0 { 1 } else { 2 * k };
            }
        }
        stations.sort_unstable();
        stations.dedup();
        let y_split = 0.6 * p.support_length(floor).max(p.grid().dx());

        let mut lines: Vec<MeshLine> = Vec::with_capacity(stations.len());
        for w in 0..stations.len() {
            if w > 0 {
                let (a, b) = (MeshLine::at_node(stations[w - 1]), MeshLine::at_node(stations[w]));
                // Steep interior cells get graded sub-stations. Cells at the
                // support edge are left alone: the domain ends with a free
                // vertical face there, and laddering it would rebuild a
                // misfit-pinned wedge out of the sub-cell ramp.
                if a.height(p) > floor && b.height(p) > floor {
                    subdivide_steep(p, a, b, ctl, hmax, floor, y_split, 0, &mut lines);
                }
            }
            lines.push(MeshLine::at_node(stations[w]));
        }
        lines.sort_by(|a, b| a.key().partial_cmp(&b.key()).unwrap());
        lines.dedup_by(|a, b| a.key() == b.key());

        let layers = lines
            .iter()
            .map(|l| layer_count(l.height(p), hmax, ctl, floor))
            .collect();
        Ok(MeshLayout { lines, layers, grading: ctl.grading, y_split })
    }

    /// Layout for a constant-height strip on `nx` uniform cells of total
    /// width `width`.
    pub fn strip(nx: usize, layers: usize, grading: f64, width: f64) -> MeshLayout {
        MeshLayout {
            lines: (0..=nx).map(MeshLine::at_node).collect(),
            layers: vec![layers; nx + 1],
            grading,
            y_split: width,
        }
    }

    /// A cell is meshed only when both flanking lines carry film: the
    /// elastic domain ends with a natural (free) vertical face at the last
    /// station above the floor, exactly like a strip wall. Meshing the
    /// sub-cell ramp beyond it would attach a thin misfit-pinned wedge that
    /// the P1 space cannot relax across, poisoning the island field.
    fn is_active_cell(&self, c: usize) -> bool {
        self.layers[c] > 0 && self.layers[c + 1] > 0
    }
}

/// Node heights of a column with `m` layers (and the derivative of each
/// height with respect to the column height, which the energy-gradient
/// assembly needs): a graded ladder plus a thin cap layer under the free
/// surface, where the energy trace is read (the ladder alone would make
/// the topmost element the thickest).
fn chain_heights(h: f64, m: usize, layout: &MeshLayout) -> Vec<(f64, f64)> {
    if m < 3 {
        return ladder_heights(h, m, layout);
    }
    let mut ys = ladder_heights(h, m - 1, layout);
    let (top, dtop) = ys[ys.len() - 1];
    let (below, dbelow) = ys[ys.len() - 2];
    let last = ys.len() - 1;
    ys[last] = (top - 0.2 * (top - below), dtop - 0.2 * (dtop - dbelow));
    ys.push((top, dtop));
    ys
}

fn ladder_heights(h: f64, m: usize, layout: &MeshLayout) -> Vec<(f64, f64)> {
    let mut ys = Vec::with_capacity(m + 1);
    if h <= 1.5 * layout.y_split || m < 4 {
        for k in 0..=m {
            let sigma = (k as f64 / m as f64).powf(layout.grading);
            ys.push((h * sigma, sigma));
        }
    } else {
        // two-zone grading: most layers resolve the decay region below
        // y_split (their heights do not move with the column), the rest
        // span the tall column uniformly
        let m_lo = ((0.7 * m as f64).round() as usize).clamp(2, m - 1);
        let m_hi = m - m_lo;
        for k in 0..=m_lo {
            let sigma = (k as f64 / m_lo as f64).powf(layout.grading);
            ys.push((layout.y_split * sigma, 0.0));
        }
        for j in 1..=m_hi {
            let t = j as f64 / m_hi as f64;
            ys.push((layout.y_split + (h - layout.y_split) * t, t));
        }
    }
    ys
}

fn layer_count(h: f64, hmax: f64, ctl: &MeshControl, floor: f64) -> usize {
    if h <= floor {
        0
    } else {
        // square-root proportionality keeps enough layers on the short
        // columns near the contact, whose surface trace drives the
        // Euler-Lagrange balance
        let frac = (h / hmax).min(1.0).sqrt();
        ((ctl.max_layers as f64 * frac).ceil() as usize).clamp(ctl.min_layers, ctl.max_layers)
    }
}

/// Insert sub-lines between `l` and `r` while the height jump across the
/// cell exceeds a few top-layer thicknesses, bisecting in height so that a
/// vertical wall gets a geometrically graded ladder of stations.
#[allow(clippy::too_many_arguments)]
fn subdivide_steep(
    p: &Profile,
    l: MeshLine,
    r: MeshLine,
    ctl: &MeshControl,
    hmax: f64,
    floor: f64,
    y_split: f64,
    depth: usize,
    out: &mut Vec<MeshLine>,
) {
    if depth >= 20 {
        return;
    }
    let (hl, hr) = (l.height(p), r.height(p));
    let hi = hl.max(hr);
    let lo = hl.min(hr);
    if hi <= floor {
        return;
    }
    let m = layer_count(hi, hmax, ctl, floor).max(2);
    // The fan error of a cross-jump triangle lives at the base of the jump,
    // so the ladder continues until the jump matches the chain's layer size
    // at the low end. The absolute floor of 1e-3·(height scale) stops the
    // recursion from producing near-zero-width slivers at the foot, whose
    // conditioning would defeat the linear solver.
    let scale = layer_size_at(lo.max(floor), hi, y_split, ctl.grading, m);
    if hi - lo <= (2.0 * scale).max(1e-3 * hmax).max(floor) {
        return;
    }
    let target = 0.5 * (hi + lo);
    let Some(mid) = crossing_line(p, &l, &r, target) else {
        return;
    };
    subdivide_steep(p, l, mid, ctl, hmax, floor, y_split, depth + 1, out);
    out.push(mid);
    subdivide_steep(p, mid, r, ctl, hmax, floor, y_split, depth + 1, out);
}

/// Vertical spacing of a column's node chain at height `y`, matching the
/// grading used in `build_mesh`.
fn layer_size_at(y: f64, h: f64, y_split: f64, grading: f64, m: usize) -> f64 {
    if h <= 1.5 * y_split || m < 4 {
        let floor_layer = h / (m as f64).powf(grading);
        (grading * (y / h).powf((grading - 1.0) / grading) * h / m as f64).max(floor_layer)
    } else {
        let m_lo = ((0.7 * m as f64).round() as usize).clamp(2, m - 1);
        let m_hi = (m - m_lo).max(1);
        if y < y_split {
            let floor_layer = y_split / (m_lo as f64).powf(grading);
            (grading * (y / y_split).powf((grading - 1.0) / grading) * y_split / m_lo as f64)
                .max(floor_layer)
        } else {
            (h - y_split) / m_hi as f64
        }
    }
}

/// A station strictly between `l` and `r` where the interpolant is close to
/// `target`: the nearest interior profile node by height if one exists,
/// otherwise the fractional crossing inside the single cell.
fn crossing_line(p: &Profile, l: &MeshLine, r: &MeshLine, target: f64) -> Option<MeshLine> {
    let h = p.heights();
    let lo_node = if l.frac == 0.0 { l.cell as usize + 1 } else { l.cell as usize + 1 };
    let hi_node = r.cell as usize + if r.frac > 0.0 { 1 } else { 0 };
    if lo_node < hi_node {
        // interior profile nodes available: pick the height-closest
        let mut best = lo_node;
        let mut best_d = f64::INFINITY;
        for i in lo_node..hi_node {
            let d = (h[i] - target).abs();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        return Some(MeshLine::at_node(best));
    }
    // single profile cell: fractional crossing of the linear interpolant
    let c = l.cell as usize;
    let (ha, hb) = (h[c], h[c + 1]);
    if (hb - ha).abs() < f64::MIN_POSITIVE {
        return None;
    }
    let t = (target - ha) / (hb - ha);
    let (f_lo, f_hi) = (l.frac, if r.cell as usize == c { r.frac } else { 1.0 });
    if t <= f_lo + 1e-9 || t >= f_hi - 1e-9 {
        return None;
    }
    Some(MeshLine { cell: c as u32, frac: t })
}

/// Conforming triangulation of the subgraph of a column-height function.
#[derive(Debug, Clone)]
pub struct SubgraphMesh {
    pub coords: Vec<[f64; 2]>,
    /// Derivative of each node's height with respect to its column height.
    pub dy_dh: Vec<f64>,
    /// Line index of each node.
    pub node_line: Vec<u32>,
    pub triangles: Vec<[u32; 3]>,
    /// Substrate nodes (y = 0) carrying the Dirichlet value u = x.
    pub base_nodes: Vec<u32>,
    /// Active cells in line order.
    pub cells: Vec<MeshCell>,
    /// First node id of each line (parallel to `layout.lines`); u32::MAX for
    /// lines that are not emitted (void lines with no active neighbor).
    pub line_offset: Vec<u32>,
    pub layout: MeshLayout,
}

#[derive(Debug, Clone, Copy)]
pub struct MeshCell {
    /// Index into `layout.lines` of the left line.
    pub line: usize,
    pub top_tri: u32,
    pub bottom_tri: u32,
    /// Triangle index range [start, end) covering this cell.
    pub tri_start: u32,
    pub tri_end: u32,
}

/// Build the mesh for the given column heights. `xs` and `heights` are the
/// per-line stations and heights (for a `Profile`, its nodes restricted to
/// the layout's lines).
pub fn build_mesh(xs: &[f64], heights: &[f64], layout: &MeshLayout) -> Result<SubgraphMesh> {
    let nl = layout.lines.len();
    assert_eq!(xs.len(), nl);
    assert_eq!(heights.len(), nl);

    // Which lines are emitted: any line touching an active cell.
    let mut emitted = vec![false; nl];
    let mut any_active = false;
    for c in 0..nl - 1 {
        if layout.is_active_cell(c) {
            emitted[c] = true;
            emitted[c + 1] = true;
            any_active = true;
        }
    }
    if !any_active {
        return Err(Error::EmptyFilm);
    }

    let mut coords: Vec<[f64; 2]> = Vec::new();
    let mut dy_dh: Vec<f64> = Vec::new();
    let mut node_line: Vec<u32> = Vec::new();
    let mut base_nodes: Vec<u32> = Vec::new();
    let mut line_offset = vec![u32::MAX; nl];
    for l in 0..nl {
        if !emitted[l] {
            continue;
        }
        line_offset[l] = coords.len() as u32;
        let m = layout.layers[l];
        base_nodes.push(coords.len() as u32);
        if m == 0 {
            coords.push([xs[l], 0.0]);
            dy_dh.push(0.0);
            node_line.push(l as u32);
        } else {
            for (y, d) in chain_heights(heights[l].max(0.0), m, layout) {
                coords.push([xs[l], y]);
                dy_dh.push(d);
                node_line.push(l as u32);
            }
        }
    }

    let mut triangles: Vec<[u32; 3]> = Vec::new();
    let mut cells: Vec<MeshCell> = Vec::new();
    for c in 0..nl - 1 {
        if !layout.is_active_cell(c) {
            continue;
        }
        let (ml, mr) = (layout.layers[c], layout.layers[c + 1]);
        let (offl, offr) = (line_offset[c], line_offset[c + 1]);
        let yl = |k: usize| coords[offl as usize + k][1];
        let yr = |k: usize| coords[offr as usize + k][1];
        let tri_start = triangles.len() as u32;
        let (mut i, mut j) = (0usize, 0usize);
        while i < ml || j < mr {
            let advance_left = if i == ml {
                false
            } else if j == mr {
                true
            } else {
                yl(i + 1) <= yr(j + 1)
            };
            if advance_left {
                triangles.push([offl + i as u32, offr + j as u32, offl + i as u32 + 1]);
                i += 1;
            } else {
                triangles.push([offl + i as u32, offr + j as u32, offr + j as u32 + 1]);
                j += 1;
            }
        }
        let tri_end = triangles.len() as u32;
        cells.push(MeshCell {
            line: c,
            top_tri: tri_end - 1,
            bottom_tri: tri_start,
            tri_start,
            tri_end,
        });
    }

    Ok(SubgraphMesh {
        coords,
        dy_dh,
        node_line,
        triangles,
        base_nodes,
        cells,
        line_offset,
        layout: layout.clone(),
    })
}

impl SubgraphMesh {
    pub fn n_nodes(&self) -> usize {
        self.coords.len()
    }

    /// Gradient (∂x, ∂y) of the P1 field `u` on triangle `t`, with the
    /// triangle area.
    pub fn tri_gradient(&self, t: usize, u: &[f64]) -> ([f64; 2], f64) {
        let [a, b, c] = self.triangles[t];
        let pa = self.coords[a as usize];
        let pb = self.coords[b as usize];
        let pc = self.coords[c as usize];
        let det = (pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1]);
        let area = 0.5 * det.abs();
        if area == 0.0 {
            return ([0.0, 0.0], 0.0);
        }
        let (ua, ub, uc) = (u[a as usize], u[b as usize], u[c as usize]);
        let gx = (ua * (pb[1] - pc[1]) + ub * (pc[1] - pa[1]) + uc * (pa[1] - pb[1])) / det;
        let gy = (ua * (pc[0] - pb[0]) + ub * (pa[0] - pc[0]) + uc * (pb[0] - pa[0])) / det;
        ([gx, gy], area)
    }

    /// P1 stiffness contributions of triangle `t`: nodes and the 3x3 local
    /// matrix.
    pub fn tri_stiffness(&self, t: usize) -> ([u32; 3], [[f64; 3]; 3]) {
        let tri = self.triangles[t];
        let p: Vec<[f64; 2]> = tri.iter().map(|&i| self.coords[i as usize]).collect();
        let b = [p[1][1] - p[2][1], p[2][1] - p[0][1], p[0][1] - p[1][1]];
        let c = [p[2][0] - p[1][0], p[0][0] - p[2][0], p[1][0] - p[0][0]];
        let det = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
        let area4 = 2.0 * det.abs();
        let mut k = [[0.0; 3]; 3];
        if area4 > 0.0 {
            for i in 0..3 {
                for j in 0..3 {
                    k[i][j] = (b[i] * b[j] + c[i] * c[j]) / area4;
                }
            }
        }
        (tri, k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::{shapes, Grid1D};

    #[test]
    fn strip_mesh_counts() {
        let layout = MeshLayout::strip(4, 3, 1.0, 1.0);
        let xs: Vec<f64> = (0..=4).map(|i| i as f64 * 0.25).collect();
        let hs = vec![1.0; 5];
        let mesh = build_mesh(&xs, &hs, &layout).unwrap();
        assert_eq!(mesh.n_nodes(), 5 * 4);
        // each cell zips 3+3 triangles
        assert_eq!(mesh.triangles.len(), 4 * 6);
        assert_eq!(mesh.base_nodes.len(), 5);
        // total area equals the strip area
        let u = vec![0.0; mesh.n_nodes()];
        let total: f64 = (0..mesh.triangles.len())
            .map(|t| mesh.tri_gradient(t, &u).1)
            .sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tent_mesh_covers_subgraph_area() {
        let g = Grid1D::symmetric(2.0, 64).unwrap();
        let p = shapes::tent(g, 1.0, 1.0);
        let ctl = MeshControl { max_columns: 0, max_layers: 6, ..Default::default() };
        let layout = MeshLayout::from_profile(&p, &ctl).unwrap();
        let xs: Vec<f64> = layout.lines.iter().map(|l| l.x(&g)).collect();
        let hs: Vec<f64> = layout.lines.iter().map(|l| l.height(&p)).collect();
        let mesh = build_mesh(&xs, &hs, &layout).unwrap();
        let u = vec![0.0; mesh.n_nodes()];
        let total: f64 = (0..mesh.triangles.len())
            .map(|t| mesh.tri_gradient(t, &u).1)
            .sum();
        // the mesh covers the subgraph between the active stations; the
        // sub-cell ramps at the support edges are clipped by design
        let mut expected = 0.0;
        for c in 0..layout.lines.len() - 1 {
            let (l, r) = (&layout.lines[c], &layout.lines[c + 1]);
            if layout.layers[c] > 0 && layout.layers[c + 1] > 0 {
                expected += 0.5 * (l.height(&p) + r.height(&p)) * (r.x(&g) - l.x(&g));
            }
        }
        assert!((total - expected).abs() < 1e-10, "area {total} vs clipped {expected}");
        assert!(total <= p.volume());
    }

    #[test]
    fn steep_interior_cells_get_graded_sublines() {
        // interior terrace: the jump between the two levels must be laddered
        // instead of left to a single sliver
        let g = Grid1D::symmetric(2.0, 16).unwrap();
        let p = crate::profile::Profile::from_fn(g, |x| {
            if x.abs() < 0.3 {
                5.0
            } else if x.abs() < 1.5 {
                0.5
            } else {
                0.0
            }
        });
        let ctl = MeshControl { max_columns: 0, max_layers: 8, ..Default::default() };
        let layout = MeshLayout::from_profile(&p, &ctl).unwrap();
        let fractional = layout.lines.iter().filter(|l| l.frac > 0.0).count();
        assert!(fractional >= 2, "expected graded terrace stations, got {fractional}");
    }

    #[test]
    fn support_edge_cells_are_not_meshed() {
        // the domain ends with a free vertical face at the last station
        // above the floor; the sub-cell ramp to the void is dropped
        let g = Grid1D::symmetric(2.0, 16).unwrap();
        let p = shapes::rectangle(g, 1.0, 5.0);
        let ctl = MeshControl { max_columns: 0, max_layers: 8, ..Default::default() };
        let layout = MeshLayout::from_profile(&p, &ctl).unwrap();
        let xs: Vec<f64> = layout.lines.iter().map(|l| l.x(&g)).collect();
        let hs: Vec<f64> = layout.lines.iter().map(|l| l.height(&p)).collect();
        let mesh = build_mesh(&xs, &hs, &layout).unwrap();
        let u = vec![0.0; mesh.n_nodes()];
        let total: f64 = (0..mesh.triangles.len()).map(|t| mesh.tri_gradient(t, &u).1).sum();
        // support nodes at |x| <= 1.0: meshed area = 2.0 * 5.0 exactly
        assert!((total - 10.0).abs() < 1e-10, "meshed area {total}");
    }

    #[test]
    fn void_profile_is_empty_film() {
        let g = Grid1D::symmetric(1.0, 8).unwrap();
        let p = crate::profile::Profile::zero(g);
        let ctl = MeshControl::default();
        assert!(matches!(MeshLayout::from_profile(&p, &ctl), Err(Error::EmptyFilm)));
    }
}
