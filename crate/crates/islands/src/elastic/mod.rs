//! Dirichlet-energy minimization on subgraph domains.
//!
//! `solve_elastic` computes the piecewise-linear finite-element minimizer of
//! ∫_{Ω_h} |∇u|² with u(x,0) = x on the support of h and natural boundary
//! conditions everywhere else. The conforming discretization makes the
//! discrete energy an upper bound for the continuum one.
//!
//! `corrector_cw` estimates the half-strip corrector constant
//! C_W = inf { ∫_{[0,1]×[0,∞)} |∇u|² : u(x,0) = x } by solving truncated
//! strips and extrapolating the exponential saturation E(∞) − E(L) ∝ e^{−2πL}.

mod mesh;
mod sparse;

pub use mesh::{build_mesh, MeshCell, MeshControl, MeshLayout, SubgraphMesh};
pub use sparse::{solve_cg, solve_tridiagonal, CooBuilder, CsrMatrix};

use crate::error::{Error, Result};
use crate::profile::{Profile, SurfaceEnergyKind};
use serde::Serialize;
use std::io::Write;

/// Finite-element minimizer of the Dirichlet energy on a subgraph mesh.
#[derive(Debug, Clone)]
pub struct ElasticSolution {
    pub mesh: SubgraphMesh,
    /// Nodal displacement values (Dirichlet rows included).
    pub nodal_values: Vec<f64>,
    pub energy: f64,
    pub dx_energy: f64,
    pub dy_energy: f64,
    /// |∇u|² of the topmost element over each profile node covered by the
    /// mesh (zero over void columns).
    pub top_trace_gradsq: Vec<f64>,
    /// ∂_y u at y = 0 per profile node covered by the mesh.
    pub bottom_flux: Vec<f64>,
    /// Which profile nodes are covered by an active mesh cell.
    pub covered: Vec<bool>,
    /// Area of the meshed subgraph (between active stations).
    pub mesh_area: f64,
    /// Volume of film outside the meshed region, whose energy is accounted
    /// with the thin-film limit E ≈ volume.
    pub thin_film_volume: f64,
    /// Relative residual of the solved system in the right-hand-side norm.
    pub residual: f64,
    pub cg_iterations: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct EnergySummary {
    #[serde(rename = "E")]
    pub energy: f64,
    pub dx_energy: f64,
    pub dy_energy: f64,
    #[serde(rename = "V")]
    pub volume: f64,
}

impl ElasticSolution {
    pub fn summary(&self, volume: f64) -> EnergySummary {
        EnergySummary {
            energy: self.energy,
            dx_energy: self.dx_energy,
            dy_energy: self.dy_energy,
            volume,
        }
    }

    /// Nodal dump `x,y,u`, one node per row.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "x,y,u")?;
        for (c, u) in self.mesh.coords.iter().zip(&self.nodal_values) {
            writeln!(w, "{:?},{:?},{:?}", c[0], c[1], u)?;
        }
        Ok(())
    }
}

/// Solve the elastic problem for a profile. `warm` may carry the nodal
/// values of a previous solve with an identical layout; it is ignored when
/// the node count differs.
pub fn solve_elastic(p: &Profile, ctl: &MeshControl) -> Result<ElasticSolution> {
    let layout = MeshLayout::from_profile(p, ctl)?;
    solve_elastic_with_layout(p, ctl, &layout, None)
}

pub fn solve_elastic_with_layout(
    p: &Profile,
    ctl: &MeshControl,
    layout: &MeshLayout,
    warm: Option<&[f64]>,
) -> Result<ElasticSolution> {
    if p.volume() <= 0.0 {
        return Err(Error::EmptyFilm);
    }
    let grid = p.grid();
    let xs: Vec<f64> = layout.lines.iter().map(|l| l.x(grid)).collect();
    let hs: Vec<f64> = layout.lines.iter().map(|l| l.height(p)).collect();
    let mesh = build_mesh(&xs, &hs, layout)?;
    let mut sol = solve_on_mesh(mesh, ctl, warm)?;
    attach_profile_traces(&mut sol, p);
    sol.thin_film_volume = (p.volume() - sol.mesh_area).max(0.0);
    Ok(sol)
}

/// Rectangle strip [0, width] × [0, height] with u(x,0) = x on the whole
/// base; used by the corrector and the thin-film diagnostics.
pub fn solve_strip(
    width: f64,
    height: f64,
    nx: usize,
    ctl: &MeshControl,
) -> Result<ElasticSolution> {
    if !(width > 0.0) || !(height > 0.0) || nx < 2 {
        return Err(Error::InvalidParameter(
            "strip needs positive width, height and at least 2 cells".into(),
        ));
    }
    ctl.validate()?;
    let layout = MeshLayout::strip(nx, ctl.max_layers, ctl.grading, width);
    let xs: Vec<f64> = (0..=nx).map(|i| width * i as f64 / nx as f64).collect();
    let hs = vec![height; nx + 1];
    let mesh = build_mesh(&xs, &hs, &layout)?;
    let mut sol = solve_on_mesh(mesh, ctl, None)?;
    // per-line traces for strips
    sol.top_trace_gradsq = per_line_top_trace(&sol);
    sol.bottom_flux = per_line_bottom_flux(&sol);
    Ok(sol)
}

fn solve_on_mesh(
    mesh: SubgraphMesh,
    ctl: &MeshControl,
    warm: Option<&[f64]>,
) -> Result<ElasticSolution> {
    let n = mesh.n_nodes();
    // Dirichlet values: u = x at the substrate.
    let mut dirichlet = vec![f64::NAN; n];
    for &b in &mesh.base_nodes {
        dirichlet[b as usize] = mesh.coords[b as usize][0];
    }
    let mut free_index = vec![usize::MAX; n];
    let mut n_free = 0;
    for i in 0..n {
        if dirichlet[i].is_nan() {
            free_index[i] = n_free;
            n_free += 1;
        }
    }

    let mut builder = CooBuilder::new(n_free);
    let mut rhs = vec![0.0; n_free];
    for t in 0..mesh.triangles.len() {
        let (tri, k) = mesh.tri_stiffness(t);
        for a in 0..3 {
            let ia = tri[a] as usize;
            if free_index[ia] == usize::MAX {
                continue;
            }
            let fa = free_index[ia];
            for b in 0..3 {
                let ib = tri[b] as usize;
                if free_index[ib] == usize::MAX {
                    rhs[fa] -= k[a][b] * dirichlet[ib];
                } else {
                    builder.add(fa, free_index[ib], k[a][b]);
                }
            }
        }
    }
    let a = builder.build();

    let mut x = vec![0.0; n_free];
    match warm {
        Some(w) if w.len() == n => {
            for i in 0..n {
                if free_index[i] != usize::MAX {
                    x[free_index[i]] = w[i];
                }
            }
        }
        _ => {
            // start from the misfit field u = x, damped away from the base
            for i in 0..n {
                if free_index[i] != usize::MAX {
                    x[free_index[i]] = mesh.coords[i][0];
                }
            }
        }
    }

    let report = solve_cg(&a, &rhs, &mut x, ctl.cg_tol, ctl.cg_max_iters)?;

    let mut u = vec![0.0; n];
    for i in 0..n {
        u[i] = if free_index[i] == usize::MAX {
            dirichlet[i]
        } else {
            x[free_index[i]]
        };
    }

    let mut ex = 0.0;
    let mut ey = 0.0;
    let mut mesh_area = 0.0;
    for t in 0..mesh.triangles.len() {
        let (g, area) = mesh.tri_gradient(t, &u);
        ex += g[0] * g[0] * area;
        ey += g[1] * g[1] * area;
        mesh_area += area;
    }

    Ok(ElasticSolution {
        mesh,
        nodal_values: u,
        energy: ex + ey,
        dx_energy: ex,
        dy_energy: ey,
        top_trace_gradsq: Vec::new(),
        bottom_flux: Vec::new(),
        covered: Vec::new(),
        mesh_area,
        thin_film_volume: 0.0,
        residual: report.rel_residual,
        cg_iterations: report.iterations,
    })
}

/// Fill the per-profile-node trace arrays by spreading each mesh cell's top
/// and bottom element values over the profile nodes it covers.
fn attach_profile_traces(sol: &mut ElasticSolution, p: &Profile) {
    let grid = p.grid();
    let n = grid.n_nodes();
    let mut top = vec![0.0; n];
    let mut flux = vec![0.0; n];
    let mut weight = vec![0.0; n];
    let mesh = &sol.mesh;
    for cell in &mesh.cells {
        let (gt, _) = mesh.tri_gradient(cell.top_tri as usize, &sol.nodal_values);
        let (gb, _) = mesh.tri_gradient(cell.bottom_tri as usize, &sol.nodal_values);
        let gradsq = gt[0] * gt[0] + gt[1] * gt[1];
        let left = &mesh.layout.lines[cell.line];
        let right = &mesh.layout.lines[cell.line + 1];
        let lo = left.cell as usize + if left.frac > 0.0 { 1 } else { 0 };
        let hi = (right.cell as usize + if right.frac > 0.0 { 1 } else { 0 }).min(n - 1);
        for i in lo..=hi {
            top[i] += gradsq;
            flux[i] += gb[1];
            weight[i] += 1.0;
        }
    }
    let mut covered = vec![false; n];
    for i in 0..n {
        if weight[i] > 0.0 {
            top[i] /= weight[i];
            flux[i] /= weight[i];
            covered[i] = true;
        } else {
            // marginal energy of nucleating film on bare substrate: the
            // misfit field u = x carries |∇u|² = 1 in the thin-film limit
            top[i] = 1.0;
        }
    }
    sol.top_trace_gradsq = top;
    sol.bottom_flux = flux;
    sol.covered = covered;
}

fn per_line_top_trace(sol: &ElasticSolution) -> Vec<f64> {
    let mesh = &sol.mesh;
    let mut out = vec![0.0; mesh.layout.lines.len()];
    let mut w = vec![0.0; mesh.layout.lines.len()];
    for cell in &mesh.cells {
        let (g, _) = mesh.tri_gradient(cell.top_tri as usize, &sol.nodal_values);
        let v = g[0] * g[0] + g[1] * g[1];
        for l in [cell.line, cell.line + 1] {
            out[l] += v;
            w[l] += 1.0;
        }
    }
    for (o, w) in out.iter_mut().zip(w) {
        if w > 0.0 {
            *o /= w;
        }
    }
    out
}

fn per_line_bottom_flux(sol: &ElasticSolution) -> Vec<f64> {
    let mesh = &sol.mesh;
    let mut out = vec![0.0; mesh.layout.lines.len()];
    let mut w = vec![0.0; mesh.layout.lines.len()];
    for cell in &mesh.cells {
        let (g, _) = mesh.tri_gradient(cell.bottom_tri as usize, &sol.nodal_values);
        for l in [cell.line, cell.line + 1] {
            out[l] += g[1];
            w[l] += 1.0;
        }
    }
    for (o, w) in out.iter_mut().zip(w) {
        if w > 0.0 {
            *o /= w;
        }
    }
    out
}

/// Exact gradient of the discrete elastic energy with respect to the
/// profile's nodal heights, through the frozen layout's node map (each mesh
/// node height is linear in its column height, which is linear in the two
/// flanking profile heights). By the envelope theorem the solved field can
/// be treated as fixed:
///   dE/dh_i = uᵀ (∂K/∂h_i) u.
/// This is the discrete realization of the Hadamard trace |∇u|²(x, h(x)).
pub fn energy_gradient(sol: &ElasticSolution, p: &Profile) -> Vec<f64> {
    let mesh = &sol.mesh;
    let u = &sol.nodal_values;
    let nl = mesh.layout.lines.len();
    let mut line_grad = vec![0.0; nl];
    for t in 0..mesh.triangles.len() {
        let tri = mesh.triangles[t];
        let pa = mesh.coords[tri[0] as usize];
        let pb = mesh.coords[tri[1] as usize];
        let pc = mesh.coords[tri[2] as usize];
        let (ua, ub, uc) = (
            u[tri[0] as usize],
            u[tri[1] as usize],
            u[tri[2] as usize],
        );
        let det = (pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1]);
        if det.abs() < 1e-300 {
            continue;
        }
        // element energy (B² + C²) / (2|det|), B = Σ u_a b_a, C = Σ u_a c_a
        let b = [pb[1] - pc[1], pc[1] - pa[1], pa[1] - pb[1]];
        let c = [pc[0] - pb[0], pa[0] - pc[0], pb[0] - pa[0]];
        let bsum = ua * b[0] + ub * b[1] + uc * b[2];
        let csum = ua * c[0] + ub * c[1] + uc * c[2];
        let e_t = (bsum * bsum + csum * csum) / (2.0 * det.abs());
        // derivatives with respect to the vertex heights
        let db_dy = [uc - ub, ua - uc, ub - ua];
        let ddet_dy = [pc[0] - pb[0], pa[0] - pc[0], pb[0] - pa[0]];
        for v in 0..3 {
            let node = tri[v] as usize;
            let de_dy = bsum * db_dy[v] / det.abs()
                - e_t * ddet_dy[v] * det.signum() / det.abs();
            line_grad[mesh.node_line[node] as usize] += de_dy * mesh.dy_dh[node];
        }
    }
    // scatter line gradients to the profile nodes through the station map
    let n = p.grid().n_nodes();
    let mut grad = vec![0.0; n];
    for (l, g) in line_grad.iter().enumerate() {
        if *g == 0.0 {
            continue;
        }
        let line = &mesh.layout.lines[l];
        let c = line.cell as usize;
        if line.frac == 0.0 || c + 1 >= n {
            grad[c] += g;
        } else {
            grad[c] += g * (1.0 - line.frac);
            grad[c + 1] += g * line.frac;
        }
    }
    grad
}

/// Ratio ∫(∂_y u)² / S(h); equals 3/4 for small slope and 1/4 for large
/// slope at converged minimizers of the full problem.
pub fn balance_ratio(sol: &ElasticSolution, p: &Profile, kind: SurfaceEnergyKind) -> Result<f64> {
    let s = p.surface_energy(kind.reporting());
    if s <= 0.0 {
        return Err(Error::UndefinedRatio("zero surface energy".into()));
    }
    Ok(sol.dy_energy / s)
}

/// Relative gap in the integration-by-parts identity
/// E = V − ∫_{Ω_h} ∂_y u · h'(x); O(mesh size) at the discrete level.
pub fn flux_identity_gap(sol: &ElasticSolution, p: &Profile) -> f64 {
    let grid = p.grid();
    let mesh = &sol.mesh;
    let mut cross = 0.0;
    for cell in &mesh.cells {
        let l = &mesh.layout.lines[cell.line];
        let r = &mesh.layout.lines[cell.line + 1];
        let slope = (r.height(p) - l.height(p)) / (r.x(grid) - l.x(grid)).max(f64::MIN_POSITIVE);
        for t in cell.tri_start..cell.tri_end {
            let (g, area) = mesh.tri_gradient(t as usize, &sol.nodal_values);
            cross += g[1] * slope * area;
        }
    }
    let v = p.volume();
    (sol.energy - (v - cross)).abs() / sol.energy.max(f64::MIN_POSITIVE)
}

/// Corrector-constant estimate from a list of strip truncations.
#[derive(Debug, Clone, Serialize)]
pub struct CorrectorResult {
    pub truncation_heights: Vec<f64>,
    pub energies: Vec<f64>,
    /// Extrapolated E(∞) = C_W estimate.
    pub extrapolated: f64,
    /// Half-width of the spread between the extrapolation and the largest
    /// computed energy.
    pub error_estimate: f64,
}

/// Solve the unit-width strip at each truncation and extrapolate using the
/// saturation model E(∞) − E(L) = A·e^{−2πL}.
pub fn corrector_cw(truncations: &[f64], nx: usize, ctl: &MeshControl) -> Result<CorrectorResult> {
    if truncations.len() < 2 {
        return Err(Error::InvalidParameter(
            "corrector extrapolation needs at least 2 truncations".into(),
        ));
    }
    let mut ls = truncations.to_vec();
    ls.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if ls[0] <= 0.0 {
        return Err(Error::InvalidParameter("truncations must be positive".into()));
    }
    if ls.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter("truncations must be strictly increasing".into()));
    }
    let mut energies = Vec::with_capacity(ls.len());
    for &l in &ls {
        let sol = solve_strip(1.0, l, nx, ctl)?;
        energies.push(sol.energy);
    }

    // Least squares for (E∞, A) in E(L) = E∞ − A e^{−2πL}. With weights
    // favoring the deepest truncations, where the model error is smallest.
    let k: Vec<f64> = ls.iter().map(|l| (-2.0 * std::f64::consts::PI * l).exp()).collect();
    let m = ls.len() as f64;
    let sk: f64 = k.iter().sum();
    let skk: f64 = k.iter().map(|v| v * v).sum();
    let se: f64 = energies.iter().sum();
    let ske: f64 = k.iter().zip(&energies).map(|(a, b)| a * b).sum();
    let det = m * skk - sk * sk;
    let (e_inf, amp) = if det.abs() > 1e-300 {
        let e_inf = (skk * se - sk * ske) / det;
        let amp = (sk * se - m * ske) / det;
        (e_inf, amp.max(0.0))
    } else {
        (energies[energies.len() - 1], 0.0)
    };
    // The infimum over growing domains is approached from below; never
    // extrapolate below the deepest computed energy.
    let max_e = energies.iter().cloned().fold(f64::MIN, f64::max);
    let e_inf = e_inf.max(max_e);
    // model's own residual gap at the deepest truncation
    let tail = amp * k[k.len() - 1];
    Ok(CorrectorResult {
        truncation_heights: ls,
        energies: energies.clone(),
        extrapolated: e_inf,
        error_estimate: tail.max(e_inf - max_e),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::{shapes, Grid1D};

    fn ctl(layers: usize, cols: usize) -> MeshControl {
        MeshControl {
            max_layers: layers,
            max_columns: cols,
            ..Default::default()
        }
    }

    #[test]
    fn empty_film_is_rejected() {
        let g = Grid1D::symmetric(1.0, 16).unwrap();
        let p = Profile::zero(g);
        assert!(matches!(
            solve_elastic(&p, &MeshControl::default()),
            Err(Error::EmptyFilm)
        ));
    }

    #[test]
    fn solution_satisfies_base_condition_and_energy_split() {
        let g = Grid1D::symmetric(2.0, 64).unwrap();
        let p = shapes::parabola(g, 1.5, 1.0);
        let sol = solve_elastic(&p, &ctl(10, 64)).unwrap();
        assert!(sol.residual <= 1e-10);
        for &b in &sol.mesh.base_nodes {
            let x = sol.mesh.coords[b as usize][0];
            assert_eq!(sol.nodal_values[b as usize], x);
        }
        let split = (sol.dx_energy + sol.dy_energy - sol.energy).abs();
        assert!(split <= 1e-10 * sol.energy);
    }

    #[test]
    fn square_rescaling_is_exact_on_scaled_meshes() {
        // E over [0,ℓ]² with u(x,0)=x scales as ℓ² exactly for geometrically
        // scaled meshes.
        let c = ctl(24, 48);
        let e1 = solve_strip(1.0, 1.0, 48, &c).unwrap().energy;
        let e2 = solve_strip(2.0, 2.0, 48, &c).unwrap().energy;
        assert!((e2 - 4.0 * e1).abs() < 1e-6 * e1, "e1={e1} e2={e2}");
    }

    #[test]
    fn flat_layer_balance_ratio_is_near_zero() {
        let g = Grid1D::symmetric(4.0, 128).unwrap();
        let p = shapes::flat(g, 0.05);
        let sol = solve_elastic(&p, &ctl(6, 128)).unwrap();
        let r = balance_ratio(&sol, &p, SurfaceEnergyKind::SmallSlope).unwrap();
        assert!(r.abs() < 0.05, "ratio {r}");
        let z = Profile::zero(g);
        assert!(balance_ratio(&sol, &z, SurfaceEnergyKind::SmallSlope).is_err());
    }

    #[test]
    fn corrector_needs_two_truncations() {
        assert!(corrector_cw(&[1.0], 32, &MeshControl::default()).is_err());
        assert!(corrector_cw(&[1.0, 1.0], 32, &MeshControl::default()).is_err());
        assert!(corrector_cw(&[-1.0, 1.0], 32, &MeshControl::default()).is_err());
    }

    #[test]
    fn corrector_extrapolation_dominates_computed_energies() {
        let c = ctl(32, 64);
        let res = corrector_cw(&[1.0, 2.0], 64, &c).unwrap();
        assert!(res.extrapolated >= res.energies[1]);
        assert!(res.energies[1] >= res.energies[0]);
    }

    #[test]
    fn refinement_is_monotone_in_energy() {
        // Nested conforming spaces: refining both directions can only lower
        // the discrete minimum.
        let coarse = solve_strip(1.0, 1.0, 24, &ctl(12, 24)).unwrap().energy;
        let fine = solve_strip(1.0, 1.0, 48, &ctl(24, 48)).unwrap().energy;
        assert!(fine <= coarse + 1e-9, "coarse {coarse} fine {fine}");
    }

    #[test]
    fn energy_gradient_matches_finite_differences() {
        let g = Grid1D::symmetric(4.0, 48).unwrap();
        let p = shapes::parabola(g, 2.5, 3.0);
        let ctl = ctl(10, 0);
        let layout = MeshLayout::from_profile(&p, &ctl).unwrap();
        let sol = solve_elastic_with_layout(&p, &ctl, &layout, None).unwrap();
        let grad = energy_gradient(&sol, &p);
        let delta = 1e-6;
        // probe a few representative interior nodes under the same layout
        for i in [14, 20, 24, 30] {
            let mut hp = p.clone();
            hp.heights_mut()[i] += delta;
            hp.restore_feasibility();
            let ep = solve_elastic_with_layout(&hp, &ctl, &layout, None).unwrap().energy;
            let mut hm = p.clone();
            hm.heights_mut()[i] -= delta;
            hm.restore_feasibility();
            let em = solve_elastic_with_layout(&hm, &ctl, &layout, None).unwrap().energy;
            let fd = (ep - em) / (2.0 * delta);
            assert!(
                (grad[i] - fd).abs() <= 2e-4 * fd.abs().max(1e-3),
                "node {i}: analytic {} vs fd {}",
                grad[i],
                fd
            );
        }
    }

    #[test]
    fn flux_identity_holds_on_smooth_profile() {
        let g = Grid1D::symmetric(8.0, 256).unwrap();
        let p = shapes::parabola(g, 5.0, 30.0);
        let sol = solve_elastic(&p, &ctl(20, 256)).unwrap();
        let gap = flux_identity_gap(&sol, &p);
        assert!(gap < 0.05, "flux identity gap {gap}");
    }
}
