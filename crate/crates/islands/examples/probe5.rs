use islands::elastic::{solve_elastic_with_layout, MeshControl, MeshLayout};
use islands::optimizer::{default_window_width, descent_trace, height_floor, FlowConfig};
use islands::profile::{Grid1D, SurfaceEnergyKind};

fn main() {
    let v: f64 = 10000.0;
    let mut cfg = FlowConfig::new(SurfaceEnergyKind::SmallSlope);
    cfg.profile_cells = 1024;
    cfg.mesh.max_columns = 0;
    cfg.mesh.max_layers = 24;
    cfg.max_iters = 400;
    let window = Grid1D::symmetric(0.5 * default_window_width(cfg.kind, v), cfg.profile_cells).unwrap();
    let (res, _) = descent_trace(v, &cfg, window).unwrap();
    println!("el={:.4} lambda={:.4}", res.el_residual, res.lambda);
    let p = &res.profile;
    let layout = MeshLayout::from_profile(p, &cfg.mesh).unwrap();
    let sol = solve_elastic_with_layout(p, &cfg.mesh, &layout, None).unwrap();
    let h = p.heights();
    let dx = p.grid().dx();
    let floor = height_floor(v);
    let n = h.len();
    let lam = res.lambda;
    let mut rows: Vec<(f64, usize)> = Vec::new();
    let mut mass = 0.0;
    for i in 1..n - 1 {
        if h[i] > floor {
            let surf = -2.0 * (h[i + 1] - 2.0 * h[i] + h[i - 1]) / (dx * dx);
            let g = sol.top_trace_gradsq[i] + surf;
            rows.push((h[i] * (g - lam) * (g - lam), i));
            mass += h[i];
        }
    }
    rows.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let total: f64 = rows.iter().map(|r| r.0).sum();
    println!("total weighted var {total:.3} -> rel {:.4}", (total / mass).sqrt() / lam);
    for (wv, idx) in rows.iter().take(12) {
        let i = *idx;
        let surf = -2.0 * (h[i + 1] - 2.0 * h[i] + h[i - 1]) / (dx * dx);
        println!(
            "  i={i} x={:8.2} h={:9.3} eltop={:8.4} -2h''={:8.4} g-lam={:+8.4} contrib {:5.1}%",
            p.grid().node_x(i), h[i], sol.top_trace_gradsq[i], surf,
            sol.top_trace_gradsq[i] + surf - lam,
            100.0 * wv / total
        );
    }
}
