use islands::elastic::{solve_elastic_with_layout, MeshControl, MeshLayout};
use islands::optimizer::{default_window_width, height_floor, minimize, FlowConfig};
use islands::profile::{Grid1D, SurfaceEnergyKind};

fn el_on_mesh(res: &islands::optimizer::MinimizeResult, ctl: &MeshControl) -> (f64, f64) {
    let p = &res.profile;
    let layout = MeshLayout::from_profile(p, ctl).unwrap();
    let sol = solve_elastic_with_layout(p, ctl, &layout, None).unwrap();
    let h = p.heights();
    let dx = p.grid().dx();
    let floor = height_floor(res.breakdown.volume);
    let n = h.len();
    let mut g = vec![0.0; n];
    for i in 1..n - 1 {
        let surf = -2.0 * (h[i + 1] - 2.0 * h[i] + h[i - 1]) / (dx * dx);
        g[i] = sol.top_trace_gradsq[i] + surf;
    }
    let (mut mass, mut mean) = (0.0, 0.0);
    for i in 1..n - 1 {
        if h[i] > floor {
            mass += h[i];
            mean += h[i] * g[i];
        }
    }
    let lam = mean / mass;
    let mut var = 0.0;
    for i in 1..n - 1 {
        if h[i] > floor {
            var += h[i] * (g[i] - lam) * (g[i] - lam);
        }
    }
    ((var / mass).sqrt() / lam.abs(), lam)
}

fn main() {
    let v: f64 = 10000.0;
    let mut cfg = FlowConfig::new(SurfaceEnergyKind::SmallSlope);
    cfg.profile_cells = 2560;
    cfg.mesh.max_columns = 448;
    cfg.mesh.max_layers = 32;
    cfg.restarts = 1;
    let window = Grid1D::symmetric(0.5 * default_window_width(cfg.kind, v), cfg.profile_cells).unwrap();
    let res = minimize(v, &cfg, window).unwrap();
    println!("flow el={:.4} lambda={:.4}", res.el_residual, res.lambda);
    for (cols, layers) in [(448, 32), (640, 40), (896, 48), (1280, 56)] {
        let ctl = MeshControl { max_columns: cols, max_layers: layers, ..Default::default() };
        let (el, lam) = el_on_mesh(&res, &ctl);
        println!("re-measured cols={cols} m={layers}: el={el:.4} lambda={lam:.4}");
    }
}
