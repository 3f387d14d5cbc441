use islands::optimizer::{default_window_width, descent_trace, FlowConfig};
use islands::profile::{Grid1D, SurfaceEnergyKind};

fn main() {
    let v: f64 = 10000.0;
    let mut cfg = FlowConfig::new(SurfaceEnergyKind::SmallSlope);
    cfg.profile_cells = 1024;
    cfg.mesh.max_columns = 0;
    cfg.mesh.max_layers = 24;
    cfg.max_iters = 1500;
    cfg.tol_residual = 0.02;
    let window = Grid1D::symmetric(0.5 * default_window_width(cfg.kind, v), cfg.profile_cells).unwrap();
    let (res, _) = descent_trace(v, &cfg, window).unwrap();
    println!("final el={:.4} iters={} conv={}", res.el_residual, res.iterations, res.converged);
}
