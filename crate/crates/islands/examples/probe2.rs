//! Scratch flow probe (temporary).

use islands::elastic::MeshControl;
use islands::optimizer::{minimize, FlowConfig, VolumeMode};
use islands::profile::{Grid1D, SurfaceEnergyKind};
use std::time::Instant;

fn main() {
    let v: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1.0);
    let kind = match std::env::args().nth(2).as_deref() {
        Some("large") => SurfaceEnergyKind::large_slope(),
        _ => SurfaceEnergyKind::SmallSlope,
    };
    let factor = match kind {
        SurfaceEnergyKind::SmallSlope => v.powf(0.4),
        _ => v.powf(1.0 / 3.0),
    };
    let width = islands::optimizer::default_window_width(kind, v);
    let _ = factor;
    let window = Grid1D::symmetric(0.5 * width, 512).unwrap();
    let mut cfg = FlowConfig::new(kind);
    cfg.max_iters = 800;
    cfg.restarts = 2;
    cfg.mesh = match kind {
        SurfaceEnergyKind::LargeSlope { .. } => MeshControl { max_columns: 256, max_layers: 32, ..Default::default() },
        _ => MeshControl { max_columns: 256, max_layers: 20, ..Default::default() },
    };
    cfg.volume_mode = VolumeMode::Projection;
    let t0 = Instant::now();
    let res = minimize(v, &cfg, window).unwrap();
    println!(
        "V={v} kind={kind:?}: E={:.4} S={:.4} total={:.4} beta={:.4} lambda={:.4} el={:.4} contact={:.4} supp={:.2}/{:.2} iters={} conv={} seed={} ({:?})",
        res.breakdown.elastic,
        res.breakdown.surface,
        res.breakdown.total,
        res.breakdown.beta,
        res.lambda,
        res.el_residual,
        res.contact_slope,
        res.support_length,
        window.width(),
        res.iterations,
        res.converged,
        res.seed,
        t0.elapsed()
    );
}
