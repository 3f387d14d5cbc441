use islands::elastic::{energy_gradient, solve_elastic_with_layout, solve_tridiagonal, MeshControl, MeshLayout};
use islands::optimizer::project_volume;
use islands::profile::{shapes, Grid1D, Profile, SurfaceEnergyKind};

fn main() {
    let v: f64 = 10000.0;
    let cells = 1024;
    let window = Grid1D::symmetric(
        0.5 * islands::optimizer::default_window_width(SurfaceEnergyKind::SmallSlope, v),
        cells,
    )
    .unwrap();
    let ctl = MeshControl { max_columns: 0, max_layers: 24, ..Default::default() };
    let ell = (9.0 / (16.0 * 0.271377_f64)).powf(0.2) * v.powf(0.4);
    let mut p = shapes::parabola(window, ell, v);
    project_volume(&mut p, v, islands::optimizer::VolumeMode::Projection).unwrap();
    let layout = MeshLayout::from_profile(&p, &ctl).unwrap();
    let sol = solve_elastic_with_layout(&p, &ctl, &layout, None).unwrap();
    let s0 = p.surface_energy(SurfaceEnergyKind::SmallSlope);
    let phi0 = sol.energy + s0;
    println!("phi0={phi0:.6}");

    let grad = energy_gradient(&sol, &p);
    let dx = window.dx();
    let h = p.heights().to_vec();
    let n = h.len();
    let field: Vec<f64> = (0..n)
        .map(|i| if sol.covered[i] { grad[i] / dx } else { 1.0 })
        .collect();

    for tau in [1e-5_f64, 1e-4, 1e-3, 1e-2, 1e-1] {
        // replicate semi_implicit_step for small slope
        let w = vec![2.0 / (dx * dx); n - 1];
        let (mut count, mut mean) = (0.0, 0.0);
        for i in 1..n - 1 {
            if h[i] > 0.0 {
                let surf = w[i - 1] * (h[i] - h[i - 1]) + w[i] * (h[i] - h[i + 1]);
                count += 1.0;
                mean += field[i] + surf;
            }
        }
        let shift = -(mean / count);
        let cap = 3.0_f64.max(4.0 * shift.abs());
        let m = n - 2;
        let mut diag = vec![0.0; m];
        let mut off = vec![0.0; m - 1];
        let mut rhs = vec![0.0; m];
        for i in 1..n - 1 {
            let k = i - 1;
            diag[k] = 1.0 + tau * (w[i - 1] + w[i]);
            if k + 1 < m {
                off[k] = -tau * w[i];
            }
            rhs[k] = h[i] - tau * (field[i] + shift).clamp(-cap, cap);
        }
        solve_tridiagonal(&diag, &off, &mut rhs);
        let cap_abs = 1e-3 * p.sup_norm();
        let hh = h.clone();
        let rr = rhs.clone();
        let mut trial = Profile::from_fn(window, |x| {
            let t = (x - window.x_min) / dx;
            let i = (t.round() as usize).min(n - 1);
            if i == 0 || i == n - 1 {
                0.0
            } else {
                let delta = rr[i - 1] - hh[i];
                let limit = 0.3 * hh[i] + cap_abs;
                hh[i] + delta.clamp(-limit, limit)
            }
        });
        project_volume(&mut trial, v, islands::optimizer::VolumeMode::Projection).unwrap();
        let tl = MeshLayout::from_profile(&trial, &ctl).unwrap();
        let ts = solve_elastic_with_layout(&trial, &ctl, &tl, Some(&sol.nodal_values)).unwrap();
        let phi = ts.energy + trial.surface_energy(SurfaceEnergyKind::SmallSlope);
        println!(
            "tau={tau:.0e}: dPhi={:+.5e} (dE={:+.4e} dS={:+.4e}) layout_nodes {} -> {}",
            phi - phi0,
            ts.energy - sol.energy,
            trial.surface_energy(SurfaceEnergyKind::SmallSlope) - s0,
            sol.mesh.coords.len(),
            ts.mesh.coords.len()
        );
    }
}
