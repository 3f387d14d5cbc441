//! Scratch accuracy probe (temporary; not part of the deliverable).

use islands::elastic::{corrector_cw, solve_elastic, solve_strip, MeshControl};
use islands::profile::{shapes, Grid1D, SurfaceEnergyKind};
use std::time::Instant;

fn strip_energy_series(l: f64) -> f64 {
    // E(L) = (8/π³) Σ_{k odd} k⁻³ tanh(kπL)
    let pi = std::f64::consts::PI;
    let mut sum_all = 0.0;
    let mut k = 19_999_999_i64;
    while k >= 1 {
        sum_all += 1.0 / (k as f64).powi(3);
        k -= 2;
    }
    let mut deficit = 0.0;
    let mut k = 1_i64;
    while k <= 4001 {
        let t = (k as f64) * pi * l;
        deficit += (1.0 - t.tanh()) / (k as f64).powi(3);
        k += 2;
    }
    8.0 / pi.powi(3) * (sum_all - deficit)
}

fn cw_series() -> f64 {
    let pi = std::f64::consts::PI;
    let mut sum_all = 0.0;
    let mut k = 19_999_999_i64;
    while k >= 1 {
        sum_all += 1.0 / (k as f64).powi(3);
        k -= 2;
    }
    8.0 / pi.powi(3) * sum_all
}

fn main() {
    let cw = cw_series();
    println!("series C_W            = {cw:.8}  (7ζ(3)/π³ = 0.27137704...)");
    println!("series E(1)           = {:.8}", strip_energy_series(1.0));
    println!("series E(0.5)         = {:.8}", strip_energy_series(0.5));
    for eps in [0.2, 0.1, 0.05] {
        println!("series E({eps})/{eps}       = {:.6}", strip_energy_series(eps) / eps);
    }

    for (nx, layers, grading) in [(128, 128, 2.0), (256, 256, 2.0), (256, 192, 2.0), (256, 256, 1.5)] {
        let ctl = MeshControl { max_layers: layers, max_columns: 0, grading, ..Default::default() };
        let t0 = Instant::now();
        let e1 = solve_strip(1.0, 1.0, nx, &ctl).unwrap();
        println!(
            "strip L=1 nx={nx} m={layers} g={grading}: E={:.6} relerr={:+.3e} cg={} ({:?})",
            e1.energy,
            e1.energy / strip_energy_series(1.0) - 1.0,
            e1.cg_iterations,
            t0.elapsed()
        );
    }

    for (nx, layers) in [(192, 160), (256, 256)] {
        let ctl = MeshControl { max_layers: layers, max_columns: 0, ..Default::default() };
        let t0 = Instant::now();
        let res = corrector_cw(&[1.0, 2.0, 3.0], nx, &ctl).unwrap();
        println!(
            "corrector nx={nx} m={layers}: C_W={:.6} relerr={:+.3e} ({:?})",
            res.extrapolated,
            res.extrapolated / cw - 1.0,
            t0.elapsed()
        );
    }

    // thin-film ratios
    let ctl = MeshControl { max_layers: 24, max_columns: 0, ..Default::default() };
    for eps in [0.2, 0.1, 0.05] {
        let t0 = Instant::now();
        let sol = solve_strip(1.0, eps, 256, &ctl).unwrap();
        println!(
            "thin film eps={eps}: E/eps = {:.5} (series {:.5}) ({:?})",
            sol.energy / eps,
            strip_energy_series(eps) / eps,
            t0.elapsed()
        );
    }

    // island probe at V=50: parabola family upper bound
    let v: f64 = 50.0;
    for half in [4.5_f64, 5.0, 5.5325, 6.0, 6.5] {
        let window = 8.0 * v.powf(0.4);
        let g = Grid1D::symmetric(window / 2.0, 1536).unwrap();
        let p = shapes::parabola(g, half, v);
        let ctl = MeshControl { max_layers: 24, max_columns: 320, ..Default::default() };
        let t0 = Instant::now();
        let sol = solve_elastic(&p, &ctl).unwrap();
        let s = p.surface_energy(SurfaceEnergyKind::SmallSlope);
        println!(
            "V=50 parabola L={half}: E={:.3} S={:.3} total={:.3} beta={:.4} cg={} ({:?})",
            sol.energy,
            s,
            sol.energy + s,
            (sol.energy + s) / v,
            sol.cg_iterations,
            t0.elapsed()
        );
    }

    // island probe at V=1e4 (balance expectations)
    let v: f64 = 1.0e4;
    let window = 8.0 * v.powf(0.4);
    let g = Grid1D::symmetric(window / 2.0, 1536).unwrap();
    let ell_star = (9.0 / (16.0 * cw)).powf(0.2) * v.powf(0.4);
    let p = shapes::parabola(g, ell_star, v);
    let ctl = MeshControl { max_layers: 24, max_columns: 320, ..Default::default() };
    let t0 = Instant::now();
    let sol = solve_elastic(&p, &ctl).unwrap();
    let s = p.surface_energy(SurfaceEnergyKind::SmallSlope);
    println!(
        "V=1e4 parabola L*={ell_star:.2}: E={:.1} S={:.1} total={:.1} beta(V^-1/5 norm)={:.4} dy/S={:.4} cg={} ({:?})",
        sol.energy,
        s,
        sol.energy + s,
        (sol.energy + s) / v.powf(0.8),
        sol.dy_energy / s,
        sol.cg_iterations,
        t0.elapsed()
    );
}

#[allow(dead_code)]
fn box_probe() {}
