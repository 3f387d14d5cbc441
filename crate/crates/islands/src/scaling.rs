//! Volume sweeps, scaling-law fits, wetting detection, and the closed-form
//! 3D constructions.
//!
//! A sweep minimizes the energy at each volume independently (the points
//! run in parallel), then fits the island-regime scaling law
//! F(V) ~ V^{4/5} (small slope) or V^{2/3} (large slope) on the top decade
//! of converged points, and brackets the wetting threshold where
//! β(V) = F(V)/V leaves 1.

use crate::error::{Error, Result};
use crate::optimizer::{default_window_width, height_floor, kind_name, minimize, FlowConfig, MinimizeResult};
use crate::profile::{Grid1D, SurfaceEnergyKind};
use rayon::prelude::*;
use serde::Serialize;
use std::io::Write;

#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub volume: f64,
    pub result: MinimizeResult,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub kind: SurfaceEnergyKind,
    pub points: Vec<SweepPoint>,
    pub fitted_exponent: Option<f64>,
    pub vbar_estimate: Option<WettingBracket>,
}

/// Bracket around the wetting threshold: the largest volume still at β ≈ 1
/// and the smallest one strictly below.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct WettingBracket {
    pub last_wetting: f64,
    pub first_island: f64,
}

impl WettingBracket {
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.last_wetting + self.first_island)
    }

    pub fn width(&self) -> f64 {
        self.first_island - self.last_wetting
    }
}

/// Detection margin for β < 1: mesh slack plus a fixed offset.
pub const WETTING_MARGIN: f64 = 0.04;

impl SweepResult {
    pub fn volumes(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.volume).collect()
    }

    pub fn totals(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.result.breakdown.total).collect()
    }

    pub fn betas(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.result.breakdown.beta).collect()
    }

    pub fn max_heights(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.result.profile.sup_norm()).collect()
    }

    /// Island-regime points (β below the wetting margin) that converged.
    fn island_points(&self) -> Vec<&SweepPoint> {
        self.points
            .iter()
            .filter(|p| p.result.converged && p.result.breakdown.beta < 1.0 - WETTING_MARGIN)
            .collect()
    }

    /// CSV dump: `V,E,S,total,beta,lambda,maxh,support,converged`.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "V,E,S,total,beta,lambda,maxh,support,converged")?;
        for p in &self.points {
            let b = &p.result.breakdown;
            writeln!(
                w,
                "{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{}",
                p.volume,
                b.elastic,
                b.surface,
                b.total,
                b.beta,
                p.result.lambda,
                p.result.profile.sup_norm(),
                p.result.support_length,
                p.result.converged
            )?;
        }
        Ok(())
    }

    pub fn fit_summary(&self) -> serde_json::Value {
        serde_json::json!({
            "kind": kind_name(self.kind),
            "volumes": self.volumes(),
            "totals": self.totals(),
            "betas": self.betas(),
            "fitted_exponent": self.fitted_exponent,
            "maxheight_exponent": maxheight_law(self),
            "concavity_gap": concavity_gap(self),
            "vbar_bracket": self.vbar_estimate,
            "converged": self.points.iter().map(|p| p.result.converged).collect::<Vec<_>>(),
        })
    }
}

/// Run the optimizer over a volume list. Unconverged volumes stay in the
/// result (flagged) but are excluded from the fits.
pub fn sweep(kind: SurfaceEnergyKind, volumes: &[f64], cfg: &FlowConfig) -> Result<SweepResult> {
    if volumes.is_empty() {
        return Err(Error::InvalidParameter("volume list is empty".into()));
    }
    if volumes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter("volumes must be strictly increasing".into()));
    }
    if volumes[0] <= 0.0 {
        return Err(Error::InvalidParameter("volumes must be positive".into()));
    }
    let points: Vec<SweepPoint> = volumes
        .par_iter()
        .map(|&v| {
            let window = Grid1D::symmetric(0.5 * default_window_width(kind, v), cfg.profile_cells)?;
            let result = minimize(v, cfg, window)?;
            Ok(SweepPoint { volume: v, result })
        })
        .collect::<Result<_>>()?;

    let mut out = SweepResult {
        kind,
        points,
        fitted_exponent: None,
        vbar_estimate: None,
    };
    out.fitted_exponent = top_decade_exponent(&out);
    out.vbar_estimate = wetting_bracket(&out);
    Ok(out)
}

/// Least-squares slope of ln(total) against ln(V) over the top decade of
/// converged island points.
fn top_decade_exponent(sweep: &SweepResult) -> Option<f64> {
    let pts = sweep.island_points();
    let vmax = pts.iter().map(|p| p.volume).fold(f64::MIN, f64::max);
    let decade: Vec<(f64, f64)> = pts
        .iter()
        .filter(|p| p.volume >= vmax / 10.0 - 1e-12)
        .map(|p| (p.volume.ln(), p.result.breakdown.total.ln()))
        .collect();
    fit_slope(&decade)
}

/// Log-log slope of max h against V over the converged island points.
pub fn maxheight_law(sweep: &SweepResult) -> Option<f64> {
    let pts: Vec<(f64, f64)> = sweep
        .island_points()
        .iter()
        .map(|p| (p.volume.ln(), p.result.profile.sup_norm().ln()))
        .collect();
    fit_slope(&pts)
}

pub fn fit_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let det = n * sxx - sx * sx;
    if det.abs() < 1e-300 {
        return None;
    }
    Some((n * sxy - sx * sy) / det)
}

/// Maximal relative violation of concavity of F̂ along the sweep, measured
/// against the chord through the neighbors (correct for non-uniform volume
/// spacing): positive values mean the point dips below the chord.
pub fn concavity_gap(sweep: &SweepResult) -> Option<f64> {
    let pts: Vec<(f64, f64)> = sweep
        .points
        .iter()
        .filter(|p| p.result.converged)
        .map(|p| (p.volume, p.result.breakdown.total))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let mut worst: f64 = f64::MIN;
    for w in pts.windows(3) {
        let (v0, f0) = w[0];
        let (v1, f1) = w[1];
        let (v2, f2) = w[2];
        let chord = f0 + (f2 - f0) * (v1 - v0) / (v2 - v0);
        worst = worst.max((chord - f1) / f1);
    }
    Some(worst)
}

/// Largest relative increase of β along consecutive converged points
/// (β must be non-increasing up to mesh slack).
pub fn max_beta_increase(sweep: &SweepResult) -> f64 {
    let betas: Vec<f64> = sweep
        .points
        .iter()
        .filter(|p| p.result.converged)
        .map(|p| p.result.breakdown.beta)
        .collect();
    betas
        .windows(2)
        .map(|w| w[1] / w[0] - 1.0)
        .fold(0.0, f64::max)
}

fn wetting_bracket(sweep: &SweepResult) -> Option<WettingBracket> {
    let mut last_wetting = None;
    let mut first_island = None;
    for p in &sweep.points {
        if p.result.breakdown.beta >= 1.0 - WETTING_MARGIN {
            if first_island.is_none() {
                last_wetting = Some(p.volume);
            }
        } else if first_island.is_none() {
            first_island = Some(p.volume);
        }
    }
    match (last_wetting, first_island) {
        (Some(lw), Some(fi)) => Some(WettingBracket { last_wetting: lw, first_island: fi }),
        _ => None,
    }
}

/// Closed-form 3D constructions of the scaling-law upper bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Construction3DKind {
    /// Thin square layer of thickness ε.
    ThinLayer { eps: f64 },
    /// Pyramid with base half-side L = V^{2/7} and height H = (3/4)V^{3/7}.
    Pyramid,
    /// Large-slope box with square base of side V^{1/4}.
    BoxLargeSlope,
}

#[derive(Debug, Clone, Serialize)]
pub struct Construction3D {
    pub kind: Construction3DKind,
    pub volume: f64,
    /// Base half-side (Pyramid), layer half-side (ThinLayer) or base side
    /// (BoxLargeSlope).
    pub length: f64,
    pub height: f64,
    pub elastic: f64,
    pub surface: f64,
    pub total: f64,
}

/// Closed-form energies of the 3D upper-bound constructions.
pub fn construct_3d(kind: Construction3DKind, v: f64) -> Result<Construction3D> {
    if !(v > 0.0) {
        return Err(Error::InvalidParameter(format!("volume must be positive, got {v}")));
    }
    match kind {
        Construction3DKind::ThinLayer { eps } => {
            if !(eps > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "layer thickness must be positive, got {eps}"
                )));
            }
            // volume identity 4L²ε + 4Lε² + (4/3)ε³ = V
            let disc = (16.0 * eps * eps * eps * eps
                - 16.0 * eps * (4.0 / 3.0 * eps * eps * eps - v))
                .max(0.0);
            let l = (-4.0 * eps * eps + disc.sqrt()) / (8.0 * eps);
            let elastic = 2.0 * v;
            let surface = 4.0 * ((v * eps).sqrt() + eps * eps);
            Ok(Construction3D {
                kind,
                volume: v,
                length: l,
                height: eps,
                elastic,
                surface,
                total: elastic + surface,
            })
        }
        Construction3DKind::Pyramid => {
            let l = v.powf(2.0 / 7.0);
            let h = 0.75 * v.powf(3.0 / 7.0);
            let elastic = 8.0 * l * l * l;
            let surface = 4.0 * h * h;
            Ok(Construction3D {
                kind,
                volume: v,
                length: l,
                height: h,
                elastic,
                surface,
                total: elastic + surface,
            })
        }
        Construction3DKind::BoxLargeSlope => {
            let a = v.powf(0.25);
            let h = v / (a * a);
            // elastic bounded by base³ (coefficient one), surface is the
            // exact lateral area 4·a·h = 4V^{3/4}
            let elastic = a * a * a;
            let surface = 4.0 * a * h;
            Ok(Construction3D {
                kind,
                volume: v,
                length: a,
                height: h,
                elastic,
                surface,
                total: elastic + surface,
            })
        }
    }
}

/// Wetting floor used in sweep diagnostics.
pub fn sweep_floor(v: f64) -> f64 {
    height_floor(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_rejects_bad_volume_lists() {
        let cfg = FlowConfig::new(SurfaceEnergyKind::SmallSlope);
        assert!(sweep(SurfaceEnergyKind::SmallSlope, &[], &cfg).is_err());
        assert!(sweep(SurfaceEnergyKind::SmallSlope, &[2.0, 1.0], &cfg).is_err());
        assert!(sweep(SurfaceEnergyKind::SmallSlope, &[0.0, 1.0], &cfg).is_err());
    }

    #[test]
    fn pyramid_total_matches_closed_form() {
        let c = construct_3d(Construction3DKind::Pyramid, 1.0).unwrap();
        assert!((c.total - 10.25).abs() < 1e-12);
        assert!((c.elastic + c.surface - c.total).abs() < 1e-12);
        // volume identity of the pyramid: (4/3)HL² = V
        assert!((4.0 / 3.0 * c.height * c.length * c.length - 1.0).abs() < 1e-12);
        // homogeneity: total(λ⁷V) = λ⁶ total(V)
        let big = construct_3d(Construction3DKind::Pyramid, 128.0).unwrap();
        assert!((big.total - 10.25 * 128.0_f64.powf(6.0 / 7.0)).abs() < 1e-9 * big.total);
    }

    #[test]
    fn thin_layer_tends_to_twice_volume() {
        let mut last = f64::MAX;
        for eps in [0.1, 0.01, 0.001] {
            let c = construct_3d(Construction3DKind::ThinLayer { eps }, 1.0).unwrap();
            // volume identity
            let vol = 4.0 * c.length * c.length * eps + 4.0 * c.length * eps * eps
                + 4.0 / 3.0 * eps * eps * eps;
            assert!((vol - 1.0).abs() < 1e-10);
            assert!(c.total < last);
            last = c.total;
        }
        assert!((last - 2.0).abs() < 0.13, "total {last}");
        assert!(construct_3d(Construction3DKind::ThinLayer { eps: 0.0 }, 1.0).is_err());
        assert!(construct_3d(Construction3DKind::Pyramid, -1.0).is_err());
    }

    #[test]
    fn box_large_slope_scales_three_quarters() {
        let c1 = construct_3d(Construction3DKind::BoxLargeSlope, 1.0).unwrap();
        let c2 = construct_3d(Construction3DKind::BoxLargeSlope, 16.0).unwrap();
        assert!((c2.total / c1.total - 16.0_f64.powf(0.75)).abs() < 1e-12);
    }

    #[test]
    fn fit_slope_recovers_power_law() {
        let pts: Vec<(f64, f64)> = (1..=10)
            .map(|k| {
                let v = 10.0_f64.powf(k as f64 * 0.25);
                (v.ln(), (3.0 * v.powf(0.8)).ln())
            })
            .collect();
        let s = fit_slope(&pts).unwrap();
        assert!((s - 0.8).abs() < 1e-12);
    }

    #[test]
    fn concavity_detector_flags_convex_data() {
        // synthetic convex totals on a log grid must yield a positive gap
        let cfg = FlowConfig::new(SurfaceEnergyKind::SmallSlope);
        let _ = cfg;
        let mk = |v: f64, t: f64| SweepPoint {
            volume: v,
            result: MinimizeResult {
                profile: crate::profile::Profile::zero(Grid1D::symmetric(1.0, 4).unwrap()),
                breakdown: crate::optimizer::EnergyBreakdown {
                    elastic: t,
                    surface: 0.0,
                    total: t,
                    volume: v,
                    beta: t / v,
                },
                lambda: 0.5,
                el_residual: 0.0,
                contact_slope: 0.0,
                support_length: 1.0,
                iterations: 1,
                converged: true,
                seed: 0,
            },
        };
        let concave = SweepResult {
            kind: SurfaceEnergyKind::SmallSlope,
            points: vec![mk(10.0, 10.0_f64.powf(0.8)), mk(100.0, 100.0_f64.powf(0.8)), mk(1000.0, 1000.0_f64.powf(0.8))],
            fitted_exponent: None,
            vbar_estimate: None,
        };
        assert!(concavity_gap(&concave).unwrap() <= 1e-12);
        let convex = SweepResult {
            kind: SurfaceEnergyKind::SmallSlope,
            points: vec![mk(10.0, 10.0), mk(100.0, 300.0), mk(1000.0, 10000.0)],
            fitted_exponent: None,
            vbar_estimate: None,
        };
        assert!(concavity_gap(&convex).unwrap() > 0.0);
    }
}
