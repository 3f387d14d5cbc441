//! Height profiles on a computational window.
//!
//! A film profile is a nonnegative piecewise-linear function h on a uniform
//! 1D grid, vanishing at both window ends. Volume is the exact trapezoid
//! integral of the interpolant, and every surface energy below is the exact
//! integral of the corresponding density over the interpolant:
//!
//! - small slope:  ∫ h'²
//! - large slope:  ∫ |h'|          (discrete total variation)
//! - exact:        ∫ √(1+h'²) − 1
//!
//! Because all quantities are exact functionals of the interpolant, the
//! rescaling identities below hold to rounding error rather than to a
//! discretization tolerance.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};

/// Uniform 1D grid over the computational window `[x_min, x_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    pub x_min: f64,
    pub x_max: f64,
    pub n_cells: usize,
}

impl Grid1D {
    pub fn new(x_min: f64, x_max: f64, n_cells: usize) -> Result<Self> {
        if !(x_min < x_max) || !x_min.is_finite() || !x_max.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "grid window [{x_min}, {x_max}] is not a proper interval"
            )));
        }
        if n_cells < 2 {
            return Err(Error::InvalidParameter(format!(
                "grid needs at least 2 cells, got {n_cells}"
            )));
        }
        Ok(Self { x_min, x_max, n_cells })
    }

    /// Symmetric window `[-half_width, half_width]`.
    pub fn symmetric(half_width: f64, n_cells: usize) -> Result<Self> {
        Self::new(-half_width, half_width, n_cells)
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.n_cells as f64
    }

    pub fn n_nodes(&self) -> usize {
        self.n_cells + 1
    }

    pub fn node_x(&self, i: usize) -> f64 {
        // Affine form keeps the last node exactly at x_max.
        let t = i as f64 / self.n_cells as f64;
        self.x_min * (1.0 - t) + self.x_max * t
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }
}

/// Which surface energy density to evaluate.
///
/// `LargeSlope` carries an optional smoothing parameter: the energy density
/// becomes √(h'² + ε²) − ε, which the optimizer uses for differentiability.
/// Reported energies always use ε = 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SurfaceEnergyKind {
    SmallSlope,
    LargeSlope { eps_tv: f64 },
    Exact,
}

impl SurfaceEnergyKind {
    pub fn large_slope() -> Self {
        SurfaceEnergyKind::LargeSlope { eps_tv: 0.0 }
    }

    /// Same kind with any smoothing stripped (for energy reporting).
    pub fn reporting(self) -> Self {
        match self {
            SurfaceEnergyKind::LargeSlope { .. } => SurfaceEnergyKind::LargeSlope { eps_tv: 0.0 },
            k => k,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let SurfaceEnergyKind::LargeSlope { eps_tv } = self {
            if !(*eps_tv >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "TV smoothing must be nonnegative, got {eps_tv}"
                )));
            }
        }
        Ok(())
    }
}

/// Nonnegative piecewise-linear height profile, compactly supported in its
/// window (both end nodes are zero).
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    grid: Grid1D,
    heights: Vec<f64>,
}

impl Profile {
    pub fn new(grid: Grid1D, heights: Vec<f64>) -> Result<Self> {
        if heights.len() != grid.n_nodes() {
            return Err(Error::InvalidInput(format!(
                "expected {} nodal heights, got {}",
                grid.n_nodes(),
                heights.len()
            )));
        }
        if heights.iter().any(|h| !h.is_finite() || *h < 0.0) {
            return Err(Error::InvalidInput("heights must be finite and nonnegative".into()));
        }
        if heights[0] != 0.0 || heights[heights.len() - 1] != 0.0 {
            return Err(Error::InvalidInput(
                "profile must vanish at both window ends".into(),
            ));
        }
        Ok(Self { grid, heights })
    }

    pub fn zero(grid: Grid1D) -> Self {
        Self { grid, heights: vec![0.0; grid.n_nodes()] }
    }

    /// Sample `f` at the grid nodes, clipping negatives to zero and pinning
    /// the window ends.
    pub fn from_fn(grid: Grid1D, f: impl Fn(f64) -> f64) -> Self {
        let n = grid.n_nodes();
        let mut heights = vec![0.0; n];
        for (i, h) in heights.iter_mut().enumerate().take(n - 1).skip(1) {
            *h = f(grid.node_x(i)).max(0.0);
        }
        Self { grid, heights }
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn heights(&self) -> &[f64] {
        &self.heights
    }

    /// Mutable nodal access for optimizers. The caller must restore the
    /// invariants (nonnegativity, zero ends) before handing the profile on;
    /// `restore_feasibility` below does that.
    pub(crate) fn heights_mut(&mut self) -> &mut Vec<f64> {
        &mut self.heights
    }

    pub(crate) fn restore_feasibility(&mut self) {
        for h in self.heights.iter_mut() {
            if !(*h >= 0.0) {
                *h = 0.0;
            }
        }
        self.heights[0] = 0.0;
        let n = self.heights.len();
        self.heights[n - 1] = 0.0;
    }

    /// Exact trapezoid volume of the interpolant.
    pub fn volume(&self) -> f64 {
        let dx = self.grid.dx();
        let mut acc = 0.0;
        for w in self.heights.windows(2) {
            acc += 0.5 * (w[0] + w[1]);
        }
        acc * dx
    }

    pub fn sup_norm(&self) -> f64 {
        self.heights.iter().cloned().fold(0.0, f64::max)
    }

    /// Exact surface energy of the interpolant for the requested density.
    pub fn surface_energy(&self, kind: SurfaceEnergyKind) -> f64 {
        let dx = self.grid.dx();
        match kind {
            SurfaceEnergyKind::SmallSlope => {
                let mut acc = 0.0;
                for w in self.heights.windows(2) {
                    let dh = w[1] - w[0];
                    acc += dh * dh;
                }
                acc / dx
            }
            SurfaceEnergyKind::LargeSlope { eps_tv } => {
                if eps_tv == 0.0 {
                    self.heights.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
                } else {
                    let mut acc = 0.0;
                    for w in self.heights.windows(2) {
                        let dh = w[1] - w[0];
                        acc += (dh * dh + eps_tv * eps_tv * dx * dx).sqrt();
                    }
                    (acc - eps_tv * self.grid.width()).max(0.0)
                }
            }
            SurfaceEnergyKind::Exact => {
                let mut acc = 0.0;
                for w in self.heights.windows(2) {
                    let dh = w[1] - w[0];
                    // sqrt(dx²+dh²) − dx, written to avoid cancellation for
                    // shallow cells.
                    acc += dh * dh / ((dx * dx + dh * dh).sqrt() + dx);
                }
                acc
            }
        }
    }

    /// Isotropic rescaling h_λ(x) = h(λx)/λ on the correspondingly rescaled
    /// grid. Volume divides by λ², small-slope energy and total variation
    /// both divide by λ, exactly.
    pub fn rescale_isotropic(&self, lambda: f64) -> Result<Profile> {
        check_positive(lambda, "isotropic rescaling factor")?;
        Ok(self.scaled(1.0 / lambda, 1.0 / lambda))
    }

    /// Anisotropic, volume-preserving rescaling h_λ(x) = λ·h(λx). The
    /// small-slope energy multiplies by λ³ and the total variation by λ,
    /// exactly.
    pub fn rescale_anisotropic(&self, lambda: f64) -> Result<Profile> {
        check_positive(lambda, "anisotropic rescaling factor")?;
        Ok(self.scaled(1.0 / lambda, lambda))
    }

    /// x ↦ vert · h(x / horiz): stretches the window by `horiz` and the
    /// heights by `vert`, node for node. The interpolant transforms exactly,
    /// so volume multiplies by horiz·vert, ∫h'² by vert²/horiz and TV by
    /// vert.
    pub(crate) fn scaled(&self, horiz: f64, vert: f64) -> Profile {
        let grid = Grid1D {
            x_min: self.grid.x_min * horiz,
            x_max: self.grid.x_max * horiz,
            n_cells: self.grid.n_cells,
        };
        let heights = self.heights.iter().map(|h| h * vert).collect();
        Profile { grid, heights }
    }

    /// Slack in the interpolation inequality
    /// sup h ≤ (9/16)^{1/3} (∫h)^{1/3} (∫h'²)^{1/3}; nonnegative for every
    /// H¹ profile, and the discrete quantities are exact for the
    /// interpolant, so it is nonnegative here up to rounding.
    pub fn interpolation_gap(&self) -> Result<f64> {
        let v = self.volume();
        let s = self.surface_energy(SurfaceEnergyKind::SmallSlope);
        if v <= 0.0 || s <= 0.0 {
            return Err(Error::DegenerateProfile(
                "interpolation gap needs positive volume and surface energy".into(),
            ));
        }
        Ok((9.0 / 16.0 * v * s).cbrt() - self.sup_norm())
    }

    /// Connected components of `{h > floor}` as node index ranges
    /// (inclusive start, inclusive end).
    pub fn components(&self, floor: f64) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        let mut start = None;
        for (i, &h) in self.heights.iter().enumerate() {
            if h > floor {
                if start.is_none() {
                    start = Some(i);
                }
            } else if let Some(s) = start.take() {
                out.push((s, i - 1));
            }
        }
        if let Some(s) = start {
            out.push((s, self.heights.len() - 1));
        }
        out
    }

    /// Length of a component's support, extended to the interpolant's
    /// crossings of `floor` in the flanking cells.
    pub fn component_extent(&self, comp: (usize, usize), floor: f64) -> f64 {
        let dx = self.grid.dx();
        let (s, e) = comp;
        let mut len = (e - s) as f64 * dx;
        if s > 0 {
            let hi = self.heights[s];
            let lo = self.heights[s - 1];
            if hi > floor {
                len += dx * ((hi - floor) / (hi - lo).max(f64::MIN_POSITIVE)).clamp(0.0, 1.0);
            }
        }
        if e + 1 < self.heights.len() {
            let hi = self.heights[e];
            let lo = self.heights[e + 1];
            if hi > floor {
                len += dx * ((hi - floor) / (hi - lo).max(f64::MIN_POSITIVE)).clamp(0.0, 1.0);
            }
        }
        len
    }

    /// Extent of the whole support `{h > floor}` (first to last crossing),
    /// zero for an empty film.
    pub fn support_length(&self, floor: f64) -> f64 {
        let comps = self.components(floor);
        if comps.is_empty() {
            return 0.0;
        }
        let dx = self.grid.dx();
        let first = comps.first().unwrap();
        let last = comps.last().unwrap();
        let mut len = (last.1 - first.0) as f64 * dx;
        len += self.component_extent(*first, floor) - (first.1 - first.0) as f64 * dx
            - self.component_extent_right_only(*first, floor);
        len += self.component_extent_right_only(*last, floor);
        len.min(self.grid.width())
    }

    fn component_extent_right_only(&self, comp: (usize, usize), floor: f64) -> f64 {
        let dx = self.grid.dx();
        let e = comp.1;
        if e + 1 < self.heights.len() {
            let hi = self.heights[e];
            let lo = self.heights[e + 1];
            if hi > floor {
                return dx * ((hi - floor) / (hi - lo).max(f64::MIN_POSITIVE)).clamp(0.0, 1.0);
            }
        }
        0.0
    }

    /// Resample onto another grid by evaluating the interpolant; values
    /// outside this profile's window are zero.
    pub fn resample(&self, grid: Grid1D) -> Profile {
        let mut p = Profile::zero(grid);
        for i in 1..grid.n_nodes() - 1 {
            p.heights[i] = self.eval(grid.node_x(i)).max(0.0);
        }
        p
    }

    /// Evaluate the piecewise-linear interpolant (zero outside the window).
    pub fn eval(&self, x: f64) -> f64 {
        if x <= self.grid.x_min || x >= self.grid.x_max {
            return 0.0;
        }
        let t = (x - self.grid.x_min) / self.grid.dx();
        let i = (t.floor() as usize).min(self.grid.n_cells - 1);
        let frac = t - i as f64;
        self.heights[i] * (1.0 - frac) + self.heights[i + 1] * frac
    }

    /// Center of mass of the interpolant (for translation alignment).
    pub fn center_of_mass(&self) -> f64 {
        let dx = self.grid.dx();
        let mut m0 = 0.0;
        let mut m1 = 0.0;
        for (i, w) in self.heights.windows(2).enumerate() {
            let xm = self.grid.node_x(i) + 0.5 * dx;
            let cell = 0.5 * (w[0] + w[1]) * dx;
            m0 += cell;
            // exact first moment of the linear cell
            let slope_corr = (w[1] - w[0]) * dx * dx / 12.0;
            m1 += cell * xm + slope_corr;
        }
        if m0 > 0.0 {
            m1 / m0
        } else {
            0.5 * (self.grid.x_min + self.grid.x_max)
        }
    }

    /// Write the profile as CSV (`x,h`, one node per row, full precision).
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "x,h")?;
        for (i, h) in self.heights.iter().enumerate() {
            writeln!(w, "{:?},{:?}", self.grid.node_x(i), h)?;
        }
        Ok(())
    }

    /// Read a profile written by `write_csv`. The grid is reconstructed from
    /// the node coordinates, which must be uniformly spaced.
    pub fn read_csv(r: impl BufRead) -> Result<Profile> {
        let mut xs = Vec::new();
        let mut hs = Vec::new();
        for (ln, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || (ln == 0 && line.starts_with('x')) {
                continue;
            }
            let mut parts = line.split(',');
            let x: f64 = parse_field(parts.next(), ln)?;
            let h: f64 = parse_field(parts.next(), ln)?;
            xs.push(x);
            hs.push(h);
        }
        if xs.len() < 3 {
            return Err(Error::InvalidInput("profile CSV needs at least 3 nodes".into()));
        }
        let n_cells = xs.len() - 1;
        let grid = Grid1D::new(xs[0], xs[n_cells], n_cells)?;
        let dx = grid.dx();
        for (i, &x) in xs.iter().enumerate() {
            if (x - grid.node_x(i)).abs() > 1e-9 * dx.max(1.0) {
                return Err(Error::InvalidInput(format!(
                    "node {i} at x={x} is not on a uniform grid"
                )));
            }
        }
        Profile::new(grid, hs)
    }
}

fn parse_field(field: Option<&str>, line: usize) -> Result<f64> {
    field
        .ok_or_else(|| Error::InvalidInput(format!("short CSV row at line {line}")))?
        .trim()
        .parse()
        .map_err(|e| Error::InvalidInput(format!("bad number at line {line}: {e}")))
}

fn check_positive(v: f64, what: &str) -> Result<()> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::InvalidParameter(format!("{what} must be positive, got {v}")));
    }
    Ok(())
}

/// Physical-parameter reduction: a film of volume `d` with misfit amplitude
/// `e0` maps to the normalized problem at V = e0⁴·d, with the energy scaled
/// by 1/e0².
pub fn rescale_physical(e0: f64, d: f64) -> Result<(f64, f64)> {
    check_positive(e0, "misfit amplitude")?;
    check_positive(d, "film volume")?;
    Ok((e0.powi(4) * d, 1.0 / (e0 * e0)))
}

/// Canonical test profiles used by the optimizer's restart set and in tests.
pub mod shapes {
    use super::{Grid1D, Profile};

    /// Symmetric tent of half-width `half` and peak `peak`, centered at 0.
    pub fn tent(grid: Grid1D, half: f64, peak: f64) -> Profile {
        Profile::from_fn(grid, |x| peak * (1.0 - x.abs() / half))
    }

    /// Parabolic cap (3V/(4ℓ³))·(ℓ²−x²)₊ of half-width `ell` and volume `v`.
    pub fn parabola(grid: Grid1D, ell: f64, v: f64) -> Profile {
        let a = 3.0 * v / (4.0 * ell.powi(3));
        Profile::from_fn(grid, |x| a * (ell * ell - x * x))
    }

    /// Rectangle of half-width `half` and height `height` (one-cell ramps).
    pub fn rectangle(grid: Grid1D, half: f64, height: f64) -> Profile {
        Profile::from_fn(grid, |x| if x.abs() <= half { height } else { 0.0 })
    }

    /// Flat layer filling the window at constant height (one-cell end ramps).
    pub fn flat(grid: Grid1D, height: f64) -> Profile {
        Profile::from_fn(grid, |_| height)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> Grid1D {
        Grid1D::symmetric(2.0, n).unwrap()
    }

    #[test]
    fn grid_rejects_bad_windows() {
        assert!(Grid1D::new(1.0, 1.0, 8).is_err());
        assert!(Grid1D::new(0.0, 1.0, 1).is_err());
        assert!(Grid1D::new(f64::NAN, 1.0, 8).is_err());
    }

    #[test]
    fn profile_invariants_enforced() {
        let g = grid(8);
        assert!(Profile::new(g, vec![0.0; 3]).is_err());
        let mut h = vec![0.0; 9];
        h[0] = 1.0;
        assert!(Profile::new(g, h).is_err());
        let mut h = vec![0.0; 9];
        h[4] = -0.5;
        assert!(Profile::new(g, h).is_err());
    }

    #[test]
    fn zero_profile_has_zero_volume_and_energy() {
        let p = Profile::zero(grid(16));
        assert_eq!(p.volume(), 0.0);
        assert_eq!(p.surface_energy(SurfaceEnergyKind::SmallSlope), 0.0);
        assert_eq!(p.surface_energy(SurfaceEnergyKind::large_slope()), 0.0);
        assert_eq!(p.surface_energy(SurfaceEnergyKind::Exact), 0.0);
        assert!(p.interpolation_gap().is_err());
    }

    #[test]
    fn tent_volume_is_exact() {
        // Tent of half-width N and peak V/N carries volume V exactly.
        let v = 7.5;
        let n = 1.5;
        let g = Grid1D::symmetric(n, 300).unwrap();
        let p = shapes::tent(g, n, v / n);
        assert!((p.volume() - v).abs() < 1e-12 * v);
    }

    #[test]
    fn parabola_volume_within_quadrature_tolerance() {
        // Half-width ℓ sampled at Δx = ℓ/512; trapezoid error is O(Δx²).
        let ell = 1.25_f64;
        let g = Grid1D::symmetric(ell, 1024).unwrap();
        let p = shapes::parabola(g, ell, 1.0);
        assert!((p.volume() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn rectangle_total_variation_is_twice_height() {
        let g = grid(64);
        let p = shapes::rectangle(g, 1.0, 3.0);
        let tv = p.surface_energy(SurfaceEnergyKind::large_slope());
        assert!((tv - 6.0).abs() < 1e-12);
    }

    #[test]
    fn extremizer_small_slope_energy_is_16_ninths() {
        // g(x) = (1−|x|/1.5)² has ∫g'² = 16/9.
        let g = Grid1D::symmetric(1.5, 4096).unwrap();
        let p = Profile::from_fn(g, |x| {
            let t = 1.0 - x.abs() / 1.5;
            t * t
        });
        let s = p.surface_energy(SurfaceEnergyKind::SmallSlope);
        assert!((s - 16.0 / 9.0).abs() < 1e-5, "S = {s}");
    }

    #[test]
    fn extremizer_interpolation_gap_is_tight() {
        // Δx = 3/4096 as in the tightness diagnostic.
        let g = Grid1D::symmetric(1.5, 4096).unwrap();
        let p = Profile::from_fn(g, |x| {
            let t = 1.0 - x.abs() / 1.5;
            t * t
        });
        let gap = p.interpolation_gap().unwrap();
        assert!(gap.abs() < 1e-4, "gap = {gap}");
        assert!(gap >= -1e-12);
    }

    #[test]
    fn steep_rectangle_gap_is_positive() {
        let g = grid(64);
        let p = shapes::rectangle(g, 2.0 * 4.0 / 8.0, 1.0);
        assert!(p.interpolation_gap().unwrap() > 0.0);
    }

    #[test]
    fn isotropic_rescale_identity() {
        let g = grid(41);
        let p = shapes::tent(g, 1.0, 2.0);
        assert_eq!(p.rescale_isotropic(1.0).unwrap(), p);
        let q = p.rescale_isotropic(2.0).unwrap();
        assert!((q.volume() - p.volume() / 4.0).abs() < 1e-14 * p.volume());
        let (s, sq) = (
            p.surface_energy(SurfaceEnergyKind::SmallSlope),
            q.surface_energy(SurfaceEnergyKind::SmallSlope),
        );
        assert!((sq * 2.0 - s).abs() < 1e-12 * s);
        assert!(p.rescale_isotropic(0.0).is_err());
        assert!(p.rescale_isotropic(-1.0).is_err());
    }

    #[test]
    fn anisotropic_rescale_identity() {
        let g = grid(37);
        let p = shapes::parabola(g, 1.5, 1.0);
        let q = p.rescale_anisotropic(0.5).unwrap();
        assert!((q.volume() - p.volume()).abs() < 1e-13);
        let ratio = q.surface_energy(SurfaceEnergyKind::SmallSlope)
            / p.surface_energy(SurfaceEnergyKind::SmallSlope);
        assert!((ratio - 0.125).abs() < 1e-12);
        let tv_ratio = q.surface_energy(SurfaceEnergyKind::large_slope())
            / p.surface_energy(SurfaceEnergyKind::large_slope());
        assert!((tv_ratio - 0.5).abs() < 1e-12);
    }

    #[test]
    fn physical_rescaling_formulas() {
        assert_eq!(rescale_physical(1.0, 5.0).unwrap(), (5.0, 1.0));
        assert_eq!(rescale_physical(2.0, 1.0).unwrap(), (16.0, 0.25));
        let (v, f) = rescale_physical(0.5, 16.0).unwrap();
        assert!((v - 1.0).abs() < 1e-15);
        assert!((f - 4.0).abs() < 1e-15);
        assert!(rescale_physical(0.0, 1.0).is_err());
        assert!(rescale_physical(1.0, -2.0).is_err());
    }

    #[test]
    fn components_and_extents() {
        let g = Grid1D::new(0.0, 8.0, 8).unwrap();
        let mut h = vec![0.0; 9];
        h[2] = 1.0;
        h[5] = 1.0;
        h[6] = 1.0;
        let p = Profile::new(g, h).unwrap();
        let comps = p.components(1e-9);
        assert_eq!(comps, vec![(2, 2), (5, 6)]);
        let p = Profile::zero(g);
        assert!(p.components(1e-9).is_empty());
        assert_eq!(p.support_length(1e-9), 0.0);
    }

    #[test]
    fn csv_round_trip() {
        let p = shapes::parabola(grid(31), 1.0, 1.0);
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let q = Profile::read_csv(&buf[..]).unwrap();
        assert_eq!(p, q);
        assert!(Profile::read_csv(&b"x,h\n0,bad\n"[..]).is_err());
    }

    #[test]
    fn energy_density_ordering_per_cell() {
        // In the steep regime |Δh| ≥ Δx the exact density is below TV which
        // is below the small-slope density; the last two swap when shallow.
        let dx = 0.1_f64;
        for &dh in &[0.05_f64, 0.1, 0.2, 1.0, 10.0] {
            let exact = (dx * dx + dh * dh).sqrt() - dx;
            let tv = dh.abs();
            let ss = dh * dh / dx;
            assert!(exact <= tv + 1e-15);
            if dh >= dx {
                assert!(tv <= ss + 1e-15);
            } else {
                assert!(ss <= tv + 1e-15);
            }
        }
    }
}
