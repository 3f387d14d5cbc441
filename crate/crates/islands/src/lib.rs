//! Numerical toolkit for a two-dimensional variational model of epitaxial
//! island formation.
//!
//! The total energy of a film with height profile h and displacement u is
//! the Dirichlet energy on the subgraph domain plus a surface energy of the
//! free boundary,
//!
//! ```text
//! F(u, h) = ∫_{Ω_h} |∇u|² + S(h),   u(x,0) = x on supp h,  ∫ h = V,
//! ```
//!
//! with S either the small-slope form ∫h'² or the large-slope form ∫|h'|.
//! The crate provides the discrete profiles and energies (`profile`), a
//! finite-element solver for the elastic term (`elastic`), a projected
//! gradient flow minimizing the total at fixed volume (`optimizer`),
//! volume sweeps with scaling-law fits and wetting detection (`scaling`),
//! and the reduced large-volume limit problems (`limits`).

pub mod elastic;
pub mod optimizer;
pub mod scaling;
pub mod svg;
pub mod error;
pub mod limits;
pub mod profile;

pub use error::{Error, Result};
pub use profile::{Grid1D, Profile, SurfaceEnergyKind};
