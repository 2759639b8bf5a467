//! Segregated ring-of-bumps solutions of the two-species cubic Schrödinger
//! system `−ΔU + λU = α0U³ + βUV²`, `−ΔV + μ(|y|)V = α1V³ + βU²V`, built by
//! placing `k` copies of the second ground state on a circle of radius `R`,
//! correcting them by a fixed point in the symmetric space, and maximizing
//! the reduced energy in `R`.

pub mod corrector;
pub mod energy;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod krylov;
pub mod model;
pub mod radial;
pub mod reduction;

mod dst;
mod par;

pub use corrector::{Ansatz, Background, CorrectorResult, DivergenceReport, SolverSettings};
pub use energy::{BoundReport, EnergyBreakdown, ExpansionReport};
pub use error::{Error, Result};
pub use geometry::{BumpConfiguration, BumpFields, Symmetry};
pub use grid::{Field, Grid};
pub use model::{CouplingBound, Exponents, ModelParams, Potential, RadiusInterval, ValidationReport};
pub use radial::RadialProfile;
pub use reduction::{Maximum, ReducedEnergySample, Reduction, Solution};
