//! Topology optimization for steady-state heat conduction on structured grids.
//!
//! The crate minimizes thermal compliance under a volume constraint with the
//! SIMP material interpolation. Two interchangeable linear-solve paths are
//! provided for the state equation:
//!
//! * `mgcg` — conjugate gradients preconditioned by one geometric-multigrid
//!   V-cycle per iteration, rebuilt at the current densities every design
//!   cycle;
//! * `mgar` — a reduced-order reanalysis path that keeps the multigrid
//!   hierarchy of a reference design, builds a small basis by multigrid
//!   passes against the conductivity change, and solves an m-by-m projected
//!   system instead, falling back to `mgcg` whenever the reconstruction
//!   residual exceeds its threshold.
//!
//! A cone-weighted density filter with a geometrically decaying radius
//! schedule regularizes the design, and a one-shot projection-based
//! boundary-smoothing pass can be applied after the loop.
//!
//! All numeric kernels are generic over the scalar type (`f32` or `f64`)
//! through the [`scalar::Real`] trait; concrete `f64` aliases live at the
//! crate root.

pub mod config;
pub mod driver;
pub mod error;
pub mod fem;
pub mod filter;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod mgcg;
pub mod model;
pub mod multigrid;
pub mod optimizer;
pub mod postprocess;
pub mod reanalysis;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Real;

/// Default-precision aliases for the main domain types.
pub type Model = model::ThermalModel<f64>;
pub type Mesh = model::StructuredMesh;
pub type Hierarchy = multigrid::MgHierarchy<f64>;
pub type RunResult = optimizer::OptResult<f64>;
pub type Record = metrics::IterationRecord;
pub type Summary = metrics::RunSummary;
