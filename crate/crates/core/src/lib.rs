//! Finite-element thermal design toolkit for a hollow-chamber cross-section.
//!
//! The crate is organised bottom-up:
//!
//! * [`mesh`]: structured quadrilateral grid, region and boundary labels
//! * [`material`]: SIMP interpolation of conductivity and heat capacity
//! * [`sparse`]: CSR storage and the iterative solvers
//! * [`fem`]: steady, convective and transient heat assembly/solves
//! * [`filter`]: Helmholtz density filter and its transpose
//! * [`topopt`]: objective, adjoint sensitivities, optimality-criteria loop
//! * [`paramopt`]: fin/post layouts, fin-count sweeps, Nelder–Mead search
//! * [`teg`]: thermoelectric figure of merit and conversion efficiency

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod fem;
pub mod filter;
pub mod material;
pub mod mesh;
pub mod paramopt;
pub mod sparse;
pub mod teg;
pub mod topopt;

pub use error::{Error, Result};
pub use fem::{ScalarField, ThermalBC, VelocityField};
pub use filter::DensityField;
pub use material::MaterialPair;
pub use mesh::{EdgeCondition, Mesh, Region, RegionMap, RegionRect, Side};
