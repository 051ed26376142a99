//! Task-mapping design space exploration for process networks on
//! heterogeneous shared-memory multiprocessors.
//!
//! A [`model::Problem`] holds one or more application graphs merged onto a
//! platform. Mappings are scored by the discrete-event [`simulator`], by the
//! static usage [`metrics`], or built directly by the [`heuristics`]. The
//! [`ga`] module searches the mapping space and [`harness`] runs seeded
//! experiments around it.

pub mod error;
pub mod ga;
pub mod harness;
pub mod heuristics;
pub mod metrics;
pub mod model;
pub mod simulator;

pub use error::{Error, Result};
