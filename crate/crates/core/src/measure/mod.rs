//! Grid measures, test functions, the truncated vague metric and enumerations.

mod discrete;
mod enumeration;
mod grid;
mod metric;
mod test_family;

pub(crate) use discrete::dot;
pub use discrete::{integrate, DiscreteMeasure, GridFunction, MASS_TOL};
pub use enumeration::Enumeration;
pub use grid::GridSpec;
pub use metric::{dv_distance, dv_from_moments, DvDistance};
pub use test_family::{bump_profile, TestFunction, TestFunctionFamily};
