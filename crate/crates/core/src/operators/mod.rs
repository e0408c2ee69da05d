//! Coefficient fields, the generator `L`, and assumption validators.

mod assumptions;
mod builtins;
mod coefficients;
mod generator;

pub use assumptions::{validate_assumptions, Assumption, AssumptionReport, ClauseVerdict, ProbeConfig};
pub use builtins::{builtin, tabulated, Params, BUILTIN_NAMES};
pub use coefficients::{scalar_diffusion, CoefficientField, CoefficientMeta, Dependence, FrozenCoefficients, Mat2, Mode, Vec2};
pub use generator::{apply_frozen, apply_generator};
