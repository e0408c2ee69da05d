//! Declarative TOML scenarios and the solve / select / verify pipeline.

mod run;
mod spec;

pub use run::{run_scenario, run_scenario_file, RunOptions, RunReport, Verification};
pub use spec::{
    AssumptionCheck, CkCheckSpec, CoefficientSection, ConvexExtensionCheckSpec, DisintegrationCheck, EquicontinuityCheck, FamilySpec,
    FlowCheckSpec, GridSection, InitialSpec, LyapunovCheck, MassCheck, MixtureComponent, PicardCheck, ProbeCheck, ResidualCheck, Scenario,
    SelectionSection, SolverSection, TightnessCheck, TimeSection, VerifySection,
};

use crate::error::{Error, Result};

/// Scenario files shipped with the library, by name.
pub const BUNDLED: &[(&str, &str)] = &[
    ("heat", include_str!("../../scenarios/heat.toml")),
    ("heat-2d", include_str!("../../scenarios/heat-2d.toml")),
    ("ornstein-uhlenbeck", include_str!("../../scenarios/ornstein-uhlenbeck.toml")),
    ("time-dependent-ou", include_str!("../../scenarios/time-dependent-ou.toml")),
    ("outward-drift", include_str!("../../scenarios/outward-drift.toml")),
    ("branching-transport", include_str!("../../scenarios/branching-transport.toml")),
    ("burgers-nemytskii", include_str!("../../scenarios/burgers-nemytskii.toml")),
    ("porous-style-nemytskii", include_str!("../../scenarios/porous-style-nemytskii.toml")),
    ("mean-field", include_str!("../../scenarios/mean-field.toml")),
];

pub fn bundled_names() -> Vec<&'static str> {
    BUNDLED.iter().map(|(n, _)| *n).collect()
}

pub fn bundled(name: &str) -> Result<Scenario> {
    let (_, text) =
        BUNDLED.iter().find(|(n, _)| *n == name).ok_or_else(|| Error::Scenario(format!("no bundled scenario named `{name}`")))?;
    Scenario::from_toml(text)
}
