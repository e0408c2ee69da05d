//! Iterative maximising selection over candidate families, flow-property
//! verification by regeneration at restart times, and the enumeration
//! uniqueness probe.

mod engine;
mod flow;
mod probe;

pub use engine::{select, Selection, SelectionConfig, SelectionTrace, TraceRecord};
pub use flow::{select_flow, verify_flow_property, FlowCheck, FlowPropertyReport, SelectedEntry, SelectedFlow};
pub use probe::{uniqueness_probe, ProbeVerdict, UniquenessReport};
