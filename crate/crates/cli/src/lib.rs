//! Scenario runner for the geomlab comparison-geometry engines: configs,
//! deterministic reports and their JSON, CSV and SVG renderings.

pub mod config;
pub mod report;
pub mod scenarios;
pub mod svg;

pub use config::{FixtureRef, Scenario, ScenarioConfig};
pub use report::{emit_report, parse_formats, Check, Format, Relation, RunReport, Series};
pub use scenarios::run_scenario;
