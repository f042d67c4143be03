//! Command-line front end for the mediator models: TOML scenario configs,
//! seeded deterministic runs, one-parameter sweeps and the acceptance suite.
//!
//! Exit codes of the `mediator` binary: 0 when every check passes, 1 when a
//! check fails, 2 for configuration errors, 3 for capacity and guard errors,
//! 4 for other runtime errors.

pub mod acceptance;
pub mod config;
mod error;
pub mod output;
pub mod presets;
pub mod report;
pub mod scenarios;
pub mod sweep;

pub use config::{Format, RunConfig, Scenario};
pub use error::{CliError, CliResult};
pub use report::{Check, Relation, RunReport};
pub use scenarios::{execute, Outcome};
