//! File formats, configuration, BIC rank selection and the command runner
//! behind the `sstpca` binary.

pub mod bic;
pub mod config;
pub mod io;
pub mod run;

pub use bic::{rank_select_bic, BicSelection};
pub use config::{Command, Preset, RunConfig, Suite};
pub use io::{load_tensor, InputFormat, SCHEMA_VERSION};
pub use run::{run, RunOutcome};
