//! File formats, reports and the parallel study driver behind the `bellfit`
//! command-line tool.
//!
//! Count tables are CSV (`x,y,a,b,count`), every other artifact is JSON, and
//! each command leaves a [`RunManifest`] next to its outputs.

pub mod commands;
pub mod error;
pub mod report;
pub mod study;
pub mod svg;
pub mod table;

pub use error::{CliError, CliResult};
pub use report::RunManifest;
pub use study::{parse_seeds, run_study};
pub use table::{read_table, table_to_string, write_table};
