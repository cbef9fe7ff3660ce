//! Host-side companion of `skece-core`: CSV trace files, scenario presets,
//! the randomness test battery, transcript export and the experiment runner
//! behind the `skece` command.

pub mod cli;
pub mod experiments;
pub mod output;
pub mod presets;
pub mod randomness;
pub mod trace_io;
pub mod transcript;
