//! Orchestration behind the `lfun` command: run configurations, cached
//! pipelines, output files and run manifests.

pub mod config;
pub mod run;

pub use config::{GenericConfig, GenericSource, Manifest, ZerosConfig};
pub use run::{
    run_classgroup, run_coeffs, run_ensemble, run_generic, run_replay, run_stats, run_zeros, ClassGroupReport,
    CoeffsReport, GenericReport, StatsReport, ZerosReport,
};
