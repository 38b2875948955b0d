//! Experiment drivers shared by the command line: configuration, result
//! records, sweeps over the reference tables and CSV output.

mod config;
mod csv;
mod record;
mod run;
mod tables;

pub use config::{parse_patch, AutoKeyword, ConfigPatch, Count, ExperimentConfig, FullKeyword, Restart, Switch};
pub use csv::{format_number, Cell, CsvTable};
pub use record::{CommandKind, ResultRecord};
pub use run::{
    build_preconditioner, build_problem, build_system, run_bound, run_solve, run_spectrum, solve_interface,
    trajectory_csv, SolveOutcome, BOUND_HEADER, BOUND_SWEEP,
};
pub use tables::{
    run_table, DiffLine, SpectrumRoute, StepReading, TableId, TableOptions, TableOutcome, Tolerance,
};
