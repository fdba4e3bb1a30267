//! Experiment harness: configuration, seed sweeps, artifact emission, and
//! standalone trajectory scoring.

mod config;
mod csvio;
mod run;

pub use config::{
    ExperimentConfig, GLOBAL_TEST_FRACTION, LOCAL_TEST_FRACTION, OUTPUT_ROOT_ENV,
};
pub use csvio::{format_float, parse_trajectory_csv, read_trajectory_csv, CsvSink, TrajectoryCsv};
pub use run::{
    build_experiment, compare, render_report_csv, render_report_text, run, run_records, score,
    AggregateSummary, ScoreOutput, SeedResult, Stat,
};
