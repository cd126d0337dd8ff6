//! Experiment harness: data loading, ground truth, experiment specs and the
//! runner behind the `mrpt-bench` binary.

pub mod error;
pub mod io;
pub mod run;
pub mod spec;
pub mod synth;
pub mod truth;

pub use error::{BenchError, BenchResult};
pub use io::{load_csv, load_fvecs, parse_csv, parse_fvecs, read_fvecs, write_fvecs};
pub use run::{execute, prepare, run, write_outputs, Outcome, QueryOutput, RunRow, RunSummary, StrategySummary, TruthRow};
pub use spec::{ExperimentSpec, Overrides, StragglerChoice, DEFAULT_CONFIG};
pub use synth::{gen_synthetic, Generator, SyntheticKind};
pub use truth::ground_truth;
