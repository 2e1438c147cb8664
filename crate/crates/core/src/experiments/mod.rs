//! Problem generators, sweeps, slope fits, configuration and self-checks.

pub mod config;
pub mod fit;
pub mod problems;
pub mod sweep;
pub mod verify;

pub use config::{Epsilons, NoiseKind, NoiseSpec, Placement, SurjectivityConfig, SweepConfig, TrainConfig};
pub use fit::{fit_loglog_points, fit_loglog_slope, SlopeFit};
pub use problems::{make_closed_form, make_qaoa_maxcut, make_random_vqe, ProblemSpec};
pub use sweep::{run_sweep, write_csv, RowFlag, SweepRecord, CSV_HEADER};
pub use verify::{verify_all, VerifyOptions, VerifyReport};
