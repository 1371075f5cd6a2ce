//! Study orchestration: configs, rate fitting, plots, invariant battery.

pub mod checks;
pub mod config;
pub mod rate;
pub mod studies;
pub mod svg;

pub use checks::{run_check_ops, CheckCase, CheckReport, FaultMode};
pub use config::StudyConfig;
pub use rate::{fit_loglog, ConvergenceTable, RateFit, TableRow};
pub use studies::{
    converge_delta_products, corrector_defect_for_case, inplane_interpolator, run_cell_study,
    run_converge_delta, run_regularize_theta, run_shielding, unfolded_layer_ratio, ConvergeProducts,
    DeltaCase, StudyOutputs,
};
