//! Identification of dynamical-system models from time-series data by
//! regression: dynamic mode decomposition (DMD/DMDc) for linear models and
//! sparse nonlinear identification (SINDY/SINDYc) for nonlinear models with
//! external inputs and feedback control.
//!
//! The crate is organized around a small pipeline:
//!
//! 1. [`timeseries`] — load, validate, and save uniformly sampled
//!    trajectories; form snapshot pairs.
//! 2. [`diff`] — estimate time derivatives (central differences or a
//!    noise-robust total-variation estimator).
//! 3. [`library`] — build and evaluate candidate-function libraries over
//!    states and inputs, including cross terms.
//! 4. [`regression`] — least squares, LASSO, sequential thresholded least
//!    squares, and the sparsity sweep for model selection.
//! 5. [`mod@dmd`] / [`sindy`] — the identification front ends, plus model
//!    simulation, pretty-printing, and persistence.
//! 6. [`systems`] — benchmark systems (predator-prey, Lorenz), forcing
//!    signals, and a fixed-step RK4 integrator for generating data.
//!
//! The `examples/` directory walks through each capability end to end; the
//! `sindyc` binary wraps the same pipeline in config-driven subcommands.

pub mod diff;
pub mod dmd;
pub mod error;
pub mod experiment;
pub mod library;
pub mod regression;
pub mod sindy;
pub mod systems;
pub mod timeseries;

mod linalg;

pub use diff::{central_difference, differentiate, tv_derivative, DerivativeEstimate, DiffMethod};
pub use dmd::{dmd, dmd_predict, dmdc, DmdResult, DmdcResult};
pub use error::{Error, Result};
pub use library::{term_name, LibraryMatrix, LibrarySpec, Term, TrigKind};
pub use regression::{
    lasso, least_squares, log_spaced, pareto_sweep, stlsq, CoefficientMatrix, ParetoCurve,
    ParetoPoint, SweepSolver,
};
pub use sindy::{
    identify, identify_feedback, identify_with_derivatives, load_model, model_rhs,
    model_to_equations, save_model, simulate, FeedbackLaw, ModelMetadata, SparseModel,
    SparseSolver,
};
pub use systems::{
    lorenz_rhs, lotka_volterra_first_integral, lotka_volterra_rhs, make_signal, rk4_integrate,
    InputMap, LorenzParams, LotkaVolterraParams, Signal,
};
pub use timeseries::{
    load_timeseries, load_timeseries_auto, save_timeseries, to_snapshot_pair, CsvSchema,
    SnapshotPair, TimeSeries,
};
