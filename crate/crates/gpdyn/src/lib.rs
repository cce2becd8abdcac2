//! Gaussian-process dynamical models with finite-memory Markovian
//! approximations.
//!
//! A GP over transitions, conditioned on training data and on every sampled
//! transition so far, gives the exact (non-Markovian) multi-step prediction;
//! capping the record of past transitions yields a Markov chain of finite
//! order whose prediction cost stays constant over time. This crate builds
//! both samplers, the error measures between them (KL divergence, mean
//! square prediction error, variance ordering), a moment-boundedness
//! certificate for bounded kernels, and the two reference systems used by
//! the benchmark harness.

pub mod analysis;
pub mod dynamics;
pub mod error;
pub mod gp;
pub mod kernels;
pub mod numerics;
mod optimize;
pub mod systems;

pub use crate::analysis::{
    boundedness_bound, compare_memories, empirical_moment, kl_step, mspe_step,
    unbounded_probability, BoundednessBound, ErrorReport, ErrorRow,
};
pub use crate::dynamics::{
    build_regressor, ConstantInput, Feedback, GpdmModel, InputPolicy, MemoryBuffer, MemoryLength,
    OpenLoop, OutputMap, RegressorLayout, SimInit, SimMode, StepDistribution, StepRecord,
    Trajectory,
};
pub use crate::error::{Error, Result};
pub use crate::gp::{
    fit_hyperparameters, log_marginal_likelihood, posterior, FitOptions, FitResult, GpPosterior,
    TrainingSet,
};
pub use crate::kernels::{HyperParams, KernelFamily, KernelSpec, MeanSpec};
pub use crate::numerics::{
    abs_moment_quadrature, chol_solve_pd, mvn_sample, pseudo_inverse_solve, seed_stream,
    trajectory_stream, DiagGaussian, RngStream, SymMatrix,
};
pub use crate::systems::{
    generate_pp_training, generate_thomas_training, pp_input, pp_input_sequence, pp_step,
    rk4_step, thomas_control, thomas_rhs, timing_harness, PpTrainingOptions, PredPreyState,
    ThomasState, TimingRow, TimingTable, THOMAS_B, THOMAS_DT, THOMAS_NOISE_STD,
};
