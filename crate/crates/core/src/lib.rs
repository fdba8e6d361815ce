//! Simulation and safe auto-tuning of three-phase inverter current
//! controllers.
//!
//! The crate models an inverter feeding an RL load or an LC-filtered load in
//! state space, discretizes it exactly (zero-order hold via the matrix
//! exponential) or approximately (RK4), wraps it in a gym-style episodic
//! environment with a tracking/barrier reward, and tunes the dq-frame PI
//! current controller's gains with SafeOpt-style safe Bayesian optimization
//! on a Gaussian-process surrogate — episodes never intentionally leave the
//! region the surrogate certifies as safe.
//!
//! Module map:
//! - [`frames`]: three-phase/dq0 types and the amplitude-invariant Park
//!   transform pair.
//! - [`expm`]: Padé-13 scaling-and-squaring matrix exponential.
//! - [`plant`]: continuous state-space models and the ZOH/RK4 backends.
//! - [`control`]: the saturated dq-frame PI current controller.
//! - [`env`]: episodic environment, reward, abort rule, performance J.
//! - [`gp`]: exact Matérn-3/2 Gaussian-process regression.
//! - [`safeopt`]: safe set / expanders / maximizers over a gain grid.
//! - [`runner`]: episode and tuning-loop orchestration, landscape sweeps,
//!   CSV telemetry.

// `!(x > 0.0)` rejects NaN where `x <= 0.0` would admit it; the index loops
// in the numeric kernels mirror their triangular/offset access patterns.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod control;
pub mod env;
pub mod expm;
pub mod frames;
pub mod gp;
pub mod plant;
pub mod runner;
pub mod safeopt;

pub use control::{pi_reset, pi_step, ControlOutput, PiGains, PiState};
pub use env::{
    episode_performance, reward, Backend, Env, EnvConfig, EnvError, EpisodeRecord,
    ModulationMapping, Observation, StepResult, TraceStep,
};
pub use frames::{grid_angle, inverse_park, park, Angle, Dq0Frame, ThreePhase};
pub use gp::{confidence_bounds, kernel_eval, GpError, GpModel, KernelParams, Posterior};
pub use plant::{
    build_lc_plant, build_rl_plant, step_rk4, step_zoh, zoh_discretize, DiscretePlant,
    GridParams, PlantError, PlantModel, PlantState,
};
pub use runner::{
    landscape_sweep, read_history_csv, run_episode, run_tuning, snapshot_stride,
    write_history_csv, write_landscape_csv, ExperimentConfig, GpSnapshot, HistoryEntry,
    HistoryFile, HistoryRow, KernelConfig, LandscapePoint, RunnerError, TuningHistory,
};
pub use safeopt::{
    write_posterior_csv, AxisBounds, Grid, ObservationRecord, ParamBounds, Proposal,
    SafeOptError, SafeOptState, SetTag,
};
