//! Finite-difference / Newmark simulation of a laminated Timoshenko beam
//! with interfacial slip, slip damping and two infinite memories.
//!
//! The pieces, bottom up:
//!
//! * [`kernels`]: relaxation functions, admissibility, sampled weights.
//! * [`spatial`]: mesh, difference operators, `M`, `C`, `K`, memory forms
//!   and the coercivity check.
//! * [`history`]: the ring buffer of past displacements and the discrete
//!   convolution.
//! * [`integrator`]: Newmark stepping with a once-factorized band matrix.
//! * [`energy`]: the discrete energy and its exact per-step decrement.
//! * [`decay`]: exponential and algebraic fits of energy traces.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod banded;
pub mod decay;
pub mod energy;
pub mod error;
pub mod history;
pub mod integrator;
pub mod kernels;
pub mod spatial;

pub use decay::{
    compare_models, fit_algebraic, fit_exponential, predicted_envelope, DecayFit, DecayModel, Envelope,
    FitOptions, ModelComparison,
};
pub use energy::{
    decrement, decrement_check, energy, DecrementLedger, EnergyBreakdown, EnergyOptions, ExponentConvention,
};
pub use error::{Error, Result};
pub use history::{eta_z_views, init_history, memory_forcing, HistoryBuffer};
pub use integrator::{
    effective_matrix, init_state, InitialData, Integrator, IntegratorConfig, MemoryWeights, Observation,
    Observer, RunTrace, SimState,
};
pub use kernels::{
    check_h1_h2, eval_kernel, sample_weights, sample_weights_with_depth, total_mass, AdmissibilityReport,
    KernelSpec, KernelWeights,
};
pub use spatial::{
    assemble_blocks, assemble_difference_ops, build_mesh, check_coercivity, Coercivity, DifferenceOps,
    MaterialParams, Mesh, SpatialOperators,
};
