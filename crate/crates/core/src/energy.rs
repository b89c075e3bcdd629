//! Discrete energy, its term-by-term breakdown and the per-step decrement
//! ledger.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::integrator::{MemoryWeights, SimState};
use crate::kernels::KernelWeights;
use crate::spatial::{phi_gradient_sq, psi_gradient_sq, DifferenceOps, SpatialOperators};

/// How the clamped-end contribution of the `phi` memory norm is scaled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExponentConvention {
    /// `|D+ x|^2 + x_1^2 / h^2`, the full gradient norm.
    #[default]
    Dimensional,
    /// `|D+ x|^2 + (x_1 / h^2)^2`.
    AsPrinted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EnergyOptions {
    pub convention: ExponentConvention,
}

/// Memory norm of a `phi` vector under the given convention.
pub fn phi_memory_norm(x: &[f64], h: f64, convention: ExponentConvention) -> f64 {
    let full = phi_gradient_sq(x, h);
    match convention {
        ExponentConvention::Dimensional => full,
        ExponentConvention::AsPrinted => {
            let e = x[0] * x[0];
            full - e / (h * h) + e / (h * h * h * h)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyBreakdown {
    pub kinetic_phi: f64,
    pub kinetic_psi: f64,
    pub kinetic_v: f64,
    pub shear: f64,
    pub flexural_psi: f64,
    pub flexural_v: f64,
    pub adhesive: f64,
    /// `(3/2) b |D- phi|^2`, zero unless enabled.
    pub flexural_phi: f64,
    pub memory_phi_static: f64,
    pub memory_phi_history: f64,
    pub memory_psi_static: f64,
    pub memory_psi_history: f64,
    pub total: f64,
}

impl EnergyBreakdown {
    pub const COLUMNS: [&'static str; 13] = [
        "total",
        "kinetic_phi",
        "kinetic_psi",
        "kinetic_v",
        "shear",
        "flexural_psi",
        "flexural_v",
        "adhesive",
        "flexural_phi",
        "memory_phi_static",
        "memory_phi_history",
        "memory_psi_static",
        "memory_psi_history",
    ];

    pub fn values(&self) -> [f64; 13] {
        [
            self.total,
            self.kinetic_phi,
            self.kinetic_psi,
            self.kinetic_v,
            self.shear,
            self.flexural_psi,
            self.flexural_v,
            self.adhesive,
            self.flexural_phi,
            self.memory_phi_static,
            self.memory_phi_history,
            self.memory_psi_static,
            self.memory_psi_history,
        ]
    }

    fn with_total(mut self) -> Self {
        self.total = self.kinetic_phi
            + self.kinetic_psi
            + self.kinetic_v
            + self.shear
            + self.flexural_psi
            + self.flexural_v
            + self.adhesive
            + self.flexural_phi
            + self.memory_phi_static
            + self.memory_phi_history
            + self.memory_psi_static
            + self.memory_psi_history;
        self
    }
}

fn weighted_sq(w: &[f64], x: &[f64]) -> f64 {
    w.iter().zip(x).map(|(a, b)| a * b * b).sum()
}

/// `(static, history)` memory terms of one field.
fn memory_terms(
    buf: &crate::history::HistoryBuffer,
    range: std::ops::Range<usize>,
    weights: &KernelWeights,
    norm: &dyn Fn(&[f64]) -> f64,
) -> (f64, f64) {
    if weights.is_zero() {
        return (0.0, 0.0);
    }
    let current = &buf.slot(0)[range.clone()];
    let stat = -0.5 * weights.omega_sum() * norm(current);
    let mut eta = vec![0.0; range.len()];
    let mut hist = 0.0;
    for j in 1..=weights.depth {
        let w = weights.omega(j);
        if w == 0.0 {
            continue;
        }
        let past = &buf.slot(j)[range.clone()];
        for ((e, a), b) in eta.iter_mut().zip(current).zip(past) {
            *e = a - b;
        }
        hist += w * norm(&eta);
    }
    (stat, 0.5 * hist)
}

/// Discrete energy of `state`.
pub fn energy(
    state: &SimState,
    ops: &SpatialOperators,
    memory: &MemoryWeights,
    opts: &EnergyOptions,
) -> EnergyBreakdown {
    let l = ops.layout;
    let h = ops.mesh.h;
    let [shear, flexural_psi, flexural_v, adhesive, flexural_phi] = ops.elastic_terms(&state.disp);
    let n_phi = l.n_phi();
    let phi_norm = |x: &[f64]| phi_memory_norm(x, h, opts.convention);
    let psi_norm = |x: &[f64]| psi_gradient_sq(x, h);
    let (memory_phi_static, memory_phi_history) =
        memory_terms(&state.history, 0..n_phi, &memory.phi, &phi_norm);
    let (memory_psi_static, memory_psi_history) =
        memory_terms(&state.history, n_phi..l.n_memory(), &memory.psi, &psi_norm);
    EnergyBreakdown {
        kinetic_phi: 0.5 * weighted_sq(&ops.mass[l.phi()], &state.vel[l.phi()]),
        kinetic_psi: 0.5 * weighted_sq(&ops.mass[l.psi()], &state.vel[l.psi()]),
        kinetic_v: 0.5 * weighted_sq(&ops.mass[l.v()], &state.vel[l.v()]),
        shear,
        flexural_psi,
        flexural_v,
        adhesive,
        flexural_phi,
        memory_phi_static,
        memory_phi_history,
        memory_psi_static,
        memory_psi_history,
        total: 0.0,
    }
    .with_total()
}

/// Predicted and observed energy change over one step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DecrementLedger {
    /// `-dt (v^{n+1/2})^T C v^{n+1/2}`
    pub damping_loss: f64,
    /// `(1/2) sum_{j<N} (w_{j+1} - w_j) |eta^{n,j}|^2`
    pub kernel_smoothing_phi: f64,
    pub kernel_smoothing_psi: f64,
    /// `-(1/2) w_N |eta^{n,N}|^2`
    pub tail_drop_phi: f64,
    pub tail_drop_psi: f64,
    pub predicted: f64,
    pub observed: f64,
}

impl DecrementLedger {
    pub const COLUMNS: [&'static str; 7] = [
        "damping_loss",
        "kernel_smoothing_phi",
        "kernel_smoothing_psi",
        "tail_drop_phi",
        "tail_drop_psi",
        "predicted",
        "observed",
    ];

    pub fn values(&self) -> [f64; 7] {
        [
            self.damping_loss,
            self.kernel_smoothing_phi,
            self.kernel_smoothing_psi,
            self.tail_drop_phi,
            self.tail_drop_psi,
            self.predicted,
            self.observed,
        ]
    }

    /// The individual right-hand terms.
    pub fn entries(&self) -> [f64; 5] {
        [
            self.damping_loss,
            self.kernel_smoothing_phi,
            self.kernel_smoothing_psi,
            self.tail_drop_phi,
            self.tail_drop_psi,
        ]
    }

    pub fn mismatch(&self) -> f64 {
        (self.observed - self.predicted).abs()
    }
}

fn smoothing_and_tail(
    buf: &crate::history::HistoryBuffer,
    range: std::ops::Range<usize>,
    weights: &KernelWeights,
    norm: &dyn Fn(&[f64]) -> f64,
) -> (f64, f64) {
    if weights.is_zero() {
        return (0.0, 0.0);
    }
    let n = weights.depth;
    let current = &buf.slot(0)[range.clone()];
    let mut eta = vec![0.0; range.len()];
    let mut eta_norm = |j: usize| {
        let past = &buf.slot(j)[range.clone()];
        for ((e, a), b) in eta.iter_mut().zip(current).zip(past) {
            *e = a - b;
        }
        norm(&eta)
    };
    let mut smoothing = 0.0;
    for j in 1..n {
        let dw = weights.omega(j + 1) - weights.omega(j);
        if dw != 0.0 {
            smoothing += dw * eta_norm(j);
        }
    }
    let tail = -weights.omega(n) * eta_norm(n);
    (0.5 * smoothing, 0.5 * tail)
}

/// Ledger for the step `before -> after` (`after` one step later).
pub fn decrement(
    before: &SimState,
    after: &SimState,
    ops: &SpatialOperators,
    memory: &MemoryWeights,
    opts: &EnergyOptions,
    energy_before: f64,
    energy_after: f64,
) -> DecrementLedger {
    let l = ops.layout;
    let h = ops.mesh.h;
    let dt = memory.dt();
    let mut damping = 0.0;
    for i in l.v() {
        let vh = 0.5 * (before.vel[i] + after.vel[i]);
        damping += ops.damping[i] * vh * vh;
    }
    let n_phi = l.n_phi();
    let phi_norm = |x: &[f64]| phi_memory_norm(x, h, opts.convention);
    let psi_norm = |x: &[f64]| psi_gradient_sq(x, h);
    let (kernel_smoothing_phi, tail_drop_phi) =
        smoothing_and_tail(&before.history, 0..n_phi, &memory.phi, &phi_norm);
    let (kernel_smoothing_psi, tail_drop_psi) =
        smoothing_and_tail(&before.history, n_phi..l.n_memory(), &memory.psi, &psi_norm);
    let damping_loss = -dt * damping;
    DecrementLedger {
        damping_loss,
        kernel_smoothing_phi,
        kernel_smoothing_psi,
        tail_drop_phi,
        tail_drop_psi,
        predicted: damping_loss + kernel_smoothing_phi + kernel_smoothing_psi + tail_drop_phi + tail_drop_psi,
        observed: energy_after - energy_before,
    }
}

/// Default absolute tolerance `1e-9 max(1, E0)`.
pub fn default_identity_tol(e0: f64) -> f64 {
    1e-9 * e0.max(1.0)
}

/// As [`decrement`], failing when predicted and observed differ by more
/// than `tol`.
#[allow(clippy::too_many_arguments)]
pub fn decrement_check(
    before: &SimState,
    after: &SimState,
    ops: &SpatialOperators,
    memory: &MemoryWeights,
    opts: &EnergyOptions,
    energy_before: f64,
    energy_after: f64,
    tol: f64,
) -> Result<DecrementLedger> {
    let ledger = decrement(before, after, ops, memory, opts, energy_before, energy_after);
    if !(ledger.mismatch() <= tol) {
        return Err(Error::IdentityViolation {
            step: after.step,
            predicted: ledger.predicted,
            observed: ledger.observed,
            tol,
        });
    }
    Ok(ledger)
}

/// Left and right sides of a summation-by-parts identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentitySides {
    pub lhs: f64,
    pub rhs: f64,
}

impl IdentitySides {
    pub fn relative_gap(&self) -> f64 {
        (self.lhs - self.rhs).abs() / self.lhs.abs().max(self.rhs.abs()).max(f64::MIN_POSITIVE)
    }
}

/// Shared evaluation of the convolution identity. `seq[k]` is `x^{n+1-k}`
/// for `k = 0..=N+1`; `chi[j-1]` is `chi^j` for `j = 1..=N+1`; `apply`
/// is the second-difference operator and `norm` the matching energy norm.
fn convolution_identity(
    seq: &[DVector<f64>],
    chi: &[f64],
    dt: f64,
    apply: &dyn Fn(&DVector<f64>) -> DVector<f64>,
    norm: &dyn Fn(&DVector<f64>) -> f64,
) -> IdentitySides {
    let n = chi.len() - 1;
    assert_eq!(seq.len(), n + 2, "need x^{{n+1}} .. x^{{n-N}}");
    let vel = (&seq[0] - &seq[1]) / dt;
    let lhs: f64 = (1..=n).map(|j| chi[j - 1] * apply(&seq[j]).dot(&vel)).sum();
    let chi_sum: f64 = chi[..n].iter().sum();
    let bracket = |base: usize| {
        let mut s = -chi_sum * norm(&seq[base]);
        for j in 1..=n {
            s += chi[j - 1] * norm(&(&seq[base] - &seq[base + j]));
        }
        s
    };
    let mut rhs = (bracket(0) - bracket(1)) / (2.0 * dt);
    for j in 1..=n {
        rhs -= (chi[j] - chi[j - 1]) * norm(&(&seq[1] - &seq[1 + j])) / (2.0 * dt);
    }
    rhs += chi[n] * norm(&(&seq[1] - &seq[1 + n])) / (2.0 * dt);
    IdentitySides { lhs, rhs }
}

/// The `phi` identity: `sum_j chi^j D0^2 x^{n+1-j} . xdot^{n+1/2}` against
/// its bracket, smoothing and tail terms.
pub fn phi_convolution_identity(
    ops: &DifferenceOps,
    seq: &[DVector<f64>],
    chi: &[f64],
    dt: f64,
    convention: ExponentConvention,
) -> IdentitySides {
    let h = ops.h;
    let p = match convention {
        ExponentConvention::Dimensional => 1,
        ExponentConvention::AsPrinted => 2,
    };
    let norm = |x: &DVector<f64>| {
        let e = x[0] / h.powi(p);
        (&ops.dplus * x).norm_squared() + e * e
    };
    convolution_identity(seq, chi, dt, &|x| &ops.d0sq * x, &norm)
}

/// The `psi` identity with `D+ D-` and `|D- z|^2`.
pub fn psi_convolution_identity(
    ops: &DifferenceOps,
    seq: &[DVector<f64>],
    chi: &[f64],
    dt: f64,
) -> IdentitySides {
    let dd = &ops.dplus * &ops.dminus;
    let norm = |x: &DVector<f64>| (&ops.dminus * x).norm_squared();
    convolution_identity(seq, chi, dt, &|x| &dd * x, &norm)
}
