//! Newmark stepping of the semi-discrete system with memory.
//!
//! The memory force acts at the half step, `F^{n+1/2} = sum_j G_j
//! u^{n+1-j}`, and enters the acceleration form through a level load
//! `f^n` with `(f^n + f^{n+1}) / 2 = F^{n+1/2}`. With `beta = 1/4`,
//! `varsigma = 1/2` the averaged equation `M abar + C v^{n+1/2} + K
//! u^{n+1/2} + F^{n+1/2} = 0` holds exactly and the discrete energy obeys
//! an exact decrement identity.

use std::ops::ControlFlow;

use crate::banded::{smallest_generalized_eigenvalue, BandCholesky, SymBand};
use crate::energy::{energy, EnergyBreakdown, EnergyOptions};
use crate::error::{Error, Result};
use crate::history::{init_history, memory_forcing, HistoryBuffer, HistoryFn};
use crate::kernels::KernelWeights;
use crate::spatial::{Mesh, SpatialOperators};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub beta: f64,
    pub varsigma: f64,
    pub steps: usize,
}

impl IntegratorConfig {
    pub fn new(dt: f64, steps: usize) -> Self {
        IntegratorConfig {
            dt,
            beta: 0.25,
            varsigma: 0.5,
            steps,
        }
    }

    /// Whether the energy identity is claimed (`varsigma = 1/2`,
    /// `beta = varsigma / 2`).
    pub fn preserves_energy_identity(&self) -> bool {
        self.varsigma == 0.5 && self.beta == 0.5 * self.varsigma
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::Config(format!("time step must be > 0, got {}", self.dt)));
        }
        if !self.beta.is_finite() || !self.varsigma.is_finite() {
            return Err(Error::Config("Newmark parameters must be finite".into()));
        }
        Ok(())
    }
}

/// Sampled kernels of the two memories on a common time step.
#[derive(Debug, Clone, PartialEq)]
pub struct MemoryWeights {
    pub phi: KernelWeights,
    pub psi: KernelWeights,
}

impl MemoryWeights {
    pub fn new(phi: KernelWeights, psi: KernelWeights) -> Result<Self> {
        if phi.dt != psi.dt {
            return Err(Error::Config(format!(
                "kernel weights sampled on different steps ({} vs {})",
                phi.dt, psi.dt
            )));
        }
        Ok(MemoryWeights { phi, psi })
    }

    /// History depth: the longer of the two truncations.
    pub fn depth(&self) -> usize {
        self.phi.depth.max(self.psi.depth)
    }

    pub fn dt(&self) -> f64 {
        self.phi.dt
    }
}

/// Nodal initial data at `x_0..=x_{J+1}`: `(phi, phi_t, u, u_t, v, v_t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialData {
    pub phi0: Vec<f64>,
    pub phi1: Vec<f64>,
    pub u0: Vec<f64>,
    pub u1: Vec<f64>,
    pub v0: Vec<f64>,
    pub v1: Vec<f64>,
}

impl InitialData {
    pub fn zeros(mesh: &Mesh) -> Self {
        let z = vec![0.0; mesh.interior + 2];
        InitialData {
            phi0: z.clone(),
            phi1: z.clone(),
            u0: z.clone(),
            u1: z.clone(),
            v0: z.clone(),
            v1: z,
        }
    }

    /// Samples `f(x) = [phi, phi_t, u, u_t, v, v_t]` at the nodes.
    pub fn from_fn(mesh: &Mesh, f: impl Fn(f64) -> [f64; 6]) -> Self {
        let mut d = InitialData::zeros(mesh);
        for (j, x) in mesh.nodes().into_iter().enumerate() {
            let [a, b, c, e, g, k] = f(x);
            d.phi0[j] = a;
            d.phi1[j] = b;
            d.u0[j] = c;
            d.u1[j] = e;
            d.v0[j] = g;
            d.v1[j] = k;
        }
        d
    }

    /// Lengths, finiteness and the clamped end values.
    pub fn check(&self, mesh: &Mesh) -> Result<()> {
        let n = mesh.interior + 2;
        for (name, f) in [
            ("phi0", &self.phi0),
            ("phi1", &self.phi1),
            ("u0", &self.u0),
            ("u1", &self.u1),
            ("v0", &self.v0),
            ("v1", &self.v1),
        ] {
            if f.len() != n {
                return Err(Error::Config(format!(
                    "initial {name} has {} node values, mesh needs {n}",
                    f.len()
                )));
            }
            if let Some(x) = f.iter().find(|x| !x.is_finite()) {
                return Err(Error::Config(format!("initial {name} has non-finite value {x}")));
            }
        }
        let tol = 1e-12;
        let last = n - 1;
        for (name, val) in [
            ("phi0(0)", self.phi0[0]),
            ("phi0(L)", self.phi0[last]),
            ("phi1(0)", self.phi1[0]),
            ("phi1(L)", self.phi1[last]),
            ("u0(0)", self.u0[0]),
            ("u1(0)", self.u1[0]),
            ("v0(0)", self.v0[0]),
            ("v1(0)", self.v1[0]),
        ] {
            if val.abs() > tol {
                return Err(Error::Config(format!(
                    "initial data violates the boundary condition: {name} = {val}"
                )));
            }
        }
        Ok(())
    }

    /// Displacement and velocity state vectors `(phi, v - u, v)`.
    pub fn to_state_vectors(&self, mesh: &Mesh) -> (Vec<f64>, Vec<f64>) {
        let l = mesh.layout();
        let mut disp = vec![0.0; l.dim()];
        let mut vel = vec![0.0; l.dim()];
        for i in 1..=l.n_phi() {
            disp[l.phi_at(i)] = self.phi0[i];
            vel[l.phi_at(i)] = self.phi1[i];
        }
        for i in 1..=l.n_psi() {
            disp[l.psi_at(i)] = self.v0[i] - self.u0[i];
            vel[l.psi_at(i)] = self.v1[i] - self.u1[i];
            disp[l.v_at(i)] = self.v0[i];
            vel[l.v_at(i)] = self.v1[i];
        }
        (disp, vel)
    }
}

/// State at step `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub disp: Vec<f64>,
    pub vel: Vec<f64>,
    pub acc: Vec<f64>,
    /// Level memory load `f^n`.
    pub load: Vec<f64>,
    pub step: usize,
    pub history: HistoryBuffer,
}

impl SimState {
    pub fn max_norm(&self) -> f64 {
        self.disp
            .iter()
            .chain(&self.vel)
            .chain(&self.acc)
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Builds the state at `t = 0` with a consistent acceleration.
pub fn init_state(
    ops: &SpatialOperators,
    memory: &MemoryWeights,
    initial: &InitialData,
    past: Option<HistoryFn<'_>>,
) -> Result<SimState> {
    initial.check(&ops.mesh)?;
    let (disp, vel) = initial.to_state_vectors(&ops.mesh);
    let history = init_history(&ops.mesh, memory.depth(), memory.dt(), &disp, past);
    let n = ops.dim();
    let load = initial_load(ops, memory, &history);
    let mut ku = vec![0.0; n];
    ops.apply_stiffness(&disp, &mut ku);
    let acc = (0..n)
        .map(|i| -(ops.damping[i] * vel[i] + ku[i] + load[i]) / ops.mass[i])
        .collect();
    Ok(SimState {
        disp,
        vel,
        acc,
        load,
        step: 0,
        history,
    })
}

/// `f^0 = sum_j G_j (u^{1-j} + u^{-j}) / 2`.
fn initial_load(ops: &SpatialOperators, memory: &MemoryWeights, history: &HistoryBuffer) -> Vec<f64> {
    let width = history.width();
    let n_phi = history.n_phi();
    let mut acc = vec![0.0; width];
    for j in (1..=history.depth()).rev() {
        let (a, b) = (memory.phi.omega(j), memory.psi.omega(j));
        let (s0, s1) = (history.slot(j - 1), history.slot(j));
        for i in 0..width {
            let w = if i < n_phi { a } else { b };
            acc[i] += w * 0.5 * (s0[i] + s1[i]);
        }
    }
    let mut out = vec![0.0; ops.dim()];
    crate::history::apply_memory_forms(ops, &acc, &mut out);
    out
}

/// `M + varsigma dt C + beta dt^2 K` in band storage.
pub fn effective_band(ops: &SpatialOperators, cfg: &IntegratorConfig) -> SymBand {
    let dt = cfg.dt;
    let l = ops.layout;
    let mut a = SymBand::zeros(ops.dim(), ops.stiffness.bandwidth()).axpy(cfg.beta * dt * dt, &ops.stiffness);
    let mut diag = vec![0.0; ops.dim()];
    for i in 0..ops.dim() {
        diag[l.band_index(i)] = ops.mass[i] + cfg.varsigma * dt * ops.damping[i];
    }
    a.add_diagonal(&diag);
    a
}

/// Factorizes the effective matrix once.
pub fn effective_matrix(ops: &SpatialOperators, cfg: &IntegratorConfig) -> Result<BandCholesky> {
    cfg.validate()?;
    let a = effective_band(ops, cfg);
    BandCholesky::factor(&a).map_err(|_| {
        let mut id = SymBand::zeros(a.dim(), 0);
        id.add_diagonal(&vec![1.0; a.dim()]);
        let min_eigenvalue = smallest_generalized_eigenvalue(&a, &id, 1e-10).unwrap_or(f64::NAN);
        Error::Stability { min_eigenvalue }
    })
}

/// Observer callback: `(step, time, state, energy)`.
pub trait Observer {
    fn observe(
        &mut self,
        step: usize,
        time: f64,
        state: &SimState,
        energy: &EnergyBreakdown,
    ) -> ControlFlow<()>;
}

impl<F> Observer for F
where
    F: FnMut(usize, f64, &SimState, &EnergyBreakdown) -> ControlFlow<()>,
{
    fn observe(
        &mut self,
        step: usize,
        time: f64,
        state: &SimState,
        energy: &EnergyBreakdown,
    ) -> ControlFlow<()> {
        self(step, time, state, energy)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub step: usize,
    pub time: f64,
    pub energy: EnergyBreakdown,
}

/// Observations of a run; `error` is set when the run aborted.
#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub observations: Vec<Observation>,
    pub error: Option<Error>,
    pub stopped: bool,
}

/// Energy growth factor treated as divergence.
pub const DIVERGENCE_GROWTH: f64 = 10.0;

pub struct Integrator<'a> {
    ops: &'a SpatialOperators,
    memory: &'a MemoryWeights,
    cfg: IntegratorConfig,
    factor: BandCholesky,
    pub energy_options: EnergyOptions,
    force: Vec<f64>,
    pred_u: Vec<f64>,
    pred_v: Vec<f64>,
    rhs: Vec<f64>,
    band: Vec<f64>,
}

impl<'a> Integrator<'a> {
    pub fn new(ops: &'a SpatialOperators, memory: &'a MemoryWeights, cfg: IntegratorConfig) -> Result<Self> {
        if (memory.dt() - cfg.dt).abs() > 1e-15 * cfg.dt {
            return Err(Error::Config(format!(
                "kernel weights sampled at dt = {}, integrator uses dt = {}",
                memory.dt(),
                cfg.dt
            )));
        }
        let factor = effective_matrix(ops, &cfg)?;
        let n = ops.dim();
        Ok(Integrator {
            ops,
            memory,
            cfg,
            factor,
            energy_options: EnergyOptions::default(),
            force: vec![0.0; n],
            pred_u: vec![0.0; n],
            pred_v: vec![0.0; n],
            rhs: vec![0.0; n],
            band: vec![0.0; n],
        })
    }

    pub fn config(&self) -> &IntegratorConfig {
        &self.cfg
    }

    pub fn ops(&self) -> &SpatialOperators {
        self.ops
    }

    pub fn memory(&self) -> &MemoryWeights {
        self.memory
    }

    /// Half-step memory force `sum_j G_j u^{n+1-j}` of the current history.
    pub fn memory_force(&self, state: &SimState, out: &mut [f64]) {
        memory_forcing(&state.history, self.ops, &self.memory.phi, &self.memory.psi, out);
    }

    /// Advances `state` by one step.
    pub fn step(&mut self, state: &mut SimState) -> Result<()> {
        let ops = self.ops;
        let l = ops.layout;
        let n = ops.dim();
        let dt = self.cfg.dt;
        let (beta, vs) = (self.cfg.beta, self.cfg.varsigma);
        memory_forcing(
            &state.history,
            ops,
            &self.memory.phi,
            &self.memory.psi,
            &mut self.force,
        );
        for i in 0..n {
            // f^{n+1} = 2 F^{n+1/2} - f^n
            state.load[i] = 2.0 * self.force[i] - state.load[i];
            self.pred_u[i] = state.disp[i] + dt * state.vel[i] + (0.5 - beta) * dt * dt * state.acc[i];
            self.pred_v[i] = state.vel[i] + (1.0 - vs) * dt * state.acc[i];
        }
        ops.apply_stiffness(&self.pred_u, &mut self.rhs);
        for i in 0..n {
            let r = -(ops.damping[i] * self.pred_v[i] + self.rhs[i] + state.load[i]);
            self.band[l.band_index(i)] = r;
        }
        self.factor.solve_in_place(&mut self.band);
        let mut finite = true;
        for i in 0..n {
            let a = self.band[l.band_index(i)];
            state.acc[i] = a;
            state.vel[i] = self.pred_v[i] + vs * dt * a;
            state.disp[i] = self.pred_u[i] + beta * dt * dt * a;
            finite &= state.disp[i].is_finite() && state.vel[i].is_finite() && a.is_finite();
        }
        state.step += 1;
        if !finite {
            return Err(Error::Divergence {
                step: state.step,
                max_norm: state.max_norm(),
                reason: "non-finite state".into(),
            });
        }
        state.history.push(&state.disp);
        Ok(())
    }

    pub fn energy(&self, state: &SimState) -> EnergyBreakdown {
        energy(state, self.ops, self.memory, &self.energy_options)
    }

    /// Steps `steps` times, observing every `stride` steps (and at the
    /// start and end).
    pub fn run(
        &mut self,
        state: &mut SimState,
        steps: usize,
        stride: usize,
        observers: &mut [&mut dyn Observer],
    ) -> RunTrace {
        let stride = stride.max(1);
        let dt = self.cfg.dt;
        let mut trace = RunTrace {
            observations: Vec::with_capacity(steps / stride + 2),
            error: None,
            stopped: false,
        };
        let e0 = self.energy(state);
        let ceiling = DIVERGENCE_GROWTH * e0.total;
        let mut record = |state: &SimState, e: EnergyBreakdown, trace: &mut RunTrace| -> bool {
            let time = state.step as f64 * dt;
            let mut go = true;
            for obs in observers.iter_mut() {
                if obs.observe(state.step, time, state, &e).is_break() {
                    go = false;
                }
            }
            trace.observations.push(Observation {
                step: state.step,
                time,
                energy: e,
            });
            go
        };
        if !record(state, e0, &mut trace) {
            trace.stopped = true;
            return trace;
        }
        let start = state.step;
        for k in 1..=steps {
            if let Err(e) = self.step(state) {
                trace.error = Some(e);
                return trace;
            }
            if k % stride == 0 || k == steps {
                let e = self.energy(state);
                let grown = ceiling > 0.0 && e.total > ceiling;
                if !e.total.is_finite() || grown {
                    trace.error = Some(Error::Divergence {
                        step: state.step,
                        max_norm: state.max_norm(),
                        reason: format!("energy {:.6e} exceeds {DIVERGENCE_GROWTH} x initial", e.total),
                    });
                    record(state, e, &mut trace);
                    return trace;
                }
                if !record(state, e, &mut trace) {
                    trace.stopped = true;
                    return trace;
                }
            }
        }
        debug_assert_eq!(state.step, start + steps);
        trace
    }
}
