//! Run orchestration for the four modes and the standalone fit.

use std::ops::ControlFlow;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use timoslip::energy::default_identity_tol;
use timoslip::spatial::SpatialOperators;
use timoslip::{
    assemble_blocks, build_mesh, compare_models, decrement, init_state, predicted_envelope, DecrementLedger,
    EnergyBreakdown, EnergyOptions, Error, InitialData, Integrator, IntegratorConfig, MemoryWeights, Mesh,
    Observation, SimState,
};

use crate::config::{RunConfig, RunSpec};
use crate::output::{self, ConvergenceRow, SweepRow};
use crate::{CliError, ExitCode};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Simulate,
    Verify,
    Converge,
    Sweep,
}

/// Files written and the run's failure, if any. Artifacts are written even
/// when the run fails part way.
#[derive(Debug)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub error: Option<CliError>,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        self.error.as_ref().map_or(0, |e| e.code as i32)
    }
}

/// One trajectory and its bookkeeping.
pub struct Trajectory {
    pub ops: SpatialOperators,
    pub observations: Vec<Observation>,
    pub ledger: Vec<(usize, DecrementLedger)>,
    pub last: SimState,
    pub error: Option<Error>,
}

fn past_fn<'a>(
    initial: &'a InitialData,
    mesh: &Mesh,
    factor: impl Fn(f64) -> Option<f64> + 'a,
) -> Option<impl Fn(f64, f64) -> [f64; 3] + 'a> {
    factor(0.0)?;
    let h = mesh.h;
    let nodes = mesh.interior + 2;
    Some(move |x: f64, s: f64| {
        let i = ((x / h).round() as usize).min(nodes - 1);
        let c = factor(s).unwrap_or(1.0);
        [c * initial.phi0[i], c * initial.u0[i], c * initial.v0[i]]
    })
}

/// Steps one run to completion. Setup failures are returned as `Err`;
/// failures during stepping are kept in the trajectory.
pub fn integrate(
    cfg: &RunConfig,
    run: &RunSpec,
    mesh: &Mesh,
    integ: IntegratorConfig,
    stride: usize,
    verify: bool,
) -> Result<Trajectory, CliError> {
    let ops = assemble_blocks(mesh, &run.params)?.with_phi_flexural(cfg.energy.phi_flexural);
    let memory = cfg.weights(run, integ.dt)?;
    let initial = cfg.initial.build(mesh)?;
    let hist = cfg.history;
    let past = past_fn(&initial, mesh, move |s| hist.factor(s));
    let mut state = match &past {
        Some(f) => init_state(&ops, &memory, &initial, Some(f)),
        None => init_state(&ops, &memory, &initial, None),
    }?;
    let opts = EnergyOptions {
        convention: cfg.energy.convention(),
    };
    let (observations, ledger, error) = step_all(
        &ops,
        &memory,
        integ,
        opts,
        &mut state,
        stride,
        verify,
        cfg.verify.tol,
    )?;
    Ok(Trajectory {
        ops,
        observations,
        ledger,
        last: state,
        error,
    })
}

type Stepped = (Vec<Observation>, Vec<(usize, DecrementLedger)>, Option<Error>);

#[allow(clippy::too_many_arguments)]
fn step_all(
    ops: &SpatialOperators,
    memory: &MemoryWeights,
    integ: IntegratorConfig,
    opts: EnergyOptions,
    state: &mut SimState,
    stride: usize,
    verify: bool,
    tol: Option<f64>,
) -> Result<Stepped, CliError> {
    let mut it = Integrator::new(ops, memory, integ)?;
    it.energy_options = opts;
    let stride = if verify { 1 } else { stride };
    let mut prev: Option<(SimState, f64)> = None;
    let mut ledger = Vec::new();
    let mut violation = None;
    let mut tol_abs = tol;
    let mut check = |step: usize, _t: f64, s: &SimState, e: &EnergyBreakdown| -> ControlFlow<()> {
        let tol = *tol_abs.get_or_insert_with(|| default_identity_tol(e.total));
        if let Some((before, e_before)) = &prev {
            let l = decrement(before, s, ops, memory, &opts, *e_before, e.total);
            let bad = !(l.mismatch() <= tol);
            if bad {
                violation = Some(Error::IdentityViolation {
                    step,
                    predicted: l.predicted,
                    observed: l.observed,
                    tol,
                });
            }
            ledger.push((step, l));
            if bad {
                return ControlFlow::Break(());
            }
        }
        prev = Some((s.clone(), e.total));
        ControlFlow::Continue(())
    };
    let trace = if verify {
        it.run(state, integ.steps, stride, &mut [&mut check])
    } else {
        it.run(state, integ.steps, stride, &mut [])
    };
    let error = trace.error.or(violation);
    Ok((trace.observations, ledger, error))
}

fn prepare_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::config(format!("output directory {} is not writable: {e}", dir.display())))
}

/// `simulate` and `verify`: energy trace, final state and, when verifying,
/// the decrement ledger.
pub fn run_simulate(cfg: &RunConfig, out: &Path, stride: usize, verify: bool) -> Result<Outcome, CliError> {
    let integ = cfg.integrator();
    if verify && !integ.preserves_energy_identity() {
        return Err(CliError::config(format!(
            "verify needs beta = 1/4 and varsigma = 1/2 (got beta = {}, varsigma = {})",
            integ.beta, integ.varsigma
        )));
    }
    prepare_dir(out)?;
    let mesh = cfg.mesh()?;
    let traj = integrate(cfg, &cfg.base_run(), &mesh, integ, stride, verify)?;
    let mut files = vec![
        output::write_energy(&out.join("energy.csv"), &traj.observations)?,
        output::write_final_state(&out.join("final_state.csv"), &traj.ops, &traj.last)?,
    ];
    if verify {
        files.push(output::write_decrement(
            &out.join("decrement.csv"),
            integ.dt,
            &traj.ledger,
        )?);
    }
    Ok(Outcome {
        files,
        error: traj.error.map(CliError::from),
    })
}

/// RMS difference over all fields at the coarse level's nodes.
fn restricted_error(coarse: &Mesh, u: &[f64], fine: &Mesh, uf: &[f64]) -> f64 {
    let (lc, lf) = (coarse.layout(), fine.layout());
    let r = (fine.interior + 1) / (coarse.interior + 1);
    let (mut sum, mut count) = (0.0, 0usize);
    for i in 1..=coarse.interior + 1 {
        let fi = r * i;
        let mut add = |a: f64, b: f64| {
            sum += (a - b) * (a - b);
            count += 1;
        };
        if i <= coarse.interior {
            add(u[lc.phi_at(i)], uf[lf.phi_at(fi)]);
        }
        add(u[lc.psi_at(i)], uf[lf.psi_at(fi)]);
        add(u[lc.v_at(i)], uf[lf.v_at(fi)]);
    }
    (sum / count as f64).sqrt()
}

/// Self-convergence study over the configured ladder.
pub fn run_converge(cfg: &RunConfig, out: &Path) -> Result<(Outcome, Vec<ConvergenceRow>), CliError> {
    let c = cfg
        .converge
        .as_ref()
        .ok_or_else(|| CliError::config("converge mode needs a [converge] section"))?;
    cfg.check_ladder(c)?;
    prepare_dir(out)?;
    let run = cfg.base_run();
    let results: Vec<Result<(Mesh, Trajectory, IntegratorConfig), CliError>> = c
        .levels
        .par_iter()
        .map(|&j| {
            let mesh = build_mesh(j, cfg.mesh.length)?;
            let dt = c.courant * mesh.h;
            let steps = (c.t_end / dt).round() as usize;
            let integ = IntegratorConfig {
                dt,
                steps,
                ..cfg.integrator()
            };
            let traj = integrate(cfg, &run, &mesh, integ, steps, false)?;
            Ok((mesh, traj, integ))
        })
        .collect();
    let mut levels = Vec::new();
    for r in results {
        let (mesh, traj, integ) = r?;
        if let Some(e) = traj.error {
            return Err(CliError::from(e).context(&format!("level J = {}", mesh.interior)));
        }
        levels.push((mesh, traj.last.disp, integ));
    }
    let (fine_mesh, fine, _) = levels.last().unwrap();
    let mut rows: Vec<ConvergenceRow> = levels
        .iter()
        .enumerate()
        .map(|(k, (mesh, u, integ))| ConvergenceRow {
            interior: mesh.interior,
            h: mesh.h,
            dt: integ.dt,
            steps: integ.steps,
            error: (k + 1 < levels.len()).then(|| restricted_error(mesh, u, fine_mesh, fine)),
            order: None,
        })
        .collect();
    for k in 1..rows.len() {
        if let (Some(a), Some(b)) = (rows[k - 1].error, rows[k].error) {
            rows[k].order = Some((a / b).ln() / (rows[k - 1].h / rows[k].h).ln());
        }
    }
    let files = vec![output::write_convergence(&out.join("convergence.csv"), &rows)?];
    let mut error = None;
    if let Some([lo, hi]) = c.order_range {
        if let Some(bad) = rows
            .iter()
            .filter_map(|r| r.order.map(|p| (r.interior, p)))
            .find(|(_, p)| !(*p >= lo && *p <= hi))
        {
            error = Some(CliError {
                code: ExitCode::IdentityViolation,
                message: format!(
                    "observed order {:.4} at J = {} outside [{lo}, {hi}]",
                    bad.1, bad.0
                ),
            });
        }
    }
    Ok((Outcome { files, error }, rows))
}

/// Kernel comparison: every variant on the shared mesh and initial data,
/// in parallel, followed by both decay fits.
pub fn run_sweep(cfg: &RunConfig, out: &Path, stride: usize) -> Result<(Outcome, Vec<SweepRow>), CliError> {
    let runs = cfg.sweep_runs();
    if runs.is_empty() {
        return Err(CliError::config("sweep needs at least one [[sweep.variant]]"));
    }
    prepare_dir(out)?;
    let mesh = cfg.mesh()?;
    let integ = cfg.integrator();
    let fit = cfg.fit.options();
    let members: Vec<(SweepRow, Option<CliError>, Option<PathBuf>)> = runs
        .par_iter()
        .map(|run| {
            let envelope = predicted_envelope(&run.phi, &run.psi)
                .map(|e| e.describe())
                .unwrap_or_else(|e| format!("error: {e}"));
            let failed = |err: CliError| {
                let row = SweepRow {
                    name: run.name.clone(),
                    status: format!("failed[{}]", err.code as i32),
                    envelope: envelope.clone(),
                    comparison: None,
                    final_ratio: None,
                };
                (row, Some(err.context(&run.name)), None)
            };
            let traj = match integrate(cfg, run, &mesh, integ, stride, false) {
                Ok(t) => t,
                Err(e) => return failed(e),
            };
            let path = out.join(format!("energy_{}.csv", run.name));
            let file = match output::write_energy(&path, &traj.observations) {
                Ok(p) => p,
                Err(e) => return failed(e),
            };
            if let Some(e) = traj.error {
                let mut r = failed(CliError::from(e));
                r.2 = Some(file);
                return r;
            }
            let t: Vec<f64> = traj.observations.iter().map(|o| o.time).collect();
            let e: Vec<f64> = traj.observations.iter().map(|o| o.energy.total).collect();
            let e0 = e[0];
            let (comparison, status) = match compare_models(&t, &e, &fit) {
                Ok(c) => (Some(c), "ok".to_string()),
                Err(err) => (None, format!("no_fit: {err}")),
            };
            let row = SweepRow {
                name: run.name.clone(),
                status,
                envelope,
                comparison,
                final_ratio: (e0 > 0.0).then(|| e[e.len() - 1] / e0),
            };
            (row, None, Some(file))
        })
        .collect();
    let mut files = Vec::new();
    let mut rows = Vec::new();
    let mut worst: Option<CliError> = None;
    for (row, err, file) in members {
        files.extend(file);
        rows.push(row);
        if let Some(e) = err {
            if worst.as_ref().is_none_or(|w| e.code > w.code) {
                worst = Some(e);
            }
        }
    }
    files.push(output::write_sweep_report(&out.join("sweep_report.csv"), &rows)?);
    Ok((Outcome { files, error: worst }, rows))
}

/// Fits both decay models to an existing energy CSV.
pub fn run_fit(cfg: &RunConfig, energy_csv: &Path, out: &Path) -> Result<Outcome, CliError> {
    let (t, e) = output::read_energy(energy_csv)?;
    let cmp = compare_models(&t, &e, &cfg.fit.options())?;
    let run = cfg.base_run();
    let envelope = predicted_envelope(&run.phi, &run.psi)?;
    prepare_dir(out)?;
    let path = output::write_fit_report(&out.join("fit_report.csv"), &cmp, &envelope.describe())?;
    Ok(Outcome {
        files: vec![path],
        error: None,
    })
}
