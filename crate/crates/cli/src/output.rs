//! CSV artifacts. Floats carry 17 significant digits so that files
//! round-trip exactly.

use std::path::{Path, PathBuf};

use timoslip::decay::{DecayFit, ModelComparison};
use timoslip::spatial::SpatialOperators;
use timoslip::{DecrementLedger, EnergyBreakdown, Observation, SimState};

use crate::CliError;

pub fn num(x: f64) -> String {
    // adding 0.0 folds -0 into 0
    format!("{:.16e}", x + 0.0)
}

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>, CliError> {
    csv::Writer::from_path(path)
        .map_err(|e| CliError::config(format!("cannot write {}: {e}", path.display())))
}

/// `step,time,<energy columns>`
pub fn write_energy(path: &Path, obs: &[Observation]) -> Result<PathBuf, CliError> {
    let mut w = writer(path)?;
    let mut head = vec!["step", "time"];
    head.extend(EnergyBreakdown::COLUMNS);
    w.write_record(&head)?;
    for o in obs {
        let mut row = vec![o.step.to_string(), num(o.time)];
        row.extend(o.energy.values().iter().map(|&v| num(v)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(path.to_path_buf())
}

/// Node values `phi, u, v` and their velocities, ends included.
pub fn write_final_state(path: &Path, ops: &SpatialOperators, s: &SimState) -> Result<PathBuf, CliError> {
    let l = ops.layout;
    let mesh = &ops.mesh;
    let mut w = writer(path)?;
    w.write_record(["node", "x", "phi", "u", "v", "phi_t", "u_t", "v_t"])?;
    for i in 0..mesh.interior + 2 {
        let (mut phi, mut phi_t) = (0.0, 0.0);
        if i >= 1 && i <= l.n_phi() {
            phi = s.disp[l.phi_at(i)];
            phi_t = s.vel[l.phi_at(i)];
        }
        let (mut u, mut v, mut u_t, mut v_t) = (0.0, 0.0, 0.0, 0.0);
        if i >= 1 {
            v = s.disp[l.v_at(i)];
            v_t = s.vel[l.v_at(i)];
            u = v - s.disp[l.psi_at(i)];
            u_t = v_t - s.vel[l.psi_at(i)];
        }
        let row = [
            i.to_string(),
            num(mesh.x(i)),
            num(phi),
            num(u),
            num(v),
            num(phi_t),
            num(u_t),
            num(v_t),
        ];
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(path.to_path_buf())
}

/// `step,time,<ledger columns>,mismatch` for the step ending at `step`.
pub fn write_decrement(path: &Path, dt: f64, rows: &[(usize, DecrementLedger)]) -> Result<PathBuf, CliError> {
    let mut w = writer(path)?;
    let mut head = vec!["step", "time"];
    head.extend(DecrementLedger::COLUMNS);
    head.push("mismatch");
    w.write_record(&head)?;
    for (step, l) in rows {
        let mut row = vec![step.to_string(), num(*step as f64 * dt)];
        row.extend(l.values().iter().map(|&v| num(v)));
        row.push(num(l.mismatch()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(path.to_path_buf())
}

#[derive(Debug, Clone)]
pub struct ConvergenceRow {
    pub interior: usize,
    pub h: f64,
    pub dt: f64,
    pub steps: usize,
    /// RMS difference to the finest level on its nodes; `None` for the finest.
    pub error: Option<f64>,
    /// Order between this level and the next coarser one.
    pub order: Option<f64>,
}

pub fn write_convergence(path: &Path, rows: &[ConvergenceRow]) -> Result<PathBuf, CliError> {
    let mut w = writer(path)?;
    w.write_record(["interior", "h", "dt", "steps", "error", "order"])?;
    let opt = |x: Option<f64>| x.map(num).unwrap_or_default();
    for r in rows {
        w.write_record([
            r.interior.to_string(),
            num(r.h),
            num(r.dt),
            r.steps.to_string(),
            opt(r.error),
            opt(r.order),
        ])?;
    }
    w.flush()?;
    Ok(path.to_path_buf())
}

pub const FIT_COLUMNS: [&str; 8] = [
    "model",
    "parameter",
    "amplitude",
    "goodness",
    "window_lo",
    "window_hi",
    "samples",
    "envelope_ok",
];

fn fit_cells(f: &DecayFit) -> Vec<String> {
    vec![
        f.model.name().to_string(),
        num(f.model.parameter()),
        num(f.model.amplitude()),
        num(f.goodness),
        num(f.window.0),
        num(f.window.1),
        f.samples.to_string(),
        f.envelope_ok.to_string(),
    ]
}

/// One row per model plus the predicted envelope and preference.
pub fn write_fit_report(path: &Path, cmp: &ModelComparison, envelope: &str) -> Result<PathBuf, CliError> {
    let mut w = writer(path)?;
    let mut head: Vec<&str> = FIT_COLUMNS.to_vec();
    head.extend(["preferred", "predicted_envelope"]);
    w.write_record(&head)?;
    for f in [&cmp.exponential, &cmp.algebraic] {
        let mut row = fit_cells(f);
        row.push((cmp.preferred() == f.model.name()).to_string());
        row.push(envelope.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(path.to_path_buf())
}

/// Outcome of one sweep member.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub name: String,
    pub status: String,
    pub envelope: String,
    pub comparison: Option<ModelComparison>,
    pub final_ratio: Option<f64>,
}

pub const SWEEP_COLUMNS: [&str; 13] = [
    "rank",
    "variant",
    "status",
    "predicted_envelope",
    "exp_rate",
    "exp_amplitude",
    "exp_goodness",
    "alg_exponent",
    "alg_amplitude",
    "alg_goodness",
    "preferred",
    "best_goodness",
    "final_energy_ratio",
];

/// Ranked by best goodness, failed members last, ties by name.
pub fn write_sweep_report(path: &Path, rows: &[SweepRow]) -> Result<PathBuf, CliError> {
    let best = |r: &SweepRow| {
        r.comparison
            .as_ref()
            .map(|c| c.exponential.goodness.max(c.algebraic.goodness))
    };
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by(|&a, &b| {
        let (ga, gb) = (best(&rows[a]), best(&rows[b]));
        gb.partial_cmp(&ga)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| rows[a].name.cmp(&rows[b].name))
    });
    let mut w = writer(path)?;
    w.write_record(SWEEP_COLUMNS)?;
    for (rank, &i) in order.iter().enumerate() {
        let r = &rows[i];
        let mut row = vec![
            (rank + 1).to_string(),
            r.name.clone(),
            r.status.clone(),
            r.envelope.clone(),
        ];
        match &r.comparison {
            Some(c) => {
                row.extend([
                    num(c.exponential.model.parameter()),
                    num(c.exponential.model.amplitude()),
                    num(c.exponential.goodness),
                    num(c.algebraic.model.parameter()),
                    num(c.algebraic.model.amplitude()),
                    num(c.algebraic.goodness),
                    c.preferred().to_string(),
                    num(best(r).unwrap_or(f64::NAN)),
                ]);
            }
            None => row.extend(std::iter::repeat_n(String::new(), 8)),
        }
        row.push(r.final_ratio.map(num).unwrap_or_default());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(path.to_path_buf())
}

/// Reads `time` and `total` columns of an energy CSV.
pub fn read_energy(path: &Path) -> Result<(Vec<f64>, Vec<f64>), CliError> {
    let mut r = csv::Reader::from_path(path)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    let head = r.headers()?.clone();
    let col = |name: &str| {
        head.iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::config(format!("{}: missing column '{name}'", path.display())))
    };
    let (ti, ei) = (col("time")?, col("total")?);
    let (mut t, mut e) = (Vec::new(), Vec::new());
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let parse = |i: usize| {
            rec.get(i)
                .and_then(|s| s.trim().parse::<f64>().ok())
                .ok_or_else(|| {
                    CliError::config(format!("{}: bad number on data row {}", path.display(), line + 1))
                })
        };
        t.push(parse(ti)?);
        e.push(parse(ei)?);
    }
    Ok((t, e))
}
