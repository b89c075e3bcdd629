//! Exponential and algebraic decay fits of energy traces, and the envelope
//! predicted by the kernel families.

use crate::error::{Error, Result};
use crate::kernels::KernelSpec;

/// Minimum number of usable samples in the fit window.
pub const MIN_SAMPLES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DecayModel {
    /// `E = amplitude * exp(-rate t)`
    Exponential { rate: f64, amplitude: f64 },
    /// `E = amplitude * (1 + t)^(-exponent)`
    Algebraic { exponent: f64, amplitude: f64 },
}

impl DecayModel {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            DecayModel::Exponential { rate, amplitude } => amplitude * (-rate * t).exp(),
            DecayModel::Algebraic { exponent, amplitude } => amplitude * (1.0 + t).powf(-exponent),
        }
    }

    /// Rate or exponent.
    pub fn parameter(&self) -> f64 {
        match *self {
            DecayModel::Exponential { rate, .. } => rate,
            DecayModel::Algebraic { exponent, .. } => exponent,
        }
    }

    pub fn amplitude(&self) -> f64 {
        match *self {
            DecayModel::Exponential { amplitude, .. } | DecayModel::Algebraic { amplitude, .. } => amplitude,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            DecayModel::Exponential { .. } => "exponential",
            DecayModel::Algebraic { .. } => "algebraic",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayFit {
    pub model: DecayModel,
    pub window: (f64, f64),
    /// Coefficient of determination on the transformed axes.
    pub goodness: f64,
    /// Every window sample lies below `1.05` times the fitted curve and the
    /// fitted decay parameter is positive.
    pub envelope_ok: bool,
    /// The fitted decay parameter is (numerically) zero.
    pub degenerate: bool,
    pub samples: usize,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// The window starts at this fraction of the trace's time span.
    pub window_start: f64,
    /// Samples below `floor_factor * eps * E0` are excluded.
    pub floor_factor: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            window_start: 0.5,
            floor_factor: 1e3,
        }
    }
}

struct Window {
    t: Vec<f64>,
    e: Vec<f64>,
    lo: f64,
    hi: f64,
    notes: Vec<String>,
}

fn select(times: &[f64], energies: &[f64], opts: &FitOptions) -> Result<Window> {
    if times.len() != energies.len() {
        return Err(Error::Config("trace times and energies differ in length".into()));
    }
    if times.len() < MIN_SAMPLES {
        return Err(Error::InsufficientData {
            available: times.len(),
            required: MIN_SAMPLES,
        });
    }
    let (t0, t1) = (times[0], times[times.len() - 1]);
    let lo = t0 + opts.window_start * (t1 - t0);
    let floor = opts.floor_factor * f64::EPSILON * energies[0].abs();
    let mut notes = Vec::new();
    let mut t = Vec::new();
    let mut e = Vec::new();
    let mut hi = t1;
    for (&ti, &ei) in times.iter().zip(energies) {
        if ei <= 0.0 {
            notes.push(format!(
                "energy reached {ei} at t = {ti}; fitted the positive prefix"
            ));
            hi = ti;
            break;
        }
        if ti >= lo && ei >= floor {
            t.push(ti);
            e.push(ei);
        }
    }
    let excluded = times
        .iter()
        .zip(energies)
        .filter(|(&ti, &ei)| ti >= lo && ti <= hi && ei > 0.0 && ei < floor)
        .count();
    if excluded > 0 {
        notes.push(format!("{excluded} samples below the round-off floor excluded"));
    }
    if t.len() < MIN_SAMPLES {
        return Err(Error::InsufficientData {
            available: t.len(),
            required: MIN_SAMPLES,
        });
    }
    Ok(Window { t, e, lo, hi, notes })
}

/// Least squares `y = a + b x`; returns `(a, b, r2)`.
fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let icpt = my - slope * mx;
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let r = b - (icpt + slope * a);
            r * r
        })
        .sum();
    let r2 = if syy > 0.0 {
        1.0 - ss_res / syy
    } else if ss_res <= f64::EPSILON * my.abs().max(1.0) {
        1.0
    } else {
        0.0
    };
    (icpt, slope, r2)
}

fn finish(w: Window, model: DecayModel, goodness: f64) -> DecayFit {
    let p = model.parameter();
    let degenerate = p.abs() <= 1e-12 * model.amplitude().abs().max(1.0) || p == 0.0;
    let within = w.t.iter().zip(&w.e).all(|(&t, &e)| e <= 1.05 * model.eval(t));
    DecayFit {
        model,
        window: (w.lo, w.hi),
        goodness,
        envelope_ok: within && p > 0.0 && !degenerate,
        degenerate,
        samples: w.t.len(),
        notes: w.notes,
    }
}

/// Fits `ln E = ln c2 - c1 t` on the window.
pub fn fit_exponential(times: &[f64], energies: &[f64], opts: &FitOptions) -> Result<DecayFit> {
    let w = select(times, energies, opts)?;
    let y: Vec<f64> = w.e.iter().map(|e| e.ln()).collect();
    let (a, b, r2) = linear_fit(&w.t, &y);
    let model = DecayModel::Exponential {
        rate: -b,
        amplitude: a.exp(),
    };
    Ok(finish(w, model, r2))
}

/// Fits `ln E = ln c2 - p ln(1 + t)` on the window.
pub fn fit_algebraic(times: &[f64], energies: &[f64], opts: &FitOptions) -> Result<DecayFit> {
    let w = select(times, energies, opts)?;
    let x: Vec<f64> = w.t.iter().map(|t| (1.0 + t).ln()).collect();
    let y: Vec<f64> = w.e.iter().map(|e| e.ln()).collect();
    let (a, b, r2) = linear_fit(&x, &y);
    let model = DecayModel::Algebraic {
        exponent: -b,
        amplitude: a.exp(),
    };
    Ok(finish(w, model, r2))
}

/// Both fits and the better one by goodness.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelComparison {
    pub exponential: DecayFit,
    pub algebraic: DecayFit,
}

impl ModelComparison {
    pub fn preferred(&self) -> &'static str {
        if self.exponential.goodness >= self.algebraic.goodness {
            "exponential"
        } else {
            "algebraic"
        }
    }
}

pub fn compare_models(times: &[f64], energies: &[f64], opts: &FitOptions) -> Result<ModelComparison> {
    Ok(ModelComparison {
        exponential: fit_exponential(times, energies, opts)?,
        algebraic: fit_algebraic(times, energies, opts)?,
    })
}

/// Decay envelope guaranteed by the kernel families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Envelope {
    Exponential,
    /// `E <= c (1 + t)^(-p)` for every `p < exponent_bound`.
    Algebraic {
        exponent_bound: f64,
    },
    /// No certified envelope (tabulated kernels).
    Uncertified,
}

impl Envelope {
    pub fn describe(&self) -> String {
        match self {
            Envelope::Exponential => "exponential".into(),
            Envelope::Algebraic { exponent_bound } => format!("algebraic(p<{exponent_bound})"),
            Envelope::Uncertified => "uncertified".into(),
        }
    }

    /// Whether a fit is consistent with the envelope, allowing `slack` on
    /// algebraic exponents.
    pub fn admits(&self, fit: &DecayFit, slack: f64) -> bool {
        match (self, fit.model) {
            (Envelope::Exponential, DecayModel::Exponential { rate, .. }) => rate > 0.0,
            (Envelope::Algebraic { exponent_bound }, DecayModel::Algebraic { exponent, .. }) => {
                exponent >= exponent_bound - slack
            }
            _ => false,
        }
    }
}

/// Envelope predicted for the kernel pair; the weaker kernel governs.
pub fn predicted_envelope(phi: &KernelSpec, psi: &KernelSpec) -> Result<Envelope> {
    phi.validate()?;
    psi.validate()?;
    let mut threshold: Option<f64> = None;
    for k in [phi, psi] {
        match k {
            KernelSpec::Exponential { .. } => {}
            KernelSpec::Polynomial { amplitude, exponent } => {
                if *amplitude > 0.0 {
                    let r = (exponent + 1.0) / (exponent - 1.0);
                    threshold = Some(threshold.map_or(r, |t: f64| t.max(r)));
                }
            }
            KernelSpec::Tabulated { .. } => {
                if !k.is_zero() {
                    return Ok(Envelope::Uncertified);
                }
            }
        }
    }
    Ok(match threshold {
        None => Envelope::Exponential,
        Some(r) => Envelope::Algebraic {
            exponent_bound: 1.0 / (r - 1.0),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize, t1: f64) -> Vec<f64> {
        (0..n).map(|i| t1 * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn recovers_exponential() {
        let t = grid(100, 5.0);
        let e: Vec<f64> = t.iter().map(|t| 5.0 * (-2.0 * t).exp()).collect();
        let f = fit_exponential(&t, &e, &FitOptions::default()).unwrap();
        match f.model {
            DecayModel::Exponential { rate, amplitude } => {
                assert!((rate - 2.0).abs() < 1e-8);
                assert!((amplitude - 5.0).abs() < 1e-8);
            }
            _ => unreachable!(),
        }
        assert!(f.envelope_ok);
        assert!(f.goodness > 1.0 - 1e-12);
    }

    #[test]
    fn recovers_algebraic() {
        let t = grid(100, 50.0);
        let e: Vec<f64> = t.iter().map(|t| 1.0 / (1.0 + t)).collect();
        let f = fit_algebraic(&t, &e, &FitOptions::default()).unwrap();
        assert!((f.model.parameter() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn constant_trace_is_degenerate() {
        let t = grid(40, 1.0);
        let e = vec![3.0; 40];
        let f = fit_exponential(&t, &e, &FitOptions::default()).unwrap();
        assert_eq!(f.model.parameter(), 0.0);
        assert!(f.degenerate);
        assert!(!f.envelope_ok);
    }

    #[test]
    fn short_trace_is_insufficient() {
        assert!(matches!(
            fit_algebraic(&[0.0], &[1.0], &FitOptions::default()),
            Err(Error::InsufficientData { .. })
        ));
    }

    #[test]
    fn zero_energy_fits_positive_prefix() {
        let t = grid(200, 10.0);
        let mut e: Vec<f64> = t.iter().map(|t| (-t).exp()).collect();
        e[190] = 0.0;
        let f = fit_exponential(&t, &e, &FitOptions::default()).unwrap();
        assert_eq!(f.notes.len(), 1);
        assert!(f.window.1 < 10.0);
        assert!((f.model.parameter() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn envelopes() {
        let e = KernelSpec::exponential(1.0, 1.0);
        let p2 = KernelSpec::polynomial(1.0, 2.0);
        let p3 = KernelSpec::polynomial(1.0, 3.0);
        assert_eq!(predicted_envelope(&e, &e).unwrap(), Envelope::Exponential);
        assert_eq!(
            predicted_envelope(&p2, &p2).unwrap(),
            Envelope::Algebraic { exponent_bound: 0.5 }
        );
        assert_eq!(
            predicted_envelope(&e, &p3).unwrap(),
            Envelope::Algebraic { exponent_bound: 1.0 }
        );
    }
}
