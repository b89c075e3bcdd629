//! Relaxation kernels, their admissibility checks and the sampled
//! convolution weights.

use crate::error::{Error, Result};
use crate::spatial::MaterialParams;

/// Default relative tail-mass tolerance used to pick the memory depth.
pub const DEFAULT_TAIL_TOL: f64 = 1e-8;
/// Default upper bound on the memory depth (steps).
pub const DEFAULT_MAX_DEPTH: usize = 2_000_000;

/// A relaxation function `g(s)`, `s >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub enum KernelSpec {
    /// `d * exp(-rate * s)`
    Exponential { amplitude: f64, rate: f64 },
    /// `d * (1 + s)^(-exponent)`
    Polynomial { amplitude: f64, exponent: f64 },
    /// Samples on the grid `s = i * spacing`, linearly interpolated and
    /// clamped to the last sample beyond the grid.
    Tabulated { spacing: f64, samples: Vec<f64> },
}

impl KernelSpec {
    pub fn exponential(amplitude: f64, rate: f64) -> Self {
        KernelSpec::Exponential { amplitude, rate }
    }

    pub fn polynomial(amplitude: f64, exponent: f64) -> Self {
        KernelSpec::Polynomial { amplitude, exponent }
    }

    /// The zero kernel (no memory).
    pub fn none() -> Self {
        KernelSpec::Exponential {
            amplitude: 0.0,
            rate: 1.0,
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            KernelSpec::Exponential { amplitude, .. } | KernelSpec::Polynomial { amplitude, .. } => {
                *amplitude == 0.0
            }
            KernelSpec::Tabulated { samples, .. } => samples.iter().all(|&g| g == 0.0),
        }
    }

    /// Checks parameter ranges and sample monotonicity.
    pub fn validate(&self) -> Result<()> {
        match self {
            KernelSpec::Exponential { amplitude, rate } => {
                if !(amplitude.is_finite() && *amplitude >= 0.0) {
                    return Err(Error::Config(format!(
                        "exponential kernel amplitude must be >= 0, got {amplitude}"
                    )));
                }
                if !(rate.is_finite() && *rate > 0.0) {
                    return Err(Error::Config(format!(
                        "exponential kernel rate must be > 0, got {rate}"
                    )));
                }
            }
            KernelSpec::Polynomial { amplitude, exponent } => {
                if !(amplitude.is_finite() && *amplitude >= 0.0) {
                    return Err(Error::Config(format!(
                        "polynomial kernel amplitude must be >= 0, got {amplitude}"
                    )));
                }
                if !exponent.is_finite() || *exponent <= 1.0 {
                    return Err(Error::NonIntegrable(format!(
                        "polynomial kernel needs exponent > 1 to be integrable, got {exponent}"
                    )));
                }
            }
            KernelSpec::Tabulated { spacing, samples } => {
                if samples.is_empty() {
                    return Err(Error::Config("tabulated kernel has no samples".into()));
                }
                if !(spacing.is_finite() && *spacing > 0.0) {
                    return Err(Error::Config(format!(
                        "tabulated kernel spacing must be > 0, got {spacing}"
                    )));
                }
                if let Some(g) = samples.iter().find(|g| !(g.is_finite() && **g >= 0.0)) {
                    return Err(Error::Config(format!(
                        "tabulated kernel sample {g} is not a nonnegative number"
                    )));
                }
                let scale = samples[0].max(f64::MIN_POSITIVE);
                for (i, w) in samples.windows(2).enumerate() {
                    if w[1] > w[0] + 1e-12 * scale {
                        return Err(Error::Config(format!(
                            "tabulated kernel increases between samples {i} and {}",
                            i + 1
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Evaluates `g(s)`.
pub fn eval_kernel(spec: &KernelSpec, s: f64) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(Error::Domain(format!("kernel evaluated at s = {s}")));
    }
    Ok(match spec {
        KernelSpec::Exponential { amplitude, rate } => amplitude * (-rate * s).exp(),
        KernelSpec::Polynomial { amplitude, exponent } => amplitude * (1.0 + s).powf(-exponent),
        KernelSpec::Tabulated { spacing, samples } => {
            if samples.is_empty() {
                return Err(Error::Config("tabulated kernel has no samples".into()));
            }
            let pos = s / spacing;
            let last = samples.len() - 1;
            if pos >= last as f64 {
                samples[last]
            } else {
                let i = pos.floor() as usize;
                let frac = pos - i as f64;
                samples[i] + frac * (samples[i + 1] - samples[i])
            }
        }
    })
}

/// `g^0 = int_0^inf g(s) ds`. For tabulated kernels this is the trapezoid
/// mass of the grid; the clamped tail beyond the grid is dropped.
pub fn total_mass(spec: &KernelSpec) -> Result<f64> {
    match spec {
        KernelSpec::Exponential { amplitude, rate } => Ok(amplitude / rate),
        KernelSpec::Polynomial { amplitude, exponent } => {
            if *exponent <= 1.0 {
                return Err(Error::NonIntegrable(format!(
                    "polynomial kernel with exponent {exponent} <= 1"
                )));
            }
            Ok(amplitude / (exponent - 1.0))
        }
        KernelSpec::Tabulated { spacing, samples } => {
            if samples.is_empty() {
                return Err(Error::Config("tabulated kernel has no samples".into()));
            }
            let sum: f64 = samples.iter().sum();
            Ok(spacing * (sum - 0.5 * (samples[0] + samples[samples.len() - 1])))
        }
    }
}

/// `int_X^inf g(s) ds` in closed form (tabulated: remaining grid mass).
pub fn tail_mass(spec: &KernelSpec, x: f64) -> Result<f64> {
    match spec {
        KernelSpec::Exponential { amplitude, rate } => Ok(amplitude / rate * (-rate * x).exp()),
        KernelSpec::Polynomial { amplitude, exponent } => {
            if *exponent <= 1.0 {
                return Err(Error::NonIntegrable(format!(
                    "polynomial kernel with exponent {exponent} <= 1"
                )));
            }
            Ok(amplitude / (exponent - 1.0) * (1.0 + x).powf(1.0 - exponent))
        }
        KernelSpec::Tabulated { spacing, samples } => {
            let end = spacing * (samples.len() - 1) as f64;
            if x >= end {
                return Ok(0.0);
            }
            let total = total_mass(spec)?;
            // mass of [0, x] by trapezoid on the interpolant
            let mut head = 0.0;
            let mut s = 0.0;
            while s < x {
                let next = (s + spacing).min(x);
                head += 0.5 * (next - s) * (eval_kernel(spec, s)? + eval_kernel(spec, next)?);
                s = next;
            }
            Ok((total - head).max(0.0))
        }
    }
}

/// Sampled kernel on the time grid of the integrator.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelWeights {
    pub dt: f64,
    /// Truncation depth `N`.
    pub depth: usize,
    /// `g(j dt)` for `j = 0..=N`.
    pub samples: Vec<f64>,
    /// `(g^{j-1} + g^j) / 2` for `j = 1..=N`, stored at index `j - 1`.
    pub midpoints: Vec<f64>,
    pub total: f64,
    /// `dt * sum_j midpoints` (the mass the scheme actually carries).
    pub truncated: f64,
}

impl KernelWeights {
    /// Convolution weight `dt * g^{j-1/2}`; zero beyond the depth.
    #[inline]
    pub fn omega(&self, j: usize) -> f64 {
        if j == 0 || j > self.depth {
            0.0
        } else {
            self.dt * self.midpoints[j - 1]
        }
    }

    /// `g^{j-1/2}`, zero beyond the depth.
    pub fn midpoint(&self, j: usize) -> f64 {
        if j == 0 || j > self.depth {
            0.0
        } else {
            self.midpoints[j - 1]
        }
    }

    pub fn omega_sum(&self) -> f64 {
        self.truncated
    }

    pub fn is_zero(&self) -> bool {
        self.midpoints.iter().all(|&g| g == 0.0)
    }
}

/// Smallest depth whose analytic tail is below `tail_tol * g^0`.
pub fn required_depth(spec: &KernelSpec, dt: f64, tail_tol: f64) -> Result<f64> {
    if !(dt > 0.0) {
        return Err(Error::Config(format!("time step must be > 0, got {dt}")));
    }
    if !(tail_tol > 0.0 && tail_tol < 1.0) {
        return Err(Error::Config(format!(
            "tail tolerance must lie in (0, 1), got {tail_tol}"
        )));
    }
    spec.validate()?;
    let total = total_mass(spec)?;
    if total == 0.0 {
        return Ok(1.0);
    }
    let horizon = match spec {
        KernelSpec::Exponential { rate, .. } => -tail_tol.ln() / rate,
        KernelSpec::Polynomial { exponent, .. } => tail_tol.powf(-1.0 / (exponent - 1.0)) - 1.0,
        KernelSpec::Tabulated { spacing, samples } => {
            return Ok(((spacing * (samples.len() - 1) as f64 / dt) - 1e-9)
                .ceil()
                .max(1.0))
        }
    };
    Ok((horizon / dt).ceil().max(1.0))
}

/// Samples `g` on the grid `j dt`, choosing `N` from the tail criterion.
pub fn sample_weights(spec: &KernelSpec, dt: f64, tail_tol: f64, max_depth: usize) -> Result<KernelWeights> {
    let guess = required_depth(spec, dt, tail_tol)?;
    if guess > max_depth as f64 {
        return Err(Error::Resource {
            required: if guess > usize::MAX as f64 {
                usize::MAX
            } else {
                guess as usize
            },
            cap: max_depth,
        });
    }
    let mut depth = guess as usize;
    if !matches!(spec, KernelSpec::Tabulated { .. }) && !spec.is_zero() {
        let total = total_mass(spec)?;
        let bound = tail_tol * total * (1.0 + 1e-12);
        let tail = |n: usize| tail_mass(spec, n as f64 * dt);
        while depth > 1 && tail(depth - 1)? <= bound {
            depth -= 1;
        }
        while tail(depth)? > bound {
            depth += 1;
        }
        if depth > max_depth {
            return Err(Error::Resource {
                required: depth,
                cap: max_depth,
            });
        }
    }
    sample_weights_with_depth(spec, dt, depth)
}

/// Samples `g` on the grid `j dt` with a prescribed depth.
pub fn sample_weights_with_depth(spec: &KernelSpec, dt: f64, depth: usize) -> Result<KernelWeights> {
    if !(dt > 0.0) {
        return Err(Error::Config(format!("time step must be > 0, got {dt}")));
    }
    if depth == 0 {
        return Err(Error::Config("memory depth must be >= 1".into()));
    }
    spec.validate()?;
    let samples = (0..=depth)
        .map(|j| eval_kernel(spec, j as f64 * dt))
        .collect::<Result<Vec<_>>>()?;
    let midpoints: Vec<f64> = samples.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    let truncated = dt * midpoints.iter().sum::<f64>();
    Ok(KernelWeights {
        dt,
        depth,
        samples,
        midpoints,
        total: total_mass(spec)?,
        truncated,
    })
}

/// Kernel-local admissibility facts.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelAdmissibility {
    pub total_mass: f64,
    pub nonincreasing: bool,
    /// `beta` with `-beta g <= g'` (log-slope lower bound), when certified.
    pub log_slope_bound: Option<f64>,
    /// `alpha` with `g' <= -alpha g` (exponential decay), when it holds.
    pub exponential_rate: Option<f64>,
    /// Threshold `r_min = (q+1)/(q-1)`: the convexity condition holds with
    /// `G(s) = s^r` for every `r > r_min`. Polynomial kernels only.
    pub power_threshold: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmissibilityReport {
    pub phi: KernelAdmissibility,
    pub psi: KernelAdmissibility,
    /// `b - g2^0`, required positive.
    pub flexural_margin: f64,
}

fn kernel_admissibility(spec: &KernelSpec) -> Result<KernelAdmissibility> {
    spec.validate()?;
    let total_mass = total_mass(spec)?;
    Ok(match spec {
        KernelSpec::Exponential { rate, .. } => KernelAdmissibility {
            total_mass,
            nonincreasing: true,
            log_slope_bound: Some(*rate),
            exponential_rate: Some(*rate),
            power_threshold: None,
        },
        KernelSpec::Polynomial { exponent, .. } => KernelAdmissibility {
            total_mass,
            nonincreasing: true,
            // -g'/g = q/(1+s) <= q
            log_slope_bound: Some(*exponent),
            exponential_rate: None,
            power_threshold: Some((exponent + 1.0) / (exponent - 1.0)),
        },
        KernelSpec::Tabulated { .. } => KernelAdmissibility {
            total_mass,
            nonincreasing: true,
            log_slope_bound: None,
            exponential_rate: None,
            power_threshold: None,
        },
    })
}

/// Kernel hypotheses plus `b > g2^0`.
pub fn check_h1_h2(
    phi: &KernelSpec,
    psi: &KernelSpec,
    params: &MaterialParams,
) -> Result<AdmissibilityReport> {
    let phi = kernel_admissibility(phi)?;
    let psi = kernel_admissibility(psi)?;
    let flexural_margin = params.b - psi.total_mass;
    if !(flexural_margin > 0.0) {
        return Err(Error::Inadmissible {
            condition: "b - g2_total > 0".into(),
            detail: format!("b = {}, g2_total = {}", params.b, psi.total_mass),
        });
    }
    Ok(AdmissibilityReport {
        phi,
        psi,
        flexural_margin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluates_families() {
        assert_eq!(eval_kernel(&KernelSpec::exponential(1.0, 1.0), 0.0).unwrap(), 1.0);
        assert_eq!(eval_kernel(&KernelSpec::polynomial(2.0, 2.0), 1.0).unwrap(), 0.5);
        assert!(eval_kernel(&KernelSpec::exponential(1.0, 1.0), 800.0).unwrap() < 1e-300);
        assert!(matches!(
            eval_kernel(&KernelSpec::exponential(1.0, 1.0), -1.0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn tabulated_interpolates_and_clamps() {
        let k = KernelSpec::Tabulated {
            spacing: 0.5,
            samples: vec![1.0, 0.5, 0.25],
        };
        assert_eq!(eval_kernel(&k, 0.25).unwrap(), 0.75);
        assert_eq!(eval_kernel(&k, 10.0).unwrap(), 0.25);
        assert_eq!(total_mass(&k).unwrap(), 0.5625);
        let empty = KernelSpec::Tabulated {
            spacing: 1.0,
            samples: vec![],
        };
        assert!(matches!(eval_kernel(&empty, 0.0), Err(Error::Config(_))));
        let rising = KernelSpec::Tabulated {
            spacing: 1.0,
            samples: vec![1.0, 1.1],
        };
        assert!(rising.validate().is_err());
    }

    #[test]
    fn total_masses() {
        assert_eq!(total_mass(&KernelSpec::exponential(1.0, 1.0)).unwrap(), 1.0);
        assert_eq!(total_mass(&KernelSpec::polynomial(1.0, 2.0)).unwrap(), 1.0);
        assert_eq!(total_mass(&KernelSpec::exponential(3.0, 2.0)).unwrap(), 1.5);
        assert!(matches!(
            total_mass(&KernelSpec::polynomial(1.0, 1.0)),
            Err(Error::NonIntegrable(_))
        ));
    }

    #[test]
    fn depth_from_tail_criterion() {
        let w = sample_weights(&KernelSpec::exponential(1.0, 1.0), 0.01, 1e-6, DEFAULT_MAX_DEPTH).unwrap();
        assert_eq!(w.depth, 1382);
        let w = sample_weights(&KernelSpec::polynomial(1.0, 3.0), 0.1, 1e-4, DEFAULT_MAX_DEPTH).unwrap();
        assert_eq!(w.depth, 990);
        let n = w.depth as f64 * 0.1;
        assert!((1.0 + n).powi(-2) / 2.0 <= 1e-4 * 0.5 * (1.0 + 1e-12));
        assert!((1.0 + n - 0.1).powi(-2) / 2.0 > 1e-4 * 0.5);
    }

    #[test]
    fn depth_cap_is_a_resource_error() {
        let err = sample_weights(&KernelSpec::polynomial(1.0, 1.5), 0.01, 1e-8, 1000).unwrap_err();
        match err {
            Error::Resource { required, cap } => {
                assert_eq!(cap, 1000);
                assert!(required > 1000);
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn heavy_truncation_underestimates_mass() {
        let w = sample_weights(&KernelSpec::exponential(1.0, 1.0), 0.01, 0.5, DEFAULT_MAX_DEPTH).unwrap();
        assert!(w.truncated <= w.total);
    }

    #[test]
    fn zero_kernel_has_unit_depth_and_no_weight() {
        let w = sample_weights(&KernelSpec::none(), 0.1, 1e-8, 10).unwrap();
        assert_eq!(w.depth, 1);
        assert!(w.is_zero());
        assert_eq!(w.omega(1), 0.0);
    }

    #[test]
    fn admissibility_report() {
        let p = MaterialParams::unit();
        let r = check_h1_h2(
            &KernelSpec::exponential(1.0, 2.0),
            &KernelSpec::polynomial(0.5, 2.0),
            &MaterialParams { b: 2.0, ..p },
        )
        .unwrap();
        assert_eq!(r.phi.exponential_rate, Some(2.0));
        assert_eq!(r.phi.log_slope_bound, Some(2.0));
        assert_eq!(r.psi.exponential_rate, None);
        assert_eq!(r.psi.power_threshold, Some(3.0));
        assert_eq!(r.flexural_margin, 1.5);

        let err = check_h1_h2(
            &KernelSpec::none(),
            &KernelSpec::exponential(2.0, 1.0),
            &MaterialParams::unit(),
        )
        .unwrap_err();
        match err {
            Error::Inadmissible { condition, .. } => assert_eq!(condition, "b - g2_total > 0"),
            e => panic!("unexpected {e:?}"),
        }
    }
}
