//! Run configuration: a sectioned TOML file, validated eagerly.
//!
//! Units: lengths in metres, times in seconds, densities per unit length,
//! kernel rates in 1/s. All fields except `mesh.interior`,
//! `integrator.dt` and `integrator.steps` have defaults.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use timoslip::kernels::{DEFAULT_MAX_DEPTH, DEFAULT_TAIL_TOL};
use timoslip::{
    assemble_blocks, build_mesh, check_coercivity, check_h1_h2, sample_weights, sample_weights_with_depth,
    total_mass, ExponentConvention, FitOptions, InitialData, IntegratorConfig, KernelSpec, MaterialParams,
    MemoryWeights, Mesh,
};

use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mesh: MeshSection,
    #[serde(default)]
    pub material: MaterialSection,
    #[serde(default)]
    pub kernel: KernelSection,
    #[serde(default)]
    pub memory: MemorySection,
    pub integrator: IntegratorSection,
    #[serde(default)]
    pub initial: InitialSection,
    #[serde(default)]
    pub history: HistorySection,
    #[serde(default)]
    pub energy: EnergySection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub verify: VerifySection,
    #[serde(default)]
    pub fit: FitSection,
    pub converge: Option<ConvergeSection>,
    pub sweep: Option<SweepSection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSection {
    /// Interior nodes `J`; the spacing is `length / (J + 1)`.
    pub interior: usize,
    #[serde(default = "one")]
    pub length: f64,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MaterialSection {
    pub rho1: f64,
    pub rho2: f64,
    /// Shear modulus.
    pub k: f64,
    /// Flexural rigidity.
    pub b: f64,
    /// Adhesive stiffness.
    pub delta: f64,
    /// Slip damping.
    pub gamma: f64,
}

impl Default for MaterialSection {
    fn default() -> Self {
        let p = MaterialParams::unit();
        MaterialSection {
            rho1: p.rho1,
            rho2: p.rho2,
            k: p.k,
            b: p.b,
            delta: p.delta,
            gamma: p.gamma,
        }
    }
}

impl From<MaterialSection> for MaterialParams {
    fn from(m: MaterialSection) -> Self {
        MaterialParams {
            rho1: m.rho1,
            rho2: m.rho2,
            k: m.k,
            b: m.b,
            delta: m.delta,
            gamma: m.gamma,
        }
    }
}

/// One relaxation kernel, selected by `family`.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelEntry {
    /// `amplitude * exp(-rate s)`
    Exponential { amplitude: f64, rate: f64 },
    /// `amplitude * (1 + s)^(-exponent)`
    Polynomial { amplitude: f64, exponent: f64 },
    /// Piecewise linear through `samples` at `spacing` (s).
    Tabulated { spacing: f64, samples: Vec<f64> },
    #[default]
    None,
}

impl KernelEntry {
    pub fn spec(&self) -> KernelSpec {
        match self {
            KernelEntry::Exponential { amplitude, rate } => KernelSpec::exponential(*amplitude, *rate),
            KernelEntry::Polynomial { amplitude, exponent } => KernelSpec::polynomial(*amplitude, *exponent),
            KernelEntry::Tabulated { spacing, samples } => KernelSpec::Tabulated {
                spacing: *spacing,
                samples: samples.clone(),
            },
            KernelEntry::None => KernelSpec::none(),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSection {
    #[serde(default)]
    pub phi: KernelEntry,
    #[serde(default)]
    pub psi: KernelEntry,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MemorySection {
    /// Relative kernel tail mass dropped by truncation.
    pub tail_tol: f64,
    pub max_depth: usize,
    /// Fixed history depth in steps, overriding the tail criterion.
    pub depth: Option<usize>,
}

impl Default for MemorySection {
    fn default() -> Self {
        MemorySection {
            tail_tol: DEFAULT_TAIL_TOL,
            max_depth: DEFAULT_MAX_DEPTH,
            depth: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSection {
    /// Time step (s).
    pub dt: f64,
    pub steps: usize,
    #[serde(default = "quarter")]
    pub beta: f64,
    #[serde(default = "half")]
    pub varsigma: f64,
}

/// Node profile of one initial field. `sine` picks the mode shape that
/// matches the field's end conditions.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Profile {
    #[default]
    Zero,
    Sine {
        amplitude: f64,
        #[serde(default = "one_u32")]
        mode: u32,
    },
    /// Smooth polynomial bump vanishing to second order at clamped ends.
    Bump { amplitude: f64 },
    /// Values at all `J + 2` nodes, ends included.
    Tabulated { values: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Ends {
    /// Clamped at both ends (transverse displacement).
    Clamped,
    /// Clamped at 0, free at `L`.
    ClampedFree,
}

impl Profile {
    fn eval(&self, x: f64, length: f64, ends: Ends) -> f64 {
        let pi = std::f64::consts::PI;
        let s = x / length;
        match (self, ends) {
            (Profile::Zero, _) | (Profile::Tabulated { .. }, _) => 0.0,
            (Profile::Sine { amplitude, mode }, Ends::Clamped) => amplitude * (*mode as f64 * pi * s).sin(),
            (Profile::Sine { amplitude, mode }, Ends::ClampedFree) => {
                amplitude * ((*mode as f64 - 0.5) * pi * s).sin()
            }
            (Profile::Bump { amplitude }, Ends::Clamped) => amplitude * 16.0 * (s * (1.0 - s)).powi(2),
            (Profile::Bump { amplitude }, Ends::ClampedFree) => amplitude * s * s * (3.0 - 2.0 * s),
        }
    }

    fn fill(&self, mesh: &Mesh, ends: Ends, out: &mut [f64], field: &str) -> Result<(), CliError> {
        if let Profile::Tabulated { values } = self {
            if values.len() != out.len() {
                return Err(CliError::config(format!(
                    "initial.{field}: tabulated profile has {} values, mesh has {} nodes",
                    values.len(),
                    out.len()
                )));
            }
            out.copy_from_slice(values);
            return Ok(());
        }
        if let Profile::Sine { mode: 0, .. } = self {
            return Err(CliError::config(format!(
                "initial.{field}: sine mode must be >= 1"
            )));
        }
        for (j, o) in out.iter_mut().enumerate() {
            *o = self.eval(mesh.x(j), mesh.length, ends);
        }
        Ok(())
    }
}

/// Initial displacements and velocities of the three fields.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    #[serde(default)]
    pub phi: Profile,
    #[serde(default)]
    pub phi_t: Profile,
    #[serde(default)]
    pub u: Profile,
    #[serde(default)]
    pub u_t: Profile,
    #[serde(default)]
    pub v: Profile,
    #[serde(default)]
    pub v_t: Profile,
}

impl InitialSection {
    pub fn build(&self, mesh: &Mesh) -> Result<InitialData, CliError> {
        let mut d = InitialData::zeros(mesh);
        self.phi.fill(mesh, Ends::Clamped, &mut d.phi0, "phi")?;
        self.phi_t.fill(mesh, Ends::Clamped, &mut d.phi1, "phi_t")?;
        self.u.fill(mesh, Ends::ClampedFree, &mut d.u0, "u")?;
        self.u_t.fill(mesh, Ends::ClampedFree, &mut d.u1, "u_t")?;
        self.v.fill(mesh, Ends::ClampedFree, &mut d.v0, "v")?;
        self.v_t.fill(mesh, Ends::ClampedFree, &mut d.v1, "v_t")?;
        Ok(d)
    }
}

/// Past displacement for `t < 0`, as a multiple of the initial profile.
#[derive(Debug, Clone, Copy, Default, PartialEq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HistoryKind {
    /// At rest in the initial configuration.
    #[default]
    Constant,
    /// `(1 - rate s) u0(x)`
    Linear,
    /// `exp(-rate s) u0(x)`
    Exponential,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HistorySection {
    pub kind: HistoryKind,
    /// 1/s
    pub rate: f64,
}

impl Default for HistorySection {
    fn default() -> Self {
        HistorySection {
            kind: HistoryKind::Constant,
            rate: 1.0,
        }
    }
}

impl HistorySection {
    /// Multiplier of the initial profile at time `-s`.
    pub fn factor(&self, s: f64) -> Option<f64> {
        match self.kind {
            HistoryKind::Constant => None,
            HistoryKind::Linear => Some(1.0 - self.rate * s),
            HistoryKind::Exponential => Some((-self.rate * s).exp()),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConventionEntry {
    #[default]
    Dimensional,
    AsPrinted,
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnergySection {
    /// Scaling of the boundary term in the clamped-end memory norm.
    pub convention: ConventionEntry,
    /// Include `(3/2) b |phi_x|^2` in the elastic energy.
    pub phi_flexural: bool,
}

impl EnergySection {
    pub fn convention(&self) -> ExponentConvention {
        match self.convention {
            ConventionEntry::Dimensional => ExponentConvention::Dimensional,
            ConventionEntry::AsPrinted => ExponentConvention::AsPrinted,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
    /// Energy samples every `stride` steps (forced to 1 in verify mode).
    pub stride: usize,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: PathBuf::from("out"),
            stride: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySection {
    /// Absolute identity tolerance; default `1e-9 max(1, E0)`.
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitSection {
    /// Window start as a fraction of the run length.
    pub window_start: f64,
    pub floor_factor: f64,
}

impl Default for FitSection {
    fn default() -> Self {
        let d = FitOptions::default();
        FitSection {
            window_start: d.window_start,
            floor_factor: d.floor_factor,
        }
    }
}

impl FitSection {
    pub fn options(&self) -> FitOptions {
        FitOptions {
            window_start: self.window_start,
            floor_factor: self.floor_factor,
        }
    }
}

/// Refinement ladder; every level runs to `t_end` with `dt = courant * h`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergeSection {
    pub levels: Vec<usize>,
    #[serde(default = "half")]
    pub courant: f64,
    pub t_end: f64,
    /// Accepted order range; the run fails outside it.
    pub order_range: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(default, rename = "variant")]
    pub variants: Vec<Variant>,
}

/// Kernel pair replacing `[kernel]`, with optional overrides.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Variant {
    pub name: String,
    pub phi: KernelEntry,
    pub psi: KernelEntry,
    pub gamma: Option<f64>,
    pub depth: Option<usize>,
}

fn one() -> f64 {
    1.0
}
fn one_u32() -> u32 {
    1
}
fn half() -> f64 {
    0.5
}
fn quarter() -> f64 {
    0.25
}

/// Everything a single run needs, derived from the config.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub name: String,
    pub params: MaterialParams,
    pub phi: KernelSpec,
    pub psi: KernelSpec,
    pub depth: Option<usize>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::config(format!("parse error: {e}")))
    }

    pub fn integrator(&self) -> IntegratorConfig {
        IntegratorConfig {
            dt: self.integrator.dt,
            beta: self.integrator.beta,
            varsigma: self.integrator.varsigma,
            steps: self.integrator.steps,
        }
    }

    pub fn mesh(&self) -> Result<Mesh, CliError> {
        Ok(build_mesh(self.mesh.interior, self.mesh.length)?)
    }

    /// The base run described by `[material]` and `[kernel]`.
    pub fn base_run(&self) -> RunSpec {
        RunSpec {
            name: "base".into(),
            params: self.material.into(),
            phi: self.kernel.phi.spec(),
            psi: self.kernel.psi.spec(),
            depth: self.memory.depth,
        }
    }

    pub fn sweep_runs(&self) -> Vec<RunSpec> {
        let base = self.base_run();
        self.sweep
            .iter()
            .flat_map(|s| &s.variants)
            .map(|v| RunSpec {
                name: v.name.clone(),
                params: MaterialParams {
                    gamma: v.gamma.unwrap_or(base.params.gamma),
                    ..base.params
                },
                phi: v.phi.spec(),
                psi: v.psi.spec(),
                depth: v.depth.or(base.depth),
            })
            .collect()
    }

    /// Kernel weights for `run` on time step `dt`.
    pub fn weights(&self, run: &RunSpec, dt: f64) -> Result<MemoryWeights, CliError> {
        let sample = |k: &KernelSpec| match run.depth {
            Some(n) => sample_weights_with_depth(k, dt, n),
            None => sample_weights(k, dt, self.memory.tail_tol, self.memory.max_depth),
        };
        Ok(MemoryWeights::new(sample(&run.phi)?, sample(&run.psi)?)?)
    }

    fn check_basic(&self) -> Result<(), CliError> {
        self.material().validate()?;
        self.integrator().validate()?;
        if !(self.mesh.length.is_finite() && self.mesh.length > 0.0) {
            return Err(CliError::config(format!(
                "mesh.length must be > 0, got {}",
                self.mesh.length
            )));
        }
        if self.integrator.steps == 0 {
            return Err(CliError::config("integrator.steps must be >= 1"));
        }
        if self.output.stride == 0 {
            return Err(CliError::config("output.stride must be >= 1"));
        }
        if !(self.memory.tail_tol > 0.0 && self.memory.tail_tol < 1.0) {
            return Err(CliError::config(format!(
                "memory.tail_tol must lie in (0, 1), got {}",
                self.memory.tail_tol
            )));
        }
        if matches!(self.memory.depth, Some(0)) {
            return Err(CliError::config("memory.depth must be >= 1"));
        }
        if !(self.fit.window_start >= 0.0 && self.fit.window_start < 1.0) {
            return Err(CliError::config("fit.window_start must lie in [0, 1)"));
        }
        if self.history.kind != HistoryKind::Constant
            && !(self.history.rate.is_finite() && self.history.rate >= 0.0)
        {
            return Err(CliError::config("history.rate must be finite and >= 0"));
        }
        Ok(())
    }

    fn material(&self) -> MaterialParams {
        self.material.into()
    }

    /// Kernel hypotheses, flexural margin and elastic coercivity of `run`.
    pub fn check_admissible(&self, run: &RunSpec, mesh: &Mesh) -> Result<(), CliError> {
        check_h1_h2(&run.phi, &run.psi, &run.params).map_err(|e| CliError::from(e).context(&run.name))?;
        let ops = assemble_blocks(mesh, &run.params)?;
        let (g1, g2) = (total_mass(&run.phi)?, total_mass(&run.psi)?);
        let c = check_coercivity(&ops, g1, g2)?;
        if !c.admissible {
            return Err(CliError::admissibility(format!(
                "{}: elastic coercivity k0 > 0 violated (k0 = {:.6e} with g1_total = {g1}, g2_total = {g2})",
                run.name, c.k0_estimate
            )));
        }
        Ok(())
    }
}

/// Reads, parses and validates a config. Every admissibility condition is
/// checked here, before any stepping.
pub fn parse_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    let cfg = RunConfig::from_toml(&text)?;
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        self.check_basic()?;
        let mesh = self.mesh()?;
        self.initial.build(&mesh)?.check(&mesh).map_err(CliError::from)?;
        self.check_admissible(&self.base_run(), &mesh)?;
        // depth must fit the cap before any run starts
        self.weights(&self.base_run(), self.integrator.dt)?;
        if let Some(c) = &self.converge {
            self.check_ladder(c)?;
            for &j in &c.levels {
                self.check_admissible(&self.base_run(), &build_mesh(j, self.mesh.length)?)?;
            }
        }
        if let Some(s) = &self.sweep {
            let mut seen = std::collections::BTreeSet::new();
            for v in &s.variants {
                if !seen.insert(v.name.as_str()) {
                    return Err(CliError::config(format!(
                        "sweep variant name '{}' is repeated",
                        v.name
                    )));
                }
                if v.name.is_empty()
                    || !v
                        .name
                        .chars()
                        .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
                {
                    return Err(CliError::config(format!(
                        "sweep variant name '{}' must be non-empty [A-Za-z0-9_-]",
                        v.name
                    )));
                }
            }
            for run in self.sweep_runs() {
                run.params.validate()?;
                self.check_admissible(&run, &mesh)?;
                self.weights(&run, self.integrator.dt)?;
            }
        }
        Ok(())
    }

    /// Levels must be increasing, at least two, and nested: each level's
    /// cell count divides the next one's.
    pub fn check_ladder(&self, c: &ConvergeSection) -> Result<(), CliError> {
        if c.levels.len() < 2 {
            return Err(CliError::config(format!(
                "converge.levels needs at least two levels, got {}",
                c.levels.len()
            )));
        }
        for w in c.levels.windows(2) {
            let (a, b) = (w[0] + 1, w[1] + 1);
            if b <= a || b % a != 0 {
                return Err(CliError::config(format!(
                    "converge.levels are not nested: {} cells do not refine {} cells",
                    b, a
                )));
            }
        }
        if !(c.courant > 0.0 && c.t_end > 0.0) {
            return Err(CliError::config(
                "converge.courant and converge.t_end must be > 0",
            ));
        }
        for &j in &c.levels {
            let h = self.mesh.length / (j + 1) as f64;
            let steps = c.t_end / (c.courant * h);
            if (steps - steps.round()).abs() > 1e-9 * steps {
                return Err(CliError::config(format!(
                    "converge.t_end = {} is not a whole number of steps at J = {j}",
                    c.t_end
                )));
            }
        }
        Ok(())
    }
}
