//! Mesh, difference operators and the assembled mass, damping, stiffness
//! and memory forms.
//!
//! Unknowns are stored field by field: `phi` on the interior nodes
//! `1..=J`, then `psi` and `v` on nodes `1..=J+1`. Both ends clamp `phi`;
//! `psi` and `v` vanish at `x = 0` and are free at `x = L`, where the last
//! node carries half a cell of mass. Cell `c` (`1..=J+1`) spans
//! `[x_{c-1}, x_c]`.

use nalgebra::DMatrix;

use crate::banded::{smallest_generalized_eigenvalue, BandCholesky, SymBand};
use crate::error::{Error, Result};

/// Uniform grid `x_j = j h`, `h = L / (J + 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mesh {
    /// Interior node count `J`.
    pub interior: usize,
    pub length: f64,
    pub h: f64,
}

impl Mesh {
    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.interior + 1).map(|j| self.x(j)).collect()
    }

    #[inline]
    pub fn x(&self, j: usize) -> f64 {
        j as f64 * self.h
    }

    pub fn layout(&self) -> Layout {
        Layout { j: self.interior }
    }
}

pub fn build_mesh(interior: usize, length: f64) -> Result<Mesh> {
    if interior < 2 {
        return Err(Error::Config(format!(
            "mesh needs at least 2 interior nodes, got {interior}"
        )));
    }
    if !(length.is_finite() && length > 0.0) {
        return Err(Error::Config(format!("beam length must be > 0, got {length}")));
    }
    Ok(Mesh {
        interior,
        length,
        h: length / (interior as f64 + 1.0),
    })
}

/// Offsets of the three fields inside a state vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    j: usize,
}

impl Layout {
    pub fn n_phi(&self) -> usize {
        self.j
    }
    pub fn n_psi(&self) -> usize {
        self.j + 1
    }
    pub fn n_v(&self) -> usize {
        self.j + 1
    }
    pub fn dim(&self) -> usize {
        3 * self.j + 2
    }
    /// Length of the memory-carrying part (`phi` then `psi`).
    pub fn n_memory(&self) -> usize {
        2 * self.j + 1
    }
    pub fn phi(&self) -> std::ops::Range<usize> {
        0..self.j
    }
    pub fn psi(&self) -> std::ops::Range<usize> {
        self.j..2 * self.j + 1
    }
    pub fn v(&self) -> std::ops::Range<usize> {
        2 * self.j + 1..3 * self.j + 2
    }
    /// Index of `phi_i`, `i` in `1..=J`.
    pub fn phi_at(&self, i: usize) -> usize {
        i - 1
    }
    /// Index of `psi_i`, `i` in `1..=J+1`.
    pub fn psi_at(&self, i: usize) -> usize {
        self.j + i - 1
    }
    /// Index of `v_i`, `i` in `1..=J+1`.
    pub fn v_at(&self, i: usize) -> usize {
        2 * self.j + i
    }
    /// Node-interleaved position used by the band solver.
    pub fn band_index(&self, idx: usize) -> usize {
        if idx < self.j {
            3 * idx
        } else if idx < 2 * self.j + 1 {
            let i = idx - self.j;
            if i < self.j {
                3 * i + 1
            } else {
                3 * self.j
            }
        } else {
            let i = idx - 2 * self.j - 1;
            if i < self.j {
                3 * i + 2
            } else {
                3 * self.j + 1
            }
        }
    }
    /// Lumped quadrature weight of node `i` (`1..=J+1`) for `psi`, `v`.
    pub fn end_weight(&self, i: usize) -> f64 {
        if i == self.j + 1 {
            0.5
        } else {
            1.0
        }
    }
}

/// Constants of the beam model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialParams {
    pub rho1: f64,
    pub rho2: f64,
    /// Shear stiffness.
    pub k: f64,
    /// Flexural stiffness.
    pub b: f64,
    /// Adhesive stiffness.
    pub delta: f64,
    /// Slip damping.
    pub gamma: f64,
}

impl MaterialParams {
    pub fn unit() -> Self {
        MaterialParams {
            rho1: 1.0,
            rho2: 1.0,
            k: 1.0,
            b: 1.0,
            delta: 1.0,
            gamma: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("rho1", self.rho1),
            ("rho2", self.rho2),
            ("k", self.k),
            ("b", self.b),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be > 0, got {v}")));
            }
        }
        for (name, v) in [("delta", self.delta), ("gamma", self.gamma)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("{name} must be >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// The `J x J` difference and averaging matrices of the scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct DifferenceOps {
    pub h: f64,
    pub dminus: DMatrix<f64>,
    pub dplus: DMatrix<f64>,
    pub d0sq: DMatrix<f64>,
    pub pminus: DMatrix<f64>,
    pub pplus: DMatrix<f64>,
    pub q: DMatrix<f64>,
}

pub fn assemble_difference_ops(mesh: &Mesh) -> DifferenceOps {
    let n = mesh.interior;
    let h = mesh.h;
    let inv_h = 1.0 / h;
    let inv_h2 = inv_h * inv_h;
    let dminus = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            inv_h
        } else if j + 1 == i {
            -inv_h
        } else {
            0.0
        }
    });
    let dplus = -dminus.transpose();
    let d0sq = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            -2.0 * inv_h2
        } else if i.abs_diff(j) == 1 {
            inv_h2
        } else {
            0.0
        }
    });
    let pminus = DMatrix::from_fn(n, n, |i, j| if i == j || j + 1 == i { 0.5 } else { 0.0 });
    let pplus = pminus.transpose();
    let q = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            if i + 1 == n {
                0.25
            } else {
                0.5
            }
        } else if i.abs_diff(j) == 1 {
            0.25
        } else {
            0.0
        }
    });
    DifferenceOps {
        h,
        dminus,
        dplus,
        d0sq,
        pminus,
        pplus,
        q,
    }
}

/// A linear functional of the state supported on one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellRow {
    len: usize,
    idx: [usize; 6],
    coef: [f64; 6],
}

impl CellRow {
    fn new() -> Self {
        CellRow {
            len: 0,
            idx: [0; 6],
            coef: [0.0; 6],
        }
    }

    fn push(&mut self, i: usize, c: f64) {
        self.idx[self.len] = i;
        self.coef[self.len] = c;
        self.len += 1;
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.idx[..self.len]
            .iter()
            .copied()
            .zip(self.coef[..self.len].iter().copied())
    }

    #[inline]
    pub fn dot(&self, x: &[f64]) -> f64 {
        let mut s = 0.0;
        for k in 0..self.len {
            s += self.coef[k] * x[self.idx[k]];
        }
        s
    }
}

/// Which cell-wise forms make up the elastic energy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellForm {
    /// `phi_x + psi - v`
    Shear,
    /// `psi_x`
    PsiGradient,
    /// `v_x`
    VGradient,
    /// cell average of `v`
    Adhesive,
    /// `phi_x`
    PhiGradient,
}

/// Rows of one cell form over all cells `1..=J+1`.
pub fn cell_rows(layout: Layout, h: f64, form: CellForm) -> Vec<CellRow> {
    let j = layout.n_phi();
    let inv_h = 1.0 / h;
    (1..=j + 1)
        .map(|c| {
            let mut r = CellRow::new();
            let phi_grad = |r: &mut CellRow| {
                if c <= j {
                    r.push(layout.phi_at(c), inv_h);
                }
                if c >= 2 {
                    r.push(layout.phi_at(c - 1), -inv_h);
                }
            };
            match form {
                CellForm::Shear => {
                    phi_grad(&mut r);
                    r.push(layout.psi_at(c), 0.5);
                    if c >= 2 {
                        r.push(layout.psi_at(c - 1), 0.5);
                    }
                    r.push(layout.v_at(c), -0.5);
                    if c >= 2 {
                        r.push(layout.v_at(c - 1), -0.5);
                    }
                }
                CellForm::PsiGradient => {
                    r.push(layout.psi_at(c), inv_h);
                    if c >= 2 {
                        r.push(layout.psi_at(c - 1), -inv_h);
                    }
                }
                CellForm::VGradient => {
                    r.push(layout.v_at(c), inv_h);
                    if c >= 2 {
                        r.push(layout.v_at(c - 1), -inv_h);
                    }
                }
                CellForm::Adhesive => {
                    r.push(layout.v_at(c), 0.5);
                    if c >= 2 {
                        r.push(layout.v_at(c - 1), 0.5);
                    }
                }
                CellForm::PhiGradient => phi_grad(&mut r),
            }
            r
        })
        .collect()
}

/// Symmetric tridiagonal matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiag {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl SymTridiag {
    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.diag.len();
        for i in 0..n {
            let mut s = self.diag[i] * x[i];
            if i > 0 {
                s += self.off[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                s += self.off[i] * x[i + 1];
            }
            y[i] = s;
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                self.diag[i]
            } else if i.abs_diff(j) == 1 {
                self.off[i.min(j)]
            } else {
                0.0
            }
        })
    }
}

/// `|x|^2` of the memory form on `phi`: squared cell gradients with both
/// ends clamped.
pub fn phi_gradient_sq(x: &[f64], h: f64) -> f64 {
    let n = x.len();
    let mut s = x[0] * x[0] + x[n - 1] * x[n - 1];
    for w in x.windows(2) {
        let d = w[1] - w[0];
        s += d * d;
    }
    s / (h * h)
}

/// `|x|^2` of the memory form on `psi`: squared cell gradients, clamped at
/// the left end only.
pub fn psi_gradient_sq(x: &[f64], h: f64) -> f64 {
    let mut s = x[0] * x[0];
    for w in x.windows(2) {
        let d = w[1] - w[0];
        s += d * d;
    }
    s / (h * h)
}

/// Assembled operators of one mesh and material.
#[derive(Debug, Clone)]
pub struct SpatialOperators {
    pub mesh: Mesh,
    pub params: MaterialParams,
    pub layout: Layout,
    /// Diagonal of `M`.
    pub mass: Vec<f64>,
    /// Diagonal of `C`.
    pub damping: Vec<f64>,
    /// `K` in node-interleaved band storage.
    pub stiffness: SymBand,
    /// Memory form on `phi` (`-D0^2`).
    pub phi_form: SymTridiag,
    /// Memory form on `psi` (`-D+D-` extended to the free end).
    pub psi_form: SymTridiag,
    /// Adds the `(3/2) b |D- phi|^2` term to `K` (off by default).
    pub phi_flexural: bool,
}

/// Half-bandwidth of every assembled form in interleaved order.
pub const BANDWIDTH: usize = 5;

impl SpatialOperators {
    pub fn dim(&self) -> usize {
        self.layout.dim()
    }

    /// `y = K x` with `x`, `y` in field order.
    pub fn apply_stiffness(&self, x: &[f64], y: &mut [f64]) {
        let n = self.dim();
        let mut xb = vec![0.0; n];
        let mut yb = vec![0.0; n];
        for (i, xi) in x.iter().enumerate() {
            xb[self.layout.band_index(i)] = *xi;
        }
        self.stiffness.mul_vec(&xb, &mut yb);
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = yb[self.layout.band_index(i)];
        }
    }

    /// `K` as a dense matrix in field order.
    pub fn stiffness_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let l = self.layout;
        DMatrix::from_fn(n, n, |i, j| self.stiffness.get(l.band_index(i), l.band_index(j)))
    }

    pub fn mass_dense(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&nalgebra::DVector::from_vec(self.mass.clone()))
    }

    pub fn damping_dense(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&nalgebra::DVector::from_vec(self.damping.clone()))
    }

    /// Memory block of weight index `j` in field order:
    /// `diag(-w1 B_phi, -w2 B_psi, 0)` with `w = dt g^{j-1/2}`.
    pub fn memory_block_dense(&self, omega_phi: f64, omega_psi: f64) -> DMatrix<f64> {
        let n = self.dim();
        let l = self.layout;
        let mut g = DMatrix::zeros(n, n);
        let bp = self.phi_form.to_dense();
        let bs = self.psi_form.to_dense();
        g.view_mut((l.phi().start, l.phi().start), (l.n_phi(), l.n_phi()))
            .copy_from(&(-omega_phi * bp));
        g.view_mut((l.psi().start, l.psi().start), (l.n_psi(), l.n_psi()))
            .copy_from(&(-omega_psi * bs));
        g
    }

    /// Elastic energy terms `(shear, flexural psi, flexural v, adhesive,
    /// printed phi flexural)` of `disp`.
    pub fn elastic_terms(&self, disp: &[f64]) -> [f64; 5] {
        let p = &self.params;
        let l = self.layout;
        let h = self.mesh.h;
        let sum_sq = |form| {
            cell_rows(l, h, form)
                .iter()
                .map(|r| {
                    let s = r.dot(disp);
                    s * s
                })
                .sum::<f64>()
        };
        let printed = if self.phi_flexural {
            let phi = &disp[l.phi()];
            let mut s = phi[0] * phi[0];
            for w in phi.windows(2) {
                s += (w[1] - w[0]) * (w[1] - w[0]);
            }
            1.5 * p.b * s / (h * h)
        } else {
            0.0
        };
        [
            1.5 * p.k * sum_sq(CellForm::Shear),
            1.5 * p.b * sum_sq(CellForm::PsiGradient),
            0.5 * p.b * sum_sq(CellForm::VGradient),
            2.0 * p.delta * sum_sq(CellForm::Adhesive),
            printed,
        ]
    }
}

fn add_form(band: &mut SymBand, layout: Layout, rows: &[CellRow], w: f64) {
    for r in rows {
        for (i, ci) in r.entries() {
            for (j, cj) in r.entries() {
                let (bi, bj) = (layout.band_index(i), layout.band_index(j));
                if bi >= bj {
                    band.add(bi, bj, w * ci * cj);
                }
            }
        }
    }
}

fn stiffness_band(mesh: &Mesh, params: &MaterialParams, g1: f64, g2: f64, phi_flexural: bool) -> SymBand {
    let l = mesh.layout();
    let h = mesh.h;
    let mut k = SymBand::zeros(l.dim(), BANDWIDTH);
    add_form(&mut k, l, &cell_rows(l, h, CellForm::Shear), 3.0 * params.k);
    add_form(
        &mut k,
        l,
        &cell_rows(l, h, CellForm::PsiGradient),
        3.0 * (params.b - g2),
    );
    add_form(&mut k, l, &cell_rows(l, h, CellForm::VGradient), params.b);
    add_form(
        &mut k,
        l,
        &cell_rows(l, h, CellForm::Adhesive),
        4.0 * params.delta,
    );
    if g1 != 0.0 {
        add_form(&mut k, l, &cell_rows(l, h, CellForm::PhiGradient), -3.0 * g1);
    }
    if phi_flexural {
        let rows = cell_rows(l, h, CellForm::PhiGradient);
        add_form(&mut k, l, &rows[..l.n_phi()], 3.0 * params.b);
    }
    k
}

fn gradient_form(n: usize, h: f64, free_end: bool) -> SymTridiag {
    let inv_h2 = 1.0 / (h * h);
    let mut diag = vec![2.0 * inv_h2; n];
    if free_end {
        diag[n - 1] = inv_h2;
    }
    SymTridiag {
        diag,
        off: vec![-inv_h2; n - 1],
    }
}

/// Builds `M`, `C`, `K` and the two memory forms.
pub fn assemble_blocks(mesh: &Mesh, params: &MaterialParams) -> Result<SpatialOperators> {
    params.validate()?;
    let l = mesh.layout();
    let mut mass = vec![0.0; l.dim()];
    let mut damping = vec![0.0; l.dim()];
    for i in 1..=l.n_phi() {
        mass[l.phi_at(i)] = 3.0 * params.rho1;
    }
    for i in 1..=l.n_psi() {
        let w = l.end_weight(i);
        mass[l.psi_at(i)] = 3.0 * params.rho2 * w;
        mass[l.v_at(i)] = params.rho2 * w;
        damping[l.v_at(i)] = 4.0 * params.gamma * w;
    }
    Ok(SpatialOperators {
        mesh: *mesh,
        params: *params,
        layout: l,
        mass,
        damping,
        stiffness: stiffness_band(mesh, params, 0.0, 0.0, false),
        phi_form: gradient_form(l.n_phi(), mesh.h, false),
        psi_form: gradient_form(l.n_psi(), mesh.h, true),
        phi_flexural: false,
    })
}

impl SpatialOperators {
    /// Enables the `(3/2) b |D- phi|^2` energy term and rebuilds `K`.
    pub fn with_phi_flexural(mut self, on: bool) -> Self {
        self.phi_flexural = on;
        self.stiffness = stiffness_band(&self.mesh, &self.params, 0.0, 0.0, on);
        self
    }
}

/// Outcome of the elastic coercivity check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coercivity {
    /// Smallest generalized eigenvalue of the memory-corrected elastic form
    /// against the gradient form.
    pub k0_estimate: f64,
    pub admissible: bool,
}

/// Corrected elastic form `3k|phi_x+psi-v|^2 + 3(b-g2)|psi_x|^2 + b|v_x|^2
/// + 4 delta |v|^2 - 3 g1 |phi_x|^2` in band storage.
pub fn coercivity_form(ops: &SpatialOperators, g1_total: f64, g2_total: f64) -> SymBand {
    stiffness_band(&ops.mesh, &ops.params, g1_total, g2_total, false)
}

/// Gradient form `|phi_x|^2 + |psi_x|^2 + |v_x|^2` in band storage.
pub fn gradient_metric(ops: &SpatialOperators) -> SymBand {
    let l = ops.layout;
    let h = ops.mesh.h;
    let mut g = SymBand::zeros(l.dim(), BANDWIDTH);
    add_form(&mut g, l, &cell_rows(l, h, CellForm::PhiGradient), 1.0);
    add_form(&mut g, l, &cell_rows(l, h, CellForm::PsiGradient), 1.0);
    add_form(&mut g, l, &cell_rows(l, h, CellForm::VGradient), 1.0);
    g
}

pub fn check_coercivity(ops: &SpatialOperators, g1_total: f64, g2_total: f64) -> Result<Coercivity> {
    let a = coercivity_form(ops, g1_total, g2_total);
    let g = gradient_metric(ops);
    let k0 = smallest_generalized_eigenvalue(&a, &g, 1e-14).map_err(|e| {
        Error::Numerical(format!(
            "coercivity eigenvalue search failed: {e}; h = {}, dim = {}",
            ops.mesh.h,
            ops.dim()
        ))
    })?;
    Ok(Coercivity {
        k0_estimate: k0,
        admissible: k0 > 0.0,
    })
}

/// Value of `g1_total` at which the coercivity constant crosses zero, for a
/// fixed `g2_total`, by bisection to relative width `rel_tol`.
pub fn coercivity_boundary(ops: &SpatialOperators, g2_total: f64, rel_tol: f64) -> Result<f64> {
    let positive = |g1: f64| -> Result<bool> {
        let a = coercivity_form(ops, g1, g2_total);
        let g = gradient_metric(ops);
        // k0 > 0 iff A is positive definite, since G is
        Ok(BandCholesky::factor(&a).is_ok() && g.dim() > 0)
    };
    if !positive(0.0)? {
        return Err(Error::Inadmissible {
            condition: "elastic coercivity k0 > 0".into(),
            detail: "not coercive even without the phi memory".into(),
        });
    }
    let mut lo = 0.0;
    let mut hi = ops.params.k.max(1.0);
    let mut tries = 0;
    while positive(hi)? {
        lo = hi;
        hi *= 2.0;
        tries += 1;
        if tries > 200 {
            return Err(Error::Numerical("coercivity boundary not bracketed".into()));
        }
    }
    while hi - lo > rel_tol * hi {
        let mid = 0.5 * (lo + hi);
        if positive(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
