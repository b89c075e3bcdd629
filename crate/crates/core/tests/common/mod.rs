#![allow(dead_code)]

pub mod oracle;

use nalgebra::{DMatrix, DVector};
use timoslip::*;

pub const PI: f64 = std::f64::consts::PI;

pub fn params() -> MaterialParams {
    MaterialParams {
        rho1: 1.0,
        rho2: 1.0,
        k: 2.0,
        b: 2.0,
        delta: 1.0,
        gamma: 1.0,
    }
}

pub fn conservative() -> MaterialParams {
    MaterialParams {
        gamma: 0.0,
        ..params()
    }
}

pub fn smooth_initial(mesh: &Mesh) -> InitialData {
    InitialData::from_fn(mesh, |x| {
        [
            (PI * x).sin(),
            0.5 * (2.0 * PI * x).sin(),
            0.3 * (0.5 * PI * x).sin(),
            0.0,
            (0.5 * PI * x).sin(),
            -0.2 * (1.5 * PI * x).sin(),
        ]
    })
}

pub fn memory(kernel: &KernelSpec, dt: f64, depth: usize) -> MemoryWeights {
    MemoryWeights::new(
        sample_weights_with_depth(kernel, dt, depth).unwrap(),
        sample_weights_with_depth(kernel, dt, depth).unwrap(),
    )
    .unwrap()
}

/// Cell operators written out by hand: (D_phi, D_psi, P), each (J+1) rows.
pub fn cell_operators(j: usize, h: f64) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let mut dphi = DMatrix::zeros(j + 1, j);
    let mut dpsi = DMatrix::zeros(j + 1, j + 1);
    let mut avg = DMatrix::zeros(j + 1, j + 1);
    for c in 0..=j {
        // cell c+1 between nodes c and c+1 (node 0 clamped)
        if c < j {
            dphi[(c, c)] = 1.0 / h;
        }
        if c >= 1 {
            dphi[(c, c - 1)] = -1.0 / h;
            dpsi[(c, c - 1)] = -1.0 / h;
            avg[(c, c - 1)] = 0.5;
        }
        dpsi[(c, c)] = 1.0 / h;
        avg[(c, c)] = 0.5;
    }
    (dphi, dpsi, avg)
}

/// Stiffness from its block definition in field order.
pub fn hand_stiffness(j: usize, h: f64, p: &MaterialParams) -> DMatrix<f64> {
    let (dphi, dpsi, avg) = cell_operators(j, h);
    let n = 3 * j + 2;
    let mut shear = DMatrix::zeros(j + 1, n);
    shear.view_mut((0, 0), (j + 1, j)).copy_from(&dphi);
    shear.view_mut((0, j), (j + 1, j + 1)).copy_from(&avg);
    shear.view_mut((0, 2 * j + 1), (j + 1, j + 1)).copy_from(&(-&avg));
    let mut fpsi = DMatrix::zeros(j + 1, n);
    fpsi.view_mut((0, j), (j + 1, j + 1)).copy_from(&dpsi);
    let mut fv = DMatrix::zeros(j + 1, n);
    fv.view_mut((0, 2 * j + 1), (j + 1, j + 1)).copy_from(&dpsi);
    let mut ad = DMatrix::zeros(j + 1, n);
    ad.view_mut((0, 2 * j + 1), (j + 1, j + 1)).copy_from(&avg);
    3.0 * p.k * shear.transpose() * &shear
        + 3.0 * p.b * fpsi.transpose() * &fpsi
        + p.b * fv.transpose() * &fv
        + 4.0 * p.delta * ad.transpose() * &ad
}

pub fn hand_mass_damping(j: usize, p: &MaterialParams) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = 3 * j + 2;
    let mut m = DMatrix::zeros(n, n);
    let mut c = DMatrix::zeros(n, n);
    for i in 0..j {
        m[(i, i)] = 3.0 * p.rho1;
    }
    for i in 0..=j {
        let w = if i == j { 0.5 } else { 1.0 };
        m[(j + i, j + i)] = 3.0 * p.rho2 * w;
        m[(2 * j + 1 + i, 2 * j + 1 + i)] = p.rho2 * w;
        c[(2 * j + 1 + i, 2 * j + 1 + i)] = 4.0 * p.gamma * w;
    }
    (m, c)
}

/// Memory block `G` for weights `(w1, w2)` from hand stencils.
pub fn hand_memory_block(j: usize, h: f64, w1: f64, w2: f64) -> DMatrix<f64> {
    let (dphi, dpsi, _) = cell_operators(j, h);
    let n = 3 * j + 2;
    let mut g = DMatrix::zeros(n, n);
    g.view_mut((0, 0), (j, j))
        .copy_from(&(-w1 * dphi.transpose() * &dphi));
    g.view_mut((j, j), (j + 1, j + 1))
        .copy_from(&(-w2 * dpsi.transpose() * &dpsi));
    g
}

pub fn dvec(x: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(x)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}
