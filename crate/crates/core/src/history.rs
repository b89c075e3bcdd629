//! Truncated displacement histories of `phi` and `psi` and the discrete
//! convolution.

use crate::kernels::KernelWeights;
use crate::spatial::{Layout, Mesh, SpatialOperators};

/// Ring of the last `N + 1` memory-carrying displacements, most recent
/// first: slot `j` holds `(phi, psi)` at step `n - j`.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryBuffer {
    depth: usize,
    n_phi: usize,
    width: usize,
    head: usize,
    data: Vec<f64>,
}

/// Prescribed past `(x, s) -> (phi, u, v)` at time `-s`.
pub type HistoryFn<'a> = &'a dyn Fn(f64, f64) -> [f64; 3];

impl HistoryBuffer {
    /// Buffer of `depth + 1` copies of `current` (a full state vector).
    pub fn constant(layout: Layout, depth: usize, current: &[f64]) -> Self {
        assert!(depth >= 1, "memory depth must be >= 1");
        let width = layout.n_memory();
        let mut data = Vec::with_capacity((depth + 1) * width);
        for _ in 0..=depth {
            data.extend_from_slice(&current[..width]);
        }
        HistoryBuffer {
            depth,
            n_phi: layout.n_phi(),
            width,
            head: 0,
            data,
        }
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Entries per slot (`phi` then `psi`).
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn n_phi(&self) -> usize {
        self.n_phi
    }

    #[inline]
    fn physical(&self, j: usize) -> usize {
        (self.head + j) % (self.depth + 1)
    }

    /// Displacement `(phi, psi)` at step `n - j`, `j` in `0..=N`.
    #[inline]
    pub fn slot(&self, j: usize) -> &[f64] {
        debug_assert!(j <= self.depth);
        let p = self.physical(j);
        &self.data[p * self.width..(p + 1) * self.width]
    }

    fn slot_mut(&mut self, j: usize) -> &mut [f64] {
        let p = self.physical(j);
        &mut self.data[p * self.width..(p + 1) * self.width]
    }

    /// Makes `disp` (a full state vector) the newest slot, evicting the oldest.
    pub fn push(&mut self, disp: &[f64]) {
        self.head = (self.head + self.depth) % (self.depth + 1);
        let w = self.width;
        self.slot_mut(0).copy_from_slice(&disp[..w]);
    }

    /// `eta^{n,j} = u^n - u^{n-j}` on both memory fields.
    pub fn eta_into(&self, j: usize, out: &mut [f64]) {
        let (a, b) = (self.slot(0), self.slot(j));
        for ((o, x), y) in out.iter_mut().zip(a).zip(b) {
            *o = x - y;
        }
    }

    pub fn eta(&self, j: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.width];
        self.eta_into(j, &mut out);
        out
    }
}

/// Fills the history from the prescribed past, or with the current
/// displacement when no past is given. Slot 0 is always `current`.
pub fn init_history(
    mesh: &Mesh,
    depth: usize,
    dt: f64,
    current: &[f64],
    past: Option<HistoryFn<'_>>,
) -> HistoryBuffer {
    let l = mesh.layout();
    let mut buf = HistoryBuffer::constant(l, depth, current);
    if let Some(f) = past {
        let n_phi = l.n_phi();
        for j in 1..=depth {
            let s = j as f64 * dt;
            let slot = buf.slot_mut(j);
            for i in 1..=n_phi {
                slot[i - 1] = f(mesh.x(i), s)[0];
            }
            for i in 1..=l.n_psi() {
                let [_, u, v] = f(mesh.x(i), s);
                slot[n_phi + i - 1] = v - u;
            }
        }
    }
    buf
}

/// Lazy `eta^{n,j}` for `j = 1..=N`.
pub fn eta_z_views(buf: &HistoryBuffer) -> impl Iterator<Item = (usize, Vec<f64>)> + '_ {
    (1..=buf.depth()).map(move |j| (j, buf.eta(j)))
}

/// Threshold above which the weighted history sums are compensated.
pub const COMPENSATED_DEPTH: usize = 10_000;

/// Weighted sums `sum_j omega_j u^{n+1-j}` over both memory fields,
/// accumulated oldest to newest.
pub fn weighted_history(buf: &HistoryBuffer, w_phi: &KernelWeights, w_psi: &KernelWeights, out: &mut [f64]) {
    let n_phi = buf.n_phi();
    let width = buf.width();
    assert_eq!(out.len(), width);
    out.iter_mut().for_each(|v| *v = 0.0);
    let depth = buf.depth();
    if depth > COMPENSATED_DEPTH {
        let mut comp = vec![0.0; width];
        for j in (1..=depth).rev() {
            let (a, b) = (w_phi.omega(j), w_psi.omega(j));
            let slot = buf.slot(j - 1);
            for i in 0..width {
                let w = if i < n_phi { a } else { b };
                let term = w * slot[i];
                let t = out[i] + term;
                if out[i].abs() >= term.abs() {
                    comp[i] += (out[i] - t) + term;
                } else {
                    comp[i] += (term - t) + out[i];
                }
                out[i] = t;
            }
        }
        for (o, c) in out.iter_mut().zip(&comp) {
            *o += c;
        }
    } else {
        for j in (1..=depth).rev() {
            let (a, b) = (w_phi.omega(j), w_psi.omega(j));
            let slot = buf.slot(j - 1);
            let (sp, ss) = slot.split_at(n_phi);
            let (op, os) = out.split_at_mut(n_phi);
            if a != 0.0 {
                for (o, x) in op.iter_mut().zip(sp) {
                    *o += a * x;
                }
            }
            if b != 0.0 {
                for (o, x) in os.iter_mut().zip(ss) {
                    *o += b * x;
                }
            }
        }
    }
}

/// `sum_j G_j u^{n+1-j} = -(B_phi sum_j w1_j phi^{n+1-j}, B_psi sum_j w2_j
/// psi^{n+1-j}, 0)` as a full state vector.
pub fn memory_forcing(
    buf: &HistoryBuffer,
    ops: &SpatialOperators,
    w_phi: &KernelWeights,
    w_psi: &KernelWeights,
    out: &mut [f64],
) {
    let mut acc = vec![0.0; buf.width()];
    weighted_history(buf, w_phi, w_psi, &mut acc);
    apply_memory_forms(ops, &acc, out);
}

/// `out = -(B_phi x_phi, B_psi x_psi, 0)` for a memory-part vector `x`.
pub fn apply_memory_forms(ops: &SpatialOperators, x: &[f64], out: &mut [f64]) {
    let l = ops.layout;
    let n_phi = l.n_phi();
    ops.phi_form.apply(&x[..n_phi], &mut out[l.phi()]);
    ops.psi_form.apply(&x[n_phi..], &mut out[l.psi()]);
    for o in &mut out[..l.n_memory()] {
        *o = -*o;
    }
    out[l.v()].iter_mut().for_each(|v| *v = 0.0);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{sample_weights_with_depth, KernelSpec};
    use crate::spatial::{assemble_blocks, build_mesh, MaterialParams};

    #[test]
    fn push_evicts_oldest() {
        let m = build_mesh(2, 1.0).unwrap();
        let l = m.layout();
        let mut u = vec![0.0; l.dim()];
        let mut buf = HistoryBuffer::constant(l, 2, &u);
        for step in 1..=4 {
            u.iter_mut().for_each(|v| *v = step as f64);
            buf.push(&u);
        }
        assert_eq!(buf.slot(0)[0], 4.0);
        assert_eq!(buf.slot(1)[0], 3.0);
        assert_eq!(buf.slot(2)[0], 2.0);
        assert_eq!(buf.slot(0).len(), l.n_memory());
    }

    #[test]
    fn single_slot_depth_holds_two() {
        let m = build_mesh(3, 1.0).unwrap();
        let buf = HistoryBuffer::constant(m.layout(), 1, &vec![0.0; m.layout().dim()]);
        assert_eq!(buf.depth() + 1, 2);
    }

    #[test]
    fn ramp_history_eta() {
        let m = build_mesh(3, 1.0).unwrap();
        let l = m.layout();
        let pi = std::f64::consts::PI;
        let f = |x: f64, s: f64| [(1.0 - s) * (pi * x).sin(), 0.0, 0.0];
        let mut u0 = vec![0.0; l.dim()];
        for i in 1..=3 {
            u0[l.phi_at(i)] = (pi * m.x(i)).sin();
        }
        let buf = init_history(&m, 2, 0.5, &u0, Some(&f));
        let eta = buf.eta(1);
        for i in 1..=3 {
            assert!((eta[i - 1] - 0.5 * (pi * m.x(i)).sin()).abs() < 1e-15);
        }
    }

    #[test]
    fn single_weight_forcing_is_scaled_second_difference() {
        let m = build_mesh(4, 1.0).unwrap();
        let ops = assemble_blocks(&m, &MaterialParams::unit()).unwrap();
        let l = ops.layout;
        let dt = 0.1;
        // g^0 = g^1 = 1 so that g^{1/2} = 1
        let w1 = sample_weights_with_depth(
            &KernelSpec::Tabulated {
                spacing: 1.0,
                samples: vec![1.0],
            },
            dt,
            1,
        )
        .unwrap();
        let w2 = sample_weights_with_depth(&KernelSpec::none(), dt, 1).unwrap();
        let mut u = vec![0.0; l.dim()];
        u[l.phi()].iter_mut().for_each(|v| *v = 1.0);
        let buf = HistoryBuffer::constant(l, 1, &u);
        let mut out = vec![0.0; l.dim()];
        memory_forcing(&buf, &ops, &w1, &w2, &mut out);
        let inv_h2 = 1.0 / (m.h * m.h);
        let expect = [-inv_h2, 0.0, 0.0, -inv_h2];
        for i in 0..4 {
            assert!((out[i] - dt * expect[i]).abs() < 1e-12);
        }
        assert!(out[l.phi().end..].iter().all(|&v| v == 0.0));
    }
}
