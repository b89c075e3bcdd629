//! Dense transcriptions used as oracles for the banded pipeline.

use nalgebra::{DMatrix, DVector};
use timoslip::banded::SymBand;
use timoslip::*;

use super::*;

struct Dense {
    m: DMatrix<f64>,
    c: DMatrix<f64>,
    k: DMatrix<f64>,
    g: Vec<DMatrix<f64>>,
}

/// One step of the midpoint form written with dense matrices.
fn dense_step(
    d: &Dense,
    dt: f64,
    hist: &mut Vec<DVector<f64>>,
    u: &DVector<f64>,
    v: &DVector<f64>,
    a: &DVector<f64>,
) -> (DVector<f64>, DVector<f64>, DVector<f64>) {
    let n = u.len();
    let mut force = DVector::zeros(n);
    for (jm1, gj) in d.g.iter().enumerate() {
        force += gj * &hist[jm1];
    }
    let lhs = &d.m + 0.5 * dt * &d.c + 0.25 * dt * dt * &d.k;
    let rhs = -(&d.c * v) - &d.k * (u + 0.5 * dt * v) - force;
    let abar = lhs.lu().solve(&rhs).unwrap();
    let u1 = u + dt * v + 0.5 * dt * dt * &abar;
    let v1 = v + dt * &abar;
    let a1 = 2.0 * &abar - a;
    hist.insert(0, u1.clone());
    hist.pop();
    (u1, v1, a1)
}

/// Largest deviation between `steps` pipeline steps and the dense
/// transcription at `J = 4`, over displacement, velocity and
/// (relative) acceleration, the initial acceleration included.
pub fn pipeline_gap(depth: usize, steps: usize) -> f64 {
    let j = 4;
    let mesh = build_mesh(j, 1.0).unwrap();
    let p = params();
    let ops = assemble_blocks(&mesh, &p).unwrap();
    let dt = 0.05;
    let k1 = KernelSpec::exponential(1.0, 1.5);
    let k2 = KernelSpec::polynomial(0.8, 2.5);
    let mem = MemoryWeights::new(
        sample_weights_with_depth(&k1, dt, depth).unwrap(),
        sample_weights_with_depth(&k2, dt, depth).unwrap(),
    )
    .unwrap();
    let past = |x: f64, s: f64| {
        let f = (-s).exp();
        [
            f * (PI * x).sin(),
            0.2 * f * (0.5 * PI * x).sin(),
            (1.0 + s) * (0.5 * PI * x).sin(),
        ]
    };
    let init = InitialData::from_fn(&mesh, |x| {
        let [a, b, c] = past(x, 0.0);
        [a, 0.3 * (PI * x).sin(), b, 0.1 * x, c, -0.2 * x]
    });
    let mut s = init_state(&ops, &mem, &init, Some(&past)).unwrap();

    let n = 3 * j + 2;
    let (m, c) = hand_mass_damping(j, &p);
    let dense = Dense {
        m,
        c,
        k: hand_stiffness(j, mesh.h, &p),
        g: (1..=depth)
            .map(|jj| hand_memory_block(j, mesh.h, mem.phi.omega(jj), mem.psi.omega(jj)))
            .collect(),
    };
    // full past vectors u^{-k}, k = 0..=N
    let mut hist: Vec<DVector<f64>> = (0..=depth)
        .map(|k| {
            let sk = k as f64 * dt;
            let mut u = DVector::zeros(n);
            for i in 1..=j {
                u[i - 1] = past(mesh.x(i), sk)[0];
            }
            for i in 1..=j + 1 {
                let [_, uu, vv] = past(mesh.x(i), sk);
                u[j + i - 1] = vv - uu;
                u[2 * j + i] = vv;
            }
            u
        })
        .collect();
    let mut u = dvec(&s.disp);
    let mut v = dvec(&s.vel);
    // consistent start: f^0 = sum_j G_j (u^{1-j} + u^{-j}) / 2
    let mut f0 = DVector::zeros(n);
    for (jm1, gj) in dense.g.iter().enumerate() {
        f0 += gj * (0.5 * (&hist[jm1] + &hist[jm1 + 1]));
    }
    let mut a = dense
        .m
        .clone()
        .lu()
        .solve(&(-(&dense.c * &v) - &dense.k * &u - f0))
        .unwrap();
    let acc_gap =
        |got: &[f64], want: &DVector<f64>| max_abs_diff(got, want.as_slice()) / want.amax().max(1.0);
    let mut gap = acc_gap(&s.acc, &a);

    let mut it = Integrator::new(&ops, &mem, IntegratorConfig::new(dt, steps)).unwrap();
    for _ in 0..steps {
        it.step(&mut s).unwrap();
        let (u1, v1, a1) = dense_step(&dense, dt, &mut hist, &u, &v, &a);
        u = u1;
        v = v1;
        a = a1;
        gap = gap
            .max(max_abs_diff(&s.disp, u.as_slice()))
            .max(max_abs_diff(&s.vel, v.as_slice()))
            .max(acc_gap(&s.acc, &a));
    }
    gap
}

fn rel_gap(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax() / b.amax().max(1.0)
}

/// Largest relative entry deviation of the assembled `K`, `M`, `C` and
/// memory block from the hand stencils at `J` interior nodes.
pub fn stencil_gap(j: usize) -> f64 {
    let mesh = build_mesh(j, 1.3).unwrap();
    let p = MaterialParams {
        rho1: 1.5,
        rho2: 0.7,
        k: 2.0,
        b: 3.0,
        delta: 0.4,
        gamma: 0.9,
    };
    let ops = assemble_blocks(&mesh, &p).unwrap();
    let (m, c) = hand_mass_damping(j, &p);
    rel_gap(&ops.stiffness_dense(), &hand_stiffness(j, mesh.h, &p))
        .max(rel_gap(&ops.mass_dense(), &m))
        .max(rel_gap(&ops.damping_dense(), &c))
        .max(rel_gap(
            &ops.memory_block_dense(0.3, 0.2),
            &hand_memory_block(j, mesh.h, 0.3, 0.2),
        ))
}

pub fn band_dense(b: &SymBand) -> DMatrix<f64> {
    let rows = b.to_dense();
    DMatrix::from_fn(rows.len(), rows.len(), |i, j| rows[i][j])
}

/// Smallest eigenvalue of `A x = l G x` through `L^{-1} A L^{-T}`.
pub fn dense_min_eig(a: &DMatrix<f64>, g: &DMatrix<f64>) -> f64 {
    let l = g.clone().cholesky().unwrap().l();
    let li = l.try_inverse().unwrap();
    let s = &li * a * li.transpose();
    let s = 0.5 * (&s + s.transpose());
    s.symmetric_eigen().eigenvalues.min()
}
