//! Shared fixtures for the benchmarks.

use timoslip::{
    assemble_blocks, build_mesh, init_state, sample_weights_with_depth, InitialData, KernelSpec,
    MaterialParams, MemoryWeights, SimState, SpatialOperators,
};

pub const DT: f64 = 0.01;

pub fn params() -> MaterialParams {
    MaterialParams {
        k: 2.0,
        b: 2.0,
        ..MaterialParams::unit()
    }
}

/// Operators and exponential-kernel weights of depth `depth` on `j`
/// interior nodes.
pub fn fixture(j: usize, depth: usize) -> (SpatialOperators, MemoryWeights) {
    let mesh = build_mesh(j, 1.0).expect("mesh");
    let ops = assemble_blocks(&mesh, &params()).expect("operators");
    let k = KernelSpec::exponential(1.0, 1.0);
    let mem = MemoryWeights::new(
        sample_weights_with_depth(&k, DT, depth).expect("weights"),
        sample_weights_with_depth(&k, DT, depth).expect("weights"),
    )
    .expect("weights");
    (ops, mem)
}

/// First sine modes in every displacement.
pub fn start(ops: &SpatialOperators, mem: &MemoryWeights) -> SimState {
    let pi = std::f64::consts::PI;
    let init = InitialData::from_fn(&ops.mesh, |x| {
        [
            (pi * x).sin(),
            0.0,
            0.3 * (0.5 * pi * x).sin(),
            0.0,
            (0.5 * pi * x).sin(),
            0.0,
        ]
    });
    init_state(ops, mem, &init, None).expect("state")
}
