//! Shared workloads for the benchmarks.

use cyclenet_core::cycle::fixtures::{anti_symmetric_ring, five_by_six};
use cyclenet_core::learning::build_connectivity;
use cyclenet_core::{BinaryCycle, Connectivity, InitialHistory, NetworkParams};

pub struct Retrieval {
    pub conn: Connectivity,
    pub params: NetworkParams,
    pub initial: InitialHistory,
    pub t_end: f64,
    pub dt: f64,
}

/// The 5 x 6 cycle at long delay, four traversals.
pub fn retrieval_run() -> Retrieval {
    let c = five_by_six();
    let params = NetworkParams::from_beta(0.0, 3.0, 20.0, 10.0).expect("valid parameters");
    Retrieval {
        conn: build_connectivity(&c).expect("admissible fixture"),
        initial: InitialHistory::pattern(params.memory_amplitude(), &c.column(0)),
        params,
        t_end: 240.0,
        dt: 0.1,
    }
}

/// Anti-symmetric ring with `n` neurons (`p = 2n`), for graph scaling.
pub fn ring_network(n: usize) -> Connectivity {
    build_connectivity(&anti_symmetric_ring(2 * n)).expect("admissible fixture")
}

pub fn ring_cycle(n: usize) -> BinaryCycle {
    anti_symmetric_ring(2 * n)
}
