#![allow(dead_code)]

use cyclenet_core::cycle::{shift_left, BinaryCycle};
use proptest::prelude::*;

pub fn pm_one() -> impl Strategy<Value = i8> {
    prop_oneof![Just(1i8), Just(-1i8)]
}

/// All cyclic shifts of a random generator, rows shuffled and some negated.
/// The row space is closed under shifts, so these cycles are admissible.
pub fn orbit_cycle(max_p: usize) -> impl Strategy<Value = BinaryCycle> {
    (2..=max_p)
        .prop_flat_map(|p| {
            (
                prop::collection::vec(pm_one(), p),
                prop::collection::vec(pm_one(), p),
                any::<u64>(),
            )
        })
        .prop_filter("constant generator", |(g, _, _)| g.iter().any(|&x| x != g[0]))
        .prop_map(|(g, flips, seed)| {
            let p = g.len();
            let mut rows = Vec::new();
            let mut r = g;
            for _ in 0..p {
                rows.push(r.clone());
                r = shift_left(&r);
            }
            let mut order: Vec<usize> = (0..p).collect();
            let mut s = seed;
            for i in (1..p).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                order.swap(i, (s >> 33) as usize % (i + 1));
            }
            let rows: Vec<Vec<i8>> = order
                .iter()
                .zip(&flips)
                .map(|(&k, &f)| rows[k].iter().map(|&x| x * f).collect())
                .collect();
            BinaryCycle::from_rows(&rows).unwrap()
        })
}

pub fn anti_symmetric_cycle() -> impl Strategy<Value = BinaryCycle> {
    (1..=6usize, 1..=4usize)
        .prop_flat_map(|(half, n)| prop::collection::vec(prop::collection::vec(pm_one(), half), n))
        .prop_map(|zetas| {
            let rows: Vec<Vec<i8>> = zetas
                .into_iter()
                .map(|z| z.iter().copied().chain(z.iter().map(|&x| -x)).collect())
                .collect();
            BinaryCycle::from_rows(&rows).unwrap()
        })
}
