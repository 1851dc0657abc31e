//! The discrete dynamics `xi -> sgn(J xi)` on all `2^N` binary states and
//! its loop decomposition.
//!
//! States are encoded as integers: `+1 -> 1`, `-1 -> 0`, first neuron is the
//! most significant bit.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::cycle::BinaryCycle;
use crate::error::{Error, Result};
use crate::learning::Connectivity;

/// Largest `N` for which full enumeration is attempted.
pub const MAX_ENUMERATION_N: usize = 24;

/// Components of `J xi` with smaller magnitude make the state degenerate.
pub const DEGENERACY_TOL: f64 = 1e-9;

/// Successor marker for sign-degenerate states.
pub const SENTINEL: u32 = u32::MAX;

pub fn encode(pattern: &[i8]) -> u32 {
    pattern.iter().fold(0u32, |acc, &s| (acc << 1) | u32::from(s > 0))
}

pub fn decode(code: u32, n: usize) -> Vec<i8> {
    (0..n)
        .map(|i| if (code >> (n - 1 - i)) & 1 == 1 { 1 } else { -1 })
        .collect()
}

/// `sgn(J xi)`, or `None` when some component of `J xi` is (numerically) zero.
pub fn step(j: &DMatrix<f64>, pattern: &[i8]) -> Option<Vec<i8>> {
    let n = pattern.len();
    (0..n)
        .map(|i| {
            let h: f64 = (0..n).map(|k| j[(i, k)] * f64::from(pattern[k])).sum();
            if h.abs() < DEGENERACY_TOL {
                None
            } else {
                Some(if h > 0.0 { 1 } else { -1 })
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransitionGraph {
    pub n: usize,
    /// `successor[s]` is the code of `sgn(J s)`, or [`SENTINEL`].
    pub successor: Vec<u32>,
    /// Loops in canonical rotation (smallest code first), sorted by first code.
    pub loops: Vec<Vec<u32>>,
    /// Steps until the state reaches a loop; `None` if its chain ends in a
    /// degenerate state.
    pub tails: Vec<Option<u32>>,
}

fn canonical(mut lp: Vec<u32>) -> Vec<u32> {
    let k = lp
        .iter()
        .enumerate()
        .min_by_key(|(_, &c)| c)
        .map(|(k, _)| k)
        .unwrap_or(0);
    lp.rotate_left(k);
    lp
}

pub fn build_graph(conn: &Connectivity) -> Result<TransitionGraph> {
    build_graph_from_matrix(&conn.j)
}

pub fn build_graph_from_matrix(j: &DMatrix<f64>) -> Result<TransitionGraph> {
    let n = j.nrows();
    if n > MAX_ENUMERATION_N {
        return Err(Error::EnumerationRefused {
            n,
            max: MAX_ENUMERATION_N,
        });
    }
    let total = 1usize << n;
    let successor: Vec<u32> = (0..total as u32)
        .into_par_iter()
        .map(|s| step(j, &decode(s, n)).map_or(SENTINEL, |x| encode(&x)))
        .collect();

    // 0 = unvisited, 1 = on current path, 2 = done
    let mut mark = vec![0u8; total];
    let mut loops = Vec::new();
    let mut path = Vec::new();
    for start in 0..total {
        if mark[start] != 0 {
            continue;
        }
        path.clear();
        let mut s = start as u32;
        loop {
            if s == SENTINEL || mark[s as usize] == 2 {
                break;
            }
            if mark[s as usize] == 1 {
                let pos = path.iter().position(|&x| x == s).expect("on path");
                loops.push(canonical(path[pos..].to_vec()));
                break;
            }
            mark[s as usize] = 1;
            path.push(s);
            s = successor[s as usize];
        }
        for &x in &path {
            mark[x as usize] = 2;
        }
    }
    loops.sort();

    let mut tails: Vec<Option<u32>> = vec![None; total];
    let mut resolved = vec![false; total];
    for lp in &loops {
        for &c in lp {
            tails[c as usize] = Some(0);
            resolved[c as usize] = true;
        }
    }
    for start in 0..total {
        if resolved[start] {
            continue;
        }
        path.clear();
        let mut s = start as u32;
        while s != SENTINEL && !resolved[s as usize] {
            path.push(s);
            s = successor[s as usize];
        }
        let mut t = if s == SENTINEL { None } else { tails[s as usize] };
        for &x in path.iter().rev() {
            t = t.map(|d| d + 1);
            tails[x as usize] = t;
            resolved[x as usize] = true;
        }
    }

    Ok(TransitionGraph {
        n,
        successor,
        loops,
        tails,
    })
}

impl TransitionGraph {
    pub fn loop_lengths(&self) -> Vec<usize> {
        self.loops.iter().map(Vec::len).collect()
    }

    /// Histogram of tail lengths; key `None` collects states that end in a
    /// degenerate state.
    pub fn tails_histogram(&self) -> BTreeMap<Option<u32>, usize> {
        let mut h = BTreeMap::new();
        for t in &self.tails {
            *h.entry(*t).or_insert(0) += 1;
        }
        h
    }

    pub fn fixed_points(&self) -> Vec<u32> {
        self.loops.iter().filter(|l| l.len() == 1).map(|l| l[0]).collect()
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Export<'a> {
            n: usize,
            loops: &'a [Vec<u32>],
            tails_histogram: BTreeMap<String, usize>,
        }
        let tails_histogram = self
            .tails_histogram()
            .into_iter()
            .map(|(k, v)| (k.map_or("degenerate".to_string(), |d| d.to_string()), v))
            .collect();
        serde_json::to_string_pretty(&Export {
            n: self.n,
            loops: &self.loops,
            tails_histogram,
        })
        .expect("serializable")
    }

    /// Graphviz rendering; loop states are drawn as double circles.
    pub fn to_dot(&self) -> String {
        let mut s = String::from("digraph transitions {\n");
        for lp in &self.loops {
            for c in lp {
                let _ = writeln!(s, "  {c} [shape=doublecircle];");
            }
        }
        for (from, &to) in self.successor.iter().enumerate() {
            if to == SENTINEL {
                let _ = writeln!(s, "  {from} -> degenerate;");
            } else {
                let _ = writeln!(s, "  {from} -> {to};");
            }
        }
        s.push_str("}\n");
        s
    }
}

/// Loops of length at least two, as cycles whose columns follow loop order.
/// Fixed points are reported by [`TransitionGraph::fixed_points`] instead.
pub fn loops_as_cycles(graph: &TransitionGraph) -> Vec<BinaryCycle> {
    graph
        .loops
        .iter()
        .filter(|l| l.len() >= 2)
        .map(|l| {
            let cols: Vec<Vec<i8>> = l.iter().map(|&c| decode(c, graph.n)).collect();
            BinaryCycle::from_columns(&cols).expect("loop states are valid patterns")
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cycle::fixtures::*;
    use crate::learning::{build_connectivity, storage_residual};

    #[test]
    fn encoding() {
        assert_eq!(encode(&[1, 1, -1, 1, -1]), 26);
        assert_eq!(encode(&[-1; 5]), 0);
        assert_eq!(encode(&[1; 5]), 31);
        for c in 0..32 {
            assert_eq!(encode(&decode(c, 5)), c);
        }
    }

    #[test]
    fn ring_step_and_loops() {
        let conn = build_connectivity(&ring_three_by_six()).unwrap();
        assert_eq!(step(&conn.j, &[1, 1, 1]).unwrap(), vec![1, 1, -1]);
        let g = build_graph(&conn).unwrap();
        let mut lens = g.loop_lengths();
        lens.sort();
        assert_eq!(lens, vec![2, 6]);
        let two = g.loops.iter().find(|l| l.len() == 2).unwrap();
        assert_eq!(two, &vec![encode(&[-1, 1, -1]), encode(&[1, -1, 1])]);
    }

    #[test]
    fn identity_all_fixed() {
        let g = build_graph_from_matrix(&DMatrix::identity(2, 2)).unwrap();
        assert_eq!(g.loops, vec![vec![0], vec![1], vec![2], vec![3]]);
        assert!(loops_as_cycles(&g).is_empty());
        assert_eq!(g.fixed_points().len(), 4);
    }

    #[test]
    fn five_by_six_loops() {
        let conn = build_connectivity(&five_by_six()).unwrap();
        let g = build_graph(&conn).unwrap();
        let mut lens = g.loop_lengths();
        lens.sort();
        assert_eq!(lens, vec![2, 6, 6, 6]);
        // the chain from 26 enters a loop
        let mut s = 26u32;
        for _ in 0..32 {
            s = g.successor[s as usize];
            assert_ne!(s, SENTINEL);
        }
        assert!(g.loops.iter().any(|l| l.contains(&s)));
        for c in loops_as_cycles(&g) {
            assert!(storage_residual(&conn.j, &c) < 1e-9);
        }
    }

    #[test]
    fn degenerate_states_are_sinks() {
        let j = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, -1.0]);
        assert_eq!(step(&j, &[1, 1]), None);
        let g = build_graph_from_matrix(&j).unwrap();
        assert_eq!(g.successor[encode(&[1, 1]) as usize], SENTINEL);
        assert_eq!(g.tails[encode(&[1, 1]) as usize], None);
    }

    #[test]
    fn enumeration_bound() {
        let j = DMatrix::identity(25, 25);
        assert!(matches!(
            build_graph_from_matrix(&j),
            Err(Error::EnumerationRefused { .. })
        ));
    }

    #[test]
    fn exports() {
        let conn = build_connectivity(&ring_three_by_six()).unwrap();
        let g = build_graph(&conn).unwrap();
        let v: serde_json::Value = serde_json::from_str(&g.to_json()).unwrap();
        assert_eq!(v["n"], 3);
        assert_eq!(v["loops"].as_array().unwrap().len(), 2);
        let dot = g.to_dot();
        assert!(dot.starts_with("digraph"));
        assert_eq!(dot.matches("->").count(), 8);
    }
}
