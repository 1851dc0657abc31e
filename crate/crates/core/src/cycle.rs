//! Binary cyclic patterns: representation, admissibility, structural
//! classification and the characteristic-equation indices a cycle selects.
//!
//! A cycle is an `N x p` matrix of `+1/-1` entries whose columns are the
//! patterns visited in order. Rows are neurons.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative singular-value cutoff used for numerical rank and pseudoinverse.
pub const RANK_RTOL: f64 = 1e-10;

/// Absolute floor for a nonzero DFT column, scaled by `sqrt(N p)`.
pub const DFT_RTOL: f64 = 1e-8;

/// An `N x p` matrix with entries in `{-1, +1}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "CycleRepr", into = "CycleRepr")]
pub struct BinaryCycle {
    n: usize,
    p: usize,
    // row-major
    entries: Vec<i8>,
}

#[derive(Serialize, Deserialize)]
struct CycleRepr {
    n: usize,
    p: usize,
    rows: Vec<Vec<i8>>,
}

impl TryFrom<CycleRepr> for BinaryCycle {
    type Error = Error;

    fn try_from(r: CycleRepr) -> Result<Self> {
        let c = BinaryCycle::from_rows(&r.rows)?;
        if c.n != r.n || c.p != r.p {
            return Err(Error::InvalidCycle(format!(
                "declared size {}x{} does not match rows {}x{}",
                r.n, r.p, c.n, c.p
            )));
        }
        Ok(c)
    }
}

impl From<BinaryCycle> for CycleRepr {
    fn from(c: BinaryCycle) -> Self {
        CycleRepr {
            n: c.n,
            p: c.p,
            rows: (0..c.n).map(|i| c.row(i).to_vec()).collect(),
        }
    }
}

impl BinaryCycle {
    /// Builds a cycle from row-major entries.
    pub fn new(n: usize, p: usize, entries: Vec<i8>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidCycle("N must be at least 1".into()));
        }
        if p < 2 {
            return Err(Error::InvalidCycle("period p must be at least 2".into()));
        }
        if entries.len() != n * p {
            return Err(Error::InvalidCycle(format!(
                "expected {} entries, got {}",
                n * p,
                entries.len()
            )));
        }
        if let Some(bad) = entries.iter().find(|&&e| e != 1 && e != -1) {
            return Err(Error::InvalidCycle(format!("entry {bad} is not +1 or -1")));
        }
        Ok(Self { n, p, entries })
    }

    pub fn from_rows(rows: &[Vec<i8>]) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != p) {
            return Err(Error::InvalidCycle("rows have unequal length".into()));
        }
        Self::new(n, p, rows.concat())
    }

    /// Builds a cycle whose columns are the given patterns, in order.
    pub fn from_columns(cols: &[Vec<i8>]) -> Result<Self> {
        let p = cols.len();
        let n = cols.first().map_or(0, Vec::len);
        if cols.iter().any(|c| c.len() != n) {
            return Err(Error::InvalidCycle("columns have unequal length".into()));
        }
        let mut entries = vec![0i8; n * p];
        for (mu, col) in cols.iter().enumerate() {
            for (i, &e) in col.iter().enumerate() {
                entries[i * p + mu] = e;
            }
        }
        Self::new(n, p, entries)
    }

    /// Consecutive simple cycle: row `i` is the generator shifted left `i` times.
    pub fn consecutive(generator: &[i8], n_rows: usize) -> Result<Self> {
        let mut rows = Vec::with_capacity(n_rows);
        let mut row = generator.to_vec();
        for _ in 0..n_rows {
            rows.push(row.clone());
            row = shift_left(&row);
        }
        Self::from_rows(&rows)
    }

    pub fn n_neurons(&self) -> usize {
        self.n
    }

    pub fn period(&self) -> usize {
        self.p
    }

    pub fn get(&self, i: usize, mu: usize) -> i8 {
        self.entries[i * self.p + mu]
    }

    pub fn row(&self, i: usize) -> &[i8] {
        &self.entries[i * self.p..(i + 1) * self.p]
    }

    pub fn column(&self, mu: usize) -> Vec<i8> {
        (0..self.n).map(|i| self.get(i, mu)).collect()
    }

    pub fn columns(&self) -> Vec<Vec<i8>> {
        (0..self.p).map(|mu| self.column(mu)).collect()
    }

    /// True when two cyclically adjacent columns coincide. Allowed, but the
    /// transition from one to the next is then invisible.
    pub fn has_adjacent_repeat(&self) -> bool {
        (0..self.p).any(|mu| self.column(mu) == self.column((mu + 1) % self.p))
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.p, |i, mu| f64::from(self.get(i, mu)))
    }

    pub fn negated(&self) -> Self {
        Self {
            n: self.n,
            p: self.p,
            entries: self.entries.iter().map(|e| -e).collect(),
        }
    }

    /// Rotates the column order so that column `k` comes first.
    pub fn rotated(&self, k: usize) -> Self {
        let cols: Vec<_> = (0..self.p).map(|mu| self.column((mu + k) % self.p)).collect();
        Self::from_columns(&cols).expect("rotation preserves validity")
    }

    /// Equality up to a cyclic rotation of the columns.
    pub fn equals_up_to_rotation(&self, other: &Self) -> bool {
        self.n == other.n && self.p == other.p && (0..self.p).any(|k| &self.rotated(k) == other)
    }

    /// Text format: a header line `N p`, then `N` lines of `p` tokens.
    pub fn to_text(&self) -> String {
        let mut s = format!("{} {}\n", self.n, self.p);
        for i in 0..self.n {
            let line: Vec<&str> = self.row(i).iter().map(|&e| if e > 0 { "+1" } else { "-1" }).collect();
            s.push_str(&line.join(" "));
            s.push('\n');
        }
        s
    }
}

impl fmt::Display for BinaryCycle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

fn parse_token(tok: &str) -> Option<i8> {
    match tok {
        "+1" | "1" | "+" => Some(1),
        "-1" | "-" | "\u{2212}" | "\u{2212}1" => Some(-1),
        _ => None,
    }
}

impl FromStr for BinaryCycle {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut lines = s
            .lines()
            .enumerate()
            .map(|(k, l)| (k + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (hl, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            msg: "empty cycle file".into(),
        })?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse {
                line: hl,
                msg: format!("bad header: {e}"),
            })?;
        let [n, p] = dims[..] else {
            return Err(Error::Parse {
                line: hl,
                msg: "header must be `N p`".into(),
            });
        };
        let mut entries = Vec::with_capacity(n * p);
        let mut rows = 0;
        for (ln, line) in lines {
            if rows == n {
                return Err(Error::Parse {
                    line: ln,
                    msg: "more rows than declared".into(),
                });
            }
            let row: Vec<i8> = line
                .split_whitespace()
                .map(|t| {
                    parse_token(t).ok_or_else(|| Error::Parse {
                        line: ln,
                        msg: format!("bad entry `{t}`"),
                    })
                })
                .collect::<Result<_>>()?;
            if row.len() != p {
                return Err(Error::Parse {
                    line: ln,
                    msg: format!("expected {p} entries, found {}", row.len()),
                });
            }
            entries.extend(row);
            rows += 1;
        }
        if rows != n {
            return Err(Error::Parse {
                line: hl,
                msg: format!("declared {n} rows, found {rows}"),
            });
        }
        BinaryCycle::new(n, p, entries)
    }
}

/// `eta * P`: entry `k` becomes `eta[k + 1]`, cyclically.
pub fn shift_left(row: &[i8]) -> Vec<i8> {
    let p = row.len();
    (0..p).map(|k| row[(k + 1) % p]).collect()
}

/// The cyclic permutation matrix with ones on the subdiagonal and in the
/// top-right corner, so that `Sigma * P` shifts the columns left by one.
pub fn permutation_matrix(p: usize) -> Result<DMatrix<f64>> {
    if p < 2 {
        return Err(Error::InvalidArgument(format!("period must be >= 2, got {p}")));
    }
    let mut m = DMatrix::zeros(p, p);
    m[(0, p - 1)] = 1.0;
    for i in 1..p {
        m[(i, i - 1)] = 1.0;
    }
    Ok(m)
}

pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    crate::linalg::singular_values(m)
}

/// Number of singular values above `RANK_RTOL` times the largest one.
pub fn numerical_rank(m: &DMatrix<f64>) -> usize {
    let sv = singular_values(m);
    let max = sv.iter().copied().fold(0.0, f64::max);
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > RANK_RTOL * max).count()
}

/// `Sigma v^(k)` for `v^(k) = (1, rho^k, ..., rho^{(p-1)k})`, `rho = e^{2 pi i / p}`.
pub fn dft_column(cycle: &BinaryCycle, k: usize) -> Vec<Complex64> {
    let p = cycle.period();
    let w: Vec<Complex64> = (0..p)
        .map(|j| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * ((j * k) % p) as f64 / p as f64))
        .collect();
    (0..cycle.n_neurons())
        .map(|i| cycle.row(i).iter().zip(&w).map(|(&e, wj)| wj * f64::from(e)).sum())
        .collect()
}

/// Euclidean norms of the `p` columns of `Sigma W`.
pub fn dft_column_norms(cycle: &BinaryCycle) -> Vec<f64> {
    (0..cycle.period())
        .map(|k| dft_column(cycle, k).iter().map(Complex64::norm_sqr).sum::<f64>().sqrt())
        .collect()
}

fn dft_threshold(cycle: &BinaryCycle) -> f64 {
    DFT_RTOL * ((cycle.n_neurons() * cycle.period()) as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Admissibility {
    pub admissible: bool,
    pub rank: usize,
    pub nonzero_dft_columns: usize,
    pub dft_column_norms: Vec<f64>,
}

/// A cycle is admissible iff its DFT has exactly `rank(Sigma)` nonzero columns.
pub fn is_admissible(cycle: &BinaryCycle) -> Admissibility {
    let rank = numerical_rank(&cycle.to_matrix());
    let norms = dft_column_norms(cycle);
    let thr = dft_threshold(cycle);
    let nonzero = norms.iter().filter(|&&x| x > thr).count();
    Admissibility {
        admissible: rank == nonzero,
        rank,
        nonzero_dft_columns: nonzero,
        dft_column_norms: norms,
    }
}

pub(crate) fn require_admissible(cycle: &BinaryCycle) -> Result<Admissibility> {
    let a = is_admissible(cycle);
    if a.admissible {
        Ok(a)
    } else {
        Err(Error::NotAdmissible {
            rank: a.rank,
            nonzero_dft_columns: a.nonzero_dft_columns,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CycleKind {
    Simple,
    SeparableComposite,
    InseparableComposite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CycleClass {
    pub kind: CycleKind,
    /// Every row has the form `(zeta, -zeta)`.
    pub anti_symmetric: bool,
    /// `rank(Sigma) = N`.
    pub mc: bool,
    /// Row `i + 1` equals row `i` shifted left by one.
    pub consecutive: bool,
}

fn is_cyclic_shift_of(a: &[i8], b: &[i8]) -> bool {
    let p = a.len();
    (0..p).any(|k| (0..p).all(|j| a[(j + k) % p] == b[j]))
}

fn shift_span_matrix(rows: &[&[i8]]) -> DMatrix<f64> {
    let p = rows[0].len();
    let mut all = Vec::new();
    for r in rows {
        let mut row = r.to_vec();
        for _ in 0..p {
            all.push(row.clone());
            row = shift_left(&row);
        }
    }
    DMatrix::from_fn(all.len(), p, |i, j| f64::from(all[i][j]))
}

/// Rows grouped into classes of mutual cyclic shifts; returns one
/// representative (generator) per class, in order of first appearance.
pub fn generators(cycle: &BinaryCycle) -> Vec<Vec<i8>> {
    let mut gens: Vec<Vec<i8>> = Vec::new();
    for i in 0..cycle.n_neurons() {
        let r = cycle.row(i);
        if !gens.iter().any(|g| is_cyclic_shift_of(g, r)) {
            gens.push(r.to_vec());
        }
    }
    gens
}

/// Structural classification. Composite cycles are separable when the loops
/// (spans of all cyclic shifts) of their generators form a direct sum.
pub fn classify(cycle: &BinaryCycle) -> Result<CycleClass> {
    let adm = is_admissible(cycle);
    if !adm.admissible {
        return Err(Error::NotAdmissible {
            rank: adm.rank,
            nonzero_dft_columns: adm.nonzero_dft_columns,
        });
    }
    let p = cycle.period();
    let n = cycle.n_neurons();
    let gens = generators(cycle);
    let kind = if gens.len() == 1 {
        CycleKind::Simple
    } else {
        let sum_dims: usize = gens.iter().map(|g| numerical_rank(&shift_span_matrix(&[g]))).sum();
        let refs: Vec<&[i8]> = gens.iter().map(Vec::as_slice).collect();
        if numerical_rank(&shift_span_matrix(&refs)) == sum_dims {
            CycleKind::SeparableComposite
        } else {
            CycleKind::InseparableComposite
        }
    };
    let anti_symmetric = p.is_multiple_of(2)
        && (0..n).all(|i| {
            let r = cycle.row(i);
            (0..p / 2).all(|k| r[k] == -r[k + p / 2])
        });
    let consecutive = (0..n.saturating_sub(1)).all(|i| shift_left(cycle.row(i)) == cycle.row(i + 1));
    Ok(CycleClass {
        kind,
        anti_symmetric,
        mc: adm.rank == n,
        consecutive,
    })
}

/// Indices `k` with `Sigma v^(k) != 0`. Each contributes one factor of the
/// characteristic equation; the remaining `N - rank` directions (where both
/// connectivity components vanish) contribute the trivial factor `sigma + tau`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IndexSelection {
    pub period: usize,
    pub indices: Vec<usize>,
    pub trivial_multiplicity: usize,
}

impl IndexSelection {
    pub fn contains(&self, k: usize) -> bool {
        self.indices.binary_search(&k).is_ok()
    }

    /// Index of the factor for each eigen-direction: `Some(n_i)` for selected
    /// indices, `None` for the trivial directions. Length is `N`.
    pub fn factor_list(&self) -> Vec<Option<usize>> {
        self.indices
            .iter()
            .copied()
            .map(Some)
            .chain(std::iter::repeat_n(None, self.trivial_multiplicity))
            .collect()
    }
}

pub fn selected_indices(cycle: &BinaryCycle) -> IndexSelection {
    let thr = dft_threshold(cycle);
    let indices: Vec<usize> = dft_column_norms(cycle)
        .iter()
        .enumerate()
        .filter(|(_, &x)| x > thr)
        .map(|(k, _)| k)
        .collect();
    let trivial_multiplicity = cycle.n_neurons().saturating_sub(indices.len());
    IndexSelection {
        period: cycle.period(),
        indices,
        trivial_multiplicity,
    }
}

/// Fixture cycles that recur in tests and examples.
pub mod fixtures {
    use super::BinaryCycle;

    /// 5 x 6 simple consecutive cycle used for the derived-cycle study.
    pub fn five_by_six() -> BinaryCycle {
        BinaryCycle::from_rows(&[
            vec![1, 1, -1, 1, -1, -1],
            vec![1, -1, 1, -1, -1, 1],
            vec![-1, 1, -1, -1, 1, 1],
            vec![1, -1, -1, 1, 1, -1],
            vec![-1, -1, 1, 1, -1, 1],
        ])
        .unwrap()
    }

    /// 3 x 6 anti-symmetric simple MC-cycle; its network is a ring with one
    /// inhibitory connection.
    pub fn ring_three_by_six() -> BinaryCycle {
        BinaryCycle::consecutive(&[1, 1, 1, -1, -1, -1], 3).unwrap()
    }

    /// 3 x 6 inseparable composite MC-cycle.
    pub fn inseparable_three_by_six() -> BinaryCycle {
        BinaryCycle::from_rows(&[
            vec![1, 1, -1, -1, -1, 1],
            vec![1, -1, -1, -1, 1, 1],
            vec![-1, 1, -1, 1, -1, 1],
        ])
        .unwrap()
    }

    /// Anti-symmetric simple MC-cycle with `N = p / 2` from the generator
    /// `(+,...,+,-,...,-)` of length `p`.
    pub fn anti_symmetric_ring(p: usize) -> BinaryCycle {
        let gen: Vec<i8> = (0..p).map(|k| if k < p / 2 { 1 } else { -1 }).collect();
        BinaryCycle::consecutive(&gen, p / 2).unwrap()
    }

    /// Simple MC-cycle with `N = p` whose network is an all-excitatory ring.
    pub fn excitatory_ring(p: usize) -> BinaryCycle {
        let gen: Vec<i8> = (0..p).map(|k| if k + 1 < p { 1 } else { -1 }).collect();
        BinaryCycle::consecutive(&gen, p).unwrap()
    }
}
