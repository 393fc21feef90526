//! The Morse chain complex, Smith normal form and integer homology.

use std::collections::BTreeMap;
use std::fmt::Debug;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{CheckedAdd, CheckedMul, CheckedSub, Signed, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::error::{MorseError, Result};
use crate::geometry::CriticalPoint;

/// Integer types usable by [`smith_form`]: every operation reports
/// overflow through `None`.
pub trait SnfScalar: Integer + Signed + Clone + Debug + CheckedAdd + CheckedSub + CheckedMul {}
impl<T: Integer + Signed + Clone + Debug + CheckedAdd + CheckedSub + CheckedMul> SnfScalar for T {}

/// `U M V = D` with `U`, `V` unimodular and `D` diagonal with
/// `d_1 | d_2 | ...`, all `d_i > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SmithForm<T> {
    pub diagonal: Vec<T>,
    pub rank: usize,
    pub u: Vec<Vec<T>>,
    pub v: Vec<Vec<T>>,
}

fn identity<T: SnfScalar>(n: usize) -> Vec<Vec<T>> {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { T::one() } else { T::zero() }).collect())
        .collect()
}

/// `a - q b`, checked.
fn axpy<T: SnfScalar>(a: &T, q: &T, b: &T) -> Option<T> {
    a.checked_sub(&q.checked_mul(b)?)
}

fn row_sub<T: SnfScalar>(m: &mut [Vec<T>], target: usize, q: &T, src: usize) -> Option<()> {
    for j in 0..m[target].len() {
        let v = axpy(&m[target][j], q, &m[src][j])?;
        m[target][j] = v;
    }
    Some(())
}

fn col_sub<T: SnfScalar>(m: &mut [Vec<T>], target: usize, q: &T, src: usize) -> Option<()> {
    for row in m.iter_mut() {
        let v = axpy(&row[target], q, &row[src])?;
        row[target] = v;
    }
    Some(())
}

fn negate_row<T: SnfScalar>(m: &mut [Vec<T>], i: usize) -> Option<()> {
    for j in 0..m[i].len() {
        m[i][j] = T::zero().checked_sub(&m[i][j])?;
    }
    Some(())
}

fn swap_cols<T>(m: &mut [Vec<T>], a: usize, b: usize) {
    for row in m.iter_mut() {
        row.swap(a, b);
    }
}

fn matmul<T: SnfScalar>(a: &[Vec<T>], b: &[Vec<T>], inner: usize, cols: usize) -> Option<Vec<Vec<T>>> {
    a.iter()
        .map(|row| {
            (0..cols)
                .map(|j| {
                    let mut acc = T::zero();
                    for k in 0..inner {
                        acc = acc.checked_add(&row[k].checked_mul(&b[k][j])?)?;
                    }
                    Some(acc)
                })
                .collect()
        })
        .collect()
}

/// Smith normal form with checked arithmetic; `None` on overflow.
///
/// Pivots are chosen with the smallest magnitude in the remaining block.
pub fn smith_form<T: SnfScalar>(m: &[Vec<T>], cols: usize) -> Option<SmithForm<T>> {
    let rows = m.len();
    let mut d: Vec<Vec<T>> = m.to_vec();
    let mut u = identity::<T>(rows);
    let mut v = identity::<T>(cols);
    let mut t = 0;
    while t < rows.min(cols) {
        // Smallest nonzero entry of the trailing block.
        let mut pivot: Option<(usize, usize)> = None;
        for i in t..rows {
            for j in t..cols {
                if !d[i][j].is_zero() && pivot.is_none_or(|(pi, pj)| d[i][j].abs() < d[pi][pj].abs()) {
                    pivot = Some((i, j));
                }
            }
        }
        let Some((pi, pj)) = pivot else { break };
        d.swap(t, pi);
        u.swap(t, pi);
        swap_cols(&mut d, t, pj);
        swap_cols(&mut v, t, pj);

        let mut clean = false;
        while !clean {
            clean = true;
            for i in (t + 1)..rows {
                if d[i][t].is_zero() {
                    continue;
                }
                let q = d[i][t].div_floor(&d[t][t]);
                row_sub(&mut d, i, &q, t)?;
                row_sub(&mut u, i, &q, t)?;
                if !d[i][t].is_zero() {
                    clean = false;
                    d.swap(t, i);
                    u.swap(t, i);
                }
            }
            for j in (t + 1)..cols {
                if d[t][j].is_zero() {
                    continue;
                }
                let q = d[t][j].div_floor(&d[t][t]);
                col_sub(&mut d, j, &q, t)?;
                col_sub(&mut v, j, &q, t)?;
                if !d[t][j].is_zero() {
                    clean = false;
                    swap_cols(&mut d, t, j);
                    swap_cols(&mut v, t, j);
                }
            }
            if clean {
                // Divisibility: fold a row with an offending entry into row t.
                'outer: for i in (t + 1)..rows {
                    for j in (t + 1)..cols {
                        if !d[i][j].is_multiple_of(&d[t][t]) {
                            let minus_one = T::zero() - T::one();
                            row_sub(&mut d, t, &minus_one, i)?;
                            row_sub(&mut u, t, &minus_one, i)?;
                            clean = false;
                            break 'outer;
                        }
                    }
                }
            }
        }
        if d[t][t].is_negative() {
            negate_row(&mut d, t)?;
            negate_row(&mut u, t)?;
        }
        t += 1;
    }
    let diagonal: Vec<T> = (0..rows.min(cols)).map(|i| d[i][i].clone()).take_while(|x| !x.is_zero()).collect();
    let rank = diagonal.len();
    // Witness check: U M V = D.
    let um = matmul(&u, m, rows, cols)?;
    let umv = matmul(&um, &v, cols, cols)?;
    if umv != d {
        return None;
    }
    Some(SmithForm { diagonal, rank, u, v })
}

/// Which arithmetic produced a Smith form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arithmetic {
    Checked64,
    BigInt,
}

/// Invariants of an integer matrix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SmithSummary {
    pub diagonal: Vec<i64>,
    pub rank: usize,
    pub arithmetic: Arithmetic,
}

/// Smith normal form of an `i64` matrix, in checked 64-bit arithmetic with
/// a fallback to arbitrary precision on overflow. Invariant factors that do
/// not fit in `i64` are reported as an overflow error.
pub fn smith_normal_form(m: &[Vec<i64>], cols: usize) -> Result<SmithSummary> {
    if let Some(s) = smith_form(m, cols) {
        return Ok(SmithSummary {
            diagonal: s.diagonal,
            rank: s.rank,
            arithmetic: Arithmetic::Checked64,
        });
    }
    let big: Vec<Vec<BigInt>> = m.iter().map(|r| r.iter().map(|&x| BigInt::from(x)).collect()).collect();
    let s = smith_form(&big, cols).ok_or(MorseError::Overflow("smith normal form"))?;
    let diagonal = s
        .diagonal
        .iter()
        .map(|x| x.to_i64().ok_or(MorseError::Overflow("invariant factor")))
        .collect::<Result<_>>()?;
    Ok(SmithSummary {
        diagonal,
        rank: s.rank,
        arithmetic: Arithmetic::BigInt,
    })
}

/// Rank over the field with two elements.
pub fn rank_mod2(m: &[Vec<i64>], cols: usize) -> usize {
    let mut a: Vec<Vec<bool>> = m.iter().map(|r| r.iter().map(|x| x.rem_euclid(2) == 1).collect()).collect();
    let mut rank = 0;
    for c in 0..cols {
        let Some(p) = (rank..a.len()).find(|&i| a[i][c]) else { continue };
        a.swap(rank, p);
        for i in 0..a.len() {
            if i != rank && a[i][c] {
                for j in 0..cols {
                    let bit = a[rank][j];
                    a[i][j] ^= bit;
                }
            }
        }
        rank += 1;
    }
    rank
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coefficients {
    #[default]
    Integer,
    Mod2,
}

/// An integer matrix with explicit shape (rows or columns may be empty).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntMatrix {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<Vec<i64>>,
}

impl IntMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            entries: vec![vec![0; cols]; rows],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().flatten().all(|&x| x == 0)
    }

    /// Product in checked arithmetic.
    pub fn mul(&self, other: &IntMatrix) -> Result<IntMatrix> {
        if self.cols != other.rows {
            return Err(MorseError::Assembly("matrix shapes do not compose".into()));
        }
        let entries = matmul(&self.entries, &other.entries, self.cols, other.cols).ok_or(MorseError::Overflow("boundary composition"))?;
        Ok(IntMatrix {
            rows: self.rows,
            cols: other.cols,
            entries,
        })
    }
}

/// Generators `[D(p)]` graded by index with boundary matrices
/// `d_k : C_k -> C_{k-1}`, entry `(q, p) = #M(p, q)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MorseChainComplex {
    pub generators: Vec<Vec<usize>>,
    /// `boundaries[k]` is `d_k`; `boundaries[0]` is the zero map to `0`.
    pub boundaries: Vec<IntMatrix>,
    pub level_cap: Option<f64>,
}

impl MorseChainComplex {
    pub fn top_degree(&self) -> usize {
        self.generators.len().saturating_sub(1)
    }

    pub fn rank(&self, k: usize) -> usize {
        self.generators.get(k).map_or(0, |g| g.len())
    }

    /// Alternating count of generators.
    pub fn euler_characteristic(&self) -> i64 {
        self.generators
            .iter()
            .enumerate()
            .map(|(k, g)| if k % 2 == 0 { g.len() as i64 } else { -(g.len() as i64) })
            .sum()
    }
}

/// Assemble the complex from signed counts `#M(p, q)` and verify
/// `d_{k-1} d_k = 0` exactly.
pub fn build_complex(
    points: &[CriticalPoint],
    counts: &BTreeMap<(usize, usize), i64>,
    level_cap: Option<f64>,
) -> Result<MorseChainComplex> {
    let kept: Vec<&CriticalPoint> = points.iter().filter(|p| level_cap.is_none_or(|a| p.value <= a)).collect();
    let top = points.iter().map(|p| p.index).max().unwrap_or(0);
    let mut generators: Vec<Vec<usize>> = vec![Vec::new(); top + 1];
    for p in &kept {
        generators[p.index].push(p.id);
    }
    let mut boundaries = vec![IntMatrix::zeros(0, generators[0].len())];
    for k in 1..=top {
        let (rows, cols) = (&generators[k - 1], &generators[k]);
        let mut m = IntMatrix::zeros(rows.len(), cols.len());
        for (j, p) in cols.iter().enumerate() {
            for (i, q) in rows.iter().enumerate() {
                m.entries[i][j] = counts.get(&(*p, *q)).copied().unwrap_or(0);
            }
        }
        boundaries.push(m);
    }
    let mut bad = Vec::new();
    for k in 2..=top {
        let comp = boundaries[k - 1].mul(&boundaries[k])?;
        for (i, row) in comp.entries.iter().enumerate() {
            for (j, &x) in row.iter().enumerate() {
                if x != 0 {
                    bad.push(format!(
                        "(d{} d{})[{} <- {}] = {x}",
                        k - 1,
                        k,
                        generators[k - 2][i],
                        generators[k][j]
                    ));
                }
            }
        }
    }
    if !bad.is_empty() {
        return Err(MorseError::SignConsistency(bad.join(", ")));
    }
    Ok(MorseChainComplex {
        generators,
        boundaries,
        level_cap,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomologyResult {
    pub coefficients: Coefficients,
    pub betti: Vec<usize>,
    /// Invariant factors greater than one, per degree.
    pub torsion: Vec<Vec<i64>>,
    /// Rank of `d_k` per degree.
    pub boundary_ranks: Vec<usize>,
    pub smith: Vec<SmithSummary>,
}

/// Homology of the complex.
pub fn homology(c: &MorseChainComplex, coefficients: Coefficients) -> Result<HomologyResult> {
    let top = c.top_degree();
    let mut ranks = Vec::with_capacity(top + 1);
    let mut smith = Vec::with_capacity(top + 1);
    for d in &c.boundaries {
        match coefficients {
            Coefficients::Integer => {
                let s = smith_normal_form(&d.entries, d.cols)?;
                ranks.push(s.rank);
                smith.push(s);
            }
            Coefficients::Mod2 => ranks.push(rank_mod2(&d.entries, d.cols)),
        }
    }
    let betti = (0..=top)
        .map(|k| c.rank(k) - ranks[k] - ranks.get(k + 1).copied().unwrap_or(0))
        .collect();
    // Torsion in degree k comes from the image of d_{k+1}.
    let torsion = (0..=top)
        .map(|k| {
            smith
                .get(k + 1)
                .map(|s| s.diagonal.iter().copied().filter(|&x| x > 1).collect())
                .unwrap_or_default()
        })
        .collect();
    Ok(HomologyResult {
        coefficients,
        betti,
        torsion,
        boundary_ranks: ranks,
        smith,
    })
}

/// Homology of the sublevel complexes `K^a` for each level. Every level must
/// stay farther than `regular_gap` from all critical values.
pub fn filtered_complexes(
    points: &[CriticalPoint],
    counts: &BTreeMap<(usize, usize), i64>,
    levels: &[f64],
    regular_gap: f64,
    coefficients: Coefficients,
) -> Result<Vec<(f64, HomologyResult)>> {
    levels
        .iter()
        .map(|&a| {
            if points.iter().any(|p| (p.value - a).abs() <= regular_gap) {
                return Err(MorseError::NotRegularValue(a));
            }
            let c = build_complex(points, counts, Some(a))?;
            Ok((a, homology(&c, coefficients)?))
        })
        .collect()
}
