//! Quadratic normalization `h2` near a critical point.
//!
//! In the chart `x = p + M y` with `M = F |Lambda|^{-1/2}` the function reads
//! `f(p) - |y1|^2 / 2 + |y2|^2 / 2 + R(y)`. When `R` vanishes on both
//! coordinate subspaces, Taylor's formula with integral remainder gives
//! symmetric operators `R1(y)`, `R2(y)` with
//! `R(y) = <R1(y) y1, y1> / 2 + <R2(y) y2, y2> / 2`, so
//! `f = f(p) - |C1 y1|^2 / 2 + |C2 y2|^2 / 2` with `C1^2 = I - R1` and
//! `C2^2 = I + R2`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{MorseError, Result};
use crate::geometry::{spectral_split, CriticalPoint};
use crate::linalg::spd_sqrt;
use crate::scenario::Scenario;

/// Gauss-Legendre nodes and weights on `[0, 1]` (Golub-Welsch).
pub fn gauss_legendre(m: usize) -> Vec<(f64, f64)> {
    let jacobi = DMatrix::from_fn(m, m, |i, j| {
        if i + 1 == j || j + 1 == i {
            let k = i.max(j) as f64;
            k / (4.0 * k * k - 1.0).sqrt()
        } else {
            0.0
        }
    });
    let eig = jacobi.symmetric_eigen();
    let mut out: Vec<(f64, f64)> = (0..m)
        .map(|i| {
            let x = eig.eigenvalues[i];
            let w = 2.0 * eig.eigenvectors[(0, i)].powi(2);
            (0.5 * (x + 1.0), 0.5 * w)
        })
        .collect();
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

#[derive(Debug, Clone)]
pub struct QuadraticNormalization {
    scenario: Scenario,
    base: Vec<f64>,
    value: f64,
    chart: DMatrix<f64>,
    k: usize,
    epsilon: f64,
    nodes: Vec<(f64, f64)>,
}

/// Summary of the defining identity over a probe grid.
#[derive(Debug, Clone, Serialize)]
pub struct NormalFormCheck {
    pub epsilon: f64,
    pub probes: usize,
    pub max_residual: f64,
    pub max_c_deviation: f64,
}

const NODES: usize = 8;
const SPD_FLOOR: f64 = 1e-10;
const AXIS_TOL: f64 = 1e-10;

impl QuadraticNormalization {
    pub fn new(scenario: &Scenario, p: &CriticalPoint, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(MorseError::Validation("ball radius must be positive".into()));
        }
        let split = spectral_split(scenario, &p.location)?;
        let scale = DVector::from_iterator(
            split.eigenvalues.len(),
            split.eigenvalues.iter().map(|l| l.abs().sqrt().recip()),
        );
        let chart = &split.eigenvectors * DMatrix::from_diagonal(&scale);
        let nf = Self {
            scenario: scenario.clone(),
            base: p.location.clone(),
            value: scenario.value(&p.location),
            chart,
            k: split.index,
            epsilon,
            nodes: gauss_legendre(NODES),
        };
        nf.check_axes()?;
        nf.check_definiteness()?;
        Ok(nf)
    }

    pub fn index(&self) -> usize {
        self.k
    }

    pub fn dimension(&self) -> usize {
        self.base.len()
    }

    /// `p + M y`.
    pub fn point(&self, y: &[f64]) -> Vec<f64> {
        let d = &self.chart * DVector::from_column_slice(y);
        self.base.iter().zip(d.iter()).map(|(b, di)| b + di).collect()
    }

    fn quadratic(&self, y: &[f64]) -> f64 {
        y.iter()
            .enumerate()
            .map(|(i, v)| if i < self.k { -0.5 * v * v } else { 0.5 * v * v })
            .sum()
    }

    pub fn remainder(&self, y: &[f64]) -> f64 {
        self.scenario.value(&self.point(y)) - self.value - self.quadratic(y)
    }

    /// Third derivative of `R` in chart coordinates, flattened `[i][j][l]`.
    fn third(&self, y: &[f64]) -> Vec<f64> {
        let n = self.dimension();
        let b = self
            .scenario
            .evaluate(&self.point(y))
            .expect("chart points are finite");
        let m = &self.chart;
        let mut t = vec![0.0; n * n * n];
        for a in 0..n {
            for bb in 0..n {
                for c in 0..n {
                    let v = b.third(a, bb, c);
                    if v == 0.0 {
                        continue;
                    }
                    for i in 0..n {
                        let ai = m[(a, i)] * v;
                        if ai == 0.0 {
                            continue;
                        }
                        for j in 0..n {
                            let bj = ai * m[(bb, j)];
                            for l in 0..n {
                                t[(i * n + j) * n + l] += bj * m[(c, l)];
                            }
                        }
                    }
                }
            }
        }
        t
    }

    /// `(R1(y), R2(y))` by tensor-product Gauss-Legendre quadrature.
    pub fn operators(&self, y: &[f64]) -> (DMatrix<f64>, DMatrix<f64>) {
        let n = self.dimension();
        let k = self.k;
        let mut r1 = DMatrix::zeros(k, k);
        let mut r2 = DMatrix::zeros(n - k, n - k);
        let mut z = vec![0.0; n];
        for &(tau, wt) in &self.nodes {
            for &(s, ws) in &self.nodes {
                for &(t, wtt) in &self.nodes {
                    for i in 0..n {
                        z[i] = if i < k { tau * s * y[i] } else { tau * t * y[i] };
                    }
                    let d3 = self.third(&z);
                    let w = 2.0 * wt * ws * wtt;
                    for i in 0..k {
                        for j in 0..k {
                            let mut acc = 0.0;
                            for l in k..n {
                                acc += d3[(i * n + j) * n + l] * y[l];
                            }
                            r1[(i, j)] += w * s * acc;
                        }
                    }
                    for i in k..n {
                        for j in k..n {
                            let mut acc = 0.0;
                            for l in 0..k {
                                acc += d3[(l * n + i) * n + j] * y[l];
                            }
                            r2[(i - k, j - k)] += w * t * acc;
                        }
                    }
                }
            }
        }
        (r1, r2)
    }

    /// `(C1(y), C2(y))`, the SPD square roots of `I - R1` and `I + R2`.
    pub fn roots(&self, y: &[f64]) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let (r1, r2) = self.operators(y);
        let k = self.k;
        let m1 = DMatrix::identity(k, k) - r1;
        let m2 = DMatrix::identity(r2.nrows(), r2.nrows()) + r2;
        match (spd_sqrt(&m1, SPD_FLOOR), spd_sqrt(&m2, SPD_FLOOR)) {
            (Some(c1), Some(c2)) => Ok((c1, c2)),
            _ => Err(MorseError::ShrinkRadius {
                reason: format!("I - R1 or I + R2 is not positive definite at {y:?}"),
                suggested: 0.5 * DVector::from_column_slice(y).norm(),
            }),
        }
    }

    pub fn h2(&self, y: &[f64]) -> Result<DVector<f64>> {
        let (c1, c2) = self.roots(y)?;
        let (y1, y2) = split(y, self.k);
        let a = c1 * y1;
        let b = c2 * y2;
        Ok(DVector::from_iterator(y.len(), a.iter().chain(b.iter()).copied()))
    }

    /// `|f(p) - |C1 y1|^2 / 2 + |C2 y2|^2 / 2 - f(p + M y)|`.
    pub fn residual(&self, y: &[f64]) -> Result<f64> {
        let h = self.h2(y)?;
        let normal = self.value + self.quadratic(h.as_slice());
        Ok((normal - self.scenario.value(&self.point(y))).abs())
    }

    /// Check the identity on a square grid of `m^2` (or `m^n`) points
    /// restricted to the ball of radius `epsilon`.
    pub fn verify(&self, per_axis: usize) -> Result<NormalFormCheck> {
        use rayon::prelude::*;
        let probes = ball_grid(self.dimension(), per_axis, self.epsilon);
        let rows: Vec<(f64, f64)> = probes
            .par_iter()
            .map(|y| {
                let (c1, c2) = self.roots(y)?;
                let dev = (c1.clone() - DMatrix::identity(c1.nrows(), c1.nrows()))
                    .amax()
                    .max((c2.clone() - DMatrix::identity(c2.nrows(), c2.nrows())).amax());
                Ok((self.residual(y)?, dev))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(NormalFormCheck {
            epsilon: self.epsilon,
            probes: probes.len(),
            max_residual: rows.iter().map(|r| r.0).fold(0.0, f64::max),
            max_c_deviation: rows.iter().map(|r| r.1).fold(0.0, f64::max),
        })
    }

    /// `R` must vanish on both coordinate subspaces and the mixed Hessian
    /// block must vanish at the origin.
    fn check_axes(&self) -> Result<()> {
        let n = self.dimension();
        let k = self.k;
        for block in [(0, k), (k, n)] {
            if block.0 == block.1 {
                continue;
            }
            for dir in block_directions(n, block) {
                for frac in [0.25, 0.5, 0.75, 1.0] {
                    let y: Vec<f64> = dir.iter().map(|d| d * frac * self.epsilon).collect();
                    let r = self.remainder(&y);
                    if r.abs() > AXIS_TOL {
                        return Err(MorseError::Precondition(format!(
                            "remainder does not vanish on a coordinate subspace: R({y:?}) = {r:e}"
                        )));
                    }
                }
            }
        }
        let h = self.scenario.evaluate(&self.base)?.hessian;
        let mixed = self.chart.transpose() * h * &self.chart;
        for i in 0..k {
            for j in k..n {
                if mixed[(i, j)].abs() > AXIS_TOL {
                    return Err(MorseError::Precondition(format!(
                        "mixed second derivative of the remainder is {:e}",
                        mixed[(i, j)]
                    )));
                }
            }
        }
        Ok(())
    }

    fn check_definiteness(&self) -> Result<()> {
        let per_axis = match self.dimension() {
            1 | 2 => 11,
            3 => 7,
            _ => 3,
        };
        for y in ball_grid(self.dimension(), per_axis, self.epsilon) {
            self.roots(&y)?;
        }
        Ok(())
    }
}

fn split(y: &[f64], k: usize) -> (DVector<f64>, DVector<f64>) {
    (
        DVector::from_column_slice(&y[..k]),
        DVector::from_column_slice(&y[k..]),
    )
}

/// Unit directions inside one coordinate block: the axes and, for blocks of
/// size two or more, the normalized diagonals of pairs.
fn block_directions(n: usize, (lo, hi): (usize, usize)) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for i in lo..hi {
        for s in [1.0, -1.0] {
            let mut d = vec![0.0; n];
            d[i] = s;
            out.push(d);
        }
        for j in (i + 1)..hi {
            let mut d = vec![0.0; n];
            d[i] = std::f64::consts::FRAC_1_SQRT_2;
            d[j] = -std::f64::consts::FRAC_1_SQRT_2;
            out.push(d.clone());
            d[j] = std::f64::consts::FRAC_1_SQRT_2;
            out.push(d);
        }
    }
    out
}

/// Grid points of `[-eps, eps]^n` with `per_axis` points per axis, kept
/// inside the closed ball of radius `eps`.
pub fn ball_grid(n: usize, per_axis: usize, eps: f64) -> Vec<Vec<f64>> {
    let m = per_axis.max(2);
    let total = m.pow(n as u32);
    (0..total)
        .filter_map(|mut idx| {
            let y: Vec<f64> = (0..n)
                .map(|_| {
                    let k = idx % m;
                    idx /= m;
                    -eps + 2.0 * eps * k as f64 / (m - 1) as f64
                })
                .collect();
            let r = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            (r <= eps * (1.0 + 1e-12)).then_some(y)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::find_critical_points;
    use crate::scenario::{catalog, MetricFieldSpec};

    #[test]
    fn gauss_legendre_integrates_degree_15() {
        let nodes = gauss_legendre(8);
        let sum: f64 = nodes.iter().map(|(_, w)| w).sum();
        assert!((sum - 1.0).abs() < 1e-14);
        let int: f64 = nodes.iter().map(|(x, w)| w * x.powi(15)).sum();
        assert!((int - 1.0 / 16.0).abs() < 1e-14);
    }

    #[test]
    fn quartic_operators_match_hand_computation() {
        let s = catalog::saddle_quartic(1.0);
        let p = &find_critical_points(&s, 8).unwrap()[0];
        let nf = QuadraticNormalization::new(&s, p, 0.3).unwrap();
        let (r1, r2) = nf.operators(&[0.2, -0.1]);
        // R = y1^2 y2^2 gives R1 = y2^2 and R2 = y1^2.
        assert!((r1[(0, 0)] - 0.01).abs() < 1e-14);
        assert!((r2[(0, 0)] - 0.04).abs() < 1e-14);
    }

    #[test]
    fn quadratic_function_has_trivial_normalization() {
        let s = catalog::saddle_quartic(0.0);
        let p = &find_critical_points(&s, 8).unwrap()[0];
        let nf = QuadraticNormalization::new(&s, p, 0.3).unwrap();
        let check = nf.verify(11).unwrap();
        assert_eq!(check.max_c_deviation, 0.0);
        assert!(check.max_residual < 1e-15);
    }

    #[test]
    fn torus_remainder_violates_the_precondition() {
        let s = catalog::torus(MetricFieldSpec::Identity);
        let pts = find_critical_points(&s, 8).unwrap();
        let saddle = pts.iter().find(|p| p.index == 1).unwrap();
        assert!(matches!(
            QuadraticNormalization::new(&s, saddle, 0.05),
            Err(MorseError::Precondition(_))
        ));
    }

    #[test]
    fn large_ball_asks_to_shrink() {
        let s = catalog::saddle_quartic(1.0);
        let p = &find_critical_points(&s, 8).unwrap()[0];
        match QuadraticNormalization::new(&s, p, 2.0) {
            Err(MorseError::ShrinkRadius { suggested, .. }) => assert!(suggested < 2.0),
            other => panic!("expected a shrink-radius error, got {other:?}"),
        }
    }
}
