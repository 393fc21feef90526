//! The model field `X_r` interpolating between two unstable operators.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::bump::{bump_scaled, bump_scaled_derivative};
use crate::error::{MorseError, Result};
use crate::scenario::{ModelFieldParams, Potential, VectorField};

/// `X_r(x1, x2) = (sigma A0 x1 + (1 - sigma) A1 x1, -B x2)` with
/// `sigma = rho_r(|x1|) rho_r(|x2|)`.
#[derive(Debug, Clone, Serialize)]
pub struct ModelField {
    pub a0: DMatrix<f64>,
    pub a1: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub r: f64,
    pub alpha0: f64,
    pub alpha1: f64,
    pub beta: f64,
}

fn square(rows: &[Vec<f64>], name: &str) -> Result<DMatrix<f64>> {
    let k = rows.len();
    if k == 0 || rows.iter().any(|r| r.len() != k) {
        return Err(MorseError::Validation(format!("{name} must be a non-empty square matrix")));
    }
    Ok(DMatrix::from_fn(k, k, |i, j| rows[i][j]))
}

fn spd_bounds(m: &DMatrix<f64>, name: &str) -> Result<(f64, f64)> {
    if (m - m.transpose()).amax() > 1e-12 * m.amax().max(1.0) {
        return Err(MorseError::Validation(format!("{name} is not symmetric")));
    }
    let eig = m.clone().symmetric_eigenvalues();
    let lo = eig.min();
    let hi = eig.max();
    if !(lo > 0.0) {
        return Err(MorseError::Validation(format!(
            "{name} is not positive definite (eigenvalue {lo})"
        )));
    }
    Ok((lo, hi))
}

impl ModelField {
    pub fn new(a0: DMatrix<f64>, a1: DMatrix<f64>, b: DMatrix<f64>, r: f64) -> Result<Self> {
        if a0.shape() != a1.shape() {
            return Err(MorseError::Validation("A0 and A1 must have the same size".into()));
        }
        if !(r > 0.0 && r.is_finite()) {
            return Err(MorseError::Validation("model radius must be positive".into()));
        }
        let (l0, h0) = spd_bounds(&a0, "A0")?;
        let (l1, h1) = spd_bounds(&a1, "A1")?;
        let (beta, _) = spd_bounds(&b, "B")?;
        Ok(Self {
            a0,
            a1,
            b,
            r,
            alpha0: l0.min(l1),
            alpha1: h0.max(h1),
            beta,
        })
    }

    pub fn from_params(p: &ModelFieldParams, dimension: usize) -> Result<Self> {
        let m = Self::new(square(&p.a0, "A0")?, square(&p.a1, "A1")?, square(&p.b, "B")?, p.r)?;
        if m.dim() != dimension {
            return Err(MorseError::Validation(format!(
                "model field has dimension {}, scenario has {dimension}",
                m.dim()
            )));
        }
        Ok(m)
    }

    /// Scalar model `A0 = [a0]`, `A1 = [a1]`, `B = [b]` on the plane.
    pub fn planar(a0: f64, a1: f64, b: f64, r: f64) -> Result<Self> {
        Self::new(
            DMatrix::from_element(1, 1, a0),
            DMatrix::from_element(1, 1, a1),
            DMatrix::from_element(1, 1, b),
            r,
        )
    }

    pub fn k1(&self) -> usize {
        self.a0.nrows()
    }

    pub fn k2(&self) -> usize {
        self.b.nrows()
    }

    /// Passage-time bound `ln 2 / alpha0 + ln 2 / beta` through the
    /// transition region.
    pub fn transition_time_bound(&self) -> f64 {
        std::f64::consts::LN_2 / self.alpha0 + std::f64::consts::LN_2 / self.beta
    }

    fn split<'a>(&self, x: &'a [f64]) -> (&'a [f64], &'a [f64]) {
        x.split_at(self.k1())
    }

    pub fn sigma(&self, x: &[f64]) -> f64 {
        let (x1, x2) = self.split(x);
        bump_scaled(self.r, norm(x1)) * bump_scaled(self.r, norm(x2))
    }

    pub fn potential(&self) -> SplitQuadratic {
        SplitQuadratic { k1: self.k1() }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

impl VectorField for ModelField {
    fn dim(&self) -> usize {
        self.k1() + self.k2()
    }

    fn eval(&self, x: &[f64]) -> DVector<f64> {
        let (k1, k2) = (self.k1(), self.k2());
        let (x1, x2) = self.split(x);
        let x1v = DVector::from_column_slice(x1);
        let x2v = DVector::from_column_slice(x2);
        let s = self.sigma(x);
        let top = &self.a0 * &x1v * s + &self.a1 * &x1v * (1.0 - s);
        let bottom = -(&self.b * &x2v);
        DVector::from_fn(k1 + k2, |i, _| if i < k1 { top[i] } else { bottom[i - k1] })
    }

    fn jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        let (k1, k2) = (self.k1(), self.k2());
        let n = k1 + k2;
        let (x1, x2) = self.split(x);
        let (n1, n2) = (norm(x1), norm(x2));
        let (p1, p2) = (bump_scaled(self.r, n1), bump_scaled(self.r, n2));
        let s = p1 * p2;
        let mut grad_sigma = DVector::zeros(n);
        if n1 > 0.0 {
            let d = bump_scaled_derivative(self.r, n1) * p2 / n1;
            for i in 0..k1 {
                grad_sigma[i] = d * x1[i];
            }
        }
        if n2 > 0.0 {
            let d = p1 * bump_scaled_derivative(self.r, n2) / n2;
            for i in 0..k2 {
                grad_sigma[k1 + i] = d * x2[i];
            }
        }
        let x1v = DVector::from_column_slice(x1);
        let diff = (&self.a0 - &self.a1) * &x1v;
        let mut j = DMatrix::zeros(n, n);
        let block = &self.a0 * s + &self.a1 * (1.0 - s);
        j.view_mut((0, 0), (k1, k1)).copy_from(&block);
        for i in 0..k1 {
            for c in 0..n {
                j[(i, c)] += diff[i] * grad_sigma[c];
            }
        }
        j.view_mut((k1, k1), (k2, k2)).copy_from(&(-&self.b));
        j
    }
}

/// `f = -1/2 |x1|^2 + 1/2 |x2|^2`, a Lyapunov function for every model field.
#[derive(Debug, Clone, Copy)]
pub struct SplitQuadratic {
    pub k1: usize,
}

impl Potential for SplitQuadratic {
    fn value(&self, x: &[f64]) -> f64 {
        x.iter()
            .enumerate()
            .map(|(i, v)| if i < self.k1 { -0.5 * v * v } else { 0.5 * v * v })
            .sum()
    }

    fn gradient(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_fn(x.len(), |i, _| if i < self.k1 { -x[i] } else { x[i] })
    }
}
