//! Catalog of Riemannian metrics, each given by an SPD matrix field `A(x)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::function::{MorseFunctionSpec, SeparableFunction};
use super::ScenarioSpace;
use crate::error::{MorseError, Result};
use crate::normalform::bump::{bump_scaled, bump_scaled_derivative};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantSpdParams {
    pub matrix: Vec<Vec<f64>>,
}

/// `A(x) = exp(phi(x)) I` with `phi` from the function catalog.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConformalParams {
    pub log_factor: MorseFunctionSpec,
}

/// `A(x) = I + rho_R(|x - point|) (M - I)`: equals `M` near `point`,
/// the identity outside radius `R`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockConstantParams {
    pub point: Vec<f64>,
    pub matrix: Vec<Vec<f64>>,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case", deny_unknown_fields)]
pub enum MetricFieldSpec {
    Identity,
    ConstantSpd(ConstantSpdParams),
    Conformal(ConformalParams),
    BlockConstantNearPoint(BlockConstantParams),
}

#[derive(Debug, Clone)]
pub(crate) enum Metric {
    Identity(usize),
    Constant(DMatrix<f64>),
    Conformal(SeparableFunction),
    BlockConstant {
        point: Vec<f64>,
        delta: DMatrix<f64>,
        radius: f64,
    },
}

fn matrix_from_rows(rows: &[Vec<f64>], n: usize) -> Result<DMatrix<f64>> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(MorseError::Validation(format!("metric matrix must be {n}x{n}")));
    }
    let m = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
    check_spd(&m)?;
    Ok(m)
}

pub(crate) fn check_spd(m: &DMatrix<f64>) -> Result<()> {
    let n = m.nrows();
    for i in 0..n {
        for j in 0..i {
            let scale = 1.0f64.max(m[(i, j)].abs());
            if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 * scale {
                return Err(MorseError::Validation(format!(
                    "metric matrix is not symmetric at ({i},{j})"
                )));
            }
        }
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(MorseError::Validation("metric matrix is not finite".into()));
    }
    let eig = m.clone().symmetric_eigenvalues();
    let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    if min <= 0.0 {
        return Err(MorseError::Validation(format!(
            "metric matrix is not positive definite (eigenvalue {min})"
        )));
    }
    Ok(())
}

impl Metric {
    pub(crate) fn compile(spec: &MetricFieldSpec, space: &ScenarioSpace) -> Result<Self> {
        let n = space.dimension();
        Ok(match spec {
            MetricFieldSpec::Identity => Metric::Identity(n),
            MetricFieldSpec::ConstantSpd(p) => Metric::Constant(matrix_from_rows(&p.matrix, n)?),
            MetricFieldSpec::Conformal(p) => {
                Metric::Conformal(SeparableFunction::compile(&p.log_factor, n, &space.periods())?)
            }
            MetricFieldSpec::BlockConstantNearPoint(p) => {
                if p.point.len() != n {
                    return Err(MorseError::Validation("metric point has wrong dimension".into()));
                }
                if !(p.radius > 0.0) {
                    return Err(MorseError::Validation("metric radius must be positive".into()));
                }
                let m = matrix_from_rows(&p.matrix, n)?;
                Metric::BlockConstant {
                    point: p.point.clone(),
                    delta: m - DMatrix::identity(n, n),
                    radius: p.radius,
                }
            }
        })
    }

    pub(crate) fn is_constant(&self) -> bool {
        matches!(self, Metric::Identity(_) | Metric::Constant(_))
    }

    pub(crate) fn matrix(&self, space: &ScenarioSpace, x: &[f64]) -> DMatrix<f64> {
        match self {
            Metric::Identity(n) => DMatrix::identity(*n, *n),
            Metric::Constant(m) => m.clone(),
            Metric::Conformal(phi) => {
                let n = phi.dimension();
                DMatrix::identity(n, n) * phi.value(x).exp()
            }
            Metric::BlockConstant {
                point,
                delta,
                radius,
            } => {
                let n = delta.nrows();
                let d = space.displacement(point, x);
                let w = bump_scaled(*radius, d.norm());
                DMatrix::identity(n, n) + delta * w
            }
        }
    }

    /// Partial derivatives `dA/dx_k`, or `None` for constant metrics.
    pub(crate) fn partials(&self, space: &ScenarioSpace, x: &[f64]) -> Option<Vec<DMatrix<f64>>> {
        match self {
            Metric::Identity(_) | Metric::Constant(_) => None,
            Metric::Conformal(phi) => {
                let n = phi.dimension();
                let e = phi.value(x).exp();
                let g = phi.gradient(x);
                Some(g.iter().map(|gk| DMatrix::identity(n, n) * (e * gk)).collect())
            }
            Metric::BlockConstant {
                point,
                delta,
                radius,
            } => {
                let d: DVector<f64> = space.displacement(point, x);
                let r = d.norm();
                let n = delta.nrows();
                if r == 0.0 {
                    return Some(vec![DMatrix::zeros(n, n); n]);
                }
                let dw = bump_scaled_derivative(*radius, r);
                Some((0..n).map(|k| delta * (dw * d[k] / r)).collect())
            }
        }
    }
}
