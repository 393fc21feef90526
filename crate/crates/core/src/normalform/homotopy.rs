//! Homotopy from the negative gradient to a field that is locally trivial
//! in the unstable block near one critical point.

use nalgebra::{DMatrix, DVector};

use super::bump::{bump_scaled, bump_scaled_derivative};
use crate::error::{MorseError, Result};
use crate::geometry::CriticalPoint;
use crate::scenario::{Scenario, VectorField};

/// `Y_{r,s} = X + s sigma(c) F1 (c1 - P1 X)` in chart coordinates
/// `c = F^T A(p) (x - p)`, where `F = [F1 | F2]` holds the G-orthonormal
/// spectral frames at `p` and `P1 = F1^T A(p)`.
///
/// Inside `|c1|, |c2| <= r/2` and at `s = 1` the unstable chart block of
/// the field is exactly `c1`; outside the polydisk of radius `r` every
/// member equals `X`.
#[derive(Debug, Clone)]
pub struct FieldHomotopy {
    scenario: Scenario,
    point: CriticalPoint,
    r: f64,
    frame: DMatrix<f64>,
    /// `F^T A(p)`: maps displacements to chart coordinates.
    to_chart: DMatrix<f64>,
}

impl FieldHomotopy {
    pub fn new(scenario: &Scenario, point: &CriticalPoint, r: f64) -> Result<Self> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(MorseError::Validation("homotopy radius must be positive".into()));
        }
        let n = scenario.dimension();
        let mut cols = point.neg_frame.clone();
        cols.extend(point.pos_frame.iter().cloned());
        let frame = DMatrix::from_fn(n, n, |i, j| cols[j][i]);
        let a = scenario.metric_at(&point.location);
        let to_chart = frame.transpose() * &a;
        let h = Self {
            scenario: scenario.with_field(crate::scenario::VectorFieldSpec::NegativeGradient),
            point: point.clone(),
            r,
            frame,
            to_chart,
        };
        h.check_chart()?;
        Ok(h)
    }

    pub fn radius(&self) -> f64 {
        self.r
    }

    pub fn point(&self) -> &CriticalPoint {
        &self.point
    }

    pub fn member(&self, s: f64) -> Result<HomotopyMember<'_>> {
        if !(0.0..=1.0).contains(&s) {
            return Err(MorseError::Validation(format!("homotopy parameter {s} outside [0, 1]")));
        }
        Ok(HomotopyMember { homotopy: self, s })
    }

    /// Chart coordinates of `x`.
    pub fn chart(&self, x: &[f64]) -> DVector<f64> {
        &self.to_chart * self.scenario.space().displacement(&self.point.location, x)
    }

    /// Point with chart coordinates `c`.
    pub fn point_at(&self, c: &DVector<f64>) -> Vec<f64> {
        let d = &self.frame * c;
        self.point.location.iter().zip(d.iter()).map(|(p, di)| p + di).collect()
    }

    fn k(&self) -> usize {
        self.point.index
    }

    fn base(&self, x: &[f64]) -> DVector<f64> {
        self.scenario
            .negative_gradient(x)
            .unwrap_or_else(|_| DVector::from_element(x.len(), f64::NAN))
    }

    fn sigma_and_gradient(&self, c: &DVector<f64>) -> (f64, DVector<f64>) {
        let k = self.k();
        let n = c.len();
        let n1 = c.rows(0, k).norm();
        let n2 = c.rows(k, n - k).norm();
        let (p1, p2) = (bump_scaled(self.r, n1), bump_scaled(self.r, n2));
        let mut grad = DVector::zeros(n);
        if n1 > 0.0 {
            let d = bump_scaled_derivative(self.r, n1) * p2 / n1;
            for i in 0..k {
                grad[i] = d * c[i];
            }
        }
        if n2 > 0.0 {
            let d = p1 * bump_scaled_derivative(self.r, n2) / n2;
            for i in k..n {
                grad[i] = d * c[i];
            }
        }
        (p1 * p2, grad)
    }

    /// The chart must make both spectral subspaces invariant to first order:
    /// along each chart axis inside the working polydisk, the field has no
    /// component in the complementary block.
    fn check_chart(&self) -> Result<()> {
        let n = self.frame.nrows();
        let k = self.k();
        for axis in 0..n {
            for frac in [0.1, 0.25, 0.5, 0.75, 1.0] {
                for sign in [1.0, -1.0] {
                    let mut c = DVector::zeros(n);
                    c[axis] = sign * frac * self.r;
                    let x = self.point_at(&c);
                    let v = &self.to_chart * self.base(&x);
                    let scale = v.norm().max(f64::MIN_POSITIVE);
                    let off = if axis < k {
                        v.rows(k, n - k).norm()
                    } else {
                        v.rows(0, k).norm()
                    };
                    if off > 1e-8 * scale.max(1.0) {
                        return Err(MorseError::Precondition(format!(
                            "spectral subspaces at critical point {} are not invariant in the chart \
                             (cross component {off:e} along axis {axis})",
                            self.point.id
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// One member `Y_{r,s}` of a [`FieldHomotopy`].
#[derive(Debug, Clone, Copy)]
pub struct HomotopyMember<'a> {
    homotopy: &'a FieldHomotopy,
    s: f64,
}

impl HomotopyMember<'_> {
    pub fn s(&self) -> f64 {
        self.s
    }
}

impl VectorField for HomotopyMember<'_> {
    fn dim(&self) -> usize {
        self.homotopy.frame.nrows()
    }

    fn eval(&self, x: &[f64]) -> DVector<f64> {
        let h = self.homotopy;
        let base = h.base(x);
        if self.s == 0.0 {
            return base;
        }
        let c = h.chart(x);
        let (sigma, _) = h.sigma_and_gradient(&c);
        if sigma == 0.0 {
            return base;
        }
        let k = h.k();
        let f1 = h.frame.columns(0, k);
        let p1 = h.to_chart.rows(0, k);
        let w = c.rows(0, k) - p1 * &base;
        base + f1 * w * (self.s * sigma)
    }

    fn jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        let h = self.homotopy;
        let dx = h
            .scenario
            .negative_gradient_jacobian(x)
            .unwrap_or_else(|_| DMatrix::from_element(x.len(), x.len(), f64::NAN));
        if self.s == 0.0 {
            return dx;
        }
        let c = h.chart(x);
        let (sigma, grad_c) = h.sigma_and_gradient(&c);
        if sigma == 0.0 && grad_c.iter().all(|g| *g == 0.0) {
            return dx;
        }
        let k = h.k();
        let base = h.base(x);
        let f1 = h.frame.columns(0, k);
        let p1 = h.to_chart.rows(0, k);
        let w = c.rows(0, k) - p1 * &base;
        let grad_x = h.to_chart.transpose() * grad_c;
        let term1 = &f1 * &w * grad_x.transpose();
        let term2 = f1 * (p1 - p1 * &dx) * sigma;
        dx + (term1 + term2) * self.s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::find_critical_points;
    use crate::scenario::catalog;

    fn setup() -> (Scenario, Vec<CriticalPoint>) {
        let s = catalog::torus(catalog::constant_metric(vec![vec![1.0, 0.0], vec![0.0, 2.0]]));
        let pts = find_critical_points(&s, 8).unwrap();
        (s, pts)
    }

    #[test]
    fn endpoints_and_support() {
        let (s, pts) = setup();
        let saddle = pts.iter().find(|p| p.index == 1).unwrap();
        let h = FieldHomotopy::new(&s, saddle, 0.1).unwrap();
        let y0 = h.member(0.0).unwrap();
        let y1 = h.member(1.0).unwrap();
        for x in [[0.51, 0.02], [0.3, 0.7], [saddle.location[0] + 0.03, saddle.location[1] - 0.02]] {
            assert_eq!(y0.eval(&x), s.negative_gradient(&x).unwrap());
        }
        // Outside the polydisk every member is the base field.
        let far = h.point_at(&DVector::from_vec(vec![0.15, 0.0]));
        assert_eq!(y1.eval(&far), s.negative_gradient(&far).unwrap());
        // Inside r/2 the unstable chart block of Y_{r,1} is c1.
        let x = h.point_at(&DVector::from_vec(vec![0.02, -0.03]));
        let v = &h.to_chart * y1.eval(&x);
        assert!((v[0] - 0.02).abs() < 1e-14, "{}", v[0]);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let (s, pts) = setup();
        let saddle = pts.iter().find(|p| p.index == 1).unwrap();
        let h = FieldHomotopy::new(&s, saddle, 0.1).unwrap();
        let m = h.member(0.7).unwrap();
        let x = h.point_at(&DVector::from_vec(vec![0.061, -0.047]));
        let j = m.jacobian(&x);
        let eps = 1e-7;
        for c in 0..2 {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[c] += eps;
            xm[c] -= eps;
            let fd = (m.eval(&xp) - m.eval(&xm)) / (2.0 * eps);
            for i in 0..2 {
                assert!((fd[i] - j[(i, c)]).abs() < 1e-5 * (1.0 + j[(i, c)].abs()));
            }
        }
    }

    #[test]
    fn members_are_gradient_like() {
        let (s, pts) = setup();
        let saddle = pts.iter().find(|p| p.index == 1).unwrap();
        let h = FieldHomotopy::new(&s, saddle, 0.1).unwrap();
        for sv in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let m = h.member(sv).unwrap();
            for i in 0..21 {
                for j in 0..21 {
                    let c = DVector::from_vec(vec![-0.1 + 0.01 * i as f64, -0.1 + 0.01 * j as f64]);
                    if c.norm() < 1e-12 {
                        continue;
                    }
                    let x = h.point_at(&c);
                    assert!(m.eval(&x).dot(&s.gradient(&x)) < 0.0);
                }
            }
        }
    }

    #[test]
    fn tilted_subspaces_violate_the_chart() {
        // x^3 keeps both axes invariant; x^2 y bends the unstable manifold
        // off the x axis.
        let s = Scenario::from_json(
            r#"{"dimension":2,"topology":{"kind":"euclidean","local":true},
                "function":{"family":"quadratic_plus_term","params":{"index":1,
                    "extra":[{"coefficient":1.0,"exponents":[3,0]}]}},
                "metric":{"family":"identity"}}"#,
        )
        .unwrap();
        let pts = crate::geometry::find_critical_points(&s, 8).unwrap();
        let saddle = pts.iter().find(|p| p.index == 1).unwrap();
        assert!(FieldHomotopy::new(&s, saddle, 0.1).is_ok());
        let s = Scenario::from_json(
            r#"{"dimension":2,"topology":{"kind":"euclidean","local":true},
                "function":{"family":"quadratic_plus_term","params":{"index":1,
                    "extra":[{"coefficient":1.0,"exponents":[2,1]}]}},
                "metric":{"family":"identity"}}"#,
        )
        .unwrap();
        let pts = crate::geometry::find_critical_points(&s, 8).unwrap();
        let saddle = pts.iter().find(|p| p.index == 1 && p.location[0].abs() < 1e-9).unwrap();
        assert!(matches!(FieldHomotopy::new(&s, saddle, 0.1), Err(MorseError::Precondition(_))));
    }
}
