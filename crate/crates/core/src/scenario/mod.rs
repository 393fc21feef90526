//! The computational universe: space, Morse function, metric and field.

pub mod function;
pub mod metric;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{MorseError, Result};
pub use function::{Monomial, MorseFunctionSpec, SeparableFunction, TrigKind, TrigTerm};
use metric::Metric;
pub use metric::MetricFieldSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TopologySpec {
    Euclidean {
        /// Local scenarios skip the global properness check; they are
        /// meant for chart-level analysis only.
        #[serde(default, skip_serializing_if = "std::ops::Not::not")]
        local: bool,
    },
    Torus {
        periods: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HomotopyMemberParams {
    pub critical_point: usize,
    pub r: f64,
    pub s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFieldParams {
    pub a0: Vec<Vec<f64>>,
    pub a1: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    pub r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case", deny_unknown_fields)]
pub enum VectorFieldSpec {
    NegativeGradient,
    HomotopyMember(HomotopyMemberParams),
    ExplicitModel(ModelFieldParams),
}

/// On-disk scenario document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub dimension: usize,
    pub topology: TopologySpec,
    pub function: MorseFunctionSpec,
    pub metric: MetricFieldSpec,
    #[serde(default = "default_field")]
    pub field: VectorFieldSpec,
}

fn default_field() -> VectorFieldSpec {
    VectorFieldSpec::NegativeGradient
}

#[derive(Debug, Clone, PartialEq)]
pub enum Topology {
    Euclidean,
    Torus(Vec<f64>),
}

/// Dimension plus topology; all point arithmetic goes through here so
/// that torus quotients are handled in one place.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpace {
    dimension: usize,
    topology: Topology,
}

impl ScenarioSpace {
    pub fn euclidean(dimension: usize) -> Result<Self> {
        if dimension == 0 {
            return Err(MorseError::Validation("dimension must be at least 1".into()));
        }
        Ok(Self {
            dimension,
            topology: Topology::Euclidean,
        })
    }

    pub fn torus(periods: Vec<f64>) -> Result<Self> {
        if periods.is_empty() {
            return Err(MorseError::Validation("dimension must be at least 1".into()));
        }
        if periods.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
            return Err(MorseError::Validation("torus periods must be positive".into()));
        }
        Ok(Self {
            dimension: periods.len(),
            topology: Topology::Torus(periods),
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn is_torus(&self) -> bool {
        matches!(self.topology, Topology::Torus(_))
    }

    /// Length scales for trigonometric frequencies (unit on Euclidean space).
    pub fn periods(&self) -> Vec<f64> {
        match &self.topology {
            Topology::Euclidean => vec![1.0; self.dimension],
            Topology::Torus(p) => p.clone(),
        }
    }

    /// Reduce into the fundamental domain `[0, period)` on a torus.
    pub fn wrap(&self, x: &[f64]) -> Vec<f64> {
        match &self.topology {
            Topology::Euclidean => x.to_vec(),
            Topology::Torus(periods) => x
                .iter()
                .zip(periods)
                .map(|(&xi, &p)| {
                    let r = xi.rem_euclid(p);
                    if r >= p {
                        0.0
                    } else {
                        r
                    }
                })
                .collect(),
        }
    }

    /// Minimal representative of `to - from`.
    pub fn displacement(&self, from: &[f64], to: &[f64]) -> DVector<f64> {
        match &self.topology {
            Topology::Euclidean => DVector::from_fn(self.dimension, |i, _| to[i] - from[i]),
            Topology::Torus(periods) => DVector::from_fn(self.dimension, |i, _| {
                let p = periods[i];
                let d = to[i] - from[i];
                d - p * (d / p).round()
            }),
        }
    }

    /// Quotient distance.
    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        self.displacement(a, b).norm()
    }

    /// Lattice translation taking the representative `base` to the lift
    /// closest to `x` (all zeros on Euclidean space).
    pub fn lattice_offset(&self, base: &[f64], x: &[f64]) -> Vec<i64> {
        match &self.topology {
            Topology::Euclidean => vec![0; self.dimension],
            Topology::Torus(periods) => x
                .iter()
                .zip(base)
                .zip(periods)
                .map(|((&xi, &bi), &p)| ((xi - bi) / p).round() as i64)
                .collect(),
        }
    }
}

/// Value and exact derivatives up to order three.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DerivativeBundle {
    pub value: f64,
    pub gradient: DVector<f64>,
    pub hessian: DMatrix<f64>,
    third: Vec<f64>,
}

impl DerivativeBundle {
    pub(crate) fn from_parts(value: f64, gradient: Vec<f64>, hessian: Vec<f64>, third: Vec<f64>) -> Self {
        let n = gradient.len();
        Self {
            value,
            gradient: DVector::from_vec(gradient),
            hessian: DMatrix::from_row_slice(n, n, &hessian),
            third,
        }
    }

    pub fn dimension(&self) -> usize {
        self.gradient.len()
    }

    pub fn third(&self, i: usize, j: usize, k: usize) -> f64 {
        let n = self.dimension();
        self.third[(i * n + j) * n + k]
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
            && self.gradient.iter().all(|v| v.is_finite())
            && self.hessian.iter().all(|v| v.is_finite())
            && self.third.iter().all(|v| v.is_finite())
    }
}

/// A smooth vector field with its spatial derivative.
pub trait VectorField: Send + Sync {
    fn dim(&self) -> usize;
    fn eval(&self, x: &[f64]) -> DVector<f64>;
    fn jacobian(&self, x: &[f64]) -> DMatrix<f64>;
}

/// A Lyapunov function for a field: level-set events are taken on it.
pub trait Potential: Send + Sync {
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> DVector<f64>;
}

/// A validated, immutable scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    space: ScenarioSpace,
    function: SeparableFunction,
    metric: Metric,
    field: VectorFieldSpec,
    local: bool,
    file: ScenarioFile,
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let text = std::fs::read_to_string(path.as_ref())?;
    Scenario::from_json(&text)
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let file: ScenarioFile = serde_json::from_str(text)?;
        Self::from_file(file)
    }

    pub fn from_file(file: ScenarioFile) -> Result<Self> {
        let (space, local) = match &file.topology {
            TopologySpec::Euclidean { local } => (ScenarioSpace::euclidean(file.dimension)?, *local),
            TopologySpec::Torus { periods } => {
                if periods.len() != file.dimension {
                    return Err(MorseError::Validation(format!(
                        "torus has {} periods but dimension is {}",
                        periods.len(),
                        file.dimension
                    )));
                }
                (ScenarioSpace::torus(periods.clone())?, false)
            }
        };
        let function = SeparableFunction::compile(&file.function, file.dimension, &space.periods())?;
        let metric = Metric::compile(&file.metric, &space)?;
        let scenario = Self {
            space,
            function,
            metric,
            field: file.field.clone(),
            local,
            file,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn space(&self) -> &ScenarioSpace {
        &self.space
    }

    pub fn dimension(&self) -> usize {
        self.space.dimension
    }

    pub fn file(&self) -> &ScenarioFile {
        &self.file
    }

    pub fn field_spec(&self) -> &VectorFieldSpec {
        &self.field
    }

    pub fn is_local(&self) -> bool {
        self.local
    }

    pub fn has_constant_metric(&self) -> bool {
        self.metric.is_constant()
    }

    /// Same scenario with a different field selection.
    pub fn with_field(&self, field: VectorFieldSpec) -> Self {
        let mut out = self.clone();
        out.file.field = field.clone();
        out.field = field;
        out
    }

    /// Exact derivatives to order three. Periodic families accept
    /// unreduced points.
    pub fn evaluate(&self, x: &[f64]) -> Result<DerivativeBundle> {
        self.check_point(x)?;
        Ok(self.function.bundle(x))
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dimension() {
            return Err(MorseError::Validation(format!(
                "point has dimension {}, expected {}",
                x.len(),
                self.dimension()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(MorseError::NonFinite(format!("{x:?}")));
        }
        Ok(())
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.function.value(x)
    }

    pub fn gradient(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_vec(self.function.gradient(x))
    }

    pub fn metric_at(&self, x: &[f64]) -> DMatrix<f64> {
        self.metric.matrix(&self.space, x)
    }

    /// `-A(x)^{-1} grad f(x)`: the negative gradient with respect to the metric.
    pub fn negative_gradient(&self, x: &[f64]) -> Result<DVector<f64>> {
        let g = self.gradient(x);
        let a = self.metric_at(x);
        let chol = a
            .cholesky()
            .ok_or_else(|| MorseError::SingularMetric(x.to_vec()))?;
        Ok(-chol.solve(&g))
    }

    /// Spatial derivative of the negative gradient field.
    pub fn negative_gradient_jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let b = self.function.bundle(x);
        let a = self.metric_at(x);
        let chol = a
            .cholesky()
            .ok_or_else(|| MorseError::SingularMetric(x.to_vec()))?;
        let mut jac = -chol.solve(&b.hessian);
        if let Some(partials) = self.metric.partials(&self.space, x) {
            let ainv_g = chol.solve(&b.gradient);
            for (k, dak) in partials.iter().enumerate() {
                let col = chol.solve(&(dak * &ainv_g));
                for i in 0..self.dimension() {
                    jac[(i, k)] += col[i];
                }
            }
        }
        Ok(jac)
    }

    /// Field value for the field kinds that need no extra context.
    pub fn field_at(&self, spec: &VectorFieldSpec, x: &[f64]) -> Result<DVector<f64>> {
        self.check_point(x)?;
        match spec {
            VectorFieldSpec::NegativeGradient => self.negative_gradient(x),
            VectorFieldSpec::ExplicitModel(p) => {
                let model = crate::normalform::ModelField::from_params(p, self.dimension())?;
                Ok(model.eval(x))
            }
            VectorFieldSpec::HomotopyMember(_) => Err(MorseError::Precondition(
                "homotopy members need critical points; use pipeline::resolve_field".into(),
            )),
        }
    }

    pub fn negative_gradient_field(&self) -> NegativeGradientField<'_> {
        NegativeGradientField { scenario: self }
    }

    /// Probe points: a grid of `m^n` points (`m = 10`, capped at `10^4`
    /// points overall) over the fundamental domain or `[-2, 2]^n`.
    pub fn probe_grid(&self) -> Vec<Vec<f64>> {
        let n = self.dimension();
        let mut per_axis = 10usize;
        while per_axis > 2 && (per_axis as f64).powi(n as i32) > 1e4 {
            per_axis -= 1;
        }
        let (lo, width): (Vec<f64>, Vec<f64>) = match &self.space.topology {
            Topology::Torus(p) => (vec![0.0; n], p.clone()),
            Topology::Euclidean => (vec![-2.0; n], vec![4.0; n]),
        };
        let total = per_axis.pow(n as u32);
        let offset = match &self.space.topology {
            Topology::Torus(_) => 0.0,
            Topology::Euclidean => 0.5,
        };
        (0..total)
            .map(|mut idx| {
                (0..n)
                    .map(|i| {
                        let k = idx % per_axis;
                        idx /= per_axis;
                        // Shift torus probes off the symmetric lattice points.
                        let t = (k as f64 + offset + if offset == 0.0 { 0.137 } else { 0.0 })
                            / per_axis as f64;
                        lo[i] + width[i] * t
                    })
                    .collect()
            })
            .collect()
    }

    fn validate(&self) -> Result<()> {
        let probes = self.probe_grid();
        let model = match &self.field {
            VectorFieldSpec::ExplicitModel(p) => {
                Some(crate::normalform::ModelField::from_params(p, self.dimension())?)
            }
            _ => None,
        };
        for x in &probes {
            let b = self.function.bundle(x);
            if !b.is_finite() {
                return Err(MorseError::Validation(format!("function not finite at {x:?}")));
            }
            let a = self.metric_at(x);
            metric::check_spd(&a)
                .map_err(|e| MorseError::Validation(format!("metric at {x:?}: {e}")))?;
            if b.gradient.norm() > 1e-8 {
                let v = match &model {
                    Some(m) => m.eval(x),
                    None => match &self.field {
                        VectorFieldSpec::NegativeGradient => self.negative_gradient(x)?,
                        _ => continue,
                    },
                };
                if v.dot(&b.gradient) >= 0.0 {
                    return Err(MorseError::Validation(format!(
                        "field is not gradient-like at {x:?}"
                    )));
                }
            }
        }
        if matches!(self.space.topology, Topology::Euclidean) && !self.local {
            self.check_properness(&probes)?;
        }
        Ok(())
    }

    fn check_properness(&self, probes: &[Vec<f64>]) -> Result<()> {
        if self.function.is_periodic() {
            return Err(MorseError::Validation(
                "trig_polynomial functions are bounded and not proper on euclidean space".into(),
            ));
        }
        let n = self.dimension();
        let mut directions: Vec<DVector<f64>> = Vec::new();
        for i in 0..n {
            for s in [1.0, -1.0] {
                let mut d = DVector::zeros(n);
                d[i] = s;
                directions.push(d);
            }
        }
        if n <= 8 {
            for mask in 0..(1usize << n) {
                let d = DVector::from_fn(n, |i, _| if mask >> i & 1 == 1 { -1.0 } else { 1.0 });
                directions.push(d / (n as f64).sqrt());
            }
        }
        let ring_min = |radius: f64| {
            directions
                .iter()
                .map(|d| self.value((d * radius).as_slice()))
                .fold(f64::INFINITY, f64::min)
        };
        let inner_max = probes
            .iter()
            .map(|x| self.value(x))
            .fold(f64::NEG_INFINITY, f64::max);
        let radii = [10.0, 100.0, 1000.0];
        let mins: Vec<f64> = radii.iter().map(|&r| ring_min(r)).collect();
        let growing = mins.windows(2).all(|w| w[1] > w[0]);
        if !growing || mins[2] <= inner_max || mins.iter().any(|m| !m.is_finite()) {
            return Err(MorseError::Validation(format!(
                "function does not look proper: probe ring minima {mins:?} vs interior max {inner_max}"
            )));
        }
        Ok(())
    }
}

impl Potential for Scenario {
    fn value(&self, x: &[f64]) -> f64 {
        self.function.value(x)
    }
    fn gradient(&self, x: &[f64]) -> DVector<f64> {
        Scenario::gradient(self, x)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct NegativeGradientField<'a> {
    scenario: &'a Scenario,
}

impl VectorField for NegativeGradientField<'_> {
    fn dim(&self) -> usize {
        self.scenario.dimension()
    }

    fn eval(&self, x: &[f64]) -> DVector<f64> {
        // The metric is validated SPD; a failed solve yields NaN, which the
        // integrator reports as non-finite.
        self.scenario
            .negative_gradient(x)
            .unwrap_or_else(|_| DVector::from_element(x.len(), f64::NAN))
    }

    fn jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        self.scenario
            .negative_gradient_jacobian(x)
            .unwrap_or_else(|_| DMatrix::from_element(x.len(), x.len(), f64::NAN))
    }
}

/// Convenience constructors for the catalog scenarios used in examples and tests.
pub mod catalog {
    use super::*;

    fn cos_terms(n: usize) -> Vec<TrigTerm> {
        (0..n)
            .map(|i| {
                let mut kinds = vec![TrigKind::Const; n];
                let mut frequencies = vec![0; n];
                kinds[i] = TrigKind::Cos;
                frequencies[i] = 1;
                TrigTerm {
                    coefficient: 1.0,
                    kinds,
                    frequencies,
                }
            })
            .collect()
    }

    /// `f = cos 2 pi x + cos 2 pi y` on the unit torus.
    pub fn torus_file(metric: MetricFieldSpec) -> ScenarioFile {
        ScenarioFile {
            dimension: 2,
            topology: TopologySpec::Torus {
                periods: vec![1.0, 1.0],
            },
            function: MorseFunctionSpec::TrigPolynomial(function::TrigParams { terms: cos_terms(2) }),
            metric,
            field: VectorFieldSpec::NegativeGradient,
        }
    }

    pub fn torus(metric: MetricFieldSpec) -> Scenario {
        Scenario::from_file(torus_file(metric)).expect("catalog torus is valid")
    }

    /// `A(x) = exp(amplitude sin 2 pi x cos 2 pi y) I`.
    pub fn conformal_sin_cos(amplitude: f64) -> MetricFieldSpec {
        MetricFieldSpec::Conformal(metric::ConformalParams {
            log_factor: MorseFunctionSpec::TrigPolynomial(function::TrigParams {
                terms: vec![TrigTerm {
                    coefficient: amplitude,
                    kinds: vec![TrigKind::Sin, TrigKind::Cos],
                    frequencies: vec![1, 1],
                }],
            }),
        })
    }

    pub fn constant_metric(rows: Vec<Vec<f64>>) -> MetricFieldSpec {
        MetricFieldSpec::ConstantSpd(metric::ConstantSpdParams { matrix: rows })
    }

    fn mono(coefficient: f64, exponents: &[u32]) -> Monomial {
        Monomial {
            coefficient,
            exponents: exponents.to_vec(),
        }
    }

    /// `f = (x^2 - 1)^2 + y^2` on the plane.
    pub fn double_well_file() -> ScenarioFile {
        ScenarioFile {
            dimension: 2,
            topology: TopologySpec::Euclidean { local: false },
            function: MorseFunctionSpec::Polynomial(function::PolynomialParams {
                terms: vec![
                    mono(1.0, &[4, 0]),
                    mono(-2.0, &[2, 0]),
                    mono(1.0, &[0, 0]),
                    mono(1.0, &[0, 2]),
                ],
            }),
            metric: MetricFieldSpec::Identity,
            field: VectorFieldSpec::NegativeGradient,
        }
    }

    pub fn double_well() -> Scenario {
        Scenario::from_file(double_well_file()).expect("catalog double well is valid")
    }

    /// `f = |x|^2` on `R^n`.
    pub fn paraboloid(n: usize) -> Scenario {
        let terms = (0..n)
            .map(|i| {
                let mut e = vec![0; n];
                e[i] = 2;
                mono(1.0, &e)
            })
            .collect();
        Scenario::from_file(ScenarioFile {
            dimension: n,
            topology: TopologySpec::Euclidean { local: false },
            function: MorseFunctionSpec::Polynomial(function::PolynomialParams { terms }),
            metric: MetricFieldSpec::Identity,
            field: VectorFieldSpec::NegativeGradient,
        })
        .expect("paraboloid is valid")
    }

    /// `f = -1/2 x^2 + 1/2 y^2 + c x^2 y^2` as a local chart scenario.
    pub fn saddle_quartic(c: f64) -> Scenario {
        let extra = if c == 0.0 { vec![] } else { vec![mono(c, &[2, 2])] };
        Scenario::from_file(ScenarioFile {
            dimension: 2,
            topology: TopologySpec::Euclidean { local: true },
            function: MorseFunctionSpec::QuadraticPlusTerm(function::QuadraticPlusTermParams {
                index: 1,
                extra,
            }),
            metric: MetricFieldSpec::Identity,
            field: VectorFieldSpec::NegativeGradient,
        })
        .expect("saddle quartic is valid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    const TORUS_JSON: &str = r#"{
        "dimension": 2,
        "topology": {"kind": "torus", "periods": [1.0, 1.0]},
        "function": {"family": "trig_polynomial", "params": {"terms": [
            {"coefficient": 1.0, "kinds": ["cos", "const"], "frequencies": [1, 0]},
            {"coefficient": 1.0, "kinds": ["const", "cos"], "frequencies": [0, 1]}]}},
        "metric": {"family": "identity"},
        "field": {"kind": "negative_gradient"}
    }"#;

    #[test]
    fn torus_file_loads() {
        let s = Scenario::from_json(TORUS_JSON).unwrap();
        assert_eq!(s.dimension(), 2);
        assert_eq!(s.space().topology(), &Topology::Torus(vec![1.0, 1.0]));
    }

    #[test]
    fn indefinite_metric_is_rejected() {
        let text = TORUS_JSON.replace(
            r#"{"family": "identity"}"#,
            r#"{"family": "constant_spd", "params": {"matrix": [[1.0, 2.0], [2.0, 1.0]]}}"#,
        );
        match Scenario::from_json(&text) {
            Err(MorseError::Validation(msg)) => assert!(msg.contains("positive definite"), "{msg}"),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_keys_and_families_are_errors() {
        let extra = TORUS_JSON.replacen("\"dimension\": 2,", "\"dimension\": 2, \"colour\": 3,", 1);
        assert!(matches!(Scenario::from_json(&extra), Err(MorseError::Parse(_))));
        let fam = TORUS_JSON.replace("trig_polynomial", "spline");
        assert!(matches!(Scenario::from_json(&fam), Err(MorseError::Parse(_))));
        let bad = TORUS_JSON.replace("\"periods\": [1.0, 1.0]", "\"periods\": [1.0, -1.0]");
        assert!(matches!(Scenario::from_json(&bad), Err(MorseError::Validation(_))));
    }

    #[test]
    fn trig_on_plane_is_not_proper() {
        let text = TORUS_JSON.replace(
            r#"{"kind": "torus", "periods": [1.0, 1.0]}"#,
            r#"{"kind": "euclidean"}"#,
        );
        assert!(matches!(Scenario::from_json(&text), Err(MorseError::Validation(_))));
    }

    #[test]
    fn double_well_is_proper_and_evaluates() {
        let s = catalog::double_well();
        let b = s.evaluate(&[1.0, 0.0]).unwrap();
        assert!(b.value.abs() < 1e-15);
        assert!(b.gradient.norm() < 1e-15);
        assert!((b.hessian[(0, 0)] - 8.0).abs() < 1e-14);
        assert!((b.hessian[(1, 1)] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn field_examples() {
        let s = catalog::torus(MetricFieldSpec::Identity);
        let v = s.field_at(&VectorFieldSpec::NegativeGradient, &[0.25, 0.0]).unwrap();
        assert!((v[0] - 2.0 * PI).abs() < 1e-12);
        assert!(v[1].abs() < 1e-12);
        let zero = s.field_at(&VectorFieldSpec::NegativeGradient, &[0.5, 0.5]).unwrap();
        assert!(zero.norm() < 1e-12);

        // grad f = (0, 2 pi) at (0, -1/4); with A = diag(1, 2) the field is (0, -pi).
        let a = catalog::torus(catalog::constant_metric(vec![vec![1.0, 0.0], vec![0.0, 2.0]]));
        let v = a.field_at(&VectorFieldSpec::NegativeGradient, &[0.0, -0.25]).unwrap();
        let g = a.gradient(&[0.0, -0.25]);
        assert!((g[1] - 2.0 * PI).abs() < 1e-12);
        assert!((v[1] + PI).abs() < 1e-12);
    }

    #[test]
    fn constant_metric_field_example() {
        // f = y^2 + x^2 has grad (0, 2) at (0, 1); with A = diag(1, 2) the field is (0, -1).
        let s = Scenario::from_json(
            r#"{"dimension":2,"topology":{"kind":"euclidean"},
                "function":{"family":"polynomial","params":{"terms":[
                    {"coefficient":1.0,"exponents":[2,0]},{"coefficient":1.0,"exponents":[0,2]}]}},
                "metric":{"family":"constant_spd","params":{"matrix":[[1.0,0.0],[0.0,2.0]]}}}"#,
        )
        .unwrap();
        let v = s.field_at(&VectorFieldSpec::NegativeGradient, &[0.0, 1.0]).unwrap();
        assert!(v[0].abs() < 1e-15);
        assert!((v[1] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn wrap_is_idempotent_and_in_range() {
        let space = ScenarioSpace::torus(vec![1.0, 2.0]).unwrap();
        for x in [[-0.3, 5.1], [1.0, 2.0], [-1e-17, -1e-17], [3.7, -7.9]] {
            let w = space.wrap(&x);
            assert!(w[0] >= 0.0 && w[0] < 1.0 && w[1] >= 0.0 && w[1] < 2.0, "{w:?}");
            assert_eq!(space.wrap(&w), w);
        }
    }

    #[test]
    fn quotient_distance_uses_minimal_representative() {
        let space = ScenarioSpace::torus(vec![1.0, 1.0]).unwrap();
        assert!((space.distance(&[0.05, 0.0], &[0.95, 0.0]) - 0.1).abs() < 1e-12);
        assert_eq!(space.lattice_offset(&[0.5, 0.5], &[-0.5, 0.5]), vec![-1, 0]);
    }

    #[test]
    fn conformal_jacobian_matches_finite_differences() {
        let s = catalog::torus(catalog::conformal_sin_cos(0.3));
        let x = [0.13, 0.71];
        let jac = s.negative_gradient_jacobian(&x).unwrap();
        let h = 1e-6;
        for k in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[k] += h;
            xm[k] -= h;
            let fd = (s.negative_gradient(&xp).unwrap() - s.negative_gradient(&xm).unwrap()) / (2.0 * h);
            for i in 0..2 {
                assert!((fd[i] - jac[(i, k)]).abs() < 1e-5 * (1.0 + jac[(i, k)].abs()));
            }
        }
    }

    #[test]
    fn block_metric_is_identity_far_away() {
        let spec = MetricFieldSpec::BlockConstantNearPoint(metric::BlockConstantParams {
            point: vec![0.5, 0.0],
            matrix: vec![vec![2.0, 0.0], vec![0.0, 3.0]],
            radius: 0.2,
        });
        let s = catalog::torus(spec);
        let near = s.metric_at(&[0.45, 0.98]);
        assert!((near[(0, 0)] - 2.0).abs() < 1e-15 && (near[(1, 1)] - 3.0).abs() < 1e-15);
        let far = s.metric_at(&[0.0, 0.5]);
        assert_eq!(far, DMatrix::identity(2, 2));
    }
}
