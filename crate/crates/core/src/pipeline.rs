//! End-to-end runs: field resolution, tolerance bundles and the full
//! critical points to homology analysis.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::complex::{build_complex, homology, Coefficients, HomologyResult, MorseChainComplex};
use crate::error::{MorseError, Result};
use crate::flow::{FlowConfig, FlowSystem};
use crate::geometry::{find_critical_points_with, CriticalPoint, CriticalSearch};
use crate::moduli::{assemble_compactified, compute_moduli, CompactifiedModuli, ModuliSet, ShootingConfig};
use crate::normalform::{FieldHomotopy, InclinationConfig, ModelField, SplitQuadratic};
use crate::scenario::{NegativeGradientField, Potential, Scenario, VectorField, VectorFieldSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NormalFormTolerances {
    pub epsilon: f64,
    pub per_axis: usize,
}

impl Default for NormalFormTolerances {
    fn default() -> Self {
        Self {
            epsilon: 0.3,
            per_axis: 41,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HomotopyTolerances {
    pub radius: f64,
    pub s_grid: Vec<f64>,
    pub margin_floor: f64,
}

impl Default for HomotopyTolerances {
    fn default() -> Self {
        Self {
            radius: 0.1,
            s_grid: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            margin_floor: 1e-3,
        }
    }
}

/// Every tunable of a run, overridable piecewise from a JSON document.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub critical: CriticalSearch,
    /// Used for single trajectories; shooting carries its own flow settings.
    pub flow: FlowConfig,
    pub shooting: ShootingConfig,
    pub inclination: InclinationConfig,
    pub normal_form: NormalFormTolerances,
    pub homotopy: HomotopyTolerances,
    pub regular_gap: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            critical: CriticalSearch::default(),
            flow: FlowConfig::default(),
            shooting: ShootingConfig::default(),
            inclination: InclinationConfig::default(),
            normal_form: NormalFormTolerances::default(),
            homotopy: HomotopyTolerances::default(),
            regular_gap: 1e-8,
        }
    }
}

/// The field named by a scenario, made concrete.
pub enum ResolvedField<'a> {
    Gradient(NegativeGradientField<'a>),
    Homotopy { homotopy: Box<FieldHomotopy>, s: f64 },
    Model { field: ModelField, potential: SplitQuadratic },
}

impl VectorField for ResolvedField<'_> {
    fn dim(&self) -> usize {
        match self {
            Self::Gradient(g) => g.dim(),
            Self::Homotopy { homotopy, .. } => homotopy.point().dimension(),
            Self::Model { field, .. } => field.dim(),
        }
    }

    fn eval(&self, x: &[f64]) -> DVector<f64> {
        match self {
            Self::Gradient(g) => g.eval(x),
            Self::Homotopy { homotopy, s } => homotopy
                .member(*s)
                .map(|m| m.eval(x))
                .unwrap_or_else(|_| DVector::from_element(x.len(), f64::NAN)),
            Self::Model { field, .. } => field.eval(x),
        }
    }

    fn jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        match self {
            Self::Gradient(g) => g.jacobian(x),
            Self::Homotopy { homotopy, s } => homotopy
                .member(*s)
                .map(|m| m.jacobian(x))
                .unwrap_or_else(|_| DMatrix::from_element(x.len(), x.len(), f64::NAN)),
            Self::Model { field, .. } => field.jacobian(x),
        }
    }
}

impl<'a> ResolvedField<'a> {
    /// The Lyapunov function for level events of this field.
    pub fn potential(&self, scenario: &'a Scenario) -> &(dyn Potential + 'a) {
        match self {
            Self::Model { potential, .. } => potential,
            _ => scenario,
        }
    }
}

/// Build the field a scenario selects. Homotopy members refer to critical
/// points by id, so `points` must come from the same scenario.
pub fn resolve_field<'a>(scenario: &'a Scenario, points: &[CriticalPoint]) -> Result<ResolvedField<'a>> {
    match scenario.field_spec() {
        VectorFieldSpec::NegativeGradient => Ok(ResolvedField::Gradient(scenario.negative_gradient_field())),
        VectorFieldSpec::HomotopyMember(p) => {
            let point = points
                .iter()
                .find(|q| q.id == p.critical_point)
                .ok_or_else(|| MorseError::Validation(format!("no critical point with id {}", p.critical_point)))?;
            let homotopy = FieldHomotopy::new(scenario, point, p.r)?;
            homotopy.member(p.s)?;
            Ok(ResolvedField::Homotopy {
                homotopy: Box::new(homotopy),
                s: p.s,
            })
        }
        VectorFieldSpec::ExplicitModel(p) => {
            let field = ModelField::from_params(p, scenario.dimension())?;
            let potential = field.potential();
            Ok(ResolvedField::Model { field, potential })
        }
    }
}

/// Result of the full pipeline on one scenario.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Analysis {
    pub critical_points: Vec<CriticalPoint>,
    pub moduli: ModuliSet,
    pub compactified: Vec<CompactifiedModuli>,
    pub complex: MorseChainComplex,
    pub homology: HomologyResult,
    pub homology_mod2: HomologyResult,
}

/// Critical points, moduli, chain complex and homology.
pub fn analyze(scenario: &Scenario, tol: &Tolerances) -> Result<Analysis> {
    let points = find_critical_points_with(scenario, &tol.critical)?;
    let field = resolve_field(scenario, &points)?;
    let sys = FlowSystem::new(scenario.space(), &field, field.potential(scenario));
    let moduli = compute_moduli(&sys, &points, &tol.shooting)?;
    let compactified = moduli
        .one_dim
        .iter()
        .map(|one| assemble_compactified(&sys, &points, one, &moduli.zero_dim))
        .collect::<Result<Vec<_>>>()?;
    let complex = build_complex(&points, &moduli.signed_counts(), None)?;
    let homology_z = homology(&complex, Coefficients::Integer)?;
    let homology_mod2 = homology(&complex, Coefficients::Mod2)?;
    Ok(Analysis {
        critical_points: points,
        moduli,
        compactified,
        complex,
        homology: homology_z,
        homology_mod2,
    })
}
