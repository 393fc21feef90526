//! Connection counts along a field homotopy.

use serde::{Deserialize, Serialize};

use super::{compute_moduli, ShootingConfig};
use crate::complex::{build_complex, homology, Coefficients};
use crate::error::{MorseError, Result};
use crate::flow::FlowSystem;
use crate::geometry::CriticalPoint;
use crate::normalform::FieldHomotopy;
use crate::scenario::Scenario;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PairCount {
    pub source: usize,
    pub target: usize,
    pub unsigned: usize,
    pub signed: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomotopySample {
    pub s: f64,
    pub counts: Vec<PairCount>,
    pub min_margin: f64,
    pub min_sign_det: f64,
    /// `None` when the boundary of the boundary did not vanish.
    pub betti: Option<Vec<usize>>,
    pub square_zero: bool,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvarianceReport {
    pub point: usize,
    pub radius: f64,
    pub samples: Vec<HomotopySample>,
    pub counts_invariant: bool,
    pub betti_invariant: bool,
    pub min_margin: f64,
    /// Parameters at which the margin fell below `margin_floor`.
    pub degraded: Vec<f64>,
}

impl InvarianceReport {
    pub fn is_invariant(&self) -> bool {
        self.counts_invariant && self.betti_invariant && self.samples.iter().all(|s| s.square_zero)
    }
}

/// Recompute moduli for each member `Y_{r,s}` of the homotopy.
///
/// `pairs` restricts the reported counts; an empty slice keeps every pair.
pub fn compare_under_homotopy(
    scenario: &Scenario,
    points: &[CriticalPoint],
    homotopy: &FieldHomotopy,
    s_grid: &[f64],
    pairs: &[(usize, usize)],
    cfg: &ShootingConfig,
    margin_floor: f64,
) -> Result<InvarianceReport> {
    if s_grid.is_empty() {
        return Err(MorseError::Validation("empty homotopy grid".into()));
    }
    let mut samples = Vec::with_capacity(s_grid.len());
    for &s in s_grid {
        let member = homotopy.member(s)?;
        let sys = FlowSystem::new(scenario.space(), &member, scenario);
        let m = compute_moduli(&sys, points, cfg)?;
        let mut counts: Vec<PairCount> = m
            .zero_dim
            .iter()
            .filter(|z| pairs.is_empty() || pairs.contains(&(z.source, z.target)))
            .map(|z| PairCount {
                source: z.source,
                target: z.target,
                unsigned: z.unsigned_count(),
                signed: z.signed_count,
            })
            .collect();
        counts.sort();
        let mut warnings = m.warnings.clone();
        let (square_zero, betti) = match build_complex(points, &m.signed_counts(), None) {
            Ok(c) => (true, Some(homology(&c, Coefficients::Integer)?.betti)),
            Err(MorseError::SignConsistency(msg)) => {
                warnings.push(format!("boundary does not square to zero: {msg}"));
                (false, None)
            }
            Err(e) => return Err(e),
        };
        samples.push(HomotopySample {
            s,
            counts,
            min_margin: m.min_margin(),
            min_sign_det: m.min_sign_det(),
            betti,
            square_zero,
            warnings,
        });
    }
    let first = &samples[0];
    let counts_invariant = samples.iter().all(|x| {
        x.counts.len() == first.counts.len()
            && x.counts.iter().zip(&first.counts).all(|(a, b)| (a.source, a.target, a.signed) == (b.source, b.target, b.signed))
    });
    let betti_invariant = first.betti.is_some() && samples.iter().all(|x| x.betti == first.betti);
    let min_margin = samples.iter().map(|x| x.min_margin).fold(f64::INFINITY, f64::min);
    let degraded = samples.iter().filter(|x| !(x.min_margin >= margin_floor)).map(|x| x.s).collect();
    Ok(InvarianceReport {
        point: homotopy.point().id,
        radius: homotopy.radius(),
        samples,
        counts_invariant,
        betti_invariant,
        min_margin,
        degraded,
    })
}
