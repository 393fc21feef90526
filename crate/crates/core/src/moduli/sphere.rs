//! Shooting from the unstable sphere of a critical point.
//!
//! The sphere is parametrized by an angle: for index one it is the pair
//! `p +- eps v`, for index two the circle `p + eps (cos t v1 + sin t v2)` in
//! the plane of the orientation frame. Samples are classified by their
//! forward limit; parameters where the limit class changes are located by
//! bisection and identified with the critical point the boundary trajectory
//! passes through.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{MorseError, Result};
use crate::flow::{classify_limit, Classification, FlowConfig, FlowSystem, Limit, LimitClass, LimitContext};
use crate::geometry::CriticalPoint;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShootingConfig {
    /// Radius of the unstable sphere.
    pub epsilon: f64,
    /// Samples on the circle for index-two points.
    pub sphere_count: usize,
    /// Bisection stops when the parameter bracket is shorter than this.
    pub parameter_tol: f64,
    /// A boundary trajectory must pass this close to the critical point it
    /// is attributed to.
    pub approach_tol: f64,
    /// Fraction of unresolved samples above which a warning is raised.
    pub unresolved_fraction: f64,
    /// Parameter offsets of near-endpoint trajectories for arc endpoints.
    pub endpoint_offsets: Vec<f64>,
    /// Anchor tolerance for matching arc endpoints to broken pairs at the
    /// smallest endpoint offset.
    pub match_tol: f64,
    /// Minimal anchor separation between distinct connections.
    pub separation: f64,
    /// Reproducibility tolerance for re-integrated anchors.
    pub anchor_tol: f64,
    /// Signs with a change-of-basis determinant below this are suspect.
    pub det_tol: f64,
    pub flow: FlowConfig,
}

impl Default for ShootingConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-4,
            sphere_count: 64,
            parameter_tol: 1e-10,
            approach_tol: 1e-3,
            unresolved_fraction: 0.01,
            endpoint_offsets: vec![1e-4, 1e-6, 1e-8],
            match_tol: 1e-4,
            separation: 1e-4,
            anchor_tol: 1e-6,
            det_tol: 1e-8,
            flow: FlowConfig::precise(),
        }
    }
}

/// A point of the unstable sphere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShootingPoint {
    pub parameter: f64,
    /// Unit vector (for `G(p)`) in the negative spectral space.
    pub direction: Vec<f64>,
    pub seed: Vec<f64>,
}

/// `(cos t, sin t)` with exact values at multiples of a quarter turn.
fn circle(t: f64) -> (f64, f64) {
    let quarters = t / FRAC_PI_2;
    let k = quarters.round();
    if (quarters - k).abs() < 1e-14 {
        match (k as i64).rem_euclid(4) {
            0 => (1.0, 0.0),
            1 => (0.0, 1.0),
            2 => (-1.0, 0.0),
            _ => (0.0, -1.0),
        }
    } else {
        (t.cos(), t.sin())
    }
}

/// The shooting point at parameter `t`.
pub fn shooting_point(p: &CriticalPoint, epsilon: f64, t: f64) -> Result<ShootingPoint> {
    let n = p.dimension();
    let direction: Vec<f64> = match p.index {
        0 => {
            return Err(MorseError::Precondition(format!(
                "critical point {} is a minimum and has an empty unstable sphere",
                p.id
            )))
        }
        1 => {
            let s = if circle(t).0 >= 0.0 { 1.0 } else { -1.0 };
            p.neg_frame[0].iter().map(|v| s * v).collect()
        }
        2 => {
            let (c, s) = circle(t);
            (0..n).map(|i| c * p.neg_frame[0][i] + s * p.neg_frame[1][i]).collect()
        }
        k => {
            return Err(MorseError::Unsupported(format!(
                "shooting from a critical point of index {k}"
            )))
        }
    };
    let seed = p
        .location
        .iter()
        .zip(&direction)
        .map(|(x, d)| x + epsilon * d)
        .collect();
    Ok(ShootingPoint {
        parameter: t,
        direction,
        seed,
    })
}

/// Uniform samples of the unstable sphere of `p`: the two points
/// `p +- eps v` for index one, `count` points on the circle for index two.
pub fn sample_unstable_sphere(p: &CriticalPoint, epsilon: f64, count: usize) -> Result<Vec<ShootingPoint>> {
    let params: Vec<f64> = match p.index {
        1 => vec![0.0, PI],
        2 => {
            if count < 3 {
                return Err(MorseError::Validation("sphere count must be at least 3".into()));
            }
            (0..count).map(|i| TAU * i as f64 / count as f64).collect()
        }
        _ => vec![0.0],
    };
    params.into_iter().map(|t| shooting_point(p, epsilon, t)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanSample {
    pub point: ShootingPoint,
    pub limit: Limit,
}

/// A parameter where the limit class changes, attributed to the critical
/// point the boundary trajectory passes through.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Locus {
    pub parameter: f64,
    pub target: usize,
    pub offset: Vec<i64>,
    /// Closest approach of the boundary trajectory to the target.
    pub closest_approach: f64,
    /// Unwrapped point of closest approach.
    #[serde(skip)]
    pub approach_point: Vec<f64>,
    /// Limit classes on either side (by increasing parameter).
    pub left: LimitClass,
    pub right: LimitClass,
    /// True when a sample itself converged to the target.
    pub sampled: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedLocus {
    pub bracket: (f64, f64),
    pub reason: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SphereScan {
    pub source: usize,
    pub index: usize,
    pub epsilon: f64,
    pub samples: Vec<ScanSample>,
    /// Sorted by parameter.
    pub loci: Vec<Locus>,
    pub failed: Vec<FailedLocus>,
    pub warnings: Vec<String>,
}

impl SphereScan {
    /// Samples whose limit is the given class.
    pub fn samples_to(&self, id: usize) -> impl Iterator<Item = &ScanSample> {
        self.samples.iter().filter(move |s| s.limit.critical_id() == Some(id))
    }
}

struct Probe {
    class: LimitClass,
    classification: Classification,
}

fn probe(sys: &FlowSystem, ctx: &LimitContext, p: &CriticalPoint, t: f64, cfg: &ShootingConfig) -> Result<Probe> {
    let sp = shooting_point(p, cfg.epsilon, t)?;
    let classification = classify_limit(sys, &sp.seed, ctx, &cfg.flow)?;
    Ok(Probe {
        class: classification.limit.class(),
        classification,
    })
}

/// Index of the critical point with the given id.
fn by_id(points: &[CriticalPoint], id: usize) -> Option<&CriticalPoint> {
    points.iter().find(|q| q.id == id)
}

/// True when the class is a critical point strictly between index 0 and
/// the source index (a boundary between cells rather than a cell).
fn is_intermediate(points: &[CriticalPoint], class: &LimitClass, source_index: usize) -> bool {
    match class {
        LimitClass::Critical(id, _) => by_id(points, *id).is_some_and(|q| q.index > 0 && q.index < source_index),
        _ => false,
    }
}

/// The intermediate critical point passed closest by a classified
/// trajectory, if it is within `approach_tol`.
fn attribute(
    sys: &FlowSystem,
    points: &[CriticalPoint],
    c: &Classification,
    source_index: usize,
    approach_tol: f64,
) -> Option<(usize, Vec<i64>, f64, Vec<f64>)> {
    if let Limit::Critical { id, offset, .. } = &c.limit {
        if is_intermediate(points, &c.limit.class(), source_index) {
            let i = points.iter().position(|q| q.id == *id)?;
            return Some((*id, offset.clone(), c.closest[i].distance, c.closest[i].point.clone()));
        }
    }
    let (i, a) = points
        .iter()
        .zip(&c.closest)
        .enumerate()
        .filter(|(_, (q, _))| q.index > 0 && q.index < source_index)
        .map(|(i, (_, a))| (i, a))
        .min_by(|x, y| x.1.distance.total_cmp(&y.1.distance))?;
    (a.distance <= approach_tol).then(|| {
        let q = &points[i];
        (q.id, sys.space.lattice_offset(&q.location, &a.point), a.distance, a.point.clone())
    })
}

enum Bisected {
    Found(Locus),
    Failed(FailedLocus),
}

fn bisect(
    sys: &FlowSystem,
    ctx: &LimitContext,
    p: &CriticalPoint,
    left: (f64, LimitClass),
    right: (f64, LimitClass),
    cfg: &ShootingConfig,
) -> Result<Vec<Bisected>> {
    let points = ctx.points;
    let mut out = Vec::new();
    let mut stack = vec![(left, right)];
    while let Some(((mut a, ca), (mut b, cb))) = stack.pop() {
        let mut found = None;
        while b - a > cfg.parameter_tol {
            let m = 0.5 * (a + b);
            let pr = probe(sys, ctx, p, m, cfg)?;
            if pr.class == ca {
                a = m;
            } else if pr.class == cb {
                b = m;
            } else if is_intermediate(points, &pr.class, p.index) {
                found = Some((m, pr.classification, true));
                break;
            } else if pr.class == LimitClass::Unresolved {
                out.push(Bisected::Failed(FailedLocus {
                    bracket: (a, b),
                    reason: format!("unresolved limit at parameter {m}"),
                }));
                found = None;
                a = b;
                break;
            } else {
                // A third cell between the two: two boundaries to locate.
                stack.push(((m, pr.class.clone()), (b, cb.clone())));
                b = m;
                continue;
            }
        }
        if a == b && found.is_none() {
            continue;
        }
        let (t, classification, sampled) = match found {
            Some(f) => f,
            None => {
                let m = 0.5 * (a + b);
                (m, probe(sys, ctx, p, m, cfg)?.classification, false)
            }
        };
        match attribute(sys, points, &classification, p.index, cfg.approach_tol) {
            Some((target, offset, closest_approach, approach_point)) => out.push(Bisected::Found(Locus {
                parameter: t,
                target,
                offset,
                closest_approach,
                approach_point,
                left: ca.clone(),
                right: cb.clone(),
                sampled,
            })),
            None => out.push(Bisected::Failed(FailedLocus {
                bracket: (a, b),
                reason: format!(
                    "boundary trajectory at parameter {t} passes no intermediate critical point within {:e}",
                    cfg.approach_tol
                ),
            })),
        }
    }
    Ok(out)
}

/// Classify the unstable sphere of `p` and locate the class boundaries.
pub fn scan_unstable_sphere(
    sys: &FlowSystem,
    ctx: &LimitContext,
    p: &CriticalPoint,
    cfg: &ShootingConfig,
) -> Result<SphereScan> {
    let points = ctx.points;
    let shots = sample_unstable_sphere(p, cfg.epsilon, cfg.sphere_count)?;
    let samples: Vec<ScanSample> = shots
        .into_par_iter()
        .map(|point| {
            let c = classify_limit(sys, &point.seed, ctx, &cfg.flow)?;
            Ok(ScanSample { point, limit: c.limit })
        })
        .collect::<Result<_>>()?;

    let mut warnings = Vec::new();
    let unresolved = samples.iter().filter(|s| s.limit == Limit::Unresolved).count();
    if unresolved as f64 > cfg.unresolved_fraction * samples.len() as f64 {
        warnings.push(format!(
            "transversality suspect: {unresolved} of {} samples from critical point {} have no resolved limit",
            samples.len(),
            p.id
        ));
    }
    for s in &samples {
        if let Some(q) = s.limit.critical_id().and_then(|id| by_id(points, id)) {
            if q.index >= p.index && q.id != p.id {
                warnings.push(format!(
                    "transversality suspect: critical point {} flows to {} of index {} >= {}",
                    p.id, q.id, q.index, p.index
                ));
            }
        }
    }

    let mut loci = Vec::new();
    let mut failed = Vec::new();
    if p.index == 2 {
        let m = samples.len();
        // Samples that converge to an intermediate point are loci themselves.
        for (i, s) in samples.iter().enumerate() {
            if is_intermediate(points, &s.limit.class(), p.index) {
                let c = classify_limit(sys, &s.point.seed, ctx, &cfg.flow)?;
                let (target, offset, closest_approach, approach_point) =
                    attribute(sys, points, &c, p.index, cfg.approach_tol).expect("limit is intermediate");
                loci.push(Locus {
                    parameter: s.point.parameter,
                    target,
                    offset,
                    closest_approach,
                    approach_point,
                    left: samples[(i + m - 1) % m].limit.class(),
                    right: samples[(i + 1) % m].limit.class(),
                    sampled: true,
                });
            }
        }
        let brackets: Vec<((f64, LimitClass), (f64, LimitClass))> = (0..m)
            .filter_map(|i| {
                let j = (i + 1) % m;
                let (ca, cb) = (samples[i].limit.class(), samples[j].limit.class());
                let skip = ca == cb
                    || ca == LimitClass::Unresolved
                    || cb == LimitClass::Unresolved
                    || is_intermediate(points, &ca, p.index)
                    || is_intermediate(points, &cb, p.index);
                let tb = if j == 0 { TAU } else { samples[j].point.parameter };
                (!skip).then(|| ((samples[i].point.parameter, ca), (tb, cb)))
            })
            .collect();
        let results: Vec<Vec<Bisected>> = brackets
            .into_par_iter()
            .map(|(l, r)| bisect(sys, ctx, p, l, r, cfg))
            .collect::<Result<_>>()?;
        for r in results.into_iter().flatten() {
            match r {
                Bisected::Found(mut l) => {
                    l.parameter = l.parameter.rem_euclid(TAU);
                    loci.push(l)
                }
                Bisected::Failed(f) => {
                    warnings.push(format!("locus not resolved: {}", f.reason));
                    failed.push(f);
                }
            }
        }
        loci.sort_by(|a, b| a.parameter.total_cmp(&b.parameter));
    }

    Ok(SphereScan {
        source: p.id,
        index: p.index,
        epsilon: cfg.epsilon,
        samples,
        loci,
        failed,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::find_critical_points;
    use crate::scenario::{catalog, MetricFieldSpec};

    #[test]
    fn sphere_samples() {
        let s = catalog::torus(MetricFieldSpec::Identity);
        let pts = find_critical_points(&s, 8).unwrap();
        let saddle = pts.iter().find(|p| p.index == 1).unwrap();
        let two = sample_unstable_sphere(saddle, 1e-4, 360).unwrap();
        assert_eq!(two.len(), 2);
        for sp in &two {
            assert!((s.space().distance(&sp.seed, &saddle.location) - 1e-4).abs() < 1e-15);
            assert!(s.value(&sp.seed) < saddle.value);
        }
        let max = &pts[0];
        let circle = sample_unstable_sphere(max, 1e-4, 360).unwrap();
        assert_eq!(circle.len(), 360);
        assert!(circle.iter().all(|sp| s.value(&sp.seed) < max.value));
        assert_eq!(circle[90].direction, vec![0.0, 1.0]);
        assert!(matches!(
            sample_unstable_sphere(pts.last().unwrap(), 1e-4, 8),
            Err(MorseError::Precondition(_))
        ));
    }
}
