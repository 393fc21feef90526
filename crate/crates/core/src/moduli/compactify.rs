//! One-dimensional moduli spaces and their compactification by broken
//! flow lines.

use std::f64::consts::TAU;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sphere::{shooting_point, Locus, ShootingConfig, SphereScan};
use super::{levels_between, point, Anchor, ConnectionRef, ModuliZeroDim};
use crate::error::{MorseError, Result};
use crate::flow::{classify_limit, level_anchors, FlowSystem, LimitClass, LimitContext};
use crate::geometry::CriticalPoint;

/// Anchor distances of a near-endpoint trajectory to the matched broken
/// pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointRow {
    pub offset: f64,
    /// Largest anchor distance to the first connection (levels above the
    /// intermediate value).
    pub upper: f64,
    /// Largest anchor distance to the second connection.
    pub lower: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArcEndpoint {
    pub parameter: f64,
    pub intermediate: usize,
    pub first: Option<ConnectionRef>,
    pub second: Option<ConnectionRef>,
    pub convergence: Vec<EndpointRow>,
    pub matched: bool,
    /// `(-1)^{ind p - ind r} sign(first) sign(second)`.
    pub weighted_product: i32,
}

/// An open interval of shooting parameters whose flow lines all end at the
/// same lift of the target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Arc {
    pub start: f64,
    /// May exceed `2 pi` when the arc wraps around parameter zero.
    pub end: f64,
    pub target_offset: Vec<i64>,
    pub closed: bool,
    /// Anchors of the flow line at the arc midpoint.
    pub anchors: Vec<Anchor>,
    pub endpoints: Vec<ArcEndpoint>,
}

impl Arc {
    /// True when both ends are attributed to broken pairs and their
    /// weighted products cancel.
    pub fn signs_cancel(&self) -> bool {
        self.endpoints.len() == 2
            && self.endpoints.iter().all(|e| e.first.is_some() && e.second.is_some())
            && self.endpoints[0].weighted_product + self.endpoints[1].weighted_product == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModuliOneDim {
    pub source: usize,
    pub target: usize,
    pub arcs: Vec<Arc>,
    pub warnings: Vec<String>,
}

impl ModuliOneDim {
    pub fn endpoint_count(&self) -> usize {
        self.arcs.iter().map(|a| a.endpoints.len()).sum()
    }

    pub fn all_matched(&self) -> bool {
        self.arcs.iter().all(|a| a.endpoints.iter().all(|e| e.matched))
    }
}

fn anchors_from(sys: &FlowSystem, p: &CriticalPoint, t: f64, levels: &[f64], cfg: &ShootingConfig) -> Result<Vec<Option<Vec<f64>>>> {
    let sp = shooting_point(p, cfg.epsilon, t)?;
    level_anchors(sys, &sp.seed, levels, &cfg.flow)
}

/// Largest quotient distance between matching anchors, over `levels`.
fn anchor_gap(sys: &FlowSystem, near: &[(f64, Option<Vec<f64>>)], conn: &[Anchor], levels: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    for a in levels {
        let x = near.iter().find(|(l, _)| l == a).and_then(|(_, x)| x.as_ref());
        let y = conn.iter().find(|c| c.level == *a);
        worst = worst.max(match (x, y) {
            (Some(x), Some(y)) => sys.space.distance(x, &y.point),
            _ => f64::INFINITY,
        });
    }
    worst
}

#[allow(clippy::too_many_arguments)]
fn endpoint(
    sys: &FlowSystem,
    points: &[CriticalPoint],
    p: &CriticalPoint,
    q: &CriticalPoint,
    locus: &Locus,
    inward: f64,
    zero_dim: &[ModuliZeroDim],
    levels: &[f64],
    cfg: &ShootingConfig,
) -> Result<ArcEndpoint> {
    let r = point(points, locus.target)?;
    let upper = levels_between(levels, r.value, p.value);
    let lower = levels_between(levels, q.value, r.value);
    let all = levels_between(levels, q.value, p.value);
    let first_set = zero_dim.iter().find(|m| m.source == p.id && m.target == r.id);
    let second_set = zero_dim.iter().find(|m| m.source == r.id && m.target == q.id);

    let mut convergence = Vec::new();
    let mut first = None;
    let mut second = None;
    for &delta in &cfg.endpoint_offsets {
        let t = locus.parameter + inward * delta;
        let near: Vec<(f64, Option<Vec<f64>>)> = all.iter().copied().zip(anchors_from(sys, p, t, &all, cfg)?).collect();
        let best = |set: Option<&ModuliZeroDim>, lv: &[f64]| {
            set.into_iter()
                .flat_map(|m| m.connections.iter())
                .map(|c| (c.key(), anchor_gap(sys, &near, &c.anchors, lv)))
                .min_by(|a, b| a.1.total_cmp(&b.1))
        };
        let b1 = best(first_set, &upper);
        let b2 = best(second_set, &lower);
        convergence.push(EndpointRow {
            offset: delta,
            upper: b1.map_or(f64::INFINITY, |b| b.1),
            lower: b2.map_or(f64::INFINITY, |b| b.1),
        });
        first = b1.map(|b| b.0);
        second = b2.map(|b| b.0);
    }
    let last = convergence.last().cloned();
    let matched = last.is_some_and(|row| row.upper <= cfg.match_tol && row.lower <= cfg.match_tol)
        && first.is_some()
        && second.is_some();
    let sign_of = |c: Option<ConnectionRef>| {
        c.and_then(|c| zero_dim.iter().find(|m| m.source == c.source && m.target == c.target))
            .zip(c)
            .and_then(|(m, c)| m.connections.get(c.ordinal))
            .map_or(0, |c| c.sign)
    };
    let weight = if (p.index - r.index) % 2 == 0 { 1 } else { -1 };
    Ok(ArcEndpoint {
        parameter: locus.parameter,
        intermediate: r.id,
        first,
        second,
        convergence,
        matched,
        weighted_product: weight * sign_of(first) * sign_of(second),
    })
}

/// `M(p, q)` for `ind(p) - ind(q) = 2`: the arcs of the shooting circle of
/// `p` flowing to `q`, with their endpoints matched to broken pairs through
/// an intermediate critical point.
pub fn trace_one_dim_moduli(
    sys: &FlowSystem,
    ctx: &LimitContext,
    scan: &SphereScan,
    q: &CriticalPoint,
    zero_dim: &[ModuliZeroDim],
    levels: &[f64],
    cfg: &ShootingConfig,
) -> Result<ModuliOneDim> {
    let points = ctx.points;
    let p = point(points, scan.source)?;
    if p.index != q.index + 2 {
        return Err(MorseError::Validation(format!(
            "one-dimensional moduli need index difference 2, got {} -> {}",
            p.index, q.index
        )));
    }
    if p.index != 2 {
        return Err(MorseError::Unsupported(format!(
            "one-dimensional moduli from a critical point of index {}",
            p.index
        )));
    }
    let all = levels_between(levels, q.value, p.value);
    let mut warnings = Vec::new();
    let loci = &scan.loci;
    let class_at = |t: f64| -> Result<LimitClass> {
        let sp = shooting_point(p, cfg.epsilon, t)?;
        Ok(classify_limit(sys, &sp.seed, ctx, &cfg.flow)?.limit.class())
    };

    // (start, end, class) of every cell between consecutive loci.
    let mut cells: Vec<(f64, f64, Option<usize>, Option<usize>, LimitClass)> = Vec::new();
    if loci.is_empty() {
        let classes: Vec<LimitClass> = scan.samples.iter().map(|s| s.limit.class()).collect();
        if let Some(c) = classes.first() {
            if classes.iter().all(|x| x == c) {
                cells.push((0.0, TAU, None, None, c.clone()));
            } else {
                warnings.push(format!("scan of {} has several cells but no loci", p.id));
            }
        }
    } else {
        let m = loci.len();
        for i in 0..m {
            let a = loci[i].parameter;
            let mut b = loci[(i + 1) % m].parameter;
            if b <= a {
                b += TAU;
            }
            let inside: Vec<LimitClass> = scan
                .samples
                .iter()
                .filter(|s| {
                    let t = s.point.parameter;
                    let t = if t <= a { t + TAU } else { t };
                    t > a && t < b
                })
                .map(|s| s.limit.class())
                .collect();
            let class = match inside.first() {
                Some(c) => {
                    if inside.iter().any(|x| x != c) {
                        warnings.push(format!("cell ({a}, {b}) of the scan of {} is not uniform", p.id));
                    }
                    c.clone()
                }
                None => class_at(0.5 * (a + b))?,
            };
            cells.push((a, b, Some(i), Some((i + 1) % m), class));
        }
    }

    let arcs: Vec<Arc> = cells
        .into_par_iter()
        .filter(|c| matches!(&c.4, LimitClass::Critical(id, _) if *id == q.id))
        .map(|(a, b, la, lb, class)| {
            let offset = match class {
                LimitClass::Critical(_, off) => off,
                _ => unreachable!("filtered to critical classes"),
            };
            let mid = 0.5 * (a + b);
            let anchors = anchors_from(sys, p, mid, &all, cfg)?
                .into_iter()
                .zip(&all)
                .filter_map(|(x, &level)| {
                    x.map(|x| Anchor {
                        level,
                        point: sys.space.wrap(&x),
                    })
                })
                .collect();
            let mut endpoints = Vec::new();
            if let (Some(la), Some(lb)) = (la, lb) {
                endpoints.push(endpoint(sys, points, p, q, &loci[la], 1.0, zero_dim, levels, cfg)?);
                let mut end_locus = loci[lb].clone();
                if end_locus.parameter <= a {
                    end_locus.parameter += TAU;
                }
                endpoints.push(endpoint(sys, points, p, q, &end_locus, -1.0, zero_dim, levels, cfg)?);
            }
            Ok(Arc {
                start: a,
                end: b,
                target_offset: offset,
                closed: la.is_none(),
                anchors,
                endpoints,
            })
        })
        .collect::<Result<_>>()?;

    for (i, arc) in arcs.iter().enumerate() {
        for e in &arc.endpoints {
            if e.first.is_none() || e.second.is_none() {
                warnings.push(format!(
                    "stratification failure: endpoint {} of arc {i} in M({}, {}) has no broken pair through {}",
                    e.parameter, p.id, q.id, e.intermediate
                ));
            } else if !e.matched {
                let row = e.convergence.last().expect("at least one offset");
                warnings.push(format!(
                    "endpoint {} of arc {i} in M({}, {}) approaches its broken pair only to {:e} / {:e} at offset {:e}",
                    e.parameter, p.id, q.id, row.upper, row.lower, row.offset
                ));
            }
        }
        if arc.endpoints.len() == 2 && !arc.signs_cancel() {
            warnings.push(format!(
                "sign inconsistency: endpoint products of arc {i} in M({}, {}) do not cancel",
                p.id, q.id
            ));
        }
    }

    Ok(ModuliOneDim {
        source: p.id,
        target: q.id,
        arcs,
        warnings,
    })
}

/// A product stratum `M(p, r) x M(r, q)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrokenStratum {
    pub sequence: Vec<usize>,
    pub first: ConnectionRef,
    pub second: ConnectionRef,
    /// Concatenated anchors: the evaluation map of the broken line.
    pub anchors: Vec<Anchor>,
    pub weighted_sign: i32,
    /// Arc endpoints matched to this pair.
    pub endpoint_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompactifiedModuli {
    pub source: usize,
    pub target: usize,
    pub arcs: usize,
    pub broken: Vec<BrokenStratum>,
    /// Smallest anchor separation between distinct records.
    pub min_separation: f64,
}

/// Strata of the compactified `M(p, q)`: the arcs plus every product
/// `M(p, r) x M(r, q)` over intermediate `r`.
pub fn assemble_compactified(
    sys: &FlowSystem,
    points: &[CriticalPoint],
    one: &ModuliOneDim,
    zero_dim: &[ModuliZeroDim],
) -> Result<CompactifiedModuli> {
    let p = point(points, one.source)?;
    let q = point(points, one.target)?;
    let mut broken = Vec::new();
    for r in points.iter().filter(|r| r.value < p.value && r.value > q.value && r.index + 1 == p.index) {
        let (Some(m1), Some(m2)) = (
            zero_dim.iter().find(|m| m.source == p.id && m.target == r.id),
            zero_dim.iter().find(|m| m.source == r.id && m.target == q.id),
        ) else {
            continue;
        };
        for c1 in &m1.connections {
            for c2 in &m2.connections {
                let anchors: Vec<Anchor> = c1.anchors.iter().chain(&c2.anchors).cloned().collect();
                for w in anchors.windows(2) {
                    let (f0, f1) = (sys.potential.value(&w[0].point), sys.potential.value(&w[1].point));
                    if !(f1 < f0) {
                        return Err(MorseError::Assembly(format!(
                            "anchors of ({:?}, {:?}) are not strictly descending: {f0} then {f1}",
                            c1.key(),
                            c2.key()
                        )));
                    }
                }
                let weight = if (p.index - r.index) % 2 == 0 { 1 } else { -1 };
                let endpoint_count = one
                    .arcs
                    .iter()
                    .flat_map(|a| &a.endpoints)
                    .filter(|e| e.matched && e.first == Some(c1.key()) && e.second == Some(c2.key()))
                    .count();
                broken.push(BrokenStratum {
                    sequence: vec![p.id, r.id, q.id],
                    first: c1.key(),
                    second: c2.key(),
                    anchors,
                    weighted_sign: weight * c1.sign * c2.sign,
                    endpoint_count,
                });
            }
        }
    }
    let mut min_separation = f64::INFINITY;
    for (i, a) in broken.iter().enumerate() {
        for b in &broken[i + 1..] {
            let d = a
                .anchors
                .iter()
                .zip(&b.anchors)
                .map(|(x, y)| sys.space.distance(&x.point, &y.point))
                .fold(0.0, f64::max);
            min_separation = min_separation.min(d);
        }
    }
    Ok(CompactifiedModuli {
        source: p.id,
        target: q.id,
        arcs: one.arcs.len(),
        broken,
        min_separation,
    })
}
