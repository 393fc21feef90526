//! Moduli spaces of connecting orbits: zero-dimensional point sets with
//! signs, one-dimensional arc families with their broken endpoints, and
//! the compactified strata assembled from both.

pub mod compactify;
pub mod invariance;
pub mod sign;
pub mod sphere;

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use compactify::{
    assemble_compactified, trace_one_dim_moduli, Arc, ArcEndpoint, BrokenStratum, CompactifiedModuli, EndpointRow,
    ModuliOneDim,
};
pub use invariance::{compare_under_homotopy, HomotopySample, InvarianceReport, PairCount};
pub use sign::{compute_sign, compute_sign_with_frames, SignData};
pub use sphere::{
    sample_unstable_sphere, scan_unstable_sphere, shooting_point, Locus, ScanSample, ShootingConfig, ShootingPoint,
    SphereScan,
};

use crate::error::{MorseError, Result};
use crate::flow::{classify_limit, level_anchors, regular_levels, FlowSystem, LimitContext};
use crate::geometry::CriticalPoint;

/// A point `x` on the regular level `a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Anchor {
    pub level: f64,
    pub point: Vec<f64>,
}

/// Reference to a connection by its position in `M(source, target)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ConnectionRef {
    pub source: usize,
    pub target: usize,
    pub ordinal: usize,
}

/// One flow line `p -> q`, recorded by its shooting data and its anchors on
/// the regular levels between `f(q)` and `f(p)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Connection {
    pub source: usize,
    pub target: usize,
    pub ordinal: usize,
    /// Lattice translation of the lift of `q` reached from the base lift of
    /// `p` (empty on Euclidean spaces).
    pub target_offset: Vec<i64>,
    pub parameter: f64,
    pub direction: Vec<f64>,
    pub epsilon: f64,
    pub seed: Vec<f64>,
    /// Descending levels; points reduced to the fundamental domain.
    pub anchors: Vec<Anchor>,
    pub sign: i32,
    pub sign_det: f64,
    pub margin: f64,
    pub closest_approach: f64,
}

impl Connection {
    pub fn key(&self) -> ConnectionRef {
        ConnectionRef {
            source: self.source,
            target: self.target,
            ordinal: self.ordinal,
        }
    }

    pub fn anchor_at(&self, level: f64) -> Option<&Anchor> {
        self.anchors.iter().find(|a| a.level == level)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModuliZeroDim {
    pub source: usize,
    pub target: usize,
    pub connections: Vec<Connection>,
    pub signed_count: i64,
    pub warnings: Vec<String>,
}

impl ModuliZeroDim {
    pub fn unsigned_count(&self) -> usize {
        self.connections.len()
    }

    pub fn min_margin(&self) -> f64 {
        self.connections.iter().map(|c| c.margin).fold(f64::INFINITY, f64::min)
    }
}

fn point<'a>(points: &'a [CriticalPoint], id: usize) -> Result<&'a CriticalPoint> {
    points
        .iter()
        .find(|q| q.id == id)
        .ok_or_else(|| MorseError::Validation(format!("no critical point with id {id}")))
}

/// Regular levels strictly between two critical values, descending.
pub fn levels_between(levels: &[f64], low: f64, high: f64) -> Vec<f64> {
    levels.iter().copied().filter(|&a| a > low && a < high).collect()
}

/// `M(p, q)` for `ind(p) - ind(q) = 1` from a scan of the unstable sphere
/// of `p`.
pub fn find_connections(
    sys: &FlowSystem,
    ctx: &LimitContext,
    scan: &SphereScan,
    q: &CriticalPoint,
    levels: &[f64],
    cfg: &ShootingConfig,
) -> Result<ModuliZeroDim> {
    let points = ctx.points;
    let p = point(points, scan.source)?;
    let mut out = ModuliZeroDim {
        source: p.id,
        target: q.id,
        connections: Vec::new(),
        signed_count: 0,
        warnings: Vec::new(),
    };
    if p.index != q.index + 1 {
        if p.index <= q.index {
            return Ok(out);
        }
        return Err(MorseError::Validation(format!(
            "zero-dimensional moduli need index difference 1, got {} -> {}",
            p.index, q.index
        )));
    }
    let lv = levels_between(levels, q.value, p.value);
    if lv.is_empty() {
        return Err(MorseError::Precondition(format!(
            "no regular level between critical points {} and {}",
            p.id, q.id
        )));
    }

    // (parameter, offset, approach point, closest distance)
    let mut candidates: Vec<(f64, Vec<i64>, Vec<f64>, f64)> = Vec::new();
    if q.index == 0 {
        let qi = points.iter().position(|r| r.id == q.id).expect("q is listed");
        for s in scan.samples_to(q.id) {
            let c = classify_limit(sys, &s.point.seed, ctx, &cfg.flow)?;
            let offset = match &c.limit {
                crate::flow::Limit::Critical { offset, .. } => offset.clone(),
                _ => unreachable!("sample converges to q"),
            };
            candidates.push((s.point.parameter, offset, s.point.seed.clone(), c.closest[qi].distance));
        }
    } else {
        for l in scan.loci.iter().filter(|l| l.target == q.id) {
            candidates.push((l.parameter, l.offset.clone(), l.approach_point.clone(), l.closest_approach));
        }
    }

    let built: Vec<Connection> = candidates
        .into_par_iter()
        .map(|(t, offset, approach, closest)| {
            let sp = shooting_point(p, cfg.epsilon, t)?;
            let found = level_anchors(sys, &sp.seed, &lv, &cfg.flow)?;
            let mut anchors = Vec::with_capacity(lv.len());
            for (a, x) in lv.iter().zip(found) {
                let x = x.ok_or_else(|| {
                    MorseError::TransversalitySuspect(format!(
                        "connection {} -> {} at parameter {t} misses level {a}",
                        p.id, q.id
                    ))
                })?;
                anchors.push(Anchor {
                    level: *a,
                    point: sys.space.wrap(&x),
                });
            }
            let sign_level = *lv.last().expect("nonempty levels");
            let sd = compute_sign(sys, p, q, &sp.seed, sign_level, &approach, &cfg.flow, cfg.det_tol)?;
            Ok(Connection {
                source: p.id,
                target: q.id,
                ordinal: 0,
                target_offset: offset,
                parameter: t,
                direction: sp.direction,
                epsilon: cfg.epsilon,
                seed: sp.seed,
                anchors,
                sign: sd.sign,
                sign_det: sd.det,
                margin: sd.margin,
                closest_approach: closest,
            })
        })
        .collect::<Result<_>>()?;
    out.connections = built;
    out.connections.sort_by(|a, b| a.parameter.total_cmp(&b.parameter));
    for (i, c) in out.connections.iter_mut().enumerate() {
        c.ordinal = i;
    }
    for (i, a) in out.connections.iter().enumerate() {
        for b in &out.connections[i + 1..] {
            let d = sys.space.distance(&a.anchors[0].point, &b.anchors[0].point);
            if d <= cfg.separation {
                out.warnings.push(format!(
                    "connections {} and {} of M({}, {}) are not separated on level {} ({d:e})",
                    a.ordinal, b.ordinal, p.id, q.id, a.anchors[0].level
                ));
            }
        }
        if q.index > 0 && a.closest_approach > 1e-6 {
            out.warnings.push(format!(
                "connection {} of M({}, {}) passes {:e} from the target",
                a.ordinal, p.id, q.id, a.closest_approach
            ));
        }
    }
    out.signed_count = out.connections.iter().map(|c| c.sign as i64).sum();
    Ok(out)
}

/// The relation "there is a flow line from p to q", read off the scans.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowRelation {
    pub edges: BTreeSet<(usize, usize)>,
}

impl FlowRelation {
    pub fn from_scans(scans: &[SphereScan]) -> Self {
        let mut edges = BTreeSet::new();
        for s in scans {
            for sample in &s.samples {
                if let Some(q) = sample.limit.critical_id() {
                    if q != s.source {
                        edges.insert((s.source, q));
                    }
                }
            }
            for l in &s.loci {
                edges.insert((s.source, l.target));
            }
        }
        Self { edges }
    }

    /// True when the transitive closure is a partial order (no cycles).
    pub fn is_acyclic(&self) -> bool {
        let mut indegree: BTreeMap<usize, usize> = BTreeMap::new();
        for &(a, b) in &self.edges {
            indegree.entry(a).or_insert(0);
            *indegree.entry(b).or_insert(0) += 1;
        }
        let mut ready: Vec<usize> = indegree.iter().filter(|(_, d)| **d == 0).map(|(k, _)| *k).collect();
        let mut seen = 0;
        while let Some(v) = ready.pop() {
            seen += 1;
            for &(a, b) in self.edges.range((v, 0)..=(v, usize::MAX)) {
                debug_assert_eq!(a, v);
                let d = indegree.get_mut(&b).expect("node");
                *d -= 1;
                if *d == 0 {
                    ready.push(b);
                }
            }
        }
        seen == indegree.len()
    }

    /// All critical sequences `p = r_0 > r_1 > ... > r_m = q` along edges
    /// with strictly decreasing values.
    pub fn critical_sequences(&self, points: &[CriticalPoint], p: usize, q: usize) -> Vec<Vec<usize>> {
        let value = |id: usize| points.iter().find(|r| r.id == id).map(|r| r.value);
        let mut out = Vec::new();
        let mut path = vec![p];
        fn walk(
            rel: &FlowRelation,
            value: &dyn Fn(usize) -> Option<f64>,
            q: usize,
            path: &mut Vec<usize>,
            out: &mut Vec<Vec<usize>>,
        ) {
            let v = *path.last().expect("nonempty path");
            if v == q {
                out.push(path.clone());
                return;
            }
            for &(_, w) in rel.edges.range((v, 0)..=(v, usize::MAX)) {
                if value(w) < value(v) && !path.contains(&w) {
                    path.push(w);
                    walk(rel, value, q, path, out);
                    path.pop();
                }
            }
        }
        walk(self, &value, q, &mut path, &mut out);
        out.sort();
        out
    }
}

/// Everything the chain complex needs, computed for one flow system.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModuliSet {
    pub levels: Vec<f64>,
    pub scans: Vec<SphereScan>,
    pub zero_dim: Vec<ModuliZeroDim>,
    pub one_dim: Vec<ModuliOneDim>,
    pub relation: FlowRelation,
    pub warnings: Vec<String>,
}

impl ModuliSet {
    pub fn zero(&self, p: usize, q: usize) -> Option<&ModuliZeroDim> {
        self.zero_dim.iter().find(|m| m.source == p && m.target == q)
    }

    pub fn one(&self, p: usize, q: usize) -> Option<&ModuliOneDim> {
        self.one_dim.iter().find(|m| m.source == p && m.target == q)
    }

    pub fn connection(&self, r: ConnectionRef) -> Option<&Connection> {
        self.zero(r.source, r.target).and_then(|m| m.connections.get(r.ordinal))
    }

    /// Signed counts `#M(p, q)` keyed by `(p, q)`.
    pub fn signed_counts(&self) -> BTreeMap<(usize, usize), i64> {
        self.zero_dim.iter().map(|m| ((m.source, m.target), m.signed_count)).collect()
    }

    pub fn min_margin(&self) -> f64 {
        self.zero_dim.iter().map(|m| m.min_margin()).fold(f64::INFINITY, f64::min)
    }

    pub fn min_sign_det(&self) -> f64 {
        self.zero_dim
            .iter()
            .flat_map(|m| m.connections.iter().map(|c| c.sign_det))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Scan every unstable sphere and build all moduli spaces of dimension
/// zero and one.
pub fn compute_moduli(sys: &FlowSystem, points: &[CriticalPoint], cfg: &ShootingConfig) -> Result<ModuliSet> {
    let ctx = LimitContext::new(points, sys);
    let levels = regular_levels(points);
    let mut scans = Vec::new();
    for p in points.iter().filter(|p| p.index > 0) {
        scans.push(scan_unstable_sphere(sys, &ctx, p, cfg)?);
    }
    let scan_of = |id: usize| scans.iter().find(|s| s.source == id);
    let mut warnings: Vec<String> = scans.iter().flat_map(|s| s.warnings.iter().cloned()).collect();

    let mut zero_dim = Vec::new();
    for p in points {
        for q in points.iter().filter(|q| q.index + 1 == p.index) {
            let scan = scan_of(p.id).expect("positive index points are scanned");
            let m = find_connections(sys, &ctx, scan, q, &levels, cfg)?;
            warnings.extend(m.warnings.iter().cloned());
            zero_dim.push(m);
        }
    }
    let mut one_dim = Vec::new();
    for p in points {
        for q in points.iter().filter(|q| q.index + 2 == p.index) {
            let scan = scan_of(p.id).expect("positive index points are scanned");
            let m = trace_one_dim_moduli(sys, &ctx, scan, q, &zero_dim, &levels, cfg)?;
            warnings.extend(m.warnings.iter().cloned());
            one_dim.push(m);
        }
    }
    let relation = FlowRelation::from_scans(&scans);
    if !relation.is_acyclic() {
        warnings.push("flow relation has a cycle".into());
    }
    Ok(ModuliSet {
        levels,
        scans,
        zero_dim,
        one_dim,
        relation,
        warnings,
    })
}
