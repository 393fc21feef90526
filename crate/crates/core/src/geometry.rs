//! Critical points, spectral splits and orientation frames.

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{MorseError, Result};
use crate::linalg::sign_normalize;
use crate::scenario::{Scenario, Topology};

/// A nondegenerate critical point together with its spectral data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub id: usize,
    pub location: Vec<f64>,
    pub value: f64,
    pub index: usize,
    /// Eigenvalues of the metric Hessian, ascending.
    pub eigenvalues: Vec<f64>,
    /// Orientation frame of the descending manifold: negative eigenvectors,
    /// G-orthonormal, ascending eigenvalue order.
    pub neg_frame: Vec<Vec<f64>>,
    pub pos_frame: Vec<Vec<f64>>,
}

impl CriticalPoint {
    pub fn dimension(&self) -> usize {
        self.location.len()
    }

    /// Negative frame as the columns of an `n x index` matrix.
    pub fn neg_matrix(&self) -> DMatrix<f64> {
        frame_matrix(&self.neg_frame, self.dimension())
    }

    pub fn pos_matrix(&self) -> DMatrix<f64> {
        frame_matrix(&self.pos_frame, self.dimension())
    }

    /// Smallest `|eigenvalue|`, the local spectral gap.
    pub fn spectral_gap(&self) -> f64 {
        self.eigenvalues.iter().map(|l| l.abs()).fold(f64::INFINITY, f64::min)
    }
}

fn frame_matrix(frame: &[Vec<f64>], n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, frame.len(), |i, j| frame[j][i])
}

/// Eigen-decomposition of `A(p)^{-1} Hess f(p)`, self-adjoint for `G(p)`.
#[derive(Debug, Clone)]
pub struct SpectralSplit {
    pub matrix: DMatrix<f64>,
    pub metric: DMatrix<f64>,
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Columns are G-orthonormal eigenvectors in the order of `eigenvalues`.
    pub eigenvectors: DMatrix<f64>,
    pub index: usize,
    /// G-orthogonal projection onto the negative spectral space.
    pub p1: DMatrix<f64>,
    pub p2: DMatrix<f64>,
}

impl SpectralSplit {
    pub fn neg_frame(&self) -> DMatrix<f64> {
        self.eigenvectors.columns(0, self.index).into_owned()
    }

    pub fn pos_frame(&self) -> DMatrix<f64> {
        let n = self.eigenvectors.ncols();
        self.eigenvectors.columns(self.index, n - self.index).into_owned()
    }
}

/// Tunables for [`find_critical_points_with`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct CriticalSearch {
    pub density: usize,
    /// Seeds on Euclidean space cover `[-w, w]^n`.
    pub box_half_width: f64,
    pub dedup_distance: f64,
    pub gradient_tol: f64,
    pub nondegeneracy_tol: f64,
    pub max_newton_iterations: usize,
}

impl Default for CriticalSearch {
    fn default() -> Self {
        Self {
            density: 8,
            box_half_width: 2.0,
            dedup_distance: 1e-6,
            gradient_tol: 1e-10,
            nondegeneracy_tol: 1e-8,
            max_newton_iterations: 100,
        }
    }
}

pub fn find_critical_points(scenario: &Scenario, density: usize) -> Result<Vec<CriticalPoint>> {
    find_critical_points_with(
        scenario,
        &CriticalSearch {
            density,
            ..CriticalSearch::default()
        },
    )
}

pub fn find_critical_points_with(scenario: &Scenario, cfg: &CriticalSearch) -> Result<Vec<CriticalPoint>> {
    let n = scenario.dimension();
    if cfg.density == 0 {
        return Err(MorseError::Validation("grid density must be positive".into()));
    }
    let total = (cfg.density as f64).powi(n as i32);
    if total > 1e6 {
        return Err(MorseError::Validation(format!(
            "{} seeds exceed the limit of 10^6",
            total as u64
        )));
    }
    let seeds = seed_grid(scenario, cfg);
    let converged: Vec<Option<Vec<f64>>> = seeds.par_iter().map(|s| newton(scenario, s, cfg)).collect();

    let space = scenario.space();
    let mut unique: Vec<Vec<f64>> = Vec::new();
    for x in converged.into_iter().flatten() {
        if !unique.iter().any(|u| space.distance(u, &x) <= cfg.dedup_distance) {
            unique.push(x);
        }
    }

    let mut points = unique
        .into_iter()
        .map(|x| {
            let x = polish(scenario, &x, cfg)?;
            let split = spectral_split_with(scenario, &x, cfg.nondegeneracy_tol)?;
            let neg = assign_orientation(&split);
            let pos = split.pos_frame();
            Ok(CriticalPoint {
                id: 0,
                value: scenario.value(&x),
                index: split.index,
                eigenvalues: split.eigenvalues.clone(),
                neg_frame: neg.column_iter().map(|c| c.iter().copied().collect()).collect(),
                pos_frame: pos.column_iter().map(|c| c.iter().copied().collect()).collect(),
                location: x,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    points.sort_by(compare_points);
    for (id, p) in points.iter_mut().enumerate() {
        p.id = id;
    }
    Ok(points)
}

/// Value descending (quantized at `1e-9`), then lexicographic location.
fn compare_points(a: &CriticalPoint, b: &CriticalPoint) -> Ordering {
    let qa = (a.value / 1e-9).round();
    let qb = (b.value / 1e-9).round();
    qb.partial_cmp(&qa).unwrap_or(Ordering::Equal).then_with(|| {
        for (x, y) in a.location.iter().zip(&b.location) {
            match x.partial_cmp(y) {
                Some(Ordering::Equal) | None => continue,
                Some(o) => return o,
            }
        }
        Ordering::Equal
    })
}

fn seed_grid(scenario: &Scenario, cfg: &CriticalSearch) -> Vec<Vec<f64>> {
    let n = scenario.dimension();
    let m = cfg.density;
    let (lo, width): (Vec<f64>, Vec<f64>) = match scenario.space().topology() {
        Topology::Torus(p) => (vec![0.0; n], p.clone()),
        Topology::Euclidean => (vec![-cfg.box_half_width; n], vec![2.0 * cfg.box_half_width; n]),
    };
    let total = m.pow(n as u32);
    (0..total)
        .map(|mut idx| {
            (0..n)
                .map(|i| {
                    let k = idx % m;
                    idx /= m;
                    lo[i] + width[i] * (k as f64 + 0.5) / m as f64
                })
                .collect()
        })
        .collect()
}

/// Snap coordinates so that the same torus point always has the same
/// representative.
fn canonical(scenario: &Scenario, x: &[f64]) -> Vec<f64> {
    let mut w = scenario.space().wrap(x);
    if let Topology::Torus(periods) = scenario.space().topology() {
        for (wi, p) in w.iter_mut().zip(periods) {
            if *p - *wi < 1e-13 * p {
                *wi = 0.0;
            }
        }
    }
    for wi in w.iter_mut() {
        if wi.abs() < 1e-14 {
            *wi = 0.0;
        }
    }
    w
}

fn newton_step(scenario: &Scenario, x: &[f64], cap: f64) -> Option<(Vec<f64>, f64)> {
    let b = scenario.evaluate(x).ok()?;
    let gnorm = b.gradient.norm();
    let step = b.hessian.lu().solve(&b.gradient)?;
    let len = step.norm();
    if !len.is_finite() {
        return None;
    }
    let scale = if len > cap { cap / len } else { 1.0 };
    let next: Vec<f64> = x.iter().zip(step.iter()).map(|(xi, si)| xi - scale * si).collect();
    Some((next, gnorm))
}

fn newton(scenario: &Scenario, seed: &[f64], cfg: &CriticalSearch) -> Option<Vec<f64>> {
    let cap = match scenario.space().topology() {
        Topology::Torus(p) => 0.25 * p.iter().cloned().fold(f64::INFINITY, f64::min),
        Topology::Euclidean => cfg.box_half_width.max(1.0),
    };
    let limit = 1e3 * cfg.box_half_width.max(1.0);
    let mut x = seed.to_vec();
    for _ in 0..cfg.max_newton_iterations {
        let (next, gnorm) = newton_step(scenario, &x, cap)?;
        if gnorm <= 0.01 * cfg.gradient_tol {
            return Some(canonical(scenario, &x));
        }
        x = next;
        if x.iter().any(|v| !v.is_finite()) {
            return None;
        }
        if !scenario.space().is_torus() && x.iter().any(|v| v.abs() > limit) {
            return None;
        }
    }
    let g = scenario.gradient(&x).norm();
    (g <= cfg.gradient_tol).then(|| canonical(scenario, &x))
}

fn polish(scenario: &Scenario, x: &[f64], cfg: &CriticalSearch) -> Result<Vec<f64>> {
    let mut best = x.to_vec();
    let mut best_g = scenario.gradient(&best).norm();
    let mut cur = best.clone();
    for _ in 0..5 {
        let Some((next, _)) = newton_step(scenario, &cur, f64::INFINITY) else {
            break;
        };
        cur = canonical(scenario, &next);
        let g = scenario.gradient(&cur).norm();
        if g < best_g {
            best = cur.clone();
            best_g = g;
        }
    }
    if best_g > cfg.gradient_tol {
        return Err(MorseError::NonFinite(format!(
            "critical point at {best:?} could not be polished (|grad f| = {best_g:e})"
        )));
    }
    Ok(best)
}

pub fn spectral_split(scenario: &Scenario, p: &[f64]) -> Result<SpectralSplit> {
    spectral_split_with(scenario, p, CriticalSearch::default().nondegeneracy_tol)
}

pub fn spectral_split_with(scenario: &Scenario, p: &[f64], tol: f64) -> Result<SpectralSplit> {
    let bundle = scenario.evaluate(p)?;
    let metric = scenario.metric_at(p);
    split_from_parts(&bundle.hessian, &metric, p, tol)
}

/// Spectral split of `A^{-1} H` for symmetric `H` and SPD `A`.
pub fn split_from_parts(
    hessian: &DMatrix<f64>,
    metric: &DMatrix<f64>,
    location: &[f64],
    tol: f64,
) -> Result<SpectralSplit> {
    let n = hessian.nrows();
    let chol = metric
        .clone()
        .cholesky()
        .ok_or_else(|| MorseError::SingularMetric(location.to_vec()))?;
    let l = chol.l();
    let l_inv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| MorseError::SingularMetric(location.to_vec()))?;
    let mut s = &l_inv * hessian * l_inv.transpose();
    s = (&s + s.transpose()) * 0.5;
    let eig = s.symmetric_eigen();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .partial_cmp(&eig.eigenvalues[b])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    if let Some(&bad) = eigenvalues.iter().find(|l| l.abs() < tol) {
        return Err(MorseError::DegenerateCriticalPoint {
            location: location.to_vec(),
            eigenvalue: bad,
        });
    }
    let w = DMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    let mut v = l_inv.transpose() * w;

    // Canonicalize the basis inside each cluster of equal eigenvalues.
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n
            && (eigenvalues[end] - eigenvalues[start]).abs() <= 1e-8 * eigenvalues[start].abs().max(1.0)
        {
            end += 1;
        }
        if end - start > 1 {
            let block = canonical_cluster_basis(&v.columns(start, end - start).into_owned(), metric);
            v.view_mut((0, start), (n, end - start)).copy_from(&block);
        }
        start = end;
    }
    for j in 0..n {
        let mut c: DVector<f64> = v.column(j).into_owned();
        sign_normalize(&mut c);
        v.set_column(j, &c);
    }

    let index = eigenvalues.iter().filter(|&&l| l < 0.0).count();
    let v1 = v.columns(0, index).into_owned();
    let v2 = v.columns(index, n - index).into_owned();
    let p1 = &v1 * v1.transpose() * metric;
    let p2 = &v2 * v2.transpose() * metric;
    let matrix = chol.solve(hessian);
    Ok(SpectralSplit {
        matrix,
        metric: metric.clone(),
        eigenvalues,
        eigenvectors: v,
        index,
        p1,
        p2,
    })
}

/// Deterministic G-orthonormal basis of the span of `basis` (itself
/// G-orthonormal): project standard vectors, largest residual first.
fn canonical_cluster_basis(basis: &DMatrix<f64>, g: &DMatrix<f64>) -> DMatrix<f64> {
    let n = basis.nrows();
    let m = basis.ncols();
    let project = |x: &DVector<f64>| -> DVector<f64> { basis * (basis.transpose() * (g * x)) };
    let mut chosen: Vec<DVector<f64>> = Vec::new();
    while chosen.len() < m {
        let mut best: Option<(f64, DVector<f64>)> = None;
        for i in 0..n {
            let mut e = DVector::zeros(n);
            e[i] = 1.0;
            let mut r = project(&e);
            for c in &chosen {
                let coef = c.dot(&(g * &r));
                r -= c * coef;
            }
            let norm = r.dot(&(g * &r)).max(0.0).sqrt();
            let better = match &best {
                None => true,
                Some((b, _)) => norm > *b * (1.0 + 1e-10) + 1e-14,
            };
            if better {
                best = Some((norm, r));
            }
        }
        let (norm, r) = best.expect("non-empty dimension");
        chosen.push(r / norm);
    }
    DMatrix::from_columns(&chosen)
}

/// The deterministic orientation frame of the descending manifold.
pub fn assign_orientation(split: &SpectralSplit) -> DMatrix<f64> {
    split.neg_frame()
}

/// Alternating count of critical points by index.
pub fn euler_characteristic(points: &[CriticalPoint]) -> i64 {
    points
        .iter()
        .map(|p| if p.index % 2 == 0 { 1 } else { -1 })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::catalog;
    use crate::scenario::MetricFieldSpec;

    #[test]
    fn diagonal_splits() {
        let h = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, -2.0]));
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0]));
        let s = split_from_parts(&h, &a, &[0.0, 0.0], 1e-8).unwrap();
        assert_eq!(s.index, 1);
        assert!((s.eigenvalues[0] + 1.0).abs() < 1e-14 && (s.eigenvalues[1] - 2.0).abs() < 1e-14);
        let v1 = s.neg_frame();
        assert!(v1[(0, 0)].abs() < 1e-14 && v1[(1, 0)] > 0.0);
        // G-normalized: v^T A v = 1.
        assert!(((v1.transpose() * &a * &v1)[(0, 0)] - 1.0).abs() < 1e-14);
        let id = &s.p1 + &s.p2;
        assert!((id - DMatrix::identity(2, 2)).norm() < 1e-12);
        assert!((&s.p1 * &s.p2).norm() < 1e-12);
        assert!((&a * &s.matrix - s.matrix.transpose() * &a).norm() < 1e-10);
    }

    #[test]
    fn degenerate_is_rejected() {
        let h = DMatrix::from_diagonal(&DVector::from_vec(vec![1e-9, 1.0]));
        let err = split_from_parts(&h, &DMatrix::identity(2, 2), &[0.0, 0.0], 1e-8).unwrap_err();
        assert!(matches!(err, MorseError::DegenerateCriticalPoint { .. }));
    }

    #[test]
    fn torus_max_frame_is_standard() {
        let s = catalog::torus(MetricFieldSpec::Identity);
        let split = spectral_split(&s, &[0.0, 0.0]).unwrap();
        let frame = assign_orientation(&split);
        assert!((frame - DMatrix::identity(2, 2)).norm() < 1e-14);
    }

    #[test]
    fn torus_critical_points() {
        let s = catalog::torus(MetricFieldSpec::Identity);
        let pts = find_critical_points(&s, 8).unwrap();
        let summary: Vec<(Vec<f64>, usize)> = pts.iter().map(|p| (p.location.clone(), p.index)).collect();
        assert_eq!(
            summary,
            vec![
                (vec![0.0, 0.0], 2),
                (vec![0.0, 0.5], 1),
                (vec![0.5, 0.0], 1),
                (vec![0.5, 0.5], 0)
            ]
        );
        assert_eq!(euler_characteristic(&pts), 0);
    }
}
