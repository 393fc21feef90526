//! Inclination of tangent vectors under the model flow.
//!
//! For a start point and a full tangent map `J(t)` the experiment records
//! norm monotonicity and exponential envelopes of both blocks, the time spent
//! in the transition region `E(r)` (the closed polydisk of radius `r` minus
//! the open polydisk of radius `r/2`), and the passage maps across `E(r)`
//! from which the constants `K1`, `K2` are measured.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::ModelField;
use crate::error::{MorseError, Result};
use crate::ode::{bracket_root, Control, Dopri5, OdeError};
use crate::scenario::VectorField;

/// `|v2| / |v1|` for the split after the first `k1` coordinates;
/// `f64::INFINITY` when `v1 = 0`.
pub fn inclination(v: &DVector<f64>, k1: usize) -> f64 {
    let n1 = v.rows(0, k1).norm();
    let n2 = v.rows(k1, v.len() - k1).norm();
    if n1 == 0.0 {
        f64::INFINITY
    } else {
        n2 / n1
    }
}

/// A start point with tangent vectors to follow.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InclinationStart {
    pub point: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct InclinationConfig {
    pub radii: Vec<f64>,
    /// Points per axis of the start grid.
    pub grid: usize,
    /// Range of `|x1| / r` over the start grid.
    pub unstable_range: (f64, f64),
    /// Range of `|x2| / r` over the start grid.
    pub stable_range: (f64, f64),
    pub start_inclinations: Vec<f64>,
    pub horizon: f64,
    pub rtol: f64,
    pub atol: f64,
}

impl Default for InclinationConfig {
    fn default() -> Self {
        Self {
            radii: vec![0.1, 0.25, 0.5],
            grid: 10,
            unstable_range: (0.02, 0.6),
            stable_range: (0.3, 1.5),
            start_inclinations: vec![0.0, 0.01, 0.05, 0.5, 1.0],
            horizon: 6.0,
            rtol: 1e-11,
            atol: 1e-14,
        }
    }
}

/// One (start point, start vector) pair.
#[derive(Debug, Clone, Serialize)]
pub struct InclinationRun {
    pub r: f64,
    pub start: Vec<f64>,
    pub lambda0: f64,
    pub end_inclination: f64,
    pub time_in_region: f64,
    pub entries: usize,
    /// `lambda0 / (K1 - K2 lambda0)` when the denominator is positive.
    pub single_bound: Option<f64>,
    /// The single-passage bound applied once per passage through `E(r)`.
    pub bound: Option<f64>,
}

/// Checks shared by all vectors of one start point.
#[derive(Debug, Clone, Serialize)]
pub struct StartSummary {
    pub start: Vec<f64>,
    pub time_in_region: f64,
    pub entries: usize,
    pub exited: bool,
    /// Largest relative decrease of `|x1|` between consecutive samples.
    pub monotonicity_violation: f64,
    /// Largest relative violation of `e^{a0 t} |x1(0)| <= |x1(t)| <= e^{a1 t} |x1(0)|`.
    pub envelope_violation: f64,
    /// Largest `| |x2(t)| - |e^{-Bt} x2(0)| |`.
    pub stable_deviation: f64,
    /// Largest violation of `|x2(t)| <= e^{-beta t} |x2(0)|`.
    pub stable_envelope_violation: f64,
    #[serde(skip)]
    passages: Vec<DMatrix<f64>>,
    #[serde(skip)]
    end_map: DMatrix<f64>,
}

/// One recorded time sample: `t`, the state, and the inclination of each
/// followed vector.
#[derive(Debug, Clone, Serialize)]
pub struct SeriesSample {
    pub t: f64,
    pub x: Vec<f64>,
    pub inclinations: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct InclinationReport {
    pub r: f64,
    pub time_bound: f64,
    pub k1: f64,
    pub k2: f64,
    pub starts: Vec<StartSummary>,
    pub runs: Vec<InclinationRun>,
    pub max_time_in_region: f64,
    pub max_entries: usize,
    pub all_exited: bool,
    pub max_monotonicity_violation: f64,
    pub max_envelope_violation: f64,
    pub max_stable_deviation: f64,
    pub max_stable_envelope_violation: f64,
    /// Runs whose end inclination exceeds the applicable bound by more
    /// than `1e-6`.
    pub bound_violations: usize,
    #[serde(skip)]
    pub series: Vec<Vec<SeriesSample>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct InclinationSweep {
    pub alpha0: f64,
    pub alpha1: f64,
    pub beta: f64,
    pub time_bound: f64,
    pub reports: Vec<InclinationReport>,
    /// `(max - min) / max` of `K1` over the radii.
    pub k1_variation: f64,
    pub k2_variation: f64,
}

struct Crossing {
    t: f64,
    j: DMatrix<f64>,
}

struct Traced {
    summary: StartSummary,
    series: Vec<SeriesSample>,
}

fn block_norms(x: &[f64], k1: usize) -> (f64, f64) {
    let n1 = x[..k1].iter().map(|v| v * v).sum::<f64>().sqrt();
    let n2 = x[k1..].iter().map(|v| v * v).sum::<f64>().sqrt();
    (n1, n2)
}

fn ode_error(e: OdeError<f64>) -> MorseError {
    match e {
        OdeError::StepUnderflow { t, h } => MorseError::StepUnderflow { t, h },
        OdeError::TooManySteps { t } => MorseError::NonFinite(format!("step budget exhausted at t = {t}")),
        OdeError::NonFinite { t } => MorseError::NonFinite(format!("model field not finite at t = {t}")),
    }
}

/// `|exp(-B t) v|` through the eigendecomposition of `B`.
fn decayed_norm(b: &nalgebra::SymmetricEigen<f64, nalgebra::Dyn>, v: &DVector<f64>, t: f64) -> f64 {
    let coeffs = b.eigenvectors.transpose() * v;
    coeffs
        .iter()
        .zip(b.eigenvalues.iter())
        .map(|(c, l)| (c * (-l * t).exp()).powi(2))
        .sum::<f64>()
        .sqrt()
}

fn trace(model: &ModelField, start: &InclinationStart, horizon: f64, cfg: &InclinationConfig) -> Result<Traced> {
    let n = model.dim();
    let k1 = model.k1();
    let r = model.r;
    let x0 = &start.point;
    if x0.len() != n {
        return Err(MorseError::Validation(format!(
            "start point has dimension {}, model has {n}",
            x0.len()
        )));
    }
    let vectors: Vec<DVector<f64>> = start
        .vectors
        .iter()
        .map(|v| DVector::from_column_slice(v))
        .collect();
    let mut y0 = x0.clone();
    y0.extend_from_slice(DMatrix::<f64>::identity(n, n).as_slice());

    let (n10, n20) = block_norms(x0, k1);
    let x20 = DVector::from_column_slice(&x0[k1..]);
    let b_eig = model.b.clone().symmetric_eigen();

    // Thresholds: (block, level). Block norms are monotone along the model
    // flow, so each threshold is crossed at most once.
    let thresholds = [(0usize, 0.5 * r), (0, r), (1, 0.5 * r), (1, r)];
    let mut crossings: [Option<Crossing>; 4] = [None, None, None, None];

    let mut series = Vec::new();
    let record = |t: f64, y: &[f64], series: &mut Vec<SeriesSample>| {
        let j = DMatrix::from_column_slice(n, n, &y[n..]);
        series.push(SeriesSample {
            t,
            x: y[..n].to_vec(),
            inclinations: vectors.iter().map(|v| inclination(&(&j * v), k1)).collect(),
        });
    };
    record(0.0, &y0, &mut series);

    let mut mono = 0.0f64;
    let mut envelope = 0.0f64;
    let mut stable_dev = 0.0f64;
    let mut stable_env = 0.0f64;
    let mut prev_n1 = n10;
    let mut check = |t: f64, y: &[f64]| {
        let (n1, n2) = block_norms(&y[..n], k1);
        if prev_n1 > 0.0 {
            mono = mono.max((prev_n1 - n1) / prev_n1);
        }
        prev_n1 = n1;
        if n10 > 0.0 {
            let lo = (model.alpha0 * t).exp() * n10;
            let hi = (model.alpha1 * t).exp() * n10;
            envelope = envelope.max((lo - n1) / lo).max((n1 - hi) / hi);
        }
        stable_dev = stable_dev.max((n2 - decayed_norm(&b_eig, &x20, t)).abs());
        stable_env = stable_env.max(n2 - (-model.beta * t).exp() * n20);
    };

    let solver = Dopri5::with_tolerances(cfg.rtol, cfg.atol);
    let out = solver
        .integrate(
            |_, y, dy| {
                let x = &y[..n];
                let v = model.eval(x);
                dy[..n].copy_from_slice(v.as_slice());
                let jac = model.jacobian(x);
                let jm = DMatrix::from_column_slice(n, n, &y[n..]);
                dy[n..].copy_from_slice((jac * jm).as_slice());
            },
            0.0,
            &y0,
            horizon,
            |step| {
                for theta in [0.25, 0.5, 0.75, 1.0] {
                    let t = step.t0 + theta * step.h;
                    let y = if theta == 1.0 { step.y1.clone() } else { step.eval_theta(theta) };
                    check(t, &y);
                }
                record(step.t1(), &step.y1, &mut series);
                let (a0, b0) = block_norms(&step.y0[..n], k1);
                let (a1, b1) = block_norms(&step.y1[..n], k1);
                for (slot, &(block, level)) in crossings.iter_mut().zip(thresholds.iter()) {
                    if slot.is_some() {
                        continue;
                    }
                    let (g0, g1) = if block == 0 { (a0 - level, a1 - level) } else { (b0 - level, b1 - level) };
                    if g0 == 0.0 || (g0 < 0.0) == (g1 < 0.0) {
                        continue;
                    }
                    let g = |t: f64| {
                        let (p, q) = block_norms(&step.eval(t)[..n], k1);
                        if block == 0 { p - level } else { q - level }
                    };
                    let tc = bracket_root(g, step.t0, g0, step.t1(), g1, 1e-15 * r);
                    let yc = step.eval(tc);
                    *slot = Some(Crossing {
                        t: tc,
                        j: DMatrix::from_column_slice(n, n, &yc[n..]),
                    });
                }
                Control::Continue
            },
        )
        .map_err(ode_error)?;
    let t_end = out.t;
    let end_map = DMatrix::from_column_slice(n, n, &out.y[n..]);

    // Membership of E(r) as a function of time, read off the crossings.
    let [c1h, c1, c2h, c2] = &crossings;
    let when = |c: &Option<Crossing>| c.as_ref().map(|c| c.t);
    let (t1h, t1, t2h, t2) = (when(c1h), when(c1), when(c2h), when(c2));
    let in_region = |t: f64| {
        let n1_small = match t1h {
            Some(tc) => t < tc,
            None => n10 < 0.5 * r,
        };
        let n1_inside = match t1 {
            Some(tc) => t < tc,
            None => n10 <= r,
        };
        let n2_small = match t2h {
            Some(tc) => t > tc,
            None => n20 < 0.5 * r,
        };
        let n2_inside = match t2 {
            Some(tc) => t > tc,
            None => n20 <= r,
        };
        n1_inside && n2_inside && !(n1_small && n2_small)
    };
    let mut breaks: Vec<(f64, Option<&DMatrix<f64>>)> = vec![(0.0, None)];
    for c in crossings.iter().flatten() {
        breaks.push((c.t, Some(&c.j)));
    }
    breaks.push((t_end, Some(&end_map)));
    breaks.sort_by(|a, b| a.0.total_cmp(&b.0));

    let identity = DMatrix::<f64>::identity(n, n);
    let mut time_in_region = 0.0;
    let mut entries = 0;
    let mut passages = Vec::new();
    let mut open: Option<&DMatrix<f64>> = None;
    let mut inside = false;
    for w in breaks.windows(2) {
        let (ta, ja) = w[0];
        let (tb, jb) = w[1];
        if tb <= ta {
            continue;
        }
        let now = in_region(0.5 * (ta + tb));
        if now {
            time_in_region += tb - ta;
            if !inside {
                entries += 1;
                open = Some(ja.unwrap_or(&identity));
            }
        } else if inside {
            passages.push(passage(ja.unwrap_or(&identity), open.take().unwrap_or(&identity)));
        }
        inside = now;
        if inside && tb == t_end {
            passages.push(passage(jb.unwrap_or(&identity), open.take().unwrap_or(&identity)));
        }
    }
    let (n1_end, _) = block_norms(&out.y[..n], k1);

    Ok(Traced {
        summary: StartSummary {
            start: x0.clone(),
            time_in_region,
            entries,
            exited: n1_end > r,
            monotonicity_violation: mono.max(0.0),
            envelope_violation: envelope.max(0.0),
            stable_deviation: stable_dev,
            stable_envelope_violation: stable_env.max(0.0),
            passages,
            end_map,
        },
        series,
    })
}

/// `J(exit) J(entry)^{-1}`.
fn passage(exit: &DMatrix<f64>, entry: &DMatrix<f64>) -> DMatrix<f64> {
    let inv = entry
        .clone()
        .try_inverse()
        .unwrap_or_else(|| DMatrix::from_element(entry.nrows(), entry.ncols(), f64::NAN));
    exit * inv
}

/// Run the experiment for one model field (one radius).
pub fn inclination_experiment(
    model: &ModelField,
    starts: &[InclinationStart],
    horizon: f64,
    cfg: &InclinationConfig,
) -> Result<InclinationReport> {
    let k1 = model.k1();
    let n = model.dim();
    let traced: Vec<Traced> = starts
        .par_iter()
        .map(|s| trace(model, s, horizon, cfg))
        .collect::<Result<_>>()?;

    let mut k1_min = f64::INFINITY;
    let mut k2_max = 0.0f64;
    for t in &traced {
        for p in &t.summary.passages {
            let d11 = p.view((0, 0), (k1, k1)).into_owned();
            let d12 = p.view((0, k1), (k1, n - k1)).into_owned();
            let sv = d11.singular_values();
            k1_min = k1_min.min(sv.min());
            k2_max = k2_max.max(d12.norm().max(d12.singular_values().max()));
        }
    }
    if !k1_min.is_finite() {
        k1_min = f64::NAN;
    }
    let g = |l: f64| {
        let d = k1_min - k2_max * l;
        (d > 0.0).then(|| l / d)
    };

    let mut runs = Vec::new();
    let mut violations = 0;
    for (s, t) in starts.iter().zip(&traced) {
        for v in &s.vectors {
            let v = DVector::from_column_slice(v);
            let lambda0 = inclination(&v, k1);
            let end = inclination(&(&t.summary.end_map * &v), k1);
            let single = g(lambda0);
            let mut bound = Some(lambda0);
            for _ in 0..t.summary.passages.len() {
                bound = bound.and_then(g);
            }
            if let Some(b) = bound {
                if end > b + 1e-6 {
                    violations += 1;
                }
            }
            runs.push(InclinationRun {
                r: model.r,
                start: s.point.clone(),
                lambda0,
                end_inclination: end,
                time_in_region: t.summary.time_in_region,
                entries: t.summary.entries,
                single_bound: single,
                bound,
            });
        }
    }

    let summaries: Vec<StartSummary> = traced.iter().map(|t| t.summary.clone()).collect();
    let fold = |f: fn(&StartSummary) -> f64| summaries.iter().map(f).fold(0.0, f64::max);
    Ok(InclinationReport {
        r: model.r,
        time_bound: model.transition_time_bound(),
        k1: k1_min,
        k2: k2_max,
        max_time_in_region: fold(|s| s.time_in_region),
        max_entries: summaries.iter().map(|s| s.entries).max().unwrap_or(0),
        all_exited: summaries.iter().all(|s| s.exited),
        max_monotonicity_violation: fold(|s| s.monotonicity_violation),
        max_envelope_violation: fold(|s| s.envelope_violation),
        max_stable_deviation: fold(|s| s.stable_deviation),
        max_stable_envelope_violation: fold(|s| s.stable_envelope_violation),
        bound_violations: violations,
        starts: summaries,
        runs,
        series: traced.into_iter().map(|t| t.series).collect(),
    })
}

/// Start grid `x = r (u e1, w e1)` with one tangent vector per requested
/// start inclination, `v = (e1, lambda0 e1)`.
pub fn start_grid(model: &ModelField, cfg: &InclinationConfig) -> Vec<InclinationStart> {
    let n = model.dim();
    let k1 = model.k1();
    let m = cfg.grid.max(1);
    let lerp = |(a, b): (f64, f64), i: usize| {
        if m == 1 {
            a
        } else {
            a + (b - a) * i as f64 / (m - 1) as f64
        }
    };
    let vectors: Vec<Vec<f64>> = cfg
        .start_inclinations
        .iter()
        .map(|&l| {
            let mut v = vec![0.0; n];
            v[0] = 1.0;
            v[k1] = l;
            v
        })
        .collect();
    let mut out = Vec::with_capacity(m * m);
    for i in 0..m {
        for j in 0..m {
            let mut x = vec![0.0; n];
            x[0] = model.r * lerp(cfg.unstable_range, i);
            x[k1] = model.r * lerp(cfg.stable_range, j);
            out.push(InclinationStart {
                point: x,
                vectors: vectors.clone(),
            });
        }
    }
    out
}

/// The experiment over every radius in `cfg.radii`.
pub fn inclination_sweep(
    a0: &DMatrix<f64>,
    a1: &DMatrix<f64>,
    b: &DMatrix<f64>,
    cfg: &InclinationConfig,
) -> Result<InclinationSweep> {
    if cfg.radii.is_empty() {
        return Err(MorseError::Validation("no radii given".into()));
    }
    let mut reports = Vec::new();
    let mut bounds = None;
    for &r in &cfg.radii {
        let model = ModelField::new(a0.clone(), a1.clone(), b.clone(), r)?;
        bounds.get_or_insert((model.alpha0, model.alpha1, model.beta, model.transition_time_bound()));
        let starts = start_grid(&model, cfg);
        reports.push(inclination_experiment(&model, &starts, cfg.horizon, cfg)?);
    }
    let spread = |f: fn(&InclinationReport) -> f64| {
        let vals: Vec<f64> = reports.iter().map(f).collect();
        let hi = vals.iter().cloned().fold(f64::MIN, f64::max);
        let lo = vals.iter().cloned().fold(f64::MAX, f64::min);
        if hi > 0.0 {
            (hi - lo) / hi
        } else {
            0.0
        }
    };
    let (alpha0, alpha1, beta, time_bound) = bounds.expect("at least one radius");
    Ok(InclinationSweep {
        alpha0,
        alpha1,
        beta,
        time_bound,
        k1_variation: spread(|r| r.k1),
        k2_variation: spread(|r| r.k2),
        reports,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inclination_definition() {
        assert_eq!(inclination(&DVector::from_vec(vec![1.0, 0.0]), 1), 0.0);
        assert_eq!(inclination(&DVector::from_vec(vec![1.0, 1.0]), 1), 1.0);
        assert_eq!(inclination(&DVector::from_vec(vec![2.0, 1.0]), 1), 0.5);
        assert!(inclination(&DVector::from_vec(vec![0.0, 1.0]), 1).is_infinite());
    }

    #[test]
    fn equal_operators_never_increase_inclination() {
        let model = ModelField::planar(1.3, 1.3, 0.8, 0.2).unwrap();
        let cfg = InclinationConfig::default();
        let starts = start_grid(&model, &InclinationConfig { grid: 3, ..cfg.clone() });
        let report = inclination_experiment(&model, &starts, 4.0, &cfg).unwrap();
        for series in &report.series {
            for w in series.windows(2) {
                for (a, b) in w[0].inclinations.iter().zip(&w[1].inclinations) {
                    assert!(*b <= *a * (1.0 + 1e-12) + 1e-15);
                }
            }
            // Exact solution diag(e^{1.3 t}, e^{-0.8 t}).
            let last = series.last().unwrap();
            let expected = 0.5 * (-2.1 * last.t).exp();
            assert!((last.inclinations[3] - expected).abs() < 1e-8 * expected.max(1.0));
        }
    }

    #[test]
    fn zero_inclination_is_preserved() {
        let model = ModelField::planar(1.0, 2.0, 1.0, 0.25).unwrap();
        let cfg = InclinationConfig::default();
        let starts = start_grid(&model, &InclinationConfig { grid: 4, ..cfg.clone() });
        let report = inclination_experiment(&model, &starts, cfg.horizon, &cfg).unwrap();
        for run in report.runs.iter().filter(|r| r.lambda0 == 0.0) {
            assert_eq!(run.end_inclination, 0.0);
        }
    }

    #[test]
    fn straight_passage_time() {
        // x1 grows like e^t, x2 = 0: the region is the strip r/2 <= x1 <= r,
        // crossed in exactly ln 2 with A0 = A1.
        let model = ModelField::planar(1.0, 1.0, 1.0, 0.2).unwrap();
        let cfg = InclinationConfig::default();
        let start = InclinationStart {
            point: vec![0.01, 0.0],
            vectors: vec![vec![1.0, 0.0]],
        };
        let report = inclination_experiment(&model, &[start], 6.0, &cfg).unwrap();
        let s = &report.starts[0];
        assert_eq!(s.entries, 1);
        assert!((s.time_in_region - std::f64::consts::LN_2).abs() < 1e-9);
        assert!(s.exited);
    }
}
