//! Acceptance suite: one pass/fail line per criterion.
//!
//! Runs without the libtest harness so the summary is always printed;
//! the process exits non-zero when any criterion fails.

use std::f64::consts::{LN_2, PI};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use morseflow::complex::{build_complex, homology, Coefficients};
use morseflow::flow::FlowSystem;
use morseflow::geometry::{find_critical_points, CriticalPoint};
use morseflow::moduli::{compare_under_homotopy, compute_moduli, shooting_point, ModuliSet, ShootingConfig};
use morseflow::normalform::{inclination_sweep, FieldHomotopy, InclinationConfig, QuadraticNormalization};
use morseflow::pipeline::{analyze, Tolerances};
use morseflow::scenario::{catalog, MetricFieldSpec, Scenario};
use nalgebra::DMatrix;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

/// Analytic critical points of `cos 2 pi x + cos 2 pi y`: location, index, value.
const TORUS_POINTS: [([f64; 2], usize, f64); 4] = [
    ([0.0, 0.0], 2, 2.0),
    ([0.0, 0.5], 1, 0.0),
    ([0.5, 0.0], 1, 0.0),
    ([0.5, 0.5], 0, -2.0),
];

/// Singular homology of the two-torus.
const TORUS_BETTI: [usize; 3] = [1, 2, 1];

fn torus_point<'a>(s: &Scenario, points: &'a [CriticalPoint], loc: [f64; 2]) -> Option<&'a CriticalPoint> {
    points.iter().find(|p| s.space().distance(&p.location, &loc) < 1e-6)
}

fn check_torus_points(s: &Scenario, points: &[CriticalPoint]) -> Result<(), String> {
    ensure!(points.len() == 4, "expected 4 critical points, found {}", points.len());
    for (loc, index, value) in TORUS_POINTS {
        let p = torus_point(s, points, loc).ok_or(format!("no critical point near {loc:?}"))?;
        let err = s.space().distance(&p.location, &loc);
        ensure!(err <= 1e-8, "{loc:?} located only to {err:e}");
        ensure!(p.index == index, "{loc:?} has index {} instead of {index}", p.index);
        ensure!((p.value - value).abs() <= 1e-8, "{loc:?} has value {}", p.value);
    }
    Ok(())
}

fn torus_moduli(s: &Scenario, points: &[CriticalPoint]) -> Result<ModuliSet, String> {
    let field = s.negative_gradient_field();
    let sys = FlowSystem::new(s.space(), &field, s);
    compute_moduli(&sys, points, &ShootingConfig::default()).map_err(|e| e.to_string())
}

/// Signed counts vanish, the boundary squares to zero and the homology is
/// that of the torus.
fn check_torus_complex(s: &Scenario, points: &[CriticalPoint], m: &ModuliSet) -> Result<(), String> {
    let max = torus_point(s, points, [0.0, 0.0]).unwrap().id;
    let min = torus_point(s, points, [0.5, 0.5]).unwrap().id;
    for saddle in [[0.0, 0.5], [0.5, 0.0]] {
        let r = torus_point(s, points, saddle).unwrap().id;
        for (p, q) in [(max, r), (r, min)] {
            let z = m.zero(p, q).ok_or(format!("M({p},{q}) missing"))?;
            ensure!(z.unsigned_count() == 2, "M({p},{q}) has {} points", z.unsigned_count());
            ensure!(z.signed_count == 0, "#M({p},{q}) = {}", z.signed_count);
        }
    }
    let c = build_complex(points, &m.signed_counts(), None).map_err(|e| e.to_string())?;
    for k in 2..c.boundaries.len() {
        let d2 = c.boundaries[k - 1].mul(&c.boundaries[k]).map_err(|e| e.to_string())?;
        ensure!(d2.is_zero(), "d{} d{} != 0", k - 1, k);
    }
    let h = homology(&c, Coefficients::Integer).map_err(|e| e.to_string())?;
    ensure!(h.betti == TORUS_BETTI, "Betti {:?}", h.betti);
    ensure!(h.torsion.iter().all(|t| t.is_empty()), "torsion {:?}", h.torsion);
    Ok(())
}

fn criterion_1() -> Outcome {
    let s = catalog::torus(MetricFieldSpec::Identity);
    let points = find_critical_points(&s, 8).map_err(|e| e.to_string())?;
    check_torus_points(&s, &points)?;
    let m = torus_moduli(&s, &points)?;
    check_torus_complex(&s, &points, &m)?;
    // Separable oracle: the field preserves the lines x = 1/2 and y = 0, so
    // the connections leaving the saddle (1/2, 0) stay on x = 1/2 and those
    // entering it from the maximum stay on y = 0.
    let saddle = torus_point(&s, &points, [0.5, 0.0]).unwrap().id;
    let max = torus_point(&s, &points, [0.0, 0.0]).unwrap().id;
    for c in m.zero_dim.iter().filter(|z| z.source == saddle).flat_map(|z| &z.connections) {
        for a in &c.anchors {
            ensure!((a.point[0] - 0.5).abs() < 1e-6, "saddle connection leaves x = 1/2: {:?}", a.point);
        }
    }
    for c in m.zero(max, saddle).unwrap().connections.iter() {
        for a in &c.anchors {
            let y = a.point[1].rem_euclid(1.0);
            ensure!(y.min(1.0 - y) < 1e-6, "max connection leaves y = 0: {:?}", a.point);
        }
    }
    Ok("4 points, #M = 0 for all index pairs, Betti (1, 2, 1)".into())
}

fn criterion_2() -> Outcome {
    let s = catalog::torus(catalog::conformal_sin_cos(0.3));
    let points = find_critical_points(&s, 8).map_err(|e| e.to_string())?;
    check_torus_points(&s, &points)?;
    // The conformal factor is not constant near any critical point.
    for (loc, _, _) in TORUS_POINTS {
        let grad = (2.0 * PI * loc[0]).cos() * (2.0 * PI * loc[1]).cos();
        let a = s.metric_at(&loc)[(0, 0)];
        let b = s.metric_at(&[loc[0] + 1e-3, loc[1]])[(0, 0)];
        ensure!(grad != 0.0 && (a - b).abs() > 1e-6, "metric locally constant at {loc:?}");
    }
    let m = torus_moduli(&s, &points)?;
    check_torus_complex(&s, &points, &m)?;
    Ok("same critical points, d^2 = 0, Betti (1, 2, 1)".into())
}

fn criterion_3() -> Outcome {
    let s = catalog::torus(MetricFieldSpec::Identity);
    let points = find_critical_points(&s, 8).map_err(|e| e.to_string())?;
    let m = torus_moduli(&s, &points)?;
    let max = torus_point(&s, &points, [0.0, 0.0]).unwrap();
    let min = torus_point(&s, &points, [0.5, 0.5]).unwrap();
    let one = m.one(max.id, min.id).ok_or("M(max, min) missing")?;
    ensure!(one.arcs.len() == 4, "{} arcs", one.arcs.len());
    ensure!(one.endpoint_count() == 8, "{} endpoints", one.endpoint_count());
    let mut worst: f64 = 0.0;
    for arc in &one.arcs {
        for e in &arc.endpoints {
            ensure!(e.first.is_some() && e.second.is_some(), "endpoint at {} has no broken pair", e.parameter);
            let row = e
                .convergence
                .iter()
                .find(|r| (r.offset - 1e-8).abs() < 1e-20)
                .ok_or("no convergence row at offset 1e-8")?;
            worst = worst.max(row.upper).max(row.lower);
            ensure!(row.upper <= 1e-4 && row.lower <= 1e-4, "endpoint at {} converges only to {:e}/{:e}", e.parameter, row.upper, row.lower);
            // Quadrant oracle: endpoints point along the coordinate axes.
            let d = shooting_point(max, 1e-4, e.parameter).map_err(|x| x.to_string())?.direction;
            ensure!((d[0] * d[1]).abs() < 1e-6, "endpoint direction {d:?} is not axial");
        }
        let products: Vec<i32> = arc.endpoints.iter().map(|e| e.weighted_product).collect();
        ensure!(products[0] == -products[1], "arc ({}, {}) products {products:?}", arc.start, arc.end);
    }
    Ok(format!("4 arcs, 8 matched endpoints (worst anchor gap {worst:.1e} at offset 1e-8), products cancel"))
}

fn criterion_4() -> Outcome {
    let s = catalog::double_well();
    let points = find_critical_points(&s, 8).map_err(|e| e.to_string())?;
    ensure!(points.len() == 3, "{} critical points", points.len());
    let at = |x: f64| points.iter().find(|p| (p.location[0] - x).abs() < 1e-8 && p.location[1].abs() < 1e-8);
    let (m1, saddle, m2) = (at(-1.0).ok_or("no minimum at -1")?, at(0.0).ok_or("no saddle")?, at(1.0).ok_or("no minimum at 1")?);
    ensure!(m1.index == 0 && m2.index == 0 && saddle.index == 1, "indices wrong");
    let field = s.negative_gradient_field();
    let sys = FlowSystem::new(s.space(), &field, &s);
    let m = compute_moduli(&sys, &points, &ShootingConfig::default()).map_err(|e| e.to_string())?;
    let c = build_complex(&points, &m.signed_counts(), None).map_err(|e| e.to_string())?;
    let col = c.generators[1].iter().position(|&id| id == saddle.id).unwrap();
    let row = |id: usize| c.generators[0].iter().position(|&g| g == id).unwrap();
    let (a, b) = (c.boundaries[1].entries[row(m1.id)][col], c.boundaries[1].entries[row(m2.id)][col]);
    ensure!(a.abs() == 1 && a == -b, "d1[saddle] = {a}[m1] + {b}[m2]");
    // One-dimensional oracle: the unstable manifold of the saddle is the x-axis.
    for z in m.zero_dim.iter() {
        for conn in &z.connections {
            ensure!(conn.anchors.iter().all(|x| x.point[1].abs() < 1e-8), "connection leaves the x-axis");
        }
    }
    let h = homology(&c, Coefficients::Integer).map_err(|e| e.to_string())?;
    ensure!(h.betti == [1, 0], "Betti {:?}", h.betti);
    Ok(format!("d1[saddle] = {a}([m1] - [m2]), Betti (1, 0)"))
}

fn criterion_5() -> Outcome {
    let cfg = InclinationConfig {
        radii: vec![0.1, 0.25, 0.5],
        ..InclinationConfig::default()
    };
    let one = DMatrix::from_element(1, 1, 1.0);
    let two = DMatrix::from_element(1, 1, 2.0);
    let sweep = inclination_sweep(&one, &two, &one, &cfg).map_err(|e| e.to_string())?;
    let (alpha0, beta) = (1.0, 1.0);
    let t_bound = LN_2 / alpha0 + LN_2 / beta;
    ensure!((sweep.time_bound - 2.0 * LN_2).abs() < 1e-12, "time bound {}", sweep.time_bound);
    let mut worst_small = 0.0f64;
    for rep in &sweep.reports {
        ensure!(rep.starts.len() >= 100, "only {} start points at r = {}", rep.starts.len(), rep.r);
        ensure!(rep.max_monotonicity_violation <= 1e-6, "r = {}: |x1| decreases by {:e}", rep.r, rep.max_monotonicity_violation);
        ensure!(rep.max_envelope_violation <= 1e-6, "r = {}: envelope violated by {:e}", rep.r, rep.max_envelope_violation);
        ensure!(rep.max_stable_deviation <= 1e-8, "r = {}: |x2| deviates by {:e}", rep.r, rep.max_stable_deviation);
        ensure!(rep.max_time_in_region <= t_bound + 1e-6, "r = {}: {} time units in E(r)", rep.r, rep.max_time_in_region);
        ensure!(rep.max_entries <= 2, "r = {}: {} entries", rep.r, rep.max_entries);
        // Independent check of the decay law on the recorded series.
        for series in &rep.series {
            let x20 = series[0].x[1];
            for s in series {
                let expect = (-s.t).exp() * x20.abs();
                ensure!((s.x[1].abs() - expect).abs() <= 1e-8, "r = {}: |x2({})| off by {:e}", rep.r, s.t, (s.x[1].abs() - expect).abs());
            }
        }
        for run in rep.runs.iter().filter(|r| r.lambda0 <= 0.05) {
            worst_small = worst_small.max(run.end_inclination);
            ensure!(run.end_inclination <= 1.0, "r = {}: inclination {} -> {}", rep.r, run.lambda0, run.end_inclination);
        }
    }
    Ok(format!("T = 2 ln 2 respected at r = 0.1, 0.25, 0.5; worst final inclination {worst_small:.1e} for lambda0 <= 0.05"))
}

fn criterion_6() -> Outcome {
    let eps = 0.3;
    let s = catalog::saddle_quartic(1.0);
    let points = find_critical_points(&s, 8).map_err(|e| e.to_string())?;
    let p = points.iter().find(|p| p.location.iter().all(|x| x.abs() < 1e-12)).ok_or("no point at 0")?;
    let q = QuadraticNormalization::new(&s, p, eps).map_err(|e| e.to_string())?;
    let f = |x: f64, y: f64| -0.5 * x * x + 0.5 * y * y + x * x * y * y;
    let mut worst = 0.0f64;
    let mut probes = 0;
    for i in 0..41 {
        for j in 0..41 {
            let y = [-eps + 2.0 * eps * i as f64 / 40.0, -eps + 2.0 * eps * j as f64 / 40.0];
            if y[0].hypot(y[1]) > eps {
                continue;
            }
            probes += 1;
            let (c1, c2) = q.roots(&y).map_err(|e| e.to_string())?;
            let x = q.point(&y);
            let h = f(0.0, 0.0) - 0.5 * (c1[(0, 0)] * y[0]).powi(2) + 0.5 * (c2[(0, 0)] * y[1]).powi(2);
            worst = worst.max((h - f(x[0], x[1])).abs());
        }
    }
    ensure!(worst <= 1e-8, "residual {worst:e}");
    let check = q.verify(41).map_err(|e| e.to_string())?;
    ensure!(check.max_residual <= 1e-8, "library residual {:e}", check.max_residual);

    let s0 = catalog::saddle_quartic(0.0);
    let p0 = find_critical_points(&s0, 8).map_err(|e| e.to_string())?;
    let q0 = QuadraticNormalization::new(&s0, &p0[0], eps).map_err(|e| e.to_string())?;
    let c0 = q0.verify(41).map_err(|e| e.to_string())?;
    ensure!(c0.max_c_deviation <= 1e-10, "C deviates from I by {:e}", c0.max_c_deviation);
    Ok(format!("residual {worst:.1e} over {probes} probes; C = I to {:.1e} without the quartic term", c0.max_c_deviation))
}

fn criterion_7() -> Outcome {
    let s = catalog::torus(catalog::constant_metric(vec![vec![1.0, 0.0], vec![0.0, 2.0]]));
    let points = find_critical_points(&s, 8).map_err(|e| e.to_string())?;
    let saddle = torus_point(&s, &points, [0.5, 0.0]).ok_or("no saddle")?;
    let h = FieldHomotopy::new(&s, saddle, 0.1).map_err(|e| e.to_string())?;
    let grid = [0.0, 0.25, 0.5, 0.75, 1.0];
    let rep = compare_under_homotopy(&s, &points, &h, &grid, &[], &ShootingConfig::default(), 1e-3)
        .map_err(|e| e.to_string())?;
    let base = &rep.samples[0].counts;
    for x in &rep.samples {
        ensure!(x.counts.len() == base.len(), "s = {}: pair list changed", x.s);
        for (a, b) in x.counts.iter().zip(base) {
            ensure!(
                (a.source, a.target, a.signed) == (b.source, b.target, b.signed),
                "s = {}: #M({},{}) = {} vs {}",
                x.s,
                a.source,
                a.target,
                a.signed,
                b.signed
            );
        }
        ensure!(x.min_margin >= 1e-2, "s = {}: margin {:e}", x.s, x.min_margin);
        ensure!(x.square_zero, "s = {}: d^2 != 0", x.s);
        ensure!(x.betti.as_deref() == Some(&TORUS_BETTI[..]), "s = {}: Betti {:?}", x.s, x.betti);
    }
    Ok(format!("signed counts fixed over s in {grid:?}, min margin {:.2}, min det {:.2}", rep.min_margin,
        rep.samples.iter().map(|x| x.min_sign_det).fold(f64::INFINITY, f64::min)))
}

fn criterion_8() -> Outcome {
    let s = catalog::torus(MetricFieldSpec::Identity);
    let tol = Tolerances::default();
    let render = || -> Result<String, String> {
        let a = analyze(&s, &tol).map_err(|e| e.to_string())?;
        serde_json::to_string_pretty(&a).map_err(|e| e.to_string())
    };
    let first = render()?;
    let second = render()?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().map_err(|e| e.to_string())?;
    let serial = pool.install(render)?;
    ensure!(first == second, "repeated runs differ");
    ensure!(first == serial, "single-threaded run differs");
    Ok(format!("{} bytes identical across 3 runs", first.len()))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome, Option<u64>); 8] = [
        ("1 torus pipeline", criterion_1, Some(30)),
        ("2 metric robustness", criterion_2, Some(60)),
        ("3 one-dimensional moduli boundary", criterion_3, None),
        ("4 double well", criterion_4, Some(10)),
        ("5 inclination experiment", criterion_5, Some(60)),
        ("6 quadratic normalization", criterion_6, Some(10)),
        ("7 homotopy invariance", criterion_7, Some(120)),
        ("8 determinism", criterion_8, None),
    ];
    let mut failed = 0;
    for (name, run, limit) in criteria {
        let start = Instant::now();
        let mut outcome = run();
        let elapsed = start.elapsed();
        if let (Ok(_), Some(limit)) = (&outcome, limit) {
            if elapsed > Duration::from_secs(limit) {
                outcome = Err(format!("took {elapsed:.2?}, limit {limit} s"));
            }
        }
        match outcome {
            Ok(detail) => println!("criterion {name}: PASS ({elapsed:.2?}) {detail}"),
            Err(why) => {
                failed += 1;
                println!("criterion {name}: FAIL ({elapsed:.2?}) {why}");
            }
        }
    }
    if failed == 0 {
        println!("acceptance: all 8 criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} of 8 criteria failed");
        ExitCode::FAILURE
    }
}
