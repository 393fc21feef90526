use std::f64::consts::PI;

use morseflow::flow::{level_anchors, FlowSystem};
use morseflow::geometry::{find_critical_points, CriticalPoint};
use morseflow::moduli::{
    assemble_compactified, compare_under_homotopy, compute_moduli, compute_sign_with_frames, sample_unstable_sphere,
    shooting_point, ModuliSet, ShootingConfig,
};
use morseflow::normalform::FieldHomotopy;
use morseflow::scenario::{catalog, MetricFieldSpec, Scenario};
use morseflow::MorseError;

fn torus() -> Scenario {
    catalog::torus(MetricFieldSpec::Identity)
}

fn torus_f(x: &[f64]) -> f64 {
    (2.0 * PI * x[0]).cos() + (2.0 * PI * x[1]).cos()
}

fn at<'a>(s: &Scenario, points: &'a [CriticalPoint], loc: [f64; 2]) -> &'a CriticalPoint {
    points
        .iter()
        .find(|p| s.space().distance(&p.location, &loc) < 1e-6)
        .expect("critical point present")
}

fn moduli_of(s: &Scenario) -> (Vec<CriticalPoint>, ModuliSet) {
    let points = find_critical_points(s, 8).unwrap();
    let field = s.negative_gradient_field();
    let sys = FlowSystem::new(s.space(), &field, s);
    let m = compute_moduli(&sys, &points, &ShootingConfig::default()).unwrap();
    (points, m)
}

#[test]
fn unstable_sphere_seeds_lie_below_the_source() {
    let s = torus();
    let points = find_critical_points(&s, 8).unwrap();
    let saddle = at(&s, &points, [0.5, 0.0]);
    let seeds = sample_unstable_sphere(saddle, 1e-4, 64).unwrap();
    assert_eq!(seeds.len(), 2);
    for i in 0..2 {
        assert!((0.5 * (seeds[0].seed[i] + seeds[1].seed[i]) - saddle.location[i]).abs() < 1e-15);
    }
    let max = at(&s, &points, [0.0, 0.0]);
    let circle = sample_unstable_sphere(max, 1e-4, 360).unwrap();
    assert_eq!(circle.len(), 360);
    for shot in &circle {
        assert!((s.space().distance(&shot.seed, &max.location) - 1e-4).abs() < 1e-12);
    }
    for shot in &circle {
        assert!(torus_f(&shot.seed) < 2.0);
    }
    for shot in &seeds {
        assert!(torus_f(&shot.seed) < 0.0);
    }
}

#[test]
fn minima_have_no_unstable_sphere() {
    let s = torus();
    let points = find_critical_points(&s, 8).unwrap();
    let min = at(&s, &points, [0.5, 0.5]);
    assert!(matches!(sample_unstable_sphere(min, 1e-4, 8), Err(MorseError::Precondition(_))));
}

#[test]
fn index_three_is_unsupported() {
    let p = CriticalPoint {
        id: 0,
        location: vec![0.0; 3],
        value: 0.0,
        index: 3,
        eigenvalues: vec![-1.0; 3],
        neg_frame: vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]],
        pos_frame: vec![],
    };
    assert!(matches!(shooting_point(&p, 1e-4, 0.0), Err(MorseError::Unsupported(_))));
}

#[test]
fn torus_connection_counts_follow_the_separable_subsystems() {
    let s = torus();
    let (points, m) = moduli_of(&s);
    let max = at(&s, &points, [0.0, 0.0]).id;
    let min = at(&s, &points, [0.5, 0.5]).id;
    for loc in [[0.5, 0.0], [0.0, 0.5]] {
        let r = at(&s, &points, loc).id;
        assert_eq!(m.zero(r, min).unwrap().unsigned_count(), 2);
        assert_eq!(m.zero(max, r).unwrap().unsigned_count(), 2);
    }
    // The two halves of the vertical unstable line of (1/2, 0) carry
    // opposite signs.
    let r = at(&s, &points, [0.5, 0.0]).id;
    let signs: Vec<i32> = m.zero(r, min).unwrap().connections.iter().map(|c| c.sign).collect();
    assert_eq!(signs.iter().sum::<i32>(), 0);
}

#[test]
fn anchors_sit_on_their_levels_and_are_reproducible() {
    let s = torus();
    let (_, m) = moduli_of(&s);
    let field = s.negative_gradient_field();
    let sys = FlowSystem::new(s.space(), &field, &s);
    let cfg = ShootingConfig::default();
    for z in &m.zero_dim {
        for c in &z.connections {
            let levels: Vec<f64> = c.anchors.iter().map(|a| a.level).collect();
            let again = level_anchors(&sys, &c.seed, &levels, &cfg.flow).unwrap();
            for (a, b) in c.anchors.iter().zip(again) {
                assert!((torus_f(&a.point) - a.level).abs() <= 1e-10);
                let b = b.expect("anchor reached again");
                assert!(s.space().distance(&a.point, &b) <= 1e-6);
            }
        }
        for (i, a) in z.connections.iter().enumerate() {
            for b in &z.connections[i + 1..] {
                let level = a.anchors[0].level;
                let d = s.space().distance(&a.anchor_at(level).unwrap().point, &b.anchor_at(level).unwrap().point);
                assert!(d > 1e-4);
            }
        }
    }
}

#[test]
fn reversing_an_orientation_frame_flips_the_sign() {
    let s = torus();
    let (points, m) = moduli_of(&s);
    let field = s.negative_gradient_field();
    let sys = FlowSystem::new(s.space(), &field, &s);
    let cfg = ShootingConfig::default();
    let max = at(&s, &points, [0.0, 0.0]);
    let r = at(&s, &points, [0.5, 0.0]);
    let c = &m.zero(max.id, r.id).unwrap().connections[0];
    let level = c.anchors[0].level;
    let approach = &c.anchors[0].point;
    let approach: Vec<f64> = {
        // A point on the connection close to r, reached by flowing on from the anchor.
        let near = level_anchors(&sys, approach, &[0.01], &cfg.flow).unwrap();
        near[0].clone().unwrap()
    };
    let sign = |pf: &nalgebra::DMatrix<f64>, qf: &nalgebra::DMatrix<f64>| {
        compute_sign_with_frames(&sys, pf, r, qf, &c.seed, level, &approach, &cfg.flow, 1e-8).unwrap().sign
    };
    let (pf, qf) = (max.neg_matrix(), r.neg_matrix());
    let base = sign(&pf, &qf);
    assert_eq!(base, c.sign);
    assert_eq!(sign(&pf, &(-&qf)), -base);
    let mut swapped = pf.clone();
    swapped.swap_columns(0, 1);
    assert_eq!(sign(&swapped, &qf), -base);
}

#[test]
fn double_well_boundary_is_a_difference_of_minima() {
    let s = catalog::double_well();
    let (points, m) = moduli_of(&s);
    let saddle = points.iter().find(|p| p.index == 1).unwrap();
    let counts: Vec<i64> = points
        .iter()
        .filter(|p| p.index == 0)
        .map(|q| {
            let z = m.zero(saddle.id, q.id).unwrap();
            assert_eq!(z.unsigned_count(), 1);
            z.signed_count
        })
        .collect();
    assert_eq!(counts.len(), 2);
    assert_eq!(counts[0], -counts[1]);
    assert_eq!(counts[0].abs(), 1);
}

#[test]
fn flow_relation_is_acyclic_with_descending_sequences() {
    let s = torus();
    let (points, m) = moduli_of(&s);
    assert!(m.relation.is_acyclic());
    let max = at(&s, &points, [0.0, 0.0]).id;
    let min = at(&s, &points, [0.5, 0.5]).id;
    let seqs = m.relation.critical_sequences(&points, max, min);
    let through_saddles: Vec<_> = seqs.iter().filter(|q| q.len() == 3).collect();
    assert_eq!(through_saddles.len(), 2);
    let value = |id: usize| points.iter().find(|p| p.id == id).unwrap().value;
    for seq in &seqs {
        assert_eq!((seq[0], *seq.last().unwrap()), (max, min));
        for w in seq.windows(2) {
            assert!(value(w[0]) > value(w[1]));
        }
        for w in through_saddles.iter().flat_map(|q| q.windows(2)) {
            assert!(m.zero(w[0], w[1]).is_some_and(|z| z.unsigned_count() > 0));
        }
    }
}

#[test]
fn compactified_torus_strata() {
    let s = torus();
    let (points, m) = moduli_of(&s);
    let field = s.negative_gradient_field();
    let sys = FlowSystem::new(s.space(), &field, &s);
    let max = at(&s, &points, [0.0, 0.0]).id;
    let min = at(&s, &points, [0.5, 0.5]).id;
    let one = m.one(max, min).unwrap();
    let c = assemble_compactified(&sys, &points, one, &m.zero_dim).unwrap();
    assert_eq!(c.arcs, 4);
    // Two broken pairs (2 x 2) through each of the two saddles.
    assert_eq!(c.broken.len(), 8);
    for saddle in [[0.5, 0.0], [0.0, 0.5]] {
        let r = at(&s, &points, saddle).id;
        assert_eq!(c.broken.iter().filter(|b| b.sequence == [max, r, min]).count(), 4);
    }
    for b in &c.broken {
        for w in b.anchors.windows(2) {
            assert!(w[0].level > w[1].level);
        }
    }
    // Every arc endpoint lands on exactly one broken pair.
    assert_eq!(c.broken.iter().map(|b| b.endpoint_count).sum::<usize>(), 8);
    assert!(c.min_separation > 1e-6);
}

#[test]
fn homotopy_start_matches_the_base_field() {
    let s = catalog::torus(catalog::constant_metric(vec![vec![1.0, 0.0], vec![0.0, 2.0]]));
    let (points, m) = moduli_of(&s);
    let saddle = at(&s, &points, [0.0, 0.5]);
    let h = FieldHomotopy::new(&s, saddle, 0.1).unwrap();
    let rep = compare_under_homotopy(&s, &points, &h, &[0.0], &[], &ShootingConfig::default(), 1e-3).unwrap();
    for c in &rep.samples[0].counts {
        let z = m.zero(c.source, c.target).unwrap();
        assert_eq!((c.unsigned, c.signed), (z.unsigned_count(), z.signed_count));
    }
    assert!(rep.is_invariant());
}
