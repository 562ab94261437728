use approx::assert_abs_diff_eq;
use coamoeba_atlas::covering::monodromy::Permutation;
use coamoeba_atlas::fiber::{classify_value, fiber_model, fiber_system, invert_regular, lift_attained, lifts, FiberClassification};
use coamoeba_atlas::locus::{critical_value_from_p, phi, phi_lines, Atlas};
use coamoeba_atlas::plane::{crit_det, maps, PlaneConfig, TorusPoint};
use coamoeba_atlas::projective::{concurrency_residual, line_through, meet, Rp2Point};
use num_complex::Complex64;
use proptest::prelude::*;
use std::sync::OnceLock;

fn atlas() -> &'static Atlas {
    static A: OnceLock<Atlas> = OnceLock::new();
    A.get_or_init(|| Atlas::new(PlaneConfig::default()).unwrap())
}

fn coord() -> impl Strategy<Value = f64> {
    -4.0..4.0f64
}

fn perm() -> impl Strategy<Value = Permutation> {
    Just([0usize, 1, 2, 3, 4]).prop_shuffle().prop_map(|v| Permutation([v[0], v[1], v[2], v[3], v[4]]))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn joined_points_lie_on_their_line(p in (coord(), coord(), coord()), q in (coord(), coord(), coord())) {
        let (Ok(p), Ok(q)) = (Rp2Point::new(p.0, p.1, p.2), Rp2Point::new(q.0, q.1, q.2)) else {
            return Ok(());
        };
        prop_assume!(p.distance(&q) > 1e-3);
        let l = line_through(&p, &q).unwrap();
        prop_assert!(l.incidence(&p).abs() < 1e-12);
        prop_assert!(l.incidence(&q).abs() < 1e-12);
    }

    #[test]
    fn meet_lies_on_both_lines(p in prop::array::uniform4((coord(), coord())), w in 0.1..2.0f64) {
        let pts: Vec<Rp2Point> = p.iter().map(|&(x, y)| Rp2Point::new(x, y, w).unwrap()).collect();
        prop_assume!(pts[0].distance(&pts[1]) > 1e-2 && pts[2].distance(&pts[3]) > 1e-2);
        let l1 = line_through(&pts[0], &pts[1]).unwrap();
        let l2 = line_through(&pts[2], &pts[3]).unwrap();
        if let Ok(m) = meet(&l1, &l2) {
            prop_assert!(l1.incidence(&m).abs() < 1e-9);
            prop_assert!(l2.incidence(&m).abs() < 1e-9);
            prop_assert!(concurrency_residual([&l1, &l2, &l1]) < 1e-12);
        }
    }

    #[test]
    fn homogeneous_rescaling_is_the_same_point(x in coord(), y in coord(), s in prop_oneof![-5.0..-0.1f64, 0.1..5.0f64]) {
        let p = Rp2Point::new(x, y, 1.0).unwrap();
        let q = Rp2Point::new(s * x, s * y, s).unwrap();
        prop_assert!(p.distance(&q) < 1e-12);
    }

    #[test]
    fn permutations_form_a_group(p in perm(), q in perm(), r in perm()) {
        prop_assert!(p.then(&q).is_bijection());
        prop_assert_eq!(p.then(&p.inverse()), Permutation::identity());
        prop_assert_eq!(p.inverse().then(&p), Permutation::identity());
        prop_assert_eq!(p.then(&q).then(&r), p.then(&q.then(&r)));
        prop_assert_eq!(p.then(&q).inverse(), q.inverse().then(&p.inverse()));
    }

    #[test]
    fn regular_values_invert_to_their_unique_preimage(w in prop::array::uniform4(coord())) {
        let cfg = atlas().cfg;
        let pt = TorusPoint::from_real(w);
        prop_assume!(pt.min_modulus(&cfg) > 0.05);
        let r = cfg.box_radius();
        prop_assume!(crit_det(&cfg, &pt).unwrap().abs() / r.powi(4) > 1e-4);
        let m = maps(&cfg, &pt).unwrap();
        let FiberClassification::Regular { preimage } = classify_value(&cfg, &m.rolled) else {
            return Err(TestCaseError::fail("off-locus point not classified regular"));
        };
        let inv = invert_regular(&cfg, &m.rolled).unwrap();
        for (a, b) in [preimage, inv].iter().flat_map(|q| q.to_real().into_iter().zip(pt.to_real())) {
            prop_assert!((a - b).abs() < 1e-8 * (1.0 + b.abs()));
        }
        let attained = lifts(&m.rolled).iter().filter(|l| lift_attained(&cfg, l).unwrap()).count();
        prop_assert_eq!(attained, 1);
    }

    #[test]
    fn critical_values_have_concurrent_lines_and_critical_fibers(x in coord(), y in coord(), alpha in 0.0..std::f64::consts::PI) {
        let at = atlas();
        let cfg = at.cfg;
        let z = Complex64::new(x, y);
        prop_assume!(at.base_points().iter().all(|b| (z - b).norm() > 0.05));
        let p = Rp2Point::affine(z);
        let c = critical_value_from_p(at, &p).unwrap();
        let lines = phi_lines(&cfg, &c).unwrap();
        prop_assert!(concurrency_residual([&lines[0], &lines[1], &lines[2]]) < 1e-9);
        prop_assert!(phi(&cfg, &c).unwrap().distance(&p) < 1e-8);

        let f = fiber_model(&cfg, &c).unwrap();
        let q = f.point_at(alpha);
        prop_assume!(q.min_modulus(&cfg) > 1e-3);
        let sys = fiber_system(&cfg, &c);
        let scale = q.to_real().iter().fold(1.0f64, |s, v| s.max(v.abs()));
        prop_assert!(sys.residual(&q) < 1e-9 * scale);
        let d = crit_det(&cfg, &q).unwrap() / scale.powi(4);
        prop_assert!(d.abs() < 1e-9, "D = {d}");
    }
}

#[test]
fn config_json_round_trips() {
    let cfg = PlaneConfig::new(Complex64::new(-0.7, 2.3), Complex64::new(1.1, -0.4));
    let back = PlaneConfig::from_json(&cfg.to_json()).unwrap();
    assert_eq!(back, cfg);
    let partial = PlaneConfig::from_json(r#"{"a": [1.6, 1.2], "k": [0.45, 0.85]}"#).unwrap();
    assert_eq!(partial, PlaneConfig::default());
    assert_abs_diff_eq!(partial.box_radius(), 6.0, epsilon = 1e-12);
    assert!(PlaneConfig::from_json(r#"{"a": [1.6]}"#).is_err());
}
