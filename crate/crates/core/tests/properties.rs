use std::sync::Arc;

use fracblowup::config::Params;
use fracblowup::kernels::{h1_profile, KernelSet};
use fracblowup::ko::{check_l1, KOProfile, Verdict, BORDERLINE_BAND};
use fracblowup::mesh::{build_graded_mesh, distance, Domain, ExteriorData, GridFunction};
use fracblowup::nonlinearity::{check_monotone_scaling, default_envelope, LogGrid, NonlinearityModel};
use fracblowup::special::inc_beta;
use proptest::prelude::*;

fn ball_point(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-0.57f64..0.57, dim)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn green_symmetric(s in 0.05f64..0.95, x in ball_point(3), y in ball_point(3)) {
        let ks = KernelSet::new(3, s).unwrap();
        prop_assume!(x.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum::<f64>() > 1e-6);
        let a = ks.green(&x, &y).unwrap();
        let b = ks.green(&y, &x).unwrap();
        prop_assert!(a > 0.0);
        prop_assert!((a - b).abs() <= 1e-12 * a);
    }

    #[test]
    fn green_decreases_with_distance(s in 0.05f64..0.95, x in -0.5f64..0.5, h in 0.01f64..0.2) {
        // Along a ray from x towards the nearer boundary point G(x, ·) decreases.
        let ks = KernelSet::new(1, s).unwrap();
        let dir = if x >= 0.0 { 1.0 } else { -1.0 };
        let near = ks.green(&[x], &[x + dir * h]).unwrap();
        let far = ks.green(&[x], &[x + dir * (h + 0.2)]).unwrap();
        prop_assert!(far < near);
    }

    #[test]
    fn inc_beta_matches_regularized(z in 0.001f64..0.999, a in 0.1f64..2.0, b in 0.1f64..2.0) {
        let want = statrs::function::beta::beta_reg(a, b, z) * statrs::function::beta::beta(a, b);
        let got = inc_beta(z, a, b);
        prop_assert!((got - want).abs() <= 1e-10 * want, "{} vs {}", got, want);
    }

    #[test]
    fn phi_psi_round_trip(p in 1.3f64..6.0, v in -3.0f64..3.0) {
        let prof = KOProfile::new(&NonlinearityModel::power(p), 0.5).unwrap();
        let v = 10f64.powf(v);
        let u = prof.psi(v).unwrap();
        prop_assert!((prof.phi(u).unwrap() - v).abs() <= 1e-8 * v);
    }

    #[test]
    fn phi_decreasing(p in 1.3f64..5.0, alpha in -2.0f64..2.0, u in -2.0f64..3.0, r in 1.01f64..10.0) {
        let prof = KOProfile::new(&NonlinearityModel::power_log(p + 0.5, alpha), 0.5);
        prop_assume!(prof.is_ok());
        let prof = prof.unwrap();
        let u = 10f64.powf(u);
        prop_assert!(prof.phi(r * u).unwrap() < prof.phi(u).unwrap());
    }

    #[test]
    fn power_scaling_exact(p in 1.1f64..6.0, c in 1.0f64..100.0) {
        let m = NonlinearityModel::power(p);
        let env = default_envelope(&m).unwrap();
        let grid = LogGrid::new(1e-3, 1e3, 32).unwrap().points();
        let r = check_monotone_scaling(&m, &env, c, &grid).unwrap();
        prop_assert!(r.max_violation <= 1e-9);
    }

    #[test]
    fn l1_threshold(s in 0.1f64..0.9, p in 1.05f64..7.0) {
        let crit = 1.0 + 2.0 * s;
        // Band on the exponent (1-p)/(2s) + 1 converts to a band on p.
        prop_assume!(((1.0 - p) / (2.0 * s) + 1.0).abs() > 2.0 * BORDERLINE_BAND);
        let r = check_l1(&NonlinearityModel::power(p), s).unwrap();
        let want = if p > crit { Verdict::Converges } else { Verdict::Diverges };
        prop_assert_eq!(r.verdict, want);
    }

    #[test]
    fn mesh_distances_consistent(n in 16usize..400, q in 1.0f64..6.0) {
        let m = build_graded_mesh(Domain::interval(), n, q).unwrap();
        prop_assert!(m.x.windows(2).all(|w| w[1] > w[0]));
        for j in 0..n {
            prop_assert!(m.delta[j] > 0.0 && m.delta[j] <= 1.0);
            prop_assert!((m.delta[j] - distance(m.x[j])).abs() <= 1e-15 + 1e-12 * m.delta[j].max(1e-4));
        }
    }

    #[test]
    fn h1_normalized(s in 0.05f64..0.95, d in 1e-12f64..1.0) {
        // δ^{1-s} h₁ = (2/(2-δ))^{1-s} lies between 1 and 2^{1-s}.
        let v = d.powf(1.0 - s) * h1_profile(s, d);
        prop_assert!(v >= 1.0 - 1e-12 && v <= 2f64.powf(1.0 - s) + 1e-12);
    }

    #[test]
    fn truncation_bounded(cap in 0.0f64..10.0, d in 1e-6f64..3.0, e in -0.9f64..0.5) {
        let g = ExteriorData::Power { coeff: 2.0, exponent: e, r_out: 3.0 };
        let t = g.truncated(cap);
        prop_assert!(t.value(d) <= cap);
        prop_assert!(t.value(d) <= g.value(d));
        prop_assert!(g.truncated(cap + 1.0).value(d) >= t.value(d));
    }

    #[test]
    fn csv_round_trip(vals in prop::collection::vec(-1e6f64..1e6, 16..64), s in 0.05f64..0.95) {
        let n = vals.len();
        let mesh = Arc::new(build_graded_mesh(Domain::interval(), n, 2.0).unwrap());
        let u = GridFunction::new(mesh, s, vals.clone()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("u.csv");
        u.save_csv(&path).unwrap();
        let v = GridFunction::load_csv(&path).unwrap();
        prop_assert_eq!(v.values, vals);
        prop_assert_eq!(v.s, s);
    }

    #[test]
    fn config_hash_stable(s in 0.05f64..0.95, p in 0.5f64..6.0, n in 16usize..1024) {
        let params = Params { s: Some(s), p: Some(p), mesh_n: Some(n), ..Params::default() };
        let a = params.resolve().unwrap();
        let b = params.clone().resolve().unwrap();
        prop_assert_eq!(a.hash(), b.hash());
        let mut c = a.clone();
        c.tol *= 2.0;
        prop_assert_ne!(a.hash(), c.hash());
    }
}
