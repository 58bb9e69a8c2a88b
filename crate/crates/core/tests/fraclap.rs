use std::sync::Arc;

use fracblowup::fraclap::FracLapOperator;
use fracblowup::kernels::{frac_lap_constant, h1_profile, torsion_constant};
use fracblowup::mesh::{build_graded_mesh, Domain, GradedMesh, GridFunction};
use fracblowup::nonlinearity::NonlinearityModel;
use fracblowup::quad::{integrate, integrate_endpoint_singular, QuadOptions};
use fracblowup::Error;

fn q(f: impl FnMut(f64) -> f64, a: f64, b: f64) -> f64 {
    let opts = QuadOptions {
        rel_tol: 1e-11,
        abs_tol: 1e-300,
        max_intervals: 200_000,
    };
    match integrate(f, a, b, opts) {
        Ok(r) => r.value,
        Err(Error::Quadrature { value, .. }) => value,
        Err(e) => panic!("{e}"),
    }
}

/// `A ∫_0^∞ (2u(x) - u(x+t) - u(x-t)) t^{-1-2s} dt` for an even profile
/// `u(δ)` at `x = 1 - dx ≥ 0`, by direct quadrature.
fn pv_oracle<U: Fn(f64) -> f64>(u: &U, s: f64, dx: f64) -> f64 {
    let x = 1.0 - dx;
    let e = 1.0 + 2.0 * s;
    let (b1, b2) = (dx, 2.0 - dx);
    let dl = |t: f64| if t < x { dx + t } else { 2.0 - dx - t };
    let u0 = u(dx);
    let h = |t: f64| {
        let right = if t < b1 { u(dx - t) } else { 0.0 };
        let left = if t < b2 { u(dl(t)) } else { 0.0 };
        (2.0 * u0 - right - left) / t.powf(e)
    };
    let eps = 1e-3 * b1.min(1.0);
    let step = 1e-4 * b1.min(1.0);
    let upp = (u(dx + step) - 2.0 * u0 + u(dx - step)) / (step * step);
    let taylor = -upp * eps.powf(2.0 - 2.0 * s) / (2.0 - 2.0 * s);
    let m = 0.5 * (b1 + b2);
    let total = taylor
        + q(h, eps, 0.5 * b1)
        + integrate_endpoint_singular(|r| (2.0 * u0 - u(r) - u(dl(b1 - r))) / (b1 - r).powf(e), 0.5 * b1)
        + q(h, b1, m)
        + integrate_endpoint_singular(|r| (2.0 * u0 - u(r)) / (b2 - r).powf(e), b2 - m)
        + 2.0 * u0 * b2.powf(-2.0 * s) / (2.0 * s);
    frac_lap_constant(1, s) * total
}

fn mesh(n: usize, s: f64) -> Arc<GradedMesh> {
    Arc::new(build_graded_mesh(Domain::interval(), n, 2.0 / s).unwrap())
}

fn interior_half(m: &GradedMesh) -> Vec<usize> {
    (0..m.len()).filter(|&j| m.x[j].abs() <= 0.5).collect()
}

fn max_abs(v: &[f64], shift: f64) -> f64 {
    v.iter().map(|x| (x - shift).abs()).fold(0.0, f64::max)
}

#[test]
fn torsion_profile_maps_to_one() {
    let s = 0.5;
    let mut errs = vec![];
    for n in [64, 128, 256] {
        let m = mesh(n, s);
        let op = FracLapOperator::new(m.clone(), s).unwrap();
        let u = GridFunction::from_fn(m.clone(), s, |_, d| (d * (2.0 - d)).sqrt());
        errs.push(max_abs(&op.apply_nodes(&u, &interior_half(&m)).unwrap(), 1.0));
    }
    assert!(errs[1] < errs[0] && errs[2] < errs[1], "{errs:?}");
    assert!(errs[2] <= 0.02, "{errs:?}");
}

#[test]
fn torsion_constant_all_orders() {
    // (-Δ)^s (1-x²)^s = 1/γ_{1,s}.
    for s in [0.2, 0.4, 0.8] {
        let m = mesh(128, s);
        let op = FracLapOperator::new(m.clone(), s).unwrap();
        let u = GridFunction::from_fn(m.clone(), s, |_, d| (d * (2.0 - d)).powf(s));
        let want = 1.0 / torsion_constant(1, s);
        let got = op.apply_nodes(&u, &interior_half(&m)).unwrap();
        assert!(max_abs(&got, want) <= 1e-3 * want, "s={s}");
    }
}

#[test]
fn h1_is_s_harmonic() {
    for s in [0.5, 0.75] {
        let mut res = vec![];
        for n in [64, 128, 256] {
            let m = mesh(n, s);
            let op = FracLapOperator::new(m.clone(), s).unwrap();
            let u = GridFunction::from_fn(m.clone(), s, |_, d| h1_profile(s, d));
            res.push(max_abs(&op.apply_nodes(&u, &interior_half(&m)).unwrap(), 0.0));
        }
        assert!(res[1] < res[0] && res[2] < res[1], "s={s}: {res:?}");
        assert!(res[2] < 1e-3, "s={s}: {res:?}");
    }
}

#[test]
fn trace_part_contributes_nothing() {
    let s = 0.6;
    let m = mesh(64, s);
    let op = FracLapOperator::new(m.clone(), s).unwrap();
    let base = GridFunction::from_fn(m.clone(), s, |_, d| (d * (2.0 - d)).powf(s));
    let split = base.clone().with_trace(7.0);
    let nodes = m.admissible_indices();
    let a = op.apply_nodes(&base, &nodes).unwrap();
    let b = op.apply_nodes(&split, &nodes).unwrap();
    assert_eq!(a, b);
}

#[test]
fn pointwise_against_quadrature() {
    type Profile = Box<dyn Fn(f64) -> f64>;
    for s in [0.25, 0.5, 0.75] {
        let profiles: Vec<(&str, Profile)> = vec![
            ("h1", Box::new(move |d: f64| h1_profile(s, d))),
            ("square", Box::new(|d: f64| (d * (2.0 - d)).powi(2))),
            ("singular", Box::new(|d: f64| (d * (2.0 - d)).powf(-0.6))),
            ("oscillating", Box::new(|d: f64| (d * (2.0 - d)).powf(0.7) * (2.0 * (1.0 - d)).cos())),
        ];
        let m = mesh(256, s);
        let op = FracLapOperator::new(m.clone(), s).unwrap();
        let nodes: Vec<usize> = m.admissible_indices().into_iter().filter(|&j| m.x[j] >= 0.0).step_by(6).collect();
        for (name, u) in &profiles {
            let g = GridFunction::from_fn(m.clone(), s, |_, d| u(d));
            let got = op.apply_nodes(&g, &nodes).unwrap();
            for (&j, v) in nodes.iter().zip(got) {
                let d = m.delta[j];
                let o = pv_oracle(u, s, d);
                let scale = o.abs() + u(d).abs() * d.powf(-2.0 * s);
                let err = (v - o).abs() / scale;
                assert!(err < 3e-4, "{name} s={s} δ={d:e}: got {v:e}, oracle {o:e}, scaled error {err:e}");
            }
        }
    }
}

fn worst_scaled_error<U: Fn(f64) -> f64>(u: &U, s: f64, n: usize) -> f64 {
    let m = mesh(n, s);
    let op = FracLapOperator::new(m.clone(), s).unwrap();
    let g = GridFunction::from_fn(m.clone(), s, |_, d| u(d));
    let nodes: Vec<usize> = m.admissible_indices().into_iter().filter(|&j| m.x[j] >= 0.0).collect();
    let got = op.apply_nodes(&g, &nodes).unwrap();
    nodes
        .iter()
        .zip(got)
        .map(|(&j, v)| {
            let d = m.delta[j];
            let o = pv_oracle(u, s, d);
            (v - o).abs() / (o.abs() + u(d).abs() * d.powf(-2.0 * s))
        })
        .fold(0.0, f64::max)
}

#[test]
fn pointwise_error_converges() {
    let s = 0.75;
    let u = |d: f64| (d * (2.0 - d)).powf(0.7) * (2.0 * (1.0 - d)).cos();
    let e: Vec<f64> = [64, 128, 256].iter().map(|&n| worst_scaled_error(&u, s, n)).collect();
    // Observed order is about 1.7 in the node spacing.
    assert!(e[1] < 0.5 * e[0] && e[2] < 0.5 * e[1], "{e:?}");
}

#[test]
fn residual_adds_f() {
    let s = 0.5;
    let m = mesh(128, s);
    let op = FracLapOperator::new(m.clone(), s).unwrap();
    let u = GridFunction::from_fn(m.clone(), s, |_, d| (d * (2.0 - d)).sqrt());
    let nodes = interior_half(&m);
    let model = NonlinearityModel::power(2.0);
    let r = op.residual(&u, &model, &nodes).unwrap();
    for (&j, r) in nodes.iter().zip(r) {
        let want = 1.0 + u.total(j).powi(2);
        assert!((r - want).abs() < 1e-3, "node {j}");
    }
}

#[test]
fn supersolution_check_on_torsion() {
    // (-Δ)^s w = 1/γ > 0, so w is a supersolution for any f ≥ 0.
    let s = 0.5;
    let m = mesh(128, s);
    let op = FracLapOperator::new(m.clone(), s).unwrap();
    let w = GridFunction::from_fn(m.clone(), s, |_, d| (d * (2.0 - d)).sqrt());
    let rep = op.supersolution_inequality_check(&w, &NonlinearityModel::power(3.0), 0.2).unwrap();
    assert!(rep.passes(0.0));
    assert!(rep.violations(0.0).is_empty());
    assert_eq!(rep.strip_constant, 0.0);
    assert_eq!(rep.nodes_checked, m.admissible_indices().len());
    assert!(rep.strip_nodes > 0 && rep.strip_nodes < rep.nodes_checked);
    // -w has negative fractional Laplacian everywhere.
    let neg = GridFunction::from_fn(m.clone(), s, |_, d| -(d * (2.0 - d)).sqrt());
    let rep = op.supersolution_inequality_check(&neg, &NonlinearityModel::power(3.0), 0.2).unwrap();
    assert!(!rep.passes(1e-3));
    assert_eq!(rep.violations(1e-3).len(), rep.nodes_checked);
}

#[test]
fn refusals() {
    let ball = Arc::new(build_graded_mesh(Domain::ball(3).unwrap(), 32, 2.0).unwrap());
    assert!(FracLapOperator::new(ball, 0.5).is_err());
    let m = mesh(64, 0.5);
    assert!(FracLapOperator::new(m.clone(), 1.2).is_err());
    let op = FracLapOperator::new(m.clone(), 0.5).unwrap();
    let steep = GridFunction::from_fn(m.clone(), 0.5, |_, d| d.powf(-1.2));
    let j = m.len() / 2;
    assert!(matches!(op.apply(&steep, j), Err(Error::Integrability { .. })));
    let other = mesh(64, 0.4);
    let u = GridFunction::from_fn(other, 0.5, |_, _| 1.0);
    assert!(op.apply(&u, j).is_err());
}
