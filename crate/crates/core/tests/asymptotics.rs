use std::sync::Arc;

use approx::assert_relative_eq;
use fracblowup::asymptotics::{
    bbehav_check, boundary_exponent, power_fit, singular_trace, trace_escapes, window_nodes, Window,
    EXCLUDED_BOUNDARY_NODES,
};
use fracblowup::kernels::h1_profile;
use fracblowup::ko::KOProfile;
use fracblowup::mesh::{build_graded_mesh, Domain, GradedMesh, GridFunction};
use fracblowup::nonlinearity::NonlinearityModel;
use fracblowup::Error;

fn mesh(n: usize, q: f64) -> Arc<GradedMesh> {
    Arc::new(build_graded_mesh(Domain::interval(), n, q).unwrap())
}

#[test]
fn window_selection() {
    let m = mesh(256, 4.0);
    let w = Window::default_for(&m);
    assert_relative_eq!(w.lo, 4.0 * m.min_delta());
    let nodes = window_nodes(&m, w).unwrap();
    assert!(nodes.iter().all(|&j| m.x[j] > 0.0 && m.delta[j] >= w.lo && m.delta[j] <= w.hi));
    assert!(nodes.windows(2).all(|p| m.delta[p[0]] < m.delta[p[1]]));
    // The outermost nodes are skipped even when inside the window.
    let mut right: Vec<f64> = (0..m.len()).filter(|&j| m.x[j] > 0.0).map(|j| m.delta[j]).collect();
    right.sort_by(f64::total_cmp);
    assert!(m.delta[nodes[0]] >= right[EXCLUDED_BOUNDARY_NODES]);
    let tiny = Window { lo: 0.5, hi: 0.51 };
    assert!(matches!(window_nodes(&m, tiny), Err(Error::InsufficientData { .. })));
}

#[test]
fn exact_power_recovered() {
    let m = mesh(256, 4.0);
    let u = GridFunction::from_fn(m.clone(), 0.5, |_, d| 3.0 * d.powf(-0.66));
    let fit = boundary_exponent(&u).unwrap();
    assert_relative_eq!(fit.exponent, -0.66, epsilon = 1e-12);
    assert_relative_eq!(fit.coefficient, 3.0, max_relative = 1e-10);
    assert!(fit.r_squared > 1.0 - 1e-12);
    assert!(fit.exponent_stderr < 1e-10);
    let neg = GridFunction::from_fn(m.clone(), 0.5, |_, d| -d);
    assert!(matches!(power_fit(&m, &neg.values, Window::default_for(&m)), Err(Error::Fit(_))));
}

#[test]
fn finite_trace_recovered() {
    let s = 0.4;
    let m = mesh(256, 2.0 / s);
    // k h₁ plus a bounded remainder.
    let u = GridFunction::from_fn(m.clone(), s, |x, _| 1.0 - x * x).with_trace(2.5);
    let t = singular_trace(&u).unwrap();
    assert!(!t.infinite);
    assert!(t.windows.len() >= 3);
    assert_relative_eq!(t.value, 2.5, max_relative = 1e-4);
}

#[test]
fn infinite_trace_flagged() {
    let s = 0.5;
    let m = mesh(256, 4.0);
    let u = GridFunction::from_fn(m.clone(), s, |_, d| d.powf(-2.0 / 3.0));
    let t = singular_trace(&u).unwrap();
    assert!(t.infinite, "{:?}", t.windows);
    assert!(t.windows.windows(2).all(|w| w[1].estimate > w[0].estimate));
}

#[test]
fn trace_escape_rule() {
    let ks = [1.0, 2.0, 4.0];
    assert!(trace_escapes(&ks, &[5.0, 20.0, 41.0]));
    assert!(!trace_escapes(&ks, &[5.0, 20.0, 39.0]));
    assert!(!trace_escapes(&ks, &[50.0, 20.0, 41.0]));
    assert!(!trace_escapes(&ks[..1], &[41.0]));
    assert!(!trace_escapes(&[], &[]));
}

#[test]
fn bbehav_of_exact_profile() {
    let s = 0.5;
    let model = NonlinearityModel::power(2.5);
    let prof = KOProfile::new(&model, s).unwrap();
    let m = mesh(256, 4.0);
    let u = GridFunction::from_fn(m.clone(), s, |_, d| prof.psi(d.powf(s)).unwrap());
    let r = bbehav_check(&u, &prof, 0.2).unwrap();
    assert!(r.pass);
    assert_relative_eq!(r.min_ratio, 1.0, max_relative = 1e-7);
    assert_relative_eq!(r.max_ratio, 1.0, max_relative = 1e-7);
    assert_relative_eq!(r.limit, 1.0, max_relative = 1e-7);
    assert_relative_eq!(r.fit.exponent, s, epsilon = 1e-7);
    assert_eq!(r.windows.len(), 3);
    assert!(r.windows[1].window.hi < r.windows[0].window.hi);
}

#[test]
fn bbehav_fails_for_scaled_profile() {
    // φ(c u) = c^{(1-p)/2} φ(u) for t^p, so 10 ψ(δ^s) has ratio 10^{-3/4} < 0.2.
    let s = 0.5;
    let prof = KOProfile::new(&NonlinearityModel::power(2.5), s).unwrap();
    let m = mesh(256, 4.0);
    let u = GridFunction::from_fn(m.clone(), s, |_, d| 10.0 * prof.psi(d.powf(s)).unwrap());
    let r = bbehav_check(&u, &prof, 0.2).unwrap();
    assert!(!r.pass);
    assert_relative_eq!(r.min_ratio, 10f64.powf(-0.75), max_relative = 1e-7);
    // h₁ blows up more slowly than ψ(δ^s), so its ratio grows towards the boundary.
    let h = GridFunction::from_fn(m.clone(), s, |_, d| h1_profile(s, d));
    let r = bbehav_check(&h, &prof, 0.2).unwrap();
    assert!(r.windows[2].min_ratio >= r.windows[0].min_ratio);
}
