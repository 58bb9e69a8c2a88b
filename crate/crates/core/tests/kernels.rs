use std::f64::consts::PI;
use std::sync::Arc;

use approx::assert_relative_eq;
use fracblowup::kernels::{
    boundary_exponent_fit, check_integrability, exterior_l1_norm, frac_lap_constant, green_apply, green_constant,
    h1_mass, poisson_apply, volume_weights, GreenOperator, KernelSet, Pt,
};
use fracblowup::mesh::{build_graded_mesh, Domain, DomainKind, ExteriorData, GridFunction};
use fracblowup::quad::{integrate, integrate_endpoint_singular, QuadOptions};
use fracblowup::Error;
use statrs::function::gamma::gamma;

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

// κ |x-y|^{2s-N} ∫_0^{r0} t^{s-1} (1+t)^{-N/2} dt with t = w^{1/s}.
fn green_oracle(dim: usize, s: f64, ax: f64, ay: f64, dist: f64) -> f64 {
    let n = dim as f64;
    let kappa = gamma(n / 2.0) / (4f64.powf(s) * PI.powf(n / 2.0) * gamma(s).powi(2));
    let r0 = ax * ay / (dist * dist);
    let top = r0.powf(s);
    let inner = q(|w| (1.0 + w.powf(1.0 / s)).powf(-n / 2.0), 0.0, top) / s;
    kappa * dist.powf(2.0 * s - n) * inner
}

#[test]
fn constants() {
    assert_relative_eq!(frac_lap_constant(1, 0.5), 1.0 / PI, max_relative = 1e-14);
    assert_relative_eq!(green_constant(1, 0.5), 0.5 / PI, max_relative = 1e-14);
    // γ_{1,1/2} = Γ(1/2)/(2 Γ(1) Γ(3/2)) = 1.
    let ks = KernelSet::new(1, 0.5).unwrap();
    assert_relative_eq!(ks.torsion_gamma, 1.0, max_relative = 1e-14);
    assert_relative_eq!(ks.h1_norm, 2f64.sqrt(), max_relative = 1e-15);
    assert!(KernelSet::new(1, 1.0).is_err());
    assert!(KernelSet::new(0, 0.5).is_err());
}

#[test]
fn green_pointwise_oracle() {
    for (dim, s) in [(1, 0.25), (1, 0.5), (1, 0.75), (2, 0.3), (3, 0.5), (3, 0.8)] {
        let ks = KernelSet::new(dim, s).unwrap();
        for (ax, ay, dist) in [(0.5, 0.7, 0.3), (1.0, 0.02, 0.99), (1e-6, 0.3, 0.8), (0.9, 0.9, 1e-3)] {
            let want = green_oracle(dim, s, ax, ay, dist);
            assert_relative_eq!(ks.green_core(ax, ay, dist), want, max_relative = 1e-9);
        }
    }
}

#[test]
fn green_symmetric_and_positive() {
    let ks = KernelSet::new(3, 0.4).unwrap();
    let pts = [[0.1, 0.2, -0.3], [0.5, -0.5, 0.1], [-0.9, 0.0, 0.2], [0.0, 0.0, 0.0]];
    for a in &pts {
        for b in &pts {
            if a == b {
                assert!(ks.green(a, b).is_err());
                continue;
            }
            let g = ks.green(a, b).unwrap();
            assert!(g > 0.0);
            assert_relative_eq!(g, ks.green(b, a).unwrap(), max_relative = 1e-13);
        }
    }
    assert!(ks.green(&[1.1, 0.0, 0.0], &[0.0; 3]).is_err());
    assert!(ks.green(&[0.1, 0.0], &[0.0; 3]).is_err());
}

#[test]
fn poisson_kernel_has_unit_mass() {
    let ones = ExteriorData::table(vec![1e-3, 1.0], vec![1.0, 1.0], true).unwrap();
    for (dim, s, kind) in [(1, 0.5, DomainKind::Interval), (1, 0.3, DomainKind::Interval), (3, 0.6, DomainKind::RadialBall)] {
        let ks = KernelSet::new(dim, s).unwrap();
        for x in [Pt::new(0.2, 0.8), Pt::new(0.9, 0.1), Pt::new(0.999, 1e-3)] {
            let v = poisson_apply(&ks, kind, &ones, x).unwrap();
            assert_relative_eq!(v, 1.0, max_relative = 1e-6);
        }
    }
}

#[test]
fn poisson_point_values() {
    let ks = KernelSet::new(1, 0.5).unwrap();
    let p = ks.poisson(&[0.0], &[2.0]).unwrap();
    // (1/π) (1/3)^{1/2} / 2
    assert_relative_eq!(p, 1.0 / (PI * 3f64.sqrt() * 2.0), max_relative = 1e-14);
    assert!(ks.poisson(&[0.0], &[0.5]).is_err());
}

#[test]
fn poisson_of_shell_against_direct_integral() {
    let ks = KernelSet::new(1, 0.4).unwrap();
    let g = ExteriorData::Shell {
        r_in: 1.2,
        r_out: 2.5,
        value: 3.0,
    };
    for x in [-0.7, 0.0, 0.3, 0.95] {
        let ax = 1.0 - x * x;
        let dens = |y: f64| ks.poisson_c * (ax / (y * y - 1.0)).powf(0.4) / (y - x).abs();
        let want = 3.0 * (q(dens, 1.2, 2.5) + q(dens, -2.5, -1.2));
        let got = poisson_apply(&ks, DomainKind::Interval, &g, Pt::from_x(x)).unwrap();
        assert_relative_eq!(got, want, max_relative = 1e-8);
    }
}

#[test]
fn exterior_l1() {
    let g = ExteriorData::Shell {
        r_in: 1.5,
        r_out: 2.0,
        value: 2.0,
    };
    assert_relative_eq!(exterior_l1_norm(&g, 1).unwrap(), 2.0, max_relative = 1e-10);
    // 4π ∫_{1.5}^{2} 2 r² dr
    let want = 4.0 * PI * 2.0 * (8.0 - 3.375) / 3.0;
    assert_relative_eq!(exterior_l1_norm(&g, 3).unwrap(), want, max_relative = 1e-10);
    let heavy = ExteriorData::table(vec![1.0, 2.0], vec![1.0, 0.5f64.powf(0.5)], true).unwrap();
    assert!(matches!(exterior_l1_norm(&heavy, 1), Err(Error::DataInadmissible(_))));
}

#[test]
fn radial_kernel_integrates_to_torsion() {
    // ∫_0^1 K(r, ρ) dρ = γ (1 - r²)^s, computed with adaptive quadrature
    // split at ρ = r.
    for (dim, s) in [(3, 0.5), (2, 0.7)] {
        let ks = KernelSet::new(dim, s).unwrap();
        for r in [0.3, 0.8] {
            let x = Pt::from_x(r);
            let k = |rho: f64, diff: f64| ks.radial_green(x, Pt::from_x(rho), diff);
            let left = integrate_endpoint_singular(|t| k(r - t, t), r);
            let right = integrate_endpoint_singular(|t| k(r + t, t), 0.5 * (1.0 - r))
                + integrate_endpoint_singular(|t| k(1.0 - t, 1.0 - t - r), 0.5 * (1.0 - r));
            assert_relative_eq!(left + right, ks.torsion_at(1.0 - r), max_relative = 1e-6);
        }
    }
}

fn torsion_case(dim: usize, s: f64, n: usize) -> f64 {
    let ks = KernelSet::new(dim, s).unwrap();
    let mesh = Arc::new(build_graded_mesh(Domain::for_dim(dim).unwrap(), n, 2.0).unwrap());
    let ones = GridFunction::from_fn(mesh.clone(), s, |_, _| 1.0);
    let w = green_apply(&ks, &ones).unwrap();
    let nodes: Vec<usize> = match mesh.domain.kind {
        DomainKind::Interval => (1..=10).map(|i| n / 2 + i * (n / 2 - 2) / 11).collect(),
        DomainKind::RadialBall => (1..=10).map(|i| i * (n - 2) / 11).collect(),
    };
    nodes
        .iter()
        .map(|&j| (w[j] / ks.torsion_at(mesh.delta[j]) - 1.0).abs())
        .fold(0.0, f64::max)
}

#[test]
fn torsion_consistency() {
    for (dim, s) in [(1, 0.5), (1, 0.75), (3, 0.5), (1, 0.2)] {
        let err = torsion_case(dim, s, 128);
        assert!(err <= 1e-3, "N={dim} s={s}: {err:e}");
    }
}

#[test]
fn green_operator_entries_nonnegative() {
    let ks = KernelSet::new(1, 0.6).unwrap();
    let mesh = Arc::new(build_graded_mesh(Domain::interval(), 48, 2.0).unwrap());
    let op = GreenOperator::assemble(&ks, mesh, -0.9).unwrap();
    assert!(op.matrix.iter().all(|&w| w >= 0.0));
}

fn power_source_oracle(ks: &KernelSet, beta: f64, dx: f64) -> f64 {
    let x = 1.0 - dx;
    let ax = dx * (2.0 - dx);
    let g = |d: f64, dist: f64| ks.green_core(ax, d * (2.0 - d), dist) * d.powf(beta);
    let left = q(|u| g(u.exp(), x + 1.0 - u.exp()) * u.exp(), -80.0, 0.0);
    // Distances are passed as the integration variable where y nears x.
    let r1 = q(|u| g(u.exp(), dx - u.exp()) * u.exp(), -80.0, (0.5 * dx).ln());
    let r2 = q(|t| g(dx - t, t), 0.0, 0.5 * dx);
    let r3 = q(|t| g(dx + t, t), 0.0, 1.0 - dx);
    left + r1 + r2 + r3
}

#[test]
fn green_operator_power_source() {
    for (s, beta, n) in [(0.75, -0.6, 128), (0.5, -1.25, 128), (0.3, 0.4, 128), (0.75, -1.5, 128)] {
        let ks = KernelSet::new(1, s).unwrap();
        let mesh = Arc::new(build_graded_mesh(Domain::interval(), n, 2.0).unwrap());
        let v: Vec<f64> = mesh.delta.iter().map(|d| d.powf(beta)).collect();
        let gamma = boundary_exponent_fit(&mesh, &v);
        assert_relative_eq!(gamma, beta, epsilon = 1e-12);
        let op = GreenOperator::assemble(&ks, mesh.clone(), gamma).unwrap();
        let w = op.apply(&v);
        for j in [n / 2, n / 2 + n / 8, n - n / 8, n - 4, n - 1] {
            let want = power_source_oracle(&ks, beta, mesh.delta[j]);
            assert_relative_eq!(w[j], want, max_relative = 1e-5);
        }
    }
}

#[test]
fn integrability_refusal() {
    assert!(check_integrability(0.5, -1.4).is_ok());
    assert!(matches!(check_integrability(0.5, -1.49), Err(Error::Integrability { .. })));
    let ks = KernelSet::new(1, 0.5).unwrap();
    let mesh = Arc::new(build_graded_mesh(Domain::interval(), 32, 2.0).unwrap());
    assert!(GreenOperator::assemble(&ks, mesh, -1.6).is_err());
}

#[test]
fn volume_weights_integrate_profiles() {
    for dim in [1usize, 3] {
        let s = 0.4;
        let mesh = build_graded_mesh(Domain::for_dim(dim).unwrap(), 200, 2.0).unwrap();
        let w = volume_weights(&mesh, s - 1.0);
        let h: Vec<f64> = mesh.delta.iter().map(|&d| fracblowup::kernels::h1_profile(s, d)).collect();
        let got: f64 = w.iter().zip(&h).map(|(a, b)| a * b).sum();
        assert_relative_eq!(got, h1_mass(dim, s), max_relative = 1e-4);
    }
    // ∫_{-1}^{1} (1-x²)^{s-1} dx = B(1/2, s).
    let s = 0.4;
    let want = 2f64.powf(1.0 - s) * statrs::function::beta::beta(0.5, s);
    assert_relative_eq!(h1_mass(1, s), want, max_relative = 1e-12);
}
