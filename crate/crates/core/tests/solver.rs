use fracblowup::kernels::h1_profile;
use fracblowup::mesh::ExteriorData;
use fracblowup::nonlinearity::NonlinearityModel;
use fracblowup::solver::{
    build_supersolution, classify_sweep, g2_min_ratio, l1_norm, psi_exterior_data, solve_g_problem, solve_k_problem,
    sweep_k, ProblemData, Regime, SolveConfig, Solver, SweepEntry, SweepThresholds, SUPERSOLUTION_TOL,
};
use fracblowup::Error;

fn trace_cfg(s: f64, dim: usize, p: f64, k: f64, n: usize) -> SolveConfig {
    SolveConfig::new(s, dim, NonlinearityModel::power(p), ProblemData::Trace(k)).with_mesh(n, None)
}

fn entry(k: f64, l1: f64, strip_min: f64, interior_max: f64) -> SweepEntry {
    SweepEntry {
        k,
        converged: true,
        iterations: 10,
        l1_norm: l1,
        strip_min,
        interior_max,
        max_iterate_increase: 0.0,
        above_kh1: 0.0,
        fixed_point_residual: 0.0,
        residual_max_relative: None,
    }
}

#[test]
fn zero_trace_gives_zero() {
    let r = solve_k_problem(&trace_cfg(0.5, 1, 2.5, 0.0, 64)).unwrap();
    assert!(r.converged);
    assert!(r.totals().iter().all(|&v| v == 0.0));
}

#[test]
fn k_solution_properties() {
    let k = 4.0;
    let r = solve_k_problem(&trace_cfg(0.5, 1, 2.5, k, 128)).unwrap();
    assert!(r.converged && r.iterations < 50);
    assert!(r.fixed_point_residual < 1e-9);
    assert!(r.max_iterate_increase <= 1e-8);
    let u = r.totals();
    let mesh = &r.solution.mesh;
    for j in 0..u.len() {
        let kh = k * h1_profile(0.5, mesh.delta[j]);
        assert!(u[j] > 0.0 && u[j] <= kh + 1e-8, "node {j}");
    }
    // The pointwise operator is independent of the Green quadrature.
    let res = r.residual_summary.clone().unwrap();
    assert!(res.max_relative < 0.02, "{res:?}");
    // δ^{1-s} u climbs towards k, slowly: the remainder is only O(δ^{1/4}) smaller.
    let n = u.len();
    let t: Vec<f64> = (n - 8..n).map(|j| u[j] * mesh.delta[j].powf(0.5)).collect();
    assert!(t.windows(2).all(|w| w[1] > w[0]), "{t:?}");
    assert!(t[7] <= k && t[7] > 0.75 * k, "{t:?}");
    assert!((r.l1_norm - l1_norm(&r.solution)).abs() < 1e-12 * r.l1_norm);
}

#[test]
fn solutions_increase_with_k() {
    let solver = Solver::new(trace_cfg(0.75, 1, 4.0, 1.0, 96)).unwrap();
    let mut prev: Option<Vec<f64>> = None;
    for k in [0.5, 1.0, 2.0, 4.0] {
        let u = solver.solve_k(k).unwrap().totals();
        if let Some(p) = prev {
            assert!(u.iter().zip(&p).all(|(a, b)| a >= &(b - 1e-8)), "k = {k}");
        }
        prev = Some(u);
    }
}

#[test]
fn ball_solution_below_trace_profile() {
    let k = 4.0;
    let r = solve_k_problem(&trace_cfg(0.5, 3, 2.5, k, 48)).unwrap();
    assert!(r.converged);
    assert!(r.residual_summary.is_none());
    let mesh = &r.solution.mesh;
    for (j, u) in r.totals().iter().enumerate() {
        assert!(*u > 0.0 && *u <= k * h1_profile(0.5, mesh.delta[j]) + 1e-8);
    }
    // Radial profile decreasing towards the centre.
    let u = r.totals();
    assert!(u.windows(2).all(|w| w[1] >= w[0] - 1e-8));
}

#[test]
fn supercritical_power_refused() {
    let r = solve_k_problem(&trace_cfg(0.5, 1, 3.5, 1.0, 64));
    assert!(matches!(r, Err(Error::Integrability { .. })), "{r:?}");
}

#[test]
fn exterior_shell_problem() {
    let g = ExteriorData::Shell {
        r_in: 1.2,
        r_out: 2.0,
        value: 5.0,
    };
    let cfg = SolveConfig::new(
        0.5,
        1,
        NonlinearityModel::power(2.5),
        ProblemData::Exterior {
            g,
            ladder: vec![1.0, 2.0, 4.0, 8.0],
        },
    )
    .with_mesh(128, None);
    let r = solve_g_problem(&cfg).unwrap();
    assert!(r.converged);
    assert!(r.totals().iter().all(|&v| v > 0.0));
    assert_eq!(r.ladder.len(), 4);
    assert!(r.ladder.windows(2).all(|w| w[1].1 >= w[0].1));
    assert!(r.residual_summary.as_ref().unwrap().max_relative < 0.02);
    // Data vanish near the boundary, so u is bounded there.
    assert!(r.totals().iter().all(|&v| v < 5.0));
}

#[test]
fn exterior_data_must_be_integrable() {
    let heavy = ExteriorData::table(vec![1.0, 2.0], vec![1.0, 0.5f64.sqrt()], true).unwrap();
    let cfg = SolveConfig::new(
        0.5,
        1,
        NonlinearityModel::power(2.5),
        ProblemData::Exterior {
            g: heavy,
            ladder: vec![1.0, 2.0],
        },
    )
    .with_mesh(64, None);
    assert!(matches!(solve_g_problem(&cfg), Err(Error::DataInadmissible(_))));
}

#[test]
fn psi_data_ratio() {
    let model = NonlinearityModel::power(2.5);
    let g = psi_exterior_data(&model, 0.5, 2.0).unwrap();
    let r = g2_min_ratio(&model, 0.5, &g).unwrap().unwrap();
    assert!((r - 1.0).abs() < 1e-6, "{r}");
    assert!(g2_min_ratio(&model, 0.5, &ExteriorData::Zero).unwrap().is_none());
    assert!(psi_exterior_data(&model, 0.5, 0.9).is_err());
}

#[test]
fn config_validation() {
    let mut c = trace_cfg(0.5, 1, 2.5, 1.0, 64);
    c.damping = 0.0;
    assert!(Solver::new(c).is_err());
    let c = trace_cfg(0.5, 1, 2.5, -1.0, 64);
    assert!(c.validate().is_err());
    let c = SolveConfig::new(
        0.5,
        1,
        NonlinearityModel::power(2.5),
        ProblemData::Exterior {
            g: ExteriorData::Zero,
            ladder: vec![2.0, 1.0],
        },
    );
    assert!(c.validate().is_err());
    assert!(solve_g_problem(&trace_cfg(0.5, 1, 2.5, 1.0, 64)).is_err());
    assert!(Solver::new(trace_cfg(0.5, 1, 2.5, 1.0, 8)).is_err());
}

#[test]
fn supersolution_dominates_solutions() {
    let cfg = trace_cfg(0.5, 1, 2.5, 1.0, 128);
    let sp = build_supersolution(&cfg).unwrap();
    assert!(sp.mu >= 1.0 && sp.lambda > 0.0);
    assert!(sp.check.passes(SUPERSOLUTION_TOL));
    let solver = Solver::new(cfg).unwrap();
    let ubar = sp.ubar.totals();
    for k in [1.0, 8.0, 32.0] {
        let u = solver.solve_k(k).unwrap().totals();
        let worst = u.iter().zip(&ubar).map(|(a, b)| a - b).fold(f64::NEG_INFINITY, f64::max);
        assert!(worst <= 1e-8, "k = {k}: {worst}");
    }
}

#[test]
fn supersolution_needs_l1_condition() {
    let cfg = trace_cfg(0.5, 1, 1.5, 1.0, 64);
    assert!(build_supersolution(&cfg).is_err());
    let cfg = trace_cfg(0.5, 3, 2.5, 1.0, 64);
    assert!(build_supersolution(&cfg).is_err());
}

#[test]
fn classify_rules() {
    let th = SweepThresholds::default();
    // Strip minimum growing linearly in k.
    let lin: Vec<SweepEntry> = [1.0, 2.0, 4.0, 8.0]
        .iter()
        .map(|&k| entry(k, 2.0 * k, 0.5 * k, k))
        .collect();
    assert_eq!(classify_sweep(&lin, &th), Regime::UniformBlowup);
    // Growing mass, strip minimum bending down.
    let l1: Vec<SweepEntry> = [1.0, 2.0, 4.0, 8.0]
        .iter()
        .map(|&k| entry(k, k.powf(0.9), k.powf(0.7), k.powf(0.5)))
        .collect();
    assert_eq!(classify_sweep(&l1, &th), Regime::L1Escape);
    let stab: Vec<SweepEntry> = [1.0, 2.0, 4.0, 8.0]
        .iter()
        .map(|&k| entry(k, 3.0 - 1.0 / k, 10.0 - 1.0 / k, 2.0 - 0.01 / k))
        .collect();
    assert_eq!(classify_sweep(&stab, &th), Regime::Stabilizing);
    let neither: Vec<SweepEntry> = [1.0, 2.0, 4.0]
        .iter()
        .map(|&k| entry(k, 1.0 + 0.1 * k, 1.0, k.sqrt()))
        .collect();
    assert_eq!(classify_sweep(&neither, &th), Regime::Unclassified);
    assert_eq!(classify_sweep(&lin[..1], &th), Regime::Unclassified);
}

#[test]
fn sweep_small_mesh() {
    let cfg = trace_cfg(0.5, 1, 1.2, 1.0, 96);
    let sw = sweep_k(&cfg, &[1.0, 2.0, 4.0, 8.0]).unwrap();
    assert_eq!(sw.regime_observed, Regime::L1Escape);
    assert_eq!(sw.agree(), Some(true));
    assert!(sw.k_monotonicity_violation <= 1e-8);
    assert!(sw.l1_ratios.iter().all(|&r| r >= 1.5));
    let refused = sweep_k(&trace_cfg(0.5, 1, 3.5, 1.0, 64), &[1.0, 2.0]).unwrap();
    assert_eq!(refused.regime_observed, Regime::Refusal);
    assert!(refused.refusal.is_some());
    assert!(sweep_k(&cfg, &[2.0, 1.0]).is_err());
}
