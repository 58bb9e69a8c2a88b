//! Command implementations behind the CLI: JSON/CSV emission, verdict
//! bundles and the replication scenarios.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::asymptotics::{bbehav_check, boundary_exponent, singular_trace, trace_escapes, BbehavReport};
use crate::config::{config_hash, Params, Resolved, DEFAULT_K_LIST};
use crate::error::{Error, Result};
use crate::fraclap::FracLapOperator;
use crate::kernels::{h1_mass, sphere_area, KernelSet};
use crate::ko::{
    check_e, check_l1, check_u_integrability, classify_power_regime, verify_ratio_bounds, ConditionReport, KOProfile,
    Verdict, BORDERLINE_BAND,
};
use crate::mesh::GridFunction;
use crate::nonlinearity::{LogGrid, NonlinearityModel};
use crate::solver::{
    build_supersolution, solve_g_problem, solve_k_problem, sweep_k, ProblemData, SolveConfig, SolveResult,
    SupersolutionSpec, SweepResult, SUPERSOLUTION_TOL,
};

/// Overall outcome of a command, mapped to the process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Inconclusive,
}

impl Status {
    pub fn exit_code(self) -> u8 {
        match self {
            Status::Pass => 0,
            Status::Fail => 1,
            Status::Inconclusive => 2,
        }
    }

    fn from_checks(pass: bool, inconclusive: bool) -> Self {
        if !pass {
            Status::Fail
        } else if inconclusive {
            Status::Inconclusive
        } else {
            Status::Pass
        }
    }
}

/// Pretty JSON with a trailing newline. Object keys come out sorted, so
/// equal values always give equal bytes.
pub fn to_json_bytes(v: &Value) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("json value serializes");
    s.push('\n');
    s.into_bytes()
}

pub fn write_json(path: &Path, v: &Value) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, to_json_bytes(v))?;
    Ok(())
}

/// Write to `out/name` when an output directory is given, else to stdout.
fn emit(out: Option<&Path>, name: &str, v: &Value) -> Result<()> {
    match out {
        Some(dir) => write_json(&dir.join(name), v),
        None => {
            print!("{}", String::from_utf8(to_json_bytes(v)).expect("utf-8"));
            Ok(())
        }
    }
}

fn float_csv(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r.iter().map(|v| format!("{v:.16e}")))?;
    }
    w.flush()?;
    Ok(())
}

/// One named pass/fail line of a verdict.
#[derive(Debug, Clone, Serialize)]
pub struct Criterion {
    pub name: String,
    pub pass: bool,
    pub detail: Value,
}

impl Criterion {
    pub fn new(name: impl Into<String>, pass: bool, detail: Value) -> Self {
        Self {
            name: name.into(),
            pass,
            detail,
        }
    }
}

fn verdict_json(kind: &str, claim: &str, config: &Value, criteria: &[Criterion], status: Status, results: Value) -> Value {
    json!({
        "kind": kind,
        "claim": claim,
        "config_hash": config_hash(config),
        "config": config,
        "status": status,
        "criteria": criteria,
        "failing": criteria.iter().filter(|c| !c.pass).map(|c| c.name.clone()).collect::<Vec<_>>(),
        "results": results,
    })
}

fn condition_json(r: &ConditionReport) -> Value {
    json!({
        "condition": r.condition,
        "verdict": r.verdict,
        "tail_exponent": r.tail_exponent,
        "log_exponent": r.log_exponent,
        "margin": r.margin,
        "partial_integral": r.partial_integral,
        "window": [r.window.0, r.window.1],
        "details": r.details,
    })
}

pub fn solve_json(r: &SolveResult) -> Value {
    json!({
        "iterations": r.iterations,
        "converged": r.converged,
        "sup_norm_history": r.sup_norm_history,
        "l1_norm": r.l1_norm,
        "trace_coeff": r.solution.trace_coeff,
        "residual_summary": r.residual_summary,
        "source_exponent": r.source_exponent,
        "max_iterate_increase": r.max_iterate_increase,
        "clamped": r.clamped,
        "fixed_point_residual": r.fixed_point_residual,
        "ladder": r.ladder,
        "warnings": r.warnings,
    })
}

fn supersolution_json(sp: &SupersolutionSpec) -> Value {
    json!({
        "mu": sp.mu,
        "lambda": sp.lambda,
        "c_measured": sp.c_measured,
        "delta0": sp.delta0,
        "big_m": sp.big_m,
        "interior_sup": sp.interior_sup,
        "nodes_checked": sp.check.nodes_checked,
        "min_residual": sp.check.min_residual,
        "min_relative_residual": sp.check.min_relative_residual,
        "worst_node": sp.check.worst_node,
        "raw_min_relative_residual": sp.raw_check.min_relative_residual,
    })
}

fn bbehav_json(b: &BbehavReport) -> Value {
    json!({
        "min_ratio": b.min_ratio,
        "max_ratio": b.max_ratio,
        "limit": b.limit,
        "c0": b.c0,
        "pass": b.pass,
        "phi_exponent": b.fit.exponent,
        "windows": b.windows,
    })
}

// ----------------------------------------------------------------- check

pub const CHECK_CLAIM: &str = "Integral tests at infinity for f: the L1 condition (t/f(t))^(1/(2s)) integrable, \
the growth condition f(t) t^(-2/(1-s)) integrable, and psi(delta^s) integrable near the boundary.";

pub fn run_check(cfg: &Resolved, out: Option<&Path>) -> Result<Status> {
    let model = cfg.model()?;
    let reports = [check_l1(&model, cfg.s)?, check_e(&model, cfg.s)?, check_u_integrability(&model, cfg.s)?];
    let ratio = KOProfile::new(&model, cfg.s)
        .ok()
        .filter(|p| p.envelope.is_some())
        .map(|p| {
            let grid = LogGrid::new(1e-3, 1e9, 256)?.points();
            verify_ratio_bounds(&p, &grid)
        })
        .transpose()?;
    let regime = match cfg.nonlinearity.family.as_str() {
        "power" => Some(classify_power_regime(cfg.nonlinearity.p.unwrap_or(f64::NAN), cfg.s)?),
        _ => None,
    };
    let borderline = reports[..2].iter().any(|r| r.verdict == Verdict::Borderline);
    let config = serde_json::to_value(cfg)?;
    let v = json!({
        "claim": CHECK_CLAIM,
        "config_hash": config_hash(&config),
        "config": config,
        "reports": reports.iter().map(condition_json).collect::<Vec<_>>(),
        "ratio_bounds": ratio,
        "power_regime": regime,
        "status": Status::from_checks(true, borderline),
    });
    emit(out, "check.json", &v)?;
    Ok(Status::from_checks(true, borderline))
}

// ----------------------------------------------------------------- solve

pub fn run_solve(cfg: &Resolved, out: &Path) -> Result<Status> {
    let sc = cfg.solve_config()?;
    let r = match sc.data {
        ProblemData::Trace(_) => solve_k_problem(&sc)?,
        ProblemData::Exterior { .. } => solve_g_problem(&sc)?,
    };
    std::fs::create_dir_all(out)?;
    r.solution.save_csv(&out.join("solution.csv"))?;
    let config = serde_json::to_value(cfg)?;
    let v = json!({
        "config_hash": config_hash(&config),
        "config": config,
        "diagnostics": solve_json(&r),
    });
    write_json(&out.join("diagnostics.json"), &v)?;
    Ok(if r.converged { Status::Pass } else { Status::Inconclusive })
}

// ----------------------------------------------------------------- sweep

pub const SWEEP_CLAIM: &str = "The approximations u_k increase with k. For f(t) = t^p there is no solution if \
p >= 1+2s/(1-s); u_k converges to a large solution with u <= C delta^(-2s/(p-1)) if 1+2s < p < 1+2s/(1-s); \
the L1 norms of u_k escape to infinity if 1 < p < 1+s; u_k blows up uniformly on a boundary strip if p <= 1.";

fn k_label(k: f64) -> String {
    format!("u_k{k}.csv")
}

/// Nodewise absolute tolerance `1e-8 + tol · max(1, ‖regular part‖_∞)`.
pub fn monotone_tolerance(r: &SolveResult, tol: f64) -> f64 {
    let reg = r.solution.values.iter().fold(1.0f64, |a, &b| a.max(b.abs()));
    1e-8 + tol * reg
}

/// The ordering checks of a sweep, each reported with its tolerance.
pub fn monotone_criteria(sw: &SweepResult, tol: f64) -> Vec<Criterion> {
    let tols: Vec<f64> = sw.solutions.iter().map(|r| monotone_tolerance(r, tol)).collect();
    let tmax = tols.iter().cloned().fold(1e-8, f64::max);
    let picard = sw.solutions.iter().zip(&tols).all(|(r, &t)| r.max_iterate_increase <= t);
    let kh1 = sw.entries.iter().zip(&tols).all(|(e, &t)| e.above_kh1 <= t);
    let mut out = vec![
        Criterion::new(
            "picard iterates decrease",
            picard,
            json!({"max_increase": sw.solutions.iter().map(|r| r.max_iterate_increase).collect::<Vec<_>>(), "tolerance": tols}),
        ),
        Criterion::new(
            "u_k increases with k",
            sw.k_monotonicity_violation <= tmax,
            json!({"max_violation": sw.k_monotonicity_violation, "tolerance": tmax}),
        ),
        Criterion::new(
            "u_k <= k h1",
            kh1,
            json!({"max_excess": sw.entries.iter().map(|e| e.above_kh1).collect::<Vec<_>>()}),
        ),
    ];
    if let Some(a) = sw.above_supersolution {
        out.push(Criterion::new(
            "u_k <= supersolution",
            a <= tmax,
            json!({"max_excess": a, "tolerance": tmax}),
        ));
    }
    out
}

fn sweep_results_json(sw: &SweepResult, model: &NonlinearityModel, s: f64) -> Value {
    let traces: Vec<Value> = sw
        .solutions
        .iter()
        .map(|r| match singular_trace(&r.solution) {
            Ok(t) => json!(t),
            Err(e) => json!({"error": e.to_string()}),
        })
        .collect();
    let trace_values: Vec<f64> = sw
        .solutions
        .iter()
        .filter_map(|r| singular_trace(&r.solution).ok().map(|t| t.value))
        .collect();
    let limit = sw.limit_estimate().map(|r| {
        let exponent = boundary_exponent(&r.solution).map(|f| json!(f)).unwrap_or_else(|e| json!({"error": e.to_string()}));
        let bb = KOProfile::new(model, s)
            .and_then(|p| bbehav_check(&r.solution, &p, 0.2))
            .map(|b| bbehav_json(&b))
            .unwrap_or_else(|e| json!({"error": e.to_string()}));
        json!({"k": r.solution.trace_coeff, "boundary_exponent": exponent, "bbehav": bb})
    });
    json!({
        "regime_observed": sw.regime_observed,
        "regime_predicted": sw.regime_predicted,
        "agree": sw.agree(),
        "refusal": sw.refusal,
        "entries": sw.entries,
        "l1_ratios": sw.l1_ratios,
        "strip_min_growth": sw.strip_min_growth,
        "interior_gaps": sw.interior_gaps,
        "k_monotonicity_violation": sw.k_monotonicity_violation,
        "above_supersolution": sw.above_supersolution,
        "supersolution": sw.supersolution.as_ref().map(supersolution_json),
        "traces": traces,
        "trace_escape": trace_escapes(&sw.k_list[..trace_values.len().min(sw.k_list.len())], &trace_values),
        "limit": limit,
        "solves": sw.solutions.iter().map(solve_json).collect::<Vec<_>>(),
    })
}

fn sweep_to_dir(sc: &SolveConfig, k_list: &[f64], out: &Path) -> Result<SweepResult> {
    let sw = sweep_k(sc, k_list)?;
    std::fs::create_dir_all(out)?;
    for (r, k) in sw.solutions.iter().zip(k_list) {
        r.solution.save_csv(&out.join(k_label(*k)))?;
    }
    Ok(sw)
}

pub fn run_sweep(cfg: &Resolved, out: &Path) -> Result<Status> {
    let sc = cfg.solve_config()?;
    let sw = sweep_to_dir(&sc, &cfg.k_list, out)?;
    let criteria = monotone_criteria(&sw, cfg.tol);
    let ordered = criteria.iter().all(|c| c.pass);
    let inconclusive = match sw.agree() {
        Some(a) => !a,
        None => sw.regime_observed == crate::solver::Regime::Unclassified,
    };
    let status = Status::from_checks(ordered, inconclusive);
    let config = serde_json::to_value(cfg)?;
    let v = verdict_json("sweep", SWEEP_CLAIM, &config, &criteria, status, sweep_results_json(&sw, &sc.model, sc.s));
    write_json(&out.join("sweep.json"), &v)?;
    Ok(status)
}

// ----------------------------------------------------------------- residual

pub fn run_residual(solution: &Path, params: &Params, out: Option<&Path>) -> Result<Status> {
    let u = GridFunction::load_csv(solution)?;
    let model = params.nonlinearity().build()?;
    let op = FracLapOperator::new(u.mesh.clone(), u.s)?;
    let region = u.mesh.admissible_indices();
    let lap = op.apply_nodes(&u, &region)?;
    let mut rows = Vec::with_capacity(region.len());
    let (mut max_abs, mut max_rel) = (0.0f64, 0.0f64);
    for (&j, &l) in region.iter().zip(&lap) {
        let f = model.eval_f(u.total(j).max(0.0))?;
        let r = l + f;
        max_abs = max_abs.max(r.abs());
        max_rel = max_rel.max(r.abs() / f.max(1.0));
        rows.push(vec![u.mesh.x[j], u.mesh.delta[j], l, f, r]);
    }
    let dmin = region.iter().map(|&j| u.mesh.delta[j]).fold(f64::INFINITY, f64::min);
    let dmax = region.iter().map(|&j| u.mesh.delta[j]).fold(0.0, f64::max);
    if let Some(dir) = out {
        float_csv(&dir.join("residual.csv"), &["x", "delta", "lap", "f", "residual"], &rows)?;
    }
    let v = json!({
        "solution": solution.display().to_string(),
        "nonlinearity": params.nonlinearity(),
        "max_residual": max_abs,
        "max_relative_residual": max_rel,
        "region": {"nodes": region.len(), "delta_min": dmin, "delta_max": dmax},
        "mesh": {"n": u.mesh.len(), "q": u.mesh.q, "domain": u.mesh.domain.name(), "N": u.mesh.domain.dim},
    });
    emit(out, "residual.json", &v)?;
    Ok(Status::Pass)
}

// ----------------------------------------------------------------- analyze

pub fn run_analyze(solution: &Path, params: &Params, c0: f64, out: Option<&Path>) -> Result<Status> {
    let u = GridFunction::load_csv(solution)?;
    let trace = singular_trace(&u)?;
    let fit = boundary_exponent(&u)?;
    let bb = if params.family.is_some() || params.p.is_some() {
        let model = params.nonlinearity().build()?;
        let profile = KOProfile::new(&model, u.s)?;
        Some(bbehav_check(&u, &profile, c0)?)
    } else {
        None
    };
    let v = json!({
        "solution": solution.display().to_string(),
        "trace": trace.value,
        "trace_infinite": trace.infinite,
        "trace_windows": trace.windows,
        "exponent": fit.exponent,
        "exponent_stderr": fit.exponent_stderr,
        "coefficient": fit.coefficient,
        "r_squared": fit.r_squared,
        "node_count": fit.node_count,
        "bbehav_min_ratio": bb.as_ref().map(|b| b.min_ratio),
        "bbehav": bb.as_ref().map(bbehav_json),
        "windows": {"fit": fit.window, "bbehav": bb.as_ref().map(|b| b.windows.clone())},
    });
    emit(out, "analyze.json", &v)?;
    let pass = bb.map(|b| b.pass).unwrap_or(true);
    Ok(Status::from_checks(true, !pass))
}

// ----------------------------------------------------------------- info

pub fn run_info(dim: usize, s: f64, seed: u64) -> Result<Value> {
    let ks = KernelSet::new(dim, s)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..16 {
        let mut pt = || -> Vec<f64> {
            loop {
                let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
                if v.iter().map(|a| a * a).sum::<f64>() < 0.98 {
                    return v;
                }
            }
        };
        let (x, y) = (pt(), pt());
        let (a, b) = (ks.green(&x, &y)?, ks.green(&y, &x)?);
        worst = worst.max((a - b).abs() / a.abs().max(b.abs()));
    }
    Ok(json!({
        "N": dim,
        "s": s,
        "frac_lap_constant": ks.frac_lap_c,
        "green_constant": ks.kappa,
        "poisson_constant": ks.poisson_c,
        "torsion_constant": ks.torsion_gamma,
        "h1_normalization": ks.h1_norm,
        "h1_mass": h1_mass(dim, s),
        "sphere_area": if dim >= 2 { Some(sphere_area(dim - 1)) } else { None },
        "green_symmetry_max_rel": worst,
        "seed": seed,
    }))
}

// ----------------------------------------------------------------- replicate

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    PowerThresholds,
    LogCriticalLower,
    LogCriticalUpper,
    RegimeSweep,
    SupersolutionAudit,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::PowerThresholds => "power-thresholds",
            Scenario::LogCriticalLower => "log-critical-lower",
            Scenario::LogCriticalUpper => "log-critical-upper",
            Scenario::RegimeSweep => "regime-sweep",
            Scenario::SupersolutionAudit => "supersolution-audit",
        }
    }

    pub fn claim(self) -> &'static str {
        match self {
            Scenario::PowerThresholds => {
                "For f(t) = t^p the L1 condition holds if and only if p > 1+2s, and the growth condition \
                 int f(t) t^(-2/(1-s)) dt < infinity holds if and only if p < 1+2s/(1-s)."
            }
            Scenario::LogCriticalLower => {
                "For f(t) = t^(1+2s) ln^alpha(1+t) the L1 condition is fulfilled only for alpha > 2s."
            }
            Scenario::LogCriticalUpper => {
                "For f(t) = t^((1+s)/(1-s)) ln^(-beta)(1+t) the growth condition is satisfied by any beta > 1."
            }
            Scenario::RegimeSweep => SWEEP_CLAIM,
            Scenario::SupersolutionAudit => {
                "u = mu psi(delta^s) + lambda xi with mu = max(1, C^(1/M)) and lambda = mu sup_{delta > delta0} \
                 |(-Delta)^s psi(delta^s)| satisfies (-Delta)^s u + f(u) >= 0 in the domain."
            }
        }
    }

    pub fn all() -> [Scenario; 5] {
        [
            Scenario::PowerThresholds,
            Scenario::LogCriticalLower,
            Scenario::LogCriticalUpper,
            Scenario::RegimeSweep,
            Scenario::SupersolutionAudit,
        ]
    }
}

/// Verdict bundle of a replication run.
#[derive(Debug, Clone)]
pub struct Replication {
    pub status: Status,
    pub criteria: Vec<Criterion>,
    pub verdict: Value,
    pub verdict_path: PathBuf,
}

impl Replication {
    pub fn failing(&self) -> Vec<&str> {
        self.criteria.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect()
    }
}

pub const POWER_S_GRID: [f64; 3] = [0.25, 0.5, 0.75];

pub fn power_p_grid() -> Vec<f64> {
    (0..=22).map(|i| 0.5 + 0.25 * i as f64).collect()
}

pub const LOG_LOWER_ALPHAS: [f64; 6] = [0.2, 0.5, 0.8, 1.2, 1.5, 2.0];
pub const LOG_UPPER_BETAS: [f64; 4] = [0.3, 0.7, 1.5, 2.0];
pub const REGIME_PS: [f64; 4] = [0.7, 1.2, 2.5, 3.5];
pub const AUDIT_CASES: [(f64, f64); 2] = [(0.5, 2.5), (0.75, 4.0)];
const SWEEP_N: usize = 256;
const SWEEP_TOL: f64 = 1e-10;

/// Outcome of one integral test against its expected verdict.
#[derive(Debug, Clone, Serialize)]
pub struct ThresholdPoint {
    pub s: f64,
    pub p: f64,
    pub condition: String,
    pub expected_converges: bool,
    pub verdict: Verdict,
    pub margin: f64,
    pub ok: bool,
}

fn threshold_point(s: f64, p: f64, condition: &str, expected: bool, r: &ConditionReport) -> ThresholdPoint {
    let ok = match r.verdict {
        Verdict::Borderline => r.margin.abs() <= BORDERLINE_BAND,
        Verdict::Converges => expected,
        Verdict::Diverges => !expected,
    };
    ThresholdPoint {
        s,
        p,
        condition: condition.into(),
        expected_converges: expected,
        verdict: r.verdict,
        margin: r.margin,
        ok,
    }
}

/// `check_L1` and `check_E` over the `(s, p)` grid for pure powers.
pub fn power_threshold_points() -> Result<Vec<ThresholdPoint>> {
    let jobs: Vec<(f64, f64)> = POWER_S_GRID
        .iter()
        .flat_map(|&s| power_p_grid().into_iter().map(move |p| (s, p)))
        .collect();
    let rows: Vec<Result<[ThresholdPoint; 2]>> = jobs
        .par_iter()
        .map(|&(s, p)| {
            let m = NonlinearityModel::power(p);
            let l1 = check_l1(&m, s)?;
            let e = check_e(&m, s)?;
            Ok([
                threshold_point(s, p, "L1", p > 1.0 + 2.0 * s, &l1),
                threshold_point(s, p, "E", p < 1.0 + 2.0 * s / (1.0 - s), &e),
            ])
        })
        .collect();
    let mut out = Vec::new();
    for r in rows {
        out.extend(r?);
    }
    Ok(out)
}

/// Log-weighted scans: `(parameter, verdict, expected)` rows.
pub fn log_critical_points(upper: bool) -> Result<Vec<ThresholdPoint>> {
    let s = 0.5;
    let params: Vec<f64> = if upper { LOG_UPPER_BETAS.to_vec() } else { LOG_LOWER_ALPHAS.to_vec() };
    params
        .par_iter()
        .map(|&a| {
            if upper {
                let p = (1.0 + s) / (1.0 - s);
                let r = check_e(&NonlinearityModel::power_log(p, -a), s)?;
                Ok(threshold_point(s, a, "E", a > 1.0, &r))
            } else {
                let p = 1.0 + 2.0 * s;
                let r = check_l1(&NonlinearityModel::power_log(p, a), s)?;
                Ok(threshold_point(s, a, "L1", a > 2.0 * s, &r))
            }
        })
        .collect()
}

fn threshold_criteria(points: &[ThresholdPoint]) -> Vec<Criterion> {
    let decided: Vec<&ThresholdPoint> = points.iter().filter(|p| p.verdict != Verdict::Borderline).collect();
    let agree = decided.iter().filter(|p| p.ok).count();
    let border: Vec<&ThresholdPoint> = points.iter().filter(|p| p.verdict == Verdict::Borderline).collect();
    vec![
        Criterion::new(
            "verdicts match the thresholds off the borderline band",
            agree == decided.len(),
            json!({"agree": agree, "decided": decided.len()}),
        ),
        Criterion::new(
            "borderline verdicts only within the band",
            border.iter().all(|p| p.ok),
            json!({"borderline": border.len(), "band": BORDERLINE_BAND}),
        ),
    ]
}

fn threshold_csv(path: &Path, points: &[ThresholdPoint]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["s", "param", "condition", "expected_converges", "verdict", "margin", "ok"])?;
    for p in points {
        w.write_record([
            format!("{:.16e}", p.s),
            format!("{:.16e}", p.p),
            p.condition.clone(),
            p.expected_converges.to_string(),
            format!("{:?}", p.verdict),
            format!("{:.16e}", p.margin),
            p.ok.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn sweep_config(p: f64) -> SolveConfig {
    let mut c = SolveConfig::new(0.5, 1, NonlinearityModel::power(p), ProblemData::Trace(1.0)).with_mesh(SWEEP_N, None);
    c.tol = SWEEP_TOL;
    c
}

/// Criteria for one `p` of the regime sweep, including the ordering checks.
pub fn regime_criteria(p: f64, sw: &SweepResult) -> Result<Vec<Criterion>> {
    let mut c = vec![Criterion::new(
        format!("p={p}: observed regime matches prediction"),
        sw.agree() == Some(true),
        json!({"observed": sw.regime_observed, "predicted": sw.regime_predicted}),
    )];
    let pred = classify_power_regime(p, 0.5)?;
    use crate::ko::PowerRegime as R;
    match pred {
        R::LargeSolution => {
            let last = sw
                .limit_estimate()
                .ok_or_else(|| Error::Fit("sweep produced no solutions".into()))?;
            let fit = boundary_exponent(&last.solution)?;
            c.push(Criterion::new(
                format!("p={p}: boundary exponent in [-0.78, -0.55]"),
                (-0.78..=-0.55).contains(&fit.exponent),
                json!({"exponent": fit.exponent, "target": -1.0 / (p - 1.0)}),
            ));
            let prof = KOProfile::new(&NonlinearityModel::power(p), 0.5)?;
            let bb = bbehav_check(&last.solution, &prof, 0.2)?;
            c.push(Criterion::new(
                format!("p={p}: phi(u)/delta^s >= 0.2 stable under window shrink"),
                bb.pass,
                bbehav_json(&bb),
            ));
        }
        R::L1Escape => c.push(Criterion::new(
            format!("p={p}: L1 ratios >= 1.5"),
            !sw.l1_ratios.is_empty() && sw.l1_ratios.iter().all(|&r| r >= 1.5),
            json!({"l1_ratios": sw.l1_ratios}),
        )),
        R::UniformBlowup => c.push(Criterion::new(
            format!("p={p}: strip minimum grows at least 4x"),
            sw.strip_min_growth >= 4.0,
            json!({"strip_min_growth": sw.strip_min_growth}),
        )),
        R::Nonexistence => c.push(Criterion::new(
            format!("p={p}: integrability refusal"),
            sw.refusal.is_some(),
            json!({"refusal": sw.refusal}),
        )),
        R::Unclassified => {}
    }
    for mut m in monotone_criteria(sw, SWEEP_TOL) {
        m.name = format!("p={p}: {}", m.name);
        c.push(m);
    }
    Ok(c)
}

fn scenario_config(sc: Scenario) -> Value {
    match sc {
        Scenario::PowerThresholds => json!({"scenario": sc.name(), "s": POWER_S_GRID, "p": power_p_grid(), "band": BORDERLINE_BAND}),
        Scenario::LogCriticalLower => json!({"scenario": sc.name(), "s": 0.5, "p": 2.0, "alpha": LOG_LOWER_ALPHAS}),
        Scenario::LogCriticalUpper => json!({"scenario": sc.name(), "s": 0.5, "p": 3.0, "beta": LOG_UPPER_BETAS}),
        Scenario::RegimeSweep => json!({
            "scenario": sc.name(), "s": 0.5, "N": 1, "p": REGIME_PS, "k_list": DEFAULT_K_LIST,
            "mesh_n": SWEEP_N, "tol": SWEEP_TOL, "damping": crate::solver::DEFAULT_DAMPING,
        }),
        Scenario::SupersolutionAudit => json!({
            "scenario": sc.name(), "cases": AUDIT_CASES, "N": 1, "mesh_n": SWEEP_N,
            "delta0": crate::solver::DEFAULT_DELTA0, "tol": SUPERSOLUTION_TOL,
        }),
    }
}

/// Run a scenario and write `out/<scenario>/verdict.json` plus per-run files.
pub fn replicate(sc: Scenario, out: &Path) -> Result<Replication> {
    let dir = out.join(sc.name());
    std::fs::create_dir_all(&dir)?;
    let (criteria, results) = match sc {
        Scenario::PowerThresholds => {
            let pts = power_threshold_points()?;
            threshold_csv(&dir.join("grid.csv"), &pts)?;
            (threshold_criteria(&pts), json!(pts))
        }
        Scenario::LogCriticalLower | Scenario::LogCriticalUpper => {
            let pts = log_critical_points(sc == Scenario::LogCriticalUpper)?;
            threshold_csv(&dir.join("scan.csv"), &pts)?;
            let all = Criterion::new(
                "every scan point matches",
                pts.iter().all(|p| p.ok && p.verdict != Verdict::Borderline),
                json!({"points": pts.len()}),
            );
            (vec![all], json!(pts))
        }
        Scenario::RegimeSweep => {
            let runs: Vec<Result<(Vec<Criterion>, Value)>> = REGIME_PS
                .par_iter()
                .map(|&p| {
                    let cfg = sweep_config(p);
                    let sw = sweep_to_dir(&cfg, &DEFAULT_K_LIST, &dir.join(format!("p{p}")))?;
                    Ok((regime_criteria(p, &sw)?, sweep_results_json(&sw, &cfg.model, cfg.s)))
                })
                .collect();
            let mut crit = Vec::new();
            let mut res = serde_json::Map::new();
            for (p, r) in REGIME_PS.iter().zip(runs) {
                let (c, v) = r?;
                crit.extend(c);
                res.insert(format!("p={p}"), v);
            }
            (crit, Value::Object(res))
        }
        Scenario::SupersolutionAudit => {
            let runs: Vec<(f64, f64, Result<SupersolutionSpec>)> = AUDIT_CASES
                .par_iter()
                .map(|&(s, p)| {
                    let cfg = SolveConfig::new(s, 1, NonlinearityModel::power(p), ProblemData::Trace(0.0))
                        .with_mesh(SWEEP_N, None);
                    (s, p, build_supersolution(&cfg))
                })
                .collect();
            let mut crit = Vec::new();
            let mut res = serde_json::Map::new();
            for (s, p, r) in runs {
                let key = format!("s={s},p={p}");
                match r {
                    Ok(sp) => {
                        let sub = dir.join(format!("s{s}_p{p}"));
                        std::fs::create_dir_all(&sub)?;
                        sp.ubar.save_csv(&sub.join("ubar.csv"))?;
                        let rows: Vec<Vec<f64>> = sp
                            .check
                            .values
                            .iter()
                            .map(|v| vec![v.node as f64, v.delta, v.lap, v.f, v.residual])
                            .collect();
                        float_csv(&sub.join("check.csv"), &["node", "delta", "lap", "f", "residual"], &rows)?;
                        crit.push(Criterion::new(
                            format!("{key}: global residual >= -1e-3 max(1, f)"),
                            sp.check.min_relative_residual >= -SUPERSOLUTION_TOL,
                            json!({"min_relative_residual": sp.check.min_relative_residual}),
                        ));
                        res.insert(key, supersolution_json(&sp));
                    }
                    Err(e) => {
                        crit.push(Criterion::new(format!("{key}: build succeeds"), false, json!(e.to_string())));
                        res.insert(key, json!({"error": e.to_string()}));
                    }
                }
            }
            (crit, Value::Object(res))
        }
    };
    let status = Status::from_checks(criteria.iter().all(|c| c.pass), false);
    let verdict = verdict_json(sc.name(), sc.claim(), &scenario_config(sc), &criteria, status, results);
    let verdict_path = dir.join("verdict.json");
    write_json(&verdict_path, &verdict)?;
    Ok(Replication {
        status,
        criteria,
        verdict,
        verdict_path,
    })
}
