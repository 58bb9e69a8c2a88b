//! Approximating problems with finite singular trace or truncated exterior
//! data, the supersolution `μψ(δ^s) + λξ`, and k-sweeps.
//!
//! Each problem is solved in Green form `u = u₀ - W f(u)` with `W` the
//! product-integration Green matrix. The iteration
//! `(I + W C_n) u_{n+1} = u₀ + W (C_n u_n - f(u_n))`, with
//! `c = max(f'(u), f(u)/u)`, is Newton's method when `f` is convex and the
//! secant (chord) method through the origin when `f` is concave. Started
//! from `u₀` it decreases monotonically as long as the discrete comparison
//! principle holds; near the boundary it holds only approximately, and the
//! default damping keeps the outermost nodes from undershooting.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use log::{debug, info, warn};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fraclap::{FracLapOperator, SupersolutionCheck};
use crate::kernels::{
    boundary_exponent_fit, check_integrability, exterior_l1_norm, h1_mass, h1_profile, poisson_apply_nodes,
    volume_weights, GreenOperator, KernelSet,
};
use crate::ko::{check_e, check_l1, classify_power_regime, KOProfile, PowerRegime, Verdict};
use crate::mesh::{build_graded_mesh, Domain, DomainKind, ExteriorData, GradedMesh, GridFunction};
use crate::nonlinearity::{default_envelope, Family, NonlinearityModel};

/// Boundary datum of the approximating problem.
#[derive(Debug, Clone, PartialEq)]
pub enum ProblemData {
    /// Singular trace `k`, zero exterior data.
    Trace(f64),
    /// Exterior data `g`, solved for the truncations `min(k, g)` along `ladder`.
    Exterior { g: ExteriorData, ladder: Vec<f64> },
}

pub const DEFAULT_DAMPING: f64 = 0.9;

#[derive(Debug, Clone)]
pub struct SolveConfig {
    pub s: f64,
    pub dim: usize,
    pub model: NonlinearityModel,
    pub mesh_n: usize,
    /// Grading exponent; `2/s` when unset.
    pub mesh_q: Option<f64>,
    pub data: ProblemData,
    pub max_iters: usize,
    /// Stop when `‖u_{n+1} - u_n‖_∞ ≤ tol · max(1, ‖u - u₀‖_∞)`.
    pub tol: f64,
    /// Relaxation factor in `(0, 1]`. Full steps can undershoot at the
    /// outermost node and climb back, so the default stays slightly below 1.
    pub damping: f64,
}

impl SolveConfig {
    pub fn new(s: f64, dim: usize, model: NonlinearityModel, data: ProblemData) -> Self {
        Self {
            s,
            dim,
            model,
            mesh_n: 256,
            mesh_q: None,
            data,
            max_iters: 200,
            tol: 1e-10,
            damping: DEFAULT_DAMPING,
        }
    }

    pub fn with_mesh(mut self, n: usize, q: Option<f64>) -> Self {
        self.mesh_n = n;
        self.mesh_q = q;
        self
    }

    pub fn grading(&self) -> f64 {
        self.mesh_q.unwrap_or(2.0 / self.s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.s > 0.0 && self.s < 1.0) {
            return Err(Error::InvalidParameter(format!("s must lie in (0, 1), got {}", self.s)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter("tolerance must be positive".into()));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::InvalidParameter("damping must lie in (0, 1]".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("max_iters must be positive".into()));
        }
        match &self.data {
            ProblemData::Trace(k) if !(*k >= 0.0 && k.is_finite()) => {
                return Err(Error::InvalidParameter(format!("trace k must be finite and >= 0, got {k}")))
            }
            ProblemData::Exterior { ladder, .. }
                if ladder.is_empty() || ladder.iter().any(|&k| !(k > 0.0)) || ladder.windows(2).any(|w| w[1] <= w[0]) =>
            {
                return Err(Error::InvalidParameter("truncation ladder must be positive and ascending".into()));
            }
            _ => {}
        }
        self.model.validate()
    }

    pub fn build_mesh(&self) -> Result<Arc<GradedMesh>> {
        Ok(Arc::new(build_graded_mesh(Domain::for_dim(self.dim)?, self.mesh_n, self.grading())?))
    }
}

/// Residual of `(-Δ)^s u + f(u)` over the admissible nodes (interval only).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResidualSummary {
    pub max_abs: f64,
    /// `max |r| / max(1, f(u))`.
    pub max_relative: f64,
    pub nodes: usize,
    pub delta_range: (f64, f64),
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub solution: GridFunction,
    pub iterations: usize,
    pub converged: bool,
    /// `‖u_{n+1} - u_n‖_∞` per iteration.
    pub sup_norm_history: Vec<f64>,
    pub l1_norm: f64,
    pub residual_summary: Option<ResidualSummary>,
    /// Exponent used for the source model in the Green quadrature.
    pub source_exponent: f64,
    /// Largest nodewise increase `u_{n+1} - u_n` over all iterations.
    pub max_iterate_increase: f64,
    pub clamped: usize,
    /// `‖u - (u₀ - W f(u))‖_∞ / max(1, ‖u‖_∞)` at exit.
    pub fixed_point_residual: f64,
    /// Truncation levels and `L¹` norms of the g-problem ladder.
    pub ladder: Vec<(f64, f64)>,
    pub warnings: Vec<String>,
}

impl SolveResult {
    pub fn totals(&self) -> Vec<f64> {
        self.solution.totals()
    }
}

/// Holds the mesh, kernels and a cache of assembled Green matrices.
pub struct Solver {
    pub config: SolveConfig,
    pub mesh: Arc<GradedMesh>,
    pub ks: KernelSet,
    cache: Mutex<HashMap<i64, Arc<GreenOperator>>>,
}

fn gamma_key(g: f64) -> (i64, f64) {
    let key = (g * 1e9).round();
    (key as i64, key / 1e9)
}

impl Solver {
    pub fn new(config: SolveConfig) -> Result<Self> {
        config.validate()?;
        let mesh = config.build_mesh()?;
        let ks = KernelSet::new(config.dim, config.s)?;
        Ok(Self {
            config,
            mesh,
            ks,
            cache: Mutex::new(HashMap::new()),
        })
    }

    /// Green matrix for sources `~ δ^γ` (γ rounded to 1e-9).
    pub fn operator(&self, gamma: f64) -> Result<Arc<GreenOperator>> {
        let (key, g) = gamma_key(gamma);
        if let Some(op) = self.cache.lock().unwrap().get(&key) {
            return Ok(op.clone());
        }
        let op = Arc::new(GreenOperator::assemble(&self.ks, self.mesh.clone(), g)?);
        self.cache.lock().unwrap().insert(key, op.clone());
        Ok(op)
    }

    fn f_nodes(&self, u: &[f64]) -> Result<Vec<f64>> {
        u.iter().map(|&t| self.config.model.eval_f(t.max(0.0))).collect()
    }

    /// Fitted source exponent of `f(u₀)` after the integrability check.
    fn source_gamma(&self, u0: &[f64]) -> Result<f64> {
        let f0 = self.f_nodes(u0)?;
        let g = boundary_exponent_fit(&self.mesh, &f0);
        check_integrability(self.config.s, g)?;
        Ok(g)
    }

    /// Monotone iteration for `u = u₀ - W f(u)`.
    fn iterate(&self, u0: &[f64], gamma: f64) -> Result<IterationOutcome> {
        let cfg = &self.config;
        let n = u0.len();
        let op = self.operator(gamma)?;
        let w = &op.matrix;
        let mut u = u0.to_vec();
        let mut history = Vec::new();
        let mut max_increase: f64 = 0.0;
        let mut clamped = 0;
        let mut converged = false;
        let mut iterations = 0;
        if u0.iter().all(|&v| v == 0.0) {
            return Ok(IterationOutcome {
                u,
                history,
                converged: true,
                iterations: 0,
                max_increase,
                clamped,
                fixed_point_residual: 0.0,
            });
        }
        for it in 1..=cfg.max_iters {
            iterations = it;
            let scale = u.iter().fold(0.0f64, |a, &b| a.max(b.abs())).max(1.0);
            let floor = 1e-12 * scale;
            let mut c = Vec::with_capacity(n);
            let mut fu = Vec::with_capacity(n);
            for &ui in &u {
                let t = ui.max(floor);
                let f_t = cfg.model.eval_f(t)?;
                let fp = cfg.model.eval_f_prime(t)?;
                c.push(fp.max(f_t / t));
                fu.push(cfg.model.eval_f(ui.max(0.0))?);
            }
            let corr: Vec<f64> = (0..n).map(|i| c[i] * u[i] - fu[i]).collect();
            let wc = w * DVector::from_vec(corr);
            let rhs = DVector::from_iterator(n, (0..n).map(|i| u0[i] + wc[i]));
            let mut a = w.clone();
            for (j, &cj) in c.iter().enumerate() {
                a.column_mut(j).scale_mut(cj);
            }
            a += DMatrix::identity(n, n);
            let sol = a
                .lu()
                .solve(&rhs)
                .ok_or_else(|| Error::Discretization("singular linearized system".into()))?;
            let mut gap: f64 = 0.0;
            let mut reg: f64 = 0.0;
            for i in 0..n {
                let mut next = u[i] + cfg.damping * (sol[i] - u[i]);
                if next < 0.0 {
                    next = 0.0;
                    clamped += 1;
                }
                if it > 1 {
                    max_increase = max_increase.max(next - u[i]);
                    
                }
                gap = gap.max((next - u[i]).abs());
                reg = reg.max((next - u0[i]).abs());
                u[i] = next;
            }
            history.push(gap);
            debug!("iteration {it}: gap {gap:.3e}");
            if !gap.is_finite() {
                return Err(Error::NonConvergence {
                    iterations: it,
                    last_gap: gap,
                    history,
                });
            }
            if gap <= cfg.tol * reg.max(1.0) {
                converged = true;
                break;
            }
        }
        let fu = self.f_nodes(&u)?;
        let wf = op.apply(&fu);
        let norm = u.iter().fold(1.0f64, |a, &b| a.max(b.abs()));
        let fixed_point_residual = (0..n).map(|i| (u[i] - (u0[i] - wf[i])).abs()).fold(0.0, f64::max) / norm;
        Ok(IterationOutcome {
            u,
            history,
            converged,
            iterations,
            max_increase,
            clamped,
            fixed_point_residual,
        })
    }

    fn residual_summary(&self, sol: &GridFunction) -> Option<ResidualSummary> {
        if self.mesh.domain.kind != DomainKind::Interval {
            return None;
        }
        let op = FracLapOperator::new(self.mesh.clone(), self.config.s).ok()?;
        let nodes = self.mesh.admissible_indices();
        let r = op.residual(sol, &self.config.model, &nodes).ok()?;
        let mut max_abs: f64 = 0.0;
        let mut max_rel: f64 = 0.0;
        for (&j, &ri) in nodes.iter().zip(&r) {
            let f = self.config.model.eval_f(sol.total(j).max(0.0)).ok()?;
            max_abs = max_abs.max(ri.abs());
            max_rel = max_rel.max(ri.abs() / f.max(1.0));
        }
        let ds: Vec<f64> = nodes.iter().map(|&j| self.mesh.delta[j]).collect();
        Some(ResidualSummary {
            max_abs,
            max_relative: max_rel,
            nodes: nodes.len(),
            delta_range: (
                ds.iter().cloned().fold(f64::INFINITY, f64::min),
                ds.iter().cloned().fold(0.0, f64::max),
            ),
        })
    }

    /// Solution with singular trace `k`.
    pub fn solve_k(&self, k: f64) -> Result<SolveResult> {
        let s = self.config.s;
        if !(k >= 0.0 && k.is_finite()) {
            return Err(Error::InvalidParameter(format!("trace k must be finite and >= 0, got {k}")));
        }
        let n = self.mesh.len();
        let h1: Vec<f64> = self.mesh.delta.iter().map(|&d| h1_profile(s, d)).collect();
        let u0: Vec<f64> = h1.iter().map(|&h| k * h).collect();
        let mut gamma = 0.0;
        if k > 0.0 {
            let fit = boundary_exponent_fit(&self.mesh, &self.f_nodes(&u0)?);
            let e = check_e(&self.config.model, s)?;
            if e.verdict == Verdict::Diverges {
                return Err(Error::Integrability {
                    exponent: fit,
                    weighted: s + fit,
                });
            }
            gamma = self.source_gamma(&u0)?;
        }
        let out = self.iterate(&u0, gamma)?;
        let regular: Vec<f64> = (0..n).map(|i| out.u[i] - u0[i]).collect();
        let solution = GridFunction::new(self.mesh.clone(), s, regular)?.with_trace(k);
        let l1_norm = k * h1_mass(self.config.dim, s) + integrate_nodes(&self.mesh, &solution.values);
        let residual_summary = if out.converged { self.residual_summary(&solution) } else { None };
        if !out.converged {
            warn!("k = {k}: no convergence after {} iterations", out.iterations);
        }
        Ok(SolveResult {
            solution,
            iterations: out.iterations,
            converged: out.converged,
            sup_norm_history: out.history,
            l1_norm,
            residual_summary,
            source_exponent: gamma,
            max_iterate_increase: out.max_increase,
            clamped: out.clamped,
            fixed_point_residual: out.fixed_point_residual,
            ladder: vec![],
            warnings: vec![],
        })
    }

    /// Solution with exterior data `min(k, g)` for a single truncation level.
    pub fn solve_g_level(&self, g: &ExteriorData, k: f64) -> Result<SolveResult> {
        let s = self.config.s;
        let gk = g.truncated(k);
        let u0 = poisson_apply_nodes(&self.ks, &self.mesh, &gk)?;
        if u0.iter().any(|&v| v < 0.0) {
            return Err(Error::DataInadmissible("exterior data must be nonnegative".into()));
        }
        let gamma = if u0.iter().any(|&v| v > 0.0) { self.source_gamma(&u0)? } else { 0.0 };
        let out = self.iterate(&u0, gamma)?;
        let solution = GridFunction::new(self.mesh.clone(), s, out.u.clone())?.with_exterior(gk);
        let l1_norm = integrate_nodes(&self.mesh, &out.u);
        let residual_summary = if out.converged { self.residual_summary(&solution) } else { None };
        Ok(SolveResult {
            solution,
            iterations: out.iterations,
            converged: out.converged,
            sup_norm_history: out.history,
            l1_norm,
            residual_summary,
            source_exponent: gamma,
            max_iterate_increase: out.max_increase,
            clamped: out.clamped,
            fixed_point_residual: out.fixed_point_residual,
            ladder: vec![],
            warnings: vec![],
        })
    }

    /// Truncation ladder for exterior data `g`; stops once consecutive
    /// `L¹` norms agree to the tolerance.
    pub fn solve_g(&self, g: &ExteriorData, ladder: &[f64]) -> Result<SolveResult> {
        let s = self.config.s;
        exterior_l1_norm(g, self.config.dim)?;
        let mut warnings = Vec::new();
        match g2_min_ratio(&self.config.model, s, g) {
            Ok(Some(r)) if r < 1.0 - 1e-9 => {
                let msg = format!("growth bound phi(g) >= d^s fails near the boundary (min ratio {r:.3e})");
                warn!("{msg}");
                warnings.push(msg);
            }
            Ok(_) => {}
            Err(e) => warnings.push(format!("growth bound on g not checked: {e}")),
        }
        let mut steps = Vec::new();
        let mut last: Option<SolveResult> = None;
        for &k in ladder {
            let r = self.solve_g_level(g, k)?;
            info!("g-ladder k = {k}: L1 = {:.6e}", r.l1_norm);
            steps.push((k, r.l1_norm));
            let stop = last
                .as_ref()
                .map(|p| (r.l1_norm - p.l1_norm).abs() <= self.config.tol.max(1e-8) * r.l1_norm.abs().max(1.0))
                .unwrap_or(false);
            last = Some(r);
            if stop {
                break;
            }
        }
        let mut out = last.expect("ladder is nonempty");
        out.ladder = steps;
        out.warnings = warnings;
        Ok(out)
    }
}

struct IterationOutcome {
    u: Vec<f64>,
    history: Vec<f64>,
    converged: bool,
    iterations: usize,
    max_increase: f64,
    clamped: usize,
    fixed_point_residual: f64,
}

/// `∫_Ω v` for nodal data, using the boundary exponent fitted from `v`.
pub fn integrate_nodes(mesh: &GradedMesh, v: &[f64]) -> f64 {
    let g = boundary_exponent_fit(mesh, v).max(-0.999);
    volume_weights(mesh, g).iter().zip(v).map(|(w, x)| w * x).sum()
}

/// `∫_Ω u` including the analytic `k h₁` part.
pub fn l1_norm(u: &GridFunction) -> f64 {
    let base = integrate_nodes(&u.mesh, &u.values);
    match u.trace_coeff {
        Some(k) => base + k * h1_mass(u.mesh.domain.dim, u.s),
        None => base,
    }
}

/// `min φ(g(d)) / d^s` over `d ∈ [1e-8, 0.1]`; `None` if `g` vanishes there.
pub fn g2_min_ratio(model: &NonlinearityModel, s: f64, g: &ExteriorData) -> Result<Option<f64>> {
    let profile = KOProfile::new(model, s)?;
    let mut min: Option<f64> = None;
    for i in 0..=56 {
        let d = 10f64.powf(-8.0 + 7.0 * i as f64 / 56.0);
        let gv = g.value(d);
        if gv <= 0.0 {
            continue;
        }
        let r = profile.phi(gv)? / d.powf(s);
        min = Some(min.map_or(r, |m: f64| m.min(r)));
    }
    Ok(min)
}

pub fn solve_k_problem(config: &SolveConfig) -> Result<SolveResult> {
    let ProblemData::Trace(k) = config.data else {
        return Err(Error::InvalidParameter("solve_k_problem needs a trace datum".into()));
    };
    Solver::new(config.clone())?.solve_k(k)
}

pub fn solve_g_problem(config: &SolveConfig) -> Result<SolveResult> {
    let ProblemData::Exterior { g, ladder } = &config.data else {
        return Err(Error::InvalidParameter("solve_g_problem needs exterior data".into()));
    };
    Solver::new(config.clone())?.solve_g(g, ladder)
}

/// `ū = μ ψ(δ^s) + λ ξ` with its measured constants.
#[derive(Debug, Clone)]
pub struct SupersolutionSpec {
    pub mu: f64,
    pub lambda: f64,
    /// Smallest `C` with `(-Δ)^s U ≥ -C f(U)` on the strip, `U = ψ(δ^s)`.
    pub c_measured: f64,
    pub delta0: f64,
    /// Upper growth exponent `M` used in `μ = max(1, C^{1/M})`.
    pub big_m: f64,
    /// `max |(-Δ)^s U|` on admissible nodes with `δ ≥ δ₀`.
    pub interior_sup: f64,
    pub ubar: GridFunction,
    pub raw_check: SupersolutionCheck,
    pub check: SupersolutionCheck,
}

/// Exterior table of `ψ(d^s)` on a log grid, extended as a power law.
fn psi_exterior(profile: &KOProfile, s: f64, scale: f64) -> Result<ExteriorData> {
    let mut d = Vec::new();
    let mut g = Vec::new();
    for i in 0..=176 {
        let di = 10f64.powf(-14.0 + i as f64 / 8.0);
        match profile.psi(di.powf(s)) {
            Ok(v) if v > 0.0 && v.is_finite() => {
                d.push(di);
                g.push(scale * v);
            }
            _ => {}
        }
    }
    ExteriorData::table(d, g, true)
}

/// `g = ψ(d^s)` on the shell `1 < |y| < r_out`, zero beyond.
pub fn psi_exterior_data(model: &NonlinearityModel, s: f64, r_out: f64) -> Result<ExteriorData> {
    if !(r_out > 1.0) {
        return Err(Error::DataInadmissible(format!("shell needs r_out > 1, got {r_out}")));
    }
    let profile = KOProfile::new(model, s)?;
    let d_end = r_out - 1.0;
    let mut d: Vec<f64> = (0..)
        .map(|i| 10f64.powf(-14.0 + i as f64 / 8.0))
        .take_while(|&x| x < d_end)
        .collect();
    d.push(d_end);
    let g = d.iter().map(|&x| profile.psi(x.powf(s))).collect::<Result<Vec<_>>>()?;
    ExteriorData::table(d, g, false)
}

pub const SUPERSOLUTION_TOL: f64 = 1e-3;
pub const DEFAULT_DELTA0: f64 = 0.2;

/// Build `ū = μψ(δ^s) + λξ` on the interval and verify
/// `(-Δ)^s ū + f(ū) ≥ -tol · max(1, f(ū))` on all admissible nodes.
pub fn build_supersolution(config: &SolveConfig) -> Result<SupersolutionSpec> {
    build_supersolution_with(config, DEFAULT_DELTA0, SUPERSOLUTION_TOL)
}

pub fn build_supersolution_with(config: &SolveConfig, delta0: f64, tol: f64) -> Result<SupersolutionSpec> {
    config.validate()?;
    let s = config.s;
    if config.dim != 1 {
        return Err(Error::InvalidParameter(
            "supersolution verification needs the pointwise operator, available on the interval only".into(),
        ));
    }
    let l1 = check_l1(&config.model, s)?;
    if l1.verdict != Verdict::Converges {
        return Err(Error::HypothesisViolation {
            t: f64::NAN,
            ratio: l1.margin,
        });
    }
    let profile = KOProfile::new(&config.model, s)?;
    let envelope = match profile.envelope() {
        Ok(e) => *e,
        Err(_) => default_envelope(&config.model)?,
    };
    let mesh = config.build_mesh()?;
    let op = FracLapOperator::new(mesh.clone(), s)?;
    let ks = KernelSet::new(1, s)?;

    let u_nodes: Vec<f64> = mesh
        .delta
        .iter()
        .map(|&d| profile.psi(d.powf(s)))
        .collect::<Result<_>>()?;
    let raw = GridFunction::new(mesh.clone(), s, u_nodes.clone())?.with_exterior(psi_exterior(&profile, s, 1.0)?);
    let raw_check = op.supersolution_inequality_check(&raw, &config.model, delta0)?;
    let c = raw_check.strip_constant;
    if !c.is_finite() {
        return Err(Error::Supersolution {
            nodes: vec![],
            worst: f64::NEG_INFINITY,
        });
    }
    let mu = c.powf(1.0 / envelope.big_m).max(1.0);
    let lambda = (mu * raw_check.max_interior_lap).max(0.0);
    info!("supersolution: C = {c:.4e}, mu = {mu:.4e}, lambda = {lambda:.4e}");

    let ubar_nodes: Vec<f64> = mesh
        .delta
        .iter()
        .zip(&u_nodes)
        .map(|(&d, &u)| mu * u + lambda * ks.torsion_at(d))
        .collect();
    let ubar = GridFunction::new(mesh.clone(), s, ubar_nodes)?.with_exterior(psi_exterior(&profile, s, mu)?);
    let check = op.supersolution_inequality_check(&ubar, &config.model, delta0)?;
    if !check.passes(tol) {
        let bad = check.violations(tol);
        return Err(Error::Supersolution {
            nodes: bad,
            worst: check.min_relative_residual,
        });
    }
    Ok(SupersolutionSpec {
        mu,
        lambda,
        c_measured: c,
        delta0,
        big_m: envelope.big_m,
        interior_sup: raw_check.max_interior_lap,
        ubar,
        raw_check,
        check,
    })
}

/// Observed behaviour of a k-sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    /// Solve refused: the source `f(k h₁)` is not integrable against `δ^s`.
    Refusal,
    /// Values on `{δ > 0.1}` settle as `k` grows.
    Stabilizing,
    /// `L¹` norms grow at least like a fixed power of `k`.
    L1Escape,
    /// The minimum over the strip `δ < 0.2` keeps growing.
    UniformBlowup,
    Unclassified,
}

impl Regime {
    pub fn matches(self, predicted: PowerRegime) -> bool {
        matches!(
            (self, predicted),
            (Regime::Refusal, PowerRegime::Nonexistence)
                | (Regime::Stabilizing, PowerRegime::LargeSolution)
                | (Regime::L1Escape, PowerRegime::L1Escape)
                | (Regime::UniformBlowup, PowerRegime::UniformBlowup)
                | (Regime::Unclassified, PowerRegime::Unclassified)
        )
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepEntry {
    pub k: f64,
    pub converged: bool,
    pub iterations: usize,
    pub l1_norm: f64,
    /// `min u` over nodes with `δ < 0.2`.
    pub strip_min: f64,
    /// `max u` over nodes with `δ > 0.1`.
    pub interior_max: f64,
    pub max_iterate_increase: f64,
    /// `max (u - k h₁)` (nonpositive up to round-off).
    pub above_kh1: f64,
    pub fixed_point_residual: f64,
    pub residual_max_relative: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepThresholds {
    /// `L¹ escape` needs `‖u_{2k}‖/‖u_k‖ ≥` this for every doubling.
    pub l1_ratio: f64,
    /// Uniform blow-up needs `strip_min(k_max)/strip_min(k_min) ≥` this.
    pub strip_growth: f64,
    /// ... and `strip_min/k` at `k_max` at least this fraction of its value
    /// at `k_min` (linear growth; absorption stronger than linear bends it down).
    pub strip_linear_fraction: f64,
    /// Stabilizing needs the last relative interior gap below this.
    pub interior_gap: f64,
}

impl Default for SweepThresholds {
    fn default() -> Self {
        Self {
            l1_ratio: 1.5,
            strip_growth: 4.0,
            strip_linear_fraction: 0.9,
            interior_gap: 0.05,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub k_list: Vec<f64>,
    pub entries: Vec<SweepEntry>,
    pub solutions: Vec<SolveResult>,
    pub refusal: Option<String>,
    /// Largest `u_{k_i} - u_{k_{i+1}}` over nodes and consecutive pairs.
    pub k_monotonicity_violation: f64,
    pub supersolution: Option<SupersolutionSpec>,
    /// Largest `u_k - ū` over nodes and `k`, when `ū` was built.
    pub above_supersolution: Option<f64>,
    pub l1_ratios: Vec<f64>,
    pub strip_min_growth: f64,
    /// `max_{δ>0.1} |u_{k_{i+1}} - u_{k_i}| / max_{δ>0.1} u_{k_{i+1}}`.
    pub interior_gaps: Vec<f64>,
    pub regime_observed: Regime,
    pub regime_predicted: Option<PowerRegime>,
}

impl SweepResult {
    pub fn agree(&self) -> Option<bool> {
        self.regime_predicted.map(|p| self.regime_observed.matches(p))
    }

    /// Largest computed solution, the best available estimate of `lim u_k`.
    pub fn limit_estimate(&self) -> Option<&SolveResult> {
        self.solutions.last()
    }
}

/// Regime from the sweep statistics. Checks run from the strongest
/// behaviour to the weakest: growth of the strip minimum (blow-up in a
/// whole strip), then growth of the mass, then settling interior values.
pub fn classify_sweep(entries: &[SweepEntry], th: &SweepThresholds) -> Regime {
    if entries.len() < 2 {
        return Regime::Unclassified;
    }
    let first = &entries[0];
    let last = &entries[entries.len() - 1];
    let prev = &entries[entries.len() - 2];
    let doublings = |a: &SweepEntry, b: &SweepEntry| (b.k / a.k).log2().max(1e-12);
    let growth = last.strip_min / first.strip_min.max(f64::MIN_POSITIVE);
    let linear = growth * first.k / last.k;
    if growth >= th.strip_growth && linear >= th.strip_linear_fraction {
        return Regime::UniformBlowup;
    }
    let l1_ok = entries
        .windows(2)
        .all(|w| (w[1].l1_norm / w[0].l1_norm).powf(1.0 / doublings(&w[0], &w[1])) >= th.l1_ratio);
    if l1_ok {
        return Regime::L1Escape;
    }
    let gap = (last.interior_max - prev.interior_max).abs() / last.interior_max.max(f64::MIN_POSITIVE);
    if gap <= th.interior_gap {
        return Regime::Stabilizing;
    }
    Regime::Unclassified
}

/// Solve for each `k` (ascending) and classify the behaviour.
pub fn sweep_k(config: &SolveConfig, k_list: &[f64]) -> Result<SweepResult> {
    sweep_k_with(config, k_list, &SweepThresholds::default())
}

pub fn sweep_k_with(config: &SolveConfig, k_list: &[f64], th: &SweepThresholds) -> Result<SweepResult> {
    if k_list.is_empty() || k_list.iter().any(|&k| !(k > 0.0)) || k_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("k_list must be positive and ascending".into()));
    }
    let predicted = match config.model.family {
        Family::Power { p } => Some(classify_power_regime(p, config.s)?),
        _ => None,
    };
    let solver = Solver::new(config.clone())?;
    let mesh = solver.mesh.clone();
    let mut result = SweepResult {
        k_list: k_list.to_vec(),
        entries: vec![],
        solutions: vec![],
        refusal: None,
        k_monotonicity_violation: 0.0,
        supersolution: None,
        above_supersolution: None,
        l1_ratios: vec![],
        strip_min_growth: f64::NAN,
        interior_gaps: vec![],
        regime_observed: Regime::Unclassified,
        regime_predicted: predicted,
    };
    for &k in k_list {
        match solver.solve_k(k) {
            Ok(r) => result.solutions.push(r),
            Err(e @ Error::Integrability { .. }) => {
                result.refusal = Some(e.to_string());
                result.regime_observed = Regime::Refusal;
                return Ok(result);
            }
            Err(e) => return Err(e),
        }
    }
    let strip = mesh.strip_indices(0.2);
    let interior: Vec<usize> = (0..mesh.len()).filter(|&j| mesh.delta[j] > 0.1).collect();
    let h1: Vec<f64> = mesh.delta.iter().map(|&d| h1_profile(config.s, d)).collect();
    for (r, &k) in result.solutions.iter().zip(k_list) {
        let u = r.totals();
        result.entries.push(SweepEntry {
            k,
            converged: r.converged,
            iterations: r.iterations,
            l1_norm: r.l1_norm,
            strip_min: strip.iter().map(|&j| u[j]).fold(f64::INFINITY, f64::min),
            interior_max: interior.iter().map(|&j| u[j]).fold(0.0, f64::max),
            max_iterate_increase: r.max_iterate_increase,
            above_kh1: (0..u.len()).map(|j| u[j] - k * h1[j]).fold(f64::NEG_INFINITY, f64::max),
            fixed_point_residual: r.fixed_point_residual,
            residual_max_relative: r.residual_summary.as_ref().map(|s| s.max_relative),
        });
    }
    for w in result.solutions.windows(2) {
        let (a, b) = (w[0].totals(), w[1].totals());
        let v = (0..a.len()).map(|j| a[j] - b[j]).fold(f64::NEG_INFINITY, f64::max);
        result.k_monotonicity_violation = result.k_monotonicity_violation.max(v);
        let num = interior.iter().map(|&j| (b[j] - a[j]).abs()).fold(0.0, f64::max);
        let den = interior.iter().map(|&j| b[j]).fold(0.0, f64::max);
        result.interior_gaps.push(num / den.max(f64::MIN_POSITIVE));
    }
    result.l1_ratios = result.entries.windows(2).map(|w| w[1].l1_norm / w[0].l1_norm).collect();
    if let (Some(a), Some(b)) = (result.entries.first(), result.entries.last()) {
        result.strip_min_growth = b.strip_min / a.strip_min;
    }
    result.regime_observed = classify_sweep(&result.entries, th);

    if config.dim == 1 && check_l1(&config.model, config.s)?.verdict == Verdict::Converges {
        let mut sup_cfg = config.clone();
        sup_cfg.data = ProblemData::Trace(0.0);
        match build_supersolution(&sup_cfg) {
            Ok(spec) => {
                let ub = spec.ubar.totals();
                let worst = result
                    .solutions
                    .iter()
                    .map(|r| {
                        let u = r.totals();
                        (0..u.len()).map(|j| u[j] - ub[j]).fold(f64::NEG_INFINITY, f64::max)
                    })
                    .fold(f64::NEG_INFINITY, f64::max);
                result.above_supersolution = Some(worst);
                result.supersolution = Some(spec);
            }
            Err(e) => warn!("supersolution not available: {e}"),
        }
    }
    Ok(result)
}
