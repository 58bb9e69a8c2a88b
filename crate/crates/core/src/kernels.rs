//! Closed-form kernels of the unit ball (and interval): Green function,
//! Poisson kernel, torsion function and the unit-trace boundary profile
//! `h₁`, plus the product-integration Green operator on a graded mesh.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::mesh::{DomainKind, ExteriorData, GradedMesh, GridFunction};
use crate::quad::{gl16, integrate_endpoint_singular_n, integrate_half_line};
use crate::special::inc_beta_c;

/// `𝒜(N,s) = 4^s s Γ(N/2+s) / (π^{N/2} Γ(1-s))`.
pub fn frac_lap_constant(dim: usize, s: f64) -> f64 {
    let n = dim as f64;
    4f64.powf(s) * s * gamma(n / 2.0 + s) / (PI.powf(n / 2.0) * gamma(1.0 - s))
}

/// `κ(N,s) = Γ(N/2) / (4^s π^{N/2} Γ(s)²)`.
pub fn green_constant(dim: usize, s: f64) -> f64 {
    let n = dim as f64;
    gamma(n / 2.0) / (4f64.powf(s) * PI.powf(n / 2.0) * gamma(s).powi(2))
}

/// `Γ(N/2) sin(πs) / π^{N/2+1}`.
pub fn poisson_constant(dim: usize, s: f64) -> f64 {
    let n = dim as f64;
    gamma(n / 2.0) * (PI * s).sin() / PI.powf(n / 2.0 + 1.0)
}

/// `γ_{N,s} = Γ(N/2) / (4^s Γ(N/2+s) Γ(1+s))`.
pub fn torsion_constant(dim: usize, s: f64) -> f64 {
    let n = dim as f64;
    gamma(n / 2.0) / (4f64.powf(s) * gamma(n / 2.0 + s) * gamma(1.0 + s))
}

/// Surface measure of the unit sphere `S^k ⊂ ℝ^{k+1}`.
pub fn sphere_area(k: usize) -> f64 {
    let h = (k as f64 + 1.0) / 2.0;
    2.0 * PI.powf(h) / gamma(h)
}

/// `h₁ = 2^{1-s} (1-|x|²)^{s-1}` written in terms of `δ = 1 - |x|`;
/// `δ^{1-s} h₁ → 1` at the boundary.
pub fn h1_profile(s: f64, delta: f64) -> f64 {
    2f64.powf(1.0 - s) * (delta * (2.0 - delta)).powf(s - 1.0)
}

/// A point of the one-dimensional computational segment (the interval, or
/// the radius of the ball) with its boundary distance stored exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pt {
    pub x: f64,
    pub d: f64,
}

impl Pt {
    pub fn new(x: f64, d: f64) -> Self {
        Self { x, d }
    }

    pub fn from_x(x: f64) -> Self {
        Self { x, d: 1.0 - x.abs() }
    }
}

/// `|a - b|` computed from the boundary distances when both points sit on
/// the same side near the boundary.
pub fn seg_dist(a: Pt, b: Pt) -> f64 {
    if a.x * b.x > 0.0 && a.x.abs() > 0.5 && b.x.abs() > 0.5 {
        (a.d - b.d).abs()
    } else {
        (a.x - b.x).abs()
    }
}

/// Constants and kernels for a given dimension and order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSet {
    pub s: f64,
    pub dim: usize,
    pub kappa: f64,
    pub poisson_c: f64,
    pub torsion_gamma: f64,
    pub frac_lap_c: f64,
    /// Factor `2^{1-s}` making the singular trace of `h₁` equal to one.
    pub h1_norm: f64,
}

impl KernelSet {
    pub fn new(dim: usize, s: f64) -> Result<Self> {
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::InvalidParameter(format!("s must lie in (0, 1), got {s}")));
        }
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be >= 1".into()));
        }
        Ok(Self {
            s,
            dim,
            kappa: green_constant(dim, s),
            poisson_c: poisson_constant(dim, s),
            torsion_gamma: torsion_constant(dim, s),
            frac_lap_c: frac_lap_constant(dim, s),
            h1_norm: 2f64.powf(1.0 - s),
        })
    }

    fn log_branch(&self) -> bool {
        self.dim == 1 && (self.s - 0.5).abs() < 1e-12
    }

    /// Green function from `ax = 1-|x|²`, `ay = 1-|y|²` and `dist = |x-y|`.
    pub fn green_core(&self, ax: f64, ay: f64, dist: f64) -> f64 {
        let r0 = ax * ay / (dist * dist);
        if self.log_branch() {
            return r0.sqrt().asinh() / PI;
        }
        let zc = 1.0 / (1.0 + r0);
        let z = r0 * zc;
        let n = self.dim as f64;
        self.kappa * dist.powf(2.0 * self.s - n) * inc_beta_c(z, zc, self.s, n / 2.0 - self.s)
    }

    /// `G(x, y)` for points of the open ball (`x ≠ y`).
    pub fn green(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        self.check_point(y)?;
        let (nx, ny) = (norm2(x), norm2(y));
        if nx >= 1.0 || ny >= 1.0 {
            return Err(Error::InvalidParameter("green needs both points inside the unit ball".into()));
        }
        let dist = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        if dist == 0.0 {
            return Err(Error::InvalidParameter("green is singular at x = y".into()));
        }
        Ok(self.green_core(1.0 - nx, 1.0 - ny, dist))
    }

    /// Poisson kernel `P(x, y)` for `|x| < 1 < |y|`.
    pub fn poisson(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        self.check_point(y)?;
        let (nx, ny) = (norm2(x), norm2(y));
        if nx >= 1.0 || ny <= 1.0 {
            return Err(Error::InvalidParameter("poisson needs |x| < 1 < |y|".into()));
        }
        let dist = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        Ok(self.poisson_c * ((1.0 - nx) / (ny - 1.0)).powf(self.s) * dist.powi(-(self.dim as i32)))
    }

    /// Torsion function `γ_{N,s} (1-|x|²)^s` at boundary distance `δ`.
    pub fn torsion_at(&self, delta: f64) -> f64 {
        self.torsion_gamma * (delta * (2.0 - delta)).powf(self.s)
    }

    pub fn torsion(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        let r = norm2(x).sqrt();
        if r >= 1.0 {
            return Ok(0.0);
        }
        Ok(self.torsion_at(1.0 - r))
    }

    pub fn h1_at(&self, delta: f64) -> f64 {
        h1_profile(self.s, delta)
    }

    pub fn h1(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        let r = norm2(x).sqrt();
        if r >= 1.0 {
            return Err(Error::InvalidParameter("h1 is evaluated inside the domain".into()));
        }
        Ok(self.h1_at(1.0 - r))
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::InvalidParameter(format!(
                "point has {} coordinates, kernel dimension is {}",
                x.len(),
                self.dim
            )));
        }
        Ok(())
    }

    /// `∫_0^π g(|x-y|) sin^{N-2}θ dθ` where `|x| = r`, `|y| = ρ`,
    /// `|x-y|² = (r-ρ)² + 4rρ sin²(θ/2)` and `diff = |r-ρ|`.
    fn angular<G: Fn(f64) -> f64>(&self, r: f64, rho: f64, diff: f64, g: G) -> f64 {
        let (xs, ws) = gl16();
        let k = self.dim as i32 - 2;
        let rr = r * rho;
        let panel = |a: f64, b: f64| -> f64 {
            let c = 0.5 * (a + b);
            let h = 0.5 * (b - a);
            let mut acc = 0.0;
            for (x, w) in xs.iter().zip(ws) {
                let th = c + h * x;
                let sh = (0.5 * th).sin();
                let dist = (diff * diff + 4.0 * rr * sh * sh).sqrt();
                acc += w * g(dist) * th.sin().powi(k);
            }
            acc * h
        };
        if rr <= 0.0 {
            return panel(0.0, PI);
        }
        let scale = diff / rr.sqrt();
        let stop = (0.05 * scale).min(0.5 * PI);
        let mut total = panel(0.5 * PI, PI);
        let mut hi = 0.5 * PI;
        while hi > stop {
            let lo = (0.2 * hi).max(stop);
            total += panel(lo, hi);
            hi = lo;
        }
        total + panel(0.0, hi)
    }

    /// Radial Green kernel `K(r, ρ) = ρ^{N-1} ∫_{S^{N-1}} G(r e₁, ρ ω) dω`.
    pub fn radial_green(&self, r: Pt, rho: Pt, diff: f64) -> f64 {
        let ax = r.d * (2.0 - r.d);
        let ay = rho.d * (2.0 - rho.d);
        let n = self.dim;
        let ang = self.angular(r.x, rho.x, diff, |dist| self.green_core(ax, ay, dist));
        rho.x.powi(n as i32 - 1) * sphere_area(n - 2) * ang
    }

    /// Kernel of the Green operator on the computational segment.
    pub fn segment_green(&self, kind: DomainKind, x: Pt, y: Pt, dist: f64) -> f64 {
        match kind {
            DomainKind::Interval => self.green_core(x.d * (2.0 - x.d), y.d * (2.0 - y.d), dist),
            DomainKind::RadialBall => self.radial_green(x, y, dist),
        }
    }

    /// Exterior data weighted by the Poisson kernel at `x`, for data at
    /// distance `d` outside the boundary (both sides for the interval).
    fn poisson_density(&self, kind: DomainKind, x: Pt, d: f64) -> f64 {
        let ax = x.d * (2.0 - x.d);
        let w = (ax / (d * (2.0 + d))).powf(self.s);
        match kind {
            DomainKind::Interval => {
                let (dr, dl) = side_distances(x);
                self.poisson_c * w * (1.0 / (dr + d) + 1.0 / (dl + d))
            }
            DomainKind::RadialBall => {
                let rho = 1.0 + d;
                let n = self.dim;
                let ang = self.angular(x.x, rho, d + x.d, |dist| dist.powi(-(n as i32)));
                self.poisson_c * w * rho.powi(n as i32 - 1) * sphere_area(n - 2) * ang
            }
        }
    }
}

fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// Distances from an interval point to the right and left boundary points.
pub fn side_distances(x: Pt) -> (f64, f64) {
    let dr = if x.x > 0.0 { x.d } else { 1.0 - x.x };
    let dl = if x.x < 0.0 { x.d } else { 1.0 + x.x };
    (dr, dl)
}

/// Check `∫ |g| d^{-s} min(1, d^{-N-s})` is finite.
pub fn check_exterior_admissible(data: &ExteriorData, dim: usize, s: f64) -> Result<f64> {
    if data.is_zero() {
        return Ok(0.0);
    }
    let n = dim as f64;
    let v = integrate_half_line(
        |d| data.value(d).abs() * d.powf(-s) * if d > 1.0 { d.powf(-n - s) } else { 1.0 },
        &data.breakpoints(),
        data.support_end(),
    );
    if !v.is_finite() {
        return Err(Error::DataInadmissible(format!(
            "weighted integral of {} diverges",
            data.describe()
        )));
    }
    Ok(v)
}

/// `∫_{CΩ} |g|`, or a data error when it diverges.
pub fn exterior_l1_norm(data: &ExteriorData, dim: usize) -> Result<f64> {
    if data.is_zero() {
        return Ok(0.0);
    }
    let (area, k) = if dim == 1 { (2.0, 0) } else { (sphere_area(dim - 1), dim as i32 - 1) };
    let v = integrate_half_line(
        |d| data.value(d).abs() * (1.0 + d).powi(k),
        &data.breakpoints(),
        data.support_end(),
    );
    if !v.is_finite() {
        return Err(Error::DataInadmissible(format!("{} is not integrable", data.describe())));
    }
    Ok(area * v)
}

/// `∫_{CΩ} P(x, y) g(y) dy` at a point of the computational segment.
pub fn poisson_apply(ks: &KernelSet, kind: DomainKind, data: &ExteriorData, x: Pt) -> Result<f64> {
    if data.is_zero() {
        return Ok(0.0);
    }
    let v = integrate_half_line(
        |d| data.value(d) * ks.poisson_density(kind, x, d),
        &data.breakpoints(),
        data.support_end(),
    );
    if !v.is_finite() {
        return Err(Error::DataInadmissible(format!(
            "Poisson integral of {} diverges",
            data.describe()
        )));
    }
    Ok(v)
}

/// [`poisson_apply`] at every node of `mesh`.
pub fn poisson_apply_nodes(ks: &KernelSet, mesh: &GradedMesh, data: &ExteriorData) -> Result<Vec<f64>> {
    check_exterior_admissible(data, ks.dim, ks.s)?;
    (0..mesh.len())
        .into_par_iter()
        .map(|j| poisson_apply(ks, mesh.domain.kind, data, Pt::new(mesh.x[j], mesh.delta[j])))
        .collect()
}

/// Fitted boundary exponent of nodal data: `ln(v_b/v_{b'}) / ln(δ_b/δ_{b'})`
/// from the two outermost nodes (the smaller of both sides on the interval).
/// Returns 0 when the values vanish or change sign there.
pub fn boundary_exponent_fit(mesh: &GradedMesh, v: &[f64]) -> f64 {
    let n = mesh.len();
    let fit = |a: usize, b: usize| -> f64 {
        let (va, vb) = (v[a], v[b]);
        if va == 0.0 || vb == 0.0 || va.signum() != vb.signum() {
            return 0.0;
        }
        (va / vb).ln() / (mesh.delta[a] / mesh.delta[b]).ln()
    };
    let right = fit(n - 1, n - 2);
    match mesh.domain.kind {
        DomainKind::Interval => right.min(fit(0, 1)),
        DomainKind::RadialBall => right,
    }
}

/// Smallest admissible value of `s + γ` for a source `~ δ^γ`.
pub const INTEGRABILITY_MARGIN: f64 = 0.02;

/// Dense product-integration matrix `W` with `(W v)_j ≈ ∫_Ω G(x_j, y) v(y) dy`.
///
/// Between nodes the source is represented as `δ^γ` times the linear
/// interpolant of `v_i / δ_i^γ`; in the end cells it is `v_b (δ/δ_b)^γ`.
/// With `γ` fixed the map is linear and its entries are nonnegative.
#[derive(Debug, Clone)]
pub struct GreenOperator {
    pub ks: KernelSet,
    pub mesh: Arc<GradedMesh>,
    pub gamma: f64,
    pub matrix: DMatrix<f64>,
}

#[derive(Clone, Copy)]
enum Param {
    // Linear in δ on one side: x = side (1 - δ).
    Delta(f64),
    // Linear in x (interval cell through the origin).
    X,
}

fn param_of(kind: DomainKind, a: Pt, b: Pt) -> Param {
    match kind {
        DomainKind::RadialBall => Param::Delta(1.0),
        DomainKind::Interval => {
            if a.x >= 0.0 && b.x >= 0.0 {
                Param::Delta(1.0)
            } else if a.x <= 0.0 && b.x <= 0.0 {
                Param::Delta(-1.0)
            } else {
                Param::X
            }
        }
    }
}

fn pt_delta(side: f64, d: f64) -> Pt {
    Pt::new(side * (1.0 - d), d)
}

/// Quadrature over the piece `[a, b]` of `h(y, |y - target|)`, split at the
/// midpoint when an end is singular (the target itself, or the boundary).
fn piece<const K: usize, H: Fn(Pt, f64) -> [f64; K]>(
    kind: DomainKind,
    a: Pt,
    b: Pt,
    sing_a: bool,
    sing_b: bool,
    target: Pt,
    h: &H,
) -> [f64; K] {
    let param = param_of(kind, a, b);
    let mid = match param {
        Param::Delta(side) => pt_delta(side, 0.5 * (a.d + b.d)),
        Param::X => Pt::from_x(0.5 * (a.x + b.x)),
    };
    let mut out = [0.0; K];
    let mut add = |v: [f64; K]| {
        for k in 0..K {
            out[k] += v[k];
        }
    };
    if !sing_a && !sing_b {
        add(smooth(param, a, b, target, h));
        return out;
    }
    for (e, o, sing) in [(a, mid, sing_a), (b, mid, sing_b)] {
        if !sing {
            add(smooth(param, e, o, target, h));
            continue;
        }
        let is_target = e == target;
        let len = match param {
            Param::Delta(_) => (o.d - e.d).abs(),
            Param::X => (o.x - e.x).abs(),
        };
        let v = integrate_endpoint_singular_n(
            |t| {
                let y = match param {
                    Param::Delta(side) => pt_delta(side, e.d + t * (o.d - e.d).signum()),
                    Param::X => Pt::from_x(e.x + t * (o.x - e.x).signum()),
                };
                let dist = if is_target { t } else { seg_dist(target, y) };
                h(y, dist)
            },
            len,
        );
        add(v);
    }
    out
}

fn smooth<const K: usize, H: Fn(Pt, f64) -> [f64; K]>(param: Param, a: Pt, b: Pt, target: Pt, h: &H) -> [f64; K] {
    let (xs, ws) = gl16();
    let mut out = [0.0; K];
    let mut acc = |y: Pt, w: f64| {
        let v = h(y, seg_dist(target, y));
        for k in 0..K {
            out[k] += w * v[k];
        }
    };
    match param {
        Param::Delta(side) => {
            let (lo, hi) = (a.d.min(b.d), a.d.max(b.d));
            if lo > 0.0 && hi / lo > 1.5 {
                let (la, lb) = (lo.ln(), hi.ln());
                let (c, hw) = (0.5 * (la + lb), 0.5 * (lb - la));
                for (x, w) in xs.iter().zip(ws) {
                    let d = (c + hw * x).exp();
                    acc(pt_delta(side, d), w * hw * d);
                }
            } else {
                let (c, hw) = (0.5 * (lo + hi), 0.5 * (hi - lo));
                for (x, w) in xs.iter().zip(ws) {
                    acc(pt_delta(side, c + hw * x), w * hw);
                }
            }
        }
        Param::X => {
            let (c, hw) = (0.5 * (a.x + b.x), 0.5 * (b.x - a.x).abs());
            for (x, w) in xs.iter().zip(ws) {
                acc(Pt::from_x(c + hw * x), w * hw);
            }
        }
    }
    out
}

// Cells whose end distances differ by more than this factor (in log) use
// hats linear in `ln δ`.
const LOG_HAT_MIN: f64 = 0.405;

/// Cell end points: the left end (`-1`, or the ball centre), the nodes, and `1`.
pub(crate) fn cell_points(mesh: &GradedMesh) -> Vec<Pt> {
    let mut pts = Vec::with_capacity(mesh.len() + 2);
    pts.push(match mesh.domain.kind {
        DomainKind::Interval => Pt::new(-1.0, 0.0),
        DomainKind::RadialBall => Pt::new(0.0, 1.0),
    });
    for j in 0..mesh.len() {
        pts.push(Pt::new(mesh.x[j], mesh.delta[j]));
    }
    pts.push(Pt::new(1.0, 0.0));
    pts
}

impl GreenOperator {
    /// Assemble `W` for sources behaving like `δ^γ` at the boundary.
    pub fn assemble(ks: &KernelSet, mesh: Arc<GradedMesh>, gamma: f64) -> Result<Self> {
        check_integrability(ks.s, gamma)?;
        if mesh.domain.kind == DomainKind::RadialBall && mesh.domain.dim < 2 {
            return Err(Error::InvalidParameter("radial ball needs N >= 2".into()));
        }
        if mesh.domain.dim != ks.dim {
            return Err(Error::InvalidParameter("kernel and mesh dimensions differ".into()));
        }
        let n = mesh.len();
        let rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|j| row_weights(ks, &mesh, gamma, Pt::new(mesh.x[j], mesh.delta[j]), Some(j)))
            .collect();
        let matrix = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        Ok(Self {
            ks: *ks,
            mesh,
            gamma,
            matrix,
        })
    }

    /// `W v`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let x = nalgebra::DVector::from_column_slice(v);
        (&self.matrix * x).iter().copied().collect()
    }

    /// Weights for an arbitrary point `x` of the computational segment.
    pub fn weights_at(&self, x: Pt) -> Vec<f64> {
        let node = (0..self.mesh.len()).find(|&j| self.mesh.x[j] == x.x);
        row_weights(&self.ks, &self.mesh, self.gamma, x, node)
    }
}

/// Refuse sources `~ δ^γ` with `s + γ <= -1 + margin`.
pub fn check_integrability(s: f64, gamma: f64) -> Result<()> {
    if !(s + gamma > -1.0 + INTEGRABILITY_MARGIN) {
        return Err(Error::Integrability {
            exponent: gamma,
            weighted: s + gamma,
        });
    }
    Ok(())
}

fn row_weights(ks: &KernelSet, mesh: &GradedMesh, gamma: f64, target: Pt, node: Option<usize>) -> Vec<f64> {
    let kind = mesh.domain.kind;
    cell_weights(mesh, gamma, Some((target, node)), |y: Pt, dist: f64| {
        ks.segment_green(kind, target, y, dist)
    })
}

/// Weights `w_i = ∫ b_i(y) k(y, |y - x|) dy` of the weighted hat basis,
/// with the cells split at the target `x` when one is given.
fn cell_weights<K: Fn(Pt, f64) -> f64>(
    mesh: &GradedMesh,
    gamma: f64,
    target: Option<(Pt, Option<usize>)>,
    kern: K,
) -> Vec<f64> {
    let kind = mesh.domain.kind;
    let pts = cell_points(mesh);
    let n = mesh.len();
    let mut row = vec![0.0; n];
    let (target, node, split) = match target {
        Some((t, node)) => (t, node, true),
        None => (Pt::new(f64::NAN, f64::NAN), None, false),
    };
    for c in 0..=n {
        let (a, b) = (pts[c], pts[c + 1]);
        // Nodes carrying this cell: (index, δ) for each end that is a node.
        let na = if c >= 1 { Some(c - 1) } else { None };
        let nb = if c < n { Some(c) } else { None };
        let basis = |y: Pt| -> [f64; 2] {
            match (na, nb) {
                (Some(i), Some(k)) => {
                    let t = match param_of(kind, a, b) {
                        Param::Delta(_) if a.d > 0.0 && b.d > 0.0 && (a.d / b.d).ln().abs() > LOG_HAT_MIN => {
                            (y.d / a.d).ln() / (b.d / a.d).ln()
                        }
                        Param::Delta(_) => (y.d - a.d) / (b.d - a.d),
                        Param::X => (y.x - a.x) / (b.x - a.x),
                    };
                    let wa = (y.d / mesh.delta[i]).powf(gamma);
                    let wb = (y.d / mesh.delta[k]).powf(gamma);
                    [wa * (1.0 - t), wb * t]
                }
                (Some(i), None) => [(y.d / mesh.delta[i]).powf(gamma), 0.0],
                (None, Some(k)) => [0.0, (y.d / mesh.delta[k]).powf(gamma)],
                (None, None) => [0.0, 0.0],
            }
        };
        let h = |y: Pt, dist: f64| -> [f64; 2] {
            let g = kern(y, dist);
            let bw = basis(y);
            [g * bw[0], g * bw[1]]
        };
        let inside = split && node.is_none() && target.x > a.x && target.x < b.x;
        let v = if inside {
            let l = piece(kind, a, target, a.d == 0.0, true, target, &h);
            let r = piece(kind, target, b, true, b.d == 0.0, target, &h);
            [l[0] + r[0], l[1] + r[1]]
        } else {
            let sa = a.d == 0.0 || node.map(|j| j + 1 == c).unwrap_or(false);
            let sb = b.d == 0.0 || node.map(|j| j == c).unwrap_or(false);
            piece(kind, a, b, sa, sb, target, &h)
        };
        if let Some(i) = na {
            row[i] += v[0];
        }
        if let Some(k) = nb {
            row[k] += v[1];
        }
    }
    row
}

/// Quadrature weights for `∫_Ω v` (the ball measure includes
/// `|S^{N-1}| r^{N-1}`), for nodal data behaving like `δ^γ` at the boundary.
pub fn volume_weights(mesh: &GradedMesh, gamma: f64) -> Vec<f64> {
    let dim = mesh.domain.dim;
    match mesh.domain.kind {
        DomainKind::Interval => cell_weights(mesh, gamma, None, |_, _| 1.0),
        DomainKind::RadialBall => {
            let area = sphere_area(dim - 1);
            cell_weights(mesh, gamma, None, |y: Pt, _| area * y.x.powi(dim as i32 - 1))
        }
    }
}

/// `∫_Ω h₁` in closed form.
pub fn h1_mass(dim: usize, s: f64) -> f64 {
    let n = dim as f64;
    let b = crate::special::beta(n / 2.0, s);
    if dim == 1 {
        2f64.powf(1.0 - s) * b
    } else {
        2f64.powf(1.0 - s) * sphere_area(dim - 1) * 0.5 * b
    }
}

/// `∫_Ω G(x, y) source(y) dy` at every node, with the boundary behaviour of
/// the source fitted from its outermost nodes.
pub fn green_apply(ks: &KernelSet, source: &GridFunction) -> Result<Vec<f64>> {
    let v = source.totals();
    if v.iter().all(|&x| x == 0.0) {
        return Ok(vec![0.0; v.len()]);
    }
    let gamma = boundary_exponent_fit(&source.mesh, &v);
    let op = GreenOperator::assemble(ks, source.mesh.clone(), gamma)?;
    Ok(op.apply(&v))
}
