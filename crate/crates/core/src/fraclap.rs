//! Pointwise fractional Laplacian of grid functions on the interval.
//!
//! At a node `x_j` the principal-value integral is split into the two
//! cells around `x_j` (quadratic Taylor subtraction, integrated in closed
//! form), the remaining cells of the mesh (Gauss–Legendre on the
//! piecewise model of `u`), the two boundary cells (power model
//! `v_b (δ/δ_b)^γ`), and the exterior.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{cell_points, frac_lap_constant, seg_dist, side_distances, Pt};
use crate::mesh::{DomainKind, GradedMesh, GridFunction};
use crate::nonlinearity::NonlinearityModel;
use crate::quad::{gl16, integrate_endpoint_singular, integrate_half_line};

#[derive(Debug, Clone)]
pub struct FracLapOperator {
    pub s: f64,
    pub mesh: Arc<GradedMesh>,
    pub a_const: f64,
}

/// Boundary model on one side: `v_b (δ/δ_b)^γ`, or the linear
/// extrapolation of the two outermost values when no power fits.
#[derive(Debug, Clone, Copy)]
enum EdgeModel {
    Power(f64),
    Linear,
}

impl EdgeModel {
    fn far_gamma(self) -> f64 {
        match self {
            EdgeModel::Power(g) => g,
            EdgeModel::Linear => 0.0,
        }
    }
}

fn edge_model(v: &[f64], d: &[f64], outer: usize, inner: usize) -> Result<EdgeModel> {
    let (a, b) = (v[outer], v[inner]);
    if a == 0.0 || b == 0.0 || a.signum() != b.signum() {
        return Ok(EdgeModel::Linear);
    }
    let g = (a / b).ln() / (d[outer] / d[inner]).ln();
    if g <= -0.999 {
        return Err(Error::Integrability {
            exponent: g,
            weighted: g,
        });
    }
    Ok(EdgeModel::Power(g))
}

fn lagrange3(p: [f64; 3], v: [f64; 3], x: f64) -> f64 {
    let l0 = (x - p[1]) * (x - p[2]) / ((p[0] - p[1]) * (p[0] - p[2]));
    let l1 = (x - p[0]) * (x - p[2]) / ((p[1] - p[0]) * (p[1] - p[2]));
    let l2 = (x - p[0]) * (x - p[1]) / ((p[2] - p[0]) * (p[2] - p[1]));
    v[0] * l0 + v[1] * l1 + v[2] * l2
}

/// `w(t) = δ^γ Q(δ)` with `δ = δ_j - σ t` and `Q` the quadratic through
/// the three stencil values of `v/δ^γ`; `plain` is a quadratic in `t`.
struct LocalModel {
    d1: f64,
    d2: f64,
    weighted: Option<(f64, f64, f64, [f64; 4])>,
}

impl LocalModel {
    fn plain(d1: f64, d2: f64) -> Self {
        Self { d1, d2, weighted: None }
    }

    fn weighted(g: f64, side: f64, d: [f64; 3], v: [f64; 3]) -> Self {
        let c: Vec<f64> = (0..3).map(|i| v[i] / d[i].powf(g)).collect();
        // Q(δ) = c0 + c1 (δ - δ_j) + c2 (δ - δ_j)^2 through the three points.
        let (h0, h2) = (d[0] - d[1], d[2] - d[1]);
        let (f0, f2) = ((c[0] - c[1]) / h0, (c[2] - c[1]) / h2);
        let c2 = (f2 - f0) / (h2 - h0);
        let c1 = f0 - c2 * h0;
        let dj = d[1];
        let q = c[1];
        let w1 = g * dj.powf(g - 1.0) * q + dj.powf(g) * c1;
        let w2 = g * (g - 1.0) * dj.powf(g - 2.0) * q + 2.0 * g * dj.powf(g - 1.0) * c1 + 2.0 * dj.powf(g) * c2;
        Self {
            d1: -side * w1,
            d2: w2,
            weighted: Some((g, side, dj, [q, c1, c2, v[1]])),
        }
    }

    /// `∫_{lo}^{hi} R(t) |t|^{-e} dt` with `R = w - w(0) - d1 t - d2 t²/2`.
    fn remainder(&self, lo: f64, hi: f64, e: f64) -> f64 {
        let Some((g, side, dj, [q, c1, c2, vj])) = self.weighted else {
            return 0.0;
        };
        let r = |t: f64| {
            let dd = -side * t;
            let w = (dj + dd).powf(g) * (q + c1 * dd + c2 * dd * dd);
            (w - vj - self.d1 * t - 0.5 * self.d2 * t * t) * t.abs().powf(-e)
        };
        let (xs, ws) = gl16();
        let mut acc = 0.0;
        for (len, sign) in [(-lo, -1.0), (hi, 1.0)] {
            let mut part = 0.0;
            for (x, w) in xs.iter().zip(ws) {
                part += w * r(sign * 0.5 * len * (1.0 + x));
            }
            acc += 0.5 * len * part;
        }
        acc
    }
}

impl FracLapOperator {
    pub fn new(mesh: Arc<GradedMesh>, s: f64) -> Result<Self> {
        if mesh.domain.kind != DomainKind::Interval {
            return Err(Error::InvalidParameter(
                "pointwise fractional Laplacian is implemented on the interval only".into(),
            ));
        }
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::InvalidParameter(format!("s must lie in (0, 1), got {s}")));
        }
        Ok(Self {
            s,
            mesh,
            a_const: frac_lap_constant(1, s),
        })
    }

    fn check_compatible(&self, u: &GridFunction) -> Result<()> {
        if !Arc::ptr_eq(&self.mesh, &u.mesh) && *self.mesh != *u.mesh {
            return Err(Error::InvalidParameter("grid function lives on a different mesh".into()));
        }
        if (u.s - self.s).abs() > 1e-14 && u.trace_coeff.is_some() {
            return Err(Error::InvalidParameter("trace profile order differs from the operator order".into()));
        }
        Ok(())
    }

    /// `(-Δ)^s u` at node `j`. The `k h₁` part of a split function is
    /// s-harmonic and contributes nothing.
    pub fn apply(&self, u: &GridFunction, j: usize) -> Result<f64> {
        self.check_compatible(u)?;
        let mesh = &*self.mesh;
        if j >= mesh.len() {
            return Err(Error::InvalidParameter(format!("node {j} outside the mesh")));
        }
        if !mesh.is_admissible(j) {
            return Err(Error::Proximity {
                delta: mesh.delta[j],
                min_delta: mesh.min_admissible_delta(),
            });
        }
        let v = &u.values;
        let n = mesh.len();
        let s = self.s;
        let e = 1.0 + 2.0 * s;
        let pts = cell_points(mesh);
        let target = pts[j + 1];
        let vj = v[j];
        let left = edge_model(v, &mesh.delta, 0, 1)?;
        let right = edge_model(v, &mesh.delta, n - 1, n - 2)?;

        // Two cells around x_j: Taylor subtraction of the local model
        // w(t) ≈ u(x_j + t), integrated in closed form up to second order,
        // plus the cubic remainder by quadrature.
        let a = seg_dist(pts[j], target);
        let b = seg_dist(target, pts[j + 2]);
        let side = mesh.side(j);
        let weighted = match (if side > 0.0 { right } else { left }, mesh.x[j].abs() >= 0.5) {
            (EdgeModel::Power(g), true) if g != 0.0 && pts[j].x * pts[j + 2].x > 0.0 => Some(g),
            _ => None,
        };
        let local = match weighted {
            None => {
                let (vm, vp) = (v[j - 1], v[j + 1]);
                let q1 = -b / (a * (a + b)) * vm + (b - a) / (a * b) * vj + a / (b * (a + b)) * vp;
                let q2 = 2.0 * (vm / (a * (a + b)) - vj / (a * b) + vp / (b * (a + b)));
                LocalModel::plain(q1, q2)
            }
            Some(g) => LocalModel::weighted(
                g,
                side,
                [mesh.delta[j - 1], mesh.delta[j], mesh.delta[j + 1]],
                [v[j - 1], vj, v[j + 1]],
            ),
        };
        let s1 = if (2.0 * s - 1.0).abs() < 1e-12 {
            (b / a).ln()
        } else {
            (b.powf(1.0 - 2.0 * s) - a.powf(1.0 - 2.0 * s)) / (1.0 - 2.0 * s)
        };
        let s2 = (a.powf(2.0 - 2.0 * s) + b.powf(2.0 - 2.0 * s)) / (2.0 - 2.0 * s);
        let mut total = -local.d1 * s1 - 0.5 * local.d2 * s2 - local.remainder(-a, b, e);

        // Interior cells away from x_j: quadratic interpolation through the
        // cell's nodes and the next node toward x_j, of v/δ^γ near the
        // boundary and of v itself in the middle of the interval.
        let (xs, ws) = gl16();
        for c in 1..n {
            if c == j || c == j + 1 {
                continue;
            }
            let (pa, pb) = (pts[c], pts[c + 1]);
            let third = if c < j { c + 1 } else { c - 2 };
            let stencil = [c - 1, c, third];
            let same_side = pa.x * pb.x > 0.0 || (pa.x == 0.0 || pb.x == 0.0);
            let side = if pa.x + pb.x > 0.0 { 1.0 } else { -1.0 };
            let g = if stencil.iter().all(|&i| mesh.x[i].abs() >= 0.5) {
                if side > 0.0 { right.far_gamma() } else { left.far_gamma() }
            } else {
                0.0
            };
            let model = |y: Pt| -> f64 {
                if g == 0.0 {
                    let nodes = stencil.map(|i| mesh.x[i]);
                    lagrange3(nodes, stencil.map(|i| v[i]), y.x)
                } else {
                    let nodes = stencil.map(|i| mesh.delta[i]);
                    y.d.powf(g) * lagrange3(nodes, stencil.map(|i| v[i] / mesh.delta[i].powf(g)), y.d)
                }
            };
            let mut acc = 0.0;
            if same_side {
                let (lo, hi) = (pa.d.min(pb.d), pa.d.max(pb.d));
                let log = hi / lo > 1.5;
                let (l0, l1) = if log { (lo.ln(), hi.ln()) } else { (lo, hi) };
                let (cm, hw) = (0.5 * (l0 + l1), 0.5 * (l1 - l0));
                for (x, w) in xs.iter().zip(ws) {
                    let p = cm + hw * x;
                    let (d, jac) = if log { (p.exp(), p.exp()) } else { (p, 1.0) };
                    let y = Pt::new(side * (1.0 - d), d);
                    acc += w * jac * (vj - model(y)) / seg_dist(target, y).powf(e);
                }
                acc *= hw;
            } else {
                let (cm, hw) = (0.5 * (pa.x + pb.x), 0.5 * (pb.x - pa.x));
                for (x, w) in xs.iter().zip(ws) {
                    let y = Pt::from_x(cm + hw * x);
                    acc += w * (vj - model(y)) / seg_dist(target, y).powf(e);
                }
                acc *= hw;
            }
            total += acc;
        }

        // Boundary cells.
        let (dr, dl) = side_distances(target);
        for (dist_end, model, outer, inner) in [(dr, right, n - 1, n - 2), (dl, left, 0, 1)] {
            let db = mesh.delta[outer];
            let analytic = vj * ((dist_end - db).powf(-2.0 * s) - dist_end.powf(-2.0 * s)) / (2.0 * s);
            let vb = v[outer];
            let part = match model {
                EdgeModel::Power(g) => {
                    integrate_endpoint_singular(|t| vb * (t / db).powf(g) * (dist_end - t).powf(-e), db)
                }
                EdgeModel::Linear => {
                    let (vi, di) = (v[inner], mesh.delta[inner]);
                    integrate_endpoint_singular(
                        |t| (vb + (vi - vb) * (t - db) / (di - db)) * (dist_end - t).powf(-e),
                        db,
                    )
                }
            };
            total += analytic - part;
        }

        // Exterior.
        total += vj * (dr.powf(-2.0 * s) + dl.powf(-2.0 * s)) / (2.0 * s);
        if !u.exterior.is_zero() {
            let ext = integrate_half_line(
                |d| u.exterior.value(d) * ((dr + d).powf(-e) + (dl + d).powf(-e)),
                &u.exterior.breakpoints(),
                u.exterior.support_end(),
            );
            if !ext.is_finite() {
                return Err(Error::DataInadmissible(format!(
                    "exterior integral of {} diverges",
                    u.exterior.describe()
                )));
            }
            total -= ext;
        }
        Ok(self.a_const * total)
    }

    /// `apply` at each node of `nodes`, in parallel.
    pub fn apply_nodes(&self, u: &GridFunction, nodes: &[usize]) -> Result<Vec<f64>> {
        nodes.par_iter().map(|&j| self.apply(u, j)).collect()
    }

    /// `(-Δ)^s u + f(u)` at each node of `region`.
    pub fn residual(&self, u: &GridFunction, model: &NonlinearityModel, region: &[usize]) -> Result<Vec<f64>> {
        let lap = self.apply_nodes(u, region)?;
        region
            .iter()
            .zip(lap)
            .map(|(&j, l)| Ok(l + model.eval_f(u.total(j).max(0.0))?))
            .collect()
    }

    /// Evaluate `(-Δ)^s ū + f(ū)` on all admissible nodes, and the smallest
    /// `C ≥ 0` with `(-Δ)^s ū ≥ -C f(ū)` on admissible nodes with `δ < δ₀`.
    pub fn supersolution_inequality_check(
        &self,
        ubar: &GridFunction,
        model: &NonlinearityModel,
        delta0: f64,
    ) -> Result<SupersolutionCheck> {
        let nodes = self.mesh.admissible_indices();
        let lap = self.apply_nodes(ubar, &nodes)?;
        let mut report = SupersolutionCheck {
            delta0,
            nodes_checked: nodes.len(),
            min_residual: f64::INFINITY,
            min_relative_residual: f64::INFINITY,
            worst_node: None,
            strip_constant: 0.0,
            strip_nodes: 0,
            max_interior_lap: f64::NEG_INFINITY,
            values: Vec::with_capacity(nodes.len()),
        };
        for (&j, &l) in nodes.iter().zip(&lap) {
            let fu = model.eval_f(ubar.total(j).max(0.0))?;
            let r = l + fu;
            let rel = r / fu.max(1.0);
            if rel < report.min_relative_residual {
                report.min_relative_residual = rel;
                report.worst_node = Some(j);
            }
            report.min_residual = report.min_residual.min(r);
            let d = self.mesh.delta[j];
            if d < delta0 {
                report.strip_nodes += 1;
                if fu > 0.0 {
                    report.strip_constant = report.strip_constant.max(-l / fu);
                } else if l < 0.0 {
                    report.strip_constant = f64::INFINITY;
                }
            } else {
                report.max_interior_lap = report.max_interior_lap.max(l.abs());
            }
            report.values.push(NodeResidual {
                node: j,
                delta: d,
                lap: l,
                f: fu,
                residual: r,
            });
        }
        Ok(report)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NodeResidual {
    pub node: usize,
    pub delta: f64,
    pub lap: f64,
    pub f: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SupersolutionCheck {
    pub delta0: f64,
    pub nodes_checked: usize,
    /// `min ((-Δ)^s ū + f(ū))` over admissible nodes.
    pub min_residual: f64,
    /// `min ((-Δ)^s ū + f(ū)) / max(1, f(ū))`.
    pub min_relative_residual: f64,
    pub worst_node: Option<usize>,
    /// Smallest `C ≥ 0` with `(-Δ)^s ū ≥ -C f(ū)` on the strip `δ < δ₀`.
    pub strip_constant: f64,
    pub strip_nodes: usize,
    /// `max |(-Δ)^s ū|` over admissible nodes with `δ ≥ δ₀`.
    pub max_interior_lap: f64,
    pub values: Vec<NodeResidual>,
}

impl SupersolutionCheck {
    /// Relative residual at least `-tol` everywhere.
    pub fn passes(&self, tol: f64) -> bool {
        self.min_relative_residual >= -tol
    }

    pub fn violations(&self, tol: f64) -> Vec<usize> {
        self.values
            .iter()
            .filter(|r| r.residual / r.f.max(1.0) < -tol)
            .map(|r| r.node)
            .collect()
    }
}
