//! Boundary behaviour of computed solutions: singular trace, blow-up
//! exponent, and the ratio `φ(u)/δ^s`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ko::KOProfile;
use crate::mesh::{DomainKind, GradedMesh, GridFunction};

/// Fits need at least this many nodes.
pub const MIN_FIT_NODES: usize = 8;
/// Nodes nearest the boundary left out of every window.
pub const EXCLUDED_BOUNDARY_NODES: usize = 3;
/// Default upper end of the fit window.
pub const DEFAULT_WINDOW_HI: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub lo: f64,
    pub hi: f64,
}

impl Window {
    /// `[4 δ_min, 0.1]`.
    pub fn default_for(mesh: &GradedMesh) -> Self {
        Self {
            lo: 4.0 * mesh.min_delta(),
            hi: DEFAULT_WINDOW_HI,
        }
    }

    pub fn with_hi(self, hi: f64) -> Self {
        Self { hi, ..self }
    }
}

/// Result of a regression over a boundary window.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundaryFit {
    pub window: Window,
    pub exponent: f64,
    pub coefficient: f64,
    pub r_squared: f64,
    /// Standard error of the exponent.
    pub exponent_stderr: f64,
    pub node_count: usize,
}

/// Nodes near `x = +1` (the interval is even) with `δ` in the window,
/// sorted by increasing `δ`, minus the ones closest to the boundary.
pub fn window_nodes(mesh: &GradedMesh, w: Window) -> Result<Vec<usize>> {
    let mut side: Vec<usize> = (0..mesh.len())
        .filter(|&j| mesh.domain.kind == DomainKind::RadialBall || mesh.x[j] > 0.0)
        .collect();
    side.sort_by(|&a, &b| mesh.delta[a].total_cmp(&mesh.delta[b]));
    let nodes: Vec<usize> = side
        .into_iter()
        .skip(EXCLUDED_BOUNDARY_NODES)
        .filter(|&j| mesh.delta[j] >= w.lo && mesh.delta[j] <= w.hi)
        .collect();
    if nodes.len() < MIN_FIT_NODES {
        return Err(Error::InsufficientData {
            got: nodes.len(),
            need: MIN_FIT_NODES,
        });
    }
    Ok(nodes)
}

struct Line {
    intercept: f64,
    slope: f64,
    r_squared: f64,
    slope_stderr: f64,
}

fn least_squares(x: &[f64], y: &[f64]) -> Line {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    let slope_stderr = if x.len() > 2 {
        (sse / (n - 2.0) / sxx).sqrt()
    } else {
        f64::INFINITY
    };
    Line {
        intercept,
        slope,
        r_squared,
        slope_stderr,
    }
}

/// Log-log regression of `values` against `δ` over the window.
pub fn power_fit(mesh: &GradedMesh, values: &[f64], w: Window) -> Result<BoundaryFit> {
    let nodes = window_nodes(mesh, w)?;
    if let Some(&j) = nodes.iter().find(|&&j| !(values[j] > 0.0)) {
        return Err(Error::Fit(format!(
            "nonpositive value {} at delta = {:e}",
            values[j], mesh.delta[j]
        )));
    }
    let x: Vec<f64> = nodes.iter().map(|&j| mesh.delta[j].ln()).collect();
    let y: Vec<f64> = nodes.iter().map(|&j| values[j].ln()).collect();
    let l = least_squares(&x, &y);
    Ok(BoundaryFit {
        window: w,
        exponent: l.slope,
        coefficient: l.intercept.exp(),
        r_squared: l.r_squared,
        exponent_stderr: l.slope_stderr,
        node_count: nodes.len(),
    })
}

/// Exponent `a` and coefficient `C` of `u ≈ C δ^a` on the default window.
pub fn boundary_exponent(u: &GridFunction) -> Result<BoundaryFit> {
    boundary_exponent_in(u, Window::default_for(&u.mesh))
}

pub fn boundary_exponent_in(u: &GridFunction, w: Window) -> Result<BoundaryFit> {
    power_fit(&u.mesh, &u.totals(), w)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceWindow {
    pub window: Window,
    pub estimate: f64,
    pub node_count: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceEstimate {
    /// Estimate on the smallest usable window.
    pub value: f64,
    /// Estimates kept growing by more than the threshold at every shrink.
    pub infinite: bool,
    pub windows: Vec<TraceWindow>,
}

/// Relative growth per shrink step that counts as "still increasing".
pub const TRACE_GROWTH: f64 = 0.05;

/// `lim δ^{1-s} u` from linear fits of `δ^{1-s} u` against `δ` over windows
/// `[lo, 0.1·10^{-m}]`, `m = 0, 1, ...`, while at least 8 nodes remain.
pub fn singular_trace(u: &GridFunction) -> Result<TraceEstimate> {
    let mesh = &u.mesh;
    let totals = u.totals();
    let base = Window::default_for(mesh);
    let mut windows = Vec::new();
    let mut hi = base.hi;
    loop {
        let w = base.with_hi(hi);
        let nodes = match window_nodes(mesh, w) {
            Ok(n) => n,
            Err(e) if windows.is_empty() => return Err(e),
            Err(_) => break,
        };
        let x: Vec<f64> = nodes.iter().map(|&j| mesh.delta[j]).collect();
        let y: Vec<f64> = nodes
            .iter()
            .map(|&j| mesh.delta[j].powf(1.0 - u.s) * totals[j])
            .collect();
        windows.push(TraceWindow {
            window: w,
            estimate: least_squares(&x, &y).intercept,
            node_count: nodes.len(),
        });
        hi /= 10.0;
    }
    let est: Vec<f64> = windows.iter().map(|w| w.estimate).collect();
    let infinite = est.len() >= 3 && est.windows(2).all(|p| p[1] > p[0] * (1.0 + TRACE_GROWTH) && p[0] > 0.0);
    Ok(TraceEstimate {
        value: *est.last().unwrap(),
        infinite,
        windows,
    })
}

/// The operational "+∞ trace" over a sweep: the last estimate exceeds
/// `10 k_max` and the estimates increase along the sweep.
pub fn trace_escapes(k_list: &[f64], traces: &[f64]) -> bool {
    let (Some(&k_max), Some(&last)) = (k_list.last(), traces.last()) else {
        return false;
    };
    traces.len() >= 2 && last > 10.0 * k_max && traces.windows(2).all(|p| p[1] > p[0])
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BbehavWindow {
    pub window: Window,
    pub min_ratio: f64,
    pub max_ratio: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BbehavReport {
    /// Log-log fit of `φ(u)` against `δ` (exponent near `s` when two-sided).
    pub fit: BoundaryFit,
    pub min_ratio: f64,
    pub max_ratio: f64,
    /// Intercept of a linear fit of the ratio against `δ`.
    pub limit: f64,
    /// Default window, then the upper end halved twice.
    pub windows: Vec<BbehavWindow>,
    pub c0: f64,
    pub pass: bool,
}

/// Ratios `φ(u)/δ^s` on the window; passes iff the minimum stays at least
/// `c0` on the window and on its two halvings.
pub fn bbehav_check(u: &GridFunction, profile: &KOProfile, c0: f64) -> Result<BbehavReport> {
    let mesh = &u.mesh;
    let totals = u.totals();
    let base = Window::default_for(mesh);
    let phi: Vec<f64> = totals
        .iter()
        .map(|&t| if t > 0.0 { profile.phi(t) } else { Ok(f64::NAN) })
        .collect::<Result<_>>()?;
    let ratio: Vec<f64> = (0..mesh.len()).map(|j| phi[j] / mesh.delta[j].powf(u.s)).collect();
    let mut windows = Vec::new();
    for m in 0..3 {
        let w = base.with_hi(base.hi / 2f64.powi(m));
        let nodes = window_nodes(mesh, w)?;
        if let Some(&j) = nodes.iter().find(|&&j| !(totals[j] > 0.0)) {
            return Err(Error::Fit(format!("u is not positive at delta = {:e}", mesh.delta[j])));
        }
        windows.push(BbehavWindow {
            window: w,
            min_ratio: nodes.iter().map(|&j| ratio[j]).fold(f64::INFINITY, f64::min),
            max_ratio: nodes.iter().map(|&j| ratio[j]).fold(f64::NEG_INFINITY, f64::max),
        });
    }
    let nodes = window_nodes(mesh, base)?;
    let x: Vec<f64> = nodes.iter().map(|&j| mesh.delta[j]).collect();
    let y: Vec<f64> = nodes.iter().map(|&j| ratio[j]).collect();
    let limit = least_squares(&x, &y).intercept;
    let fit = power_fit(mesh, &phi, base)?;
    let pass = c0 > 0.0 && windows.iter().all(|w| w.min_ratio >= c0);
    Ok(BbehavReport {
        fit,
        min_ratio: windows[0].min_ratio,
        max_ratio: windows[0].max_ratio,
        limit,
        windows,
        c0,
        pass,
    })
}
