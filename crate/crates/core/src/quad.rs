//! One-dimensional quadrature: fixed Gauss–Legendre rules, adaptive
//! Gauss–Kronrod (7/15) with global bisection, and helpers for integrals
//! over many decades or with an algebraic endpoint singularity.

use std::collections::BinaryHeap;
use std::sync::OnceLock;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_225,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];

// Gauss weights for the odd-indexed Kronrod nodes plus the centre.
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub evals: usize,
}

/// Tolerances and limits for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-300,
            rel_tol: 1e-12,
            max_intervals: 2000,
        }
    }
}

impl QuadOptions {
    pub fn rel(rel_tol: f64) -> Self {
        Self {
            rel_tol,
            ..Self::default()
        }
    }
}

/// Single Gauss–Kronrod 15 panel. Returns (kronrod, |kronrod - gauss|).
pub fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let fsum = f(c - dx) + f(c + dx);
        kron += WGK[j] * fsum;
        if j % 2 == 1 {
            gauss += WG[j / 2] * fsum;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

#[derive(Debug)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive Gauss–Kronrod integration of `f` over `[a, b]`.
///
/// The interval with the largest error estimate is bisected until the total
/// estimate meets `max(abs_tol, rel_tol * |value|)`. Non-finite integrand
/// values or exhausting `max_intervals` yield [`Error::Quadrature`].
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, opts: QuadOptions) -> Result<QuadResult> {
    if a == b {
        return Ok(QuadResult {
            value: 0.0,
            error: 0.0,
            evals: 0,
        });
    }
    let (v0, e0) = gk15(&mut f, a, b);
    let mut evals = 15;
    let mut heap = BinaryHeap::new();
    heap.push(Segment {
        a,
        b,
        value: v0,
        error: e0,
    });
    let mut total = v0;
    let mut total_err = e0;
    loop {
        if !total.is_finite() {
            return Err(Error::Quadrature {
                value: total,
                achieved: total_err,
            });
        }
        let target = opts.abs_tol.max(opts.rel_tol * total.abs());
        if total_err <= target {
            break;
        }
        if heap.len() >= opts.max_intervals {
            return Err(Error::Quadrature {
                value: total,
                achieved: total_err,
            });
        }
        let seg = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (seg.a + seg.b);
        if mid <= seg.a || mid >= seg.b {
            // Interval can no longer be split in floating point.
            heap.push(seg);
            let achieved = total_err;
            if achieved <= 1e3 * target {
                break;
            }
            return Err(Error::Quadrature {
                value: total,
                achieved,
            });
        }
        let (vl, el) = gk15(&mut f, seg.a, mid);
        let (vr, er) = gk15(&mut f, mid, seg.b);
        evals += 30;
        total += vl + vr - seg.value;
        total_err += el + er - seg.error;
        heap.push(Segment {
            a: seg.a,
            b: mid,
            value: vl,
            error: el,
        });
        heap.push(Segment {
            a: mid,
            b: seg.b,
            value: vr,
            error: er,
        });
    }
    // Re-sum to shed accumulated cancellation in the running totals.
    let value: f64 = heap.iter().map(|s| s.value).sum();
    let error: f64 = heap.iter().map(|s| s.error).sum();
    Ok(QuadResult { value, error, evals })
}

/// Integrate `f(t)` over `[a, b]` with `0 < a < b` in the variable `x = ln t`.
pub fn integrate_log<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, opts: QuadOptions) -> Result<QuadResult> {
    if !(a > 0.0 && b >= a) {
        return Err(Error::InvalidParameter(format!(
            "log-variable integration needs 0 < a <= b, got [{a}, {b}]"
        )));
    }
    integrate(
        |x| {
            let t = x.exp();
            f(t) * t
        },
        a.ln(),
        b.ln(),
        opts,
    )
}

/// Gauss–Legendre nodes and weights on `[-1, 1]` by Newton iteration on
/// the Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p0 = 1.0;
            let mut p1 = 0.0;
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// Cached 8-point Gauss–Legendre rule.
pub fn gl8() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(8))
}

/// Cached 16-point Gauss–Legendre rule.
pub fn gl16() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(16))
}

/// Apply a fixed rule on `[a, b]`.
pub fn fixed<F: FnMut(f64) -> f64>(rule: &(Vec<f64>, Vec<f64>), a: f64, b: f64, mut f: F) -> f64 {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    rule.0
        .iter()
        .zip(&rule.1)
        .map(|(&x, &w)| w * f(c + h * x))
        .sum::<f64>()
        * h
}

/// Integrate `g(t)` over `t ∈ (0, len]` where `g` may carry an integrable
/// algebraic singularity `~ t^beta` (beta > -1) at `t = 0`.
///
/// The interval is split geometrically (ratio 1/5) down to `len * 4e-16`,
/// each piece handled by Gauss–Legendre, and the innermost remainder is
/// added analytically from the power law fitted between the two smallest
/// sample points.
pub fn integrate_endpoint_singular<F: FnMut(f64) -> f64>(mut g: F, len: f64) -> f64 {
    integrate_endpoint_singular_n(|t| [g(t)], len)[0]
}

/// Component-wise [`integrate_endpoint_singular`] for vector integrands
/// sharing the same evaluation points.
pub fn integrate_endpoint_singular_n<const K: usize, F: FnMut(f64) -> [f64; K]>(mut g: F, len: f64) -> [f64; K] {
    const RATIO: f64 = 0.2;
    const LEVELS: usize = 22;
    let (xs, ws) = gl16();
    let mut total = [0.0; K];
    let mut hi = len;
    for _ in 0..LEVELS {
        let lo = hi * RATIO;
        let c = 0.5 * (lo + hi);
        let h = 0.5 * (hi - lo);
        for (x, w) in xs.iter().zip(ws) {
            let v = g(c + h * x);
            for k in 0..K {
                total[k] += w * h * v[k];
            }
        }
        hi = lo;
    }
    let g1 = g(hi);
    let g2 = g(2.0 * hi);
    for k in 0..K {
        total[k] += power_remainder(g1[k], g2[k], hi);
    }
    total
}

// ∫_0^h of a local power law through g(h) = g1 and g(2h) = g2.
fn power_remainder(g1: f64, g2: f64, h: f64) -> f64 {
    if g1 != 0.0 && g2 != 0.0 && g1.signum() == g2.signum() {
        let beta = (g2 / g1).ln() / std::f64::consts::LN_2;
        if beta > -1.0 {
            return g1 * h / (1.0 + beta);
        }
        return f64::NAN;
    }
    g1 * h
}

/// `∫_0^end h(d) dd` on log-spaced Gauss–Legendre panels (three per decade,
/// 16 points each) from `1e-14`, with extra panel edges at `breaks`.
///
/// The pieces below `1e-14` and, for `end = ∞`, above `1e8` are added from
/// local power-law fits. A non-integrable fitted power gives `NaN`.
pub fn integrate_half_line<F: FnMut(f64) -> f64>(mut h: F, breaks: &[f64], end: f64) -> f64 {
    const LO: f64 = 1e-14;
    const HI: f64 = 1e8;
    let top = end.min(HI);
    if top <= LO {
        return 0.0;
    }
    let mut edges: Vec<f64> = Vec::new();
    let (a, b) = (LO.log10(), top.log10());
    let npan = ((b - a) * 3.0).ceil().max(1.0) as usize;
    for i in 0..=npan {
        edges.push(10f64.powf(a + (b - a) * i as f64 / npan as f64));
    }
    edges[0] = LO;
    edges[npan] = top;
    edges.extend(breaks.iter().copied().filter(|&d| d > LO && d < top));
    edges.sort_by(|x, y| x.total_cmp(y));
    edges.dedup_by(|x, y| (*x - *y).abs() <= 1e-14 * y.abs());
    let (xs, ws) = gl16();
    let mut total = 0.0;
    for w in edges.windows(2) {
        let (la, lb) = (w[0].ln(), w[1].ln());
        let c = 0.5 * (la + lb);
        let hw = 0.5 * (lb - la);
        for (x, wt) in xs.iter().zip(ws) {
            let d = (c + hw * x).exp();
            total += wt * hw * d * h(d);
        }
    }
    total += power_remainder(h(LO), h(2.0 * LO), LO);
    if end > HI {
        let (g1, g2) = (h(HI), h(HI / 2.0));
        if g1 != 0.0 {
            let beta = (g1 / g2).ln() / std::f64::consts::LN_2;
            if beta < -1.0 {
                total -= g1 * HI / (beta + 1.0);
            } else {
                return f64::NAN;
            }
        }
    }
    total
}
