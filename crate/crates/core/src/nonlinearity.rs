//! The absorption term `f`, its antiderivative `F`, and sampled checks of
//! the growth hypothesis `1 + m <= t f'(t)/f(t) <= 1 + M`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{integrate, integrate_log, QuadOptions};

/// Monotone piecewise-cubic (Fritsch–Carlson) interpolant of `ln f` in `ln t`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogTable {
    lt: Vec<f64>,
    lf: Vec<f64>,
    slope: Vec<f64>,
}

impl LogTable {
    pub fn new(t: &[f64], f: &[f64]) -> Result<Self> {
        if t.len() != f.len() || t.len() < 2 {
            return Err(Error::InvalidParameter(
                "tabulated nonlinearity needs at least two (t, f) pairs".into(),
            ));
        }
        for i in 0..t.len() {
            if !(t[i] > 0.0 && f[i] > 0.0 && t[i].is_finite() && f[i].is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "tabulated sample {i} must have t > 0 and f > 0, got ({}, {})",
                    t[i], f[i]
                )));
            }
            if i > 0 && t[i] <= t[i - 1] {
                return Err(Error::InvalidParameter("tabulated t must be strictly increasing".into()));
            }
            if i > 0 && f[i] <= f[i - 1] {
                return Err(Error::InvalidParameter(format!(
                    "tabulated f must be strictly increasing (fails at t = {})",
                    t[i]
                )));
            }
        }
        let lt: Vec<f64> = t.iter().map(|v| v.ln()).collect();
        let lf: Vec<f64> = f.iter().map(|v| v.ln()).collect();
        let n = lt.len();
        let d: Vec<f64> = (0..n - 1).map(|i| (lf[i + 1] - lf[i]) / (lt[i + 1] - lt[i])).collect();
        let mut slope = vec![0.0; n];
        slope[0] = d[0];
        slope[n - 1] = d[n - 2];
        for i in 1..n - 1 {
            if d[i - 1] * d[i] <= 0.0 {
                slope[i] = 0.0;
            } else {
                let h0 = lt[i] - lt[i - 1];
                let h1 = lt[i + 1] - lt[i];
                let w1 = 2.0 * h1 + h0;
                let w2 = h1 + 2.0 * h0;
                slope[i] = (w1 + w2) / (w1 / d[i - 1] + w2 / d[i]);
            }
        }
        Ok(Self { lt, lf, slope })
    }

    pub fn t_min(&self) -> f64 {
        self.lt[0].exp()
    }

    pub fn t_max(&self) -> f64 {
        self.lt[self.lt.len() - 1].exp()
    }

    /// Value and log-log slope at `t` (which must lie in the table range).
    fn eval(&self, t: f64) -> (f64, f64) {
        let x = t.ln();
        let n = self.lt.len();
        let i = match self.lt.partition_point(|&v| v <= x) {
            0 => 0,
            k if k >= n => n - 2,
            k => k - 1,
        };
        let h = self.lt[i + 1] - self.lt[i];
        let u = ((x - self.lt[i]) / h).clamp(0.0, 1.0);
        let (y0, y1, m0, m1) = (self.lf[i], self.lf[i + 1], self.slope[i] * h, self.slope[i + 1] * h);
        let u2 = u * u;
        let u3 = u2 * u;
        let y = (2.0 * u3 - 3.0 * u2 + 1.0) * y0
            + (u3 - 2.0 * u2 + u) * m0
            + (-2.0 * u3 + 3.0 * u2) * y1
            + (u3 - u2) * m1;
        let dy = ((6.0 * u2 - 6.0 * u) * y0 + (3.0 * u2 - 4.0 * u + 1.0) * m0 + (-6.0 * u2 + 6.0 * u) * y1
            + (3.0 * u2 - 2.0 * u) * m1)
            / h;
        (y.exp(), dy)
    }
}

/// Family of the nonlinearity.
#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    /// `t^p`
    Power { p: f64 },
    /// `t^p ln^alpha(1 + t)`
    PowerLog { p: f64, alpha: f64 },
    /// Samples on a log grid, interpolated monotonically in log-log.
    Tabulated(LogTable),
}

/// `f(t) = scale * base(t)` for one of the [`Family`] shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct NonlinearityModel {
    pub family: Family,
    pub scale: f64,
    pub f_prime_available: bool,
}

impl NonlinearityModel {
    pub fn power(p: f64) -> Self {
        Self {
            family: Family::Power { p },
            scale: 1.0,
            f_prime_available: true,
        }
    }

    pub fn power_log(p: f64, alpha: f64) -> Self {
        Self {
            family: Family::PowerLog { p, alpha },
            scale: 1.0,
            f_prime_available: true,
        }
    }

    pub fn tabulated(t: &[f64], f: &[f64]) -> Result<Self> {
        Ok(Self {
            family: Family::Tabulated(LogTable::new(t, f)?),
            scale: 1.0,
            f_prime_available: false,
        })
    }

    /// Read a two-column `t,f` CSV (an optional header row is skipped).
    pub fn from_table_file(path: &Path) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_path(path)?;
        let mut t = Vec::new();
        let mut f = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            if rec.len() < 2 {
                return Err(Error::Config(format!("{}: expected two columns", path.display())));
            }
            match (rec[0].parse::<f64>(), rec[1].parse::<f64>()) {
                (Ok(a), Ok(b)) => {
                    t.push(a);
                    f.push(b);
                }
                _ if t.is_empty() => continue,
                _ => return Err(Error::Config(format!("{}: unparsable row {:?}", path.display(), rec))),
            }
        }
        Self::tabulated(&t, &f)
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(Error::InvalidParameter(format!("scale must be positive, got {}", self.scale)));
        }
        match self.family {
            Family::Power { p } | Family::PowerLog { p, .. } if !(p > 0.0 && p.is_finite()) => {
                Err(Error::InvalidParameter(format!("exponent p must be positive, got {p}")))
            }
            Family::PowerLog { alpha, .. } if !alpha.is_finite() => {
                Err(Error::InvalidParameter("alpha must be finite".into()))
            }
            _ => Ok(()),
        }
    }

    /// Sampled range for tabulated models, `(0, ∞)` otherwise.
    pub fn domain(&self) -> (f64, f64) {
        match &self.family {
            Family::Tabulated(tab) => (tab.t_min(), tab.t_max()),
            _ => (0.0, f64::INFINITY),
        }
    }

    /// Short human-readable description.
    pub fn label(&self) -> String {
        let base = match &self.family {
            Family::Power { p } => format!("t^{p}"),
            Family::PowerLog { p, alpha } => format!("t^{p} ln^{alpha}(1+t)"),
            Family::Tabulated(tab) => format!("tabulated on [{:e}, {:e}]", tab.t_min(), tab.t_max()),
        };
        if self.scale == 1.0 {
            base
        } else {
            format!("{} * {}", self.scale, base)
        }
    }

    /// `f(t)`.
    pub fn eval_f(&self, t: f64) -> Result<f64> {
        if t <= 0.0 {
            if t < 0.0 {
                return Err(Error::InvalidParameter(format!("f is defined for t >= 0, got {t}")));
            }
            return Ok(0.0);
        }
        let v = match &self.family {
            Family::Power { p } => t.powf(*p),
            Family::PowerLog { p, alpha } => t.powf(*p) * t.ln_1p().powf(*alpha),
            Family::Tabulated(tab) => {
                let (lo, hi) = (tab.t_min(), tab.t_max());
                if t < lo * (1.0 - 1e-12) || t > hi * (1.0 + 1e-12) {
                    return Err(Error::OutOfRange { t, lo, hi });
                }
                tab.eval(t.clamp(lo, hi)).0
            }
        };
        Ok(self.scale * v)
    }

    /// `f'(t)`, in closed form when available, else by central differences
    /// with relative step `1e-6`.
    pub fn eval_f_prime(&self, t: f64) -> Result<f64> {
        if t <= 0.0 {
            return Err(Error::InvalidParameter(format!("f' is evaluated for t > 0, got {t}")));
        }
        match &self.family {
            Family::Power { p } => Ok(self.scale * p * t.powf(p - 1.0)),
            Family::PowerLog { p, alpha } => {
                let l = t.ln_1p();
                Ok(self.scale
                    * (p * t.powf(p - 1.0) * l.powf(*alpha) + t.powf(*p) * alpha * l.powf(alpha - 1.0) / (1.0 + t)))
            }
            Family::Tabulated(tab) => {
                let (lo, hi) = (tab.t_min(), tab.t_max());
                let h = t * 1e-6;
                let (a, b) = ((t - h).max(lo), (t + h).min(hi));
                if b <= a {
                    return Err(Error::OutOfRange { t, lo, hi });
                }
                Ok((self.eval_f(b)? - self.eval_f(a)?) / (b - a))
            }
        }
    }

    /// The log-derivative `t f'(t) / f(t)`.
    pub fn log_derivative(&self, t: f64) -> Result<f64> {
        match &self.family {
            Family::Power { p } => Ok(*p),
            Family::PowerLog { p, alpha } => {
                let l = t.ln_1p();
                Ok(p + alpha * t / ((1.0 + t) * l))
            }
            Family::Tabulated(_) => Ok(t * self.eval_f_prime(t)? / self.eval_f(t)?),
        }
    }

    /// `F(t) = ∫_0^t f`.
    #[allow(non_snake_case)]
    pub fn eval_F(&self, t: f64) -> Result<f64> {
        if t <= 0.0 {
            return Ok(0.0);
        }
        match &self.family {
            Family::Power { p } => Ok(self.scale * t.powf(p + 1.0) / (p + 1.0)),
            Family::PowerLog { .. } => {
                let opts = QuadOptions::rel(1e-13);
                let head = |b: f64| integrate(|x| self.eval_f(x).unwrap_or(f64::NAN), 0.0, b, opts);
                if t <= 1.0 {
                    return Ok(head(t)?.value);
                }
                let tail = integrate_log(|x| self.eval_f(x).unwrap_or(f64::NAN), 1.0, t, opts)?;
                Ok(head(1.0)?.value + tail.value)
            }
            Family::Tabulated(tab) => {
                let (lo, hi) = (tab.t_min(), tab.t_max());
                if t < lo || t > hi * (1.0 + 1e-12) {
                    return Err(Error::OutOfRange { t, lo, hi });
                }
                // Below the first sample f is continued by its end slope in log-log.
                let (f0, e0) = tab.eval(lo);
                let below = self.scale * f0 * lo / (1.0 + e0);
                let rest = integrate_log(|x| self.eval_f(x).unwrap_or(f64::NAN), lo, t.min(hi), QuadOptions::rel(1e-12))?;
                Ok(below + rest.value)
            }
        }
    }
}

/// Description of a logarithmic sample grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogGrid {
    pub t_min: f64,
    pub t_max: f64,
    pub n: usize,
}

impl LogGrid {
    pub fn new(t_min: f64, t_max: f64, n: usize) -> Result<Self> {
        if !(t_min > 0.0 && t_max > t_min && t_max.is_finite() && n >= 2) {
            return Err(Error::InvalidParameter(format!(
                "log grid needs 0 < t_min < t_max < ∞ and n >= 2, got [{t_min}, {t_max}] with n = {n}"
            )));
        }
        Ok(Self { t_min, t_max, n })
    }

    pub fn points(&self) -> Vec<f64> {
        let (a, b) = (self.t_min.ln(), self.t_max.ln());
        (0..self.n)
            .map(|i| {
                if i + 1 == self.n {
                    self.t_max
                } else {
                    (a + (b - a) * i as f64 / (self.n - 1) as f64).exp()
                }
            })
            .collect()
    }
}

impl Default for LogGrid {
    fn default() -> Self {
        Self {
            t_min: 1e-6,
            t_max: 1e6,
            n: 2048,
        }
    }
}

/// Sampled constants of the growth hypothesis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthEnvelope {
    pub m: f64,
    #[serde(rename = "M")]
    pub big_m: f64,
    /// Smallest sampled `t f'/f`.
    pub sample_min: f64,
    /// Largest sampled `t f'/f`.
    pub sample_max: f64,
    pub grid: LogGrid,
}

/// Estimate `m`, `M` from `t f'/f` on a log grid.
pub fn estimate_growth_envelope(model: &NonlinearityModel, t_range: (f64, f64), n_samples: usize) -> Result<GrowthEnvelope> {
    let grid = LogGrid::new(t_range.0, t_range.1, n_samples)?;
    let mut lo = (f64::INFINITY, 0.0);
    let mut hi = f64::NEG_INFINITY;
    for t in grid.points() {
        let r = model.log_derivative(t)?;
        if !r.is_finite() {
            return Err(Error::HypothesisViolation { t, ratio: r });
        }
        if r < lo.0 {
            lo = (r, t);
        }
        hi = hi.max(r);
    }
    // Exact equality with 1 is what a linear f produces; allow no slack.
    if lo.0 <= 1.0 {
        return Err(Error::HypothesisViolation { t: lo.1, ratio: lo.0 });
    }
    Ok(GrowthEnvelope {
        m: lo.0 - 1.0,
        big_m: hi - 1.0,
        sample_min: lo.0,
        sample_max: hi,
        grid,
    })
}

/// Default envelope over `[1e-6, 1e6]` with 2048 samples, clipped to the
/// sampled range of tabulated models.
pub fn default_envelope(model: &NonlinearityModel) -> Result<GrowthEnvelope> {
    let (lo, hi) = model.domain();
    let d = LogGrid::default();
    let a = d.t_min.max(lo * (1.0 + 1e-9));
    let b = d.t_max.min(hi * (1.0 - 1e-9));
    estimate_growth_envelope(model, (a, b), d.n)
}

/// Outcome of [`check_monotone_scaling`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub c: f64,
    /// Largest relative violation of either bound (0 when both hold).
    pub max_violation: f64,
    pub worst_t: f64,
    pub samples: usize,
}

/// Check `c^{1+m} f(t) <= f(ct) <= c^{1+M} f(t)` on `t_grid`.
pub fn check_monotone_scaling(model: &NonlinearityModel, env: &GrowthEnvelope, c: f64, t_grid: &[f64]) -> Result<ScalingReport> {
    if !(c >= 1.0) {
        return Err(Error::InvalidParameter(format!("scaling factor must be >= 1, got {c}")));
    }
    let lo_k = c.powf(1.0 + env.m);
    let hi_k = c.powf(1.0 + env.big_m);
    let mut rep = ScalingReport {
        c,
        max_violation: 0.0,
        worst_t: f64::NAN,
        samples: t_grid.len(),
    };
    for &t in t_grid {
        let ft = model.eval_f(t)?;
        let fct = model.eval_f(c * t)?;
        let v = ((lo_k * ft - fct) / fct).max((fct - hi_k * ft) / fct);
        if v > rep.max_violation {
            rep.max_violation = v;
            rep.worst_t = t;
        }
    }
    Ok(rep)
}

/// Witnesses `f(t) <= a + b t` on a sampled range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearBound {
    pub a: f64,
    pub b: f64,
    /// True when `f(t)/t` still grows at the top of the range, so the bound
    /// does not extend beyond it.
    pub range_limited: bool,
}

/// Look for `a, b > 0` with `f(t) <= a + b t` over `t_range`.
///
/// An infinite upper end is probed up to `1e12`; if `f(t)/t` keeps growing
/// there no bound exists and `None` is returned. For a finite range a
/// bound always exists and is flagged `range_limited` when `f(t)/t` grows
/// at the upper end.
pub fn check_linear_bound(model: &NonlinearityModel, t_range: (f64, f64)) -> Result<Option<LinearBound>> {
    let (dlo, dhi) = model.domain();
    let lo = t_range.0.max(1e-12).max(dlo);
    let unbounded = !t_range.1.is_finite();
    let hi = if unbounded { 1e12 } else { t_range.1 }.min(dhi);
    let grid = LogGrid::new(lo, hi, 512)?.points();
    let ratio = |t: f64| -> Result<f64> { Ok(model.eval_f(t)? / t) };
    // Log-slope of f(t)/t over the last two decades of the range.
    let t1 = (hi / 100.0).max(lo);
    let growth = if hi > t1 {
        (ratio(hi)? / ratio(t1)?).ln() / (hi / t1).ln()
    } else {
        0.0
    };
    let growing = growth > 0.02;
    if unbounded && growing {
        return Ok(None);
    }
    let split = grid.iter().position(|&t| t >= 1.0).unwrap_or(grid.len() - 1);
    let mut b: f64 = 0.0;
    for &t in &grid[split..] {
        b = b.max(ratio(t)?);
    }
    let b = b.max(1e-300);
    let mut a: f64 = 0.0;
    for &t in &grid {
        a = a.max(model.eval_f(t)? - b * t);
    }
    Ok(Some(LinearBound {
        a: a.max(0.0) * (1.0 + 1e-12) + 1e-300,
        b,
        range_limited: growing,
    }))
}

/// Serializable description of a nonlinearity, as used in config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonlinearitySpec {
    pub family: String,
    #[serde(default)]
    pub p: Option<f64>,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub table_path: Option<String>,
    #[serde(default)]
    pub scale: Option<f64>,
}

impl NonlinearitySpec {
    pub fn power(p: f64) -> Self {
        Self {
            family: "power".into(),
            p: Some(p),
            alpha: None,
            table_path: None,
            scale: None,
        }
    }

    pub fn build(&self) -> Result<NonlinearityModel> {
        let need_p = || {
            self.p
                .ok_or_else(|| Error::Config(format!("family '{}' needs p", self.family)))
        };
        let model = match self.family.as_str() {
            "power" => NonlinearityModel::power(need_p()?),
            "powerlog" => NonlinearityModel::power_log(
                need_p()?,
                self.alpha.ok_or_else(|| Error::Config("family 'powerlog' needs alpha".into()))?,
            ),
            "tabulated" => {
                let path = self
                    .table_path
                    .as_ref()
                    .ok_or_else(|| Error::Config("family 'tabulated' needs table_path".into()))?;
                NonlinearityModel::from_table_file(Path::new(path))?
            }
            other => return Err(Error::Config(format!("unknown nonlinearity family '{other}'"))),
        };
        let model = model.with_scale(self.scale.unwrap_or(1.0));
        model.validate()?;
        Ok(model)
    }
}
