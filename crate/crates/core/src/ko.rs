//! Keller–Osserman transform `φ(u) = ∫_u^∞ F^{-1/2}`, its inverse `ψ`,
//! integral tests for the boundary conditions, and the power-case regime map.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nonlinearity::{default_envelope, Family, GrowthEnvelope, NonlinearityModel};
use crate::quad::{gk15, integrate_log, QuadOptions};

const PER_DECADE: f64 = 32.0;
const T_LOW: f64 = 1e-12;
const T_HIGH: f64 = 1e30;
// Stop extending the table once F reaches this size.
const F_CAP: f64 = 1e250;

/// Cached `φ`, `ψ` for a fixed nonlinearity and order `s`.
#[derive(Debug, Clone)]
pub struct KOProfile {
    pub model: NonlinearityModel,
    /// `None` when the sampled growth hypothesis fails; `φ`, `ψ` remain usable.
    pub envelope: Option<GrowthEnvelope>,
    pub s: f64,
    pub tail_cutoff: f64,
    /// Local exponent `e` of `F^{-1/2} ~ t^{-e}` at the cutoff.
    pub tail_exponent: f64,
    lt: Vec<f64>,
    big_f: Vec<f64>,
    phi: Vec<f64>,
}

fn gk_log<G: FnMut(f64) -> f64>(mut g: G, a: f64, b: f64) -> f64 {
    // ∫_a^b g(t) dt in x = ln t.
    let mut h = |x: f64| {
        let t = x.exp();
        g(t) * t
    };
    gk15(&mut h, a.ln(), b.ln()).0
}

impl KOProfile {
    /// Build the tables. Fails with [`Error::DivergentIntegral`] if `F^{-1/2}`
    /// does not decay faster than `1/t` at the cutoff (the transform is infinite).
    pub fn new(model: &NonlinearityModel, s: f64) -> Result<Self> {
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::InvalidParameter(format!("s must lie in (0, 1), got {s}")));
        }
        model.validate()?;
        let (dlo, dhi) = model.domain();
        let t_lo = T_LOW.max(dlo);
        let t_hi = T_HIGH.min(dhi);
        let step = std::f64::consts::LN_10 / PER_DECADE;
        let mut lt = vec![t_lo.ln()];
        let mut big_f = vec![model.eval_F(t_lo)?];
        loop {
            let last = *lt.last().unwrap();
            if last >= t_hi.ln() * (1.0 - 1e-15) || *big_f.last().unwrap() > F_CAP {
                break;
            }
            let next = (last + step).min(t_hi.ln());
            let (a, b) = (last.exp(), next.exp());
            let fb = match model.family {
                Family::Power { .. } => model.eval_F(b)?,
                _ => big_f.last().unwrap() + gk_log(|t| model.eval_f(t).unwrap_or(f64::NAN), a, b),
            };
            if !fb.is_finite() {
                return Err(Error::Quadrature { value: fb, achieved: f64::NAN });
            }
            lt.push(next);
            big_f.push(fb);
        }
        let n = lt.len();
        let t_cut = lt[n - 1].exp();
        let e = t_cut * model.eval_f(t_cut)? / (2.0 * big_f[n - 1]);
        if !(e > 1.0 + 1e-9) {
            return Err(Error::DivergentIntegral { exponent: e });
        }
        let mut prof = Self {
            model: model.clone(),
            envelope: default_envelope(model).ok(),
            s,
            tail_cutoff: t_cut,
            tail_exponent: e,
            lt,
            big_f,
            phi: vec![0.0; n],
        };
        prof.phi[n - 1] = t_cut / prof.big_f[n - 1].sqrt() / (e - 1.0);
        for i in (0..n - 1).rev() {
            let (a, b) = (prof.lt[i].exp(), prof.lt[i + 1].exp());
            let cell = gk_log(|t| 1.0 / prof.big_f_in_cell(i, t).sqrt(), a, b);
            prof.phi[i] = prof.phi[i + 1] + cell;
        }
        Ok(prof)
    }

    pub fn envelope(&self) -> Result<&GrowthEnvelope> {
        self.envelope.as_ref().ok_or_else(|| {
            Error::InvalidParameter(format!(
                "nonlinearity {} does not satisfy the sampled growth hypothesis",
                self.model.label()
            ))
        })
    }

    fn cell_of(&self, t: f64) -> Option<usize> {
        let x = t.ln();
        let n = self.lt.len();
        if x < self.lt[0] || x > self.lt[n - 1] {
            return None;
        }
        Some(self.lt.partition_point(|&v| v <= x).clamp(1, n - 1) - 1)
    }

    fn big_f_in_cell(&self, i: usize, t: f64) -> f64 {
        if let Family::Power { .. } = self.model.family {
            return self.model.eval_F(t).unwrap_or(f64::NAN);
        }
        let a = self.lt[i].exp();
        if t == a {
            return self.big_f[i];
        }
        self.big_f[i] + gk_log(|x| self.model.eval_f(x).unwrap_or(f64::NAN), a, t)
    }

    /// `F(t)`, read from the cached table where possible.
    pub fn big_f(&self, t: f64) -> Result<f64> {
        match self.cell_of(t) {
            Some(i) => Ok(self.big_f_in_cell(i, t)),
            None => self.model.eval_F(t),
        }
    }

    /// `φ(u) = ∫_u^∞ F(t)^{-1/2} dt`.
    pub fn phi(&self, u: f64) -> Result<f64> {
        if !(u > 0.0) {
            return Err(Error::InvalidParameter(format!("φ needs u > 0, got {u}")));
        }
        match self.cell_of(u) {
            Some(i) => {
                let b = self.lt[i + 1].exp();
                Ok(self.phi[i + 1] + gk_log(|t| 1.0 / self.big_f_in_cell(i, t).sqrt(), u, b))
            }
            None if u > self.tail_cutoff => {
                let fu = self.model.eval_F(u)?;
                let e = u * self.model.eval_f(u)? / (2.0 * fu);
                if !(e > 1.0) {
                    return Err(Error::DivergentIntegral { exponent: e });
                }
                Ok(u / fu.sqrt() / (e - 1.0))
            }
            None => {
                let t0 = self.lt[0].exp();
                let head = integrate_log(
                    |t| 1.0 / self.model.eval_F(t).unwrap_or(f64::NAN).sqrt(),
                    u,
                    t0,
                    QuadOptions::rel(1e-13),
                )?;
                Ok(self.phi[0] + head.value)
            }
        }
    }

    /// `φ'(u) = -F(u)^{-1/2}`.
    pub fn phi_prime(&self, u: f64) -> Result<f64> {
        Ok(-1.0 / self.big_f(u)?.sqrt())
    }

    /// `ψ = φ^{-1}`: the unique `u > 0` with `φ(u) = v`.
    pub fn psi(&self, v: f64) -> Result<f64> {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidParameter(format!("ψ needs finite v > 0, got {v}")));
        }
        let n = self.lt.len();
        // Bracket [xa, xb] in ln u with φ(e^xa) >= v >= φ(e^xb).
        let (mut xa, mut xb, guess) = if v > self.phi[0] {
            let mut xa = self.lt[0];
            let xb = self.lt[0];
            loop {
                xa -= std::f64::consts::LN_10;
                if xa < -690.0 {
                    return Err(Error::InversionRange { v, lo: 0.0, hi: xb.exp() });
                }
                match self.phi(xa.exp()) {
                    Ok(p) if p >= v => break,
                    Ok(_) => {}
                    Err(_) => return Err(Error::InversionRange { v, lo: 0.0, hi: xb.exp() }),
                }
            }
            (xa, xb, 0.5 * (xa + xb))
        } else if v < self.phi[n - 1] {
            let xa = self.lt[n - 1];
            let mut xb = xa;
            loop {
                xb += std::f64::consts::LN_10;
                if xb > 690.0 {
                    return Err(Error::InversionRange {
                        v,
                        lo: xa.exp(),
                        hi: f64::INFINITY,
                    });
                }
                match self.phi(xb.exp()) {
                    Ok(p) if p <= v => break,
                    Ok(_) => {}
                    Err(_) => {
                        return Err(Error::InversionRange {
                            v,
                            lo: xa.exp(),
                            hi: xb.exp(),
                        })
                    }
                }
            }
            (xa, xb, 0.5 * (xa + xb))
        } else {
            // phi table is decreasing; find i with phi[i] >= v >= phi[i+1].
            let i = self.phi.partition_point(|&p| p >= v).clamp(1, n - 1) - 1;
            let (pa, pb) = (self.phi[i].ln(), self.phi[i + 1].ln());
            let w = if pa > pb { (pa - v.ln()) / (pa - pb) } else { 0.5 };
            let g = self.lt[i] + w.clamp(0.0, 1.0) * (self.lt[i + 1] - self.lt[i]);
            (self.lt[i], self.lt[i + 1], g)
        };
        let lv = v.ln();
        let mut x = guess;
        for _ in 0..100 {
            let u = x.exp();
            let p = self.phi(u)?;
            let g = p.ln() - lv;
            if g.abs() <= 1e-14 {
                return Ok(u);
            }
            if g > 0.0 {
                xa = x;
            } else {
                xb = x;
            }
            let dg = -u / (self.big_f(u)?.sqrt() * p);
            let mut next = x - g / dg;
            if !(next > xa && next < xb) || !next.is_finite() {
                next = 0.5 * (xa + xb);
            }
            if (next - x).abs() <= 1e-15 * x.abs().max(1.0) {
                return Ok(next.exp());
            }
            x = next;
        }
        Ok(x.exp())
    }
}

/// Which integral test a report refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Condition {
    L1,
    L1bis,
    E,
    UL1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Converges,
    Diverges,
    Borderline,
}

/// Outcome of an integral test `∫^∞ g(t) dt < ∞`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub condition: Condition,
    pub verdict: Verdict,
    /// Fitted `e` in `g(t) ~ t^e (ln t)^β`.
    pub tail_exponent: f64,
    /// Fitted `β`.
    pub log_exponent: f64,
    /// Signed distance of the deciding exponent from -1.
    pub margin: f64,
    /// `∫_1^{t_max} g` over the fit window's upper end.
    pub partial_integral: f64,
    pub window: (f64, f64),
    pub details: String,
}

/// Half-width of the undecidable band around the critical exponent -1.
pub const BORDERLINE_BAND: f64 = 0.02;
const FIT_WINDOW: (f64, f64) = (1e4, 1e12);

/// Least-squares fit of `ln g = a + e ln t + β ln ln t`.
fn fit_tail(lg: &[(f64, f64)]) -> Result<(f64, f64)> {
    use nalgebra::{DMatrix, DVector};
    let n = lg.len();
    if n < 3 {
        return Err(Error::InsufficientData { got: n, need: 3 });
    }
    let span = lg[n - 1].0 - lg[0].0;
    let with_log = span > 2.0 * std::f64::consts::LN_10 && lg[0].0 > 1.0;
    let cols = if with_log { 3 } else { 2 };
    let a = DMatrix::from_fn(n, cols, |i, j| match j {
        0 => 1.0,
        1 => lg[i].0,
        _ => lg[i].0.ln(),
    });
    let b = DVector::from_iterator(n, lg.iter().map(|p| p.1));
    let sol = a
        .svd(true, true)
        .solve(&b, 1e-14)
        .map_err(|e| Error::Fit(e.to_string()))?;
    Ok((sol[1], if with_log { sol[2] } else { 0.0 }))
}

fn decide(e: f64, beta: f64) -> (Verdict, f64, &'static str) {
    let gap = e + 1.0;
    if gap < -BORDERLINE_BAND {
        return (Verdict::Converges, gap, "power");
    }
    if gap > BORDERLINE_BAND {
        return (Verdict::Diverges, gap, "power");
    }
    // Critical power: the logarithmic factor decides, unless there is none.
    if beta.abs() <= BORDERLINE_BAND {
        return (Verdict::Borderline, gap, "power");
    }
    let lgap = beta + 1.0;
    if lgap < -BORDERLINE_BAND {
        (Verdict::Converges, lgap, "log")
    } else if lgap > BORDERLINE_BAND {
        (Verdict::Diverges, lgap, "log")
    } else {
        (Verdict::Borderline, lgap, "log")
    }
}

fn ln_f(model: &NonlinearityModel, t: f64) -> Result<f64> {
    let ls = model.scale.ln();
    Ok(match model.family {
        Family::Power { p } => ls + p * t.ln(),
        Family::PowerLog { p, alpha } => ls + p * t.ln() + alpha * t.ln_1p().ln(),
        Family::Tabulated(_) => model.eval_f(t)?.ln(),
    })
}

fn tail_test<G: Fn(f64) -> Result<f64>>(condition: Condition, lng: G, window: (f64, f64), what: &str) -> Result<ConditionReport> {
    let (a, b) = window;
    let npts = 65;
    let mut pts = Vec::with_capacity(npts);
    for i in 0..npts {
        let x = a.ln() + (b.ln() - a.ln()) * i as f64 / (npts - 1) as f64;
        pts.push((x, lng(x.exp())?));
    }
    let (e, beta) = fit_tail(&pts)?;
    let (verdict, margin, by) = decide(e, beta);
    let lower = 1.0;
    let partial = integrate_log(|t| lng(t).map(f64::exp).unwrap_or(f64::NAN), lower, b, QuadOptions::rel(1e-8))
        .map(|r| r.value)
        .unwrap_or(f64::NAN);
    Ok(ConditionReport {
        condition,
        verdict,
        tail_exponent: e,
        log_exponent: beta,
        margin,
        partial_integral: partial,
        window,
        details: format!("integrand {what}; fitted t^{e:.4} (ln t)^{beta:.4}; decided by {by} exponent"),
    })
}

fn window_for(model: &NonlinearityModel) -> Result<(f64, f64)> {
    let (lo, hi) = model.domain();
    let a = FIT_WINDOW.0.max(lo);
    let b = FIT_WINDOW.1.min(hi);
    if !(b > a * 10.0) {
        return Err(Error::InvalidParameter(format!(
            "nonlinearity range does not reach the tail window [{:e}, {:e}]",
            FIT_WINDOW.0, FIT_WINDOW.1
        )));
    }
    Ok((a, b))
}

fn check_s(s: f64) -> Result<()> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::InvalidParameter(format!("s must lie in (0, 1), got {s}")));
    }
    Ok(())
}

/// Integral test for `∫_1^∞ (t/f(t))^{1/(2s)} dt`.
pub fn check_l1(model: &NonlinearityModel, s: f64) -> Result<ConditionReport> {
    check_s(s)?;
    let w = window_for(model)?;
    let mut r = tail_test(
        Condition::L1bis,
        |t| Ok((t.ln() - ln_f(model, t)?) / (2.0 * s)),
        w,
        "(t/f(t))^(1/(2s))",
    )?;
    r.condition = Condition::L1;
    Ok(r)
}

/// Integral test for `∫^∞ f(t) t^{-2/(1-s)} dt`.
pub fn check_e(model: &NonlinearityModel, s: f64) -> Result<ConditionReport> {
    check_s(s)?;
    let w = window_for(model)?;
    tail_test(
        Condition::E,
        |t| Ok(ln_f(model, t)? - 2.0 / (1.0 - s) * t.ln()),
        w,
        "f(t) t^(-2/(1-s))",
    )
}

/// Integral test for `U = ψ(δ^s)` near the boundary: with `η = ψ(δ^s)`,
/// `∫ U dδ = (1/s) ∫^∞ η φ(η)^{(1-s)/s} F(η)^{-1/2} dη`.
///
/// When `φ` itself is infinite, `U` is undefined and the report diverges.
pub fn check_u_integrability(model: &NonlinearityModel, s: f64) -> Result<ConditionReport> {
    check_s(s)?;
    let w = window_for(model)?;
    let prof = match KOProfile::new(model, s) {
        Ok(p) => p,
        Err(Error::DivergentIntegral { exponent }) => {
            return Ok(ConditionReport {
                condition: Condition::UL1,
                verdict: Verdict::Diverges,
                tail_exponent: f64::NAN,
                log_exponent: f64::NAN,
                margin: f64::INFINITY,
                partial_integral: f64::INFINITY,
                window: w,
                details: format!("φ is infinite (F^(-1/2) ~ t^-{exponent:.4}), so ψ(δ^s) is not defined"),
            })
        }
        Err(e) => return Err(e),
    };
    tail_test(
        Condition::UL1,
        |t| Ok(t.ln() + (1.0 - s) / s * prof.phi(t)?.ln() - 0.5 * prof.big_f(t)?.ln()),
        w,
        "η φ(η)^((1-s)/s) F(η)^(-1/2)",
    )
}

impl KOProfile {
    pub fn check_l1(&self) -> Result<ConditionReport> {
        check_l1(&self.model, self.s)
    }

    pub fn check_e(&self) -> Result<ConditionReport> {
        check_e(&self.model, self.s)
    }

    pub fn check_u_integrability(&self) -> Result<ConditionReport> {
        check_u_integrability(&self.model, self.s)
    }
}

/// Worst relative margins of the two-sided inequalities; negative values
/// are violations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioReport {
    /// `2+m <= t f/F <= 2+M`
    pub ftech: f64,
    /// `2/M <= v|ψ'(v)|/ψ(v) <= 2/m`
    pub psitech: f64,
    /// `c^{-2/M} ψ(v) <= ψ(cv) <= c^{-2/m} ψ(v)` for `c < 1`
    pub mono_psi: f64,
    /// `2(2+m)/M² <= v² f(ψ(v))/(2ψ(v)) <= 2(2+M)/m²`
    pub mono_psi2: f64,
    /// Observed range of `v² f(ψ(v))/(2ψ(v))`.
    pub mono_psi2_range: (f64, f64),
    pub c_values: Vec<f64>,
    pub samples: usize,
}

impl RatioReport {
    pub fn worst(&self) -> f64 {
        self.ftech.min(self.psitech).min(self.mono_psi).min(self.mono_psi2)
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.worst() >= -tol
    }
}

fn two_sided(lo: f64, x: f64, hi: f64) -> f64 {
    ((x - lo) / lo.abs()).min((hi - x) / hi.abs())
}

/// Evaluate the ratio inequalities on `t_grid` (with `v = φ(t)`).
pub fn verify_ratio_bounds(profile: &KOProfile, t_grid: &[f64]) -> Result<RatioReport> {
    let env = *profile.envelope()?;
    let (m, mm) = (env.m, env.big_m);
    let model = &profile.model;
    let c_values = vec![0.1, 0.25, 0.5, 0.75, 0.9];
    let mut rep = RatioReport {
        ftech: f64::INFINITY,
        psitech: f64::INFINITY,
        mono_psi: f64::INFINITY,
        mono_psi2: f64::INFINITY,
        mono_psi2_range: (f64::INFINITY, 0.0),
        c_values: c_values.clone(),
        samples: t_grid.len(),
    };
    let q_lo = 2.0 * (2.0 + m) / (mm * mm);
    let q_hi = 2.0 * (2.0 + mm) / (m * m);
    for &t in t_grid {
        let f = model.eval_f(t)?;
        let big_f = profile.big_f(t)?;
        rep.ftech = rep.ftech.min(two_sided(2.0 + m, t * f / big_f, 2.0 + mm));
        let v = profile.phi(t)?;
        rep.psitech = rep.psitech.min(two_sided(2.0 / mm, v * big_f.sqrt() / t, 2.0 / m));
        for &c in &c_values {
            let r = profile.psi(c * v)? / t;
            rep.mono_psi = rep.mono_psi.min(two_sided(c.powf(-2.0 / mm), r, c.powf(-2.0 / m)));
        }
        let q = v * v * f / (2.0 * t);
        rep.mono_psi2_range = (rep.mono_psi2_range.0.min(q), rep.mono_psi2_range.1.max(q));
        rep.mono_psi2 = rep.mono_psi2.min(two_sided(q_lo, q, q_hi));
    }
    Ok(rep)
}

/// Qualitative behaviour predicted for `f = t^p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PowerRegime {
    Nonexistence,
    LargeSolution,
    L1Escape,
    UniformBlowup,
    Unclassified,
}

/// Regime map for pure powers.
pub fn classify_power_regime(p: f64, s: f64) -> Result<PowerRegime> {
    check_s(s)?;
    if !(p > 0.0) {
        return Err(Error::InvalidParameter(format!("p must be positive, got {p}")));
    }
    Ok(if p >= 1.0 + 2.0 * s / (1.0 - s) {
        PowerRegime::Nonexistence
    } else if p > 1.0 + 2.0 * s {
        PowerRegime::LargeSolution
    } else if p <= 1.0 {
        PowerRegime::UniformBlowup
    } else if p < 1.0 + s {
        PowerRegime::L1Escape
    } else {
        PowerRegime::Unclassified
    })
}
