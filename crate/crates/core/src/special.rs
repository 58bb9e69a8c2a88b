//! Special functions needed by the ball kernels.

use statrs::function::gamma::gamma;

/// Complete Beta function `Γ(a)Γ(b)/Γ(a+b)`, valid for `a > 0` and any
/// non-integer `b` with `a + b > 0`.
pub fn beta(a: f64, b: f64) -> f64 {
    gamma(a) * gamma(b) / gamma(a + b)
}

// z^a Σ_n (1-b)_n z^n / (n! (a+n)), converging geometrically for z < 1.
fn lower_series(z: f64, a: f64, b: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0 / a;
    for n in 0..2000 {
        let nf = n as f64;
        term *= (nf + 1.0 - b) * z / (nf + 1.0);
        let add = term / (a + nf + 1.0);
        sum += add;
        if add.abs() <= 1e-17 * sum.abs() {
            break;
        }
    }
    z.powf(a) * sum
}

/// Unregularized incomplete Beta `B_z(a, b) = ∫_0^z t^{a-1} (1-t)^{b-1} dt`
/// for `a > 0`, `0 <= z < 1` and real `b` (negative `b` allowed).
///
/// Uses the hypergeometric series for `z <= 1/2` and the reflection
/// `B_z(a,b) = B(a,b) - B_{1-z}(b,a)` otherwise, so both series converge
/// at least like `2^{-n}`. The case `b = 0` is only supported for
/// `a = 1/2`, where `B_z = ln((1+√z)/(1-√z))`.
pub fn inc_beta(z: f64, a: f64, b: f64) -> f64 {
    inc_beta_c(z, 1.0 - z, a, b)
}

/// [`inc_beta`] with the complement `zc = 1 - z` supplied separately, so
/// that `z` extremely close to 1 keeps full relative precision.
pub fn inc_beta_c(z: f64, zc: f64, a: f64, b: f64) -> f64 {
    debug_assert!(a > 0.0);
    if z <= 0.0 {
        return 0.0;
    }
    if b.abs() < 1e-9 {
        assert!(
            (a - 0.5).abs() < 1e-12,
            "incomplete Beta with b = 0 is implemented for a = 1/2 only"
        );
        let r = z.sqrt();
        return ((1.0 + r) * (1.0 + r) / zc).ln();
    }
    if z <= 0.5 {
        lower_series(z, a, b)
    } else {
        beta(a, b) - lower_series(zc, b, a)
    }
}
