//! Standard normal special functions and the classical tail estimates built
//! on them.
//!
//! `erf`/`erfc` are evaluated with two expansions that are each accurate to a
//! few ulps in their own range:
//!
//! - for |z| < 1 the everywhere-positive series
//!   erf(z) = (2/√π)·e^{−z²}·Σ 2ⁿ z^{2n+1} / (1·3·…·(2n+1)),
//!   which has no cancellation;
//! - for z ≥ 1 the Laplace continued fraction for erfc, evaluated by the
//!   modified Lentz method. It also gives ln erfc without underflow, which the
//!   ρ computations need far beyond the range of `f64`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

const SERIES_LIMIT: f64 = 1.0;
const FRAC_1_SQRT_PI: f64 = 0.564_189_583_547_756_3;
const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal density φ(x) = e^{−x²/2}/√(2π).
pub fn normal_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal CDF Φ(x).
pub fn normal_cdf(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 - upper_tail(x)
    } else {
        upper_tail(-x)
    }
}

/// Upper tail 1 − Φ(x), with full relative precision for large positive x.
pub fn normal_sf(x: f64) -> f64 {
    if x >= 0.0 {
        upper_tail(x)
    } else {
        1.0 - upper_tail(-x)
    }
}

/// ln(1 − Φ(x)). Finite for every finite x, including x where 1 − Φ(x)
/// underflows.
pub fn normal_log_sf(x: f64) -> f64 {
    let z = x * FRAC_1_SQRT_2;
    if z >= SERIES_LIMIT {
        // 1 − Φ(x) = ½·erfc(z) = ½·e^{−z²}/√π · K(z)
        (0.5 * FRAC_1_SQRT_PI).ln() - z * z + erfc_fraction(z).ln()
    } else if x >= 0.0 {
        upper_tail(x).ln()
    } else {
        (-upper_tail(-x)).ln_1p()
    }
}

/// 1 − Φ(x) for x ≥ 0.
fn upper_tail(x: f64) -> f64 {
    debug_assert!(x >= 0.0 || x.is_nan());
    let z = x * FRAC_1_SQRT_2;
    if z < SERIES_LIMIT {
        0.5 * (1.0 - erf_series(z))
    } else {
        0.5 * FRAC_1_SQRT_PI * (-z * z).exp() * erfc_fraction(z)
    }
}

fn erf_series(z: f64) -> f64 {
    let z2 = z * z;
    let mut term = z;
    let mut sum = z;
    let mut n = 0.0;
    loop {
        n += 1.0;
        term *= 2.0 * z2 / (2.0 * n + 1.0);
        sum += term;
        if term <= sum * 1e-17 || n > 200.0 {
            break;
        }
    }
    2.0 * FRAC_1_SQRT_PI * (-z2).exp() * sum
}

/// K(z) with erfc(z) = e^{−z²}/√π · K(z), from
/// K(z) = 1/(z + (1/2)/(z + 1/(z + (3/2)/(z + 2/(z + …))))).
fn erfc_fraction(z: f64) -> f64 {
    const TINY: f64 = 1e-300;
    // f = z + a1/(z + a2/(z + ...)), a_k = k/2; K = 1/f.
    let mut f = z;
    if f == 0.0 {
        f = TINY;
    }
    let mut c = f;
    let mut d = 0.0;
    for k in 1..500 {
        let a = k as f64 * 0.5;
        d = z + a * d;
        if d == 0.0 {
            d = TINY;
        }
        c = z + a / c;
        if c == 0.0 {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    1.0 / f
}

/// Inverse CDF Φ⁻¹(p) for p ∈ (0, 1).
///
/// Solved on the monotone function ln(1 − Φ) by safeguarded Newton iteration
/// inside a bisection bracket, so it inherits the accuracy of [`normal_sf`].
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain(format!("quantile needs 0 < p < 1, got {p}")));
    }
    if p == 0.5 {
        return Ok(0.0);
    }
    if p > 0.5 {
        Ok(upper_quantile(1.0 - p))
    } else {
        Ok(-upper_quantile(p))
    }
}

/// x ≥ 0 with 1 − Φ(x) = a, for a ∈ (0, 1/2).
fn upper_quantile(a: f64) -> f64 {
    let target = a.ln();
    let f = |x: f64| normal_log_sf(x) - target;
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    while f(hi) > 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    // ln(1 − Φ) is concave, so Newton from the right converges monotonically;
    // the bracket guards the first steps.
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let fx = f(x);
        if fx == 0.0 {
            return x;
        }
        if fx > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        // d/dx ln(1 − Φ(x)) = −φ(x)/(1 − Φ(x)) = −exp(ln φ − ln(1 − Φ))
        let slope = -(-0.5 * x * x + FRAC_1_SQRT_2PI.ln() - normal_log_sf(x)).exp();
        let mut next = x - fx / slope;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-15 * x.abs().max(1.0) || hi - lo <= 1e-15 * hi {
            return next;
        }
        x = next;
    }
    x
}

/// Two-sided estimate lo ≤ P(g ≥ t) ≤ hi for g ~ N(0, 1).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailInterval {
    pub lo: f64,
    pub hi: f64,
}

impl TailInterval {
    pub fn contains(&self, p: f64) -> bool {
        self.lo <= p && p <= self.hi
    }
}

/// Mills-ratio bounds, for t > 0:
/// t/(t²+1)·φ(t) ≤ 1 − Φ(t) ≤ φ(t)/t.
pub fn normal_tail_bounds(t: f64) -> Result<TailInterval> {
    if !(t > 0.0) {
        return Err(Error::domain(format!("tail bounds need t > 0, got {t}")));
    }
    let density = normal_pdf(t);
    Ok(TailInterval {
        lo: t / (t * t + 1.0) * density,
        hi: density / t,
    })
}

/// φ(t) − t·(1 − Φ(t)), the closed form of ∫ₜ^∞ (x − t)·φ(x) dx.
pub fn truncated_mean_identity(t: f64) -> f64 {
    normal_pdf(t) - t * normal_sf(t)
}

/// exp(−(η₂² − η₁²)/2), an upper bound on (1 − Φ(η₂))/(1 − Φ(η₁)) for
/// 0 ≤ η₁ ≤ η₂.
pub fn tail_ratio_bound(eta1: f64, eta2: f64) -> Result<f64> {
    if !(0.0 <= eta1 && eta1 <= eta2) {
        return Err(Error::domain(format!(
            "tail ratio bound needs 0 <= eta1 <= eta2, got ({eta1}, {eta2})"
        )));
    }
    Ok((-(eta2 * eta2 - eta1 * eta1) / 2.0).exp())
}

/// ln √(2π).
pub(crate) fn ln_sqrt_2pi() -> f64 {
    0.5 * (2.0 * PI).ln()
}
