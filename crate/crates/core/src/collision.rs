//! Collision probabilities of a single spherical-cap filter.
//!
//! For unit vectors x, y at angle α and θ ~ N(0, I/d), the pair
//! (X, Y) = (√d·θᵀx, √d·θᵀy) is standard bivariate normal with correlation
//! cos α. With the normalized threshold t = √d·τ:
//!
//! - the marginal pass probability is p₀ = 1 − Φ(t);
//! - the joint pass probability is
//!   P(X ≥ t, Y ≥ t) = ∫ₜ^∞ (1 − Φ((t − v·cos α)/sin α))·φ(v) dv;
//! - the conditional probability q(α) = P(X ≥ t | Y ≥ t) is the joint over p₀.
//!
//! [`collision_bounds`] returns closed-form bounds on q(α),
//! [`joint_probability`] evaluates the integral above, and
//! [`rho_from_bounds`] turns the bounds into the ρ exponent.

use std::f64::consts::{FRAC_PI_2, LN_2, PI};

use serde::{Deserialize, Serialize};

use crate::gauss::{ln_sqrt_2pi, normal_log_sf, normal_pdf, normal_sf};
use crate::quadrature::integrate;
use crate::sphere::Angle;
use crate::{Error, Result};

/// Integration window above the threshold: the integrand decays like
/// e^{−u²/2}, so the truncated mass is below 1 − Φ(12) ≈ 1.8e-33.
const QUAD_WINDOW: f64 = 12.0;

/// A filter threshold together with the angle of a point pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterGeometry {
    /// Normalized threshold t = √d·τ.
    pub t: f64,
    pub alpha: Angle,
}

impl FilterGeometry {
    pub fn new(t: f64, alpha: f64) -> Result<Self> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::domain(format!("threshold t must be positive, got {t}")));
        }
        if !(alpha > 0.0 && alpha < PI) {
            return Err(Error::domain(format!("angle must lie in (0, pi), got {alpha}")));
        }
        Ok(Self {
            t,
            alpha: Angle::new(alpha)?,
        })
    }

    /// s = t·tan(α/2), the argument of every closed-form bound.
    pub fn scaled_threshold(&self) -> f64 {
        self.t * (self.alpha.radians() / 2.0).tan()
    }

    /// Whether t·tan(α/2) ≥ 1, the hypothesis under which the bounds are proven.
    pub fn is_valid(&self) -> bool {
        self.scaled_threshold() >= 1.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// α ∈ (0, π/2]
    Acute,
    /// α ∈ (π/2, π)
    Obtuse,
}

/// Closed-form interval for P(h(x) = 1 | h(y) = 1).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollisionBoundReport {
    pub lo: f64,
    pub hi: f64,
    pub regime: Regime,
    /// t·tan(α/2) ≥ 1. When false the formulas are still returned but
    /// nothing is proven about them.
    pub valid: bool,
    /// Exponent applied to 1 − Φ(s) in the lower bound: (1 + 2/t²)² in the
    /// obtuse regime, 1 otherwise.
    pub exponent_adjust: f64,
}

/// Bounds on the conditional collision probability at geometry `g`.
///
/// With s = t·tan(α/2):
/// - α < π/2: 1 − Φ(s) ≤ q ≤ min(1, 2(1 − Φ(s)));
/// - α > π/2: ¼(1 − Φ(s))^{(1+2/t²)²} ≤ q ≤ 1 − Φ(s);
/// - α = π/2: X and Y are independent and q = 1 − Φ(t) exactly.
pub fn collision_bounds(g: &FilterGeometry) -> CollisionBoundReport {
    let t = g.t;
    let alpha = g.alpha.radians();
    let s = g.scaled_threshold();
    let valid = s >= 1.0;
    if alpha == FRAC_PI_2 {
        let p = normal_sf(t);
        return CollisionBoundReport {
            lo: p,
            hi: p,
            regime: Regime::Acute,
            valid,
            exponent_adjust: 1.0,
        };
    }
    if alpha < FRAC_PI_2 {
        let p = normal_sf(s);
        CollisionBoundReport {
            lo: p,
            hi: (2.0 * p).min(1.0),
            regime: Regime::Acute,
            valid,
            exponent_adjust: 1.0,
        }
    } else {
        let exponent = obtuse_exponent(t);
        CollisionBoundReport {
            lo: 0.25 * (exponent * normal_log_sf(s)).exp(),
            hi: normal_sf(s),
            regime: Regime::Obtuse,
            valid,
            exponent_adjust: exponent,
        }
    }
}

fn obtuse_exponent(t: f64) -> f64 {
    let e = 1.0 + 2.0 / (t * t);
    e * e
}

/// Exact joint pass probability P(X ≥ t ∧ Y ≥ t), by adaptive quadrature.
///
/// The substitution v = t + u factors φ(t) out of the integrand, so the
/// result keeps its relative accuracy when it is far below 1e-10 (as it is
/// at the thresholds chosen for large n).
pub fn joint_probability(g: &FilterGeometry) -> f64 {
    let t = g.t;
    let (sin_a, cos_a) = g.alpha.radians().sin_cos();
    let integrand = |u: f64| {
        let v = t + u;
        normal_sf((t - v * cos_a) / sin_a) * (-t * u - 0.5 * u * u).exp()
    };
    let scaled = integrate(integrand, 0.0, QUAD_WINDOW, 1e-15, 1e-12, 4000);
    normal_pdf(t) * scaled.value
}

/// P(X ≥ t | Y ≥ t) = joint / (1 − Φ(t)).
pub fn conditional_probability(g: &FilterGeometry) -> f64 {
    (joint_probability(g) / normal_sf(g.t)).min(1.0)
}

/// Which of the three angle configurations of the ρ analysis applies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RhoCase {
    /// 0 < γ < cγ ≤ π/2
    BothAcute,
    /// γ ≤ π/2 < cγ
    Straddling,
    /// π/2 < γ < cγ
    BothObtuse,
}

impl RhoCase {
    pub fn classify(gamma: f64, c_gamma: f64) -> Self {
        if c_gamma <= FRAC_PI_2 {
            RhoCase::BothAcute
        } else if gamma <= FRAC_PI_2 {
            RhoCase::Straddling
        } else {
            RhoCase::BothObtuse
        }
    }
}

/// ρ = ln(1/q₁)/ln(1/q₂) together with the probabilities it was computed from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RhoReport {
    pub rho: f64,
    pub q1_bound: f64,
    pub q2_bound: f64,
    /// ln q₁ and ln q₂; q₂ underflows `f64` long before its logarithm does.
    pub ln_q1: f64,
    pub ln_q2: f64,
    /// 1/c²
    pub asymptote: f64,
    /// rho − 1/c². May be negative.
    pub gap: f64,
    pub case: RhoCase,
}

fn check_rho_domain(gamma: f64, c: f64, t: f64) -> Result<()> {
    if !(c > 1.0) || !(gamma > 0.0) || !(c * gamma < PI) {
        return Err(Error::domain(format!(
            "rho needs c > 1 and 0 < c*gamma < pi (c = {c}, gamma = {gamma})"
        )));
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::domain(format!("threshold t must be positive, got {t}")));
    }
    if t * (gamma / 2.0).tan() < 1.0 {
        return Err(Error::domain(format!(
            "t*tan(gamma/2) = {} < 1: the collision bounds are not established there",
            t * (gamma / 2.0).tan()
        )));
    }
    Ok(())
}

/// ρ from the closed-form bounds: the lower bound on q₁ at angle γ and the
/// upper bound on q₂ at angle cγ, with the regime of each picked per
/// [`RhoCase`]. In the all-acute case q₂ uses 2(1 − Φ(s)) even when cγ = π/2.
pub fn rho_from_bounds(gamma: Angle, c: f64, t: f64) -> Result<RhoReport> {
    let gamma = gamma.radians();
    check_rho_domain(gamma, c, t)?;
    let case = RhoCase::classify(gamma, c * gamma);
    let s1 = t * (gamma / 2.0).tan();
    let s2 = t * (c * gamma / 2.0).tan();
    let ln_q1 = match case {
        RhoCase::BothAcute | RhoCase::Straddling => normal_log_sf(s1),
        RhoCase::BothObtuse => 0.25f64.ln() + obtuse_exponent(t) * normal_log_sf(s1),
    };
    let ln_q2 = match case {
        RhoCase::BothAcute => (LN_2 + normal_log_sf(s2)).min(0.0),
        RhoCase::Straddling | RhoCase::BothObtuse => normal_log_sf(s2),
    };
    let rho = ln_q1 / ln_q2;
    let asymptote = 1.0 / (c * c);
    Ok(RhoReport {
        rho,
        q1_bound: ln_q1.exp(),
        q2_bound: ln_q2.exp(),
        ln_q1,
        ln_q2,
        asymptote,
        gap: rho - asymptote,
        case,
    })
}

/// The explicit vanishing term in ρ ≤ 1/c² + gap for each case, with
/// T = t·tan(γ/2) and A = (t²/2)·tan²(γ/2):
///
/// - all acute: (ln 2T + ln√(2π)) / (c²A + ln T)
/// - straddling: (ln 2T + ln√(2π)) / (c²A + ln T + ln 2)
/// - all obtuse: (4/t² + 4/t⁴)/c² + ((1 + 2/t²)²·ln 2T + ln 4) / (c²A + ln T + ln 2)
pub fn closed_form_gap(gamma: Angle, c: f64, t: f64) -> Result<f64> {
    let gamma = gamma.radians();
    check_rho_domain(gamma, c, t)?;
    let big_t = t * (gamma / 2.0).tan();
    let a = 0.5 * big_t * big_t;
    let c2 = c * c;
    Ok(match RhoCase::classify(gamma, c * gamma) {
        RhoCase::BothAcute => ((2.0 * big_t).ln() + ln_sqrt_2pi()) / (c2 * a + big_t.ln()),
        RhoCase::Straddling => {
            ((2.0 * big_t).ln() + ln_sqrt_2pi()) / (c2 * a + big_t.ln() + LN_2)
        }
        RhoCase::BothObtuse => {
            let t2 = t * t;
            (4.0 / t2 + 4.0 / (t2 * t2)) / c2
                + (obtuse_exponent(t) * (2.0 * big_t).ln() + 4f64.ln())
                    / (c2 * a + big_t.ln() + LN_2)
        }
    })
}

/// ρ of the filter family itself, from the exact conditional probabilities
/// at γ and cγ rather than their bounds.
pub fn rho_exact(gamma: Angle, c: f64, t: f64) -> Result<f64> {
    let g = gamma.radians();
    if !(c > 1.0) || !(g > 0.0) || !(c * g < PI) {
        return Err(Error::domain("rho needs c > 1 and 0 < c*gamma < pi"));
    }
    let q1 = conditional_probability(&FilterGeometry::new(t, g)?);
    let q2 = conditional_probability(&FilterGeometry::new(t, c * g)?);
    rho_empirical(q1, q2)
}

/// ρ̂ = ln(1/q̂₁)/ln(1/q̂₂) from estimated conditional probabilities.
pub fn rho_empirical(q1_hat: f64, q2_hat: f64) -> Result<f64> {
    if !(0.0 < q2_hat && q2_hat < q1_hat && q1_hat < 1.0) {
        return Err(Error::domain(format!(
            "empirical rho needs 0 < q2 < q1 < 1, got q1 = {q1_hat}, q2 = {q2_hat}"
        )));
    }
    Ok(q1_hat.ln() / q2_hat.ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gauss::normal_sf;
    use crate::sphere::effective_c;
    use proptest::prelude::*;

    fn geom(t: f64, a: f64) -> FilterGeometry {
        FilterGeometry::new(t, a).unwrap()
    }

    fn angle(a: f64) -> Angle {
        Angle::new(a).unwrap()
    }

    #[test]
    fn geometry_rejects_degenerate_angles() {
        assert!(FilterGeometry::new(2.0, 0.0).is_err());
        assert!(FilterGeometry::new(2.0, PI).is_err());
        assert!(FilterGeometry::new(0.0, 1.0).is_err());
        assert!(!geom(1.5, PI / 6.0).is_valid());
    }

    #[test]
    fn bounds_at_orthogonality_collapse() {
        let b = collision_bounds(&geom(2.0, FRAC_PI_2));
        assert_eq!(b.lo, b.hi);
        assert!((b.lo - 0.022_750_131_948_179_2).abs() < 1e-15);
        assert!(b.valid);
    }

    #[test]
    fn bounds_acute_example() {
        let b = collision_bounds(&geom(2.0, PI / 3.0));
        assert_eq!(b.regime, Regime::Acute);
        assert!(b.valid);
        assert!((b.lo - 0.124_106_539_494_961_8).abs() < 1e-13);
        assert!((b.hi - 0.248_213_078_989_923_6).abs() < 1e-13);
    }

    #[test]
    fn bounds_obtuse_example() {
        let b = collision_bounds(&geom(2.0, 2.0 * PI / 3.0));
        assert_eq!(b.regime, Regime::Obtuse);
        assert!(b.valid);
        assert_eq!(b.exponent_adjust, 2.25);
        assert!((b.hi / 2.660_027_525_696_248_5e-4 - 1.0).abs() < 1e-12);
        assert!((b.lo / 2.259_091_402_283_803e-9 - 1.0).abs() < 1e-10);
    }

    #[test]
    fn acute_upper_bound_is_twice_the_lower() {
        let b = collision_bounds(&geom(0.1, 0.2));
        assert!(!b.valid);
        assert_eq!(b.hi, 2.0 * b.lo);
        assert!(b.hi <= 1.0);
    }

    #[test]
    fn joint_probability_examples() {
        // independence at α = π/2
        let j = joint_probability(&geom(2.0, FRAC_PI_2));
        assert!((j - normal_sf(2.0).powi(2)).abs() < 1e-15);
        // perfect correlation limit
        let j = joint_probability(&geom(1.0, 1e-4));
        assert!((j - 0.158_655_253_931_457).abs() < 1e-4);
        // mpmath reference values
        let j = joint_probability(&geom(2.0, PI / 3.0));
        assert!((j - 0.004_052_946_235_162_98).abs() < 1e-13);
        let j = joint_probability(&geom(2.0, 2.0 * PI / 3.0));
        assert!((j - 3.243_971_016_711_72e-6).abs() < 1e-15);
    }

    #[test]
    fn joint_probability_keeps_relative_accuracy_far_out() {
        // γ = 0.3 at the threshold that the selection rule picks for n = 1e4,
        // d = 64, c = 2 (mpmath: 1.58199572607594e-45).
        let t = (2.0 * 1e4f64.ln()).sqrt() / 0.3f64.tan();
        let j = joint_probability(&geom(t, 0.3));
        assert!((j / 1.581_995_726_075_94e-45 - 1.0).abs() < 1e-9, "{j:e}");
    }

    #[test]
    fn conditional_examples() {
        let q = conditional_probability(&geom(2.0, FRAC_PI_2));
        assert!((q - normal_sf(2.0)).abs() < 1e-12);
        let g = geom(2.0, PI / 3.0);
        let q = conditional_probability(&g);
        let b = collision_bounds(&g);
        assert!(b.lo <= q && q <= b.hi);
        assert!((q - 0.178_150_449_605_957_3).abs() < 1e-11);
    }

    #[test]
    fn rho_examples() {
        let r = rho_from_bounds(angle(PI / 4.0), 2.0, 8.0).unwrap();
        assert_eq!(r.asymptote, 0.25);
        assert_eq!(r.case, RhoCase::BothAcute);
        // 50-digit reference evaluation of the case-wise bounds
        assert!((r.rho - 0.223_877_809_310_410_1).abs() < 1e-12, "{}", r.rho);
        assert!(r.gap < 0.0);

        let rhos: Vec<f64> = [4.0, 16.0, 64.0]
            .iter()
            .map(|&t| rho_from_bounds(angle(PI / 4.0), 2.0, t).unwrap().rho)
            .collect();
        assert!(rhos[0] > rhos[1] && rhos[1] > rhos[2]);
        assert!((rhos[0] - 0.312_461_205_707_034_3).abs() < 1e-12);
        assert!((rhos[2] - 0.173_251_669_940_522_05).abs() < 1e-12);
    }

    #[test]
    fn rho_domain_errors() {
        assert!(rho_from_bounds(angle(0.3), 1.0, 10.0).is_err());
        assert!(rho_from_bounds(angle(2.0), 2.0, 10.0).is_err());
        // t·tan(γ/2) < 1
        assert!(rho_from_bounds(angle(0.3), 2.0, 2.0).is_err());
    }

    #[test]
    fn rho_cases_are_selected_by_angle() {
        let r = rho_from_bounds(angle(1.0), 2.0, 10.0).unwrap();
        assert_eq!(r.case, RhoCase::Straddling);
        assert!((r.ln_q2 - normal_log_sf(10.0 * 1f64.tan())).abs() < 1e-12);
        let r = rho_from_bounds(angle(1.8), 1.5, 10.0).unwrap();
        assert_eq!(r.case, RhoCase::BothObtuse);
        let s1 = 10.0 * 0.9f64.tan();
        assert!((r.ln_q1 - (0.25f64.ln() + 1.02f64.powi(2) * normal_log_sf(s1))).abs() < 1e-12);
    }

    #[test]
    fn empirical_rho_examples() {
        assert!(rho_empirical(0.3, 0.3).is_err());
        assert!((rho_empirical(0.5, 0.25).unwrap() - 0.5).abs() < 1e-15);
        assert!((rho_empirical(0.1, 0.001).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!(rho_empirical(0.2, 0.4).is_err());
        assert!(rho_empirical(1.0, 0.4).is_err());
    }

    #[test]
    fn exact_rho_is_below_the_bound_rho() {
        for t in [4.0, 6.0, 8.0] {
            let exact = rho_exact(angle(PI / 4.0), 2.0, t).unwrap();
            let bound = rho_from_bounds(angle(PI / 4.0), 2.0, t).unwrap().rho;
            assert!(exact < bound, "t = {t}: exact {exact} bound {bound}");
        }
    }

    #[test]
    fn conditional_probability_is_monotone() {
        for &t in &[1.5, 2.5, 4.0] {
            let mut prev = f64::INFINITY;
            for k in 1..30 {
                let q = conditional_probability(&geom(t, k as f64 * PI / 30.0));
                assert!(q < prev + 1e-10, "t = {t}, k = {k}");
                prev = q;
            }
        }
        for k in 1..6 {
            let a = k as f64 * PI / 6.0;
            let mut prev = f64::INFINITY;
            for j in 0..10 {
                let q = conditional_probability(&geom(1.0 + 0.5 * j as f64, a));
                assert!(q < prev + 1e-10);
                prev = q;
            }
        }
    }

    #[test]
    fn gap_is_decreasing_and_dominated_in_the_acute_case() {
        let gamma = angle(PI / 4.0);
        let mut prev = f64::INFINITY;
        for t in [4.0, 8.0, 16.0, 32.0, 64.0, 128.0] {
            let r = rho_from_bounds(gamma, 2.0, t).unwrap();
            let bound = closed_form_gap(gamma, 2.0, t).unwrap();
            assert!(r.gap < prev);
            assert!(r.gap <= bound, "t = {t}: gap {} bound {bound}", r.gap);
            prev = r.gap;
        }
        // where tan(cγ/2) ≈ c·tan(γ/2) the gap is positive
        let small = angle(0.05);
        for t in [50.0, 100.0, 400.0] {
            let r = rho_from_bounds(small, 2.0, t).unwrap();
            assert!(r.gap > 0.0 && r.gap <= closed_form_gap(small, 2.0, t).unwrap());
        }
    }

    proptest! {
        #[test]
        fn conditional_is_sandwiched(t in 1.5f64..6.0, a in 0.05f64..3.09) {
            let g = geom(t, a);
            prop_assume!(g.is_valid());
            let b = collision_bounds(&g);
            let q = conditional_probability(&g);
            prop_assert!(b.lo <= q + 1e-12 && q <= b.hi + 1e-12, "t {} a {}: {} not in [{}, {}]", t, a, q, b.lo, b.hi);
        }

        #[test]
        fn rho_respects_the_chord_ratio(g in 0.05f64..1.5, c in 1.2f64..3.0, t in 1.0f64..80.0) {
            prop_assume!(c * g < PI - 0.05);
            prop_assume!(t * (g / 2.0).tan() >= 1.0);
            let gamma = angle(g);
            let r = rho_from_bounds(gamma, c, t).unwrap();
            let c_hat = effective_c(gamma, c).unwrap();
            let gap = closed_form_gap(gamma, c, t).unwrap();
            prop_assert!(r.rho <= 1.0 / (c_hat * c_hat) + gap + 1e-12);
        }
    }
}
