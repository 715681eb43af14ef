//! Monte Carlo checks of the analytic collision probabilities.
//!
//! All estimators split their trials into fixed chunks, each driven by its own
//! generator `derive_seed(seed, chunk)`. Counts are integers, so the merged
//! result is identical for any number of worker threads.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::collision::{
    collision_bounds, conditional_probability, rho_empirical, rho_exact, rho_from_bounds,
    CollisionBoundReport, FilterGeometry, RhoReport,
};
use crate::rng::{derive_seed, normal_tail, seeded_rng, SeededRng};
use crate::sphere::{planted_at_angle, sample_uniform_sphere, Angle};
use crate::{Error, Result};

const CHUNK: u64 = 1 << 16;
const MIN_TRIALS: u64 = 1_000;
/// Stream reserved for the fixed point pair of the full-dimensional estimator.
const PAIR_STREAM: u64 = u64::MAX;

pub const DEFAULT_K: f64 = 4.0;

/// A Bernoulli proportion and its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateWithError {
    pub value: f64,
    pub std_error: f64,
    /// Trials the proportion is taken over (the accepted ones, for
    /// conditional estimates).
    pub trials: u64,
}

impl EstimateWithError {
    /// √(p(1−p)/n). At p = 0 or 1 the estimate 1/(n+1) stands in for p so
    /// that σ stays positive.
    pub fn from_counts(hits: u64, trials: u64) -> Self {
        let n = trials as f64;
        let value = hits as f64 / n;
        let p = if hits == 0 || hits == trials {
            1.0 / (n + 1.0)
        } else {
            value
        };
        Self {
            value,
            std_error: (p * (1.0 - p) / n).sqrt(),
            trials,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCheckRecord {
    pub geometry: FilterGeometry,
    pub estimate: EstimateWithError,
    pub bound: CollisionBoundReport,
    /// Quadrature value of the conditional probability.
    pub exact: f64,
    pub k: f64,
    /// estimate ∈ [lo − kσ, hi + kσ]
    pub contained: bool,
    /// hi / estimate
    pub upper_looseness: f64,
    /// estimate / lo
    pub lower_looseness: f64,
}

pub fn is_contained(estimate: &EstimateWithError, bound: &CollisionBoundReport, k: f64) -> bool {
    let slack = k * estimate.std_error;
    estimate.value >= bound.lo - slack && estimate.value <= bound.hi + slack
}

fn chunked_counts<F>(trials: u64, seed: u64, body: F) -> (u64, u64)
where
    F: Fn(&mut SeededRng, u64) -> (u64, u64) + Sync,
{
    let chunks = trials.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|j| {
            let mut rng = seeded_rng(derive_seed(seed, j));
            body(&mut rng, CHUNK.min(trials - j * CHUNK))
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1))
}

fn check_trials(trials: u64) -> Result<()> {
    if trials < MIN_TRIALS {
        return Err(Error::domain(format!(
            "Monte Carlo needs at least {MIN_TRIALS} trials, got {trials}"
        )));
    }
    Ok(())
}

fn box_muller<R: Rng + ?Sized>(rng: &mut R) -> (f64, f64) {
    let u1 = 1.0 - rng.random::<f64>();
    let u2 = rng.random::<f64>();
    let r = (-2.0 * u1.ln()).sqrt();
    let (s, c) = (2.0 * PI * u2).sin_cos();
    (r * c, r * s)
}

/// P(X ≥ t | Y ≥ t) for X = Y·cos α + Z·sin α, estimated as the ratio of
/// joint to marginal hits on one stream of (Y, Z) pairs.
pub fn mc_conditional_2d(g: &FilterGeometry, trials: u64, seed: u64) -> Result<EstimateWithError> {
    mc_conditional_2d_at(g.t, g.alpha, trials, seed)
}

/// As [`mc_conditional_2d`], but for any threshold and any angle in [0, π],
/// including the degenerate ones outside the bounds' hypotheses.
pub fn mc_conditional_2d_at(t: f64, alpha: Angle, trials: u64, seed: u64) -> Result<EstimateWithError> {
    check_trials(trials)?;
    let (sin_a, cos_a) = alpha.radians().sin_cos();
    let (marginal, joint) = chunked_counts(trials, seed, |rng, n| {
        let (mut m, mut j) = (0, 0);
        for _ in 0..n {
            let (y, z) = box_muller(rng);
            if y >= t {
                m += 1;
                if y * cos_a + z * sin_a >= t {
                    j += 1;
                }
            }
        }
        (m, j)
    });
    if marginal == 0 {
        return Err(Error::NoAcceptedTrials(trials));
    }
    Ok(EstimateWithError::from_counts(joint, marginal))
}

/// P(θᵀx ≥ τ | θᵀq ≥ τ) for a fixed pair at angle `alpha` in dimension `d`,
/// with a fresh θ ~ N(0, I/d) for every trial.
pub fn mc_conditional_fulld(
    d: usize,
    alpha: Angle,
    tau: f64,
    trials: u64,
    seed: u64,
) -> Result<EstimateWithError> {
    check_trials(trials)?;
    let mut rng = seeded_rng(derive_seed(seed, PAIR_STREAM));
    let q = sample_uniform_sphere(d, &mut rng)?;
    let x = planted_at_angle(&q, alpha, &mut rng);
    let (q, x) = (q.as_slice(), x.as_slice());
    let scale = 1.0 / (d as f64).sqrt();
    let (marginal, joint) = chunked_counts(trials, seed, |rng, n| {
        let (mut m, mut j) = (0, 0);
        for _ in 0..n {
            let (mut pq, mut px) = (0.0, 0.0);
            for i in 0..d {
                let theta = rng.sample::<f64, _>(StandardNormal) * scale;
                pq += theta * q[i];
                px += theta * x[i];
            }
            if pq >= tau {
                m += 1;
                if px >= tau {
                    j += 1;
                }
            }
        }
        (m, j)
    });
    if marginal == 0 {
        return Err(Error::NoAcceptedTrials(trials));
    }
    Ok(EstimateWithError::from_counts(joint, marginal))
}

/// One containment record per grid point, in grid order. Point i uses the
/// seed `derive_seed(seed, i)`.
pub fn bound_sweep(grid: &[FilterGeometry], trials: u64, seed: u64, k: f64) -> Result<Vec<BoundCheckRecord>> {
    if let Some(g) = grid.iter().find(|g| !g.is_valid()) {
        return Err(Error::domain(format!(
            "grid point (t = {}, alpha = {}) has t*tan(alpha/2) = {:.4} < 1",
            g.t,
            g.alpha,
            g.scaled_threshold()
        )));
    }
    grid.iter()
        .enumerate()
        .map(|(i, g)| {
            let estimate = mc_conditional_2d(g, trials, derive_seed(seed, i as u64))?;
            let bound = collision_bounds(g);
            Ok(BoundCheckRecord {
                geometry: *g,
                estimate,
                bound,
                exact: conditional_probability(g),
                k,
                contained: is_contained(&estimate, &bound, k),
                upper_looseness: bound.hi / estimate.value,
                lower_looseness: estimate.value / bound.lo,
            })
        })
        .collect()
}

/// P(X ≥ t | Y ≥ t) with Y drawn directly from N(0, 1) restricted to
/// [t, ∞). Every trial is a conditional trial, which keeps large t in reach.
pub fn mc_conditional_tail(t: f64, alpha: Angle, trials: u64, seed: u64) -> Result<EstimateWithError> {
    check_trials(trials)?;
    let (sin_a, cos_a) = alpha.radians().sin_cos();
    let (_, hits) = chunked_counts(trials, seed, |rng, n| {
        let mut j = 0;
        for _ in 0..n {
            let y = normal_tail(t, rng);
            let z: f64 = rng.sample(StandardNormal);
            if y * cos_a + z * sin_a >= t {
                j += 1;
            }
        }
        (n, j)
    });
    Ok(EstimateWithError::from_counts(hits, trials))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalRho {
    pub gamma: Angle,
    pub c: f64,
    pub t: f64,
    pub q1: EstimateWithError,
    pub q2: EstimateWithError,
    /// ln(1/q̂₁)/ln(1/q̂₂)
    pub rho: f64,
    /// ρ from the exact conditional probabilities.
    pub rho_exact: f64,
    /// ρ from the closed-form bounds, with the 1/c² asymptote.
    pub analytic: RhoReport,
}

/// Estimates q₁ at γ and q₂ at cγ and forms ρ̂ from them.
pub fn empirical_rho(gamma: Angle, c: f64, t: f64, trials: u64, seed: u64) -> Result<EmpiricalRho> {
    let analytic = rho_from_bounds(gamma, c, t)?;
    let far = Angle::new(c * gamma.radians())?;
    let q1 = mc_conditional_tail(t, gamma, trials, derive_seed(seed, 0))?;
    let q2 = mc_conditional_tail(t, far, trials, derive_seed(seed, 1))?;
    if q2.value == 0.0 {
        return Err(Error::NoAcceptedTrials(trials));
    }
    Ok(EmpiricalRho {
        gamma,
        c,
        t,
        q1,
        q2,
        rho: rho_empirical(q1.value, q2.value)?,
        rho_exact: rho_exact(gamma, c, t)?,
        analytic,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gauss::normal_sf;
    use crate::sphere::dot;
    use std::f64::consts::FRAC_PI_2;

    fn geom(t: f64, a: f64) -> FilterGeometry {
        FilterGeometry::new(t, a).unwrap()
    }

    #[test]
    fn std_error_formula() {
        let e = EstimateWithError::from_counts(25, 100);
        assert_eq!(e.value, 0.25);
        assert!((e.std_error - (0.25f64 * 0.75 / 100.0).sqrt()).abs() < 1e-16);
        let e = EstimateWithError::from_counts(0, 99);
        assert_eq!(e.value, 0.0);
        assert!(e.std_error > 0.0);
    }

    #[test]
    fn orthogonal_pair_gives_the_marginal() {
        let e = mc_conditional_2d(&geom(2.0, FRAC_PI_2), 2_000_000, 1).unwrap();
        assert!((e.value - normal_sf(2.0)).abs() < 4.0 * e.std_error);
    }

    #[test]
    fn identical_pair_always_collides() {
        let e = mc_conditional_2d_at(2.0, Angle::ZERO, 100_000, 2).unwrap();
        assert_eq!(e.value, 1.0);
    }

    #[test]
    fn estimates_are_reproducible() {
        let g = geom(2.0, PI / 3.0);
        let a = mc_conditional_2d(&g, 300_000, 3).unwrap();
        let b = mc_conditional_2d(&g, 300_000, 3).unwrap();
        assert_eq!(a, b);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let c = pool.install(|| mc_conditional_2d(&g, 300_000, 3).unwrap());
        assert_eq!(a, c);
    }

    #[test]
    fn too_few_trials_or_no_acceptance() {
        assert!(mc_conditional_2d(&geom(2.0, 1.0), 10, 0).is_err());
        assert!(matches!(
            mc_conditional_2d(&geom(40.0, 1.0), 1_000, 0),
            Err(Error::NoAcceptedTrials(1_000))
        ));
    }

    #[test]
    fn fulld_orthogonal_matches_marginal() {
        let d = 16;
        let tau = 1.0 / (d as f64).sqrt();
        let e = mc_conditional_fulld(d, Angle::RIGHT, tau, 400_000, 4).unwrap();
        assert!((e.value - normal_sf(1.0)).abs() < 4.0 * e.std_error, "{e:?}");
    }

    #[test]
    fn fulld_pair_is_at_the_requested_angle() {
        let mut rng = seeded_rng(derive_seed(5, PAIR_STREAM));
        let q = sample_uniform_sphere(32, &mut rng).unwrap();
        let x = planted_at_angle(&q, Angle::new(1.0).unwrap(), &mut rng);
        assert!((dot(q.as_slice(), x.as_slice()) - 1f64.cos()).abs() < 1e-12);
    }

    #[test]
    fn sweep_keeps_order_and_rejects_invalid_points() {
        let grid = [geom(2.0, FRAC_PI_2), geom(2.0, PI / 3.0)];
        let recs = bound_sweep(&grid, 400_000, 6, DEFAULT_K).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0].geometry, grid[0]);
        assert_eq!(recs[1].geometry, grid[1]);
        assert!(recs.iter().all(|r| r.contained));
        assert!(bound_sweep(&[geom(1.5, PI / 6.0)], 1_000, 0, DEFAULT_K).is_err());
    }

    #[test]
    fn containment_rule_is_exact() {
        let b = collision_bounds(&geom(2.0, PI / 3.0));
        let e = EstimateWithError {
            value: b.hi + 0.01,
            std_error: 0.0025,
            trials: 1,
        };
        assert!(is_contained(&e, &b, 4.0));
        assert!(!is_contained(&e, &b, 3.9));
    }

    #[test]
    fn tail_sampler_agrees_with_quadrature() {
        for (t, a) in [(2.0, PI / 3.0), (4.0, PI / 6.0), (8.0, PI / 8.0)] {
            let e = mc_conditional_tail(t, Angle::new(a).unwrap(), 400_000, 7).unwrap();
            let q = conditional_probability(&geom(t, a));
            assert!((e.value - q).abs() < 4.0 * e.std_error, "t {t}: {} vs {q}", e.value);
        }
    }

    #[test]
    fn empirical_rho_falls_with_t() {
        let gamma = Angle::new(PI / 4.0).unwrap();
        let mut prev = f64::INFINITY;
        for t in [2.5, 3.0, 3.5] {
            let r = empirical_rho(gamma, 2.0, t, 2_000_000, 8).unwrap();
            assert_eq!(r.analytic.asymptote, 0.25);
            assert!(r.rho < prev, "t {t}: {}", r.rho);
            assert!(r.rho <= r.analytic.rho);
            assert!((r.rho - r.rho_exact).abs() < 0.02);
            prev = r.rho;
        }
    }
}
