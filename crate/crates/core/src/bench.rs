//! End-to-end benchmark: generate a planted instance, build the index, run
//! the query, repeat over independently seeded trials and aggregate.
//!
//! Two engines produce a [`QueryOutcome`]:
//!
//! - `materialized` builds a real [`FilterBank`] and [`BucketIndex`];
//! - `sampled` draws only the filters the query passes. Their number is
//!   Binomial(m, p₀) (Poisson(m·p₀) when m exceeds u64), and each projector
//!   is drawn from N(0, I/d) conditioned on θᵀq ≥ τ: a tail-normal component
//!   along q plus an independent Gaussian orthogonal to it. These filters are
//!   i.i.d., so scanning them in draw order has the same law as scanning
//!   sig(q) in index order. It is the only option when m is astronomically
//!   large, as it is at the parameters the selection rule picks for d = 64.
//!
//! Trial i uses `derive_seed(seed, 2i)` for its dataset and
//! `derive_seed(seed, 2i + 1)` for its filters, so every trial can be
//! replayed with the individual `gen`, `index` and `query` steps.

use std::f64::consts::PI;
use std::time::Instant;

use rand::Rng;
use rand_distr::{Binomial, Distribution, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::collision::{joint_probability, rho_exact, rho_from_bounds, FilterGeometry, RhoReport};
use crate::dataset::{generate, DatasetMode, InstanceSpec, DEFAULT_FAR_MARGIN};
use crate::filter::{p1_for_selection, required_filters, select_m, select_tau, FilterBank, P1Source};
use crate::gauss::normal_sf;
use crate::index::{BucketIndex, QueryOutcome};
use crate::rng::{derive_seed, normal_tail, seeded_rng};
use crate::sphere::{angle_between, check_dims, dot, Angle, UnitVector};
use crate::{Error, Result};

/// Largest bank (m·d projector entries) the `auto` engine will materialize.
pub const MATERIALIZE_LIMIT: u64 = 1 << 24;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    /// Materialized when m·d ≤ [`MATERIALIZE_LIMIT`], sampled otherwise.
    #[default]
    Auto,
    Materialized,
    Sampled,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub n: usize,
    pub d: usize,
    pub gamma: f64,
    pub c: f64,
    pub delta: f64,
    pub seed: u64,
    pub trials: usize,
    pub dataset_mode: DatasetMode,
    pub far_margin: f64,
    pub engine: Engine,
    /// Explicit threshold; selected from (n, d, γ, c) when absent.
    pub tau: Option<f64>,
    /// Explicit filter count; selected from (δ, p₁) when absent.
    pub m: Option<u64>,
    pub p1_source: P1Source,
    /// Additional dataset sizes for the scan-cost fit.
    pub sweep: Vec<usize>,
    pub timings: bool,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            n: 10_000,
            d: 64,
            gamma: 0.3,
            c: 2.0,
            delta: 0.1,
            seed: 0,
            trials: 200,
            dataset_mode: DatasetMode::PlantedHard,
            far_margin: DEFAULT_FAR_MARGIN,
            engine: Engine::Auto,
            tau: None,
            m: None,
            p1_source: P1Source::Quadrature,
            sweep: Vec::new(),
            timings: false,
        }
    }
}

impl BenchmarkConfig {
    pub fn validate(&self) -> Result<()> {
        self.instance(self.n).validate()?;
        for &n in &self.sweep {
            self.instance(n).validate()?;
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::domain(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        if self.trials == 0 {
            return Err(Error::domain("trials must be positive"));
        }
        if let Some(tau) = self.tau {
            if !(tau > 0.0 && tau.is_finite()) {
                return Err(Error::domain(format!("tau must be positive, got {tau}")));
            }
        }
        if self.m == Some(0) {
            return Err(Error::domain("m must be positive"));
        }
        Ok(())
    }

    pub fn instance(&self, n: usize) -> InstanceSpec {
        InstanceSpec {
            n,
            d: self.d,
            gamma: self.gamma,
            c: self.c,
            mode: self.dataset_mode,
            far_margin: self.far_margin,
        }
    }
}

/// Threshold, filter count and engine for one dataset size.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolvedParameters {
    pub tau: f64,
    /// √d·τ
    pub t: f64,
    /// Filter count as a real number; may exceed every integer type.
    pub m: f64,
    /// The same count when it fits in a u64.
    pub m_int: Option<u64>,
    pub engine: Engine,
}

#[allow(clippy::too_many_arguments)]
pub fn resolve_parameters(
    n: usize,
    d: usize,
    gamma: f64,
    c: f64,
    delta: f64,
    tau: Option<f64>,
    m: Option<u64>,
    p1_source: P1Source,
    engine: Engine,
) -> Result<ResolvedParameters> {
    let gamma_angle = Angle::new(gamma)?;
    let tau = match tau {
        Some(tau) => tau,
        None => select_tau(n as u64, d, c, gamma_angle)?,
    };
    let t = (d as f64).sqrt() * tau;
    let (m_real, m_int) = match m {
        Some(m) => (m as f64, Some(m)),
        None => {
            let p1 = p1_for_selection(gamma_angle, t, p1_source)?;
            (required_filters(delta, p1)?.ceil().max(1.0), select_m(delta, p1).ok())
        }
    };
    let fits = m_int.is_some_and(|m| m.saturating_mul(d as u64) <= MATERIALIZE_LIMIT);
    let engine = match engine {
        Engine::Auto if fits => Engine::Materialized,
        Engine::Auto => Engine::Sampled,
        Engine::Materialized if m_int.is_none_or(|m| m > u32::MAX as u64) => {
            return Err(Error::FilterCountOverflow(m_real))
        }
        e => e,
    };
    Ok(ResolvedParameters {
        tau,
        t,
        m: m_real,
        m_int,
        engine,
    })
}

/// Seeds of trial i: (dataset, filters).
pub fn trial_seeds(seed: u64, trial: usize) -> (u64, u64) {
    let i = trial as u64;
    (derive_seed(seed, 2 * i), derive_seed(seed, 2 * i + 1))
}

/// Number of filters, out of `m`, that a point passes.
pub fn draw_signature_size<R: Rng + ?Sized>(m: f64, p0: f64, rng: &mut R) -> Result<u64> {
    if m < u64::MAX as f64 && m == m.floor() {
        let b = Binomial::new(m as u64, p0).map_err(|e| Error::domain(e.to_string()))?;
        Ok(b.sample(rng))
    } else {
        let p = Poisson::new(m * p0).map_err(|e| Error::domain(e.to_string()))?;
        Ok(p.sample(rng) as u64)
    }
}

/// A query answered by the sampled engine, plus, for each probe point, the
/// number of drawn filters it passed.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledOutcome {
    pub outcome: QueryOutcome,
    pub shared: Vec<u64>,
}

/// Runs the early-exit scan over filters drawn conditionally on passing `q`.
/// All drawn filters are evaluated on the `probes` even after the scan stops.
pub fn sampled_query(
    points: &[UnitVector],
    q: &UnitVector,
    tau: f64,
    m: f64,
    c_gamma: Angle,
    seed: u64,
    probes: &[usize],
) -> Result<SampledOutcome> {
    let d = q.dim();
    for x in points {
        check_dims(d, x.dim())?;
    }
    let sd = (d as f64).sqrt();
    let t = sd * tau;
    let mut rng = seeded_rng(seed);
    let k = draw_signature_size(m, normal_sf(t), &mut rng)?;
    let mut out = QueryOutcome {
        signature_size: k as usize,
        ..Default::default()
    };
    let mut shared = vec![0u64; probes.len()];
    let mut g = vec![0.0; d];
    let mut theta = vec![0.0; d];
    let qs = q.as_slice();
    for _ in 0..k {
        let along = normal_tail(t, &mut rng) / sd;
        g.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
        let gq = dot(&g, qs);
        for ((th, gi), qi) in theta.iter_mut().zip(&g).zip(qs) {
            *th = along * qi + (gi - gq * qi) / sd;
        }
        for (s, &id) in shared.iter_mut().zip(probes) {
            if dot(&theta, points[id].as_slice()) >= tau {
                *s += 1;
            }
        }
        if out.result.is_some() {
            continue;
        }
        out.buckets_probed += 1;
        for (id, x) in points.iter().enumerate() {
            if dot(&theta, x.as_slice()) >= tau {
                out.candidates_scanned += 1;
                let angle = angle_between(qs, x.as_slice());
                if angle <= c_gamma.radians() {
                    out.result = Some(id as u32);
                    out.result_angle = Some(angle);
                    break;
                }
            }
        }
    }
    out.distance_computations = out.candidates_scanned;
    Ok(SampledOutcome { outcome: out, shared })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub data_seed: u64,
    pub bank_seed: u64,
    pub planted_id: u64,
    /// Some point within cγ was returned.
    pub success: bool,
    /// The planted point passes at least one filter that q passes.
    pub planted_found: bool,
    pub outcome: QueryOutcome,
    /// Filters passed by both q and the planted point.
    pub shared_planted: u64,
    /// Filters passed by both q and the lowest-id far point.
    pub shared_far: u64,
    /// Σ|Bᵢ|; only known when the index is materialized.
    pub total_entries: Option<u64>,
    #[serde(skip)]
    pub build_seconds: f64,
    #[serde(skip)]
    pub query_seconds: f64,
}

/// p₀, p₁, p₂ and the conditional q₁ = p₁/p₀, q₂ = p₂/p₀.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Probabilities {
    pub p0: f64,
    pub p1: f64,
    pub p2: f64,
    pub q1: f64,
    pub q2: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub n: usize,
    pub params: ResolvedParameters,
    pub success_rate: f64,
    pub planted_found_rate: f64,
    pub mean_candidates: f64,
    pub median_candidates: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub points: Vec<SweepPoint>,
    /// Least-squares slope of ln(mean candidates) on ln n; absent when some
    /// mean is zero.
    pub slope: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub total_seconds: f64,
    pub mean_build_seconds: f64,
    pub mean_query_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub config: BenchmarkConfig,
    pub params: ResolvedParameters,
    pub analytic: Probabilities,
    pub empirical: Probabilities,
    pub success_rate: f64,
    pub planted_found_rate: f64,
    pub mean_candidates: f64,
    pub median_candidates: f64,
    pub max_candidates: u64,
    pub mean_signature_size: f64,
    pub mean_total_entries: Option<f64>,
    /// n·m·p₀
    pub predicted_entries: f64,
    pub rho_analytic: Option<RhoReport>,
    pub rho_exact: Option<f64>,
    pub sweep: Option<SweepReport>,
    pub trials: Vec<TrialRecord>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub timings: Option<Timings>,
}

/// Runs one trial of the pipeline at dataset size `n`.
pub fn run_trial(
    cfg: &BenchmarkConfig,
    n: usize,
    params: &ResolvedParameters,
    trial: usize,
) -> Result<TrialRecord> {
    let (data_seed, bank_seed) = trial_seeds(cfg.seed, trial);
    let start = Instant::now();
    let inst = generate(&cfg.instance(n), data_seed)?;
    let points = inst.dataset.points()?;
    let q = inst.meta.query_vector()?;
    let planted = inst.meta.planted_id as usize;
    let far = usize::from(planted == 0);
    let c_gamma = Angle::new(cfg.c * cfg.gamma)?;

    let (outcome, shared_planted, shared_far, total_entries, build_seconds);
    let query_start;
    match params.engine {
        Engine::Sampled => {
            build_seconds = start.elapsed().as_secs_f64();
            query_start = Instant::now();
            let s = sampled_query(&points, &q, params.tau, params.m, c_gamma, bank_seed, &[planted, far])?;
            outcome = s.outcome;
            (shared_planted, shared_far) = (s.shared[0], s.shared[1]);
            total_entries = None;
        }
        _ => {
            let m = params.m_int.ok_or(Error::FilterCountOverflow(params.m))? as usize;
            let bank = FilterBank::build(cfg.d, m, params.tau, bank_seed)?;
            let sig_planted = bank.signature(&points[planted])?;
            let sig_far = bank.signature(&points[far])?;
            let index = BucketIndex::build(points, bank)?;
            build_seconds = start.elapsed().as_secs_f64();
            query_start = Instant::now();
            outcome = index.query(&q, c_gamma)?;
            let sig_q = index.bank().signature(&q)?;
            shared_planted = sig_q.intersection_len(&sig_planted) as u64;
            shared_far = sig_q.intersection_len(&sig_far) as u64;
            total_entries = Some(index.total_entries());
        }
    }
    Ok(TrialRecord {
        trial,
        data_seed,
        bank_seed,
        planted_id: planted as u64,
        success: outcome.found(),
        planted_found: shared_planted > 0,
        outcome,
        shared_planted,
        shared_far,
        total_entries,
        build_seconds,
        query_seconds: query_start.elapsed().as_secs_f64(),
    })
}

fn median(mut v: Vec<u64>) -> f64 {
    v.sort_unstable();
    let k = v.len();
    if k == 0 {
        0.0
    } else if k % 2 == 1 {
        v[k / 2] as f64
    } else {
        (v[k / 2 - 1] as f64 + v[k / 2] as f64) / 2.0
    }
}

fn mean(xs: impl Iterator<Item = f64>, len: usize) -> f64 {
    xs.sum::<f64>() / len as f64
}

fn analytic_probabilities(cfg: &BenchmarkConfig, t: f64) -> Probabilities {
    let p0 = normal_sf(t);
    let joint = |alpha: f64| match FilterGeometry::new(t, alpha) {
        Ok(g) => joint_probability(&g),
        Err(_) => f64::NAN,
    };
    let p1 = joint(cfg.gamma);
    let p2 = joint(cfg.c * cfg.gamma);
    Probabilities {
        p0,
        p1,
        p2,
        q1: p1 / p0,
        q2: p2 / p0,
    }
}

struct PointRun {
    params: ResolvedParameters,
    trials: Vec<TrialRecord>,
}

impl PointRun {
    fn rate(&self, f: impl Fn(&TrialRecord) -> bool) -> f64 {
        self.trials.iter().filter(|r| f(r)).count() as f64 / self.trials.len() as f64
    }

    fn mean_candidates(&self) -> f64 {
        mean(
            self.trials.iter().map(|r| r.outcome.candidates_scanned as f64),
            self.trials.len(),
        )
    }

    fn median_candidates(&self) -> f64 {
        median(self.trials.iter().map(|r| r.outcome.candidates_scanned).collect())
    }
}

fn run_point(cfg: &BenchmarkConfig, n: usize) -> Result<PointRun> {
    let params = resolve_parameters(
        n,
        cfg.d,
        cfg.gamma,
        cfg.c,
        cfg.delta,
        cfg.tau,
        cfg.m,
        cfg.p1_source,
        cfg.engine,
    )?;
    let trials = (0..cfg.trials)
        .into_par_iter()
        .map(|i| run_trial(cfg, n, &params, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(PointRun { params, trials })
}

/// Least-squares slope of y on x.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let k = xs.len();
    if k < 2 || ys.len() != k {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / k as f64;
    let my = ys.iter().sum::<f64>() / k as f64;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Runs `cfg.trials` trials at `cfg.n` and at every sweep size.
pub fn run_benchmark(cfg: &BenchmarkConfig) -> Result<BenchmarkReport> {
    cfg.validate()?;
    let start = Instant::now();
    let base = run_point(cfg, cfg.n)?;
    let sweep = if cfg.sweep.is_empty() {
        None
    } else {
        let mut points = Vec::with_capacity(cfg.sweep.len());
        for &n in &cfg.sweep {
            let run = run_point(cfg, n)?;
            points.push(SweepPoint {
                n,
                params: run.params,
                success_rate: run.rate(|r| r.success),
                planted_found_rate: run.rate(|r| r.planted_found),
                mean_candidates: run.mean_candidates(),
                median_candidates: run.median_candidates(),
            });
        }
        let slope = if points.iter().all(|p| p.mean_candidates > 0.0) {
            let xs: Vec<f64> = points.iter().map(|p| (p.n as f64).ln()).collect();
            let ys: Vec<f64> = points.iter().map(|p| p.mean_candidates.ln()).collect();
            fit_slope(&xs, &ys)
        } else {
            None
        };
        Some(SweepReport { points, slope })
    };

    let params = base.params;
    let trials = &base.trials;
    let count = trials.len();
    let analytic = analytic_probabilities(cfg, params.t);
    let sig_total: u64 = trials.iter().map(|r| r.outcome.signature_size as u64).sum();
    let planted_total: u64 = trials.iter().map(|r| r.shared_planted).sum();
    let far_total: u64 = trials.iter().map(|r| r.shared_far).sum();
    let per_filter = |total: u64| total as f64 / count as f64 / params.m;
    let conditional = |total: u64| {
        if sig_total == 0 {
            0.0
        } else {
            total as f64 / sig_total as f64
        }
    };
    let empirical = Probabilities {
        p0: per_filter(sig_total),
        p1: per_filter(planted_total),
        p2: per_filter(far_total),
        q1: conditional(planted_total),
        q2: conditional(far_total),
    };
    let entries: Option<Vec<u64>> = trials.iter().map(|r| r.total_entries).collect();
    let gamma = Angle::new(cfg.gamma)?;
    let timings = cfg.timings.then(|| Timings {
        total_seconds: start.elapsed().as_secs_f64(),
        mean_build_seconds: mean(trials.iter().map(|r| r.build_seconds), count),
        mean_query_seconds: mean(trials.iter().map(|r| r.query_seconds), count),
    });
    Ok(BenchmarkReport {
        config: cfg.clone(),
        params,
        analytic,
        empirical,
        success_rate: base.rate(|r| r.success),
        planted_found_rate: base.rate(|r| r.planted_found),
        mean_candidates: base.mean_candidates(),
        median_candidates: base.median_candidates(),
        max_candidates: trials.iter().map(|r| r.outcome.candidates_scanned).max().unwrap_or(0),
        mean_signature_size: sig_total as f64 / count as f64,
        mean_total_entries: entries.map(|e| mean(e.iter().map(|&x| x as f64), count)),
        predicted_entries: cfg.n as f64 * params.m * analytic.p0,
        rho_analytic: rho_from_bounds(gamma, cfg.c, params.t).ok(),
        rho_exact: if cfg.c * cfg.gamma < PI {
            rho_exact(gamma, cfg.c, params.t).ok()
        } else {
            None
        },
        sweep,
        trials: base.trials,
        timings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded_rng;
    use crate::sphere::{planted_at_angle, sample_uniform_sphere};

    fn small() -> BenchmarkConfig {
        BenchmarkConfig {
            n: 300,
            d: 16,
            gamma: 0.5,
            c: 2.0,
            trials: 12,
            seed: 3,
            tau: Some(0.3),
            m: Some(400),
            ..Default::default()
        }
    }

    #[test]
    fn auto_engine_choice() {
        let p = resolve_parameters(1000, 16, 0.5, 2.0, 0.1, Some(0.3), Some(400), P1Source::Quadrature, Engine::Auto)
            .unwrap();
        assert_eq!(p.engine, Engine::Materialized);
        assert_eq!(p.m, 400.0);
        let p = resolve_parameters(10_000, 64, 0.3, 2.0, 0.1, None, None, P1Source::Quadrature, Engine::Auto)
            .unwrap();
        assert_eq!(p.engine, Engine::Sampled);
        assert!(p.m_int.is_none());
        assert!((p.t - 13.874_649_537_501_78).abs() < 1e-9);
        assert!((p.m / 1.455_493_877_158_256e45 - 1.0).abs() < 1e-9);
        let err = resolve_parameters(10_000, 64, 0.3, 2.0, 0.1, None, None, P1Source::Quadrature, Engine::Materialized);
        assert!(matches!(err, Err(Error::FilterCountOverflow(_))));
    }

    #[test]
    fn report_is_deterministic_and_consistent() {
        let cfg = small();
        let a = run_benchmark(&cfg).unwrap();
        let b = run_benchmark(&cfg).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert_eq!(a.trials.len(), 12);
        assert!((0.0..=1.0).contains(&a.success_rate));
        for r in &a.trials {
            assert_eq!(r.outcome.distance_computations, r.outcome.candidates_scanned);
            // the planted point is within cγ, so sharing a bucket guarantees a hit
            if r.planted_found {
                assert!(r.success);
            }
            assert!(r.total_entries.is_some());
        }
        assert!(a.timings.is_none());
        assert_eq!(a.params.engine, Engine::Materialized);
    }

    #[test]
    fn thread_count_does_not_change_the_report() {
        let cfg = small();
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| run_benchmark(&cfg)).unwrap();
        let b = four.install(|| run_benchmark(&cfg)).unwrap();
        assert_eq!(serde_json::to_vec(&a).unwrap(), serde_json::to_vec(&b).unwrap());
    }

    #[test]
    fn sampled_signature_sizes_follow_the_binomial() {
        let mut rng = seeded_rng(1);
        let (m, p0) = (1000.0, 0.05);
        let n = 20_000;
        let mean = (0..n).map(|_| draw_signature_size(m, p0, &mut rng).unwrap() as f64).sum::<f64>() / n as f64;
        let sigma = (m * p0 * (1.0 - p0) / n as f64).sqrt();
        assert!((mean - 50.0).abs() < 4.0 * sigma);
        let mean = (0..n).map(|_| draw_signature_size(1e45, 5e-44, &mut rng).unwrap() as f64).sum::<f64>() / n as f64;
        assert!((mean - 50.0).abs() < 4.0 * (50.0 / n as f64).sqrt());
    }

    #[test]
    fn sampled_filters_pass_q_and_have_the_right_pair_rate() {
        // conditional pass rate of a point at angle α must be q(t, α)
        let d = 32;
        let mut rng = seeded_rng(2);
        let q = sample_uniform_sphere(d, &mut rng).unwrap();
        let alpha = 1.0;
        let x = planted_at_angle(&q, Angle::new(alpha).unwrap(), &mut rng);
        let t = 2.0;
        let tau = t / (d as f64).sqrt();
        let points = vec![x];
        let mut shared = 0;
        let mut drawn = 0;
        for s in 0..200 {
            let o = sampled_query(&points, &q, tau, 20_000.0, Angle::ZERO, s, &[0]).unwrap();
            shared += o.shared[0];
            drawn += o.outcome.signature_size as u64;
        }
        let expected = crate::collision::conditional_probability(&FilterGeometry::new(t, alpha).unwrap());
        let rate = shared as f64 / drawn as f64;
        let sigma = (expected * (1.0 - expected) / drawn as f64).sqrt();
        assert!((rate - expected).abs() < 4.0 * sigma, "{rate} vs {expected}");
    }

    #[test]
    fn engines_agree_in_distribution() {
        let mut cfg = small();
        cfg.trials = 150;
        let mat = run_benchmark(&cfg).unwrap();
        cfg.engine = Engine::Sampled;
        let smp = run_benchmark(&cfg).unwrap();
        assert!(smp.trials.iter().all(|r| r.total_entries.is_none()));
        let sigma = (0.25 / 150.0f64).sqrt() * 2.0f64.sqrt();
        assert!((mat.success_rate - smp.success_rate).abs() < 4.0 * sigma);
        let e = (mat.empirical.q1 - smp.empirical.q1).abs();
        assert!(e < 0.05, "{} vs {}", mat.empirical.q1, smp.empirical.q1);
    }

    #[test]
    fn slope_fit() {
        let xs = [1.0, 2.0, 3.0];
        assert!((fit_slope(&xs, &[2.0, 2.5, 3.0]).unwrap() - 0.5).abs() < 1e-15);
        assert!(fit_slope(&[1.0], &[1.0]).is_none());
    }

    #[test]
    fn config_validation() {
        let mut cfg = small();
        cfg.delta = 1.0;
        assert!(run_benchmark(&cfg).is_err());
        let mut cfg = small();
        cfg.sweep = vec![1];
        assert!(run_benchmark(&cfg).is_err());
        let mut cfg = small();
        cfg.m = Some(0);
        assert!(run_benchmark(&cfg).is_err());
    }
}
