use std::f64::consts::PI;
use std::fmt;
use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::json;
use spherical_lsf::bench::{
    resolve_parameters, run_benchmark, sampled_query, BenchmarkConfig, Engine, ResolvedParameters,
};
use spherical_lsf::collision::{closed_form_gap, rho_exact, rho_from_bounds, FilterGeometry, RhoCase};
use spherical_lsf::dataset::{generate, meta_path, Dataset, DatasetMeta, InstanceSpec};
use spherical_lsf::filter::FilterBank;
use spherical_lsf::index::{BucketIndex, IndexStats, QueryOutcome};
use spherical_lsf::verify::{bound_sweep, empirical_rho, is_contained, BoundCheckRecord, EmpiricalRho};
use spherical_lsf::{derive_seed, write_atomic, Angle, Error, UnitVector};

use crate::{BenchArgs, Cli, Command, GenArgs, IndexArgs, InstanceArgs, QueryArgs, RhoArgs, VerifyArgs};

const RHO_STREAM: u64 = 1 << 32;

#[derive(Debug)]
pub enum CliError {
    Lib(Error),
    Usage(String),
    Verification(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Verification(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Lib(Error::Io(_) | Error::Format(_) | Error::Json(_)) => 3,
            CliError::Lib(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Lib(e) => write!(f, "{e}"),
            CliError::Usage(msg) => write!(f, "{msg}"),
            CliError::Verification(msg) => write!(f, "verification failed: {msg}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Lib(Error::Io(e))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Lib(Error::Json(e))
    }
}

type Result<T> = std::result::Result<T, CliError>;

/// Radians, or a multiple of π written as `pi`, `pi/4`, `2pi/3`, `0.5*pi`.
pub fn parse_angle(s: &str) -> std::result::Result<f64, String> {
    let s = s.trim();
    let bad = || format!("cannot parse angle `{s}`");
    let Some(pos) = s.find("pi") else {
        return s.parse::<f64>().map_err(|_| bad());
    };
    let coef = s[..pos].trim_end_matches('*').trim();
    let coef = if coef.is_empty() { 1.0 } else { coef.parse::<f64>().map_err(|_| bad())? };
    let rest = s[pos + 2..].trim();
    let den = match rest.strip_prefix('/') {
        Some(d) => d.trim().parse::<f64>().map_err(|_| bad())?,
        None if rest.is_empty() => 1.0,
        None => return Err(bad()),
    };
    Ok(coef * PI / den)
}

fn emit<T: Serialize>(cli: &Cli, value: &T) -> Result<()> {
    let mut json = serde_json::to_vec_pretty(value)?;
    json.push(b'\n');
    if let Some(path) = &cli.json_out {
        write_atomic(path, &json)?;
    }
    print!("{}", String::from_utf8_lossy(&json));
    Ok(())
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Gen(a) => gen(cli, a),
        Command::Index(a) => index(cli, a),
        Command::Query(a) => query(cli, a),
        Command::Bench(a) => bench(cli, a),
        Command::VerifyBounds(a) => verify_bounds(cli, a),
        Command::Rho(a) => rho(cli, a),
    }
}

fn instance_spec(a: &InstanceArgs) -> InstanceSpec {
    InstanceSpec {
        n: a.n,
        d: a.d,
        gamma: a.gamma,
        c: a.c,
        mode: a.mode.into(),
        far_margin: a.far_margin,
    }
}

fn gen(cli: &Cli, a: &GenArgs) -> Result<()> {
    let inst = generate(&instance_spec(&a.instance), cli.seed)?;
    let meta_file = meta_path(&a.out);
    inst.dataset.save(&a.out)?;
    inst.meta.save(&meta_file)?;
    emit(
        cli,
        &json!({
            "dataset": a.out,
            "meta": meta_file,
            "n": inst.dataset.len(),
            "d": inst.dataset.dim(),
            "planted_id": inst.meta.planted_id,
            "seed": cli.seed,
        }),
    )
}

fn load_meta(data: &Path) -> Result<Option<DatasetMeta>> {
    let path = meta_path(data);
    if path.exists() {
        Ok(Some(DatasetMeta::load(&path)?))
    } else {
        Ok(None)
    }
}

fn geometry_from(meta: Option<&DatasetMeta>, gamma: Option<f64>, c: Option<f64>) -> Result<(f64, f64)> {
    let gamma = gamma.or(meta.map(|m| m.gamma));
    let c = c.or(meta.map(|m| m.c));
    match (gamma, c) {
        (Some(g), Some(c)) => Ok((g, c)),
        _ => Err(CliError::Usage(
            "gamma and c are needed: pass --gamma/--c or keep the .meta.json sidecar next to the dataset".into(),
        )),
    }
}

#[derive(Serialize)]
struct IndexReport {
    seed: u64,
    params: ResolvedParameters,
    stats: IndexStats,
}

fn index(cli: &Cli, a: &IndexArgs) -> Result<()> {
    let dataset = Dataset::load(&a.data)?;
    let meta = load_meta(&a.data)?;
    let (gamma, c) = geometry_from(meta.as_ref(), a.gamma, a.c)?;
    let params = resolve_parameters(
        dataset.len(),
        dataset.dim(),
        gamma,
        c,
        a.params.delta,
        a.params.tau,
        a.params.m,
        a.params.p1_source.into(),
        Engine::Materialized,
    )
    .map_err(|e| match e {
        Error::FilterCountOverflow(m) => CliError::Usage(format!(
            "m = {m:.4e} filters cannot be materialized; pass --m explicitly, or use `bench`/`query` \
             with the sampled engine"
        )),
        e => e.into(),
    })?;
    let m = params.m_int.expect("materialized parameters carry an integer m") as usize;
    let bank = FilterBank::build(dataset.dim(), m, params.tau, cli.seed)?;
    if let Some(out) = &a.bank_out {
        bank.save(out)?;
    }
    let idx = BucketIndex::build(dataset.points()?, bank)?;
    emit(
        cli,
        &IndexReport {
            seed: cli.seed,
            params,
            stats: idx.stats(),
        },
    )
}

#[derive(Serialize)]
struct QueryReport {
    engine: Engine,
    radius: f64,
    planted_id: Option<u64>,
    outcome: QueryOutcome,
}

fn query(cli: &Cli, a: &QueryArgs) -> Result<()> {
    let dataset = Dataset::load(&a.data)?;
    let meta = load_meta(&a.data)?;
    let points = dataset.points()?;
    let q = match (&a.query, &meta) {
        (Some(path), _) => {
            let coords: Vec<f64> = serde_json::from_slice(&fs::read(path)?)?;
            UnitVector::new(coords)?
        }
        (None, Some(m)) => m.query_vector()?,
        (None, None) => {
            return Err(CliError::Usage("no query: pass --query or keep the .meta.json sidecar".into()))
        }
    };
    let radius = match a.radius {
        Some(r) => r,
        None => {
            let (g, c) = geometry_from(meta.as_ref(), None, None)?;
            c * g
        }
    };
    let radius_angle = Angle::new(radius)?;
    let planted_id = meta.as_ref().map(|m| m.planted_id);

    let (engine, outcome) = match &a.bank {
        Some(bank_path) => {
            let bank = FilterBank::load(bank_path)?;
            let idx = BucketIndex::build(points, bank)?;
            (Engine::Materialized, idx.query(&q, radius_angle)?)
        }
        None => {
            let (tau, m) = match (a.tau, a.m) {
                (Some(tau), Some(m)) => (tau, m),
                (tau, m) => {
                    let (gamma, c) = geometry_from(meta.as_ref(), None, None)?;
                    let params = resolve_parameters(
                        dataset.len(),
                        dataset.dim(),
                        gamma,
                        c,
                        a.delta,
                        tau,
                        None,
                        a.p1_source.into(),
                        Engine::Sampled,
                    )?;
                    (params.tau, m.unwrap_or(params.m))
                }
            };
            let probes: Vec<usize> = match planted_id {
                Some(p) => vec![p as usize, usize::from(p == 0)],
                None => Vec::new(),
            };
            let s = sampled_query(&points, &q, tau, m, radius_angle, cli.seed, &probes)?;
            (Engine::Sampled, s.outcome)
        }
    };
    emit(
        cli,
        &QueryReport {
            engine,
            radius,
            planted_id,
            outcome,
        },
    )
}

fn bench(cli: &Cli, a: &BenchArgs) -> Result<()> {
    let i = &a.instance;
    let cfg = BenchmarkConfig {
        n: i.n,
        d: i.d,
        gamma: i.gamma,
        c: i.c,
        delta: a.params.delta,
        seed: cli.seed,
        trials: a.trials,
        dataset_mode: i.mode.into(),
        far_margin: i.far_margin,
        engine: a.engine.into(),
        tau: a.params.tau,
        m: a.params.m,
        p1_source: a.params.p1_source.into(),
        sweep: a.sweep.clone(),
        timings: a.timings,
    };
    emit(cli, &run_benchmark(&cfg)?)
}

#[derive(Serialize)]
struct SkippedPoint {
    spec: String,
    reason: String,
}

#[derive(Serialize)]
struct VerifyReport {
    seed: u64,
    trials: u64,
    k: f64,
    records: Vec<BoundCheckRecord>,
    skipped: Vec<SkippedPoint>,
    rho: Vec<EmpiricalRho>,
    all_contained: bool,
}

fn parse_list(spec: &str) -> Result<Vec<f64>> {
    spec.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse().map_err(|_| CliError::Usage(format!("`{s}` is not a number"))))
        .collect()
}

fn parse_grid(spec: &str) -> Result<Vec<(String, std::result::Result<FilterGeometry, String>)>> {
    spec.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|item| {
            let (t, alpha) = item
                .split_once(':')
                .ok_or_else(|| CliError::Usage(format!("grid point `{item}` is not of the form t:alpha")))?;
            let t: f64 = t.trim().parse().map_err(|_| CliError::Usage(format!("bad threshold in `{item}`")))?;
            let alpha = parse_angle(alpha).map_err(CliError::Usage)?;
            let geometry = FilterGeometry::new(t, alpha).map_err(|e| e.to_string()).and_then(|g| {
                if g.is_valid() {
                    Ok(g)
                } else {
                    Err(format!("t*tan(alpha/2) = {:.4} < 1", g.scaled_threshold()))
                }
            });
            Ok((item.trim().to_string(), geometry))
        })
        .collect()
}

fn verify_bounds(cli: &Cli, a: &VerifyArgs) -> Result<()> {
    let mut grid = Vec::new();
    let mut skipped = Vec::new();
    for (spec, g) in parse_grid(&a.grid)? {
        match g {
            Ok(g) => grid.push(g),
            Err(reason) => {
                eprintln!("warning: skipping grid point {spec}: {reason}");
                skipped.push(SkippedPoint { spec, reason });
            }
        }
    }
    let mut records = bound_sweep(&grid, a.trials, cli.seed, a.k)?;
    if a.corrupt_bounds {
        for r in &mut records {
            r.bound.lo = -1.0;
            r.bound.hi = -1.0;
            r.contained = is_contained(&r.estimate, &r.bound, r.k);
        }
    }
    let gamma = Angle::new(a.rho_gamma)?;
    let rho = parse_list(&a.rho_t)?
        .iter()
        .enumerate()
        .map(|(i, &t)| empirical_rho(gamma, a.rho_c, t, a.rho_trials, derive_seed(cli.seed, RHO_STREAM + i as u64)))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let failed: Vec<String> = records
        .iter()
        .filter(|r| !r.contained)
        .map(|r| format!("(t = {}, alpha = {})", r.geometry.t, r.geometry.alpha))
        .collect();
    emit(
        cli,
        &VerifyReport {
            seed: cli.seed,
            trials: a.trials,
            k: a.k,
            all_contained: failed.is_empty(),
            records,
            skipped,
            rho,
        },
    )?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Verification(format!("estimate outside bounds at {}", failed.join(", "))))
    }
}

#[derive(Serialize)]
struct RhoRow {
    t: f64,
    rho: f64,
    /// Absent when the exact conditional probabilities underflow.
    rho_exact: Option<f64>,
    asymptote: f64,
    gap: f64,
    closed_form_gap: f64,
    ln_q1: f64,
    ln_q2: f64,
    case: RhoCase,
}

fn rho(cli: &Cli, a: &RhoArgs) -> Result<()> {
    let gamma = Angle::new(a.gamma)?;
    let rows = a
        .t
        .iter()
        .map(|&t| {
            let r = rho_from_bounds(gamma, a.c, t)?;
            Ok(RhoRow {
                t,
                rho: r.rho,
                rho_exact: rho_exact(gamma, a.c, t).ok(),
                asymptote: r.asymptote,
                gap: r.gap,
                closed_form_gap: closed_form_gap(gamma, a.c, t)?,
                ln_q1: r.ln_q1,
                ln_q2: r.ln_q2,
                case: r.case,
            })
        })
        .collect::<std::result::Result<Vec<_>, Error>>()?;
    if a.csv {
        let mut out = String::from("t,rho,rho_exact,asymptote,gap,closed_form_gap,ln_q1,ln_q2,case\n");
        for r in &rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                r.t,
                r.rho,
                r.rho_exact.map(|v| v.to_string()).unwrap_or_default(),
                r.asymptote,
                r.gap,
                r.closed_form_gap,
                r.ln_q1,
                r.ln_q2,
                serde_json::to_value(r.case)?.as_str().unwrap_or_default()
            ));
        }
        if let Some(path) = &cli.json_out {
            write_atomic(path, serde_json::to_string_pretty(&json!({ "gamma": a.gamma, "c": a.c, "rows": rows }))?.as_bytes())?;
        }
        print!("{out}");
        return Ok(());
    }
    emit(cli, &json!({ "gamma": a.gamma, "c": a.c, "rows": rows }))
}
