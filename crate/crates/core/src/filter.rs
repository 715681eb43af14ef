//! The Spherical-LSF filter family.
//!
//! A bank holds m projectors θᵢ with i.i.d. N(0, 1/d) entries and a shared
//! threshold τ; filter i accepts x when θᵢᵀx ≥ τ. Since √d·θᵢᵀx is standard
//! normal for unit x, each filter passes a point with probability 1 − Φ(√d·τ).

use std::f64::consts::PI;
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::collision::{collision_bounds, joint_probability, FilterGeometry};
use crate::gauss::normal_sf;
use crate::rng::seeded_rng;
use crate::sphere::{check_dims, dot, Angle, UnitVector};
use crate::{Error, Result};

const BANK_MAGIC: &[u8; 4] = b"SLFB";
const BANK_VERSION: u32 = 1;
const BANK_BLOB_LEN: usize = 4 + 4 + 8 + 4 + 4 + 8;

/// m Gaussian projectors and a threshold. Immutable once built; the
/// projectors are a pure function of (seed, d, m).
#[derive(Clone, Debug, PartialEq)]
pub struct FilterBank {
    projectors: Vec<f64>,
    tau: f64,
    seed: u64,
    d: usize,
    m: usize,
}

/// Indices of the filters a point passes, strictly increasing.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Signature(Vec<u32>);

impl Signature {
    pub fn indices(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, i: u32) -> bool {
        self.0.binary_search(&i).is_ok()
    }

    /// Number of filters passed by both points.
    pub fn intersection_len(&self, other: &Signature) -> usize {
        let (mut i, mut j, mut n) = (0, 0, 0);
        let (a, b) = (&self.0, &other.0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    n += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        n
    }

    pub fn is_subset_of(&self, other: &Signature) -> bool {
        self.intersection_len(other) == self.len()
    }
}

impl FilterBank {
    /// Samples m projectors with N(0, 1/d) entries from `seed`.
    ///
    /// The threshold may be any finite value; negative thresholds are allowed
    /// so that degenerate always-pass banks can be built.
    pub fn build(d: usize, m: usize, tau: f64, seed: u64) -> Result<Self> {
        if d < 2 {
            return Err(Error::domain(format!("filter bank needs d >= 2, got {d}")));
        }
        if m < 1 {
            return Err(Error::domain("filter bank needs m >= 1"));
        }
        if !tau.is_finite() {
            return Err(Error::domain(format!("threshold must be finite, got {tau}")));
        }
        if m > u32::MAX as usize || d > u32::MAX as usize {
            return Err(Error::FilterCountOverflow(m as f64));
        }
        let scale = 1.0 / (d as f64).sqrt();
        let mut rng = seeded_rng(seed);
        let projectors = (0..m * d)
            .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
            .collect();
        Ok(Self {
            projectors,
            tau,
            seed,
            d,
            m,
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn num_filters(&self) -> usize {
        self.m
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Normalized threshold t = √d·τ.
    pub fn normalized_threshold(&self) -> f64 {
        (self.d as f64).sqrt() * self.tau
    }

    /// Analytic per-filter pass probability p₀ = 1 − Φ(√d·τ).
    pub fn pass_probability(&self) -> f64 {
        normal_sf(self.normalized_threshold())
    }

    pub fn projector(&self, i: usize) -> &[f64] {
        &self.projectors[i * self.d..(i + 1) * self.d]
    }

    pub fn projectors(&self) -> impl Iterator<Item = &[f64]> {
        self.projectors.chunks_exact(self.d)
    }

    /// Same projectors, different threshold.
    pub fn with_tau(&self, tau: f64) -> Result<Self> {
        if !tau.is_finite() {
            return Err(Error::domain(format!("threshold must be finite, got {tau}")));
        }
        Ok(Self {
            tau,
            ..self.clone()
        })
    }

    /// sig(x) = {i : θᵢᵀx ≥ τ}. Ties count as passing.
    pub fn signature(&self, x: &UnitVector) -> Result<Signature> {
        check_dims(self.d, x.dim())?;
        Ok(self.signature_unchecked(x.as_slice()))
    }

    pub(crate) fn signature_unchecked(&self, x: &[f64]) -> Signature {
        Signature(
            self.projectors()
                .enumerate()
                .filter(|(_, row)| dot(row, x) >= self.tau)
                .map(|(i, _)| i as u32)
                .collect(),
        )
    }

    /// Signatures of many points, computed in parallel; output order
    /// follows input order.
    pub fn signatures(&self, points: &[UnitVector]) -> Result<Vec<Signature>> {
        for p in points {
            check_dims(self.d, p.dim())?;
        }
        Ok(points
            .par_iter()
            .map(|p| self.signature_unchecked(p.as_slice()))
            .collect())
    }

    /// Compact persisted form: the projectors are regenerated from the seed.
    ///
    /// Layout (little-endian): `"SLFB"`, version u32, seed u64, d u32, m u32,
    /// tau f64.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(BANK_BLOB_LEN);
        out.extend_from_slice(BANK_MAGIC);
        out.extend_from_slice(&BANK_VERSION.to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        out.extend_from_slice(&(self.d as u32).to_le_bytes());
        out.extend_from_slice(&(self.m as u32).to_le_bytes());
        out.extend_from_slice(&self.tau.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() != BANK_BLOB_LEN {
            return Err(Error::Format(format!(
                "bank blob must be {BANK_BLOB_LEN} bytes, got {}",
                bytes.len()
            )));
        }
        if &bytes[0..4] != BANK_MAGIC {
            return Err(Error::Format("bad bank magic".into()));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != BANK_VERSION {
            return Err(Error::Format(format!("unsupported bank version {version}")));
        }
        let seed = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
        let d = u32::from_le_bytes(bytes[16..20].try_into().unwrap()) as usize;
        let m = u32::from_le_bytes(bytes[20..24].try_into().unwrap()) as usize;
        let tau = f64::from_le_bytes(bytes[24..32].try_into().unwrap());
        Self::build(d, m, tau, seed).map_err(|e| Error::Format(format!("bank header: {e}")))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

/// Writes `bytes` to a temporary file next to `path`, then renames it over
/// `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// τ = √(2·ln n / (d·tan²(cγ/2))), the smallest threshold for which the far
/// conditional collision probability is about 1/n.
pub fn select_tau(n: u64, d: usize, c: f64, gamma: Angle) -> Result<f64> {
    let cg = c * gamma.radians();
    if n < 2 || d < 1 || !(cg > 0.0 && cg < PI) {
        return Err(Error::domain(format!(
            "select_tau needs n >= 2, d >= 1, 0 < c*gamma < pi (n = {n}, d = {d}, c*gamma = {cg})"
        )));
    }
    let tan = (cg / 2.0).tan();
    Ok((2.0 * (n as f64).ln() / (d as f64 * tan * tan)).sqrt())
}

/// ln(1/δ)/p₁ as a real number, for filter counts too large to store.
pub fn required_filters(delta: f64, p1: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) || !(p1 > 0.0 && p1 < 1.0) {
        return Err(Error::domain(format!(
            "filter count needs 0 < delta < 1 and 0 < p1 < 1 (delta = {delta}, p1 = {p1})"
        )));
    }
    Ok((1.0 / delta).ln() / p1)
}

/// m = ⌈ln(1/δ)/p₁⌉, at least 1, so that the near point is missed by all m
/// filters with probability (1 − p₁)^m ≤ e^{−m·p₁} ≤ δ.
pub fn select_m(delta: f64, p1: f64) -> Result<u64> {
    let m = required_filters(delta, p1)?.ceil().max(1.0);
    if m >= u64::MAX as f64 {
        return Err(Error::FilterCountOverflow(m));
    }
    Ok(m as u64)
}

/// p₁ = P(h(x) = 1 ∧ h(q) = 1) for ∠(x, q) = γ, by quadrature.
pub fn joint_p1(gamma: Angle, t: f64) -> Result<f64> {
    Ok(joint_probability(&FilterGeometry::new(t, gamma.radians())?))
}

/// How p₁ is obtained when sizing the bank.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum P1Source {
    /// Exact joint probability by quadrature.
    #[default]
    Quadrature,
    /// Closed-form lower bound (1 − Φ(t))·lo; gives a larger m.
    LowerBound,
}

pub fn p1_for_selection(gamma: Angle, t: f64, source: P1Source) -> Result<f64> {
    match source {
        P1Source::Quadrature => joint_p1(gamma, t),
        P1Source::LowerBound => {
            let g = FilterGeometry::new(t, gamma.radians())?;
            let b = collision_bounds(&g);
            if !b.valid {
                return Err(Error::domain(
                    "lower-bound p1 needs t*tan(gamma/2) >= 1 at the selected threshold",
                ));
            }
            Ok(normal_sf(t) * b.lo)
        }
    }
}

/// Threshold and filter count for an (n, d, γ, c, δ) instance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectedParameters {
    pub tau: f64,
    /// √d·τ
    pub t: f64,
    pub p0: f64,
    pub p1: f64,
    /// ln(1/δ)/p₁ before rounding.
    pub m_required: f64,
    /// ⌈m_required⌉ when it fits in a u64.
    pub m: Option<u64>,
}

pub fn select_parameters(
    n: u64,
    d: usize,
    gamma: Angle,
    c: f64,
    delta: f64,
    source: P1Source,
) -> Result<SelectedParameters> {
    let tau = select_tau(n, d, c, gamma)?;
    let t = (d as f64).sqrt() * tau;
    let p1 = p1_for_selection(gamma, t, source)?;
    let m_required = required_filters(delta, p1)?;
    Ok(SelectedParameters {
        tau,
        t,
        p0: normal_sf(t),
        p1,
        m_required,
        m: select_m(delta, p1).ok(),
    })
}
