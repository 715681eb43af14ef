//! Points on the unit sphere S^{d-1} and the angular metric.

use std::f64::consts::PI;
use std::fmt;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Unit-norm tolerance enforced by [`UnitVector::new`].
pub const UNIT_NORM_TOL: f64 = 1e-10;

/// A point on S^{d-1}, d ≥ 2.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct UnitVector {
    coords: Vec<f64>,
}

impl UnitVector {
    /// Wraps `coords`, which must already have unit norm (within 1e-10).
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.len() < 2 {
            return Err(Error::domain(format!(
                "unit vectors need d >= 2, got d = {}",
                coords.len()
            )));
        }
        let norm = norm(&coords);
        if !((norm - 1.0).abs() <= UNIT_NORM_TOL) {
            return Err(Error::NotUnit(norm));
        }
        Ok(Self { coords })
    }

    /// Scales `coords` to unit norm. Fails on the zero vector or non-finite input.
    pub fn normalize(mut coords: Vec<f64>) -> Result<Self> {
        if coords.len() < 2 {
            return Err(Error::domain(format!(
                "unit vectors need d >= 2, got d = {}",
                coords.len()
            )));
        }
        let norm = norm(&coords);
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::domain("cannot normalize a zero or non-finite vector"));
        }
        coords.iter_mut().for_each(|c| *c /= norm);
        Ok(Self { coords })
    }

    /// The canonical basis vector e_i in dimension d.
    pub fn basis(d: usize, i: usize) -> Result<Self> {
        if i >= d {
            return Err(Error::domain(format!("basis index {i} out of range for d = {d}")));
        }
        let mut coords = vec![0.0; d];
        coords[i] = 1.0;
        Self::new(coords)
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.coords
    }

    pub fn dot(&self, other: &UnitVector) -> Result<f64> {
        check_dims(self.dim(), other.dim())?;
        Ok(dot(&self.coords, &other.coords))
    }

    pub fn negated(&self) -> UnitVector {
        UnitVector {
            coords: self.coords.iter().map(|c| -c).collect(),
        }
    }
}

impl TryFrom<Vec<f64>> for UnitVector {
    type Error = Error;

    fn try_from(coords: Vec<f64>) -> Result<Self> {
        UnitVector::new(coords)
    }
}

impl From<UnitVector> for Vec<f64> {
    fn from(v: UnitVector) -> Self {
        v.coords
    }
}

/// An angle in [0, π], in radians.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Angle(f64);

impl Angle {
    pub const ZERO: Angle = Angle(0.0);
    pub const RIGHT: Angle = Angle(PI / 2.0);
    pub const STRAIGHT: Angle = Angle(PI);

    pub fn new(radians: f64) -> Result<Self> {
        if (0.0..=PI).contains(&radians) {
            Ok(Angle(radians))
        } else {
            Err(Error::domain(format!("angle {radians} outside [0, pi]")))
        }
    }

    pub fn radians(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Angle {
    type Error = Error;

    fn try_from(radians: f64) -> Result<Self> {
        Angle::new(radians)
    }
}

impl From<Angle> for f64 {
    fn from(a: Angle) -> Self {
        a.0
    }
}

impl fmt::Display for Angle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} rad", self.0)
    }
}

pub(crate) fn check_dims(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, actual })
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Angle between two unit vectors, arccos⟨a, b⟩.
///
/// Evaluated as 2·atan2(‖a − b‖, ‖a + b‖), which equals the arccos of the
/// clamped inner product but keeps full precision near 0 and π (where
/// `acos` loses half the digits) and returns exactly 0 for identical inputs.
pub fn angular_distance(a: &UnitVector, b: &UnitVector) -> Result<Angle> {
    check_dims(a.dim(), b.dim())?;
    Ok(Angle(angle_between(a.as_slice(), b.as_slice())))
}

pub(crate) fn angle_between(a: &[f64], b: &[f64]) -> f64 {
    let (mut diff, mut sum) = (0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        diff += (x - y) * (x - y);
        sum += (x + y) * (x + y);
    }
    (2.0 * diff.sqrt().atan2(sum.sqrt())).clamp(0.0, PI)
}

/// Euclidean chord length between two unit vectors at angle `alpha`: 2·sin(α/2).
pub fn euclidean_from_angle(alpha: Angle) -> f64 {
    2.0 * (alpha.radians() / 2.0).sin()
}

/// Ratio of the Euclidean distances of pairs at angles cγ and γ,
/// sin(cγ/2)/sin(γ/2). Always in (1, c].
pub fn effective_c(gamma: Angle, c: f64) -> Result<f64> {
    let g = gamma.radians();
    if !(c > 1.0) || !(g > 0.0) || !(c * g < PI) {
        return Err(Error::domain(format!(
            "effective_c needs c > 1 and 0 < c*gamma < pi (c = {c}, gamma = {g})"
        )));
    }
    Ok((c * g / 2.0).sin() / (g / 2.0).sin())
}

/// Uniform point on S^{d-1}: a standard Gaussian vector, normalized.
pub fn sample_uniform_sphere<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Result<UnitVector> {
    if d < 2 {
        return Err(Error::domain(format!("sphere sampling needs d >= 2, got {d}")));
    }
    loop {
        let coords: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        // All-zero draws have probability zero; retry rather than fail.
        if let Ok(v) = UnitVector::normalize(coords) {
            return Ok(v);
        }
    }
}

/// Uniform unit vector orthogonal to `q` (Gram–Schmidt of a fresh Gaussian draw).
pub fn sample_orthogonal<R: Rng + ?Sized>(q: &UnitVector, rng: &mut R) -> UnitVector {
    let d = q.dim();
    loop {
        let mut g: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let proj = dot(&g, q.as_slice());
        g.iter_mut().zip(q.as_slice()).for_each(|(gi, qi)| *gi -= proj * qi);
        // second pass removes the residual component left by rounding
        let proj = dot(&g, q.as_slice());
        g.iter_mut().zip(q.as_slice()).for_each(|(gi, qi)| *gi -= proj * qi);
        if norm(&g) > 1e-8 {
            if let Ok(u) = UnitVector::normalize(g) {
                return u;
            }
        }
    }
}

/// A point at exactly angle `alpha` from `q`: cos(α)·q + sin(α)·u with `u`
/// uniform on the great sphere orthogonal to `q`.
pub fn planted_at_angle<R: Rng + ?Sized>(q: &UnitVector, alpha: Angle, rng: &mut R) -> UnitVector {
    let u = sample_orthogonal(q, rng);
    let (s, c) = alpha.radians().sin_cos();
    let coords: Vec<f64> = q
        .as_slice()
        .iter()
        .zip(u.as_slice())
        .map(|(qi, ui)| c * qi + s * ui)
        .collect();
    UnitVector::normalize(coords).expect("cos/sin combination of orthonormal vectors is nonzero")
}
