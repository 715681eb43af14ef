//! Point-set files and synthetic planted instances.
//!
//! Layout of a dataset file, all integers little-endian:
//!
//! ```text
//! "SLSF" | version: u32 | d: u32 | n: u64 | n·d × f32 (row-major)
//! ```
//!
//! Rows are stored as f32 and renormalized in f64 on use, so an in-memory
//! instance and one reloaded from disk yield bit-identical unit vectors.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::filter::write_atomic;
use crate::rng::seeded_rng;
use crate::sphere::{angle_between, planted_at_angle, sample_uniform_sphere, Angle, UnitVector};
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"SLSF";
const VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 4 + 8;
const MAX_CONSECUTIVE_REJECTIONS: u64 = 1_000_000;

pub const DEFAULT_FAR_MARGIN: f64 = 1e-6;

/// n points in dimension d, stored as f32 rows.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    d: usize,
    rows: Vec<f32>,
}

impl Dataset {
    pub fn new(d: usize, rows: Vec<f32>) -> Result<Self> {
        if d < 2 || d > u32::MAX as usize {
            return Err(Error::domain(format!("dataset dimension must be in [2, 2^32), got {d}")));
        }
        if !rows.len().is_multiple_of(d) {
            return Err(Error::domain(format!(
                "{} values do not form rows of length {d}",
                rows.len()
            )));
        }
        if rows.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("dataset contains non-finite values"));
        }
        Ok(Self { d, rows })
    }

    pub fn from_points(d: usize, points: &[UnitVector]) -> Result<Self> {
        let mut rows = Vec::with_capacity(points.len() * d);
        for p in points {
            if p.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    actual: p.dim(),
                });
            }
            rows.extend(p.as_slice().iter().map(|&v| v as f32));
        }
        Self::new(d, rows)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.rows.len() / self.d
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.rows[i * self.d..(i + 1) * self.d]
    }

    /// Row i as an f64 unit vector.
    pub fn point(&self, i: usize) -> Result<UnitVector> {
        widen(self.row(i))
    }

    pub fn points(&self) -> Result<Vec<UnitVector>> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 4 * self.rows.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.d as u32).to_le_bytes());
        out.extend_from_slice(&(self.len() as u64).to_le_bytes());
        for v in &self.rows {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::Format(format!("dataset header truncated ({} bytes)", bytes.len())));
        }
        if &bytes[..4] != MAGIC {
            return Err(Error::Format("bad dataset magic".into()));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != VERSION {
            return Err(Error::Format(format!("unsupported dataset version {version}")));
        }
        let d = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let n = u64::from_le_bytes(bytes[12..20].try_into().unwrap());
        let expected = (n as u128) * (d as u128) * 4 + HEADER_LEN as u128;
        if expected != bytes.len() as u128 {
            return Err(Error::Format(format!(
                "dataset body length {} does not match n = {n}, d = {d}",
                bytes.len() - HEADER_LEN
            )));
        }
        let rows = bytes[HEADER_LEN..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Self::new(d, rows).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

fn widen(row: &[f32]) -> Result<UnitVector> {
    UnitVector::normalize(row.iter().map(|&v| v as f64).collect())
}

/// The unit vector a point becomes after a trip through the f32 file format.
pub fn quantize(x: &UnitVector) -> UnitVector {
    let row: Vec<f32> = x.as_slice().iter().map(|&v| v as f32).collect();
    widen(&row).expect("a unit vector stays nonzero in f32")
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetMode {
    /// Far points at angle cγ + margin from the query.
    #[default]
    PlantedHard,
    /// Far points uniform on the sphere, redrawn while within cγ of the query.
    UniformReject,
}

/// Sidecar describing how a dataset was generated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub query: Vec<f64>,
    pub planted_id: u64,
    pub gamma: f64,
    pub c: f64,
    pub seed: u64,
    pub mode: DatasetMode,
    pub far_margin: f64,
}

impl DatasetMeta {
    pub fn query_vector(&self) -> Result<UnitVector> {
        UnitVector::new(self.query.clone())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut json = serde_json::to_vec_pretty(self)?;
        json.push(b'\n');
        write_atomic(path, &json)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_slice(&fs::read(path)?)?)
    }
}

/// `<dataset>.meta.json`
pub fn meta_path(dataset_path: &Path) -> PathBuf {
    let mut name = dataset_path.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub n: usize,
    pub d: usize,
    pub gamma: f64,
    pub c: f64,
    pub mode: DatasetMode,
    pub far_margin: f64,
}

impl InstanceSpec {
    pub fn validate(&self) -> Result<()> {
        let far = self.c * self.gamma + self.far_margin;
        if self.n < 2 {
            return Err(Error::domain(format!("instance needs n >= 2, got {}", self.n)));
        }
        if self.d < 2 {
            return Err(Error::domain(format!("instance needs d >= 2, got {}", self.d)));
        }
        if !(self.c > 1.0) || !(self.gamma > 0.0) {
            return Err(Error::domain(format!(
                "instance needs gamma > 0 and c > 1 (gamma = {}, c = {})",
                self.gamma, self.c
            )));
        }
        if !(self.far_margin >= 0.0) || !(far < PI) {
            return Err(Error::domain(format!(
                "far angle c*gamma + margin = {far} must lie in [0, pi)"
            )));
        }
        Ok(())
    }

    pub fn c_gamma(&self) -> f64 {
        self.c * self.gamma
    }
}

/// A generated dataset with its query.
#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    pub dataset: Dataset,
    pub meta: DatasetMeta,
}

/// One point at angle γ from a random query (at a random id) and n − 1 far
/// points, placed according to `spec.mode`.
pub fn generate(spec: &InstanceSpec, seed: u64) -> Result<Instance> {
    spec.validate()?;
    let mut rng = seeded_rng(seed);
    let q = sample_uniform_sphere(spec.d, &mut rng)?;
    let planted_id = rng.random_range(0..spec.n);
    let near = Angle::new(spec.gamma)?;
    let far = Angle::new(spec.c_gamma() + spec.far_margin)?;
    let mut points = Vec::with_capacity(spec.n);
    for i in 0..spec.n {
        let x = if i == planted_id {
            planted_at_angle(&q, near, &mut rng)
        } else {
            match spec.mode {
                DatasetMode::PlantedHard => planted_at_angle(&q, far, &mut rng),
                DatasetMode::UniformReject => uniform_outside(&q, spec.c_gamma(), &mut rng)?,
            }
        };
        points.push(x);
    }
    Ok(Instance {
        dataset: Dataset::from_points(spec.d, &points)?,
        meta: DatasetMeta {
            query: q.into_inner(),
            planted_id: planted_id as u64,
            gamma: spec.gamma,
            c: spec.c,
            seed,
            mode: spec.mode,
            far_margin: spec.far_margin,
        },
    })
}

fn uniform_outside<R: Rng + ?Sized>(q: &UnitVector, radius: f64, rng: &mut R) -> Result<UnitVector> {
    for _ in 0..MAX_CONSECUTIVE_REJECTIONS {
        let x = sample_uniform_sphere(q.dim(), rng)?;
        if angle_between(q.as_slice(), quantize(&x).as_slice()) > radius {
            return Ok(x);
        }
    }
    Err(Error::domain(format!(
        "uniform-reject stalled after {MAX_CONSECUTIVE_REJECTIONS} consecutive rejections \
         (c*gamma = {radius} covers most of the sphere); use planted-hard mode"
    )))
}
