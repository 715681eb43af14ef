//! Bucketed index over a filter bank and the early-exit query.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::filter::{FilterBank, Signature};
use crate::sphere::{angle_between, check_dims, Angle, UnitVector};
use crate::Result;

/// Bucket i holds, in ascending order, the ids of the points that pass
/// filter i.
#[derive(Clone, Debug)]
pub struct BucketIndex {
    buckets: Vec<Vec<u32>>,
    dataset: Arc<[UnitVector]>,
    bank: Arc<FilterBank>,
}

/// What a single query did.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct QueryOutcome {
    /// First point found within the query radius, if any.
    pub result: Option<u32>,
    /// Angle from the query to `result`.
    pub result_angle: Option<f64>,
    /// |sig(q)|. Zero means no bucket could be probed at all.
    pub signature_size: usize,
    /// Buckets opened before the scan stopped.
    pub buckets_probed: usize,
    /// Points examined, counted once per bucket they were met in.
    pub candidates_scanned: u64,
    /// Angular distance evaluations; always equal to `candidates_scanned`.
    pub distance_computations: u64,
}

impl QueryOutcome {
    pub fn found(&self) -> bool {
        self.result.is_some()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub bucket_size: usize,
    pub buckets: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexStats {
    pub n: usize,
    pub m: usize,
    pub tau: f64,
    pub total_entries: u64,
    pub nonempty_buckets: usize,
    pub max_bucket: usize,
    /// Number of buckets of each size, ascending by size.
    pub histogram: Vec<HistogramBin>,
    /// 1 − Φ(√d·τ)
    pub p0_analytic: f64,
    /// total_entries / (n·m)
    pub p0_empirical: f64,
    /// n·m·p₀
    pub predicted_entries: f64,
}

impl BucketIndex {
    /// Assigns each point to the buckets of the filters it passes.
    pub fn build(dataset: impl Into<Arc<[UnitVector]>>, bank: impl Into<Arc<FilterBank>>) -> Result<Self> {
        let dataset = dataset.into();
        let bank = bank.into();
        let signatures = bank.signatures(&dataset)?;
        let mut buckets = vec![Vec::new(); bank.num_filters()];
        // ids are visited in ascending order, so buckets come out sorted
        for (id, sig) in signatures.iter().enumerate() {
            for &i in sig.indices() {
                buckets[i as usize].push(id as u32);
            }
        }
        Ok(Self {
            buckets,
            dataset,
            bank,
        })
    }

    pub fn bank(&self) -> &FilterBank {
        &self.bank
    }

    pub fn dataset(&self) -> &[UnitVector] {
        &self.dataset
    }

    pub fn bucket(&self, i: usize) -> &[u32] {
        &self.buckets[i]
    }

    pub fn buckets(&self) -> impl Iterator<Item = &[u32]> {
        self.buckets.iter().map(Vec::as_slice)
    }

    pub fn total_entries(&self) -> u64 {
        self.buckets.iter().map(|b| b.len() as u64).sum()
    }

    /// Scans the buckets of sig(q) in ascending filter order, each bucket in
    /// ascending id order, and returns the first point within `c_gamma`.
    /// Points are not deduplicated across buckets.
    pub fn query(&self, q: &UnitVector, c_gamma: Angle) -> Result<QueryOutcome> {
        check_dims(self.bank.dim(), q.dim())?;
        let sig = self.bank.signature(q)?;
        Ok(self.scan(q, &sig, c_gamma))
    }

    fn scan(&self, q: &UnitVector, sig: &Signature, c_gamma: Angle) -> QueryOutcome {
        let radius = c_gamma.radians();
        let mut out = QueryOutcome {
            signature_size: sig.len(),
            ..Default::default()
        };
        for &i in sig.indices() {
            out.buckets_probed += 1;
            for &id in &self.buckets[i as usize] {
                out.candidates_scanned += 1;
                let angle = angle_between(q.as_slice(), self.dataset[id as usize].as_slice());
                if angle <= radius {
                    out.result = Some(id);
                    out.result_angle = Some(angle);
                    out.distance_computations = out.candidates_scanned;
                    return out;
                }
            }
        }
        out.distance_computations = out.candidates_scanned;
        out
    }

    pub fn stats(&self) -> IndexStats {
        let n = self.dataset.len();
        let m = self.buckets.len();
        let total_entries = self.total_entries();
        let mut hist = BTreeMap::new();
        for b in &self.buckets {
            *hist.entry(b.len()).or_insert(0usize) += 1;
        }
        let p0 = self.bank.pass_probability();
        IndexStats {
            n,
            m,
            tau: self.bank.tau(),
            total_entries,
            nonempty_buckets: self.buckets.iter().filter(|b| !b.is_empty()).count(),
            max_bucket: self.buckets.iter().map(Vec::len).max().unwrap_or(0),
            histogram: hist
                .into_iter()
                .map(|(bucket_size, buckets)| HistogramBin {
                    bucket_size,
                    buckets,
                })
                .collect(),
            p0_analytic: p0,
            p0_empirical: if n == 0 {
                0.0
            } else {
                total_entries as f64 / (n as f64 * m as f64)
            },
            predicted_entries: n as f64 * m as f64 * p0,
        }
    }
}
