//! Dissimilarity functions used for best-matching-unit search.
//!
//! Every metric accumulates in `f64`. Mahalanobis uses a diagonal covariance
//! supplied by the caller as a per-dimension variance vector; the network keeps
//! a running estimate of it (see [`RunningVariance`]).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{GdmError, Result};

/// Lower bound applied to every per-dimension variance under Mahalanobis.
pub const VARIANCE_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    #[default]
    Manhattan,
    Euclidean,
    SquaredEuclidean,
    MinkowskiP3,
    CosineDistance,
    MahalanobisDiagonal,
}

impl MetricKind {
    pub const ALL: [MetricKind; 6] = [
        MetricKind::Manhattan,
        MetricKind::Euclidean,
        MetricKind::SquaredEuclidean,
        MetricKind::MinkowskiP3,
        MetricKind::CosineDistance,
        MetricKind::MahalanobisDiagonal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MetricKind::Manhattan => "manhattan",
            MetricKind::Euclidean => "euclidean",
            MetricKind::SquaredEuclidean => "squared_euclidean",
            MetricKind::MinkowskiP3 => "minkowski_p3",
            MetricKind::CosineDistance => "cosine_distance",
            MetricKind::MahalanobisDiagonal => "mahalanobis_diagonal",
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            MetricKind::Manhattan => 0,
            MetricKind::Euclidean => 1,
            MetricKind::SquaredEuclidean => 2,
            MetricKind::MinkowskiP3 => 3,
            MetricKind::CosineDistance => 4,
            MetricKind::MahalanobisDiagonal => 5,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        Self::ALL.iter().copied().find(|k| k.code() == code)
    }

    pub fn needs_scale(self) -> bool {
        matches!(self, MetricKind::MahalanobisDiagonal)
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MetricKind {
    type Err = GdmError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|k| k.name() == s)
            .ok_or_else(|| GdmError::Config(format!("unknown metric `{s}`")))
    }
}

/// Dissimilarity between `a` and `b` under `kind`.
///
/// `scale` is the per-dimension variance and is only consulted for
/// [`MetricKind::MahalanobisDiagonal`], where it is mandatory.
pub fn distance(kind: MetricKind, a: &[f64], b: &[f64], scale: Option<&[f64]>) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(GdmError::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    if kind.needs_scale() {
        match scale {
            Some(s) if s.len() == a.len() => {}
            Some(s) => {
                return Err(GdmError::DimensionMismatch {
                    expected: a.len(),
                    found: s.len(),
                })
            }
            None => {
                return Err(GdmError::Contract(
                    "mahalanobis_diagonal requires a variance vector".into(),
                ))
            }
        }
    }
    Ok(distance_unchecked(kind, a, b, scale))
}

/// Hot-path variant of [`distance`]; the caller guarantees equal lengths and a
/// scale vector when the metric needs one.
#[inline]
pub(crate) fn distance_unchecked(kind: MetricKind, a: &[f64], b: &[f64], scale: Option<&[f64]>) -> f64 {
    match kind {
        MetricKind::Manhattan => manhattan(a, b),
        MetricKind::Euclidean => squared_euclidean(a, b).sqrt(),
        MetricKind::SquaredEuclidean => squared_euclidean(a, b),
        MetricKind::MinkowskiP3 => {
            let s: f64 = a
                .iter()
                .zip(b)
                .map(|(x, y)| {
                    let d = (x - y).abs();
                    d * d * d
                })
                .sum();
            s.cbrt()
        }
        MetricKind::CosineDistance => cosine_distance(a, b),
        MetricKind::MahalanobisDiagonal => {
            let var = scale.expect("mahalanobis without variance");
            a.iter()
                .zip(b)
                .zip(var)
                .map(|((x, y), v)| {
                    let d = x - y;
                    d * d / v.max(VARIANCE_FLOOR)
                })
                .sum::<f64>()
                .sqrt()
        }
    }
}

/// Block length of the Manhattan kernel; partial sums are checked against a
/// bound at block granularity.
const BLOCK: usize = 64;

#[inline]
fn manhattan_block(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        let j = i * 4;
        acc[0] += (a[j] - b[j]).abs();
        acc[1] += (a[j + 1] - b[j + 1]).abs();
        acc[2] += (a[j + 2] - b[j + 2]).abs();
        acc[3] += (a[j + 3] - b[j + 3]).abs();
    }
    let mut tail = 0.0;
    for j in chunks * 4..a.len() {
        tail += (a[j] - b[j]).abs();
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
fn manhattan(a: &[f64], b: &[f64]) -> f64 {
    a.chunks(BLOCK).zip(b.chunks(BLOCK)).map(|(x, y)| manhattan_block(x, y)).sum()
}

/// `offset + weight * manhattan(a, b)`, or `None` as soon as the partial
/// value exceeds `bound`. Completed values equal the unbounded computation.
#[inline]
pub(crate) fn manhattan_bounded(a: &[f64], b: &[f64], weight: f64, offset: f64, bound: f64) -> Option<f64> {
    let mut s = 0.0;
    for (x, y) in a.chunks(BLOCK).zip(b.chunks(BLOCK)) {
        s += manhattan_block(x, y);
        if offset + weight * s > bound {
            return None;
        }
    }
    Some(offset + weight * s)
}

#[inline]
fn squared_euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

fn cosine_distance(a: &[f64], b: &[f64]) -> f64 {
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return 1.0;
    }
    let sim = (dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0);
    (1.0 - sim).max(0.0)
}

/// Welford accumulator for the per-dimension variance that backs the
/// diagonal Mahalanobis metric.
#[derive(Debug, Clone, PartialEq)]
pub struct RunningVariance {
    pub(crate) count: u64,
    pub(crate) mean: Vec<f64>,
    pub(crate) m2: Vec<f64>,
    pub(crate) variance: Vec<f64>,
}

impl RunningVariance {
    pub fn new(dim: usize) -> Self {
        Self {
            count: 0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
            variance: vec![VARIANCE_FLOOR; dim],
        }
    }

    pub fn observe(&mut self, x: &[f64]) {
        self.count += 1;
        let n = self.count as f64;
        for i in 0..x.len() {
            let delta = x[i] - self.mean[i];
            self.mean[i] += delta / n;
            self.m2[i] += delta * (x[i] - self.mean[i]);
            self.variance[i] = if self.count > 1 {
                (self.m2[i] / (n - 1.0)).max(VARIANCE_FLOOR)
            } else {
                VARIANCE_FLOOR
            };
        }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    /// Floored per-dimension sample variance.
    pub fn variance(&self) -> &[f64] {
        &self.variance
    }
}
