use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::TextonError;

/// Dissimilarity used both for clustering and for nearest-texton lookup.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceMetric {
    /// Squared Euclidean distance.
    Euclidean,
    CityBlock,
    /// `1 - cos(a, b)`; 1 when either vector is zero.
    Cosine,
    /// `1 - pearson(a, b)`; 1 when either vector is constant.
    Correlation,
}

impl DistanceMetric {
    pub const ALL: [DistanceMetric; 4] = [
        DistanceMetric::Euclidean,
        DistanceMetric::CityBlock,
        DistanceMetric::Cosine,
        DistanceMetric::Correlation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DistanceMetric::Euclidean => "euclidean",
            DistanceMetric::CityBlock => "cityblock",
            DistanceMetric::Cosine => "cosine",
            DistanceMetric::Correlation => "correlation",
        }
    }

    /// Distance without the dimensionality check; callers guarantee equal lengths.
    #[inline]
    pub fn eval(self, a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), b.len());
        match self {
            DistanceMetric::Euclidean => a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum(),
            DistanceMetric::CityBlock => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum(),
            DistanceMetric::Cosine => {
                let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
                for (x, y) in a.iter().zip(b) {
                    dot += x * y;
                    na += x * x;
                    nb += y * y;
                }
                if na == 0.0 || nb == 0.0 {
                    return 1.0;
                }
                (1.0 - dot / (na.sqrt() * nb.sqrt())).clamp(0.0, 2.0)
            }
            DistanceMetric::Correlation => {
                let n = a.len() as f64;
                let ma = a.iter().sum::<f64>() / n;
                let mb = b.iter().sum::<f64>() / n;
                let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
                for (x, y) in a.iter().zip(b) {
                    let (x, y) = (x - ma, y - mb);
                    dot += x * y;
                    na += x * x;
                    nb += y * y;
                }
                if na == 0.0 || nb == 0.0 {
                    return 1.0;
                }
                (1.0 - dot / (na.sqrt() * nb.sqrt())).clamp(0.0, 2.0)
            }
        }
    }

    /// The center of a cluster under this metric:
    /// mean, component-wise median, or the re-normalized mean direction.
    pub fn center(self, members: &[&[f64]], dim: usize) -> Vec<f64> {
        assert!(!members.is_empty(), "center of an empty cluster");
        match self {
            DistanceMetric::Euclidean => mean(members.iter().copied(), dim, members.len()),
            DistanceMetric::CityBlock => {
                let mut column = Vec::with_capacity(members.len());
                (0..dim)
                    .map(|d| {
                        column.clear();
                        column.extend(members.iter().map(|m| m[d]));
                        column.sort_by(f64::total_cmp);
                        let n = column.len();
                        if n % 2 == 1 {
                            column[n / 2]
                        } else {
                            0.5 * (column[n / 2 - 1] + column[n / 2])
                        }
                    })
                    .collect()
            }
            DistanceMetric::Cosine => {
                let units: Vec<Vec<f64>> = members.iter().map(|m| unit(m.to_vec())).collect();
                let direction = unit(mean(units.iter().map(Vec::as_slice), dim, units.len()));
                if direction.iter().all(|&v| v == 0.0) {
                    mean(members.iter().copied(), dim, members.len())
                } else {
                    direction
                }
            }
            DistanceMetric::Correlation => {
                let units: Vec<Vec<f64>> = members.iter().map(|m| unit(centered(m))).collect();
                let direction = unit(centered(&mean(units.iter().map(Vec::as_slice), dim, units.len())));
                if direction.iter().all(|&v| v == 0.0) {
                    mean(members.iter().copied(), dim, members.len())
                } else {
                    direction
                }
            }
        }
    }
}

fn mean<'a>(rows: impl Iterator<Item = &'a [f64]>, dim: usize, count: usize) -> Vec<f64> {
    let mut acc = vec![0.0; dim];
    for row in rows {
        for (a, v) in acc.iter_mut().zip(row) {
            *a += v;
        }
    }
    acc.iter_mut().for_each(|a| *a /= count as f64);
    acc
}

fn centered(v: &[f64]) -> Vec<f64> {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| x - m).collect()
}

fn unit(mut v: Vec<f64>) -> Vec<f64> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    v
}

pub fn distance(metric: DistanceMetric, a: &[f64], b: &[f64]) -> Result<f64, TextonError> {
    if a.len() != b.len() {
        return Err(TextonError::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    Ok(metric.eval(a, b))
}

impl fmt::Display for DistanceMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DistanceMetric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "euclidean" => Ok(DistanceMetric::Euclidean),
            "cityblock" | "city-block" | "manhattan" => Ok(DistanceMetric::CityBlock),
            "cosine" => Ok(DistanceMetric::Cosine),
            "correlation" => Ok(DistanceMetric::Correlation),
            other => Err(format!(
                "unknown distance {other:?}; expected euclidean, cityblock, cosine or correlation"
            )),
        }
    }
}
