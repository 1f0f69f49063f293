//! Seeded k-means with k-means++ initialization and per-metric center updates.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{DistanceMetric, TextonError};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct KMeansOptions {
    /// Independent k-means++ runs; the lowest objective wins.
    pub restarts: usize,
    pub max_iter: usize,
}

impl Default for KMeansOptions {
    fn default() -> Self {
        Self {
            restarts: 5,
            max_iter: 100,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KMeansResult {
    pub centers: Vec<Vec<f64>>,
    pub assignments: Vec<usize>,
    /// Sum over points of the distance to the nearest center.
    pub objective: f64,
    /// Objective after seeding and after every Lloyd iteration of the winning run.
    pub history: Vec<f64>,
    pub converged: bool,
}

/// Clusters `points` into `k` groups. Deterministic for a given seed.
pub fn kmeans<P: AsRef<[f64]>>(
    points: &[P],
    k: usize,
    metric: DistanceMetric,
    seed: u64,
    options: KMeansOptions,
) -> Result<KMeansResult, TextonError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    kmeans_with_rng(points, k, metric, &mut rng, options)
}

pub fn kmeans_with_rng<P: AsRef<[f64]>, R: Rng + ?Sized>(
    points: &[P],
    k: usize,
    metric: DistanceMetric,
    rng: &mut R,
    options: KMeansOptions,
) -> Result<KMeansResult, TextonError> {
    if k == 0 || points.len() < k {
        return Err(TextonError::TooFewPoints {
            points: points.len(),
            k,
        });
    }
    let points: Vec<&[f64]> = points.iter().map(AsRef::as_ref).collect();
    let dim = points[0].len();
    if let Some(bad) = points.iter().find(|p| p.len() != dim) {
        return Err(TextonError::DimensionMismatch {
            expected: dim,
            found: bad.len(),
        });
    }

    let mut best: Option<KMeansResult> = None;
    for _ in 0..options.restarts.max(1) {
        let run = lloyd(&points, dim, k, metric, rng, options.max_iter);
        if best.as_ref().is_none_or(|b| run.objective < b.objective) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

/// Nearest center (lowest index on ties) and its distance.
fn nearest(metric: DistanceMetric, point: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centers.iter().enumerate() {
        let d = metric.eval(point, c);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

fn assign(metric: DistanceMetric, points: &[&[f64]], centers: &[Vec<f64>]) -> (Vec<usize>, Vec<f64>) {
    points.iter().map(|p| nearest(metric, p, centers)).unzip()
}

fn seed_plus_plus<R: Rng + ?Sized>(
    points: &[&[f64]],
    k: usize,
    metric: DistanceMetric,
    rng: &mut R,
) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut chosen = vec![false; n];
    let first = rng.gen_range(0..n);
    chosen[first] = true;
    let mut centers = vec![points[first].to_vec()];
    let mut weight: Vec<f64> = points.iter().map(|p| metric.eval(p, &centers[0])).collect();

    while centers.len() < k {
        let total: f64 = weight
            .iter()
            .zip(&chosen)
            .filter(|(_, &c)| !c)
            .map(|(w, _)| *w)
            .sum();
        let pick = if total > 0.0 {
            let target = rng.gen::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, w) in weight.iter().enumerate() {
                if chosen[i] || *w <= 0.0 {
                    continue;
                }
                acc += w;
                pick = Some(i);
                if acc > target {
                    break;
                }
            }
            pick.expect("positive total weight")
        } else {
            // Every remaining point coincides with a center.
            let free: Vec<usize> = (0..n).filter(|&i| !chosen[i]).collect();
            free[rng.gen_range(0..free.len())]
        };
        chosen[pick] = true;
        centers.push(points[pick].to_vec());
        let c = centers.last().expect("just pushed");
        for (w, p) in weight.iter_mut().zip(points) {
            *w = w.min(metric.eval(p, c));
        }
    }
    centers
}

fn lloyd<R: Rng + ?Sized>(
    points: &[&[f64]],
    dim: usize,
    k: usize,
    metric: DistanceMetric,
    rng: &mut R,
    max_iter: usize,
) -> KMeansResult {
    let mut centers = seed_plus_plus(points, k, metric, rng);
    let (mut assignments, mut dists) = assign(metric, points, &centers);
    let mut history = vec![dists.iter().sum::<f64>()];
    let mut converged = false;

    for _ in 0..max_iter {
        update_centers(points, dim, metric, &assignments, &dists, &mut centers);
        let (next, next_dists) = assign(metric, points, &centers);
        history.push(next_dists.iter().sum());
        let unchanged = next == assignments;
        assignments = next;
        dists = next_dists;
        if unchanged {
            // Batch updates have settled; single-point transfers may still lower J.
            if metric == DistanceMetric::Euclidean && transfer_pass(points, dim, &mut assignments, centers.len()) {
                continue;
            }
            converged = true;
            break;
        }
    }

    KMeansResult {
        objective: *history.last().expect("non-empty history"),
        centers,
        assignments,
        history,
        converged,
    }
}

/// One sweep of single-point transfers for squared Euclidean distance: a point moves
/// from cluster `a` to `b` when `n_b / (n_b + 1) |x - c_b|^2 < n_a / (n_a - 1) |x - c_a|^2`,
/// which strictly lowers the objective. Returns whether any point moved.
fn transfer_pass(points: &[&[f64]], dim: usize, assignments: &mut [usize], k: usize) -> bool {
    let mut counts = vec![0usize; k];
    let mut sums = vec![vec![0.0; dim]; k];
    for (p, &a) in points.iter().zip(assignments.iter()) {
        counts[a] += 1;
        sums[a].iter_mut().zip(p.iter()).for_each(|(s, v)| *s += v);
    }
    let sq_to_center = |p: &[f64], sum: &[f64], n: usize| -> f64 {
        p.iter()
            .zip(sum)
            .map(|(v, s)| {
                let d = v - s / n as f64;
                d * d
            })
            .sum()
    };
    let mut moved = false;
    for (j, p) in points.iter().enumerate() {
        let from = assignments[j];
        let n_from = counts[from];
        if n_from <= 1 {
            continue;
        }
        let removal = n_from as f64 / (n_from - 1) as f64 * sq_to_center(p, &sums[from], n_from);
        let mut best: Option<(usize, f64)> = None;
        for to in (0..k).filter(|&c| c != from && counts[c] > 0) {
            let n_to = counts[to];
            let gain = n_to as f64 / (n_to + 1) as f64 * sq_to_center(p, &sums[to], n_to);
            if best.is_none_or(|(_, g)| gain < g) {
                best = Some((to, gain));
            }
        }
        if let Some((to, addition)) = best {
            if addition < removal - 1e-12 * removal.max(1e-300) {
                counts[from] -= 1;
                counts[to] += 1;
                sums[from].iter_mut().zip(p.iter()).for_each(|(s, v)| *s -= v);
                sums[to].iter_mut().zip(p.iter()).for_each(|(s, v)| *s += v);
                assignments[j] = to;
                moved = true;
            }
        }
    }
    moved
}

fn update_centers(
    points: &[&[f64]],
    dim: usize,
    metric: DistanceMetric,
    assignments: &[usize],
    dists: &[f64],
    centers: &mut [Vec<f64>],
) {
    let mut members: Vec<Vec<&[f64]>> = vec![Vec::new(); centers.len()];
    for (p, &a) in points.iter().zip(assignments) {
        members[a].push(p);
    }
    let mut empty = Vec::new();
    for (ci, m) in members.iter().enumerate() {
        if m.is_empty() {
            empty.push(ci);
        } else {
            centers[ci] = metric.center(m, dim);
        }
    }
    if empty.is_empty() {
        return;
    }
    // Reseed empty clusters at the points farthest from their current center.
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| dists[b].total_cmp(&dists[a]).then(a.cmp(&b)));
    for (ci, pi) in empty.into_iter().zip(order) {
        centers[ci] = points[pi].to_vec();
    }
}
