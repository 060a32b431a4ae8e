//! Seeded Lloyd's k-means with restarts over consensus rows.

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Lloyd converges finitely on its own; this cap only guards degenerate
/// cycling under floating-point ties.
const MAX_ITERS: usize = 500;

/// The outcome of `kmeans`: the best restart's labeling plus the inertia
/// every restart reached.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusteringResult {
    /// Cluster index in `[0, k)` for each input row, from the restart
    /// with the lowest inertia (first such restart on ties).
    pub assignments: Vec<usize>,
    /// Number of restarts performed.
    pub restarts: usize,
    /// Final within-cluster sum of squared distances per restart.
    pub per_restart_inertia: Vec<f64>,
    /// Index into `per_restart_inertia` of the kept restart.
    pub best_restart: usize,
}

impl ClusteringResult {
    pub fn best_inertia(&self) -> f64 {
        self.per_restart_inertia[self.best_restart]
    }
}

/// One restart's labeling and inertia (all restarts are kept so callers
/// can score each one).
#[derive(Debug, Clone)]
pub(crate) struct RestartOutcome {
    pub assignments: Vec<usize>,
    pub inertia: f64,
}

/// Cluster the rows of `points` into `k` groups, `restarts` times from
/// seeded random initializations, returning the best labeling by inertia.
///
/// Each restart initializes centroids by uniformly sampling `k` distinct
/// rows, then runs Lloyd's iterations — assign to the nearest centroid
/// (squared Euclidean, ties to the lowest index), recompute means, re-seed
/// any emptied cluster from the point currently farthest from its
/// centroid — until the assignment stops changing. Deterministic for a
/// given seed.
pub fn kmeans(
    points: ArrayView2<'_, f64>,
    k: usize,
    restarts: usize,
    seed: u64,
) -> Result<ClusteringResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let outcomes = kmeans_restarts(points, k, restarts, &mut rng)?;
    let best_restart = outcomes
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| a.inertia.total_cmp(&b.inertia))
        .map(|(i, _)| i)
        .expect("at least one restart");
    Ok(ClusteringResult {
        assignments: outcomes[best_restart].assignments.clone(),
        restarts,
        per_restart_inertia: outcomes.iter().map(|o| o.inertia).collect(),
        best_restart,
    })
}

/// Run every restart off one generator so a fixed seed pins the whole
/// sequence, and keep each labeling.
pub(crate) fn kmeans_restarts(
    points: ArrayView2<'_, f64>,
    k: usize,
    restarts: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<RestartOutcome>> {
    let n = points.nrows();
    if k == 0 {
        return Err(Error::InvalidValue("k-means needs at least one cluster".into()));
    }
    if n < k {
        return Err(Error::InvalidValue(format!(
            "cannot form {} clusters from {} points",
            k, n
        )));
    }
    if restarts == 0 {
        return Err(Error::InvalidValue("k-means needs at least one restart".into()));
    }
    if let Some(bad) = points.iter().find(|x| !x.is_finite()) {
        return Err(Error::InvalidValue(format!(
            "k-means input contains a non-finite value {}",
            bad
        )));
    }
    let mut outcomes = Vec::with_capacity(restarts);
    for _ in 0..restarts {
        let (assignments, per_iter) = lloyd(points, k, rng);
        let inertia = *per_iter.last().expect("at least one iteration");
        outcomes.push(RestartOutcome { assignments, inertia });
    }
    Ok(outcomes)
}

/// `k` distinct indices from `0..n`, uniformly, via a partial
/// Fisher-Yates shuffle.
fn sample_distinct(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<usize> {
    let mut indices: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = rng.gen_range(i..n);
        indices.swap(i, j);
    }
    indices.truncate(k);
    indices
}

/// One Lloyd run; returns the converged assignment and the inertia after
/// every assignment step (non-increasing).
fn lloyd(points: ArrayView2<'_, f64>, k: usize, rng: &mut ChaCha8Rng) -> (Vec<usize>, Vec<f64>) {
    let n = points.nrows();
    let d = points.ncols();
    let mut centroids = Array2::zeros((k, d));
    for (c, &row) in sample_distinct(rng, n, k).iter().enumerate() {
        centroids.row_mut(c).assign(&points.row(row));
    }

    let mut assignments = vec![0usize; n];
    let mut distances = vec![0.0f64; n];
    let mut per_iter = Vec::new();
    let mut prev: Option<Vec<usize>> = None;

    for _ in 0..MAX_ITERS {
        // Assignment step: nearest centroid, ties to the lowest index.
        for (i, point) in points.outer_iter().enumerate() {
            let mut best = 0usize;
            let mut best_dist = f64::INFINITY;
            for (c, centroid) in centroids.outer_iter().enumerate() {
                let dist: f64 = point
                    .iter()
                    .zip(centroid.iter())
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum();
                if dist < best_dist {
                    best_dist = dist;
                    best = c;
                }
            }
            assignments[i] = best;
            distances[i] = best_dist;
        }
        per_iter.push(distances.iter().sum());
        if prev.as_deref() == Some(&assignments) {
            break;
        }
        prev = Some(assignments.clone());

        // Update step: means of the assigned points.
        let mut counts = vec![0usize; k];
        centroids.fill(0.0);
        for (i, point) in points.outer_iter().enumerate() {
            counts[assignments[i]] += 1;
            let mut row = centroids.row_mut(assignments[i]);
            row += &point;
        }
        for (c, &count) in counts.iter().enumerate() {
            if count > 0 {
                let mut row = centroids.row_mut(c);
                row /= count as f64;
            }
        }

        // Re-seed each emptied cluster from the point farthest from its
        // current centroid (distinct points, deterministic tie-break).
        let empties: Vec<usize> = counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c == 0)
            .map(|(c, _)| c)
            .collect();
        if !empties.is_empty() {
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| {
                distances[b].total_cmp(&distances[a]).then(a.cmp(&b))
            });
            for (&cluster, &point) in empties.iter().zip(order.iter()) {
                centroids.row_mut(cluster).assign(&points.row(point));
            }
        }
    }
    (assignments, per_iter)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn two_clouds() -> Array2<f64> {
        array![
            [0.01, 0.0],
            [-0.01, 0.01],
            [0.0, -0.01],
            [10.0, 10.01],
            [10.01, 9.99],
            [9.99, 10.0]
        ]
    }

    #[test]
    fn separated_clouds_split_perfectly() {
        let points = two_clouds();
        let result = kmeans(points.view(), 2, 3, 7).unwrap();
        let a = result.assignments[0];
        assert!(result.assignments[..3].iter().all(|&x| x == a));
        let b = result.assignments[3];
        assert_ne!(a, b);
        assert!(result.assignments[3..].iter().all(|&x| x == b));
        // Inertia is the within-cloud scatter, far below the separation.
        assert!(result.best_inertia() < 0.01);
    }

    #[test]
    fn single_cluster_inertia_is_total_scatter() {
        let points = array![[1.0, 0.0], [3.0, 2.0], [5.0, 4.0], [7.0, 2.0]];
        let n = points.nrows() as f64;
        let mean = points.sum_axis(ndarray::Axis(0)) / n;
        let scatter: f64 = points
            .outer_iter()
            .map(|row| {
                row.iter()
                    .zip(mean.iter())
                    .map(|(x, m)| (x - m) * (x - m))
                    .sum::<f64>()
            })
            .sum();
        let result = kmeans(points.view(), 1, 1, 0).unwrap();
        assert!((result.best_inertia() - scatter).abs() < 1e-12);
        assert!(result.assignments.iter().all(|&a| a == 0));
    }

    #[test]
    fn as_many_clusters_as_points_reaches_zero_inertia() {
        let points = array![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [2.0, 2.0]];
        let result = kmeans(points.view(), 4, 2, 3).unwrap();
        assert_eq!(result.best_inertia(), 0.0);
        let mut seen = result.assignments.clone();
        seen.sort_unstable();
        assert_eq!(seen, vec![0, 1, 2, 3]);
    }

    #[test]
    fn invalid_shapes_are_rejected() {
        let points = array![[0.0, 0.0], [1.0, 0.0]];
        assert!(kmeans(points.view(), 3, 1, 0).is_err());
        assert!(kmeans(points.view(), 0, 1, 0).is_err());
        assert!(kmeans(points.view(), 1, 0, 0).is_err());
        let bad = array![[f64::NAN, 0.0]];
        assert!(kmeans(bad.view(), 1, 1, 0).is_err());
    }

    #[test]
    fn same_seed_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let points = Array2::from_shape_fn((40, 3), |_| rng.gen::<f64>());
        let a = kmeans(points.view(), 5, 4, 11).unwrap();
        let b = kmeans(points.view(), 5, 4, 11).unwrap();
        assert_eq!(a, b);
        let c = kmeans(points.view(), 5, 4, 12).unwrap();
        // Different seeds may coincide in labeling but not in the whole
        // inertia sequence for this size.
        assert!(a.per_restart_inertia != c.per_restart_inertia || a.assignments != c.assignments);
    }

    #[test]
    fn inertia_is_non_increasing_within_every_restart() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for trial in 0..20 {
            let points = Array2::from_shape_fn((30, 2), |_| rng.gen::<f64>() * 4.0);
            let mut lrng = ChaCha8Rng::seed_from_u64(trial);
            let (_, per_iter) = lloyd(points.view(), 4, &mut lrng);
            for w in per_iter.windows(2) {
                assert!(
                    w[1] <= w[0] + 1e-12,
                    "inertia rose from {} to {} on trial {}",
                    w[0],
                    w[1],
                    trial
                );
            }
        }
    }

    #[test]
    fn duplicate_points_trigger_empty_cluster_reseeding() {
        // 8 copies of the origin plus two distant points: most inits pick
        // coincident centroids, emptying clusters until re-seeding pulls
        // them onto the outliers.
        let mut rows = vec![[0.0, 0.0]; 8];
        rows.push([5.0, 5.0]);
        rows.push([-6.0, 2.0]);
        let points = Array2::from_shape_vec((10, 2), rows.concat().to_vec()).unwrap();
        for seed in 0..10 {
            let result = kmeans(points.view(), 3, 1, seed).unwrap();
            assert!(result.assignments.iter().all(|&a| a < 3));
            // With three clusters available the two outliers always end
            // up alone, so the scatter is exactly zero.
            assert_eq!(result.best_inertia(), 0.0);
        }
    }
}
