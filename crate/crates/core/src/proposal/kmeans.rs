//! Lloyd's k-means with k-means++ seeding, best of several restarts.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{mean, squared_distance};
use crate::scalar::Real;
use crate::seed::rng_for;

#[derive(Debug, Error, PartialEq)]
pub enum ClusterError {
    #[error("no vectors to cluster")]
    EmptyInput,
    #[error("k must be positive")]
    ZeroK,
    #[error("k = {k} exceeds the {n} vectors available")]
    KTooLarge { k: usize, n: usize },
    #[error("vector {index} has dimension {got}, expected {expected}")]
    DimensionMismatch {
        index: usize,
        expected: usize,
        got: usize,
    },
    #[error("malformed cluster assignment: {0}")]
    MalformedAssignment(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KMeansParams {
    pub k: usize,
    pub seed: u64,
    pub max_iters: usize,
    pub restarts: usize,
    /// Stop once an iteration lowers inertia by less than this fraction.
    pub tolerance: f64,
}

impl Default for KMeansParams {
    fn default() -> Self {
        Self {
            k: 1,
            seed: 0,
            max_iters: 100,
            restarts: 10,
            tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment<T> {
    pub k: usize,
    pub labels: Vec<usize>,
    pub centroids: Vec<Vec<T>>,
    /// Sum of squared distances from each vector to its assigned centroid.
    pub inertia: T,
}

impl<T: Real> ClusterAssignment<T> {
    pub fn members(&self, cluster: usize) -> impl Iterator<Item = usize> + '_ {
        self.labels
            .iter()
            .enumerate()
            .filter(move |(_, &l)| l == cluster)
            .map(|(i, _)| i)
    }

    pub fn validate(&self, n: usize) -> Result<(), ClusterError> {
        let bad = |m: String| Err(ClusterError::MalformedAssignment(m));
        if self.labels.len() != n {
            return bad(format!("{} labels for {n} items", self.labels.len()));
        }
        if self.centroids.len() != self.k {
            return bad(format!("{} centroids for k = {}", self.centroids.len(), self.k));
        }
        if let Some(&l) = self.labels.iter().find(|&&l| l >= self.k) {
            return bad(format!("label {l} out of range"));
        }
        for c in 0..self.k {
            if self.members(c).next().is_none() {
                return bad(format!("cluster {c} is empty"));
            }
        }
        Ok(())
    }
}

fn check_input<T: Real>(vectors: &[Vec<T>], k: usize) -> Result<usize, ClusterError> {
    if vectors.is_empty() {
        return Err(ClusterError::EmptyInput);
    }
    if k == 0 {
        return Err(ClusterError::ZeroK);
    }
    if k > vectors.len() {
        return Err(ClusterError::KTooLarge { k, n: vectors.len() });
    }
    let dim = vectors[0].len();
    for (index, v) in vectors.iter().enumerate() {
        if v.len() != dim {
            return Err(ClusterError::DimensionMismatch {
                index,
                expected: dim,
                got: v.len(),
            });
        }
    }
    Ok(dim)
}

fn nearest<T: Real>(v: &[T], centroids: &[Vec<T>]) -> (usize, T) {
    let mut best = (0, squared_distance(v, &centroids[0]));
    for (c, centroid) in centroids.iter().enumerate().skip(1) {
        let d = squared_distance(v, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// k-means++: first centre uniform, each further centre drawn with
/// probability proportional to squared distance from the nearest chosen one.
fn seed_plus_plus<T: Real>(vectors: &[Vec<T>], k: usize, rng: &mut impl Rng) -> Vec<Vec<T>> {
    let n = vectors.len();
    let mut chosen = vec![rng.random_range(0..n)];
    let mut d2: Vec<T> = vectors
        .iter()
        .map(|v| squared_distance(v, &vectors[chosen[0]]))
        .collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().map(|d| d.to_f64().unwrap_or(0.0)).sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = None;
            for (i, d) in d2.iter().enumerate() {
                let w = d.to_f64().unwrap_or(0.0);
                if w <= 0.0 {
                    continue;
                }
                pick = Some(i);
                if target < w {
                    break;
                }
                target -= w;
            }
            pick.expect("positive total has a positive weight")
        } else {
            // Remaining points coincide with chosen centres.
            let free: Vec<usize> = (0..n).filter(|i| !chosen.contains(i)).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen.push(next);
        for (i, v) in vectors.iter().enumerate() {
            let d = squared_distance(v, &vectors[next]);
            if d < d2[i] {
                d2[i] = d;
            }
        }
    }
    chosen.into_iter().map(|i| vectors[i].clone()).collect()
}

fn assign<T: Real>(vectors: &[Vec<T>], centroids: &[Vec<T>]) -> Vec<usize> {
    vectors.iter().map(|v| nearest(v, centroids).0).collect()
}

/// Gives every empty cluster the point farthest from its centroid, taken
/// from a cluster that has more than one member.
fn repair_empty<T: Real>(vectors: &[Vec<T>], labels: &mut [usize], centroids: &mut [Vec<T>]) {
    let k = centroids.len();
    let mut counts = vec![0usize; k];
    labels.iter().for_each(|&l| counts[l] += 1);
    for c in 0..k {
        if counts[c] > 0 {
            continue;
        }
        let mut far: Option<(usize, T)> = None;
        for (i, v) in vectors.iter().enumerate() {
            if counts[labels[i]] < 2 {
                continue;
            }
            let d = squared_distance(v, &centroids[labels[i]]);
            if far.is_none_or(|(_, best)| d > best) {
                far = Some((i, d));
            }
        }
        let (i, _) = far.expect("k <= n leaves some cluster with two members");
        counts[labels[i]] -= 1;
        labels[i] = c;
        counts[c] = 1;
        centroids[c] = vectors[i].clone();
    }
}

fn update<T: Real>(vectors: &[Vec<T>], labels: &[usize], k: usize, dim: usize) -> Vec<Vec<T>> {
    let mut groups: Vec<Vec<&[T]>> = vec![Vec::new(); k];
    for (v, &l) in vectors.iter().zip(labels) {
        groups[l].push(v);
    }
    groups.iter().map(|g| mean(g, dim)).collect()
}

fn inertia<T: Real>(vectors: &[Vec<T>], labels: &[usize], centroids: &[Vec<T>]) -> T {
    vectors
        .iter()
        .zip(labels)
        .fold(T::zero(), |acc, (v, &l)| acc + squared_distance(v, &centroids[l]))
}

/// One Lloyd run. Returns the final assignment and the inertia after every
/// completed iteration.
fn lloyd<T: Real>(
    vectors: &[Vec<T>],
    params: &KMeansParams,
    dim: usize,
    restart: usize,
) -> (ClusterAssignment<T>, Vec<T>) {
    let k = params.k;
    let mut rng = rng_for(params.seed, "kmeans++", restart as u64);
    let mut centroids = seed_plus_plus(vectors, k, &mut rng);
    let mut labels = assign(vectors, &centroids);
    repair_empty(vectors, &mut labels, &mut centroids);
    centroids = update(vectors, &labels, k, dim);
    let mut current = inertia(vectors, &labels, &centroids);
    let mut history = vec![current];
    let tol = T::from_f64(params.tolerance).unwrap_or_else(T::zero);

    for _ in 1..params.max_iters.max(1) {
        let mut next_labels = assign(vectors, &centroids);
        let mut scratch = centroids.clone();
        repair_empty(vectors, &mut next_labels, &mut scratch);
        let next_centroids = update(vectors, &next_labels, k, dim);
        let next = inertia(vectors, &next_labels, &next_centroids);
        // In exact arithmetic Lloyd never increases inertia; a rise can only
        // be rounding noise at a fixed point.
        if next > current {
            break;
        }
        let unchanged = next_labels == labels;
        let gain = current - next;
        labels = next_labels;
        centroids = next_centroids;
        let previous = current;
        current = next;
        history.push(current);
        if unchanged || gain <= tol * previous {
            break;
        }
    }
    (
        ClusterAssignment {
            k,
            labels,
            centroids,
            inertia: current,
        },
        history,
    )
}

/// Clusters `vectors` and also returns the per-iteration inertia of every
/// restart.
pub fn kmeans_cluster_traced<T: Real>(
    vectors: &[Vec<T>],
    params: &KMeansParams,
) -> Result<(ClusterAssignment<T>, Vec<Vec<T>>), ClusterError> {
    let dim = check_input(vectors, params.k)?;
    let mut best: Option<ClusterAssignment<T>> = None;
    let mut traces = Vec::new();
    for restart in 0..params.restarts.max(1) {
        let (assignment, history) = lloyd(vectors, params, dim, restart);
        traces.push(history);
        if best.as_ref().is_none_or(|b| assignment.inertia < b.inertia) {
            best = Some(assignment);
        }
    }
    Ok((best.expect("at least one restart"), traces))
}

pub fn kmeans_cluster<T: Real>(
    vectors: &[Vec<T>],
    params: &KMeansParams,
) -> Result<ClusterAssignment<T>, ClusterError> {
    kmeans_cluster_traced(vectors, params).map(|(a, _)| a)
}

/// Index of the member nearest each centroid, in cluster order. Ties go to
/// the lowest index.
pub fn select_representatives<T: Real>(
    vectors: &[Vec<T>],
    assignment: &ClusterAssignment<T>,
) -> Result<Vec<usize>, ClusterError> {
    assignment.validate(vectors.len())?;
    Ok((0..assignment.k)
        .map(|c| {
            let centroid = &assignment.centroids[c];
            let mut best: Option<(usize, T)> = None;
            for i in assignment.members(c) {
                let d = squared_distance(&vectors[i], centroid);
                if best.is_none_or(|(_, b)| d < b) {
                    best = Some((i, d));
                }
            }
            best.expect("validated clusters are nonempty").0
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params(k: usize) -> KMeansParams {
        KMeansParams {
            k,
            seed: 1,
            ..KMeansParams::default()
        }
    }

    /// Minimum inertia over every labelling of points into two nonempty
    /// groups, with each group's mean as centre.
    fn brute_force_two_partition(points: &[Vec<f64>]) -> (Vec<usize>, f64) {
        let n = points.len();
        let mut best = (Vec::new(), f64::INFINITY);
        for mask in 1..(1u32 << n) - 1 {
            let labels: Vec<usize> = (0..n).map(|i| ((mask >> i) & 1) as usize).collect();
            let cents = update(points, &labels, 2, points[0].len());
            let cost = inertia(points, &labels, &cents);
            if cost < best.1 {
                best = (labels, cost);
            }
        }
        best
    }

    fn same_partition(a: &[usize], b: &[usize]) -> bool {
        (0..a.len()).all(|i| (0..a.len()).all(|j| (a[i] == a[j]) == (b[i] == b[j])))
    }

    #[test]
    fn k_equals_n_is_exact() {
        let v = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 3.0], vec![5.0, 5.0]];
        let a = kmeans_cluster(&v, &params(4)).unwrap();
        assert_eq!(a.inertia, 0.0);
        let mut labels = a.labels.clone();
        labels.sort();
        assert_eq!(labels, vec![0, 1, 2, 3]);
        let mut reps = select_representatives(&v, &a).unwrap();
        reps.sort();
        assert_eq!(reps, vec![0, 1, 2, 3]);
    }

    #[test]
    fn k_one_centroid_is_mean() {
        let v = vec![vec![0.0, 0.0], vec![2.0, 0.0], vec![1.0, 3.0]];
        let a = kmeans_cluster(&v, &params(1)).unwrap();
        assert_eq!(a.centroids[0], vec![1.0, 1.0]);
        assert_eq!(a.labels, vec![0, 0, 0]);
    }

    #[test]
    fn planted_groups_match_brute_force() {
        let pts = vec![
            vec![0.0, 0.1],
            vec![0.2, 0.0],
            vec![0.1, 0.3],
            vec![10.0, 10.2],
            vec![10.1, 9.8],
            vec![9.9, 10.0],
        ];
        let (oracle, oracle_cost) = brute_force_two_partition(&pts);
        assert!(same_partition(&oracle, &[0, 0, 0, 1, 1, 1]));
        let a = kmeans_cluster(&pts, &params(2)).unwrap();
        assert!(same_partition(&a.labels, &oracle));
        assert!((a.inertia - oracle_cost).abs() < 1e-12);
    }

    #[test]
    fn representatives_match_exhaustive_scan() {
        let pts = vec![
            vec![0.0, 0.0],
            vec![1.0, 0.0],
            vec![0.4, 0.1],
            vec![8.0, 8.0],
            vec![9.0, 9.5],
        ];
        let a = kmeans_cluster(&pts, &params(2)).unwrap();
        let reps = select_representatives(&pts, &a).unwrap();
        for (c, &r) in reps.iter().enumerate() {
            let centroid = &a.centroids[c];
            let oracle = (0..pts.len())
                .filter(|&i| a.labels[i] == c)
                .min_by(|&i, &j| {
                    squared_distance(&pts[i], centroid)
                        .partial_cmp(&squared_distance(&pts[j], centroid))
                        .unwrap()
                        .then(i.cmp(&j))
                })
                .unwrap();
            assert_eq!(r, oracle);
        }
        // Cluster {0,1,2} has centroid (0.4667, 0.0333); point 2 is closest.
        assert!(reps.contains(&2));
    }

    #[test]
    fn tie_goes_to_lower_index() {
        let pts = vec![vec![-1.0], vec![1.0]];
        let a = ClusterAssignment {
            k: 1,
            labels: vec![0, 0],
            centroids: vec![vec![0.0]],
            inertia: 2.0,
        };
        assert_eq!(select_representatives(&pts, &a).unwrap(), vec![0]);
        let single = ClusterAssignment {
            k: 2,
            labels: vec![0, 1],
            centroids: vec![vec![-1.0], vec![1.0]],
            inertia: 0.0,
        };
        assert_eq!(select_representatives(&pts, &single).unwrap(), vec![0, 1]);
    }

    #[test]
    fn duplicates_still_give_nonempty_clusters() {
        let v = vec![vec![1.0, 1.0]; 5];
        let a = kmeans_cluster(&v, &params(3)).unwrap();
        a.validate(5).unwrap();
        assert_eq!(a.inertia, 0.0);
    }

    #[test]
    fn input_errors() {
        let v = vec![vec![0.0], vec![1.0]];
        assert_eq!(kmeans_cluster(&v, &params(3)).unwrap_err(), ClusterError::KTooLarge { k: 3, n: 2 });
        assert_eq!(kmeans_cluster::<f64>(&[], &params(1)).unwrap_err(), ClusterError::EmptyInput);
        assert!(matches!(
            kmeans_cluster(&[vec![0.0], vec![1.0, 2.0]], &params(1)),
            Err(ClusterError::DimensionMismatch { index: 1, .. })
        ));
        let broken = ClusterAssignment {
            k: 2,
            labels: vec![0, 0],
            centroids: vec![vec![0.0], vec![1.0]],
            inertia: 0.0,
        };
        assert!(select_representatives(&v, &broken).is_err());
    }

    #[test]
    fn f32_clusters() {
        let v: Vec<Vec<f32>> = vec![vec![0.0], vec![0.1], vec![5.0], vec![5.1]];
        let a = kmeans_cluster(&v, &params(2)).unwrap();
        assert!(same_partition(&a.labels, &[0, 0, 1, 1]));
    }

    proptest! {
        #[test]
        fn deterministic_and_monotone(points in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 3), 2..40), k in 1usize..6, seed in 0u64..1000) {
            let k = k.min(points.len());
            let p = KMeansParams { k, seed, ..KMeansParams::default() };
            let (a, traces) = kmeans_cluster_traced(&points, &p).unwrap();
            prop_assert_eq!(&a, &kmeans_cluster(&points, &p).unwrap());
            a.validate(points.len()).unwrap();
            let recomputed = inertia(&points, &a.labels, &a.centroids);
            prop_assert!((recomputed - a.inertia).abs() <= 1e-9 * (1.0 + a.inertia));
            for t in traces {
                for w in t.windows(2) {
                    prop_assert!(w[1] <= w[0]);
                }
            }
            let reps = select_representatives(&points, &a).unwrap();
            let mut seen = reps.clone();
            seen.sort();
            seen.dedup();
            prop_assert_eq!(seen.len(), k);
            for (c, r) in reps.iter().enumerate() {
                prop_assert_eq!(a.labels[*r], c);
            }
        }
    }
}
