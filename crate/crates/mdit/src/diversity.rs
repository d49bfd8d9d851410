//! K-Means over pooled vectors and nearest-to-center selection.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::embedder::{EmbeddedSample, PooledVector, Provenance};
use crate::error::{Error, Result};
use crate::seed::splitmix64;

/// Lloyd restarts per call; the best objective wins.
const N_INIT: usize = 10;

#[derive(Debug, Clone)]
pub struct PoolRef {
    /// Index into the caller's combined sample list.
    pub sample_index: usize,
    pub provenance: Provenance,
}

#[derive(Debug, Clone)]
pub struct CandidatePool {
    pub vectors: Vec<PooledVector>,
    pub refs: Vec<PoolRef>,
}

impl CandidatePool {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors.first().map_or(0, |v| v.values.len())
    }
}

#[derive(Debug, Clone)]
pub struct ClusterModel {
    pub centers: Vec<Vec<f64>>,
    pub assignments: Vec<usize>,
    pub objective: f64,
    /// Recomputed objective after each Lloyd iteration of the winning
    /// restart; non-increasing.
    pub objective_trace: Vec<f64>,
    pub iterations_run: usize,
}

impl ClusterModel {
    pub fn cluster_count(&self) -> usize {
        self.centers.len()
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0usize; self.centers.len()];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum()
}

fn nearest_center(point: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, c) in centers.iter().enumerate() {
        let d = sq_dist(point, c);
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    (best, best_d)
}

fn kmeanspp_seed(points: &[&[f64]], m: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(m);
    centers.push(points[rng.gen_range(0..points.len())].to_vec());
    let mut d2: Vec<f64> = points
        .iter()
        .map(|p| sq_dist(p, &centers[0]))
        .collect();
    while centers.len() < m {
        let total: f64 = d2.iter().sum();
        let next = if total <= 0.0 {
            rng.gen_range(0..points.len())
        } else {
            let mut target = rng.gen::<f64>() * total;
            let mut chosen = points.len() - 1;
            for (i, &w) in d2.iter().enumerate() {
                target -= w;
                if target <= 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        };
        centers.push(points[next].to_vec());
        for (i, p) in points.iter().enumerate() {
            let d = sq_dist(p, centers.last().unwrap());
            if d < d2[i] {
                d2[i] = d;
            }
        }
    }
    centers
}

struct LloydRun {
    centers: Vec<Vec<f64>>,
    assignments: Vec<usize>,
    objective: f64,
    trace: Vec<f64>,
    iterations: usize,
}

fn lloyd(points: &[&[f64]], m: usize, max_iter: usize, tol: f64, rng: &mut ChaCha8Rng) -> LloydRun {
    let dim = points[0].len();
    let mut centers = kmeanspp_seed(points, m, rng);
    let mut assignments = vec![0usize; points.len()];
    let mut trace = Vec::new();
    let mut prev_obj = f64::INFINITY;
    let mut iterations = 0;
    for _ in 0..max_iter {
        iterations += 1;
        for (i, p) in points.iter().enumerate() {
            let (a, _) = nearest_center(p, &centers);
            assignments[i] = a;
        }
        // Empty clusters steal the point currently farthest from its center.
        loop {
            let mut sizes = vec![0usize; m];
            for &a in &assignments {
                sizes[a] += 1;
            }
            let Some(empty) = sizes.iter().position(|&s| s == 0) else {
                break;
            };
            let farthest = (0..points.len())
                .filter(|&i| sizes[assignments[i]] > 1)
                .max_by(|&a, &b| {
                    let da = sq_dist(points[a], &centers[assignments[a]]);
                    let db = sq_dist(points[b], &centers[assignments[b]]);
                    da.partial_cmp(&db).unwrap()
                })
                .expect("more points than clusters");
            centers[empty] = points[farthest].to_vec();
            assignments[farthest] = empty;
        }
        // Center update, accumulated in ascending point index.
        let mut sums = vec![vec![0.0; dim]; m];
        let mut counts = vec![0usize; m];
        for (i, p) in points.iter().enumerate() {
            counts[assignments[i]] += 1;
            for (s, &v) in sums[assignments[i]].iter_mut().zip(*p) {
                *s += v;
            }
        }
        for (c, (sum, count)) in centers.iter_mut().zip(sums.iter().zip(&counts)) {
            if *count > 0 {
                for (cv, &sv) in c.iter_mut().zip(sum) {
                    *cv = sv / *count as f64;
                }
            }
        }
        let obj: f64 = (0..points.len())
            .map(|i| sq_dist(points[i], &centers[assignments[i]]))
            .sum();
        trace.push(obj);
        if prev_obj - obj < tol {
            break;
        }
        prev_obj = obj;
    }
    // Final assignment pass so assignments match the last centers.
    let mut obj = 0.0;
    for (i, p) in points.iter().enumerate() {
        let (a, d) = nearest_center(p, &centers);
        assignments[i] = a;
        obj += d;
    }
    trace.push(obj);
    LloydRun {
        centers,
        assignments,
        objective: obj,
        trace,
        iterations,
    }
}

/// Lloyd's algorithm with k-means++ seeding, restarted `N_INIT` times
/// from seeds derived from `seed`; the lowest-objective run is kept.
pub fn kmeans(
    pool: &CandidatePool,
    m: usize,
    max_iter: usize,
    tol: f64,
    seed: u64,
) -> Result<ClusterModel> {
    if m == 0 {
        return Err(Error::InvalidParameter("cluster count must be >= 1".into()));
    }
    if m > pool.len() {
        return Err(Error::InvalidParameter(format!(
            "cluster count {m} exceeds pool size {}",
            pool.len()
        )));
    }
    if max_iter == 0 {
        return Err(Error::InvalidParameter("max_iter must be >= 1".into()));
    }
    if tol < 0.0 {
        return Err(Error::InvalidParameter("tol must be >= 0".into()));
    }
    let points: Vec<&[f64]> = pool.vectors.iter().map(|v| v.values.as_slice()).collect();
    let mut best: Option<LloydRun> = None;
    for restart in 0..N_INIT {
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ restart as u64));
        let run = lloyd(&points, m, max_iter, tol, &mut rng);
        if best.as_ref().map_or(true, |b| run.objective < b.objective) {
            best = Some(run);
        }
    }
    let best = best.unwrap();
    Ok(ClusterModel {
        centers: best.centers,
        assignments: best.assignments,
        objective: best.objective,
        objective_trace: best.trace,
        iterations_run: best.iterations,
    })
}

/// Recomputes the clustering objective from scratch.
pub fn objective(model: &ClusterModel, pool: &CandidatePool) -> Result<f64> {
    if model.assignments.len() != pool.len() {
        return Err(Error::InvalidParameter(
            "model does not fit pool: assignment count mismatch".into(),
        ));
    }
    if let (Some(c), d) = (model.centers.first(), pool.dim()) {
        if c.len() != d {
            return Err(Error::InvalidParameter(
                "model does not fit pool: dimension mismatch".into(),
            ));
        }
    }
    Ok(pool
        .vectors
        .iter()
        .zip(&model.assignments)
        .map(|(v, &a)| sq_dist(&v.values, &model.centers[a]))
        .sum())
}

#[derive(Debug, Clone)]
pub struct SelectedSet {
    /// Ascending pool indices of the selected points.
    pub indices: Vec<usize>,
    pub per_cluster_quota: Vec<usize>,
}

impl SelectedSet {
    pub fn size(&self) -> usize {
        self.indices.len()
    }
}

/// Per-cluster quotas proportional to cluster sizes (largest-remainder
/// rounding, leftovers to the largest clusters first); within a cluster
/// the quota points nearest the center win, ties to the lower index.
pub fn select_diverse(
    model: &ClusterModel,
    pool: &CandidatePool,
    budget: usize,
) -> Result<SelectedSet> {
    let n = pool.len();
    if budget == 0 || budget > n {
        return Err(Error::InvalidParameter(format!(
            "budget must lie in [1, {n}], got {budget}"
        )));
    }
    let m = model.cluster_count();
    let sizes = model.cluster_sizes();
    let mut quotas: Vec<usize> = sizes.iter().map(|&s| budget * s / n).collect();
    let assigned: usize = quotas.iter().sum();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| {
        let ra = (budget * sizes[a]) % n;
        let rb = (budget * sizes[b]) % n;
        rb.cmp(&ra).then(sizes[b].cmp(&sizes[a])).then(a.cmp(&b))
    });
    for &c in order.iter().take(budget - assigned) {
        quotas[c] += 1;
    }

    let mut indices = Vec::with_capacity(budget);
    for c in 0..m {
        let mut members: Vec<(f64, usize)> = (0..n)
            .filter(|&i| model.assignments[i] == c)
            .map(|i| (sq_dist(&pool.vectors[i].values, &model.centers[c]), i))
            .collect();
        members.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        indices.extend(members.iter().take(quotas[c]).map(|&(_, i)| i));
    }
    indices.sort_unstable();
    Ok(SelectedSet {
        indices,
        per_cluster_quota: quotas,
    })
}

/// Gathers the selected samples in ascending pool order.
pub fn assemble_training_set<'a>(
    samples: &'a [EmbeddedSample],
    pool: &CandidatePool,
    selection: &SelectedSet,
) -> Result<Vec<&'a EmbeddedSample>> {
    let mut out = Vec::with_capacity(selection.size());
    for &i in &selection.indices {
        let r = pool
            .refs
            .get(i)
            .ok_or_else(|| Error::Internal(format!("selection index {i} outside pool")))?;
        let s = samples
            .get(r.sample_index)
            .ok_or_else(|| Error::Internal(format!("dangling sample reference {}", r.sample_index)))?;
        out.push(s);
    }
    Ok(out)
}
