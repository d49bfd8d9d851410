//! 2-D PCA export of the candidate pool, for external dispersion plots.

use std::io::Write;
use std::path::Path;

use crate::diversity::CandidatePool;
use crate::error::{Error, Result};
use crate::tensor::Matrix;

const POWER_ITERATIONS: usize = 10_000;
const POWER_TOL: f64 = 1e-12;

/// Top `k` eigenpairs of the covariance of the (centered) pool vectors,
/// by power iteration with deflation. Covariance is normalized by n.
pub fn top_eigenpairs(pool: &CandidatePool, k: usize) -> Result<Vec<(f64, Vec<f64>)>> {
    if pool.len() < 2 {
        return Err(Error::InvalidParameter(
            "projection needs at least 2 points".into(),
        ));
    }
    let n = pool.len();
    let d = pool.dim();
    let mut mean = vec![0.0; d];
    for v in &pool.vectors {
        for (m, &x) in mean.iter_mut().zip(&v.values) {
            *m += x;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut cov = Matrix::zeros(d, d);
    for v in &pool.vectors {
        let centered: Vec<f64> = v.values.iter().zip(&mean).map(|(&x, &m)| x - m).collect();
        for i in 0..d {
            let row = cov.row_mut(i);
            for j in 0..d {
                row[j] += centered[i] * centered[j];
            }
        }
    }
    for v in cov.data_mut() {
        *v /= n as f64;
    }
    let total_var: f64 = (0..d).map(|i| cov.get(i, i)).sum();
    if total_var <= 0.0 {
        return Err(Error::DegenerateInput(
            "all points identical: covariance has rank 0".into(),
        ));
    }

    let mut pairs = Vec::with_capacity(k);
    for comp in 0..k.min(d) {
        // Deterministic start vector, orthogonal-ish across components.
        let mut v: Vec<f64> = (0..d)
            .map(|i| if i % (comp + 1) == 0 { 1.0 } else { 0.5 })
            .collect();
        normalize(&mut v);
        for _ in 0..POWER_ITERATIONS {
            let mut next = vec![0.0; d];
            for i in 0..d {
                let row = cov.row(i);
                next[i] = row.iter().zip(&v).map(|(&c, &x)| c * x).sum();
            }
            normalize(&mut next);
            let delta: f64 = next
                .iter()
                .zip(&v)
                .map(|(&a, &b)| (a - b).abs())
                .fold(0.0, f64::max);
            v = next;
            if delta < POWER_TOL {
                break;
            }
        }
        // Rayleigh quotient: quadratically accurate in the residual
        // eigenvector error, unlike the raw iterate norm.
        let eigenvalue: f64 = (0..d)
            .map(|i| v[i] * cov.row(i).iter().zip(&v).map(|(&c, &x)| c * x).sum::<f64>())
            .sum();
        pairs.push((eigenvalue, v.clone()));
        // Deflate: C <- C - lambda v v^T
        for i in 0..d {
            let vi = v[i];
            let row = cov.row_mut(i);
            for j in 0..d {
                row[j] -= eigenvalue * vi * v[j];
            }
        }
    }
    Ok(pairs)
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = v.iter().map(|&x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in v.iter_mut() {
            *x /= norm;
        }
    }
    norm
}

/// Writes `x,y,provenance` rows for the pool projected onto its top-2
/// principal directions.
pub fn export_projection(pool: &CandidatePool, out: &Path) -> Result<()> {
    let pairs = top_eigenpairs(pool, 2)?;
    let n = pool.len();
    let d = pool.dim();
    let mut mean = vec![0.0; d];
    for v in &pool.vectors {
        for (m, &x) in mean.iter_mut().zip(&v.values) {
            *m += x;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut w = std::io::BufWriter::new(std::fs::File::create(out)?);
    writeln!(w, "x,y,provenance")?;
    for (v, r) in pool.vectors.iter().zip(&pool.refs) {
        let centered: Vec<f64> = v.values.iter().zip(&mean).map(|(&x, &m)| x - m).collect();
        let x: f64 = centered.iter().zip(&pairs[0].1).map(|(&c, &e)| c * e).sum();
        let y: f64 = if pairs.len() > 1 {
            centered.iter().zip(&pairs[1].1).map(|(&c, &e)| c * e).sum()
        } else {
            0.0
        };
        writeln!(w, "{x},{y},{}", r.provenance)?;
    }
    Ok(())
}
