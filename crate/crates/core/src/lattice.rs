//! Closest integer point under a positive-definite quadratic form.
//!
//! Depth-first Fincke–Pohst search over the Cholesky factor with
//! Schnorr–Euchner (zig-zag) child ordering.

use crate::error::{Error, Result};

pub const DEFAULT_NODE_CAP: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct ClosestPoint {
    pub point: Vec<i64>,
    /// `(z − t)ᵀ Q (z − t)` at `point`.
    pub distance: f64,
    /// False when the node cap stopped the search early.
    pub optimal: bool,
    pub nodes: u64,
}

/// Upper-triangular `R` with `Q = Rᵀ R`, row-major.
pub fn cholesky_upper(q: &[f64], n: usize) -> Result<Vec<f64>> {
    if q.len() != n * n {
        return Err(Error::Dimension(format!("{} entries for a {n}x{n} form", q.len())));
    }
    let max_diag = (0..n).map(|i| q[i * n + i].abs()).fold(0.0, f64::max);
    let floor = n as f64 * f64::EPSILON * max_diag;
    let mut r = vec![0.0; n * n];
    for i in 0..n {
        let mut d = q[i * n + i];
        for k in 0..i {
            d -= r[k * n + i] * r[k * n + i];
        }
        if !(d > floor) {
            return Err(Error::Numeric(format!(
                "quadratic form is not positive definite (pivot {d:e} at {i})"
            )));
        }
        let rii = d.sqrt();
        r[i * n + i] = rii;
        for j in i + 1..n {
            let mut s = q[i * n + j];
            for k in 0..i {
                s -= r[k * n + i] * r[k * n + j];
            }
            r[i * n + j] = s / rii;
        }
    }
    Ok(r)
}

/// `(z − t)ᵀ Q (z − t)` for real `z`.
pub fn quadratic_distance(q: &[f64], t: &[f64], z: &[f64]) -> f64 {
    let n = t.len();
    let d: Vec<f64> = z.iter().zip(t).map(|(a, b)| a - b).collect();
    (0..n)
        .map(|i| d[i] * (0..n).map(|j| q[i * n + j] * d[j]).sum::<f64>())
        .sum()
}

/// Minimizes `(z − t)ᵀ Q (z − t)` over `z ∈ Zⁿ`.
///
/// The search radius starts at the distance of `z = 0`, so the returned
/// point is never worse than the origin. If more than `node_cap` tree nodes
/// are visited, the best point so far is returned with `optimal = false`.
pub fn closest_point(q: &[f64], target: &[f64], node_cap: u64) -> Result<ClosestPoint> {
    let n = target.len();
    if n == 0 {
        return Ok(ClosestPoint {
            point: vec![],
            distance: 0.0,
            optimal: true,
            nodes: 0,
        });
    }
    if target.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric("non-finite lattice target".into()));
    }
    let r = cholesky_upper(q, n)?;
    let rd = |i: usize, j: usize| r[i * n + j];

    let mut best: Vec<i64> = vec![0; n];
    let mut best_dist = {
        let mut s = 0.0;
        for i in 0..n {
            let v: f64 = (i..n).map(|j| rd(i, j) * (0.0 - target[j])).sum();
            s += v * v;
        }
        s
    };

    let mut z = vec![0i64; n];
    let mut center = vec![0.0; n];
    let mut step = vec![0i64; n];
    let mut partial = vec![0.0; n + 1];

    let start = |c: f64| -> (i64, i64) {
        let z0 = c.round();
        let s = if c - z0 >= 0.0 { 1 } else { -1 };
        (z0 as i64, s)
    };
    let next = |z: &mut i64, s: &mut i64| {
        *z += *s;
        *s = -*s - s.signum();
    };

    let mut i = n - 1;
    center[i] = target[i];
    (z[i], step[i]) = start(center[i]);
    partial[n] = 0.0;
    let mut nodes = 0u64;
    let mut optimal = true;

    loop {
        nodes += 1;
        if nodes > node_cap {
            optimal = false;
            break;
        }
        let y = z[i] as f64 - center[i];
        let dist = partial[i + 1] + rd(i, i) * rd(i, i) * y * y;
        if dist < best_dist {
            if i == 0 {
                best.copy_from_slice(&z);
                best_dist = dist;
                next(&mut z[0], &mut step[0]);
            } else {
                partial[i] = dist;
                i -= 1;
                let off: f64 = (i + 1..n).map(|j| rd(i, j) * (z[j] as f64 - target[j])).sum();
                center[i] = target[i] - off / rd(i, i);
                (z[i], step[i]) = start(center[i]);
            }
        } else {
            if i == n - 1 {
                break;
            }
            i += 1;
            next(&mut z[i], &mut step[i]);
        }
    }

    Ok(ClosestPoint {
        point: best,
        distance: best_dist,
        optimal,
        nodes,
    })
}
