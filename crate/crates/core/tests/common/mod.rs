//! Test-only oracles, deliberately written without the library's kernel,
//! factorization or selection code.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use refocus::EmbeddingMatrix;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `rows x cols` entries from uniform(−1, 1).
pub fn uniform_rows(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Vec<Vec<f64>> {
    (0..rows)
        .map(|_| (0..cols).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect()
}

pub fn matrix(rows: &[Vec<f64>]) -> EmbeddingMatrix<f64> {
    EmbeddingMatrix::from_rows(rows).unwrap()
}

/// Seeded `(V, Z)` pair with entries in (−1, 1).
pub fn instance(seed: u64, n: usize, d: usize, t: usize) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mut r = rng(seed);
    let v = uniform_rows(&mut r, n, d);
    let z = uniform_rows(&mut r, t, d);
    (v, z)
}

pub fn straight_dot(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        s += a[i] * b[i];
    }
    s
}

/// `M = Σ_j z_j z_jᵀ`, dense.
pub fn subspace_matrix(z: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let d = z[0].len();
    let mut m = vec![vec![0.0; d]; d];
    for row in z {
        for r in 0..d {
            for c in 0..d {
                m[r][c] += row[r] * row[c];
            }
        }
    }
    m
}

/// `uᵀ M w`.
pub fn quadratic(m: &[Vec<f64>], u: &[f64], w: &[f64]) -> f64 {
    let mut s = 0.0;
    for r in 0..u.len() {
        for c in 0..w.len() {
            s += u[r] * m[r][c] * w[c];
        }
    }
    s
}

/// Full `N x N` kernel `L[i][j] = v_iᵀ M v_j`.
pub fn dense_kernel(v: &[Vec<f64>], z: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let m = subspace_matrix(z);
    v.iter()
        .map(|vi| v.iter().map(|vj| quadratic(&m, vi, vj)).collect())
        .collect()
}

/// Jitter under the trace-relative rule, from the dense kernel.
pub fn oracle_jitter(l: &[Vec<f64>], scale: f64) -> f64 {
    let trace: f64 = (0..l.len()).map(|i| l[i][i]).sum();
    scale * trace / l.len() as f64
}

/// Determinant by cofactor expansion along the first row.
pub fn cofactor_det(m: &[Vec<f64>]) -> f64 {
    let n = m.len();
    match n {
        0 => 1.0,
        1 => m[0][0],
        2 => m[0][0] * m[1][1] - m[0][1] * m[1][0],
        _ => {
            let mut det = 0.0;
            for col in 0..n {
                let minor: Vec<Vec<f64>> = m[1..]
                    .iter()
                    .map(|row| {
                        row.iter()
                            .enumerate()
                            .filter(|&(c, _)| c != col)
                            .map(|(_, &x)| x)
                            .collect()
                    })
                    .collect();
                let sign = if col % 2 == 0 { 1.0 } else { -1.0 };
                det += sign * m[0][col] * cofactor_det(&minor);
            }
            det
        }
    }
}

/// `det(L_S + εI)` via cofactor expansion.
pub fn subset_det(l: &[Vec<f64>], subset: &[usize], eps: f64) -> f64 {
    let sub: Vec<Vec<f64>> = subset
        .iter()
        .map(|&i| {
            subset
                .iter()
                .map(|&j| l[i][j] + if i == j { eps } else { 0.0 })
                .collect()
        })
        .collect();
    cofactor_det(&sub)
}

/// Greedy on direct det ratios: each step picks the candidate maximizing
/// `det(L_{S∪v} + εI) / det(L_S + εI)`, lowest index on ties within `tol`.
/// Returns the picks and, per step, every candidate's ratio.
pub fn direct_ratio_greedy(l: &[Vec<f64>], eps: f64, m: usize, tol: f64) -> (Vec<usize>, Vec<Vec<(usize, f64)>>) {
    let n = l.len();
    let mut chosen: Vec<usize> = Vec::new();
    let mut history = Vec::new();
    for _ in 0..m {
        let base = subset_det(l, &chosen, eps);
        let ratios: Vec<(usize, f64)> = (0..n)
            .filter(|v| !chosen.contains(v))
            .map(|v| {
                let mut s = chosen.clone();
                s.push(v);
                (v, subset_det(l, &s, eps) / base)
            })
            .collect();
        let best = ratios.iter().map(|&(_, r)| r.ln()).fold(f64::NEG_INFINITY, f64::max);
        let pick = ratios.iter().find(|&&(_, r)| r.ln() >= best - tol).unwrap().0;
        chosen.push(pick);
        history.push(ratios);
    }
    (chosen, history)
}

/// All size-`m` subsets of `0..n` in lexicographic order.
pub fn combinations(n: usize, m: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, m: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == m {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, m, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, m, &mut Vec::new(), &mut out);
    out
}

/// Best `log det(L_S + εI)` over all size-`m` subsets by enumeration.
pub fn exhaustive_best(l: &[Vec<f64>], eps: f64, m: usize) -> (Vec<usize>, f64) {
    let mut best: Option<(Vec<usize>, f64)> = None;
    for s in combinations(l.len(), m) {
        let v = subset_det(l, &s, eps).ln();
        if best.as_ref().is_none_or(|(_, b)| v > *b) {
            best = Some((s, v));
        }
    }
    best.unwrap()
}

/// Random orthogonal `d x d` matrix from the QR factorization of a seeded Gaussian-ish matrix.
pub fn random_orthogonal(seed: u64, d: usize) -> Vec<Vec<f64>> {
    let mut r = rng(seed);
    let raw = nalgebra::DMatrix::from_fn(d, d, |_, _| r.random_range(-1.0..1.0));
    let q = raw.qr().q();
    (0..d).map(|i| (0..d).map(|j| q[(i, j)]).collect()).collect()
}

pub fn times(rows: &[Vec<f64>], q: &[Vec<f64>]) -> Vec<Vec<f64>> {
    rows.iter()
        .map(|row| {
            (0..q[0].len())
                .map(|j| (0..row.len()).map(|k| row[k] * q[k][j]).sum())
                .collect()
        })
        .collect()
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}
