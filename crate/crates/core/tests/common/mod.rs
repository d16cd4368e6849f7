//! Independent dense oracles for the integration tests.
//!
//! Nothing here calls into the solver library except to read matrices and
//! apply operators, so a bug in a library kernel cannot hide behind itself.

#![allow(dead_code)]

use dfpi::linalg::LinearOperator;
use dfpi::precond::Preconditioner;

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub fn norm(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

pub fn diff(x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(a, b)| a - b).collect()
}

pub fn sum(x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(a, b)| a + b).collect()
}

pub fn rel(x: &[f64], reference: &[f64]) -> f64 {
    norm(&diff(x, reference)) / norm(reference).max(f64::MIN_POSITIVE)
}

/// Row-major copy of an operator.
pub fn rows_of(a: &dyn LinearOperator) -> Vec<Vec<f64>> {
    let d = a.to_dense();
    (0..d.rows()).map(|i| d.row(i).to_vec()).collect()
}

pub fn matvec(m: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    m.iter().map(|row| dot(row, x)).collect()
}

pub fn matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let k = b.len();
    let m = b.first().map_or(0, |r| r.len());
    a.iter()
        .map(|row| {
            (0..m)
                .map(|j| (0..k).map(|l| row[l] * b[l][j]).sum())
                .collect()
        })
        .collect()
}

pub fn transpose(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let m = a.first().map_or(0, |r| r.len());
    (0..m).map(|j| a.iter().map(|r| r[j]).collect()).collect()
}

pub fn identity(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

/// Gaussian elimination with partial pivoting.
pub fn gauss_solve(m: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut a: Vec<Vec<f64>> = m
        .iter()
        .zip(b)
        .map(|(r, bi)| {
            let mut row = r.clone();
            row.push(*bi);
            row
        })
        .collect();
    for c in 0..n {
        let piv = (c..n)
            .max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))
            .unwrap();
        a.swap(c, piv);
        for i in c + 1..n {
            let f = a[i][c] / a[c][c];
            if f != 0.0 {
                for j in c..=n {
                    a[i][j] -= f * a[c][j];
                }
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| a[i][j] * x[j]).sum();
        x[i] = (a[i][n] - s) / a[i][i];
    }
    x
}

/// Inverse by column-wise elimination.
pub fn inverse(m: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = m.len();
    let cols: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            gauss_solve(
                m,
                &(0..n)
                    .map(|i| if i == j { 1.0 } else { 0.0 })
                    .collect::<Vec<_>>(),
            )
        })
        .collect();
    transpose(&cols)
}

/// Coefficients `c` minimising `‖rhs − Σ cⱼ colsⱼ‖` by Householder QR.
pub fn lstsq(cols: &[Vec<f64>], rhs: &[f64]) -> Vec<f64> {
    let k = cols.len();
    if k == 0 {
        return Vec::new();
    }
    let n = rhs.len();
    let mut a: Vec<Vec<f64>> = cols.to_vec();
    let mut y = rhs.to_vec();
    for j in 0..k {
        let alpha = {
            let s: f64 = a[j][j..].iter().map(|v| v * v).sum::<f64>().sqrt();
            if a[j][j] > 0.0 {
                -s
            } else {
                s
            }
        };
        let mut v: Vec<f64> = a[j][j..].to_vec();
        v[0] -= alpha;
        let vn = dot(&v, &v);
        if vn == 0.0 {
            continue;
        }
        for col in a.iter_mut().skip(j) {
            let f = 2.0 * dot(&v, &col[j..]) / vn;
            for (t, vi) in col[j..].iter_mut().zip(&v) {
                *t -= f * vi;
            }
        }
        let f = 2.0 * dot(&v, &y[j..]) / vn;
        for (t, vi) in y[j..].iter_mut().zip(&v) {
            *t -= f * vi;
        }
    }
    let mut c = vec![0.0; k];
    for i in (0..k).rev() {
        let s: f64 = (i + 1..k).map(|j| a[j][i] * c[j]).sum();
        c[i] = (y[i] - s) / a[i][i];
    }
    debug_assert!(n >= k);
    c
}

pub fn combine(cols: &[Vec<f64>], c: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for (col, ci) in cols.iter().zip(c) {
        for (o, v) in out.iter_mut().zip(col) {
            *o += ci * v;
        }
    }
    out
}

/// Classical Gram-Schmidt applied twice; near-dependent vectors are skipped.
pub fn orthonormal(vectors: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut q: Vec<Vec<f64>> = Vec::new();
    for v in vectors {
        let mut w = v.clone();
        for _ in 0..2 {
            for qi in &q {
                let h = dot(qi, &w);
                for (t, s) in w.iter_mut().zip(qi) {
                    *t -= h * s;
                }
            }
        }
        let wn = norm(&w);
        if wn > 1e-12 * norm(v) {
            q.push(w.iter().map(|t| t / wn).collect());
        }
    }
    q
}

/// Upper bound on the sine of the largest principal angle between two
/// subspaces of equal dimension: `‖(Id − Π_B) Q_A‖_F`.
pub fn subspace_gap(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let qa = orthonormal(a);
    let qb = orthonormal(b);
    assert_eq!(qa.len(), qb.len(), "subspace dimensions differ");
    let mut f = 0.0;
    for v in &qa {
        let mut w = v.clone();
        for _ in 0..2 {
            for u in &qb {
                let h = dot(u, &w);
                for (t, s) in w.iter_mut().zip(u) {
                    *t -= h * s;
                }
            }
        }
        f += dot(&w, &w);
    }
    f.sqrt()
}

/// Orthonormal basis of `span{P⁻¹r, (P⁻¹A)P⁻¹r, …}` with `k` vectors.
pub fn krylov(a: &dyn LinearOperator, p: &Preconditioner, r: &[f64], k: usize) -> Vec<Vec<f64>> {
    let mut v = p.apply(r).unwrap();
    let mut q: Vec<Vec<f64>> = Vec::new();
    for _ in 0..k {
        let next = orthonormal(&[q.clone(), vec![v.clone()]].concat());
        if next.len() == q.len() {
            break;
        }
        q = next;
        v = p.apply(&a.mul(q.last().unwrap())).unwrap();
    }
    q
}

/// Dense `Q = Z (YᵀAZ)⁻¹ YᵀA`.
pub fn oblique_projector(a: &[Vec<f64>], z: &[Vec<f64>], y: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let az: Vec<Vec<f64>> = z.iter().map(|zc| matvec(a, zc)).collect();
    let g: Vec<Vec<f64>> = y
        .iter()
        .map(|yi| az.iter().map(|c| dot(yi, c)).collect())
        .collect();
    let ginv = inverse(&g);
    let at = transpose(a);
    let ya: Vec<Vec<f64>> = y.iter().map(|yi| matvec(&at, yi)).collect();
    let coef = matmul(&ginv, &ya);
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| z.iter().zip(&coef).map(|(zc, row)| zc[i] * row[j]).sum())
                .collect()
        })
        .collect()
}

pub fn line(criterion: usize, pass: bool, detail: &str) {
    println!(
        "criterion {criterion:>2}: {} {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
}
