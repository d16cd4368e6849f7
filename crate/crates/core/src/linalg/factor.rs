use super::{check_len, svd, DenseMatrix};
use crate::error::{DfpiError, Result};

/// Relative pivot threshold used to declare numerical rank.
pub const RANK_TOL: f64 = 1e-12;

/// Householder QR with column pivoting of a small square matrix.
///
/// This is the factorization of the `M × M` projection core `YᵀAZ`.
#[derive(Clone, Debug)]
pub struct SmallFactor {
    n: usize,
    /// R in the upper triangle, Householder vectors below it.
    qr: DenseMatrix,
    tau: Vec<f64>,
    /// Column `k` of `R` corresponds to column `perm[k]` of the input.
    perm: Vec<usize>,
    rank: usize,
    original: DenseMatrix,
}

/// Factors a square matrix; rank deficiency is recorded, not raised.
pub fn factor_small(g: &DenseMatrix) -> Result<SmallFactor> {
    if !g.is_square() {
        return Err(DfpiError::InvalidMatrix(format!(
            "projection core must be square, got {}x{}",
            g.rows(),
            g.cols()
        )));
    }
    if !g.data().iter().all(|v| v.is_finite()) {
        return Err(DfpiError::NonFinite);
    }
    let n = g.rows();
    let mut qr = g.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut tau = vec![0.0; n];

    for k in 0..n {
        // pivot: remaining column with the largest norm
        let mut best = k;
        let mut best_norm = -1.0;
        for j in k..n {
            let s: f64 = (k..n).map(|i| qr[(i, j)] * qr[(i, j)]).sum();
            if s > best_norm {
                best_norm = s;
                best = j;
            }
        }
        if best != k {
            for i in 0..n {
                let t = qr[(i, k)];
                qr[(i, k)] = qr[(i, best)];
                qr[(i, best)] = t;
            }
            perm.swap(k, best);
        }
        let alpha = best_norm.sqrt();
        if alpha == 0.0 {
            tau[k] = 0.0;
            continue;
        }
        let beta = if qr[(k, k)] > 0.0 { -alpha } else { alpha };
        // v = x - beta e1, stored with v[0] = 1
        let v0 = qr[(k, k)] - beta;
        tau[k] = -v0 / beta;
        for i in k + 1..n {
            qr[(i, k)] /= v0;
        }
        qr[(k, k)] = beta;
        for j in k + 1..n {
            let mut s = qr[(k, j)];
            for i in k + 1..n {
                s += qr[(i, k)] * qr[(i, j)];
            }
            s *= tau[k];
            qr[(k, j)] -= s;
            for i in k + 1..n {
                let vik = qr[(i, k)];
                qr[(i, j)] -= s * vik;
            }
        }
    }

    let lead = if n > 0 { qr[(0, 0)].abs() } else { 0.0 };
    let rank = (0..n)
        .take_while(|&k| lead > 0.0 && qr[(k, k)].abs() > RANK_TOL * lead)
        .count();
    Ok(SmallFactor {
        n,
        qr,
        tau,
        perm,
        rank,
        original: g.clone(),
    })
}

impl SmallFactor {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn is_deficient(&self) -> bool {
        self.rank < self.n
    }

    /// Positions (in the factored matrix) of the columns the pivoting ranked
    /// below the numerical rank.
    pub fn deficient_columns(&self) -> Vec<usize> {
        self.perm[self.rank..].to_vec()
    }

    /// Solves `G x = rhs`, refusing rank-deficient factors.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n, rhs.len())?;
        if self.is_deficient() {
            return Err(DfpiError::RankDeficient {
                rank: self.rank,
                dim: self.n,
            });
        }
        let n = self.n;
        let mut y = rhs.to_vec();
        // y = Qᵀ rhs
        for k in 0..n {
            let mut s = y[k];
            for i in k + 1..n {
                s += self.qr[(i, k)] * y[i];
            }
            s *= self.tau[k];
            y[k] -= s;
            for i in k + 1..n {
                y[i] -= s * self.qr[(i, k)];
            }
        }
        // R w = y
        for k in (0..n).rev() {
            let mut s = y[k];
            for j in k + 1..n {
                s -= self.qr[(k, j)] * y[j];
            }
            y[k] = s / self.qr[(k, k)];
        }
        let mut x = vec![0.0; n];
        for (k, &p) in self.perm.iter().enumerate() {
            x[p] = y[k];
        }
        Ok(x)
    }

    /// Minimum-norm least-squares solution, valid for any rank.
    pub fn solve_least_squares(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n, rhs.len())?;
        let d = svd(&self.original);
        let tol = RANK_TOL * d.singular_values.first().copied().unwrap_or(0.0);
        let mut x = vec![0.0; self.n];
        for (k, &sigma) in d.singular_values.iter().enumerate() {
            if sigma <= tol {
                break;
            }
            let coeff: f64 = (0..self.n).map(|i| d.u[(i, k)] * rhs[i]).sum::<f64>() / sigma;
            for (i, xi) in x.iter_mut().enumerate() {
                *xi += coeff * d.v[(i, k)];
            }
        }
        Ok(x)
    }
}

/// Free-function form of [`SmallFactor::solve`].
pub fn solve_small(f: &SmallFactor, rhs: &[f64]) -> Result<Vec<f64>> {
    f.solve(rhs)
}

/// Dense solve by Gaussian elimination with partial pivoting.
pub fn lu_solve(a: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    if !a.is_square() {
        return Err(DfpiError::InvalidMatrix(
            "lu_solve needs a square matrix".into(),
        ));
    }
    let n = a.rows();
    check_len(n, b.len())?;
    let mut m = a.clone();
    let mut x = b.to_vec();
    let scale = m.data().iter().fold(0.0f64, |s, v| s.max(v.abs()));
    for k in 0..n {
        let p = (k..n)
            .max_by(|&i, &j| m[(i, k)].abs().partial_cmp(&m[(j, k)].abs()).unwrap())
            .unwrap();
        if m[(p, k)].abs() <= f64::EPSILON * scale * n as f64 {
            return Err(DfpiError::RankDeficient { rank: k, dim: n });
        }
        if p != k {
            for j in 0..n {
                let t = m[(k, j)];
                m[(k, j)] = m[(p, j)];
                m[(p, j)] = t;
            }
            x.swap(k, p);
        }
        for i in k + 1..n {
            let f = m[(i, k)] / m[(k, k)];
            if f == 0.0 {
                continue;
            }
            for j in k..n {
                let mkj = m[(k, j)];
                m[(i, j)] -= f * mkj;
            }
            x[i] -= f * x[k];
        }
    }
    for k in (0..n).rev() {
        let mut s = x[k];
        for j in k + 1..n {
            s -= m[(k, j)] * x[j];
        }
        x[k] = s / m[(k, k)];
    }
    Ok(x)
}
