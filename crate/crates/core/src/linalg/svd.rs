use super::DenseMatrix;

/// Thin singular value decomposition `A = U Σ Vᵀ` of an `m × n` matrix.
#[derive(Clone, Debug)]
pub struct Svd {
    /// Descending.
    pub singular_values: Vec<f64>,
    /// `m × k` left singular vectors, `k = min(m, n)`.
    pub u: DenseMatrix,
    /// `n × n` right singular vectors, ordered like `singular_values` (any
    /// trailing columns span the remaining null space).
    pub v: DenseMatrix,
}

/// One-sided (Hestenes) Jacobi SVD.
///
/// Wide matrices are padded with zero rows, so `v` is always square.
pub fn svd(a: &DenseMatrix) -> Svd {
    let (m0, n) = (a.rows(), a.cols());
    let m = m0.max(n);
    // columns of the working matrix
    let mut cols: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut c = a.column(j);
            c.resize(m, 0.0);
            c
        })
        .collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            e
        })
        .collect();

    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha: f64 = cols[p].iter().map(|x| x * x).sum();
                let beta: f64 = cols[q].iter().map(|x| x * x).sum();
                let gamma: f64 = cols[p].iter().zip(&cols[q]).map(|(x, y)| x * y).sum();
                if gamma == 0.0 || gamma.abs() <= 1e-15 * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (lo, hi) = cols.split_at_mut(q);
                for (x, y) in lo[p].iter_mut().zip(hi[0].iter_mut()) {
                    let (xp, yq) = (*x, *y);
                    *x = c * xp - s * yq;
                    *y = s * xp + c * yq;
                }
                let (lo, hi) = v.split_at_mut(q);
                for (x, y) in lo[p].iter_mut().zip(hi[0].iter_mut()) {
                    let (xp, yq) = (*x, *y);
                    *x = c * xp - s * yq;
                    *y = s * xp + c * yq;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<f64> = cols.iter().map(|c| super::norm2(c)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).unwrap());
    let k = m0.min(n);
    let singular_values: Vec<f64> = order.iter().take(k).map(|&j| norms[j]).collect();
    let u = DenseMatrix::from_fn(m0, k, |i, c| {
        let j = order[c];
        if norms[j] > 0.0 {
            cols[j][i] / norms[j]
        } else {
            0.0
        }
    });
    let vm = DenseMatrix::from_fn(n, n, |i, c| v[order[c]][i]);
    Svd {
        singular_values,
        u,
        v: vm,
    }
}

/// Singular values, descending.
pub fn singular_values(a: &DenseMatrix) -> Vec<f64> {
    svd(a).singular_values
}

/// `σ_max / σ_min` (infinite for singular or empty input).
pub fn condition_number_2(a: &DenseMatrix) -> f64 {
    let s = singular_values(a);
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        _ => f64::INFINITY,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::LinearOperator;

    #[test]
    fn diagonal_singular_values() {
        let a = DenseMatrix::from_diagonal(&[-3.0, 0.5, 2.0]);
        let s = singular_values(&a);
        assert!(
            (s[0] - 3.0).abs() < 1e-15 && (s[1] - 2.0).abs() < 1e-15 && (s[2] - 0.5).abs() < 1e-15
        );
    }

    #[test]
    fn reconstructs_random_matrix() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let a = DenseMatrix::from_fn(7, 4, |_, _| rng.gen_range(-1.0..1.0));
        let d = svd(&a);
        let sigma = DenseMatrix::from_diagonal(&d.singular_values);
        let vt = DenseMatrix::from_fn(4, 4, |i, j| d.v[(j, i)]);
        let rec = d.u.matmul(&sigma).unwrap().matmul(&vt).unwrap();
        assert!(rec.sub(&a).unwrap().frobenius_norm() < 1e-13);
    }

    #[test]
    fn rank_one_null_vector() {
        let a = DenseMatrix::from_rows(&[[1.0, 2.0], [2.0, 4.0]]).unwrap();
        let d = svd(&a);
        assert!(d.singular_values[1] < 1e-15);
        let null = d.v.column(1);
        assert!(crate::linalg::norm2(&a.mul(&null)) < 1e-14);
    }

    #[test]
    fn wide_matrix() {
        let a = DenseMatrix::from_rows(&[[3.0, 0.0, 4.0]]).unwrap();
        let s = singular_values(&a);
        assert_eq!(s.len(), 1);
        assert!((s[0] - 5.0).abs() < 1e-14);
    }
}
