use super::{axpy, check_len, dot, norm2, singular_values, DenseMatrix};
use crate::error::{DfpiError, Result};

/// Output of [`mgs_orthonormalize`].
#[derive(Clone, Debug, PartialEq)]
pub struct Orthonormalized {
    pub basis: Vec<Vec<f64>>,
    /// Input positions whose residual fell below the drop tolerance.
    pub dropped: Vec<usize>,
}

/// Orthogonalizes `v` against the orthonormal `basis` with two MGS passes.
///
/// Returns the residual and the accumulated projection coefficients.
pub fn orthogonalize_against(basis: &[Vec<f64>], v: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut w = v.to_vec();
    let mut coeffs = vec![0.0; basis.len()];
    for _pass in 0..2 {
        for (q, c) in basis.iter().zip(coeffs.iter_mut()) {
            let h = dot(q, &w);
            axpy(-h, q, &mut w);
            *c += h;
        }
    }
    (w, coeffs)
}

/// Modified Gram-Schmidt with one re-orthogonalization pass.
///
/// A vector is dropped when its residual norm after projection is at most
/// `drop_tol` times its original norm; zero vectors are always dropped.
pub fn mgs_orthonormalize(vectors: &[Vec<f64>], drop_tol: f64) -> Result<Orthonormalized> {
    let n = vectors
        .first()
        .map(|v| v.len())
        .ok_or_else(|| DfpiError::InvalidInput("no vectors to orthonormalize".into()))?;
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut dropped = Vec::new();
    for (k, v) in vectors.iter().enumerate() {
        check_len(n, v.len())?;
        let original = norm2(v);
        if original == 0.0 {
            dropped.push(k);
            continue;
        }
        let (w, _) = orthogonalize_against(&basis, v);
        let r = norm2(&w);
        if r <= drop_tol * original {
            dropped.push(k);
            continue;
        }
        basis.push(w.iter().map(|x| x / r).collect());
    }
    Ok(Orthonormalized { basis, dropped })
}

/// Principal angles (radians, ascending) between the spans of two
/// orthonormal families.
///
/// Cosines come from `σ(AᵀB)` and sines from `σ((I − AAᵀ)B)`, combined with
/// `atan2` so that tiny angles keep full relative accuracy.
pub fn principal_angles(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<f64> {
    // the larger family plays the role of A
    let (a, b) = if a.len() >= b.len() { (a, b) } else { (b, a) };
    if b.is_empty() {
        return Vec::new();
    }
    let n = b[0].len();
    let cross = DenseMatrix::from_fn(a.len(), b.len(), |i, j| dot(&a[i], &b[j]));
    let mut cosines = singular_values(&cross);
    cosines.truncate(b.len());
    let residuals: Vec<Vec<f64>> = b.iter().map(|v| orthogonalize_against(a, v).0).collect();
    let mut sines = singular_values(&DenseMatrix::from_columns(n, &residuals));
    sines.truncate(b.len());
    sines.reverse();
    let mut angles: Vec<f64> = cosines
        .iter()
        .zip(&sines)
        .map(|(c, s)| s.atan2(*c))
        .collect();
    angles.sort_by(|x, y| x.partial_cmp(y).unwrap());
    angles
}
