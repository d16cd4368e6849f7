use std::ops::{Index, IndexMut};

use num_complex::Complex64;

use super::DenseMatrix;
use crate::error::{DfpiError, Result};

/// Largest dimension accepted by [`dense_eig`].
pub const MAX_EIG_DIM: usize = 300;

/// Eigenvalues (and optionally unit-norm eigenvectors) of a real matrix.
#[derive(Clone, Debug)]
pub struct Eigendecomposition {
    pub values: Vec<Complex64>,
    /// `vectors[k]` pairs with `values[k]`.
    pub vectors: Option<Vec<Vec<Complex64>>>,
    /// False for values left on the diagonal after the iteration cap.
    pub converged: Vec<bool>,
}

impl Eigendecomposition {
    pub fn all_converged(&self) -> bool {
        self.converged.iter().all(|&c| c)
    }
}

// square work array indexed with signed subscripts, as the QR sweep does
struct Work {
    n: usize,
    d: Vec<f64>,
}

impl Work {
    fn from_dense(a: &DenseMatrix) -> Self {
        Self {
            n: a.rows(),
            d: a.data().to_vec(),
        }
    }

    fn identity(n: usize) -> Self {
        let mut w = Self {
            n,
            d: vec![0.0; n * n],
        };
        for i in 0..n {
            w.d[i * n + i] = 1.0;
        }
        w
    }
}

impl Index<(isize, isize)> for Work {
    type Output = f64;
    fn index(&self, (i, j): (isize, isize)) -> &f64 {
        &self.d[i as usize * self.n + j as usize]
    }
}

impl IndexMut<(isize, isize)> for Work {
    fn index_mut(&mut self, (i, j): (isize, isize)) -> &mut f64 {
        &mut self.d[i as usize * self.n + j as usize]
    }
}

fn cdiv(xr: f64, xi: f64, yr: f64, yi: f64) -> (f64, f64) {
    let q = Complex64::new(xr, xi) / Complex64::new(yr, yi);
    (q.re, q.im)
}

/// Eigen-decomposition of a dense real matrix of dimension at most 300.
///
/// Complex eigenvalues come in conjugate pairs with conjugate vectors.
pub fn dense_eig(a: &DenseMatrix, want_vectors: bool) -> Result<Eigendecomposition> {
    if !a.is_square() {
        return Err(DfpiError::InvalidMatrix(
            "eigenvalues of a non-square matrix".into(),
        ));
    }
    if a.rows() > MAX_EIG_DIM {
        return Err(DfpiError::InvalidInput(format!(
            "dense eigensolver limited to dimension {MAX_EIG_DIM}, got {}",
            a.rows()
        )));
    }
    if !a.data().iter().all(|v| v.is_finite()) {
        return Err(DfpiError::NonFinite);
    }
    let nn = a.rows();
    let mut h = Work::from_dense(a);
    let mut v = Work::identity(nn);
    orthes(&mut h, &mut v);
    let mut d = vec![0.0; nn];
    let mut e = vec![0.0; nn];
    let converged = hqr2(&mut h, &mut v, &mut d, &mut e, want_vectors);

    let values: Vec<Complex64> = d
        .iter()
        .zip(&e)
        .map(|(re, im)| Complex64::new(*re, *im))
        .collect();
    let all_ok = converged.iter().all(|&c| c);
    let vectors = if want_vectors && all_ok {
        let mut out = Vec::with_capacity(nn);
        let mut j = 0;
        while j < nn {
            if e[j] == 0.0 {
                out.push(normalize(
                    (0..nn)
                        .map(|i| Complex64::new(v[(i as isize, j as isize)], 0.0))
                        .collect(),
                ));
                j += 1;
            } else {
                // columns j, j+1 hold the real and imaginary parts for d[j] + i e[j], e[j] > 0
                let z: Vec<Complex64> = (0..nn)
                    .map(|i| {
                        Complex64::new(v[(i as isize, j as isize)], v[(i as isize, j as isize + 1)])
                    })
                    .collect();
                let z = normalize(z);
                let conj = z.iter().map(|c| c.conj()).collect();
                out.push(z);
                out.push(conj);
                j += 2;
            }
        }
        Some(out)
    } else {
        None
    };
    Ok(Eigendecomposition {
        values,
        vectors,
        converged,
    })
}

fn normalize(mut z: Vec<Complex64>) -> Vec<Complex64> {
    let s = z.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    if s > 0.0 {
        z.iter_mut().for_each(|c| *c /= s);
    }
    z
}

// Householder reduction to upper Hessenberg form, accumulating the transform.
fn orthes(h: &mut Work, v: &mut Work) {
    let n = h.n as isize;
    if n < 3 {
        return;
    }
    let (low, high) = (0isize, n - 1);
    let mut ort = vec![0.0; n as usize];
    for m in low + 1..high {
        let scale: f64 = (m..=high).map(|i| h[(i, m - 1)].abs()).sum();
        if scale == 0.0 {
            continue;
        }
        let mut hh = 0.0;
        for i in (m..=high).rev() {
            ort[i as usize] = h[(i, m - 1)] / scale;
            hh += ort[i as usize] * ort[i as usize];
        }
        let mut g = hh.sqrt();
        if ort[m as usize] > 0.0 {
            g = -g;
        }
        hh -= ort[m as usize] * g;
        ort[m as usize] -= g;
        for j in m..n {
            let mut f = 0.0;
            for i in (m..=high).rev() {
                f += ort[i as usize] * h[(i, j)];
            }
            f /= hh;
            for i in m..=high {
                h[(i, j)] -= f * ort[i as usize];
            }
        }
        for i in 0..=high {
            let mut f = 0.0;
            for j in (m..=high).rev() {
                f += ort[j as usize] * h[(i, j)];
            }
            f /= hh;
            for j in m..=high {
                h[(i, j)] -= f * ort[j as usize];
            }
        }
        ort[m as usize] *= scale;
        h[(m, m - 1)] = scale * g;
    }
    for m in (low + 1..high).rev() {
        if h[(m, m - 1)] == 0.0 {
            continue;
        }
        for i in m + 1..=high {
            ort[i as usize] = h[(i, m - 1)];
        }
        for j in m..=high {
            let mut g = 0.0;
            for i in m..=high {
                g += ort[i as usize] * v[(i, j)];
            }
            g = (g / ort[m as usize]) / h[(m, m - 1)];
            for i in m..=high {
                v[(i, j)] += g * ort[i as usize];
            }
        }
    }
}

// Shifted QR on the Hessenberg matrix, then back-substitution for the
// eigenvectors of the quasi-triangular form. Returns per-value convergence.
fn hqr2(h: &mut Work, v: &mut Work, d: &mut [f64], e: &mut [f64], want_vectors: bool) -> Vec<bool> {
    let nn = h.n as isize;
    let mut converged = vec![true; nn as usize];
    if nn == 0 {
        return converged;
    }
    let mut n = nn - 1;
    let low = 0isize;
    let high = nn - 1;
    let eps = f64::EPSILON;
    let mut exshift = 0.0;
    let (mut p, mut q, mut r, mut s, mut z) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let (mut t, mut w, mut x, mut y);

    let mut norm = 0.0;
    for i in 0..nn {
        for j in (i - 1).max(0)..nn {
            norm += h[(i, j)].abs();
        }
    }

    let mut iter = 0usize;
    let mut total = 0usize;
    let budget = 60 * nn as usize + 100;
    while n >= low {
        let mut l = n;
        while l > low {
            s = h[(l - 1, l - 1)].abs() + h[(l, l)].abs();
            if s == 0.0 {
                s = norm;
            }
            if h[(l, l - 1)].abs() < eps * s {
                break;
            }
            l -= 1;
        }

        if l == n {
            h[(n, n)] += exshift;
            d[n as usize] = h[(n, n)];
            e[n as usize] = 0.0;
            n -= 1;
            iter = 0;
        } else if l == n - 1 {
            w = h[(n, n - 1)] * h[(n - 1, n)];
            p = (h[(n - 1, n - 1)] - h[(n, n)]) / 2.0;
            q = p * p + w;
            z = q.abs().sqrt();
            h[(n, n)] += exshift;
            h[(n - 1, n - 1)] += exshift;
            x = h[(n, n)];
            if q >= 0.0 {
                z = if p >= 0.0 { p + z } else { p - z };
                d[(n - 1) as usize] = x + z;
                d[n as usize] = d[(n - 1) as usize];
                if z != 0.0 {
                    d[n as usize] = x - w / z;
                }
                e[(n - 1) as usize] = 0.0;
                e[n as usize] = 0.0;
                x = h[(n, n - 1)];
                s = x.abs() + z.abs();
                p = x / s;
                q = z / s;
                r = (p * p + q * q).sqrt();
                p /= r;
                q /= r;
                for j in n - 1..nn {
                    z = h[(n - 1, j)];
                    h[(n - 1, j)] = q * z + p * h[(n, j)];
                    h[(n, j)] = q * h[(n, j)] - p * z;
                }
                for i in 0..=n {
                    z = h[(i, n - 1)];
                    h[(i, n - 1)] = q * z + p * h[(i, n)];
                    h[(i, n)] = q * h[(i, n)] - p * z;
                }
                for i in low..=high {
                    z = v[(i, n - 1)];
                    v[(i, n - 1)] = q * z + p * v[(i, n)];
                    v[(i, n)] = q * v[(i, n)] - p * z;
                }
            } else {
                d[(n - 1) as usize] = x + p;
                d[n as usize] = x + p;
                e[(n - 1) as usize] = z;
                e[n as usize] = -z;
            }
            n -= 2;
            iter = 0;
        } else {
            total += 1;
            if total > budget {
                for k in 0..=n {
                    d[k as usize] = h[(k, k)] + exshift;
                    e[k as usize] = 0.0;
                    converged[k as usize] = false;
                }
                return converged;
            }
            x = h[(n, n)];
            y = 0.0;
            w = 0.0;
            if l < n {
                y = h[(n - 1, n - 1)];
                w = h[(n, n - 1)] * h[(n - 1, n)];
            }
            // exceptional shifts
            if iter == 10 {
                exshift += x;
                for i in low..=n {
                    h[(i, i)] -= x;
                }
                s = h[(n, n - 1)].abs() + h[(n - 1, n - 2)].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            if iter == 30 {
                s = (y - x) / 2.0;
                s = s * s + w;
                if s > 0.0 {
                    s = s.sqrt();
                    if y < x {
                        s = -s;
                    }
                    s = x - w / ((y - x) / 2.0 + s);
                    for i in low..=n {
                        h[(i, i)] -= s;
                    }
                    exshift += s;
                    x = 0.964;
                    y = x;
                    w = x;
                }
            }
            iter += 1;

            let mut m = n - 2;
            while m >= l {
                z = h[(m, m)];
                r = x - z;
                s = y - z;
                p = (r * s - w) / h[(m + 1, m)] + h[(m, m + 1)];
                q = h[(m + 1, m + 1)] - z - r - s;
                r = h[(m + 2, m + 1)];
                s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                if h[(m, m - 1)].abs() * (q.abs() + r.abs())
                    < eps
                        * (p.abs() * (h[(m - 1, m - 1)].abs() + z.abs() + h[(m + 1, m + 1)].abs()))
                {
                    break;
                }
                m -= 1;
            }
            for i in m + 2..=n {
                h[(i, i - 2)] = 0.0;
                if i > m + 2 {
                    h[(i, i - 3)] = 0.0;
                }
            }

            // double QR step on rows l..n, columns m..n
            let mut k = m;
            while k < n {
                let notlast = k != n - 1;
                if k != m {
                    p = h[(k, k - 1)];
                    q = h[(k + 1, k - 1)];
                    r = if notlast { h[(k + 2, k - 1)] } else { 0.0 };
                    x = p.abs() + q.abs() + r.abs();
                    if x == 0.0 {
                        k += 1;
                        continue;
                    }
                    p /= x;
                    q /= x;
                    r /= x;
                }
                s = (p * p + q * q + r * r).sqrt();
                if p < 0.0 {
                    s = -s;
                }
                if s != 0.0 {
                    if k != m {
                        h[(k, k - 1)] = -s * x;
                    } else if l != m {
                        h[(k, k - 1)] = -h[(k, k - 1)];
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    z = r / s;
                    q /= p;
                    r /= p;
                    for j in k..nn {
                        p = h[(k, j)] + q * h[(k + 1, j)];
                        if notlast {
                            p += r * h[(k + 2, j)];
                            h[(k + 2, j)] -= p * z;
                        }
                        h[(k, j)] -= p * x;
                        h[(k + 1, j)] -= p * y;
                    }
                    for i in 0..=n.min(k + 3) {
                        p = x * h[(i, k)] + y * h[(i, k + 1)];
                        if notlast {
                            p += z * h[(i, k + 2)];
                            h[(i, k + 2)] -= p * r;
                        }
                        h[(i, k)] -= p;
                        h[(i, k + 1)] -= p * q;
                    }
                    for i in low..=high {
                        p = x * v[(i, k)] + y * v[(i, k + 1)];
                        if notlast {
                            p += z * v[(i, k + 2)];
                            v[(i, k + 2)] -= p * r;
                        }
                        v[(i, k)] -= p;
                        v[(i, k + 1)] -= p * q;
                    }
                }
                k += 1;
            }
        }
    }

    if !want_vectors || norm == 0.0 {
        return converged;
    }

    // back-substitute in the quasi-triangular form
    for n in (0..nn).rev() {
        p = d[n as usize];
        q = e[n as usize];
        if q == 0.0 {
            let mut l = n;
            h[(n, n)] = 1.0;
            for i in (0..n).rev() {
                w = h[(i, i)] - p;
                r = 0.0;
                for j in l..=n {
                    r += h[(i, j)] * h[(j, n)];
                }
                if e[i as usize] < 0.0 {
                    z = w;
                    s = r;
                } else {
                    l = i;
                    if e[i as usize] == 0.0 {
                        h[(i, n)] = if w != 0.0 { -r / w } else { -r / (eps * norm) };
                    } else {
                        x = h[(i, i + 1)];
                        y = h[(i + 1, i)];
                        let di = d[i as usize] - p;
                        q = di * di + e[i as usize] * e[i as usize];
                        t = (x * s - z * r) / q;
                        h[(i, n)] = t;
                        h[(i + 1, n)] = if x.abs() > z.abs() {
                            (-r - w * t) / x
                        } else {
                            (-s - y * t) / z
                        };
                    }
                    t = h[(i, n)].abs();
                    if (eps * t) * t > 1.0 {
                        for j in i..=n {
                            h[(j, n)] /= t;
                        }
                    }
                }
            }
        } else if q < 0.0 {
            let mut l = n - 1;
            if h[(n, n - 1)].abs() > h[(n - 1, n)].abs() {
                h[(n - 1, n - 1)] = q / h[(n, n - 1)];
                h[(n - 1, n)] = -(h[(n, n)] - p) / h[(n, n - 1)];
            } else {
                let (cr, ci) = cdiv(0.0, -h[(n - 1, n)], h[(n - 1, n - 1)] - p, q);
                h[(n - 1, n - 1)] = cr;
                h[(n - 1, n)] = ci;
            }
            h[(n, n - 1)] = 0.0;
            h[(n, n)] = 1.0;
            for i in (0..n - 1).rev() {
                let mut ra = 0.0;
                let mut sa = 0.0;
                for j in l..=n {
                    ra += h[(i, j)] * h[(j, n - 1)];
                    sa += h[(i, j)] * h[(j, n)];
                }
                w = h[(i, i)] - p;
                if e[i as usize] < 0.0 {
                    z = w;
                    r = ra;
                    s = sa;
                } else {
                    l = i;
                    if e[i as usize] == 0.0 {
                        let (cr, ci) = cdiv(-ra, -sa, w, q);
                        h[(i, n - 1)] = cr;
                        h[(i, n)] = ci;
                    } else {
                        x = h[(i, i + 1)];
                        y = h[(i + 1, i)];
                        let di = d[i as usize] - p;
                        let mut vr = di * di + e[i as usize] * e[i as usize] - q * q;
                        let vi = di * 2.0 * q;
                        if vr == 0.0 && vi == 0.0 {
                            vr = eps * norm * (w.abs() + q.abs() + x.abs() + y.abs() + z.abs());
                        }
                        let (cr, ci) =
                            cdiv(x * r - z * ra + q * sa, x * s - z * sa - q * ra, vr, vi);
                        h[(i, n - 1)] = cr;
                        h[(i, n)] = ci;
                        if x.abs() > z.abs() + q.abs() {
                            h[(i + 1, n - 1)] = (-ra - w * h[(i, n - 1)] + q * h[(i, n)]) / x;
                            h[(i + 1, n)] = (-sa - w * h[(i, n)] - q * h[(i, n - 1)]) / x;
                        } else {
                            let (cr, ci) = cdiv(-r - y * h[(i, n - 1)], -s - y * h[(i, n)], z, q);
                            h[(i + 1, n - 1)] = cr;
                            h[(i + 1, n)] = ci;
                        }
                    }
                    t = h[(i, n - 1)].abs().max(h[(i, n)].abs());
                    if (eps * t) * t > 1.0 {
                        for j in i..=n {
                            h[(j, n - 1)] /= t;
                            h[(j, n)] /= t;
                        }
                    }
                }
            }
        }
    }

    // back to the original basis
    for j in (low..nn).rev() {
        for i in low..=high {
            z = 0.0;
            for k in low..=j.min(high) {
                z += v[(i, k)] * h[(k, j)];
            }
            v[(i, j)] = z;
        }
    }
    converged
}
