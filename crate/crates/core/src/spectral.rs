//! Dense spectral certification of the deflated iteration.

use std::fmt;

use num_complex::Complex64;

use crate::engine::{dfpi_solve, Deflation, SolveStatus, SolverOptions};
use crate::error::{DfpiError, Result};
use crate::linalg::{
    dense_eig, dot, factor_small, mgs_orthonormalize, norm2, orthogonalize_against,
    singular_values, svd, DenseMatrix, LinearOperator,
};
use crate::precond::Preconditioner;
use crate::problems::{gen_jordan, JordanSpec};
use crate::projector::{ProjectionMode, TroubleSpace};

/// Matching tolerance for the deflated spectrum identity.
pub const SPECTRUM_TOL: f64 = 1e-7;
/// Invariance defect under which the spectrum identity is asserted.
pub const INVARIANCE_TOL: f64 = 1e-10;

/// Test-space choice, including the dense-only orthogonal projector `Y = A⁻ᵀZ`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VerifyMode {
    Galerkin,
    LsqA,
    LsqPa,
    Orthogonal,
}

impl From<ProjectionMode> for VerifyMode {
    fn from(m: ProjectionMode) -> Self {
        match m {
            ProjectionMode::Galerkin => VerifyMode::Galerkin,
            ProjectionMode::LsqA => VerifyMode::LsqA,
            ProjectionMode::LsqPa => VerifyMode::LsqPa,
        }
    }
}

impl fmt::Display for VerifyMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VerifyMode::Galerkin => "galerkin",
            VerifyMode::LsqA => "lsq_a",
            VerifyMode::LsqPa => "lsq_pa",
            VerifyMode::Orthogonal => "orthogonal",
        })
    }
}

fn orthonormal(z: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    if z.is_empty() {
        return Ok(Vec::new());
    }
    Ok(mgs_orthonormalize(z, 1e-10)?.basis)
}

/// `‖(Id − Π_Z) B Q‖₂` for an orthonormal basis `Q` of `span(z)`.
pub fn invariance_measure_dense(b: &DenseMatrix, z: &[Vec<f64>]) -> f64 {
    let q = match orthonormal(z) {
        Ok(q) if !q.is_empty() => q,
        _ => return 0.0,
    };
    let n = b.rows();
    let cols: Vec<Vec<f64>> = q
        .iter()
        .map(|c| orthogonalize_against(&q, &b.mul(c)).0)
        .collect();
    DenseMatrix::from_columns(n, &cols).norm2()
}

/// `‖(Id − Π_Z) P⁻¹A Q‖₂`; zero iff `span(z)` is invariant under `P⁻¹A`.
pub fn invariance_measure(a: &DenseMatrix, p: &Preconditioner, z: &[Vec<f64>]) -> Result<f64> {
    Ok(invariance_measure_dense(&p.solve_dense(a)?, z))
}

/// Explicit projector and iteration matrices for one trouble space.
#[derive(Clone, Debug)]
pub struct DenseIteration {
    /// Orthonormal basis of `Z`.
    pub z: Vec<Vec<f64>>,
    /// Test basis.
    pub y: Vec<Vec<f64>>,
    pub q: DenseMatrix,
    pub n: DenseMatrix,
    pub id_minus_n: DenseMatrix,
    /// `P⁻¹A`.
    pub pa: DenseMatrix,
}

/// Builds `Q_R = Z(YᵀAZ)⁻¹YᵀA`, `N = Q_R + P⁻¹A(Id − Q_R)` and `Id − N` densely.
pub fn dense_iteration(
    a: &DenseMatrix,
    p: &Preconditioner,
    z: &[Vec<f64>],
    mode: VerifyMode,
) -> Result<DenseIteration> {
    if !a.is_square() {
        return Err(DfpiError::InvalidMatrix("operator must be square".into()));
    }
    let n = a.rows();
    if p.dim() != n {
        return Err(DfpiError::DimensionMismatch {
            expected: n,
            found: p.dim(),
        });
    }
    if let Some(v) = z.iter().find(|v| v.len() != n) {
        return Err(DfpiError::DimensionMismatch {
            expected: n,
            found: v.len(),
        });
    }
    let pa = p.solve_dense(a)?;
    let id = DenseMatrix::identity(n);
    let zq = orthonormal(z)?;
    if zq.is_empty() {
        let id_minus_n = id.sub(&pa)?;
        return Ok(DenseIteration {
            z: zq,
            y: Vec::new(),
            q: DenseMatrix::zeros(n, n),
            n: pa.clone(),
            id_minus_n,
            pa,
        });
    }
    let y: Vec<Vec<f64>> = match mode {
        VerifyMode::Galerkin => zq.clone(),
        VerifyMode::LsqA => zq.iter().map(|c| a.mul(c)).collect(),
        VerifyMode::LsqPa => zq
            .iter()
            .map(|c| p.apply_transpose(&pa.mul(c)))
            .collect::<Result<_>>()?,
        VerifyMode::Orthogonal => {
            let at_inv = a.transpose().inverse()?;
            zq.iter().map(|c| at_inv.mul(c)).collect()
        }
    };
    let m = zq.len();
    // rows of YᵀA, stored as the vectors Aᵀy
    let yta: Vec<Vec<f64>> = y.iter().map(|c| a.mul_transpose(c)).collect();
    let g = DenseMatrix::from_fn(m, m, |i, j| dot(&yta[i], &zq[j]));
    let f = factor_small(&g)?;
    if f.is_deficient() {
        return Err(DfpiError::RankDeficient {
            rank: f.rank(),
            dim: m,
        });
    }
    // Q = Z · G⁻¹ (YᵀA), one column of YᵀA at a time
    let mut q = DenseMatrix::zeros(n, n);
    for col in 0..n {
        let rhs: Vec<f64> = yta.iter().map(|r| r[col]).collect();
        let c = f.solve(&rhs)?;
        for (zk, ck) in zq.iter().zip(&c) {
            for i in 0..n {
                q[(i, col)] += ck * zk[i];
            }
        }
    }
    let nmat = q.add(&pa.matmul(&id.sub(&q)?)?)?;
    let id_minus_n = id.sub(&nmat)?;
    Ok(DenseIteration {
        z: zq,
        y,
        q,
        n: nmat,
        id_minus_n,
        pa,
    })
}

/// Symmetric Hausdorff distance between two finite sets in the complex plane.
pub fn hausdorff(a: &[Complex64], b: &[Complex64]) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 0.0;
    }
    if a.is_empty() || b.is_empty() {
        return f64::INFINITY;
    }
    let one_way = |x: &[Complex64], y: &[Complex64]| {
        x.iter()
            .map(|u| {
                y.iter()
                    .map(|v| (u - v).norm())
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    };
    one_way(a, b).max(one_way(b, a))
}

/// Multiset distance: repeatedly pairs the globally closest remaining values
/// and returns the largest paired distance (infinite if sizes differ).
pub fn greedy_match_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let mut used_a = vec![false; a.len()];
    let mut used_b = vec![false; b.len()];
    let mut worst: f64 = 0.0;
    for _ in 0..a.len() {
        let mut best = (f64::INFINITY, 0, 0);
        for (i, u) in a.iter().enumerate().filter(|(i, _)| !used_a[*i]) {
            for (j, v) in b.iter().enumerate().filter(|(j, _)| !used_b[*j]) {
                let d = (u - v).norm();
                if d < best.0 {
                    best = (d, i, j);
                }
            }
        }
        used_a[best.1] = true;
        used_b[best.2] = true;
        worst = worst.max(best.0);
    }
    worst
}

/// Removes from `values` the entries greedily closest to each of `remove`.
fn remove_closest(values: &[Complex64], remove: &[Complex64]) -> Vec<Complex64> {
    let mut left: Vec<Complex64> = values.to_vec();
    for r in remove {
        if let Some((k, _)) = left
            .iter()
            .enumerate()
            .min_by(|x, y| (x.1 - r).norm().total_cmp(&(y.1 - r).norm()))
        {
            left.swap_remove(k);
        }
    }
    left
}

fn spectral_radius(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn sv_ratio(m: &DenseMatrix) -> f64 {
    let s = singular_values(m);
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if hi > 0.0 => lo / hi,
        (Some(_), Some(_)) => 0.0,
        _ => 1.0,
    }
}

/// Spectra of `M = P⁻¹A`, `N` and `Id − N`, with the deflation diagnostics.
#[derive(Clone, Debug)]
pub struct SpectralReport {
    pub mode: VerifyMode,
    pub spectrum_m: Vec<Complex64>,
    pub spectrum_n: Vec<Complex64>,
    pub spectrum_id_minus_n: Vec<Complex64>,
    /// `{0}^dim(Z)` together with the non-deflated eigenvalues of `Id − P⁻¹A`.
    pub predicted: Vec<Complex64>,
    pub deflated_count: usize,
    /// Largest modulus among the non-deflated eigenvalues of `Id − P⁻¹A`.
    pub max_nondeflated_modulus: f64,
    pub invariance_defect: f64,
    /// `Z` invariant under `P⁻¹A` (first sufficient condition for `N` nonsingular).
    pub invariant: bool,
    /// `YᵀPZ` nonsingular (second sufficient condition).
    pub core_nonsingular: bool,
    /// `σ_min(N) / σ_max(N)`.
    pub n_sv_ratio: f64,
    pub hausdorff: f64,
    pub matching_distance: f64,
    /// `Some(pass)` when the invariance defect allows the identity to be asserted.
    pub identity_holds: Option<bool>,
    pub eig_converged: bool,
}

impl SpectralReport {
    /// Passes when the identity was checked and holds, or was not applicable.
    pub fn pass(&self) -> bool {
        self.eig_converged && self.identity_holds.unwrap_or(true)
    }
}

/// Compares `Sp(Id − N)` with `{0}^dim(Z) ∪` the non-deflated part of `Sp(Id − P⁻¹A)`.
pub fn spectrum_comparison(
    a: &DenseMatrix,
    p: &Preconditioner,
    z: &[Vec<f64>],
    mode: VerifyMode,
) -> Result<SpectralReport> {
    let it = dense_iteration(a, p, z, mode)?;
    let n = a.rows();
    let em = dense_eig(&it.pa, false)?;
    let en = dense_eig(&it.n, false)?;
    let eid = dense_eig(&it.id_minus_n, false)?;
    let eig_converged = em.all_converged() && en.all_converged() && eid.all_converged();

    let m = it.z.len();
    let one = Complex64::new(1.0, 0.0);
    let id_minus_m: Vec<Complex64> = em.values.iter().map(|l| one - l).collect();
    // eigenvalues of Id − P⁻¹A carried by Z (meaningful when Z is invariant)
    let restricted = DenseMatrix::from_fn(m, m, |i, j| {
        let col = it.pa.mul(&it.z[j]);
        let e = if i == j { 1.0 } else { 0.0 };
        e - dot(&it.z[i], &col)
    });
    let deflated = if m > 0 {
        dense_eig(&restricted, false)?.values
    } else {
        Vec::new()
    };
    let kept = remove_closest(&id_minus_m, &deflated);
    let max_nondeflated_modulus = spectral_radius(&kept);
    let mut predicted = vec![Complex64::new(0.0, 0.0); m];
    predicted.extend_from_slice(&kept);

    let invariance_defect = invariance_measure_dense(&it.pa, &it.z);
    let scale = it.pa.norm2().max(1.0);
    let invariant = invariance_defect <= INVARIANCE_TOL * scale;

    let core_nonsingular = if m == 0 {
        true
    } else {
        let pz: Vec<Vec<f64>> =
            it.z.iter()
                .map(|c| p.apply_forward(c))
                .collect::<Result<_>>()?;
        sv_ratio(&DenseMatrix::from_fn(m, m, |i, j| dot(&it.y[i], &pz[j]))) > 1e-12
    };
    let n_sv_ratio = sv_ratio(&it.n);

    let hd = hausdorff(&predicted, &eid.values);
    let md = greedy_match_distance(&predicted, &eid.values);
    let tol = SPECTRUM_TOL * it.pa.norm2().max(1.0);
    let identity_holds = invariant.then_some(hd <= tol && md <= tol);
    debug_assert_eq!(eid.values.len(), n);

    Ok(SpectralReport {
        mode,
        spectrum_m: em.values,
        spectrum_n: en.values,
        spectrum_id_minus_n: eid.values,
        predicted,
        deflated_count: m,
        max_nondeflated_modulus,
        invariance_defect,
        invariant,
        core_nonsingular,
        n_sv_ratio,
        hausdorff: hd,
        matching_distance: md,
        identity_holds,
        eig_converged,
    })
}

/// Outcome of [`bauer_fike_check`]; all norms are 2-norms.
#[derive(Clone, Debug)]
pub struct BauerFikeReport {
    /// Largest non-deflated modulus of `Id − N_T` (equal to its spectral radius).
    pub lambda: f64,
    /// Condition number of the eigenvector matrix of `N_T`; `None` when `N_T`
    /// is numerically not diagonalizable.
    pub kappa: Option<f64>,
    pub delta_n_norm: f64,
    /// `λ + κ‖δN‖`.
    pub bound: f64,
    /// `ρ(Id − N)` for the perturbed space.
    pub observed_rho: f64,
    /// Largest distance from an eigenvalue of `N` to the spectrum of `N_T`.
    pub max_drift: f64,
    /// `max_drift ≤ κ‖δN‖ + 1e−9`.
    pub drift_ok: bool,
    /// `observed_rho ≤ bound + 1e−9`.
    pub bound_holds: bool,
    /// `ρ(N)` itself, which contains the deflated unit eigenvalues.
    pub rho_n: f64,
    /// Whether `ρ(N) ≤ λ + κ‖δN‖` holds literally.
    pub raw_reading_holds: bool,
    /// `δ = 1 − λ > κ‖δN‖`.
    pub corollary_premise: bool,
    /// With the premise: `ρ(Id − N) < 1` and the solver converged.
    pub corollary_holds: Option<bool>,
    pub solver_iterations: Option<usize>,
}

impl BauerFikeReport {
    pub fn pass(&self) -> bool {
        match self.kappa {
            None => true,
            Some(_) => self.drift_ok && self.bound_holds && self.corollary_holds.unwrap_or(true),
        }
    }
}

/// Condition number of a complex matrix given by columns, via its real embedding.
pub fn complex_condition(cols: &[Vec<Complex64>]) -> f64 {
    let n = cols.len();
    let m = DenseMatrix::from_fn(2 * n, 2 * n, |i, j| {
        let (bi, ri) = (i / n, i % n);
        let (bj, cj) = (j / n, j % n);
        let v = cols[cj][ri];
        match (bi, bj) {
            (0, 0) | (1, 1) => v.re,
            (0, 1) => -v.im,
            _ => v.im,
        }
    });
    let s = svd(&m).singular_values;
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        _ => f64::INFINITY,
    }
}

/// Eigenvector conditioning above which a matrix is treated as defective.
pub const DIAGONALIZABLE_KAPPA_CAP: f64 = 1e10;

/// Perturbs an exact invariant basis by `deltas` and checks the eigenvalue
/// drift of the iteration matrix against `κ(V)‖δN‖`, then Corollary 1 by
/// running the solver when its premise holds.
pub fn bauer_fike_check(
    a: &DenseMatrix,
    p: &Preconditioner,
    z_exact: &[Vec<f64>],
    deltas: &[Vec<f64>],
    mode: ProjectionMode,
) -> Result<BauerFikeReport> {
    let n = a.rows();
    if !deltas.is_empty() && deltas.len() != z_exact.len() {
        return Err(DfpiError::DimensionMismatch {
            expected: z_exact.len(),
            found: deltas.len(),
        });
    }
    let z_pert: Vec<Vec<f64>> = z_exact
        .iter()
        .enumerate()
        .map(|(k, z)| match deltas.get(k) {
            Some(d) if d.len() == z.len() => Ok(z.iter().zip(d).map(|(a, b)| a + b).collect()),
            Some(d) => Err(DfpiError::DimensionMismatch {
                expected: z.len(),
                found: d.len(),
            }),
            None => Ok(z.clone()),
        })
        .collect::<Result<_>>()?;

    let exact = dense_iteration(a, p, z_exact, mode.into())?;
    let pert = dense_iteration(a, p, &z_pert, mode.into())?;
    let delta_n_norm = pert.n.sub(&exact.n)?.norm2();

    let et = dense_eig(&exact.id_minus_n, true)?;
    let m = exact.z.len();
    // the m eigenvalues nearest zero belong to Z
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| et.values[i].norm().total_cmp(&et.values[j].norm()));
    let (defl, rest) = order.split_at(m);
    let lambda = rest
        .iter()
        .map(|&k| et.values[k].norm())
        .fold(0.0, f64::max);

    let kappa = match (&et.vectors, et.all_converged()) {
        (Some(vecs), true) => {
            let mut cols: Vec<Vec<Complex64>> = exact
                .z
                .iter()
                .map(|z| z.iter().map(|&v| Complex64::new(v, 0.0)).collect())
                .collect();
            cols.extend(rest.iter().map(|&k| vecs[k].clone()));
            let k = complex_condition(&cols);
            (k.is_finite() && k < DIAGONALIZABLE_KAPPA_CAP).then_some(k)
        }
        _ => None,
    };
    let _ = defl;

    let ep = dense_eig(&pert.id_minus_n, false)?;
    let en = dense_eig(&pert.n, false)?;
    let observed_rho = spectral_radius(&ep.values);
    let rho_n = spectral_radius(&en.values);
    let max_drift = ep
        .values
        .iter()
        .map(|mu| {
            et.values
                .iter()
                .map(|l| (mu - l).norm())
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max);

    let k = kappa.unwrap_or(f64::INFINITY);
    let radius = k * delta_n_norm;
    let radius = if radius.is_nan() { 0.0 } else { radius };
    let bound = lambda + radius;
    let drift_ok = max_drift <= radius + 1e-9;
    let bound_holds = observed_rho <= bound + 1e-9;
    let raw_reading_holds = rho_n <= bound + 1e-9;
    let corollary_premise = kappa.is_some() && 1.0 - lambda > radius;

    let (corollary_holds, solver_iterations) = if corollary_premise {
        let (converged, iters) = run_deflated(a, p, &z_pert, mode, observed_rho)?;
        (Some(observed_rho < 1.0 && converged), Some(iters))
    } else {
        (None, None)
    };

    Ok(BauerFikeReport {
        lambda,
        kappa,
        delta_n_norm,
        bound,
        observed_rho,
        max_drift,
        drift_ok,
        bound_holds,
        rho_n,
        raw_reading_holds,
        corollary_premise,
        corollary_holds,
        solver_iterations,
    })
}

// Solves A x = A·1 from zero with the static space; budget follows the rate.
fn run_deflated(
    a: &DenseMatrix,
    p: &Preconditioner,
    z: &[Vec<f64>],
    mode: ProjectionMode,
    rate: f64,
) -> Result<(bool, usize)> {
    let n = a.rows();
    let b = a.mul(&vec![1.0; n]);
    let ts = TroubleSpace::build(z, mode, a, p, None)?;
    let needed = if rate > 0.0 && rate < 1.0 {
        (1e-8f64).ln() / rate.ln()
    } else {
        1.0
    };
    let max_iter = (5.0 * needed.ceil() + 200.0).min(50_000.0) as usize;
    let opts = SolverOptions {
        max_iter,
        rel_tol: 1e-8,
        ..SolverOptions::default()
    };
    let out = dfpi_solve(a, &b, None, p, Deflation::Static(ts), &opts)?;
    Ok((
        out.trace.status == SolveStatus::Converged,
        out.trace.iterations(),
    ))
}

/// Outcome of [`jordan_chain_check`].
#[derive(Clone, Debug)]
pub struct JordanReport {
    pub dim: usize,
    pub deflated_count: usize,
    /// Largest `‖Nε − ε‖ / (‖N‖‖ε‖)` over the deflated chain vectors.
    pub unit_residual: f64,
    /// Largest relative residual of the constructed chains of `N`.
    pub chain_residual: f64,
    /// `(eigenvalue, length)` of each constructed chain.
    pub chains: Vec<(f64, usize)>,
    /// Predicted spectrum of `N` versus `dense_eig`.
    pub spectrum_distance: f64,
    pub spectrum_tol: f64,
}

impl JordanReport {
    pub fn pass(&self, tol: f64) -> bool {
        self.unit_residual <= tol
            && self.chain_residual <= tol
            && self.spectrum_distance <= self.spectrum_tol
    }
}

/// Builds `M = V J V⁻¹`, deflates the leading `prefix[i]` vectors of each
/// chain and verifies the predicted generalized eigenvectors of `N`.
pub fn jordan_chain_check(
    spec: &JordanSpec,
    prefix: &[usize],
    mode: VerifyMode,
) -> Result<JordanReport> {
    if prefix.len() != spec.blocks.len() {
        return Err(DfpiError::DimensionMismatch {
            expected: spec.blocks.len(),
            found: prefix.len(),
        });
    }
    for (&(_, size), &pl) in spec.blocks.iter().zip(prefix) {
        if pl > size {
            return Err(DfpiError::InvalidInput(format!(
                "prefix {pl} exceeds block size {size}"
            )));
        }
    }
    let total_prefix: usize = prefix.iter().sum();
    if total_prefix > 0 {
        if let Some(&(l, _)) = spec
            .blocks
            .iter()
            .zip(prefix)
            .find(|(&(l, s), &pl)| pl < s && l == 1.0)
            .map(|(b, _)| b)
        {
            return Err(DfpiError::InvalidInput(format!(
                "eigenvalue {l} equals 1 on a chain that is not fully deflated; the construction is singular"
            )));
        }
    }

    let (m, v) = gen_jordan(spec)?;
    let n = m.rows();
    let starts = spec.block_starts();
    let chain = |b: usize, j: usize| v.column(starts[b] + j);
    let z: Vec<Vec<f64>> = (0..spec.blocks.len())
        .flat_map(|b| (0..prefix[b]).map(move |j| (b, j)))
        .map(|(b, j)| chain(b, j))
        .collect();

    let p = Preconditioner::identity(n);
    let it = dense_iteration(&m, &p, &z, mode)?;
    let nn = &it.n;
    let nnorm = nn.norm2().max(f64::MIN_POSITIVE);
    let id = DenseMatrix::identity(n);
    let iq = id.sub(&it.q)?;
    let qm_iq = it.q.matmul(&m)?.matmul(&iq)?;

    let unit_residual = z
        .iter()
        .map(|e| {
            let r: Vec<f64> = nn.mul(e).iter().zip(e).map(|(a, b)| a - b).collect();
            norm2(&r) / (nnorm * norm2(e))
        })
        .fold(0.0, f64::max);

    let mut chain_residual: f64 = 0.0;
    let mut chains = Vec::new();
    let mut predicted = vec![Complex64::new(1.0, 0.0); it.z.len()];
    let mut longest = 1;
    for (b, (&(lam, size), &pl)) in spec.blocks.iter().zip(prefix).enumerate() {
        if pl == size {
            continue;
        }
        let len = size - pl;
        longest = longest.max(len);
        predicted.extend(std::iter::repeat_n(Complex64::new(lam, 0.0), len));
        chains.push((lam, len));
        let mut prev_e: Option<Vec<f64>> = None;
        let mut prev_z: Vec<f64> = vec![0.0; n];
        for j in pl..size {
            let eps = chain(b, j);
            let qmv = qm_iq.mul(&eps);
            let zj: Vec<f64> = if z.is_empty() {
                vec![0.0; n]
            } else if j == pl {
                qmv.iter().map(|x| x / (lam - 1.0)).collect()
            } else {
                prev_z
                    .iter()
                    .zip(&qmv)
                    .map(|(a, b)| (a - b) / (1.0 - lam))
                    .collect()
            };
            let e: Vec<f64> = iq.mul(&eps).iter().zip(&zj).map(|(a, b)| a + b).collect();
            let ne = nn.mul(&e);
            let mut r: Vec<f64> = ne.iter().zip(&e).map(|(a, b)| a - lam * b).collect();
            let mut scale = nnorm * norm2(&e) + lam.abs() * norm2(&e);
            if let Some(pe) = &prev_e {
                for (ri, pi) in r.iter_mut().zip(pe) {
                    *ri -= pi;
                }
                scale += norm2(pe);
            }
            chain_residual = chain_residual.max(norm2(&r) / scale);
            prev_e = Some(e);
            prev_z = zj;
        }
    }

    let computed = dense_eig(nn, false)?;
    let spectrum_distance = greedy_match_distance(&predicted, &computed.values);
    // defective eigenvalues move by about eps^(1/k) under rounding
    let spectrum_tol = (10.0 * f64::EPSILON.powf(1.0 / longest as f64)).max(1e-6) * nnorm.max(1.0);

    Ok(JordanReport {
        dim: n,
        deflated_count: it.z.len(),
        unit_residual,
        chain_residual,
        chains,
        spectrum_distance,
        spectrum_tol,
    })
}
