//! Certification battery behind `dfpi verify`.

use std::fmt;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::engine::{dfpi_solve, Deflation, DfpiVariant, SolveStatus, SolverOptions};
use crate::error::Result;
use crate::krylov::{gmres_solve, richardson_solve, KrylovOptions};
use crate::linalg::{
    dense_eig, dot, mgs_orthonormalize, norm2, principal_angles, sub, DenseMatrix, LinearOperator,
    SparseMatrix,
};
use crate::precond::{PrecondKind, Preconditioner};
use crate::problems::{
    format_matrix_market, gen_cd1d, gen_prescribed_parts, make_rhs, parse_matrix_market,
    JordanSpec, PrescribedMatrix, RhsRule,
};
use crate::projector::{ProjectionMode, TroubleSpace};
use crate::recruitment::{StrategyConfig, StrategyKind};
use crate::spectral::{bauer_fike_check, jordan_chain_check, spectrum_comparison, VerifyMode};

/// Dominant non-deflated modulus of [`trouble_case`].
pub const TROUBLE_RATE: f64 = 0.85;

/// Prescribed-spectrum system whose plain iteration diverges on a few modes.
#[derive(Clone, Debug)]
pub struct TroubleCase {
    pub parts: PrescribedMatrix,
    /// Exact invariant basis of the troublesome modes.
    pub z: Vec<Vec<f64>>,
    /// Eigenvalues of `Id − A` carried by `z`.
    pub troublesome: Vec<Complex64>,
    /// Largest modulus among the remaining eigenvalues of `Id − A`.
    pub rate: f64,
}

impl TroubleCase {
    pub fn matrix(&self) -> &DenseMatrix {
        &self.parts.matrix
    }
}

/// `n × n` matrix `A` such that `Id − A` has `min(5, ·)` eigenvalues of modulus in
/// (1.1, 2) (three real and one conjugate pair when `n ≥ 10`), one at
/// [`TROUBLE_RATE`], and the rest within `0.6·TROUBLE_RATE`.
pub fn trouble_case(n: usize, seed: u64) -> Result<TroubleCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mu: Vec<Complex64> = Vec::with_capacity(n);
    let sign = |rng: &mut ChaCha8Rng| if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    if n >= 10 {
        for _ in 0..3 {
            let r = rng.gen_range(1.1..2.0);
            mu.push(Complex64::new(sign(&mut rng) * r, 0.0));
        }
        let r = rng.gen_range(1.1..2.0);
        let t = rng.gen_range(0.3..2.8);
        let z = Complex64::from_polar(r, t);
        mu.push(z);
        mu.push(z.conj());
    } else {
        for _ in 0..(n / 4).max(1) {
            let r = rng.gen_range(1.1..2.0);
            mu.push(Complex64::new(sign(&mut rng) * r, 0.0));
        }
    }
    let troublesome = mu.clone();
    mu.push(Complex64::new(TROUBLE_RATE, 0.0));
    let cap = 0.6 * TROUBLE_RATE;
    while mu.len() < n {
        if n - mu.len() >= 2 && rng.gen_bool(0.4) {
            let z = Complex64::from_polar(rng.gen_range(0.05..cap), rng.gen_range(0.2..2.9));
            mu.push(z);
            mu.push(z.conj());
        } else {
            mu.push(Complex64::new(rng.gen_range(-cap..cap), 0.0));
        }
    }
    let one = Complex64::new(1.0, 0.0);
    let spectrum: Vec<Complex64> = mu.iter().map(|m| one - m).collect();
    let parts = gen_prescribed_parts(&spectrum, 10.0, rng.gen())?;
    let blocks: Vec<usize> = (0..parts.blocks.len())
        .filter(|&b| (one - parts.blocks[b].1).norm() > 1.0)
        .collect();
    let z = parts.invariant_columns(&blocks);
    Ok(TroubleCase {
        parts,
        z,
        troublesome,
        rate: TROUBLE_RATE,
    })
}

/// Orthonormal basis of `Kᵏ(P⁻¹A, P⁻¹r₀)` by Arnoldi.
pub fn krylov_basis(
    a: &dyn LinearOperator,
    p: &Preconditioner,
    r0: &[f64],
    k: usize,
) -> Result<Vec<Vec<f64>>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut v = p.apply(r0)?;
    for _ in 0..k {
        let (w, _) = crate::linalg::orthogonalize_against(&basis, &v);
        let wn = norm2(&w);
        if wn == 0.0 {
            break;
        }
        let q: Vec<f64> = w.iter().map(|t| t / wn).collect();
        v = p.apply(&a.mul(&q))?;
        basis.push(q);
    }
    Ok(basis)
}

/// Geometric-mean contraction factor of the last `window` residuals.
pub fn fitted_rate(residuals: &[f64], window: usize) -> f64 {
    let tail: Vec<f64> = residuals
        .iter()
        .rev()
        .take(window)
        .rev()
        .map(|r| r.ln())
        .collect();
    let m = tail.len() as f64;
    if tail.len() < 2 {
        return f64::NAN;
    }
    let xbar = (m - 1.0) / 2.0;
    let ybar = tail.iter().sum::<f64>() / m;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, y) in tail.iter().enumerate() {
        let dx = i as f64 - xbar;
        sxy += dx * (y - ybar);
        sxx += dx * dx;
    }
    (sxy / sxx).exp()
}

fn rel_diff(x: &[f64], y: &[f64]) -> f64 {
    norm2(&sub(x, y)) / norm2(y).max(f64::MIN_POSITIVE)
}

/// One line of the verification report.
#[derive(Clone, Debug)]
pub struct CheckResult {
    pub name: &'static str,
    pub measured: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub detail: String,
    pub seconds: f64,
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<5} {:<14} measured {:.3e} tol {:.1e} ({:.2}s) {}",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.measured,
            self.tolerance,
            self.seconds,
            self.detail
        )
    }
}

struct Check {
    measured: f64,
    tolerance: f64,
    ok: bool,
    detail: String,
}

impl Check {
    fn at_most(measured: f64, tolerance: f64, detail: impl Into<String>) -> Self {
        Self {
            measured,
            tolerance,
            ok: measured <= tolerance,
            detail: detail.into(),
        }
    }

    fn and(mut self, ok: bool, why: &str) -> Self {
        if !ok {
            self.ok = false;
            self.detail = format!("{}; {why}", self.detail);
        }
        self
    }
}

/// Settings of [`run_battery`].
#[derive(Clone, Copy, Debug)]
pub struct BatteryConfig {
    pub seed: u64,
    /// Problem dimension is `2·scale`.
    pub scale: usize,
    /// Multiplies every tolerance (1 in normal use).
    pub tol_scale: f64,
}

impl Default for BatteryConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            scale: 25,
            tol_scale: 1.0,
        }
    }
}

/// Runs every certification check; a check that errors counts as failed.
pub fn run_battery(cfg: &BatteryConfig) -> Vec<CheckResult> {
    type CheckFn = fn(&BatteryConfig) -> Result<Check>;
    let checks: [(&'static str, CheckFn); 9] = [
        ("theorem1", check_theorem1),
        ("rate", check_rate),
        ("jordan", check_jordan),
        ("bauer_fike", check_bauer_fike),
        ("krylov_span", check_krylov_span),
        ("aaos", check_aaos),
        ("gmres", check_gmres),
        ("variants", check_variants),
        ("kernels", check_kernels),
    ];
    checks
        .iter()
        .map(|(name, f)| {
            let t = Instant::now();
            let out = f(cfg);
            let seconds = t.elapsed().as_secs_f64();
            match out {
                Ok(c) => CheckResult {
                    name,
                    measured: c.measured,
                    tolerance: c.tolerance,
                    pass: c.ok,
                    detail: c.detail,
                    seconds,
                },
                Err(e) => CheckResult {
                    name,
                    measured: f64::NAN,
                    tolerance: f64::NAN,
                    pass: false,
                    detail: format!("error: {e}"),
                    seconds,
                },
            }
        })
        .collect()
}

fn dim(cfg: &BatteryConfig) -> usize {
    (2 * cfg.scale).max(4)
}

fn check_theorem1(cfg: &BatteryConfig) -> Result<Check> {
    let case = trouble_case(dim(cfg), cfg.seed)?;
    let p = Preconditioner::identity(dim(cfg));
    let mut worst: f64 = 0.0;
    let mut ok = true;
    for mode in [
        VerifyMode::Galerkin,
        VerifyMode::LsqA,
        VerifyMode::LsqPa,
        VerifyMode::Orthogonal,
    ] {
        let r = spectrum_comparison(case.matrix(), &p, &case.z, mode)?;
        worst = worst.max(r.hausdorff).max(r.matching_distance);
        ok &= r.identity_holds.is_some() && r.eig_converged;
    }
    Ok(Check::at_most(
        worst,
        1e-7 * cfg.tol_scale,
        format!("{} deflated, 4 modes", case.z.len()),
    )
    .and(ok, "space not invariant"))
}

fn check_rate(cfg: &BatteryConfig) -> Result<Check> {
    let n = dim(cfg);
    let case = trouble_case(n, cfg.seed)?;
    let a = case.matrix();
    let p = Preconditioner::identity(n);
    let (b, _) = make_rhs(&SparseMatrix::from_dense(a), RhsRule::Random(cfg.seed));
    let ts = TroubleSpace::build(&case.z, ProjectionMode::Galerkin, a, &p, None)?;
    let opts = SolverOptions {
        max_iter: 2000,
        rel_tol: 1e-10,
        ..SolverOptions::default()
    };
    let out = dfpi_solve(a, &b, None, &p, Deflation::Static(ts), &opts)?;
    let res: Vec<f64> = out.trace.full_residuals().iter().map(|r| r.1).collect();
    let rate = fitted_rate(&res, 20);
    let err = (rate - case.rate).abs() / case.rate;
    let rich = richardson_solve(
        a,
        &b,
        None,
        &p,
        &KrylovOptions {
            max_iter: 100,
            ..KrylovOptions::default()
        },
    )?;
    let diverged = rich.trace.status == SolveStatus::Breakdown
        || rich.trace.final_residual() > 10.0 * norm2(&b);
    Ok(Check::at_most(
        err,
        0.05 * cfg.tol_scale,
        format!("fitted {rate:.4} vs {:.2}", case.rate),
    )
    .and(
        out.trace.status == SolveStatus::Converged,
        "deflated run did not converge",
    )
    .and(diverged, "plain iteration did not diverge"))
}

/// The three chain constructions: a trivial block, a partly deflated block
/// and a fully deflated block next to an untouched one.
pub fn jordan_cases(seed: u64) -> Result<Vec<(JordanSpec, Vec<usize>)>> {
    Ok(vec![
        (JordanSpec::new(vec![(0.5, 1)], seed)?, vec![0]),
        (JordanSpec::new(vec![(0.9, 3)], seed)?, vec![1]),
        (JordanSpec::new(vec![(1.2, 2), (0.4, 2)], seed)?, vec![2, 0]),
    ])
}

fn check_jordan(cfg: &BatteryConfig) -> Result<Check> {
    let mut worst: f64 = 0.0;
    let mut ok = true;
    for (spec, prefix) in jordan_cases(cfg.seed)? {
        for mode in [VerifyMode::Galerkin, VerifyMode::LsqA, VerifyMode::LsqPa] {
            let r = jordan_chain_check(&spec, &prefix, mode)?;
            worst = worst.max(r.unit_residual).max(r.chain_residual);
            ok &= r.spectrum_distance <= r.spectrum_tol;
        }
    }
    Ok(
        Check::at_most(worst, 1e-8 * cfg.tol_scale, "3 constructions x 3 modes")
            .and(ok, "spectrum mismatch"),
    )
}

/// Random perturbation of `z` with entries of size about `10^(−u)`, `u ∈ [2, 8]`.
pub fn perturbation(z: &[Vec<f64>], seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let size = 10f64.powf(-rng.gen_range(2.0..8.0));
    z.iter()
        .map(|v| {
            let s = size * norm2(v) / (v.len() as f64).sqrt();
            v.iter().map(|_| s * rng.gen_range(-1.0..1.0)).collect()
        })
        .collect()
}

fn check_bauer_fike(cfg: &BatteryConfig) -> Result<Check> {
    let n = dim(cfg);
    let p = Preconditioner::identity(n);
    let mut worst: f64 = 0.0;
    let (mut premise, mut ok) = (0, true);
    for t in 0..10u64 {
        let seed = cfg.seed.wrapping_add(t);
        let case = trouble_case(n, seed)?;
        let d = perturbation(&case.z, seed);
        let r = bauer_fike_check(case.matrix(), &p, &case.z, &d, ProjectionMode::Galerkin)?;
        let radius = r.kappa.unwrap_or(f64::INFINITY) * r.delta_n_norm;
        worst = worst.max((r.max_drift - radius).max(0.0));
        ok &= r.kappa.is_some() && r.bound_holds;
        if r.corollary_premise {
            premise += 1;
            ok &= r.corollary_holds == Some(true);
        }
    }
    Ok(Check::at_most(
        worst,
        1e-9 * cfg.tol_scale,
        format!("10 trials, premise held in {premise}"),
    )
    .and(ok, "bound or corollary violated"))
}

fn check_krylov_span(cfg: &BatteryConfig) -> Result<Check> {
    let n = dim(cfg);
    let (a, _) = gen_cd1d(n, 50.0)?;
    let p = Preconditioner::build(PrecondKind::Jacobi, &a)?;
    let b = vec![1.0; n];
    let steps = 15.min(n - 1);
    let out = richardson_solve(
        &a,
        &b,
        None,
        &p,
        &KrylovOptions {
            max_iter: steps,
            rel_tol: 1e-300,
            restart: None,
            keep_iterates: true,
        },
    )?;
    let incs: Vec<Vec<f64>> = out.history.windows(2).map(|w| sub(&w[1], &w[0])).collect();
    let mut worst: f64 = 0.0;
    for k in 1..=incs.len() {
        let kb = krylov_basis(&a, &p, &b, k)?;
        let inc = mgs_orthonormalize(&incs[..k], 0.0)?.basis;
        if inc.len() != kb.len() {
            return Ok(Check::at_most(
                f64::INFINITY,
                1e-8,
                format!("dimension {} vs {} at n = {k}", inc.len(), kb.len()),
            ));
        }
        worst = principal_angles(&inc, &kb)
            .into_iter()
            .fold(worst, f64::max);
    }
    Ok(Check::at_most(
        worst,
        1e-8 * cfg.tol_scale,
        format!("n = 1..{}", incs.len()),
    ))
}

fn check_aaos(cfg: &BatteryConfig) -> Result<Check> {
    let n = dim(cfg);
    let case = trouble_case(n, cfg.seed)?;
    let a = case.matrix();
    let p = Preconditioner::identity(n);
    let (b, _) = make_rhs(&SparseMatrix::from_dense(a), RhsRule::Random(cfg.seed));
    let mode = ProjectionMode::LsqA;
    let opts = SolverOptions {
        max_iter: 300,
        rel_tol: 1e-10,
        keep_iterates: true,
        ..SolverOptions::default()
    };
    let aaos = dfpi_solve(
        a,
        &b,
        None,
        &p,
        Deflation::Dynamic {
            mode,
            strategy: StrategyConfig::new(StrategyKind::Aaos),
        },
        &opts,
    )?;
    let boost = dfpi_solve(
        a,
        &b,
        None,
        &p,
        Deflation::Dynamic {
            mode,
            strategy: StrategyConfig::new(StrategyKind::BoostConv),
        },
        &opts,
    )?;
    let promotions = aaos
        .strategy
        .as_ref()
        .map(|s| s.promotions().to_vec())
        .unwrap_or_default();
    if promotions.is_empty() {
        return Ok(Check::at_most(f64::INFINITY, 1e-8, "no promotion happened"));
    }
    let r0 = b.clone();
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for &s in &promotions {
        let h = 2 * s + 1;
        let (Some(xa), Some(xb)) = (aaos.trace.iterate_at(h), boost.trace.iterate_at(h)) else {
            continue;
        };
        let basis = krylov_basis(a, &p, &r0, s)?;
        let ts = TroubleSpace::build(&basis, mode, a, &p, None)?;
        let (_, c) = ts.correction(&r0)?;
        worst = worst.max(rel_diff(xa, &c)).max(rel_diff(xa, xb));
        checked += 1;
    }
    let note = if checked == 0 {
        "; solve converged before the first promotion (vacuous)"
    } else {
        ""
    };
    Ok(Check::at_most(
        worst,
        1e-8 * cfg.tol_scale,
        format!("promotions at {promotions:?}{note}"),
    ))
}

fn check_gmres(cfg: &BatteryConfig) -> Result<Check> {
    let n = dim(cfg);
    let case = trouble_case(n, cfg.seed)?;
    let mut worst: f64 = 0.0;
    let mut count = 0;
    let a1 = case.matrix().clone();
    let p1 = Preconditioner::identity(n);
    let (a2, _) = gen_cd1d(n, 50.0)?;
    let p2 = Preconditioner::build(PrecondKind::Jacobi, &a2)?;
    let systems: [(&dyn LinearOperator, &Preconditioner); 2] = [(&a1, &p1), (&a2, &p2)];
    for (a, p) in systems {
        let b = vec![1.0; n];
        let g = gmres_solve(
            a,
            &b,
            None,
            p,
            &KrylovOptions {
                keep_iterates: true,
                ..KrylovOptions::default()
            },
        )?;
        let opts = SolverOptions {
            max_iter: g.history.len(),
            keep_iterates: true,
            ..SolverOptions::default()
        };
        let strat = StrategyConfig::new(StrategyKind::BoostConv);
        let d = dfpi_solve(
            a,
            &b,
            None,
            p,
            Deflation::Dynamic {
                mode: ProjectionMode::LsqPa,
                strategy: strat,
            },
            &opts,
        )?;
        for (k, xg) in g.history.iter().enumerate() {
            if let Some(xd) = d.trace.iterate_at(2 * k + 1) {
                worst = worst.max(rel_diff(xd, xg));
                count += 1;
            }
        }
    }
    Ok(Check::at_most(
        worst,
        1e-8 * cfg.tol_scale,
        format!("{count} iterates compared"),
    ))
}

fn check_variants(cfg: &BatteryConfig) -> Result<Check> {
    let n = dim(cfg);
    let mut worst: f64 = 0.0;
    let mut ok = true;
    for t in 0..3u64 {
        let seed = cfg.seed.wrapping_add(t);
        let case = trouble_case(n, seed)?;
        let a = case.matrix();
        let p = Preconditioner::identity(n);
        let (b, _) = make_rhs(&SparseMatrix::from_dense(a), RhsRule::Random(seed));
        let ts = || TroubleSpace::build(&case.z, ProjectionMode::Galerkin, a, &p, None);
        // x0 with Q_R x0 = Q_R x∞
        let x0 = ts()?.correction(&b)?.1;
        let run = |variant| {
            let opts = SolverOptions {
                max_iter: 60,
                rel_tol: 1e-300,
                variant,
                keep_iterates: true,
                record_halves: true,
            };
            dfpi_solve(a, &b, Some(&x0), &p, Deflation::Static(ts()?), &opts)
        };
        let pre = run(DfpiVariant::PreProjection)?;
        let post = run(DfpiVariant::PostProjection)?;
        let init = run(DfpiVariant::InitProjection)?;
        for k in 0..40 {
            let (Some(pre_half), Some(pre_full)) = (
                pre.trace.iterate_at(2 * k + 1),
                pre.trace.iterate_at(2 * k + 2),
            ) else {
                ok = false;
                break;
            };
            if let Some(ph) = post.trace.iterate_at(2 * k + 1) {
                worst = worst.max(rel_diff(ph, pre_full));
            }
            if let Some(pf) = post.trace.iterate_at(2 * k + 2) {
                if let Some(next_half) = pre.trace.iterate_at(2 * k + 3) {
                    worst = worst.max(rel_diff(pf, next_half));
                }
            }
            if let Some(xi) = init.trace.iterate_at(2 * k) {
                worst = worst.max(rel_diff(xi, pre_half));
            }
        }
        let conv = SolverOptions {
            max_iter: 2000,
            rel_tol: 1e-10,
            ..SolverOptions::default()
        };
        let fin = dfpi_solve(
            a,
            &b,
            None,
            &p,
            Deflation::Static(ts()?),
            &SolverOptions {
                variant: DfpiVariant::FinalCorrection,
                ..conv.clone()
            },
        )?;
        let pre_conv = dfpi_solve(a, &b, None, &p, Deflation::Static(ts()?), &conv)?;
        ok &= fin.trace.status == SolveStatus::Converged
            && pre_conv.trace.status == SolveStatus::Converged;
        let res = norm2(&sub(&b, &a.mul(&fin.x))) / norm2(&b);
        ok &= res <= 1e-8 && rel_diff(&fin.x, &pre_conv.x) <= 1e-8;
    }
    Ok(Check::at_most(
        worst,
        1e-10 * cfg.tol_scale,
        "pre/post/init sequences, final correction",
    )
    .and(ok, "final-correction answer or run lengths disagree"))
}

fn check_kernels(cfg: &BatteryConfig) -> Result<Check> {
    let n = dim(cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let vecs: Vec<Vec<f64>> = (0..n.min(20))
        .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let q = mgs_orthonormalize(&vecs, 1e-10)?.basis;
    let mut orth: f64 = 0.0;
    for i in 0..q.len() {
        for j in 0..q.len() {
            let e = if i == j { 1.0 } else { 0.0 };
            orth = orth.max((dot(&q[i], &q[j]) - e).abs());
        }
    }
    let m = DenseMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    let eig = dense_eig(&m, true)?;
    let mf = m.frobenius_norm();
    let mut eig_res: f64 = 0.0;
    if let Some(vs) = &eig.vectors {
        for (l, v) in eig.values.iter().zip(vs) {
            let mut worst: f64 = 0.0;
            for i in 0..n {
                let mut s = Complex64::new(0.0, 0.0);
                for j in 0..n {
                    s += m[(i, j)] * v[j];
                }
                worst = worst.hypot((s - l * v[i]).norm());
            }
            let vn = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            eig_res = eig_res.max(worst / (mf * vn));
        }
    } else {
        eig_res = f64::INFINITY;
    }
    let (a, _) = gen_cd1d(n, 50.0)?;
    let pilu = Preconditioner::build(PrecondKind::Ilu0, &a)?;
    let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let ilu_err = rel_diff(&pilu.apply(&a.mul(&x))?, &x);
    let back = parse_matrix_market(&format_matrix_market(&a))?;
    let roundtrip = back == a;
    let measured = (orth / 1e-12).max(eig_res / 1e-8).max(ilu_err / 1e-12);
    Ok(Check::at_most(
        measured,
        cfg.tol_scale,
        format!("orth {orth:.1e}, eig {eig_res:.1e}, ilu {ilu_err:.1e} (ratios to bounds)"),
    )
    .and(roundtrip, "Matrix Market round trip changed the matrix"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trouble_case_spectrum() {
        let case = trouble_case(50, 1).unwrap();
        assert_eq!(case.z.len(), 5);
        let m = DenseMatrix::identity(50).sub(case.matrix()).unwrap();
        let ev = dense_eig(&m, false).unwrap().values;
        let big = ev.iter().filter(|l| l.norm() > 1.0).count();
        assert_eq!(big, 5);
        let rest = ev
            .iter()
            .map(|l| l.norm())
            .filter(|&r| r <= 1.0)
            .fold(0.0, f64::max);
        assert!((rest - TROUBLE_RATE).abs() < 1e-9);
    }

    #[test]
    fn fitted_rate_of_geometric_sequence() {
        let r: Vec<f64> = (0..30).map(|k| 3.0 * 0.7f64.powi(k)).collect();
        assert!((fitted_rate(&r, 20) - 0.7).abs() < 1e-12);
    }

    #[test]
    fn full_battery_passes() {
        for c in run_battery(&BatteryConfig::default()) {
            println!("{c}");
            assert!(c.pass, "{c}");
        }
    }

    #[test]
    fn smoke_battery_passes() {
        let cfg = BatteryConfig {
            seed: 0,
            scale: 2,
            tol_scale: 1.0,
        };
        for c in run_battery(&cfg) {
            assert!(c.pass, "{c}");
        }
    }
}
