//! Reference Krylov solvers and plain Richardson.
//!
//! All solvers share the residual test of the deflated engine:
//! `‖b − Ax‖ ≤ rel_tol·‖b‖` (relative to `‖r₀‖` when `b = 0`), and report
//! through [`SolverTrace`]. Integer iteration `k` is half-step `2k`.

use crate::engine::{SolveStatus, SolverTrace};
use crate::error::{DfpiError, Result};
use crate::linalg::{add, all_finite, axpy, check_len, dot, norm2, sub, LinearOperator};
use crate::precond::Preconditioner;

/// Relative size under which a recurrence scalar counts as a breakdown.
pub const BREAKDOWN_TOL: f64 = 1e-15;
/// Symmetry defect accepted by [`cg_solve`].
pub const SYMMETRY_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct KrylovOptions {
    pub max_iter: usize,
    pub rel_tol: f64,
    /// GMRES(m) restart length.
    pub restart: Option<usize>,
    /// Record `x⁽ᵏ⁾` for every iteration.
    pub keep_iterates: bool,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        Self {
            max_iter: 1000,
            rel_tol: 1e-8,
            restart: None,
            keep_iterates: false,
        }
    }
}

impl KrylovOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iter == 0 {
            return Err(DfpiError::InvalidInput(
                "max_iter must be at least 1".into(),
            ));
        }
        if !(self.rel_tol > 0.0) {
            return Err(DfpiError::InvalidInput("rel_tol must be positive".into()));
        }
        if self.restart == Some(0) {
            return Err(DfpiError::InvalidInput(
                "restart length must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct KrylovOutcome {
    pub x: Vec<f64>,
    pub trace: SolverTrace,
    /// `x⁽⁰⁾, x⁽¹⁾, …` when `keep_iterates` is set.
    pub history: Vec<Vec<f64>>,
    /// Iteration at which a breakdown was detected.
    pub breakdown_at: Option<usize>,
}

struct Setup {
    x: Vec<f64>,
    r: Vec<f64>,
    tol: f64,
}

fn setup(
    a: &dyn LinearOperator,
    b: &[f64],
    x0: Option<&[f64]>,
    p: &Preconditioner,
    opts: &KrylovOptions,
) -> Result<Setup> {
    opts.validate()?;
    let n = a.nrows();
    if a.ncols() != n {
        return Err(DfpiError::InvalidMatrix("operator must be square".into()));
    }
    check_len(n, b.len())?;
    check_len(n, p.dim())?;
    let x = match x0 {
        Some(x) => {
            check_len(n, x.len())?;
            x.to_vec()
        }
        None => vec![0.0; n],
    };
    if !all_finite(b) || !all_finite(&x) {
        return Err(DfpiError::NonFinite);
    }
    let r = sub(b, &a.mul(&x));
    let bn = norm2(b);
    let scale = if bn > 0.0 { bn } else { norm2(&r) };
    Ok(Setup {
        x,
        r,
        tol: opts.rel_tol * scale,
    })
}

struct Recorder {
    trace: SolverTrace,
    history: Vec<Vec<f64>>,
    keep: bool,
}

impl Recorder {
    fn new(keep: bool) -> Self {
        Self {
            trace: SolverTrace::default(),
            history: Vec::new(),
            keep,
        }
    }

    fn full(&mut self, k: usize, x: &[f64], rn: f64, event: &str) {
        self.trace.push(2 * k, rn, 0, event);
        if self.keep {
            self.history.push(x.to_vec());
            self.trace.iterates.push((2 * k, x.to_vec()));
        }
    }

    fn finish(
        mut self,
        x: Vec<f64>,
        status: SolveStatus,
        breakdown_at: Option<usize>,
    ) -> KrylovOutcome {
        self.trace.status = status;
        KrylovOutcome {
            x,
            trace: self.trace,
            history: self.history,
            breakdown_at,
        }
    }
}

/// `x ← x + P⁻¹(b − Ax)` until convergence; growth past ten times the
/// initial residual is flagged once as `diverging`.
pub fn richardson_solve(
    a: &dyn LinearOperator,
    b: &[f64],
    x0: Option<&[f64]>,
    p: &Preconditioner,
    opts: &KrylovOptions,
) -> Result<KrylovOutcome> {
    let Setup { mut x, mut r, tol } = setup(a, b, x0, p, opts)?;
    let mut rec = Recorder::new(opts.keep_iterates);
    rec.trace.matvecs = 1;
    let r0 = norm2(&r);
    rec.full(0, &x, r0, "");
    if r0 <= tol {
        return Ok(rec.finish(x, SolveStatus::Converged, None));
    }
    let mut flagged = false;
    for k in 1..=opts.max_iter {
        axpy(1.0, &p.solve(&r), &mut x);
        r = sub(b, &a.mul(&x));
        rec.trace.matvecs += 1;
        let rn = norm2(&r);
        if !rn.is_finite() {
            return Ok(rec.finish(x, SolveStatus::Breakdown, Some(k)));
        }
        let event = if !flagged && rn > 10.0 * r0 {
            flagged = true;
            "diverging"
        } else {
            ""
        };
        rec.full(k, &x, rn, event);
        if rn <= tol {
            return Ok(rec.finish(x, SolveStatus::Converged, None));
        }
    }
    Ok(rec.finish(x, SolveStatus::MaxIter, None))
}

/// Left-preconditioned GMRES: `x⁽ᵏ⁾` minimizes `‖P⁻¹(b − Ax)‖₂` over
/// `x⁽⁰⁾ + Kᵏ(P⁻¹A, P⁻¹r₀)`. Arnoldi uses MGS with one re-orthogonalization
/// pass; the iterate is rebuilt every iteration so the trace carries the
/// true residual.
pub fn gmres_solve(
    a: &dyn LinearOperator,
    b: &[f64],
    x0: Option<&[f64]>,
    p: &Preconditioner,
    opts: &KrylovOptions,
) -> Result<KrylovOutcome> {
    let Setup { mut x, r, tol } = setup(a, b, x0, p, opts)?;
    let mut rec = Recorder::new(opts.keep_iterates);
    rec.trace.matvecs = 1;
    let mut rn = norm2(&r);
    rec.full(0, &x, rn, "");
    if rn <= tol {
        return Ok(rec.finish(x, SolveStatus::Converged, None));
    }
    let restart = opts.restart.unwrap_or(usize::MAX);
    let mut k = 0;
    let mut r = r;
    loop {
        // one Arnoldi cycle from x
        let z0 = p.solve(&r);
        let beta = norm2(&z0);
        if !beta.is_finite() {
            return Ok(rec.finish(x, SolveStatus::Breakdown, Some(k)));
        }
        if beta == 0.0 {
            return Ok(rec.finish(x, SolveStatus::Breakdown, Some(k)));
        }
        let x_start = x.clone();
        let mut v: Vec<Vec<f64>> = vec![z0.iter().map(|t| t / beta).collect()];
        let mut h: Vec<Vec<f64>> = Vec::new(); // column j has j + 2 entries
        let mut cs: Vec<f64> = Vec::new();
        let mut sn: Vec<f64> = Vec::new();
        let mut g = vec![beta];
        let mut j = 0;
        while j < restart && k < opts.max_iter {
            let mut w = p.solve(&a.mul(&v[j]));
            rec.trace.matvecs += 1;
            let mut col = vec![0.0; j + 2];
            for _pass in 0..2 {
                for (i, vi) in v.iter().enumerate() {
                    let hij = dot(vi, &w);
                    axpy(-hij, vi, &mut w);
                    col[i] += hij;
                }
            }
            let hnext = norm2(&w);
            col[j + 1] = hnext;
            // apply previous rotations, then a new one
            for i in 0..j {
                let t = cs[i] * col[i] + sn[i] * col[i + 1];
                col[i + 1] = -sn[i] * col[i] + cs[i] * col[i + 1];
                col[i] = t;
            }
            let denom = col[j].hypot(col[j + 1]);
            if !denom.is_finite() || denom == 0.0 {
                return Ok(rec.finish(x, SolveStatus::Breakdown, Some(k + 1)));
            }
            let (c, s) = (col[j] / denom, col[j + 1] / denom);
            cs.push(c);
            sn.push(s);
            col[j] = denom;
            col[j + 1] = 0.0;
            g.push(-s * g[j]);
            g[j] *= c;
            h.push(col);
            j += 1;
            k += 1;

            // x = x_start + V y with R y = g[..j]
            let mut y = vec![0.0; j];
            for i in (0..j).rev() {
                let mut s = g[i];
                for (l, yl) in y.iter().enumerate().skip(i + 1) {
                    s -= h[l][i] * yl;
                }
                y[i] = s / h[i][i];
            }
            x = x_start.clone();
            for (vi, yi) in v.iter().zip(&y) {
                axpy(*yi, vi, &mut x);
            }
            r = sub(b, &a.mul(&x));
            rec.trace.matvecs += 1;
            rn = norm2(&r);
            if !rn.is_finite() {
                return Ok(rec.finish(x, SolveStatus::Breakdown, Some(k)));
            }
            let happy = hnext <= BREAKDOWN_TOL * beta;
            rec.full(k, &x, rn, if happy { "invariant" } else { "" });
            if rn <= tol {
                return Ok(rec.finish(x, SolveStatus::Converged, None));
            }
            if happy {
                // the Krylov space is exhausted; a restart continues from x
                break;
            }
            v.push(w.iter().map(|t| t / hnext).collect());
        }
        if k >= opts.max_iter {
            return Ok(rec.finish(x, SolveStatus::MaxIter, None));
        }
    }
}

/// Preconditioned conjugate gradients for symmetric positive definite `A`.
pub fn cg_solve(
    a: &dyn LinearOperator,
    b: &[f64],
    x0: Option<&[f64]>,
    p: &Preconditioner,
    opts: &KrylovOptions,
) -> Result<KrylovOutcome> {
    let defect = a.symmetry_defect();
    if defect > SYMMETRY_TOL {
        return Err(DfpiError::NotSymmetric { defect });
    }
    let Setup { mut x, mut r, tol } = setup(a, b, x0, p, opts)?;
    let mut rec = Recorder::new(opts.keep_iterates);
    rec.trace.matvecs = 1;
    let mut rn = norm2(&r);
    rec.full(0, &x, rn, "");
    if rn <= tol {
        return Ok(rec.finish(x, SolveStatus::Converged, None));
    }
    let mut z = p.solve(&r);
    let mut d = z.clone();
    let mut rz = dot(&r, &z);
    for k in 1..=opts.max_iter {
        let q = a.mul(&d);
        rec.trace.matvecs += 1;
        let dq = dot(&d, &q);
        if !(dq > 0.0) || !rz.is_finite() {
            return Ok(rec.finish(x, SolveStatus::Breakdown, Some(k)));
        }
        let alpha = rz / dq;
        axpy(alpha, &d, &mut x);
        axpy(-alpha, &q, &mut r);
        rn = norm2(&r);
        rec.full(k, &x, rn, "");
        if rn <= tol {
            return Ok(rec.finish(x, SolveStatus::Converged, None));
        }
        z = p.solve(&r);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        d = add(&z, &d.iter().map(|t| beta * t).collect::<Vec<_>>());
    }
    Ok(rec.finish(x, SolveStatus::MaxIter, None))
}

/// Preconditioned biconjugate gradients with shadow residual `r̃₀ = r₀`.
/// Vanishing `ρ` or pivot stops the run with a breakdown status.
pub fn bicg_solve(
    a: &dyn LinearOperator,
    b: &[f64],
    x0: Option<&[f64]>,
    p: &Preconditioner,
    opts: &KrylovOptions,
) -> Result<KrylovOutcome> {
    let Setup { mut x, mut r, tol } = setup(a, b, x0, p, opts)?;
    let mut rec = Recorder::new(opts.keep_iterates);
    rec.trace.matvecs = 1;
    let mut rn = norm2(&r);
    rec.full(0, &x, rn, "");
    if rn <= tol {
        return Ok(rec.finish(x, SolveStatus::Converged, None));
    }
    let mut rt = r.clone();
    let mut z = p.solve(&r);
    let mut zt = p.solve_transpose(&rt);
    let mut d = z.clone();
    let mut dt = zt.clone();
    let mut rho = dot(&z, &rt);
    if rho.abs() <= BREAKDOWN_TOL * norm2(&z) * norm2(&rt) {
        return Ok(rec.finish(x, SolveStatus::Breakdown, Some(1)));
    }
    for k in 1..=opts.max_iter {
        let q = a.mul(&d);
        let qt = a.mul_transpose(&dt);
        rec.trace.matvecs += 2;
        let sigma = dot(&dt, &q);
        if !sigma.is_finite() || sigma.abs() <= BREAKDOWN_TOL * norm2(&dt) * norm2(&q) {
            if let Some(last) = rec.trace.records.last_mut() {
                last.event = "breakdown".into();
            }
            return Ok(rec.finish(x, SolveStatus::Breakdown, Some(k)));
        }
        let alpha = rho / sigma;
        axpy(alpha, &d, &mut x);
        axpy(-alpha, &q, &mut r);
        axpy(-alpha, &qt, &mut rt);
        rn = norm2(&r);
        if !rn.is_finite() {
            return Ok(rec.finish(x, SolveStatus::Breakdown, Some(k)));
        }
        if rn <= tol {
            rec.full(k, &x, rn, "");
            return Ok(rec.finish(x, SolveStatus::Converged, None));
        }
        z = p.solve(&r);
        zt = p.solve_transpose(&rt);
        let rho_new = dot(&z, &rt);
        if !rho_new.is_finite()
            || rho_new.abs() <= BREAKDOWN_TOL * norm2(&z) * norm2(&rt).max(norm2(&r))
        {
            rec.full(k, &x, rn, "breakdown");
            return Ok(rec.finish(x, SolveStatus::Breakdown, Some(k)));
        }
        rec.full(k, &x, rn, "");
        let beta = rho_new / rho;
        rho = rho_new;
        for i in 0..d.len() {
            d[i] = z[i] + beta * d[i];
            dt[i] = zt[i] + beta * dt[i];
        }
    }
    Ok(rec.finish(x, SolveStatus::MaxIter, None))
}

/// Right-preconditioned BiCGStab. The BiCG half of iteration `k` is recorded
/// at half-step `2k − 1`, the minimal-residual half at `2k`.
pub fn bicgstab_solve(
    a: &dyn LinearOperator,
    b: &[f64],
    x0: Option<&[f64]>,
    p: &Preconditioner,
    opts: &KrylovOptions,
) -> Result<KrylovOutcome> {
    let Setup { mut x, mut r, tol } = setup(a, b, x0, p, opts)?;
    let n = x.len();
    let mut rec = Recorder::new(opts.keep_iterates);
    rec.trace.matvecs = 1;
    let rn0 = norm2(&r);
    rec.full(0, &x, rn0, "");
    if rn0 <= tol {
        return Ok(rec.finish(x, SolveStatus::Converged, None));
    }
    let rhat = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut d = vec![0.0; n];
    for k in 1..=opts.max_iter {
        let rho_new = dot(&rhat, &r);
        if !rho_new.is_finite() || rho_new.abs() <= BREAKDOWN_TOL * norm2(&rhat) * norm2(&r) {
            return Ok(rec.finish(x, SolveStatus::Breakdown, Some(k)));
        }
        let beta = (rho_new / rho) * (alpha / omega);
        for i in 0..n {
            d[i] = r[i] + beta * (d[i] - omega * v[i]);
        }
        let dhat = p.solve(&d);
        v = a.mul(&dhat);
        rec.trace.matvecs += 1;
        let rv = dot(&rhat, &v);
        if !rv.is_finite() || rv.abs() <= BREAKDOWN_TOL * norm2(&rhat) * norm2(&v) {
            return Ok(rec.finish(x, SolveStatus::Breakdown, Some(k)));
        }
        alpha = rho_new / rv;
        let s: Vec<f64> = r.iter().zip(&v).map(|(ri, vi)| ri - alpha * vi).collect();
        axpy(alpha, &dhat, &mut x);
        let sn = norm2(&s);
        rec.trace.push(2 * k - 1, sn, 0, "");
        if rec.keep {
            rec.trace.iterates.push((2 * k - 1, x.clone()));
        }
        if sn <= tol {
            return Ok(rec.finish(x, SolveStatus::Converged, None));
        }
        let shat = p.solve(&s);
        let t = a.mul(&shat);
        rec.trace.matvecs += 1;
        let tt = dot(&t, &t);
        if !(tt > 0.0) || !tt.is_finite() {
            return Ok(rec.finish(x, SolveStatus::Breakdown, Some(k)));
        }
        omega = dot(&t, &s) / tt;
        if omega.abs() <= BREAKDOWN_TOL {
            return Ok(rec.finish(x, SolveStatus::Breakdown, Some(k)));
        }
        axpy(omega, &shat, &mut x);
        r = s.iter().zip(&t).map(|(si, ti)| si - omega * ti).collect();
        rho = rho_new;
        let rn = norm2(&r);
        if !rn.is_finite() {
            return Ok(rec.finish(x, SolveStatus::Breakdown, Some(k)));
        }
        rec.full(k, &x, rn, "");
        if rn <= tol {
            return Ok(rec.finish(x, SolveStatus::Converged, None));
        }
    }
    Ok(rec.finish(x, SolveStatus::MaxIter, None))
}
