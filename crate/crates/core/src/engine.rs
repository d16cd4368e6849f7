//! Deflated fixed-point iterations and their explicit iteration matrices.

use std::fmt;
use std::str::FromStr;

use crate::error::{DfpiError, Result};
use crate::linalg::{add, all_finite, check_len, norm2, sub, svd, DenseMatrix, LinearOperator};
use crate::precond::Preconditioner;
use crate::projector::{ProjectionMode, TroubleSpace};
use crate::recruitment::{BasisAction, StrategyConfig, StrategyKind, StrategyState};

/// Where the projection sits relative to the fixed-point step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DfpiVariant {
    /// Project, then iterate; the projected point is the half-step.
    PreProjection,
    /// Iterate on the deflated residual and correct once at the end.
    FinalCorrection,
    /// Iterate, then project; the plain step is the half-step.
    PostProjection,
    /// Project the initial guess once, then keep updates in the kernel of `Q_R`.
    InitProjection,
}

impl FromStr for DfpiVariant {
    type Err = DfpiError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pre" | "pre-projection" => Ok(Self::PreProjection),
            "final" | "final-correction" => Ok(Self::FinalCorrection),
            "post" | "post-projection" => Ok(Self::PostProjection),
            "init" | "init-projection" => Ok(Self::InitProjection),
            other => Err(DfpiError::InvalidInput(format!(
                "unknown variant '{other}'"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverOptions {
    pub max_iter: usize,
    /// Target for `‖b − Ax‖ / ‖b‖`.
    pub rel_tol: f64,
    pub variant: DfpiVariant,
    /// Record half-step residuals in the trace.
    pub record_halves: bool,
    /// Keep every iterate (half-steps included) in the trace.
    pub keep_iterates: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iter: 1000,
            rel_tol: 1e-8,
            variant: DfpiVariant::PreProjection,
            record_halves: false,
            keep_iterates: false,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iter == 0 {
            return Err(DfpiError::InvalidInput(
                "max_iter must be at least 1".into(),
            ));
        }
        if !(self.rel_tol > 0.0) {
            return Err(DfpiError::InvalidInput("rel_tol must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    MaxIter,
    Breakdown,
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Converged => "converged",
            Self::MaxIter => "max_iter",
            Self::Breakdown => "breakdown",
        })
    }
}

/// One trace line. `half_steps` counts half iterations, so iteration 3.5 is 7.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRecord {
    pub half_steps: usize,
    pub residual: f64,
    pub trouble_size: usize,
    pub event: String,
}

impl TraceRecord {
    pub fn iter(&self) -> f64 {
        self.half_steps as f64 / 2.0
    }

    pub fn is_half(&self) -> bool {
        self.half_steps % 2 == 1
    }

    /// `3` or `3.5`.
    pub fn iter_label(&self) -> String {
        if self.is_half() {
            format!("{}.5", self.half_steps / 2)
        } else {
            format!("{}", self.half_steps / 2)
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverTrace {
    pub records: Vec<TraceRecord>,
    pub status: SolveStatus,
    /// `(half_steps, iterate)` when requested.
    pub iterates: Vec<(usize, Vec<f64>)>,
    pub matvecs: usize,
}

impl Default for SolverTrace {
    fn default() -> Self {
        Self {
            records: Vec::new(),
            status: SolveStatus::MaxIter,
            iterates: Vec::new(),
            matvecs: 0,
        }
    }
}

impl SolverTrace {
    pub fn push(
        &mut self,
        half_steps: usize,
        residual: f64,
        trouble_size: usize,
        event: impl Into<String>,
    ) {
        debug_assert!(self
            .records
            .last()
            .is_none_or(|r| r.half_steps < half_steps));
        self.records.push(TraceRecord {
            half_steps,
            residual,
            trouble_size,
            event: event.into(),
        });
    }

    fn keep(&mut self, enabled: bool, half_steps: usize, x: &[f64]) {
        if enabled {
            self.iterates.push((half_steps, x.to_vec()));
        }
    }

    pub fn final_residual(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.residual)
    }

    /// Residuals at integer iterations, indexed by iteration.
    pub fn full_residuals(&self) -> Vec<(usize, f64)> {
        self.records
            .iter()
            .filter(|r| !r.is_half())
            .map(|r| (r.half_steps / 2, r.residual))
            .collect()
    }

    /// Residuals at half iterations `k + 1/2`, reported as `k`.
    pub fn half_residuals(&self) -> Vec<(usize, f64)> {
        self.records
            .iter()
            .filter(|r| r.is_half())
            .map(|r| (r.half_steps / 2, r.residual))
            .collect()
    }

    /// Largest iteration index reached (half-steps round up).
    pub fn iterations(&self) -> usize {
        self.records.last().map_or(0, |r| r.half_steps.div_ceil(2))
    }

    pub fn peak_trouble_size(&self) -> usize {
        self.records
            .iter()
            .map(|r| r.trouble_size)
            .max()
            .unwrap_or(0)
    }

    /// Iterate recorded at exactly `half_steps`.
    pub fn iterate_at(&self, half_steps: usize) -> Option<&[f64]> {
        self.iterates
            .iter()
            .find(|(h, _)| *h == half_steps)
            .map(|(_, x)| x.as_slice())
    }
}

fn residual(a: &dyn LinearOperator, b: &[f64], x: &[f64]) -> Vec<f64> {
    sub(b, &a.mul(x))
}

/// `x + P⁻¹(b − Ax)`.
pub fn richardson_step(
    x: &[f64],
    a: &dyn LinearOperator,
    b: &[f64],
    p: &Preconditioner,
) -> Result<Vec<f64>> {
    check_len(a.ncols(), x.len())?;
    check_len(a.nrows(), b.len())?;
    let r = residual(a, b, x);
    Ok(add(x, &p.apply(&r)?))
}

/// Outcome of one deflated step.
#[derive(Clone, Debug, PartialEq)]
pub struct DfpiStep {
    pub half: Option<Vec<f64>>,
    pub next: Vec<f64>,
}

/// One step of the chosen variant with a fixed trouble space.
///
/// For `InitProjection` the caller is responsible for `x` already carrying
/// the projected component; for `FinalCorrection` no half-step is produced
/// and [`final_correction`] yields the corrected point.
pub fn dfpi_step(
    x: &[f64],
    a: &dyn LinearOperator,
    b: &[f64],
    p: &Preconditioner,
    ts: &TroubleSpace<'_>,
    variant: DfpiVariant,
) -> Result<DfpiStep> {
    check_len(a.ncols(), x.len())?;
    check_len(a.nrows(), b.len())?;
    check_len(ts.n(), x.len())?;
    let r = residual(a, b, x);
    match variant {
        DfpiVariant::PreProjection => {
            let (coef, c) = ts.correction(&r)?;
            let half = add(x, &c);
            let r_half = sub(&r, &ts.az_times(&coef));
            let next = add(&half, &p.apply(&r_half)?);
            Ok(DfpiStep {
                half: Some(half),
                next,
            })
        }
        DfpiVariant::FinalCorrection => {
            let (coef, _) = ts.correction(&r)?;
            let r_defl = sub(&r, &ts.az_times(&coef));
            Ok(DfpiStep {
                half: None,
                next: add(x, &p.apply(&r_defl)?),
            })
        }
        DfpiVariant::PostProjection => {
            let half = add(x, &p.apply(&r)?);
            let r_half = residual(a, b, &half);
            let (_, c) = ts.correction(&r_half)?;
            let next = add(&half, &c);
            Ok(DfpiStep {
                half: Some(half),
                next,
            })
        }
        DfpiVariant::InitProjection => {
            let d = p.apply(&r)?;
            let (_, c) = ts.correction(&a.mul(&d))?;
            Ok(DfpiStep {
                half: None,
                next: add(x, &sub(&d, &c)),
            })
        }
    }
}

/// `x + Q_R(x^∞ − x)`, computed from the residual.
pub fn final_correction(
    x: &[f64],
    a: &dyn LinearOperator,
    b: &[f64],
    ts: &TroubleSpace<'_>,
) -> Result<Vec<f64>> {
    check_len(a.ncols(), x.len())?;
    let (_, c) = ts.correction(&residual(a, b, x))?;
    Ok(add(x, &c))
}

/// Trouble space handling for [`dfpi_solve`].
pub enum Deflation<'a> {
    /// Plain Richardson.
    None,
    Static(TroubleSpace<'a>),
    /// Space grown from the iteration's increments.
    Dynamic {
        mode: ProjectionMode,
        strategy: StrategyConfig,
    },
}

/// Result of [`dfpi_solve`].
pub struct DfpiOutcome<'a> {
    pub x: Vec<f64>,
    pub trace: SolverTrace,
    /// Trouble space at exit.
    pub space: TroubleSpace<'a>,
    /// Strategy state at exit, for dynamic runs.
    pub strategy: Option<StrategyState>,
}

struct Recruiter {
    config: StrategyConfig,
    state: StrategyState,
}

impl Recruiter {
    fn feed(&mut self, dx: &[f64], ts: &mut TroubleSpace<'_>) -> Result<Vec<String>> {
        let actions = self.state.record_increment(
            dx,
            &self.config,
            ts.operator(),
            ts.preconditioner(),
            ts.basis(),
        )?;
        for action in actions {
            match action {
                BasisAction::Append(v) => ts.append(&v)?,
                BasisAction::DropOldest => {
                    if !ts.is_empty() {
                        ts.drop_oldest()?;
                    }
                }
            }
        }
        let mut events: Vec<String> = self
            .state
            .take_events()
            .iter()
            .map(|e| e.to_string())
            .collect();
        // a boostconv-style append is routine; only report unusual space events
        for e in ts.take_events() {
            let quiet = matches!(e, crate::projector::SpaceEvent::Appended { .. })
                && matches!(
                    self.config.kind,
                    StrategyKind::BoostConv | StrategyKind::BcMw
                );
            if !quiet {
                events.push(e.to_string());
            }
        }
        Ok(events)
    }
}

fn join(events: &[String]) -> String {
    events.join(";")
}

/// Iterates the chosen variant until `‖b − Ax‖ ≤ rel_tol·‖b‖` or `max_iter`.
///
/// When `b = 0` the tolerance is taken relative to the initial residual.
/// Dynamic recruitment feeds each full-step increment to the strategy and
/// applies its basis updates before the next step; it is available for the
/// pre- and post-projection variants.
pub fn dfpi_solve<'a>(
    a: &'a dyn LinearOperator,
    b: &[f64],
    x0: Option<&[f64]>,
    p: &'a Preconditioner,
    deflation: Deflation<'a>,
    opts: &SolverOptions,
) -> Result<DfpiOutcome<'a>> {
    opts.validate()?;
    let n = a.nrows();
    if a.ncols() != n {
        return Err(DfpiError::InvalidMatrix("operator must be square".into()));
    }
    check_len(n, b.len())?;
    check_len(n, p.dim())?;
    let x0 = match x0 {
        Some(x) => {
            check_len(n, x.len())?;
            x.to_vec()
        }
        None => vec![0.0; n],
    };
    if !all_finite(b) || !all_finite(&x0) {
        return Err(DfpiError::NonFinite);
    }

    let (mut ts, mut recruiter) = match deflation {
        Deflation::None => (TroubleSpace::empty(a, p, ProjectionMode::Galerkin)?, None),
        Deflation::Static(ts) => {
            check_len(n, ts.n())?;
            (ts, None)
        }
        Deflation::Dynamic { mode, strategy } => {
            strategy.validate()?;
            if matches!(
                opts.variant,
                DfpiVariant::FinalCorrection | DfpiVariant::InitProjection
            ) {
                return Err(DfpiError::InvalidInput(
                    "dynamic recruitment requires the pre- or post-projection variant".into(),
                ));
            }
            (
                TroubleSpace::empty(a, p, mode)?,
                Some(Recruiter {
                    config: strategy,
                    state: StrategyState::new(),
                }),
            )
        }
    };
    ts.take_events();

    let mut trace = SolverTrace::default();
    let mut x = x0;
    let mut r = residual(a, b, &x);
    trace.matvecs += 1;
    let bn = norm2(b);
    let scale = if bn > 0.0 { bn } else { norm2(&r) };
    let tol = opts.rel_tol * scale;

    match opts.variant {
        DfpiVariant::PreProjection | DfpiVariant::PostProjection => {
            let pre = opts.variant == DfpiVariant::PreProjection;
            let mut rn = norm2(&r);
            trace.push(0, rn, ts.dim(), "");
            trace.keep(opts.keep_iterates, 0, &x);
            if !rn.is_finite() {
                trace.status = SolveStatus::Breakdown;
            } else if rn <= tol {
                trace.status = SolveStatus::Converged;
            } else {
                let mut status = SolveStatus::MaxIter;
                for k in 0..opts.max_iter {
                    let h = 2 * k + 1;
                    let (x_half, r_half) = if pre {
                        let (coef, c) = ts.correction(&r)?;
                        (add(&x, &c), sub(&r, &ts.az_times(&coef)))
                    } else {
                        let xh = add(&x, &p.solve(&r));
                        trace.matvecs += 1;
                        let rh = residual(a, b, &xh);
                        (xh, rh)
                    };
                    let rhn = norm2(&r_half);
                    if !rhn.is_finite() {
                        status = SolveStatus::Breakdown;
                        break;
                    }
                    trace.keep(opts.keep_iterates, h, &x_half);
                    if opts.record_halves || rhn <= tol {
                        trace.push(h, rhn, ts.dim(), "");
                    }
                    if rhn <= tol {
                        x = x_half;
                        status = SolveStatus::Converged;
                        break;
                    }
                    let (x_new, r_new) = if pre {
                        let xn = add(&x_half, &p.solve(&r_half));
                        trace.matvecs += 1;
                        let rn = residual(a, b, &xn);
                        (xn, rn)
                    } else {
                        let (coef, c) = ts.correction(&r_half)?;
                        (add(&x_half, &c), sub(&r_half, &ts.az_times(&coef)))
                    };
                    rn = norm2(&r_new);
                    if !rn.is_finite() || !all_finite(&x_new) {
                        status = SolveStatus::Breakdown;
                        break;
                    }
                    let events = match recruiter.as_mut() {
                        Some(rec) => rec.feed(&sub(&x_new, &x), &mut ts)?,
                        None => Vec::new(),
                    };
                    x = x_new;
                    r = r_new;
                    trace.push(h + 1, rn, ts.dim(), join(&events));
                    trace.keep(opts.keep_iterates, h + 1, &x);
                    if rn <= tol {
                        status = SolveStatus::Converged;
                        break;
                    }
                }
                trace.status = status;
            }
        }
        DfpiVariant::FinalCorrection => {
            let mut status = SolveStatus::MaxIter;
            for k in 0..=opts.max_iter {
                let (coef, c) = ts.correction(&r)?;
                let r_defl = sub(&r, &ts.az_times(&coef));
                let rdn = norm2(&r_defl);
                if !rdn.is_finite() {
                    status = SolveStatus::Breakdown;
                    break;
                }
                let corrected = add(&x, &c);
                trace.push(2 * k, rdn, ts.dim(), "");
                trace.keep(opts.keep_iterates, 2 * k, &corrected);
                if rdn <= tol || k == opts.max_iter {
                    if rdn <= tol {
                        status = SolveStatus::Converged;
                    }
                    x = corrected;
                    break;
                }
                let x_new = add(&x, &p.solve(&r_defl));
                trace.matvecs += 1;
                let r_new = residual(a, b, &x_new);
                if !all_finite(&r_new) {
                    status = SolveStatus::Breakdown;
                    x = corrected;
                    break;
                }
                x = x_new;
                r = r_new;
            }
            trace.status = status;
        }
        DfpiVariant::InitProjection => {
            let (coef, c) = ts.correction(&r)?;
            x = add(&x, &c);
            r = sub(&r, &ts.az_times(&coef));
            let mut rn = norm2(&r);
            trace.push(0, rn, ts.dim(), "");
            trace.keep(opts.keep_iterates, 0, &x);
            let mut status = SolveStatus::MaxIter;
            if !rn.is_finite() {
                status = SolveStatus::Breakdown;
            } else if rn <= tol {
                status = SolveStatus::Converged;
            } else {
                for k in 0..opts.max_iter {
                    let d = p.solve(&r);
                    let ad = a.mul(&d);
                    let (_, c) = ts.correction(&ad)?;
                    let x_new = add(&x, &sub(&d, &c));
                    let r_new = residual(a, b, &x_new);
                    trace.matvecs += 2;
                    rn = norm2(&r_new);
                    if !rn.is_finite() || !all_finite(&x_new) {
                        status = SolveStatus::Breakdown;
                        break;
                    }
                    x = x_new;
                    r = r_new;
                    trace.push(2 * k + 2, rn, ts.dim(), "");
                    trace.keep(opts.keep_iterates, 2 * k + 2, &x);
                    if rn <= tol {
                        status = SolveStatus::Converged;
                        break;
                    }
                }
            }
            trace.status = status;
        }
    }

    Ok(DfpiOutcome {
        x,
        trace,
        space: ts,
        strategy: recruiter.map(|r| r.state),
    })
}

/// Explicit `N = Q_R + P⁻¹A(Id − Q_R)` and `Id − N = (Id − P⁻¹A)(Id − Q_R)`.
pub fn build_iteration_matrix_n(
    a: &DenseMatrix,
    p: &Preconditioner,
    ts: &TroubleSpace<'_>,
) -> Result<(DenseMatrix, DenseMatrix)> {
    let n = a.rows();
    let q = ts.explicit_projector(a)?;
    let pa = p.solve_dense(a)?;
    let id = DenseMatrix::identity(n);
    let nmat = q.add(&pa.matmul(&id.sub(&q)?)?)?;
    let id_minus = id.sub(&nmat)?;
    Ok((nmat, id_minus))
}

/// Outcome of [`check_n_nonsingular`].
#[derive(Clone, Debug, PartialEq)]
pub struct NonsingularityReport {
    /// `N` is nonsingular by one of the two sufficient conditions.
    pub ok: bool,
    /// `‖(Id − Π_Z)P⁻¹AZ‖₂` over an orthonormal basis of `Z`.
    pub invariance_defect: f64,
    pub invariant: bool,
    /// `σ_min / σ_max` of `YᵀPZ` (1 for an empty space).
    pub core_sv_ratio: f64,
    pub core_nonsingular: bool,
    /// Unit vector with `N w ≈ 0` when `N` is found singular.
    pub witness: Option<Vec<f64>>,
    /// `σ_min(N) / σ_max(N)`.
    pub n_sv_ratio: f64,
}

/// Checks the two sufficient conditions for `N` to be nonsingular: `Z`
/// invariant under `P⁻¹A`, or `YᵀPZ` nonsingular.
pub fn check_n_nonsingular(
    a: &DenseMatrix,
    p: &Preconditioner,
    ts: &TroubleSpace<'_>,
) -> Result<NonsingularityReport> {
    let z = ts.basis();
    let y = ts.test_basis();
    let pa = p.solve_dense(a)?;
    let invariance_defect = crate::spectral::invariance_measure_dense(&pa, z);
    let scale = pa.norm2().max(f64::MIN_POSITIVE);
    let invariant = invariance_defect <= 1e-12 * scale.max(1.0);

    let core_sv_ratio = if z.is_empty() {
        1.0
    } else {
        let pz: Vec<Vec<f64>> = z
            .iter()
            .map(|c| p.apply_forward(c))
            .collect::<Result<_>>()?;
        let m = z.len();
        let core = DenseMatrix::from_fn(m, m, |i, j| crate::linalg::dot(&y[i], &pz[j]));
        let s = svd(&core).singular_values;
        if s[0] > 0.0 {
            s[m - 1] / s[0]
        } else {
            0.0
        }
    };
    let core_nonsingular = core_sv_ratio > 1e-12;

    let (nmat, _) = build_iteration_matrix_n(a, p, ts)?;
    let d = svd(&nmat);
    let k = d.singular_values.len();
    let n_sv_ratio = if k == 0 || d.singular_values[0] == 0.0 {
        0.0
    } else {
        d.singular_values[k - 1] / d.singular_values[0]
    };
    let witness = if n_sv_ratio <= 1e-12 && k > 0 {
        Some(d.v.column(k - 1))
    } else {
        None
    };

    Ok(NonsingularityReport {
        ok: invariant || core_nonsingular,
        invariance_defect,
        invariant,
        core_sv_ratio,
        core_nonsingular,
        witness,
        n_sv_ratio,
    })
}
