//! Strategies that decide which increments enter the trouble space.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{DfpiError, Result};
use crate::linalg::{dense_eig, dot, norm2, orthogonalize_against, DenseMatrix, LinearOperator};
use crate::precond::Preconditioner;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StrategyKind {
    /// Every increment is appended.
    BoostConv,
    /// Moving window over the latest increments.
    BcMw,
    /// Increments gather in a temporary space promoted once it is stable.
    Aaos,
    /// Like `Aaos`, but the first stable space is discarded and refilled.
    Tss,
    /// Stable temporary space filtered through Rayleigh-Ritz.
    Rr,
}

impl FromStr for StrategyKind {
    type Err = DfpiError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "boostconv" => Ok(Self::BoostConv),
            "bc-mw" | "bc_mw" => Ok(Self::BcMw),
            "aaos" => Ok(Self::Aaos),
            "tss" => Ok(Self::Tss),
            "rr" => Ok(Self::Rr),
            other => Err(DfpiError::InvalidInput(format!(
                "unknown recruitment strategy '{other}'"
            ))),
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::BoostConv => "boostconv",
            Self::BcMw => "bc-mw",
            Self::Aaos => "aaos",
            Self::Tss => "tss",
            Self::Rr => "rr",
        })
    }
}

pub const DEFAULT_STAB_TOL: f64 = 5e-2;
pub const DEFAULT_RR_TOL: f64 = 1e-2;
pub const DEFAULT_TEMP_CAP: usize = 30;

#[derive(Clone, Debug, PartialEq)]
pub struct StrategyConfig {
    pub kind: StrategyKind,
    /// Window size for `BcMw`.
    pub window: usize,
    pub stab_tol: f64,
    pub rr_tol: f64,
    /// Temporary-space size that forces a promotion.
    pub temp_cap: usize,
}

impl StrategyConfig {
    pub fn new(kind: StrategyKind) -> Self {
        Self {
            kind,
            window: 10,
            stab_tol: DEFAULT_STAB_TOL,
            rr_tol: DEFAULT_RR_TOL,
            temp_cap: DEFAULT_TEMP_CAP,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind == StrategyKind::BcMw && self.window == 0 {
            return Err(DfpiError::InvalidInput("window must be at least 1".into()));
        }
        if !(self.stab_tol > 0.0) || !(self.rr_tol > 0.0) {
            return Err(DfpiError::InvalidInput(
                "stab_tol and rr_tol must be positive".into(),
            ));
        }
        if self.temp_cap == 0 {
            return Err(DfpiError::InvalidInput(
                "temp_cap must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Change requested of the driving trouble space.
#[derive(Clone, Debug, PartialEq)]
pub enum BasisAction {
    Append(Vec<f64>),
    DropOldest,
}

#[derive(Clone, Debug, PartialEq)]
pub enum RecruitEvent {
    ZeroIncrement,
    /// Temporary space grew to `size`.
    Grow {
        size: usize,
    },
    Stable {
        size: usize,
    },
    Promote {
        count: usize,
    },
    /// First stability detection of a two-stage run; temporary space emptied.
    Discard {
        size: usize,
    },
    /// Temporary space hit the cap before stability.
    Cap {
        size: usize,
    },
    Ritz {
        approved: usize,
        candidates: usize,
    },
}

impl fmt::Display for RecruitEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::ZeroIncrement => f.write_str("zero-increment"),
            Self::Grow { size } => write!(f, "temp:{size}"),
            Self::Stable { size } => write!(f, "stable:{size}"),
            Self::Promote { count } => write!(f, "promote:{count}"),
            Self::Discard { size } => write!(f, "discard:{size}"),
            Self::Cap { size } => write!(f, "cap:{size}"),
            Self::Ritz {
                approved,
                candidates,
            } => write!(f, "ritz:{approved}/{candidates}"),
        }
    }
}

/// Per-solve state of a strategy.
#[derive(Clone, Debug, Default)]
pub struct StrategyState {
    /// Orthonormal basis of the temporary space.
    temp: Vec<Vec<f64>>,
    /// The increments behind `temp`, in arrival order.
    temp_raw: Vec<Vec<f64>>,
    stage: u8,
    events: Vec<RecruitEvent>,
    promotions: Vec<usize>,
    steps: usize,
}

/// True iff `‖(Id − Π)v‖ ≤ stab_tol·‖v‖` for the orthogonal projector `Π`
/// onto `basis`. A zero vector counts as stable.
pub fn stability_test(basis: &[Vec<f64>], v: &[f64], stab_tol: f64) -> bool {
    let nv = norm2(v);
    if nv == 0.0 {
        return true;
    }
    let (res, _) = orthogonalize_against(basis, v);
    norm2(&res) <= stab_tol * nv
}

impl StrategyState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn temp_basis(&self) -> &[Vec<f64>] {
        &self.temp
    }

    pub fn temp_size(&self) -> usize {
        self.temp.len()
    }

    pub fn stage(&self) -> u8 {
        self.stage
    }

    pub fn events(&self) -> &[RecruitEvent] {
        &self.events
    }

    pub fn take_events(&mut self) -> Vec<RecruitEvent> {
        std::mem::take(&mut self.events)
    }

    /// 1-based increment counts at which a promotion happened.
    pub fn promotions(&self) -> &[usize] {
        &self.promotions
    }

    fn push_temp(&mut self, dx: &[f64]) {
        let nv = norm2(dx);
        let (res, _) = orthogonalize_against(&self.temp, dx);
        let rn = norm2(&res);
        if rn > crate::projector::DEFAULT_DROP_TOL * nv {
            self.temp.push(res.iter().map(|x| x / rn).collect());
        }
        self.temp_raw.push(dx.to_vec());
    }

    fn clear_temp(&mut self) -> Vec<Vec<f64>> {
        self.temp.clear();
        std::mem::take(&mut self.temp_raw)
    }

    fn promote_all(&mut self) -> Vec<BasisAction> {
        let raw = self.clear_temp();
        self.events.push(RecruitEvent::Promote { count: raw.len() });
        self.promotions.push(self.steps);
        raw.into_iter().map(BasisAction::Append).collect()
    }

    /// Ritz extraction on the trouble space widened by the temporary space.
    /// The deflated iteration's increments carry a component inside the
    /// trouble space, so the eigenvectors they approximate only appear in the
    /// sum of both spaces. Candidates already inside the trouble space are skipped.
    fn promote_ritz(
        &mut self,
        config: &StrategyConfig,
        a: &dyn LinearOperator,
        p: &Preconditioner,
        current: &[Vec<f64>],
    ) -> Result<Vec<BasisAction>> {
        let mut basis = current.to_vec();
        for t in &self.temp {
            let (res, _) = orthogonalize_against(&basis, t);
            let rn = norm2(&res);
            if rn > crate::projector::DEFAULT_DROP_TOL {
                basis.push(res.iter().map(|x| x / rn).collect());
            }
        }
        let mut ritz = rayleigh_ritz_extract(&basis, a, p, config.rr_tol)?;
        ritz.candidates = basis.len() - current.len();
        if !current.is_empty() {
            ritz.approved
                .retain(|v| !stability_test(current, v, config.stab_tol));
        }
        self.events.push(RecruitEvent::Ritz {
            approved: ritz.approved.len(),
            candidates: ritz.candidates,
        });
        self.clear_temp();
        if !ritz.approved.is_empty() {
            self.events.push(RecruitEvent::Promote {
                count: ritz.approved.len(),
            });
            self.promotions.push(self.steps);
        }
        Ok(ritz.approved.into_iter().map(BasisAction::Append).collect())
    }

    /// Feeds the latest increment `dx = x⁽ᵏ⁾ − x⁽ᵏ⁻¹⁾` and returns the basis
    /// updates to apply before the next step.
    pub fn record_increment(
        &mut self,
        dx: &[f64],
        config: &StrategyConfig,
        a: &dyn LinearOperator,
        p: &Preconditioner,
        current: &[Vec<f64>],
    ) -> Result<Vec<BasisAction>> {
        self.steps += 1;
        if norm2(dx) == 0.0 {
            self.events.push(RecruitEvent::ZeroIncrement);
        }
        match config.kind {
            StrategyKind::BoostConv => Ok(vec![BasisAction::Append(dx.to_vec())]),
            StrategyKind::BcMw => {
                let mut actions = Vec::new();
                if current.len() >= config.window {
                    actions.push(BasisAction::DropOldest);
                }
                actions.push(BasisAction::Append(dx.to_vec()));
                Ok(actions)
            }
            StrategyKind::Aaos | StrategyKind::Tss | StrategyKind::Rr => {
                let stable =
                    !self.temp.is_empty() && stability_test(&self.temp, dx, config.stab_tol);
                if stable {
                    self.events.push(RecruitEvent::Stable {
                        size: self.temp.len(),
                    });
                    if config.kind == StrategyKind::Tss && self.stage == 0 {
                        let size = self.temp.len();
                        self.clear_temp();
                        self.stage = 1;
                        self.events.push(RecruitEvent::Discard { size });
                        return Ok(Vec::new());
                    }
                    // the triggering increment completes the space
                    self.push_temp(dx);
                    if config.kind == StrategyKind::Rr {
                        return self.promote_ritz(config, a, p, current);
                    }
                    self.stage = 0;
                    return Ok(self.promote_all());
                }
                self.push_temp(dx);
                self.events.push(RecruitEvent::Grow {
                    size: self.temp.len(),
                });
                if self.temp_raw.len() >= config.temp_cap {
                    self.events.push(RecruitEvent::Cap {
                        size: self.temp.len(),
                    });
                    return match config.kind {
                        StrategyKind::Tss if self.stage == 0 => {
                            let size = self.temp.len();
                            self.clear_temp();
                            self.stage = 1;
                            self.events.push(RecruitEvent::Discard { size });
                            Ok(Vec::new())
                        }
                        StrategyKind::Rr => self.promote_ritz(config, a, p, current),
                        _ => {
                            self.stage = 0;
                            Ok(self.promote_all())
                        }
                    };
                }
                Ok(Vec::new())
            }
        }
    }
}

/// Ritz vectors accepted by [`rayleigh_ritz_extract`].
#[derive(Clone, Debug, Default)]
pub struct RitzExtraction {
    pub approved: Vec<Vec<f64>>,
    /// Ritz values of the approved vectors, as eigenvalues of `P⁻¹A`
    /// (one entry per complex pair member).
    pub values: Vec<Complex64>,
    pub candidates: usize,
}

/// Ritz pairs of `B = P⁻¹A` on the span of the orthonormal `basis`, keeping
/// those with `‖Bv − θv‖ ≤ rr_tol·|θ|·‖v‖`. A complex pair is kept or
/// rejected as a whole and returned as its real and imaginary parts.
pub fn rayleigh_ritz_extract(
    basis: &[Vec<f64>],
    a: &dyn LinearOperator,
    p: &Preconditioner,
    rr_tol: f64,
) -> Result<RitzExtraction> {
    let k = basis.len();
    if k == 0 {
        return Ok(RitzExtraction::default());
    }
    let n = basis[0].len();
    let bq: Vec<Vec<f64>> = basis.iter().map(|q| p.solve(&a.mul(q))).collect();
    let h = DenseMatrix::from_fn(k, k, |i, j| dot(&basis[i], &bq[j]));
    let dec = dense_eig(&h, true)?;
    let vectors = match dec.vectors {
        Some(v) => v,
        None => {
            return Ok(RitzExtraction {
                candidates: k,
                ..Default::default()
            })
        }
    };
    let lift = |cols: &[Vec<f64>], s: &[Complex64]| -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        for (c, sj) in cols.iter().zip(s) {
            for (o, x) in out.iter_mut().zip(c) {
                *o += sj * x;
            }
        }
        out
    };
    let mut result = RitzExtraction {
        candidates: k,
        ..Default::default()
    };
    for (theta, s) in dec.values.iter().zip(&vectors) {
        if theta.im < 0.0 {
            continue;
        }
        let v = lift(basis, s);
        let bv = lift(&bq, s);
        let res: f64 = bv
            .iter()
            .zip(&v)
            .map(|(b, x)| (b - theta * x).norm_sqr())
            .sum::<f64>()
            .sqrt();
        let vn: f64 = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if res > rr_tol * theta.norm() * vn {
            continue;
        }
        if theta.im == 0.0 {
            result.approved.push(v.iter().map(|x| x.re).collect());
            result.values.push(*theta);
        } else {
            result.approved.push(v.iter().map(|x| x.re).collect());
            result.approved.push(v.iter().map(|x| x.im).collect());
            result.values.push(*theta);
            result.values.push(theta.conj());
        }
    }
    Ok(result)
}
