//! Petrov-Galerkin projector `Q_R = Z (YᵀAZ)⁻¹ YᵀA` over a trouble space.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use crate::error::{DfpiError, Result};
use crate::linalg::{
    check_len, combine, dot, factor_small, mgs_orthonormalize, norm2, orthogonalize_against,
    DenseMatrix, LinearOperator, SmallFactor,
};
use crate::precond::Preconditioner;

/// Default relative tolerance under which a new direction counts as dependent.
pub const DEFAULT_DROP_TOL: f64 = 1e-10;

/// How the test basis `Y` is derived from `Z`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProjectionMode {
    /// `Y = Z`.
    Galerkin,
    /// `Y = AZ`: minimizes `‖A e‖` over the correction.
    LsqA,
    /// `Y = P⁻ᵀP⁻¹AZ`: minimizes `‖P⁻¹A e‖`.
    LsqPa,
}

impl FromStr for ProjectionMode {
    type Err = DfpiError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "galerkin" => Ok(Self::Galerkin),
            "lsq-a" | "lsq_a" => Ok(Self::LsqA),
            "lsq-pa" | "lsq_pa" => Ok(Self::LsqPa),
            other => Err(DfpiError::InvalidInput(format!(
                "unknown projection '{other}'"
            ))),
        }
    }
}

impl fmt::Display for ProjectionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Galerkin => "galerkin",
            Self::LsqA => "lsq-a",
            Self::LsqPa => "lsq-pa",
        })
    }
}

/// Basis changes worth reporting.
#[derive(Clone, Debug, PartialEq)]
pub enum SpaceEvent {
    Appended {
        size: usize,
    },
    /// Direction already (numerically) inside the space.
    Dependent,
    DroppedOldest {
        size: usize,
    },
    /// Columns removed because `YᵀAZ` lost rank.
    RankDrop {
        removed: usize,
        size: usize,
    },
}

impl fmt::Display for SpaceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Appended { size } => write!(f, "append:{size}"),
            Self::Dependent => f.write_str("dependent"),
            Self::DroppedOldest { size } => write!(f, "drop-oldest:{size}"),
            Self::RankDrop { removed, size } => write!(f, "rank-drop:{removed}:{size}"),
        }
    }
}

/// Trouble space `Z` together with `W = AZ`, the test basis and the factored core.
#[derive(Clone)]
pub struct TroubleSpace<'a> {
    a: &'a dyn LinearOperator,
    p: &'a Preconditioner,
    mode: ProjectionMode,
    capacity: Option<usize>,
    drop_tol: f64,
    /// Accepted directions as supplied, oldest first; `z` is their MGS basis.
    raw: VecDeque<Vec<f64>>,
    z: Vec<Vec<f64>>,
    w: Vec<Vec<f64>>,
    y: Vec<Vec<f64>>,
    core: SmallFactor,
    events: Vec<SpaceEvent>,
}

impl fmt::Debug for TroubleSpace<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TroubleSpace")
            .field("mode", &self.mode)
            .field("dim", &self.z.len())
            .field("capacity", &self.capacity)
            .finish()
    }
}

impl<'a> TroubleSpace<'a> {
    /// Empty space: `Q_R = 0`.
    pub fn empty(
        a: &'a dyn LinearOperator,
        p: &'a Preconditioner,
        mode: ProjectionMode,
    ) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(DfpiError::InvalidMatrix("operator must be square".into()));
        }
        check_len(a.nrows(), p.dim())?;
        Ok(Self {
            a,
            p,
            mode,
            capacity: None,
            drop_tol: DEFAULT_DROP_TOL,
            raw: VecDeque::new(),
            z: Vec::new(),
            w: Vec::new(),
            y: Vec::new(),
            core: factor_small(&DenseMatrix::zeros(0, 0))?,
            events: Vec::new(),
        })
    }

    /// Builds from arbitrary (possibly dependent) directions.
    pub fn build(
        vectors: &[Vec<f64>],
        mode: ProjectionMode,
        a: &'a dyn LinearOperator,
        p: &'a Preconditioner,
        capacity: Option<usize>,
    ) -> Result<Self> {
        let mut ts = Self::empty(a, p, mode)?;
        ts.capacity = capacity;
        for v in vectors {
            check_len(a.nrows(), v.len())?;
        }
        let cap = capacity.unwrap_or(usize::MAX);
        ts.raw = vectors.iter().filter(|v| norm2(v) > 0.0).cloned().collect();
        if vectors.len() > ts.raw.len() {
            ts.events.push(SpaceEvent::Dependent);
        }
        ts.rebuild()?;
        if ts.z.len() > cap {
            return Err(DfpiError::CapacityExceeded { capacity: cap });
        }
        Ok(ts)
    }

    pub fn with_drop_tol(mut self, drop_tol: f64) -> Self {
        self.drop_tol = drop_tol;
        self
    }

    pub fn set_capacity(&mut self, capacity: Option<usize>) {
        self.capacity = capacity;
    }

    pub fn mode(&self) -> ProjectionMode {
        self.mode
    }

    pub fn dim(&self) -> usize {
        self.z.len()
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    pub fn capacity(&self) -> Option<usize> {
        self.capacity
    }

    /// Orthonormal basis of `Z`.
    pub fn basis(&self) -> &[Vec<f64>] {
        &self.z
    }

    /// Cached `AZ`.
    pub fn az(&self) -> &[Vec<f64>] {
        &self.w
    }

    pub fn test_basis(&self) -> &[Vec<f64>] {
        &self.y
    }

    pub fn events(&self) -> &[SpaceEvent] {
        &self.events
    }

    /// Removes and returns the events logged so far.
    pub fn take_events(&mut self) -> Vec<SpaceEvent> {
        std::mem::take(&mut self.events)
    }

    pub fn operator(&self) -> &'a dyn LinearOperator {
        self.a
    }

    pub fn preconditioner(&self) -> &'a Preconditioner {
        self.p
    }

    fn test_vector(&self, az: &[f64], z: &[f64]) -> Vec<f64> {
        match self.mode {
            ProjectionMode::Galerkin => z.to_vec(),
            ProjectionMode::LsqA => az.to_vec(),
            ProjectionMode::LsqPa => self.p.solve_transpose(&self.p.solve(az)),
        }
    }

    fn refactor(&mut self) -> Result<()> {
        let m = self.z.len();
        let g = DenseMatrix::from_fn(m, m, |i, j| dot(&self.y[i], &self.w[j]));
        self.core = factor_small(&g)?;
        Ok(())
    }

    // Z = mgs(raw); drops dependent raw vectors and columns that leave YᵀAZ singular.
    fn rebuild(&mut self) -> Result<()> {
        loop {
            self.z.clear();
            self.w.clear();
            self.y.clear();
            if self.raw.is_empty() {
                return self.refactor();
            }
            let raw: Vec<Vec<f64>> = self.raw.iter().cloned().collect();
            let out = mgs_orthonormalize(&raw, self.drop_tol)?;
            if !out.dropped.is_empty() {
                for &k in out.dropped.iter().rev() {
                    self.raw.remove(k);
                }
                self.events.push(SpaceEvent::Dependent);
            }
            for q in out.basis {
                let aq = self.a.mul(&q);
                let yq = self.test_vector(&aq, &q);
                self.z.push(q);
                self.w.push(aq);
                self.y.push(yq);
            }
            self.refactor()?;
            if !self.core.is_deficient() {
                return Ok(());
            }
            let mut bad = self.core.deficient_columns();
            bad.sort_unstable();
            for &k in bad.iter().rev() {
                self.raw.remove(k);
            }
            self.events.push(SpaceEvent::RankDrop {
                removed: bad.len(),
                size: self.raw.len(),
            });
        }
    }

    /// Coefficients `G⁻¹Yᵀr` and the correction `c = Z·coef`, i.e. `Q_R e`
    /// for the error `e` whose residual is `r`.
    pub fn correction(&self, r: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        check_len(self.n(), r.len())?;
        if self.z.is_empty() {
            return Ok((Vec::new(), vec![0.0; self.n()]));
        }
        let rhs: Vec<f64> = self.y.iter().map(|y| dot(y, r)).collect();
        let coef = self.core.solve(&rhs)?;
        let c = combine(&self.z, &coef, self.n());
        Ok((coef, c))
    }

    /// `W·coef = A·Z·coef` without a matvec.
    pub fn az_times(&self, coef: &[f64]) -> Vec<f64> {
        combine(&self.w, coef, self.n())
    }

    /// `Q_R v` for an arbitrary vector (one matvec).
    pub fn apply_qr(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n(), v.len())?;
        Ok(self.correction(&self.a.mul(v))?.1)
    }

    /// `(Id − Q_R) e` given `e` and its image `A e`.
    pub fn apply_id_minus_qr(&self, e: &[f64], ae: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n(), e.len())?;
        let (_, c) = self.correction(ae)?;
        Ok(e.iter().zip(&c).map(|(x, y)| x - y).collect())
    }

    /// Adds a direction. A direction already in the span is logged and ignored.
    pub fn append(&mut self, v: &[f64]) -> Result<()> {
        check_len(self.n(), v.len())?;
        let nv = norm2(v);
        let (res, _) = orthogonalize_against(&self.z, v);
        let rn = norm2(&res);
        if nv == 0.0 || rn <= self.drop_tol * nv {
            self.events.push(SpaceEvent::Dependent);
            return Ok(());
        }
        if let Some(cap) = self.capacity {
            if self.z.len() >= cap {
                return Err(DfpiError::CapacityExceeded { capacity: cap });
            }
        }
        let q: Vec<f64> = res.iter().map(|x| x / rn).collect();
        let aq = self.a.mul(&q);
        let yq = self.test_vector(&aq, &q);
        self.raw.push_back(v.to_vec());
        self.z.push(q);
        self.w.push(aq);
        self.y.push(yq);
        self.refactor()?;
        if self.core.is_deficient() {
            self.raw.pop_back();
            self.z.pop();
            self.w.pop();
            self.y.pop();
            self.refactor()?;
            self.events.push(SpaceEvent::RankDrop {
                removed: 1,
                size: self.z.len(),
            });
            return Ok(());
        }
        self.events
            .push(SpaceEvent::Appended { size: self.z.len() });
        Ok(())
    }

    /// Removes the earliest accepted direction and re-orthonormalizes the rest.
    pub fn drop_oldest(&mut self) -> Result<()> {
        if self.raw.pop_front().is_none() {
            return Err(DfpiError::EmptySpace);
        }
        self.rebuild()?;
        self.events
            .push(SpaceEvent::DroppedOldest { size: self.z.len() });
        Ok(())
    }

    /// Dense `Q_R` for a dense copy of the operator.
    pub fn explicit_projector(&self, a: &DenseMatrix) -> Result<DenseMatrix> {
        let n = self.n();
        if a.rows() != n || a.cols() != n {
            return Err(DfpiError::DimensionMismatch {
                expected: n,
                found: a.rows(),
            });
        }
        let mut q = DenseMatrix::zeros(n, n);
        if self.z.is_empty() {
            return Ok(q);
        }
        for j in 0..n {
            let (_, c) = self.correction(&a.column(j))?;
            for (i, ci) in c.iter().enumerate() {
                q[(i, j)] = *ci;
            }
        }
        Ok(q)
    }
}
