//! Model problems and Matrix Market I/O.

use std::fmt::Write as _;
use std::ops::Range;
use std::path::Path;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{DfpiError, Result};
use crate::linalg::{DenseMatrix, LinearOperator, SparseMatrix};

/// Grid data of a 1-D problem.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridMeta {
    pub n: usize,
    pub h: f64,
    pub peclet: f64,
}

/// Upwind convection-diffusion on (0, 1) with `n` interior points, scaled by `h²`:
/// row `i` is `(−1 − h·pe, 2 + h·pe, −1)`.
pub fn gen_cd1d(n: usize, peclet: f64) -> Result<(SparseMatrix, GridMeta)> {
    if n < 2 {
        return Err(DfpiError::InvalidInput("cd1d needs n >= 2".into()));
    }
    if !(peclet >= 0.0) || !peclet.is_finite() {
        return Err(DfpiError::InvalidInput(
            "peclet must be finite and nonnegative".into(),
        ));
    }
    let h = 1.0 / (n as f64 + 1.0);
    let c = h * peclet;
    let mut t = Vec::with_capacity(3 * n);
    for i in 0..n {
        if i > 0 {
            t.push((i, i - 1, -1.0 - c));
        }
        t.push((i, i, 2.0 + c));
        if i + 1 < n {
            t.push((i, i + 1, -1.0));
        }
    }
    Ok((
        SparseMatrix::from_triplets(n, n, &t)?,
        GridMeta { n, h, peclet },
    ))
}

/// 5-point Laplacian on an `nx × ny` interior grid (diagonal 4), row-major numbering.
pub fn gen_laplace2d(nx: usize, ny: usize) -> Result<SparseMatrix> {
    if nx == 0 || ny == 0 || nx * ny < 2 {
        return Err(DfpiError::InvalidInput(
            "laplace2d needs at least two unknowns".into(),
        ));
    }
    let n = nx * ny;
    let mut t = Vec::with_capacity(5 * n);
    for j in 0..ny {
        for i in 0..nx {
            let k = j * nx + i;
            if j > 0 {
                t.push((k, k - nx, -1.0));
            }
            if i > 0 {
                t.push((k, k - 1, -1.0));
            }
            t.push((k, k, 4.0));
            if i + 1 < nx {
                t.push((k, k + 1, -1.0));
            }
            if j + 1 < ny {
                t.push((k, k + nx, -1.0));
            }
        }
    }
    SparseMatrix::from_triplets(n, n, &t)
}

/// `V` close to the identity with `κ₂(V) ≤ cond_cap`.
pub fn near_identity_basis(n: usize, cond_cap: f64, rng: &mut ChaCha8Rng) -> Result<DenseMatrix> {
    if !(cond_cap >= 1.0) {
        return Err(DfpiError::InvalidInput(
            "condition cap must be at least 1".into(),
        ));
    }
    let r = DenseMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    // ‖εR‖₂ ≤ t keeps the singular values of I + εR in [1 − t, 1 + t]
    let t = 0.999 * (cond_cap - 1.0) / (cond_cap + 1.0);
    let rn = r.norm2();
    let eps = if rn > 0.0 { t / rn } else { 0.0 };
    Ok(DenseMatrix::identity(n)
        .add(&r.scale(eps))
        .expect("same shape"))
}

/// A prescribed-spectrum matrix `V·D·V⁻¹` with its basis.
#[derive(Clone, Debug)]
pub struct PrescribedMatrix {
    pub matrix: DenseMatrix,
    pub basis: DenseMatrix,
    /// Column ranges of `basis` spanning each real invariant subspace, with
    /// the eigenvalue(s) it carries (a range of two holds a conjugate pair).
    pub blocks: Vec<(Range<usize>, Complex64)>,
}

impl PrescribedMatrix {
    /// Columns spanning the invariant subspace of the listed blocks.
    pub fn invariant_columns(&self, blocks: &[usize]) -> Vec<Vec<f64>> {
        blocks
            .iter()
            .flat_map(|&b| self.blocks[b].0.clone().map(|j| self.basis.column(j)))
            .collect()
    }
}

fn conjugate_blocks(spectrum: &[Complex64]) -> Result<Vec<(f64, f64)>> {
    // real entries give (re, 0); pairs give (re, |im|) once
    let mut used = vec![false; spectrum.len()];
    let mut out = Vec::new();
    for i in 0..spectrum.len() {
        if used[i] {
            continue;
        }
        let l = spectrum[i];
        if !l.re.is_finite() || !l.im.is_finite() {
            return Err(DfpiError::NonFinite);
        }
        used[i] = true;
        if l.im == 0.0 {
            out.push((l.re, 0.0));
            continue;
        }
        let partner = (0..spectrum.len()).find(|&j| !used[j] && spectrum[j] == l.conj());
        match partner {
            Some(j) => {
                used[j] = true;
                out.push((l.re, l.im.abs()));
            }
            None => {
                return Err(DfpiError::InvalidInput(format!(
                    "spectrum is not closed under conjugation: {l} has no partner"
                )))
            }
        }
    }
    Ok(out)
}

/// `V·D·V⁻¹` with `D` block diagonal: real entries as `1×1` blocks and
/// conjugate pairs `a ± ib` as `[[a, b], [−b, a]]`.
pub fn gen_prescribed_parts(
    spectrum: &[Complex64],
    cond_cap: f64,
    seed: u64,
) -> Result<PrescribedMatrix> {
    let n = spectrum.len();
    if n < 2 {
        return Err(DfpiError::InvalidInput(
            "prescribed spectrum needs at least two entries".into(),
        ));
    }
    let blocks = conjugate_blocks(spectrum)?;
    let mut d = DenseMatrix::zeros(n, n);
    let mut ranges = Vec::with_capacity(blocks.len());
    let mut k = 0;
    for (re, im) in blocks {
        if im == 0.0 {
            d[(k, k)] = re;
            ranges.push((k..k + 1, Complex64::new(re, 0.0)));
            k += 1;
        } else {
            d[(k, k)] = re;
            d[(k, k + 1)] = im;
            d[(k + 1, k)] = -im;
            d[(k + 1, k + 1)] = re;
            ranges.push((k..k + 2, Complex64::new(re, im)));
            k += 2;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = near_identity_basis(n, cond_cap, &mut rng)?;
    let matrix = v.matmul(&d)?.matmul(&v.inverse()?)?;
    Ok(PrescribedMatrix {
        matrix,
        basis: v,
        blocks: ranges,
    })
}

/// Matrix with the requested spectrum and eigenvector conditioning at most `cond_cap`.
pub fn gen_prescribed(
    n: usize,
    spectrum: &[Complex64],
    cond_cap: f64,
    seed: u64,
) -> Result<DenseMatrix> {
    if spectrum.len() != n {
        return Err(DfpiError::DimensionMismatch {
            expected: n,
            found: spectrum.len(),
        });
    }
    Ok(gen_prescribed_parts(spectrum, cond_cap, seed)?.matrix)
}

/// Jordan structure: `(eigenvalue, block size)` per block, plus the seed of
/// the random basis transform.
#[derive(Clone, Debug, PartialEq)]
pub struct JordanSpec {
    pub blocks: Vec<(f64, usize)>,
    pub seed: u64,
}

impl JordanSpec {
    pub fn new(blocks: Vec<(f64, usize)>, seed: u64) -> Result<Self> {
        if blocks.is_empty() || blocks.iter().any(|&(l, s)| s == 0 || !l.is_finite()) {
            return Err(DfpiError::InvalidInput(
                "Jordan blocks need finite eigenvalues and sizes >= 1".into(),
            ));
        }
        Ok(Self { blocks, seed })
    }

    pub fn dim(&self) -> usize {
        self.blocks.iter().map(|b| b.1).sum()
    }

    /// First column of each block.
    pub fn block_starts(&self) -> Vec<usize> {
        self.blocks
            .iter()
            .scan(0, |s, b| {
                let start = *s;
                *s += b.1;
                Some(start)
            })
            .collect()
    }

    /// The Jordan matrix itself.
    pub fn jordan_matrix(&self) -> DenseMatrix {
        let n = self.dim();
        let mut j = DenseMatrix::zeros(n, n);
        for (&(l, size), start) in self.blocks.iter().zip(self.block_starts()) {
            for k in 0..size {
                j[(start + k, start + k)] = l;
                if k + 1 < size {
                    j[(start + k, start + k + 1)] = 1.0;
                }
            }
        }
        j
    }
}

/// `V·J·V⁻¹` for a given basis; chains are the columns of `V`.
pub fn gen_jordan_with_basis(spec: &JordanSpec, v: &DenseMatrix) -> Result<DenseMatrix> {
    let n = spec.dim();
    if v.rows() != n || v.cols() != n {
        return Err(DfpiError::DimensionMismatch {
            expected: n,
            found: v.rows(),
        });
    }
    v.matmul(&spec.jordan_matrix())?.matmul(&v.inverse()?)
}

/// `V·J·V⁻¹` with a random well-conditioned `V` (`κ₂ ≤ 10`); returns `(M, V)`.
pub fn gen_jordan(spec: &JordanSpec) -> Result<(DenseMatrix, DenseMatrix)> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let v = near_identity_basis(spec.dim(), 10.0, &mut rng)?;
    let m = gen_jordan_with_basis(spec, &v)?;
    Ok((m, v))
}

/// Matrix Market text for a general real coordinate matrix.
pub fn format_matrix_market(a: &SparseMatrix) -> String {
    let mut s = String::with_capacity(32 * (a.nnz() + 2));
    s.push_str("%%MatrixMarket matrix coordinate real general\n");
    let _ = writeln!(s, "{} {} {}", a.rows(), a.cols(), a.nnz());
    for i in 0..a.rows() {
        let (idx, vals) = a.row(i);
        for (j, v) in idx.iter().zip(vals) {
            let _ = writeln!(s, "{} {} {:.16e}", i + 1, j + 1, v);
        }
    }
    s
}

/// Parses coordinate real matrices, `general` or `symmetric` (lower triangle stored).
pub fn parse_matrix_market(text: &str) -> Result<SparseMatrix> {
    let perr = |line: usize, msg: &str| DfpiError::Parse {
        line,
        msg: msg.to_string(),
    };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (hl, header) = lines.next().ok_or_else(|| perr(1, "empty file"))?;
    let words: Vec<String> = header
        .split_whitespace()
        .map(|w| w.to_ascii_lowercase())
        .collect();
    if words.len() != 5 || words[0] != "%%matrixmarket" || words[1] != "matrix" {
        return Err(perr(
            hl,
            "expected '%%MatrixMarket matrix coordinate real <symmetry>'",
        ));
    }
    if words[2] != "coordinate" {
        return Err(perr(hl, "only coordinate format is supported"));
    }
    if words[3] != "real" {
        return Err(perr(
            hl,
            &format!("unsupported field '{}', expected real", words[3]),
        ));
    }
    let symmetric = match words[4].as_str() {
        "general" => false,
        "symmetric" => true,
        other => return Err(perr(hl, &format!("unsupported symmetry '{other}'"))),
    };

    let mut body = lines.filter(|(_, l)| {
        let t = l.trim();
        !t.is_empty() && !t.starts_with('%')
    });
    let (sl, size) = body
        .next()
        .ok_or_else(|| perr(hl + 1, "missing size line"))?;
    let dims: Vec<usize> = size
        .split_whitespace()
        .map(|w| {
            w.parse::<usize>()
                .map_err(|_| perr(sl, "size line must hold three integers"))
        })
        .collect::<Result<_>>()?;
    if dims.len() != 3 {
        return Err(perr(sl, "size line must hold three integers"));
    }
    let (rows, cols, nnz) = (dims[0], dims[1], dims[2]);
    if symmetric && rows != cols {
        return Err(perr(sl, "symmetric matrix must be square"));
    }
    let mut triplets = Vec::with_capacity(if symmetric { 2 * nnz } else { nnz });
    let mut count = 0;
    let mut last_line = sl;
    for (ln, line) in body {
        last_line = ln;
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 3 {
            return Err(perr(ln, "entry must be 'row col value'"));
        }
        let i: usize = f[0].parse().map_err(|_| perr(ln, "bad row index"))?;
        let j: usize = f[1].parse().map_err(|_| perr(ln, "bad column index"))?;
        let v: f64 = f[2].parse().map_err(|_| perr(ln, "bad value"))?;
        if i == 0 || j == 0 || i > rows || j > cols {
            return Err(perr(ln, &format!("index ({i}, {j}) out of range")));
        }
        if !v.is_finite() {
            return Err(perr(ln, "non-finite value"));
        }
        if symmetric && j > i {
            return Err(perr(ln, "symmetric file must store the lower triangle"));
        }
        count += 1;
        if count > nnz {
            return Err(perr(ln, "more entries than declared"));
        }
        triplets.push((i - 1, j - 1, v));
        if symmetric && i != j {
            triplets.push((j - 1, i - 1, v));
        }
    }
    if count != nnz {
        return Err(perr(
            last_line,
            &format!("declared {nnz} entries, found {count}"),
        ));
    }
    SparseMatrix::from_triplets(rows, cols, &triplets)
}

pub fn read_matrix_market(path: impl AsRef<Path>) -> Result<SparseMatrix> {
    parse_matrix_market(&std::fs::read_to_string(path)?)
}

pub fn write_matrix_market(a: &SparseMatrix, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, format_matrix_market(a))?;
    Ok(())
}

/// Reads a dense vector stored as an `n × 1` Matrix Market array or coordinate
/// file, or as one number per line.
pub fn read_vector(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)?;
    if text.trim_start().starts_with("%%MatrixMarket") {
        let first = text.lines().next().unwrap_or_default().to_ascii_lowercase();
        if first.contains("coordinate") {
            let m = parse_matrix_market(&text)?;
            if m.cols() != 1 {
                return Err(DfpiError::Parse {
                    line: 2,
                    msg: "vector file must have one column".into(),
                });
            }
            return Ok((0..m.rows()).map(|i| m.get(i, 0)).collect());
        }
        let mut out = Vec::new();
        let mut seen_size = false;
        for (ln, line) in text.lines().enumerate().skip(1) {
            let t = line.trim();
            if t.is_empty() || t.starts_with('%') {
                continue;
            }
            if !seen_size {
                seen_size = true;
                continue;
            }
            out.push(t.parse().map_err(|_| DfpiError::Parse {
                line: ln + 1,
                msg: "bad value".into(),
            })?);
        }
        return Ok(out);
    }
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(ln, l)| {
            l.trim().parse().map_err(|_| DfpiError::Parse {
                line: ln + 1,
                msg: "bad value".into(),
            })
        })
        .collect()
}

/// How the right-hand side is produced.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RhsRule {
    Ones,
    Random(u64),
    /// `b = A x*` for a random `x*`.
    FromSolution(u64),
}

#[derive(Clone, Debug, PartialEq)]
pub enum ProblemKind {
    Cd1d {
        n: usize,
        peclet: f64,
    },
    Laplace2d {
        nx: usize,
        ny: usize,
    },
    Prescribed {
        spectrum: Vec<Complex64>,
        cond_cap: f64,
        seed: u64,
    },
    Jordan {
        spec: JordanSpec,
    },
    File {
        path: String,
    },
}

/// A problem description such as `cd1d:n=100,pe=50`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    pub rhs: RhsRule,
}

/// Generated system.
#[derive(Clone, Debug)]
pub struct Problem {
    pub a: SparseMatrix,
    pub b: Vec<f64>,
    pub solution: Option<Vec<f64>>,
}

fn parse_complex(s: &str) -> Result<Complex64> {
    let bad = || DfpiError::InvalidInput(format!("bad spectrum entry '{s}'"));
    let t = s.trim();
    if let Some(body) = t.strip_suffix('i') {
        // a+bi, a-bi or bi
        let split = body
            .char_indices()
            .skip(1)
            .filter(|(_, c)| *c == '+' || *c == '-')
            .map(|(k, _)| k)
            .last();
        return match split {
            Some(k) if !body[..k].ends_with(['e', 'E']) => {
                let re: f64 = body[..k].parse().map_err(|_| bad())?;
                let im_str = &body[k..];
                let im: f64 = match im_str {
                    "+" => 1.0,
                    "-" => -1.0,
                    x => x.parse().map_err(|_| bad())?,
                };
                Ok(Complex64::new(re, im))
            }
            _ => Ok(Complex64::new(0.0, body.parse().map_err(|_| bad())?)),
        };
    }
    Ok(Complex64::new(t.parse().map_err(|_| bad())?, 0.0))
}

impl FromStr for ProblemSpec {
    type Err = DfpiError;

    /// `kind:key=value,...`; list values use `;` (`spectrum=0.5;1.2+0.3i;1.2-0.3i`,
    /// `blocks=0.9x3;0.4x2`). `rhs=ones|random|solution` with `seed=`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = |m: String| DfpiError::InvalidInput(m);
        let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
        let mut params = std::collections::BTreeMap::new();
        for kv in rest.split(',').filter(|p| !p.trim().is_empty()) {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| bad(format!("expected key=value, got '{kv}'")))?;
            params.insert(k.trim().to_string(), v.trim().to_string());
        }
        let take =
            |params: &mut std::collections::BTreeMap<String, String>, key: &str| params.remove(key);
        let num = |v: Option<String>, key: &str, default: Option<f64>| -> Result<f64> {
            match v {
                Some(v) => v
                    .parse()
                    .map_err(|_| bad(format!("bad value for {key}: '{v}'"))),
                None => default.ok_or_else(|| bad(format!("missing parameter '{key}'"))),
            }
        };
        let int = |v: Option<String>, key: &str, default: Option<usize>| -> Result<usize> {
            match v {
                Some(v) => v
                    .parse()
                    .map_err(|_| bad(format!("bad value for {key}: '{v}'"))),
                None => default.ok_or_else(|| bad(format!("missing parameter '{key}'"))),
            }
        };
        let seed = int(take(&mut params, "seed"), "seed", Some(0))? as u64;
        let rhs = match take(&mut params, "rhs").as_deref() {
            None | Some("ones") => RhsRule::Ones,
            Some("random") => RhsRule::Random(seed),
            Some("solution") | Some("from-solution") => RhsRule::FromSolution(seed),
            Some(other) => return Err(bad(format!("unknown rhs rule '{other}'"))),
        };
        let kind = match kind.trim() {
            "cd1d" => ProblemKind::Cd1d {
                n: int(take(&mut params, "n"), "n", Some(100))?,
                peclet: num(take(&mut params, "pe"), "pe", Some(0.0))?,
            },
            "laplace2d" => {
                let nx = int(take(&mut params, "nx"), "nx", Some(16))?;
                let ny = int(take(&mut params, "ny"), "ny", Some(nx))?;
                ProblemKind::Laplace2d { nx, ny }
            }
            "prescribed" => {
                let list = take(&mut params, "spectrum")
                    .ok_or_else(|| bad("missing parameter 'spectrum'".into()))?;
                let spectrum = list
                    .split(';')
                    .map(parse_complex)
                    .collect::<Result<Vec<_>>>()?;
                if let Some(n) = take(&mut params, "n") {
                    let n: usize = n
                        .parse()
                        .map_err(|_| bad(format!("bad value for n: '{n}'")))?;
                    if n != spectrum.len() {
                        return Err(DfpiError::DimensionMismatch {
                            expected: n,
                            found: spectrum.len(),
                        });
                    }
                }
                ProblemKind::Prescribed {
                    spectrum,
                    cond_cap: num(take(&mut params, "cond"), "cond", Some(10.0))?,
                    seed,
                }
            }
            "jordan" => {
                let list = take(&mut params, "blocks")
                    .ok_or_else(|| bad("missing parameter 'blocks'".into()))?;
                let blocks = list
                    .split(';')
                    .map(|b| {
                        let (l, s) = b.split_once('x').ok_or_else(|| {
                            bad(format!("block '{b}' must be <eigenvalue>x<size>"))
                        })?;
                        Ok((
                            l.parse()
                                .map_err(|_| bad(format!("bad eigenvalue '{l}'")))?,
                            s.parse().map_err(|_| bad(format!("bad size '{s}'")))?,
                        ))
                    })
                    .collect::<Result<Vec<_>>>()?;
                ProblemKind::Jordan {
                    spec: JordanSpec::new(blocks, seed)?,
                }
            }
            "file" => ProblemKind::File {
                path: take(&mut params, "path")
                    .ok_or_else(|| bad("missing parameter 'path'".into()))?,
            },
            other => return Err(bad(format!("unknown problem kind '{other}'"))),
        };
        if let Some(k) = params.keys().next() {
            return Err(bad(format!("unknown parameter '{k}'")));
        }
        Ok(ProblemSpec { kind, rhs })
    }
}

impl ProblemSpec {
    pub fn build(&self) -> Result<Problem> {
        let a = match &self.kind {
            ProblemKind::Cd1d { n, peclet } => gen_cd1d(*n, *peclet)?.0,
            ProblemKind::Laplace2d { nx, ny } => gen_laplace2d(*nx, *ny)?,
            ProblemKind::Prescribed {
                spectrum,
                cond_cap,
                seed,
            } => SparseMatrix::from_dense(&gen_prescribed(
                spectrum.len(),
                spectrum,
                *cond_cap,
                *seed,
            )?),
            ProblemKind::Jordan { spec } => SparseMatrix::from_dense(&gen_jordan(spec)?.0),
            ProblemKind::File { path } => read_matrix_market(path)?,
        };
        if a.rows() != a.cols() || a.rows() < 2 {
            return Err(DfpiError::InvalidMatrix(
                "problem matrix must be square with n >= 2".into(),
            ));
        }
        let (b, solution) = make_rhs(&a, self.rhs);
        Ok(Problem { a, b, solution })
    }
}

/// Right-hand side (and manufactured solution, if any) for a rule.
pub fn make_rhs(a: &SparseMatrix, rule: RhsRule) -> (Vec<f64>, Option<Vec<f64>>) {
    let n = a.rows();
    match rule {
        RhsRule::Ones => (vec![1.0; n], None),
        RhsRule::Random(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            ((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(), None)
        }
        RhsRule::FromSolution(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            (a.mul(&x), Some(x))
        }
    }
}
