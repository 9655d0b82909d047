//! Dense complex linear algebra over multi-factor tensor spaces.
//!
//! Storage convention: a matrix acting on `A ⊗ B ⊗ …` indexes its rows and
//! columns row-major over the factors, leftmost factor most significant.

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::evd::{self, ComputeEigenvectors};
use faer::{Accum, Par};
use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

/// Default eigenvalue floor for pseudo-inverse-type spectral functions.
pub const EIG_FLOOR: f64 = 1e-12;

/// Tolerance used when checking that an input is Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-10;

#[inline]
pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

/// Builds a matrix from row-major entries, rejecting NaN and infinities.
pub fn from_row_major(rows: usize, cols: usize, data: &[Complex64]) -> Result<CMatrix> {
    if data.len() != rows * cols {
        return Err(Error::DimensionMismatch(format!(
            "{} entries for a {rows}x{cols} matrix",
            data.len()
        )));
    }
    let m = CMatrix::from_row_slice(rows, cols, data);
    check_finite(&m)?;
    Ok(m)
}

pub fn from_real_diagonal(diag: &[f64]) -> CMatrix {
    let n = diag.len();
    let mut m = CMatrix::zeros(n, n);
    for (i, &d) in diag.iter().enumerate() {
        m[(i, i)] = c64(d, 0.0);
    }
    m
}

pub fn check_finite(m: &CMatrix) -> Result<()> {
    for c in 0..m.ncols() {
        for r in 0..m.nrows() {
            let z = m[(r, c)];
            if !z.re.is_finite() || !z.im.is_finite() {
                return Err(Error::NonFinite { row: r, col: c });
            }
        }
    }
    Ok(())
}

pub fn ensure_square(m: &CMatrix) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(m.nrows())
}

pub fn trace(m: &CMatrix) -> Complex64 {
    m.diagonal().iter().sum()
}

/// Largest absolute entry of `M - M†`.
pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0f64, |acc, z| acc.max(z.norm()))
}

/// Returns `(M + M†) / 2`. The result is exactly Hermitian: mirrored entries
/// are written from a single computed value and the diagonal is made real.
pub fn hermitize(m: &CMatrix) -> Result<CMatrix> {
    let n = ensure_square(m)?;
    let mut out = CMatrix::zeros(n, n);
    for j in 0..n {
        out[(j, j)] = c64(m[(j, j)].re, 0.0);
        for i in (j + 1)..n {
            let z = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            out[(i, j)] = z;
            out[(j, i)] = z.conj();
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Factor {
    pub label: String,
    pub dim: usize,
}

/// Ordered named tensor factors describing how a square matrix's index
/// space decomposes.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SystemLayout {
    factors: Vec<Factor>,
}

impl SystemLayout {
    pub fn new<S: Into<String>>(factors: impl IntoIterator<Item = (S, usize)>) -> Result<Self> {
        let factors: Vec<Factor> = factors
            .into_iter()
            .map(|(label, dim)| Factor {
                label: label.into(),
                dim,
            })
            .collect();
        if factors.is_empty() {
            return Err(Error::InvalidLayout("no factors".into()));
        }
        for (i, f) in factors.iter().enumerate() {
            // A one-dimensional factor is allowed so that a trivial latent
            // system can be represented.
            if f.dim == 0 {
                return Err(Error::InvalidLayout(format!("factor `{}` has dimension 0", f.label)));
            }
            if factors[..i].iter().any(|g| g.label == f.label) {
                return Err(Error::InvalidLayout(format!("duplicate label `{}`", f.label)));
            }
        }
        Ok(Self { factors })
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.factors.iter().map(|f| f.dim).collect()
    }

    pub fn labels(&self) -> Vec<&str> {
        self.factors.iter().map(|f| f.label.as_str()).collect()
    }

    pub fn total_dim(&self) -> usize {
        self.factors.iter().map(|f| f.dim).product()
    }

    pub fn position(&self, label: &str) -> Result<usize> {
        self.factors
            .iter()
            .position(|f| f.label == label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    pub fn dim_of(&self, label: &str) -> Result<usize> {
        Ok(self.factors[self.position(label)?].dim)
    }

    pub fn contains(&self, label: &str) -> bool {
        self.factors.iter().any(|f| f.label == label)
    }

    /// Sub-layout with the given labels, in the order listed.
    pub fn select(&self, labels: &[&str]) -> Result<Self> {
        let picked = labels
            .iter()
            .map(|l| self.position(l).map(|i| (self.factors[i].label.clone(), self.factors[i].dim)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(picked)
    }

    pub fn check_matrix(&self, m: &CMatrix) -> Result<()> {
        let n = ensure_square(m)?;
        if n != self.total_dim() {
            return Err(Error::DimensionMismatch(format!(
                "layout {:?} describes dimension {} but matrix is {n}x{n}",
                self.dims(),
                self.total_dim()
            )));
        }
        Ok(())
    }
}

fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for i in (0..dims.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * dims[i + 1];
    }
    s
}

/// Linear offsets (in the full index space) of every multi-index over the
/// chosen factor positions, enumerated row-major in the order given.
fn offsets(dims: &[usize], full_strides: &[usize], positions: &[usize]) -> Vec<usize> {
    let mut out = vec![0usize];
    for &p in positions {
        let mut next = Vec::with_capacity(out.len() * dims[p]);
        for &base in &out {
            for d in 0..dims[p] {
                next.push(base + d * full_strides[p]);
            }
        }
        out = next;
    }
    out
}

#[derive(Debug, Clone)]
pub struct Spectrum {
    /// Sorted descending.
    pub values: Vec<f64>,
    /// Column `k` is the eigenvector for `values[k]`.
    pub vectors: CMatrix,
}

impl Spectrum {
    /// `V · diag(g(λ)) · V†`, hermitized.
    pub fn reconstruct_with(&self, g: impl Fn(f64) -> f64) -> CMatrix {
        let mut scaled = self.vectors.clone();
        for (k, &lam) in self.values.iter().enumerate() {
            let s = g(lam);
            scaled.column_mut(k).scale_mut(s);
        }
        let m = matmul(&scaled, &self.vectors.adjoint());
        hermitize(&m).expect("square by construction")
    }

    pub fn reconstruct(&self) -> CMatrix {
        self.reconstruct_with(|x| x)
    }
}

/// Eigendecomposition of a Hermitian matrix.
///
/// Eigenvalues come back sorted descending (ties keep the backend's order,
/// which is deterministic for a fixed input). Each eigenvector is rotated so
/// that its largest-magnitude entry is real and nonnegative; among entries
/// tied for the maximum the first one is used.
pub fn eig_hermitian(m: &CMatrix) -> Result<Spectrum> {
    let n = ensure_square(m)?;
    check_finite(m)?;
    let scale = max_abs(m).max(1.0);
    let defect = hermiticity_defect(m);
    if defect > HERMITIAN_TOL * scale {
        return Err(Error::InvalidState(format!(
            "eigendecomposition needs a Hermitian matrix (defect {defect:e})"
        )));
    }
    if n == 0 {
        return Ok(Spectrum {
            values: vec![],
            vectors: CMatrix::zeros(0, 0),
        });
    }
    let h = hermitize(m)?;
    let mut s = faer::diag::Diag::<Complex64>::zeros(n);
    let mut u = faer::Mat::<Complex64>::zeros(n, n);
    let req = evd::self_adjoint_evd_scratch::<Complex64>(n, ComputeEigenvectors::Yes, Par::Seq, Default::default());
    evd::self_adjoint_evd(
        as_faer(&h),
        s.as_mut(),
        Some(u.as_mut()),
        Par::Seq,
        MemStack::new(&mut MemBuffer::new(req)),
        Default::default(),
    )
    .map_err(|e| Error::Numeric(format!("Hermitian eigensolver failed: {e:?}")))?;
    let eigenvalues: Vec<f64> = (0..n).map(|i| s[i].re).collect();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eigenvalues[b].total_cmp(&eigenvalues[a]));

    let mut vectors = CMatrix::zeros(n, n);
    let mut values = Vec::with_capacity(n);
    for (k, &src) in order.iter().enumerate() {
        values.push(eigenvalues[src]);
        let col = u.col(src);
        let peak = col.iter().fold(0.0f64, |acc, z| acc.max(z.norm_sqr())).sqrt();
        let cut = (peak - 1e-12).max(0.0).powi(2);
        let pivot = (0..n).find(|&r| col[r].norm_sqr() >= cut);
        let lead = pivot.map(|r| col[r]).unwrap_or(c64(1.0, 0.0));
        let phase = if lead.norm() > 0.0 {
            lead.conj() / lead.norm()
        } else {
            c64(1.0, 0.0)
        };
        for r in 0..n {
            vectors[(r, k)] = col[r] * phase;
        }
        // Remove the residual imaginary rounding on the pivot entry.
        if let Some(r) = pivot {
            vectors[(r, k)] = c64(vectors[(r, k)].norm(), 0.0);
        }
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite eigenvalue".into()));
    }
    Ok(Spectrum { values, vectors })
}

/// Applies a real function to a Hermitian PSD matrix through its spectrum.
///
/// Eigenvalues below `floor` are sent to zero and never passed to `f`, so
/// inverse-type functions act as pseudo-inverses on the support.
pub fn spectral_fn(m: &CMatrix, f: impl Fn(f64) -> f64, floor: f64) -> Result<CMatrix> {
    let spec = eig_hermitian(m)?;
    Ok(spec.reconstruct_with(|lam| if lam < floor || lam <= 0.0 { 0.0 } else { f(lam) }))
}

pub fn sqrt_psd(m: &CMatrix) -> Result<CMatrix> {
    spectral_fn(m, f64::sqrt, 0.0)
}

pub fn inv_sqrt_psd(m: &CMatrix, floor: f64) -> Result<CMatrix> {
    spectral_fn(m, |x| 1.0 / x.sqrt(), floor)
}

pub fn power_psd(m: &CMatrix, exponent: f64, floor: f64) -> Result<CMatrix> {
    spectral_fn(m, |x| x.powf(exponent), floor)
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Traces out the factors named in `traced`. Kept factors stay in layout
/// order.
pub fn partial_trace(m: &CMatrix, layout: &SystemLayout, traced: &[&str]) -> Result<(CMatrix, SystemLayout)> {
    layout.check_matrix(m)?;
    let mut traced_pos = Vec::with_capacity(traced.len());
    for l in traced {
        let p = layout.position(l)?;
        if !traced_pos.contains(&p) {
            traced_pos.push(p);
        }
    }
    traced_pos.sort_unstable();
    let kept_pos: Vec<usize> = (0..layout.len()).filter(|p| !traced_pos.contains(p)).collect();

    let dims = layout.dims();
    let st = strides(&dims);
    let kept = offsets(&dims, &st, &kept_pos);
    let summed = offsets(&dims, &st, &traced_pos);

    let k = kept.len();
    let mut out = CMatrix::zeros(k, k);
    for (b, &cb) in kept.iter().enumerate() {
        for (a, &ra) in kept.iter().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for &t in &summed {
                acc += m[(ra + t, cb + t)];
            }
            out[(a, b)] = acc;
        }
    }

    let new_layout = if kept_pos.is_empty() {
        SystemLayout::new([("1", 1usize)])?
    } else {
        SystemLayout::new(
            kept_pos
                .iter()
                .map(|&p| (layout.factors()[p].label.clone(), dims[p])),
        )?
    };
    Ok((out, new_layout))
}

/// Partial trace keeping exactly the named factors (in layout order).
pub fn reduce_to(m: &CMatrix, layout: &SystemLayout, keep: &[&str]) -> Result<(CMatrix, SystemLayout)> {
    for l in keep {
        layout.position(l)?;
    }
    let traced: Vec<&str> = layout
        .labels()
        .into_iter()
        .filter(|l| !keep.contains(l))
        .collect();
    partial_trace(m, layout, &traced)
}

/// Reorders tensor factors so that they appear in the order `perm`.
pub fn permute_axes(m: &CMatrix, layout: &SystemLayout, perm: &[&str]) -> Result<(CMatrix, SystemLayout)> {
    layout.check_matrix(m)?;
    if perm.len() != layout.len() {
        return Err(Error::InvalidPermutation(format!(
            "{} labels given for a {}-factor layout",
            perm.len(),
            layout.len()
        )));
    }
    let mut positions = Vec::with_capacity(perm.len());
    for l in perm {
        let p = layout
            .position(l)
            .map_err(|_| Error::InvalidPermutation(format!("unknown label `{l}`")))?;
        if positions.contains(&p) {
            return Err(Error::InvalidPermutation(format!("label `{l}` repeated")));
        }
        positions.push(p);
    }
    let dims = layout.dims();
    let st = strides(&dims);
    let map = offsets(&dims, &st, &positions);
    let n = map.len();
    let mut out = CMatrix::zeros(n, n);
    for (j, &oj) in map.iter().enumerate() {
        for (i, &oi) in map.iter().enumerate() {
            out[(i, j)] = m[(oi, oj)];
        }
    }
    let new_layout = layout.select(perm)?;
    Ok((out, new_layout))
}

/// Tensors `M` with the identity on every factor of `full` missing from
/// `layout_m`, then reorders into `full`'s factor order.
pub fn embed_identity(m: &CMatrix, layout_m: &SystemLayout, full: &SystemLayout) -> Result<CMatrix> {
    layout_m.check_matrix(m)?;
    for f in layout_m.factors() {
        let d = full
            .dim_of(&f.label)
            .map_err(|_| Error::DimensionMismatch(format!("label `{}` not in target layout", f.label)))?;
        if d != f.dim {
            return Err(Error::DimensionMismatch(format!(
                "factor `{}` has dimension {} but target says {d}",
                f.label, f.dim
            )));
        }
    }
    let missing: Vec<&Factor> = full
        .factors()
        .iter()
        .filter(|f| !layout_m.contains(&f.label))
        .collect();
    let pad: usize = missing.iter().map(|f| f.dim).product();
    let big = kron(m, &identity(pad));
    let joined = SystemLayout::new(
        layout_m
            .factors()
            .iter()
            .chain(missing.iter().copied())
            .map(|f| (f.label.clone(), f.dim)),
    )?;
    let (out, _) = permute_axes(&big, &joined, &full.labels())?;
    Ok(out)
}

fn as_faer(m: &CMatrix) -> faer::MatRef<'_, Complex64> {
    faer::MatRef::from_column_major_slice(m.as_slice(), m.nrows(), m.ncols())
}

/// Dense product `a · b`.
pub fn matmul(a: &CMatrix, b: &CMatrix) -> CMatrix {
    assert_eq!(a.ncols(), b.nrows(), "matmul shape mismatch");
    let (r, c) = (a.nrows(), b.ncols());
    let mut out = CMatrix::zeros(r, c);
    faer::linalg::matmul::matmul(
        faer::MatMut::from_column_major_slice_mut(out.as_mut_slice(), r, c),
        Accum::Replace,
        as_faer(a),
        as_faer(b),
        c64(1.0, 0.0),
        Par::Seq,
    );
    out
}

/// True when the Cholesky factorization of the Hermitian `h` succeeds.
pub fn is_positive_definite(h: &CMatrix) -> bool {
    h.nrows() == h.ncols() && as_faer(h).llt(faer::Side::Lower).is_ok()
}

fn diagonal_of(a: &CMatrix) -> Option<Vec<Complex64>> {
    let zero = c64(0.0, 0.0);
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            if i != j && a[(i, j)] != zero {
                return None;
            }
        }
    }
    Some(a.diagonal().iter().copied().collect())
}

/// `(A ⊗ I_inner) · M`.
pub fn kron_id_mul(a: &CMatrix, inner: usize, m: &CMatrix) -> CMatrix {
    debug_assert_eq!(m.nrows(), a.nrows() * inner);
    if let Some(d) = diagonal_of(a) {
        let mut out = m.clone();
        for (i, mut row) in out.row_iter_mut().enumerate() {
            row *= d[i / inner];
        }
        return out;
    }
    if inner == 1 {
        return matmul(a, m);
    }
    matmul(&kron(a, &identity(inner)), m)
}

/// `M · (A ⊗ I_inner)`.
pub fn mul_kron_id(m: &CMatrix, a: &CMatrix, inner: usize) -> CMatrix {
    debug_assert_eq!(m.ncols(), a.nrows() * inner);
    if let Some(d) = diagonal_of(a) {
        let mut out = m.clone();
        for (j, mut col) in out.column_iter_mut().enumerate() {
            col *= d[j / inner];
        }
        return out;
    }
    if inner == 1 {
        return matmul(m, a);
    }
    matmul(m, &kron(a, &identity(inner)))
}

/// `(I_outer ⊗ B) · M`, one block row at a time.
pub fn id_kron_mul(outer: usize, b: &CMatrix, m: &CMatrix) -> CMatrix {
    let db = b.nrows();
    debug_assert_eq!(m.nrows(), outer * db);
    let mut out = CMatrix::zeros(m.nrows(), m.ncols());
    for s in 0..outer {
        let block = m.rows(s * db, db).into_owned();
        out.rows_mut(s * db, db).copy_from(&matmul(b, &block));
    }
    out
}

/// `(A ⊗ I_inner) · M · (A ⊗ I_inner)` for Hermitian `A`.
pub fn kron_id_sandwich(a: &CMatrix, inner: usize, m: &CMatrix) -> CMatrix {
    mul_kron_id(&kron_id_mul(a, inner, m), a, inner)
}
