//! Dense subspace linear algebra: orthonormal bases, projectors, symmetric
//! eigendecomposition, and principal-angle distances.
//!
//! Everything here is a pure function of its inputs (plus an explicit RNG where
//! noted). Values are immutable after construction and safe to share across
//! threads. Scalars are f64 throughout; dimensions are desk scale (d up to a
//! few thousand), so dense storage is fine.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::tol;

/// A d x k matrix with orthonormal columns spanning a k-dimensional subspace of R^d.
///
/// Construction validates the orthonormality invariant, so holding a value of
/// this type certifies `columns^T columns = I_k` within [`tol::ORTHONORMALITY`].
#[derive(Debug, Clone, PartialEq)]
pub struct OrthonormalBasis {
    columns: DMatrix<f64>,
}

impl OrthonormalBasis {
    /// Wraps a matrix whose columns are already orthonormal.
    ///
    /// Errors with `DimensionMismatch` if the matrix is wider than tall or empty,
    /// and `InvalidArgs` if the columns fail the orthonormality check.
    pub fn from_columns(columns: DMatrix<f64>) -> Result<Self> {
        let (d, k) = columns.shape();
        if d == 0 || k == 0 {
            return Err(Error::InvalidDims(format!(
                "basis must be nonempty, got {d}x{k}"
            )));
        }
        if k > d {
            return Err(Error::DimensionMismatch(format!(
                "cannot span {k} orthonormal directions in R^{d}"
            )));
        }
        let gram = columns.transpose() * &columns;
        let defect = (&gram - DMatrix::<f64>::identity(k, k)).norm();
        if defect > tol::ORTHONORMALITY {
            return Err(Error::InvalidArgs(format!(
                "columns are not orthonormal: |Q^T Q - I|_F = {defect:.3e}"
            )));
        }
        Ok(Self { columns })
    }

    /// Ambient dimension d.
    pub fn dim_ambient(&self) -> usize {
        self.columns.nrows()
    }

    /// Subspace dimension k.
    pub fn dim_sub(&self) -> usize {
        self.columns.ncols()
    }

    /// The underlying d x k matrix.
    pub fn columns(&self) -> &DMatrix<f64> {
        &self.columns
    }

    /// Consumes the basis and returns the column matrix.
    pub fn into_columns(self) -> DMatrix<f64> {
        self.columns
    }

    /// Orthogonal projector onto the spanned subspace, P = QQ^T.
    pub fn projector(&self) -> Projector {
        Projector::onto(self)
    }

    /// Orthogonal projector onto the complement, I - QQ^T.
    pub fn complement_projector(&self) -> Projector {
        Projector::onto_complement(self)
    }

    /// Coordinates of `x` in this basis, Q^T x (a k-vector).
    pub fn coordinates(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        if x.len() != self.dim_ambient() {
            return Err(Error::DimensionMismatch(format!(
                "vector length {} vs ambient dimension {}",
                x.len(),
                self.dim_ambient()
            )));
        }
        Ok(self.columns.transpose() * x)
    }

    /// Lifts subspace coordinates back to R^d, Q c.
    pub fn lift(&self, coords: &DVector<f64>) -> Result<DVector<f64>> {
        if coords.len() != self.dim_sub() {
            return Err(Error::DimensionMismatch(format!(
                "coordinate length {} vs subspace dimension {}",
                coords.len(),
                self.dim_sub()
            )));
        }
        Ok(&self.columns * coords)
    }

    /// Component of `x` orthogonal to the spanned subspace, (I - QQ^T) x.
    pub fn residual(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let coords = self.coordinates(x)?;
        Ok(x - &self.columns * coords)
    }
}

/// A d x d orthogonal projector P = QQ^T (or its complement I - QQ^T).
///
/// Construction checks idempotence and the trace identity trace(P) = rank.
#[derive(Debug, Clone, PartialEq)]
pub struct Projector {
    matrix: DMatrix<f64>,
    rank: usize,
}

impl Projector {
    fn onto(basis: &OrthonormalBasis) -> Self {
        let q = basis.columns();
        Self::checked(q * q.transpose(), basis.dim_sub())
    }

    fn onto_complement(basis: &OrthonormalBasis) -> Self {
        let d = basis.dim_ambient();
        let q = basis.columns();
        let m = DMatrix::<f64>::identity(d, d) - q * q.transpose();
        Self::checked(m, d - basis.dim_sub())
    }

    fn checked(matrix: DMatrix<f64>, rank: usize) -> Self {
        debug_assert!(
            (&matrix * &matrix - &matrix).norm() <= tol::ORTHONORMALITY,
            "projector is not idempotent"
        );
        debug_assert!(
            (matrix.trace() - rank as f64).abs() <= tol::ORTHONORMALITY,
            "projector trace does not match rank"
        );
        Self { matrix, rank }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn apply(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        if x.len() != self.matrix.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "vector length {} vs projector dimension {}",
                x.len(),
                self.matrix.nrows()
            )));
        }
        Ok(&self.matrix * x)
    }
}

/// Orthonormalizes the columns of `m` via Householder QR.
///
/// Requires full column rank: the smallest singular value must exceed
/// [`tol::RANK_RATIO`] times the largest, else `RankDeficient`. The returned
/// basis spans the same column space as `m`. Column signs follow a fixed
/// convention (first nonzero entry of each column made nonnegative) so that
/// repeated decompositions of the same input are bit-identical.
pub fn orthonormalize(m: &DMatrix<f64>) -> Result<OrthonormalBasis> {
    let (d, k) = m.shape();
    if d == 0 || k == 0 {
        return Err(Error::InvalidDims(format!(
            "cannot orthonormalize a {d}x{k} matrix"
        )));
    }
    if k > d {
        return Err(Error::RankDeficient(format!(
            "a {d}x{k} matrix with k > d cannot have full column rank"
        )));
    }
    let svals = m.clone().svd(false, false).singular_values;
    let s_max = svals.max();
    let s_min = svals.min();
    if !(s_max > 0.0) || s_min <= tol::RANK_RATIO * s_max {
        return Err(Error::RankDeficient(format!(
            "singular value ratio {:.3e} below {:.3e}",
            if s_max > 0.0 { s_min / s_max } else { 0.0 },
            tol::RANK_RATIO
        )));
    }
    let mut q = m.clone().qr().q();
    fix_column_signs(&mut q);
    OrthonormalBasis::from_columns(q)
}

/// Draws a uniformly random k-dimensional subspace of R^d, returned as an
/// orthonormal basis (QR of a standard Gaussian matrix).
pub fn random_orthonormal<R: Rng + ?Sized>(
    d: usize,
    k: usize,
    rng: &mut R,
) -> Result<OrthonormalBasis> {
    if k == 0 || d == 0 || k > d {
        return Err(Error::InvalidDims(format!(
            "random basis needs 1 <= k <= d, got d={d}, k={k}"
        )));
    }
    // A Gaussian matrix is full rank with probability one; regenerate on the
    // measure-zero failure rather than erroring out of a sampling routine.
    loop {
        let m = DMatrix::from_fn(d, k, |_, _| rng.sample::<f64, _>(StandardNormal));
        match orthonormalize(&m) {
            Ok(b) => return Ok(b),
            Err(Error::RankDeficient(_)) => continue,
            Err(e) => return Err(e),
        }
    }
}

fn fix_column_signs(q: &mut DMatrix<f64>) {
    for j in 0..q.ncols() {
        let lead = q.column(j).iter().find(|v| **v != 0.0).copied();
        if let Some(v) = lead {
            if v < 0.0 {
                q.column_mut(j).neg_mut();
            }
        }
    }
}

fn check_same_shape(a: &OrthonormalBasis, b: &OrthonormalBasis) -> Result<()> {
    if a.dim_ambient() != b.dim_ambient() || a.dim_sub() != b.dim_sub() {
        return Err(Error::DimensionMismatch(format!(
            "bases of shape {}x{} vs {}x{}",
            a.dim_ambient(),
            a.dim_sub(),
            b.dim_ambient(),
            b.dim_sub()
        )));
    }
    Ok(())
}

/// Residual of `a` against the subspace of `b`, the d x k matrix (I - bb^T) a.
fn residual_matrix(a: &OrthonormalBasis, b: &OrthonormalBasis) -> DMatrix<f64> {
    let bc = b.columns();
    a.columns() - bc * (bc.transpose() * a.columns())
}

/// Sine of the largest principal angle between two equal-dimension subspaces.
///
/// Computed as the operator norm of (I - bb^T) a, which avoids forming any
/// d x d matrix. The result is symmetric in its arguments and lies in [0, 1];
/// roundoff excursions above 1 are clamped (within [`tol::SINGULAR_VALUE_CLAMP`]).
pub fn principal_angle_sin(a: &OrthonormalBasis, b: &OrthonormalBasis) -> Result<f64> {
    check_same_shape(a, b)?;
    let s = operator_norm(&residual_matrix(a, b));
    debug_assert!(s <= 1.0 + tol::SINGULAR_VALUE_CLAMP);
    Ok(s.min(1.0))
}

/// Frobenius and operator norms of the residual (I - bb^T) a.
///
/// These bracket the principal angle: frobenius >= operator >= frobenius / sqrt(k).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualNorms {
    pub frobenius: f64,
    pub operator: f64,
}

pub fn subspace_residual_norms(a: &OrthonormalBasis, b: &OrthonormalBasis) -> Result<ResidualNorms> {
    check_same_shape(a, b)?;
    let r = residual_matrix(a, b);
    Ok(ResidualNorms {
        frobenius: r.norm(),
        operator: operator_norm(&r),
    })
}

fn operator_norm(m: &DMatrix<f64>) -> f64 {
    m.clone().svd(false, false).singular_values.max()
}

/// Builds a basis at exact principal-angle distance `gamma` from `b`.
///
/// The first column of `b` is rotated by arcsin(gamma) toward a random unit
/// vector drawn in the orthogonal complement of span(b); remaining columns are
/// untouched. Because the rotation direction is orthogonal to the whole span,
/// the sine of the largest principal angle equals gamma by construction.
pub fn perturbed_basis<R: Rng + ?Sized>(
    b: &OrthonormalBasis,
    gamma: f64,
    rng: &mut R,
) -> Result<OrthonormalBasis> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::InvalidGamma(gamma));
    }
    if gamma == 0.0 {
        return Ok(b.clone());
    }
    if b.dim_sub() == b.dim_ambient() {
        return Err(Error::NoComplement(b.dim_ambient()));
    }
    let u = complement_direction(b, rng)?;
    let mut cols = b.columns().clone();
    let rotated = b.columns().column(0) * (1.0 - gamma * gamma).sqrt() + u * gamma;
    cols.set_column(0, &rotated);
    OrthonormalBasis::from_columns(cols)
}

/// Random unit vector in the orthogonal complement of span(b).
fn complement_direction<R: Rng + ?Sized>(
    b: &OrthonormalBasis,
    rng: &mut R,
) -> Result<DVector<f64>> {
    let d = b.dim_ambient();
    loop {
        let g = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let mut u = b.residual(&g)?;
        let n = u.norm();
        // Resample on the measure-zero event that g lies in span(b).
        if n > 1e-12 {
            u /= n;
            // One reorthogonalization pass keeps u orthogonal to span(b) at
            // working precision even for unlucky draws nearly inside the span.
            let mut u2 = b.residual(&u)?;
            let n2 = u2.norm();
            if n2 > 0.5 {
                u2 /= n2;
                return Ok(u2);
            }
        }
    }
}

/// Eigendecomposition of a real symmetric matrix with eigenvalues sorted in
/// descending order. Ties keep the input order of eigenvectors.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    /// Eigenvalues, largest first.
    pub eigenvalues: Vec<f64>,
    /// Matching eigenvectors as columns, same order as `eigenvalues`.
    pub eigenvectors: DMatrix<f64>,
}

impl EigenDecomposition {
    /// The invariant subspace of the top `k` eigenvalues as an orthonormal basis.
    pub fn top_k(&self, k: usize) -> Result<OrthonormalBasis> {
        let d = self.eigenvectors.nrows();
        if k == 0 || k > d {
            return Err(Error::InvalidDims(format!(
                "top_k needs 1 <= k <= {d}, got {k}"
            )));
        }
        let cols = self.eigenvectors.columns(0, k).into_owned();
        OrthonormalBasis::from_columns(cols)
    }
}

/// Full symmetric eigendecomposition (tridiagonalization + implicit QR),
/// sorted descending, with the same deterministic column-sign convention as
/// [`orthonormalize`].
///
/// Errors with `InvalidArgs` if the matrix is not square or not symmetric
/// within `1e-10` relative Frobenius defect.
pub fn symmetric_eigen_descending(m: &DMatrix<f64>) -> Result<EigenDecomposition> {
    let (r, c) = m.shape();
    if r != c || r == 0 {
        return Err(Error::InvalidDims(format!(
            "eigendecomposition needs a nonempty square matrix, got {r}x{c}"
        )));
    }
    let scale = m.norm().max(1.0);
    let asym = (m - m.transpose()).norm();
    if asym > 1e-10 * scale {
        return Err(Error::InvalidArgs(format!(
            "matrix is not symmetric: |M - M^T|_F / max(1, |M|_F) = {:.3e}",
            asym / scale
        )));
    }
    let eig = nalgebra::SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..r).collect();
    // Stable sort so equal eigenvalues keep the solver's vector order.
    order.sort_by(|&i, &j| eig.eigenvalues[j].partial_cmp(&eig.eigenvalues[i]).unwrap());
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut eigenvectors = DMatrix::<f64>::zeros(r, r);
    for (dst, &src) in order.iter().enumerate() {
        eigenvectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    fix_column_signs(&mut eigenvectors);
    Ok(EigenDecomposition {
        eigenvalues,
        eigenvectors,
    })
}
