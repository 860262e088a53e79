//! Dense complex matrix kernel.
//!
//! [`SquareMatrix`] is a validated `d×d` complex matrix. [`HermitianOperator`]
//! and [`UnitaryMap`] wrap it with the structural guarantee each role needs.
//! Every operator in the rest of the crate (device operators, density
//! operators, POM elements) is a `HermitianOperator`.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type ComplexScalar = Complex64;

/// Largest supported state-space dimension.
pub const MAX_DIM: usize = 64;

const EIGEN_MAX_ITER: usize = 10_000;

/// Numerical tolerances shared by validation and probability evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Absolute bound on the max-entry Hermiticity defect.
    pub herm: f64,
    /// Negative-eigenvalue allowance, relative to `max(1, spectral norm)`.
    pub psd: f64,
    /// Absolute bound on the max-entry norm of `U†U - 1`.
    pub unitary: f64,
    /// Identity-proportionality allowance, relative to `max(1, max-entry norm)`.
    pub prop: f64,
    /// Degeneracy threshold for probability denominators, relative to `Tr Λ · Tr Γ`.
    pub denom: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            herm: 1e-10,
            psd: 1e-9,
            unitary: 1e-10,
            prop: 1e-9,
            denom: 1e-12,
        }
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 0 || dim > MAX_DIM {
        Err(Error::InvalidDimension(dim))
    } else {
        Ok(())
    }
}

/// A finite `d×d` complex matrix with `1 ≤ d ≤ MAX_DIM`.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix(DMatrix<Complex64>);

impl SquareMatrix {
    /// Builds a matrix from row-major entries.
    pub fn from_row_major(dim: usize, entries: &[Complex64]) -> Result<Self> {
        check_dim(dim)?;
        if entries.len() != dim * dim {
            return Err(Error::RaggedMatrix {
                row: entries.len() / dim.max(1),
                expected: dim * dim,
                found: entries.len(),
            });
        }
        Self::from_dmatrix(DMatrix::from_row_slice(dim, dim, entries))
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let dim = rows.len();
        check_dim(dim)?;
        for (r, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::RaggedMatrix {
                    row: r,
                    expected: dim,
                    found: row.len(),
                });
            }
        }
        Self::from_dmatrix(DMatrix::from_fn(dim, dim, |r, c| rows[r][c]))
    }

    /// Real diagonal matrix.
    pub fn diagonal(diag: &[f64]) -> Result<Self> {
        check_dim(diag.len())?;
        let d = diag.len();
        Self::from_dmatrix(DMatrix::from_fn(d, d, |r, c| {
            if r == c {
                Complex64::new(diag[r], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        }))
    }

    pub(crate) fn from_dmatrix(m: DMatrix<Complex64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::RaggedMatrix {
                row: 0,
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        check_dim(m.nrows())?;
        for c in 0..m.ncols() {
            for r in 0..m.nrows() {
                let z = m[(r, c)];
                if !z.re.is_finite() || !z.im.is_finite() {
                    return Err(Error::NonFinite { row: r, col: c });
                }
            }
        }
        Ok(SquareMatrix(m))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.0[(row, col)]
    }

    pub fn as_dmatrix(&self) -> &DMatrix<Complex64> {
        &self.0
    }

    pub fn to_rows(&self) -> Vec<Vec<Complex64>> {
        (0..self.dim())
            .map(|r| (0..self.dim()).map(|c| self.0[(r, c)]).collect())
            .collect()
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |acc, z| acc.max(z.norm()))
    }
}

/// Max-entry distance between `m` and its adjoint.
fn hermiticity_defect(m: &DMatrix<Complex64>) -> f64 {
    let d = m.nrows();
    let mut defect = 0.0f64;
    for r in 0..d {
        for c in r..d {
            defect = defect.max((m[(r, c)] - m[(c, r)].conj()).norm());
        }
    }
    defect
}

/// `(m + m†) / 2`. The result is exactly Hermitian in floating point.
fn symmetrize(m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let d = m.nrows();
    DMatrix::from_fn(d, d, |r, c| (m[(r, c)] + m[(c, r)].conj()) * 0.5)
}

/// A Hermitian matrix. Stored entries are exactly Hermitian; the defect of the
/// matrix it was built from is kept for reporting.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator {
    matrix: SquareMatrix,
    defect: f64,
}

impl HermitianOperator {
    pub fn identity(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self::from_exact(DMatrix::identity(dim, dim)))
    }

    pub fn zeros(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self::from_exact(DMatrix::zeros(dim, dim)))
    }

    pub fn diagonal(diag: &[f64]) -> Result<Self> {
        let m = SquareMatrix::diagonal(diag)?;
        Ok(Self::from_exact(m.0))
    }

    /// Rank-one `|v⟩⟨v|` (no normalization applied).
    pub fn projector(v: &[Complex64]) -> Result<Self> {
        check_dim(v.len())?;
        let d = v.len();
        let m = DMatrix::from_fn(d, d, |r, c| v[r] * v[c].conj());
        SquareMatrix::from_dmatrix(m.clone())?;
        Ok(Self::from_exact(m))
    }

    /// Wraps a matrix that is Hermitian by construction (sums, real scalings,
    /// conjugations). Symmetrizes to scrub rounding.
    pub(crate) fn from_exact(m: DMatrix<Complex64>) -> Self {
        let defect = hermiticity_defect(&m);
        HermitianOperator {
            matrix: SquareMatrix(symmetrize(&m)),
            defect,
        }
    }

    pub fn matrix(&self) -> &SquareMatrix {
        &self.matrix
    }

    pub(crate) fn raw(&self) -> &DMatrix<Complex64> {
        &self.matrix.0
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        self.defect
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.matrix.get(row, col)
    }

    pub fn max_abs(&self) -> f64 {
        self.matrix.max_abs()
    }

    pub fn scaled(&self, c: f64) -> Self {
        HermitianOperator {
            matrix: SquareMatrix(self.raw() * Complex64::new(c, 0.0)),
            defect: 0.0,
        }
    }

    pub fn add(&self, other: &HermitianOperator) -> Result<Self> {
        same_dim(self.dim(), other.dim())?;
        Ok(Self::from_exact(self.raw() + other.raw()))
    }

    pub fn sub(&self, other: &HermitianOperator) -> Result<Self> {
        same_dim(self.dim(), other.dim())?;
        Ok(Self::from_exact(self.raw() - other.raw()))
    }

    /// Sum of a non-empty family of equal-dimension operators.
    pub fn sum<'a, I>(dim: usize, ops: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a HermitianOperator>,
    {
        let mut acc = DMatrix::<Complex64>::zeros(dim, dim);
        for op in ops {
            same_dim(dim, op.dim())?;
            acc += op.raw();
        }
        Ok(Self::from_exact(acc))
    }

    /// Max-entry distance to `c·1`.
    pub fn distance_to_multiple_of_identity(&self, c: f64) -> f64 {
        let d = self.dim();
        let mut worst = 0.0f64;
        for r in 0..d {
            for col in 0..d {
                let target = if r == col {
                    Complex64::new(c, 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                };
                worst = worst.max((self.get(r, col) - target).norm());
            }
        }
        worst
    }
}

pub(crate) fn same_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        Err(Error::DimensionMismatch { expected, found })
    } else {
        Ok(())
    }
}

/// Accepts `m` if its Hermiticity defect is within the default tolerance,
/// returning the symmetrized matrix.
pub fn validate_hermitian(m: &SquareMatrix) -> Result<HermitianOperator> {
    validate_hermitian_with(m, Tolerances::default().herm)
}

pub fn validate_hermitian_with(m: &SquareMatrix, tol_herm: f64) -> Result<HermitianOperator> {
    let defect = hermiticity_defect(m.as_dmatrix());
    if defect > tol_herm {
        return Err(Error::NotHermitian(defect));
    }
    Ok(HermitianOperator {
        matrix: SquareMatrix(symmetrize(m.as_dmatrix())),
        defect,
    })
}

/// Eigenvalues in ascending order, from the Hermitian eigensolver.
pub fn eigenvalues(a: &HermitianOperator) -> Result<Vec<f64>> {
    let eig = SymmetricEigen::try_new(a.raw().clone(), f64::EPSILON, EIGEN_MAX_ITER).ok_or(Error::EigenFailure)?;
    let mut values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    values.sort_by(f64::total_cmp);
    Ok(values)
}

/// Smallest eigenvalue.
pub fn psd_check(a: &HermitianOperator) -> Result<f64> {
    Ok(eigenvalues(a)?[0])
}

pub fn spectral_norm(a: &HermitianOperator) -> Result<f64> {
    let ev = eigenvalues(a)?;
    Ok(ev[0].abs().max(ev[ev.len() - 1].abs()))
}

/// Applies the PSD acceptance policy. Returns `(accepted, min_eigenvalue)`.
pub fn is_psd(a: &HermitianOperator, tol_psd: f64) -> Result<(bool, f64)> {
    let ev = eigenvalues(a)?;
    let min = ev[0];
    let norm = min.abs().max(ev[ev.len() - 1].abs());
    Ok((min >= -tol_psd * norm.max(1.0), min))
}

pub fn trace(a: &HermitianOperator) -> f64 {
    (0..a.dim()).map(|r| a.get(r, r).re).sum()
}

/// `Tr(a·b)`.
///
/// Both inputs are exactly Hermitian, so `a[r,c]·b[c,r] + a[c,r]·b[r,c]` is
/// `2·Re(a[r,c]·conj(b[r,c]))`. Summing over the upper triangle gives a result
/// that is real by construction and bit-symmetric in `a` and `b`.
pub fn trace_pair(a: &HermitianOperator, b: &HermitianOperator) -> Result<f64> {
    same_dim(a.dim(), b.dim())?;
    let (ma, mb) = (a.raw(), b.raw());
    let d = a.dim();
    let mut diag = 0.0;
    let mut off = 0.0;
    for r in 0..d {
        diag += ma[(r, r)].re * mb[(r, r)].re;
        for c in (r + 1)..d {
            let (x, y) = (ma[(r, c)], mb[(r, c)]);
            off += x.re * y.re + x.im * y.im;
        }
    }
    Ok(diag + 2.0 * off)
}

/// `U·a·U†`.
pub fn conjugate_by(u: &UnitaryMap, a: &HermitianOperator) -> Result<HermitianOperator> {
    same_dim(u.dim(), a.dim())?;
    let um = u.matrix.as_dmatrix();
    Ok(HermitianOperator::from_exact(um * a.raw() * um.adjoint()))
}

/// `U†·a·U`.
pub fn conjugate_by_adjoint(u: &UnitaryMap, a: &HermitianOperator) -> Result<HermitianOperator> {
    same_dim(u.dim(), a.dim())?;
    let um = u.matrix.as_dmatrix();
    Ok(HermitianOperator::from_exact(um.adjoint() * a.raw() * um))
}

/// Returns `Tr(a)/d` when `a` is a multiple of the identity within the
/// default tolerance.
pub fn proportionality_to_identity(a: &HermitianOperator) -> Option<f64> {
    proportionality_to_identity_with(a, Tolerances::default().prop)
}

pub fn proportionality_to_identity_with(a: &HermitianOperator, tol_prop: f64) -> Option<f64> {
    let gamma = trace(a) / a.dim() as f64;
    let defect = a.distance_to_multiple_of_identity(gamma);
    (defect <= tol_prop * a.max_abs().max(1.0)).then_some(gamma)
}

/// `a^{-1/2}` for a positive-definite `a`.
pub fn inverse_sqrt(a: &HermitianOperator) -> Result<HermitianOperator> {
    let eig = SymmetricEigen::try_new(a.raw().clone(), f64::EPSILON, EIGEN_MAX_ITER).ok_or(Error::EigenFailure)?;
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if min <= 0.0 {
        return Err(Error::NotPsd {
            label: "inverse_sqrt".into(),
            min_eigenvalue: min,
        });
    }
    let v = &eig.eigenvectors;
    let d = a.dim();
    let scaled = DMatrix::from_fn(d, d, |r, c| v[(r, c)] / eig.eigenvalues[c].sqrt());
    Ok(HermitianOperator::from_exact(scaled * v.adjoint()))
}

/// A unitary matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryMap {
    matrix: SquareMatrix,
    defect: f64,
}

fn unitarity_defect(m: &DMatrix<Complex64>) -> f64 {
    let d = m.nrows();
    let p = m.adjoint() * m;
    let mut worst = 0.0f64;
    for r in 0..d {
        for c in 0..d {
            let target = if r == c { 1.0 } else { 0.0 };
            worst = worst.max((p[(r, c)] - Complex64::new(target, 0.0)).norm());
        }
    }
    worst
}

impl UnitaryMap {
    pub fn new(m: SquareMatrix) -> Result<Self> {
        Self::with_tolerance(m, Tolerances::default().unitary)
    }

    pub fn with_tolerance(m: SquareMatrix, tol_unitary: f64) -> Result<Self> {
        let defect = unitarity_defect(m.as_dmatrix());
        if defect > tol_unitary {
            return Err(Error::NotUnitary(defect));
        }
        Ok(UnitaryMap { matrix: m, defect })
    }

    pub fn identity(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(UnitaryMap {
            matrix: SquareMatrix(DMatrix::identity(dim, dim)),
            defect: 0.0,
        })
    }

    /// The single-qubit Hadamard gate.
    pub fn hadamard() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let m = DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(h, 0.0),
                Complex64::new(h, 0.0),
                Complex64::new(h, 0.0),
                Complex64::new(-h, 0.0),
            ],
        );
        let defect = unitarity_defect(&m);
        UnitaryMap {
            matrix: SquareMatrix(m),
            defect,
        }
    }

    pub fn matrix(&self) -> &SquareMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn unitarity_defect(&self) -> f64 {
        self.defect
    }

    pub fn adjoint(&self) -> UnitaryMap {
        UnitaryMap {
            matrix: SquareMatrix(self.matrix.0.adjoint()),
            defect: self.defect,
        }
    }

    /// `self · first`: apply `first`, then `self`.
    pub fn after(&self, first: &UnitaryMap) -> Result<UnitaryMap> {
        same_dim(self.dim(), first.dim())?;
        let m = &self.matrix.0 * &first.matrix.0;
        let defect = unitarity_defect(&m);
        Ok(UnitaryMap {
            matrix: SquareMatrix(m),
            defect,
        })
    }

    /// Column `k` as a unit vector.
    pub fn column(&self, k: usize) -> Vec<Complex64> {
        self.matrix.0.column(k).iter().copied().collect()
    }
}

fn gaussian_matrix(dim: usize, rng: &mut ChaCha8Rng) -> DMatrix<Complex64> {
    DMatrix::from_fn(dim, dim, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        Complex64::new(re, im)
    })
}

/// Unit-trace `G†G` for a seeded complex Gaussian `G`.
pub fn random_psd(dim: usize, seed: u64) -> Result<HermitianOperator> {
    check_dim(dim)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = gaussian_matrix(dim, &mut rng);
    let op = HermitianOperator::from_exact(g.adjoint() * &g);
    let tr = trace(&op);
    Ok(op.scaled(1.0 / tr))
}

/// Orthonormalized seeded complex Gaussian matrix (QR with the phases of
/// `R`'s diagonal folded into `Q`, which makes the result Haar-distributed).
pub fn random_unitary(dim: usize, seed: u64) -> Result<UnitaryMap> {
    check_dim(dim)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = gaussian_matrix(dim, &mut rng);
    let qr = g.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for k in 0..dim {
        let rkk = r[(k, k)];
        let phase = if rkk.norm() > 0.0 {
            rkk / rkk.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        for row in 0..dim {
            q[(row, k)] *= phase;
        }
    }
    let defect = unitarity_defect(&q);
    Ok(UnitaryMap {
        matrix: SquareMatrix(q),
        defect,
    })
}
