//! Dense complex-matrix helpers: Hermitian checks, sorted eigendecompositions,
//! trace/Frobenius utilities.

use nalgebra::{Complex, DVector, SymmetricEigen};

use crate::error::{dims, Error, Result};
use crate::scalar::{cabs, sum, ComplexMat, ComplexVec, Real};

/// Relative asymmetry threshold for treating a matrix as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Relative eigenvalue floor for treating a matrix as PSD.
pub const PSD_TOL: f64 = 1e-8;

pub fn frob_sq<T: Real>(a: &ComplexMat<T>) -> T {
    sum(a.iter().map(|z| z.norm_sqr()))
}

pub fn frob<T: Real>(a: &ComplexMat<T>) -> T {
    frob_sq(a).sqrt()
}

/// `Re Tr(A B)`.
pub fn re_trace_product<T: Real>(a: &ComplexMat<T>, b: &ComplexMat<T>) -> T {
    trace_product(a, b).re
}

/// `Tr(A B)` without forming the product.
pub fn trace_product<T: Real>(a: &ComplexMat<T>, b: &ComplexMat<T>) -> Complex<T> {
    debug_assert_eq!(a.ncols(), b.nrows());
    debug_assert_eq!(a.nrows(), b.ncols());
    let mut acc = Complex::new(T::zero(), T::zero());
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

/// Real inner product `Re Σ conj(a_ij) b_ij`.
pub fn inner<T: Real>(a: &ComplexMat<T>, b: &ComplexMat<T>) -> T {
    sum(a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re))
}

/// `(A + A^H) / 2`.
pub fn hermitian_part<T: Real>(a: &ComplexMat<T>) -> ComplexMat<T> {
    (a + a.adjoint()).scale(T::lit(0.5))
}

/// `‖A − A^H‖_F / ‖A‖_F` (zero for the zero matrix).
pub fn asymmetry<T: Real>(a: &ComplexMat<T>) -> T {
    let n = frob(a);
    if n == T::zero() {
        return T::zero();
    }
    frob(&(a - a.adjoint())) / n
}

pub fn is_hermitian<T: Real>(a: &ComplexMat<T>) -> bool {
    a.is_square() && asymmetry(a) <= T::tol(HERMITIAN_TOL)
}

/// Fails unless `a` is square and Hermitian within [`HERMITIAN_TOL`].
pub fn check_hermitian<T: Real>(a: &ComplexMat<T>) -> Result<()> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch {
            context: "hermitian check",
            expected: "square".into(),
            actual: dims(a.nrows(), a.ncols()),
        });
    }
    if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite("matrix"));
    }
    let asym = asymmetry(a);
    if asym > T::tol(HERMITIAN_TOL) {
        return Err(Error::NotHermitian(asym.as_f64()));
    }
    Ok(())
}

/// Hermitian and `λ_min ≥ −1e−8·max(1, λ_max)`.
pub fn is_psd<T: Real>(a: &ComplexMat<T>) -> bool {
    if !is_hermitian(a) {
        return false;
    }
    let e = HermitianEigen::new(a);
    let lmax = e.values[0].max(T::one());
    e.values[e.values.len() - 1] >= -T::tol(PSD_TOL) * lmax
}

/// Eigendecomposition of a Hermitian matrix with eigenvalues sorted in
/// descending order (`values[0]` is the largest).
#[derive(Debug, Clone)]
pub struct HermitianEigen<T: Real> {
    pub values: DVector<T>,
    pub vectors: ComplexMat<T>,
}

impl<T: Real> HermitianEigen<T> {
    /// Decomposes the Hermitian part of `a`.
    pub fn new(a: &ComplexMat<T>) -> Self {
        let n = a.nrows();
        if n == 0 {
            return Self {
                values: DVector::zeros(0),
                vectors: ComplexMat::zeros(0, 0),
            };
        }
        let h = hermitian_part(a);
        let (vals, vecs) = T::eigh(&h).unwrap_or_else(|| {
            let e = SymmetricEigen::new(h);
            (e.eigenvalues, e.eigenvectors)
        });
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| vals[j].partial_cmp(&vals[i]).unwrap_or(std::cmp::Ordering::Equal));
        let values = DVector::from_iterator(n, order.iter().map(|&i| vals[i]));
        let mut vectors = ComplexMat::zeros(n, n);
        for (dst, &src) in order.iter().enumerate() {
            vectors.set_column(dst, &vecs.column(src));
        }
        Self { values, vectors }
    }

    pub fn top_vector(&self) -> ComplexVec<T> {
        self.vectors.column(0).into_owned()
    }

    /// Sum of the `k` largest eigenvalues (Ky Fan k-norm for PSD input).
    pub fn top_sum(&self, k: usize) -> T {
        sum(self.values.iter().take(k).copied())
    }

    /// `V diag(f(λ)) V^H`.
    pub fn reconstruct_with(&self, f: impl Fn(T) -> T) -> ComplexMat<T> {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for j in 0..n {
            let s = f(self.values[j]);
            for i in 0..n {
                scaled[(i, j)] *= s;
            }
        }
        &scaled * self.vectors.adjoint()
    }
}

/// `x x^H`.
pub fn outer<T: Real>(x: &ComplexVec<T>) -> ComplexMat<T> {
    x * x.adjoint()
}

/// `diag(x)` as a dense matrix.
pub fn diag_matrix<T: Real>(x: &ComplexVec<T>) -> ComplexMat<T> {
    ComplexMat::from_diagonal(x)
}

/// Entrywise phase `x / |x|`, mapping zeros to `1`.
pub fn unit_phases<T: Real>(x: &ComplexVec<T>) -> ComplexVec<T> {
    x.map(|z| {
        let r = cabs(z);
        if r > T::zero() {
            z.unscale(r)
        } else {
            Complex::new(T::one(), T::zero())
        }
    })
}

/// Real part of the trace.
pub fn re_trace<T: Real>(a: &ComplexMat<T>) -> T {
    a.trace().re
}

/// Fails when `a` is not `rows x cols`.
pub fn expect_dims<T: Real>(
    a: &ComplexMat<T>,
    rows: usize,
    cols: usize,
    context: &'static str,
) -> Result<()> {
    if a.nrows() != rows || a.ncols() != cols {
        return Err(Error::DimensionMismatch {
            context,
            expected: dims(rows, cols),
            actual: dims(a.nrows(), a.ncols()),
        });
    }
    Ok(())
}
