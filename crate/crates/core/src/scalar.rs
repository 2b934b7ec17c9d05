//! Scalar abstraction shared by every numeric routine in the crate.
//!
//! All math is written once against [`Real`] and instantiated for `f64`
//! (the default, see the aliases in the crate root) and `f32`.

use nalgebra::{Complex, DMatrix, DVector, RealField};
use num_traits::{FromPrimitive, ToPrimitive};

/// Real floating-point scalar: `f32` or `f64`.
pub trait Real: RealField + Copy + FromPrimitive + ToPrimitive + Default {
    /// Smallest relative tolerance worth asking of this precision.
    const TOL_FLOOR: f64;

    /// Converts an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable")
    }

    /// Lossy conversion back to `f64` (reporting, CSV, RNG plumbing).
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// `tol`, clamped from below to what the precision can deliver.
    #[inline]
    fn tol(tol: f64) -> Self {
        Self::lit(tol.max(Self::TOL_FLOOR))
    }

    #[inline]
    fn abs_val(self) -> Self {
        if self < Self::zero() {
            -self
        } else {
            self
        }
    }

    /// Eigenvalues (ascending) and eigenvectors of a Hermitian matrix; only
    /// the lower triangle is read. `None` if the iteration fails.
    fn eigh(a: &ComplexMat<Self>) -> Option<(DVector<Self>, ComplexMat<Self>)>;
}

macro_rules! faer_eigh {
    ($t:ty, $c:ty) => {
        fn eigh(a: &ComplexMat<$t>) -> Option<(DVector<$t>, ComplexMat<$t>)> {
            let n = a.nrows();
            let m = faer::Mat::<$c>::from_fn(n, n, |i, j| {
                let z = a[(i, j)];
                <$c>::new(z.re, z.im)
            });
            let e = m.self_adjoint_eigen(faer::Side::Lower).ok()?;
            let s = e.S().column_vector();
            let u = e.U();
            let values = DVector::from_fn(n, |i, _| s[i].re);
            let vectors = DMatrix::from_fn(n, n, |i, j| {
                let z = u[(i, j)];
                Complex::new(z.re, z.im)
            });
            Some((values, vectors))
        }
    };
}

impl Real for f64 {
    const TOL_FLOOR: f64 = 0.0;
    faer_eigh!(f64, faer::c64);
}

impl Real for f32 {
    const TOL_FLOOR: f64 = 1e-5;
    faer_eigh!(f32, faer::c32);
}

/// Complex scalar.
pub type Cx<T> = Complex<T>;
/// Dense complex matrix. Entries are stored column-major by nalgebra; all
/// indexing in this crate is `(row, col)`.
pub type ComplexMat<T> = DMatrix<Complex<T>>;
/// Dense complex column vector.
pub type ComplexVec<T> = DVector<Complex<T>>;

/// `e^{jθ}`.
#[inline]
pub fn cis<T: Real>(theta: T) -> Complex<T> {
    Complex::new(theta.cos(), theta.sin())
}

/// `|z|`.
#[inline]
pub fn cabs<T: Real>(z: Complex<T>) -> T {
    z.norm_sqr().sqrt()
}

/// Real number as complex.
#[inline]
pub fn re<T: Real>(x: T) -> Complex<T> {
    Complex::new(x, T::zero())
}

/// Sum of an iterator of reals.
#[inline]
pub fn sum<T: Real, I: IntoIterator<Item = T>>(it: I) -> T {
    it.into_iter().fold(T::zero(), |a, b| a + b)
}
