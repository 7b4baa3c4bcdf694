//! Scalar abstraction shared by every numerical routine in the crate.

use nalgebra::{Complex, ComplexField, DMatrix, DVector, RealField};
use num_traits::{FromPrimitive, ToPrimitive};

/// Real floating-point type the simulator is generic over (`f32` or `f64`).
pub trait Real: RealField + Copy + FromPrimitive + ToPrimitive + Send + Sync + 'static {
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        nalgebra::convert(x)
    }

    /// A double-precision tolerance widened by `√(ε_T / ε_f64)`, so it is
    /// unchanged for `f64` and about `2e4` times looser for `f32`.
    #[inline]
    fn tol(x: f64) -> Self {
        Self::lit(Self::tol_f64(x))
    }

    /// [`Real::tol`] as an `f64`.
    #[inline]
    fn tol_f64(x: f64) -> f64 {
        x * (Self::default_epsilon().as_f64() / f64::EPSILON).sqrt()
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    #[inline]
    fn infinity() -> Self {
        Self::lit(f64::INFINITY)
    }

    #[inline]
    fn neg_infinity() -> Self {
        Self::lit(f64::NEG_INFINITY)
    }

    #[inline]
    fn is_finite_value(self) -> bool {
        self.as_f64().is_finite()
    }
}

impl Real for f32 {}
impl Real for f64 {}

pub type C<T> = Complex<T>;

/// Dense complex square matrix; operators, states and projectors all use it.
pub type ComplexMatrix<T> = DMatrix<Complex<T>>;

/// Dense complex column vector (pure states).
pub type ComplexVector<T> = DVector<Complex<T>>;

#[inline]
pub fn cr<T: Real>(re: T) -> Complex<T> {
    Complex::new(re, T::zero())
}

#[inline]
pub fn ci<T: Real>(im: T) -> Complex<T> {
    Complex::new(T::zero(), im)
}

/// Squared Euclidean norm of a state vector.
#[inline]
pub(crate) fn norm_sqr<T: Real>(v: &ComplexVector<T>) -> T {
    v.iter().fold(T::zero(), |acc, z| acc + z.norm_sqr())
}

/// Real part of the trace.
#[inline]
pub(crate) fn trace_re<T: Real>(m: &ComplexMatrix<T>) -> T {
    m.trace().re
}

/// `Tr[A B]` without forming the product.
pub(crate) fn trace_product<T: Real>(a: &ComplexMatrix<T>, b: &ComplexMatrix<T>) -> Complex<T> {
    let d = a.nrows();
    let mut acc = Complex::new(T::zero(), T::zero());
    for i in 0..d {
        for j in 0..d {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

/// Largest absolute entry, used as a cheap operator-size measure in tolerance checks.
pub(crate) fn max_abs<T: Real>(m: &ComplexMatrix<T>) -> T {
    m.iter().fold(T::zero(), |acc, z| {
        let a = z.modulus();
        if a > acc {
            a
        } else {
            acc
        }
    })
}

/// `ln(Σ exp(x_i))` computed stably.
pub fn log_sum_exp<T: Real>(xs: impl IntoIterator<Item = T>) -> T {
    let xs: Vec<T> = xs.into_iter().collect();
    let max = xs
        .iter()
        .copied()
        .fold(T::neg_infinity(), |a, b| if b > a { b } else { a });
    if !max.is_finite_value() {
        return max;
    }
    let s = xs.iter().fold(T::zero(), |acc, &x| acc + (x - max).exp());
    max + s.ln()
}
