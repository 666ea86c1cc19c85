//! Dense Hermitian linear algebra shared by the solvers.
//!
//! Everything here works on small complex matrices (dimension ≤ a few tens)
//! and goes through a Hermitian eigendecomposition or a Cholesky factor.
//! Square roots and pseudo-inverses clamp eigenvalues rather than failing, so
//! callers decide what "numerically PSD" means for them.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

use crate::{Real, C};

pub type CMat<T> = DMatrix<C<T>>;
pub type CVec<T> = DVector<C<T>>;
pub type RVec<T> = DVector<T>;

#[inline]
pub fn cplx<T: Real>(re: T, im: T) -> C<T> {
    C::new(re, im)
}

#[inline]
pub fn real<T: Real>(re: T) -> C<T> {
    C::new(re, T::zero())
}

/// `|z|`.
#[inline]
pub fn modulus<T: Real>(z: C<T>) -> T {
    z.norm_sqr().sqrt()
}

pub fn identity<T: Real>(n: usize) -> CMat<T> {
    CMat::identity(n, n)
}

/// `(A + A^H) / 2`.
pub fn hermitian_part<T: Real>(a: &CMat<T>) -> CMat<T> {
    (a + a.adjoint()) * real(T::lit(0.5))
}

/// `‖A − A^H‖_F / ‖A‖_F` (zero for the zero matrix).
pub fn hermitian_asymmetry<T: Real>(a: &CMat<T>) -> T {
    let n = a.norm();
    if n == T::zero() {
        return T::zero();
    }
    (a - a.adjoint()).norm() / n
}

pub fn trace_re<T: Real>(a: &CMat<T>) -> T {
    a.diagonal().iter().fold(T::zero(), |acc, z| acc + z.re)
}

/// `Re(u^H A u)`.
pub fn quad_form<T: Real>(a: &CMat<T>, u: &CVec<T>) -> T {
    u.dotc(&(a * u)).re
}

/// `u u^H`.
pub fn outer<T: Real>(u: &CVec<T>) -> CMat<T> {
    u * u.adjoint()
}

/// `‖A‖_F` scaled for relative comparisons; never returns zero.
pub fn scale_of<T: Real>(a: &CMat<T>) -> T {
    let n = a.norm();
    if n > T::zero() {
        n
    } else {
        T::one()
    }
}

/// Hermitian eigendecomposition with eigenvalues sorted in descending order.
#[derive(Debug, Clone)]
pub struct HermitianEigen<T: Real> {
    pub values: RVec<T>,
    pub vectors: CMat<T>,
}

impl<T: Real> HermitianEigen<T> {
    pub fn new(a: &CMat<T>) -> Self {
        let n = a.nrows();
        if n == 0 {
            return Self {
                values: RVec::zeros(0),
                vectors: CMat::zeros(0, 0),
            };
        }
        let eig = SymmetricEigen::new(hermitian_part(a));
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| {
            eig.eigenvalues[j]
                .partial_cmp(&eig.eigenvalues[i])
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let values = RVec::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
        let mut vectors = CMat::zeros(n, n);
        for (dst, &src) in order.iter().enumerate() {
            vectors.set_column(dst, &eig.eigenvectors.column(src));
        }
        Self { values, vectors }
    }

    pub fn max(&self) -> T {
        if self.values.is_empty() {
            T::zero()
        } else {
            self.values[0]
        }
    }

    pub fn min(&self) -> T {
        if self.values.is_empty() {
            T::zero()
        } else {
            self.values[self.values.len() - 1]
        }
    }

    /// `V diag(f(λ)) V^H`.
    pub fn map(&self, f: impl Fn(T) -> T) -> CMat<T> {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for j in 0..n {
            let w = real(f(self.values[j]));
            scaled.column_mut(j).iter_mut().for_each(|z| *z *= w);
        }
        hermitian_part(&(scaled * self.vectors.adjoint()))
    }

    /// Number of eigenvalues above `rel · λ_max` (and above zero).
    pub fn rank(&self, rel: T) -> usize {
        let top = self.max();
        if top <= T::zero() {
            return 0;
        }
        let cut = rel * top;
        self.values.iter().filter(|&&v| v > cut).count()
    }
}

pub fn lambda_max<T: Real>(a: &CMat<T>) -> T {
    HermitianEigen::new(a).max()
}

pub fn lambda_min<T: Real>(a: &CMat<T>) -> T {
    HermitianEigen::new(a).min()
}

/// Principal square root of a Hermitian matrix, negative eigenvalues clamped to 0.
pub fn psd_sqrt<T: Real>(a: &CMat<T>) -> CMat<T> {
    HermitianEigen::new(a).map(|v| if v > T::zero() { v.sqrt() } else { T::zero() })
}

/// Moore–Penrose inverse of a Hermitian matrix; eigenvalues with
/// `|λ| ≤ rel · max|λ|` are treated as zero.
pub fn hermitian_pinv<T: Real>(a: &CMat<T>, rel: T) -> CMat<T> {
    let eig = HermitianEigen::new(a);
    let top = eig.values.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    let cut = rel * top;
    eig.map(|v| if v.abs() > cut { T::one() / v } else { T::zero() })
}

/// `A^{-1/2}` on the range of a PSD matrix (pseudo-inverse square root).
pub fn psd_inv_sqrt<T: Real>(a: &CMat<T>, rel: T) -> CMat<T> {
    let eig = HermitianEigen::new(a);
    let cut = rel * eig.max().max(T::zero());
    eig.map(|v| {
        if v > cut && v > T::zero() {
            T::one() / v.sqrt()
        } else {
            T::zero()
        }
    })
}

/// Cholesky factor of a Hermitian positive-definite matrix.
///
/// The complex square root never fails, so positivity is checked on the
/// factor's diagonal rather than trusted to the decomposition.
pub fn cholesky<T: Real>(a: &CMat<T>) -> Option<Cholesky<C<T>, nalgebra::Dyn>> {
    let chol = Cholesky::new(hermitian_part(a))?;
    let l = chol.l_dirty();
    let ok = (0..a.nrows()).all(|i| {
        let d = l[(i, i)];
        d.re > T::zero() && d.re.is_finite() && d.im.abs() <= T::default_epsilon() * d.re
    });
    ok.then_some(chol)
}

/// Inverse of a Hermitian positive-definite matrix.
pub fn inv_pd<T: Real>(a: &CMat<T>) -> Option<CMat<T>> {
    cholesky(a).map(|c| hermitian_part(&c.inverse()))
}

/// Natural log-determinant of a Hermitian positive-definite matrix.
pub fn logdet_pd<T: Real>(a: &CMat<T>) -> Option<T> {
    let chol = cholesky(a)?;
    let l = chol.l_dirty();
    let mut acc = T::zero();
    for i in 0..a.nrows() {
        let d = l[(i, i)].re;
        if !(d > T::zero()) {
            return None;
        }
        acc += d.ln();
    }
    Some(acc * T::lit(2.0))
}

/// Orthonormal basis (as columns) for the Hermitian matrices of size `n`
/// under the real inner product `Re tr(A^H B)`.
pub fn hermitian_basis<T: Real>(n: usize) -> Vec<CMat<T>> {
    let mut basis = Vec::with_capacity(n * n);
    let h = T::lit(std::f64::consts::FRAC_1_SQRT_2);
    for i in 0..n {
        let mut e = CMat::zeros(n, n);
        e[(i, i)] = real(T::one());
        basis.push(e);
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let mut e = CMat::zeros(n, n);
            e[(i, j)] = real(h);
            e[(j, i)] = real(h);
            basis.push(e);
            let mut e = CMat::zeros(n, n);
            e[(i, j)] = cplx(T::zero(), h);
            e[(j, i)] = cplx(T::zero(), -h);
            basis.push(e);
        }
    }
    basis
}

/// `Re tr(A^H B)`.
pub fn inner<T: Real>(a: &CMat<T>, b: &CMat<T>) -> T {
    a.iter()
        .zip(b.iter())
        .fold(T::zero(), |acc, (x, y)| acc + (x.conj() * y).re)
}
