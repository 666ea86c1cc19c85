//! Euclidean projections onto the two dual feasible sets:
//! the weighted simplex `{x ≥ 0, sᵀx = 1}` and the unit-trace PSD cone
//! `{X ⪰ 0, tr X = 1}`.

use serde::{Deserialize, Serialize};

use crate::linalg::{CMat, HermitianEigen, RVec};
use crate::{json, Error, Real, Result};

/// `{x ∈ ℝ^K : x ≥ 0, sᵀx = 1}` for strictly positive weights `s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct WeightedSimplex<T: Real> {
    #[serde(with = "json::rvec")]
    s: RVec<T>,
}

impl<T: Real> WeightedSimplex<T> {
    pub fn new(s: RVec<T>) -> Result<Self> {
        if s.is_empty() {
            return Err(Error::Dimension("simplex weights must be non-empty".into()));
        }
        if s.iter().any(|&w| !(w > T::zero() && w.is_finite())) {
            return Err(Error::InvalidArgument("simplex weights must be positive".into()));
        }
        Ok(Self { s })
    }

    /// The standard simplex (`s = 1`).
    pub fn unit(k: usize) -> Self {
        Self {
            s: RVec::from_element(k.max(1), T::one()),
        }
    }

    pub fn weights(&self) -> &RVec<T> {
        &self.s
    }

    pub fn dim(&self) -> usize {
        self.s.len()
    }

    pub fn project(&self, d: &RVec<T>) -> RVec<T> {
        project_weighted_simplex(d, self)
    }

    pub fn contains(&self, x: &RVec<T>, tol: T) -> bool {
        x.len() == self.dim() && x.iter().all(|&v| v >= -tol) && (self.s.dot(x) - T::one()).abs() <= tol
    }
}

/// Projection onto the weighted simplex in at most `K` passes.
///
/// With ratios `r_k = d_k / s_k` sorted ascending, the solution is
/// `x_k = max(0, d_k − v s_k)` where `v` solves `Σ s_k² (r_k − v)_+ = 1`.
/// The active set is a suffix of the sorted order, found by dropping the
/// smallest ratio until `v < r_min(active)`.
pub fn project_weighted_simplex<T: Real>(d: &RVec<T>, set: &WeightedSimplex<T>) -> RVec<T> {
    let s = set.weights();
    let k = s.len();
    assert_eq!(d.len(), k, "vector and simplex dimensions differ");
    let ratio = |i: usize| d[i] / s[i];
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        ratio(a)
            .partial_cmp(&ratio(b))
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });

    // suffix sums of s_k d_k and s_k², accumulated from the back
    let mut sd = T::zero();
    let mut ss = T::zero();
    let mut v_at = vec![T::zero(); k];
    for j in (0..k).rev() {
        let i = order[j];
        sd += s[i] * d[i];
        ss += s[i] * s[i];
        v_at[j] = (sd - T::one()) / ss;
    }
    let mut v = v_at[k - 1];
    for (j, &i) in order.iter().enumerate() {
        if v_at[j] < ratio(i) {
            v = v_at[j];
            break;
        }
    }
    RVec::from_iterator(k, (0..k).map(|i| (d[i] - v * s[i]).max(T::zero())))
}

/// `{X ∈ ℍ^r : X ⪰ 0, tr X = 1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceSimplexCone {
    r: usize,
}

impl TraceSimplexCone {
    pub fn new(r: usize) -> Result<Self> {
        if r == 0 {
            return Err(Error::Dimension("matrix dimension must be at least 1".into()));
        }
        Ok(Self { r })
    }

    pub fn dim(&self) -> usize {
        self.r
    }

    pub fn project<T: Real>(&self, y: &CMat<T>) -> CMat<T> {
        assert_eq!(y.nrows(), self.r, "matrix and cone dimensions differ");
        project_psd_trace(y)
    }
}

/// Projection onto unit-trace PSD matrices: eigendecompose, project the
/// spectrum onto the standard simplex, rebuild.
pub fn project_psd_trace<T: Real>(y: &CMat<T>) -> CMat<T> {
    let eig = HermitianEigen::new(y);
    let x = project_weighted_simplex(&eig.values, &WeightedSimplex::unit(eig.values.len()));
    let projected = HermitianEigen {
        values: x,
        vectors: eig.vectors,
    };
    projected.map(|v| v)
}


#[cfg(test)]
mod tests {
    use super::oracle::brute_force_simplex;
    use super::*;
    use crate::linalg::testing::*;
    use crate::linalg::{hermitian_part, CVec};
    use crate::linalg::{inner, real, trace_re};
    use proptest::prelude::*;
    use rand::Rng;

    fn v(x: &[f64]) -> RVec<f64> {
        RVec::from_column_slice(x)
    }

    fn proj(d: &[f64], s: &[f64]) -> RVec<f64> {
        project_weighted_simplex(&v(d), &WeightedSimplex::new(v(s)).unwrap())
    }

    #[test]
    fn simplex_examples() {
        assert!((proj(&[0.6, 0.4], &[1.0, 1.0]) - v(&[0.6, 0.4])).norm() < 1e-15);
        assert!((proj(&[0.8, 0.6], &[1.0, 1.0]) - v(&[0.6, 0.4])).norm() < 1e-15);
        assert!((proj(&[2.0, 0.0], &[2.0, 1.0]) - v(&[0.5, 0.0])).norm() < 1e-15);
        // oracle agrees on the same examples
        assert_eq!(brute_force_simplex(&[2.0, 0.0], &[2.0, 1.0]), vec![0.5, 0.0]);
    }

    #[test]
    fn weights_rejected_when_nonpositive() {
        assert!(WeightedSimplex::new(v(&[1.0, 0.0])).is_err());
        assert!(WeightedSimplex::new(v(&[])).is_err());
    }

    #[test]
    fn simplex_matches_brute_force() {
        let mut rng = rng(100);
        for trial in 0..600 {
            let k = 1 + trial % 6;
            let d: Vec<f64> = (0..k).map(|_| 3.0 * gaussian(&mut rng)).collect();
            let s: Vec<f64> = (0..k).map(|_| 0.1 + 2.0 * rng.random::<f64>()).collect();
            let got = proj(&d, &s);
            let want = brute_force_simplex(&d, &s);
            let dev = (0..k).map(|i| (got[i] - want[i]).abs()).fold(0.0, f64::max);
            assert!(dev < 1e-10, "k={k} dev={dev}");
        }
    }

    #[test]
    fn simplex_handles_ties() {
        let p = proj(&[0.3, 0.3, 0.3, -1.0], &[1.0, 1.0, 1.0, 1.0]);
        for i in 0..3 {
            assert!((p[i] - 1.0 / 3.0).abs() < 1e-15);
        }
        assert_eq!(p[3], 0.0);
    }

    #[test]
    fn psd_examples() {
        let diag = |a: f64, b: f64| CMat::from_diagonal(&CVec::from_vec(vec![real(a), real(b)]));
        assert!((project_psd_trace(&diag(0.7, 0.3)) - diag(0.7, 0.3)).norm() < 1e-14);
        assert!((project_psd_trace(&diag(2.0, 0.0)) - diag(1.0, 0.0)).norm() < 1e-14);
        let u = random_unitary(&mut rng(3), 2);
        let y = &u * diag(0.8, 0.6) * u.adjoint();
        let want = &u * diag(0.6, 0.4) * u.adjoint();
        assert!((project_psd_trace(&y) - want).norm() < 1e-13);
    }

    #[test]
    fn psd_matches_spectral_brute_force() {
        let mut rng = rng(101);
        for trial in 0..100 {
            let r = 1 + trial % 6;
            let y = random_hermitian(&mut rng, r) * real(1.5);
            let eig = HermitianEigen::new(&y);
            let lam = brute_force_simplex(eig.values.as_slice(), &vec![1.0; r]);
            let want = HermitianEigen {
                values: v(&lam),
                vectors: eig.vectors.clone(),
            }
            .map(|x| x);
            let got = project_psd_trace(&y);
            let dev = (got - want).iter().map(|z| z.norm()).fold(0.0, f64::max);
            assert!(dev < 1e-10);
        }
    }

    fn feasible_psd(rng: &mut impl Rng, r: usize) -> CMat<f64> {
        let b = random_cmat(rng, r, r);
        let a = &b * b.adjoint();
        let t = trace_re(&a);
        a * real(1.0 / t)
    }

    #[test]
    fn psd_variational_inequality() {
        let mut rng = rng(102);
        for _ in 0..20 {
            let r = 4;
            let z = random_hermitian(&mut rng, r) * real(2.0);
            let p = project_psd_trace(&z);
            assert!(HermitianEigen::new(&p).min() > -1e-12);
            assert!((trace_re(&p) - 1.0).abs() < 1e-12);
            for _ in 0..100 {
                let y = feasible_psd(&mut rng, r);
                assert!(inner(&(&z - &p), &(&y - &p)) <= 1e-10);
            }
        }
    }

    fn vec_strategy() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>)> {
        (1usize..=6).prop_flat_map(|k| {
            (
                prop::collection::vec(-5.0..5.0f64, k),
                prop::collection::vec(-5.0..5.0f64, k),
                prop::collection::vec(0.05..3.0f64, k),
            )
        })
    }

    proptest! {
        #[test]
        fn simplex_idempotent_nonexpansive_and_optimal((a, b, s) in vec_strategy()) {
            let set = WeightedSimplex::new(v(&s)).unwrap();
            let pa = set.project(&v(&a));
            let pb = set.project(&v(&b));
            prop_assert!(set.contains(&pa, 1e-12));
            prop_assert!((set.project(&pa) - &pa).norm() <= 1e-12);
            prop_assert!((&pa - &pb).norm() <= (v(&a) - v(&b)).norm() + 1e-12);
            // variational inequality against a feasible point built from b
            let y = v(&b.iter().map(|x| x.abs()).collect::<Vec<_>>());
            let y = &y / set.weights().dot(&y).max(1e-12);
            if set.contains(&y, 1e-9) {
                prop_assert!((v(&a) - &pa).dot(&(y - &pa)) <= 1e-10);
            }
        }

        #[test]
        fn psd_idempotent_and_nonexpansive(seed in any::<u64>(), r in 1usize..=5) {
            let mut g = rng(seed);
            let a = hermitian_part(&random_cmat(&mut g, r, r));
            let b = hermitian_part(&random_cmat(&mut g, r, r));
            let pa = project_psd_trace(&a);
            let pb = project_psd_trace(&b);
            prop_assert!((project_psd_trace(&pa) - &pa).norm() <= 1e-12);
            prop_assert!((&pa - &pb).norm() <= (&a - &b).norm() + 1e-12);
        }
    }
}
