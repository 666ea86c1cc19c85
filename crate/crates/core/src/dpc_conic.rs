//! Barrier solver for the minimum-power dual of DPC SINR balancing.
//!
//! For a target SINR `γ` and unit-noise vectors `v_k`,
//!
//! ```text
//! λ*(γ) = max Σ μ_k  s.t.  tr Y = 1,  μ ≥ 0,
//!         C_k = Y + Σ_{j<k} μ_j v_j v_j^H − (μ_k/γ) v_k v_k^H ⪰ 0,
//! ```
//!
//! is the smallest `λ` with `Σ Q_k ⪯ λ I` that meets every SINR target. The
//! barrier multipliers `Q_k = t C_k^{-1}` are primal feasible, so every solve
//! brackets `λ*(γ)` from both sides. The balanced SINR is the root of
//! `λ*(γ) = 1`, bracketed the same way.

use nalgebra::DMatrix;

use crate::linalg::{cholesky, hermitian_basis, inner, lambda_max, outer, real, trace_re, CMat, CVec, RVec};
use crate::{Error, Real, Result};

const MAX_NEWTON: usize = 80;
const MAX_STAGES: usize = 40;
const SHRINK: f64 = 0.1;
const MAX_ROOT: usize = 60;

pub(crate) struct ConicPoint<T: Real> {
    pub y: CMat<T>,
    pub mu: RVec<T>,
    /// Primal covariances, one per user.
    pub q: Vec<CMat<T>>,
    /// Dual objective `Σ μ`, a lower bound on `λ*(γ)`.
    pub lower: T,
}

struct Problem<'a, T: Real> {
    vectors: &'a CMat<T>,
    rank_one: Vec<CMat<T>>,
    basis: Vec<CMat<T>>,
    gamma: T,
}

impl<T: Real> Problem<'_, T> {
    fn ny(&self) -> usize {
        self.basis.len()
    }

    fn users(&self) -> usize {
        self.vectors.ncols()
    }

    fn y_of(&self, x: &RVec<T>) -> CMat<T> {
        let r = self.vectors.nrows();
        self.basis
            .iter()
            .enumerate()
            .fold(CMat::zeros(r, r), |acc, (a, e)| acc + e * real(x[a]))
    }

    fn blocks(&self, x: &RVec<T>) -> Vec<CMat<T>> {
        let ny = self.ny();
        let mut b = self.y_of(x);
        let mut out = Vec::with_capacity(self.users());
        for k in 0..self.users() {
            let mu = x[ny + k];
            out.push(&b - &self.rank_one[k] * real(mu / self.gamma));
            b += &self.rank_one[k] * real(mu);
        }
        out
    }

    /// Coefficient of coordinate `a` in block `k`.
    fn coefficient(&self, k: usize, a: usize) -> Option<(CMat<T>, T)> {
        let ny = self.ny();
        if a < ny {
            return Some((self.basis[a].clone(), T::one()));
        }
        let j = a - ny;
        match j.cmp(&k) {
            std::cmp::Ordering::Less => Some((self.rank_one[j].clone(), T::one())),
            std::cmp::Ordering::Equal => Some((self.rank_one[j].clone(), -T::one() / self.gamma)),
            std::cmp::Ordering::Greater => None,
        }
    }

    /// Barrier objective `−Σμ/t − Σ log det C_k − Σ log μ_k`, or `None`
    /// outside the domain.
    fn objective(&self, x: &RVec<T>, t: T) -> Option<T> {
        let ny = self.ny();
        let mut value = T::zero();
        for k in 0..self.users() {
            let mu = x[ny + k];
            if !(mu > T::zero()) {
                return None;
            }
            value -= mu / t + mu.ln();
        }
        for c in self.blocks(x) {
            let ch = cholesky(&c)?;
            let l = ch.l();
            for i in 0..l.nrows() {
                value -= T::lit(2.0) * l[(i, i)].re.ln();
            }
        }
        value.is_finite().then_some(value)
    }

    fn derivatives(&self, x: &RVec<T>, t: T) -> Option<(RVec<T>, DMatrix<T>)> {
        let ny = self.ny();
        let n = ny + self.users();
        let mut grad = RVec::zeros(n);
        let mut hess = DMatrix::zeros(n, n);
        for (k, c) in self.blocks(x).iter().enumerate() {
            let ch = cholesky(c)?;
            let l = ch.l();
            let mut scaled: Vec<(usize, CMat<T>)> = Vec::new();
            for a in 0..n {
                if let Some((m, s)) = self.coefficient(k, a) {
                    let half = l.solve_lower_triangular(&m)?;
                    let w = l.solve_lower_triangular(&half.adjoint())?;
                    scaled.push((a, w * real(s)));
                }
            }
            for (i, (a, wa)) in scaled.iter().enumerate() {
                grad[*a] -= trace_re(wa);
                for (b, wb) in scaled.iter().take(i + 1) {
                    let h = inner(wa, wb);
                    hess[(*a, *b)] += h;
                    if a != b {
                        hess[(*b, *a)] += h;
                    }
                }
            }
        }
        for j in 0..self.users() {
            let mu = x[ny + j];
            grad[ny + j] -= T::one() / t + T::one() / mu;
            hess[(ny + j, ny + j)] += T::one() / (mu * mu);
        }
        Some((grad, hess))
    }
}

/// Barrier path-following for `λ*(γ)`, stopped once the duality gap falls
/// below `rel_gap` times the dual value.
pub(crate) fn min_power_dual<T: Real>(vectors: &CMat<T>, gamma: T, rel_gap: T) -> Result<ConicPoint<T>> {
    let (r, users) = vectors.shape();
    let rank_one: Vec<CMat<T>> = (0..users).map(|k| outer(&vectors.column(k).into_owned())).collect();
    let basis = hermitian_basis::<T>(r);
    let problem = Problem {
        vectors,
        rank_one,
        basis,
        gamma,
    };
    let ny = problem.ny();
    let n = ny + users;
    let trace_row: RVec<T> = RVec::from_iterator(
        n,
        (0..n).map(|a| if a < ny { trace_re(&problem.basis[a]) } else { T::zero() }),
    );
    let start_y = CMat::<T>::identity(r, r) * real(T::one() / T::lit(r as f64));
    let mut x = RVec::zeros(n);
    for (a, e) in problem.basis.iter().enumerate() {
        x[a] = inner(e, &start_y);
    }
    let mut mu0 = T::one();
    loop {
        for j in 0..users {
            x[ny + j] = mu0;
        }
        if problem.objective(&x, T::one()).is_some() {
            break;
        }
        mu0 *= T::lit(0.5);
        if mu0 < T::lit(1e-30) {
            return Err(Error::Degenerate("no strictly feasible start for the barrier".into()));
        }
    }
    let barrier_size = T::lit((users * r + users) as f64);
    let mut t = T::one() / barrier_size;
    for _ in 0..MAX_STAGES {
        for _ in 0..MAX_NEWTON {
            let (g, h) = problem
                .derivatives(&x, t)
                .ok_or_else(|| Error::Degenerate("barrier iterate left the domain".into()))?;
            let mut kkt = DMatrix::<T>::zeros(n + 1, n + 1);
            kkt.view_mut((0, 0), (n, n)).copy_from(&h);
            for a in 0..n {
                kkt[(a, n)] = trace_row[a];
                kkt[(n, a)] = trace_row[a];
            }
            let mut rhs = RVec::zeros(n + 1);
            for a in 0..n {
                rhs[a] = -g[a];
            }
            let sol = kkt
                .lu()
                .solve(&rhs)
                .ok_or_else(|| Error::Singular("barrier Newton system is singular".into()))?;
            let dx = sol.rows(0, n).into_owned();
            let decrement = -g.dot(&dx);
            if !(decrement > T::lit(1e-12)) {
                break;
            }
            let f0 = problem.objective(&x, t).unwrap();
            let mut step = T::one();
            let mut moved = false;
            for _ in 0..60 {
                let trial = &x + &dx * step;
                if let Some(f1) = problem.objective(&trial, t) {
                    if f1 <= f0 - T::lit(0.25) * step * decrement {
                        x = trial;
                        moved = true;
                        break;
                    }
                }
                step *= T::lit(0.5);
            }
            if !moved {
                break;
            }
        }
        let lower = (0..users).fold(T::zero(), |s, j| s + x[ny + j]);
        if barrier_size * t <= rel_gap * lower.max(T::default_epsilon()) {
            break;
        }
        t *= T::lit(SHRINK);
    }
    let blocks = problem.blocks(&x);
    let mut q = Vec::with_capacity(users);
    for c in &blocks {
        let ch = cholesky(c).ok_or_else(|| Error::Degenerate("barrier block lost definiteness".into()))?;
        q.push(ch.inverse() * real(t));
    }
    let mu = x.rows(ny, users).into_owned();
    let y = problem.y_of(&x);
    let scale = trace_re(&y);
    Ok(ConicPoint {
        y: y / real(scale),
        lower: mu.sum(),
        mu,
        q,
    })
}

/// Precoder with the given column directions whose DPC SINRs are all
/// equal and as large as possible under `F F^H ⪯ I`. Returns the precoder and
/// its common SINR.
pub(crate) fn equal_sinr_precoder<T: Real>(vectors: &CMat<T>, directions: &CMat<T>) -> Option<(CMat<T>, T)> {
    let (r, k) = vectors.shape();
    let mut unit = CMat::<T>::zeros(r, k);
    let mut gains = DMatrix::<T>::zeros(k, k);
    for j in 0..k {
        let d = directions.column(j);
        let n = d.norm();
        if !(n > T::zero()) {
            return None;
        }
        unit.set_column(j, &(d / real(n)));
    }
    for j in 0..k {
        for i in 0..k {
            gains[(j, i)] = vectors.column(j).dotc(&unit.column(i)).norm_sqr();
        }
        if !(gains[(j, j)] > T::zero()) {
            return None;
        }
    }
    let powers = |gamma: T| {
        let mut b = RVec::<T>::zeros(k);
        for j in (0..k).rev() {
            let interference = ((j + 1)..k).fold(T::one(), |s, i| s + b[i] * gains[(j, i)]);
            b[j] = gamma * interference / gains[(j, j)];
        }
        b
    };
    let peak = |b: &RVec<T>| {
        let cols = CMat::from_fn(r, k, |row, col| unit[(row, col)] * real(b[col].sqrt()));
        lambda_max(&(&cols * cols.adjoint()))
    };
    let mut lo = T::zero();
    let mut hi = (0..k).fold(T::max_value().unwrap(), |m, j| m.min(gains[(j, j)]));
    if peak(&powers(hi)) <= T::one() {
        lo = hi;
    }
    while hi - lo > T::lit(4.0) * T::default_epsilon() * hi {
        let mid = (lo + hi) * T::lit(0.5);
        if mid <= lo || mid >= hi {
            break;
        }
        if peak(&powers(mid)) <= T::one() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let b = powers(lo);
    let f = CMat::from_fn(r, k, |row, col| unit[(row, col)] * real(b[col].sqrt()));
    Some((f, lo))
}

/// Rescales a dual point to `Σ d = 1`, `tr Y = 1`. Dividing by `Σ μ ≥ 1`
/// keeps every `C_k ⪰ 0`; the lost trace is restored with a multiple of `I`.
fn unit_dual<T: Real>(point: &ConicPoint<T>) -> (CMat<T>, RVec<T>) {
    let r = point.y.nrows();
    let s = point.mu.sum();
    let spread = (T::one() - T::one() / s).max(T::zero()) / T::lit(r as f64);
    let y = &point.y * real(T::one() / s) + CMat::<T>::identity(r, r) * real(spread);
    (y, &point.mu / s)
}

/// Outcome of [`balance`]: dual upper bound, the best primal precoder found
/// (if any solve ran) and the dual point that certifies the bound.
pub(crate) struct ConicBalance<T: Real> {
    pub gamma_upper: T,
    pub primal: Option<(CMat<T>, T)>,
    pub y: CMat<T>,
    pub d: RVec<T>,
    pub solves: usize,
}

/// Directions `Q_k v_k`: the rank-one part of each covariance that carries
/// all of the user's signal and no more interference than `Q_k`.
fn matched_directions<T: Real>(vectors: &CMat<T>, q: &[CMat<T>]) -> CMat<T> {
    let (r, k) = vectors.shape();
    let mut out = CMat::zeros(r, k);
    for (j, qj) in q.iter().enumerate() {
        let v: CVec<T> = vectors.column(j).into_owned();
        out.set_column(j, &(qj * v));
    }
    out
}

/// Root of `λ*(γ) = 1` inside `[lo, hi]`, where `hi` is a known upper bound
/// on the balanced SINR and `lo` is achievable.
pub(crate) fn balance<T: Real>(vectors: &CMat<T>, mut lo: T, mut hi: T, rel_tol: T) -> Result<ConicBalance<T>> {
    let gap = T::tol(1e-10);
    let margin = T::tol(1e-9);
    let mut best: Option<(CMat<T>, T)> = None;
    let mut dual: Option<(CMat<T>, RVec<T>)> = None;
    let mut solves = 0;
    let mut gamma = if lo > T::zero() { lo } else { hi * T::lit(0.5) };
    for _ in 0..MAX_ROOT {
        if hi - lo <= rel_tol * hi {
            break;
        }
        let point = min_power_dual(vectors, gamma, gap)?;
        solves += 1;
        if let Some((f, g)) = equal_sinr_precoder(vectors, &matched_directions(vectors, &point.q)) {
            if best.as_ref().is_none_or(|b| g > b.1) {
                best = Some((f, g));
            }
            lo = lo.max(g);
        }
        if point.lower >= T::one() + margin && gamma <= hi {
            hi = gamma;
            dual = Some(unit_dual(&point));
        }
        // λ* is increasing in γ with slope Σ μ_k v_k^H Q_k v_k / γ²
        let slope = (0..vectors.ncols()).fold(T::zero(), |s, j| {
            let v: CVec<T> = vectors.column(j).into_owned();
            s + point.mu[j] * v.dotc(&(&point.q[j] * &v)).re / (gamma * gamma)
        });
        let newton = gamma - (point.lower - T::one()) / slope;
        let mid = lo + (hi - lo) * T::lit(0.5);
        gamma = if slope > T::zero() && newton > lo && newton < hi && newton != gamma {
            newton
        } else {
            mid
        };
    }
    let (y, d) = match dual {
        Some(v) => v,
        None => {
            let point = min_power_dual(vectors, hi, gap)?;
            solves += 1;
            unit_dual(&point)
        }
    };
    Ok(ConicBalance {
        gamma_upper: hi,
        primal: best,
        y,
        d,
        solves,
    })
}
