//! SINR balancing under dirty-paper coding.
//!
//! Users are encoded in the order `1..K`, so user `k` only sees interference
//! from users `i > k`. Working with unit noise (`v_k = u_k / σ`), the
//! balanced SINR equals
//!
//! ```text
//! min_{Y ⪰ 0, tr Y = 1}  γ(Y),
//! γ(Y) = common uplink SINR d_k v_k^H (Y + Σ_{i<k} d_i v_i v_i^H)^† v_k
//! ```
//!
//! where `d` (on the unit simplex) is the fixed point of a power iteration.
//! The outer problem is solved by projected gradient on `Y`; the downlink
//! precoder follows from the uplink filters by back-substitution.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::dpc_conic::{balance, equal_sinr_precoder};
use crate::linalg::{
    cholesky, hermitian_part, hermitian_pinv, identity, inner, lambda_min, modulus, outer, real, trace_re, CMat, CVec,
    HermitianEigen, RVec,
};
use crate::model::{ChannelMatrix, EffectiveChannel, RadarCovariance};
use crate::projections::project_psd_trace;
use crate::tbf::BalancingResult;
use crate::{json, Error, Real, Result};

/// Relative residual above which `v_k` counts as outside the range of `Y`.
const RANGE_TOL: f64 = 1e-8;
/// Relative eigenvalue cut for pseudo-inverses.
const PINV_CUT: f64 = 1e-12;
/// Newton refinements applied after the fixed point stops.
const NEWTON_STEPS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real", default)]
pub struct DpcOptions<T: Real> {
    /// Outer stop: `‖P(Y − ∇γ) − Y‖_F` below this.
    pub tol: T,
    pub max_iter: usize,
    /// Inner stop: `Σ (d_k − d_k')²` below this.
    pub inner_eps: T,
    pub inner_max_iter: usize,
    pub armijo: T,
    pub shrink: T,
    pub max_halvings: usize,
    /// Eigenvalues of `Y` are kept above `floor / r`.
    pub floor: T,
    /// Barzilai–Borwein scaling of the gradient inside the projection.
    pub spectral: bool,
    /// Relative tolerance of the minimum-power bisection.
    pub bisect_tol: T,
}

impl<T: Real> Default for DpcOptions<T> {
    fn default() -> Self {
        Self {
            tol: T::tol(1e-7),
            max_iter: 2000,
            inner_eps: T::tol(1e-12),
            inner_max_iter: 500,
            armijo: T::lit(1e-4),
            shrink: T::lit(0.5),
            max_halvings: 40,
            floor: T::tol(1e-10),
            spectral: true,
            bisect_tol: T::tol(1e-4),
        }
    }
}

impl<T: Real> DpcOptions<T> {
    pub fn check(&self) -> Result<()> {
        if !(self.tol > T::zero() && self.inner_eps > T::zero() && self.bisect_tol > T::zero())
            || self.max_iter == 0
            || self.inner_max_iter == 0
            || !(self.shrink > T::zero() && self.shrink < T::one())
            || !(self.armijo > T::zero() && self.armijo < T::one())
            || !(self.floor >= T::zero())
        {
            return Err(Error::InvalidArgument("invalid DPC solver options".into()));
        }
        Ok(())
    }
}

/// Fixed point of the uplink power iteration at a given `Y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct InnerSolution<T: Real> {
    #[serde(with = "json::rvec")]
    pub d: RVec<T>,
    pub gamma: T,
    /// `r × K`, column `k` is `(Y + Σ_{i<k} d_i v_i v_i^H)^† v_k`.
    #[serde(with = "json::cmat")]
    pub filters: CMat<T>,
    /// Users whose channel leaves the range of `Y` (served at zero power).
    pub excluded: Vec<usize>,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct DpcTraceRow<T: Real> {
    pub iteration: usize,
    pub gamma: T,
    pub delta_norm: T,
    pub min_eig_y: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct DpcDualState<T: Real> {
    /// Worst-case uplink noise covariance (trace one).
    #[serde(with = "json::cmat")]
    pub y: CMat<T>,
    /// Uplink powers (unit sum).
    #[serde(with = "json::rvec")]
    pub d: RVec<T>,
    pub gamma: T,
    #[serde(with = "json::cmat")]
    pub filters: CMat<T>,
    pub trace: Vec<DpcTraceRow<T>>,
    /// Iterations used by every inner fixed-point call.
    pub inner_iterations: Vec<usize>,
}

impl<T: Real> DpcDualState<T> {
    pub fn write_trace_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "iteration,gamma,delta_norm,min_eig_Y")?;
        for row in &self.trace {
            writeln!(
                out,
                "{},{:e},{:e},{:e}",
                row.iteration, row.gamma, row.delta_norm, row.min_eig_y
            )?;
        }
        Ok(())
    }
}

/// Solves `B x = v` for Hermitian PSD `B`, by Cholesky when `B ≻ 0` and by
/// the eigen pseudo-inverse otherwise.
struct Solver {
    definite: bool,
}

impl Solver {
    fn for_matrix<T: Real>(y: &CMat<T>) -> Self {
        let eig = HermitianEigen::new(y);
        Self {
            definite: eig.min() > T::tol(PINV_CUT) * eig.max(),
        }
    }

    fn solve<T: Real>(&self, b: &CMat<T>, v: &CVec<T>) -> CVec<T> {
        if self.definite {
            if let Some(ch) = cholesky(b) {
                return ch.solve(v);
            }
        }
        hermitian_pinv(b, T::tol(PINV_CUT)) * v
    }
}

fn excluded_users<T: Real>(y: &CMat<T>, vectors: &CMat<T>) -> Vec<usize> {
    let proj = y * hermitian_pinv(y, T::tol(PINV_CUT));
    (0..vectors.ncols())
        .filter(|&k| {
            let v = vectors.column(k);
            let n = v.norm();
            n > T::zero() && (v - &proj * v).norm() / n > T::tol(RANGE_TOL)
        })
        .collect()
}

/// Filters `B_k^† v_k` and `q_k = Re v_k^H B_k^† v_k` for every user.
fn filters<T: Real>(y: &CMat<T>, vectors: &CMat<T>, d: &RVec<T>, solver: &Solver) -> (CMat<T>, RVec<T>) {
    let (r, k) = vectors.shape();
    let mut b = y.clone();
    let mut f = CMat::zeros(r, k);
    let mut q = RVec::zeros(k);
    for j in 0..k {
        let v = vectors.column(j).into_owned();
        let fj = solver.solve(&b, &v);
        q[j] = v.dotc(&fj).re;
        f.set_column(j, &fj);
        if d[j] > T::zero() {
            b += outer(&v) * real(d[j]);
        }
    }
    (f, q)
}

fn inner_solve<T: Real>(
    y: &CMat<T>,
    vectors: &CMat<T>,
    start: Option<&RVec<T>>,
    opts: &DpcOptions<T>,
) -> Result<InnerSolution<T>> {
    let k = vectors.ncols();
    let excluded = excluded_users(y, vectors);
    let active: Vec<usize> = (0..k).filter(|j| !excluded.contains(j)).collect();
    if active.is_empty() {
        return Err(Error::Degenerate(
            "every user lies outside the range of Y; balanced SINR is undefined".into(),
        ));
    }
    let solver = Solver::for_matrix(y);
    let uniform = T::one() / T::lit(active.len() as f64);
    let mut d = RVec::zeros(k);
    match start {
        Some(s) if s.len() == k && active.iter().all(|&j| s[j] > T::zero()) => {
            let total = active.iter().fold(T::zero(), |acc, &j| acc + s[j]);
            for &j in &active {
                d[j] = s[j] / total;
            }
        }
        _ => active.iter().for_each(|&j| d[j] = uniform),
    }
    let mut converged = false;
    let mut iterations = 0;
    let mut gamma = T::zero();
    while iterations < opts.inner_max_iter {
        iterations += 1;
        let (_, q) = filters(y, vectors, &d, &solver);
        let mut next = RVec::zeros(k);
        let mut total = T::zero();
        for &j in &active {
            if !(q[j] > T::zero()) {
                return Err(Error::Degenerate(format!("user {j} has no uplink gain")));
            }
            next[j] = T::one() / q[j];
            total += next[j];
        }
        gamma = T::one() / total;
        next /= total;
        let change = (&next - &d).norm_squared();
        d = next;
        if change < opts.inner_eps {
            converged = true;
            break;
        }
    }
    let (mut f, mut q) = filters(y, vectors, &d, &solver);
    let spread = |d: &RVec<T>, q: &RVec<T>| {
        let (lo, hi) = active.iter().fold((T::max_value().unwrap(), T::zero()), |(l, h), &j| {
            (l.min(d[j] * q[j]), h.max(d[j] * q[j]))
        });
        (hi - lo, hi)
    };
    let (mut gap, _) = spread(&d, &q);
    for _ in 0..NEWTON_STEPS {
        if gap <= T::lit(4.0) * T::default_epsilon() * gamma {
            break;
        }
        let Some(next) = newton_step(vectors, &f, &q, &d, gamma, &active) else {
            break;
        };
        let (nf, nq) = filters(y, vectors, &next.0, &solver);
        let (ngap, _) = spread(&next.0, &nq);
        if !(ngap < gap) {
            break;
        }
        (d, gamma, f, q, gap) = (next.0, next.1, nf, nq, ngap);
    }
    // every active user reaches d_k q_k; the largest keeps the dual constraints valid
    gamma = spread(&d, &q).1;
    Ok(InnerSolution {
        d,
        gamma,
        filters: f,
        excluded,
        iterations,
        converged,
    })
}

/// Triangular sensitivity matrix of the fixed point over the active users:
/// diagonal `v_k^H f_k`, below it `−d_k |v_i^H f_k|²`.
fn sensitivity<T: Real>(vectors: &CMat<T>, f: &CMat<T>, d: &RVec<T>, active: &[usize]) -> nalgebra::DMatrix<T> {
    let n = active.len();
    let mut a = nalgebra::DMatrix::<T>::zeros(n, n);
    for (row, &j) in active.iter().enumerate() {
        a[(row, row)] = vectors.column(j).dotc(&f.column(j)).re;
        for (col, &i) in active.iter().enumerate().take(row) {
            a[(row, col)] = -d[j] * vectors.column(i).dotc(&f.column(j)).norm_sqr();
        }
    }
    a
}

/// One Newton step on `d_k q_k(d) = γ`, `Σ d = 1`.
fn newton_step<T: Real>(
    vectors: &CMat<T>,
    f: &CMat<T>,
    q: &RVec<T>,
    d: &RVec<T>,
    gamma: T,
    active: &[usize],
) -> Option<(RVec<T>, T)> {
    let n = active.len();
    let a = sensitivity(vectors, f, d, active);
    let mut jac = nalgebra::DMatrix::<T>::zeros(n + 1, n + 1);
    let mut rhs = RVec::<T>::zeros(n + 1);
    let mut total = T::zero();
    for (row, &j) in active.iter().enumerate() {
        for col in 0..=row {
            jac[(row, col)] = a[(row, col)];
        }
        jac[(row, n)] = -T::one();
        jac[(n, row)] = T::one();
        rhs[row] = gamma - d[j] * q[j];
        total += d[j];
    }
    rhs[n] = T::one() - total;
    let step = jac.lu().solve(&rhs)?;
    let mut next = d.clone();
    for (row, &j) in active.iter().enumerate() {
        next[j] += step[row];
        if !(next[j] > T::zero()) {
            return None;
        }
    }
    Some((next, gamma + step[n]))
}

/// Uplink power fixed point at noise covariance `y` for the channel's
/// unit-noise vectors.
pub fn fixed_point_inner<T: Real>(
    y: &CMat<T>,
    eff: &EffectiveChannel<T>,
    opts: &DpcOptions<T>,
) -> Result<InnerSolution<T>> {
    let r = eff.rank();
    if y.shape() != (r, r) {
        return Err(Error::Dimension(format!("Y must be {r}x{r}, got {:?}", y.shape())));
    }
    inner_solve(&hermitian_part(y), &eff.normalized_factor(), None, opts)
}

fn gradient_from<T: Real>(vectors: &CMat<T>, inner_sol: &InnerSolution<T>) -> Result<CMat<T>> {
    let (r, k) = vectors.shape();
    let active: Vec<usize> = (0..k).filter(|j| !inner_sol.excluded.contains(j)).collect();
    let n = active.len();
    let f = &inner_sol.filters;
    let d = &inner_sol.d;
    let a = sensitivity(vectors, f, d, &active);
    let ones = RVec::from_element(n, T::one());
    let weights = a
        .transpose()
        .lu()
        .solve(&ones)
        .ok_or_else(|| Error::Singular("gradient system A is singular".into()))?;
    let total = weights.iter().fold(T::zero(), |acc, &w| acc + w);
    if !(total.abs() > T::zero()) || weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::Singular(
            "gradient weights do not sum to a finite nonzero value".into(),
        ));
    }
    let mut g = CMat::zeros(r, r);
    for (row, &j) in active.iter().enumerate() {
        let fj = f.column(j).into_owned();
        g -= outer(&fj) * real(weights[row] * d[j] / total);
    }
    Ok(hermitian_part(&g))
}

/// Gradient of `γ(Y)` at a fixed point `(d, γ)` of [`fixed_point_inner`].
pub fn gamma_gradient<T: Real>(
    y: &CMat<T>,
    inner_sol: &InnerSolution<T>,
    eff: &EffectiveChannel<T>,
) -> Result<CMat<T>> {
    let r = eff.rank();
    if y.shape() != (r, r) || inner_sol.d.len() != eff.users() {
        return Err(Error::Dimension("gradient inputs disagree with the channel".into()));
    }
    if !(lambda_min(y) > T::zero()) {
        return Err(Error::InvalidArgument("gradient needs Y positive definite".into()));
    }
    gradient_from(&eff.normalized_factor(), inner_sol)
}

/// Clamps eigenvalues at `floor / r` and restores unit trace.
pub(crate) fn floor_trace_one<T: Real>(y: &CMat<T>, floor: T) -> CMat<T> {
    let r = T::lit(y.nrows() as f64);
    let eig = HermitianEigen::new(y);
    let lo = floor / r;
    let clamped = eig.map(|v| v.max(lo));
    let t = trace_re(&clamped);
    clamped * real(T::one() / t)
}

struct OuterRun<T: Real> {
    y: CMat<T>,
    inner: InnerSolution<T>,
    iterations: usize,
    converged: bool,
    trace: Vec<DpcTraceRow<T>>,
    inner_iterations: Vec<usize>,
}

fn outer_loop<T: Real>(vectors: &CMat<T>, opts: &DpcOptions<T>) -> Result<OuterRun<T>> {
    let r = vectors.nrows();
    let mut y = identity::<T>(r) * real(T::one() / T::lit(r as f64));
    let mut sol = inner_solve(&y, vectors, None, opts)?;
    let mut inner_iterations = vec![sol.iterations];
    let mut grad = gradient_from(vectors, &sol)?;
    let mut scale = T::one();
    let (lo, hi) = (T::lit(1e-10), T::lit(1e10));
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        let raw = project_psd_trace(&(&y - &grad)) - &y;
        let dn = raw.norm();
        let min_eig = lambda_min(&y);
        if dn < opts.tol {
            converged = true;
            trace.push(DpcTraceRow {
                iteration: iterations,
                gamma: sol.gamma,
                delta_norm: dn,
                min_eig_y: min_eig,
            });
            break;
        }
        let delta = if opts.spectral && scale != T::one() {
            project_psd_trace(&(&y - &grad * real(scale))) - &y
        } else {
            raw
        };
        let slope = inner(&grad, &delta);
        let noise = T::lit(64.0) * T::default_epsilon() * sol.gamma.abs();
        let mut step = T::one();
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let trial = floor_trace_one(&(&y + &delta * real(step)), opts.floor);
            if let Ok(ts) = inner_solve(&trial, vectors, Some(&sol.d), opts) {
                inner_iterations.push(ts.iterations);
                if let Ok(tg) = gradient_from(vectors, &ts) {
                    let flat = (ts.gamma - sol.gamma).abs() <= noise
                        && inner(&tg, &delta) <= (T::one() - opts.armijo * T::lit(2.0)) * -slope;
                    if ts.gamma <= sol.gamma + opts.armijo * step * slope || flat {
                        accepted = Some((trial, ts, tg));
                        break;
                    }
                }
            }
            step *= opts.shrink;
        }
        trace.push(DpcTraceRow {
            iteration: iterations,
            gamma: sol.gamma,
            delta_norm: dn,
            min_eig_y: min_eig,
        });
        iterations += 1;
        match accepted {
            Some((ny, ns, ng)) => {
                let sy = &ny - &y;
                let sg = &ng - &grad;
                let curv = inner(&sy, &sg);
                scale = if curv > T::zero() {
                    (sy.norm_squared() / curv).max(lo).min(hi)
                } else {
                    hi.min(scale * T::lit(10.0))
                };
                y = ny;
                sol = ns;
                grad = ng;
            }
            None => break,
        }
    }
    Ok(OuterRun {
        y,
        inner: sol,
        iterations,
        converged,
        trace,
        inner_iterations,
    })
}

pub(crate) fn rotate_real_diagonal<T: Real>(fu: &mut CMat<T>, vectors: &CMat<T>) {
    for j in 0..fu.ncols() {
        let fkk = vectors.column(j).dotc(&fu.column(j));
        let m = modulus(fkk);
        if m > T::zero() {
            let rot = fkk.conj() / real(m);
            fu.column_mut(j).iter_mut().for_each(|z| *z *= rot);
        }
    }
}

/// Relative gap between the dual bound and the recovered precoder's SINR
/// below which the projected-gradient result is accepted as is.
const GAP_TOL: f64 = 1e-7;

/// Solves DPC SINR balancing and recovers an equal-SINR precoder.
///
/// The worst-case noise is found by projected gradient. When that stalls,
/// which happens when the optimal `Y` is singular, the bound is tightened by
/// a barrier method on the minimum-power dual.
pub fn solve_dpc_balancing<T: Real>(
    eff: &EffectiveChannel<T>,
    opts: &DpcOptions<T>,
) -> Result<BalancingResult<T, DpcDualState<T>>> {
    opts.check()?;
    let vectors = eff.normalized_factor();
    let run = outer_loop(&vectors, opts)?;
    let mut notes = Vec::new();
    let mut gamma = run.inner.gamma;
    let (weakest, single_user) = (0..vectors.ncols())
        .map(|j| (j, vectors.column(j).norm_squared()))
        .fold((0, T::max_value().unwrap()), |m, c| if c.1 < m.1 { c } else { m });
    let mut y = run.y;
    let mut d = run.inner.d;
    let mut dual_gamma = run.inner.gamma;
    if single_user < gamma {
        // serving only the weakest user is itself a dual point: Y along its
        // channel, all power on it
        gamma = single_user;
        dual_gamma = single_user;
        let v: CVec<T> = vectors.column(weakest).into_owned();
        y = outer(&v) * real(T::one() / single_user);
        d = RVec::zeros(vectors.ncols());
        d[weakest] = T::one();
    }
    let (mut fu, mut primal) = match equal_sinr_precoder(&vectors, &run.inner.filters) {
        Some(p) => p,
        None => (CMat::zeros(vectors.nrows(), vectors.ncols()), T::zero()),
    };
    let mut converged = run.converged && primal >= gamma * (T::one() - T::tol(GAP_TOL));
    if !converged {
        let refined = balance(&vectors, primal, gamma, T::tol(GAP_TOL) * T::lit(0.1))?;
        notes.push(format!(
            "projected gradient stopped after {} iterations at gamma {:.9e}; refined with {} barrier solves",
            run.iterations,
            run.inner.gamma.as_f64(),
            refined.solves
        ));
        if refined.gamma_upper < gamma {
            gamma = refined.gamma_upper;
            dual_gamma = gamma;
            y = refined.y;
            d = refined.d;
        }
        if let Some((f, g)) = refined.primal {
            if g > primal {
                primal = g;
                fu = f;
            }
        }
        converged = primal >= gamma * (T::one() - T::tol(GAP_TOL));
    }
    gamma = gamma.max(primal);
    if !converged {
        notes.push(format!(
            "recovered SINR {:.9e} is below the dual bound {:.9e}",
            primal.as_f64(),
            gamma.as_f64()
        ));
    }
    rotate_real_diagonal(&mut fu, &vectors);
    let f = eff.lift(&fu);
    let filters = fixed_point_filters(&y, &vectors, &d);
    Ok(BalancingResult {
        gamma,
        t: (gamma / (T::one() + gamma)).sqrt(),
        primal_gamma: primal,
        f,
        dual: DpcDualState {
            y,
            d,
            gamma: dual_gamma,
            filters,
            trace: run.trace,
            inner_iterations: run.inner_iterations,
        },
        iterations: run.iterations,
        converged,
        notes,
    })
}

fn fixed_point_filters<T: Real>(y: &CMat<T>, vectors: &CMat<T>, d: &RVec<T>) -> CMat<T> {
    filters(y, vectors, d, &Solver::for_matrix(y)).0
}

/// Outcome of [`min_power_bisection`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct PowerSolution<T: Real> {
    pub power: T,
    pub gamma: T,
    pub evaluations: usize,
}

/// Upper end of the power bracket.
pub const POWER_CAP: f64 = 1e9;

/// Smallest total power at which the DPC balanced SINR reaches `target`,
/// by geometric bisection on the monotone map `P ↦ γ*(P)`.
pub fn min_power_bisection<T: Real>(
    target: T,
    shape: &RadarCovariance<T>,
    h: &ChannelMatrix<T>,
    sigma2: T,
    opts: &DpcOptions<T>,
) -> Result<PowerSolution<T>> {
    opts.check()?;
    if !(target > T::zero() && target.is_finite()) {
        return Err(Error::InvalidArgument("target SINR must be positive".into()));
    }
    let hm = h.matrix();
    let unit = hm * shape.shape() * hm.adjoint();
    let weakest = (0..h.users()).fold(T::max_value().unwrap(), |m, j| m.min(unit[(j, j)].re));
    if !(weakest > T::zero()) {
        return Err(Error::Unreachable("a user receives no signal at any power".into()));
    }
    let guess = target * sigma2 / weakest;
    let cap = T::lit(POWER_CAP);
    let mut evaluations = 0;
    let mut eval = |p: T| -> Result<T> {
        evaluations += 1;
        let radar = shape.with_power(p)?;
        let eff = EffectiveChannel::new(h, &radar, sigma2)?;
        Ok(solve_dpc_balancing(&eff, opts)?.gamma)
    };
    let mut lo = guess * T::lit(1e-6);
    let mut hi = (guess * T::lit(1e3)).min(cap);
    let mut g_hi = eval(hi)?;
    while g_hi < target {
        if hi >= cap {
            return Err(Error::Unreachable(format!(
                "target {:.6e} not reached at the power cap {POWER_CAP:e} (γ = {:.6e})",
                target.as_f64(),
                g_hi.as_f64()
            )));
        }
        lo = hi;
        hi = (hi * T::lit(2.0)).min(cap);
        g_hi = eval(hi)?;
    }
    if (g_hi - target).abs() < opts.bisect_tol * target {
        return Ok(PowerSolution {
            power: hi,
            gamma: g_hi,
            evaluations,
        });
    }
    let mut best = (hi, g_hi);
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        let g = eval(mid)?;
        if (g - target).abs() < opts.bisect_tol * target {
            best = (mid, g);
            break;
        }
        if g < target {
            lo = mid;
        } else {
            hi = mid;
            best = (mid, g);
        }
        if hi / lo - T::one() < T::default_epsilon() * T::lit(16.0) {
            break;
        }
    }
    Ok(PowerSolution {
        power: best.0,
        gamma: best.1,
        evaluations,
    })
}
