//! Sum-rate maximization under dirty-paper coding via the dual uplink channel.
//!
//! With unit noise (`v_k = u_k / σ`) the maximal downlink sum rate is the
//! value of the saddle problem
//!
//! ```text
//! min_{Y ⪰ 0, tr Y = 1}  max_{d ≥ 0, Σ d = 1}  g(Y, d) = log|Y + Σ d_k v_k v_k^H| − log|Y|
//! ```
//!
//! which is solved either directly by extragradient, or through the convex
//! program
//!
//! ```text
//! min_{Z ≻ 0}  log|I + Z| − log|Z|   s.t.  v_k^H Z v_k ≤ 1
//! ```
//!
//! whose multipliers `φ` give the saddle point as `d = φ/η`,
//! `Y = (Z + I)^{-1}/η` with `η = Σ φ_k`. Rates are in bits; internal
//! calculus uses natural logarithms.

use std::io::{self, Write};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dpc_balancing::{floor_trace_one, rotate_real_diagonal};
use crate::linalg::{
    cholesky, hermitian_basis, hermitian_part, identity, inner, inv_pd, lambda_max, logdet_pd, outer, quad_form, real,
    trace_re, CMat, CVec, RVec,
};
use crate::model::{compute_sinr, EffectiveChannel, SinrMode};
use crate::projections::{project_psd_trace, WeightedSimplex};
use crate::{json, Error, Real, Result};

fn bits<T: Real>(nats: T) -> T {
    nats / T::ln_2()
}

/// Uplink MMSE-SIC SINRs and the sum rate they add up to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct MacRates<T: Real> {
    #[serde(with = "json::rvec")]
    pub sinrs: RVec<T>,
    /// `log₂|Y + Σ d_k v_k v_k^H| − log₂|Y|`.
    pub rate: T,
}

fn check_powers<T: Real>(d: &RVec<T>, users: usize) -> Result<()> {
    if d.len() != users {
        return Err(Error::Dimension(format!("{} powers for {} users", d.len(), users)));
    }
    if d.iter().any(|&x| !(x >= T::zero() && x.is_finite())) {
        return Err(Error::InvalidArgument(
            "uplink powers must be finite and nonnegative".into(),
        ));
    }
    Ok(())
}

fn mac_rates<T: Real>(y: &CMat<T>, d: &RVec<T>, vectors: &CMat<T>) -> Result<MacRates<T>> {
    let (r, k) = vectors.shape();
    if y.shape() != (r, r) {
        return Err(Error::Dimension(format!(
            "Y is {}x{}, expected {r}x{r}",
            y.nrows(),
            y.ncols()
        )));
    }
    check_powers(d, k)?;
    let singular = || Error::Singular("noise covariance Y must be positive definite".into());
    let base = logdet_pd(y).ok_or_else(singular)?;
    let mut acc = hermitian_part(y);
    let mut sinrs = RVec::zeros(k);
    for j in 0..k {
        let v: CVec<T> = vectors.column(j).into_owned();
        let ch = cholesky(&acc).ok_or_else(singular)?;
        sinrs[j] = d[j] * v.dotc(&ch.solve(&v)).re;
        acc += outer(&v) * real(d[j]);
    }
    let top = logdet_pd(&acc).ok_or_else(singular)?;
    Ok(MacRates {
        sinrs,
        rate: bits(top - base),
    })
}

/// SINRs `d_k v_k^H (Y + Σ_{i<k} d_i v_i v_i^H)^{-1} v_k` of the dual uplink
/// with successive cancellation, and the sum rate in bits.
pub fn mac_mmse_sinr_and_rate<T: Real>(y: &CMat<T>, d: &RVec<T>, eff: &EffectiveChannel<T>) -> Result<MacRates<T>> {
    mac_rates(y, d, &eff.normalized_factor())
}

/// Extragradient parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real", default)]
pub struct SaddleOptions<T: Real> {
    /// Initial step size.
    pub tau: T,
    /// The step is halved, restarting from the best iterate, after this many
    /// steps without a new smallest residual.
    pub patience: usize,
    pub max_iter: usize,
    /// Stop when the projected-gradient residual falls below this.
    pub tol: T,
    /// Eigenvalues of `Y` are kept above `floor / r`.
    pub floor: T,
}

impl<T: Real> Default for SaddleOptions<T> {
    fn default() -> Self {
        Self {
            tau: T::lit(0.05),
            patience: 10,
            max_iter: 20_000,
            tol: T::tol(1e-7),
            floor: T::tol(1e-10),
        }
    }
}

impl<T: Real> SaddleOptions<T> {
    pub fn check(&self) -> Result<()> {
        if !(self.tau > T::zero() && self.tol > T::zero() && self.floor > T::zero())
            || self.patience == 0
            || self.max_iter == 0
        {
            return Err(Error::InvalidArgument("invalid extragradient options".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct SaddleTraceRow<T: Real> {
    pub iteration: usize,
    pub rate: T,
    pub residual_y: T,
    pub residual_d: T,
}

/// Saddle point `(Y, d)` of the dual uplink problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct SaddlePoint<T: Real> {
    /// Worst-case uplink noise covariance, trace one.
    #[serde(with = "json::cmat")]
    pub y: CMat<T>,
    /// Uplink powers on the unit simplex.
    #[serde(with = "json::rvec")]
    pub d: RVec<T>,
    /// Sum rate in bits per channel use.
    pub rate: T,
    #[serde(with = "json::rvec")]
    pub uplink_sinrs: RVec<T>,
    pub iterations: usize,
    pub converged: bool,
    /// Projected-gradient residual at `(y, d)`.
    pub residual: T,
    /// Number of iterates on which the eigenvalue floor of `Y` was active.
    pub floor_hits: usize,
    pub trace: Vec<SaddleTraceRow<T>>,
}

impl<T: Real> SaddlePoint<T> {
    pub fn write_trace_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "iteration,rate,residual_Y,residual_d")?;
        for row in &self.trace {
            writeln!(
                out,
                "{},{:e},{:e},{:e}",
                row.iteration, row.rate, row.residual_y, row.residual_d
            )?;
        }
        Ok(())
    }
}

/// Value and natural-log gradients of `g` at `(Y, d)`.
struct Eval<T: Real> {
    rate: T,
    grad_y: CMat<T>,
    grad_d: RVec<T>,
}

fn evaluate<T: Real>(y: &CMat<T>, d: &RVec<T>, vectors: &CMat<T>) -> Result<Eval<T>> {
    let singular = || Error::Singular("noise covariance Y lost definiteness".into());
    let mut total = y.clone();
    for (j, &dj) in d.iter().enumerate() {
        total += outer(&vectors.column(j).into_owned()) * real(dj);
    }
    let y_inv = inv_pd(y).ok_or_else(singular)?;
    let total_inv = hermitian_part(&inv_pd(&total).ok_or_else(singular)?);
    let rate = bits(logdet_pd(&total).ok_or_else(singular)? - logdet_pd(y).ok_or_else(singular)?);
    let grad_d = RVec::from_iterator(
        d.len(),
        (0..d.len()).map(|j| quad_form(&total_inv, &vectors.column(j).into_owned())),
    );
    Ok(Eval {
        rate,
        grad_y: hermitian_part(&(total_inv - y_inv)),
        grad_d,
    })
}

fn residuals<T: Real>(y: &CMat<T>, d: &RVec<T>, e: &Eval<T>, simplex: &WeightedSimplex<T>) -> (T, T) {
    let ry = (project_psd_trace(&(y - &e.grad_y)) - y).norm();
    let rd = (simplex.project(&(d + &e.grad_d)) - d).norm();
    (ry, rd)
}

/// Residual growth over the best seen that triggers an immediate restart.
const BLOWUP: f64 = 10.0;

/// Projects onto the trace-one PSD set and floors the spectrum; reports
/// whether the floor was active.
fn project_floored<T: Real>(y: &CMat<T>, floor: T) -> (CMat<T>, bool) {
    let p = project_psd_trace(y);
    let lo = floor / T::lit(p.nrows() as f64);
    let hit = crate::linalg::lambda_min(&p) < lo;
    if hit {
        (floor_trace_one(&p, floor), true)
    } else {
        (p, false)
    }
}

/// Solves the dual uplink saddle problem by extragradient with projections
/// onto `{Y ⪰ 0, tr Y = 1}` and the unit simplex.
///
/// If the iteration cap is reached the iterate with the smallest residual
/// is returned with `converged == false`.
pub fn solve_saddle_extragradient<T: Real>(
    eff: &EffectiveChannel<T>,
    opts: &SaddleOptions<T>,
) -> Result<SaddlePoint<T>> {
    opts.check()?;
    let vectors = eff.normalized_factor();
    let (r, k) = vectors.shape();
    let simplex = WeightedSimplex::unit(k);
    let mut y = identity::<T>(r) * real(T::one() / T::lit(r as f64));
    let mut d = RVec::from_element(k, T::one() / T::lit(k as f64));
    let mut e = evaluate(&y, &d, &vectors)?;
    let (ry, rd) = residuals(&y, &d, &e, &simplex);
    let mut res = ry.max(rd);
    let mut trace = vec![SaddleTraceRow {
        iteration: 0,
        rate: e.rate,
        residual_y: ry,
        residual_d: rd,
    }];
    let mut best = (res, y.clone(), d.clone());
    let mut tau = opts.tau;
    let mut stalled = 0;
    let mut floor_hits = 0;
    let mut iterations = 0;
    while res >= opts.tol && iterations < opts.max_iter {
        iterations += 1;
        let (yh, hit_h) = project_floored(&(&y - &e.grad_y * real(tau)), opts.floor);
        let dh = simplex.project(&(&d + &e.grad_d * tau));
        let eh = evaluate(&yh, &dh, &vectors)?;
        let (yn, hit) = project_floored(&(&y - &eh.grad_y * real(tau)), opts.floor);
        floor_hits += usize::from(hit_h || hit);
        d = simplex.project(&(&d + &eh.grad_d * tau));
        y = yn;
        e = evaluate(&y, &d, &vectors)?;
        let (ry, rd) = residuals(&y, &d, &e, &simplex);
        res = ry.max(rd);
        if res < best.0 {
            stalled = 0;
        } else {
            stalled += 1;
            if stalled >= opts.patience || res > T::lit(BLOWUP) * best.0 {
                // restart from the best iterate with a shorter step
                tau *= T::lit(0.5);
                stalled = 0;
                y = best.1.clone();
                d = best.2.clone();
                e = evaluate(&y, &d, &vectors)?;
                res = best.0;
            }
        }
        trace.push(SaddleTraceRow {
            iteration: iterations,
            rate: e.rate,
            residual_y: ry,
            residual_d: rd,
        });
        if res < best.0 {
            best = (res, y.clone(), d.clone());
        }
    }
    let converged = res < opts.tol;
    if !converged {
        y = best.1;
        d = best.2;
        res = best.0;
    }
    let mac = mac_rates(&y, &d, &vectors)?;
    Ok(SaddlePoint {
        y,
        d,
        rate: mac.rate,
        uplink_sinrs: mac.sinrs,
        iterations,
        converged,
        residual: res,
        floor_hits,
        trace,
    })
}

/// Log-barrier parameters for the convex program in `Z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real", default)]
pub struct BarrierOptions<T: Real> {
    pub mu_start: T,
    /// Factor applied to `μ` between stages.
    pub shrink: T,
    /// The last stage is the first with `μ` below this.
    pub mu_stop: T,
    pub max_newton: usize,
    pub max_halvings: usize,
}

impl<T: Real> Default for BarrierOptions<T> {
    fn default() -> Self {
        Self {
            mu_start: T::one(),
            shrink: T::lit(0.1),
            mu_stop: T::lit(1e-9),
            max_newton: 100,
            max_halvings: 60,
        }
    }
}

impl<T: Real> BarrierOptions<T> {
    pub fn check(&self) -> Result<()> {
        if !(self.mu_start > T::zero() && self.mu_stop > T::zero())
            || !(self.shrink > T::zero() && self.shrink < T::one())
            || self.max_newton == 0
        {
            return Err(Error::InvalidArgument("invalid barrier options".into()));
        }
        Ok(())
    }
}

/// Solution of `min log|I+Z| − log|Z|` subject to `v_k^H Z v_k ≤ 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct SatoSolution<T: Real> {
    #[serde(with = "json::cmat")]
    pub z: CMat<T>,
    /// Multipliers of the per-user constraints.
    #[serde(with = "json::rvec")]
    pub phi: RVec<T>,
    /// Optimal value in bits: the Sato upper bound on the sum rate.
    pub bound: T,
    /// Barrier weight of the last stage.
    pub mu: T,
    pub newton_steps: usize,
    /// `‖Z^{-1} − (I+Z)^{-1} − Σ φ_k v_k v_k^H‖_F`.
    pub stationarity: T,
    pub converged: bool,
}

impl<T: Real> SatoSolution<T> {
    /// `Z' = V^H Z V` (with `V` the unit-noise factor) and the value
    /// `log₂|R_h/σ² + Z'| − log₂|Z'|`. Requires a non-singular `R_h`.
    pub fn z_prime(&self, eff: &EffectiveChannel<T>) -> Result<(CMat<T>, T)> {
        if eff.rank() != eff.users() {
            return Err(Error::Singular("R_h must be non-singular for the Z' form".into()));
        }
        let v = eff.normalized_factor();
        let zp = hermitian_part(&(v.adjoint() * &self.z * &v));
        let gram = eff.gram() * real(T::one() / eff.sigma2());
        let singular = || Error::Singular("Z' is not positive definite".into());
        let top = logdet_pd(&hermitian_part(&(gram + &zp))).ok_or_else(singular)?;
        let base = logdet_pd(&zp).ok_or_else(singular)?;
        Ok((zp, bits(top - base)))
    }
}

struct SatoProblem<T: Real> {
    vectors: CMat<T>,
    basis: Vec<CMat<T>>,
}

struct SatoDerivatives<T: Real> {
    grad: RVec<T>,
    hess: DMatrix<T>,
}

impl<T: Real> SatoProblem<T> {
    fn z_of(&self, x: &RVec<T>) -> CMat<T> {
        let r = self.vectors.nrows();
        self.basis
            .iter()
            .zip(x.iter())
            .fold(CMat::zeros(r, r), |acc, (e, &c)| acc + e * real(c))
    }

    fn loads(&self, z: &CMat<T>) -> RVec<T> {
        let k = self.vectors.ncols();
        RVec::from_iterator(k, (0..k).map(|j| quad_form(z, &self.vectors.column(j).into_owned())))
    }

    fn objective(&self, z: &CMat<T>, mu: T) -> Option<T> {
        let r = z.nrows();
        let q = self.loads(z);
        if q.iter().any(|&x| !(x < T::one())) {
            return None;
        }
        let barrier = q.iter().fold(T::zero(), |s, &x| s + (T::one() - x).ln());
        Some(logdet_pd(&(identity::<T>(r) + z))? - logdet_pd(z)? - mu * barrier)
    }

    /// Barrier multipliers `μ / (1 − q_k)`.
    fn barrier_multipliers(&self, z: &CMat<T>, mu: T) -> RVec<T> {
        self.loads(z).map(|q| mu / (T::one() - q))
    }

    /// Lagrangian gradient `(I+Z)^{-1} − Z^{-1} + Σ φ_k v_k v_k^H`.
    fn matrix_gradient(&self, z: &CMat<T>, phi: &RVec<T>) -> Option<CMat<T>> {
        let r = z.nrows();
        let z_inv = inv_pd(z)?;
        let a = inv_pd(&(identity::<T>(r) + z))?;
        let mut g = a - z_inv;
        for (j, &p) in phi.iter().enumerate() {
            g += outer(&self.vectors.column(j).into_owned()) * real(p);
        }
        Some(hermitian_part(&g))
    }

    fn coords(&self, m: &CMat<T>) -> RVec<T> {
        RVec::from_iterator(self.basis.len(), self.basis.iter().map(|e| inner(e, m)))
    }

    fn derivatives(&self, z: &CMat<T>, mu: T) -> Option<SatoDerivatives<T>> {
        let r = z.nrows();
        let n = self.basis.len();
        let k = self.vectors.ncols();
        let z_inv = inv_pd(z)?;
        let a = inv_pd(&(identity::<T>(r) + z))?;
        let q = self.loads(z);
        let grad = self.coords(&self.matrix_gradient(z, &self.barrier_multipliers(z, mu))?);
        let proj = self.constraint_rows();
        let weights = if mu > T::zero() {
            q.map(|qj| mu / ((T::one() - qj) * (T::one() - qj)))
        } else {
            RVec::zeros(k)
        };
        let mut hess = DMatrix::zeros(n, n);
        for b in 0..n {
            let eb = &self.basis[b];
            let m = &z_inv * eb * &z_inv - &a * eb * &a;
            for c in 0..=b {
                let mut h = inner(&self.basis[c], &m);
                for j in 0..k {
                    h += weights[j] * proj[(j, b)] * proj[(j, c)];
                }
                hess[(b, c)] = h;
                hess[(c, b)] = h;
            }
        }
        Some(SatoDerivatives { grad, hess })
    }

    /// `K × n`, row `k` holds `v_k^H E_a v_k` for each basis element.
    fn constraint_rows(&self) -> DMatrix<T> {
        let (k, n) = (self.vectors.ncols(), self.basis.len());
        DMatrix::from_fn(k, n, |j, b| {
            quad_form(&self.basis[b], &self.vectors.column(j).into_owned())
        })
    }

    /// Newton on the KKT system with the constraints in `active` held as
    /// equalities and the rest dropped. Returns `None` if the system is
    /// singular or the result leaves the feasible set.
    fn polish(&self, z: &CMat<T>, phi: &RVec<T>, active: &[usize]) -> Option<(CMat<T>, RVec<T>)> {
        let n = self.basis.len();
        let k = self.vectors.ncols();
        let m = active.len();
        let rows = self.constraint_rows();
        let mut x = self.coords(z);
        let mut mult = RVec::from_iterator(m, active.iter().map(|&j| phi[j]));
        let full = |mult: &RVec<T>| {
            let mut p = RVec::zeros(k);
            for (i, &j) in active.iter().enumerate() {
                p[j] = mult[i];
            }
            p
        };
        let residual = |x: &RVec<T>, mult: &RVec<T>| -> Option<(RVec<T>, T)> {
            let z = self.z_of(x);
            let g = self.coords(&self.matrix_gradient(&z, &full(mult))?);
            let q = self.loads(&z);
            let mut out = RVec::zeros(n + m);
            out.rows_mut(0, n).copy_from(&g);
            for (i, &j) in active.iter().enumerate() {
                out[n + i] = q[j] - T::one();
            }
            let norm = out.norm();
            Some((out, norm))
        };
        let (mut res, mut norm) = residual(&x, &mult)?;
        for _ in 0..POLISH_STEPS {
            let z = self.z_of(&x);
            let hess = self.derivatives(&z, T::zero())?.hess;
            let mut kkt = DMatrix::zeros(n + m, n + m);
            kkt.view_mut((0, 0), (n, n)).copy_from(&hess);
            for (i, &j) in active.iter().enumerate() {
                for a in 0..n {
                    kkt[(n + i, a)] = rows[(j, a)];
                    kkt[(a, n + i)] = rows[(j, a)];
                }
            }
            let step = kkt.lu().solve(&(-&res))?;
            let xn = &x + step.rows(0, n);
            let mn = &mult + step.rows(n, m);
            let (rn, nn) = residual(&xn, &mn)?;
            if !(nn < norm) {
                break;
            }
            x = xn;
            mult = mn;
            res = rn;
            norm = nn;
        }
        let z = hermitian_part(&self.z_of(&x));
        cholesky(&z)?;
        let q = self.loads(&z);
        let feasible = (0..k).all(|j| q[j] <= T::one() + T::tol(1e-10));
        if !feasible || mult.iter().any(|&p| p < T::zero()) {
            return None;
        }
        Some((z, full(&mult)))
    }
}

/// Newton steps of the final active-set refinement.
const POLISH_STEPS: usize = 6;

/// Minimizes `log|I+Z| − log|Z|` over `Z ≻ 0` with `v_k^H Z v_k ≤ 1` by a
/// log-barrier method with damped Newton centering.
///
/// At small `μ` the multipliers `μ/(1 − q_k)` lose precision to the
/// cancellation in `1 − q_k`, so the last center is refined by Newton on the
/// KKT system with the near-active constraints held as equalities.
pub fn solve_sato_barrier<T: Real>(eff: &EffectiveChannel<T>, opts: &BarrierOptions<T>) -> Result<SatoSolution<T>> {
    opts.check()?;
    let vectors = eff.normalized_factor();
    let (r, k) = vectors.shape();
    let problem = SatoProblem {
        basis: hermitian_basis::<T>(r),
        vectors,
    };
    let peak = (0..k).fold(T::zero(), |m, j| m.max(problem.vectors.column(j).norm_squared()));
    let start = identity::<T>(r) * real(T::lit(0.5) / peak);
    let mut x = RVec::from_iterator(problem.basis.len(), problem.basis.iter().map(|e| inner(e, &start)));
    let lost = || Error::Degenerate("barrier iterate left the domain".into());
    let mut mu = opts.mu_start;
    let mut steps = 0;
    let mut centered;
    loop {
        centered = false;
        for _ in 0..opts.max_newton {
            let z = problem.z_of(&x);
            let der = problem.derivatives(&z, mu).ok_or_else(lost)?;
            let dx = match der.hess.clone().cholesky() {
                Some(ch) => ch.solve(&(-&der.grad)),
                None => der
                    .hess
                    .lu()
                    .solve(&(-&der.grad))
                    .ok_or_else(|| Error::Singular("barrier Hessian is singular".into()))?,
            };
            let decrement = -der.grad.dot(&dx);
            if !(decrement > T::default_epsilon() * T::lit(1e-4)) {
                centered = true;
                break;
            }
            let f0 = problem.objective(&z, mu).ok_or_else(lost)?;
            let slack = T::lit(64.0) * T::default_epsilon() * f0.abs().max(T::one());
            let mut step = T::one();
            let mut moved = false;
            for _ in 0..opts.max_halvings {
                let trial = &x + &dx * step;
                if let Some(f1) = problem.objective(&problem.z_of(&trial), mu) {
                    if f1 <= f0 - T::lit(0.25) * step * decrement + slack {
                        x = trial;
                        moved = true;
                        break;
                    }
                }
                step *= T::lit(0.5);
            }
            steps += 1;
            if !moved {
                centered = true;
                break;
            }
        }
        if mu < opts.mu_stop {
            break;
        }
        mu *= opts.shrink;
    }
    let mut z = hermitian_part(&problem.z_of(&x));
    let mut phi = problem.barrier_multipliers(&z, mu);
    let mut stationarity = problem.matrix_gradient(&z, &phi).ok_or_else(lost)?.norm();
    let q = problem.loads(&z);
    let active: Vec<usize> = (0..k).filter(|&j| T::one() - q[j] < mu.sqrt()).collect();
    if let Some((zp, pp)) = problem.polish(&z, &phi, &active) {
        let sp = problem.matrix_gradient(&zp, &pp).ok_or_else(lost)?.norm();
        if sp < stationarity {
            z = zp;
            phi = pp;
            stationarity = sp;
        }
    }
    let bound = bits(logdet_pd(&(identity::<T>(r) + &z)).ok_or_else(lost)? - logdet_pd(&z).ok_or_else(lost)?);
    Ok(SatoSolution {
        converged: centered && stationarity < T::tol(1e-6),
        z,
        phi,
        bound,
        mu,
        newton_steps: steps,
        stationarity,
    })
}

/// Residuals of the saddle problem's optimality conditions at the point
/// built from a [`SatoSolution`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct KktReport<T: Real> {
    /// `η = Σ φ_k`, also the trace multiplier.
    pub eta: T,
    /// `‖(Y + Σ d_k v_k v_k^H)^{-1} − Y^{-1} + η I‖_F`.
    pub stationarity: T,
    /// `|tr Y − 1|`.
    pub trace: T,
    /// `max_k |v_k^H (Y + Σ d v v^H)^{-1} v_k − η + ϕ_k|` with `ϕ_k = η(1 − v_k^H Z v_k)`.
    pub per_user: T,
    /// `max_k |ϕ_k d_k|`, together with any negative `ϕ_k`.
    pub slackness: T,
}

impl<T: Real> KktReport<T> {
    /// Names the first condition whose residual exceeds `tol`.
    pub fn check(&self, tol: T) -> Result<()> {
        let items = [
            ("stationarity in Y", self.stationarity),
            ("trace of Y", self.trace),
            ("per-user condition", self.per_user),
            ("complementary slackness", self.slackness),
        ];
        for (name, value) in items {
            if !(value <= tol) {
                return Err(Error::Verification(format!("{name} residual {:.3e}", value.as_f64())));
            }
        }
        Ok(())
    }
}

/// Builds the saddle point `d = φ/η`, `Y = (Z + I)^{-1}/η` and checks the
/// saddle problem's KKT system at it (tolerance `1e-6`).
pub fn verify_kkt_theorem1<T: Real>(
    sato: &SatoSolution<T>,
    eff: &EffectiveChannel<T>,
) -> Result<(SaddlePoint<T>, KktReport<T>)> {
    let vectors = eff.normalized_factor();
    let (r, k) = vectors.shape();
    if sato.z.shape() != (r, r) || sato.phi.len() != k {
        return Err(Error::Dimension("solution does not match the channel".into()));
    }
    let eta = sato.phi.sum();
    if !(eta > T::zero()) {
        return Err(Error::Degenerate("all constraint multipliers vanish".into()));
    }
    let singular = || Error::Singular("Z + I is not invertible".into());
    let y = hermitian_part(&(inv_pd(&(identity::<T>(r) + &sato.z)).ok_or_else(singular)? * real(T::one() / eta)));
    let d = &sato.phi / eta;
    let e = evaluate(&y, &d, &vectors)?;
    let y_inv = inv_pd(&y).ok_or_else(singular)?;
    let total_inv = &e.grad_y + &y_inv;
    let stationarity = (&e.grad_y + identity::<T>(r) * real(eta)).norm();
    let mut per_user = T::zero();
    let mut slackness = T::zero();
    for j in 0..k {
        let v: CVec<T> = vectors.column(j).into_owned();
        let varphi = eta * (T::one() - quad_form(&sato.z, &v));
        per_user = per_user.max((quad_form(&total_inv, &v) - eta + varphi).abs());
        slackness = slackness.max((varphi * d[j]).abs()).max(-varphi);
    }
    let report = KktReport {
        eta,
        stationarity,
        trace: (trace_re(&y) - T::one()).abs(),
        per_user,
        slackness,
    };
    report.check(T::tol(1e-6))?;
    let simplex = WeightedSimplex::unit(k);
    let (ry, rd) = residuals(&y, &d, &e, &simplex);
    let mac = mac_rates(&y, &d, &vectors)?;
    let point = SaddlePoint {
        y,
        d,
        rate: mac.rate,
        uplink_sinrs: mac.sinrs,
        iterations: sato.newton_steps,
        converged: sato.converged,
        residual: ry.max(rd),
        floor_hits: 0,
        trace: Vec::new(),
    };
    Ok((point, report))
}

/// Downlink precoder achieving the uplink SINRs of a saddle point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct SumRatePrecoder<T: Real> {
    /// `K × K` effective precoder `F = U Σ_r^{1/2} F_u`.
    #[serde(with = "json::cmat")]
    pub f: CMat<T>,
    /// `r × K`, satisfies `F_u F_u^H ⪯ I`.
    #[serde(with = "json::cmat")]
    pub f_u: CMat<T>,
    /// Column powers applied to the uplink filters.
    #[serde(with = "json::rvec")]
    pub powers: RVec<T>,
    #[serde(with = "json::rvec")]
    pub downlink_sinrs: RVec<T>,
    /// Sum of `log₂(1 + SINR_k)` over the downlink SINRs.
    pub rate: T,
    /// Largest eigenvalue of `F_u F_u^H` before any rescaling.
    pub peak: T,
}

/// Turns the uplink MMSE filters of a saddle point into a DPC precoder
/// whose downlink SINRs equal the uplink ones.
pub fn recover_sumrate_precoder<T: Real>(sp: &SaddlePoint<T>, eff: &EffectiveChannel<T>) -> Result<SumRatePrecoder<T>> {
    let vectors = eff.normalized_factor();
    let (r, k) = vectors.shape();
    if sp.y.shape() != (r, r) {
        return Err(Error::Dimension("saddle point does not match the channel".into()));
    }
    check_powers(&sp.d, k)?;
    let singular = || Error::Singular("Y + Σ d v v^H is not positive definite".into());
    let mut acc = hermitian_part(&sp.y);
    let mut filters = CMat::<T>::zeros(r, k);
    let mut targets = RVec::zeros(k);
    for j in 0..k {
        let v: CVec<T> = vectors.column(j).into_owned();
        let fj = cholesky(&acc).ok_or_else(singular)?.solve(&v);
        targets[j] = sp.d[j] * v.dotc(&fj).re;
        filters.set_column(j, &fj);
        acc += outer(&v) * real(sp.d[j]);
    }
    let gain = |row: usize, col: usize| vectors.column(row).dotc(&filters.column(col)).norm_sqr();
    let mut powers = RVec::<T>::zeros(k);
    for j in (0..k).rev() {
        if !(targets[j] > T::zero()) {
            continue;
        }
        let interference = (j + 1..k).fold(T::zero(), |s, i| s + gain(j, i) * powers[i]);
        powers[j] = targets[j] * (T::one() + interference) / gain(j, j);
        if !(powers[j] >= T::zero() && powers[j].is_finite()) {
            return Err(Error::Degenerate(format!(
                "user {j} gets power {:.3e}",
                powers[j].as_f64()
            )));
        }
    }
    let mut f_u = CMat::from_fn(r, k, |row, col| filters[(row, col)] * real(powers[col].sqrt()));
    let peak = lambda_max(&(&f_u * f_u.adjoint()));
    if peak > T::one() {
        f_u *= real(T::one() / peak.sqrt());
    }
    rotate_real_diagonal(&mut f_u, &vectors);
    let f = eff.lift(&f_u);
    let downlink_sinrs = compute_sinr(&f, eff, SinrMode::Dpc)?;
    let rate = downlink_sinrs.iter().fold(T::zero(), |s, &g| s + (T::one() + g).log2());
    Ok(SumRatePrecoder {
        f,
        f_u,
        powers,
        downlink_sinrs,
        rate,
        peak,
    })
}
