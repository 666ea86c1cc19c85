//! SINR balancing for linear transmit beamforming.
//!
//! The balanced SINR is `γ = t²/(1 − t²)` where `t` is the optimum of
//!
//! ```text
//! max t  s.t.  Re F_kk ≥ t s_k,  F F^H ⪯ R_h.
//! ```
//!
//! Its dual is `min ‖D‖_*` over the weighted simplex `{d ≥ 0, sᵀd = 1}`,
//! with `D = [d_1 u_1, …, d_K u_K]`. The dual is solved by projected gradient
//! descent with Armijo backtracking and the precoder is recovered from the
//! polar factor of `D`.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::linalg::{modulus, real, CMat, HermitianEigen, RVec};
use crate::model::EffectiveChannel;
use crate::projections::{project_weighted_simplex, WeightedSimplex};
use crate::{json, Error, Real, Result};

/// Relative eigenvalue cut used for `(D D^H)^{-1/2}`.
const POLAR_CUT: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real", default)]
pub struct TbfOptions<T: Real> {
    /// Stop when `‖Δ_d‖₂` drops below this.
    pub tol: T,
    pub max_iter: usize,
    pub armijo: T,
    pub shrink: T,
    pub max_halvings: usize,
    /// Scale the gradient inside the projection by a Barzilai–Borwein step.
    /// Off gives the plain `P(d − ∇h) − d` direction. The stopping test uses
    /// the unscaled direction either way.
    pub spectral: bool,
}

impl<T: Real> Default for TbfOptions<T> {
    fn default() -> Self {
        Self {
            tol: T::tol(1e-8),
            max_iter: 5000,
            armijo: T::lit(1e-4),
            shrink: T::lit(0.5),
            max_halvings: 40,
            spectral: true,
        }
    }
}

impl<T: Real> TbfOptions<T> {
    pub fn check(&self) -> Result<()> {
        if !(self.tol > T::zero())
            || self.max_iter == 0
            || !(self.shrink > T::zero() && self.shrink < T::one())
            || !(self.armijo > T::zero() && self.armijo < T::one())
        {
            return Err(Error::InvalidArgument("invalid TBF solver options".into()));
        }
        Ok(())
    }
}

/// One row of the dual convergence trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct TbfTraceRow<T: Real> {
    pub iteration: usize,
    pub h: T,
    pub gamma: T,
    pub step: T,
    pub delta_norm: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct TbfDualState<T: Real> {
    #[serde(with = "json::rvec")]
    pub d: RVec<T>,
    /// `r × K`, column `k` is `d_k u_k`.
    #[serde(with = "json::cmat")]
    pub d_matrix: CMat<T>,
    /// Nuclear norm of `D`.
    pub h: T,
    pub trace: Vec<TbfTraceRow<T>>,
}

impl<T: Real> TbfDualState<T> {
    pub fn write_trace_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "iteration,h,gamma,step,delta_norm")?;
        for row in &self.trace {
            writeln!(
                out,
                "{},{:e},{:e},{:e},{:e}",
                row.iteration, row.h, row.gamma, row.step, row.delta_norm
            )?;
        }
        Ok(())
    }
}

/// Output of either balancing solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real, D: Serialize", deserialize = "T: Real, D: Deserialize<'de>"))]
pub struct BalancingResult<T: Real, D> {
    /// Balanced SINR from the dual objective at the final iterate.
    pub gamma: T,
    /// `sqrt(γ / (1 + γ))`.
    pub t: T,
    /// Common per-user SINR actually achieved by `f`.
    pub primal_gamma: T,
    /// `K × K` effective precoder.
    #[serde(with = "json::cmat")]
    pub f: CMat<T>,
    pub dual: D,
    pub iterations: usize,
    pub converged: bool,
    /// Non-fatal conditions met during recovery.
    pub notes: Vec<String>,
}

fn gamma_of_t<T: Real>(t: T) -> T {
    if t < T::one() {
        t * t / (T::one() - t * t)
    } else {
        T::max_value().unwrap_or(T::one() / T::default_epsilon())
    }
}

fn t_of_gamma<T: Real>(gamma: T) -> T {
    (gamma / (T::one() + gamma)).sqrt()
}

/// Nuclear norm of `D` and the gradient of `d ↦ ‖D‖_*`.
///
/// The gradient is `grad_k = d_k u_k^H (D D^H)^{-1/2} u_k`, which equals
/// `[(D^H D)^{1/2}]_kk / d_k`, plus `‖P⊥ u_k‖` for the part of `u_k` outside
/// the numerical range of `D`. The second term is the one-sided limit at
/// `d_k → 0` and keeps the gradient stable on the boundary of the simplex.
fn nuclear_and_gradient<T: Real>(vectors: &CMat<T>, d: &RVec<T>) -> (T, RVec<T>, CMat<T>, CMat<T>) {
    let k = vectors.ncols();
    let mut dm = vectors.clone();
    for j in 0..k {
        let w = real(d[j]);
        dm.column_mut(j).iter_mut().for_each(|z| *z *= w);
    }
    let eig = HermitianEigen::new(&(&dm * dm.adjoint()));
    let cut = T::tol(POLAR_CUT) * eig.max().max(T::zero());
    // singular values of D directly: square roots of rounding-level
    // eigenvalues of DDᴴ would pollute h at the sqrt(eps) level
    let h = dm.singular_values().iter().fold(T::zero(), |acc, &v| acc + v);
    let inv_sqrt = eig.map(|v| {
        if v > cut && v > T::zero() {
            T::one() / v.sqrt()
        } else {
            T::zero()
        }
    });
    let kept = eig.values.iter().filter(|&&v| v > cut && v > T::zero()).count();
    let null = eig.vectors.columns(kept, eig.values.len() - kept).into_owned();
    let polar = &inv_sqrt * &dm;
    let outside = null.adjoint() * vectors;
    let grad = RVec::from_iterator(
        k,
        (0..k).map(|j| {
            let inside = vectors.column(j).dotc(&polar.column(j)).re;
            inside + outside.column(j).norm()
        }),
    );
    (h, grad, polar, null)
}

/// `h(d) = ‖D‖_*` and its gradient for strictly positive `d`.
pub fn dual_objective_and_gradient<T: Real>(d: &RVec<T>, eff: &EffectiveChannel<T>) -> Result<(T, RVec<T>)> {
    if d.len() != eff.users() {
        return Err(Error::Dimension(format!(
            "dual vector has length {} for {} users",
            d.len(),
            eff.users()
        )));
    }
    if d.iter().any(|&x| !(x > T::zero())) {
        return Err(Error::InvalidArgument("dual vector must be strictly positive".into()));
    }
    let (h, g, _, _) = nuclear_and_gradient(eff.factor(), d);
    Ok((h, g))
}

struct DualRun<T: Real> {
    d: RVec<T>,
    h: T,
    iterations: usize,
    converged: bool,
    trace: Vec<TbfTraceRow<T>>,
}

fn projected_gradient<T: Real>(vectors: &CMat<T>, s: &RVec<T>, opts: &TbfOptions<T>) -> DualRun<T> {
    let k = vectors.ncols();
    let set = WeightedSimplex::new(s.clone()).expect("s_k > 0");
    let ss = s.norm_squared();
    let kk = T::lit(k as f64);
    let mut d = RVec::from_iterator(k, s.iter().map(|&w| T::one() / (kk * w)));
    let (mut h, mut grad, _, _) = nuclear_and_gradient(vectors, &d);
    let mut scale = T::one();
    let (lo, hi) = (T::lit(1e-10), T::lit(1e10));
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        let raw = project_weighted_simplex(&(&d - &grad), &set) - &d;
        let dn = raw.norm();
        if dn < opts.tol {
            converged = true;
            trace.push(TbfTraceRow {
                iteration: iterations,
                h,
                gamma: gamma_of_t(h),
                step: T::zero(),
                delta_norm: dn,
            });
            break;
        }
        let dir = if opts.spectral && scale != T::one() {
            project_weighted_simplex(&(&d - &grad * scale), &set) - &d
        } else {
            raw
        };
        // drop the component along s: it only repairs rounding drift in sᵀd,
        // which the renormalization below handles, and it would swamp the slope
        let delta = &dir - s * (s.dot(&dir) / ss);
        let slope = grad.dot(&delta);
        let noise = T::lit(64.0) * T::default_epsilon() * h.abs();
        let mut step = T::one();
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let mut trial = (&d + &delta * step).map(|x| x.max(T::zero()));
            trial /= s.dot(&trial);
            let (ht, gt, _, _) = nuclear_and_gradient(vectors, &trial);
            // once the predicted decrease is lost in rounding, fall back to
            // the derivative form of the Armijo test
            let flat = (ht - h).abs() <= noise && gt.dot(&delta) <= (T::one() - opts.armijo * T::lit(2.0)) * -slope;
            if ht <= h + opts.armijo * step * slope || flat {
                accepted = Some((trial, ht, gt));
                break;
            }
            step *= opts.shrink;
        }
        trace.push(TbfTraceRow {
            iteration: iterations,
            h,
            gamma: gamma_of_t(h),
            step: if accepted.is_some() { step * scale } else { T::zero() },
            delta_norm: dn,
        });
        iterations += 1;
        match accepted {
            Some((nd, nh, ng)) => {
                // Barzilai–Borwein scale for the next projected step
                let sd = &nd - &d;
                let yd = &ng - &grad;
                let curv = sd.dot(&yd);
                scale = if curv > T::zero() {
                    (sd.norm_squared() / curv).max(lo).min(hi)
                } else {
                    hi.min(scale * T::lit(10.0))
                };
                d = nd;
                h = nh;
                grad = ng;
            }
            // no descent left at working precision
            None => break,
        }
    }
    DualRun {
        d,
        h,
        iterations,
        converged,
        trace,
    }
}

/// Builds `F_u` (r × K) serving every user with `Re [Q F_u]_kk ≥ t s_k`
/// where possible. Users left unserved by the polar factor of `D` (those
/// with `d_k = 0`) are served recursively in the orthogonal complement of
/// the range of `D`, which the polar factor leaves unused.
fn recover_fu<T: Real>(vectors: &CMat<T>, s: &RVec<T>, opts: &TbfOptions<T>, depth: usize) -> (CMat<T>, DualRun<T>) {
    let r = vectors.nrows();
    let k = vectors.ncols();
    let run = projected_gradient(vectors, s, opts);
    let (_, _, polar, null) = nuclear_and_gradient(vectors, &run.d);
    let mut fu = polar;
    let diag = |fu: &CMat<T>, j: usize| vectors.column(j).dotc(&fu.column(j));
    let target = run.h * (T::one() - T::tol(1e-9));
    let short: Vec<usize> = (0..k).filter(|&j| diag(&fu, j).re < target * s[j]).collect();
    if !short.is_empty() && null.ncols() > 0 && depth < r {
        let sub_vectors = CMat::from_fn(null.ncols(), short.len(), |i, j| {
            null.column(i).dotc(&vectors.column(short[j]))
        });
        let norms: Vec<T> = (0..short.len()).map(|j| sub_vectors.column(j).norm()).collect();
        let top = norms.iter().fold(T::zero(), |m, &v| m.max(v));
        if top > T::zero() {
            let live: Vec<usize> = (0..short.len()).filter(|&j| norms[j] > T::tol(1e-12) * top).collect();
            let sv = CMat::from_fn(null.ncols(), live.len(), |i, j| sub_vectors[(i, live[j])]);
            let ss = RVec::from_iterator(live.len(), live.iter().map(|&j| s[short[j]]));
            let (sub_fu, _) = recover_fu(&sv, &ss, opts, depth + 1);
            let lifted = &null * sub_fu;
            for (j, &idx) in live.iter().enumerate() {
                let user = short[idx];
                let extra = lifted.column(j).into_owned();
                // align the phase of the extra contribution with the existing one
                let a = diag(&fu, user);
                let b = vectors.column(user).dotc(&extra);
                let rot = if modulus(a) > T::zero() && modulus(b) > T::zero() {
                    (a / real(modulus(a))) / (b / real(modulus(b)))
                } else {
                    real(T::one())
                };
                let mut col = fu.column(user).into_owned();
                col += extra * rot;
                fu.set_column(user, &col);
            }
        }
    }
    (fu, run)
}

/// Solves the TBF balancing problem and recovers an equal-SINR precoder.
pub fn solve_tbf_balancing<T: Real>(
    eff: &EffectiveChannel<T>,
    opts: &TbfOptions<T>,
) -> Result<BalancingResult<T, TbfDualState<T>>> {
    opts.check()?;
    let vectors = eff.factor();
    let s = eff.s();
    let k = eff.users();
    let (mut fu, run) = recover_fu(vectors, s, opts, 0);
    if !(run.h > T::zero()) {
        return Err(Error::Degenerate("dual matrix D vanished".into()));
    }

    // rotate each column so F_kk is real and nonnegative
    for j in 0..k {
        let fkk = vectors.column(j).dotc(&fu.column(j));
        if modulus(fkk) > T::zero() {
            let rot = fkk.conj() / real(modulus(fkk));
            fu.column_mut(j).iter_mut().for_each(|z| *z *= rot);
        }
    }
    let served = |fu: &CMat<T>, j: usize| vectors.column(j).dotc(&fu.column(j)).re;
    let t_primal = (0..k)
        .map(|j| served(&fu, j) / s[j])
        .fold(T::max_value().unwrap(), |m, v| m.min(v));
    let mut notes = Vec::new();
    if t_primal < run.h * (T::one() - T::tol(1e-6)) {
        notes.push(format!(
            "primal recovery reached t = {:.9e} against dual bound {:.9e}",
            t_primal.as_f64(),
            run.h.as_f64()
        ));
    }
    // equalize: scale every column down to the common level
    for j in 0..k {
        let fkk = served(&fu, j);
        if fkk > T::zero() {
            let w = real((t_primal * s[j] / fkk).min(T::one()));
            fu.column_mut(j).iter_mut().for_each(|z| *z *= w);
        }
    }
    let f = eff.lift(&fu);
    let mut d_matrix = vectors.clone();
    for j in 0..k {
        let w = real(run.d[j]);
        d_matrix.column_mut(j).iter_mut().for_each(|z| *z *= w);
    }
    let gamma = gamma_of_t(run.h);
    Ok(BalancingResult {
        gamma,
        t: t_of_gamma(gamma),
        primal_gamma: gamma_of_t(t_primal.max(T::zero())),
        f,
        dual: TbfDualState {
            d: run.d,
            d_matrix,
            h: run.h,
            trace: run.trace,
        },
        iterations: run.iterations,
        converged: run.converged,
        notes,
    })
}
