//! Channels, radar covariances and precoders, plus SINR evaluation and the
//! map from an effective precoder `F` back to `(W_c, W_r)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::json;
use crate::linalg::{
    cplx, hermitian_asymmetry, hermitian_part, hermitian_pinv, lambda_max, real, trace_re, CMat, CVec, HermitianEigen,
    RVec,
};
use crate::{Error, Real, Result};

/// Relative eigenvalue threshold below which `R_h` directions are dropped.
pub const RANK_THRESHOLD: f64 = 1e-10;
/// Relative asymmetry accepted for inputs that must be Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-10;

/// Flat-fading downlink channel `H` (K users × M antennas).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ChannelMatrix<T: Real> {
    #[serde(with = "json::cmat")]
    entries: CMat<T>,
}

impl<T: Real> ChannelMatrix<T> {
    pub fn new(entries: CMat<T>) -> Result<Self> {
        let (k, m) = entries.shape();
        if k == 0 || m == 0 {
            return Err(Error::Dimension("channel matrix must be non-empty".into()));
        }
        if k > m {
            return Err(Error::Dimension(format!(
                "channel has more users ({k}) than antennas ({m})"
            )));
        }
        if entries.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::InvalidArgument("channel has non-finite entries".into()));
        }
        Ok(Self { entries })
    }

    pub fn users(&self) -> usize {
        self.entries.nrows()
    }

    pub fn antennas(&self) -> usize {
        self.entries.ncols()
    }

    pub fn matrix(&self) -> &CMat<T> {
        &self.entries
    }

    /// Reorders users (rows of `H`).
    pub fn permute_users(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.users() {
            return Err(Error::Dimension("permutation length differs from user count".into()));
        }
        let mut out = self.entries.clone();
        for (dst, &src) in order.iter().enumerate() {
            out.set_row(dst, &self.entries.row(src));
        }
        Self::new(out)
    }
}

/// Radar transmit covariance `R_o = P · S_o` with `tr(S_o) = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct RadarCovariance<T: Real> {
    #[serde(with = "json::cmat")]
    shape: CMat<T>,
    power: T,
}

impl<T: Real> RadarCovariance<T> {
    /// Validates `S_o` (Hermitian, PSD, unit trace) and `P > 0`.
    pub fn new(shape: CMat<T>, power: T) -> Result<Self> {
        if !shape.is_square() || shape.nrows() == 0 {
            return Err(Error::Dimension("covariance shape must be square".into()));
        }
        if !(power > T::zero() && power.is_finite()) {
            return Err(Error::InvalidArgument("transmit power must be positive".into()));
        }
        let asym = hermitian_asymmetry(&shape);
        if asym > T::tol(HERMITIAN_TOL) {
            return Err(Error::NotHermitian(asym.as_f64()));
        }
        let shape = hermitian_part(&shape);
        let tr = trace_re(&shape);
        if (tr - T::one()).abs() > T::tol(1e-10) {
            return Err(Error::InvalidArgument(format!(
                "covariance shape must have unit trace (got {:.12e})",
                tr.as_f64()
            )));
        }
        let min = HermitianEigen::new(&shape).min();
        if min < -T::tol(1e-12) {
            return Err(Error::NotPsd(min.as_f64()));
        }
        Ok(Self { shape, power })
    }

    /// Splits a full covariance into power and unit-trace shape.
    pub fn from_covariance(r_o: &CMat<T>) -> Result<Self> {
        let tr = trace_re(r_o);
        if !(tr > T::zero()) {
            return Err(Error::InvalidArgument("covariance must have positive trace".into()));
        }
        Self::new(r_o * real(T::one() / tr), tr)
    }

    pub fn with_power(&self, power: T) -> Result<Self> {
        Self::new(self.shape.clone(), power)
    }

    pub fn shape(&self) -> &CMat<T> {
        &self.shape
    }

    pub fn power(&self) -> T {
        self.power
    }

    pub fn antennas(&self) -> usize {
        self.shape.nrows()
    }

    /// `R_o = P S_o`.
    pub fn covariance(&self) -> CMat<T> {
        &self.shape * real(self.power)
    }
}

/// `R_h = H R_o H^H` together with its rank-`r` factorization and the
/// per-user scalars `s_k = sqrt([R_h]_kk + σ²)`.
///
/// The factor is stored as an `r × K` matrix whose column `k` is `u_k`, with
/// `u_k^H` equal to row `k` of `U Σ_r^{1/2}`. Hence `[R_h]_{kj} = u_k^H u_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct EffectiveChannel<T: Real> {
    #[serde(with = "json::cmat")]
    gram: CMat<T>,
    rank: usize,
    #[serde(with = "json::cmat")]
    basis: CMat<T>,
    #[serde(with = "json::rvec")]
    eigenvalues: RVec<T>,
    #[serde(with = "json::cmat")]
    factor: CMat<T>,
    #[serde(with = "json::rvec")]
    s: RVec<T>,
    sigma2: T,
}

impl<T: Real> EffectiveChannel<T> {
    pub fn new(h: &ChannelMatrix<T>, radar: &RadarCovariance<T>, sigma2: T) -> Result<Self> {
        if h.antennas() != radar.antennas() {
            return Err(Error::Dimension(format!(
                "channel has {} antennas but covariance is {}x{}",
                h.antennas(),
                radar.antennas(),
                radar.antennas()
            )));
        }
        let hm = h.matrix();
        let gram = hm * radar.covariance() * hm.adjoint();
        Self::from_gram(gram, sigma2)
    }

    /// Builds the effective channel directly from `R_h`.
    pub fn from_gram(gram: CMat<T>, sigma2: T) -> Result<Self> {
        if !gram.is_square() || gram.nrows() == 0 {
            return Err(Error::Dimension("R_h must be square and non-empty".into()));
        }
        if !(sigma2 > T::zero() && sigma2.is_finite()) {
            return Err(Error::InvalidArgument("noise power must be positive".into()));
        }
        let asym = hermitian_asymmetry(&gram);
        if asym > T::tol(HERMITIAN_TOL) {
            return Err(Error::NotHermitian(asym.as_f64()));
        }
        let gram = hermitian_part(&gram);
        let eig = HermitianEigen::new(&gram);
        let top = eig.max();
        if !(top > T::zero()) {
            return Err(Error::ZeroChannel);
        }
        if eig.min() < -T::tol(1e-8) * top {
            return Err(Error::NotPsd(eig.min().as_f64()));
        }
        let rank = eig.rank(T::tol(RANK_THRESHOLD));
        let k = gram.nrows();
        let basis = eig.vectors.columns(0, rank).into_owned();
        let eigenvalues = eig.values.rows(0, rank).into_owned();
        let mut mixing = basis.clone();
        for j in 0..rank {
            let w = real(eigenvalues[j].sqrt());
            mixing.column_mut(j).iter_mut().for_each(|z| *z *= w);
        }
        let factor = mixing.adjoint();
        let s = RVec::from_iterator(k, (0..k).map(|i| (gram[(i, i)].re + sigma2).sqrt()));
        Ok(Self {
            gram,
            rank,
            basis,
            eigenvalues,
            factor,
            s,
            sigma2,
        })
    }

    /// Checks the stored fields against each other (after deserialization).
    pub fn validate(&self) -> Result<()> {
        let k = self.users();
        let r = self.rank;
        if self.gram.shape() != (k, k)
            || self.basis.shape() != (k, r)
            || self.factor.shape() != (r, k)
            || self.eigenvalues.len() != r
            || self.s.len() != k
        {
            return Err(Error::Dimension("inconsistent effective-channel fields".into()));
        }
        let back = self.mixing() * self.factor.clone();
        let err = (back - &self.gram).norm() / self.gram.norm();
        if err > T::tol(1e-10) {
            return Err(Error::InvalidArgument(format!(
                "factorization mismatch {:.3e}",
                err.as_f64()
            )));
        }
        for i in 0..k {
            let expect = (self.gram[(i, i)].re + self.sigma2).sqrt();
            if (self.s[i] - expect).abs() > T::tol(1e-10) * expect {
                return Err(Error::InvalidArgument(format!("s[{i}] inconsistent with R_h")));
            }
        }
        Ok(())
    }

    pub fn users(&self) -> usize {
        self.gram.nrows()
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// `R_h`.
    pub fn gram(&self) -> &CMat<T> {
        &self.gram
    }

    /// `U` (K × r, orthonormal columns).
    pub fn basis(&self) -> &CMat<T> {
        &self.basis
    }

    /// Diagonal of `Σ_r`, descending.
    pub fn eigenvalues(&self) -> &RVec<T> {
        &self.eigenvalues
    }

    /// `r × K`, column `k` is `u_k`.
    pub fn factor(&self) -> &CMat<T> {
        &self.factor
    }

    /// Factor scaled by `1/σ`, i.e. the unit-noise form used by the DPC solvers.
    pub fn normalized_factor(&self) -> CMat<T> {
        &self.factor * real(T::one() / self.sigma2.sqrt())
    }

    pub fn u(&self, k: usize) -> CVec<T> {
        self.factor.column(k).into_owned()
    }

    pub fn s(&self) -> &RVec<T> {
        &self.s
    }

    pub fn sigma2(&self) -> T {
        self.sigma2
    }

    /// `U Σ_r^{1/2}` (K × r).
    pub fn mixing(&self) -> CMat<T> {
        self.factor.adjoint()
    }

    /// `F = U Σ_r^{1/2} F_u`.
    pub fn lift(&self, f_u: &CMat<T>) -> CMat<T> {
        self.mixing() * f_u
    }

    /// Relabels users; `order[new] = old`.
    pub fn permute_users(&self, order: &[usize]) -> Result<Self> {
        let k = self.users();
        if order.len() != k {
            return Err(Error::Dimension("permutation length differs from user count".into()));
        }
        let g = CMat::from_fn(k, k, |i, j| self.gram[(order[i], order[j])]);
        Self::from_gram(g, self.sigma2)
    }
}

/// `(W_c, W_r)` together with `F = H W_c` and `G = H W_r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Precoders<T: Real> {
    #[serde(with = "json::cmat")]
    pub w_c: CMat<T>,
    #[serde(with = "json::cmat")]
    pub w_r: CMat<T>,
    #[serde(with = "json::cmat")]
    pub f: CMat<T>,
    #[serde(with = "json::cmat")]
    pub g: CMat<T>,
}

impl<T: Real> Precoders<T> {
    /// `W_r W_r^H + W_c W_c^H`.
    pub fn covariance(&self) -> CMat<T> {
        hermitian_part(&(&self.w_r * self.w_r.adjoint() + &self.w_c * self.w_c.adjoint()))
    }

    pub fn antennas(&self) -> usize {
        self.w_r.nrows()
    }

    pub fn users(&self) -> usize {
        self.w_c.ncols()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SinrMode {
    /// Linear transmit beamforming: all other users and radar interfere.
    Tbf,
    /// Dirty-paper coding in order `1..K`: only later users interfere.
    Dpc,
}

/// Per-user SINR of an effective precoder `F`.
pub fn compute_sinr<T: Real>(f: &CMat<T>, eff: &EffectiveChannel<T>, mode: SinrMode) -> Result<RVec<T>> {
    let k = eff.users();
    if f.shape() != (k, k) {
        return Err(Error::Dimension(format!("F must be {k}x{k}, got {:?}", f.shape())));
    }
    match mode {
        SinrMode::Tbf => {
            let slack = lambda_max(&(f * f.adjoint() - eff.gram()));
            let scale = trace_re(eff.gram()).max(T::one());
            if slack > T::tol(1e-6) * scale {
                return Err(Error::Infeasible(format!(
                    "F F^H exceeds R_h by {:.3e}",
                    slack.as_f64()
                )));
            }
            let mut out = RVec::zeros(k);
            for i in 0..k {
                let p = f[(i, i)].norm_sqr();
                let s2 = eff.s()[i] * eff.s()[i];
                if p >= s2 {
                    return Err(Error::Infeasible(format!(
                        "|F_{i}{i}|^2 = {:.6e} reaches s_k^2 = {:.6e}",
                        p.as_f64(),
                        s2.as_f64()
                    )));
                }
                out[i] = p / (s2 - p);
            }
            Ok(out)
        }
        SinrMode::Dpc => Ok(RVec::from_iterator(
            k,
            (0..k).map(|i| {
                let interference = ((i + 1)..k).fold(T::zero(), |acc, j| acc + f[(i, j)].norm_sqr());
                f[(i, i)].norm_sqr() / (interference + eff.sigma2())
            }),
        )),
    }
}

/// Maps an effective precoder back to `(W_c, W_r)`:
/// `W_c = R_o H^H R_h^† F` (equal to `R_o^{1/2} (H R_o^{1/2})^† F`) and
/// `W_r = (R_o − W_c W_c^H)^{1/2}`.
pub fn recover_precoders<T: Real>(
    f: &CMat<T>,
    h: &ChannelMatrix<T>,
    radar: &RadarCovariance<T>,
) -> Result<Precoders<T>> {
    let k = h.users();
    if f.shape() != (k, k) {
        return Err(Error::Dimension(format!("F must be {k}x{k}, got {:?}", f.shape())));
    }
    if h.antennas() != radar.antennas() {
        return Err(Error::Dimension(
            "channel and covariance disagree on antenna count".into(),
        ));
    }
    let hm = h.matrix();
    let r_o = radar.covariance();
    let r_h = hermitian_part(&(hm * &r_o * hm.adjoint()));
    let pinv = hermitian_pinv(&r_h, T::tol(RANK_THRESHOLD));
    let w_c = &r_o * hm.adjoint() * pinv * f;
    let residual = hermitian_part(&(&r_o - &w_c * w_c.adjoint()));
    let eig = HermitianEigen::new(&residual);
    let floor = -T::tol(1e-8) * trace_re(&r_o);
    if eig.min() < floor {
        return Err(Error::Infeasible(format!(
            "R_o - W_c W_c^H has eigenvalue {:.3e}",
            eig.min().as_f64()
        )));
    }
    let w_r = eig.map(|v| if v > T::zero() { v.sqrt() } else { T::zero() });
    let f_out = hm * &w_c;
    let g = hm * &w_r;
    Ok(Precoders { w_c, w_r, f: f_out, g })
}

/// Zero-forcing DPC: the lower-triangular Cholesky factor of `R_h`.
pub fn zf_dpc_precoder<T: Real>(eff: &EffectiveChannel<T>) -> Result<CMat<T>> {
    let k = eff.users();
    if eff.rank() < k {
        return Err(Error::Singular(format!(
            "ZF-DPC needs non-singular R_h, but rank is {} < {k}",
            eff.rank()
        )));
    }
    let chol = crate::linalg::cholesky(eff.gram())
        .ok_or_else(|| Error::Singular(format!("Cholesky of R_h failed (rank {} of {k})", eff.rank())))?;
    Ok(chol.l())
}

/// Sample blocks of the shared transmit signal `x(n) = W_r s(n) + W_c c(n)`.
#[derive(Debug, Clone)]
pub struct Waveforms<T: Real> {
    /// `M × N` orthogonal radar waveforms.
    pub radar: CMat<T>,
    /// `K × N` unit-power QPSK communication symbols.
    pub comm: CMat<T>,
    /// `M × N` transmitted samples.
    pub transmit: CMat<T>,
    /// `(1/N) Σ x(n) x(n)^H`.
    pub covariance: CMat<T>,
}

/// Synthesizes `N` transmit samples. Radar rows are the complex exponentials
/// `exp(j2π m n / N)`, which are exactly orthogonal for `N ≥ M`, so the only
/// randomness in the empirical covariance comes from the symbols.
pub fn synthesize_waveforms<T: Real>(prec: &Precoders<T>, n: usize, seed: u64) -> Result<Waveforms<T>> {
    let m = prec.antennas();
    let k = prec.users();
    if n < m {
        return Err(Error::InvalidArgument(format!(
            "need at least {m} samples for {m} orthogonal radar waveforms, got {n}"
        )));
    }
    let two_pi = 2.0 * std::f64::consts::PI;
    let radar = CMat::from_fn(m, n, |row, col| {
        let phase = two_pi * (((row * col) % n) as f64) / n as f64;
        cplx(T::lit(phase.cos()), T::lit(phase.sin()))
    });
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = T::lit(std::f64::consts::FRAC_1_SQRT_2);
    let mut comm = CMat::zeros(k, n);
    // column-major fill keeps the stream order independent of K.
    for col in 0..n {
        for row in 0..k {
            let re = if rng.random::<bool>() { a } else { -a };
            let im = if rng.random::<bool>() { a } else { -a };
            comm[(row, col)] = cplx(re, im);
        }
    }
    let transmit = &prec.w_r * &radar + &prec.w_c * &comm;
    let covariance = hermitian_part(&(&transmit * transmit.adjoint())) * real(T::one() / T::lit(n as f64));
    Ok(Waveforms {
        radar,
        comm,
        transmit,
        covariance,
    })
}
