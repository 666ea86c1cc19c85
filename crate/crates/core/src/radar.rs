//! Radar transmit covariance shapes and beampatterns for a uniform linear
//! array with half-wavelength spacing.

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::linalg::{cplx, identity, real, CMat, CVec, HermitianEigen, RVec};
use crate::model::RadarCovariance;
use crate::projections::project_psd_trace;
use crate::{json, Error, Real, Result};

/// `a(θ)_m = exp(jπ m sin θ)`, `m = 0..M−1`, with `θ` in degrees.
pub fn steering_vector<T: Real>(theta_deg: T, m: usize) -> CVec<T> {
    let phase = T::pi() * (theta_deg * T::pi() / T::lit(180.0)).sin();
    CVec::from_iterator(
        m,
        (0..m).map(|i| {
            let x = phase * T::lit(i as f64);
            cplx(x.cos(), x.sin())
        }),
    )
}

/// Radar transmit beam pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PatternKind {
    /// Orthogonal waveforms, `S_o = I/M`.
    Omni,
    /// A single coherent beam at broadside, `S_o = 11^T/M`.
    Phased,
    /// Several beams obtained by beampattern matching.
    Multibeam,
}

impl PatternKind {
    pub const ALL: [PatternKind; 3] = [PatternKind::Omni, PatternKind::Phased, PatternKind::Multibeam];
}

impl fmt::Display for PatternKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PatternKind::Omni => "omni",
            PatternKind::Phased => "phased",
            PatternKind::Multibeam => "multibeam",
        })
    }
}

impl FromStr for PatternKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "omni" => Ok(PatternKind::Omni),
            "phased" => Ok(PatternKind::Phased),
            "multibeam" => Ok(PatternKind::Multibeam),
            other => Err(Error::InvalidArgument(format!("unknown pattern '{other}'"))),
        }
    }
}

/// Beampattern-matching setup for [`PatternKind::Multibeam`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real", default)]
pub struct MultibeamParams<T: Real> {
    /// Beam centres in degrees.
    pub targets_deg: Vec<T>,
    /// Full width of each beam in degrees.
    pub width_deg: T,
    /// Spacing of the matching grid over `[−90, 90]`.
    pub grid_step_deg: T,
    pub max_iter: usize,
    /// Stop when the relative decrease of the mismatch falls below this.
    pub tol: T,
}

impl<T: Real> Default for MultibeamParams<T> {
    fn default() -> Self {
        Self {
            targets_deg: vec![T::lit(-40.0), T::zero(), T::lit(40.0)],
            width_deg: T::lit(10.0),
            grid_step_deg: T::one(),
            max_iter: 20_000,
            tol: T::tol(1e-12),
        }
    }
}

/// A unit-trace covariance shape and, for the matched design, how it was
/// obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct CovarianceDesign<T: Real> {
    pub kind: PatternKind,
    /// `S_o`, unit trace.
    #[serde(with = "json::cmat")]
    pub shape: CMat<T>,
    /// Final `Σ_θ (a^H S a − α·mask)²`; zero for the closed-form shapes.
    pub mismatch: T,
    /// Fitted mask scale `α`.
    pub scale: T,
    pub iterations: usize,
    pub converged: bool,
    /// Mismatch after each iteration.
    pub history: Vec<T>,
}

impl<T: Real> CovarianceDesign<T> {
    /// Number of eigenvalues of `S_o` above 1% of the largest.
    pub fn effective_rank(&self) -> usize {
        HermitianEigen::new(&self.shape).rank(T::lit(0.01))
    }

    /// `R_o = P S_o`.
    pub fn radar(&self, power: T) -> Result<RadarCovariance<T>> {
        RadarCovariance::new(self.shape.clone(), power)
    }
}

/// Uniform angle grid over `[−90, 90]` degrees.
pub fn angle_grid<T: Real>(step_deg: T) -> Result<Vec<T>> {
    if !(step_deg > T::zero() && step_deg <= T::lit(180.0)) {
        return Err(Error::InvalidArgument("grid step must lie in (0, 180] degrees".into()));
    }
    let n = (T::lit(180.0) / step_deg + T::lit(1e-9)).floor().as_f64() as usize;
    Ok((0..=n).map(|i| T::lit(-90.0) + step_deg * T::lit(i as f64)).collect())
}

fn steering_matrix<T: Real>(angles: &[T], m: usize) -> CMat<T> {
    let mut a = CMat::zeros(m, angles.len());
    for (j, &t) in angles.iter().enumerate() {
        a.set_column(j, &steering_vector(t, m));
    }
    a
}

/// `a(θ_j)^H S a(θ_j)` for every column of `a`.
fn pattern_values<T: Real>(s: &CMat<T>, a: &CMat<T>) -> RVec<T> {
    let sa = s * a;
    RVec::from_iterator(a.ncols(), (0..a.ncols()).map(|j| a.column(j).dotc(&sa.column(j)).re))
}

fn match_beams<T: Real>(m: usize, params: &MultibeamParams<T>) -> Result<CovarianceDesign<T>> {
    if params.targets_deg.is_empty() || !(params.width_deg > T::zero()) || params.max_iter == 0 {
        return Err(Error::InvalidArgument(
            "multibeam needs targets, a positive width and iterations".into(),
        ));
    }
    let angles = angle_grid(params.grid_step_deg)?;
    let half = params.width_deg * T::lit(0.5);
    let mask = RVec::from_iterator(
        angles.len(),
        angles.iter().map(|&t| {
            let inside = params.targets_deg.iter().any(|&c| (t - c).abs() <= half + T::lit(1e-9));
            if inside {
                T::one()
            } else {
                T::zero()
            }
        }),
    );
    let mask_energy = mask.norm_squared();
    if !(mask_energy > T::zero()) {
        return Err(Error::InvalidArgument("no grid angle falls inside a beam".into()));
    }
    let a = steering_matrix(&angles, m);
    // |a|⁴ = M² per angle bounds the curvature of the quadratic fit
    let step = T::one() / (T::lit(2.0) * T::lit((angles.len() * m * m) as f64));
    let fit = |s: &CMat<T>| {
        let p = pattern_values(s, &a);
        let alpha = p.dot(&mask) / mask_energy;
        let resid = &p - &mask * alpha;
        let j = resid.norm_squared();
        (resid, alpha, j)
    };
    let mut s = identity::<T>(m) * real(T::one() / T::lit(m as f64));
    let (mut resid, mut alpha, mut value) = fit(&s);
    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < params.max_iter {
        iterations += 1;
        let mut grad = CMat::zeros(m, m);
        for j in 0..angles.len() {
            let col = a.column(j);
            grad += col * col.adjoint() * real(T::lit(2.0) * resid[j]);
        }
        s = project_psd_trace(&(&s - grad * real(step)));
        let (r1, a1, v1) = fit(&s);
        let drop = value - v1;
        resid = r1;
        alpha = a1;
        value = v1;
        history.push(value);
        if drop <= params.tol * value.max(T::default_epsilon()) {
            converged = true;
            break;
        }
    }
    Ok(CovarianceDesign {
        kind: PatternKind::Multibeam,
        shape: s,
        mismatch: value,
        scale: alpha,
        iterations,
        converged,
        history,
    })
}

/// Unit-trace covariance shape `S_o` of the requested pattern on `m`
/// antennas. `params` is only used by the multibeam design.
pub fn make_covariance<T: Real>(
    kind: PatternKind,
    m: usize,
    params: &MultibeamParams<T>,
) -> Result<CovarianceDesign<T>> {
    if m == 0 {
        return Err(Error::Dimension("at least one antenna is required".into()));
    }
    let inv_m = T::one() / T::lit(m as f64);
    let closed = |shape: CMat<T>| CovarianceDesign {
        kind,
        shape,
        mismatch: T::zero(),
        scale: T::one(),
        iterations: 0,
        converged: true,
        history: Vec::new(),
    };
    match kind {
        PatternKind::Omni => Ok(closed(identity::<T>(m) * real(inv_m))),
        PatternKind::Phased => Ok(closed(CMat::from_element(m, m, real(inv_m)))),
        PatternKind::Multibeam => match_beams(m, params),
    }
}

/// Transmit beampattern `a(θ)^H R a(θ)` on a grid of angles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct BeamGrid<T: Real> {
    /// Degrees, strictly increasing within `[−90, 90]`.
    pub angles: Vec<T>,
    pub values: Vec<T>,
}

impl<T: Real> BeamGrid<T> {
    /// Writes `angle_deg,value_db`; zero gain is clamped to −300 dB.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "angle_deg,value_db")?;
        for (&t, &v) in self.angles.iter().zip(&self.values) {
            let db = T::lit(10.0) * v.max(T::lit(1e-30)).log10();
            writeln!(out, "{},{}", t, db)?;
        }
        Ok(())
    }
}

/// Evaluates the beampattern of covariance `r` at `angles`.
pub fn beampattern<T: Real>(r: &CMat<T>, angles: &[T]) -> Result<BeamGrid<T>> {
    if !r.is_square() {
        return Err(Error::Dimension("covariance must be square".into()));
    }
    let ok = angles.iter().all(|&t| t.abs() <= T::lit(90.0)) && angles.windows(2).all(|w| w[0] < w[1]);
    if !ok {
        return Err(Error::InvalidArgument(
            "angles must increase strictly within [-90, 90]".into(),
        ));
    }
    let a = steering_matrix(angles, r.nrows());
    Ok(BeamGrid {
        angles: angles.to_vec(),
        values: pattern_values(r, &a).iter().copied().collect(),
    })
}
