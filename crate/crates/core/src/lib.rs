//! Downlink multiuser precoding for a MIMO transmitter that must keep a fixed
//! radar transmit covariance.
//!
//! The transmitted waveform `x(n) = W_r s(n) + W_c c(n)` is constrained so
//! that `W_r W_r^H + W_c W_c^H = R_o`. Under that constraint the crate solves
//!
//! * SINR balancing for linear transmit beamforming ([`tbf`]),
//! * SINR balancing for dirty-paper coding ([`dpc_balancing`]),
//! * DPC sum-rate maximization through the dual uplink channel
//!   ([`dpc_sumrate`]),
//!
//! all expressed in terms of the effective precoder `F = H W_c`, which is
//! feasible exactly when `F F^H ⪯ H R_o H^H`.
//!
//! Numerical code is generic over the real scalar type (see [`Real`]); the
//! `*64` aliases at the crate root fix it to `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dpc_balancing;
mod dpc_conic;
pub mod dpc_sumrate;
mod error;
pub mod json;
pub mod linalg;
pub mod model;
pub mod projections;
pub mod radar;
mod scalar;
pub mod tbf;

pub use error::{Error, Result};
pub use scalar::Real;

pub use dpc_balancing::{
    fixed_point_inner, gamma_gradient, min_power_bisection, solve_dpc_balancing, DpcDualState, DpcOptions,
    InnerSolution, PowerSolution,
};
pub use dpc_sumrate::{
    mac_mmse_sinr_and_rate, recover_sumrate_precoder, solve_saddle_extragradient, solve_sato_barrier,
    verify_kkt_theorem1, BarrierOptions, KktReport, MacRates, SaddleOptions, SaddlePoint, SatoSolution,
    SumRatePrecoder,
};
pub use model::{
    compute_sinr, recover_precoders, synthesize_waveforms, zf_dpc_precoder, ChannelMatrix, EffectiveChannel, Precoders,
    RadarCovariance, SinrMode, Waveforms,
};
pub use projections::{project_psd_trace, project_weighted_simplex, TraceSimplexCone, WeightedSimplex};
pub use radar::{
    angle_grid, beampattern, make_covariance, steering_vector, BeamGrid, CovarianceDesign, MultibeamParams, PatternKind,
};
pub use tbf::{dual_objective_and_gradient, solve_tbf_balancing, BalancingResult, TbfDualState, TbfOptions};

/// Complex scalar used throughout.
pub type C<T> = nalgebra::Complex<T>;

pub type ChannelMatrix64 = ChannelMatrix<f64>;
pub type RadarCovariance64 = RadarCovariance<f64>;
pub type EffectiveChannel64 = EffectiveChannel<f64>;
pub type Precoders64 = Precoders<f64>;
pub type TbfResult64 = BalancingResult<f64, TbfDualState<f64>>;
pub type DpcResult64 = BalancingResult<f64, DpcDualState<f64>>;
pub type SaddlePoint64 = SaddlePoint<f64>;
pub type SatoSolution64 = SatoSolution<f64>;
pub type CovarianceDesign64 = CovarianceDesign<f64>;
