//! Default tolerances and step sizes used by the flow engine and the checkers.

/// `‖d⊥θ‖∞` below which a fiber 1-form counts as closed before a run.
pub const CLOSEDNESS: f64 = 1e-9;
/// `max |Div⊥H|` below which a run is declared converged.
pub const CONVERGENCE: f64 = 1e-10;
/// Integral identities evaluated on the spectral path.
pub const SPECTRAL_IDENTITY: f64 = 1e-8;
/// Spectral against finite-difference evolution.
pub const ORACLE: f64 = 1e-3;
/// Umbilicity of `D` and closedness of `θ_H` along a run.
pub const PRESERVATION: f64 = 1e-10;
/// Scaling law of `b⊥`.
pub const SCALING_LAW: f64 = 1e-8;
/// Energy identity `d/dt ‖θ_H‖² = -2 ‖δ⊥θ_H‖²`.
pub const MONOTONICITY: f64 = 1e-6;
/// Relative error of the volume ODE.
pub const VOLUME_ODE: f64 = 1e-4;
/// Relative error of a fitted decay rate.
pub const DECAY_RATE: f64 = 0.02;
/// Threshold on residuals and lengths when classifying `D` and `D⊥`.
pub const CLASSIFICATION: f64 = 1e-8;
/// Sign tolerance for `r(t) ≤ 0`.
pub const RATE_SIGN: f64 = 1e-12;
/// `ψ` variation along a fiber treated as zero when selecting the solver.
pub const PSI_CONSTANT: f64 = 1e-12;

/// Central-difference step for the energy identity.
pub const MONOTONICITY_STEP: f64 = 1e-4;
/// Sample spacing for the volume ODE.
pub const VOLUME_ODE_STEP: f64 = 1e-3;
/// Forward-difference step for the heat-equation consistency check.
pub const HEAT_CONSISTENCY_STEP: f64 = 1e-6;
