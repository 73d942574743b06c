//! Extrinsic geometric flow on foliated flat products.
//!
//! A metric `g = e^{2φ} g₁ ⊕ e^{2ψ} g₂` on a base torus `M₁` (dimension `n`) times a
//! fiber torus `M₂` (dimension `p`) is evolved by
//! `∂_t g = -(2/n)(Div⊥H) ĝ`, where `ĝ` is the part of `g` along `D = TM₁` and `H`
//! the mean curvature of the leaves `M₁ × {y}`. Only `φ` changes; the driving
//! scalar solves the heat equation on each fiber, which is solved exactly in
//! Fourier space when `ψ` is constant on fibers and by finite differences
//! otherwise.
//!
//! Everything is generic over the scalar type (`f32` or `f64`); the aliases at the
//! crate root fix it to `f64`.
//!
//! ```
//! use egf_core::{run_egf, FlowConfig, FlowVariant, FourierSeries, product_grid, twisted_state};
//! use std::f64::consts::TAU;
//!
//! let grid = product_grid(&[TAU], &[8], &[TAU], &[64]).unwrap();
//! let phi0 = FourierSeries::constant(0.0).with_term(vec![0, 1], 0.2, 0.0);
//! let state = twisted_state(&grid, &phi0).unwrap();
//! let config = FlowConfig::new(FlowVariant::Plain, 1, 1, 1.0, vec![0.0, 1.0]).unwrap();
//! let traj = run_egf(state, config).unwrap();
//! let decay = traj.diagnostics[1].max_div_h;
//! assert!((decay - 0.2 * (-1.0f64).exp()).abs() < 1e-12);
//! ```

pub mod error;
pub mod fd;
pub mod flow;
pub mod geometry;
pub mod grid;
pub mod invariants;
pub mod scalar;
pub mod scenario;
pub mod spectral;
pub mod tolerances;

pub use error::{EgfError, Result};
pub use fd::{fd_heat_run, fd_laplacian_conformal, fd_mean_curvature_from_metric, FdScheme};
pub use flow::{
    normalization_rate, normalization_rate_from_h2, project_unit_volume, reconstruct_metric,
    run_codim1, run_egf, run_normalized, run_prescribed, Diagnostics, EgfFlow, FlowConfig,
    FlowMethod, FlowVariant, Trajectory,
};
pub use geometry::{
    classify, div_perp, grad_perp, laplacian_perp, second_fundamental_data,
    twisted_mean_curvature, volume, Classification, ExtrinsicFlags, FiberVectorField,
    ProductField, ProductGrid, ProductState, VectorField,
};
pub use grid::{FiberGrid, PeriodicGrid};
pub use invariants::{run_named_check, CheckReport, CHECK_NAMES};
pub use scalar::Real;
pub use scenario::{
    double_twisted_state, fiber_vector_field, product_grid, twisted_state, FourierSeries,
    FourierTerm,
};
pub use spectral::{
    heat_evolve, heat_kernel_eval, heat_time_integral, OneFormField, ScalarField,
    SpectralField,
};

pub type Grid64 = PeriodicGrid<f64>;
pub type ProductGrid64 = ProductGrid<f64>;
pub type Field64 = ProductField<f64>;
pub type ScalarField64 = ScalarField<f64>;
pub type SpectralField64 = SpectralField<f64>;
pub type VectorField64 = VectorField<f64>;
pub type State64 = ProductState<f64>;
pub type FlowConfig64 = FlowConfig<f64>;
pub type Flow64 = EgfFlow<f64>;
pub type Trajectory64 = Trajectory<f64>;
pub type FourierSeries64 = FourierSeries<f64>;
pub type CheckReport64 = CheckReport<f64>;
pub type FdScheme64 = FdScheme<f64>;

pub type State32 = ProductState<f32>;
pub type Trajectory32 = Trajectory<f32>;
