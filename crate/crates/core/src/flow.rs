//! The extrinsic geometric flow `∂_t g = -(2/n)(Div⊥H) ĝ` and its normalized and
//! prescribed variants on twisted and double-twisted products.
//!
//! Along the flow only `φ` moves: `∂_t φ = -(1/n) u` with `u` the driving scalar
//! (`Div⊥H`, or `Div⊥(H - X)`), and `u` solves the leaf heat equation. When `ψ` is
//! constant on each fiber the leaf Laplacian is `κ = e^{-2ψ}` times the flat one,
//! so `u(t)` is an exact Fourier multiplier and
//! `φ(t) = φ₀ - (1/(nκ)) ∫₀^{κt} e^{sΔ}u₀ ds`.
//! Otherwise `φ` itself is marched with the finite-difference scheme.

use gauss_quad::legendre::GaussLegendre;
use rayon::prelude::*;
use std::num::NonZeroUsize;

use crate::error::{input, EgfError, Result};
use crate::fd::{fd_march_phi, FdScheme};
use crate::geometry::{
    classify_data, div_perp, dtheta_sup, inner_perp, integrate, second_fundamental_data,
    twisted_mean_curvature, volume, Classification, FiberVectorField,
    ProductField, ProductState,
};
use crate::scalar::{from_usize, lit, to_f64, Real};
use crate::spectral::{
    heat_evolve, heat_time_integral, heat_time_integral_limit, ScalarField, SpectralField,
};
use crate::tolerances;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FlowVariant {
    Plain,
    /// Volume-preserving: `∂_t g = -(2/n)(Div⊥H) ĝ - r(t) ĝ`.
    Normalized,
    /// Prescribed mean curvature `X`: `∂_t g = -(2/n) Div⊥(H - X) ĝ`.
    Prescribed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FlowMethod {
    /// Exact Fourier evolution per fiber.
    Spectral,
    /// θ-scheme time stepping, used when `ψ` varies along a fiber.
    FiniteDifference,
}

#[derive(Clone, Debug)]
pub struct FlowConfig<T> {
    pub variant: FlowVariant,
    pub n: usize,
    pub p: usize,
    /// Present iff `variant` is [`FlowVariant::Prescribed`].
    pub x_field: Option<FiberVectorField<T>>,
    pub t_end: T,
    /// Sorted sample times in `[0, t_end]`.
    pub samples: Vec<T>,
    pub tol_converge: T,
    /// Compare the spectral result with the finite-difference oracle at `t_end`.
    pub oracle_check: bool,
    pub fd_scheme: FdScheme<T>,
}

impl<T: Real> FlowConfig<T> {
    pub fn new(variant: FlowVariant, n: usize, p: usize, t_end: T, samples: Vec<T>) -> Result<Self> {
        let cfg = Self {
            variant,
            n,
            p,
            x_field: None,
            t_end,
            samples,
            tol_converge: lit(tolerances::CONVERGENCE),
            oracle_check: false,
            fd_scheme: FdScheme::default(),
        };
        if variant != FlowVariant::Prescribed {
            cfg.validate()?;
        }
        Ok(cfg)
    }

    /// `count` equally spaced times from `0` to `t_end` inclusive.
    pub fn uniform_samples(t_end: T, count: usize) -> Vec<T> {
        if count < 2 {
            return vec![t_end];
        }
        let last = from_usize::<T>(count - 1);
        (0..count)
            .map(|i| {
                if i + 1 == count {
                    t_end
                } else {
                    t_end * from_usize::<T>(i) / last
                }
            })
            .collect()
    }

    pub fn with_x_field(mut self, x: FiberVectorField<T>) -> Self {
        self.x_field = Some(x);
        self
    }

    pub fn with_variant(mut self, variant: FlowVariant) -> Self {
        self.variant = variant;
        self
    }

    pub fn with_fd_scheme(mut self, scheme: FdScheme<T>) -> Self {
        self.fd_scheme = scheme;
        self
    }

    pub fn with_oracle_check(mut self, on: bool) -> Self {
        self.oracle_check = on;
        self
    }

    pub fn with_tol_converge(mut self, tol: T) -> Self {
        self.tol_converge = tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.n) || !(1..=2).contains(&self.p) {
            return Err(input(format!(
                "n and p must be 1 or 2, got n = {}, p = {}",
                self.n, self.p
            )));
        }
        if !(self.t_end.is_finite() && self.t_end > T::zero()) {
            return Err(input(format!("end time must be positive, got {}", self.t_end)));
        }
        if self.samples.is_empty() {
            return Err(input("at least one sample time is required"));
        }
        for w in self.samples.windows(2) {
            if !(w[0] < w[1]) {
                return Err(input("sample times must be strictly increasing"));
            }
        }
        for &s in &self.samples {
            if !(s >= T::zero() && s <= self.t_end) {
                return Err(input(format!("sample time {s} outside [0, {}]", self.t_end)));
            }
        }
        if !(self.tol_converge.is_finite() && self.tol_converge > T::zero()) {
            return Err(input("convergence tolerance must be positive"));
        }
        match (self.variant, &self.x_field) {
            (FlowVariant::Prescribed, None) => {
                Err(input("the prescribed flow needs a vector field X"))
            }
            (FlowVariant::Prescribed, Some(x)) if x.dims() != self.p => {
                Err(EgfError::DimensionMismatch {
                    expected: self.p,
                    got: x.dims(),
                })
            }
            (FlowVariant::Plain | FlowVariant::Normalized, Some(_)) => {
                Err(input("X is only allowed for the prescribed flow"))
            }
            _ => Ok(()),
        }
    }
}

/// Per-sample diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct Diagnostics<T> {
    pub t: T,
    pub volume: T,
    /// `∫ g(H, H) dvol`.
    pub int_h2: T,
    /// `max |Div⊥H|`.
    pub max_div_h: T,
    /// `max |u|` of the driving scalar, `Div⊥(H - X)` for the prescribed flow.
    pub max_driving: T,
    pub r: T,
    /// `sup |b - (1/n) H ĝ|`.
    pub umbilical_residual: T,
    /// `‖d⊥θ_H‖∞`.
    pub dtheta_h: T,
    pub classification: Classification<T>,
}

#[derive(Clone, Debug)]
pub struct Trajectory<T> {
    pub variant: FlowVariant,
    pub method: FlowMethod,
    pub initial: ProductState<T>,
    pub states: Vec<ProductState<T>>,
    pub diagnostics: Vec<Diagnostics<T>>,
    /// `t → ∞` state; its time stamp is the largest finite value.
    pub limit: ProductState<T>,
    /// First sample with `max |u| < tol_converge`.
    pub converged_at: Option<T>,
    /// `c` with `c⁻¹ ĝ₀ ≤ ĝ_t ≤ c ĝ₀` for all `t`, when it is known in closed form.
    pub equivalence_constant: Option<T>,
    pub x_field: Option<FiberVectorField<T>>,
    /// `τ₁` at every sample for codimension-one runs.
    pub tau1: Option<Vec<ProductField<T>>>,
    /// `∫₀ᵗ s dτ` at every sample, where `∂_t ĝ = s ĝ`.
    pub log_scale_change: Vec<ProductField<T>>,
    /// `sup |φ_spectral - φ_fd|` at `t_end` when the oracle check ran.
    pub oracle_gap: Option<T>,
}

impl<T: Real> Trajectory<T> {
    pub fn sample_times(&self) -> Vec<T> {
        self.states.iter().map(|s| s.t()).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Source {
    /// Fiber data is `u₀` itself.
    Divergence,
    /// Fiber data is `τ₁⁰` and `u = ∂_y τ₁`.
    Codim1,
}

/// A flow set up from its initial state, evaluable at any time.
#[derive(Clone, Debug)]
pub struct EgfFlow<T: Real> {
    initial: ProductState<T>,
    config: FlowConfig<T>,
    method: FlowMethod,
    source: Source,
    spectra: Vec<SpectralField<T>>,
    kappa: Vec<T>,
    is_static: bool,
    vol0: T,
    quadrature: Vec<(T, T)>,
}

const QUADRATURE_NODES: usize = 16;
const QUADRATURE_PANEL: f64 = 0.25;

fn quadrature_rule<T: Real>() -> Vec<(T, T)> {
    GaussLegendre::new(NonZeroUsize::new(QUADRATURE_NODES).expect("nonzero"))
        .as_node_weight_pairs()
        .iter()
        .map(|&(x, w)| (lit(x), lit(w)))
        .collect()
}

fn check_grids<T: Real>(state: &ProductState<T>, config: &FlowConfig<T>) -> Result<()> {
    if state.n() != config.n || state.p() != config.p {
        return Err(input(format!(
            "config dimensions (n = {}, p = {}) do not match the state (n = {}, p = {})",
            config.n,
            config.p,
            state.n(),
            state.p()
        )));
    }
    if let Some(x) = &config.x_field {
        if x.components.iter().any(|c| c.grid() != state.grid()) {
            return Err(input("X lives on a different grid than the state"));
        }
    }
    Ok(())
}

fn static_threshold<T: Real>() -> T {
    T::epsilon() * lit(64.0)
}

impl<T: Real> EgfFlow<T> {
    pub fn new(initial: ProductState<T>, config: FlowConfig<T>) -> Result<Self> {
        config.validate()?;
        check_grids(&initial, &config)?;
        let h0 = twisted_mean_curvature(&initial);
        let closed_tol = lit::<T>(tolerances::CLOSEDNESS);
        let driving_field = match (&config.variant, &config.x_field) {
            (FlowVariant::Prescribed, Some(x)) => h0.sub(x),
            _ => h0,
        };
        if config.p > 1 {
            let residual = dtheta_sup(&driving_field, &initial);
            if !(residual <= closed_tol) {
                let what = if config.variant == FlowVariant::Prescribed {
                    "d⊥θ_(H₀-X) = 0"
                } else {
                    "d⊥θ_(H₀) = 0"
                };
                return Err(EgfError::HypothesisViolation {
                    what: what.into(),
                    residual: to_f64(residual),
                    tolerance: tolerances::CLOSEDNESS,
                });
            }
        }
        let psi_tol = lit::<T>(tolerances::PSI_CONSTANT) * (T::one() + initial.psi().sup_norm());
        let method = if initial.psi_constant_along_fibers(psi_tol) {
            FlowMethod::Spectral
        } else {
            FlowMethod::FiniteDifference
        };
        if method == FlowMethod::FiniteDifference && config.variant == FlowVariant::Prescribed {
            return Err(EgfError::UnsupportedScenario(
                "the prescribed flow needs ψ constant along every fiber".into(),
            ));
        }
        let u0 = div_perp(&driving_field, &initial);
        let is_static = u0.sup_norm() <= static_threshold();
        let (spectra, kappa) = if method == FlowMethod::Spectral {
            spectral_data(&u0, &initial)
        } else {
            (Vec::new(), Vec::new())
        };
        let vol0 = volume(&initial);
        Ok(Self {
            initial,
            config,
            method,
            source: Source::Divergence,
            spectra,
            kappa,
            is_static,
            vol0,
            quadrature: quadrature_rule(),
        })
    }

    /// Codimension-one flow driven by the leaf mean curvature `τ₁` of
    /// `M₁ × {y}` along `N = ∂_y` on a flat fibration (`p = 1`, `ψ = 0`).
    ///
    /// The metric is `e^{2φ₀} g₁ ⊕ dy²` with `-n ∂_y φ₀ = τ₁⁰`, so `τ₁⁰` must
    /// have zero mean on every fiber.
    pub fn codim1(tau1: &ProductField<T>, config: FlowConfig<T>) -> Result<Self> {
        config.validate()?;
        if config.p != 1 || tau1.grid().p() != 1 {
            return Err(EgfError::UnsupportedScenario(
                "the codimension-one flow needs one-dimensional fibers".into(),
            ));
        }
        if config.variant == FlowVariant::Prescribed {
            return Err(EgfError::UnsupportedScenario(
                "the codimension-one flow has no prescribed variant".into(),
            ));
        }
        let grid = tau1.grid().clone();
        let tol = lit::<T>(1e-12) * (T::one() + tau1.sup_norm());
        if tau1.fiber_means().iter().any(|m| m.abs() > tol) {
            return Err(EgfError::UnsupportedScenario(
                "τ₁ must have zero mean on every fiber to come from a twisted metric".into(),
            ));
        }
        let n = from_usize::<T>(config.n);
        let spectra: Vec<SpectralField<T>> = (0..grid.base_len())
            .into_par_iter()
            .map(|b| tau1.fiber(b).to_spectral())
            .collect();
        let fibers = spectra
            .iter()
            .map(|s| s.antiderivative(0).to_nodal().scale(-T::one() / n))
            .collect();
        let phi0 = ProductField::from_fibers(grid.clone(), fibers)?;
        let initial = ProductState::new(phi0, ProductField::zeros(grid.clone()), T::zero())?;
        check_grids(&initial, &config)?;
        let is_static = tau1.sup_norm() <= static_threshold();
        let vol0 = volume(&initial);
        Ok(Self {
            initial,
            config,
            method: FlowMethod::Spectral,
            source: Source::Codim1,
            kappa: vec![T::one(); grid.base_len()],
            spectra,
            is_static,
            vol0,
            quadrature: quadrature_rule(),
        })
    }

    pub fn initial(&self) -> &ProductState<T> {
        &self.initial
    }

    pub fn config(&self) -> &FlowConfig<T> {
        &self.config
    }

    pub fn method(&self) -> FlowMethod {
        self.method
    }

    pub fn is_static(&self) -> bool {
        self.is_static
    }

    fn apply_source_op(&self, f: SpectralField<T>) -> SpectralField<T> {
        match self.source {
            Source::Divergence => f,
            Source::Codim1 => f.derivative(0),
        }
    }

    fn check_time(t: T) -> Result<()> {
        if !(t.is_finite() && t >= T::zero()) {
            return Err(input(format!("time must be finite and nonnegative, got {t}")));
        }
        Ok(())
    }

    /// `φ(t) - φ₀` of the unnormalized flow on the spectral path.
    fn spectral_increment(&self, t: T) -> Result<ProductField<T>> {
        let n = from_usize::<T>(self.config.n);
        let fibers = (0..self.spectra.len())
            .into_par_iter()
            .map(|b| {
                let k = self.kappa[b];
                let hti = heat_time_integral(&self.spectra[b], k * t)?;
                Ok(self.apply_source_op(hti).to_nodal().scale(-T::one() / (n * k)))
            })
            .collect::<Result<Vec<ScalarField<T>>>>()?;
        ProductField::from_fibers(self.initial.grid().clone(), fibers)
    }

    /// State of the unnormalized flow at `t`.
    pub fn plain_state_at(&self, t: T) -> Result<ProductState<T>> {
        Self::check_time(t)?;
        if self.is_static || t == T::zero() {
            return self.initial.with_phi(self.initial.phi().clone(), t);
        }
        match self.method {
            FlowMethod::Spectral => {
                let inc = self.spectral_increment(t)?;
                self.initial.with_phi(self.initial.phi().add(&inc), t)
            }
            FlowMethod::FiniteDifference => {
                let phi = fd_march_phi(
                    self.initial.phi(),
                    self.initial.psi(),
                    t,
                    &self.config.fd_scheme,
                )?;
                self.initial.with_phi(phi, t)
            }
        }
    }

    /// `r` of the unnormalized flow at time `t`.
    fn plain_rate(&self, t: T) -> Result<T> {
        Ok(normalization_rate(&self.plain_state_at(t)?))
    }

    /// `∫_a^b r(s) ds` by composite Gauss–Legendre quadrature.
    fn rate_integral(&self, a: T, b: T) -> Result<T> {
        if b <= a || self.is_static {
            return Ok(T::zero());
        }
        let panels = ((b - a) / lit(QUADRATURE_PANEL))
            .ceil()
            .to_usize()
            .unwrap_or(1)
            .max(1);
        let width = (b - a) / from_usize(panels);
        let half = width * lit(0.5);
        let mut total = T::zero();
        for i in 0..panels {
            let mid = a + width * from_usize(i) + half;
            let mut acc = T::zero();
            for &(x, w) in &self.quadrature {
                acc += w * self.plain_rate(mid + half * x)?;
            }
            total += acc * half;
        }
        Ok(total)
    }

    /// `R(t) = ∫₀ᵗ r(s) ds`, so that the normalized flow is `φ̃ = φ - R/2`.
    pub fn normalization_integral(&self, t: T) -> Result<T> {
        Self::check_time(t)?;
        match self.method {
            FlowMethod::Spectral => self.rate_integral(T::zero(), t),
            FlowMethod::FiniteDifference => {
                let vol = volume(&self.plain_state_at(t)?);
                Ok(lit::<T>(2.0) / from_usize(self.config.n) * (vol / self.vol0).ln())
            }
        }
    }

    fn normalize(&self, plain: ProductState<T>, big_r: T) -> Result<ProductState<T>> {
        let half = big_r * lit(0.5);
        let t = plain.t();
        self.initial.with_phi(plain.phi().map(|v| v - half), t)
    }

    /// State of the configured variant at `t`.
    pub fn state_at(&self, t: T) -> Result<ProductState<T>> {
        let plain = self.plain_state_at(t)?;
        if self.config.variant == FlowVariant::Normalized {
            let big_r = self.normalization_integral(t)?;
            self.normalize(plain, big_r)
        } else {
            Ok(plain)
        }
    }

    /// Driving scalar `u(t)`: `Div⊥H`, `Div⊥(H - X)`, or `∂_y τ₁`.
    pub fn driving_at(&self, t: T) -> Result<ProductField<T>> {
        Self::check_time(t)?;
        match self.method {
            FlowMethod::Spectral => {
                let fibers = (0..self.spectra.len())
                    .into_par_iter()
                    .map(|b| {
                        let u = heat_evolve(&self.spectra[b], self.kappa[b] * t)?;
                        Ok(self.apply_source_op(u).to_nodal())
                    })
                    .collect::<Result<Vec<ScalarField<T>>>>()?;
                ProductField::from_fibers(self.initial.grid().clone(), fibers)
            }
            FlowMethod::FiniteDifference => {
                let s = self.plain_state_at(t)?;
                Ok(div_perp(&twisted_mean_curvature(&s), &s))
            }
        }
    }

    /// `τ₁(t)` of a codimension-one flow.
    pub fn tau1_at(&self, t: T) -> Result<Option<ProductField<T>>> {
        Self::check_time(t)?;
        if self.source != Source::Codim1 {
            return Ok(None);
        }
        let fibers = (0..self.spectra.len())
            .into_par_iter()
            .map(|b| Ok(heat_evolve(&self.spectra[b], t)?.to_nodal()))
            .collect::<Result<Vec<ScalarField<T>>>>()?;
        Ok(Some(ProductField::from_fibers(
            self.initial.grid().clone(),
            fibers,
        )?))
    }

    /// `∫₀ᵗ s dτ` for the configured variant.
    fn log_scale_change(&self, state: &ProductState<T>) -> ProductField<T> {
        state
            .phi()
            .sub(self.initial.phi())
            .scale(lit(2.0))
    }

    /// Closed-form `t → ∞` state.
    pub fn limit_state(&self) -> Result<ProductState<T>> {
        let n = from_usize::<T>(self.config.n);
        let grid = self.initial.grid().clone();
        let phi_inf = if self.is_static {
            self.initial.phi().clone()
        } else {
            match self.method {
                FlowMethod::Spectral => {
                    let fibers = (0..self.spectra.len())
                        .into_par_iter()
                        .map(|b| {
                            let k = self.kappa[b];
                            let lim = heat_time_integral_limit(&self.spectra[b]);
                            self.apply_source_op(lim)
                                .to_nodal()
                                .scale(-T::one() / (n * k))
                        })
                        .collect();
                    self.initial
                        .phi()
                        .add(&ProductField::from_fibers(grid.clone(), fibers)?)
                }
                FlowMethod::FiniteDifference => {
                    let means = weighted_fiber_means(self.initial.phi(), &self.initial);
                    let m = grid.fiber_len();
                    ProductField::new(
                        grid.clone(),
                        (0..grid.len()).map(|i| means[i / m]).collect(),
                    )?
                }
            }
        };
        let plain = ProductState::new(phi_inf, self.initial.psi().clone(), T::max_value())?;
        if self.config.variant == FlowVariant::Normalized {
            let big_r = lit::<T>(2.0) / n * (volume(&plain) / self.vol0).ln();
            self.normalize(plain, big_r)
        } else {
            Ok(plain)
        }
    }

    /// `c = exp((2/(nκ)) Σ_{l≠0} |û_l| / λ₁)`, maximized over fibers.
    ///
    /// Bounds `|(2/n) ∫₀ᵗ u ds|` uniformly in `t`, hence `ĝ_t / ĝ₀`, for the
    /// unnormalized and prescribed flows.
    pub fn equivalence_constant(&self) -> Option<T> {
        if self.is_static {
            return Some(T::one());
        }
        if self.method != FlowMethod::Spectral {
            return None;
        }
        let n = from_usize::<T>(self.config.n);
        let gap = self.initial.grid().fiber().spectral_gap();
        let worst = self
            .spectra
            .iter()
            .zip(&self.kappa)
            .map(|(s, &k)| {
                let l1 = self.apply_source_op(s.clone()).nonzero_mode_l1();
                lit::<T>(2.0) / (n * k) * l1 / gap
            })
            .fold(T::zero(), T::max);
        Some(worst.exp())
    }

    fn diagnostics(&self, state: &ProductState<T>, driving: &ProductField<T>) -> Diagnostics<T> {
        let h = twisted_mean_curvature(state);
        let data = second_fundamental_data(state);
        let classification = classify_data(state, &data, lit(tolerances::CLASSIFICATION));
        Diagnostics {
            t: state.t(),
            volume: volume(state),
            int_h2: integrate(&inner_perp(&h, &h, state), state),
            max_div_h: div_perp(&h, state).sup_norm(),
            max_driving: driving.sup_norm(),
            r: normalization_rate(state),
            umbilical_residual: data.umbilical_residual,
            dtheta_h: dtheta_sup(&h, state),
            classification,
        }
    }

    fn oracle_gap(&self, spectral_end: &ProductState<T>) -> Result<Option<T>> {
        if !self.config.oracle_check
            || self.method != FlowMethod::Spectral
            || self.config.variant != FlowVariant::Plain
            || self.source != Source::Divergence
        {
            return Ok(None);
        }
        let fd = fd_march_phi(
            self.initial.phi(),
            self.initial.psi(),
            spectral_end.t(),
            &self.config.fd_scheme,
        )?;
        Ok(Some(spectral_end.phi().sub(&fd).sup_norm()))
    }

    pub fn run(&self) -> Result<Trajectory<T>> {
        let samples = self.config.samples.clone();
        let mut states = Vec::with_capacity(samples.len());
        let mut diagnostics = Vec::with_capacity(samples.len());
        let mut log_scale = Vec::with_capacity(samples.len());
        let mut tau1 = (self.source == Source::Codim1).then(Vec::new);
        let mut big_r = T::zero();
        let mut prev_t = T::zero();
        let mut prev_fd: Option<ProductState<T>> = None;

        for &t in &samples {
            let plain = match (self.method, self.is_static, &prev_fd) {
                (FlowMethod::FiniteDifference, false, Some(prev)) => {
                    let phi = fd_march_phi(
                        prev.phi(),
                        self.initial.psi(),
                        t - prev.t(),
                        &self.config.fd_scheme,
                    )?;
                    self.initial.with_phi(phi, t)?
                }
                _ => self.plain_state_at(t)?,
            };
            if self.method == FlowMethod::FiniteDifference {
                prev_fd = Some(plain.clone());
            }
            let state = if self.config.variant == FlowVariant::Normalized {
                big_r = match self.method {
                    FlowMethod::Spectral => big_r + self.rate_integral(prev_t, t)?,
                    FlowMethod::FiniteDifference => {
                        lit::<T>(2.0) / from_usize(self.config.n)
                            * (volume(&plain) / self.vol0).ln()
                    }
                };
                self.normalize(plain, big_r)?
            } else {
                plain
            };
            prev_t = t;
            let driving = match self.method {
                FlowMethod::Spectral => self.driving_at(t)?,
                FlowMethod::FiniteDifference => {
                    div_perp(&twisted_mean_curvature(&state), &state)
                }
            };
            if let Some(v) = tau1.as_mut() {
                v.push(self.tau1_at(t)?.expect("codimension-one source"));
            }
            diagnostics.push(self.diagnostics(&state, &driving));
            log_scale.push(self.log_scale_change(&state));
            states.push(state);
        }

        let converged_at = diagnostics
            .iter()
            .find(|d| d.max_driving < self.config.tol_converge)
            .map(|d| d.t);
        let oracle_gap = match states.last() {
            Some(last) => self.oracle_gap(last)?,
            None => None,
        };
        Ok(Trajectory {
            variant: self.config.variant,
            method: self.method,
            initial: self.initial.clone(),
            states,
            diagnostics,
            limit: self.limit_state()?,
            converged_at,
            equivalence_constant: match self.config.variant {
                FlowVariant::Normalized => None,
                _ => self.equivalence_constant(),
            },
            x_field: self.config.x_field.clone(),
            tau1,
            log_scale_change: log_scale,
            oracle_gap,
        })
    }
}

/// Fiber data `(û₀, κ)` for the spectral path.
fn spectral_data<T: Real>(
    u0: &ProductField<T>,
    state: &ProductState<T>,
) -> (Vec<SpectralField<T>>, Vec<T>) {
    let m = state.grid().fiber_len();
    let base = state.grid().base_len();
    let spectra = (0..base)
        .into_par_iter()
        .map(|b| u0.fiber(b).to_spectral())
        .collect();
    let kappa = (0..base)
        .map(|b| {
            let psi = state.psi().values()[b * m];
            (-(psi + psi)).exp()
        })
        .collect();
    (spectra, kappa)
}

/// `∫ f e^{pψ} dy / ∫ e^{pψ} dy` on every fiber.
pub fn weighted_fiber_means<T: Real>(f: &ProductField<T>, state: &ProductState<T>) -> Vec<T> {
    let p = from_usize::<T>(state.p());
    let m = state.grid().fiber_len();
    (0..state.grid().base_len())
        .map(|b| {
            let (num, den) = f.values()[b * m..(b + 1) * m]
                .iter()
                .zip(&state.psi().values()[b * m..(b + 1) * m])
                .fold((T::zero(), T::zero()), |(a, c), (&v, &s)| {
                    let w = (p * s).exp();
                    (a + v * w, c + w)
                });
            num / den
        })
        .collect()
}

/// `r = -(2/n) ∫ Div⊥H dvol / vol`.
pub fn normalization_rate<T: Real>(state: &ProductState<T>) -> T {
    let n = from_usize::<T>(state.n());
    let div = div_perp(&twisted_mean_curvature(state), state);
    -lit::<T>(2.0) / n * integrate(&div, state) / volume(state)
}

/// `r = -(2/n) ∫ g(H, H) dvol / vol`, equal to [`normalization_rate`] by the
/// divergence identity.
pub fn normalization_rate_from_h2<T: Real>(state: &ProductState<T>) -> T {
    let n = from_usize::<T>(state.n());
    let h = twisted_mean_curvature(state);
    -lit::<T>(2.0) / n * integrate(&inner_perp(&h, &h, state), state) / volume(state)
}

/// Rescales `ĝ` by the constant making `vol(M, g) = 1`.
pub fn project_unit_volume<T: Real>(state: &ProductState<T>) -> Result<ProductState<T>> {
    let shift = volume(state).ln() / from_usize(state.n());
    state.with_phi(state.phi().map(|v| v - shift), state.t())
}

/// `φ(t) = φ₀ - (1/n) ∫₀ᵗ u ds` with `u` the heat flow of `div_h0` on each leaf.
pub fn reconstruct_metric<T: Real>(
    initial: &ProductState<T>,
    div_h0: &ProductField<T>,
    t: T,
) -> Result<ProductState<T>> {
    if div_h0.grid() != initial.grid() {
        return Err(input("Div⊥H₀ lives on a different grid than the state"));
    }
    let psi_tol = lit::<T>(tolerances::PSI_CONSTANT) * (T::one() + initial.psi().sup_norm());
    if !initial.psi_constant_along_fibers(psi_tol) {
        return Err(EgfError::UnsupportedScenario(
            "closed-form reconstruction needs ψ constant along every fiber".into(),
        ));
    }
    let n = from_usize::<T>(initial.n());
    let (spectra, kappa) = spectral_data(div_h0, initial);
    let fibers = (0..spectra.len())
        .into_par_iter()
        .map(|b| {
            let k = kappa[b];
            Ok(heat_time_integral(&spectra[b], k * t)?
                .to_nodal()
                .scale(-T::one() / (n * k)))
        })
        .collect::<Result<Vec<ScalarField<T>>>>()?;
    let inc = ProductField::from_fibers(initial.grid().clone(), fibers)?;
    initial.with_phi(initial.phi().add(&inc), t)
}

/// Unnormalized flow.
pub fn run_egf<T: Real>(initial: ProductState<T>, config: FlowConfig<T>) -> Result<Trajectory<T>> {
    EgfFlow::new(initial, config)?.run()
}

/// Volume-preserving flow.
pub fn run_normalized<T: Real>(
    initial: ProductState<T>,
    config: FlowConfig<T>,
) -> Result<Trajectory<T>> {
    let mut config = config.with_variant(FlowVariant::Normalized);
    config.x_field = None;
    EgfFlow::new(initial, config)?.run()
}

/// Flow with prescribed mean curvature `X`.
pub fn run_prescribed<T: Real>(
    initial: ProductState<T>,
    x: FiberVectorField<T>,
    config: FlowConfig<T>,
) -> Result<Trajectory<T>> {
    let config = config.with_variant(FlowVariant::Prescribed).with_x_field(x);
    EgfFlow::new(initial, config)?.run()
}

/// Codimension-one flow from the leaf mean curvature `τ₁⁰`.
pub fn run_codim1<T: Real>(tau1: &ProductField<T>, config: FlowConfig<T>) -> Result<Trajectory<T>> {
    EgfFlow::codim1(tau1, config)?.run()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ProductGrid;
    use crate::grid::PeriodicGrid;

    fn grid(nb: usize, nf: usize) -> ProductGrid<f64> {
        ProductGrid::new(
            PeriodicGrid::unit_circle(nb).unwrap(),
            PeriodicGrid::unit_circle(nf).unwrap(),
        )
    }

    fn cos_state(amp: f64) -> ProductState<f64> {
        let g = grid(4, 64);
        ProductState::new(
            ProductField::from_fn(g.clone(), |_, y| amp * y[0].cos()),
            ProductField::zeros(g),
            0.0,
        )
        .unwrap()
    }

    fn config(variant: FlowVariant, t_end: f64, count: usize) -> FlowConfig<f64> {
        FlowConfig {
            variant,
            n: 1,
            p: 1,
            x_field: None,
            t_end,
            samples: FlowConfig::uniform_samples(t_end, count),
            tol_converge: 1e-10,
            oracle_check: false,
            fd_scheme: FdScheme::default(),
        }
    }

    #[test]
    fn config_validation() {
        assert!(FlowConfig::new(FlowVariant::Plain, 1, 1, 0.0, vec![0.0]).is_err());
        assert!(FlowConfig::new(FlowVariant::Plain, 3, 1, 1.0, vec![0.0]).is_err());
        assert!(FlowConfig::new(FlowVariant::Plain, 1, 1, 1.0, vec![0.5, 0.2]).is_err());
        assert!(FlowConfig::new(FlowVariant::Plain, 1, 1, 1.0, vec![2.0]).is_err());
        let c = FlowConfig::new(FlowVariant::Prescribed, 1, 1, 1.0, vec![0.0]).unwrap();
        assert!(c.validate().is_err());
        assert_eq!(FlowConfig::uniform_samples(1.0, 3), vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn single_mode_closed_form() {
        let flow = EgfFlow::new(cos_state(0.2), config(FlowVariant::Plain, 2.0, 5)).unwrap();
        assert_eq!(flow.method(), FlowMethod::Spectral);
        for &t in &[0.5, 1.0, 2.0] {
            let s = flow.state_at(t).unwrap();
            let want = ProductField::from_fn(s.grid().clone(), |_, y| 0.2 * (-t).exp() * y[0].cos());
            assert!(s.phi().sub(&want).sup_norm() < 1e-14);
            let u = flow.driving_at(t).unwrap();
            assert!((u.sup_norm() - 0.2 * (-t).exp()).abs() < 1e-14);
        }
        let lim = flow.limit_state().unwrap();
        assert!(lim.phi().sup_norm() < 1e-14);
    }

    #[test]
    fn product_metric_is_fixed() {
        let g = grid(4, 32);
        let traj = run_egf(ProductState::flat(g), config(FlowVariant::Plain, 1.0, 3)).unwrap();
        for (s, d) in traj.states.iter().zip(&traj.diagnostics) {
            assert_eq!(s.phi().sup_norm(), 0.0);
            assert_eq!(d.max_div_h, 0.0);
        }
        assert_eq!(traj.converged_at, Some(0.0));
    }

    #[test]
    fn rate_identity_and_sign() {
        let s = cos_state(0.2);
        let a = normalization_rate(&s);
        let b = normalization_rate_from_h2(&s);
        assert!(a < 0.0);
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn normalized_flow_keeps_volume() {
        let init = project_unit_volume(&cos_state(0.2)).unwrap();
        assert!((volume(&init) - 1.0).abs() < 1e-14);
        let traj = run_normalized(init, config(FlowVariant::Plain, 2.0, 5)).unwrap();
        for d in &traj.diagnostics {
            assert!((d.volume - 1.0).abs() < 1e-10, "{}", d.volume);
        }
    }

    #[test]
    fn fd_path_for_variable_psi() {
        let g = grid(4, 32);
        let init = ProductState::new(
            ProductField::from_fn(g.clone(), |_, y| 0.2 * y[0].cos()),
            ProductField::from_fn(g, |_, y| 0.1 * y[0].sin()),
            0.0,
        )
        .unwrap();
        let mut cfg = config(FlowVariant::Plain, 4.0, 3);
        cfg.fd_scheme = FdScheme::crank_nicolson(1e-2, 32).unwrap();
        let flow = EgfFlow::new(init.clone(), cfg.clone()).unwrap();
        assert_eq!(flow.method(), FlowMethod::FiniteDifference);
        let traj = flow.run().unwrap();
        let lim = &traj.limit;
        let last = traj.states.last().unwrap();
        assert!(last.phi().sub(lim.phi()).sup_norm() < 0.05);
        cfg.variant = FlowVariant::Prescribed;
        cfg.x_field = Some(FiberVectorField::zeros(init.grid(), 1));
        assert!(matches!(
            EgfFlow::new(init, cfg),
            Err(EgfError::UnsupportedScenario(_))
        ));
    }

    #[test]
    fn codim1_requires_zero_mean() {
        let g = grid(4, 32);
        let tau = ProductField::from_fn(g, |_, y| 1.0 + y[0].cos());
        assert!(matches!(
            EgfFlow::codim1(&tau, config(FlowVariant::Plain, 1.0, 2)),
            Err(EgfError::UnsupportedScenario(_))
        ));
    }
}
