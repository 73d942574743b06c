//! Checkers for the integral identities and preservation properties of the flow.
//!
//! Every checker returns [`CheckReport`]s carrying the residual and the tolerance
//! it was judged against.

use crate::error::{input, EgfError, Result};
use crate::fd::{fd_march_phi, FdScheme};
use crate::flow::{
    normalization_rate, normalization_rate_from_h2, weighted_fiber_means, EgfFlow, FlowMethod,
    FlowVariant, Trajectory,
};
use crate::geometry::{
    apply_vector, div_perp, full_divergence, grad_perp, inner_perp, integrate, laplacian_perp,
    second_fundamental_data, twisted_mean_curvature, volume, weighted_sum, FiberVectorField,
    ProductField, ProductState,
};
use crate::scalar::{from_usize, lit, Real};
use crate::tolerances;

#[derive(Clone, Debug, PartialEq)]
pub struct CheckReport<T> {
    pub name: String,
    pub residual: T,
    pub tolerance: T,
    /// `residual ≤ tolerance`; false for a NaN residual.
    pub pass: bool,
    pub sample_time: T,
}

impl<T: Real> CheckReport<T> {
    pub fn new(name: impl Into<String>, residual: T, tolerance: T, sample_time: T) -> Self {
        Self {
            name: name.into(),
            residual,
            tolerance,
            pass: residual <= tolerance,
            sample_time,
        }
    }
}

pub fn all_pass<T: Real>(reports: &[CheckReport<T>]) -> bool {
    reports.iter().all(|r| r.pass)
}

/// `(∫ Div⊥ξ dvol, ∫ g(H, ξ) dvol)`.
pub fn divergence_identity_sides<T: Real>(
    state: &ProductState<T>,
    xi: &FiberVectorField<T>,
) -> (T, T) {
    let h = twisted_mean_curvature(state);
    (
        integrate(&div_perp(xi, state), state),
        integrate(&inner_perp(&h, xi, state), state),
    )
}

/// `∫ Div⊥ξ dvol = ∫ g(H, ξ) dvol`.
pub fn check_divergence_identity<T: Real>(
    state: &ProductState<T>,
    xi: &FiberVectorField<T>,
) -> CheckReport<T> {
    let (lhs, rhs) = divergence_identity_sides(state, xi);
    CheckReport::new(
        "divergence_identity",
        (lhs - rhs).abs(),
        lit(tolerances::SPECTRAL_IDENTITY),
        state.t(),
    )
}

/// Leaf mean curvature `τ₁ = g(H, N)` for one-dimensional fibers, `N = e^{-ψ}∂_y`.
pub fn leaf_mean_curvature<T: Real>(state: &ProductState<T>) -> Result<ProductField<T>> {
    if state.p() != 1 {
        return Err(EgfError::UnsupportedScenario(
            "τ₁ is defined for one-dimensional fibers".into(),
        ));
    }
    let h = twisted_mean_curvature(state);
    Ok(h.components[0].zip_map(state.psi(), |v, s| v * s.exp()))
}

/// `(∫ N(f) dvol, ∫ τ₁ f dvol)`; `τ₁` is taken from the state when not given.
pub fn codim1_identity_sides<T: Real>(
    state: &ProductState<T>,
    tau1: Option<&ProductField<T>>,
    f: &ProductField<T>,
) -> Result<(T, T)> {
    let own;
    let tau1 = match tau1 {
        Some(t) => t,
        None => {
            own = leaf_mean_curvature(state)?;
            &own
        }
    };
    if state.p() != 1 {
        return Err(EgfError::UnsupportedScenario(
            "the codimension-one identity needs one-dimensional fibers".into(),
        ));
    }
    let nf = f
        .fiber_derivative(0)
        .zip_map(state.psi(), |d, s| d * (-s).exp());
    Ok((integrate(&nf, state), integrate(&tau1.mul(f), state)))
}

/// `∫ N(f) dvol = ∫ τ₁ f dvol`.
pub fn check_codim1_identity<T: Real>(
    state: &ProductState<T>,
    tau1: Option<&ProductField<T>>,
    f: &ProductField<T>,
) -> Result<CheckReport<T>> {
    let (lhs, rhs) = codim1_identity_sides(state, tau1, f)?;
    Ok(CheckReport::new(
        "codim1_identity",
        (lhs - rhs).abs(),
        lit(tolerances::SPECTRAL_IDENTITY),
        state.t(),
    ))
}

/// Pointwise `Div(f ∇⊥f) + f (H(f) - Δ⊥f) = g(∇⊥f, ∇⊥f)`.
pub fn check_harmonic_function_rigidity<T: Real>(
    state: &ProductState<T>,
    f: &ProductField<T>,
) -> CheckReport<T> {
    let grad = grad_perp(f, state);
    let h = twisted_mean_curvature(state);
    let f_grad = crate::geometry::VectorField {
        components: grad.components.iter().map(|c| c.mul(f)).collect(),
    };
    let lhs = full_divergence(&f_grad, state)
        .add(&f.mul(&apply_vector(&h, f).sub(&laplacian_perp(f, state))));
    let rhs = inner_perp(&grad, &grad, state);
    CheckReport::new(
        "harmonic_rigidity",
        lhs.sub(&rhs).sup_norm(),
        lit(tolerances::SPECTRAL_IDENTITY),
        state.t(),
    )
}

/// Per sample: umbilicity of `D`, closedness of `θ_H`, constancy of the `D⊥`
/// flags and the scaling law `b⊥_t = b⊥₀ e^{-∫s}`.
pub fn check_preservation<T: Real>(traj: &Trajectory<T>) -> Result<Vec<CheckReport<T>>> {
    if traj.states.len() < 3 {
        return Err(input("preservation checks need at least three samples"));
    }
    let pres = lit::<T>(tolerances::PRESERVATION);
    let scaling_tol = lit::<T>(tolerances::SCALING_LAW);
    let flags0 = traj
        .diagnostics
        .first()
        .map(|d| d.classification.d_perp)
        .expect("nonempty");
    let bperp0 = second_fundamental_data(&traj.initial).bperp;
    let mut out = Vec::new();
    for ((state, diag), ls) in traj
        .states
        .iter()
        .zip(&traj.diagnostics)
        .zip(&traj.log_scale_change)
    {
        let t = state.t();
        out.push(CheckReport::new("umbilicity_D", diag.umbilical_residual, pres, t));
        out.push(CheckReport::new("closedness_theta_H", diag.dtheta_h, pres, t));
        let same = diag.classification.d_perp == flags0;
        out.push(CheckReport::new(
            "flags_D_perp",
            if same { T::zero() } else { T::one() },
            T::zero(),
            t,
        ));
        let bperp = second_fundamental_data(state).bperp;
        let factor = ls.map(|v| (-v).exp());
        let residual = bperp
            .entries
            .iter()
            .zip(&bperp0.entries)
            .map(|(bt, b0)| bt.sub(&b0.mul(&factor)).sup_norm())
            .fold(T::zero(), T::max);
        out.push(CheckReport::new("scaling_law_bperp", residual, scaling_tol, t));
    }
    Ok(out)
}

/// Least-squares slope of `log max|u|` over samples with `t ≥ t_min`.
///
/// Samples whose driving scalar has reached round-off are skipped.
pub fn estimate_decay_rate<T: Real>(traj: &Trajectory<T>, t_min: T) -> Result<T> {
    let peak = traj
        .diagnostics
        .iter()
        .map(|d| d.max_driving)
        .fold(T::zero(), T::max);
    if peak == T::zero() {
        return Err(EgfError::UndefinedRate("the driving scalar vanishes".into()));
    }
    let floor = peak * T::epsilon() * lit(1e4);
    let pts: Vec<(T, T)> = traj
        .diagnostics
        .iter()
        .filter(|d| d.t >= t_min && d.max_driving > floor)
        .map(|d| (d.t, d.max_driving.ln()))
        .collect();
    if pts.len() < 4 {
        return Err(EgfError::UndefinedRate(format!(
            "need four usable samples past t = {t_min}, found {}",
            pts.len()
        )));
    }
    let m = from_usize::<T>(pts.len());
    let tm = pts.iter().fold(T::zero(), |a, p| a + p.0) / m;
    let ym = pts.iter().fold(T::zero(), |a, p| a + p.1) / m;
    let (num, den) = pts.iter().fold((T::zero(), T::zero()), |(n, d), &(t, y)| {
        (n + (t - tm) * (y - ym), d + (t - tm) * (t - tm))
    });
    if den == T::zero() {
        return Err(EgfError::UndefinedRate("sample times coincide".into()));
    }
    Ok(num / den)
}

/// Fitted rate against `-λ` with `λ` the expected slowest eigenvalue.
pub fn check_decay_rate<T: Real>(
    traj: &Trajectory<T>,
    t_min: T,
    lambda: T,
) -> Result<CheckReport<T>> {
    let slope = estimate_decay_rate(traj, t_min)?;
    Ok(CheckReport::new(
        "decay_rate",
        (slope + lambda).abs() / lambda,
        lit(tolerances::DECAY_RATE),
        t_min,
    ))
}

/// The field whose 1-form drives the flow: `H`, or `H - X` when prescribed.
fn driven_field<T: Real>(flow: &EgfFlow<T>, state: &ProductState<T>) -> FiberVectorField<T> {
    let h = twisted_mean_curvature(state);
    match &flow.config().x_field {
        Some(x) => h.sub(x),
        None => h,
    }
}

/// `(‖θ_ξ‖², ‖δ⊥θ_ξ‖²)` summed over leaves with the flat base weight.
pub fn leafwise_energy<T: Real>(xi: &FiberVectorField<T>, state: &ProductState<T>) -> (T, T) {
    let p = from_usize::<T>(state.p());
    let leaf_weight = state.psi().map(|s| (p * s).exp());
    let cell = state.grid().cell_volume();
    let theta2 = weighted_sum(&inner_perp(xi, xi, state), &leaf_weight) * cell;
    let div = div_perp(xi, state);
    let delta2 = weighted_sum(&div.mul(&div), &leaf_weight) * cell;
    (theta2, delta2)
}

fn derivative_at<T: Real>(f: impl Fn(T) -> Result<T>, t: T, h: T) -> Result<T> {
    let two = lit::<T>(2.0);
    if t >= h {
        Ok((f(t + h)? - f(t - h)?) / (two * h))
    } else {
        Ok((lit::<T>(-3.0) * f(t)? + lit::<T>(4.0) * f(t + h)? - f(t + two * h)?) / (two * h))
    }
}

/// `d/dt ‖θ‖² + 2 ‖δ⊥θ‖² = 0` at time `t` by central differences.
pub fn check_monotonicity<T: Real>(flow: &EgfFlow<T>, t: T) -> Result<CheckReport<T>> {
    let h = lit::<T>(tolerances::MONOTONICITY_STEP);
    let energy = |s: T| -> Result<T> {
        let st = flow.state_at(s)?;
        Ok(leafwise_energy(&driven_field(flow, &st), &st).0)
    };
    let de = derivative_at(energy, t, h)?;
    let st = flow.state_at(t)?;
    let (_, delta2) = leafwise_energy(&driven_field(flow, &st), &st);
    Ok(CheckReport::new(
        "monotonicity",
        (de + lit::<T>(2.0) * delta2).abs(),
        lit(tolerances::MONOTONICITY),
        t,
    ))
}

/// Speed `s` with `∂_t ĝ = s ĝ` for the configured variant.
fn speed<T: Real>(flow: &EgfFlow<T>, state: &ProductState<T>) -> Result<ProductField<T>> {
    let n = from_usize::<T>(state.n());
    let u = flow.driving_at(state.t())?;
    let s = u.scale(-lit::<T>(2.0) / n);
    if flow.config().variant == FlowVariant::Normalized {
        let r = normalization_rate(state);
        Ok(s.map(|v| v - r))
    } else {
        Ok(s)
    }
}

/// `d/dt vol = (n/2) ∫ s dvol` by finite differences of the volume.
pub fn check_volume_ode<T: Real>(flow: &EgfFlow<T>, t: T) -> Result<CheckReport<T>> {
    let h = lit::<T>(tolerances::VOLUME_ODE_STEP);
    let vol = |s: T| -> Result<T> { Ok(volume(&flow.state_at(s)?)) };
    let dv = derivative_at(vol, t, h)?;
    let st = flow.state_at(t)?;
    let n = from_usize::<T>(st.n());
    let rhs = n * lit::<T>(0.5) * integrate(&speed(flow, &st)?, &st);
    let scale = rhs.abs().max(T::epsilon().sqrt());
    Ok(CheckReport::new(
        "volume_ode",
        (dv - rhs).abs() / scale,
        lit(tolerances::VOLUME_ODE),
        t,
    ))
}

/// Forward difference of `u` against `Δ⊥u`; tolerance `h (1 + sup|Δ⊥²u|)`.
pub fn check_heat_consistency<T: Real>(flow: &EgfFlow<T>, t: T) -> Result<CheckReport<T>> {
    let h = lit::<T>(tolerances::HEAT_CONSISTENCY_STEP);
    let st = flow.state_at(t)?;
    let u0 = flow.driving_at(t)?;
    let u1 = flow.driving_at(t + h)?;
    let dt = u1.sub(&u0).scale(T::one() / h);
    let lap = laplacian_perp(&u0, &st);
    let lap2 = laplacian_perp(&lap, &st);
    Ok(CheckReport::new(
        "heat_consistency",
        dt.sub(&lap).sup_norm(),
        h * (T::one() + lap2.sup_norm()),
        t,
    ))
}

/// The two expressions for `r` agree.
pub fn check_normalization_rate<T: Real>(state: &ProductState<T>) -> CheckReport<T> {
    CheckReport::new(
        "normalization_rate",
        (normalization_rate(state) - normalization_rate_from_h2(state)).abs(),
        lit(tolerances::SPECTRAL_IDENTITY),
        state.t(),
    )
}

/// `r(t) ≤ 0` at every sample.
pub fn check_rate_sign<T: Real>(traj: &Trajectory<T>) -> Vec<CheckReport<T>> {
    traj.diagnostics
        .iter()
        .map(|d| CheckReport::new("rate_sign", d.r, lit(tolerances::RATE_SIGN), d.t))
        .collect()
}

/// `‖ĝ̃_t - (vol_t / vol₀)^{-2/n} ĝ_t‖∞` between a normalized and a plain run
/// sampled at the same times.
pub fn check_rescaling<T: Real>(
    plain: &Trajectory<T>,
    normalized: &Trajectory<T>,
) -> Result<Vec<CheckReport<T>>> {
    if plain.states.len() != normalized.states.len() {
        return Err(input("trajectories have different sample counts"));
    }
    let vol0 = volume(&plain.initial);
    let tol = lit::<T>(tolerances::SPECTRAL_IDENTITY);
    plain
        .states
        .iter()
        .zip(&normalized.states)
        .map(|(a, b)| {
            if a.t() != b.t() {
                return Err(input("trajectories are sampled at different times"));
            }
            let n = from_usize::<T>(a.n());
            let c = (volume(a) / vol0).powf(-lit::<T>(2.0) / n);
            let residual = b
                .base_factor()
                .sub(&a.base_factor().scale(c))
                .sup_norm();
            Ok(CheckReport::new("rescaling", residual, tol, a.t()))
        })
        .collect()
}

/// `|vol_t - vol₀|` along a normalized run.
pub fn check_volume_drift<T: Real>(traj: &Trajectory<T>) -> Vec<CheckReport<T>> {
    let vol0 = volume(&traj.initial);
    traj.diagnostics
        .iter()
        .map(|d| {
            CheckReport::new(
                "volume_drift",
                (d.volume - vol0).abs(),
                lit(tolerances::SPECTRAL_IDENTITY),
                d.t,
            )
        })
        .collect()
}

/// Spectral against finite-difference result at the end of the run.
pub fn check_oracle_equivalence<T: Real>(traj: &Trajectory<T>) -> Option<CheckReport<T>> {
    let t = traj.states.last()?.t();
    traj.oracle_gap
        .map(|gap| CheckReport::new("oracle", gap, lit(tolerances::ORACLE), t))
}

/// Errors of the finite-difference march against the spectral state at `t`,
/// one per fiber resolution, and the mean observed order between successive
/// doublings.
pub fn fd_convergence_order<T: Real>(
    flow: &EgfFlow<T>,
    t: T,
    dt: T,
    resolutions: &[usize],
) -> Result<(Vec<T>, T)> {
    if flow.method() != FlowMethod::Spectral {
        return Err(EgfError::UnsupportedScenario(
            "the convergence study needs the spectral reference".into(),
        ));
    }
    if resolutions.len() < 2 {
        return Err(input("need at least two resolutions"));
    }
    let reference = flow.plain_state_at(t)?;
    let errors = resolutions
        .iter()
        .map(|&m| {
            let scheme = FdScheme::crank_nicolson(dt, m)?;
            let phi = fd_march_phi(flow.initial().phi(), flow.initial().psi(), t, &scheme)?;
            Ok(phi.sub(reference.phi()).sup_norm())
        })
        .collect::<Result<Vec<T>>>()?;
    let mut acc = T::zero();
    for (w, r) in errors.windows(2).zip(resolutions.windows(2)) {
        let ratio = from_usize::<T>(r[1]) / from_usize::<T>(r[0]);
        acc += (w[0] / w[1]).ln() / ratio.ln();
    }
    let order = acc / from_usize(errors.len() - 1);
    Ok((errors, order))
}

/// `sup_t |∫₀ᵗ s| ≤ log c`.
pub fn check_uniform_equivalence<T: Real>(traj: &Trajectory<T>) -> Option<CheckReport<T>> {
    let c = traj.equivalence_constant?;
    let worst = traj
        .log_scale_change
        .iter()
        .map(|f| f.sup_norm())
        .fold(T::zero(), T::max);
    let t = traj.states.last()?.t();
    Some(CheckReport::new("uniform_equivalence", worst, c.ln(), t))
}

/// `‖Div⊥(H∞ - X)‖∞` for a prescribed run.
pub fn check_harmonic_limit<T: Real>(traj: &Trajectory<T>) -> Option<CheckReport<T>> {
    let x = traj.x_field.as_ref()?;
    let lim = &traj.limit;
    let h = twisted_mean_curvature(lim);
    let t = traj.states.last()?.t();
    Some(CheckReport::new(
        "harmonic_limit",
        div_perp(&h.sub(x), lim).sup_norm(),
        lit(tolerances::SPECTRAL_IDENTITY),
        t,
    ))
}

/// `|∫ τ₁ dvol_t|` at every sample of a codimension-one run.
pub fn check_reeb<T: Real>(traj: &Trajectory<T>) -> Option<Vec<CheckReport<T>>> {
    let tau = traj.tau1.as_ref()?;
    Some(
        traj.states
            .iter()
            .zip(tau)
            .map(|(s, t1)| {
                CheckReport::new(
                    "reeb",
                    integrate(t1, s).abs(),
                    lit(tolerances::SPECTRAL_IDENTITY),
                    s.t(),
                )
            })
            .collect(),
    )
}

/// `φ∞` against the `e^{pψ}`-weighted fiber average of `φ₀` (unnormalized runs).
pub fn check_limit_average<T: Real>(traj: &Trajectory<T>) -> Option<CheckReport<T>> {
    if traj.variant != FlowVariant::Plain || traj.tau1.is_some() {
        return None;
    }
    let means = weighted_fiber_means(traj.initial.phi(), &traj.initial);
    let m = traj.initial.grid().fiber_len();
    let residual = traj
        .limit
        .phi()
        .values()
        .iter()
        .enumerate()
        .fold(T::zero(), |a, (i, &v)| a.max((v - means[i / m]).abs()));
    let t = traj.states.last()?.t();
    let tol = match traj.method {
        FlowMethod::Spectral => lit(tolerances::SPECTRAL_IDENTITY),
        FlowMethod::FiniteDifference => lit(tolerances::ORACLE),
    };
    Some(CheckReport::new("limit_average", residual, tol, t))
}

/// Names accepted by [`run_named_check`].
pub const CHECK_NAMES: &[&str] = &[
    "divergence_identity",
    "codim1_identity",
    "harmonic_rigidity",
    "preservation",
    "decay_rate",
    "monotonicity",
    "volume_ode",
    "heat_consistency",
    "normalization_rate",
    "rate_sign",
    "oracle",
    "uniform_equivalence",
    "harmonic_limit",
    "reeb",
    "limit_average",
];

/// `sin(2π y₁ / L₁)` on the fiber.
fn fiber_test_function<T: Real>(state: &ProductState<T>) -> ProductField<T> {
    let k = T::TAU() / state.grid().fiber().sides()[0];
    ProductField::from_fn(state.grid().clone(), |_, y| (k * y[0]).sin())
}

/// Runs one named checker over a trajectory. Checks that do not apply to the
/// run (for example `reeb` on a twisted product) yield no reports.
pub fn run_named_check<T: Real>(
    name: &str,
    flow: &EgfFlow<T>,
    traj: &Trajectory<T>,
) -> Result<Vec<CheckReport<T>>> {
    let every = || traj.states.iter();
    let out = match name {
        "divergence_identity" => every()
            .map(|s| check_divergence_identity(s, &twisted_mean_curvature(s)))
            .collect(),
        "codim1_identity" => match (&traj.tau1, traj.initial.p()) {
            (Some(tau), _) => every()
                .zip(tau)
                .map(|(s, t1)| check_codim1_identity(s, Some(t1), t1))
                .collect::<Result<_>>()?,
            (None, 1) => every()
                .map(|s| {
                    let one = ProductField::constant(s.grid().clone(), T::one());
                    check_codim1_identity(s, None, &one)
                })
                .collect::<Result<_>>()?,
            _ => Vec::new(),
        },
        "harmonic_rigidity" => every()
            .map(|s| check_harmonic_function_rigidity(s, &fiber_test_function(s)))
            .collect(),
        "preservation" => check_preservation(traj)?,
        "decay_rate" => {
            let gap = traj.initial.grid().fiber().spectral_gap();
            let kappa_min = traj
                .initial
                .psi()
                .values()
                .iter()
                .fold(T::infinity(), |a, &s| a.min((-(s + s)).exp()));
            let t0 = traj.states.first().map(|s| s.t()).unwrap_or(T::zero());
            match check_decay_rate(traj, t0, gap * kappa_min) {
                Ok(r) => vec![r],
                Err(EgfError::UndefinedRate(_)) => Vec::new(),
                Err(e) => return Err(e),
            }
        }
        "monotonicity" => every()
            .map(|s| check_monotonicity(flow, s.t()))
            .collect::<Result<_>>()?,
        "volume_ode" => every()
            .map(|s| check_volume_ode(flow, s.t()))
            .collect::<Result<_>>()?,
        "heat_consistency" => {
            if flow.method() == FlowMethod::Spectral {
                every()
                    .map(|s| check_heat_consistency(flow, s.t()))
                    .collect::<Result<_>>()?
            } else {
                Vec::new()
            }
        }
        "normalization_rate" => every().map(check_normalization_rate).collect(),
        "rate_sign" => check_rate_sign(traj),
        "oracle" => check_oracle_equivalence(traj).into_iter().collect(),
        "uniform_equivalence" => check_uniform_equivalence(traj).into_iter().collect(),
        "harmonic_limit" => check_harmonic_limit(traj).into_iter().collect(),
        "reeb" => check_reeb(traj).unwrap_or_default(),
        "limit_average" => check_limit_average(traj).into_iter().collect(),
        other => return Err(input(format!("unknown check '{other}'"))),
    };
    Ok(out)
}
