//! Acceptance suite: one line per criterion, non-zero exit if any fails.
//!
//! Expected values come from closed forms and from trapezoidal quadrature done
//! here, not from the library's own reductions.

use std::f64::consts::{PI, TAU};
use std::panic::{catch_unwind, AssertUnwindSafe};

use egf_core::flow::{run_codim1, run_egf, run_normalized, run_prescribed, EgfFlow};
use egf_core::invariants::{
    check_divergence_identity, check_harmonic_limit, check_monotonicity, check_preservation,
    check_reeb, check_volume_ode, divergence_identity_sides, leafwise_energy,
};
use egf_core::{
    classify, double_twisted_state, fd_heat_run, heat_kernel_eval, product_grid,
    project_unit_volume, second_fundamental_data, twisted_mean_curvature, twisted_state,
    FdScheme, FiberVectorField, FlowConfig, FlowVariant, FourierSeries, PeriodicGrid,
    ProductField, ProductGrid, ProductState, ScalarField, VectorField,
};

type Check = std::result::Result<String, String>;

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn circle_grid(nb: usize, nf: usize) -> ProductGrid<f64> {
    product_grid(&[TAU], &[nb], &[TAU], &[nf]).unwrap()
}

fn cos_series(amp: f64) -> FourierSeries<f64> {
    FourierSeries::constant(0.0).with_term(vec![0, 1], amp, 0.0)
}

fn plain(t_end: f64, samples: Vec<f64>) -> FlowConfig<f64> {
    FlowConfig::new(FlowVariant::Plain, 1, 1, t_end, samples).unwrap()
}

/// Trapezoidal rule on `[0, 2π)²` with `nb × nf` nodes.
fn trapezoid(nb: usize, nf: usize, f: impl Fn(f64, f64) -> f64) -> f64 {
    let (hx, hy) = (TAU / nb as f64, TAU / nf as f64);
    let mut acc = 0.0;
    for i in 0..nb {
        for j in 0..nf {
            acc += f(i as f64 * hx, j as f64 * hy);
        }
    }
    acc * hx * hy
}

fn c01_spectral_decay() -> Check {
    let state = twisted_state(&circle_grid(8, 64), &cos_series(0.2)).unwrap();
    let traj = run_egf(state, plain(2.0, vec![0.0, 0.5, 1.0, 2.0])).unwrap();
    let err = traj.diagnostics[1..]
        .iter()
        .map(|d| (d.max_div_h - 0.2 * (-d.t).exp()).abs())
        .fold(0.0, f64::max);
    ensure(err < 1e-6, format!("max |max|Div H| - 0.2 e^-t| = {err:.3e} (tol 1e-6)"))
}

fn c02_torus_eigen_decay() -> Check {
    let grid = product_grid(&[TAU], &[8], &[TAU, TAU], &[32, 32]).unwrap();
    let phi0 = FourierSeries::constant(0.0).with_term(vec![0, 1, 2], 0.1, 0.0);
    let state = twisted_state(&grid, &phi0).unwrap();
    let cfg = FlowConfig::new(FlowVariant::Plain, 1, 2, 1.0, vec![0.0, 1.0]).unwrap();
    let traj = run_egf(state, cfg).unwrap();
    let d0 = traj.diagnostics[0].max_div_h;
    let rel = (traj.diagnostics[1].max_div_h / d0 / (-5.0f64).exp() - 1.0).abs();
    let start = (d0 - 0.5).abs();
    ensure(
        rel < 1e-6 && start < 1e-12,
        format!("relative error vs e^-5t at t=1 = {rel:.3e} (tol 1e-6); |u0| - 0.5 = {start:.1e}"),
    )
}

fn c03_heat_kernel_equilibrium() -> Check {
    let g = PeriodicGrid::<f64>::unit_circle(64).unwrap();
    // Direct mode sum: G - 1/2π = (1/π) Σ_{k≥1} e^{-k² t} cos k(x - y).
    let tail = |t: f64, d: f64| (1..=64).map(|k| (-(k * k) as f64 * t).exp() * (k as f64 * d).cos()).sum::<f64>() / PI;
    let mut series_gap: f64 = 0.0;
    let mut late: f64 = 0.0;
    for i in 0..16 {
        for j in 0..16 {
            let x = i as f64 * TAU / 16.0;
            let y = j as f64 * TAU / 16.0 + 0.1;
            let v = heat_kernel_eval(10.0, &[x], &[y], &g, 32).unwrap();
            series_gap = series_gap.max((v - 1.0 / TAU - tail(10.0, x - y)).abs());
            let w = heat_kernel_eval(20.0, &[x], &[y], &g, 32).unwrap();
            late = late.max((w - 1.0 / TAU).abs());
        }
    }
    ensure(
        series_gap < 1e-8 && late < 1e-8,
        format!(
            "t=10 deviation from 1/2π matches the mode sum to {series_gap:.1e}; sup |G(20,x,y) - 1/2π| = {late:.3e} (tol 1e-8)"
        ),
    )
}

fn c04_divergence_identity() -> Check {
    let state = twisted_state(&circle_grid(8, 64), &cos_series(0.2)).unwrap();
    let flow = EgfFlow::new(state, plain(1.0, vec![0.0, 1.0])).unwrap();
    let mut worst_res: f64 = 0.0;
    let mut worst_oracle: f64 = 0.0;
    let mut positive = true;
    for &t in &[0.0, 1.0] {
        let s = flow.state_at(t).unwrap();
        let h = twisted_mean_curvature(&s);
        let (lhs, rhs) = divergence_identity_sides(&s, &h);
        let a = 0.2 * (-t).exp();
        // -φ'' = a cos y and g(H,H) = φ'² with φ = a cos y, dvol = e^φ dx dy.
        let lhs_o = trapezoid(8, 64, |_, y| a * y.cos() * (a * y.cos()).exp());
        let rhs_o = trapezoid(8, 64, |_, y| (a * y.sin()).powi(2) * (a * y.cos()).exp());
        worst_res = worst_res.max(check_divergence_identity(&s, &h).residual);
        worst_oracle = worst_oracle
            .max((lhs - lhs_o).abs())
            .max((rhs - rhs_o).abs());
        if t == 0.0 {
            positive = lhs > 0.0 && rhs > 0.0 && lhs_o > 0.0;
        }
    }
    ensure(
        worst_res < 1e-8 && worst_oracle < 1e-8 && positive,
        format!(
            "residual {worst_res:.3e}, gap to quadrature {worst_oracle:.3e} (tol 1e-8); positive at t=0: {positive}"
        ),
    )
}

fn c05_reeb() -> Check {
    let (nb, nf) = (16, 64);
    let grid = circle_grid(nb, nf);
    let a = |x: f64| 0.3 + 0.1 * x.cos();
    let tau0 = ProductField::from_fn(grid.clone(), |x, y| a(x[0]) * y[0].cos());
    let samples = FlowConfig::uniform_samples(3.0, 7);
    let traj = run_codim1(&tau0, plain(3.0, samples)).unwrap();
    let tau = traj.tau1.as_ref().unwrap();
    let mut shape: f64 = 0.0;
    let mut oracle: f64 = 0.0;
    for (s, t1) in traj.states.iter().zip(tau) {
        let t = s.t();
        let want = ProductField::from_fn(grid.clone(), |x, y| a(x[0]) * (-t).exp() * y[0].cos());
        shape = shape.max(t1.sub(&want).sup_norm());
        // φ_t = -∫τ₁ dy = -a(x) e^{-t} sin y
        let integral = trapezoid(nb, nf, |x, y| {
            let tau = a(x) * (-t).exp() * y.cos();
            tau * (-a(x) * (-t).exp() * y.sin()).exp()
        });
        oracle = oracle.max(integral.abs());
    }
    let lib = check_reeb(&traj)
        .unwrap()
        .iter()
        .map(|r| r.residual)
        .fold(0.0, f64::max);
    ensure(
        lib < 1e-8 && oracle < 1e-8 && shape < 1e-12,
        format!(
            "max |∫τ₁ dvol| = {lib:.3e} (quadrature {oracle:.3e}, tol 1e-8); τ₁ vs a(x)e^-t cos y {shape:.1e}"
        ),
    )
}

fn c06_oracle_equivalence() -> Check {
    let state = twisted_state(&circle_grid(8, 64), &cos_series(0.2)).unwrap();
    let cfg = plain(1.0, vec![0.0, 1.0])
        .with_fd_scheme(FdScheme::crank_nicolson(1e-3, 256).unwrap())
        .with_oracle_check(true);
    let traj = run_egf(state, cfg).unwrap();
    let gap = traj.oracle_gap.unwrap();

    let resolutions = [32usize, 64, 128];
    let errors: Vec<f64> = resolutions
        .iter()
        .map(|&m| {
            let g = PeriodicGrid::<f64>::unit_circle(m).unwrap();
            let u0 = ScalarField::from_fn(g.clone(), |[y, _]| 0.2 * y.cos());
            let scheme = FdScheme::crank_nicolson(1e-3, m).unwrap();
            let u = fd_heat_run(&u0, &ScalarField::zeros(g), 1.0, &scheme).unwrap();
            u.sub(&u0.scale((-1.0f64).exp())).sup_norm()
        })
        .collect();
    let order = errors
        .windows(2)
        .map(|w| (w[0] / w[1]).log2())
        .sum::<f64>()
        / (errors.len() - 1) as f64;
    ensure(
        gap < 1e-3 && (order - 2.0).abs() <= 0.2,
        format!("spectral vs FD gap {gap:.3e} (tol 1e-3); FD order {order:.3} (2.0 ± 0.2)"),
    )
}

fn c07_rescaling() -> Check {
    let (nb, nf) = (8, 64);
    let init = project_unit_volume(&twisted_state(&circle_grid(nb, nf), &cos_series(0.2)).unwrap())
        .unwrap();
    let samples = FlowConfig::uniform_samples(5.0, 11);
    let a = run_egf(init.clone(), plain(5.0, samples.clone())).unwrap();
    let b = run_normalized(init, plain(5.0, samples)).unwrap();
    let cell = TAU / nb as f64 * TAU / nf as f64;
    let vol = |s: &ProductState<f64>| s.phi().values().iter().map(|v| v.exp()).sum::<f64>() * cell;
    let mut resc: f64 = 0.0;
    let mut drift: f64 = 0.0;
    for (sa, sb) in a.states.iter().zip(&b.states) {
        let c = vol(sa).powi(-2);
        for (pa, pb) in sa.phi().values().iter().zip(sb.phi().values()) {
            resc = resc.max(((2.0 * pb).exp() - c * (2.0 * pa).exp()).abs());
        }
        drift = drift.max((vol(sb) - 1.0).abs());
    }
    let r_max = a
        .diagnostics
        .iter()
        .chain(&b.diagnostics)
        .map(|d| d.r)
        .fold(f64::NEG_INFINITY, f64::max);
    ensure(
        resc < 1e-8 && drift < 1e-8 && r_max <= 1e-12,
        format!("rescaling {resc:.3e}, volume drift {drift:.3e} (tol 1e-8); max r {r_max:.3e} (≤ 1e-12)"),
    )
}

fn c08_preservation() -> Check {
    // D umbilical for a two-dimensional base.
    let grid = product_grid(&[TAU, TAU], &[8, 8], &[TAU], &[32]).unwrap();
    let phi0 = FourierSeries::constant(0.0)
        .with_term(vec![0, 0, 1], 0.2, 0.0)
        .with_term(vec![1, 0, 1], 0.1, 0.0);
    let state = twisted_state(&grid, &phi0).unwrap();
    let cfg = FlowConfig::new(FlowVariant::Plain, 2, 1, 2.0, FlowConfig::uniform_samples(2.0, 5))
        .unwrap();
    let traj = run_egf(state, cfg).unwrap();
    let umb = traj
        .diagnostics
        .iter()
        .map(|d| d.umbilical_residual)
        .fold(0.0, f64::max);

    // θ_H closed on torus fibers.
    let grid = product_grid(&[TAU], &[8], &[TAU, TAU], &[32, 32]).unwrap();
    let phi0 = FourierSeries::constant(0.0)
        .with_term(vec![0, 1, 2], 0.1, 0.0)
        .with_term(vec![1, 1, -1], 0.0, 0.05);
    let state = twisted_state(&grid, &phi0).unwrap();
    let cfg = FlowConfig::new(FlowVariant::Plain, 1, 2, 1.0, FlowConfig::uniform_samples(1.0, 4))
        .unwrap();
    let traj = run_egf(state, cfg).unwrap();
    let closed = traj.diagnostics.iter().map(|d| d.dtheta_h).fold(0.0, f64::max);

    // b⊥ scaling law on a double-twisted product with ψ = ψ(x).
    let grid = circle_grid(32, 64);
    let psi = FourierSeries::constant(0.0).with_term(vec![1, 0], 0.1, 0.0);
    let state = double_twisted_state(&grid, &cos_series(0.2), &psi).unwrap();
    let traj = run_egf(state, plain(2.0, FlowConfig::uniform_samples(2.0, 5))).unwrap();
    let scaling = check_preservation(&traj)
        .unwrap()
        .iter()
        .filter(|r| r.name == "scaling_law_bperp")
        .map(|r| r.residual)
        .fold(0.0, f64::max);
    let mut bperp_oracle: f64 = 0.0;
    for s in &traj.states {
        let t = s.t();
        let b = second_fundamental_data(s).bperp;
        let want = ProductField::from_fn(grid.clone(), |x, y| {
            let ps = 0.1 * x[0].cos();
            let phi = 0.2 * (-(-2.0 * ps).exp() * t).exp() * y[0].cos();
            (2.0 * ps - 2.0 * phi).exp() * 0.1 * x[0].sin()
        });
        bperp_oracle = bperp_oracle.max(b.entry(0, 0, 0).sub(&want).sup_norm());
    }
    ensure(
        umb < 1e-10 && closed < 1e-10 && scaling < 1e-8 && bperp_oracle < 1e-10,
        format!(
            "umbilicity {umb:.3e}, ‖d⊥θ_H‖ {closed:.3e} (tol 1e-10); b⊥ scaling {scaling:.3e} (tol 1e-8), closed form {bperp_oracle:.1e}"
        ),
    )
}

fn c09_monotonicity() -> Check {
    let state = twisted_state(&circle_grid(8, 64), &cos_series(0.2)).unwrap();
    let flow = EgfFlow::new(state, plain(2.0, vec![0.0, 0.5, 1.0, 2.0])).unwrap();
    let mut worst: f64 = 0.0;
    let mut energy_gap: f64 = 0.0;
    for &t in &[0.0, 0.5, 1.0, 2.0] {
        worst = worst.max(check_monotonicity(&flow, t).unwrap().residual);
        let s = flow.state_at(t).unwrap();
        let (e, d) = leafwise_energy(&twisted_mean_curvature(&s), &s);
        // ‖θ_H‖² = ‖δ⊥θ_H‖² = 2π · π (0.2 e^{-t})² for φ = 0.2 e^{-t} cos y.
        let want = TAU * PI * (0.2 * (-t).exp()).powi(2);
        energy_gap = energy_gap.max((e - want).abs()).max((d - want).abs());
    }
    ensure(
        worst < 1e-6 && energy_gap < 1e-12,
        format!("max |d/dt‖θ‖² + 2‖δθ‖²| = {worst:.3e} (tol 1e-6); energies vs closed form {energy_gap:.1e}"),
    )
}

fn c10_prescribed() -> Check {
    let grid = circle_grid(8, 64);
    let state = twisted_state(&grid, &cos_series(0.2)).unwrap();
    let x: FiberVectorField<f64> = VectorField {
        components: vec![ProductField::constant(grid.clone(), 0.1)],
    };
    let traj = run_prescribed(state, x, plain(10.0, FlowConfig::uniform_samples(10.0, 6))).unwrap();
    let div = check_harmonic_limit(&traj).unwrap().residual;
    let h_inf = twisted_mean_curvature(&traj.limit).sup_norm();
    ensure(
        div < 1e-8 && h_inf < 1e-8,
        format!("‖Div⊥(H∞ - X)‖ = {div:.3e}, ‖H∞‖ = {h_inf:.3e} (tol 1e-8)"),
    )
}

fn c11_volume_ode() -> Check {
    let (nb, nf) = (8, 64);
    let state = twisted_state(&circle_grid(nb, nf), &cos_series(0.2)).unwrap();
    let flow = EgfFlow::new(state, plain(2.0, vec![0.0, 2.0])).unwrap();
    let h = 1e-3;
    let vol = |t: f64| trapezoid(nb, nf, |_, y| (0.2 * (-t).exp() * y.cos()).exp());
    let mut lib: f64 = 0.0;
    let mut oracle: f64 = 0.0;
    for &t in &[0.5, 1.0, 2.0] {
        lib = lib.max(check_volume_ode(&flow, t).unwrap().residual);
        let dv = (vol(t + h) - vol(t - h)) / (2.0 * h);
        // s = 2 Δφ = -0.4 e^{-t} cos y
        let rhs = 0.5
            * trapezoid(nb, nf, |_, y| {
                let a = 0.2 * (-t).exp();
                -2.0 * a * y.cos() * (a * y.cos()).exp()
            });
        oracle = oracle.max(((dv - rhs) / rhs).abs());
    }
    ensure(
        lib < 1e-4 && oracle < 1e-4,
        format!("relative error {lib:.3e} (quadrature {oracle:.3e}, tol 1e-4)"),
    )
}

fn c12_product_limit() -> Check {
    let (nb, nf) = (16, 64);
    let grid = circle_grid(nb, nf);
    let phi0 = FourierSeries::constant(0.0)
        .with_term(vec![1, 0], 0.3, 0.0)
        .with_term(vec![0, 1], 0.2, 0.0)
        .with_term(vec![1, 2], 0.0, 0.1);
    let psi = FourierSeries::constant(0.0).with_term(vec![1, 0], 0.1, 0.0);
    let state = double_twisted_state(&grid, &phi0, &psi).unwrap();
    let traj = run_egf(state, plain(1.0, vec![0.0, 1.0])).unwrap();
    let mut avg_gap: f64 = 0.0;
    for b in 0..nb {
        let x = b as f64 * TAU / nb as f64;
        let (mut num, mut den) = (0.0, 0.0);
        for j in 0..nf {
            let y = j as f64 * TAU / nf as f64;
            let w = (0.1 * x.cos()).exp();
            num += w * (0.3 * x.cos() + 0.2 * y.cos() + 0.1 * (x + 2.0 * y).sin());
            den += w;
        }
        for &v in traj.limit.phi().fiber_values(b) {
            avg_gap = avg_gap.max((v - num / den).abs());
        }
    }

    let phi0 = FourierSeries::constant(0.0)
        .with_term(vec![0, 1], 0.2, 0.0)
        .with_term(vec![1, 2], 0.0, 0.1);
    let state = twisted_state(&grid, &phi0).unwrap();
    let traj = run_egf(state, plain(1.0, vec![0.0, 1.0])).unwrap();
    let flat = traj.limit.phi().sup_norm();
    let splits = classify(&traj.limit, 1e-8).d.totally_geodesic;
    ensure(
        avg_gap < 1e-8 && flat < 1e-8 && splits,
        format!(
            "φ∞ vs weighted fiber average {avg_gap:.3e}; zero-mean data: ‖φ∞‖ = {flat:.3e} (tol 1e-8), product limit: {splits}"
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Check); 12] = [
        ("spectral decay on the circle", c01_spectral_decay),
        ("torus eigen-decay", c02_torus_eigen_decay),
        ("heat kernel equilibrium", c03_heat_kernel_equilibrium),
        ("divergence identity", c04_divergence_identity),
        ("Reeb identity", c05_reeb),
        ("spectral vs finite-difference oracle", c06_oracle_equivalence),
        ("normalized/unnormalized rescaling", c07_rescaling),
        ("preservation suite", c08_preservation),
        ("energy monotonicity", c09_monotonicity),
        ("prescribed flow limit", c10_prescribed),
        ("volume ODE", c11_volume_ode),
        ("twisted-product limit", c12_product_limit),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(f))
            .unwrap_or_else(|e| {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_else(|| "panic".into());
                Err(format!("panicked: {msg}"))
            });
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
