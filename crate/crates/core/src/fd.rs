//! Second-order finite differences, independent of the spectral path.
//!
//! The leaf Laplacian of `g⊥ = e^{2ψ}·flat` is discretized with centered
//! differences and marched with a θ-scheme. One-dimensional fibers give a cyclic
//! tridiagonal system per step; two-dimensional fibers give a system that is
//! symmetric positive definite after multiplying by `e^{2ψ}`, solved by conjugate
//! gradients preconditioned with the constant-coefficient FFT inverse.

use num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{input, EgfError, Result};
use crate::geometry::{FiberVectorField, ProductField, ProductState, VectorField};
use crate::grid::PeriodicGrid;
use crate::scalar::{from_usize, lit, Real};
use crate::spectral::ScalarField;

/// Time-stepping parameters of the θ-scheme.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FdScheme<T> {
    pub dt: T,
    /// `0` explicit, `0.5` Crank–Nicolson, `1` backward Euler.
    pub theta: T,
    /// Fiber resolution the oracle runs at when it resamples spectral data.
    pub grid_points: usize,
}

impl<T: Real> FdScheme<T> {
    pub fn new(dt: T, theta: T, grid_points: usize) -> Result<Self> {
        if !(dt.is_finite() && dt > T::zero()) {
            return Err(input(format!("time step must be positive, got {dt}")));
        }
        if !(theta >= T::zero() && theta <= T::one()) {
            return Err(input(format!("theta must lie in [0, 1], got {theta}")));
        }
        if grid_points < 4 || !grid_points.is_power_of_two() {
            return Err(input(format!(
                "oracle grid points must be a power of two >= 4, got {grid_points}"
            )));
        }
        Ok(Self {
            dt,
            theta,
            grid_points,
        })
    }

    pub fn crank_nicolson(dt: T, grid_points: usize) -> Result<Self> {
        Self::new(dt, lit(0.5), grid_points)
    }

    pub fn is_unconditionally_stable(&self) -> bool {
        self.theta >= lit(0.5)
    }
}

impl<T: Real> Default for FdScheme<T> {
    fn default() -> Self {
        Self {
            dt: lit(1e-3),
            theta: lit(0.5),
            grid_points: 256,
        }
    }
}

fn shifted<T: Real>(grid: &PeriodicGrid<T>, flat: usize, axis: usize, delta: isize) -> usize {
    let mut idx = grid.unflatten(flat);
    let n = grid.points()[axis] as isize;
    idx[axis] = ((idx[axis] as isize + delta).rem_euclid(n)) as usize;
    grid.flatten(idx)
}

/// Centered first difference along `axis`.
pub fn centered_first<T: Real>(u: &ScalarField<T>, axis: usize) -> ScalarField<T> {
    let g = u.grid();
    let h2 = g.spacing(axis) + g.spacing(axis);
    let v = u.values();
    let out = (0..g.len())
        .map(|i| (v[shifted(g, i, axis, 1)] - v[shifted(g, i, axis, -1)]) / h2)
        .collect();
    ScalarField::new(g.clone(), out).expect("same grid")
}

/// Centered second difference along `axis`.
pub fn centered_second<T: Real>(u: &ScalarField<T>, axis: usize) -> ScalarField<T> {
    let g = u.grid();
    let h = g.spacing(axis);
    let hh = h * h;
    let v = u.values();
    let two = lit::<T>(2.0);
    let out = (0..g.len())
        .map(|i| (v[shifted(g, i, axis, 1)] - two * v[i] + v[shifted(g, i, axis, -1)]) / hh)
        .collect();
    ScalarField::new(g.clone(), out).expect("same grid")
}

fn check_same_grid<T: Real>(u: &ScalarField<T>, psi: &ScalarField<T>) -> Result<()> {
    if u.grid() != psi.grid() {
        return Err(input("field and conformal factor live on different grids"));
    }
    Ok(())
}

/// Leaf Laplacian of `e^{2ψ}·flat` by centered differences:
/// `e^{-2ψ}(u_yy - ψ_y u_y)` on circles, `e^{-2ψ} Δ_flat u` on 2-tori.
pub fn fd_laplacian_conformal<T: Real>(
    u: &ScalarField<T>,
    psi: &ScalarField<T>,
) -> Result<ScalarField<T>> {
    check_same_grid(u, psi)?;
    let inv = psi.map(|v| (-(v + v)).exp());
    let flat = match u.grid().dims() {
        1 => {
            let dpsi = centered_first(psi, 0);
            centered_second(u, 0).sub(&dpsi.zip_map(&centered_first(u, 0), |a, b| a * b))
        }
        _ => centered_second(u, 0).add(&centered_second(u, 1)),
    };
    Ok(flat.zip_map(&inv, |a, b| a * b))
}

/// Periodic tridiagonal system `a_i x_{i-1} + b_i x_i + c_i x_{i+1} = r_i`,
/// indices mod `n`, solved by Thomas elimination with a Sherman–Morrison
/// correction for the corners.
pub fn solve_cyclic_tridiagonal<T: Real>(a: &[T], b: &[T], c: &[T], r: &[T]) -> Result<Vec<T>> {
    let n = b.len();
    if n < 3 || a.len() != n || c.len() != n || r.len() != n {
        return Err(input("cyclic tridiagonal system needs n >= 3 consistent bands"));
    }
    let alpha = c[n - 1];
    let beta = a[0];
    let gamma = -b[0];
    if gamma == T::zero() {
        return Err(EgfError::Numerical("zero leading diagonal".into()));
    }
    let mut bb = b.to_vec();
    bb[0] = b[0] - gamma;
    bb[n - 1] = b[n - 1] - alpha * beta / gamma;
    let x = thomas(a, &bb, c, r)?;
    let mut u = vec![T::zero(); n];
    u[0] = gamma;
    u[n - 1] = alpha;
    let z = thomas(a, &bb, c, &u)?;
    let denom = T::one() + z[0] + beta * z[n - 1] / gamma;
    if denom == T::zero() || !denom.is_finite() {
        return Err(EgfError::Numerical("singular cyclic system".into()));
    }
    let fact = (x[0] + beta * x[n - 1] / gamma) / denom;
    Ok(x.iter().zip(&z).map(|(&xi, &zi)| xi - fact * zi).collect())
}

fn thomas<T: Real>(a: &[T], b: &[T], c: &[T], r: &[T]) -> Result<Vec<T>> {
    let n = b.len();
    let mut cp = vec![T::zero(); n];
    let mut x = vec![T::zero(); n];
    let mut piv = b[0];
    if piv == T::zero() {
        return Err(EgfError::Numerical("zero pivot in tridiagonal solve".into()));
    }
    x[0] = r[0] / piv;
    for i in 1..n {
        cp[i - 1] = c[i - 1] / piv;
        piv = b[i] - a[i] * cp[i - 1];
        if piv == T::zero() || !piv.is_finite() {
            return Err(EgfError::Numerical("zero pivot in tridiagonal solve".into()));
        }
        x[i] = (r[i] - a[i] * x[i - 1]) / piv;
    }
    for i in (0..n - 1).rev() {
        let next = x[i + 1];
        x[i] -= cp[i] * next;
    }
    Ok(x)
}

/// Bands of the 1D operator `e^{-2ψ}(D₂ - (D₁ψ) D₁)`.
fn circle_bands<T: Real>(psi: &ScalarField<T>) -> (Vec<T>, Vec<T>, Vec<T>) {
    let g = psi.grid();
    let h = g.spacing(0);
    let hh = h * h;
    let dpsi = centered_first(psi, 0);
    let two = lit::<T>(2.0);
    let mut a = Vec::with_capacity(g.len());
    let mut b = Vec::with_capacity(g.len());
    let mut c = Vec::with_capacity(g.len());
    for (i, &s) in psi.values().iter().enumerate() {
        let w = (-(s + s)).exp();
        let drift = dpsi.values()[i] / (two * h);
        a.push(w * (T::one() / hh + drift));
        b.push(-w * two / hh);
        c.push(w * (T::one() / hh - drift));
    }
    (a, b, c)
}

fn apply_bands<T: Real>(a: &[T], b: &[T], c: &[T], u: &[T]) -> Vec<T> {
    let n = u.len();
    (0..n)
        .map(|i| a[i] * u[(i + n - 1) % n] + b[i] * u[i] + c[i] * u[(i + 1) % n])
        .collect()
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |s, (&x, &y)| s + x * y)
}

/// Solves `(diag(w) - s Δ_h) x = r` on a 2-torus.
fn solve_weighted_torus<T: Real>(
    grid: &PeriodicGrid<T>,
    w: &[T],
    s: T,
    r: &[T],
) -> Result<Vec<T>> {
    let n = grid.len();
    let flat_lap = |v: &[T]| -> Vec<T> {
        let f = ScalarField::new(grid.clone(), v.to_vec()).expect("same grid");
        centered_second(&f, 0)
            .add(&centered_second(&f, 1))
            .into_values()
    };
    let apply = |v: &[T]| -> Vec<T> {
        let l = flat_lap(v);
        (0..n).map(|i| w[i] * v[i] - s * l[i]).collect()
    };
    let wbar = w.iter().fold(T::zero(), |a, &v| a + v) / from_usize(n);
    // Symbol of the 5-point Laplacian: -(4/h²) sin²(π l / N) per axis.
    let mut symbol = vec![T::zero(); n];
    for (flat, sym) in symbol.iter_mut().enumerate() {
        let idx = grid.unflatten(flat);
        let mut acc = T::zero();
        for axis in 0..2 {
            let h = grid.spacing(axis);
            let arg = T::PI() * from_usize::<T>(idx[axis]) / from_usize(grid.points()[axis]);
            let sn = arg.sin();
            acc += lit::<T>(4.0) * sn * sn / (h * h);
        }
        *sym = wbar + s * acc;
    }
    let mut planner = FftPlanner::<T>::new();
    let (p0, p1) = (grid.points()[0], grid.points()[1]);
    let f0 = planner.plan_fft_forward(p0);
    let f1 = planner.plan_fft_forward(p1);
    let i0 = planner.plan_fft_inverse(p0);
    let i1 = planner.plan_fft_inverse(p1);
    let precondition = |v: &[T]| -> Vec<T> {
        let mut data: Vec<Complex<T>> = v.iter().map(|&x| Complex::new(x, T::zero())).collect();
        f1.process(&mut data);
        let mut col = vec![Complex::new(T::zero(), T::zero()); p0];
        for j in 0..p1 {
            for i in 0..p0 {
                col[i] = data[i * p1 + j];
            }
            f0.process(&mut col);
            for i in 0..p0 {
                data[i * p1 + j] = col[i];
            }
        }
        for (d, &sym) in data.iter_mut().zip(&symbol) {
            *d /= sym;
        }
        i1.process(&mut data);
        for j in 0..p1 {
            for i in 0..p0 {
                col[i] = data[i * p1 + j];
            }
            i0.process(&mut col);
            for i in 0..p0 {
                data[i * p1 + j] = col[i];
            }
        }
        let scale = T::one() / from_usize(n);
        data.iter().map(|c| c.re * scale).collect()
    };

    let rnorm = dot(r, r).sqrt();
    if rnorm == T::zero() {
        return Ok(vec![T::zero(); n]);
    }
    let tol = rnorm * lit::<T>(1e-14).max(T::epsilon() * lit(10.0));
    let mut x = precondition(r);
    let ax = apply(&x);
    let mut res: Vec<T> = r.iter().zip(&ax).map(|(&a, &b)| a - b).collect();
    let mut z = precondition(&res);
    let mut dir = z.clone();
    let mut rz = dot(&res, &z);
    for _ in 0..500 {
        if dot(&res, &res).sqrt() <= tol {
            return Ok(x);
        }
        let ad = apply(&dir);
        let denom = dot(&dir, &ad);
        if denom <= T::zero() || !denom.is_finite() {
            return Err(EgfError::Numerical("conjugate gradient breakdown".into()));
        }
        let alpha = rz / denom;
        for i in 0..n {
            x[i] += alpha * dir[i];
            res[i] -= alpha * ad[i];
        }
        z = precondition(&res);
        let rz_new = dot(&res, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            dir[i] = z[i] + beta * dir[i];
        }
    }
    if dot(&res, &res).sqrt() <= tol * lit(100.0) {
        return Ok(x);
    }
    Err(EgfError::Numerical(
        "conjugate gradient did not converge in 500 iterations".into(),
    ))
}

/// Marches `∂_t u = Δ⊥u` on one fiber to `t_end` with the θ-scheme.
///
/// The step count is `ceil(t_end / dt)`, using a uniform step `≤ dt` that lands on
/// `t_end` exactly. Explicit-leaning schemes (`θ < ½`) must satisfy the usual
/// diffusion-number bound.
pub fn fd_heat_run<T: Real>(
    u0: &ScalarField<T>,
    psi: &ScalarField<T>,
    t_end: T,
    scheme: &FdScheme<T>,
) -> Result<ScalarField<T>> {
    check_same_grid(u0, psi)?;
    if !(t_end.is_finite() && t_end >= T::zero()) {
        return Err(input(format!("end time must be nonnegative, got {t_end}")));
    }
    if t_end == T::zero() {
        return Ok(u0.clone());
    }
    let grid = u0.grid().clone();
    let steps = (t_end / scheme.dt).ceil().to_usize().unwrap_or(1).max(1);
    let dt = t_end / from_usize(steps);
    let theta = scheme.theta;

    if !scheme.is_unconditionally_stable() {
        let max_coeff = psi
            .values()
            .iter()
            .fold(T::zero(), |a, &s| a.max((-(s + s)).exp()));
        let mut number = T::zero();
        for axis in 0..grid.dims() {
            let h = grid.spacing(axis);
            number += lit::<T>(2.0) * max_coeff * dt / (h * h);
        }
        if number * (T::one() - lit::<T>(2.0) * theta) > T::one() {
            return Err(input(format!(
                "θ-scheme with θ = {theta} is unstable at dt = {dt} on this grid"
            )));
        }
    }

    let mut u = u0.values().to_vec();
    match grid.dims() {
        1 => {
            let (a, b, c) = circle_bands(psi);
            let la: Vec<T> = a.iter().map(|&v| -theta * dt * v).collect();
            let lb: Vec<T> = b.iter().map(|&v| T::one() - theta * dt * v).collect();
            let lc: Vec<T> = c.iter().map(|&v| -theta * dt * v).collect();
            let expl = (T::one() - theta) * dt;
            for _ in 0..steps {
                let lu = apply_bands(&a, &b, &c, &u);
                let rhs: Vec<T> = u.iter().zip(&lu).map(|(&v, &l)| v + expl * l).collect();
                u = if theta == T::zero() {
                    rhs
                } else {
                    solve_cyclic_tridiagonal(&la, &lb, &lc, &rhs)?
                };
            }
        }
        _ => {
            let w: Vec<T> = psi.values().iter().map(|&s| (s + s).exp()).collect();
            let expl = (T::one() - theta) * dt;
            for _ in 0..steps {
                let f = ScalarField::new(grid.clone(), u.clone())?;
                let lap = centered_second(&f, 0).add(&centered_second(&f, 1));
                // e^{2ψ}(u + (1-θ)dt L u) = e^{2ψ} u + (1-θ) dt Δ_h u
                let rhs: Vec<T> = (0..u.len())
                    .map(|i| w[i] * u[i] + expl * lap.values()[i])
                    .collect();
                u = if theta == T::zero() {
                    rhs.iter().zip(&w).map(|(&r, &wi)| r / wi).collect()
                } else {
                    solve_weighted_torus(&grid, &w, theta * dt, &rhs)?
                };
            }
        }
    }
    ScalarField::new(grid, u)
}

/// Mean curvature of the leaves `M₁ × {y}` from the Koszul formula with centered
/// differences of the metric coefficients:
/// `H^k = Σ_i g^{ii} (-½ g⊥^{kk} ∂_k g_{ii})`.
pub fn fd_mean_curvature_from_metric<T: Real>(state: &ProductState<T>) -> FiberVectorField<T> {
    let n = from_usize::<T>(state.n());
    let half = lit::<T>(0.5);
    let gb = state.base_factor();
    let gf = state.fiber_factor();
    let components = (0..state.p())
        .map(|k| {
            let dgb = gb.map_fibers(|_, f| centered_first(&f, k));
            let mut out = dgb.mul(&gf.map(|v| T::one() / v));
            out = out.mul(&gb.map(|v| T::one() / v));
            out.scale(-half * n)
        })
        .collect();
    VectorField { components }
}

/// Marches `φ` by `∂_t φ = Δ⊥φ` fiber by fiber over a time span.
pub(crate) fn fd_march_phi<T: Real>(
    phi: &ProductField<T>,
    psi: &ProductField<T>,
    dt_total: T,
    scheme: &FdScheme<T>,
) -> Result<ProductField<T>> {
    phi.try_map_fibers(|b, f| {
        let ps = psi.fiber(b);
        let native = f.grid().points().to_vec();
        let fine = vec![scheme.grid_points; native.len()];
        if fine == native {
            fd_heat_run(&f, &ps, dt_total, scheme)
        } else {
            let uf = f.resample(&fine)?;
            let pf = ps.resample(&fine)?;
            fd_heat_run(&uf, &pf, dt_total, scheme)?.resample(&native)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{twisted_mean_curvature, ProductGrid};

    fn circle(n: usize) -> PeriodicGrid<f64> {
        PeriodicGrid::unit_circle(n).unwrap()
    }

    #[test]
    fn scheme_validation() {
        assert!(FdScheme::new(0.0, 0.5, 64).is_err());
        assert!(FdScheme::new(1e-3, 1.5, 64).is_err());
        assert!(FdScheme::new(1e-3, 0.5, 100).is_err());
        assert!(FdScheme::<f64>::default().is_unconditionally_stable());
    }

    #[test]
    fn flat_laplacian_of_cosine() {
        let g = circle(256);
        let u = ScalarField::from_fn(g.clone(), |[y, _]| y.cos());
        let psi = ScalarField::zeros(g);
        let l = fd_laplacian_conformal(&u, &psi).unwrap();
        let h = std::f64::consts::TAU / 256.0;
        assert!(l.add(&u).sup_norm() < h * h);
    }

    #[test]
    fn constant_psi_scales_flat_stencil() {
        let g = PeriodicGrid::<f64>::unit_torus(32).unwrap();
        let u = ScalarField::from_fn(g.clone(), |[a, b]| (a + 2.0 * b).sin());
        let flat = fd_laplacian_conformal(&u, &ScalarField::zeros(g.clone())).unwrap();
        let c = 0.3;
        let scaled = fd_laplacian_conformal(&u, &ScalarField::constant(g, c)).unwrap();
        assert!(scaled.sub(&flat.scale((-2.0 * c).exp())).sup_norm() < 1e-13);
    }

    #[test]
    fn variable_psi_laplacian_is_second_order() {
        // Oracle: spectral evaluation of e^{-2ψ}(u'' - ψ'u') on the same nodes.
        let errs: Vec<f64> = [32usize, 64, 128]
            .iter()
            .map(|&n| {
                let g = circle(n);
                let u = ScalarField::from_fn(g.clone(), |[y, _]| y.sin());
                let psi = ScalarField::from_fn(g.clone(), |[y, _]| 0.1 * y.cos());
                let exact = u
                    .derivative(0)
                    .derivative(0)
                    .sub(&psi.derivative(0).zip_map(&u.derivative(0), |a, b| a * b))
                    .zip_map(&psi, |v, s| v * (-2.0 * s).exp());
                fd_laplacian_conformal(&u, &psi).unwrap().sub(&exact).sup_norm()
            })
            .collect();
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!((order - 2.0).abs() < 0.1, "order {order}");
        }
    }

    #[test]
    fn cyclic_solver_matches_dense_product() {
        let n = 7;
        let a: Vec<f64> = (0..n).map(|i| 0.3 + 0.01 * i as f64).collect();
        let b: Vec<f64> = (0..n).map(|i| -2.5 - 0.1 * i as f64).collect();
        let c: Vec<f64> = (0..n).map(|i| 0.7 - 0.02 * i as f64).collect();
        let x: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let r = apply_bands(&a, &b, &c, &x);
        let got = solve_cyclic_tridiagonal(&a, &b, &c, &r).unwrap();
        for (g, e) in got.iter().zip(&x) {
            assert!((g - e).abs() < 1e-13);
        }
    }

    #[test]
    fn constant_data_is_steady() {
        let g = circle(64);
        let u = ScalarField::constant(g.clone(), 2.5);
        let out = fd_heat_run(&u, &ScalarField::zeros(g), 1.0, &FdScheme::default()).unwrap();
        assert!(out.sub(&u).sup_norm() < 1e-13);
    }

    #[test]
    fn cosine_decay_matches_closed_form() {
        let g = circle(256);
        let u = ScalarField::from_fn(g.clone(), |[y, _]| y.cos());
        let scheme = FdScheme::crank_nicolson(1e-3, 256).unwrap();
        let out = fd_heat_run(&u, &ScalarField::zeros(g), 1.0, &scheme).unwrap();
        // The stencil sees cos y with eigenvalue (4/h²) sin²(h/2) = 1 - h²/12 + ...
        let h = std::f64::consts::TAU / 256.0;
        let lam = 4.0 / (h * h) * (h / 2.0).sin().powi(2);
        let amp = ((1.0 - 0.5e-3 * lam) / (1.0 + 0.5e-3 * lam)).powi(1000);
        assert!(out.sub(&u.scale(amp)).sup_norm() < 1e-12);
        let err = out.sub(&u.scale((-1.0f64).exp())).sup_norm();
        assert!(err < 2e-5, "{err}");
    }

    #[test]
    fn mean_is_conserved_per_step() {
        let g = circle(64);
        let u = ScalarField::from_fn(g.clone(), |[y, _]| 1.0 + y.sin() + 0.3 * (5.0 * y).cos());
        let scheme = FdScheme::crank_nicolson(1e-2, 64).unwrap();
        let mut cur = u.clone();
        for _ in 0..20 {
            let next = fd_heat_run(&cur, &ScalarField::zeros(g.clone()), 1e-2, &scheme).unwrap();
            assert!((next.mean() - cur.mean()).abs() < 1e-12);
            cur = next;
        }
    }

    #[test]
    fn backward_euler_obeys_maximum_principle() {
        let g = circle(64);
        let psi = ScalarField::from_fn(g.clone(), |[y, _]| 0.2 * y.sin());
        let mut u = ScalarField::from_fn(g.clone(), |[y, _]| (3.0 * y).cos() + 0.5 * y.sin());
        let scheme = FdScheme::new(5e-2, 1.0, 64).unwrap();
        for _ in 0..10 {
            let next = fd_heat_run(&u, &psi, 5e-2, &scheme).unwrap();
            let max = |f: &ScalarField<f64>| f.values().iter().cloned().fold(f64::MIN, f64::max);
            let min = |f: &ScalarField<f64>| f.values().iter().cloned().fold(f64::MAX, f64::min);
            assert!(max(&next) <= max(&u) + 1e-14);
            assert!(min(&next) >= min(&u) - 1e-14);
            u = next;
        }
    }

    #[test]
    fn explicit_scheme_rejects_unstable_step() {
        let g = circle(256);
        let u = ScalarField::from_fn(g.clone(), |[y, _]| y.cos());
        let scheme = FdScheme::new(1e-2, 0.0, 256).unwrap();
        assert!(fd_heat_run(&u, &ScalarField::zeros(g), 1.0, &scheme).is_err());
    }

    #[test]
    fn torus_run_matches_single_mode_decay() {
        let g = PeriodicGrid::<f64>::unit_torus(64).unwrap();
        let u = ScalarField::from_fn(g.clone(), |[a, b]| (a + 2.0 * b).sin());
        let scheme = FdScheme::crank_nicolson(1e-2, 64).unwrap();
        let out = fd_heat_run(&u, &ScalarField::zeros(g), 0.2, &scheme).unwrap();
        let err = out.sub(&u.scale((-1.0f64).exp())).sup_norm();
        assert!(err < 2e-3, "{err}");
    }

    #[test]
    fn torus_variable_psi_conserves_weighted_mean() {
        let g = PeriodicGrid::<f64>::unit_torus(32).unwrap();
        let psi = ScalarField::from_fn(g.clone(), |[a, b]| 0.2 * a.cos() * b.sin());
        let u = ScalarField::from_fn(g.clone(), |[a, b]| (a + b).sin() + 0.5);
        let scheme = FdScheme::crank_nicolson(1e-2, 32).unwrap();
        let out = fd_heat_run(&u, &psi, 0.5, &scheme).unwrap();
        let wmean = |f: &ScalarField<f64>| {
            f.values()
                .iter()
                .zip(psi.values())
                .map(|(v, s)| v * (2.0 * s).exp())
                .sum::<f64>()
        };
        assert!((wmean(&out) - wmean(&u)).abs() < 1e-10);
    }

    #[test]
    fn fd_mean_curvature_is_second_order() {
        let errs: Vec<f64> = [32usize, 64, 128]
            .iter()
            .map(|&m| {
                let g = ProductGrid::new(circle(4), circle(m));
                let state = ProductState::new(
                    ProductField::from_fn(g.clone(), |_, y| 0.2 * y[0].cos()),
                    ProductField::zeros(g),
                    0.0,
                )
                .unwrap();
                let fd = fd_mean_curvature_from_metric(&state);
                fd.sub(&twisted_mean_curvature(&state)).sup_norm()
            })
            .collect();
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!((order - 2.0).abs() < 0.1, "order {order}");
        }
        let g = ProductGrid::new(circle(4), circle(64));
        let flat = ProductState::flat(g);
        assert_eq!(fd_mean_curvature_from_metric(&flat).sup_norm(), 0.0);
    }
}
