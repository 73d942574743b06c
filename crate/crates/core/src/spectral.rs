//! Exact heat-equation machinery on flat fibers.
//!
//! Real fields live nodally in [`ScalarField`]; [`SpectralField`] holds their Fourier
//! coefficients normalized so that mode `0` equals the fiber average. Evolution
//! operators act as exact multipliers on the coefficients:
//!
//! * heat semigroup: `û_l ↦ e^{-λ_l t} û_l`
//! * time integral of the semigroup: `û_l ↦ (1 - e^{-λ_l t}) / λ_l · û_l`, and `t · û_0`
//!
//! with `λ_l = Σ_k (2π l_k / L_k)²` the eigenvalues of `-Δ` on the flat torus.

use num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{input, EgfError, Result};
use crate::grid::PeriodicGrid;
use crate::scalar::{from_usize, lit, sup_abs, Real};

fn fft_in_place<T: Real>(grid: &PeriodicGrid<T>, data: &mut [Complex<T>], inverse: bool) {
    let mut planner = FftPlanner::<T>::new();
    let dims = grid.dims();
    for axis in 0..dims {
        let n = grid.points()[axis];
        let fft = if inverse {
            planner.plan_fft_inverse(n)
        } else {
            planner.plan_fft_forward(n)
        };
        let stride = grid.stride(axis);
        if stride == 1 {
            fft.process(data);
        } else {
            let mut line = vec![Complex::new(T::zero(), T::zero()); n];
            for col in 0..stride {
                for (i, v) in line.iter_mut().enumerate() {
                    *v = data[i * stride + col];
                }
                fft.process(&mut line);
                for (i, v) in line.iter().enumerate() {
                    data[i * stride + col] = *v;
                }
            }
        }
    }
    if !inverse {
        let scale = T::one() / from_usize(grid.len());
        for v in data.iter_mut() {
            *v *= scale;
        }
    }
}

/// Real-valued function sampled on a fiber grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField<T> {
    grid: PeriodicGrid<T>,
    values: Vec<T>,
}

impl<T: Real> ScalarField<T> {
    pub fn new(grid: PeriodicGrid<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(EgfError::DimensionMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        Ok(Self { grid, values })
    }

    /// Samples `f(x)` at every grid node; unused coordinates are zero.
    pub fn from_fn(grid: PeriodicGrid<T>, f: impl Fn([T; 2]) -> T) -> Self {
        let values = (0..grid.len()).map(|i| f(grid.coords(i))).collect();
        Self { grid, values }
    }

    pub fn constant(grid: PeriodicGrid<T>, c: T) -> Self {
        let values = vec![c; grid.len()];
        Self { grid, values }
    }

    pub fn zeros(grid: PeriodicGrid<T>) -> Self {
        Self::constant(grid, T::zero())
    }

    pub fn grid(&self) -> &PeriodicGrid<T> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    /// Trapezoidal integral over the fiber (flat measure).
    pub fn integral(&self) -> T {
        self.values.iter().fold(T::zero(), |a, &v| a + v) * self.grid.cell_volume()
    }

    /// Fiber average.
    pub fn mean(&self) -> T {
        self.values.iter().fold(T::zero(), |a, &v| a + v) / from_usize(self.values.len())
    }

    /// `L²` norm with respect to the flat measure.
    pub fn l2_norm(&self) -> T {
        (self.values.iter().fold(T::zero(), |a, &v| a + v * v) * self.grid.cell_volume()).sqrt()
    }

    pub fn sup_norm(&self) -> T {
        sup_abs(&self.values)
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        debug_assert_eq!(self.grid, other.grid);
        Self {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, s: T) -> Self {
        self.map(|v| v * s)
    }

    pub fn to_spectral(&self) -> SpectralField<T> {
        let mut coeffs: Vec<Complex<T>> = self
            .values
            .iter()
            .map(|&v| Complex::new(v, T::zero()))
            .collect();
        fft_in_place(&self.grid, &mut coeffs, false);
        let mut s = SpectralField {
            grid: self.grid.clone(),
            coeffs,
        };
        s.enforce_symmetry();
        s
    }

    /// Spectral partial derivative along `axis`.
    pub fn derivative(&self, axis: usize) -> Self {
        self.to_spectral().derivative(axis).to_nodal()
    }

    /// Spectral flat Laplacian.
    pub fn laplacian(&self) -> Self {
        self.to_spectral().laplacian().to_nodal()
    }

    /// Trigonometric interpolation onto `points` samples per axis.
    pub fn resample(&self, points: &[usize]) -> Result<Self> {
        let target = self.grid.with_points(points.to_vec())?;
        Ok(self.to_spectral().resample(&target).to_nodal())
    }
}

/// Fourier coefficients of a real fiber field, normalized so that the mode-0
/// coefficient is the fiber average.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField<T> {
    grid: PeriodicGrid<T>,
    coeffs: Vec<Complex<T>>,
}

impl<T: Real> SpectralField<T> {
    pub fn new(grid: PeriodicGrid<T>, coeffs: Vec<Complex<T>>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(EgfError::DimensionMismatch {
                expected: grid.len(),
                got: coeffs.len(),
            });
        }
        let mut s = Self { grid, coeffs };
        s.enforce_symmetry();
        Ok(s)
    }

    pub fn grid(&self) -> &PeriodicGrid<T> {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex<T>] {
        &self.coeffs
    }

    /// Coefficient of a mode vector, zero if the mode is not resolved.
    pub fn coeff(&self, mode: &[i64]) -> Complex<T> {
        let mut idx = [0usize; 2];
        for (k, &l) in mode.iter().enumerate() {
            let n = self.grid.points()[k] as i64;
            if l.abs() > n / 2 {
                return Complex::new(T::zero(), T::zero());
            }
            idx[k] = l.rem_euclid(n) as usize;
        }
        self.coeffs[self.grid.flatten(idx)]
    }

    /// Fiber average (the mode-0 coefficient).
    pub fn mean(&self) -> T {
        self.coeffs[0].re
    }

    /// Sum of `|û_l|` over nonzero modes; bounds the sup norm of the zero-mean part.
    pub fn nonzero_mode_l1(&self) -> T {
        self.coeffs
            .iter()
            .skip(1)
            .fold(T::zero(), |a, c| a + c.norm())
    }

    pub fn to_nodal(&self) -> ScalarField<T> {
        let mut data = self.coeffs.clone();
        fft_in_place(&self.grid, &mut data, true);
        ScalarField {
            grid: self.grid.clone(),
            values: data.into_iter().map(|c| c.re).collect(),
        }
    }

    /// Replaces every coefficient by the average of itself and the conjugate of its
    /// mirror mode, making the represented field exactly real.
    pub fn enforce_symmetry(&mut self) {
        let snapshot = self.coeffs.clone();
        for (i, c) in self.coeffs.iter_mut().enumerate() {
            let j = self.grid.conjugate_index(i);
            *c = (snapshot[i] + snapshot[j].conj()) * lit::<T>(0.5);
        }
    }

    /// Eigenvalue of `-Δ` for a flat spectral index.
    pub fn eigenvalue_at(&self, flat: usize) -> T {
        let idx = self.grid.unflatten(flat);
        (0..self.grid.dims()).fold(T::zero(), |a, k| {
            let w = self.grid.wavenumber(k, idx[k]);
            a + w * w
        })
    }

    /// Applies a real multiplier `m(λ_l, flat index)` to every coefficient.
    pub fn apply_multiplier(&self, m: impl Fn(T, usize) -> T) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, &c)| c * m(self.eigenvalue_at(i), i))
            .collect();
        let mut out = Self {
            grid: self.grid.clone(),
            coeffs,
        };
        out.enforce_symmetry();
        out
    }

    pub fn derivative(&self, axis: usize) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                let idx = self.grid.unflatten(i);
                if self.grid.is_nyquist(axis, idx[axis]) {
                    Complex::new(T::zero(), T::zero())
                } else {
                    c * Complex::new(T::zero(), self.grid.wavenumber(axis, idx[axis]))
                }
            })
            .collect();
        let mut out = Self {
            grid: self.grid.clone(),
            coeffs,
        };
        out.enforce_symmetry();
        out
    }

    pub fn laplacian(&self) -> Self {
        self.apply_multiplier(|lambda, _| -lambda)
    }

    /// Inverse of `∂_axis` on modes with nonzero wavenumber along `axis`; the
    /// remaining modes are dropped.
    pub fn antiderivative(&self, axis: usize) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                let idx = self.grid.unflatten(i);
                let k = self.grid.wavenumber(axis, idx[axis]);
                if k == T::zero() || self.grid.is_nyquist(axis, idx[axis]) {
                    Complex::new(T::zero(), T::zero())
                } else {
                    c / Complex::new(T::zero(), k)
                }
            })
            .collect();
        let mut out = Self {
            grid: self.grid.clone(),
            coeffs,
        };
        out.enforce_symmetry();
        out
    }

    /// Zero-pads or truncates onto a grid with the same sides.
    pub fn resample(&self, target: &PeriodicGrid<T>) -> Self {
        let dims = self.grid.dims();
        let half = lit::<T>(0.5);
        let mut out = vec![Complex::new(T::zero(), T::zero()); target.len()];
        let axis_targets = |axis: usize, i: usize| -> Vec<(usize, T)> {
            let l = self.grid.mode_number(axis, i);
            let n_old = self.grid.points()[axis] as i64;
            let m = target.points()[axis] as i64;
            let bin = |l: i64| l.rem_euclid(m) as usize;
            if l == n_old / 2 && m > n_old {
                vec![(bin(l), half), (bin(-l), half)]
            } else if l.abs() < m / 2 {
                vec![(bin(l), T::one())]
            } else if l.abs() == m / 2 {
                vec![((m / 2) as usize, T::one())]
            } else {
                vec![]
            }
        };
        for (flat, &c) in self.coeffs.iter().enumerate() {
            let idx = self.grid.unflatten(flat);
            let t0 = axis_targets(0, idx[0]);
            let t1 = if dims == 2 {
                axis_targets(1, idx[1])
            } else {
                vec![(0, T::one())]
            };
            for &(b0, w0) in &t0 {
                for &(b1, w1) in &t1 {
                    out[target.flatten([b0, b1])] += c * (w0 * w1);
                }
            }
        }
        let mut s = Self {
            grid: target.clone(),
            coeffs: out,
        };
        s.enforce_symmetry();
        s
    }
}

/// Eigenvalue `Σ_k (2π l_k / L_k)²` of `-Δ` on the flat fiber for mode `l`.
pub fn eigenvalue<T: Real>(mode: &[i64], grid: &PeriodicGrid<T>) -> Result<T> {
    if mode.len() != grid.dims() {
        return Err(EgfError::DimensionMismatch {
            expected: grid.dims(),
            got: mode.len(),
        });
    }
    Ok(mode
        .iter()
        .zip(grid.sides())
        .fold(T::zero(), |a, (&l, &side)| {
            let k = T::TAU() * T::from_i64(l).unwrap() / side;
            a + k * k
        }))
}

fn check_time<T: Real>(t: T) -> Result<()> {
    if t.is_finite() && t >= T::zero() {
        Ok(())
    } else {
        Err(input(format!("time must be finite and nonnegative, got {t}")))
    }
}

/// Exact solution of `∂_t u = Δu` at time `t`.
pub fn heat_evolve<T: Real>(u0: &SpectralField<T>, t: T) -> Result<SpectralField<T>> {
    check_time(t)?;
    Ok(u0.apply_multiplier(|lambda, _| (-lambda * t).exp()))
}

/// `∫_0^t u(s) ds` for the heat flow `u` started at `u0`.
pub fn heat_time_integral<T: Real>(u0: &SpectralField<T>, t: T) -> Result<SpectralField<T>> {
    check_time(t)?;
    Ok(u0.apply_multiplier(|lambda, _| {
        if lambda == T::zero() {
            t
        } else {
            -(-lambda * t).exp_m1() / lambda
        }
    }))
}

/// `lim_{t→∞} ∫_0^t (u(s) - ū) ds`: nonzero modes divided by their eigenvalue.
///
/// The mean is excluded; for zero-mean data this is the limit of
/// [`heat_time_integral`].
pub fn heat_time_integral_limit<T: Real>(u0: &SpectralField<T>) -> SpectralField<T> {
    u0.apply_multiplier(|lambda, _| {
        if lambda == T::zero() {
            T::zero()
        } else {
            T::one() / lambda
        }
    })
}

/// Truncated heat kernel `Σ_{|l_k| ≤ cutoff} e^{-λ_l t} φ_l(x) φ̄_l(y)` with
/// `L²`-normalized eigenfunctions `φ_l = e^{i k·x} / √vol`.
pub fn heat_kernel_eval<T: Real>(
    t: T,
    x: &[T],
    y: &[T],
    grid: &PeriodicGrid<T>,
    cutoff: usize,
) -> Result<T> {
    if !(t.is_finite() && t > T::zero()) {
        return Err(input(format!("heat kernel requires t > 0, got {t}")));
    }
    if cutoff == 0 {
        return Err(input("heat kernel cutoff must be at least 1"));
    }
    let p = grid.dims();
    if x.len() != p || y.len() != p {
        return Err(EgfError::DimensionMismatch {
            expected: p,
            got: x.len().min(y.len()),
        });
    }
    let c = cutoff as i64;
    let diff: Vec<T> = x.iter().zip(y).map(|(&a, &b)| a - b).collect();
    let mut sum = T::zero();
    let mut mode = vec![0i64; p];
    let range: Vec<i64> = (-c..=c).collect();
    let outer = if p == 2 { range.clone() } else { vec![0] };
    for &l0 in &range {
        for &l1 in &outer {
            mode[0] = l0;
            if p == 2 {
                mode[1] = l1;
            }
            let lambda = eigenvalue(&mode, grid)?;
            let phase = mode
                .iter()
                .zip(grid.sides())
                .zip(&diff)
                .fold(T::zero(), |a, ((&l, &side), &d)| {
                    a + T::TAU() * T::from_i64(l).unwrap() / side * d
                });
            sum += (-lambda * t).exp() * phase.cos();
        }
    }
    Ok(sum / grid.volume())
}

/// 1-form `θ = θ_i dx^i` on a flat fiber, one coefficient function per axis.
#[derive(Clone, Debug, PartialEq)]
pub struct OneFormField<T> {
    grid: PeriodicGrid<T>,
    components: Vec<ScalarField<T>>,
}

impl<T: Real> OneFormField<T> {
    pub fn new(components: Vec<ScalarField<T>>) -> Result<Self> {
        let grid = components
            .first()
            .ok_or_else(|| input("1-form needs at least one component"))?
            .grid()
            .clone();
        if components.len() != grid.dims() {
            return Err(EgfError::DimensionMismatch {
                expected: grid.dims(),
                got: components.len(),
            });
        }
        if components.iter().any(|c| c.grid() != &grid) {
            return Err(input("1-form components live on different grids"));
        }
        Ok(Self { grid, components })
    }

    /// Form with the given constant coefficients.
    pub fn constant(grid: PeriodicGrid<T>, coeffs: &[T]) -> Result<Self> {
        Self::new(
            coeffs
                .iter()
                .map(|&c| ScalarField::constant(grid.clone(), c))
                .collect(),
        )
    }

    pub fn grid(&self) -> &PeriodicGrid<T> {
        &self.grid
    }

    pub fn components(&self) -> &[ScalarField<T>] {
        &self.components
    }

    pub fn component(&self, i: usize) -> &ScalarField<T> {
        &self.components[i]
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            grid: self.grid.clone(),
            components: self
                .components
                .iter()
                .zip(&other.components)
                .map(|(a, b)| a.sub(b))
                .collect(),
        }
    }

    /// `L²` norm `(Σ_i ∫ θ_i²)^{1/2}` in the flat metric.
    pub fn l2_norm(&self) -> T {
        self.components
            .iter()
            .fold(T::zero(), |a, c| {
                let n = c.l2_norm();
                a + n * n
            })
            .sqrt()
    }

    pub fn sup_norm(&self) -> T {
        self.components
            .iter()
            .fold(T::zero(), |a, c| a.max(c.sup_norm()))
    }
}

/// Coefficients of a 2-form `Σ_{i<j} ω_{ij} dx^i ∧ dx^j`; empty for `p = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoFormField<T> {
    pub components: Vec<ScalarField<T>>,
}

impl<T: Real> TwoFormField<T> {
    pub fn sup_norm(&self) -> T {
        self.components
            .iter()
            .fold(T::zero(), |a, c| a.max(c.sup_norm()))
    }
}

/// Exterior derivative along the fiber: `(dθ)_{ij} = ∂_i θ_j - ∂_j θ_i`.
pub fn d_perp<T: Real>(w: &OneFormField<T>) -> TwoFormField<T> {
    let p = w.grid.dims();
    let mut components = Vec::new();
    for i in 0..p {
        for j in i + 1..p {
            let dij = w.components[j].derivative(i);
            let dji = w.components[i].derivative(j);
            components.push(dij.sub(&dji));
        }
    }
    TwoFormField { components }
}

/// Codifferential along a flat fiber: `δθ = -Σ_k ∂_k θ_k`.
pub fn delta_perp<T: Real>(w: &OneFormField<T>) -> ScalarField<T> {
    let mut acc = ScalarField::zeros(w.grid.clone());
    for (k, c) in w.components.iter().enumerate() {
        acc = acc.sub(&c.derivative(k));
    }
    acc
}

/// Harmonic iff both `dθ` and `δθ` vanish within `tol` in sup norm.
pub fn is_harmonic<T: Real>(w: &OneFormField<T>, tol: T) -> bool {
    d_perp(w).sup_norm() < tol && delta_perp(w).sup_norm() < tol
}

/// Hodge heat flow `∂_t θ = Δ_d θ`; on a flat fiber each coefficient follows the
/// scalar heat equation.
pub fn oneform_heat_evolve<T: Real>(w0: &OneFormField<T>, t: T) -> Result<OneFormField<T>> {
    let components = w0
        .components
        .iter()
        .map(|c| heat_evolve(&c.to_spectral(), t).map(|s| s.to_nodal()))
        .collect::<Result<Vec<_>>>()?;
    OneFormField::new(components)
}

/// `t → ∞` limit of [`oneform_heat_evolve`]: the harmonic form with constant
/// coefficients equal to the fiber averages.
pub fn oneform_harmonic_limit<T: Real>(w0: &OneFormField<T>) -> OneFormField<T> {
    OneFormField {
        grid: w0.grid.clone(),
        components: w0
            .components
            .iter()
            .map(|c| ScalarField::constant(w0.grid.clone(), c.mean()))
            .collect(),
    }
}
