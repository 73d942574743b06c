//! Metric state on double-twisted products `M = M₁ × M₂` and the extrinsic
//! quantities of the two factor distributions.
//!
//! The metric is `g = e^{2φ} g₁ ⊕ e^{2ψ} g₂` with `g₁`, `g₂` flat. `D = TM₁` has
//! dimension `n`, `D⊥ = TM₂` has dimension `p`. Vector fields tangent to the fibers
//! are stored by their coordinate components `ξ^k` with respect to `∂/∂y^k`.
//!
//! With the trace convention `H = tr b`, the leaves `M₁ × {y}` have
//! `b(X, Y) = -g(X, Y) ∇⊥φ` and `H = -n ∇⊥φ`, where `∇⊥φ = e^{-2ψ} ∂_k φ ∂_k`.

use rayon::prelude::*;

use crate::error::{input, EgfError, Result};
use crate::grid::PeriodicGrid;
use crate::scalar::{from_usize, sup_abs, Real};
use crate::spectral::{d_perp, OneFormField, ScalarField};

/// Base grid × fiber grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ProductGrid<T> {
    base: PeriodicGrid<T>,
    fiber: PeriodicGrid<T>,
}

impl<T: Real> ProductGrid<T> {
    pub fn new(base: PeriodicGrid<T>, fiber: PeriodicGrid<T>) -> Self {
        Self { base, fiber }
    }

    pub fn base(&self) -> &PeriodicGrid<T> {
        &self.base
    }

    pub fn fiber(&self) -> &PeriodicGrid<T> {
        &self.fiber
    }

    /// `dim D`.
    pub fn n(&self) -> usize {
        self.base.dims()
    }

    /// `dim D⊥`.
    pub fn p(&self) -> usize {
        self.fiber.dims()
    }

    pub fn base_len(&self) -> usize {
        self.base.len()
    }

    pub fn fiber_len(&self) -> usize {
        self.fiber.len()
    }

    pub fn len(&self) -> usize {
        self.base.len() * self.fiber.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> T {
        self.base.cell_volume() * self.fiber.cell_volume()
    }

    #[inline]
    pub fn index(&self, base: usize, fiber: usize) -> usize {
        base * self.fiber.len() + fiber
    }
}

/// Real function on base × fiber, stored fiber-contiguous.
#[derive(Clone, Debug, PartialEq)]
pub struct ProductField<T> {
    grid: ProductGrid<T>,
    values: Vec<T>,
}

impl<T: Real> ProductField<T> {
    pub fn new(grid: ProductGrid<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(EgfError::DimensionMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        Ok(Self { grid, values })
    }

    /// Samples `f(x, y)` with `x` base and `y` fiber coordinates.
    pub fn from_fn(grid: ProductGrid<T>, f: impl Fn([T; 2], [T; 2]) -> T) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for b in 0..grid.base_len() {
            let x = grid.base.coords(b);
            for j in 0..grid.fiber_len() {
                values.push(f(x, grid.fiber.coords(j)));
            }
        }
        Self { grid, values }
    }

    pub fn constant(grid: ProductGrid<T>, c: T) -> Self {
        let values = vec![c; grid.len()];
        Self { grid, values }
    }

    pub fn zeros(grid: ProductGrid<T>) -> Self {
        Self::constant(grid, T::zero())
    }

    pub fn from_fibers(grid: ProductGrid<T>, fibers: Vec<ScalarField<T>>) -> Result<Self> {
        if fibers.len() != grid.base_len() {
            return Err(EgfError::DimensionMismatch {
                expected: grid.base_len(),
                got: fibers.len(),
            });
        }
        let mut values = Vec::with_capacity(grid.len());
        for f in fibers {
            if f.grid() != grid.fiber() {
                return Err(input("fiber field grid does not match product grid"));
            }
            values.extend(f.into_values());
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &ProductGrid<T> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn fiber_values(&self, b: usize) -> &[T] {
        let m = self.grid.fiber_len();
        &self.values[b * m..(b + 1) * m]
    }

    /// Restriction to the fiber over base point `b`.
    pub fn fiber(&self, b: usize) -> ScalarField<T> {
        ScalarField::new(self.grid.fiber.clone(), self.fiber_values(b).to_vec())
            .expect("fiber slice has fiber length")
    }

    /// Applies `f` to every fiber restriction, in parallel; output order is the
    /// base order regardless of scheduling.
    pub fn map_fibers<F>(&self, f: F) -> Self
    where
        F: Fn(usize, ScalarField<T>) -> ScalarField<T> + Sync + Send,
    {
        let fibers: Vec<ScalarField<T>> = (0..self.grid.base_len())
            .into_par_iter()
            .map(|b| f(b, self.fiber(b)))
            .collect();
        Self::from_fibers(self.grid.clone(), fibers).expect("fiber map preserves grids")
    }

    pub fn try_map_fibers<F>(&self, f: F) -> Result<Self>
    where
        F: Fn(usize, ScalarField<T>) -> Result<ScalarField<T>> + Sync + Send,
    {
        let fibers: Vec<ScalarField<T>> = (0..self.grid.base_len())
            .into_par_iter()
            .map(|b| f(b, self.fiber(b)))
            .collect::<Result<Vec<_>>>()?;
        Self::from_fibers(self.grid.clone(), fibers)
    }

    /// Spectral derivative along fiber axis `axis`.
    pub fn fiber_derivative(&self, axis: usize) -> Self {
        self.map_fibers(|_, f| f.derivative(axis))
    }

    /// Spectral derivative along base axis `axis`.
    pub fn base_derivative(&self, axis: usize) -> Self {
        let nb = self.grid.base_len();
        let m = self.grid.fiber_len();
        let lines: Vec<Vec<T>> = (0..m)
            .into_par_iter()
            .map(|j| {
                let line: Vec<T> = (0..nb).map(|b| self.values[b * m + j]).collect();
                ScalarField::new(self.grid.base.clone(), line)
                    .expect("base line has base length")
                    .derivative(axis)
                    .into_values()
            })
            .collect();
        let mut values = vec![T::zero(); self.grid.len()];
        for (j, line) in lines.iter().enumerate() {
            for (b, &v) in line.iter().enumerate() {
                values[b * m + j] = v;
            }
        }
        Self {
            grid: self.grid.clone(),
            values,
        }
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

    pub fn mul(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn scale(&self, s: T) -> Self {
        self.map(|v| v * s)
    }

    pub fn sup_norm(&self) -> T {
        sup_abs(&self.values)
    }

    /// Flat-measure fiber averages, one per base point.
    pub fn fiber_means(&self) -> Vec<T> {
        (0..self.grid.base_len())
            .map(|b| {
                let s = self.fiber_values(b).iter().fold(T::zero(), |a, &v| a + v);
                s / from_usize(self.grid.fiber_len())
            })
            .collect()
    }
}

/// Vector field by coordinate components, one [`ProductField`] per axis.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField<T> {
    pub components: Vec<ProductField<T>>,
}

/// Field tangent to the fibers (sections of `D⊥`), components along `∂/∂y^k`.
pub type FiberVectorField<T> = VectorField<T>;
/// Field tangent to the base (sections of `D`), components along `∂/∂x^i`.
pub type BaseVectorField<T> = VectorField<T>;

impl<T: Real> VectorField<T> {
    pub fn zeros(grid: &ProductGrid<T>, dims: usize) -> Self {
        Self {
            components: (0..dims).map(|_| ProductField::zeros(grid.clone())).collect(),
        }
    }

    pub fn dims(&self) -> usize {
        self.components.len()
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            components: self
                .components
                .iter()
                .zip(&other.components)
                .map(|(a, b)| a.add(b))
                .collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            components: self
                .components
                .iter()
                .zip(&other.components)
                .map(|(a, b)| a.sub(b))
                .collect(),
        }
    }

    pub fn scale(&self, s: T) -> Self {
        Self {
            components: self.components.iter().map(|c| c.scale(s)).collect(),
        }
    }

    /// Largest coordinate component in absolute value.
    pub fn sup_norm(&self) -> T {
        self.components
            .iter()
            .fold(T::zero(), |a, c| a.max(c.sup_norm()))
    }
}

/// Metric `e^{2φ} g₁ ⊕ e^{2ψ} g₂` at flow time `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProductState<T> {
    phi: ProductField<T>,
    psi: ProductField<T>,
    t: T,
}

impl<T: Real> ProductState<T> {
    pub fn new(phi: ProductField<T>, psi: ProductField<T>, t: T) -> Result<Self> {
        if phi.grid() != psi.grid() {
            return Err(input("phi and psi live on different grids"));
        }
        if phi.values().iter().chain(psi.values()).any(|v| !v.is_finite()) {
            return Err(input("phi and psi must be finite everywhere"));
        }
        if !t.is_finite() {
            return Err(input("state time must be finite"));
        }
        Ok(Self { phi, psi, t })
    }

    /// Plain product metric `g₁ ⊕ g₂`.
    pub fn flat(grid: ProductGrid<T>) -> Self {
        Self {
            phi: ProductField::zeros(grid.clone()),
            psi: ProductField::zeros(grid),
            t: T::zero(),
        }
    }

    pub fn grid(&self) -> &ProductGrid<T> {
        self.phi.grid()
    }

    pub fn n(&self) -> usize {
        self.grid().n()
    }

    pub fn p(&self) -> usize {
        self.grid().p()
    }

    /// `φ = log f₁`.
    pub fn phi(&self) -> &ProductField<T> {
        &self.phi
    }

    /// `ψ = log f₂`.
    pub fn psi(&self) -> &ProductField<T> {
        &self.psi
    }

    pub fn t(&self) -> T {
        self.t
    }

    /// Same fiber metric, new `φ` at time `t`.
    pub fn with_phi(&self, phi: ProductField<T>, t: T) -> Result<Self> {
        Self::new(phi, self.psi.clone(), t)
    }

    /// Whether `ψ` is constant along every fiber to within `tol`, which makes the
    /// leaf Laplacian a constant multiple of the flat one.
    pub fn psi_constant_along_fibers(&self, tol: T) -> bool {
        let m = self.grid().fiber_len();
        (0..self.grid().base_len()).all(|b| {
            let vals = &self.psi.values()[b * m..(b + 1) * m];
            let first = vals[0];
            vals.iter().all(|&v| (v - first).abs() <= tol)
        })
    }

    /// `ĝ` conformal factor `e^{2φ}`.
    pub fn base_factor(&self) -> ProductField<T> {
        self.phi.map(|v| (v + v).exp())
    }

    /// `g⊥` conformal factor `e^{2ψ}`.
    pub fn fiber_factor(&self) -> ProductField<T> {
        self.psi.map(|v| (v + v).exp())
    }
}

/// `∇⊥u`: fiber gradient with respect to `g⊥ = e^{2ψ} g₂`.
pub fn grad_perp<T: Real>(u: &ProductField<T>, state: &ProductState<T>) -> FiberVectorField<T> {
    let inv = state.psi.map(|v| (-(v + v)).exp());
    VectorField {
        components: (0..state.p())
            .map(|k| u.fiber_derivative(k).mul(&inv))
            .collect(),
    }
}

/// Mean curvature vector `H = -n ∇⊥φ` of the leaves `M₁ × {y}`.
pub fn twisted_mean_curvature<T: Real>(state: &ProductState<T>) -> FiberVectorField<T> {
    grad_perp(&state.phi, state).scale(-from_usize::<T>(state.n()))
}

/// `Div⊥ξ = Σ_k (∂_k ξ^k + p ∂_k ψ ξ^k)`, independent of `φ`.
pub fn div_perp<T: Real>(xi: &FiberVectorField<T>, state: &ProductState<T>) -> ProductField<T> {
    let p = from_usize::<T>(state.p());
    let mut acc = ProductField::zeros(state.grid().clone());
    for (k, c) in xi.components.iter().enumerate() {
        let dpsi = state.psi.fiber_derivative(k);
        let term = c
            .fiber_derivative(k)
            .add(&dpsi.mul(c).scale(p));
        acc = acc.add(&term);
    }
    acc
}

/// `Δ⊥u = Div⊥ ∇⊥u`.
pub fn laplacian_perp<T: Real>(u: &ProductField<T>, state: &ProductState<T>) -> ProductField<T> {
    div_perp(&grad_perp(u, state), state)
}

/// Full Riemannian divergence of a fiber-tangent field,
/// `e^{-w} Σ_k ∂_k(e^{w} ξ^k)` with `w = nφ + pψ`.
pub fn full_divergence<T: Real>(
    xi: &FiberVectorField<T>,
    state: &ProductState<T>,
) -> ProductField<T> {
    let n = from_usize::<T>(state.n());
    let p = from_usize::<T>(state.p());
    let w = state.phi.zip_map(&state.psi, |a, b| n * a + p * b);
    let ew = w.map(T::exp);
    let mut acc = ProductField::zeros(state.grid().clone());
    for (k, c) in xi.components.iter().enumerate() {
        acc = acc.add(&ew.mul(c).fiber_derivative(k));
    }
    acc.zip_map(&ew, |a, e| a / e)
}

/// `g(ξ, η)` for fiber-tangent fields.
pub fn inner_perp<T: Real>(
    a: &FiberVectorField<T>,
    b: &FiberVectorField<T>,
    state: &ProductState<T>,
) -> ProductField<T> {
    let mut acc = ProductField::zeros(state.grid().clone());
    for (x, y) in a.components.iter().zip(&b.components) {
        acc = acc.add(&x.mul(y));
    }
    acc.mul(&state.fiber_factor())
}

/// Directional derivative `ξ(u) = Σ_k ξ^k ∂_k u` along the fibers.
pub fn apply_vector<T: Real>(xi: &FiberVectorField<T>, u: &ProductField<T>) -> ProductField<T> {
    let mut acc = ProductField::zeros(u.grid().clone());
    for (k, c) in xi.components.iter().enumerate() {
        acc = acc.add(&c.mul(&u.fiber_derivative(k)));
    }
    acc
}

/// Density `e^{nφ + pψ}` of `dvol_g` against the flat Lebesgue measure.
pub fn volume_form_weight<T: Real>(state: &ProductState<T>) -> ProductField<T> {
    let n = from_usize::<T>(state.n());
    let p = from_usize::<T>(state.p());
    state.phi.zip_map(&state.psi, |a, b| (n * a + p * b).exp())
}

/// `∫_M f dvol_g` by the periodic trapezoidal rule.
pub fn integrate<T: Real>(f: &ProductField<T>, state: &ProductState<T>) -> T {
    let w = volume_form_weight(state);
    weighted_sum(f, &w) * state.grid().cell_volume()
}

/// Sum of `f · w`, reduced per fiber then over base points in a fixed order.
pub(crate) fn weighted_sum<T: Real>(f: &ProductField<T>, w: &ProductField<T>) -> T {
    let m = f.grid().fiber_len();
    let partial: Vec<T> = (0..f.grid().base_len())
        .into_par_iter()
        .map(|b| {
            f.values()[b * m..(b + 1) * m]
                .iter()
                .zip(&w.values()[b * m..(b + 1) * m])
                .fold(T::zero(), |a, (&x, &y)| a + x * y)
        })
        .collect();
    partial.into_iter().fold(T::zero(), |a, v| a + v)
}

/// `vol(M, g)`.
pub fn volume<T: Real>(state: &ProductState<T>) -> T {
    let one = ProductField::constant(state.grid().clone(), T::one());
    integrate(&one, state)
}

/// Second fundamental tensor of a distribution spanned by coordinate fields:
/// `entries[(i * rows + j) * normal + k]` is the `k`-th normal component of
/// `b(∂_i, ∂_j)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SecondFundamentalTensor<T> {
    pub rows: usize,
    pub normal: usize,
    pub entries: Vec<ProductField<T>>,
}

impl<T: Real> SecondFundamentalTensor<T> {
    pub fn entry(&self, i: usize, j: usize, k: usize) -> &ProductField<T> {
        &self.entries[(i * self.rows + j) * self.normal + k]
    }

    pub fn sup_norm(&self) -> T {
        self.entries
            .iter()
            .fold(T::zero(), |a, e| a.max(e.sup_norm()))
    }
}

/// Extrinsic data of `D` and `D⊥`.
#[derive(Clone, Debug, PartialEq)]
pub struct SecondFundamentalData<T> {
    /// `b` of `D`, normal components along `∂/∂y^k`.
    pub b: SecondFundamentalTensor<T>,
    /// `H = tr b`.
    pub h: FiberVectorField<T>,
    /// `b⊥` of `D⊥`, normal components along `∂/∂x^i`.
    pub bperp: SecondFundamentalTensor<T>,
    /// `H⊥ = tr b⊥`.
    pub hperp: BaseVectorField<T>,
    /// `sup |b - (1/n) H ĝ|`.
    pub umbilical_residual: T,
    /// `sup |b⊥ - (1/p) H⊥ g⊥|`.
    pub perp_umbilical_residual: T,
}

/// Second fundamental data from the Koszul formula on coordinate fields.
///
/// For `X, Y` tangent to one factor and `ξ` to the other, only the `-ξ g(X, Y)`
/// term survives, so `b(∂_i, ∂_j)^k = -½ g⊥^{kk} ∂_k g_{ij}` with spectral
/// derivatives of the metric coefficients.
pub fn second_fundamental_data<T: Real>(state: &ProductState<T>) -> SecondFundamentalData<T> {
    let n = state.n();
    let p = state.p();
    let half = T::one() / (T::one() + T::one());
    let gb = state.base_factor();
    let gf = state.fiber_factor();
    let inv_gb = gb.map(|v| T::one() / v);
    let inv_gf = gf.map(|v| T::one() / v);
    let zero = ProductField::zeros(state.grid().clone());

    let dgb: Vec<ProductField<T>> = (0..p).map(|k| gb.fiber_derivative(k)).collect();
    let mut b_entries = Vec::with_capacity(n * n * p);
    for i in 0..n {
        for j in 0..n {
            for dk in &dgb {
                b_entries.push(if i == j {
                    dk.mul(&inv_gf).scale(-half)
                } else {
                    zero.clone()
                });
            }
        }
    }
    let b = SecondFundamentalTensor {
        rows: n,
        normal: p,
        entries: b_entries,
    };
    let h = VectorField {
        components: (0..p)
            .map(|k| {
                (0..n).fold(zero.clone(), |acc, i| acc.add(&b.entry(i, i, k).mul(&inv_gb)))
            })
            .collect(),
    };
    let nf = from_usize::<T>(n);
    let mut umb = T::zero();
    for i in 0..n {
        for j in 0..n {
            for k in 0..p {
                let target = if i == j {
                    h.components[k].mul(&gb).scale(T::one() / nf)
                } else {
                    zero.clone()
                };
                umb = umb.max(b.entry(i, j, k).sub(&target).sup_norm());
            }
        }
    }

    let dgf: Vec<ProductField<T>> = (0..n).map(|i| gf.base_derivative(i)).collect();
    let mut bp_entries = Vec::with_capacity(p * p * n);
    for k in 0..p {
        for l in 0..p {
            for di in &dgf {
                bp_entries.push(if k == l {
                    di.mul(&inv_gb).scale(-half)
                } else {
                    zero.clone()
                });
            }
        }
    }
    let bperp = SecondFundamentalTensor {
        rows: p,
        normal: n,
        entries: bp_entries,
    };
    let hperp = VectorField {
        components: (0..n)
            .map(|i| {
                (0..p).fold(zero.clone(), |acc, k| {
                    acc.add(&bperp.entry(k, k, i).mul(&inv_gf))
                })
            })
            .collect(),
    };
    let pf = from_usize::<T>(p);
    let mut perp_umb = T::zero();
    for k in 0..p {
        for l in 0..p {
            for i in 0..n {
                let target = if k == l {
                    hperp.components[i].mul(&gf).scale(T::one() / pf)
                } else {
                    zero.clone()
                };
                perp_umb = perp_umb.max(bperp.entry(k, l, i).sub(&target).sup_norm());
            }
        }
    }

    SecondFundamentalData {
        b,
        h,
        bperp,
        hperp,
        umbilical_residual: umb,
        perp_umbilical_residual: perp_umb,
    }
}

/// Second fundamental form and mean curvature of `D` after the change
/// `g ↦ (e^{2δ} ĝ) ⊕ g⊥`:
/// `b̃ = e^{2δ}(b - (∇⊥δ) ĝ)`, `H̃ = H - n ∇⊥δ`.
///
/// `state` describes the metric before the change.
pub fn conformal_change<T: Real>(
    b: &SecondFundamentalTensor<T>,
    h: &FiberVectorField<T>,
    delta: &ProductField<T>,
    state: &ProductState<T>,
) -> (SecondFundamentalTensor<T>, FiberVectorField<T>) {
    let n = b.rows;
    let grad = grad_perp(delta, state);
    let gb = state.base_factor();
    let e2d = delta.map(|v| (v + v).exp());
    let mut entries = Vec::with_capacity(b.entries.len());
    for i in 0..n {
        for j in 0..n {
            for k in 0..b.normal {
                let mut e = b.entry(i, j, k).clone();
                if i == j {
                    e = e.sub(&grad.components[k].mul(&gb));
                }
                entries.push(e.mul(&e2d));
            }
        }
    }
    let bt = SecondFundamentalTensor {
        rows: n,
        normal: b.normal,
        entries,
    };
    let ht = h.sub(&grad.scale(from_usize(n)));
    (bt, ht)
}

/// Umbilical / harmonic / totally geodesic flags of one distribution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExtrinsicFlags {
    pub umbilical: bool,
    pub harmonic: bool,
    pub totally_geodesic: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Classification<T> {
    pub d: ExtrinsicFlags,
    pub d_perp: ExtrinsicFlags,
    pub umbilical_residual: T,
    pub perp_umbilical_residual: T,
    /// `sup |H|_g`.
    pub h_sup: T,
    /// `sup |H⊥|_g`.
    pub hperp_sup: T,
}

/// Classifies `D` and `D⊥` at tolerance `tol` on the residuals and `g`-lengths.
pub fn classify<T: Real>(state: &ProductState<T>, tol: T) -> Classification<T> {
    let data = second_fundamental_data(state);
    classify_data(state, &data, tol)
}

pub fn classify_data<T: Real>(
    state: &ProductState<T>,
    data: &SecondFundamentalData<T>,
    tol: T,
) -> Classification<T> {
    let h_len = inner_perp(&data.h, &data.h, state).map(T::sqrt);
    let mut hp2 = ProductField::zeros(state.grid().clone());
    for c in &data.hperp.components {
        hp2 = hp2.add(&c.mul(c));
    }
    let hperp_len = hp2.mul(&state.base_factor()).map(T::sqrt);
    let h_sup = h_len.sup_norm();
    let hperp_sup = hperp_len.sup_norm();
    let flags = |umb: T, hs: T| {
        let umbilical = umb < tol;
        let harmonic = hs < tol;
        ExtrinsicFlags {
            umbilical,
            harmonic,
            totally_geodesic: umbilical && harmonic,
        }
    };
    Classification {
        d: flags(data.umbilical_residual, h_sup),
        d_perp: flags(data.perp_umbilical_residual, hperp_sup),
        umbilical_residual: data.umbilical_residual,
        perp_umbilical_residual: data.perp_umbilical_residual,
        h_sup,
        hperp_sup,
    }
}

/// 1-form `θ_ξ = g⊥(ξ, ·)` on the fiber over base point `b`.
pub fn fiber_oneform<T: Real>(
    xi: &FiberVectorField<T>,
    state: &ProductState<T>,
    b: usize,
) -> OneFormField<T> {
    let gf = state.fiber_factor().fiber(b);
    OneFormField::new(
        xi.components
            .iter()
            .map(|c| c.fiber(b).zip_map(&gf, |a, w| a * w))
            .collect(),
    )
    .expect("one component per fiber axis")
}

/// `sup_M |d⊥θ_ξ|`, zero for one-dimensional fibers.
pub fn dtheta_sup<T: Real>(xi: &FiberVectorField<T>, state: &ProductState<T>) -> T {
    if state.p() < 2 {
        return T::zero();
    }
    let parts: Vec<T> = (0..state.grid().base_len())
        .into_par_iter()
        .map(|b| d_perp(&fiber_oneform(xi, state, b)).sup_norm())
        .collect();
    parts.into_iter().fold(T::zero(), T::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    fn grid_1x1(nb: usize, nf: usize) -> ProductGrid<f64> {
        ProductGrid::new(
            PeriodicGrid::unit_circle(nb).unwrap(),
            PeriodicGrid::unit_circle(nf).unwrap(),
        )
    }

    fn twisted(phi: impl Fn([f64; 2], [f64; 2]) -> f64, psi: f64) -> ProductState<f64> {
        let g = grid_1x1(8, 64);
        ProductState::new(
            ProductField::from_fn(g.clone(), phi),
            ProductField::constant(g, psi),
            0.0,
        )
        .unwrap()
    }

    #[test]
    fn mean_curvature_of_fiber_independent_phi_vanishes() {
        let s = twisted(|x, _| 0.3 * x[0].sin(), 0.0);
        assert!(twisted_mean_curvature(&s).sup_norm() < 1e-15);
    }

    #[test]
    fn mean_curvature_of_cosine_profile() {
        let s = twisted(|_, y| 0.2 * y[0].cos(), 0.0);
        let h = twisted_mean_curvature(&s);
        let expect = ProductField::from_fn(s.grid().clone(), |_, y| 0.2 * y[0].sin());
        assert!(h.components[0].sub(&expect).sup_norm() < 1e-14);

        let s = twisted(|_, y| 0.2 * y[0].cos(), 0.1);
        let h = twisted_mean_curvature(&s);
        let expect = expect.scale((-0.2f64).exp());
        assert!(h.components[0].sub(&expect).sup_norm() < 1e-14);
    }

    #[test]
    fn divergence_examples() {
        let s = twisted(|_, _| 0.0, 0.0);
        let g = s.grid().clone();
        let c = VectorField {
            components: vec![ProductField::constant(g.clone(), 0.4)],
        };
        assert!(div_perp(&c, &s).sup_norm() < 1e-15);
        let xi = VectorField {
            components: vec![ProductField::from_fn(g.clone(), |_, y| 0.2 * y[0].sin())],
        };
        let expect = ProductField::from_fn(g.clone(), |_, y| 0.2 * y[0].cos());
        assert!(div_perp(&xi, &s).sub(&expect).sup_norm() < 1e-14);
        let u = ProductField::from_fn(g.clone(), |_, y| y[0].cos());
        let err = laplacian_perp(&u, &s).add(&u).sup_norm();
        assert!(err < 1e-12, "{err}");
    }

    #[test]
    fn volume_of_scaled_torus() {
        let s = twisted(|_, _| 0.0, 0.0);
        assert!((volume(&s) - TAU * TAU).abs() < 1e-12);
        let s = twisted(|_, _| 0.3, 0.0);
        assert!((volume(&s) - 0.3f64.exp() * TAU * TAU).abs() < 1e-11);
    }

    #[test]
    fn product_metric_is_totally_geodesic() {
        let s = twisted(|_, _| 0.5, -0.2);
        let c = classify(&s, 1e-10);
        assert!(c.d.totally_geodesic && c.d_perp.totally_geodesic);
    }

    #[test]
    fn twisted_state_is_umbilical_not_harmonic() {
        let s = twisted(|_, y| 0.2 * y[0].cos(), 0.0);
        let c = classify(&s, 1e-10);
        assert!(c.d.umbilical);
        assert!(!c.d.harmonic);
        assert!(c.d_perp.totally_geodesic);
    }

    #[test]
    fn conformal_change_with_constant_shift() {
        let s = twisted(|_, y| 0.2 * y[0].cos(), 0.0);
        let data = second_fundamental_data(&s);
        let c = 0.35;
        let delta = ProductField::constant(s.grid().clone(), c);
        let (bt, ht) = conformal_change(&data.b, &data.h, &delta, &s);
        assert!(ht.sub(&data.h).sup_norm() < 1e-15);
        for (a, b) in bt.entries.iter().zip(&data.b.entries) {
            assert!(a.sub(&b.scale((2.0 * c).exp())).sup_norm() < 1e-14);
        }
    }

    #[test]
    fn conformal_change_from_flat() {
        let s = twisted(|_, _| 0.0, 0.0);
        let data = second_fundamental_data(&s);
        let delta = ProductField::from_fn(s.grid().clone(), |_, y| 0.2 * y[0].cos());
        let (_, ht) = conformal_change(&data.b, &data.h, &delta, &s);
        let expect = ProductField::from_fn(s.grid().clone(), |_, y| 0.2 * y[0].sin());
        assert!(ht.components[0].sub(&expect).sup_norm() < 1e-14);
    }

    #[test]
    fn mismatched_fields_are_rejected() {
        let g = grid_1x1(8, 16);
        assert!(ProductField::new(g.clone(), vec![0.0; 3]).is_err());
        let phi = ProductField::constant(g.clone(), f64::NAN);
        assert!(ProductState::new(phi, ProductField::zeros(g), 0.0).is_err());
    }
}
