//! Initial data as truncated real Fourier series on base × fiber.

use crate::error::{input, EgfError, Result};
use crate::geometry::{FiberVectorField, ProductField, ProductGrid, ProductState, VectorField};
use crate::grid::PeriodicGrid;
use crate::scalar::Real;

/// `cos · cos(k·z) + sin · sin(k·z)` with `k_j = 2π mode_j / L_j` and `z = (x, y)`.
#[derive(Clone, Debug, PartialEq)]
pub struct FourierTerm<T> {
    /// Mode numbers over the base axes followed by the fiber axes.
    pub mode: Vec<i64>,
    pub cos: T,
    pub sin: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FourierSeries<T> {
    pub constant: T,
    pub terms: Vec<FourierTerm<T>>,
}

impl<T: Real> Default for FourierSeries<T> {
    fn default() -> Self {
        Self::constant(T::zero())
    }
}

impl<T: Real> FourierSeries<T> {
    pub fn constant(c: T) -> Self {
        Self {
            constant: c,
            terms: Vec::new(),
        }
    }

    pub fn with_term(mut self, mode: Vec<i64>, cos: T, sin: T) -> Self {
        self.terms.push(FourierTerm { mode, cos, sin });
        self
    }

    pub fn is_zero(&self) -> bool {
        self.constant == T::zero()
            && self
                .terms
                .iter()
                .all(|t| t.cos == T::zero() && t.sin == T::zero())
    }

    /// Highest absolute mode number along each of the `n + p` axes.
    pub fn max_modes(&self, axes: usize) -> Vec<i64> {
        let mut out = vec![0; axes];
        for t in &self.terms {
            for (o, &m) in out.iter_mut().zip(&t.mode) {
                *o = (*o).max(m.abs());
            }
        }
        out
    }

    pub fn evaluate(&self, grid: &ProductGrid<T>) -> Result<ProductField<T>> {
        let n = grid.n();
        let p = grid.p();
        let axes = n + p;
        let mut wave = Vec::with_capacity(self.terms.len());
        for t in &self.terms {
            if t.mode.len() != axes {
                return Err(EgfError::DimensionMismatch {
                    expected: axes,
                    got: t.mode.len(),
                });
            }
            if !(t.cos.is_finite() && t.sin.is_finite()) {
                return Err(input("Fourier coefficients must be finite"));
            }
            let k: Vec<T> = (0..axes)
                .map(|j| {
                    let side = if j < n {
                        grid.base().sides()[j]
                    } else {
                        grid.fiber().sides()[j - n]
                    };
                    T::TAU() * T::from_i64(t.mode[j]).unwrap() / side
                })
                .collect();
            wave.push(k);
        }
        if !self.constant.is_finite() {
            return Err(input("Fourier constant must be finite"));
        }
        Ok(ProductField::from_fn(grid.clone(), |x, y| {
            let mut acc = self.constant;
            for (t, k) in self.terms.iter().zip(&wave) {
                let mut arg = T::zero();
                for j in 0..n {
                    arg += k[j] * x[j];
                }
                for j in 0..p {
                    arg += k[n + j] * y[j];
                }
                acc += t.cos * arg.cos() + t.sin * arg.sin();
            }
            acc
        }))
    }
}

/// Grid `M₁ × M₂` from side lengths and points per axis.
pub fn product_grid<T: Real>(
    base_sides: &[T],
    base_points: &[usize],
    fiber_sides: &[T],
    fiber_points: &[usize],
) -> Result<ProductGrid<T>> {
    Ok(ProductGrid::new(
        PeriodicGrid::new(base_sides.to_vec(), base_points.to_vec())?,
        PeriodicGrid::new(fiber_sides.to_vec(), fiber_points.to_vec())?,
    ))
}

/// `e^{2φ₀} g₁ ⊕ g₂`.
pub fn twisted_state<T: Real>(
    grid: &ProductGrid<T>,
    phi0: &FourierSeries<T>,
) -> Result<ProductState<T>> {
    ProductState::new(phi0.evaluate(grid)?, ProductField::zeros(grid.clone()), T::zero())
}

/// `e^{2φ₀} g₁ ⊕ e^{2ψ} g₂`.
pub fn double_twisted_state<T: Real>(
    grid: &ProductGrid<T>,
    phi0: &FourierSeries<T>,
    psi: &FourierSeries<T>,
) -> Result<ProductState<T>> {
    ProductState::new(phi0.evaluate(grid)?, psi.evaluate(grid)?, T::zero())
}

/// Fiber-tangent field with one series per fiber axis.
pub fn fiber_vector_field<T: Real>(
    grid: &ProductGrid<T>,
    components: &[FourierSeries<T>],
) -> Result<FiberVectorField<T>> {
    if components.len() != grid.p() {
        return Err(EgfError::DimensionMismatch {
            expected: grid.p(),
            got: components.len(),
        });
    }
    Ok(VectorField {
        components: components
            .iter()
            .map(|s| s.evaluate(grid))
            .collect::<Result<_>>()?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    fn grid() -> ProductGrid<f64> {
        product_grid(&[TAU], &[8], &[2.0 * TAU], &[32]).unwrap()
    }

    #[test]
    fn evaluates_modes_against_side_lengths() {
        let s = FourierSeries::constant(0.5).with_term(vec![1, 2], 0.3, -0.1);
        let f = s.evaluate(&grid()).unwrap();
        let g = grid();
        for b in 0..g.base_len() {
            let x = g.base().coords(b)[0];
            for j in 0..g.fiber_len() {
                let y = g.fiber().coords(j)[0];
                let arg = x + y;
                let want = 0.5 + 0.3 * arg.cos() - 0.1 * arg.sin();
                assert!((f.values()[g.index(b, j)] - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn rejects_wrong_mode_length() {
        let s = FourierSeries::constant(0.0).with_term(vec![1], 1.0, 0.0);
        assert!(matches!(
            s.evaluate(&grid()),
            Err(EgfError::DimensionMismatch { .. })
        ));
        assert!(fiber_vector_field(&grid(), &[]).is_err());
    }

    #[test]
    fn zero_series_is_zero() {
        assert!(FourierSeries::<f64>::default().is_zero());
        let s = FourierSeries::constant(0.0).with_term(vec![0, 1], 0.0, 0.0);
        assert!(s.is_zero());
        assert_eq!(s.max_modes(2), vec![0, 1]);
    }
}
