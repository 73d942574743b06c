//! Uniform periodic grids on flat circles and 2-tori.
//!
//! Samples sit at `x_k = i * L_k / N_k`, `i = 0..N_k`. Multi-dimensional data is
//! stored row-major: the last axis varies fastest.

use crate::error::{input, EgfError, Result};
use crate::scalar::{from_usize, Real};

/// A flat periodic grid of dimension 1 or 2.
///
/// Used both for the fiber (the leaf of the orthogonal foliation) and for the base.
#[derive(Clone, Debug, PartialEq)]
pub struct PeriodicGrid<T> {
    sides: Vec<T>,
    points: Vec<usize>,
}

/// Grid carried by a fiber of the fibration.
pub type FiberGrid<T> = PeriodicGrid<T>;

impl<T: Real> PeriodicGrid<T> {
    pub fn new(sides: Vec<T>, points: Vec<usize>) -> Result<Self> {
        if sides.is_empty() || sides.len() > 2 {
            return Err(input(format!(
                "grid dimension must be 1 or 2, got {}",
                sides.len()
            )));
        }
        if sides.len() != points.len() {
            return Err(EgfError::DimensionMismatch {
                expected: sides.len(),
                got: points.len(),
            });
        }
        for &l in &sides {
            if !(l.is_finite() && l > T::zero()) {
                return Err(input(format!("grid side must be positive and finite, got {l}")));
            }
        }
        for &n in &points {
            if n < 4 || !n.is_power_of_two() {
                return Err(input(format!(
                    "grid points per dimension must be a power of two >= 4, got {n}"
                )));
            }
        }
        Ok(Self { sides, points })
    }

    pub fn circle(length: T, points: usize) -> Result<Self> {
        Self::new(vec![length], vec![points])
    }

    /// Circle of radius one, length `2π`.
    pub fn unit_circle(points: usize) -> Result<Self> {
        Self::circle(T::TAU(), points)
    }

    pub fn torus(sides: [T; 2], points: [usize; 2]) -> Result<Self> {
        Self::new(sides.to_vec(), points.to_vec())
    }

    /// Square torus with sides `2π`.
    pub fn unit_torus(points: usize) -> Result<Self> {
        Self::torus([T::TAU(), T::TAU()], [points, points])
    }

    #[inline]
    pub fn dims(&self) -> usize {
        self.sides.len()
    }

    #[inline]
    pub fn sides(&self) -> &[T] {
        &self.sides
    }

    #[inline]
    pub fn points(&self) -> &[usize] {
        &self.points
    }

    /// Total number of samples.
    #[inline]
    pub fn len(&self) -> usize {
        self.points.iter().product()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn spacing(&self, axis: usize) -> T {
        self.sides[axis] / from_usize(self.points[axis])
    }

    /// Flat (Lebesgue) volume `∏ L_k`.
    pub fn volume(&self) -> T {
        self.sides.iter().fold(T::one(), |acc, &l| acc * l)
    }

    /// Volume of one grid cell, the trapezoidal weight on a periodic grid.
    pub fn cell_volume(&self) -> T {
        (0..self.dims()).fold(T::one(), |acc, k| acc * self.spacing(k))
    }

    /// Stride of `axis` in the row-major layout.
    #[inline]
    pub fn stride(&self, axis: usize) -> usize {
        self.points[axis + 1..].iter().product()
    }

    /// Per-axis indices of a flat index.
    #[inline]
    pub fn unflatten(&self, flat: usize) -> [usize; 2] {
        match self.dims() {
            1 => [flat, 0],
            _ => [flat / self.points[1], flat % self.points[1]],
        }
    }

    #[inline]
    pub fn flatten(&self, idx: [usize; 2]) -> usize {
        match self.dims() {
            1 => idx[0],
            _ => idx[0] * self.points[1] + idx[1],
        }
    }

    /// Coordinates of the sample at a flat index.
    pub fn coords(&self, flat: usize) -> [T; 2] {
        let idx = self.unflatten(flat);
        let mut out = [T::zero(); 2];
        for (k, o) in out.iter_mut().enumerate().take(self.dims()) {
            *o = from_usize::<T>(idx[k]) * self.spacing(k);
        }
        out
    }

    /// Signed Fourier mode number of FFT bin `i` along `axis`.
    #[inline]
    pub fn mode_number(&self, axis: usize, i: usize) -> i64 {
        let n = self.points[axis];
        if i <= n / 2 {
            i as i64
        } else {
            i as i64 - n as i64
        }
    }

    /// Whether FFT bin `i` along `axis` is the Nyquist bin.
    #[inline]
    pub fn is_nyquist(&self, axis: usize, i: usize) -> bool {
        i == self.points[axis] / 2
    }

    /// Angular wavenumber `2π l / L` of FFT bin `i` along `axis`.
    #[inline]
    pub fn wavenumber(&self, axis: usize, i: usize) -> T {
        T::TAU() * T::from_i64(self.mode_number(axis, i)).unwrap() / self.sides[axis]
    }

    /// Mode vector of a flat spectral index.
    pub fn mode_vector(&self, flat: usize) -> Vec<i64> {
        let idx = self.unflatten(flat);
        (0..self.dims()).map(|k| self.mode_number(k, idx[k])).collect()
    }

    /// Flat index of the conjugate mode `-l`.
    pub fn conjugate_index(&self, flat: usize) -> usize {
        let idx = self.unflatten(flat);
        let mut c = [0usize; 2];
        for k in 0..self.dims() {
            c[k] = (self.points[k] - idx[k]) % self.points[k];
        }
        self.flatten(c)
    }

    /// Smallest nonzero Laplace eigenvalue, `min_k (2π/L_k)²`.
    pub fn spectral_gap(&self) -> T {
        self.sides
            .iter()
            .map(|&l| {
                let k = T::TAU() / l;
                k * k
            })
            .fold(T::infinity(), T::min)
    }

    /// Same sides, different resolution.
    pub fn with_points(&self, points: Vec<usize>) -> Result<Self> {
        Self::new(self.sides.clone(), points)
    }

    /// Same sides, `points` samples along every axis.
    pub fn with_uniform_points(&self, points: usize) -> Result<Self> {
        Self::new(self.sides.clone(), vec![points; self.dims()])
    }
}
