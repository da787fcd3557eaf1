//! Uniform periodic grid on the 2-torus and the field containers living on it.
//!
//! Index conventions used throughout the crate:
//! - nodes are `(ix, iy)` with coordinates `(ix*h, iy*h)`, `h = L/n`, stored
//!   row-major as `iy*n + ix`;
//! - a [`TensorField2`] stores the mathematical entry `T_rc` (row `r`,
//!   column `c`) at part index `2*r + c`. Row contraction conventions
//!   (`div T`, `B d`) are documented where they are used.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Uniform `n × n` periodic grid on `[0, L)²`.
///
/// `n` is restricted to powers of two (at least 8) so the radix-2 spectral
/// transforms apply directly; this also makes `spacing() * n == length()`
/// exact in floating point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid2D {
    n: usize,
    length: f64,
}

impl Grid2D {
    pub const MIN_POINTS: usize = 8;

    pub fn new(n: usize, length: f64) -> Result<Self> {
        if n < Self::MIN_POINTS || !n.is_power_of_two() {
            return Err(Error::InvalidGrid("n must be a power of two, at least 8"));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidGrid("period length must be finite and positive"));
        }
        Ok(Grid2D { n, length })
    }

    /// Grid with the default period `2π` per dimension.
    pub fn square(n: usize) -> Result<Self> {
        Self::new(n, core::f64::consts::TAU)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn length(&self) -> f64 {
        self.length
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        self.length / self.n as f64
    }

    #[inline]
    pub fn node_count(&self) -> usize {
        self.n * self.n
    }

    #[inline]
    pub fn cell_area(&self) -> f64 {
        let h = self.spacing();
        h * h
    }

    #[inline]
    pub fn idx(&self, ix: usize, iy: usize) -> usize {
        iy * self.n + ix
    }

    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        i as f64 * self.spacing()
    }

    /// Integer wavenumber for FFT bin `i`, in `(-n/2, n/2]`.
    #[inline]
    pub fn wavenumber(&self, i: usize) -> i64 {
        if i <= self.n / 2 {
            i as i64
        } else {
            i as i64 - self.n as i64
        }
    }

    /// Physical wavenumber `2π k / L` for FFT bin `i`.
    #[inline]
    pub fn angular_wavenumber(&self, i: usize) -> f64 {
        core::f64::consts::TAU / self.length * self.wavenumber(i) as f64
    }
}

/// Real scalar samples at the grid nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: Grid2D,
    data: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: Grid2D) -> Self {
        ScalarField { grid, data: vec![0.0; grid.node_count()] }
    }

    pub fn constant(grid: Grid2D, value: f64) -> Self {
        ScalarField { grid, data: vec![value; grid.node_count()] }
    }

    pub fn from_fn(grid: Grid2D, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let n = grid.n();
        let mut data = Vec::with_capacity(grid.node_count());
        for iy in 0..n {
            let y = grid.coord(iy);
            for ix in 0..n {
                data.push(f(grid.coord(ix), y));
            }
        }
        ScalarField { grid, data }
    }

    pub fn from_values(grid: Grid2D, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.node_count() {
            return Err(Error::GridMismatch);
        }
        Ok(ScalarField { grid, data })
    }

    #[inline]
    pub fn grid(&self) -> Grid2D {
        self.grid
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn min_value(&self) -> f64 {
        self.data.iter().fold(f64::INFINITY, |m, &v| m.min(v))
    }

    pub fn max_value(&self) -> f64 {
        self.data.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v))
    }

    pub fn sup_norm(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, &v| m.max(v.abs()))
    }

    pub fn mean(&self) -> f64 {
        crate::calculus::pairwise_sum(self.data.len(), &mut |i| self.data[i])
            / self.data.len() as f64
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Self {
        ScalarField { grid: self.grid, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    /// `self += c * other`, in place.
    pub fn axpy(&mut self, c: f64, other: &ScalarField) {
        debug_assert_eq!(self.grid, other.grid);
        for (a, b) in self.data.iter_mut().zip(other.data.iter()) {
            *a += c * b;
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }
}

/// Real 2-vector samples at the grid nodes, stored as two scalar parts.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    parts: [ScalarField; 2],
}

impl VectorField {
    pub fn zeros(grid: Grid2D) -> Self {
        VectorField { parts: [ScalarField::zeros(grid), ScalarField::zeros(grid)] }
    }

    pub fn from_fn(grid: Grid2D, mut f: impl FnMut(f64, f64) -> [f64; 2]) -> Self {
        let n = grid.n();
        let mut c0 = Vec::with_capacity(grid.node_count());
        let mut c1 = Vec::with_capacity(grid.node_count());
        for iy in 0..n {
            let y = grid.coord(iy);
            for ix in 0..n {
                let v = f(grid.coord(ix), y);
                c0.push(v[0]);
                c1.push(v[1]);
            }
        }
        VectorField {
            parts: [
                ScalarField { grid, data: c0 },
                ScalarField { grid, data: c1 },
            ],
        }
    }

    pub fn from_components(c0: ScalarField, c1: ScalarField) -> Result<Self> {
        if c0.grid() != c1.grid() {
            return Err(Error::GridMismatch);
        }
        Ok(VectorField { parts: [c0, c1] })
    }

    #[inline]
    pub fn grid(&self) -> Grid2D {
        self.parts[0].grid()
    }

    #[inline]
    pub fn comp(&self, i: usize) -> &ScalarField {
        &self.parts[i]
    }

    #[inline]
    pub fn comp_mut(&mut self, i: usize) -> &mut ScalarField {
        &mut self.parts[i]
    }

    pub fn is_finite(&self) -> bool {
        self.parts.iter().all(|p| p.is_finite())
    }

    /// Largest pointwise Euclidean norm.
    pub fn max_norm(&self) -> f64 {
        let (a, b) = (self.parts[0].values(), self.parts[1].values());
        let mut m = 0.0f64;
        for i in 0..a.len() {
            m = m.max(a[i] * a[i] + b[i] * b[i]);
        }
        libm::sqrt(m)
    }

    pub fn axpy(&mut self, c: f64, other: &VectorField) {
        self.parts[0].axpy(c, &other.parts[0]);
        self.parts[1].axpy(c, &other.parts[1]);
    }
}

/// Real 2×2 tensor samples at the grid nodes.
///
/// `comp(r, c)` is the mathematical entry with first index `r` and second
/// index `c`; the anisotropic stress stores its entry `σ_ji` at `comp(j, i)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorField2 {
    parts: [ScalarField; 4],
}

impl TensorField2 {
    pub fn zeros(grid: Grid2D) -> Self {
        TensorField2 {
            parts: [
                ScalarField::zeros(grid),
                ScalarField::zeros(grid),
                ScalarField::zeros(grid),
                ScalarField::zeros(grid),
            ],
        }
    }

    pub(crate) fn from_parts_array(parts: [ScalarField; 4]) -> Self {
        debug_assert!(parts.iter().all(|p| p.grid() == parts[0].grid()));
        TensorField2 { parts }
    }

    #[inline]
    pub fn grid(&self) -> Grid2D {
        self.parts[0].grid()
    }

    #[inline]
    pub fn comp(&self, r: usize, c: usize) -> &ScalarField {
        &self.parts[2 * r + c]
    }

    #[inline]
    pub fn comp_mut(&mut self, r: usize, c: usize) -> &mut ScalarField {
        &mut self.parts[2 * r + c]
    }

    pub fn is_finite(&self) -> bool {
        self.parts.iter().all(|p| p.is_finite())
    }

    pub fn axpy(&mut self, c: f64, other: &TensorField2) {
        for (a, b) in self.parts.iter_mut().zip(other.parts.iter()) {
            a.axpy(c, b);
        }
    }
}

/// Common view over scalar, vector and tensor fields: a grid plus a flat
/// list of scalar parts. The calculus, mollifier and norm routines are
/// generic over this.
pub trait Field: Sized {
    fn grid(&self) -> Grid2D;
    fn parts(&self) -> &[ScalarField];
    fn parts_mut(&mut self) -> &mut [ScalarField];
    fn from_parts(parts: Vec<ScalarField>) -> Self;
}

impl Field for ScalarField {
    fn grid(&self) -> Grid2D {
        self.grid
    }

    fn parts(&self) -> &[ScalarField] {
        core::slice::from_ref(self)
    }

    fn parts_mut(&mut self) -> &mut [ScalarField] {
        core::slice::from_mut(self)
    }

    fn from_parts(mut parts: Vec<ScalarField>) -> Self {
        debug_assert_eq!(parts.len(), 1);
        parts.pop().unwrap()
    }
}

impl Field for VectorField {
    fn grid(&self) -> Grid2D {
        self.grid()
    }

    fn parts(&self) -> &[ScalarField] {
        &self.parts
    }

    fn parts_mut(&mut self) -> &mut [ScalarField] {
        &mut self.parts
    }

    fn from_parts(mut parts: Vec<ScalarField>) -> Self {
        debug_assert_eq!(parts.len(), 2);
        let c1 = parts.pop().unwrap();
        let c0 = parts.pop().unwrap();
        debug_assert_eq!(c0.grid(), c1.grid());
        VectorField { parts: [c0, c1] }
    }
}

impl Field for TensorField2 {
    fn grid(&self) -> Grid2D {
        self.grid()
    }

    fn parts(&self) -> &[ScalarField] {
        &self.parts
    }

    fn parts_mut(&mut self) -> &mut [ScalarField] {
        &mut self.parts
    }

    fn from_parts(parts: Vec<ScalarField>) -> Self {
        debug_assert_eq!(parts.len(), 4);
        let mut it = parts.into_iter();
        let p = [
            it.next().unwrap(),
            it.next().unwrap(),
            it.next().unwrap(),
            it.next().unwrap(),
        ];
        TensorField2::from_parts_array(p)
    }
}
