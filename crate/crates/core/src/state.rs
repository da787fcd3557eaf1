//! Simulation state `(ρ, u, d, ḋ)` at one time level.

use crate::error::{Error, Result};
use crate::grid::{Grid2D, ScalarField, VectorField};

/// One time level of the coupled system. `ddot` is the material derivative
/// of the director and is carried as an independent unknown; it is never
/// reconstructed by differencing `d` in time.
#[derive(Clone, Debug)]
pub struct State {
    pub t: f64,
    pub rho: ScalarField,
    pub u: VectorField,
    pub d: VectorField,
    pub ddot: VectorField,
}

impl State {
    pub fn grid(&self) -> Grid2D {
        self.rho.grid()
    }

    /// Checks finiteness, grid consistency and the vacuum floor.
    pub fn validate(&self, vacuum_floor: f64) -> Result<()> {
        let g = self.rho.grid();
        if self.u.grid() != g || self.d.grid() != g || self.ddot.grid() != g {
            return Err(Error::GridMismatch);
        }
        if !(self.rho.is_finite()
            && self.u.is_finite()
            && self.d.is_finite()
            && self.ddot.is_finite())
        {
            return Err(Error::NonFinite("state fields"));
        }
        let min_rho = self.rho.min_value();
        if min_rho <= vacuum_floor {
            return Err(Error::Vacuum { min_rho, floor: vacuum_floor });
        }
        Ok(())
    }
}

/// Pointwise renormalization `d ← d/|d|`. Rejects directors that vanish
/// anywhere (no orientation to renormalize).
pub fn normalize_director(d: &VectorField) -> Result<VectorField> {
    let (a, b) = (d.comp(0).values(), d.comp(1).values());
    let mut c0 = Vec::with_capacity(a.len());
    let mut c1 = Vec::with_capacity(a.len());
    for i in 0..a.len() {
        let norm = libm::sqrt(a[i] * a[i] + b[i] * b[i]);
        if !(norm > 1e-12) {
            return Err(Error::InvalidParameter {
                what: "director magnitude (vanishing director)",
                value: norm,
            });
        }
        c0.push(a[i] / norm);
        c1.push(b[i] / norm);
    }
    VectorField::from_components(
        ScalarField::from_values(d.grid(), c0)?,
        ScalarField::from_values(d.grid(), c1)?,
    )
}

/// Pointwise tangential projection `v ← v - (d·v) d`.
pub fn project_tangent(d: &VectorField, v: &VectorField) -> VectorField {
    let (d0, d1) = (d.comp(0).values(), d.comp(1).values());
    let (v0, v1) = (v.comp(0).values(), v.comp(1).values());
    let mut out = VectorField::zeros(d.grid());
    for i in 0..d0.len() {
        let dot = d0[i] * v0[i] + d1[i] * v1[i];
        out.comp_mut(0).values_mut()[i] = v0[i] - dot * d0[i];
        out.comp_mut(1).values_mut()[i] = v1[i] - dot * d1[i];
    }
    out
}

use alloc::vec::Vec;
