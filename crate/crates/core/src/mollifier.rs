//! Sharp Fourier-cutoff mollifier.
//!
//! The operator keeps the Fourier modes whose scaled wave vector
//! `κ = 2π k / L` satisfies `|κ| ≤ 1/ε` (Euclidean norm) and annihilates
//! the rest. It is an orthogonal projection: idempotent and self-adjoint
//! in the discrete L² inner product. A cutoff above Nyquist is a no-op.

use crate::error::{Error, Result};
use crate::fft::FftPlan;
use crate::grid::{Field, Grid2D, ScalarField};

/// Frequency truncation at `|κ| ≤ 1/ε`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralTruncation {
    epsilon: f64,
}

impl SpectralTruncation {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::InvalidParameter { what: "mollifier epsilon", value: epsilon });
        }
        Ok(SpectralTruncation { epsilon })
    }

    /// Truncation that keeps modes up to 2/3 of the Nyquist frequency
    /// (plain dealiasing rule).
    pub fn two_thirds_rule(grid: Grid2D) -> Self {
        let nyquist = core::f64::consts::PI * grid.n() as f64 / grid.length();
        SpectralTruncation { epsilon: 1.5 / nyquist }
    }

    #[inline]
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Frequency bound `1/ε`.
    #[inline]
    pub fn cutoff(&self) -> f64 {
        1.0 / self.epsilon
    }

    /// Exact cutoff decision for Fourier bin `(ix, iy)` of `grid`.
    pub fn keeps(&self, grid: Grid2D, ix: usize, iy: usize) -> bool {
        let kx = grid.angular_wavenumber(ix);
        let ky = grid.angular_wavenumber(iy);
        let c = self.cutoff();
        kx * kx + ky * ky <= c * c
    }

    /// Applies the truncation to a field of any rank.
    pub fn apply<F: Field>(&self, f: &F) -> Result<F> {
        for p in f.parts() {
            if !p.is_finite() {
                return Err(Error::NonFinite("mollifier input"));
            }
        }
        let grid = f.grid();
        let n = grid.n();
        let plan = FftPlan::new(n);
        let mut out = alloc::vec::Vec::with_capacity(f.parts().len());
        for p in f.parts() {
            let mut spec = plan.forward2(p.values());
            for iy in 0..n {
                for ix in 0..n {
                    if !self.keeps(grid, ix, iy) {
                        spec[iy * n + ix] = num_complex::Complex64::new(0.0, 0.0);
                    }
                }
            }
            out.push(ScalarField::from_values(grid, plan.inverse2_real(spec)).unwrap());
        }
        Ok(F::from_parts(out))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::inner_product;
    use crate::grid::Grid2D;

    #[test]
    fn rejects_nonpositive_epsilon() {
        assert!(SpectralTruncation::new(0.0).is_err());
        assert!(SpectralTruncation::new(-1.0).is_err());
        assert!(SpectralTruncation::new(f64::NAN).is_err());
    }

    #[test]
    fn constant_is_preserved_for_any_epsilon() {
        let g = Grid2D::square(16).unwrap();
        let f = ScalarField::constant(g, 2.5);
        for eps in [1e-3, 0.25, 10.0] {
            let m = SpectralTruncation::new(eps).unwrap().apply(&f).unwrap();
            for v in m.values() {
                assert!((v - 2.5).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn cutoff_decisions_on_unit_torus() {
        // n = 16, L = 2π, ε = 1/4: integer modes survive iff kx² + ky² ≤ 16.
        let g = Grid2D::square(16).unwrap();
        let tr = SpectralTruncation::new(0.25).unwrap();
        assert!(tr.keeps(g, 3, 0));
        assert!(tr.keeps(g, 4, 0));
        assert!(!tr.keeps(g, 5, 0));
        assert!(!tr.keeps(g, 3, 3));
        assert!(tr.keeps(g, 16 - 3, 0)); // k = -3
        for iy in 0..16 {
            for ix in 0..16 {
                let kx = g.wavenumber(ix);
                let ky = g.wavenumber(iy);
                assert_eq!(tr.keeps(g, ix, iy), kx * kx + ky * ky <= 16);
            }
        }
    }

    #[test]
    fn single_modes_pass_or_die() {
        let g = Grid2D::square(16).unwrap();
        let tr = SpectralTruncation::new(0.25).unwrap();
        let kept = ScalarField::from_fn(g, |x, _| libm::sin(3.0 * x));
        let killed = ScalarField::from_fn(g, |x, _| libm::sin(5.0 * x));
        let mk = tr.apply(&kept).unwrap();
        let mut err = 0.0f64;
        for (a, b) in mk.values().iter().zip(kept.values()) {
            err = err.max((a - b).abs());
        }
        assert!(err < 1e-13, "kept mode distorted by {err}");
        assert!(tr.apply(&killed).unwrap().sup_norm() < 1e-13);
    }

    #[test]
    fn idempotent_and_self_adjoint() {
        use rand::{Rng, SeedableRng};
        let g = Grid2D::square(32).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let tr = SpectralTruncation::new(0.2).unwrap();
        for _ in 0..5 {
            let f = ScalarField::from_fn(g, |_, _| rng.gen_range(-1.0..1.0));
            let g2 = ScalarField::from_fn(g, |_, _| rng.gen_range(-1.0..1.0));
            let jf = tr.apply(&f).unwrap();
            let jjf = tr.apply(&jf).unwrap();
            let mut err = 0.0f64;
            for (a, b) in jjf.values().iter().zip(jf.values()) {
                err = err.max((a - b).abs());
            }
            assert!(err < 1e-12, "not idempotent: {err}");

            let lhs = inner_product(&jf, &g2, None).unwrap();
            let rhs = inner_product(&f, &tr.apply(&g2).unwrap(), None).unwrap();
            assert!((lhs - rhs).abs() < 1e-12 * (1.0 + lhs.abs()), "{lhs} vs {rhs}");
        }
    }
}
