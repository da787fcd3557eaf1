//! Discrete differential operators, inner products and weighted Sobolev
//! norms on the periodic grid.
//!
//! Two derivative schemes sit behind one interface: band-limited spectral
//! differentiation (default, exact for trigonometric data below Nyquist)
//! and second-order centered differences as an independent cross-check.
//! Odd-order spectral derivatives drop the Nyquist mode so that real fields
//! stay real and discrete integration by parts is exact; the Laplacian is
//! the composition of divergence and gradient under either scheme.

use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::FftPlan;
use crate::grid::{Field, Grid2D, ScalarField, TensorField2, VectorField};

/// Largest Sobolev order the norm routines accept.
pub const S_MAX: usize = 4;

/// Spatial derivative scheme.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    /// Fourier differentiation (exact below Nyquist).
    Spectral,
    /// Second-order centered finite differences.
    Centered2,
}

/// Effective wavenumber of the scheme's first derivative: the operator acts
/// as multiplication by `i * symbol` on Fourier bin `idx`.
pub(crate) fn symbol(grid: Grid2D, idx: usize, scheme: Scheme) -> f64 {
    let n = grid.n();
    match scheme {
        Scheme::Spectral => {
            if idx == n / 2 {
                0.0
            } else {
                grid.angular_wavenumber(idx)
            }
        }
        Scheme::Centered2 => {
            if idx == 0 || idx == n / 2 {
                0.0
            } else {
                libm::sin(core::f64::consts::TAU * idx as f64 / n as f64) / grid.spacing()
            }
        }
    }
}

/// Deterministic pairwise reduction of `f(0) + ... + f(len-1)`.
pub(crate) fn pairwise_sum<F: FnMut(usize) -> f64>(len: usize, f: &mut F) -> f64 {
    fn rec<F: FnMut(usize) -> f64>(lo: usize, hi: usize, f: &mut F) -> f64 {
        if hi - lo <= 64 {
            let mut s = 0.0;
            for i in lo..hi {
                s += f(i);
            }
            s
        } else {
            let mid = lo + (hi - lo) / 2;
            rec(lo, mid, f) + rec(mid, hi, f)
        }
    }
    rec(0, len, f)
}

fn derive_centered(f: &ScalarField, axis: usize) -> ScalarField {
    let g = f.grid();
    let n = g.n();
    let inv2h = 0.5 / g.spacing();
    let src = f.values();
    let mut out = ScalarField::zeros(g);
    let dst = out.values_mut();
    for iy in 0..n {
        for ix in 0..n {
            let (p, m) = if axis == 0 {
                (g.idx((ix + 1) % n, iy), g.idx((ix + n - 1) % n, iy))
            } else {
                (g.idx(ix, (iy + 1) % n), g.idx(ix, (iy + n - 1) % n))
            };
            dst[g.idx(ix, iy)] = (src[p] - src[m]) * inv2h;
        }
    }
    out
}

fn derive_spectral(f: &ScalarField, axis: usize) -> ScalarField {
    let g = f.grid();
    let n = g.n();
    let plan = FftPlan::new(n);
    let mut spec = plan.forward2(f.values());
    for ky in 0..n {
        for kx in 0..n {
            let kappa = symbol(g, if axis == 0 { kx } else { ky }, Scheme::Spectral);
            let c = spec[ky * n + kx];
            spec[ky * n + kx] = Complex64::new(-kappa * c.im, kappa * c.re);
        }
    }
    ScalarField::from_values(g, plan.inverse2_real(spec)).unwrap()
}

/// First partial along `axis` (0 = x₁, 1 = x₂); no validity checks.
pub(crate) fn derive(f: &ScalarField, axis: usize, scheme: Scheme) -> ScalarField {
    match scheme {
        Scheme::Spectral => derive_spectral(f, axis),
        Scheme::Centered2 => derive_centered(f, axis),
    }
}

fn laplacian_scalar(f: &ScalarField, scheme: Scheme) -> ScalarField {
    match scheme {
        Scheme::Spectral => {
            // Same symbol as divergence∘gradient, fused into one transform.
            let g = f.grid();
            let n = g.n();
            let plan = FftPlan::new(n);
            let mut spec = plan.forward2(f.values());
            for ky in 0..n {
                for kx in 0..n {
                    let k1 = symbol(g, kx, scheme);
                    let k2 = symbol(g, ky, scheme);
                    spec[ky * n + kx] *= -(k1 * k1 + k2 * k2);
                }
            }
            ScalarField::from_values(g, plan.inverse2_real(spec)).unwrap()
        }
        Scheme::Centered2 => {
            let mut out = derive_centered(&derive_centered(f, 0), 0);
            let d22 = derive_centered(&derive_centered(f, 1), 1);
            out.axpy(1.0, &d22);
            out
        }
    }
}

fn ensure_finite<F: Field>(f: &F, what: &'static str) -> Result<()> {
    if f.parts().iter().all(|p| p.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

impl ScalarField {
    /// `∇f = (∂₁f, ∂₂f)`.
    pub fn gradient(&self, scheme: Scheme) -> Result<VectorField> {
        ensure_finite(self, "gradient input")?;
        VectorField::from_components(derive(self, 0, scheme), derive(self, 1, scheme))
    }

    pub fn laplacian(&self, scheme: Scheme) -> Result<ScalarField> {
        ensure_finite(self, "laplacian input")?;
        Ok(laplacian_scalar(self, scheme))
    }
}

impl VectorField {
    /// Jacobian with entry `(j, i) = ∂_j u_i`.
    pub fn gradient(&self, scheme: Scheme) -> Result<TensorField2> {
        ensure_finite(self, "gradient input")?;
        let mut parts = Vec::with_capacity(4);
        for j in 0..2 {
            for i in 0..2 {
                parts.push(derive(self.comp(i), j, scheme));
            }
        }
        Ok(TensorField2::from_parts(parts))
    }

    pub fn divergence(&self, scheme: Scheme) -> Result<ScalarField> {
        ensure_finite(self, "divergence input")?;
        let mut out = derive(self.comp(0), 0, scheme);
        out.axpy(1.0, &derive(self.comp(1), 1, scheme));
        Ok(out)
    }

    pub fn laplacian(&self, scheme: Scheme) -> Result<VectorField> {
        ensure_finite(self, "laplacian input")?;
        VectorField::from_components(
            laplacian_scalar(self.comp(0), scheme),
            laplacian_scalar(self.comp(1), scheme),
        )
    }
}

impl TensorField2 {
    /// Contracts the first (row) index: `(div T)_i = ∂_j T_{ji}`.
    pub fn divergence(&self, scheme: Scheme) -> Result<VectorField> {
        ensure_finite(self, "divergence input")?;
        let mut c = [ScalarField::zeros(self.grid()), ScalarField::zeros(self.grid())];
        for i in 0..2 {
            c[i] = derive(self.comp(0, i), 0, scheme);
            c[i].axpy(1.0, &derive(self.comp(1, i), 1, scheme));
        }
        let [c0, c1] = c;
        VectorField::from_components(c0, c1)
    }
}

/// Weighted L² pairing `⟨f, g⟩_w = Σ_nodes w f·g h²`, parts contracted.
pub fn inner_product<F: Field>(f: &F, g: &F, weight: Option<&ScalarField>) -> Result<f64> {
    if f.grid() != g.grid() {
        return Err(Error::GridMismatch);
    }
    if let Some(w) = weight {
        if w.grid() != f.grid() {
            return Err(Error::GridMismatch);
        }
    }
    let area = f.grid().cell_area();
    let len = f.grid().node_count();
    let mut total = 0.0;
    for (fp, gp) in f.parts().iter().zip(g.parts().iter()) {
        let (a, b) = (fp.values(), gp.values());
        let s = match weight {
            Some(w) => {
                let wv = w.values();
                pairwise_sum(len, &mut |i| wv[i] * a[i] * b[i])
            }
            None => pairwise_sum(len, &mut |i| a[i] * b[i]),
        };
        total += s;
    }
    Ok(total * area)
}

pub(crate) fn binomial(n: usize, k: usize) -> u64 {
    let mut c = 1u64;
    for j in 0..k {
        c = c * (n - j) as u64 / (j + 1) as u64;
    }
    c
}

/// Table of all distinct partial derivatives of a field up to a given order.
///
/// Level `k` keeps, for every scalar part of the original field, the k+1
/// distinct partials `∂₁^j ∂₂^(k-j)`; the j-th entry carries multinomial
/// multiplicity C(k, j), so that `|∇^k f|²` (sum of squares of all ordered
/// k-th partials) is the multiplicity-weighted sum over distinct ones.
pub(crate) struct Jet {
    grid: Grid2D,
    /// orders[k][part][j] = ∂₁^j ∂₂^(k-j) of the part.
    orders: Vec<Vec<Vec<ScalarField>>>,
}

pub(crate) fn jet_of_parts(
    parts: &[ScalarField],
    max_order: usize,
    scheme: Scheme,
) -> Jet {
    let grid = parts[0].grid();
    let mut orders: Vec<Vec<Vec<ScalarField>>> = Vec::with_capacity(max_order + 1);
    orders.push(parts.iter().map(|p| alloc::vec![p.clone()]).collect());
    for k in 1..=max_order {
        let prev = &orders[k - 1];
        let mut level = Vec::with_capacity(prev.len());
        for comp in prev {
            let mut list = Vec::with_capacity(k + 1);
            list.push(derive(&comp[0], 1, scheme));
            for j in 1..=k {
                list.push(derive(&comp[j - 1], 0, scheme));
            }
            level.push(list);
        }
        orders.push(level);
    }
    Jet { grid, orders }
}

pub(crate) fn jet<F: Field>(f: &F, max_order: usize, scheme: Scheme) -> Jet {
    jet_of_parts(f.parts(), max_order, scheme)
}

impl Jet {
    /// Distinct partials of order `k`: `partials(k)[part][j]`, multiplicity
    /// `binomial(k, j)`.
    pub fn partials(&self, k: usize) -> &Vec<Vec<ScalarField>> {
        &self.orders[k]
    }

    /// `∫ w |∇^k f|² dx` with all parts summed.
    pub fn seminorm_sq(&self, k: usize, weight: Option<&ScalarField>) -> f64 {
        let area = self.grid.cell_area();
        let len = self.grid.node_count();
        let mut total = 0.0;
        for comp in &self.orders[k] {
            for (j, p) in comp.iter().enumerate() {
                let mult = binomial(k, j) as f64;
                let v = p.values();
                let s = match weight {
                    Some(w) => {
                        let wv = w.values();
                        pairwise_sum(len, &mut |i| wv[i] * v[i] * v[i])
                    }
                    None => pairwise_sum(len, &mut |i| v[i] * v[i]),
                };
                total += mult * s * area;
            }
        }
        total
    }
}

/// Unweighted Sobolev sums evaluated in frequency space (Parseval route):
/// one transform per part, then `Σ_k (κ₁² + κ₂²)^k |f̂|²` binwise.
fn sobolev_sq_parseval<F: Field>(f: &F, s: usize, k0: usize, scheme: Scheme) -> f64 {
    let g = f.grid();
    let n = g.n();
    let plan = FftPlan::new(n);
    // Quadrature factor: ∫|f|² ≈ h² Σ_x |f|² = h²/n² Σ_bins |f̂|².
    let factor = g.cell_area() / (n * n) as f64;
    let mut sym = Vec::with_capacity(n);
    for i in 0..n {
        sym.push(symbol(g, i, scheme));
    }
    let mut total = 0.0;
    for part in f.parts() {
        let spec = plan.forward2(part.values());
        total += pairwise_sum(n * n, &mut |bin| {
            let k2 = {
                let s1 = sym[bin % n];
                let s2 = sym[bin / n];
                s1 * s1 + s2 * s2
            };
            let mag = spec[bin].norm_sqr();
            let mut acc = 0.0;
            let mut pw = 1.0;
            for k in 0..=s {
                if k >= k0 {
                    acc += pw;
                }
                pw *= k2;
            }
            acc * mag
        }) * factor;
    }
    total
}

/// Squared weighted Sobolev norm `Σ_{k=k0}^{s} ∫ φ |∇^k f|² dx` with
/// `k0 = 0` (inhomogeneous) or `1` (homogeneous).
pub fn sobolev_norm_sq<F: Field>(
    f: &F,
    s: usize,
    weight: Option<&ScalarField>,
    homogeneous: bool,
    scheme: Scheme,
) -> Result<f64> {
    if s > S_MAX {
        return Err(Error::InvalidParameter { what: "sobolev order s", value: s as f64 });
    }
    ensure_finite(f, "sobolev norm input")?;
    let k0 = usize::from(homogeneous);
    match weight {
        None => Ok(sobolev_sq_parseval(f, s, k0, scheme)),
        Some(w) => {
            if w.grid() != f.grid() {
                return Err(Error::GridMismatch);
            }
            if !(w.is_finite() && w.min_value() > 0.0) {
                return Err(Error::InvalidParameter {
                    what: "sobolev weight (must be positive)",
                    value: w.min_value(),
                });
            }
            let table = jet(f, s, scheme);
            let mut total = 0.0;
            for k in k0..=s {
                total += table.seminorm_sq(k, Some(w));
            }
            Ok(total)
        }
    }
}

pub fn sobolev_norm<F: Field>(
    f: &F,
    s: usize,
    weight: Option<&ScalarField>,
    homogeneous: bool,
    scheme: Scheme,
) -> Result<f64> {
    sobolev_norm_sq(f, s, weight, homogeneous, scheme).map(libm::sqrt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;

    fn grid(n: usize) -> Grid2D {
        Grid2D::square(n).unwrap()
    }

    #[test]
    fn gradient_of_constant_vanishes() {
        let f = ScalarField::constant(grid(16), 3.0);
        for scheme in [Scheme::Spectral, Scheme::Centered2] {
            let g = f.gradient(scheme).unwrap();
            assert!(g.comp(0).sup_norm() < 1e-13);
            assert!(g.comp(1).sup_norm() < 1e-13);
        }
    }

    #[test]
    fn spectral_gradient_exact_on_single_mode() {
        let g = grid(32);
        let f = ScalarField::from_fn(g, |x, _| libm::sin(x));
        let grad = f.gradient(Scheme::Spectral).unwrap();
        let exact = ScalarField::from_fn(g, |x, _| libm::cos(x));
        let mut err = 0.0f64;
        for (a, b) in grad.comp(0).values().iter().zip(exact.values()) {
            err = err.max((a - b).abs());
        }
        assert!(err < 1e-12, "err = {err}");
        assert!(grad.comp(1).sup_norm() < 1e-13);
    }

    #[test]
    fn centered_gradient_is_second_order() {
        let mut errs = [0.0f64; 2];
        for (lvl, n) in [32usize, 64].iter().enumerate() {
            let g = grid(*n);
            let f = ScalarField::from_fn(g, |x, _| libm::sin(x));
            let grad = f.gradient(Scheme::Centered2).unwrap();
            let mut err = 0.0f64;
            for (i, v) in grad.comp(0).values().iter().enumerate() {
                let x = g.coord(i % *n);
                err = err.max((v - libm::cos(x)).abs());
            }
            errs[lvl] = err;
        }
        let ratio = errs[0] / errs[1];
        assert!((ratio - 4.0).abs() < 0.05, "ratio = {ratio}");
    }

    #[test]
    fn divergence_examples() {
        let g = grid(32);
        let u = VectorField::from_fn(g, |_, _| [1.0, 1.0]);
        assert!(u.divergence(Scheme::Spectral).unwrap().sup_norm() < 1e-13);

        let u = VectorField::from_fn(g, |x, _| [libm::sin(x), 0.0]);
        let div = u.divergence(Scheme::Spectral).unwrap();
        let mut err = 0.0f64;
        for (i, v) in div.values().iter().enumerate() {
            err = err.max((v - libm::cos(g.coord(i % 32))).abs());
        }
        assert!(err < 1e-12);
    }

    #[test]
    fn harmonic_director_gram_tensor_is_divergence_free() {
        // d = (cos x₁, sin x₁): ∂_i d_k ∂_j d_k has the single entry (1,1) = 1,
        // spatially constant, so its divergence vanishes.
        let g = grid(32);
        let d = VectorField::from_fn(g, |x, _| [libm::cos(x), libm::sin(x)]);
        let grad = d.gradient(Scheme::Spectral).unwrap();
        let mut t_parts = Vec::with_capacity(4);
        for i in 0..2 {
            for j in 0..2 {
                let mut p = ScalarField::zeros(g);
                for k in 0..2 {
                    let gi = grad.comp(i, k).values();
                    let gj = grad.comp(j, k).values();
                    for (out, (a, b)) in
                        p.values_mut().iter_mut().zip(gi.iter().zip(gj.iter()))
                    {
                        *out += a * b;
                    }
                }
                t_parts.push(p);
            }
        }
        let t = TensorField2::from_parts(t_parts);
        assert!((t.comp(0, 0).values()[5] - 1.0).abs() < 1e-14);
        let div = t.divergence(Scheme::Spectral).unwrap();
        assert!(div.comp(0).sup_norm() < 1e-12);
        assert!(div.comp(1).sup_norm() < 1e-12);
    }

    #[test]
    fn laplacian_matches_composition_and_eigenfunction() {
        let g = grid(32);
        let d = VectorField::from_fn(g, |x, _| [libm::cos(x), libm::sin(x)]);
        let lap = d.laplacian(Scheme::Spectral).unwrap();
        for i in 0..2 {
            let mut err = 0.0f64;
            for (a, b) in lap.comp(i).values().iter().zip(d.comp(i).values()) {
                err = err.max((a + b).abs());
            }
            assert!(err < 1e-12, "Δd != -d, err = {err}");
        }

        for scheme in [Scheme::Spectral, Scheme::Centered2] {
            let f = ScalarField::from_fn(g, |x, y| {
                libm::sin(2.0 * x) * libm::cos(y) + 0.3 * libm::cos(3.0 * y)
            });
            let lap = f.laplacian(scheme).unwrap();
            let composed = f.gradient(scheme).unwrap().divergence(scheme).unwrap();
            let mut err = 0.0f64;
            for (a, b) in lap.values().iter().zip(composed.values()) {
                err = err.max((a - b).abs());
            }
            assert!(err < 1e-12, "{scheme:?}: err = {err}");
        }
    }

    #[test]
    fn laplacian_of_constant_vanishes() {
        let f = ScalarField::constant(grid(16), 2.5);
        for scheme in [Scheme::Spectral, Scheme::Centered2] {
            assert!(f.laplacian(scheme).unwrap().sup_norm() < 1e-13);
        }
    }

    #[test]
    fn inner_product_of_sine_with_itself() {
        let g = grid(64);
        let f = ScalarField::from_fn(g, |x, _| libm::sin(x));
        let ip = inner_product(&f, &f, None).unwrap();
        assert!((ip - 2.0 * PI * PI).abs() < 1e-10, "ip = {ip}");
    }

    #[test]
    fn inner_product_rejects_grid_mismatch() {
        let f = ScalarField::constant(grid(16), 1.0);
        let h = ScalarField::constant(grid(32), 1.0);
        assert_eq!(inner_product(&f, &h, None), Err(Error::GridMismatch));
    }

    #[test]
    fn gradient_rejects_non_finite() {
        let mut f = ScalarField::constant(grid(16), 1.0);
        f.values_mut()[3] = f64::NAN;
        assert!(matches!(f.gradient(Scheme::Spectral), Err(Error::NonFinite(_))));
    }

    #[test]
    fn sobolev_norm_examples() {
        let g = grid(64);
        let zero = ScalarField::zeros(g);
        for s in 0..=S_MAX {
            assert_eq!(sobolev_norm(&zero, s, None, false, Scheme::Spectral).unwrap(), 0.0);
        }

        // |sin x₁|_{H¹} = sqrt(2π² + 2π²) = 2π on [0, 2π]².
        let f = ScalarField::from_fn(g, |x, _| libm::sin(x));
        let nrm = sobolev_norm(&f, 1, None, false, Scheme::Spectral).unwrap();
        assert!((nrm - 2.0 * PI).abs() < 1e-10, "nrm = {nrm}");

        // Constant weight c scales the norm by sqrt(c).
        let w = ScalarField::constant(g, 4.0);
        let weighted = sobolev_norm(&f, 2, Some(&w), false, Scheme::Spectral).unwrap();
        let plain = sobolev_norm(&f, 2, None, false, Scheme::Spectral).unwrap();
        assert!((weighted - 2.0 * plain).abs() < 1e-9);
    }

    #[test]
    fn sobolev_rejects_nonpositive_weight_and_large_s() {
        let g = grid(16);
        let f = ScalarField::constant(g, 1.0);
        let w = ScalarField::constant(g, 0.0);
        assert!(sobolev_norm(&f, 1, Some(&w), false, Scheme::Spectral).is_err());
        assert!(sobolev_norm(&f, S_MAX + 1, None, false, Scheme::Spectral).is_err());
    }

    #[test]
    fn weighted_route_matches_parseval_route() {
        let g = grid(32);
        let f = ScalarField::from_fn(g, |x, y| {
            libm::sin(x) + 0.4 * libm::cos(2.0 * y) + 0.1 * libm::sin(3.0 * x + y)
        });
        let one = ScalarField::constant(g, 1.0);
        for scheme in [Scheme::Spectral, Scheme::Centered2] {
            for homogeneous in [false, true] {
                let a = sobolev_norm_sq(&f, 3, None, homogeneous, scheme).unwrap();
                let b = sobolev_norm_sq(&f, 3, Some(&one), homogeneous, scheme).unwrap();
                assert!(
                    (a - b).abs() <= 1e-11 * (1.0 + a.abs()),
                    "{scheme:?} hom={homogeneous}: {a} vs {b}"
                );
            }
        }
    }

    #[test]
    fn integration_by_parts_is_exact_spectrally() {
        let g = grid(32);
        let f = ScalarField::from_fn(g, |x, y| libm::sin(2.0 * x) + libm::cos(x + 3.0 * y));
        let h = ScalarField::from_fn(g, |x, y| libm::cos(5.0 * x - y) + 0.7 * libm::sin(y));
        let df = f.gradient(Scheme::Spectral).unwrap();
        let dh = h.gradient(Scheme::Spectral).unwrap();
        for axis in 0..2 {
            let lhs = inner_product(df.comp(axis), &h, None).unwrap();
            let rhs = inner_product(&f, dh.comp(axis), None).unwrap();
            assert!((lhs + rhs).abs() < 1e-12, "axis {axis}: {lhs} + {rhs}");
        }
    }
}
