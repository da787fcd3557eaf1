//! Leslie coefficients and the pointwise constitutive quantities of the
//! flow: strain and spin tensors, corotational director rate, kinematic
//! transport, Lagrange multiplier, the three stresses, and the right-hand
//! sides of the coupled evolution equations.
//!
//! Sign and index conventions: the Jacobian stores `(j,i) = ∂_j u_i`, the
//! anisotropic stress stores `σ_ji` at `comp(j,i)`, and all divergences
//! contract the first index. `(B d)_i = B_ki d_k` contracts the row of the
//! spin tensor.

use alloc::vec::Vec;

use crate::calculus::Scheme;
use crate::error::{Error, Result};
use crate::grid::{Field, ScalarField, TensorField2, VectorField};

/// Default positive floor below which the density counts as vacuum.
pub const DEFAULT_VACUUM_FLOOR: f64 = 1e-8;

/// Raw coefficient tuple as it arrives from configuration. `lambda1` and
/// `lambda2` are optional cross-checks; when present they must agree with
/// the values derived from the viscosities.
#[derive(Clone, Copy, Debug)]
pub struct RawCoefficients {
    pub mu1: f64,
    pub mu2: f64,
    pub mu3: f64,
    pub mu4: f64,
    pub mu5: f64,
    pub mu6: f64,
    pub xi: f64,
    pub a: f64,
    pub gamma: f64,
    pub lambda1: Option<f64>,
    pub lambda2: Option<f64>,
}

impl Default for RawCoefficients {
    fn default() -> Self {
        RawCoefficients {
            mu1: 0.0,
            mu2: 0.0,
            mu3: 0.0,
            mu4: 1.0,
            mu5: 0.0,
            mu6: 0.0,
            xi: 0.0,
            a: 2.0,
            gamma: 2.0,
            lambda1: None,
            lambda2: None,
        }
    }
}

/// Admissibility summary returned alongside validated coefficients.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CoefficientFlags {
    pub parodi_ok: bool,
    pub dissipative: bool,
    pub strictly_damped: bool,
}

/// Validated Leslie coefficient set, with `λ₁ = μ₂ − μ₃`, `λ₂ = μ₅ − μ₆`
/// and Parodi's relation `μ₂ + μ₃ = μ₆ − μ₅` enforced at construction,
/// plus the γ-law pressure constants.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LeslieCoefficients {
    mu1: f64,
    mu2: f64,
    mu3: f64,
    mu4: f64,
    mu5: f64,
    mu6: f64,
    xi: f64,
    lambda1: f64,
    lambda2: f64,
    a: f64,
    gamma: f64,
}

fn rel_close(x: f64, y: f64, scale: f64) -> bool {
    (x - y).abs() <= 1e-12 * scale.max(1.0)
}

impl LeslieCoefficients {
    pub fn validate(raw: &RawCoefficients) -> Result<(Self, CoefficientFlags)> {
        let values = [
            raw.mu1, raw.mu2, raw.mu3, raw.mu4, raw.mu5, raw.mu6, raw.xi, raw.a, raw.gamma,
        ];
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("Leslie coefficients"));
        }

        let lambda1 = raw.mu2 - raw.mu3;
        let lambda2 = raw.mu5 - raw.mu6;
        let scale = raw.mu2.abs() + raw.mu3.abs() + raw.mu5.abs() + raw.mu6.abs();
        if let Some(l1) = raw.lambda1 {
            if !rel_close(l1, lambda1, scale) {
                return Err(Error::CoefficientRelation("lambda1 = mu2 - mu3"));
            }
        }
        if let Some(l2) = raw.lambda2 {
            if !rel_close(l2, lambda2, scale) {
                return Err(Error::CoefficientRelation("lambda2 = mu5 - mu6"));
            }
        }
        if !rel_close(raw.mu2 + raw.mu3, raw.mu6 - raw.mu5, scale) {
            return Err(Error::CoefficientRelation("Parodi: mu2 + mu3 = mu6 - mu5"));
        }
        if raw.a <= 1.0 {
            return Err(Error::InvalidParameter { what: "pressure amplitude a (> 1)", value: raw.a });
        }
        if raw.gamma < 1.0 {
            return Err(Error::InvalidParameter {
                what: "adiabatic exponent gamma (>= 1)",
                value: raw.gamma,
            });
        }

        let c = LeslieCoefficients {
            mu1: raw.mu1,
            mu2: raw.mu2,
            mu3: raw.mu3,
            mu4: raw.mu4,
            mu5: raw.mu5,
            mu6: raw.mu6,
            xi: raw.xi,
            lambda1,
            lambda2,
            a: raw.a,
            gamma: raw.gamma,
        };
        let flags = CoefficientFlags {
            parodi_ok: true,
            dissipative: c.dissipative(),
            strictly_damped: c.strictly_damped(),
        };
        Ok((c, flags))
    }

    pub fn mu1(&self) -> f64 { self.mu1 }
    pub fn mu2(&self) -> f64 { self.mu2 }
    pub fn mu3(&self) -> f64 { self.mu3 }
    pub fn mu4(&self) -> f64 { self.mu4 }
    pub fn mu5(&self) -> f64 { self.mu5 }
    pub fn mu6(&self) -> f64 { self.mu6 }
    pub fn xi(&self) -> f64 { self.xi }
    pub fn lambda1(&self) -> f64 { self.lambda1 }
    pub fn lambda2(&self) -> f64 { self.lambda2 }
    pub fn pressure_amplitude(&self) -> f64 { self.a }
    pub fn gamma(&self) -> f64 { self.gamma }

    /// Energy-law dissipativity conditions: μ₁ ≥ 0, μ₄ > 0, μ₄/2 + ξ ≥ 0,
    /// λ₁ ≤ 0 and (for λ₁ < 0) μ₅ + μ₆ + λ₂²/λ₁ ≥ 0; λ₁ = 0 is admissible
    /// only with λ₂ = 0 and μ₅ + μ₆ ≥ 0.
    pub fn dissipative(&self) -> bool {
        if !(self.mu1 >= 0.0 && self.mu4 > 0.0 && 0.5 * self.mu4 + self.xi >= 0.0) {
            return false;
        }
        if self.lambda1 < 0.0 {
            self.mu5 + self.mu6 + self.lambda2 * self.lambda2 / self.lambda1 >= 0.0
        } else if self.lambda1 == 0.0 {
            self.lambda2 == 0.0 && self.mu5 + self.mu6 >= 0.0
        } else {
            false
        }
    }

    /// Dissipative with a strictly negative λ₁ (director damping).
    pub fn strictly_damped(&self) -> bool {
        self.dissipative() && self.lambda1 < 0.0
    }

    /// λ₂/λ₁, taken as 0 in the degenerate λ₁ = 0, λ₂ = 0 case.
    pub(crate) fn lambda_ratio(&self) -> Result<f64> {
        if self.lambda1 != 0.0 {
            Ok(self.lambda2 / self.lambda1)
        } else if self.lambda2 == 0.0 {
            Ok(0.0)
        } else {
            Err(Error::CoefficientRelation(
                "dissipation rate undefined: lambda1 = 0 requires lambda2 = 0",
            ))
        }
    }

    /// Coefficient μ₅ + μ₆ + λ₂²/λ₁ of the strain-coupling dissipation term,
    /// degenerating to μ₅ + μ₆ when λ₁ = 0 (with λ₂ = 0).
    pub(crate) fn strain_damping(&self) -> Result<f64> {
        self.lambda_ratio()
            .map(|r| self.mu5 + self.mu6 + r * self.lambda2)
    }

    /// γ-law pressure p(ρ) = a ρ^γ.
    pub fn pressure(&self, rho: f64) -> f64 {
        self.a * libm::pow(rho, self.gamma)
    }

    /// p'(ρ) = a γ ρ^(γ-1).
    pub fn pressure_derivative(&self, rho: f64) -> f64 {
        self.a * self.gamma * libm::pow(rho, self.gamma - 1.0)
    }

    /// Weight p'(ρ)/ρ = a γ ρ^(γ-2) of the density Sobolev norms.
    pub fn pressure_weight(&self, rho: f64) -> f64 {
        self.a * self.gamma * libm::pow(rho, self.gamma - 2.0)
    }
}

/// Symmetric (`strain` = A) and antisymmetric (`spin` = B) parts of the
/// velocity gradient, arranged so that `A_ij + B_ij = ∂_j u_i`.
#[derive(Clone, Debug)]
pub struct FlowTensors {
    pub strain: TensorField2,
    pub spin: TensorField2,
}

pub fn flow_tensors(u: &VectorField, scheme: Scheme) -> Result<FlowTensors> {
    let grad = u.gradient(scheme)?;
    let grid = u.grid();
    let mut a = TensorField2::zeros(grid);
    let mut b = TensorField2::zeros(grid);
    for i in 0..2 {
        for j in 0..2 {
            let gji = grad.comp(j, i).values();
            let gij = grad.comp(i, j).values();
            let av = a.comp_mut(i, j).values_mut();
            for (out, (x, y)) in av.iter_mut().zip(gji.iter().zip(gij.iter())) {
                *out = 0.5 * (x + y);
            }
            let bv = b.comp_mut(i, j).values_mut();
            for (out, (x, y)) in bv.iter_mut().zip(gji.iter().zip(gij.iter())) {
                *out = 0.5 * (x - y);
            }
        }
    }
    Ok(FlowTensors { strain: a, spin: b })
}

/// Row contraction `(T ∘ v)_i = T_ri v_r`; realizes both `B d` and `A d`.
pub(crate) fn contract_row(t: &TensorField2, v: &VectorField) -> VectorField {
    let grid = t.grid();
    let mut out = VectorField::zeros(grid);
    for i in 0..2 {
        let dst = out.comp_mut(i).values_mut();
        for r in 0..2 {
            let tv = t.comp(r, i).values();
            let vv = v.comp(r).values();
            for (o, (a, b)) in dst.iter_mut().zip(tv.iter().zip(vv.iter())) {
                *o += a * b;
            }
        }
    }
    out
}

/// Pointwise quadratic form `v_r T_rc v_c`.
pub(crate) fn quadratic_form(t: &TensorField2, v: &VectorField) -> ScalarField {
    let grid = t.grid();
    let mut out = ScalarField::zeros(grid);
    for r in 0..2 {
        for c in 0..2 {
            let tv = t.comp(r, c).values();
            let vr = v.comp(r).values();
            let vc = v.comp(c).values();
            let dst = out.values_mut();
            for i in 0..dst.len() {
                dst[i] += vr[i] * tv[i] * vc[i];
            }
        }
    }
    out
}

/// Corotational director rate `N = ḋ + B d`.
pub fn corotational_rate(
    ddot: &VectorField,
    spin: &TensorField2,
    d: &VectorField,
) -> Result<VectorField> {
    if ddot.grid() != spin.grid() || d.grid() != spin.grid() {
        return Err(Error::GridMismatch);
    }
    let mut n = contract_row(spin, d);
    n.axpy(1.0, ddot);
    Ok(n)
}

/// Kinematic transport `g_i = λ₁ N_i + λ₂ d_j A_ij`.
pub fn kinematic_transport(
    coeffs: &LeslieCoefficients,
    n: &VectorField,
    strain: &TensorField2,
    d: &VectorField,
) -> Result<VectorField> {
    if n.grid() != strain.grid() || d.grid() != strain.grid() {
        return Err(Error::GridMismatch);
    }
    let ad = contract_row(strain, d);
    let mut out = VectorField::zeros(n.grid());
    out.axpy(coeffs.lambda1, n);
    out.axpy(coeffs.lambda2, &ad);
    Ok(out)
}

/// Lagrange multiplier `Γ = -ρ|ḋ|² + |∇d|² - λ₂ dᵀA d` enforcing |d| = 1.
///
/// Always evaluated from this closed formula; callers that care about the
/// constraint should monitor the unit-norm residual separately.
pub fn lagrange_gamma(
    coeffs: &LeslieCoefficients,
    rho: &ScalarField,
    u: &VectorField,
    d: &VectorField,
    ddot: &VectorField,
    scheme: Scheme,
) -> Result<ScalarField> {
    let flow = flow_tensors(u, scheme)?;
    let grad_d = d.gradient(scheme)?;
    gamma_from_parts(coeffs, rho, &flow.strain, &grad_d, d, ddot)
}

/// Γ with the strain and director gradient already at hand.
pub(crate) fn gamma_from_parts(
    coeffs: &LeslieCoefficients,
    rho: &ScalarField,
    strain: &TensorField2,
    grad_d: &TensorField2,
    d: &VectorField,
    ddot: &VectorField,
) -> Result<ScalarField> {
    if rho.grid() != d.grid() || ddot.grid() != d.grid() {
        return Err(Error::GridMismatch);
    }
    let dad = quadratic_form(strain, d);
    let mut out = ScalarField::zeros(rho.grid());
    let dst = out.values_mut();
    let (r, dadv) = (rho.values(), dad.values());
    let (dd0, dd1) = (ddot.comp(0).values(), ddot.comp(1).values());
    for i in 0..dst.len() {
        let ddot_sq = dd0[i] * dd0[i] + dd1[i] * dd1[i];
        let mut grad_sq = 0.0;
        for p in grad_d.parts() {
            let v = p.values()[i];
            grad_sq += v * v;
        }
        dst[i] = -r[i] * ddot_sq + grad_sq - coeffs.lambda2 * dadv[i];
    }
    Ok(out)
}

/// The three stresses of the momentum equation.
#[derive(Clone, Debug)]
pub struct Stresses {
    /// Isotropic viscous stress `Σ₁ = μ₄ A + ξ (div u) I`.
    pub sigma1: TensorField2,
    /// Elastic (Ericksen) stress `Σ₂ = ½|∇d|² I - ∇d ⊙ ∇d`.
    pub sigma2: TensorField2,
    /// Anisotropic Leslie stress `Σ₃ = σ̃`.
    pub sigma3: TensorField2,
}

pub fn stresses(
    coeffs: &LeslieCoefficients,
    u: &VectorField,
    d: &VectorField,
    ddot: &VectorField,
    scheme: Scheme,
) -> Result<Stresses> {
    let flow = flow_tensors(u, scheme)?;
    let grad_d = d.gradient(scheme)?;
    stresses_from_parts(coeffs, &flow, &grad_d, d, ddot)
}

pub(crate) fn stresses_from_parts(
    coeffs: &LeslieCoefficients,
    flow: &FlowTensors,
    grad_d: &TensorField2,
    d: &VectorField,
    ddot: &VectorField,
) -> Result<Stresses> {
    let grid = d.grid();
    if flow.strain.grid() != grid || ddot.grid() != grid {
        return Err(Error::GridMismatch);
    }
    let len = grid.node_count();

    // Σ₁ = μ₄ A + ξ (div u) I; div u is the trace of the Jacobian, i.e. A₁₁+A₂₂.
    let mut sigma1 = TensorField2::zeros(grid);
    {
        let tr: Vec<f64> = (0..len)
            .map(|i| flow.strain.comp(0, 0).values()[i] + flow.strain.comp(1, 1).values()[i])
            .collect();
        for r in 0..2 {
            for c in 0..2 {
                let av = flow.strain.comp(r, c).values();
                let dst = sigma1.comp_mut(r, c).values_mut();
                for i in 0..len {
                    dst[i] = coeffs.mu4 * av[i] + if r == c { coeffs.xi * tr[i] } else { 0.0 };
                }
            }
        }
    }

    // Σ₂ = ½|∇d|² I - ∇d ⊙ ∇d with (∇d ⊙ ∇d)_ij = ∂_i d_k ∂_j d_k.
    let mut sigma2 = TensorField2::zeros(grid);
    {
        for i in 0..2 {
            for j in 0..2 {
                let dst = sigma2.comp_mut(i, j).values_mut();
                for k in 0..2 {
                    let gi = grad_d.comp(i, k).values();
                    let gj = grad_d.comp(j, k).values();
                    for (o, (a, b)) in dst.iter_mut().zip(gi.iter().zip(gj.iter())) {
                        *o -= a * b;
                    }
                }
            }
        }
        let mut grad_sq = alloc::vec![0.0f64; len];
        for p in grad_d.parts() {
            for (o, v) in grad_sq.iter_mut().zip(p.values()) {
                *o += v * v;
            }
        }
        for rc in 0..2 {
            let dst = sigma2.comp_mut(rc, rc).values_mut();
            for i in 0..len {
                dst[i] += 0.5 * grad_sq[i];
            }
        }
    }

    // σ̃_ji = μ₁ dᵀAd d_i d_j + μ₂ d_j N_i + μ₃ d_i N_j + μ₅ d_j (Ad)_i + μ₆ d_i (Ad)_j.
    let mut sigma3 = TensorField2::zeros(grid);
    {
        let n = {
            let mut n = contract_row(&flow.spin, d);
            n.axpy(1.0, ddot);
            n
        };
        let ad = contract_row(&flow.strain, d);
        let dad = quadratic_form(&flow.strain, d);
        for j in 0..2 {
            for i in 0..2 {
                let dst = sigma3.comp_mut(j, i).values_mut();
                let (dj, di) = (d.comp(j).values(), d.comp(i).values());
                let (ni, nj) = (n.comp(i).values(), n.comp(j).values());
                let (adi, adj) = (ad.comp(i).values(), ad.comp(j).values());
                let dadv = dad.values();
                for p in 0..len {
                    dst[p] = coeffs.mu1 * dadv[p] * di[p] * dj[p]
                        + coeffs.mu2 * dj[p] * ni[p]
                        + coeffs.mu3 * di[p] * nj[p]
                        + coeffs.mu5 * dj[p] * adi[p]
                        + coeffs.mu6 * di[p] * adj[p];
                }
            }
        }
    }

    Ok(Stresses { sigma1, sigma2, sigma3 })
}

/// Director force `Δd + Γ d + λ₁ (ḋ + B d) + λ₂ A d` (not divided by ρ).
pub fn director_force(
    coeffs: &LeslieCoefficients,
    rho: &ScalarField,
    u: &VectorField,
    d: &VectorField,
    ddot: &VectorField,
    scheme: Scheme,
) -> Result<VectorField> {
    let flow = flow_tensors(u, scheme)?;
    let grad_d = d.gradient(scheme)?;
    let lap_d = d.laplacian(scheme)?;
    director_force_from_parts(coeffs, rho, &flow, &grad_d, &lap_d, d, ddot)
}

pub(crate) fn director_force_from_parts(
    coeffs: &LeslieCoefficients,
    rho: &ScalarField,
    flow: &FlowTensors,
    grad_d: &TensorField2,
    lap_d: &VectorField,
    d: &VectorField,
    ddot: &VectorField,
) -> Result<VectorField> {
    let gamma = gamma_from_parts(coeffs, rho, &flow.strain, grad_d, d, ddot)?;
    let mut force = lap_d.clone();
    let bd = contract_row(&flow.spin, d);
    let ad = contract_row(&flow.strain, d);
    for i in 0..2 {
        let dst = force.comp_mut(i).values_mut();
        let (gv, dv) = (gamma.values(), d.comp(i).values());
        let (ddv, bdv, adv) = (ddot.comp(i).values(), bd.comp(i).values(), ad.comp(i).values());
        for p in 0..dst.len() {
            dst[p] += gv[p] * dv[p]
                + coeffs.lambda1 * (ddv[p] + bdv[p])
                + coeffs.lambda2 * adv[p];
        }
    }
    Ok(force)
}

/// Right-hand sides of the three evolution equations:
/// `∂_t ρ`, `∂_t (ρu)` and `∂_t ḋ`.
#[derive(Clone, Debug)]
pub struct SystemResiduals {
    pub mass: ScalarField,
    pub momentum: VectorField,
    pub director: VectorField,
}

pub fn residuals(
    coeffs: &LeslieCoefficients,
    rho: &ScalarField,
    u: &VectorField,
    d: &VectorField,
    ddot: &VectorField,
    scheme: Scheme,
    vacuum_floor: f64,
) -> Result<SystemResiduals> {
    let grid = rho.grid();
    if u.grid() != grid || d.grid() != grid || ddot.grid() != grid {
        return Err(Error::GridMismatch);
    }
    if !(rho.is_finite() && u.is_finite() && d.is_finite() && ddot.is_finite()) {
        return Err(Error::NonFinite("state fields"));
    }
    let min_rho = rho.min_value();
    if min_rho <= vacuum_floor.max(0.0) {
        return Err(Error::Vacuum { min_rho, floor: vacuum_floor });
    }
    let len = grid.node_count();

    // Mass: -div(ρu), conservative form.
    let flux = {
        let mk = |i: usize| {
            let mut c = rho.clone();
            for (o, v) in c.values_mut().iter_mut().zip(u.comp(i).values()) {
                *o *= v;
            }
            c
        };
        VectorField::from_components(mk(0), mk(1))?
    };
    let mut mass = flux.divergence(scheme)?;
    for v in mass.values_mut() {
        *v = -*v;
    }

    // Momentum: -div(ρ u⊗u) - ∇p + div(Σ₁+Σ₂+Σ₃).
    let str = stresses(coeffs, u, d, ddot, scheme)?;
    let mut total_stress = str.sigma1;
    total_stress.axpy(1.0, &str.sigma2);
    total_stress.axpy(1.0, &str.sigma3);
    let mut momentum = total_stress.divergence(scheme)?;
    {
        let mut advect = TensorField2::zeros(grid);
        for r in 0..2 {
            for c in 0..2 {
                let dst = advect.comp_mut(r, c).values_mut();
                let (rr, ur, uc) = (rho.values(), u.comp(r).values(), u.comp(c).values());
                for i in 0..len {
                    dst[i] = rr[i] * ur[i] * uc[i];
                }
            }
        }
        momentum.axpy(-1.0, &advect.divergence(scheme)?);
        let p = rho.map(|r| coeffs.pressure(r));
        momentum.axpy(-1.0, &p.gradient(scheme)?);
    }

    // Director: ρ⁻¹ (Δd + Γd + λ₁(ḋ+Bd) + λ₂Ad) - u·∇ḋ, the value of ∂_t ḋ.
    let force = director_force(coeffs, rho, u, d, ddot, scheme)?;
    let grad_ddot = ddot.gradient(scheme)?;
    let adv = contract_row(&grad_ddot, u);
    let mut director = VectorField::zeros(grid);
    for i in 0..2 {
        let dst = director.comp_mut(i).values_mut();
        let (fv, rv, av) = (force.comp(i).values(), rho.values(), adv.comp(i).values());
        for p in 0..len {
            dst[p] = fv[p] / rv[p] - av[p];
        }
    }

    Ok(SystemResiduals { mass, momentum, director })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid2D;

    fn raw(mu: [f64; 6], xi: f64) -> RawCoefficients {
        RawCoefficients {
            mu1: mu[0],
            mu2: mu[1],
            mu3: mu[2],
            mu4: mu[3],
            mu5: mu[4],
            mu6: mu[5],
            xi,
            ..RawCoefficients::default()
        }
    }

    /// μ₄-only set: reduces to Navier–Stokes coupled with a wave map.
    pub(crate) fn ns_wave_map() -> LeslieCoefficients {
        LeslieCoefficients::validate(&raw([0.0, 0.0, 0.0, 1.0, 0.0, 0.0], 0.0))
            .unwrap()
            .0
    }

    /// Strictly damped example set: μ₁=1, μ₄=2, ξ=0, μ₂=-1, μ₃=0, μ₅=1, μ₆=0.
    pub(crate) fn strictly_damped_example() -> LeslieCoefficients {
        LeslieCoefficients::validate(&raw([1.0, -1.0, 0.0, 2.0, 1.0, 0.0], 0.0))
            .unwrap()
            .0
    }

    #[test]
    fn newtonian_reduction_is_dissipative_but_not_damped() {
        let (c, flags) =
            LeslieCoefficients::validate(&raw([0.0, 0.0, 0.0, 1.0, 0.0, 0.0], 0.0)).unwrap();
        assert_eq!(c.lambda1(), 0.0);
        assert_eq!(c.lambda2(), 0.0);
        assert!(flags.parodi_ok && flags.dissipative && !flags.strictly_damped);
    }

    #[test]
    fn lambda_cross_check_rejects_contradiction() {
        let mut r = raw([0.0, 1.0, 0.0, 1.0, 0.0, -1.0], 0.0);
        r.lambda1 = Some(0.0); // must equal mu2 - mu3 = 1
        assert_eq!(
            LeslieCoefficients::validate(&r),
            Err(Error::CoefficientRelation("lambda1 = mu2 - mu3"))
        );
    }

    #[test]
    fn strictly_damped_example_passes_all_conditions() {
        let (c, flags) =
            LeslieCoefficients::validate(&raw([1.0, -1.0, 0.0, 2.0, 1.0, 0.0], 0.0)).unwrap();
        assert_eq!(c.lambda1(), -1.0);
        assert_eq!(c.lambda2(), 1.0);
        // mu5 + mu6 + lambda2²/lambda1 = 1 + 0 - 1 = 0.
        assert_eq!(c.strain_damping().unwrap(), 0.0);
        assert!(flags.dissipative && flags.strictly_damped);
    }

    #[test]
    fn parodi_violation_is_named() {
        let r = raw([0.0, 1.0, 0.0, 1.0, 0.0, 0.0], 0.0); // mu2+mu3 = 1 != mu6-mu5 = 0
        assert_eq!(
            LeslieCoefficients::validate(&r),
            Err(Error::CoefficientRelation("Parodi: mu2 + mu3 = mu6 - mu5"))
        );
    }

    #[test]
    fn pressure_constants_are_checked() {
        let mut r = raw([0.0; 6], 0.0);
        r.mu4 = 1.0;
        r.a = 1.0;
        assert!(LeslieCoefficients::validate(&r).is_err());
        r.a = 2.0;
        r.gamma = 0.5;
        assert!(LeslieCoefficients::validate(&r).is_err());
    }

    #[test]
    fn flow_tensor_pointwise_algebra() {
        // ∂₂u₁ = 1, all else 0: A₁₂ = A₂₁ = ½, B₁₂ = ½, B₂₁ = -½.
        let g = Grid2D::square(16).unwrap();
        let u = VectorField::from_fn(g, |_, y| [y, 0.0]);
        // y is not periodic; test the algebra away from the wrap seam with
        // centered differences instead.
        let flow = flow_tensors(&u, Scheme::Centered2).unwrap();
        let at = |t: &TensorField2, r: usize, c: usize| t.comp(r, c).values()[g.idx(5, 5)];
        assert!((at(&flow.strain, 0, 1) - 0.5).abs() < 1e-12);
        assert!((at(&flow.strain, 1, 0) - 0.5).abs() < 1e-12);
        assert!((at(&flow.spin, 0, 1) - 0.5).abs() < 1e-12);
        assert!((at(&flow.spin, 1, 0) + 0.5).abs() < 1e-12);

        // d = (1,0), ḋ = 0: Bd = (0, ½), N = (0, ½).
        let d = VectorField::from_fn(g, |_, _| [1.0, 0.0]);
        let ddot = VectorField::zeros(g);
        let n = corotational_rate(&ddot, &flow.spin, &d).unwrap();
        assert!(n.comp(0).values()[g.idx(5, 5)].abs() < 1e-12);
        assert!((n.comp(1).values()[g.idx(5, 5)] - 0.5).abs() < 1e-12);

        // u ≡ 0 ⇒ A = B = 0 and N = ḋ.
        let u0 = VectorField::zeros(g);
        let flow0 = flow_tensors(&u0, Scheme::Spectral).unwrap();
        assert!(flow0.strain.comp(0, 1).sup_norm() < 1e-14);
        let ddot1 = VectorField::from_fn(g, |x, _| [0.0, libm::sin(x)]);
        let n0 = corotational_rate(&ddot1, &flow0.spin, &d).unwrap();
        for i in 0..2 {
            let mut err = 0.0f64;
            for (a, b) in n0.comp(i).values().iter().zip(ddot1.comp(i).values()) {
                err = err.max((a - b).abs());
            }
            assert!(err < 1e-14);
        }
    }

    #[test]
    fn kinematic_transport_examples() {
        let g = Grid2D::square(16).unwrap();
        let d = VectorField::from_fn(g, |_, _| [1.0, 0.0]);
        let n = VectorField::from_fn(g, |_, _| [0.0, 0.5]);

        // λ₁ = λ₂ = 0 ⇒ g ≡ 0.
        let c0 = ns_wave_map();
        let zero_strain = TensorField2::zeros(g);
        let gfield = kinematic_transport(&c0, &n, &zero_strain, &d).unwrap();
        assert!(gfield.comp(0).sup_norm() == 0.0 && gfield.comp(1).sup_norm() == 0.0);

        // λ₁ = -1, λ₂ = 0, N = (0, ½) ⇒ g = (0, -½).
        let (c1, _) = LeslieCoefficients::validate(&raw([0.0, -0.5, 0.5, 1.0, 0.0, 0.0], 0.0))
            .unwrap();
        assert_eq!(c1.lambda1(), -1.0);
        assert_eq!(c1.lambda2(), 0.0);
        let gf = kinematic_transport(&c1, &n, &zero_strain, &d).unwrap();
        assert!((gf.comp(1).values()[0] + 0.5).abs() < 1e-14);

        // λ₁ = -1, λ₂ = 1, A₁₂ = A₂₁ = ½, d = (1,0): d_j A_2j = ½ cancels λ₁N₂.
        let (c2, _) = LeslieCoefficients::validate(&raw([0.0, -1.0, 0.0, 1.0, 1.0, 0.0], 0.0))
            .unwrap();
        assert_eq!((c2.lambda1(), c2.lambda2()), (-1.0, 1.0));
        let mut strain = TensorField2::zeros(g);
        for v in strain.comp_mut(0, 1).values_mut() {
            *v = 0.5;
        }
        for v in strain.comp_mut(1, 0).values_mut() {
            *v = 0.5;
        }
        let gf = kinematic_transport(&c2, &n, &strain, &d).unwrap();
        assert!(gf.comp(0).sup_norm() < 1e-14);
        assert!(gf.comp(1).sup_norm() < 1e-14);
    }

    #[test]
    fn lagrange_gamma_examples() {
        let g = Grid2D::square(16).unwrap();
        let c = ns_wave_map();

        // Constant director at rest: Γ ≡ 0.
        let rho = ScalarField::constant(g, 1.0);
        let u = VectorField::zeros(g);
        let d = VectorField::from_fn(g, |_, _| [1.0, 0.0]);
        let ddot = VectorField::zeros(g);
        let gamma = lagrange_gamma(&c, &rho, &u, &d, &ddot, Scheme::Spectral).unwrap();
        assert!(gamma.sup_norm() < 1e-12);

        // ρ = 2, |ḋ|² = 1, |∇d|² = 3 via d = (cos, sin) scaled… use direct parts:
        // Γ = -ρ|ḋ|² + |∇d|² - λ₂ dᵀAd with λ₂ = 0 reduces to 3 - 2 = 1.
        let rho2 = ScalarField::constant(g, 2.0);
        let strain = TensorField2::zeros(g);
        let mut grad_d = TensorField2::zeros(g);
        // fill ∇d with entries whose squares sum to 3
        for v in grad_d.comp_mut(0, 0).values_mut() {
            *v = 1.0;
        }
        for v in grad_d.comp_mut(0, 1).values_mut() {
            *v = libm::sqrt(2.0);
        }
        let ddot1 = VectorField::from_fn(g, |_, _| [1.0, 0.0]);
        let gamma = gamma_from_parts(&c, &rho2, &strain, &grad_d, &d, &ddot1).unwrap();
        assert!((gamma.values()[3] - 1.0).abs() < 1e-14);

        // λ₂ = 1, ρ = 1, ḋ = 0, ∇d = 0, d = (1,1)/√2, A₁₂ = A₂₁ = ½: Γ = -½.
        let (c2, _) = LeslieCoefficients::validate(&raw([0.0, -1.0, 0.0, 1.0, 1.0, 0.0], 0.0))
            .unwrap();
        let s2 = libm::sqrt(0.5);
        let d2 = VectorField::from_fn(g, |_, _| [s2, s2]);
        let mut strain2 = TensorField2::zeros(g);
        for rc in [(0, 1), (1, 0)] {
            for v in strain2.comp_mut(rc.0, rc.1).values_mut() {
                *v = 0.5;
            }
        }
        let gamma = gamma_from_parts(
            &c2,
            &rho,
            &strain2,
            &TensorField2::zeros(g),
            &d2,
            &VectorField::zeros(g),
        )
        .unwrap();
        assert!((gamma.values()[7] + 0.5).abs() < 1e-14);
    }

    #[test]
    fn stresses_vanish_at_rest_and_match_harmonic_form() {
        let g = Grid2D::square(32).unwrap();
        let c = strictly_damped_example();
        let u = VectorField::zeros(g);
        let d = VectorField::from_fn(g, |_, _| [1.0, 0.0]);
        let ddot = VectorField::zeros(g);
        let s = stresses(&c, &u, &d, &ddot, Scheme::Spectral).unwrap();
        for t in [&s.sigma1, &s.sigma2, &s.sigma3] {
            for p in t.parts() {
                assert!(p.sup_norm() < 1e-13);
            }
        }

        // d = (cos x₁, sin x₁): Σ₂ = diag(-½, ½), spatially constant.
        let dh = VectorField::from_fn(g, |x, _| [libm::cos(x), libm::sin(x)]);
        let s = stresses(&c, &u, &dh, &ddot, Scheme::Spectral).unwrap();
        let at = |r: usize, cc: usize| s.sigma2.comp(r, cc).values()[g.idx(9, 3)];
        assert!((at(0, 0) + 0.5).abs() < 1e-12);
        assert!((at(1, 1) - 0.5).abs() < 1e-12);
        assert!(at(0, 1).abs() < 1e-12 && at(1, 0).abs() < 1e-12);
    }

    #[test]
    fn leslie_stress_mu2_only_entry() {
        // u = 0 kills every A-proportional term, so with μ₂ = 1, μ₆ = 1
        // (Parodi-consistent) the stress reduces to σ̃_ji = d_j ḋ_i. With
        // d = (1,0), ḋ = (0,1) the single entry (j,i) = (1,2) equals 1.
        let g = Grid2D::square(16).unwrap();
        let (c, _) = LeslieCoefficients::validate(&raw([0.0, 1.0, 0.0, 1.0, 0.0, 1.0], 0.0))
            .unwrap();
        let u = VectorField::zeros(g);
        let d = VectorField::from_fn(g, |_, _| [1.0, 0.0]);
        let ddot = VectorField::from_fn(g, |_, _| [0.0, 1.0]);
        let s = stresses(&c, &u, &d, &ddot, Scheme::Spectral).unwrap();
        let idx = g.idx(4, 4);
        assert!((s.sigma3.comp(0, 1).values()[idx] - 1.0).abs() < 1e-14);
        assert!(s.sigma3.comp(1, 0).values()[idx].abs() < 1e-14);
        assert!(s.sigma3.comp(0, 0).values()[idx].abs() < 1e-14);
        assert!(s.sigma3.comp(1, 1).values()[idx].abs() < 1e-14);
    }

    #[test]
    fn equilibrium_residuals_vanish() {
        let g = Grid2D::square(32).unwrap();
        let c = strictly_damped_example();
        let rho = ScalarField::constant(g, 1.0);
        let u = VectorField::zeros(g);
        let d = VectorField::from_fn(g, |_, _| [1.0, 0.0]);
        let ddot = VectorField::zeros(g);
        let r = residuals(&c, &rho, &u, &d, &ddot, Scheme::Spectral, DEFAULT_VACUUM_FLOOR)
            .unwrap();
        assert!(r.mass.sup_norm() < 1e-12);
        assert!(r.momentum.comp(0).sup_norm() < 1e-12);
        assert!(r.momentum.comp(1).sup_norm() < 1e-12);
        assert!(r.director.comp(0).sup_norm() < 1e-12);
        assert!(r.director.comp(1).sup_norm() < 1e-12);
    }

    #[test]
    fn harmonic_director_is_stationary() {
        let g = Grid2D::square(64).unwrap();
        for c in [ns_wave_map(), strictly_damped_example()] {
            let rho = ScalarField::constant(g, 1.0);
            let u = VectorField::zeros(g);
            let d = VectorField::from_fn(g, |x, _| [libm::cos(x), libm::sin(x)]);
            let ddot = VectorField::zeros(g);
            let r = residuals(&c, &rho, &u, &d, &ddot, Scheme::Spectral, DEFAULT_VACUUM_FLOOR)
                .unwrap();
            assert!(r.mass.sup_norm() < 1e-11);
            for i in 0..2 {
                assert!(r.momentum.comp(i).sup_norm() < 1e-11, "momentum");
                assert!(r.director.comp(i).sup_norm() < 1e-11, "director");
            }
        }
    }

    #[test]
    fn pressure_gradient_of_density_wave() {
        // ρ = 1 + 0.1 sin x₁, u = 0, γ = 2: mass ≡ 0 and momentum = -∇p =
        // -aγ ρ^{γ-1} ∇ρ ≠ 0 (both forms exact for γ = 2, band-limited).
        let g = Grid2D::square(64).unwrap();
        let c = ns_wave_map();
        let rho = ScalarField::from_fn(g, |x, _| 1.0 + 0.1 * libm::sin(x));
        let u = VectorField::zeros(g);
        let d = VectorField::from_fn(g, |_, _| [1.0, 0.0]);
        let ddot = VectorField::zeros(g);
        let r = residuals(&c, &rho, &u, &d, &ddot, Scheme::Spectral, DEFAULT_VACUUM_FLOOR)
            .unwrap();
        assert!(r.mass.sup_norm() < 1e-12);
        let a = c.pressure_amplitude();
        let gamma = c.gamma();
        let mut err = 0.0f64;
        for (i, v) in r.momentum.comp(0).values().iter().enumerate() {
            let x = g.coord(i % 64);
            let rho_x = 1.0 + 0.1 * libm::sin(x);
            let expected = -a * gamma * libm::pow(rho_x, gamma - 1.0) * 0.1 * libm::cos(x);
            err = err.max((v - expected).abs());
        }
        assert!(err < 1e-10, "err = {err}");
        assert!(r.momentum.comp(0).sup_norm() > 0.01);
    }

    #[test]
    fn vacuum_is_rejected() {
        let g = Grid2D::square(16).unwrap();
        let c = ns_wave_map();
        let rho = ScalarField::constant(g, 0.0);
        let u = VectorField::zeros(g);
        let d = VectorField::from_fn(g, |_, _| [1.0, 0.0]);
        let r = residuals(&c, &rho, &u, &d, &u.clone(), Scheme::Spectral, DEFAULT_VACUUM_FLOOR);
        assert!(matches!(r, Err(Error::Vacuum { .. })));
    }
}
