//! Energy and dissipation functionals, the discrete energy-law audit, the
//! density-bound certificate and the geometric constraint residuals.
//!
//! All breakdown entries hold *squared* norms, so the totals are plain sums
//! of their components.

use alloc::vec::Vec;

use crate::calculus::{self, inner_product, jet, jet_of_parts, pairwise_sum, Scheme, S_MAX};
use crate::constitutive::{flow_tensors, quadratic_form, LeslieCoefficients};
use crate::error::{Error, Result};
use crate::grid::{Field, ScalarField, VectorField};
use crate::state::State;

/// Itemized energy at one time level. `total_e` is the sum of the first
/// four entries; `e_tilde` is the unweighted perturbation energy around
/// `(ρ, u, d, ḋ) = (1, 0, ·, 0)`; `e_eta` is the cross-term-augmented
/// functional used by the decay diagnostics.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyBreakdown {
    pub t: f64,
    /// Density part: weighted homogeneous seminorm plus the γ-law mass term.
    pub n_s_rho: f64,
    /// `|u|²` in the ρ-weighted H^s norm.
    pub u_hs_rho: f64,
    /// `|ḋ|²` in the ρ-weighted H^s norm.
    pub ddot_hs_rho: f64,
    /// `|∇d|²` in the unweighted H^s norm.
    pub grad_d_hs: f64,
    pub total_e: f64,
    pub e_tilde: f64,
    pub e_eta: f64,
}

/// Itemized dissipation rate at one time level; `total_d` sums the five
/// components, `d_eta` is the augmented rate paired with `e_eta`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DissipationBreakdown {
    pub t: f64,
    /// `½μ₄ |∇u|²_{H^s}`.
    pub viscous: f64,
    /// `(½μ₄+ξ) |div u|²_{H^s}`.
    pub bulk: f64,
    /// `μ₁ Σ_k |dᵀ(∇^k A)d|²`.
    pub mu1_term: f64,
    /// `-λ₁ Σ_k |∇^k ḋ + (∇^k B)d + (λ₂/λ₁)(∇^k A)d|²`.
    pub lambda1_term: f64,
    /// `(μ₅+μ₆+λ₂²/λ₁) Σ_k |(∇^k A)d|²`.
    pub lambda2_term: f64,
    pub total_d: f64,
    pub d_eta: f64,
}

fn check_common(state: &State, s: usize) -> Result<()> {
    if s == 0 || s > S_MAX {
        return Err(Error::InvalidParameter { what: "sobolev order s", value: s as f64 });
    }
    state.validate(0.0)
}

fn gamma_law_mass(state: &State, coeffs: &LeslieCoefficients) -> f64 {
    let gamma = coeffs.gamma();
    let rv = state.rho.values();
    let sum = pairwise_sum(rv.len(), &mut |i| libm::pow(rv[i], gamma));
    2.0 * coeffs.pressure_amplitude() / (gamma - 1.0) * sum * state.grid().cell_area()
}

/// Energy functionals at Sobolev order `s`; `eta1`, `eta2` enter only
/// `e_eta` (zero values reproduce the plain weighted sums).
pub fn energy(
    state: &State,
    coeffs: &LeslieCoefficients,
    s: usize,
    eta1: f64,
    eta2: f64,
    scheme: Scheme,
) -> Result<EnergyBreakdown> {
    check_common(state, s)?;
    if coeffs.gamma() <= 1.0 + 1e-6 {
        return Err(Error::InvalidParameter {
            what: "gamma (energy needs gamma > 1)",
            value: coeffs.gamma(),
        });
    }
    if !(eta1.is_finite() && eta2.is_finite() && eta1 >= 0.0 && eta2 >= 0.0) {
        return Err(Error::InvalidParameter { what: "eta weights", value: eta1.min(eta2) });
    }

    let rho = &state.rho;
    let varrho = rho.map(|r| r - 1.0);
    let w_p = rho.map(|r| coeffs.pressure_weight(r));

    // One derivative table per field; ∇^k ρ = ∇^k ϱ for k ≥ 1.
    let j_rho = jet(&varrho, s, scheme);
    let j_u = jet(&state.u, s, scheme);
    let j_ddot = jet(&state.ddot, s, scheme);
    let j_d = jet(&state.d, s + 1, scheme);

    let mut n_s_rho = gamma_law_mass(state, coeffs);
    for k in 1..=s {
        n_s_rho += j_rho.seminorm_sq(k, Some(&w_p));
    }
    let mut u_hs_rho = 0.0;
    let mut ddot_hs_rho = 0.0;
    for k in 0..=s {
        u_hs_rho += j_u.seminorm_sq(k, Some(rho));
        ddot_hs_rho += j_ddot.seminorm_sq(k, Some(rho));
    }
    let mut grad_d_hs = 0.0;
    for k in 1..=s + 1 {
        grad_d_hs += j_d.seminorm_sq(k, None);
    }
    let total_e = n_s_rho + u_hs_rho + ddot_hs_rho + grad_d_hs;

    let mut e_tilde = grad_d_hs;
    for k in 0..=s {
        e_tilde += j_rho.seminorm_sq(k, None)
            + j_u.seminorm_sq(k, None)
            + j_ddot.seminorm_sq(k, None);
    }

    // e_eta per the decay functional: weight deficits η₁, η₂ on the bulk
    // terms plus the two cross terms.
    let mut e_eta = j_rho.seminorm_sq(0, Some(&w_p));
    for k in 1..=s {
        e_eta += j_rho.seminorm_sq(k, Some(&w_p)) - eta1 * j_rho.seminorm_sq(k, None);
    }
    for k in 0..s {
        e_eta += j_u.seminorm_sq(k, Some(rho)) - eta1 * j_u.seminorm_sq(k, None);
        e_eta += j_ddot.seminorm_sq(k + 1, Some(rho)) - eta2 * j_ddot.seminorm_sq(k + 1, None);
        e_eta += (1.0 - eta2) * j_d.seminorm_sq(k + 1, None);
    }
    e_eta += j_u.seminorm_sq(s, Some(rho))
        + j_ddot.seminorm_sq(0, Some(rho))
        + j_d.seminorm_sq(s + 1, None);
    if eta1 > 0.0 {
        let mut shifted = state.u.clone();
        shifted.axpy(1.0, &varrho.gradient(scheme)?);
        e_eta += eta1 * calculus::sobolev_norm_sq(&shifted, s - 1, None, false, scheme)?;
    }
    if eta2 > 0.0 {
        let mut shifted = state.ddot.clone();
        shifted.axpy(1.0, &state.d);
        e_eta += eta2 * calculus::sobolev_norm_sq(&shifted, s, None, true, scheme)?;
    }

    Ok(EnergyBreakdown {
        t: state.t,
        n_s_rho,
        u_hs_rho,
        ddot_hs_rho,
        grad_d_hs,
        total_e,
        e_tilde,
        e_eta,
    })
}

/// Energy dissipation rate at Sobolev order `s`.
pub fn dissipation(
    state: &State,
    coeffs: &LeslieCoefficients,
    s: usize,
    eta1: f64,
    eta2: f64,
    scheme: Scheme,
) -> Result<DissipationBreakdown> {
    check_common(state, s)?;
    let ratio = coeffs.lambda_ratio()?;
    let strain_damping = coeffs.strain_damping()?;

    let grid = state.grid();
    let area = grid.cell_area();
    let len = grid.node_count();
    let flow = flow_tensors(&state.u, scheme)?;

    let j_u = jet(&state.u, s + 1, scheme);
    let mut viscous = 0.0;
    for k in 1..=s + 1 {
        viscous += j_u.seminorm_sq(k, None);
    }
    viscous *= 0.5 * coeffs.mu4();

    let div_u = state.u.divergence(scheme)?;
    let j_div = jet(&div_u, s, scheme);
    let mut bulk = 0.0;
    for k in 0..=s {
        bulk += j_div.seminorm_sq(k, None);
    }
    bulk *= 0.5 * coeffs.mu4() + coeffs.xi();

    // The three director-coupled sums share the jets of A, B and ḋ; the
    // contraction with (the underived) d happens pointwise per partial.
    let j_a = jet_of_parts(flow.strain.parts(), s, scheme);
    let j_b = jet_of_parts(flow.spin.parts(), s, scheme);
    let j_ddot = jet(&state.ddot, s, scheme);
    let (d0, d1) = (state.d.comp(0).values(), state.d.comp(1).values());

    let mut mu1_sum = 0.0;
    let mut lam1_sum = 0.0;
    let mut lam2_sum = 0.0;
    for k in 0..=s {
        let pa = j_a.partials(k);
        let pb = j_b.partials(k);
        let pd = j_ddot.partials(k);
        for j in 0..=k {
            let mult = calculus::binomial(k, j) as f64;
            // Tensor parts index (r, c) = 2r + c.
            let a00 = pa[0][j].values();
            let a01 = pa[1][j].values();
            let a10 = pa[2][j].values();
            let a11 = pa[3][j].values();
            let b00 = pb[0][j].values();
            let b01 = pb[1][j].values();
            let b10 = pb[2][j].values();
            let b11 = pb[3][j].values();
            let dd0 = pd[0][j].values();
            let dd1 = pd[1][j].values();

            let mut s_mu1 = 0.0;
            let mut s_lam1 = 0.0;
            let mut s_lam2 = 0.0;
            for i in 0..len {
                // ((∂^α A) d)_i = (∂^α A)_{ki} d_k, row contraction.
                let ad0 = a00[i] * d0[i] + a10[i] * d1[i];
                let ad1 = a01[i] * d0[i] + a11[i] * d1[i];
                let bd0 = b00[i] * d0[i] + b10[i] * d1[i];
                let bd1 = b01[i] * d0[i] + b11[i] * d1[i];
                let dad = d0[i] * ad0 + d1[i] * ad1;
                s_mu1 += dad * dad;
                s_lam2 += ad0 * ad0 + ad1 * ad1;
                let v0 = dd0[i] + bd0 + ratio * ad0;
                let v1 = dd1[i] + bd1 + ratio * ad1;
                s_lam1 += v0 * v0 + v1 * v1;
            }
            mu1_sum += mult * s_mu1 * area;
            lam1_sum += mult * s_lam1 * area;
            lam2_sum += mult * s_lam2 * area;
        }
    }
    let mu1_term = coeffs.mu1() * mu1_sum;
    let lambda1_term = -coeffs.lambda1() * lam1_sum;
    let lambda2_term = strain_damping * lam2_sum;
    let total_d = viscous + bulk + mu1_term + lambda1_term + lambda2_term;

    // Augmented rate: halved viscous/bulk/λ₁ parts plus the η-weighted
    // density and director gradient dissipation.
    let mut d_eta = 0.5 * viscous + 0.5 * bulk + mu1_term + 0.5 * lambda1_term + lambda2_term;
    if eta1 > 0.0 {
        let varrho = state.rho.map(|r| r - 1.0);
        let w_p = state.rho.map(|r| coeffs.pressure_weight(r));
        let j_rho = jet(&varrho, s, scheme);
        let mut sum = 0.0;
        for k in 1..=s {
            sum += j_rho.seminorm_sq(k, Some(&w_p));
        }
        d_eta += 0.75 * eta1 * sum;
    }
    if eta2 > 0.0 {
        let w_inv2 = state.rho.map(|r| 1.0 / (r * r));
        let j_d = jet(&state.d, s + 1, scheme);
        let mut sum = 0.0;
        for k in 1..=s {
            sum += j_d.seminorm_sq(k + 1, Some(&w_inv2));
        }
        d_eta += 0.75 * eta2 * sum;
    }

    Ok(DissipationBreakdown {
        t: state.t,
        viscous,
        bulk,
        mu1_term,
        lambda1_term,
        lambda2_term,
        total_d,
        d_eta,
    })
}

/// L² (k = 0) energy of the basic energy law:
/// `∫ 2a/(γ-1) ρ^γ + ρ(|u|² + |ḋ|²) + |∇d|² dx`.
pub fn l2_energy(state: &State, coeffs: &LeslieCoefficients, scheme: Scheme) -> Result<f64> {
    state.validate(0.0)?;
    let grad_d = state.d.gradient(scheme)?;
    Ok(gamma_law_mass(state, coeffs)
        + inner_product(&state.u, &state.u, Some(&state.rho))?
        + inner_product(&state.ddot, &state.ddot, Some(&state.rho))?
        + inner_product(&grad_d, &grad_d, None)?)
}

/// L² (k = 0) dissipation rate of the basic energy law.
pub fn l2_dissipation(
    state: &State,
    coeffs: &LeslieCoefficients,
    scheme: Scheme,
) -> Result<f64> {
    state.validate(0.0)?;
    let ratio = coeffs.lambda_ratio()?;
    let strain_damping = coeffs.strain_damping()?;
    let flow = flow_tensors(&state.u, scheme)?;
    let grad_u = state.u.gradient(scheme)?;
    let div_u = state.u.divergence(scheme)?;

    let ad = crate::constitutive::contract_row(&flow.strain, &state.d);
    let bd = crate::constitutive::contract_row(&flow.spin, &state.d);
    let dad = quadratic_form(&flow.strain, &state.d);
    let mut lam1_vec = state.ddot.clone();
    lam1_vec.axpy(1.0, &bd);
    lam1_vec.axpy(ratio, &ad);

    Ok(0.5 * coeffs.mu4() * inner_product(&grad_u, &grad_u, None)?
        + (0.5 * coeffs.mu4() + coeffs.xi()) * inner_product(&div_u, &div_u, None)?
        + coeffs.mu1() * inner_product(&dad, &dad, None)?
        - coeffs.lambda1() * inner_product(&lam1_vec, &lam1_vec, None)?
        + strain_damping * inner_product(&ad, &ad, None)?)
}

/// Residual series of the discrete basic energy law.
#[derive(Clone, Debug)]
pub struct AuditReport {
    /// Interior sample times (one per residual).
    pub times: Vec<f64>,
    /// `r(t) = [E₀(t+dt) - E₀(t-dt)]/(2dt) + 2 D₀(t)`.
    pub residuals: Vec<f64>,
    pub max_abs: f64,
}

/// Checks the basic energy law along a uniformly spaced trajectory by
/// centered time differencing of the L² energy — an independent check of
/// the stepper rather than a restatement of it.
pub fn energy_law_audit(
    states: &[State],
    coeffs: &LeslieCoefficients,
    dt: f64,
    scheme: Scheme,
) -> Result<AuditReport> {
    if states.len() < 3 {
        return Err(Error::TooFewSamples { needed: 3, got: states.len() });
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidParameter { what: "dt", value: dt });
    }
    let energies: Vec<f64> = states
        .iter()
        .map(|s| l2_energy(s, coeffs, scheme))
        .collect::<Result<_>>()?;
    let mut times = Vec::with_capacity(states.len() - 2);
    let mut residuals = Vec::with_capacity(states.len() - 2);
    let mut max_abs = 0.0f64;
    for i in 1..states.len() - 1 {
        let rate = (energies[i + 1] - energies[i - 1]) / (2.0 * dt);
        let r = rate + 2.0 * l2_dissipation(&states[i], coeffs, scheme)?;
        max_abs = max_abs.max(r.abs());
        times.push(states[i].t);
        residuals.push(r);
    }
    Ok(AuditReport { times, residuals, max_abs })
}

/// Outcome of the density-bound certificate. Margins are relative; the
/// check passes when both stay above `-rtol`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DensityBoundCertificate {
    pub pass: bool,
    pub worst_lower_margin: f64,
    pub worst_upper_margin: f64,
    /// Step index where the worst margin occurred.
    pub worst_step: usize,
    pub rtol: f64,
}

/// Default relative tolerance of the density-bound certificate.
pub const DENSITY_BOUND_RTOL: f64 = 1e-6;

/// Verifies `ρ_lo e^{-∫|div u|_∞} ≤ min ρ(t)` and
/// `max ρ(t) ≤ ρ_hi e^{+∫|div u|_∞}` along a run, with the time integral
/// taken by the trapezoid rule over the uniformly spaced samples.
pub fn density_bound_check(
    min_rho: &[f64],
    max_rho: &[f64],
    divu_inf: &[f64],
    rho_lo: f64,
    rho_hi: f64,
    dt: f64,
    rtol: f64,
) -> Result<DensityBoundCertificate> {
    let n = min_rho.len();
    if n == 0 || max_rho.len() != n || divu_inf.len() != n {
        return Err(Error::TooFewSamples { needed: 1, got: n.min(max_rho.len()) });
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidParameter { what: "dt", value: dt });
    }
    if !(rho_lo > 0.0 && rho_hi >= rho_lo) {
        return Err(Error::InvalidParameter { what: "density bounds", value: rho_lo });
    }
    let slack = 1e-12;
    if min_rho[0] < rho_lo * (1.0 - slack) || max_rho[0] > rho_hi * (1.0 + slack) {
        return Err(Error::InitialBoundViolated {
            min_rho: min_rho[0],
            max_rho: max_rho[0],
            lo: rho_lo,
            hi: rho_hi,
        });
    }

    let mut integral = 0.0;
    let mut worst_lower = f64::INFINITY;
    let mut worst_upper = f64::INFINITY;
    let mut worst_step = 0;
    for i in 0..n {
        if i > 0 {
            integral += 0.5 * dt * (divu_inf[i - 1] + divu_inf[i]);
        }
        let lower = rho_lo * libm::exp(-integral);
        let upper = rho_hi * libm::exp(integral);
        let lo_margin = (min_rho[i] - lower) / lower;
        let up_margin = (upper - max_rho[i]) / upper;
        if lo_margin.min(up_margin) < worst_lower.min(worst_upper) {
            worst_step = i;
        }
        worst_lower = worst_lower.min(lo_margin);
        worst_upper = worst_upper.min(up_margin);
    }
    Ok(DensityBoundCertificate {
        pass: worst_lower >= -rtol && worst_upper >= -rtol,
        worst_lower_margin: worst_lower,
        worst_upper_margin: worst_upper,
        worst_step,
        rtol,
    })
}

/// Constants `(c, C)` with `c·Ẽ(t) ≤ ℰ_η(t) ≤ C·Ẽ(t)`, computed from the
/// pointwise extremes of the weights `p'(ρ)/ρ`, `ρ` and `1` minus the η
/// deficits, with the cross terms absorbed by `2·max(η₁, η₂)`. The lower
/// constant is positive only while the deficits stay below the smallest
/// weight (the small-η regime of the decay functional).
pub fn eta_equivalence_bounds(
    state: &State,
    coeffs: &LeslieCoefficients,
    eta1: f64,
    eta2: f64,
) -> Result<(f64, f64)> {
    state.validate(0.0)?;
    let min_rho = state.rho.min_value();
    let max_rho = state.rho.max_value();
    let min_wp = coeffs.pressure_weight(if coeffs.gamma() >= 2.0 { min_rho } else { max_rho });
    let max_wp = coeffs.pressure_weight(if coeffs.gamma() >= 2.0 { max_rho } else { min_rho });
    let c = (min_wp - eta1)
        .min(min_rho - eta1)
        .min(min_rho - eta2)
        .min(1.0 - eta2);
    let big_c = max_wp.max(max_rho).max(1.0) + 2.0 * eta1.max(eta2);
    Ok((c, big_c))
}

/// Sup-norm residuals of the geometric constraints.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstraintResiduals {
    /// `max ||d|² - 1|`.
    pub unit_norm_dev: f64,
    /// `max |d·ḋ|`.
    pub tangency_dev: f64,
}

pub fn constraint_residuals(state: &State) -> ConstraintResiduals {
    constraint_residuals_of(&state.d, &state.ddot)
}

pub fn constraint_residuals_of(d: &VectorField, ddot: &VectorField) -> ConstraintResiduals {
    let (d0, d1) = (d.comp(0).values(), d.comp(1).values());
    let (v0, v1) = (ddot.comp(0).values(), ddot.comp(1).values());
    let mut unit = 0.0f64;
    let mut tang = 0.0f64;
    for i in 0..d0.len() {
        unit = unit.max((d0[i] * d0[i] + d1[i] * d1[i] - 1.0).abs());
        tang = tang.max((d0[i] * v0[i] + d1[i] * v1[i]).abs());
    }
    ConstraintResiduals { unit_norm_dev: unit, tangency_dev: tang }
}

/// Pointwise dissipation integrands of the basic energy law, exposed so
/// sign properties can be checked node by node.
pub fn dissipation_integrands(
    state: &State,
    coeffs: &LeslieCoefficients,
    scheme: Scheme,
) -> Result<[ScalarField; 5]> {
    let ratio = coeffs.lambda_ratio()?;
    let strain_damping = coeffs.strain_damping()?;
    let flow = flow_tensors(&state.u, scheme)?;
    let grad_u = state.u.gradient(scheme)?;
    let div_u = state.u.divergence(scheme)?;
    let ad = crate::constitutive::contract_row(&flow.strain, &state.d);
    let bd = crate::constitutive::contract_row(&flow.spin, &state.d);
    let dad = quadratic_form(&flow.strain, &state.d);
    let grid = state.grid();
    let len = grid.node_count();

    let mut out = [
        ScalarField::zeros(grid),
        ScalarField::zeros(grid),
        ScalarField::zeros(grid),
        ScalarField::zeros(grid),
        ScalarField::zeros(grid),
    ];
    for i in 0..len {
        let mut gsq = 0.0;
        for p in grad_u.parts() {
            let v = p.values()[i];
            gsq += v * v;
        }
        out[0].values_mut()[i] = 0.5 * coeffs.mu4() * gsq;
        let dv = div_u.values()[i];
        out[1].values_mut()[i] = (0.5 * coeffs.mu4() + coeffs.xi()) * dv * dv;
        let q = dad.values()[i];
        out[2].values_mut()[i] = coeffs.mu1() * q * q;
        let v0 = state.ddot.comp(0).values()[i] + bd.comp(0).values()[i] + ratio * ad.comp(0).values()[i];
        let v1 = state.ddot.comp(1).values()[i] + bd.comp(1).values()[i] + ratio * ad.comp(1).values()[i];
        out[3].values_mut()[i] = -coeffs.lambda1() * (v0 * v0 + v1 * v1);
        let a0 = ad.comp(0).values()[i];
        let a1 = ad.comp(1).values()[i];
        out[4].values_mut()[i] = strain_damping * (a0 * a0 + a1 * a1);
    }
    Ok(out)
}
