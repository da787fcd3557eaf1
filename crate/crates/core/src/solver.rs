//! Time integration of the coupled system on the torus.
//!
//! One step is an operator split: (1) conservative density transport,
//! (2) a velocity update whose stiff constant-coefficient viscous part is
//! solved implicitly in frequency space, (3) an explicit first-order-in-time
//! update of the director pair `(d, ḋ)` with optional sharp spectral
//! truncation of its right-hand side. The Lie composition is first order;
//! the Strang composition with second-order substeps is second order.
//! An optional per-step fixed-point iteration re-solves the three
//! subproblems with lagged coefficients until consecutive iterates agree.

use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::calculus::{inner_product, sobolev_norm_sq, Scheme, S_MAX};
use crate::constitutive::{
    contract_row, director_force, stresses, LeslieCoefficients, DEFAULT_VACUUM_FLOOR,
};
use crate::energy::{
    constraint_residuals, density_bound_check, dissipation, energy, ConstraintResiduals,
    DensityBoundCertificate, DissipationBreakdown, EnergyBreakdown, DENSITY_BOUND_RTOL,
};
use crate::error::{Error, Result};
use crate::fft::FftPlan;
use crate::grid::{Field, Grid2D, ScalarField, VectorField};
use crate::mollifier::SpectralTruncation;
use crate::state::{normalize_director, project_tangent, State};
use crate::synth;

/// Operator-splitting composition order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Splitting {
    /// First-order sequential composition.
    Lie,
    /// Second-order symmetric composition with second-order substeps.
    Strang,
}

/// Per-step fixed-point solve settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PicardConfig {
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for PicardConfig {
    fn default() -> Self {
        PicardConfig { max_iters: 20, tol: 1e-10 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig {
    pub dt: f64,
    pub t_end: f64,
    pub scheme: Scheme,
    pub splitting: Splitting,
    /// Spectral truncation of the director right-hand side (the mollified
    /// construction); `None` leaves the director equations untruncated.
    pub mollifier_eps: Option<f64>,
    /// When set, `step` is replaced by the fixed-point solve (always the
    /// first-order map, independent of `splitting`).
    pub picard: Option<PicardConfig>,
    /// Renormalize `d` and re-project `ḋ` after every step.
    pub project_director: bool,
    /// Advective + wave CFL limit; steps exceeding it are rejected.
    pub cfl_limit: f64,
    pub vacuum_floor: f64,
    /// Truncate nonlinear right-hand sides at 2/3 Nyquist.
    pub dealias: bool,
}

impl SolverConfig {
    pub fn new(dt: f64, t_end: f64) -> Self {
        SolverConfig {
            dt,
            t_end,
            scheme: Scheme::Spectral,
            splitting: Splitting::Lie,
            mollifier_eps: None,
            picard: None,
            project_director: true,
            cfl_limit: 0.4,
            vacuum_floor: DEFAULT_VACUUM_FLOOR,
            dealias: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidParameter { what: "dt", value: self.dt });
        }
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return Err(Error::InvalidParameter { what: "t_end", value: self.t_end });
        }
        if !(self.cfl_limit > 0.0 && self.cfl_limit <= 1.0) {
            return Err(Error::InvalidParameter { what: "cfl_limit", value: self.cfl_limit });
        }
        if let Some(eps) = self.mollifier_eps {
            SpectralTruncation::new(eps)?;
        }
        if let Some(p) = self.picard {
            if p.max_iters == 0 {
                return Err(Error::InvalidParameter {
                    what: "picard max_iters",
                    value: p.max_iters as f64,
                });
            }
            if !(p.tol.is_finite() && p.tol > 0.0) {
                return Err(Error::InvalidParameter { what: "picard tol", value: p.tol });
            }
        }
        if !(self.vacuum_floor.is_finite() && self.vacuum_floor >= 0.0) {
            return Err(Error::InvalidParameter {
                what: "vacuum_floor",
                value: self.vacuum_floor,
            });
        }
        Ok(())
    }
}

/// Per-step diagnostics.
#[derive(Clone, Copy, Debug)]
pub struct StepReport {
    /// Time after the step.
    pub t: f64,
    pub cfl_observed: f64,
    /// 0 when the fixed-point solve is off.
    pub picard_iters: usize,
    pub picard_residual: f64,
    pub unit_norm_dev: f64,
    pub tangency_dev: f64,
    pub min_rho: f64,
    pub max_rho: f64,
}

struct StepContext<'a> {
    coeffs: &'a LeslieCoefficients,
    scheme: Scheme,
    moll: Option<SpectralTruncation>,
    dealias: Option<SpectralTruncation>,
}

impl<'a> StepContext<'a> {
    fn new(coeffs: &'a LeslieCoefficients, config: &SolverConfig, grid: Grid2D) -> Result<Self> {
        let moll = match config.mollifier_eps {
            Some(eps) => Some(SpectralTruncation::new(eps)?),
            None => None,
        };
        let dealias = config.dealias.then(|| SpectralTruncation::two_thirds_rule(grid));
        Ok(StepContext { coeffs, scheme: config.scheme, moll, dealias })
    }

    fn dealias_field<F: Field>(&self, f: F) -> Result<F> {
        match &self.dealias {
            Some(tr) => tr.apply(&f),
            None => Ok(f),
        }
    }

    fn mollify_field<F: Field>(&self, f: F) -> Result<F> {
        let f = match &self.moll {
            Some(tr) => tr.apply(&f)?,
            None => f,
        };
        self.dealias_field(f)
    }
}

fn observed_cfl(state: &State, dt: f64) -> f64 {
    let h = state.grid().spacing();
    let max_u = state.u.max_norm();
    let wave = libm::sqrt(1.0 / state.rho.min_value());
    dt * (max_u + wave) / h
}

// --- density substep -------------------------------------------------------

fn mass_flux_divergence(rho: &ScalarField, u: &VectorField, ctx: &StepContext) -> Result<ScalarField> {
    let mk = |i: usize| {
        let mut c = rho.clone();
        for (o, v) in c.values_mut().iter_mut().zip(u.comp(i).values()) {
            *o *= v;
        }
        c
    };
    let flux = VectorField::from_components(mk(0), mk(1))?;
    ctx.dealias_field(flux.divergence(ctx.scheme)?)
}

fn density_substep(
    rho: &ScalarField,
    u: &VectorField,
    tau: f64,
    second_order: bool,
    ctx: &StepContext,
) -> Result<ScalarField> {
    let f0 = mass_flux_divergence(rho, u, ctx)?;
    let mut out = rho.clone();
    if second_order {
        let mut stage = rho.clone();
        stage.axpy(-tau, &f0);
        let f1 = mass_flux_divergence(&stage, u, ctx)?;
        out.axpy(-0.5 * tau, &f0);
        out.axpy(-0.5 * tau, &f1);
    } else {
        out.axpy(-tau, &f0);
    }
    Ok(out)
}

// --- velocity substep -------------------------------------------------------

/// `L u = (μ₄/2) Δu + (μ₄/2 + ξ) ∇(div u)`, the stiff viscous operator.
fn viscous_apply(u: &VectorField, ctx: &StepContext) -> Result<VectorField> {
    let c = ctx.coeffs;
    let mut out = u.laplacian(ctx.scheme)?;
    for p in out.parts_mut() {
        for v in p.values_mut() {
            *v *= 0.5 * c.mu4();
        }
    }
    let grad_div = u.divergence(ctx.scheme)?.gradient(ctx.scheme)?;
    out.axpy(0.5 * c.mu4() + c.xi(), &grad_div);
    Ok(out)
}

/// Solves `(I - c L) u = rhs` bin by bin in frequency space; the 2×2 system
/// per bin is inverted by the Sherman–Morrison formula.
fn viscous_solve(rhs: &VectorField, c: f64, ctx: &StepContext) -> Result<VectorField> {
    let grid = rhs.grid();
    let n = grid.n();
    let plan = FftPlan::new(n);
    let mut spec0 = plan.forward2(rhs.comp(0).values());
    let mut spec1 = plan.forward2(rhs.comp(1).values());
    let half_mu4 = 0.5 * ctx.coeffs.mu4();
    let beta_coef = half_mu4 + ctx.coeffs.xi();
    for ky in 0..n {
        let k2 = crate::calculus::symbol(grid, ky, ctx.scheme);
        for kx in 0..n {
            let k1 = crate::calculus::symbol(grid, kx, ctx.scheme);
            let ksq = k1 * k1 + k2 * k2;
            let alpha = 1.0 + c * half_mu4 * ksq;
            let beta = c * beta_coef;
            let denom = alpha + beta * ksq;
            if !(alpha > 0.0 && denom > 0.0) {
                return Err(Error::InvalidParameter {
                    what: "implicit viscous solve (singular symbol)",
                    value: denom,
                });
            }
            let idx = ky * n + kx;
            let v0 = spec0[idx];
            let v1 = spec1[idx];
            let kv = v0 * k1 + v1 * k2;
            let corr = beta / (alpha * denom);
            spec0[idx] = v0 / alpha - kv * (corr * k1);
            spec1[idx] = v1 / alpha - kv * (corr * k2);
        }
    }
    VectorField::from_components(
        ScalarField::from_values(grid, plan.inverse2_real(spec0))?,
        ScalarField::from_values(grid, plan.inverse2_real(spec1))?,
    )
}

/// Explicit part of the velocity equation:
/// `F(u) = -u·∇u - (p'(ρ)/ρ)∇ρ + ρ⁻¹ div(Σ₂+Σ₃) + (ρ⁻¹ - ν_ref) L u`.
fn velocity_force(
    u: &VectorField,
    rho: &ScalarField,
    d: &VectorField,
    ddot: &VectorField,
    nu_ref: f64,
    ctx: &StepContext,
) -> Result<VectorField> {
    let grid = u.grid();
    let len = grid.node_count();
    let scheme = ctx.scheme;

    let grad_u = u.gradient(scheme)?;
    let mut force = contract_row(&grad_u, u); // u·∇u
    for p in force.parts_mut() {
        for v in p.values_mut() {
            *v = -*v;
        }
    }

    let grad_rho = rho.gradient(scheme)?;
    for i in 0..2 {
        let dst = force.comp_mut(i).values_mut();
        let (rv, gv) = (rho.values(), grad_rho.comp(i).values());
        for p in 0..len {
            dst[p] -= ctx.coeffs.pressure_weight(rv[p]) * rv[p] * gv[p] / rv[p];
        }
    }

    let str = stresses(ctx.coeffs, u, d, ddot, scheme)?;
    let mut elastic = str.sigma2;
    elastic.axpy(1.0, &str.sigma3);
    let div_el = elastic.divergence(scheme)?;
    for i in 0..2 {
        let dst = force.comp_mut(i).values_mut();
        let (rv, ev) = (rho.values(), div_el.comp(i).values());
        for p in 0..len {
            dst[p] += ev[p] / rv[p];
        }
    }

    // Variable-density correction to the frozen-coefficient implicit solve.
    let lu = viscous_apply(u, ctx)?;
    for i in 0..2 {
        let dst = force.comp_mut(i).values_mut();
        let (rv, lv) = (rho.values(), lu.comp(i).values());
        for p in 0..len {
            dst[p] += (1.0 / rv[p] - nu_ref) * lv[p];
        }
    }

    ctx.dealias_field(force)
}

fn velocity_substep(
    u: &VectorField,
    rho: &ScalarField,
    d: &VectorField,
    ddot: &VectorField,
    tau: f64,
    second_order: bool,
    ctx: &StepContext,
) -> Result<VectorField> {
    let nu_ref = 1.0 / rho.mean();
    if !second_order {
        let f = velocity_force(u, rho, d, ddot, nu_ref, ctx)?;
        let mut rhs = u.clone();
        rhs.axpy(tau, &f);
        return viscous_solve(&rhs, tau * nu_ref, ctx);
    }
    // IMEX midpoint: backward-Euler predictor to the half step, then an
    // explicit midpoint force with Crank–Nicolson on the stiff part.
    let f0 = velocity_force(u, rho, d, ddot, nu_ref, ctx)?;
    let mut rhs = u.clone();
    rhs.axpy(0.5 * tau, &f0);
    let u_half = viscous_solve(&rhs, 0.5 * tau * nu_ref, ctx)?;
    let f_half = velocity_force(&u_half, rho, d, ddot, nu_ref, ctx)?;
    let mut rhs = u.clone();
    rhs.axpy(tau, &f_half);
    rhs.axpy(0.5 * tau * nu_ref, &viscous_apply(u, ctx)?);
    viscous_solve(&rhs, 0.5 * tau * nu_ref, ctx)
}

// --- director substep -------------------------------------------------------

/// Right-hand sides of the first-order director system:
/// `∂_t ḋ = 𝒥[ρ⁻¹(Δd + Γd + λ₁(ḋ+Bd) + λ₂Ad) - u·∇ḋ]` and
/// `∂_t d = ḋ - 𝒥(u·∇d)`.
fn director_rhs(
    d: &VectorField,
    ddot: &VectorField,
    rho: &ScalarField,
    u: &VectorField,
    ctx: &StepContext,
) -> Result<(VectorField, VectorField)> {
    let scheme = ctx.scheme;
    let force = director_force(ctx.coeffs, rho, u, d, ddot, scheme)?;
    let grad_ddot = ddot.gradient(scheme)?;
    let adv_ddot = contract_row(&grad_ddot, u);
    let mut accel = VectorField::zeros(d.grid());
    for i in 0..2 {
        let dst = accel.comp_mut(i).values_mut();
        let (fv, rv, av) = (force.comp(i).values(), rho.values(), adv_ddot.comp(i).values());
        for p in 0..dst.len() {
            dst[p] = fv[p] / rv[p] - av[p];
        }
    }
    let accel = ctx.mollify_field(accel)?;

    let grad_d = d.gradient(scheme)?;
    let adv_d = ctx.mollify_field(contract_row(&grad_d, u))?;
    let mut slope = ddot.clone();
    slope.axpy(-1.0, &adv_d);
    Ok((accel, slope))
}

fn director_substep(
    d: &VectorField,
    ddot: &VectorField,
    rho: &ScalarField,
    u: &VectorField,
    tau: f64,
    second_order: bool,
    ctx: &StepContext,
) -> Result<(VectorField, VectorField)> {
    if !second_order {
        // Semi-implicit Euler pairing: advance ḋ first, then d with it.
        let (accel, mut slope) = director_rhs(d, ddot, rho, u, ctx)?;
        let mut ddot_new = ddot.clone();
        ddot_new.axpy(tau, &accel);
        // slope currently ḋ_old - 𝒥(u·∇d); swap in the updated ḋ.
        slope.axpy(-1.0, ddot);
        slope.axpy(1.0, &ddot_new);
        let mut d_new = d.clone();
        d_new.axpy(tau, &slope);
        return Ok((d_new, ddot_new));
    }
    let (a1, s1) = director_rhs(d, ddot, rho, u, ctx)?;
    let mut d_half = d.clone();
    d_half.axpy(0.5 * tau, &s1);
    let mut ddot_half = ddot.clone();
    ddot_half.axpy(0.5 * tau, &a1);
    let (a2, s2) = director_rhs(&d_half, &ddot_half, rho, u, ctx)?;
    let mut d_new = d.clone();
    d_new.axpy(tau, &s2);
    let mut ddot_new = ddot.clone();
    ddot_new.axpy(tau, &a2);
    Ok((d_new, ddot_new))
}

// --- full step ---------------------------------------------------------------

fn check_vacuum(rho: &ScalarField, floor: f64) -> Result<()> {
    if !rho.is_finite() {
        return Err(Error::NonFinite("density"));
    }
    let min_rho = rho.min_value();
    if min_rho <= floor {
        return Err(Error::Vacuum { min_rho, floor });
    }
    Ok(())
}

fn finish_step(
    t_new: f64,
    rho: ScalarField,
    u: VectorField,
    d: VectorField,
    ddot: VectorField,
    config: &SolverConfig,
    cfl_observed: f64,
    picard_iters: usize,
    picard_residual: f64,
) -> Result<(State, StepReport)> {
    let (d, ddot) = if config.project_director {
        let dn = normalize_director(&d)?;
        let dd = project_tangent(&dn, &ddot);
        (dn, dd)
    } else {
        (d, ddot)
    };
    let state = State { t: t_new, rho, u, d, ddot };
    state.validate(config.vacuum_floor)?;
    let cons = constraint_residuals(&state);
    let report = StepReport {
        t: t_new,
        cfl_observed,
        picard_iters,
        picard_residual,
        unit_norm_dev: cons.unit_norm_dev,
        tangency_dev: cons.tangency_dev,
        min_rho: state.rho.min_value(),
        max_rho: state.rho.max_value(),
    };
    Ok((state, report))
}

fn cfl_gate(state: &State, config: &SolverConfig) -> Result<f64> {
    let cfl = observed_cfl(state, config.dt);
    if cfl > config.cfl_limit {
        return Err(Error::CflViolation {
            observed: cfl,
            limit: config.cfl_limit,
            max_dt: config.dt * config.cfl_limit / cfl,
        });
    }
    Ok(cfl)
}

/// Advances one time step with the configured splitting.
pub fn step(
    state: &State,
    coeffs: &LeslieCoefficients,
    config: &SolverConfig,
) -> Result<(State, StepReport)> {
    config.validate()?;
    state.validate(config.vacuum_floor)?;
    let cfl = cfl_gate(state, config)?;
    let ctx = StepContext::new(coeffs, config, state.grid())?;
    let dt = config.dt;

    let (rho_new, u_new, d_new, ddot_new) = match config.splitting {
        Splitting::Lie => {
            let rho1 = density_substep(&state.rho, &state.u, dt, false, &ctx)?;
            check_vacuum(&rho1, config.vacuum_floor)?;
            let u1 = velocity_substep(&state.u, &rho1, &state.d, &state.ddot, dt, false, &ctx)?;
            let (d1, dd1) = director_substep(&state.d, &state.ddot, &rho1, &u1, dt, false, &ctx)?;
            (rho1, u1, d1, dd1)
        }
        Splitting::Strang => {
            let rho_a = density_substep(&state.rho, &state.u, 0.5 * dt, true, &ctx)?;
            check_vacuum(&rho_a, config.vacuum_floor)?;
            let u_a =
                velocity_substep(&state.u, &rho_a, &state.d, &state.ddot, 0.5 * dt, true, &ctx)?;
            let (d1, dd1) = director_substep(&state.d, &state.ddot, &rho_a, &u_a, dt, true, &ctx)?;
            let u1 = velocity_substep(&u_a, &rho_a, &d1, &dd1, 0.5 * dt, true, &ctx)?;
            let rho1 = density_substep(&rho_a, &u1, 0.5 * dt, true, &ctx)?;
            check_vacuum(&rho1, config.vacuum_floor)?;
            (rho1, u1, d1, dd1)
        }
    };

    finish_step(state.t + dt, rho_new, u_new, d_new, ddot_new, config, cfl, 0, 0.0)
}

fn l2_norm<F: Field>(f: &F) -> f64 {
    libm::sqrt(inner_product(f, f, None).unwrap_or(f64::NAN))
}

fn iterate_distance(a: &State, b: &State) -> f64 {
    let mut diff_rho = a.rho.clone();
    diff_rho.axpy(-1.0, &b.rho);
    let mut worst = l2_norm(&diff_rho) / (1.0 + l2_norm(&b.rho));
    let pairs = [(&a.u, &b.u), (&a.d, &b.d), (&a.ddot, &b.ddot)];
    for (x, y) in pairs {
        let mut diff = x.clone();
        diff.axpy(-1.0, y);
        worst = worst.max(l2_norm(&diff) / (1.0 + l2_norm(y)));
    }
    worst
}

/// Advances one step by the per-step fixed-point iteration: each sweep
/// re-solves density, velocity and director with every coefficient field
/// lagged to the previous iterate, starting from the old time level, until
/// the relative L² distance between consecutive iterates drops below tol.
pub fn picard_step(
    state: &State,
    coeffs: &LeslieCoefficients,
    config: &SolverConfig,
) -> Result<(State, StepReport)> {
    let pc = config
        .picard
        .ok_or(Error::InvalidParameter { what: "picard (disabled)", value: 0.0 })?;
    config.validate()?;
    state.validate(config.vacuum_floor)?;
    let cfl = cfl_gate(state, config)?;
    let ctx = StepContext::new(coeffs, config, state.grid())?;
    let dt = config.dt;

    let mut prev = state.clone();
    let mut residual = f64::INFINITY;
    for m in 1..=pc.max_iters {
        // Density from the lagged velocity (flux lagged to the iterate).
        let mut rho_next = state.rho.clone();
        rho_next.axpy(-dt, &mass_flux_divergence(&prev.rho, &prev.u, &ctx)?);
        check_vacuum(&rho_next, config.vacuum_floor)?;

        // Velocity from the lagged state.
        let nu_ref = 1.0 / prev.rho.mean();
        let f = velocity_force(&prev.u, &prev.rho, &prev.d, &prev.ddot, nu_ref, &ctx)?;
        let mut rhs = state.u.clone();
        rhs.axpy(dt, &f);
        let u_next = viscous_solve(&rhs, dt * nu_ref, &ctx)?;

        // Director from the lagged density and velocity.
        let (accel, slope0) = director_rhs(&prev.d, &prev.ddot, &prev.rho, &prev.u, &ctx)?;
        let mut ddot_next = state.ddot.clone();
        ddot_next.axpy(dt, &accel);
        let mut slope = slope0;
        slope.axpy(-1.0, &prev.ddot);
        slope.axpy(1.0, &ddot_next);
        let mut d_next = state.d.clone();
        d_next.axpy(dt, &slope);

        let next = State { t: state.t + dt, rho: rho_next, u: u_next, d: d_next, ddot: ddot_next };
        residual = iterate_distance(&next, &prev);
        prev = next;
        if residual <= pc.tol {
            return finish_step(
                state.t + dt,
                prev.rho,
                prev.u,
                prev.d,
                prev.ddot,
                config,
                cfl,
                m,
                residual,
            );
        }
    }
    Err(Error::PicardDiverged { iters: pc.max_iters, last_residual: residual })
}

// --- initial data -------------------------------------------------------------

/// Band limit (in integer modes per axis) of the random perturbations.
pub const INITIAL_MODE_BAND: i64 = 2;

/// Initial-data presets. Custom fields get the same treatment the presets
/// do: the director is renormalized and `ḋ` is projected tangentially.
#[derive(Clone, Debug)]
pub enum InitialCondition {
    /// `(1, 0, d₀, 0)` plus seeded band-limited perturbations of every
    /// field; the director is perturbed through an angle so `|d| = 1`
    /// holds exactly.
    EquilibriumPerturbation,
    /// Perturbs only the director sector: `ρ ≡ 1`, `u ≡ 0`, `d` through a
    /// random angle, `ḋ` random tangential.
    DirectorPerturbation,
    /// `(1, 0, (cos x₁, sin x₁), 0)`, an exact stationary solution.
    StationaryHarmonic,
    Custom {
        rho: ScalarField,
        u: VectorField,
        d: VectorField,
        ddot: VectorField,
    },
}

pub fn make_initial(
    kind: InitialCondition,
    amplitude: f64,
    grid: Grid2D,
    seed: u64,
    vacuum_floor: f64,
) -> Result<State> {
    if !(amplitude.is_finite() && amplitude >= 0.0) {
        return Err(Error::InvalidParameter { what: "amplitude", value: amplitude });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let band = INITIAL_MODE_BAND;
    let (rho, u, d, ddot) = match kind {
        InitialCondition::EquilibriumPerturbation => {
            let g_rho = synth::random_band_limited(grid, band, &mut rng);
            let g_u = synth::random_band_limited_vector(grid, band, &mut rng);
            let d = synth::random_unit_director(grid, band, amplitude, &mut rng);
            let g_dd = synth::random_band_limited_vector(grid, band, &mut rng);
            let mut rho = ScalarField::constant(grid, 1.0);
            rho.axpy(amplitude, &g_rho);
            let mut u = VectorField::zeros(grid);
            u.axpy(amplitude, &g_u);
            let mut ddot = VectorField::zeros(grid);
            ddot.axpy(amplitude, &g_dd);
            let ddot = project_tangent(&d, &ddot);
            (rho, u, d, ddot)
        }
        InitialCondition::DirectorPerturbation => {
            let d = synth::random_unit_director(grid, band, amplitude, &mut rng);
            let g_dd = synth::random_band_limited_vector(grid, band, &mut rng);
            let mut ddot = VectorField::zeros(grid);
            ddot.axpy(amplitude, &g_dd);
            let ddot = project_tangent(&d, &ddot);
            (
                ScalarField::constant(grid, 1.0),
                VectorField::zeros(grid),
                d,
                ddot,
            )
        }
        InitialCondition::StationaryHarmonic => (
            ScalarField::constant(grid, 1.0),
            VectorField::zeros(grid),
            VectorField::from_fn(grid, |x, _| [libm::cos(x), libm::sin(x)]),
            VectorField::zeros(grid),
        ),
        InitialCondition::Custom { rho, u, d, ddot } => {
            let d = normalize_director(&d)?;
            let ddot = project_tangent(&d, &ddot);
            (rho, u, d, ddot)
        }
    };
    check_vacuum(&rho, vacuum_floor)?;
    let state = State { t: 0.0, rho, u, d, ddot };
    state.validate(vacuum_floor)?;
    Ok(state)
}

// --- trajectory driver ----------------------------------------------------------

/// Diagnostic settings for [`run`].
#[derive(Clone, Copy, Debug)]
pub struct DiagnosticsConfig {
    /// Sobolev order of the recorded energy functionals.
    pub s: usize,
    pub eta1: f64,
    pub eta2: f64,
    /// Full diagnostics every this many steps (the initial and final states
    /// are always recorded).
    pub record_every: usize,
    /// Keep a snapshot of every state (needed by the energy-law audit).
    pub keep_states: bool,
    /// Relative tolerance of the density-bound certificate.
    pub density_rtol: f64,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        DiagnosticsConfig {
            s: 2,
            eta1: 0.0,
            eta2: 0.0,
            record_every: 1,
            keep_states: false,
            density_rtol: DENSITY_BOUND_RTOL,
        }
    }
}

/// One recorded diagnostics row.
pub struct RecordEntry<'a> {
    pub step_index: usize,
    pub state: &'a State,
    pub energy: &'a EnergyBreakdown,
    pub dissipation: &'a DissipationBreakdown,
    pub constraints: ConstraintResiduals,
    pub min_rho: f64,
    pub max_rho: f64,
    /// Worst relative margin of the density bounds at this step.
    pub density_bound_margin: f64,
    pub cfl_observed: f64,
    pub picard_iters: usize,
    pub picard_residual: f64,
}

/// Receives diagnostics rows as the run progresses.
pub trait RunSink {
    fn record(&mut self, entry: &RecordEntry<'_>);
}

/// Sink that drops everything.
pub struct NullSink;

impl RunSink for NullSink {
    fn record(&mut self, _entry: &RecordEntry<'_>) {}
}

/// Trajectory-level summary.
#[derive(Clone, Debug)]
pub struct RunSummary {
    pub steps: usize,
    pub t_final: f64,
    pub records: usize,
    pub mass_initial: f64,
    pub mass_final: f64,
    pub mass_drift_rel: f64,
    pub e_tilde_initial: f64,
    pub e_tilde_final: f64,
    /// `sup_t Ẽ(t) / Ẽ(0)` over all steps (1 when Ẽ(0) = 0).
    pub e_tilde_sup_ratio: f64,
    /// Largest one-step increase of Ẽ.
    pub max_e_tilde_step_increase: f64,
    /// Trapezoid-in-time integral of `|∇u|²_{H^s}` over recorded steps.
    pub integral_grad_u_hs: f64,
    pub max_unit_norm_dev: f64,
    pub max_tangency_dev: f64,
    pub max_cfl_observed: f64,
    pub max_picard_iters: usize,
    /// Worst slack of `c·Ẽ ≤ ℰ_η ≤ C·Ẽ` over recorded steps
    /// (lower slack, upper slack); set only when an η weight is active.
    pub eta_equivalence_slack: Option<(f64, f64)>,
    pub density_certificate: DensityBoundCertificate,
    /// Per-step series (including the initial state).
    pub e_tilde_series: Vec<f64>,
    pub min_rho_series: Vec<f64>,
    pub max_rho_series: Vec<f64>,
    pub divu_inf_series: Vec<f64>,
    pub final_state: State,
    pub states: Option<Vec<State>>,
}

/// Outcome of a run; `error` is set when the trajectory stopped early, with
/// the summary covering the completed part.
pub struct RunOutcome {
    pub summary: RunSummary,
    pub error: Option<Error>,
}

/// Unweighted perturbation energy `Ẽ(t)` (squared norms).
pub fn e_tilde_of(state: &State, s: usize, scheme: Scheme) -> Result<f64> {
    let varrho = state.rho.map(|r| r - 1.0);
    let grad_d = state.d.gradient(scheme)?;
    Ok(sobolev_norm_sq(&varrho, s, None, false, scheme)?
        + sobolev_norm_sq(&state.u, s, None, false, scheme)?
        + sobolev_norm_sq(&state.ddot, s, None, false, scheme)?
        + sobolev_norm_sq(&grad_d, s, None, false, scheme)?)
}

fn total_mass(rho: &ScalarField) -> f64 {
    rho.mean() * rho.grid().length() * rho.grid().length()
}

/// Advances `initial` to `t_end`, emitting diagnostics to `sink` and
/// returning the trajectory summary. Deterministic for a fixed
/// (initial state, coefficients, configuration) triple.
pub fn run(
    initial: &State,
    coeffs: &LeslieCoefficients,
    config: &SolverConfig,
    diag: &DiagnosticsConfig,
    sink: &mut dyn RunSink,
) -> Result<RunOutcome> {
    config.validate()?;
    initial.validate(config.vacuum_floor)?;
    if diag.s == 0 || diag.s > S_MAX {
        return Err(Error::InvalidParameter { what: "diagnostics s", value: diag.s as f64 });
    }
    if diag.record_every == 0 {
        return Err(Error::InvalidParameter { what: "record_every", value: 0.0 });
    }

    let n_steps = libm::round((config.t_end - initial.t) / config.dt).max(0.0) as usize;
    let record_every = diag.record_every;
    let rho_lo = initial.rho.min_value();
    let rho_hi = initial.rho.max_value();

    let mut state = initial.clone();
    let mut states = diag.keep_states.then(Vec::new);
    let mut e_tilde_series = Vec::with_capacity(n_steps + 1);
    let mut min_rho_series = Vec::with_capacity(n_steps + 1);
    let mut max_rho_series = Vec::with_capacity(n_steps + 1);
    let mut divu_series = Vec::with_capacity(n_steps + 1);
    let mut divu_integral = 0.0f64;

    let mut records = 0usize;
    let mut max_unit = 0.0f64;
    let mut max_tang = 0.0f64;
    let mut max_cfl = 0.0f64;
    let mut max_picard = 0usize;
    let mut max_step_increase = f64::NEG_INFINITY;
    let mut grad_u_integral = 0.0f64;
    let mut last_record: Option<(f64, f64)> = None; // (t, |∇u|²_{H^s})
    let mut eta_slack: Option<(f64, f64)> = None;
    let eta_active = diag.eta1 > 0.0 || diag.eta2 > 0.0;
    let mut error: Option<Error> = None;

    let mass_initial = total_mass(&state.rho);

    macro_rules! per_step_diag {
        ($st:expr) => {{
            let e = e_tilde_of($st, diag.s, config.scheme)?;
            e_tilde_series.push(e);
            min_rho_series.push($st.rho.min_value());
            max_rho_series.push($st.rho.max_value());
            divu_series.push($st.u.divergence(config.scheme)?.sup_norm());
            if let Some(list) = states.as_mut() {
                list.push($st.clone());
            }
        }};
    }

    macro_rules! record {
        ($st:expr, $idx:expr, $cfl:expr, $pits:expr, $pres:expr) => {{
            let eb = energy($st, coeffs, diag.s, diag.eta1, diag.eta2, config.scheme)?;
            let db = dissipation($st, coeffs, diag.s, diag.eta1, diag.eta2, config.scheme)?;
            let cons = constraint_residuals($st);
            let lower = rho_lo * libm::exp(-divu_integral);
            let upper = rho_hi * libm::exp(divu_integral);
            let min_rho = $st.rho.min_value();
            let max_rho = $st.rho.max_value();
            let margin = ((min_rho - lower) / lower).min((upper - max_rho) / upper);
            let entry = RecordEntry {
                step_index: $idx,
                state: $st,
                energy: &eb,
                dissipation: &db,
                constraints: cons,
                min_rho,
                max_rho,
                density_bound_margin: margin,
                cfl_observed: $cfl,
                picard_iters: $pits,
                picard_residual: $pres,
            };
            sink.record(&entry);
            records += 1;
            if eta_active {
                let (lo, hi) =
                    crate::energy::eta_equivalence_bounds($st, coeffs, diag.eta1, diag.eta2)?;
                let e_tilde = *e_tilde_series.last().unwrap();
                let slack = (eb.e_eta - lo * e_tilde, hi * e_tilde - eb.e_eta);
                eta_slack = Some(match eta_slack {
                    None => slack,
                    Some((a, b)) => (a.min(slack.0), b.min(slack.1)),
                });
            }
            let grad_u_sq = db.viscous / (0.5 * coeffs.mu4());
            if let Some((t_prev, g_prev)) = last_record {
                grad_u_integral += 0.5 * ($st.t - t_prev) * (g_prev + grad_u_sq);
            }
            last_record = Some(($st.t, grad_u_sq));
        }};
    }

    per_step_diag!(&state);
    record!(&state, 0, 0.0, 0, 0.0);

    let mut steps_done = 0usize;
    for k in 1..=n_steps {
        let result = if config.picard.is_some() {
            picard_step(&state, coeffs, config)
        } else {
            step(&state, coeffs, config)
        };
        let (next, report) = match result {
            Ok(pair) => pair,
            Err(e) => {
                error = Some(e);
                break;
            }
        };
        state = next;
        steps_done = k;

        per_step_diag!(&state);
        let m = e_tilde_series.len();
        max_step_increase = max_step_increase.max(e_tilde_series[m - 1] - e_tilde_series[m - 2]);
        divu_integral +=
            0.5 * config.dt * (divu_series[m - 2] + divu_series[m - 1]);
        max_unit = max_unit.max(report.unit_norm_dev);
        max_tang = max_tang.max(report.tangency_dev);
        max_cfl = max_cfl.max(report.cfl_observed);
        max_picard = max_picard.max(report.picard_iters);

        if k % record_every == 0 || k == n_steps {
            record!(&state, k, report.cfl_observed, report.picard_iters, report.picard_residual);
        }
    }

    let density_certificate = density_bound_check(
        &min_rho_series,
        &max_rho_series,
        &divu_series,
        rho_lo,
        rho_hi,
        config.dt,
        diag.density_rtol,
    )?;

    let e0 = e_tilde_series[0];
    let sup = e_tilde_series.iter().fold(0.0f64, |m, &v| m.max(v));
    let summary = RunSummary {
        steps: steps_done,
        t_final: state.t,
        records,
        mass_initial,
        mass_final: total_mass(&state.rho),
        mass_drift_rel: (total_mass(&state.rho) - mass_initial).abs()
            / mass_initial.abs().max(f64::MIN_POSITIVE),
        e_tilde_initial: e0,
        e_tilde_final: *e_tilde_series.last().unwrap(),
        e_tilde_sup_ratio: if e0 > 0.0 { sup / e0 } else { 1.0 },
        max_e_tilde_step_increase: if steps_done == 0 { 0.0 } else { max_step_increase },
        integral_grad_u_hs: grad_u_integral,
        max_unit_norm_dev: max_unit,
        max_tangency_dev: max_tang,
        max_cfl_observed: max_cfl,
        max_picard_iters: max_picard,
        density_certificate,
        e_tilde_series,
        min_rho_series,
        max_rho_series,
        divu_inf_series: divu_series,
        final_state: state,
        states,
    };
    Ok(RunOutcome { summary, error })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constitutive::RawCoefficients;

    fn damped() -> LeslieCoefficients {
        LeslieCoefficients::validate(&RawCoefficients {
            mu1: 1.0,
            mu2: -1.0,
            mu3: 0.0,
            mu4: 2.0,
            mu5: 1.0,
            mu6: 0.0,
            ..RawCoefficients::default()
        })
        .unwrap()
        .0
    }

    fn max_field_diff(a: &State, b: &State) -> f64 {
        let mut worst = 0.0f64;
        let mut dr = a.rho.clone();
        dr.axpy(-1.0, &b.rho);
        worst = worst.max(dr.sup_norm());
        for (x, y) in [(&a.u, &b.u), (&a.d, &b.d), (&a.ddot, &b.ddot)] {
            for i in 0..2 {
                let mut d = x.comp(i).clone();
                d.axpy(-1.0, y.comp(i));
                worst = worst.max(d.sup_norm());
            }
        }
        worst
    }

    #[test]
    fn equilibrium_is_a_fixed_point() {
        let g = Grid2D::square(32).unwrap();
        let st = make_initial(InitialCondition::EquilibriumPerturbation, 0.0, g, 1, 1e-8)
            .unwrap();
        assert_eq!(st.rho.values()[5], 1.0);
        assert_eq!(st.u.comp(0).values()[5], 0.0);
        assert_eq!(st.d.comp(0).values()[5], 1.0);
        let cfg = SolverConfig::new(1e-3, 1.0);
        let (next, report) = step(&st, &damped(), &cfg).unwrap();
        assert!(max_field_diff(&next, &st) <= 1e-14);
        assert_eq!(report.picard_iters, 0);
    }

    #[test]
    fn stationary_harmonic_one_step_defect() {
        let g = Grid2D::square(64).unwrap();
        let st = make_initial(InitialCondition::StationaryHarmonic, 0.0, g, 0, 1e-8).unwrap();
        for splitting in [Splitting::Lie, Splitting::Strang] {
            let mut cfg = SolverConfig::new(1e-3, 1.0);
            cfg.splitting = splitting;
            let (next, _) = step(&st, &damped(), &cfg).unwrap();
            let drift = max_field_diff(&next, &st);
            assert!(drift <= 1e-10, "{splitting:?}: drift = {drift}");
        }
    }

    #[test]
    fn picard_converges_instantly_on_fixed_points() {
        let g = Grid2D::square(32).unwrap();
        let mut cfg = SolverConfig::new(1e-3, 1.0);
        cfg.picard = Some(PicardConfig::default());

        let eq = make_initial(InitialCondition::EquilibriumPerturbation, 0.0, g, 1, 1e-8)
            .unwrap();
        let (_, rep) = picard_step(&eq, &damped(), &cfg).unwrap();
        assert_eq!(rep.picard_iters, 1);
        assert_eq!(rep.picard_residual, 0.0);

        let sh = make_initial(InitialCondition::StationaryHarmonic, 0.0, g, 0, 1e-8).unwrap();
        let (_, rep) = picard_step(&sh, &damped(), &cfg).unwrap();
        assert!(rep.picard_iters <= 2, "iters = {}", rep.picard_iters);
        assert!(rep.picard_residual <= 1e-10);
    }

    #[test]
    fn picard_handles_small_random_data() {
        let g = Grid2D::square(32).unwrap();
        let mut cfg = SolverConfig::new(1e-3, 1.0);
        cfg.picard = Some(PicardConfig::default());
        let st = make_initial(InitialCondition::EquilibriumPerturbation, 1e-2, g, 7, 1e-8)
            .unwrap();
        let (_, rep) = picard_step(&st, &damped(), &cfg).unwrap();
        assert!(rep.picard_iters <= 20);
        assert!(rep.picard_residual <= 1e-10);
    }

    #[test]
    fn custom_initial_data_is_normalized_and_projected() {
        let g = Grid2D::square(16).unwrap();
        let st = make_initial(
            InitialCondition::Custom {
                rho: ScalarField::constant(g, 1.0),
                u: VectorField::zeros(g),
                d: VectorField::from_fn(g, |_, _| [2.0, 0.0]),
                ddot: VectorField::from_fn(g, |_, _| [1.0, 1.0]),
            },
            0.0,
            g,
            0,
            1e-8,
        )
        .unwrap();
        assert!((st.d.comp(0).values()[3] - 1.0).abs() < 1e-15);
        assert!(st.ddot.comp(0).values()[3].abs() < 1e-15);
        assert!((st.ddot.comp(1).values()[3] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn vacuum_amplitude_is_rejected() {
        let g = Grid2D::square(16).unwrap();
        let r = make_initial(InitialCondition::EquilibriumPerturbation, 1.5, g, 3, 1e-8);
        assert!(matches!(r, Err(Error::Vacuum { .. })));
    }

    #[test]
    fn cfl_violation_reports_usable_dt() {
        let g = Grid2D::square(32).unwrap();
        let st = make_initial(InitialCondition::StationaryHarmonic, 0.0, g, 0, 1e-8).unwrap();
        let cfg = SolverConfig::new(0.5, 1.0); // wave CFL ≈ 0.5/h ≫ limit
        match step(&st, &damped(), &cfg) {
            Err(Error::CflViolation { observed, limit, max_dt }) => {
                assert!(observed > limit);
                assert!(max_dt < 0.5 && max_dt > 0.0);
            }
            other => panic!("expected CFL rejection, got {other:?}"),
        }
    }

    #[test]
    fn zero_length_run_records_initial_state_only() {
        let g = Grid2D::square(16).unwrap();
        let st = make_initial(InitialCondition::EquilibriumPerturbation, 1e-2, g, 5, 1e-8)
            .unwrap();
        let cfg = SolverConfig::new(1e-3, 0.0);
        let out = run(&st, &damped(), &cfg, &DiagnosticsConfig::default(), &mut NullSink)
            .unwrap();
        assert!(out.error.is_none());
        assert_eq!(out.summary.steps, 0);
        assert_eq!(out.summary.records, 1);
    }

    #[test]
    fn runs_are_bit_deterministic() {
        let g = Grid2D::square(16).unwrap();
        let cfg = SolverConfig::new(1e-3, 0.02);
        let diag = DiagnosticsConfig::default();
        let mk = || {
            let st =
                make_initial(InitialCondition::EquilibriumPerturbation, 1e-2, g, 11, 1e-8)
                    .unwrap();
            run(&st, &damped(), &cfg, &diag, &mut NullSink).unwrap()
        };
        let a = mk();
        let b = mk();
        assert!(a.error.is_none() && b.error.is_none());
        assert_eq!(a.summary.final_state.rho.values(), b.summary.final_state.rho.values());
        assert_eq!(
            a.summary.final_state.d.comp(0).values(),
            b.summary.final_state.d.comp(0).values()
        );
        assert_eq!(a.summary.e_tilde_series, b.summary.e_tilde_series);
    }

    #[test]
    fn mass_is_conserved_over_many_steps() {
        let g = Grid2D::square(32).unwrap();
        let st = make_initial(InitialCondition::EquilibriumPerturbation, 5e-2, g, 9, 1e-8)
            .unwrap();
        let cfg = SolverConfig::new(1e-3, 1.0);
        let mut diag = DiagnosticsConfig::default();
        diag.record_every = 200;
        let out = run(&st, &damped(), &cfg, &diag, &mut NullSink).unwrap();
        assert!(out.error.is_none());
        assert_eq!(out.summary.steps, 1000);
        assert!(
            out.summary.mass_drift_rel <= 1e-12,
            "mass drift = {}",
            out.summary.mass_drift_rel
        );
    }
}
