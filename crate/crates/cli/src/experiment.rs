//! Experiment presets: plain simulation, energy-law refinement audit,
//! small-data decay study, constraint-propagation study, and dt/ε
//! refinement studies. Each writes `series.csv` (one per refinement level)
//! plus a `summary.json` with certificates and measured orders.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use leslie_flow_core as core;
use leslie_flow_core::{
    energy_law_audit, inner_product, make_initial, run, DiagnosticsConfig, Error as CoreError,
    InitialCondition, RunSummary, SolverConfig, Splitting, State,
};

use crate::config::{config_echo, Experiment, InitKind, RefineTarget, RunConfig};
use crate::series::CsvSink;
use crate::summary::{
    exit_code, CertificateDoc, ErrorDoc, LevelDoc, RunDoc, SummaryDoc,
};

pub struct ExperimentResult {
    pub exit_code: i32,
    pub summary: SummaryDoc,
}

fn initial_condition(kind: InitKind) -> InitialCondition {
    match kind {
        InitKind::EquilibriumPerturbation => InitialCondition::EquilibriumPerturbation,
        InitKind::DirectorPerturbation => InitialCondition::DirectorPerturbation,
        InitKind::StationaryHarmonic => InitialCondition::StationaryHarmonic,
    }
}

fn error_doc(e: &CoreError) -> ErrorDoc {
    let kind = match e {
        CoreError::Vacuum { .. } => "vacuum",
        CoreError::CflViolation { .. } => "cfl_violation",
        CoreError::PicardDiverged { .. } => "picard_diverged",
        CoreError::NonFinite(_) => "non_finite",
        _ => "solver_error",
    };
    ErrorDoc { kind: kind.to_string(), message: e.to_string() }
}

struct RunArtifacts {
    summary: Option<RunSummary>,
    error: Option<CoreError>,
}

/// Runs one trajectory, streaming records into `series_path`.
fn run_one(
    cfg: &RunConfig,
    solver: &SolverConfig,
    diag: &DiagnosticsConfig,
    series_path: &Path,
) -> std::io::Result<RunArtifacts> {
    let grid = match core::Grid2D::new(cfg.grid_n, cfg.grid_length) {
        Ok(g) => g,
        Err(e) => return Ok(RunArtifacts { summary: None, error: Some(e) }),
    };
    let state = match make_initial(
        initial_condition(cfg.init_kind),
        cfg.amplitude,
        grid,
        cfg.seed,
        solver.vacuum_floor,
    ) {
        Ok(s) => s,
        Err(e) => return Ok(RunArtifacts { summary: None, error: Some(e) }),
    };
    let mut sink = CsvSink::create(series_path)?;
    let outcome = match run(&state, &cfg.coeffs, solver, diag, &mut sink) {
        Ok(o) => o,
        Err(e) => {
            sink.finish()?;
            return Ok(RunArtifacts { summary: None, error: Some(e) });
        }
    };
    sink.finish()?;
    Ok(RunArtifacts { summary: Some(outcome.summary), error: outcome.error })
}

fn base_diag(cfg: &RunConfig, keep_states: bool) -> DiagnosticsConfig {
    DiagnosticsConfig {
        s: cfg.s,
        eta1: cfg.eta1,
        eta2: cfg.eta2,
        record_every: cfg.record_every,
        keep_states,
        density_rtol: core::DENSITY_BOUND_RTOL,
    }
}

/// Certificates shared by every completed run.
fn run_certificates(cfg: &RunConfig, s: &RunSummary) -> Vec<CertificateDoc> {
    let mut certs = Vec::new();
    let dc = &s.density_certificate;
    certs.push(
        CertificateDoc::new("density_bound", dc.pass)
            .with("worst_lower_margin", dc.worst_lower_margin)
            .with("worst_upper_margin", dc.worst_upper_margin)
            .with("rtol", dc.rtol),
    );
    let mass_tol = 1e-12 * (s.steps as f64 / 1000.0).max(1.0);
    certs.push(
        CertificateDoc::new("mass_conservation", s.mass_drift_rel <= mass_tol)
            .with("drift_rel", s.mass_drift_rel)
            .with("tolerance", mass_tol),
    );
    if cfg.solver.project_director {
        let pass = s.max_unit_norm_dev <= cfg.constraint_tolerance
            && s.max_tangency_dev <= cfg.constraint_tolerance;
        certs.push(
            CertificateDoc::new("constraint_projection", pass)
                .with("max_unit_norm_dev", s.max_unit_norm_dev)
                .with("max_tangency_dev", s.max_tangency_dev)
                .with("tolerance", cfg.constraint_tolerance),
        );
    }
    certs
}

fn summary_shell(cfg: &RunConfig, thread_cap: Option<usize>) -> SummaryDoc {
    SummaryDoc {
        experiment: cfg.experiment.name().to_string(),
        seed: cfg.seed,
        thread_cap,
        effective_threads: 1,
        config: config_echo(cfg),
        certificates: Vec::new(),
        all_certificates_passed: false,
        measured_orders: BTreeMap::new(),
        run: None,
        levels: Vec::new(),
        error: None,
        wall_time_s: 0.0,
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn log2_orders(values: &[f64]) -> Vec<f64> {
    values
        .windows(2)
        .map(|w| (w[0] / w[1]).log2())
        .collect()
}

fn field_distance(a: &State, b: &State) -> f64 {
    let mut total = 0.0;
    for (x, y) in [(&a.d, &b.d), (&a.ddot, &b.ddot)] {
        let mut diff = x.clone();
        diff.axpy(-1.0, y);
        total += inner_product(&diff, &diff, None).unwrap_or(f64::NAN);
    }
    total.sqrt()
}

pub fn run_experiment(
    cfg: &RunConfig,
    out_dir: &Path,
    thread_cap: Option<usize>,
) -> std::io::Result<ExperimentResult> {
    std::fs::create_dir_all(out_dir)?;
    let started = Instant::now();
    let mut doc = summary_shell(cfg, thread_cap);

    match cfg.experiment {
        Experiment::Simulate => {
            let art = run_one(cfg, &cfg.solver, &base_diag(cfg, false), &out_dir.join("series.csv"))?;
            if let Some(s) = &art.summary {
                doc.run = Some(RunDoc::from(s));
                doc.certificates = run_certificates(cfg, s);
            }
            doc.error = art.error.as_ref().map(error_doc);
        }

        Experiment::DecayStudy => {
            let art = run_one(cfg, &cfg.solver, &base_diag(cfg, false), &out_dir.join("series.csv"))?;
            if let Some(s) = &art.summary {
                doc.run = Some(RunDoc::from(s));
                doc.certificates = run_certificates(cfg, s);
                let e0 = s.e_tilde_initial;
                doc.certificates.push(
                    CertificateDoc::new(
                        "initial_energy_within_threshold",
                        e0 <= cfg.decay_max_initial_energy,
                    )
                    .with("e_tilde_initial", e0)
                    .with("threshold", cfg.decay_max_initial_energy),
                );
                let tol = 1e-8 * e0;
                doc.certificates.push(
                    CertificateDoc::new("monotone_e_tilde", s.max_e_tilde_step_increase <= tol)
                        .with("max_step_increase", s.max_e_tilde_step_increase)
                        .with("per_step_tolerance", tol),
                );
                doc.certificates.push(
                    CertificateDoc::new("c1_bound", s.e_tilde_sup_ratio <= 1.0 + 1e-6)
                        .with("c1", s.e_tilde_sup_ratio),
                );
                doc.certificates.push(
                    CertificateDoc::new(
                        "viscous_integral_finite",
                        s.integral_grad_u_hs.is_finite(),
                    )
                    .with("integral_grad_u_hs", s.integral_grad_u_hs),
                );
            }
            doc.error = art.error.as_ref().map(error_doc);
        }

        Experiment::DissipationAudit => {
            audit_levels(cfg, out_dir, &mut doc, "energy_law_order")?;
        }

        Experiment::ConstraintStudy => {
            let mut devs = Vec::new();
            for level in 0..cfg.study_levels {
                let dir = out_dir.join(format!("level{level}"));
                std::fs::create_dir_all(&dir)?;
                let mut solver = cfg.solver;
                solver.dt = cfg.solver.dt / (1 << level) as f64;
                solver.project_director = false;
                let art = run_one(cfg, &solver, &base_diag(cfg, false), &dir.join("series.csv"))?;
                match (&art.summary, &art.error) {
                    (Some(s), None) => {
                        let dev = core::constraint_residuals(&s.final_state).unit_norm_dev;
                        devs.push(dev);
                        doc.levels.push(LevelDoc {
                            label: format!("level{level}"),
                            parameter: solver.dt,
                            series: format!("level{level}/series.csv"),
                            run: RunDoc::from(s),
                            max_audit_residual: None,
                            final_unit_norm_dev: Some(dev),
                            distance_to_reference: None,
                        });
                    }
                    _ => {
                        doc.error = art.error.as_ref().map(error_doc);
                        break;
                    }
                }
            }
            if doc.error.is_none() {
                let orders = log2_orders(&devs);
                let pass = devs.windows(2).all(|w| w[0] / w[1] >= 1.8);
                for (i, o) in orders.iter().enumerate() {
                    doc.measured_orders.insert(format!("unit_norm_dev_level{i}"), *o);
                }
                let mut cert = CertificateDoc::new("constraint_decay_order", pass)
                    .with("required_ratio", 1.8);
                for (i, d) in devs.iter().enumerate() {
                    cert = cert.with(&format!("dev_level{i}"), *d);
                }
                doc.certificates.push(cert);

                // Companion projected run: deviations stay within tolerance.
                let dir = out_dir.join("projected");
                std::fs::create_dir_all(&dir)?;
                let mut solver = cfg.solver;
                solver.project_director = true;
                let art = run_one(cfg, &solver, &base_diag(cfg, false), &dir.join("series.csv"))?;
                match (&art.summary, &art.error) {
                    (Some(s), None) => {
                        let pass = s.max_unit_norm_dev <= cfg.constraint_tolerance;
                        doc.certificates.push(
                            CertificateDoc::new("projection_bound", pass)
                                .with("max_unit_norm_dev", s.max_unit_norm_dev)
                                .with("tolerance", cfg.constraint_tolerance),
                        );
                        doc.levels.push(LevelDoc {
                            label: "projected".to_string(),
                            parameter: solver.dt,
                            series: "projected/series.csv".to_string(),
                            run: RunDoc::from(s),
                            max_audit_residual: None,
                            final_unit_norm_dev: Some(s.max_unit_norm_dev),
                            distance_to_reference: None,
                        });
                    }
                    _ => doc.error = art.error.as_ref().map(error_doc),
                }
            }
        }

        Experiment::RefinementStudy => match cfg.study_refine {
            RefineTarget::Dt => audit_levels(cfg, out_dir, &mut doc, "measured_order")?,
            RefineTarget::Epsilon => {
                let eps0 = cfg.solver.mollifier_eps.expect("validated");
                // Reference: no truncation.
                let dir = out_dir.join("reference");
                std::fs::create_dir_all(&dir)?;
                let mut ref_solver = cfg.solver;
                ref_solver.mollifier_eps = None;
                let reference =
                    run_one(cfg, &ref_solver, &base_diag(cfg, false), &dir.join("series.csv"))?;
                let ref_state = match (&reference.summary, &reference.error) {
                    (Some(s), None) => Some(s.final_state.clone()),
                    _ => {
                        doc.error = reference.error.as_ref().map(error_doc);
                        None
                    }
                };
                if let Some(ref_state) = ref_state {
                    let mut distances = Vec::new();
                    for level in 0..cfg.study_levels {
                        let dir = out_dir.join(format!("level{level}"));
                        std::fs::create_dir_all(&dir)?;
                        let mut solver = cfg.solver;
                        solver.mollifier_eps = Some(eps0 / (1 << level) as f64);
                        let art =
                            run_one(cfg, &solver, &base_diag(cfg, false), &dir.join("series.csv"))?;
                        match (&art.summary, &art.error) {
                            (Some(s), None) => {
                                let dist = field_distance(&s.final_state, &ref_state);
                                distances.push(dist);
                                doc.levels.push(LevelDoc {
                                    label: format!("level{level}"),
                                    parameter: solver.mollifier_eps.unwrap(),
                                    series: format!("level{level}/series.csv"),
                                    run: RunDoc::from(s),
                                    max_audit_residual: None,
                                    final_unit_norm_dev: None,
                                    distance_to_reference: Some(dist),
                                });
                            }
                            _ => {
                                doc.error = art.error.as_ref().map(error_doc);
                                break;
                            }
                        }
                    }
                    if doc.error.is_none() {
                        // Distances below resolution count as converged.
                        let floor = 1e-13;
                        let pass = distances
                            .windows(2)
                            .all(|w| w[1] <= w[0] * (1.0 + 1e-9) + floor);
                        let mut cert = CertificateDoc::new("mollifier_convergence", pass)
                            .with("floor", floor);
                        for (i, d) in distances.iter().enumerate() {
                            cert = cert.with(&format!("distance_level{i}"), *d);
                        }
                        doc.certificates.push(cert);
                    }
                }
            }
        },
    }

    doc.all_certificates_passed =
        !doc.certificates.is_empty() && doc.certificates.iter().all(|c| c.pass);
    let code = if doc.error.is_some() {
        exit_code::SOLVER_ERROR
    } else if doc.all_certificates_passed {
        exit_code::OK
    } else {
        exit_code::CERTIFICATE_FAILURE
    };
    doc.wall_time_s = started.elapsed().as_secs_f64();

    let json = serde_json::to_string_pretty(&doc).expect("serializable");
    std::fs::write(out_dir.join("summary.json"), json + "\n")?;
    Ok(ExperimentResult { exit_code: code, summary: doc })
}

/// dt-halving study measuring the decay order of the energy-law residual.
fn audit_levels(
    cfg: &RunConfig,
    out_dir: &Path,
    doc: &mut SummaryDoc,
    cert_name: &str,
) -> std::io::Result<()> {
    let mut residuals = Vec::new();
    for level in 0..cfg.study_levels {
        let dir = out_dir.join(format!("level{level}"));
        std::fs::create_dir_all(&dir)?;
        let mut solver = cfg.solver;
        solver.dt = cfg.solver.dt / (1 << level) as f64;
        let art = run_one(cfg, &solver, &base_diag(cfg, true), &dir.join("series.csv"))?;
        match (&art.summary, &art.error) {
            (Some(s), None) => {
                let states = s.states.as_ref().expect("keep_states set");
                let audit = match energy_law_audit(states, &cfg.coeffs, solver.dt, solver.scheme) {
                    Ok(a) => a,
                    Err(e) => {
                        doc.error = Some(error_doc(&e));
                        return Ok(());
                    }
                };
                residuals.push(audit.max_abs);
                doc.levels.push(LevelDoc {
                    label: format!("level{level}"),
                    parameter: solver.dt,
                    series: format!("level{level}/series.csv"),
                    run: RunDoc::from(s),
                    max_audit_residual: Some(audit.max_abs),
                    final_unit_norm_dev: None,
                    distance_to_reference: None,
                });
            }
            _ => {
                doc.error = art.error.as_ref().map(error_doc);
                return Ok(());
            }
        }
    }
    let orders = log2_orders(&residuals);
    let measured = mean(&orders);
    let nominal = match cfg.solver.splitting {
        Splitting::Lie => 1.0,
        Splitting::Strang => 2.0,
    };
    doc.measured_orders.insert("energy_law_residual".to_string(), measured);
    let mut cert = CertificateDoc::new(cert_name, measured >= 0.9 * nominal)
        .with("measured_order", measured)
        .with("nominal_order", nominal)
        .with("threshold", 0.9 * nominal);
    for (i, r) in residuals.iter().enumerate() {
        cert = cert.with(&format!("max_residual_level{i}"), *r);
    }
    doc.certificates.push(cert);
    Ok(())
}

/// Parses the LESLIE_FLOW_THREADS cap; the engine itself is sequential, so
/// any positive cap is honored.
pub fn thread_cap_from_env() -> Result<Option<usize>, String> {
    match std::env::var("LESLIE_FLOW_THREADS") {
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(format!("LESLIE_FLOW_THREADS: {e}")),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(0) | Err(_) => Err(format!(
                "LESLIE_FLOW_THREADS must be a positive integer, got `{v}`"
            )),
            Ok(n) => Ok(Some(n)),
        },
    }
}
