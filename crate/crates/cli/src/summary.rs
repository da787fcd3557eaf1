//! `summary.json` document model.

use std::collections::BTreeMap;

use serde::Serialize;

use leslie_flow_core::{DensityBoundCertificate, RunSummary};

/// Exit-code contract of the binary.
pub mod exit_code {
    /// Every enabled certificate passed.
    pub const OK: i32 = 0;
    /// At least one certificate failed.
    pub const CERTIFICATE_FAILURE: i32 = 2;
    /// The solver stopped early (CFL, vacuum, divergence, ...).
    pub const SOLVER_ERROR: i32 = 3;
    /// Invalid configuration or environment.
    pub const CONFIG_ERROR: i32 = 4;
}

#[derive(Clone, Debug, Serialize)]
pub struct CertificateDoc {
    pub name: String,
    pub pass: bool,
    pub details: BTreeMap<String, serde_json::Value>,
}

impl CertificateDoc {
    pub fn new(name: &str, pass: bool) -> Self {
        CertificateDoc { name: name.to_string(), pass, details: BTreeMap::new() }
    }

    pub fn with(mut self, key: &str, value: impl Into<serde_json::Value>) -> Self {
        self.details.insert(key.to_string(), value.into());
        self
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DensityDoc {
    pub pass: bool,
    pub worst_lower_margin: f64,
    pub worst_upper_margin: f64,
    pub worst_step: usize,
    pub rtol: f64,
}

impl From<&DensityBoundCertificate> for DensityDoc {
    fn from(c: &DensityBoundCertificate) -> Self {
        DensityDoc {
            pass: c.pass,
            worst_lower_margin: c.worst_lower_margin,
            worst_upper_margin: c.worst_upper_margin,
            worst_step: c.worst_step,
            rtol: c.rtol,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RunDoc {
    pub steps: usize,
    pub t_final: f64,
    pub records: usize,
    pub mass_drift_rel: f64,
    pub e_tilde_initial: f64,
    pub e_tilde_final: f64,
    pub e_tilde_sup_ratio: f64,
    pub max_e_tilde_step_increase: f64,
    pub integral_grad_u_hs: f64,
    pub max_unit_norm_dev: f64,
    pub max_tangency_dev: f64,
    pub max_cfl_observed: f64,
    pub max_picard_iters: usize,
    pub density: DensityDoc,
}

impl From<&RunSummary> for RunDoc {
    fn from(s: &RunSummary) -> Self {
        RunDoc {
            steps: s.steps,
            t_final: s.t_final,
            records: s.records,
            mass_drift_rel: s.mass_drift_rel,
            e_tilde_initial: s.e_tilde_initial,
            e_tilde_final: s.e_tilde_final,
            e_tilde_sup_ratio: s.e_tilde_sup_ratio,
            max_e_tilde_step_increase: s.max_e_tilde_step_increase,
            integral_grad_u_hs: s.integral_grad_u_hs,
            max_unit_norm_dev: s.max_unit_norm_dev,
            max_tangency_dev: s.max_tangency_dev,
            max_cfl_observed: s.max_cfl_observed,
            max_picard_iters: s.max_picard_iters,
            density: (&s.density_certificate).into(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LevelDoc {
    pub label: String,
    /// Refined parameter value at this level (dt or mollifier epsilon).
    pub parameter: f64,
    pub series: String,
    pub run: RunDoc,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_audit_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_unit_norm_dev: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub distance_to_reference: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ErrorDoc {
    pub kind: String,
    pub message: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct SummaryDoc {
    pub experiment: String,
    pub seed: u64,
    /// Cap requested through LESLIE_FLOW_THREADS, if any; the engine runs
    /// single-threaded, which satisfies every positive cap.
    pub thread_cap: Option<usize>,
    pub effective_threads: usize,
    pub config: BTreeMap<String, String>,
    pub certificates: Vec<CertificateDoc>,
    pub all_certificates_passed: bool,
    pub measured_orders: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub run: Option<RunDoc>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub levels: Vec<LevelDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorDoc>,
    pub wall_time_s: f64,
}
