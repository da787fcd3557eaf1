//! Flat key-value experiment configuration.
//!
//! The format is one `key = value` pair per line, `#` comments, no nesting.
//! Parsing collects *every* violation (unknown keys, type errors, constraint
//! violations) with its line number instead of stopping at the first.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use leslie_flow_core::{
    CoefficientFlags, LeslieCoefficients, PicardConfig, RawCoefficients, Scheme, SolverConfig,
    Splitting, S_MAX,
};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigError {
    /// 1-based line of the offending entry; 0 for defaults/overrides.
    pub line: usize,
    pub key: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}: {}", self.line, self.key, self.message)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Experiment {
    Simulate,
    DissipationAudit,
    DecayStudy,
    ConstraintStudy,
    RefinementStudy,
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Simulate => "simulate",
            Experiment::DissipationAudit => "dissipation_audit",
            Experiment::DecayStudy => "decay_study",
            Experiment::ConstraintStudy => "constraint_study",
            Experiment::RefinementStudy => "refinement_study",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InitKind {
    EquilibriumPerturbation,
    DirectorPerturbation,
    StationaryHarmonic,
}

impl InitKind {
    pub fn name(&self) -> &'static str {
        match self {
            InitKind::EquilibriumPerturbation => "equilibrium_perturbation",
            InitKind::DirectorPerturbation => "director_perturbation",
            InitKind::StationaryHarmonic => "stationary_harmonic",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RefineTarget {
    Dt,
    Epsilon,
}

/// Fully validated experiment configuration.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub grid_n: usize,
    pub grid_length: f64,
    pub experiment: Experiment,
    pub seed: u64,
    pub record_every: usize,
    pub output_dir: Option<PathBuf>,
    pub raw_coeffs: RawCoefficients,
    pub coeffs: LeslieCoefficients,
    pub coeff_flags: CoefficientFlags,
    pub solver: SolverConfig,
    pub s: usize,
    pub eta1: f64,
    pub eta2: f64,
    pub eta0: f64,
    pub init_kind: InitKind,
    pub amplitude: f64,
    pub study_levels: usize,
    pub study_refine: RefineTarget,
    pub decay_max_initial_energy: f64,
    pub constraint_tolerance: f64,
}

const KNOWN_KEYS: &[&str] = &[
    "grid.n",
    "grid.length",
    "experiment",
    "seed",
    "record_every",
    "output_dir",
    "coeff.mu1",
    "coeff.mu2",
    "coeff.mu3",
    "coeff.mu4",
    "coeff.mu5",
    "coeff.mu6",
    "coeff.xi",
    "coeff.lambda1",
    "coeff.lambda2",
    "coeff.a",
    "coeff.gamma",
    "solver.dt",
    "solver.t_end",
    "solver.scheme",
    "solver.splitting",
    "solver.mollifier_eps",
    "solver.picard_max_iters",
    "solver.picard_tol",
    "solver.project_director",
    "solver.cfl_limit",
    "solver.vacuum_floor",
    "solver.dealias",
    "energy.s",
    "energy.eta1",
    "energy.eta2",
    "energy.eta0",
    "init.kind",
    "init.amplitude",
    "study.levels",
    "study.refine",
    "decay.max_initial_energy",
    "constraint.tolerance",
];

struct Entries {
    /// key → (line, raw value); later entries (overrides) win.
    map: BTreeMap<String, (usize, String)>,
    errors: Vec<ConfigError>,
}

impl Entries {
    fn push(&mut self, line: usize, key: &str, value: &str) {
        if !KNOWN_KEYS.contains(&key) {
            self.errors.push(ConfigError {
                line,
                key: key.to_string(),
                message: "unknown key".to_string(),
            });
            return;
        }
        self.map.insert(key.to_string(), (line, value.to_string()));
    }

    fn line_of(&self, key: &str) -> usize {
        self.map.get(key).map(|(l, _)| *l).unwrap_or(0)
    }

    fn take<T: std::str::FromStr>(&mut self, key: &str, default: T, what: &str) -> T {
        match self.map.get(key) {
            None => default,
            Some((line, raw)) => match raw.parse::<T>() {
                Ok(v) => v,
                Err(_) => {
                    self.errors.push(ConfigError {
                        line: *line,
                        key: key.to_string(),
                        message: format!("expected {what}, got `{raw}`"),
                    });
                    default
                }
            },
        }
    }

    fn take_optional_f64(&mut self, key: &str) -> Option<f64> {
        match self.map.get(key) {
            None => None,
            Some((line, raw)) => match raw.parse::<f64>() {
                Ok(v) => Some(v),
                Err(_) => {
                    self.errors.push(ConfigError {
                        line: *line,
                        key: key.to_string(),
                        message: format!("expected a number, got `{raw}`"),
                    });
                    None
                }
            },
        }
    }

    fn take_bool(&mut self, key: &str, default: bool) -> bool {
        match self.map.get(key) {
            None => default,
            Some((line, raw)) => match raw.as_str() {
                "true" | "on" | "yes" => true,
                "false" | "off" | "no" => false,
                _ => {
                    self.errors.push(ConfigError {
                        line: *line,
                        key: key.to_string(),
                        message: format!("expected true/false, got `{raw}`"),
                    });
                    default
                }
            },
        }
    }

    fn constraint(&mut self, key: &str, message: impl Into<String>) {
        self.errors.push(ConfigError {
            line: self.line_of(key),
            key: key.to_string(),
            message: message.into(),
        });
    }
}

fn split_line(line: &str) -> Option<(&str, &str)> {
    let body = match line.find('#') {
        Some(pos) => &line[..pos],
        None => line,
    };
    let body = body.trim();
    if body.is_empty() {
        return None;
    }
    let (k, v) = body.split_once('=')?;
    Some((k.trim(), v.trim()))
}

/// Parses and fully validates a configuration; `overrides` are
/// `key=value` pairs applied on top of the file (reported as line 0).
pub fn parse_config(text: &str, overrides: &[String]) -> Result<RunConfig, Vec<ConfigError>> {
    let mut entries = Entries { map: BTreeMap::new(), errors: Vec::new() };

    for (idx, raw_line) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw_line.trim();
        let stripped = match trimmed.find('#') {
            Some(pos) => trimmed[..pos].trim(),
            None => trimmed,
        };
        if stripped.is_empty() {
            continue;
        }
        match split_line(raw_line) {
            Some((k, v)) if !k.is_empty() && !v.is_empty() => entries.push(line, k, v),
            _ => entries.errors.push(ConfigError {
                line,
                key: stripped.to_string(),
                message: "expected `key = value`".to_string(),
            }),
        }
    }
    for ov in overrides {
        match ov.split_once('=') {
            Some((k, v)) if !k.trim().is_empty() => entries.push(0, k.trim(), v.trim()),
            _ => entries.errors.push(ConfigError {
                line: 0,
                key: ov.clone(),
                message: "override must be key=value".to_string(),
            }),
        }
    }

    let grid_n: usize = entries.take("grid.n", 32, "an integer");
    let grid_length: f64 = entries.take("grid.length", std::f64::consts::TAU, "a number");
    if grid_n < 8 || !grid_n.is_power_of_two() {
        entries.constraint("grid.n", "must be a power of two, at least 8");
    }
    if !(grid_length.is_finite() && grid_length > 0.0) {
        entries.constraint("grid.length", "must be finite and positive");
    }

    let experiment = match entries
        .take::<String>("experiment", "simulate".to_string(), "an experiment name")
        .as_str()
    {
        "simulate" => Experiment::Simulate,
        "dissipation_audit" => Experiment::DissipationAudit,
        "decay_study" => Experiment::DecayStudy,
        "constraint_study" => Experiment::ConstraintStudy,
        "refinement_study" => Experiment::RefinementStudy,
        other => {
            entries.constraint("experiment", format!("unknown experiment `{other}`"));
            Experiment::Simulate
        }
    };

    let seed: u64 = entries.take("seed", 0, "an unsigned integer");
    let record_every: usize = entries.take("record_every", 1, "a positive integer");
    if record_every == 0 {
        entries.constraint("record_every", "must be at least 1");
    }
    let output_dir = entries
        .map
        .get("output_dir")
        .map(|(_, v)| PathBuf::from(v.clone()));
    if output_dir.is_some() {
        entries.map.remove("output_dir");
    }

    let raw_coeffs = RawCoefficients {
        mu1: entries.take("coeff.mu1", 0.0, "a number"),
        mu2: entries.take("coeff.mu2", 0.0, "a number"),
        mu3: entries.take("coeff.mu3", 0.0, "a number"),
        mu4: entries.take("coeff.mu4", 1.0, "a number"),
        mu5: entries.take("coeff.mu5", 0.0, "a number"),
        mu6: entries.take("coeff.mu6", 0.0, "a number"),
        xi: entries.take("coeff.xi", 0.0, "a number"),
        a: entries.take("coeff.a", 2.0, "a number"),
        gamma: entries.take("coeff.gamma", 2.0, "a number"),
        lambda1: entries.take_optional_f64("coeff.lambda1"),
        lambda2: entries.take_optional_f64("coeff.lambda2"),
    };
    let validated = LeslieCoefficients::validate(&raw_coeffs);
    let (coeffs, coeff_flags) = match validated {
        Ok(pair) => pair,
        Err(e) => {
            entries.constraint("coeff.mu2", e.to_string());
            // Placeholder so validation can continue reporting other issues.
            LeslieCoefficients::validate(&RawCoefficients::default()).unwrap()
        }
    };
    if coeffs.gamma() <= 1.0 + 1e-6 {
        entries.constraint("coeff.gamma", "energy functionals need gamma > 1 + 1e-6");
    }

    let mut solver = SolverConfig::new(
        entries.take("solver.dt", 1e-3, "a number"),
        entries.take("solver.t_end", 1.0, "a number"),
    );
    solver.scheme = match entries
        .take::<String>("solver.scheme", "spectral".to_string(), "a scheme name")
        .as_str()
    {
        "spectral" => Scheme::Spectral,
        "centered2" => Scheme::Centered2,
        other => {
            entries.constraint("solver.scheme", format!("unknown scheme `{other}`"));
            Scheme::Spectral
        }
    };
    solver.splitting = match entries
        .take::<String>("solver.splitting", "lie".to_string(), "a splitting name")
        .as_str()
    {
        "lie" => Splitting::Lie,
        "strang" => Splitting::Strang,
        other => {
            entries.constraint("solver.splitting", format!("unknown splitting `{other}`"));
            Splitting::Lie
        }
    };
    solver.mollifier_eps = entries.take_optional_f64("solver.mollifier_eps");
    if let Some(eps) = solver.mollifier_eps {
        if !(eps.is_finite() && eps > 0.0) {
            entries.constraint("solver.mollifier_eps", "must be positive");
        }
    }
    if let Some((line, raw)) = entries.map.get("solver.picard_max_iters").cloned() {
        match raw.parse::<usize>() {
            Ok(0) | Err(_) => entries.errors.push(ConfigError {
                line,
                key: "solver.picard_max_iters".to_string(),
                message: "expected a positive integer".to_string(),
            }),
            Ok(n) => {
                let tol: f64 = entries.take("solver.picard_tol", 1e-10, "a number");
                if !(tol.is_finite() && tol > 0.0) {
                    entries.constraint("solver.picard_tol", "must be positive");
                }
                solver.picard = Some(PicardConfig { max_iters: n, tol });
            }
        }
    } else if entries.map.contains_key("solver.picard_tol") {
        entries.constraint(
            "solver.picard_tol",
            "needs solver.picard_max_iters to enable the fixed-point solve",
        );
    }
    solver.project_director = entries.take_bool("solver.project_director", true);
    solver.cfl_limit = entries.take("solver.cfl_limit", 0.4, "a number");
    solver.vacuum_floor = entries.take("solver.vacuum_floor", 1e-8, "a number");
    solver.dealias = entries.take_bool("solver.dealias", false);
    if !(solver.dt.is_finite() && solver.dt > 0.0) {
        entries.constraint("solver.dt", "must be positive");
    }
    if !(solver.t_end.is_finite() && solver.t_end >= 0.0) {
        entries.constraint("solver.t_end", "must be nonnegative");
    }
    if !(solver.cfl_limit > 0.0 && solver.cfl_limit <= 1.0) {
        entries.constraint("solver.cfl_limit", "must lie in (0, 1]");
    }
    if !(solver.vacuum_floor.is_finite() && solver.vacuum_floor >= 0.0) {
        entries.constraint("solver.vacuum_floor", "must be nonnegative");
    }

    let s: usize = entries.take("energy.s", 2, "an integer");
    if s == 0 || s > S_MAX {
        entries.constraint("energy.s", format!("must lie in 1..={S_MAX}"));
    }
    let eta0: f64 = entries.take("energy.eta0", 0.25, "a number");
    let eta1: f64 = entries.take("energy.eta1", 0.0, "a number");
    let eta2: f64 = entries.take("energy.eta2", 0.0, "a number");
    if !(eta0.is_finite() && eta0 >= 0.0) {
        entries.constraint("energy.eta0", "must be nonnegative");
    }
    for (key, eta) in [("energy.eta1", eta1), ("energy.eta2", eta2)] {
        if !(eta.is_finite() && (0.0..=eta0).contains(&eta)) {
            entries.constraint(key, format!("must lie in [0, eta0 = {eta0}]"));
        }
    }

    let init_kind = match entries
        .take::<String>("init.kind", "equilibrium_perturbation".to_string(), "an initial kind")
        .as_str()
    {
        "equilibrium_perturbation" => InitKind::EquilibriumPerturbation,
        "director_perturbation" => InitKind::DirectorPerturbation,
        "stationary_harmonic" => InitKind::StationaryHarmonic,
        other => {
            entries.constraint("init.kind", format!("unknown initial kind `{other}`"));
            InitKind::EquilibriumPerturbation
        }
    };
    let amplitude: f64 = entries.take("init.amplitude", 1e-2, "a number");
    if !(amplitude.is_finite() && amplitude >= 0.0) {
        entries.constraint("init.amplitude", "must be nonnegative");
    }

    let study_levels: usize = entries.take("study.levels", 2, "an integer");
    if !(2..=6).contains(&study_levels) {
        entries.constraint("study.levels", "must lie in 2..=6");
    }
    let study_refine = match entries
        .take::<String>("study.refine", "dt".to_string(), "a refinement target")
        .as_str()
    {
        "dt" => RefineTarget::Dt,
        "epsilon" => RefineTarget::Epsilon,
        other => {
            entries.constraint("study.refine", format!("unknown refinement target `{other}`"));
            RefineTarget::Dt
        }
    };
    if experiment == Experiment::RefinementStudy
        && study_refine == RefineTarget::Epsilon
        && solver.mollifier_eps.is_none()
    {
        entries.constraint(
            "solver.mollifier_eps",
            "epsilon refinement needs a starting solver.mollifier_eps",
        );
    }
    let decay_max_initial_energy: f64 =
        entries.take("decay.max_initial_energy", 1.0, "a number");
    if experiment == Experiment::DecayStudy && !coeff_flags.strictly_damped {
        entries.constraint(
            "coeff.mu2",
            "decay_study requires strictly damped coefficients (dissipative with lambda1 < 0)",
        );
    }
    let constraint_tolerance: f64 = entries.take("constraint.tolerance", 1e-6, "a number");
    if !(constraint_tolerance.is_finite() && constraint_tolerance > 0.0) {
        entries.constraint("constraint.tolerance", "must be positive");
    }

    if !entries.errors.is_empty() {
        let mut errs = entries.errors;
        errs.sort_by_key(|e| (e.line, e.key.clone()));
        errs.dedup();
        return Err(errs);
    }

    Ok(RunConfig {
        grid_n,
        grid_length,
        experiment,
        seed,
        record_every,
        output_dir,
        raw_coeffs,
        coeffs,
        coeff_flags,
        solver,
        s,
        eta1,
        eta2,
        eta0,
        init_kind,
        amplitude,
        study_levels,
        study_refine,
        decay_max_initial_energy,
        constraint_tolerance,
    })
}

/// Resolved configuration as a flat, ordered key → value map (echoed into
/// the run summary so artifacts are self-describing).
pub fn config_echo(cfg: &RunConfig) -> BTreeMap<String, String> {
    let mut m = BTreeMap::new();
    let mut put = |k: &str, v: String| {
        m.insert(k.to_string(), v);
    };
    put("grid.n", cfg.grid_n.to_string());
    put("grid.length", format!("{:e}", cfg.grid_length));
    put("experiment", cfg.experiment.name().to_string());
    put("seed", cfg.seed.to_string());
    put("record_every", cfg.record_every.to_string());
    put("coeff.mu1", format!("{:e}", cfg.raw_coeffs.mu1));
    put("coeff.mu2", format!("{:e}", cfg.raw_coeffs.mu2));
    put("coeff.mu3", format!("{:e}", cfg.raw_coeffs.mu3));
    put("coeff.mu4", format!("{:e}", cfg.raw_coeffs.mu4));
    put("coeff.mu5", format!("{:e}", cfg.raw_coeffs.mu5));
    put("coeff.mu6", format!("{:e}", cfg.raw_coeffs.mu6));
    put("coeff.xi", format!("{:e}", cfg.raw_coeffs.xi));
    put("coeff.lambda1", format!("{:e}", cfg.coeffs.lambda1()));
    put("coeff.lambda2", format!("{:e}", cfg.coeffs.lambda2()));
    put("coeff.a", format!("{:e}", cfg.raw_coeffs.a));
    put("coeff.gamma", format!("{:e}", cfg.raw_coeffs.gamma));
    put("coeff.dissipative", cfg.coeff_flags.dissipative.to_string());
    put("coeff.strictly_damped", cfg.coeff_flags.strictly_damped.to_string());
    put("solver.dt", format!("{:e}", cfg.solver.dt));
    put("solver.t_end", format!("{:e}", cfg.solver.t_end));
    put(
        "solver.scheme",
        match cfg.solver.scheme {
            Scheme::Spectral => "spectral".to_string(),
            Scheme::Centered2 => "centered2".to_string(),
        },
    );
    put(
        "solver.splitting",
        match cfg.solver.splitting {
            Splitting::Lie => "lie".to_string(),
            Splitting::Strang => "strang".to_string(),
        },
    );
    if let Some(eps) = cfg.solver.mollifier_eps {
        put("solver.mollifier_eps", format!("{eps:e}"));
    }
    if let Some(p) = cfg.solver.picard {
        put("solver.picard_max_iters", p.max_iters.to_string());
        put("solver.picard_tol", format!("{:e}", p.tol));
    }
    put("solver.project_director", cfg.solver.project_director.to_string());
    put("solver.cfl_limit", format!("{:e}", cfg.solver.cfl_limit));
    put("solver.vacuum_floor", format!("{:e}", cfg.solver.vacuum_floor));
    put("solver.dealias", cfg.solver.dealias.to_string());
    put("energy.s", cfg.s.to_string());
    put("energy.eta1", format!("{:e}", cfg.eta1));
    put("energy.eta2", format!("{:e}", cfg.eta2));
    put("energy.eta0", format!("{:e}", cfg.eta0));
    put("init.kind", cfg.init_kind.name().to_string());
    put("init.amplitude", format!("{:e}", cfg.amplitude));
    put("study.levels", cfg.study_levels.to_string());
    put(
        "study.refine",
        match cfg.study_refine {
            RefineTarget::Dt => "dt".to_string(),
            RefineTarget::Epsilon => "epsilon".to_string(),
        },
    );
    put("decay.max_initial_energy", format!("{:e}", cfg.decay_max_initial_energy));
    put("constraint.tolerance", format!("{:e}", cfg.constraint_tolerance));
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg = parse_config("grid.n = 32\ncoeff.mu4 = 1.0\n", &[]).unwrap();
        assert_eq!(cfg.grid_n, 32);
        assert_eq!(cfg.solver.dt, 1e-3);
        assert_eq!(cfg.s, 2);
        assert!(cfg.coeff_flags.dissipative);
        assert_eq!(cfg.record_every, 1);
    }

    #[test]
    fn contradictory_lambda_is_rejected_with_line() {
        let text = "coeff.mu2 = 1\ncoeff.mu3 = 0\ncoeff.mu6 = 1\ncoeff.lambda1 = 0\n";
        let errs = parse_config(text, &[]).unwrap_err();
        assert!(
            errs.iter().any(|e| e.message.contains("lambda1")),
            "errors: {errs:?}"
        );
    }

    #[test]
    fn gamma_at_unity_is_rejected_for_energy_runs() {
        let text = "experiment = dissipation_audit\ncoeff.gamma = 1.0\n";
        let errs = parse_config(text, &[]).unwrap_err();
        assert!(errs.iter().any(|e| e.key == "coeff.gamma"), "{errs:?}");
    }

    #[test]
    fn all_violations_are_collected_with_lines() {
        let text = "grid.n = 7\nbogus.key = 1\nsolver.dt = -2\nsolver.scheme = upwind\n";
        let errs = parse_config(text, &[]).unwrap_err();
        assert!(errs.len() >= 4, "{errs:?}");
        assert!(errs.iter().any(|e| e.line == 1 && e.key == "grid.n"));
        assert!(errs.iter().any(|e| e.line == 2 && e.key == "bogus.key"));
        assert!(errs.iter().any(|e| e.line == 3 && e.key == "solver.dt"));
        assert!(errs.iter().any(|e| e.line == 4 && e.key == "solver.scheme"));
    }

    #[test]
    fn overrides_win_and_are_validated() {
        let cfg = parse_config("grid.n = 32\n", &["grid.n=64".to_string()]).unwrap();
        assert_eq!(cfg.grid_n, 64);
        let errs = parse_config("grid.n = 32\n", &["grid.n=11".to_string()]).unwrap_err();
        assert!(errs.iter().any(|e| e.line == 0 && e.key == "grid.n"));
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let text = "# header\n\ngrid.n = 16  # trailing comment\n";
        let cfg = parse_config(text, &[]).unwrap();
        assert_eq!(cfg.grid_n, 16);
    }
}
