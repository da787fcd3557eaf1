use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use leslie_flow::summary::exit_code;
use leslie_flow::{parse_config, run_experiment, thread_cap_from_env};

/// Simulator and verification harness for a compressible nematic
/// liquid-crystal flow on the periodic 2-torus.
#[derive(Parser)]
#[command(name = "leslie-flow", version, about)]
struct Cli {
    /// Path to the flat key-value configuration file.
    config: PathBuf,

    /// Output directory (overrides the config's output_dir;
    /// defaults to ./output).
    #[arg(long)]
    output_dir: Option<PathBuf>,

    /// Seed override (same as --override seed=N).
    #[arg(long)]
    seed: Option<u64>,

    /// Additional key=value overrides applied on top of the file.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    let thread_cap = match thread_cap_from_env() {
        Ok(cap) => cap,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(exit_code::CONFIG_ERROR as u8);
        }
    };

    let text = match std::fs::read_to_string(&cli.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", cli.config.display());
            return ExitCode::from(exit_code::CONFIG_ERROR as u8);
        }
    };

    let mut overrides = cli.overrides.clone();
    if let Some(seed) = cli.seed {
        overrides.push(format!("seed={seed}"));
    }

    let cfg = match parse_config(&text, &overrides) {
        Ok(cfg) => cfg,
        Err(errors) => {
            eprintln!("error: invalid configuration ({} problem(s)):", errors.len());
            for e in errors {
                eprintln!("  {}: {e}", cli.config.display());
            }
            return ExitCode::from(exit_code::CONFIG_ERROR as u8);
        }
    };

    let out_dir = cli
        .output_dir
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("output"));

    let result = match run_experiment(&cfg, &out_dir, thread_cap) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: cannot write artifacts under {}: {e}", out_dir.display());
            return ExitCode::from(exit_code::CONFIG_ERROR as u8);
        }
    };

    println!(
        "experiment {} (seed {}) -> {}",
        result.summary.experiment,
        result.summary.seed,
        out_dir.display()
    );
    for cert in &result.summary.certificates {
        println!(
            "  certificate {:<28} {}",
            cert.name,
            if cert.pass { "PASS" } else { "FAIL" }
        );
    }
    for (name, order) in &result.summary.measured_orders {
        println!("  measured order {name} = {order:.3}");
    }
    if let Some(err) = &result.summary.error {
        eprintln!("solver error [{}]: {}", err.kind, err.message);
    }
    println!("exit code {}", result.exit_code);
    ExitCode::from(result.exit_code as u8)
}
