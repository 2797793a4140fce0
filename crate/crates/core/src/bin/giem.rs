use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use giem::cli::{compare_runs, exit_code, failure_report, run, ExperimentConfig, MapSpec};
use giem::numerics::BigFloat;
use giem::rauzy::check_no_connection;
use giem::{Error, Result};

#[derive(Parser)]
#[command(name = "giem", version, about = "Rauzy-Veech renormalization experiments for genus-one g.i.e.m.s")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the experiment described by a TOML config.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        depth: Option<usize>,
        #[arg(long)]
        bits: Option<u32>,
        #[arg(long)]
        seed: Option<u64>,
        /// Exit with status 5 when any experiment check fails.
        #[arg(long)]
        assert: bool,
    },
    /// Column-wise differences between two run directories.
    Compare { a: PathBuf, b: PathBuf },
    /// Build a map and report its structural checks.
    ValidateMap {
        #[arg(long, conflicts_with = "preset")]
        config: Option<PathBuf>,
        #[arg(long)]
        preset: Option<String>,
        #[arg(long, default_value_t = 256)]
        bits: u32,
    },
}

fn print(v: &impl serde::Serialize) {
    println!("{}", serde_json::to_string_pretty(v).unwrap_or_default());
}

fn validate_map(config: Option<PathBuf>, preset: Option<String>, bits: u32) -> Result<bool> {
    let spec = match (config, preset) {
        (Some(p), _) => ExperimentConfig::load(&p)?.map,
        (None, Some(name)) => MapSpec::Preset { preset: name },
        (None, None) => return Err(Error::Config("pass --config or --preset".into())),
    };
    let f = spec.descriptor()?.build::<BigFloat>(&bits)?;
    let report = f.validate();
    let tol = BigFloat::new(bits, 2f64.powi(8 - bits as i32));
    let conn = check_no_connection(&f, 2000, &tol);
    let ok = report.irreducible && report.domain_tiling && report.image_tiling && report.orientation && report.genus_one;
    print(&json!({ "valid": ok, "report": report, "connection": conn }));
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.cmd {
        Cmd::Run { config, out, depth, bits, seed, assert } => ExperimentConfig::load(&config)
            .and_then(|c| c.with_overrides(depth, bits, seed, out.clone()))
            .and_then(|c| run(&c, out.as_deref()))
            .map(|rec| {
                for c in &rec.checks {
                    eprintln!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
                }
                if assert && !rec.passed() {
                    let failed: Vec<_> = rec.checks.iter().filter(|c| !c.passed).collect();
                    print(&json!({ "exit_code": 5, "failed_checks": failed }));
                    5
                } else {
                    0
                }
            }),
        Cmd::Compare { a, b } => compare_runs(&a, &b).map(|d| {
            print(&d);
            0
        }),
        Cmd::ValidateMap { config, preset, bits } => validate_map(config, preset, bits).map(|ok| if ok { 0 } else { 2 }),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("{}", serde_json::to_string(&failure_report(&e)).unwrap_or_default());
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
