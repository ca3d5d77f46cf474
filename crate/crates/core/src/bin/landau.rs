use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use landau::config::RunConfig;
use landau::coulomb::{Backend, CoulombOperator};
use landau::diagnostics::{AUDIT_NAMES, GATED_AUDITS};
use landau::field::{Grid3, ScalarField};
use landau::run::{resume, run, RunSummary};
use landau::snapshot::{read_snapshot, write_snapshot};
use landau::verify::{verify, VerifyOptions};

#[derive(Parser)]
#[command(name = "landau", version, about = "Implicit entropy scheme for the isotropic Landau equation")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a configuration from t = 0.
    Run { config: PathBuf },
    /// Continue an interrupted run from its output directory.
    Resume { dir: PathBuf },
    /// Built-in oracle suite.
    Verify {
        #[arg(long, default_value_t = 65)]
        size: usize,
        #[arg(long, default_value_t = 1.0, hide = true)]
        kernel_scale: f64,
        /// Print the report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Direct-sum Coulomb potential of a density snapshot.
    Oracle {
        snapshot: PathBuf,
        /// Output path (default: <snapshot stem>.potential.bin).
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
}

fn report(s: &RunSummary) -> ExitCode {
    println!("{}", serde_json::to_string_pretty(s).unwrap_or_default());
    for f in &s.failures {
        let gated = AUDIT_NAMES[..GATED_AUDITS].contains(&f.audit.as_str());
        let tag = if gated { "FAILED" } else { "below zero (informational)" };
        eprintln!("audit {} {tag} at step {}: slack {:.3e}", f.audit, f.step, f.slack);
    }
    if s.all_audits_passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}

fn oracle(path: &Path, out: Option<PathBuf>) -> landau::error::Result<PathBuf> {
    let snap = read_snapshot(path)?;
    let grid = Grid3::new(snap.n, snap.h)?;
    let u = ScalarField::from_vec(grid, snap.values)?;
    let a = CoulombOperator::new(grid, Backend::Direct).potential(&u)?;
    let out = out.unwrap_or_else(|| path.with_extension("potential.bin"));
    write_snapshot(&out, &a, snap.k, snap.t)?;
    Ok(out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Run { config } => RunConfig::load(&config).and_then(|c| {
            let base = config.parent().unwrap_or(Path::new("."));
            let audits = c.diagnostics.audits;
            run(&c, base).map(|s| if audits { report(&s) } else { report(&RunSummary { all_audits_passed: true, ..s }) })
        }),
        Cmd::Resume { dir } => resume(&dir).map(|s| report(&s)),
        Cmd::Verify { size, kernel_scale, json } => verify(&VerifyOptions { size, kernel_scale }).map(|r| {
            if json {
                println!("{}", serde_json::to_string_pretty(&r).unwrap_or_default());
            } else {
                for c in &r.checks {
                    let tag = if c.pass { "PASS" } else { "FAIL" };
                    println!("{tag} {:<24} {:.3e} (tol {:.1e}, {:.2}s)", c.name, c.measured, c.tolerance, c.seconds);
                }
            }
            if r.all_passed() {
                ExitCode::SUCCESS
            } else {
                eprintln!("{} check(s) failed", r.failures().len());
                ExitCode::from(1)
            }
        }),
        Cmd::Oracle { snapshot, out } => oracle(&snapshot, out).map(|p| {
            println!("{}", p.display());
            ExitCode::SUCCESS
        }),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        ExitCode::FAILURE
    })
}
