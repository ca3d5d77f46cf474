//! The reference configuration through the run driver.
//!
//!     cargo run --release --example reference_run -- [config] [output dir]

use std::path::PathBuf;

use landau::config::RunConfig;
use landau::run::run;

fn main() -> landau::error::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = args.next().map(PathBuf::from).unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs/reference.toml"));
    let mut cfg = RunConfig::load(&path)?;
    if let Some(out) = args.next() {
        cfg.output_dir = out.into();
    }
    let s = run(&cfg, path.parent().unwrap())?;
    println!("{} steps in {:.1}s, all audits passed: {}", s.steps_completed, s.wall_clock_seconds, s.all_audits_passed);
    for (name, t) in &s.audits {
        println!("  {name:<28} {:>3} pass {:>3} fail  worst slack {:.3e}", t.passes, t.failures, t.worst_slack.unwrap_or(f64::NAN));
    }
    println!("mass drift {:.4e}, max E/E0 {:.4}", s.mass_drift, s.max_second_moment_ratio);
    if let Some(m) = &s.moser {
        println!("moser: measured {:.4} <= predicted {:.4}", m.measured_sup, m.predicted);
    }
    Ok(())
}
