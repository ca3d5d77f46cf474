//! Stop a run after two steps, resume it, and compare with an uninterrupted run.

use landau::config::RunConfig;
use landau::run::{resume, run, run_with, RunOptions};

fn main() -> landau::error::Result<()> {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/smoke.toml");
    let base = RunConfig::load(&path)?;
    let tmp = std::env::temp_dir().join(format!("landau-resume-{}", std::process::id()));
    let (whole, split) = (tmp.join("whole"), tmp.join("split"));

    run(&RunConfig { output_dir: whole.clone(), ..base.clone() }, &tmp)?;
    let part = run_with(&RunConfig { output_dir: split.clone(), ..base }, &tmp, RunOptions { max_steps: Some(2) })?;
    println!("interrupted after {} of {} steps", part.steps_completed, part.steps_total);
    let done = resume(&split)?;
    println!("resumed to step {}", done.steps_completed);

    let a = std::fs::read(whole.join("diagnostics.csv")).map_err(|e| landau::error::Error::InvalidParameter(e.to_string()))?;
    let b = std::fs::read(split.join("diagnostics.csv")).map_err(|e| landau::error::Error::InvalidParameter(e.to_string()))?;
    println!("diagnostics identical: {}", a == b);
    let _ = std::fs::remove_dir_all(&tmp);
    Ok(())
}
