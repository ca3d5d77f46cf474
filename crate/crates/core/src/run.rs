//! Run orchestration and persistence.
//!
//! An output directory holds:
//!
//! - `config.toml`: the resolved configuration
//! - `diagnostics.csv`: one row per recorded step, columns in [`csv_header`] order
//! - `snapshots/u_NNNNNN.bin` and `.meta.json`: the density after every step
//! - `state.json`: last completed step plus the audit tracker, for resume
//! - `summary.json`: written when the run reaches `t_final`

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::coulomb::CoulombOperator;
use crate::diagnostics::{AuditContext, AuditFailure, AuditTally, DiagnosticsRecord, Tracker, AUDIT_NAMES};
use crate::error::{Error, Result};
use crate::field::{Grid3, ScalarField};
use crate::regularity::{self, MoserParams, MoserReport, PoincareParams};
use crate::scheme::{implicit_step, SchemeParams, StepState};
use crate::snapshot::{self, meta_path, snapshot_path, write_atomic, SnapshotMeta};

/// Overrides `output_dir` of the configuration when set.
pub const OUTPUT_DIR_ENV: &str = "LANDAU_OUTPUT_DIR";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolverTotals {
    pub outer_iterations: usize,
    pub newton_iterations: usize,
    pub cg_iterations: usize,
    pub clamps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoincareSummary {
    pub cube_size: f64,
    pub max_ratio: f64,
    pub max_mass_moment_ratio: f64,
    pub epsilon: f64,
    pub max_minimal_c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub config_hash: String,
    pub steps_completed: usize,
    pub steps_total: usize,
    pub complete: bool,
    pub all_audits_passed: bool,
    pub audits: BTreeMap<String, AuditTally>,
    pub failures: Vec<AuditFailure>,
    pub final_diagnostics: DiagnosticsRecord,
    pub mass_drift: f64,
    pub max_second_moment_ratio: f64,
    pub totals: SolverTotals,
    pub moser: Option<MoserReport>,
    pub poincare: Option<PoincareSummary>,
    pub wall_clock_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RunState {
    config_hash: String,
    k: usize,
    initial_mass: f64,
    initial_second_moment: f64,
    max_second_moment: f64,
    totals: SolverTotals,
    tracker: Tracker,
    last: DiagnosticsRecord,
}

/// Stops a run early after `max_steps` new steps (used to exercise resume).
#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    pub max_steps: Option<usize>,
}

pub fn resolve_output_dir(config: &RunConfig) -> PathBuf {
    std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| config.output_dir.clone())
}

pub fn csv_header() -> String {
    let mut cols: Vec<String> = [
        "k",
        "t",
        "mass",
        "second_moment",
        "radius",
        "entropy",
        "entropy_plain",
        "dissipation",
        "fisher_weighted",
        "min_u",
        "max_u",
        "parity_defect",
        "a_min_margin",
        "odd_integral_norm",
        "a_l3_local",
        "grad_a_l32_local",
        "w14",
        "mass_source",
        "mass_change",
        "entropy_lower_constant",
        "l1l3_running",
        "l53_norm",
        "outer_iterations",
        "newton_iterations",
        "clamps",
        "full_residual",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for n in AUDIT_NAMES {
        cols.push(format!("slack_{n}"));
        cols.push(format!("pass_{n}"));
    }
    cols.join(",")
}

fn fmt(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        format!("{v:.17e}")
    }
}

pub fn csv_row(r: &DiagnosticsRecord, s: &StepState) -> String {
    let mut out = format!("{},{}", r.k, fmt(r.t));
    for v in [
        r.mass,
        r.second_moment,
        r.radius,
        r.entropy,
        r.entropy_plain,
        r.dissipation,
        r.fisher_weighted,
        r.min_u,
        r.max_u,
        r.parity_defect,
        r.a_min_margin,
        r.odd_integral_norm,
        r.a_l3_local,
        r.grad_a_l32_local,
        r.w14,
        r.mass_source,
        r.mass_change,
        r.entropy_lower_constant,
        r.l1l3_running,
        r.l53_norm(),
    ] {
        let _ = write!(out, ",{}", fmt(v));
    }
    let st = &s.stats;
    let res = if s.k == 0 { f64::NAN } else { st.full_residual };
    let _ = write!(out, ",{},{},{},{}", st.outer_iterations, st.newton_iterations, st.clamps, fmt(res));
    for a in &r.audits {
        match a {
            Some(a) => {
                let _ = write!(out, ",{},{}", fmt(a.slack), u8::from(a.pass));
            }
            None => out.push_str(",nan,nan"),
        }
    }
    out
}

struct Session {
    dir: PathBuf,
    config: RunConfig,
    hash: String,
    params: SchemeParams,
    grid: Grid3,
    op: CoulombOperator,
    traj: Vec<StepState>,
    state: RunState,
    started: Instant,
}

impl Session {
    fn snapshots_dir(&self) -> PathBuf {
        self.dir.join("snapshots")
    }

    fn write_snapshot(&self, s: &StepState) -> Result<()> {
        let dir = self.snapshots_dir();
        snapshot::write_snapshot(&snapshot_path(&dir, s.k as u64), &s.u, s.k as u64, s.t)?;
        let meta = SnapshotMeta { config_hash: self.hash.clone(), k: s.k as u64, t: s.t, n: self.grid.n(), h: self.grid.h() };
        write_atomic(&meta_path(&dir, s.k as u64), serde_json::to_string_pretty(&meta)?.as_bytes())
    }

    fn write_state(&self) -> Result<()> {
        write_atomic(&self.dir.join("state.json"), serde_json::to_string_pretty(&self.state)?.as_bytes())
    }

    fn append_row(&self, row: &str) -> Result<()> {
        use std::io::Write;
        let path = self.dir.join("diagnostics.csv");
        let mut f = std::fs::OpenOptions::new().append(true).open(&path).map_err(|e| Error::io(&path, e))?;
        writeln!(f, "{row}").map_err(|e| Error::io(&path, e))
    }

    fn record_row(&self, k: usize) -> bool {
        k % self.config.diagnostics.cadence == 0 || k == self.config.steps()
    }

    fn advance(&mut self, opts: RunOptions) -> Result<RunSummary> {
        let total = self.config.steps();
        let mut done = 0;
        while self.state.k < total {
            if opts.max_steps.is_some_and(|m| done >= m) {
                break;
            }
            let prev = self.traj.last().expect("trajectory has the initial state");
            let k = prev.k + 1;
            let next = implicit_step(prev, &self.params, &self.op).map_err(|e| Error::AtStep { step: k, source: Box::new(e) })?;
            let rec = self.state.tracker.observe(&next, &self.op)?;
            self.write_snapshot(&next)?;
            if self.record_row(k) {
                self.append_row(&csv_row(&rec, &next))?;
            }
            let t = &mut self.state.totals;
            t.outer_iterations += next.stats.outer_iterations;
            t.newton_iterations += next.stats.newton_iterations;
            t.cg_iterations += next.stats.cg_iterations;
            t.clamps += next.stats.clamps;
            self.state.max_second_moment = self.state.max_second_moment.max(rec.second_moment);
            self.state.k = k;
            self.state.last = rec;
            self.write_state()?;
            self.traj.push(next);
            done += 1;
        }
        self.summary()
    }

    fn summary(&self) -> Result<RunSummary> {
        let total = self.config.steps();
        let complete = self.state.k == total;
        let (moser, poincare) = if complete { self.regularity()? } else { (None, None) };
        let st = &self.state;
        let summary = RunSummary {
            config_hash: self.hash.clone(),
            steps_completed: st.k,
            steps_total: total,
            complete,
            all_audits_passed: st.tracker.all_passed(),
            audits: st.tracker.tallies.clone(),
            failures: st.tracker.failures.clone(),
            final_diagnostics: st.last.clone(),
            mass_drift: st.last.mass - st.initial_mass,
            max_second_moment_ratio: st.max_second_moment / st.initial_second_moment,
            totals: st.totals,
            moser,
            poincare,
            wall_clock_seconds: self.started.elapsed().as_secs_f64(),
        };
        if complete {
            write_atomic(&self.dir.join("summary.json"), serde_json::to_string_pretty(&summary)?.as_bytes())?;
        }
        Ok(summary)
    }

    fn regularity(&self) -> Result<(Option<MoserReport>, Option<PoincareSummary>)> {
        let g = self.grid;
        let l = g.half_extent();
        let mut moser = None;
        let mc = &self.config.moser;
        if mc.enabled && self.config.time.t_final > 0.0 {
            let mp = MoserParams { p: mc.p, q: mc.q, n_max: mc.n_max, ..MoserParams::new(mc.radius.unwrap_or(l), self.config.time.t_final) };
            moser = Some(regularity::moser_sequence(&self.traj, self.config.time.tau, &mp)?);
        }
        let mut poincare = None;
        let pc = &self.config.poincare;
        if pc.enabled {
            let last = self.traj.last().expect("trajectory has the initial state");
            let cube = pc.cube_size.unwrap_or((l / 4.0).max(2.0 * g.h()));
            let pp = PoincareParams { r: pc.r, epsilon: pc.epsilon, samples: pc.samples, seed: self.config.seed, ..PoincareParams::new(cube) };
            let sp = regularity::small_p_ratio(&last.u, &last.a, &pp)?;
            let ep = regularity::eps_poincare_test(&last.u, &last.a, &pp)?;
            poincare = Some(PoincareSummary {
                cube_size: cube,
                max_ratio: sp.max_ratio,
                max_mass_moment_ratio: sp.max_mass_moment_ratio,
                epsilon: pc.epsilon,
                max_minimal_c: ep.max_minimal_c,
            });
        }
        Ok((moser, poincare))
    }
}

fn context(config: &RunConfig) -> AuditContext {
    AuditContext { tau: config.time.tau, eps: config.diagnostics.entropy_eps, entropy_slack: config.solver.audit_slack }
}

/// Runs `config` from t = 0. Relative initial-condition files resolve
/// against `base_dir`.
pub fn run(config: &RunConfig, base_dir: &Path) -> Result<RunSummary> {
    run_with(config, base_dir, RunOptions::default())
}

pub fn run_with(config: &RunConfig, base_dir: &Path, opts: RunOptions) -> Result<RunSummary> {
    config.validate()?;
    let started = Instant::now();
    let dir = resolve_output_dir(config);
    std::fs::create_dir_all(dir.join("snapshots")).map_err(|e| Error::io(&dir, e))?;
    let hash = config.hash()?;
    write_atomic(&dir.join("config.toml"), config.to_toml()?.as_bytes())?;
    for stale in ["summary.json", "state.json"] {
        let p = dir.join(stale);
        if p.exists() {
            std::fs::remove_file(&p).map_err(|e| Error::io(&p, e))?;
        }
    }
    let grid = config.grid()?;
    let u0 = config.initial_density(base_dir)?;
    let mass = u0.integral();
    if mass <= 0.0 {
        return Err(Error::ZeroMass);
    }
    let params = config.scheme_params(mass)?;
    let op = CoulombOperator::new(grid, config.coulomb.backend);
    let s0 = StepState::from_density(0, 0.0, u0, params.u_floor, &op)?;
    let mut tracker = Tracker::new(context(config));
    let rec = tracker.observe(&s0, &op)?;
    write_atomic(&dir.join("diagnostics.csv"), format!("{}\n{}\n", csv_header(), csv_row(&rec, &s0)).as_bytes())?;
    let state = RunState {
        config_hash: hash.clone(),
        k: 0,
        initial_mass: rec.mass,
        initial_second_moment: rec.second_moment,
        max_second_moment: rec.second_moment,
        totals: SolverTotals { clamps: s0.stats.clamps, ..Default::default() },
        tracker,
        last: rec,
    };
    let mut session = Session { dir, config: config.clone(), hash, params, grid, op, traj: vec![], state, started };
    session.write_snapshot(&s0)?;
    session.write_state()?;
    session.traj.push(s0);
    session.advance(opts)
}

/// Continues the run stored in `dir` from its last completed step.
pub fn resume(dir: &Path) -> Result<RunSummary> {
    resume_with(dir, RunOptions::default())
}

pub fn resume_with(dir: &Path, opts: RunOptions) -> Result<RunSummary> {
    let started = Instant::now();
    let config = RunConfig::load(&dir.join("config.toml"))?;
    let hash = config.hash()?;
    let state_path = dir.join("state.json");
    let raw = std::fs::read_to_string(&state_path).map_err(|e| Error::io(&state_path, e))?;
    let state: RunState = serde_json::from_str(&raw)?;
    let snap_dir = dir.join("snapshots");
    if state.config_hash != hash {
        return Err(Error::CorruptSnapshot {
            path: state_path,
            reason: "state was written for a different configuration".into(),
        });
    }
    let grid = config.grid()?;
    let op = CoulombOperator::new(grid, config.coulomb.backend);
    let initial = load_density(&snap_dir, 0, &grid, &hash)?;
    let params = config.scheme_params(initial.integral())?;
    let mut traj = Vec::with_capacity(state.k + 1);
    for k in 0..=state.k {
        let u = if k == 0 { initial.clone() } else { load_density(&snap_dir, k, &grid, &hash)? };
        traj.push(StepState::from_density(k, k as f64 * params.tau, u, params.u_floor, &op)?);
    }
    truncate_csv(&dir.join("diagnostics.csv"), state.k)?;
    let mut session = Session { dir: dir.to_path_buf(), config, hash, params, grid, op, traj, state, started };
    session.advance(opts)
}

fn load_density(snap_dir: &Path, k: usize, grid: &Grid3, hash: &str) -> Result<ScalarField> {
    let path = snapshot_path(snap_dir, k as u64);
    let snap = snapshot::read_snapshot(&path)?;
    let corrupt = |reason: String| Error::CorruptSnapshot { path: path.clone(), reason };
    if snap.n != grid.n() || snap.h.to_bits() != grid.h().to_bits() {
        return Err(corrupt(format!("snapshot grid n={} h={} does not match configured n={} h={}", snap.n, snap.h, grid.n(), grid.h())));
    }
    if snap.k != k as u64 {
        return Err(corrupt(format!("snapshot holds step {}, expected {k}", snap.k)));
    }
    let mpath = meta_path(snap_dir, k as u64);
    let meta: SnapshotMeta = serde_json::from_str(&std::fs::read_to_string(&mpath).map_err(|e| Error::io(&mpath, e))?)?;
    if meta.config_hash != hash {
        return Err(corrupt("snapshot was written for a different configuration".into()));
    }
    ScalarField::from_vec(*grid, snap.values)
}

/// Drops rows recorded after step `k` (left behind by an interrupted step).
fn truncate_csv(path: &Path, k: usize) -> Result<()> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = String::new();
    for (i, line) in text.lines().enumerate() {
        let keep = i == 0 || line.split(',').next().and_then(|s| s.parse::<usize>().ok()).is_some_and(|r| r <= k);
        if keep {
            out.push_str(line);
            out.push('\n');
        }
    }
    if out != text {
        write_atomic(path, out.as_bytes())?;
    }
    Ok(())
}
