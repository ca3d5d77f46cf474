//! Run configuration (TOML).
//!
//! ```toml
//! seed = 0
//! output_dir = "out"
//!
//! [grid]
//! n = 17              # odd, >= 5
//! # half_extent = 1.5 # or h = 0.1; default tau^-alpha
//!
//! [time]
//! tau = 0.015625
//! t_final = 0.25
//! alpha = 0.0909090909090909
//!
//! [initial]
//! kind = "gaussian"   # gaussian | ball | double_bump | file
//! mass = 40.0
//! sigma = 1.5
//!
//! [coulomb]
//! backend = "spectral"
//! ```
//!
//! Every constraint violation is reported with the line of the offending key.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::coulomb::Backend;
use crate::error::{Error, Result};
use crate::field::{symmetrize_even, Grid3, ScalarField};
use crate::initial;
use crate::scheme::SchemeParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    pub grid: GridConfig,
    pub time: TimeConfig,
    pub initial: InitialConfig,
    #[serde(default)]
    pub coulomb: CoulombConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
    #[serde(default)]
    pub poincare: PoincareConfig,
    #[serde(default)]
    pub moser: MoserConfig,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n: usize,
    pub h: Option<f64>,
    pub half_extent: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub tau: f64,
    pub t_final: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
}

fn default_alpha() -> f64 {
    1.0 / 11.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialConfig {
    Gaussian {
        mass: f64,
        sigma: f64,
        #[serde(default)]
        center: [f64; 3],
    },
    Ball {
        mass: f64,
        radius: f64,
    },
    DoubleBump {
        mass: f64,
        sigma: f64,
        offset: [f64; 3],
    },
    File {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoulombConfig {
    pub backend: Backend,
}

impl Default for CoulombConfig {
    fn default() -> Self {
        Self { backend: Backend::Spectral }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub outer_tol: f64,
    pub newton_tol: f64,
    pub outer_max: usize,
    pub newton_max: usize,
    /// Default 1e-12 m / L^3.
    pub u_floor: Option<f64>,
    pub audit_slack: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let p = SchemeParams::new(1.0, 1.0);
        Self {
            outer_tol: p.outer_tol,
            newton_tol: p.newton_tol,
            outer_max: p.outer_max,
            newton_max: p.newton_max,
            u_floor: None,
            audit_slack: p.audit_slack,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsConfig {
    /// A row every `cadence` steps, plus the last step.
    pub cadence: usize,
    /// eps of the entropy lower bound.
    pub entropy_eps: f64,
    /// When true a failed audit makes the `run` verb exit nonzero.
    pub audits: bool,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self { cadence: 1, entropy_eps: 0.2, audits: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoincareConfig {
    pub enabled: bool,
    /// Default L/4.
    pub cube_size: Option<f64>,
    pub r: f64,
    pub epsilon: f64,
    pub samples: usize,
}

impl Default for PoincareConfig {
    fn default() -> Self {
        Self { enabled: true, cube_size: None, r: 2.0, epsilon: 0.1, samples: 64 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MoserConfig {
    pub enabled: bool,
    pub p: f64,
    pub q: f64,
    /// Default L.
    pub radius: Option<f64>,
    pub n_max: usize,
}

impl Default for MoserConfig {
    fn default() -> Self {
        Self { enabled: true, p: 10.0 / 9.0, q: 3.0, radius: None, n_max: 6 }
    }
}

/// Line (1-based) of `key` inside `[section]` (top level when empty).
fn line_of(src: &str, section: &str, key: &str) -> usize {
    let mut current = String::new();
    let mut section_line = 1;
    for (i, raw) in src.lines().enumerate() {
        let line = raw.trim();
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = name.trim().to_string();
            if current == section {
                section_line = i + 1;
            }
            continue;
        }
        if current == section {
            if let Some((k, _)) = line.split_once('=') {
                if k.trim() == key {
                    return i + 1;
                }
            }
        }
    }
    section_line
}

fn line_at(src: &str, offset: usize) -> usize {
    src[..offset.min(src.len())].matches('\n').count() + 1
}

/// Tagged tables report errors against the whole table; narrow unknown
/// fields down to the offending key.
fn error_line(src: &str, offset: usize, message: &str) -> usize {
    let start = line_at(src, offset);
    let unknown = message.strip_prefix("unknown field `").and_then(|m| m.split('`').next());
    if let Some(key) = unknown {
        for (i, raw) in src.lines().enumerate().skip(start - 1) {
            let raw = raw.trim();
            if i >= start && raw.starts_with('[') {
                break;
            }
            if raw.split_once('=').is_some_and(|(k, _)| k.trim() == key) {
                return i + 1;
            }
        }
    }
    start
}

impl RunConfig {
    pub fn parse(src: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(src).map_err(|e| Error::Config {
            line: e.span().map_or(0, |s| error_line(src, s.start, e.message())),
            message: e.message().to_string(),
        })?;
        cfg.validate_with_source(src)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let src = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&src)
    }

    pub fn validate(&self) -> Result<()> {
        let src = self.to_toml()?;
        self.validate_with_source(&src)
    }

    fn validate_with_source(&self, src: &str) -> Result<()> {
        let fail = |section: &str, key: &str, message: String| Err(Error::Config { line: line_of(src, section, key), message });
        let g = &self.grid;
        if g.n < 5 || g.n % 2 == 0 {
            return fail("grid", "n", format!("grid.n must be odd and >= 5, got {}", g.n));
        }
        if g.h.is_some() && g.half_extent.is_some() {
            return fail("grid", "h", "give at most one of grid.h and grid.half_extent".into());
        }
        if let Some(h) = g.h {
            if !(h > 0.0 && h.is_finite()) {
                return fail("grid", "h", format!("grid.h must be positive, got {h}"));
            }
        }
        if let Some(l) = g.half_extent {
            if !(l > 0.0 && l.is_finite()) {
                return fail("grid", "half_extent", format!("grid.half_extent must be positive, got {l}"));
            }
        }
        let t = &self.time;
        if !(t.tau > 0.0 && t.tau.is_finite()) {
            return fail("time", "tau", format!("time.tau must be positive, got {}", t.tau));
        }
        if !(t.alpha > 0.0 && t.alpha <= 1.0 / 11.0 + 1e-15) {
            return fail("time", "alpha", format!("time.alpha must lie in (0, 1/11], got {}", t.alpha));
        }
        if !(t.t_final >= 0.0) {
            return fail("time", "t_final", format!("time.t_final must be nonnegative, got {}", t.t_final));
        }
        let steps = t.t_final / t.tau;
        if (steps - steps.round()).abs() > 1e-9 * steps.max(1.0) {
            return fail("time", "t_final", format!("time.t_final / time.tau = {steps} is not an integer"));
        }
        match &self.initial {
            InitialConfig::Gaussian { mass, sigma, .. } | InitialConfig::DoubleBump { mass, sigma, .. } => {
                if !(*mass > 0.0) {
                    return fail("initial", "mass", format!("initial.mass must be positive, got {mass}"));
                }
                if !(*sigma > 0.0) {
                    return fail("initial", "sigma", format!("initial.sigma must be positive, got {sigma}"));
                }
            }
            InitialConfig::Ball { mass, radius } => {
                if !(*mass > 0.0) {
                    return fail("initial", "mass", format!("initial.mass must be positive, got {mass}"));
                }
                if !(*radius > 0.0) {
                    return fail("initial", "radius", format!("initial.radius must be positive, got {radius}"));
                }
            }
            InitialConfig::File { .. } => {}
        }
        let s = &self.solver;
        for (key, v) in [("outer_tol", s.outer_tol), ("newton_tol", s.newton_tol)] {
            if !(v > 0.0) {
                return fail("solver", key, format!("solver.{key} must be positive, got {v}"));
            }
        }
        if !(s.audit_slack >= 0.0) {
            return fail("solver", "audit_slack", format!("solver.audit_slack must be nonnegative, got {}", s.audit_slack));
        }
        for (key, v) in [("outer_max", s.outer_max), ("newton_max", s.newton_max)] {
            if v == 0 {
                return fail("solver", key, format!("solver.{key} must be positive"));
            }
        }
        if let Some(f) = s.u_floor {
            if !(f > 0.0) {
                return fail("solver", "u_floor", format!("solver.u_floor must be positive, got {f}"));
            }
        }
        let d = &self.diagnostics;
        if d.cadence == 0 {
            return fail("diagnostics", "cadence", "diagnostics.cadence must be positive".into());
        }
        if !(d.entropy_eps > 0.0 && d.entropy_eps < 0.4) {
            return fail("diagnostics", "entropy_eps", format!("diagnostics.entropy_eps must lie in (0, 2/5), got {}", d.entropy_eps));
        }
        let p = &self.poincare;
        let grid = self.grid_unchecked();
        if let Some(c) = p.cube_size {
            if let Ok(gr) = grid {
                if !(c >= 2.0 * gr.h() && c <= 2.0 * gr.half_extent()) {
                    return fail("poincare", "cube_size", format!("poincare.cube_size must lie in [2h, 2L], got {c}"));
                }
            }
        }
        if !(p.r > 1.0) {
            return fail("poincare", "r", format!("poincare.r must exceed 1, got {}", p.r));
        }
        if !(p.epsilon > 0.0) {
            return fail("poincare", "epsilon", format!("poincare.epsilon must be positive, got {}", p.epsilon));
        }
        let m = &self.moser;
        if !(m.p > 1.0 && m.p <= 10.0 / 9.0 + 1e-15) {
            return fail("moser", "p", format!("moser.p must lie in (1, 10/9], got {}", m.p));
        }
        if !(m.q > 2.0 && m.q < 10.0 / 3.0) {
            return fail("moser", "q", format!("moser.q must lie in (2, 10/3), got {}", m.q));
        }
        if let Some(r) = m.radius {
            if !(r > 0.0) {
                return fail("moser", "radius", format!("moser.radius must be positive, got {r}"));
            }
        }
        if let Err(e) = grid {
            return fail("grid", "n", e.to_string());
        }
        Ok(())
    }

    fn grid_unchecked(&self) -> Result<Grid3> {
        let n = self.grid.n;
        match (self.grid.h, self.grid.half_extent) {
            (Some(h), _) => Grid3::new(n, h),
            (None, Some(l)) => Grid3::with_half_extent(n, l),
            (None, None) => Grid3::with_half_extent(n, self.time.tau.powf(-self.time.alpha)),
        }
    }

    pub fn grid(&self) -> Result<Grid3> {
        self.grid_unchecked()
    }

    pub fn steps(&self) -> usize {
        (self.time.t_final / self.time.tau).round() as usize
    }

    /// Symmetrized initial density on the configured grid.
    pub fn initial_density(&self, base_dir: &Path) -> Result<ScalarField> {
        let g = self.grid()?;
        let u = match &self.initial {
            InitialConfig::Gaussian { mass, sigma, center } => initial::gaussian(g, *mass, *sigma, *center),
            InitialConfig::Ball { mass, radius } => initial::uniform_ball(g, *mass, *radius, 8),
            InitialConfig::DoubleBump { mass, sigma, offset } => initial::double_bump(g, *mass, *sigma, *offset),
            InitialConfig::File { path } => {
                let p = if path.is_absolute() { path.clone() } else { base_dir.join(path) };
                let snap = crate::snapshot::read_snapshot(&p)?;
                if snap.n != g.n() || snap.h.to_bits() != g.h().to_bits() {
                    return Err(Error::GridMismatch { expected: (g.n(), g.h()), found: (snap.n, snap.h) });
                }
                ScalarField::from_vec(g, snap.values)?
            }
        };
        if !u.is_finite() || u.values().iter().any(|v| *v < 0.0) {
            return Err(Error::InvalidParameter("initial density must be finite and nonnegative".into()));
        }
        Ok(symmetrize_even(&u))
    }

    /// Scheme parameters with the floor resolved from the initial mass.
    pub fn scheme_params(&self, mass: f64) -> Result<SchemeParams> {
        let g = self.grid()?;
        let s = &self.solver;
        let mut p = SchemeParams {
            tau: self.time.tau,
            alpha: self.time.alpha,
            outer_tol: s.outer_tol,
            newton_tol: s.newton_tol,
            outer_max: s.outer_max,
            newton_max: s.newton_max,
            t_final: self.time.t_final,
            audit_slack: s.audit_slack,
            ..SchemeParams::new(self.time.tau, self.time.t_final)
        }
        .with_floor_for(mass, g.half_extent());
        if let Some(f) = s.u_floor {
            p.u_floor = f;
        }
        p.validate()?;
        Ok(p)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config { line: 0, message: e.to_string() })
    }

    /// SHA-256 of the canonical TOML serialization, hex encoded.
    pub fn hash(&self) -> Result<String> {
        let digest = Sha256::digest(self.to_toml()?.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = "seed = 3\n\n[grid]\nn = 9\nhalf_extent = 2.0\n\n[time]\ntau = 0.125\nt_final = 0.25\n\n[initial]\nkind = \"gaussian\"\nmass = 1.0\nsigma = 0.5\n";

    #[test]
    fn parses_and_defaults() {
        let c = RunConfig::parse(BASE).unwrap();
        assert_eq!(c.seed, 3);
        assert_eq!(c.steps(), 2);
        assert_eq!(c.coulomb.backend, Backend::Spectral);
        assert_eq!(c.time.alpha, 1.0 / 11.0);
        let again = RunConfig::parse(&c.to_toml().unwrap()).unwrap();
        assert_eq!(again, c);
        assert_eq!(again.hash().unwrap(), c.hash().unwrap());
    }

    #[test]
    fn reports_line_of_bad_value() {
        let src = BASE.replace("n = 9", "n = 8");
        match RunConfig::parse(&src) {
            Err(Error::Config { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
        let src = BASE.replace("tau = 0.125", "tau = -1.0");
        match RunConfig::parse(&src) {
            Err(Error::Config { line, .. }) => assert_eq!(line, 8),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn reports_line_of_syntax_and_unknown_keys() {
        let src = BASE.replace("sigma = 0.5", "sigma = 0.5\nbogus = 1");
        match RunConfig::parse(&src) {
            Err(Error::Config { line, .. }) => assert_eq!(line, 15),
            other => panic!("{other:?}"),
        }
        let src = BASE.replace("t_final = 0.25", "t_final = ");
        assert!(matches!(RunConfig::parse(&src), Err(Error::Config { line: 9, .. })));
    }

    #[test]
    fn rejects_non_integer_step_count() {
        let src = BASE.replace("t_final = 0.25", "t_final = 0.3");
        assert!(matches!(RunConfig::parse(&src), Err(Error::Config { line: 9, .. })));
    }
}
