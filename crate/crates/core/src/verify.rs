//! Built-in oracle suite behind the `verify` verb.

use std::f64::consts::PI;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::coulomb::{Backend, CoulombOperator};
use crate::diagnostics::{dissipation, DissipationMethod};
use crate::error::Result;
use crate::field::{parity_defect, Grid3, ScalarField};
use crate::initial::{gaussian, uniform_ball};
use crate::scheme::{implicit_step, residual, solve_residual_equation, FrozenFields, SchemeParams, StepState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    /// Grid size of the closed-form Coulomb checks (odd).
    pub size: usize,
    /// Multiplies the Coulomb kernel; anything but 1 must make the suite fail.
    pub kernel_scale: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { size: 65, kernel_scale: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.pass).collect()
    }
}

/// Tolerance of the closed-form checks on an n^3 grid: 1e-3 at n = 65,
/// growing like h^2 on coarser grids.
pub fn closed_form_tolerance(n: usize) -> f64 {
    let r = 64.0 / (n as f64 - 1.0);
    1e-3 * r * r
}

fn timed(name: &str, tolerance: f64, f: impl FnOnce() -> Result<f64>) -> Result<Check> {
    let t0 = Instant::now();
    let measured = f()?;
    Ok(Check { name: name.into(), measured, tolerance, pass: measured <= tolerance, seconds: t0.elapsed().as_secs_f64() })
}

/// Max relative error of the potential of a unit uniform ball of radius
/// L/2 against m/(4 pi |x|) at nodes with |x| >= L/2.
pub fn ball_exterior_error(op: &CoulombOperator) -> Result<f64> {
    let g = *op.grid();
    let r0 = 0.5 * g.half_extent();
    let a = op.potential(&uniform_ball(g, 1.0, r0, 8))?;
    let mut err = 0.0f64;
    for idx in 0..g.len() {
        let r = g.radius(idx);
        if r >= r0 {
            err = err.max((4.0 * PI * r * a.values()[idx] - 1.0).abs());
        }
    }
    Ok(err)
}

/// Max relative error of the potential of a unit Gaussian against
/// erf(r / (sqrt 2 sigma)) / (4 pi r), on a grid of half-width 5 sigma.
pub fn gaussian_error(op: &CoulombOperator) -> Result<f64> {
    let g = *op.grid();
    let sigma = g.half_extent() / 5.0;
    let a = op.potential(&gaussian(g, 1.0, sigma, [0.0; 3]))?;
    let mut err = 0.0f64;
    for idx in 0..g.len() {
        let r = g.radius(idx);
        let exact = if r == 0.0 {
            (2.0 / PI).sqrt() / (4.0 * PI * sigma)
        } else {
            libm::erf(r / (2f64.sqrt() * sigma)) / (4.0 * PI * r)
        };
        err = err.max((a.values()[idx] - exact).abs() / exact);
    }
    Ok(err)
}

fn random_positive(g: Grid3, seed: u64) -> ScalarField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ScalarField::from_fn(g, |_| rng.gen_range(0.2..2.0))
}

fn relative(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

fn reference_state(op: &CoulombOperator, params: &SchemeParams) -> Result<StepState> {
    let u0 = gaussian(*op.grid(), 10.0, 1.0, [0.0; 3]);
    StepState::from_density(0, 0.0, u0, params.u_floor, op)
}

/// Manufactured solution: w* = log u_prev + smooth bump, target R(w*),
/// solved from w = log u_prev. Returns max |w - w*|.
pub fn manufactured_error(n: usize, backend: Backend) -> Result<f64> {
    let g = Grid3::with_half_extent(n, 1.5)?;
    let op = CoulombOperator::new(g, backend);
    let params = SchemeParams { outer_tol: 1e-13, ..SchemeParams::new(1.0 / 32.0, 1.0 / 32.0) }.with_floor_for(10.0, 1.5);
    let prev = reference_state(&op, &params)?;
    let wstar = prev.w.zip_map(&ScalarField::from_fn(g, |x| 0.2 * (x[0] - 0.3 * x[1]).sin() * (0.5 * x[2]).cos()), |a, b| a + b);
    let target = residual(&prev, &wstar, &FrozenFields::at(&op, &wstar)?, &params);
    let (w, _) = solve_residual_equation(&prev, &target, &params, &op)?;
    Ok(w.zip_map(&wstar, |a, b| (a - b).abs()).max())
}

pub fn verify(opts: &VerifyOptions) -> Result<VerifyReport> {
    let n = opts.size.max(5) | 1;
    let g = Grid3::with_half_extent(n, 6.0)?;
    let op = CoulombOperator::with_kernel_scale(g, Backend::Spectral, opts.kernel_scale);
    let tol = closed_form_tolerance(n);
    let mut checks = vec![timed("coulomb_ball_exterior", tol, || ball_exterior_error(&op))?];
    let gg = Grid3::with_half_extent(n, 5.0)?;
    let opg = CoulombOperator::with_kernel_scale(gg, Backend::Spectral, opts.kernel_scale);
    checks.push(timed("coulomb_gaussian", tol, || gaussian_error(&opg))?);

    let ne = n.min(17);
    checks.push(timed("backend_equivalence", 1e-10, || {
        let g = Grid3::with_half_extent(ne, 2.0)?;
        let u = random_positive(g, 1);
        let a = CoulombOperator::new(g, Backend::Direct).potential(&u)?;
        let b = CoulombOperator::new(g, Backend::Spectral).potential(&u)?;
        Ok(a.zip_map(&b, |x, y| (x - y).abs()).max() / a.max_abs())
    })?);

    let nd = n.min(13);
    checks.push(timed("dissipation_double_sum", 1e-8, || {
        let g = Grid3::with_half_extent(nd, 2.0)?;
        let op = CoulombOperator::new(g, Backend::Spectral);
        let u = random_positive(g, 2);
        Ok(relative(dissipation(&u, &op, DissipationMethod::DoubleSum)?, dissipation(&u, &op, DissipationMethod::Convolution)?))
    })?);

    let ns = n.min(13);
    let gs = Grid3::with_half_extent(ns, 1.5)?;
    let ops = CoulombOperator::new(gs, Backend::Spectral);
    let params = SchemeParams::new(1.0 / 32.0, 1.0 / 32.0).with_floor_for(10.0, 1.5);
    let prev = reference_state(&ops, &params)?;
    let t0 = Instant::now();
    let next = implicit_step(&prev, &params, &ops)?;
    let secs = t0.elapsed().as_secs_f64();
    let par = parity_defect(&next.u) / next.u.max();
    checks.push(Check { name: "step_parity".into(), measured: par, tolerance: 1e-12, pass: par <= 1e-12, seconds: secs });
    let slack = next.stats.entropy.map_or(f64::NAN, |a| a.slack);
    checks.push(Check { name: "step_entropy_deficit".into(), measured: -slack, tolerance: 0.0, pass: slack >= 0.0, seconds: 0.0 });

    checks.push(timed("manufactured_solution", params.newton_tol, || manufactured_error(9, Backend::Spectral))?);
    Ok(VerifyReport { checks })
}
