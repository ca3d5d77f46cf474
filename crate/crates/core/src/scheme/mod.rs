//! Implicit entropy-variable step.
//!
//! Given u^{k-1}, find w = log u^k with
//!
//!   (e^w - u^{k-1})/tau + tau w^3 - tau div(|grad w|^2 grad w) - div(F) = 0,
//!   F = e^w (a grad w - b),   a = K*e^w,   b = K*(e^w grad w),
//!
//! where K is the tabulated Coulomb kernel and div is the no-flux
//! divergence. b is the convolution of grad u = u grad w, i.e. grad a
//! written in entropy variables. With this choice sum(F . grad w) h^3 is the
//! dissipation D computed by the convolution formula, so the discrete
//! entropy inequality holds with the same D that the diagnostics report.

pub mod inner;
pub mod ops;

use serde::{Deserialize, Serialize};

use crate::coulomb::CoulombOperator;
use crate::diagnostics::{dissipation_from_fields, entropy};
use crate::error::{Error, Result};
use crate::field::{gradient, gradient_adjoint, ScalarField, VectorField};

pub use inner::{residual_norm, solve_inner, InnerProblem, InnerSolution, NewtonControls};

/// Time step, domain exponent and solver controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchemeParams {
    pub tau: f64,
    pub alpha: f64,
    pub u_floor: f64,
    pub outer_tol: f64,
    pub newton_tol: f64,
    pub outer_max: usize,
    pub newton_max: usize,
    pub t_final: f64,
    /// Relative slack of the per-step entropy audit.
    pub audit_slack: f64,
}

impl SchemeParams {
    pub fn new(tau: f64, t_final: f64) -> Self {
        Self {
            tau,
            alpha: 1.0 / 11.0,
            u_floor: f64::MIN_POSITIVE,
            outer_tol: 1e-12,
            newton_tol: 1e-10,
            outer_max: 200,
            newton_max: 50,
            t_final,
            audit_slack: 1e-8,
        }
    }

    /// tau^(-alpha), the half-width standing in for the truncated domain.
    pub fn domain_half_extent(&self) -> f64 {
        self.tau.powf(-self.alpha)
    }

    /// u_floor = 1e-12 m / L^3.
    pub fn with_floor_for(mut self, mass: f64, half_extent: f64) -> Self {
        self.u_floor = 1e-12 * mass / half_extent.powi(3);
        self
    }

    pub fn steps(&self) -> usize {
        (self.t_final / self.tau).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return bad(format!("tau must be positive, got {}", self.tau));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0 / 11.0 + 1e-15) {
            return bad(format!("alpha must lie in (0, 1/11], got {}", self.alpha));
        }
        if !(self.u_floor > 0.0) {
            return bad(format!("u_floor must be positive, got {}", self.u_floor));
        }
        if !(self.outer_tol > 0.0 && self.newton_tol > 0.0 && self.audit_slack >= 0.0) {
            return bad("tolerances must be positive".into());
        }
        if self.outer_max == 0 || self.newton_max == 0 {
            return bad("iteration caps must be positive".into());
        }
        if !(self.t_final >= 0.0) {
            return bad(format!("t_final must be nonnegative, got {}", self.t_final));
        }
        let n = self.t_final / self.tau;
        if (n - n.round()).abs() > 1e-9 * n.max(1.0) {
            return bad(format!("t_final / tau = {n} is not an integer"));
        }
        Ok(())
    }

    fn newton(&self) -> NewtonControls {
        NewtonControls { tol: self.newton_tol, max_iter: self.newton_max, ..Default::default() }
    }
}

/// Measured terms of the per-step entropy inequality
/// H[u^k] + tau^2 |w|^4_{W14} + tau D <= H[u^{k-1}].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyStepAudit {
    pub h_prev: f64,
    pub h_new: f64,
    pub w14: f64,
    pub dissipation: f64,
    /// rhs - lhs; negative beyond the tolerance means a violation.
    pub slack: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverStats {
    pub outer_iterations: usize,
    pub newton_iterations: usize,
    pub cg_iterations: usize,
    pub inner_residual: f64,
    pub full_residual: f64,
    pub outer_change: f64,
    pub clamps: usize,
    pub entropy: Option<EntropyStepAudit>,
}

/// (u^k, w^k, a^k) at t = k tau.
#[derive(Debug, Clone)]
pub struct StepState {
    pub k: usize,
    pub t: f64,
    pub u: ScalarField,
    pub w: ScalarField,
    pub a: ScalarField,
    pub stats: SolverStats,
}

impl StepState {
    /// Builds a state from a density, clamping at `u_floor` (counted).
    pub fn from_density(k: usize, t: f64, u: ScalarField, u_floor: f64, op: &CoulombOperator) -> Result<Self> {
        let clamps = u.values().iter().filter(|v| **v < u_floor).count();
        let u = u.map(|v| if v < u_floor { u_floor } else { v });
        let w = u.map(f64::ln);
        let a = op.potential(&u)?;
        Ok(Self { k, t, u, w, a, stats: SolverStats { clamps, ..Default::default() } })
    }
}

/// Nonlocal coefficients frozen at an iterate z: a = K*e^z and b = K*(e^z grad z).
#[derive(Debug, Clone)]
pub struct FrozenFields {
    pub a: ScalarField,
    pub b: VectorField,
}

impl FrozenFields {
    pub fn at(op: &CoulombOperator, w: &ScalarField) -> Result<Self> {
        let u = w.map(f64::exp);
        Self::at_density(op, &u, w)
    }

    pub fn at_density(op: &CoulombOperator, u: &ScalarField, w: &ScalarField) -> Result<Self> {
        let a = op.potential(u)?;
        let b = op.vector_potential(&gradient(w).scaled_by(u))?;
        Ok(Self { a, b })
    }
}

/// Strong-form residual of the step equation with frozen nonlocal fields.
pub fn residual(prev: &StepState, w: &ScalarField, frozen: &FrozenFields, params: &SchemeParams) -> ScalarField {
    let tau = params.tau;
    let u = w.map(f64::exp);
    let gw = gradient(w);
    let fl = ops::flux(&u, &gw, &frozen.a, &frozen.b);
    let drift = gradient_adjoint(&fl);
    let l4 = ops::p_laplacian4(w);
    let mut out = drift;
    for (i, o) in out.values_mut().iter_mut().enumerate() {
        let x = w.values()[i];
        *o += (u.values()[i] - prev.u.values()[i]) / tau + tau * (x * x * x + l4.values()[i]);
    }
    out
}

/// Fixed-point iteration on the frozen nonlocal fields and frozen e^z in
/// the flux, each inner problem solved by damped Newton. Solves
/// R(w) = source (zero when `source` is None).
fn outer_solve(
    prev: &StepState,
    params: &SchemeParams,
    op: &CoulombOperator,
    source: Option<&ScalarField>,
) -> Result<(ScalarField, FrozenFields, SolverStats)> {
    params.validate()?;
    prev.u.grid().check_same(op.grid())?;
    let tau = params.tau;
    let ctl = params.newton();
    let g = *prev.u.grid();
    let mut z = prev.w.clone();
    let mut frozen = FrozenFields::at_density(op, &prev.u, &prev.w)?;
    let mut stats = SolverStats::default();
    let mut full_history = Vec::new();
    for it in 0..params.outer_max {
        let uz = z.map(f64::exp);
        let coeff = frozen.a.zip_map(&uz, |a, u| a * u);
        let push = gradient_adjoint(&frozen.b.scaled_by(&uz));
        let rhs = ScalarField::from_vec(
            g,
            (0..g.len())
                .map(|i| prev.u.values()[i] / tau + push.values()[i] + source.map_or(0.0, |f| f.values()[i]))
                .collect(),
        )?;
        let problem = InnerProblem { tau, mass: 1.0 / tau, diffusion: &coeff, rhs: &rhs };
        let sol = solve_inner(&problem, &z, &ctl)?;
        stats.newton_iterations += sol.newton_iterations;
        stats.cg_iterations += sol.cg_iterations;
        stats.inner_residual = *sol.residual_history.last().unwrap_or(&f64::NAN);
        let w = sol.w;
        let change = w.zip_map(&z, |a, b| (a - b).abs()).max() / w.max_abs().max(1.0);
        frozen = FrozenFields::at(op, &w)?;
        let mut r = residual(prev, &w, &frozen, params);
        if let Some(f) = source {
            r = r.zip_map(f, |a, b| a - b);
        }
        let full = residual_norm(&r);
        full_history.push(full);
        stats.outer_iterations = it + 1;
        stats.outer_change = change;
        stats.full_residual = full;
        z = w;
        if change <= params.outer_tol && full <= 10.0 * params.newton_tol {
            return Ok((z, frozen, stats));
        }
    }
    Err(Error::NonConvergence { stage: "outer", iterations: params.outer_max, residual: stats.full_residual, history: full_history })
}

/// Solves R(w) = target for the step from `prev` (manufactured solutions).
pub fn solve_residual_equation(
    prev: &StepState,
    target: &ScalarField,
    params: &SchemeParams,
    op: &CoulombOperator,
) -> Result<(ScalarField, SolverStats)> {
    let (w, _, stats) = outer_solve(prev, params, op, Some(target))?;
    Ok((w, stats))
}

/// One implicit step followed by the floor clamp and the entropy audit.
pub fn implicit_step(prev: &StepState, params: &SchemeParams, op: &CoulombOperator) -> Result<StepState> {
    let tau = params.tau;
    let (z, mut frozen, mut stats) = outer_solve(prev, params, op, None)?;

    let mut u = z.map(f64::exp);
    let mut clamps = 0;
    for v in u.values_mut() {
        if *v < params.u_floor {
            *v = params.u_floor;
            clamps += 1;
        }
    }
    stats.clamps = clamps;
    // Canonical state: w is recomputed from the stored density so a state
    // rebuilt from a snapshot is bit-identical to this one.
    let w = if clamps > 0 { u.map(f64::ln) } else { z };
    if clamps > 0 {
        frozen = FrozenFields::at_density(op, &u, &w)?;
    }

    let (h_prev, _) = entropy(&prev.u);
    let (h_new, _) = entropy(&u);
    let w14 = ops::w14_energy(&w);
    let d = dissipation_from_fields(&u, &gradient(&w), &frozen.a, &frozen.b);
    let slack = h_prev + params.audit_slack * h_prev.abs() - (h_new + tau * tau * w14 + tau * d);
    stats.entropy = Some(EntropyStepAudit { h_prev, h_new, w14, dissipation: d, slack });
    if slack < 0.0 {
        return Err(Error::EntropyViolation { excess: -slack, slack: params.audit_slack * h_prev.abs() });
    }

    let w = u.map(f64::ln);
    Ok(StepState { k: prev.k + 1, t: (prev.k + 1) as f64 * tau, u, w, a: frozen.a, stats })
}
