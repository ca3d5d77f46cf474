//! Monitored quantities and the per-step inequality audits.
//!
//! Conventions: a = K*u with the 1/(4 pi) Newtonian kernel, gamma = 1/(1+|x|),
//! H = sum u(log u - 1) h^3, H_plain = sum u log u h^3. Gradients of log u are
//! taken with the nodal stencil, so every audit compares numbers built from
//! the same discrete objects the scheme uses.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::coulomb::CoulombOperator;
use crate::error::{Error, Result};
use crate::field::{dot, gamma, gradient, Grid3, ScalarField, VectorField};
use crate::scheme::{ops, StepState};

/// Largest n accepted by the O(N^2) dissipation sum.
pub const DOUBLE_SUM_MAX_N: usize = 21;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DissipationMethod {
    DoubleSum,
    Convolution,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mass: f64,
    pub second_moment: f64,
    /// min(sqrt(2E/m), L).
    pub radius: f64,
}

/// Mass, second moment and the half-mass radius capped at the half-width.
pub fn moments(u: &ScalarField) -> Result<Moments> {
    let g = u.grid();
    let h3 = g.cell_volume();
    let mut m = 0.0;
    let mut e = 0.0;
    for (idx, v) in u.values().iter().enumerate() {
        let x = g.position(idx);
        m += v;
        e += v * (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]);
    }
    let (m, e) = (m * h3, e * h3);
    if m == 0.0 {
        return Err(Error::ZeroMass);
    }
    Ok(Moments { mass: m, second_moment: e, radius: (2.0 * e / m).sqrt().min(g.half_extent()) })
}

/// (H, H_plain) with 0 log 0 = 0.
pub fn entropy(u: &ScalarField) -> (f64, f64) {
    let h3 = u.grid().cell_volume();
    let mut h = 0.0;
    let mut hp = 0.0;
    for &v in u.values() {
        if v > 0.0 {
            let l = v.ln();
            h += v * (l - 1.0);
            hp += v * l;
        }
    }
    (h * h3, hp * h3)
}

/// sum u (|g|^2 a - g . b) h^3 with a = K*u and b = K*(u g).
pub fn dissipation_from_fields(u: &ScalarField, gw: &VectorField, a: &ScalarField, b: &VectorField) -> f64 {
    let h3 = u.grid().cell_volume();
    let mut s = 0.0;
    for idx in 0..u.grid().len() {
        let g = gw.at(idx);
        let bb = b.at(idx);
        let g2 = g[0] * g[0] + g[1] * g[1] + g[2] * g[2];
        let gb = g[0] * bb[0] + g[1] * bb[1] + g[2] * bb[2];
        s += u.values()[idx] * (g2 * a.values()[idx] - gb);
    }
    s * h3
}

/// D = (1/2) sum sum K(x-y) u(x) u(y) |grad w(x) - grad w(y)|^2 h^6, w = log u.
pub fn dissipation(u: &ScalarField, op: &CoulombOperator, method: DissipationMethod) -> Result<f64> {
    let g = *u.grid();
    g.check_same(op.grid())?;
    let w = u.map(f64::ln);
    let gw = gradient(&w);
    match method {
        DissipationMethod::Convolution => {
            let a = op.potential(u)?;
            let b = op.vector_potential(&gw.scaled_by(u))?;
            Ok(dissipation_from_fields(u, &gw, &a, &b))
        }
        DissipationMethod::DoubleSum => {
            if g.n() > DOUBLE_SUM_MAX_N {
                return Err(Error::GridTooLarge { n: g.n(), cap: DOUBLE_SUM_MAX_N });
            }
            Ok(double_sum(&g, u, &gw, op))
        }
    }
}

fn double_sum(g: &Grid3, u: &ScalarField, gw: &VectorField, op: &CoulombOperator) -> f64 {
    use rayon::prelude::*;
    let h3 = g.cell_volume();
    let rows: Vec<f64> = (0..g.len())
        .into_par_iter()
        .map(|i| {
            let [ix, iy, iz] = g.ijk(i);
            let gi = gw.at(i);
            let mut s = 0.0;
            for j in 0..g.len() {
                if j == i {
                    continue;
                }
                let [jx, jy, jz] = g.ijk(j);
                let k = op.kernel(ix as isize - jx as isize, iy as isize - jy as isize, iz as isize - jz as isize);
                let gj = gw.at(j);
                let d = (gi[0] - gj[0]).powi(2) + (gi[1] - gj[1]).powi(2) + (gi[2] - gj[2]).powi(2);
                s += k * u.values()[j] * d;
            }
            u.values()[i] * s
        })
        .collect();
    0.5 * rows.iter().sum::<f64>() * h3 * h3
}

/// sum |grad sqrt u|^2 gamma h^3 with grad sqrt u = (1/2) sqrt(u) grad log u.
pub fn fisher_weighted(u: &ScalarField) -> f64 {
    let g = u.grid();
    let gw = gradient(&u.map(f64::ln));
    let n2 = gw.norm_sq();
    let mut s = 0.0;
    for idx in 0..g.len() {
        s += 0.25 * u.values()[idx] * n2.values()[idx] * gamma(g.position(idx));
    }
    s * g.cell_volume()
}

/// sum gamma u grad log u h^3 (the odd moment of grad u).
pub fn odd_integral(u: &ScalarField) -> [f64; 3] {
    let g = u.grid();
    let gw = gradient(&u.map(f64::ln));
    let mut s = [0.0; 3];
    for idx in 0..g.len() {
        let wgt = gamma(g.position(idx)) * u.values()[idx];
        let v = gw.at(idx);
        for c in 0..3 {
            s[c] += wgt * v[c];
        }
    }
    s.map(|v| v * g.cell_volume())
}

/// Explicit constant of the entropy lower bound
/// -H_plain <= C_eps (1+E)^{(1-eps)/2}:
/// C_eps = (2/(e eps)) m^{1/2} W^{eps/2} max(1, m)^{(1-eps)/2},
/// W = sum (1+|x|^2)^{-(1-eps)/eps} h^3 over the grid.
pub fn entropy_lower_constant(grid: &Grid3, mass: f64, eps: f64) -> f64 {
    let beta = (1.0 - eps) / eps;
    let mut w = 0.0;
    for idx in 0..grid.len() {
        let x = grid.position(idx);
        w += (1.0 + x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).powf(-beta);
    }
    w *= grid.cell_volume();
    2.0 / (std::f64::consts::E * eps) * mass.sqrt() * w.powf(eps / 2.0) * mass.max(1.0).powf((1.0 - eps) / 2.0)
}

/// pi^{3/2} Gamma(beta - 3/2) / Gamma(beta), the integral of (1+|x|^2)^{-beta} over R^3.
pub fn decay_weight_integral(beta: f64) -> f64 {
    PI.powf(1.5) * libm::tgamma(beta - 1.5) / libm::tgamma(beta)
}

/// Outcome of one audit at one step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuditOutcome {
    pub slack: f64,
    pub pass: bool,
}

impl AuditOutcome {
    fn check(slack: f64, tol: f64) -> Self {
        Self { slack, pass: slack >= -tol }
    }
}

/// Names of the audits, in CSV column order.
pub const AUDIT_NAMES: [&str; 9] = [
    "entropy_scheme",
    "entropy_kernel",
    "entropy_chain",
    "odd_integral",
    "second_moment_step",
    "entropy_lower",
    "a_lower",
    "holder_l53",
    "second_moment_step_literal",
];

/// Audits that count toward pass/fail; the last one is informational.
pub const GATED_AUDITS: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub k: usize,
    pub t: f64,
    pub mass: f64,
    pub second_moment: f64,
    pub radius: f64,
    pub entropy: f64,
    pub entropy_plain: f64,
    pub dissipation: f64,
    pub fisher_weighted: f64,
    pub min_u: f64,
    pub max_u: f64,
    pub parity_defect: f64,
    pub a_min_margin: f64,
    pub odd_integral_norm: f64,
    pub a_l3_local: f64,
    pub grad_a_l32_local: f64,
    pub w14: f64,
    /// -tau^2 sum w^3 h^3, the only mass source of the step.
    pub mass_source: f64,
    /// m^k - m^{k-1}.
    pub mass_change: f64,
    pub entropy_lower_constant: f64,
    /// sum over steps of tau (sum gamma^3 u^3 h^3)^{1/3}.
    pub l1l3_running: f64,
    /// sum over steps of tau sum u^{5/3} h^3; the norm is its 3/5 power.
    pub l53_power_running: f64,
    /// One entry per AUDIT_NAMES; None at k = 0 where no step exists.
    pub audits: Vec<Option<AuditOutcome>>,
}

impl DiagnosticsRecord {
    pub fn l53_norm(&self) -> f64 {
        self.l53_power_running.powf(0.6)
    }

    pub fn audit(&self, name: &str) -> Option<AuditOutcome> {
        AUDIT_NAMES.iter().position(|n| *n == name).and_then(|i| self.audits[i])
    }
}

/// Fixed run constants used by the audits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuditContext {
    pub tau: f64,
    /// eps of the entropy lower bound.
    pub eps: f64,
    /// Relative slack of the entropy audits (times |H_prev|).
    pub entropy_slack: f64,
}

impl Default for AuditContext {
    fn default() -> Self {
        Self { tau: 1.0, eps: 0.2, entropy_slack: 1e-8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct Previous {
    mass: f64,
    second_moment: f64,
    entropy: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AuditTally {
    pub passes: usize,
    pub failures: usize,
    pub worst_slack: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditFailure {
    pub step: usize,
    pub audit: String,
    pub slack: f64,
}

/// Running state of the audits across a run. Serializable so a resumed
/// run continues the running integrals and tallies exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tracker {
    pub ctx: AuditContext,
    prev: Option<Previous>,
    l1l3: f64,
    l53_pow: f64,
    pub entropy_lower_constant_initial: Option<f64>,
    pub entropy_lower_constant_max: f64,
    pub tallies: BTreeMap<String, AuditTally>,
    pub failures: Vec<AuditFailure>,
}

impl Tracker {
    pub fn new(ctx: AuditContext) -> Self {
        Self {
            ctx,
            prev: None,
            l1l3: 0.0,
            l53_pow: 0.0,
            entropy_lower_constant_initial: None,
            entropy_lower_constant_max: 0.0,
            tallies: BTreeMap::new(),
            failures: Vec::new(),
        }
    }

    /// Computes the record of `cur` and folds it into the running state.
    pub fn observe(&mut self, cur: &StepState, op: &CoulombOperator) -> Result<DiagnosticsRecord> {
        let rec = audit_step(self.prev.as_ref().map(|p| (p.mass, p.second_moment, p.entropy)), cur, op, &self.ctx, (self.l1l3, self.l53_pow))?;
        self.l1l3 = rec.l1l3_running;
        self.l53_pow = rec.l53_power_running;
        self.entropy_lower_constant_initial.get_or_insert(rec.entropy_lower_constant);
        self.entropy_lower_constant_max = self.entropy_lower_constant_max.max(rec.entropy_lower_constant);
        for (name, out) in AUDIT_NAMES.iter().zip(&rec.audits) {
            if let Some(o) = out {
                let t = self.tallies.entry((*name).to_string()).or_default();
                if o.pass {
                    t.passes += 1;
                } else {
                    t.failures += 1;
                    self.failures.push(AuditFailure { step: rec.k, audit: (*name).to_string(), slack: o.slack });
                }
                t.worst_slack = Some(t.worst_slack.map_or(o.slack, |w| w.min(o.slack)));
            }
        }
        self.prev = Some(Previous { mass: rec.mass, second_moment: rec.second_moment, entropy: rec.entropy });
        Ok(rec)
    }

    /// True when every gated audit has passed so far.
    pub fn all_passed(&self) -> bool {
        AUDIT_NAMES[..GATED_AUDITS].iter().all(|n| self.tallies.get(*n).is_none_or(|t| t.failures == 0))
    }
}

/// Builds the record of `cur`. `prev` is (m, E, H) of the previous step and
/// `running` the (L1L3, L^{5/3} power) integrals up to it.
pub fn audit_step(
    prev: Option<(f64, f64, f64)>,
    cur: &StepState,
    op: &CoulombOperator,
    ctx: &AuditContext,
    running: (f64, f64),
) -> Result<DiagnosticsRecord> {
    let u = &cur.u;
    let g = *u.grid();
    let h3 = g.cell_volume();
    let tau = ctx.tau;
    let mo = moments(u)?;
    let (m, e) = (mo.mass, mo.second_moment);
    let (h, hp) = entropy(u);
    let gw = gradient(&cur.w);
    let b = op.vector_potential(&gw.scaled_by(u))?;
    let d = dissipation_from_fields(u, &gw, &cur.a, &b);
    let fisher = fisher_weighted(u);
    let odd = odd_integral(u);
    let odd_norm = (odd[0] * odd[0] + odd[1] * odd[1] + odd[2] * odd[2]).sqrt();
    let w14 = ops::w14_energy(&cur.w);
    let wv = cur.w.values();
    let cubes: f64 = wv.iter().map(|x| x * x * x).sum::<f64>() * h3;

    // half-mass radius for the lower-bound chain; the cap is the
    // circumscribed radius so that a capped R encloses every node
    let r_chain = (2.0 * e / m).sqrt().min(3f64.sqrt() * g.half_extent());
    let mut mass_in = 0.0;
    let mut gamma_u = 0.0;
    let mut gamma_u_g2 = 0.0;
    let mut gamma3_u3 = 0.0;
    let mut u53 = 0.0;
    let mut holder_lhs = 0.0;
    let mut holder_a = 0.0;
    let n2 = gw.norm_sq();
    for idx in 0..g.len() {
        let x = g.position(idx);
        let r = g.radius(idx);
        let uv = u.values()[idx];
        let gm = gamma(x);
        if r <= r_chain {
            mass_in += uv;
        }
        gamma_u += gm * uv;
        gamma_u_g2 += gm * uv * n2.values()[idx];
        gamma3_u3 += (gm * uv).powi(3);
        u53 += uv.powf(5.0 / 3.0);
        holder_lhs += gm.powf(-1.0 / 3.0) * uv.powf(5.0 / 3.0);
        holder_a += uv / (gm * gm);
    }
    mass_in *= h3;
    gamma_u *= h3;
    gamma_u_g2 *= h3;
    gamma3_u3 *= h3;
    u53 *= h3;
    holder_lhs *= h3;
    holder_a *= h3;

    let four_pi = 4.0 * PI;
    let mut a_margin = f64::INFINITY;
    for idx in 0..g.len() {
        let v = four_pi * cur.a.values()[idx] * (r_chain + g.radius(idx)) - 0.5 * m;
        a_margin = a_margin.min(v);
    }

    // local norms on the ball of radius L/2
    let r_loc = 0.5 * g.half_extent();
    let grad_a = op.grad_potential(u)?;
    let ga2 = grad_a.norm_sq();
    let mut a_l3 = 0.0;
    let mut ga_l32 = 0.0;
    for idx in 0..g.len() {
        if g.radius(idx) < r_loc {
            a_l3 += cur.a.values()[idx].abs().powi(3);
            ga_l32 += ga2.values()[idx].powf(0.75);
        }
    }
    let a_l3 = (a_l3 * h3).cbrt();
    let ga_l32 = (ga_l32 * h3).powf(2.0 / 3.0);

    let c_eps = entropy_lower_constant(&g, m, ctx.eps);
    let (l1l3, l53_pow) = if prev.is_some() {
        (running.0 + tau * gamma3_u3.cbrt(), running.1 + tau * u53)
    } else {
        running
    };

    let mut audits = vec![None; AUDIT_NAMES.len()];
    // entropy lower bound and Holder hold at every time level
    audits[5] = Some(AuditOutcome::check(c_eps * (1.0 + e).powf((1.0 - ctx.eps) / 2.0) + hp, 0.0));
    audits[6] = Some(AuditOutcome::check(a_margin, 1e-12 * m));
    let holder_rhs = holder_a.powf(2.0 / 3.0) * gamma3_u3.cbrt();
    audits[7] = Some(AuditOutcome::check(holder_rhs - holder_lhs, 1e-12 * holder_rhs));
    let mut mass_change = 0.0;
    if let Some((m_prev, e_prev, h_prev)) = prev {
        mass_change = m - m_prev;
        let dth = (h - h_prev) / tau;
        let tol = ctx.entropy_slack * h_prev.abs() / tau;
        audits[0] = Some(AuditOutcome::check(-(dth + tau * w14 + d), tol));
        let odd2 = odd_norm * odd_norm;
        let kernel_bound = (gamma_u * gamma_u_g2 - odd2) / four_pi;
        audits[1] = Some(AuditOutcome::check(d - kernel_bound, 1e-10 * d.abs().max(kernel_bound.abs())));
        let c_low = m / (2.0 * 2f64.sqrt() * (2.0 / m).sqrt().max(1.0));
        let chain_stage = gamma_u - 0.5 * m / (1.0 + r_chain);
        let chain = -(dth + tau * w14) - c_low / PI * fisher / (1.0 + e).sqrt() + odd2 / four_pi;
        let chain_ok = chain_stage >= -1e-12 * m && mass_in >= 0.5 * m * (1.0 - 1e-12);
        audits[2] = Some(AuditOutcome { slack: chain, pass: chain_ok && chain >= -tol });
        audits[3] = Some(AuditOutcome::check(1e-10 * m / g.half_extent() - odd_norm, 0.0));
        let dte = (e - e_prev) / tau;
        let x2 = ScalarField::from_fn(g, |x| x[0] * x[0] + x[1] * x[1] + x[2] * x[2]);
        let reg = -tau * wv.iter().zip(x2.values()).map(|(w, r)| w * w * w * r).sum::<f64>() * h3
            - tau * dot(ops::p_laplacian4(&cur.w).values(), x2.values(), h3);
        let au = dot(cur.a.values(), u.values(), h3);
        let rhs = reg + 4.0 * au;
        audits[4] = Some(AuditOutcome::check(rhs - dte, 1e-10 * rhs.abs().max(dte.abs())));
        audits[8] = Some(AuditOutcome::check(reg + 2.0 * au - dte, 0.0));
    }

    Ok(DiagnosticsRecord {
        k: cur.k,
        t: cur.t,
        mass: m,
        second_moment: e,
        radius: mo.radius,
        entropy: h,
        entropy_plain: hp,
        dissipation: d,
        fisher_weighted: fisher,
        min_u: u.min(),
        max_u: u.max(),
        parity_defect: crate::field::parity_defect(u),
        a_min_margin: a_margin,
        odd_integral_norm: odd_norm,
        a_l3_local: a_l3,
        grad_a_l32_local: ga_l32,
        w14,
        mass_source: -tau * tau * cubes,
        mass_change,
        entropy_lower_constant: c_eps,
        l1l3_running: l1l3,
        l53_power_running: l53_pow,
        audits,
    })
}
