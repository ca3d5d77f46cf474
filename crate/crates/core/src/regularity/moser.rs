//! A-posteriori L-infinity monitor from the Moser iteration.
//!
//! E_n = ( int_{T_n}^T int a eta_n^q u^{beta_n} )^{1/beta_n}, beta_n = p (q/2)^n,
//! T_n = (T/4)(2 - 2^-n), eta_n = 1 on B_{R_{n+1}}, 0 outside B_{R_n},
//! R_n = (R/2)(1 + 2^-n). The time integral treats u^k as constant on
//! ((k-1) tau, k tau].

use serde::{Deserialize, Serialize};

use super::cutoff::Cutoff;
use crate::error::{Error, Result};
use crate::scheme::StepState;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MoserParams {
    pub p: f64,
    pub q: f64,
    pub radius: f64,
    pub horizon: f64,
    pub n_max: usize,
    /// Multiplies every cutoff; 1 in normal use.
    pub eta_scale: f64,
}

impl MoserParams {
    pub fn new(radius: f64, horizon: f64) -> Self {
        Self { p: 10.0 / 9.0, q: 3.0, radius, horizon, n_max: 6, eta_scale: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.p > 1.0 && self.p <= 10.0 / 9.0 + 1e-15) {
            return bad(format!("p must lie in (1, 10/9], got {}", self.p));
        }
        if !(self.q > 2.0 && self.q < 10.0 / 3.0) {
            return bad(format!("q must lie in (2, 10/3), got {}", self.q));
        }
        if !(self.radius > 0.0 && self.horizon > 0.0 && self.eta_scale > 0.0) {
            return bad("radius, horizon and eta_scale must be positive".into());
        }
        Ok(())
    }

    /// Hoelder exponent q' fixed by p q' = 5/3.
    pub fn holder_conjugate(&self) -> f64 {
        5.0 / (3.0 * self.p)
    }

    pub fn exponent(&self, n: usize) -> f64 {
        self.p * (self.q / 2.0).powi(n as i32)
    }

    pub fn time(&self, n: usize) -> f64 {
        self.horizon / 4.0 * (2.0 - 0.5f64.powi(n as i32))
    }

    pub fn ball(&self, n: usize) -> f64 {
        self.radius / 2.0 * (1.0 + 0.5f64.powi(n as i32))
    }

    pub fn cutoff(&self, n: usize) -> Cutoff {
        Cutoff::new(self.ball(n + 1), self.ball(n))
    }

    /// Exponent of (1/T + 1) in the envelope: sum_{n>=0} (1/p)(2/q)^n.
    pub fn envelope_exponent(&self) -> f64 {
        1.0 / (self.p * (1.0 - 2.0 / self.q))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoserReport {
    pub e: Vec<f64>,
    pub exponents: Vec<f64>,
    /// Smallest C with E_{n+1} <= (2^n C (1/T+1))^{1/beta_n} E_n for each n.
    pub step_constants: Vec<f64>,
    pub c_r: f64,
    pub envelope_exponent: f64,
    /// prod_{n>=0} (2^n C_R (1/T+1))^{1/beta_n} E_0.
    pub predicted: f64,
    /// sum_{i=1}^{n_max} tau^{1/beta_i}, unit constant.
    pub tau_remainder: f64,
    pub measured_sup: f64,
    pub margin: f64,
    /// sum_k tau ||a||_{L^r(B_R)} ||u||^{p}_{L^{5/3}(B_R)}, r the conjugate of q'.
    pub e0_holder_bound: f64,
    pub cutoff_gradient_constant: f64,
    pub cutoff_weighted_gradient_constant: f64,
    pub cutoff_laplacian_constant: f64,
}

/// Length of ((k-1) tau, k tau] inside (start, end].
fn overlap(k: usize, tau: f64, start: f64, end: f64) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let lo = ((k - 1) as f64 * tau).max(start);
    let hi = (k as f64 * tau).min(end);
    (hi - lo).max(0.0)
}

/// Runs the monitor on consecutive states k = 0..N with step `tau`.
pub fn moser_sequence(traj: &[StepState], tau: f64, params: &MoserParams) -> Result<MoserReport> {
    params.validate()?;
    let first = traj.first().ok_or_else(|| Error::InvalidParameter("empty trajectory".into()))?;
    let g = *first.u.grid();
    let h3 = g.cell_volume();
    let t_end = params.horizon;
    let mut e = Vec::new();
    let mut exps = Vec::new();
    for n in 0..=params.n_max {
        let beta = params.exponent(n);
        let eta = params.cutoff(n);
        let weights: Vec<f64> = (0..g.len()).map(|i| (params.eta_scale * eta.value(g.radius(i))).powf(params.q)).collect();
        let t_n = params.time(n);
        let mut total = 0.0;
        for s in traj {
            let dt = overlap(s.k, tau, t_n, t_end);
            if dt == 0.0 {
                continue;
            }
            let mut space = 0.0;
            for (i, wgt) in weights.iter().enumerate() {
                if *wgt > 0.0 {
                    space += s.a.values()[i] * wgt * s.u.values()[i].powf(beta);
                }
            }
            total += dt * space * h3;
        }
        let en = total.powf(1.0 / beta);
        if !en.is_finite() || !total.is_finite() {
            return Err(Error::ExponentOverflow { failed_n: n, largest_valid_n: n.checked_sub(1) });
        }
        e.push(en);
        exps.push(beta);
    }

    let growth = 1.0 / t_end + 1.0;
    let step_constants: Vec<f64> = (0..params.n_max)
        .map(|n| (e[n + 1] / e[n]).powf(exps[n]) / (2f64.powi(n as i32) * growth))
        .collect();
    let c_r = step_constants.iter().cloned().fold(f64::MIN_POSITIVE, f64::max);
    // log of prod_{n>=0} (2^n C_R growth)^{1/beta_n}; the tail beyond the
    // computed range is summed in closed form.
    let r = 2.0 / params.q;
    let sum_s = 1.0 / (params.p * (1.0 - r));
    let sum_ns = r / (params.p * (1.0 - r) * (1.0 - r));
    let log_env = sum_ns * 2f64.ln() + sum_s * (c_r * growth).ln();
    let predicted = e[0] * log_env.exp();
    let tau_remainder = (1..=params.n_max).map(|i| tau.powf(1.0 / params.exponent(i))).sum();

    let mut sup = 0.0f64;
    for s in traj {
        if overlap(s.k, tau, t_end / 2.0, t_end) == 0.0 {
            continue;
        }
        for i in 0..g.len() {
            if g.radius(i) < params.radius / 2.0 {
                sup = sup.max(s.u.values()[i]);
            }
        }
    }

    let qp = params.holder_conjugate();
    let ra = qp / (qp - 1.0);
    let mut holder = 0.0;
    for s in traj {
        let dt = overlap(s.k, tau, 0.0, t_end);
        if dt == 0.0 {
            continue;
        }
        let (mut an, mut un) = (0.0, 0.0);
        for i in 0..g.len() {
            if g.radius(i) < params.radius {
                an += s.a.values()[i].abs().powf(ra);
                un += s.u.values()[i].powf(5.0 / 3.0);
            }
        }
        holder += dt * (an * h3).powf(1.0 / ra) * (un * h3).powf(1.0 / qp);
    }

    let c0 = params.cutoff(0);
    Ok(MoserReport {
        e,
        exponents: exps,
        step_constants,
        c_r,
        envelope_exponent: params.envelope_exponent(),
        predicted,
        tau_remainder,
        measured_sup: sup,
        margin: predicted - sup,
        e0_holder_bound: holder,
        cutoff_gradient_constant: c0.gradient_constant(),
        cutoff_weighted_gradient_constant: c0.weighted_gradient_constant(),
        cutoff_laplacian_constant: c0.laplacian_constant(),
    })
}
