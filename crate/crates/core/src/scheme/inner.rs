//! Damped Newton for the frozen-coefficient monotone problem
//!
//!   A(w) = mass e^w + tau (w^3 - div(|grad w|^2 grad w)) - div(c grad w) = f
//!
//! with c >= 0 frozen. A is the gradient of a convex functional, so the
//! Newton matrix is symmetric positive semidefinite and is inverted with
//! Jacobi-preconditioned conjugate gradients.

use crate::error::{Error, Result};
use crate::field::{dot, gradient, gradient_adjoint, weighted_laplacian_diagonal, ScalarField};

use super::ops::{p_laplacian4, p_laplacian4_diagonal, p_laplacian4_hessian};

/// One instance of the monotone inner problem.
#[derive(Debug, Clone, Copy)]
pub struct InnerProblem<'a> {
    pub tau: f64,
    /// Coefficient of e^w; 1/tau inside a time step, 0 for the bare operator.
    pub mass: f64,
    /// Frozen diffusion coefficient a[e^z] e^z.
    pub diffusion: &'a ScalarField,
    pub rhs: &'a ScalarField,
}

/// Newton controls.
#[derive(Debug, Clone, Copy)]
pub struct NewtonControls {
    pub tol: f64,
    pub max_iter: usize,
    pub cg_rel_tol: f64,
    pub cg_max_iter: usize,
}

impl Default for NewtonControls {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 50, cg_rel_tol: 1e-10, cg_max_iter: 4000 }
    }
}

#[derive(Debug, Clone)]
pub struct InnerSolution {
    pub w: ScalarField,
    /// Residual norm at the start and after every accepted step.
    pub residual_history: Vec<f64>,
    pub newton_iterations: usize,
    pub cg_iterations: usize,
}

impl InnerProblem<'_> {
    /// A(w).
    pub fn apply(&self, w: &ScalarField) -> ScalarField {
        let l4 = p_laplacian4(w);
        let diff = gradient_adjoint(&gradient(w).scaled_by(self.diffusion));
        let mut out = l4;
        for (i, o) in out.values_mut().iter_mut().enumerate() {
            let x = w.values()[i];
            *o = self.mass * x.exp() + self.tau * (x * x * x + *o) + diff.values()[i];
        }
        out
    }

    pub fn residual(&self, w: &ScalarField) -> ScalarField {
        self.apply(w).zip_map(self.rhs, |a, f| a - f)
    }
}

/// sqrt(sum r^2 h^3).
pub fn residual_norm(r: &ScalarField) -> f64 {
    dot(r.values(), r.values(), r.grid().cell_volume()).sqrt()
}

/// Solves A(w) = f starting from `start`. The residual norm decreases
/// strictly from one accepted iterate to the next (Armijo backtracking).
pub fn solve_inner(problem: &InnerProblem, start: &ScalarField, ctl: &NewtonControls) -> Result<InnerSolution> {
    let mut w = start.clone();
    let mut r = problem.residual(&w);
    let mut norm = residual_norm(&r);
    let mut history = vec![norm];
    let mut cg_total = 0;
    if !norm.is_finite() {
        return Err(Error::NonConvergence { stage: "inner", iterations: 0, residual: norm, history });
    }
    for it in 0..ctl.max_iter {
        if norm <= ctl.tol {
            return Ok(InnerSolution { w, residual_history: history, newton_iterations: it, cg_iterations: cg_total });
        }
        let rhs = r.map(|v| -v);
        let (step, cg_its) = newton_direction(problem, &w, &rhs, ctl);
        cg_total += cg_its;
        let mut alpha = 1.0;
        let mut accepted = None;
        while alpha > 1e-12 {
            let trial = w.zip_map(&step, |a, d| a + alpha * d);
            let rt = problem.residual(&trial);
            let nt = residual_norm(&rt);
            if nt.is_finite() && nt <= (1.0 - 1e-4 * alpha) * norm {
                accepted = Some((trial, rt, nt));
                break;
            }
            alpha *= 0.5;
        }
        match accepted {
            Some((trial, rt, nt)) => {
                w = trial;
                r = rt;
                norm = nt;
                history.push(norm);
            }
            None => {
                return Err(Error::NonConvergence { stage: "inner", iterations: it + 1, residual: norm, history });
            }
        }
    }
    if norm <= ctl.tol {
        return Ok(InnerSolution {
            w,
            residual_history: history,
            newton_iterations: ctl.max_iter,
            cg_iterations: cg_total,
        });
    }
    Err(Error::NonConvergence { stage: "inner", iterations: ctl.max_iter, residual: norm, history })
}

fn newton_direction(p: &InnerProblem, w: &ScalarField, rhs: &ScalarField, ctl: &NewtonControls) -> (ScalarField, usize) {
    let g = *w.grid();
    let h3 = g.cell_volume();
    let gw = gradient(w);
    let local: Vec<f64> = w.values().iter().map(|&x| p.mass * x.exp() + 3.0 * p.tau * x * x).collect();
    let jv = |v: &ScalarField| -> ScalarField {
        let hv = p_laplacian4_hessian(w, &gw, v);
        let dv = gradient_adjoint(&gradient(v).scaled_by(p.diffusion));
        let mut out = hv;
        for (i, o) in out.values_mut().iter_mut().enumerate() {
            *o = local[i] * v.values()[i] + p.tau * *o + dv.values()[i];
        }
        out
    };
    let d4 = p_laplacian4_diagonal(w);
    let dl = weighted_laplacian_diagonal(p.diffusion);
    let diag: Vec<f64> = (0..g.len())
        .map(|i| {
            let d = local[i] + p.tau * d4[i] + dl[i];
            if d > 0.0 {
                d
            } else {
                1.0
            }
        })
        .collect();

    let mut x = ScalarField::zeros(g);
    let mut r = rhs.clone();
    let b_norm = dot(r.values(), r.values(), h3).sqrt();
    if b_norm == 0.0 {
        return (x, 0);
    }
    let mut z = r.clone();
    z.values_mut().iter_mut().zip(&diag).for_each(|(v, d)| *v /= d);
    let mut pdir = z.clone();
    let mut rz = dot(r.values(), z.values(), h3);
    let mut its = 0;
    while its < ctl.cg_max_iter {
        its += 1;
        let ap = jv(&pdir);
        let pap = dot(pdir.values(), ap.values(), h3);
        if pap <= 0.0 || !pap.is_finite() {
            break;
        }
        let alpha = rz / pap;
        for i in 0..g.len() {
            x.values_mut()[i] += alpha * pdir.values()[i];
            r.values_mut()[i] -= alpha * ap.values()[i];
        }
        let rn = dot(r.values(), r.values(), h3).sqrt();
        if rn <= ctl.cg_rel_tol * b_norm {
            break;
        }
        for i in 0..g.len() {
            z.values_mut()[i] = r.values()[i] / diag[i];
        }
        let rz_new = dot(r.values(), z.values(), h3);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..g.len() {
            let v = z.values()[i] + beta * pdir.values()[i];
            pdir.values_mut()[i] = v;
        }
    }
    (x, its)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Grid3;

    #[test]
    fn zero_rhs_gives_zero() {
        let g = Grid3::with_half_extent(7, 1.0).unwrap();
        let c = ScalarField::constant(g, 0.7);
        let f = ScalarField::zeros(g);
        let p = InnerProblem { tau: 0.1, mass: 0.0, diffusion: &c, rhs: &f };
        assert_eq!(p.apply(&ScalarField::zeros(g)).max_abs(), 0.0);
        let s = solve_inner(&p, &ScalarField::zeros(g), &NewtonControls::default()).unwrap();
        assert_eq!(s.w.max_abs(), 0.0);
    }

    #[test]
    fn recovers_forward_image() {
        let g = Grid3::with_half_extent(9, 1.2).unwrap();
        let c = ScalarField::from_fn(g, |x| 0.5 + 0.2 * x[0] * x[0]);
        let wstar = ScalarField::from_fn(g, |x| 1.0 + 0.4 * (x[0] - 0.5 * x[1]).sin() * (0.7 * x[2]).cos());
        let p0 = InnerProblem { tau: 0.05, mass: 0.0, diffusion: &c, rhs: &c };
        let f = p0.apply(&wstar);
        let p = InnerProblem { rhs: &f, ..p0 };
        let ctl = NewtonControls { tol: 1e-11, ..Default::default() };
        let s = solve_inner(&p, &ScalarField::constant(g, 0.5), &ctl).unwrap();
        let err = s.w.zip_map(&wstar, |a, b| a - b).max_abs();
        assert!(err < 1e-8, "{err}");
        assert!(s.residual_history.windows(2).all(|w| w[1] < w[0]));
    }
}
