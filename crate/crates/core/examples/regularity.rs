//! Poincare monitors and the Moser level sequence on a short run.

use landau::coulomb::{Backend, CoulombOperator};
use landau::field::Grid3;
use landau::initial::gaussian;
use landau::regularity::{eps_poincare_test, moser_sequence, small_p_ratio, weighted_grad_a_norm, MoserParams, PoincareParams};
use landau::scheme::{implicit_step, SchemeParams, StepState};

fn main() -> landau::error::Result<()> {
    let tau = 1.0 / 32.0;
    let t_final = 0.25;
    let p0 = SchemeParams::new(tau, t_final);
    let l = p0.domain_half_extent();
    let g = Grid3::with_half_extent(13, l)?;
    let op = CoulombOperator::new(g, Backend::Spectral);
    let u0 = gaussian(g, 20.0, 1.2, [0.0; 3]);
    let p = p0.with_floor_for(u0.integral(), l);
    let mut traj = vec![StepState::from_density(0, 0.0, u0, p.u_floor, &op)?];
    for _ in 0..p.steps() {
        let next = implicit_step(traj.last().unwrap(), &p, &op)?;
        traj.push(next);
    }
    let last = traj.last().unwrap();

    let pp = PoincareParams::new((l / 4.0).max(2.0 * g.h()));
    let sp = small_p_ratio(&last.u, &last.a, &pp)?;
    let ep = eps_poincare_test(&last.u, &last.a, &pp)?;
    println!("cubes {} max ratio {:.4} max mass/moment ratio {:.4}", sp.cubes.len(), sp.max_ratio, sp.max_mass_moment_ratio);
    println!("eps = {}: max minimal C over {} test functions {:.4}", pp.epsilon, ep.samples.len(), ep.max_minimal_c);
    println!("|grad a / gamma|_L4 = {:.4}", weighted_grad_a_norm(&last.u, &op, 4.0)?);

    let m = moser_sequence(&traj, tau, &MoserParams::new(l, t_final))?;
    for (n, (e, b)) in m.e.iter().zip(&m.exponents).enumerate() {
        println!("E_{n} = {e:.5}  (beta {b:.4})");
    }
    println!("C_R {:.4}, predicted sup {:.4}, measured sup {:.4}, tau remainder {:.4}", m.c_r, m.predicted, m.measured_sup, m.tau_remainder);
    Ok(())
}
