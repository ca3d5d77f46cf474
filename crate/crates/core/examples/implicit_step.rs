//! A single implicit step from an even Gaussian with solver statistics.

use landau::coulomb::{Backend, CoulombOperator};
use landau::field::{parity_defect, Grid3};
use landau::initial::gaussian;
use landau::scheme::{implicit_step, SchemeParams, StepState};

fn main() -> landau::error::Result<()> {
    let tau = 1.0 / 64.0;
    let p0 = SchemeParams::new(tau, tau);
    let l = p0.domain_half_extent();
    let g = Grid3::with_half_extent(17, l)?;
    let op = CoulombOperator::new(g, Backend::Spectral);
    let u0 = gaussian(g, 40.0, 1.5, [0.0; 3]);
    let p = p0.with_floor_for(u0.integral(), l);
    let s0 = StepState::from_density(0, 0.0, u0, p.u_floor, &op)?;
    let s1 = implicit_step(&s0, &p, &op)?;

    let st = &s1.stats;
    println!("outer {} newton {} cg {}", st.outer_iterations, st.newton_iterations, st.cg_iterations);
    println!("full residual {:.2e}, last change {:.2e}, clamps {}", st.full_residual, st.outer_change, st.clamps);
    if let Some(e) = st.entropy {
        println!("H {:.10} -> {:.10}, tau D {:.4e}, tau^2 W14 {:.4e}, slack {:.4e}", e.h_prev, e.h_new, tau * e.dissipation, tau * tau * e.w14, e.slack);
    }
    println!("mass {:.12} -> {:.12}", s0.u.integral(), s1.u.integral());
    println!("parity defect {:.2e}", parity_defect(&s1.u) / s1.u.max());
    Ok(())
}
