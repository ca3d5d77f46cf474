//! Audit table over a short run.

use landau::coulomb::{Backend, CoulombOperator};
use landau::diagnostics::{AuditContext, Tracker, AUDIT_NAMES};
use landau::field::Grid3;
use landau::initial::gaussian;
use landau::scheme::{implicit_step, SchemeParams, StepState};

fn main() -> landau::error::Result<()> {
    let tau = 1.0 / 32.0;
    let p0 = SchemeParams::new(tau, 4.0 * tau);
    let l = p0.domain_half_extent();
    let g = Grid3::with_half_extent(13, l)?;
    let op = CoulombOperator::new(g, Backend::Spectral);
    let u0 = gaussian(g, 20.0, 1.2, [0.0; 3]);
    let p = p0.with_floor_for(u0.integral(), l);
    let mut s = StepState::from_density(0, 0.0, u0, p.u_floor, &op)?;
    let mut tracker = Tracker::new(AuditContext { tau, ..Default::default() });

    print!("{:>3} {:>10} {:>10} {:>10}", "k", "mass", "E", "H");
    for n in AUDIT_NAMES {
        print!(" {:>12}", &n[..n.len().min(12)]);
    }
    println!();
    for k in 0..=p.steps() {
        if k > 0 {
            s = implicit_step(&s, &p, &op)?;
        }
        let r = tracker.observe(&s, &op)?;
        print!("{:>3} {:>10.6} {:>10.5} {:>10.5}", r.k, r.mass, r.second_moment, r.entropy);
        for a in &r.audits {
            match a {
                Some(a) => print!(" {:>12.3e}", a.slack),
                None => print!(" {:>12}", "-"),
            }
        }
        println!();
    }
    println!("all gated audits passed: {}", tracker.all_passed());
    Ok(())
}
