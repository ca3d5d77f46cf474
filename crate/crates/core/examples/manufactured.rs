//! Manufactured solution for the step equation: pick w*, evaluate the
//! residual there, and solve for it.

use landau::coulomb::{Backend, CoulombOperator};
use landau::field::{Grid3, ScalarField};
use landau::initial::gaussian;
use landau::scheme::{residual, solve_residual_equation, FrozenFields, SchemeParams, StepState};

fn main() -> landau::error::Result<()> {
    let g = Grid3::with_half_extent(9, 1.5)?;
    let op = CoulombOperator::new(g, Backend::Spectral);
    let u0 = gaussian(g, 10.0, 0.8, [0.0; 3]);
    let p = SchemeParams::new(1.0 / 32.0, 1.0 / 32.0).with_floor_for(u0.integral(), 1.5);
    let prev = StepState::from_density(0, 0.0, u0, p.u_floor, &op)?;
    for amp in [0.05, 0.2, 0.5] {
        let wstar = prev.w.zip_map(&ScalarField::from_fn(g, |x| amp * (x[0] - 0.3 * x[1]).sin() * (0.5 * x[2]).cos()), |a, b| a + b);
        let target = residual(&prev, &wstar, &FrozenFields::at(&op, &wstar)?, &p);
        let (w, st) = solve_residual_equation(&prev, &target, &p, &op)?;
        println!(
            "amplitude {amp}: error {:.2e} after {} outer / {} newton iterations",
            w.zip_map(&wstar, |a, b| a - b).max_abs(),
            st.outer_iterations,
            st.newton_iterations
        );
    }
    Ok(())
}
