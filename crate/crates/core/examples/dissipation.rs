//! The dissipation by direct double sum and by convolution.

use landau::coulomb::{Backend, CoulombOperator};
use landau::diagnostics::{dissipation, DissipationMethod};
use landau::field::{Grid3, ScalarField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> landau::error::Result<()> {
    let g = Grid3::with_half_extent(13, 2.0)?;
    let op = CoulombOperator::new(g, Backend::Spectral);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for case in 0..5 {
        let u = ScalarField::from_fn(g, |_| rng.gen_range(0.05..3.0));
        let a = dissipation(&u, &op, DissipationMethod::DoubleSum)?;
        let b = dissipation(&u, &op, DissipationMethod::Convolution)?;
        println!("case {case}: double sum {a:.10e}  convolution {b:.10e}  rel {:.1e}", (a - b).abs() / a);
    }
    // log-affine densities sit in the kernel of the form
    let u = ScalarField::from_fn(g, |x| (0.5 * x[0] - 0.2 * x[2]).exp());
    println!("log-affine: {:.3e}", dissipation(&u, &op, DissipationMethod::Convolution)?);
    Ok(())
}
