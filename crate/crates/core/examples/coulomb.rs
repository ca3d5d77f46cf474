//! Potential of a Gaussian on both backends against the erf closed form.
//!
//!     cargo run --release --example coulomb -- 33

use std::f64::consts::PI;
use std::time::Instant;

use landau::coulomb::{Backend, CoulombOperator};
use landau::field::Grid3;
use landau::initial::gaussian;

fn main() -> landau::error::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(33);
    let sigma = 1.0;
    let g = Grid3::with_half_extent(n, 5.0 * sigma)?;
    let u = gaussian(g, 1.0, sigma, [0.0; 3]);
    let exact = |r: f64| if r == 0.0 { (2.0 / PI).sqrt() / (4.0 * PI * sigma) } else { libm::erf(r / (sigma * 2f64.sqrt())) / (4.0 * PI * r) };

    let mut results = Vec::new();
    for backend in [Backend::Spectral, Backend::Direct] {
        if backend == Backend::Direct && n > 33 {
            continue;
        }
        let t0 = Instant::now();
        let a = CoulombOperator::new(g, backend).potential(&u)?;
        let err = (0..g.len()).map(|i| (a.values()[i] / exact(g.radius(i)) - 1.0).abs()).fold(0.0, f64::max);
        println!("{backend:?}: max relative error {err:.3e} in {:.3}s", t0.elapsed().as_secs_f64());
        results.push(a);
    }
    if let [s, d] = &results[..] {
        println!("backend difference {:.3e}", s.zip_map(d, |x, y| x - y).max_abs() / d.max_abs());
    }
    Ok(())
}
