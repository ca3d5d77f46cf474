//! Initial densities.

use std::f64::consts::PI;

use crate::field::{symmetrize_even, Grid3, ScalarField};

/// Isotropic Gaussian with total mass `mass` on R^3.
pub fn gaussian(grid: Grid3, mass: f64, sigma: f64, center: [f64; 3]) -> ScalarField {
    let norm = mass / (2.0 * PI * sigma * sigma).powf(1.5);
    ScalarField::from_fn(grid, |x| {
        let r2 = (x[0] - center[0]).powi(2) + (x[1] - center[1]).powi(2) + (x[2] - center[2]).powi(2);
        norm * (-r2 / (2.0 * sigma * sigma)).exp()
    })
}

/// Uniform ball of total mass `mass`. Cells cut by the sphere get their
/// covered volume fraction, estimated with `sub`^3 sub-samples, and the
/// result is rescaled so the grid mass equals `mass` exactly.
pub fn uniform_ball(grid: Grid3, mass: f64, radius: f64, sub: usize) -> ScalarField {
    let h = grid.h();
    let mut f = ScalarField::from_fn(grid, |x| {
        let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        let half_diag = 0.5 * 3f64.sqrt() * h;
        if r + half_diag <= radius {
            return 1.0;
        }
        if r - half_diag >= radius {
            return 0.0;
        }
        let mut inside = 0usize;
        for a in 0..sub {
            for b in 0..sub {
                for c in 0..sub {
                    let o = |t: usize| (t as f64 + 0.5) / sub as f64 - 0.5;
                    let p = [x[0] + o(a) * h, x[1] + o(b) * h, x[2] + o(c) * h];
                    if p[0] * p[0] + p[1] * p[1] + p[2] * p[2] < radius * radius {
                        inside += 1;
                    }
                }
            }
        }
        inside as f64 / (sub * sub * sub) as f64
    });
    let m = f.integral();
    if m > 0.0 {
        let s = mass / m;
        f.values_mut().iter_mut().for_each(|v| *v *= s);
    }
    f
}

/// Two Gaussians of half the mass each at +offset and -offset.
pub fn double_bump(grid: Grid3, mass: f64, sigma: f64, offset: [f64; 3]) -> ScalarField {
    let plus = gaussian(grid, mass, sigma, offset);
    symmetrize_even(&plus)
}
