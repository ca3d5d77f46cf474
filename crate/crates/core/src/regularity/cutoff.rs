//! Radial C^2 cutoffs: 1 on B_inner, 0 outside B_outer, quintic smoothstep between.

use serde::{Deserialize, Serialize};

use crate::field::{Grid3, ScalarField};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cutoff {
    pub inner: f64,
    pub outer: f64,
}

/// 1 - (6s^5 - 15s^4 + 10s^3).
fn profile(s: f64) -> f64 {
    if s <= 0.0 {
        1.0
    } else if s >= 1.0 {
        0.0
    } else {
        1.0 - s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)
    }
}

fn profile_slope(s: f64) -> f64 {
    if s <= 0.0 || s >= 1.0 {
        0.0
    } else {
        -30.0 * s * s * (1.0 - s) * (1.0 - s)
    }
}

/// sup |eta'| (R - r) for the quintic profile.
pub const GRADIENT_CONSTANT: f64 = 15.0 / 8.0;

impl Cutoff {
    pub fn new(inner: f64, outer: f64) -> Self {
        assert!(0.0 <= inner && inner < outer, "cutoff radii must satisfy 0 <= inner < outer");
        Self { inner, outer }
    }

    pub fn value(&self, r: f64) -> f64 {
        profile((r - self.inner) / (self.outer - self.inner))
    }

    /// d eta / dr.
    pub fn slope(&self, r: f64) -> f64 {
        profile_slope((r - self.inner) / (self.outer - self.inner)) / (self.outer - self.inner)
    }

    pub fn field(&self, grid: Grid3) -> ScalarField {
        ScalarField::from_fn(grid, |x| self.value((x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()))
    }

    /// sup |grad eta| (R - r), evaluated on a fine radial sample.
    pub fn gradient_constant(&self) -> f64 {
        sample_sup(|s| profile_slope(s).abs())
    }

    /// c with |grad eta| <= c eta^{2/3} / (R - r). The bound c eta / (R - r)
    /// cannot hold for a compactly supported eta, since eta'/eta is unbounded
    /// at the edge of the support; the 2/3 power is the largest for which the
    /// quintic profile admits a finite constant.
    pub fn weighted_gradient_constant(&self) -> f64 {
        sample_sup(|s| {
            let e = profile(s);
            if e > 0.0 {
                profile_slope(s).abs() / e.powf(2.0 / 3.0)
            } else {
                0.0
            }
        })
        // the ratio tends to 30 / 10^{2/3} at the outer edge, where eta vanishes
        .max(30.0 / 10f64.powf(2.0 / 3.0))
    }

    /// sup |Laplacian eta| (R - r)^2 with the 2/r eta' term bounded using r >= inner.
    pub fn laplacian_constant(&self) -> f64 {
        let w = self.outer - self.inner;
        sample_sup(|s| {
            let r = self.inner + s * w;
            let second = 60.0 * s * (1.0 - s) * (2.0 * s - 1.0);
            let radial = if r > 0.0 { 2.0 / r * profile_slope(s) * w } else { 0.0 };
            (second + radial).abs()
        })
    }
}

fn sample_sup(f: impl Fn(f64) -> f64) -> f64 {
    let m = 20000;
    (0..=m).map(|i| f(i as f64 / m as f64)).fold(0.0, f64::max)
}
