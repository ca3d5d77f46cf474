//! Monitors of the eps-Poincare condition int u phi^2 <= eps int a |grad phi|^2 + C_eps int phi^2.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::coulomb::CoulombOperator;
use crate::error::{Error, Result};
use crate::field::{gamma, gradient, ScalarField};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoincareParams {
    pub cube_size: f64,
    pub r: f64,
    pub epsilon: f64,
    pub samples: usize,
    pub seed: u64,
    /// Smallest bump width, in grid spacings.
    pub min_width_cells: f64,
}

impl PoincareParams {
    pub fn new(cube_size: f64) -> Self {
        Self { cube_size, r: 2.0, epsilon: 0.1, samples: 64, seed: 0, min_width_cells: 2.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cube_size > 0.0 && self.r > 1.0 && self.epsilon > 0.0 && self.min_width_cells > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "need cube_size > 0, r > 1, epsilon > 0; got {}, {}, {}",
                self.cube_size, self.r, self.epsilon
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CubeRatio {
    /// Lower corner node index along each axis.
    pub corner: [usize; 3],
    pub ratio: f64,
    pub mass_moment_ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhiSample {
    pub family: PhiFamily,
    /// int u phi^2.
    pub lhs: f64,
    /// eps int a |grad phi|^2.
    pub gradient_term: f64,
    /// int phi^2.
    pub mass_term: f64,
    pub minimal_c: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhiFamily {
    Bump,
    PlaneWaveBump,
    DensityPower,
    Custom,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PoincareReport {
    pub cubes: Vec<CubeRatio>,
    pub max_ratio: f64,
    pub max_mass_moment_ratio: f64,
    pub samples: Vec<PhiSample>,
    pub max_minimal_c: f64,
}

/// Per-cube |Q|^{2/3} (avg u^r)^{1/r} (avg a^{-r})^{1/r} and |Q|^{2/3} avg u / avg a
/// over a tiling by cubes of k = floor(R/h) nodes per side, centred in the grid.
pub fn small_p_ratio(u: &ScalarField, a: &ScalarField, params: &PoincareParams) -> Result<PoincareReport> {
    params.validate()?;
    let g = *u.grid();
    g.check_same(a.grid())?;
    let h = g.h();
    if params.cube_size < 2.0 * h {
        return Err(Error::CubeTooSmall { side: params.cube_size, min: 2.0 * h });
    }
    let k = ((params.cube_size / h).floor() as usize).min(g.n());
    let tiles = g.n() / k;
    let offset = (g.n() - tiles * k) / 2;
    let side = k as f64 * h;
    let area = side * side;
    let count = (k * k * k) as f64;
    let mut report = PoincareReport::default();
    for ti in 0..tiles {
        for tj in 0..tiles {
            for tk in 0..tiles {
                let c = [offset + ti * k, offset + tj * k, offset + tk * k];
                let (mut su, mut sa, mut u1, mut a1) = (0.0, 0.0, 0.0, 0.0);
                for i in c[0]..c[0] + k {
                    for j in c[1]..c[1] + k {
                        for l in c[2]..c[2] + k {
                            let idx = g.index(i, j, l);
                            let (uv, av) = (u.values()[idx], a.values()[idx]);
                            su += uv.powf(params.r);
                            sa += av.powf(-params.r);
                            u1 += uv;
                            a1 += av;
                        }
                    }
                }
                // an empty cube contributes 0 even where a vanishes too
                let (ratio, mm) = if su == 0.0 {
                    (0.0, 0.0)
                } else {
                    (area * (su / count).powf(1.0 / params.r) * (sa / count).powf(1.0 / params.r), area * u1 / a1)
                };
                report.max_ratio = report.max_ratio.max(ratio);
                report.max_mass_moment_ratio = report.max_mass_moment_ratio.max(mm);
                report.cubes.push(CubeRatio { corner: c, ratio, mass_moment_ratio: mm });
            }
        }
    }
    Ok(report)
}

/// Minimal C_eps for one test function.
pub fn minimal_constant(u: &ScalarField, a: &ScalarField, phi: &ScalarField, eps: f64, family: PhiFamily) -> PhiSample {
    let h3 = u.grid().cell_volume();
    let gp = gradient(phi).norm_sq();
    let (mut lhs, mut grad, mut mass) = (0.0, 0.0, 0.0);
    for i in 0..phi.values().len() {
        let f2 = phi.values()[i] * phi.values()[i];
        lhs += u.values()[i] * f2;
        grad += a.values()[i] * gp.values()[i];
        mass += f2;
    }
    let (lhs, grad, mass) = (lhs * h3, eps * grad * h3, mass * h3);
    let minimal_c = if mass > 0.0 { (lhs - grad).max(0.0) / mass } else { 0.0 };
    PhiSample { family, lhs, gradient_term: grad, mass_term: mass, minimal_c }
}

/// Samples bumps, plane waves times bumps and cut-off powers of u, and
/// reports the largest minimal C_eps (an empirical lower bound for C_eps).
pub fn eps_poincare_test(u: &ScalarField, a: &ScalarField, params: &PoincareParams) -> Result<PoincareReport> {
    params.validate()?;
    let g = *u.grid();
    g.check_same(a.grid())?;
    let l = g.half_extent();
    let wmin = params.min_width_cells * g.h();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut report = PoincareReport::default();
    for s in 0..params.samples {
        let c = [rng.gen_range(-l..=l), rng.gen_range(-l..=l), rng.gen_range(-l..=l)];
        let width = rng.gen_range(wmin..=l.max(wmin));
        let bump = move |x: [f64; 3]| {
            let r2 = (x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2) + (x[2] - c[2]).powi(2);
            (-r2 / (2.0 * width * width)).exp()
        };
        let (family, phi) = match s % 3 {
            0 => (PhiFamily::Bump, ScalarField::from_fn(g, bump)),
            1 => {
                let k = [rng.gen_range(-3.0..3.0) / width, rng.gen_range(-3.0..3.0) / width, rng.gen_range(-3.0..3.0) / width];
                let ph = rng.gen_range(0.0..std::f64::consts::TAU);
                (
                    PhiFamily::PlaneWaveBump,
                    ScalarField::from_fn(g, |x| (k[0] * x[0] + k[1] * x[1] + k[2] * x[2] + ph).cos() * bump(x)),
                )
            }
            _ => {
                let p = rng.gen_range(1.0..3.0);
                let mut phi = ScalarField::from_fn(g, bump);
                for (f, uv) in phi.values_mut().iter_mut().zip(u.values()) {
                    *f *= uv.powf(p / 2.0);
                }
                (PhiFamily::DensityPower, phi)
            }
        };
        let sample = minimal_constant(u, a, &phi, params.epsilon, family);
        report.max_minimal_c = report.max_minimal_c.max(sample.minimal_c);
        report.samples.push(sample);
    }
    Ok(report)
}

/// ||gamma^{-1} grad a||_{L^q} with grad a from the kernel gradient.
pub fn weighted_grad_a_norm(u: &ScalarField, op: &CoulombOperator, q: f64) -> Result<f64> {
    if !(q > 3.0) {
        return Err(Error::InvalidParameter(format!("q must exceed 3, got {q}")));
    }
    let g = *u.grid();
    let ga = op.grad_potential(u)?.norm_sq();
    let mut s = 0.0;
    for i in 0..g.len() {
        s += (ga.values()[i].sqrt() / gamma(g.position(i))).powf(q);
    }
    Ok((s * g.cell_volume()).powf(1.0 / q))
}
