use std::f64::consts::PI;

use landau::coulomb::{Backend, CoulombOperator};
use landau::field::{odd_parity_defect, Grid3, ScalarField, VectorField};
use landau::initial::{gaussian, uniform_ball};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn erf_potential(m: f64, sigma: f64, r: f64) -> f64 {
    if r == 0.0 {
        m * (2.0 / PI).sqrt() / (4.0 * PI * sigma)
    } else {
        m * libm::erf(r / (sigma * 2f64.sqrt())) / (4.0 * PI * r)
    }
}

#[test]
fn ball_exterior_potential_and_field_on_65() {
    let g = Grid3::with_half_extent(65, 6.0).unwrap();
    let op = CoulombOperator::new(g, Backend::Spectral);
    let (m, r0) = (2.5, 3.0);
    let u = uniform_ball(g, m, r0, 8);
    let a = op.potential(&u).unwrap();
    let ga = op.grad_potential(&u).unwrap();
    let (mut ea, mut eg) = (0.0f64, 0.0f64);
    for idx in 0..g.len() {
        let r = g.radius(idx);
        if r >= r0 {
            ea = ea.max((a.values()[idx] - m / (4.0 * PI * r)).abs() * 4.0 * PI * r / m);
        }
        // centred differences straddle the ball surface within 2h of it
        if r >= r0 + 2.0 * g.h() {
            let v = ga.at(idx);
            let gn = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            eg = eg.max((gn * 4.0 * PI * r * r / m - 1.0).abs());
        }
    }
    assert!(ea <= 1e-3, "potential {ea:e}");
    assert!(eg <= 5e-3, "field {eg:e}");
}

#[test]
fn gaussian_potential_matches_erf_form() {
    let sigma = 1.2;
    let g = Grid3::with_half_extent(65, 5.0 * sigma).unwrap();
    let op = CoulombOperator::new(g, Backend::Spectral);
    let m = 3.0;
    let a = op.potential(&gaussian(g, m, sigma, [0.0; 3])).unwrap();
    let err = (0..g.len())
        .map(|i| (a.values()[i] / erf_potential(m, sigma, g.radius(i)) - 1.0).abs())
        .fold(0.0, f64::max);
    assert!(err <= 1e-3, "{err:e}");
}

#[test]
fn backends_agree_on_gaussian_17() {
    let g = Grid3::with_half_extent(17, 3.0).unwrap();
    let u = gaussian(g, 1.0, 0.8, [0.0; 3]);
    let a = CoulombOperator::new(g, Backend::Direct).potential(&u).unwrap();
    let b = CoulombOperator::new(g, Backend::Spectral).potential(&u).unwrap();
    let rel = a.zip_map(&b, |x, y| x - y).max_abs() / a.max_abs();
    assert!(rel <= 1e-10, "{rel:e}");
}

#[test]
fn gradient_of_even_density_is_odd() {
    let g = Grid3::with_half_extent(17, 2.0).unwrap();
    let op = CoulombOperator::new(g, Backend::Spectral);
    let ga = op.grad_potential(&gaussian(g, 1.0, 0.6, [0.0; 3])).unwrap();
    assert!(odd_parity_defect(&ga) <= 1e-10 * ga.max_abs());
    let zero = op.grad_potential(&ScalarField::zeros(g)).unwrap();
    assert_eq!(zero.max_abs(), 0.0);
}

#[test]
fn vector_potential_is_componentwise() {
    let g = Grid3::with_half_extent(13, 2.0).unwrap();
    let op = CoulombOperator::new(g, Backend::Spectral);
    let u = gaussian(g, 1.0, 0.5, [0.0; 3]);
    let scalar = op.potential(&u).unwrap();
    let comps = [vec![0.0; g.len()], u.values().to_vec(), vec![0.0; g.len()]];
    let v = op.vector_potential(&VectorField::from_components(g, comps).unwrap()).unwrap();
    assert_eq!(v.component(0).iter().fold(0.0f64, |m, x| m.max(x.abs())), 0.0);
    assert_eq!(v.component(2).iter().fold(0.0f64, |m, x| m.max(x.abs())), 0.0);
    let diff = v.component_field(1).zip_map(&scalar, |a, b| a - b).max_abs();
    assert!(diff <= 1e-14 * scalar.max_abs());
    assert_eq!(op.vector_potential(&VectorField::zeros(g)).unwrap().max_abs(), 0.0);
}

#[test]
fn vector_backends_agree_on_random_9() {
    let g = Grid3::with_half_extent(9, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let v = VectorField::from_components(g, [0, 1, 2].map(|_| (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect())).unwrap();
    let a = CoulombOperator::new(g, Backend::Direct).vector_potential(&v).unwrap();
    let b = CoulombOperator::new(g, Backend::Spectral).vector_potential(&v).unwrap();
    let mut d = 0.0f64;
    for c in 0..3 {
        for (x, y) in a.component(c).iter().zip(b.component(c)) {
            d = d.max((x - y).abs());
        }
    }
    assert!(d <= 1e-10 * a.max_abs(), "{d:e}");
}

#[test]
fn perturbed_kernel_breaks_closed_form() {
    let g = Grid3::with_half_extent(33, 5.0).unwrap();
    let u = gaussian(g, 1.0, 1.0, [0.0; 3]);
    let exact: Vec<f64> = (0..g.len()).map(|i| erf_potential(1.0, 1.0, g.radius(i))).collect();
    let err = |op: CoulombOperator| {
        let a = op.potential(&u).unwrap();
        a.values().iter().zip(&exact).map(|(x, e)| (x / e - 1.0).abs()).fold(0.0, f64::max)
    };
    let clean = err(CoulombOperator::new(g, Backend::Spectral));
    let bent = err(CoulombOperator::with_kernel_scale(g, Backend::Spectral, 1.01));
    assert!(clean < 4e-3 && bent > 9e-3, "{clean:e} {bent:e}");
}
