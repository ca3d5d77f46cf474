use std::f64::consts::{E, PI};

use landau::coulomb::{Backend, CoulombOperator};
use landau::diagnostics::{
    decay_weight_integral, dissipation, entropy, entropy_lower_constant, fisher_weighted, moments, odd_integral,
    AuditContext, DissipationMethod, Tracker, AUDIT_NAMES,
};
use landau::error::Error;
use landau::field::{Grid3, ScalarField};
use landau::initial::gaussian;
use landau::scheme::{implicit_step, SchemeParams, StepState};
use proptest::prelude::*;

/// Composite Simpson on [0, b] with 2k panels.
fn simpson(f: impl Fn(f64) -> f64, b: f64, k: usize) -> f64 {
    let n = 2 * k;
    let h = b / n as f64;
    let mut s = f(0.0) + f(b);
    for i in 1..n {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
    }
    s * h / 3.0
}

#[test]
fn gaussian_moments() {
    let g = Grid3::with_half_extent(33, 6.0).unwrap();
    let u = gaussian(g, 1.0, 1.0, [0.0; 3]);
    let m = moments(&u).unwrap();
    assert!((m.mass - 1.0).abs() <= 1e-4);
    assert!((m.second_moment / 3.0 - 1.0).abs() <= 1e-4, "{}", m.second_moment);
    let s = moments(&u.scale(2.5)).unwrap();
    assert!((s.mass / m.mass - 2.5).abs() < 1e-12);
    assert!((s.second_moment / m.second_moment - 2.5).abs() < 1e-12);
    assert!((s.radius - m.radius).abs() < 1e-13);
}

#[test]
fn concentrated_bump_has_small_radius() {
    let g = Grid3::with_half_extent(11, 1.0).unwrap();
    let mut u = ScalarField::constant(g, 1e-12);
    u.values_mut()[g.index(5, 5, 5)] = 1.0;
    assert!(moments(&u).unwrap().radius <= g.h());
    assert!(matches!(moments(&ScalarField::zeros(g)), Err(Error::ZeroMass)));
}

#[test]
fn entropy_of_indicator_and_gaussian() {
    // eight cells of volume 1/8
    let g = Grid3::new(5, 0.5).unwrap();
    let u = ScalarField::from_fn(g, |x| if x.iter().all(|c| *c > 0.25 && *c < 1.1) { 1.0 } else { 0.0 });
    assert!((u.integral() - 1.0).abs() < 1e-15);
    let (h, hp) = entropy(&u);
    assert!((h + 1.0).abs() < 1e-15 && hp.abs() < 1e-15);
    assert_eq!(entropy(&ScalarField::zeros(g)), (0.0, 0.0));

    let g = Grid3::with_half_extent(33, 6.0).unwrap();
    let (_, hp) = entropy(&gaussian(g, 1.0, 1.0, [0.0; 3]));
    let exact = -1.5 * (2.0 * PI * E).ln();
    assert!((hp - exact).abs() <= 1e-3, "{hp} vs {exact}");
}

fn positive_field(n: usize, vals: &[f64]) -> ScalarField {
    let g = Grid3::with_half_extent(n, 2.0).unwrap();
    ScalarField::from_vec(g, vals.to_vec()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 100, ..ProptestConfig::default() })]

    #[test]
    fn double_sum_matches_convolution(vals in prop::collection::vec(0.05f64..3.0, 13 * 13 * 13)) {
        let u = positive_field(13, &vals);
        let op = CoulombOperator::new(*u.grid(), Backend::Spectral);
        let d1 = dissipation(&u, &op, DissipationMethod::DoubleSum).unwrap();
        let d2 = dissipation(&u, &op, DissipationMethod::Convolution).unwrap();
        prop_assert!(d1 >= 0.0);
        prop_assert!((d1 - d2).abs() <= 1e-8 * d1.abs().max(d2.abs()), "{} {}", d1, d2);
    }
}

#[test]
fn log_affine_density_has_no_dissipation() {
    let g = Grid3::with_half_extent(13, 2.0).unwrap();
    let op = CoulombOperator::new(g, Backend::Spectral);
    let c = [0.7, -0.3, 0.45];
    let u = ScalarField::from_fn(g, |x| (0.2 + c[0] * x[0] + c[1] * x[1] + c[2] * x[2]).exp());
    // scale: sum u |grad w|^2 a h^3, the size of either half of the form
    let a = op.potential(&u).unwrap();
    let scale = u.zip_map(&a, |u, a| u * a * (c[0] * c[0] + c[1] * c[1] + c[2] * c[2])).integral();
    for m in [DissipationMethod::DoubleSum, DissipationMethod::Convolution] {
        let d = dissipation(&u, &op, m).unwrap();
        assert!(d.abs() <= 1e-12 * scale, "{m:?}: {d:e} vs {scale:e}");
    }
}

#[test]
fn double_sum_is_capped() {
    let g = Grid3::with_half_extent(23, 2.0).unwrap();
    let op = CoulombOperator::new(g, Backend::Spectral);
    let r = dissipation(&ScalarField::constant(g, 1.0), &op, DissipationMethod::DoubleSum);
    assert!(matches!(r, Err(Error::GridTooLarge { n: 23, .. })));
}

#[test]
fn fisher_matches_radial_quadrature_and_decreases_with_spreading() {
    let g = Grid3::with_half_extent(41, 6.0).unwrap();
    let mut last = f64::INFINITY;
    for sigma in [0.8, 1.0, 1.25] {
        let f = fisher_weighted(&gaussian(g, 1.0, sigma, [0.0; 3]));
        let norm = (2.0 * PI * sigma * sigma).powf(-1.5);
        let exact = simpson(
            |r| 4.0 * PI * r.powi(4) * norm * (-r * r / (2.0 * sigma * sigma)).exp() / (4.0 * sigma.powi(4) * (1.0 + r)),
            12.0 * sigma,
            4000,
        );
        assert!(f > 0.0 && f < last);
        assert!((f / exact - 1.0).abs() <= 2e-2, "sigma {sigma}: {f} vs {exact}");
        last = f;
    }
}

#[test]
fn fisher_is_reflection_invariant_and_zero_on_constants() {
    let g = Grid3::with_half_extent(11, 1.5).unwrap();
    let u = ScalarField::from_fn(g, |x| (0.4 * x[0] - 0.2 * x[1] * x[2] + 0.1 * x[2]).exp());
    let flipped = ScalarField::from_vec(g, (0..g.len()).map(|i| u.values()[g.mirror(i)]).collect()).unwrap();
    assert!((fisher_weighted(&u) - fisher_weighted(&flipped)).abs() <= 1e-12 * fisher_weighted(&u));
    assert_eq!(fisher_weighted(&ScalarField::constant(g, 3.0)), 0.0);
    assert_eq!(odd_integral(&ScalarField::constant(g, 3.0)), [0.0; 3]);
}

#[test]
fn entropy_lower_constant_uses_a_finite_weight() {
    let eps = 0.2;
    let beta = (1.0 - eps) / eps;
    let g = Grid3::with_half_extent(41, 10.0).unwrap();
    let c = entropy_lower_constant(&g, 1.0, eps);
    let bound = 2.0 / (E * eps) * decay_weight_integral(beta).powf(eps / 2.0);
    assert!(c > 0.0 && c <= bound * 1.01, "{c} vs {bound}");
    // closed form of the full-space weight at beta = 2: pi^2
    assert!((decay_weight_integral(2.0) - PI * PI).abs() < 1e-12);
}

#[test]
fn first_step_audits_pass() {
    let tau = 1.0 / 64.0;
    let p0 = SchemeParams::new(tau, 0.25);
    let l = p0.domain_half_extent();
    let g = Grid3::with_half_extent(17, l).unwrap();
    let op = CoulombOperator::new(g, Backend::Spectral);
    let u0 = gaussian(g, 40.0, 1.5, [0.0; 3]);
    let p = p0.with_floor_for(u0.integral(), l);
    let s0 = StepState::from_density(0, 0.0, u0, p.u_floor, &op).unwrap();
    let mut tr = Tracker::new(AuditContext { tau, ..Default::default() });
    tr.observe(&s0, &op).unwrap();
    let s1 = implicit_step(&s0, &p, &op).unwrap();
    let r = tr.observe(&s1, &op).unwrap();
    for name in &AUDIT_NAMES[..8] {
        let a = r.audit(name).unwrap();
        assert!(a.pass && a.slack >= 0.0, "{name}: {a:?}");
    }
    assert!(tr.all_passed());
}
