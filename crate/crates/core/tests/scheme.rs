use landau::coulomb::{Backend, CoulombOperator};
use landau::diagnostics::entropy;
use landau::field::{parity_defect, Grid3, ScalarField};
use landau::initial::gaussian;
use landau::scheme::{
    implicit_step, residual, solve_inner, solve_residual_equation, FrozenFields, InnerProblem, NewtonControls,
    SchemeParams, StepState,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn setup(n: usize, l: f64, tau: f64) -> (CoulombOperator, SchemeParams, StepState) {
    let g = Grid3::with_half_extent(n, l).unwrap();
    let op = CoulombOperator::new(g, Backend::Spectral);
    let u0 = gaussian(g, 10.0, 0.8, [0.0; 3]);
    let p = SchemeParams::new(tau, 4.0 * tau).with_floor_for(u0.integral(), l);
    let s = StepState::from_density(0, 0.0, u0, p.u_floor, &op).unwrap();
    (op, p, s)
}

#[test]
fn constant_state_leaves_only_the_cubic_term() {
    let g = Grid3::with_half_extent(9, 1.0).unwrap();
    let op = CoulombOperator::new(g, Backend::Spectral);
    let p = SchemeParams::new(0.1, 0.1);
    let prev = StepState::from_density(0, 0.0, ScalarField::constant(g, 0.7), p.u_floor, &op).unwrap();
    let frozen = FrozenFields { a: ScalarField::constant(g, 2.0), ..FrozenFields::at(&op, &prev.w).unwrap() };
    let r = residual(&prev, &prev.w, &frozen, &p);
    let w = 0.7f64.ln();
    for v in r.values() {
        assert!((v - 0.1 * w * w * w).abs() <= 1e-14, "{v}");
    }
}

#[test]
fn residual_sums_to_cubic_term() {
    let (op, p, prev) = setup(11, 1.5, 0.05);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..5 {
        let w = ScalarField::from_fn(*prev.u.grid(), |_| rng.gen_range(-2.0..1.0));
        let r = residual(&prev, &w, &FrozenFields::at(&op, &w).unwrap(), &p);
        let lhs: f64 = r.integral();
        let time: f64 = w.map(f64::exp).zip_map(&prev.u, |a, b| (a - b) / p.tau).integral();
        let cubic: f64 = w.map(|x| p.tau * x * x * x).integral();
        let rhs = time + cubic;
        let scale = r.map(f64::abs).integral();
        assert!((lhs - rhs).abs() <= 1e-12 * scale, "{lhs} {rhs}");
    }
}

#[test]
fn manufactured_solution_is_recovered() {
    let (op, p, prev) = setup(9, 1.5, 1.0 / 32.0);
    let g = *prev.u.grid();
    let wstar = prev.w.zip_map(&ScalarField::from_fn(g, |x| 0.3 * (x[0] + 0.4 * x[2]).cos() * (0.6 * x[1]).sin()), |a, b| a + b);
    let target = residual(&prev, &wstar, &FrozenFields::at(&op, &wstar).unwrap(), &p);
    let (w, stats) = solve_residual_equation(&prev, &target, &p, &op).unwrap();
    let err = w.zip_map(&wstar, |a, b| a - b).max_abs();
    assert!(err <= p.newton_tol, "{err:e} after {stats:?}");
}

#[test]
fn randomized_inner_solves_decrease_residual_strictly() {
    let g = Grid3::with_half_extent(7, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..100 {
        let tau = rng.gen_range(0.01..0.2);
        let c0 = rng.gen_range(0.1..2.0);
        let kx = rng.gen_range(0.0..1.5);
        let c = ScalarField::from_fn(g, |x| c0 * (1.0 + 0.5 * (kx * x[0]).sin() * x[1].cos()));
        let amp = rng.gen_range(0.1..2.0);
        let shift = rng.gen_range(-1.0..1.0);
        let wstar = ScalarField::from_fn(g, |x| shift + amp * (x[0] - 0.5 * x[2]).sin() * (0.8 * x[1]).cos());
        let mass = if case % 2 == 0 { 1.0 / tau } else { 0.0 };
        let p0 = InnerProblem { tau, mass, diffusion: &c, rhs: &c };
        let f = p0.apply(&wstar);
        let p = InnerProblem { rhs: &f, ..p0 };
        let start = ScalarField::from_fn(g, |_| rng.gen_range(-1.0..1.0));
        let s = solve_inner(&p, &start, &NewtonControls::default()).unwrap();
        assert!(s.residual_history.windows(2).all(|h| h[1] < h[0]), "case {case}: {:?}", s.residual_history);
        assert!(s.w.zip_map(&wstar, |a, b| a - b).max_abs() < 1e-6, "case {case}");
    }
}

#[test]
fn one_step_is_even_and_dissipates_entropy() {
    let (op, p, prev) = setup(13, 1.5, 1.0 / 32.0);
    let next = implicit_step(&prev, &p, &op).unwrap();
    assert!(parity_defect(&next.u) <= 1e-12 * next.u.max());
    let (h0, _) = entropy(&prev.u);
    let (h1, _) = entropy(&next.u);
    assert!(h1 <= h0 + 1e-8 * h0.abs());
    assert!(next.u.min() >= p.u_floor);
    let rel = next.w.zip_map(&next.u, |w, u| (w.exp() - u).abs() / u).max();
    assert!(rel <= 1e-14);
    assert_eq!(next.a, op.potential(&next.u).unwrap());
}

#[test]
fn params_are_validated() {
    let bad = [
        SchemeParams { tau: 0.0, ..SchemeParams::new(0.1, 0.1) },
        SchemeParams { alpha: 0.2, ..SchemeParams::new(0.1, 0.1) },
        SchemeParams { u_floor: 0.0, ..SchemeParams::new(0.1, 0.1) },
        SchemeParams::new(0.1, 0.15),
    ];
    for p in bad {
        assert!(p.validate().is_err(), "{p:?}");
    }
    assert!(SchemeParams::new(0.125, 0.25).validate().is_ok());
}
