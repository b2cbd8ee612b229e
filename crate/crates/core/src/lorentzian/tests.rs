use super::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn flat(k: f64, steps: usize) -> ModeEvolution {
    ModeEvolution::new(&CoefficientFamily::flat(1.0), k, TimeGrid::new(1.0, steps), Integrator::ClosedForm).unwrap()
}

fn frw(k: f64, steps: usize) -> ModeEvolution {
    ModeEvolution::new(&CoefficientFamily::cosh_frw(1.0), k, TimeGrid::new(1.0, steps), Integrator::Rk4).unwrap()
}

#[test]
fn oscillator_data() {
    for k in [0.0, 3.0, -7.0] {
        let evo = flat(k, 50);
        let om = (k * k + 1.0_f64).sqrt();
        for t in [-1.0, -0.37, 0.0, 0.5, 1.0] {
            let a = evo.evolve_cauchy([ONE, ZERO], t).unwrap();
            let b = evo.evolve_cauchy([ZERO, ONE], t).unwrap();
            assert!((a - (om * t).cos()).norm() < 1e-13);
            assert!((b - I * (om * t).sin() / om).norm() < 1e-13);
        }
    }
}

#[test]
fn wronskian_is_conserved() {
    for w0 in [0.0, 0.5] {
        let evo = ModeEvolution::new(&CoefficientFamily::twisted(w0, 1.0), 4.0, TimeGrid::new(1.0, 100), Integrator::ClosedForm)
            .unwrap();
        assert!(evo.wronskian_defect() < 1e-13);
    }
    assert!(frw(5.0, 2000).wronskian_defect() < 1e-9);
}

#[test]
fn rk4_self_convergence_is_fourth_order() {
    let reference = frw(6.0, 6400);
    let f = [C64::new(0.4, 0.1), C64::new(-0.2, 1.0)];
    let exact = reference.evolve_cauchy(f, 1.0).unwrap();
    let errs: Vec<f64> = [200, 400, 800].iter().map(|&n| (frw(6.0, n).evolve_cauchy(f, 1.0).unwrap() - exact).norm()).collect();
    for w in errs.windows(2) {
        assert!((w[0] / w[1]).log2() > 3.8, "{errs:?}");
    }
}

#[test]
fn rk4_matches_closed_form_for_static_modes() {
    let fam = CoefficientFamily::twisted(0.5, 1.0);
    let a = ModeEvolution::new(&fam, 3.0, TimeGrid::new(1.0, 2000), Integrator::ClosedForm).unwrap();
    let b = ModeEvolution::new(&fam, 3.0, TimeGrid::new(1.0, 2000), Integrator::Rk4).unwrap();
    for j in 0..a.grid.len() {
        assert!((a.row(j)[0] - b.row(j)[0]).norm() < 1e-10 && (a.row(j)[1] - b.row(j)[1]).norm() < 1e-10);
    }
}

#[test]
fn static_energy_is_conserved() {
    let evo = flat(2.0, 100);
    let om2 = 5.0;
    let f = [C64::new(0.3, 0.2), C64::new(1.0, -0.4)];
    let energy = |j: usize| {
        let x = evo.c[j] * f[0] + evo.s[j] * (I * f[1]);
        0.5 * (x[1].norm_sqr() + om2 * x[0].norm_sqr())
    };
    let e0 = energy(evo.grid.steps);
    for j in 0..evo.grid.len() {
        assert!((energy(j) - e0).abs() < 1e-10 * e0);
    }
}

#[test]
fn time_reversal() {
    let x = State::new(C64::new(0.2, 0.7), C64::new(-1.0, 0.1));
    let evo = frw(3.0, 1000);
    let back = evo.propagate(evo.propagate(x, 0.0, 0.8).unwrap(), 0.8, 0.0).unwrap();
    assert!((back - x).norm() < 1e-9);
    let evo = flat(3.0, 10);
    let back = evo.propagate(evo.propagate(x, 0.0, 0.8).unwrap(), 0.8, 0.0).unwrap();
    assert!((back - x).norm() < 1e-13);
}

#[test]
fn adjoint_is_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut rnd = || C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    for evo in [flat(2.0, 40), frw(2.0, 40)] {
        for _ in 0..100 {
            let f = [rnd(), rnd()];
            let phi: Vec<C64> = (0..evo.grid.len()).map(|_| rnd()).collect();
            let uf: Vec<C64> = (0..evo.grid.len()).map(|j| evo.row(j)[0] * f[0] + evo.row(j)[1] * f[1]).collect();
            let lhs = evo.m_inner(&uf, &phi);
            let rhs = evo.sigma_inner(f, evo.adjoint_apply(&phi).unwrap());
            assert!((lhs - rhs).norm() < 1e-13 * (1.0 + lhs.norm()));
        }
    }
}

#[test]
fn adjoint_of_a_layer() {
    let evo = flat(1.0, 20);
    let j = 27;
    let mut phi = vec![ZERO; evo.grid.len()];
    phi[j] = ONE;
    let w = evo.m_weights()[j];
    let got = evo.adjoint_apply(&phi).unwrap();
    assert!((got[0] - evo.c[j][0].conj() * w).norm() < 1e-15);
    assert!((got[1] + I * evo.s[j][0].conj() * w).norm() < 1e-15);
    assert!(matches!(evo.sample(|_| ONE, (0.5, 1.5)), Err(Error::WindowExceeded { .. })));
    assert!(matches!(evo.causal_propagator(1.2, 0.0), Err(Error::WindowExceeded { .. })));
}

#[test]
fn static_causal_propagator() {
    let evo = flat(0.0, 50);
    for (t1, t2) in [(0.3, 0.3), (0.5, -0.2), (-0.9, 0.4)] {
        let g = evo.causal_propagator(t1, t2).unwrap();
        assert!((g - (t1 - t2).sin()).norm() < 1e-14);
    }
    // slope +1 on the diagonal, as forced by U q U^* = i G
    let j = evo.grid.steps + 3;
    let d = (evo.uqu_kernel(j + 1, j) - evo.uqu_kernel(j - 1, j)) / (2.0 * evo.grid.dt() * I);
    assert!((d - 1.0).norm() < 1e-3);
}

#[test]
fn ccr_static_modes() {
    for fam in [CoefficientFamily::flat(1.0), CoefficientFamily::twisted(0.5, 1.0)] {
        for m in [-32, -5, 0, 1, 17, 32] {
            let evo = ModeEvolution::new(&fam, m as f64, TimeGrid::new(1.0, 100), Integrator::ClosedForm).unwrap();
            assert!(evo.verify_ccr(10).unwrap() < 1e-12, "{m}");
            assert!(evo.ccr_hermiticity(1) < 1e-12);
        }
    }
}

#[test]
fn ccr_frw_converges() {
    // the symplectic defect of RK4 accumulates at order 5
    let res: Vec<f64> = [250, 500, 1000, 2000].iter().map(|&n| frw(32.0, n).verify_ccr(n / 10).unwrap()).collect();
    assert!(res[3] < 1e-7, "{res:?}");
    assert!(res.windows(2).take(2).all(|w| (w[0] / w[1]).log2() > 3.8), "{res:?}");
    let evo = frw(4.0, 200);
    assert!(evo.ccr_hermiticity(1) < 1e-12);
    let g = evo.causal_propagator(0.3, 0.3).unwrap();
    assert!(g.norm() < 1e-15);
}

#[test]
fn guards() {
    let fam = CoefficientFamily::cosh_frw(1.0);
    assert!(matches!(
        ModeEvolution::new(&fam, 1.0, TimeGrid::new(1.0, 10), Integrator::ClosedForm),
        Err(Error::NotStationary(_))
    ));
    assert!(matches!(ModeEvolution::new(&fam, 32.0, TimeGrid::new(1.0, 10), Integrator::Rk4), Err(Error::CflViolation(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn wronskian_for_random_twists(w0 in -0.9f64..0.9, m in -32i32..=32) {
        let fam = CoefficientFamily::twisted(w0, 1.0);
        let evo = ModeEvolution::new(&fam, m as f64, TimeGrid::new(1.0, 40), Integrator::ClosedForm).unwrap();
        prop_assert!(evo.wronskian_defect() < 1e-12);
    }
}
