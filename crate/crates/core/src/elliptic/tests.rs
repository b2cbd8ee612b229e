use super::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn flat_slab(n_s: usize, k: f64) -> DiscreteEllipticSystem {
    let grid = SGrid::new(BoundaryCondition::DirichletSlab { l: 2.0 }, n_s).unwrap();
    assemble_k(&CoefficientFamily::flat(1.0), grid, YDiscretization::mode(k)).unwrap()
}

fn random_field(n: usize, rng: &mut ChaCha8Rng) -> Vec<C64> {
    (0..n).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect()
}

/// Applies the operator to samples of `f` and returns the worst deviation from `target` at nodes away from the ends.
fn consistency_error(sys: &DiscreteEllipticSystem, f: impl Fn(f64) -> C64, target: impl Fn(f64) -> C64) -> f64 {
    let u: Vec<C64> = sys.grid.nodes.iter().map(|&s| f(s)).collect();
    let ku = sys.apply(&u);
    let n = sys.grid.len();
    (2..n - 2).map(|i| (ku[i] - target(sys.grid.nodes[i])).norm()).fold(0.0, f64::max)
}

#[test]
fn grid_layout() {
    let g = SGrid::new(BoundaryCondition::DirichletSlab { l: 2.0 }, 41).unwrap();
    assert_eq!(g.len(), 39);
    assert!((g.h - 0.1).abs() < 1e-15);
    assert_eq!(g.nodes[g.center], 0.0);
    assert_eq!(g.offset(20), None);
    let p = SGrid::new(BoundaryCondition::Periodic { beta: 2.0 }, 41).unwrap();
    assert_eq!(p.len(), 41);
    assert_eq!(p.offset(21), Some(0));
    assert!(matches!(SGrid::new(BoundaryCondition::DirichletSlab { l: 2.0 }, 21), Err(Error::GridTooCoarse(_))));
    assert!(matches!(SGrid::new(BoundaryCondition::Periodic { beta: 2.0 }, 40), Err(Error::GridTooCoarse(_))));
}

#[test]
fn flat_zero_mode_is_second_difference_plus_mass() {
    let sys = flat_slab(41, 0.0);
    let h2 = sys.grid.h * sys.grid.h;
    let i = sys.grid.center;
    assert!((sys.matrix.diag[i][(0, 0)] - C64::from(2.0 / h2 + 1.0)).norm() < 1e-10);
    assert!((sys.matrix.upper[i][(0, 0)] + 1.0 / h2).norm() < 1e-10);
    assert!((sys.matrix.lower[i][(0, 0)] + 1.0 / h2).norm() < 1e-10);
}

#[test]
fn twisted_mode_operator_is_consistent() {
    // -u'' - 2 w0 k u' + ((1 - w0^2) k^2 + mu) u applied to u = exp(alpha s)
    let (w0, k, mu) = (0.5, 3.0, 1.0);
    let alpha = C64::new(0.7, 1.3);
    let target = |s: f64| {
        let u = (alpha * s).exp();
        u * (-alpha * alpha - 2.0 * w0 * k * alpha + (1.0 - w0 * w0) * k * k + mu)
    };
    let mut errs = Vec::new();
    for n_s in [201, 401] {
        let grid = SGrid::new(BoundaryCondition::DirichletSlab { l: 1.0 }, n_s).unwrap();
        let sys = assemble_k(&CoefficientFamily::twisted(w0, mu), grid, YDiscretization::mode(k)).unwrap();
        errs.push(consistency_error(&sys, |s| (alpha * s).exp(), target));
    }
    assert!(errs[0] < 1e-2 && (errs[0] / errs[1]).log2() > 1.9, "{errs:?}");
}

#[test]
fn cosh_scale_operator_is_consistent() {
    // -a^{-1} (a u')' + k^2/a^2 u + mu u with a = cos s
    let (k, mu) = (2.0, 1.0);
    let f = |s: f64| C64::from((1.5 * s).sin() + s * s);
    let target = |s: f64| {
        let (a, da) = (s.cos(), -s.sin());
        let (u, du, ddu) = ((1.5 * s).sin() + s * s, 1.5 * (1.5 * s).cos() + 2.0 * s, -2.25 * (1.5 * s).sin() + 2.0);
        C64::from(-(da * du + a * ddu) / a + k * k / (a * a) * u + mu * u)
    };
    let mut errs = Vec::new();
    for n_s in [201, 401] {
        let grid = SGrid::new(BoundaryCondition::DirichletSlab { l: 1.0 }, n_s).unwrap();
        let sys = assemble_k(&CoefficientFamily::cosh_frw(mu), grid, YDiscretization::mode(k)).unwrap();
        errs.push(consistency_error(&sys, f, target));
    }
    assert!((errs[0] / errs[1]).log2() > 1.9, "{errs:?}");
}

#[test]
fn green_value_at_zero_converges() {
    let slab = |n_s| {
        let sys = flat_slab(n_s, 0.0);
        (sys.solve(&sys.delta_at_zero()).unwrap()[sys.grid.center] - 2f64.tanh() / 2.0).norm()
    };
    let periodic = |n_s| {
        let grid = SGrid::new(BoundaryCondition::Periodic { beta: 2.0 }, n_s).unwrap();
        let sys = assemble_k(&CoefficientFamily::flat(1.0), grid, YDiscretization::mode(0.0)).unwrap();
        (sys.solve(&sys.delta_at_zero()).unwrap()[sys.grid.center] - 1.0 / (2.0 * 1f64.tanh())).norm()
    };
    for err in [slab as fn(usize) -> f64, periodic] {
        let (e1, e2) = (err(201), err(401));
        assert!(e1 < 1e-3 && (e1 / e2).log2() > 1.9, "{e1} {e2}");
    }
}

#[test]
fn zero_rhs_gives_zero() {
    let sys = flat_slab(41, 1.0);
    assert!(sys.solve(&vec![ZERO; sys.dim()]).unwrap().iter().all(|z| *z == ZERO));
}

#[test]
fn massless_periodic_zero_mode_is_singular() {
    let grid = SGrid::new(BoundaryCondition::Periodic { beta: 2.0 }, 41).unwrap();
    let sys = assemble_k(&CoefficientFamily::flat(0.0), grid, YDiscretization::mode(0.0)).unwrap();
    match sys.solve(&sys.delta_at_zero()) {
        Err(Error::SingularSystem { near_null, .. }) => {
            let first = near_null[0];
            assert!(near_null.iter().all(|z| (z - first).norm() < 1e-6 * first.norm()));
        }
        other => panic!("expected a singular system, got {other:?}"),
    }
}

#[test]
fn periodic_needs_stationary_coefficients() {
    let grid = SGrid::new(BoundaryCondition::Periodic { beta: 1.0 }, 41).unwrap();
    let err = assemble_k(&CoefficientFamily::cosh_frw(1.0), grid, YDiscretization::mode(1.0));
    assert!(matches!(err, Err(Error::NotStationary(_))));
}

#[test]
fn adjoint_relation() {
    let flat = flat_slab(101, 2.0);
    assert!(flat.adjoint_residual().unwrap() < 1e-13);
    let grid = SGrid::new(BoundaryCondition::Periodic { beta: 2.0 }, 101).unwrap();
    let tw = assemble_k(&CoefficientFamily::twisted(0.5, 1.0), grid, YDiscretization::mode(3.0)).unwrap();
    assert!(tw.adjoint_residual().unwrap() < 1e-12);
    let grid = SGrid::new(BoundaryCondition::DirichletSlab { l: 1.0 }, 401).unwrap();
    let frw = assemble_k(&CoefficientFamily::cosh_frw(1.0), grid, YDiscretization::mode(4.0)).unwrap();
    assert!(frw.adjoint_residual().unwrap() < 1e-10);
    let grid = SGrid::new(BoundaryCondition::DirichletSlab { l: 1.0 }, 41).unwrap();
    let two_d = assemble_k(
        &CoefficientFamily::twisted(0.5, 1.0),
        grid,
        YDiscretization::Grid { n_y: 6, circumference: std::f64::consts::TAU },
    )
    .unwrap();
    assert!(two_d.adjoint_residual().unwrap() < 1e-12);
}

#[test]
fn grid_operator_matches_lattice_modes() {
    let (n_y, circ) = (8, std::f64::consts::TAU);
    let hy = circ / n_y as f64;
    let fam = CoefficientFamily::twisted(0.5, 1.0);
    let grid = SGrid::new(BoundaryCondition::Periodic { beta: 2.0 }, 21).unwrap();
    let full = assemble_k(&fam, grid.clone(), YDiscretization::Grid { n_y, circumference: circ }).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let profile = random_field(grid.len(), &mut rng);
    for m in -3..=4 {
        let k = m as f64;
        let per = assemble_k(&fam, grid.clone(), YDiscretization::lattice_mode(k, hy)).unwrap();
        let phase = |l: usize| (I * k * l as f64 * hy).exp();
        let u2: Vec<C64> = profile.iter().flat_map(|p| (0..n_y).map(move |l| *p * phase(l))).collect();
        let ku2 = full.apply(&u2);
        let ku1 = per.apply(&profile);
        for (i, v) in ku1.iter().enumerate() {
            for l in 0..n_y {
                assert!((ku2[i * n_y + l] - v * phase(l)).norm() < 1e-10);
            }
        }
    }
}

#[test]
fn eta_form_positivity_and_value() {
    // u = sin(pi s / L) on (0, L), flat mode omega: eta = 2 int (u'^2 + omega^2 u^2) = (pi^2/L + omega^2 L)
    let (l, k) = (2.0, 1.0);
    let grid = SGrid::new(BoundaryCondition::DirichletSlab { l }, 801).unwrap();
    let sys = assemble_k(&CoefficientFamily::flat(1.0), grid, YDiscretization::mode(k)).unwrap();
    let u: Vec<C64> = sys.grid.nodes.iter().map(|&s| C64::from((std::f64::consts::PI * s / l).sin())).collect();
    let omega2 = k * k + 1.0;
    let exact = std::f64::consts::PI.powi(2) / l + omega2 * l;
    let eta = sys.eta_form(&u, &u, Side::Plus).unwrap();
    assert!((eta.re - exact).abs() < 1e-4 * exact && eta.im.abs() < 1e-14);

    let grid = SGrid::new(BoundaryCondition::Periodic { beta: 2.0 }, 101).unwrap();
    let tw = assemble_k(&CoefficientFamily::twisted(0.5, 1.0), grid, YDiscretization::mode(5.0)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for side in [Side::Plus, Side::Minus] {
        for _ in 0..20 {
            let v = random_field(tw.dim(), &mut rng);
            let e = tw.eta_form(&v, &v, side).unwrap();
            assert!(e.re >= 0.0 && e.im.abs() < 1e-10 * e.re);
        }
    }
    assert!(matches!(tw.eta_form(&u, &u, Side::Plus), Err(Error::RegionMismatch(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn solve_then_apply(seed in 0u64..1000, k in -8i32..8, periodic in any::<bool>()) {
        let bc = if periodic { BoundaryCondition::Periodic { beta: 2.0 } } else { BoundaryCondition::DirichletSlab { l: 2.0 } };
        let grid = SGrid::new(bc, 81).unwrap();
        let sys = assemble_k(&CoefficientFamily::twisted(0.5, 1.0), grid, YDiscretization::mode(k as f64)).unwrap();
        let rhs = random_field(sys.dim(), &mut ChaCha8Rng::seed_from_u64(seed));
        let u = sys.solve(&rhs).unwrap();
        prop_assert!(sys.solve_residual(&u, &rhs) < 1e-10);
    }

    #[test]
    fn kappa_is_involutive(seed in 0u64..1000) {
        let sys = flat_slab(41, 1.0);
        let u = random_field(sys.dim(), &mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(sys.kappa(&sys.kappa(&u)), u);
    }
}
