use std::f64::consts::{LN_2, TAU};

use ndarray::Array1;
use num_complex::Complex64 as C64;
use proptest::prelude::*;

use finite_bath::dynamics::{
    apply_hamiltonian, energy, evolve_ode, initial_state_excited, initial_state_subspace_random,
    initial_state_superposition, BasisLayout,
};
use finite_bath::harness::scenario::time_grid;
use finite_bath::metrics::deviation_d2;
use finite_bath::observables::{band_kernel, entropy, purity, reduce, ReducedState};
use finite_bath::{build_model, build_propagator, FiniteBathModel, ModelParams, PureState, Trajectory};

fn model(n1: usize, n2: usize, band_width: f64, lambda: f64, seed: u64) -> FiniteBathModel {
    build_model(ModelParams { n1, n2, band_width, lambda, seed_coupling: seed, ..ModelParams::paper() }).unwrap()
}

fn max_diff(a: &PureState, b: &PureState) -> f64 {
    a.amplitudes().iter().zip(b.amplitudes()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn any_state(m: &FiniteBathModel, kind: u8, seed: u64, p: f64) -> PureState {
    match kind % 3 {
        0 => initial_state_excited(m, seed),
        1 => initial_state_superposition(m, seed),
        _ => initial_state_subspace_random(m, p, seed).unwrap(),
    }
}

fn dirichlet(width: f64, n: usize, t: f64) -> f64 {
    let x = width * t / (2.0 * n as f64);
    if x.sin().abs() < 1e-300 {
        return 1.0;
    }
    ((width * t / 2.0).sin() / (n as f64 * x.sin())).abs()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn initial_states_are_normalized(n1 in 1usize..40, n2 in 1usize..40, seed in any::<u64>(), kind in 0u8..3, p in 0.0f64..=1.0) {
        let m = model(n1, n2, 0.5, 5e-3, 1);
        let s = any_state(&m, kind, seed, p);
        prop_assert!((s.norm() - 1.0).abs() <= 1e-12);
        let rho = reduce(&s).unwrap();
        prop_assert!(rho.validate().is_ok());
    }

    #[test]
    fn evolution_conserves_norm_sectors_and_energy(
        n1 in 2usize..24, n2 in 2usize..24, seed in any::<u64>(), kind in 0u8..3,
        p in 0.0f64..=1.0, t in -3000.0f64..3000.0, lambda in 1e-4f64..2e-2,
    ) {
        let m = model(n1, n2, 0.5, lambda, seed);
        let prop = build_propagator(&m).unwrap();
        let s0 = any_state(&m, kind, seed ^ 0x5a5a, p);
        let s = prop.evolve(&s0, t);
        let layout = BasisLayout::of(&m);

        prop_assert!((s.norm() - 1.0).abs() <= 1e-10);
        prop_assert!((s.weight(layout.coupled()) - s0.weight(layout.coupled())).abs() <= 1e-10);
        for r in [layout.ground_lower(), layout.excited_upper()] {
            for (a, b) in s.block(r.clone()).iter().zip(s0.block(r)) {
                prop_assert!((a.norm() - b.norm()).abs() <= 1e-12);
            }
        }
        let (e0, e1) = (energy(&m, &s0), energy(&m, &s));
        prop_assert!((e1 - e0).abs() <= 1e-9 * e0.abs().max(1.0));

        let rho = reduce(&s).unwrap();
        prop_assert!((rho.trace() - 1.0).abs() <= 1e-10);
        prop_assert!(rho.eigenvalues()[0] >= -1e-10);
    }

    #[test]
    fn spectral_matches_ode_on_small_models(n in 4usize..=50, seed in any::<u64>(), kind in 0u8..3, t_end in 10.0f64..500.0) {
        let m = model(n, n, 0.5, 0.5 / (2.0 * n as f64), seed);
        let prop = build_propagator(&m).unwrap();
        let s0 = any_state(&m, kind, seed, 0.75);
        let grid = [0.0, t_end / 3.0, t_end];
        let exact = prop.evolve_many(&s0, &grid);
        let oracle = evolve_ode(&m, &s0, &grid).unwrap();
        for (a, b) in exact.iter().zip(&oracle) {
            prop_assert!(max_diff(a, b) <= 1e-6);
        }
    }

    #[test]
    fn deviation_is_symmetric_and_shift_invariant(
        values in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 3..200),
        shift in -10.0f64..10.0,
    ) {
        let grid: Vec<f64> = (0..values.len()).map(|i| 0.5 * i as f64).collect();
        let tau = grid[grid.len() - 1];
        let a: Vec<f64> = values.iter().map(|v| v.0).collect();
        let b: Vec<f64> = values.iter().map(|v| v.1).collect();
        let ab = deviation_d2(&a, &b, &grid, tau).unwrap().d_squared;
        let ba = deviation_d2(&b, &a, &grid, tau).unwrap().d_squared;
        prop_assert_eq!(ab, ba);
        let a2: Vec<f64> = a.iter().map(|x| x + shift).collect();
        let b2: Vec<f64> = b.iter().map(|x| x + shift).collect();
        let shifted = deviation_d2(&a2, &b2, &grid, tau).unwrap().d_squared;
        prop_assert!((shifted - ab).abs() <= 1e-12 * (1.0 + shift.abs()).powi(2));
        prop_assert_eq!(deviation_d2(&a, &a, &grid, tau).unwrap().d_squared, 0.0);
    }

    #[test]
    fn entropy_and_purity_bounds(p in 0.0f64..=1.0, r in 0.0f64..=1.0, phase in 0.0f64..TAU) {
        let bound = (p * (1.0 - p)).sqrt();
        let rho = ReducedState::new(1.0 - p, p, C64::from_polar(r * bound, phase));
        let s = entropy(&rho);
        let pu = purity(&rho);
        prop_assert!((-1e-12..=LN_2 + 1e-12).contains(&s));
        prop_assert!((0.5 - 1e-12..=1.0 + 1e-12).contains(&pu));
        if (r - 1.0).abs() < 1e-15 {
            prop_assert!(s < 1e-6);
        }
    }
}

#[test]
fn spectral_matches_ode_at_twenty_levels() {
    let m = model(20, 20, 0.5, 0.0125, 3);
    let prop = build_propagator(&m).unwrap();
    let grid = time_grid(0.0, 200.0, 10.0);
    for s0 in [
        initial_state_excited(&m, 1),
        initial_state_superposition(&m, 2),
        initial_state_subspace_random(&m, 0.75, 3).unwrap(),
    ] {
        let exact = prop.evolve_many(&s0, &grid);
        let oracle = evolve_ode(&m, &s0, &grid).unwrap();
        let worst = exact.iter().zip(&oracle).map(|(a, b)| max_diff(a, b)).fold(0.0, f64::max);
        assert!(worst <= 1e-6, "max amplitude difference {worst:e}");
    }
}

#[test]
fn hamiltonian_is_hermitian_as_an_operator() {
    let m = model(7, 5, 0.5, 0.03, 9);
    let dim = BasisLayout::of(&m).dim();
    let basis = |k: usize| {
        let mut e = Array1::<C64>::zeros(dim);
        e[k] = C64::new(1.0, 0.0);
        e
    };
    let cols: Vec<Array1<C64>> = (0..dim).map(|k| apply_hamiltonian(&m, &basis(k))).collect();
    for i in 0..dim {
        for j in 0..dim {
            assert!((cols[j][i] - cols[i][j].conj()).norm() <= 1e-15);
        }
    }
}

#[test]
fn band_kernel_matches_dirichlet_closed_form() {
    let m = build_model(ModelParams::paper()).unwrap();
    let grid = time_grid(0.0, 6500.0, 0.5);
    let f = band_kernel(&m, &grid);
    for (t, z) in grid.iter().zip(&f) {
        assert!((z.norm() - dirichlet(0.5, 500, *t)).abs() <= 1e-9, "t = {t}");
    }
    let first_zero = TAU / 0.5;
    assert!((first_zero - 12.566).abs() < 1e-3);
    let zero = band_kernel(&m, &[first_zero])[0].norm();
    assert!(zero <= 1e-12);
    let late_max =
        grid.iter().zip(&f).filter(|(t, _)| (15.0..=6000.0).contains(*t)).map(|(_, z)| z.norm()).fold(0.0, f64::max);
    assert!(late_max <= 0.3, "max |f| on [15, 6000] = {late_max}");
    let period = TAU * 500.0 / 0.5;
    let at_period = band_kernel(&m, &[period])[0].norm();
    assert!((at_period - 1.0).abs() <= 1e-9);
    assert!((period - 6283.2).abs() < 0.1);
}

#[test]
fn constant_offset_deviation_is_exact() {
    let grid = time_grid(0.0, 2000.0, 1.0);
    let a: Vec<f64> = grid.iter().map(|t| (-t / 700.0).exp()).collect();
    let b: Vec<f64> = a.iter().map(|x| x + 0.03).collect();
    let r = deviation_d2(&a, &b, &grid, 2000.0).unwrap();
    assert!((r.d_squared - 9e-4).abs() <= 1e-15);
    assert!((r.d - 0.03).abs() <= 1e-14);
}

#[test]
fn canonical_deviation_is_converged_in_the_grid_step() {
    let m = build_model(ModelParams::paper()).unwrap();
    let prop = build_propagator(&m).unwrap();
    let rates = finite_bath::ham::rates(m.params()).unwrap();
    let s0 = initial_state_excited(&m, 7);
    let d = |step: f64| {
        let grid = time_grid(0.0, 2000.0, step);
        let traj = Trajectory::simulate(&prop, &s0, &grid).unwrap();
        let ham = finite_bath::ham::predict_rho11(&rates, 1.0, 1.0, &grid).unwrap();
        deviation_d2(&traj.rho11(), &ham, &grid, 2000.0).unwrap().d_squared
    };
    let coarse = d(1.0);
    let fine = d(0.5);
    assert!((coarse - fine).abs() <= 0.01 * fine, "D² {coarse} vs {fine}");
}
