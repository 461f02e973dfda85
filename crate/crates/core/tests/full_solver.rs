use proptest::prelude::*;
use sheath::euler_limit::{BoundaryMode, FluidState, InitialData, InitialPreset};
use sheath::euler_poisson::{
    energy_functional, quasineutrality_residual, solve_poisson, step_full, FullSolver, PlasmaParams,
};
use sheath::Grid1D;

fn wall(eps: f64, phi_b: f64) -> PlasmaParams {
    PlasmaParams::new(1.0, eps, phi_b, BoundaryMode::Wall, 1.0).unwrap()
}

#[test]
fn debye_rescaling_maps_runs_onto_each_other() {
    let eps = 0.05;
    let grid = Grid1D::graded(1.0, eps / 16.0, 1.05, 0.01).unwrap();
    let big = grid.scaled(1.0 / eps);
    let init = InitialData::default_bump(1.0).sample(&grid, 1.0).unwrap();
    let small = PlasmaParams::new(1.0, eps, 0.3, BoundaryMode::Wall, 1.0).unwrap();
    let unit = PlasmaParams::new(1.0, 1.0, 0.3, BoundaryMode::Wall, 1.0 / eps).unwrap();
    let mut a = FullSolver::new(grid, small, init.clone(), 0.4).unwrap();
    let mut b = FullSolver::new(big, unit, init, 0.4).unwrap();
    a.advance_to(0.02, |_, _| {}).unwrap();
    b.advance_to(0.02 / eps, |_, _| {}).unwrap();
    assert_eq!(a.steps(), b.steps());
    let diff = |p: &[f64], q: &[f64]| p.iter().zip(q).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(diff(&a.state().n, &b.state().n) < 1e-10);
    assert!(diff(&a.state().u, &b.state().u) < 1e-10);
    assert!(diff(&a.field().phi, &b.field().phi) < 1e-10);
}

#[test]
fn interior_neutrality_improves_with_epsilon() {
    let residual_at = |eps: f64| {
        let grid = Grid1D::graded(1.0, eps / 32.0, 1.03, 2e-3).unwrap();
        let n: Vec<f64> = grid
            .centers()
            .iter()
            .map(|x| 1.0 + 0.1 * (-((x - 0.5) / 0.1f64).powi(2)).exp())
            .collect();
        let s = FluidState::new(n, vec![0.0; grid.len()], 0.0).unwrap();
        let f = solve_poisson(&s.n, &grid, &wall(eps, 0.5)).unwrap();
        (
            quasineutrality_residual(&s, &f, &grid, 10.0 * eps),
            quasineutrality_residual(&s, &f, &grid, 0.0),
        )
    };
    let (a, wall_a) = residual_at(0.04);
    let (b, _) = residual_at(0.02);
    assert!(a / b >= 2.0, "{a:e} -> {b:e}");
    assert!(wall_a > 0.1, "layer not visible: {wall_a}");
}

#[test]
fn energy_scales_with_domain_length() {
    for length in [1.0, 2.0] {
        let cells = (40.0 * length) as usize;
        let grid = Grid1D::uniform(length, cells).unwrap();
        let p = PlasmaParams::new(1.0, 0.05, 0.0, BoundaryMode::Wall, length).unwrap();
        let s = FluidState::constant(cells, 1.0, 2.0).unwrap();
        let f = solve_poisson(&s.n, &grid, &p).unwrap();
        let e = energy_functional(&s, &f, &p, &grid).unwrap();
        assert!((e.kinetic - 2.0 * length).abs() < 1e-12);
        assert!((e.ion_entropy + length).abs() < 1e-12);
        assert!((e.electron_term - length).abs() < 1e-12);
        assert!((e.total - 2.0 * length).abs() < 1e-12);
    }
}

#[test]
fn wall_run_conserves_mass() {
    let grid = Grid1D::graded(1.0, 0.05 / 16.0, 1.05, 0.01).unwrap();
    let init = InitialData::default_bump(1.0).sample(&grid, 1.0).unwrap();
    let mut solver = FullSolver::new(grid, wall(0.05, 0.4), init, 0.4).unwrap();
    let m0 = solver.mass();
    solver.advance_to(0.05, |s, _| assert!((s.mass() - m0).abs() < 1e-13)).unwrap();
    assert!(solver.state().n.iter().all(|n| *n > 0.0));
}

#[test]
fn unresolved_layer_is_rejected() {
    let grid = Grid1D::uniform(1.0, 20).unwrap();
    let s = FluidState::constant(20, 1.0, 0.0).unwrap();
    assert!(FullSolver::new(grid, wall(0.05, 0.0), s, 0.4).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn newton_is_monotone_and_obeys_the_maximum_principle(
        phi_b in -2.0f64..2.0,
        amplitude in -0.6f64..1.5,
        center in 0.0f64..1.0,
        width in 0.01f64..0.4,
        eps in 0.01f64..0.05,
    ) {
        let grid = Grid1D::graded(1.0, eps / 16.0, 1.05, 5e-3).unwrap();
        let n: Vec<f64> = grid
            .centers()
            .iter()
            .map(|x| 1.0 + amplitude * (-((x - center) / width).powi(2)).exp())
            .collect();
        let f = solve_poisson(&n, &grid, &wall(eps, phi_b)).unwrap();
        prop_assert!(f.residual_history.windows(2).all(|w| w[1] < w[0]));
        let n_max = n.iter().copied().fold(f64::MIN, f64::max);
        let n_min = n.iter().copied().fold(f64::MAX, f64::min);
        let lo = phi_b.min(-n_max.ln()) - 1e-10;
        let hi = phi_b.max(-n_min.ln()) + 1e-10;
        prop_assert!(f.phi.iter().all(|p| *p >= lo && *p <= hi));
        prop_assert_eq!(f.wall_value, phi_b);
    }

    #[test]
    fn quasineutral_constant_state_is_steady(c in 0.2f64..4.0, eps in 0.01f64..0.05) {
        let grid = Grid1D::graded(1.0, eps / 16.0, 1.1, 0.02).unwrap();
        let p = wall(eps, -c.ln());
        let s = FluidState::constant(grid.len(), c, 0.0).unwrap();
        let f = solve_poisson(&s.n, &grid, &p).unwrap();
        let (next, field) = step_full(&s, &f, &p, &grid, 0.4).unwrap();
        prop_assert!(next.n.iter().all(|n| (n - c).abs() < 1e-12 * c));
        prop_assert!(next.u.iter().all(|u| u.abs() < 1e-12));
        prop_assert!(field.phi.iter().all(|v| (v + c.ln()).abs() < 1e-12));
    }

    #[test]
    fn outflow_mass_balance_holds_per_step(u_b in -0.9f64..-0.05, eps in 0.02f64..0.05) {
        let grid = Grid1D::graded(1.0, eps / 16.0, 1.08, 0.02).unwrap();
        let p = PlasmaParams::new(1.0, eps, 0.0, BoundaryMode::Outflow { u_b }, 1.0).unwrap();
        let init = InitialData { preset: InitialPreset::Flat, amplitude: 0.0, center: 0.5, width: 0.1 };
        let s = init.sample(&grid, 1.0).unwrap();
        let s = FluidState::new(s.n, vec![u_b; grid.len()], 0.0).unwrap();
        let mut solver = FullSolver::new(grid, p, s, 0.4).unwrap();
        for _ in 0..10 {
            let before = solver.mass();
            let report = solver.step(None).unwrap();
            prop_assert!(report.boundary_mass_in < 0.0);
            prop_assert!((solver.mass() - before - report.boundary_mass_in).abs() < 1e-14);
        }
    }
}
