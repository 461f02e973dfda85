//! Acceptance checks 1 through 11. Each prints one PASS/FAIL line; the
//! process exits nonzero if any check fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::time::{Duration, Instant};

use common::{closed_form_profile, max_diff, shooting_profile};
use sheath::diagnostics::{fit_rate, residual_sweep, run_convergence_study, StudyConfig, StudyResult};
use sheath::euler_limit::{BoundaryMode, FluidState, InitialData, InitialPreset};
use sheath::euler_poisson::{electron_mass, solve_poisson, FullSolver, PlasmaParams};
use sheath::profiles::{
    hamiltonian, solve_leading_profile, solve_linear_corrector, CorrectorProblem, SheathParams,
};
use sheath::Grid1D;

struct Check {
    id: usize,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn check(id: usize, name: &'static str, pass: bool, detail: String) -> Check {
    Check { id, name, pass, detail }
}

fn list(values: &[f64]) -> String {
    let items: Vec<String> = values.iter().map(|v| format!("{v:.3e}")).collect();
    format!("[{}]", items.join(", "))
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

fn c1_profile_closed_form() -> Check {
    let start = Instant::now();
    let prof = solve_leading_profile(&SheathParams::new(1.0, 1.0, 1.0).unwrap()).unwrap();
    let elapsed = start.elapsed();
    let nodes = prof.z().iter().copied().take_while(|z| *z <= 10.0);
    let fine = (0..=20_000).map(|k| k as f64 * 5e-4);
    let err = nodes
        .chain(fine)
        .map(|z| (prof.eval(z).0 - closed_form_profile(1.0, z)).abs())
        .fold(0.0, f64::max);
    check(
        1,
        "sheath profile vs closed form",
        err <= 1e-8 && elapsed < Duration::from_secs(1),
        format!("max error {err:.3e} (tol 1e-8), runtime {:.3}s (limit 1s)", secs(elapsed)),
    )
}

fn c2_hamiltonian() -> Check {
    let mut worst = 0.0f64;
    for gamma in [0.5, 1.0, 2.0] {
        for temp in [0.5, 1.0, 2.0] {
            for psi in [-1.0, 0.5, 2.0] {
                let p = SheathParams::new(gamma, temp, psi).unwrap();
                let prof = solve_leading_profile(&p).unwrap();
                for (dp, phi) in prof.dphi().iter().zip(prof.phi()) {
                    worst = worst.max(hamiltonian(*dp, *phi, &p).abs());
                }
            }
        }
    }
    check(2, "Hamiltonian invariance (27 profiles)", worst <= 1e-8, format!("max |H| {worst:.3e} (tol 1e-8)"))
}

fn c3_shooting() -> Check {
    let mut worst = 0.0f64;
    for (gamma, temp, psi) in [(1.0, 1.0, 1.0), (2.0, 0.5, -1.0)] {
        let prof = solve_leading_profile(&SheathParams::new(gamma, temp, psi).unwrap()).unwrap();
        let shot = shooting_profile(gamma, temp, psi, 2e-3, 10.0, 1e-8);
        let z_shot = shot.last().unwrap().0;
        for (z, phi) in &shot {
            worst = worst.max((prof.eval(*z).0 - phi).abs());
        }
        // beyond the well-conditioned part of the shot both solutions are below 1e-8 |ψ|
        if z_shot < 10.0 {
            for k in 0..=1000 {
                let z = z_shot + (10.0 - z_shot) * k as f64 / 1000.0;
                worst = worst.max(prof.eval(z).0.abs());
            }
        }
    }
    check(3, "stable manifold vs shooting oracle", worst <= 1e-7, format!("max difference {worst:.3e} (tol 1e-7)"))
}

fn c4_corrector() -> Check {
    let p = SheathParams::new(1.0, 1.0, 0.0).unwrap();
    let flat = solve_leading_profile(&p).unwrap();
    let forcing = |z: f64| 2.0 * (-2.0 * z).exp();
    let err = |cells: usize| {
        let mut problem = CorrectorProblem::new(&flat, &forcing, 1.0);
        problem.grid_cells = cells;
        let sol = solve_linear_corrector(&problem, &p).unwrap();
        sol.z.iter().zip(&sol.value).map(|(z, v)| (v - (-2.0 * z).exp()).abs()).fold(0.0, f64::max)
    };
    let (coarse, fine) = (err(2048), err(4096));
    let ratio = coarse / fine;
    check(
        4,
        "linear corrector manufactured solution",
        fine <= 1e-6 && ratio >= 3.5,
        format!("error at 4096 cells {fine:.3e} (tol 1e-6), ratio 2048/4096 {ratio:.2} (min 3.5)"),
    )
}

fn c5_poisson() -> Check {
    let (eps, c) = (0.05, 0.5);
    let params = PlasmaParams::new(1.0, eps, c, BoundaryMode::Wall, 1.0).unwrap();
    let mut worst = 0.0f64;
    let mut iterations = 0;
    let mut monotone = true;
    for grid in [
        Grid1D::uniform(1.0, 2000).unwrap(),
        Grid1D::graded(1.0, eps / 64.0, 1.02, eps / 16.0).unwrap(),
    ] {
        let exact: Vec<f64> = grid.centers().iter().map(|x| c * (-x / eps).exp()).collect();
        let n: Vec<f64> = exact.iter().map(|p| p + (-p).exp()).collect();
        let f = solve_poisson(&n, &grid, &params).unwrap();
        worst = worst.max(max_diff(&f.phi, &exact));
        iterations = iterations.max(f.iterations());
        monotone &= f.residual_history.windows(2).all(|w| w[1] < w[0]);
    }
    check(
        5,
        "Poisson-Boltzmann Newton manufactured solution",
        worst <= 1e-8 && iterations <= 12 && monotone,
        format!("max error {worst:.3e} (tol 1e-8), iterations {iterations} (max 12), residual strictly decreasing: {monotone}"),
    )
}

/// Max relative drift of the energy functional over a run, with the
/// variant whose electron term is `-(1+φ)e^{-φ}` alongside.
fn energy_drift(grid: Grid1D) -> (f64, f64, f64) {
    let eps = 0.05;
    let params = PlasmaParams::new(1.0, eps, 0.0, BoundaryMode::Wall, 1.0).unwrap();
    let init = InitialData::default_bump(1.0).sample(&grid, 1.0).unwrap();
    let mut solver = FullSolver::new(grid.clone(), params, init, 0.4).unwrap();
    let total = |s: &FullSolver| {
        let e = s.energy().unwrap();
        (e.total, e.total - 2.0 * electron_mass(s.field(), s.grid()))
    };
    let (e0, c0) = total(&solver);
    let m0 = solver.mass();
    let (mut drift, mut corrected, mut mass) = (0.0f64, 0.0f64, 0.0f64);
    solver
        .advance_to(0.2, |s, _| {
            let (e, c) = total(s);
            drift = drift.max((e - e0).abs() / (e0 + 1.0).abs());
            corrected = corrected.max((c - c0).abs() / (c0 + 1.0).abs());
            mass = mass.max((s.mass() - m0).abs());
        })
        .unwrap();
    (drift, corrected, mass)
}

fn c6_energy() -> Check {
    let start = Instant::now();
    let reference = Grid1D::graded(1.0, 0.05 / 16.0, 1.05, 5e-3).unwrap();
    let refined = reference.refined();
    let (d1, c1, m1) = energy_drift(reference);
    let (d2, c2, m2) = energy_drift(refined);
    let elapsed = start.elapsed();
    let factor = d1 / d2;
    println!(
        "  info: functional with electron term -(1+phi)e^-phi drifts {c1:.3e} -> {c2:.3e} (factor {:.2}); mass drift {:.1e}, {:.1e}",
        c1 / c2,
        m1,
        m2
    );
    check(
        6,
        "energy conservation",
        d1 <= 1e-3 && factor >= 3.0 && elapsed < Duration::from_secs(120),
        format!(
            "drift {d1:.3e} (tol 1e-3), refined {d2:.3e}, shrink factor {factor:.2} (min 3), runtime {:.1}s (limit 120s)",
            secs(elapsed)
        ),
    )
}

fn study_config() -> StudyConfig {
    StudyConfig {
        base: PlasmaParams::new(1.0, 0.04, 0.5, BoundaryMode::Wall, 1.0).unwrap(),
        eps_list: vec![0.04, 0.02, 0.01, 0.005],
        t_end: 0.2,
        samples: 20,
        initial: InitialData {
            preset: InitialPreset::Pulse,
            amplitude: 0.1,
            center: 0.4,
            width: 0.12,
        },
        order: 1,
        cfl: 0.4,
        limit_cells: 2000,
        limit_samples: 100,
        layer_resolution: 16.0,
        grading_ratio: 1.05,
        interior_width: 1e-3,
    }
}

fn column(study: &StudyResult, name: &str) -> Vec<f64> {
    study.records.iter().map(|r| r.column(name).unwrap()).collect()
}

fn fit_summary(study: &StudyResult, name: &str) -> (f64, f64) {
    study.fit(name).map_or((f64::NAN, f64::NAN), |f| (f.slope, f.r_squared))
}

fn c7_rate(study: &StudyResult, elapsed: Duration) -> Check {
    let (sn, rn) = fit_summary(study, "l2_n");
    let (su, ru) = fit_summary(study, "l2_u");
    let window = |s: f64, r: f64| (0.4..=0.75).contains(&s) && r >= 0.9;
    check(
        7,
        "O(sqrt eps) rate of sup_t L2 errors",
        study.is_complete() && window(sn, rn) && window(su, ru) && elapsed < Duration::from_secs(1800),
        format!(
            "n: slope {sn:.3} r2 {rn:.3}; u: slope {su:.3} r2 {ru:.3} (window [0.4,0.75], r2 >= 0.9); runtime {:.1}s (limit 1800s)",
            secs(elapsed)
        ),
    )
}

fn c8_linf(study: &StudyResult) -> Check {
    let values = column(study, "linf_n_bl");
    let monotone = values.windows(2).all(|w| w[1] < w[0]);
    let (slope, _) = fit_summary(study, "linf_n_bl");
    check(
        8,
        "L-infinity error with layer corrector",
        study.is_complete() && monotone && slope >= 0.7,
        format!("values {}, monotone: {monotone}, slope {slope:.3} (min 0.7)", list(&values)),
    )
}

fn c9_residuals(config: &StudyConfig) -> Check {
    let eps = [0.04, 0.02, 0.01];
    let times = config.sample_times();
    let sweep = |order: usize| {
        let bundle = config.build_bundle(order).unwrap();
        residual_sweep(&bundle, &config.base, &eps, &times, config.interior_width).unwrap()
    };
    let (r0, r1) = (sweep(0), sweep(1));
    let at = |r: &[sheath::diagnostics::ResidualRecord]| *r.iter().find(|x| x.epsilon == 0.02).unwrap();
    let (a, b) = (at(&r0), at(&r1));
    let slope = |r: &[sheath::diagnostics::ResidualRecord]| {
        fit_rate(&r.iter().map(|x| (x.epsilon, x.r_n)).collect::<Vec<_>>()).unwrap().slope
    };
    let (s0, s1) = (slope(&r0), slope(&r1));
    let smaller_n = b.r_n < a.r_n;
    let smaller_u = b.r_u < a.r_u;
    check(
        9,
        "residual hierarchy order 1 vs order 0",
        smaller_n && smaller_u && s1 - s0 >= 0.6,
        format!(
            "eps=0.02: r_n {:.3e} -> {:.3e}, r_u {:.3e} -> {:.3e}; r_n slopes {s0:.3} -> {s1:.3} (gain {:.3}, min 0.6)",
            a.r_n,
            b.r_n,
            a.r_u,
            b.r_u,
            s1 - s0
        ),
    )
}

fn c10_entropy(study: &StudyResult) -> Check {
    let min = study.records.iter().map(|r| r.entropy_min).fold(f64::INFINITY, f64::min);
    let sup = column(study, "entropy_sup");
    let decreasing = sup.windows(2).all(|w| w[1] < w[0]);
    check(
        10,
        "relative entropy",
        study.is_complete() && min >= 0.0 && decreasing,
        format!("min over samples {min:.3e}, sup per eps {}, decreasing: {decreasing}", list(&sup)),
    )
}

fn c11_outflow() -> Check {
    let eps = 0.02;
    let u_b = -0.3;
    let params = PlasmaParams::new(1.0, eps, 0.0, BoundaryMode::Outflow { u_b }, 1.0).unwrap();
    let grid = Grid1D::graded(1.0, eps / 16.0, 1.05, 2.5e-3).unwrap();
    let init = FluidState::constant(grid.len(), 1.0, u_b).unwrap();
    let mut solver = FullSolver::new(grid, params, init, 0.4).unwrap();
    let mut previous = solver.mass();
    let (mut monotone, mut defect) = (true, 0.0f64);
    let outcome = solver.advance_to(0.2, |s, r| {
        let m = s.mass();
        monotone &= m < previous;
        defect = defect.max((m - previous - r.boundary_mass_in).abs());
        previous = m;
    });
    let finite = solver.state().n.iter().chain(&solver.state().u).all(|v| v.is_finite());
    check(
        11,
        "outflow mode",
        outcome.is_ok() && finite && monotone && defect <= 1e-13,
        format!(
            "reached t={:.3} in {} steps, mass decreasing: {monotone}, max per-step balance defect {defect:.2e} (tol 1e-13)",
            solver.time(),
            solver.steps()
        ),
    )
}

fn main() {
    let mut checks = vec![c1_profile_closed_form(), c2_hamiltonian(), c3_shooting(), c4_corrector(), c5_poisson()];
    checks.push(c6_energy());

    let config = study_config();
    let start = Instant::now();
    let study = run_convergence_study(&config, 4).unwrap();
    let elapsed = start.elapsed();
    print!("{}", study.study_csv());
    checks.push(c7_rate(&study, elapsed));
    checks.push(c8_linf(&study));
    checks.push(c9_residuals(&config));
    checks.push(c10_entropy(&study));
    checks.push(c11_outflow());

    let mut failed = 0;
    for c in &checks {
        let status = if c.pass { "PASS" } else { "FAIL" };
        println!("criterion {:2} {status} {}: {}", c.id, c.name, c.detail);
        failed += usize::from(!c.pass);
    }
    println!("acceptance: {} passed, {failed} failed", checks.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
