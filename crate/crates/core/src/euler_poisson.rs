//! Full Euler-Poisson system with Boltzmann electrons:
//! `n_t + (nu)_x = 0`, `u_t + u u_x + T^i (ln n)_x = φ_x`, `ε² φ_xx + e^{-φ} = n`.
//!
//! The potential lives at cell centers and is solved by damped Newton on a
//! compact fourth-order discretization. The fluid step reuses the
//! finite-volume operator of the limit solver with the ion sound speed
//! `sqrt(T^i)` and adds the momentum source `n φ_x`.

use crate::error::{Result, SheathError};
use crate::euler_limit::{check_cfl, check_density, BoundaryMode, FluidState, FvOperator, StepReport};
use crate::grid::Grid1D;
use crate::io;
use crate::numerics::{central_derivative, solve_tridiagonal};

pub const NEWTON_MAX_ITER: usize = 50;
pub const NEWTON_REL_TOL: f64 = 1e-10;
/// Minimum number of cells required inside `[0, 5ε]`.
pub const MIN_LAYER_CELLS: usize = 8;

pub const SNAPSHOT_CSV_HEADER: [&str; 6] = ["x", "n", "u", "phi", "dphi", "e_minus_phi"];
pub const ENERGY_CSV_HEADER: [&str; 6] = ["t", "kinetic", "ion_entropy", "electron_term", "field_term", "total"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlasmaParams {
    pub ion_temp: f64,
    pub epsilon: f64,
    pub wall_potential: f64,
    pub bc: BoundaryMode,
    pub domain_length: f64,
}

impl PlasmaParams {
    pub fn new(ion_temp: f64, epsilon: f64, wall_potential: f64, bc: BoundaryMode, domain_length: f64) -> Result<Self> {
        let p = Self {
            ion_temp,
            epsilon,
            wall_potential,
            bc,
            domain_length,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ion_temp > 0.0 && self.ion_temp.is_finite()) {
            return Err(SheathError::invalid(format!("ion_temp must be positive, got {}", self.ion_temp)));
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(SheathError::invalid(format!("epsilon must be in (0,1], got {}", self.epsilon)));
        }
        if !self.wall_potential.is_finite() {
            return Err(SheathError::invalid("wall_potential must be finite"));
        }
        if !(self.domain_length >= 20.0 * self.epsilon) {
            return Err(SheathError::invalid(format!(
                "domain_length must be at least 20 epsilon, got {} with epsilon {}",
                self.domain_length, self.epsilon
            )));
        }
        self.bc.validate_full(self.ion_temp)
    }

    /// Same parameters at another `ε`.
    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        Self::new(self.ion_temp, epsilon, self.wall_potential, self.bc, self.domain_length)
    }

    fn check_grid(&self, grid: &Grid1D) -> Result<()> {
        if (grid.length() - self.domain_length).abs() > 1e-12 * self.domain_length {
            return Err(SheathError::GridMismatch(format!(
                "grid length {} differs from domain_length {}",
                grid.length(),
                self.domain_length
            )));
        }
        Ok(())
    }
}

/// Potential at the cell centers together with its boundary values.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialField {
    pub phi: Vec<f64>,
    /// Central-difference `φ_x` at the cell centers.
    pub dphi: Vec<f64>,
    /// `φ(0) = φ_b`.
    pub wall_value: f64,
    /// `φ(L) = -ln n(L)`.
    pub far_value: f64,
    /// Final max-norm residual.
    pub newton_residual: f64,
    /// Max-norm residual before each iteration and after the last one.
    pub residual_history: Vec<f64>,
}

impl PotentialField {
    pub fn iterations(&self) -> usize {
        self.residual_history.len().saturating_sub(1)
    }

    /// `[φ(0), φ_0, .., φ_{N-1}, φ(L)]`, matching [`Grid1D::nodes_with_boundaries`].
    pub fn with_boundaries(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.phi.len() + 2);
        v.push(self.wall_value);
        v.extend_from_slice(&self.phi);
        v.push(self.far_value);
        v
    }
}

/// Compact three-point weights `(a_-, a_0, a_+)` applied to the right-hand
/// side, fourth-order on smoothly varying grids.
fn compact_weights(hm: f64, hp: f64) -> (f64, f64, f64) {
    let s = hp + hm;
    let a = (hp - hm) / 3.0;
    let b = (hp * hp - hp * hm + hm * hm) / 12.0;
    let am = a * (-hp / (hm * s)) + 2.0 * b / (hm * s);
    let a0 = 1.0 + a * (hp - hm) / (hp * hm) - 2.0 * b / (hm * hp);
    let ap = a * (hm / (hp * s)) + 2.0 * b / (hp * s);
    (am, a0, ap)
}

struct PoissonSystem {
    eps2: f64,
    /// Per cell: `(h_-, h_+)` to the neighbouring nodes.
    spacing: Vec<(f64, f64)>,
    weights: Vec<(f64, f64, f64)>,
    n: Vec<f64>,
    wall_phi: f64,
    wall_n: f64,
    far_phi: f64,
}

impl PoissonSystem {
    fn new(n: &[f64], grid: &Grid1D, params: &PlasmaParams) -> Self {
        let nodes = grid.nodes_with_boundaries();
        let spacing: Vec<(f64, f64)> = (1..nodes.len() - 1)
            .map(|i| (nodes[i] - nodes[i - 1], nodes[i + 1] - nodes[i]))
            .collect();
        let weights = spacing.iter().map(|(hm, hp)| compact_weights(*hm, *hp)).collect();
        let x = grid.centers();
        let wall_n = n[0] - (n[1] - n[0]) * x[0] / (x[1] - x[0]);
        Self {
            eps2: params.epsilon * params.epsilon,
            spacing,
            weights,
            n: n.to_vec(),
            wall_phi: params.wall_potential,
            wall_n,
            far_phi: -n[n.len() - 1].ln(),
        }
    }

    fn residual(&self, phi: &[f64]) -> Vec<f64> {
        let cells = phi.len();
        let g = |i: usize| self.n[i] - (-phi[i]).exp();
        let g_wall = self.wall_n - (-self.wall_phi).exp();
        (0..cells)
            .map(|i| {
                let (hm, hp) = self.spacing[i];
                let (am, a0, ap) = self.weights[i];
                let (pm, gm) = if i == 0 { (self.wall_phi, g_wall) } else { (phi[i - 1], g(i - 1)) };
                let (pp, gp) = if i + 1 == cells { (self.far_phi, 0.0) } else { (phi[i + 1], g(i + 1)) };
                let lap = 2.0 / (hm + hp) * ((pp - phi[i]) / hp - (phi[i] - pm) / hm);
                self.eps2 * lap - (am * gm + a0 * g(i) + ap * gp)
            })
            .collect()
    }

    fn jacobian(&self, phi: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let cells = phi.len();
        let mut lower = vec![0.0; cells];
        let mut diag = vec![0.0; cells];
        let mut upper = vec![0.0; cells];
        for i in 0..cells {
            let (hm, hp) = self.spacing[i];
            let (am, a0, ap) = self.weights[i];
            let c = self.eps2 * 2.0 / (hm + hp);
            diag[i] = -c * (1.0 / hp + 1.0 / hm) - a0 * (-phi[i]).exp();
            if i > 0 {
                lower[i] = c / hm - am * (-phi[i - 1]).exp();
            }
            if i + 1 < cells {
                upper[i] = c / hp - ap * (-phi[i + 1]).exp();
            }
        }
        (lower, diag, upper)
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, r| m.max(r.abs()))
}

fn check_densities(n: &[f64], grid: &Grid1D) -> Result<()> {
    if n.len() != grid.len() {
        return Err(SheathError::GridMismatch(format!(
            "density has {} cells, grid has {}",
            n.len(),
            grid.len()
        )));
    }
    for (cell, v) in n.iter().enumerate() {
        if !(*v > 0.0) || !v.is_finite() {
            return Err(SheathError::NonPositiveDensity { cell, value: *v });
        }
    }
    Ok(())
}

/// Solve `ε² φ_xx + e^{-φ} = n` with `φ(0) = φ_b`, `φ(L) = -ln n(L)`,
/// starting from `φ = -ln n`.
pub fn solve_poisson(n: &[f64], grid: &Grid1D, params: &PlasmaParams) -> Result<PotentialField> {
    solve_poisson_from(n, grid, params, None)
}

/// As [`solve_poisson`], optionally starting Newton from `guess`.
pub fn solve_poisson_from(
    n: &[f64],
    grid: &Grid1D,
    params: &PlasmaParams,
    guess: Option<&[f64]>,
) -> Result<PotentialField> {
    check_densities(n, grid)?;
    let sys = PoissonSystem::new(n, grid, params);
    let mut phi: Vec<f64> = match guess {
        Some(g) if g.len() == n.len() => g.to_vec(),
        Some(g) => {
            return Err(SheathError::GridMismatch(format!(
                "initial guess has {} cells, density has {}",
                g.len(),
                n.len()
            )))
        }
        None => n.iter().map(|v| -v.ln()).collect(),
    };
    let tol = NEWTON_REL_TOL * max_abs(n).max(1.0);
    let mut res = sys.residual(&phi);
    let mut norm = max_abs(&res);
    let mut history = vec![norm];
    while norm > tol {
        if history.len() > NEWTON_MAX_ITER {
            return Err(SheathError::NewtonFailure {
                iterations: NEWTON_MAX_ITER,
                residual: norm,
            });
        }
        let (lower, diag, upper) = sys.jacobian(&phi);
        let rhs: Vec<f64> = res.iter().map(|r| -r).collect();
        let delta = solve_tridiagonal(&lower, &diag, &upper, &rhs).ok_or(SheathError::NewtonFailure {
            iterations: history.len() - 1,
            residual: norm,
        })?;
        let mut step = 1.0;
        loop {
            let trial: Vec<f64> = phi.iter().zip(&delta).map(|(p, d)| p + step * d).collect();
            let trial_res = sys.residual(&trial);
            let trial_norm = max_abs(&trial_res);
            if trial_norm < norm {
                phi = trial;
                res = trial_res;
                norm = trial_norm;
                break;
            }
            step *= 0.5;
            if step < 1e-10 {
                return Err(SheathError::NewtonFailure {
                    iterations: history.len() - 1,
                    residual: norm,
                });
            }
        }
        history.push(norm);
    }
    let field_nodes = {
        let mut v = vec![sys.wall_phi];
        v.extend_from_slice(&phi);
        v.push(sys.far_phi);
        v
    };
    let dphi = central_derivative(&grid.nodes_with_boundaries(), &field_nodes);
    Ok(PotentialField {
        phi,
        dphi,
        wall_value: sys.wall_phi,
        far_value: sys.far_phi,
        newton_residual: norm,
        residual_history: history,
    })
}

/// Components of `½∫nu² + T^i∫n(ln n − 1) + ∫(1−φ)e^{−φ} + ε²/2∫φ_x²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyReport {
    pub kinetic: f64,
    pub ion_entropy: f64,
    pub electron_term: f64,
    pub field_term: f64,
    pub total: f64,
}

impl EnergyReport {
    pub fn csv_row(&self, t: f64) -> Vec<f64> {
        vec![t, self.kinetic, self.ion_entropy, self.electron_term, self.field_term, self.total]
    }
}

/// Midpoint quadrature of the energy; the field term integrates the
/// piecewise-linear interpolant of `φ` through the nodes and boundaries.
pub fn energy_functional(
    state: &FluidState,
    field: &PotentialField,
    params: &PlasmaParams,
    grid: &Grid1D,
) -> Result<EnergyReport> {
    check_densities(&state.n, grid)?;
    let w = grid.widths();
    let mut kinetic = 0.0;
    let mut ion_entropy = 0.0;
    let mut electron_term = 0.0;
    for i in 0..state.len() {
        let (n, u, phi) = (state.n[i], state.u[i], field.phi[i]);
        kinetic += 0.5 * n * u * u * w[i];
        ion_entropy += params.ion_temp * n * (n.ln() - 1.0) * w[i];
        electron_term += (1.0 - phi) * (-phi).exp() * w[i];
    }
    let nodes = grid.nodes_with_boundaries();
    let values = field.with_boundaries();
    let gradient_sq: f64 = nodes
        .windows(2)
        .zip(values.windows(2))
        .map(|(x, p)| (p[1] - p[0]).powi(2) / (x[1] - x[0]))
        .sum();
    let field_term = 0.5 * params.epsilon * params.epsilon * gradient_sq;
    Ok(EnergyReport {
        kinetic,
        ion_entropy,
        electron_term,
        field_term,
        total: kinetic + ion_entropy + electron_term + field_term,
    })
}

/// `∫ e^{−φ}`. Adding `2∫e^{−φ}` terms shifts [`EnergyReport::total`] to the
/// electron term `−(1+φ)e^{−φ}`, which is conserved exactly by the
/// continuous half-line problem even when the wall field varies.
pub fn electron_mass(field: &PotentialField, grid: &Grid1D) -> f64 {
    let e: Vec<f64> = field.phi.iter().map(|p| (-p).exp()).collect();
    grid.integrate(&e)
}

/// `max |n − e^{−φ}|` over cells with center beyond `exclusion`.
pub fn quasineutrality_residual(state: &FluidState, field: &PotentialField, grid: &Grid1D, exclusion: f64) -> f64 {
    grid.centers()
        .iter()
        .zip(state.n.iter().zip(&field.phi))
        .filter(|(x, _)| **x > exclusion)
        .map(|(_, (n, phi))| (n - (-phi).exp()).abs())
        .fold(0.0, f64::max)
}

/// Near-wall speed above which the a-priori bound used in the stability
/// analysis no longer holds: `sqrt(3 T^i) / 2`.
pub fn near_wall_speed_bound(ion_temp: f64) -> f64 {
    (3.0 * ion_temp).sqrt() / 2.0
}

/// Largest `|u|` over cells within `10ε` of the wall.
pub fn near_wall_speed(state: &FluidState, grid: &Grid1D, epsilon: f64) -> f64 {
    grid.centers()
        .iter()
        .zip(&state.u)
        .take_while(|(x, _)| **x <= 10.0 * epsilon)
        .map(|(_, u)| u.abs())
        .fold(0.0, f64::max)
}

pub fn snapshot_csv(state: &FluidState, field: &PotentialField, grid: &Grid1D) -> String {
    let e: Vec<f64> = field.phi.iter().map(|p| (-p).exp()).collect();
    io::csv_string(
        &SNAPSHOT_CSV_HEADER,
        &[grid.centers(), &state.n, &state.u, &field.phi, &field.dphi, &e],
    )
}

fn check_layer_resolution(grid: &Grid1D, epsilon: f64) -> Result<()> {
    let cells = grid.cells_below(5.0 * epsilon);
    if cells < MIN_LAYER_CELLS {
        return Err(SheathError::invalid(format!(
            "grid has {cells} cells inside [0, 5 epsilon]; at least {MIN_LAYER_CELLS} are required"
        )));
    }
    Ok(())
}

fn full_operator<'a>(grid: &'a Grid1D, params: &PlasmaParams) -> FvOperator<'a> {
    FvOperator {
        grid,
        sound_speed: params.ion_temp.sqrt(),
        bc: params.bc,
    }
}

fn momentum(state_n: &[f64], state_u: &[f64]) -> Vec<f64> {
    state_n.iter().zip(state_u).map(|(n, u)| n * u).collect()
}

/// Stable time step `cfl · min(w) / max(|u| + sqrt(T^i))`.
pub fn stable_dt(state: &FluidState, grid: &Grid1D, params: &PlasmaParams, cfl: f64) -> f64 {
    full_operator(grid, params).stable_dt(&state.n, &momentum(&state.n, &state.u), cfl)
}

/// One SSP-RK2 step with the CFL time step.
pub fn step_full(
    state: &FluidState,
    field: &PotentialField,
    params: &PlasmaParams,
    grid: &Grid1D,
    cfl: f64,
) -> Result<(FluidState, PotentialField)> {
    check_cfl(cfl)?;
    let dt = stable_dt(state, grid, params, cfl);
    let (s, f, _) = advance_full(state, field, params, grid, dt)?;
    Ok((s, f))
}

/// One SSP-RK2 step of size `dt`; `field` must be the potential of `state`.
/// The potential is re-solved after each stage.
pub fn advance_full(
    state: &FluidState,
    field: &PotentialField,
    params: &PlasmaParams,
    grid: &Grid1D,
    dt: f64,
) -> Result<(FluidState, PotentialField, StepReport)> {
    params.validate()?;
    params.check_grid(grid)?;
    check_densities(&state.n, grid)?;
    if field.phi.len() != state.len() {
        return Err(SheathError::GridMismatch("field and state sizes differ".into()));
    }
    let op = full_operator(grid, params);
    let cells = state.len();
    let rhs = |n: &[f64], m: &[f64], f: &PotentialField, dn: &mut [f64], dm: &mut [f64]| {
        let flux = op.rhs(n, m, dn, dm);
        for i in 0..cells {
            dm[i] += n[i] * f.dphi[i];
        }
        flux
    };
    let n0 = &state.n;
    let m0 = momentum(&state.n, &state.u);
    let mut dn = vec![0.0; cells];
    let mut dm = vec![0.0; cells];
    let f0 = rhs(n0, &m0, field, &mut dn, &mut dm);
    let n1: Vec<f64> = (0..cells).map(|i| n0[i] + dt * dn[i]).collect();
    let m1: Vec<f64> = (0..cells).map(|i| m0[i] + dt * dm[i]).collect();
    check_density(&n1, state.t + dt)?;
    let field1 = solve_poisson_from(&n1, grid, params, Some(&field.phi))?;
    let f1 = rhs(&n1, &m1, &field1, &mut dn, &mut dm);
    let n2: Vec<f64> = (0..cells).map(|i| 0.5 * (n0[i] + n1[i] + dt * dn[i])).collect();
    let m2: Vec<f64> = (0..cells).map(|i| 0.5 * (m0[i] + m1[i] + dt * dm[i])).collect();
    check_density(&n2, state.t + dt)?;
    let field2 = solve_poisson_from(&n2, grid, params, Some(&field1.phi))?;
    let u2 = n2.iter().zip(&m2).map(|(n, m)| m / n).collect();
    Ok((
        FluidState {
            n: n2,
            u: u2,
            t: state.t + dt,
        },
        field2,
        StepReport {
            dt,
            boundary_mass_in: 0.5 * dt * (f0 + f1),
        },
    ))
}

/// Stateful driver for the full system.
#[derive(Debug, Clone)]
pub struct FullSolver {
    grid: Grid1D,
    params: PlasmaParams,
    cfl: f64,
    state: FluidState,
    field: PotentialField,
    steps: usize,
    max_near_wall_speed: f64,
}

impl FullSolver {
    pub fn new(grid: Grid1D, params: PlasmaParams, initial: FluidState, cfl: f64) -> Result<Self> {
        params.validate()?;
        params.check_grid(&grid)?;
        check_cfl(cfl)?;
        check_layer_resolution(&grid, params.epsilon)?;
        check_densities(&initial.n, &grid)?;
        initial.validate()?;
        let field = solve_poisson(&initial.n, &grid, &params)?;
        let speed = near_wall_speed(&initial, &grid, params.epsilon);
        Ok(Self {
            grid,
            params,
            cfl,
            state: initial,
            field,
            steps: 0,
            max_near_wall_speed: speed,
        })
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn params(&self) -> &PlasmaParams {
        &self.params
    }

    pub fn state(&self) -> &FluidState {
        &self.state
    }

    pub fn field(&self) -> &PotentialField {
        &self.field
    }

    pub fn time(&self) -> f64 {
        self.state.t
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn mass(&self) -> f64 {
        self.state.mass(&self.grid)
    }

    pub fn energy(&self) -> Result<EnergyReport> {
        energy_functional(&self.state, &self.field, &self.params, &self.grid)
    }

    /// Largest near-wall speed seen so far.
    pub fn max_near_wall_speed(&self) -> f64 {
        self.max_near_wall_speed
    }

    /// True once the near-wall speed has exceeded `sqrt(3 T^i) / 2`.
    pub fn speed_warning(&self) -> bool {
        self.max_near_wall_speed > near_wall_speed_bound(self.params.ion_temp)
    }

    /// One step, shortened to land on `t_stop` if given.
    pub fn step(&mut self, t_stop: Option<f64>) -> Result<StepReport> {
        let mut dt = stable_dt(&self.state, &self.grid, &self.params, self.cfl);
        let mut snap = false;
        if let Some(t_stop) = t_stop {
            if self.state.t + dt >= t_stop - 1e-12 * dt {
                dt = t_stop - self.state.t;
                snap = true;
            }
        }
        let (mut state, field, report) = advance_full(&self.state, &self.field, &self.params, &self.grid, dt)?;
        if let (true, Some(t)) = (snap, t_stop) {
            state.t = t;
        }
        self.max_near_wall_speed = self
            .max_near_wall_speed
            .max(near_wall_speed(&state, &self.grid, self.params.epsilon));
        self.state = state;
        self.field = field;
        self.steps += 1;
        Ok(report)
    }

    /// Step until `t`, calling `on_step` after every step.
    pub fn advance_to(&mut self, t: f64, mut on_step: impl FnMut(&Self, &StepReport)) -> Result<()> {
        while self.state.t < t {
            let report = self.step(Some(t))?;
            on_step(self, &report);
        }
        Ok(())
    }
}
