//! Two-scale approximate solution in the planar (1D) reduction:
//!
//! `n_a = n⁰(t,x) + N⁰(t,x/ε) + ε (n¹(t,x) + N¹(t,x/ε))`, likewise `u_a`, `φ_a`.
//!
//! Interior fields come from the limit run (order 0) and from a linearized
//! Euler solve driven by the layer through the wall velocity (order 1).
//! Layer fields are solved per stored time sample; evaluation interpolates
//! in time with four-point Lagrange weights. The formulas are collected in
//! `docs/expansion.md`.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Result, SheathError};
use crate::euler_limit::{
    boundary_trace, check_density, BoundaryMode, FluidState, FvOperator, LimitRun, VACUUM_FLOOR,
};
use crate::euler_poisson::PlasmaParams;
use crate::grid::Grid1D;
use crate::io;
use crate::numerics::{central_derivative, lagrange_weights, locate, second_derivative};
use crate::profiles::{
    density_layer, layer_velocity_corrector, s_nonlinearity, solve_leading_profile, solve_linear_corrector,
    CorrectorProblem, LayerTable, SheathParams, SheathProfile,
};

pub const BUNDLE_CSV_HEADER: [&str; 6] = ["x", "n_a", "u_a", "phi_a", "n_layer_part", "phi_layer_part"];

/// Minimum number of stored time samples (four-point time interpolation).
pub const MIN_SAMPLES: usize = 4;

#[derive(Debug)]
struct BundleData {
    order: usize,
    ion_temp: f64,
    wall_potential: f64,
    times: Vec<f64>,
    /// `[0, centers.., L]` of the limit grid.
    nodes: Vec<f64>,
    n0: Vec<Vec<f64>>,
    u0: Vec<Vec<f64>>,
    phi0: Vec<Vec<f64>>,
    n1: Vec<Vec<f64>>,
    u1: Vec<Vec<f64>>,
    phi1: Vec<Vec<f64>>,
    gamma: Vec<f64>,
    n1_trace: Vec<f64>,
    u1_trace: Vec<f64>,
    profiles: Vec<SheathProfile>,
    layer_phi1: Vec<LayerTable>,
    layer_u1: Vec<LayerTable>,
}

/// Assembled expansion of order 0 or 1. Cloning is cheap; the tabulations
/// are shared and independent of `ε`.
#[derive(Debug, Clone)]
pub struct ExpansionBundle {
    data: Arc<BundleData>,
    epsilon: f64,
}

/// Bundle fields at a set of points. `*_limit` is the order-0 interior
/// part, `*_leading` adds the order-0 layer.
#[derive(Debug, Clone, PartialEq)]
pub struct BundleEvaluation {
    pub x: Vec<f64>,
    pub n: Vec<f64>,
    pub u: Vec<f64>,
    pub phi: Vec<f64>,
    pub n_layer: Vec<f64>,
    pub phi_layer: Vec<f64>,
    pub n_limit: Vec<f64>,
    pub u_limit: Vec<f64>,
    pub phi_limit: Vec<f64>,
    pub n_leading: Vec<f64>,
    pub phi_leading: Vec<f64>,
}

impl BundleEvaluation {
    fn with_capacity(len: usize) -> Self {
        let v = || Vec::with_capacity(len);
        Self {
            x: v(),
            n: v(),
            u: v(),
            phi: v(),
            n_layer: v(),
            phi_layer: v(),
            n_limit: v(),
            u_limit: v(),
            phi_limit: v(),
            n_leading: v(),
            phi_leading: v(),
        }
    }

    fn columns_mut(&mut self) -> [&mut Vec<f64>; 10] {
        [
            &mut self.n,
            &mut self.u,
            &mut self.phi,
            &mut self.n_layer,
            &mut self.phi_layer,
            &mut self.n_limit,
            &mut self.u_limit,
            &mut self.phi_limit,
            &mut self.n_leading,
            &mut self.phi_leading,
        ]
    }

    pub fn to_csv(&self) -> String {
        io::csv_string(
            &BUNDLE_CSV_HEADER,
            &[&self.x, &self.n, &self.u, &self.phi, &self.n_layer, &self.phi_layer],
        )
    }
}

/// Discrete L² norms of the system residuals of an evaluated bundle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualReport {
    pub r_n_norm: f64,
    pub r_u_norm: f64,
    pub r_phi_norm: f64,
    pub epsilon: f64,
}

/// Weights of the derivative at `x` of the Lagrange interpolant through `xs`.
fn lagrange_derivative_weights(xs: [f64; 3], x: f64) -> [f64; 3] {
    let mut w = [0.0; 3];
    for i in 0..3 {
        for m in 0..3 {
            if m == i {
                continue;
            }
            let mut term = 1.0 / (xs[i] - xs[m]);
            for j in 0..3 {
                if j != i && j != m {
                    term *= (x - xs[j]) / (xs[i] - xs[j]);
                }
            }
            w[i] += term;
        }
    }
    w
}

/// Three-point time-derivative stencil at sample `k`.
fn time_derivative_stencil(times: &[f64], k: usize) -> ([usize; 3], [f64; 3]) {
    let start = k.saturating_sub(1).min(times.len() - 3);
    let idx = [start, start + 1, start + 2];
    let w = lagrange_derivative_weights([times[idx[0]], times[idx[1]], times[idx[2]]], times[k]);
    (idx, w)
}

/// Values at `[0, centers.., L]`: linear extrapolation at both ends unless
/// a boundary value is given.
fn with_ends(grid: &Grid1D, v: &[f64], left: Option<f64>, right: Option<f64>) -> Vec<f64> {
    let x = grid.centers();
    let m = v.len();
    let l = left.unwrap_or_else(|| v[0] - (v[1] - v[0]) * x[0] / (x[1] - x[0]));
    let r = right.unwrap_or_else(|| {
        v[m - 1] + (v[m - 1] - v[m - 2]) * (grid.length() - x[m - 1]) / (x[m - 1] - x[m - 2])
    });
    let mut out = Vec::with_capacity(m + 2);
    out.push(l);
    out.extend_from_slice(v);
    out.push(r);
    out
}

fn validate_run(run: &LimitRun, params: &PlasmaParams) -> Result<()> {
    params.validate()?;
    if run.bc != BoundaryMode::Wall || params.bc != BoundaryMode::Wall {
        return Err(SheathError::invalid("the expansion is built for the wall boundary condition only"));
    }
    if (run.ion_temp - params.ion_temp).abs() > 1e-14 * params.ion_temp {
        return Err(SheathError::invalid("limit run and parameters have different ion_temp"));
    }
    if (run.grid.length() - params.domain_length).abs() > 1e-12 * params.domain_length {
        return Err(SheathError::GridMismatch("limit grid length differs from domain_length".into()));
    }
    if run.states.len() < MIN_SAMPLES {
        return Err(SheathError::invalid(format!(
            "limit run needs at least {MIN_SAMPLES} stored time samples, got {}",
            run.states.len()
        )));
    }
    if run.states.windows(2).any(|w| !(w[1].t > w[0].t)) {
        return Err(SheathError::invalid("limit run time samples are not strictly increasing"));
    }
    for s in &run.states {
        if s.len() != run.grid.len() {
            return Err(SheathError::GridMismatch("limit state size differs from its grid".into()));
        }
        check_density(&s.n, s.t)?;
        if s.u.iter().any(|u| !u.is_finite()) {
            return Err(SheathError::invalid(format!("limit run velocity not finite at t = {}", s.t)));
        }
    }
    Ok(())
}

/// Build the expansion of the given order (0 or 1) from a wall-mode limit run.
pub fn build_expansion(run: &LimitRun, params: &PlasmaParams, order: usize) -> Result<ExpansionBundle> {
    if order > 1 {
        return Err(SheathError::invalid(format!("expansion order must be 0 or 1, got {order}")));
    }
    validate_run(run, params)?;
    let temp = params.ion_temp;
    let grid = &run.grid;
    let times = run.times();
    let samples = times.len();

    let gamma: Vec<f64> = run
        .states
        .iter()
        .map(|s| boundary_trace(s, grid).map(|tr| tr.gamma))
        .collect::<Result<_>>()?;
    let profiles: Vec<SheathProfile> = gamma
        .par_iter()
        .map(|g| solve_leading_profile(&SheathParams::new(*g, temp, params.wall_potential + g.ln())?))
        .collect::<Result<_>>()?;

    let nodes = grid.nodes_with_boundaries();
    let n0: Vec<Vec<f64>> = run
        .states
        .iter()
        .zip(&gamma)
        .map(|(s, g)| with_ends(grid, &s.n, Some(*g), None))
        .collect();
    let u0: Vec<Vec<f64>> = run.states.iter().map(|s| with_ends(grid, &s.u, Some(0.0), Some(0.0))).collect();
    let phi0: Vec<Vec<f64>> = n0.iter().map(|n| n.iter().map(|v| -v.ln()).collect()).collect();

    let zero_nodes = vec![0.0; nodes.len()];
    let mut data = BundleData {
        order,
        ion_temp: temp,
        wall_potential: params.wall_potential,
        times: times.clone(),
        nodes,
        n0,
        u0,
        phi0,
        n1: vec![zero_nodes.clone(); samples],
        u1: vec![zero_nodes.clone(); samples],
        phi1: vec![zero_nodes; samples],
        gamma,
        n1_trace: vec![0.0; samples],
        u1_trace: vec![0.0; samples],
        layer_phi1: profiles.iter().map(|p| LayerTable::zeros(vec![0.0, p.z_max()])).collect(),
        layer_u1: profiles.iter().map(|p| LayerTable::zeros(vec![0.0, p.z_max()])).collect(),
        profiles,
    };
    if order == 1 {
        build_first_order(run, &mut data)?;
    }
    Ok(ExpansionBundle {
        data: Arc::new(data),
        epsilon: params.epsilon,
    })
}

fn build_first_order(run: &LimitRun, data: &mut BundleData) -> Result<()> {
    let temp = data.ion_temp;
    let times = &data.times;
    let profiles = &data.profiles;
    let gamma = &data.gamma;
    // velocity layer and wall velocity u¹(t,0)
    let velocity: Vec<_> = (0..times.len())
        .into_par_iter()
        .map(|k| {
            let (idx, w) = time_derivative_stencil(times, k);
            let dgamma: f64 = idx.iter().zip(&w).map(|(j, wj)| wj * gamma[*j]).sum();
            let ux_wall = -dgamma / gamma[k];
            let profile = &profiles[k];
            let source = |z: f64| {
                let dt_n: f64 = idx.iter().zip(&w).map(|(j, wj)| wj * profiles[*j].n_layer_at(z)).sum();
                dt_n + ux_wall * (profile.n_layer_at(z) + z * profile.dn_layer_at(z))
            };
            layer_velocity_corrector(profile, &source)
        })
        .collect::<Result<_>>()?;
    let u1_trace: Vec<f64> = velocity.iter().map(|v| v.trace).collect();

    let interior = solve_first_order_interior(run, times, &u1_trace)?;
    let grid = &run.grid;
    for (k, (n1, u1)) in interior.into_iter().enumerate() {
        let n1_nodes = with_ends(grid, &n1, None, None);
        let u1_nodes = with_ends(grid, &u1, Some(u1_trace[k]), Some(0.0));
        data.phi1[k] = n1_nodes.iter().zip(&data.n0[k]).map(|(a, b)| -a / b).collect();
        data.n1_trace[k] = n1_nodes[0];
        data.n1[k] = n1_nodes;
        data.u1[k] = u1_nodes;
    }
    let n1_trace = &data.n1_trace;
    data.layer_phi1 = (0..times.len())
        .into_par_iter()
        .map(|k| {
            let profile = &profiles[k];
            let nb = n1_trace[k];
            let forcing = |z: f64| -nb * s_nonlinearity(profile.eval(z).0, temp);
            let params = SheathParams::new(gamma[k], temp, profile.wall_value())?;
            solve_linear_corrector(&CorrectorProblem::new(profile, &forcing, nb / gamma[k]), &params)
        })
        .collect::<Result<_>>()?;
    data.layer_u1 = velocity.into_iter().map(|v| v.layer).collect();
    data.u1_trace = u1_trace;
    Ok(())
}

/// Four-point Lagrange interpolation of sampled boundary data.
fn interpolate_samples(times: &[f64], values: &[f64], t: f64) -> f64 {
    let (idx, w) = time_stencil(times, t);
    idx.iter().zip(&w).map(|(j, wj)| wj * values[*j]).sum()
}

fn time_stencil(times: &[f64], t: f64) -> ([usize; 4], [f64; 4]) {
    let k = locate(times, t);
    let start = k.saturating_sub(1).min(times.len() - 4);
    let idx = [start, start + 1, start + 2, start + 3];
    let w = lagrange_weights([times[idx[0]], times[idx[1]], times[idx[2]], times[idx[3]]], t);
    (idx, w)
}

/// Linearized Euler around the limit solution,
/// `n¹_t + (n⁰u¹ + n¹u⁰)_x = 0`, `u¹_t + (u⁰u¹ + (T^i+1) n¹/n⁰)_x = 0`,
/// with `u¹(t,0)` prescribed, zero initial data and a wall at `x = L`.
/// The limit solution is re-integrated alongside with identical steps.
fn solve_first_order_interior(run: &LimitRun, times: &[f64], u1_trace: &[f64]) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    let grid = &run.grid;
    let op = FvOperator {
        grid,
        sound_speed: (run.ion_temp + 1.0).sqrt(),
        bc: BoundaryMode::Wall,
    };
    let cells = grid.len();
    let wall_u = |t: f64| interpolate_samples(times, u1_trace, t);
    let mut state = run.states[0].clone();
    let mut n1 = vec![0.0; cells];
    let mut u1 = vec![0.0; cells];
    let mut out = vec![(n1.clone(), u1.clone())];
    let (mut dn, mut dm) = (vec![0.0; cells], vec![0.0; cells]);
    let (mut dn1, mut du1) = (vec![0.0; cells], vec![0.0; cells]);
    for &target in &times[1..] {
        while state.t < target {
            let n0 = &state.n;
            let m0: Vec<f64> = state.n.iter().zip(&state.u).map(|(n, u)| n * u).collect();
            let mut dt = op.stable_dt(n0, &m0, run.cfl);
            if state.t + dt >= target - 1e-12 * dt {
                dt = target - state.t;
            }
            op.rhs(n0, &m0, &mut dn, &mut dm);
            linear_rhs(grid, run.ion_temp, n0, &state.u, &n1, &u1, wall_u(state.t), &mut dn1, &mut du1);
            let na: Vec<f64> = (0..cells).map(|i| n0[i] + dt * dn[i]).collect();
            let ma: Vec<f64> = (0..cells).map(|i| m0[i] + dt * dm[i]).collect();
            let n1a: Vec<f64> = (0..cells).map(|i| n1[i] + dt * dn1[i]).collect();
            let u1a: Vec<f64> = (0..cells).map(|i| u1[i] + dt * du1[i]).collect();
            check_density(&na, state.t + dt)?;
            let ua: Vec<f64> = na.iter().zip(&ma).map(|(n, m)| m / n).collect();
            op.rhs(&na, &ma, &mut dn, &mut dm);
            linear_rhs(grid, run.ion_temp, &na, &ua, &n1a, &u1a, wall_u(state.t + dt), &mut dn1, &mut du1);
            let nb: Vec<f64> = (0..cells).map(|i| 0.5 * (n0[i] + na[i] + dt * dn[i])).collect();
            let mb: Vec<f64> = (0..cells).map(|i| 0.5 * (m0[i] + ma[i] + dt * dm[i])).collect();
            check_density(&nb, state.t + dt)?;
            n1 = (0..cells).map(|i| 0.5 * (n1[i] + n1a[i] + dt * dn1[i])).collect();
            u1 = (0..cells).map(|i| 0.5 * (u1[i] + u1a[i] + dt * du1[i])).collect();
            let ub = nb.iter().zip(&mb).map(|(n, m)| m / n).collect();
            let t = if state.t + dt > target - 1e-12 * dt { target } else { state.t + dt };
            state = FluidState { n: nb, u: ub, t };
        }
        if n1.iter().chain(&u1).any(|v| !v.is_finite()) {
            return Err(SheathError::invalid(format!("first-order interior blew up before t = {target}")));
        }
        out.push((n1.clone(), u1.clone()));
    }
    Ok(out)
}

/// Rusanov flux with unlimited linear reconstruction for the linearized system.
#[allow(clippy::too_many_arguments)]
fn linear_rhs(
    grid: &Grid1D,
    ion_temp: f64,
    n0: &[f64],
    u0: &[f64],
    n1: &[f64],
    u1: &[f64],
    wall_u1: f64,
    dn1: &mut [f64],
    du1: &mut [f64],
) {
    let cells = n0.len();
    let x = grid.centers();
    let w = grid.widths();
    let length = grid.length();
    let c2 = ion_temp + 1.0;
    let total = cells + 4;
    let mut px = vec![0.0; total];
    let mut pw = vec![0.0; total];
    let mut q = [vec![0.0; total], vec![0.0; total], vec![0.0; total], vec![0.0; total]];
    for i in 0..cells {
        px[i + 2] = x[i];
        pw[i + 2] = w[i];
        q[0][i + 2] = n0[i];
        q[1][i + 2] = u0[i];
        q[2][i + 2] = n1[i];
        q[3][i + 2] = u1[i];
    }
    for j in 0..2 {
        let (g, src) = (1 - j, j + 2);
        px[g] = -px[src];
        pw[g] = pw[src];
        q[0][g] = q[0][src];
        q[1][g] = -q[1][src];
        q[2][g] = q[2][src];
        q[3][g] = 2.0 * wall_u1 - q[3][src];
        let (g, src) = (cells + 2 + j, cells + 1 - j);
        px[g] = 2.0 * length - px[src];
        pw[g] = pw[src];
        q[0][g] = q[0][src];
        q[1][g] = -q[1][src];
        q[2][g] = q[2][src];
        q[3][g] = -q[3][src];
    }
    let mut slope = [vec![0.0; total], vec![0.0; total], vec![0.0; total], vec![0.0; total]];
    for (s, v) in slope.iter_mut().zip(&q) {
        for g in 1..total - 1 {
            s[g] = (v[g + 1] - v[g - 1]) / (px[g + 1] - px[g - 1]);
        }
    }
    let face = |g: usize, side: f64| -> [f64; 4] {
        let d = side * 0.5 * pw[g];
        [
            q[0][g] + d * slope[0][g],
            q[1][g] + d * slope[1][g],
            q[2][g] + d * slope[2][g],
            q[3][g] + d * slope[3][g],
        ]
    };
    let flux = |s: &[f64; 4]| (s[0] * s[3] + s[2] * s[1], s[1] * s[3] + c2 * s[2] / s[0]);
    let face_flux = |f: usize| {
        let l = face(f + 1, 1.0);
        let r = face(f + 2, -1.0);
        let (fl, fr) = (flux(&l), flux(&r));
        let a = l[1].abs().max(r[1].abs()) + c2.sqrt();
        (
            0.5 * (fl.0 + fr.0) - 0.5 * a * (r[2] - l[2]),
            0.5 * (fl.1 + fr.1) - 0.5 * a * (r[3] - l[3]),
        )
    };
    let mut left = face_flux(0);
    for i in 0..cells {
        let right = face_flux(i + 1);
        dn1[i] = -(right.0 - left.0) / w[i];
        du1[i] = -(right.1 - left.1) / w[i];
        left = right;
    }
}

/// Three-point parabolic interpolation stencil in the node table.
fn space_stencil(nodes: &[f64], x: f64) -> ([usize; 3], [f64; 3]) {
    let k = locate(nodes, x);
    let nearest = if x - nodes[k] <= nodes[k + 1] - x { k } else { k + 1 };
    let mid = nearest.clamp(1, nodes.len() - 2);
    let idx = [mid - 1, mid, mid + 1];
    let w = lagrange_weights([nodes[idx[0]], nodes[idx[1]], nodes[idx[2]]], x);
    (idx, w)
}

impl ExpansionBundle {
    pub fn order(&self) -> usize {
        self.data.order
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn ion_temp(&self) -> f64 {
        self.data.ion_temp
    }

    pub fn wall_potential(&self) -> f64 {
        self.data.wall_potential
    }

    /// The same expansion evaluated at another `ε`.
    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(SheathError::invalid(format!("epsilon must be in (0,1], got {epsilon}")));
        }
        Ok(Self {
            data: Arc::clone(&self.data),
            epsilon,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.data.times
    }

    pub fn t_range(&self) -> (f64, f64) {
        (self.data.times[0], *self.data.times.last().expect("samples"))
    }

    /// Leading layer profile at stored sample `k`.
    pub fn leading_profile(&self, k: usize) -> &SheathProfile {
        &self.data.profiles[k]
    }

    pub fn gamma(&self, k: usize) -> f64 {
        self.data.gamma[k]
    }

    /// Interior wall velocity `u¹(t_k, 0)`.
    pub fn wall_velocity(&self, k: usize) -> f64 {
        self.data.u1_trace[k]
    }

    /// Interior wall density `n¹(t_k, 0)`.
    pub fn wall_density(&self, k: usize) -> f64 {
        self.data.n1_trace[k]
    }

    /// Largest layer value at the truncation point of any sample.
    pub fn max_layer_tail(&self) -> f64 {
        let d = &self.data;
        let mut tail = 0.0f64;
        for k in 0..d.times.len() {
            let p = &d.profiles[k];
            tail = tail.max(p.phi().last().map_or(0.0, |v| v.abs()));
            tail = tail.max(p.n_layer().last().map_or(0.0, |v| v.abs()));
            for table in [&d.layer_phi1[k], &d.layer_u1[k]] {
                tail = tail.max(table.value.last().map_or(0.0, |v| v.abs()));
            }
        }
        tail
    }

    fn check_time(&self, t: f64) -> Result<()> {
        let (t_min, t_max) = self.t_range();
        if !(t >= t_min - 1e-12 && t <= t_max + 1e-12) {
            return Err(SheathError::TimeOutOfRange { t, t_min, t_max });
        }
        Ok(())
    }

    /// Bundle fields at arbitrary points of `[0, L]`.
    pub fn evaluate_points(&self, t: f64, xs: &[f64]) -> Result<BundleEvaluation> {
        self.check_time(t)?;
        let d = &*self.data;
        let eps = self.epsilon;
        let temp = d.ion_temp;
        let (tidx, tw) = time_stencil(&d.times, t);
        let mut out = BundleEvaluation::with_capacity(xs.len());
        for &x in xs {
            let (sidx, sw) = space_stencil(&d.nodes, x);
            let z = x / eps;
            // [n0, u0, phi0, n1, u1, phi1, N0, Phi0, N1, U1, Phi1]
            let mut acc = [0.0f64; 11];
            for (&k, &wt) in tidx.iter().zip(&tw) {
                let interp = |table: &Vec<Vec<f64>>| -> f64 {
                    sidx.iter().zip(&sw).map(|(j, ws)| ws * table[k][*j]).sum()
                };
                acc[0] += wt * interp(&d.n0);
                acc[1] += wt * interp(&d.u0);
                acc[2] += wt * interp(&d.phi0);
                let profile = &d.profiles[k];
                let g = d.gamma[k];
                let big_phi0 = profile.eval(z).0;
                let big_n0 = density_layer(big_phi0, g, temp);
                acc[6] += wt * big_n0;
                acc[7] += wt * big_phi0;
                if d.order == 1 {
                    acc[3] += wt * interp(&d.n1);
                    acc[4] += wt * interp(&d.u1);
                    acc[5] += wt * interp(&d.phi1);
                    let big_phi1 = d.layer_phi1[k].eval(z);
                    let total = g * (big_phi0 / temp).exp();
                    acc[8] += wt * (total * big_phi1 / temp + d.n1_trace[k] * big_n0 / g);
                    acc[9] += wt * d.layer_u1[k].eval(z);
                    acc[10] += wt * big_phi1;
                }
            }
            let [n0, u0, phi0, n1, u1, phi1, bn0, bphi0, bn1, bu1, bphi1] = acc;
            out.x.push(x);
            let values = [
                n0 + bn0 + eps * (n1 + bn1),
                u0 + eps * (u1 + bu1),
                phi0 + bphi0 + eps * (phi1 + bphi1),
                bn0 + eps * bn1,
                bphi0 + eps * bphi1,
                n0,
                u0,
                phi0,
                n0 + bn0,
                phi0 + bphi0,
            ];
            for (col, v) in out.columns_mut().into_iter().zip(values) {
                col.push(v);
            }
        }
        Ok(out)
    }

    /// Point values at the cell centers of `grid`.
    pub fn evaluate(&self, t: f64, grid: &Grid1D) -> Result<BundleEvaluation> {
        self.evaluate_points(t, grid.centers())
    }

    /// Cell averages over `grid` by three-point Gauss quadrature.
    pub fn cell_averages(&self, t: f64, grid: &Grid1D) -> Result<BundleEvaluation> {
        let nodes = [-(0.6f64.sqrt()), 0.0, 0.6f64.sqrt()];
        let weights = [5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0];
        let pts: Vec<f64> = grid
            .centers()
            .iter()
            .zip(grid.widths())
            .flat_map(|(c, w)| nodes.map(|s| c + 0.5 * w * s))
            .collect();
        let mut fine = self.evaluate_points(t, &pts)?;
        let mut out = BundleEvaluation::with_capacity(grid.len());
        out.x = grid.centers().to_vec();
        for (dst, src) in out.columns_mut().into_iter().zip(fine.columns_mut()) {
            *dst = src.chunks(3).map(|c| c.iter().zip(&weights).map(|(v, w)| v * w).sum()).collect();
        }
        Ok(out)
    }

    /// Well-prepared initial state: bundle cell averages at the first sample.
    pub fn initial_state(&self, grid: &Grid1D) -> Result<FluidState> {
        let t0 = self.t_range().0;
        let e = self.cell_averages(t0, grid)?;
        if let Some((cell, v)) = e.n.iter().enumerate().find(|(_, v)| !(**v > VACUUM_FLOOR)) {
            return Err(SheathError::NonPositiveDensity { cell, value: *v });
        }
        FluidState::new(e.n, e.u, t0)
    }

    /// Bundle export on the centers of `grid`.
    pub fn to_csv(&self, t: f64, grid: &Grid1D) -> Result<String> {
        Ok(self.evaluate(t, grid)?.to_csv())
    }
}

/// Apply the discrete Euler-Poisson operator to the evaluated bundle at
/// time `t` on `grid` (cell centers plus the two end points).
///
/// `r_n = ∂_t n + ∂_x(nu)`, `r_u = ∂_t u + ∂_x(u²/2 + T^i ln n − φ)`,
/// `r_φ = ε² ∂_xx φ + e^{−φ} − n`; time derivatives by centered differences
/// of two evaluations, space derivatives by three-point stencils.
pub fn residual(bundle: &ExpansionBundle, params: &PlasmaParams, grid: &Grid1D, t: f64) -> Result<ResidualReport> {
    params.validate()?;
    let bundle = bundle.with_epsilon(params.epsilon)?;
    bundle.check_time(t)?;
    let times = bundle.times();
    let spacing = times.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    let delta = 1e-2 * spacing;
    let (t_min, t_max) = bundle.t_range();
    let (ta, tb) = ((t - delta).max(t_min), (t + delta).min(t_max));
    let nodes = grid.nodes_with_boundaries();
    let now = bundle.evaluate_points(t, &nodes)?;
    let before = bundle.evaluate_points(ta, &nodes)?;
    let after = bundle.evaluate_points(tb, &nodes)?;
    let temp = params.ion_temp;
    let flux: Vec<f64> = now.n.iter().zip(&now.u).map(|(n, u)| n * u).collect();
    let potential: Vec<f64> = (0..nodes.len())
        .map(|i| 0.5 * now.u[i] * now.u[i] + temp * now.n[i].ln() - now.phi[i])
        .collect();
    let d_flux = central_derivative(&nodes, &flux);
    let d_potential = central_derivative(&nodes, &potential);
    let phi_xx = second_derivative(&nodes, &now.phi);
    let eps2 = params.epsilon * params.epsilon;
    let w = grid.widths();
    let (mut rn, mut ru, mut rphi) = (0.0, 0.0, 0.0);
    for i in 0..grid.len() {
        let k = i + 1;
        let dn_dt = (after.n[k] - before.n[k]) / (tb - ta);
        let du_dt = (after.u[k] - before.u[k]) / (tb - ta);
        let r_n = dn_dt + d_flux[i];
        let r_u = du_dt + d_potential[i];
        let r_phi = eps2 * phi_xx[i] + (-now.phi[k]).exp() - now.n[k];
        rn += r_n * r_n * w[i];
        ru += r_u * r_u * w[i];
        rphi += r_phi * r_phi * w[i];
    }
    Ok(ResidualReport {
        r_n_norm: rn.sqrt(),
        r_u_norm: ru.sqrt(),
        r_phi_norm: rphi.sqrt(),
        epsilon: params.epsilon,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::euler_limit::{run_limit, InitialData, InitialPreset};

    fn flat_run(density: f64) -> LimitRun {
        let grid = Grid1D::uniform(1.0, 64).unwrap();
        let s = FluidState::constant(64, density, 0.0).unwrap();
        run_limit(s, &grid, BoundaryMode::Wall, 1.0, 0.4, &[0.01, 0.02, 0.03, 0.04]).unwrap()
    }

    fn pulse_run() -> LimitRun {
        let grid = Grid1D::uniform(1.0, 200).unwrap();
        let init = InitialData {
            preset: InitialPreset::Pulse,
            amplitude: 0.1,
            center: 0.3,
            width: 0.1,
        };
        let times: Vec<f64> = (1..=10).map(|k| 0.02 * k as f64).collect();
        run_limit(init.sample(&grid, 1.0).unwrap(), &grid, BoundaryMode::Wall, 1.0, 0.4, &times).unwrap()
    }

    fn params(eps: f64, phi_b: f64) -> PlasmaParams {
        PlasmaParams::new(1.0, eps, phi_b, BoundaryMode::Wall, 1.0).unwrap()
    }

    #[test]
    fn neutral_constant_state_has_no_layer() {
        let c = 1.3f64;
        let b = build_expansion(&flat_run(c), &params(0.05, -c.ln()), 1).unwrap();
        let xs = [0.0, 0.01, 0.5, 1.0];
        let e = b.evaluate_points(0.025, &xs).unwrap();
        for i in 0..xs.len() {
            assert!((e.n[i] - c).abs() < 1e-13);
            assert!(e.u[i].abs() < 1e-13);
            assert!((e.phi[i] + c.ln()).abs() < 1e-13);
            assert!(e.n_layer[i].abs() < 1e-13);
        }
    }

    #[test]
    fn negative_wall_potential_gives_steady_depleted_layer() {
        let b = build_expansion(&flat_run(1.0), &params(0.05, -0.5), 1).unwrap();
        for k in 0..b.times().len() {
            assert_eq!(b.leading_profile(k), b.leading_profile(0));
            assert!(b.wall_velocity(k).abs() < 1e-12);
            assert!(b.wall_density(k).abs() < 1e-12);
        }
        assert!(b.leading_profile(0).n_layer().iter().all(|v| *v <= 0.0));
        let xs: Vec<f64> = (0..50).map(|k| 0.004 * k as f64).collect();
        let a = b.evaluate_points(0.0, &xs).unwrap();
        let c = b.evaluate_points(0.04, &xs).unwrap();
        for (p, q) in a.n.iter().zip(&c.n) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn wall_potential_is_matched_at_every_order() {
        let run = pulse_run();
        for order in [0, 1] {
            let b = build_expansion(&run, &params(0.02, 0.5), order).unwrap();
            for t in [0.0, 0.07, 0.15, 0.2] {
                let e = b.evaluate_points(t, &[0.0]).unwrap();
                assert!((e.phi[0] - 0.5).abs() < 1e-9, "order {order} t {t}: {}", e.phi[0]);
            }
        }
    }

    #[test]
    fn leading_order_is_neutral_outside_the_layer() {
        let b = build_expansion(&pulse_run(), &params(0.01, 0.5), 0).unwrap();
        let xs: Vec<f64> = (1..20).map(|k| 0.5 + 0.02 * k as f64).collect();
        let e = b.evaluate_points(0.1, &xs).unwrap();
        for (n, phi) in e.n_leading.iter().zip(&e.phi_leading) {
            assert!((n - (-phi).exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn layer_depends_on_x_over_epsilon_only() {
        let b = build_expansion(&flat_run(1.0), &params(0.04, 0.7), 0).unwrap();
        let small = b.with_epsilon(0.01).unwrap();
        for z in [0.0, 0.3, 1.0, 2.5, 7.0] {
            let p = b.evaluate_points(0.02, &[0.04 * z]).unwrap();
            let q = small.evaluate_points(0.02, &[0.01 * z]).unwrap();
            assert!((p.n_layer[0] - q.n_layer[0]).abs() < 1e-13);
            assert!((p.phi_layer[0] - q.phi_layer[0]).abs() < 1e-13);
        }
    }

    #[test]
    fn first_order_terms_scale_with_epsilon() {
        let run = pulse_run();
        let b0 = build_expansion(&run, &params(0.02, 0.5), 0).unwrap();
        let b1 = build_expansion(&run, &params(0.02, 0.5), 1).unwrap();
        let xs = [0.1, 0.12, 0.15];
        let d = |eps: f64| {
            let a = b1.with_epsilon(eps).unwrap().evaluate_points(0.2, &xs).unwrap();
            let z = b0.with_epsilon(eps).unwrap().evaluate_points(0.2, &xs).unwrap();
            a.n.iter().zip(&z.n).map(|(p, q)| p - q).collect::<Vec<_>>()
        };
        let (one, two) = (d(0.0025), d(0.005));
        assert!(one.iter().any(|v| v.abs() > 1e-6));
        for (p, q) in one.iter().zip(&two) {
            assert!((2.0 * p - q).abs() < 1e-10 * (1.0 + q.abs()));
        }
    }

    #[test]
    fn cell_averages_of_constants_are_exact() {
        let b = build_expansion(&flat_run(2.0), &params(0.05, -(2f64.ln())), 0).unwrap();
        let grid = Grid1D::graded(1.0, 0.005, 1.1, 0.05).unwrap();
        let s = b.initial_state(&grid).unwrap();
        assert!(s.n.iter().all(|v| (v - 2.0).abs() < 1e-13));
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        let run = flat_run(1.0);
        assert!(build_expansion(&run, &params(0.05, 0.0), 2).is_err());
        let out = PlasmaParams::new(1.0, 0.05, 0.0, BoundaryMode::Outflow { u_b: -0.3 }, 1.0).unwrap();
        assert!(build_expansion(&run, &out, 0).is_err());
        let mut short = run.clone();
        short.states.truncate(3);
        assert!(build_expansion(&short, &params(0.05, 0.0), 0).is_err());
        let b = build_expansion(&run, &params(0.05, 0.0), 0).unwrap();
        assert!(matches!(b.evaluate_points(0.5, &[0.1]), Err(SheathError::TimeOutOfRange { .. })));
    }
}
