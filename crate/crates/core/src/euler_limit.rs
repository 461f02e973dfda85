//! Quasineutral limit: isothermal Euler with pressure `(T^i + 1) n` on the
//! half-line, solved with a conservative HLL / minmod-MUSCL / SSP-RK2
//! finite-volume scheme.
//!
//! The right end of the domain is always a reflecting wall; the left end
//! is a wall or a subsonic outflow according to [`BoundaryMode`].

use crate::error::{Result, SheathError};
use crate::grid::Grid1D;
use crate::io;
use crate::numerics::minmod;

/// Densities at or below this are treated as vacuum.
pub const VACUUM_FLOOR: f64 = 1e-12;

pub const SNAPSHOT_CSV_HEADER: [&str; 3] = ["x", "n", "u"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundaryMode {
    /// Non-penetration, `u(0) = 0`.
    Wall,
    /// Prescribed normal velocity `u(0) = u_b < 0`.
    Outflow { u_b: f64 },
}

impl BoundaryMode {
    fn check_window(&self, speed: f64, system: &str) -> Result<()> {
        match *self {
            BoundaryMode::Wall => Ok(()),
            BoundaryMode::Outflow { u_b } => {
                if u_b < 0.0 && u_b > -speed {
                    Ok(())
                } else {
                    Err(SheathError::invalid(format!(
                        "outflow velocity for the {system} must satisfy -{speed:.6} < u_b < 0, got {u_b}"
                    )))
                }
            }
        }
    }

    /// Subsonic window of the limit system, `-sqrt(T^i + 1) < u_b < 0`.
    pub fn validate_limit(&self, ion_temp: f64) -> Result<()> {
        self.check_window((ion_temp + 1.0).sqrt(), "limit system")
    }

    /// Subsonic window of the full system, `-sqrt(T^i) < u_b < 0`.
    pub fn validate_full(&self, ion_temp: f64) -> Result<()> {
        self.check_window(ion_temp.sqrt(), "Euler-Poisson system")
    }

    pub fn label(&self) -> String {
        match self {
            BoundaryMode::Wall => "wall".to_string(),
            BoundaryMode::Outflow { u_b } => format!("outflow({})", io::fmt_f64(*u_b)),
        }
    }
}

/// Cell averages of ion density and velocity at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct FluidState {
    pub n: Vec<f64>,
    pub u: Vec<f64>,
    pub t: f64,
}

impl FluidState {
    pub fn new(n: Vec<f64>, u: Vec<f64>, t: f64) -> Result<Self> {
        let s = Self { n, u, t };
        s.validate()?;
        Ok(s)
    }

    pub fn constant(cells: usize, n: f64, u: f64) -> Result<Self> {
        Self::new(vec![n; cells], vec![u; cells], 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n.len() != self.u.len() {
            return Err(SheathError::invalid("density and velocity lengths differ"));
        }
        for (cell, (n, u)) in self.n.iter().zip(&self.u).enumerate() {
            if !(*n > 0.0) || !n.is_finite() {
                return Err(SheathError::NonPositiveDensity { cell, value: *n });
            }
            if !u.is_finite() {
                return Err(SheathError::invalid(format!("velocity in cell {cell} is not finite")));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.n.len()
    }

    pub fn is_empty(&self) -> bool {
        self.n.is_empty()
    }

    pub fn mass(&self, grid: &Grid1D) -> f64 {
        grid.integrate(&self.n)
    }

    pub fn to_csv(&self, grid: &Grid1D) -> String {
        io::csv_string(&SNAPSHOT_CSV_HEADER, &[grid.centers(), &self.n, &self.u])
    }

    /// Decode an `x,n,u` snapshot; returns the cell centers and the state.
    pub fn from_csv(text: &str, t: f64) -> Result<(Vec<f64>, Self)> {
        let mut cols = io::parse_csv(text, &SNAPSHOT_CSV_HEADER)?.into_iter();
        let x = cols.next().expect("x column");
        let n = cols.next().expect("n column");
        let u = cols.next().expect("u column");
        if x.windows(2).any(|w| !(w[1] > w[0])) || x.first().is_some_and(|x0| *x0 <= 0.0) {
            return Err(SheathError::Parse("x column must be positive and strictly increasing".into()));
        }
        let state = Self::new(n, u, t).map_err(|e| SheathError::Parse(e.to_string()))?;
        Ok((x, state))
    }
}

/// Initial data presets. `center` and `width` are absolute lengths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialPreset {
    /// `n ≡ 1, u ≡ 0`.
    Flat,
    /// `n = 1 + a exp(-(x-c)²/w²)`, `u ≡ 0`.
    Bump,
    /// Left-moving acoustic pulse of the limit system: a velocity bump
    /// `u = -a exp(-(x-c)²/w²)` with `n = exp(-u / sqrt(T^i + 1))`.
    Pulse,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialData {
    pub preset: InitialPreset,
    pub amplitude: f64,
    pub center: f64,
    pub width: f64,
}

impl InitialData {
    /// Default bump: `a = 0.1, c = L/2, w = L/10`.
    pub fn default_bump(length: f64) -> Self {
        Self {
            preset: InitialPreset::Bump,
            amplitude: 0.1,
            center: 0.5 * length,
            width: 0.1 * length,
        }
    }

    pub fn density_velocity(&self, x: f64, ion_temp: f64) -> (f64, f64) {
        let g = (-((x - self.center) / self.width).powi(2)).exp();
        match self.preset {
            InitialPreset::Flat => (1.0, 0.0),
            InitialPreset::Bump => (1.0 + self.amplitude * g, 0.0),
            InitialPreset::Pulse => {
                let u = -self.amplitude * g;
                ((-u / (ion_temp + 1.0).sqrt()).exp(), u)
            }
        }
    }

    /// Point values at the cell centers.
    pub fn sample(&self, grid: &Grid1D, ion_temp: f64) -> Result<FluidState> {
        let (n, u) = grid.centers().iter().map(|x| self.density_velocity(*x, ion_temp)).unzip();
        FluidState::new(n, u, 0.0)
    }
}

#[inline]
fn physical_flux(n: f64, u: f64, c2: f64) -> (f64, f64) {
    (n * u, n * u * u + c2 * n)
}

/// HLL flux for isothermal gas dynamics with sound speed `c`.
pub(crate) fn hll_flux(nl: f64, ul: f64, nr: f64, ur: f64, c: f64) -> (f64, f64) {
    let c2 = c * c;
    let sl = (ul - c).min(ur - c);
    let sr = (ul + c).max(ur + c);
    let fl = physical_flux(nl, ul, c2);
    let fr = physical_flux(nr, ur, c2);
    if sl >= 0.0 {
        fl
    } else if sr <= 0.0 {
        fr
    } else {
        let inv = 1.0 / (sr - sl);
        (
            (sr * fl.0 - sl * fr.0 + sl * sr * (nr - nl)) * inv,
            (sr * fl.1 - sl * fr.1 + sl * sr * (nr * ur - nl * ul)) * inv,
        )
    }
}

/// HLL wave-speed bounds `(s_left, s_right)` for sound speed `c`.
pub fn hll_wave_speeds(left: (f64, f64), right: (f64, f64), c: f64) -> (f64, f64) {
    ((left.1 - c).min(right.1 - c), (left.1 + c).max(right.1 + c))
}

/// Interface flux `(mass, momentum)` of the limit system between two
/// `(n, u)` states, with pressure `(T^i + 1) n`.
pub fn limit_flux(left: (f64, f64), right: (f64, f64), ion_temp: f64) -> Result<(f64, f64)> {
    for (cell, (n, _)) in [left, right].into_iter().enumerate() {
        if !(n > 0.0) {
            return Err(SheathError::NonPositiveDensity { cell, value: n });
        }
    }
    Ok(hll_flux(left.0, left.1, right.0, right.1, (ion_temp + 1.0).sqrt()))
}

/// Spatial operator of the isothermal system on a grid: MUSCL-reconstructed
/// primitive variables, HLL fluxes, ghost cells per boundary mode.
pub(crate) struct FvOperator<'a> {
    pub grid: &'a Grid1D,
    pub sound_speed: f64,
    pub bc: BoundaryMode,
}

impl FvOperator<'_> {
    /// Tendencies of `(n, m = n u)`; returns the mass flux through `x = 0`
    /// (positive into the domain).
    pub fn rhs(&self, n: &[f64], m: &[f64], dn: &mut [f64], dm: &mut [f64]) -> f64 {
        let cells = n.len();
        let x = self.grid.centers();
        let w = self.grid.widths();
        let length = self.grid.length();
        // primitives with two ghost cells per side: index g = i + 2
        let total = cells + 4;
        let mut pn = vec![0.0; total];
        let mut pu = vec![0.0; total];
        let mut px = vec![0.0; total];
        let mut pw = vec![0.0; total];
        for i in 0..cells {
            pn[i + 2] = n[i];
            pu[i + 2] = m[i] / n[i];
            px[i + 2] = x[i];
            pw[i + 2] = w[i];
        }
        for j in 0..2 {
            // left ghosts mirror cells 0 and 1
            let (g, src) = (1 - j, j + 2);
            px[g] = -px[src];
            pw[g] = pw[src];
            match self.bc {
                BoundaryMode::Wall => {
                    pn[g] = pn[src];
                    pu[g] = -pu[src];
                }
                BoundaryMode::Outflow { u_b } => {
                    pn[g] = pn[2];
                    pu[g] = u_b;
                }
            }
            // right ghosts mirror the last two cells
            let (g, src) = (cells + 2 + j, cells + 1 - j);
            px[g] = 2.0 * length - px[src];
            pw[g] = pw[src];
            pn[g] = pn[src];
            pu[g] = -pu[src];
        }
        let mut sn = vec![0.0; total];
        let mut su = vec![0.0; total];
        for g in 1..total - 1 {
            let dl = px[g] - px[g - 1];
            let dr = px[g + 1] - px[g];
            sn[g] = minmod((pn[g] - pn[g - 1]) / dl, (pn[g + 1] - pn[g]) / dr);
            su[g] = minmod((pu[g] - pu[g - 1]) / dl, (pu[g + 1] - pu[g]) / dr);
        }
        let face_flux = |f: usize| {
            let (gl, gr) = (f + 1, f + 2);
            let nl = pn[gl] + 0.5 * pw[gl] * sn[gl];
            let ul = pu[gl] + 0.5 * pw[gl] * su[gl];
            let nr = pn[gr] - 0.5 * pw[gr] * sn[gr];
            let ur = pu[gr] - 0.5 * pw[gr] * su[gr];
            hll_flux(nl, ul, nr, ur, self.sound_speed)
        };
        let mut left = face_flux(0);
        let boundary_mass_flux = left.0;
        for i in 0..cells {
            let right = face_flux(i + 1);
            dn[i] = -(right.0 - left.0) / w[i];
            dm[i] = -(right.1 - left.1) / w[i];
            left = right;
        }
        boundary_mass_flux
    }

    pub fn stable_dt(&self, n: &[f64], m: &[f64], cfl: f64) -> f64 {
        let vmax = n
            .iter()
            .zip(m)
            .map(|(n, m)| (m / n).abs() + self.sound_speed)
            .fold(0.0, f64::max);
        cfl * self.grid.min_width() / vmax
    }
}

pub(crate) fn check_density(n: &[f64], t: f64) -> Result<()> {
    for (cell, v) in n.iter().enumerate() {
        if !(*v > VACUUM_FLOOR) {
            return Err(SheathError::Vacuum { t, cell, value: *v });
        }
    }
    Ok(())
}

pub(crate) fn check_cfl(cfl: f64) -> Result<()> {
    if cfl > 0.0 && cfl < 1.0 {
        Ok(())
    } else {
        Err(SheathError::invalid(format!("cfl must lie in (0, 1), got {cfl}")))
    }
}

fn check_grid(state: &FluidState, grid: &Grid1D) -> Result<()> {
    if state.len() != grid.len() {
        return Err(SheathError::GridMismatch(format!(
            "state has {} cells, grid has {}",
            state.len(),
            grid.len()
        )));
    }
    Ok(())
}

/// Result of one explicit step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub dt: f64,
    /// Time-integrated mass flux through `x = 0` over the step (positive
    /// into the domain), consistent with the SSP-RK2 update.
    pub boundary_mass_in: f64,
}

fn limit_operator<'a>(grid: &'a Grid1D, bc: BoundaryMode, ion_temp: f64) -> Result<FvOperator<'a>> {
    if !(ion_temp >= 0.0) {
        return Err(SheathError::invalid(format!("ion_temp must be nonnegative, got {ion_temp}")));
    }
    bc.validate_limit(ion_temp)?;
    Ok(FvOperator {
        grid,
        sound_speed: (ion_temp + 1.0).sqrt(),
        bc,
    })
}

/// One SSP-RK2 step of the limit system with `Δt = cfl · min(w) / max(|u| + c)`.
pub fn step_limit(state: &FluidState, grid: &Grid1D, bc: BoundaryMode, ion_temp: f64, cfl: f64) -> Result<FluidState> {
    check_cfl(cfl)?;
    let op = limit_operator(grid, bc, ion_temp)?;
    let m: Vec<f64> = state.n.iter().zip(&state.u).map(|(n, u)| n * u).collect();
    let dt = op.stable_dt(&state.n, &m, cfl);
    Ok(advance_limit(state, grid, bc, ion_temp, dt)?.0)
}

/// One SSP-RK2 step of the limit system with a given `dt`.
pub fn advance_limit(
    state: &FluidState,
    grid: &Grid1D,
    bc: BoundaryMode,
    ion_temp: f64,
    dt: f64,
) -> Result<(FluidState, StepReport)> {
    check_grid(state, grid)?;
    let op = limit_operator(grid, bc, ion_temp)?;
    let cells = state.len();
    let n0 = &state.n;
    let m0: Vec<f64> = state.n.iter().zip(&state.u).map(|(n, u)| n * u).collect();
    let mut dn = vec![0.0; cells];
    let mut dm = vec![0.0; cells];
    let f0 = op.rhs(n0, &m0, &mut dn, &mut dm);
    let n1: Vec<f64> = (0..cells).map(|i| n0[i] + dt * dn[i]).collect();
    let m1: Vec<f64> = (0..cells).map(|i| m0[i] + dt * dm[i]).collect();
    check_density(&n1, state.t + dt)?;
    let f1 = op.rhs(&n1, &m1, &mut dn, &mut dm);
    let n2: Vec<f64> = (0..cells).map(|i| 0.5 * (n0[i] + n1[i] + dt * dn[i])).collect();
    let m2: Vec<f64> = (0..cells).map(|i| 0.5 * (m0[i] + m1[i] + dt * dm[i])).collect();
    check_density(&n2, state.t + dt)?;
    let u2 = n2.iter().zip(&m2).map(|(n, m)| m / n).collect();
    Ok((
        FluidState {
            n: n2,
            u: u2,
            t: state.t + dt,
        },
        StepReport {
            dt,
            boundary_mass_in: 0.5 * dt * (f0 + f1),
        },
    ))
}

/// Boundary values of the limit solution at `x = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryTrace {
    /// Density trace `Γn⁰`.
    pub gamma: f64,
    pub u_trace: f64,
    /// `φ⁰(0) = -ln Γn⁰`.
    pub phi0: f64,
}

/// Linear extrapolation of `n` and `u` from the first two cell centers.
pub fn boundary_trace(state: &FluidState, grid: &Grid1D) -> Result<BoundaryTrace> {
    check_grid(state, grid)?;
    let x = grid.centers();
    let extrapolate = |v: &[f64]| v[0] - (v[1] - v[0]) * x[0] / (x[1] - x[0]);
    let gamma = extrapolate(&state.n);
    if !(gamma > 0.0) {
        return Err(SheathError::NonPositiveDensity { cell: 0, value: gamma });
    }
    Ok(BoundaryTrace {
        gamma,
        u_trace: extrapolate(&state.u),
        phi0: -gamma.ln(),
    })
}

/// Stored output of a limit run.
#[derive(Debug, Clone)]
pub struct LimitRun {
    pub grid: Grid1D,
    pub ion_temp: f64,
    pub bc: BoundaryMode,
    pub cfl: f64,
    pub states: Vec<FluidState>,
}

impl LimitRun {
    pub fn times(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.t).collect()
    }

    pub fn t_end(&self) -> f64 {
        self.states.last().map_or(0.0, |s| s.t)
    }

    /// `key = value` metadata sidecar.
    pub fn metadata(&self) -> String {
        format!(
            "t_end = {}\ncells = {}\ncfl = {}\nbc = {}\nion_temp = {}\n",
            io::fmt_f64(self.t_end()),
            self.grid.len(),
            io::fmt_f64(self.cfl),
            self.bc.label(),
            io::fmt_f64(self.ion_temp)
        )
    }
}

/// Integrate the limit system and store the state at every requested
/// output time (sorted, within `(t0, ∞)`); the initial state is kept too.
pub fn run_limit(
    initial: FluidState,
    grid: &Grid1D,
    bc: BoundaryMode,
    ion_temp: f64,
    cfl: f64,
    output_times: &[f64],
) -> Result<LimitRun> {
    check_cfl(cfl)?;
    check_grid(&initial, grid)?;
    initial.validate()?;
    let op = limit_operator(grid, bc, ion_temp)?;
    if output_times.windows(2).any(|w| !(w[1] > w[0])) || output_times.first().is_some_and(|t| *t <= initial.t) {
        return Err(SheathError::invalid("output times must be increasing and after the initial time"));
    }
    let mut states = vec![initial.clone()];
    let mut state = initial;
    for &target in output_times {
        while state.t < target {
            let m: Vec<f64> = state.n.iter().zip(&state.u).map(|(n, u)| n * u).collect();
            let mut dt = op.stable_dt(&state.n, &m, cfl);
            if state.t + dt >= target - 1e-12 * dt {
                dt = target - state.t;
            }
            state = advance_limit(&state, grid, bc, ion_temp, dt)?.0;
            if state.t > target - 1e-12 * dt {
                state.t = target;
            }
        }
        states.push(state.clone());
    }
    Ok(LimitRun {
        grid: grid.clone(),
        ion_temp,
        bc,
        cfl,
        states,
    })
}
