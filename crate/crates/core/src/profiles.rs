//! Boundary-layer profiles: the nonlinear sheath ODE `Φ'' + γ S(Φ) = 0`
//! integrated along its stable manifold, and the linear corrector problems
//! of the next order.
//!
//! The leading profile connects the wall value `ψ` to the saddle at
//! `(p, Φ) = (0, 0)`. On the zero level set of the Hamiltonian
//! `H(p, Φ) = p²/2 + T(Φ)` the second-order ODE reduces to the first-order
//! flow `Φ' = p(Φ)`, which has no unstable direction and is integrated
//! with an adaptive Dormand-Prince scheme.

use crate::error::{Result, SheathError};
use crate::io;
use crate::numerics::{exp_rem2, hermite, locate, solve_tridiagonal, ScalarDopri};

/// Largest accepted `|ψ| / min(1, T^i)`.
pub const MAX_EXPONENT: f64 = 40.0;
/// Truncation length in units of the decay length `1/λ`.
pub const Z_MAX_DECAY_LENGTHS: f64 = 40.0;
pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_PROFILE_CELLS: usize = 4096;
pub const DEFAULT_CORRECTOR_CELLS: usize = 4096;

pub const PROFILE_CSV_HEADER: [&str; 4] = ["z", "phi", "dphi", "n_layer"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SheathParams {
    /// Boundary trace of the limit density.
    pub gamma: f64,
    pub ion_temp: f64,
    /// Layer potential at `z = 0`.
    pub wall_value: f64,
    pub z_max: f64,
    pub tol: f64,
}

impl SheathParams {
    /// Parameters with the default truncation `40/λ` and tolerance `1e-10`.
    pub fn new(gamma: f64, ion_temp: f64, wall_value: f64) -> Result<Self> {
        let mut p = Self {
            gamma,
            ion_temp,
            wall_value,
            z_max: 1.0,
            tol: DEFAULT_TOL,
        };
        p.validate()?;
        p.z_max = Z_MAX_DECAY_LENGTHS / p.decay_rate();
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(SheathError::invalid(format!("{name} must be positive, got {v}")))
            }
        };
        positive("gamma", self.gamma)?;
        positive("ion_temp", self.ion_temp)?;
        positive("z_max", self.z_max)?;
        positive("tol", self.tol)?;
        if !self.wall_value.is_finite() {
            return Err(SheathError::invalid("wall_value must be finite"));
        }
        Ok(())
    }

    /// `λ = sqrt(γ (1 + 1/T^i))`, the decay rate of the linearized flow.
    pub fn decay_rate(&self) -> f64 {
        decay_rate(self.gamma, self.ion_temp)
    }
}

pub fn decay_rate(gamma: f64, ion_temp: f64) -> f64 {
    (gamma * (1.0 + 1.0 / ion_temp)).sqrt()
}

/// `S(Φ) = e^{-Φ} - e^{Φ/T^i}`.
pub fn s_nonlinearity(phi: f64, ion_temp: f64) -> f64 {
    (-phi).exp() - (phi / ion_temp).exp()
}

/// `S'(Φ) = -e^{-Φ} - e^{Φ/T^i} / T^i`, strictly negative.
pub fn s_derivative(phi: f64, ion_temp: f64) -> f64 {
    -(-phi).exp() - (phi / ion_temp).exp() / ion_temp
}

/// `e^{-Φ} + T e^{Φ/T} - 1 - T`, evaluated without cancellation near 0.
fn manifold_radicand(phi: f64, ion_temp: f64) -> f64 {
    (exp_rem2(-phi) + ion_temp * exp_rem2(phi / ion_temp)).max(0.0)
}

pub fn hamiltonian(p: f64, phi: f64, params: &SheathParams) -> f64 {
    0.5 * p * p - params.gamma * manifold_radicand(phi, params.ion_temp)
}

/// Slope `p` of the branch of `{H = 0}` that is the stable manifold of the
/// saddle: `p = -sign(Φ) sqrt(2γ) sqrt(e^{-Φ} + T e^{Φ/T} - 1 - T)`.
pub fn stable_manifold_slope(phi: f64, params: &SheathParams) -> f64 {
    manifold_slope(phi, params.gamma, params.ion_temp)
}

fn manifold_slope(phi: f64, gamma: f64, ion_temp: f64) -> f64 {
    if phi == 0.0 {
        return 0.0;
    }
    -phi.signum() * (2.0 * gamma * manifold_radicand(phi, ion_temp)).sqrt()
}

/// Layer density `N⁰ = γ (e^{Φ/T^i} - 1)`; always `> -γ`.
pub fn density_layer(phi: f64, gamma: f64, ion_temp: f64) -> f64 {
    gamma * (phi / ion_temp).exp_m1()
}

/// Tabulated leading-order layer.
#[derive(Debug, Clone, PartialEq)]
pub struct SheathProfile {
    z: Vec<f64>,
    phi: Vec<f64>,
    dphi: Vec<f64>,
    n_layer: Vec<f64>,
    decay_rate: f64,
    gamma: f64,
    ion_temp: f64,
}

impl SheathProfile {
    pub fn z(&self) -> &[f64] {
        &self.z
    }
    pub fn phi(&self) -> &[f64] {
        &self.phi
    }
    pub fn dphi(&self) -> &[f64] {
        &self.dphi
    }
    pub fn n_layer(&self) -> &[f64] {
        &self.n_layer
    }
    pub fn decay_rate(&self) -> f64 {
        self.decay_rate
    }
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    pub fn ion_temp(&self) -> f64 {
        self.ion_temp
    }
    pub fn wall_value(&self) -> f64 {
        self.phi[0]
    }
    pub fn z_max(&self) -> f64 {
        *self.z.last().expect("nonempty profile")
    }

    /// `(Φ, Φ')` at `z` by cubic Hermite interpolation; zero beyond `z_max`.
    pub fn eval(&self, z: f64) -> (f64, f64) {
        if z >= self.z_max() {
            return (0.0, 0.0);
        }
        let z = z.max(0.0);
        let k = locate(&self.z, z);
        hermite(
            self.z[k],
            self.z[k + 1],
            self.phi[k],
            self.phi[k + 1],
            self.dphi[k],
            self.dphi[k + 1],
            z,
        )
    }

    /// `N⁰(z)`, composed from the interpolated potential.
    pub fn n_layer_at(&self, z: f64) -> f64 {
        density_layer(self.eval(z).0, self.gamma, self.ion_temp)
    }

    /// Total layer density `N⁰ + γ = γ e^{Φ/T^i}`, positive even where
    /// `N⁰` rounds to `-γ`.
    pub fn total_density_at(&self, z: f64) -> f64 {
        self.gamma * (self.eval(z).0 / self.ion_temp).exp()
    }

    /// `∂_z N⁰(z)`.
    pub fn dn_layer_at(&self, z: f64) -> f64 {
        let (phi, dphi) = self.eval(z);
        self.gamma * (phi / self.ion_temp).exp() * dphi / self.ion_temp
    }

    /// `∫_0^∞ N⁰ dz` by Simpson's rule on the tabulation.
    pub fn layer_mass(&self) -> f64 {
        let h = self.z[1] - self.z[0];
        let mut total = 0.0;
        for k in 0..self.z.len() - 1 {
            let mid = self.n_layer_at(self.z[k] + 0.5 * h);
            total += h / 6.0 * (self.n_layer[k] + 4.0 * mid + self.n_layer[k + 1]);
        }
        total
    }

    pub fn to_csv(&self) -> String {
        io::csv_string(&PROFILE_CSV_HEADER, &[&self.z, &self.phi, &self.dphi, &self.n_layer])
    }

    /// Rebuild a profile from its CSV form. The CSV carries no `γ, T^i`,
    /// so they are supplied; the `n_layer` column must agree with them.
    pub fn from_csv(text: &str, gamma: f64, ion_temp: f64) -> Result<Self> {
        let table = ProfileTable::parse(text)?;
        table.into_profile(gamma, ion_temp)
    }
}

/// Raw columns of a profile CSV, checked for shape only.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileTable {
    pub z: Vec<f64>,
    pub phi: Vec<f64>,
    pub dphi: Vec<f64>,
    pub n_layer: Vec<f64>,
}

impl ProfileTable {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cols = io::parse_csv(text, &PROFILE_CSV_HEADER)?.into_iter();
        let mut next = || cols.next().expect("four columns");
        let table = Self {
            z: next(),
            phi: next(),
            dphi: next(),
            n_layer: next(),
        };
        if table.z.len() < 2 {
            return Err(SheathError::Parse("profile needs at least two rows".into()));
        }
        if table.z[0] != 0.0 {
            return Err(SheathError::Parse("profile must start at z = 0".into()));
        }
        if table.z.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(SheathError::Parse("z column must be strictly increasing".into()));
        }
        Ok(table)
    }

    pub fn into_profile(self, gamma: f64, ion_temp: f64) -> Result<SheathProfile> {
        SheathParams::new(gamma, ion_temp, 0.0)?;
        for (k, (phi, n)) in self.phi.iter().zip(&self.n_layer).enumerate() {
            let expect = density_layer(*phi, gamma, ion_temp);
            if (expect - n).abs() > 1e-9 * (1.0 + expect.abs()) {
                return Err(SheathError::Parse(format!(
                    "row {k}: n_layer {n} inconsistent with phi for gamma={gamma}, ion_temp={ion_temp}"
                )));
            }
        }
        Ok(SheathProfile {
            z: self.z,
            phi: self.phi,
            dphi: self.dphi,
            n_layer: self.n_layer,
            decay_rate: decay_rate(gamma, ion_temp),
            gamma,
            ion_temp,
        })
    }
}

fn check_wall_range(wall_value: f64, ion_temp: f64) -> Result<()> {
    if wall_value.abs() / ion_temp.min(1.0) > MAX_EXPONENT {
        return Err(SheathError::WallPotentialOutOfRange {
            value: wall_value,
            limit: MAX_EXPONENT,
        });
    }
    Ok(())
}

/// Leading profile on the default 4096-cell tabulation.
pub fn solve_leading_profile(params: &SheathParams) -> Result<SheathProfile> {
    solve_leading_profile_on(params, DEFAULT_PROFILE_CELLS)
}

/// Integrate `Φ' = p(Φ)` from `Φ(0) = ψ` and tabulate on `cells + 1`
/// uniform nodes of `[0, z_max]`.
pub fn solve_leading_profile_on(params: &SheathParams, cells: usize) -> Result<SheathProfile> {
    params.validate()?;
    check_wall_range(params.wall_value, params.ion_temp)?;
    if cells < 2 {
        return Err(SheathError::invalid("profile tabulation needs at least 2 cells"));
    }
    let (gamma, temp) = (params.gamma, params.ion_temp);
    let lambda = params.decay_rate();
    let h = params.z_max / cells as f64;
    let z: Vec<f64> = (0..=cells).map(|k| k as f64 * h).collect();
    let mut phi = vec![0.0; cells + 1];
    phi[0] = params.wall_value;
    if params.wall_value != 0.0 {
        // the manifold is steepest at the wall for large amplitudes
        let p0 = manifold_slope(params.wall_value, gamma, temp).abs();
        let h0 = h.min(0.1 / lambda).min(0.05 * params.wall_value.abs() / p0);
        let mut ode = ScalarDopri::new(|y| manifold_slope(y, gamma, temp), params.tol, h0);
        for k in 0..cells {
            phi[k + 1] = ode.advance(phi[k], z[k], z[k + 1]);
        }
    }
    let dphi = phi.iter().map(|p| manifold_slope(*p, gamma, temp)).collect();
    let n_layer = phi.iter().map(|p| density_layer(*p, gamma, temp)).collect();
    Ok(SheathProfile {
        z,
        phi,
        dphi,
        n_layer,
        decay_rate: lambda,
        gamma,
        ion_temp: temp,
    })
}

/// A tabulated layer function with slopes, evaluated by Hermite
/// interpolation and extended by zero beyond its last node.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerTable {
    pub z: Vec<f64>,
    pub value: Vec<f64>,
    pub slope: Vec<f64>,
}

impl LayerTable {
    pub fn zeros(z: Vec<f64>) -> Self {
        let n = z.len();
        Self {
            z,
            value: vec![0.0; n],
            slope: vec![0.0; n],
        }
    }

    pub fn eval(&self, z: f64) -> f64 {
        self.eval_with_slope(z).0
    }

    pub fn eval_with_slope(&self, z: f64) -> (f64, f64) {
        let last = *self.z.last().expect("nonempty table");
        if z >= last {
            return (0.0, 0.0);
        }
        let z = z.max(0.0);
        let k = locate(&self.z, z);
        hermite(
            self.z[k],
            self.z[k + 1],
            self.value[k],
            self.value[k + 1],
            self.slope[k],
            self.slope[k + 1],
            z,
        )
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            z: self.z.clone(),
            value: self.value.iter().map(|v| v * s).collect(),
            slope: self.slope.iter().map(|v| v * s).collect(),
        }
    }
}

/// Fourth-order finite-difference slopes on a uniform grid.
fn uniform_slopes(values: &[f64], h: f64) -> Vec<f64> {
    let n = values.len();
    let v = values;
    (0..n)
        .map(|k| {
            if n < 5 {
                let (a, b) = if k == 0 { (0, 1) } else if k == n - 1 { (n - 2, n - 1) } else { (k - 1, k + 1) };
                return (v[b] - v[a]) / ((b - a) as f64 * h);
            }
            match k {
                0 => (-25.0 * v[0] + 48.0 * v[1] - 36.0 * v[2] + 16.0 * v[3] - 3.0 * v[4]) / (12.0 * h),
                1 => (-3.0 * v[0] - 10.0 * v[1] + 18.0 * v[2] - 6.0 * v[3] + v[4]) / (12.0 * h),
                k if k == n - 2 => {
                    (3.0 * v[n - 1] + 10.0 * v[n - 2] - 18.0 * v[n - 3] + 6.0 * v[n - 4] - v[n - 5]) / (12.0 * h)
                }
                k if k == n - 1 => {
                    (25.0 * v[n - 1] - 48.0 * v[n - 2] + 36.0 * v[n - 3] - 16.0 * v[n - 4] + 3.0 * v[n - 5])
                        / (12.0 * h)
                }
                k => (v[k - 2] - 8.0 * v[k - 1] + 8.0 * v[k + 1] - v[k + 2]) / (12.0 * h),
            }
        })
        .collect()
}

/// `Φ'' + γ S'(Φ̄) Φ = F` on `[0, z_max]`, `Φ(0) = ψ`, `Φ(z_max) = 0`.
pub struct CorrectorProblem<'a> {
    pub base_profile: &'a SheathProfile,
    pub forcing: &'a dyn Fn(f64) -> f64,
    pub wall_value: f64,
    pub z_max: f64,
    pub grid_cells: usize,
}

impl<'a> CorrectorProblem<'a> {
    /// Problem on the base profile's own `[0, z_max]` with the default cell count.
    pub fn new(base_profile: &'a SheathProfile, forcing: &'a dyn Fn(f64) -> f64, wall_value: f64) -> Self {
        Self {
            base_profile,
            forcing,
            wall_value,
            z_max: base_profile.z_max(),
            grid_cells: DEFAULT_CORRECTOR_CELLS,
        }
    }
}

/// Solve the linear corrector problem with the three-point Numerov
/// discretization and a direct tridiagonal solve.
///
/// The operator is coercive because `S' < 0`; a failed diagonal-dominance
/// check therefore means the inputs are inconsistent.
pub fn solve_linear_corrector(problem: &CorrectorProblem<'_>, params: &SheathParams) -> Result<LayerTable> {
    params.validate()?;
    let cells = problem.grid_cells;
    if cells < 4 {
        return Err(SheathError::invalid("corrector grid needs at least 4 cells"));
    }
    if !(problem.z_max > 0.0) || !problem.wall_value.is_finite() {
        return Err(SheathError::invalid("corrector needs z_max > 0 and a finite wall value"));
    }
    let h = problem.z_max / cells as f64;
    let z: Vec<f64> = (0..=cells).map(|k| k as f64 * h).collect();
    let forcing: Vec<f64> = z.iter().map(|zk| (problem.forcing)(*zk)).collect();
    if forcing.iter().any(|f| !f.is_finite()) {
        return Err(SheathError::invalid("corrector forcing is not finite on [0, z_max]"));
    }
    let f_max = forcing.iter().fold(0.0f64, |m, f| m.max(f.abs()));
    if forcing[cells].abs() > 1e-6 * f_max + 1e-12 {
        return Err(SheathError::invalid(format!(
            "corrector forcing has not decayed at z_max: |F(z_max)| = {:e}, max |F| = {:e}",
            forcing[cells].abs(),
            f_max
        )));
    }
    // Φ'' = F + q Φ with q = -γ S'(Φ̄) > 0
    let q: Vec<f64> = z
        .iter()
        .map(|zk| -params.gamma * s_derivative(problem.base_profile.eval(*zk).0, params.ion_temp))
        .collect();
    let m = cells - 1;
    let h2 = h * h;
    let mut lower = vec![0.0; m];
    let mut diag = vec![0.0; m];
    let mut upper = vec![0.0; m];
    let mut rhs = vec![0.0; m];
    for r in 0..m {
        let k = r + 1;
        lower[r] = 1.0 - h2 * q[k - 1] / 12.0;
        diag[r] = -2.0 - 10.0 * h2 * q[k] / 12.0;
        upper[r] = 1.0 - h2 * q[k + 1] / 12.0;
        rhs[r] = h2 * (forcing[k - 1] + 10.0 * forcing[k] + forcing[k + 1]) / 12.0;
        let off = if r == 0 { 0.0 } else { lower[r].abs() } + if r == m - 1 { 0.0 } else { upper[r].abs() };
        if !(diag[r] < 0.0) || diag[r].abs() < off {
            return Err(SheathError::NonCoercive { node: k });
        }
    }
    rhs[0] -= lower[0] * problem.wall_value;
    let interior = solve_tridiagonal(&lower, &diag, &upper, &rhs).ok_or(SheathError::NonCoercive { node: 0 })?;
    let mut value = Vec::with_capacity(cells + 1);
    value.push(problem.wall_value);
    value.extend(interior);
    value.push(0.0);
    let slope = uniform_slopes(&value, h);
    Ok(LayerTable { z, value, slope })
}

/// First-order layer velocity and the interior boundary velocity it forces.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityCorrector {
    /// `U¹ + Γu¹` on the profile nodes.
    pub total: Vec<f64>,
    /// The layer part `U¹`, decaying to zero.
    pub layer: LayerTable,
    /// Interior boundary value `u¹(0)`.
    pub trace: f64,
}

/// `U¹ + Γu¹ = -1/(N⁰ + γ) ∫_0^z source`, with `u¹(0)` fixed by decay.
///
/// `source` is the 1D integrand `∂_t N⁰ + (∂_x u⁰)|_0 ∂_z(z N⁰)`, i.e. minus
/// the mass-equation remainder.
pub fn layer_velocity_corrector(profile: &SheathProfile, source: &dyn Fn(f64) -> f64) -> Result<VelocityCorrector> {
    let z = profile.z();
    let gamma = profile.gamma();
    // three-point Gauss-Legendre on each interval
    let gauss = [
        (-(0.6f64.sqrt()), 5.0 / 9.0),
        (0.0, 8.0 / 9.0),
        (0.6f64.sqrt(), 5.0 / 9.0),
    ];
    let mut cumulative = vec![0.0; z.len()];
    for k in 0..z.len() - 1 {
        let (a, b) = (z[k], z[k + 1]);
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let piece: f64 = gauss.iter().map(|(x, w)| w * source(mid + half * x)).sum::<f64>() * half;
        cumulative[k + 1] = cumulative[k] + piece;
    }
    let mut total = Vec::with_capacity(z.len());
    let mut total_slope = Vec::with_capacity(z.len());
    for (k, zk) in z.iter().enumerate() {
        let density = gamma * (profile.phi()[k] / profile.ion_temp()).exp();
        if !(density > 0.0) {
            return Err(SheathError::NonPositiveDensity { cell: k, value: density });
        }
        let dn = profile.dn_layer_at(*zk);
        total.push(-cumulative[k] / density);
        total_slope.push(-source(*zk) / density + cumulative[k] * dn / (density * density));
    }
    let trace = -cumulative[z.len() - 1] / gamma;
    let layer = LayerTable {
        z: z.to_vec(),
        value: total.iter().map(|v| v - trace).collect(),
        slope: total_slope,
    };
    Ok(VelocityCorrector { total, layer, trace })
}
