//! Norms, power-law fits, the relative entropy against an approximate
//! solution, and the ε-sweep convergence study.

use rayon::prelude::*;

use crate::error::{Result, SheathError};
use crate::euler_limit::{run_limit, BoundaryMode, FluidState, InitialData};
use crate::euler_poisson::{FullSolver, PlasmaParams, PotentialField};
use crate::expansion::{build_expansion, residual, ExpansionBundle};
use crate::grid::Grid1D;
use crate::io;
use crate::numerics::bregman_xlogx;

/// Errors at or below this are treated as exact and dropped from fits.
pub const FIT_FLOOR: f64 = 1e-14;

pub const STUDY_CSV_HEADER: [&str; 6] = ["epsilon", "l2_n", "l2_u", "linf_n_bl", "linf_phi_bl", "entropy_sup"];
pub const FIT_CSV_HEADER: [&str; 4] = ["column", "slope", "intercept", "r2"];
pub const STUDY_COLUMNS: [&str; 5] = ["l2_n", "l2_u", "linf_n_bl", "linf_phi_bl", "entropy_sup"];

/// `(l2, linf)` of `a − b` with cell-width weights.
pub fn discrete_norms(a: &[f64], b: &[f64], grid: &Grid1D) -> Result<(f64, f64)> {
    if a.len() != grid.len() || b.len() != grid.len() {
        return Err(SheathError::GridMismatch(format!(
            "fields of length {} and {} on a grid of {} cells",
            a.len(),
            b.len(),
            grid.len()
        )));
    }
    let mut l2 = 0.0;
    let mut linf = 0.0f64;
    for ((x, y), w) in a.iter().zip(b).zip(grid.widths()) {
        let d = (x - y).abs();
        l2 += d * d * w;
        linf = linf.max(d);
    }
    Ok((l2.sqrt(), linf))
}

/// Relative entropy of `(n, u, φ)` against `(n_app, u_app)`:
/// `½∫n|u−u_app|² + T^i∫n(ln(n/n_app) − 1 + n_app/n)
///  + ∫(e^{−φ}ln(e^{−φ}/n_app) − e^{−φ} + n_app) + ε²/2∫φ_x²`.
///
/// The two entropy integrands are evaluated in the cancellation-free form
/// `n_app (r ln r − r + 1)`.
pub fn relative_entropy(
    state: &FluidState,
    field: &PotentialField,
    n_app: &[f64],
    u_app: &[f64],
    params: &PlasmaParams,
    grid: &Grid1D,
) -> Result<f64> {
    let cells = grid.len();
    if state.len() != cells || n_app.len() != cells || u_app.len() != cells || field.phi.len() != cells {
        return Err(SheathError::GridMismatch("relative entropy inputs differ in length".into()));
    }
    let w = grid.widths();
    let mut total = 0.0;
    for i in 0..cells {
        let (n, na) = (state.n[i], n_app[i]);
        if !(n > 0.0) {
            return Err(SheathError::NonPositiveDensity { cell: i, value: n });
        }
        if !(na > 0.0) {
            return Err(SheathError::NonPositiveDensity { cell: i, value: na });
        }
        let du = state.u[i] - u_app[i];
        let electrons = (-field.phi[i]).exp();
        total += w[i]
            * (0.5 * n * du * du
                + params.ion_temp * na * bregman_xlogx(n / na)
                + na * bregman_xlogx(electrons / na));
    }
    let nodes = grid.nodes_with_boundaries();
    let values = field.with_boundaries();
    let gradient_sq: f64 = nodes
        .windows(2)
        .zip(values.windows(2))
        .map(|(x, p)| (p[1] - p[0]).powi(2) / (x[1] - x[0]))
        .sum();
    Ok(total + 0.5 * params.epsilon * params.epsilon * gradient_sq)
}

/// Least-squares line through `(ln ε, ln error)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Indices of input points dropped as below [`FIT_FLOOR`].
    pub dropped: Vec<usize>,
}

pub fn fit_rate(points: &[(f64, f64)]) -> Result<RateFit> {
    for (i, (eps, err)) in points.iter().enumerate() {
        if !(*eps > 0.0) || !eps.is_finite() || !err.is_finite() {
            return Err(SheathError::Fit(format!("point {i} is not a positive finite pair: ({eps}, {err})")));
        }
        if points[..i].iter().any(|(e, _)| e == eps) {
            return Err(SheathError::Fit(format!("duplicated epsilon {eps}")));
        }
    }
    let dropped: Vec<usize> = (0..points.len()).filter(|&i| !(points[i].1 > FIT_FLOOR)).collect();
    let kept: Vec<(f64, f64)> = points
        .iter()
        .enumerate()
        .filter(|(i, _)| !dropped.contains(i))
        .map(|(_, (e, r))| (e.ln(), r.ln()))
        .collect();
    if kept.len() < 3 {
        return Err(SheathError::Fit(format!(
            "need at least 3 points above {FIT_FLOOR:e}, have {}",
            kept.len()
        )));
    }
    let m = kept.len() as f64;
    let mx = kept.iter().map(|p| p.0).sum::<f64>() / m;
    let my = kept.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = kept.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = kept.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = kept.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0) };
    Ok(RateFit {
        slope,
        intercept,
        r_squared,
        dropped,
    })
}

/// Sup-in-time errors of one full run against the expansion.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRecord {
    pub epsilon: f64,
    /// `sup_t ‖n^ε − n⁰‖_{L²}`.
    pub l2_n_vs_limit: f64,
    pub l2_u_vs_limit: f64,
    /// `sup_t ‖n^ε − n⁰ − N⁰(x/ε)‖_{L∞}`.
    pub linf_n_vs_bundle: f64,
    pub linf_phi_vs_bundle: f64,
    /// `sup_t H_ε` against the full bundle.
    pub entropy_sup: f64,
    /// `min_t H_ε`.
    pub entropy_min: f64,
    pub cells: usize,
    pub steps: usize,
    /// Largest near-wall `|u|` seen (compare with `sqrt(3 T^i)/2`).
    pub max_near_wall_speed: f64,
}

impl ErrorRecord {
    pub fn column(&self, name: &str) -> Option<f64> {
        Some(match name {
            "l2_n" => self.l2_n_vs_limit,
            "l2_u" => self.l2_u_vs_limit,
            "linf_n_bl" => self.linf_n_vs_bundle,
            "linf_phi_bl" => self.linf_phi_vs_bundle,
            "entropy_sup" => self.entropy_sup,
            _ => return None,
        })
    }
}

/// Settings of an ε-sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    /// Physical parameters; `epsilon` is replaced by each entry of `eps_list`.
    pub base: PlasmaParams,
    pub eps_list: Vec<f64>,
    pub t_end: f64,
    /// Number of uniform sample times in `[0, t_end]`.
    pub samples: usize,
    pub initial: InitialData,
    pub order: usize,
    pub cfl: f64,
    /// Uniform cells of the limit run.
    pub limit_cells: usize,
    /// Stored time samples of the limit run (bundle cadence).
    pub limit_samples: usize,
    /// First cell width `ε / layer_resolution` of each full-solver grid.
    pub layer_resolution: f64,
    pub grading_ratio: f64,
    pub interior_width: f64,
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.eps_list.len() < 3 {
            return Err(SheathError::invalid("eps_list needs at least 3 values"));
        }
        if self.eps_list.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(SheathError::invalid("eps_list must be strictly decreasing"));
        }
        for eps in &self.eps_list {
            self.base.with_epsilon(*eps)?;
        }
        if self.base.bc != BoundaryMode::Wall {
            return Err(SheathError::invalid("the convergence study uses the wall boundary condition"));
        }
        if !(self.t_end > 0.0) || self.samples < 2 || self.limit_samples < 3 || self.limit_cells < 16 {
            return Err(SheathError::invalid(
                "study needs t_end > 0, samples >= 2, limit_samples >= 3, limit_cells >= 16",
            ));
        }
        if !(self.layer_resolution >= 8.0) {
            return Err(SheathError::invalid("layer_resolution must be at least 8 (first cell <= epsilon/8)"));
        }
        Ok(())
    }

    /// Graded grid of the full solver at `ε`.
    pub fn grid_for(&self, epsilon: f64) -> Result<Grid1D> {
        let first = (epsilon / self.layer_resolution).min(self.interior_width);
        Grid1D::graded(self.base.domain_length, first, self.grading_ratio, self.interior_width)
    }

    pub fn sample_times(&self) -> Vec<f64> {
        (0..self.samples)
            .map(|k| self.t_end * k as f64 / (self.samples - 1) as f64)
            .collect()
    }

    /// Limit run on a uniform grid and its expansion of the configured order.
    pub fn build_bundle(&self, order: usize) -> Result<ExpansionBundle> {
        let grid = Grid1D::uniform(self.base.domain_length, self.limit_cells)?;
        let initial = self.initial.sample(&grid, self.base.ion_temp)?;
        let outputs: Vec<f64> = (1..=self.limit_samples)
            .map(|k| self.t_end * k as f64 / self.limit_samples as f64)
            .collect();
        let run = run_limit(initial, &grid, BoundaryMode::Wall, self.base.ion_temp, self.cfl, &outputs)
            .map_err(|e| e.in_module("euler_limit"))?;
        let params = self.base.with_epsilon(self.eps_list[0])?;
        build_expansion(&run, &params, order).map_err(|e| e.in_module("expansion"))
    }
}

/// Run the full solver at one `ε` from well-prepared data and record the
/// sup-in-time errors.
pub fn run_single(config: &StudyConfig, bundle: &ExpansionBundle, epsilon: f64) -> Result<ErrorRecord> {
    let params = config.base.with_epsilon(epsilon)?;
    let bundle = bundle.with_epsilon(epsilon)?;
    let grid = config.grid_for(epsilon)?;
    let initial = bundle.initial_state(&grid)?;
    let mut solver = FullSolver::new(grid.clone(), params, initial, config.cfl)?;
    let mut rec = ErrorRecord {
        epsilon,
        l2_n_vs_limit: 0.0,
        l2_u_vs_limit: 0.0,
        linf_n_vs_bundle: 0.0,
        linf_phi_vs_bundle: 0.0,
        entropy_sup: 0.0,
        entropy_min: f64::INFINITY,
        cells: grid.len(),
        steps: 0,
        max_near_wall_speed: 0.0,
    };
    for t in config.sample_times() {
        solver.advance_to(t, |_, _| {})?;
        let averages = bundle.cell_averages(t, &grid)?;
        let points = bundle.evaluate(t, &grid)?;
        let state = solver.state();
        let (l2n, _) = discrete_norms(&state.n, &averages.n_limit, &grid)?;
        let (l2u, _) = discrete_norms(&state.u, &averages.u_limit, &grid)?;
        let (_, linf_n) = discrete_norms(&state.n, &averages.n_leading, &grid)?;
        let (_, linf_phi) = discrete_norms(&solver.field().phi, &points.phi_leading, &grid)?;
        let h = relative_entropy(state, solver.field(), &averages.n, &averages.u, &params, &grid)?;
        rec.l2_n_vs_limit = rec.l2_n_vs_limit.max(l2n);
        rec.l2_u_vs_limit = rec.l2_u_vs_limit.max(l2u);
        rec.linf_n_vs_bundle = rec.linf_n_vs_bundle.max(linf_n);
        rec.linf_phi_vs_bundle = rec.linf_phi_vs_bundle.max(linf_phi);
        rec.entropy_sup = rec.entropy_sup.max(h);
        rec.entropy_min = rec.entropy_min.min(h);
    }
    rec.steps = solver.steps();
    rec.max_near_wall_speed = solver.max_near_wall_speed();
    Ok(rec)
}

/// `(t, H_ε(t))` at the sample times of one well-prepared full run.
pub fn entropy_history(config: &StudyConfig, bundle: &ExpansionBundle, epsilon: f64) -> Result<Vec<(f64, f64)>> {
    let params = config.base.with_epsilon(epsilon)?;
    let bundle = bundle.with_epsilon(epsilon)?;
    let grid = config.grid_for(epsilon)?;
    let mut solver = FullSolver::new(grid.clone(), params, bundle.initial_state(&grid)?, config.cfl)?;
    let mut out = Vec::with_capacity(config.samples);
    for t in config.sample_times() {
        solver.advance_to(t, |_, _| {})?;
        let app = bundle.cell_averages(t, &grid)?;
        out.push((t, relative_entropy(solver.state(), solver.field(), &app.n, &app.u, &params, &grid)?));
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct StudyResult {
    /// Successful runs, sorted by `ε` descending.
    pub records: Vec<ErrorRecord>,
    /// Fits per column (absent when a fit is impossible).
    pub fits: Vec<(String, Result<RateFit>)>,
    /// Runs that failed, by `ε`.
    pub failures: Vec<(f64, SheathError)>,
}

impl StudyResult {
    pub fn is_complete(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn fit(&self, column: &str) -> Option<&RateFit> {
        self.fits
            .iter()
            .find(|(c, _)| c == column)
            .and_then(|(_, f)| f.as_ref().ok())
    }

    pub fn study_csv(&self) -> String {
        let col = |f: fn(&ErrorRecord) -> f64| self.records.iter().map(f).collect::<Vec<f64>>();
        io::csv_string(
            &STUDY_CSV_HEADER,
            &[
                &col(|r| r.epsilon),
                &col(|r| r.l2_n_vs_limit),
                &col(|r| r.l2_u_vs_limit),
                &col(|r| r.linf_n_vs_bundle),
                &col(|r| r.linf_phi_vs_bundle),
                &col(|r| r.entropy_sup),
            ],
        )
    }

    /// `column,slope,intercept,r2`; failed fits are written as `nan`.
    pub fn fits_csv(&self) -> String {
        let mut out = FIT_CSV_HEADER.join(",");
        out.push('\n');
        for (column, fit) in &self.fits {
            let (s, i, r) = match fit {
                Ok(f) => (io::fmt_f64(f.slope), io::fmt_f64(f.intercept), io::fmt_f64(f.r_squared)),
                Err(_) => ("nan".into(), "nan".into(), "nan".into()),
            };
            out.push_str(&format!("{column},{s},{i},{r}\n"));
        }
        out
    }
}

fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| SheathError::invalid(format!("cannot start worker pool: {e}")))
}

/// Sweep over `eps_list` with up to `jobs` concurrent runs.
pub fn run_convergence_study(config: &StudyConfig, jobs: usize) -> Result<StudyResult> {
    config.validate()?;
    let pool = thread_pool(jobs)?;
    pool.install(|| {
        let bundle = config.build_bundle(config.order)?;
        let outcomes: Vec<(f64, Result<ErrorRecord>)> = config
            .eps_list
            .par_iter()
            .map(|eps| (*eps, run_single(config, &bundle, *eps).map_err(|e| e.in_module("euler_poisson"))))
            .collect();
        let mut records = Vec::new();
        let mut failures = Vec::new();
        for (eps, outcome) in outcomes {
            match outcome {
                Ok(r) => records.push(r),
                Err(e) => failures.push((eps, e)),
            }
        }
        records.sort_by(|a, b| b.epsilon.total_cmp(&a.epsilon));
        let fits = STUDY_COLUMNS
            .iter()
            .map(|c| {
                let pts: Vec<(f64, f64)> = records
                    .iter()
                    .map(|r| (r.epsilon, r.column(c).expect("known column")))
                    .collect();
                (c.to_string(), fit_rate(&pts))
            })
            .collect();
        Ok(StudyResult {
            records,
            fits,
            failures,
        })
    })
}

/// Residual norms of one bundle order, maximized over sample times.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualRecord {
    pub epsilon: f64,
    pub order: usize,
    pub r_n: f64,
    pub r_u: f64,
    pub r_phi: f64,
}

/// Grid used for residual evaluation: first cell `ε/64`, ratio 1.03.
pub fn residual_grid(length: f64, epsilon: f64, interior_width: f64) -> Result<Grid1D> {
    Grid1D::graded(length, (epsilon / 64.0).min(interior_width), 1.03, interior_width)
}

/// `sup_t` of the residual norms of `bundle` at each `ε`, over `times`.
pub fn residual_sweep(
    bundle: &ExpansionBundle,
    base: &PlasmaParams,
    eps_list: &[f64],
    times: &[f64],
    interior_width: f64,
) -> Result<Vec<ResidualRecord>> {
    eps_list
        .par_iter()
        .map(|eps| {
            let params = base.with_epsilon(*eps)?;
            let grid = residual_grid(base.domain_length, *eps, interior_width)?;
            let mut rec = ResidualRecord {
                epsilon: *eps,
                order: bundle.order(),
                r_n: 0.0,
                r_u: 0.0,
                r_phi: 0.0,
            };
            for t in times {
                let r = residual(bundle, &params, &grid, *t)?;
                rec.r_n = rec.r_n.max(r.r_n_norm);
                rec.r_u = rec.r_u.max(r.r_u_norm);
                rec.r_phi = rec.r_phi.max(r.r_phi_norm);
            }
            Ok(rec)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn norms_of_simple_differences() {
        let grid = Grid1D::uniform(2.0, 16).unwrap();
        let a = vec![1.0; 16];
        let (l2, linf) = discrete_norms(&a, &a, &grid).unwrap();
        assert_eq!((l2, linf), (0.0, 0.0));
        let (l2, linf) = discrete_norms(&a, &[0.0; 16], &grid).unwrap();
        assert!((l2 - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(linf, 1.0);
        assert!(discrete_norms(&a, &[0.0; 3], &grid).is_err());
    }

    #[test]
    fn exact_power_laws() {
        let f = fit_rate(&[(0.1, 0.1), (0.01, 0.01), (0.001, 0.001)]).unwrap();
        assert!((f.slope - 1.0).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        let pts: Vec<(f64, f64)> = [0.1, 0.01, 0.001].iter().map(|e: &f64| (*e, e.sqrt())).collect();
        assert!((fit_rate(&pts).unwrap().slope - 0.5).abs() < 1e-12);
    }

    #[test]
    fn fit_rejects_degenerate_input() {
        assert!(fit_rate(&[(0.1, 0.1), (0.1, 0.2), (0.01, 0.01)]).is_err());
        assert!(fit_rate(&[(0.1, 0.1), (0.01, 0.01)]).is_err());
        let f = fit_rate(&[(0.1, 0.1), (0.05, 0.0), (0.01, 0.01), (0.001, 0.001)]).unwrap();
        assert_eq!(f.dropped, vec![1]);
        assert!(fit_rate(&[(0.1, 0.1), (0.05, 0.0), (0.01, 0.01)]).is_err());
    }
}
