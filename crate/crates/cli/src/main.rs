//! `sheath`: command-line driver.
//!
//! Exit status: 0 on success, 1 on invalid input, 2 on solver failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sheath::config::{parse_config_for, Mode, RunConfig};
use sheath::diagnostics::{entropy_history, run_convergence_study};
use sheath::euler_limit::{boundary_trace, run_limit};
use sheath::euler_poisson::{electron_mass, near_wall_speed_bound, snapshot_csv, FullSolver, ENERGY_CSV_HEADER};
use sheath::io::{csv_string, fmt_f64, write_atomic};
use sheath::profiles::{solve_leading_profile_on, SheathParams};
use sheath::SheathError;

#[derive(Parser)]
#[command(name = "sheath", version, about = "Plasma sheath layers and the quasineutral limit of Euler-Poisson")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Leading sheath profile; writes profile.csv.
    Profile(Common),
    /// Quasineutral limit run; writes limit snapshots and the wall trace.
    Limit(Common),
    /// Full Euler-Poisson run; writes snapshots and energy.csv.
    Simulate(Common),
    /// Epsilon sweep; writes study.csv and fits.csv.
    Converge {
        #[command(flatten)]
        common: Common,
        /// Concurrent runs.
        #[arg(long, default_value_t = 4)]
        jobs: usize,
    },
    /// Relative entropy against the expansion; writes entropy.csv.
    Entropy(Common),
}

#[derive(Args)]
struct Common {
    /// Configuration file (`key = value` lines).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory, overriding `output_dir`.
    #[arg(long)]
    output: Option<PathBuf>,
    /// No random numbers are used anywhere; accepted for scripts that assert it.
    #[arg(long)]
    seed_free: bool,
}

enum Failure {
    Input(String),
    Solver(String),
}

impl From<SheathError> for Failure {
    fn from(e: SheathError) -> Self {
        match e.root() {
            SheathError::InvalidParameter(_) | SheathError::WallPotentialOutOfRange { .. } | SheathError::Parse(_) => {
                Failure::Input(e.to_string())
            }
            _ => Failure::Solver(e.to_string()),
        }
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::Solver(format!("cannot write {}: {e}", path.display()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let (mode, common, jobs) = match &cli.command {
        Command::Profile(c) => (Mode::Profile, c, 1),
        Command::Limit(c) => (Mode::Limit, c, 1),
        Command::Simulate(c) => (Mode::Simulate, c, 1),
        Command::Converge { common, jobs } => (Mode::Converge, common, *jobs),
        Command::Entropy(c) => (Mode::Entropy, c, 1),
    };
    match run(mode, common, jobs) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Solver(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(mode: Mode, common: &Common, jobs: usize) -> Result<String, Failure> {
    let text = match &common.config {
        Some(path) => fs::read_to_string(path)
            .map_err(|e| Failure::Input(format!("cannot read {}: {e}", path.display())))?,
        None => String::new(),
    };
    let mut config = parse_config_for(&text, Some(mode)).map_err(|e| Failure::Input(e.to_string()))?;
    if let Some(dir) = &common.output {
        if dir.exists() && !dir.is_dir() {
            return Err(Failure::Input(format!("--output {} is not a directory", dir.display())));
        }
        config.output_dir = dir.clone();
    }
    if jobs == 0 {
        return Err(Failure::Input("--jobs must be at least 1".into()));
    }
    fs::create_dir_all(&config.output_dir).map_err(|e| io_failure(&config.output_dir, e))?;
    match mode {
        Mode::Profile => profile(&config),
        Mode::Limit => limit(&config),
        Mode::Simulate => simulate(&config),
        Mode::Converge => converge(&config, jobs),
        Mode::Entropy => entropy(&config),
    }
}

fn write(config: &RunConfig, name: &str, contents: &str) -> Result<(), Failure> {
    let path = config.output_dir.join(name);
    write_atomic(&path, contents).map_err(|e| io_failure(&path, e))
}

fn profile(config: &RunConfig) -> Result<String, Failure> {
    let p = &config.profile;
    let mut params = SheathParams::new(p.gamma, config.params.ion_temp, p.wall_value)?;
    params.tol = p.tol;
    if let Some(z_max) = p.z_max {
        params.z_max = z_max;
    }
    let profile = solve_leading_profile_on(&params, p.cells).map_err(|e| e.in_module("profiles"))?;
    write(config, "profile.csv", &profile.to_csv())?;
    Ok(format!(
        "profile: decay_rate = {} layer_mass = {}",
        fmt_f64(profile.decay_rate()),
        fmt_f64(profile.layer_mass())
    ))
}

fn snapshot_times(config: &RunConfig) -> Vec<f64> {
    (1..=config.snapshots)
        .map(|k| config.t_end * k as f64 / config.snapshots as f64)
        .collect()
}

fn limit(config: &RunConfig) -> Result<String, Failure> {
    let grid = config.uniform_grid()?;
    let temp = config.params.ion_temp;
    config.params.bc.validate_limit(temp)?;
    let initial = config.initial.sample(&grid, temp)?;
    let run = run_limit(initial, &grid, config.params.bc, temp, config.cfl, &snapshot_times(config))
        .map_err(|e| e.in_module("euler_limit"))?;
    let mut trace = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (k, state) in run.states.iter().enumerate() {
        write(config, &format!("limit_{k:03}.csv"), &state.to_csv(&grid))?;
        let tr = boundary_trace(state, &grid).map_err(|e| e.in_module("euler_limit"))?;
        trace.0.push(state.t);
        trace.1.push(tr.gamma);
        trace.2.push(tr.u_trace);
        trace.3.push(tr.phi0);
    }
    write(
        config,
        "trace.csv",
        &csv_string(&["t", "gamma", "u_trace", "phi0"], &[&trace.0, &trace.1, &trace.2, &trace.3]),
    )?;
    write(config, "limit_meta.txt", &run.metadata())?;
    let last = run.states.last().expect("initial state");
    let mass_change = last.mass(&grid) - run.states[0].mass(&grid);
    Ok(format!(
        "limit: t_end = {} gamma = {} mass_change = {}",
        fmt_f64(last.t),
        fmt_f64(*trace.1.last().expect("trace")),
        fmt_f64(mass_change)
    ))
}

fn simulate(config: &RunConfig) -> Result<String, Failure> {
    let grid = config.graded_grid()?;
    let params = config.params;
    let initial = config.initial.sample(&grid, params.ion_temp)?;
    let mut solver = FullSolver::new(grid.clone(), params, initial, config.cfl).map_err(|e| e.in_module("euler_poisson"))?;
    let e0 = solver.energy()?;
    let mass0 = solver.mass();
    let mut rows = vec![e0.csv_row(0.0)];
    let mut drift = 0.0f64;
    let mut snapshot = 0;
    write(config, "snapshot_000.csv", &snapshot_csv(solver.state(), solver.field(), &grid))?;
    let energy_times: Vec<f64> = (1..config.samples)
        .map(|k| config.t_end * k as f64 / (config.samples - 1) as f64)
        .collect();
    let snaps = snapshot_times(config);
    let mut stops: Vec<f64> = energy_times.iter().chain(&snaps).copied().collect();
    stops.sort_by(f64::total_cmp);
    stops.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * config.t_end);
    let mut inflow = 0.0;
    for t in stops {
        solver
            .advance_to(t, |_, r| inflow += r.boundary_mass_in)
            .map_err(|e| e.in_module("euler_poisson"))?;
        if energy_times.iter().any(|s| (s - t).abs() <= 1e-12 * config.t_end) {
            let e = solver.energy()?;
            drift = drift.max((e.total - e0.total).abs() / (e0.total + 1.0).abs());
            rows.push(e.csv_row(t));
        }
        if snaps.iter().any(|s| (s - t).abs() <= 1e-12 * config.t_end) {
            snapshot += 1;
            write(
                config,
                &format!("snapshot_{snapshot:03}.csv"),
                &snapshot_csv(solver.state(), solver.field(), &grid),
            )?;
        }
    }
    let columns: Vec<Vec<f64>> = (0..ENERGY_CSV_HEADER.len())
        .map(|j| rows.iter().map(|r| r[j]).collect())
        .collect();
    let refs: Vec<&[f64]> = columns.iter().map(|c| c.as_slice()).collect();
    write(config, "energy.csv", &csv_string(&ENERGY_CSV_HEADER, &refs))?;
    if solver.speed_warning() {
        eprintln!(
            "warning: near-wall speed {} exceeded sqrt(3 T^i)/2 = {}",
            fmt_f64(solver.max_near_wall_speed()),
            fmt_f64(near_wall_speed_bound(params.ion_temp))
        );
    }
    let balance = solver.mass() - mass0 - inflow;
    Ok(format!(
        "simulate: steps = {} max_relative_energy_drift = {} mass_change = {} mass_balance_defect = {} electron_mass = {}",
        solver.steps(),
        fmt_f64(drift),
        fmt_f64(solver.mass() - mass0),
        fmt_f64(balance),
        fmt_f64(electron_mass(solver.field(), &grid))
    ))
}

fn converge(config: &RunConfig, jobs: usize) -> Result<String, Failure> {
    let result = run_convergence_study(&config.study(), jobs)?;
    write(config, "study.csv", &result.study_csv())?;
    write(config, "fits.csv", &result.fits_csv())?;
    for r in &result.records {
        if r.max_near_wall_speed > near_wall_speed_bound(config.params.ion_temp) {
            eprintln!(
                "warning: epsilon = {}: near-wall speed {} exceeded sqrt(3 T^i)/2",
                r.epsilon,
                fmt_f64(r.max_near_wall_speed)
            );
        }
    }
    if !result.is_complete() {
        let failed: Vec<String> = result.failures.iter().map(|(e, err)| format!("epsilon = {e}: {err}")).collect();
        return Err(Failure::Solver(format!(
            "study incomplete (partial results written):\n{}",
            failed.join("\n")
        )));
    }
    match result.fit("l2_n") {
        Some(f) => Ok(format!(
            "converge: l2_n slope = {} r2 = {}",
            fmt_f64(f.slope),
            fmt_f64(f.r_squared)
        )),
        None => Err(Failure::Solver("l2_n rate fit failed".into())),
    }
}

fn entropy(config: &RunConfig) -> Result<String, Failure> {
    let mut study = config.study();
    study.eps_list = vec![config.params.epsilon];
    let bundle = study.build_bundle(config.expansion_order)?;
    let history = entropy_history(&study, &bundle, config.params.epsilon).map_err(|e| e.in_module("diagnostics"))?;
    let t: Vec<f64> = history.iter().map(|h| h.0).collect();
    let h: Vec<f64> = history.iter().map(|h| h.1).collect();
    write(config, "entropy.csv", &csv_string(&["t", "entropy"], &[&t, &h]))?;
    let sup = h.iter().copied().fold(0.0, f64::max);
    let min = h.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(format!("entropy: sup = {} min = {}", fmt_f64(sup), fmt_f64(min)))
}
