//! Line-oriented `key = value` run configuration with `#` comments.
//!
//! All problems are collected and reported together, each with the line
//! it refers to (line 0 for keys that are missing).

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

use crate::diagnostics::StudyConfig;
use crate::euler_limit::{BoundaryMode, InitialData, InitialPreset};
use crate::euler_poisson::PlasmaParams;
use crate::grid::Grid1D;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Profile,
    Limit,
    Simulate,
    Converge,
    Entropy,
}

impl Mode {
    pub fn name(&self) -> &'static str {
        match self {
            Mode::Profile => "profile",
            Mode::Limit => "limit",
            Mode::Simulate => "simulate",
            Mode::Converge => "converge",
            Mode::Entropy => "entropy",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "profile" => Mode::Profile,
            "limit" => Mode::Limit,
            "simulate" => Mode::Simulate,
            "converge" => Mode::Converge,
            "entropy" => Mode::Entropy,
            _ => return None,
        })
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line == 0 {
            write!(f, "{}", self.message)
        } else {
            write!(f, "line {}: {}", self.line, self.message)
        }
    }
}

/// Every problem found in a configuration.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct ConfigErrors(pub Vec<ConfigError>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let lines: Vec<String> = self.0.iter().map(|e| e.to_string()).collect();
        f.write_str(&lines.join("\n"))
    }
}

/// Leading-profile settings (`profile` mode).
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileSettings {
    pub gamma: f64,
    pub wall_value: f64,
    pub z_max: Option<f64>,
    pub tol: f64,
    pub cells: usize,
}

/// Grid settings: `cells` for uniform grids, the rest for graded grids.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub cells: usize,
    pub grading_ratio: f64,
    pub first_width: f64,
    pub interior_width: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub params: PlasmaParams,
    pub profile: ProfileSettings,
    pub grid: GridSpec,
    pub cfl: f64,
    pub t_end: f64,
    pub output_dir: PathBuf,
    pub eps_list: Vec<f64>,
    pub expansion_order: usize,
    pub initial: InitialData,
    /// Sample times for sup-in-time errors and energy/entropy series.
    pub samples: usize,
    /// Snapshot files written by `limit` and `simulate`.
    pub snapshots: usize,
    pub limit_cells: usize,
    pub limit_samples: usize,
    pub layer_resolution: f64,
}

impl RunConfig {
    /// Uniform grid of `cells` cells on `[0, L]`.
    pub fn uniform_grid(&self) -> crate::Result<Grid1D> {
        Grid1D::uniform(self.params.domain_length, self.grid.cells)
    }

    /// Graded grid resolving the layer at the configured `ε`.
    pub fn graded_grid(&self) -> crate::Result<Grid1D> {
        Grid1D::graded(
            self.params.domain_length,
            self.grid.first_width,
            self.grid.grading_ratio,
            self.grid.interior_width,
        )
    }

    pub fn study(&self) -> StudyConfig {
        StudyConfig {
            base: self.params,
            eps_list: self.eps_list.clone(),
            t_end: self.t_end,
            samples: self.samples,
            initial: self.initial,
            order: self.expansion_order,
            cfl: self.cfl,
            limit_cells: self.limit_cells,
            limit_samples: self.limit_samples,
            layer_resolution: self.layer_resolution,
            grading_ratio: self.grid.grading_ratio,
            interior_width: self.grid.interior_width,
        }
    }
}

const KEYS: &[&str] = &[
    "mode",
    "ion_temp",
    "epsilon",
    "wall_potential",
    "bc",
    "u_b",
    "domain_length",
    "gamma",
    "wall_value",
    "z_max",
    "tol",
    "profile_cells",
    "cells",
    "grading_ratio",
    "first_width",
    "interior_width",
    "cfl",
    "t_end",
    "output_dir",
    "eps_list",
    "expansion_order",
    "preset",
    "amplitude",
    "center",
    "width",
    "samples",
    "snapshots",
    "limit_cells",
    "limit_samples",
    "layer_resolution",
];

struct Reader {
    entries: BTreeMap<String, (usize, String)>,
    errors: Vec<ConfigError>,
}

impl Reader {
    fn error(&mut self, key: &str, message: impl fmt::Display) {
        let line = self.entries.get(key).map_or(0, |e| e.0);
        self.errors.push(ConfigError {
            line,
            message: format!("{key}: {message}"),
        });
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|e| e.1.as_str())
    }

    fn number(&mut self, key: &str, default: f64, valid: impl Fn(f64) -> bool, range: &str) -> f64 {
        let Some(raw) = self.raw(key).map(str::to_owned) else {
            return default;
        };
        match raw.parse::<f64>() {
            Ok(v) if v.is_finite() && valid(v) => v,
            Ok(_) => {
                self.error(key, format!("must be {range}"));
                default
            }
            Err(_) => {
                self.error(key, format!("expected a number, got '{raw}'"));
                default
            }
        }
    }

    fn count(&mut self, key: &str, default: usize, min: usize) -> usize {
        let Some(raw) = self.raw(key).map(str::to_owned) else {
            return default;
        };
        match raw.parse::<usize>() {
            Ok(v) if v >= min => v,
            Ok(_) => {
                self.error(key, format!("must be an integer >= {min}"));
                default
            }
            Err(_) => {
                self.error(key, format!("expected a nonnegative integer, got '{raw}'"));
                default
            }
        }
    }
}

/// Parse and validate a configuration; `mode` must be present.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigErrors> {
    parse_config_for(text, None)
}

/// Parse a configuration for a given subcommand. A `mode` key, if present,
/// must agree with it.
pub fn parse_config_for(text: &str, mode: Option<Mode>) -> Result<RunConfig, ConfigErrors> {
    let mut r = Reader {
        entries: BTreeMap::new(),
        errors: Vec::new(),
    };
    for (i, raw_line) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw_line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            r.errors.push(ConfigError {
                line,
                message: format!("expected 'key = value', got '{content}'"),
            });
            continue;
        };
        let (key, value) = (key.trim(), value.trim());
        if !KEYS.contains(&key) {
            r.errors.push(ConfigError {
                line,
                message: format!("{key}: unknown key"),
            });
            continue;
        }
        if let Some((first, _)) = r.entries.get(key) {
            r.errors.push(ConfigError {
                line,
                message: format!("{key}: duplicate key (first set on line {first})"),
            });
            continue;
        }
        r.entries.insert(key.to_string(), (line, value.to_string()));
    }

    let file_mode = match r.raw("mode").map(str::to_owned) {
        Some(m) => match Mode::parse(&m) {
            Some(m) => Some(m),
            None => {
                r.error("mode", format!("must be one of profile, limit, simulate, converge, entropy; got '{m}'"));
                None
            }
        },
        None => None,
    };
    let mode = match (file_mode, mode) {
        (Some(f), Some(c)) if f != c => {
            r.error("mode", format!("config says '{f}' but the subcommand is '{c}'"));
            c
        }
        (Some(m), _) | (None, Some(m)) => m,
        (None, None) => {
            if !r.entries.contains_key("mode") {
                r.error("mode", "missing required key");
            }
            Mode::Profile
        }
    };

    let positive = |v: f64| v > 0.0;
    let ion_temp = r.number("ion_temp", 1.0, positive, "positive");
    let epsilon = r.number("epsilon", 0.05, |v| v > 0.0 && v <= 1.0, "in (0,1]");
    let wall_potential = r.number("wall_potential", 0.0, |_| true, "finite");
    let domain_length = r.number("domain_length", 1.0, positive, "positive");
    let bc = match r.raw("bc").map(str::to_owned).as_deref() {
        None | Some("wall") => {
            if r.entries.contains_key("u_b") {
                r.error("u_b", "only used with bc = outflow");
            }
            BoundaryMode::Wall
        }
        Some("outflow") => {
            if !r.entries.contains_key("u_b") {
                r.error("u_b", "missing required key for bc = outflow");
                BoundaryMode::Outflow { u_b: -0.5 * ion_temp.sqrt() }
            } else {
                let limit = ion_temp.sqrt();
                let u_b = r.number("u_b", -0.5 * limit, |v| v < 0.0 && v > -limit, &format!("in (-sqrt(ion_temp), 0) = ({:.6}, 0)", -limit));
                BoundaryMode::Outflow { u_b }
            }
        }
        Some(other) => {
            let other = other.to_string();
            r.error("bc", format!("must be 'wall' or 'outflow', got '{other}'"));
            BoundaryMode::Wall
        }
    };
    if !(domain_length >= 20.0 * epsilon) {
        r.error("domain_length", format!("must be at least 20 * epsilon = {}", 20.0 * epsilon));
    }

    let gamma = r.number("gamma", 1.0, positive, "positive");
    let wall_value = r.number("wall_value", wall_potential + gamma.ln(), |_| true, "finite");
    let z_max = r.entries.contains_key("z_max").then(|| r.number("z_max", 1.0, positive, "positive"));
    let tol = r.number("tol", crate::profiles::DEFAULT_TOL, positive, "positive");
    let profile_cells = r.count("profile_cells", crate::profiles::DEFAULT_PROFILE_CELLS, 2);

    let cells = r.count("cells", 400, 16);
    let grading_ratio = r.number("grading_ratio", 1.05, |v| v > 1.0 && v <= 1.2, "in (1, 1.2]");
    let interior_width = r.number(
        "interior_width",
        domain_length / 400.0,
        |v| v > 0.0 && v < domain_length,
        "in (0, domain_length)",
    );
    let first_width = r.number(
        "first_width",
        (epsilon / 16.0).min(interior_width),
        |v| v > 0.0 && v <= epsilon / 8.0,
        "in (0, epsilon/8]",
    );
    if first_width > interior_width {
        r.error("first_width", "must not exceed interior_width");
    }
    let cfl = r.number("cfl", 0.4, |v| v > 0.0 && v < 1.0, "in (0,1)");
    let t_end = r.number("t_end", 0.2, positive, "positive");
    let output_dir = PathBuf::from(r.raw("output_dir").unwrap_or("output"));
    if output_dir.exists() && !output_dir.is_dir() {
        r.error("output_dir", format!("'{}' exists and is not a directory", output_dir.display()));
    }

    let eps_list = match r.raw("eps_list").map(str::to_owned) {
        Some(raw) => {
            let parsed: Result<Vec<f64>, _> = raw.split(',').map(|s| s.trim().parse::<f64>()).collect();
            match parsed {
                Ok(v) if v.len() < 3 => {
                    r.error("eps_list", "needs at least 3 values");
                    v
                }
                Ok(v) if v.iter().any(|e| !(*e > 0.0 && *e <= 1.0)) => {
                    r.error("eps_list", "values must be in (0,1]");
                    v
                }
                Ok(v) if v.windows(2).any(|w| !(w[1] < w[0])) => {
                    r.error("eps_list", "values must be strictly decreasing");
                    v
                }
                Ok(v) => {
                    if let Some(e) = v.iter().find(|e| !(domain_length >= 20.0 * **e)) {
                        r.error("eps_list", format!("domain_length must be at least 20 * {e}"));
                    }
                    v
                }
                Err(_) => {
                    r.error("eps_list", format!("expected comma-separated numbers, got '{raw}'"));
                    Vec::new()
                }
            }
        }
        None => {
            if mode == Mode::Converge {
                r.error("eps_list", "missing required key for mode = converge");
            }
            vec![0.04, 0.02, 0.01, 0.005]
        }
    };
    let expansion_order = match r.count("expansion_order", 1, 0) {
        o @ (0 | 1) => o,
        _ => {
            r.error("expansion_order", "must be 0 or 1");
            1
        }
    };

    let preset = match r.raw("preset").unwrap_or("bump") {
        "flat" => InitialPreset::Flat,
        "bump" => InitialPreset::Bump,
        "pulse" => InitialPreset::Pulse,
        other => {
            let other = other.to_string();
            r.error("preset", format!("must be flat, bump or pulse, got '{other}'"));
            InitialPreset::Bump
        }
    };
    let defaults = InitialData::default_bump(domain_length);
    let amplitude = r.number("amplitude", defaults.amplitude, |_| true, "finite");
    let center = r.number("center", defaults.center, |v| v > 0.0 && v < domain_length, "in (0, domain_length)");
    let width = r.number("width", defaults.width, positive, "positive");
    if preset == InitialPreset::Bump && !(amplitude > -1.0) {
        r.error("amplitude", "must exceed -1 so the density stays positive");
    }

    let samples = r.count("samples", 20, 2);
    let snapshots = r.count("snapshots", 5, 1);
    let limit_cells = r.count("limit_cells", 2000, 16);
    let limit_samples = r.count("limit_samples", 100, 3);
    let layer_resolution = r.number("layer_resolution", 16.0, |v| v >= 8.0, "at least 8");

    let params = PlasmaParams {
        ion_temp,
        epsilon,
        wall_potential,
        bc,
        domain_length,
    };
    if mode == Mode::Converge && bc != BoundaryMode::Wall {
        r.error("bc", "mode = converge requires bc = wall");
    }
    if matches!(mode, Mode::Entropy) && bc != BoundaryMode::Wall {
        r.error("bc", "mode = entropy requires bc = wall");
    }

    if !r.errors.is_empty() {
        r.errors.sort_by_key(|e| e.line);
        return Err(ConfigErrors(r.errors));
    }
    Ok(RunConfig {
        mode,
        params,
        profile: ProfileSettings {
            gamma,
            wall_value,
            z_max,
            tol,
            cells: profile_cells,
        },
        grid: GridSpec {
            cells,
            grading_ratio,
            first_width,
            interior_width,
        },
        cfl,
        t_end,
        output_dir,
        eps_list,
        expansion_order,
        initial: InitialData {
            preset,
            amplitude,
            center,
            width,
        },
        samples,
        snapshots,
        limit_cells,
        limit_samples,
        layer_resolution,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_profile_config() {
        let c = parse_config("mode = profile\nion_temp = 1\ngamma = 1\nwall_value = 1\n").unwrap();
        assert_eq!(c.mode, Mode::Profile);
        assert_eq!(c.profile.wall_value, 1.0);
        assert_eq!(c.cfl, 0.4);
        assert_eq!(c.t_end, 0.2);
        assert_eq!(c.params.bc, BoundaryMode::Wall);
        assert_eq!(c.initial, InitialData::default_bump(1.0));
    }

    #[test]
    fn range_error_names_key_and_line() {
        let e = parse_config("mode = simulate\n# comment\nepsilon = -0.1\n").unwrap_err();
        assert_eq!(e.0.len(), 1);
        assert_eq!(e.0[0].line, 3);
        assert_eq!(e.0[0].message, "epsilon: must be in (0,1]");
    }

    #[test]
    fn converge_requires_eps_list() {
        let e = parse_config("mode = converge\n").unwrap_err();
        assert!(e.0.iter().any(|e| e.message.starts_with("eps_list")));
    }

    #[test]
    fn all_errors_are_reported() {
        let e = parse_config("mode = simulate\ncfl = 2\nfoo = 1\nt_end = abc\nbc = outflow\n").unwrap_err();
        let text = e.to_string();
        assert!(text.contains("line 2: cfl"));
        assert!(text.contains("line 3: foo: unknown key"));
        assert!(text.contains("line 4: t_end: expected a number"));
        assert!(text.contains("u_b: missing required key"));
    }

    #[test]
    fn subcommand_must_match_mode() {
        assert!(parse_config_for("mode = limit\n", Some(Mode::Simulate)).is_err());
        assert_eq!(parse_config_for("", Some(Mode::Limit)).unwrap().mode, Mode::Limit);
    }
}
