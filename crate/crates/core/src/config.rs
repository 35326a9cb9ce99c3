//! Flat `key = value` scenario files.
//!
//! ```text
//! # defaults shown
//! n_tx = 15
//! tau_grid = 0.05:0.05:1.0
//! eps_grid = 0.01, 0.02, 0.05
//! tol.user_rate_clt_vs_physical = 0.02
//! ```
//!
//! Gains `c1..c4` are magnitudes with zero phase. Grids accept either a comma
//! list or `start:step:stop` (inclusive).

use std::collections::BTreeMap;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::stochastic::AveragingMode;
use crate::system_model::SystemParams;

/// Scenario parameters whose value a sweep may vary.
pub const SWEEP_VARS: &[&str] = &[
    "tau", "n_tx", "m_rx", "n_eav", "frame_len", "power", "alpha_mag", "delta", "c1", "c2", "c3", "c4",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub params: SystemParams,
    /// Power splits for the rate and ergodic-CRB figures.
    pub tau_grid: Vec<f64>,
    /// CCDF thresholds; derived from the closed forms when absent.
    pub eps_grid: Option<Vec<f64>>,
    pub eps_points: usize,
    /// Power split of the CCDF figure.
    pub ccdf_tau: f64,
    /// Monte Carlo trials behind the figure columns.
    pub trials: usize,
    /// Trials for the tolerance checks that need tight means.
    pub mean_trials: usize,
    /// Gaussian-surrogate samples for the CLT integrals.
    pub integration_samples: usize,
    pub seed: u64,
    pub mode: AveragingMode,
    pub sweep_var: Option<String>,
    pub sweep_grid: Vec<f64>,
    /// Acceptance criteria run by `validate` (1..=5).
    pub criteria: Vec<u8>,
    /// Per-check tolerance overrides, keyed by check name.
    pub tolerances: BTreeMap<String, f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            params: SystemParams::default(),
            tau_grid: (1..=20).map(|i| i as f64 / 20.0).collect(),
            eps_grid: None,
            eps_points: 40,
            ccdf_tau: 0.76,
            trials: 10_000,
            mean_trials: 1_000_000,
            integration_samples: 100_000,
            seed: 42,
            mode: AveragingMode::PaperVerbatim,
            sweep_var: None,
            sweep_grid: Vec::new(),
            criteria: vec![1, 2, 3, 4, 5],
            tolerances: BTreeMap::new(),
        }
    }
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    v.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| Error::Config(format!("{key}: '{v}' is not a finite number")))
}

fn parse_usize(key: &str, v: &str) -> Result<usize> {
    let x = v.replace('_', "");
    if let Ok(n) = x.parse::<usize>() {
        return Ok(n);
    }
    // allow 1e6 style counts
    match x.parse::<f64>() {
        Ok(f) if f >= 0.0 && f.fract() == 0.0 && f < 1e15 => Ok(f as usize),
        _ => Err(Error::Config(format!("{key}: '{v}' is not a non-negative integer"))),
    }
}

/// Comma list or inclusive `start:step:stop`.
pub fn parse_grid(key: &str, v: &str) -> Result<Vec<f64>> {
    let grid = if v.contains(':') {
        let parts: Vec<&str> = v.split(':').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(Error::Config(format!("{key}: range must be start:step:stop")));
        }
        let (a, h, b) = (parse_f64(key, parts[0])?, parse_f64(key, parts[1])?, parse_f64(key, parts[2])?);
        if h <= 0.0 || b < a {
            return Err(Error::Config(format!("{key}: empty or backwards range")));
        }
        let count = ((b - a) / h + 1e-9).floor() as usize + 1;
        (0..count).map(|i| a + h * i as f64).collect()
    } else {
        v.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| parse_f64(key, s))
            .collect::<Result<Vec<_>>>()?
    };
    if grid.is_empty() {
        return Err(Error::Config(format!("{key}: empty grid")));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config(format!("{key}: grid must be strictly increasing")));
    }
    Ok(grid)
}

/// Set a scenario parameter by name (shared by the parser and sweeps).
pub fn set_param(params: &mut SystemParams, key: &str, value: f64) -> Result<()> {
    let count = |v: f64| -> Result<usize> {
        if v >= 0.0 && v.fract() == 0.0 {
            Ok(v as usize)
        } else {
            Err(Error::Config(format!("{key}: '{v}' is not a non-negative integer")))
        }
    };
    match key {
        "n_tx" => params.n_tx = count(value)?,
        "m_rx" => params.m_rx = count(value)?,
        "n_eav" => params.n_eav = count(value)?,
        "frame_len" => params.frame_len = count(value)?,
        "power" => params.power = value,
        "tau" => params.tau = value,
        "sigma_u" => params.sigma_u = value,
        "sigma_r" => params.sigma_r = value,
        "c1" => params.c1 = Complex64::new(value, 0.0),
        "c2" => params.c2 = Complex64::new(value, 0.0),
        "c3" => params.c3 = Complex64::new(value, 0.0),
        "c4" => params.c4 = Complex64::new(value, 0.0),
        "alpha_mag" | "alpha" => params.alpha_mag = value,
        "phase_alpha" => params.phase_alpha = value,
        "phase_beta" => params.phase_beta = value,
        "delta" => params.delta = value,
        _ => return Err(Error::Config(format!("unknown parameter '{key}'"))),
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| Error::Config(format!("line {}: expected 'key = value'", lineno + 1)))?;
            cfg.apply(key, value)
                .map_err(|e| Error::Config(format!("line {}: {}", lineno + 1, strip_prefix(e))))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "tau_grid" => self.tau_grid = parse_grid(key, value)?,
            "eps_grid" => self.eps_grid = Some(parse_grid(key, value)?),
            "eps_points" => self.eps_points = parse_usize(key, value)?,
            "ccdf_tau" => self.ccdf_tau = parse_f64(key, value)?,
            "trials" => self.trials = parse_usize(key, value)?,
            "mean_trials" => self.mean_trials = parse_usize(key, value)?,
            "integration_samples" => self.integration_samples = parse_usize(key, value)?,
            "seed" => self.seed = parse_usize(key, value)? as u64,
            "mode" => self.mode = value.parse()?,
            "sweep_var" => self.sweep_var = Some(value.to_string()),
            "sweep_grid" => self.sweep_grid = parse_grid(key, value)?,
            "criteria" => {
                self.criteria = value
                    .split(',')
                    .map(|s| parse_usize(key, s.trim()).map(|v| v as u8))
                    .collect::<Result<_>>()?
            }
            k if k.starts_with("tol.") => {
                self.tolerances.insert(k[4..].to_string(), parse_f64(key, value)?);
            }
            k => set_param(&mut self.params, k, parse_f64(k, value)?)?,
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate().map_err(|e| Error::Config(strip_prefix(e)))?;
        if self.trials < 1 || self.mean_trials < 1 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.tau_grid.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return Err(Error::Config("tau_grid values must lie in [0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&self.ccdf_tau) {
            return Err(Error::Config("ccdf_tau must lie in [0, 1]".into()));
        }
        if let Some(g) = &self.eps_grid {
            if g.iter().any(|&e| e <= 0.0) {
                return Err(Error::Config("eps_grid values must be positive".into()));
            }
        }
        if self.eps_points < 2 {
            return Err(Error::Config("eps_points must be at least 2".into()));
        }
        if let Some(v) = &self.sweep_var {
            if !SWEEP_VARS.contains(&v.as_str()) {
                return Err(Error::Config(format!("sweep_var '{v}' is not one of {SWEEP_VARS:?}")));
            }
        }
        if let Some(c) = self.criteria.iter().find(|c| !(1..=5).contains(*c)) {
            return Err(Error::Config(format!("criteria: {c} is not in 1..=5")));
        }
        Ok(())
    }

    /// Tolerance for `check`, honouring `tol.<check>` overrides.
    pub fn tolerance(&self, check: &str, default: f64) -> f64 {
        self.tolerances.get(check).copied().unwrap_or(default)
    }
}

fn strip_prefix(e: Error) -> String {
    match e {
        Error::Config(m) | Error::InvalidParams(m) => m,
        other => other.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(ExperimentConfig::parse("# nothing\n\n").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn parses_all_kinds_of_keys() {
        let cfg = ExperimentConfig::parse(
            "n_tx = 8   # comment\nframe_len=20\nc3 = 0.002\ntau_grid = 0.1:0.1:0.5\neps_grid = 1e-3, 2e-3\n\
             trials = 1e3\nmode = exact-truncation\ntol.ccdf_approx_vs_mc = 0.05\nsweep_var = power\nsweep_grid = 1,2,4\n",
        )
        .unwrap();
        assert_eq!(cfg.params.n_tx, 8);
        assert_eq!(cfg.params.c3, Complex64::new(0.002, 0.0));
        assert_eq!(cfg.tau_grid.len(), 5);
        assert!((cfg.tau_grid[4] - 0.5).abs() < 1e-12);
        assert_eq!(cfg.eps_grid, Some(vec![1e-3, 2e-3]));
        assert_eq!(cfg.trials, 1000);
        assert_eq!(cfg.mode, AveragingMode::ExactTruncation);
        assert_eq!(cfg.tolerance("ccdf_approx_vs_mc", 0.03), 0.05);
        assert_eq!(cfg.tolerance("other", 0.03), 0.03);
        assert_eq!(cfg.sweep_grid, vec![1.0, 2.0, 4.0]);
    }

    #[test]
    fn default_tau_grid() {
        let g = &ExperimentConfig::default().tau_grid;
        assert_eq!(g.len(), 20);
        assert_eq!(g[0], 0.05);
        assert_eq!(g[19], 1.0);
    }

    #[test]
    fn rejects_bad_input() {
        for bad in [
            "nonsense",
            "n_tx = 2.5",
            "unknown_key = 1",
            "tau_grid = 0.5, 0.4",
            "tau_grid = 0.5, 1.5",
            "trials = 0",
            "mode = sometimes",
            "power = abc",
            "n_tx = 2",
            "sweep_var = sigma_u",
            "criteria = 7",
            "eps_grid = -1, 2",
        ] {
            assert!(matches!(ExperimentConfig::parse(bad), Err(Error::Config(_))), "{bad}");
        }
    }

    #[test]
    fn missing_file_is_config_error() {
        let e = ExperimentConfig::load(Path::new("/definitely/not/here.cfg")).unwrap_err();
        assert!(matches!(e, Error::Config(_)));
    }
}
