//! The three figure experiments and parameter sweeps, each producing a CSV
//! table.

use std::fmt::Write as _;

use crate::config::{set_param, ExperimentConfig};
use crate::error::{Error, Result};
use crate::monte_carlo::{mc_crb_samples, mc_rate_samples, CrbVariant};
use crate::rng::StreamSeed;
use crate::secrecy::{
    ergodic_rate_eav, ergodic_rate_user_exact, ergodic_rate_user_ub1, ergodic_rate_user_ub2, RateMethod,
    Ub1Method,
};
use crate::stochastic::{
    ccdf_crb_exact, ccdf_crb_lower, ccdf_crb_phi, clt_moments_3d, default_eps_grid, ergodic_crb_approx,
    ergodic_crb_exact, ergodic_crb_lower, ergodic_crb_phi, Estimate, GaussianDomainIntegrator, SurrogateBound,
    SurrogateCcdf,
};
use crate::system_model::SystemParams;

/// Stream domains, one per sampled column.
pub(crate) mod streams {
    pub const FIG_A_USER: u64 = 1;
    pub const FIG_A_MC: u64 = 2;
    pub const FIG_B_APPROX: u64 = 3;
    pub const FIG_B_EXACT_MC: u64 = 4;
    pub const FIG_B_PHI_MC: u64 = 5;
    pub const FIG_C_SURROGATE: u64 = 6;
    pub const FIG_C_MC_COMMON: u64 = 7;
    pub const FIG_C_MC_EXACT: u64 = 8;
    pub const SWEEP: u64 = 9;
}

/// A numeric table with a header row.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    /// Header plus one column per value and a sibling `_err` column for each.
    fn with_errors(key: &str, values: &[&str]) -> Self {
        let mut headers = vec![key.to_string()];
        for v in values {
            headers.push(v.to_string());
            headers.push(format!("{v}_err"));
        }
        Self { headers, rows: Vec::new() }
    }

    fn push(&mut self, key: f64, values: &[Estimate]) {
        let mut row = vec![key];
        for v in values {
            row.push(v.value);
            row.push(v.std_error);
        }
        assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.headers.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    /// Comma-separated, LF line endings, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = self.headers.join(",");
        out.push('\n');
        for row in &self.rows {
            let mut first = true;
            for v in row {
                if !first {
                    out.push(',');
                }
                first = false;
                write!(out, "{v:.16e}").unwrap();
            }
            out.push('\n');
        }
        out
    }
}

fn seed(cfg: &ExperimentConfig, domain: u64) -> StreamSeed {
    StreamSeed::new(cfg.seed).domain(domain)
}

/// Ergodic rates against τ. Sampled columns reuse the same streams at every
/// τ so the curves are smooth in τ.
pub fn run_fig_a(cfg: &ExperimentConfig) -> Result<Table> {
    let mut table = Table::with_errors(
        "tau",
        &[
            "user_rate_exact",
            "user_rate_mc",
            "user_ub1",
            "user_ub2",
            "eav_rate",
            "eav_rate_mc",
            "secrecy_rate",
        ],
    );
    for &tau in &cfg.tau_grid {
        let p = cfg.params.with_tau(tau);
        let user = ergodic_rate_user_exact(
            &p,
            cfg.integration_samples,
            seed(cfg, streams::FIG_A_USER),
            RateMethod::Expectation,
        )?;
        let (u_mc, e_mc) = mc_rate_samples(&p, cfg.trials, seed(cfg, streams::FIG_A_MC));
        let eav = ergodic_rate_eav(&p);
        let secrecy = Estimate {
            value: (user.value - eav).max(0.0),
            std_error: user.std_error,
        };
        table.push(
            tau,
            &[
                user,
                u_mc.mean().expect("rates are finite"),
                Estimate::exact(ergodic_rate_user_ub1(&p, Ub1Method::Quadrature)),
                Estimate::exact(ergodic_rate_user_ub2(&p)),
                Estimate::exact(eav),
                e_mc.mean().expect("rates are finite"),
                secrecy,
            ],
        );
    }
    Ok(table)
}

/// Truncated-angle Monte Carlo mean rescaled to the configured averaging
/// mode.
fn truncated_mc_mean(cfg: &ExperimentConfig, p: &SystemParams, variant: CrbVariant, domain: u64) -> Estimate {
    let d = mc_crb_samples(p, cfg.trials, variant, true, seed(cfg, domain));
    match d.mean() {
        Some(m) => m.scale(cfg.mode.from_conditional(p.delta)),
        None => Estimate::exact(f64::INFINITY),
    }
}

/// Ergodic CRBs against τ.
pub fn run_fig_b(cfg: &ExperimentConfig) -> Result<Table> {
    if let Some(t) = cfg.tau_grid.iter().find(|&&t| t <= 0.0) {
        return Err(Error::Config(format!("fig-b needs tau in (0, 1], got {t}")));
    }
    let mut table = Table::with_errors(
        "tau",
        &[
            "ecrb_exact",
            "ecrb_lower",
            "ecrb_approx",
            "ecrb_phi",
            "ecrb_exact_mc",
            "ecrb_phi_mc",
        ],
    );
    for &tau in &cfg.tau_grid {
        let p = cfg.params.with_tau(tau);
        let approx = ergodic_crb_approx(&p, cfg.integration_samples, seed(cfg, streams::FIG_B_APPROX), cfg.mode)?;
        table.push(
            tau,
            &[
                Estimate::exact(ergodic_crb_exact(&p, cfg.mode)?),
                Estimate::exact(ergodic_crb_lower(&p, cfg.mode)?),
                Estimate {
                    value: approx.value,
                    std_error: approx.std_error,
                },
                Estimate::exact(ergodic_crb_phi(&p, cfg.mode)?),
                truncated_mc_mean(cfg, &p, CrbVariant::Exact, streams::FIG_B_EXACT_MC),
                truncated_mc_mean(cfg, &p, CrbVariant::Eavesdropper, streams::FIG_B_PHI_MC),
            ],
        );
    }
    Ok(table)
}

/// `10·log10(ε/10)`, the figure's horizontal axis.
pub fn eps_db(eps: f64) -> f64 {
    10.0 * (eps / 10.0).log10()
}

pub fn eps_grid(cfg: &ExperimentConfig) -> Vec<f64> {
    cfg.eps_grid
        .clone()
        .unwrap_or_else(|| default_eps_grid(&cfg.params.with_tau(cfg.ccdf_tau), cfg.eps_points))
}

/// CCDFs of the angle CRBs at `ccdf_tau`.
pub fn run_fig_c(cfg: &ExperimentConfig) -> Result<Table> {
    let p = cfg.params.with_tau(cfg.ccdf_tau);
    let integ = GaussianDomainIntegrator::new(
        &clt_moments_3d(p.n_tx),
        cfg.integration_samples,
        seed(cfg, streams::FIG_C_SURROGATE),
    )?;
    let upper = SurrogateCcdf::from_integrator(&p, SurrogateBound::Upper, &integ);
    let approx = SurrogateCcdf::from_integrator(&p, SurrogateBound::Approx, &integ);
    let common = mc_crb_samples(&p, cfg.trials, CrbVariant::Common, false, seed(cfg, streams::FIG_C_MC_COMMON));
    let exact = mc_crb_samples(&p, cfg.trials, CrbVariant::Exact, false, seed(cfg, streams::FIG_C_MC_EXACT));
    let mut table = Table::with_errors(
        "eps_db",
        &[
            "ccdf_lower",
            "ccdf_upper",
            "ccdf_approx",
            "ccdf_exact",
            "ccdf_phi",
            "ccdf_mc_common",
            "ccdf_mc_exact",
        ],
    );
    for eps in eps_grid(cfg) {
        table.push(
            eps_db(eps),
            &[
                Estimate::exact(ccdf_crb_lower(&p, eps)),
                upper.ccdf(eps),
                approx.ccdf(eps),
                Estimate::exact(ccdf_crb_exact(&p, eps)),
                Estimate::exact(ccdf_crb_phi(&p, eps)),
                common.ccdf(eps),
                exact.ccdf(eps),
            ],
        );
    }
    Ok(table)
}

/// Headline quantities against one scenario parameter.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Table> {
    let var = cfg
        .sweep_var
        .as_deref()
        .ok_or_else(|| Error::Config("sweep needs sweep_var and sweep_grid".into()))?;
    if cfg.sweep_grid.is_empty() {
        return Err(Error::Config("sweep needs a non-empty sweep_grid".into()));
    }
    let mut table = Table::with_errors(
        var,
        &[
            "user_rate_exact",
            "user_ub2",
            "eav_rate",
            "secrecy_rate",
            "ecrb_exact",
            "ecrb_lower",
            "ecrb_approx",
            "ecrb_phi",
        ],
    );
    let infinite_or = |r: Result<f64>| match r {
        Ok(v) => Ok(Estimate::exact(v)),
        Err(Error::InfiniteErgodicCrb(_)) => Ok(Estimate::exact(f64::INFINITY)),
        Err(e) => Err(e),
    };
    for &x in &cfg.sweep_grid {
        let mut p = cfg.params.clone();
        set_param(&mut p, var, x)?;
        p.validate().map_err(|e| Error::Config(format!("sweep point {var} = {x}: {e}")))?;
        let user = ergodic_rate_user_exact(&p, cfg.integration_samples, seed(cfg, streams::SWEEP), RateMethod::Expectation)?;
        let eav = ergodic_rate_eav(&p);
        let approx = if p.tau > 0.0 {
            let a = ergodic_crb_approx(&p, cfg.integration_samples, seed(cfg, streams::SWEEP), cfg.mode)?;
            Estimate {
                value: a.value,
                std_error: a.std_error,
            }
        } else {
            Estimate::exact(f64::INFINITY)
        };
        table.push(
            x,
            &[
                user,
                Estimate::exact(ergodic_rate_user_ub2(&p)),
                Estimate::exact(eav),
                Estimate {
                    value: (user.value - eav).max(0.0),
                    std_error: user.std_error,
                },
                infinite_or(ergodic_crb_exact(&p, cfg.mode))?,
                infinite_or(ergodic_crb_lower(&p, cfg.mode))?,
                approx,
                infinite_or(ergodic_crb_phi(&p, cfg.mode))?,
            ],
        );
    }
    Ok(table)
}
