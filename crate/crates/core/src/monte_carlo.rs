//! End-to-end Monte Carlo: raw channels and angles pushed through the
//! beamformer, the CRB expressions and the SINR models.

use std::f64::consts::LN_2;
use std::str::FromStr;

use crate::beamforming::build_basis;
use crate::crb::{crb_phi, crb_theta_common, crb_theta_exact};
use crate::error::{Error, Result};
use crate::rng::{par_chunks, StreamSeed};
use crate::secrecy::{sinr_eav, sinr_user_with_basis};
use crate::stochastic::Estimate;
use crate::system_model::{complex_gaussian, steering_vector, uniform_angle, SystemParams};

/// Sample set that may contain `+∞`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalDistribution {
    pub samples: Vec<f64>,
}

impl EmpiricalDistribution {
    pub fn new(samples: Vec<f64>) -> Self {
        Self { samples }
    }

    pub fn count(&self) -> usize {
        self.samples.len()
    }

    /// Sample mean, or `None` if any sample is infinite.
    pub fn mean(&self) -> Option<Estimate> {
        self.samples
            .iter()
            .all(|v| v.is_finite())
            .then(|| Estimate::from_samples(&self.samples))
    }

    pub fn ccdf(&self, threshold: f64) -> Estimate {
        empirical_ccdf(self, threshold)
    }
}

/// Fraction of samples strictly above `threshold`; infinite samples count
/// toward every threshold.
pub fn empirical_ccdf(dist: &EmpiricalDistribution, threshold: f64) -> Estimate {
    assert!(dist.count() > 0, "empty distribution");
    let hits = dist.samples.iter().filter(|&&v| v > threshold).count();
    Estimate::proportion(hits, dist.count())
}

/// Which angle CRB a Monte Carlo run evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrbVariant {
    /// Closed-form CRB(θ) with the AN contribution (needs a channel draw).
    Common,
    /// Data-beam-only CRB(θ).
    Exact,
    /// CRB(φ) at the sensing eavesdropper.
    Eavesdropper,
}

impl FromStr for CrbVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "common" => Ok(Self::Common),
            "exact" => Ok(Self::Exact),
            "eavesdropper" => Ok(Self::Eavesdropper),
            other => Err(Error::Config(format!("unknown CRB variant '{other}'"))),
        }
    }
}

/// Per-trial CRB values. With `truncate_angles` the angle is drawn from
/// `[−π/2+δ, π/2−δ]` instead of the full open interval.
pub fn mc_crb_samples(
    params: &SystemParams,
    trials: usize,
    variant: CrbVariant,
    truncate_angles: bool,
    seed: StreamSeed,
) -> EmpiricalDistribution {
    let margin = if truncate_angles { params.delta } else { 0.0 };
    let samples = par_chunks(seed, trials, |rng, _, len| {
        (0..len)
            .map(|_| match variant {
                CrbVariant::Common => {
                    let h = complex_gaussian(rng, params.n_tx);
                    let theta = uniform_angle(rng, margin);
                    crb_theta_common(params, &h, theta)
                }
                CrbVariant::Exact => crb_theta_exact(params, uniform_angle(rng, margin)),
                CrbVariant::Eavesdropper => crb_phi(params, uniform_angle(rng, margin)),
            })
            .collect()
    });
    EmpiricalDistribution::new(samples)
}

/// Per-trial `log2(1 + SINR)` at the user and at the communication
/// eavesdropper (fresh `h`, `θ`, `h_e` each trial).
pub fn mc_rate_samples(
    params: &SystemParams,
    trials: usize,
    seed: StreamSeed,
) -> (EmpiricalDistribution, EmpiricalDistribution) {
    let pairs = par_chunks(seed, trials, |rng, _, len| {
        (0..len)
            .map(|_| loop {
                let h = complex_gaussian(rng, params.n_tx);
                let theta = uniform_angle(rng, 0.0);
                let h_e = complex_gaussian(rng, params.n_tx);
                let a = steering_vector(theta, params.n_tx);
                // a channel parallel to a(θ) has probability zero; redraw
                if let Ok(basis) = build_basis(&a, &h, params.alpha(), params.beta()) {
                    let u = sinr_user_with_basis(params, &h, &basis);
                    let e = sinr_eav(params, &h_e, &basis);
                    break (u.ln_1p() / LN_2, e.ln_1p() / LN_2);
                }
            })
            .collect()
    });
    let (user, eav): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    (EmpiricalDistribution::new(user), EmpiricalDistribution::new(eav))
}
