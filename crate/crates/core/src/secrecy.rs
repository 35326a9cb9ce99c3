//! SINR models and ergodic rates for the user, the communication
//! eavesdropper and the resulting secrecy rate. Rates are in bits per
//! channel use.

use std::f64::consts::LN_2;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use statrs::function::gamma::ln_gamma;

use crate::beamforming::{build_basis, BeamformerBasis};
use crate::crb::Aggregates;
use crate::error::{Error, Result};
use crate::quadrature::{integrate, integrate_to_infinity};
use crate::rng::{par_chunks, StreamSeed};
use crate::stochastic::{clt_moments_4d, Estimate};
use crate::system_model::{steering_vector, CVector, SystemParams};

/// `Pτ|c1|²/σ_u²`.
fn user_snr_scale(params: &SystemParams) -> f64 {
    params.gamma1() * params.c1.norm_sqr() / params.sigma_u.powi(2)
}

/// User SINR `(Pτ|c1|²/σ_u²)|hᴴt1|²` for a given channel and target angle.
/// The artificial noise lies in the null space of `h` and does not appear.
pub fn sinr_user(params: &SystemParams, h: &CVector, theta: f64) -> Result<f64> {
    let a = steering_vector(theta, params.n_tx);
    let basis = build_basis(&a, h, params.alpha(), params.beta())?;
    Ok(sinr_user_with_basis(params, h, &basis))
}

pub fn sinr_user_with_basis(params: &SystemParams, h: &CVector, basis: &BeamformerBasis) -> f64 {
    user_snr_scale(params) * h.dotc(&basis.t1).norm_sqr()
}

/// User SINR written in the aggregates `(R, T, K, W)`:
/// `c[(|α|²−|β|²)(R²+T²)/N + |β|²K + 2|αβ| W √(K − (R²+T²)/N) / √N]`.
/// A negative square-root argument (possible only for surrogate draws) is
/// clamped to zero, and so is the result.
pub fn sinr_user_expanded(params: &SystemParams, agg: &Aggregates) -> f64 {
    let n = params.n_tx as f64;
    let a2 = params.alpha_mag.powi(2);
    let b2 = params.beta_mag().powi(2);
    let p = agg.r * agg.r + agg.t * agg.t;
    let resid = (agg.k - p / n).max(0.0);
    let v = (a2 - b2) / n * p
        + b2 * agg.k
        + 2.0 * params.alpha_mag * params.beta_mag() / n.sqrt() * agg.w * resid.sqrt();
    (user_snr_scale(params) * v).max(0.0)
}

/// SINR at the communication eavesdropper, whose noise floor includes the
/// artificial noise leaking through `G`.
pub fn sinr_eav(params: &SystemParams, h_e: &CVector, basis: &BeamformerBasis) -> f64 {
    let signal = params.gamma1() * params.c2.norm_sqr() * h_e.dotc(&basis.t1).norm_sqr();
    let leak: f64 = basis
        .null_basis
        .column_iter()
        .map(|g| h_e.dotc(&g).norm_sqr())
        .sum();
    let noise = params.sigma_u.powi(2) + params.gamma2() * params.c2.norm_sqr() * leak;
    signal / noise
}

/// How the CLT-surrogate user rate is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RateMethod {
    /// Sample mean of `log2(1 + SINR)`.
    #[default]
    Expectation,
    /// `∫₀^∞ P(SINR > 2^t − 1) dt` on the same samples.
    TailIntegral,
}

impl RateMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Expectation => "clt-expectation",
            Self::TailIntegral => "clt-tail-integral",
        }
    }
}

impl FromStr for RateMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "expectation" | "clt-expectation" => Ok(Self::Expectation),
            "tail-integral" | "clt-tail-integral" => Ok(Self::TailIntegral),
            other => Err(Error::Config(format!("unknown rate method '{other}'"))),
        }
    }
}

pub const MIN_RATE_SAMPLES: usize = 10_000;

/// Surrogate SINR draws: `(R, T, K, W)` from the 4-D CLT Gaussian pushed
/// through [`sinr_user_expanded`].
pub fn surrogate_user_sinr(params: &SystemParams, samples: usize, seed: StreamSeed) -> Vec<f64> {
    let moments = clt_moments_4d(params.n_tx, params.phase_alpha, params.phase_beta);
    let l = moments.factor();
    par_chunks(seed, samples, |rng, _, len| {
        (0..len)
            .map(|_| {
                let z: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
                let v: [f64; 4] =
                    std::array::from_fn(|i| moments.mean[i] + (0..4).map(|j| l[(i, j)] * z[j]).sum::<f64>());
                let agg = Aggregates { r: v[0], t: v[1], k: v[2], w: v[3] };
                sinr_user_expanded(params, &agg)
            })
            .collect()
    })
}

/// Exact ergodic user rate under the CLT surrogate.
pub fn ergodic_rate_user_exact(
    params: &SystemParams,
    samples: usize,
    seed: StreamSeed,
    method: RateMethod,
) -> Result<Estimate> {
    if samples < MIN_RATE_SAMPLES {
        return Err(Error::InvalidParams(format!(
            "user rate needs at least {MIN_RATE_SAMPLES} samples, got {samples}"
        )));
    }
    if params.tau == 0.0 {
        return Ok(Estimate::exact(0.0));
    }
    let sinr = surrogate_user_sinr(params, samples, seed);
    let rates: Vec<f64> = sinr.iter().map(|s| s.ln_1p() / LN_2).collect();
    let est = Estimate::from_samples(&rates);
    match method {
        RateMethod::Expectation => Ok(est),
        RateMethod::TailIntegral => {
            let mut sorted = sinr;
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let n = sorted.len() as f64;
            let survival = |t: f64| {
                let thr = t.exp2() - 1.0;
                let above = sorted.len() - sorted.partition_point(|&s| s <= thr);
                above as f64 / n
            };
            let top = sorted.last().copied().unwrap_or(0.0).ln_1p() / LN_2;
            // the empirical survival function is a step function; split at
            // every jump so each piece is integrated exactly
            let mut value = 0.0;
            let mut lo = 0.0;
            for s in &sorted {
                let hi = s.ln_1p() / LN_2;
                if hi > lo {
                    value += survival(0.5 * (lo + hi)) * (hi - lo);
                    lo = hi;
                }
            }
            debug_assert!(lo <= top);
            Ok(Estimate {
                value,
                std_error: est.std_error,
            })
        }
    }
}

/// How upper bound 1 is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Ub1Method {
    /// Quadrature against the Gamma(N, 1) density of `‖h‖²`.
    #[default]
    Quadrature,
    /// Second-order expansion around `E‖h‖² = N`.
    Taylor,
}

/// `E[log2(1 + c‖h‖²)]` with `‖h‖² ~ Gamma(N, 1)`.
pub fn ergodic_rate_user_ub1(params: &SystemParams, method: Ub1Method) -> f64 {
    let c = user_snr_scale(params);
    let n = params.n_tx as f64;
    match method {
        Ub1Method::Quadrature => {
            let norm = ln_gamma(n);
            let f = |x: f64| {
                if x <= 0.0 {
                    return 0.0;
                }
                (c * x).ln_1p() / LN_2 * ((n - 1.0) * x.ln() - x - norm).exp()
            };
            // the density peaks at N − 1; split there for the adaptive rule
            let split = (n - 1.0).max(1.0);
            integrate(f, 0.0, split, 1e-14, 1e-12).value + integrate_to_infinity(f, split, 1e-14, 1e-12).value
        }
        Ub1Method::Taylor => (c * n).ln_1p() / LN_2 - c * c * n / (2.0 * LN_2 * (1.0 + c * n).powi(2)),
    }
}

/// Jensen bound `log2(1 + c(|α|² + |β|²(N−1)))`.
pub fn ergodic_rate_user_ub2(params: &SystemParams) -> f64 {
    let c = user_snr_scale(params);
    let n = params.n_tx as f64;
    (c * (params.alpha_mag.powi(2) + params.beta_mag().powi(2) * (n - 1.0))).ln_1p() / LN_2
}

/// `(C1, C2)` of the eavesdropper rate integral.
pub fn eav_constants(params: &SystemParams) -> (f64, f64) {
    let noise = params.sigma_u.powi(2);
    let c1 = params.gamma1() * params.c2.norm_sqr() / noise;
    let c2 = params.gamma2() * params.c2.norm_sqr() / noise;
    (c1, c2)
}

/// Integrand `e^{−T/(2C1)} (1 + T C2/C1)^{−(N−2)}` with `T = 2^t − 1`.
pub fn eav_rate_integrand(params: &SystemParams, t: f64) -> f64 {
    let (c1, c2) = eav_constants(params);
    let big_t = t.exp2() - 1.0;
    (-big_t / (2.0 * c1)).exp() * (1.0 + big_t * c2 / c1).powf(-((params.n_tx - 2) as f64))
}

/// Ergodic eavesdropper rate by adaptive quadrature of the closed-form
/// integrand. Integration stops where `e^{−T/(2C1)}` drops below `1e−14`.
pub fn ergodic_rate_eav(params: &SystemParams) -> f64 {
    if params.tau == 0.0 {
        return 0.0;
    }
    let (c1, _) = eav_constants(params);
    let t_max = (2.0 * c1 * 1e14_f64.ln()).ln_1p() / LN_2;
    integrate(|t| eav_rate_integrand(params, t), 0.0, t_max, 1e-12, 1e-12).value
}

/// User, eavesdropper and secrecy rate at one operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateBreakdown {
    pub user_rate: f64,
    pub user_std_error: f64,
    pub eav_rate: f64,
    pub secrecy_rate: f64,
    pub user_method: RateMethod,
}

impl RateBreakdown {
    pub fn eav_method(&self) -> &'static str {
        "closed-form-quadrature"
    }
}

/// `C_s = (E[R_u] − E[R_e])⁺`.
pub fn secrecy_rate(params: &SystemParams, samples: usize, seed: StreamSeed) -> Result<RateBreakdown> {
    let method = RateMethod::Expectation;
    let user = ergodic_rate_user_exact(params, samples, seed, method)?;
    let eav = ergodic_rate_eav(params);
    Ok(RateBreakdown {
        user_rate: user.value,
        user_std_error: user.std_error,
        eav_rate: eav,
        secrecy_rate: (user.value - eav).max(0.0),
        user_method: method,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crb::aggregates;
    use crate::system_model::{complex_gaussian, sample_realization};
    use approx::assert_relative_eq;
    use rand_distr::{Exp, Gamma};
    use statrs::distribution::{ContinuousCDF, Gamma as GammaDist};

    fn seed(k: u64) -> StreamSeed {
        StreamSeed::new(99).domain(k)
    }

    #[test]
    fn inner_product_and_expanded_forms_agree() {
        for (pa, pb) in [(0.0, 0.0), (0.4, 1.3), (-2.0, 0.7)] {
            let p = SystemParams {
                phase_alpha: pa,
                phase_beta: pb,
                ..SystemParams::default()
            };
            let mut rng = seed(1).stream(0);
            for _ in 0..100 {
                let r = sample_realization(&p, &mut rng);
                let direct = sinr_user(&p, &r.h, r.theta).unwrap();
                let expanded = sinr_user_expanded(&p, &aggregates(&p, &r.h, r.theta));
                assert!((direct - expanded).abs() <= 1e-9 * direct.max(1e-3), "{direct} vs {expanded}");
            }
        }
    }

    #[test]
    fn no_artificial_noise_reaches_user() {
        let p = SystemParams::default();
        let mut rng = seed(2).stream(0);
        for _ in 0..100 {
            let r = sample_realization(&p, &mut rng);
            let basis = build_basis(&steering_vector(r.theta, p.n_tx), &r.h, p.alpha(), p.beta()).unwrap();
            let leak = (r.h.adjoint() * &basis.null_basis).norm() * p.gamma2().sqrt();
            assert!(leak < 1e-10);
        }
    }

    #[test]
    fn beta_zero_collapses_to_target_beam() {
        let p = SystemParams {
            alpha_mag: 1.0,
            ..SystemParams::default()
        };
        let mut rng = seed(3).stream(0);
        let r = sample_realization(&p, &mut rng);
        let a = steering_vector(r.theta, p.n_tx);
        let a_hat = a.unscale(a.norm());
        let want = user_snr_scale(&p) * a_hat.dotc(&r.h).norm_sqr();
        assert_relative_eq!(sinr_user(&p, &r.h, r.theta).unwrap(), want, max_relative = 1e-12);
    }

    #[test]
    fn eavesdropper_without_noise_beam() {
        let p = SystemParams::default().with_tau(1.0);
        let mut rng = seed(4).stream(0);
        let r = sample_realization(&p, &mut rng);
        let basis = build_basis(&steering_vector(r.theta, p.n_tx), &r.h, p.alpha(), p.beta()).unwrap();
        let want = p.power * p.c2.norm_sqr() / p.sigma_u.powi(2) * r.h_e.dotc(&basis.t1).norm_sqr();
        assert_relative_eq!(sinr_eav(&p, &r.h_e, &basis), want, max_relative = 1e-12);
    }

    /// Kolmogorov–Smirnov p-value via the asymptotic distribution.
    fn ks_p_value(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = xs.len() as f64;
        let d = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = cdf(x);
                (f - i as f64 / n).max((i as f64 + 1.0) / n - f)
            })
            .fold(0.0, f64::max);
        let lam = (n.sqrt() + 0.12 + 0.11 / n.sqrt()) * d;
        let p: f64 = (1..100).map(|k| 2.0 * (-1f64).powi(k - 1) * (-2.0 * (k * k) as f64 * lam * lam).exp()).sum();
        p.clamp(0.0, 1.0)
    }

    #[test]
    fn eavesdropper_projections_follow_unit_gamma_laws() {
        let p = SystemParams::default();
        let mut rng = seed(5).stream(0);
        let draws = 100_000;
        let (mut xs, mut ys) = (Vec::with_capacity(draws), Vec::with_capacity(draws));
        for _ in 0..draws {
            let r = sample_realization(&p, &mut rng);
            let basis = build_basis(&steering_vector(r.theta, p.n_tx), &r.h, p.alpha(), p.beta()).unwrap();
            xs.push(r.h_e.dotc(&basis.t1).norm_sqr());
            ys.push(basis.null_basis.column_iter().map(|g| r.h_e.dotc(&g).norm_sqr()).sum::<f64>());
        }
        let mx = xs.iter().sum::<f64>() / draws as f64;
        let my = ys.iter().sum::<f64>() / draws as f64;
        assert!((mx - 1.0).abs() < 3.0 / (draws as f64).sqrt());
        let k = (p.n_tx - 2) as f64;
        assert!((my - k).abs() < 3.0 * (k / draws as f64).sqrt());
        let ks_x = ks_p_value(xs, |x| 1.0 - (-x).exp());
        let g = GammaDist::new(k, 1.0).unwrap();
        let ks_y = ks_p_value(ys, |y| g.cdf(y));
        assert!(ks_x > 0.01 && ks_y > 0.01, "KS p-values {ks_x} {ks_y}");
    }

    #[test]
    fn user_rate_zero_power_and_methods() {
        let p = SystemParams::default();
        assert_eq!(
            ergodic_rate_user_exact(&p.with_tau(0.0), 10_000, seed(6), RateMethod::Expectation).unwrap().value,
            0.0
        );
        let a = ergodic_rate_user_exact(&p, 50_000, seed(6), RateMethod::Expectation).unwrap();
        let b = ergodic_rate_user_exact(&p, 50_000, seed(6), RateMethod::TailIntegral).unwrap();
        assert!((a.value - b.value).abs() < 1e-9 * a.value, "{} vs {}", a.value, b.value);
        assert!(ergodic_rate_user_exact(&p, 100, seed(6), RateMethod::Expectation).is_err());
    }

    #[test]
    fn user_rate_below_both_upper_bounds() {
        let p = SystemParams::default();
        for i in 1..=20 {
            let q = p.with_tau(i as f64 / 20.0);
            let e = ergodic_rate_user_exact(&q, 20_000, seed(7), RateMethod::Expectation).unwrap();
            let ub1 = ergodic_rate_user_ub1(&q, Ub1Method::Quadrature);
            let ub2 = ergodic_rate_user_ub2(&q);
            assert!(e.value <= ub1.min(ub2) + 3.0 * e.std_error);
            assert!(ub2 - e.value < 0.5);
        }
    }

    #[test]
    fn ub1_density_normalised_and_taylor_close() {
        for n in [3usize, 15, 64] {
            let nf = n as f64;
            let norm = ln_gamma(nf);
            let dens = |x: f64| if x <= 0.0 { 0.0 } else { ((nf - 1.0) * x.ln() - x - norm).exp() };
            let mass = integrate(dens, 0.0, nf - 1.0, 1e-15, 1e-13).value
                + integrate_to_infinity(dens, nf - 1.0, 1e-15, 1e-13).value;
            assert!((mass - 1.0).abs() < 1e-10, "n={n}: {mass}");
        }
        let p = SystemParams::default();
        let q = ergodic_rate_user_ub1(&p, Ub1Method::Quadrature);
        let t = ergodic_rate_user_ub1(&p, Ub1Method::Taylor);
        assert!((q - t).abs() < 1e-3 * q);
    }

    #[test]
    fn ub1_massive_mimo_limit() {
        let mut prev = f64::INFINITY;
        // the gap grows while cN < 1 and decays like 1/(2 ln2 N) after
        for n in [1024usize, 4096, 16384] {
            let p = SystemParams {
                n_tx: n,
                frame_len: 2 * n,
                ..SystemParams::default()
            };
            let c = user_snr_scale(&p);
            let gap = ((c * n as f64).ln_1p() / LN_2 - ergodic_rate_user_ub1(&p, Ub1Method::Quadrature)).abs();
            assert!(gap < prev);
            prev = gap;
        }
        assert!(prev < 1e-4, "{prev}");
    }

    #[test]
    fn ub2_closed_form_cases() {
        let p = SystemParams {
            alpha_mag: 1.0,
            ..SystemParams::default()
        };
        assert_relative_eq!(ergodic_rate_user_ub2(&p), (1.0 + user_snr_scale(&p)).log2(), max_relative = 1e-14);
    }

    #[test]
    fn mean_sinr_identity() {
        let p = SystemParams::default();
        let mut rng = seed(8).stream(0);
        let draws = 100_000;
        let v: Vec<f64> = (0..draws)
            .map(|_| {
                let r = sample_realization(&p, &mut rng);
                sinr_user(&p, &r.h, r.theta).unwrap()
            })
            .collect();
        let est = Estimate::from_samples(&v);
        let want = user_snr_scale(&p) * (p.alpha_mag.powi(2) + p.beta_mag().powi(2) * (p.n_tx as f64 - 1.0));
        assert!((est.value - want).abs() < 3.0 * est.std_error, "{} vs {want}", est.value);
    }

    #[test]
    fn massive_mimo_sandwich() {
        // the lower asymptote log2(1 + c|β|²N) is approached from below
        // (E[SINR] = c(|α|² + |β|²(N−1)) < c|β|²N), so it is checked as a
        // vanishing relative gap
        let mut prev_gap = f64::INFINITY;
        for n_tx in [256usize, 1024] {
            let p = SystemParams {
                n_tx,
                frame_len: 2 * n_tx,
                ..SystemParams::default()
            };
            let e = ergodic_rate_user_exact(&p, 20_000, seed(9), RateMethod::Expectation).unwrap();
            let c = user_snr_scale(&p);
            let n = p.n_tx as f64;
            let lo = (c * p.beta_mag().powi(2) * n).ln_1p() / LN_2;
            let hi = (c * n).ln_1p() / LN_2;
            assert!(e.value <= hi + 3.0 * e.std_error);
            let gap = (lo - e.value).max(0.0) / lo;
            assert!(gap < 0.01 && gap < prev_gap, "n={n_tx}: {} vs {lo}", e.value);
            prev_gap = gap;
        }
    }

    #[test]
    fn eav_integrand_shape() {
        let p = SystemParams::default();
        assert_relative_eq!(eav_rate_integrand(&p, 0.0), 1.0);
        let mut prev = 1.0;
        for i in 1..200 {
            let v = eav_rate_integrand(&p, i as f64 * 0.01);
            assert!(v > 0.0 && v < prev);
            prev = v;
        }
        assert_eq!(ergodic_rate_eav(&p.with_tau(0.0)), 0.0);
    }

    fn eav_rate_own_distribution_mc(p: &SystemParams, draws: usize, k: u64) -> Estimate {
        let (c1, c2) = eav_constants(p);
        let x = Exp::new(0.5).unwrap();
        let y = Gamma::new((p.n_tx - 2) as f64, 2.0).unwrap();
        let v = par_chunks(seed(k), draws, |rng, _, len| {
            (0..len)
                .map(|_| {
                    let xv: f64 = rng.sample(x);
                    let yv: f64 = rng.sample(y);
                    (c1 * xv / (1.0 + c2 * yv)).ln_1p() / LN_2
                })
                .collect()
        });
        Estimate::from_samples(&v)
    }

    #[test]
    fn eav_rate_matches_its_stated_distributions() {
        for tau in [0.2, 0.76, 1.0] {
            let p = SystemParams::default().with_tau(tau);
            let mc = eav_rate_own_distribution_mc(&p, 200_000, 10);
            let q = ergodic_rate_eav(&p);
            assert!((q - mc.value).abs() < 4.0 * mc.std_error, "tau {tau}: {q} vs {}", mc.value);
        }
    }

    #[test]
    fn eav_rate_against_closed_form_when_no_noise_beam() {
        // τ = 1: E[log2(1 + C1 X)], X ~ Exp(mean 2) = e^{1/(2C1)} E1(1/(2C1)) / ln 2
        let p = SystemParams::default().with_tau(1.0);
        let (c1, _) = eav_constants(&p);
        let s = 1.0 / (2.0 * c1);
        // e^s E1(s) = ∫₀^∞ e^{−v} / (v + s) dv
        let scaled_e1 = integrate_to_infinity(|v| (-v).exp() / (v + s), 0.0, 1e-16, 1e-13).value;
        let want = scaled_e1 / LN_2;
        assert_relative_eq!(ergodic_rate_eav(&p), want, max_relative = 1e-8);
    }

    #[test]
    fn secrecy_rate_structure() {
        let p = SystemParams::default();
        let zero = secrecy_rate(&p.with_tau(0.0), 10_000, seed(11)).unwrap();
        assert_eq!(zero.secrecy_rate, 0.0);
        let mut prev = (0.0, 0.0);
        for i in 1..=20 {
            let q = p.with_tau(i as f64 / 20.0);
            let r = secrecy_rate(&q, 20_000, seed(11)).unwrap();
            assert!(r.secrecy_rate > 0.0);
            assert_eq!(r.secrecy_rate, (r.user_rate - r.eav_rate).max(0.0));
            assert!(r.user_rate > prev.0 && r.eav_rate > prev.1);
            prev = (r.user_rate, r.eav_rate);
        }
    }

    #[test]
    fn physical_user_rate_tracks_surrogate() {
        let p = SystemParams::default();
        let mut rng = seed(12).stream(0);
        let v: Vec<f64> = (0..50_000)
            .map(|_| {
                let h = complex_gaussian(&mut rng, p.n_tx);
                let theta = crate::system_model::uniform_angle(&mut rng, 0.0);
                sinr_user(&p, &h, theta).unwrap().ln_1p() / LN_2
            })
            .collect();
        let phys = Estimate::from_samples(&v);
        let clt = ergodic_rate_user_exact(&p, 50_000, seed(13), RateMethod::Expectation).unwrap();
        assert!((phys.value - clt.value).abs() / phys.value < 0.02);
    }
}
