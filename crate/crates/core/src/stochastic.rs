//! Distributional analysis of the angle CRBs.
//!
//! Covers the Gaussian (CLT) surrogate for the aggregate channel statistics,
//! Monte Carlo integration of a multivariate normal over an arbitrary domain,
//! the CCDF characterisations of CRB(θ) and CRB(φ), and the ergodic CRBs.

use std::f64::consts::{FRAC_PI_2, PI};
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::crb::{
    approx_an_factor, crb_phi, crb_theta_approx, crb_theta_exact, crb_theta_lower, crb_theta_upper,
    upper_an_factor, Aggregates,
};
use crate::error::{Error, Result};
use crate::rng::{par_chunks, StreamSeed};
use crate::system_model::{uniform_angle, SystemParams};

/// A Monte Carlo (or closed-form, with zero error) estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self { value, std_error: 0.0 }
    }

    pub fn from_samples(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        Self {
            value: mean,
            std_error: (var / n).sqrt(),
        }
    }

    pub fn proportion(hits: usize, n: usize) -> Self {
        let p = hits as f64 / n as f64;
        Self {
            value: p,
            std_error: (p * (1.0 - p) / n as f64).sqrt(),
        }
    }

    pub fn scale(self, s: f64) -> Self {
        Self {
            value: self.value * s,
            std_error: self.std_error * s.abs(),
        }
    }
}

/// Mean and covariance of the CLT-aggregated statistics `(R, T, K[, W])`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMoments {
    pub mean: Vec<f64>,
    pub covariance: DMatrix<f64>,
}

impl GaussianMoments {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// A square root `L` with `L Lᵀ = Σ`, valid for singular `Σ`.
    pub fn factor(&self) -> DMatrix<f64> {
        let eig = SymmetricEigen::new(self.covariance.clone());
        let mut l = eig.eigenvectors.clone();
        for (j, &lam) in eig.eigenvalues.iter().enumerate() {
            let s = lam.max(0.0).sqrt();
            for i in 0..self.dim() {
                l[(i, j)] *= s;
            }
        }
        l
    }
}

/// Moments of `(R, T, K)` for `N` antennas: mean `[0, 0, N]`,
/// covariance `diag(N/2, N/2, N)`.
pub fn clt_moments_3d(n_tx: usize) -> GaussianMoments {
    let n = n_tx as f64;
    GaussianMoments {
        mean: vec![0.0, 0.0, n],
        covariance: DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![n / 2.0, n / 2.0, n])),
    }
}

/// Moments of `(R, T, K, W)`. `W` is a fixed rotation of `(R, T)`, so the
/// covariance has rank 3.
pub fn clt_moments_4d(n_tx: usize, phase_alpha: f64, phase_beta: f64) -> GaussianMoments {
    let n = n_tx as f64;
    let d = phase_alpha - phase_beta;
    let (c, s) = (0.5 * d.cos(), 0.5 * d.sin());
    #[rustfmt::skip]
    let cov = DMatrix::from_row_slice(4, 4, &[
        0.5, 0.0, 0.0, c,
        0.0, 0.5, 0.0, s,
        0.0, 0.0, 1.0, 0.0,
        c,   s,   0.0, 0.5,
    ]) * n;
    GaussianMoments {
        mean: vec![0.0, 0.0, n, 0.0],
        covariance: cov,
    }
}

/// Reusable sample set from a multivariate normal.
#[derive(Debug, Clone)]
pub struct GaussianDomainIntegrator {
    dim: usize,
    points: Vec<f64>,
}

pub const MIN_DOMAIN_SAMPLES: usize = 1000;

impl GaussianDomainIntegrator {
    pub fn new(moments: &GaussianMoments, samples: usize, seed: StreamSeed) -> Result<Self> {
        if samples < MIN_DOMAIN_SAMPLES {
            return Err(Error::InvalidParams(format!(
                "domain integration needs at least {MIN_DOMAIN_SAMPLES} samples, got {samples}"
            )));
        }
        let dim = moments.dim();
        let l = moments.factor();
        let points = par_chunks(seed, samples, |rng, _, len| {
            let mut out = Vec::with_capacity(len * dim);
            let mut z = vec![0.0; dim];
            for _ in 0..len {
                for zi in z.iter_mut() {
                    *zi = rng.sample(StandardNormal);
                }
                for i in 0..dim {
                    let mut v = moments.mean[i];
                    for (j, zj) in z.iter().enumerate() {
                        v += l[(i, j)] * zj;
                    }
                    out.push(v);
                }
            }
            out
        });
        Ok(Self { dim, points })
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.points.chunks_exact(self.dim)
    }

    /// `P(indicator(Z))` with binomial standard error.
    pub fn probability<F: Fn(&[f64]) -> bool>(&self, indicator: F) -> Estimate {
        let hits = self.points().filter(|z| indicator(z)).count();
        Estimate::proportion(hits, self.len())
    }

    /// `E[f(Z)]` with the sample standard error.
    pub fn expectation<F: Fn(&[f64]) -> f64>(&self, f: F) -> Estimate {
        let v: Vec<f64> = self.points().map(f).collect();
        Estimate::from_samples(&v)
    }
}

/// Probability that a normal vector with the given moments satisfies
/// `indicator`, estimated from `samples` draws.
pub fn gaussian_domain_probability<F: Fn(&[f64]) -> bool>(
    moments: &GaussianMoments,
    indicator: F,
    samples: usize,
    seed: StreamSeed,
) -> Result<Estimate> {
    Ok(GaussianDomainIntegrator::new(moments, samples, seed)?.probability(indicator))
}

fn to_aggregates(z: &[f64]) -> Aggregates {
    Aggregates {
        r: z[0],
        t: z[1],
        k: z[2],
        w: z.get(3).copied().unwrap_or(0.0),
    }
}

/// Tabulated CCDF.
#[derive(Debug, Clone, PartialEq)]
pub struct CcdfCurve {
    pub thresholds: Vec<f64>,
    pub probabilities: Vec<f64>,
    pub error_bars: Vec<f64>,
}

impl CcdfCurve {
    pub fn tabulate<F: FnMut(f64) -> Estimate>(thresholds: &[f64], mut f: F) -> Self {
        let (probabilities, error_bars) = thresholds.iter().map(|&t| f(t)).map(|e| (e.value, e.std_error)).unzip();
        Self {
            thresholds: thresholds.to_vec(),
            probabilities,
            error_bars,
        }
    }

    /// Non-increasing up to `slack` standard errors.
    pub fn is_monotone(&self, slack: f64) -> bool {
        self.probabilities.windows(2).zip(self.error_bars.windows(2)).all(|(p, e)| {
            p[1] <= p[0] + slack * (e[0] * e[0] + e[1] * e[1]).sqrt() + 1e-15
        })
    }
}

/// `P(c / cos²θ > ε)` for `θ ~ U(−π/2, π/2)`: `(2/π) asin(√(c/ε))`, clamped.
pub fn inverse_cos2_ccdf(c: f64, epsilon: f64) -> f64 {
    if !c.is_finite() {
        return 1.0;
    }
    let u = (c / epsilon).sqrt();
    if u >= 1.0 {
        1.0
    } else {
        2.0 / PI * u.asin()
    }
}

/// Lower bound on `P(CRB(θ) > ε)`.
pub fn ccdf_crb_lower(params: &SystemParams, epsilon: f64) -> f64 {
    inverse_cos2_ccdf(crb_theta_lower(params, 0.0), epsilon)
}

/// `P(CRB(θ) > ε)` for the exact (data-beam-only) CRB.
pub fn ccdf_crb_exact(params: &SystemParams, epsilon: f64) -> f64 {
    inverse_cos2_ccdf(crb_theta_exact(params, 0.0), epsilon)
}

/// `P(CRB(φ) > ε)` at the sensing eavesdropper.
pub fn ccdf_crb_phi(params: &SystemParams, epsilon: f64) -> f64 {
    inverse_cos2_ccdf(crb_phi(params, 0.0), epsilon)
}

/// CCDF of the exact CRB(θ) when θ is uniform on the truncated interval
/// `[−π/2 + δ, π/2 − δ]`.
pub fn ccdf_crb_exact_truncated(params: &SystemParams, t: f64) -> f64 {
    let c = crb_theta_exact(params, 0.0);
    if !c.is_finite() {
        return 1.0;
    }
    let edge = FRAC_PI_2 - params.delta;
    if t <= c {
        return 1.0;
    }
    let cut = (c / t).sqrt().acos();
    ((edge - cut) / edge).max(0.0)
}

/// Which CLT-surrogate CRB to integrate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SurrogateBound {
    /// Cauchy–Schwarz upper bound UCRB.
    Upper,
    /// Mean-replacement approximation ACRB.
    Approx,
}

/// Surrogate CCDF machinery for a fixed parameter set.
///
/// For each Gaussian sample the CRB factorises as `c / (D(R,T,K) cos²θ)`,
/// so the θ-average of the indicator `CRB > ε` is
/// `(2/π) asin(√(c / (D ε)))`, or 1 when `D ≤ 0`. The CCDF is the sample
/// mean of that conditional probability.
#[derive(Debug, Clone)]
pub struct SurrogateCcdf {
    unit: f64,
    den: Vec<f64>,
}

impl SurrogateCcdf {
    pub fn new(params: &SystemParams, bound: SurrogateBound, samples: usize, seed: StreamSeed) -> Result<Self> {
        let integ = GaussianDomainIntegrator::new(&clt_moments_3d(params.n_tx), samples, seed)?;
        Ok(Self::from_integrator(params, bound, &integ))
    }

    pub fn from_integrator(params: &SystemParams, bound: SurrogateBound, integ: &GaussianDomainIntegrator) -> Self {
        let unit = crb_with_unit_bracket(params);
        let den = integ
            .points()
            .map(|z| surrogate_denominator(params, bound, &to_aggregates(z)).unwrap_or(0.0))
            .collect();
        Self { unit, den }
    }

    pub fn ccdf(&self, epsilon: f64) -> Estimate {
        let p: Vec<f64> = self
            .den
            .iter()
            .map(|&d| if d > 0.0 { inverse_cos2_ccdf(self.unit / d, epsilon) } else { 1.0 })
            .collect();
        Estimate::from_samples(&p)
    }

    /// Share of samples outside the attainable region or with a
    /// non-positive bracket.
    pub fn infinite_fraction(&self) -> f64 {
        self.den.iter().filter(|&&d| d <= 0.0).count() as f64 / self.den.len() as f64
    }
}

/// The θ-free bracket `γ1|α|²(M²−1) + γ2(N²−1)·factor`, or `None` outside
/// the attainable region (UCRB only).
fn surrogate_denominator(params: &SystemParams, bound: SurrogateBound, agg: &Aggregates) -> Option<f64> {
    let n = params.n_tx as f64;
    let m = params.m_rx as f64;
    let factor = match bound {
        SurrogateBound::Upper => upper_an_factor(params, agg)?,
        SurrogateBound::Approx => approx_an_factor(params, agg),
    };
    Some(params.gamma1() * params.alpha_mag.powi(2) * (m * m - 1.0) + params.gamma2() * (n * n - 1.0) * factor)
}

/// The CRB at θ = 0 with the bracket set to one.
fn crb_with_unit_bracket(params: &SystemParams) -> f64 {
    let m = params.m_rx as f64;
    let n = params.n_tx as f64;
    6.0 * params.sigma_r.powi(2) / (params.frame_len as f64 * params.c3.norm_sqr() * PI * PI * m * n)
}

fn surrogate_crb(params: &SystemParams, bound: SurrogateBound, theta: f64, agg: &Aggregates) -> f64 {
    match bound {
        SurrogateBound::Upper => crb_theta_upper(params, theta, agg),
        SurrogateBound::Approx => crb_theta_approx(params, theta, agg),
    }
}

/// Upper bound on `P(CRB(θ) > ε)` (Gaussian-surrogate domain integral).
pub fn ccdf_crb_upper(params: &SystemParams, epsilon: f64, samples: usize, seed: StreamSeed) -> Result<Estimate> {
    Ok(SurrogateCcdf::new(params, SurrogateBound::Upper, samples, seed)?.ccdf(epsilon))
}

/// Approximation of `P(CRB(θ) > ε)` (Gaussian-surrogate domain integral).
pub fn ccdf_crb_approx(params: &SystemParams, epsilon: f64, samples: usize, seed: StreamSeed) -> Result<Estimate> {
    Ok(SurrogateCcdf::new(params, SurrogateBound::Approx, samples, seed)?.ccdf(epsilon))
}

/// Literal route for the surrogate CCDFs: θ is drawn uniformly alongside
/// each Gaussian sample and the indicator `CRB > ε` is averaged. Used to
/// cross-check [`SurrogateCcdf`].
pub fn ccdf_surrogate_by_indicator(
    params: &SystemParams,
    bound: SurrogateBound,
    epsilon: f64,
    integ: &GaussianDomainIntegrator,
    seed: StreamSeed,
) -> Estimate {
    let mut rng = seed.stream(0);
    let thetas: Vec<f64> = (0..integ.len()).map(|_| uniform_angle(&mut rng, 0.0)).collect();
    let hits = integ
        .points()
        .zip(&thetas)
        .filter(|(z, &th)| surrogate_crb(params, bound, th, &to_aggregates(z)) > epsilon)
        .count();
    Estimate::proportion(hits, integ.len())
}

/// How the truncated angle average is normalised.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AveragingMode {
    /// Divide the truncated integral by `π` (the printed closed forms).
    #[default]
    PaperVerbatim,
    /// Divide by the truncated width `π − 2δ` (a true conditional mean).
    ExactTruncation,
}

impl AveragingMode {
    pub fn normalizer(self, delta: f64) -> f64 {
        match self {
            Self::PaperVerbatim => PI,
            Self::ExactTruncation => PI - 2.0 * delta,
        }
    }

    /// Factor converting a conditional mean over the truncated interval into
    /// this mode's normalisation.
    pub fn from_conditional(self, delta: f64) -> f64 {
        (PI - 2.0 * delta) / self.normalizer(delta)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::PaperVerbatim => "paper-verbatim",
            Self::ExactTruncation => "exact-truncation",
        }
    }
}

impl FromStr for AveragingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper-verbatim" => Ok(Self::PaperVerbatim),
            "exact-truncation" => Ok(Self::ExactTruncation),
            other => Err(Error::Config(format!("unknown averaging mode '{other}'"))),
        }
    }
}

/// `∫ c/cos²θ dθ` over the truncated interval, normalised per `mode`.
fn truncated_sec2_mean(c: f64, params: &SystemParams, mode: AveragingMode) -> f64 {
    2.0 * c * (FRAC_PI_2 - params.delta).tan() / mode.normalizer(params.delta)
}

/// Ergodic exact CRB(θ).
pub fn ergodic_crb_exact(params: &SystemParams, mode: AveragingMode) -> Result<f64> {
    if params.tau == 0.0 || params.alpha_mag == 0.0 {
        return Err(Error::InfiniteErgodicCrb("no data power reaches the target"));
    }
    Ok(truncated_sec2_mean(crb_theta_exact(params, 0.0), params, mode))
}

/// Closed-form lower bound on the ergodic CRB(θ).
pub fn ergodic_crb_lower(params: &SystemParams, mode: AveragingMode) -> Result<f64> {
    let c = crb_theta_lower(params, 0.0);
    if !c.is_finite() {
        return Err(Error::InfiniteErgodicCrb("sensing bracket is not positive"));
    }
    Ok(truncated_sec2_mean(c, params, mode))
}

/// Ergodic CRB(φ) at the sensing eavesdropper.
pub fn ergodic_crb_phi(params: &SystemParams, mode: AveragingMode) -> Result<f64> {
    if params.tau == 0.0 || params.alpha_mag == 0.0 {
        return Err(Error::InfiniteErgodicCrb("no data power reaches the target"));
    }
    Ok(truncated_sec2_mean(crb_phi(params, 0.0), params, mode))
}

/// Mean of a surrogate CRB together with the share of discarded samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErgodicEstimate {
    pub value: f64,
    pub std_error: f64,
    /// Fraction of surrogate draws whose CRB was infinite (excluded from the
    /// mean).
    pub infinite_fraction: f64,
}

pub const MIN_ERGODIC_SAMPLES: usize = 10_000;

/// Ergodic approximate CRB(θ): mean of ACRB over θ uniform on the truncated
/// interval and `(R, T, K)` from the CLT surrogate.
pub fn ergodic_crb_approx(
    params: &SystemParams,
    samples: usize,
    seed: StreamSeed,
    mode: AveragingMode,
) -> Result<ErgodicEstimate> {
    if samples < MIN_ERGODIC_SAMPLES {
        return Err(Error::InvalidParams(format!(
            "ergodic CRB needs at least {MIN_ERGODIC_SAMPLES} samples, got {samples}"
        )));
    }
    if params.tau == 0.0 || params.alpha_mag == 0.0 {
        return Err(Error::InfiniteErgodicCrb("no data power reaches the target"));
    }
    let moments = clt_moments_3d(params.n_tx);
    let l = moments.factor();
    let values = par_chunks(seed, samples, |rng, _, len| {
        (0..len)
            .map(|_| {
                let theta = uniform_angle(rng, params.delta);
                let z: [f64; 3] = std::array::from_fn(|_| rng.sample(StandardNormal));
                let v: [f64; 3] =
                    std::array::from_fn(|i| moments.mean[i] + (0..3).map(|j| l[(i, j)] * z[j]).sum::<f64>());
                crb_theta_approx(params, theta, &to_aggregates(&v))
            })
            .collect()
    });
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    let est = Estimate::from_samples(&finite).scale(mode.from_conditional(params.delta));
    Ok(ErgodicEstimate {
        value: est.value,
        std_error: est.std_error,
        infinite_fraction: 1.0 - finite.len() as f64 / samples as f64,
    })
}

/// Log-spaced ε grid spanning the region where the closed-form CCDFs move
/// from 0.99 down to 0.01.
pub fn default_eps_grid(params: &SystemParams, points: usize) -> Vec<f64> {
    let consts = [
        crb_theta_lower(params, 0.0),
        crb_theta_exact(params, 0.0),
        crb_phi(params, 0.0),
    ];
    let finite: Vec<f64> = consts.iter().copied().filter(|c| c.is_finite()).collect();
    let lo_c = finite.iter().copied().fold(f64::INFINITY, f64::min);
    let hi_c = finite.iter().copied().fold(0.0, f64::max);
    // (2/π) asin(√(c/ε)) = p  ⇔  ε = c / sin²(πp/2)
    let lo = lo_c / (0.99 * FRAC_PI_2).sin().powi(2);
    let hi = hi_c / (0.01 * FRAC_PI_2).sin().powi(2);
    let (a, b) = (lo.ln(), hi.ln());
    (0..points)
        .map(|i| (a + (b - a) * i as f64 / (points.max(2) - 1) as f64).exp())
        .collect()
}
