//! Fisher information and Cramér–Rao bounds for the target angle.
//!
//! Angle CRBs are returned as plain `f64` where `f64::INFINITY` marks an
//! unidentifiable configuration (no data power on the target, end-fire
//! angle, or a vanishing Schur complement).

use std::f64::consts::PI;

use nalgebra::{Matrix2, Matrix3};
use num_complex::Complex64;

use crate::beamforming::CMatrix;
use crate::system_model::{steering_derivative, steering_derivative_norm_sqr, steering_vector, CVector, SystemParams};

/// Partitioned FIM for `ξ = [θ, Re c, Im c]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FimBlocks {
    pub f_theta_theta: f64,
    pub f_theta_alpha: [f64; 2],
    pub f_alpha_alpha: [[f64; 2]; 2],
}

impl FimBlocks {
    pub fn full(&self) -> Matrix3<f64> {
        let [a, b] = self.f_theta_alpha;
        let g = self.f_alpha_alpha;
        Matrix3::new(
            self.f_theta_theta, a, b, //
            a, g[0][0], g[0][1], //
            b, g[1][0], g[1][1],
        )
    }
}

/// Why a CRB came out infinite.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Singularity {
    /// The nuisance block `F_ᾱᾱ` is singular.
    SingularNuisance,
    /// The Schur complement is below the numerical floor.
    NonPositiveSchur,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrbValue {
    pub value: f64,
    pub singular: Option<Singularity>,
}

impl CrbValue {
    fn infinite(reason: Singularity) -> Self {
        Self {
            value: f64::INFINITY,
            singular: Some(reason),
        }
    }
}

/// Relative floor under which the Schur complement counts as zero.
pub const SCHUR_FLOOR: f64 = 1e-14;

/// FIM of a complex Gaussian observation whose covariance does not depend on
/// the parameters: `F_ij = (2/σ²) Re⟨∂u/∂ξ_i, ∂u/∂ξ_j⟩`.
pub fn fim_complex_gaussian(mean_derivatives: &[CVector; 3], noise_var: f64) -> FimBlocks {
    let f = |i: usize, j: usize| 2.0 / noise_var * mean_derivatives[i].dotc(&mean_derivatives[j]).re;
    FimBlocks {
        f_theta_theta: f(0, 0),
        f_theta_alpha: [f(0, 1), f(0, 2)],
        f_alpha_alpha: [[f(1, 1), f(1, 2)], [f(2, 1), f(2, 2)]],
    }
}

/// `[F_θθ − F_θᾱ F_ᾱᾱ⁻¹ F_ᾱθ]⁻¹`.
pub fn crb_from_blocks(blocks: &FimBlocks) -> CrbValue {
    let g = blocks.f_alpha_alpha;
    let faa = Matrix2::new(g[0][0], g[0][1], g[1][0], g[1][1]);
    let scale = faa.trace().abs();
    let det = faa.determinant();
    if scale == 0.0 || det <= SCHUR_FLOOR * scale * scale {
        return CrbValue::infinite(Singularity::SingularNuisance);
    }
    let inv = faa.try_inverse().expect("determinant checked above");
    let v = nalgebra::Vector2::new(blocks.f_theta_alpha[0], blocks.f_theta_alpha[1]);
    let schur = blocks.f_theta_theta - (v.transpose() * inv * v)[(0, 0)];
    if !(blocks.f_theta_theta > 0.0) || schur <= SCHUR_FLOOR * blocks.f_theta_theta {
        return CrbValue::infinite(Singularity::NonPositiveSchur);
    }
    CrbValue {
        value: 1.0 / schur,
        singular: None,
    }
}

/// Aggregate channel statistics seen from the target direction.
///
/// With `g_i = e^{j f_i} h_i`: `R = Σ Re g_i`, `T = Σ Im g_i`, `K = Σ |h_i|²`,
/// `W = Σ |h_i| cos(f_i + ∠h_i + φ_β − φ_α)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aggregates {
    pub r: f64,
    pub t: f64,
    pub k: f64,
    pub w: f64,
}

fn phase_offsets(theta: f64, n: usize) -> impl Iterator<Item = (f64, f64)> {
    let (s, c) = theta.sin_cos();
    (0..n).map(move |i| {
        let m = (n as f64 - (2 * i + 1) as f64) / 2.0;
        (PI * s * m, PI * c * m)
    })
}

pub fn aggregates(params: &SystemParams, h: &CVector, theta: f64) -> Aggregates {
    let (mut r, mut t, mut k) = (0.0, 0.0, 0.0);
    for ((f, _), hi) in phase_offsets(theta, h.len()).zip(h.iter()) {
        let g = Complex64::from_polar(1.0, f) * hi;
        r += g.re;
        t += g.im;
        k += hi.norm_sqr();
    }
    let d = params.phase_beta - params.phase_alpha;
    let w = r * d.cos() - t * d.sin();
    Aggregates { r, t, k, w }
}

/// `6σ_R² / (L|c|²π²cos²θ · M·N)`, the leading constant shared by the
/// closed-form CRB variants.
fn angle_prefactor(params: &SystemParams, theta: f64, gain_sqr: f64, rx: usize) -> f64 {
    if endfire(theta) {
        return f64::INFINITY;
    }
    let cos2 = theta.cos().powi(2);
    6.0 * params.sigma_r.powi(2)
        / (params.frame_len as f64 * gain_sqr * PI * PI * cos2 * rx as f64 * params.n_tx as f64)
}

/// `CRB = prefactor / (γ1|α|²(M²−1) + γ2(N²−1)·factor)` with the
/// `θ`-independent part of the AN contribution scaled by `factor`.
fn crb_with_an_factor(params: &SystemParams, theta: f64, factor: f64) -> f64 {
    let m = params.m_rx as f64;
    let n = params.n_tx as f64;
    let pre = angle_prefactor(params, theta, params.c3.norm_sqr(), params.m_rx);
    let den = params.gamma1() * params.alpha_mag.powi(2) * (m * m - 1.0) + params.gamma2() * (n * n - 1.0) * factor;
    positive_ratio(pre, den)
}

/// `|cos θ|` at or below this counts as end-fire, where the angle is not
/// identifiable. `cos(π/2)` in floating point is about `6e-17`.
const ENDFIRE_COS: f64 = 4.0 * f64::EPSILON;

fn endfire(angle: f64) -> bool {
    angle.cos().abs() <= ENDFIRE_COS
}

fn positive_ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 && num.is_finite() {
        let v = num / den;
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    } else {
        f64::INFINITY
    }
}

/// Closed-form CRB(θ) under the fixed-waveform assumption, from the raw
/// channel `h` and angle `θ`.
pub fn crb_theta_common(params: &SystemParams, h: &CVector, theta: f64) -> f64 {
    if endfire(theta) {
        return f64::INFINITY;
    }
    let n = params.n_tx as f64;
    let (mut r, mut t, mut k) = (0.0, 0.0, 0.0);
    let (mut dr, mut dt) = (0.0, 0.0);
    for ((f, df), hi) in phase_offsets(theta, h.len()).zip(h.iter()) {
        let g = Complex64::from_polar(1.0, f) * hi;
        r += g.re;
        t += g.im;
        k += hi.norm_sqr();
        dr += df * g.re;
        dt -= df * g.im;
    }
    let cross = dt * dt + dr * dr;
    let resid = k - (t * t + r * r) / n;
    let da2 = steering_derivative_norm_sqr(theta, params.n_tx);
    let db2 = steering_derivative_norm_sqr(theta, params.m_rx);
    let an_term = if resid > 0.0 { da2 - cross / resid } else { 0.0 };
    let den = params.gamma1() * db2 * n * params.alpha_mag.powi(2) + params.gamma2() * params.m_rx as f64 * an_term;
    positive_ratio(params.q(), den)
}

/// Trace form `σ² tr(AᴴA R) / (2|c3|²L [tr(AᴴAR) tr(ȦᴴȦR) − |tr(ȦᴴAR)|²])`
/// with `A = b aᴴ`, evaluated by dense matrix algebra.
pub fn crb_theta_trace(params: &SystemParams, rx: &CMatrix, theta: f64) -> f64 {
    let (a, da) = (steering_vector(theta, params.n_tx), steering_derivative(theta, params.n_tx));
    let (b, db) = (steering_vector(theta, params.m_rx), steering_derivative(theta, params.m_rx));
    let big_a = &b * a.adjoint();
    let big_da = &db * a.adjoint() + &b * da.adjoint();
    let t_aa = (big_a.adjoint() * &big_a * rx).trace();
    let t_dd = (big_da.adjoint() * &big_da * rx).trace();
    let t_da = (big_da.adjoint() * &big_a * rx).trace();
    let den = 2.0 * params.c3.norm_sqr() * params.frame_len as f64 * (t_aa.re * t_dd.re - t_da.norm_sqr());
    positive_ratio(params.sigma_r.powi(2) * t_aa.re, den)
}

fn vectorize(m: &CMatrix) -> CVector {
    CVector::from_column_slice(m.as_slice())
}

/// CRB(θ) from the Fisher information of `vec(c3 b aᴴ X) + noise` with the
/// block `X` held fixed.
pub fn crb_theta_numeric_fim(params: &SystemParams, x: &CMatrix, theta: f64) -> CrbValue {
    let (a, da) = (steering_vector(theta, params.n_tx), steering_derivative(theta, params.n_tx));
    let (b, db) = (steering_vector(theta, params.m_rx), steering_derivative(theta, params.m_rx));
    let ax = vectorize(&(&b * (a.adjoint() * x)));
    let dax = vectorize(&((&db * a.adjoint() + &b * da.adjoint()) * x));
    let derivs = [dax * params.c3, ax.clone(), ax * Complex64::i()];
    crb_from_blocks(&fim_complex_gaussian(&derivs, params.sigma_r.powi(2)))
}

/// CRB(θ) when the AN is accounted for as orthogonal to the target, i.e.
/// only the data beam illuminates it.
pub fn crb_theta_exact(params: &SystemParams, theta: f64) -> f64 {
    if endfire(theta) {
        return f64::INFINITY;
    }
    let m = params.m_rx as f64;
    let n = params.n_tx as f64;
    let den = params.frame_len as f64
        * params.c3.norm_sqr()
        * params.gamma1()
        * n
        * params.alpha_mag.powi(2)
        * PI
        * PI
        * theta.cos().powi(2)
        * m
        * (m * m - 1.0);
    positive_ratio(6.0 * params.sigma_r.powi(2), den)
}

/// Numeric-FIM route for [`crb_theta_exact`]: the collapsed echo
/// `α c3 √N √(Pτ) vec(b s_u)`.
pub fn crb_theta_exact_numeric_fim(params: &SystemParams, s_u: &CMatrix, theta: f64) -> CrbValue {
    let (b, db) = (steering_vector(theta, params.m_rx), steering_derivative(theta, params.m_rx));
    let amp = params.alpha() * (params.n_tx as f64).sqrt() * params.gamma1().sqrt();
    let bs = vectorize(&(&b * s_u)) * amp;
    let dbs = vectorize(&(&db * s_u)) * (amp * params.c3);
    let derivs = [dbs, bs.clone(), bs * Complex64::i()];
    crb_from_blocks(&fim_complex_gaussian(&derivs, params.sigma_r.powi(2)))
}

/// CRB of the target angle at the sensing eavesdropper.
pub fn crb_phi(params: &SystemParams, phi: f64) -> f64 {
    if endfire(phi) {
        return f64::INFINITY;
    }
    let dc2 = steering_derivative_norm_sqr(phi, params.n_eav);
    let den = 2.0
        * params.c4.norm_sqr()
        * params.frame_len as f64
        * params.gamma1()
        * dc2
        * params.alpha_mag.powi(2)
        * params.n_tx as f64;
    positive_ratio(params.sigma_r.powi(2), den)
}

/// Lower bound LCRB(θ): the channel-dependent loss term is dropped.
pub fn crb_theta_lower(params: &SystemParams, theta: f64) -> f64 {
    crb_with_an_factor(params, theta, 1.0)
}

/// Returns `None` when the aggregates lie outside the region a physical
/// channel can produce (`K ≤ 0` or `K ≤ (R²+T²)/N`).
fn residual(params: &SystemParams, agg: &Aggregates) -> Option<f64> {
    let resid = agg.k - (agg.r * agg.r + agg.t * agg.t) / params.n_tx as f64;
    (agg.k > 0.0 && resid > 0.0).then_some(resid)
}

/// AN factor of UCRB, `1 − K/(K − (R²+T²)/N)`, or `None` outside the
/// attainable region.
pub fn upper_an_factor(params: &SystemParams, agg: &Aggregates) -> Option<f64> {
    residual(params, agg).map(|resid| 1.0 - agg.k / resid)
}

/// AN factor of ACRB, `1 − 1/(K − (R²+T²)/N)`, clamped at zero.
///
/// The AN contribution to the Fisher information is a squared projection
/// norm and cannot be negative; a negative factor only arises for surrogate
/// draws with a residual below one, which a physical channel reaches with
/// negligible probability. Clamping keeps ACRB at or below the data-beam-only
/// CRB.
pub fn approx_an_factor(params: &SystemParams, agg: &Aggregates) -> f64 {
    match residual(params, agg) {
        Some(resid) => (1.0 - 1.0 / resid).max(0.0),
        None => 0.0,
    }
}

/// Upper bound UCRB(θ) via Cauchy–Schwarz on the loss term.
pub fn crb_theta_upper(params: &SystemParams, theta: f64, agg: &Aggregates) -> f64 {
    match upper_an_factor(params, agg) {
        Some(f) => crb_with_an_factor(params, theta, f),
        None => f64::INFINITY,
    }
}

/// Approximation ACRB(θ): the loss term is replaced by its mean.
pub fn crb_theta_approx(params: &SystemParams, theta: f64, agg: &Aggregates) -> f64 {
    crb_with_an_factor(params, theta, approx_an_factor(params, agg))
}
