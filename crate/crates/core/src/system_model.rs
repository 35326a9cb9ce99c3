//! Scenario constants, uniform-linear-array geometry and channel draws.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type CVector = DVector<Complex64>;

/// All constants describing one downlink scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemParams {
    /// BS transmit antennas.
    pub n_tx: usize,
    /// BS receive antennas.
    pub m_rx: usize,
    /// Sensing-eavesdropper receive antennas.
    pub n_eav: usize,
    /// Frame / pulse length in samples, strictly larger than `n_tx`.
    pub frame_len: usize,
    /// Total transmit power.
    pub power: f64,
    /// Share of the power carried by the data beam.
    pub tau: f64,
    /// Noise standard deviation at the user and the communication eavesdropper.
    pub sigma_u: f64,
    /// Radar noise standard deviation (BS and sensing eavesdropper).
    pub sigma_r: f64,
    /// BS to user path gain.
    pub c1: Complex64,
    /// BS to communication-eavesdropper path gain.
    pub c2: Complex64,
    /// Round-trip gain BS to target to BS.
    pub c3: Complex64,
    /// Gain BS to target to sensing eavesdropper.
    pub c4: Complex64,
    pub alpha_mag: f64,
    pub phase_alpha: f64,
    pub phase_beta: f64,
    /// Angle truncation used by the ergodic CRBs.
    pub delta: f64,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self {
            n_tx: 15,
            m_rx: 17,
            n_eav: 15,
            frame_len: 30,
            power: 10.0,
            tau: 0.76,
            sigma_u: 1.0,
            sigma_r: 1.0,
            c1: Complex64::new(0.001_f64.sqrt(), 0.0),
            c2: Complex64::new(0.001_f64.sqrt(), 0.0),
            c3: Complex64::new(0.001, 0.0),
            c4: Complex64::new(0.001, 0.0),
            alpha_mag: 0.2,
            phase_alpha: 0.0,
            phase_beta: 0.0,
            delta: 0.1,
        }
    }
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParams(msg));
        if self.n_tx < 3 {
            return bad(format!("n_tx must be at least 3, got {}", self.n_tx));
        }
        if self.m_rx < 1 || self.n_eav < 1 {
            return bad("m_rx and n_eav must be positive".into());
        }
        if self.frame_len <= self.n_tx {
            return bad(format!(
                "frame_len ({}) must exceed n_tx ({})",
                self.frame_len, self.n_tx
            ));
        }
        if !(self.power > 0.0 && self.power.is_finite()) {
            return bad(format!("power must be positive, got {}", self.power));
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return bad(format!("tau must lie in [0, 1], got {}", self.tau));
        }
        if !(self.sigma_u > 0.0 && self.sigma_r > 0.0) {
            return bad("noise standard deviations must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.alpha_mag) {
            return bad(format!("alpha_mag must lie in [0, 1], got {}", self.alpha_mag));
        }
        if !(self.delta > 0.0 && self.delta < FRAC_PI_2) {
            return bad(format!("delta must lie in (0, pi/2), got {}", self.delta));
        }
        Ok(())
    }

    pub fn with_tau(&self, tau: f64) -> Self {
        Self {
            tau,
            ..self.clone()
        }
    }

    pub fn beta_mag(&self) -> f64 {
        (1.0 - self.alpha_mag * self.alpha_mag).max(0.0).sqrt()
    }

    pub fn alpha(&self) -> Complex64 {
        Complex64::from_polar(self.alpha_mag, self.phase_alpha)
    }

    pub fn beta(&self) -> Complex64 {
        Complex64::from_polar(self.beta_mag(), self.phase_beta)
    }

    /// Data-beam power `P·τ`.
    pub fn gamma1(&self) -> f64 {
        self.power * self.tau
    }

    /// Per-direction artificial-noise power `P(1−τ)/(N−2)`.
    pub fn gamma2(&self) -> f64 {
        self.power * (1.0 - self.tau) / (self.n_tx as f64 - 2.0)
    }

    /// `σ_R² / (2|c3|²L)`.
    pub fn q(&self) -> f64 {
        self.sigma_r * self.sigma_r / (2.0 * self.c3.norm_sqr() * self.frame_len as f64)
    }
}

/// One random draw of the propagation environment.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub h: CVector,
    pub h_e: CVector,
    pub theta: f64,
    pub phi: f64,
}

fn phase_offset(angle: f64, count: usize, i: usize) -> f64 {
    // i is zero-based here: (count - (2(i+1) - 1)) / 2
    PI * angle.sin() * (count as f64 - (2 * i + 1) as f64) / 2.0
}

/// Half-wavelength ULA response with phase reference at the array centre.
pub fn steering_vector(angle: f64, count: usize) -> CVector {
    CVector::from_fn(count, |i, _| {
        Complex64::from_polar(1.0, -phase_offset(angle, count, i))
    })
}

/// Element-wise derivative of [`steering_vector`] with respect to the angle.
pub fn steering_derivative(angle: f64, count: usize) -> CVector {
    let c = angle.cos();
    CVector::from_fn(count, |i, _| {
        let df = PI * c * (count as f64 - (2 * i + 1) as f64) / 2.0;
        Complex64::new(0.0, -df) * Complex64::from_polar(1.0, -phase_offset(angle, count, i))
    })
}

/// Closed form of `‖d/dθ steering_vector(θ, count)‖²`.
pub fn steering_derivative_norm_sqr(angle: f64, count: usize) -> f64 {
    let n = count as f64;
    PI * PI * angle.cos().powi(2) * n * (n * n - 1.0) / 12.0
}

/// Draw `count` i.i.d. CN(0, 1) entries (each quadrature has variance 1/2).
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, count: usize) -> CVector {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CVector::from_fn(count, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re * s, im * s)
    })
}

/// Uniform angle on the open interval (−π/2 + margin, π/2 − margin).
pub fn uniform_angle<R: Rng + ?Sized>(rng: &mut R, margin: f64) -> f64 {
    let half = FRAC_PI_2 - margin;
    loop {
        let a = rng.random_range(-half..half);
        if a != -half {
            return a;
        }
    }
}

pub fn sample_realization<R: Rng + ?Sized>(params: &SystemParams, rng: &mut R) -> ChannelRealization {
    let h = complex_gaussian(rng, params.n_tx);
    let h_e = complex_gaussian(rng, params.n_tx);
    let theta = uniform_angle(rng, 0.0);
    let phi = uniform_angle(rng, 0.0);
    ChannelRealization { h, h_e, theta, phi }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamSeed;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn broadside_is_all_ones() {
        let a = steering_vector(0.0, 4);
        for z in a.iter() {
            assert_relative_eq!(z.re, 1.0);
            assert_relative_eq!(z.im, 0.0);
        }
    }

    #[test]
    fn two_element_thirty_degrees() {
        // f = pi * 0.5 * (+-1) / 2 = +-pi/4
        let a = steering_vector(PI / 6.0, 2);
        let e0 = Complex64::from_polar(1.0, -PI / 4.0);
        let e1 = Complex64::from_polar(1.0, PI / 4.0);
        assert!((a[0] - e0).norm() < 1e-15);
        assert!((a[1] - e1).norm() < 1e-15);
    }

    #[test]
    fn derivative_vanishes_at_endfire() {
        for &ang in &[FRAC_PI_2, -FRAC_PI_2] {
            let d = steering_derivative(ang, 9);
            assert!(d.norm() < 1e-14);
        }
    }

    #[test]
    fn derivative_norm_and_orthogonality() {
        for &(ang, n) in &[(0.3, 15usize), (-1.1, 17), (0.0, 4), (1.4, 33)] {
            let a = steering_vector(ang, n);
            let d = steering_derivative(ang, n);
            let want = steering_derivative_norm_sqr(ang, n);
            assert_relative_eq!(d.norm_squared(), want, max_relative = 1e-10);
            assert!(a.dotc(&d).norm() < 1e-10 * (1.0 + want.sqrt()));
        }
    }

    #[test]
    fn channel_moments() {
        let p = SystemParams::default();
        let mut rng = StreamSeed::new(11).stream(0);
        let draws = 100_000 / p.n_tx + 1;
        let (mut m2, mut m4, mut cnt) = (0.0, 0.0, 0.0);
        for _ in 0..draws {
            let r = sample_realization(&p, &mut rng);
            for z in r.h.iter() {
                let e = z.norm_sqr();
                m2 += e;
                m4 += e * e;
                cnt += 1.0;
            }
        }
        assert!((m2 / cnt - 1.0).abs() < 0.02, "E|h|^2 = {}", m2 / cnt);
        assert!((m4 / cnt - 2.0).abs() < 0.05, "E|h|^4 = {}", m4 / cnt);
    }

    #[test]
    fn angles_are_uniform_on_open_interval() {
        let mut rng = StreamSeed::new(3).stream(0);
        let mut sum = 0.0;
        let mut sum_cos2 = 0.0;
        let n = 100_000;
        for _ in 0..n {
            let t = uniform_angle(&mut rng, 0.0);
            assert!(t > -FRAC_PI_2 && t < FRAC_PI_2);
            sum += t;
            sum_cos2 += t.cos().powi(2);
        }
        assert!((sum / n as f64).abs() < 0.02);
        assert!((sum_cos2 / n as f64 - 0.5).abs() < 0.01);
    }

    #[test]
    fn same_seed_same_realization() {
        let p = SystemParams::default();
        let a = sample_realization(&p, &mut StreamSeed::new(5).stream(2));
        let b = sample_realization(&p, &mut StreamSeed::new(5).stream(2));
        assert_eq!(a, b);
    }

    #[test]
    fn validation_rejects_bad_params() {
        let ok = SystemParams::default();
        assert!(ok.validate().is_ok());
        assert!(SystemParams { n_tx: 2, ..ok.clone() }.validate().is_err());
        assert!(SystemParams { frame_len: 15, ..ok.clone() }.validate().is_err());
        assert!(SystemParams { tau: 1.2, ..ok.clone() }.validate().is_err());
        assert!(SystemParams { delta: 0.0, ..ok.clone() }.validate().is_err());
        let derived = ok.alpha().norm_sqr() + ok.beta().norm_sqr();
        assert_relative_eq!(derived, 1.0, epsilon = 1e-15);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn steering_norm_equals_count(angle in -1.6f64..1.6, count in 1usize..64) {
            let a = steering_vector(angle, count);
            prop_assert!((a.norm_squared() - count as f64).abs() < 1e-10);
        }

        #[test]
        fn steering_is_conjugate_symmetric(angle in -1.6f64..1.6, count in 1usize..40) {
            let a = steering_vector(angle, count);
            for i in 0..count {
                prop_assert!((a[i] - a[count - 1 - i].conj()).norm() < 1e-12);
            }
        }

        #[test]
        fn derivative_matches_central_difference(angle in -1.5f64..1.5, count in 1usize..24) {
            let eps = 1e-5;
            let fd = (steering_vector(angle + eps, count) - steering_vector(angle - eps, count))
                / Complex64::new(2.0 * eps, 0.0);
            let d = steering_derivative(angle, count);
            let scale = (count * count) as f64;
            prop_assert!((fd - d).norm() < 1e-6 * scale);
        }
    }
}
