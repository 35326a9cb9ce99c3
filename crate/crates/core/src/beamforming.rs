//! Closed-form artificial-noise-aided precoder.
//!
//! The BS splits `C^N` into the normalised target direction `ã`, the part of
//! the user channel orthogonal to it `h̃`, and an orthonormal basis `G` of
//! the remaining `N−2` dimensions. Data rides on `t1 = α ã + β h̃`; artificial
//! noise fills `G`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::system_model::{complex_gaussian, CVector, SystemParams};

pub type CMatrix = DMatrix<Complex64>;

#[derive(Debug, Clone, PartialEq)]
pub struct BeamformerBasis {
    pub a_hat: CVector,
    pub h_hat: CVector,
    /// `N × (N−2)` orthonormal basis of the null space of `[ã h̃]^H`.
    pub null_basis: CMatrix,
    pub t1: CVector,
}

impl BeamformerBasis {
    pub fn dim(&self) -> usize {
        self.a_hat.len()
    }

    /// The full `N × N` matrix `[ã h̃ G]`.
    pub fn unitary(&self) -> CMatrix {
        let n = self.dim();
        let mut u = CMatrix::zeros(n, n);
        u.set_column(0, &self.a_hat);
        u.set_column(1, &self.h_hat);
        u.columns_mut(2, n - 2).copy_from(&self.null_basis);
        u
    }

    /// `I − ããᴴ − h̃h̃ᴴ`, the orthogonal projector onto the noise subspace.
    pub fn noise_projector(&self) -> CMatrix {
        let n = self.dim();
        CMatrix::identity(n, n) - &self.a_hat * self.a_hat.adjoint() - &self.h_hat * self.h_hat.adjoint()
    }
}

/// Build the orthonormal basis `{ã, h̃, G}` and the data beam `t1`.
pub fn build_basis(a: &CVector, h: &CVector, alpha: Complex64, beta: Complex64) -> Result<BeamformerBasis> {
    let n = a.len();
    assert_eq!(h.len(), n, "steering vector and channel must have equal length");
    let a_hat = a.unscale(a.norm());

    let mut resid = h - &a_hat * a_hat.dotc(h);
    let r = resid.norm();
    if r < 1e-12 * h.norm() || r == 0.0 {
        return Err(Error::DegenerateChannel { residual: r });
    }
    resid.unscale_mut(r);
    // one extra pass keeps ã ⟂ h̃ at machine precision
    let c = a_hat.dotc(&resid);
    resid -= &a_hat * c;
    let h_hat = resid.unscale(resid.norm());

    let null_basis = complete_basis(&[&a_hat, &h_hat]);
    let t1 = &a_hat * alpha + &h_hat * beta;
    Ok(BeamformerBasis {
        a_hat,
        h_hat,
        null_basis,
        t1,
    })
}

/// Orthonormal completion of a set of orthonormal vectors, by column-pivoted
/// modified Gram–Schmidt on the complementary projector.
fn complete_basis(known: &[&CVector]) -> CMatrix {
    let n = known[0].len();
    let missing = n - known.len();
    // columns of I − Σ q qᴴ
    let mut cand: Vec<CVector> = (0..n)
        .map(|k| {
            let mut c = CVector::zeros(n);
            c[k] = Complex64::new(1.0, 0.0);
            for q in known {
                let coef = q[k].conj();
                c.axpy(-coef, q, Complex64::new(1.0, 0.0));
            }
            c
        })
        .collect();
    let mut norms: Vec<f64> = cand.iter().map(|c| c.norm_squared()).collect();
    let mut used = vec![false; n];
    let mut out = CMatrix::zeros(n, missing);
    let mut done: Vec<CVector> = Vec::with_capacity(missing);

    for col in 0..missing {
        let (best, _) = norms
            .iter()
            .enumerate()
            .filter(|(k, _)| !used[*k])
            .fold((usize::MAX, -1.0), |acc, (k, &v)| if v > acc.1 { (k, v) } else { acc });
        used[best] = true;
        let mut q = cand[best].clone();
        for p in known.iter().copied().chain(done.iter()) {
            let c = p.dotc(&q);
            q.axpy(-c, p, Complex64::new(1.0, 0.0));
        }
        q.unscale_mut(q.norm());
        for k in 0..n {
            if !used[k] {
                let c = q.dotc(&cand[k]);
                cand[k].axpy(-c, &q, Complex64::new(1.0, 0.0));
                norms[k] = cand[k].norm_squared();
            }
        }
        out.set_column(col, &q);
        done.push(q);
    }
    out
}

/// Transmit covariance `Pτ t1 t1ᴴ + P(1−τ)/(N−2) · G Gᴴ`.
pub fn transmit_covariance(basis: &BeamformerBasis, params: &SystemParams) -> CMatrix {
    let g = &basis.null_basis;
    &basis.t1 * basis.t1.adjoint() * Complex64::new(params.gamma1(), 0.0)
        + g * g.adjoint() * Complex64::new(params.gamma2(), 0.0)
}

/// One transmitted block and its constituent streams.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveformBlock {
    /// `1 × L` data stream with `s sᴴ = L`.
    pub s_u: CMatrix,
    /// `(N−2) × L` artificial-noise rows, each with `v vᴴ = L/(N−2)` and all
    /// rows mutually orthogonal and orthogonal to `s_u`.
    pub v_rows: CMatrix,
    /// `N × L` transmitted block.
    pub x: CMatrix,
}

/// Draw data and noise streams and form `X = √(Pτ) t1 s_u + √(P(1−τ)) G V`.
///
/// The `N−1` Gaussian rows are orthogonalised jointly and rescaled, so the
/// sample covariance `X Xᴴ / L` equals [`transmit_covariance`] exactly.
pub fn build_waveform<R: Rng + ?Sized>(basis: &BeamformerBasis, params: &SystemParams, rng: &mut R) -> WaveformBlock {
    let n = basis.dim();
    let l = params.frame_len;
    assert!(l > n, "frame length must exceed the antenna count");
    let rows = n - 1;

    let mut streams: Vec<CVector> = (0..rows).map(|_| complex_gaussian(rng, l)).collect();
    for i in 0..rows {
        // two passes of modified Gram–Schmidt
        for _ in 0..2 {
            for j in 0..i {
                let (head, tail) = streams.split_at_mut(i);
                let c = head[j].dotc(&tail[0]);
                tail[0].axpy(-c, &head[j], Complex64::new(1.0, 0.0));
            }
        }
        let nrm = streams[i].norm();
        streams[i].unscale_mut(nrm);
    }

    let lf = l as f64;
    let noise_dirs = (n - 2) as f64;
    let mut s_u = CMatrix::zeros(1, l);
    let mut v_rows = CMatrix::zeros(n - 2, l);
    for k in 0..l {
        s_u[(0, k)] = streams[0][k] * lf.sqrt();
    }
    for i in 0..n - 2 {
        for k in 0..l {
            v_rows[(i, k)] = streams[i + 1][k] * (lf / noise_dirs).sqrt();
        }
    }

    let data = &basis.t1 * &s_u * Complex64::new(params.gamma1().sqrt(), 0.0);
    let noise = &basis.null_basis * &v_rows * Complex64::new((params.power * (1.0 - params.tau)).sqrt(), 0.0);
    WaveformBlock {
        s_u,
        v_rows,
        x: data + noise,
    }
}
