//! Signal-of-interest models and their (lifted) covariances.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kron::{kron, lift_signal};
use crate::linalg::{c64, check_psd, frob, hermitian_part, CMatrix, CVector, ZERO};
use crate::rng::RngStream;

/// Number of exponentials in the sum-of-exponentials model.
pub const DEFAULT_COMPONENTS: usize = 6;

const HERMITIAN_TOL: f64 = 1e-12;
const PSD_TOL: f64 = 1e-10;

/// Generative model for the signal of interest.
#[derive(Debug, Clone, PartialEq)]
pub enum SoiModel {
    /// `u_k = Σ_l M_l exp(jπ Φ_l k)`, `k = 1..n`, `M_l ~ N(0, amplitude_variance)`,
    /// `Φ_l ~ U[0, π]`.
    SumExponentials {
        n: usize,
        num_components: usize,
        amplitude_variance: f64,
    },
    /// Zero-mean proper complex Gaussian with the given covariance.
    ProperGaussian { n: usize, covariance: CMatrix },
}

impl SoiModel {
    pub fn sum_exponentials(n: usize) -> Self {
        SoiModel::SumExponentials {
            n,
            num_components: DEFAULT_COMPONENTS,
            amplitude_variance: 1.0,
        }
    }

    /// Proper Gaussian with the exponentially decaying correlation profile.
    pub fn gaussian_expdecay(n: usize) -> Self {
        SoiModel::ProperGaussian {
            n,
            covariance: gaussian_covariance_expdecay(n),
        }
    }

    pub fn proper_gaussian(covariance: CMatrix) -> Result<Self> {
        check_psd(&covariance, HERMITIAN_TOL, PSD_TOL)?;
        Ok(SoiModel::ProperGaussian {
            n: covariance.nrows(),
            covariance,
        })
    }

    pub fn n(&self) -> usize {
        match self {
            SoiModel::SumExponentials { n, .. } | SoiModel::ProperGaussian { n, .. } => *n,
        }
    }

    /// Closed-form `C_U` when available.
    pub fn analytic_covariance(&self) -> Option<&CMatrix> {
        match self {
            SoiModel::ProperGaussian { covariance, .. } => Some(covariance),
            SoiModel::SumExponentials { .. } => None,
        }
    }

    /// A reusable sampler (factorises the Gaussian covariance once).
    pub fn sampler(&self) -> Result<SoiSampler> {
        Ok(match self {
            SoiModel::SumExponentials {
                n,
                num_components,
                amplitude_variance,
            } => SoiSampler::SumExponentials {
                n: *n,
                num_components: *num_components,
                amplitude_std: amplitude_variance.sqrt(),
            },
            SoiModel::ProperGaussian { covariance, .. } => {
                SoiSampler::Gaussian(PcGaussian::new(covariance)?)
            }
        })
    }
}

/// Prepared sampler for a [`SoiModel`].
#[derive(Debug, Clone)]
pub enum SoiSampler {
    SumExponentials {
        n: usize,
        num_components: usize,
        amplitude_std: f64,
    },
    Gaussian(PcGaussian),
}

impl SoiSampler {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> CVector {
        match self {
            SoiSampler::SumExponentials {
                n,
                num_components,
                amplitude_std,
            } => sum_exponentials_with(*n, *num_components, *amplitude_std, rng),
            SoiSampler::Gaussian(g) => g.sample(rng),
        }
    }
}

fn sum_exponentials_with<R: Rng + ?Sized>(
    n: usize,
    num_components: usize,
    amplitude_std: f64,
    rng: &mut R,
) -> CVector {
    let amps: Vec<f64> = (0..num_components)
        .map(|_| amplitude_std * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let freqs: Vec<f64> = (0..num_components).map(|_| rng.random::<f64>() * PI).collect();
    CVector::from_fn(n, |i, _| {
        let k = (i + 1) as f64;
        amps.iter()
            .zip(&freqs)
            .fold(ZERO, |acc, (&m, &phi)| acc + c64(0.0, PI * phi * k).exp() * m)
    })
}

/// One draw of the sum-of-six-exponentials model.
pub fn sample_sum_exponentials<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CVector {
    sum_exponentials_with(n, DEFAULT_COMPONENTS, 1.0, rng)
}

/// `(C_U)_{k,l} = 6 exp(−|k−l| + j2π(k−l)/n)`.
pub fn gaussian_covariance_expdecay(n: usize) -> CMatrix {
    let nf = n as f64;
    CMatrix::from_fn(n, n, |k, l| {
        let d = k as f64 - l as f64;
        c64(-d.abs(), 2.0 * PI * d / nf).exp() * 6.0
    })
}

/// Proper complex Gaussian sampler `u = F z`, `F Fᴴ = C_U`.
#[derive(Debug, Clone)]
pub struct PcGaussian {
    factor: CMatrix,
}

impl PcGaussian {
    pub fn new(c_u: &CMatrix) -> Result<Self> {
        let eig = check_psd(c_u, HERMITIAN_TOL, PSD_TOL)?;
        let mut factor = eig.vectors.clone();
        for (k, &l) in eig.values.iter().enumerate() {
            let s = l.max(0.0).sqrt();
            factor.column_mut(k).iter_mut().for_each(|z| *z *= s);
        }
        Ok(PcGaussian { factor })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> CVector {
        let n = self.factor.ncols();
        let z = CVector::from_fn(n, |_, _| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            c64(re, im) * std::f64::consts::FRAC_1_SQRT_2
        });
        &self.factor * z
    }
}

pub fn sample_pc_gaussian<R: Rng + ?Sized>(c_u: &CMatrix, rng: &mut R) -> Result<CVector> {
    Ok(PcGaussian::new(c_u)?.sample(rng))
}

/// `C_U ⊗ conj(C_U)`, the lifted covariance of a Kronecker-symmetric SOI.
pub fn lifted_covariance_kron_symmetric(c_u: &CMatrix) -> CMatrix {
    kron(c_u, &c_u.conjugate())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    AnalyticKronSymmetric,
    Empirical { num_samples: usize, seed: RngStream },
}

/// Covariance of the SOI and of its lift `x = u ⊗ u*`.
#[derive(Debug, Clone)]
pub struct CovariancePair {
    pub c_u: CMatrix,
    pub c_x: CMatrix,
    pub provenance: Provenance,
}

impl CovariancePair {
    pub fn analytic(c_u: CMatrix) -> Result<Self> {
        check_psd(&c_u, HERMITIAN_TOL, PSD_TOL)?;
        let c_x = lifted_covariance_kron_symmetric(&c_u);
        Ok(CovariancePair {
            c_u,
            c_x,
            provenance: Provenance::AnalyticKronSymmetric,
        })
    }

    pub fn n(&self) -> usize {
        self.c_u.nrows()
    }
}

const CHUNK: usize = 4096;

/// Sample covariances of `u` and `lift_signal(u)` over `num_samples` draws.
///
/// Samples are drawn in fixed-size chunks, chunk `i` from stream
/// `stream.stream_index + i`, so the result does not depend on the thread
/// count.
pub fn empirical_lifted_covariance(
    model: &SoiModel,
    num_samples: usize,
    stream: RngStream,
) -> Result<CovariancePair> {
    let n = model.n();
    let required = (10 * n * n).max(2);
    if num_samples < required {
        return Err(Error::TooFewSamples {
            required,
            got: num_samples,
        });
    }
    let sampler = model.sampler()?;
    let n2 = n * n;
    let chunks = num_samples.div_ceil(CHUNK);
    let partials: Vec<(CVector, CMatrix, CVector, CMatrix)> = (0..chunks)
        .into_par_iter()
        .map(|ci| {
            let count = CHUNK.min(num_samples - ci * CHUNK);
            let mut rng = stream
                .with_index(stream.stream_index.wrapping_add(ci as u64))
                .generator();
            let mut us = CMatrix::zeros(n, count);
            let mut xs = CMatrix::zeros(n2, count);
            for s in 0..count {
                let u = sampler.sample(&mut rng);
                xs.set_column(s, &lift_signal(&u));
                us.set_column(s, &u);
            }
            let su = us.column_sum();
            let sx = xs.column_sum();
            (su, &us * us.adjoint(), sx, &xs * xs.adjoint())
        })
        .collect();
    let mut sum_u = CVector::zeros(n);
    let mut sum_uu = CMatrix::zeros(n, n);
    let mut sum_x = CVector::zeros(n2);
    let mut sum_xx = CMatrix::zeros(n2, n2);
    for (su, suu, sx, sxx) in partials {
        sum_u += su;
        sum_uu += suu;
        sum_x += sx;
        sum_xx += sxx;
    }
    let nf = num_samples as f64;
    let centered = |s: CMatrix, mean_sum: &CVector| -> Result<CMatrix> {
        let mean = mean_sum.unscale(nf);
        let c = (s - (&mean * mean.adjoint()).scale(nf)).unscale(nf - 1.0);
        hermitian_part(&c)
    };
    Ok(CovariancePair {
        c_u: centered(sum_uu, &sum_u)?,
        c_x: centered(sum_xx, &sum_x)?,
        provenance: Provenance::Empirical {
            num_samples,
            seed: stream,
        },
    })
}

/// `‖C_X − C_U ⊗ C_U*‖ / ‖C_U ⊗ C_U*‖`.
pub fn kron_symmetry_deviation(pair: &CovariancePair) -> Result<f64> {
    let n = pair.c_u.nrows();
    if pair.c_u.ncols() != n || pair.c_x.shape() != (n * n, n * n) {
        return Err(Error::Dimension(format!(
            "c_u is {:?}, c_x is {:?}",
            pair.c_u.shape(),
            pair.c_x.shape()
        )));
    }
    if pair.provenance == Provenance::AnalyticKronSymmetric {
        return Ok(0.0);
    }
    let reference = lifted_covariance_kron_symmetric(&pair.c_u);
    let denom = frob(&reference);
    if denom == 0.0 {
        return Err(Error::ZeroDenominator("kron_symmetry_deviation"));
    }
    Ok(frob(&(&pair.c_x - reference)) / denom)
}
