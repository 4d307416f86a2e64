use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::design::DesignOptions;
use crate::error::{Error, Result};
use crate::retrieval::{AltminOptions, Algorithm, TafOptions};
use crate::soi::SoiModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SoiSpec {
    /// Sum of six random exponentials; `C_X` estimated by sampling.
    SumExponentials,
    /// Proper Gaussian with `(C_U)_{k,l} = 6 e^{−|k−l| + j2π(k−l)/n}`.
    GaussianExpdecay,
}

impl SoiSpec {
    pub fn model(self, n: usize) -> SoiModel {
        match self {
            SoiSpec::SumExponentials => SoiModel::sum_exponentials(n),
            SoiSpec::GaussianExpdecay => SoiModel::gaussian_expdecay(n),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SoiSpec::SumExponentials => "sum_exponentials",
            SoiSpec::GaussianExpdecay => "gaussian_expdecay",
        }
    }
}

/// Matrix families compared in the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MatrixLabel {
    /// Rank-one low-SNR optimum.
    #[serde(rename = "OK")]
    Ok,
    /// Unconstrained alternating design.
    #[serde(rename = "UC")]
    Uc,
    /// Masked-Fourier alternating design.
    #[serde(rename = "MF")]
    Mf,
    /// i.i.d. Gaussian, redrawn every trial.
    #[serde(rename = "RG")]
    Rg,
    /// Coded diffraction with octanary masks, redrawn every trial.
    #[serde(rename = "CD")]
    Cd,
    /// Unconstrained design with `V = I`.
    #[serde(rename = "UC_I")]
    UcI,
    /// Masked-Fourier design with `V = I`.
    #[serde(rename = "MF_I")]
    MfI,
}

impl MatrixLabel {
    pub const ALL: [MatrixLabel; 7] = [
        MatrixLabel::Ok,
        MatrixLabel::Uc,
        MatrixLabel::Mf,
        MatrixLabel::Rg,
        MatrixLabel::Cd,
        MatrixLabel::UcI,
        MatrixLabel::MfI,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MatrixLabel::Ok => "OK",
            MatrixLabel::Uc => "UC",
            MatrixLabel::Mf => "MF",
            MatrixLabel::Rg => "RG",
            MatrixLabel::Cd => "CD",
            MatrixLabel::UcI => "UC_I",
            MatrixLabel::MfI => "MF_I",
        }
    }

    /// Random families are redrawn per trial.
    pub fn is_random(self) -> bool {
        matches!(self, MatrixLabel::Rg | MatrixLabel::Cd)
    }

    /// Families that need `m` to be a multiple of `n`.
    pub fn is_masked(self) -> bool {
        matches!(self, MatrixLabel::Mf | MatrixLabel::MfI | MatrixLabel::Cd)
    }
}

impl fmt::Display for MatrixLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MatrixLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MatrixLabel::ALL
            .into_iter()
            .find(|l| l.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown matrix label {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Sweep {
    /// SNR values in dB at a fixed number of observations.
    SnrDb { values: Vec<f64>, m: usize },
    /// Ratios `m/n` at a fixed SNR.
    ComplexityRatio { values: Vec<usize>, snr_db: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub soi: SoiSpec,
    pub n: usize,
    pub sweep: Sweep,
    pub matrices: Vec<MatrixLabel>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_recovery")]
    pub recovery: Algorithm,
    #[serde(default = "default_covariance_samples")]
    pub covariance_samples: usize,
    #[serde(default)]
    pub design: DesignOptions,
    #[serde(default)]
    pub taf: TafOptions,
    #[serde(default)]
    pub altmin: AltminOptions,
}

fn default_trials() -> usize {
    200
}

fn default_recovery() -> Algorithm {
    Algorithm::Taf
}

fn default_covariance_samples() -> usize {
    200_000
}

impl ExperimentConfig {
    /// `n = 10`, `m = 6n`, SNR from −30 to 30 dB in 2 dB steps, all five families.
    pub fn snr_default(soi: SoiSpec) -> Self {
        ExperimentConfig {
            soi,
            n: 10,
            sweep: Sweep::SnrDb {
                values: (0..=30).map(|k| -30.0 + 2.0 * k as f64).collect(),
                m: 60,
            },
            matrices: vec![
                MatrixLabel::Ok,
                MatrixLabel::Uc,
                MatrixLabel::Mf,
                MatrixLabel::Rg,
                MatrixLabel::Cd,
            ],
            trials: default_trials(),
            master_seed: 0,
            recovery: Algorithm::Taf,
            covariance_samples: default_covariance_samples(),
            design: DesignOptions::default(),
            taf: TafOptions::default(),
            altmin: AltminOptions::default(),
        }
    }

    /// `n = 10`, `m/n` from 2 to 10 at 10 dB, designed and random families.
    pub fn complexity_default(soi: SoiSpec) -> Self {
        ExperimentConfig {
            sweep: Sweep::ComplexityRatio { values: (2..=10).collect(), snr_db: 10.0 },
            matrices: vec![MatrixLabel::Uc, MatrixLabel::Mf, MatrixLabel::Rg, MatrixLabel::Cd],
            ..Self::snr_default(soi)
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: ExperimentConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// `(m, snr_db)` for every cell of the sweep.
    pub fn cells(&self) -> Vec<(usize, f64)> {
        match &self.sweep {
            Sweep::SnrDb { values, m } => values.iter().map(|&s| (*m, s)).collect(),
            Sweep::ComplexityRatio { values, snr_db } => {
                values.iter().map(|&r| (r * self.n, *snr_db)).collect()
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.n == 0 {
            return bad("n must be positive".into());
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.matrices.is_empty() {
            return bad("no matrix labels given".into());
        }
        match &self.sweep {
            Sweep::SnrDb { values, .. } if values.iter().any(|v| !v.is_finite()) => {
                return bad("SNR values must be finite".into())
            }
            Sweep::ComplexityRatio { snr_db, .. } if !snr_db.is_finite() => {
                return bad("SNR must be finite".into())
            }
            Sweep::SnrDb { values, .. } if values.is_empty() => return bad("empty SNR list".into()),
            Sweep::ComplexityRatio { values, .. } if values.is_empty() => {
                return bad("empty ratio list".into())
            }
            _ => {}
        }
        for (m, _) in self.cells() {
            if m < self.n || m > self.n * self.n {
                return bad(format!("need n <= m <= n^2, got m={m} n={}", self.n));
            }
            if m % self.n != 0 && self.matrices.iter().any(|l| l.is_masked()) {
                return bad(format!("masked families need m to be a multiple of n, got m={m}"));
            }
        }
        if self.soi == SoiSpec::SumExponentials && self.covariance_samples < 10 * self.n * self.n {
            return bad(format!(
                "covariance_samples must be at least {}",
                10 * self.n * self.n
            ));
        }
        Ok(())
    }
}
