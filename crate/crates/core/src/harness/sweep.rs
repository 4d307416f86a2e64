use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::{
    coded_diffraction_matrix, design_from_waterfill, low_snr_optimal_matrix,
    random_gaussian_matrix, snr_db_to_sigma_sq, waterfill_from_eigen, Constraint, DesignBudget,
    DesignOptions,
};
use crate::error::{Error, Result};
use crate::harness::config::{ExperimentConfig, MatrixLabel, SoiSpec, Sweep};
use crate::linalg::{hermitian_eigen, CMatrix, HermitianEigen};
use crate::retrieval::{altmin_recover, forward_observe, phase_aligned_error, taf_recover, Algorithm};
use crate::rng::{stream_key, RngStream};
use crate::soi::{empirical_lifted_covariance, CovariancePair, SoiModel, SoiSampler};

/// SOI model, its covariances and the eigendecomposition of `C_X`, shared by
/// every cell of a sweep.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub soi: SoiSpec,
    pub model: SoiModel,
    pub sampler: SoiSampler,
    pub pair: CovariancePair,
    pub lifted_eigen: HermitianEigen,
}

pub fn prepare(config: &ExperimentConfig) -> Result<Prepared> {
    let model = config.soi.model(config.n);
    let pair = match model.analytic_covariance() {
        Some(c_u) => CovariancePair::analytic(c_u.clone())?,
        None => {
            let key = stream_key(&[b"covariance", config.soi.name().as_bytes(), &config.n.to_le_bytes()]);
            empirical_lifted_covariance(
                &model,
                config.covariance_samples,
                RngStream::new(config.master_seed, key),
            )?
        }
    };
    let lifted_eigen = hermitian_eigen(&pair.c_x)?;
    Ok(Prepared {
        soi: config.soi,
        sampler: model.sampler()?,
        model,
        pair,
        lifted_eigen,
    })
}

/// Build one matrix of the given family with `‖A‖² = m` (in expectation for
/// the random families).
pub fn build_matrix<R: rand::Rng + ?Sized>(
    prep: &Prepared,
    label: MatrixLabel,
    budget: &DesignBudget,
    opts: &DesignOptions,
    rng: &mut R,
) -> Result<CMatrix> {
    let n = budget.n;
    let masked = || -> Result<usize> {
        if budget.m % n != 0 {
            return Err(Error::InvalidArgument(format!(
                "{label} needs m to be a multiple of n, got m={} n={n}",
                budget.m
            )));
        }
        Ok(budget.m / n)
    };
    let identity_only = DesignOptions {
        max_iters: 0,
        multi_start: 1,
        ..*opts
    };
    let designed = |constraint: Constraint, opts: &DesignOptions| -> Result<CMatrix> {
        let wf = waterfill_from_eigen(&prep.lifted_eigen, budget)?;
        Ok(design_from_waterfill(&wf, budget, constraint, opts)?.matrix)
    };
    match label {
        MatrixLabel::Ok => low_snr_optimal_matrix(&prep.pair.c_u, budget, None),
        MatrixLabel::Uc => designed(Constraint::Unconstrained, opts),
        MatrixLabel::UcI => designed(Constraint::Unconstrained, &identity_only),
        MatrixLabel::Mf => designed(Constraint::MaskedFourier { b: masked()? }, opts),
        MatrixLabel::MfI => designed(Constraint::MaskedFourier { b: masked()? }, &identity_only),
        MatrixLabel::Rg => Ok(random_gaussian_matrix(budget, rng)),
        MatrixLabel::Cd => Ok(coded_diffraction_matrix(masked()?, n, rng)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub label: MatrixLabel,
    pub snr_db: f64,
    pub m: usize,
    pub trial_index: usize,
    pub eps: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub label: MatrixLabel,
    pub snr_db: f64,
    pub m: usize,
    pub n: usize,
    pub trials: usize,
    pub mean_eps: f64,
    pub median_eps: f64,
    pub stderr: f64,
}

/// A (label, cell) whose matrix could not be built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub label: MatrixLabel,
    pub snr_db: f64,
    pub m: usize,
    pub message: String,
    pub collapsed: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ResultTable {
    pub aggregates: Vec<Aggregate>,
    pub records: Vec<TrialRecord>,
    pub failures: Vec<CellFailure>,
}

impl ResultTable {
    pub fn aggregate(&self, label: MatrixLabel, m: usize, snr_db: f64) -> Option<&Aggregate> {
        self.aggregates
            .iter()
            .find(|a| a.label == label && a.m == m && a.snr_db == snr_db)
    }

    /// Aggregates of one family in sweep order.
    pub fn series(&self, label: MatrixLabel) -> Vec<&Aggregate> {
        self.aggregates.iter().filter(|a| a.label == label).collect()
    }
}

fn trial_stream(config: &ExperimentConfig, label: MatrixLabel, m: usize, snr_db: f64, trial: usize) -> RngStream {
    let key = stream_key(&[
        label.as_str().as_bytes(),
        &(m as u64).to_le_bytes(),
        &snr_db.to_bits().to_le_bytes(),
        &(trial as u64).to_le_bytes(),
    ]);
    RngStream::new(config.master_seed, key)
}

fn summarize(label: MatrixLabel, m: usize, n: usize, snr_db: f64, eps: &[f64]) -> Aggregate {
    let count = eps.len();
    let mean = eps.iter().sum::<f64>() / count as f64;
    let mut sorted = eps.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = if count % 2 == 1 {
        sorted[count / 2]
    } else {
        0.5 * (sorted[count / 2 - 1] + sorted[count / 2])
    };
    let stderr = if count > 1 {
        let var = eps.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (count - 1) as f64;
        (var / count as f64).sqrt()
    } else {
        0.0
    };
    Aggregate {
        label,
        snr_db,
        m,
        n,
        trials: count,
        mean_eps: mean,
        median_eps: median,
        stderr,
    }
}

/// Run every (family, cell, trial) of the configured sweep.
pub fn run_sweep(config: &ExperimentConfig, prep: &Prepared) -> Result<ResultTable> {
    config.validate()?;
    let n = config.n;
    let cells = config.cells();
    let labels = &config.matrices;
    // designed matrices once per (family, cell)
    let design_jobs: Vec<(usize, usize)> = (0..labels.len())
        .flat_map(|li| (0..cells.len()).map(move |ci| (li, ci)))
        .filter(|&(li, _)| !labels[li].is_random())
        .collect();
    let designed: Vec<((usize, usize), Result<CMatrix>)> = design_jobs
        .par_iter()
        .map(|&(li, ci)| {
            let (m, snr) = cells[ci];
            let result = DesignBudget::unit_rows(m, n, snr_db_to_sigma_sq(snr)).and_then(|budget| {
                let mut unused = RngStream::new(config.master_seed, 0).generator();
                build_matrix(prep, labels[li], &budget, &config.design, &mut unused)
            });
            ((li, ci), result)
        })
        .collect();
    let mut cache: Vec<Vec<Option<CMatrix>>> = vec![vec![None; cells.len()]; labels.len()];
    let mut failed = vec![vec![false; cells.len()]; labels.len()];
    let mut failures = vec![];
    for ((li, ci), result) in designed {
        match result {
            Ok(a) => cache[li][ci] = Some(a),
            Err(e) => {
                failed[li][ci] = true;
                failures.push(CellFailure {
                    label: labels[li],
                    snr_db: cells[ci].1,
                    m: cells[ci].0,
                    collapsed: matches!(e, Error::DesignCollapsed),
                    message: e.to_string(),
                });
            }
        }
    }
    let tasks: Vec<(usize, usize, usize)> = (0..labels.len())
        .flat_map(|li| (0..cells.len()).map(move |ci| (li, ci)))
        .filter(|&(li, ci)| !failed[li][ci])
        .flat_map(|(li, ci)| (0..config.trials).map(move |t| (li, ci, t)))
        .collect();
    let records: Vec<Result<TrialRecord>> = tasks
        .par_iter()
        .map(|&(li, ci, t)| {
            let label = labels[li];
            let (m, snr) = cells[ci];
            let sigma_sq = snr_db_to_sigma_sq(snr);
            let mut rng = trial_stream(config, label, m, snr, t).generator();
            let random;
            let a = match &cache[li][ci] {
                Some(a) => a,
                None => {
                    let budget = DesignBudget::unit_rows(m, n, sigma_sq)?;
                    random = build_matrix(prep, label, &budget, &config.design, &mut rng)?;
                    &random
                }
            };
            let u = prep.sampler.sample(&mut rng);
            let obs = forward_observe(a, &u, sigma_sq, label.as_str(), &mut rng)?;
            let result = match config.recovery {
                Algorithm::Taf => taf_recover(a, &obs, &config.taf)?,
                Algorithm::Altmin => altmin_recover(a, &obs, &config.altmin)?,
            };
            Ok(TrialRecord {
                label,
                snr_db: snr,
                m,
                trial_index: t,
                eps: phase_aligned_error(&u, &result.estimate).unwrap_or(f64::NAN),
                iterations: result.iterations,
            })
        })
        .collect();
    let records: Vec<TrialRecord> = records.into_iter().collect::<Result<_>>()?;
    let mut aggregates = vec![];
    for chunk in records.chunk_by(|a, b| a.label == b.label && a.m == b.m && a.snr_db == b.snr_db) {
        let eps: Vec<f64> = chunk.iter().map(|r| r.eps).collect();
        aggregates.push(summarize(chunk[0].label, chunk[0].m, n, chunk[0].snr_db, &eps));
    }
    Ok(ResultTable {
        aggregates,
        records,
        failures,
    })
}

pub fn run_snr_sweep(config: &ExperimentConfig) -> Result<ResultTable> {
    if !matches!(config.sweep, Sweep::SnrDb { .. }) {
        return Err(Error::InvalidArgument("config does not describe an SNR sweep".into()));
    }
    config.validate()?;
    run_sweep(config, &prepare(config)?)
}

pub fn run_complexity_sweep(config: &ExperimentConfig) -> Result<ResultTable> {
    if !matches!(config.sweep, Sweep::ComplexityRatio { .. }) {
        return Err(Error::InvalidArgument(
            "config does not describe a sample-complexity sweep".into(),
        ));
    }
    config.validate()?;
    run_sweep(config, &prepare(config)?)
}
