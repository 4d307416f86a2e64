use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::{
    design_from_waterfill, design_objective, snr_db_to_sigma_sq, waterfill_from_eigen, Constraint,
    DesignBudget, DesignOptions,
};
use crate::error::{Error, Result};
use crate::harness::config::{ExperimentConfig, MatrixLabel, Sweep};
use crate::harness::sweep::{prepare, Prepared};

/// `‖V·Ã_sub − S_m(A ⊗ A*)‖` for one family at one SNR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrobeniusRow {
    pub snr_db: f64,
    pub label: MatrixLabel,
    /// Objective at the final projection, before norm finalization.
    pub objective: f64,
    /// Objective of the finalized matrix (`‖A‖² = m`) with the same `V`.
    pub objective_normalized: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FrobeniusTable {
    pub m: usize,
    pub n: usize,
    pub rows: Vec<FrobeniusRow>,
}

impl FrobeniusTable {
    pub fn objective(&self, label: MatrixLabel, snr_db: f64) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.label == label && r.snr_db == snr_db)
            .map(|r| r.objective)
    }
}

const TABLE_LABELS: [MatrixLabel; 4] = [
    MatrixLabel::Uc,
    MatrixLabel::UcI,
    MatrixLabel::Mf,
    MatrixLabel::MfI,
];

fn row(prep: &Prepared, label: MatrixLabel, budget: &DesignBudget, opts: &DesignOptions, snr_db: f64) -> Result<FrobeniusRow> {
    let constraint = match label {
        MatrixLabel::Uc | MatrixLabel::UcI => Constraint::Unconstrained,
        _ => Constraint::MaskedFourier { b: budget.m / budget.n },
    };
    let opts = match label {
        MatrixLabel::UcI | MatrixLabel::MfI => DesignOptions {
            max_iters: 0,
            multi_start: 1,
            ..*opts
        },
        _ => *opts,
    };
    let wf = waterfill_from_eigen(&prep.lifted_eigen, budget)?;
    let out = design_from_waterfill(&wf, budget, constraint, &opts)?;
    Ok(FrobeniusRow {
        snr_db,
        label,
        objective: out.final_objective(),
        objective_normalized: design_objective(&out.matrix, &out.lifted_target, &out.alignment),
        iterations: out.iterations,
    })
}

/// Frobenius objective of the unconstrained and masked-Fourier designs, with
/// optimized and identity alignment, at each SNR of the sweep.
pub fn run_frobenius_comparison(config: &ExperimentConfig) -> Result<FrobeniusTable> {
    let Sweep::SnrDb { values, m } = &config.sweep else {
        return Err(Error::InvalidArgument("Frobenius comparison needs an SNR sweep".into()));
    };
    let mut config = config.clone();
    config.matrices = TABLE_LABELS.to_vec();
    config.validate()?;
    let prep = prepare(&config)?;
    let jobs: Vec<(f64, MatrixLabel)> = values
        .iter()
        .flat_map(|&s| TABLE_LABELS.iter().map(move |&l| (s, l)))
        .collect();
    let rows = jobs
        .par_iter()
        .map(|&(snr, label)| {
            let budget = DesignBudget::unit_rows(*m, config.n, snr_db_to_sigma_sq(snr))?;
            row(&prep, label, &budget, &config.design, snr)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FrobeniusTable {
        m: *m,
        n: config.n,
        rows,
    })
}
