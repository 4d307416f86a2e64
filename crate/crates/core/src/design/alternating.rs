use serde::{Deserialize, Serialize};

use crate::design::krp::{assemble_masked_fourier, masked_fourier_masks, nearest_krp_rows, MaskSet};
use crate::design::procrustes::procrustes_align;
use crate::design::waterfill::{waterfill_lifted, WaterfillResult};
use crate::design::DesignBudget;
use crate::error::{Error, Result};
use crate::kron::{row_wise_krp, LiftedMatrix};
use crate::linalg::{c64, frob, frob_sq, random_unitary, CMatrix};
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Constraint {
    Unconstrained,
    MaskedFourier { b: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DesignOptions {
    pub max_iters: usize,
    /// Stop once the relative objective decrease over a full iteration drops below this.
    pub tol: f64,
    /// Number of starts; start 0 uses `V₀ = I`, later starts a random unitary.
    pub multi_start: usize,
    pub seed: u64,
}

impl Default for DesignOptions {
    fn default() -> Self {
        DesignOptions {
            max_iters: 200,
            tol: 1e-8,
            multi_start: 1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxIters,
}

#[derive(Debug, Clone)]
pub struct DesignOutput {
    /// Final matrix with `‖A‖² = P`.
    pub matrix: CMatrix,
    /// Matrix from the last projection step, before norm finalization.
    pub unnormalized: CMatrix,
    pub alignment: CMatrix,
    pub lifted_target: LiftedMatrix,
    /// `‖V·Ã_sub − row_wise_krp(Â)‖` after every half-iteration.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub termination: Termination,
    /// Finalized masks for masked-Fourier designs.
    pub masks: Option<MaskSet>,
    pub start_index: usize,
}

impl DesignOutput {
    pub fn final_objective(&self) -> f64 {
        *self.objective_trace.last().expect("trace is never empty")
    }
}

/// `‖V·target − row_wise_krp(a)‖`.
pub fn design_objective(a: &CMatrix, target: &LiftedMatrix, v: &CMatrix) -> f64 {
    frob(&(v * target.entries() - row_wise_krp(a).into_entries()))
}

/// `(√P/‖Â‖)·Â`.
pub fn finalize_norm(a_hat: &CMatrix, p: f64) -> Result<CMatrix> {
    if !(p.is_finite() && p > 0.0) {
        return Err(Error::InvalidBudget(format!("P must be positive, got {p}")));
    }
    let norm = frob(a_hat);
    if !norm.is_finite() {
        return Err(Error::NonFinite("design matrix"));
    }
    if norm == 0.0 {
        return Err(Error::DesignCollapsed);
    }
    Ok(a_hat * c64(p.sqrt() / norm, 0.0))
}

fn project(
    target: &LiftedMatrix,
    v: &CMatrix,
    constraint: Constraint,
) -> Result<(CMatrix, Option<MaskSet>)> {
    match constraint {
        Constraint::Unconstrained => Ok((nearest_krp_rows(target, v)?, None)),
        Constraint::MaskedFourier { b } => {
            let masks = masked_fourier_masks(target, v, b, target.n())?;
            Ok((assemble_masked_fourier(&masks), Some(masks)))
        }
    }
}

/// Alternate projection and Procrustes alignment against a fixed lifted
/// target, starting from `v0`. The result is finalized to `‖A‖² = p`.
pub fn align_to_target(
    target: &LiftedMatrix,
    p: f64,
    constraint: Constraint,
    opts: &DesignOptions,
    v0: CMatrix,
) -> Result<DesignOutput> {
    let mut v = v0;
    let (mut a_hat, mut masks) = project(target, &v, constraint)?;
    let mut trace = vec![design_objective(&a_hat, target, &v)];
    let mut termination = Termination::MaxIters;
    let mut iterations = 0;
    let mut last_full = trace[0];
    for it in 1..=opts.max_iters {
        v = procrustes_align(&a_hat, target)?;
        trace.push(design_objective(&a_hat, target, &v));
        let (next, next_masks) = project(target, &v, constraint)?;
        a_hat = next;
        masks = next_masks;
        let current = design_objective(&a_hat, target, &v);
        trace.push(current);
        iterations = it;
        if last_full == 0.0 || (last_full - current) / last_full < opts.tol {
            termination = Termination::Converged;
            break;
        }
        last_full = current;
    }
    let matrix = finalize_norm(&a_hat, p)?;
    let masks = masks.map(|set| {
        let s = c64((p / frob_sq(&a_hat)).sqrt(), 0.0);
        MaskSet {
            masks: set.masks.into_iter().map(|g| g * s).collect(),
            n: set.n,
        }
    });
    Ok(DesignOutput {
        matrix,
        unnormalized: a_hat,
        alignment: v,
        lifted_target: target.clone(),
        objective_trace: trace,
        iterations,
        termination,
        masks,
        start_index: 0,
    })
}

/// Waterfill `c_x`, then run the alternating design from each start and keep
/// the lowest final objective (earliest start on ties).
pub fn alternating_design(
    c_x: &CMatrix,
    budget: &DesignBudget,
    constraint: Constraint,
    opts: &DesignOptions,
) -> Result<DesignOutput> {
    let wf: WaterfillResult = waterfill_lifted(c_x, budget)?;
    design_from_waterfill(&wf, budget, constraint, opts)
}

pub fn design_from_waterfill(
    wf: &WaterfillResult,
    budget: &DesignBudget,
    constraint: Constraint,
    opts: &DesignOptions,
) -> Result<DesignOutput> {
    if let Constraint::MaskedFourier { b } = constraint {
        if b * budget.n != budget.m {
            return Err(Error::InvalidArgument(format!(
                "masked Fourier needs m = b*n, got m={} b={b} n={}",
                budget.m, budget.n
            )));
        }
    }
    let m = budget.m;
    let mut best: Option<DesignOutput> = None;
    for start in 0..opts.multi_start.max(1) {
        let v0 = if start == 0 {
            CMatrix::identity(m, m)
        } else {
            random_unitary(&mut RngStream::new(opts.seed, start as u64).generator(), m)
        };
        let mut out = align_to_target(&wf.lifted_target, budget.p, constraint, opts, v0)?;
        out.start_index = start;
        let better = best
            .as_ref()
            .is_none_or(|b| out.final_objective() < b.final_objective());
        if better {
            best = Some(out);
        }
    }
    Ok(best.expect("at least one start"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{random_complex_matrix, random_psd};
    use crate::soi::gaussian_covariance_expdecay;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn finalize_cases() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let a = finalize_norm(&random_complex_matrix(&mut rng, 4, 2, 1.0), 4.0).unwrap();
        assert!((frob_sq(&a) - 4.0).abs() < 1e-12 * 4.0);
        assert!(frob(&(finalize_norm(&a, 4.0).unwrap() - &a)) < 1e-14);
        let doubled = &a * c64(2.0, 0.0);
        assert!(frob(&(finalize_norm(&doubled, 4.0).unwrap() - &a)) < 1e-14);
        assert_eq!(finalize_norm(&CMatrix::zeros(2, 2), 1.0), Err(Error::DesignCollapsed));
    }

    #[test]
    fn monotone_traces_both_modes() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        for _ in 0..10 {
            let c_x = random_psd(&mut rng, 16, 16);
            let budget = DesignBudget::unit_rows(8, 4, 0.1).unwrap();
            for constraint in [Constraint::Unconstrained, Constraint::MaskedFourier { b: 2 }] {
                let out = alternating_design(&c_x, &budget, constraint, &DesignOptions::default()).unwrap();
                assert!(out.objective_trace.windows(2).all(|w| w[1] <= w[0] + 1e-9));
                assert!((frob_sq(&out.matrix) - 8.0).abs() < 1e-9 * 8.0);
            }
        }
    }

    #[test]
    fn zero_iterations_is_identity_alignment() {
        let c_x = crate::soi::lifted_covariance_kron_symmetric(&gaussian_covariance_expdecay(3));
        let budget = DesignBudget::unit_rows(6, 3, 1.0).unwrap();
        let opts = DesignOptions {
            max_iters: 0,
            ..Default::default()
        };
        let out = alternating_design(&c_x, &budget, Constraint::Unconstrained, &opts).unwrap();
        assert_eq!(out.alignment, CMatrix::identity(6, 6));
        assert_eq!(out.objective_trace.len(), 1);
        let direct = nearest_krp_rows(&out.lifted_target, &CMatrix::identity(6, 6)).unwrap();
        assert_eq!(out.matrix, finalize_norm(&direct, 6.0).unwrap());
    }

    #[test]
    fn masked_fourier_output_has_structure() {
        let c_x = crate::soi::lifted_covariance_kron_symmetric(&gaussian_covariance_expdecay(3));
        let budget = DesignBudget::unit_rows(6, 3, 0.5).unwrap();
        let out = alternating_design(&c_x, &budget, Constraint::MaskedFourier { b: 2 }, &DesignOptions::default())
            .unwrap();
        assert!(crate::design::is_masked_fourier(&out.matrix, 3, 1e-10));
        let rebuilt = assemble_masked_fourier(out.masks.as_ref().unwrap());
        assert!(frob(&(rebuilt - &out.matrix)) < 1e-10);
        let bad = DesignBudget::unit_rows(7, 3, 0.5).unwrap();
        assert!(alternating_design(&c_x, &bad, Constraint::MaskedFourier { b: 2 }, &DesignOptions::default()).is_err());
    }

    #[test]
    fn multi_start_not_worse() {
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        let c_x = random_psd(&mut rng, 9, 9);
        let budget = DesignBudget::unit_rows(5, 3, 0.2).unwrap();
        let one = alternating_design(&c_x, &budget, Constraint::Unconstrained, &DesignOptions::default()).unwrap();
        let opts = DesignOptions {
            multi_start: 4,
            seed: 3,
            ..Default::default()
        };
        let many = alternating_design(&c_x, &budget, Constraint::Unconstrained, &opts).unwrap();
        assert!(many.final_objective() <= one.final_objective());
    }
}
