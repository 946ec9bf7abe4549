//! Hole inference from demonstrations, and the training loops around it.

mod config;
mod sampler;
mod train;

use thiserror::Error;

pub use config::{ConfigError, RewardModelConfig, RolloutConfig, TrainConfig};
pub use sampler::{
    project, score_function_grad, HoleSample, HoleSampler, SamplerConfig, SamplerGrad,
    SamplerOptimizer, SamplerStep, SoftLoss,
};
pub use train::{
    algorithm1, collect, train_ppo, IterationReport, ReturnTracker, RewardSource, Rollouts,
    TrainOutcome, CSV_HEADER,
};

use crate::policy::PolicyError;
use crate::srm::{EvalError, HoleAssignment, PartialRun, ProductError, Srm};

#[derive(Debug, Error)]
pub enum InferenceError {
    #[error("expected {expected} values, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite gradient in the {0} update")]
    NonFiniteGradient(&'static str),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("no expert demonstrations")]
    NoDemonstrations,
    #[error("constraint: {0}")]
    Constraint(#[from] crate::constraints::NonAffineAtom),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Product(#[from] ProductError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Grid(#[from] crate::gridworld::GridError),
}

/// A trajectory evaluated once with the holes left symbolic, together with
/// the surrogate reward `f` at each of its steps.
#[derive(Clone, Debug)]
pub struct PreparedTrajectory {
    pub partial: PartialRun,
    pub f: Vec<f64>,
}

/// Soft loss of every sample: half the mean over agent trajectories plus
/// half the mean over expert trajectories of
/// `Σ_t ½ (f_t - (l_t - b))²`, where `l` are the machine's rewards under the
/// sample. A pool that is empty gets no weight.
pub fn j_soft_value(
    srm: &Srm,
    samples: &[HoleAssignment],
    agent: &[PreparedTrajectory],
    expert: &[PreparedTrajectory],
    offset: f64,
) -> Result<Vec<SoftLoss>, InferenceError> {
    let pools: Vec<&[PreparedTrajectory]> = [agent, expert]
        .into_iter()
        .filter(|p| !p.is_empty())
        .collect();
    let w_pool = 1.0 / pools.len().max(1) as f64;
    let mut out = Vec::with_capacity(samples.len());
    for h in samples {
        if h.len() != srm.n_holes() {
            return Err(InferenceError::DimensionMismatch {
                expected: srm.n_holes(),
                got: h.len(),
            });
        }
        let mut loss = SoftLoss {
            value: 0.0,
            d_offset: 0.0,
        };
        for pool in &pools {
            let w = w_pool / pool.len() as f64;
            for tr in pool.iter() {
                let l = tr.partial.rewards(srm, h)?;
                if l.len() != tr.f.len() {
                    return Err(InferenceError::DimensionMismatch {
                        expected: l.len(),
                        got: tr.f.len(),
                    });
                }
                for (f, l) in tr.f.iter().zip(&l) {
                    let r = f - (l - offset);
                    loss.value += w * 0.5 * r * r;
                    loss.d_offset += w * r;
                }
            }
        }
        out.push(loss);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::srm::{partial_evaluate, Trajectory};

    fn prepared(srm: &Srm, events: Vec<Vec<&str>>, f: Vec<f64>) -> PreparedTrajectory {
        let tau = Trajectory::from_events(events);
        PreparedTrajectory {
            partial: partial_evaluate(srm, &tau).unwrap(),
            f,
        }
    }

    #[test]
    fn exact_match_has_zero_loss_and_closer_is_smaller() {
        let srm = crate::dsl::parse("srm S { holes ?a; state A init; A -> A : x // ?a; }").unwrap();
        let tr = prepared(&srm, vec![vec!["x"], vec![]], vec![-0.5, -1.0]);
        // b = 1: targets l - 1 are (a - 1, -1).
        let hs = [
            HoleAssignment::new(vec![0.5]),
            HoleAssignment::new(vec![0.7]),
            HoleAssignment::new(vec![1.5]),
        ];
        let g = j_soft_value(&srm, &hs, &[tr], &[], 1.0).unwrap();
        assert_eq!(g[0].value, 0.0);
        assert!(g[1].value < g[2].value);
        assert!(j_soft_value(&srm, &[HoleAssignment::new(vec![])], &[], &[], 0.0).is_err());
    }
}
