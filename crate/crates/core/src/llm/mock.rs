use std::fmt::Write as _;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::env::format_power;

use super::{AgentRng, IclExample, LlmError, MockParams, ProposalRequest, Proposer, ProposerKind};

/// Seeded stand-in for a language model.
///
/// Each output line is one of three behaviours: a patterned vector with all
/// coordinates equal (hallucination), a uniform draw (exploration), or a
/// Gaussian perturbation of one of the three best examples (exploitation).
#[derive(Debug, Clone, Copy)]
pub struct MockProposer {
    params: MockParams,
}

impl MockProposer {
    pub fn new(params: MockParams) -> Self {
        Self { params }
    }

    pub fn params(&self) -> &MockParams {
        &self.params
    }
}

impl Proposer for MockProposer {
    fn propose(&self, request: &ProposalRequest<'_>, rng: &mut AgentRng) -> Result<String, LlmError> {
        mock_propose(
            &self.params,
            rng,
            request.examples,
            request.n_actions,
            request.n_cells,
            request.p_max,
        )
    }

    fn kind(&self) -> ProposerKind {
        ProposerKind::Mock
    }
}

/// "Repeating decimals and integers": either a whole number or `d/9` of the
/// budget, which prints as a run of one digit for `p_max = 10`.
fn patterned_value(rng: &mut AgentRng, p_max: f64) -> f64 {
    if rng.random_bool(0.5) {
        let top = p_max.floor().max(0.0) as u64;
        rng.random_range(0..=top) as f64
    } else {
        let d = rng.random_range(1..=8u32) as f64;
        p_max * d / 9.0
    }
}

pub fn mock_propose(
    params: &MockParams,
    rng: &mut AgentRng,
    examples: &[IclExample],
    n_actions: usize,
    n_cells: usize,
    p_max: f64,
) -> Result<String, LlmError> {
    if examples.is_empty() {
        return Err(LlmError::InvalidArgument("mock proposer needs at least one example".into()));
    }
    params.validate()?;
    let mut ranked: Vec<&IclExample> = examples.iter().collect();
    ranked.sort_by(|a, b| b.reward.total_cmp(&a.reward));
    ranked.truncate(3);
    let noise = Normal::new(0.0, params.exploit_sigma * p_max)
        .map_err(|e| LlmError::InvalidArgument(format!("exploit noise: {e}")))?;

    let mut out = String::new();
    let mut values = vec![0.0; n_cells];
    for line in 0..n_actions {
        if rng.random_bool(params.halluc_prob) {
            let v = patterned_value(rng, p_max).min(p_max);
            values.iter_mut().for_each(|x| *x = v);
        } else if rng.random_bool(params.explore_prob) {
            values.iter_mut().for_each(|x| *x = rng.random::<f64>() * p_max);
        } else {
            let base = ranked[rng.random_range(0..ranked.len())];
            for (k, x) in values.iter_mut().enumerate() {
                let centre = base.action.powers().get(k).copied().unwrap_or(0.0);
                *x = (centre + noise.sample(rng)).clamp(0.0, p_max);
            }
        }
        if line > 0 {
            out.push('\n');
        }
        let rendered: Vec<String> = values.iter().map(|v| format_power(*v)).collect();
        let _ = write!(out, "power: [{}]", rendered.join(", "));
    }
    Ok(out)
}
