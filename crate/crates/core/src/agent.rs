//! A single language-model optimizer: elite buffer, ICL selection, and the
//! propose / evaluate / store step.

use std::collections::HashSet;
use std::cmp::Ordering;

use rand::SeedableRng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{self, ChannelRealization, EnvError, Objective, PowerAction};
use crate::llm::{self, AgentRng, IclExample, LlmError, Origin, ProposalRequest, Proposer};

pub const DEFAULT_N_INIT: usize = 5;
pub const DEFAULT_BUFFER_CAPACITY: usize = 20;
pub const DEFAULT_ICL_K: usize = 10;
pub const DEFAULT_ACTIONS_PER_STEP: usize = 5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AgentError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("agent {agent_id}, iteration {iteration}: {source}")]
    Proposer {
        agent_id: usize,
        iteration: usize,
        #[source]
        source: LlmError,
    },
    #[error(transparent)]
    Env(#[from] EnvError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionRewardPair {
    pub action: PowerAction,
    pub reward: f64,
    pub iteration_found: usize,
    pub agent_id: usize,
    pub origin: Origin,
}

impl ActionRewardPair {
    pub fn key(&self) -> String {
        self.action.canonical_key()
    }

    fn to_example(&self) -> IclExample {
        IclExample {
            action: self.action.clone(),
            reward: self.reward,
            origin: self.origin,
        }
    }
}

/// Total order used by every buffer: reward descending, then earlier
/// discovery, then lower agent id, then canonical text.
fn rank(a: &ActionRewardPair, ka: &str, b: &ActionRewardPair, kb: &str) -> Ordering {
    b.reward
        .total_cmp(&a.reward)
        .then(a.iteration_found.cmp(&b.iteration_found))
        .then(a.agent_id.cmp(&b.agent_id))
        .then_with(|| ka.cmp(kb))
}

/// Capacity-bounded elite archive, sorted best first, one pair per
/// canonical action text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EliteBuffer {
    capacity: usize,
    pairs: Vec<ActionRewardPair>,
}

impl EliteBuffer {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            pairs: Vec::with_capacity(capacity),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn pairs(&self) -> &[ActionRewardPair] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.pairs.len() >= self.capacity
    }

    pub fn top(&self) -> Option<&ActionRewardPair> {
        self.pairs.first()
    }

    pub fn top_reward(&self) -> Option<f64> {
        self.top().map(|p| p.reward)
    }

    pub fn min_reward(&self) -> Option<f64> {
        self.pairs.last().map(|p| p.reward)
    }

    /// Merges `new_pairs`, keeping the better of any two pairs with the same
    /// action text, and truncates to capacity. Returns every pair that did
    /// not survive, in rank order.
    pub fn insert_pairs<I>(&mut self, new_pairs: I) -> Vec<ActionRewardPair>
    where
        I: IntoIterator<Item = ActionRewardPair>,
    {
        let mut all: Vec<(String, ActionRewardPair)> = self
            .pairs
            .drain(..)
            .chain(new_pairs)
            .map(|p| (p.key(), p))
            .collect();
        // stable: on a full tie the pair already stored wins
        all.sort_by(|(ka, a), (kb, b)| rank(a, ka, b, kb));

        let mut seen = HashSet::with_capacity(all.len());
        let mut displaced = Vec::new();
        for (key, pair) in all {
            if self.pairs.len() < self.capacity && seen.insert(key) {
                self.pairs.push(pair);
            } else {
                displaced.push(pair);
            }
        }
        displaced
    }

    /// Checks the sorted / capacity / dedup invariants.
    pub fn check_invariants(&self) -> Result<(), String> {
        if self.pairs.len() > self.capacity {
            return Err(format!("{} pairs exceed capacity {}", self.pairs.len(), self.capacity));
        }
        let keys: Vec<String> = self.pairs.iter().map(|p| p.key()).collect();
        for i in 1..self.pairs.len() {
            if rank(&self.pairs[i - 1], &keys[i - 1], &self.pairs[i], &keys[i]) != Ordering::Less {
                return Err(format!("pairs {} and {} out of order", i - 1, i));
            }
        }
        let unique: HashSet<&String> = keys.iter().collect();
        if unique.len() != keys.len() {
            return Err("duplicate action text".into());
        }
        Ok(())
    }
}

/// The `k` best pairs as prompt examples.
pub fn select_icl(buffer: &EliteBuffer, k: usize) -> Result<Vec<IclExample>, AgentError> {
    if buffer.is_empty() {
        return Err(AgentError::InvalidState("cannot select examples from an empty buffer".into()));
    }
    Ok(buffer.pairs().iter().take(k).map(ActionRewardPair::to_example).collect())
}

#[derive(Debug, Clone)]
pub struct AgentState {
    pub agent_id: usize,
    pub buffer: EliteBuffer,
    pub improved_last_step: bool,
    pub best_reward: f64,
    pub rng: AgentRng,
}

impl AgentState {
    /// Merges pairs received from the coordinator, tagged as global.
    pub fn receive(&mut self, pairs: &[ActionRewardPair]) {
        self.buffer.insert_pairs(pairs.iter().cloned().map(|mut p| {
            p.origin = Origin::Global;
            p
        }));
        self.sync_best();
    }

    fn sync_best(&mut self) {
        if let Some(top) = self.buffer.top_reward() {
            self.best_reward = top;
        }
    }
}

/// Outcome of one agent step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub agent_id: usize,
    pub iteration: usize,
    pub prompt: String,
    pub raw_text: String,
    pub new_pairs: Vec<ActionRewardPair>,
    pub improved: bool,
    pub parse_failures: usize,
    pub clamped_count: usize,
}

/// Parameters shared by every step of a run.
#[derive(Debug, Clone, Copy)]
pub struct StepSettings {
    pub objective: Objective,
    pub n_actions: usize,
    pub icl_k: usize,
    pub collaborative: bool,
}

/// Creates an agent whose buffer holds `n_init` random evaluated actions.
pub fn init_agent(
    agent_id: usize,
    chan: &ChannelRealization,
    objective: Objective,
    n_init: usize,
    buffer_capacity: usize,
    seed: u64,
) -> Result<AgentState, AgentError> {
    if n_init == 0 {
        return Err(AgentError::InvalidArgument("n_init must be at least 1".into()));
    }
    if buffer_capacity < n_init {
        return Err(AgentError::InvalidArgument("buffer_capacity must be >= n_init".into()));
    }
    let mut rng = AgentRng::seed_from_u64(seed);
    let mut pairs = Vec::with_capacity(n_init);
    for _ in 0..n_init {
        let action = PowerAction::random(&mut rng, chan.n_cells(), chan.p_max());
        let reward = env::evaluate(objective, chan, &action)?.value;
        pairs.push(ActionRewardPair {
            action,
            reward,
            iteration_found: 0,
            agent_id,
            origin: Origin::Local,
        });
    }
    let mut buffer = EliteBuffer::new(buffer_capacity);
    buffer.insert_pairs(pairs);
    let best_reward = buffer.top_reward().expect("n_init >= 1");
    Ok(AgentState {
        agent_id,
        buffer,
        improved_last_step: true,
        best_reward,
        rng,
    })
}

/// Prompt, propose, parse, evaluate, store.
pub fn step_agent(
    state: &mut AgentState,
    chan: &ChannelRealization,
    proposer: &dyn Proposer,
    settings: &StepSettings,
    iteration: usize,
) -> Result<StepReport, AgentError> {
    let examples = select_icl(&state.buffer, settings.icl_k)?;
    let prompt = llm::render_prompt(
        chan.n_cells(),
        chan.p_max(),
        &examples,
        settings.n_actions,
        settings.collaborative,
    )
    .map_err(|e| AgentError::InvalidArgument(e.to_string()))?;
    let request = ProposalRequest {
        prompt: &prompt,
        examples: &examples,
        n_actions: settings.n_actions,
        n_cells: chan.n_cells(),
        p_max: chan.p_max(),
    };
    let raw_text = proposer
        .propose(&request, &mut state.rng)
        .map_err(|source| AgentError::Proposer {
            agent_id: state.agent_id,
            iteration,
            source,
        })?;
    let batch = llm::parse_actions(&raw_text, chan.n_cells(), chan.p_max(), settings.n_actions);

    let mut new_pairs = Vec::with_capacity(batch.actions.len());
    for action in batch.actions {
        let reward = env::evaluate(settings.objective, chan, &action)?.value;
        new_pairs.push(ActionRewardPair {
            action,
            reward,
            iteration_found: iteration,
            agent_id: state.agent_id,
            origin: Origin::Local,
        });
    }
    let best_new = new_pairs.iter().map(|p| p.reward).fold(f64::NEG_INFINITY, f64::max);
    let improved = best_new > state.best_reward;
    state.buffer.insert_pairs(new_pairs.iter().cloned());
    state.sync_best();
    state.improved_last_step = improved;

    Ok(StepReport {
        agent_id: state.agent_id,
        iteration,
        prompt,
        raw_text: batch.raw_text,
        new_pairs,
        improved,
        parse_failures: batch.parse_failures,
        clamped_count: batch.clamped_count,
    })
}
