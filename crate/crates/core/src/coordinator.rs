//! Multi-agent coordinator: a global elite buffer and the rule deciding
//! which agents push to it and which agents receive its contents.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{ActionRewardPair, AgentState, EliteBuffer, StepReport};

pub const DEFAULT_GLOBAL_CAPACITY: usize = 10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoordinatorError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    /// Improving agents push, stalled agents receive.
    Dynamic,
    /// Everyone pushes and everyone receives, every iteration.
    Passive,
    /// No exchange; the best agent is picked at the end.
    None,
}

impl Policy {
    pub fn is_collaborative(self) -> bool {
        !matches!(self, Policy::None)
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Policy::Dynamic => "dynamic",
            Policy::Passive => "passive",
            Policy::None => "none",
        })
    }
}

/// What happened during one synchronization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyncRecord {
    pub iteration: usize,
    pub pushes: Vec<usize>,
    pub pops: Vec<usize>,
    pub global_top_reward: Option<f64>,
    pub global_buffer_size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoordinatorState {
    pub policy: Policy,
    pub global_buffer: EliteBuffer,
    pub push_count: Vec<usize>,
    pub pop_count: Vec<usize>,
}

impl CoordinatorState {
    pub fn new(policy: Policy, n_agents: usize, global_capacity: usize) -> Self {
        Self {
            policy,
            global_buffer: EliteBuffer::new(global_capacity),
            push_count: vec![0; n_agents],
            pop_count: vec![0; n_agents],
        }
    }

    /// Exchanges pairs between local buffers and the global buffer after all
    /// agents finished iteration `t`. `reports[k]` must belong to `agents[k]`.
    pub fn sync(
        &mut self,
        agents: &mut [AgentState],
        reports: &[StepReport],
    ) -> Result<SyncRecord, CoordinatorError> {
        if agents.len() != reports.len() || agents.len() != self.push_count.len() {
            return Err(CoordinatorError::InvalidArgument(format!(
                "{} agents, {} reports, coordinator sized for {}",
                agents.len(),
                reports.len(),
                self.push_count.len()
            )));
        }
        let iteration = reports.first().map(|r| r.iteration).unwrap_or(0);
        for (k, (a, r)) in agents.iter().zip(reports).enumerate() {
            if a.agent_id != r.agent_id || r.iteration != iteration {
                return Err(CoordinatorError::InvalidArgument(format!(
                    "report {k} (agent {}, iteration {}) does not match agent {} at iteration {iteration}",
                    r.agent_id, r.iteration, a.agent_id
                )));
            }
        }

        let mut pushes = Vec::new();
        let mut pops = Vec::new();
        match self.policy {
            Policy::None => {}
            Policy::Dynamic => {
                for (k, report) in reports.iter().enumerate() {
                    if !report.improved {
                        continue;
                    }
                    let admitted: Vec<ActionRewardPair> = report
                        .new_pairs
                        .iter()
                        .filter(|p| {
                            !self.global_buffer.is_full()
                                || self.global_buffer.min_reward().is_none_or(|m| p.reward > m)
                        })
                        .cloned()
                        .collect();
                    if !admitted.is_empty() {
                        self.global_buffer.insert_pairs(admitted);
                        self.push_count[k] += 1;
                        pushes.push(report.agent_id);
                    }
                }
                if !self.global_buffer.is_empty() {
                    let elites = self.global_buffer.pairs().to_vec();
                    for (k, (agent, report)) in agents.iter_mut().zip(reports).enumerate() {
                        if !report.improved {
                            agent.receive(&elites);
                            self.pop_count[k] += 1;
                            pops.push(agent.agent_id);
                        }
                    }
                }
            }
            Policy::Passive => {
                for (k, report) in reports.iter().enumerate() {
                    if !report.new_pairs.is_empty() {
                        self.global_buffer.insert_pairs(report.new_pairs.iter().cloned());
                        self.push_count[k] += 1;
                        pushes.push(report.agent_id);
                    }
                }
                if !self.global_buffer.is_empty() {
                    let elites = self.global_buffer.pairs().to_vec();
                    for (k, agent) in agents.iter_mut().enumerate() {
                        agent.receive(&elites);
                        self.pop_count[k] += 1;
                        pops.push(agent.agent_id);
                    }
                }
            }
        }

        Ok(SyncRecord {
            iteration,
            pushes,
            pops,
            global_top_reward: self.global_buffer.top_reward(),
            global_buffer_size: self.global_buffer.len(),
        })
    }
}

/// Largest reward held anywhere: every local buffer and the global buffer.
pub fn best_so_far(agents: &[AgentState], coord: &CoordinatorState) -> f64 {
    agents
        .iter()
        .filter_map(|a| a.buffer.top_reward())
        .chain(coord.global_buffer.top_reward())
        .fold(f64::NEG_INFINITY, f64::max)
}
