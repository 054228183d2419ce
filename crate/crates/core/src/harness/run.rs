use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agent::{init_agent, step_agent, AgentError, AgentState, StepReport, StepSettings};
use crate::coordinator::{best_so_far, CoordinatorState, Policy};
use crate::env::{sample_channel_with, ChannelRealization};
use crate::llm::{build_proposer, Proposer, ProposerKind};
use crate::solvers::{grid_oracle, local_optimum, RandomSearch, SolverResult, GRID_MAX_CELLS};

use super::artifacts::{self, TranscriptRecord};
use super::{ExperimentConfig, HarnessError, Method};

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn mix(parts: &[u64]) -> u64 {
    parts.iter().fold(0x6A09_E667_F3BC_C908, |acc, p| splitmix64(acc ^ splitmix64(*p)))
}

/// Seed of agent `agent_id`'s private stream in run `run_seed`. Identical
/// across policies, so every policy starts from the same initial actions.
pub fn agent_seed(run_seed: u64, mock_seed: u64, agent_id: usize) -> u64 {
    mix(&[run_seed, mock_seed, agent_id as u64])
}

pub fn brute_force_seed(run_seed: u64) -> u64 {
    mix(&[run_seed, u64::MAX])
}

/// Best-so-far series of one (method, seed) run. Index 0 is the state right
/// after initialization; index `t` is after coordinator round `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrajectory {
    pub method: Method,
    pub seed: u64,
    pub best_so_far: Vec<f64>,
    pub cumulative_evaluations: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub method: Method,
    pub seed: u64,
    pub error: String,
}

/// In-memory result of [`execute`].
#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub channel: ChannelRealization,
    pub baseline: SolverResult,
    pub trajectories: Vec<RunTrajectory>,
    pub failures: Vec<RunFailure>,
    /// JSONL lines, empty when the transcript is disabled.
    pub transcript: Vec<String>,
}

impl ExperimentOutcome {
    pub fn baseline_value(&self) -> f64 {
        self.baseline.value.value
    }

    pub fn runs_for(&self, method: Method) -> impl Iterator<Item = &RunTrajectory> {
        self.trajectories.iter().filter(move |t| t.method == method)
    }
}

/// Artifacts written by [`run_experiment`].
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub outcome: ExperimentOutcome,
    pub oracle: Option<SolverResult>,
    pub normalized: Vec<Vec<f64>>,
    pub transcript_path: PathBuf,
    pub csv_path: PathBuf,
    pub summary_path: PathBuf,
}

struct Transcript {
    enabled: bool,
    log_prompts: bool,
    lines: Vec<String>,
}

impl Transcript {
    fn push(&mut self, record: &TranscriptRecord) {
        if self.enabled {
            self.lines.push(serde_json::to_string(record).expect("records serialize"));
        }
    }
}

fn step_all(
    agents: &mut [AgentState],
    chan: &ChannelRealization,
    proposer: &dyn Proposer,
    settings: &StepSettings,
    iteration: usize,
    pool: Option<&rayon::ThreadPool>,
) -> Result<Vec<StepReport>, AgentError> {
    match pool {
        Some(pool) => pool.install(|| {
            agents
                .par_iter_mut()
                .map(|a| step_agent(a, chan, proposer, settings, iteration))
                .collect()
        }),
        None => agents
            .iter_mut()
            .map(|a| step_agent(a, chan, proposer, settings, iteration))
            .collect(),
    }
}

#[allow(clippy::too_many_arguments)]
fn run_policy(
    cfg: &ExperimentConfig,
    chan: &ChannelRealization,
    method: Method,
    policy: Policy,
    seed: u64,
    proposer: &dyn Proposer,
    pool: Option<&rayon::ThreadPool>,
    log: &mut Transcript,
) -> Result<RunTrajectory, AgentError> {
    let mut agents = Vec::with_capacity(cfg.n_agents);
    for a in 0..cfg.n_agents {
        let agent = init_agent(
            a,
            chan,
            cfg.objective,
            cfg.n_init,
            cfg.buffer_capacity,
            agent_seed(seed, cfg.proposer.mock.seed, a),
        )?;
        log.push(&TranscriptRecord::Init {
            method,
            seed,
            agent_id: a,
            actions: agent.buffer.pairs().iter().map(|p| p.action.clone()).collect(),
            rewards: agent.buffer.pairs().iter().map(|p| p.reward).collect(),
        });
        agents.push(agent);
    }
    let mut coord = CoordinatorState::new(policy, cfg.n_agents, cfg.global_capacity);
    let settings = StepSettings {
        objective: cfg.objective,
        n_actions: cfg.actions_per_step,
        icl_k: cfg.icl_k,
        collaborative: policy.is_collaborative(),
    };

    let mut cumulative = cfg.n_agents * cfg.n_init;
    let mut best = vec![best_so_far(&agents, &coord)];
    let mut evals = vec![cumulative];
    log.push(&TranscriptRecord::Iteration {
        method,
        seed,
        iteration: 0,
        evaluations: cumulative,
        cumulative_evaluations: cumulative,
        best_so_far: best[0],
    });

    for t in 1..=cfg.n_iterations {
        let reports = step_all(&mut agents, chan, proposer, &settings, t, pool)?;
        let sync = coord
            .sync(&mut agents, &reports)
            .map_err(|e| AgentError::InvalidState(e.to_string()))?;
        let evaluations: usize = reports.iter().map(|r| r.new_pairs.len()).sum();
        cumulative += evaluations;
        let b = best_so_far(&agents, &coord);
        best.push(b);
        evals.push(cumulative);

        if log.enabled {
            for r in &reports {
                log.push(&TranscriptRecord::Step {
                    method,
                    seed,
                    iteration: t,
                    agent_id: r.agent_id,
                    prompt: log.log_prompts.then(|| r.prompt.clone()),
                    raw_response: log.log_prompts.then(|| r.raw_text.clone()),
                    actions: r.new_pairs.iter().map(|p| p.action.clone()).collect(),
                    rewards: r.new_pairs.iter().map(|p| p.reward).collect(),
                    improved: r.improved,
                    parse_failures: r.parse_failures,
                    clamped_count: r.clamped_count,
                });
            }
            log.push(&TranscriptRecord::Coordinator {
                method,
                seed,
                iteration: t,
                pushes: sync.pushes,
                pops: sync.pops,
                global_top_reward: sync.global_top_reward,
                global_buffer_size: sync.global_buffer_size,
            });
            log.push(&TranscriptRecord::Iteration {
                method,
                seed,
                iteration: t,
                evaluations,
                cumulative_evaluations: cumulative,
                best_so_far: b,
            });
        }
    }
    Ok(RunTrajectory {
        method,
        seed,
        best_so_far: best,
        cumulative_evaluations: evals,
    })
}

/// Uniform random search drawing the same number of actions per round as
/// the agent policies: `n_agents * n_init` up front, then
/// `n_agents * actions_per_step` per round.
fn run_brute_force(cfg: &ExperimentConfig, chan: &ChannelRealization, seed: u64, log: &mut Transcript) -> RunTrajectory {
    let method = Method::BruteForce;
    let mut search = RandomSearch::new(brute_force_seed(seed));
    let mut best = Vec::with_capacity(cfg.n_iterations + 1);
    let mut evals = Vec::with_capacity(cfg.n_iterations + 1);
    for t in 0..=cfg.n_iterations {
        let count = if t == 0 {
            cfg.n_agents * cfg.n_init
        } else {
            cfg.n_agents * cfg.actions_per_step
        };
        let rewards = search.draw_rewards(cfg.objective, chan, count);
        best.push(search.best());
        evals.push(search.evaluations());
        if log.enabled {
            log.push(&TranscriptRecord::BruteForce {
                method,
                seed,
                iteration: t,
                rewards,
            });
            log.push(&TranscriptRecord::Iteration {
                method,
                seed,
                iteration: t,
                evaluations: count,
                cumulative_evaluations: search.evaluations(),
                best_so_far: search.best(),
            });
        }
    }
    RunTrajectory {
        method,
        seed,
        best_so_far: best,
        cumulative_evaluations: evals,
    }
}

/// Runs one agent alone, with the seed it would get inside a run, and
/// returns its best reward after init and after every step.
pub fn run_isolated_agent(
    cfg: &ExperimentConfig,
    chan: &ChannelRealization,
    run_seed: u64,
    agent_id: usize,
    proposer: &dyn Proposer,
) -> Result<Vec<f64>, AgentError> {
    let mut agent = init_agent(
        agent_id,
        chan,
        cfg.objective,
        cfg.n_init,
        cfg.buffer_capacity,
        agent_seed(run_seed, cfg.proposer.mock.seed, agent_id),
    )?;
    let settings = StepSettings {
        objective: cfg.objective,
        n_actions: cfg.actions_per_step,
        icl_k: cfg.icl_k,
        collaborative: false,
    };
    let mut out = vec![agent.best_reward];
    for t in 1..=cfg.n_iterations {
        step_agent(&mut agent, chan, proposer, &settings, t)?;
        out.push(agent.best_reward);
    }
    Ok(out)
}

/// Runs every requested (method, seed) pair in memory.
///
/// Mock runs fan out across (method, seed); remote runs execute one at a
/// time with the agents of a round stepping concurrently, at most
/// `max_in_flight` requests at once. Either way the outcome is ordered by
/// the config's method list, then seed list.
pub fn execute(
    cfg: &ExperimentConfig,
    proposer: &dyn Proposer,
    with_transcript: bool,
) -> Result<ExperimentOutcome, HarnessError> {
    cfg.validate()?;
    let channel = sample_channel_with(cfg.n_cells, cfg.channel_seed, cfg.channel_params())?;
    let baseline = local_optimum(cfg.objective, &channel, cfg.baseline_starts, cfg.channel_seed)?;

    let jobs: Vec<(Method, u64)> = cfg
        .policies
        .iter()
        .flat_map(|m| cfg.run_seeds.iter().map(move |s| (*m, *s)))
        .collect();
    let run_job = |(method, seed): (Method, u64), pool: Option<&rayon::ThreadPool>| {
        let mut log = Transcript {
            enabled: with_transcript,
            log_prompts: cfg.log_prompts,
            lines: Vec::new(),
        };
        let result = match method.policy() {
            Some(policy) => run_policy(cfg, &channel, method, policy, seed, proposer, pool, &mut log),
            None => Ok(run_brute_force(cfg, &channel, seed, &mut log)),
        };
        let result = result.map_err(|e| {
            let failure = RunFailure {
                method,
                seed,
                error: e.to_string(),
            };
            log.push(&TranscriptRecord::Failure {
                method,
                seed,
                error: failure.error.clone(),
            });
            failure
        });
        (result, log.lines)
    };

    let results: Vec<_> = if proposer.kind() == ProposerKind::Remote {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.proposer.max_in_flight)
            .build()
            .map_err(|e| HarnessError::InvalidState(format!("thread pool: {e}")))?;
        jobs.into_iter().map(|j| run_job(j, Some(&pool))).collect()
    } else {
        jobs.into_par_iter().map(|j| run_job(j, None)).collect()
    };

    let mut trajectories = Vec::new();
    let mut failures = Vec::new();
    let mut transcript = Vec::new();
    for (result, lines) in results {
        transcript.extend(lines);
        match result {
            Ok(t) => trajectories.push(t),
            Err(f) => failures.push(f),
        }
    }
    if trajectories.is_empty() {
        let first = failures.first().map(|f| f.error.clone()).unwrap_or_default();
        return Err(HarnessError::AllRunsFailed(first));
    }
    Ok(ExperimentOutcome {
        channel,
        baseline,
        trajectories,
        failures,
        transcript,
    })
}

/// Builds the configured proposer, runs the experiment and writes the CSV,
/// JSONL transcript and JSON summary into `output_dir`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunArtifacts, HarnessError> {
    let proposer = build_proposer(&cfg.proposer).map_err(|e| HarnessError::Config(format!("proposer: {e}")))?;
    let outcome = execute(cfg, proposer.as_ref(), true)?;
    let oracle = if cfg.n_cells <= GRID_MAX_CELLS {
        Some(grid_oracle(cfg.objective, &outcome.channel, cfg.grid_points)?)
    } else {
        None
    };
    let normalized = super::normalize_trajectories(
        &outcome.trajectories.iter().map(|t| t.best_so_far.clone()).collect::<Vec<_>>(),
        outcome.baseline_value(),
    )?;

    let dir = &cfg.output_dir;
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::Io {
        path: dir.clone(),
        message: e.to_string(),
    })?;
    let csv_path = dir.join("trajectories.csv");
    let transcript_path = dir.join("transcript.jsonl");
    let summary_path = dir.join("summary.json");

    artifacts::write_csv(&csv_path, &outcome.trajectories, outcome.baseline_value())?;
    artifacts::write_lines(&transcript_path, &outcome.transcript)?;
    let summary = artifacts::Summary::build(cfg, &outcome, oracle.as_ref());
    artifacts::write_summary(&summary_path, &summary)?;

    Ok(RunArtifacts {
        outcome,
        oracle,
        normalized,
        transcript_path,
        csv_path,
        summary_path,
    })
}
