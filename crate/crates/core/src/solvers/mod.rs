//! Knowledge-based baselines and verification oracles.
//!
//! * [`wmmse_max_se`]: scalar WMMSE for sum spectral efficiency.
//! * [`dinkelbach_max_ee`]: Dinkelbach fractional programming for energy
//!   efficiency, with [`inner_subtracted_max`] as the inner solver.
//! * [`multi_start_best`]: best-of-N wrapper over random admissible starts.
//! * [`grid_oracle`]: exhaustive grid search for small instances.
//! * [`brute_force_trajectory`]: uniform random search, the budget-matched
//!   baseline for the agent policies.

mod dinkelbach;
mod wmmse;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{self, ChannelRealization, EnvError, Objective, PowerAction, Reward};

pub use dinkelbach::{
    dinkelbach_max_ee, inner_subtracted_max, subtracted_gradient, subtracted_objective,
    DinkelbachConfig, InnerConfig,
};
pub use wmmse::{wmmse_max_se, WmmseConfig};

/// Number of random starts used for the local-optimum baseline.
pub const DEFAULT_N_STARTS: usize = 5;
/// Largest instance accepted by [`grid_oracle`].
pub const GRID_MAX_CELLS: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("non-finite value at iteration {iteration}: {what}")]
    NumericFailure { iteration: usize, what: String },
    #[error("unsupported instance size: {0}")]
    UnsupportedSize(String),
}

impl From<EnvError> for SolverError {
    fn from(e: EnvError) -> Self {
        match e {
            EnvError::InvalidArgument(m) => SolverError::InvalidArgument(m),
        }
    }
}

/// Output of every baseline solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverResult {
    pub p_star: PowerAction,
    pub value: Reward,
    pub iterations_used: usize,
    pub converged: bool,
    /// Per-iteration objective trace: SE for WMMSE, the ratio estimate for
    /// Dinkelbach. Not part of the JSON summary.
    #[serde(skip)]
    pub history: Vec<f64>,
    /// Dinkelbach residuals `SE(p*) - lambda * power(p*)`, one per outer step.
    #[serde(skip)]
    pub residuals: Vec<f64>,
}

impl SolverResult {
    pub(crate) fn from_point(
        objective: Objective,
        chan: &ChannelRealization,
        p_star: PowerAction,
        iterations_used: usize,
        converged: bool,
    ) -> Result<Self, SolverError> {
        let value = env::evaluate(objective, chan, &p_star)?;
        Ok(Self {
            p_star,
            value,
            iterations_used,
            converged,
            history: Vec::new(),
            residuals: Vec::new(),
        })
    }
}

/// Best-so-far series of a search method.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub best_so_far: Vec<f64>,
    pub evals_per_iteration: usize,
}

/// Runs `solver` from `n_starts` seeded uniform-random starts and keeps the
/// best result. Starts are drawn sequentially from one stream, so a larger
/// `n_starts` only appends starts. Ties keep the earliest start.
pub fn multi_start_best<F>(
    solver: F,
    chan: &ChannelRealization,
    n_starts: usize,
    seed: u64,
) -> Result<SolverResult, SolverError>
where
    F: Fn(&ChannelRealization, &PowerAction) -> Result<SolverResult, SolverError> + Sync,
{
    if n_starts == 0 {
        return Err(SolverError::InvalidArgument("n_starts must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let starts: Vec<PowerAction> = (0..n_starts)
        .map(|_| PowerAction::random(&mut rng, chan.n_cells(), chan.p_max()))
        .collect();
    let results: Vec<Result<SolverResult, SolverError>> =
        starts.par_iter().map(|p0| solver(chan, p0)).collect();

    let mut best: Option<SolverResult> = None;
    let mut first_err = None;
    for r in results {
        match r {
            Ok(r) => {
                if best.as_ref().is_none_or(|b| r.value.value > b.value.value) {
                    best = Some(r);
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    best.ok_or_else(|| first_err.expect("at least one start ran"))
}

/// Multi-start local optimum for `objective`: WMMSE for SE, Dinkelbach for EE.
pub fn local_optimum(
    objective: Objective,
    chan: &ChannelRealization,
    n_starts: usize,
    seed: u64,
) -> Result<SolverResult, SolverError> {
    match objective {
        Objective::Se => {
            let cfg = WmmseConfig::default();
            multi_start_best(|c, p| wmmse_max_se(c, p, cfg.max_iter, cfg.tol), chan, n_starts, seed)
        }
        Objective::Ee => {
            let cfg = DinkelbachConfig::default();
            multi_start_best(
                |c, p| dinkelbach_max_ee(c, p, cfg.max_outer, cfg.tol),
                chan,
                n_starts,
                seed,
            )
        }
    }
}

/// Exhaustive search over `{0, d, 2d, ..., p_max}^n`, `d = p_max / (points - 1)`.
/// The first grid point (in row-major index order) attaining the maximum wins.
pub fn grid_oracle(
    objective: Objective,
    chan: &ChannelRealization,
    points_per_axis: usize,
) -> Result<SolverResult, SolverError> {
    let n = chan.n_cells();
    if n > GRID_MAX_CELLS {
        return Err(SolverError::UnsupportedSize(format!(
            "grid search supports at most {GRID_MAX_CELLS} cells, got {n}"
        )));
    }
    if points_per_axis < 2 {
        return Err(SolverError::InvalidArgument("points_per_axis must be at least 2".into()));
    }
    let levels: Vec<f64> = (0..points_per_axis)
        .map(|k| {
            if k + 1 == points_per_axis {
                chan.p_max()
            } else {
                chan.p_max() * k as f64 / (points_per_axis - 1) as f64
            }
        })
        .collect();
    let total = points_per_axis.pow(n as u32);
    let decode = |mut idx: usize, buf: &mut [f64]| {
        for slot in buf.iter_mut().rev() {
            *slot = levels[idx % points_per_axis];
            idx /= points_per_axis;
        }
    };

    const CHUNK: usize = 4096;
    let n_chunks = total.div_ceil(CHUNK);
    let (best_idx, _) = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut buf = vec![0.0; n];
            let mut best = (usize::MAX, f64::NEG_INFINITY);
            for idx in c * CHUNK..((c + 1) * CHUNK).min(total) {
                decode(idx, &mut buf);
                let v = env::evaluate_raw(objective, chan, &buf);
                if v > best.1 {
                    best = (idx, v);
                }
            }
            best
        })
        .reduce(
            || (usize::MAX, f64::NEG_INFINITY),
            |a, b| {
                if b.1 > a.1 || (b.1 == a.1 && b.0 < a.0) {
                    b
                } else {
                    a
                }
            },
        );

    let mut buf = vec![0.0; n];
    decode(best_idx, &mut buf);
    SolverResult::from_point(objective, chan, PowerAction::new(buf), total, true)
}

/// Uniform random search over the admissible box with a running maximum.
#[derive(Debug, Clone)]
pub struct RandomSearch {
    rng: ChaCha8Rng,
    best: f64,
    evaluations: usize,
}

impl RandomSearch {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            best: f64::NEG_INFINITY,
            evaluations: 0,
        }
    }

    /// Draws and evaluates `count` actions, returning the updated best.
    pub fn draw(&mut self, objective: Objective, chan: &ChannelRealization, count: usize) -> f64 {
        self.draw_rewards(objective, chan, count);
        self.best
    }

    /// As [`RandomSearch::draw`], returning every drawn reward.
    pub fn draw_rewards(&mut self, objective: Objective, chan: &ChannelRealization, count: usize) -> Vec<f64> {
        let rewards: Vec<f64> = (0..count)
            .map(|_| {
                let p = PowerAction::random(&mut self.rng, chan.n_cells(), chan.p_max());
                env::evaluate_raw(objective, chan, p.powers())
            })
            .collect();
        for v in &rewards {
            if *v > self.best {
                self.best = *v;
            }
        }
        self.evaluations += count;
        rewards
    }

    pub fn best(&self) -> f64 {
        self.best
    }

    pub fn evaluations(&self) -> usize {
        self.evaluations
    }
}

pub fn brute_force_trajectory(
    objective: Objective,
    chan: &ChannelRealization,
    actions_per_iter: usize,
    n_iter: usize,
    seed: u64,
) -> Result<Trajectory, SolverError> {
    if actions_per_iter == 0 {
        return Err(SolverError::InvalidArgument("actions_per_iter must be at least 1".into()));
    }
    let mut search = RandomSearch::new(seed);
    let best_so_far = (0..n_iter)
        .map(|_| search.draw(objective, chan, actions_per_iter))
        .collect();
    Ok(Trajectory {
        best_so_far,
        evals_per_iteration: actions_per_iter,
    })
}
