use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agent::{DEFAULT_ACTIONS_PER_STEP, DEFAULT_BUFFER_CAPACITY, DEFAULT_ICL_K, DEFAULT_N_INIT};
use crate::coordinator::DEFAULT_GLOBAL_CAPACITY;
use crate::env::{ChannelParams, Objective, DEFAULT_N_CELLS, DEFAULT_NOISE_POWER, DEFAULT_P_CIRCUIT, DEFAULT_P_MAX};
use crate::llm::{ProposerConfig, ProposerKind};
use crate::solvers::DEFAULT_N_STARTS;

use super::{HarnessError, Method};

/// Full description of one experiment. Every field has a default, so an
/// empty TOML document is a valid configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub objective: Objective,
    pub n_cells: usize,
    pub p_max: f64,
    pub p_circuit: f64,
    pub noise_power: f64,
    pub n_agents: usize,
    pub n_iterations: usize,
    pub actions_per_step: usize,
    pub n_init: usize,
    pub icl_k: usize,
    pub buffer_capacity: usize,
    pub global_capacity: usize,
    pub policies: Vec<Method>,
    pub channel_seed: u64,
    pub run_seeds: Vec<u64>,
    pub grid_points: usize,
    pub baseline_starts: usize,
    /// Include prompts and raw completions in the transcript.
    pub log_prompts: bool,
    pub output_dir: PathBuf,
    pub proposer: ProposerConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            objective: Objective::Ee,
            n_cells: DEFAULT_N_CELLS,
            p_max: DEFAULT_P_MAX,
            p_circuit: DEFAULT_P_CIRCUIT,
            noise_power: DEFAULT_NOISE_POWER,
            n_agents: 5,
            n_iterations: 500,
            actions_per_step: DEFAULT_ACTIONS_PER_STEP,
            n_init: DEFAULT_N_INIT,
            icl_k: DEFAULT_ICL_K,
            buffer_capacity: DEFAULT_BUFFER_CAPACITY,
            global_capacity: DEFAULT_GLOBAL_CAPACITY,
            policies: vec![Method::Dynamic, Method::Passive, Method::None, Method::BruteForce],
            channel_seed: 0,
            run_seeds: (0..10).collect(),
            grid_points: 101,
            baseline_starts: DEFAULT_N_STARTS,
            log_prompts: true,
            output_dir: PathBuf::from("runs"),
            proposer: ProposerConfig::default(),
        }
    }
}

fn range(field: &str, message: &str) -> HarnessError {
    HarnessError::Config(format!("{field}: {message}"))
}

impl ExperimentConfig {
    pub fn channel_params(&self) -> ChannelParams {
        ChannelParams {
            noise_power: self.noise_power,
            p_max: self.p_max,
            p_circuit: self.p_circuit,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let counts = [
            ("n_cells", self.n_cells),
            ("n_agents", self.n_agents),
            ("actions_per_step", self.actions_per_step),
            ("n_init", self.n_init),
            ("icl_k", self.icl_k),
            ("buffer_capacity", self.buffer_capacity),
            ("global_capacity", self.global_capacity),
            ("baseline_starts", self.baseline_starts),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(range(name, "must be at least 1"));
            }
        }
        if self.grid_points < 2 {
            return Err(range("grid_points", "must be at least 2"));
        }
        if self.buffer_capacity < self.n_init {
            return Err(range("buffer_capacity", "must be at least n_init"));
        }
        if !(self.p_max.is_finite() && self.p_max > 0.0) {
            return Err(range("p_max", "must be positive"));
        }
        if !(self.noise_power.is_finite() && self.noise_power > 0.0) {
            return Err(range("noise_power", "must be positive"));
        }
        if !(self.p_circuit.is_finite() && self.p_circuit >= 0.0) {
            return Err(range("p_circuit", "must be non-negative"));
        }
        if self.policies.is_empty() {
            return Err(range("policies", "must name at least one method"));
        }
        if self.run_seeds.is_empty() {
            return Err(range("run_seeds", "must list at least one seed"));
        }
        self.proposer
            .validate()
            .map_err(|e| range("proposer", &e.to_string()))
    }

    /// Canonical TOML rendering.
    pub fn to_toml(&self) -> Result<String, HarnessError> {
        toml::to_string(self).map_err(|e| HarnessError::Config(format!("serialize: {e}")))
    }

    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let cfg: Self = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Command-line overrides; `Some` fields replace file values.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct ConfigOverrides {
    #[arg(long)]
    pub objective: Option<Objective>,
    #[arg(long)]
    pub n_cells: Option<usize>,
    #[arg(long)]
    pub n_agents: Option<usize>,
    #[arg(long)]
    pub n_iterations: Option<usize>,
    #[arg(long)]
    pub actions_per_step: Option<usize>,
    #[arg(long)]
    pub n_init: Option<usize>,
    #[arg(long)]
    pub icl_k: Option<usize>,
    /// Comma-separated subset of dynamic,passive,none,brute_force.
    #[arg(long, value_delimiter = ',')]
    pub policies: Option<Vec<Method>>,
    #[arg(long)]
    pub channel_seed: Option<u64>,
    /// Comma-separated run seeds.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    #[arg(long)]
    pub proposer: Option<ProposerKind>,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub endpoint: Option<String>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
}

impl ConfigOverrides {
    pub fn apply(&self, cfg: &mut ExperimentConfig) {
        macro_rules! set {
            ($src:ident => $($dst:ident).+) => {
                if let Some(v) = &self.$src {
                    cfg.$($dst).+ = v.clone();
                }
            };
        }
        set!(objective => objective);
        set!(n_cells => n_cells);
        set!(n_agents => n_agents);
        set!(n_iterations => n_iterations);
        set!(actions_per_step => actions_per_step);
        set!(n_init => n_init);
        set!(icl_k => icl_k);
        set!(policies => policies);
        set!(channel_seed => channel_seed);
        set!(seeds => run_seeds);
        set!(proposer => proposer.kind);
        set!(model => proposer.model_name);
        set!(endpoint => proposer.endpoint_url);
        set!(output_dir => output_dir);
    }
}

/// Reads `path` (if any), applies `overrides`, validates.
pub fn load_config(path: Option<&Path>, overrides: &ConfigOverrides) -> Result<ExperimentConfig, HarnessError> {
    let mut cfg = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| HarnessError::Io {
                path: p.to_path_buf(),
                message: e.to_string(),
            })?;
            toml::from_str(&text)
                .map_err(|e| HarnessError::Config(format!("{}: {e}", p.display())))?
        }
        None => ExperimentConfig::default(),
    };
    overrides.apply(&mut cfg);
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let cfg = ExperimentConfig::from_toml("").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_eq!(cfg.n_agents, 5);
        assert_eq!(cfg.n_iterations, 500);
        assert_eq!(cfg.actions_per_step, 5);
        assert_eq!(cfg.n_init, 5);
        assert_eq!(cfg.icl_k, 10);
        assert_eq!(cfg.grid_points, 101);
        assert_eq!(cfg.p_max, 10.0);
        assert_eq!(cfg.p_circuit, 1.0);
        assert_eq!(cfg.noise_power, 1.0);
        assert_eq!(cfg.n_cells, 3);
        assert_eq!(cfg.run_seeds.len(), 10);
        assert_eq!(cfg.proposer.model_name, "gpt-3.5-turbo");
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("exp.toml");
        std::fs::write(&path, "n_agents = 5\nobjective = \"SE\"\n").unwrap();
        let overrides = ConfigOverrides {
            n_agents: Some(9),
            ..Default::default()
        };
        let cfg = load_config(Some(&path), &overrides).unwrap();
        assert_eq!(cfg.n_agents, 9);
        assert_eq!(cfg.objective, Objective::Se);
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = ExperimentConfig::from_toml("n_agents = 3\nbogus = 1\n").unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
        assert!(ExperimentConfig::from_toml("[proposer]\nflavour = 1\n").is_err());
    }

    #[test]
    fn parse_errors_carry_line() {
        let err = ExperimentConfig::from_toml("n_agents = 3\nn_iterations = \"x\n").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn range_errors_name_the_field() {
        let err = ExperimentConfig::from_toml("n_agents = 0").unwrap_err();
        assert!(err.to_string().contains("n_agents"), "{err}");
        let err = ExperimentConfig::from_toml("p_max = -1.0").unwrap_err();
        assert!(err.to_string().contains("p_max"), "{err}");
        let err = ExperimentConfig::from_toml("[proposer.mock]\nexplore_prob = 2.0").unwrap_err();
        assert!(err.to_string().contains("explore_prob"), "{err}");
    }

    #[test]
    fn dump_load_round_trip() {
        let src = "objective = \"se\"\nn_agents = 3\npolicies = [\"dynamic\", \"brute_force\"]\nrun_seeds = [4, 2]\n[proposer]\nkind = \"mock\"\n[proposer.mock]\nexplore_prob = 0.25\n";
        let cfg = ExperimentConfig::from_toml(src).unwrap();
        let dumped = cfg.to_toml().unwrap();
        let again = ExperimentConfig::from_toml(&dumped).unwrap();
        assert_eq!(again, cfg);
        assert_eq!(again.to_toml().unwrap(), dumped);
    }
}
