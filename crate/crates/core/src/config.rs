//! Experiment manifests: a flat TOML table with defaults, overridable from
//! the command line.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agents::AgentKind;
use crate::bayes::{PriorSpec, RewardPrior, TransitionPrior};
use crate::error::{Error, Result};
use crate::game::{GameSource, MarkovGame, RewardKind};
use crate::harness::MatchConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GameKind {
    PredatorPrey,
    Random,
    File,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorKind {
    /// Per-player Dirichlet over next cells; predator-prey only.
    Decoupled,
    /// Dirichlet per `(s, a, b)`, known rewards.
    Joint,
    /// Dirichlet per `(s, a, b)` and Beta on each signed-Bernoulli reward.
    JointBeta,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub game: GameKind,
    pub grid_width: usize,
    pub grid_height: usize,
    pub num_states: usize,
    pub num_actions_p1: usize,
    pub num_actions_p2: usize,
    pub game_seed: u64,
    /// Random games only: signed-Bernoulli rewards around the means.
    pub stochastic_rewards: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub game_path: Option<PathBuf>,
    pub horizon: usize,
    pub episodes: usize,
    pub num_seeds: usize,
    pub master_seed: u64,
    pub p1: AgentKind,
    /// One match set per listed opponent.
    pub p2: Vec<AgentKind>,
    pub prior: PriorKind,
    /// Dirichlet parameter; defaults to `1 / cells` for the decoupled prior
    /// and 1 otherwise.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prior_concentration: Option<f64>,
    pub out_dir: PathBuf,
    pub record_trajectories: bool,
    pub diagnostics: bool,
    /// Worker threads; 0 uses the available parallelism.
    pub workers: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            game: GameKind::PredatorPrey,
            grid_width: 3,
            grid_height: 3,
            num_states: 4,
            num_actions_p1: 2,
            num_actions_p2: 2,
            game_seed: 0,
            stochastic_rewards: false,
            game_path: None,
            horizon: 10,
            episodes: 300,
            num_seeds: 20,
            master_seed: 0,
            p1: AgentKind::PosteriorSampling,
            p2: vec![AgentKind::Clairvoyant],
            prior: PriorKind::Decoupled,
            prior_concentration: None,
            out_dir: PathBuf::from("out"),
            record_trajectories: false,
            diagnostics: false,
            workers: 0,
        }
    }
}

impl ExperimentConfig {
    /// The three predator-prey pairings: posterior sampling against the
    /// equilibrium player, fictitious play and another posterior sampler.
    pub fn paper() -> Self {
        Self {
            p2: vec![
                AgentKind::Clairvoyant,
                AgentKind::FictitiousPlay,
                AgentKind::PosteriorSampling,
            ],
            ..Self::default()
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "paper" => Ok(Self::paper()),
            "default" => Ok(Self::default()),
            other => Err(Error::Config(format!("unknown preset {other:?}"))),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("horizon", self.horizon),
            ("episodes", self.episodes),
            ("num_seeds", self.num_seeds),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        if self.p2.is_empty() {
            return Err(Error::Config("p2 lists no opponents".into()));
        }
        match self.game {
            GameKind::PredatorPrey if self.grid_width == 0 || self.grid_height == 0 => {
                return Err(Error::Config("grid dimensions must be positive".into()));
            }
            GameKind::Random
                if self.num_states == 0 || self.num_actions_p1 == 0 || self.num_actions_p2 == 0 =>
            {
                return Err(Error::Config("random game sizes must be positive".into()));
            }
            GameKind::File => match &self.game_path {
                None => return Err(Error::Config("game = \"file\" needs game_path".into())),
                Some(p) if !p.is_file() => {
                    return Err(Error::Config(format!("game file {} not found", p.display())));
                }
                _ => {}
            },
            _ => {}
        }
        if self.prior == PriorKind::Decoupled && self.game != GameKind::PredatorPrey {
            return Err(Error::Config("the decoupled prior needs a predator-prey game".into()));
        }
        if let Some(c) = self.prior_concentration {
            if !(c.is_finite() && c > 0.0) {
                return Err(Error::Config("prior_concentration must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn game_source(&self) -> GameSource {
        match self.game {
            GameKind::PredatorPrey => GameSource::PredatorPrey {
                width: self.grid_width,
                height: self.grid_height,
            },
            GameKind::Random => GameSource::Random {
                num_states: self.num_states,
                num_actions_p1: self.num_actions_p1,
                num_actions_p2: self.num_actions_p2,
                seed: self.game_seed,
                stochastic_rewards: self.stochastic_rewards,
            },
            GameKind::File => GameSource::File {
                path: self.game_path.clone().unwrap_or_default(),
            },
        }
    }

    /// Builds the true game. A file-backed game must share the configured
    /// horizon, and a Beta reward prior needs signed-Bernoulli rewards.
    pub fn build_game(&self) -> Result<MarkovGame> {
        let game = self.game_source().build(self.horizon)?;
        if game.horizon() != self.horizon {
            return Err(Error::Config(format!(
                "game file has horizon {}, config says {}",
                game.horizon(),
                self.horizon
            )));
        }
        if self.prior == PriorKind::JointBeta && game.reward().kind != RewardKind::BernoulliSigned {
            return Err(Error::Config(
                "prior \"joint_beta\" needs signed-Bernoulli rewards (set stochastic_rewards = true)".into(),
            ));
        }
        Ok(game)
    }

    pub fn prior_spec(&self) -> PriorSpec {
        let cells = self.grid_width * self.grid_height;
        match self.prior {
            PriorKind::Decoupled => PriorSpec {
                transition: TransitionPrior::Decoupled {
                    cells,
                    concentration: self.prior_concentration.unwrap_or(1.0 / cells as f64),
                },
                reward: RewardPrior::Known,
            },
            PriorKind::Joint => PriorSpec {
                transition: TransitionPrior::Joint {
                    concentration: self.prior_concentration.unwrap_or(1.0),
                },
                reward: RewardPrior::Known,
            },
            PriorKind::JointBeta => PriorSpec {
                transition: TransitionPrior::Joint {
                    concentration: self.prior_concentration.unwrap_or(1.0),
                },
                reward: RewardPrior::BetaSigned {
                    alpha: 1.0,
                    beta: 1.0,
                },
            },
        }
    }

    /// `master_seed, master_seed + 1, ...`, one per run.
    pub fn seeds(&self) -> Vec<u64> {
        (0..self.num_seeds as u64)
            .map(|i| self.master_seed.wrapping_add(i))
            .collect()
    }

    /// Match settings against opponent `p2`; the seed is filled in per run.
    pub fn match_config(&self, p2: AgentKind) -> MatchConfig {
        MatchConfig {
            game: Some(self.game_source()),
            p1: self.p1,
            p2,
            prior: self.prior_spec(),
            episodes: self.episodes,
            master_seed: self.master_seed,
            record_trajectories: self.record_trajectories,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_the_grid_experiment() {
        let c = ExperimentConfig::default();
        assert_eq!(c.horizon, 10);
        assert_eq!(c.p1, AgentKind::PosteriorSampling);
        assert_eq!(c.p2, vec![AgentKind::Clairvoyant]);
        assert_eq!(c.prior_spec(), PriorSpec::predator_prey(9));
        let g = c.build_game().unwrap();
        assert_eq!((g.num_states(), g.num_actions_p1(), g.num_actions_p2()), (81, 4, 4));
    }

    #[test]
    fn toml_round_trip() {
        for c in [
            ExperimentConfig::default(),
            ExperimentConfig::paper(),
            ExperimentConfig {
                game: GameKind::Random,
                prior: PriorKind::JointBeta,
                prior_concentration: Some(0.5),
                p2: vec![AgentKind::UniformRandom],
                ..ExperimentConfig::default()
            },
        ] {
            let text = c.to_toml_string().unwrap();
            let back = ExperimentConfig::from_toml_str(&text).unwrap();
            assert_eq!(back, c);
            assert_eq!(back.to_toml_string().unwrap(), text);
        }
    }

    #[test]
    fn partial_files_use_defaults() {
        let c = ExperimentConfig::from_toml_str("episodes = 5\np2 = [\"fp\", \"ps\"]\n").unwrap();
        assert_eq!(c.episodes, 5);
        assert_eq!(c.horizon, 10);
        assert_eq!(c.p2, vec![AgentKind::FictitiousPlay, AgentKind::PosteriorSampling]);
    }

    #[test]
    fn bad_configs_are_rejected() {
        for text in [
            "episodes = 0",
            "p2 = []",
            "p1 = \"nobody\"",
            "unknown_key = 1",
            "game = \"random\"",
            "game = \"file\"\nprior = \"joint\"",
            "game = \"file\"\nprior = \"joint\"\ngame_path = \"/no/such/file.json\"",
            "prior_concentration = -1.0",
        ] {
            let err = ExperimentConfig::from_toml_str(text).unwrap_err();
            assert!(matches!(err, Error::Config(_)), "{text}: {err}");
        }
    }

    #[test]
    fn beta_prior_needs_stochastic_rewards() {
        let mut c = ExperimentConfig {
            game: GameKind::Random,
            prior: PriorKind::JointBeta,
            ..ExperimentConfig::default()
        };
        assert!(matches!(c.build_game(), Err(Error::Config(_))));
        c.stochastic_rewards = true;
        assert_eq!(c.build_game().unwrap().reward().kind, RewardKind::BernoulliSigned);
    }

    #[test]
    fn seeds_are_consecutive() {
        let c = ExperimentConfig {
            master_seed: 10,
            num_seeds: 3,
            ..ExperimentConfig::default()
        };
        assert_eq!(c.seeds(), vec![10, 11, 12]);
    }
}
