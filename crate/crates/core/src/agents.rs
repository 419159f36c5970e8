//! Per-episode policy selection for each kind of player.
//!
//! Learning agents (posterior sampling, fictitious play) only ever see the
//! shared history and the structure both players know in advance; the
//! clairvoyant agent is the one kind built from the true game.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bayes::PosteriorState;
use crate::dp::{best_response_p1, best_response_p2, solve_equilibrium, Policy};
use crate::error::{Error, Result};
use crate::game::{GameShape, MarkovGame, RewardKind, RewardSpec, Step};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Role {
    Maximizer,
    Minimizer,
}

impl Role {
    fn num_own_actions(self, shape: &GameShape) -> usize {
        match self {
            Role::Maximizer => shape.num_actions_p1,
            Role::Minimizer => shape.num_actions_p2,
        }
    }

    fn num_opponent_actions(self, shape: &GameShape) -> usize {
        match self {
            Role::Maximizer => shape.num_actions_p2,
            Role::Minimizer => shape.num_actions_p1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AgentKind {
    #[serde(rename = "ps", alias = "posterior_sampling")]
    PosteriorSampling,
    #[serde(rename = "fp", alias = "fictitious_play")]
    FictitiousPlay,
    #[serde(rename = "eq", alias = "clairvoyant")]
    Clairvoyant,
    #[serde(rename = "random", alias = "uniform_random")]
    UniformRandom,
}

impl AgentKind {
    /// Short name used by the CLI, configs and output files.
    pub fn short_name(self) -> &'static str {
        match self {
            AgentKind::PosteriorSampling => "ps",
            AgentKind::FictitiousPlay => "fp",
            AgentKind::Clairvoyant => "eq",
            AgentKind::UniformRandom => "random",
        }
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for AgentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ps" => Ok(AgentKind::PosteriorSampling),
            "fp" => Ok(AgentKind::FictitiousPlay),
            "eq" => Ok(AgentKind::Clairvoyant),
            "random" => Ok(AgentKind::UniformRandom),
            other => Err(Error::Config(format!(
                "unknown agent kind {other:?} (expected ps, fp, eq or random)"
            ))),
        }
    }
}

/// What a posterior-sampling player computes at the start of an episode.
#[derive(Clone, Debug)]
pub struct PsSelection {
    /// Own-side equilibrium policy of the sampled model.
    pub policy: Policy,
    pub sampled_model: MarkovGame,
    /// The other side of the sampled model's equilibrium.
    pub companion: Policy,
}

/// Samples a model from the posterior and returns this role's side of its
/// equilibrium, plus the sampled model and the opposing side.
pub fn ps_select_policy<R: Rng + ?Sized>(
    post: &PosteriorState,
    role: Role,
    rng: &mut R,
) -> Result<PsSelection> {
    let sampled_model = post.sample_model(rng)?;
    let eq = solve_equilibrium(&sampled_model)?;
    let (policy, companion) = match role {
        Role::Maximizer => (eq.mu, eq.nu),
        Role::Minimizer => (eq.nu, eq.mu),
    };
    Ok(PsSelection {
        policy,
        sampled_model,
        companion,
    })
}

/// Empirical statistics kept by a fictitious-play player.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FictitiousPlayState {
    shape: GameShape,
    /// `N(s, a, b, s')`.
    transition_counts: Vec<u64>,
    reward_sums: Vec<f64>,
    /// `N(s, a, b)`.
    visit_counts: Vec<u64>,
    /// Opponent's action counts per state, pooled over steps. Indexed by
    /// role: player 2's actions for a maximizer, player 1's for a minimizer.
    opponent_counts: Vec<u64>,
    role: Role,
}

impl FictitiousPlayState {
    pub fn new(shape: &GameShape, role: Role) -> Self {
        let tuples = shape.num_tuples();
        Self {
            shape: shape.clone(),
            transition_counts: vec![0; tuples * shape.num_states],
            reward_sums: vec![0.0; tuples],
            visit_counts: vec![0; tuples],
            opponent_counts: vec![0; shape.num_states * role.num_opponent_actions(shape)],
            role,
        }
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn observe(&mut self, step: &Step) -> Result<()> {
        self.shape.check_tuple(step.state, step.action_p1, step.action_p2)?;
        if step.next_state >= self.shape.num_states {
            return Err(Error::Index(format!("next state {} out of range", step.next_state)));
        }
        let n = self.shape.num_states;
        let t = self.shape.tuple_index(step.state, step.action_p1, step.action_p2);
        self.transition_counts[t * n + step.next_state] += 1;
        self.visit_counts[t] += 1;
        self.reward_sums[t] += step.reward;
        let (opp_action, opp_n) = match self.role {
            Role::Maximizer => (step.action_p2, self.shape.num_actions_p2),
            Role::Minimizer => (step.action_p1, self.shape.num_actions_p1),
        };
        self.opponent_counts[step.state * opp_n + opp_action] += 1;
        Ok(())
    }

    /// Point-estimate game: empirical transition frequencies and mean
    /// rewards; never-visited tuples get a uniform row and reward 0.
    pub fn estimated_game(&self) -> Result<MarkovGame> {
        let n = self.shape.num_states;
        let tuples = self.shape.num_tuples();
        let mut transition = Vec::with_capacity(tuples * n);
        let mut mean = Vec::with_capacity(tuples);
        for t in 0..tuples {
            let visits = self.visit_counts[t];
            if visits == 0 {
                transition.extend(std::iter::repeat_n(1.0 / n as f64, n));
                mean.push(0.0);
            } else {
                let counts = &self.transition_counts[t * n..(t + 1) * n];
                transition.extend(counts.iter().map(|&c| c as f64 / visits as f64));
                mean.push((self.reward_sums[t] / visits as f64).clamp(-1.0, 1.0));
            }
        }
        for row in transition.chunks_exact_mut(n) {
            crate::game::renormalize(row);
        }
        MarkovGame::new(
            self.shape.clone(),
            transition,
            RewardSpec {
                kind: RewardKind::KnownDeterministic,
                mean,
            },
        )
    }

    /// Stationary estimate of the opponent: empirical action frequencies in
    /// each state, uniform where the state was never visited.
    pub fn opponent_policy(&self) -> Policy {
        let opp_n = self.role.num_opponent_actions(&self.shape);
        let mut per_state = Vec::with_capacity(self.shape.num_states * opp_n);
        for counts in self.opponent_counts.chunks_exact(opp_n) {
            let total: u64 = counts.iter().sum();
            if total == 0 {
                per_state.extend(std::iter::repeat_n(1.0 / opp_n as f64, opp_n));
            } else {
                per_state.extend(counts.iter().map(|&c| c as f64 / total as f64));
            }
        }
        Policy::stationary(self.shape.num_states, opp_n, self.shape.horizon, &per_state)
    }
}

/// Best response to the estimated opponent in the estimated game.
pub fn fp_select_policy(fp: &FictitiousPlayState) -> Result<Policy> {
    let game = fp.estimated_game()?;
    let opponent = fp.opponent_policy();
    Ok(match fp.role {
        Role::Maximizer => best_response_p1(&game, &opponent)?.0,
        Role::Minimizer => best_response_p2(&game, &opponent)?.0,
    })
}

/// This role's side of the true game's equilibrium.
pub fn clairvoyant_policy(true_game: &MarkovGame, role: Role) -> Result<Policy> {
    let eq = solve_equilibrium(true_game)?;
    Ok(match role {
        Role::Maximizer => eq.mu,
        Role::Minimizer => eq.nu,
    })
}

/// The policy an agent commits to for one episode, plus the sampled model
/// and companion policy when the agent is a posterior sampler.
#[derive(Clone, Debug)]
pub struct Selection {
    pub policy: Policy,
    pub sample: Option<(MarkovGame, Policy)>,
}

/// A stateful player for the duration of one match.
#[derive(Clone, Debug)]
pub enum Agent {
    PosteriorSampling { role: Role, posterior: PosteriorState },
    FictitiousPlay { state: FictitiousPlayState },
    Clairvoyant { role: Role, policy: Policy },
    UniformRandom { role: Role, policy: Policy },
}

impl Agent {
    pub fn posterior_sampling(role: Role, prior: PosteriorState) -> Self {
        Agent::PosteriorSampling {
            role,
            posterior: prior,
        }
    }

    pub fn fictitious_play(role: Role, shape: &GameShape) -> Self {
        Agent::FictitiousPlay {
            state: FictitiousPlayState::new(shape, role),
        }
    }

    /// Solves the true game once; the policy is reused every episode.
    pub fn clairvoyant(role: Role, true_game: &MarkovGame) -> Result<Self> {
        Ok(Agent::Clairvoyant {
            role,
            policy: clairvoyant_policy(true_game, role)?,
        })
    }

    pub fn uniform_random(role: Role, shape: &GameShape) -> Self {
        Agent::UniformRandom {
            role,
            policy: Policy::uniform(shape.num_states, role.num_own_actions(shape), shape.horizon),
        }
    }

    pub fn kind(&self) -> AgentKind {
        match self {
            Agent::PosteriorSampling { .. } => AgentKind::PosteriorSampling,
            Agent::FictitiousPlay { .. } => AgentKind::FictitiousPlay,
            Agent::Clairvoyant { .. } => AgentKind::Clairvoyant,
            Agent::UniformRandom { .. } => AgentKind::UniformRandom,
        }
    }

    pub fn role(&self) -> Role {
        match self {
            Agent::PosteriorSampling { role, .. }
            | Agent::Clairvoyant { role, .. }
            | Agent::UniformRandom { role, .. } => *role,
            Agent::FictitiousPlay { state } => state.role,
        }
    }

    /// Chooses the policy for the next episode.
    pub fn select<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Selection> {
        match self {
            Agent::PosteriorSampling { role, posterior } => {
                let sel = ps_select_policy(posterior, *role, rng)?;
                Ok(Selection {
                    policy: sel.policy,
                    sample: Some((sel.sampled_model, sel.companion)),
                })
            }
            Agent::FictitiousPlay { state } => Ok(Selection {
                policy: fp_select_policy(state)?,
                sample: None,
            }),
            Agent::Clairvoyant { policy, .. } | Agent::UniformRandom { policy, .. } => Ok(Selection {
                policy: policy.clone(),
                sample: None,
            }),
        }
    }

    /// Incorporates a completed episode.
    pub fn observe(&mut self, episode: &[Step]) -> Result<()> {
        match self {
            Agent::PosteriorSampling { posterior, .. } => posterior.update_all(episode),
            Agent::FictitiousPlay { state } => episode.iter().try_for_each(|s| state.observe(s)),
            Agent::Clairvoyant { .. } | Agent::UniformRandom { .. } => Ok(()),
        }
    }
}
