//! Conjugate posterior over game models.
//!
//! Transitions carry Dirichlet posteriors, either one per `(s, a, b)` over
//! all next states or, for grid games whose players move independently, one
//! per `(player, cell, own action)` over next cells. Rewards are either known
//! or Bernoulli on `{-1, +1}` with a Beta posterior on `P(r = +1)`.

use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::dp::{simulate_episode, Policy};
use crate::error::{Error, Result};
use crate::game::{renormalize, GameShape, MarkovGame, RewardKind, RewardSpec, Step};
use crate::seeding::stream_rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TransitionPrior {
    /// Symmetric Dirichlet per `(s, a, b)` over all next states.
    Joint { concentration: f64 },
    /// Symmetric Dirichlet per `(player, cell, action)` over next cells.
    /// States must be encoded as `p1_cell * cells + p2_cell`.
    Decoupled { cells: usize, concentration: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum RewardPrior {
    /// Mean rewards are known; the posterior is a point mass.
    Known,
    /// Beta prior on `P(r = +1)` for each `(s, a, b)`.
    BetaSigned { alpha: f64, beta: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub transition: TransitionPrior,
    pub reward: RewardPrior,
}

impl PriorSpec {
    /// Independent per-player Dirichlet priors with every parameter equal to
    /// `1 / cells`, and known rewards.
    pub fn predator_prey(cells: usize) -> Self {
        Self {
            transition: TransitionPrior::Decoupled {
                cells,
                concentration: 1.0 / cells as f64,
            },
            reward: RewardPrior::Known,
        }
    }

    /// Uniform Dirichlet per `(s, a, b)` and known rewards.
    pub fn generic() -> Self {
        Self {
            transition: TransitionPrior::Joint { concentration: 1.0 },
            reward: RewardPrior::Known,
        }
    }

    /// Uniform Dirichlet transitions and a uniform Beta on each reward.
    pub fn generic_stochastic() -> Self {
        Self {
            transition: TransitionPrior::Joint { concentration: 1.0 },
            reward: RewardPrior::BetaSigned {
                alpha: 1.0,
                beta: 1.0,
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Factorization {
    Joint,
    PerPlayerDecoupled { cells: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum RewardPosterior {
    Known { kind: RewardKind, mean: Vec<f64> },
    BetaSigned { alpha: Vec<f64>, beta: Vec<f64> },
}

/// Posterior over `(transitions, reward parameters)` plus the visit counts
/// of the history it was conditioned on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosteriorState {
    shape: GameShape,
    factorization: Factorization,
    /// Dirichlet parameters. Joint: `(s, a, b, s')`. Decoupled: player-1
    /// rows `(cell, a, cell')` followed by player-2 rows `(cell, b, cell')`.
    concentrations: Vec<f64>,
    reward: RewardPosterior,
    visit_counts: Vec<u64>,
    transition_counts: Vec<u64>,
}

/// Builds the prior. `known_reward` supplies the reward model when the
/// prior treats rewards as known.
pub fn init_prior(
    shape: &GameShape,
    spec: &PriorSpec,
    known_reward: Option<&RewardSpec>,
) -> Result<PosteriorState> {
    let n = shape.num_states;
    let tuples = shape.num_tuples();
    if n == 0 || tuples == 0 || shape.horizon == 0 {
        return Err(Error::InvalidSpec("prior needs positive dimensions".into()));
    }
    let (factorization, concentrations) = match spec.transition {
        TransitionPrior::Joint { concentration } => {
            check_concentration(concentration)?;
            (Factorization::Joint, vec![concentration; tuples * n])
        }
        TransitionPrior::Decoupled {
            cells,
            concentration,
        } => {
            check_concentration(concentration)?;
            if cells * cells != n {
                return Err(Error::Shape(format!(
                    "decoupled prior over {cells} cells needs {} states, game has {n}",
                    cells * cells
                )));
            }
            let len = cells * (shape.num_actions_p1 + shape.num_actions_p2) * cells;
            (
                Factorization::PerPlayerDecoupled { cells },
                vec![concentration; len],
            )
        }
    };
    let reward = match spec.reward {
        RewardPrior::Known => {
            let known = known_reward.ok_or_else(|| {
                Error::InvalidSpec("known-reward prior needs the reward model".into())
            })?;
            if known.mean.len() != tuples {
                return Err(Error::Shape(format!(
                    "known reward table has {} entries, expected {tuples}",
                    known.mean.len()
                )));
            }
            RewardPosterior::Known {
                kind: known.kind,
                mean: known.mean.clone(),
            }
        }
        RewardPrior::BetaSigned { alpha, beta } => {
            check_concentration(alpha)?;
            check_concentration(beta)?;
            RewardPosterior::BetaSigned {
                alpha: vec![alpha; tuples],
                beta: vec![beta; tuples],
            }
        }
    };
    Ok(PosteriorState {
        shape: shape.clone(),
        factorization,
        concentrations,
        reward,
        visit_counts: vec![0; tuples],
        transition_counts: vec![0; tuples * n],
    })
}

fn check_concentration(c: f64) -> Result<()> {
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::InvalidSpec(format!("prior parameter must be positive, got {c}")));
    }
    Ok(())
}

impl PosteriorState {
    pub fn shape(&self) -> &GameShape {
        &self.shape
    }

    pub fn factorization(&self) -> Factorization {
        self.factorization
    }

    pub fn concentrations(&self) -> &[f64] {
        &self.concentrations
    }

    pub fn reward_posterior(&self) -> &RewardPosterior {
        &self.reward
    }

    /// `N(s, a, b)`, flat over tuples.
    pub fn visit_counts(&self) -> &[u64] {
        &self.visit_counts
    }

    /// `N(s, a, b, s')`, flat.
    pub fn transition_counts(&self) -> &[u64] {
        &self.transition_counts
    }

    fn p1_row(&self, cell: usize, a: usize) -> std::ops::Range<usize> {
        let Factorization::PerPlayerDecoupled { cells } = self.factorization else {
            unreachable!("per-player rows only exist in the decoupled factorization")
        };
        let start = (cell * self.shape.num_actions_p1 + a) * cells;
        start..start + cells
    }

    fn p2_row(&self, cell: usize, b: usize) -> std::ops::Range<usize> {
        let Factorization::PerPlayerDecoupled { cells } = self.factorization else {
            unreachable!("per-player rows only exist in the decoupled factorization")
        };
        let offset = cells * self.shape.num_actions_p1 * cells;
        let start = offset + (cell * self.shape.num_actions_p2 + b) * cells;
        start..start + cells
    }

    /// Player-1 Dirichlet row for `(cell, a)` in the decoupled factorization.
    pub fn player1_concentrations(&self, cell: usize, a: usize) -> Option<&[f64]> {
        match self.factorization {
            Factorization::PerPlayerDecoupled { .. } => Some(&self.concentrations[self.p1_row(cell, a)]),
            Factorization::Joint => None,
        }
    }

    pub fn player2_concentrations(&self, cell: usize, b: usize) -> Option<&[f64]> {
        match self.factorization {
            Factorization::PerPlayerDecoupled { .. } => Some(&self.concentrations[self.p2_row(cell, b)]),
            Factorization::Joint => None,
        }
    }

    /// Conditions on one observed step.
    pub fn update(&mut self, step: &Step) -> Result<()> {
        let shape = &self.shape;
        shape.check_tuple(step.state, step.action_p1, step.action_p2)?;
        if step.next_state >= shape.num_states {
            return Err(Error::Index(format!("next state {} out of range", step.next_state)));
        }
        match self.reward {
            RewardPosterior::BetaSigned { .. } if step.reward != 1.0 && step.reward != -1.0 => {
                return Err(Error::InvalidObservation(format!(
                    "signed-Bernoulli reward must be -1 or +1, got {}",
                    step.reward
                )));
            }
            _ if !(-1.0..=1.0).contains(&step.reward) => {
                return Err(Error::InvalidObservation(format!(
                    "reward {} outside [-1, 1]",
                    step.reward
                )));
            }
            _ => {}
        }

        let n = shape.num_states;
        let tuple = shape.tuple_index(step.state, step.action_p1, step.action_p2);
        match self.factorization {
            Factorization::Joint => {
                self.concentrations[tuple * n + step.next_state] += 1.0;
            }
            Factorization::PerPlayerDecoupled { cells } => {
                let (c1, c2) = (step.state / cells, step.state % cells);
                let (n1, n2) = (step.next_state / cells, step.next_state % cells);
                let r1 = self.p1_row(c1, step.action_p1);
                self.concentrations[r1.start + n1] += 1.0;
                let r2 = self.p2_row(c2, step.action_p2);
                self.concentrations[r2.start + n2] += 1.0;
            }
        }
        if let RewardPosterior::BetaSigned { alpha, beta } = &mut self.reward {
            if step.reward > 0.0 {
                alpha[tuple] += 1.0;
            } else {
                beta[tuple] += 1.0;
            }
        }
        self.visit_counts[tuple] += 1;
        self.transition_counts[tuple * n + step.next_state] += 1;
        Ok(())
    }

    /// Conditions on a batch of steps, e.g. a completed episode.
    pub fn update_all(&mut self, steps: &[Step]) -> Result<()> {
        steps.iter().try_for_each(|s| self.update(s))
    }

    /// Posterior mean of the next-state distribution for `(s, a, b)`.
    pub fn mean_transition(&self, s: usize, a: usize, b: usize) -> Vec<f64> {
        let n = self.shape.num_states;
        match self.factorization {
            Factorization::Joint => {
                let t = self.shape.tuple_index(s, a, b);
                let row = &self.concentrations[t * n..(t + 1) * n];
                let total: f64 = row.iter().sum();
                row.iter().map(|c| c / total).collect()
            }
            Factorization::PerPlayerDecoupled { cells } => {
                let m1 = normalized(&self.concentrations[self.p1_row(s / cells, a)]);
                let m2 = normalized(&self.concentrations[self.p2_row(s % cells, b)]);
                m1.iter().flat_map(|x| m2.iter().map(move |y| x * y)).collect()
            }
        }
    }

    /// Draws a full game from the posterior.
    pub fn sample_model<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<MarkovGame> {
        let n = self.shape.num_states;
        let tuples = self.shape.num_tuples();
        let mut transition = vec![0.0; tuples * n];
        match self.factorization {
            Factorization::Joint => {
                for (alpha, out) in self
                    .concentrations
                    .chunks_exact(n)
                    .zip(transition.chunks_exact_mut(n))
                {
                    sample_dirichlet(alpha, rng, out);
                }
            }
            Factorization::PerPlayerDecoupled { cells } => {
                let mut sampled = vec![0.0; self.concentrations.len()];
                for (alpha, out) in self
                    .concentrations
                    .chunks_exact(cells)
                    .zip(sampled.chunks_exact_mut(cells))
                {
                    sample_dirichlet(alpha, rng, out);
                }
                let (na, nb) = (self.shape.num_actions_p1, self.shape.num_actions_p2);
                for s in 0..n {
                    let (c1, c2) = (s / cells, s % cells);
                    for a in 0..na {
                        let x = &sampled[self.p1_row(c1, a)];
                        for b in 0..nb {
                            let y = &sampled[self.p2_row(c2, b)];
                            let t = self.shape.tuple_index(s, a, b);
                            let row = &mut transition[t * n..(t + 1) * n];
                            for (i, xi) in x.iter().enumerate() {
                                for (j, yj) in y.iter().enumerate() {
                                    row[i * cells + j] = xi * yj;
                                }
                            }
                            renormalize(row);
                        }
                    }
                }
            }
        }
        let reward = match &self.reward {
            RewardPosterior::Known { kind, mean } => RewardSpec {
                kind: *kind,
                mean: mean.clone(),
            },
            RewardPosterior::BetaSigned { alpha, beta } => {
                let mut mean = Vec::with_capacity(tuples);
                for (&a, &b) in alpha.iter().zip(beta) {
                    let dist = Beta::new(a, b)
                        .map_err(|e| Error::Numerical(format!("beta({a}, {b}): {e}")))?;
                    let p: f64 = dist.sample(rng);
                    mean.push((2.0 * p - 1.0).clamp(-1.0, 1.0));
                }
                RewardSpec {
                    kind: RewardKind::BernoulliSigned,
                    mean,
                }
            }
        };
        MarkovGame::new(self.shape.clone(), transition, reward)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

fn normalized(row: &[f64]) -> Vec<f64> {
    let total: f64 = row.iter().sum();
    row.iter().map(|c| c / total).collect()
}

/// Natural log of a `Gamma(shape, 1)` draw.
///
/// Shapes below one use `G(a) = G(a + 1) * U^(1/a)`, evaluated in log space:
/// with small shapes such as `1/9` the direct draw underflows to zero far
/// too often.
fn ln_gamma_draw<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    let boosted = if shape < 1.0 { shape + 1.0 } else { shape };
    let g: f64 = Gamma::new(boosted, 1.0)
        .expect("shape is positive and finite")
        .sample(rng);
    let mut ln = g.max(f64::MIN_POSITIVE).ln();
    if shape < 1.0 {
        let u = 1.0 - rng.random::<f64>();
        ln += u.ln() / shape;
    }
    ln
}

/// Dirichlet draw via normalized Gamma variates.
pub fn sample_dirichlet<R: Rng + ?Sized>(alpha: &[f64], rng: &mut R, out: &mut [f64]) {
    debug_assert_eq!(alpha.len(), out.len());
    for (o, &a) in out.iter_mut().zip(alpha) {
        *o = ln_gamma_draw(a, rng);
    }
    let max = out.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    out.iter_mut().for_each(|x| *x = (*x - max).exp());
    renormalize(out);
}

/// Monte-Carlo estimates of `E[g(M*, h)]` and `E[g(M_k, h)]`, where `M*` is
/// drawn from `prior`, `h` is `episodes` episodes of uniformly random play
/// in `M*`, and `M_k` is drawn from the posterior given `h`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SamplingCheck {
    pub mean_true: f64,
    pub mean_sampled: f64,
    /// Standard error of `mean_true - mean_sampled` from the two samples.
    pub stderr: f64,
}

pub fn posterior_sampling_check<G>(
    prior: &PosteriorState,
    num_trials: usize,
    episodes: usize,
    seed: u64,
    g: G,
) -> Result<SamplingCheck>
where
    G: Fn(&MarkovGame, &[Step]) -> f64,
{
    if num_trials == 0 {
        return Err(Error::InvalidInput("need at least one trial".into()));
    }
    let shape = prior.shape();
    let mu = Policy::uniform(shape.num_states, shape.num_actions_p1, shape.horizon);
    let nu = Policy::uniform(shape.num_states, shape.num_actions_p2, shape.horizon);
    let mut truth = Vec::with_capacity(num_trials);
    let mut sampled = Vec::with_capacity(num_trials);
    for trial in 0..num_trials {
        let mut rng = stream_rng(seed, 0, trial as u64);
        let true_game = prior.sample_model(&mut rng)?;
        let mut post = prior.clone();
        let mut history = Vec::with_capacity(episodes * shape.horizon);
        for _ in 0..episodes {
            let steps = simulate_episode(&true_game, &mu, &nu, &mut rng)?;
            post.update_all(&steps)?;
            history.extend(steps);
        }
        let draw = post.sample_model(&mut rng)?;
        truth.push(g(&true_game, &history));
        sampled.push(g(&draw, &history));
    }
    let (mt, vt) = mean_var(&truth);
    let (ms, vs) = mean_var(&sampled);
    let n = num_trials as f64;
    Ok(SamplingCheck {
        mean_true: mt,
        mean_sampled: ms,
        stderr: (vt / n + vs / n).sqrt(),
    })
}

/// Sample mean and unbiased variance (zero for a single value).
pub(crate) fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}
