//! Confidence radii, confidence sets, the clamped-radius accumulator and
//! its almost-sure bound, and the per-step decomposition of a model-value
//! gap. None of this feeds back into action selection.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dp::{evaluate_policies, state_distributions, Policy};
use crate::error::{Error, Result};
use crate::game::{random_game_with, GameShape, MarkovGame, RewardKind, Step};
use crate::harness::RunRecord;

/// Confidence radius for a tuple visited `visits` times before time `t_k`
/// (1-based) in a run of `total_episodes` episodes. Natural log.
pub fn beta_k(
    num_states: usize,
    num_actions_p1: usize,
    num_actions_p2: usize,
    total_episodes: usize,
    t_k: u64,
    visits: u64,
) -> f64 {
    let s = num_states as f64;
    let log_arg = 2.0 * s * (num_actions_p1 * num_actions_p2) as f64 * total_episodes as f64 * t_k as f64;
    (14.0 * s * log_arg.ln() / visits.max(1) as f64).sqrt()
}

/// First time step of episode `k` (both 1-based).
pub fn episode_start(k: usize, horizon: usize) -> u64 {
    ((k - 1) * horizon + 1) as u64
}

/// Almost-sure upper bound on the accumulator:
/// `12 H^2 S A B + 12 H S sqrt(7 A B K H ln(S A B K H))`.
pub fn upsilon_bound(
    num_states: usize,
    num_actions_p1: usize,
    num_actions_p2: usize,
    horizon: usize,
    total_episodes: usize,
) -> f64 {
    let (s, a, b, h, k) = (
        num_states as f64,
        num_actions_p1 as f64,
        num_actions_p2 as f64,
        horizon as f64,
        total_episodes as f64,
    );
    let log = (s * a * b * k * h).ln().max(0.0);
    12.0 * h * h * s * a * b + 12.0 * h * s * (7.0 * a * b * k * h * log).sqrt()
}

/// Running value of `(2H + 4) * sum_k sum_h min(beta_k(visited), 1) + 4H`,
/// where each episode's radii use the visit counts from its first step.
#[derive(Clone, Debug)]
pub struct UpsilonAccumulator {
    num_states: usize,
    num_actions_p1: usize,
    num_actions_p2: usize,
    horizon: usize,
    total_episodes: usize,
    counts: Vec<u64>,
    clamped_sum: f64,
    episodes: usize,
}

impl UpsilonAccumulator {
    pub fn new(shape: &GameShape, total_episodes: usize) -> Self {
        Self {
            num_states: shape.num_states,
            num_actions_p1: shape.num_actions_p1,
            num_actions_p2: shape.num_actions_p2,
            horizon: shape.horizon,
            total_episodes,
            counts: vec![0; shape.num_tuples()],
            clamped_sum: 0.0,
            episodes: 0,
        }
    }

    fn index(&self, s: usize, a: usize, b: usize) -> usize {
        (s * self.num_actions_p1 + a) * self.num_actions_p2 + b
    }

    /// Radius for a tuple at the start of the next episode.
    pub fn current_beta(&self, s: usize, a: usize, b: usize) -> f64 {
        let t_k = episode_start(self.episodes + 1, self.horizon);
        beta_k(
            self.num_states,
            self.num_actions_p1,
            self.num_actions_p2,
            self.total_episodes,
            t_k,
            self.counts[self.index(s, a, b)],
        )
    }

    /// Adds one episode's visited tuples; returns the updated value.
    pub fn add_episode(&mut self, visited: &[(usize, usize, usize)]) -> f64 {
        // Radii are frozen at the episode's first step.
        let frozen: f64 = visited
            .iter()
            .map(|&(s, a, b)| self.current_beta(s, a, b).min(1.0))
            .sum();
        self.clamped_sum += frozen;
        for &(s, a, b) in visited {
            let i = self.index(s, a, b);
            self.counts[i] += 1;
        }
        self.episodes += 1;
        self.value()
    }

    pub fn value(&self) -> f64 {
        let h = self.horizon as f64;
        (2.0 * h + 4.0) * self.clamped_sum + 4.0 * h
    }

    pub fn episodes(&self) -> usize {
        self.episodes
    }
}

/// The accumulator over a whole recorded run.
pub fn upsilon(run: &RunRecord) -> f64 {
    upsilon_prefixes(run).last().copied().unwrap_or(4.0 * run.shape.horizon as f64)
}

/// Accumulator value after each episode of the run.
pub fn upsilon_prefixes(run: &RunRecord) -> Vec<f64> {
    let mut acc = UpsilonAccumulator::new(&run.shape, run.config.episodes);
    run.ledger
        .rows
        .iter()
        .map(|row| acc.add_episode(&row.visited))
        .collect()
}

/// Radii, empirical model and membership flags at the start of an episode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceSnapshot {
    pub episode: usize,
    pub num_states: usize,
    /// Per-tuple radius, flat over `(s, a, b)`.
    pub beta: Vec<f64>,
    /// Empirical transition rows `N(s,a,b,s') / max(1, N(s,a,b))`, flat.
    pub theta_hat: Vec<f64>,
    /// Empirical mean rewards; zero for unvisited tuples.
    pub reward_hat: Vec<f64>,
    pub true_in_set: Option<bool>,
    pub sampled_in_set: Option<bool>,
    pub upsilon_partial: f64,
}

impl ConfidenceSnapshot {
    /// Builds the snapshot for `episode` (1-based) from the steps played
    /// before it.
    pub fn from_history(
        shape: &GameShape,
        total_episodes: usize,
        episode: usize,
        history: &[Step],
    ) -> Result<Self> {
        if episode == 0 {
            return Err(Error::InvalidInput("episodes are numbered from 1".into()));
        }
        let n = shape.num_states;
        let tuples = shape.num_tuples();
        let mut visits = vec![0u64; tuples];
        let mut next = vec![0u64; tuples * n];
        let mut reward_sum = vec![0.0; tuples];
        for step in history {
            shape.check_tuple(step.state, step.action_p1, step.action_p2)?;
            let t = shape.tuple_index(step.state, step.action_p1, step.action_p2);
            visits[t] += 1;
            next[t * n + step.next_state] += 1;
            reward_sum[t] += step.reward;
        }
        let t_k = episode_start(episode, shape.horizon);
        let beta = visits
            .iter()
            .map(|&v| {
                beta_k(
                    n,
                    shape.num_actions_p1,
                    shape.num_actions_p2,
                    total_episodes,
                    t_k,
                    v,
                )
            })
            .collect();
        let theta_hat = next
            .iter()
            .enumerate()
            .map(|(i, &c)| c as f64 / visits[i / n].max(1) as f64)
            .collect();
        let reward_hat = visits
            .iter()
            .zip(&reward_sum)
            .map(|(&v, &r)| if v == 0 { 0.0 } else { r / v as f64 })
            .collect();
        let mut acc = UpsilonAccumulator::new(shape, total_episodes);
        for chunk in history.chunks(shape.horizon) {
            let visited: Vec<_> = chunk
                .iter()
                .map(|s| (s.state, s.action_p1, s.action_p2))
                .collect();
            acc.add_episode(&visited);
        }
        Ok(Self {
            episode,
            num_states: n,
            beta,
            theta_hat,
            reward_hat,
            true_in_set: None,
            sampled_in_set: None,
            upsilon_partial: acc.value(),
        })
    }
}

/// Whether every transition row lies within the radius in l1 and every mean
/// reward within twice the radius of the empirical estimate.
pub fn in_confidence_set(model: &MarkovGame, snapshot: &ConfidenceSnapshot) -> bool {
    let n = snapshot.num_states;
    if model.num_states() != n || model.reward().mean.len() != snapshot.beta.len() {
        return false;
    }
    model
        .transitions()
        .chunks_exact(n)
        .zip(snapshot.theta_hat.chunks_exact(n))
        .zip(model.reward().mean.iter().zip(&snapshot.reward_hat))
        .zip(&snapshot.beta)
        .all(|(((row, hat), (r, r_hat)), &beta)| {
            let l1: f64 = row.iter().zip(hat).map(|(x, y)| (x - y).abs()).sum();
            l1 <= beta && 0.5 * (r_hat - r).abs() <= beta
        })
}

/// Both sides of the per-step value-gap identity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapIdentity {
    /// `J_sampled(mu, nu) - J_true(mu, nu)`.
    pub lhs: f64,
    /// `sum_h E_{s ~ rho_h}[(T_sampled - T_true) V_sampled(h + 1)](s)` with
    /// `rho_h` the step-`h` state distribution under the true dynamics.
    pub rhs: f64,
    pub abs_diff: f64,
}

pub fn lemma6_identity_check(
    true_game: &MarkovGame,
    sampled_game: &MarkovGame,
    mu: &Policy,
    nu: &Policy,
) -> Result<GapIdentity> {
    let (ts, ss) = (true_game.shape(), sampled_game.shape());
    if ts.num_states != ss.num_states
        || ts.num_actions_p1 != ss.num_actions_p1
        || ts.num_actions_p2 != ss.num_actions_p2
        || ts.horizon != ss.horizon
        || ts.initial_dist != ss.initial_dist
    {
        return Err(Error::Shape("true and sampled games differ in shape".into()));
    }
    let v_sampled = evaluate_policies(sampled_game, mu, nu)?;
    let v_true = evaluate_policies(true_game, mu, nu)?;
    let rho = true_game.initial_dist();
    let lhs = v_sampled.expected_initial(rho) - v_true.expected_initial(rho);

    let occupancy = state_distributions(true_game, mu, nu)?;
    let (na, nb) = (ts.num_actions_p1, ts.num_actions_p2);
    let mut rhs = 0.0;
    for (h, dist) in occupancy.iter().enumerate() {
        let next_v = v_sampled.layer(h + 1);
        for (s, &ps) in dist.iter().enumerate() {
            if ps == 0.0 {
                continue;
            }
            let p = mu.row(s, h);
            let q = nu.row(s, h);
            let mut gap = 0.0;
            for a in 0..na {
                for b in 0..nb {
                    let w = p[a] * q[b];
                    if w == 0.0 {
                        continue;
                    }
                    let reward_gap = sampled_game.mean_reward(s, a, b) - true_game.mean_reward(s, a, b);
                    let next_gap: f64 = sampled_game
                        .transition_row(s, a, b)
                        .iter()
                        .zip(true_game.transition_row(s, a, b))
                        .zip(next_v)
                        .map(|((x, y), v)| (x - y) * v)
                        .sum();
                    gap += w * (reward_gap + next_gap);
                }
            }
            rhs += ps * gap;
        }
    }
    Ok(GapIdentity {
        lhs,
        rhs,
        abs_diff: (lhs - rhs).abs(),
    })
}

/// Pass/fail summary over one recorded run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoundsReport {
    pub upsilon: f64,
    pub upsilon_bound: f64,
    pub upsilon_ok: bool,
    pub upsilon_monotone: bool,
    pub gap_samples: usize,
    pub gap_max_abs_diff: f64,
    pub gap_ok: bool,
    /// Episodes where the true game fell outside the confidence set, when
    /// trajectories were recorded.
    pub true_outside: Option<usize>,
    pub outside_threshold: Option<f64>,
    pub confidence_ok: Option<bool>,
}

impl BoundsReport {
    pub fn passed(&self) -> bool {
        self.upsilon_ok && self.upsilon_monotone && self.gap_ok && self.confidence_ok.unwrap_or(true)
    }
}

/// Tolerance for the value-gap identity.
pub const GAP_TOL: f64 = 1e-10;

/// Checks the accumulator bound, the value-gap identity on `gap_samples`
/// random sampled-model/policy pairs of the run's shape, and (with
/// trajectories) how often the true game left the confidence set.
pub fn check_bounds(
    run: &RunRecord,
    true_game: &MarkovGame,
    gap_samples: usize,
    seed: u64,
) -> Result<BoundsReport> {
    let shape = true_game.shape();
    let prefixes = upsilon_prefixes(run);
    let ups = prefixes.last().copied().unwrap_or(4.0 * shape.horizon as f64);
    let bound = upsilon_bound(
        shape.num_states,
        shape.num_actions_p1,
        shape.num_actions_p2,
        shape.horizon,
        run.config.episodes,
    );
    let monotone = prefixes.windows(2).all(|w| w[1] >= w[0]);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..gap_samples {
        let sampled = random_game_with(shape.clone(), RewardKind::KnownDeterministic, &mut rng)?;
        let mu = Policy::random(shape.num_states, shape.num_actions_p1, shape.horizon, &mut rng);
        let nu = Policy::random(shape.num_states, shape.num_actions_p2, shape.horizon, &mut rng);
        worst = worst.max(lemma6_identity_check(true_game, &sampled, &mu, &nu)?.abs_diff);
    }

    let (true_outside, outside_threshold, confidence_ok) = match &run.trajectories {
        Some(episodes) => {
            let k_total = run.config.episodes;
            let mut history = Vec::new();
            let mut outside = 0;
            for (i, episode) in episodes.iter().enumerate() {
                let snap = ConfidenceSnapshot::from_history(shape, k_total, i + 1, &history)?;
                if !in_confidence_set(true_game, &snap) {
                    outside += 1;
                }
                history.extend_from_slice(episode);
            }
            let p = 1.0 / k_total as f64;
            let threshold = episodes.len() as f64 * p
                + 3.0 * (episodes.len() as f64 * p * (1.0 - p)).sqrt();
            (Some(outside), Some(threshold), Some(outside as f64 <= threshold))
        }
        None => (None, None, None),
    };

    Ok(BoundsReport {
        upsilon: ups,
        upsilon_bound: bound,
        upsilon_ok: ups <= bound,
        upsilon_monotone: monotone,
        gap_samples,
        gap_max_abs_diff: worst,
        gap_ok: worst <= GAP_TOL,
        true_outside,
        outside_threshold,
        confidence_ok,
    })
}
