//! Finite-horizon dynamic programming over a [`MarkovGame`]: policy
//! evaluation, the min-max equilibrium recursion, and single-agent best
//! responses.
//!
//! Steps are 0-based here: step `h` runs from `0` to `H - 1`, and layer `H`
//! of a [`ValueTable`] is the all-zero terminal layer.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{sample_categorical, uniform_simplex, MarkovGame, Step};
use crate::matrixgame::{solve_matrix_game, PayoffMatrix, DEFAULT_TOL};

/// A Markov policy: one distribution over the owner's actions per `(h, s)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    num_states: usize,
    num_actions: usize,
    horizon: usize,
    dist: Vec<f64>,
}

impl Policy {
    pub fn uniform(num_states: usize, num_actions: usize, horizon: usize) -> Self {
        Self {
            num_states,
            num_actions,
            horizon,
            dist: vec![1.0 / num_actions as f64; num_states * num_actions * horizon],
        }
    }

    /// Builds a deterministic policy from `choose(s, h) -> action`.
    pub fn deterministic(
        num_states: usize,
        num_actions: usize,
        horizon: usize,
        mut choose: impl FnMut(usize, usize) -> usize,
    ) -> Self {
        let mut policy = Self {
            num_states,
            num_actions,
            horizon,
            dist: vec![0.0; num_states * num_actions * horizon],
        };
        for h in 0..horizon {
            for s in 0..num_states {
                let a = choose(s, h);
                policy.row_mut(s, h)[a] = 1.0;
            }
        }
        policy
    }

    /// Each row drawn uniformly from the simplex.
    pub fn random<R: Rng + ?Sized>(
        num_states: usize,
        num_actions: usize,
        horizon: usize,
        rng: &mut R,
    ) -> Self {
        let mut policy = Self::uniform(num_states, num_actions, horizon);
        for row in policy.dist.chunks_mut(num_actions) {
            uniform_simplex(rng, row);
        }
        policy
    }

    /// The same distribution at every step.
    pub fn stationary(num_states: usize, num_actions: usize, horizon: usize, per_state: &[f64]) -> Self {
        let mut dist = Vec::with_capacity(per_state.len() * horizon);
        for _ in 0..horizon {
            dist.extend_from_slice(per_state);
        }
        Self {
            num_states,
            num_actions,
            horizon,
            dist,
        }
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    #[inline]
    pub fn row(&self, s: usize, h: usize) -> &[f64] {
        let start = (h * self.num_states + s) * self.num_actions;
        &self.dist[start..start + self.num_actions]
    }

    #[inline]
    pub fn row_mut(&mut self, s: usize, h: usize) -> &mut [f64] {
        let start = (h * self.num_states + s) * self.num_actions;
        &mut self.dist[start..start + self.num_actions]
    }

    /// Checks that every row is a probability vector within `1e-9`.
    pub fn validate(&self) -> Result<()> {
        for (i, row) in self.dist.chunks(self.num_actions).enumerate() {
            let total: f64 = row.iter().sum();
            if row.iter().any(|p| !p.is_finite() || *p < -1e-12) || (total - 1.0).abs() > 1e-9 {
                let (h, s) = (i / self.num_states, i % self.num_states);
                return Err(Error::InvalidInput(format!(
                    "policy row (s={s}, h={h}) is not a distribution: {row:?}"
                )));
            }
        }
        Ok(())
    }

    fn check_for(&self, game: &MarkovGame, num_actions: usize, who: &str) -> Result<()> {
        if self.num_states != game.num_states()
            || self.num_actions != num_actions
            || self.horizon != game.horizon()
        {
            return Err(Error::Shape(format!(
                "{who} policy is S={} n={} H={}, game expects S={} n={num_actions} H={}",
                self.num_states,
                self.num_actions,
                self.horizon,
                game.num_states(),
                game.horizon()
            )));
        }
        Ok(())
    }
}

/// Value function for each step, with a zero terminal layer at index `H`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValueTable {
    num_states: usize,
    horizon: usize,
    v: Vec<f64>,
}

impl ValueTable {
    fn zeros(num_states: usize, horizon: usize) -> Self {
        Self {
            num_states,
            horizon,
            v: vec![0.0; num_states * (horizon + 1)],
        }
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn layer(&self, h: usize) -> &[f64] {
        &self.v[h * self.num_states..(h + 1) * self.num_states]
    }

    fn layer_mut(&mut self, h: usize) -> &mut [f64] {
        &mut self.v[h * self.num_states..(h + 1) * self.num_states]
    }

    pub fn get(&self, h: usize, s: usize) -> f64 {
        self.v[h * self.num_states + s]
    }

    /// `sum_s rho(s) V[0, s]`.
    pub fn expected_initial(&self, initial_dist: &[f64]) -> f64 {
        initial_dist.iter().zip(self.layer(0)).map(|(p, v)| p * v).sum()
    }
}

/// An equilibrium of the game together with its value table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumSolution {
    pub value: ValueTable,
    pub mu: Policy,
    pub nu: Policy,
}

impl EquilibriumSolution {
    /// Equilibrium total expected reward from the initial distribution.
    pub fn total_value(&self, game: &MarkovGame) -> f64 {
        self.value.expected_initial(game.initial_dist())
    }
}

/// `sum_{s'} theta(s'|s,a,b) next_v(s')` for every `(s, a, b)`, flat.
fn continuation(game: &MarkovGame, next_v: &[f64]) -> Vec<f64> {
    game.transitions()
        .chunks_exact(game.num_states())
        .map(|row| row.iter().zip(next_v).map(|(p, v)| p * v).sum())
        .collect()
}

/// The stage payoff `R(s,a,b) + E[next_v]` for one state, given the
/// precomputed continuation table.
fn stage_entries(game: &MarkovGame, cont: &[f64], s: usize) -> Vec<f64> {
    let shape = game.shape();
    let start = shape.tuple_index(s, 0, 0);
    let len = shape.num_actions_p1 * shape.num_actions_p2;
    (start..start + len)
        .map(|i| game.reward().mean[i] + cont[i])
        .collect()
}

/// One application of the Bellman operator at state `s` under mixed actions
/// `p` and `q`.
pub fn bellman_apply(
    game: &MarkovGame,
    p: &[f64],
    q: &[f64],
    s: usize,
    next_v: &[f64],
) -> Result<f64> {
    if p.len() != game.num_actions_p1() || q.len() != game.num_actions_p2() {
        return Err(Error::Shape(format!(
            "action distributions of length {} and {}, expected {} and {}",
            p.len(),
            q.len(),
            game.num_actions_p1(),
            game.num_actions_p2()
        )));
    }
    if next_v.len() != game.num_states() {
        return Err(Error::Shape(format!(
            "next value has length {}, expected {}",
            next_v.len(),
            game.num_states()
        )));
    }
    if s >= game.num_states() {
        return Err(Error::Index(format!("state {s} out of range")));
    }
    let mut total = 0.0;
    for (a, &pa) in p.iter().enumerate() {
        if pa == 0.0 {
            continue;
        }
        for (b, &qb) in q.iter().enumerate() {
            if qb == 0.0 {
                continue;
            }
            let next: f64 = game
                .transition_row(s, a, b)
                .iter()
                .zip(next_v)
                .map(|(t, v)| t * v)
                .sum();
            total += pa * qb * (game.mean_reward(s, a, b) + next);
        }
    }
    Ok(total)
}

/// Value of a policy pair by backward induction.
pub fn evaluate_policies(game: &MarkovGame, mu: &Policy, nu: &Policy) -> Result<ValueTable> {
    mu.check_for(game, game.num_actions_p1(), "player 1")?;
    nu.check_for(game, game.num_actions_p2(), "player 2")?;
    let (n, na, nb) = (game.num_states(), game.num_actions_p1(), game.num_actions_p2());
    let mut table = ValueTable::zeros(n, game.horizon());
    for h in (0..game.horizon()).rev() {
        let cont = continuation(game, table.layer(h + 1));
        let rewards = &game.reward().mean;
        let layer = table.layer_mut(h);
        for (s, out) in layer.iter_mut().enumerate() {
            let p = mu.row(s, h);
            let q = nu.row(s, h);
            let base = s * na * nb;
            let mut total = 0.0;
            for a in 0..na {
                if p[a] == 0.0 {
                    continue;
                }
                let mut inner = 0.0;
                for b in 0..nb {
                    let i = base + a * nb + b;
                    inner += q[b] * (rewards[i] + cont[i]);
                }
                total += p[a] * inner;
            }
            *out = total;
        }
    }
    Ok(table)
}

/// Total expected reward `J = sum_s rho(s) V[0, s]`.
pub fn total_reward(game: &MarkovGame, mu: &Policy, nu: &Policy) -> Result<f64> {
    Ok(evaluate_policies(game, mu, nu)?.expected_initial(game.initial_dist()))
}

/// Solves the min-max recursion: at each `(s, h)` the stage matrix
/// `R(s,a,b) + E[V(h+1)]` is solved as a matrix game.
pub fn solve_equilibrium(game: &MarkovGame) -> Result<EquilibriumSolution> {
    let (n, na, nb, horizon) = (
        game.num_states(),
        game.num_actions_p1(),
        game.num_actions_p2(),
        game.horizon(),
    );
    let mut value = ValueTable::zeros(n, horizon);
    let mut mu = Policy::uniform(n, na, horizon);
    let mut nu = Policy::uniform(n, nb, horizon);
    for h in (0..horizon).rev() {
        let cont = continuation(game, value.layer(h + 1));
        for s in 0..n {
            let stage = PayoffMatrix::new(na, nb, stage_entries(game, &cont, s))?;
            let sol = solve_matrix_game(&stage, DEFAULT_TOL).map_err(|e| match e {
                Error::Numerical(msg) => Error::Numerical(format!("stage (s={s}, h={h}): {msg}")),
                other => other,
            })?;
            value.layer_mut(h)[s] = sol.value;
            mu.row_mut(s, h).copy_from_slice(&sol.row_strategy);
            nu.row_mut(s, h).copy_from_slice(&sol.col_strategy);
        }
    }
    Ok(EquilibriumSolution { value, mu, nu })
}

/// Player 1's best response to a fixed `nu`: maximizes the expected reward
/// with `nu` folded into rewards and transitions. Ties go to the lowest
/// action index.
pub fn best_response_p1(game: &MarkovGame, nu: &Policy) -> Result<(Policy, ValueTable)> {
    nu.check_for(game, game.num_actions_p2(), "player 2")?;
    let (n, na, nb) = (game.num_states(), game.num_actions_p1(), game.num_actions_p2());
    let mut value = ValueTable::zeros(n, game.horizon());
    let mut choice = vec![0usize; n * game.horizon()];
    for h in (0..game.horizon()).rev() {
        let cont = continuation(game, value.layer(h + 1));
        for s in 0..n {
            let stage = stage_entries(game, &cont, s);
            let q = nu.row(s, h);
            let (best_a, best) = (0..na)
                .map(|a| (a, (0..nb).map(|b| q[b] * stage[a * nb + b]).sum::<f64>()))
                .fold((0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
            value.layer_mut(h)[s] = best;
            choice[h * n + s] = best_a;
        }
    }
    let policy = Policy::deterministic(n, na, game.horizon(), |s, h| choice[h * n + s]);
    Ok((policy, value))
}

/// Player 2's best response to a fixed `mu` (minimizing).
pub fn best_response_p2(game: &MarkovGame, mu: &Policy) -> Result<(Policy, ValueTable)> {
    mu.check_for(game, game.num_actions_p1(), "player 1")?;
    let (n, na, nb) = (game.num_states(), game.num_actions_p1(), game.num_actions_p2());
    let mut value = ValueTable::zeros(n, game.horizon());
    let mut choice = vec![0usize; n * game.horizon()];
    for h in (0..game.horizon()).rev() {
        let cont = continuation(game, value.layer(h + 1));
        for s in 0..n {
            let stage = stage_entries(game, &cont, s);
            let p = mu.row(s, h);
            let (best_b, best) = (0..nb)
                .map(|b| (b, (0..na).map(|a| p[a] * stage[a * nb + b]).sum::<f64>()))
                .fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
            value.layer_mut(h)[s] = best;
            choice[h * n + s] = best_b;
        }
    }
    let policy = Policy::deterministic(n, nb, game.horizon(), |s, h| choice[h * n + s]);
    Ok((policy, value))
}

/// Distribution of the state at each step `0..H` under `(mu, nu)` and the
/// game's dynamics, starting from the initial distribution.
pub fn state_distributions(game: &MarkovGame, mu: &Policy, nu: &Policy) -> Result<Vec<Vec<f64>>> {
    mu.check_for(game, game.num_actions_p1(), "player 1")?;
    nu.check_for(game, game.num_actions_p2(), "player 2")?;
    let n = game.num_states();
    let mut out = Vec::with_capacity(game.horizon());
    let mut current = game.initial_dist().to_vec();
    for h in 0..game.horizon() {
        let mut next = vec![0.0; n];
        for (s, &ps) in current.iter().enumerate() {
            if ps == 0.0 {
                continue;
            }
            for (a, &pa) in mu.row(s, h).iter().enumerate() {
                if pa == 0.0 {
                    continue;
                }
                for (b, &qb) in nu.row(s, h).iter().enumerate() {
                    let w = ps * pa * qb;
                    if w == 0.0 {
                        continue;
                    }
                    for (x, t) in next.iter_mut().zip(game.transition_row(s, a, b)) {
                        *x += w * t;
                    }
                }
            }
        }
        out.push(std::mem::replace(&mut current, next));
    }
    Ok(out)
}

/// Plays one episode of `H` steps. Each step records the state, both
/// actions, the sampled reward and the sampled successor; the successor of
/// the final step is drawn as well so every step is a complete transition.
pub fn simulate_episode<R: Rng + ?Sized>(
    game: &MarkovGame,
    mu: &Policy,
    nu: &Policy,
    rng: &mut R,
) -> Result<Vec<Step>> {
    mu.check_for(game, game.num_actions_p1(), "player 1")?;
    nu.check_for(game, game.num_actions_p2(), "player 2")?;
    let mut state = sample_categorical(game.initial_dist(), rng);
    let mut steps = Vec::with_capacity(game.horizon());
    for h in 0..game.horizon() {
        let a = sample_categorical(mu.row(state, h), rng);
        let b = sample_categorical(nu.row(state, h), rng);
        let reward = game.sample_reward(state, a, b, rng)?;
        let next_state = game.sample_transition(state, a, b, rng)?;
        steps.push(Step {
            state,
            action_p1: a,
            action_p2: b,
            reward,
            next_state,
        });
        state = next_state;
    }
    Ok(steps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{build_random_game, GameShape, RewardKind, RewardSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn single_state_game(rewards: &[f64], na: usize, nb: usize, horizon: usize) -> MarkovGame {
        MarkovGame::new(
            GameShape {
                num_states: 1,
                num_actions_p1: na,
                num_actions_p2: nb,
                horizon,
                initial_dist: vec![1.0],
            },
            vec![1.0; na * nb],
            RewardSpec {
                kind: RewardKind::KnownDeterministic,
                mean: rewards.to_vec(),
            },
        )
        .unwrap()
    }

    #[test]
    fn bellman_zero_continuation_deterministic_actions() {
        let game = build_random_game(3, 2, 3, 2, 1).unwrap();
        let zero = vec![0.0; 3];
        let v = bellman_apply(&game, &[0.0, 1.0], &[0.0, 0.0, 1.0], 2, &zero).unwrap();
        assert_eq!(v, game.mean_reward(2, 1, 2));
    }

    #[test]
    fn bellman_uniform_average() {
        let game = single_state_game(&[0.0, 0.0, 0.0, 1.0], 2, 2, 1);
        let v = bellman_apply(&game, &[0.5, 0.5], &[0.5, 0.5], 0, &[0.0]).unwrap();
        assert_eq!(v, 0.25);
    }

    #[test]
    fn bellman_matches_triple_loop() {
        let game = build_random_game(2, 2, 2, 1, 17).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = [0.3, 0.7];
        let q = [0.9, 0.1];
        let next_v: Vec<f64> = (0..2).map(|_| rng.random_range(-3.0..3.0)).collect();
        for s in 0..2 {
            let mut oracle = 0.0;
            for a in 0..2 {
                for b in 0..2 {
                    for s2 in 0..2 {
                        oracle += p[a] * q[b] * game.transition_row(s, a, b)[s2] * next_v[s2];
                    }
                    oracle += p[a] * q[b] * game.mean_reward(s, a, b);
                }
            }
            let v = bellman_apply(&game, &p, &q, s, &next_v).unwrap();
            assert!((v - oracle).abs() < 1e-14);
        }
    }

    #[test]
    fn bellman_shape_errors() {
        let game = build_random_game(2, 2, 2, 1, 17).unwrap();
        assert!(matches!(
            bellman_apply(&game, &[1.0], &[0.5, 0.5], 0, &[0.0, 0.0]),
            Err(Error::Shape(_))
        ));
        assert!(bellman_apply(&game, &[1.0, 0.0], &[0.5, 0.5], 0, &[0.0]).is_err());
        assert!(bellman_apply(&game, &[1.0, 0.0], &[0.5, 0.5], 5, &[0.0, 0.0]).is_err());
    }

    #[test]
    fn unit_reward_telescopes() {
        let game = single_state_game(&[1.0; 4], 2, 2, 5);
        let v = evaluate_policies(&game, &Policy::uniform(1, 2, 5), &Policy::uniform(1, 2, 5)).unwrap();
        for h in 0..=5 {
            assert_eq!(v.get(h, 0), (5 - h) as f64);
        }
    }

    #[test]
    fn horizon_one_is_expected_reward() {
        let game = build_random_game(4, 2, 3, 1, 5).unwrap();
        let mu = Policy::uniform(4, 2, 1);
        let nu = Policy::uniform(4, 3, 1);
        let v = evaluate_policies(&game, &mu, &nu).unwrap();
        for s in 0..4 {
            let mean: f64 = (0..2)
                .flat_map(|a| (0..3).map(move |b| (a, b)))
                .map(|(a, b)| game.mean_reward(s, a, b))
                .sum::<f64>()
                / 6.0;
            assert!((v.get(0, s) - mean).abs() < 1e-15);
        }
    }

    #[test]
    fn total_reward_single_state_matrix() {
        let game = single_state_game(&[2.0 / 2.0, -1.0 / 2.0, -1.0 / 2.0, 1.0 / 2.0], 2, 2, 1);
        let j = total_reward(&game, &Policy::uniform(1, 2, 1), &Policy::uniform(1, 2, 1)).unwrap();
        assert!((j - 0.125).abs() < 1e-15);
    }

    #[test]
    fn point_mass_initial_state() {
        let mut shape = build_random_game(3, 2, 2, 3, 8).unwrap().shape().clone();
        shape.initial_dist = vec![0.0, 1.0, 0.0];
        let base = build_random_game(3, 2, 2, 3, 8).unwrap();
        let game = MarkovGame::new(shape, base.transitions().to_vec(), base.reward().clone()).unwrap();
        let mu = Policy::uniform(3, 2, 3);
        let nu = Policy::uniform(3, 2, 3);
        let v = evaluate_policies(&game, &mu, &nu).unwrap();
        assert_eq!(total_reward(&game, &mu, &nu).unwrap(), v.get(0, 1));
    }

    #[test]
    fn policy_shape_mismatch() {
        let game = build_random_game(3, 2, 2, 3, 8).unwrap();
        let bad = Policy::uniform(3, 3, 3);
        let ok = Policy::uniform(3, 2, 3);
        assert!(matches!(evaluate_policies(&game, &bad, &ok), Err(Error::Shape(_))));
        assert!(evaluate_policies(&game, &ok, &Policy::uniform(3, 2, 2)).is_err());
        assert!(best_response_p2(&game, &bad).is_err());
    }

    #[test]
    fn equilibrium_single_stage_is_matrix_game() {
        let game = single_state_game(&[0.5, -0.5, -0.5, 0.25], 2, 2, 1);
        let eq = solve_equilibrium(&game).unwrap();
        let direct = solve_matrix_game(
            &PayoffMatrix::new(2, 2, vec![0.5, -0.5, -0.5, 0.25]).unwrap(),
            DEFAULT_TOL,
        )
        .unwrap();
        assert_eq!(eq.value.get(0, 0), direct.value);
        assert_eq!(eq.mu.row(0, 0), direct.row_strategy.as_slice());
        assert_eq!(eq.nu.row(0, 0), direct.col_strategy.as_slice());
    }

    #[test]
    fn trivial_action_sets() {
        let game = build_random_game(3, 1, 1, 4, 21).unwrap();
        let eq = solve_equilibrium(&game).unwrap();
        let v = evaluate_policies(&game, &Policy::uniform(3, 1, 4), &Policy::uniform(3, 1, 4)).unwrap();
        for s in 0..3 {
            assert!((eq.value.get(0, s) - v.get(0, s)).abs() < 1e-14);
        }
    }

    #[test]
    fn value_bound_holds() {
        for seed in 0..10 {
            let game = build_random_game(4, 3, 2, 6, seed).unwrap();
            let eq = solve_equilibrium(&game).unwrap();
            for h in 0..=6 {
                for s in 0..4 {
                    assert!(eq.value.get(h, s).abs() <= (6 - h) as f64 + 1e-12);
                }
            }
            assert!(eq.value.layer(6).iter().all(|&v| v == 0.0));
            eq.mu.validate().unwrap();
            eq.nu.validate().unwrap();
        }
    }

    #[test]
    fn max_min_equals_min_max_per_stage() {
        let game = build_random_game(4, 3, 2, 5, 77).unwrap();
        let eq = solve_equilibrium(&game).unwrap();
        let swapped = solve_equilibrium(&game.swap_players()).unwrap();
        for h in 0..5 {
            for s in 0..4 {
                assert!((eq.value.get(h, s) + swapped.value.get(h, s)).abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn best_response_to_equilibrium_is_unexploitable() {
        let game = build_random_game(4, 3, 3, 5, 13).unwrap();
        let eq = solve_equilibrium(&game).unwrap();
        let j_eq = eq.total_value(&game);
        let (_, v2) = best_response_p2(&game, &eq.mu).unwrap();
        let (_, v1) = best_response_p1(&game, &eq.nu).unwrap();
        assert!((v2.expected_initial(game.initial_dist()) - j_eq).abs() <= 1e-8);
        assert!((v1.expected_initial(game.initial_dist()) - j_eq).abs() <= 1e-8);
    }

    #[test]
    fn best_response_beats_random_deviations() {
        let game = build_random_game(3, 2, 3, 4, 31).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mu = Policy::random(3, 2, 4, &mut rng);
        let (br, v) = best_response_p2(&game, &mu).unwrap();
        let best = v.expected_initial(game.initial_dist());
        assert!((total_reward(&game, &mu, &br).unwrap() - best).abs() < 1e-12);
        for _ in 0..100 {
            let nu = Policy::random(3, 3, 4, &mut rng);
            assert!(best <= total_reward(&game, &mu, &nu).unwrap() + 1e-9);
        }
    }

    #[test]
    fn best_response_ignoring_opponent_is_mdp_optimum() {
        // rewards and transitions independent of b: every b column identical
        let base = build_random_game(3, 2, 1, 3, 9).unwrap();
        let mut transition = Vec::new();
        let mut mean = Vec::new();
        for s in 0..3 {
            for a in 0..2 {
                for _ in 0..2 {
                    transition.extend_from_slice(base.transition_row(s, a, 0));
                    mean.push(base.mean_reward(s, a, 0));
                }
            }
        }
        let shape = GameShape {
            num_actions_p2: 2,
            ..base.shape().clone()
        };
        let game = MarkovGame::new(
            shape,
            transition,
            RewardSpec {
                kind: RewardKind::KnownDeterministic,
                mean,
            },
        )
        .unwrap();
        let (_, v) = best_response_p1(&game, &Policy::uniform(3, 2, 3)).unwrap();
        let mdp = solve_equilibrium(&base).unwrap();
        for s in 0..3 {
            assert!((v.get(0, s) - mdp.value.get(0, s)).abs() < 1e-12);
        }
    }

    #[test]
    fn state_distributions_sum_to_one() {
        let game = build_random_game(5, 2, 2, 6, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mu = Policy::random(5, 2, 6, &mut rng);
        let nu = Policy::random(5, 2, 6, &mut rng);
        let dists = state_distributions(&game, &mu, &nu).unwrap();
        assert_eq!(dists.len(), 6);
        assert_eq!(dists[0], game.initial_dist());
        for d in dists {
            assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn simulate_episode_records_full_transitions() {
        let game = build_random_game(3, 2, 2, 7, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let steps =
            simulate_episode(&game, &Policy::uniform(3, 2, 7), &Policy::uniform(3, 2, 7), &mut rng)
                .unwrap();
        assert_eq!(steps.len(), 7);
        for w in steps.windows(2) {
            assert_eq!(w[0].next_state, w[1].state);
        }
    }
}
