//! Tabular two-player zero-sum Markov games and benchmark instances.
//!
//! Player 1 (the maximizer) picks actions from `0..num_actions_p1`, player 2
//! (the minimizer) from `0..num_actions_p2`. Rewards are paid to player 1;
//! player 2 receives the negation.
//!
//! Transition probabilities are stored densely, indexed `(s, a, b, s')`.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used when validating that rows are probability vectors.
pub const SIMPLEX_TOL: f64 = 1e-12;

/// How rewards are drawn around their mean.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RewardKind {
    /// The reward equals its mean.
    KnownDeterministic,
    /// The reward is `+1` with probability `(1 + mean) / 2`, else `-1`.
    BernoulliSigned,
}

/// Reward model: a kind plus a mean table indexed `(s, a, b)`.
#[derive(Clone, Debug, PartialEq)]
pub struct RewardSpec {
    pub kind: RewardKind,
    pub mean: Vec<f64>,
}

/// The parts of a game that are known to both players: sizes, horizon and
/// initial-state distribution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameShape {
    pub num_states: usize,
    pub num_actions_p1: usize,
    pub num_actions_p2: usize,
    pub horizon: usize,
    pub initial_dist: Vec<f64>,
}

impl GameShape {
    pub fn num_tuples(&self) -> usize {
        self.num_states * self.num_actions_p1 * self.num_actions_p2
    }

    #[inline]
    pub fn tuple_index(&self, s: usize, a: usize, b: usize) -> usize {
        (s * self.num_actions_p1 + a) * self.num_actions_p2 + b
    }

    /// Inverse of [`GameShape::tuple_index`].
    pub fn tuple_of(&self, index: usize) -> (usize, usize, usize) {
        let b = index % self.num_actions_p2;
        let rest = index / self.num_actions_p2;
        (rest / self.num_actions_p1, rest % self.num_actions_p1, b)
    }

    pub fn check_tuple(&self, s: usize, a: usize, b: usize) -> Result<()> {
        if s >= self.num_states || a >= self.num_actions_p1 || b >= self.num_actions_p2 {
            return Err(Error::Index(format!(
                "(s={s}, a={a}, b={b}) outside S={}, A={}, B={}",
                self.num_states, self.num_actions_p1, self.num_actions_p2
            )));
        }
        Ok(())
    }
}

/// One step of play: the state, both actions, the reward and the successor.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub state: usize,
    pub action_p1: usize,
    pub action_p2: usize,
    pub reward: f64,
    pub next_state: usize,
}

/// A finite-horizon two-player zero-sum Markov game. Immutable once built.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GameDocument", into = "GameDocument")]
pub struct MarkovGame {
    shape: GameShape,
    transition: Vec<f64>,
    reward: RewardSpec,
}

impl MarkovGame {
    /// Builds a game from a flat `(s, a, b, s')` transition tensor and a flat
    /// `(s, a, b)` reward table, checking every invariant.
    pub fn new(shape: GameShape, transition: Vec<f64>, reward: RewardSpec) -> Result<Self> {
        let GameShape {
            num_states,
            num_actions_p1,
            num_actions_p2,
            horizon,
            ..
        } = shape;
        if num_states == 0 || num_actions_p1 == 0 || num_actions_p2 == 0 || horizon == 0 {
            return Err(Error::InvalidSpec(format!(
                "dimensions must be positive (S={num_states}, A={num_actions_p1}, B={num_actions_p2}, H={horizon})"
            )));
        }
        if shape.initial_dist.len() != num_states {
            return Err(Error::Shape(format!(
                "initial distribution has length {}, expected {num_states}",
                shape.initial_dist.len()
            )));
        }
        check_simplex(&shape.initial_dist, "initial distribution")?;
        let tuples = shape.num_tuples();
        if transition.len() != tuples * num_states {
            return Err(Error::Shape(format!(
                "transition tensor has {} entries, expected {}",
                transition.len(),
                tuples * num_states
            )));
        }
        for (i, row) in transition.chunks_exact(num_states).enumerate() {
            let (s, a, b) = shape.tuple_of(i);
            check_simplex(row, &format!("transition row ({s}, {a}, {b})"))?;
        }
        if reward.mean.len() != tuples {
            return Err(Error::Shape(format!(
                "reward table has {} entries, expected {tuples}",
                reward.mean.len()
            )));
        }
        if let Some(bad) = reward.mean.iter().find(|r| !(-1.0..=1.0).contains(*r)) {
            return Err(Error::InvalidSpec(format!("mean reward {bad} outside [-1, 1]")));
        }
        Ok(Self {
            shape,
            transition,
            reward,
        })
    }

    pub fn shape(&self) -> &GameShape {
        &self.shape
    }

    pub fn num_states(&self) -> usize {
        self.shape.num_states
    }

    pub fn num_actions_p1(&self) -> usize {
        self.shape.num_actions_p1
    }

    pub fn num_actions_p2(&self) -> usize {
        self.shape.num_actions_p2
    }

    pub fn horizon(&self) -> usize {
        self.shape.horizon
    }

    pub fn initial_dist(&self) -> &[f64] {
        &self.shape.initial_dist
    }

    pub fn reward(&self) -> &RewardSpec {
        &self.reward
    }

    /// Flat `(s, a, b, s')` transition tensor.
    pub fn transitions(&self) -> &[f64] {
        &self.transition
    }

    /// Next-state distribution for `(s, a, b)`. Panics on out-of-range indices.
    #[inline]
    pub fn transition_row(&self, s: usize, a: usize, b: usize) -> &[f64] {
        let start = self.shape.tuple_index(s, a, b) * self.shape.num_states;
        &self.transition[start..start + self.shape.num_states]
    }

    #[inline]
    pub fn mean_reward(&self, s: usize, a: usize, b: usize) -> f64 {
        self.reward.mean[self.shape.tuple_index(s, a, b)]
    }

    /// Draws `s'` from the transition row of `(s, a, b)`.
    pub fn sample_transition<R: Rng + ?Sized>(
        &self,
        s: usize,
        a: usize,
        b: usize,
        rng: &mut R,
    ) -> Result<usize> {
        self.shape.check_tuple(s, a, b)?;
        Ok(sample_categorical(self.transition_row(s, a, b), rng))
    }

    /// Draws a reward for `(s, a, b)` according to the reward kind.
    pub fn sample_reward<R: Rng + ?Sized>(
        &self,
        s: usize,
        a: usize,
        b: usize,
        rng: &mut R,
    ) -> Result<f64> {
        self.shape.check_tuple(s, a, b)?;
        let mean = self.mean_reward(s, a, b);
        Ok(match self.reward.kind {
            RewardKind::KnownDeterministic => mean,
            RewardKind::BernoulliSigned => {
                if rng.random::<f64>() < 0.5 * (1.0 + mean) {
                    1.0
                } else {
                    -1.0
                }
            }
        })
    }

    /// The same game seen from player 2: actions swap roles and rewards are
    /// negated, so the old minimizer becomes the maximizer.
    pub fn swap_players(&self) -> MarkovGame {
        let shape = GameShape {
            num_actions_p1: self.shape.num_actions_p2,
            num_actions_p2: self.shape.num_actions_p1,
            ..self.shape.clone()
        };
        let n = self.shape.num_states;
        let mut transition = vec![0.0; self.transition.len()];
        let mut mean = vec![0.0; self.reward.mean.len()];
        for s in 0..n {
            for a in 0..self.shape.num_actions_p1 {
                for b in 0..self.shape.num_actions_p2 {
                    let dst = shape.tuple_index(s, b, a);
                    mean[dst] = -self.mean_reward(s, a, b);
                    transition[dst * n..(dst + 1) * n]
                        .copy_from_slice(self.transition_row(s, a, b));
                }
            }
        }
        MarkovGame {
            shape,
            transition,
            reward: RewardSpec {
                kind: self.reward.kind,
                mean,
            },
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }
}

/// Index of the first cumulative bucket exceeding a uniform draw. Falls back
/// to the last positive entry when rounding leaves the total just below one.
pub fn sample_categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

fn check_simplex(row: &[f64], what: &str) -> Result<()> {
    if let Some(p) = row.iter().find(|p| !p.is_finite() || **p < 0.0) {
        return Err(Error::InvalidSpec(format!("{what} has invalid entry {p}")));
    }
    let total: f64 = row.iter().sum();
    if (total - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::InvalidSpec(format!("{what} sums to {total}")));
    }
    Ok(())
}

/// Structured-text form of a game, with nested arrays for the tables.
#[derive(Serialize, Deserialize)]
struct GameDocument {
    num_states: usize,
    num_actions_p1: usize,
    num_actions_p2: usize,
    horizon: usize,
    initial_dist: Vec<f64>,
    transition: Vec<Vec<Vec<Vec<f64>>>>,
    reward: RewardDocument,
}

#[derive(Serialize, Deserialize)]
struct RewardDocument {
    kind: RewardKind,
    mean: Vec<Vec<Vec<f64>>>,
}

impl From<MarkovGame> for GameDocument {
    fn from(game: MarkovGame) -> Self {
        let shape = &game.shape;
        let transition = (0..shape.num_states)
            .map(|s| {
                (0..shape.num_actions_p1)
                    .map(|a| {
                        (0..shape.num_actions_p2)
                            .map(|b| game.transition_row(s, a, b).to_vec())
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let mean = (0..shape.num_states)
            .map(|s| {
                (0..shape.num_actions_p1)
                    .map(|a| {
                        (0..shape.num_actions_p2)
                            .map(|b| game.mean_reward(s, a, b))
                            .collect()
                    })
                    .collect()
            })
            .collect();
        GameDocument {
            num_states: shape.num_states,
            num_actions_p1: shape.num_actions_p1,
            num_actions_p2: shape.num_actions_p2,
            horizon: shape.horizon,
            initial_dist: shape.initial_dist.clone(),
            transition,
            reward: RewardDocument {
                kind: game.reward.kind,
                mean,
            },
        }
    }
}

impl TryFrom<GameDocument> for MarkovGame {
    type Error = Error;

    fn try_from(doc: GameDocument) -> Result<Self> {
        let shape = GameShape {
            num_states: doc.num_states,
            num_actions_p1: doc.num_actions_p1,
            num_actions_p2: doc.num_actions_p2,
            horizon: doc.horizon,
            initial_dist: doc.initial_dist,
        };
        let nested_len = |len: usize, want: usize, what: &str| -> Result<()> {
            if len != want {
                return Err(Error::Shape(format!("{what}: got {len} entries, expected {want}")));
            }
            Ok(())
        };
        let mut transition = Vec::with_capacity(shape.num_tuples() * shape.num_states);
        nested_len(doc.transition.len(), shape.num_states, "transition")?;
        for by_a in doc.transition {
            nested_len(by_a.len(), shape.num_actions_p1, "transition[s]")?;
            for by_b in by_a {
                nested_len(by_b.len(), shape.num_actions_p2, "transition[s][a]")?;
                for row in by_b {
                    nested_len(row.len(), shape.num_states, "transition[s][a][b]")?;
                    transition.extend(row);
                }
            }
        }
        let mut mean = Vec::with_capacity(shape.num_tuples());
        nested_len(doc.reward.mean.len(), shape.num_states, "reward.mean")?;
        for by_a in doc.reward.mean {
            nested_len(by_a.len(), shape.num_actions_p1, "reward.mean[s]")?;
            for by_b in by_a {
                nested_len(by_b.len(), shape.num_actions_p2, "reward.mean[s][a]")?;
                mean.extend(by_b);
            }
        }
        MarkovGame::new(
            shape,
            transition,
            RewardSpec {
                kind: doc.reward.kind,
                mean,
            },
        )
    }
}

/// Grid movement actions. `Up` decreases the row coordinate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Move {
    Up = 0,
    Down = 1,
    Left = 2,
    Right = 3,
}

impl Move {
    pub const ALL: [Move; 4] = [Move::Up, Move::Down, Move::Left, Move::Right];

    fn delta(self) -> (isize, isize) {
        match self {
            Move::Up => (-1, 0),
            Move::Down => (1, 0),
            Move::Left => (0, -1),
            Move::Right => (0, 1),
        }
    }

    fn opposite(self) -> Move {
        match self {
            Move::Up => Move::Down,
            Move::Down => Move::Up,
            Move::Left => Move::Right,
            Move::Right => Move::Left,
        }
    }

    fn laterals(self) -> [Move; 2] {
        match self {
            Move::Up | Move::Down => [Move::Left, Move::Right],
            Move::Left | Move::Right => [Move::Up, Move::Down],
        }
    }
}

/// Torus grid with slippery moves: the intended direction with
/// `forward_prob`, the reverse with `backward_prob`, and each orthogonal
/// direction with `lateral_prob`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub width: usize,
    pub height: usize,
    pub forward_prob: f64,
    pub backward_prob: f64,
    pub lateral_prob: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            width: 3,
            height: 3,
            forward_prob: 0.75,
            backward_prob: 0.05,
            lateral_prob: 0.1,
        }
    }
}

impl GridSpec {
    pub fn num_cells(&self) -> usize {
        self.width * self.height
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidSpec(format!(
                "grid must have positive dimensions, got {}x{}",
                self.width, self.height
            )));
        }
        let probs = [self.forward_prob, self.backward_prob, self.lateral_prob];
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidSpec(format!("invalid move probabilities {probs:?}")));
        }
        let total = self.forward_prob + self.backward_prob + 2.0 * self.lateral_prob;
        if (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InvalidSpec(format!("move probabilities sum to {total}")));
        }
        Ok(())
    }

    /// Row-major cell index.
    pub fn cell(&self, row: usize, col: usize) -> usize {
        row * self.width + col
    }

    pub fn coords(&self, cell: usize) -> (usize, usize) {
        (cell / self.width, cell % self.width)
    }

    fn step(&self, cell: usize, m: Move) -> usize {
        let (row, col) = self.coords(cell);
        let (dr, dc) = m.delta();
        let h = self.height as isize;
        let w = self.width as isize;
        let r = (row as isize + dr).rem_euclid(h) as usize;
        let c = (col as isize + dc).rem_euclid(w) as usize;
        self.cell(r, c)
    }

    /// Distribution over next cells for one player at `cell` choosing `m`.
    pub fn move_distribution(&self, cell: usize, m: Move) -> Vec<f64> {
        let mut dist = vec![0.0; self.num_cells()];
        dist[self.step(cell, m)] += self.forward_prob;
        dist[self.step(cell, m.opposite())] += self.backward_prob;
        for lateral in m.laterals() {
            dist[self.step(cell, lateral)] += self.lateral_prob;
        }
        dist
    }

    /// Euclidean distance between raw (non-wrapped) coordinates divided by
    /// the largest such distance on the grid.
    pub fn normalized_distance(&self, cell1: usize, cell2: usize) -> f64 {
        let (r1, c1) = self.coords(cell1);
        let (r2, c2) = self.coords(cell2);
        let dr = r1 as f64 - r2 as f64;
        let dc = c1 as f64 - c2 as f64;
        let max = (((self.height - 1).pow(2) + (self.width - 1).pow(2)) as f64).sqrt();
        if max == 0.0 {
            0.0
        } else {
            (dr * dr + dc * dc).sqrt() / max
        }
    }

    /// Joint state index: `p1_cell * num_cells + p2_cell`.
    pub fn state(&self, p1_cell: usize, p2_cell: usize) -> usize {
        p1_cell * self.num_cells() + p2_cell
    }

    pub fn cells_of(&self, state: usize) -> (usize, usize) {
        (state / self.num_cells(), state % self.num_cells())
    }
}

/// Two players moving independently on the same torus grid. Player 1 is paid
/// the normalized distance between them, so it flees and player 2 chases.
pub fn build_predator_prey(spec: &GridSpec, horizon: usize) -> Result<MarkovGame> {
    spec.validate()?;
    if horizon == 0 {
        return Err(Error::InvalidSpec("horizon must be positive".into()));
    }
    let cells = spec.num_cells();
    let num_states = cells * cells;
    let shape = GameShape {
        num_states,
        num_actions_p1: Move::ALL.len(),
        num_actions_p2: Move::ALL.len(),
        horizon,
        initial_dist: vec![1.0 / num_states as f64; num_states],
    };
    let moves: Vec<Vec<Vec<f64>>> = (0..cells)
        .map(|c| Move::ALL.iter().map(|&m| spec.move_distribution(c, m)).collect())
        .collect();
    let mut transition = Vec::with_capacity(shape.num_tuples() * num_states);
    let mut mean = Vec::with_capacity(shape.num_tuples());
    for s in 0..num_states {
        let (c1, c2) = spec.cells_of(s);
        let reward = spec.normalized_distance(c1, c2);
        for a in 0..4 {
            for b in 0..4 {
                let p1 = &moves[c1][a];
                let p2 = &moves[c2][b];
                for &x in p1 {
                    transition.extend(p2.iter().map(|&y| x * y));
                }
                mean.push(reward);
            }
        }
    }
    MarkovGame::new(
        shape,
        transition,
        RewardSpec {
            kind: RewardKind::KnownDeterministic,
            mean,
        },
    )
}

/// A random game: transition rows uniform on the simplex, mean rewards
/// uniform on `[-1, 1]`, uniform initial state. Deterministic in `seed`.
pub fn build_random_game(
    num_states: usize,
    num_actions_p1: usize,
    num_actions_p2: usize,
    horizon: usize,
    seed: u64,
) -> Result<MarkovGame> {
    if num_states == 0 || num_actions_p1 == 0 || num_actions_p2 == 0 || horizon == 0 {
        return Err(Error::InvalidSpec("random game dimensions must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_game_with(
        GameShape {
            num_states,
            num_actions_p1,
            num_actions_p2,
            horizon,
            initial_dist: vec![1.0 / num_states as f64; num_states],
        },
        RewardKind::KnownDeterministic,
        &mut rng,
    )
}

/// Same sampling scheme as [`build_random_game`] with a caller-owned rng.
pub fn random_game_with<R: Rng + ?Sized>(
    shape: GameShape,
    kind: RewardKind,
    rng: &mut R,
) -> Result<MarkovGame> {
    let n = shape.num_states;
    let tuples = shape.num_tuples();
    let mut transition = Vec::with_capacity(tuples * n);
    let mut row = vec![0.0; n];
    for _ in 0..tuples {
        uniform_simplex(rng, &mut row);
        transition.extend_from_slice(&row);
    }
    let mean = (0..tuples).map(|_| rng.random_range(-1.0..=1.0)).collect();
    MarkovGame::new(shape, transition, RewardSpec { kind, mean })
}

/// Uniform draw from the probability simplex (normalized exponentials).
pub fn uniform_simplex<R: Rng + ?Sized>(rng: &mut R, out: &mut [f64]) {
    for x in out.iter_mut() {
        // 1 - u lies in (0, 1], so the log is finite.
        *x = -(1.0 - rng.random::<f64>()).ln();
    }
    let total: f64 = out.iter().sum();
    if total > 0.0 {
        out.iter_mut().for_each(|x| *x /= total);
    } else {
        out.fill(1.0 / out.len() as f64);
    }
    renormalize(out);
}

/// Rescales so the entries sum to one as closely as floating point allows,
/// dumping the residual on the largest entry.
pub fn renormalize(row: &mut [f64]) {
    let total: f64 = row.iter().sum();
    if total > 0.0 {
        row.iter_mut().for_each(|x| *x /= total);
    }
    let residual = 1.0 - row.iter().sum::<f64>();
    if residual != 0.0 {
        if let Some(max) = row
            .iter_mut()
            .max_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal))
        {
            *max += residual;
        }
    }
}

/// Where an experiment's true game comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum GameSource {
    PredatorPrey {
        width: usize,
        height: usize,
    },
    Random {
        num_states: usize,
        num_actions_p1: usize,
        num_actions_p2: usize,
        seed: u64,
        /// Draw signed-Bernoulli rewards around the means instead of
        /// paying the means.
        #[serde(default)]
        stochastic_rewards: bool,
    },
    File {
        path: PathBuf,
    },
}

impl GameSource {
    /// Builds the game. File-backed games keep their own horizon.
    pub fn build(&self, horizon: usize) -> Result<MarkovGame> {
        match self {
            GameSource::PredatorPrey { width, height } => build_predator_prey(
                &GridSpec {
                    width: *width,
                    height: *height,
                    ..GridSpec::default()
                },
                horizon,
            ),
            GameSource::Random {
                num_states,
                num_actions_p1,
                num_actions_p2,
                seed,
                stochastic_rewards,
            } => {
                let game = build_random_game(*num_states, *num_actions_p1, *num_actions_p2, horizon, *seed)?;
                if !stochastic_rewards {
                    return Ok(game);
                }
                let reward = RewardSpec {
                    kind: RewardKind::BernoulliSigned,
                    mean: game.reward().mean.clone(),
                };
                MarkovGame::new(game.shape().clone(), game.transitions().to_vec(), reward)
            }
            GameSource::File { path } => MarkovGame::load(path),
        }
    }

    /// Grid structure, when the game is a predator-prey instance.
    pub fn grid(&self) -> Option<GridSpec> {
        match self {
            GameSource::PredatorPrey { width, height } => Some(GridSpec {
                width: *width,
                height: *height,
                ..GridSpec::default()
            }),
            _ => None,
        }
    }
}
