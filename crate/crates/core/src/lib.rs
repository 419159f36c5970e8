//! Posterior sampling in episodic two-player zero-sum Markov games.
//!
//! The crate solves matrix games and finite-horizon Markov games exactly,
//! runs posterior-sampling and baseline agents against each other, and
//! records per-episode regret together with the quantities used to bound it.

pub mod agents;
pub mod bayes;
pub mod config;
pub mod diagnostics;
pub mod dp;
pub mod error;
pub mod game;
pub mod harness;
pub mod matrixgame;
pub mod seeding;
pub mod simplex;

pub use error::{Error, Result};
pub use game::{GameShape, MarkovGame, RewardKind, RewardSpec, Step};
pub use matrixgame::{solve_matrix_game, MatrixGameSolution, PayoffMatrix};
