//! Episodic matches between two agents, exact per-episode regret, and
//! multi-seed aggregation.

use std::io::{Read, Write};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agents::{Agent, AgentKind, Role};
use crate::bayes::{init_prior, mean_var, PriorSpec};
use crate::diagnostics::UpsilonAccumulator;
use crate::dp::{evaluate_policies, simulate_episode, solve_equilibrium, total_reward};
use crate::error::{Error, Result};
use crate::game::{GameShape, GameSource, MarkovGame, RewardSpec, Step};
use crate::seeding::{stream_rng, ENV_STREAM, P1_STREAM, P2_STREAM};

/// Column names of the per-episode CSV, in order.
pub const CSV_HEADER: [&str; 11] = [
    "run_id",
    "seed",
    "episode",
    "delta_k",
    "cum_regret",
    "delta_hat_1",
    "delta_hat_2",
    "delta_tilde_1",
    "delta_tilde_2",
    "upsilon_partial",
    "bound_value",
];

pub const SUMMARY_HEADER: [&str; 6] = ["episode", "runs", "mean_cum_regret", "stderr", "ci_low", "ci_high"];

/// Settings for one match.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchConfig {
    /// Where the true game came from; informational.
    #[serde(default)]
    pub game: Option<GameSource>,
    pub p1: AgentKind,
    pub p2: AgentKind,
    pub prior: PriorSpec,
    pub episodes: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub record_trajectories: bool,
}

/// One episode of a match.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LedgerRow {
    /// 1-based.
    pub episode: usize,
    /// `J*(mu*, nu*) - J*(mu_k, nu_k)` under the true game.
    pub delta: f64,
    pub cum_regret: f64,
    /// `J^{M1}(mu_k, nu~_k) - J*(mu_k, nu_k)`; present when player 1 sampled.
    pub delta_hat_1: Option<f64>,
    /// `J^{M2}(mu~_k, nu_k) - J*(mu_k, nu_k)`; present when player 2 sampled.
    pub delta_hat_2: Option<f64>,
    /// `J^{M1}(mu_k, nu_k) - J*(mu_k, nu_k)`.
    pub delta_tilde_1: Option<f64>,
    pub delta_tilde_2: Option<f64>,
    pub upsilon_partial: f64,
    pub bound_value: f64,
    /// `(s, a, b)` at each step of the episode.
    pub visited: Vec<(usize, usize, usize)>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RegretLedger {
    pub rows: Vec<LedgerRow>,
}

impl RegretLedger {
    pub fn cumulative(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.cum_regret).collect()
    }

    pub fn final_regret(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.cum_regret)
    }
}

/// Everything needed to inspect or replay a match.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: usize,
    pub config: MatchConfig,
    pub master_seed: u64,
    pub shape: GameShape,
    pub equilibrium_value: f64,
    pub ledger: RegretLedger,
    #[serde(default)]
    pub trajectories: Option<Vec<Vec<Step>>>,
    pub wall_clock_secs: f64,
}

impl RunRecord {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// `min(37 H S sqrt(A B K H ln(S A B K H)), 2 K H)`.
pub fn theorem1_bound(
    num_states: usize,
    num_actions_p1: usize,
    num_actions_p2: usize,
    horizon: usize,
    episodes: usize,
) -> f64 {
    let (s, a, b, h, k) = (
        num_states as f64,
        num_actions_p1 as f64,
        num_actions_p2 as f64,
        horizon as f64,
        episodes as f64,
    );
    let log = (s * a * b * k * h).ln().max(0.0);
    (37.0 * h * s * (a * b * k * h * log).sqrt()).min(2.0 * k * h)
}

fn make_agent(
    kind: AgentKind,
    role: Role,
    true_game: &MarkovGame,
    prior: &PriorSpec,
) -> Result<Agent> {
    let shape = true_game.shape();
    Ok(match kind {
        AgentKind::PosteriorSampling => {
            Agent::posterior_sampling(role, init_prior(shape, prior, Some(true_game.reward()))?)
        }
        AgentKind::FictitiousPlay => Agent::fictitious_play(role, shape),
        AgentKind::Clairvoyant => Agent::clairvoyant(role, true_game)?,
        AgentKind::UniformRandom => Agent::uniform_random(role, shape),
    })
}

/// Plays `config.episodes` episodes on `true_game`.
///
/// Player 1 draws from stream `P1_STREAM`, player 2 from `P2_STREAM` and the
/// environment (including both players' action draws) from `ENV_STREAM`,
/// each indexed by the 1-based episode number.
pub fn run_match(true_game: &MarkovGame, config: &MatchConfig) -> Result<RunRecord> {
    run_match_with_agents(
        true_game,
        config,
        make_agent(config.p1, Role::Maximizer, true_game, &config.prior)?,
        make_agent(config.p2, Role::Minimizer, true_game, &config.prior)?,
    )
}

/// Like [`run_match`] with caller-built agents.
pub fn run_match_with_agents(
    true_game: &MarkovGame,
    config: &MatchConfig,
    mut p1: Agent,
    mut p2: Agent,
) -> Result<RunRecord> {
    if config.episodes == 0 {
        return Err(Error::InvalidInput("a match needs at least one episode".into()));
    }
    if p1.role() != Role::Maximizer || p2.role() != Role::Minimizer {
        return Err(Error::InvalidInput("agents must be (maximizer, minimizer)".into()));
    }
    let started = Instant::now();
    let shape = true_game.shape().clone();
    let rho = true_game.initial_dist();
    let j_star = solve_equilibrium(true_game)?.total_value(true_game);
    let mut upsilon = UpsilonAccumulator::new(&shape, config.episodes);
    let mut rows = Vec::with_capacity(config.episodes);
    let mut trajectories = config.record_trajectories.then(Vec::new);
    let mut cum = 0.0;

    for k in 1..=config.episodes {
        let idx = k as u64;
        let sel1 = p1.select(&mut stream_rng(config.master_seed, P1_STREAM, idx))?;
        let sel2 = p2.select(&mut stream_rng(config.master_seed, P2_STREAM, idx))?;
        let (mu, nu) = (&sel1.policy, &sel2.policy);

        let j_played = total_reward(true_game, mu, nu)?;
        let delta = j_star - j_played;
        cum += delta;

        let (delta_hat_1, delta_tilde_1) = match &sel1.sample {
            Some((model, companion)) => (
                Some(evaluate_policies(model, mu, companion)?.expected_initial(rho) - j_played),
                Some(evaluate_policies(model, mu, nu)?.expected_initial(rho) - j_played),
            ),
            None => (None, None),
        };
        let (delta_hat_2, delta_tilde_2) = match &sel2.sample {
            Some((model, companion)) => (
                Some(evaluate_policies(model, companion, nu)?.expected_initial(rho) - j_played),
                Some(evaluate_policies(model, mu, nu)?.expected_initial(rho) - j_played),
            ),
            None => (None, None),
        };

        let episode = simulate_episode(
            true_game,
            mu,
            nu,
            &mut stream_rng(config.master_seed, ENV_STREAM, idx),
        )?;
        p1.observe(&episode)?;
        p2.observe(&episode)?;

        let visited: Vec<_> = episode
            .iter()
            .map(|s| (s.state, s.action_p1, s.action_p2))
            .collect();
        let upsilon_partial = upsilon.add_episode(&visited);
        rows.push(LedgerRow {
            episode: k,
            delta,
            cum_regret: cum,
            delta_hat_1,
            delta_hat_2,
            delta_tilde_1,
            delta_tilde_2,
            upsilon_partial,
            bound_value: theorem1_bound(
                shape.num_states,
                shape.num_actions_p1,
                shape.num_actions_p2,
                shape.horizon,
                k,
            ),
            visited,
        });
        if let Some(t) = trajectories.as_mut() {
            t.push(episode);
        }
    }

    Ok(RunRecord {
        run_id: 0,
        config: config.clone(),
        master_seed: config.master_seed,
        shape,
        equilibrium_value: j_star,
        ledger: RegretLedger { rows },
        trajectories,
        wall_clock_secs: started.elapsed().as_secs_f64(),
    })
}

/// Runs one match per seed on a pool of `workers` threads (0 picks the
/// default). Records come back in seed order with `run_id` = position.
pub fn run_seeds(
    true_game: &MarkovGame,
    base: &MatchConfig,
    seeds: &[u64],
    workers: usize,
) -> Result<Vec<RunRecord>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidInput(format!("worker pool: {e}")))?;
    pool.install(|| {
        seeds
            .par_iter()
            .enumerate()
            .map(|(i, &seed)| {
                let config = MatchConfig {
                    master_seed: seed,
                    ..base.clone()
                };
                let mut record = run_match(true_game, &config)?;
                record.run_id = i;
                Ok(record)
            })
            .collect()
    })
}

/// Mean cumulative regret at one episode across runs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub episode: usize,
    pub runs: usize,
    pub mean: f64,
    /// Sample standard deviation over `sqrt(runs)`; zero for a single run.
    pub stderr: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Per-episode mean and `mean +- 1.96 stderr` of cumulative regret.
pub fn aggregate_runs(records: &[RunRecord]) -> Result<Vec<SummaryRow>> {
    let curves: Vec<Vec<f64>> = records.iter().map(|r| r.ledger.cumulative()).collect();
    aggregate_curves(&curves)
}

/// [`aggregate_runs`] over bare cumulative-regret curves.
pub fn aggregate_curves(curves: &[Vec<f64>]) -> Result<Vec<SummaryRow>> {
    let Some(first) = curves.first() else {
        return Err(Error::InvalidInput("no runs to aggregate".into()));
    };
    if curves.iter().any(|c| c.len() != first.len()) {
        return Err(Error::Shape("runs differ in episode count".into()));
    }
    let n = curves.len();
    Ok((0..first.len())
        .map(|i| {
            let column: Vec<f64> = curves.iter().map(|c| c[i]).collect();
            let (mean, var) = mean_var(&column);
            let stderr = if n > 1 { (var / n as f64).sqrt() } else { 0.0 };
            SummaryRow {
                episode: i + 1,
                runs: n,
                mean,
                stderr,
                ci_low: mean - 1.96 * stderr,
                ci_high: mean + 1.96 * stderr,
            }
        })
        .collect())
}

fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

/// Writes the per-episode CSV for `records`.
pub fn write_csv<W: Write>(records: &[RunRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for rec in records {
        for row in &rec.ledger.rows {
            w.write_record([
                rec.run_id.to_string(),
                rec.master_seed.to_string(),
                row.episode.to_string(),
                fmt_f64(row.delta),
                fmt_f64(row.cum_regret),
                fmt_opt(row.delta_hat_1),
                fmt_opt(row.delta_hat_2),
                fmt_opt(row.delta_tilde_1),
                fmt_opt(row.delta_tilde_2),
                fmt_f64(row.upsilon_partial),
                fmt_f64(row.bound_value),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary_csv<W: Write>(summary: &[SummaryRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_HEADER)?;
    for row in summary {
        w.write_record([
            row.episode.to_string(),
            row.runs.to_string(),
            fmt_f64(row.mean),
            fmt_f64(row.stderr),
            fmt_f64(row.ci_low),
            fmt_f64(row.ci_high),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One parsed row of the per-episode CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct CsvRow {
    pub run_id: usize,
    pub seed: u64,
    pub episode: usize,
    pub delta_k: f64,
    pub cum_regret: f64,
    pub delta_hat_1: Option<f64>,
    pub delta_hat_2: Option<f64>,
    pub delta_tilde_1: Option<f64>,
    pub delta_tilde_2: Option<f64>,
    pub upsilon_partial: f64,
    pub bound_value: f64,
}

fn parse_field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, line: u64) -> Result<T> {
    rec[i]
        .parse()
        .map_err(|_| Error::InvalidInput(format!("line {line}: bad {} value {:?}", CSV_HEADER[i], &rec[i])))
}

fn parse_opt(rec: &csv::StringRecord, i: usize, line: u64) -> Result<Option<f64>> {
    if rec[i].is_empty() {
        Ok(None)
    } else {
        parse_field(rec, i, line).map(Some)
    }
}

/// Parses and validates a per-episode CSV: header, field types, episodes
/// numbered 1.. within each run, and cumulative regret equal to the running
/// sum of `delta_k`.
pub fn read_csv<R: Read>(input: R) -> Result<Vec<CsvRow>> {
    let mut reader = csv::Reader::from_reader(input);
    let header = reader.headers()?.clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(Error::InvalidInput(format!("unexpected header {:?}", header.iter().collect::<Vec<_>>())));
    }
    let mut rows: Vec<CsvRow> = Vec::new();
    let mut running = 0.0;
    for rec in reader.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != CSV_HEADER.len() {
            return Err(Error::InvalidInput(format!("line {line}: expected {} fields", CSV_HEADER.len())));
        }
        let row = CsvRow {
            run_id: parse_field(&rec, 0, line)?,
            seed: parse_field(&rec, 1, line)?,
            episode: parse_field(&rec, 2, line)?,
            delta_k: parse_field(&rec, 3, line)?,
            cum_regret: parse_field(&rec, 4, line)?,
            delta_hat_1: parse_opt(&rec, 5, line)?,
            delta_hat_2: parse_opt(&rec, 6, line)?,
            delta_tilde_1: parse_opt(&rec, 7, line)?,
            delta_tilde_2: parse_opt(&rec, 8, line)?,
            upsilon_partial: parse_field(&rec, 9, line)?,
            bound_value: parse_field(&rec, 10, line)?,
        };
        let expected_episode = match rows.last() {
            Some(prev) if prev.run_id == row.run_id => prev.episode + 1,
            _ => {
                running = 0.0;
                1
            }
        };
        if row.episode != expected_episode {
            return Err(Error::InvalidInput(format!(
                "line {line}: episode {} where {expected_episode} was expected",
                row.episode
            )));
        }
        running += row.delta_k;
        if running != row.cum_regret {
            return Err(Error::InvalidInput(format!("line {line}: cum_regret is not the running sum")));
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Cumulative-regret curves per run from parsed CSV rows, in file order.
pub fn curves_from_csv(rows: &[CsvRow]) -> Vec<Vec<f64>> {
    let mut curves: Vec<Vec<f64>> = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        if i == 0 || rows[i - 1].run_id != row.run_id {
            curves.push(Vec::new());
        }
        curves.last_mut().expect("pushed above").push(row.cum_regret);
    }
    curves
}

/// Ledger of one trial in which the true game is itself drawn from the prior.
#[derive(Clone, Debug)]
pub struct BayesianTrial {
    pub true_game: MarkovGame,
    pub ledger: RegretLedger,
}

/// PS vs PS on `trials` games drawn from the prior. The draw uses the same
/// construction as the players' own posterior samples. Trial `i` draws its
/// game from stream `(seed, ENV_STREAM, 0)` of master seed `seed + i`.
pub fn run_bayesian_trials(
    shape: &GameShape,
    prior: &PriorSpec,
    known_reward: Option<&RewardSpec>,
    trials: usize,
    episodes: usize,
    seed: u64,
) -> Result<Vec<BayesianTrial>> {
    let prior_state = init_prior(shape, prior, known_reward)?;
    (0..trials as u64)
        .map(|i| {
            let master = seed.wrapping_add(i);
            let true_game = prior_state.sample_model(&mut stream_rng(master, ENV_STREAM, 0))?;
            let config = MatchConfig {
                game: None,
                p1: AgentKind::PosteriorSampling,
                p2: AgentKind::PosteriorSampling,
                prior: prior.clone(),
                episodes,
                master_seed: master,
                record_trajectories: false,
            };
            let record = run_match_with_agents(
                &true_game,
                &config,
                Agent::posterior_sampling(Role::Maximizer, prior_state.clone()),
                Agent::posterior_sampling(Role::Minimizer, prior_state.clone()),
            )?;
            Ok(BayesianTrial {
                true_game,
                ledger: record.ledger,
            })
        })
        .collect()
}
