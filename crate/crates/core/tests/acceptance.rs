//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use zerosum_ps::agents::AgentKind;
use zerosum_ps::bayes::PriorSpec;
use zerosum_ps::diagnostics::{lemma6_identity_check, upsilon, upsilon_bound};
use zerosum_ps::dp::{solve_equilibrium, total_reward, Policy};
use zerosum_ps::game::{
    build_predator_prey, build_random_game, random_game_with, uniform_simplex, GameShape, GridSpec,
    RewardKind, RewardSpec,
};
use zerosum_ps::harness::{run_bayesian_trials, run_seeds, MatchConfig, RunRecord};
use zerosum_ps::matrixgame::{solve_matrix_game, PayoffMatrix, DEFAULT_TOL};
use zerosum_ps::MarkovGame;

const GAP_TOL: f64 = 1e-9;
const EXACT_VALUE_TOL: f64 = 1e-12;
const STRATEGY_TOL: f64 = 1e-9;
const CLOSED_FORM_TOL: f64 = 1e-9;
const BRUTE_FORCE_TOL: f64 = 1e-9;
const NASH_TOL: f64 = 1e-8;
const IDENTITY_TOL: f64 = 1e-10;
const Z: f64 = 3.0;
const CI_Z: f64 = 1.96;
const LATE_EARLY_RATIO: f64 = 0.5;

const GRID_HORIZON: usize = 10;
const GRID_EPISODES: usize = 300;
const GRID_SEEDS: u64 = 20;

struct Outcome {
    id: u32,
    name: &'static str,
    passed: bool,
    detail: String,
    secs: f64,
    budget_secs: f64,
}

fn timed(
    id: u32,
    name: &'static str,
    budget_secs: f64,
    f: impl FnOnce() -> (bool, String),
) -> Outcome {
    let start = Instant::now();
    let (passed, detail) = f();
    Outcome {
        id,
        name,
        passed,
        detail,
        secs: start.elapsed().as_secs_f64(),
        budget_secs,
    }
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> PayoffMatrix {
    let data = (0..rows * cols).map(|_| rng.random_range(-1.0..=1.0)).collect();
    PayoffMatrix::new(rows, cols, data).unwrap()
}

fn uniform_within(p: &[f64], tol: f64) -> bool {
    let u = 1.0 / p.len() as f64;
    p.iter().all(|x| (x - u).abs() <= tol)
}

fn criterion1() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst_gap = 0.0f64;
    for _ in 0..1000 {
        let (r, c) = (rng.random_range(1..=20), rng.random_range(1..=20));
        let m = random_matrix(&mut rng, r, c);
        let sol = solve_matrix_game(&m, DEFAULT_TOL).unwrap();
        worst_gap = worst_gap.max(m.duality_gap(&sol.row_strategy, &sol.col_strategy));
    }

    let pennies = PayoffMatrix::from_rows(&[vec![1.0, -1.0], vec![-1.0, 1.0]]).unwrap();
    let rps = PayoffMatrix::from_rows(&[
        vec![0.0, -1.0, 1.0],
        vec![1.0, 0.0, -1.0],
        vec![-1.0, 1.0, 0.0],
    ])
    .unwrap();
    let exact_ok = [pennies, rps].iter().all(|m| {
        let s = solve_matrix_game(m, DEFAULT_TOL).unwrap();
        s.value.abs() <= EXACT_VALUE_TOL
            && uniform_within(&s.row_strategy, STRATEGY_TOL)
            && uniform_within(&s.col_strategy, STRATEGY_TOL)
    });

    let mut worst_closed = 0.0f64;
    let mut checked = 0;
    while checked < 100 {
        let m = random_matrix(&mut rng, 2, 2);
        let (a, b, c, d) = (m.get(0, 0), m.get(0, 1), m.get(1, 0), m.get(1, 1));
        let maximin = a.min(b).max(c.min(d));
        let minimax = a.max(c).min(b.max(d));
        if maximin == minimax {
            continue;
        }
        let closed = (a * d - b * c) / (a + d - b - c);
        let v = solve_matrix_game(&m, DEFAULT_TOL).unwrap().value;
        worst_closed = worst_closed.max((v - closed).abs());
        checked += 1;
    }
    (
        worst_gap <= GAP_TOL && exact_ok && worst_closed <= CLOSED_FORM_TOL,
        format!(
            "max gap {worst_gap:.2e} (<= {GAP_TOL:.0e}); pennies/rps exact {exact_ok}; \
             2x2 closed form max err {worst_closed:.2e} (<= {CLOSED_FORM_TOL:.0e})"
        ),
    )
}

fn single_state_game(m: &PayoffMatrix) -> MarkovGame {
    let mean = (0..m.rows())
        .flat_map(|r| (0..m.cols()).map(move |c| (r, c)))
        .map(|(r, c)| m.get(r, c))
        .collect();
    MarkovGame::new(
        GameShape {
            num_states: 1,
            num_actions_p1: m.rows(),
            num_actions_p2: m.cols(),
            horizon: 1,
            initial_dist: vec![1.0],
        },
        vec![1.0; m.rows() * m.cols()],
        RewardSpec {
            kind: RewardKind::KnownDeterministic,
            mean,
        },
    )
    .unwrap()
}

/// Best total reward over all deterministic Markov policies of player 1.
fn brute_force_single_player(game: &MarkovGame) -> f64 {
    let (s, a, h) = (game.num_states(), game.num_actions_p1(), game.horizon());
    let nu = Policy::uniform(s, 1, h);
    let slots = s * h;
    let mut best = f64::NEG_INFINITY;
    for code in 0..a.pow(slots as u32) {
        let mu = Policy::deterministic(s, a, h, |state, step| (code / a.pow((step * s + state) as u32)) % a);
        best = best.max(total_reward(game, &mu, &nu).unwrap());
    }
    best
}

fn random_deviation(rng: &mut ChaCha8Rng, s: usize, n: usize, h: usize) -> Policy {
    if rng.random_bool(0.5) {
        Policy::random(s, n, h, rng)
    } else {
        let choices: Vec<usize> = (0..s * h).map(|_| rng.random_range(0..n)).collect();
        Policy::deterministic(s, n, h, |state, step| choices[step * s + state])
    }
}

fn criterion2() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut exact = true;
    for _ in 0..50 {
        let (r, c) = (rng.random_range(1..=6), rng.random_range(1..=6));
        let m = random_matrix(&mut rng, r, c);
        let direct = solve_matrix_game(&m, DEFAULT_TOL).unwrap();
        let game = single_state_game(&m);
        let eq = solve_equilibrium(&game).unwrap();
        exact &= eq.total_value(&game) == direct.value
            && eq.mu.row(0, 0) == direct.row_strategy.as_slice()
            && eq.nu.row(0, 0) == direct.col_strategy.as_slice();
    }

    let mut worst_brute = 0.0f64;
    for seed in 0..10 {
        let game = build_random_game(3, 2, 1, 3, 100 + seed).unwrap();
        let v = solve_equilibrium(&game).unwrap().total_value(&game);
        worst_brute = worst_brute.max((v - brute_force_single_player(&game)).abs());
    }

    let mut worst_violation = f64::NEG_INFINITY;
    for g in 0..20u64 {
        let s = rng.random_range(2..=5);
        let (a, b) = (rng.random_range(2..=3), rng.random_range(2..=3));
        let h = rng.random_range(1..=5);
        let game = build_random_game(s, a, b, h, 200 + g).unwrap();
        let eq = solve_equilibrium(&game).unwrap();
        let v = eq.total_value(&game);
        for _ in 0..100 {
            let mu = random_deviation(&mut rng, s, a, h);
            let nu = random_deviation(&mut rng, s, b, h);
            let up = total_reward(&game, &mu, &eq.nu).unwrap() - v;
            let down = v - total_reward(&game, &eq.mu, &nu).unwrap();
            worst_violation = worst_violation.max(up).max(down);
        }
    }
    (
        exact && worst_brute <= BRUTE_FORCE_TOL && worst_violation <= NASH_TOL,
        format!(
            "single-state equals matrix solver bitwise {exact}; brute force max err {worst_brute:.2e} \
             (<= {BRUTE_FORCE_TOL:.0e}); worst deviation gain {worst_violation:.2e} (<= {NASH_TOL:.0e})"
        ),
    )
}

fn criterion3() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let s = rng.random_range(1..=5);
        let shape = GameShape {
            num_states: s,
            num_actions_p1: rng.random_range(1..=3),
            num_actions_p2: rng.random_range(1..=3),
            horizon: rng.random_range(1..=6),
            initial_dist: {
                let mut rho = vec![0.0; s];
                uniform_simplex(&mut rng, &mut rho);
                rho
            },
        };
        let truth = random_game_with(shape.clone(), RewardKind::KnownDeterministic, &mut rng).unwrap();
        let sampled = random_game_with(shape.clone(), RewardKind::KnownDeterministic, &mut rng).unwrap();
        let mu = Policy::random(s, shape.num_actions_p1, shape.horizon, &mut rng);
        let nu = Policy::random(s, shape.num_actions_p2, shape.horizon, &mut rng);
        worst = worst.max(lemma6_identity_check(&truth, &sampled, &mu, &nu).unwrap().abs_diff);
    }
    (worst <= IDENTITY_TOL, format!("max |lhs - rhs| {worst:.2e} over 1000 triples (<= {IDENTITY_TOL:.0e})"))
}

struct GridRuns {
    game: MarkovGame,
    vs_eq: Vec<RunRecord>,
    vs_fp: Vec<RunRecord>,
    vs_ps: Vec<RunRecord>,
}

fn grid_runs() -> GridRuns {
    let game = build_predator_prey(&GridSpec::default(), GRID_HORIZON).unwrap();
    let seeds: Vec<u64> = (0..GRID_SEEDS).collect();
    let run = |p2| {
        let cfg = MatchConfig {
            game: None,
            p1: AgentKind::PosteriorSampling,
            p2,
            prior: PriorSpec::predator_prey(9),
            episodes: GRID_EPISODES,
            master_seed: 0,
            record_trajectories: false,
        };
        run_seeds(&game, &cfg, &seeds, 0).unwrap()
    };
    GridRuns {
        vs_eq: run(AgentKind::Clairvoyant),
        vs_fp: run(AgentKind::FictitiousPlay),
        vs_ps: run(AgentKind::PosteriorSampling),
        game,
    }
}

fn criterion4(grid: &GridRuns) -> (bool, String) {
    let mut runs: Vec<(MarkovGame, RunRecord)> = Vec::new();
    for rec in grid.vs_eq.iter().chain(&grid.vs_fp).chain(&grid.vs_ps) {
        runs.push((grid.game.clone(), rec.clone()));
    }
    let long_grid = MatchConfig {
        game: None,
        p1: AgentKind::PosteriorSampling,
        p2: AgentKind::Clairvoyant,
        prior: PriorSpec::predator_prey(9),
        episodes: 500,
        master_seed: 0,
        record_trajectories: false,
    };
    for rec in run_seeds(&grid.game, &long_grid, &[100], 0).unwrap() {
        runs.push((grid.game.clone(), rec));
    }
    for (i, &(s, a, b, h)) in [(4, 2, 2, 4), (6, 3, 2, 5), (5, 3, 3, 3)].iter().enumerate() {
        let game = build_random_game(s, a, b, h, 40 + i as u64).unwrap();
        for p2 in [
            AgentKind::Clairvoyant,
            AgentKind::FictitiousPlay,
            AgentKind::PosteriorSampling,
            AgentKind::UniformRandom,
        ] {
            let cfg = MatchConfig {
                game: None,
                p1: AgentKind::PosteriorSampling,
                p2,
                prior: PriorSpec::generic(),
                episodes: 500,
                master_seed: 0,
                record_trajectories: false,
            };
            for rec in run_seeds(&game, &cfg, &[1, 2, 3], 0).unwrap() {
                runs.push((game.clone(), rec));
            }
        }
    }
    let mut violations = 0;
    let mut tightest = f64::INFINITY;
    for (game, rec) in &runs {
        let sh = game.shape();
        let bound = upsilon_bound(sh.num_states, sh.num_actions_p1, sh.num_actions_p2, sh.horizon, rec.config.episodes);
        let u = upsilon(rec);
        if u > bound {
            violations += 1;
        }
        tightest = tightest.min(bound - u);
    }
    (
        violations == 0,
        format!("{} runs, {violations} violations, smallest slack {tightest:.3e}", runs.len()),
    )
}

fn criterion5() -> (bool, String) {
    let shape = GameShape {
        num_states: 4,
        num_actions_p1: 2,
        num_actions_p2: 2,
        horizon: 4,
        initial_dist: vec![0.25; 4],
    };
    let conditioning = 5;
    let trials = run_bayesian_trials(&shape, &PriorSpec::generic_stochastic(), None, 2000, conditioning + 1, 0x5EED)
        .unwrap();
    let column = |k: usize, f: &dyn Fn(&zerosum_ps::harness::LedgerRow) -> f64| -> Vec<f64> {
        trials.iter().map(|t| f(&t.ledger.rows[k - 1])).collect()
    };
    let mut ok = true;
    let mut detail = String::new();
    for k in [1, conditioning + 1] {
        let (d, d_se) = mean_se(&column(k, &|r| r.delta));
        let (h1, h1_se) = mean_se(&column(k, &|r| r.delta_hat_1.unwrap()));
        let (h2, h2_se) = mean_se(&column(k, &|r| r.delta_hat_2.unwrap()));
        let (t1, t1_se) = mean_se(&column(k, &|r| r.delta_tilde_1.unwrap()));
        let (t2, t2_se) = mean_se(&column(k, &|r| r.delta_tilde_2.unwrap()));
        let pooled = |se: f64| (se * se + d_se * d_se).sqrt();
        let eq1 = (h1 - d).abs() <= Z * pooled(h1_se);
        let eq2 = (h2 - d).abs() <= Z * pooled(h2_se);
        let lower = t2 - Z * pooled(t2_se) <= d;
        let upper = d <= t1 + Z * pooled(t1_se);
        // only the conditioned episode is asserted
        if k == conditioning + 1 {
            ok = eq1 && eq2 && lower && upper;
        }
        detail.push_str(&format!(
            "k={k}: delta {d:.4}, hat1 {h1:.4} ({:.1} se), hat2 {h2:.4} ({:.1} se), \
             tilde2 {t2:.4} <= delta <= tilde1 {t1:.4} [{}]; ",
            (h1 - d).abs() / pooled(h1_se),
            (h2 - d).abs() / pooled(h2_se),
            if lower && upper { "ok" } else { "violated" }
        ));
    }
    (ok, detail.trim_end_matches("; ").to_string())
}

fn per_episode_mean(records: &[RunRecord], range: std::ops::Range<usize>) -> f64 {
    let n = (records.len() * range.len()) as f64;
    records
        .iter()
        .flat_map(|r| r.ledger.rows[range.clone()].iter().map(|row| row.delta))
        .sum::<f64>()
        / n
}

fn criterion6(grid: &GridRuns) -> (bool, String) {
    let early = per_episode_mean(&grid.vs_eq, 0..50);
    let late = per_episode_mean(&grid.vs_eq, GRID_EPISODES - 50..GRID_EPISODES);
    let h = GRID_HORIZON as f64;
    let capped = grid
        .vs_eq
        .iter()
        .all(|r| r.ledger.rows.iter().all(|row| row.cum_regret <= 2.0 * row.episode as f64 * h));
    (
        late < LATE_EARLY_RATIO * early && capped,
        format!(
            "first-50 mean {early:.4}, last-50 mean {late:.4}, ratio {:.3} (< {LATE_EARLY_RATIO}); \
             cumulative <= 2kH on every run and episode: {capped}",
            late / early
        ),
    )
}

fn final_regrets(records: &[RunRecord]) -> Vec<f64> {
    records.iter().map(|r| r.ledger.final_regret()).collect()
}

fn criterion7(grid: &GridRuns) -> (bool, String) {
    let (eq, eq_se) = mean_se(&final_regrets(&grid.vs_eq));
    let (ps, ps_se) = mean_se(&final_regrets(&grid.vs_ps));
    let (fp, fp_se) = mean_se(&final_regrets(&grid.vs_fp));
    let ordered = eq > ps && ps > fp;
    let near_zero = ps.abs() <= CI_Z * ps_se;
    (
        ordered && near_zero,
        format!(
            "K={GRID_EPISODES}: vs eq {eq:.3} (se {eq_se:.3}) > vs ps {ps:.3} (se {ps_se:.3}) > \
             vs fp {fp:.3} (se {fp_se:.3}): {ordered}; |ps| <= {CI_Z} se: {near_zero}"
        ),
    )
}

fn run_cli(out: &Path, workers: &str) -> bool {
    Command::new(env!("CARGO_BIN_EXE_zerosum-ps"))
        .args(["run", "--preset", "paper", "--seeds", "3", "--workers", workers, "--out"])
        .arg(out)
        .env_remove("ZSPS_OUT_DIR")
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

fn criterion8() -> (bool, String) {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    if !run_cli(&a, "1") || !run_cli(&b, "2") {
        return (false, "cli run failed".into());
    }
    let mut compared = 0;
    let mut identical = true;
    for entry in std::fs::read_dir(&a).unwrap() {
        let name = entry.unwrap().file_name();
        if !name.to_string_lossy().ends_with(".csv") {
            continue;
        }
        let left = std::fs::read(a.join(&name)).unwrap();
        let right = std::fs::read(b.join(&name)).unwrap_or_default();
        identical &= left == right;
        compared += 1;
    }
    (
        identical && compared == 6,
        format!("{compared} CSV files compared across two executions: byte-identical {identical}"),
    )
}

fn main() {
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let mut outcomes = vec![
        timed(1, "matrix-game solver", 10.0, criterion1),
        timed(2, "dynamic programming", 30.0, criterion2),
        timed(3, "value-gap identity", 60.0, criterion3),
    ];
    let start = Instant::now();
    let grid = grid_runs();
    let grid_secs = start.elapsed().as_secs_f64();
    outcomes.push(timed(4, "accumulator bound", f64::INFINITY, || criterion4(&grid)));
    outcomes.push(timed(5, "posterior-sampling identities", 300.0, criterion5));
    let mut c6 = timed(6, "sublinear regret", 900.0, || criterion6(&grid));
    c6.secs += grid_secs;
    outcomes.push(c6);
    outcomes.push(timed(7, "pairing order", f64::INFINITY, || criterion7(&grid)));
    outcomes.push(timed(8, "determinism", f64::INFINITY, criterion8));

    let mut failed = 0;
    for o in &outcomes {
        let in_budget = o.secs <= o.budget_secs;
        let pass = o.passed && in_budget;
        failed += usize::from(!pass);
        let budget = if o.budget_secs.is_finite() {
            format!(" (budget {:.0} s)", o.budget_secs)
        } else {
            String::new()
        };
        println!(
            "criterion {} {}: {} | {} | {:.1} s{budget}",
            o.id,
            o.name,
            if pass { "PASS" } else { "FAIL" },
            o.detail,
            o.secs
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
