use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use zerosum_ps::agents::AgentKind;
use zerosum_ps::config::ExperimentConfig;
use zerosum_ps::diagnostics::check_bounds;
use zerosum_ps::dp::solve_equilibrium;
use zerosum_ps::game::{build_predator_prey, build_random_game, GridSpec};
use zerosum_ps::harness::{
    aggregate_runs, read_csv, run_seeds, write_csv, write_summary_csv, RunRecord, SummaryRow,
};
use zerosum_ps::matrixgame::{solve_matrix_game, PayoffMatrix, DEFAULT_TOL};
use zerosum_ps::{Error, MarkovGame, Result};

/// Overrides the output directory of `run` and `sweep` unless `--out` is given.
const OUT_DIR_ENV: &str = "ZSPS_OUT_DIR";

#[derive(Parser)]
#[command(name = "zerosum-ps", version, about = "Posterior sampling in zero-sum Markov games")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a matrix game given as a JSON array of rows.
    SolveMatrix { path: PathBuf },
    /// Solve a Markov game file and print its value and equilibrium.
    SolveGame { path: PathBuf },
    /// Write a game file.
    MakeGame(MakeGameArgs),
    /// Run matches for every configured pairing and seed.
    Run(RunArgs),
    /// Repeat `run` for several episode counts.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated episode counts.
        #[arg(long, value_delimiter = ',', required = true)]
        episodes_grid: Vec<usize>,
    },
    /// Check the accumulator bound, the value-gap identity and the
    /// confidence-set frequency for a saved run record.
    CheckBounds {
        record: PathBuf,
        /// Game file; defaults to rebuilding the game named in the record.
        #[arg(long)]
        game: Option<PathBuf>,
        #[arg(long, default_value_t = 100)]
        gap_samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct MakeGameArgs {
    /// Predator-prey grid as WIDTHxHEIGHT.
    #[arg(long, conflicts_with = "random")]
    predator_prey: Option<String>,
    /// Random game as S,A,B.
    #[arg(long, value_delimiter = ',')]
    random: Option<Vec<usize>>,
    #[arg(long, default_value_t = 10)]
    horizon: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args, Clone)]
struct RunArgs {
    /// TOML experiment file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Named preset (`paper` or `default`), applied before `--config`.
    #[arg(long)]
    preset: Option<String>,
    /// Number of seeds.
    #[arg(long)]
    seeds: Option<usize>,
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    master_seed: Option<u64>,
    #[arg(long)]
    p1: Option<AgentKind>,
    /// Comma-separated opponents.
    #[arg(long, value_delimiter = ',')]
    p2: Option<Vec<AgentKind>>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    /// Save each run record, with trajectories, as JSON.
    #[arg(long)]
    record_trajectories: bool,
    /// Check bounds on every run and save the reports.
    #[arg(long)]
    diagnostics: bool,
    /// Re-read every written CSV and check it against the schema.
    #[arg(long)]
    validate: bool,
}

impl RunArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut c = match (&self.preset, &self.config) {
            (_, Some(path)) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
                let base = match &self.preset {
                    Some(p) => ExperimentConfig::preset(p)?,
                    None => ExperimentConfig::default(),
                };
                merge_toml(base, &text)?
            }
            (Some(p), None) => ExperimentConfig::preset(p)?,
            (None, None) => ExperimentConfig::default(),
        };
        if let Some(v) = self.seeds {
            c.num_seeds = v;
        }
        if let Some(v) = self.episodes {
            c.episodes = v;
        }
        if let Some(v) = self.horizon {
            c.horizon = v;
        }
        if let Some(v) = self.master_seed {
            c.master_seed = v;
        }
        if let Some(v) = self.p1 {
            c.p1 = v;
        }
        if let Some(v) = &self.p2 {
            c.p2 = v.clone();
        }
        if let Some(v) = self.workers {
            c.workers = v;
        }
        c.record_trajectories |= self.record_trajectories;
        c.diagnostics |= self.diagnostics;
        if let Some(v) = &self.out {
            c.out_dir = v.clone();
        } else if let Some(v) = std::env::var_os(OUT_DIR_ENV) {
            c.out_dir = PathBuf::from(v);
        }
        c.validate()?;
        Ok(c)
    }
}

/// Keys present in `text` replace those of `base`.
fn merge_toml(base: ExperimentConfig, text: &str) -> Result<ExperimentConfig> {
    let cfg = |e: toml::de::Error| Error::Config(e.to_string());
    let mut table: toml::Table = toml::from_str(&base.to_toml_string()?).map_err(cfg)?;
    let overrides: toml::Table = toml::from_str(text).map_err(cfg)?;
    table.extend(overrides);
    ExperimentConfig::from_toml_str(&toml::to_string(&table).map_err(|e| Error::Config(e.to_string()))?)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(file, value)?;
    Ok(())
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match writeln!(std::io::stdout().lock(), "{text}") {
        // a closed pipe (`| head`) is not an error
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

#[derive(Serialize)]
struct GameReport {
    value: f64,
    mu: Vec<Vec<Vec<f64>>>,
    nu: Vec<Vec<Vec<f64>>>,
}

fn solve_game(path: &Path) -> Result<()> {
    let game = MarkovGame::load(path)?;
    let eq = solve_equilibrium(&game)?;
    let layers = |p: &zerosum_ps::dp::Policy| {
        (0..game.horizon())
            .map(|h| (0..game.num_states()).map(|s| p.row(s, h).to_vec()).collect())
            .collect()
    };
    print_json(&GameReport {
        value: eq.total_value(&game),
        mu: layers(&eq.mu),
        nu: layers(&eq.nu),
    })
}

fn make_game(args: &MakeGameArgs) -> Result<()> {
    let game = match (&args.predator_prey, &args.random) {
        (Some(dims), None) => {
            let (w, h) = dims
                .split_once('x')
                .and_then(|(w, h)| Some((w.parse().ok()?, h.parse().ok()?)))
                .ok_or_else(|| Error::Config(format!("grid {dims:?} is not WIDTHxHEIGHT")))?;
            build_predator_prey(
                &GridSpec {
                    width: w,
                    height: h,
                    ..GridSpec::default()
                },
                args.horizon,
            )?
        }
        (None, Some(sizes)) if sizes.len() == 3 => {
            build_random_game(sizes[0], sizes[1], sizes[2], args.horizon, args.seed)?
        }
        _ => return Err(Error::Config("pass exactly one of --predator-prey WxH or --random S,A,B".into())),
    };
    fs::write(&args.out, game.to_json()?)?;
    Ok(())
}

/// Runs every pairing of `config` and writes its files under `config.out_dir`.
/// Returns the final-episode summary of each pairing.
fn run_experiment(config: &ExperimentConfig, validate: bool) -> Result<Vec<(AgentKind, SummaryRow)>> {
    let game = config.build_game()?;
    fs::create_dir_all(&config.out_dir)?;
    fs::write(config.out_dir.join("config.toml"), config.to_toml_string()?)?;
    let seeds = config.seeds();
    let mut finals = Vec::new();
    let mut bounds_failed = false;
    for &p2 in &config.p2 {
        let label = format!("{}_vs_{}", config.p1, p2);
        eprintln!(
            "{label}: {} seeds x {} episodes",
            seeds.len(),
            config.episodes
        );
        let records = run_seeds(&game, &config.match_config(p2), &seeds, config.workers)?;
        let csv_path = config.out_dir.join(format!("regret_{label}.csv"));
        write_csv(&records, BufWriter::new(File::create(&csv_path)?))?;
        let summary = aggregate_runs(&records)?;
        write_summary_csv(
            &summary,
            BufWriter::new(File::create(config.out_dir.join(format!("summary_{label}.csv")))?),
        )?;
        if validate {
            let rows = read_csv(File::open(&csv_path)?)?;
            eprintln!("{}: {} rows valid", csv_path.display(), rows.len());
        }
        if config.record_trajectories || config.diagnostics {
            let dir = config.out_dir.join("records");
            fs::create_dir_all(&dir)?;
            for rec in &records {
                write_json(&dir.join(format!("{label}_seed{}.json", rec.master_seed)), rec)?;
            }
        }
        if config.diagnostics {
            let reports = records
                .iter()
                .map(|rec| check_bounds(rec, &game, 20, rec.master_seed))
                .collect::<Result<Vec<_>>>()?;
            bounds_failed |= reports.iter().any(|r| !r.passed());
            write_json(&config.out_dir.join(format!("bounds_{label}.json")), &reports)?;
        }
        let last = *summary.last().expect("at least one episode");
        eprintln!(
            "{label}: final mean cumulative regret {:.4} (95% CI {:.4} .. {:.4})",
            last.mean, last.ci_low, last.ci_high
        );
        finals.push((p2, last));
    }
    if bounds_failed {
        return Err(Error::Numerical("a bound check failed; see bounds_*.json".into()));
    }
    Ok(finals)
}

fn sweep(base: &ExperimentConfig, grid: &[usize], validate: bool) -> Result<()> {
    let mut w = csv::Writer::from_path(base.out_dir.join("sweep.csv")).or_else(|_| {
        fs::create_dir_all(&base.out_dir)?;
        csv::Writer::from_path(base.out_dir.join("sweep.csv"))
    })?;
    w.write_record(["p1", "p2", "episodes", "runs", "mean_cum_regret", "stderr", "ci_low", "ci_high"])?;
    for &k in grid {
        let config = ExperimentConfig {
            episodes: k,
            out_dir: base.out_dir.join(format!("k{k}")),
            ..base.clone()
        };
        config.validate()?;
        for (p2, row) in run_experiment(&config, validate)? {
            w.write_record([
                config.p1.to_string(),
                p2.to_string(),
                k.to_string(),
                row.runs.to_string(),
                format!("{:.16e}", row.mean),
                format!("{:.16e}", row.stderr),
                format!("{:.16e}", row.ci_low),
                format!("{:.16e}", row.ci_high),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn bounds(record: &Path, game: Option<&Path>, gap_samples: usize, seed: u64) -> Result<bool> {
    let rec = RunRecord::from_json(&fs::read_to_string(record)?)?;
    let game = match (game, &rec.config.game) {
        (Some(path), _) => MarkovGame::load(path)?,
        (None, Some(source)) => source.build(rec.shape.horizon)?,
        (None, None) => return Err(Error::Config("record names no game; pass --game".into())),
    };
    let report = check_bounds(&rec, &game, gap_samples, seed)?;
    print_json(&report)?;
    Ok(report.passed())
}

fn execute(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::SolveMatrix { path } => {
            let matrix: PayoffMatrix = serde_json::from_str(&fs::read_to_string(path)?)?;
            print_json(&solve_matrix_game(&matrix, DEFAULT_TOL)?)?;
        }
        Command::SolveGame { path } => solve_game(&path)?,
        Command::MakeGame(args) => make_game(&args)?,
        Command::Run(args) => {
            run_experiment(&args.resolve()?, args.validate)?;
        }
        Command::Sweep { run, episodes_grid } => sweep(&run.resolve()?, &episodes_grid, run.validate)?,
        Command::CheckBounds {
            record,
            game,
            gap_samples,
            seed,
        } => return bounds(&record, game.as_deref(), gap_samples, seed),
    }
    Ok(true)
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_usage() { 2 } else { 1 })
        }
    }
}
