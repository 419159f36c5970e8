//! C ABI for `zerosum-ps`.
//!
//! Games and runs are opaque heap handles released with their `_free`
//! function. Every fallible call returns a [`ZspsStatus`]; on failure the
//! message is available from [`zsps_last_error`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::fs::File;
use std::io::BufWriter;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use zerosum_ps::agents::AgentKind;
use zerosum_ps::bayes::PriorSpec;
use zerosum_ps::dp::solve_equilibrium;
use zerosum_ps::game::{build_predator_prey, build_random_game, GridSpec};
use zerosum_ps::harness::{run_match, theorem1_bound, write_csv, MatchConfig, RunRecord};
use zerosum_ps::matrixgame::{solve_matrix_game, PayoffMatrix, DEFAULT_TOL};
use zerosum_ps::{Error, MarkovGame};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ZspsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Numerical = 3,
    Io = 4,
    Panic = 5,
}

pub const ZSPS_AGENT_PS: u32 = 0;
pub const ZSPS_AGENT_FP: u32 = 1;
pub const ZSPS_AGENT_EQ: u32 = 2;
pub const ZSPS_AGENT_RANDOM: u32 = 3;

/// Dirichlet(1) per `(s, a, b)`, known rewards.
pub const ZSPS_PRIOR_JOINT: u32 = 0;
/// Dirichlet(1) per `(s, a, b)`, Beta(1, 1) on signed-Bernoulli rewards;
/// the game must pay signed-Bernoulli rewards.
pub const ZSPS_PRIOR_JOINT_BETA: u32 = 1;
/// Per-player Dirichlet(1 / cells); predator-prey games only.
pub const ZSPS_PRIOR_DECOUPLED: u32 = 2;

/// Opaque game handle.
pub struct ZspsGame {
    game: MarkovGame,
    cells: Option<usize>,
}

/// Opaque handle to a finished match.
pub struct ZspsRun {
    record: RunRecord,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

enum Failure {
    Null(&'static str),
    Arg(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> ZspsStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    let (status, msg) = match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => return ZspsStatus::Ok,
        Ok(Err(Failure::Null(name))) => (ZspsStatus::NullPointer, format!("{name} is null")),
        Ok(Err(Failure::Arg(msg))) => (ZspsStatus::InvalidArgument, msg),
        Ok(Err(Failure::Lib(e))) => {
            let status = match &e {
                Error::Io(_) => ZspsStatus::Io,
                e if e.is_usage() => ZspsStatus::InvalidArgument,
                _ => ZspsStatus::Numerical,
            };
            (status, e.to_string())
        }
        Err(_) => (ZspsStatus::Panic, "internal panic".to_string()),
    };
    set_error(msg);
    status
}

unsafe fn borrow<'a, T>(p: *const T, name: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(name))
}

unsafe fn out_ref<'a, T>(p: *mut T, name: &'static str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or(Failure::Null(name))
}

unsafe fn read_str<'a>(p: *const c_char, name: &'static str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::Null(name));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::Arg(format!("{name} is not valid UTF-8")))
}

fn agent_kind(code: u32) -> Result<AgentKind, Failure> {
    match code {
        ZSPS_AGENT_PS => Ok(AgentKind::PosteriorSampling),
        ZSPS_AGENT_FP => Ok(AgentKind::FictitiousPlay),
        ZSPS_AGENT_EQ => Ok(AgentKind::Clairvoyant),
        ZSPS_AGENT_RANDOM => Ok(AgentKind::UniformRandom),
        other => Err(Failure::Arg(format!("unknown agent code {other}"))),
    }
}

fn store<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    let slot = unsafe { out_ref(out, "out")? };
    *slot = Box::into_raw(Box::new(value));
    Ok(())
}

/// Message for the most recent failure on this thread, or null. The
/// pointer stays valid until the next call into this library.
#[no_mangle]
pub extern "C" fn zsps_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Predator-prey game on a `width x height` torus.
#[no_mangle]
pub extern "C" fn zsps_game_predator_prey(
    width: usize,
    height: usize,
    horizon: usize,
    out: *mut *mut ZspsGame,
) -> ZspsStatus {
    guard(|| {
        let grid = GridSpec {
            width,
            height,
            ..GridSpec::default()
        };
        let game = build_predator_prey(&grid, horizon)?;
        store(
            out,
            ZspsGame {
                game,
                cells: Some(width * height),
            },
        )
    })
}

/// Random game with uniform-simplex transitions and uniform mean rewards.
#[no_mangle]
pub extern "C" fn zsps_game_random(
    num_states: usize,
    num_actions_p1: usize,
    num_actions_p2: usize,
    horizon: usize,
    seed: u64,
    out: *mut *mut ZspsGame,
) -> ZspsStatus {
    guard(|| {
        let game = build_random_game(num_states, num_actions_p1, num_actions_p2, horizon, seed)?;
        store(out, ZspsGame { game, cells: None })
    })
}

/// Game from its JSON document.
///
/// # Safety
/// `json` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn zsps_game_from_json(json: *const c_char, out: *mut *mut ZspsGame) -> ZspsStatus {
    guard(|| {
        let game = MarkovGame::from_json(read_str(json, "json")?)?;
        store(out, ZspsGame { game, cells: None })
    })
}

/// # Safety
/// `game` must come from a `zsps_game_*` constructor and not be used again.
#[no_mangle]
pub unsafe extern "C" fn zsps_game_free(game: *mut ZspsGame) {
    if !game.is_null() {
        drop(Box::from_raw(game));
    }
}

/// # Safety
/// `game` must be a live handle; each output must be writable.
#[no_mangle]
pub unsafe extern "C" fn zsps_game_dims(
    game: *const ZspsGame,
    num_states: *mut usize,
    num_actions_p1: *mut usize,
    num_actions_p2: *mut usize,
    horizon: *mut usize,
) -> ZspsStatus {
    guard(|| {
        let g = &borrow(game, "game")?.game;
        *out_ref(num_states, "num_states")? = g.num_states();
        *out_ref(num_actions_p1, "num_actions_p1")? = g.num_actions_p1();
        *out_ref(num_actions_p2, "num_actions_p2")? = g.num_actions_p2();
        *out_ref(horizon, "horizon")? = g.horizon();
        Ok(())
    })
}

/// Expected total reward to player 1 at equilibrium.
///
/// # Safety
/// `game` must be a live handle and `value` writable.
#[no_mangle]
pub unsafe extern "C" fn zsps_game_equilibrium_value(game: *const ZspsGame, value: *mut f64) -> ZspsStatus {
    guard(|| {
        let g = &borrow(game, "game")?.game;
        let v = solve_equilibrium(g)?.total_value(g);
        *out_ref(value, "value")? = v;
        Ok(())
    })
}

/// Solves the `rows x cols` matrix game stored row-major in `payoff`.
/// Either strategy pointer may be null.
///
/// # Safety
/// `payoff` must hold `rows * cols` doubles; non-null strategy buffers must
/// hold `rows` and `cols` doubles.
#[no_mangle]
pub unsafe extern "C" fn zsps_solve_matrix(
    payoff: *const f64,
    rows: usize,
    cols: usize,
    value: *mut f64,
    row_strategy: *mut f64,
    col_strategy: *mut f64,
) -> ZspsStatus {
    guard(|| {
        if payoff.is_null() {
            return Err(Failure::Null("payoff"));
        }
        let len = rows
            .checked_mul(cols)
            .ok_or_else(|| Failure::Arg("matrix too large".into()))?;
        let data = std::slice::from_raw_parts(payoff, len);
        let rows_vec: Vec<Vec<f64>> = data.chunks(cols.max(1)).map(<[f64]>::to_vec).collect();
        let m = PayoffMatrix::from_rows(&rows_vec)?;
        let sol = solve_matrix_game(&m, DEFAULT_TOL)?;
        *out_ref(value, "value")? = sol.value;
        if !row_strategy.is_null() {
            std::slice::from_raw_parts_mut(row_strategy, rows).copy_from_slice(&sol.row_strategy);
        }
        if !col_strategy.is_null() {
            std::slice::from_raw_parts_mut(col_strategy, cols).copy_from_slice(&sol.col_strategy);
        }
        Ok(())
    })
}

/// Plays `episodes` episodes between agents `p1` and `p2` (`ZSPS_AGENT_*`)
/// with posterior samplers using prior `prior` (`ZSPS_PRIOR_*`).
///
/// # Safety
/// `game` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn zsps_run_match(
    game: *const ZspsGame,
    p1: u32,
    p2: u32,
    prior: u32,
    episodes: usize,
    seed: u64,
    out: *mut *mut ZspsRun,
) -> ZspsStatus {
    guard(|| {
        let g = borrow(game, "game")?;
        let prior = match prior {
            ZSPS_PRIOR_JOINT => PriorSpec::generic(),
            ZSPS_PRIOR_JOINT_BETA => PriorSpec::generic_stochastic(),
            ZSPS_PRIOR_DECOUPLED => PriorSpec::predator_prey(
                g.cells
                    .ok_or_else(|| Failure::Arg("decoupled prior needs a predator-prey game".into()))?,
            ),
            other => return Err(Failure::Arg(format!("unknown prior code {other}"))),
        };
        let config = MatchConfig {
            game: None,
            p1: agent_kind(p1)?,
            p2: agent_kind(p2)?,
            prior,
            episodes,
            master_seed: seed,
            record_trajectories: false,
        };
        let record = run_match(&g.game, &config)?;
        store(out, ZspsRun { record })
    })
}

/// # Safety
/// `run` must come from [`zsps_run_match`] and not be used again.
#[no_mangle]
pub unsafe extern "C" fn zsps_run_free(run: *mut ZspsRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Number of episodes in the run.
///
/// # Safety
/// `run` must be a live handle and `episodes` writable.
#[no_mangle]
pub unsafe extern "C" fn zsps_run_episodes(run: *const ZspsRun, episodes: *mut usize) -> ZspsStatus {
    guard(|| {
        *out_ref(episodes, "episodes")? = borrow(run, "run")?.record.ledger.rows.len();
        Ok(())
    })
}

/// Copies the cumulative regret after each episode into `out`, which must
/// hold at least the run's episode count.
///
/// # Safety
/// `run` must be a live handle; `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn zsps_run_cumulative_regret(run: *const ZspsRun, out: *mut f64, len: usize) -> ZspsStatus {
    guard(|| {
        let curve = borrow(run, "run")?.record.ledger.cumulative();
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        if len < curve.len() {
            return Err(Failure::Arg(format!("buffer holds {len}, run has {} episodes", curve.len())));
        }
        std::slice::from_raw_parts_mut(out, curve.len()).copy_from_slice(&curve);
        Ok(())
    })
}

/// Writes the run as the per-episode regret CSV.
///
/// # Safety
/// `run` must be a live handle and `path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn zsps_run_write_csv(run: *const ZspsRun, path: *const c_char) -> ZspsStatus {
    guard(|| {
        let rec = &borrow(run, "run")?.record;
        let file = File::create(read_str(path, "path")?).map_err(Error::from)?;
        write_csv(std::slice::from_ref(rec), BufWriter::new(file))?;
        Ok(())
    })
}

/// `min(37 H S sqrt(A B K H ln(S A B K H)), 2 K H)`.
#[no_mangle]
pub extern "C" fn zsps_theorem1_bound(
    num_states: usize,
    num_actions_p1: usize,
    num_actions_p2: usize,
    horizon: usize,
    episodes: usize,
) -> f64 {
    theorem1_bound(num_states, num_actions_p1, num_actions_p2, horizon, episodes)
}
