//! Process-level solving backend: write a problem file, invoke a configured
//! solver command, parse the solution file back.
//!
//! The default command runs the bundled Python script (HiGHS via scipy for
//! LP/MILP, Clarabel via cvxpy for diagonal-QP objectives). Any solver that
//! accepts the written file and produces the documented key-value solution
//! format can be swapped in through [`SolverConfig`] or the
//! `RCB_SOLVER_CMD` environment variable.

use std::path::Path;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::lp_format::{write_lp, FormatError};
use crate::mps_format::write_mps;
use crate::problem::{OptProblem, Solution, SolveStatus};

/// Bundled reference solver script, materialized next to the problem file.
const SOLVER_SCRIPT: &str = include_str!("solve_lp.py");

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("file format error: {0}")]
    Format(#[from] FormatError),
    #[error("solver backend failed: {0}")]
    Backend(String),
    #[error("solver exceeded the wall-time limit of {0:?}")]
    Timeout(Duration),
    #[error("problem too large for exhaustive search: {0}")]
    TooLarge(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FileFormat {
    LpText,
    Mps,
}

/// External solver configuration.
///
/// `command` is a template; each token may contain the placeholders
/// `{script}` (path of the materialized bundled script), `{problem}`,
/// `{solution}`, and `{time_limit}` (seconds). Tokens that render empty are
/// dropped, so commands without a time-limit argument also work.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub command: Vec<String>,
    pub time_limit: Option<Duration>,
    pub format: FileFormat,
    /// Keep the temp directory with problem/solution files for debugging.
    pub keep_files: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let command = match std::env::var("RCB_SOLVER_CMD") {
            Ok(cmd) if !cmd.trim().is_empty() => {
                cmd.split_whitespace().map(str::to_string).collect()
            }
            _ => vec![
                "python3".into(),
                "{script}".into(),
                "{problem}".into(),
                "{solution}".into(),
                "{time_limit}".into(),
            ],
        };
        Self {
            command,
            time_limit: Some(Duration::from_secs(600)),
            format: FileFormat::LpText,
            keep_files: false,
        }
    }
}

impl SolverConfig {
    pub fn with_time_limit(mut self, limit: Duration) -> Self {
        self.time_limit = Some(limit);
        self
    }
}

/// Serializes a problem in the requested format.
pub fn write_problem_file(problem: &OptProblem, format: FileFormat) -> Result<String, FormatError> {
    match format {
        FileFormat::LpText => Ok(write_lp(problem)),
        FileFormat::Mps => write_mps(problem),
    }
}

/// Solves through the configured external command.
///
/// The returned `wall_time` covers the solver invocation only. Optimal
/// assignments are re-checked in memory against the problem's constraints;
/// a solution the problem itself rejects is reported as a backend error.
/// The reported objective is recomputed from the assignment so all backends
/// are compared on identical arithmetic.
pub fn solve_external(problem: &OptProblem, config: &SolverConfig) -> Result<Solution, SolveError> {
    let dir = tempfile::Builder::new().prefix("rcb-solve-").tempdir()?;
    let result = solve_in_dir(problem, config, dir.path());
    if config.keep_files {
        let kept = dir.keep();
        eprintln!("solver files kept in {}", kept.display());
    }
    result
}

fn solve_in_dir(
    problem: &OptProblem,
    config: &SolverConfig,
    dir: &Path,
) -> Result<Solution, SolveError> {
    let ext = match config.format {
        FileFormat::LpText => "lp",
        FileFormat::Mps => "mps",
    };
    let problem_path = dir.join(format!("problem.{ext}"));
    let solution_path = dir.join("solution.sol");
    std::fs::write(&problem_path, write_problem_file(problem, config.format)?)?;

    let needs_script = config.command.iter().any(|t| t.contains("{script}"));
    let script_path = dir.join("solve_lp.py");
    if needs_script {
        std::fs::write(&script_path, SOLVER_SCRIPT)?;
    }

    let time_limit_str = config
        .time_limit
        .map(|d| format!("{}", d.as_secs_f64()))
        .unwrap_or_default();
    let rendered: Vec<String> = config
        .command
        .iter()
        .map(|token| {
            token
                .replace("{script}", &script_path.to_string_lossy())
                .replace("{problem}", &problem_path.to_string_lossy())
                .replace("{solution}", &solution_path.to_string_lossy())
                .replace("{time_limit}", &time_limit_str)
        })
        .filter(|t| !t.is_empty())
        .collect();
    if rendered.is_empty() {
        return Err(SolveError::Backend("empty solver command".into()));
    }

    let started = Instant::now();
    let mut child = std::process::Command::new(&rendered[0])
        .args(&rendered[1..])
        .stdout(std::process::Stdio::piped())
        .stderr(std::process::Stdio::piped())
        .spawn()
        .map_err(|e| SolveError::Backend(format!("failed to spawn {}: {e}", rendered[0])))?;

    // hard backstop well above the limit we asked the solver to honor itself
    let kill_after = config
        .time_limit
        .map(|d| d + Duration::from_secs(60))
        .unwrap_or(Duration::from_secs(24 * 3600));
    let status = loop {
        if let Some(status) = child.try_wait()? {
            break status;
        }
        if started.elapsed() > kill_after {
            let _ = child.kill();
            let _ = child.wait();
            return Err(SolveError::Timeout(kill_after));
        }
        std::thread::sleep(Duration::from_millis(5));
    };
    let wall_time = started.elapsed();

    if !status.success() {
        let mut err = String::new();
        if let Some(mut stderr) = child.stderr.take() {
            use std::io::Read;
            let _ = stderr.read_to_string(&mut err);
        }
        return Err(SolveError::Backend(format!(
            "solver exited with {status}: {}",
            err.trim()
        )));
    }

    let text = std::fs::read_to_string(&solution_path)
        .map_err(|e| SolveError::Backend(format!("missing solution file: {e}")))?;
    let mut solution = parse_solution(problem, &text)?;
    solution.wall_time = wall_time;

    if solution.status == SolveStatus::Optimal {
        let assignment = solution
            .assignment
            .as_ref()
            .ok_or_else(|| SolveError::Backend("optimal status without assignment".into()))?;
        let scale = feasibility_scale(problem);
        let violation = problem.max_violation(assignment);
        if violation > 1e-6 * scale {
            return Err(SolveError::Backend(format!(
                "solution failed the in-memory feasibility re-check: violation {violation} \
                 exceeds {}",
                1e-6 * scale
            )));
        }
    }
    Ok(solution)
}

fn feasibility_scale(problem: &OptProblem) -> f64 {
    let mut scale: f64 = 1.0;
    for c in problem.constraints() {
        scale = scale.max(c.rhs.abs());
    }
    for v in problem.vars() {
        if v.lower.is_finite() {
            scale = scale.max(v.lower.abs());
        }
        if v.upper.is_finite() {
            scale = scale.max(v.upper.abs());
        }
    }
    scale
}

/// Parses the documented key-value solution format.
fn parse_solution(problem: &OptProblem, text: &str) -> Result<Solution, SolveError> {
    let mut status = None;
    let mut objective = None;
    let mut gap = None;
    let mut message = String::new();
    let mut values = vec![f64::NAN; problem.n_vars()];
    let mut seen = 0usize;

    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (key, rest) = line.split_once(' ').unwrap_or((line, ""));
        match key {
            "status" => {
                status = Some(match rest.trim() {
                    "optimal" => SolveStatus::Optimal,
                    "infeasible" => SolveStatus::Infeasible,
                    "unbounded" => SolveStatus::Unbounded,
                    "time_limit" => SolveStatus::TimeLimit,
                    "error" => SolveStatus::BackendError,
                    other => {
                        return Err(SolveError::Backend(format!(
                            "unknown solver status {other}"
                        )))
                    }
                });
            }
            "objective" => {
                objective = Some(rest.trim().parse::<f64>().map_err(|_| {
                    SolveError::Backend(format!("bad objective value {rest}"))
                })?);
            }
            "gap" => {
                gap = rest.trim().parse::<f64>().ok();
            }
            "message" => message = rest.to_string(),
            "var" => {
                let (name, value) = rest
                    .rsplit_once(' ')
                    .ok_or_else(|| SolveError::Backend(format!("bad var line {line}")))?;
                let id = problem.var_index(name.trim()).ok_or_else(|| {
                    SolveError::Backend(format!("solver returned unknown variable {name}"))
                })?;
                values[id.index()] = value.trim().parse::<f64>().map_err(|_| {
                    SolveError::Backend(format!("bad value for {name}: {value}"))
                })?;
                seen += 1;
            }
            _ => {}
        }
    }

    let status = status.ok_or_else(|| SolveError::Backend("solution missing status".into()))?;
    if status == SolveStatus::BackendError {
        return Err(SolveError::Backend(if message.is_empty() {
            "solver reported an error".into()
        } else {
            message
        }));
    }

    let assignment = if seen == problem.n_vars() && !values.iter().any(|v| v.is_nan()) {
        Some(values)
    } else if status == SolveStatus::Optimal {
        return Err(SolveError::Backend(format!(
            "solution file has {seen} of {} variable values",
            problem.n_vars()
        )));
    } else {
        None
    };
    let objective = assignment
        .as_ref()
        .map(|x| problem.eval_objective(x))
        .or(objective);

    Ok(Solution {
        status,
        objective,
        assignment,
        wall_time: Duration::ZERO,
        mip_gap: gap,
    })
}

/// Convenience: default backend solve.
pub fn solve(problem: &OptProblem) -> Result<Solution, SolveError> {
    solve_external(problem, &SolverConfig::default())
}
