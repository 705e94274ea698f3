//! Command-line harness: build → solve → disaggregate → simulate → verify →
//! report, with file-based inputs and outputs.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use rcb::formulations::Objective;
use rcb::oracle::{brute_force_dispatch, sample_rcb_feasible};
use rcb::psc::{activation_counts, disaggregate_schedule};
use rcb::scenario::{
    emit_region, emit_results, read_composite_csv, read_dispatch_csv, run_scenario,
    ScenarioConfig,
};
use rcb::sim::{check_admissibility, simulate_fleet, soe_spread};
use rcb::types::{build_time_grid, validate_fleet, CompositeSchedule, FleetParams};

#[derive(Parser)]
#[command(
    name = "rcb",
    about = "Composite battery dispatch: realizable scheduling and priority-stack disaggregation",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Scenario config JSON.
    #[arg(long)]
    config: PathBuf,
    /// Override the config's output directory.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Override the solver command template (whitespace-separated tokens
    /// with {script} {problem} {solution} {time_limit} placeholders).
    #[arg(long)]
    backend_cmd: Option<String>,
    /// Override the config's random seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SolveArgs {
    /// Scenario config JSON; repeat the flag to run a batch of scenarios
    /// concurrently.
    #[arg(long, required = true)]
    config: Vec<PathBuf>,
    /// Override the config's output directory (single scenario only).
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Override the solver command template (whitespace-separated tokens
    /// with {script} {problem} {solution} {time_limit} placeholders).
    #[arg(long)]
    backend_cmd: Option<String>,
    /// Override the config's random seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Build the configured model, solve it, realize the schedule, and
    /// write result files.
    Solve(SolveArgs),
    /// Disaggregate a composite schedule CSV into an element dispatch CSV
    /// via the priority stack controller.
    Disaggregate {
        #[command(flatten)]
        common: ConfigArgs,
        /// Composite schedule CSV (k,p_c_kw,p_d_kw).
        #[arg(long)]
        schedule: PathBuf,
    },
    /// Check an element dispatch CSV for admissibility; exit 0 iff
    /// admissible.
    Simulate {
        #[command(flatten)]
        common: ConfigArgs,
        /// Element dispatch CSV (l,i,p_c_kw,p_d_kw).
        #[arg(long)]
        dispatch: PathBuf,
        /// Composite schedule CSV the dispatch should aggregate to;
        /// defaults to the dispatch's own per-step means.
        #[arg(long)]
        schedule: Option<PathBuf>,
    },
    /// Emit feasible-region CSVs for the configured model.
    Region(ConfigArgs),
    /// Run the invariant suites (realizability, spread bound, activation
    /// grid, sampler soundness, oracle admissibility).
    Verify {
        /// Schedules sampled per fleet/grid combination.
        #[arg(long, default_value_t = 40)]
        count: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Solve(args) => cmd_solve(args),
        Command::Disaggregate { common, schedule } => cmd_disaggregate(common, schedule),
        Command::Simulate {
            common,
            dispatch,
            schedule,
        } => cmd_simulate(common, dispatch, schedule),
        Command::Region(args) => cmd_region(args),
        Command::Verify { count, seed } => cmd_verify(count, seed),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn load_config(args: &ConfigArgs) -> Result<(ScenarioConfig, PathBuf)> {
    let (mut config, base) = ScenarioConfig::from_file(&args.config)
        .with_context(|| format!("loading {}", args.config.display()))?;
    if let Some(cmd) = &args.backend_cmd {
        config.solver.command = Some(cmd.split_whitespace().map(str::to_string).collect());
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(dir) = &args.output_dir {
        config.output_dir = Some(dir.clone());
    }
    Ok((config, base))
}

fn output_dir(config: &ScenarioConfig, base: &std::path::Path) -> PathBuf {
    let dir = config
        .output_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from("out").join(&config.name));
    if dir.is_absolute() {
        dir
    } else {
        base.join(dir)
    }
}

fn cmd_solve(args: SolveArgs) -> Result<ExitCode> {
    if args.config.len() > 1 && args.output_dir.is_some() {
        bail!("--output-dir is ambiguous with multiple configs; set output_dir per config");
    }
    // scenarios are independent; run a batch concurrently, one thread each
    let summaries: Vec<Result<String>> = std::thread::scope(|scope| {
        let handles: Vec<_> = args
            .config
            .iter()
            .map(|path| {
                let args = &args;
                scope.spawn(move || solve_one(args, path))
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });

    let mut failures = 0;
    for (path, summary) in args.config.iter().zip(summaries) {
        match summary {
            Ok(text) => print!("{text}"),
            Err(e) => {
                eprintln!("error in {}: {e:#}", path.display());
                failures += 1;
            }
        }
    }
    if failures == 0 {
        Ok(ExitCode::SUCCESS)
    } else {
        bail!("{failures} of {} scenarios failed", args.config.len());
    }
}

fn solve_one(args: &SolveArgs, path: &Path) -> Result<String> {
    let common = ConfigArgs {
        config: path.to_path_buf(),
        output_dir: args.output_dir.clone(),
        backend_cmd: args.backend_cmd.clone(),
        seed: args.seed,
    };
    let (config, base) = load_config(&common)?;
    let result = run_scenario(&config, &base)?;
    let out = output_dir(&config, &base);
    emit_results(&result, &out)?;

    use std::fmt::Write;
    let mut text = String::new();
    writeln!(
        text,
        "{}: model={} status={} solver_time={:.3}s",
        result.name,
        result.model.as_str(),
        result.status,
        result.solve_wall_time.as_secs_f64()
    )?;
    writeln!(
        text,
        "  predicted objective {:.6}, realized {:.6}",
        result.metrics.predicted.objective, result.metrics.realized.objective
    )?;
    if let (Some(p), Some(r)) = (
        result.metrics.predicted.mse_kw2,
        result.metrics.realized.mse_kw2,
    ) {
        writeln!(text, "  MSE predicted {p:.6} kW^2, realized {r:.6} kW^2")?;
    }
    if let (Some(p), Some(r)) = (
        result.metrics.predicted.revenue_usd,
        result.metrics.realized.revenue_usd,
    ) {
        writeln!(text, "  revenue predicted {p:.2}, realized {r:.2} (raw price convention)")?;
    }
    writeln!(
        text,
        "  admissible={} violations={} saturation_events={} max_spread={:.6} kWh",
        result.admissibility.ok,
        result.admissibility.violations.len(),
        result.saturation_events,
        result.max_soe_spread_kwh
    )?;
    writeln!(text, "  results in {}", out.display())?;
    Ok(text)
}

fn cmd_disaggregate(common: ConfigArgs, schedule_path: PathBuf) -> Result<ExitCode> {
    let (config, base) = load_config(&common)?;
    let fleet = config.fleet()?;
    let grid = config.time_grid()?;
    let schedule = read_composite_csv(&schedule_path)?;
    let dispatch = disaggregate_schedule(&fleet, &grid, &schedule)?;
    let report = check_admissibility(&fleet, &grid, &dispatch, &schedule)?;

    let out = output_dir(&config, &base);
    std::fs::create_dir_all(&out)?;
    let mut element = String::from("l,i,p_c_kw,p_d_kw,e_end_kwh\n");
    for l in 0..dispatch.l_steps() {
        for i in 0..dispatch.n_elements() {
            element.push_str(&format!(
                "{l},{i},{},{},{}\n",
                dispatch.p_c[i][l], dispatch.p_d[i][l], dispatch.soe[i][l + 1]
            ));
        }
    }
    std::fs::write(out.join("element_dispatch.csv"), element)?;
    let trace = soe_spread(&dispatch);
    let mut spread = String::from("l,spread_kwh\n");
    for (l, s) in trace.0.iter().enumerate() {
        spread.push_str(&format!("{l},{s}\n"));
    }
    std::fs::write(out.join("spread.csv"), spread)?;

    println!(
        "disaggregated {} steps x {} elements; admissible={}; files in {}",
        dispatch.l_steps(),
        dispatch.n_elements(),
        report.ok,
        out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_simulate(
    common: ConfigArgs,
    dispatch_path: PathBuf,
    schedule_path: Option<PathBuf>,
) -> Result<ExitCode> {
    let (config, _base) = load_config(&common)?;
    let fleet = config.fleet()?;
    let grid = config.time_grid()?;
    let dispatch = read_dispatch_csv(&dispatch_path, &fleet, &grid)?;

    let schedule = match schedule_path {
        Some(p) => read_composite_csv(&p)?,
        None => {
            // aggregate the dispatch itself: per-step means
            let mut p_c = vec![0.0; grid.k_steps];
            let mut p_d = vec![0.0; grid.k_steps];
            for l in 0..grid.l_steps() {
                let k = grid.scheduler_index(l);
                p_c[k] += dispatch.total_charge(l) / grid.m as f64;
                p_d[k] += dispatch.total_discharge(l) / grid.m as f64;
            }
            CompositeSchedule::new(p_c, p_d)?
        }
    };

    let report = check_admissibility(&fleet, &grid, &dispatch, &schedule)?;
    if report.ok {
        println!("dispatch admissible ({} element-steps checked)", fleet.n * grid.l_steps());
        Ok(ExitCode::SUCCESS)
    } else {
        println!("dispatch NOT admissible: {} violations", report.violations.len());
        for v in report.violations.iter().take(20) {
            println!(
                "  {} element={:?} step={} magnitude={:.9}",
                v.constraint, v.element, v.step, v.magnitude
            );
        }
        if report.violations.len() > 20 {
            println!("  ... {} more", report.violations.len() - 20);
        }
        Ok(ExitCode::FAILURE)
    }
}

fn cmd_region(args: ConfigArgs) -> Result<ExitCode> {
    let (config, base) = load_config(&args)?;
    let fleet = config.fleet()?;
    let grid = config.time_grid()?;
    let kind = config
        .model
        .ok_or_else(|| anyhow::anyhow!("config has no model for the region command"))?;
    let region = rcb::region::feasible_region_samples(kind, &fleet, &grid)?;
    let out = output_dir(&config, &base);
    emit_region(&region, &out)?;
    println!(
        "region for {}: {} polygon vertices, energy envelope over {} steps; files in {}",
        kind.as_str(),
        region.polygon.len(),
        grid.k_steps,
        out.display()
    );
    Ok(ExitCode::SUCCESS)
}

struct Suite {
    failures: usize,
}

impl Suite {
    fn check(&mut self, name: &str, ok: bool, detail: String) {
        if ok {
            println!("PASS {name}: {detail}");
        } else {
            println!("FAIL {name}: {detail}");
            self.failures += 1;
        }
    }
}

fn cmd_verify(count: usize, seed: u64) -> Result<ExitCode> {
    let mut suite = Suite { failures: 0 };
    let element = rcb::types::reference_element();

    // realizability + spread bound across a small fleet/grid matrix
    let mut checked = 0usize;
    let mut spread_ok = true;
    let mut admissible_ok = true;
    let mut worst_violation: f64 = 0.0;
    for &n in &[2usize, 5, 20] {
        for &m in &[1usize, 5] {
            let fleet = FleetParams::uniform(n, element, 6.75)?;
            let grid = build_time_grid(0.25, m, 12)?;
            let eps = validate_fleet(&fleet, &grid)?;
            let schedules = sample_rcb_feasible(&fleet, &grid, count, seed)?;
            for s in &schedules {
                let d = disaggregate_schedule(&fleet, &grid, s)?;
                let report = check_admissibility(&fleet, &grid, &d, s)?;
                admissible_ok &= report.ok;
                worst_violation = worst_violation.max(report.max_magnitude());
                let trace = soe_spread(&d);
                spread_ok &= trace.max() <= eps + 1e-9;
                checked += 1;
            }
        }
    }
    suite.check(
        "realizability",
        admissible_ok,
        format!("{checked} sampled schedules disaggregated; worst violation {worst_violation:.3e}"),
    );
    suite.check(
        "spread-bound",
        spread_ok,
        format!("SOE spread within the buffer on {checked} trajectories"),
    );

    // activation-count grid: inside the cutting plane the counts never
    // exceed N
    let mut grid_ok = true;
    let mut points = 0usize;
    for n in 2usize..=10 {
        let cap_c = (n as f64 - 1.0) * element.p_c_max;
        let cap_d = (n as f64 - 1.0) * element.p_d_max;
        for a in 0..=100 {
            for b in 0..=100 {
                let x = a as f64 / 100.0 * cap_c;
                let y = b as f64 / 100.0 * cap_d;
                if x / element.p_c_max + y / element.p_d_max <= n as f64 - 1.0 + 1e-9 {
                    let c = activation_counts(x, y, &element);
                    grid_ok &= c.n_c + c.n_d <= n;
                    points += 1;
                }
            }
        }
    }
    suite.check(
        "activation-grid",
        grid_ok,
        format!("{points} cutting-plane grid points for N in 2..=10"),
    );

    // sampler soundness: re-check the constraint set independently
    let fleet = FleetParams::uniform(10, element, 6.75)?;
    let grid = build_time_grid(0.25, 5, 24)?;
    let eps = validate_fleet(&fleet, &grid)?;
    let n = fleet.n as f64;
    let mut sound = true;
    for s in sample_rcb_feasible(&fleet, &grid, count.max(10), seed)? {
        let mut e = fleet.total_e0();
        for k in 0..grid.k_steps {
            sound &= s.p_c[k] >= 0.0 && s.p_d[k] >= 0.0;
            sound &= s.p_c[k] / (n * element.p_c_max) + s.p_d[k] / (n * element.p_d_max)
                <= (n - 1.0) / n + 1e-9;
            e += grid.delta_t_sched * (element.eta_c * s.p_c[k] - s.p_d[k] / element.eta_d);
            sound &= e >= n * eps - 1e-9 && e <= n * (element.e_max - eps) + 1e-9;
        }
    }
    suite.check("sampler-soundness", sound, "all sampled schedules re-checked".into());

    // oracle candidates agree with the admissibility checker
    let fleet = FleetParams::uniform(3, element, 6.75)?;
    let grid = build_time_grid(0.25, 1, 4)?;
    let prices = rcb::signals::two_peak_prices(4, 0.25);
    let best = brute_force_dispatch(
        &fleet,
        &grid,
        &Objective::Revenue { prices },
        element.p_c_max / 4.0,
    )?;
    let d = simulate_fleet(&fleet, &grid, best.element_p_c.clone(), best.element_p_d.clone())?;
    let report = check_admissibility(&fleet, &grid, &d, &best.composite)?;
    suite.check(
        "oracle-admissibility",
        report.ok,
        format!("best enumerated dispatch value {:.4}", best.value),
    );

    if suite.failures == 0 {
        println!("verify: all suites passed");
        Ok(ExitCode::SUCCESS)
    } else {
        bail!("{} verification suites failed", suite.failures);
    }
}
