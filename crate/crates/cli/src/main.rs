use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use covswitch::sim::{load_batch, read_log, replay, run_batch, run_episode, scenario_regressions, RunConfig};
use covswitch::world::{save_world, CaveParams, GeneratorParams, MazeParams, SubwayParams};
use covswitch::Error;

/// Coverage planning simulations with risk-aware local/global switching.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one episode.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every config for several repetitions and write summary tables.
    Batch {
        /// A TOML file (single run, or `[defaults]` plus `[[run]]` tables) or a directory of them.
        #[arg(long)]
        configs: PathBuf,
        #[arg(long, default_value_t = 1)]
        reps: usize,
        #[arg(long, default_value_t = 1)]
        parallelism: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Reconstruct an episode from its event log.
    Replay {
        #[arg(long)]
        log: PathBuf,
        /// Check logged scores, utilities and coverage against recomputation.
        #[arg(long)]
        verify: bool,
    },
    /// Run the scripted switching scenarios.
    Scenarios,
    /// Generate a world and save it as JSON.
    GenWorld {
        #[arg(long, value_enum)]
        generator: Generator,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Maze or cave width in cells.
        #[arg(long, default_value_t = 50)]
        width: usize,
        /// Maze or cave height in cells.
        #[arg(long, default_value_t = 50)]
        height: usize,
        #[arg(long, default_value_t = 0.5)]
        deadend_fraction: f64,
        #[arg(long, default_value_t = 6)]
        rooms: usize,
        #[arg(long, default_value_t = 6.0)]
        room_size_min: f64,
        #[arg(long, default_value_t = 12.0)]
        room_size_max: f64,
        #[arg(long, default_value_t = 0.5)]
        risk_intensity: f64,
        #[arg(long, default_value_t = covswitch::world::DEFAULT_CELL_SIZE)]
        cell_size: f64,
        /// Also print the map.
        #[arg(long)]
        ascii: bool,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Generator {
    Subway,
    Maze,
    Cave,
}

const EXIT_FAILURE: u8 = 1;
const EXIT_INVALID_CONFIG: u8 = 2;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            let invalid = e.chain().any(|c| {
                matches!(
                    c.downcast_ref::<Error>(),
                    Some(Error::Config(_) | Error::InvalidParameter(_))
                )
            });
            ExitCode::from(if invalid { EXIT_INVALID_CONFIG } else { EXIT_FAILURE })
        }
    }
}

fn dispatch(command: Command) -> anyhow::Result<ExitCode> {
    match command {
        Command::Run { config, seed, out } => cmd_run(&config, seed, &out),
        Command::Batch {
            configs,
            reps,
            parallelism,
            out,
        } => cmd_batch(&configs, reps, parallelism, &out),
        Command::Replay { log, verify } => cmd_replay(&log, verify),
        Command::Scenarios => cmd_scenarios(),
        Command::GenWorld {
            generator,
            seed,
            width,
            height,
            deadend_fraction,
            rooms,
            room_size_min,
            room_size_max,
            risk_intensity,
            cell_size,
            ascii,
            out,
        } => {
            let params = match generator {
                Generator::Subway => GeneratorParams::Subway(SubwayParams {
                    cell_size,
                    ..SubwayParams::new(rooms, room_size_min, room_size_max)
                }),
                Generator::Maze => GeneratorParams::Maze(MazeParams {
                    cell_size,
                    ..MazeParams::new(width, height, deadend_fraction)
                }),
                Generator::Cave => GeneratorParams::Cave(CaveParams {
                    cell_size,
                    ..CaveParams::new(width, height, risk_intensity)
                }),
            };
            let world = params.generate(seed)?;
            save_world(&world, &out).with_context(|| format!("writing {}", out.display()))?;
            if ascii {
                for row in world.to_ascii() {
                    println!("{row}");
                }
            }
            println!(
                "{} world {}x{} cells, {} reachable free cells -> {}",
                params.kind(),
                world.width(),
                world.height(),
                world.reachable_free_count(),
                out.display()
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn cmd_run(config: &Path, seed: Option<u64>, out: &Path) -> anyhow::Result<ExitCode> {
    let mut cfg = RunConfig::load(config).with_context(|| format!("loading {}", config.display()))?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let mut result = run_episode(&cfg)?;
    result.write(out)?;
    let r = &result.record;
    println!(
        "{}: {:?} after {} steps ({} cycles), covered {:.1} of {:.1} m2, {:.1} m travelled, {} collisions",
        r.label, r.termination, r.steps, r.cycles, r.final_coverage_m2, r.reachable_free_m2, r.distance_m, r.collisions
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_batch(configs: &Path, reps: usize, parallelism: usize, out: &Path) -> anyhow::Result<ExitCode> {
    let cfgs = load_batch(configs).with_context(|| format!("loading {}", configs.display()))?;
    let result = run_batch(&cfgs, reps, parallelism)?;
    result.write(out)?;
    println!(
        "{:<28} {:>5} {:>5} {:>12} {:>12} {:>12} {:>12}",
        "label", "reps", "fail", "mean m2", "min m2", "max m2", "m2/min"
    );
    for row in &result.summary {
        println!(
            "{:<28} {:>5} {:>5} {:>12.1} {:>12.1} {:>12.1} {:>12.2}",
            row.label,
            row.reps,
            row.failures,
            row.coverage_mean_m2,
            row.coverage_min_m2,
            row.coverage_max_m2,
            row.rate_mean_m2_per_min
        );
    }
    Ok(if result.failures() > 0 {
        ExitCode::from(EXIT_FAILURE)
    } else {
        ExitCode::SUCCESS
    })
}

fn cmd_replay(log: &Path, verify: bool) -> anyhow::Result<ExitCode> {
    let parsed = read_log(log).with_context(|| format!("reading {}", log.display()))?;
    let report = replay(&parsed)?;
    for f in &report.frames {
        let chosen = f.chosen.map_or("-".to_string(), |s| s.to_string());
        match &f.decision {
            Some(d) => println!("cycle {:>4} step {:>5} covered {:>6}  {d}", f.cycle, f.step, f.covered_cells),
            None => println!("cycle {:>4} step {:>5} covered {:>6}  {chosen}", f.cycle, f.step, f.covered_cells),
        }
    }
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    if verify {
        for m in &report.mismatches {
            eprintln!("mismatch: {m}");
        }
        println!(
            "verify: {} cycles, {} mismatches",
            report.frames.len(),
            report.mismatches.len()
        );
        if !report.ok() {
            return Ok(ExitCode::from(EXIT_FAILURE));
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_scenarios() -> anyhow::Result<ExitCode> {
    let outcomes = scenario_regressions()?;
    for o in &outcomes {
        println!(
            "{} {:<16} {:<5} {}",
            if o.passed { "PASS" } else { "FAIL" },
            o.scenario,
            o.planner,
            o.detail
        );
    }
    Ok(if outcomes.iter().all(|o| o.passed) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_FAILURE)
    })
}
