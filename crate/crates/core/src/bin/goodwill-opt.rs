use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use goodwill_core::scenario::{self, Mode, Overrides, ScenarioConfig};
use goodwill_core::Error;

#[derive(Parser)]
#[command(
    name = "goodwill-opt",
    version,
    about = "Optimal advertising strategies for the segmented goodwill model"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one or more scenario configs (concurrently).
    Run {
        configs: Vec<PathBuf>,
        /// Also run a built-in preset.
        #[arg(long)]
        preset: Option<String>,
        #[arg(long, value_enum)]
        mode: Option<CliMode>,
        /// Output directory prefix.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Finest grid as `N,M`.
        #[arg(long, value_parser = parse_grid)]
        grid: Option<(usize, usize)>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        max_iters: Option<usize>,
    },
    /// List the built-in presets.
    Presets,
}

#[derive(Clone, Copy, ValueEnum)]
enum CliMode {
    Forward,
    Optimize,
}

fn parse_grid(s: &str) -> Result<(usize, usize), String> {
    let (n, m) = s.split_once(',').ok_or("expected N,M")?;
    Ok((
        n.trim().parse().map_err(|e| format!("N: {e}"))?,
        m.trim().parse().map_err(|e| format!("M: {e}"))?,
    ))
}

fn threads() -> usize {
    std::env::var("GOODWILL_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or(0)
}

fn report(name: &str, err: &Error) {
    eprintln!("{}: {name}: {err}", err.class_name());
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Presets => {
            print!("{}", scenario::list_presets());
            ExitCode::SUCCESS
        }
        Command::Run {
            configs,
            preset,
            mode,
            out,
            grid,
            tol,
            max_iters,
        } => {
            let overrides = Overrides {
                mode: mode.map(|m| match m {
                    CliMode::Forward => Mode::Forward,
                    CliMode::Optimize => Mode::Optimize,
                }),
                output: out,
                grid,
                tol,
                max_iters,
            };
            let mut scenarios = Vec::new();
            let loaded = configs
                .iter()
                .map(|p| (p.display().to_string(), ScenarioConfig::load(p)))
                .chain(
                    preset
                        .iter()
                        .map(|n| (n.clone(), ScenarioConfig::from_preset(n))),
                );
            for (source, cfg) in loaded {
                match cfg.and_then(|mut c| c.apply(&overrides).map(|_| c)) {
                    Ok(c) => scenarios.push(c),
                    Err(e) => {
                        report(&source, &e);
                        return ExitCode::from(e.exit_code() as u8);
                    }
                }
            }
            if scenarios.is_empty() {
                let e = Error::Config("no config files or --preset given".into());
                report("run", &e);
                return ExitCode::from(e.exit_code() as u8);
            }

            let pool = match rayon::ThreadPoolBuilder::new()
                .num_threads(threads())
                .build()
            {
                Ok(p) => p,
                Err(e) => {
                    eprintln!("IoError: cannot start thread pool: {e}");
                    return ExitCode::from(1);
                }
            };
            let results: Vec<_> =
                pool.install(|| scenarios.par_iter().map(scenario::run).collect());

            let mut code = 0;
            for (cfg, res) in scenarios.iter().zip(results) {
                match res {
                    Ok(out) => {
                        let s = &out.summary;
                        println!(
                            "{}: J0 = {} J = {} dJ/J0 = {} max_u = {} max_u0 = {} max_G = {} iterations = {} -> {}",
                            cfg.name,
                            scenario::fmt_num(s.j0),
                            scenario::fmt_num(s.j),
                            scenario::fmt_num(s.dj_over_j0()),
                            scenario::fmt_num(s.max_u),
                            scenario::fmt_num(s.max_u0),
                            scenario::fmt_num(s.max_g),
                            s.iterations,
                            cfg.output_dir().display()
                        );
                    }
                    Err(e) => {
                        report(&cfg.name, &e);
                        if code == 0 {
                            code = e.exit_code();
                        }
                    }
                }
            }
            ExitCode::from(code as u8)
        }
    }
}
