use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lineup_cli::config::{Profile, RunConfig};
use lineup_cli::error::{CliError, CliResult};
use lineup_cli::pipeline::{self, OptimizeRequest, PlayerRef};
use lineup_core::{Engine, Metric, RuleMode};

#[derive(Parser)]
#[command(name = "lineup", version, about = "Bayesian line-up selection for wheelchair basketball")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the hierarchical model for each metric and write a new run directory.
    Fit {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        roster: Option<PathBuf>,
        #[arg(long)]
        boxscores: Option<PathBuf>,
        /// Directory that receives run-NNNN subdirectories.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Repeatable; defaults to the config's metrics.
        #[arg(long = "metric")]
        metrics: Vec<Metric>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum)]
        profile: Option<Profile>,
    },
    /// Simulate the next match and solve the selection problem per draw.
    Optimize {
        #[arg(long)]
        run: PathBuf,
        #[arg(long = "metric")]
        metrics: Vec<Metric>,
        /// Player index or exact name; repeatable.
        #[arg(long)]
        ban: Vec<PlayerRef>,
        #[arg(long)]
        pin: Vec<PlayerRef>,
        /// Predict a home match (default: the config's scenario).
        #[arg(long, conflicts_with = "away")]
        home: bool,
        #[arg(long)]
        away: bool,
        #[arg(long)]
        match_index: Option<usize>,
        /// Independent match effect per player instead of one shared effect.
        #[arg(long)]
        per_player_match_effect: bool,
        #[arg(long)]
        rules: Option<RuleMode>,
        #[arg(long)]
        engine: Option<Engine>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        top: Option<usize>,
        /// Joint `1,6` or conditional `1,6|2` inclusion query; repeatable.
        #[arg(long = "query")]
        queries: Vec<String>,
    },
    /// Print an optimization report.
    Report {
        #[arg(long)]
        run: PathBuf,
        /// Optimization number (default: latest).
        #[arg(long)]
        optimization: Option<u32>,
        #[arg(long)]
        json: bool,
    },
    /// Serve the JSON API (and optionally a static UI bundle).
    Serve {
        #[arg(long)]
        runs: PathBuf,
        #[arg(long, env = "LINEUP_PORT", default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long)]
        ui_dir: Option<PathBuf>,
    },
}

fn fit_config(
    config: Option<PathBuf>,
    roster: Option<PathBuf>,
    boxscores: Option<PathBuf>,
) -> CliResult<RunConfig> {
    match (config, roster, boxscores) {
        (Some(path), roster, boxscores) => {
            let mut cfg = RunConfig::load(&path)?;
            if let Some(r) = roster {
                cfg.roster = r;
            }
            if let Some(b) = boxscores {
                cfg.boxscores = b;
            }
            Ok(cfg)
        }
        (None, Some(r), Some(b)) => Ok(RunConfig::new(r, b)),
        _ => Err(CliError::Usage("fit needs --config, or both --roster and --boxscores".into())),
    }
}

fn execute(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Fit {
            config,
            roster,
            boxscores,
            out,
            metrics,
            seed,
            profile,
        } => {
            let mut cfg = fit_config(config, roster, boxscores)?;
            if let Some(o) = out {
                cfg.output = o;
            }
            if !metrics.is_empty() {
                cfg.metrics = metrics;
            }
            if let Some(s) = seed {
                cfg.sampler.seed = s;
            }
            if let Some(p) = profile {
                cfg.profile = p;
            }
            let outcome = pipeline::fit(&cfg)?;
            for w in &outcome.warnings {
                eprintln!("warning: not converged: {w}");
            }
            println!("{}", outcome.run_dir.display());
        }
        Command::Optimize {
            run,
            metrics,
            ban,
            pin,
            home,
            away,
            match_index,
            per_player_match_effect,
            rules,
            engine,
            seed,
            top,
            queries,
        } => {
            let req = OptimizeRequest {
                metrics,
                banned: ban,
                pinned: pin,
                home: if home { Some(true) } else if away { Some(false) } else { None },
                match_index,
                per_player_match_effect,
                rules,
                engine,
                seed,
                top_k: top,
                queries,
            };
            let outcome = pipeline::optimize(&run, &req)?;
            print!("{}", pipeline::render_report(&outcome.report));
            println!("\nreport: {}", outcome.dir.join("report.json").display());
        }
        Command::Report { run, optimization, json } => {
            let report = pipeline::load_report(&run, optimization)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&report).map_err(lineup_core::Error::from)?);
            } else {
                print!("{}", pipeline::render_report(&report));
            }
        }
        Command::Serve {
            runs,
            port,
            host,
            ui_dir,
        } => {
            let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::Runtime(e.to_string()))?;
            rt.block_on(lineup_cli::server::serve(runs, &host, port, ui_dir))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
