use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use trackassign_cli::config::{MetricChoice, SensorChoice, SolverChoice};
use trackassign_cli::{
    cmd_compare, cmd_count, cmd_track, parse_config, write_compare_output, write_count_output, write_track_output,
    CliError, Format, RunConfig, TargetRange,
};

#[derive(Parser)]
#[command(
    name = "trackassign",
    version,
    about = "Greedy robot-to-target assignment experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-loop tracking rollout; per-step metrics per target.
    Track(Common),
    /// Greedy vs exhaustive optimum vs relaxed bound over a range of target counts.
    Compare(Common),
    /// Exact number of feasible assignments: `count N_TUPLE ROBOTS TARGETS ACTIONS`.
    Count {
        #[command(flatten)]
        common: Common,
        /// n N M A
        #[arg(num_args = 4, value_names = ["n", "N", "M", "A"])]
        sizes: Vec<usize>,
    },
}

#[derive(Args)]
struct Common {
    /// TOML config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Largest exhaustive enumeration allowed.
    #[arg(long)]
    budget: Option<u64>,
    /// Robots per target.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    robots: Option<usize>,
    /// Target count, or an inclusive range `lo..hi` for compare.
    #[arg(long)]
    targets: Option<TargetRange>,
    /// Actions per robot (prefix of the default action set).
    #[arg(long)]
    actions: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, value_enum)]
    sensor: Option<SensorChoice>,
    #[arg(long, value_enum)]
    metric: Option<MetricChoice>,
    #[arg(long, value_enum)]
    solver: Option<SolverChoice>,
    /// Closed-loop greedy steps before each compared epoch.
    #[arg(long)]
    warmup_steps: Option<usize>,
    /// Leave the wall-clock columns of compare output empty.
    #[arg(long)]
    no_timings: bool,
}

impl Common {
    fn resolve(self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
                parse_config(&text)?
            }
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { cfg.$f = v; } )* };
        }
        set!(
            seed,
            format,
            budget,
            n,
            targets,
            actions,
            steps,
            trials,
            metric,
            solver,
            warmup_steps
        );
        if self.no_timings {
            cfg.timings = false;
        }
        if self.out.is_some() {
            cfg.out = self.out;
        }
        if self.robots.is_some() {
            cfg.robots = self.robots;
        }
        if self.sensor.is_some() {
            cfg.sensor = self.sensor;
        }
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Track(c) => {
            let cfg = c.resolve()?;
            let rows = cmd_track(&cfg)?;
            write_track_output(&cfg, &rows)
        }
        Command::Compare(c) => {
            let cfg = c.resolve()?;
            let out = cmd_compare(&cfg)?;
            write_compare_output(&cfg, &out)
        }
        Command::Count { common, sizes } => {
            let mut cfg = common.resolve()?;
            if let [n, robots, m, a] = sizes[..] {
                if m == 0 {
                    return Err(CliError::Config("target count must be positive".into()));
                }
                cfg.n = n;
                cfg.robots = Some(robots);
                cfg.targets = TargetRange::single(m);
                cfg.actions = a;
            }
            write_count_output(&cmd_count(&cfg)?)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("trackassign: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
