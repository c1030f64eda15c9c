mod commands;
mod config;
mod error;
mod output;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use brownian_marble::exec::Executor;
use clap::{Args, Parser, Subcommand};

use crate::config::Config;
use crate::error::CliError;

#[derive(Parser, Debug)]
#[command(name = "marble", version, about = "Brownian marble, R-Bessel, vein and growth-fragmentation simulators")]
struct Cli {
    /// Worker threads for replica scheduling (outputs do not depend on it).
    #[arg(long, global = true, env = "MARBLE_WORKERS")]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// R-Bessel endpoint laws at time t.
    Bessel(Opts),
    /// Bubble containing (t, x) via the vein.
    Vein(Opts),
    /// One marble trace: event log, final front, optional image.
    Marble(Opts),
    /// Growth-fragmentation population and the many-to-one identity.
    Branching(Opts),
    /// Truncation ladder: medians and maximal-excursion quantiles.
    Sweep(Opts),
}

/// Every option can also be given as `key=value` in `--config`; flags win.
#[derive(Args, Debug, Default)]
#[command(allow_negative_numbers = true)]
struct Opts {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    lambda: Option<f64>,
    /// Truncation level of `(λ/g²) ∧ n`.
    #[arg(long)]
    n: Option<f64>,
    /// truncated, half or constant.
    #[arg(long)]
    rate: Option<String>,
    #[arg(long)]
    r0: Option<f64>,
    #[arg(long)]
    t: Option<f64>,
    #[arg(long)]
    x: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    /// a,b
    #[arg(long)]
    window: Option<String>,
    #[arg(long)]
    margin: Option<f64>,
    #[arg(long)]
    replicas: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threshold: Option<f64>,
    /// Comma-separated truncation levels.
    #[arg(long)]
    levels: Option<String>,
    #[arg(long)]
    quantile: Option<f64>,
    #[arg(long)]
    split: Option<u32>,
    #[arg(long)]
    y: Option<f64>,
    #[arg(long)]
    diffusivity: Option<f64>,
    #[arg(long)]
    cap: Option<usize>,
    /// Population runs written to the time-series CSV.
    #[arg(long)]
    series: Option<usize>,
    #[arg(long)]
    render: bool,
    #[arg(long)]
    svg: bool,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    height: Option<usize>,
    #[arg(long)]
    record_every: Option<usize>,
    /// left or midpoint.
    #[arg(long)]
    merge_rule: Option<String>,
    #[arg(long)]
    palette_seed: Option<u64>,
}

impl Opts {
    fn flags(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                m.insert(k.to_owned(), v);
            }
        };
        let s = |v: &Option<f64>| v.map(|x| x.to_string());
        put("lambda", s(&self.lambda));
        put("n", s(&self.n));
        put("rate", self.rate.clone());
        put("r0", s(&self.r0));
        put("t", s(&self.t));
        put("x", s(&self.x));
        put("dt", s(&self.dt));
        put("delta", s(&self.delta));
        put("window", self.window.clone());
        put("margin", s(&self.margin));
        put("replicas", self.replicas.map(|v| v.to_string()));
        put("seed", self.seed.map(|v| v.to_string()));
        put("out", self.out.as_ref().map(|p| p.display().to_string()));
        put("threshold", s(&self.threshold));
        put("levels", self.levels.clone());
        put("quantile", s(&self.quantile));
        put("split", self.split.map(|v| v.to_string()));
        put("y", s(&self.y));
        put("diffusivity", s(&self.diffusivity));
        put("cap", self.cap.map(|v| v.to_string()));
        put("series", self.series.map(|v| v.to_string()));
        put("render", self.render.then(|| "true".into()));
        put("svg", self.svg.then(|| "true".into()));
        put("width", self.width.map(|v| v.to_string()));
        put("height", self.height.map(|v| v.to_string()));
        put("record_every", self.record_every.map(|v| v.to_string()));
        put("merge_rule", self.merge_rule.clone());
        put("palette_seed", self.palette_seed.map(|v| v.to_string()));
        m
    }

    fn load(&self, allowed: &'static [&'static str]) -> Result<Config, CliError> {
        Config::load(self.config.as_deref(), self.flags(), allowed)
    }
}

fn run(cli: Cli) -> Result<bool, CliError> {
    let exec = match cli.workers {
        Some(0) => return Err(CliError::Usage("workers must be at least 1".into())),
        Some(1) => Executor::Sequential,
        Some(w) => {
            rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build_global()
                .map_err(|e| CliError::Abort(e.to_string()))?;
            Executor::default()
        }
        None => Executor::default(),
    };
    match cli.command {
        Command::Bessel(o) => commands::bessel(o.load(commands::BESSEL_KEYS)?, exec),
        Command::Vein(o) => commands::vein(o.load(commands::VEIN_KEYS)?, exec),
        Command::Marble(o) => commands::marble(o.load(commands::MARBLE_KEYS)?),
        Command::Branching(o) => commands::branching(o.load(commands::BRANCHING_KEYS)?, exec),
        Command::Sweep(o) => commands::sweep(o.load(commands::SWEEP_KEYS)?, exec),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("marble: acceptance check failed; see the JSON report");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("marble: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
