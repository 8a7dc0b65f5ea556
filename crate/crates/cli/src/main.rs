//! `eadcast`: generate data, train, forecast, evaluate, ablate and sweep
//! horizons.
//!
//! Settings come from built-in defaults, then the `--config` TOML file, then
//! command-line flags, each overriding the previous.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use eadcast::data::{DateSpan, FeatureMask, GroupKey, SynthConfig};
use eadcast::experiment::{
    cmd_ablate, cmd_evaluate, cmd_forecast, cmd_horizon, cmd_synth, cmd_train, DataPaths, RunConfig, Scenario,
};
use eadcast::rnn::{CandidateTiming, InitScheme};
use eadcast::training::LossKind;
use eadcast::{Error, Result};

#[derive(Parser, Debug)]
#[command(
    name = "eadcast",
    version,
    about = "Daily ambulance dispatch forecasting with a stacked LSTM"
)]
struct Cli {
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic dataset.
    Synth {
        /// Generator settings (TOML).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "data")]
        out: PathBuf,
        /// Override the generated span, e.g. 2019-01-01..2019-12-31.
        #[arg(long)]
        span: Option<DateSpan>,
    },
    /// Train a model and write `model.ckpt` plus `loss_history.csv`.
    Train(Common),
    /// Forecast with a checkpoint; writes `predictions.csv` and `horizon.csv`.
    Forecast {
        #[command(flatten)]
        common: Common,
        /// Defaults to `<out>/model.ckpt`.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Defaults to the test span.
        #[arg(long)]
        span: Option<DateSpan>,
    },
    /// Score forecasts; writes `report.csv` and SVG charts.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Defaults to `<out>/horizon.csv`.
        #[arg(long)]
        predictions: Option<PathBuf>,
    },
    /// Retrain with each single feature excluded.
    Ablate(Common),
    /// Train one model per horizon K.
    Horizon {
        #[command(flatten)]
        common: Common,
        /// Comma-separated K values (default 3,7,14,28).
        #[arg(long, value_delimiter = ',')]
        horizons: Option<Vec<usize>>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum LossArg {
    Mse,
    Xent,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum InitArg {
    Zeros,
    Uniform,
}

#[derive(Args, Debug, Default)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Dataset directory with the conventional file names.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Preset split: pre-pandemic or pandemic.
    #[arg(long)]
    scenario: Option<Scenario>,
    #[arg(long)]
    train: Option<DateSpan>,
    #[arg(long)]
    test: Option<DateSpan>,
    /// all, children, adult, elderly, outdoor or indoor.
    #[arg(long)]
    group: Option<GroupKey>,
    #[arg(long)]
    lookback: Option<usize>,
    #[arg(long)]
    horizon: Option<usize>,
    /// Comma-separated subset of temperature,humidity,day_label,mobility, or `all`.
    #[arg(long)]
    features: Option<String>,
    #[arg(long, value_enum)]
    loss: Option<LossArg>,
    #[arg(long, value_enum)]
    init: Option<InitArg>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Use the previous step's candidate in the cell-memory update.
    #[arg(long)]
    eq5_lagged_m: bool,
}

fn read_toml<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

impl Common {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg: RunConfig = match &self.config {
            Some(p) => read_toml(p)?,
            None => RunConfig::default(),
        };
        if let Some(s) = self.scenario {
            cfg.apply_scenario(s);
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = &self.out {
            cfg.out = v.clone();
        }
        if let Some(v) = &self.data {
            cfg.data = DataPaths::in_dir(v);
        }
        if let Some(v) = self.train {
            cfg.train = v;
        }
        if let Some(v) = self.test {
            cfg.test = v;
        }
        if let Some(v) = self.group {
            cfg.group = v;
        }
        if let Some(v) = self.lookback {
            cfg.lookback = v;
        }
        if let Some(v) = self.horizon {
            cfg.horizon = v;
        }
        if let Some(v) = &self.features {
            cfg.features = FeatureMask::parse_list(v)?;
        }
        if let Some(v) = self.loss {
            cfg.training.loss = match v {
                LossArg::Mse => LossKind::SquaredError,
                LossArg::Xent => LossKind::NormalizedCrossEntropy,
            };
        }
        if let Some(v) = self.init {
            cfg.init = match v {
                InitArg::Zeros => InitScheme::Zeros,
                InitArg::Uniform => InitScheme::ScaledUniform,
            };
        }
        if let Some(v) = self.epochs {
            cfg.training.epochs = v;
        }
        if let Some(v) = self.batch_size {
            cfg.training.batch_size = v;
        }
        if self.eq5_lagged_m {
            cfg.timing = CandidateTiming::Lagged;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn pct(x: f64) -> String {
    format!("{:.2}%", 100.0 * x)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth {
            config,
            seed,
            out,
            span,
        } => {
            let mut sc: SynthConfig = match &config {
                Some(p) => read_toml(p)?,
                None => SynthConfig::default(),
            };
            if let Some(s) = span {
                sc.start = s.start;
                sc.end = s.end;
            }
            let data = cmd_synth(&sc, seed, &out)?;
            println!(
                "synth: {} days {}..{} -> {}",
                data.records.len(),
                sc.start,
                sc.end,
                out.display()
            );
        }
        Command::Train(common) => {
            let cfg = common.resolve()?;
            let s = cmd_train(&cfg)?;
            let last = s.history.last().copied().unwrap_or(f64::NAN);
            println!(
                "train: {} epochs, final loss {last:.6} -> {}",
                s.history.len(),
                s.checkpoint.display()
            );
        }
        Command::Forecast {
            common,
            checkpoint,
            span,
        } => {
            let cfg = common.resolve()?;
            let ckpt = checkpoint.unwrap_or_else(|| cfg.out_path("model.ckpt"));
            let f = cmd_forecast(&cfg, &ckpt, span)?;
            println!(
                "forecast: {} anchors, {} dates -> {}",
                f.forecasts.len(),
                f.series.points.len(),
                cfg.out.display()
            );
        }
        Command::Evaluate { common, predictions } => {
            let cfg = common.resolve()?;
            let r = cmd_evaluate(&cfg, predictions.as_deref())?;
            println!(
                "evaluate {} / {}: CC {:.4}, MAE {}",
                r.scenario,
                r.group,
                r.cc,
                pct(r.mae)
            );
        }
        Command::Ablate(common) => {
            let cfg = common.resolve()?;
            for r in cmd_ablate(&cfg)? {
                println!(
                    "ablate {:<15} CC {:.4}  MAE {}",
                    r.variant.name,
                    r.report.cc,
                    pct(r.report.mae)
                );
            }
        }
        Command::Horizon { common, horizons } => {
            let cfg = common.resolve()?;
            let ks = horizons.unwrap_or_else(|| cfg.horizons.clone());
            for r in cmd_horizon(&cfg, &ks)? {
                println!(
                    "horizon K={:<3} CC {:.4}  MAE {}",
                    r.horizon,
                    r.report.cc,
                    pct(r.report.mae)
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
