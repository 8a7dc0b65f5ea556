//! Run configuration, checkpoints and the commands behind the `eadcast`
//! binary.

mod checkpoint;
mod commands;
mod reference;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{DatasetPaths, DateSpan, FeatureMask, GroupKey, MobilityFill};
use crate::error::{Error, Result};
use crate::rnn::{CandidateTiming, InitScheme};
use crate::training::TrainConfig;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_VERSION};
pub use commands::{
    ablation_variants, align_with_actuals, cmd_ablate, cmd_evaluate, cmd_forecast, cmd_horizon, cmd_synth, cmd_train,
    forecast_span, prepare, run_full, train_checkpoint, AblationVariant, ForecastOutput, HorizonResult, Prepared,
    RunOutcome, TrainSummary, VariantResult,
};
pub use reference::{published_reference, reference_mae, ReferenceRow, PUBLISHED_REFERENCE_CSV};

/// Preset train/test splits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// Train 2014-04-01..2018-12-31, test 2019.
    PrePandemic,
    /// Train 2014-04-01..2019-12-31, test 2020-01-01..2020-08-19.
    Pandemic,
}

fn ymd(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).expect("valid preset date")
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::PrePandemic => "pre_pandemic",
            Scenario::Pandemic => "pandemic",
        }
    }

    /// `(train, test)`.
    pub fn spans(self) -> (DateSpan, DateSpan) {
        let start = ymd(2014, 4, 1);
        match self {
            Scenario::PrePandemic => (
                DateSpan {
                    start,
                    end: ymd(2018, 12, 31),
                },
                DateSpan {
                    start: ymd(2019, 1, 1),
                    end: ymd(2019, 12, 31),
                },
            ),
            Scenario::Pandemic => (
                DateSpan {
                    start,
                    end: ymd(2019, 12, 31),
                },
                DateSpan {
                    start: ymd(2020, 1, 1),
                    end: ymd(2020, 8, 19),
                },
            ),
        }
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "pre_pandemic" => Ok(Scenario::PrePandemic),
            "pandemic" => Ok(Scenario::Pandemic),
            other => Err(Error::Config(format!("unknown scenario `{other}`"))),
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Input files. `dir` supplies the conventional names (`weather.csv`,
/// `ead.csv`, `mobility.csv`, `holidays.txt`); explicit paths win.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataPaths {
    pub dir: Option<PathBuf>,
    pub weather: Option<PathBuf>,
    pub ead: Option<PathBuf>,
    pub mobility: Option<PathBuf>,
    pub holidays: Option<PathBuf>,
}

impl DataPaths {
    pub fn in_dir(dir: impl Into<PathBuf>) -> Self {
        DataPaths {
            dir: Some(dir.into()),
            ..DataPaths::default()
        }
    }

    /// Concrete paths; every referenced file must exist.
    pub fn resolve(&self) -> Result<DatasetPaths> {
        let base = self.dir.as_deref().map(DatasetPaths::in_dir);
        let pick = |explicit: &Option<PathBuf>, fallback: Option<PathBuf>| explicit.clone().or(fallback);
        let weather = pick(&self.weather, base.as_ref().map(|b| b.weather.clone()))
            .ok_or_else(|| Error::Config("no weather file configured".into()))?;
        let ead = pick(&self.ead, base.as_ref().map(|b| b.ead.clone()))
            .ok_or_else(|| Error::Config("no EAD file configured".into()))?;
        let paths = DatasetPaths {
            weather,
            ead,
            mobility: pick(&self.mobility, base.as_ref().and_then(|b| b.mobility.clone())),
            holidays: pick(&self.holidays, base.as_ref().and_then(|b| b.holidays.clone())),
        };
        let required = [
            Some(&paths.weather),
            Some(&paths.ead),
            paths.mobility.as_ref(),
            paths.holidays.as_ref(),
        ];
        let missing: Vec<String> = required
            .into_iter()
            .flatten()
            .filter(|p| !p.exists())
            .map(|p| p.display().to_string())
            .collect();
        if !missing.is_empty() {
            return Err(Error::Config(format!("missing input files: {}", missing.join(", "))));
        }
        Ok(paths)
    }
}

/// Everything one experiment needs. `seed` drives both initialisation and
/// shuffling and takes precedence over `training.seed`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Scenario label used in reports.
    pub name: String,
    pub data: DataPaths,
    pub train: DateSpan,
    pub test: DateSpan,
    pub group: GroupKey,
    pub lookback: usize,
    pub horizon: usize,
    pub features: FeatureMask,
    pub init: InitScheme,
    pub timing: CandidateTiming,
    pub seed: u64,
    pub out: PathBuf,
    /// `K` values swept by the horizon command.
    pub horizons: Vec<usize>,
    pub training: TrainConfig,
    pub mobility_fill: MobilityFill,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig::for_scenario(Scenario::Pandemic)
    }
}

impl RunConfig {
    pub fn for_scenario(scenario: Scenario) -> Self {
        let (train, test) = scenario.spans();
        RunConfig {
            name: scenario.name().to_string(),
            data: DataPaths::in_dir("data"),
            train,
            test,
            group: GroupKey::All,
            lookback: 14,
            horizon: 1,
            features: FeatureMask::all(),
            init: InitScheme::ScaledUniform,
            timing: CandidateTiming::Current,
            seed: 0,
            out: PathBuf::from("runs"),
            horizons: vec![3, 7, 14, 28],
            training: TrainConfig::default(),
            mobility_fill: MobilityFill::default(),
        }
    }

    pub fn apply_scenario(&mut self, scenario: Scenario) {
        let (train, test) = scenario.spans();
        self.name = scenario.name().to_string();
        self.train = train;
        self.test = test;
    }

    pub fn validate(&self) -> Result<()> {
        if self.train.end >= self.test.start {
            return Err(Error::Config(format!(
                "train span {} must end before test span {} starts",
                self.train, self.test
            )));
        }
        if self.lookback == 0 || self.horizon == 0 {
            return Err(Error::Config("lookback and horizon must be at least 1".into()));
        }
        if self.horizons.is_empty() || self.horizons.contains(&0) {
            return Err(Error::Config("horizon list must be non-empty and positive".into()));
        }
        self.features.validate()?;
        self.effective_training().validate()
    }

    pub fn effective_training(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seed,
            ..self.training.clone()
        }
    }

    /// SHA-256 (hex) over every setting except the output directory.
    pub fn digest(&self) -> String {
        let mut c = self.clone();
        c.out = PathBuf::new();
        c.training.seed = self.seed;
        let json = serde_json::to_vec(&c).expect("config serialises");
        Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn out_path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    /// A copy writing into `out/<sub>`.
    pub fn nested(&self, sub: impl AsRef<Path>) -> Self {
        RunConfig {
            out: self.out.join(sub),
            ..self.clone()
        }
    }
}
