use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;

use super::checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
use super::reference::reference_mae;
use super::RunConfig;
use crate::data::{
    load_dataset, make_target_windows, make_windows, parse_date, records_in_span, synth_generate, write_atomic,
    write_dataset, DailyRecord, DateSpan, Feature, FeatureMask, FeatureWindow, GroupKey, SynthConfig, SynthDataset,
};
use crate::error::{Error, Result};
use crate::eval::svg::{line_chart, scatter_cubic_chart, Series};
use crate::eval::{evaluate_series, horizon_aggregate, report_csv, EvalReport, HorizonPoint, HorizonSeries};
use crate::rnn::{init_params, Activation, Architecture};
use crate::training::{fit_scaler, train_with, LossKind, MinMaxScaler};

/// Writes a synthetic dataset into `out`.
pub fn cmd_synth(config: &SynthConfig, seed: u64, out: &Path) -> Result<SynthDataset> {
    let data = synth_generate(config, seed)?;
    write_dataset(out, &data)?;
    log::info!("wrote {} days to {}", data.records.len(), out.display());
    Ok(data)
}

/// Records plus normalised training windows for one configuration.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub records: Vec<DailyRecord>,
    pub scaler: MinMaxScaler,
    pub train: Vec<FeatureWindow>,
}

fn load_records(cfg: &RunConfig) -> Result<Vec<DailyRecord>> {
    load_dataset(&cfg.data.resolve()?, &cfg.mobility_fill)
}

fn ensure_covers(records: &[DailyRecord], span: &DateSpan, what: &str) -> Result<()> {
    let inside = records_in_span(records, span);
    if inside.len() != span.days() {
        return Err(Error::Data(format!(
            "dataset covers {} of the {} days of the {what} span {span}",
            inside.len(),
            span.days()
        )));
    }
    Ok(())
}

/// Builds the training windows and fits the scaler on them alone.
pub fn prepare(cfg: &RunConfig, records: Vec<DailyRecord>) -> Result<Prepared> {
    cfg.validate()?;
    ensure_covers(&records, &cfg.train, "train")?;
    let raw = make_windows(
        records_in_span(&records, &cfg.train),
        cfg.lookback,
        cfg.horizon,
        cfg.features,
        cfg.group,
    )?;
    let scaler = fit_scaler(&raw)?;
    let train = scaler.apply_windows(&raw)?;
    Ok(Prepared { records, scaler, train })
}

/// Trains a fresh model; the error of a diverged run carries its history.
pub fn train_checkpoint(cfg: &RunConfig, prepared: &Prepared) -> Result<(Checkpoint, Vec<f64>)> {
    let training = cfg.effective_training();
    let output = match training.loss {
        LossKind::SquaredError => Activation::Identity,
        LossKind::NormalizedCrossEntropy => Activation::Sigmoid,
    };
    let arch = Architecture::standard(cfg.features.width(), cfg.horizon).with_output(output);
    let model = init_params(arch, cfg.init, cfg.seed)?.with_timing(cfg.timing);
    let every = (training.epochs / 10).max(1);
    let outcome = train_with(model, &prepared.train, &training, |epoch, loss| {
        if (epoch + 1) % every == 0 {
            log::info!("epoch {}/{}: loss {loss:.6}", epoch + 1, training.epochs);
        }
    })?;
    let ckpt = Checkpoint {
        model: outcome.model,
        scaler: prepared.scaler.clone(),
        features: cfg.features,
        lookback: cfg.lookback,
        group: cfg.group,
        seed: cfg.seed,
        config_digest: cfg.digest(),
    };
    Ok((ckpt, outcome.history))
}

#[derive(Clone, Debug)]
pub struct TrainSummary {
    pub checkpoint: PathBuf,
    pub history: Vec<f64>,
}

fn history_csv(history: &[f64]) -> String {
    let mut s = String::from("epoch,loss\n");
    for (i, l) in history.iter().enumerate() {
        let _ = writeln!(s, "{},{l}", i + 1);
    }
    s
}

/// Writes `model.ckpt` and `loss_history.csv` into `cfg.out`. A diverged
/// run still leaves the history of its completed epochs.
pub fn cmd_train(cfg: &RunConfig) -> Result<TrainSummary> {
    let prepared = prepare(cfg, load_records(cfg)?)?;
    log::info!(
        "training on {} windows ({} features, L={}, K={})",
        prepared.train.len(),
        cfg.features.width(),
        cfg.lookback,
        cfg.horizon
    );
    let history_path = cfg.out_path("loss_history.csv");
    match train_checkpoint(cfg, &prepared) {
        Ok((ckpt, history)) => {
            let checkpoint = cfg.out_path("model.ckpt");
            save_checkpoint(&checkpoint, &ckpt)?;
            write_atomic(&history_path, history_csv(&history).as_bytes())?;
            Ok(TrainSummary { checkpoint, history })
        }
        Err(e) => {
            if let Error::NonFiniteLoss { history, .. } = &e {
                write_atomic(&history_path, history_csv(history).as_bytes())?;
            }
            Err(e)
        }
    }
}

/// Count-scale `K`-vectors for every anchor whose targets fall inside `span`.
pub fn forecast_span(
    ckpt: &Checkpoint,
    records: &[DailyRecord],
    span: &DateSpan,
) -> Result<Vec<(NaiveDate, Vec<f64>)>> {
    if span.days() < ckpt.lookback {
        return Err(Error::Data(format!(
            "forecast span {span} is shorter than the {}-day lookback",
            ckpt.lookback
        )));
    }
    let windows = make_target_windows(records, span, ckpt.lookback, ckpt.horizon(), ckpt.features, ckpt.group)?;
    let inputs: Vec<Vec<Vec<f64>>> = windows
        .iter()
        .map(|w| w.inputs.iter().map(|row| ckpt.scaler.apply_row(row)).collect())
        .collect();
    let preds = ckpt.model.predict_many(&inputs)?;
    Ok(windows
        .iter()
        .zip(preds)
        .map(|(w, p)| {
            (
                w.anchor_date,
                p.into_iter().map(|z| ckpt.scaler.invert_target(z)).collect(),
            )
        })
        .collect())
}

#[derive(Clone, Debug)]
pub struct ForecastOutput {
    pub forecasts: Vec<(NaiveDate, Vec<f64>)>,
    pub series: HorizonSeries,
}

fn predictions_csv(forecasts: &[(NaiveDate, Vec<f64>)], k: usize) -> String {
    let mut s = String::from("anchor_date");
    for j in 1..=k {
        let _ = write!(s, ",step_{j}");
    }
    s.push('\n');
    for (d, v) in forecasts {
        let _ = write!(s, "{d}");
        for x in v {
            let _ = write!(s, ",{x}");
        }
        s.push('\n');
    }
    s
}

fn horizon_csv(series: &HorizonSeries) -> String {
    let mut s = String::from("date,mean,min,max,count\n");
    for p in &series.points {
        let _ = writeln!(s, "{},{},{},{},{}", p.date, p.mean, p.min, p.max, p.count);
    }
    s
}

/// Forecasts `span` (default: the test span) with a saved checkpoint and
/// writes `predictions.csv` and `horizon.csv`.
pub fn cmd_forecast(cfg: &RunConfig, checkpoint: &Path, span: Option<DateSpan>) -> Result<ForecastOutput> {
    let ckpt = load_checkpoint(checkpoint)?;
    ckpt.ensure_compatible(cfg.features, cfg.lookback, cfg.horizon)?;
    if ckpt.group != cfg.group {
        return Err(Error::Checkpoint(format!(
            "checkpoint predicts group {}, configuration asks for {}",
            ckpt.group, cfg.group
        )));
    }
    let records = load_records(cfg)?;
    let span = span.unwrap_or(cfg.test);
    let forecasts = forecast_span(&ckpt, &records, &span)?;
    let series = horizon_aggregate(&forecasts)?;
    write_atomic(
        &cfg.out_path("predictions.csv"),
        predictions_csv(&forecasts, ckpt.horizon()).as_bytes(),
    )?;
    write_atomic(&cfg.out_path("horizon.csv"), horizon_csv(&series).as_bytes())?;
    Ok(ForecastOutput { forecasts, series })
}

/// Pairs each forecast date with its record, listing any date without one.
pub fn align_with_actuals<'a>(series: &HorizonSeries, records: &'a [DailyRecord]) -> Result<Vec<&'a DailyRecord>> {
    let by_date: BTreeMap<NaiveDate, &DailyRecord> = records.iter().map(|r| (r.date, r)).collect();
    let mut matched = Vec::with_capacity(series.points.len());
    let mut missing = Vec::new();
    for p in &series.points {
        match by_date.get(&p.date) {
            Some(r) => matched.push(*r),
            None => missing.push(p.date.to_string()),
        }
    }
    if !missing.is_empty() {
        let shown: Vec<&str> = missing.iter().take(10).map(String::as_str).collect();
        return Err(Error::Data(format!(
            "{} forecast dates have no actual counts: {}{}",
            missing.len(),
            shown.join(", "),
            if missing.len() > 10 { ", ..." } else { "" }
        )));
    }
    Ok(matched)
}

fn read_horizon_csv(path: &Path) -> Result<HorizonSeries> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?
        .iter()
        .map(str::to_string)
        .collect();
    if header != ["date", "mean", "min", "max", "count"] {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: format!("expected header date,mean,min,max,count, found {}", header.join(",")),
        });
    }
    let mut points = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i as u64 + 2;
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let rec = rec.map_err(|e| parse_err(e.to_string()))?;
        let num = |k: usize| -> Result<f64> {
            rec[k]
                .trim()
                .parse()
                .map_err(|_| parse_err(format!("bad number `{}`", &rec[k])))
        };
        points.push(HorizonPoint {
            date: parse_date(&rec[0]).map_err(|e| parse_err(e.to_string()))?,
            mean: num(1)?,
            min: num(2)?,
            max: num(3)?,
            count: rec[4]
                .trim()
                .parse()
                .map_err(|_| parse_err(format!("bad count `{}`", &rec[4])))?,
        });
    }
    if points.is_empty() {
        return Err(Error::Data(format!("{} holds no forecasts", path.display())));
    }
    let horizon = points.iter().map(|p| p.count).max().unwrap_or(1);
    Ok(HorizonSeries { horizon, points })
}

/// Scores a forecast series against actual counts and writes `report.csv`
/// plus the line and scatter charts.
fn evaluate_forecast(cfg: &RunConfig, records: &[DailyRecord], series: &HorizonSeries) -> Result<EvalReport> {
    let matched = align_with_actuals(series, records)?;
    let actual: Vec<f64> = matched.iter().map(|r| f64::from(r.ead.get(cfg.group))).collect();
    let est = series.means();
    let report = evaluate_series(&cfg.name, cfg.group, &actual, &est)?;
    write_atomic(
        &cfg.out_path("report.csv"),
        report_csv(std::slice::from_ref(&report)).as_bytes(),
    )?;

    let dates = series.dates();
    let lo: Vec<f64> = series.points.iter().map(|p| p.min).collect();
    let hi: Vec<f64> = series.points.iter().map(|p| p.max).collect();
    let mut lines = vec![
        Series {
            name: "actual",
            values: &actual,
            color: "black",
        },
        Series {
            name: "estimated (mean)",
            values: &est,
            color: "crimson",
        },
    ];
    if series.horizon > 1 {
        lines.push(Series {
            name: "estimated min",
            values: &lo,
            color: "steelblue",
        });
        lines.push(Series {
            name: "estimated max",
            values: &hi,
            color: "darkorange",
        });
    }
    let title = format!("{} / {}: daily EAD, K={}", cfg.name, cfg.group, series.horizon);
    write_atomic(
        &cfg.out_path("forecast.svg"),
        line_chart(&title, &dates, &lines).as_bytes(),
    )?;

    for (feature, file, label) in [
        (
            Feature::Temperature,
            "scatter_temperature.svg",
            "daily maximum temperature",
        ),
        (Feature::Humidity, "scatter_humidity.svg", "average relative humidity"),
    ] {
        let x: Vec<f64> = matched.iter().map(|r| feature.value(r)).collect();
        let pts = [
            Series {
                name: "actual",
                values: &actual,
                color: "black",
            },
            Series {
                name: "estimated",
                values: &est,
                color: "crimson",
            },
        ];
        let chart = scatter_cubic_chart(&format!("{} / {}", cfg.name, cfg.group), label, &x, &pts);
        write_atomic(&cfg.out_path(file), chart.as_bytes())?;
    }
    Ok(report)
}

/// Evaluates `predictions` (default `out/horizon.csv`) against the dataset.
pub fn cmd_evaluate(cfg: &RunConfig, predictions: Option<&Path>) -> Result<EvalReport> {
    let path = predictions.map_or_else(|| cfg.out_path("horizon.csv"), Path::to_path_buf);
    let series = read_horizon_csv(&path)?;
    let records = load_records(cfg)?;
    evaluate_forecast(cfg, &records, &series)
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub history: Vec<f64>,
    pub forecast: ForecastOutput,
    pub report: EvalReport,
}

/// `train`, `forecast` and `evaluate` in sequence, all inside `cfg.out`.
pub fn run_full(cfg: &RunConfig) -> Result<RunOutcome> {
    let summary = cmd_train(cfg)?;
    let forecast = cmd_forecast(cfg, &summary.checkpoint, None)?;
    let records = load_records(cfg)?;
    let report = evaluate_forecast(cfg, &records, &forecast.series)?;
    Ok(RunOutcome {
        history: summary.history,
        forecast,
        report,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AblationVariant {
    pub name: &'static str,
    pub features: FeatureMask,
}

/// All features, then each single-feature exclusion.
pub fn ablation_variants() -> [AblationVariant; 5] {
    let all = FeatureMask::all();
    [
        AblationVariant {
            name: "all",
            features: all,
        },
        AblationVariant {
            name: "no_mobility",
            features: all.without(Feature::Mobility),
        },
        AblationVariant {
            name: "no_temperature",
            features: all.without(Feature::Temperature),
        },
        AblationVariant {
            name: "no_humidity",
            features: all.without(Feature::Humidity),
        },
        AblationVariant {
            name: "no_day_label",
            features: all.without(Feature::DayLabel),
        },
    ]
}

#[derive(Clone, Debug)]
pub struct VariantResult {
    pub variant: AblationVariant,
    pub report: EvalReport,
    /// `|u − v| / u` per test day with a nonzero actual.
    pub relative_errors: Vec<(NaiveDate, f64)>,
}

fn relative_errors(series: &HorizonSeries, records: &[DailyRecord], group: GroupKey) -> Result<Vec<(NaiveDate, f64)>> {
    let matched = align_with_actuals(series, records)?;
    Ok(series
        .points
        .iter()
        .zip(matched)
        .filter_map(|(p, r)| {
            let u = f64::from(r.ead.get(group));
            (u != 0.0).then(|| (p.date, (u - p.mean).abs() / u))
        })
        .collect())
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Retrains with each variant of [`ablation_variants`] in
/// `out/ablation/<variant>/`; `cfg.features` is ignored.
pub fn cmd_ablate(cfg: &RunConfig) -> Result<Vec<VariantResult>> {
    let mut results = Vec::new();
    for variant in ablation_variants() {
        let mut sub = cfg.nested(Path::new("ablation").join(variant.name));
        sub.features = variant.features;
        log::info!("ablation variant {} ({})", variant.name, variant.features);
        let outcome = run_full(&sub)?;
        let records = load_records(&sub)?;
        let errors = relative_errors(&outcome.forecast.series, &records, sub.group)?;
        results.push(VariantResult {
            variant,
            report: outcome.report,
            relative_errors: errors,
        });
    }

    let mut table = String::from("variant,features,CC,MAE,MAE_skipped,published_MAE\n");
    let mut errors = String::from("variant,date,relative_error\n");
    let mut boxes = String::from("variant,min,q1,median,q3,max,mean\n");
    for r in &results {
        let published = reference_mae("ablation", cfg.group.as_str(), r.variant.name)
            .map_or_else(|| "--".to_string(), |v| format!("{v}"));
        let _ = writeln!(
            table,
            "{},{},{:.6},{:.6},{},{published}",
            r.variant.name,
            r.variant.features.code(),
            r.report.cc,
            r.report.mae,
            r.report.mae_skipped
        );
        for (d, e) in &r.relative_errors {
            let _ = writeln!(errors, "{},{d},{e}", r.variant.name);
        }
        let mut v: Vec<f64> = r.relative_errors.iter().map(|(_, e)| *e).collect();
        if !v.is_empty() {
            v.sort_by(f64::total_cmp);
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            let _ = writeln!(
                boxes,
                "{},{:.6},{:.6},{:.6},{:.6},{:.6},{mean:.6}",
                r.variant.name,
                v[0],
                quantile(&v, 0.25),
                quantile(&v, 0.5),
                quantile(&v, 0.75),
                v[v.len() - 1]
            );
        }
    }
    write_atomic(&cfg.out_path("ablation.csv"), table.as_bytes())?;
    write_atomic(&cfg.out_path("ablation_errors.csv"), errors.as_bytes())?;
    write_atomic(&cfg.out_path("ablation_boxplot.csv"), boxes.as_bytes())?;
    Ok(results)
}

#[derive(Clone, Debug)]
pub struct HorizonResult {
    pub horizon: usize,
    pub report: EvalReport,
    pub series: HorizonSeries,
}

/// One model per `K` in `out/horizon/k<K>/`, scored on the per-date mean of
/// the overlapping forecasts.
pub fn cmd_horizon(cfg: &RunConfig, horizons: &[usize]) -> Result<Vec<HorizonResult>> {
    if horizons.is_empty() || horizons.contains(&0) {
        return Err(Error::Config("horizon list must be non-empty and positive".into()));
    }
    let mut results = Vec::new();
    let mut table = String::from("K,CC,MAE,dates,bands_ordered,published_MAE\n");
    for &k in horizons {
        let mut sub = cfg.nested(Path::new("horizon").join(format!("k{k}")));
        sub.horizon = k;
        log::info!("horizon K={k}");
        let outcome = run_full(&sub)?;
        let series = outcome.forecast.series;
        let ordered = series.points.iter().all(|p| p.min <= p.mean && p.mean <= p.max);
        let published = reference_mae("horizon", cfg.group.as_str(), &format!("k{k}"))
            .map_or_else(|| "--".to_string(), |v| format!("{v}"));
        let _ = writeln!(
            table,
            "{k},{:.6},{:.6},{},{ordered},{published}",
            outcome.report.cc,
            outcome.report.mae,
            series.points.len()
        );
        results.push(HorizonResult {
            horizon: k,
            report: outcome.report,
            series,
        });
    }
    write_atomic(&cfg.out_path("horizon_summary.csv"), table.as_bytes())?;
    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles_interpolate() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 1.0), 4.0);
        assert!((quantile(&v, 0.5) - 2.5).abs() < 1e-15);
        assert!((quantile(&v, 0.25) - 1.75).abs() < 1e-15);
    }

    #[test]
    fn variants_are_the_five_masks() {
        let v = ablation_variants();
        let codes: Vec<String> = v.iter().map(|a| a.features.code()).collect();
        assert_eq!(codes, ["thdm", "thd", "hdm", "tdm", "thm"]);
    }
}
