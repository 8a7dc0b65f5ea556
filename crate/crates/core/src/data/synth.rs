//! Synthetic daily dispatch data with a known generating process.
//!
//! Expected count per day:
//!
//! ```text
//! λ = base · u(tmax) · w(day_label) · h(humidity) · g(mobility)
//! u(t) = 1 + curvature · (t − comfort)²         U-shaped in temperature
//! w    = 1 on working days, nonworking_factor otherwise
//! h(r) = 1 + bump · exp(−((r − centre) / width)²)
//! g(m) = 1 − slope · (1 − m / 100)               g(100) = 1
//! ```
//!
//! The `all` count is `round(λ + N(0, √λ))` truncated at zero; age and
//! location groups split it binomially so group sums hold exactly.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use chrono::{Datelike, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::calendar::build_calendar_labels;
use super::{DailyRecord, DateSpan, GroupCounts};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MobilityKnot {
    pub date: NaiveDate,
    pub level: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub start: NaiveDate,
    pub end: NaiveDate,

    pub base_rate: f64,
    pub comfort_temp: f64,
    pub temp_curvature: f64,
    pub nonworking_factor: f64,
    pub humidity_bump: f64,
    pub humidity_center: f64,
    pub humidity_width: f64,
    pub mobility_slope: f64,

    pub tmax_mean: f64,
    pub tmax_amplitude: f64,
    pub tmax_peak_doy: f64,
    pub tmax_noise_sd: f64,
    pub tmax_noise_ar: f64,
    pub humidity_mean: f64,
    pub humidity_amplitude: f64,
    pub humidity_peak_doy: f64,
    pub humidity_noise_sd: f64,
    pub humidity_noise_ar: f64,

    pub mobility_noise_sd: f64,
    pub mobility_noise_ar: f64,
    /// Expected number of mobility drops per year before the first knot. No
    /// drops start once the unobserved span begins.
    pub mobility_events_per_year: f64,
    pub mobility_event_depth: [f64; 2],
    pub mobility_event_days: [u32; 2],
    /// Mobility points subtracted between Dec 29 and Jan 3.
    pub year_end_drop: f64,
    /// Piecewise-linear mobility level from the first knot on; held after the last.
    pub regime_knots: Vec<MobilityKnot>,
    /// Days whose mobility is left out of `mobility.csv`.
    pub mobility_unobserved: Option<DateSpan>,

    pub children_share: f64,
    pub elderly_share: f64,
    pub outdoor_share: f64,

    /// Fixed-date holidays as `(month, day)`, repeated every year.
    pub holidays: Vec<(u32, u32)>,
}

fn ymd(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).expect("valid literal date")
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            start: ymd(2014, 4, 1),
            end: ymd(2020, 8, 19),
            base_rate: 300.0,
            comfort_temp: 21.0,
            temp_curvature: 0.001,
            nonworking_factor: 0.9,
            humidity_bump: 0.03,
            humidity_center: 65.0,
            humidity_width: 15.0,
            mobility_slope: 0.5,
            tmax_mean: 21.0,
            tmax_amplitude: 11.0,
            tmax_peak_doy: 215.0,
            tmax_noise_sd: 2.5,
            tmax_noise_ar: 0.7,
            humidity_mean: 66.0,
            humidity_amplitude: 10.0,
            humidity_peak_doy: 200.0,
            humidity_noise_sd: 7.0,
            humidity_noise_ar: 0.5,
            mobility_noise_sd: 3.0,
            mobility_noise_ar: 0.8,
            mobility_events_per_year: 5.0,
            mobility_event_depth: [20.0, 70.0],
            mobility_event_days: [7, 35],
            year_end_drop: 15.0,
            regime_knots: vec![
                MobilityKnot {
                    date: ymd(2020, 2, 1),
                    level: 100.0,
                },
                MobilityKnot {
                    date: ymd(2020, 4, 18),
                    level: 38.0,
                },
                MobilityKnot {
                    date: ymd(2020, 5, 25),
                    level: 40.0,
                },
                MobilityKnot {
                    date: ymd(2020, 7, 1),
                    level: 72.0,
                },
                MobilityKnot {
                    date: ymd(2020, 8, 19),
                    level: 70.0,
                },
            ],
            mobility_unobserved: Some(DateSpan {
                start: ymd(2020, 1, 1),
                end: ymd(2020, 4, 17),
            }),
            children_share: 0.07,
            elderly_share: 0.55,
            outdoor_share: 0.16,
            holidays: vec![
                (1, 1),
                (1, 2),
                (1, 3),
                (2, 11),
                (3, 21),
                (4, 29),
                (5, 3),
                (5, 4),
                (5, 5),
                (7, 20),
                (8, 11),
                (9, 23),
                (10, 10),
                (11, 3),
                (11, 23),
                (12, 30),
                (12, 31),
            ],
        }
    }
}

impl SynthConfig {
    pub fn temperature_factor(&self, tmax: f64) -> f64 {
        1.0 + self.temp_curvature * (tmax - self.comfort_temp).powi(2)
    }

    pub fn day_factor(&self, day_label: u8) -> f64 {
        if day_label == 1 {
            1.0
        } else {
            self.nonworking_factor
        }
    }

    pub fn humidity_factor(&self, humidity: f64) -> f64 {
        let z = (humidity - self.humidity_center) / self.humidity_width;
        1.0 + self.humidity_bump * (-z * z).exp()
    }

    pub fn mobility_factor(&self, mobility: f64) -> f64 {
        (1.0 - self.mobility_slope * (1.0 - mobility / 100.0)).max(0.05)
    }

    pub fn expected_rate(&self, tmax: f64, humidity: f64, mobility: f64, day_label: u8) -> f64 {
        self.base_rate
            * self.temperature_factor(tmax)
            * self.day_factor(day_label)
            * self.humidity_factor(humidity)
            * self.mobility_factor(mobility)
    }

    pub fn holiday_set(&self) -> BTreeSet<NaiveDate> {
        (self.start.year()..=self.end.year())
            .flat_map(|y| {
                self.holidays
                    .iter()
                    .filter_map(move |&(m, d)| NaiveDate::from_ymd_opt(y, m, d))
            })
            .filter(|d| self.start <= *d && *d <= self.end)
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.end < self.start {
            return Err(Error::Config(format!(
                "synthetic span end {} precedes start {}",
                self.end, self.start
            )));
        }
        let shares = [self.children_share, self.elderly_share, self.outdoor_share];
        if shares.iter().any(|s| !(0.0..=1.0).contains(s)) || self.children_share + self.elderly_share > 1.0 {
            return Err(Error::Config("group shares must lie in [0, 1]".into()));
        }
        if self.base_rate <= 0.0 {
            return Err(Error::Config("base rate must be positive".into()));
        }
        if self.regime_knots.windows(2).any(|w| w[1].date <= w[0].date) {
            return Err(Error::Config("regime knots must be strictly increasing in date".into()));
        }
        Ok(())
    }

    fn regime_level(&self, d: NaiveDate) -> Option<f64> {
        let first = self.regime_knots.first()?;
        if d < first.date {
            return None;
        }
        for w in self.regime_knots.windows(2) {
            if d <= w[1].date {
                let span = (w[1].date - w[0].date).num_days() as f64;
                let t = (d - w[0].date).num_days() as f64 / span;
                return Some(w[0].level + (w[1].level - w[0].level) * t);
            }
        }
        Some(self.regime_knots.last()?.level)
    }
}

/// Generator settings plus the derived quantities tests check against.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub seed: u64,
    pub config: SynthConfig,
    pub noise_law: String,
    pub mobility_factor_at_baseline: f64,
    pub days: usize,
}

#[derive(Clone, Debug)]
pub struct SynthDataset {
    /// Records with the true mobility on every day.
    pub records: Vec<DailyRecord>,
    /// Expected `all` count per day.
    pub lambda: Vec<f64>,
    /// Whether each day's mobility is written to `mobility.csv`.
    pub mobility_observed: Vec<bool>,
    pub holidays: BTreeSet<NaiveDate>,
    pub truth: GroundTruth,
}

fn round1(x: f64) -> f64 {
    (x * 10.0).round() / 10.0
}

struct Ar1 {
    value: f64,
    rho: f64,
    sd: f64,
}

impl Ar1 {
    fn new(rng: &mut ChaCha8Rng, rho: f64, sd: f64) -> Self {
        let z: f64 = rng.sample(StandardNormal);
        Ar1 { value: sd * z, rho, sd }
    }

    fn step(&mut self, rng: &mut ChaCha8Rng) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        self.value = self.rho * self.value + self.sd * (1.0 - self.rho * self.rho).sqrt() * z;
        self.value
    }
}

fn seasonal(d: NaiveDate, mean: f64, amplitude: f64, peak_doy: f64) -> f64 {
    let doy = f64::from(d.ordinal());
    mean + amplitude * (2.0 * PI * (doy - peak_doy) / 365.25).cos()
}

fn is_year_end(d: NaiveDate) -> bool {
    (d.month() == 12 && d.day() >= 29) || (d.month() == 1 && d.day() <= 3)
}

/// Deterministic in `(config, seed)`.
pub fn synth_generate(config: &SynthConfig, seed: u64) -> Result<SynthDataset> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dates: Vec<NaiveDate> = DateSpan::new(config.start, config.end)?.dates().collect();
    let holidays = config.holiday_set();
    let labels = build_calendar_labels(&dates, &holidays);

    let mut t_noise = Ar1::new(&mut rng, config.tmax_noise_ar, config.tmax_noise_sd);
    let mut h_noise = Ar1::new(&mut rng, config.humidity_noise_ar, config.humidity_noise_sd);
    let mut m_noise = Ar1::new(&mut rng, config.mobility_noise_ar, config.mobility_noise_sd);
    let event_p = config.mobility_events_per_year / 365.25;
    let [depth_lo, depth_hi] = config.mobility_event_depth;
    let [days_lo, days_hi] = config.mobility_event_days;
    let calm = config.mobility_unobserved.map(|s| s.start);
    let mut event_left = 0u32;
    let mut event_depth = 0.0;

    let child_p = config.children_share;
    let elderly_p = if child_p < 1.0 {
        (config.elderly_share / (1.0 - child_p)).min(1.0)
    } else {
        0.0
    };

    let mut records = Vec::with_capacity(dates.len());
    let mut lambda = Vec::with_capacity(dates.len());
    let mut observed = Vec::with_capacity(dates.len());
    for (&date, &day_label) in dates.iter().zip(&labels) {
        let tmax = round1(
            seasonal(date, config.tmax_mean, config.tmax_amplitude, config.tmax_peak_doy) + t_noise.step(&mut rng),
        );
        let humidity = round1(
            (seasonal(
                date,
                config.humidity_mean,
                config.humidity_amplitude,
                config.humidity_peak_doy,
            ) + h_noise.step(&mut rng))
            .clamp(5.0, 100.0),
        );

        let noise = m_noise.step(&mut rng);
        let started: f64 = rng.gen();
        let mobility_raw = match config.regime_level(date) {
            Some(level) => level + noise,
            None if calm.is_some_and(|c| date >= c) => 100.0 + noise,
            None => {
                if event_left == 0 && started < event_p {
                    event_left = rng.gen_range(days_lo..=days_hi.max(days_lo));
                    event_depth = rng.gen_range(depth_lo..=depth_hi.max(depth_lo));
                }
                let mut m = 100.0 + noise;
                if event_left > 0 {
                    m -= event_depth;
                    event_left -= 1;
                }
                if is_year_end(date) {
                    m -= config.year_end_drop;
                }
                m
            }
        };
        let mobility = round1(mobility_raw.max(5.0));

        let lam = config.expected_rate(tmax, humidity, mobility, day_label);
        let z: f64 = rng.sample(StandardNormal);
        let all = (lam + lam.sqrt() * z).round().max(0.0) as u32;
        let binom = |rng: &mut ChaCha8Rng, n: u32, p: f64| -> u32 {
            if n == 0 || p <= 0.0 {
                return 0;
            }
            Binomial::new(u64::from(n), p.min(1.0)).map_or(0, |b| b.sample(rng) as u32)
        };
        let children = binom(&mut rng, all, child_p);
        let elderly = binom(&mut rng, all - children, elderly_p);
        let outdoor = binom(&mut rng, all, config.outdoor_share);
        let ead = GroupCounts {
            all,
            children,
            adult: all - children - elderly,
            elderly,
            outdoor,
            indoor: all - outdoor,
        };
        debug_assert!(ead.is_consistent());

        records.push(DailyRecord {
            date,
            tmax,
            humidity,
            mobility,
            day_label,
            ead,
        });
        lambda.push(lam);
        observed.push(!config.mobility_unobserved.is_some_and(|s| s.contains(date)));
    }

    let truth = GroundTruth {
        seed,
        config: config.clone(),
        noise_law: "all = max(0, round(lambda + sqrt(lambda) * N(0, 1))); groups binomial".into(),
        mobility_factor_at_baseline: config.mobility_factor(100.0),
        days: records.len(),
    };
    Ok(SynthDataset {
        records,
        lambda,
        mobility_observed: observed,
        holidays,
        truth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn short() -> SynthConfig {
        SynthConfig {
            start: ymd(2016, 1, 1),
            end: ymd(2017, 12, 31),
            ..SynthConfig::default()
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let a = synth_generate(&short(), 5).unwrap();
        let b = synth_generate(&short(), 5).unwrap();
        assert_eq!(a.records, b.records);
        let c = synth_generate(&short(), 6).unwrap();
        assert_ne!(a.records, c.records);
    }

    #[test]
    fn group_sums_hold_every_day() {
        let d = synth_generate(&short(), 1).unwrap();
        assert!(d.records.iter().all(|r| r.ead.is_consistent()));
        assert!(d
            .records
            .iter()
            .all(|r| (0.0..=100.0).contains(&r.humidity) && r.mobility > 0.0));
    }

    #[test]
    fn baseline_mobility_factor_is_one() {
        let c = SynthConfig::default();
        assert_eq!(c.mobility_factor(100.0), 1.0);
        assert!(c.mobility_factor(40.0) < c.mobility_factor(70.0));
    }

    #[test]
    fn default_span_and_regimes() {
        let d = synth_generate(&SynthConfig::default(), 0).unwrap();
        assert_eq!(d.records.first().unwrap().date, ymd(2014, 4, 1));
        assert_eq!(d.records.last().unwrap().date, ymd(2020, 8, 19));
        let april = d.records.iter().find(|r| r.date == ymd(2020, 4, 25)).unwrap();
        assert!(april.mobility < 55.0);
        let unobserved = d.mobility_observed.iter().filter(|o| !**o).count();
        assert_eq!(unobserved, 31 + 29 + 31 + 17);
    }

    #[test]
    fn one_year_has_calendar_length() {
        for (y, n) in [(2018, 365), (2020, 366)] {
            let c = SynthConfig {
                start: ymd(y, 1, 1),
                end: ymd(y, 12, 31),
                ..SynthConfig::default()
            };
            assert_eq!(synth_generate(&c, 0).unwrap().records.len(), n);
        }
    }

    #[test]
    fn invalid_span_rejected() {
        let c = SynthConfig {
            start: ymd(2020, 1, 2),
            end: ymd(2020, 1, 1),
            ..SynthConfig::default()
        };
        assert!(synth_generate(&c, 0).is_err());
    }
}
