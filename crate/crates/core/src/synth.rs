//! Reproducible synthetic consumption and weather series.
//!
//! Daily maximum temperature is an annual sinusoid plus AR(1) noise:
//!
//! ```text
//! tmax_t = tmax_mean − tmax_amplitude · cos(2π (doy_t − 20) / 365.25) + a_t
//! a_t    = 0.7 · a_{t−1} + N(0, tmax_noise²)
//! ```
//!
//! and consumption responds to it:
//!
//! ```text
//! consumption_t = max(0, base + trend · t
//!                        + weekly · (−1 on weekends, +0.4 on weekdays)
//!                        + yearly · sin(2π doy_t / 365.25)
//!                        + β · tmax_t + holiday · 1[holiday_t] + N(0, σ²))
//! ```
//!
//! The formula and parameters are written as `#` comments at the top of the
//! generated consumption file. Values are rounded to three decimals when
//! generated, so the in-memory series equal what the CSV files hold.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use chrono::{Datelike, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::additive::spanish_fixed_holidays;
use crate::data::{DataError, Frequency, TimeSeriesFrame, CONSUMPTION_COLUMN};
use crate::features::day_of_week;

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("invalid synthetic spec: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub seed: u64,
    pub start: NaiveDate,
    pub n_days: usize,
    /// Consumption level on day 0, m³.
    pub base: f64,
    /// Linear trend, m³ per day.
    pub trend: f64,
    pub weekly_amplitude: f64,
    pub yearly_amplitude: f64,
    /// Consumption added per °C of maximum temperature.
    pub temperature_coupling: f64,
    /// Standard deviation of the consumption noise.
    pub noise_sigma: f64,
    /// Consumption added on fixed-date national holidays.
    pub holiday_uplift: f64,
    pub tmax_mean: f64,
    pub tmax_amplitude: f64,
    pub tmax_noise: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            seed: 42,
            start: NaiveDate::from_ymd_opt(2019, 1, 1).expect("valid date"),
            n_days: 1460,
            base: 120.0,
            trend: 0.01,
            weekly_amplitude: 6.0,
            yearly_amplitude: 12.0,
            temperature_coupling: 1.5,
            noise_sigma: 4.0,
            holiday_uplift: 10.0,
            tmax_mean: 22.0,
            tmax_amplitude: 9.0,
            tmax_noise: 2.5,
        }
    }
}

/// Generated daily series, aligned by date.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub spec: SyntheticSpec,
    pub dates: Vec<NaiveDate>,
    pub consumption: Vec<f64>,
    pub tmax: Vec<f64>,
    pub tmin: Vec<f64>,
    pub tmed: Vec<f64>,
    pub prec: Vec<f64>,
    pub sol: Vec<f64>,
}

fn round3(x: f64) -> f64 {
    let r = (x * 1000.0).round() / 1000.0;
    if r == 0.0 { 0.0 } else { r }
}

impl SyntheticSpec {
    fn check(&self) -> Result<(), SynthError> {
        let finite = [
            self.base,
            self.trend,
            self.weekly_amplitude,
            self.yearly_amplitude,
            self.temperature_coupling,
            self.noise_sigma,
            self.holiday_uplift,
            self.tmax_mean,
            self.tmax_amplitude,
            self.tmax_noise,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(SynthError::Invalid("parameters must be finite".into()));
        }
        if self.noise_sigma < 0.0 || self.tmax_noise < 0.0 {
            return Err(SynthError::Invalid("noise levels must be non-negative".into()));
        }
        if self.n_days == 0 {
            return Err(SynthError::Invalid("n_days must be positive".into()));
        }
        Ok(())
    }

    pub fn generate(&self) -> Result<SyntheticData, SynthError> {
        self.check()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let unit = Normal::new(0.0, 1.0).expect("unit normal");
        let dates: Vec<NaiveDate> = self.start.iter_days().take(self.n_days).collect();
        let last_year = dates.last().expect("n_days > 0").year();
        let holidays: BTreeSet<NaiveDate> = spanish_fixed_holidays(self.start.year()..=last_year)
            .into_iter()
            .flat_map(|h| h.dates)
            .collect();

        let mut out = SyntheticData {
            spec: self.clone(),
            dates: dates.clone(),
            consumption: Vec::with_capacity(self.n_days),
            tmax: Vec::with_capacity(self.n_days),
            tmin: Vec::with_capacity(self.n_days),
            tmed: Vec::with_capacity(self.n_days),
            prec: Vec::with_capacity(self.n_days),
            sol: Vec::with_capacity(self.n_days),
        };
        let mut ar = 0.0;
        for (t, d) in dates.iter().enumerate() {
            let doy = d.ordinal() as f64;
            ar = 0.7 * ar + self.tmax_noise * unit.sample(&mut rng);
            let tmax = round3(self.tmax_mean - self.tmax_amplitude * (2.0 * PI * (doy - 20.0) / 365.25).cos() + ar);
            let spread = 8.0 + 4.0 * rng.random::<f64>();
            let tmin = round3(tmax - spread);
            let tmed = round3((tmax + tmin) / 2.0);
            let prec = if rng.random_bool(0.2) { round3(-8.0 * (1.0 - rng.random::<f64>()).ln()) } else { 0.0 };
            let sol = round3((6.0 + 0.3 * (tmax - self.tmax_mean) + rng.random_range(-1.5..1.5)).clamp(0.0, 14.0));

            let weekly = if day_of_week(*d) >= 5 { -1.0 } else { 0.4 };
            let holiday = if holidays.contains(d) { 1.0 } else { 0.0 };
            let value = self.base
                + self.trend * t as f64
                + self.weekly_amplitude * weekly
                + self.yearly_amplitude * (2.0 * PI * doy / 365.25).sin()
                + self.temperature_coupling * tmax
                + self.holiday_uplift * holiday
                + self.noise_sigma * unit.sample(&mut rng);
            out.consumption.push(round3(value.max(0.0)));
            out.tmax.push(tmax);
            out.tmin.push(tmin);
            out.tmed.push(tmed);
            out.prec.push(prec);
            out.sol.push(sol);
        }
        Ok(out)
    }
}

impl SyntheticData {
    /// `date,consumption_m3` with the generating formula as a header comment.
    pub fn consumption_csv(&self) -> String {
        let s = &self.spec;
        let mut out = format!(
            "# synthetic daily consumption, seed {}\n\
             # consumption_m3 = max(0, base + trend*t + weekly*(-1 weekend, +0.4 weekday) + yearly*sin(2*pi*doy/365.25) + beta*tmax + holiday*1[holiday] + N(0, sigma^2))\n\
             # base={} trend={} weekly={} yearly={} beta={} sigma={} holiday={}\n\
             # tmax = {} - {}*cos(2*pi*(doy-20)/365.25) + a_t, a_t = 0.7*a_(t-1) + N(0, {}^2)\n\
             date,{CONSUMPTION_COLUMN}\n",
            s.seed,
            s.base,
            s.trend,
            s.weekly_amplitude,
            s.yearly_amplitude,
            s.temperature_coupling,
            s.noise_sigma,
            s.holiday_uplift,
            s.tmax_mean,
            s.tmax_amplitude,
            s.tmax_noise
        );
        for (d, v) in self.dates.iter().zip(&self.consumption) {
            out.push_str(&format!("{d},{v}\n"));
        }
        out
    }

    /// AEMET-style daily table with `fecha,tmed,prec,tmin,tmax,sol`.
    pub fn meteo_csv(&self) -> String {
        let mut out = String::from("# synthetic daily weather\nfecha,tmed,prec,tmin,tmax,sol\n");
        for i in 0..self.dates.len() {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                self.dates[i], self.tmed[i], self.prec[i], self.tmin[i], self.tmax[i], self.sol[i]
            ));
        }
        out
    }

    /// Consumption and weather in one frame.
    pub fn frame(&self) -> Result<TimeSeriesFrame, DataError> {
        let col = |v: &[f64]| v.iter().map(|x| Some(*x)).collect::<Vec<_>>();
        TimeSeriesFrame::new(self.dates.clone(), Frequency::Daily)?
            .with_column(CONSUMPTION_COLUMN, col(&self.consumption))?
            .with_column("tmed", col(&self.tmed))?
            .with_column("prec", col(&self.prec))?
            .with_column("tmin", col(&self.tmin))?
            .with_column("tmax", col(&self.tmax))?
            .with_column("sol", col(&self.sol))
    }
}
