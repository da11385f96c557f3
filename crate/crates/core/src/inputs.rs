//! Stochastic daily inputs for one sample device: indoor ambient temperature
//! and hot-water withdrawal events.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SampleRng;
use crate::series::{HourlyProfile, MinuteSeries, HOURS_PER_DAY, MINUTES_PER_DAY};

/// Indoor temperature rules applied to an outdoor hourly profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmbientModel {
    pub outdoor_profile: HourlyProfile,
    pub heat_min_lo: f64,
    pub heat_min_hi: f64,
    pub cool_max_lo: f64,
    pub cool_max_hi: f64,
    /// Share of homes with air conditioning, %.
    pub cooling_share: f64,
}

impl AmbientModel {
    pub fn new(outdoor_profile: HourlyProfile, cooling_share: f64) -> Self {
        Self {
            outdoor_profile,
            heat_min_lo: 18.0,
            heat_min_hi: 20.0,
            cool_max_lo: 24.0,
            cool_max_hi: 26.0,
            cooling_share,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ordered = self.heat_min_lo <= self.heat_min_hi
            && self.heat_min_hi < self.cool_max_lo
            && self.cool_max_lo <= self.cool_max_hi;
        if !ordered {
            return Err(Error::invalid(
                "ambient_model",
                "thresholds must satisfy heat_min_lo <= heat_min_hi < cool_max_lo <= cool_max_hi",
            ));
        }
        if !(0.0..=100.0).contains(&self.cooling_share) {
            return Err(Error::invalid("cooling_share", "must lie in [0, 100]"));
        }
        Ok(())
    }
}

/// Per-sample thresholds drawn from an [`AmbientModel`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmbientDraw {
    pub heating_floor: f64,
    pub cooling_ceiling: f64,
    pub has_cooling: bool,
}

impl AmbientDraw {
    /// Indoor temperature for a given outdoor temperature.
    #[inline]
    pub fn indoor(&self, outdoor: f64) -> f64 {
        if outdoor < self.heating_floor {
            self.heating_floor
        } else if outdoor > self.cooling_ceiling && self.has_cooling {
            self.cooling_ceiling
        } else {
            outdoor
        }
    }

    pub fn apply(&self, outdoor: &HourlyProfile) -> [f64; HOURS_PER_DAY] {
        outdoor.0.map(|t| self.indoor(t))
    }
}

pub fn draw_ambient(model: &AmbientModel, rng: &SampleRng) -> AmbientDraw {
    let mut g = rng.generator();
    let heating_floor = g.random_range(model.heat_min_lo..=model.heat_min_hi);
    let cooling_ceiling = g.random_range(model.cool_max_lo..=model.cool_max_hi);
    let has_cooling = g.random::<f64>() * 100.0 < model.cooling_share;
    AmbientDraw {
        heating_floor,
        cooling_ceiling,
        has_cooling,
    }
}

/// Hourly indoor temperatures for one sample.
pub fn gen_ambient_hourly(model: &AmbientModel, rng: &SampleRng) -> [f64; HOURS_PER_DAY] {
    draw_ambient(model, rng).apply(&model.outdoor_profile)
}

/// Indoor temperature for one sample, held constant within each hour.
pub fn gen_ambient_profile(model: &AmbientModel, rng: &SampleRng) -> MinuteSeries {
    HourlyProfile(gen_ambient_hourly(model, rng)).to_minutes()
}

/// Hot-water demand statistics shared by all devices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WithdrawalModel {
    /// Share of the daily volume drawn in each hour, %.
    pub hourly_distribution: HourlyProfile,
    /// l/day
    pub daily_volume: f64,
    pub duration_min: u32,
    pub duration_max: u32,
    /// l/min
    pub flow_min: f64,
    pub flow_max: f64,
}

impl WithdrawalModel {
    pub fn new(hourly_distribution: HourlyProfile, daily_volume: f64) -> Self {
        Self {
            hourly_distribution,
            daily_volume,
            duration_min: 1,
            duration_max: 10,
            flow_min: 4.0,
            flow_max: 12.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.hourly_distribution
            .validate_percentages("withdrawal.hourly_distribution")?;
        if !(self.daily_volume >= 0.0 && self.daily_volume.is_finite()) {
            return Err(Error::invalid(
                "withdrawal.daily_volume",
                "must be non-negative",
            ));
        }
        if self.duration_min < 1 || self.duration_min > self.duration_max {
            return Err(Error::invalid(
                "withdrawal.duration",
                "need 1 <= duration_min <= duration_max",
            ));
        }
        if !(self.flow_min >= 0.0 && self.flow_min <= self.flow_max && self.flow_max.is_finite()) {
            return Err(Error::invalid(
                "withdrawal.flow",
                "need 0 <= flow_min <= flow_max",
            ));
        }
        Ok(())
    }

    /// Mean volume of one event, l.
    pub fn mean_event_volume(&self) -> f64 {
        0.25 * f64::from(self.duration_min + self.duration_max) * (self.flow_min + self.flow_max)
    }

    /// Longest event, minutes.
    pub fn max_duration(&self) -> usize {
        self.duration_max as usize
    }
}

/// Mean number of draws starting in `hour`.
pub fn expected_withdrawals(model: &WithdrawalModel, hour: usize) -> f64 {
    let hourly_volume = model.daily_volume * model.hourly_distribution[hour] / 100.0;
    hourly_volume * 4.0
        / (f64::from(model.duration_min + model.duration_max) * (model.flow_min + model.flow_max))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WithdrawalEvent {
    pub start_minute: u32,
    pub duration: u32,
    /// Desired tap flow before hot/cold mixing, l/min.
    pub flow: f64,
}

/// Draws one day of withdrawal events, ordered by start minute within each hour.
pub fn gen_withdrawal_events(model: &WithdrawalModel, rng: &SampleRng) -> Vec<WithdrawalEvent> {
    let mut events = Vec::new();
    gen_withdrawal_events_into(model, rng, &mut events);
    events
}

/// As [`gen_withdrawal_events`], reusing `out`'s allocation. Events come out
/// sorted by start minute.
pub fn gen_withdrawal_events_into(
    model: &WithdrawalModel,
    rng: &SampleRng,
    out: &mut Vec<WithdrawalEvent>,
) {
    out.clear();
    if model.daily_volume == 0.0 {
        return;
    }
    let mut g = rng.generator();
    for hour in 0..HOURS_PER_DAY {
        let mean = expected_withdrawals(model, hour);
        if mean <= 0.0 {
            continue;
        }
        let count = Poisson::new(mean)
            .expect("finite positive Poisson mean")
            .sample(&mut g) as u64;
        let first = out.len();
        for _ in 0..count {
            let start_minute = (hour * 60) as u32 + g.random_range(0..60u32);
            let duration = g.random_range(model.duration_min..=model.duration_max);
            let flow = g.random_range(model.flow_min..=model.flow_max);
            out.push(WithdrawalEvent {
                start_minute,
                duration,
                flow,
            });
        }
        out[first..].sort_by_key(|e| e.start_minute);
    }
}

/// Rasterizes events onto the minute grid. Overlaps add up; events running
/// past midnight continue from minute 0.
pub fn events_to_flow(events: &[WithdrawalEvent]) -> MinuteSeries {
    let mut flow = vec![0.0; MINUTES_PER_DAY];
    for e in events {
        for k in 0..e.duration as usize {
            flow[(e.start_minute as usize + k) % MINUTES_PER_DAY] += e.flow;
        }
    }
    MinuteSeries::from_vec_unchecked(flow)
}

/// Hot-water flow needed to deliver `desired_flow` at `desired_temp` by mixing
/// with cold water, given the tank temperature when the draw starts.
///
/// The hot fraction is capped at 1. A tank no warmer than the mains supply
/// draws the full flow.
#[inline]
pub fn mix_scale(
    desired_flow: f64,
    cold_temp: f64,
    desired_temp: f64,
    tank_temp_at_start: f64,
) -> f64 {
    desired_flow * mix_factor(cold_temp, desired_temp, tank_temp_at_start)
}

#[inline]
pub fn mix_factor(cold_temp: f64, desired_temp: f64, tank_temp_at_start: f64) -> f64 {
    if tank_temp_at_start <= cold_temp {
        return 1.0;
    }
    ((desired_temp - cold_temp) / (tank_temp_at_start - cold_temp)).min(1.0)
}
