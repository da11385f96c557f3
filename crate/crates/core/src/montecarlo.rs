//! Monte Carlo simulation of heater populations.
//!
//! Each sub-aggregate is represented by `N` sample devices with their own
//! ambient and draw profiles. The sub-aggregate power is its nominal power
//! times the fraction of samples with the element on. Several set-point
//! regimes can be simulated in one pass; they then see the same random inputs
//! for every sample.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{map_chunks, Execution};
use crate::inputs::{
    draw_ambient, gen_withdrawal_events_into, mix_factor, AmbientModel, WithdrawalEvent,
    WithdrawalModel,
};
use crate::rng::{Purpose, SampleRng};
use crate::series::{MinuteSeries, MINUTES_PER_DAY};
use crate::thermal::{thermostat_update, EwhClass, EwhState, PhysicalConstants, StepKernel};
use rand::Rng;

const CHUNK: u64 = 256;

/// A homogeneous population: one heater class in one climate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubAggregate {
    pub label: String,
    pub class: EwhClass,
    /// W
    pub nominal_power: f64,
    pub ambient_model: AmbientModel,
    /// °C, constant over the day.
    pub cold_water_temp: f64,
    /// Keys this population's random streams.
    pub stream_key: u32,
}

impl SubAggregate {
    pub fn validate(&self, desired_temp: f64) -> Result<()> {
        self.class.validate()?;
        self.ambient_model.validate()?;
        if !(self.nominal_power >= 0.0 && self.nominal_power.is_finite()) {
            return Err(Error::invalid(
                format!("sub_aggregate[{}].nominal_power", self.label),
                "must be non-negative",
            ));
        }
        if !(self.cold_water_temp < desired_temp) {
            return Err(Error::invalid(
                format!("sub_aggregate[{}].cold_water_temp", self.label),
                format!(
                    "cold water {} °C must be below the desired temperature {desired_temp} °C",
                    self.cold_water_temp
                ),
            ));
        }
        Ok(())
    }
}

/// Thermostat set-point regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Base,
    Max,
    Min,
}

impl Regime {
    pub const ALL: [Regime; 3] = [Regime::Base, Regime::Max, Regime::Min];

    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Base => "base",
            Regime::Max => "max",
            Regime::Min => "min",
        }
    }
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "base" => Ok(Regime::Base),
            "max" => Ok(Regime::Max),
            "min" => Ok(Regime::Min),
            other => Err(Error::invalid(
                "regime",
                format!("unknown regime `{other}`"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub sample_count: u64,
    pub master_seed: u64,
    pub warmup_days: u32,
    /// °C
    pub set_point: f64,
    /// Delivery temperature used for hot/cold mixing, °C.
    pub desired_temp: f64,
    /// Tag carried into the output profile.
    pub regime: Regime,
    pub withdrawal: WithdrawalModel,
    pub constants: PhysicalConstants,
}

impl SimulationConfig {
    pub fn validate_for(&self, sa: &SubAggregate) -> Result<()> {
        sa.validate(self.desired_temp)?;
        self.withdrawal.validate()?;
        self.constants.validate()?;
        if self.sample_count == 0 {
            return Err(Error::invalid("sample_count", "must be at least 1"));
        }
        check_set_point(&sa.class, sa.cold_water_temp, self.set_point)
    }
}

fn check_set_point(class: &EwhClass, cold: f64, set_point: f64) -> Result<()> {
    let half = class.half_deadband();
    let ok = cold < set_point - half && set_point + half <= class.max_temp + 1e-9;
    if ok {
        Ok(())
    } else {
        Err(Error::invalid(
            "set_point",
            format!(
                "set-point {set_point} °C with dead-band ±{half} °C must lie above the cold \
                 water ({cold} °C) and not exceed the maximal temperature {} °C",
                class.max_temp
            ),
        ))
    }
}

/// Aggregate power of one sub-aggregate under one regime.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerProfile {
    pub sub_aggregate_label: String,
    pub regime: Regime,
    pub set_point: f64,
    /// W
    pub nominal_power: f64,
    /// W
    pub power: MinuteSeries,
}

/// Everything the per-minute loop needs for one device in one regime.
struct DeviceModel<'a> {
    kernel: StepKernel,
    set_point: f64,
    half_deadband: f64,
    cold: f64,
    desired: f64,
    ambient: &'a [f64],
}

impl DeviceModel<'_> {
    /// Simulates one day. `flow` holds the mixed flow for this day plus spill
    /// into the next; on return the spill has been shifted to the front.
    fn run_day(
        &self,
        events: &[WithdrawalEvent],
        state: &mut EwhState,
        flow: &mut [f64],
        mut record: impl FnMut(usize, bool),
    ) {
        let mut next = 0;
        for minute in 0..MINUTES_PER_DAY {
            while next < events.len() && events[next].start_minute as usize == minute {
                let e = &events[next];
                let hot = e.flow * mix_factor(self.cold, self.desired, state.temp);
                for slot in &mut flow[minute..minute + e.duration as usize] {
                    *slot += hot;
                }
                next += 1;
            }
            state.temp = self.kernel.advance(
                state.temp,
                state.heater_on,
                self.ambient[minute],
                self.cold,
                flow[minute],
            );
            state.heater_on = thermostat_update(
                state.temp,
                state.heater_on,
                self.set_point,
                self.half_deadband,
            );
            record(minute, state.heater_on);
        }
        let spill = flow.len() - MINUTES_PER_DAY;
        flow.copy_within(MINUTES_PER_DAY.., 0);
        flow[spill..].fill(0.0);
    }
}

fn flow_buffer(max_duration: usize) -> Vec<f64> {
    vec![0.0; MINUTES_PER_DAY + max_duration]
}

/// Simulates one device for one day and returns its thermostat trajectory.
///
/// Draws are mixed to `desired_temp` using the tank temperature at the minute
/// each draw starts. Draws running past midnight are truncated.
#[allow(clippy::too_many_arguments)]
pub fn simulate_sample(
    class: &EwhClass,
    set_point: f64,
    ambient: &MinuteSeries,
    cold_temp: f64,
    desired_temp: f64,
    events: &[WithdrawalEvent],
    initial: EwhState,
    consts: &PhysicalConstants,
) -> Vec<bool> {
    let mut sorted = events.to_vec();
    sorted.sort_by_key(|e| e.start_minute);
    let device = DeviceModel {
        kernel: StepKernel::new(class, consts),
        set_point,
        half_deadband: class.half_deadband(),
        cold: cold_temp,
        desired: desired_temp,
        ambient: ambient.as_slice(),
    };
    let max_duration = sorted
        .iter()
        .map(|e| e.duration as usize)
        .max()
        .unwrap_or(0);
    let mut flow = flow_buffer(max_duration);
    let mut state = initial;
    let mut duty = vec![false; MINUTES_PER_DAY];
    device.run_day(&sorted, &mut state, &mut flow, |m, on| duty[m] = on);
    duty
}

/// Settings shared by all regimes of a multi-regime run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    pub sample_count: u64,
    pub master_seed: u64,
    pub warmup_days: u32,
    pub desired_temp: f64,
    pub withdrawal: WithdrawalModel,
    pub constants: PhysicalConstants,
}

/// Simulates several set-point regimes over the same sample inputs.
///
/// Each sample starts uniformly inside its regime's dead-band (one uniform
/// draw shared by all regimes) with the element off, runs `warmup_days`
/// discarded days with the same daily inputs, then the measured day.
pub fn simulate_regimes(
    sa: &SubAggregate,
    regimes: &[(Regime, f64)],
    settings: &RunSettings,
    exec: Execution,
) -> Result<Vec<PowerProfile>> {
    sa.validate(settings.desired_temp)?;
    settings.withdrawal.validate()?;
    settings.constants.validate()?;
    if settings.sample_count == 0 {
        return Err(Error::invalid("sample_count", "must be at least 1"));
    }
    for (_, sp) in regimes {
        check_set_point(&sa.class, sa.cold_water_temp, *sp)?;
    }

    let kernel = StepKernel::new(&sa.class, &settings.constants);
    let half = sa.class.half_deadband();
    let key = |purpose| SampleRng::new(settings.master_seed, sa.stream_key, 0, purpose);
    let ambient_rng = key(Purpose::Ambient);
    let draw_rng = key(Purpose::Withdrawal);
    let init_rng = key(Purpose::InitialState);
    let days = settings.warmup_days as usize + 1;
    let max_duration = settings.withdrawal.max_duration();

    let chunks = map_chunks(exec, settings.sample_count, CHUNK, |range| {
        let mut counts = vec![vec![0u32; MINUTES_PER_DAY]; regimes.len()];
        let mut events = Vec::new();
        let mut ambient = vec![0.0; MINUTES_PER_DAY];
        let mut flow = flow_buffer(max_duration);
        for j in range {
            let draw = draw_ambient(&sa.ambient_model, &ambient_rng.with_sample(j));
            let hourly = draw.apply(&sa.ambient_model.outdoor_profile);
            for (m, slot) in ambient.iter_mut().enumerate() {
                *slot = hourly[m / 60];
            }
            gen_withdrawal_events_into(&settings.withdrawal, &draw_rng.with_sample(j), &mut events);
            let position: f64 = init_rng.with_sample(j).generator().random();

            for ((_, set_point), count) in regimes.iter().zip(counts.iter_mut()) {
                let device = DeviceModel {
                    kernel,
                    set_point: *set_point,
                    half_deadband: half,
                    cold: sa.cold_water_temp,
                    desired: settings.desired_temp,
                    ambient: &ambient,
                };
                let mut state = EwhState {
                    temp: set_point - half + position * 2.0 * half,
                    heater_on: false,
                };
                flow.fill(0.0);
                for _ in 1..days {
                    device.run_day(&events, &mut state, &mut flow, |_, _| {});
                }
                device.run_day(&events, &mut state, &mut flow, |m, on| {
                    count[m] += u32::from(on);
                });
            }
        }
        counts
    });

    let mut totals = vec![vec![0u64; MINUTES_PER_DAY]; regimes.len()];
    for chunk in &chunks {
        for (total, part) in totals.iter_mut().zip(chunk) {
            for (t, p) in total.iter_mut().zip(part) {
                *t += u64::from(*p);
            }
        }
    }
    let n = settings.sample_count as f64;
    Ok(regimes
        .iter()
        .zip(totals)
        .map(|((regime, set_point), total)| PowerProfile {
            sub_aggregate_label: sa.label.clone(),
            regime: *regime,
            set_point: *set_point,
            nominal_power: sa.nominal_power,
            power: MinuteSeries::from_vec_unchecked(
                total
                    .iter()
                    .map(|c| sa.nominal_power * (*c as f64) / n)
                    .collect(),
            ),
        })
        .collect())
}

/// Power profile of one sub-aggregate under `cfg.set_point`.
pub fn simulate_subaggregate(sa: &SubAggregate, cfg: &SimulationConfig) -> Result<PowerProfile> {
    simulate_subaggregate_with(sa, cfg, Execution::default())
}

pub fn simulate_subaggregate_with(
    sa: &SubAggregate,
    cfg: &SimulationConfig,
    exec: Execution,
) -> Result<PowerProfile> {
    cfg.validate_for(sa)?;
    let settings = RunSettings {
        sample_count: cfg.sample_count,
        master_seed: cfg.master_seed,
        warmup_days: cfg.warmup_days,
        desired_temp: cfg.desired_temp,
        withdrawal: cfg.withdrawal.clone(),
        constants: cfg.constants,
    };
    let mut out = simulate_regimes(sa, &[(cfg.regime, cfg.set_point)], &settings, exec)?;
    Ok(out.remove(0))
}

/// Pointwise sum of sub-aggregate profiles simulated under the same regime.
pub fn aggregate_total(profiles: &[PowerProfile]) -> Result<MinuteSeries> {
    let first = profiles
        .first()
        .ok_or_else(|| Error::invalid("profiles", "nothing to aggregate"))?;
    if let Some(p) = profiles.iter().find(|p| p.regime != first.regime) {
        return Err(Error::invalid(
            "profiles",
            format!(
                "mixed regimes: `{}` is {} but `{}` is {}",
                first.sub_aggregate_label, first.regime, p.sub_aggregate_label, p.regime
            ),
        ));
    }
    let mut total = vec![0.0; MINUTES_PER_DAY];
    for p in profiles {
        for (t, v) in total.iter_mut().zip(p.power.iter()) {
            *t += v;
        }
    }
    Ok(MinuteSeries::from_vec_unchecked(total))
}

/// Convenience for tests and examples: a sub-aggregate with a constant outdoor
/// temperature.
pub fn constant_climate(outdoor: f64, cooling_share: f64) -> AmbientModel {
    AmbientModel::new(
        crate::series::HourlyProfile::constant(outdoor),
        cooling_share,
    )
}
