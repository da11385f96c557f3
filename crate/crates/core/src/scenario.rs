//! Scenario files: heater classes, aggregation areas and the climate, mains
//! water and demand data they reference.
//!
//! A scenario is a TOML document. Bulk time series live in three CSV files
//! whose paths are resolved relative to the scenario file:
//!
//! * climate profiles: `zone,month,hour,temp_c` (outdoor °C)
//! * cold water: `month,temp_c`
//! * withdrawal distribution: `hour,percent`

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inputs::{AmbientModel, WithdrawalModel};
use crate::montecarlo::SubAggregate;
use crate::series::{HourlyProfile, HOURS_PER_DAY};
use crate::thermal::{derive_thermal_resistance, EwhClass};

const SHARE_TOLERANCE: f64 = 0.01;

/// What to do when a class's user minimum temperature places the min-regime
/// set-point above the base set-point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MinSetpointPolicy {
    /// Abort the run.
    #[default]
    Error,
    /// Use the base set-point for that class: it offers no downward flexibility.
    ClampToBase,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Area {
    pub label: String,
    pub installed_power_mw: f64,
    /// Climate zone → share of installed power, %.
    pub zone_shares: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub source: PathBuf,
    pub classes: Vec<EwhClass>,
    pub areas: Vec<Area>,
    /// (zone, month) → outdoor hourly temperature.
    pub climate_profiles: BTreeMap<(String, u32), HourlyProfile>,
    /// month → mains water temperature, °C.
    pub cold_water_monthly: BTreeMap<u32, f64>,
    pub withdrawal: WithdrawalModel,
    /// %
    pub cooling_share: f64,
    pub desired_temp: f64,
    pub base_set_point: f64,
    pub reference_ambient_for_r: f64,
    pub standing_loss_test_temp: f64,
    pub min_setpoint_policy: MinSetpointPolicy,
    pub files: DataFiles,
}

/// Data file names as written in the scenario document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataFiles {
    pub climate_profiles: String,
    pub cold_water: String,
    pub withdrawal_distribution: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioDoc {
    name: String,
    desired_temp_c: f64,
    base_set_point_c: f64,
    reference_ambient_c: f64,
    #[serde(default = "default_test_temp")]
    standing_loss_test_temp_c: f64,
    cooling_share_pct: f64,
    #[serde(default)]
    min_setpoint_policy: MinSetpointPolicy,
    data: DataFiles,
    withdrawal: WithdrawalDoc,
    classes: Vec<ClassDoc>,
    #[serde(default)]
    areas: Vec<Area>,
}

fn default_test_temp() -> f64 {
    65.0
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WithdrawalDoc {
    daily_volume_l: f64,
    duration_min: u32,
    duration_max: u32,
    flow_min_lpm: f64,
    flow_max_lpm: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ClassDoc {
    name: String,
    capacity_l: f64,
    nominal_power_w: f64,
    max_temp_c: f64,
    deadband_c: f64,
    standing_loss_kwh_day: f64,
    diffusion_rate: f64,
}

fn parse_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let text = read_to_string(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    reader
        .deserialize()
        .map(|r| {
            r.map_err(|e| {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                parse_err(path, format!("line {line}: {e}"))
            })
        })
        .collect()
}

#[derive(Debug, Serialize, Deserialize)]
struct ClimateRow {
    zone: String,
    month: u32,
    hour: usize,
    temp_c: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct ColdRow {
    month: u32,
    temp_c: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct WithdrawalRow {
    hour: usize,
    percent: f64,
}

fn load_climate(path: &Path) -> Result<BTreeMap<(String, u32), HourlyProfile>> {
    let mut partial: BTreeMap<(String, u32), [Option<f64>; HOURS_PER_DAY]> = BTreeMap::new();
    for row in read_csv::<ClimateRow>(path)? {
        if !(1..=12).contains(&row.month) || row.hour >= HOURS_PER_DAY {
            return Err(parse_err(
                path,
                format!(
                    "zone {} month {} hour {}: out of range",
                    row.zone, row.month, row.hour
                ),
            ));
        }
        let slot = &mut partial.entry((row.zone.clone(), row.month)).or_default()[row.hour];
        if slot.replace(row.temp_c).is_some() {
            return Err(parse_err(
                path,
                format!(
                    "duplicate entry for zone {} month {} hour {}",
                    row.zone, row.month, row.hour
                ),
            ));
        }
    }
    partial
        .into_iter()
        .map(|(key, hours)| {
            let mut values = [0.0; HOURS_PER_DAY];
            for (h, v) in hours.iter().enumerate() {
                values[h] = v.ok_or_else(|| {
                    parse_err(
                        path,
                        format!("zone {} month {}: missing hour {h}", key.0, key.1),
                    )
                })?;
            }
            Ok((key, HourlyProfile::new(values)?))
        })
        .collect()
}

fn load_cold_water(path: &Path) -> Result<BTreeMap<u32, f64>> {
    let mut out = BTreeMap::new();
    for row in read_csv::<ColdRow>(path)? {
        if !(1..=12).contains(&row.month) {
            return Err(parse_err(path, format!("month {} out of range", row.month)));
        }
        if out.insert(row.month, row.temp_c).is_some() {
            return Err(parse_err(path, format!("duplicate month {}", row.month)));
        }
    }
    Ok(out)
}

fn load_distribution(path: &Path) -> Result<HourlyProfile> {
    let mut values = [None; HOURS_PER_DAY];
    for row in read_csv::<WithdrawalRow>(path)? {
        if row.hour >= HOURS_PER_DAY {
            return Err(parse_err(path, format!("hour {} out of range", row.hour)));
        }
        if values[row.hour].replace(row.percent).is_some() {
            return Err(parse_err(path, format!("duplicate hour {}", row.hour)));
        }
    }
    let mut out = [0.0; HOURS_PER_DAY];
    for (h, v) in values.iter().enumerate() {
        out[h] = v.ok_or_else(|| parse_err(path, format!("missing hour {h}")))?;
    }
    HourlyProfile::new(out)
}

/// Reads, validates and resolves a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = read_to_string(path)?;
    let doc: ScenarioDoc = toml::from_str(&text).map_err(|e| parse_err(path, e.to_string()))?;
    let dir = path.parent().unwrap_or_else(|| Path::new("."));

    let climate_profiles = load_climate(&dir.join(&doc.data.climate_profiles))?;
    let cold_water_monthly = load_cold_water(&dir.join(&doc.data.cold_water))?;
    let distribution = load_distribution(&dir.join(&doc.data.withdrawal_distribution))?;

    let mut classes = Vec::with_capacity(doc.classes.len());
    for c in &doc.classes {
        let thermal_resistance = derive_thermal_resistance(
            c.standing_loss_kwh_day,
            doc.standing_loss_test_temp_c,
            doc.reference_ambient_c,
        )
        .map_err(|e| Error::invalid(format!("class[{}]", c.name), e.to_string()))?;
        classes.push(EwhClass {
            name: c.name.clone(),
            capacity: c.capacity_l,
            thermal_resistance,
            nominal_power: c.nominal_power_w,
            max_temp: c.max_temp_c,
            deadband: c.deadband_c,
            standing_loss: c.standing_loss_kwh_day,
            diffusion_rate: c.diffusion_rate,
        });
    }

    let scenario = Scenario {
        name: doc.name,
        source: path.to_path_buf(),
        classes,
        areas: doc.areas,
        climate_profiles,
        cold_water_monthly,
        withdrawal: WithdrawalModel {
            hourly_distribution: distribution,
            daily_volume: doc.withdrawal.daily_volume_l,
            duration_min: doc.withdrawal.duration_min,
            duration_max: doc.withdrawal.duration_max,
            flow_min: doc.withdrawal.flow_min_lpm,
            flow_max: doc.withdrawal.flow_max_lpm,
        },
        cooling_share: doc.cooling_share_pct,
        desired_temp: doc.desired_temp_c,
        base_set_point: doc.base_set_point_c,
        reference_ambient_for_r: doc.reference_ambient_c,
        standing_loss_test_temp: doc.standing_loss_test_temp_c,
        min_setpoint_policy: doc.min_setpoint_policy,
        files: doc.data,
    };
    scenario.validate()?;
    Ok(scenario)
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.classes.is_empty() {
            return Err(Error::invalid(
                "classes",
                "at least one heater class is required",
            ));
        }
        for c in &self.classes {
            c.validate()?;
        }
        let diffusion: f64 = self.classes.iter().map(|c| c.diffusion_rate * 100.0).sum();
        if (diffusion - 100.0).abs() > SHARE_TOLERANCE {
            return Err(Error::invalid(
                "classes.diffusion_rate",
                format!("diffusion rates sum to {diffusion}%, expected 100%"),
            ));
        }
        if self.areas.is_empty() {
            return Err(Error::invalid(
                "areas",
                "at least one aggregation area is required",
            ));
        }
        for area in &self.areas {
            let field = |f: &str| format!("area[{}].{f}", area.label);
            if area.label.eq_ignore_ascii_case("all") {
                return Err(Error::invalid(field("label"), "`all` is reserved"));
            }
            if !(area.installed_power_mw >= 0.0 && area.installed_power_mw.is_finite()) {
                return Err(Error::invalid(
                    field("installed_power_mw"),
                    "must be non-negative",
                ));
            }
            if let Some((z, _)) = area.zone_shares.iter().find(|(_, s)| **s < 0.0) {
                return Err(Error::invalid(
                    field("zone_shares"),
                    format!("zone {z} is negative"),
                ));
            }
            let total: f64 = area.zone_shares.values().sum();
            if (total - 100.0).abs() > SHARE_TOLERANCE {
                return Err(Error::invalid(
                    field("zone_shares"),
                    format!("zone shares sum to {total}%, expected 100%"),
                ));
            }
            for (zone, share) in &area.zone_shares {
                if *share == 0.0 {
                    continue;
                }
                for month in 1..=12 {
                    if !self.climate_profiles.contains_key(&(zone.clone(), month)) {
                        return Err(Error::MissingClimateProfile {
                            zone: zone.clone(),
                            month,
                        });
                    }
                }
            }
        }
        let mut seen = std::collections::BTreeSet::new();
        if let Some(dup) = self.areas.iter().find(|a| !seen.insert(a.label.as_str())) {
            return Err(Error::invalid(
                "areas",
                format!("duplicate area label {}", dup.label),
            ));
        }

        for month in 1..=12 {
            let cold = self
                .cold_water_monthly
                .get(&month)
                .ok_or_else(|| Error::invalid("cold_water", format!("missing month {month}")))?;
            if !(*cold < self.desired_temp) {
                return Err(Error::invalid(
                    format!("cold_water[{month}]"),
                    format!(
                        "{cold} °C is not below the desired temperature {} °C",
                        self.desired_temp
                    ),
                ));
            }
            for c in &self.classes {
                if !(*cold < self.base_set_point - c.half_deadband()) {
                    return Err(Error::invalid(
                        "base_set_point_c",
                        format!(
                            "lower threshold of class {} is not above cold water in month {month}",
                            c.name
                        ),
                    ));
                }
            }
        }
        for c in &self.classes {
            if self.base_set_point + c.half_deadband() > c.max_temp {
                return Err(Error::invalid(
                    "base_set_point_c",
                    format!(
                        "upper threshold exceeds the maximal temperature of class {}",
                        c.name
                    ),
                ));
            }
        }
        if !(self.desired_temp.is_finite()) {
            return Err(Error::invalid("desired_temp_c", "must be finite"));
        }
        self.withdrawal.validate()?;
        if !(0.0..=100.0).contains(&self.cooling_share) {
            return Err(Error::invalid("cooling_share_pct", "must lie in [0, 100]"));
        }
        Ok(())
    }

    pub fn area(&self, label: &str) -> Result<&Area> {
        self.areas
            .iter()
            .find(|a| a.label == label)
            .ok_or_else(|| Error::invalid("area", format!("unknown area `{label}`")))
    }

    pub fn total_installed_mw(&self) -> f64 {
        self.areas.iter().map(|a| a.installed_power_mw).sum()
    }

    pub fn cold_water(&self, month: u32) -> Result<f64> {
        check_month(month)?;
        self.cold_water_monthly
            .get(&month)
            .copied()
            .ok_or_else(|| Error::invalid("cold_water", format!("missing month {month}")))
    }

    fn ambient_model(&self, zone: &str, month: u32) -> Result<AmbientModel> {
        let profile = self
            .climate_profiles
            .get(&(zone.to_string(), month))
            .ok_or_else(|| Error::MissingClimateProfile {
                zone: zone.to_string(),
                month,
            })?;
        Ok(AmbientModel::new(*profile, self.cooling_share))
    }

    /// Writes the scenario document to `path` and its CSV data files next to it.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let dir = path.parent().unwrap_or_else(|| Path::new("."));
        let doc = ScenarioDoc {
            name: self.name.clone(),
            desired_temp_c: self.desired_temp,
            base_set_point_c: self.base_set_point,
            reference_ambient_c: self.reference_ambient_for_r,
            standing_loss_test_temp_c: self.standing_loss_test_temp,
            cooling_share_pct: self.cooling_share,
            min_setpoint_policy: self.min_setpoint_policy,
            data: self.files.clone(),
            withdrawal: WithdrawalDoc {
                daily_volume_l: self.withdrawal.daily_volume,
                duration_min: self.withdrawal.duration_min,
                duration_max: self.withdrawal.duration_max,
                flow_min_lpm: self.withdrawal.flow_min,
                flow_max_lpm: self.withdrawal.flow_max,
            },
            classes: self
                .classes
                .iter()
                .map(|c| ClassDoc {
                    name: c.name.clone(),
                    capacity_l: c.capacity,
                    nominal_power_w: c.nominal_power,
                    max_temp_c: c.max_temp,
                    deadband_c: c.deadband,
                    standing_loss_kwh_day: c.standing_loss,
                    diffusion_rate: c.diffusion_rate,
                })
                .collect(),
            areas: self.areas.clone(),
        };
        let text = toml::to_string_pretty(&doc).map_err(|e| Error::Serialize(e.to_string()))?;
        fs::write(path, text).map_err(|e| Error::io(path, e))?;

        write_csv(
            &dir.join(&self.files.climate_profiles),
            self.climate_profiles.iter().flat_map(|((zone, month), p)| {
                p.values()
                    .iter()
                    .enumerate()
                    .map(move |(hour, t)| ClimateRow {
                        zone: zone.clone(),
                        month: *month,
                        hour,
                        temp_c: *t,
                    })
            }),
        )?;
        write_csv(
            &dir.join(&self.files.cold_water),
            self.cold_water_monthly.iter().map(|(month, t)| ColdRow {
                month: *month,
                temp_c: *t,
            }),
        )?;
        write_csv(
            &dir.join(&self.files.withdrawal_distribution),
            self.withdrawal
                .hourly_distribution
                .values()
                .iter()
                .enumerate()
                .map(|(hour, percent)| WithdrawalRow {
                    hour,
                    percent: *percent,
                }),
        )
    }
}

fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)
        .map_err(|e| Error::io(path, std::io::Error::other(e.to_string())))?;
    for row in rows {
        w.serialize(row)
            .map_err(|e| Error::Serialize(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn check_month(month: u32) -> Result<()> {
    if (1..=12).contains(&month) {
        Ok(())
    } else {
        Err(Error::invalid("month", format!("{month} is not in 1..=12")))
    }
}

/// Which part of the scenario to simulate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum AreaSelection {
    All,
    Named(String),
}

impl AreaSelection {
    pub fn parse(s: &str) -> Self {
        if s.eq_ignore_ascii_case("all") {
            AreaSelection::All
        } else {
            AreaSelection::Named(s.to_string())
        }
    }

    pub fn label(&self) -> &str {
        match self {
            AreaSelection::All => "all",
            AreaSelection::Named(s) => s,
        }
    }
}

fn build_subaggregate(
    scenario: &Scenario,
    scope: &str,
    zone: &str,
    class: &EwhClass,
    nominal_power: f64,
    month: u32,
    stream_key: u32,
) -> Result<SubAggregate> {
    Ok(SubAggregate {
        label: format!("{scope}/{zone}/{}", class.name),
        class: class.clone(),
        nominal_power,
        ambient_model: scenario.ambient_model(zone, month)?,
        cold_water_temp: scenario.cold_water(month)?,
        stream_key,
    })
}

/// One sub-aggregate per (non-zero zone share × class) of an area. Nominal
/// power is installed power × zone share × class diffusion rate.
pub fn derive_subaggregates(
    scenario: &Scenario,
    area: &str,
    month: u32,
) -> Result<Vec<SubAggregate>> {
    check_month(month)?;
    let area = scenario.area(area)?;
    let mut out = Vec::new();
    for (zone, share) in &area.zone_shares {
        if *share == 0.0 {
            continue;
        }
        for class in &scenario.classes {
            let power = area.installed_power_mw * 1e6 * share / 100.0 * class.diffusion_rate;
            let key = out.len() as u32;
            out.push(build_subaggregate(
                scenario,
                &area.label,
                zone,
                class,
                power,
                month,
                key,
            )?);
        }
    }
    Ok(out)
}

/// Sub-aggregates of the whole territory. Populations sharing a climate zone
/// and class are statistically identical across areas and are merged, with
/// their nominal powers summed.
pub fn derive_all_subaggregates(scenario: &Scenario, month: u32) -> Result<Vec<SubAggregate>> {
    check_month(month)?;
    let mut zone_power: BTreeMap<&str, f64> = BTreeMap::new();
    for area in &scenario.areas {
        for (zone, share) in &area.zone_shares {
            if *share > 0.0 {
                *zone_power.entry(zone.as_str()).or_default() +=
                    area.installed_power_mw * 1e6 * share / 100.0;
            }
        }
    }
    let mut out = Vec::new();
    for (zone, power) in zone_power {
        for class in &scenario.classes {
            let key = out.len() as u32;
            out.push(build_subaggregate(
                scenario,
                "all",
                zone,
                class,
                power * class.diffusion_rate,
                month,
                key,
            )?);
        }
    }
    Ok(out)
}

pub fn select_subaggregates(
    scenario: &Scenario,
    selection: &AreaSelection,
    month: u32,
) -> Result<Vec<SubAggregate>> {
    match selection {
        AreaSelection::All => derive_all_subaggregates(scenario, month),
        AreaSelection::Named(label) => derive_subaggregates(scenario, label, month),
    }
}

/// Installed power covered by a selection, W.
pub fn selection_installed_power(scenario: &Scenario, selection: &AreaSelection) -> Result<f64> {
    Ok(match selection {
        AreaSelection::All => scenario.total_installed_mw() * 1e6,
        AreaSelection::Named(label) => scenario.area(label)?.installed_power_mw * 1e6,
    })
}
