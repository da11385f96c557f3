//! End-to-end runs: minimum temperatures, regime simulations, flexibility
//! surfaces, and their on-disk outputs with a replay manifest.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::flexibility::{
    flexibility_surface, operating_setpoints, quarter_hour_starts, FlexibilitySurface,
    OperatingConditions,
};
use crate::mintemp::{min_temp_from_percentiles, quarter_percentiles, MinTempResult};
use crate::montecarlo::{aggregate_total, simulate_regimes, PowerProfile, Regime, RunSettings};
use crate::plot::emit_plots;
use crate::rng::{Purpose, SampleRng};
use crate::scenario::{
    check_month, load_scenario, select_subaggregates, AreaSelection, MinSetpointPolicy, Scenario,
};
use crate::series::MinuteSeries;
use crate::thermal::PhysicalConstants;

/// Stream key reserved for the minimum-temperature draws.
const MINTEMP_STREAM_KEY: u32 = u32::MAX;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub area: AreaSelection,
    pub month: u32,
    pub sample_count: u64,
    pub master_seed: u64,
    pub warmup_days: u32,
    pub windows: Vec<u32>,
    pub mintemp_samples: u64,
    pub plot: bool,
}

impl RunOptions {
    pub fn new(area: AreaSelection, month: u32) -> Self {
        Self {
            area,
            month,
            sample_count: 100_000,
            master_seed: 0,
            warmup_days: 1,
            windows: crate::flexibility::DEFAULT_WINDOWS.to_vec(),
            mintemp_samples: crate::mintemp::DEFAULT_SAMPLE_COUNT,
            plot: false,
        }
    }

    fn validate(&self) -> Result<()> {
        check_month(self.month)?;
        if self.sample_count == 0 {
            return Err(Error::invalid("samples", "must be at least 1"));
        }
        if self.windows.is_empty() || self.windows.contains(&0) {
            return Err(Error::invalid(
                "windows",
                "need one or more positive window lengths",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMinTemp {
    pub class: String,
    pub capacity: f64,
    pub result: MinTempResult,
    pub conditions: OperatingConditions,
    /// The min-regime set-point was lowered to the base set-point by policy.
    pub clamped_to_base: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinTempReport {
    pub month: u32,
    pub cold_water_temp: f64,
    pub desired_temp: f64,
    pub base_set_point: f64,
    pub classes: Vec<ClassMinTemp>,
}

impl MinTempReport {
    pub fn conditions(&self, class: &str) -> Option<&OperatingConditions> {
        self.classes
            .iter()
            .find(|c| c.class == class)
            .map(|c| &c.conditions)
    }
}

/// User minimum temperature and operating set-points of every class for one month.
///
/// Draw percentiles do not depend on the class, so they are computed once.
pub fn compute_min_temps(
    scenario: &Scenario,
    month: u32,
    mintemp_samples: u64,
    master_seed: u64,
    exec: Execution,
) -> Result<MinTempReport> {
    let cold = scenario.cold_water(month)?;
    let rng = SampleRng::new(master_seed, MINTEMP_STREAM_KEY, 0, Purpose::MinTempDraws);
    let percentiles = quarter_percentiles(&scenario.withdrawal, mintemp_samples, &rng, exec)?;
    let mut classes = Vec::new();
    for class in &scenario.classes {
        let result = min_temp_from_percentiles(
            percentiles,
            class,
            cold,
            scenario.desired_temp,
            mintemp_samples,
        )?;
        let (conditions, clamped) =
            match operating_setpoints(class, scenario.base_set_point, result.overall) {
                Ok(oc) => (oc, false),
                Err(e) => match scenario.min_setpoint_policy {
                    MinSetpointPolicy::Error => return Err(e),
                    MinSetpointPolicy::ClampToBase => {
                        if scenario.base_set_point > class.max_set_point() {
                            return Err(e);
                        }
                        (
                            OperatingConditions {
                                base_set_point: scenario.base_set_point,
                                max_set_point: class.max_set_point(),
                                min_set_point: scenario.base_set_point,
                            },
                            true,
                        )
                    }
                },
            };
        classes.push(ClassMinTemp {
            class: class.name.clone(),
            capacity: class.capacity,
            result,
            conditions,
            clamped_to_base: clamped,
        });
    }
    Ok(MinTempReport {
        month,
        cold_water_temp: cold,
        desired_temp: scenario.desired_temp,
        base_set_point: scenario.base_set_point,
        classes,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegimeRun {
    pub min_temps: Option<MinTempReport>,
    pub profiles: Vec<PowerProfile>,
    pub aggregate: BTreeMap<Regime, MinuteSeries>,
    /// Sum of the simulated sub-aggregates' nominal powers, W.
    pub nominal_power: f64,
}

/// Simulates the requested regimes for every sub-aggregate of the selection,
/// with common random inputs across regimes.
pub fn run_regimes(
    scenario: &Scenario,
    opts: &RunOptions,
    regimes: &[Regime],
    exec: Execution,
) -> Result<RegimeRun> {
    opts.validate()?;
    if regimes.is_empty() {
        return Err(Error::invalid("regime", "no regime requested"));
    }
    let subaggregates = select_subaggregates(scenario, &opts.area, opts.month)?;
    let min_temps = if regimes.contains(&Regime::Min) {
        Some(compute_min_temps(
            scenario,
            opts.month,
            opts.mintemp_samples,
            opts.master_seed,
            exec,
        )?)
    } else {
        None
    };
    let settings = RunSettings {
        sample_count: opts.sample_count,
        master_seed: opts.master_seed,
        warmup_days: opts.warmup_days,
        desired_temp: scenario.desired_temp,
        withdrawal: scenario.withdrawal.clone(),
        constants: PhysicalConstants::default(),
    };

    let mut profiles = Vec::new();
    for sa in &subaggregates {
        let set_points: Vec<(Regime, f64)> = regimes
            .iter()
            .map(|r| {
                let sp = match r {
                    Regime::Base => scenario.base_set_point,
                    Regime::Max => sa.class.max_set_point(),
                    Regime::Min => {
                        min_temps
                            .as_ref()
                            .and_then(|m| m.conditions(&sa.class.name))
                            .expect("min temperatures computed for every class")
                            .min_set_point
                    }
                };
                (*r, sp)
            })
            .collect();
        profiles.extend(simulate_regimes(sa, &set_points, &settings, exec)?);
    }

    let mut aggregate = BTreeMap::new();
    for r in regimes {
        let of_regime: Vec<PowerProfile> = profiles
            .iter()
            .filter(|p| p.regime == *r)
            .cloned()
            .collect();
        aggregate.insert(*r, aggregate_total(&of_regime)?);
    }
    Ok(RegimeRun {
        min_temps,
        profiles: profiles.clone(),
        aggregate,
        nominal_power: subaggregates.iter().map(|s| s.nominal_power).sum(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlexibilityRun {
    pub regimes: RegimeRun,
    pub surface: FlexibilitySurface,
}

impl FlexibilityRun {
    pub fn min_temps(&self) -> &MinTempReport {
        self.regimes
            .min_temps
            .as_ref()
            .expect("flexibility runs include the min regime")
    }

    pub fn profile(&self, regime: Regime) -> &MinuteSeries {
        &self.regimes.aggregate[&regime]
    }
}

/// Three-regime simulation followed by the flexibility surface of the
/// aggregate.
pub fn run_flexibility(
    scenario: &Scenario,
    opts: &RunOptions,
    exec: Execution,
) -> Result<FlexibilityRun> {
    let regimes = run_regimes(scenario, opts, &Regime::ALL, exec)?;
    let surface = flexibility_surface(
        &regimes.aggregate[&Regime::Base],
        &regimes.aggregate[&Regime::Max],
        &regimes.aggregate[&Regime::Min],
        &opts.windows,
        &quarter_hour_starts(),
    )?;
    Ok(FlexibilityRun { regimes, surface })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum Command {
    MinTemp,
    Simulate { regimes: Vec<Regime> },
    Flexibility,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: Command,
    pub scenario_path: PathBuf,
    pub scenario_sha256: String,
    pub options: RunOptions,
    pub output_dir: PathBuf,
    /// Output path relative to `output_dir` → SHA-256 of its bytes.
    pub files: BTreeMap<String, String>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Tracks written files so a failed run leaves nothing behind.
struct OutputWriter {
    root: PathBuf,
    written: BTreeMap<String, String>,
}

impl OutputWriter {
    fn write(&mut self, relative: &str, bytes: &[u8]) -> Result<()> {
        let path = self.root.join(relative);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        self.written.insert(relative.to_string(), sha256_hex(bytes));
        Ok(())
    }

    fn record_existing(&mut self, path: &Path) -> Result<()> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let relative = path
            .strip_prefix(&self.root)
            .unwrap_or(path)
            .to_string_lossy()
            .replace('\\', "/");
        self.written.insert(relative, sha256_hex(&bytes));
        Ok(())
    }

    fn discard(&self) {
        for relative in self.written.keys() {
            let _ = fs::remove_file(self.root.join(relative));
        }
    }
}

fn file_stem(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect()
}

pub fn profile_csv(power: &MinuteSeries) -> String {
    let mut s = String::from("minute,power_w\n");
    for (m, p) in power.iter().enumerate() {
        let _ = writeln!(s, "{m},{p}");
    }
    s
}

pub fn surface_csv(surface: &FlexibilitySurface) -> String {
    let mut s = String::from("window_min,start_min,dp_pos_w,dp_neg_w\n");
    for (wi, w) in surface.windows.iter().enumerate() {
        for (si, start) in surface.starts.iter().enumerate() {
            let _ = writeln!(
                s,
                "{w},{start},{},{}",
                surface.positive[wi][si], surface.negative[wi][si]
            );
        }
    }
    s
}

/// Parses `window_min,start_min,dp_pos_w,dp_neg_w` rows back into grids.
pub fn read_surface_csv(text: &str) -> Result<Vec<(u32, u32, f64, f64)>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    reader
        .deserialize::<(u32, u32, f64, f64)>()
        .map(|r| {
            r.map_err(|e| Error::Parse {
                path: PathBuf::from("flexibility.csv"),
                message: e.to_string(),
            })
        })
        .collect()
}

fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes =
        serde_json::to_vec_pretty(value).map_err(|e| Error::Serialize(e.to_string()))?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn write_profiles(out: &mut OutputWriter, run: &RegimeRun) -> Result<()> {
    for p in &run.profiles {
        out.write(
            &format!(
                "profiles/{}__{}.csv",
                file_stem(&p.sub_aggregate_label),
                p.regime
            ),
            profile_csv(&p.power).as_bytes(),
        )?;
    }
    for (regime, power) in &run.aggregate {
        out.write(
            &format!("aggregate__{regime}.csv"),
            profile_csv(power).as_bytes(),
        )?;
    }
    Ok(())
}

fn produce(
    out: &mut OutputWriter,
    command: &Command,
    scenario: &Scenario,
    opts: &RunOptions,
    exec: Execution,
) -> Result<()> {
    match command {
        Command::MinTemp => {
            let report = compute_min_temps(
                scenario,
                opts.month,
                opts.mintemp_samples,
                opts.master_seed,
                exec,
            )?;
            out.write("min_temp.json", &to_json(&report)?)
        }
        Command::Simulate { regimes } => {
            let run = run_regimes(scenario, opts, regimes, exec)?;
            if let Some(m) = &run.min_temps {
                out.write("min_temp.json", &to_json(m)?)?;
            }
            write_profiles(out, &run)
        }
        Command::Flexibility => {
            let run = run_flexibility(scenario, opts, exec)?;
            out.write("min_temp.json", &to_json(run.min_temps())?)?;
            write_profiles(out, &run.regimes)?;
            out.write("flexibility.csv", surface_csv(&run.surface).as_bytes())?;
            out.write("flexibility.json", &to_json(&run.surface)?)?;
            if opts.plot {
                for path in emit_plots(&run.surface, out.root.join("plots"))? {
                    out.record_existing(&path)?;
                }
            }
            Ok(())
        }
    }
}

/// Runs `command` on the scenario at `scenario_path`, writing outputs and a
/// manifest into `out_dir`. On failure every file written so far is removed.
pub fn execute(
    command: &Command,
    scenario_path: impl AsRef<Path>,
    opts: &RunOptions,
    out_dir: impl AsRef<Path>,
    exec: Execution,
) -> Result<RunManifest> {
    let scenario_path = scenario_path.as_ref();
    let out_dir = out_dir.as_ref();
    let scenario_bytes = fs::read(scenario_path).map_err(|e| Error::io(scenario_path, e))?;
    let scenario = load_scenario(scenario_path)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let mut out = OutputWriter {
        root: out_dir.to_path_buf(),
        written: BTreeMap::new(),
    };
    if let Err(e) = produce(&mut out, command, &scenario, opts, exec) {
        out.discard();
        return Err(e);
    }
    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        command: command.clone(),
        scenario_path: scenario_path.to_path_buf(),
        scenario_sha256: sha256_hex(&scenario_bytes),
        options: opts.clone(),
        output_dir: out_dir.to_path_buf(),
        files: out.written.clone(),
    };
    let manifest_path = out_dir.join(MANIFEST_FILE);
    if let Err(e) = to_json(&manifest)
        .and_then(|b| fs::write(&manifest_path, b).map_err(|e| Error::io(&manifest_path, e)))
    {
        out.discard();
        return Err(e);
    }
    Ok(manifest)
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<RunManifest> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayReport {
    pub scenario_matches: bool,
    /// Files whose checksum differs or which are missing from the replay.
    pub mismatched: Vec<String>,
    pub checked: usize,
}

impl ReplayReport {
    pub fn is_exact(&self) -> bool {
        self.scenario_matches && self.mismatched.is_empty()
    }
}

/// Re-runs a manifest into `out_dir` and compares every output checksum.
pub fn replay_manifest(
    manifest_path: impl AsRef<Path>,
    out_dir: impl AsRef<Path>,
    exec: Execution,
) -> Result<ReplayReport> {
    let original = read_manifest(manifest_path)?;
    let scenario_bytes =
        fs::read(&original.scenario_path).map_err(|e| Error::io(&original.scenario_path, e))?;
    let scenario_matches = sha256_hex(&scenario_bytes) == original.scenario_sha256;
    let replayed = execute(
        &original.command,
        &original.scenario_path,
        &original.options,
        out_dir,
        exec,
    )?;
    let mut mismatched: Vec<String> = original
        .files
        .iter()
        .filter(|(f, sum)| replayed.files.get(*f) != Some(*sum))
        .map(|(f, _)| f.clone())
        .collect();
    mismatched.extend(
        replayed
            .files
            .keys()
            .filter(|f| !original.files.contains_key(*f))
            .cloned(),
    );
    Ok(ReplayReport {
        scenario_matches,
        mismatched,
        checked: original.files.len(),
    })
}

/// Re-renders charts from a `flexibility.json` written by a previous run.
pub fn plot_from_output(out_dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let out_dir = out_dir.as_ref();
    let path = out_dir.join("flexibility.json");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let surface: FlexibilitySurface = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.clone(),
        message: e.to_string(),
    })?;
    emit_plots(&surface, out_dir.join("plots"))
}
