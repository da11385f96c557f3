use std::fs;
use std::path::{Path, PathBuf};

use approx::assert_relative_eq;
use ewh_flex::scenario::{
    derive_all_subaggregates, derive_subaggregates, selection_installed_power,
};
use ewh_flex::{load_scenario, AreaSelection, Error};
use tempfile::TempDir;

fn shipped_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

/// Copies the shipped scenario into a scratch directory, applying `edit` to
/// the TOML text.
fn edited(edit: impl FnOnce(String) -> String) -> (TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    for entry in fs::read_dir(shipped_dir()).unwrap() {
        let entry = entry.unwrap();
        fs::copy(entry.path(), dir.path().join(entry.file_name())).unwrap();
    }
    let path = dir.path().join("italy.scenario");
    let text = fs::read_to_string(&path).unwrap();
    fs::write(&path, edit(text)).unwrap();
    (dir, path)
}

fn invalid_field(err: Error) -> String {
    match err {
        Error::InvalidParameter { field, .. } => field,
        other => panic!("expected a validation error, got {other}"),
    }
}

#[test]
fn shipped_scenario_loads() {
    let s = load_scenario(shipped_dir().join("italy.scenario")).unwrap();
    assert_eq!(s.areas.len(), 15);
    assert_eq!(s.classes.len(), 3);
    assert_relative_eq!(s.total_installed_mw(), 4508.87, max_relative = 1e-9);
    assert_relative_eq!(s.classes[1].thermal_resistance, 0.8, max_relative = 1e-12);
    assert_eq!(s.cold_water(8).unwrap(), 20.5);
}

#[test]
fn sicily_subaggregates() {
    let s = load_scenario(shipped_dir().join("italy.scenario")).unwrap();
    let sas = derive_subaggregates(&s, "Sicily", 8).unwrap();
    // Four non-empty zones times three classes; zone F has no share.
    assert_eq!(sas.len(), 12);
    assert!(sas.iter().all(|sa| !sa.label.contains("/F/")));
    let b80 = sas
        .iter()
        .find(|sa| sa.label == "Sicily/B/PRO ECO R 80 V/3")
        .unwrap();
    assert_relative_eq!(b80.nominal_power, 476.7276e6, max_relative = 1e-12);
    let keys: Vec<u32> = sas.iter().map(|sa| sa.stream_key).collect();
    assert_eq!(keys, (0..12).collect::<Vec<_>>());
}

#[test]
fn nominal_power_is_conserved() {
    let s = load_scenario(shipped_dir().join("italy.scenario")).unwrap();
    for area in &s.areas {
        let total: f64 = derive_subaggregates(&s, &area.label, 1)
            .unwrap()
            .iter()
            .map(|sa| sa.nominal_power)
            .sum();
        let installed = area.installed_power_mw * 1e6;
        assert!(
            (total - installed).abs() <= 1e-4 * installed,
            "{}",
            area.label
        );
    }
    let all = derive_all_subaggregates(&s, 1).unwrap();
    assert!(all.len() <= 15);
    let total: f64 = all.iter().map(|sa| sa.nominal_power).sum();
    let installed = selection_installed_power(&s, &AreaSelection::All).unwrap();
    assert!((total - installed).abs() <= 1e-4 * installed);
}

#[test]
fn save_and_reload_round_trip() {
    let s = load_scenario(shipped_dir().join("italy.scenario")).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("copy.scenario");
    s.save(&path).unwrap();
    let mut back = load_scenario(&path).unwrap();
    back.source = s.source.clone();
    back.files = s.files.clone();
    assert_eq!(back, s);
}

#[test]
fn shares_not_summing_to_100_name_the_area() {
    let (_dir, path) = edited(|t| t.replace("B = 85.0, C = 7.0", "B = 85.0, C = 6.0"));
    let field = invalid_field(load_scenario(path).unwrap_err());
    assert!(field.contains("Sicily"), "{field}");
}

#[test]
fn scenario_without_areas_is_rejected() {
    let (_dir, path) = edited(|t| t.split("[[areas]]").next().unwrap().to_string());
    assert_eq!(invalid_field(load_scenario(path).unwrap_err()), "areas");
}

#[test]
fn unknown_keys_are_rejected() {
    let (_dir, path) = edited(|t| t.replace("name = \"italy\"", "name = \"italy\"\nsetpoint = 3"));
    assert!(matches!(load_scenario(path), Err(Error::Parse { .. })));
}

#[test]
fn reserved_and_duplicate_labels() {
    let (_dir, path) = edited(|t| t.replace("label = \"Lombardy\"", "label = \"all\""));
    assert!(invalid_field(load_scenario(path).unwrap_err()).contains("label"));
    let (_dir, path) = edited(|t| t.replace("label = \"Lombardy\"", "label = \"Sicily\""));
    assert_eq!(invalid_field(load_scenario(path).unwrap_err()), "areas");
}

#[test]
fn warm_mains_water_is_rejected() {
    let (dir, path) = edited(|t| t);
    let cold = dir.path().join("italy_cold_water.csv");
    let text = fs::read_to_string(&cold)
        .unwrap()
        .replace("8,20.5", "8,41.0");
    fs::write(&cold, text).unwrap();
    assert!(invalid_field(load_scenario(path).unwrap_err()).starts_with("cold_water"));
}

#[test]
fn missing_climate_month_is_reported() {
    let (dir, path) = edited(|t| t);
    let climate = dir.path().join("italy_climate.csv");
    let text: String = fs::read_to_string(&climate)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with("C,7,"))
        .map(|l| format!("{l}\n"))
        .collect();
    fs::write(&climate, text).unwrap();
    match load_scenario(path) {
        Err(Error::MissingClimateProfile { zone, month }) => {
            assert_eq!((zone.as_str(), month), ("C", 7));
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn unknown_area_and_bad_month() {
    let s = load_scenario(shipped_dir().join("italy.scenario")).unwrap();
    assert!(derive_subaggregates(&s, "Atlantis", 1).is_err());
    assert!(derive_subaggregates(&s, "Sicily", 13).is_err());
    assert!(derive_subaggregates(&s, "Sicily", 0).is_err());
}
