//! Operating conditions and the flexibility surface.
//!
//! Three set-point regimes are compared: the users' default (base), the one
//! placing the upper thermostat threshold at the maximal temperature (max),
//! and the one placing the lower threshold at the user acceptable minimum
//! temperature (min). Positive flexibility at `(Δt, τ)` is the smallest excess
//! of the max-regime power over the baseline within `[τ, τ + Δt)`; negative
//! flexibility is the smallest deficit of the min-regime power.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{MinuteSeries, MINUTES_PER_DAY};
use crate::thermal::EwhClass;

pub const DEFAULT_WINDOWS: [u32; 4] = [15, 30, 45, 60];

/// Starts τ = q·15 min, q = 0..95.
pub fn quarter_hour_starts() -> Vec<u32> {
    (0..96).map(|q| q * 15).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingConditions {
    pub base_set_point: f64,
    pub max_set_point: f64,
    pub min_set_point: f64,
}

pub fn operating_setpoints(
    class: &EwhClass,
    base: f64,
    user_min_temp: f64,
) -> Result<OperatingConditions> {
    let half = class.half_deadband();
    let max_set_point = class.max_set_point();
    let min_set_point = user_min_temp + half;
    if user_min_temp + class.deadband > class.max_temp {
        return Err(Error::InfeasibleScenario(format!(
            "class {}: user minimum temperature {user_min_temp:.3} °C plus the dead-band \
             exceeds the maximal temperature {} °C",
            class.name, class.max_temp
        )));
    }
    if min_set_point > base {
        return Err(Error::InfeasibleScenario(format!(
            "class {}: min-regime set-point {min_set_point:.3} °C lies above the base \
             set-point {base} °C",
            class.name
        )));
    }
    if base > max_set_point {
        return Err(Error::InfeasibleScenario(format!(
            "class {}: base set-point {base} °C lies above the max-regime set-point \
             {max_set_point} °C",
            class.name
        )));
    }
    Ok(OperatingConditions {
        base_set_point: base,
        max_set_point,
        min_set_point,
    })
}

/// Smallest `upper − lower` over minutes `start .. start + window` (wrapping
/// past midnight), floored at zero.
pub fn window_min_difference(
    upper: &MinuteSeries,
    lower: &MinuteSeries,
    start: usize,
    window: usize,
) -> f64 {
    raw_window_min(upper, lower, start, window).max(0.0)
}

fn raw_window_min(upper: &MinuteSeries, lower: &MinuteSeries, start: usize, window: usize) -> f64 {
    (start..start + window.max(1))
        .map(|m| upper.at_wrapped(m) - lower.at_wrapped(m))
        .fold(f64::INFINITY, f64::min)
}

/// Per-minute excursions where `upper < lower`, summarized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderingViolation {
    /// Time-averaged negative excursion over the day, W.
    pub mean_excursion: f64,
    /// Largest single-minute negative excursion, W.
    pub max_excursion: f64,
}

pub fn ordering_violation(upper: &MinuteSeries, lower: &MinuteSeries) -> OrderingViolation {
    let mut sum = 0.0;
    let mut max: f64 = 0.0;
    for (u, l) in upper.iter().zip(lower.iter()) {
        let gap = (l - u).max(0.0);
        sum += gap;
        max = max.max(gap);
    }
    OrderingViolation {
        mean_excursion: sum / MINUTES_PER_DAY as f64,
        max_excursion: max,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlexibilitySurface {
    /// Window lengths Δt, minutes.
    pub windows: Vec<u32>,
    /// Window starts τ, minutes after midnight.
    pub starts: Vec<u32>,
    /// ΔP⁺ in W, indexed `[window][start]`.
    pub positive: Vec<Vec<f64>>,
    /// ΔP⁻ in W, indexed `[window][start]`.
    pub negative: Vec<Vec<f64>>,
    /// Clamped mass of `P_max < P_base`.
    pub positive_violation: OrderingViolation,
    /// Clamped mass of `P_base < P_min`.
    pub negative_violation: OrderingViolation,
}

impl FlexibilitySurface {
    pub fn is_empty(&self) -> bool {
        self.windows.is_empty() || self.starts.is_empty()
    }

    pub fn window_index(&self, window: u32) -> Option<usize> {
        self.windows.iter().position(|w| *w == window)
    }
}

pub fn flexibility_surface(
    base: &MinuteSeries,
    max: &MinuteSeries,
    min: &MinuteSeries,
    windows: &[u32],
    starts: &[u32],
) -> Result<FlexibilitySurface> {
    if let Some(w) = windows.iter().find(|w| **w == 0) {
        return Err(Error::invalid(
            "windows",
            format!("window length {w} must be ≥ 1"),
        ));
    }
    let grid = |upper: &MinuteSeries, lower: &MinuteSeries| -> Vec<Vec<f64>> {
        windows
            .iter()
            .map(|w| {
                starts
                    .iter()
                    .map(|s| window_min_difference(upper, lower, *s as usize, *w as usize))
                    .collect()
            })
            .collect()
    };
    Ok(FlexibilitySurface {
        windows: windows.to_vec(),
        starts: starts.to_vec(),
        positive: grid(max, base),
        negative: grid(base, min),
        positive_violation: ordering_violation(max, base),
        negative_violation: ordering_violation(base, min),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn class() -> EwhClass {
        EwhClass {
            name: "80".into(),
            capacity: 80.0,
            thermal_resistance: 0.8,
            nominal_power: 1200.0,
            max_temp: 75.0,
            deadband: 5.0,
            standing_loss: 1.35,
            diffusion_rate: 0.6,
        }
    }

    fn series(f: impl Fn(usize) -> f64) -> MinuteSeries {
        MinuteSeries::new((0..1440).map(f).collect()).unwrap()
    }

    #[test]
    fn setpoints() {
        let oc = operating_setpoints(&class(), 65.0, 40.0).unwrap();
        assert_eq!(oc.max_set_point, 72.5);
        assert_eq!(oc.min_set_point, 42.5);
        let oc = operating_setpoints(&class(), 65.0, 50.54).unwrap();
        assert!((oc.min_set_point - 53.04).abs() < 1e-12);
        assert!(operating_setpoints(&class(), 65.0, 63.0).is_err());
        assert!(operating_setpoints(&class(), 65.0, 71.0).is_err());
    }

    #[test]
    fn window_cases() {
        let lower = MinuteSeries::constant(10.0);
        assert_eq!(
            window_min_difference(&MinuteSeries::constant(13.0), &lower, 700, 45),
            3.0
        );
        let upper = series(|m| match m {
            0 => 15.0,
            1 => 13.0,
            2 => 17.0,
            _ => 100.0,
        });
        assert_eq!(window_min_difference(&upper, &lower, 0, 3), 3.0);
        assert_eq!(window_min_difference(&lower, &lower, 0, 60), 0.0);
        // Negative differences clamp to zero.
        assert_eq!(window_min_difference(&lower, &upper, 0, 3), 0.0);
        // Wraps past midnight.
        let upper = series(|m| if m == 5 { 11.0 } else { 20.0 });
        assert_eq!(window_min_difference(&upper, &lower, 1430, 16), 1.0);
        assert_eq!(window_min_difference(&upper, &lower, 1430, 15), 10.0);
    }

    #[test]
    fn identical_max_gives_zero_positive() {
        let b = series(|m| (m as f64).sin() + 5.0);
        let s = flexibility_surface(
            &b,
            &b,
            &MinuteSeries::zeros(),
            &DEFAULT_WINDOWS,
            &quarter_hour_starts(),
        )
        .unwrap();
        assert!(s.positive.iter().flatten().all(|v| *v == 0.0));
        assert_eq!(s.positive_violation.max_excursion, 0.0);
    }

    #[test]
    fn zero_window_rejected() {
        let b = MinuteSeries::zeros();
        assert!(flexibility_surface(&b, &b, &b, &[0], &[0]).is_err());
    }

    fn arb_series() -> impl Strategy<Value = MinuteSeries> {
        prop::collection::vec(-50.0f64..50.0, 1440).prop_map(|v| MinuteSeries::new(v).unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn matches_exhaustive_scan(b in arb_series(), mx in arb_series(), mn in arb_series()) {
            let starts = quarter_hour_starts();
            let s = flexibility_surface(&b, &mx, &mn, &DEFAULT_WINDOWS, &starts).unwrap();
            let bv = b.as_slice();
            let xv = mx.as_slice();
            let nv = mn.as_slice();
            for (wi, w) in DEFAULT_WINDOWS.iter().enumerate() {
                for (si, st) in starts.iter().enumerate() {
                    let mut best_pos = f64::MAX;
                    let mut best_neg = f64::MAX;
                    for k in 0..*w as usize {
                        let m = (*st as usize + k) % 1440;
                        best_pos = best_pos.min(xv[m] - bv[m]);
                        best_neg = best_neg.min(bv[m] - nv[m]);
                    }
                    prop_assert_eq!(s.positive[wi][si], if best_pos < 0.0 { 0.0 } else { best_pos });
                    prop_assert_eq!(s.negative[wi][si], if best_neg < 0.0 { 0.0 } else { best_neg });
                }
            }
        }

        #[test]
        fn non_increasing_in_window(b in arb_series(), mx in arb_series(), mn in arb_series()) {
            let s = flexibility_surface(&b, &mx, &mn, &DEFAULT_WINDOWS, &quarter_hour_starts()).unwrap();
            for grid in [&s.positive, &s.negative] {
                for w in 1..grid.len() {
                    for q in 0..96 {
                        prop_assert!(grid[w][q] <= grid[w - 1][q]);
                        prop_assert!(grid[w][q] >= 0.0);
                    }
                }
            }
        }

        #[test]
        fn rotation_equivariant(b in arb_series(), mx in arb_series(), mn in arb_series(), q in 0usize..96) {
            let starts = quarter_hour_starts();
            let s = flexibility_surface(&b, &mx, &mn, &DEFAULT_WINDOWS, &starts).unwrap();
            let shift = q * 15;
            let r = flexibility_surface(
                &b.rotate_left(shift), &mx.rotate_left(shift), &mn.rotate_left(shift),
                &DEFAULT_WINDOWS, &starts,
            ).unwrap();
            for w in 0..4 {
                for i in 0..96 {
                    prop_assert_eq!(r.positive[w][i], s.positive[w][(i + q) % 96]);
                    prop_assert_eq!(r.negative[w][i], s.negative[w][(i + q) % 96]);
                }
            }
        }
    }
}
