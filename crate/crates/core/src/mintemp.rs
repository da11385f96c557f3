//! User acceptable minimum tank temperature.
//!
//! For each quarter-hour of the day we take the 99th percentile of the
//! pre-mix volume drawn in that quarter over many simulated days, then find the
//! lowest starting tank temperature that still leaves the tank at the desired
//! delivery temperature after that volume has been drawn (mixing included,
//! shell losses and heating ignored). The daily requirement is the maximum
//! over quarters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{map_chunks, Execution};
use crate::inputs::{events_to_flow, gen_withdrawal_events_into, WithdrawalModel};
use crate::rng::SampleRng;
use crate::series::{MinuteSeries, MINUTES_PER_QUARTER, QUARTERS_PER_DAY};
use crate::thermal::EwhClass;

pub const MIN_SAMPLE_COUNT: u64 = 1000;
pub const DEFAULT_SAMPLE_COUNT: u64 = 500_000;
pub const SOLVER_TOLERANCE: f64 = 1e-6;
pub const SEARCH_START: f64 = 100.0;
pub const SEARCH_LIMIT: f64 = 200.0;

const CHUNK: u64 = 4096;

/// Litres drawn in each quarter-hour of one day.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuarterVolumes(#[serde(with = "quarter_array")] pub [f64; QUARTERS_PER_DAY]);

pub fn quarter_volumes(flow: &MinuteSeries) -> QuarterVolumes {
    let mut out = [0.0; QUARTERS_PER_DAY];
    for (q, chunk) in flow
        .as_slice()
        .chunks_exact(MINUTES_PER_QUARTER)
        .enumerate()
    {
        out[q] = chunk.iter().sum();
    }
    QuarterVolumes(out)
}

/// 1-based nearest rank of the 99th percentile among `n` samples: ⌈0.99·n⌉.
pub fn nearest_rank_99(n: usize) -> usize {
    (99 * n).div_ceil(100)
}

/// Nearest-rank 99th percentile.
pub fn percentile_99(samples: &[f64]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::invalid("samples", "percentile of an empty list"));
    }
    let mut v = samples.to_vec();
    let idx = nearest_rank_99(v.len()) - 1;
    let (_, nth, _) = v.select_nth_unstable_by(idx, f64::total_cmp);
    Ok(*nth)
}

/// Lowest starting temperature `x` such that drawing `percentile_volume`
/// litres of mixed water leaves the tank at `desired_temp`:
///
/// `ln(T* − To) = ln(x − To) − (W/V)·(T* − To)/(x − To)`
///
/// The right-hand side is increasing in `x`, so the root is unique and found by
/// bisection on `[T*, hi]`, growing `hi` from 100 °C up to 200 °C.
pub fn solve_quarter_min_temp(
    percentile_volume: f64,
    capacity: f64,
    cold_temp: f64,
    desired_temp: f64,
) -> Result<f64> {
    if !(capacity > 0.0 && capacity.is_finite()) {
        return Err(Error::invalid("capacity", "must be positive"));
    }
    if !(percentile_volume >= 0.0 && percentile_volume.is_finite()) {
        return Err(Error::invalid("percentile_volume", "must be non-negative"));
    }
    if !(cold_temp < desired_temp) {
        return Err(Error::invalid(
            "cold_temp",
            format!("cold water {cold_temp} °C must be below the desired {desired_temp} °C"),
        ));
    }
    if percentile_volume == 0.0 {
        return Ok(desired_temp);
    }

    let rise = desired_temp - cold_temp;
    let target = rise.ln();
    let ratio = percentile_volume / capacity;
    let residual = |x: f64| {
        let u = x - cold_temp;
        u.ln() - ratio * rise / u - target
    };

    let mut lo = desired_temp;
    let mut hi = SEARCH_START.max(desired_temp + 1.0).min(SEARCH_LIMIT);
    while residual(hi) < 0.0 {
        if hi >= SEARCH_LIMIT {
            return Err(Error::InfeasibleDemand {
                volume: percentile_volume,
                capacity,
                upper_bound: SEARCH_LIMIT,
            });
        }
        lo = hi;
        hi = (desired_temp + 2.0 * (hi - desired_temp)).min(SEARCH_LIMIT);
    }
    while hi - lo > SOLVER_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        if residual(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // Upper end of the final bracket: never below the true root.
    Ok(hi)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinTempResult {
    #[serde(with = "quarter_array")]
    pub per_quarter: [f64; QUARTERS_PER_DAY],
    pub overall: f64,
    #[serde(with = "quarter_array")]
    pub percentile_volumes: [f64; QUARTERS_PER_DAY],
    pub sample_count: u64,
}

/// 99th-percentile quarter volumes over `sample_count` simulated days.
///
/// Only non-zero volumes are stored; the zeros are accounted for by count when
/// locating the rank.
pub fn quarter_percentiles(
    model: &WithdrawalModel,
    sample_count: u64,
    rng: &SampleRng,
    exec: Execution,
) -> Result<[f64; QUARTERS_PER_DAY]> {
    model.validate()?;
    if sample_count < MIN_SAMPLE_COUNT {
        return Err(Error::invalid(
            "mintemp_samples",
            format!("need at least {MIN_SAMPLE_COUNT} samples, got {sample_count}"),
        ));
    }
    let chunks = map_chunks(exec, sample_count, CHUNK, |range| {
        let mut nonzero: Vec<Vec<f64>> = vec![Vec::new(); QUARTERS_PER_DAY];
        let mut events = Vec::new();
        for j in range {
            gen_withdrawal_events_into(model, &rng.with_sample(j), &mut events);
            if events.is_empty() {
                continue;
            }
            let volumes = quarter_volumes(&events_to_flow(&events));
            for (q, v) in volumes.0.iter().enumerate() {
                if *v > 0.0 {
                    nonzero[q].push(*v);
                }
            }
        }
        nonzero
    });

    let n = sample_count as usize;
    let rank = nearest_rank_99(n);
    let mut out = [0.0; QUARTERS_PER_DAY];
    for (q, slot) in out.iter_mut().enumerate() {
        let mut values: Vec<f64> = chunks.iter().flat_map(|c| c[q].iter().copied()).collect();
        let zeros = n - values.len();
        if rank > zeros {
            let idx = rank - zeros - 1;
            let (_, nth, _) = values.select_nth_unstable_by(idx, f64::total_cmp);
            *slot = *nth;
        }
    }
    Ok(out)
}

/// Solves every quarter and takes the daily maximum.
pub fn min_temp_from_percentiles(
    percentile_volumes: [f64; QUARTERS_PER_DAY],
    class: &EwhClass,
    cold_temp: f64,
    desired_temp: f64,
    sample_count: u64,
) -> Result<MinTempResult> {
    let mut per_quarter = [0.0; QUARTERS_PER_DAY];
    for (q, slot) in per_quarter.iter_mut().enumerate() {
        *slot = solve_quarter_min_temp(
            percentile_volumes[q],
            class.capacity,
            cold_temp,
            desired_temp,
        )?;
    }
    let overall = per_quarter
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(MinTempResult {
        per_quarter,
        overall,
        percentile_volumes,
        sample_count,
    })
}

pub fn compute_user_min_temp(
    model: &WithdrawalModel,
    class: &EwhClass,
    cold_temp: f64,
    desired_temp: f64,
    sample_count: u64,
    rng: &SampleRng,
    exec: Execution,
) -> Result<MinTempResult> {
    class.validate()?;
    let percentiles = quarter_percentiles(model, sample_count, rng, exec)?;
    min_temp_from_percentiles(percentiles, class, cold_temp, desired_temp, sample_count)
}

mod quarter_array {
    use super::QUARTERS_PER_DAY;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64; QUARTERS_PER_DAY], s: S) -> Result<S::Ok, S::Error> {
        v.as_slice().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> Result<[f64; QUARTERS_PER_DAY], D::Error> {
        let v = Vec::<f64>::deserialize(d)?;
        v.try_into()
            .map_err(|_| serde::de::Error::custom("expected 96 quarter values"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inputs::WithdrawalEvent;
    use crate::rng::Purpose;
    use crate::series::HourlyProfile;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    /// Independent bisection on ln(u) − c/u = ln(rise), u = x − To, run to
    /// machine precision.
    fn oracle(volume: f64, capacity: f64, cold: f64, desired: f64) -> f64 {
        let rise = desired - cold;
        let c = volume / capacity * rise;
        let (mut lo, mut hi) = (rise, 1000.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid.ln() - c / mid < rise.ln() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        cold + 0.5 * (lo + hi)
    }

    #[test]
    fn quarter_volume_cases() {
        assert!(quarter_volumes(&MinuteSeries::zeros())
            .0
            .iter()
            .all(|v| *v == 0.0));
        assert!(quarter_volumes(&MinuteSeries::constant(4.0))
            .0
            .iter()
            .all(|v| *v == 60.0));
        let flow = events_to_flow(&[WithdrawalEvent {
            start_minute: 40 * 15 + 2,
            duration: 3,
            flow: 6.0,
        }]);
        let v = quarter_volumes(&flow);
        for q in 0..96 {
            assert_eq!(v.0[q], if q == 40 { 18.0 } else { 0.0 });
        }
    }

    #[test]
    fn percentile_cases() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(percentile_99(&v).unwrap(), 99.0);
        assert_eq!(percentile_99(&[3.5; 17]).unwrap(), 3.5);
        // 198 zeros then {50, 60}: rank ⌈0.99·200⌉ = 198 still falls on a zero.
        let mut v = vec![0.0; 198];
        v.extend([60.0, 50.0]);
        let mut sorted = v.clone();
        sorted.sort_by(f64::total_cmp);
        assert_eq!(percentile_99(&v).unwrap(), sorted[197]);
        assert_eq!(percentile_99(&v).unwrap(), 0.0);
        assert!(percentile_99(&[]).is_err());
    }

    #[test]
    fn rank_is_exact_integer_arithmetic() {
        // 0.99 * 100 rounds up to 99.00000000000001 in floating point.
        assert_eq!(nearest_rank_99(100), 99);
        assert_eq!(nearest_rank_99(200), 198);
        assert_eq!(nearest_rank_99(1), 1);
        assert_eq!(nearest_rank_99(101), 100);
    }

    #[test]
    fn solver_zero_volume_is_desired_temp() {
        assert_eq!(solve_quarter_min_temp(0.0, 80.0, 15.0, 40.0).unwrap(), 40.0);
    }

    #[test]
    fn solver_reference_value() {
        let x = solve_quarter_min_temp(40.0, 80.0, 15.0, 40.0).unwrap();
        let o = oracle(40.0, 80.0, 15.0, 40.0);
        assert_abs_diff_eq!(x, o, epsilon = 2e-6);
        assert_abs_diff_eq!(x, 50.54, epsilon = 5e-3);
    }

    #[test]
    fn solver_reports_infeasible_demand() {
        let err = solve_quarter_min_temp(5000.0, 50.0, 15.0, 40.0).unwrap_err();
        assert!(matches!(err, Error::InfeasibleDemand { .. }));
    }

    #[test]
    fn solver_increasing_in_volume() {
        let mut prev = solve_quarter_min_temp(0.0, 80.0, 12.0, 40.0).unwrap();
        for i in 1..=60 {
            let w = f64::from(i) * 2.0;
            let x = solve_quarter_min_temp(w, 80.0, 12.0, 40.0).unwrap();
            assert!(x > prev, "w={w}");
            assert_abs_diff_eq!(x, oracle(w, 80.0, 12.0, 40.0), epsilon = 2e-6);
            prev = x;
        }
    }

    #[test]
    fn sparse_percentile_matches_dense() {
        let mut dist = [0.0; 24];
        dist[7] = 40.0;
        dist[8] = 60.0;
        let model = WithdrawalModel::new(HourlyProfile(dist), 142.0);
        let rng = SampleRng::new(5, 0, 0, Purpose::MinTempDraws);
        let n = 3000u64;
        let sparse = quarter_percentiles(&model, n, &rng, Execution::Sequential).unwrap();
        let mut per_q: Vec<Vec<f64>> = vec![Vec::new(); 96];
        for j in 0..n {
            let events = crate::inputs::gen_withdrawal_events(&model, &rng.with_sample(j));
            let v = quarter_volumes(&events_to_flow(&events));
            for q in 0..96 {
                per_q[q].push(v.0[q]);
            }
        }
        for q in 0..96 {
            assert_eq!(sparse[q], percentile_99(&per_q[q]).unwrap(), "quarter {q}");
        }
        let par = quarter_percentiles(&model, n, &rng, Execution::Parallel).unwrap();
        assert_eq!(sparse, par);
    }

    #[test]
    fn too_few_samples_rejected() {
        let model = WithdrawalModel::new(HourlyProfile::constant(100.0 / 24.0), 142.0);
        let rng = SampleRng::new(5, 0, 0, Purpose::MinTempDraws);
        assert!(quarter_percentiles(&model, 999, &rng, Execution::Sequential).is_err());
    }

    proptest! {
        #[test]
        fn percentile_matches_sort(values in prop::collection::vec(0.0f64..1e3, 1..2000)) {
            let mut sorted = values.clone();
            sorted.sort_by(f64::total_cmp);
            let k = (0.99 * values.len() as f64 - 1e-9).ceil() as usize;
            prop_assert_eq!(percentile_99(&values).unwrap(), sorted[k.max(1) - 1]);
        }

        #[test]
        fn solver_is_bracket_independent(w in 0.1f64..150.0, v in 30.0f64..200.0, cold in 5.0f64..25.0) {
            if let Ok(x) = solve_quarter_min_temp(w, v, cold, 40.0) {
                prop_assert!((x - oracle(w, v, cold, 40.0)).abs() <= 2e-6);
            }
        }
    }
}
