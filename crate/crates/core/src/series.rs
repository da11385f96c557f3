//! Daily time series at hourly and one-minute granularity.

use std::ops::Index;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const HOURS_PER_DAY: usize = 24;
pub const MINUTES_PER_DAY: usize = 1440;
pub const QUARTERS_PER_DAY: usize = 96;
pub const MINUTES_PER_QUARTER: usize = 15;

/// One value per hour of the day.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HourlyProfile(pub [f64; HOURS_PER_DAY]);

impl HourlyProfile {
    pub fn new(values: [f64; HOURS_PER_DAY]) -> Result<Self> {
        if let Some(h) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(
                format!("hourly_profile[{h}]"),
                "value is not finite",
            ));
        }
        Ok(Self(values))
    }

    pub fn constant(value: f64) -> Self {
        Self([value; HOURS_PER_DAY])
    }

    pub fn from_slice(values: &[f64]) -> Result<Self> {
        let arr: [f64; HOURS_PER_DAY] = values.try_into().map_err(|_| {
            Error::invalid(
                "hourly_profile",
                format!("expected 24 values, got {}", values.len()),
            )
        })?;
        Self::new(arr)
    }

    /// Checks the profile is a percentage distribution (non-negative, summing to 100).
    pub fn validate_percentages(&self, field: &str) -> Result<()> {
        if let Some(h) = self.0.iter().position(|v| *v < 0.0) {
            return Err(Error::invalid(
                format!("{field}[{h}]"),
                "percentage must be non-negative",
            ));
        }
        let total: f64 = self.0.iter().sum();
        if (total - 100.0).abs() > 0.01 {
            return Err(Error::invalid(
                field,
                format!("percentages sum to {total}, expected 100 ± 0.01"),
            ));
        }
        Ok(())
    }

    pub fn values(&self) -> &[f64; HOURS_PER_DAY] {
        &self.0
    }

    /// Holds each hourly value for the 60 minutes of its hour.
    pub fn to_minutes(&self) -> MinuteSeries {
        let mut out = vec![0.0; MINUTES_PER_DAY];
        for (m, v) in out.iter_mut().enumerate() {
            *v = self.0[m / 60];
        }
        MinuteSeries(out)
    }
}

impl Index<usize> for HourlyProfile {
    type Output = f64;

    fn index(&self, hour: usize) -> &f64 {
        &self.0[hour]
    }
}

/// A daily signal sampled every minute (exactly 1440 finite values).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct MinuteSeries(Vec<f64>);

impl MinuteSeries {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() != MINUTES_PER_DAY {
            return Err(Error::invalid(
                "minute_series",
                format!("expected {MINUTES_PER_DAY} samples, got {}", values.len()),
            ));
        }
        if let Some(m) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(
                format!("minute_series[{m}]"),
                "value is not finite",
            ));
        }
        Ok(Self(values))
    }

    pub fn zeros() -> Self {
        Self(vec![0.0; MINUTES_PER_DAY])
    }

    pub fn constant(value: f64) -> Self {
        Self(vec![value; MINUTES_PER_DAY])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn mean(&self) -> f64 {
        self.0.iter().sum::<f64>() / MINUTES_PER_DAY as f64
    }

    /// Value at `minute`, wrapping around midnight.
    pub fn at_wrapped(&self, minute: usize) -> f64 {
        self.0[minute % MINUTES_PER_DAY]
    }

    /// Rotates the day so that minute `shift` becomes minute 0.
    pub fn rotate_left(&self, shift: usize) -> Self {
        let mut v = self.0.clone();
        v.rotate_left(shift % MINUTES_PER_DAY);
        Self(v)
    }

    pub(crate) fn from_vec_unchecked(values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), MINUTES_PER_DAY);
        Self(values)
    }
}

impl Index<usize> for MinuteSeries {
    type Output = f64;

    fn index(&self, minute: usize) -> &f64 {
        &self.0[minute]
    }
}

impl TryFrom<Vec<f64>> for MinuteSeries {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<MinuteSeries> for Vec<f64> {
    fn from(s: MinuteSeries) -> Vec<f64> {
        s.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrong_length_rejected() {
        assert!(MinuteSeries::new(vec![0.0; 1439]).is_err());
        assert!(MinuteSeries::new(vec![0.0; 1440]).is_ok());
    }

    #[test]
    fn non_finite_rejected() {
        let mut v = vec![0.0; 1440];
        v[7] = f64::NAN;
        assert!(MinuteSeries::new(v).is_err());
    }

    #[test]
    fn hourly_expansion_holds_values() {
        let mut h = [0.0; 24];
        for (i, v) in h.iter_mut().enumerate() {
            *v = i as f64;
        }
        let m = HourlyProfile::new(h).unwrap().to_minutes();
        assert_eq!(m[0], 0.0);
        assert_eq!(m[59], 0.0);
        assert_eq!(m[60], 1.0);
        assert_eq!(m[1439], 23.0);
    }

    #[test]
    fn percentage_validation() {
        let mut h = [100.0 / 24.0; 24];
        assert!(HourlyProfile(h).validate_percentages("w").is_ok());
        h[0] += 1.0;
        assert!(HourlyProfile(h).validate_percentages("w").is_err());
    }
}
