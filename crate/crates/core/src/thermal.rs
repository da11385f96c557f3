//! Single-device thermal model of an electric water heater.
//!
//! The tank is a fully mixed water volume losing heat through its shell to the
//! surrounding air, losing enthalpy to hot-water draws replaced by cold mains
//! water, and gaining heat from a resistive element switched by a hysteresis
//! thermostat:
//!
//! ```text
//! dT/dt = -(T - Te) / (R·Sw·V·ρ) - w/(60·V)·(T - To) + q·Pn/(Sw·V·ρ)
//! ```
//!
//! With inputs held constant over a step the ODE is linear, so each step is
//! integrated exactly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Beyond this many time constants per step the state is set to its asymptote.
const SATURATION_EXPONENT: f64 = 50.0;

pub const SECONDS_PER_DAY: f64 = 86_400.0;
pub const JOULES_PER_KWH: f64 = 3.6e6;
pub const STEP_SECONDS: f64 = 60.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    /// J/(kg·°C)
    pub water_specific_heat: f64,
    /// kg/l
    pub water_density: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self {
            water_specific_heat: 4186.0,
            water_density: 1.0,
        }
    }
}

impl PhysicalConstants {
    pub fn validate(&self) -> Result<()> {
        if !(self.water_specific_heat > 0.0 && self.water_specific_heat.is_finite()) {
            return Err(Error::invalid("water_specific_heat", "must be positive"));
        }
        if !(self.water_density > 0.0 && self.water_density.is_finite()) {
            return Err(Error::invalid("water_density", "must be positive"));
        }
        Ok(())
    }
}

/// One commercial heater model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EwhClass {
    pub name: String,
    /// l
    pub capacity: f64,
    /// °C/W. `f64::INFINITY` disables shell losses.
    pub thermal_resistance: f64,
    /// W
    pub nominal_power: f64,
    /// °C
    pub max_temp: f64,
    /// Full dead-band width 2Δ, °C.
    pub deadband: f64,
    /// Nameplate standing loss, kWh/day. Kept for audit only.
    pub standing_loss: f64,
    /// Share of the installed population, fraction in [0, 1].
    pub diffusion_rate: f64,
}

impl EwhClass {
    pub fn half_deadband(&self) -> f64 {
        0.5 * self.deadband
    }

    /// Set-point placing the upper thermostat threshold at `max_temp`.
    pub fn max_set_point(&self) -> f64 {
        self.max_temp - self.half_deadband()
    }

    pub fn validate(&self) -> Result<()> {
        let field = |f: &str| format!("class[{}].{f}", self.name);
        if !(self.capacity > 0.0 && self.capacity.is_finite()) {
            return Err(Error::invalid(field("capacity"), "must be positive"));
        }
        if !(self.thermal_resistance > 0.0) {
            return Err(Error::invalid(
                field("thermal_resistance"),
                "must be positive",
            ));
        }
        if !(self.nominal_power > 0.0 && self.nominal_power.is_finite()) {
            return Err(Error::invalid(field("nominal_power"), "must be positive"));
        }
        if !(self.deadband > 0.0 && self.deadband.is_finite()) {
            return Err(Error::invalid(field("deadband"), "must be positive"));
        }
        if !(self.max_temp.is_finite() && self.max_temp > self.deadband) {
            return Err(Error::invalid(
                field("max_temp"),
                "must be finite and larger than the dead-band",
            ));
        }
        if !(0.0..=1.0).contains(&self.diffusion_rate) {
            return Err(Error::invalid(
                field("diffusion_rate"),
                "must lie in [0, 1]",
            ));
        }
        Ok(())
    }
}

/// Tank temperature and thermostat state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EwhState {
    pub temp: f64,
    pub heater_on: bool,
}

/// Inputs held constant over one step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepInputs {
    pub ambient_temp: f64,
    pub cold_water_temp: f64,
    /// l/min
    pub withdrawal_flow: f64,
    /// s
    pub step_length: f64,
}

impl StepInputs {
    pub fn new(ambient_temp: f64, cold_water_temp: f64, withdrawal_flow: f64) -> Self {
        Self {
            ambient_temp,
            cold_water_temp,
            withdrawal_flow,
            step_length: STEP_SECONDS,
        }
    }
}

/// Advances the tank temperature over one step using the exact solution of the
/// linear thermal ODE. The thermostat state is read but not modified.
pub fn step_temperature(
    state: &EwhState,
    inputs: &StepInputs,
    class: &EwhClass,
    consts: &PhysicalConstants,
) -> Result<f64> {
    let finite = [
        ("state.temp", state.temp),
        ("inputs.ambient_temp", inputs.ambient_temp),
        ("inputs.cold_water_temp", inputs.cold_water_temp),
        ("inputs.withdrawal_flow", inputs.withdrawal_flow),
        ("inputs.step_length", inputs.step_length),
    ];
    for (name, v) in finite {
        if !v.is_finite() {
            return Err(Error::invalid(name, "value is not finite"));
        }
    }
    if inputs.withdrawal_flow < 0.0 {
        return Err(Error::invalid(
            "inputs.withdrawal_flow",
            "must be non-negative",
        ));
    }
    if inputs.step_length <= 0.0 {
        return Err(Error::invalid("inputs.step_length", "must be positive"));
    }

    let thermal_mass = consts.water_specific_heat * class.capacity * consts.water_density;
    let loss_rate = 1.0 / (class.thermal_resistance * thermal_mass);
    let flow_rate = inputs.withdrawal_flow / (60.0 * class.capacity);
    let heat_rate = if state.heater_on {
        class.nominal_power / thermal_mass
    } else {
        0.0
    };
    let lambda = loss_rate + flow_rate;

    let offending = || {
        if !heat_rate.is_finite() {
            "class.nominal_power"
        } else if !loss_rate.is_finite() {
            "class.thermal_resistance"
        } else if !flow_rate.is_finite() {
            "inputs.withdrawal_flow"
        } else {
            "class.capacity"
        }
    };

    let next = if lambda == 0.0 {
        state.temp + heat_rate * inputs.step_length
    } else {
        let asymptote =
            (loss_rate * inputs.ambient_temp + flow_rate * inputs.cold_water_temp + heat_rate)
                / lambda;
        let exponent = lambda * inputs.step_length;
        if exponent > SATURATION_EXPONENT {
            asymptote
        } else {
            asymptote + (state.temp - asymptote) * (-exponent).exp()
        }
    };
    if !next.is_finite() {
        return Err(Error::invalid(
            offending(),
            "produces a non-finite temperature",
        ));
    }
    Ok(next)
}

/// Hysteresis thermostat: off above `set_point + half_deadband`, on below
/// `set_point - half_deadband`, otherwise unchanged.
#[inline]
pub fn thermostat_update(temp: f64, heater_on: bool, set_point: f64, half_deadband: f64) -> bool {
    if temp > set_point + half_deadband {
        false
    } else if temp < set_point - half_deadband {
        true
    } else {
        heater_on
    }
}

/// Converts a nameplate standing loss (kWh/day, measured with the tank held at
/// `test_temp` in `reference_ambient`) into a shell thermal resistance (°C/W).
pub fn derive_thermal_resistance(
    standing_loss: f64,
    test_temp: f64,
    reference_ambient: f64,
) -> Result<f64> {
    if !(standing_loss > 0.0 && standing_loss.is_finite()) {
        return Err(Error::invalid("standing_loss", "must be positive"));
    }
    let delta = test_temp - reference_ambient;
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::invalid(
            "test_temp",
            format!(
                "test temperature {test_temp} °C must exceed the reference ambient \
                 {reference_ambient} °C"
            ),
        ));
    }
    let loss_watts = standing_loss * JOULES_PER_KWH / SECONDS_PER_DAY;
    Ok(delta / loss_watts)
}

/// Precomputed per-device coefficients for the simulation inner loop.
///
/// Produces the same trajectory as [`step_temperature`] with a fixed one-minute
/// step. Draw-free minutes reuse a cached decay factor.
#[derive(Debug, Clone, Copy)]
pub struct StepKernel {
    loss_rate: f64,
    heat_rate: f64,
    flow_coeff: f64,
    step: f64,
    idle_decay: f64,
    /// Asymptotic rise above ambient with the element on and no draw.
    heated_offset: f64,
}

impl StepKernel {
    pub fn new(class: &EwhClass, consts: &PhysicalConstants) -> Self {
        let thermal_mass = consts.water_specific_heat * class.capacity * consts.water_density;
        let loss_rate = 1.0 / (class.thermal_resistance * thermal_mass);
        let heat_rate = class.nominal_power / thermal_mass;
        let step = STEP_SECONDS;
        Self {
            loss_rate,
            heat_rate,
            flow_coeff: 1.0 / (60.0 * class.capacity),
            step,
            idle_decay: (-loss_rate * step).exp(),
            heated_offset: if loss_rate > 0.0 {
                heat_rate / loss_rate
            } else {
                f64::INFINITY
            },
        }
    }

    #[inline]
    pub fn advance(&self, temp: f64, heater_on: bool, ambient: f64, cold: f64, flow: f64) -> f64 {
        if flow == 0.0 && self.loss_rate > 0.0 {
            let asymptote = if heater_on {
                ambient + self.heated_offset
            } else {
                ambient
            };
            return asymptote + (temp - asymptote) * self.idle_decay;
        }
        let flow_rate = flow * self.flow_coeff;
        let heat = if heater_on { self.heat_rate } else { 0.0 };
        let lambda = self.loss_rate + flow_rate;
        if lambda == 0.0 {
            return temp + heat * self.step;
        }
        let asymptote = (self.loss_rate * ambient + flow_rate * cold + heat) / lambda;
        let exponent = lambda * self.step;
        if exponent > SATURATION_EXPONENT {
            asymptote
        } else {
            asymptote + (temp - asymptote) * (-exponent).exp()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn class_80(r: f64) -> EwhClass {
        EwhClass {
            name: "80".into(),
            capacity: 80.0,
            thermal_resistance: r,
            nominal_power: 1200.0,
            max_temp: 75.0,
            deadband: 5.0,
            standing_loss: 1.35,
            diffusion_rate: 0.6,
        }
    }

    fn step(temp: f64, on: bool, te: f64, to: f64, w: f64, secs: f64, c: &EwhClass) -> f64 {
        let inputs = StepInputs {
            ambient_temp: te,
            cold_water_temp: to,
            withdrawal_flow: w,
            step_length: secs,
        };
        step_temperature(
            &EwhState {
                temp,
                heater_on: on,
            },
            &inputs,
            c,
            &PhysicalConstants::default(),
        )
        .unwrap()
    }

    #[test]
    fn equilibrium_at_ambient() {
        let c = class_80(0.8);
        assert_eq!(step(20.0, false, 20.0, 20.0, 0.0, 60.0, &c), 20.0);
    }

    #[test]
    fn withdrawal_only_decay() {
        // w·t/(60V) = 80·60/(60·80) = 1 time constant.
        let c = class_80(f64::INFINITY);
        let t = step(65.0, false, 20.0, 15.0, 80.0, 60.0, &c);
        assert_abs_diff_eq!(t, 15.0 + 50.0 * (-1.0f64).exp(), epsilon = 1e-12);
        assert_abs_diff_eq!(t, 33.394, epsilon = 1e-3);
    }

    #[test]
    fn heating_only_rise() {
        let c = class_80(f64::INFINITY);
        let t = step(40.0, true, 20.0, 15.0, 0.0, 60.0, &c);
        assert_abs_diff_eq!(t, 40.0 + 1200.0 * 60.0 / (4186.0 * 80.0), epsilon = 1e-12);
        assert_abs_diff_eq!(t, 40.215, epsilon = 1e-3);
    }

    #[test]
    fn huge_flow_saturates_to_cold_water() {
        let c = class_80(0.8);
        let t = step(65.0, false, 20.0, 15.0, 1e6, 60.0, &c);
        assert_abs_diff_eq!(t, 15.0, epsilon = 1e-6);
    }

    #[test]
    fn non_finite_result_names_field() {
        let mut c = class_80(0.8);
        c.nominal_power = f64::MAX;
        c.capacity = 1e-300;
        let err = step_temperature(
            &EwhState {
                temp: 20.0,
                heater_on: true,
            },
            &StepInputs::new(20.0, 15.0, 0.0),
            &c,
            &PhysicalConstants::default(),
        )
        .unwrap_err();
        assert!(err.to_string().contains("nominal_power"), "{err}");
    }

    #[test]
    fn negative_flow_rejected() {
        let c = class_80(0.8);
        let err = step_temperature(
            &EwhState {
                temp: 20.0,
                heater_on: false,
            },
            &StepInputs::new(20.0, 15.0, -1.0),
            &c,
            &PhysicalConstants::default(),
        );
        assert!(err.is_err());
    }

    #[test]
    fn thermostat_branches() {
        assert!(!thermostat_update(70.0, true, 65.0, 2.5));
        assert!(thermostat_update(60.0, false, 65.0, 2.5));
        assert!(thermostat_update(65.0, true, 65.0, 2.5));
        assert!(!thermostat_update(65.0, false, 65.0, 2.5));
        // Thresholds themselves hold state.
        assert!(thermostat_update(67.5, true, 65.0, 2.5));
        assert!(!thermostat_update(62.5, false, 65.0, 2.5));
    }

    #[test]
    fn resistance_from_table_values() {
        assert_abs_diff_eq!(
            derive_thermal_resistance(1.35, 65.0, 20.0).unwrap(),
            0.8,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            derive_thermal_resistance(0.99, 65.0, 20.0).unwrap(),
            45.0 / 41.25,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            derive_thermal_resistance(1.56, 65.0, 20.0).unwrap(),
            45.0 / 65.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            derive_thermal_resistance(0.99, 65.0, 20.0).unwrap(),
            1.0909,
            epsilon = 1e-4
        );
        assert_abs_diff_eq!(
            derive_thermal_resistance(1.56, 65.0, 20.0).unwrap(),
            0.69231,
            epsilon = 1e-5
        );
    }

    #[test]
    fn resistance_rejects_bad_temperatures() {
        assert!(derive_thermal_resistance(1.35, 20.0, 20.0).is_err());
        assert!(derive_thermal_resistance(1.35, 15.0, 20.0).is_err());
        assert!(derive_thermal_resistance(0.0, 65.0, 20.0).is_err());
    }

    #[test]
    fn resistance_round_trip_dissipates_standing_loss() {
        // Hold the tank at 65 °C in 20 °C air for a day: energy leaving the
        // shell must equal the nameplate loss.
        let r = derive_thermal_resistance(1.35, 65.0, 20.0).unwrap();
        let c = class_80(r);
        let consts = PhysicalConstants::default();
        let mass = consts.water_specific_heat * c.capacity * consts.water_density;
        let mut lost = 0.0;
        for _ in 0..1440 {
            let t = step(65.0, false, 20.0, 15.0, 0.0, 60.0, &c);
            lost += (65.0 - t) * mass;
        }
        let kwh = lost / JOULES_PER_KWH;
        assert!((kwh - 1.35).abs() / 1.35 < 1e-3, "{kwh}");
    }

    #[test]
    fn validate_rejects_bad_classes() {
        let mut c = class_80(0.8);
        c.capacity = 0.0;
        assert!(c.validate().is_err());
        let mut c = class_80(0.8);
        c.max_temp = 4.0;
        assert!(c.validate().is_err());
        assert!(class_80(0.8).validate().is_ok());
        assert!(class_80(f64::INFINITY).validate().is_ok());
    }

    proptest! {
        #[test]
        fn semigroup(
            temp in 5.0f64..90.0, on in any::<bool>(), te in 0.0f64..35.0,
            to in 5.0f64..25.0, w in 0.0f64..30.0, r in 0.3f64..3.0,
        ) {
            let c = class_80(r);
            let half = step(step(temp, on, te, to, w, 30.0, &c), on, te, to, w, 30.0, &c);
            let full = step(temp, on, te, to, w, 60.0, &c);
            prop_assert!((half - full).abs() <= 1e-9);
        }

        #[test]
        fn contraction(
            t1 in 5.0f64..90.0, t2 in 5.0f64..90.0, on in any::<bool>(),
            te in 0.0f64..35.0, w in 0.0f64..30.0,
        ) {
            let c = class_80(0.8);
            let a = step(t1, on, te, 15.0, w, 60.0, &c);
            let b = step(t2, on, te, 15.0, w, 60.0, &c);
            let mass = 4186.0 * 80.0;
            let lambda = 1.0 / (0.8 * mass) + w / (60.0 * 80.0);
            let expected = (t1 - t2).abs() * (-lambda * 60.0).exp();
            prop_assert!(((a - b).abs() - expected).abs() <= 1e-9);
            if t1 != t2 {
                prop_assert!((a - b).abs() < (t1 - t2).abs());
            }
        }

        #[test]
        fn monotone_convergence_to_asymptote(
            temp in 5.0f64..90.0, on in any::<bool>(), te in 0.0f64..35.0, w in 0.0f64..30.0,
        ) {
            let c = class_80(0.8);
            let mass = 4186.0 * 80.0;
            let loss = 1.0 / (0.8 * mass);
            let flow = w / (60.0 * 80.0);
            let heat = if on { 1200.0 / mass } else { 0.0 };
            let asym = (loss * te + flow * 15.0 + heat) / (loss + flow);
            let mut t = temp;
            let mut gap = (t - asym).abs();
            for _ in 0..200 {
                let next = step(t, on, te, 15.0, w, 60.0, &c);
                let next_gap = (next - asym).abs();
                prop_assert!(next_gap <= gap + 1e-9);
                // Never overshoots the asymptote.
                prop_assert!((next - asym) * (temp - asym) >= -1e-9);
                t = next;
                gap = next_gap;
            }
        }

        #[test]
        fn thermostat_idempotent(temp in 50.0f64..80.0, on in any::<bool>(), sp in 55.0f64..72.0) {
            let once = thermostat_update(temp, on, sp, 2.5);
            prop_assert_eq!(thermostat_update(temp, once, sp, 2.5), once);
        }

        #[test]
        fn kernel_matches_reference(
            temp in 5.0f64..90.0, on in any::<bool>(), te in 0.0f64..35.0,
            w in prop_oneof![Just(0.0), 0.0f64..40.0], r in prop_oneof![Just(f64::INFINITY), 0.3f64..3.0],
        ) {
            let c = class_80(r);
            let k = StepKernel::new(&c, &PhysicalConstants::default());
            let fast = k.advance(temp, on, te, 12.0, w);
            let reference = step(temp, on, te, 12.0, w, 60.0, &c);
            prop_assert!((fast - reference).abs() <= 1e-9);
        }
    }
}
