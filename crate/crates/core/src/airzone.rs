//! Zone air energy balance.
//!
//! One well-mixed air node per zone:
//!
//! `c_air V_air dT_in/dt = q_v + Σ_j h_j S_j (T_j - T_in)`
//!
//! advanced by implicit Euler against the member surface temperatures of
//! the step being solved. `q_v` is a heat source/sink schedule (HVAC,
//! infiltration, occupants) and defaults to zero.

use crate::conduction::DimensionlessScaling;
use crate::error::{Error, Result};

/// One interior face bounding a zone.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZoneMember {
    /// Face area [m^2].
    pub area: f64,
    /// Inside film coefficient [W m^-2 K^-1].
    pub h_in: f64,
}

/// A well-mixed building zone.
#[derive(Debug, Clone, PartialEq)]
pub struct Zone {
    /// Air volume [m^3].
    pub air_volume: f64,
    /// Volumetric heat capacity of the air [J m^-3 K^-1].
    pub air_capacity: f64,
    pub members: Vec<ZoneMember>,
}

/// Zone air temperature at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZoneState {
    /// Air temperature [K].
    pub t_in: f64,
    /// Simulation time [s].
    pub time: f64,
}

impl Zone {
    pub fn validate(&self) -> Result<()> {
        if !(self.air_volume > 0.0 && self.air_capacity > 0.0) {
            return Err(Error::SceneInvalid(
                "zone air volume and capacity must be positive".into(),
            ));
        }
        if self.members.is_empty() {
            return Err(Error::SceneInvalid("zone has no member faces".into()));
        }
        if self
            .members
            .iter()
            .any(|m| !(m.area > 0.0) || m.h_in < 0.0 || !m.area.is_finite() || !m.h_in.is_finite())
        {
            return Err(Error::SceneInvalid(
                "zone members need positive area and nonnegative film coefficient".into(),
            ));
        }
        Ok(())
    }

    /// Heat capacity of the air volume [J K^-1].
    pub fn heat_capacity(&self) -> f64 {
        self.air_capacity * self.air_volume
    }

    /// `Σ_j h_j S_j` [W K^-1].
    pub fn coupling_sum(&self) -> f64 {
        self.members.iter().map(|m| m.h_in * m.area).sum()
    }
}

/// Implicit Euler update of the zone air temperature.
///
/// `T^{n+1} = (cV T^n/Δt + q_v + Σ h_j S_j T_j) / (cV/Δt + Σ h_j S_j)`
pub fn step_air(
    zone: &Zone,
    state: &ZoneState,
    surface_temps: &[f64],
    q_v: f64,
    dt: f64,
) -> Result<ZoneState> {
    zone.validate()?;
    if surface_temps.len() != zone.members.len() {
        return Err(Error::InvalidArgument(format!(
            "{} surface temperatures for {} zone members",
            surface_temps.len(),
            zone.members.len()
        )));
    }
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
    }
    if !state.t_in.is_finite()
        || !q_v.is_finite()
        || surface_temps.iter().any(|t| !t.is_finite())
    {
        return Err(Error::NonFinite("zone air step".into()));
    }
    let cv_over_dt = zone.heat_capacity() / dt;
    let mut numerator = cv_over_dt * state.t_in + q_v;
    let mut denominator = cv_over_dt;
    for (m, t) in zone.members.iter().zip(surface_temps) {
        numerator += m.h_in * m.area * t;
        denominator += m.h_in * m.area;
    }
    Ok(ZoneState {
        t_in: numerator / denominator,
        time: state.time + dt,
    })
}

/// Dimensionless coupling coefficients `θ_j = S_j h_j t_ref / (V c_air)`.
pub fn theta_coefficients(zone: &Zone, scaling: &DimensionlessScaling) -> Vec<f64> {
    let t_ref = scaling.t_ref();
    zone.members
        .iter()
        .map(|m| m.area * m.h_in * t_ref / (zone.heat_capacity()))
        .collect()
}

/// Reference source magnitude `q_v,0 = Σ h_j S_j · T_0` that keeps the
/// dimensionless schedule O(1).
pub fn source_reference(zone: &Zone, scaling: &DimensionlessScaling) -> f64 {
    zone.coupling_sum() * scaling.t0
}

/// Dimensionless form of the air update, used to check the scaling algebra
/// against the dimensional step. With `θ_j` from [`theta_coefficients`]
/// and `q_v* = q_v / q_v,0`, the update reads
///
/// `T*^{n+1} = (T*^n + Δt*(q_v* Σθ + Σ θ_j T*_j)) / (1 + Δt* Σθ)`
///
/// (the source term carries `Σθ` because `q_v,0` is referenced to the
/// total envelope coupling).
pub fn step_air_dimensionless(
    zone: &Zone,
    scaling: &DimensionlessScaling,
    t_in_star: f64,
    surface_stars: &[f64],
    q_v_star: f64,
    dt_star: f64,
) -> f64 {
    let theta = theta_coefficients(zone, scaling);
    let theta_sum: f64 = theta.iter().sum();
    let coupled: f64 = theta.iter().zip(surface_stars).map(|(th, t)| th * t).sum();
    (t_in_star + dt_star * (q_v_star * theta_sum + coupled)) / (1.0 + dt_star * theta_sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::celsius_to_kelvin;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn cube_zone() -> Zone {
        Zone {
            air_volume: 36.0,
            air_capacity: 1.2e3,
            members: vec![
                ZoneMember { area: 12.0, h_in: 8.7 };
                4
            ],
        }
    }

    #[test]
    fn equilibrium_is_fixed() {
        let zone = cube_zone();
        let state = ZoneState {
            t_in: 295.0,
            time: 0.0,
        };
        let next = step_air(&zone, &state, &[295.0; 4], 0.0, 900.0).unwrap();
        assert_relative_eq!(next.t_in, 295.0, max_relative = 1e-15);
        assert_eq!(next.time, 900.0);
    }

    #[test]
    fn single_member_update_value() {
        // S h = 10 W/K, c V = 43200 J/K, T_in = 20 C, T_j = 30 C, dt = 900 s
        let zone = Zone {
            air_volume: 36.0,
            air_capacity: 1.2e3,
            members: vec![ZoneMember { area: 5.0, h_in: 2.0 }],
        };
        let state = ZoneState {
            t_in: celsius_to_kelvin(20.0),
            time: 0.0,
        };
        let next = step_air(&zone, &state, &[celsius_to_kelvin(30.0)], 0.0, 900.0).unwrap();
        let expected = (43200.0 / 900.0 * 20.0 + 10.0 * 30.0) / (43200.0 / 900.0 + 10.0);
        assert_relative_eq!(next.t_in, celsius_to_kelvin(expected), max_relative = 1e-13);
        assert_relative_eq!(next.t_in - 273.15, 21.72, epsilon = 0.01);
        // cross-check against the exact exponential relaxation at small dt
        let mut fine = state;
        for _ in 0..900 {
            fine = step_air(&zone, &fine, &[celsius_to_kelvin(30.0)], 0.0, 1.0).unwrap();
        }
        let tau = 43200.0 / 10.0;
        let exact = 30.0 + (20.0 - 30.0) * (-900.0 / tau as f64).exp();
        assert!((fine.t_in - 273.15 - exact).abs() < 2e-3);
    }

    #[test]
    fn infinite_dt_limit_is_weighted_mean() {
        let zone = Zone {
            air_volume: 36.0,
            air_capacity: 1.2e3,
            members: vec![
                ZoneMember { area: 12.0, h_in: 8.7 },
                ZoneMember { area: 6.0, h_in: 2.5 },
            ],
        };
        let state = ZoneState {
            t_in: 280.0,
            time: 0.0,
        };
        let temps = [300.0, 310.0];
        let next = step_air(&zone, &state, &temps, 0.0, 1e15).unwrap();
        let w = [12.0 * 8.7, 6.0 * 2.5];
        let mean = (w[0] * temps[0] + w[1] * temps[1]) / (w[0] + w[1]);
        assert_relative_eq!(next.t_in, mean, max_relative = 1e-9);
    }

    #[test]
    fn converges_to_steady_state() {
        let zone = cube_zone();
        let mut state = ZoneState {
            t_in: 280.0,
            time: 0.0,
        };
        for _ in 0..2000 {
            state = step_air(&zone, &state, &[301.0; 4], 0.0, 900.0).unwrap();
        }
        assert_relative_eq!(state.t_in, 301.0, max_relative = 1e-12);
    }

    #[test]
    fn theta_basics() {
        let zone = cube_zone();
        let scaling = DimensionlessScaling::new(293.15, 0.2, 1.75, 2.2e6).unwrap();
        let theta = theta_coefficients(&zone, &scaling);
        assert_eq!(theta.len(), 4);
        let expected = 12.0 * 8.7 * scaling.t_ref() / (1.2e3 * 36.0);
        for th in &theta {
            assert_relative_eq!(*th, expected, max_relative = 1e-14);
        }
        // h = 0 -> theta = 0
        let mut z = zone.clone();
        z.members[0].h_in = 0.0;
        assert_eq!(theta_coefficients(&z, &scaling)[0], 0.0);
        // doubling the area doubles theta
        let mut z = zone.clone();
        z.members[0].area *= 2.0;
        assert_relative_eq!(
            theta_coefficients(&z, &scaling)[0],
            2.0 * expected,
            max_relative = 1e-14
        );
    }

    #[test]
    fn dimensional_and_dimensionless_updates_agree() {
        let zone = cube_zone();
        let scaling = DimensionlessScaling::new(293.15, 0.2, 1.75, 2.2e6).unwrap();
        let dt = 900.0;
        let q_v = 350.0;
        let t_in = celsius_to_kelvin(21.3);
        let temps = [
            celsius_to_kelvin(24.0),
            celsius_to_kelvin(19.5),
            celsius_to_kelvin(22.2),
            celsius_to_kelvin(26.8),
        ];
        let state = ZoneState { t_in, time: 0.0 };
        let next = step_air(&zone, &state, &temps, q_v, dt).unwrap();

        let stars: Vec<f64> = temps.iter().map(|&t| scaling.temp_star(t)).collect();
        let star = step_air_dimensionless(
            &zone,
            &scaling,
            scaling.temp_star(t_in),
            &stars,
            q_v / source_reference(&zone, &scaling),
            scaling.time_star(dt),
        );
        assert_relative_eq!(scaling.temp_from_star(star), next.t_in, max_relative = 1e-13);
    }

    #[test]
    fn rejects_invalid() {
        let zone = cube_zone();
        let state = ZoneState {
            t_in: 295.0,
            time: 0.0,
        };
        assert!(step_air(&zone, &state, &[295.0; 3], 0.0, 900.0).is_err());
        assert!(step_air(&zone, &state, &[295.0; 4], 0.0, -1.0).is_err());
        assert!(step_air(&zone, &state, &[f64::NAN; 4], 0.0, 900.0).is_err());
        let bad = Zone {
            air_volume: 0.0,
            ..zone
        };
        assert!(bad.validate().is_err());
    }

    proptest! {
        #[test]
        fn update_is_convex_combination(
            t_in in 270.0f64..320.0,
            t1 in 270.0f64..320.0,
            t2 in 270.0f64..320.0,
            dt in 1.0f64..1e7,
        ) {
            let zone = Zone {
                air_volume: 36.0,
                air_capacity: 1.2e3,
                members: vec![
                    ZoneMember { area: 12.0, h_in: 8.7 },
                    ZoneMember { area: 9.0, h_in: 2.5 },
                ],
            };
            let state = ZoneState { t_in, time: 0.0 };
            let next = step_air(&zone, &state, &[t1, t2], 0.0, dt).unwrap();
            let w = [12.0 * 8.7, 9.0 * 2.5];
            let mean = (w[0] * t1 + w[1] * t2) / (w[0] + w[1]);
            let lo = t_in.min(mean) - 1e-9;
            let hi = t_in.max(mean) + 1e-9;
            prop_assert!(next.t_in >= lo && next.t_in <= hi);
        }
    }
}
