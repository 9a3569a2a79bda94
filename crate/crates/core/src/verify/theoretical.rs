//! The sinusoidal verification case: a cubic building whose four concrete
//! walls see a prescribed outdoor temperature and a pulsed net radiative
//! flux, coupled to one air zone. Inner-face radiation is neglected and
//! the outdoor long-wave balance is off (the forcing already is the net
//! radiative flux), which makes an exact monolithic reference tractable.

use crate::engine::{
    self, EndBc, HOutSpec, Model, RadiationSettings, ResultSet, SimulationConfig, SlabUnit,
    ZoneUnit,
};
use crate::error::{Error, Result};
use crate::geometry::{PatchSide, Point3, QuadratureSpec, SceneMesh, SurfacePatch};
use crate::io::weather::WeatherSeries;
use crate::verify::metrics::{series_rmse, ErrorReport, SpaceTimeField};
use crate::verify::oracle::FineSolution;
use crate::{airzone, celsius_to_kelvin, conduction};
use std::collections::BTreeMap;

const HOUR: f64 = 3600.0;

/// Geometry, materials and forcing of the verification case.
#[derive(Debug, Clone)]
pub struct TheoreticalCase {
    /// Mean outdoor temperature [K].
    pub t_mean: f64,
    /// First sinusoid: amplitude [K] and frequency [1/s].
    pub delta1: f64,
    pub omega1: f64,
    /// Second sinusoid.
    pub delta2: f64,
    pub omega2: f64,
    /// Radiative pulse magnitude [W m^-2] and frequency [1/s].
    pub q_mag: f64,
    pub omega_q: f64,
    pub h_in: f64,
    pub h_out: f64,
    pub wall_thickness: f64,
    pub conductivity: f64,
    pub volumetric_capacity: f64,
    /// Per-wall face area [m^2] (4 walls).
    pub wall_area: f64,
    pub air_volume: f64,
    pub air_capacity: f64,
    /// Initial/reference temperature [K].
    pub t0: f64,
    pub horizon_s: f64,
}

impl Default for TheoreticalCase {
    fn default() -> Self {
        TheoreticalCase {
            t_mean: celsius_to_kelvin(20.0),
            delta1: -4.4,
            omega1: 1.0 / (72.0 * HOUR),
            delta2: -11.7,
            omega2: 1.0 / (24.0 * HOUR),
            q_mag: 500.0,
            omega_q: 1.0 / (48.0 * HOUR),
            h_in: 8.7,
            h_out: 23.2,
            wall_thickness: 0.20,
            conductivity: 1.75,
            volumetric_capacity: 2.2e6,
            wall_area: 12.0,
            air_volume: 36.0,
            air_capacity: 1.2e3,
            t0: celsius_to_kelvin(20.0),
            horizon_s: 3.0 * 86400.0,
        }
    }
}

impl TheoreticalCase {
    /// `T_out(t)`: mean plus two sinusoids [K].
    pub fn outdoor_temperature(&self, t: f64) -> f64 {
        self.t_mean
            + self.delta1 * (2.0 * std::f64::consts::PI * self.omega1 * t).sin()
            + self.delta2 * (2.0 * std::f64::consts::PI * self.omega2 * t).sin()
    }

    /// `q_out(t)`: even-power sinusoid pulses, always nonnegative
    /// [W m^-2].
    pub fn net_radiative_forcing(&self, t: f64) -> f64 {
        self.q_mag * (2.0 * std::f64::consts::PI * self.omega_q * t).sin().powi(20)
    }

    /// `Σ h S` over the four walls [W/K].
    pub fn coupling_sum(&self) -> f64 {
        4.0 * self.wall_area * self.h_in
    }

    /// Build the runnable model at the given spatial resolution. Four
    /// wall panels (each two triangles) around one air zone; radiation
    /// solvers are off because the net radiative flux is the prescribed
    /// forcing.
    pub fn model(&self, nodes: usize) -> Result<Model> {
        let layer = conduction::MaterialLayer {
            thickness: self.wall_thickness,
            conductivity: self.conductivity,
            volumetric_capacity: self.volumetric_capacity,
        };
        let slab = conduction::Slab::new(conduction::SlabKind::Wall, vec![layer], nodes, self.t0)?;

        // panels of a 4 m x 4 m footprint, 3 m high; every panel 4 x 3 m
        let half = 2.0;
        let height = 3.0;
        let p = Point3::new;
        let quads: [(&str, [Point3; 4]); 4] = [
            (
                "wall-n",
                [
                    p(-half, half, 0.0),
                    p(-half, half, height),
                    p(half, half, height),
                    p(half, half, 0.0),
                ],
            ),
            (
                "wall-s",
                [
                    p(-half, -half, 0.0),
                    p(half, -half, 0.0),
                    p(half, -half, height),
                    p(-half, -half, height),
                ],
            ),
            (
                "wall-e",
                [
                    p(half, -half, 0.0),
                    p(half, half, 0.0),
                    p(half, half, height),
                    p(half, -half, height),
                ],
            ),
            (
                "wall-w",
                [
                    p(-half, -half, 0.0),
                    p(-half, -half, height),
                    p(-half, half, height),
                    p(-half, half, 0.0),
                ],
            ),
        ];

        let mut units = Vec::new();
        let mut patches = Vec::new();
        let mut exterior_patches = Vec::new();
        let mut exterior_units = Vec::new();
        let mut members = Vec::new();
        let mut interior_patches = Vec::new();
        let mut zone_members = Vec::new();

        for (group, quad) in &quads {
            for (k, tri) in [[0usize, 1, 2], [0, 2, 3]].iter().enumerate() {
                let ui = units.len();
                let vertices = [quad[tri[0]], quad[tri[1]], quad[tri[2]]];
                let ext = SurfacePatch {
                    id: patches.len(),
                    vertices,
                    emissivity: 0.9,
                    albedo: 0.0,
                    group: group.to_string(),
                    side: PatchSide::Exterior,
                };
                let area = ext.area();
                exterior_patches.push(ext.id);
                exterior_units.push(ui);
                patches.push(ext);

                let mut int = patches.last().unwrap().clone();
                int.id = patches.len();
                int.side = PatchSide::Interior;
                int.vertices.swap(1, 2);
                interior_patches.push(int.id);
                patches.push(int);

                members.push((ui, conduction::Side::Xe));
                zone_members.push(airzone::ZoneMember {
                    area,
                    h_in: self.h_in,
                });
                units.push(SlabUnit {
                    id: format!("{group}#{k}"),
                    group: group.to_string(),
                    slab: slab.clone(),
                    end0: EndBc::Scene {
                        h_out: HOutSpec::Fixed(self.h_out),
                    },
                    end1: EndBc::ZoneAir { zone: 0, h_in: self.h_in },
                    albedo: 0.0,
                    emissivity: 0.9,
                    area,
                });
            }
        }

        let zone = ZoneUnit {
            name: "cube".into(),
            zone: airzone::Zone {
                air_volume: self.air_volume,
                air_capacity: self.air_capacity,
                members: zone_members,
            },
            members,
            interior_patches,
        };

        Model::new(
            "verification-cube".into(),
            SceneMesh::new(patches)?,
            units,
            vec![zone],
            exterior_patches,
            exterior_units,
            self.t0,
            None,
            RadiationSettings {
                outside_longwave: false,
                inside_longwave: false,
                model: Default::default(),
            },
            QuadratureSpec::default(),
        )
    }

    /// Exact forcing sampled on the run grid (so linear interpolation
    /// never evaluates between samples).
    pub fn weather(&self, dt: f64) -> Result<WeatherSeries> {
        let n = (self.horizon_s / dt + 1e-9).floor() as usize;
        let times: Vec<f64> = (0..=n).map(|k| k as f64 * dt).collect();
        let t_out: Vec<f64> = times.iter().map(|&t| self.outdoor_temperature(t)).collect();
        let q: Vec<f64> = times.iter().map(|&t| self.net_radiative_forcing(t)).collect();
        let wind = vec![0.0; times.len()];
        let mut q_sw = BTreeMap::new();
        for g in ["wall-n", "wall-s", "wall-e", "wall-w"] {
            q_sw.insert(g.to_string(), q.clone());
        }
        WeatherSeries::from_columns(
            "synthetic-verification-forcing".into(),
            times,
            t_out,
            wind,
            None,
            None,
            q_sw,
            BTreeMap::new(),
        )
    }

    /// Run the engine on this case at `(dt, nodes)`, recording profiles
    /// on the comparison grid (multiples of `lcm(dt, 900)`).
    pub fn run_model(&self, dt: f64, nodes: usize) -> Result<ResultSet> {
        let model = self.model(nodes)?;
        let weather = self.weather(dt)?;
        let stride = comparison_stride(dt)?;
        let cfg = SimulationConfig {
            dt_s: dt,
            horizon_s: self.horizon_s,
            record_every: stride,
            record_profiles: true,
            ..Default::default()
        };
        engine::run(&model, &weather, cfg)
    }
}

/// Recording stride so that recorded times land on multiples of both the
/// model step and the 900 s reference grid.
pub fn comparison_stride(dt: f64) -> Result<usize> {
    let d = dt.round() as u64;
    if (dt - d as f64).abs() > 1e-9 || d == 0 {
        return Err(Error::InvalidArgument(
            "verification runs need an integer-second time step".into(),
        ));
    }
    let gcd = {
        let (mut a, mut b) = (d, 900u64);
        while b != 0 {
            (a, b) = (b, a % b);
        }
        a
    };
    let lcm = d / gcd * 900;
    Ok((lcm / d) as usize)
}

/// Errors of one model run against the fine reference.
#[derive(Debug, Clone)]
pub struct VerificationErrors {
    pub report: ErrorReport,
    /// RMSE of the zone air temperature [K].
    pub air_rmse: f64,
    /// Max of the per-time norm, reported alongside `eps_inf`.
    pub max_eps2_t: f64,
}

/// Compare a recorded model run against the reference, on the recorded
/// times excluding the identical initial state.
pub fn verification_errors(rs: &ResultSet, reference: &FineSolution) -> Result<VerificationErrors> {
    let profiles = rs
        .profiles
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("run lacks recorded profiles".into()))?;
    let nodes = profiles
        .first()
        .and_then(|p| p.first())
        .map(Vec::len)
        .ok_or_else(|| Error::InvalidArgument("empty profiles".into()))?;
    let coarse_ref = reference.project_wall(nodes)?;

    // all walls behave identically; compare the first unit's field
    let mut num_rows = Vec::new();
    let mut ref_rows = Vec::new();
    let mut air_num = Vec::new();
    let mut air_ref = Vec::new();
    for (k, &t) in rs.times.iter().enumerate() {
        if k == 0 {
            continue;
        }
        let ref_idx = (t / 900.0).round() as usize;
        if (t - ref_idx as f64 * 900.0).abs() > 1e-6 || ref_idx >= reference.times.len() {
            return Err(Error::InvalidArgument(format!(
                "recorded time {t} is not on the reference grid"
            )));
        }
        num_rows.push(profiles[k][0].clone());
        ref_rows.push(coarse_ref[ref_idx].clone());
        air_num.push(rs.zone_t_in[k][0]);
        air_ref.push(reference.air[ref_idx]);
    }
    let num = SpaceTimeField::from_rows(&num_rows)?;
    let reference_field = SpaceTimeField::from_rows(&ref_rows)?;
    let report = ErrorReport::compute(&num, &reference_field)?;
    let air_rmse = series_rmse(&air_num, &air_ref)?;
    let max_eps2_t = report.eps2_t.iter().cloned().fold(0.0, f64::max);
    Ok(VerificationErrors {
        report,
        air_rmse,
        max_eps2_t,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn forcing_anchors() {
        let case = TheoreticalCase::default();
        // sines vanish at t = 0
        assert_relative_eq!(case.outdoor_temperature(0.0), celsius_to_kelvin(20.0));
        assert_eq!(case.net_radiative_forcing(0.0), 0.0);
        // pulse peaks at 500 where sin = 1: quarter of the 48 h period
        let t_peak = 12.0 * HOUR;
        assert_relative_eq!(case.net_radiative_forcing(t_peak), 500.0, max_relative = 1e-10);
        // nonnegative everywhere (even power)
        for k in 0..500 {
            let t = k as f64 * 600.0;
            assert!(case.net_radiative_forcing(t) >= 0.0);
        }
        // narrow pulses: half-maximum width about 4 h around the peak
        let half = case.net_radiative_forcing(t_peak - 2.01 * HOUR);
        assert!(half < 260.0 && half > 100.0, "half-width sample {half}");
        assert!(case.net_radiative_forcing(t_peak - 6.0 * HOUR) < 1.0);
    }

    #[test]
    fn model_builds_with_expected_coupling() {
        let case = TheoreticalCase::default();
        let model = case.model(11).unwrap();
        assert_eq!(model.units.len(), 8);
        assert_eq!(model.zones[0].zone.members.len(), 8);
        assert_relative_eq!(model.zones[0].zone.coupling_sum(), 417.6, max_relative = 1e-12);
        assert_relative_eq!(model.zones[0].zone.heat_capacity(), 43200.0);
        let area: f64 = model.units.iter().map(|u| u.area).sum();
        assert_relative_eq!(area, 48.0, max_relative = 1e-12);
    }

    #[test]
    fn comparison_strides() {
        assert_eq!(comparison_stride(900.0).unwrap(), 1);
        assert_eq!(comparison_stride(3600.0).unwrap(), 1);
        assert_eq!(comparison_stride(450.0).unwrap(), 2);
        assert_eq!(comparison_stride(225.0).unwrap(), 4);
        assert_eq!(comparison_stride(100.0).unwrap(), 9);
        assert_eq!(comparison_stride(1.0).unwrap(), 900);
        assert!(comparison_stride(0.25).is_err());
    }
}
