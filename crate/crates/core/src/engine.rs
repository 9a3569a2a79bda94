//! Time loop and the nested fixed-point coupling.
//!
//! Every triangle of the scene owns a 1D conduction slab. At each time
//! step the boundary conditions are taken at the end-of-step instant, so
//! the conduction solves, the radiosity solves and the zone air balances
//! depend on each other and the step is closed by two nested fixed-point
//! iterations:
//!
//! - the outer loop alternates stepping all slabs with the current
//!   outdoor long-wave fluxes and re-solving the outdoor radiosity from
//!   the updated exterior surface temperatures and the sky;
//! - inside it, one loop per building zone alternates stepping the zone's
//!   member slabs, updating the zone air temperature, and re-solving the
//!   zone radiosity from the updated interior face temperatures.
//!
//! Convergence is measured on dimensionless temperature changes between
//! iterates against `eta = eta_factor * dt*`, where `dt*` uses the
//! largest diffusion time scale among the slabs (the most restrictive
//! choice; a thin slab's own `t_ref` would make `eta` uselessly loose).
//! Each loop is seeded with the previous step's converged values.

use crate::airzone::{self, Zone, ZoneState};
use crate::conduction::{Side, Slab, SlabState, SurfaceBc};
use crate::error::{Error, Result};
use crate::geometry::{EnclosureKind, QuadratureSpec, SceneMesh, ViewFactorMatrix};
use crate::io::weather::{WeatherSample, WeatherSeries};
use crate::longwave::{RadiositySolver, ReflectionModel};
use rayon::prelude::*;
use sha2::Digest;
use std::path::Path;

/// How the exterior film coefficient of a scene-exposed face is obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HOutSpec {
    Fixed(f64),
    /// From the wind speed correlation (`io::h_out_correlation`).
    Correlation,
}

/// Boundary attachment of one slab end.
#[derive(Debug, Clone, PartialEq)]
pub enum EndBc {
    /// Exposed to the outdoor scene: weather air, wind-driven or fixed
    /// film coefficient, absorbed short-wave and outdoor long-wave.
    Scene { h_out: HOutSpec },
    /// Faces the air of a building zone.
    ZoneAir { zone: usize, h_in: f64 },
    /// Constant air sink without radiation.
    FixedAir { t_air: f64, h: f64 },
    /// Imposed deep-ground temperature (soil columns only).
    DeepGround,
}

/// One triangle of the scene with its conduction slab.
#[derive(Debug, Clone)]
pub struct SlabUnit {
    pub id: String,
    pub group: String,
    pub slab: Slab,
    /// Boundary at `x = 0`.
    pub end0: EndBc,
    /// Boundary at `x = e`.
    pub end1: EndBc,
    pub albedo: f64,
    pub emissivity: f64,
    /// Triangle area [m^2].
    pub area: f64,
}

/// A building zone together with its member faces.
#[derive(Debug, Clone)]
pub struct ZoneUnit {
    pub name: String,
    pub zone: Zone,
    /// `(unit index, which slab end faces the zone)`, aligned with
    /// `zone.members` and `interior_patches`.
    pub members: Vec<(usize, Side)>,
    /// Patch ids (into the scene mesh) of the zone's interior enclosure.
    pub interior_patches: Vec<usize>,
}

/// Long-wave options of a run.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RadiationSettings {
    pub outside_longwave: bool,
    pub inside_longwave: bool,
    pub model: ReflectionModel,
}

impl Default for RadiationSettings {
    fn default() -> Self {
        RadiationSettings {
            outside_longwave: true,
            inside_longwave: true,
            model: ReflectionModel::Full,
        }
    }
}

/// A complete, validated simulation model.
#[derive(Debug, Clone)]
pub struct Model {
    pub name: String,
    pub mesh: SceneMesh,
    pub units: Vec<SlabUnit>,
    pub zones: Vec<ZoneUnit>,
    /// Patch ids of the outdoor enclosure, in matrix order.
    pub exterior_patches: Vec<usize>,
    /// Unit index behind each exterior patch (parallel to
    /// `exterior_patches`).
    pub exterior_units: Vec<usize>,
    /// Scene reference temperature [K]; also the uniform initial state.
    pub t0: f64,
    /// Deep-ground temperature [K] (required when soils are present).
    pub t_deep: Option<f64>,
    pub radiation: RadiationSettings,
    pub quadrature: QuadratureSpec,
}

impl Model {
    /// Cross-validate and finish a model assembled by a loader or by code.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: String,
        mesh: SceneMesh,
        units: Vec<SlabUnit>,
        zones: Vec<ZoneUnit>,
        exterior_patches: Vec<usize>,
        exterior_units: Vec<usize>,
        t0: f64,
        t_deep: Option<f64>,
        radiation: RadiationSettings,
        quadrature: QuadratureSpec,
    ) -> Result<Self> {
        if !(t0 > 0.0) {
            return Err(Error::SceneInvalid(
                "reference temperature must be positive kelvin".into(),
            ));
        }
        quadrature.validate()?;
        if exterior_patches.len() != exterior_units.len() {
            return Err(Error::SceneInvalid("exterior patch/unit maps disagree".into()));
        }
        let needs_deep = units
            .iter()
            .any(|u| matches!(u.end0, EndBc::DeepGround) || matches!(u.end1, EndBc::DeepGround));
        if needs_deep && t_deep.is_none() {
            return Err(Error::SceneInvalid(
                "soil columns present but no deep-ground temperature configured".into(),
            ));
        }
        for z in &zones {
            z.zone.validate()?;
            if z.members.len() != z.zone.members.len()
                || z.members.len() != z.interior_patches.len()
            {
                return Err(Error::SceneInvalid(format!(
                    "zone {} member bookkeeping is inconsistent",
                    z.name
                )));
            }
            for &(u, _) in &z.members {
                if u >= units.len() {
                    return Err(Error::SceneInvalid(format!(
                        "zone {} references unit {u} out of range",
                        z.name
                    )));
                }
            }
        }
        let n_zones = zones.len();
        for u in &units {
            for end in [&u.end0, &u.end1] {
                if let EndBc::ZoneAir { zone, .. } = end {
                    if *zone >= n_zones {
                        return Err(Error::SceneInvalid(format!(
                            "unit {} references missing zone {zone}",
                            u.id
                        )));
                    }
                }
            }
        }
        Ok(Model {
            name,
            mesh,
            units,
            zones,
            exterior_patches,
            exterior_units,
            t0,
            t_deep,
            radiation,
            quadrature,
        })
    }

    /// Content hash over everything the view factor matrices depend on.
    pub fn content_hash(&self) -> [u8; 32] {
        let mut h = sha2::Sha256::new();
        for p in &self.mesh.patches {
            for v in &p.vertices {
                h.update(v.x.to_bits().to_le_bytes());
                h.update(v.y.to_bits().to_le_bytes());
                h.update(v.z.to_bits().to_le_bytes());
            }
            h.update(p.emissivity.to_bits().to_le_bytes());
            h.update([match p.side {
                crate::geometry::PatchSide::Exterior => 0u8,
                crate::geometry::PatchSide::Interior => 1u8,
            }]);
            h.update(p.group.as_bytes());
            h.update([0u8]);
        }
        let q = &self.quadrature;
        h.update(q.order.to_le_bytes());
        h.update(q.separation_ratio.to_bits().to_le_bytes());
        h.update(q.contour_tol.to_bits().to_le_bytes());
        h.update(q.max_subdivision.to_le_bytes());
        h.update(q.tolerance.to_bits().to_le_bytes());
        h.update([match q.occlusion {
            crate::geometry::OcclusionMode::CentroidRay => 0u8,
            crate::geometry::OcclusionMode::FourSamples => 1u8,
        }]);
        for ids in self
            .zones
            .iter()
            .map(|z| &z.interior_patches)
            .chain(std::iter::once(&self.exterior_patches))
        {
            for &id in ids {
                h.update((id as u64).to_le_bytes());
            }
            h.update([0xFFu8]);
        }
        h.finalize().into()
    }

    /// The largest slab diffusion time scale, which fixes the engine's
    /// dimensionless time step.
    pub fn max_t_ref(&self) -> f64 {
        self.units
            .iter()
            .map(|u| u.slab.scaling().t_ref())
            .fold(0.0, f64::max)
    }
}

/// Which way the engine walks the unit list when stepping. Results must be
/// bitwise identical either way; this knob exists to test that contract.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepOrder {
    #[default]
    Forward,
    Reverse,
}

/// Run parameters.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct SimulationConfig {
    /// Time step [s].
    pub dt_s: f64,
    /// Horizon [s].
    pub horizon_s: f64,
    /// `eta = eta_factor * dt*`.
    pub eta_factor: f64,
    pub max_outer_iters: u32,
    pub max_inner_iters: u32,
    /// Relaxation on the surface temperatures fed to the outdoor
    /// radiosity between outer iterates; 1 disables it.
    pub under_relaxation: f64,
    pub step_order: StepOrder,
    /// Record every k-th step (the initial state is always recorded).
    pub record_every: usize,
    /// Also record full nodal temperature profiles.
    pub record_profiles: bool,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            dt_s: 900.0,
            horizon_s: 3.0 * 86400.0,
            eta_factor: 0.01,
            max_outer_iters: 25,
            max_inner_iters: 25,
            under_relaxation: 1.0,
            step_order: StepOrder::Forward,
            record_every: 1,
            record_profiles: false,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt_s > 0.0) || !self.dt_s.is_finite() {
            return Err(Error::InvalidArgument("dt must be positive".into()));
        }
        if self.horizon_s < 0.0 || !self.horizon_s.is_finite() {
            return Err(Error::InvalidArgument("horizon must be nonnegative".into()));
        }
        if !(self.eta_factor > 0.0) {
            return Err(Error::InvalidArgument("eta factor must be positive".into()));
        }
        if self.max_outer_iters < 1 || self.max_inner_iters < 1 {
            return Err(Error::InvalidArgument("iteration caps must be at least 1".into()));
        }
        if !(self.under_relaxation > 0.0 && self.under_relaxation <= 1.0) {
            return Err(Error::InvalidArgument(
                "under-relaxation must lie in (0, 1]".into(),
            ));
        }
        if self.record_every == 0 {
            return Err(Error::InvalidArgument("record_every must be at least 1".into()));
        }
        Ok(())
    }
}

/// Per-step iteration statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct StepStats {
    pub outer_iters: u32,
    pub inner_iters_max: u32,
    pub final_residual: f64,
    /// Outer-loop residual after each iterate (dimensionless).
    pub residual_history: Vec<f64>,
    /// Worst boundary-row audit `|q_c - (q_net - h (T_s - T_air))|` over
    /// all convective faces [W m^-2].
    pub bc_audit_max: f64,
}

/// Convergence bookkeeping of a run.
#[derive(Debug, Clone, Default)]
pub struct ConvergenceReport {
    /// Dimensionless threshold actually used.
    pub eta: f64,
    pub steps: Vec<StepStats>,
}

impl ConvergenceReport {
    pub fn max_outer_iters(&self) -> u32 {
        self.steps.iter().map(|s| s.outer_iters).max().unwrap_or(0)
    }

    pub fn max_inner_iters(&self) -> u32 {
        self.steps.iter().map(|s| s.inner_iters_max).max().unwrap_or(0)
    }

    pub fn max_bc_audit(&self) -> f64 {
        self.steps.iter().map(|s| s.bc_audit_max).fold(0.0, f64::max)
    }
}

/// Recorded time series of a run. Temperatures in kelvin, fluxes in
/// W m^-2. All per-unit tables are `[recorded step][unit]`.
#[derive(Debug, Clone, Default)]
pub struct ResultSet {
    pub times: Vec<f64>,
    pub unit_ids: Vec<String>,
    pub zone_names: Vec<String>,
    pub t_front: Vec<Vec<f64>>,
    pub t_back: Vec<Vec<f64>>,
    pub q_sw: Vec<Vec<f64>>,
    pub q_lw_out: Vec<Vec<f64>>,
    pub q_lw_in: Vec<Vec<f64>>,
    pub q_c: Vec<Vec<f64>>,
    pub h_out: Vec<Vec<f64>>,
    pub zone_t_in: Vec<Vec<f64>>,
    pub convergence: ConvergenceReport,
    /// `[recorded step][unit][node]`, present when requested.
    pub profiles: Option<Vec<Vec<Vec<f64>>>>,
}

impl ResultSet {
    /// Index of the first recorded time at or after `t`.
    pub fn first_index_at(&self, t: f64) -> usize {
        self.times.partition_point(|&x| x < t - 1e-9)
    }

    pub fn unit_index(&self, id: &str) -> Option<usize> {
        self.unit_ids.iter().position(|u| u == id)
    }
}

/// Boundary values actually used in the final solve of each unit; kept for
/// the audit and the recorded flux components.
#[derive(Debug, Clone, Copy, Default)]
struct FaceRecord {
    t_air: f64,
    h: f64,
    q_net: f64,
    convective: bool,
}

#[derive(Debug, Clone, Copy, Default)]
struct UnitRecord {
    front: FaceRecord,
    back: FaceRecord,
    q_sw_abs: f64,
    q_lw_out: f64,
    q_lw_in: f64,
    h_out: f64,
}

/// One simulation state: all slab profiles, zone air temperatures and the
/// long-wave fluxes that closed the step.
#[derive(Debug, Clone)]
pub struct EngineState {
    pub time: f64,
    pub slab_states: Vec<SlabState>,
    pub zone_states: Vec<ZoneState>,
    q_lw_out: Vec<f64>,
    q_lw_in: Vec<f64>,
    records: Vec<UnitRecord>,
}

pub struct Engine<'a> {
    model: &'a Model,
    weather: &'a WeatherSeries,
    cfg: SimulationConfig,
    rad_out: Option<RadiositySolver>,
    rad_in: Vec<Option<RadiositySolver>>,
    /// Dimensionless convergence threshold.
    eta: f64,
}

impl<'a> Engine<'a> {
    pub fn new(model: &'a Model, weather: &'a WeatherSeries, cfg: SimulationConfig) -> Result<Self> {
        Self::with_viewfactor_cache(model, weather, cfg, None)
    }

    /// Like `new`, but reuses (or fills) binary view factor caches keyed
    /// by the model content hash. `cache` is a path stem; one file per
    /// enclosure is placed next to it.
    pub fn with_viewfactor_cache(
        model: &'a Model,
        weather: &'a WeatherSeries,
        cfg: SimulationConfig,
        cache: Option<&Path>,
    ) -> Result<Self> {
        cfg.validate()?;
        weather.check_coverage(cfg.horizon_s)?;
        for (ui, u) in model.units.iter().enumerate() {
            if matches!(u.end0, EndBc::Scene { .. }) && !weather.has_shortwave(&u.group) {
                return Err(Error::WeatherFormat {
                    path: weather.origin().to_path_buf(),
                    message: format!(
                        "missing short-wave column q_sw:{} required by scene-exposed group \
                         (unit {ui})",
                        u.group
                    ),
                });
            }
        }
        if model.radiation.outside_longwave && !weather.has_sky() {
            return Err(Error::WeatherFormat {
                path: weather.origin().to_path_buf(),
                message: "outdoor long-wave exchange needs a t_sky_c or lw_down_wm2 column".into(),
            });
        }
        if weather.max_wind() > crate::io::CORRELATION_MAX_WIND
            && model.units.iter().any(|u| {
                matches!(
                    u.end0,
                    EndBc::Scene {
                        h_out: HOutSpec::Correlation
                    }
                )
            })
        {
            log::warn!(
                "wind speed reaches {:.2} m/s; the film coefficient correlation is valid below \
                 {} m/s",
                weather.max_wind(),
                crate::io::CORRELATION_MAX_WIND
            );
        }

        let hash = model.content_hash();
        let rad_out = if model.radiation.outside_longwave {
            if model.exterior_patches.is_empty() {
                return Err(Error::SceneInvalid(
                    "outdoor long-wave enabled but the scene has no exterior patches".into(),
                ));
            }
            let patches = renumbered(&model.mesh, &model.exterior_patches);
            let vf = match cache {
                Some(path) => ViewFactorMatrix::load_or_assemble(
                    &path.with_extension("exterior.vf"),
                    &hash,
                    &patches,
                    EnclosureKind::ExteriorWithSky,
                    &model.quadrature,
                )?,
                None => ViewFactorMatrix::assemble(
                    &patches,
                    EnclosureKind::ExteriorWithSky,
                    &model.quadrature,
                )?,
            };
            let eps: Vec<f64> = patches.iter().map(|p| p.emissivity).collect();
            Some(RadiositySolver::new(&vf, &eps, model.radiation.model)?)
        } else {
            None
        };

        let mut rad_in = Vec::with_capacity(model.zones.len());
        for z in &model.zones {
            if model.radiation.inside_longwave {
                let patches = renumbered(&model.mesh, &z.interior_patches);
                let vf = match cache {
                    Some(path) => ViewFactorMatrix::load_or_assemble(
                        &path.with_extension(format!("{}.vf", z.name)),
                        &hash,
                        &patches,
                        EnclosureKind::ClosedInterior,
                        &model.quadrature,
                    )?,
                    None => ViewFactorMatrix::assemble(
                        &patches,
                        EnclosureKind::ClosedInterior,
                        &model.quadrature,
                    )?,
                };
                let eps: Vec<f64> = patches.iter().map(|p| p.emissivity).collect();
                rad_in.push(Some(RadiositySolver::new(&vf, &eps, model.radiation.model)?));
            } else {
                rad_in.push(None);
            }
        }

        let dt_star = cfg.dt_s / model.max_t_ref();
        let eta = cfg.eta_factor * dt_star;
        Ok(Engine {
            model,
            weather,
            cfg,
            rad_out,
            rad_in,
            eta,
        })
    }

    /// Dimensionless convergence threshold `eta = eta_factor * dt*`.
    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// Uniform initial state at the scene reference temperature, with the
    /// long-wave fields solved once from the initial temperatures.
    pub fn initial_state(&self) -> Result<EngineState> {
        let m = self.model;
        let n = m.units.len();
        let slab_states: Vec<SlabState> =
            m.units.iter().map(|u| u.slab.uniform_state(m.t0, 0.0)).collect();
        let zone_states: Vec<ZoneState> = m
            .zones
            .iter()
            .map(|_| ZoneState {
                t_in: m.t0,
                time: 0.0,
            })
            .collect();
        let mut state = EngineState {
            time: 0.0,
            slab_states,
            zone_states,
            q_lw_out: vec![0.0; n],
            q_lw_in: vec![0.0; n],
            records: vec![UnitRecord::default(); n],
        };
        if let Some(rad) = &self.rad_out {
            let sample = self.weather.sample(0.0)?;
            let j_sky = sample
                .j_sky
                .ok_or_else(|| Error::Radiosity("no sky data at t = 0".into()))?;
            let temps: Vec<f64> = m
                .exterior_units
                .iter()
                .map(|&u| state.slab_states[u].temps[0])
                .collect();
            let sol = rad.solve(&temps, Some(j_sky))?;
            for (pos, &u) in m.exterior_units.iter().enumerate() {
                state.q_lw_out[u] = sol.net_flux[pos];
            }
        }
        for (zi, z) in m.zones.iter().enumerate() {
            if let Some(rad) = &self.rad_in[zi] {
                let temps: Vec<f64> = z
                    .members
                    .iter()
                    .map(|&(u, side)| face_temp(&state.slab_states[u], side))
                    .collect();
                let sol = rad.solve(&temps, None)?;
                for (k, &(u, _)) in z.members.iter().enumerate() {
                    state.q_lw_in[u] = sol.net_flux[k];
                }
            }
        }
        Ok(state)
    }

    /// March from 0 to the horizon and record the requested series.
    pub fn run(&self) -> Result<ResultSet> {
        let m = self.model;
        let dt = self.cfg.dt_s;
        let n_steps = (self.cfg.horizon_s / dt + 1e-9).floor() as u64;

        let mut rs = ResultSet {
            unit_ids: m.units.iter().map(|u| u.id.clone()).collect(),
            zone_names: m.zones.iter().map(|z| z.name.clone()).collect(),
            profiles: self.cfg.record_profiles.then(Vec::new),
            convergence: ConvergenceReport {
                eta: self.eta,
                ..Default::default()
            },
            ..Default::default()
        };

        let mut state = self.initial_state()?;
        self.record(&mut rs, &state);
        for step in 1..=n_steps {
            let t1 = step as f64 * dt;
            let (next, stats) = self.advance(&state, t1)?;
            state = next;
            rs.convergence.steps.push(stats);
            if step % self.cfg.record_every as u64 == 0 {
                self.record(&mut rs, &state);
            }
        }
        Ok(rs)
    }

    fn record(&self, rs: &mut ResultSet, state: &EngineState) {
        let m = self.model;
        rs.times.push(state.time);
        let n = m.units.len();
        let mut t_front = Vec::with_capacity(n);
        let mut t_back = Vec::with_capacity(n);
        let mut q_c = Vec::with_capacity(n);
        for (u, s) in m.units.iter().zip(&state.slab_states) {
            t_front.push(s.temps[0]);
            t_back.push(*s.temps.last().unwrap());
            q_c.push(u.slab.surface_conductive_flux(s, Side::X0));
        }
        rs.t_front.push(t_front);
        rs.t_back.push(t_back);
        rs.q_c.push(q_c);
        rs.q_sw.push(state.records.iter().map(|r| r.q_sw_abs).collect());
        rs.q_lw_out.push(state.records.iter().map(|r| r.q_lw_out).collect());
        rs.q_lw_in.push(state.records.iter().map(|r| r.q_lw_in).collect());
        rs.h_out.push(state.records.iter().map(|r| r.h_out).collect());
        rs.zone_t_in.push(state.zone_states.iter().map(|z| z.t_in).collect());
        if let Some(profiles) = &mut rs.profiles {
            profiles.push(state.slab_states.iter().map(|s| s.temps.clone()).collect());
        }
    }

    fn order_of(&self, len: usize) -> Vec<usize> {
        let mut order: Vec<usize> = (0..len).collect();
        if self.cfg.step_order == StepOrder::Reverse {
            order.reverse();
        }
        order
    }

    /// Resolve the boundary condition of one slab end for the current
    /// iterate values.
    fn face_bc(
        &self,
        unit: &SlabUnit,
        end: &EndBc,
        sample: &WeatherSample,
        q_lw_out: f64,
        q_lw_in: f64,
        zone_temps: &[f64],
    ) -> Result<(SurfaceBc, FaceRecord, f64)> {
        match end {
            EndBc::Scene { h_out } => {
                let h = match h_out {
                    HOutSpec::Fixed(v) => *v,
                    HOutSpec::Correlation => crate::io::h_out_correlation(sample.wind)?,
                };
                let q_inc = sample.shortwave(&unit.group).unwrap_or(0.0);
                let q_net = (1.0 - unit.albedo) * q_inc - q_lw_out;
                Ok((
                    SurfaceBc::ConvectiveRadiative {
                        t_air: sample.t_out,
                        h,
                        q_net,
                    },
                    FaceRecord {
                        t_air: sample.t_out,
                        h,
                        q_net,
                        convective: true,
                    },
                    h,
                ))
            }
            EndBc::ZoneAir { zone, h_in } => {
                let q_net = -q_lw_in;
                let t_air = zone_temps[*zone];
                Ok((
                    SurfaceBc::ConvectiveRadiative {
                        t_air,
                        h: *h_in,
                        q_net,
                    },
                    FaceRecord {
                        t_air,
                        h: *h_in,
                        q_net,
                        convective: true,
                    },
                    0.0,
                ))
            }
            EndBc::FixedAir { t_air, h } => Ok((
                SurfaceBc::ConvectiveRadiative {
                    t_air: *t_air,
                    h: *h,
                    q_net: 0.0,
                },
                FaceRecord {
                    t_air: *t_air,
                    h: *h,
                    q_net: 0.0,
                    convective: true,
                },
                0.0,
            )),
            EndBc::DeepGround => {
                let t = self.model.t_deep.expect("validated at model construction");
                Ok((
                    SurfaceBc::Dirichlet { temperature: t },
                    FaceRecord::default(),
                    0.0,
                ))
            }
        }
    }

    /// Step one unit from the previous time step's state with the current
    /// iterate's boundary values.
    fn step_unit(
        &self,
        ui: usize,
        prev: &SlabState,
        sample: &WeatherSample,
        q_lw_out: &[f64],
        q_lw_in: &[f64],
        zone_temps: &[f64],
    ) -> Result<(SlabState, UnitRecord)> {
        let unit = &self.model.units[ui];
        let (bc0, rec0, h_out0) =
            self.face_bc(unit, &unit.end0, sample, q_lw_out[ui], q_lw_in[ui], zone_temps)?;
        let (bc1, rec1, _) =
            self.face_bc(unit, &unit.end1, sample, q_lw_out[ui], q_lw_in[ui], zone_temps)?;
        let dt = self.cfg.dt_s;
        let next = match unit.slab.kind() {
            crate::conduction::SlabKind::Soil => {
                let SurfaceBc::Dirichlet { temperature } = bc1 else {
                    return Err(Error::SceneInvalid(format!(
                        "soil unit {} lacks a deep boundary",
                        unit.id
                    )));
                };
                unit.slab.step_soil(prev, &bc0, temperature, dt)?
            }
            crate::conduction::SlabKind::Wall => unit.slab.step_wall(prev, &bc0, &bc1, dt)?,
        };
        let record = UnitRecord {
            front: rec0,
            back: rec1,
            q_sw_abs: match unit.end0 {
                EndBc::Scene { .. } => {
                    (1.0 - unit.albedo) * sample.shortwave(&unit.group).unwrap_or(0.0)
                }
                _ => 0.0,
            },
            q_lw_out: q_lw_out[ui],
            q_lw_in: q_lw_in[ui],
            h_out: h_out0,
        };
        Ok((next, record))
    }

    #[allow(clippy::too_many_arguments)]
    fn step_units(
        &self,
        unit_ids: &[usize],
        prev: &EngineState,
        sample: &WeatherSample,
        q_lw_out: &[f64],
        q_lw_in: &[f64],
        zone_temps: &[f64],
        cur_slab: &mut [SlabState],
        records: &mut [UnitRecord],
    ) -> Result<()> {
        let order = self.order_of(unit_ids.len());
        // parallel over independent slabs; collect keeps index order so
        // results do not depend on scheduling
        let stepped: Vec<Result<(SlabState, UnitRecord)>> = if unit_ids.len() >= 16 {
            order
                .par_iter()
                .map(|&k| {
                    let u = unit_ids[k];
                    self.step_unit(u, &prev.slab_states[u], sample, q_lw_out, q_lw_in, zone_temps)
                })
                .collect()
        } else {
            order
                .iter()
                .map(|&k| {
                    let u = unit_ids[k];
                    self.step_unit(u, &prev.slab_states[u], sample, q_lw_out, q_lw_in, zone_temps)
                })
                .collect()
        };
        for (&k, res) in order.iter().zip(stepped) {
            let u = unit_ids[k];
            let (next, rec) = res?;
            cur_slab[u] = next;
            records[u] = rec;
        }
        Ok(())
    }

    /// Inner fixed point of one zone: member slabs, the air balance, and
    /// the zone radiosity, iterated to `eta`.
    #[allow(clippy::too_many_arguments)]
    fn zone_fixed_point(
        &self,
        zi: usize,
        prev: &EngineState,
        sample: &WeatherSample,
        t1: f64,
        q_lw_out: &[f64],
        q_lw_in: &mut [f64],
        cur_slab: &mut [SlabState],
        records: &mut [UnitRecord],
        zone_temps: &mut [f64],
    ) -> Result<u32> {
        let z = &self.model.zones[zi];
        let t0 = self.model.t0;
        let q_v = sample.zone_source(&z.name);
        let member_units: Vec<usize> = z.members.iter().map(|&(u, _)| u).collect();
        // iterate seeds: previous converged step
        let mut face_prev: Vec<f64> = z
            .members
            .iter()
            .map(|&(u, side)| face_temp(&prev.slab_states[u], side))
            .collect();
        let mut t_in_prev = prev.zone_states[zi].t_in;

        for m_iter in 1..=self.cfg.max_inner_iters {
            self.step_units(
                &member_units,
                prev,
                sample,
                q_lw_out,
                q_lw_in,
                zone_temps,
                cur_slab,
                records,
            )?;
            let faces: Vec<f64> = z
                .members
                .iter()
                .map(|&(u, side)| face_temp(&cur_slab[u], side))
                .collect();

            let air = airzone::step_air(&z.zone, &prev.zone_states[zi], &faces, q_v, self.cfg.dt_s)?;
            zone_temps[zi] = air.t_in;

            if let Some(rad) = &self.rad_in[zi] {
                let sol = rad.solve(&faces, None)?;
                for (k, &(u, _)) in z.members.iter().enumerate() {
                    q_lw_in[u] = sol.net_flux[k];
                }
            }

            let mut residual = (air.t_in - t_in_prev).abs() / t0;
            for (f, fp) in faces.iter().zip(&face_prev) {
                residual = residual.max((f - fp).abs() / t0);
            }
            face_prev = faces;
            t_in_prev = air.t_in;
            if residual < self.eta {
                return Ok(m_iter);
            }
            if m_iter == self.cfg.max_inner_iters {
                return Err(Error::FixedPointDiverged {
                    loop_name: "zone",
                    time: t1,
                    iterations: m_iter,
                    final_residual: residual,
                    threshold: self.eta,
                    residual_history: vec![residual],
                });
            }
        }
        unreachable!("loop returns or errors at the cap");
    }

    /// Advance one time step: the outdoor fixed point with the zone fixed
    /// points nested inside, per the coupling scheme in the module docs.
    pub fn advance(&self, prev: &EngineState, t1: f64) -> Result<(EngineState, StepStats)> {
        let m = self.model;
        let sample = self.weather.sample(t1)?;
        let j_sky = if self.rad_out.is_some() {
            Some(
                sample
                    .j_sky
                    .ok_or_else(|| Error::Radiosity(format!("no sky data at t = {t1}")))?,
            )
        } else {
            None
        };

        let mut q_lw_out = prev.q_lw_out.clone();
        let mut q_lw_in = prev.q_lw_in.clone();
        let mut cur_slab = prev.slab_states.clone();
        let mut records = prev.records.clone();
        let mut zone_temps: Vec<f64> = prev.zone_states.iter().map(|z| z.t_in).collect();
        // residual comparison and under-relaxation memories
        let mut ext_prev: Vec<f64> = m
            .exterior_units
            .iter()
            .map(|&u| prev.slab_states[u].temps[0])
            .collect();
        let mut rad_temps = ext_prev.clone();

        let zone_member: Vec<bool> = {
            let mut v = vec![false; m.units.len()];
            for z in &m.zones {
                for &(u, _) in &z.members {
                    v[u] = true;
                }
            }
            v
        };
        let standalone: Vec<usize> = (0..m.units.len()).filter(|&u| !zone_member[u]).collect();

        let mut residual_history = Vec::new();
        let mut inner_iters_max = 0u32;
        let mut outer_iters = 0u32;
        let mut converged = false;

        for k in 1..=self.cfg.max_outer_iters {
            outer_iters = k;
            self.step_units(
                &standalone,
                prev,
                &sample,
                &q_lw_out,
                &q_lw_in,
                &zone_temps,
                &mut cur_slab,
                &mut records,
            )?;

            for zi in 0..m.zones.len() {
                let iters = self.zone_fixed_point(
                    zi,
                    prev,
                    &sample,
                    t1,
                    &q_lw_out,
                    &mut q_lw_in,
                    &mut cur_slab,
                    &mut records,
                    &mut zone_temps,
                )?;
                inner_iters_max = inner_iters_max.max(iters);
            }

            let ext_new: Vec<f64> = m
                .exterior_units
                .iter()
                .map(|&u| cur_slab[u].temps[0])
                .collect();
            if let Some(rad) = &self.rad_out {
                let omega = self.cfg.under_relaxation;
                if omega < 1.0 {
                    log::debug!(
                        "under-relaxation {omega} applied to outdoor radiosity temperatures at \
                         t = {t1}"
                    );
                    for (r, &t) in rad_temps.iter_mut().zip(&ext_new) {
                        *r = omega * t + (1.0 - omega) * *r;
                    }
                } else {
                    rad_temps.copy_from_slice(&ext_new);
                }
                let sol = rad.solve(&rad_temps, j_sky)?;
                for (pos, &u) in m.exterior_units.iter().enumerate() {
                    q_lw_out[u] = sol.net_flux[pos];
                }
            }

            let mut residual = 0.0f64;
            for (t_new, t_old) in ext_new.iter().zip(&ext_prev) {
                residual = residual.max((t_new - t_old).abs() / m.t0);
            }
            ext_prev = ext_new;
            residual_history.push(residual);
            if residual < self.eta {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::FixedPointDiverged {
                loop_name: "outdoor",
                time: t1,
                iterations: outer_iters,
                final_residual: *residual_history.last().unwrap(),
                threshold: self.eta,
                residual_history,
            });
        }

        // boundary-row audit on every convective face
        let mut bc_audit_max = 0.0f64;
        for (ui, unit) in m.units.iter().enumerate() {
            let prev_s = &prev.slab_states[ui];
            let next_s = &cur_slab[ui];
            let rec = &records[ui];
            if rec.front.convective {
                let q = unit
                    .slab
                    .boundary_row_flux(prev_s, next_s, Side::X0, self.cfg.dt_s);
                let imposed = rec.front.q_net - rec.front.h * (next_s.temps[0] - rec.front.t_air);
                bc_audit_max = bc_audit_max.max((q - imposed).abs());
            }
            if rec.back.convective {
                let q = unit
                    .slab
                    .boundary_row_flux(prev_s, next_s, Side::Xe, self.cfg.dt_s);
                let t_face = *next_s.temps.last().unwrap();
                let imposed = rec.back.q_net - rec.back.h * (t_face - rec.back.t_air);
                bc_audit_max = bc_audit_max.max((q - imposed).abs());
            }
        }

        let zone_states: Vec<ZoneState> = zone_temps
            .iter()
            .map(|&t| ZoneState { t_in: t, time: t1 })
            .collect();
        let next = EngineState {
            time: t1,
            slab_states: cur_slab,
            zone_states,
            q_lw_out,
            q_lw_in,
            records,
        };
        let stats = StepStats {
            outer_iters,
            inner_iters_max,
            final_residual: *residual_history.last().unwrap(),
            residual_history,
            bc_audit_max,
        };
        Ok((next, stats))
    }
}

fn face_temp(state: &SlabState, side: Side) -> f64 {
    match side {
        Side::X0 => state.temps[0],
        Side::Xe => *state.temps.last().unwrap(),
    }
}

/// Clone a patch subset with dense ids, as the enclosure assembly expects.
fn renumbered(mesh: &SceneMesh, ids: &[usize]) -> Vec<crate::geometry::SurfacePatch> {
    ids.iter()
        .enumerate()
        .map(|(k, &id)| {
            let mut p = mesh.patches[id].clone();
            p.id = k;
            p
        })
        .collect()
}

/// Run a model against a weather series: the main library entry point.
pub fn run(model: &Model, weather: &WeatherSeries, cfg: SimulationConfig) -> Result<ResultSet> {
    Engine::new(model, weather, cfg)?.run()
}
