//! Local sensitivity analysis by central finite differences.
//!
//! The model is run at the two bracket values of one parameter; the
//! derivative of each tracked output series is
//! `(T(p_upper) - T(p_lower)) / (p_upper - p_lower)` and the reported
//! band is `T(p_ref) ± |Δp ∂T/∂p|` with `Δp` the half-bracket. Tracked
//! outputs: the area-weighted mean exterior surface temperature of every
//! group, and every zone air temperature.

use crate::engine::{self, EndBc, ResultSet, SimulationConfig};
use crate::error::{Error, Result};
use crate::io::scene::{build_model, SceneDoc};
use crate::io::weather::WeatherSeries;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Which scene parameter the analysis perturbs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
#[clap(rename_all = "kebab-case")]
pub enum SensitivityParam {
    /// Short-wave reflectivity of all wall-kind groups.
    Albedo,
    /// Total thickness [m] of all single-layer wall-kind groups.
    WallThickness,
}

#[derive(Debug, Clone, Copy)]
pub struct SensitivitySpec {
    pub param: SensitivityParam,
    pub reference: f64,
    pub upper: f64,
    pub lower: f64,
}

impl SensitivitySpec {
    pub fn validate(&self) -> Result<()> {
        let lo = self.upper.min(self.lower);
        let hi = self.upper.max(self.lower);
        if !(lo < self.reference && self.reference < hi) {
            return Err(Error::InvalidArgument(format!(
                "sensitivity bracket must straddle the reference: {} not in ({lo}, {hi})",
                self.reference
            )));
        }
        Ok(())
    }
}

/// One tracked output with its band.
#[derive(Debug, Clone)]
pub struct SeriesBand {
    pub name: String,
    pub reference: Vec<f64>,
    pub derivative: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SensitivityBand {
    pub times: Vec<f64>,
    pub outputs: Vec<SeriesBand>,
}

/// Apply the parameter value to a copy of the scene document.
fn apply(doc: &SceneDoc, param: SensitivityParam, value: f64) -> Result<SceneDoc> {
    let mut out = doc.clone();
    let mut touched = 0;
    for g in &mut out.groups {
        if g.kind != crate::conduction::SlabKind::Wall {
            continue;
        }
        match param {
            SensitivityParam::Albedo => {
                g.albedo = value;
                touched += 1;
            }
            SensitivityParam::WallThickness => {
                if g.layers.len() == 1 {
                    g.layers[0].thickness = value;
                    touched += 1;
                }
            }
        }
    }
    if touched == 0 {
        return Err(Error::InvalidArgument(
            "the scene has no group the sensitivity parameter applies to".into(),
        ));
    }
    Ok(out)
}

/// Area-weighted mean front-face temperature per group, plus zone airs.
fn tracked_outputs(doc: &SceneDoc, origin: Option<&Path>, rs: &ResultSet) -> Vec<(String, Vec<f64>)> {
    let mut outputs = Vec::new();
    let model = build_model(doc, origin).expect("document ran already");
    for g in &doc.groups {
        let scene_exposed = matches!(
            model.units.iter().find(|u| u.group == g.name).map(|u| &u.end0),
            Some(EndBc::Scene { .. })
        );
        if !scene_exposed {
            continue;
        }
        let unit_idx: Vec<usize> = model
            .units
            .iter()
            .enumerate()
            .filter(|(_, u)| u.group == g.name)
            .map(|(i, _)| i)
            .collect();
        let total_area: f64 = unit_idx.iter().map(|&i| model.units[i].area).sum();
        let series: Vec<f64> = rs
            .t_front
            .iter()
            .map(|row| {
                unit_idx
                    .iter()
                    .map(|&i| model.units[i].area * row[i])
                    .sum::<f64>()
                    / total_area
            })
            .collect();
        outputs.push((format!("ts_front_mean:{}", g.name), series));
    }
    for (zi, z) in rs.zone_names.iter().enumerate() {
        outputs.push((
            format!("t_in:{z}"),
            rs.zone_t_in.iter().map(|row| row[zi]).collect(),
        ));
    }
    outputs
}

/// Run the bracket and assemble the band. `origin` is the scene file's
/// path, used to resolve a relative external mesh.
pub fn local_sensitivity(
    doc: &SceneDoc,
    origin: Option<&Path>,
    spec: SensitivitySpec,
    weather: &WeatherSeries,
    cfg: &SimulationConfig,
) -> Result<SensitivityBand> {
    spec.validate()?;
    let run_at = |value: f64| -> Result<ResultSet> {
        let perturbed = apply(doc, spec.param, value)?;
        let model = build_model(&perturbed, origin)?;
        engine::run(&model, weather, cfg.clone())
    };
    let rs_ref = run_at(spec.reference)?;
    let rs_up = run_at(spec.upper)?;
    let rs_lo = run_at(spec.lower)?;

    let base = tracked_outputs(doc, origin, &rs_ref);
    let up = tracked_outputs(doc, origin, &rs_up);
    let lo = tracked_outputs(doc, origin, &rs_lo);
    let dp = spec.upper - spec.lower;
    let half_bracket = 0.5 * (spec.upper - spec.lower).abs();

    let mut outputs = Vec::new();
    for ((name, reference), ((_, u), (_, l))) in base.into_iter().zip(up.into_iter().zip(lo)) {
        let derivative: Vec<f64> = u.iter().zip(&l).map(|(a, b)| (a - b) / dp).collect();
        let band: Vec<f64> = derivative.iter().map(|d| (half_bracket * d).abs()).collect();
        outputs.push(SeriesBand {
            lower: reference.iter().zip(&band).map(|(r, b)| r - b).collect(),
            upper: reference.iter().zip(&band).map(|(r, b)| r + b).collect(),
            name,
            reference,
            derivative,
        });
    }
    Ok(SensitivityBand {
        times: rs_ref.times.clone(),
        outputs,
    })
}

impl SensitivityBand {
    /// Write the band as one wide delimited table.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::ResultsFormat {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let err = |e: csv::Error| Error::ResultsFormat {
            path: path.to_path_buf(),
            message: e.to_string(),
        };
        let mut header = vec!["time_s".to_string()];
        for o in &self.outputs {
            for what in ["ref", "ddp", "lo", "hi"] {
                header.push(format!("{}:{}", what, o.name));
            }
        }
        w.write_record(&header).map_err(err)?;
        for (k, t) in self.times.iter().enumerate() {
            let mut row = vec![format!("{t}")];
            for o in &self.outputs {
                row.push(format!("{}", o.reference[k]));
                row.push(format!("{}", o.derivative[k]));
                row.push(format!("{}", o.lower[k]));
                row.push(format!("{}", o.upper[k]));
            }
            w.write_record(&row).map_err(err)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    /// Width of the band of one output at one recorded time.
    pub fn band_width(&self, output: &str, idx: usize) -> Option<f64> {
        let o = self.outputs.iter().find(|o| o.name == output)?;
        Some(o.upper[idx] - o.lower[idx])
    }
}
