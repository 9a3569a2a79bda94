//! Result persistence: one wide delimited-text table per run plus a
//! run-metadata document.
//!
//! `results.csv` holds one row per recorded step. Temperature columns are
//! Celsius, fluxes W m^-2. Column names carry the unit id or zone name
//! after a colon, so readers bind by name rather than position.

use crate::engine::{ConvergenceReport, ResultSet, SimulationConfig, StepStats};
use crate::error::{Error, Result};
use crate::{celsius_to_kelvin, kelvin_to_celsius};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Companion document written next to the results table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunMetadata {
    pub scene_name: String,
    pub scene_hash: String,
    pub weather_hash: String,
    pub config: SimulationConfig,
    pub eta: f64,
    pub max_outer_iters: u32,
    pub max_inner_iters: u32,
    pub max_bc_audit: f64,
    pub engine_version: String,
}

impl RunMetadata {
    pub fn new(
        scene_name: &str,
        scene_hash: &[u8; 32],
        weather_hash: &[u8; 32],
        config: &SimulationConfig,
        rs: &ResultSet,
    ) -> Self {
        let hex = |h: &[u8; 32]| h.iter().map(|b| format!("{b:02x}")).collect::<String>();
        RunMetadata {
            scene_name: scene_name.to_string(),
            scene_hash: hex(scene_hash),
            weather_hash: hex(weather_hash),
            config: config.clone(),
            eta: rs.convergence.eta,
            max_outer_iters: rs.convergence.max_outer_iters(),
            max_inner_iters: rs.convergence.max_inner_iters(),
            max_bc_audit: rs.convergence.max_bc_audit(),
            engine_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

const PER_UNIT: [&str; 7] = ["t_front_c", "t_back_c", "q_sw", "q_lw_out", "q_lw_in", "q_c", "h_out"];

/// Write `results.csv` (and `metadata.toml` when given) into `dir`.
pub fn write_results(rs: &ResultSet, dir: &Path, metadata: Option<&RunMetadata>) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let csv_path = dir.join("results.csv");
    let mut w = csv::Writer::from_path(&csv_path).map_err(|e| Error::ResultsFormat {
        path: csv_path.clone(),
        message: e.to_string(),
    })?;
    let err = |e: csv::Error| Error::ResultsFormat {
        path: csv_path.clone(),
        message: e.to_string(),
    };

    let mut header = vec![
        "time_s".to_string(),
        "outer_iters".into(),
        "inner_iters".into(),
        "bc_audit".into(),
    ];
    for z in &rs.zone_names {
        header.push(format!("t_in_c:{z}"));
    }
    for q in PER_UNIT {
        for id in &rs.unit_ids {
            header.push(format!("{q}:{id}"));
        }
    }
    w.write_record(&header).map_err(err)?;

    for (k, &t) in rs.times.iter().enumerate() {
        // recorded rows map onto step stats via the recording stride; row 0
        // is the initial state with no iterations behind it
        let stats = if k == 0 {
            None
        } else {
            let per = if rs.times.len() > 1 {
                ((rs.convergence.steps.len() as f64) / (rs.times.len() - 1) as f64).round() as usize
            } else {
                1
            };
            rs.convergence.steps.get(k * per.max(1) - 1)
        };
        let mut row = vec![
            format!("{t}"),
            format!("{}", stats.map_or(0, |s| s.outer_iters)),
            format!("{}", stats.map_or(0, |s| s.inner_iters_max)),
            format!("{}", stats.map_or(0.0, |s| s.bc_audit_max)),
        ];
        for zi in 0..rs.zone_names.len() {
            row.push(format!("{}", kelvin_to_celsius(rs.zone_t_in[k][zi])));
        }
        let tables = [
            &rs.t_front,
            &rs.t_back,
            &rs.q_sw,
            &rs.q_lw_out,
            &rs.q_lw_in,
            &rs.q_c,
            &rs.h_out,
        ];
        for (qi, table) in tables.iter().enumerate() {
            let celsius = qi < 2;
            for ui in 0..rs.unit_ids.len() {
                let v = table[k][ui];
                row.push(format!("{}", if celsius { kelvin_to_celsius(v) } else { v }));
            }
        }
        w.write_record(&row).map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(&csv_path, e))?;

    if let Some(meta) = metadata {
        let text = toml::to_string_pretty(meta).map_err(|e| Error::ResultsFormat {
            path: dir.join("metadata.toml"),
            message: e.to_string(),
        })?;
        std::fs::write(dir.join("metadata.toml"), text)
            .map_err(|e| Error::io(dir.join("metadata.toml"), e))?;
    }
    Ok(())
}

/// Read a results directory back. The convergence report is rebuilt from
/// the per-row statistics columns (residual histories are not persisted).
pub fn load_results(dir: &Path) -> Result<(ResultSet, Option<RunMetadata>)> {
    let csv_path = dir.join("results.csv");
    let bad = |message: String| Error::ResultsFormat {
        path: csv_path.clone(),
        message,
    };
    let mut reader = csv::Reader::from_path(&csv_path).map_err(|e| bad(e.to_string()))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| bad(e.to_string()))?
        .iter()
        .map(|s| s.to_string())
        .collect();

    let mut zone_names = Vec::new();
    let mut unit_ids = Vec::new();
    for h in &headers {
        if let Some(z) = h.strip_prefix("t_in_c:") {
            zone_names.push(z.to_string());
        }
        if let Some(u) = h.strip_prefix("t_front_c:") {
            unit_ids.push(u.to_string());
        }
    }
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| bad(format!("missing column {name}")))
    };

    let nu = unit_ids.len();
    let nz = zone_names.len();
    let mut rs = ResultSet {
        unit_ids: unit_ids.clone(),
        zone_names: zone_names.clone(),
        ..Default::default()
    };
    let time_i = col("time_s")?;
    let outer_i = col("outer_iters")?;
    let inner_i = col("inner_iters")?;
    let audit_i = col("bc_audit")?;
    let zone_cols: Vec<usize> = zone_names
        .iter()
        .map(|z| col(&format!("t_in_c:{z}")))
        .collect::<Result<_>>()?;
    let mut unit_cols = Vec::new();
    for q in PER_UNIT {
        let cols: Vec<usize> = unit_ids
            .iter()
            .map(|u| col(&format!("{q}:{u}")))
            .collect::<Result<_>>()?;
        unit_cols.push(cols);
    }

    for record in reader.records() {
        let record = record.map_err(|e| bad(e.to_string()))?;
        let get = |i: usize| -> Result<f64> {
            record
                .get(i)
                .ok_or_else(|| bad("short record".into()))?
                .parse::<f64>()
                .map_err(|e| bad(e.to_string()))
        };
        rs.times.push(get(time_i)?);
        let mut zrow = Vec::with_capacity(nz);
        for &c in &zone_cols {
            zrow.push(celsius_to_kelvin(get(c)?));
        }
        rs.zone_t_in.push(zrow);
        let tables: [&mut Vec<Vec<f64>>; 7] = [
            &mut rs.t_front,
            &mut rs.t_back,
            &mut rs.q_sw,
            &mut rs.q_lw_out,
            &mut rs.q_lw_in,
            &mut rs.q_c,
            &mut rs.h_out,
        ];
        for (qi, table) in tables.into_iter().enumerate() {
            let celsius = qi < 2;
            let mut row = Vec::with_capacity(nu);
            for &c in &unit_cols[qi] {
                let v = get(c)?;
                row.push(if celsius { celsius_to_kelvin(v) } else { v });
            }
            table.push(row);
        }
        if rs.times.len() > 1 {
            rs.convergence.steps.push(StepStats {
                outer_iters: get(outer_i)? as u32,
                inner_iters_max: get(inner_i)? as u32,
                final_residual: 0.0,
                residual_history: Vec::new(),
                bc_audit_max: get(audit_i)?,
            });
        }
    }
    if rs.times.is_empty() {
        return Err(bad("no data rows".into()));
    }

    let meta_path = dir.join("metadata.toml");
    let metadata = if meta_path.exists() {
        let text = std::fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
        let meta: RunMetadata = toml::from_str(&text).map_err(|e| Error::ResultsFormat {
            path: meta_path,
            message: e.to_string(),
        })?;
        rs.convergence.eta = meta.eta;
        Some(meta)
    } else {
        None
    };
    let _ = ConvergenceReport::default();
    Ok((rs, metadata))
}
