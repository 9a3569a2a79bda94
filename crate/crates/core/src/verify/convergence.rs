//! Convergence-order estimation on the verification case.
//!
//! Temporal sweep at a fine fixed grid, spatial sweep at a fine fixed
//! step, and a coarse-grid sweep that exhibits the error plateau once the
//! spatial error dominates. Order fits are least-squares log-log slopes
//! over the three finest points of each sweep, which keeps
//! pre-asymptotic points out of the fit.

use crate::error::{Error, Result};
use crate::verify::oracle::FineSolution;
use crate::verify::theoretical::{verification_errors, TheoreticalCase};

/// One sweep sample: resolution (dt [s] or dx [m]) and its errors.
#[derive(Debug, Clone, Copy)]
pub struct SweepPoint {
    pub resolution: f64,
    pub eps_inf_wall: f64,
    pub air_rmse: f64,
}

#[derive(Debug, Clone)]
pub struct ConvergenceTables {
    pub temporal: Vec<SweepPoint>,
    pub spatial: Vec<SweepPoint>,
    /// Coarse grid (few nodes) across shrinking dt: flattens once the
    /// spatial error dominates.
    pub plateau: Vec<SweepPoint>,
    pub temporal_slope: f64,
    pub spatial_slope: f64,
}

impl ConvergenceTables {
    /// Ratio of the plateau sweep's two finest errors; near 1 means flat.
    pub fn plateau_ratio(&self) -> f64 {
        let n = self.plateau.len();
        self.plateau[n - 1].eps_inf_wall / self.plateau[n - 2].eps_inf_wall
    }
}

/// Least-squares slope of `ln(err)` vs `ln(resolution)` over the finest
/// `take` points (the sweep must be ordered coarse to fine).
fn fitted_slope(points: &[SweepPoint], take: usize) -> f64 {
    let pts = &points[points.len() - take..];
    let n = pts.len() as f64;
    let xs: Vec<f64> = pts.iter().map(|p| p.resolution.ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.eps_inf_wall.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

fn check_monotone(points: &[SweepPoint], label: &str) {
    if points
        .windows(2)
        .any(|w| w[1].eps_inf_wall > w[0].eps_inf_wall)
    {
        log::warn!("{label} sweep error sequence is not monotone; fitting the slope anyway");
    }
}

/// The resolutions of the three sweeps.
pub const TEMPORAL_DTS: [f64; 5] = [3600.0, 1800.0, 900.0, 450.0, 225.0];
pub const SPATIAL_NODES: [usize; 4] = [6, 11, 21, 41];
pub const SPATIAL_DT: f64 = 1.0;
pub const PLATEAU_NODES: usize = 6;
pub const PLATEAU_DTS: [f64; 6] = [3600.0, 1800.0, 900.0, 450.0, 225.0, 100.0];

/// Run the three sweeps against one fine reference and fit the orders.
pub fn convergence_orders(
    case: &TheoreticalCase,
    reference: &FineSolution,
) -> Result<ConvergenceTables> {
    let point = |dt: f64, nodes: usize, resolution: f64| -> Result<SweepPoint> {
        let rs = case.run_model(dt, nodes)?;
        let errs = verification_errors(&rs, reference)?;
        Ok(SweepPoint {
            resolution,
            eps_inf_wall: errs.report.eps_inf,
            air_rmse: errs.air_rmse,
        })
    };

    if TEMPORAL_DTS.len() < 4 || SPATIAL_NODES.len() < 4 {
        return Err(Error::InvalidArgument(
            "order estimation needs at least 4 resolutions per axis".into(),
        ));
    }

    let mut temporal = Vec::new();
    for &dt in &TEMPORAL_DTS {
        temporal.push(point(dt, 101, dt)?);
    }
    check_monotone(&temporal, "temporal");

    let mut spatial = Vec::new();
    for &nodes in &SPATIAL_NODES {
        let dx = case.wall_thickness / (nodes - 1) as f64;
        spatial.push(point(SPATIAL_DT, nodes, dx)?);
    }
    check_monotone(&spatial, "spatial");

    let mut plateau = Vec::new();
    for &dt in &PLATEAU_DTS {
        plateau.push(point(dt, PLATEAU_NODES, dt)?);
    }

    Ok(ConvergenceTables {
        temporal_slope: fitted_slope(&temporal, 3),
        spatial_slope: fitted_slope(&spatial, 3),
        temporal,
        spatial,
        plateau,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_fit_recovers_exact_powers() {
        let pts: Vec<SweepPoint> = [4.0, 2.0, 1.0, 0.5]
            .iter()
            .map(|&r: &f64| SweepPoint {
                resolution: r,
                eps_inf_wall: 0.37 * r.powi(2),
                air_rmse: 0.0,
            })
            .collect();
        assert!((fitted_slope(&pts, 3) - 2.0).abs() < 1e-12);
        let pts: Vec<SweepPoint> = [4.0, 2.0, 1.0, 0.5]
            .iter()
            .map(|&r: &f64| SweepPoint {
                resolution: r,
                eps_inf_wall: 1.7 * r,
                air_rmse: 0.0,
            })
            .collect();
        assert!((fitted_slope(&pts, 3) - 1.0).abs() < 1e-12);
    }
}
