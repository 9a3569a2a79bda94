//! Scene/weather/results files and the exterior film-coefficient
//! correlation.

pub mod results;
pub mod scene;
pub mod weather;

pub use results::{load_results, write_results, RunMetadata};
pub use scene::{load_scene, SceneDoc};
pub use weather::{load_weather, WeatherSeries};

use crate::error::{Error, Result};

/// Upper wind speed [m/s] for which the exterior film correlation holds.
pub const CORRELATION_MAX_WIND: f64 = 5.0;

/// Exterior film coefficient from wind speed: `h_out = 3.8 v + 5.0`
/// [W m^-2 K^-1]. Callers decide how to treat speeds beyond
/// [`CORRELATION_MAX_WIND`]; the engine logs a warning.
pub fn h_out_correlation(wind: f64) -> Result<f64> {
    if !(wind >= 0.0) || !wind.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "wind speed must be nonnegative, got {wind}"
        )));
    }
    Ok(3.8 * wind + 5.0)
}
