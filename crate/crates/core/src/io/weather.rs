//! Weather time series: delimited text with a header row, columns by
//! name.
//!
//! Required columns: `time_s`, `t_out_c`, `wind_mps`. Sky input is either
//! `t_sky_c` or measured down-welling long-wave `lw_down_wm2` (exactly one
//! when the outdoor long-wave balance is enabled). Per-group incident
//! short-wave arrives as `q_sw:<group>` columns [W m^-2]; optional zone
//! source schedules as `q_v:<zone>` [W]. Values are linearly interpolated
//! between records.

use crate::error::{Error, Result};
use crate::{celsius_to_kelvin, kelvin_to_celsius};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq)]
enum SkyColumn {
    /// Sky temperature [K].
    TSky(Vec<f64>),
    /// Down-welling long-wave [W m^-2].
    LwDown(Vec<f64>),
}

/// A validated weather series.
#[derive(Debug, Clone, PartialEq)]
pub struct WeatherSeries {
    origin: PathBuf,
    times: Vec<f64>,
    /// Outdoor air temperature [K].
    t_out: Vec<f64>,
    /// Wind speed [m/s].
    wind: Vec<f64>,
    sky: Option<SkyColumn>,
    /// Incident short-wave by group [W m^-2].
    q_sw: BTreeMap<String, Vec<f64>>,
    /// Source schedules by zone [W].
    q_v: BTreeMap<String, Vec<f64>>,
}

/// Weather interpolated to one instant.
#[derive(Debug, Clone)]
pub struct WeatherSample<'a> {
    /// Outdoor air temperature [K].
    pub t_out: f64,
    /// Wind speed [m/s].
    pub wind: f64,
    /// Sky radiosity [W m^-2] when sky data is present.
    pub j_sky: Option<f64>,
    series: &'a WeatherSeries,
    w: (usize, usize, f64),
}

impl WeatherSample<'_> {
    /// Incident short-wave on a group [W m^-2].
    pub fn shortwave(&self, group: &str) -> Option<f64> {
        let col = self.series.q_sw.get(group)?;
        let (i, j, f) = self.w;
        Some(col[i] * (1.0 - f) + col[j] * f)
    }

    /// Zone heat source `q_v` [W]; zero when no schedule exists.
    pub fn zone_source(&self, zone: &str) -> f64 {
        match self.series.q_v.get(zone) {
            Some(col) => {
                let (i, j, f) = self.w;
                col[i] * (1.0 - f) + col[j] * f
            }
            None => 0.0,
        }
    }
}

impl WeatherSeries {
    /// Build a series programmatically (the loader wraps this).
    pub fn from_columns(
        origin: PathBuf,
        times: Vec<f64>,
        t_out_kelvin: Vec<f64>,
        wind: Vec<f64>,
        t_sky_kelvin: Option<Vec<f64>>,
        lw_down: Option<Vec<f64>>,
        q_sw: BTreeMap<String, Vec<f64>>,
        q_v: BTreeMap<String, Vec<f64>>,
    ) -> Result<Self> {
        let sky = match (t_sky_kelvin, lw_down) {
            (Some(_), Some(_)) => {
                return Err(Error::WeatherFormat {
                    path: origin,
                    message: "provide either t_sky_c or lw_down_wm2, not both".into(),
                })
            }
            (Some(t), None) => Some(SkyColumn::TSky(t)),
            (None, Some(l)) => Some(SkyColumn::LwDown(l)),
            (None, None) => None,
        };
        let s = WeatherSeries {
            origin,
            times,
            t_out: t_out_kelvin,
            wind,
            sky,
            q_sw,
            q_v,
        };
        s.validate()?;
        Ok(s)
    }

    fn validate(&self) -> Result<()> {
        let bad = |message: String| Error::WeatherFormat {
            path: self.origin.clone(),
            message,
        };
        if self.times.len() < 2 {
            return Err(bad("need at least two records".into()));
        }
        if self.times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(bad("timestamps must be strictly increasing".into()));
        }
        let n = self.times.len();
        let mut cols: Vec<(&str, &Vec<f64>)> = vec![("t_out_c", &self.t_out), ("wind_mps", &self.wind)];
        match &self.sky {
            Some(SkyColumn::TSky(c)) => cols.push(("t_sky_c", c)),
            Some(SkyColumn::LwDown(c)) => cols.push(("lw_down_wm2", c)),
            None => {}
        }
        for (name, col) in self.q_sw.iter().map(|(k, v)| (k.as_str(), v)) {
            if col.iter().any(|&x| x < 0.0) {
                return Err(bad(format!("short-wave column for group {name} has negative values")));
            }
        }
        for (name, col) in cols {
            if col.len() != n {
                return Err(bad(format!("column {name} has {} values for {} records", col.len(), n)));
            }
            if col.iter().any(|x| !x.is_finite()) {
                return Err(bad(format!("column {name} has non-finite values")));
            }
        }
        for col in self.q_sw.values().chain(self.q_v.values()) {
            if col.len() != n {
                return Err(bad("ragged auxiliary column".into()));
            }
            if col.iter().any(|x| !x.is_finite()) {
                return Err(bad("non-finite auxiliary value".into()));
            }
        }
        if self.wind.iter().any(|&v| v < 0.0) {
            return Err(bad("wind speed must be nonnegative".into()));
        }
        Ok(())
    }

    /// Fail unless the records cover `[0, horizon]`.
    pub fn check_coverage(&self, horizon: f64) -> Result<()> {
        let first = *self.times.first().unwrap();
        let last = *self.times.last().unwrap();
        if first > 1e-9 || last < horizon - 1e-9 {
            return Err(Error::WeatherFormat {
                path: self.origin.clone(),
                message: format!(
                    "records cover [{first}, {last}] s but the run needs [0, {horizon}] s"
                ),
            });
        }
        Ok(())
    }

    pub fn origin(&self) -> &Path {
        &self.origin
    }

    pub fn has_sky(&self) -> bool {
        self.sky.is_some()
    }

    pub fn has_shortwave(&self, group: &str) -> bool {
        self.q_sw.contains_key(group)
    }

    pub fn shortwave_groups(&self) -> impl Iterator<Item = &str> {
        self.q_sw.keys().map(|s| s.as_str())
    }

    pub fn zone_source_names(&self) -> impl Iterator<Item = &str> {
        self.q_v.keys().map(|s| s.as_str())
    }

    pub fn max_wind(&self) -> f64 {
        self.wind.iter().cloned().fold(0.0, f64::max)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Linear interpolation weights at `t`.
    fn weights(&self, t: f64) -> Result<(usize, usize, f64)> {
        let first = *self.times.first().unwrap();
        let last = *self.times.last().unwrap();
        if t < first - 1e-9 || t > last + 1e-9 {
            return Err(Error::WeatherFormat {
                path: self.origin.clone(),
                message: format!("sample time {t} outside record range [{first}, {last}]"),
            });
        }
        let t = t.clamp(first, last);
        let hi = self.times.partition_point(|&x| x < t).min(self.times.len() - 1);
        let lo = hi.saturating_sub(1);
        if hi == 0 {
            return Ok((0, 0, 0.0));
        }
        let span = self.times[hi] - self.times[lo];
        let f = if span > 0.0 { (t - self.times[lo]) / span } else { 0.0 };
        Ok((lo, hi, f))
    }

    /// Interpolate the series at `t`. Sky temperature is interpolated
    /// first, then converted to radiosity.
    pub fn sample(&self, t: f64) -> Result<WeatherSample<'_>> {
        let (i, j, f) = self.weights(t)?;
        let lerp = |col: &[f64]| col[i] * (1.0 - f) + col[j] * f;
        let j_sky = match &self.sky {
            Some(SkyColumn::TSky(c)) => Some(crate::longwave::sky_radiosity(lerp(c))?),
            Some(SkyColumn::LwDown(c)) => Some(lerp(c)),
            None => None,
        };
        Ok(WeatherSample {
            t_out: lerp(&self.t_out),
            wind: lerp(&self.wind),
            j_sky,
            series: self,
            w: (i, j, f),
        })
    }

    /// Write the series back to delimited text (round-trips with the
    /// loader).
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::WeatherFormat {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let mut header = vec!["time_s".to_string(), "t_out_c".into(), "wind_mps".into()];
        match &self.sky {
            Some(SkyColumn::TSky(_)) => header.push("t_sky_c".into()),
            Some(SkyColumn::LwDown(_)) => header.push("lw_down_wm2".into()),
            None => {}
        }
        for g in self.q_sw.keys() {
            header.push(format!("q_sw:{g}"));
        }
        for z in self.q_v.keys() {
            header.push(format!("q_v:{z}"));
        }
        let io_err = |e: csv::Error| Error::WeatherFormat {
            path: path.to_path_buf(),
            message: e.to_string(),
        };
        w.write_record(&header).map_err(io_err)?;
        for k in 0..self.times.len() {
            let mut row = vec![
                format!("{}", self.times[k]),
                format!("{}", kelvin_to_celsius(self.t_out[k])),
                format!("{}", self.wind[k]),
            ];
            match &self.sky {
                Some(SkyColumn::TSky(c)) => row.push(format!("{}", kelvin_to_celsius(c[k]))),
                Some(SkyColumn::LwDown(c)) => row.push(format!("{}", c[k])),
                None => {}
            }
            for col in self.q_sw.values() {
                row.push(format!("{}", col[k]));
            }
            for col in self.q_v.values() {
                row.push(format!("{}", col[k]));
            }
            w.write_record(&row).map_err(io_err)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

/// Load and validate a weather file for a run of `horizon` seconds at
/// step `dt`.
pub fn load_weather(path: &Path, dt: f64, horizon: f64) -> Result<WeatherSeries> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument("dt must be positive".into()));
    }
    let bad = |message: String| Error::WeatherFormat {
        path: path.to_path_buf(),
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| bad(e.to_string()))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| bad(e.to_string()))?
        .iter()
        .map(|s| s.to_string())
        .collect();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let time_i = col("time_s").ok_or_else(|| bad("missing time_s column".into()))?;
    let tout_i = col("t_out_c").ok_or_else(|| bad("missing t_out_c column".into()))?;
    let wind_i = col("wind_mps").ok_or_else(|| bad("missing wind_mps column".into()))?;
    let tsky_i = col("t_sky_c");
    let lw_i = col("lw_down_wm2");

    let mut times = Vec::new();
    let mut t_out = Vec::new();
    let mut wind = Vec::new();
    let mut t_sky: Option<Vec<f64>> = tsky_i.map(|_| Vec::new());
    let mut lw_down: Option<Vec<f64>> = lw_i.map(|_| Vec::new());
    let mut q_sw: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut q_v: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut aux: Vec<(usize, bool, String)> = Vec::new(); // (column, is_q_sw, key)
    for (idx, h) in headers.iter().enumerate() {
        if let Some(group) = h.strip_prefix("q_sw:") {
            q_sw.insert(group.to_string(), Vec::new());
            aux.push((idx, true, group.to_string()));
        } else if let Some(zone) = h.strip_prefix("q_v:") {
            q_v.insert(zone.to_string(), Vec::new());
            aux.push((idx, false, zone.to_string()));
        }
    }

    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| bad(e.to_string()))?;
        let parse = |i: usize| -> Result<f64> {
            record
                .get(i)
                .ok_or_else(|| bad(format!("record {} is short", line + 2)))?
                .parse::<f64>()
                .map_err(|e| bad(format!("record {}, column {}: {e}", line + 2, headers[i])))
        };
        times.push(parse(time_i)?);
        t_out.push(celsius_to_kelvin(parse(tout_i)?));
        wind.push(parse(wind_i)?);
        if let (Some(c), Some(i)) = (t_sky.as_mut(), tsky_i) {
            c.push(celsius_to_kelvin(parse(i)?));
        }
        if let (Some(c), Some(i)) = (lw_down.as_mut(), lw_i) {
            c.push(parse(i)?);
        }
        for (idx, is_sw, key) in &aux {
            let v = parse(*idx)?;
            if *is_sw {
                q_sw.get_mut(key).unwrap().push(v);
            } else {
                q_v.get_mut(key).unwrap().push(v);
            }
        }
    }

    let s = WeatherSeries::from_columns(
        path.to_path_buf(),
        times,
        t_out,
        wind,
        t_sky,
        lw_down,
        q_sw,
        q_v,
    )?;
    s.check_coverage(horizon)?;
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn write(content: &str) -> tempfile::NamedTempFile {
        use std::io::Write;
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_and_interpolates() {
        let f = write(
            "time_s,t_out_c,wind_mps,t_sky_c,q_sw:roof\n\
             0,20,1,5,0\n\
             3600,22,3,7,400\n\
             7200,24,1,9,800\n",
        );
        let w = load_weather(f.path(), 900.0, 7200.0).unwrap();
        // exact at records
        let s = w.sample(3600.0).unwrap();
        assert_relative_eq!(s.t_out, celsius_to_kelvin(22.0), max_relative = 1e-15);
        assert_relative_eq!(s.wind, 3.0);
        assert_relative_eq!(s.shortwave("roof").unwrap(), 400.0);
        // linear between: hourly records at dt = 900 s -> quarter points
        let s = w.sample(900.0).unwrap();
        assert_relative_eq!(s.t_out, celsius_to_kelvin(20.5), max_relative = 1e-12);
        assert_relative_eq!(s.shortwave("roof").unwrap(), 100.0, max_relative = 1e-12);
        let s = w.sample(1800.0).unwrap();
        assert_relative_eq!(s.shortwave("roof").unwrap(), 200.0, max_relative = 1e-12);
        // sky radiosity from interpolated temperature
        let s = w.sample(0.0).unwrap();
        let expected = crate::STEFAN_BOLTZMANN * celsius_to_kelvin(5.0).powi(4);
        assert_relative_eq!(s.j_sky.unwrap(), expected, max_relative = 1e-12);
        assert!(w.has_shortwave("roof"));
        assert!(!w.has_shortwave("wall"));
        assert_eq!(w.zone_source_names().count(), 0);
    }

    #[test]
    fn constant_weather_constant_interpolants() {
        let f = write("time_s,t_out_c,wind_mps\n0,20,2\n86400,20,2\n");
        let w = load_weather(f.path(), 900.0, 86400.0).unwrap();
        for t in [0.0, 123.0, 43200.0, 86400.0] {
            let s = w.sample(t).unwrap();
            assert_relative_eq!(s.t_out, celsius_to_kelvin(20.0), max_relative = 1e-15);
            assert_relative_eq!(s.wind, 2.0);
            assert!(s.j_sky.is_none());
        }
    }

    #[test]
    fn rejects_bad_files() {
        // non-monotonic timestamps
        let f = write("time_s,t_out_c,wind_mps\n0,20,2\n100,21,2\n100,22,2\n");
        assert!(load_weather(f.path(), 900.0, 100.0).is_err());
        // coverage gap
        let f = write("time_s,t_out_c,wind_mps\n0,20,2\n1000,21,2\n");
        assert!(load_weather(f.path(), 900.0, 2000.0).is_err());
        // negative wind
        let f = write("time_s,t_out_c,wind_mps\n0,20,-2\n1000,21,2\n");
        assert!(load_weather(f.path(), 900.0, 1000.0).is_err());
        // missing column
        let f = write("time_s,t_out_c\n0,20\n1000,21\n");
        assert!(load_weather(f.path(), 900.0, 1000.0).is_err());
        // both sky inputs
        let f = write("time_s,t_out_c,wind_mps,t_sky_c,lw_down_wm2\n0,20,1,5,300\n9,21,1,5,300\n");
        assert!(load_weather(f.path(), 900.0, 9.0).is_err());
        // negative shortwave
        let f = write("time_s,t_out_c,wind_mps,q_sw:a\n0,20,1,-3\n9,21,1,0\n");
        assert!(load_weather(f.path(), 900.0, 9.0).is_err());
    }

    #[test]
    fn csv_roundtrip() {
        let f = write(
            "time_s,t_out_c,wind_mps,lw_down_wm2,q_sw:roof,q_v:main\n\
             0,20,1,350,0,10\n\
             450,21.5,2.25,360,120.5,0\n\
             900,23,0.5,355,240,5\n",
        );
        let w = load_weather(f.path(), 450.0, 900.0).unwrap();
        let out = tempfile::NamedTempFile::new().unwrap();
        w.write_csv(out.path()).unwrap();
        let back = load_weather(out.path(), 450.0, 900.0).unwrap();
        for t in [0.0, 225.0, 450.0, 900.0] {
            let a = w.sample(t).unwrap();
            let b = back.sample(t).unwrap();
            assert_relative_eq!(a.t_out, b.t_out, epsilon = 1e-12);
            assert_relative_eq!(a.j_sky.unwrap(), b.j_sky.unwrap(), epsilon = 1e-12);
            assert_relative_eq!(
                a.shortwave("roof").unwrap(),
                b.shortwave("roof").unwrap(),
                epsilon = 1e-12
            );
            assert_relative_eq!(a.zone_source("main"), b.zone_source("main"), epsilon = 1e-12);
        }
    }
}
