//! Error norms between a numerical and a reference space-time field.
//!
//! `eps2(t)` is the RMSE over space at each time, `eps2(x)` the RMSE over
//! time at each node, and the global error `eps_inf` is the maximum of
//! the `eps2(x)` profile.

use crate::error::{Error, Result};

/// Dense space-time field, row-major `[time][node]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeField {
    nt: usize,
    nx: usize,
    data: Vec<f64>,
}

impl SpaceTimeField {
    pub fn new(nt: usize, nx: usize) -> Self {
        SpaceTimeField {
            nt,
            nx,
            data: vec![0.0; nt * nx],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let nt = rows.len();
        let nx = rows.first().map_or(0, Vec::len);
        if nt == 0 || nx == 0 {
            return Err(Error::InvalidArgument("empty field".into()));
        }
        let mut data = Vec::with_capacity(nt * nx);
        for r in rows {
            if r.len() != nx {
                return Err(Error::InvalidArgument("ragged field rows".into()));
            }
            data.extend_from_slice(r);
        }
        Ok(SpaceTimeField { nt, nx, data })
    }

    pub fn nt(&self) -> usize {
        self.nt
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    #[inline]
    pub fn get(&self, t: usize, x: usize) -> f64 {
        self.data[t * self.nx + x]
    }

    pub fn set(&mut self, t: usize, x: usize, v: f64) {
        self.data[t * self.nx + x] = v;
    }
}

fn check_shapes(a: &SpaceTimeField, b: &SpaceTimeField) -> Result<()> {
    if a.nt != b.nt || a.nx != b.nx {
        return Err(Error::InvalidArgument(format!(
            "field shapes differ: {}x{} vs {}x{}",
            a.nt, a.nx, b.nt, b.nx
        )));
    }
    Ok(())
}

/// RMSE over space at each time index.
pub fn eps2_time(num: &SpaceTimeField, reference: &SpaceTimeField) -> Result<Vec<f64>> {
    check_shapes(num, reference)?;
    Ok((0..num.nt)
        .map(|t| {
            let ss: f64 = (0..num.nx)
                .map(|x| {
                    let d = num.get(t, x) - reference.get(t, x);
                    d * d
                })
                .sum();
            (ss / num.nx as f64).sqrt()
        })
        .collect())
}

/// RMSE over time at each node.
pub fn eps2_space(num: &SpaceTimeField, reference: &SpaceTimeField) -> Result<Vec<f64>> {
    check_shapes(num, reference)?;
    Ok((0..num.nx)
        .map(|x| {
            let ss: f64 = (0..num.nt)
                .map(|t| {
                    let d = num.get(t, x) - reference.get(t, x);
                    d * d
                })
                .sum();
            (ss / num.nt as f64).sqrt()
        })
        .collect())
}

/// Global error: the maximum of the `eps2(x)` profile.
pub fn eps_inf(num: &SpaceTimeField, reference: &SpaceTimeField) -> Result<f64> {
    Ok(eps2_space(num, reference)?
        .into_iter()
        .fold(0.0, f64::max))
}

/// The three norms bundled.
#[derive(Debug, Clone)]
pub struct ErrorReport {
    pub eps2_t: Vec<f64>,
    pub eps2_x: Vec<f64>,
    pub eps_inf: f64,
}

impl ErrorReport {
    pub fn compute(num: &SpaceTimeField, reference: &SpaceTimeField) -> Result<Self> {
        let eps2_t = eps2_time(num, reference)?;
        let eps2_x = eps2_space(num, reference)?;
        let eps_inf = eps2_x.iter().cloned().fold(0.0, f64::max);
        Ok(ErrorReport {
            eps2_t,
            eps2_x,
            eps_inf,
        })
    }
}

/// RMSE of two scalar series (used for zone air temperatures).
pub fn series_rmse(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::InvalidArgument("series length mismatch".into()));
    }
    let ss: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok((ss / a.len() as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn identical_fields_have_zero_error() {
        let f = SpaceTimeField::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let r = ErrorReport::compute(&f, &f).unwrap();
        assert_eq!(r.eps_inf, 0.0);
        assert!(r.eps2_t.iter().all(|&e| e == 0.0));
        assert!(r.eps2_x.iter().all(|&e| e == 0.0));
    }

    #[test]
    fn constant_offset_is_the_offset() {
        let a = SpaceTimeField::from_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        let mut b = a.clone();
        for t in 0..2 {
            for x in 0..3 {
                b.set(t, x, a.get(t, x) + 0.7);
            }
        }
        let r = ErrorReport::compute(&a, &b).unwrap();
        for e in r.eps2_t.iter().chain(&r.eps2_x) {
            assert_relative_eq!(*e, 0.7, max_relative = 1e-12);
        }
        assert_relative_eq!(r.eps_inf, 0.7, max_relative = 1e-12);
    }

    #[test]
    fn single_node_series() {
        // series (0, 3, 4) vs zeros: eps2 = sqrt(25/3)
        let num = SpaceTimeField::from_rows(&[vec![0.0], vec![3.0], vec![4.0]]).unwrap();
        let reference = SpaceTimeField::new(3, 1);
        let e = eps2_space(&num, &reference).unwrap();
        assert_relative_eq!(e[0], (25.0f64 / 3.0).sqrt(), max_relative = 1e-14);
        assert_relative_eq!(e[0], 2.887, epsilon = 1e-3);
        assert_relative_eq!(eps_inf(&num, &reference).unwrap(), e[0]);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let a = SpaceTimeField::new(2, 3);
        let b = SpaceTimeField::new(3, 2);
        assert!(eps2_time(&a, &b).is_err());
        assert!(SpaceTimeField::from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    proptest! {
        /// The metrics are norms of the difference on a fixed grid.
        #[test]
        fn norm_properties(
            vals in proptest::collection::vec(-50.0f64..50.0, 12),
            other in proptest::collection::vec(-50.0f64..50.0, 12),
            third in proptest::collection::vec(-50.0f64..50.0, 12),
        ) {
            let rows = |v: &[f64]| -> Vec<Vec<f64>> {
                v.chunks(3).map(|c| c.to_vec()).collect()
            };
            let a = SpaceTimeField::from_rows(&rows(&vals)).unwrap();
            let b = SpaceTimeField::from_rows(&rows(&other)).unwrap();
            let c = SpaceTimeField::from_rows(&rows(&third)).unwrap();
            let dab = eps_inf(&a, &b).unwrap();
            let dba = eps_inf(&b, &a).unwrap();
            prop_assert!(dab >= 0.0);
            prop_assert!((dab - dba).abs() < 1e-12);
            // zero iff identical
            if vals == other {
                prop_assert_eq!(dab, 0.0);
            } else {
                prop_assert!(dab > 0.0 || vals.iter().zip(&other).all(|(x, y)| x == y));
            }
            // triangle inequality per node profile, hence for the max
            let dac = eps_inf(&a, &c).unwrap();
            let dcb = eps_inf(&c, &b).unwrap();
            // eps_inf may pick different nodes; the per-node eps2 values obey
            // the triangle inequality, so the max obeys it up to picking
            let ab = eps2_space(&a, &b).unwrap();
            let ac = eps2_space(&a, &c).unwrap();
            let cb = eps2_space(&c, &b).unwrap();
            for i in 0..ab.len() {
                prop_assert!(ab[i] <= ac[i] + cb[i] + 1e-12);
            }
            prop_assert!(dab <= dac + dcb + 1e-12);
        }
    }
}
