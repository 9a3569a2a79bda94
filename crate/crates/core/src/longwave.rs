//! Long-wave radiative exchange by the radiosity method.
//!
//! For an enclosure with view factor matrix `F` and emissivities `ε`, the
//! radiosity vector solves
//!
//! `J_i - (1 - ε_i) Σ_j F_ij J_j - (1 - ε_i) F_i,sky J_sky = ε_i σ T_i^4`
//!
//! (the sky term only for the outdoor scene). Irradiation is
//! `H_i = Σ_j F_ij J_j + F_i,sky J_sky` and the net flux `q_i = J_i - H_i`
//! is positive when the surface loses energy; conduction boundary
//! conditions consume `-q_i` as net radiative gain.
//!
//! The system matrix depends only on geometry and emissivity, so its LU
//! factorization is computed once and reused every solve. A single
//! reflection bounce is available as an alternative closure for
//! comparison runs.

use crate::error::{Error, Result};
use crate::geometry::{EnclosureKind, ViewFactorMatrix};
use crate::STEFAN_BOLTZMANN;
use nalgebra::{DMatrix, DVector};

/// How reflections are closed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReflectionModel {
    /// Full linear radiosity system (all reflection orders).
    #[default]
    Full,
    /// One reflection bounce of the emitted field.
    SingleReflection,
}

/// Inputs of one radiosity solve.
#[derive(Debug, Clone)]
pub struct RadiosityProblem<'a> {
    pub view_factors: &'a ViewFactorMatrix,
    pub emissivity: &'a [f64],
    /// Surface temperatures [K].
    pub surface_temps: &'a [f64],
    /// Sky radiosity [W m^-2]; present only for the outdoor enclosure.
    pub sky_radiosity: Option<f64>,
}

/// Per-patch radiosity, irradiation and net long-wave flux.
#[derive(Debug, Clone)]
pub struct RadiositySolution {
    /// Radiosity `J` [W m^-2].
    pub radiosity: Vec<f64>,
    /// Irradiation `H` [W m^-2].
    pub irradiation: Vec<f64>,
    /// Net flux `q = J - H` [W m^-2], positive = surface loses energy.
    pub net_flux: Vec<f64>,
}

/// Sky radiosity from an effective sky temperature: `σ T_sky^4`.
pub fn sky_radiosity(t_sky: f64) -> Result<f64> {
    if !(t_sky >= 0.0) || !t_sky.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "sky temperature must be nonnegative, got {t_sky}"
        )));
    }
    Ok(STEFAN_BOLTZMANN * t_sky.powi(4))
}

/// Effective sky temperature from measured down-welling long-wave flux.
pub fn sky_temperature_from_flux(lw_down: f64) -> Result<f64> {
    if !(lw_down >= 0.0) || !lw_down.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "down-welling long-wave flux must be nonnegative, got {lw_down}"
        )));
    }
    Ok((lw_down / STEFAN_BOLTZMANN).powf(0.25))
}

/// A radiosity solver with its cached factorization.
pub struct RadiositySolver {
    n: usize,
    emissivity: Vec<f64>,
    f: DMatrix<f64>,
    f_sky: Vec<f64>,
    lu: Option<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>>,
    model: ReflectionModel,
    has_sky: bool,
}

impl RadiositySolver {
    pub fn new(
        view_factors: &ViewFactorMatrix,
        emissivity: &[f64],
        model: ReflectionModel,
    ) -> Result<Self> {
        let n = view_factors.len();
        if emissivity.len() != n {
            return Err(Error::Radiosity(format!(
                "{} emissivities for {} patches",
                emissivity.len(),
                n
            )));
        }
        if emissivity.iter().any(|&e| !(e > 0.0 && e <= 1.0)) {
            return Err(Error::Radiosity("emissivities must lie in (0, 1]".into()));
        }
        let has_sky = view_factors.kind() == EnclosureKind::ExteriorWithSky;
        let f = DMatrix::from_fn(n, n, |i, j| view_factors.get(i, j));
        let f_sky: Vec<f64> = (0..n).map(|i| view_factors.sky(i)).collect();
        let lu = match model {
            ReflectionModel::Full => {
                let mut m = DMatrix::zeros(n, n);
                for i in 0..n {
                    for j in 0..n {
                        let delta = if i == j { 1.0 } else { 0.0 };
                        m[(i, j)] = delta - (1.0 - emissivity[i]) * f[(i, j)];
                    }
                }
                Some(m.lu())
            }
            ReflectionModel::SingleReflection => None,
        };
        Ok(RadiositySolver {
            n,
            emissivity: emissivity.to_vec(),
            f,
            f_sky,
            lu,
            model,
            has_sky,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Solve for the given surface temperatures (and sky radiosity for the
    /// outdoor enclosure).
    pub fn solve(&self, surface_temps: &[f64], sky: Option<f64>) -> Result<RadiositySolution> {
        if surface_temps.len() != self.n {
            return Err(Error::Radiosity(format!(
                "{} temperatures for {} patches",
                surface_temps.len(),
                self.n
            )));
        }
        if surface_temps.iter().any(|&t| !(t > 0.0) || !t.is_finite()) {
            return Err(Error::Radiosity(
                "surface temperatures must be positive and finite".into(),
            ));
        }
        if self.has_sky != sky.is_some() {
            return Err(Error::Radiosity(
                "sky radiosity must be supplied exactly when the enclosure sees the sky".into(),
            ));
        }
        let j_sky = sky.unwrap_or(0.0);

        let emitted: Vec<f64> = surface_temps
            .iter()
            .zip(&self.emissivity)
            .map(|(&t, &e)| e * STEFAN_BOLTZMANN * t.powi(4))
            .collect();

        let radiosity: Vec<f64> = match self.model {
            ReflectionModel::Full => {
                let mut rhs = DVector::from_column_slice(&emitted);
                for i in 0..self.n {
                    rhs[i] += (1.0 - self.emissivity[i]) * self.f_sky[i] * j_sky;
                }
                let solved = self
                    .lu
                    .as_ref()
                    .expect("full model caches an LU factorization")
                    .solve(&rhs)
                    .ok_or_else(|| Error::Radiosity("singular radiosity system".into()))?;
                solved.iter().copied().collect()
            }
            ReflectionModel::SingleReflection => {
                // one bounce: reflect the irradiation of the emitted field
                (0..self.n)
                    .map(|i| {
                        let h0: f64 = (0..self.n).map(|j| self.f[(i, j)] * emitted[j]).sum::<f64>()
                            + self.f_sky[i] * j_sky;
                        emitted[i] + (1.0 - self.emissivity[i]) * h0
                    })
                    .collect()
            }
        };

        let irradiation: Vec<f64> = (0..self.n)
            .map(|i| {
                (0..self.n).map(|j| self.f[(i, j)] * radiosity[j]).sum::<f64>()
                    + self.f_sky[i] * j_sky
            })
            .collect();
        let net_flux = radiosity
            .iter()
            .zip(&irradiation)
            .map(|(j, h)| j - h)
            .collect();
        Ok(RadiositySolution {
            radiosity,
            irradiation,
            net_flux,
        })
    }
}

/// Closed-enclosure solve (no sky). Rows of `F` must sum to one.
pub fn solve_inside(p: &RadiosityProblem) -> Result<RadiositySolution> {
    if p.sky_radiosity.is_some() || p.view_factors.kind() != EnclosureKind::ClosedInterior {
        return Err(Error::Radiosity(
            "inside solve expects a closed enclosure without sky".into(),
        ));
    }
    for i in 0..p.view_factors.len() {
        if (p.view_factors.row_sum(i) - 1.0).abs() > 1e-6 {
            return Err(Error::Radiosity(format!(
                "closed enclosure row {i} sums to {}",
                p.view_factors.row_sum(i)
            )));
        }
    }
    RadiositySolver::new(p.view_factors, p.emissivity, ReflectionModel::Full)?
        .solve(p.surface_temps, None)
}

/// Outdoor-scene solve with the sky term.
pub fn solve_outside(p: &RadiosityProblem) -> Result<RadiositySolution> {
    let Some(j_sky) = p.sky_radiosity else {
        return Err(Error::Radiosity("outside solve requires a sky radiosity".into()));
    };
    if p.view_factors.kind() != EnclosureKind::ExteriorWithSky {
        return Err(Error::Radiosity(
            "outside solve expects an exterior enclosure".into(),
        ));
    }
    RadiositySolver::new(p.view_factors, p.emissivity, ReflectionModel::Full)?
        .solve(p.surface_temps, Some(j_sky))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::EnclosureKind;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    /// Two-patch closed enclosure with F12 = F21 = 1, equal areas.
    fn two_surface_matrix() -> ViewFactorMatrix {
        ViewFactorMatrix::from_raw(
            EnclosureKind::ClosedInterior,
            vec![0.0, 1.0, 1.0, 0.0],
            vec![0.0, 0.0],
            vec![1.0, 1.0],
        )
        .unwrap()
    }

    /// Closed cube as 6 faces with exact F = 0.2 off-diagonal.
    fn cube_matrix() -> ViewFactorMatrix {
        let n = 6;
        let mut f = vec![0.2; n * n];
        for i in 0..n {
            f[i * n + i] = 0.0;
        }
        ViewFactorMatrix::from_raw(EnclosureKind::ClosedInterior, f, vec![0.0; n], vec![1.0; n])
            .unwrap()
    }

    fn lone_sky_patch() -> ViewFactorMatrix {
        ViewFactorMatrix::from_raw(EnclosureKind::ExteriorWithSky, vec![0.0], vec![1.0], vec![1.0])
            .unwrap()
    }

    #[test]
    fn sky_radiosity_values() {
        assert_eq!(sky_radiosity(0.0).unwrap(), 0.0);
        assert_relative_eq!(sky_radiosity(300.0).unwrap(), 459.27, epsilon = 0.01);
        assert!(sky_radiosity(250.0).unwrap() < sky_radiosity(251.0).unwrap());
        assert!(sky_radiosity(-1.0).is_err());
        let t = sky_temperature_from_flux(459.27).unwrap();
        assert_relative_eq!(t, 300.0, epsilon = 1e-3);
    }

    #[test]
    fn blackbody_surfaces_emit_planck_flux() {
        let vf = cube_matrix();
        let eps = vec![1.0; 6];
        let temps = vec![290.0, 300.0, 310.0, 280.0, 305.0, 295.0];
        let p = RadiosityProblem {
            view_factors: &vf,
            emissivity: &eps,
            surface_temps: &temps,
            sky_radiosity: None,
        };
        let sol = solve_inside(&p).unwrap();
        for (j, t) in sol.radiosity.iter().zip(&temps) {
            assert_relative_eq!(*j, STEFAN_BOLTZMANN * t.powi(4), max_relative = 1e-12);
        }
    }

    #[test]
    fn isothermal_enclosure_has_zero_net_flux() {
        let vf = cube_matrix();
        let eps = vec![0.9, 0.7, 0.4, 1.0, 0.85, 0.6];
        let temps = vec![300.0; 6];
        let sol = solve_inside(&RadiosityProblem {
            view_factors: &vf,
            emissivity: &eps,
            surface_temps: &temps,
            sky_radiosity: None,
        })
        .unwrap();
        let sigma_t4 = STEFAN_BOLTZMANN * 300.0f64.powi(4);
        for q in &sol.net_flux {
            assert!(q.abs() <= 1e-9 * sigma_t4, "q = {q}");
        }
    }

    #[test]
    fn two_surface_closed_form() {
        let vf = two_surface_matrix();
        let eps = vec![0.9, 0.9];
        let temps = vec![300.0, 280.0];
        let sol = solve_inside(&RadiosityProblem {
            view_factors: &vf,
            emissivity: &eps,
            surface_temps: &temps,
            sky_radiosity: None,
        })
        .unwrap();
        let exact = STEFAN_BOLTZMANN * (300.0f64.powi(4) - 280.0f64.powi(4))
            / (1.0 / 0.9 + 1.0 / 0.9 - 1.0);
        assert_relative_eq!(sol.net_flux[0], exact, max_relative = 1e-6);
        assert_relative_eq!(sol.net_flux[0], 90.6, epsilon = 0.1);
        assert_relative_eq!(sol.net_flux[1], -exact, max_relative = 1e-6);
    }

    #[test]
    fn conservation_in_closed_enclosure() {
        let vf = cube_matrix();
        let eps = vec![0.9, 0.8, 0.95, 0.85, 0.9, 0.75];
        let temps = vec![295.0, 301.0, 288.0, 310.0, 299.0, 292.5];
        let sol = solve_inside(&RadiosityProblem {
            view_factors: &vf,
            emissivity: &eps,
            surface_temps: &temps,
            sky_radiosity: None,
        })
        .unwrap();
        let total: f64 = sol.net_flux.iter().sum(); // unit areas
        let scale: f64 = sol.net_flux.iter().map(|q| q.abs()).sum();
        assert!(total.abs() <= 1e-9 * scale.max(1.0), "sum = {total}");
    }

    #[test]
    fn lone_patch_exchanges_with_sky_only() {
        let vf = lone_sky_patch();
        let eps = vec![1.0];
        let t_s = 295.0;
        let j_sky = sky_radiosity(270.0).unwrap();
        let sol = solve_outside(&RadiosityProblem {
            view_factors: &vf,
            emissivity: &eps,
            surface_temps: &[t_s],
            sky_radiosity: Some(j_sky),
        })
        .unwrap();
        let expected = STEFAN_BOLTZMANN * t_s.powi(4) - j_sky;
        assert_relative_eq!(sol.net_flux[0], expected, max_relative = 1e-12);

        // radiative equilibrium: sigma T^4 = J_sky -> q = 0
        let t_eq = (j_sky / STEFAN_BOLTZMANN).powf(0.25);
        let sol = solve_outside(&RadiosityProblem {
            view_factors: &vf,
            emissivity: &eps,
            surface_temps: &[t_eq],
            sky_radiosity: Some(j_sky),
        })
        .unwrap();
        assert!(sol.net_flux[0].abs() < 1e-9);
    }

    /// Successive-reflection iteration as the independent oracle for the
    /// linear-system solution.
    fn reflection_fixed_point(
        vf: &ViewFactorMatrix,
        eps: &[f64],
        temps: &[f64],
        j_sky: f64,
    ) -> Vec<f64> {
        let n = vf.len();
        let mut j: Vec<f64> = temps
            .iter()
            .zip(eps)
            .map(|(&t, &e)| e * STEFAN_BOLTZMANN * t.powi(4))
            .collect();
        for _ in 0..10_000 {
            let mut next = vec![0.0; n];
            let mut delta = 0.0f64;
            for i in 0..n {
                let h: f64 = (0..n).map(|k| vf.get(i, k) * j[k]).sum::<f64>() + vf.sky(i) * j_sky;
                next[i] = eps[i] * STEFAN_BOLTZMANN * temps[i].powi(4) + (1.0 - eps[i]) * h;
                delta = delta.max((next[i] - j[i]).abs());
            }
            j = next;
            if delta < 1e-13 {
                break;
            }
        }
        j
    }

    #[test]
    fn canyon_with_sky_matches_reflection_series() {
        // two facing walls, each seeing the other half the time, rest sky
        let vf = ViewFactorMatrix::from_raw(
            EnclosureKind::ExteriorWithSky,
            vec![0.0, 0.5, 0.5, 0.0],
            vec![0.5, 0.5],
            vec![10.0, 10.0],
        )
        .unwrap();
        let eps = vec![0.9, 0.9];
        let temps = vec![305.0, 287.0];
        let j_sky = sky_radiosity(265.0).unwrap();
        let sol = solve_outside(&RadiosityProblem {
            view_factors: &vf,
            emissivity: &eps,
            surface_temps: &temps,
            sky_radiosity: Some(j_sky),
        })
        .unwrap();
        let oracle = reflection_fixed_point(&vf, &eps, &temps, j_sky);
        for (a, b) in sol.radiosity.iter().zip(&oracle) {
            assert_relative_eq!(a, b, max_relative = 1e-10);
        }
    }

    #[test]
    fn single_reflection_mode_differs_and_is_one_bounce() {
        let vf = two_surface_matrix();
        let eps = vec![0.5, 0.5];
        let temps = vec![320.0, 280.0];
        let full = RadiositySolver::new(&vf, &eps, ReflectionModel::Full).unwrap();
        let single = RadiositySolver::new(&vf, &eps, ReflectionModel::SingleReflection).unwrap();
        let jf = full.solve(&temps, None).unwrap();
        let js = single.solve(&temps, None).unwrap();
        // one bounce by hand
        let e: Vec<f64> = temps
            .iter()
            .zip(&eps)
            .map(|(&t, &e)| e * STEFAN_BOLTZMANN * t.powi(4))
            .collect();
        assert_relative_eq!(js.radiosity[0], e[0] + 0.5 * e[1], max_relative = 1e-12);
        assert!((jf.radiosity[0] - js.radiosity[0]).abs() > 1.0);
    }

    #[test]
    fn input_validation() {
        let vf = two_surface_matrix();
        assert!(RadiositySolver::new(&vf, &[0.9], ReflectionModel::Full).is_err());
        assert!(RadiositySolver::new(&vf, &[0.0, 0.9], ReflectionModel::Full).is_err());
        let solver = RadiositySolver::new(&vf, &[0.9, 0.9], ReflectionModel::Full).unwrap();
        assert!(solver.solve(&[300.0, -5.0], None).is_err());
        assert!(solver.solve(&[300.0, 280.0], Some(400.0)).is_err());
        // open rows rejected by solve_inside
        let open = ViewFactorMatrix::from_raw(
            EnclosureKind::ClosedInterior,
            vec![0.0, 0.4, 0.4, 0.0],
            vec![0.0, 0.0],
            vec![1.0, 1.0],
        )
        .unwrap();
        let eps = [0.9, 0.9];
        let temps = [300.0, 280.0];
        assert!(solve_inside(&RadiosityProblem {
            view_factors: &open,
            emissivity: &eps,
            surface_temps: &temps,
            sky_radiosity: None,
        })
        .is_err());
    }

    proptest! {
        #[test]
        fn raising_a_temperature_does_not_decrease_its_net_flux(
            t1 in 270.0f64..330.0,
            t2 in 270.0f64..330.0,
            bump in 0.1f64..20.0,
            e1 in 0.05f64..1.0,
            e2 in 0.05f64..1.0,
        ) {
            let vf = two_surface_matrix();
            let eps = vec![e1, e2];
            let solver = RadiositySolver::new(&vf, &eps, ReflectionModel::Full).unwrap();
            let q_before = solver.solve(&[t1, t2], None).unwrap().net_flux[0];
            let q_after = solver.solve(&[t1 + bump, t2], None).unwrap().net_flux[0];
            prop_assert!(q_after >= q_before - 1e-9);
        }

        #[test]
        fn linear_solve_equals_reflection_limit(
            t1 in 275.0f64..325.0,
            t2 in 275.0f64..325.0,
            t3 in 275.0f64..325.0,
            e in 0.2f64..1.0,
        ) {
            // triangle enclosure, symmetric exact view factors
            let vf = ViewFactorMatrix::from_raw(
                EnclosureKind::ClosedInterior,
                vec![0.0, 0.5, 0.5, 0.5, 0.0, 0.5, 0.5, 0.5, 0.0],
                vec![0.0; 3],
                vec![1.0; 3],
            ).unwrap();
            let eps = vec![e, 0.9, 0.6];
            let temps = vec![t1, t2, t3];
            let solver = RadiositySolver::new(&vf, &eps, ReflectionModel::Full).unwrap();
            let sol = solver.solve(&temps, None).unwrap();
            let oracle = reflection_fixed_point(&vf, &eps, &temps, 0.0);
            for (a, b) in sol.radiosity.iter().zip(&oracle) {
                prop_assert!((a - b).abs() <= 1e-8 * b.abs().max(1.0));
            }
        }
    }
}
