//! Transient 1D heat conduction through multilayer slabs.
//!
//! Each wall or soil column is a uniform grid of `N_x` nodes spanning the
//! full thickness. The heat equation is advanced by implicit Euler in the
//! dimensionless variables `T* = (T - T_0)/T_0`, `x* = x/L`,
//! `t* = t/t_ref` with `t_ref = c_0 L^2 / k_0` (so the Fourier number is
//! one by construction). Boundary rows come from half-cell energy balances,
//! equivalent to a ghost-node closure and second-order accurate, with
//! convective + net-radiative forcing on exposed faces and a Dirichlet deep
//! condition for soil columns.
//!
//! Face conductivities are resistance-exact for piecewise-constant layers:
//! `k_face = dx / integral dx/k(x)` over the segment, so the discrete
//! steady state reproduces the analytic piecewise-linear profile at the
//! nodes to round-off.

use crate::error::{Error, Result};

/// One homogeneous material layer of a slab.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MaterialLayer {
    /// Thickness [m].
    pub thickness: f64,
    /// Thermal conductivity [W m^-1 K^-1].
    pub conductivity: f64,
    /// Volumetric heat capacity [J m^-3 K^-1].
    pub volumetric_capacity: f64,
}

impl MaterialLayer {
    pub fn validate(&self) -> Result<()> {
        if !(self.thickness > 0.0 && self.conductivity > 0.0 && self.volumetric_capacity > 0.0)
            || !self.thickness.is_finite()
            || !self.conductivity.is_finite()
            || !self.volumetric_capacity.is_finite()
        {
            return Err(Error::SceneInvalid(format!(
                "material layer must have positive finite thickness, conductivity and \
                 capacity (got e={}, k={}, c={})",
                self.thickness, self.conductivity, self.volumetric_capacity
            )));
        }
        Ok(())
    }
}

/// What the slab models, which decides the `x = L` boundary treatment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SlabKind {
    Wall,
    Soil,
}

/// Reference quantities of the dimensionless formulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DimensionlessScaling {
    /// Reference temperature [K]. Temperatures map to `(T - T_0)/T_0`.
    pub t0: f64,
    /// Characteristic length [m] (the slab thickness).
    pub length: f64,
    /// Reference conductivity [W m^-1 K^-1].
    pub k0: f64,
    /// Reference volumetric capacity [J m^-3 K^-1].
    pub c0: f64,
}

impl DimensionlessScaling {
    pub fn new(t0: f64, length: f64, k0: f64, c0: f64) -> Result<Self> {
        if !(t0 > 0.0 && length > 0.0 && k0 > 0.0 && c0 > 0.0) {
            return Err(Error::InvalidArgument(
                "dimensionless scaling requires positive T_0, L, k_0, c_0".into(),
            ));
        }
        Ok(DimensionlessScaling { t0, length, k0, c0 })
    }

    /// Diffusion time scale `t_ref = c_0 L^2 / k_0` [s].
    pub fn t_ref(&self) -> f64 {
        self.c0 * self.length * self.length / self.k0
    }

    /// `Fo = k_0 t_ref / (c_0 L^2)`; identically 1 under this scaling.
    pub fn fourier(&self) -> f64 {
        self.k0 * self.t_ref() / (self.c0 * self.length * self.length)
    }

    /// Biot number `h L / k_0` of a film coefficient.
    pub fn biot(&self, h: f64) -> f64 {
        h * self.length / self.k0
    }

    pub fn temp_star(&self, t_kelvin: f64) -> f64 {
        (t_kelvin - self.t0) / self.t0
    }

    pub fn temp_from_star(&self, t_star: f64) -> f64 {
        t_star * self.t0 + self.t0
    }

    /// `q* = q L / (k_0 T_0)`.
    pub fn flux_star(&self, q: f64) -> f64 {
        q * self.length / (self.k0 * self.t0)
    }

    pub fn time_star(&self, t: f64) -> f64 {
        t / self.t_ref()
    }
}

/// Boundary condition on one face of a slab.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SurfaceBc {
    /// `-k dT/dx = q_net - h (T - T_air)` at the face (outward flux sign
    /// handled per face). `q_net` is the net radiative gain of the surface.
    ConvectiveRadiative { t_air: f64, h: f64, q_net: f64 },
    /// Imposed face temperature.
    Dirichlet { temperature: f64 },
}

impl SurfaceBc {
    fn validate(&self) -> Result<()> {
        match *self {
            SurfaceBc::ConvectiveRadiative { t_air, h, q_net } => {
                if !t_air.is_finite() || !h.is_finite() || !q_net.is_finite() {
                    return Err(Error::NonFinite("surface boundary condition".into()));
                }
                if h < 0.0 {
                    return Err(Error::InvalidArgument(
                        "film coefficient must be nonnegative".into(),
                    ));
                }
            }
            SurfaceBc::Dirichlet { temperature } => {
                if !temperature.is_finite() {
                    return Err(Error::NonFinite("Dirichlet boundary temperature".into()));
                }
            }
        }
        Ok(())
    }
}

/// Which face of a slab.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// `x = 0` (exposed face of walls and soil columns).
    X0,
    /// `x = e` (inner face of walls, deep end of soils).
    Xe,
}

/// Nodal temperatures of one slab at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct SlabState {
    /// Temperatures [K], node 0 at `x = 0`.
    pub temps: Vec<f64>,
    /// Simulation time [s].
    pub time: f64,
}

/// A discretized multilayer conduction domain.
#[derive(Debug, Clone)]
pub struct Slab {
    kind: SlabKind,
    layers: Vec<MaterialLayer>,
    node_count: usize,
    length: f64,
    dx: f64,
    scaling: DimensionlessScaling,
    node_k: Vec<f64>,
    node_c: Vec<f64>,
    face_k: Vec<f64>,
    k_star: Vec<f64>,
    c_star: Vec<f64>,
    face_k_star: Vec<f64>,
}

impl Slab {
    /// Build a slab from its layers. The dimensionless reference uses the
    /// first layer's properties and the total thickness; `t0_kelvin` is the
    /// scene reference temperature.
    pub fn new(
        kind: SlabKind,
        layers: Vec<MaterialLayer>,
        node_count: usize,
        t0_kelvin: f64,
    ) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::SceneInvalid("slab requires at least one layer".into()));
        }
        for l in &layers {
            l.validate()?;
        }
        if node_count < 3 {
            return Err(Error::SceneInvalid(format!(
                "slab requires at least 3 nodes, got {node_count}"
            )));
        }
        let length: f64 = layers.iter().map(|l| l.thickness).sum();
        let scaling = DimensionlessScaling::new(
            t0_kelvin,
            length,
            layers[0].conductivity,
            layers[0].volumetric_capacity,
        )?;
        let n = node_count;
        let dx = length / (n - 1) as f64;

        // Cumulative layer boundaries.
        let mut bounds = Vec::with_capacity(layers.len() + 1);
        bounds.push(0.0);
        for l in &layers {
            bounds.push(bounds.last().unwrap() + l.thickness);
        }
        let layer_at = |x: f64| -> usize {
            let mut idx = layers.len() - 1;
            for (i, w) in bounds.windows(2).enumerate() {
                if x <= w[1] {
                    idx = i;
                    break;
                }
            }
            idx
        };
        // Integral of f(property) over [a, b] from piecewise-constant layers.
        let integrate = |a: f64, b: f64, f: &dyn Fn(&MaterialLayer) -> f64| -> f64 {
            let mut total = 0.0;
            for (i, l) in layers.iter().enumerate() {
                let lo = a.max(bounds[i]);
                let hi = b.min(bounds[i + 1]);
                if hi > lo {
                    total += (hi - lo) * f(l);
                }
            }
            total
        };

        let interface_eps = 1e-12 * length;
        let mut node_k = Vec::with_capacity(n);
        let mut node_c = Vec::with_capacity(n);
        for i in 0..n {
            let x = i as f64 * dx;
            // Nodes landing on an internal interface take the harmonic mean
            // of the two adjoining conductivities.
            let on_interface = bounds[1..layers.len()]
                .iter()
                .position(|&b| (x - b).abs() <= interface_eps);
            let k = match on_interface {
                Some(b_idx) => {
                    let (ka, kb) = (layers[b_idx].conductivity, layers[b_idx + 1].conductivity);
                    2.0 * ka * kb / (ka + kb)
                }
                None => layers[layer_at(x)].conductivity,
            };
            node_k.push(k);
            // Control-volume average capacity conserves energy exactly.
            let lo = (x - 0.5 * dx).max(0.0);
            let hi = (x + 0.5 * dx).min(length);
            node_c.push(integrate(lo, hi, &|l| l.volumetric_capacity) / (hi - lo));
        }
        // Resistance-exact face conductivity over each segment.
        let mut face_k = Vec::with_capacity(n - 1);
        for i in 0..n - 1 {
            let a = i as f64 * dx;
            let b = (i + 1) as f64 * dx;
            let resistance = integrate(a, b, &|l| 1.0 / l.conductivity);
            face_k.push((b - a) / resistance);
        }

        let k_star = node_k.iter().map(|k| k / scaling.k0).collect();
        let c_star = node_c.iter().map(|c| c / scaling.c0).collect();
        let face_k_star = face_k.iter().map(|k| k / scaling.k0).collect();
        Ok(Slab {
            kind,
            layers,
            node_count,
            length,
            dx,
            scaling,
            node_k,
            node_c,
            face_k,
            k_star,
            c_star,
            face_k_star,
        })
    }

    pub fn kind(&self) -> SlabKind {
        self.kind
    }

    pub fn layers(&self) -> &[MaterialLayer] {
        &self.layers
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn thickness(&self) -> f64 {
        self.length
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn scaling(&self) -> &DimensionlessScaling {
        &self.scaling
    }

    /// Dimensionless nodal conductivity `k/k_0`.
    pub fn conductivity_star(&self) -> &[f64] {
        &self.k_star
    }

    /// Dimensionless nodal capacity `c/c_0`.
    pub fn capacity_star(&self) -> &[f64] {
        &self.c_star
    }

    pub fn nodal_conductivity(&self) -> &[f64] {
        &self.node_k
    }

    pub fn nodal_capacity(&self) -> &[f64] {
        &self.node_c
    }

    pub fn uniform_state(&self, temperature: f64, time: f64) -> SlabState {
        SlabState {
            temps: vec![temperature; self.node_count],
            time,
        }
    }

    fn check_state(&self, state: &SlabState) -> Result<()> {
        if state.temps.len() != self.node_count {
            return Err(Error::InvalidArgument(format!(
                "state has {} nodes, slab has {}",
                state.temps.len(),
                self.node_count
            )));
        }
        if state.temps.iter().any(|t| !t.is_finite()) {
            return Err(Error::NonFinite("slab state".into()));
        }
        Ok(())
    }

    /// Advance a wall slab one implicit Euler step. Both faces carry
    /// convective + net-radiative conditions.
    pub fn step_wall(
        &self,
        state: &SlabState,
        bc_out: &SurfaceBc,
        bc_in: &SurfaceBc,
        dt: f64,
    ) -> Result<SlabState> {
        let (SurfaceBc::ConvectiveRadiative { .. }, SurfaceBc::ConvectiveRadiative { .. }) =
            (bc_out, bc_in)
        else {
            return Err(Error::InvalidArgument(
                "wall step requires convective-radiative conditions on both faces".into(),
            ));
        };
        self.step(state, bc_out, bc_in, dt)
    }

    /// Advance a soil column one implicit Euler step: convective +
    /// radiative at the surface, imposed temperature at depth.
    pub fn step_soil(
        &self,
        state: &SlabState,
        bc_surface: &SurfaceBc,
        t_deep: f64,
        dt: f64,
    ) -> Result<SlabState> {
        if self.kind != SlabKind::Soil {
            return Err(Error::InvalidArgument("step_soil on a wall slab".into()));
        }
        let SurfaceBc::ConvectiveRadiative { .. } = bc_surface else {
            return Err(Error::InvalidArgument(
                "soil surface requires a convective-radiative condition".into(),
            ));
        };
        self.step(
            state,
            bc_surface,
            &SurfaceBc::Dirichlet {
                temperature: t_deep,
            },
            dt,
        )
    }

    /// Shared implicit Euler step, assembled and solved in dimensionless
    /// variables.
    fn step(&self, state: &SlabState, bc_x0: &SurfaceBc, bc_xe: &SurfaceBc, dt: f64) -> Result<SlabState> {
        self.check_state(state)?;
        bc_x0.validate()?;
        bc_xe.validate()?;
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
        }
        let n = self.node_count;
        let s = &self.scaling;
        let dt_star = dt / s.t_ref();
        let dx_star = 1.0 / (n - 1) as f64;
        let dx2 = dx_star * dx_star;

        let mut lower = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut upper = vec![0.0; n];
        let mut rhs = vec![0.0; n];

        for i in 1..n - 1 {
            let fw = self.face_k_star[i - 1] / dx2;
            let fe = self.face_k_star[i] / dx2;
            lower[i] = -fw;
            upper[i] = -fe;
            diag[i] = self.c_star[i] / dt_star + fw + fe;
            rhs[i] = self.c_star[i] / dt_star * s.temp_star(state.temps[i]);
        }

        let mut boundary_row = |idx: usize, neighbor_face: f64, bc: &SurfaceBc| {
            let theta_n = s.temp_star(state.temps[idx]);
            match *bc {
                SurfaceBc::ConvectiveRadiative { t_air, h, q_net } => {
                    let bi = s.biot(h);
                    let fk = neighbor_face / dx2;
                    diag[idx] = self.c_star[idx] / dt_star + 2.0 * fk + 2.0 * bi / dx_star;
                    let coupling = -2.0 * fk;
                    if idx == 0 {
                        upper[0] = coupling;
                    } else {
                        lower[idx] = coupling;
                    }
                    rhs[idx] = self.c_star[idx] / dt_star * theta_n
                        + 2.0 / dx_star * (s.flux_star(q_net) + bi * s.temp_star(t_air));
                }
                SurfaceBc::Dirichlet { temperature } => {
                    diag[idx] = 1.0;
                    if idx == 0 {
                        upper[0] = 0.0;
                    } else {
                        lower[idx] = 0.0;
                    }
                    rhs[idx] = s.temp_star(temperature);
                }
            }
        };
        boundary_row(0, self.face_k_star[0], bc_x0);
        boundary_row(n - 1, self.face_k_star[n - 2], bc_xe);

        let theta = solve_tridiagonal(&lower, &diag, &upper, &rhs);
        Ok(SlabState {
            temps: theta.iter().map(|&t| s.temp_from_star(t)).collect(),
            time: state.time + dt,
        })
    }

    /// `-k dT/dx` at a face, one-sided second-order stencil.
    pub fn surface_conductive_flux(&self, state: &SlabState, side: Side) -> f64 {
        let t = &state.temps;
        let n = self.node_count;
        match side {
            Side::X0 => {
                let grad = (-3.0 * t[0] + 4.0 * t[1] - t[2]) / (2.0 * self.dx);
                -self.node_k[0] * grad
            }
            Side::Xe => {
                let grad = (3.0 * t[n - 1] - 4.0 * t[n - 2] + t[n - 3]) / (2.0 * self.dx);
                -self.node_k[n - 1] * grad
            }
        }
    }

    /// Discrete energy flux through a face implied by the boundary row of
    /// the implicit system: half-cell storage plus conduction onward. For
    /// a converged step this equals `q_net - h (T_s - T_air)` to solver
    /// round-off, which is the boundary-condition audit.
    pub fn boundary_row_flux(&self, prev: &SlabState, next: &SlabState, side: Side, dt: f64) -> f64 {
        let n = self.node_count;
        match side {
            Side::X0 => {
                let storage = self.node_c[0] * (0.5 * self.dx) * (next.temps[0] - prev.temps[0]) / dt;
                let onward = self.face_k[0] * (next.temps[0] - next.temps[1]) / self.dx;
                storage + onward
            }
            Side::Xe => {
                let storage =
                    self.node_c[n - 1] * (0.5 * self.dx) * (next.temps[n - 1] - prev.temps[n - 1]) / dt;
                let onward = self.face_k[n - 2] * (next.temps[n - 1] - next.temps[n - 2]) / self.dx;
                storage + onward
            }
        }
    }
}

/// Thomas algorithm for a tridiagonal system. `lower[0]` and
/// `upper[n-1]` are ignored.
pub fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = upper[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - lower[i] * c[i - 1];
        c[i] = upper[i] / m;
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / m;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}
