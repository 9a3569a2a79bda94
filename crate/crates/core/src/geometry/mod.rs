//! Triangle scene mesh and polygon-to-polygon view factors.
//!
//! The scene is a soup of triangles. Each triangle carries the radiative
//! properties of its group and belongs to one of two kinds of enclosure:
//! the outdoor scene (where the row complement of the view factor matrix is
//! the sky view factor) or the closed interior of a building zone (where
//! rows are renormalized to sum to one).
//!
//! View factor integrals between separated triangles use a fixed-order
//! Gauss product rule over both areas. Pairs that touch or nearly touch
//! (shared edges and vertices in street corners are the interesting case)
//! switch to the double contour integral of the logarithmic kernel, with
//! the inner line integral evaluated in closed form; this keeps adjacent
//! non-coplanar pairs accurate to well below 1e-3 absolute. Pairs that are
//! close but only partially face each other fall back to recursive
//! subdivision of the area integral.

mod occlusion;
mod quadrature;

use crate::error::{Error, Result};
use rayon::prelude::*;
use std::io::{Read, Write};
use std::path::Path;

pub use occlusion::{visible, visible_fraction, OcclusionMode};
pub use quadrature::pair_integral;

/// A point or vector in 3-space, in meters.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Point3 { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn dot(&self, o: &Point3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(&self, o: &Point3) -> Point3 {
        Point3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn scale(&self, s: f64) -> Point3 {
        Point3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl std::ops::Add for Point3 {
    type Output = Point3;
    fn add(self, o: Point3) -> Point3 {
        Point3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl std::ops::Sub for Point3 {
    type Output = Point3;
    fn sub(self, o: Point3) -> Point3 {
        Point3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

/// Which enclosure a patch participates in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PatchSide {
    /// Outdoor scene face (sees other exterior patches and the sky).
    Exterior,
    /// Interior face of a building zone.
    Interior,
}

/// One triangle of the scene mesh.
///
/// Vertices are counter-clockwise with respect to the outward normal, i.e.
/// the normal points away from the solid and toward whatever the face
/// radiates at.
#[derive(Debug, Clone)]
pub struct SurfacePatch {
    pub id: usize,
    pub vertices: [Point3; 3],
    pub emissivity: f64,
    pub albedo: f64,
    pub group: String,
    pub side: PatchSide,
}

impl SurfacePatch {
    /// Triangle area: half the norm of the edge cross product.
    pub fn area(&self) -> f64 {
        let e1 = self.vertices[1] - self.vertices[0];
        let e2 = self.vertices[2] - self.vertices[0];
        0.5 * e1.cross(&e2).norm()
    }

    /// Unit outward normal.
    pub fn normal(&self) -> Point3 {
        let e1 = self.vertices[1] - self.vertices[0];
        let e2 = self.vertices[2] - self.vertices[0];
        let c = e1.cross(&e2);
        c.scale(1.0 / c.norm())
    }

    pub fn centroid(&self) -> Point3 {
        (self.vertices[0] + self.vertices[1] + self.vertices[2]).scale(1.0 / 3.0)
    }

    /// Largest vertex distance from the centroid.
    pub fn circumscribed_radius(&self) -> f64 {
        let c = self.centroid();
        self.vertices
            .iter()
            .map(|v| (*v - c).norm())
            .fold(0.0, f64::max)
    }

    pub fn validate(&self) -> Result<()> {
        for v in &self.vertices {
            if !v.is_finite() {
                return Err(Error::SceneInvalid(format!(
                    "patch {} ({}) has a non-finite vertex",
                    self.id, self.group
                )));
            }
        }
        let scale = self
            .vertices
            .iter()
            .map(|v| (*v - self.vertices[0]).norm())
            .fold(0.0, f64::max);
        if self.area() <= 1e-12 * scale.max(1e-30) * scale.max(1e-30) || self.area() == 0.0 {
            return Err(Error::SceneInvalid(format!(
                "patch {} ({}) is a degenerate triangle",
                self.id, self.group
            )));
        }
        if !(self.emissivity > 0.0 && self.emissivity <= 1.0) {
            return Err(Error::SceneInvalid(format!(
                "patch {} ({}) has emissivity {} outside (0, 1]",
                self.id, self.group, self.emissivity
            )));
        }
        if !(0.0..1.0).contains(&self.albedo) {
            return Err(Error::SceneInvalid(format!(
                "patch {} ({}) has albedo {} outside [0, 1)",
                self.id, self.group, self.albedo
            )));
        }
        Ok(())
    }
}

/// The full triangle soup plus group bookkeeping.
#[derive(Debug, Clone, Default)]
pub struct SceneMesh {
    pub patches: Vec<SurfacePatch>,
}

impl SceneMesh {
    pub fn new(patches: Vec<SurfacePatch>) -> Result<Self> {
        if patches.is_empty() {
            return Err(Error::SceneInvalid("scene has no patches".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for (i, p) in patches.iter().enumerate() {
            p.validate()?;
            if p.id != i {
                return Err(Error::SceneInvalid(format!(
                    "patch ids must be dense and ordered (patch at position {i} has id {})",
                    p.id
                )));
            }
            if !seen.insert(p.id) {
                return Err(Error::SceneInvalid(format!("duplicate patch id {}", p.id)));
            }
        }
        Ok(SceneMesh { patches })
    }

    /// Map group name to the patch ids that belong to it.
    pub fn adjacency(&self) -> std::collections::BTreeMap<String, Vec<usize>> {
        let mut map: std::collections::BTreeMap<String, Vec<usize>> = Default::default();
        for p in &self.patches {
            map.entry(p.group.clone()).or_default().push(p.id);
        }
        map
    }

    pub fn exterior_ids(&self) -> Vec<usize> {
        self.patches
            .iter()
            .filter(|p| p.side == PatchSide::Exterior)
            .map(|p| p.id)
            .collect()
    }
}

/// Gauss rule selection and adjacency handling for the view factor integral.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct QuadratureSpec {
    /// Polynomial degree of the triangle Gauss rule (1, 2, or 5).
    pub order: u32,
    /// Pairs closer than `separation_ratio * (r1 + r2)` are treated as
    /// adjacent and integrated with the contour method.
    pub separation_ratio: f64,
    /// Absolute tolerance of the adaptive outer contour quadrature,
    /// relative to the product of edge lengths.
    pub contour_tol: f64,
    /// Recursion cap for the partial-facing subdivision fallback.
    pub max_subdivision: u32,
    /// Row-sum / reciprocity tolerance used by assembly checks.
    pub tolerance: f64,
    /// Visibility sampling.
    pub occlusion: OcclusionMode,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            order: 5,
            separation_ratio: 2.0,
            contour_tol: 1e-9,
            max_subdivision: 6,
            tolerance: 1e-3,
            occlusion: OcclusionMode::CentroidRay,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.order < 1 {
            return Err(Error::InvalidArgument("quadrature order must be >= 1".into()));
        }
        if !(self.separation_ratio > 0.0 && self.contour_tol > 0.0 && self.tolerance > 0.0) {
            return Err(Error::InvalidArgument(
                "quadrature separation ratio and tolerances must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// View factor between two finite triangles, ignoring occlusion by third
/// surfaces.
///
/// Returns 0 for coplanar pairs and whenever either triangle lies entirely
/// behind the other's plane.
pub fn view_factor(emitter: &SurfacePatch, receiver: &SurfacePatch, quad: &QuadratureSpec) -> f64 {
    pair_integral(&emitter.vertices, &receiver.vertices, quad) / emitter.area()
}

/// Kind of enclosure a view factor matrix describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnclosureKind {
    /// Open outdoor scene: the row complement goes to the sky.
    ExteriorWithSky,
    /// Closed zone interior: rows are renormalized to sum to 1.
    ClosedInterior,
}

/// Dense view factor matrix for one enclosure, plus per-row sky view
/// factors and patch areas.
#[derive(Debug, Clone)]
pub struct ViewFactorMatrix {
    n: usize,
    kind: EnclosureKind,
    f: Vec<f64>,
    f_sky: Vec<f64>,
    areas: Vec<f64>,
}

impl ViewFactorMatrix {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn kind(&self) -> EnclosureKind {
        self.kind
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.f[i * self.n + j]
    }

    pub fn sky(&self, i: usize) -> f64 {
        self.f_sky[i]
    }

    pub fn area(&self, i: usize) -> f64 {
        self.areas[i]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.f[i * self.n..(i + 1) * self.n]
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.row(i).iter().sum()
    }

    /// Build a matrix from raw entries. Intended for tests and synthetic
    /// enclosures; `assemble` is the geometric path.
    pub fn from_raw(
        kind: EnclosureKind,
        f: Vec<f64>,
        f_sky: Vec<f64>,
        areas: Vec<f64>,
    ) -> Result<Self> {
        let n = areas.len();
        if f.len() != n * n || f_sky.len() != n {
            return Err(Error::InvalidArgument(
                "view factor matrix dimensions are inconsistent".into(),
            ));
        }
        Ok(ViewFactorMatrix {
            n,
            kind,
            f,
            f_sky,
            areas,
        })
    }

    /// Largest reciprocity defect `|S_i F_ij - S_j F_ji|` over all pairs.
    pub fn reciprocity_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                let d = (self.areas[i] * self.get(i, j) - self.areas[j] * self.get(j, i)).abs();
                worst = worst.max(d);
            }
        }
        worst
    }

    /// Assemble the visibility-masked view factor matrix of one enclosure.
    ///
    /// The same patch set acts as the occluder collection. Exterior rows
    /// get `F_sky = 1 - row sum` (clamped at zero, with a warning, when the
    /// row overshoots within `10 * tolerance`); interior rows are brought
    /// to exact closure, preserving reciprocity. A row sum beyond
    /// `1 + 10 * tolerance` is a hard error.
    pub fn assemble(
        patches: &[SurfacePatch],
        kind: EnclosureKind,
        quad: &QuadratureSpec,
    ) -> Result<Self> {
        quad.validate()?;
        let n = patches.len();
        if n == 0 {
            return Err(Error::SceneInvalid("enclosure has no patches".into()));
        }
        for p in patches {
            p.validate()?;
        }
        let areas: Vec<f64> = patches.iter().map(|p| p.area()).collect();

        let pairs: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .collect();
        // Symmetric integral per pair keeps reciprocity exact by construction;
        // the visibility factor uses the same ray both ways.
        let integrals: Vec<f64> = pairs
            .par_iter()
            .map(|&(i, j)| {
                let vis = visible_fraction(&patches[i], &patches[j], patches, quad.occlusion);
                if vis == 0.0 {
                    0.0
                } else {
                    vis * pair_integral(&patches[i].vertices, &patches[j].vertices, quad)
                }
            })
            .collect();

        let mut f = vec![0.0; n * n];
        for (&(i, j), &val) in pairs.iter().zip(&integrals) {
            f[i * n + j] = val / areas[i];
            f[j * n + i] = val / areas[j];
        }

        let mut f_sky = vec![0.0; n];
        let hard_limit = 1.0 + 10.0 * quad.tolerance;
        for i in 0..n {
            let sum: f64 = f[i * n..(i + 1) * n].iter().sum();
            if sum > hard_limit {
                return Err(Error::ViewFactorRowSum { row: i, sum });
            }
            match kind {
                EnclosureKind::ExteriorWithSky => {
                    if sum > 1.0 + quad.tolerance {
                        log::warn!(
                            "exterior view factor row {i} sums to {sum:.6}; clamping sky view \
                             factor to 0"
                        );
                    }
                    f_sky[i] = (1.0 - sum).max(0.0);
                }
                EnclosureKind::ClosedInterior => {
                    if (sum - 1.0).abs() > quad.tolerance {
                        log::warn!(
                            "interior view factor row {i} sums to {sum:.6} before closure \
                             enforcement"
                        );
                    }
                    if sum <= 0.0 {
                        return Err(Error::SceneInvalid(format!(
                            "interior patch {i} sees no other patch of its enclosure"
                        )));
                    }
                }
            }
        }

        let mut m = ViewFactorMatrix {
            n,
            kind,
            f,
            f_sky,
            areas,
        };
        if kind == EnclosureKind::ClosedInterior {
            m.enforce_closed_enclosure();
        }
        Ok(m)
    }

    /// Alternate reciprocity averaging and row normalization until the
    /// matrix is both row-stochastic and reciprocal to round-off. Closed
    /// enclosures need exact closure or the radiosity balance leaks energy.
    fn enforce_closed_enclosure(&mut self) {
        let n = self.n;
        for _ in 0..200 {
            let mut defect = 0.0f64;
            for i in 0..n {
                for j in (i + 1)..n {
                    let m = 0.5 * (self.areas[i] * self.f[i * n + j]
                        + self.areas[j] * self.f[j * n + i]);
                    self.f[i * n + j] = m / self.areas[i];
                    self.f[j * n + i] = m / self.areas[j];
                }
            }
            for i in 0..n {
                let sum: f64 = self.f[i * n..(i + 1) * n].iter().sum();
                defect = defect.max((sum - 1.0).abs());
                let inv = 1.0 / sum;
                for j in 0..n {
                    self.f[i * n + j] *= inv;
                }
            }
            if defect < 1e-14 {
                break;
            }
        }
    }

    const MAGIC: &'static [u8; 8] = b"UTVFMX1\n";

    /// Serialize to the binary cache format, tagged with a content hash of
    /// whatever produced the matrix.
    pub fn write_bin<W: Write>(&self, w: &mut W, content_hash: &[u8; 32]) -> std::io::Result<()> {
        w.write_all(Self::MAGIC)?;
        w.write_all(content_hash)?;
        w.write_all(&[match self.kind {
            EnclosureKind::ExteriorWithSky => 0u8,
            EnclosureKind::ClosedInterior => 1u8,
        }])?;
        w.write_all(&(self.n as u64).to_le_bytes())?;
        for v in self.areas.iter().chain(&self.f_sky).chain(&self.f) {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    /// Read the binary cache format. When `expected_hash` is given, a
    /// mismatch is an error (stale cache).
    pub fn read_bin<R: Read>(
        r: &mut R,
        path: &Path,
        expected_hash: Option<&[u8; 32]>,
    ) -> Result<Self> {
        let bad = |message: &str| Error::ViewFactorCache {
            path: path.to_path_buf(),
            message: message.to_string(),
        };
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(|e| Error::io(path, e))?;
        if &magic != Self::MAGIC {
            return Err(bad("not a view factor cache file"));
        }
        let mut hash = [0u8; 32];
        r.read_exact(&mut hash).map_err(|e| Error::io(path, e))?;
        if let Some(expected) = expected_hash {
            if &hash != expected {
                return Err(bad("content hash mismatch (cache is stale)"));
            }
        }
        let mut kind_b = [0u8; 1];
        r.read_exact(&mut kind_b).map_err(|e| Error::io(path, e))?;
        let kind = match kind_b[0] {
            0 => EnclosureKind::ExteriorWithSky,
            1 => EnclosureKind::ClosedInterior,
            _ => return Err(bad("unknown enclosure kind")),
        };
        let mut nb = [0u8; 8];
        r.read_exact(&mut nb).map_err(|e| Error::io(path, e))?;
        let n = u64::from_le_bytes(nb) as usize;
        let mut read_vec = |len: usize| -> Result<Vec<f64>> {
            let mut out = Vec::with_capacity(len);
            let mut buf = [0u8; 8];
            for _ in 0..len {
                r.read_exact(&mut buf).map_err(|e| Error::io(path, e))?;
                out.push(f64::from_le_bytes(buf));
            }
            Ok(out)
        };
        let areas = read_vec(n)?;
        let f_sky = read_vec(n)?;
        let f = read_vec(n * n)?;
        Ok(ViewFactorMatrix {
            n,
            kind,
            f,
            f_sky,
            areas,
        })
    }

    /// Load from `path` when it holds a matrix with the expected hash,
    /// otherwise assemble and overwrite the cache.
    pub fn load_or_assemble(
        path: &Path,
        content_hash: &[u8; 32],
        patches: &[SurfacePatch],
        kind: EnclosureKind,
        quad: &QuadratureSpec,
    ) -> Result<Self> {
        if path.exists() {
            if let Ok(mut file) = std::fs::File::open(path) {
                match Self::read_bin(&mut file, path, Some(content_hash)) {
                    Ok(m) if m.kind == kind && m.n == patches.len() => return Ok(m),
                    _ => log::info!("view factor cache at {} is stale; reassembling", path.display()),
                }
            }
        }
        let m = Self::assemble(patches, kind, quad)?;
        let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        m.write_bin(&mut file, content_hash)
            .map_err(|e| Error::io(path, e))?;
        Ok(m)
    }
}

#[cfg(test)]
mod tests;
