//! Visibility between patches: ray-triangle blocking tests.

use super::{Point3, SurfacePatch};

/// How visibility between a patch pair is sampled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OcclusionMode {
    /// One ray between the centroids; blocked or not.
    CentroidRay,
    /// Four deterministic sample-point pairs; partial occlusion scales the
    /// view factor by the unblocked fraction.
    FourSamples,
}

// Interior barycentric sample points shared by the four-sample mode.
const SAMPLES: [[f64; 3]; 4] = [
    [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
    [2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0],
    [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0],
    [1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0],
];

fn bary_point(p: &SurfacePatch, bary: &[f64; 3]) -> Point3 {
    p.vertices[0].scale(bary[0]) + p.vertices[1].scale(bary[1]) + p.vertices[2].scale(bary[2])
}

/// Moller-Trumbore segment/triangle intersection with the intersection
/// parameter restricted to the open interior of the segment.
fn segment_hits_triangle(orig: Point3, dest: Point3, tri: &[Point3; 3]) -> bool {
    const T_EPS: f64 = 1e-6;
    let dir = dest - orig;
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let pvec = dir.cross(&e2);
    let det = e1.dot(&pvec);
    if det.abs() < 1e-14 * e1.norm() * e2.norm() * dir.norm().max(1e-30) {
        return false; // parallel
    }
    let inv = 1.0 / det;
    let tvec = orig - tri[0];
    let u = tvec.dot(&pvec) * inv;
    if !(-1e-12..=1.0 + 1e-12).contains(&u) {
        return false;
    }
    let qvec = tvec.cross(&e1);
    let v = dir.dot(&qvec) * inv;
    if v < -1e-12 || u + v > 1.0 + 1e-12 {
        return false;
    }
    let t = e2.dot(&qvec) * inv;
    t > T_EPS && t < 1.0 - T_EPS
}

fn ray_clear(orig: Point3, dest: Point3, i: usize, j: usize, occluders: &[SurfacePatch]) -> bool {
    !occluders
        .iter()
        .any(|p| p.id != i && p.id != j && segment_hits_triangle(orig, dest, &p.vertices))
}

/// Fraction of sample rays between `i` and `j` that no third patch blocks.
///
/// `CentroidRay` yields 0 or 1; `FourSamples` yields k/4.
pub fn visible_fraction(
    i: &SurfacePatch,
    j: &SurfacePatch,
    occluders: &[SurfacePatch],
    mode: OcclusionMode,
) -> f64 {
    match mode {
        OcclusionMode::CentroidRay => {
            if ray_clear(i.centroid(), j.centroid(), i.id, j.id, occluders) {
                1.0
            } else {
                0.0
            }
        }
        OcclusionMode::FourSamples => {
            let clear = SAMPLES
                .iter()
                .filter(|bary| ray_clear(bary_point(i, bary), bary_point(j, bary), i.id, j.id, occluders))
                .count();
            clear as f64 / SAMPLES.len() as f64
        }
    }
}

/// Centroid-ray visibility between two distinct patches of a scene.
pub fn visible(i: &SurfacePatch, j: &SurfacePatch, scene: &super::SceneMesh) -> bool {
    visible_fraction(i, j, &scene.patches, OcclusionMode::CentroidRay) > 0.0
}
