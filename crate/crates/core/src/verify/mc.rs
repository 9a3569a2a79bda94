//! Monte Carlo ray-sampling view factor oracle.
//!
//! Independent of the quadrature path: uniform points on the emitter,
//! cosine-weighted directions, nearest-hit test against receiver and
//! occluder triangles. The fraction of rays landing on the receiver
//! estimates the view factor with standard-error
//! `sqrt(F (1 - F) / rays)`. Seeded with a small deterministic generator
//! so results are reproducible.

use crate::geometry::Point3;

/// splitmix64: tiny, seedable, good enough for ray sampling.
pub struct SplitMix64(pub u64);

impl SplitMix64 {
    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E3779B97F4A7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1).
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }
}

type Tri = [Point3; 3];

fn area_normal(t: &Tri) -> (f64, Point3) {
    let c = (t[1] - t[0]).cross(&(t[2] - t[0]));
    let norm = c.norm();
    (0.5 * norm, c.scale(1.0 / norm))
}

/// Ray-triangle intersection distance (strictly positive), if any.
fn ray_hit(origin: Point3, dir: Point3, t: &Tri) -> Option<f64> {
    let e1 = t[1] - t[0];
    let e2 = t[2] - t[0];
    let p = dir.cross(&e2);
    let det = e1.dot(&p);
    if det.abs() < 1e-14 {
        return None;
    }
    let inv = 1.0 / det;
    let s = origin - t[0];
    let u = s.dot(&p) * inv;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(&e1);
    let v = dir.dot(&q) * inv;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let dist = e2.dot(&q) * inv;
    (dist > 1e-9).then_some(dist)
}

/// Estimate the view factor from `emitter` (a set of triangles treated as
/// one surface) to `receiver`, with `occluders` able to block rays.
pub fn view_factor(
    emitter: &[Tri],
    receiver: &[Tri],
    occluders: &[Tri],
    rays: u64,
    seed: u64,
) -> f64 {
    let mut rng = SplitMix64(seed);
    let props: Vec<(f64, Point3)> = emitter.iter().map(area_normal).collect();
    let total_area: f64 = props.iter().map(|(a, _)| a).sum();

    let mut hits = 0u64;
    for _ in 0..rays {
        // pick an emitter triangle proportional to area
        let mut pick = rng.next_f64() * total_area;
        let mut idx = emitter.len() - 1;
        for (i, (a, _)) in props.iter().enumerate() {
            if pick < *a {
                idx = i;
                break;
            }
            pick -= a;
        }
        let tri = &emitter[idx];
        let normal = props[idx].1;

        // uniform point via square-root barycentric sampling
        let (r1, r2) = (rng.next_f64(), rng.next_f64());
        let s = r1.sqrt();
        let (w0, w1, w2) = (1.0 - s, s * (1.0 - r2), s * r2);
        let origin = tri[0].scale(w0) + tri[1].scale(w1) + tri[2].scale(w2);

        // cosine-weighted direction: uniform disk lifted to the hemisphere
        let arbitrary = if normal.x.abs() < 0.9 {
            Point3::new(1.0, 0.0, 0.0)
        } else {
            Point3::new(0.0, 1.0, 0.0)
        };
        let tangent = {
            let t = normal.cross(&arbitrary);
            t.scale(1.0 / t.norm())
        };
        let bitangent = normal.cross(&tangent);
        let (u1, u2) = (rng.next_f64(), rng.next_f64());
        let r = u1.sqrt();
        let phi = 2.0 * std::f64::consts::PI * u2;
        let dir = tangent.scale(r * phi.cos())
            + bitangent.scale(r * phi.sin())
            + normal.scale((1.0 - u1).max(0.0).sqrt());

        // nearest hit over receiver and occluders
        let mut best: Option<(f64, bool)> = None;
        for t in receiver {
            if let Some(d) = ray_hit(origin, dir, t) {
                if best.map_or(true, |(bd, _)| d < bd) {
                    best = Some((d, true));
                }
            }
        }
        for t in occluders {
            if let Some(d) = ray_hit(origin, dir, t) {
                if best.map_or(true, |(bd, _)| d < bd) {
                    best = Some((d, false));
                }
            }
        }
        if matches!(best, Some((_, true))) {
            hits += 1;
        }
    }
    hits as f64 / rays as f64
}
