//! View factor integration between triangle pairs.
//!
//! Separated pairs: product Gauss rule over both areas with the
//! `cos θ1 cos θ2 / (π r²)` kernel, negative cosines clamped.
//!
//! Adjacent pairs (shared edge/vertex, or centroids closer than the
//! separation ratio) that fully face each other: Stokes transformation to
//! the double contour integral `1/(2π) ∮∮ ln r (dl1 · dl2)`. The inner
//! line integral has a closed form for straight segments, which absorbs
//! the kernel singularity; the outer integral is an adaptive Gauss scheme.
//! Coincident (shared) edges contribute the exact `L²(ln L - 3/2)` term.
//!
//! Close pairs that only partially face each other (the plane of one cuts
//! the other) cannot use the contour form; they recurse on subdivided
//! areas with the clamped kernel.

use super::{Point3, QuadratureSpec};

// Symmetric triangle Gauss rules, barycentric coordinates, weights sum to 1.
const RULE_DEG1: &[([f64; 3], f64)] = &[([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], 1.0)];

const RULE_DEG2: &[([f64; 3], f64)] = &[
    ([2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0], 1.0 / 3.0),
    ([1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0], 1.0 / 3.0),
    ([1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0], 1.0 / 3.0),
];

const D5_A1: f64 = 0.059_715_871_789_77;
const D5_B1: f64 = 0.470_142_064_105_115;
const D5_A2: f64 = 0.797_426_985_353_087;
const D5_B2: f64 = 0.101_286_507_323_456;
const D5_W1: f64 = 0.132_394_152_788_506;
const D5_W2: f64 = 0.125_939_180_544_827;
const RULE_DEG5: &[([f64; 3], f64)] = &[
    ([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], 0.225),
    ([D5_A1, D5_B1, D5_B1], D5_W1),
    ([D5_B1, D5_A1, D5_B1], D5_W1),
    ([D5_B1, D5_B1, D5_A1], D5_W1),
    ([D5_A2, D5_B2, D5_B2], D5_W2),
    ([D5_B2, D5_A2, D5_B2], D5_W2),
    ([D5_B2, D5_B2, D5_A2], D5_W2),
];

fn rule_for_order(order: u32) -> &'static [([f64; 3], f64)] {
    match order {
        1 => RULE_DEG1,
        2 => RULE_DEG2,
        _ => RULE_DEG5,
    }
}

// 4- and 8-point Gauss-Legendre on [-1, 1] for the outer contour integral.
const G4: &[(f64, f64)] = &[
    (-0.861_136_311_594_052_6, 0.347_854_845_137_453_9),
    (-0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
    (0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
    (0.861_136_311_594_052_6, 0.347_854_845_137_453_9),
];
const G8: &[(f64, f64)] = &[
    (-0.960_289_856_497_536_2, 0.101_228_536_290_376_3),
    (-0.796_666_477_413_626_7, 0.222_381_034_453_374_5),
    (-0.525_532_409_916_329, 0.313_706_645_877_887_3),
    (-0.183_434_642_495_649_8, 0.362_683_783_378_362),
    (0.183_434_642_495_649_8, 0.362_683_783_378_362),
    (0.525_532_409_916_329, 0.313_706_645_877_887_3),
    (0.796_666_477_413_626_7, 0.222_381_034_453_374_5),
    (0.960_289_856_497_536_2, 0.101_228_536_290_376_3),
];

struct Tri {
    v: [Point3; 3],
    normal: Point3,
    centroid: Point3,
    area: f64,
    radius: f64,
}

impl Tri {
    fn new(v: &[Point3; 3]) -> Self {
        let e1 = v[1] - v[0];
        let e2 = v[2] - v[0];
        let c = e1.cross(&e2);
        let norm = c.norm();
        let centroid = (v[0] + v[1] + v[2]).scale(1.0 / 3.0);
        let radius = v
            .iter()
            .map(|p| (*p - centroid).norm())
            .fold(0.0, f64::max);
        Tri {
            v: *v,
            normal: c.scale(1.0 / norm),
            centroid,
            area: 0.5 * norm,
            radius,
        }
    }

    fn point(&self, bary: &[f64; 3]) -> Point3 {
        self.v[0].scale(bary[0]) + self.v[1].scale(bary[1]) + self.v[2].scale(bary[2])
    }

    /// Signed distances of the other triangle's vertices above this plane.
    fn signed_distances(&self, other: &Tri) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (o, v) in out.iter_mut().zip(&other.v) {
            *o = (*v - self.v[0]).dot(&self.normal);
        }
        out
    }
}

/// `∫∫ cosθ1 cosθ2 / (π r²) dA1 dA2` between two triangles, which equals
/// `A1 · F_12 = A2 · F_21`. Occlusion by third surfaces is not considered
/// here.
pub fn pair_integral(t1: &[Point3; 3], t2: &[Point3; 3], quad: &QuadratureSpec) -> f64 {
    let a = Tri::new(t1);
    let b = Tri::new(t2);
    let scale = a.radius + b.radius + (a.centroid - b.centroid).norm();
    let eps = 1e-9 * scale;

    let d_ab = a.signed_distances(&b);
    let d_ba = b.signed_distances(&a);
    // Entirely behind (or coplanar): nothing is exchanged.
    if d_ab.iter().all(|&d| d <= eps) || d_ba.iter().all(|&d| d <= eps) {
        return 0.0;
    }

    let dist = (a.centroid - b.centroid).norm();
    if dist > quad.separation_ratio * (a.radius + b.radius) {
        return gauss_product(&a, &b, quad);
    }

    let fully_facing = d_ab.iter().all(|&d| d >= -eps) && d_ba.iter().all(|&d| d >= -eps);
    if fully_facing {
        return contour_pair(&a, &b, quad).max(0.0);
    }

    subdivided(&a, &b, quad, quad.max_subdivision)
}

fn gauss_product(a: &Tri, b: &Tri, quad: &QuadratureSpec) -> f64 {
    let rule = rule_for_order(quad.order);
    let mut total = 0.0;
    for (bary1, w1) in rule {
        let p = a.point(bary1);
        for (bary2, w2) in rule {
            let q = b.point(bary2);
            let d = q - p;
            let r2 = d.dot(&d);
            if r2 <= 0.0 {
                continue;
            }
            let c1 = a.normal.dot(&d);
            let c2 = -b.normal.dot(&d);
            if c1 > 0.0 && c2 > 0.0 {
                total += w1 * w2 * c1 * c2 / (std::f64::consts::PI * r2 * r2);
            }
        }
    }
    total * a.area * b.area
}

fn split4(t: &Tri) -> [Tri; 4] {
    let m01 = (t.v[0] + t.v[1]).scale(0.5);
    let m12 = (t.v[1] + t.v[2]).scale(0.5);
    let m02 = (t.v[0] + t.v[2]).scale(0.5);
    [
        Tri::new(&[t.v[0], m01, m02]),
        Tri::new(&[m01, t.v[1], m12]),
        Tri::new(&[m02, m12, t.v[2]]),
        Tri::new(&[m01, m12, m02]),
    ]
}

fn subdivided(a: &Tri, b: &Tri, quad: &QuadratureSpec, depth: u32) -> f64 {
    let dist = (a.centroid - b.centroid).norm();
    if depth == 0 || dist > quad.separation_ratio * (a.radius + b.radius) {
        return gauss_product(a, b, quad);
    }
    let (split_a, pieces) = if a.radius >= b.radius {
        (true, split4(a))
    } else {
        (false, split4(b))
    };
    pieces
        .iter()
        .map(|piece| {
            if split_a {
                subdivided(piece, b, quad, depth - 1)
            } else {
                subdivided(a, piece, quad, depth - 1)
            }
        })
        .sum()
}

/// `∫ ln|p - q| dq` along the segment `a -> b` (arclength measure).
fn inner_log_integral(p: Point3, a: Point3, b: Point3) -> f64 {
    let ab = b - a;
    let len = ab.norm();
    let u = ab.scale(1.0 / len);
    let d = p - a;
    let s0 = d.dot(&u);
    let h2 = (d.dot(&d) - s0 * s0).max(0.0);
    let h = h2.sqrt();
    let antiderivative = |x: f64| -> f64 {
        let r2 = x * x + h2;
        // r2 == 0 forces x == 0 where x ln|x| -> 0.
        let log_term = if r2 > 0.0 { 0.5 * x * r2.ln() } else { 0.0 };
        log_term - x + h * f64::atan2(x, h)
    };
    antiderivative(len - s0) - antiderivative(-s0)
}

/// Adaptive Gauss quadrature of `f` along `a -> b`, absolute tolerance.
fn outer_adaptive(
    a: Point3,
    b: Point3,
    f: &dyn Fn(Point3) -> f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let eval = |lo: f64, hi: f64, rule: &[(f64, f64)]| -> f64 {
        let mid = 0.5 * (lo + hi);
        let half = 0.5 * (hi - lo);
        let mut total = 0.0;
        for &(x, w) in rule {
            let s = mid + half * x;
            let p = a + (b - a).scale(s);
            total += w * f(p);
        }
        total * half
    };
    fn recurse(
        lo: f64,
        hi: f64,
        tol: f64,
        depth: u32,
        eval: &dyn Fn(f64, f64, &[(f64, f64)]) -> f64,
    ) -> f64 {
        let coarse = eval(lo, hi, G4);
        let fine = eval(lo, hi, G8);
        if depth == 0 || (fine - coarse).abs() < tol {
            return fine;
        }
        let mid = 0.5 * (lo + hi);
        recurse(lo, mid, 0.5 * tol, depth - 1, eval)
            + recurse(mid, hi, 0.5 * tol, depth - 1, eval)
    }
    let len = (b - a).norm();
    // Parameterize on [0, 1]; the arclength factor is `len`.
    recurse(0.0, 1.0, tol / len, depth, &eval) * len
}

fn nearly_same(p: Point3, q: Point3, eps: f64) -> bool {
    (p - q).norm() <= eps
}

/// `∮∮ ln r (dl1 · dl2)` over one pair of directed edges.
fn edge_pair_term(a1: Point3, b1: Point3, a2: Point3, b2: Point3, quad: &QuadratureSpec) -> f64 {
    let l1 = (b1 - a1).norm();
    let l2 = (b2 - a2).norm();
    let eps = 1e-12 * (l1 + l2);
    let u1 = (b1 - a1).scale(1.0 / l1);
    let u2 = (b2 - a2).scale(1.0 / l2);
    let alignment = u1.dot(&u2);
    if alignment.abs() < 1e-14 {
        return 0.0;
    }
    // A shared edge (traversed either way) has the closed form L²(ln L - 3/2).
    let same = nearly_same(a1, a2, eps) && nearly_same(b1, b2, eps);
    let reversed = nearly_same(a1, b2, eps) && nearly_same(b1, a2, eps);
    let raw = if same || reversed {
        l1 * l1 * (l1.ln() - 1.5)
    } else {
        let tol = quad.contour_tol * l1 * l2;
        outer_adaptive(a1, b1, &|p| inner_log_integral(p, a2, b2), tol, 18)
    };
    alignment * raw
}

/// The double contour integral form of the view factor integral. Valid
/// when each triangle lies entirely on the front side of the other's
/// plane. Both triangles traversed counter-clockwise w.r.t. their normals.
fn contour_pair(a: &Tri, b: &Tri, quad: &QuadratureSpec) -> f64 {
    let mut total = 0.0;
    for i in 0..3 {
        let (a1, b1) = (a.v[i], a.v[(i + 1) % 3]);
        for j in 0..3 {
            let (a2, b2) = (b.v[j], b.v[(j + 1) % 3]);
            total += edge_pair_term(a1, b1, a2, b2, quad);
        }
    }
    total / (2.0 * std::f64::consts::PI)
}
