use super::*;
use approx::assert_relative_eq;

fn patch(id: usize, v: [[f64; 3]; 3]) -> SurfacePatch {
    SurfacePatch {
        id,
        vertices: [
            Point3::new(v[0][0], v[0][1], v[0][2]),
            Point3::new(v[1][0], v[1][1], v[1][2]),
            Point3::new(v[2][0], v[2][1], v[2][2]),
        ],
        emissivity: 0.9,
        albedo: 0.3,
        group: format!("g{id}"),
        side: PatchSide::Exterior,
    }
}

/// Two CCW triangles covering the quad p0, p0+ex, p0+ex+ey, p0+ey.
fn quad_tris(base_id: usize, p0: [f64; 3], ex: [f64; 3], ey: [f64; 3]) -> [SurfacePatch; 2] {
    let p = Point3::new(p0[0], p0[1], p0[2]);
    let ex = Point3::new(ex[0], ex[1], ex[2]);
    let ey = Point3::new(ey[0], ey[1], ey[2]);
    let v = [p, p + ex, p + ex + ey, p + ey];
    let t = |a: Point3, b: Point3, c: Point3| [[a.x, a.y, a.z], [b.x, b.y, b.z], [c.x, c.y, c.z]];
    [
        patch(base_id, t(v[0], v[1], v[2])),
        patch(base_id + 1, t(v[0], v[2], v[3])),
    ]
}

/// Analytic view factor between identical, aligned, parallel rectangles.
fn parallel_rects_analytic(a: f64, b: f64, c: f64) -> f64 {
    let x = a / c;
    let y = b / c;
    let x2 = x * x;
    let y2 = y * y;
    let ln = (((1.0 + x2) * (1.0 + y2)) / (1.0 + x2 + y2)).sqrt().ln();
    let t1 = x * (1.0 + y2).sqrt() * (x / (1.0 + y2).sqrt()).atan();
    let t2 = y * (1.0 + x2).sqrt() * (y / (1.0 + x2).sqrt()).atan();
    let t3 = x * x.atan() + y * y.atan();
    2.0 / (std::f64::consts::PI * x * y) * (ln + t1 + t2 - t3)
}

/// Analytic view factor between perpendicular rectangles sharing an edge,
/// from the rectangle of height `h` to the one of depth `w` (common edge
/// length `l`).
fn perpendicular_rects_analytic(h: f64, w: f64, l: f64) -> f64 {
    let hh = h / l;
    let ww = w / l;
    let h2 = hh * hh;
    let w2 = ww * ww;
    let a = ww * (1.0 / ww).atan() + hh * (1.0 / hh).atan()
        - (h2 + w2).sqrt() * (1.0 / (h2 + w2).sqrt()).atan();
    let ln = ((1.0 + w2) * (1.0 + h2) / (1.0 + w2 + h2))
        * (w2 * (1.0 + w2 + h2) / ((1.0 + w2) * (w2 + h2))).powf(w2)
        * (h2 * (1.0 + h2 + w2) / ((1.0 + h2) * (h2 + w2))).powf(h2);
    (a + 0.25 * ln.ln()) / (std::f64::consts::PI * ww)
}

fn square_to_square_vf(sq1: &[SurfacePatch], sq2: &[SurfacePatch], quad: &QuadratureSpec) -> f64 {
    let a1: f64 = sq1.iter().map(|p| p.area()).sum();
    let total: f64 = sq1
        .iter()
        .flat_map(|i| sq2.iter().map(move |j| pair_integral(&i.vertices, &j.vertices, quad)))
        .sum();
    total / a1
}

#[test]
fn area_right_triangle() {
    let p = patch(0, [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]);
    assert_relative_eq!(p.area(), 0.5, max_relative = 1e-15);
}

#[test]
fn area_unit_equilateral() {
    let h = 3.0f64.sqrt() / 2.0;
    let p = patch(0, [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.5, h, 0.0]]);
    assert_relative_eq!(p.area(), 3.0f64.sqrt() / 4.0, max_relative = 1e-14);
}

#[test]
fn area_isometry_invariant() {
    let p = patch(0, [[0.2, -1.0, 3.0], [1.7, 0.4, 2.0], [0.3, 2.2, -0.5]]);
    let rotated = patch(1, {
        // rotate 37 degrees about z then translate
        let ang = 37.0f64.to_radians();
        let (s, c) = ang.sin_cos();
        let mut out = [[0.0; 3]; 3];
        for (o, v) in out.iter_mut().zip(&p.vertices) {
            *o = [c * v.x - s * v.y + 5.0, s * v.x + c * v.y - 2.0, v.z + 1.0];
        }
        out
    });
    assert_relative_eq!(p.area(), rotated.area(), max_relative = 1e-12);
}

#[test]
fn degenerate_triangle_rejected() {
    let p = patch(0, [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]]);
    assert!(p.validate().is_err());
}

#[test]
fn self_view_is_zero() {
    let p = patch(0, [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]);
    let q = QuadratureSpec::default();
    assert_eq!(view_factor(&p, &p, &q), 0.0);
}

#[test]
fn coplanar_patches_exchange_nothing() {
    let a = patch(0, [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]);
    let b = patch(1, [[3.0, 0.0, 0.0], [4.0, 0.0, 0.0], [3.0, 1.0, 0.0]]);
    let q = QuadratureSpec::default();
    assert_eq!(view_factor(&a, &b, &q), 0.0);
}

#[test]
fn back_facing_patch_sees_nothing() {
    // receiver entirely behind the emitter's plane
    let a = patch(0, [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]); // +z
    let b = patch(1, [[0.0, 0.0, -1.0], [0.0, 1.0, -1.0], [1.0, 0.0, -1.0]]); // -z, below
    let q = QuadratureSpec::default();
    assert_eq!(view_factor(&a, &b, &q), 0.0);
    assert_eq!(view_factor(&b, &a, &q), 0.0);
}

#[test]
fn parallel_unit_squares_gap_one() {
    let bot = quad_tris(0, [0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]);
    let top = quad_tris(2, [0.0, 0.0, 1.0], [0.0, 1.0, 0.0], [1.0, 0.0, 0.0]);
    let quad = QuadratureSpec::default();
    let f = square_to_square_vf(&bot, &top, &quad);
    let exact = parallel_rects_analytic(1.0, 1.0, 1.0);
    assert_relative_eq!(exact, 0.19982, epsilon = 1e-4);
    assert!((f - exact).abs() < 1e-3, "F = {f}, exact = {exact}");
}

#[test]
fn perpendicular_unit_squares_shared_edge() {
    let floor = quad_tris(0, [0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]);
    let wall = quad_tris(2, [0.0, 0.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]);
    let quad = QuadratureSpec::default();
    let f = square_to_square_vf(&floor, &wall, &quad);
    let exact = perpendicular_rects_analytic(1.0, 1.0, 1.0);
    assert_relative_eq!(exact, 0.20004, epsilon = 1e-4);
    assert!((f - exact).abs() < 1e-3, "F = {f}, exact = {exact}");
}

#[test]
fn view_factor_isometry_invariant() {
    let floor = quad_tris(0, [0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]);
    let wall = quad_tris(2, [0.0, 0.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]);
    let quad = QuadratureSpec::default();
    let f0 = square_to_square_vf(&floor, &wall, &quad);

    let ang = 63.0f64.to_radians();
    let (s, c) = ang.sin_cos();
    let xform = |p: &SurfacePatch, id: usize| {
        let mut v = [[0.0; 3]; 3];
        for (o, q) in v.iter_mut().zip(&p.vertices) {
            // rotate about x, then translate
            *o = [q.x - 7.0, c * q.y - s * q.z + 2.0, s * q.y + c * q.z + 11.0];
        }
        patch(id, v)
    };
    let floor2 = [xform(&floor[0], 0), xform(&floor[1], 1)];
    let wall2 = [xform(&wall[0], 2), xform(&wall[1], 3)];
    let f1 = square_to_square_vf(&floor2, &wall2, &quad);
    assert!((f0 - f1).abs() < 1e-9, "f0 = {f0}, f1 = {f1}");
}

/// 12 CCW triangles bounding the unit cube interior (normals point inward).
pub(crate) fn unit_cube_interior() -> Vec<SurfacePatch> {
    let faces: [([f64; 3], [f64; 3], [f64; 3]); 6] = [
        ([0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]), // floor, +z
        ([0.0, 0.0, 1.0], [0.0, 1.0, 0.0], [1.0, 0.0, 0.0]), // ceiling, -z
        ([0.0, 0.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]), // y=0, +y
        ([0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]), // y=1, -y
        ([0.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]), // x=0, +x
        ([1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, 1.0, 0.0]), // x=1, -x
    ];
    let mut out = Vec::new();
    for (k, (p0, ex, ey)) in faces.iter().enumerate() {
        let [a, b] = quad_tris(2 * k, *p0, *ex, *ey);
        out.push(a);
        out.push(b);
    }
    for (i, p) in out.iter_mut().enumerate() {
        p.id = i;
        p.side = PatchSide::Interior;
    }
    out
}

#[test]
fn closed_cube_rows_sum_to_one_before_closure() {
    let cube = unit_cube_interior();
    let quad = QuadratureSpec::default();
    for i in &cube {
        let mut sum = 0.0;
        for j in &cube {
            if i.id != j.id && visible_fraction(i, j, &cube, quad.occlusion) > 0.0 {
                sum += view_factor(i, j, &quad);
            }
        }
        assert!(
            (sum - 1.0).abs() < 1e-3,
            "cube row {} sums to {sum} before closure",
            i.id
        );
    }
}

#[test]
fn assembled_interior_matrix_is_closed_and_reciprocal() {
    let cube = unit_cube_interior();
    let quad = QuadratureSpec::default();
    let m = ViewFactorMatrix::assemble(&cube, EnclosureKind::ClosedInterior, &quad).unwrap();
    for i in 0..m.len() {
        assert!((m.row_sum(i) - 1.0).abs() < 1e-12);
        assert_eq!(m.get(i, i), 0.0);
        for j in 0..m.len() {
            assert!(m.get(i, j) >= 0.0);
        }
    }
    assert!(m.reciprocity_defect() < 1e-12);
}

#[test]
fn lone_exterior_patch_sees_only_sky() {
    let p = vec![patch(0, [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])];
    let m = ViewFactorMatrix::assemble(&p, EnclosureKind::ExteriorWithSky, &QuadratureSpec::default())
        .unwrap();
    assert_eq!(m.sky(0), 1.0);
}

#[test]
fn exterior_sky_complement_is_exact() {
    // open street canyon: two facing walls and the ground between them
    let left = quad_tris(0, [0.0, 0.0, 0.0], [0.0, 5.0, 0.0], [0.0, 0.0, 2.0]); // +x
    let right = quad_tris(2, [3.0, 0.0, 0.0], [0.0, 0.0, 2.0], [0.0, 5.0, 0.0]); // -x
    let ground = quad_tris(4, [0.0, 0.0, 0.0], [3.0, 0.0, 0.0], [0.0, 5.0, 0.0]); // +z
    let mut patches: Vec<SurfacePatch> = left.into_iter().chain(right).chain(ground).collect();
    for (i, p) in patches.iter_mut().enumerate() {
        p.id = i;
    }
    let m = ViewFactorMatrix::assemble(&patches, EnclosureKind::ExteriorWithSky, &QuadratureSpec::default())
        .unwrap();
    for i in 0..m.len() {
        let total = m.row_sum(i) + m.sky(i);
        assert!((total - 1.0).abs() < 1e-15, "row {i} total {total}");
        assert!(m.sky(i) > 0.0 && m.sky(i) < 1.0);
    }
    // reciprocity is exact by construction (symmetric integral, shared ray)
    assert!(m.reciprocity_defect() < 1e-12);
}

#[test]
fn canyon_walls_see_each_other_and_occluder_blocks() {
    let left = patch(0, [[0.0, 0.0, 0.0], [0.0, 5.0, 0.0], [0.0, 0.0, 2.0]]);
    let right = patch(1, [[3.0, 0.0, 0.0], [3.0, 0.0, 2.0], [3.0, 5.0, 0.0]]);
    let scene = SceneMesh::new(vec![left.clone(), right.clone()]).unwrap();
    assert!(visible(&scene.patches[0], &scene.patches[1], &scene));

    // drop a full-height slab between them
    let blocker = quad_tris(2, [1.5, -1.0, -1.0], [0.0, 8.0, 0.0], [0.0, 0.0, 5.0]);
    let mut patches = vec![left, right];
    patches.extend(blocker);
    for (i, p) in patches.iter_mut().enumerate() {
        p.id = i;
    }
    let scene = SceneMesh::new(patches).unwrap();
    assert!(!visible(&scene.patches[0], &scene.patches[1], &scene));
}

#[test]
fn four_sample_occlusion_reports_partial_fraction() {
    let left = patch(0, [[0.0, 0.0, 0.0], [0.0, 5.0, 0.0], [0.0, 0.0, 2.0]]);
    let right = patch(1, [[3.0, 0.0, 0.0], [3.0, 0.0, 2.0], [3.0, 5.0, 0.0]]);
    // blocker covering only part of the span between the two walls
    let blocker = quad_tris(2, [1.5, 0.0, 0.0], [0.0, 1.8, 0.0], [0.0, 0.0, 5.0]);
    let mut patches = vec![left, right];
    patches.extend(blocker);
    for (i, p) in patches.iter_mut().enumerate() {
        p.id = i;
    }
    let f = visible_fraction(&patches[0], &patches[1], &patches, OcclusionMode::FourSamples);
    assert!(f > 0.0 && f < 1.0, "expected partial occlusion, got {f}");
}

#[test]
fn empty_scene_rejected() {
    assert!(SceneMesh::new(vec![]).is_err());
}

#[test]
fn cache_roundtrip_and_stale_hash() {
    let cube = unit_cube_interior();
    let quad = QuadratureSpec::default();
    let m = ViewFactorMatrix::assemble(&cube, EnclosureKind::ClosedInterior, &quad).unwrap();
    let hash = [7u8; 32];
    let mut buf = Vec::new();
    m.write_bin(&mut buf, &hash).unwrap();
    let path = Path::new("cube.vf");
    let back = ViewFactorMatrix::read_bin(&mut buf.as_slice(), path, Some(&hash)).unwrap();
    assert_eq!(back.len(), m.len());
    for i in 0..m.len() {
        assert_eq!(back.area(i), m.area(i));
        for j in 0..m.len() {
            assert_eq!(back.get(i, j), m.get(i, j));
        }
    }
    let stale = [8u8; 32];
    assert!(ViewFactorMatrix::read_bin(&mut buf.as_slice(), path, Some(&stale)).is_err());
}

#[test]
fn row_sum_hard_error_on_duplicated_geometry() {
    // five identical receivers stacked at the same plane just above the
    // emitter: each pair sees F near 1, so the emitter row overshoots far
    // beyond 1 + 10 * tolerance (duplicated geometry is a modeling error
    // the assembly must refuse)
    let base = quad_tris(0, [0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]);
    let mut patches: Vec<SurfacePatch> = base.into_iter().collect();
    for k in 0..5 {
        let top = quad_tris(2 + 2 * k, [0.0, 0.0, 1e-3], [0.0, 1.0, 0.0], [1.0, 0.0, 0.0]);
        patches.extend(top);
    }
    for (i, p) in patches.iter_mut().enumerate() {
        p.id = i;
    }
    let err = ViewFactorMatrix::assemble(&patches, EnclosureKind::ExteriorWithSky, &QuadratureSpec::default());
    assert!(matches!(err, Err(Error::ViewFactorRowSum { .. })));
}
