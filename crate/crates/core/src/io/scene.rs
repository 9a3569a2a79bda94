//! Scene files: a TOML document describing materials, wall/soil groups,
//! zones and the triangle mesh.
//!
//! ```toml
//! [scene]
//! name = "canyon"
//! initial_temperature_c = 20.0
//! deep_ground_temperature_c = 22.7     # required when soils are present
//!
//! [radiation]
//! outside_longwave = true
//! inside_longwave = true
//! model = "full"                       # or "single-reflection"
//!
//! [quadrature]                         # optional; defaults shown in docs
//! order = 5
//!
//! [[materials]]
//! name = "concrete"
//! conductivity = 1.75                  # W/m/K
//! volumetric_capacity = 2.2e6          # J/m^3/K
//!
//! [[groups]]
//! name = "wall-w"
//! kind = "wall"                        # wall | soil
//! emissivity = 0.9
//! albedo = 0.64
//! nodes = 101
//! layers = [{ material = "concrete", thickness = 0.045 }]
//! front = { bc = "scene", h = "correlation" }     # or h = 23.2
//! back = { bc = "zone", zone = "E", h = 2.5 }     # or fixed / deep
//!
//! [[zones]]
//! name = "E"
//! air_volume = 2.3                     # m^3
//! air_capacity = 1.2e3                 # J/m^3/K
//!
//! [mesh]                               # inline, or file = "mesh.txt"
//! vertices = [[0,0,0], [1,0,0], ...]
//! [[mesh.triangles]]
//! group = "wall-w"
//! indices = [[0,1,2], [0,2,3]]
//! ```
//!
//! Mesh triangles are always oriented counter-clockwise with the normal
//! pointing away from the slab's front (`x = 0`) side: toward the scene
//! for exposed faces, toward the fixed-air sink for party walls, up into
//! the zone for zone floors. Interior patches of zone-coupled back faces
//! are generated automatically with flipped orientation.
//!
//! An external mesh file holds `v x y z` vertex lines and
//! `t <group> i j k` triangle lines; `#` starts a comment.

use crate::conduction::{MaterialLayer, Side, Slab, SlabKind};
use crate::engine::{EndBc, HOutSpec, Model, RadiationSettings, SlabUnit, ZoneUnit};
use crate::error::{Error, Result};
use crate::geometry::{PatchSide, Point3, QuadratureSpec, SceneMesh, SurfacePatch};
use crate::{airzone, celsius_to_kelvin};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneDoc {
    pub scene: SceneHeader,
    #[serde(default)]
    pub radiation: RadiationDoc,
    #[serde(default)]
    pub quadrature: Option<QuadratureSpec>,
    #[serde(default)]
    pub materials: Vec<MaterialDoc>,
    #[serde(default)]
    pub groups: Vec<GroupDoc>,
    #[serde(default)]
    pub zones: Vec<ZoneDoc>,
    pub mesh: MeshDoc,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneHeader {
    pub name: String,
    pub initial_temperature_c: f64,
    #[serde(default)]
    pub deep_ground_temperature_c: Option<f64>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RadiationDoc {
    pub outside_longwave: bool,
    pub inside_longwave: bool,
    pub model: crate::longwave::ReflectionModel,
}

impl Default for RadiationDoc {
    fn default() -> Self {
        RadiationDoc {
            outside_longwave: true,
            inside_longwave: true,
            model: Default::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialDoc {
    pub name: String,
    pub conductivity: f64,
    pub volumetric_capacity: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupDoc {
    pub name: String,
    pub kind: SlabKind,
    #[serde(default = "default_emissivity")]
    pub emissivity: f64,
    #[serde(default)]
    pub albedo: f64,
    #[serde(default = "default_nodes")]
    pub nodes: usize,
    pub layers: Vec<LayerDoc>,
    pub front: EndBcDoc,
    #[serde(default)]
    pub back: Option<EndBcDoc>,
}

fn default_emissivity() -> f64 {
    0.9
}

fn default_nodes() -> usize {
    101
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerDoc {
    pub material: String,
    pub thickness: f64,
}

/// Film coefficient entry: a number or the literal `"correlation"`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HDoc {
    Value(f64),
    Named(String),
}

impl HDoc {
    fn resolve(&self, ctx: &str) -> Result<HOutSpec> {
        match self {
            HDoc::Value(v) if *v >= 0.0 && v.is_finite() => Ok(HOutSpec::Fixed(*v)),
            HDoc::Value(v) => Err(Error::SceneInvalid(format!(
                "{ctx}: film coefficient {v} must be nonnegative"
            ))),
            HDoc::Named(s) if s == "correlation" => Ok(HOutSpec::Correlation),
            HDoc::Named(s) => Err(Error::SceneInvalid(format!(
                "{ctx}: unknown film coefficient mode {s:?} (expected a number or \"correlation\")"
            ))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "bc", rename_all = "kebab-case", deny_unknown_fields)]
pub enum EndBcDoc {
    /// Outdoor exposure with weather forcing.
    Scene { h: HDoc },
    /// Coupled to a zone's air and interior radiosity.
    Zone { zone: String, h: f64 },
    /// Fixed air sink.
    Fixed { t_air_c: f64, h: f64 },
    /// Imposed deep-ground temperature.
    Deep,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZoneDoc {
    pub name: String,
    pub air_volume: f64,
    pub air_capacity: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshDoc {
    #[serde(default)]
    pub vertices: Vec<[f64; 3]>,
    #[serde(default)]
    pub triangles: Vec<TriangleDoc>,
    /// Optional external triangle-list file, relative to the scene file.
    #[serde(default)]
    pub file: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TriangleDoc {
    pub group: String,
    pub indices: Vec<[usize; 3]>,
}

/// Parse an external mesh file (`v x y z` / `t group i j k` lines).
fn parse_mesh_file(path: &Path) -> Result<(Vec<[f64; 3]>, Vec<(String, [usize; 3])>)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let bad = |message: String| Error::SceneFormat {
            path: path.to_path_buf(),
            message: format!("line {}: {message}", lineno + 1),
        };
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some("v") => {
                let mut v = [0.0; 3];
                for slot in &mut v {
                    *slot = parts
                        .next()
                        .ok_or_else(|| bad("vertex needs 3 coordinates".into()))?
                        .parse()
                        .map_err(|e| bad(format!("bad coordinate: {e}")))?;
                }
                vertices.push(v);
            }
            Some("t") => {
                let group = parts
                    .next()
                    .ok_or_else(|| bad("triangle needs a group".into()))?
                    .to_string();
                let mut idx = [0usize; 3];
                for slot in &mut idx {
                    *slot = parts
                        .next()
                        .ok_or_else(|| bad("triangle needs 3 vertex indices".into()))?
                        .parse()
                        .map_err(|e| bad(format!("bad index: {e}")))?;
                }
                triangles.push((group, idx));
            }
            Some(tag) => return Err(bad(format!("unknown record tag {tag:?}"))),
            None => unreachable!(),
        }
    }
    Ok((vertices, triangles))
}

/// Load, validate and build a scene file into a runnable model.
pub fn load_scene(path: &Path) -> Result<(SceneDoc, Model)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let doc: SceneDoc = toml::from_str(&text).map_err(|e| Error::SceneFormat {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let model = build_model(&doc, Some(path))?;
    Ok((doc, model))
}

/// Build the in-memory model from a parsed document. `origin` resolves a
/// relative external mesh file.
pub fn build_model(doc: &SceneDoc, origin: Option<&Path>) -> Result<Model> {
    let invalid = |m: String| Error::SceneInvalid(m);

    let t0 = celsius_to_kelvin(doc.scene.initial_temperature_c);
    let t_deep = doc.scene.deep_ground_temperature_c.map(celsius_to_kelvin);

    let mut materials: BTreeMap<&str, MaterialLayer> = BTreeMap::new();
    for m in &doc.materials {
        let layer = MaterialLayer {
            thickness: 1.0, // per-layer thickness comes from the group
            conductivity: m.conductivity,
            volumetric_capacity: m.volumetric_capacity,
        };
        layer.validate().map_err(|e| invalid(format!("material {}: {e}", m.name)))?;
        if materials.insert(&m.name, layer).is_some() {
            return Err(invalid(format!("duplicate material {}", m.name)));
        }
    }

    // gather mesh: inline plus optional external file
    let mut vertices: Vec<[f64; 3]> = doc.mesh.vertices.clone();
    let mut triangles: Vec<(String, [usize; 3])> = Vec::new();
    for t in &doc.mesh.triangles {
        for idx in &t.indices {
            triangles.push((t.group.clone(), *idx));
        }
    }
    if let Some(file) = &doc.mesh.file {
        let base = origin.and_then(Path::parent).unwrap_or(Path::new("."));
        let mesh_path = base.join(file);
        let (file_vertices, file_triangles) = parse_mesh_file(&mesh_path)?;
        let offset = vertices.len();
        vertices.extend(file_vertices);
        triangles.extend(
            file_triangles
                .into_iter()
                .map(|(g, [a, b, c])| (g, [a + offset, b + offset, c + offset])),
        );
    }
    if triangles.is_empty() {
        return Err(invalid("scene mesh has no triangles".into()));
    }

    let point = |i: usize| -> Result<Point3> {
        let v = vertices
            .get(i)
            .ok_or_else(|| invalid(format!("triangle references vertex {i} out of range")))?;
        Ok(Point3::new(v[0], v[1], v[2]))
    };

    let zone_index: BTreeMap<&str, usize> = doc
        .zones
        .iter()
        .enumerate()
        .map(|(i, z)| (z.name.as_str(), i))
        .collect();
    if zone_index.len() != doc.zones.len() {
        return Err(invalid("duplicate zone names".into()));
    }

    // resolve groups
    struct GroupSpec {
        slab: Slab,
        end0: EndBc,
        end1: EndBc,
        emissivity: f64,
        albedo: f64,
        zone_end: Option<(usize, Side, f64)>, // zone idx, which end, h_in
    }
    let mut group_specs: BTreeMap<&str, GroupSpec> = BTreeMap::new();
    for g in &doc.groups {
        let ctx = format!("group {}", g.name);
        if g.layers.is_empty() {
            return Err(invalid(format!("{ctx}: no layers")));
        }
        let mut layers = Vec::with_capacity(g.layers.len());
        for l in &g.layers {
            let mat = materials
                .get(l.material.as_str())
                .ok_or_else(|| invalid(format!("{ctx}: unknown material {}", l.material)))?;
            layers.push(MaterialLayer {
                thickness: l.thickness,
                ..*mat
            });
        }
        let slab = Slab::new(g.kind, layers, g.nodes, t0)
            .map_err(|e| invalid(format!("{ctx}: {e}")))?;

        let resolve_zone = |name: &str| -> Result<usize> {
            zone_index
                .get(name)
                .copied()
                .ok_or_else(|| invalid(format!("{ctx}: unknown zone {name}")))
        };
        let front = match &g.front {
            EndBcDoc::Scene { h } => EndBc::Scene {
                h_out: h.resolve(&ctx)?,
            },
            EndBcDoc::Zone { zone, h } => EndBc::ZoneAir {
                zone: resolve_zone(zone)?,
                h_in: *h,
            },
            EndBcDoc::Fixed { t_air_c, h } => EndBc::FixedAir {
                t_air: celsius_to_kelvin(*t_air_c),
                h: *h,
            },
            EndBcDoc::Deep => {
                return Err(invalid(format!("{ctx}: front face cannot be the deep boundary")))
            }
        };
        let back = match (&g.back, g.kind) {
            (None, SlabKind::Soil) => EndBc::DeepGround,
            (Some(EndBcDoc::Deep), SlabKind::Soil) => EndBc::DeepGround,
            (None, SlabKind::Wall) => {
                return Err(invalid(format!("{ctx}: wall groups need an explicit back face")))
            }
            (Some(EndBcDoc::Deep), SlabKind::Wall) => {
                return Err(invalid(format!("{ctx}: walls have no deep boundary")))
            }
            (Some(EndBcDoc::Scene { .. }), _) => {
                return Err(invalid(format!(
                    "{ctx}: only the front face can be scene-exposed; flip the mesh orientation"
                )))
            }
            (Some(EndBcDoc::Zone { zone, h }), SlabKind::Wall) => EndBc::ZoneAir {
                zone: resolve_zone(zone)?,
                h_in: *h,
            },
            (Some(EndBcDoc::Zone { .. }), SlabKind::Soil) => {
                return Err(invalid(format!(
                    "{ctx}: a zone floor couples to the zone through its front face"
                )))
            }
            (Some(EndBcDoc::Fixed { t_air_c, h }), SlabKind::Wall) => EndBc::FixedAir {
                t_air: celsius_to_kelvin(*t_air_c),
                h: *h,
            },
            (Some(EndBcDoc::Fixed { .. }), SlabKind::Soil) => {
                return Err(invalid(format!("{ctx}: soil columns end at the deep boundary")))
            }
        };
        if matches!(front, EndBc::ZoneAir { .. }) && g.kind == SlabKind::Wall {
            return Err(invalid(format!(
                "{ctx}: a wall couples to its zone through the back face"
            )));
        }
        let zone_end = match (&front, &back) {
            (EndBc::ZoneAir { zone, h_in }, _) => Some((*zone, Side::X0, *h_in)),
            (_, EndBc::ZoneAir { zone, h_in }) => Some((*zone, Side::Xe, *h_in)),
            _ => None,
        };
        if !(g.emissivity > 0.0 && g.emissivity <= 1.0) {
            return Err(invalid(format!("{ctx}: emissivity {} outside (0, 1]", g.emissivity)));
        }
        if !(0.0..1.0).contains(&g.albedo) {
            return Err(invalid(format!("{ctx}: albedo {} outside [0, 1)", g.albedo)));
        }
        let spec = GroupSpec {
            slab,
            end0: front,
            end1: back,
            emissivity: g.emissivity,
            albedo: g.albedo,
            zone_end,
        };
        if group_specs.insert(&g.name, spec).is_some() {
            return Err(invalid(format!("duplicate group {}", g.name)));
        }
    }

    // instantiate one unit per triangle, in file order
    let mut units: Vec<SlabUnit> = Vec::new();
    let mut patches: Vec<SurfacePatch> = Vec::new();
    let mut exterior_patches = Vec::new();
    let mut exterior_units = Vec::new();
    let mut zone_members: Vec<Vec<(usize, Side)>> = vec![Vec::new(); doc.zones.len()];
    let mut zone_patches: Vec<Vec<usize>> = vec![Vec::new(); doc.zones.len()];
    let mut per_group_counter: BTreeMap<&str, usize> = BTreeMap::new();

    for (group_name, idx) in &triangles {
        let spec = group_specs
            .get(group_name.as_str())
            .ok_or_else(|| invalid(format!("triangle references unknown group {group_name}")))?;
        let k = per_group_counter.entry(group_name.as_str()).or_insert(0);
        let unit_id = format!("{group_name}#{k}");
        *k += 1;
        let ui = units.len();
        let v = [point(idx[0])?, point(idx[1])?, point(idx[2])?];
        let tri = SurfacePatch {
            id: 0,
            vertices: v,
            emissivity: spec.emissivity,
            albedo: spec.albedo,
            group: group_name.clone(),
            side: PatchSide::Exterior,
        };
        let area = tri.area();

        if matches!(spec.end0, EndBc::Scene { .. }) {
            let mut p = tri.clone();
            p.id = patches.len();
            p.validate().map_err(|e| invalid(format!("unit {unit_id}: {e}")))?;
            exterior_patches.push(p.id);
            exterior_units.push(ui);
            patches.push(p);
        }
        if let Some((zi, side, _)) = spec.zone_end {
            let mut p = tri.clone();
            p.side = PatchSide::Interior;
            if side == Side::Xe {
                // interior face of a wall: flip so the normal points into
                // the zone
                p.vertices.swap(1, 2);
            }
            p.id = patches.len();
            p.validate().map_err(|e| invalid(format!("unit {unit_id}: {e}")))?;
            zone_members[zi].push((ui, side));
            zone_patches[zi].push(p.id);
            patches.push(p);
        }
        if !matches!(spec.end0, EndBc::Scene { .. }) && spec.zone_end.is_none() {
            // still validate pure-sink units' geometry
            tri.clone().validate().map_err(|e| invalid(format!("unit {unit_id}: {e}")))?;
        }

        units.push(SlabUnit {
            id: unit_id,
            group: group_name.clone(),
            slab: spec.slab.clone(),
            end0: spec.end0.clone(),
            end1: spec.end1.clone(),
            albedo: spec.albedo,
            emissivity: spec.emissivity,
            area,
        });
    }

    // assemble zones with their member areas and film coefficients
    let mut zones = Vec::with_capacity(doc.zones.len());
    for (zi, z) in doc.zones.iter().enumerate() {
        let members_meta = &zone_members[zi];
        if members_meta.is_empty() {
            return Err(invalid(format!("zone {} has no member faces", z.name)));
        }
        let members = members_meta
            .iter()
            .map(|&(ui, _)| {
                let h_in = match (&units[ui].end0, &units[ui].end1) {
                    (EndBc::ZoneAir { h_in, .. }, _) => *h_in,
                    (_, EndBc::ZoneAir { h_in, .. }) => *h_in,
                    _ => unreachable!("member faces a zone"),
                };
                airzone::ZoneMember {
                    area: units[ui].area,
                    h_in,
                }
            })
            .collect();
        zones.push(ZoneUnit {
            name: z.name.clone(),
            zone: airzone::Zone {
                air_volume: z.air_volume,
                air_capacity: z.air_capacity,
                members,
            },
            members: members_meta.clone(),
            interior_patches: zone_patches[zi].clone(),
        });
    }

    let mesh = SceneMesh::new(patches)?;
    Model::new(
        doc.scene.name.clone(),
        mesh,
        units,
        zones,
        exterior_patches,
        exterior_units,
        t0,
        t_deep,
        RadiationSettings {
            outside_longwave: doc.radiation.outside_longwave,
            inside_longwave: doc.radiation.inside_longwave,
            model: doc.radiation.model,
        },
        doc.quadrature.clone().unwrap_or_default(),
    )
}
