//! TOML run configuration.
//!
//! ```toml
//! [mesh]
//! kind = "hex8"
//! lo = [0.0, 0.0, 0.0]
//! hi = [1.0, 1.0, 2.0]
//! cells = [4, 4, 8]
//!
//! [[fault.planes]]
//! axis = "z"
//! coord = 1.0
//!
//! [material.0]
//! E = 250e6
//! nu = 0.3
//!
//! [friction]
//! cohesion = 0.0
//! angle_deg = 30.0
//!
//! [steps.0]
//! dirichlet = [{ set = "zmin", x = 0.0, y = 0.0, z = 0.0 }]
//! ```
//!
//! Builder meshes expose the node/face sets `xmin` … `zmax` plus any
//! `[[mesh.subsets]]`. Every omitted optional key is written out by [`echo`].

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::contact::{FrictionParams, PenaltyParams};
use crate::error::{Error, Result};
use crate::fem::{CellKind, ElasticMaterial};
use crate::mesh::{build_tensor_grid, FaultPlane, Mesh, RegionBox, SplitOptions};
use crate::meshio::load_mesh;
use crate::solver::{
    default_penalty, DirichletBc, LoadStep, NeumannBc, ProblemDefinition, SolverConfig, DEFAULT_PENALTY_SCALE,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mesh: MeshConfig,
    #[serde(default)]
    pub fault: FaultConfig,
    pub material: BTreeMap<String, MaterialConfig>,
    pub friction: FrictionConfig,
    #[serde(default)]
    pub penalty: PenaltyConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    pub steps: BTreeMap<String, StepConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    /// Mesh file in the line-oriented ASCII format; excludes the builder keys.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lo: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hi: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cells: Option<[usize; 3]>,
    /// Later boxes win where they overlap; cells outside every box are region 0.
    #[serde(default)]
    pub regions: Vec<RegionConfig>,
    #[serde(default)]
    pub subsets: Vec<SubsetConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionConfig {
    pub tag: i32,
    pub min: [f64; 3],
    pub max: [f64; 3],
}

/// Boundary faces of `parent` whose centroid lies in [min, max], with their nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubsetConfig {
    pub name: String,
    pub parent: String,
    pub min: [f64; 3],
    pub max: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FaultConfig {
    pub enriched: bool,
    pub allow_junctions: bool,
    pub planes: Vec<PlaneConfig>,
}

impl Default for FaultConfig {
    fn default() -> Self {
        Self { enriched: true, allow_junctions: false, planes: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlaneConfig {
    pub axis: Axis,
    pub coord: f64,
    /// Open bounds on the two remaining axes, in increasing axis order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<[[f64; 2]; 2]>,
    #[serde(default)]
    pub id: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialConfig {
    #[serde(rename = "E")]
    pub e: f64,
    pub nu: f64,
    #[serde(default)]
    pub biot: f64,
    /// Effective initial stress, Voigt order xx, yy, zz, yz, xz, xy.
    #[serde(default)]
    pub initial_stress: [f64; 6],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrictionConfig {
    #[serde(default)]
    pub cohesion: f64,
    pub angle_deg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PenaltyConfig {
    /// ε = scale·Ē/h per face unless explicit values are given.
    pub scale: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_n: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_t: Option<f64>,
}

impl Default for PenaltyConfig {
    fn default() -> Self {
        Self { scale: DEFAULT_PENALTY_SCALE, eps_n: None, eps_t: None }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StepConfig {
    pub dirichlet: Vec<DirichletConfig>,
    pub neumann: Vec<NeumannConfig>,
    /// Pore pressure by cell region.
    pub pressure: BTreeMap<String, f64>,
    /// Wall pressure by fault id.
    pub fault_pressure: BTreeMap<String, f64>,
}

/// Prescribed displacement; omitted components stay free.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirichletConfig {
    pub set: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NeumannConfig {
    pub set: String,
    pub traction: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    /// Prefix of the per-step profile CSVs, `<profile>_<step>.csv`.
    pub profile: PathBuf,
    /// Prefix of the VTK fields, `<fields>_<step>.vtk` and `<fields>_fault_<step>.vtk`.
    pub fields: PathBuf,
    pub report: PathBuf,
    /// Where the effective configuration is written.
    pub echo: PathBuf,
    /// Centroid coordinate used as the profile's ξ.
    pub xi_axis: Axis,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            profile: "profile".into(),
            fields: "fields".into(),
            report: "report.csv".into(),
            echo: "effective.toml".into(),
            xi_axis: Axis::X,
        }
    }
}

const SIDES: [&str; 6] = ["xmin", "xmax", "ymin", "ymax", "zmin", "zmax"];

fn cerr(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

/// Parses and validates a configuration.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let de = toml::de::Deserializer::parse(text).map_err(|e| cerr(e.to_string()))?;
    let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let msg = inner.message().to_string();
        if path == "." || path.is_empty() { cerr(msg) } else { cerr(format!("{path}: {msg}")) }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

/// Effective configuration with every default written out.
pub fn echo(cfg: &RunConfig) -> String {
    toml::to_string(cfg).expect("run config serializes")
}

impl RunConfig {
    pub fn kind(&self) -> Result<Option<CellKind>> {
        self.mesh.kind.as_deref().map(CellKind::parse).transpose()
    }

    /// Load steps ordered by their numeric key.
    pub fn ordered_steps(&self) -> Result<Vec<(usize, &StepConfig)>> {
        let mut v = self
            .steps
            .iter()
            .map(|(k, s)| k.parse::<usize>().map(|i| (i, s)).map_err(|_| cerr(format!("steps.{k}: step key must be an integer"))))
            .collect::<Result<Vec<_>>>()?;
        v.sort_by_key(|(i, _)| *i);
        Ok(v)
    }

    fn validate(&self) -> Result<()> {
        let m = &self.mesh;
        let builder = m.kind.is_some() || m.lo.is_some() || m.hi.is_some() || m.cells.is_some();
        match (&m.file, builder) {
            (Some(_), true) => return Err(cerr("mesh: give either `file` or the builder keys, not both")),
            (None, false) => return Err(cerr("mesh: no mesh source (`file` or kind/lo/hi/cells)")),
            (Some(_), false) => {
                if !m.regions.is_empty() || !self.fault.planes.is_empty() {
                    return Err(cerr("mesh: regions and fault planes apply to builder meshes only"));
                }
            }
            (None, true) => {
                let (Some(lo), Some(hi), Some(cells)) = (m.lo, m.hi, m.cells) else {
                    return Err(cerr("mesh: builder needs kind, lo, hi and cells"));
                };
                if m.kind.is_none() {
                    return Err(cerr("mesh: builder needs kind, lo, hi and cells"));
                }
                self.kind().map_err(|e| cerr(format!("mesh.kind: {e}")))?;
                if (0..3).any(|d| !(hi[d] > lo[d]) || cells[d] == 0) {
                    return Err(cerr("mesh: need hi > lo and cells > 0 on every axis"));
                }
            }
        }
        if self.material.is_empty() {
            return Err(cerr("missing section `material`"));
        }
        for (k, mat) in &self.material {
            k.parse::<i32>().map_err(|_| cerr(format!("material.{k}: region key must be an integer")))?;
            ElasticMaterial::new(mat.e, mat.nu).map_err(|e| cerr(format!("material.{k}: {e}")))?;
        }
        if m.file.is_none() {
            let tags: BTreeSet<i32> = std::iter::once(0).chain(m.regions.iter().map(|r| r.tag)).collect();
            for t in tags {
                if !self.material.contains_key(&t.to_string()) {
                    return Err(cerr(format!("no material for region {t}")));
                }
            }
        }
        FrictionParams::from_degrees(self.friction.cohesion, self.friction.angle_deg)
            .map_err(|e| cerr(format!("friction: {e}")))?;
        let p = &self.penalty;
        if !(p.scale > 0.0) {
            return Err(cerr("penalty.scale must be positive"));
        }
        match (p.eps_n, p.eps_t) {
            (None, None) => {}
            (Some(n), Some(t)) if n > 0.0 && t > 0.0 => {}
            _ => return Err(cerr("penalty: eps_n and eps_t must be given together and be positive")),
        }
        if self.steps.is_empty() {
            return Err(cerr("missing section `steps`"));
        }
        let steps = self.ordered_steps()?;
        if m.file.is_none() {
            let mut sets: BTreeSet<&str> = SIDES.into_iter().collect();
            for s in &m.subsets {
                if !sets.contains(s.parent.as_str()) {
                    return Err(cerr(format!("mesh.subsets `{}`: undefined parent set `{}`", s.name, s.parent)));
                }
                sets.insert(&s.name);
            }
            for (i, st) in &steps {
                for name in st.dirichlet.iter().map(|d| &d.set).chain(st.neumann.iter().map(|n| &n.set)) {
                    if !sets.contains(name.as_str()) {
                        return Err(cerr(format!("steps.{i}: undefined set `{name}`")));
                    }
                }
            }
        }
        for (i, st) in &steps {
            for k in st.pressure.keys() {
                k.parse::<i32>().map_err(|_| cerr(format!("steps.{i}.pressure: region key `{k}` must be an integer")))?;
            }
            for k in st.fault_pressure.keys() {
                k.parse::<usize>().map_err(|_| cerr(format!("steps.{i}.fault_pressure: fault key `{k}` must be an integer")))?;
            }
        }
        Ok(())
    }

    pub fn build_mesh(&self) -> Result<Mesh> {
        let m = &self.mesh;
        let mut mesh = if let Some(path) = &m.file {
            load_mesh(path)?
        } else {
            let (lo, hi, cells) = (m.lo.unwrap_or_default(), m.hi.unwrap_or_default(), m.cells.unwrap_or_default());
            let kind = self.kind()?.unwrap_or(CellKind::Hex8);
            let axes: Vec<Vec<f64>> = (0..3)
                .map(|d| (0..=cells[d]).map(|i| lo[d] + (hi[d] - lo[d]) * i as f64 / cells[d] as f64).collect())
                .collect();
            let regions: Vec<RegionBox> = m.regions.iter().map(|r| RegionBox { tag: r.tag, min: r.min, max: r.max }).collect();
            let planes: Vec<FaultPlane> = self
                .fault
                .planes
                .iter()
                .map(|p| FaultPlane { axis: p.axis.index(), coord: p.coord, bounds: p.bounds, fault: p.id })
                .collect();
            build_tensor_grid(
                [&axes[0], &axes[1], &axes[2]],
                kind,
                &planes,
                &regions,
                SplitOptions { allow_junctions: self.fault.allow_junctions },
            )?
        };
        for s in &m.subsets {
            let parent = mesh.face_sets.get(&s.parent).ok_or_else(|| cerr(format!("undefined set `{}`", s.parent)))?;
            let inside = |p: &nalgebra::Point3<f64>| (0..3).all(|d| p[d] >= s.min[d] && p[d] <= s.max[d]);
            let faces: Vec<_> = parent.iter().copied().filter(|bf| inside(&mesh.face_centroid(bf.cell, bf.face))).collect();
            let nodes: BTreeSet<usize> = faces.iter().flat_map(|bf| mesh.face_node_ids(bf.cell, bf.face)).collect();
            mesh.node_sets.insert(s.name.clone(), nodes.into_iter().collect());
            mesh.face_sets.insert(s.name.clone(), faces);
        }
        Ok(mesh)
    }

    /// Mesh, per-cell data and load steps. Set references are checked against the mesh.
    pub fn build_problem(&self) -> Result<ProblemDefinition> {
        let mesh = self.build_mesh()?;
        let mut mats = Vec::with_capacity(mesh.cells.len());
        let mut stress = Vec::with_capacity(mesh.cells.len());
        let mut biot = Vec::with_capacity(mesh.cells.len());
        for c in &mesh.cells {
            let mc = self.material.get(&c.region.to_string()).ok_or_else(|| cerr(format!("no material for region {}", c.region)))?;
            mats.push(ElasticMaterial::new(mc.e, mc.nu)?);
            let s = mc.initial_stress;
            stress.push(Matrix3::new(s[0], s[5], s[4], s[5], s[1], s[3], s[4], s[3], s[2]));
            biot.push(mc.biot);
        }
        let fr = FrictionParams::from_degrees(self.friction.cohesion, self.friction.angle_deg)?;
        let penalty = match (self.penalty.eps_n, self.penalty.eps_t) {
            (Some(eps_n), Some(eps_t)) => vec![PenaltyParams { eps_n, eps_t }; mesh.fault_faces.len()],
            _ => default_penalty(&mesh, &mats, self.penalty.scale)?,
        };
        let mut steps = Vec::new();
        for (_, st) in self.ordered_steps()? {
            let mut ls = LoadStep::default();
            for d in &st.dirichlet {
                for (c, v) in [d.x, d.y, d.z].into_iter().enumerate() {
                    if let Some(value) = v {
                        ls.dirichlet.push(DirichletBc { set: d.set.clone(), component: c, value });
                    }
                }
            }
            for n in &st.neumann {
                ls.neumann.push(NeumannBc { set: n.set.clone(), traction: Vector3::from(n.traction) });
            }
            for (k, p) in &st.pressure {
                ls.pressure.insert(k.parse().map_err(|_| cerr(format!("pressure region `{k}`")))?, *p);
            }
            for (k, p) in &st.fault_pressure {
                ls.fault_pressure.insert(k.parse().map_err(|_| cerr(format!("fault pressure id `{k}`")))?, *p);
            }
            steps.push(ls);
        }
        let nf = mesh.fault_faces.len();
        let prob = ProblemDefinition {
            mesh,
            materials: mats,
            initial_stress: stress,
            biot,
            friction: vec![fr; nf],
            penalty,
            enriched: self.fault.enriched,
            steps,
        };
        prob.validate()?;
        Ok(prob)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[mesh]
kind = "hex8"
lo = [0.0, 0.0, 0.0]
hi = [1.0, 1.0, 2.0]
cells = [1, 1, 2]

[[fault.planes]]
axis = "z"
coord = 1.0

[material.0]
E = 1e9
nu = 0.25

[friction]
angle_deg = 30.0

[steps.0]
dirichlet = [{ set = "zmin", x = 0.0, y = 0.0, z = 0.0 }]
"#;

    #[test]
    fn defaults_materialized() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(cfg.penalty.scale, 10.0);
        let e = echo(&cfg);
        assert!(e.contains("scale = 10.0"), "{e}");
        assert!(e.contains("newton_rtol"));
        assert!(e.contains("uzawa_tol"));
        assert_eq!(parse_config(&e).unwrap(), cfg);
    }

    #[test]
    fn unknown_key_reports_path() {
        let bad = MINIMAL.replace("nu = 0.25", "nu = 0.25\npoisson = 0.3");
        let msg = parse_config(&bad).unwrap_err().to_string();
        assert!(msg.contains("material.0") && msg.contains("poisson"), "{msg}");
        let bad = MINIMAL.replace("[friction]", "[solver]\nbogus = 1\n\n[friction]");
        let msg = parse_config(&bad).unwrap_err().to_string();
        assert!(msg.contains("solver") && msg.contains("bogus"), "{msg}");
    }

    #[test]
    fn missing_section() {
        let bad = MINIMAL.replace("[friction]\nangle_deg = 30.0\n", "");
        let msg = parse_config(&bad).unwrap_err().to_string();
        assert!(msg.contains("friction"), "{msg}");
    }

    #[test]
    fn undefined_set_named() {
        let bad = MINIMAL.replace("set = \"zmin\"", "set = \"bottom\"");
        let msg = parse_config(&bad).unwrap_err().to_string();
        assert!(msg.contains("bottom"), "{msg}");
    }

    #[test]
    fn two_mesh_sources_rejected() {
        let bad = MINIMAL.replace("[mesh]\n", "[mesh]\nfile = \"m.txt\"\n");
        assert!(parse_config(&bad).is_err());
    }

    #[test]
    fn builds_problem() {
        let p = parse_config(MINIMAL).unwrap().build_problem().unwrap();
        assert_eq!(p.mesh.cells.len(), 2);
        assert_eq!(p.mesh.fault_faces.len(), 1);
        assert_eq!(p.steps[0].dirichlet.len(), 3);
        let eps = 10.0 * 1e9 / p.mesh.cell_size(0).unwrap();
        assert!((p.penalty[0].eps_n - eps).abs() <= 1e-12 * eps);
    }
}
