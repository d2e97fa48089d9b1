//! Scenario files: a TOML description of one experiment (domain, Lagrangian,
//! data, smoothing schedule, tolerances and which pipeline stages to run).

use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::lagrangian::{build, catalog_entries, LagrangianSpec};
use crate::mesh::{DomainSpec, Mesh};
use crate::nonconvex::RepairParams;
use crate::smoothing::SmoothingSchedule;
use crate::solver::SolverOptions;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Source term g.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceSpec {
    Constant {
        value: f64,
    },
    Named {
        name: String,
        #[serde(default = "one")]
        scale: f64,
    },
    /// Rows `x,y,value`; each vertex takes the value of the nearest row.
    Csv {
        file: PathBuf,
    },
}

impl Default for SourceSpec {
    fn default() -> Self {
        SourceSpec::Constant { value: 0.0 }
    }
}

/// Boundary datum φ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TraceSpec {
    /// φ(x) = a·x + b
    Affine {
        #[serde(default)]
        a: [f64; 2],
        #[serde(default)]
        b: f64,
    },
    Named {
        name: String,
        /// Boundary point nearest to this location is the trace's centre γ₀;
        /// defaults to the first vertex of the boundary loop.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        anchor: Option<[f64; 2]>,
        #[serde(default = "one")]
        scale: f64,
    },
    Csv {
        file: PathBuf,
    },
}

impl Default for TraceSpec {
    fn default() -> Self {
        TraceSpec::Affine { a: [0.0, 0.0], b: 0.0 }
    }
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Schedule {
    pub k: Vec<usize>,
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule { k: vec![4, 16, 64, 256] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Relative energy decrease over the solver window.
    pub tol_rel: f64,
    pub tol_lip: f64,
    pub tol_theta: f64,
    pub tol_area: f64,
    pub tol_energy: f64,
    pub tol_comparison: f64,
    /// Oracle threshold on f − f** during surgery.
    pub tol_gap: f64,
    /// Threshold on f − f** for grid-based component detection.
    pub tol_detect: f64,
    /// Allowed relative spread of the worst Lipschitz ratio across the
    /// schedule beyond what the change of ‖u_k‖∞ explains.
    pub tol_invariance: f64,
    /// Gradient agreement between two solves, per triangle.
    pub tol_agreement: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            tol_rel: 1e-12,
            tol_lip: 1e-9,
            tol_theta: 1e-9,
            tol_area: 0.01,
            tol_energy: 1e-6,
            tol_comparison: 1e-6,
            tol_gap: 1e-6,
            tol_detect: 2e-3,
            tol_invariance: 0.05,
            tol_agreement: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineFlags {
    pub check_only: bool,
    pub convex: bool,
    pub nonconvex: bool,
}

impl Default for PipelineFlags {
    fn default() -> Self {
        PipelineFlags { check_only: false, convex: true, nonconvex: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Checks {
    /// Radius for the uniform convexity test; defaults to the mesh diameter.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub convexity_radius: Option<f64>,
    pub convexity_samples: usize,
    /// Slope bound M for the LBSC test.
    pub lbsc_rank: f64,
    /// Half-width of the box where the structural hypotheses are sampled.
    pub hypothesis_box: f64,
    pub hypothesis_samples: usize,
    /// Half-width of the box handed to the smoothing operator.
    pub smoothing_box: f64,
    /// Growth f ≥ c|ξ|^p for the boundary Hölder check; skipped when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub holder: Option<HolderSpec>,
    /// Re-solve the original functional from a second initial guess and
    /// compare gradients outside the ball of radius r+1.
    pub gradient_agreement: bool,
}

impl Default for Checks {
    fn default() -> Self {
        Checks {
            convexity_radius: None,
            convexity_samples: 256,
            lbsc_rank: 1e3,
            hypothesis_box: 4.0,
            hypothesis_samples: 4000,
            smoothing_box: 4.0,
            holder: None,
            gradient_agreement: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HolderSpec {
    pub p: f64,
    pub c: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSpec {
    pub max_iters: usize,
    pub window: usize,
    pub residual_tol: f64,
}

impl Default for SolverSpec {
    fn default() -> Self {
        let d = SolverOptions::default();
        SolverSpec { max_iters: d.max_iters, window: d.window, residual_tol: d.residual_tol }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RepairSpec {
    pub max_passes: usize,
    pub density_rings: usize,
    pub tol_claim: f64,
}

impl Default for RepairSpec {
    fn default() -> Self {
        let d = RepairParams::default();
        RepairSpec { max_passes: d.max_passes, density_rings: d.density_rings, tol_claim: d.tol_claim }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub domain: DomainSpec,
    pub lagrangian: LagrangianSpec,
    #[serde(default)]
    pub g: SourceSpec,
    #[serde(default)]
    pub phi: TraceSpec,
    #[serde(default)]
    pub schedule: Schedule,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default = "one")]
    pub c_sobolev: f64,
    #[serde(default)]
    pub pipeline: PipelineFlags,
    #[serde(default)]
    pub checks: Checks,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub repair: RepairSpec,
    /// Directory against which relative CSV paths are resolved.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

pub const NAMED_SOURCES: &[(&str, &str)] = &[
    ("one", "g = 1"),
    ("radial", "g = |x|^2"),
    ("bump", "g = max(0, 1 - |x|^2)"),
    ("ripple", "g = sin(pi x) sin(pi y)"),
    ("slope", "g = x (changes sign)"),
];

pub const NAMED_TRACES: &[(&str, &str)] = &[
    ("zero", "phi = 0"),
    ("bowl", "phi = |x - g0|^2"),
    ("spike", "phi = -sqrt(|x - g0|)"),
    ("wave", "phi = cos(3 theta) about the domain centroid"),
];

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Scenario> {
        let s: Scenario = toml::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Scenario> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Scenario(format!("cannot read {}: {e}", path.display())))?;
        let mut s = Scenario::from_toml(&text)?;
        s.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        s.lagrangian.file = s.lagrangian.file.take().map(|f| s.resolve(&f));
        Ok(s)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(Error::Scenario("name must not be empty".into()));
        }
        self.domain.validate()?;
        if !catalog_entries().iter().any(|e| e.name == self.lagrangian.name) {
            return Err(Error::UnknownCatalog(self.lagrangian.name.clone()));
        }
        if let SourceSpec::Named { name, .. } = &self.g {
            if !NAMED_SOURCES.iter().any(|(n, _)| n == name) {
                return Err(Error::UnknownCatalog(format!("g field {name}")));
            }
        }
        if let TraceSpec::Named { name, .. } = &self.phi {
            if !NAMED_TRACES.iter().any(|(n, _)| n == name) {
                return Err(Error::UnknownCatalog(format!("trace {name}")));
            }
        }
        SmoothingSchedule::new(self.schedule.k.clone())?;
        let t = &self.tolerances;
        let named = [
            ("tol_rel", t.tol_rel),
            ("tol_lip", t.tol_lip),
            ("tol_theta", t.tol_theta),
            ("tol_area", t.tol_area),
            ("tol_energy", t.tol_energy),
            ("tol_comparison", t.tol_comparison),
            ("tol_gap", t.tol_gap),
            ("tol_detect", t.tol_detect),
            ("tol_invariance", t.tol_invariance),
            ("tol_agreement", t.tol_agreement),
            ("c_sobolev", self.c_sobolev),
            ("lbsc_rank", self.checks.lbsc_rank),
            ("hypothesis_box", self.checks.hypothesis_box),
            ("smoothing_box", self.checks.smoothing_box),
        ];
        if let Some((n, v)) = named.iter().find(|(_, v)| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::Scenario(format!("{n} must be positive, got {v}")));
        }
        if self.pipeline.convex && self.pipeline.nonconvex {
            return Err(Error::Scenario("choose either the convex or the nonconvex pipeline".into()));
        }
        Ok(())
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            max_iters: self.solver.max_iters,
            tol_rel: self.tolerances.tol_rel,
            window: self.solver.window,
            residual_tol: self.solver.residual_tol,
        }
    }

    pub fn repair_params(&self) -> RepairParams {
        RepairParams {
            tol_gap: self.tolerances.tol_gap,
            tol_area: self.tolerances.tol_area,
            tol_energy: self.tolerances.tol_energy,
            tol_claim: self.repair.tol_claim,
            max_passes: self.repair.max_passes,
            density_rings: self.repair.density_rings,
            ..RepairParams::default()
        }
    }

    /// Per-vertex samples of g.
    pub fn source_values(&self, mesh: &Mesh) -> Result<Vec<f64>> {
        match &self.g {
            SourceSpec::Constant { value } => Ok(vec![*value; mesh.n_vertices()]),
            SourceSpec::Named { name, scale } => {
                let field = |p: Vec2| -> f64 {
                    match name.as_str() {
                        "one" => 1.0,
                        "radial" => p.norm2(),
                        "bump" => (1.0 - p.norm2()).max(0.0),
                        "ripple" => (std::f64::consts::PI * p.x).sin() * (std::f64::consts::PI * p.y).sin(),
                        _ => p.x,
                    }
                };
                Ok(mesh.vertices.iter().map(|&p| scale * field(p)).collect())
            }
            SourceSpec::Csv { file } => {
                let rows = read_samples(&self.resolve(file))?;
                Ok(mesh.vertices.iter().map(|&p| nearest(&rows, p)).collect())
            }
        }
    }

    /// φ sampled along the boundary loop.
    pub fn trace_values(&self, mesh: &Mesh) -> Result<Vec<f64>> {
        let pts = mesh.boundary_points();
        match &self.phi {
            TraceSpec::Affine { a, b } => {
                let a = Vec2::from(*a);
                Ok(pts.iter().map(|p| a.dot(*p) + b).collect())
            }
            TraceSpec::Named { name, anchor, scale } => {
                let g0 = match anchor {
                    Some(a) => {
                        let a = Vec2::from(*a);
                        *pts.iter().min_by(|p, q| p.dist(a).total_cmp(&q.dist(a))).expect("nonempty boundary")
                    }
                    None => pts[0],
                };
                let c = mesh.centroid();
                let field = |p: Vec2| -> f64 {
                    match name.as_str() {
                        "zero" => 0.0,
                        "bowl" => (p - g0).norm2(),
                        "spike" => -(p - g0).norm().sqrt(),
                        _ => {
                            let d = p - c;
                            (3.0 * d.y.atan2(d.x)).cos()
                        }
                    }
                };
                Ok(pts.iter().map(|&p| scale * field(p)).collect())
            }
            TraceSpec::Csv { file } => {
                let rows = read_samples(&self.resolve(file))?;
                Ok(pts.iter().map(|&p| nearest(&rows, p)).collect())
            }
        }
    }

    /// Checks that the Lagrangian can be built (catalog lookup, tabulated file).
    pub fn build_lagrangian(&self) -> Result<crate::lagrangian::SharedLagrangian> {
        build(&self.lagrangian)
    }
}

fn read_samples(path: &Path) -> Result<Vec<(Vec2, f64)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| Error::Scenario(format!("cannot read {}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Scenario(format!("{}: {e}", path.display())))?;
        let parse = |i: usize| rec.get(i).and_then(|s| s.trim().parse::<f64>().ok());
        match (parse(0), parse(1), parse(2)) {
            (Some(x), Some(y), Some(v)) => rows.push((Vec2::new(x, y), v)),
            _ if rows.is_empty() => continue,
            _ => return Err(Error::Scenario(format!("{}: malformed row {:?}", path.display(), rec))),
        }
    }
    if rows.is_empty() {
        return Err(Error::Scenario(format!("{} has no samples", path.display())));
    }
    Ok(rows)
}

fn nearest(rows: &[(Vec2, f64)], p: Vec2) -> f64 {
    rows.iter().min_by(|a, b| a.0.dist(p).total_cmp(&b.0.dist(p))).map(|r| r.1).unwrap_or(0.0)
}

/// Human-readable listing of everything a scenario can reference by name.
pub fn list_catalog() -> String {
    let mut out = String::from("lagrangians:\n");
    for e in catalog_entries() {
        out.push_str(&format!("  {:<12} {}  [{}]\n", e.name, e.formula, e.params));
    }
    out.push_str("traces (phi, kind = \"named\"):\n");
    for (n, d) in NAMED_TRACES {
        out.push_str(&format!("  {n:<12} {d}\n"));
    }
    out.push_str("  (also kind = \"affine\" with a, b and kind = \"csv\" with file)\n");
    out.push_str("source fields (g, kind = \"named\"):\n");
    for (n, d) in NAMED_SOURCES {
        out.push_str(&format!("  {n:<12} {d}\n"));
    }
    out.push_str("  (also kind = \"constant\" with value and kind = \"csv\" with file)\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::triangulate;

    const POISSON: &str = r#"
name = "poisson"
[domain]
kind = "disc"
center = [0.0, 0.0]
radius = 1.0
h = 0.1
[lagrangian]
name = "quadratic"
[g]
kind = "constant"
value = 1.0
"#;

    #[test]
    fn minimal_file_takes_documented_defaults() {
        let s = Scenario::from_toml(POISSON).unwrap();
        assert_eq!(s.schedule.k, vec![4, 16, 64, 256]);
        assert_eq!(s.phi, TraceSpec::Affine { a: [0.0, 0.0], b: 0.0 });
        assert_eq!(s.c_sobolev, 1.0);
        assert!(s.pipeline.convex && !s.pipeline.nonconvex);
        assert_eq!(s.tolerances, Tolerances::default());
    }

    #[test]
    fn round_trip_through_toml() {
        let s = Scenario::from_toml(POISSON).unwrap();
        let back = Scenario::from_toml(&s.to_toml()).unwrap();
        assert_eq!(s, back);
    }

    #[test]
    fn unknown_names_and_bad_tolerances_are_rejected() {
        let bad = POISSON.replace("quadratic", "quartic");
        assert!(matches!(Scenario::from_toml(&bad), Err(Error::UnknownCatalog(_))));
        let neg = format!("{POISSON}[tolerances]\ntol_area = -1.0\n");
        assert!(matches!(Scenario::from_toml(&neg), Err(Error::Scenario(_))));
        let typo = format!("{POISSON}[tolerances]\ntol_aera = 0.1\n");
        assert!(Scenario::from_toml(&typo).is_err());
        let trace = format!("{POISSON}[phi]\nkind = \"named\"\nname = \"zigzag\"\n");
        assert!(matches!(Scenario::from_toml(&trace), Err(Error::UnknownCatalog(_))));
    }

    #[test]
    fn traces_and_sources_are_sampled_on_the_mesh() {
        let mut s = Scenario::from_toml(POISSON).unwrap();
        let m = triangulate(&s.domain).unwrap();
        s.phi = TraceSpec::Affine { a: [2.0, -1.0], b: 0.5 };
        let phi = s.trace_values(&m).unwrap();
        for (v, p) in phi.iter().zip(m.boundary_points()) {
            assert!((v - (2.0 * p.x - p.y + 0.5)).abs() < 1e-12);
        }
        s.phi = TraceSpec::Named { name: "spike".into(), anchor: Some([1.0, 0.0]), scale: 1.0 };
        let phi = s.trace_values(&m).unwrap();
        let k = phi.iter().position(|&v| v == 0.0).unwrap();
        assert!(m.boundary_points()[k].dist(Vec2::new(1.0, 0.0)) < 1e-12);
        assert!(phi.iter().all(|&v| v <= 0.0));
        s.g = SourceSpec::Named { name: "bump".into(), scale: 2.0 };
        let g = s.source_values(&m).unwrap();
        assert!(g.iter().all(|&v| (0.0..=2.0).contains(&v)));
    }

    #[test]
    fn csv_fields_use_the_nearest_sample() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("g.csv"), "x,y,value\n-1,0,3\n1,0,5\n").unwrap();
        let text = POISSON.replace("kind = \"constant\"\nvalue = 1.0", "kind = \"csv\"\nfile = \"g.csv\"");
        let path = dir.path().join("s.toml");
        std::fs::write(&path, text).unwrap();
        let s = Scenario::load(&path).unwrap();
        let m = triangulate(&s.domain).unwrap();
        let g = s.source_values(&m).unwrap();
        for (p, v) in m.vertices.iter().zip(&g) {
            if p.x < -1e-9 {
                assert_eq!(*v, 3.0);
            } else if p.x > 1e-9 {
                assert_eq!(*v, 5.0);
            }
        }
    }

    #[test]
    fn listing_names_the_catalog() {
        let l = list_catalog();
        for n in ["torsion", "quadratic", "double_well", "spike"] {
            assert!(l.contains(n));
        }
    }
}
