//! Run reports and the on-disk output bundle.

use crate::barriers::{BarrierField, ComparisonReport, LowerBarrier};
use crate::certify::{HolderCertificate, LipschitzCertificate, LipschitzConstants, ThetaProfile};
use crate::error::Result;
use crate::geom::Vec2;
use crate::lagrangian::{ConjugateGrid, ConvexityReport};
use crate::mesh::{LbscReport, Mesh, UniformConvexityReport};
use crate::nonconvex::{NonconvexSet, PassLog, RepairReport, SurgeryPatch};
use crate::scenario::Scenario;
use crate::smoothing::SmoothingBand;
use crate::solver::{SequenceReport, SolveResult};
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    Hypothesis,
    Nonconvergence,
    Certificate,
    Error,
}

impl FailureKind {
    pub fn exit_code(self) -> i32 {
        match self {
            FailureKind::Error => 1,
            FailureKind::Hypothesis => 2,
            FailureKind::Nonconvergence => 3,
            FailureKind::Certificate => 4,
        }
    }

    fn priority(self) -> u8 {
        match self {
            FailureKind::Error => 0,
            FailureKind::Hypothesis => 1,
            FailureKind::Nonconvergence => 2,
            FailureKind::Certificate => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub kind: FailureKind,
    pub check: String,
    pub message: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeshSummary {
    pub n_vertices: usize,
    pub n_triangles: usize,
    pub n_boundary: usize,
    pub h: f64,
    pub max_edge: f64,
    pub diam: f64,
    pub area: f64,
}

impl MeshSummary {
    pub fn of(m: &Mesh) -> Self {
        MeshSummary {
            n_vertices: m.n_vertices(),
            n_triangles: m.n_triangles(),
            n_boundary: m.boundary_loop.len(),
            h: m.h,
            max_edge: m.max_edge_length(),
            diam: m.diam,
            area: m.area,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LbscSummary {
    pub rank: f64,
    pub minimal_rank: Option<f64>,
    pub worst_violation: f64,
    pub n_offending: usize,
    /// First offending boundary positions and their coordinates.
    pub offending: Vec<(usize, Vec2)>,
    pub pass: bool,
}

impl LbscSummary {
    pub fn of(r: &LbscReport, mesh: &Mesh) -> Self {
        LbscSummary {
            rank: r.rank,
            minimal_rank: r.minimal_rank,
            worst_violation: r.worst_violation,
            n_offending: r.offending.len(),
            offending: r.offending.iter().take(16).map(|&k| (k, mesh.vertices[mesh.boundary_loop[k]])).collect(),
            pass: r.pass,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComponentSummary {
    pub index: usize,
    pub hull_area: f64,
    pub hull_vertices: usize,
    pub interior: Vec2,
    pub separation: Option<f64>,
}

impl ComponentSummary {
    pub fn of(s: &NonconvexSet) -> Self {
        ComponentSummary {
            index: s.index,
            hull_area: s.polygon.area(),
            hull_vertices: s.polygon.vertices.len(),
            interior: s.interior,
            separation: s.separation.is_finite().then_some(s.separation),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChecksReport {
    pub uniform_convexity: UniformConvexityReport,
    pub lbsc: LbscSummary,
    /// Which function the structural hypotheses were checked on: "f" or "f**".
    pub hypotheses_on: String,
    pub hypotheses: Option<ConvexityReport>,
    pub components: Option<Vec<ComponentSummary>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConjugateSummary {
    pub primal_half: f64,
    pub primal_n: usize,
    pub dual_half: [f64; 2],
    pub dual_n: [usize; 2],
    pub all_finite: bool,
    pub max_slope: f64,
}

impl ConjugateSummary {
    pub fn of(c: &ConjugateGrid, primal_half: f64, primal_n: usize) -> Self {
        ConjugateSummary {
            primal_half,
            primal_n,
            dual_half: c.grid.hi(),
            dual_n: c.grid.n,
            all_finite: c.all_finite(),
            max_slope: c.max_slope(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveSummary {
    pub iterations: usize,
    pub converged: bool,
    pub energy: f64,
    pub residual: f64,
    pub rel_decrease_last: f64,
    pub sup_norm: f64,
}

impl SolveSummary {
    pub fn of(r: &SolveResult) -> Self {
        SolveSummary {
            iterations: r.iterations,
            converged: r.converged,
            energy: r.energy,
            residual: r.residual,
            rel_decrease_last: r.rel_decrease_last,
            sup_norm: r.sup_norm,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepSummary {
    pub k: usize,
    pub band: SmoothingBand,
    pub g_dev: f64,
    pub solve: SolveSummary,
    /// I(u_k) with the original f and g.
    pub true_energy: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SequenceSummary {
    pub steps: Vec<StepSummary>,
    pub truncated_at: Option<usize>,
    /// Largest increase of I(u_k) between consecutive steps (≤ 0 when monotone).
    pub max_increase: f64,
    /// I(u_first) − I(u_last)
    pub total_decrease: f64,
    /// |I(u_last) − I(u_second_to_last)|
    pub final_change: f64,
}

impl SequenceSummary {
    pub fn of(r: &SequenceReport) -> Self {
        let e = r.true_energies();
        let max_increase = e.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
        let n = e.len();
        SequenceSummary {
            steps: r
                .steps
                .iter()
                .map(|s| StepSummary {
                    k: s.k,
                    band: s.band,
                    g_dev: s.g_dev,
                    solve: SolveSummary::of(&s.result),
                    true_energy: s.true_energy,
                })
                .collect(),
            truncated_at: r.truncated_at,
            max_increase: if n > 1 { max_increase } else { 0.0 },
            total_decrease: if n > 0 { e[0] - e[n - 1] } else { 0.0 },
            final_change: if n > 1 { (e[n - 1] - e[n - 2]).abs() } else { 0.0 },
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BarrierSummary {
    pub alpha: f64,
    pub x0: Vec2,
    pub c1: f64,
    pub c2: f64,
    #[serde(rename = "K")]
    pub k_lip: f64,
    #[serde(rename = "U0")]
    pub u0: f64,
    /// Slope bound of the lower barrier ℓ.
    pub ell_rank: Option<f64>,
}

impl BarrierSummary {
    pub fn of(b: &BarrierField, ell: Option<&LowerBarrier>) -> Self {
        BarrierSummary { alpha: b.alpha, x0: b.x0, c1: b.c1, c2: b.c2, k_lip: b.k_lip, u0: b.u0, ell_rank: ell.map(|l| l.rank) }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonSummary {
    pub k: usize,
    pub min_lower: f64,
    pub min_upper: f64,
    pub min_ell: Option<f64>,
    /// Whether the ℓ margin counts toward `pass`. Supporting planes are
    /// subsolutions only when g ≤ 0, so for other sources the ℓ margin is
    /// reported but not enforced.
    pub ell_enforced: bool,
    pub tolerance: f64,
    pub pass: bool,
}

impl ComparisonSummary {
    pub fn of(k: usize, r: &ComparisonReport, ell_enforced: bool) -> Self {
        let sandwich = r.min_lower >= -r.tolerance && r.min_upper >= -r.tolerance;
        ComparisonSummary {
            k,
            min_lower: r.min_lower,
            min_upper: r.min_upper,
            min_ell: r.min_ell,
            ell_enforced,
            tolerance: r.tolerance,
            pass: if ell_enforced { r.pass } else { sandwich },
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThetaSummary {
    pub z: Vec2,
    pub vanish_q: Option<f64>,
    pub q0: f64,
    pub pass: bool,
}

impl ThetaSummary {
    pub fn of(t: &ThetaProfile) -> Self {
        ThetaSummary { z: t.z, vanish_q: t.vanish_q, q0: t.q0, pass: t.pass }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LipschitzSummary {
    /// Schedule index k, or 0 for a field that is not part of a sequence.
    pub k: usize,
    pub r: f64,
    pub eps: f64,
    pub g_norm: f64,
    pub c_sobolev: f64,
    pub u_sup: f64,
    pub constants: LipschitzConstants,
    pub constants_quarter: LipschitzConstants,
    pub worst_ratio: f64,
    pub worst_triangle: usize,
    pub worst_ratio_quarter: f64,
    pub pass: bool,
    pub pass_quarter: bool,
    pub theta: Vec<ThetaSummary>,
    pub theta_pass: bool,
}

impl LipschitzSummary {
    pub fn of(k: usize, r: f64, eps: f64, g_norm: f64, c: &LipschitzCertificate) -> Self {
        LipschitzSummary {
            k,
            r,
            eps,
            g_norm,
            c_sobolev: c.c_sobolev,
            u_sup: c.u_sup,
            constants: c.constants,
            constants_quarter: c.constants_quarter,
            worst_ratio: c.worst_ratio,
            worst_triangle: c.worst_triangle,
            worst_ratio_quarter: c.worst_ratio_quarter,
            pass: c.pass,
            pass_quarter: c.pass_quarter,
            theta: c.theta.iter().map(ThetaSummary::of).collect(),
            theta_pass: c.theta_pass,
        }
    }
}

/// Spread of the worst Lipschitz ratio over the schedule, set against the
/// spread that the change of ‖u_k‖∞ alone would produce through Q.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InvarianceSummary {
    pub worst_ratios: Vec<f64>,
    pub u_sups: Vec<f64>,
    /// (max − min)/max of the worst ratios
    pub ratio_spread: f64,
    /// (max − min)/max of ‖u_k‖∞
    pub u_spread: f64,
    /// (max − min)/min of Q_k
    pub q_spread: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AgreementSummary {
    pub threshold: f64,
    pub n_compared: usize,
    pub max_difference: f64,
    pub first: SolveSummary,
    pub second: SolveSummary,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RepairSummary {
    pub sign: f64,
    pub n_components: usize,
    pub n_patches: usize,
    pub passes: Vec<PassLog>,
    pub offending_initial: f64,
    pub offending_final: f64,
    pub relaxed_initial: f64,
    pub relaxed_final: f64,
    pub true_initial: f64,
    pub true_final: f64,
    pub outside_gap: f64,
    pub min_source_margin: Option<f64>,
    pub min_density_slack: Option<f64>,
    pub hist_edges: Vec<f64>,
    pub hist_before: Vec<f64>,
    pub hist_after: Vec<f64>,
    pub pass_area: bool,
    pub pass_energy: bool,
    pub pass_outside: bool,
    pub complete: bool,
}

impl RepairSummary {
    pub fn of(r: &RepairReport) -> Self {
        let finite = |v: f64| v.is_finite().then_some(v);
        RepairSummary {
            sign: r.sign,
            n_components: r.n_components,
            n_patches: r.patches.len(),
            passes: r.passes.clone(),
            offending_initial: r.offending_initial,
            offending_final: r.offending_final,
            relaxed_initial: r.relaxed_initial,
            relaxed_final: r.relaxed_final,
            true_initial: r.true_initial,
            true_final: r.true_final,
            outside_gap: r.outside_gap,
            min_source_margin: finite(r.min_source_margin),
            min_density_slack: finite(r.min_density_slack),
            hist_edges: r.hist_edges.clone(),
            hist_before: r.hist_before.clone(),
            hist_after: r.hist_after.clone(),
            pass_area: r.pass_area,
            pass_energy: r.pass_energy,
            pass_outside: r.pass_outside,
            complete: r.complete,
        }
    }
}

/// Deterministic part of a run: identical inputs give byte-identical JSON.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: Scenario,
    pub stage: String,
    pub mesh: MeshSummary,
    pub checks: Option<ChecksReport>,
    pub conjugate: Option<ConjugateSummary>,
    pub sequence: Option<SequenceSummary>,
    pub relaxed_solve: Option<SolveSummary>,
    pub barriers: Option<BarrierSummary>,
    pub comparison: Vec<ComparisonSummary>,
    pub lipschitz: Vec<LipschitzSummary>,
    pub invariance: Option<InvarianceSummary>,
    pub holder: Option<HolderCertificate>,
    pub agreement: Option<AgreementSummary>,
    pub repair: Option<RepairSummary>,
    pub failures: Vec<Failure>,
    pub exit_code: i32,
}

impl RunReport {
    pub fn new(scenario: &Scenario, stage: &str, mesh: &Mesh) -> Self {
        RunReport {
            scenario: scenario.clone(),
            stage: stage.to_string(),
            mesh: MeshSummary::of(mesh),
            checks: None,
            conjugate: None,
            sequence: None,
            relaxed_solve: None,
            barriers: None,
            comparison: Vec::new(),
            lipschitz: Vec::new(),
            invariance: None,
            holder: None,
            agreement: None,
            repair: None,
            failures: Vec::new(),
            exit_code: 0,
        }
    }

    pub fn fail(&mut self, kind: FailureKind, check: &str, message: impl Into<String>) {
        self.failures.push(Failure { kind, check: check.to_string(), message: message.into() });
        self.exit_code = self
            .failures
            .iter()
            .map(|f| f.kind)
            .min_by_key(|k| k.priority())
            .map_or(0, FailureKind::exit_code);
    }

    pub fn has(&self, kind: FailureKind) -> bool {
        self.failures.iter().any(|f| f.kind == kind)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Per-vertex and per-triangle arrays that go to CSV rather than JSON.
#[derive(Debug, Clone, Default)]
pub struct Artifacts {
    pub u: Option<Vec<f64>>,
    pub u_repaired: Option<Vec<f64>>,
    pub grad: Option<Vec<Vec2>>,
    /// |∇u|·dist/Q per triangle.
    pub ratio: Option<Vec<f64>>,
    pub theta: Vec<ThetaProfile>,
    pub patches: Vec<SurgeryPatch>,
    pub conjugate: Option<ConjugateGrid>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Metadata {
    pub tool: String,
    pub version: String,
    pub started_unix: u64,
    pub elapsed_seconds: f64,
    pub scenario_file: Option<String>,
}

/// Writes report.json, metadata.json, mesh.csv and whichever of u.csv,
/// grad.csv, theta_<i>.csv, patches.jsonl, conjugate.csv apply.
pub fn write_bundle(dir: &Path, mesh: &Mesh, report: &RunReport, art: &Artifacts, meta: &Metadata) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("report.json"), report.to_json() + "\n")?;
    std::fs::write(dir.join("metadata.json"), serde_json::to_string_pretty(meta)? + "\n")?;
    mesh.write_csv(std::io::BufWriter::new(std::fs::File::create(dir.join("mesh.csv"))?))?;

    if let Some(u) = &art.u {
        let mut w = std::io::BufWriter::new(std::fs::File::create(dir.join("u.csv"))?);
        match &art.u_repaired {
            Some(r) => {
                writeln!(w, "vertex,x,y,u,u_repaired")?;
                for (i, p) in mesh.vertices.iter().enumerate() {
                    writeln!(w, "{i},{},{},{},{}", p.x, p.y, u[i], r[i])?;
                }
            }
            None => {
                writeln!(w, "vertex,x,y,u")?;
                for (i, p) in mesh.vertices.iter().enumerate() {
                    writeln!(w, "{i},{},{},{}", p.x, p.y, u[i])?;
                }
            }
        }
    }
    if let Some(grad) = &art.grad {
        let mut w = std::io::BufWriter::new(std::fs::File::create(dir.join("grad.csv"))?);
        writeln!(w, "triangle,bx,by,gx,gy,norm,dist,ratio")?;
        for (t, g) in grad.iter().enumerate() {
            let b = mesh.barycenter(t);
            let ratio = art.ratio.as_ref().map_or(String::new(), |r| r[t].to_string());
            writeln!(w, "{t},{},{},{},{},{},{},{ratio}", b.x, b.y, g.x, g.y, g.norm(), mesh.distance_to_boundary(b))?;
        }
    }
    for (i, th) in art.theta.iter().enumerate() {
        let mut w = std::io::BufWriter::new(std::fs::File::create(dir.join(format!("theta_{i}.csv")))?);
        writeln!(w, "# anchor z = ({}, {}), q0 = {}", th.z.x, th.z.y, th.q0)?;
        writeln!(w, "q,theta")?;
        for (q, v) in th.q.iter().zip(&th.theta) {
            writeln!(w, "{q},{v}")?;
        }
    }
    if !art.patches.is_empty() || report.repair.is_some() {
        let mut w = std::io::BufWriter::new(std::fs::File::create(dir.join("patches.jsonl"))?);
        for p in &art.patches {
            writeln!(w, "{}", serde_json::to_string(p)?)?;
        }
    }
    if let Some(c) = &art.conjugate {
        let mut w = std::io::BufWriter::new(std::fs::File::create(dir.join("conjugate.csv"))?);
        writeln!(w, "zeta_x,zeta_y,value")?;
        for (k, p) in c.grid.points() {
            writeln!(w, "{},{},{}", p.x, p.y, c.values[k])?;
        }
    }
    Ok(())
}
