//! Conjugate-based comparison barriers and the lower Lipschitz barrier.
//!
//! With N = 2 the barrier of slope parameter α is
//! ω_α(x) = (2/α) f*(α(x − x₀)/2). Minimizers satisfy
//! ω_α + c₁ ≤ u ≤ ω_{−α} + c₂ when ‖g‖∞ ≤ α, where the constants are fitted on
//! the boundary against the shifted barrier built from (f − 1)* = f* + 1.

use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::lagrangian::{conjugate, ConjugateGrid, Grid2, Lagrangian};
use crate::mesh::{check_lbsc, LbscReport, Mesh};
use serde::{Deserialize, Serialize};

const PRIMAL_SAMPLES: usize = 401;
const DUAL_SAMPLES: usize = 201;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BarrierField {
    pub omega_plus: Vec<f64>,
    pub omega_minus: Vec<f64>,
    pub c1: f64,
    pub c2: f64,
    pub x0: Vec2,
    pub alpha: f64,
    /// Largest edge difference quotient of the two barriers on the mesh.
    #[serde(rename = "K")]
    pub k_lip: f64,
    /// sup over vertices of max(|ω_α + c₁|, |ω_{−α} + c₂|), a bound for ‖u‖∞.
    pub u0: f64,
}

impl BarrierField {
    pub fn lower(&self, v: usize) -> f64 {
        self.omega_plus[v] + self.c1
    }

    pub fn upper(&self, v: usize) -> f64 {
        self.omega_minus[v] + self.c2
    }
}

/// Dual half-widths needed to evaluate ω_{±α} at every mesh vertex.
pub fn required_dual_box(mesh: &Mesh, alpha: f64, x0: Vec2) -> [f64; 2] {
    let mut need = [0.0f64; 2];
    for p in &mesh.vertices {
        let z = (*p - x0) * (alpha.abs() / 2.0);
        need[0] = need[0].max(z.x.abs());
        need[1] = need[1].max(z.y.abs());
    }
    need
}

/// Samples f* on a dual box large enough for ω_{±α} on `mesh`. The primal box is
/// grown until every dual sample has its maximizer strictly inside it.
pub fn conjugate_for_barriers(f: &dyn Lagrangian, mesh: &Mesh, alpha: f64, x0: Vec2) -> Result<ConjugateGrid> {
    let need = required_dual_box(mesh, alpha, x0);
    let half = need[0].max(need[1]) * 1.05 + 1e-9;
    let dual = Grid2::centered(half, DUAL_SAMPLES);
    let mut b = 1.0;
    while b <= 1e6 {
        let reach = (0..16)
            .map(|i| {
                let t = std::f64::consts::PI * i as f64 / 8.0;
                let d = Vec2::new(t.cos(), t.sin());
                f.gradient(d * b).dot(d)
            })
            .fold(f64::INFINITY, f64::min);
        if reach > std::f64::consts::SQRT_2 * half * 1.1 {
            let fstar = conjugate(f, &Grid2::centered(b, PRIMAL_SAMPLES), &dual)?;
            if fstar.all_finite() {
                return Ok(fstar);
            }
        }
        b *= 2.0;
    }
    Err(Error::Hypothesis(format!(
        "conjugate is not finite on the dual box of half-width {half:.3e}; f does not look superlinear"
    )))
}

/// ω_α at every vertex by bilinear interpolation of the sampled conjugate.
pub fn build_omega(fstar: &ConjugateGrid, alpha: f64, x0: Vec2, mesh: &Mesh) -> Result<Vec<f64>> {
    if alpha == 0.0 || !alpha.is_finite() {
        return Err(Error::InvalidArgument(format!("alpha must be finite and nonzero, got {alpha}")));
    }
    let mut out = Vec::with_capacity(mesh.n_vertices());
    for p in &mesh.vertices {
        let z = (*p - x0) * (alpha / 2.0);
        match fstar.eval(z) {
            Some(v) => out.push(2.0 / alpha * v),
            None => {
                let need = required_dual_box(mesh, alpha, x0);
                return Err(Error::DualBoxTooSmall { need_x: need[0], need_y: need[1] });
            }
        }
    }
    Ok(out)
}

/// c₁ = min_∂Ω (φ − ω̃_α) and c₂ = max_∂Ω (φ − ω̃_{−α}), where ω̃ is built from
/// f* + 1, so ω̃_α = ω_α + 2/α and ω̃_{−α} = ω_{−α} − 2/α.
pub fn fit_constants(omega_plus: &[f64], omega_minus: &[f64], alpha: f64, phi: &[f64], mesh: &Mesh) -> (f64, f64) {
    let shift = 2.0 / alpha.abs();
    let mut c1 = f64::INFINITY;
    let mut c2 = f64::NEG_INFINITY;
    for (k, &v) in mesh.boundary_loop.iter().enumerate() {
        c1 = c1.min(phi[k] - (omega_plus[v] + shift));
        c2 = c2.max(phi[k] - (omega_minus[v] - shift));
    }
    (c1, c2)
}

fn edge_lipschitz(mesh: &Mesh, vals: &[f64]) -> f64 {
    mesh.edges()
        .iter()
        .map(|&(a, b)| (vals[a] - vals[b]).abs() / (mesh.vertices[a] - mesh.vertices[b]).norm())
        .fold(0.0, f64::max)
}

/// Barrier pair for ‖g‖∞ ≤ α with α = ‖g‖∞ + 1e−12. `x0` defaults to the
/// domain centroid.
pub fn build_barriers(f: &dyn Lagrangian, g: &[f64], phi: &[f64], mesh: &Mesh, x0: Option<Vec2>) -> Result<BarrierField> {
    if phi.len() != mesh.boundary_loop.len() {
        return Err(Error::InvalidArgument("phi must be sampled on the boundary loop".into()));
    }
    let x0 = x0.unwrap_or_else(|| mesh.centroid());
    let alpha = g.iter().fold(0.0f64, |m, v| m.max(v.abs())) + 1e-12;
    let fstar = conjugate_for_barriers(f, mesh, alpha, x0)?;
    let omega_plus = build_omega(&fstar, alpha, x0, mesh)?;
    let omega_minus = build_omega(&fstar, -alpha, x0, mesh)?;
    let (c1, c2) = fit_constants(&omega_plus, &omega_minus, alpha, phi, mesh);
    let k_lip = edge_lipschitz(mesh, &omega_plus).max(edge_lipschitz(mesh, &omega_minus));
    let u0 = omega_plus
        .iter()
        .zip(&omega_minus)
        .map(|(p, m)| (p + c1).abs().max((m + c2).abs()))
        .fold(0.0, f64::max);
    Ok(BarrierField { omega_plus, omega_minus, c1, c2, x0, alpha, k_lip, u0 })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LowerBarrier {
    pub ell: Vec<f64>,
    /// Largest slope norm among the supporting planes.
    #[serde(rename = "L")]
    pub rank: f64,
    /// Boundary points and slopes of the supporting planes.
    pub anchors: Vec<(Vec2, f64, Vec2)>,
}

impl LowerBarrier {
    /// max over boundary samples γ of φ(γ) + z_γ·(x − γ)
    pub fn eval(&self, x: Vec2) -> f64 {
        self.anchors.iter().map(|(g, p, z)| p + z.dot(x - *g)).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Supremum of the supporting affine minorants of φ. The planes are recomputed
/// at the report's minimal rank so that ℓ is as flat as the data allow.
pub fn build_lower_barrier(lbsc: &LbscReport, phi: &[f64], mesh: &Mesh) -> Result<LowerBarrier> {
    let first_bad = || lbsc.offending.first().copied().unwrap_or(0);
    if !lbsc.pass {
        return Err(Error::LbscFailed { index: first_bad(), minimal: lbsc.minimal_rank });
    }
    let Some(m) = lbsc.minimal_rank else {
        return Err(Error::LbscFailed { index: first_bad(), minimal: None });
    };
    let tight = check_lbsc(mesh, phi, m);
    let report = if tight.pass { &tight } else { lbsc };
    let pts = mesh.boundary_points();
    let anchors: Vec<(Vec2, f64, Vec2)> = report
        .slopes
        .iter()
        .enumerate()
        .map(|(k, z)| (pts[k], phi[k], z.unwrap_or(Vec2::ZERO)))
        .collect();
    let rank = anchors.iter().map(|a| a.2.norm()).fold(0.0, f64::max);
    let mut lb = LowerBarrier { ell: Vec::new(), rank, anchors };
    lb.ell = mesh.vertices.iter().map(|&x| lb.eval(x)).collect();
    Ok(lb)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonReport {
    /// u − (ω_α + c₁) per vertex
    pub lower_margin: Vec<f64>,
    /// (ω_{−α} + c₂) − u per vertex
    pub upper_margin: Vec<f64>,
    /// u − ℓ per vertex, when ℓ was supplied
    pub ell_margin: Option<Vec<f64>>,
    pub min_lower: f64,
    pub min_upper: f64,
    pub min_ell: Option<f64>,
    pub tolerance: f64,
    pub pass: bool,
}

pub fn verify_comparison(u: &[f64], barriers: &BarrierField, ell: Option<&LowerBarrier>, tolerance: f64) -> ComparisonReport {
    let n = u.len();
    let lower_margin: Vec<f64> = (0..n).map(|v| u[v] - barriers.lower(v)).collect();
    let upper_margin: Vec<f64> = (0..n).map(|v| barriers.upper(v) - u[v]).collect();
    let ell_margin = ell.map(|l| u.iter().zip(&l.ell).map(|(u, l)| u - l).collect::<Vec<f64>>());
    let min = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
    let min_lower = min(&lower_margin);
    let min_upper = min(&upper_margin);
    let min_ell = ell_margin.as_deref().map(min);
    let pass = min_lower >= -tolerance && min_upper >= -tolerance && min_ell.is_none_or(|m| m >= -tolerance);
    ComparisonReport { lower_margin, upper_margin, ell_margin, min_lower, min_upper, min_ell, tolerance, pass }
}
