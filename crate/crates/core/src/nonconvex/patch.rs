use super::components::{GapOracle, NonconvexSet};
use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::lagrangian::Lagrangian;
use crate::mesh::Mesh;
use crate::solver::gradient_field;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SimplexPoint {
    /// Boundary point of S − ∇u(x̄).
    pub xi: Vec2,
    pub lambda: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SurgeryPatch {
    pub triangle: usize,
    pub center: Vec2,
    pub radius: f64,
    pub component: usize,
    /// ∇u(x̄) and u(x̄)
    pub slope: Vec2,
    pub value: f64,
    pub delta: f64,
    pub delta_prime: f64,
    /// Inradius about 0 of the simplex hull; replaces δ wherever v ≥ δ|x| is used.
    pub delta_eff: f64,
    pub simplex: [SimplexPoint; 3],
    /// +1: v = max_j ξ_j·x and ũ ≤ u; −1: v = min_j ξ_j·x and ũ ≥ u.
    pub sign: f64,
    /// Replaced vertex values (index, w at the vertex).
    pub vertices: Vec<(usize, f64)>,
    /// Triangles touching a replaced vertex.
    pub triangles: Vec<usize>,
    /// Lumped area of the replaced vertices over |B_ρ|.
    pub density_ratio: f64,
    /// (2δ_eff/(9δ′))²
    pub density_bound: f64,
    pub energy: EnergyDecrease,
    /// Offending area inside the support removed by this patch.
    pub offending_removed: f64,
    /// (g(x̄)/2)(δ_eff/6)ρ·|B_{(δ_eff/δ′)ρ/9}|
    pub source_margin_predicted: f64,
}

impl SurgeryPatch {
    /// w_ρ(x) = v(x − x̄) + u(x̄) + ∇u(x̄)·(x − x̄) − sign·δ_eff·ρ/3
    pub fn w(&self, x: Vec2) -> f64 {
        let y = x - self.center;
        let dots = self.simplex.map(|s| s.xi.dot(y));
        let v = if self.sign > 0.0 {
            dots.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        } else {
            dots.iter().copied().fold(f64::INFINITY, f64::min)
        };
        v + self.value + self.slope.dot(y) - self.sign * self.delta_eff * self.radius / 3.0
    }
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct EnergyDecrease {
    /// ∫_E f**(∇u) and ∫_E f**(∇ũ)
    pub relaxed_before: f64,
    pub relaxed_after: f64,
    /// ∫_E g·(u − ũ), positive when the source term strictly decreases.
    pub source_margin: f64,
    /// Total decrease of I** over the support.
    pub decrease: f64,
    pub strict: bool,
}

/// Compares the relaxed energy of `u` and `u_new` over the triangles where
/// they differ. The relaxed term must not grow by more than `tol`.
pub fn verify_energy_decrease(
    u: &[f64],
    u_new: &[f64],
    fss: &dyn Lagrangian,
    g: &[f64],
    mesh: &Mesh,
    tol: f64,
) -> Result<EnergyDecrease> {
    let gu = gradient_field(mesh, u);
    let gn = gradient_field(mesh, u_new);
    let mut rep = EnergyDecrease::default();
    let mut changed = Vec::new();
    let mut src_old = 0.0;
    let mut src_new = 0.0;
    for (t, tri) in mesh.triangles.iter().enumerate() {
        if tri.iter().all(|&v| u[v] == u_new[v]) {
            continue;
        }
        let a = mesh.triangle_area(t);
        let before = a * fss.value(gu[t]);
        let after = a * fss.value(gn[t]);
        rep.relaxed_before += before;
        rep.relaxed_after += after;
        if after > before + tol {
            changed.push(t);
        }
        for &v in tri {
            src_old += a / 3.0 * g[v] * u[v];
            src_new += a / 3.0 * g[v] * u_new[v];
        }
    }
    let excess = rep.relaxed_after - rep.relaxed_before;
    if excess > tol {
        return Err(Error::EnergyIncreased { triangles: changed, excess });
    }
    rep.source_margin = src_old - src_new;
    rep.decrease = (rep.relaxed_before + src_old) - (rep.relaxed_after + src_new);
    rep.strict = rep.source_margin > 0.0;
    Ok(rep)
}

pub fn apply_patch(u: &[f64], patch: &SurgeryPatch) -> Vec<f64> {
    let mut out = u.to_vec();
    for &(v, w) in &patch.vertices {
        out[v] = w;
    }
    out
}

struct Simplex {
    points: [SimplexPoint; 3],
    delta_eff: f64,
}

/// Three rays at 120° from ∇u(x̄); the rotation maximizing the inradius about 0
/// of the triangle of exit points is kept.
fn choose_simplex(oracle: &GapOracle, p: Vec2, delta: f64, rotations: usize) -> Option<Simplex> {
    let mut best: Option<Simplex> = None;
    for r in 0..rotations {
        let theta0 = 2.0 * PI / 3.0 * r as f64 / rotations as f64;
        let xi: [Vec2; 3] = std::array::from_fn(|j| {
            let d = Vec2::from_angle(theta0 + 2.0 * PI / 3.0 * j as f64);
            d * oracle.ray_exit(p, d, delta.max(1e-3))
        });
        // barycentric coordinates of the origin
        let area = (xi[1] - xi[0]).cross(xi[2] - xi[0]);
        if area.abs() < 1e-300 {
            continue;
        }
        let lambda = [xi[1].cross(xi[2]) / area, xi[2].cross(xi[0]) / area, xi[0].cross(xi[1]) / area];
        if lambda.iter().any(|&l| l <= 0.0) {
            continue;
        }
        let inradius = (0..3)
            .map(|j| {
                let (a, b) = (xi[j], xi[(j + 1) % 3]);
                a.cross(b).abs() / (b - a).norm()
            })
            .fold(f64::INFINITY, f64::min);
        if best.as_ref().is_none_or(|b| inradius > b.delta_eff) {
            best = Some(Simplex {
                points: std::array::from_fn(|j| SimplexPoint { xi: xi[j], lambda: lambda[j] }),
                delta_eff: inradius,
            });
        }
    }
    best
}

/// Pyramidal surgery at the barycenter of triangle `t`.
///
/// The radius is the largest ρ = ρ_max·2^{−j} for which, at every vertex of
/// B_ρ(x̄), sign·(u − L) ≤ (δ_eff/2)|x − x̄| and sign·(u − L) ≥ −(δ′/2)|x − x̄|,
/// where L is the linearization at x̄, the replaced vertex set is nonempty, the
/// relaxed energy does not grow, and the source term strictly decreases.
/// Returns `None` when no radius qualifies.
#[allow(clippy::too_many_arguments)]
pub fn build_patch(
    u: &[f64],
    grad: &[Vec2],
    mesh: &Mesh,
    t: usize,
    set: &NonconvexSet,
    oracle: &GapOracle,
    g: &[f64],
    sign: f64,
    tol_claim: f64,
) -> Option<SurgeryPatch> {
    let p = grad[t];
    if !oracle.inside(p) {
        return None;
    }
    let tri = mesh.triangles[t];
    let center = mesh.barycenter(t);
    let value = (u[tri[0]] + u[tri[1]] + u[tri[2]]) / 3.0;
    let g_center = (g[tri[0]] + g[tri[1]] + g[tri[2]]) / 3.0;

    const RAYS: usize = 256;
    let guess = set.polygon.signed_distance(p).max(1e-3);
    let exits: Vec<f64> = (0..RAYS)
        .map(|k| oracle.ray_exit(p, Vec2::from_angle(2.0 * PI * k as f64 / RAYS as f64), guess))
        .collect();
    let delta = exits.iter().copied().fold(f64::INFINITY, f64::min);
    let delta_prime = exits.iter().copied().fold(0.0, f64::max);
    let simplex = choose_simplex(oracle, p, delta, 16)?;
    let delta_eff = simplex.delta_eff;

    let rho_max = mesh.distance_to_boundary(center) * (1.0 - 1e-9);
    let near: Vec<(usize, f64)> = (0..mesh.n_vertices())
        .map(|v| (v, mesh.vertices[v].dist(center)))
        .filter(|&(_, d)| d < rho_max)
        .collect();
    let star = mesh.vertex_triangles();
    let mass = mesh.lumped_mass();
    let lin = |v: usize| value + p.dot(mesh.vertices[v] - center);
    let scale = 1e-12 * (1.0 + value.abs());

    let mut rho = rho_max;
    while rho >= 0.25 * mesh.h {
        let ball: Vec<(usize, f64)> = near.iter().copied().filter(|&(_, d)| d <= rho).collect();
        let bounds_ok = ball.iter().all(|&(v, d)| {
            let e = sign * (u[v] - lin(v));
            e <= 0.5 * delta_eff * d + scale && e >= -0.5 * delta_prime * d - scale
        });
        if bounds_ok {
            let mut patch = SurgeryPatch {
                triangle: t,
                center,
                radius: rho,
                component: set.index,
                slope: p,
                value,
                delta,
                delta_prime,
                delta_eff,
                simplex: simplex.points,
                sign,
                vertices: Vec::new(),
                triangles: Vec::new(),
                density_ratio: 0.0,
                density_bound: (2.0 * delta_eff / (9.0 * delta_prime)).powi(2),
                energy: EnergyDecrease::default(),
                offending_removed: 0.0,
                source_margin_predicted: 0.0,
            };
            patch.vertices = ball
                .iter()
                .filter(|&&(v, _)| !mesh.is_boundary[v])
                .map(|&(v, _)| (v, patch.w(mesh.vertices[v])))
                .filter(|&(v, w)| sign * (w - u[v]) < 0.0)
                .collect();
            if !patch.vertices.is_empty() {
                let mut tris: Vec<usize> = patch.vertices.iter().flat_map(|&(v, _)| star[v].iter().copied()).collect();
                tris.sort_unstable();
                tris.dedup();
                patch.triangles = tris;
                let e_area: f64 = patch.vertices.iter().map(|&(v, _)| mass[v]).sum();
                patch.density_ratio = e_area / (PI * rho * rho);
                let inner = delta_eff / delta_prime * rho / 9.0;
                patch.source_margin_predicted = g_center.abs() / 2.0 * delta_eff / 6.0 * rho * PI * inner * inner;
                let u_new = apply_patch(u, &patch);
                let support: f64 = patch.triangles.iter().map(|&s| mesh.triangle_area(s)).sum();
                if let Ok(e) = verify_energy_decrease(u, &u_new, oracle.fss, g, mesh, tol_claim * support) {
                    if e.strict {
                        patch.energy = e;
                        return Some(patch);
                    }
                }
            }
        }
        rho *= 0.5;
    }
    None
}
