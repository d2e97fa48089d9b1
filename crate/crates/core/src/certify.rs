//! A-posteriori checks of the interior gradient bound |∇u| ≤ Q/dist(x, ∂Ω),
//! the vanishing threshold of Θ, and boundary Hölder continuity.

use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::lagrangian::Lagrangian;
use crate::mesh::{Locator, Mesh};
use serde::{Deserialize, Serialize};

const N: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LipschitzParams {
    pub r: f64,
    pub eps: f64,
    pub g_norm: f64,
    pub c_sobolev: f64,
    pub tol_lip: f64,
    pub tol_theta: f64,
    pub n_anchors: usize,
}

impl Default for LipschitzParams {
    fn default() -> Self {
        LipschitzParams { r: 0.0, eps: 1.0, g_norm: 0.0, c_sobolev: 1.0, tol_lip: 1e-9, tol_theta: 1e-9, n_anchors: 8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LipschitzConstants {
    pub eps: f64,
    pub r0: f64,
    pub q0: f64,
    #[serde(rename = "Q")]
    pub q: f64,
}

/// r₀ = (r+1)·diam + ‖u‖∞ + 1, q₀ = r₀ + (N+1)(c‖g‖∞/ε)^{N/(N+1)}·|Ω|^{1/N},
/// Q = ‖u‖∞ + q₀, with N = 2.
pub fn lipschitz_constants(r: f64, eps: f64, diam: f64, area: f64, u_sup: f64, g_norm: f64, c: f64) -> LipschitzConstants {
    let r0 = (r + 1.0) * diam + u_sup + 1.0;
    let source = if g_norm == 0.0 { 0.0 } else { (c * g_norm / eps).powf(N / (N + 1.0)) };
    let q0 = r0 + (N + 1.0) * source * area.powf(1.0 / N);
    LipschitzConstants { eps, r0, q0, q: u_sup + q0 }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThetaProfile {
    pub z: Vec2,
    pub q: Vec<f64>,
    pub theta: Vec<f64>,
    /// Largest grid value of q with Θ(q) above the tolerance.
    pub vanish_q: Option<f64>,
    pub q0: f64,
    pub pass: bool,
}

/// q values from 0 to 1.5·q0.
pub fn default_q_grid(q0: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| 1.5 * q0 * i as f64 / (n - 1) as f64).collect()
}

/// Θ(q) = ∫_q^∞ |{v ≥ t}| dt with v = ⟨∇u, x − z⟩ − u classified per triangle
/// at its barycenter. By the layer-cake formula this is Σ_T |T|·(v_T − q)₊,
/// which is what is evaluated.
pub fn theta_profile(u: &[f64], grad: &[Vec2], mesh: &Mesh, z: Vec2, q_grid: &[f64], q0: f64, tol: f64) -> Result<ThetaProfile> {
    let lo = q_grid.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = q_grid.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if q_grid.is_empty() || lo > 0.0 || hi < 1.5 * q0 * (1.0 - 1e-12) {
        return Err(Error::InvalidArgument(format!("q grid [{lo}, {hi}] does not cover [0, {}]", 1.5 * q0)));
    }
    let vt: Vec<(f64, f64)> = mesh
        .triangles
        .iter()
        .enumerate()
        .map(|(t, tri)| {
            let b = mesh.barycenter(t);
            let ub = (u[tri[0]] + u[tri[1]] + u[tri[2]]) / 3.0;
            (mesh.triangle_area(t), grad[t].dot(b - z) - ub)
        })
        .collect();
    let theta: Vec<f64> = q_grid.iter().map(|&q| vt.iter().map(|(a, v)| a * (v - q).max(0.0)).sum()).collect();
    let vanish_q = q_grid.iter().zip(&theta).filter(|(_, th)| **th > tol).map(|(q, _)| *q).fold(None, |m: Option<f64>, q| {
        Some(m.map_or(q, |m| m.max(q)))
    });
    let pass = vanish_q.is_none_or(|q| q <= q0);
    Ok(ThetaProfile { z, q: q_grid.to_vec(), theta, vanish_q, q0, pass })
}

/// `n` points spread evenly by arc length along the boundary polygon.
pub fn boundary_anchors(mesh: &Mesh, n: usize) -> Vec<Vec2> {
    let pts = mesh.boundary_points();
    let m = pts.len();
    let mut cum = vec![0.0; m + 1];
    for i in 0..m {
        cum[i + 1] = cum[i] + (pts[(i + 1) % m] - pts[i]).norm();
    }
    let total = cum[m];
    (0..n)
        .map(|k| {
            let s = total * k as f64 / n as f64;
            let i = cum.partition_point(|&c| c <= s).clamp(1, m) - 1;
            let t = (s - cum[i]) / (cum[i + 1] - cum[i]);
            pts[i] + (pts[(i + 1) % m] - pts[i]) * t
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LipschitzCertificate {
    pub c_sobolev: f64,
    pub u_sup: f64,
    /// Constants with the modulus ε of f.
    pub constants: LipschitzConstants,
    /// Constants with ε/4, the modulus of the smooth approximants.
    pub constants_quarter: LipschitzConstants,
    /// |∇u|·dist(barycenter, ∂Ω)/Q per triangle (ε variant).
    pub ratio: Vec<f64>,
    pub worst_ratio: f64,
    pub worst_triangle: usize,
    pub worst_ratio_quarter: f64,
    pub pass: bool,
    pub pass_quarter: bool,
    pub theta: Vec<ThetaProfile>,
    pub theta_pass: bool,
}

pub fn lipschitz_certificate(u: &[f64], grad: &[Vec2], mesh: &Mesh, params: &LipschitzParams) -> Result<LipschitzCertificate> {
    if u.len() != mesh.n_vertices() || grad.len() != mesh.n_triangles() {
        return Err(Error::InvalidArgument("u or grad does not match the mesh".into()));
    }
    let u_sup = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let consts = |eps: f64| lipschitz_constants(params.r, eps, mesh.diam, mesh.area, u_sup, params.g_norm, params.c_sobolev);
    let constants = consts(params.eps);
    let constants_quarter = consts(params.eps / 4.0);

    let scaled: Vec<f64> = (0..mesh.n_triangles())
        .map(|t| grad[t].norm() * mesh.distance_to_boundary(mesh.barycenter(t)))
        .collect();
    let ratio: Vec<f64> = scaled.iter().map(|s| s / constants.q).collect();
    let (worst_triangle, worst_ratio) =
        ratio.iter().copied().enumerate().fold((0, f64::NEG_INFINITY), |b, (i, r)| if r > b.1 { (i, r) } else { b });
    let worst_ratio_quarter = scaled.iter().fold(0.0f64, |m, s| m.max(*s)) / constants_quarter.q;

    let q_grid = default_q_grid(constants.q0.max(constants_quarter.q0), 601);
    let theta = boundary_anchors(mesh, params.n_anchors)
        .into_iter()
        .map(|z| theta_profile(u, grad, mesh, z, &q_grid, constants.q0, params.tol_theta))
        .collect::<Result<Vec<_>>>()?;
    let theta_pass = theta.iter().all(|t| t.pass);
    Ok(LipschitzCertificate {
        c_sobolev: params.c_sobolev,
        u_sup,
        constants,
        constants_quarter,
        ratio,
        worst_ratio,
        worst_triangle,
        worst_ratio_quarter,
        pass: worst_ratio <= 1.0 + params.tol_lip,
        pass_quarter: worst_ratio_quarter <= 1.0 + params.tol_lip,
        theta,
        theta_pass,
    })
}

/// α = (2p − n − 1)/(4p + n − 3).
pub fn holder_exponent(p: f64, n: f64) -> Result<f64> {
    if p <= (n + 1.0) / 2.0 {
        return Err(Error::InvalidArgument(format!("Hölder exponent needs p > (n+1)/2, got p={p}, n={n}")));
    }
    Ok((2.0 * p - n - 1.0) / (4.0 * p + n - 3.0))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HolderCertificate {
    pub p: f64,
    pub n: f64,
    pub alpha: f64,
    /// Whether f(ξ) ≥ c|ξ|^p held on the sampled range.
    pub growth_ok: bool,
    pub constant: f64,
    pub n_pairs: usize,
    /// Finite constant and verified growth; stability under refinement is
    /// judged separately by [`holder_stable`].
    pub pass: bool,
}

/// f(ξ) ≥ c|ξ|^p on a polar sample of the ball of radius `b`.
pub fn check_growth(f: &dyn Lagrangian, c: f64, p: f64, b: f64) -> bool {
    (1..=64).all(|i| {
        let t = b * i as f64 / 64.0;
        (0..32).all(|j| {
            let a = std::f64::consts::PI * j as f64 / 16.0;
            let xi = Vec2::new(a.cos(), a.sin()) * t;
            f.value(xi) >= c * t.powf(p) * (1.0 - 1e-12) - 1e-12
        })
    })
}

/// Empirical Hölder constant sup |u(x) − u(y)|/|x − y|^α over pairs made of
/// 512 boundary anchors and 64 points on the inward normal of each.
pub fn holder_certificate(u: &[f64], mesh: &Mesh, f: &dyn Lagrangian, p: f64, c: f64) -> Result<HolderCertificate> {
    let n = N;
    let alpha = holder_exponent(p, n)?;
    let growth_ok = check_growth(f, c, p, 4.0);
    let loc = Locator::new(mesh);
    let centroid = mesh.centroid();
    let depth = 0.5 * mesh.distance_to_boundary(centroid);
    let anchors = boundary_anchors(mesh, 512);
    let m = anchors.len();
    let mut constant: f64 = 0.0;
    let mut n_pairs = 0;
    for k in 0..m {
        let g = anchors[k];
        let tangent = anchors[(k + 1) % m] - anchors[(k + m - 1) % m];
        let mut normal = tangent.perp() * (1.0 / tangent.norm());
        if normal.dot(centroid - g) < 0.0 {
            normal = normal * -1.0;
        }
        let Some(ug) = loc.interpolate(mesh, u, g) else { continue };
        for j in 1..=64 {
            let t = depth * (j as f64 / 64.0).powi(2);
            let x = g + normal * t;
            if let Some(ux) = loc.interpolate(mesh, u, x) {
                constant = constant.max((ux - ug).abs() / t.powf(alpha));
                n_pairs += 1;
            }
        }
    }
    Ok(HolderCertificate { p, n, alpha, growth_ok, constant, n_pairs, pass: constant.is_finite() && growth_ok })
}

/// Relative change of the Hölder constant between two resolutions, and whether
/// it stays within `tol`.
pub fn holder_stable(coarse: &HolderCertificate, fine: &HolderCertificate, tol: f64) -> (f64, bool) {
    let rel = (fine.constant - coarse.constant).abs() / coarse.constant.abs().max(f64::MIN_POSITIVE);
    (rel, rel <= tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lagrangian::{build, LagrangianSpec};
    use crate::mesh::{triangulate, DomainSpec};
    use crate::solver::gradient_field;

    fn poisson(h: f64) -> (Mesh, Vec<f64>) {
        let m = triangulate(&DomainSpec::disc([0.0, 0.0], 1.0, h)).unwrap();
        let u = m.vertices.iter().map(|p| (p.norm2() - 1.0) / 4.0).collect();
        (m, u)
    }

    #[test]
    fn r0_spot_value() {
        let c = lipschitz_constants(1.0, 0.25, 2.0, std::f64::consts::PI, 0.25, 0.0, 1.0);
        assert!((c.r0 - 5.25).abs() < 1e-15);
        assert_eq!(c.q0, c.r0);
        assert!((c.q - 5.5).abs() < 1e-15);
    }

    #[test]
    fn q_is_monotone_in_every_datum() {
        let base = |u: f64, g: f64, d: f64, a: f64, e: f64| lipschitz_constants(1.0, e, d, a, u, g, 1.0).q;
        let q = base(1.0, 2.0, 2.0, 3.0, 0.5);
        assert!(base(1.5, 2.0, 2.0, 3.0, 0.5) > q);
        assert!(base(1.0, 3.0, 2.0, 3.0, 0.5) > q);
        assert!(base(1.0, 2.0, 2.5, 3.0, 0.5) > q);
        assert!(base(1.0, 2.0, 2.0, 3.5, 0.5) > q);
        assert!(base(1.0, 2.0, 2.0, 3.0, 0.25) > q);
    }

    #[test]
    fn poisson_certificate_passes_with_slack() {
        let (m, u) = poisson(1.0 / 16.0);
        let grad = gradient_field(&m, &u);
        let params = LipschitzParams { r: 0.0, eps: 1.0, g_norm: 1.0, ..Default::default() };
        let cert = lipschitz_certificate(&u, &grad, &m, &params).unwrap();
        assert!(cert.pass && cert.theta_pass);
        assert!(cert.worst_ratio < 0.1);
        assert!(cert.constants_quarter.q > cert.constants.q);
    }

    #[test]
    fn poisson_theta_vanishes_beyond_one() {
        let (m, u) = poisson(1.0 / 32.0);
        let grad = gradient_field(&m, &u);
        let q: Vec<f64> = (0..=300).map(|i| i as f64 * 0.01).collect();
        let th = theta_profile(&u, &grad, &m, Vec2::new(1.0, 0.0), &q, 2.0, 1e-9).unwrap();
        let v = th.vanish_q.unwrap();
        assert!(v <= 1.0 && v > 0.9, "{v}");
        assert!(th.theta.windows(2).all(|w| w[1] <= w[0]));
        // convexity of Θ on the grid
        assert!(th.theta.windows(3).all(|w| w[0] - 2.0 * w[1] + w[2] >= -1e-12));
    }

    #[test]
    fn theta_grid_must_cover_the_range() {
        let (m, u) = poisson(0.2);
        let grad = gradient_field(&m, &u);
        let q: Vec<f64> = (0..10).map(|i| i as f64 * 0.1).collect();
        assert!(theta_profile(&u, &grad, &m, Vec2::new(1.0, 0.0), &q, 2.0, 1e-9).is_err());
    }

    #[test]
    fn affine_field_certificate() {
        let m = triangulate(&DomainSpec::disc([0.0, 0.0], 1.0, 0.1)).unwrap();
        let a = Vec2::new(0.6, 0.3);
        let u: Vec<f64> = m.vertices.iter().map(|p| a.dot(*p)).collect();
        let grad = gradient_field(&m, &u);
        let cert = lipschitz_certificate(&u, &grad, &m, &LipschitzParams { r: 1.0, ..Default::default() }).unwrap();
        assert!(cert.pass);
        let f = build(&LagrangianSpec::named("quadratic")).unwrap();
        let h = holder_certificate(&u, &m, f.as_ref(), 2.0, 0.5).unwrap();
        assert!(h.constant <= a.norm() * m.diam.powf(1.0 - h.alpha) + 1e-9);
    }

    #[test]
    fn holder_exponent_formula() {
        assert_eq!(holder_exponent(2.0, 2.0).unwrap(), 1.0 / 7.0);
        assert!(holder_exponent(1.5, 2.0).is_err());
    }

    #[test]
    fn holder_constant_is_stable_under_refinement() {
        let f = build(&LagrangianSpec::named("quadratic")).unwrap();
        let (m1, u1) = poisson(1.0 / 16.0);
        let (m2, u2) = poisson(1.0 / 32.0);
        let c1 = holder_certificate(&u1, &m1, f.as_ref(), 2.0, 0.5).unwrap();
        let c2 = holder_certificate(&u2, &m2, f.as_ref(), 2.0, 0.5).unwrap();
        assert!(c1.pass && c2.pass && c1.n_pairs == 512 * 64);
        assert!(holder_stable(&c1, &c2, 0.1).1);
    }

    #[test]
    fn growth_check_detects_a_weak_lagrangian() {
        let f = build(&LagrangianSpec::named("torsion")).unwrap();
        assert!(check_growth(f.as_ref(), 0.5, 2.0, 4.0));
        assert!(!check_growth(f.as_ref(), 1.0, 2.0, 4.0));
    }
}
