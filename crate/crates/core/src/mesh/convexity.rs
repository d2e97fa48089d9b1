use super::Mesh;
use crate::error::{Error, Result};
use crate::geom::Vec2;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UniformConvexityReport {
    pub radius: f64,
    /// Inward unit normals at the sampled boundary points.
    pub witnesses: Vec<Vec2>,
    pub sample_indices: Vec<usize>,
    /// min over sample pairs of R b_γ·(γ'−γ) − ½|γ'−γ|²
    pub worst_margin: f64,
    pub worst_pair: Option<(usize, usize)>,
    pub tolerance: f64,
    pub pass: bool,
}

/// Evenly spaced positions along the boundary loop.
pub(crate) fn sample_loop(mesh: &Mesh, n_samples: usize) -> Vec<usize> {
    let len = mesh.boundary_loop.len();
    let n = n_samples.min(len);
    (0..n).map(|i| i * len / n).collect()
}

/// Inward unit normal at loop position `k`: bisector of the inward normals of
/// the two adjacent boundary edges.
pub(crate) fn inward_normal(mesh: &Mesh, k: usize) -> Vec2 {
    let len = mesh.boundary_loop.len();
    let p = mesh.vertices[mesh.boundary_loop[(k + len - 1) % len]];
    let c = mesh.vertices[mesh.boundary_loop[k]];
    let n = mesh.vertices[mesh.boundary_loop[(k + 1) % len]];
    let n1 = (c - p).perp().normalized();
    let n2 = (n - c).perp().normalized();
    (n1 + n2).normalized()
}

pub fn check_uniform_convexity(mesh: &Mesh, radius: f64, n_samples: usize) -> Result<UniformConvexityReport> {
    check_uniform_convexity_with_tol(mesh, radius, n_samples, 1e-9 * mesh.diam * mesh.diam)
}

pub fn check_uniform_convexity_with_tol(
    mesh: &Mesh,
    radius: f64,
    n_samples: usize,
    tolerance: f64,
) -> Result<UniformConvexityReport> {
    if n_samples < 8 {
        return Err(Error::InvalidArgument(format!("need at least 8 boundary samples, got {n_samples}")));
    }
    let positions = sample_loop(mesh, n_samples);
    let witnesses: Vec<Vec2> = positions.iter().map(|&k| inward_normal(mesh, k)).collect();
    let pts: Vec<Vec2> = positions.iter().map(|&k| mesh.vertices[mesh.boundary_loop[k]]).collect();

    let mut worst = f64::INFINITY;
    let mut worst_pair = None;
    for (i, (&g, &b)) in pts.iter().zip(&witnesses).enumerate() {
        for (j, &gp) in pts.iter().enumerate() {
            if i == j {
                continue;
            }
            let d = gp - g;
            let margin = radius * b.dot(d) - 0.5 * d.norm2();
            if margin < worst {
                worst = margin;
                worst_pair = Some((i, j));
            }
        }
    }
    Ok(UniformConvexityReport {
        radius,
        witnesses,
        sample_indices: positions.iter().map(|&k| mesh.boundary_loop[k]).collect(),
        worst_margin: worst,
        worst_pair,
        tolerance,
        pass: worst >= -tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{triangulate, DomainSpec};

    #[test]
    fn unit_disc_is_one_uniformly_convex_and_not_half() {
        let m = triangulate(&DomainSpec::disc([0.0, 0.0], 1.0, 2.0 * std::f64::consts::PI / 255.5)).unwrap();
        let r1 = check_uniform_convexity(&m, 1.0, 256).unwrap();
        assert!(r1.pass, "margin {}", r1.worst_margin);
        assert!(r1.worst_margin.abs() < 1e-12);
        for b in &r1.witnesses {
            assert!((b.norm() - 1.0).abs() < 1e-12);
        }
        let r05 = check_uniform_convexity(&m, 0.5, 256).unwrap();
        assert!(!r05.pass);
        // the antipodal pair: 0.5 * 2 - 0.5 * 4 = -1
        assert!((r05.worst_margin + 1.0).abs() < 1e-9);
    }

    #[test]
    fn brute_force_margin_on_circle_is_zero() {
        // Oracle independent of the mesh: exact circle points and exact normals.
        let n = 256;
        let pts: Vec<Vec2> = (0..n).map(|i| Vec2::from_angle(2.0 * std::f64::consts::PI * i as f64 / n as f64)).collect();
        let mut worst = f64::INFINITY;
        for &g in &pts {
            for &gp in &pts {
                let d = gp - g;
                worst = worst.min((-g).dot(d) - 0.5 * d.norm2());
            }
        }
        assert!(worst.abs() < 1e-14);
    }

    #[test]
    fn square_fails_for_every_radius() {
        let m = triangulate(&DomainSpec::polygon(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]], 0.1)).unwrap();
        for r in [1.0, 10.0, 1e3, 1e6] {
            assert!(!check_uniform_convexity(&m, r, 40).unwrap().pass);
        }
    }

    #[test]
    fn shrunken_radius_fails_on_fine_meshes() {
        let h = 1.0 / 128.0;
        let m = triangulate(&DomainSpec::disc([0.0, 0.0], 2.0, h)).unwrap();
        assert!(check_uniform_convexity(&m, 2.0, 64).unwrap().pass);
        assert!(!check_uniform_convexity(&m, 2.0 * (1.0 - 10.0 * h), 64).unwrap().pass);
    }

    #[test]
    fn too_few_samples_is_an_error() {
        let m = triangulate(&DomainSpec::disc([0.0, 0.0], 1.0, 0.2)).unwrap();
        assert!(check_uniform_convexity(&m, 1.0, 4).is_err());
    }
}
