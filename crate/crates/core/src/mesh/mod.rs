//! Planar meshes of convex domains and the boundary-geometry certificates
//! (R-uniform convexity of the domain, lower bounded slope condition of the
//! boundary datum) that every regularity statement downstream relies on.

mod convexity;
mod lbsc;
mod locate;
mod triangulate;

pub use convexity::{check_uniform_convexity, check_uniform_convexity_with_tol, UniformConvexityReport};
pub use lbsc::{check_lbsc, LbscReport};
pub use locate::Locator;
pub use triangulate::triangulate;

use crate::error::{Error, Result};
use crate::geom::{point_segment_distance, polygon_area, signed_area, Vec2};
use serde::{Deserialize, Serialize};
use std::io::Write;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainKind {
    Disc {
        center: [f64; 2],
        radius: f64,
    },
    Ellipse {
        center: [f64; 2],
        semiaxes: [f64; 2],
        #[serde(default)]
        angle: f64,
    },
    /// Counter-clockwise, strictly convex vertex list.
    Polygon { vertices: Vec<[f64; 2]> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    #[serde(flatten)]
    pub kind: DomainKind,
    /// Target mesh size.
    pub h: f64,
}

impl DomainSpec {
    pub fn disc(center: [f64; 2], radius: f64, h: f64) -> Self {
        DomainSpec { kind: DomainKind::Disc { center, radius }, h }
    }

    pub fn ellipse(center: [f64; 2], semiaxes: [f64; 2], angle: f64, h: f64) -> Self {
        DomainSpec { kind: DomainKind::Ellipse { center, semiaxes, angle }, h }
    }

    pub fn polygon(vertices: Vec<[f64; 2]>, h: f64) -> Self {
        DomainSpec { kind: DomainKind::Polygon { vertices }, h }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(Error::InvalidDomain(format!("mesh size must be positive, got {}", self.h)));
        }
        match &self.kind {
            DomainKind::Disc { radius, .. } => {
                if radius.is_nan() || *radius <= 0.0 {
                    return Err(Error::InvalidDomain(format!("disc radius must be positive, got {radius}")));
                }
            }
            DomainKind::Ellipse { semiaxes, .. } => {
                if !(semiaxes[0] > 0.0 && semiaxes[1] > 0.0) {
                    return Err(Error::InvalidDomain(format!(
                        "ellipse semiaxes must be positive, got {semiaxes:?}"
                    )));
                }
            }
            DomainKind::Polygon { vertices } => {
                let n = vertices.len();
                if n < 3 {
                    return Err(Error::InvalidDomain(format!("polygon needs at least 3 vertices, got {n}")));
                }
                for i in 0..n {
                    let a = Vec2::from(vertices[i]);
                    let b = Vec2::from(vertices[(i + 1) % n]);
                    let c = Vec2::from(vertices[(i + 2) % n]);
                    if (b - a).cross(c - b) <= 0.0 {
                        return Err(Error::InvalidDomain(format!(
                            "polygon is not strictly convex and counter-clockwise at vertex {}",
                            (i + 1) % n
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Same domain moved by a rotation about the origin followed by a translation.
    pub fn rigid_motion(&self, theta: f64, shift: [f64; 2]) -> DomainSpec {
        let mv = |p: [f64; 2]| {
            let q = Vec2::from(p).rotate(theta) + Vec2::from(shift);
            [q.x, q.y]
        };
        let kind = match &self.kind {
            DomainKind::Disc { center, radius } => DomainKind::Disc { center: mv(*center), radius: *radius },
            DomainKind::Ellipse { center, semiaxes, angle } => DomainKind::Ellipse {
                center: mv(*center),
                semiaxes: *semiaxes,
                angle: angle + theta,
            },
            DomainKind::Polygon { vertices } => DomainKind::Polygon { vertices: vertices.iter().map(|&v| mv(v)).collect() },
        };
        DomainSpec { kind, h: self.h }
    }

    /// Whether the boundary is smooth (used as the C^{1,1} surrogate).
    pub fn is_smooth(&self) -> bool {
        !matches!(self.kind, DomainKind::Polygon { .. })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Mesh {
    pub vertices: Vec<Vec2>,
    pub triangles: Vec<[usize; 3]>,
    /// Sorted indices of boundary vertices.
    pub boundary_vertices: Vec<usize>,
    /// Boundary vertices in counter-clockwise order; the cycle closes implicitly.
    pub boundary_loop: Vec<usize>,
    pub is_boundary: Vec<bool>,
    pub dist: Vec<f64>,
    pub diam: f64,
    pub area: f64,
    pub h: f64,
}

impl Mesh {
    pub(crate) fn from_parts(vertices: Vec<Vec2>, triangles: Vec<[usize; 3]>, boundary_loop: Vec<usize>, h: f64) -> Self {
        let mut is_boundary = vec![false; vertices.len()];
        for &b in &boundary_loop {
            is_boundary[b] = true;
        }
        let mut boundary_vertices = boundary_loop.clone();
        boundary_vertices.sort_unstable();
        let area = triangles
            .iter()
            .map(|t| signed_area(vertices[t[0]], vertices[t[1]], vertices[t[2]]))
            .sum();
        let mut mesh = Mesh {
            vertices,
            triangles,
            boundary_vertices,
            boundary_loop,
            is_boundary,
            dist: Vec::new(),
            diam: 0.0,
            area,
            h,
        };
        mesh.dist = distance_field(&mesh);
        mesh.diam = mesh.compute_diam();
        mesh
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        signed_area(self.vertices[a], self.vertices[b], self.vertices[c])
    }

    pub fn triangle_areas(&self) -> Vec<f64> {
        (0..self.n_triangles()).map(|t| self.triangle_area(t)).collect()
    }

    pub fn barycenter(&self, t: usize) -> Vec2 {
        let [a, b, c] = self.triangles[t];
        (self.vertices[a] + self.vertices[b] + self.vertices[c]) * (1.0 / 3.0)
    }

    /// Area-weighted centroid of the domain.
    pub fn centroid(&self) -> Vec2 {
        let mut c = Vec2::ZERO;
        for t in 0..self.n_triangles() {
            c += self.barycenter(t) * self.triangle_area(t);
        }
        c * (1.0 / self.area)
    }

    pub fn boundary_points(&self) -> Vec<Vec2> {
        self.boundary_loop.iter().map(|&i| self.vertices[i]).collect()
    }

    /// Exact distance from an arbitrary point to the boundary polyline.
    pub fn distance_to_boundary(&self, p: Vec2) -> f64 {
        let n = self.boundary_loop.len();
        let mut d = f64::INFINITY;
        for i in 0..n {
            let a = self.vertices[self.boundary_loop[i]];
            let b = self.vertices[self.boundary_loop[(i + 1) % n]];
            d = d.min(point_segment_distance(p, a, b));
        }
        d
    }

    pub fn max_edge_length(&self) -> f64 {
        let mut m: f64 = 0.0;
        for t in &self.triangles {
            for k in 0..3 {
                m = m.max(self.vertices[t[k]].dist(self.vertices[t[(k + 1) % 3]]));
            }
        }
        m
    }

    /// Unique undirected edges, each as (smaller index, larger index).
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut e: Vec<(usize, usize)> = self
            .triangles
            .iter()
            .flat_map(|t| (0..3).map(move |k| (t[k].min(t[(k + 1) % 3]), t[k].max(t[(k + 1) % 3]))))
            .collect();
        e.sort_unstable();
        e.dedup();
        e
    }

    /// For every vertex, the triangles containing it.
    pub fn vertex_triangles(&self) -> Vec<Vec<usize>> {
        let mut star = vec![Vec::new(); self.n_vertices()];
        for (t, tri) in self.triangles.iter().enumerate() {
            for &v in tri {
                star[v].push(t);
            }
        }
        star
    }

    /// Triangles sharing at least one vertex with each triangle (excluding itself).
    pub fn triangle_neighbors(&self) -> Vec<Vec<usize>> {
        let star = self.vertex_triangles();
        self.triangles
            .iter()
            .enumerate()
            .map(|(t, tri)| {
                let mut n: Vec<usize> = tri.iter().flat_map(|&v| star[v].iter().copied()).filter(|&s| s != t).collect();
                n.sort_unstable();
                n.dedup();
                n
            })
            .collect()
    }

    /// Lumped (one-third) mass of each vertex.
    pub fn lumped_mass(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.n_vertices()];
        for (t, tri) in self.triangles.iter().enumerate() {
            let a = self.triangle_area(t) / 3.0;
            for &v in tri {
                m[v] += a;
            }
        }
        m
    }

    fn compute_diam(&self) -> f64 {
        let pts = self.boundary_points();
        let mut d: f64 = 0.0;
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                d = d.max(pts[i].dist(pts[j]));
            }
        }
        d
    }

    /// Area enclosed by the boundary loop (shoelace).
    pub fn boundary_area(&self) -> f64 {
        polygon_area(&self.boundary_points())
    }

    /// Writes vertices and triangles as one CSV with a record-kind column.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "kind,index,a,b,c,d")?;
        for (i, v) in self.vertices.iter().enumerate() {
            writeln!(w, "vertex,{i},{},{},{},{}", v.x, v.y, self.is_boundary[i] as u8, self.dist[i])?;
        }
        for (i, t) in self.triangles.iter().enumerate() {
            writeln!(w, "triangle,{i},{},{},{},", t[0], t[1], t[2])?;
        }
        Ok(())
    }
}

/// Exact distance of every vertex to the boundary polyline; zero on boundary vertices.
pub fn distance_field(mesh: &Mesh) -> Vec<f64> {
    mesh.vertices
        .iter()
        .enumerate()
        .map(|(i, &p)| if mesh.is_boundary[i] { 0.0 } else { mesh.distance_to_boundary(p) })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_degenerate_specs() {
        assert!(DomainSpec::disc([0.0, 0.0], 0.0, 0.1).validate().is_err());
        assert!(DomainSpec::ellipse([0.0, 0.0], [1.0, -1.0], 0.0, 0.1).validate().is_err());
        // clockwise square
        let cw = DomainSpec::polygon(vec![[0.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, 0.0]], 0.1);
        assert!(cw.validate().is_err());
        // collinear vertex is not strictly convex
        let flat = DomainSpec::polygon(vec![[0.0, 0.0], [0.5, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]], 0.1);
        assert!(flat.validate().is_err());
        let bad_h = DomainSpec::disc([0.0, 0.0], 1.0, -1.0);
        assert!(bad_h.validate().is_err());
    }
}
