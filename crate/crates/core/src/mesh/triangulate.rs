use super::{DomainKind, DomainSpec, Mesh};
use crate::error::{Error, Result};
use crate::geom::{point_segment_distance, signed_area, Vec2};
use spade::{DelaunayTriangulation, Point2, Triangulation};
use std::f64::consts::PI;

/// Interior lattice points closer than this fraction of `h` to the boundary are dropped.
const BOUNDARY_CLEARANCE: f64 = 0.6;
/// Edges longer than this multiple of `h` get split.
const LONG_EDGE: f64 = 1.4;

/// Boundary samples of the domain in counter-clockwise order, spaced at most `h` apart.
fn boundary_samples(spec: &DomainSpec) -> Vec<Vec2> {
    let h = spec.h;
    match &spec.kind {
        DomainKind::Disc { center, radius } => {
            let n = ((2.0 * PI * radius / h).ceil() as usize).max(8);
            let c = Vec2::from(*center);
            (0..n)
                .map(|i| c + Vec2::from_angle(2.0 * PI * i as f64 / n as f64) * *radius)
                .collect()
        }
        DomainKind::Ellipse { center, semiaxes, angle } => {
            let n = ((2.0 * PI * semiaxes[0].max(semiaxes[1]) / h).ceil() as usize).max(8);
            let c = Vec2::from(*center);
            (0..n)
                .map(|i| {
                    let t = 2.0 * PI * i as f64 / n as f64;
                    c + Vec2::new(semiaxes[0] * t.cos(), semiaxes[1] * t.sin()).rotate(*angle)
                })
                .collect()
        }
        DomainKind::Polygon { vertices } => {
            let n = vertices.len();
            let mut out = Vec::new();
            for i in 0..n {
                let a = Vec2::from(vertices[i]);
                let b = Vec2::from(vertices[(i + 1) % n]);
                let m = ((a.dist(b) / h).ceil() as usize).max(1);
                for j in 0..m {
                    out.push(a + (b - a) * (j as f64 / m as f64));
                }
            }
            out
        }
    }
}

/// Triangulates the domain: boundary samples plus a hexagonal interior lattice,
/// joined by a Delaunay triangulation (the boundary samples are in convex
/// position, so the triangulation of the point set covers exactly the
/// boundary polygon).
pub fn triangulate(spec: &DomainSpec) -> Result<Mesh> {
    spec.validate()?;
    let h = spec.h;
    let boundary = boundary_samples(spec);
    let nb = boundary.len();

    let (lo, hi) = boundary.iter().fold(
        (Vec2::new(f64::INFINITY, f64::INFINITY), Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY)),
        |(lo, hi), p| (Vec2::new(lo.x.min(p.x), lo.y.min(p.y)), Vec2::new(hi.x.max(p.x), hi.y.max(p.y))),
    );
    let inside_by = |p: Vec2| -> f64 {
        let mut d = f64::INFINITY;
        for i in 0..nb {
            let a = boundary[i];
            let b = boundary[(i + 1) % nb];
            if (b - a).cross(p - a) < 0.0 {
                return -1.0;
            }
            d = d.min(point_segment_distance(p, a, b));
        }
        d
    };

    // Lattice anchored at the box center so symmetric domains get symmetric meshes.
    let center = (lo + hi) * 0.5;
    let dy = h * 3f64.sqrt() / 2.0;
    let rows = ((hi.y - lo.y) / dy).ceil() as i64 + 1;
    let cols = ((hi.x - lo.x) / h).ceil() as i64 + 1;
    let mut interior = Vec::new();
    for r in -rows..=rows {
        let y = center.y + r as f64 * dy;
        if y <= lo.y || y >= hi.y {
            continue;
        }
        let shift = if r.rem_euclid(2) == 1 { 0.5 * h } else { 0.0 };
        for c in -cols..=cols {
            let x = center.x + c as f64 * h + shift;
            if x <= lo.x || x >= hi.x {
                continue;
            }
            let p = Vec2::new(x, y);
            if inside_by(p) > BOUNDARY_CLEARANCE * h {
                interior.push(p);
            }
        }
    }

    let mut vertices: Vec<Vec2> = boundary.clone();
    vertices.extend(interior);

    let mut dt: DelaunayTriangulation<Point2<f64>> = DelaunayTriangulation::new();
    let mut handle_to_index = std::collections::HashMap::new();
    for (i, p) in vertices.iter().enumerate() {
        let hnd = dt
            .insert(Point2::new(p.x, p.y))
            .map_err(|e| Error::InvalidDomain(format!("triangulation insert failed: {e:?}")))?;
        handle_to_index.entry(hnd.index()).or_insert(i);
    }
    if handle_to_index.len() != vertices.len() {
        return Err(Error::InvalidDomain("duplicate mesh points".into()));
    }

    // The lattice leaves a gap of up to ~1.5h next to the boundary; split the
    // long edges there by inserting their midpoints.
    for _ in 0..4 {
        let mut added: Vec<Vec2> = Vec::new();
        for e in dt.undirected_edges() {
            let [a, b] = e.vertices();
            let (ia, ib) = (handle_to_index[&a.fix().index()], handle_to_index[&b.fix().index()]);
            if ia < nb && ib < nb {
                continue;
            }
            let (pa, pb) = (vertices[ia], vertices[ib]);
            if pa.dist(pb) > LONG_EDGE * h {
                let mid = (pa + pb) * 0.5;
                if added.iter().all(|q| q.dist(mid) > 0.5 * h) {
                    added.push(mid);
                }
            }
        }
        if added.is_empty() {
            break;
        }
        for p in added {
            let hnd = dt
                .insert(Point2::new(p.x, p.y))
                .map_err(|e| Error::InvalidDomain(format!("triangulation insert failed: {e:?}")))?;
            handle_to_index.entry(hnd.index()).or_insert(vertices.len());
            vertices.push(p);
        }
    }

    let min_area = 1e-10 * h * h;
    let mut triangles = Vec::with_capacity(dt.num_inner_faces());
    for face in dt.inner_faces() {
        let vs = face.vertices();
        let idx = [
            handle_to_index[&vs[0].fix().index()],
            handle_to_index[&vs[1].fix().index()],
            handle_to_index[&vs[2].fix().index()],
        ];
        let a = signed_area(vertices[idx[0]], vertices[idx[1]], vertices[idx[2]]);
        // Slivers spanned by nearly collinear boundary samples carry no area.
        if a <= min_area {
            if idx.iter().all(|&i| i < nb) {
                continue;
            }
            return Err(Error::InvalidDomain(format!("degenerate triangle of area {a:e}")));
        }
        triangles.push(idx);
    }
    // Deterministic triangle order independent of the triangulator's internals.
    for t in triangles.iter_mut() {
        let k = (0..3).min_by_key(|&k| t[k]).unwrap();
        t.rotate_left(k);
    }
    triangles.sort_unstable();

    let boundary_loop: Vec<usize> = (0..nb).collect();
    Ok(Mesh::from_parts(vertices, triangles, boundary_loop, h))
}
