use super::Mesh;
use crate::geom::{ConvexPolygon, Vec2};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LbscReport {
    pub rank: f64,
    /// Supporting slope per boundary loop position; `None` where no slope exists.
    pub slopes: Vec<Option<Vec2>>,
    /// Smallest admissible slope norm per boundary loop position.
    pub local_rank: Vec<Option<f64>>,
    /// max over pairs of φ(γ)+z_γ·(γ′−γ) − φ(γ′) using the reported slopes
    pub worst_violation: f64,
    /// max over γ of the smallest admissible |z_γ|; `None` means infeasible somewhere.
    pub minimal_rank: Option<f64>,
    pub offending: Vec<usize>,
    pub tolerance: f64,
    pub pass: bool,
}

fn clip(poly: &[Vec2], n: Vec2, c: f64) -> Vec<Vec2> {
    // keep {z : z·n ≤ c}
    let mut out = Vec::with_capacity(poly.len() + 1);
    let m = poly.len();
    for i in 0..m {
        let a = poly[i];
        let b = poly[(i + 1) % m];
        let sa = a.dot(n) - c;
        let sb = b.dot(n) - c;
        if sa <= 0.0 {
            out.push(a);
        }
        if (sa < 0.0 && sb > 0.0) || (sa > 0.0 && sb < 0.0) {
            let t = sa / (sa - sb);
            out.push(a + (b - a) * t);
        }
    }
    out
}

fn closest_on_segment(p: Vec2, a: Vec2, b: Vec2) -> Vec2 {
    let d = b - a;
    let l2 = d.norm2();
    if l2 == 0.0 {
        return a;
    }
    a + d * ((p - a).dot(d) / l2).clamp(0.0, 1.0)
}

fn min_norm_point(poly: &[Vec2]) -> Vec2 {
    if poly.len() >= 3 && ConvexPolygon::new(poly.to_vec()).contains(Vec2::ZERO) {
        return Vec2::ZERO;
    }
    let m = poly.len();
    let mut best = poly[0];
    for i in 0..m {
        let q = closest_on_segment(Vec2::ZERO, poly[i], poly[(i + 1) % m]);
        if q.norm2() < best.norm2() {
            best = q;
        }
    }
    best
}

/// argmax of w·z over poly ∩ {|z| ≤ radius}; `None` when the intersection is empty.
fn max_linear_in_disc(poly: &[Vec2], w: Vec2, radius: f64) -> Option<Vec2> {
    let m = poly.len();
    let inside = |z: Vec2| -> bool {
        if m < 3 {
            return false;
        }
        (0..m).all(|i| {
            let a = poly[i];
            let b = poly[(i + 1) % m];
            (b - a).cross(z - a) >= -1e-12 * (1.0 + (b - a).norm() * (1.0 + z.norm()))
        })
    };
    if w.norm() > 0.0 {
        let zc = w.normalized() * radius;
        if inside(zc) {
            return Some(zc);
        }
    }
    let mut best: Option<Vec2> = None;
    let mut consider = |z: Vec2| {
        if best.is_none_or(|b| w.dot(z) > w.dot(b)) {
            best = Some(z);
        }
    };
    for i in 0..m {
        let a = poly[i];
        let b = poly[(i + 1) % m];
        if a.norm() <= radius {
            consider(a);
        }
        // segment ∩ circle
        let d = b - a;
        let qa = d.norm2();
        if qa == 0.0 {
            continue;
        }
        let qb = 2.0 * a.dot(d);
        let qc = a.norm2() - radius * radius;
        let disc = qb * qb - 4.0 * qa * qc;
        if disc < 0.0 {
            continue;
        }
        let s = disc.sqrt();
        for t in [(-qb - s) / (2.0 * qa), (-qb + s) / (2.0 * qa)] {
            if (0.0..=1.0).contains(&t) {
                let z = a + d * t;
                // pull onto the closed disc against rounding
                let z = if z.norm() > radius { z * (radius / z.norm()) } else { z };
                consider(z);
            }
        }
    }
    best
}

/// Checks the lower bounded slope condition of rank `rank` for boundary values
/// `phi` given in `boundary_loop` order.
///
/// For each boundary sample γ the admissible slopes form the polygon
/// `{z : z·(γ′−γ) ≤ φ(γ′) − φ(γ) for all γ′}`; its distance to the origin is the
/// smallest rank that works at γ. The reported witness maximizes the supporting
/// plane at the domain centroid among slopes of norm at most `rank`.
pub fn check_lbsc(mesh: &Mesh, phi: &[f64], rank: f64) -> LbscReport {
    assert_eq!(phi.len(), mesh.boundary_loop.len(), "phi must be sampled on the boundary loop");
    let pts = mesh.boundary_points();
    let n = pts.len();
    let x0 = mesh.centroid();
    let scale = phi.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    let tolerance = 1e-9 * scale;
    let bound = (16.0 * rank).max(1e4);
    let boxed = vec![
        Vec2::new(-bound, -bound),
        Vec2::new(bound, -bound),
        Vec2::new(bound, bound),
        Vec2::new(-bound, bound),
    ];

    let mut slopes = Vec::with_capacity(n);
    let mut local_rank = Vec::with_capacity(n);
    let mut offending = Vec::new();
    for i in 0..n {
        let g = pts[i];
        let mut poly = boxed.clone();
        for j in 0..n {
            if j == i || poly.is_empty() {
                continue;
            }
            let d = pts[j] - g;
            let len = d.norm();
            let c = (phi[j] - phi[i]) / len;
            poly = clip(&poly, d * (1.0 / len), c + 1e-12 * (1.0 + c.abs()));
        }
        if poly.len() < 3 {
            slopes.push(None);
            local_rank.push(None);
            offending.push(i);
            continue;
        }
        let zmin = min_norm_point(&poly);
        local_rank.push(Some(zmin.norm()));
        let witness = if zmin.norm() <= rank * (1.0 + 1e-12) + 1e-12 {
            // Where the disc |z| ≤ M only grazes the admissible polygon the
            // interior-leaning point is ill-conditioned; fall back to zmin.
            let excess = |z: Vec2| (0..n).filter(|&j| j != i).map(|j| phi[i] + z.dot(pts[j] - g) - phi[j]).fold(0.0, f64::max);
            match max_linear_in_disc(&poly, x0 - g, rank) {
                Some(z) if excess(z) <= excess(zmin).max(tolerance) => z,
                _ => zmin,
            }
        } else {
            offending.push(i);
            zmin
        };
        slopes.push(Some(witness));
    }

    let mut worst: f64 = f64::NEG_INFINITY;
    for i in 0..n {
        let Some(z) = slopes[i] else {
            worst = f64::INFINITY;
            continue;
        };
        for j in 0..n {
            if j != i {
                worst = worst.max(phi[i] + z.dot(pts[j] - pts[i]) - phi[j]);
            }
        }
    }
    let minimal_rank = if local_rank.iter().all(Option::is_some) {
        Some(local_rank.iter().map(|r| r.unwrap()).fold(0.0, f64::max))
    } else {
        None
    };
    let pass = offending.is_empty() && worst <= tolerance;
    LbscReport {
        rank,
        slopes,
        local_rank,
        worst_violation: worst,
        minimal_rank,
        offending,
        tolerance,
        pass,
    }
}
