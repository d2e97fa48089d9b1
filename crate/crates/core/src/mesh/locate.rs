use super::Mesh;
use crate::geom::{signed_area, Vec2};

/// Uniform bucket grid over the mesh bounding box for point location.
#[derive(Debug, Clone)]
pub struct Locator {
    lo: Vec2,
    cell: f64,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<usize>>,
}

impl Locator {
    pub fn new(mesh: &Mesh) -> Self {
        let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for v in &mesh.vertices {
            lo = Vec2::new(lo.x.min(v.x), lo.y.min(v.y));
            hi = Vec2::new(hi.x.max(v.x), hi.y.max(v.y));
        }
        let span = (hi.x - lo.x).max(hi.y - lo.y).max(1e-300);
        let target = (mesh.n_triangles() as f64).sqrt().max(1.0);
        let cell = (span / target).max(mesh.h * 0.5).max(1e-300);
        let nx = (((hi.x - lo.x) / cell).ceil() as usize).max(1);
        let ny = (((hi.y - lo.y) / cell).ceil() as usize).max(1);
        let mut buckets = vec![Vec::new(); nx * ny];
        let clampi = |v: f64, n: usize| -> usize { (v.max(0.0) as usize).min(n - 1) };
        for (t, tri) in mesh.triangles.iter().enumerate() {
            let ps = tri.map(|i| mesh.vertices[i]);
            let (mut tlo, mut thi) = (ps[0], ps[0]);
            for p in &ps[1..] {
                tlo = Vec2::new(tlo.x.min(p.x), tlo.y.min(p.y));
                thi = Vec2::new(thi.x.max(p.x), thi.y.max(p.y));
            }
            let (i0, i1) = (clampi((tlo.x - lo.x) / cell, nx), clampi((thi.x - lo.x) / cell, nx));
            let (j0, j1) = (clampi((tlo.y - lo.y) / cell, ny), clampi((thi.y - lo.y) / cell, ny));
            for j in j0..=j1 {
                for i in i0..=i1 {
                    buckets[j * nx + i].push(t);
                }
            }
        }
        Locator { lo, cell, nx, ny, buckets }
    }

    fn bucket_of(&self, p: Vec2) -> (usize, usize) {
        let i = (((p.x - self.lo.x) / self.cell).max(0.0) as usize).min(self.nx - 1);
        let j = (((p.y - self.lo.y) / self.cell).max(0.0) as usize).min(self.ny - 1);
        (i, j)
    }

    fn barycentric(mesh: &Mesh, t: usize, p: Vec2) -> [f64; 3] {
        let [a, b, c] = mesh.triangles[t].map(|i| mesh.vertices[i]);
        let area = signed_area(a, b, c);
        [signed_area(p, b, c) / area, signed_area(a, p, c) / area, signed_area(a, b, p) / area]
    }

    /// Triangle containing `p` together with its barycentric coordinates. Points
    /// just outside the mesh (e.g. on a curved boundary between two samples) are
    /// assigned to the nearest triangle of the surrounding buckets with the
    /// coordinates clamped onto it.
    pub fn locate(&self, mesh: &Mesh, p: Vec2) -> Option<(usize, [f64; 3])> {
        let (i, j) = self.bucket_of(p);
        let mut best: Option<(usize, [f64; 3], f64)> = None;
        for ring in 0..=2usize {
            let (i0, i1) = (i.saturating_sub(ring), (i + ring).min(self.nx - 1));
            let (j0, j1) = (j.saturating_sub(ring), (j + ring).min(self.ny - 1));
            for jj in j0..=j1 {
                for ii in i0..=i1 {
                    for &t in &self.buckets[jj * self.nx + ii] {
                        let l = Self::barycentric(mesh, t, p);
                        let worst = l.iter().fold(f64::INFINITY, |m, &x| m.min(x));
                        if worst >= -1e-12 {
                            return Some((t, l));
                        }
                        if best.as_ref().is_none_or(|b| worst > b.2) {
                            best = Some((t, l, worst));
                        }
                    }
                }
            }
            if best.is_some() && ring >= 1 {
                break;
            }
        }
        best.map(|(t, l, _)| {
            let c = l.map(|x| x.max(0.0));
            let s = c[0] + c[1] + c[2];
            (t, c.map(|x| x / s))
        })
    }

    /// Piecewise-linear interpolation of per-vertex values at `p`.
    pub fn interpolate(&self, mesh: &Mesh, values: &[f64], p: Vec2) -> Option<f64> {
        let (t, l) = self.locate(mesh, p)?;
        let tri = mesh.triangles[t];
        Some(l[0] * values[tri[0]] + l[1] * values[tri[1]] + l[2] * values[tri[2]])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{triangulate, DomainSpec};

    #[test]
    fn interpolates_affine_fields_exactly() {
        let m = triangulate(&DomainSpec::ellipse([0.1, 0.0], [1.0, 0.6], 0.3, 0.07)).unwrap();
        let loc = Locator::new(&m);
        let f = |p: Vec2| 2.0 * p.x - 0.5 * p.y + 0.25;
        let vals: Vec<f64> = m.vertices.iter().map(|&p| f(p)).collect();
        for k in 0..200 {
            let t = k as f64 * 0.731;
            let p = Vec2::new(0.1, 0.0) + Vec2::new(0.8 * t.cos(), 0.45 * t.sin()) * ((k % 7) as f64 / 7.0);
            let v = loc.interpolate(&m, &vals, p).unwrap();
            assert!((v - f(p)).abs() < 1e-12);
        }
    }

    #[test]
    fn every_barycenter_locates_to_its_triangle() {
        let m = triangulate(&DomainSpec::disc([0.0, 0.0], 1.0, 0.1)).unwrap();
        let loc = Locator::new(&m);
        for t in 0..m.n_triangles() {
            assert_eq!(loc.locate(&m, m.barycenter(t)).unwrap().0, t);
        }
    }
}
