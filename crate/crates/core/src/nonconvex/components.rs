use crate::error::{Error, Result};
use crate::geom::{convex_hull, ConvexPolygon, Vec2};
use crate::lagrangian::{ConjugateGrid, Lagrangian};
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

/// Pointwise gap f − f** with a threshold deciding membership in the open
/// nonconvexity set.
#[derive(Clone, Copy)]
pub struct GapOracle<'a> {
    pub f: &'a dyn Lagrangian,
    pub fss: &'a dyn Lagrangian,
    pub tol_gap: f64,
}

impl GapOracle<'_> {
    pub fn gap(&self, xi: Vec2) -> f64 {
        self.f.value(xi) - self.fss.value(xi)
    }

    pub fn inside(&self, xi: Vec2) -> bool {
        self.gap(xi) > self.tol_gap
    }

    /// Exit distance of the ray `origin + t·dir` (|dir| = 1) from the set, for an
    /// origin inside it. Returns the first sample with gap ≤ tol found by
    /// bisection, so the returned point lies on or just outside the set.
    pub fn ray_exit(&self, origin: Vec2, dir: Vec2, guess: f64) -> f64 {
        let mut lo = 0.0;
        let mut hi = guess.max(1e-6);
        let mut grow = 0;
        while self.inside(origin + dir * hi) && grow < 60 {
            lo = hi;
            hi *= 2.0;
            grow += 1;
        }
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if self.inside(origin + dir * mid) {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-13 * hi {
                break;
            }
        }
        hi
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NonconvexSet {
    pub index: usize,
    /// Convex hull of the grid samples in the component.
    pub polygon: ConvexPolygon,
    pub n_samples: usize,
    /// Mean of the component's samples.
    pub interior: Vec2,
    /// Distance from this hull to the nearest other hull.
    pub separation: f64,
}

impl NonconvexSet {
    /// Index of the set whose hull contains `xi`, or the nearest one within
    /// `slack`.
    pub fn locate(sets: &[NonconvexSet], xi: Vec2, slack: f64) -> Option<usize> {
        sets.iter()
            .map(|s| (s.index, s.polygon.signed_distance(xi)))
            .filter(|&(_, d)| d >= -slack)
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(i, _)| i)
    }
}

/// Connected components (4-neighbour) of {f − f** > tol_gap} on the grid of
/// `fss`, with the grid-based convexity and separation checks.
///
/// The sampled biconjugate undershoots f by roughly the dual grid step times
/// the slope variation, so `tol_gap` has to sit above that level or the
/// discretization error itself is reported as a nonconvexity.
pub fn detect_components(f: &dyn Lagrangian, fss: &ConjugateGrid, tol_gap: f64) -> Result<Vec<NonconvexSet>> {
    let g = &fss.grid;
    let (nx, ny) = (g.n[0], g.n[1]);
    let step = g.step[0].max(g.step[1]);
    let flag: Vec<bool> = g
        .points()
        .map(|(k, p)| fss.finite_mask[k] && f.value(p) - fss.values[k] > tol_gap)
        .collect();
    let mut label = vec![usize::MAX; g.len()];
    let mut comps: Vec<Vec<usize>> = Vec::new();
    for start in 0..g.len() {
        if !flag[start] || label[start] != usize::MAX {
            continue;
        }
        let id = comps.len();
        let mut members = vec![start];
        label[start] = id;
        let mut queue = VecDeque::from([start]);
        while let Some(k) = queue.pop_front() {
            let (i, j) = (k % nx, k / nx);
            let mut nbrs = Vec::with_capacity(4);
            if i > 0 {
                nbrs.push(k - 1);
            }
            if i + 1 < nx {
                nbrs.push(k + 1);
            }
            if j > 0 {
                nbrs.push(k - nx);
            }
            if j + 1 < ny {
                nbrs.push(k + nx);
            }
            for q in nbrs {
                if flag[q] && label[q] == usize::MAX {
                    label[q] = id;
                    members.push(q);
                    queue.push_back(q);
                }
            }
        }
        comps.push(members);
    }

    let mut sets = Vec::new();
    for members in comps {
        let pts: Vec<Vec2> = members.iter().map(|&k| g.point(k % nx, k / nx)).collect();
        let hull = convex_hull(&pts);
        if hull.len() < 3 {
            // a segment or a point: no interior at this resolution
            continue;
        }
        let polygon = ConvexPolygon::new(hull);
        let interior = pts.iter().fold(Vec2::ZERO, |a, p| a + *p) * (1.0 / pts.len() as f64);
        sets.push(NonconvexSet { index: sets.len(), polygon, n_samples: pts.len(), interior, separation: f64::INFINITY });
    }

    // The hull may exceed the component only by a grid cell along its rim.
    for s in &sets {
        let holes = g
            .points()
            .filter(|&(k, p)| !flag[k] && fss.finite_mask[k] && s.polygon.signed_distance(p) > 1.5 * step)
            .count();
        if holes > 0 {
            return Err(Error::Hypothesis(format!(
                "nonconvexity set {} is not convex: {holes} grid samples inside its hull have f = f**",
                s.index
            )));
        }
    }
    for a in 0..sets.len() {
        for b in a + 1..sets.len() {
            let d = sets[a].polygon.distance_to(&sets[b].polygon);
            sets[a].separation = sets[a].separation.min(d);
            sets[b].separation = sets[b].separation.min(d);
        }
    }
    if let Some(s) = sets.iter().find(|s| s.separation <= step) {
        return Err(Error::Hypothesis(format!(
            "nonconvexity set {} is within {:.3e} of another set; closures must be disjoint",
            s.index, s.separation
        )));
    }
    Ok(sets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lagrangian::{biconjugate, build, FnLagrangian, Grid2, LagrangianMeta, LagrangianSpec};

    fn meta(name: &str) -> LagrangianMeta {
        LagrangianMeta { name: name.into(), r: 1.0, eps: 1.0, p_growth: None }
    }

    #[test]
    fn double_well_has_one_disc_component() {
        let f = build(&LagrangianSpec::named("double_well")).unwrap();
        let fss = biconjugate(f.as_ref(), &Grid2::centered(2.0, 161), &Grid2::centered(40.0, 1601)).unwrap();
        let sets = detect_components(f.as_ref(), &fss, 2e-3).unwrap();
        assert_eq!(sets.len(), 1);
        let s = &sets[0];
        assert!(s.interior.norm() < 1e-9);
        assert!((s.polygon.area() - std::f64::consts::PI).abs() < 0.25, "{}", s.polygon.area());
        assert!(s.polygon.max_distance(Vec2::ZERO) <= 1.0);
    }

    #[test]
    fn convex_lagrangian_has_no_components() {
        let f = build(&LagrangianSpec::named("torsion")).unwrap();
        let fss = biconjugate(f.as_ref(), &Grid2::centered(3.0, 121), &Grid2::centered(6.0, 961)).unwrap();
        assert!(detect_components(f.as_ref(), &fss, 2e-3).unwrap().is_empty());
    }

    #[test]
    fn two_wells_give_a_single_slab() {
        let a = Vec2::new(0.8, 0.0);
        let f = FnLagrangian::new(meta("two_well"), move |x| (x - a).norm2().min((x + a).norm2()));
        let fss = biconjugate(&f, &Grid2::centered(2.0, 81), &Grid2::centered(8.0, 321)).unwrap();
        let sets = detect_components(&f, &fss, 1e-6).unwrap();
        assert_eq!(sets.len(), 1);
        for v in &sets[0].polygon.vertices {
            assert!(v.x.abs() < 0.8 + 1e-9);
        }
    }

    #[test]
    fn ray_exit_finds_the_unit_circle() {
        let f = build(&LagrangianSpec::named("double_well")).unwrap();
        let fss = f.convexification().unwrap();
        let o = GapOracle { f: f.as_ref(), fss: fss.as_ref(), tol_gap: 1e-12 };
        let p = Vec2::new(0.3, -0.2);
        for k in 0..8 {
            let d = Vec2::from_angle(k as f64);
            let t = o.ray_exit(p, d, 0.5);
            assert!(((p + d * t).norm() - 1.0).abs() < 1e-5);
        }
    }
}
