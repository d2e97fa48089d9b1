use super::components::{GapOracle, NonconvexSet};
use super::patch::{apply_patch, build_patch, SurgeryPatch};
use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::lagrangian::Lagrangian;
use crate::mesh::Mesh;
use crate::solver::{assemble, gradient_field};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RepairParams {
    /// Gradients with f − f** above this lie in the open nonconvexity set.
    pub tol_gap: f64,
    /// Target for the offending area as a fraction of |Ω|.
    pub tol_area: f64,
    pub tol_energy: f64,
    /// Per-unit-area slack allowed in the relaxed-energy comparison of a patch.
    pub tol_claim: f64,
    pub max_passes: usize,
    /// Neighbourhood depth (in triangle rings) that must be offending for a
    /// triangle to count as a density point.
    pub density_rings: usize,
    pub hist_bin: f64,
    pub hist_max: f64,
}

impl Default for RepairParams {
    fn default() -> Self {
        RepairParams {
            tol_gap: 1e-6,
            tol_area: 0.01,
            tol_energy: 1e-6,
            tol_claim: 1e-10,
            max_passes: 8,
            density_rings: 2,
            hist_bin: 0.05,
            hist_max: 2.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PassLog {
    pub pass: usize,
    pub candidates: usize,
    pub built: usize,
    pub accepted: usize,
    pub offending_before: f64,
    pub offending_after: f64,
    pub relaxed_before: f64,
    pub relaxed_after: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RepairReport {
    pub sign: f64,
    pub n_components: usize,
    pub patches: Vec<SurgeryPatch>,
    pub passes: Vec<PassLog>,
    /// Offending area over |Ω| before and after.
    pub offending_initial: f64,
    pub offending_final: f64,
    /// I**(u), I**(ū), I(u), I(ū)
    pub relaxed_initial: f64,
    pub relaxed_final: f64,
    pub true_initial: f64,
    pub true_final: f64,
    /// Largest |f − f**|·|T| summed over triangles of ū outside the sets.
    pub outside_gap: f64,
    pub min_source_margin: f64,
    /// Smallest density ratio minus its bound over accepted patches.
    pub min_density_slack: f64,
    pub hist_edges: Vec<f64>,
    pub hist_before: Vec<f64>,
    pub hist_after: Vec<f64>,
    pub pass_area: bool,
    pub pass_energy: bool,
    pub pass_outside: bool,
    /// Offending area reached the target.
    pub complete: bool,
}

pub struct Repaired {
    pub u: Vec<f64>,
    pub report: RepairReport,
}

fn offending(grad: &[Vec2], oracle: &GapOracle, sets: &[NonconvexSet], slack: f64) -> Vec<Option<usize>> {
    grad.par_iter()
        .map(|&p| if oracle.inside(p) { NonconvexSet::locate(sets, p, slack) } else { None })
        .collect()
}

fn area_fraction(flags: &[Option<usize>], areas: &[f64], total: f64) -> f64 {
    flags.iter().zip(areas).filter(|(f, _)| f.is_some()).map(|(_, a)| a).fold(0.0, |s, a| s + a) / total
}

fn p1_gradient(mesh: &Mesh, t: usize, u: &[f64]) -> Vec2 {
    let [a, b, c] = mesh.triangles[t];
    let (pa, pb, pc) = (mesh.vertices[a], mesh.vertices[b], mesh.vertices[c]);
    let s = 1.0 / (2.0 * mesh.triangle_area(t));
    ((pc - pb).perp() * u[a] + (pa - pc).perp() * u[b] + (pb - pa).perp() * u[c]) * s
}

/// Area-weighted histogram of |∇u|, normalized to unit total mass.
fn histogram(grad: &[Vec2], areas: &[f64], bin: f64, max: f64) -> Vec<f64> {
    let n = (max / bin).round() as usize;
    let mut h = vec![0.0; n];
    let total: f64 = areas.iter().sum();
    for (p, a) in grad.iter().zip(areas) {
        let k = ((p.norm() / bin) as usize).min(n - 1);
        h[k] += a / total;
    }
    h
}

/// Triangles all of whose `rings`-neighbourhood shares their component.
fn density_points(flags: &[Option<usize>], nbrs: &[Vec<usize>], rings: usize) -> Vec<usize> {
    (0..flags.len())
        .filter(|&t| {
            let Some(c) = flags[t] else { return false };
            let mut seen = HashSet::from([t]);
            let mut front = vec![t];
            for _ in 0..rings {
                let mut next = Vec::new();
                for &s in &front {
                    for &q in &nbrs[s] {
                        if seen.insert(q) {
                            if flags[q] != Some(c) {
                                return false;
                            }
                            next.push(q);
                        }
                    }
                }
                front = next;
            }
            true
        })
        .collect()
}

/// Covering repair of a relaxed minimizer `u` of ∫ f** + g u.
///
/// Each pass builds patches at every density point of the current offending
/// set, keeps a largest-radius-first subfamily with pairwise disjoint
/// supports, and applies it. Passes stop once the offending area is below
/// `tol_area`, when a pass accepts nothing, or after `max_passes`.
pub fn vitali_repair(
    u: &[f64],
    f: &dyn Lagrangian,
    fss: &dyn Lagrangian,
    sets: &[NonconvexSet],
    g: &[f64],
    mesh: &Mesh,
    params: &RepairParams,
) -> Result<Repaired> {
    if u.len() != mesh.n_vertices() || g.len() != mesh.n_vertices() {
        return Err(Error::InvalidArgument("u and g must have one entry per vertex".into()));
    }
    let sign = if g.iter().all(|&v| v >= 0.0) {
        1.0
    } else if g.iter().all(|&v| v <= 0.0) {
        -1.0
    } else {
        return Err(Error::Hypothesis("the source term changes sign; the covering repair needs g ≥ 0 or g ≤ 0".into()));
    };
    let oracle = GapOracle { f, fss, tol_gap: params.tol_gap };
    let areas = mesh.triangle_areas();
    let nbrs = mesh.triangle_neighbors();
    let phi: Vec<f64> = mesh.boundary_loop.iter().map(|&v| u[v]).collect();
    let relaxed = assemble(mesh, fss, g, &phi)?;
    let original = assemble(mesh, f, g, &phi)?;
    // The oracle decides membership; the sampled hulls only say which set a
    // gradient belongs to, so the nearest one is taken.
    let slack = f64::INFINITY;

    let grad0 = gradient_field(mesh, u);
    let flags0 = offending(&grad0, &oracle, sets, slack);
    let offending_initial = area_fraction(&flags0, &areas, mesh.area);
    let mut cur = u.to_vec();
    let mut flags = flags0;
    let mut frac = offending_initial;
    let mut patches = Vec::new();
    let mut passes = Vec::new();

    for pass in 0..params.max_passes {
        if frac <= params.tol_area || sets.is_empty() {
            break;
        }
        let grad = gradient_field(mesh, &cur);
        let cands = density_points(&flags, &nbrs, params.density_rings);
        let mut built: Vec<SurgeryPatch> = cands
            .par_iter()
            .filter_map(|&t| {
                let c = flags[t]?;
                let mut p = build_patch(&cur, &grad, mesh, t, &sets[c], &oracle, g, sign, params.tol_claim)?;
                let trial = apply_patch(&cur, &p);
                let removed: f64 = p
                    .triangles
                    .iter()
                    .map(|&s| {
                        let gs = p1_gradient(mesh, s, &trial);
                        let now = oracle.inside(gs) && NonconvexSet::locate(sets, gs, slack).is_some();
                        areas[s] * (flags[s].is_some() as u8 as f64 - now as u8 as f64)
                    })
                    .sum();
                p.offending_removed = removed;
                // disjoint supports make these reductions additive over a pass
                (removed > 0.0).then_some(p)
            })
            .collect();
        built.sort_by(|a, b| b.radius.total_cmp(&a.radius).then(a.triangle.cmp(&b.triangle)));
        let n_built = built.len();
        let mut used = vec![false; mesh.n_triangles()];
        let mut accepted = Vec::new();
        for p in built {
            if p.triangles.iter().all(|&t| !used[t]) {
                for &t in &p.triangles {
                    used[t] = true;
                }
                accepted.push(p);
            }
        }
        let relaxed_before = relaxed.energy(&cur);
        let mut next = cur.clone();
        for p in &accepted {
            next = apply_patch(&next, p);
        }
        let next_flags = offending(&gradient_field(mesh, &next), &oracle, sets, slack);
        let next_frac = area_fraction(&next_flags, &areas, mesh.area);
        passes.push(PassLog {
            pass,
            candidates: cands.len(),
            built: n_built,
            accepted: accepted.len(),
            offending_before: frac,
            offending_after: next_frac,
            relaxed_before,
            relaxed_after: relaxed.energy(&next),
        });
        if accepted.is_empty() {
            break;
        }
        cur = next;
        flags = next_flags;
        frac = next_frac;
        patches.extend(accepted);
    }

    let grad1 = gradient_field(mesh, &cur);
    let outside_gap: f64 = grad1
        .iter()
        .zip(&flags)
        .zip(&areas)
        .filter(|((_, fl), _)| fl.is_none())
        .map(|((&p, _), a)| a * (f.value(p) - fss.value(p)).abs())
        .sum();
    let relaxed_initial = relaxed.energy(u);
    let relaxed_final = relaxed.energy(&cur);
    let n_hist = (params.hist_max / params.hist_bin).round() as usize;
    let report = RepairReport {
        sign,
        n_components: sets.len(),
        min_source_margin: patches.iter().map(|p| p.energy.source_margin).fold(f64::INFINITY, f64::min),
        min_density_slack: patches.iter().map(|p| p.density_ratio - p.density_bound).fold(f64::INFINITY, f64::min),
        patches,
        passes,
        offending_initial,
        offending_final: frac,
        relaxed_initial,
        relaxed_final,
        true_initial: original.energy(u),
        true_final: original.energy(&cur),
        outside_gap,
        hist_edges: (0..=n_hist).map(|k| k as f64 * params.hist_bin).collect(),
        hist_before: histogram(&grad0, &areas, params.hist_bin, params.hist_max),
        hist_after: histogram(&grad1, &areas, params.hist_bin, params.hist_max),
        pass_area: frac <= params.tol_area,
        pass_energy: relaxed_final <= relaxed_initial + params.tol_energy,
        pass_outside: outside_gap <= params.tol_gap * mesh.area,
        complete: frac <= params.tol_area,
    };
    Ok(Repaired { u: cur, report })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::ConvexPolygon;
    use crate::lagrangian::{build, LagrangianSpec};
    use crate::mesh::{triangulate, DomainSpec};
    use std::f64::consts::PI;

    fn disc_set() -> NonconvexSet {
        let poly: Vec<Vec2> = (0..64).map(|k| Vec2::from_angle(2.0 * PI * k as f64 / 64.0)).collect();
        NonconvexSet { index: 0, polygon: ConvexPolygon::new(poly), n_samples: 0, interior: Vec2::ZERO, separation: f64::INFINITY }
    }

    #[test]
    fn convex_lagrangian_leaves_the_field_alone() {
        let m = triangulate(&DomainSpec::disc([0.0, 0.0], 1.0, 0.1)).unwrap();
        let f = build(&LagrangianSpec::named("torsion")).unwrap();
        let u: Vec<f64> = m.vertices.iter().map(|p| p.x * p.y).collect();
        let g = vec![1.0; m.n_vertices()];
        let r = vitali_repair(&u, f.as_ref(), f.as_ref(), &[], &g, &m, &RepairParams::default()).unwrap();
        assert_eq!(r.u, u);
        assert!(r.report.patches.is_empty() && r.report.complete);
        assert_eq!(r.report.offending_initial, 0.0);
    }

    #[test]
    fn sign_changing_source_is_rejected() {
        let m = triangulate(&DomainSpec::disc([0.0, 0.0], 1.0, 0.2)).unwrap();
        let f = build(&LagrangianSpec::named("double_well")).unwrap();
        let fss = f.convexification().unwrap();
        let g: Vec<f64> = m.vertices.iter().map(|p| p.x).collect();
        let u = vec![0.0; m.n_vertices()];
        let r = vitali_repair(&u, f.as_ref(), fss.as_ref(), &[disc_set()], &g, &m, &RepairParams::default());
        assert!(matches!(r, Err(Error::Hypothesis(_))));
    }

    #[test]
    fn flat_field_is_repaired_with_monotone_passes() {
        let m = triangulate(&DomainSpec::disc([0.0, 0.0], 1.0, 0.05)).unwrap();
        let f = build(&LagrangianSpec::named("double_well")).unwrap();
        let fss = f.convexification().unwrap();
        let u = vec![0.0; m.n_vertices()];
        let g = vec![1.0; m.n_vertices()];
        let r = vitali_repair(&u, f.as_ref(), fss.as_ref(), &[disc_set()], &g, &m, &RepairParams::default()).unwrap();
        let rep = &r.report;
        assert_eq!(rep.offending_initial, 1.0);
        assert!(!rep.patches.is_empty());
        assert!(rep.offending_final < rep.offending_initial);
        for p in &rep.passes {
            if p.accepted > 0 {
                assert!(p.offending_after < p.offending_before, "{p:?}");
                assert!(p.relaxed_after < p.relaxed_before);
            }
        }
        assert!(rep.min_source_margin > 0.0);
        assert!(rep.min_density_slack >= -0.05, "{}", rep.min_density_slack);
        assert!(rep.pass_energy);
        for &b in &m.boundary_loop {
            assert_eq!(r.u[b], 0.0);
        }
        // supports of the patches are pairwise disjoint within each pass
        let mut seen = HashSet::new();
        let mut pass_start = 0;
        for log in &rep.passes {
            seen.clear();
            for p in &rep.patches[pass_start..pass_start + log.accepted] {
                for &t in &p.triangles {
                    assert!(seen.insert(t));
                }
            }
            pass_start += log.accepted;
        }
    }

    #[test]
    fn histograms_have_unit_mass() {
        let m = triangulate(&DomainSpec::disc([0.0, 0.0], 1.0, 0.1)).unwrap();
        let f = build(&LagrangianSpec::named("double_well")).unwrap();
        let fss = f.convexification().unwrap();
        let u: Vec<f64> = m.vertices.iter().map(|p| 0.5 * (p.x * p.x + p.y * p.y) - 0.5).collect();
        let g = vec![1.0; m.n_vertices()];
        let r = vitali_repair(&u, f.as_ref(), fss.as_ref(), &[disc_set()], &g, &m, &RepairParams::default()).unwrap();
        for h in [&r.report.hist_before, &r.report.hist_after] {
            assert!((h.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert_eq!(h.len() + 1, r.report.hist_edges.len());
        }
    }
}
