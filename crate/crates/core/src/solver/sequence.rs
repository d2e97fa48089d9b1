use super::functional::assemble;
use super::optimize::{minimize, SolveResult, SolverOptions};
use crate::error::Result;
use crate::lagrangian::SharedLagrangian;
use crate::mesh::Mesh;
use crate::smoothing::{regularize, smooth_g, smooth_lagrangian, SmoothingBand, SmoothingSchedule};
use serde::Serialize;
use std::sync::Arc;

#[derive(Debug, Clone, Serialize)]
pub struct SequenceStep {
    pub k: usize,
    pub band: SmoothingBand,
    pub result: SolveResult,
    /// I(u_k) evaluated with the original f and g.
    pub true_energy: f64,
    /// ‖g_k − g‖∞
    pub g_dev: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SequenceReport {
    pub steps: Vec<SequenceStep>,
    /// Set when a solve did not converge; later values of k were skipped.
    pub truncated_at: Option<usize>,
}

impl SequenceReport {
    pub fn true_energies(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.true_energy).collect()
    }
}

/// Minimizes h_k = f_k + |ξ|²/k with source g_k for each k of the schedule,
/// warm-starting every solve from the previous minimizer.
#[allow(clippy::too_many_arguments)]
pub fn minimizing_sequence(
    f: &SharedLagrangian,
    g: &[f64],
    phi: &[f64],
    schedule: &SmoothingSchedule,
    mesh: &Mesh,
    init: &[f64],
    box_half: f64,
    opts: &SolverOptions,
) -> Result<SequenceReport> {
    let truth = assemble(mesh, f.as_ref(), g, phi)?;
    let mut warm = init.to_vec();
    let mut steps = Vec::new();
    let mut truncated_at = None;
    for &k in &schedule.ks {
        let fk = smooth_lagrangian(f, k, box_half)?;
        let band = fk.band;
        let hk = regularize(Arc::new(fk), k);
        let gk = smooth_g(g, k, mesh);
        let g_dev = gk.iter().zip(g).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let func = assemble(mesh, &hk, &gk, phi)?;
        let result = minimize(&func, &warm, opts)?;
        let true_energy = truth.energy(&result.u);
        let converged = result.converged;
        warm.clone_from(&result.u);
        steps.push(SequenceStep { k, band, result, true_energy, g_dev });
        if !converged {
            truncated_at = Some(k);
            break;
        }
    }
    Ok(SequenceReport { steps, truncated_at })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Vec2;
    use crate::lagrangian::{build, LagrangianSpec};
    use crate::mesh::{triangulate, DomainSpec};

    #[test]
    fn affine_data_gives_the_same_minimizer_for_every_k() {
        let m = triangulate(&DomainSpec::disc([0.0, 0.0], 1.0, 0.15)).unwrap();
        let f = build(&LagrangianSpec::named("torsion")).unwrap();
        let a = Vec2::new(1.5, -0.5);
        let phi: Vec<f64> = m.boundary_points().iter().map(|p| a.dot(*p)).collect();
        let sched = SmoothingSchedule::new(vec![4, 16]).unwrap();
        let rep = minimizing_sequence(
            &f,
            &vec![0.0; m.n_vertices()],
            &phi,
            &sched,
            &m,
            &vec![0.0; m.n_vertices()],
            4.0,
            &SolverOptions::default(),
        )
        .unwrap();
        assert_eq!(rep.steps.len(), 2);
        for s in &rep.steps {
            for (p, u) in m.vertices.iter().zip(&s.result.u) {
                assert!((u - a.dot(*p)).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn poisson_true_energies_decrease_towards_the_limit() {
        let m = triangulate(&DomainSpec::disc([0.0, 0.0], 1.0, 1.0 / 16.0)).unwrap();
        let f = build(&LagrangianSpec::named("quadratic")).unwrap();
        let sched = SmoothingSchedule::new(vec![4, 16, 64]).unwrap();
        let rep = minimizing_sequence(
            &f,
            &vec![1.0; m.n_vertices()],
            &vec![0.0; m.boundary_loop.len()],
            &sched,
            &m,
            &vec![0.0; m.n_vertices()],
            2.0,
            &SolverOptions::default(),
        )
        .unwrap();
        assert!(rep.truncated_at.is_none());
        let e = rep.true_energies();
        assert!(e.windows(2).all(|w| w[1] <= w[0] + 1e-8), "{e:?}");
        assert!((e[2] + std::f64::consts::PI / 16.0).abs() < 5e-3);
    }

    #[test]
    fn nonconvergence_truncates() {
        let m = triangulate(&DomainSpec::disc([0.0, 0.0], 1.0, 0.1)).unwrap();
        let f = build(&LagrangianSpec::named("quadratic")).unwrap();
        let sched = SmoothingSchedule::new(vec![4, 16]).unwrap();
        let opts = SolverOptions { max_iters: 3, ..Default::default() };
        let rep = minimizing_sequence(
            &f,
            &vec![1.0; m.n_vertices()],
            &vec![0.0; m.boundary_loop.len()],
            &sched,
            &m,
            &vec![0.0; m.n_vertices()],
            2.0,
            &opts,
        )
        .unwrap();
        assert_eq!(rep.steps.len(), 1);
        assert_eq!(rep.truncated_at, Some(4));
    }
}
