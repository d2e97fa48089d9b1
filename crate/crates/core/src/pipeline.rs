//! Orchestration: hypothesis checks, then the convex pipeline (smoothing,
//! minimizing sequence, barriers, certificates) or the nonconvex one (relaxed
//! solve, component detection, covering repair).

use crate::barriers::{build_barriers, build_lower_barrier, verify_comparison, LowerBarrier};
use crate::certify::{check_growth, holder_certificate, lipschitz_certificate, LipschitzCertificate, LipschitzParams};
use crate::error::{Error, Result};
use crate::lagrangian::{biconjugate, check_hypotheses, conjugate, Grid2, Lagrangian, SharedLagrangian};
use crate::mesh::{check_lbsc, check_uniform_convexity, triangulate, LbscReport, Mesh};
use crate::nonconvex::{detect_components, vitali_repair, NonconvexSet};
use crate::report::*;
use crate::scenario::Scenario;
use crate::smoothing::{smooth_g, smooth_lagrangian, SmoothingSchedule};
use crate::solver::{assemble, minimize, minimizing_sequence, SolveResult};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// How far a run goes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Check,
    Conjugate,
    Solve,
    Certify,
    Repair,
    Run,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Check => "check",
            Stage::Conjugate => "conjugate",
            Stage::Solve => "solve",
            Stage::Certify => "certify",
            Stage::Repair => "repair",
            Stage::Run => "run",
        }
    }
}

pub struct RunOutcome {
    pub mesh: Mesh,
    pub report: RunReport,
    pub artifacts: Artifacts,
}

/// Primal and dual grids for component detection of f − f**.
const DETECT_PRIMAL: (f64, usize) = (2.0, 161);
const DETECT_DUAL: (f64, usize) = (40.0, 1601);
/// Grid for the `conjugate` stage output.
const CONJUGATE_PRIMAL_N: usize = 201;
const CONJUGATE_DUAL_N: usize = 101;

struct Data {
    mesh: Mesh,
    f: SharedLagrangian,
    g: Vec<f64>,
    phi: Vec<f64>,
    lbsc: LbscReport,
}

fn error_failure(report: &mut RunReport, check: &str, e: &Error) {
    let kind = match e {
        Error::Hypothesis(_) | Error::NotConvex { .. } | Error::LbscFailed { .. } => FailureKind::Hypothesis,
        _ => FailureKind::Error,
    };
    report.fail(kind, check, e.to_string());
}

fn run_checks(s: &Scenario, d: &Data, report: &mut RunReport) -> Option<Vec<NonconvexSet>> {
    let radius = s.checks.convexity_radius.unwrap_or(d.mesh.diam);
    let uniform = match check_uniform_convexity(&d.mesh, radius, s.checks.convexity_samples) {
        Ok(u) => u,
        Err(e) => {
            error_failure(report, "uniform_convexity", &e);
            return None;
        }
    };
    if !uniform.pass {
        report.fail(
            FailureKind::Hypothesis,
            "uniform_convexity",
            format!("domain is not {radius}-uniformly convex (worst margin {:.3e})", uniform.worst_margin),
        );
    }
    if !d.lbsc.pass {
        report.fail(
            FailureKind::Hypothesis,
            "lbsc",
            format!(
                "boundary datum fails the lower bounded slope condition with M = {} at {} boundary samples (minimal rank {:?})",
                d.lbsc.rank,
                d.lbsc.offending.len(),
                d.lbsc.minimal_rank
            ),
        );
    }

    // Without a closed-form hull the hypotheses are tested on f itself; the
    // component detection below then decides whether f was convex after all.
    let (target, on): (SharedLagrangian, &str) = match (s.pipeline.nonconvex, d.f.convexification()) {
        (true, Some(c)) => (c, "f**"),
        _ => (d.f.clone(), "f"),
    };
    let hyp = check_hypotheses(target.as_ref(), s.checks.hypothesis_box, s.checks.hypothesis_samples);
    if !hyp.pass() {
        report.fail(
            FailureKind::Hypothesis,
            "lagrangian",
            format!(
                "{on} fails the structural hypotheses: nonnegative {}, finite {}, convex far out {} (worst margin {:.3e}), superlinear {}",
                hyp.nonnegative_pass, hyp.finite_pass, hyp.far_convexity_pass, hyp.far_convexity_margin, hyp.superlinear
            ),
        );
    }

    let mut sets = None;
    if s.pipeline.nonconvex {
        let grid = biconjugate(
            d.f.as_ref(),
            &Grid2::centered(DETECT_PRIMAL.0, DETECT_PRIMAL.1),
            &Grid2::centered(DETECT_DUAL.0, DETECT_DUAL.1),
        );
        match grid.and_then(|g| detect_components(d.f.as_ref(), &g, s.tolerances.tol_detect)) {
            Ok(v) if !v.is_empty() && d.f.convexification().is_none() => {
                report.fail(
                    FailureKind::Hypothesis,
                    "convexification",
                    format!("{} nonconvexity components but no closed-form convexification", v.len()),
                );
            }
            Ok(v) => sets = Some(v),
            Err(e) => error_failure(report, "components", &e),
        }
    }
    report.checks = Some(ChecksReport {
        uniform_convexity: uniform,
        lbsc: LbscSummary::of(&d.lbsc, &d.mesh),
        hypotheses_on: on.into(),
        hypotheses: Some(hyp),
        components: sets.as_ref().map(|v| v.iter().map(ComponentSummary::of).collect()),
    });
    sets
}

fn certify_field(
    s: &Scenario,
    k: usize,
    u: &[f64],
    grad: &[crate::geom::Vec2],
    mesh: &Mesh,
    f: &dyn Lagrangian,
    g_norm: f64,
) -> Result<(LipschitzSummary, LipschitzCertificate)> {
    let meta = f.meta();
    let params = LipschitzParams {
        r: meta.r,
        eps: meta.eps,
        g_norm,
        c_sobolev: s.c_sobolev,
        tol_lip: s.tolerances.tol_lip,
        tol_theta: s.tolerances.tol_theta,
        n_anchors: 8,
    };
    let cert = lipschitz_certificate(u, grad, mesh, &params)?;
    Ok((LipschitzSummary::of(k, meta.r, meta.eps, g_norm, &cert), cert))
}

fn lipschitz_failures(report: &mut RunReport, l: &LipschitzSummary) {
    if !l.pass {
        report.fail(
            FailureKind::Certificate,
            "lipschitz",
            format!("k = {}: worst |grad u| dist / Q = {:.4} > 1", l.k, l.worst_ratio),
        );
    }
    if !l.theta_pass {
        let worst = l.theta.iter().filter_map(|t| t.vanish_q).fold(0.0, f64::max);
        report.fail(
            FailureKind::Certificate,
            "theta",
            format!("k = {}: Theta vanishes only after q = {worst:.4} > q0 = {:.4}", l.k, l.constants.q0),
        );
    }
}

fn convex_pipeline(s: &Scenario, stage: Stage, d: &Data, report: &mut RunReport, art: &mut Artifacts) -> Result<()> {
    let schedule = SmoothingSchedule::new(s.schedule.k.clone())?;
    let opts = s.solver_options();
    let init = vec![0.0; d.mesh.n_vertices()];
    let seq = minimizing_sequence(&d.f, &d.g, &d.phi, &schedule, &d.mesh, &init, s.checks.smoothing_box, &opts)?;
    report.sequence = Some(SequenceSummary::of(&seq));
    if let Some(k) = seq.truncated_at {
        report.fail(FailureKind::Nonconvergence, "solve", format!("solver did not converge at k = {k}; sequence truncated"));
    }
    let last = seq.steps.last().ok_or_else(|| Error::Scenario("empty schedule".into()))?;
    art.u = Some(last.result.u.clone());
    art.grad = Some(last.result.grad.clone());
    if stage == Stage::Solve {
        return Ok(());
    }

    let converged: Vec<_> = seq.steps.iter().filter(|st| st.result.converged).collect();
    let barriers = build_barriers(d.f.as_ref(), &d.g, &d.phi, &d.mesh, None)?;
    let ell: Option<LowerBarrier> = if d.lbsc.pass { build_lower_barrier(&d.lbsc, &d.phi, &d.mesh).ok() } else { None };
    report.barriers = Some(BarrierSummary::of(&barriers, ell.as_ref()));
    let ell_enforced = ell.is_some() && d.g.iter().all(|&v| v <= 0.0);
    for st in &converged {
        let cmp = verify_comparison(&st.result.u, &barriers, ell.as_ref(), s.tolerances.tol_comparison);
        let sum = ComparisonSummary::of(st.k, &cmp, ell_enforced);
        if !sum.pass {
            report.fail(
                FailureKind::Certificate,
                "comparison",
                format!(
                    "k = {}: sandwich margins lower {:.3e}, upper {:.3e}, ell {:?}",
                    st.k, sum.min_lower, sum.min_upper, sum.min_ell
                ),
            );
        }
        report.comparison.push(sum);
    }

    let g_norm = d.g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut last_cert = None;
    for st in &converged {
        let (sum, cert) = certify_field(s, st.k, &st.result.u, &st.result.grad, &d.mesh, d.f.as_ref(), g_norm)?;
        lipschitz_failures(report, &sum);
        report.lipschitz.push(sum);
        last_cert = Some(cert);
    }
    if let Some(cert) = last_cert {
        art.ratio = Some(cert.ratio);
        art.theta = cert.theta;
    }
    if report.lipschitz.len() > 1 {
        let inv = invariance(&report.lipschitz, s.tolerances.tol_invariance);
        if !inv.pass {
            report.fail(
                FailureKind::Certificate,
                "invariance",
                format!("worst ratio spread {:.3e} exceeds sup-norm spread {:.3e} + tolerance", inv.ratio_spread, inv.u_spread),
            );
        }
        report.invariance = Some(inv);
    }

    if let Some(h) = s.checks.holder {
        let cert = holder_certificate(&last.result.u, &d.mesh, d.f.as_ref(), h.p, h.c)?;
        if !cert.pass {
            report.fail(
                FailureKind::Certificate,
                "holder",
                format!("growth f >= {}|xi|^{} verified: {}; constant {}", h.c, h.p, check_growth(d.f.as_ref(), h.c, h.p, 4.0), cert.constant),
            );
        }
        report.holder = Some(cert);
    }

    if s.checks.gradient_agreement {
        let ag = agreement(s, d, &barriers)?;
        if !ag.pass {
            report.fail(
                FailureKind::Certificate,
                "agreement",
                format!("gradients differ by {:.3e} outside the ball of radius {}", ag.max_difference, ag.threshold),
            );
        }
        report.agreement = Some(ag);
    }
    Ok(())
}

pub fn invariance(l: &[LipschitzSummary], tol: f64) -> InvarianceSummary {
    let ratios: Vec<f64> = l.iter().map(|c| c.worst_ratio).collect();
    let qs: Vec<f64> = l.iter().map(|c| c.constants.q).collect();
    let spread = |v: &[f64], by_max: bool| {
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        (hi - lo) / if by_max { hi } else { lo }
    };
    let u_sups: Vec<f64> = l.iter().map(|c| c.u_sup).collect();
    let ratio_spread = spread(&ratios, true);
    let u_spread = spread(&u_sups, true);
    InvarianceSummary {
        worst_ratios: ratios,
        ratio_spread,
        u_spread,
        q_spread: spread(&qs, false),
        u_sups,
        tolerance: tol,
        pass: ratio_spread <= u_spread + tol,
    }
}

/// Two solves of the smoothed functional at the last k of the schedule (no
/// quadratic regularizer), from zero and from the midpoint of the barrier
/// sandwich, compared on triangles where either gradient leaves the ball of
/// radius r+1.
fn agreement(s: &Scenario, d: &Data, barriers: &crate::barriers::BarrierField) -> Result<AgreementSummary> {
    let k = *s.schedule.k.last().ok_or_else(|| Error::Scenario("empty schedule".into()))?;
    let fk = smooth_lagrangian(&d.f, k, s.checks.smoothing_box)?;
    let gk = smooth_g(&d.g, k, &d.mesh);
    let func = assemble(&d.mesh, &fk, &gk, &d.phi)?;
    let opts = s.solver_options();
    let a = minimize(&func, &vec![0.0; d.mesh.n_vertices()], &opts)?;
    let mid: Vec<f64> = (0..d.mesh.n_vertices()).map(|v| 0.5 * (barriers.lower(v) + barriers.upper(v))).collect();
    let b = minimize(&func, &mid, &opts)?;
    let threshold = d.f.meta().r + 1.0;
    let mut n = 0;
    let mut worst: f64 = 0.0;
    for (ga, gb) in a.grad.iter().zip(&b.grad) {
        if ga.norm() > threshold || gb.norm() > threshold {
            n += 1;
            worst = worst.max((*ga - *gb).norm());
        }
    }
    Ok(AgreementSummary {
        threshold,
        n_compared: n,
        max_difference: worst,
        tolerance: s.tolerances.tol_agreement,
        pass: a.converged && b.converged && worst <= s.tolerances.tol_agreement,
        first: SolveSummary::of(&a),
        second: SolveSummary::of(&b),
    })
}

fn nonconvex_pipeline(
    s: &Scenario,
    stage: Stage,
    d: &Data,
    sets: &[NonconvexSet],
    report: &mut RunReport,
    art: &mut Artifacts,
) -> Result<()> {
    // A convex f is its own hull.
    let fss = d.f.convexification().unwrap_or_else(|| d.f.clone());
    let func = assemble(&d.mesh, fss.as_ref(), &d.g, &d.phi)?;
    let relaxed: SolveResult = minimize(&func, &vec![0.0; d.mesh.n_vertices()], &s.solver_options())?;
    report.relaxed_solve = Some(SolveSummary::of(&relaxed));
    art.u = Some(relaxed.u.clone());
    art.grad = Some(relaxed.grad.clone());
    if !relaxed.converged {
        report.fail(FailureKind::Nonconvergence, "solve", "relaxed solve did not converge");
        return Ok(());
    }
    if stage == Stage::Solve {
        return Ok(());
    }
    let g_norm = d.g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let (sum, cert) = certify_field(s, 0, &relaxed.u, &relaxed.grad, &d.mesh, fss.as_ref(), g_norm)?;
    lipschitz_failures(report, &sum);
    report.lipschitz.push(sum);
    art.ratio = Some(cert.ratio);
    art.theta = cert.theta;
    if stage == Stage::Certify {
        return Ok(());
    }

    let repaired = vitali_repair(&relaxed.u, d.f.as_ref(), fss.as_ref(), sets, &d.g, &d.mesh, &s.repair_params())?;
    let rep = RepairSummary::of(&repaired.report);
    if !rep.complete {
        report.fail(
            FailureKind::Certificate,
            "repair",
            format!(
                "partial repair: offending area fraction {:.4e} > {:.1e} after {} patches",
                rep.offending_final, s.tolerances.tol_area, rep.n_patches
            ),
        );
    }
    if !rep.pass_energy {
        report.fail(
            FailureKind::Certificate,
            "repair_energy",
            format!("relaxed energy rose from {} to {}", rep.relaxed_initial, rep.relaxed_final),
        );
    }
    if !rep.pass_outside {
        report.fail(FailureKind::Certificate, "repair_outside", format!("I - I** on non-offending triangles is {:.3e}", rep.outside_gap));
    }
    report.repair = Some(rep);
    art.u_repaired = Some(repaired.u);
    art.patches = repaired.report.patches;
    Ok(())
}

/// Runs `scenario` up to `stage`. Failures of hypotheses, convergence and
/// certificates are recorded in the report; only malformed input or I/O
/// problems are returned as errors.
pub fn run(s: &Scenario, stage: Stage) -> Result<RunOutcome> {
    s.validate()?;
    let mesh = triangulate(&s.domain)?;
    let f = s.build_lagrangian()?;
    let g = s.source_values(&mesh)?;
    let phi = s.trace_values(&mesh)?;
    let lbsc = check_lbsc(&mesh, &phi, s.checks.lbsc_rank);
    let d = Data { mesh, f, g, phi, lbsc };
    let mut report = RunReport::new(s, stage.name(), &d.mesh);
    let mut art = Artifacts::default();

    let sets = run_checks(s, &d, &mut report);

    if stage == Stage::Conjugate {
        let b = s.checks.hypothesis_box;
        let primal = Grid2::centered(b, CONJUGATE_PRIMAL_N);
        let target = if s.pipeline.nonconvex { d.f.convexification().unwrap_or(d.f.clone()) } else { d.f.clone() };
        let slope = (0..64)
            .map(|i| target.gradient(crate::geom::Vec2::from_angle(i as f64 * std::f64::consts::PI / 32.0) * b).norm())
            .fold(0.0, f64::max);
        let c = conjugate(target.as_ref(), &primal, &Grid2::centered(slope.max(1.0), CONJUGATE_DUAL_N))?;
        report.conjugate = Some(ConjugateSummary::of(&c, b, CONJUGATE_PRIMAL_N));
        art.conjugate = Some(c);
        return Ok(RunOutcome { mesh: d.mesh, report, artifacts: art });
    }
    if stage == Stage::Check || s.pipeline.check_only || report.has(FailureKind::Hypothesis) || report.has(FailureKind::Error) {
        return Ok(RunOutcome { mesh: d.mesh, report, artifacts: art });
    }

    let result = if s.pipeline.nonconvex {
        nonconvex_pipeline(s, stage, &d, sets.as_deref().unwrap_or(&[]), &mut report, &mut art)
    } else if stage == Stage::Repair {
        Err(Error::Scenario("the repair stage needs pipeline.nonconvex = true".into()))
    } else {
        convex_pipeline(s, stage, &d, &mut report, &mut art)
    };
    match result {
        Ok(()) => {}
        Err(e @ Error::Scenario(_)) => return Err(e),
        Err(e) => error_failure(&mut report, "pipeline", &e),
    }
    Ok(RunOutcome { mesh: d.mesh, report, artifacts: art })
}

/// Runs and writes the bundle into `dir`.
pub fn run_to_dir(s: &Scenario, stage: Stage, dir: &Path, scenario_file: Option<&Path>) -> Result<RunOutcome> {
    let started = std::time::SystemTime::now();
    let t0 = std::time::Instant::now();
    let out = run(s, stage)?;
    let meta = Metadata {
        tool: "lipcert".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        started_unix: started.duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
        elapsed_seconds: t0.elapsed().as_secs_f64(),
        scenario_file: scenario_file.map(|p| p.display().to_string()),
    };
    write_bundle(dir, &out.mesh, &out.report, &out.artifacts, &meta)?;
    Ok(out)
}
