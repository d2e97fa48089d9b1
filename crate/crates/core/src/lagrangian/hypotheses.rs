use super::{conjugate, Grid2, Lagrangian};
use crate::geom::Vec2;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvexityWitness {
    pub xi: Vec2,
    pub zeta: Vec2,
    pub theta: f64,
    pub margin: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvexityReport {
    pub r: f64,
    pub eps: f64,
    pub nonnegative_pass: bool,
    pub finite_pass: bool,
    /// Tested with |ξ| > r+1 and ζ anywhere in the sample box.
    pub far_convexity_pass: bool,
    pub far_convexity_margin: f64,
    /// Tested with both points outside the ball of radius r+1.
    pub far_convexity_both_outside_pass: bool,
    pub far_convexity_both_outside_margin: f64,
    pub superlinear: bool,
    pub witnesses: Vec<ConvexityWitness>,
    pub n_pairs: usize,
    pub tolerance: f64,
}

impl ConvexityReport {
    pub fn pass(&self) -> bool {
        self.nonnegative_pass && self.finite_pass && self.far_convexity_pass && self.superlinear
    }
}

#[derive(Debug, Clone, Copy)]
pub struct HypothesisOptions {
    pub thetas: [f64; 3],
    pub max_witnesses: usize,
}

impl Default for HypothesisOptions {
    fn default() -> Self {
        HypothesisOptions { thetas: [0.25, 0.5, 0.75], max_witnesses: 16 }
    }
}

fn radical_inverse(mut i: usize, base: usize) -> f64 {
    let mut inv = 1.0 / base as f64;
    let mut out = 0.0;
    while i > 0 {
        out += (i % base) as f64 * inv;
        i /= base;
        inv /= base as f64;
    }
    out
}

/// First `n` points of the (2,3) Halton sequence mapped to `[-b, b]²`, skipping index 0.
pub(crate) fn halton_points(n: usize, b: f64) -> Vec<Vec2> {
    (1..=n)
        .map(|i| Vec2::new(b * (2.0 * radical_inverse(i, 2) - 1.0), b * (2.0 * radical_inverse(i, 3) - 1.0)))
        .collect()
}

/// θf(ξ)+(1−θ)f(ζ) − (ε/2)θ(1−θ)|ξ−ζ|² − f(θξ+(1−θ)ζ)
fn far_convexity_margin_at(f: &dyn Lagrangian, eps: f64, xi: Vec2, zeta: Vec2, theta: f64) -> f64 {
    theta * f.value(xi) + (1.0 - theta) * f.value(zeta)
        - 0.5 * eps * theta * (1.0 - theta) * (xi - zeta).norm2()
        - f.value(xi * theta + zeta * (1.0 - theta))
}

/// Superlinearity test: the conjugate over the primal box `[-2b, 2b]²` must attain
/// its supremum inside the box on two nested dual boxes of half-width b/4 and b/2.
pub fn is_superlinear(f: &dyn Lagrangian, b: f64) -> bool {
    let primal = Grid2::centered(2.0 * b, 161);
    [0.25 * b, 0.5 * b].iter().all(|&d| {
        conjugate(f, &primal, &Grid2::centered(d, 21)).map(|c| c.all_finite()).unwrap_or(false)
    })
}

pub fn check_hypotheses(f: &dyn Lagrangian, sample_box: f64, n_samples: usize) -> ConvexityReport {
    check_hypotheses_with(f, sample_box, n_samples, HypothesisOptions::default())
}

pub fn check_hypotheses_with(
    f: &dyn Lagrangian,
    sample_box: f64,
    n_samples: usize,
    opts: HypothesisOptions,
) -> ConvexityReport {
    let meta = f.meta();
    let (r, eps) = (meta.r, meta.eps);
    let pts = halton_points(n_samples, sample_box);
    let vals: Vec<f64> = pts.iter().map(|&p| f.value(p)).collect();
    let scale = vals.iter().filter(|v| v.is_finite()).fold(1.0f64, |m, v| m.max(v.abs()));
    let tolerance = 1e-9 * scale;

    let f0 = f.value(Vec2::ZERO);
    let nonnegative_pass = f0 == 0.0 && vals.iter().all(|&v| v >= -tolerance);
    let finite_pass = f0.is_finite() && vals.iter().all(|v| v.is_finite());

    let outside: Vec<Vec2> = pts.iter().copied().filter(|p| p.norm() > r + 1.0).collect();
    let mut worst_one = f64::INFINITY;
    let mut worst_both = f64::INFINITY;
    let mut witnesses = Vec::new();
    let mut n_pairs = 0;
    if !outside.is_empty() {
        // Every outside point is paired with a few partners spread over the sample list.
        let per = n_samples.div_ceil(outside.len()).max(1);
        for (i, &xi) in outside.iter().enumerate() {
            for m in 0..per {
                let s = i * per + m;
                let zeta = pts[(s * 7919 + 13) % pts.len()];
                let zeta_out = outside[(s * 104729 + 1) % outside.len()];
                for &theta in &opts.thetas {
                    n_pairs += 1;
                    let m1 = far_convexity_margin_at(f, eps, xi, zeta, theta);
                    worst_one = worst_one.min(m1);
                    if m1 < -tolerance && witnesses.len() < opts.max_witnesses {
                        witnesses.push(ConvexityWitness { xi, zeta, theta, margin: m1 });
                    }
                    worst_both = worst_both.min(far_convexity_margin_at(f, eps, xi, zeta_out, theta));
                }
            }
        }
    }
    if n_pairs == 0 {
        worst_one = 0.0;
        worst_both = 0.0;
    }

    ConvexityReport {
        r,
        eps,
        nonnegative_pass,
        finite_pass,
        far_convexity_pass: worst_one >= -tolerance,
        far_convexity_margin: worst_one,
        far_convexity_both_outside_pass: worst_both >= -tolerance,
        far_convexity_both_outside_margin: worst_both,
        superlinear: is_superlinear(f, sample_box),
        witnesses,
        n_pairs,
        tolerance,
    }
}
