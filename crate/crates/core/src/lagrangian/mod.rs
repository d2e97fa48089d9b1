//! Lagrangians f(ξ) on ℝ², their sampled conjugates, and structural checks.

mod catalog;
mod conjugate;
mod hypotheses;

pub use catalog::{build, catalog_entries, CatalogEntry, LagrangianSpec};
pub use conjugate::{biconjugate, conjugate, conjugate_brute_force, legendre_1d, ConjugateGrid, Grid2};
pub use hypotheses::{check_hypotheses, check_hypotheses_with, is_superlinear, ConvexityReport, ConvexityWitness, HypothesisOptions};

use crate::geom::Vec2;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagrangianMeta {
    pub name: String,
    /// Radius of the ball outside of which f is uniformly convex (0 if everywhere).
    pub r: f64,
    /// Uniform convexity modulus outside the ball of radius r+1.
    pub eps: f64,
    /// `(c, p)` with f(ξ) ≥ c|ξ|^p.
    pub p_growth: Option<(f64, f64)>,
}

pub type RadialFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// f(ξ) = F(|ξ|) together with the right derivative F′.
#[derive(Clone)]
pub struct RadialProfile {
    pub value: RadialFn,
    pub deriv: RadialFn,
}

pub trait Lagrangian: Send + Sync {
    fn meta(&self) -> &LagrangianMeta;

    fn value(&self, xi: Vec2) -> f64;

    /// A (sub)gradient. The default is a central difference.
    fn gradient(&self, xi: Vec2) -> Vec2 {
        let h = 1e-6 * (1.0 + xi.norm());
        let dx = Vec2::new(h, 0.0);
        let dy = Vec2::new(0.0, h);
        Vec2::new(
            (self.value(xi + dx) - self.value(xi - dx)) / (2.0 * h),
            (self.value(xi + dy) - self.value(xi - dy)) / (2.0 * h),
        )
    }

    fn value_and_gradient(&self, xi: Vec2) -> (f64, Vec2) {
        (self.value(xi), self.gradient(xi))
    }

    /// Radial profile when f depends on |ξ| only.
    fn radial(&self) -> Option<RadialProfile> {
        None
    }

    /// Closed-form f** when it is known.
    fn convexification(&self) -> Option<SharedLagrangian> {
        None
    }
}

pub type SharedLagrangian = Arc<dyn Lagrangian>;

pub struct RadialLagrangian {
    meta: LagrangianMeta,
    profile: RadialProfile,
    convex: Option<SharedLagrangian>,
}

impl RadialLagrangian {
    pub fn new(meta: LagrangianMeta, value: RadialFn, deriv: RadialFn) -> Self {
        RadialLagrangian { meta, profile: RadialProfile { value, deriv }, convex: None }
    }

    pub fn with_convexification(mut self, fss: SharedLagrangian) -> Self {
        self.convex = Some(fss);
        self
    }
}

impl Lagrangian for RadialLagrangian {
    fn meta(&self) -> &LagrangianMeta {
        &self.meta
    }

    fn value(&self, xi: Vec2) -> f64 {
        (self.profile.value)(xi.norm())
    }

    fn gradient(&self, xi: Vec2) -> Vec2 {
        let t = xi.norm();
        if t == 0.0 {
            return Vec2::ZERO;
        }
        xi * ((self.profile.deriv)(t) / t)
    }

    fn value_and_gradient(&self, xi: Vec2) -> (f64, Vec2) {
        let t = xi.norm();
        let v = (self.profile.value)(t);
        if t == 0.0 {
            return (v, Vec2::ZERO);
        }
        (v, xi * ((self.profile.deriv)(t) / t))
    }

    fn radial(&self) -> Option<RadialProfile> {
        Some(self.profile.clone())
    }

    fn convexification(&self) -> Option<SharedLagrangian> {
        self.convex.clone()
    }
}

/// Lagrangian given by an arbitrary closure; gradients by central differences.
pub struct FnLagrangian {
    meta: LagrangianMeta,
    f: Arc<dyn Fn(Vec2) -> f64 + Send + Sync>,
}

impl FnLagrangian {
    pub fn new(meta: LagrangianMeta, f: impl Fn(Vec2) -> f64 + Send + Sync + 'static) -> Self {
        FnLagrangian { meta, f: Arc::new(f) }
    }
}

impl Lagrangian for FnLagrangian {
    fn meta(&self) -> &LagrangianMeta {
        &self.meta
    }

    fn value(&self, xi: Vec2) -> f64 {
        (self.f)(xi)
    }
}

/// h(ξ) = f(ξ) + (1/k)|ξ|².
pub struct Regularized {
    base: SharedLagrangian,
    inv_k: f64,
    meta: LagrangianMeta,
}

impl Regularized {
    pub fn new(base: SharedLagrangian, k: f64) -> Self {
        let m = base.meta();
        let meta = LagrangianMeta {
            name: format!("{}+|xi|^2/{}", m.name, k),
            r: m.r,
            eps: m.eps + 2.0 / k,
            p_growth: m.p_growth,
        };
        Regularized { base, inv_k: 1.0 / k, meta }
    }

    pub fn weight(&self) -> f64 {
        self.inv_k
    }
}

impl Lagrangian for Regularized {
    fn meta(&self) -> &LagrangianMeta {
        &self.meta
    }

    fn value(&self, xi: Vec2) -> f64 {
        self.base.value(xi) + self.inv_k * xi.norm2()
    }

    fn gradient(&self, xi: Vec2) -> Vec2 {
        self.base.gradient(xi) + xi * (2.0 * self.inv_k)
    }

    fn value_and_gradient(&self, xi: Vec2) -> (f64, Vec2) {
        let (v, g) = self.base.value_and_gradient(xi);
        (v + self.inv_k * xi.norm2(), g + xi * (2.0 * self.inv_k))
    }

    fn radial(&self) -> Option<RadialProfile> {
        let base = self.base.radial()?;
        let w = self.inv_k;
        let (bv, bd) = (base.value.clone(), base.deriv.clone());
        Some(RadialProfile {
            value: Arc::new(move |t| bv(t) + w * t * t),
            deriv: Arc::new(move |t| bd(t) + 2.0 * w * t),
        })
    }
}

/// Midpoint convexity defect of f over a deterministic set of pairs in the box
/// `[-b, b]²`: the largest value of f((ξ+ζ)/2) − (f(ξ)+f(ζ))/2.
pub fn midpoint_convexity_defect(f: &dyn Lagrangian, b: f64, n: usize) -> f64 {
    let pts = hypotheses::halton_points(2 * n, b);
    let mut worst = f64::NEG_INFINITY;
    for i in 0..n {
        let (x, y) = (pts[2 * i], pts[2 * i + 1]);
        let d = f.value((x + y) * 0.5) - 0.5 * (f.value(x) + f.value(y));
        worst = worst.max(d);
    }
    worst
}
