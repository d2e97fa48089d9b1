//! Smooth approximations f_k ≤ f of a convex Lagrangian, their quadratic
//! regularizations h_k, and mollified source terms g_k.
//!
//! A radial f = F(|ξ|) is handled in one dimension: the Moreau envelope with
//! parameter μ_k = 1/k is computed through the proximal point of F, then averaged
//! over a symmetric two-dimensional Gauss–Hermite stencil of width σ_k = μ_k/4.
//! The derivative of the result along a ray is tabulated and integrated exactly,
//! so the value and gradient seen by the solver are consistent to rounding.
//! Non-radial Lagrangians go through a grid Moreau envelope and a binomial blur.

use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::lagrangian::{
    midpoint_convexity_defect, ConjugateGrid, Grid2, Lagrangian, LagrangianMeta, RadialProfile, Regularized,
    SharedLagrangian,
};
use crate::mesh::Mesh;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothingSchedule {
    pub ks: Vec<usize>,
}

impl SmoothingSchedule {
    pub fn new(ks: Vec<usize>) -> Result<Self> {
        if ks.is_empty() || ks[0] == 0 || ks.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument(format!("schedule must be a strictly increasing list of positive k, got {ks:?}")));
        }
        Ok(SmoothingSchedule { ks })
    }

    pub fn mu(k: usize) -> f64 {
        1.0 / k as f64
    }

    pub fn sigma(k: usize) -> f64 {
        0.25 / k as f64
    }
}

/// Measured band of one smoothing step on the working box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothingBand {
    pub k: usize,
    pub mu: f64,
    pub sigma: f64,
    /// sup over box samples of f − f_k
    pub delta: f64,
    /// sup over box samples of f_k − f (zero up to rounding when f_k ≤ f)
    pub upper_excess: f64,
}

const GH_NODES: [f64; 5] = [-2.020_182_870_456_086, -0.958_572_464_613_818_5, 0.0, 0.958_572_464_613_818_5, 2.020_182_870_456_086];
const GH_WEIGHTS: [f64; 5] = [0.019_953_242_059_045_91, 0.393_619_323_152_241_2, 0.945_308_720_482_941_9, 0.393_619_323_152_241_2, 0.019_953_242_059_045_91];

/// Nodes (in units of σ) and normalized weights of the tensor Gauss–Hermite rule
/// for a standard two-dimensional Gaussian.
fn stencil() -> Vec<(Vec2, f64)> {
    let s = std::f64::consts::SQRT_2;
    let total: f64 = GH_WEIGHTS.iter().sum::<f64>().powi(2);
    let mut out = Vec::with_capacity(25);
    for (a, wa) in GH_NODES.iter().zip(GH_WEIGHTS) {
        for (b, wb) in GH_NODES.iter().zip(GH_WEIGHTS) {
            out.push((Vec2::new(a * s, b * s), wa * wb / total));
        }
    }
    out
}

/// Proximal point of a convex nondecreasing radial profile:
/// argmin over s ∈ [0, t] of F(s) + (t − s)²/(2μ).
fn radial_prox(p: &RadialProfile, t: f64, mu: f64) -> f64 {
    let psi = |s: f64| (p.deriv)(s) + (s - t) / mu;
    if t <= 0.0 || psi(0.0) >= 0.0 {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0, t);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if psi(mid) >= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-15 * (1.0 + t) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Radial smooth Lagrangian f_k(ξ) = G(|ξ|) with G′ tabulated on a uniform grid.
struct RadialTable {
    dt: f64,
    slope: Vec<f64>,
    value: Vec<f64>,
}

impl RadialTable {
    fn eval(&self, t: f64) -> (f64, f64) {
        let n = self.slope.len();
        let i = ((t / self.dt) as usize).min(n - 2);
        let tau = t - i as f64 * self.dt;
        let c = (self.slope[i + 1] - self.slope[i]) / self.dt;
        (self.value[i] + self.slope[i] * tau + 0.5 * c * tau * tau, self.slope[i] + c * tau)
    }
}

enum Table {
    Radial(Arc<RadialTable>),
    Grid { fk: ConjugateGrid, fallback: SharedLagrangian },
}

pub struct SmoothedLagrangian {
    meta: LagrangianMeta,
    table: Table,
    pub band: SmoothingBand,
}

impl Lagrangian for SmoothedLagrangian {
    fn meta(&self) -> &LagrangianMeta {
        &self.meta
    }

    fn value(&self, xi: Vec2) -> f64 {
        self.value_and_gradient(xi).0
    }

    fn gradient(&self, xi: Vec2) -> Vec2 {
        self.value_and_gradient(xi).1
    }

    fn value_and_gradient(&self, xi: Vec2) -> (f64, Vec2) {
        match &self.table {
            Table::Radial(tab) => {
                let t = xi.norm();
                let (v, d) = tab.eval(t);
                if t == 0.0 {
                    (v, Vec2::ZERO)
                } else {
                    (v, xi * (d / t))
                }
            }
            Table::Grid { fk, fallback } => match bilinear_with_gradient(fk, xi) {
                Some(vg) => vg,
                None => fallback.value_and_gradient(xi),
            },
        }
    }

    fn radial(&self) -> Option<RadialProfile> {
        match &self.table {
            Table::Radial(tab) => {
                let (a, b) = (tab.clone(), tab.clone());
                Some(RadialProfile {
                    value: Arc::new(move |t| a.eval(t).0),
                    deriv: Arc::new(move |t| b.eval(t).1),
                })
            }
            Table::Grid { .. } => None,
        }
    }
}

fn bilinear_with_gradient(c: &ConjugateGrid, p: Vec2) -> Option<(f64, Vec2)> {
    let g = &c.grid;
    if !g.contains(p) {
        return None;
    }
    let fx = ((p.x - g.lo[0]) / g.step[0]).clamp(0.0, (g.n[0] - 1) as f64);
    let fy = ((p.y - g.lo[1]) / g.step[1]).clamp(0.0, (g.n[1] - 1) as f64);
    let i = (fx.floor() as usize).min(g.n[0] - 2);
    let j = (fy.floor() as usize).min(g.n[1] - 2);
    let (a, b) = (fx - i as f64, fy - j as f64);
    let v00 = c.value_at(i, j);
    let v10 = c.value_at(i + 1, j);
    let v01 = c.value_at(i, j + 1);
    let v11 = c.value_at(i + 1, j + 1);
    let v = (1.0 - b) * ((1.0 - a) * v00 + a * v10) + b * ((1.0 - a) * v01 + a * v11);
    let dx = ((1.0 - b) * (v10 - v00) + b * (v11 - v01)) / g.step[0];
    let dy = ((1.0 - a) * (v01 - v00) + a * (v11 - v10)) / g.step[1];
    Some((v, Vec2::new(dx, dy)))
}

/// Squared-distance transform along one line (lower envelope of parabolas):
/// `out[q] = min_p f[p] + (x_q − x_p)²` on a uniform grid with spacing `h`.
fn distance_transform_1d(f: &[f64], h: f64) -> Vec<f64> {
    let n = f.len();
    let mut v = vec![0usize; n];
    let mut z = vec![0.0; n + 1];
    let mut k = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    let x = |i: usize| i as f64 * h;
    for q in 1..n {
        loop {
            let p = v[k];
            let s = ((f[q] + x(q) * x(q)) - (f[p] + x(p) * x(p))) / (2.0 * (x(q) - x(p)));
            if s <= z[k] && k > 0 {
                k -= 1;
                continue;
            }
            if s <= z[k] {
                // k == 0: q replaces the first parabola
                v[0] = q;
                z[1] = f64::INFINITY;
                break;
            }
            k += 1;
            v[k] = q;
            z[k] = s;
            z[k + 1] = f64::INFINITY;
            break;
        }
    }
    let mut out = vec![0.0; n];
    k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while z[k + 1] < x(q) {
            k += 1;
        }
        let d = x(q) - x(v[k]);
        *o = d * d + f[v[k]];
    }
    out
}

fn grid_smooth(f: &SharedLagrangian, k: usize, box_half: f64) -> Result<ConjugateGrid> {
    let mu = SmoothingSchedule::mu(k);
    let half = 1.5 * box_half + 1.0;
    let n = 401;
    let grid = Grid2::centered(half, n);
    let h = grid.step[0];
    // D = min_y 2μ f(y) + |x − y|²  ⇒  envelope = D / (2μ)
    let mut d: Vec<f64> = grid.points().map(|(_, p)| 2.0 * mu * f.value(p)).collect();
    let mut line = vec![0.0; n];
    for j in 0..n {
        line.copy_from_slice(&d[j * n..(j + 1) * n]);
        d[j * n..(j + 1) * n].copy_from_slice(&distance_transform_1d(&line, h));
    }
    for i in 0..n {
        for j in 0..n {
            line[j] = d[j * n + i];
        }
        let out = distance_transform_1d(&line, h);
        for j in 0..n {
            d[j * n + i] = out[j];
        }
    }
    let mut e: Vec<f64> = d.iter().map(|v| v / (2.0 * mu)).collect();
    // separable [1,2,1]/4 blur with reflected ends
    let blur = |src: &[f64], stride: usize, start: usize, out: &mut Vec<f64>| {
        let at = |q: usize| src[start + q * stride];
        for (m, o) in out.iter_mut().enumerate().take(n) {
            let l = if m == 0 { at(1) } else { at(m - 1) };
            let r = if m + 1 == n { at(n - 2) } else { at(m + 1) };
            *o = 0.25 * l + 0.5 * at(m) + 0.25 * r;
        }
    };
    let mut tmp = vec![0.0; n];
    for j in 0..n {
        blur(&e.clone(), 1, j * n, &mut tmp);
        e[j * n..(j + 1) * n].copy_from_slice(&tmp);
    }
    let snapshot = e.clone();
    for i in 0..n {
        blur(&snapshot, n, i, &mut tmp);
        for j in 0..n {
            e[j * n + i] = tmp[j];
        }
    }
    let center = e[(n / 2) * n + n / 2];
    for v in e.iter_mut() {
        *v -= center;
    }
    Ok(ConjugateGrid { grid, finite_mask: vec![true; e.len()], values: e })
}

fn radial_smooth(p: &RadialProfile, k: usize, box_half: f64) -> RadialTable {
    let mu = SmoothingSchedule::mu(k);
    let sigma = SmoothingSchedule::sigma(k);
    let tmax = 2.0 * box_half + 1.0;
    let n = 8001;
    let dt = tmax / (n - 1) as f64;
    let st = stencil();
    let env_slope = |r: f64| (r - radial_prox(p, r, mu)) / mu;
    let mut slope = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 * dt;
        let mut d = 0.0;
        for &(q, w) in &st {
            let x = Vec2::new(t, 0.0) + q * sigma;
            let r = x.norm();
            if r > 0.0 {
                d += w * env_slope(r) * x.x / r;
            }
        }
        slope.push(d);
    }
    slope[0] = 0.0;
    let mut value = vec![0.0; n];
    for i in 1..n {
        value[i] = value[i - 1] + 0.5 * dt * (slope[i - 1] + slope[i]);
    }
    RadialTable { dt, slope, value }
}

fn measure_band(f: &dyn Lagrangian, fk: &dyn Lagrangian, k: usize, box_half: f64) -> SmoothingBand {
    let grid = Grid2::centered(box_half, 61);
    let (mut delta, mut up) = (0.0f64, 0.0f64);
    for (_, p) in grid.points() {
        let d = f.value(p) - fk.value(p);
        delta = delta.max(d);
        up = up.max(-d);
    }
    SmoothingBand { k, mu: SmoothingSchedule::mu(k), sigma: SmoothingSchedule::sigma(k), delta, upper_excess: up }
}

/// f_k for the working box `[-box_half, box_half]²`. The result keeps the name
/// of f and records (r+1, ε/4) as its structural constants.
pub fn smooth_lagrangian(f: &SharedLagrangian, k: usize, box_half: f64) -> Result<SmoothedLagrangian> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be positive".into()));
    }
    let scale = f.value(Vec2::new(box_half, box_half)).abs().max(1.0);
    let defect = midpoint_convexity_defect(f.as_ref(), box_half, 2000);
    if defect > 1e-9 * scale {
        return Err(Error::NotConvex { defect });
    }
    let m = f.meta();
    let meta = LagrangianMeta {
        name: format!("{}_k{}", m.name, k),
        r: m.r + 1.0,
        eps: m.eps / 4.0,
        p_growth: m.p_growth,
    };
    let table = match f.radial() {
        Some(p) => Table::Radial(Arc::new(radial_smooth(&p, k, box_half))),
        None => Table::Grid { fk: grid_smooth(f, k, box_half)?, fallback: f.clone() },
    };
    let mut out = SmoothedLagrangian {
        meta,
        table,
        band: SmoothingBand { k, mu: 0.0, sigma: 0.0, delta: 0.0, upper_excess: 0.0 },
    };
    out.band = measure_band(f.as_ref(), &out, k, box_half);
    Ok(out)
}

/// h_k = f_k + (1/k)|ξ|².
pub fn regularize(fk: SharedLagrangian, k: usize) -> Regularized {
    Regularized::new(fk, k as f64)
}

/// Mollified source term: a mass-weighted average with the compact kernel
/// (1 − (d/σ)²)² of radius σ_k = 1/k, then clamped to ‖g‖∞ + 1.
pub fn smooth_g(g: &[f64], k: usize, mesh: &Mesh) -> Vec<f64> {
    let sigma = 1.0 / k as f64;
    let bound = g.iter().fold(0.0f64, |m, v| m.max(v.abs())) + 1.0;
    let mass = mesh.lumped_mass();
    let n = mesh.n_vertices();
    // bucket vertices on a grid of cell size σ
    let (mut lo, mut hi) = (Vec2::new(f64::INFINITY, f64::INFINITY), Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY));
    for v in &mesh.vertices {
        lo = Vec2::new(lo.x.min(v.x), lo.y.min(v.y));
        hi = Vec2::new(hi.x.max(v.x), hi.y.max(v.y));
    }
    let cell = sigma.max((hi.x - lo.x).max(hi.y - lo.y) / 512.0);
    let nx = ((hi.x - lo.x) / cell) as usize + 1;
    let ny = ((hi.y - lo.y) / cell) as usize + 1;
    let key = |p: Vec2| (((p.x - lo.x) / cell) as usize, ((p.y - lo.y) / cell) as usize);
    let mut buckets = vec![Vec::new(); nx * ny];
    for (i, &p) in mesh.vertices.iter().enumerate() {
        let (a, b) = key(p);
        buckets[b * nx + a].push(i);
    }
    (0..n)
        .map(|i| {
            let p = mesh.vertices[i];
            let (a, b) = key(p);
            let (mut num, mut den) = (0.0, 0.0);
            for bb in b.saturating_sub(1)..=(b + 1).min(ny - 1) {
                for aa in a.saturating_sub(1)..=(a + 1).min(nx - 1) {
                    for &j in &buckets[bb * nx + aa] {
                        let d = p.dist(mesh.vertices[j]) / sigma;
                        if d < 1.0 {
                            let w = (1.0 - d * d).powi(2) * mass[j];
                            num += w * g[j];
                            den += w;
                        }
                    }
                }
            }
            (num / den).clamp(-bound, bound)
        })
        .collect()
}
