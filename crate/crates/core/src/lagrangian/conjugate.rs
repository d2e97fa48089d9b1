use super::Lagrangian;
use crate::error::{Error, Result};
use crate::geom::Vec2;
use serde::{Deserialize, Serialize};

/// Rectangular lattice `lo + (i·step.x, j·step.y)`, `0 ≤ i < n[0]`, `0 ≤ j < n[1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid2 {
    pub lo: [f64; 2],
    pub step: [f64; 2],
    pub n: [usize; 2],
}

impl Grid2 {
    /// Square grid on `[-half, half]²` with `n` points per axis.
    pub fn centered(half: f64, n: usize) -> Self {
        assert!(n >= 2);
        let s = 2.0 * half / (n - 1) as f64;
        Grid2 { lo: [-half, -half], step: [s, s], n: [n, n] }
    }

    pub fn len(&self) -> usize {
        self.n[0] * self.n[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        self.lo[axis] + i as f64 * self.step[axis]
    }

    pub fn point(&self, i: usize, j: usize) -> Vec2 {
        Vec2::new(self.coord(0, i), self.coord(1, j))
    }

    pub fn hi(&self) -> [f64; 2] {
        [self.coord(0, self.n[0] - 1), self.coord(1, self.n[1] - 1)]
    }

    pub fn contains(&self, p: Vec2) -> bool {
        let hi = self.hi();
        let slack = 1e-12 * (1.0 + hi[0].abs().max(hi[1].abs()));
        p.x >= self.lo[0] - slack && p.x <= hi[0] + slack && p.y >= self.lo[1] - slack && p.y <= hi[1] + slack
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.n[0] + i
    }

    pub fn points(&self) -> impl Iterator<Item = (usize, Vec2)> + '_ {
        (0..self.n[1]).flat_map(move |j| (0..self.n[0]).map(move |i| (self.index(i, j), self.point(i, j))))
    }
}

/// Sampled function on a [`Grid2`] with a per-sample flag telling whether the
/// defining supremum was attained strictly inside the source box.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConjugateGrid {
    pub grid: Grid2,
    pub values: Vec<f64>,
    pub finite_mask: Vec<bool>,
}

impl ConjugateGrid {
    pub fn value_at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    pub fn all_finite(&self) -> bool {
        self.finite_mask.iter().all(|&b| b)
    }

    /// Bilinear interpolation; `None` outside the grid.
    pub fn eval(&self, p: Vec2) -> Option<f64> {
        if !self.grid.contains(p) {
            return None;
        }
        let g = &self.grid;
        let fx = ((p.x - g.lo[0]) / g.step[0]).clamp(0.0, (g.n[0] - 1) as f64);
        let fy = ((p.y - g.lo[1]) / g.step[1]).clamp(0.0, (g.n[1] - 1) as f64);
        let i = (fx.floor() as usize).min(g.n[0] - 2);
        let j = (fy.floor() as usize).min(g.n[1] - 2);
        let (a, b) = (fx - i as f64, fy - j as f64);
        let v00 = self.value_at(i, j);
        let v10 = self.value_at(i + 1, j);
        let v01 = self.value_at(i, j + 1);
        let v11 = self.value_at(i + 1, j + 1);
        Some((1.0 - b) * ((1.0 - a) * v00 + a * v10) + b * ((1.0 - a) * v01 + a * v11))
    }

    /// Largest absolute difference quotient along grid lines.
    pub fn max_slope(&self) -> f64 {
        let g = &self.grid;
        let mut m: f64 = 0.0;
        for j in 0..g.n[1] {
            for i in 0..g.n[0] {
                let v = self.value_at(i, j);
                if i + 1 < g.n[0] {
                    m = m.max((self.value_at(i + 1, j) - v).abs() / g.step[0]);
                }
                if j + 1 < g.n[1] {
                    m = m.max((self.value_at(i, j + 1) - v).abs() / g.step[1]);
                }
            }
        }
        m
    }
}

/// Discrete Legendre transform in one dimension:
/// `out[j] = max_i s_j·x_i − f_i` with the maximizing index, for sorted `x` and `s`.
///
/// Runs in O(n + m): the lower convex hull of the points `(x_i, f_i)` is built
/// with a monotone stack, then the dual slopes are swept through the hull edges.
pub fn legendre_1d(x: &[f64], f: &[f64], s: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut hull: Vec<usize> = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        if !f[i].is_finite() {
            continue;
        }
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            // drop b if it lies on or above the chord a–i
            if (f[b] - f[a]) * (x[i] - x[a]) >= (f[i] - f[a]) * (x[b] - x[a]) {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(i);
    }
    let mut out = Vec::with_capacity(s.len());
    let mut arg = Vec::with_capacity(s.len());
    if hull.is_empty() {
        return (vec![f64::NEG_INFINITY; s.len()], vec![0; s.len()]);
    }
    let mut k = 0;
    for &sj in s {
        while k + 1 < hull.len() {
            let (a, b) = (hull[k], hull[k + 1]);
            if sj * x[b] - f[b] >= sj * x[a] - f[a] {
                k += 1;
            } else {
                break;
            }
        }
        let i = hull[k];
        out.push(sj * x[i] - f[i]);
        arg.push(i);
    }
    (out, arg)
}

fn axis(grid: &Grid2, a: usize) -> Vec<f64> {
    (0..grid.n[a]).map(|i| grid.coord(a, i)).collect()
}

/// Values and source-grid maximizer index of `max_x ζ·x − vals(x)` for every
/// destination sample, by two separable 1-D passes.
fn transform(src: &Grid2, vals: &[f64], dst: &Grid2) -> (Vec<f64>, Vec<usize>) {
    let xs = axis(src, 0);
    let ys = axis(src, 1);
    let ss = axis(dst, 0);
    let ts = axis(dst, 1);
    let (n0, n1) = (src.n[0], src.n[1]);
    let (m0, m1) = (dst.n[0], dst.n[1]);

    // pass 1: phi[s_i][y_j] = max_x s_i x − f(x, y_j)
    let mut phi = vec![0.0; m0 * n1];
    let mut arg_x = vec![0usize; m0 * n1];
    for j in 0..n1 {
        let (o, a) = legendre_1d(&xs, &vals[j * n0..(j + 1) * n0], &ss);
        for i in 0..m0 {
            phi[i * n1 + j] = o[i];
            arg_x[i * n1 + j] = a[i];
        }
    }
    // pass 2: f*(s_i, t_k) = max_y t_k y + phi[s_i][y]
    let mut values = vec![0.0; m0 * m1];
    let mut arg = vec![0usize; m0 * m1];
    let mut col = vec![0.0; n1];
    for i in 0..m0 {
        for j in 0..n1 {
            col[j] = -phi[i * n1 + j];
        }
        let (o, a) = legendre_1d(&ys, &col, &ts);
        for k in 0..m1 {
            values[k * m0 + i] = o[k];
            arg[k * m0 + i] = src.index(arg_x[i * n1 + a[k]], a[k]);
        }
    }
    (values, arg)
}

fn interior(grid: &Grid2, idx: usize) -> bool {
    let (i, j) = (idx % grid.n[0], idx / grid.n[0]);
    i > 0 && i + 1 < grid.n[0] && j > 0 && j + 1 < grid.n[1]
}

/// Conjugate of samples `vals` on `src` evaluated on `dst`. `finite_mask` is
/// false where the maximizer sits on the border of `src`.
pub fn conjugate_samples(src: &Grid2, vals: &[f64], dst: &Grid2) -> ConjugateGrid {
    let (values, arg) = transform(src, vals, dst);
    let finite_mask = arg.iter().map(|&k| interior(src, k)).collect();
    ConjugateGrid { grid: *dst, values, finite_mask }
}

fn sample(f: &dyn Lagrangian, grid: &Grid2) -> Result<Vec<f64>> {
    let mut v = vec![0.0; grid.len()];
    for (k, p) in grid.points() {
        let x = f.value(p);
        if x.is_nan() {
            return Err(Error::InvalidArgument(format!("lagrangian is NaN at {p:?}")));
        }
        v[k] = x;
    }
    Ok(v)
}

/// f*(ζ) = max over primal samples x of ζ·x − f(x), on the dual grid.
pub fn conjugate(f: &dyn Lagrangian, primal: &Grid2, dual: &Grid2) -> Result<ConjugateGrid> {
    Ok(conjugate_samples(primal, &sample(f, primal)?, dual))
}

/// f** sampled on the primal grid, computed as the conjugate of the sampled f*.
/// The mask is false where either conjugation hit the border of its source box.
pub fn biconjugate(f: &dyn Lagrangian, primal: &Grid2, dual: &Grid2) -> Result<ConjugateGrid> {
    let fstar = conjugate(f, primal, dual)?;
    let (values, arg) = transform(dual, &fstar.values, primal);
    let finite_mask = arg.iter().map(|&k| interior(dual, k) && fstar.finite_mask[k]).collect();
    Ok(ConjugateGrid { grid: *primal, values, finite_mask })
}

/// O(n·m) reference implementation of [`conjugate`].
pub fn conjugate_brute_force(f: &dyn Lagrangian, primal: &Grid2, dual: &Grid2) -> Result<ConjugateGrid> {
    let vals = sample(f, primal)?;
    let mut values = vec![0.0; dual.len()];
    let mut finite_mask = vec![false; dual.len()];
    for (k, z) in dual.points() {
        let mut best = f64::NEG_INFINITY;
        let mut arg = (0, 0);
        for j in 0..primal.n[1] {
            for i in 0..primal.n[0] {
                let x = primal.point(i, j);
                let v = z.dot(x) - vals[primal.index(i, j)];
                if v > best {
                    best = v;
                    arg = (i, j);
                }
            }
        }
        values[k] = best;
        finite_mask[k] = arg.0 > 0 && arg.0 + 1 < primal.n[0] && arg.1 > 0 && arg.1 + 1 < primal.n[1];
    }
    Ok(ConjugateGrid { grid: *dual, values, finite_mask })
}
