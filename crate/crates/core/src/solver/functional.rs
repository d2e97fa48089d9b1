use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::lagrangian::Lagrangian;
use crate::mesh::Mesh;

/// Discrete energy E(u) = Σ_T |T| f(∇u|_T) + Σ_v m_v g_v u_v over P1 elements,
/// with boundary degrees of freedom pinned to φ.
pub struct DiscreteFunctional<'a> {
    pub mesh: &'a Mesh,
    pub f: &'a dyn Lagrangian,
    pub g: Vec<f64>,
    /// Per-vertex values; only boundary entries are meaningful.
    pub boundary_values: Vec<f64>,
    pub areas: Vec<f64>,
    pub mass: Vec<f64>,
    /// Gradients of the three barycentric coordinates on each triangle.
    pub(crate) basis: Vec<[Vec2; 3]>,
}

pub(crate) fn basis_gradients(mesh: &Mesh) -> Vec<[Vec2; 3]> {
    mesh.triangles
        .iter()
        .enumerate()
        .map(|(t, tri)| {
            let [a, b, c] = tri.map(|i| mesh.vertices[i]);
            let s = 1.0 / (2.0 * mesh.triangle_area(t));
            [(c - b).perp() * s, (a - c).perp() * s, (b - a).perp() * s]
        })
        .collect()
}

/// Exact gradient of the piecewise-linear interpolant of `u` on every triangle.
pub fn gradient_field(mesh: &Mesh, u: &[f64]) -> Vec<Vec2> {
    basis_gradients(mesh)
        .iter()
        .zip(&mesh.triangles)
        .map(|(b, tri)| b[0] * u[tri[0]] + b[1] * u[tri[1]] + b[2] * u[tri[2]])
        .collect()
}

/// `phi` is sampled along `mesh.boundary_loop`.
pub fn assemble<'a>(mesh: &'a Mesh, f: &'a dyn Lagrangian, g: &[f64], phi: &[f64]) -> Result<DiscreteFunctional<'a>> {
    if g.len() != mesh.n_vertices() {
        return Err(Error::InvalidArgument(format!("g has {} entries for {} vertices", g.len(), mesh.n_vertices())));
    }
    if phi.len() != mesh.boundary_loop.len() {
        return Err(Error::InvalidArgument(format!(
            "phi has {} entries for {} boundary vertices",
            phi.len(),
            mesh.boundary_loop.len()
        )));
    }
    if let Some(bad) = phi.iter().chain(g).find(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!("non-finite datum {bad}")));
    }
    let mut boundary_values = vec![0.0; mesh.n_vertices()];
    for (k, &v) in mesh.boundary_loop.iter().enumerate() {
        boundary_values[v] = phi[k];
    }
    Ok(DiscreteFunctional {
        mesh,
        f,
        g: g.to_vec(),
        boundary_values,
        areas: mesh.triangle_areas(),
        mass: mesh.lumped_mass(),
        basis: basis_gradients(mesh),
    })
}

impl DiscreteFunctional<'_> {
    pub fn triangle_gradient(&self, t: usize, u: &[f64]) -> Vec2 {
        let tri = self.mesh.triangles[t];
        let b = &self.basis[t];
        b[0] * u[tri[0]] + b[1] * u[tri[1]] + b[2] * u[tri[2]]
    }

    /// Copy of `u` with the boundary entries replaced by φ.
    pub fn with_boundary(&self, u: &[f64]) -> Vec<f64> {
        let mut out = u.to_vec();
        for &v in &self.mesh.boundary_loop {
            out[v] = self.boundary_values[v];
        }
        out
    }

    pub fn energy(&self, u: &[f64]) -> f64 {
        self.gradient_part(u) + self.source_part(u)
    }

    /// Σ_T |T| f(∇u|_T)
    pub fn gradient_part(&self, u: &[f64]) -> f64 {
        (0..self.areas.len()).map(|t| self.areas[t] * self.f.value(self.triangle_gradient(t, u))).sum()
    }

    /// Σ_v m_v g_v u_v
    pub fn source_part(&self, u: &[f64]) -> f64 {
        self.mass.iter().zip(&self.g).zip(u).map(|((m, g), u)| m * g * u).sum()
    }

    /// Energy and its gradient with respect to every vertex value. Boundary
    /// entries of `grad` are zeroed since those values are fixed.
    pub fn energy_and_gradient(&self, u: &[f64], grad: &mut [f64]) -> f64 {
        grad.iter_mut().zip(&self.mass).zip(&self.g).for_each(|((d, m), g)| *d = m * g);
        let mut e = self.source_part(u);
        for (t, tri) in self.mesh.triangles.iter().enumerate() {
            let (v, dv) = self.f.value_and_gradient(self.triangle_gradient(t, u));
            e += self.areas[t] * v;
            let b = &self.basis[t];
            for k in 0..3 {
                grad[tri[k]] += self.areas[t] * dv.dot(b[k]);
            }
        }
        for &v in &self.mesh.boundary_loop {
            grad[v] = 0.0;
        }
        e
    }

    /// Diagonal of the P1 stiffness matrix, Σ_T |T| |∇λ_v|².
    pub fn stiffness_diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.mesh.n_vertices()];
        for (t, tri) in self.mesh.triangles.iter().enumerate() {
            for k in 0..3 {
                d[tri[k]] += self.areas[t] * self.basis[t][k].norm2();
            }
        }
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lagrangian::{build, LagrangianSpec};
    use crate::mesh::{triangulate, DomainSpec};
    use std::f64::consts::PI;

    fn disc(h: f64) -> Mesh {
        triangulate(&DomainSpec::disc([0.0, 0.0], 1.0, h)).unwrap()
    }

    #[test]
    fn zero_field_has_zero_energy() {
        let m = disc(0.1);
        let f = build(&LagrangianSpec::named("torsion")).unwrap();
        let g: Vec<f64> = m.vertices.iter().map(|p| p.x.sin()).collect();
        let phi = vec![0.0; m.boundary_loop.len()];
        let e = assemble(&m, f.as_ref(), &g, &phi).unwrap();
        assert_eq!(e.energy(&vec![0.0; m.n_vertices()]), 0.0);
    }

    #[test]
    fn affine_field_energy_is_area_times_f() {
        let m = disc(0.1);
        let f = build(&LagrangianSpec::named("torsion")).unwrap();
        let a = Vec2::new(1.2, -0.4);
        let u: Vec<f64> = m.vertices.iter().map(|p| a.dot(*p) + 0.3).collect();
        let phi: Vec<f64> = m.boundary_loop.iter().map(|&v| u[v]).collect();
        let e = assemble(&m, f.as_ref(), &vec![0.0; m.n_vertices()], &phi).unwrap();
        assert!((e.energy(&u) - m.area * f.value(a)).abs() < 1e-12);
        for g in gradient_field(&m, &u) {
            assert!((g - a).norm() < 1e-12);
        }
    }

    #[test]
    fn poisson_energy_at_analytic_solution() {
        let m = disc(1.0 / 64.0);
        let f = build(&LagrangianSpec::named("quadratic")).unwrap();
        let u: Vec<f64> = m.vertices.iter().map(|p| (p.norm2() - 1.0) / 4.0).collect();
        let phi: Vec<f64> = m.boundary_loop.iter().map(|&v| u[v]).collect();
        let e = assemble(&m, f.as_ref(), &vec![1.0; m.n_vertices()], &phi).unwrap();
        assert!((e.energy(&u) + PI / 16.0).abs() < 2e-3, "{}", e.energy(&u));
    }

    #[test]
    fn analytic_gradient_is_recovered_to_first_order() {
        let m = disc(1.0 / 32.0);
        let u: Vec<f64> = m.vertices.iter().map(|p| (p.norm2() - 1.0) / 4.0).collect();
        let grads = gradient_field(&m, &u);
        for (t, g) in grads.iter().enumerate() {
            assert!((*g - m.barycenter(t) * 0.5).norm() <= m.h);
        }
    }

    #[test]
    fn energy_gradient_matches_finite_differences() {
        let m = disc(0.2);
        let f = build(&LagrangianSpec::pnorm(1.0, 3.0)).unwrap();
        let g: Vec<f64> = m.vertices.iter().map(|p| 1.0 + p.y).collect();
        let phi = vec![0.1; m.boundary_loop.len()];
        let e = assemble(&m, f.as_ref(), &g, &phi).unwrap();
        let u: Vec<f64> = e.with_boundary(&m.vertices.iter().map(|p| (3.0 * p.x).sin() * p.y).collect::<Vec<_>>());
        let mut grad = vec![0.0; m.n_vertices()];
        e.energy_and_gradient(&u, &mut grad);
        let h = 1e-6;
        for v in 0..m.n_vertices() {
            if m.is_boundary[v] {
                continue;
            }
            let mut up = u.clone();
            up[v] += h;
            let mut dn = u.clone();
            dn[v] -= h;
            let fd = (e.energy(&up) - e.energy(&dn)) / (2.0 * h);
            assert!((fd - grad[v]).abs() < 1e-6, "vertex {v}: {fd} vs {}", grad[v]);
        }
    }

    #[test]
    fn gradients_converge_under_refinement() {
        let err = |h: f64| {
            let m = disc(h);
            let u: Vec<f64> = m.vertices.iter().map(|p| (p.norm2() - 1.0) / 4.0).collect();
            let grads = gradient_field(&m, &u);
            let mut s = 0.0;
            for (t, g) in grads.iter().enumerate() {
                s += m.triangle_area(t) * (*g - m.barycenter(t) * 0.5).norm2();
            }
            s.sqrt()
        };
        let (e1, e2) = (err(1.0 / 16.0), err(1.0 / 32.0));
        assert!(e2 < 0.75 * e1, "{e1} {e2}");
    }
}
