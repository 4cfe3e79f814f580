//! Continuous quadratic Lagrange space on the active mesh.
//!
//! Local dof order per tet: the four vertices, then the six edges in
//! [`TET_EDGES`](crate::mesh::TET_EDGES) order. Global numbering lists vertex
//! dofs by mesh vertex index, followed by edge dofs by sorted vertex pair.

use nalgebra::{Matrix3, Vector3};

use crate::error::MeshError;
use crate::geometry::ScalarJet2;
use crate::mesh::{signed_volume, ActiveTet, CutComplex, TET_EDGES};
use crate::quadrature::{polygon_points, QuadRule};

/// Value, gradient and Hessian of one basis function at a point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BasisEval {
    pub value: f64,
    pub gradient: Vector3<f64>,
    pub hessian: Matrix3<f64>,
}

/// Affine data of one tet: barycentric gradients and the constant basis
/// Hessians.
#[derive(Clone, Debug)]
pub struct P2Element {
    pub coords: [Vector3<f64>; 4],
    pub grad_lambda: [Vector3<f64>; 4],
    pub hessians: [Matrix3<f64>; 10],
    pub volume: f64,
}

impl P2Element {
    pub fn new(coords: [Vector3<f64>; 4]) -> Result<Self, MeshError> {
        let volume = signed_volume(&coords);
        let scale = (coords[1] - coords[0]).norm().max((coords[2] - coords[0]).norm()).max((coords[3] - coords[0]).norm());
        if !(volume.abs() > 1e-14 * scale.powi(3)) {
            return Err(MeshError::DegenerateTet(volume));
        }
        let jac = Matrix3::from_columns(&[coords[1] - coords[0], coords[2] - coords[0], coords[3] - coords[0]]);
        let inv = jac.try_inverse().ok_or(MeshError::DegenerateTet(volume))?;
        // Rows of J⁻¹ are ∇λ₁..∇λ₃.
        let g1 = inv.row(0).transpose();
        let g2 = inv.row(1).transpose();
        let g3 = inv.row(2).transpose();
        let grad_lambda = [-(g1 + g2 + g3), g1, g2, g3];
        let mut hessians = [Matrix3::zeros(); 10];
        for i in 0..4 {
            hessians[i] = grad_lambda[i] * grad_lambda[i].transpose() * 4.0;
        }
        for (k, [i, j]) in TET_EDGES.iter().enumerate() {
            let gi = grad_lambda[*i];
            let gj = grad_lambda[*j];
            hessians[4 + k] = (gi * gj.transpose() + gj * gi.transpose()) * 4.0;
        }
        Ok(P2Element { coords, grad_lambda, hessians, volume })
    }

    pub fn barycentric(&self, x: &Vector3<f64>) -> [f64; 4] {
        let d = x - self.coords[0];
        let l1 = self.grad_lambda[1].dot(&d);
        let l2 = self.grad_lambda[2].dot(&d);
        let l3 = self.grad_lambda[3].dot(&d);
        [1.0 - l1 - l2 - l3, l1, l2, l3]
    }

    pub fn values(&self, x: &Vector3<f64>) -> [f64; 10] {
        let l = self.barycentric(x);
        let mut out = [0.0; 10];
        for i in 0..4 {
            out[i] = l[i] * (2.0 * l[i] - 1.0);
        }
        for (k, [i, j]) in TET_EDGES.iter().enumerate() {
            out[4 + k] = 4.0 * l[*i] * l[*j];
        }
        out
    }

    pub fn gradients(&self, x: &Vector3<f64>) -> [Vector3<f64>; 10] {
        let l = self.barycentric(x);
        let g = &self.grad_lambda;
        let mut out = [Vector3::zeros(); 10];
        for i in 0..4 {
            out[i] = g[i] * (4.0 * l[i] - 1.0);
        }
        for (k, [i, j]) in TET_EDGES.iter().enumerate() {
            out[4 + k] = (g[*i] * l[*j] + g[*j] * l[*i]) * 4.0;
        }
        out
    }

    /// All ten basis functions at `x`; `x` may lie outside the tet.
    pub fn eval(&self, x: &Vector3<f64>) -> [BasisEval; 10] {
        let v = self.values(x);
        let g = self.gradients(x);
        std::array::from_fn(|k| BasisEval { value: v[k], gradient: g[k], hessian: self.hessians[k] })
    }

    /// Lagrange nodes: vertices then edge midpoints.
    pub fn nodes(&self) -> [Vector3<f64>; 10] {
        let c = &self.coords;
        let mut out = [Vector3::zeros(); 10];
        out[..4].copy_from_slice(c);
        for (k, [i, j]) in TET_EDGES.iter().enumerate() {
            out[4 + k] = (c[*i] + c[*j]) * 0.5;
        }
        out
    }

    /// Hessian of `Σ coef_k φ_k` (constant on the tet).
    pub fn combine_hessian(&self, coef: &[f64; 10]) -> Matrix3<f64> {
        self.hessians.iter().zip(coef).fold(Matrix3::zeros(), |acc, (h, c)| acc + h * *c)
    }
}

/// `eval_basis(tet, x)` for a free-standing tet.
pub fn eval_basis(coords: [Vector3<f64>; 4], x: &Vector3<f64>) -> Result<[BasisEval; 10], MeshError> {
    Ok(P2Element::new(coords)?.eval(x))
}

#[derive(Clone, Debug)]
pub struct P2Space {
    pub ndof: usize,
    /// Mesh vertex of each vertex dof (dofs `0..vertex_ids.len()`).
    pub vertex_ids: Vec<usize>,
    /// Sorted mesh-vertex pair of each edge dof, following the vertex dofs.
    pub edge_keys: Vec<[usize; 2]>,
    /// Global dofs of each active tet, in local order.
    pub tet_dofs: Vec<[usize; 10]>,
    pub elements: Vec<P2Element>,
}

pub fn build_p2_space(complex: &CutComplex) -> Result<P2Space, MeshError> {
    build_p2_space_on(&complex.active)
}

/// P2 space over an arbitrary list of tets.
pub fn build_p2_space_on(active: &[ActiveTet]) -> Result<P2Space, MeshError> {
    if active.is_empty() {
        return Err(MeshError::EmptyCut);
    }
    let mut vertex_ids: Vec<usize> = active.iter().flat_map(|a| a.vertices).collect();
    vertex_ids.sort_unstable();
    vertex_ids.dedup();
    let edge_key = |a: &ActiveTet, [i, j]: [usize; 2]| {
        let (p, q) = (a.vertices[i], a.vertices[j]);
        [p.min(q), p.max(q)]
    };
    let mut edge_keys: Vec<[usize; 2]> =
        active.iter().flat_map(|a| TET_EDGES.iter().map(move |&e| edge_key(a, e))).collect();
    edge_keys.sort_unstable();
    edge_keys.dedup();
    let nv = vertex_ids.len();
    let tet_dofs = active
        .iter()
        .map(|a| {
            let mut dofs = [0; 10];
            for i in 0..4 {
                dofs[i] = vertex_ids.binary_search(&a.vertices[i]).expect("vertex collected above");
            }
            for (k, &e) in TET_EDGES.iter().enumerate() {
                dofs[4 + k] = nv + edge_keys.binary_search(&edge_key(a, e)).expect("edge collected above");
            }
            dofs
        })
        .collect();
    let elements = active.iter().map(|a| P2Element::new(a.coords)).collect::<Result<_, _>>()?;
    Ok(P2Space { ndof: nv + edge_keys.len(), vertex_ids, edge_keys, tet_dofs, elements })
}

impl P2Space {
    pub fn local_coefficients(&self, tet: usize, v: &[f64]) -> [f64; 10] {
        self.tet_dofs[tet].map(|d| v[d])
    }

    /// Nodal interpolant of a field.
    pub fn interpolate<F: ScalarJet2 + ?Sized>(&self, field: &F) -> Result<Vec<f64>, crate::error::GeometryError> {
        let mut out = vec![0.0; self.ndof];
        for (el, dofs) in self.elements.iter().zip(&self.tet_dofs) {
            for (x, &d) in el.nodes().iter().zip(dofs) {
                out[d] = field.value(x)?;
            }
        }
        Ok(out)
    }

    /// `Σ v_k φ_k` at `x`, using the polynomial of active tet `tet`.
    /// P2 coefficients of the continuous piecewise linear function with the
    /// given values at the mesh vertices.
    pub fn lift_p1(&self, vertex_values: &[f64]) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.ndof);
        v.extend(self.vertex_ids.iter().map(|&i| vertex_values[i]));
        v.extend(self.edge_keys.iter().map(|e| 0.5 * (vertex_values[e[0]] + vertex_values[e[1]])));
        v
    }

    pub fn evaluate(&self, tet: usize, v: &[f64], x: &Vector3<f64>) -> f64 {
        let vals = self.elements[tet].values(x);
        self.tet_dofs[tet].iter().zip(vals).map(|(&d, b)| v[d] * b).sum()
    }

    pub fn evaluate_gradient(&self, tet: usize, v: &[f64], x: &Vector3<f64>) -> Vector3<f64> {
        let grads = self.elements[tet].gradients(x);
        self.tet_dofs[tet].iter().zip(grads).fold(Vector3::zeros(), |acc, (&d, g)| acc + g * v[d])
    }

    pub fn evaluate_hessian(&self, tet: usize, v: &[f64]) -> Matrix3<f64> {
        self.elements[tet].combine_hessian(&self.local_coefficients(tet, v))
    }
}

/// `c_i = ∫_{Γ_h} φ_i`.
#[derive(Clone, Debug, PartialEq)]
pub struct MeanVector {
    pub c: Vec<f64>,
}

pub fn mean_vector(space: &P2Space, complex: &CutComplex, rule: &QuadRule<3>) -> MeanVector {
    let mut c = vec![0.0; space.ndof];
    for (k, poly) in complex.polygons.iter().enumerate() {
        let el = &space.elements[k];
        for (x, w) in polygon_points(&poly.vertices, rule) {
            for (d, b) in space.tet_dofs[k].iter().zip(el.values(&x)) {
                c[*d] += w * b;
            }
        }
    }
    MeanVector { c }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Coordinate, Sphere};
    use crate::mesh::{build_background_mesh, extract_cut_complex, interpolate_levelset, CubeBox, DEFAULT_GUARD};
    use crate::quadrature::gauss_triangle;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn skewed_tet() -> [Vector3<f64>; 4] {
        [
            Vector3::new(0.1, -0.2, 0.3),
            Vector3::new(1.3, 0.1, 0.2),
            Vector3::new(0.4, 0.9, -0.1),
            Vector3::new(0.2, 0.3, 1.1),
        ]
    }

    #[test]
    fn nodal_property() {
        let el = P2Element::new(skewed_tet()).unwrap();
        for (k, x) in el.nodes().iter().enumerate() {
            let vals = el.values(x);
            for (j, v) in vals.iter().enumerate() {
                let expected = if j == k { 1.0 } else { 0.0 };
                assert!((v - expected).abs() < 1e-14, "basis {j} at node {k}: {v}");
            }
        }
    }

    #[test]
    fn partition_of_unity() {
        let el = P2Element::new(skewed_tet()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let x = Vector3::new(rng.gen_range(-1.0..2.0), rng.gen_range(-1.0..2.0), rng.gen_range(-1.0..2.0));
            let ev = el.eval(&x);
            let sv: f64 = ev.iter().map(|b| b.value).sum();
            let sg: Vector3<f64> = ev.iter().map(|b| b.gradient).sum();
            let sh: Matrix3<f64> = ev.iter().map(|b| b.hessian).sum();
            assert!((sv - 1.0).abs() < 1e-13);
            assert!(sg.norm() < 1e-12);
            assert!(sh.abs().max() < 1e-12);
        }
    }

    #[test]
    fn reproduces_quadratics() {
        let el = P2Element::new(skewed_tet()).unwrap();
        let q = |x: &Vector3<f64>| x.x * x.x;
        let coef = el.nodes().map(|n| q(&n));
        let hess = el.combine_hessian(&coef);
        let mut expected = Matrix3::zeros();
        expected[(0, 0)] = 2.0;
        assert!((hess - expected).abs().max() < 1e-12);
        let x = Vector3::new(0.3, 0.2, 0.25);
        let val: f64 = el.values(&x).iter().zip(&coef).map(|(b, c)| b * c).sum();
        assert!((val - q(&x)).abs() < 1e-14);
        let grad: Vector3<f64> = el.gradients(&x).iter().zip(&coef).map(|(g, c)| g * *c).sum();
        assert!((grad - Vector3::new(2.0 * x.x, 0.0, 0.0)).norm() < 1e-13);
    }

    #[test]
    fn degenerate_tet_is_an_error() {
        let flat = [Vector3::zeros(), Vector3::x(), Vector3::y(), Vector3::new(1.0, 1.0, 0.0)];
        assert!(matches!(eval_basis(flat, &Vector3::zeros()), Err(MeshError::DegenerateTet(_))));
    }

    fn mesh_tets(n: usize) -> (crate::mesh::BackgroundMesh, Vec<ActiveTet>) {
        let mesh = build_background_mesh(CubeBox { lo: 0.0, hi: 1.0 }, n).unwrap();
        let tets = (0..mesh.tets.len())
            .map(|t| ActiveTet { tet: t, vertices: mesh.tets[t], coords: mesh.tet_coords(t) })
            .collect();
        (mesh, tets)
    }

    #[test]
    fn dof_counting() {
        let (mesh, tets) = mesh_tets(2);
        let one = build_p2_space_on(&tets[..1]).unwrap();
        assert_eq!(one.ndof, 10);
        let faces = mesh.faces();
        let f = faces.iter().find(|f| f.minus.is_some()).unwrap();
        let pair = [tets[f.plus].clone(), tets[f.minus.unwrap()].clone()];
        let two = build_p2_space_on(&pair).unwrap();
        assert_eq!(two.ndof, 14);
        let again = build_p2_space_on(&pair).unwrap();
        assert_eq!(two.tet_dofs, again.tet_dofs);
        // Shared face dofs carry the same global index.
        let shared: Vec<usize> = two.tet_dofs[0].iter().filter(|d| two.tet_dofs[1].contains(d)).copied().collect();
        assert_eq!(shared.len(), 6);
    }

    #[test]
    fn continuity_across_facets() {
        let mesh = build_background_mesh(CubeBox::symmetric(1.2), 6).unwrap();
        let phi = interpolate_levelset(&Sphere::unit(), &mesh, DEFAULT_GUARD);
        let cx = extract_cut_complex(&mesh, &phi).unwrap();
        let space = build_p2_space(&cx).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let v: Vec<f64> = (0..space.ndof).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for f in &cx.facets {
            for _ in 0..3 {
                let (a, b) = (rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0));
                let (a, b) = if a + b > 1.0 { (1.0 - a, 1.0 - b) } else { (a, b) };
                let x = f.coords[0] + (f.coords[1] - f.coords[0]) * a + (f.coords[2] - f.coords[0]) * b;
                let jump = space.evaluate(f.plus, &v, &x) - space.evaluate(f.minus, &v, &x);
                assert!(jump.abs() < 1e-11);
            }
        }
    }

    #[test]
    fn mean_vector_partition_of_unity() {
        let mesh = build_background_mesh(CubeBox::symmetric(1.2), 8).unwrap();
        let phi = interpolate_levelset(&Sphere::unit(), &mesh, DEFAULT_GUARD);
        let cx = extract_cut_complex(&mesh, &phi).unwrap();
        let space = build_p2_space(&cx).unwrap();
        let c = mean_vector(&space, &cx, &gauss_triangle(2).unwrap());
        let area = cx.surface_area();
        let total: f64 = c.c.iter().sum();
        assert!((total - area).abs() < 1e-12 * area);
        // Linear field: cᵀ(interpolant) equals the surface integral.
        let x1 = space.interpolate(&Coordinate(0)).unwrap();
        let direct: f64 = cx
            .polygons
            .iter()
            .map(|p| crate::quadrature::integrate_polygon(&p.vertices, |x| x.x, &gauss_triangle(2).unwrap()))
            .sum();
        let via_c: f64 = c.c.iter().zip(&x1).map(|(a, b)| a * b).sum();
        assert!((direct - via_c).abs() < 1e-13);
    }
}
