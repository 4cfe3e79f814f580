//! Assembly of the interior penalty form `a_h`, the facet stabilizations
//! `s_h` and the load vector.
//!
//! All forms are built by one routine that sums five weighted pieces:
//! the polygon Laplace-Beltrami product, the symmetric edge consistency
//! terms, the edge co-normal jump penalty, the facet gradient jump and the
//! facet Hessian jump. Local matrices are computed in parallel chunks and
//! scattered sequentially in entity order, so the result does not depend on
//! the thread count.

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;

use crate::error::AssemblyError;
use crate::fespace::P2Space;
use crate::geometry::ScalarJet2;
use crate::mesh::CutComplex;
use crate::quadrature::{gauss_segment, gauss_triangle, polygon_points, segment_points, QuadRule};
use crate::sparse::SparseSymmetric;

pub const EDGE_QUADRATURE_DEGREE: usize = 3;
pub const FACET_QUADRATURE_DEGREE: usize = 2;
pub const RHS_QUADRATURE_DEGREE: usize = 6;

const CHUNK: usize = 2048;

/// Penalty parameters of `A_h^{(j)} = a_h + s_h^{(j)}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FormParams {
    pub sigma: f64,
    pub gamma: f64,
    pub beta: f64,
    /// Stabilization variant: 0 = γ(grad + Hessian jumps), 1 = β/h²·grad +
    /// γ·Hessian, 2 = γ·Hessian only.
    pub variant: u8,
    pub h: f64,
}

impl FormParams {
    /// σ = γ = β = 10.
    pub fn with_defaults(variant: u8, h: f64) -> Self {
        FormParams { sigma: 10.0, gamma: 10.0, beta: 10.0, variant, h }
    }

    pub fn validate(&self) -> Result<(), AssemblyError> {
        let bad = |msg: String| Err(AssemblyError::InvalidParams(msg));
        if !(self.h > 0.0 && self.h.is_finite()) {
            return bad(format!("h must be positive, got {}", self.h));
        }
        if !(self.sigma > 0.0) {
            return bad(format!("sigma must be positive, got {}", self.sigma));
        }
        if !(self.gamma > 0.0) {
            return bad(format!("gamma must be positive, got {}", self.gamma));
        }
        if self.variant > 2 {
            return bad(format!("variant must be 0, 1 or 2, got {}", self.variant));
        }
        if self.variant == 1 && !(self.beta > 0.0) {
            return bad(format!("beta must be positive for variant 1, got {}", self.beta));
        }
        Ok(())
    }
}

/// Coefficients of the five form pieces.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FormWeights {
    pub laplace: f64,
    pub consistency: f64,
    pub edge_jump: f64,
    pub grad_jump: f64,
    pub hess_jump: f64,
}

impl FormWeights {
    pub fn interior_penalty(p: &FormParams) -> Self {
        FormWeights { laplace: 1.0, consistency: 1.0, edge_jump: p.sigma / p.h, ..Default::default() }
    }

    pub fn stabilization(p: &FormParams) -> Self {
        let (grad_jump, hess_jump) = match p.variant {
            0 => (p.gamma, p.gamma),
            1 => (p.beta / (p.h * p.h), p.gamma),
            _ => (0.0, p.gamma),
        };
        FormWeights { grad_jump, hess_jump, ..Default::default() }
    }

    /// `a_h + s_h^{(j)}`.
    pub fn system(p: &FormParams) -> Self {
        let a = Self::interior_penalty(p);
        FormWeights { grad_jump: Self::stabilization(p).grad_jump, hess_jump: Self::stabilization(p).hess_jump, ..a }
    }

    /// Gram matrix of the squared energy norm (no consistency terms, unit
    /// facet weights, `1/h` edge weight).
    pub fn energy(h: f64) -> Self {
        FormWeights { laplace: 1.0, consistency: 0.0, edge_jump: 1.0 / h, grad_jump: 1.0, hess_jump: 1.0 }
    }
}

pub fn assemble_a(space: &P2Space, complex: &CutComplex, params: &FormParams) -> Result<SparseSymmetric, AssemblyError> {
    params.validate()?;
    assemble_weighted(space, complex, &FormWeights::interior_penalty(params))
}

pub fn assemble_s(space: &P2Space, complex: &CutComplex, params: &FormParams) -> Result<SparseSymmetric, AssemblyError> {
    params.validate()?;
    assemble_weighted(space, complex, &FormWeights::stabilization(params))
}

/// `A_a + A_s` in a single pass.
pub fn assemble_system(space: &P2Space, complex: &CutComplex, params: &FormParams) -> Result<SparseSymmetric, AssemblyError> {
    params.validate()?;
    assemble_weighted(space, complex, &FormWeights::system(params))
}

/// `Δ_{Γ_h}φ_k = P_h : ∇²φ_k` on one polygon.
fn surface_laplacians(hessians: &[Matrix3<f64>; 10], proj: &Matrix3<f64>) -> [f64; 10] {
    hessians.map(|h| proj.component_mul(&h).sum())
}

pub fn assemble_weighted(space: &P2Space, complex: &CutComplex, w: &FormWeights) -> Result<SparseSymmetric, AssemblyError> {
    let nfacets = complex.facets.len();
    let mut edge_of_facet = vec![None; nfacets];
    for (e, edge) in complex.edges.iter().enumerate() {
        let (p, m) = edge.polygons;
        let facet = complex.facets.get(edge.face).ok_or(AssemblyError::MissingNeighbor(e))?;
        if p >= complex.polygons.len() || m >= complex.polygons.len() || facet.plus != p || facet.minus != m {
            return Err(AssemblyError::MissingNeighbor(e));
        }
        edge_of_facet[edge.face] = Some(e);
    }
    let edge_rule = gauss_segment(EDGE_QUADRATURE_DEGREE).expect("supported degree");
    let facet_rule = gauss_triangle(FACET_QUADRATURE_DEGREE).expect("supported degree");

    let mut mat = SparseSymmetric::from_pattern(sparsity_pattern(space, complex));

    if w.laplace != 0.0 {
        let n = complex.polygons.len();
        for start in (0..n).step_by(CHUNK) {
            let locals: Vec<[f64; 100]> = (start..(start + CHUNK).min(n))
                .into_par_iter()
                .map(|k| {
                    let poly = &complex.polygons[k];
                    let l = surface_laplacians(&space.elements[k].hessians, &poly.projector());
                    let mut out = [0.0; 100];
                    for i in 0..10 {
                        for j in 0..10 {
                            out[i * 10 + j] = w.laplace * poly.area * l[i] * l[j];
                        }
                    }
                    out
                })
                .collect();
            for (k, local) in (start..).zip(&locals) {
                mat.add_local(&space.tet_dofs[k], local);
            }
        }
    }

    let needs_edges = w.consistency != 0.0 || w.edge_jump != 0.0;
    let needs_facets = w.grad_jump != 0.0 || w.hess_jump != 0.0;
    if needs_edges || needs_facets {
        for start in (0..nfacets).step_by(CHUNK) {
            let locals: Vec<Option<Box<[f64; 400]>>> = (start..(start + CHUNK).min(nfacets))
                .into_par_iter()
                .map(|f| {
                    let edge = edge_of_facet[f].filter(|_| needs_edges);
                    if edge.is_none() && !needs_facets {
                        return None;
                    }
                    let mut out = Box::new([0.0; 400]);
                    if let Some(e) = edge {
                        edge_local(space, complex, e, w, &edge_rule, &mut out);
                    }
                    if needs_facets {
                        facet_local(space, complex, f, w, &facet_rule, &mut out);
                    }
                    Some(out)
                })
                .collect();
            for (f, local) in (start..).zip(&locals) {
                if let Some(local) = local {
                    let facet = &complex.facets[f];
                    let mut dofs = [0usize; 20];
                    dofs[..10].copy_from_slice(&space.tet_dofs[facet.plus]);
                    dofs[10..].copy_from_slice(&space.tet_dofs[facet.minus]);
                    mat.add_local(&dofs, &local[..]);
                }
            }
        }
    }
    mat.drop_zeros();
    Ok(mat)
}

/// Edge terms on `E = ∂K⁺ ∩ ∂K⁻`:
/// `-({Δv}, μ·[∇w]) - ({Δw}, μ·[∇v]) + c (μ·[∇v], μ·[∇w])`, local dofs of
/// the plus tet first.
fn edge_local(space: &P2Space, complex: &CutComplex, e: usize, w: &FormWeights, rule: &QuadRule<2>, out: &mut [f64; 400]) {
    let edge = &complex.edges[e];
    let (p, m) = edge.polygons;
    let (pp, pm) = (complex.polygons[p].projector(), complex.polygons[m].projector());
    let (ep, em) = (&space.elements[p], &space.elements[m]);
    let lp = surface_laplacians(&ep.hessians, &pp);
    let lm = surface_laplacians(&em.hessians, &pm);
    let mut avg = [0.0; 20];
    for k in 0..10 {
        avg[k] = 0.5 * lp[k];
        avg[10 + k] = 0.5 * lm[k];
    }
    // μ·P±∇φ = (P±μ)·∇φ.
    let (mup, mum) = (pp * edge.mu, pm * edge.mu);
    for (x, wq) in segment_points(&edge.endpoints[0], &edge.endpoints[1], rule) {
        let (gp, gm) = (ep.gradients(&x), em.gradients(&x));
        let mut jump = [0.0; 20];
        for k in 0..10 {
            jump[k] = mup.dot(&gp[k]);
            jump[10 + k] = -mum.dot(&gm[k]);
        }
        for i in 0..20 {
            for j in 0..20 {
                let cons = avg[i] * jump[j] + jump[i] * avg[j];
                out[i * 20 + j] += wq * (w.edge_jump * jump[i] * jump[j] - w.consistency * cons);
            }
        }
    }
}

/// Facet jumps `g ([∇v], [∇w])_F + c ([∇²v], [∇²w])_F`.
fn facet_local(space: &P2Space, complex: &CutComplex, f: usize, w: &FormWeights, rule: &QuadRule<3>, out: &mut [f64; 400]) {
    let facet = &complex.facets[f];
    let (ep, em) = (&space.elements[facet.plus], &space.elements[facet.minus]);
    let area = facet.area();
    if w.hess_jump != 0.0 {
        let mut hj = [Matrix3::zeros(); 20];
        for k in 0..10 {
            hj[k] = ep.hessians[k];
            hj[10 + k] = -em.hessians[k];
        }
        for i in 0..20 {
            for j in 0..20 {
                out[i * 20 + j] += w.hess_jump * area * hj[i].dot(&hj[j]);
            }
        }
    }
    if w.grad_jump != 0.0 {
        let c = &facet.coords;
        for (lam, wq) in rule.iter() {
            let x = c[0] * lam[0] + c[1] * lam[1] + c[2] * lam[2];
            let (gp, gm) = (ep.gradients(&x), em.gradients(&x));
            let mut gj = [Vector3::zeros(); 20];
            for k in 0..10 {
                gj[k] = gp[k];
                gj[10 + k] = -gm[k];
            }
            let scale = w.grad_jump * 2.0 * area * wq;
            for i in 0..20 {
                for j in 0..20 {
                    out[i * 20 + j] += scale * gj[i].dot(&gj[j]);
                }
            }
        }
    }
}

/// Row patterns covering every pair of dofs that share an active tet or sit
/// on two tets meeting at a facet.
fn sparsity_pattern(space: &P2Space, complex: &CutComplex) -> Vec<Vec<u32>> {
    let ntets = space.tet_dofs.len();
    let mut neighbours: Vec<Vec<usize>> = (0..ntets).map(|t| vec![t]).collect();
    for f in &complex.facets {
        neighbours[f.plus].push(f.minus);
        neighbours[f.minus].push(f.plus);
    }
    let mut dof_tets: Vec<Vec<u32>> = vec![Vec::new(); space.ndof];
    for (t, dofs) in space.tet_dofs.iter().enumerate() {
        for &d in dofs {
            dof_tets[d].push(t as u32);
        }
    }
    dof_tets
        .par_iter()
        .map(|tets| {
            let mut row: Vec<u32> = Vec::with_capacity(tets.len() * 30);
            for &t in tets {
                for &s in &neighbours[t as usize] {
                    row.extend(space.tet_dofs[s].iter().map(|&d| d as u32));
                }
            }
            row.sort_unstable();
            row.dedup();
            row.shrink_to_fit();
            row
        })
        .collect()
}

/// `b_i = ∫_{Γ_h} f φ_i`.
pub fn assemble_rhs<F: ScalarJet2 + ?Sized>(space: &P2Space, complex: &CutComplex, f: &F) -> Result<Vec<f64>, AssemblyError> {
    let rule = gauss_triangle(RHS_QUADRATURE_DEGREE).expect("supported degree");
    let locals: Vec<[f64; 10]> = complex
        .polygons
        .par_iter()
        .enumerate()
        .map(|(k, poly)| {
            let el = &space.elements[k];
            let mut out = [0.0; 10];
            for (x, wq) in polygon_points(&poly.vertices, &rule) {
                let fx = wq * f.value(&x)?;
                for (o, b) in out.iter_mut().zip(el.values(&x)) {
                    *o += fx * b;
                }
            }
            Ok(out)
        })
        .collect::<Result<_, AssemblyError>>()?;
    let mut b = vec![0.0; space.ndof];
    for (dofs, local) in space.tet_dofs.iter().zip(&locals) {
        for (&d, v) in dofs.iter().zip(local) {
            b[d] += v;
        }
    }
    Ok(b)
}
