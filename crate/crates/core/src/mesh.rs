//! Background tetrahedral mesh and the cut complex of the discrete surface.
//!
//! The background mesh is a Kuhn (Freudenthal) split of a uniform cube grid.
//! `Γ_h` is the zero set of the piecewise linear interpolant of the level set;
//! it meets every active tet in one planar triangle or quadrilateral. Surface
//! edges are read off the background faces on which `φ_h` changes sign, so
//! the two polygons sharing an edge see bitwise identical endpoints.

use std::io::{self, Write};

use nalgebra::{Matrix3, Vector3};

use crate::error::MeshError;
use crate::geometry::ImplicitSurface;

/// Axis-aligned cube `[lo, hi]³`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CubeBox {
    pub lo: f64,
    pub hi: f64,
}

impl CubeBox {
    pub fn symmetric(half_width: f64) -> Self {
        CubeBox { lo: -half_width, hi: half_width }
    }

    pub fn volume(&self) -> f64 {
        (self.hi - self.lo).powi(3)
    }
}

/// Local faces of a tet: face `k` is opposite vertex `k`.
pub const TET_FACES: [[usize; 3]; 4] = [[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]];

/// Local edges of a tet, in the order used for the P2 edge dofs.
pub const TET_EDGES: [[usize; 2]; 6] = [[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]];

#[derive(Clone, Debug)]
pub struct BackgroundMesh {
    pub vertices: Vec<Vector3<f64>>,
    /// Positively oriented tets.
    pub tets: Vec<[usize; 4]>,
    pub domain: CubeBox,
    pub n_cells: usize,
    /// Cube-cell edge length.
    pub h: f64,
}

/// A triangular face with its adjacent tets. `normal` is the unit normal
/// pointing out of `plus` (into `minus`).
#[derive(Clone, Debug, PartialEq)]
pub struct Face {
    /// Sorted global vertex indices.
    pub vertices: [usize; 3],
    pub plus: usize,
    pub minus: Option<usize>,
    pub normal: Vector3<f64>,
}

pub fn build_background_mesh(domain: CubeBox, n_cells: usize) -> Result<BackgroundMesh, MeshError> {
    if !(domain.hi > domain.lo) || !domain.lo.is_finite() || !domain.hi.is_finite() {
        return Err(MeshError::DegenerateBox { lo: domain.lo, hi: domain.hi });
    }
    if n_cells < 2 {
        return Err(MeshError::TooFewCells(n_cells));
    }
    let n = n_cells;
    let h = (domain.hi - domain.lo) / n as f64;
    let np = n + 1;
    let coord = |i: usize| if i == n { domain.hi } else { domain.lo + i as f64 * h };
    let mut vertices = Vec::with_capacity(np * np * np);
    for k in 0..np {
        for j in 0..np {
            for i in 0..np {
                vertices.push(Vector3::new(coord(i), coord(j), coord(k)));
            }
        }
    }
    let index = |i: usize, j: usize, k: usize| i + np * (j + np * k);
    const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut tets = Vec::with_capacity(6 * n * n * n);
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                for perm in PERMS {
                    // Monotone lattice path from the cell's low corner to its high corner.
                    let mut c = [i, j, k];
                    let mut tet = [index(c[0], c[1], c[2]); 4];
                    for (step, &axis) in perm.iter().enumerate() {
                        c[axis] += 1;
                        tet[step + 1] = index(c[0], c[1], c[2]);
                    }
                    if signed_volume(&tet.map(|v| vertices[v])) < 0.0 {
                        tet.swap(2, 3);
                    }
                    tets.push(tet);
                }
            }
        }
    }
    Ok(BackgroundMesh { vertices, tets, domain, n_cells: n, h })
}

pub fn signed_volume(v: &[Vector3<f64>; 4]) -> f64 {
    (v[1] - v[0]).dot(&(v[2] - v[0]).cross(&(v[3] - v[0]))) / 6.0
}

impl BackgroundMesh {
    pub fn tet_coords(&self, t: usize) -> [Vector3<f64>; 4] {
        self.tets[t].map(|v| self.vertices[v])
    }

    /// Whether a vertex lies on the boundary of the box.
    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        let np = self.n_cells + 1;
        let (i, j, k) = (v % np, (v / np) % np, v / (np * np));
        [i, j, k].iter().any(|&c| c == 0 || c == self.n_cells)
    }

    /// All faces of the given tets, sorted by vertex key. A face seen from two
    /// of the tets gets both as neighbours (lower tet index is `plus`).
    pub fn faces_of(&self, tets: &[usize]) -> Vec<Face> {
        let mut keyed: Vec<([usize; 3], usize, usize)> = Vec::with_capacity(4 * tets.len());
        for &t in tets {
            for (local, f) in TET_FACES.iter().enumerate() {
                let mut key = f.map(|i| self.tets[t][i]);
                key.sort_unstable();
                keyed.push((key, t, local));
            }
        }
        keyed.sort_unstable();
        let mut faces = Vec::with_capacity(keyed.len() / 2 + 1);
        let mut i = 0;
        while i < keyed.len() {
            let (key, plus, local) = keyed[i];
            let minus = if i + 1 < keyed.len() && keyed[i + 1].0 == key {
                i += 1;
                Some(keyed[i].1)
            } else {
                None
            };
            i += 1;
            faces.push(Face { vertices: key, plus, minus, normal: self.outward_normal(plus, local) });
        }
        faces
    }

    /// Every face of the mesh.
    pub fn faces(&self) -> Vec<Face> {
        let all: Vec<usize> = (0..self.tets.len()).collect();
        self.faces_of(&all)
    }

    fn outward_normal(&self, t: usize, local: usize) -> Vector3<f64> {
        let v = self.tet_coords(t);
        let [a, b, c] = TET_FACES[local].map(|i| v[i]);
        let n = (b - a).cross(&(c - a)).normalize();
        if n.dot(&(v[local] - a)) > 0.0 {
            -n
        } else {
            n
        }
    }
}

/// Vertex values of the level set, pushed away from zero by `guard · h`.
pub fn interpolate_levelset<Sf: ImplicitSurface>(surface: &Sf, mesh: &BackgroundMesh, guard: f64) -> Vec<f64> {
    let eps = guard * mesh.h;
    mesh.vertices
        .iter()
        .map(|x| {
            let phi = surface.level_set(&[x.x, x.y, x.z]);
            if phi.abs() < eps {
                if phi < 0.0 {
                    -eps
                } else {
                    eps
                }
            } else {
                phi
            }
        })
        .collect()
}

pub const DEFAULT_GUARD: f64 = 1e-10;

/// `K = T ∩ Γ_h`: a planar triangle or quadrilateral.
#[derive(Clone, Debug, PartialEq)]
pub struct CutPolygon {
    /// Boundary-ordered vertices (3 or 4).
    pub vertices: Vec<Vector3<f64>>,
    /// Unit normal along `∇φ_h` (outward for a level set negative inside).
    pub normal: Vector3<f64>,
    pub area: f64,
}

impl CutPolygon {
    pub fn projector(&self) -> Matrix3<f64> {
        Matrix3::identity() - self.normal * self.normal.transpose()
    }

    pub fn centroid(&self) -> Vector3<f64> {
        self.vertices.iter().sum::<Vector3<f64>>() / self.vertices.len() as f64
    }
}

/// Root of the linear interpolant on the edge from a negative to a positive
/// vertex. The orientation is fixed by sign so that every tet sharing the
/// edge computes the same bits.
fn edge_root(xa: &Vector3<f64>, pa: f64, xb: &Vector3<f64>, pb: f64) -> Vector3<f64> {
    let (xn, pn, xp, pp) = if pa < 0.0 { (xa, pa, xb, pb) } else { (xb, pb, xa, pa) };
    xn + (xp - xn) * (pn / (pn - pp))
}

/// Gradient of the linear interpolant of `phi` on a tet.
fn linear_gradient(v: &[Vector3<f64>; 4], phi: &[f64; 4]) -> Option<Vector3<f64>> {
    let jac = Matrix3::from_columns(&[v[1] - v[0], v[2] - v[0], v[3] - v[0]]);
    let rhs = Vector3::new(phi[1] - phi[0], phi[2] - phi[0], phi[3] - phi[0]);
    jac.transpose().lu().solve(&rhs)
}

/// Zero set of the linear interpolant inside one tet.
///
/// Vertex order: for a 1-3 split the roots on the edges from the lone vertex
/// to the others in increasing local index; for a 2-2 split with negatives
/// `a < b` and positives `c < d`, the cycle `ac, bc, bd, ad`.
pub fn cut_tet(v: &[Vector3<f64>; 4], phi: &[f64; 4]) -> Result<Option<CutPolygon>, MeshError> {
    if phi.iter().any(|&p| p == 0.0) {
        return Err(MeshError::ZeroLevelSet);
    }
    let neg: Vec<usize> = (0..4).filter(|&i| phi[i] < 0.0).collect();
    let pos: Vec<usize> = (0..4).filter(|&i| phi[i] > 0.0).collect();
    let root = |a: usize, b: usize| edge_root(&v[a], phi[a], &v[b], phi[b]);
    let vertices = match (neg.len(), pos.len()) {
        (0, _) | (_, 0) => return Ok(None),
        (1, 3) | (3, 1) => {
            let (lone, others) = if neg.len() == 1 { (neg[0], &pos) } else { (pos[0], &neg) };
            others.iter().map(|&o| root(lone, o)).collect()
        }
        _ => {
            let (a, b, c, d) = (neg[0], neg[1], pos[0], pos[1]);
            vec![root(a, c), root(b, c), root(b, d), root(a, d)]
        }
    };
    let grad = linear_gradient(v, phi).ok_or(MeshError::DegenerateTet(signed_volume(v)))?;
    let normal = grad.normalize();
    let area = polygon_area(&vertices);
    Ok(Some(CutPolygon { vertices, normal, area }))
}

fn polygon_area(v: &[Vector3<f64>]) -> f64 {
    match v.len() {
        3 => 0.5 * (v[1] - v[0]).cross(&(v[2] - v[0])).norm(),
        _ => 0.5 * (v[2] - v[0]).cross(&(v[3] - v[1])).norm(),
    }
}

/// `E = ∂K⁺ ∩ ∂K⁻`, lying on the background face `face`.
#[derive(Clone, Debug, PartialEq)]
pub struct SurfaceEdge {
    pub endpoints: [Vector3<f64>; 2],
    /// Index into [`CutComplex::facets`].
    pub face: usize,
    /// Polygon indices `(K⁺, K⁻)`, `K±` inside the face's `plus`/`minus` tet.
    pub polygons: (usize, usize),
    pub tangent: Vector3<f64>,
    pub mu_plus: Vector3<f64>,
    pub mu_minus: Vector3<f64>,
    /// `(μ⁺ - μ⁻) / (1 - μ⁺·μ⁻)`.
    pub mu: Vector3<f64>,
}

impl SurfaceEdge {
    pub fn length(&self) -> f64 {
        (self.endpoints[1] - self.endpoints[0]).norm()
    }
}

/// Co-normals of an edge with tangent `t`, seen from polygons with normals
/// `n_plus`, `n_minus` on either side of a face with normal `nu` (pointing
/// from the plus side to the minus side). Returns `(μ⁺, μ⁻, μ_E)`.
pub fn co_normals(
    t: &Vector3<f64>,
    n_plus: &Vector3<f64>,
    n_minus: &Vector3<f64>,
    nu: &Vector3<f64>,
) -> (Vector3<f64>, Vector3<f64>, Vector3<f64>) {
    let mut mp = t.cross(n_plus).normalize();
    if mp.dot(nu) < 0.0 {
        mp = -mp;
    }
    let mut mm = t.cross(n_minus).normalize();
    if mm.dot(nu) > 0.0 {
        mm = -mm;
    }
    let mu = (mp - mm) / (1.0 - mp.dot(&mm));
    (mp, mm, mu)
}

/// An active tet: the background tet index and its vertex data.
#[derive(Clone, Debug, PartialEq)]
pub struct ActiveTet {
    pub tet: usize,
    pub vertices: [usize; 4],
    pub coords: [Vector3<f64>; 4],
}

/// A facet of `F_h`: an interior face of the active mesh. `plus`/`minus` are
/// indices into [`CutComplex::active`].
#[derive(Clone, Debug, PartialEq)]
pub struct Facet {
    pub vertices: [usize; 3],
    pub coords: [Vector3<f64>; 3],
    pub plus: usize,
    pub minus: usize,
    pub normal: Vector3<f64>,
}

impl Facet {
    pub fn area(&self) -> f64 {
        let c = &self.coords;
        0.5 * (c[1] - c[0]).cross(&(c[2] - c[0])).norm()
    }
}

#[derive(Clone, Debug)]
pub struct CutComplex {
    pub h: f64,
    /// Active tets in increasing background index.
    pub active: Vec<ActiveTet>,
    /// `polygons[k]` is the cut of `active[k]`.
    pub polygons: Vec<CutPolygon>,
    pub edges: Vec<SurfaceEdge>,
    pub facets: Vec<Facet>,
}

impl CutComplex {
    pub fn surface_area(&self) -> f64 {
        self.polygons.iter().map(|p| p.area).sum()
    }

    pub fn active_tet_ids(&self) -> Vec<usize> {
        self.active.iter().map(|a| a.tet).collect()
    }

    /// Debug export of `Γ_h`: one `K <tet_id> <n_vertices> x y z ...` line
    /// per polygon.
    pub fn write_surface<W: Write>(&self, mut out: W) -> io::Result<()> {
        for (a, poly) in self.active.iter().zip(&self.polygons) {
            write!(out, "K {} {}", a.tet, poly.vertices.len())?;
            for v in &poly.vertices {
                write!(out, " {:.17e} {:.17e} {:.17e}", v.x, v.y, v.z)?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

pub fn extract_cut_complex(mesh: &BackgroundMesh, phi: &[f64]) -> Result<CutComplex, MeshError> {
    let mut active = Vec::new();
    let mut polygons = Vec::new();
    for (t, tet) in mesh.tets.iter().enumerate() {
        let vals = tet.map(|v| phi[v]);
        let has_neg = vals.iter().any(|&p| p < 0.0);
        let has_pos = vals.iter().any(|&p| p > 0.0);
        if !(has_neg && has_pos) {
            if vals.iter().any(|&p| p == 0.0) {
                return Err(MeshError::ZeroLevelSet);
            }
            continue;
        }
        let coords = mesh.tet_coords(t);
        if let Some(poly) = cut_tet(&coords, &vals)? {
            if poly.area > 0.0 {
                active.push(ActiveTet { tet: t, vertices: *tet, coords });
                polygons.push(poly);
            }
        }
    }
    if active.is_empty() {
        return Err(MeshError::EmptyCut);
    }

    let tet_ids: Vec<usize> = active.iter().map(|a| a.tet).collect();
    let local = |t: usize| tet_ids.binary_search(&t).ok();
    let mut facets = Vec::new();
    let mut edges = Vec::new();
    for face in mesh.faces_of(&tet_ids) {
        let vals = face.vertices.map(|v| phi[v]);
        let sign_change = vals.iter().any(|&p| p < 0.0) && vals.iter().any(|&p| p > 0.0);
        let minus = match face.minus {
            Some(m) => m,
            None if sign_change => return Err(MeshError::SurfaceLeavesDomain(face.vertices)),
            None => continue,
        };
        let (Some(p), Some(m)) = (local(face.plus), local(minus)) else {
            // The neighbour across a cut face is cut as well, unless its own
            // cut has zero area.
            continue;
        };
        let coords = face.vertices.map(|v| mesh.vertices[v]);
        let facet_idx = facets.len();
        facets.push(Facet { vertices: face.vertices, coords, plus: p, minus: m, normal: face.normal });
        if !sign_change {
            continue;
        }
        // Zero segment of φ_h on the face: the lone-sign vertex against the other two.
        let lone = (0..3)
            .find(|&i| (0..3).filter(|&j| j != i).all(|j| (vals[j] < 0.0) != (vals[i] < 0.0)))
            .expect("a sign change on a triangle has a lone vertex");
        let others: Vec<usize> = (0..3).filter(|&j| j != lone).collect();
        let endpoints = [
            edge_root(&coords[lone], vals[lone], &coords[others[0]], vals[others[0]]),
            edge_root(&coords[lone], vals[lone], &coords[others[1]], vals[others[1]]),
        ];
        let (np, nm) = (polygons[p].normal, polygons[m].normal);
        let seg = endpoints[1] - endpoints[0];
        let cross = np.cross(&face.normal);
        let tangent = if seg.norm() > 1e-6 * mesh.h || cross.norm() < 1e-12 {
            seg.normalize()
        } else {
            cross.normalize()
        };
        let (mu_plus, mu_minus, mu) = co_normals(&tangent, &np, &nm, &face.normal);
        edges.push(SurfaceEdge { endpoints, face: facet_idx, polygons: (p, m), tangent, mu_plus, mu_minus, mu });
    }
    Ok(CutComplex { h: mesh.h, active, polygons, edges, facets })
}
