//! Solution of `A u = b` on the subspace `cᵀu = 0`.
//!
//! Two iterative paths are provided: conjugate gradients on the projected
//! operator `P A P` with projected Jacobi preconditioning, and a sparse
//! Cholesky factorization with iterative refinement. The Jacobi-CG iteration
//! count grows like `h⁻²`, so the factorization is the default for
//! refinement studies. A dense bordered solve and a dense constrained
//! eigenvalue routine serve as oracles on small meshes.

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};
use nalgebra::{DMatrix, DVector};

use crate::error::SolverError;
use crate::fespace::MeanVector;
use crate::sparse::SparseSymmetric;

pub const DEFAULT_TOLERANCE: f64 = 1e-10;

/// Largest system handled by the dense routines.
pub const DENSE_LIMIT: usize = 2000;

/// Symmetry is required to this relative accuracy.
const SYMMETRY_TOLERANCE: f64 = 1e-12;

/// Restarts allowed when the recurrence residual drifts from the true one.
const MAX_RESTARTS: usize = 5;

#[derive(Clone, Debug, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    /// `‖P(Au - b)‖ / ‖P b‖`.
    pub residual: f64,
    /// `|cᵀu| / (‖c‖ ‖u‖)`.
    pub constraint_violation: f64,
    /// Rounding level of the residual evaluation, `ε ‖ |A| |u| ‖ / ‖P b‖`.
    pub rounding_floor: f64,
}

/// A residual within this multiple of the rounding floor counts as converged.
pub const FLOOR_FACTOR: f64 = 10.0;

/// `ε ‖ |A| |u| ‖ / scale`: the accuracy to which `Au - b` can be evaluated.
pub fn rounding_floor(a: &SparseSymmetric, u: &[f64], scale: f64) -> f64 {
    let s: f64 = (0..a.dim()).map(|i| a.row(i).map(|(j, v)| (v * u[j]).abs()).sum::<f64>().powi(2)).sum();
    f64::EPSILON * s.sqrt() / scale
}

fn converged(report: &SolveReport, tol: f64) -> bool {
    report.residual <= tol.max(FLOOR_FACTOR * report.rounding_floor)
}

/// Solver used by the refinement study.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SolverKind {
    #[default]
    Cholesky,
    JacobiCg,
}

/// Dispatch to the selected constrained solver.
///
/// `extra` lists kernel vectors of `A` besides the constants. The
/// factorization needs them; CG only requires a compatible load and ignores
/// them.
pub fn solve_with_kind(
    kind: SolverKind,
    a: &SparseSymmetric,
    b: &[f64],
    c: &MeanVector,
    extra: &[Vec<f64>],
    tol: f64,
) -> Result<(Vec<f64>, SolveReport), SolverError> {
    match kind {
        SolverKind::Cholesky => solve_constrained_cholesky_with_kernel(a, b, c, extra, tol),
        SolverKind::JacobiCg => solve_constrained(a, b, c, tol, default_max_iter(a.dim())),
    }
}

pub fn default_max_iter(ndof: usize) -> usize {
    50 * ndof
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

struct Projector<'a> {
    c: &'a [f64],
    cc: f64,
}

impl Projector<'_> {
    fn apply(&self, v: &mut [f64]) {
        if self.cc == 0.0 {
            return;
        }
        let t = dot(self.c, v) / self.cc;
        v.iter_mut().zip(self.c).for_each(|(x, ci)| *x -= t * ci);
    }
}

fn check_inputs(a: &SparseSymmetric, b: &[f64], c: &[f64]) -> Result<(), SolverError> {
    let n = a.dim();
    for len in [b.len(), c.len()] {
        if len != n {
            return Err(SolverError::DimensionMismatch { matrix: n, vector: len });
        }
    }
    let defect = a.symmetry_defect();
    if defect > SYMMETRY_TOLERANCE * a.max_abs() {
        return Err(SolverError::NotSymmetric(defect));
    }
    Ok(())
}

fn violation(c: &[f64], u: &[f64]) -> f64 {
    let scale = norm(c) * norm(u);
    if scale == 0.0 {
        0.0
    } else {
        dot(c, u).abs() / scale
    }
}

/// Projected Jacobi-preconditioned CG. Returns the solution in `{cᵀu = 0}`
/// with `‖P(Au - b)‖ ≤ tol ‖P b‖`.
pub fn solve_constrained(
    a: &SparseSymmetric,
    b: &[f64],
    c: &MeanVector,
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, SolveReport), SolverError> {
    if !(tol > 0.0) {
        return Err(SolverError::InvalidTolerance(tol));
    }
    check_inputs(a, b, &c.c)?;
    let n = a.dim();
    let proj = Projector { c: &c.c, cc: dot(&c.c, &c.c) };
    let mut rhs = b.to_vec();
    proj.apply(&mut rhs);
    let rhs_norm = norm(&rhs);
    let mut x = vec![0.0; n];
    if rhs_norm == 0.0 {
        return Ok((x, SolveReport { iterations: 0, residual: 0.0, constraint_violation: 0.0, rounding_floor: 0.0 }));
    }
    let inv_diag: Vec<f64> = a.diagonal().iter().map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 }).collect();
    let precondition = |r: &[f64], z: &mut [f64]| {
        z.iter_mut().zip(r).zip(&inv_diag).for_each(|((zi, ri), di)| *zi = ri * di);
        proj.apply(z);
    };
    let true_residual = |x: &[f64], r: &mut [f64]| {
        a.matvec_into(x, r);
        r.iter_mut().zip(&rhs).for_each(|(ri, bi)| *ri = bi - *ri);
        proj.apply(r);
        norm(r) / rhs_norm
    };

    let mut r = rhs.clone();
    let mut z = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut q = vec![0.0; n];
    let mut iterations = 0;
    let mut residual = 1.0;
    let mut previous = f64::INFINITY;
    for _ in 0..=MAX_RESTARTS {
        precondition(&r, &mut z);
        p.copy_from_slice(&z);
        let mut rz = dot(&r, &z);
        while residual > tol && iterations < max_iter {
            a.matvec_into(&p, &mut q);
            proj.apply(&mut q);
            let pq = dot(&p, &q);
            if !(pq > 0.0) {
                break;
            }
            let alpha = rz / pq;
            x.iter_mut().zip(&p).for_each(|(xi, pi)| *xi += alpha * pi);
            r.iter_mut().zip(&q).for_each(|(ri, qi)| *ri -= alpha * qi);
            iterations += 1;
            residual = norm(&r) / rhs_norm;
            precondition(&r, &mut z);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            p.iter_mut().zip(&z).for_each(|(pi, zi)| *pi = zi + beta * *pi);
        }
        proj.apply(&mut x);
        residual = true_residual(&x, &mut r);
        // Near the rounding floor, stop once a restart no longer helps.
        let floor = FLOOR_FACTOR * rounding_floor(a, &x, rhs_norm);
        let stalled = residual > 0.5 * previous;
        if residual <= tol || (stalled && residual <= floor) || iterations >= max_iter {
            break;
        }
        previous = residual;
    }
    let report = SolveReport {
        iterations,
        residual,
        constraint_violation: violation(&c.c, &x),
        rounding_floor: rounding_floor(a, &x, rhs_norm),
    };
    if converged(&report, tol) {
        Ok((x, report))
    } else {
        Err(SolverError::NotConverged(report))
    }
}

/// Iterative refinement steps after the sparse factorization.
const MAX_REFINEMENTS: usize = 4;

/// Sparse Cholesky solve of the same constrained problem. `A` is positive
/// semidefinite with kernel `span{1}`, so the row and column of dof 0 are
/// removed, the load is made compatible (`1ᵀb = 0`) by subtracting a
/// multiple of `c`, and the solution is shifted by a constant onto
/// `{cᵀu = 0}`. A few steps of iterative refinement follow.
pub fn solve_constrained_cholesky(
    a: &SparseSymmetric,
    b: &[f64],
    c: &MeanVector,
    tol: f64,
) -> Result<(Vec<f64>, SolveReport), SolverError> {
    solve_constrained_cholesky_with_kernel(a, b, c, &[], tol)
}

/// Rows of `K` (`n × k`) at which `K` restricted to those rows is
/// invertible, chosen by Gaussian elimination with row pivoting.
fn pin_rows(kernel: &[Vec<f64>]) -> Result<Vec<usize>, SolverError> {
    let k = kernel.len();
    let n = kernel[0].len();
    let mut work: Vec<Vec<f64>> = kernel.to_vec();
    let mut pinned: Vec<usize> = Vec::with_capacity(k);
    for m in 0..k {
        let scale = work[m].iter().fold(0.0f64, |s, x| s.max(x.abs()));
        let pivot = (0..n)
            .filter(|i| !pinned.contains(i))
            .fold(None, |best: Option<usize>, i| match best {
                Some(j) if work[m][j].abs() >= work[m][i].abs() => Some(j),
                _ => Some(i),
            })
            .ok_or(SolverError::Factorization("more kernel vectors than unknowns"))?;
        if !(work[m][pivot].abs() > 1e-8 * scale.max(f64::MIN_POSITIVE)) || scale == 0.0 {
            return Err(SolverError::Factorization("kernel vectors are linearly dependent"));
        }
        for q in m + 1..k {
            let f = work[q][pivot] / work[m][pivot];
            let (head, tail) = work.split_at_mut(q);
            tail[0].iter_mut().zip(&head[m]).for_each(|(x, y)| *x -= f * y);
        }
        pinned.push(pivot);
    }
    Ok(pinned)
}

/// `x ← x - L (Rᵀ L)⁻¹ Rᵀ x`: oblique projection along the columns of `L`
/// onto the complement of the columns of `R`.
fn oblique_project(x: &mut [f64], along: &[&[f64]], against: &[&[f64]]) {
    let k = along.len();
    let m = DMatrix::from_fn(k, k, |i, j| dot(against[i], along[j]));
    let rhs = DVector::from_fn(k, |i, _| dot(against[i], x));
    let t = m.lu().solve(&rhs).expect("nonsingular kernel pairing");
    for (l, ti) in along.iter().zip(t.iter()) {
        x.iter_mut().zip(l.iter()).for_each(|(xi, li)| *xi -= ti * li);
    }
}

/// As [`solve_constrained_cholesky`] when `A` has the known kernel
/// `span{1, extra...}`. One dof per kernel vector is pinned to zero, the load
/// is made orthogonal to the kernel and the solution is normalized by
/// `cᵀu = 0` and `gᵀu = 0` for every extra kernel vector `g`.
pub fn solve_constrained_cholesky_with_kernel(
    a: &SparseSymmetric,
    b: &[f64],
    c: &MeanVector,
    extra: &[Vec<f64>],
    tol: f64,
) -> Result<(Vec<f64>, SolveReport), SolverError> {
    if !(tol > 0.0) {
        return Err(SolverError::InvalidTolerance(tol));
    }
    check_inputs(a, b, &c.c)?;
    let n = a.dim();
    for g in extra {
        if g.len() != n {
            return Err(SolverError::DimensionMismatch { matrix: n, vector: g.len() });
        }
    }
    let ones = vec![1.0; n];
    let mut kernel = vec![ones];
    kernel.extend(extra.iter().cloned());
    let kernel_refs: Vec<&[f64]> = kernel.iter().map(Vec::as_slice).collect();
    let mut pairing: Vec<&[f64]> = vec![&c.c];
    pairing.extend(extra.iter().map(Vec::as_slice));
    // The solvable part of the load: its components along c and the extra
    // kernel vectors are removed so that it is orthogonal to the kernel.
    let pinned = pin_rows(&kernel)?;
    let mut b = b.to_vec();
    oblique_project(&mut b, &pairing, &kernel_refs);
    let proj = Projector { c: &c.c, cc: dot(&c.c, &c.c) };
    let mut pb = b.clone();
    proj.apply(&mut pb);
    let pb_norm = norm(&pb);
    let k = kernel.len();
    if pb_norm == 0.0 || n <= k {
        return Ok((vec![0.0; n], SolveReport { iterations: 0, residual: 0.0, constraint_violation: 0.0, rounding_floor: 0.0 }));
    }

    const PINNED: usize = usize::MAX;
    let mut index = vec![0usize; n];
    let mut next = 0;
    for (i, slot) in index.iter_mut().enumerate() {
        if pinned.contains(&i) {
            *slot = PINNED;
        } else {
            *slot = next;
            next += 1;
        }
    }
    let m = n - k;
    let mut triplets = Vec::with_capacity(a.nnz() / 2 + n);
    for i in 0..n {
        let ri = index[i];
        if ri == PINNED {
            continue;
        }
        for (j, v) in a.row(i) {
            let rj = index[j];
            if j <= i && rj != PINNED {
                triplets.push(Triplet::new(ri, rj, v));
            }
        }
    }
    let reduced = SparseColMat::<usize, f64>::try_new_from_triplets(m, m, &triplets)
        .map_err(|_| SolverError::Factorization("invalid sparse matrix"))?;
    drop(triplets);
    let llt = reduced.sp_cholesky(Side::Lower).map_err(|_| SolverError::Factorization("matrix is not positive definite"))?;
    drop(reduced);

    let correction = |r: &[f64]| -> Vec<f64> {
        let mut rhs = Mat::<f64>::zeros(m, 1);
        for (i, &ri) in index.iter().enumerate() {
            if ri != PINNED {
                rhs[(ri, 0)] = r[i];
            }
        }
        llt.solve_in_place(rhs.as_mut());
        index.iter().map(|&ri| if ri == PINNED { 0.0 } else { rhs[(ri, 0)] }).collect()
    };
    let mut u = vec![0.0; n];
    let mut r = b.clone();
    let mut au = vec![0.0; n];
    let mut residual = f64::INFINITY;
    let mut steps = 0;
    while steps <= MAX_REFINEMENTS {
        oblique_project(&mut r, &pairing, &kernel_refs);
        let mut next_u = u.clone();
        next_u.iter_mut().zip(correction(&r)).for_each(|(x, d)| *x += d);
        steps += 1;
        oblique_project(&mut next_u, &kernel_refs, &pairing);
        a.matvec_into(&next_u, &mut au);
        r.iter_mut().zip(&b).zip(&au).for_each(|((ri, bi), ai)| *ri = bi - ai);
        let mut pr = r.clone();
        proj.apply(&mut pr);
        let next = norm(&pr) / pb_norm;
        if next > residual {
            break;
        }
        let stalled = next > 0.5 * residual;
        u = next_u;
        residual = next;
        if residual <= tol || stalled {
            break;
        }
    }
    let report = SolveReport {
        iterations: steps,
        residual,
        constraint_violation: violation(&c.c, &u),
        rounding_floor: rounding_floor(a, &u, pb_norm),
    };
    if converged(&report, tol) {
        Ok((u, report))
    } else {
        Err(SolverError::NotConverged(report))
    }
}

fn check_dense(n: usize) -> Result<(), SolverError> {
    if n > DENSE_LIMIT {
        return Err(SolverError::Factorization("system too large for the dense path"));
    }
    Ok(())
}

/// Dense LU solve of `[A c; cᵀ 0] [u; λ] = [b; 0]`.
pub fn solve_dense_bordered(a: &SparseSymmetric, b: &[f64], c: &MeanVector) -> Result<Vec<f64>, SolverError> {
    check_inputs(a, b, &c.c)?;
    let n = a.dim();
    check_dense(n)?;
    let mut m = DMatrix::zeros(n + 1, n + 1);
    m.view_mut((0, 0), (n, n)).copy_from(&a.to_dense());
    for (i, &ci) in c.c.iter().enumerate() {
        m[(i, n)] = ci;
        m[(n, i)] = ci;
    }
    let mut rhs = DVector::zeros(n + 1);
    rhs.rows_mut(0, n).copy_from_slice(b);
    let sol = m.lu().solve(&rhs).ok_or(SolverError::Factorization("singular bordered system"))?;
    Ok(sol.as_slice()[..n].to_vec())
}

/// `Qᵀ A Q` for an orthonormal basis `Q` of `{cᵀv = 0}`, taken from the last
/// `n - 1` columns of the Householder reflector mapping `c` to a multiple of
/// `e₁`.
pub fn restrict_to_constraint(a: &DMatrix<f64>, c: &[f64]) -> DMatrix<f64> {
    let n = c.len();
    let cn = norm(c);
    let mut v = DVector::from_column_slice(c);
    v[0] += if c[0] >= 0.0 { cn } else { -cn };
    let vn = v.norm();
    v /= vn;
    // H A H with H = I - 2 v vᵀ.
    let av = a * &v;
    let vav = v.dot(&av);
    let mut hah = a.clone();
    hah.ger(-2.0, &v, &av, 1.0);
    hah.ger(-2.0, &av, &v, 1.0);
    hah.ger(4.0 * vav, &v, &v, 1.0);
    hah.view((1, 1), (n - 1, n - 1)).into_owned()
}

/// Smallest eigenvalue of `A` on `{cᵀv = 0}`.
pub fn constrained_min_eigenvalue(a: &SparseSymmetric, c: &MeanVector) -> Result<f64, SolverError> {
    check_inputs(a, &c.c, &c.c)?;
    check_dense(a.dim())?;
    let reduced = restrict_to_constraint(&a.to_dense(), &c.c);
    Ok(reduced.symmetric_eigenvalues().min())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{assemble_rhs, assemble_system, FormParams, RHS_QUADRATURE_DEGREE};
    use crate::fespace::{build_p2_space, mean_vector};
    use crate::geometry::{exact_data, Sphere};
    use crate::mesh::{build_background_mesh, extract_cut_complex, interpolate_levelset, CubeBox, DEFAULT_GUARD};
    use crate::quadrature::gauss_triangle;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    fn small_spd(n: usize) -> SparseSymmetric {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 4.0 + i as f64 * 0.1));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        SparseSymmetric::from_triplets(n, &t)
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let a = small_spd(5);
        let c = MeanVector { c: vec![1.0; 5] };
        let (u, rep) = solve_constrained(&a, &[0.0; 5], &c, 1e-10, 100).unwrap();
        assert_eq!(u, vec![0.0; 5]);
        assert_eq!(rep.iterations, 0);
    }

    #[test]
    fn identity_returns_projected_rhs() {
        let n = 20;
        let a = SparseSymmetric::identity(n);
        let c = MeanVector { c: random(n, 1) };
        let b = random(n, 2);
        let (u, rep) = solve_constrained(&a, &b, &c, 1e-12, 100).unwrap();
        let t = dot(&c.c, &b) / dot(&c.c, &c.c);
        for i in 0..n {
            assert!((u[i] - (b[i] - t * c.c[i])).abs() < 1e-13);
        }
        assert!(rep.constraint_violation < 1e-14);
    }

    #[test]
    fn rejects_bad_inputs() {
        let a = SparseSymmetric::from_triplets(2, &[(0, 0, 1.0), (1, 1, 1.0), (0, 1, 0.5)]);
        let c = MeanVector { c: vec![1.0, 1.0] };
        assert!(matches!(solve_constrained(&a, &[1.0, 0.0], &c, 1e-8, 10), Err(SolverError::NotSymmetric(_))));
        let a = SparseSymmetric::identity(2);
        assert!(matches!(solve_constrained(&a, &[1.0], &c, 1e-8, 10), Err(SolverError::DimensionMismatch { .. })));
        assert!(matches!(solve_constrained(&a, &[1.0, 0.0], &c, 0.0, 10), Err(SolverError::InvalidTolerance(_))));
    }

    #[test]
    fn iteration_budget_is_enforced() {
        let n = 50;
        let a = small_spd(n);
        let c = MeanVector { c: vec![1.0; n] };
        match solve_constrained(&a, &random(n, 3), &c, 1e-14, 2) {
            Err(SolverError::NotConverged(rep)) => assert_eq!(rep.iterations, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn matches_dense_bordered_on_small_system() {
        let n = 40;
        let a = small_spd(n);
        let c = MeanVector { c: random(n, 4).iter().map(|x| x + 1.5).collect() };
        let b = random(n, 5);
        let (u, _) = solve_constrained(&a, &b, &c, 1e-13, 1000).unwrap();
        let d = solve_dense_bordered(&a, &b, &c).unwrap();
        let err = u.iter().zip(&d).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        assert!(err <= 1e-10 * norm(&d));
    }

    #[test]
    fn cholesky_path_with_second_kernel_vector() {
        // Two disconnected weighted paths: kernel span{1, χ} with χ the
        // indicator of the second path.
        let (n, half) = (30, 15);
        let mut t = Vec::new();
        for i in (0..n - 1).filter(|&i| i + 1 != half) {
            let w = 1.0 + 0.1 * i as f64;
            t.extend([(i, i, w), (i + 1, i + 1, w), (i, i + 1, -w), (i + 1, i, -w)]);
        }
        let a = SparseSymmetric::from_triplets(n, &t);
        let c = MeanVector { c: random(n, 13).iter().map(|x| x + 2.0).collect() };
        let g: Vec<f64> = (0..n).map(|i| if i >= half { 1.0 } else { 0.0 }).collect();
        let b = random(n, 14);
        assert!(matches!(solve_constrained_cholesky(&a, &b, &c, 1e-12), Err(SolverError::Factorization(_))));
        let (u, rep) = solve_constrained_cholesky_with_kernel(&a, &b, &c, &[g.clone()], 1e-12).unwrap();
        assert!(rep.constraint_violation < 1e-14);
        assert!(dot(&g, &u).abs() < 1e-13 * norm(&u));

        // Oracle: [A c g; cᵀ 0 0; gᵀ 0 0] [u; λ; μ] = [b; 0; 0].
        let mut m = DMatrix::zeros(n + 2, n + 2);
        m.view_mut((0, 0), (n, n)).copy_from(&a.to_dense());
        for i in 0..n {
            for (k, v) in [c.c[i], g[i]].into_iter().enumerate() {
                m[(i, n + k)] = v;
                m[(n + k, i)] = v;
            }
        }
        let mut rhs = DVector::zeros(n + 2);
        rhs.rows_mut(0, n).copy_from_slice(&b);
        let d = m.lu().solve(&rhs).unwrap();
        let err = u.iter().zip(d.iter()).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        assert!(err <= 1e-10 * norm(&u), "{err}");

        let dependent = vec![2.0; n];
        assert!(matches!(
            solve_constrained_cholesky_with_kernel(&a, &b, &c, &[dependent], 1e-12),
            Err(SolverError::Factorization(_))
        ));
    }

    #[test]
    fn cholesky_path_matches_dense_on_singular_system() {
        // Graph Laplacian of a path plus a weighted diagonal-free coupling:
        // positive semidefinite with kernel span{1}.
        let n = 30;
        let mut t = Vec::new();
        for i in 0..n - 1 {
            let w = 1.0 + 0.1 * i as f64;
            t.extend([(i, i, w), (i + 1, i + 1, w), (i, i + 1, -w), (i + 1, i, -w)]);
        }
        let a = SparseSymmetric::from_triplets(n, &t);
        let c = MeanVector { c: random(n, 11).iter().map(|x| x + 2.0).collect() };
        let b = random(n, 12);
        let (u, rep) = solve_constrained_cholesky(&a, &b, &c, 1e-12).unwrap();
        assert!(rep.residual <= 1e-12 && rep.constraint_violation < 1e-14);
        let d = solve_dense_bordered(&a, &b, &c).unwrap();
        let err = u.iter().zip(&d).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        assert!(err <= 1e-10 * norm(&d));
        let (z, rep) = solve_constrained_cholesky(&a, &vec![0.0; n], &c, 1e-12).unwrap();
        assert!(z.iter().all(|&x| x == 0.0) && rep.iterations == 0);
    }

    #[test]
    fn householder_restriction_oracle() {
        // A = diag(1..n), c = e₁: the restriction keeps eigenvalues 2..n.
        let n = 6;
        let a = DMatrix::from_diagonal(&DVector::from_fn(n, |i, _| (i + 1) as f64));
        let mut c = vec![0.0; n];
        c[0] = 2.0;
        let mut ev: Vec<f64> = restrict_to_constraint(&a, &c).symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        for (k, e) in ev.iter().enumerate() {
            assert!((e - (k + 2) as f64).abs() < 1e-13);
        }
        // Rank-one oracle: A = I + c cᵀ is the identity on c⊥.
        let c = random(n, 9);
        let cv = DVector::from_column_slice(&c);
        let a = DMatrix::identity(n, n) + &cv * cv.transpose();
        let r = restrict_to_constraint(&a, &c);
        assert!((r - DMatrix::identity(n - 1, n - 1)).amax() < 1e-13);
    }

    #[test]
    fn sphere_problem_cg_agrees_with_dense() {
        let mesh = build_background_mesh(CubeBox::symmetric(1.2), 6).unwrap();
        let phi = interpolate_levelset(&Sphere::unit(), &mesh, DEFAULT_GUARD);
        let complex = extract_cut_complex(&mesh, &phi).unwrap();
        let space = build_p2_space(&complex).unwrap();
        assert!(space.ndof <= DENSE_LIMIT, "{}", space.ndof);
        let a = assemble_system(&space, &complex, &FormParams::with_defaults(0, complex.h)).unwrap();
        let c = mean_vector(&space, &complex, &gauss_triangle(RHS_QUADRATURE_DEGREE).unwrap());
        let b = assemble_rhs(&space, &complex, &exact_data().f).unwrap();
        let (u, rep) = solve_constrained(&a, &b, &c, DEFAULT_TOLERANCE, default_max_iter(space.ndof)).unwrap();
        assert!(rep.residual <= DEFAULT_TOLERANCE, "{rep:?}");
        assert!(rep.constraint_violation <= 1e-12);
        let d = solve_dense_bordered(&a, &b, &c).unwrap();
        let err = u.iter().zip(&d).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        assert!(err <= 1e-8 * norm(&d), "{err}");

        // Shifting b along c changes nothing.
        let b2: Vec<f64> = b.iter().zip(&c.c).map(|(x, ci)| x + 3.7 * ci).collect();
        let (u2, _) = solve_constrained(&a, &b2, &c, DEFAULT_TOLERANCE, default_max_iter(space.ndof)).unwrap();
        let diff = u.iter().zip(&u2).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        assert!(diff <= 1e-8 * norm(&u));

        let (v, rep) = solve_constrained_cholesky(&a, &b, &c, DEFAULT_TOLERANCE).unwrap();
        assert!(rep.residual <= DEFAULT_TOLERANCE && rep.constraint_violation <= 1e-12);
        let err = v.iter().zip(&d).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        assert!(err <= 1e-8 * norm(&d), "{err}");

        assert!(constrained_min_eigenvalue(&a, &c).unwrap() > 0.0);
    }
}
