//! Calculus on the exact surface.
//!
//! Fields on ℝ³ implement [`SmoothField`], which evaluates them on any
//! [`Scalar`] so that derivatives of compositions through the closest-point
//! map come out of jet arithmetic rather than hand-derived formulas. Anything
//! that can report `(value, gradient, Hessian)` at a point implements
//! [`ScalarJet2`]; every `SmoothField` does so automatically.
//!
//! The surface operators follow the usual tangential-calculus conventions:
//! `P = I - n nᵀ`, `∇_Γψ = P ∇ψᵉ` and `Δ_Γψ = tr(P ∇²ψᵉ P)` for an extension
//! `ψᵉ = ψ ∘ p` that is constant along normal lines.

use std::f64::consts::PI;
use std::sync::OnceLock;

use nalgebra::{Matrix3, SymmetricEigen, Vector3};

use crate::error::GeometryError;
use crate::jet::{Jet2, Scalar};
use crate::quadrature::{gauss_triangle, QuadRule};

/// A scalar field on ℝ³ that can be evaluated on jets of any order.
pub trait SmoothField: Sync {
    fn eval<S: Scalar>(&self, x: &[S; 3]) -> Result<S, GeometryError>;
}

impl<F: SmoothField + ?Sized> SmoothField for &F {
    fn eval<S: Scalar>(&self, x: &[S; 3]) -> Result<S, GeometryError> {
        (**self).eval(x)
    }
}

/// Evaluation contract: value, gradient and Hessian at a point of ℝ³.
pub trait ScalarJet2: Sync {
    fn value(&self, x: &Vector3<f64>) -> Result<f64, GeometryError>;
    fn jet(&self, x: &Vector3<f64>) -> Result<Jet2<f64>, GeometryError>;
}

impl<F: SmoothField> ScalarJet2 for F {
    fn value(&self, x: &Vector3<f64>) -> Result<f64, GeometryError> {
        self.eval(&[x.x, x.y, x.z])
    }

    fn jet(&self, x: &Vector3<f64>) -> Result<Jet2<f64>, GeometryError> {
        self.eval(&Jet2::variables([x.x, x.y, x.z]))
    }
}

/// `x ↦ x_k`.
#[derive(Clone, Copy, Debug)]
pub struct Coordinate(pub usize);

impl SmoothField for Coordinate {
    fn eval<S: Scalar>(&self, x: &[S; 3]) -> Result<S, GeometryError> {
        Ok(x[self.0])
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Constant(pub f64);

impl SmoothField for Constant {
    fn eval<S: Scalar>(&self, _x: &[S; 3]) -> Result<S, GeometryError> {
        Ok(S::from_f64(self.0))
    }
}

/// `x ↦ |x|²`.
#[derive(Clone, Copy, Debug)]
pub struct SquaredNorm;

impl SmoothField for SquaredNorm {
    fn eval<S: Scalar>(&self, x: &[S; 3]) -> Result<S, GeometryError> {
        Ok(x[0] * x[0] + x[1] * x[1] + x[2] * x[2])
    }
}

/// `exp(x + y²) cos(z³)`, the manufactured solution of the sphere study.
#[derive(Clone, Copy, Debug)]
pub struct ExpCos;

impl SmoothField for ExpCos {
    fn eval<S: Scalar>(&self, x: &[S; 3]) -> Result<S, GeometryError> {
        let z3 = x[2] * x[2] * x[2];
        Ok((x[0] + x[1] * x[1]).exp() * z3.cos())
    }
}

/// `field + shift`.
#[derive(Clone, Copy, Debug)]
pub struct Shifted<F> {
    pub field: F,
    pub shift: f64,
}

impl<F: SmoothField> SmoothField for Shifted<F> {
    fn eval<S: Scalar>(&self, x: &[S; 3]) -> Result<S, GeometryError> {
        Ok(self.field.eval(x)? + self.shift)
    }
}

/// `factor * field`.
#[derive(Clone, Copy, Debug)]
pub struct Scaled<F> {
    pub field: F,
    pub factor: f64,
}

impl<F: SmoothField> SmoothField for Scaled<F> {
    fn eval<S: Scalar>(&self, x: &[S; 3]) -> Result<S, GeometryError> {
        Ok(self.field.eval(x)? * self.factor)
    }
}

/// A closed surface given implicitly, together with its signed distance.
///
/// Implementors supply the level set, the signed distance (negative inside)
/// and the closest-point map, all generic over [`Scalar`]. Normal, Weingarten
/// map and curvatures are derived from jets of the distance.
pub trait ImplicitSurface: Sync {
    fn level_set<S: Scalar>(&self, x: &[S; 3]) -> S;

    fn signed_distance<S: Scalar>(&self, x: &[S; 3]) -> Result<S, GeometryError>;

    fn closest_point<S: Scalar>(&self, x: &[S; 3]) -> Result<[S; 3], GeometryError>;

    fn distance_jet(&self, x: &Vector3<f64>) -> Result<Jet2<f64>, GeometryError> {
        self.signed_distance(&Jet2::variables([x.x, x.y, x.z]))
    }

    /// `n = ∇d`.
    fn normal(&self, x: &Vector3<f64>) -> Result<Vector3<f64>, GeometryError> {
        Ok(self.distance_jet(x)?.gradient())
    }

    /// `H = ∇²d`.
    fn weingarten(&self, x: &Vector3<f64>) -> Result<Matrix3<f64>, GeometryError> {
        Ok(self.distance_jet(x)?.hessian())
    }

    /// `P = I - n nᵀ`.
    fn projector(&self, x: &Vector3<f64>) -> Result<Matrix3<f64>, GeometryError> {
        Ok(tangential_projector(&self.normal(x)?))
    }

    /// Eigenvalues of `H` on the tangent plane, in increasing order.
    fn principal_curvatures(&self, x: &Vector3<f64>) -> Result<(f64, f64), GeometryError> {
        let jet = self.distance_jet(x)?;
        let n = jet.gradient();
        let eig = SymmetricEigen::new(jet.hessian());
        // Drop the eigenpair whose vector is closest to the normal.
        let normal_idx = (0..3)
            .max_by(|&a, &b| {
                let da = eig.eigenvectors.column(a).dot(&n).abs();
                let db = eig.eigenvectors.column(b).dot(&n).abs();
                da.total_cmp(&db)
            })
            .unwrap();
        let mut k: Vec<f64> = (0..3).filter(|&i| i != normal_idx).map(|i| eig.eigenvalues[i]).collect();
        k.sort_by(f64::total_cmp);
        Ok((k[0], k[1]))
    }
}

/// Sphere `|x - c| = r`; the level set coincides with the signed distance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sphere {
    pub center: [f64; 3],
    pub radius: f64,
}

impl Sphere {
    pub fn unit() -> Self {
        Sphere { center: [0.0; 3], radius: 1.0 }
    }

    pub fn area(&self) -> f64 {
        4.0 * PI * self.radius * self.radius
    }

    fn offset<S: Scalar>(&self, x: &[S; 3]) -> [S; 3] {
        [x[0] - self.center[0], x[1] - self.center[1], x[2] - self.center[2]]
    }

    fn radial<S: Scalar>(&self, x: &[S; 3]) -> Result<([S; 3], S), GeometryError> {
        let y = self.offset(x);
        let r2 = y[0] * y[0] + y[1] * y[1] + y[2] * y[2];
        if r2.real() <= (1e-12 * self.radius).powi(2) {
            return Err(GeometryError::OutsideBand([x[0].real(), x[1].real(), x[2].real()]));
        }
        Ok((y, r2.sqrt()))
    }
}

impl Default for Sphere {
    fn default() -> Self {
        Self::unit()
    }
}

impl ImplicitSurface for Sphere {
    fn level_set<S: Scalar>(&self, x: &[S; 3]) -> S {
        let y = self.offset(x);
        (y[0] * y[0] + y[1] * y[1] + y[2] * y[2]).sqrt() - self.radius
    }

    fn signed_distance<S: Scalar>(&self, x: &[S; 3]) -> Result<S, GeometryError> {
        let (_, r) = self.radial(x)?;
        Ok(r - self.radius)
    }

    fn closest_point<S: Scalar>(&self, x: &[S; 3]) -> Result<[S; 3], GeometryError> {
        let (y, r) = self.radial(x)?;
        let s = r.recip() * self.radius;
        Ok([y[0] * s + self.center[0], y[1] * s + self.center[1], y[2] * s + self.center[2]])
    }
}

pub fn tangential_projector(normal: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::identity() - normal * normal.transpose()
}

/// Closest-point extension `ψᵉ = ψ ∘ p`.
#[derive(Clone, Copy, Debug)]
pub struct Extension<Sf, F> {
    pub surface: Sf,
    pub field: F,
}

pub fn extend<Sf: ImplicitSurface, F: SmoothField>(surface: Sf, field: F) -> Extension<Sf, F> {
    Extension { surface, field }
}

impl<Sf: ImplicitSurface, F: SmoothField> SmoothField for Extension<Sf, F> {
    fn eval<S: Scalar>(&self, x: &[S; 3]) -> Result<S, GeometryError> {
        self.field.eval(&self.surface.closest_point(x)?)
    }
}

/// `(I - ν νᵀ) ∇ψ(x)` for a unit `normal` ν.
///
/// With ν = n and an extension this is `∇_Γψ`; with a facet normal `n_h` it
/// is the discrete surface gradient.
pub fn surface_gradient<F: ScalarJet2 + ?Sized>(
    field: &F,
    x: &Vector3<f64>,
    normal: &Vector3<f64>,
) -> Result<Vector3<f64>, GeometryError> {
    let grad = field.jet(x)?.gradient();
    Ok(grad - normal * normal.dot(&grad))
}

/// Projected Hessian `P ∇²ψ P` and its trace `P : ∇²ψ`.
///
/// For an extension field on the exact surface this is `(∇²_Γψ, Δ_Γψ)`, since
/// the extension has no normal derivative. For a constant facet normal it is
/// the discrete Laplace-Beltrami operator of the polynomial.
pub fn surface_hessian_laplacian<F: ScalarJet2 + ?Sized>(
    field: &F,
    x: &Vector3<f64>,
    normal: &Vector3<f64>,
) -> Result<(Matrix3<f64>, f64), GeometryError> {
    let hess = field.jet(x)?.hessian();
    let p = tangential_projector(normal);
    let proj = p * hess * p;
    Ok((proj, proj.trace()))
}

/// `Δ_Γ²u` on a sphere, extended to the band as a function of `p(x)`.
///
/// For a field constant along rays from the centre, the Euclidean Laplacian
/// restricted to the sphere equals the Laplace-Beltrami operator. Hence with
/// `w = Δ(u ∘ p)` we have `Δ_Γ²u = Δ(w ∘ p)` on the sphere, and evaluating at
/// `p(x)` gives a field on the band. Fourth derivatives come from nested jets.
#[derive(Clone, Copy, Debug)]
pub struct BilaplacianField<F> {
    pub sphere: Sphere,
    pub u: F,
}

pub fn surface_bilaplacian_field<F: SmoothField>(sphere: Sphere, u: F) -> BilaplacianField<F> {
    BilaplacianField { sphere, u }
}

impl<F: SmoothField> SmoothField for BilaplacianField<F> {
    fn eval<S: Scalar>(&self, x: &[S; 3]) -> Result<S, GeometryError> {
        let on_surface = self.sphere.closest_point(x)?;
        // Inner jets differentiate in the outer variable of Δ(w ∘ p).
        let outer = self.sphere.closest_point(&Jet2::variables(on_surface))?;
        // Nested jets differentiate w = Δ(u ∘ p) at the moving point p(x).
        let inner = Jet2::variables(outer);
        let u_ext = self.u.eval(&self.sphere.closest_point(&inner)?)?;
        Ok(u_ext.laplacian().laplacian())
    }
}

/// Manufactured data: the mean-free exact solution, the load and the mean
/// that was removed.
#[derive(Clone, Copy, Debug)]
pub struct ExactData<U, F> {
    pub u_exact: Shifted<Extension<Sphere, U>>,
    pub f: BilaplacianField<F>,
    pub mean_shift: f64,
}

/// Level of the projected-octahedron quadrature used for surface means.
const MEAN_QUADRATURE_SEGMENTS: usize = 48;

/// Data for `u = exp(x + y²) cos(z³)` on the unit sphere.
pub fn exact_data() -> ExactData<ExpCos, ExpCos> {
    static MEAN: OnceLock<f64> = OnceLock::new();
    let sphere = Sphere::unit();
    let mean = *MEAN.get_or_init(|| {
        sphere_mean(&sphere, &extend(sphere, ExpCos), MEAN_QUADRATURE_SEGMENTS)
            .expect("unit sphere quadrature points lie on the sphere")
    });
    ExactData {
        u_exact: Shifted { field: extend(sphere, ExpCos), shift: -mean },
        f: surface_bilaplacian_field(sphere, ExpCos),
        mean_shift: mean,
    }
}

/// Data for the first spherical harmonic `u = x₁`, with `Δ_Γ²u = 4x₁`.
pub fn harmonic_data() -> ExactData<Coordinate, Coordinate> {
    let sphere = Sphere::unit();
    ExactData {
        u_exact: Shifted { field: extend(sphere, Coordinate(0)), shift: 0.0 },
        f: surface_bilaplacian_field(sphere, Coordinate(0)),
        mean_shift: 0.0,
    }
}

/// `(1/|Γ|) ∫_Γ ψ` on a sphere, using degree-8 quadrature on an octahedron
/// with `segments` subdivisions per edge, radially projected with the exact
/// area element `r² |N·X| / |X|³`.
pub fn sphere_mean<F: ScalarJet2 + ?Sized>(
    sphere: &Sphere,
    field: &F,
    segments: usize,
) -> Result<f64, GeometryError> {
    let rule = gauss_triangle(8).expect("degree 8 triangle rule exists");
    let mut total = 0.0;
    for octant in 0..8 {
        let sx = if octant & 1 == 0 { 1.0 } else { -1.0 };
        let sy = if octant & 2 == 0 { 1.0 } else { -1.0 };
        let sz = if octant & 4 == 0 { 1.0 } else { -1.0 };
        let a = Vector3::new(sx, 0.0, 0.0);
        let b = Vector3::new(0.0, sy, 0.0);
        let c = Vector3::new(0.0, 0.0, sz);
        total += projected_triangle_integral(sphere, field, [a, b, c], segments, &rule)?;
    }
    Ok(total / sphere.area())
}

fn projected_triangle_integral<F: ScalarJet2 + ?Sized>(
    sphere: &Sphere,
    field: &F,
    [a, b, c]: [Vector3<f64>; 3],
    m: usize,
    rule: &QuadRule<3>,
) -> Result<f64, GeometryError> {
    let center = Vector3::from(sphere.center);
    let r = sphere.radius;
    let node = |i: usize, j: usize| a + (b - a) * (i as f64 / m as f64) + (c - a) * (j as f64 / m as f64);
    let mut sum = 0.0;
    let mut sub = |t: [Vector3<f64>; 3]| -> Result<(), GeometryError> {
        let cross = (t[1] - t[0]).cross(&(t[2] - t[0]));
        let flat_area = 0.5 * cross.norm();
        let unit_n = cross / cross.norm();
        for (lam, w) in rule.iter() {
            let x = t[0] * lam[0] + t[1] * lam[1] + t[2] * lam[2];
            let xn = x.norm();
            let jac = r * r * unit_n.dot(&x).abs() / (xn * xn * xn);
            let y = center + x * (r / xn);
            sum += 2.0 * w * flat_area * jac * field.value(&y)?;
        }
        Ok(())
    };
    for i in 0..m {
        for j in 0..m - i {
            sub([node(i, j), node(i + 1, j), node(i, j + 1)])?;
            if i + j + 1 < m {
                sub([node(i + 1, j), node(i + 1, j + 1), node(i, j + 1)])?;
            }
        }
    }
    Ok(sum)
}
