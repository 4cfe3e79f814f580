//! Gauss rules on the unit segment and the reference triangle, and polygon
//! integration by fan triangulation.
//!
//! Points are stored in barycentric coordinates, so a rule on `[0, 1]` is a
//! `QuadRule<2>` and a rule on the reference triangle is a `QuadRule<3>`.
//! Weights sum to the reference measure (1 and ½ respectively).

use nalgebra::Vector3;

use crate::error::QuadratureError;

#[derive(Clone, Debug, PartialEq)]
pub struct QuadRule<const D: usize> {
    pub points: Vec<[f64; D]>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl<const D: usize> QuadRule<D> {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64; D], f64)> + '_ {
        self.points.iter().zip(self.weights.iter().copied())
    }
}

/// `n`-point Gauss-Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        // Tricomi's initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((0.5 * (1.0 - x), 0.5 * w));
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss-Legendre rule on `[0, 1]` exact to `degree`, with
/// `⌈(degree + 1) / 2⌉` points.
pub fn gauss_segment(degree: usize) -> Result<QuadRule<2>, QuadratureError> {
    if degree > 11 {
        return Err(QuadratureError::UnsupportedSegmentDegree(degree));
    }
    let n = (degree + 2) / 2;
    let (points, weights) = gauss_legendre(n).into_iter().map(|(t, w)| ([1.0 - t, t], w)).unzip();
    Ok(QuadRule { points, weights, degree })
}

enum Orbit {
    Centroid(f64),
    /// `(a, a, 1 - 2a)` and permutations.
    Two(f64, f64),
    /// `(a, b, 1 - a - b)` and permutations.
    Three(f64, f64, f64),
}

/// Symmetric triangle rules. Orbit weights are normalised to sum to 1.
fn triangle_orbits(degree: usize) -> Option<Vec<Orbit>> {
    use Orbit::*;
    let orbits = match degree {
        1 => vec![Centroid(1.0)],
        2 => vec![Two(1.0 / 6.0, 1.0 / 3.0)],
        4 => vec![
            Two(0.445_948_490_915_964_886, 0.223_381_589_678_011_466),
            Two(0.091_576_213_509_770_743, 0.109_951_743_655_321_868),
        ],
        6 => vec![
            Two(0.249_286_745_170_910_421, 0.116_786_275_726_379_366),
            Two(0.063_089_014_491_502_228, 0.050_844_906_370_206_817),
            Three(0.310_352_451_033_784_405, 0.053_145_049_844_816_947, 0.082_851_075_618_373_575),
        ],
        8 => vec![
            Centroid(0.144_315_607_677_787_168),
            Two(0.459_292_588_292_723_156, 0.095_091_634_267_284_625),
            Two(0.170_569_307_751_760_207, 0.103_217_370_534_718_250),
            Two(0.050_547_228_317_030_975, 0.032_458_497_623_198_080),
            Three(0.263_112_829_634_638_113, 0.008_394_777_409_957_605, 0.027_230_314_174_434_994),
        ],
        _ => return None,
    };
    Some(orbits)
}

/// Symmetric Gauss rule on the reference triangle (area ½).
pub fn gauss_triangle(degree: usize) -> Result<QuadRule<3>, QuadratureError> {
    let orbits = triangle_orbits(degree).ok_or(QuadratureError::UnsupportedTriangleDegree(degree))?;
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for orbit in orbits {
        match orbit {
            Orbit::Centroid(w) => {
                points.push([1.0 / 3.0; 3]);
                weights.push(0.5 * w);
            }
            Orbit::Two(a, w) => {
                let b = 1.0 - 2.0 * a;
                for p in [[a, a, b], [a, b, a], [b, a, a]] {
                    points.push(p);
                    weights.push(0.5 * w);
                }
            }
            Orbit::Three(a, b, w) => {
                let c = 1.0 - a - b;
                for p in [[a, b, c], [a, c, b], [b, a, c], [b, c, a], [c, a, b], [c, b, a]] {
                    points.push(p);
                    weights.push(0.5 * w);
                }
            }
        }
    }
    Ok(QuadRule { points, weights, degree })
}

/// Physical quadrature points and weights on a planar polygon, fan
/// triangulated from vertex `start`. Zero-area triangles contribute nothing.
pub fn polygon_points_from(
    vertices: &[Vector3<f64>],
    rule: &QuadRule<3>,
    start: usize,
) -> Vec<(Vector3<f64>, f64)> {
    let n = vertices.len();
    let mut out = Vec::with_capacity(rule.len() * n.saturating_sub(2));
    let v0 = vertices[start % n];
    for k in 1..n.saturating_sub(1) {
        let v1 = vertices[(start + k) % n];
        let v2 = vertices[(start + k + 1) % n];
        let area = 0.5 * (v1 - v0).cross(&(v2 - v0)).norm();
        if area == 0.0 {
            continue;
        }
        for (lam, w) in rule.iter() {
            out.push((v0 * lam[0] + v1 * lam[1] + v2 * lam[2], 2.0 * area * w));
        }
    }
    out
}

pub fn polygon_points(vertices: &[Vector3<f64>], rule: &QuadRule<3>) -> Vec<(Vector3<f64>, f64)> {
    polygon_points_from(vertices, rule, 0)
}

/// `∫_K g` over a planar polygon with 3 or 4 vertices.
pub fn integrate_polygon<G: FnMut(&Vector3<f64>) -> f64>(
    vertices: &[Vector3<f64>],
    mut integrand: G,
    rule: &QuadRule<3>,
) -> f64 {
    polygon_points(vertices, rule).iter().map(|(x, w)| w * integrand(x)).sum()
}

/// Physical quadrature points and weights on a segment.
pub fn segment_points(a: &Vector3<f64>, b: &Vector3<f64>, rule: &QuadRule<2>) -> Vec<(Vector3<f64>, f64)> {
    let len = (b - a).norm();
    rule.iter().map(|(lam, w)| (a * lam[0] + b * lam[1], w * len)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn factorial(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    /// `∫_T λ₀^a λ₁^b λ₂^c dA = 2|T| a! b! c! / (a + b + c + 2)!`.
    fn simplex_monomial(a: u32, b: u32, c: u32) -> f64 {
        2.0 * 0.5 * factorial(a) * factorial(b) * factorial(c) / factorial(a + b + c + 2)
    }

    #[test]
    fn segment_examples() {
        let r = gauss_segment(3).unwrap();
        assert_eq!(r.len(), 2);
        let cubic: f64 = r.iter().map(|(p, w)| w * p[1].powi(3)).sum();
        assert!((cubic - 0.25).abs() < 1e-15);
        let one: f64 = r.weights.iter().sum();
        assert!((one - 1.0).abs() < 1e-15);
        let r5 = gauss_segment(5).unwrap();
        let six: f64 = r5.iter().map(|(p, w)| w * p[1].powi(6)).sum();
        assert!((six - 1.0 / 7.0).abs() > 1e-6);
        assert!(matches!(gauss_segment(12), Err(QuadratureError::UnsupportedSegmentDegree(12))));
    }

    #[test]
    fn segment_exactness_all_degrees() {
        for degree in 0..=11 {
            let r = gauss_segment(degree).unwrap();
            assert!(r.weights.iter().all(|&w| w > 0.0));
            for k in 0..=degree as i32 {
                let q: f64 = r.iter().map(|(p, w)| w * p[1].powi(k)).sum();
                assert!((q - 1.0 / (k as f64 + 1.0)).abs() < 1e-14, "deg {degree} k {k}");
            }
        }
    }

    #[test]
    fn triangle_examples() {
        let r = gauss_triangle(4).unwrap();
        let q: f64 = r.iter().map(|(l, w)| w * l[1].powi(2) * l[2].powi(2)).sum();
        assert!((q - 1.0 / 180.0).abs() < 1e-15);
        assert!((simplex_monomial(0, 2, 2) - 1.0 / 180.0).abs() < 1e-16);
        for d in [1, 2, 4, 6, 8] {
            let r = gauss_triangle(d).unwrap();
            assert!(r.weights.iter().all(|&w| w > 0.0));
            assert!((r.weights.iter().sum::<f64>() - 0.5).abs() < 1e-15);
        }
        assert!(gauss_triangle(3).is_err());
    }

    #[test]
    fn triangle_exactness_all_monomials() {
        for d in [1, 2, 4, 6, 8] {
            let r = gauss_triangle(d).unwrap();
            for a in 0..=d as u32 {
                for b in 0..=(d as u32 - a) {
                    let c = d as u32 - a - b;
                    for (a, b, c) in [(a, b, c), (a, b, 0), (a, 0, 0)] {
                        let q: f64 = r
                            .iter()
                            .map(|(l, w)| w * l[0].powi(a as i32) * l[1].powi(b as i32) * l[2].powi(c as i32))
                            .sum();
                        let exact = simplex_monomial(a, b, c);
                        assert!((q - exact).abs() < 1e-14 * exact.max(1e-3), "deg {d} ({a},{b},{c})");
                    }
                }
            }
        }
    }

    #[test]
    fn polygon_area_and_linear_exactness() {
        let tri = [Vector3::new(0.5, 0.0, 0.0), Vector3::new(0.0, 0.5, 0.0), Vector3::new(0.0, 0.0, 0.5)];
        let rule = gauss_triangle(2).unwrap();
        let area = integrate_polygon(&tri, |_| 1.0, &rule);
        assert!((area - 3f64.sqrt() / 8.0).abs() < 1e-15);
        let centroid = (tri[0] + tri[1] + tri[2]) / 3.0;
        let lin = |x: &Vector3<f64>| 1.0 + 2.0 * x.x - x.y + 0.5 * x.z;
        let q = integrate_polygon(&tri, lin, &rule);
        assert!((q - area * lin(&centroid)).abs() < 1e-15);
        let degenerate = [Vector3::zeros(), Vector3::new(1.0, 0.0, 0.0), Vector3::new(2.0, 0.0, 0.0)];
        assert_eq!(integrate_polygon(&degenerate, |_| 1.0, &rule), 0.0);
    }

    fn random_quad(seed: [f64; 8]) -> Vec<Vector3<f64>> {
        // A convex planar quadrilateral in a tilted plane.
        let e1 = Vector3::new(1.0, seed[6], 0.3).normalize();
        let e2 = e1.cross(&Vector3::new(seed[7], 0.2, 1.0)).normalize();
        let o = Vector3::new(seed[0], seed[1], seed[2]);
        let r = [0.5 + seed[3].abs(), 0.5 + seed[4].abs(), 0.5 + seed[5].abs(), 0.7];
        (0..4)
            .map(|k| {
                let t = std::f64::consts::FRAC_PI_2 * k as f64 + 0.2 * seed[k];
                o + e1 * (r[k] * t.cos()) + e2 * (r[k] * t.sin())
            })
            .collect()
    }

    proptest! {
        #[test]
        fn fan_from_either_vertex_agrees(seed in proptest::array::uniform8(-1.0f64..1.0)) {
            let quad = random_quad(seed);
            let rule = gauss_triangle(6).unwrap();
            let g = |x: &Vector3<f64>| (x.x * x.y - x.z).powi(3) + x.x.powi(2);
            let a: f64 = polygon_points_from(&quad, &rule, 0).iter().map(|(x, w)| w * g(x)).sum();
            let b: f64 = polygon_points_from(&quad, &rule, 1).iter().map(|(x, w)| w * g(x)).sum();
            prop_assert!((a - b).abs() < 1e-13 * (1.0 + a.abs()));
        }

        #[test]
        fn polygon_rule_is_exact_for_polynomials(
            seed in proptest::array::uniform8(-1.0f64..1.0),
            coef in proptest::array::uniform4(-2.0f64..2.0),
        ) {
            // Reference: the same polynomial on the fan split from vertex 1,
            // integrated with a rule of much higher degree per subtriangle.
            let quad = random_quad(seed);
            let g = |x: &Vector3<f64>| coef[0] * x.x.powi(4) * x.y.powi(2)
                + coef[1] * x.y * x.z.powi(5) + coef[2] * x.x * x.y * x.z + coef[3];
            let q: f64 = polygon_points(&quad, &gauss_triangle(6).unwrap()).iter().map(|(x, w)| w * g(x)).sum();
            let r: f64 = polygon_points_from(&quad, &gauss_triangle(8).unwrap(), 1).iter().map(|(x, w)| w * g(x)).sum();
            prop_assert!((q - r).abs() < 1e-12 * (1.0 + r.abs()));
        }
    }
}
