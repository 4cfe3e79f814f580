//! Second-order forward-mode jets over three variables.
//!
//! A [`Jet2<T>`] carries a value, a gradient and a (symmetric) Hessian. The
//! coefficient type is itself a [`Scalar`], so jets nest: `Jet2<Jet2<f64>>`
//! yields derivatives up to fourth order, which is what the manufactured
//! right-hand side of the biharmonic problem needs.

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

use nalgebra::{Matrix3, Vector3};

/// Arithmetic required of anything a smooth field can be evaluated on.
pub trait Scalar:
    Copy
    + Debug
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
{
    fn from_f64(c: f64) -> Self;

    /// The plain real part, stripped of all derivative information.
    fn real(&self) -> f64;

    fn exp(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn sqrt(self) -> Self;
    fn recip(self) -> Self;

    fn square(self) -> Self {
        self * self
    }
}

impl Scalar for f64 {
    #[inline]
    fn from_f64(c: f64) -> Self {
        c
    }
    #[inline]
    fn real(&self) -> f64 {
        *self
    }
    #[inline]
    fn exp(self) -> Self {
        f64::exp(self)
    }
    #[inline]
    fn sin(self) -> Self {
        f64::sin(self)
    }
    #[inline]
    fn cos(self) -> Self {
        f64::cos(self)
    }
    #[inline]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    #[inline]
    fn recip(self) -> Self {
        f64::recip(self)
    }
}

/// Packed index of the symmetric Hessian entry `(i, j)`.
#[inline]
const fn sym(i: usize, j: usize) -> usize {
    const MAP: [[usize; 3]; 3] = [[0, 1, 2], [1, 3, 4], [2, 4, 5]];
    MAP[i][j]
}

/// Truncated second-order Taylor expansion in three variables.
///
/// The Hessian is stored packed as `[h00, h01, h02, h11, h12, h22]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet2<T> {
    pub v: T,
    pub g: [T; 3],
    pub h: [T; 6],
}

impl<T: Scalar> Jet2<T> {
    pub fn constant(v: T) -> Self {
        let z = T::from_f64(0.0);
        Jet2 { v, g: [z; 3], h: [z; 6] }
    }

    /// Independent variables seeded at `base`: `x_k` has gradient `e_k`.
    pub fn variables(base: [T; 3]) -> [Self; 3] {
        let one = T::from_f64(1.0);
        let mut out = base.map(Self::constant);
        for (k, var) in out.iter_mut().enumerate() {
            var.g[k] = one;
        }
        out
    }

    #[inline]
    pub fn hess(&self, i: usize, j: usize) -> T {
        self.h[sym(i, j)]
    }

    /// Trace of the Hessian.
    #[inline]
    pub fn laplacian(&self) -> T {
        self.h[0] + self.h[3] + self.h[5]
    }

    /// Composition with a scalar function given its value and first two
    /// derivatives at `self.v`.
    #[inline]
    fn chain(&self, f0: T, f1: T, f2: T) -> Self {
        let g = self.g.map(|gi| f1 * gi);
        let mut h = self.h.map(|hij| f1 * hij);
        for i in 0..3 {
            for j in i..3 {
                h[sym(i, j)] += f2 * self.g[i] * self.g[j];
            }
        }
        Jet2 { v: f0, g, h }
    }
}

impl Jet2<f64> {
    pub fn value(&self) -> f64 {
        self.v
    }

    pub fn gradient(&self) -> Vector3<f64> {
        Vector3::from(self.g)
    }

    pub fn hessian(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|i, j| self.hess(i, j))
    }
}

impl<T: Scalar> Add for Jet2<T> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Jet2 {
            v: self.v + o.v,
            g: std::array::from_fn(|i| self.g[i] + o.g[i]),
            h: std::array::from_fn(|i| self.h[i] + o.h[i]),
        }
    }
}

impl<T: Scalar> Sub for Jet2<T> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Jet2 {
            v: self.v - o.v,
            g: std::array::from_fn(|i| self.g[i] - o.g[i]),
            h: std::array::from_fn(|i| self.h[i] - o.h[i]),
        }
    }
}

impl<T: Scalar> Neg for Jet2<T> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Jet2 { v: -self.v, g: self.g.map(|x| -x), h: self.h.map(|x| -x) }
    }
}

impl<T: Scalar> AddAssign for Jet2<T> {
    #[inline]
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<T: Scalar> Mul for Jet2<T> {
    type Output = Self;
    #[inline]
    fn mul(self, o: Self) -> Self {
        let g = std::array::from_fn(|i| self.v * o.g[i] + self.g[i] * o.v);
        let mut h = [self.v; 6];
        for i in 0..3 {
            for j in i..3 {
                let k = sym(i, j);
                h[k] = self.v * o.h[k] + self.h[k] * o.v + self.g[i] * o.g[j] + self.g[j] * o.g[i];
            }
        }
        Jet2 { v: self.v * o.v, g, h }
    }
}

impl<T: Scalar> Div for Jet2<T> {
    type Output = Self;
    #[inline]
    fn div(self, o: Self) -> Self {
        self * o.recip()
    }
}

impl<T: Scalar> Add<f64> for Jet2<T> {
    type Output = Self;
    #[inline]
    fn add(mut self, c: f64) -> Self {
        self.v = self.v + c;
        self
    }
}

impl<T: Scalar> Sub<f64> for Jet2<T> {
    type Output = Self;
    #[inline]
    fn sub(mut self, c: f64) -> Self {
        self.v = self.v - c;
        self
    }
}

impl<T: Scalar> Mul<f64> for Jet2<T> {
    type Output = Self;
    #[inline]
    fn mul(self, c: f64) -> Self {
        Jet2 { v: self.v * c, g: self.g.map(|x| x * c), h: self.h.map(|x| x * c) }
    }
}

impl<T: Scalar> Scalar for Jet2<T> {
    fn from_f64(c: f64) -> Self {
        Self::constant(T::from_f64(c))
    }

    fn real(&self) -> f64 {
        self.v.real()
    }

    fn exp(self) -> Self {
        let e = self.v.exp();
        self.chain(e, e, e)
    }

    fn sin(self) -> Self {
        let (s, c) = (self.v.sin(), self.v.cos());
        self.chain(s, c, -s)
    }

    fn cos(self) -> Self {
        let (s, c) = (self.v.sin(), self.v.cos());
        self.chain(c, -s, -c)
    }

    fn sqrt(self) -> Self {
        let r = self.v.sqrt();
        let d1 = r.recip() * 0.5;
        let d2 = -(d1 / self.v) * 0.5;
        self.chain(r, d1, d2)
    }

    fn recip(self) -> Self {
        let r = self.v.recip();
        let r2 = r * r;
        self.chain(r, -r2, r2 * r * 2.0)
    }

    fn square(self) -> Self {
        self * self
    }
}
