//! Plain 2x2 tensor and 2-vector arithmetic.
//!
//! Everything downstream (kinematics, stress, assembly) is built on these two
//! value types. They are deliberately dumb: no SIMD, no generics, just the
//! handful of operations the formulation needs, each one auditable at a glance.

use crate::error::{Error, Result};
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

/// Determinants at or below this magnitude are treated as singular.
pub const EPSILON_SINGULAR: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn norm_inf(self) -> f64 {
        self.x.abs().max(self.y.abs())
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, rhs: Vec2) {
        self.x += rhs.x;
        self.y += rhs.y;
    }
}

/// Second-order tensor in two dimensions, row-major components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tensor2 {
    pub a11: f64,
    pub a12: f64,
    pub a21: f64,
    pub a22: f64,
}

impl Tensor2 {
    pub const ZERO: Tensor2 = Tensor2 { a11: 0.0, a12: 0.0, a21: 0.0, a22: 0.0 };
    pub const IDENTITY: Tensor2 = Tensor2 { a11: 1.0, a12: 0.0, a21: 0.0, a22: 1.0 };

    pub fn new(a11: f64, a12: f64, a21: f64, a22: f64) -> Self {
        Tensor2 { a11, a12, a21, a22 }
    }

    pub fn diag(a: f64, b: f64) -> Self {
        Tensor2::new(a, 0.0, 0.0, b)
    }

    /// Dyadic product u (x) v.
    pub fn outer(u: Vec2, v: Vec2) -> Self {
        Tensor2::new(u.x * v.x, u.x * v.y, u.y * v.x, u.y * v.y)
    }

    pub fn det(self) -> f64 {
        self.a11 * self.a22 - self.a12 * self.a21
    }

    pub fn trace(self) -> f64 {
        self.a11 + self.a22
    }

    pub fn transpose(self) -> Tensor2 {
        Tensor2::new(self.a11, self.a21, self.a12, self.a22)
    }

    /// Symmetric part, (A + A^T) / 2.
    pub fn sym(self) -> Tensor2 {
        let off = 0.5 * (self.a12 + self.a21);
        Tensor2::new(self.a11, off, off, self.a22)
    }

    pub fn inverse(self) -> Result<Tensor2> {
        self.inverse_with_eps(EPSILON_SINGULAR)
    }

    pub fn inverse_with_eps(self, eps: f64) -> Result<Tensor2> {
        let d = self.det();
        if d.abs() <= eps {
            return Err(Error::SingularTensor { det: d });
        }
        let inv = 1.0 / d;
        Ok(Tensor2::new(
            self.a22 * inv,
            -self.a12 * inv,
            -self.a21 * inv,
            self.a11 * inv,
        ))
    }

    /// Full contraction A : B = sum_ij A_ij B_ij.
    pub fn frobenius_inner(self, other: Tensor2) -> f64 {
        self.a11 * other.a11 + self.a12 * other.a12 + self.a21 * other.a21 + self.a22 * other.a22
    }

    pub fn frobenius_norm(self) -> f64 {
        self.frobenius_inner(self).sqrt()
    }

    pub fn norm_inf(self) -> f64 {
        self.a11
            .abs()
            .max(self.a12.abs())
            .max(self.a21.abs())
            .max(self.a22.abs())
    }

    /// Row i as a vector (i in {0, 1}).
    pub fn row(self, i: usize) -> Vec2 {
        match i {
            0 => Vec2::new(self.a11, self.a12),
            1 => Vec2::new(self.a21, self.a22),
            _ => panic!("tensor row index out of range: {i}"),
        }
    }

    pub fn is_finite(self) -> bool {
        self.a11.is_finite() && self.a12.is_finite() && self.a21.is_finite() && self.a22.is_finite()
    }
}

impl Add for Tensor2 {
    type Output = Tensor2;
    fn add(self, r: Tensor2) -> Tensor2 {
        Tensor2::new(self.a11 + r.a11, self.a12 + r.a12, self.a21 + r.a21, self.a22 + r.a22)
    }
}

impl Sub for Tensor2 {
    type Output = Tensor2;
    fn sub(self, r: Tensor2) -> Tensor2 {
        Tensor2::new(self.a11 - r.a11, self.a12 - r.a12, self.a21 - r.a21, self.a22 - r.a22)
    }
}

impl Neg for Tensor2 {
    type Output = Tensor2;
    fn neg(self) -> Tensor2 {
        Tensor2::new(-self.a11, -self.a12, -self.a21, -self.a22)
    }
}

impl Mul<f64> for Tensor2 {
    type Output = Tensor2;
    fn mul(self, s: f64) -> Tensor2 {
        Tensor2::new(self.a11 * s, self.a12 * s, self.a21 * s, self.a22 * s)
    }
}

/// Matrix product A B.
impl Mul<Tensor2> for Tensor2 {
    type Output = Tensor2;
    fn mul(self, r: Tensor2) -> Tensor2 {
        Tensor2::new(
            self.a11 * r.a11 + self.a12 * r.a21,
            self.a11 * r.a12 + self.a12 * r.a22,
            self.a21 * r.a11 + self.a22 * r.a21,
            self.a21 * r.a12 + self.a22 * r.a22,
        )
    }
}

/// Matrix-vector product A v.
impl Mul<Vec2> for Tensor2 {
    type Output = Vec2;
    fn mul(self, v: Vec2) -> Vec2 {
        Vec2::new(self.a11 * v.x + self.a12 * v.y, self.a21 * v.x + self.a22 * v.y)
    }
}

impl AddAssign for Tensor2 {
    fn add_assign(&mut self, r: Tensor2) {
        *self = *self + r;
    }
}

impl SubAssign for Tensor2 {
    fn sub_assign(&mut self, r: Tensor2) {
        *self = *self - r;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn det_examples() {
        assert_eq!(Tensor2::IDENTITY.det(), 1.0);
        assert_eq!(Tensor2::diag(1.1, 1.0).det(), 1.1);
        assert_eq!(Tensor2::new(1.0, 2.0, 3.0, 4.0).det(), -2.0);
    }

    #[test]
    fn inverse_examples() {
        assert_eq!(Tensor2::IDENTITY.inverse().unwrap(), Tensor2::IDENTITY);
        assert_eq!(
            Tensor2::diag(2.0, 4.0).inverse().unwrap(),
            Tensor2::diag(0.5, 0.25)
        );
        match Tensor2::ZERO.inverse() {
            Err(Error::SingularTensor { det }) => assert_eq!(det, 0.0),
            other => panic!("expected SingularTensor, got {other:?}"),
        }
    }

    #[test]
    fn frobenius_of_identity_is_two() {
        assert_eq!(Tensor2::IDENTITY.frobenius_inner(Tensor2::IDENTITY), 2.0);
    }

    #[test]
    fn sym_example() {
        let a = Tensor2::new(0.0, 1.0, 0.0, 0.0);
        assert_eq!(a.sym(), Tensor2::new(0.0, 0.5, 0.5, 0.0));
    }

    #[test]
    fn trace_of_diag() {
        assert_eq!(Tensor2::diag(3.0, -1.5).trace(), 1.5);
    }

    #[test]
    fn matmul_and_matvec() {
        let a = Tensor2::new(1.0, 2.0, 3.0, 4.0);
        let b = Tensor2::new(0.0, 1.0, 1.0, 0.0);
        assert_eq!(a * b, Tensor2::new(2.0, 1.0, 4.0, 3.0));
        assert_eq!(a * Vec2::new(1.0, -1.0), Vec2::new(-1.0, -1.0));
    }

    #[test]
    fn outer_product() {
        let t = Tensor2::outer(Vec2::new(1.0, 2.0), Vec2::new(3.0, 4.0));
        assert_eq!(t, Tensor2::new(3.0, 4.0, 6.0, 8.0));
    }

    fn arb_tensor() -> impl Strategy<Value = Tensor2> {
        let c = -1.0..1.0f64;
        (c.clone(), c.clone(), c.clone(), c).prop_map(|(a, b, c, d)| Tensor2::new(a, b, c, d))
    }

    proptest! {
        // inverse(inverse(T)) recovers T for comfortably nonsingular inputs
        #[test]
        fn inverse_roundtrip(t in arb_tensor().prop_filter("nonsingular", |t| t.det().abs() > 1e-2)) {
            let back = t.inverse().unwrap().inverse().unwrap();
            prop_assert!((back - t).norm_inf() <= 1e-10);
        }

        // A : B is symmetric, and sym is self-adjoint under it
        #[test]
        fn frobenius_symmetry_and_sym_adjoint(a in arb_tensor(), b in arb_tensor()) {
            prop_assert!((a.frobenius_inner(b) - b.frobenius_inner(a)).abs() <= 1e-12);
            let lhs = a.frobenius_inner(b.sym());
            let rhs = a.sym().frobenius_inner(b);
            prop_assert!((lhs - rhs).abs() <= 1e-12);
        }

        #[test]
        fn det_is_multiplicative(a in arb_tensor(), b in arb_tensor()) {
            prop_assert!(((a * b).det() - a.det() * b.det()).abs() <= 1e-12);
        }
    }
}
