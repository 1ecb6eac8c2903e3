//! Quaternions, imaginary quaternions and vectors in `H^n`.
//!
//! Basis order is `(1, i, j, k)` with coordinates `(t, x, y, z)`.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::QcError;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quaternion<S> {
    pub t: S,
    pub x: S,
    pub y: S,
    pub z: S,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImQuaternion<S> {
    pub x: S,
    pub y: S,
    pub z: S,
}

/// A point (or tangent vector) of `H^n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HVector<S> {
    pub components: Vec<Quaternion<S>>,
}

impl<S: Scalar> Quaternion<S> {
    pub fn new(t: S, x: S, y: S, z: S) -> Self {
        Self { t, x, y, z }
    }

    pub fn zero() -> Self {
        Self::new(S::zero(), S::zero(), S::zero(), S::zero())
    }

    pub fn one() -> Self {
        Self::new(S::one(), S::zero(), S::zero(), S::zero())
    }

    pub fn i() -> Self {
        Self::new(S::zero(), S::one(), S::zero(), S::zero())
    }

    pub fn j() -> Self {
        Self::new(S::zero(), S::zero(), S::one(), S::zero())
    }

    pub fn k() -> Self {
        Self::new(S::zero(), S::zero(), S::zero(), S::one())
    }

    /// Basis element by index: 0 -> 1, 1 -> i, 2 -> j, 3 -> k.
    pub fn basis(idx: usize) -> Self {
        match idx {
            0 => Self::one(),
            1 => Self::i(),
            2 => Self::j(),
            3 => Self::k(),
            _ => panic!("quaternion basis index {idx} out of range"),
        }
    }

    pub fn from_slice(c: &[S]) -> Self {
        Self::new(c[0].clone(), c[1].clone(), c[2].clone(), c[3].clone())
    }

    pub fn to_array(&self) -> [S; 4] {
        [self.t.clone(), self.x.clone(), self.y.clone(), self.z.clone()]
    }

    pub fn from_im(w: &ImQuaternion<S>) -> Self {
        Self::new(S::zero(), w.x.clone(), w.y.clone(), w.z.clone())
    }

    pub fn conj(&self) -> Self {
        Self::new(self.t.clone(), -self.x.clone(), -self.y.clone(), -self.z.clone())
    }

    pub fn norm_sq(&self) -> S {
        self.t.clone() * self.t.clone()
            + self.x.clone() * self.x.clone()
            + self.y.clone() * self.y.clone()
            + self.z.clone() * self.z.clone()
    }

    pub fn re(&self) -> S {
        self.t.clone()
    }

    pub fn im(&self) -> ImQuaternion<S> {
        ImQuaternion::new(self.x.clone(), self.y.clone(), self.z.clone())
    }

    pub fn scale(&self, c: &S) -> Self {
        Self::new(
            self.t.clone() * c.clone(),
            self.x.clone() * c.clone(),
            self.y.clone() * c.clone(),
            self.z.clone() * c.clone(),
        )
    }
}

/// Hamilton product.
pub fn qmul<S: Scalar>(p: &Quaternion<S>, q: &Quaternion<S>) -> Quaternion<S> {
    let (a1, b1, c1, d1) = (&p.t, &p.x, &p.y, &p.z);
    let (a2, b2, c2, d2) = (&q.t, &q.x, &q.y, &q.z);
    let m = |a: &S, b: &S| a.clone() * b.clone();
    Quaternion::new(
        m(a1, a2) - m(b1, b2) - m(c1, c2) - m(d1, d2),
        m(a1, b2) + m(b1, a2) + m(c1, d2) - m(d1, c2),
        m(a1, c2) - m(b1, d2) + m(c1, a2) + m(d1, b2),
        m(a1, d2) + m(b1, c2) - m(c1, b2) + m(d1, a2),
    )
}

impl<S: Scalar> Mul for &Quaternion<S> {
    type Output = Quaternion<S>;
    fn mul(self, rhs: Self) -> Quaternion<S> {
        qmul(self, rhs)
    }
}

impl<S: Scalar> Mul for Quaternion<S> {
    type Output = Quaternion<S>;
    fn mul(self, rhs: Self) -> Quaternion<S> {
        qmul(&self, &rhs)
    }
}

impl<S: Scalar> Add for Quaternion<S> {
    type Output = Quaternion<S>;
    fn add(self, r: Self) -> Self {
        Self::new(self.t + r.t, self.x + r.x, self.y + r.y, self.z + r.z)
    }
}

impl<S: Scalar> Sub for Quaternion<S> {
    type Output = Quaternion<S>;
    fn sub(self, r: Self) -> Self {
        Self::new(self.t - r.t, self.x - r.x, self.y - r.y, self.z - r.z)
    }
}

impl<S: Scalar> Neg for Quaternion<S> {
    type Output = Quaternion<S>;
    fn neg(self) -> Self {
        Self::new(-self.t, -self.x, -self.y, -self.z)
    }
}

impl<S: Scalar> ImQuaternion<S> {
    pub fn new(x: S, y: S, z: S) -> Self {
        Self { x, y, z }
    }

    pub fn zero() -> Self {
        Self::new(S::zero(), S::zero(), S::zero())
    }

    pub fn from_slice(c: &[S]) -> Self {
        Self::new(c[0].clone(), c[1].clone(), c[2].clone())
    }

    pub fn to_array(&self) -> [S; 3] {
        [self.x.clone(), self.y.clone(), self.z.clone()]
    }

    pub fn norm_sq(&self) -> S {
        self.x.clone() * self.x.clone()
            + self.y.clone() * self.y.clone()
            + self.z.clone() * self.z.clone()
    }

    pub fn scale(&self, c: &S) -> Self {
        Self::new(
            self.x.clone() * c.clone(),
            self.y.clone() * c.clone(),
            self.z.clone() * c.clone(),
        )
    }

    pub fn component(&self, s: usize) -> &S {
        match s {
            0 => &self.x,
            1 => &self.y,
            2 => &self.z,
            _ => panic!("imaginary component {s} out of range"),
        }
    }
}

impl<S: Scalar> Add for ImQuaternion<S> {
    type Output = Self;
    fn add(self, r: Self) -> Self {
        Self::new(self.x + r.x, self.y + r.y, self.z + r.z)
    }
}

impl<S: Scalar> Sub for ImQuaternion<S> {
    type Output = Self;
    fn sub(self, r: Self) -> Self {
        Self::new(self.x - r.x, self.y - r.y, self.z - r.z)
    }
}

impl<S: Scalar> Neg for ImQuaternion<S> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y, -self.z)
    }
}

impl<S: Scalar> HVector<S> {
    pub fn new(components: Vec<Quaternion<S>>) -> Self {
        Self { components }
    }

    pub fn zeros(n: usize) -> Self {
        Self::new(vec![Quaternion::zero(); n])
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// Flat real coordinates `(t^1, x^1, y^1, z^1, t^2, ...)`.
    pub fn to_coords(&self) -> Vec<S> {
        self.components.iter().flat_map(|q| q.to_array()).collect()
    }

    pub fn from_coords(c: &[S]) -> Self {
        assert_eq!(c.len() % 4, 0, "coordinate count must be a multiple of 4");
        Self::new(c.chunks(4).map(Quaternion::from_slice).collect())
    }

    pub fn norm_sq(&self) -> S {
        self.components
            .iter()
            .fold(S::zero(), |acc, q| acc + q.norm_sq())
    }

    pub fn scale(&self, c: &S) -> Self {
        Self::new(self.components.iter().map(|q| q.scale(c)).collect())
    }

    pub fn add(&self, other: &Self) -> Result<Self, QcError> {
        check_len(self.len(), other.len())?;
        Ok(Self::new(
            self.components
                .iter()
                .zip(&other.components)
                .map(|(a, b)| a.clone() + b.clone())
                .collect(),
        ))
    }

    pub fn neg(&self) -> Self {
        Self::new(self.components.iter().map(|q| -q.clone()).collect())
    }

    /// Hermitian product `sum_a p_a * conj(q_a)`.
    pub fn hermitian(&self, other: &Self) -> Result<Quaternion<S>, QcError> {
        check_len(self.len(), other.len())?;
        Ok(self
            .components
            .iter()
            .zip(&other.components)
            .fold(Quaternion::zero(), |acc, (p, q)| acc + qmul(p, &q.conj())))
    }
}

fn check_len(a: usize, b: usize) -> Result<(), QcError> {
    if a != b {
        return Err(QcError::DimensionMismatch {
            expected: a,
            found: b,
        });
    }
    Ok(())
}

/// `Im(sum_a p_a * conj(q_a))`.
pub fn im_product<S: Scalar>(p: &HVector<S>, q: &HVector<S>) -> Result<ImQuaternion<S>, QcError> {
    Ok(p.hermitian(q)?.im())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rational;
    use proptest::prelude::*;

    type Q = Quaternion<f64>;

    fn qf(t: f64, x: f64, y: f64, z: f64) -> Q {
        Q::new(t, x, y, z)
    }

    #[test]
    fn unit_relations() {
        assert_eq!(Q::i() * Q::j(), Q::k());
        assert_eq!(Q::j() * Q::k(), Q::i());
        assert_eq!(Q::k() * Q::i(), Q::j());
        for u in [Q::i(), Q::j(), Q::k()] {
            assert_eq!(&u * &u, -Q::one());
        }
    }

    #[test]
    fn identity_and_expansion() {
        let q = qf(0.3, -1.0, 2.0, 0.5);
        assert_eq!(&Q::one() * &q, q);
        // (1+i)(1+j) = 1 + j + i + ij = 1 + i + j + k
        let p = qf(1.0, 1.0, 0.0, 0.0) * qf(1.0, 0.0, 1.0, 0.0);
        assert_eq!(p, qf(1.0, 1.0, 1.0, 1.0));
    }

    #[test]
    fn im_product_examples() {
        let q = HVector::new(vec![qf(0.4, 1.0, -2.0, 3.0)]);
        assert_eq!(im_product(&q, &q).unwrap(), ImQuaternion::zero());
        let p = HVector::new(vec![Q::i()]);
        let r = HVector::new(vec![Q::j()]);
        assert_eq!(
            im_product(&p, &r).unwrap(),
            ImQuaternion::new(0.0, 0.0, -1.0)
        );
        let z = HVector::zeros(1);
        assert_eq!(im_product(&z, &r).unwrap(), ImQuaternion::zero());
    }

    #[test]
    fn im_product_length_mismatch() {
        let p = HVector::<f64>::zeros(1);
        let q = HVector::<f64>::zeros(2);
        assert!(matches!(
            im_product(&p, &q),
            Err(QcError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn im_is_half_difference_with_conjugate() {
        let q = Quaternion::<Rational>::new(
            Rational::from_i64(3),
            Rational::from_ratio(1, 2),
            Rational::from_i64(-7),
            Rational::from_ratio(5, 3),
        );
        let d = (q.clone() - q.conj()).scale(&Rational::half());
        assert_eq!(d.im(), q.im());
        assert_eq!(d.t, Rational::from_i64(0));
    }

    #[test]
    fn conj_involution_exact() {
        let q = Quaternion::<Rational>::new(
            Rational::from_ratio(-2, 7),
            Rational::from_i64(1),
            Rational::from_ratio(3, 11),
            Rational::from_i64(0),
        );
        assert_eq!(q.conj().conj(), q);
    }

    #[test]
    fn random_pairs_associative_and_multiplicative_norm() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut r = || {
            qf(
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-3.0..3.0),
            )
        };
        for _ in 0..10_000 {
            let (a, b, c) = (r(), r(), r());
            let l = (&a * &b) * c.clone();
            let rr = &a * &(&b * &c);
            let scale = l.norm_sq().sqrt().max(1.0);
            assert!((l - rr).norm_sq().sqrt() <= 1e-12 * scale);
            let nab = (&a * &b).norm_sq().sqrt();
            let prod = a.norm_sq().sqrt() * b.norm_sq().sqrt();
            assert!((nab - prod).abs() <= 1e-12 * prod.max(1e-300));
        }
    }

    fn arb_q() -> impl Strategy<Value = Q> {
        (-5.0..5.0f64, -5.0..5.0f64, -5.0..5.0f64, -5.0..5.0f64)
            .prop_map(|(t, x, y, z)| qf(t, x, y, z))
    }

    proptest! {
        #[test]
        fn conj_reverses_products(p in arb_q(), q in arb_q()) {
            let lhs = (&p * &q).conj();
            let rhs = &q.conj() * &p.conj();
            prop_assert!((lhs - rhs).norm_sq().sqrt() <= 1e-12 * (1.0 + p.norm_sq() * q.norm_sq()));
        }

        #[test]
        fn hermitian_self_product_is_nonnegative_real(a in arb_q(), b in arb_q()) {
            let v = HVector::new(vec![a, b]);
            let h = v.hermitian(&v).unwrap();
            prop_assert!(h.t >= 0.0);
            prop_assert!(h.im().norm_sq().sqrt() <= 1e-12 * (1.0 + h.t));
        }
    }
}
