//! Sparse multivariate polynomials.
//!
//! Used as polynomial scalar fields, and as the symbolic-differentiation
//! reference that jet arithmetic is checked against.

use std::collections::BTreeMap;
use std::ops::{Add, Mul, Neg, Sub};

use rand::Rng;

use crate::jet::Jet2;
use crate::scalar::Scalar;

type Monomial = Vec<u32>;

#[derive(Clone, Debug, PartialEq)]
pub struct Poly<S> {
    nvars: usize,
    terms: BTreeMap<Monomial, S>,
}

impl<S: Scalar> Poly<S> {
    pub fn zero(nvars: usize) -> Self {
        Self {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(c: S, nvars: usize) -> Self {
        let mut p = Self::zero(nvars);
        p.add_term(vec![0; nvars], c);
        p
    }

    pub fn var(i: usize, nvars: usize) -> Self {
        let mut m = vec![0; nvars];
        m[i] = 1;
        let mut p = Self::zero(nvars);
        p.add_term(m, S::one());
        p
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn degree(&self) -> u32 {
        self.terms
            .keys()
            .map(|m| m.iter().sum::<u32>())
            .max()
            .unwrap_or(0)
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn add_term(&mut self, mono: Monomial, c: S) {
        assert_eq!(mono.len(), self.nvars);
        if c.is_zero() {
            return;
        }
        let entry = self.terms.entry(mono).or_insert_with(S::zero);
        *entry = entry.clone() + c;
        if entry.is_zero() {
            self.terms.retain(|_, v| !v.is_zero());
        }
    }

    pub fn scale(&self, c: &S) -> Self {
        let mut out = Self::zero(self.nvars);
        for (m, v) in &self.terms {
            out.add_term(m.clone(), v.clone() * c.clone());
        }
        out
    }

    pub fn derivative(&self, i: usize) -> Self {
        let mut out = Self::zero(self.nvars);
        for (m, v) in &self.terms {
            if m[i] == 0 {
                continue;
            }
            let mut m2 = m.clone();
            m2[i] -= 1;
            out.add_term(m2, v.clone() * S::from_i64(m[i] as i64));
        }
        out
    }

    pub fn eval(&self, p: &[S]) -> S {
        assert_eq!(p.len(), self.nvars);
        self.terms.iter().fold(S::zero(), |acc, (m, c)| {
            let mut t = c.clone();
            for (x, &e) in p.iter().zip(m) {
                for _ in 0..e {
                    t = t * x.clone();
                }
            }
            acc + t
        })
    }

    /// Value, gradient and Hessian by symbolic differentiation.
    pub fn symbolic_jet(&self, p: &[S]) -> Jet2<S> {
        let d = self.nvars;
        let firsts: Vec<Poly<S>> = (0..d).map(|i| self.derivative(i)).collect();
        let grad = firsts.iter().map(|f| f.eval(p)).collect();
        let hess: Vec<Vec<S>> = (0..d)
            .map(|i| (0..d).map(|j| firsts[i].derivative(j).eval(p)).collect())
            .collect();
        Jet2::from_parts(self.eval(p), grad, &hess)
    }

    /// Jet by Horner-free jet arithmetic on the coordinate jets.
    pub fn jet(&self, p: &[S]) -> Jet2<S> {
        let coords = Jet2::coordinates(p);
        let d = self.nvars;
        // cache powers per variable
        let max_e: Vec<u32> = (0..d)
            .map(|i| self.terms.keys().map(|m| m[i]).max().unwrap_or(0))
            .collect();
        let powers: Vec<Vec<Jet2<S>>> = (0..d)
            .map(|i| {
                let mut v = vec![Jet2::constant(S::one(), d)];
                for k in 0..max_e[i] as usize {
                    let next = &v[k] * &coords[i];
                    v.push(next);
                }
                v
            })
            .collect();
        let mut acc = Jet2::constant(S::zero(), d);
        for (m, c) in &self.terms {
            let mut t = Jet2::constant(c.clone(), d);
            for (i, &e) in m.iter().enumerate() {
                if e > 0 {
                    t = &t * &powers[i][e as usize];
                }
            }
            acc = &acc + &t;
        }
        acc
    }

    /// Applies the first-order operator `sum_i c_i(x) d/dx_i` with affine
    /// coefficients `c_i(x) = constant[i] + sum_j linear[i][j] x_j`.
    pub fn apply_affine_field(&self, constant: &[S], linear: &[Vec<S>]) -> Self {
        let d = self.nvars;
        let mut out = Self::zero(d);
        for i in 0..d {
            let di = self.derivative(i);
            if di.terms.is_empty() {
                continue;
            }
            let mut coeff = Self::constant(constant[i].clone(), d);
            for j in 0..d {
                if !linear[i][j].is_zero() {
                    coeff = coeff + Self::var(j, d).scale(&linear[i][j]);
                }
            }
            out = out + coeff * di;
        }
        out
    }

    /// Substitutes `x_i -> sum_j map[i][j] y_j + offset[i]`.
    pub fn compose_affine(&self, map: &[Vec<S>], offset: &[S]) -> Self {
        let d = self.nvars;
        let images: Vec<Poly<S>> = (0..d)
            .map(|i| {
                let mut p = Self::constant(offset[i].clone(), d);
                for j in 0..d {
                    if !map[i][j].is_zero() {
                        p = p + Self::var(j, d).scale(&map[i][j]);
                    }
                }
                p
            })
            .collect();
        let mut acc = Self::zero(d);
        for (m, c) in &self.terms {
            let mut t = Self::constant(c.clone(), d);
            for (i, &e) in m.iter().enumerate() {
                for _ in 0..e {
                    t = t * images[i].clone();
                }
            }
            acc = acc + t;
        }
        acc
    }

    /// Converts coefficients to another scalar type.
    pub fn map_coeffs<T: Scalar>(&self, f: impl Fn(&S) -> T) -> Poly<T> {
        let mut out = Poly::zero(self.nvars);
        for (m, c) in &self.terms {
            out.add_term(m.clone(), f(c));
        }
        out
    }

    /// Random polynomial of total degree at most `degree` with every monomial
    /// present; coefficients are rationals `k/den` with `|k| <= 5 * den`.
    pub fn random<R: Rng>(nvars: usize, degree: u32, density: f64, rng: &mut R) -> Self {
        let mut out = Self::zero(nvars);
        for mono in monomials_up_to(nvars, degree) {
            if rng.gen::<f64>() > density {
                continue;
            }
            let den = rng.gen_range(1..=6i64);
            let num = rng.gen_range(-5 * den..=5 * den);
            out.add_term(mono, S::from_ratio(num, den));
        }
        out
    }
}

/// All exponent vectors of total degree `<= degree`.
pub fn monomials_up_to(nvars: usize, degree: u32) -> Vec<Monomial> {
    let mut out = Vec::new();
    let mut cur = vec![0u32; nvars];
    fn rec(i: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if i == cur.len() {
            out.push(cur.clone());
            return;
        }
        for e in 0..=left {
            cur[i] = e;
            rec(i + 1, left - e, cur, out);
        }
        cur[i] = 0;
    }
    rec(0, degree, &mut cur, &mut out);
    out
}

impl<S: Scalar> Add for Poly<S> {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        assert_eq!(self.nvars, rhs.nvars);
        for (m, c) in rhs.terms {
            self.add_term(m, c);
        }
        self
    }
}

impl<S: Scalar> Neg for Poly<S> {
    type Output = Self;
    fn neg(self) -> Self {
        self.scale(&-S::one())
    }
}

impl<S: Scalar> Sub for Poly<S> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

impl<S: Scalar> Mul for Poly<S> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        assert_eq!(self.nvars, rhs.nvars);
        let mut out = Self::zero(self.nvars);
        for (ma, ca) in &self.terms {
            for (mb, cb) in &rhs.terms {
                let m: Monomial = ma.iter().zip(mb).map(|(a, b)| a + b).collect();
                out.add_term(m, ca.clone() * cb.clone());
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rational;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn derivative_of_monomial() {
        // p = 3 x^2 y
        let x = Poly::<Rational>::var(0, 2);
        let y = Poly::<Rational>::var(1, 2);
        let p = (x.clone() * x * y).scale(&Rational::from_i64(3));
        let dx = p.derivative(0);
        let pt = [Rational::from_i64(2), Rational::from_ratio(1, 3)];
        assert_eq!(dx.eval(&pt), Rational::from_i64(4));
        assert_eq!(p.degree(), 3);
    }

    #[test]
    fn jets_match_symbolic_exactly_on_rationals() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let p = Poly::<Rational>::random(4, 4, 0.3, &mut rng);
            let pt: Vec<Rational> = (0..4)
                .map(|_| Rational::from_ratio(rng.gen_range(-9..=9), rng.gen_range(1..=4)))
                .collect();
            assert_eq!(p.jet(&pt), p.symbolic_jet(&pt));
        }
    }

    #[test]
    fn jets_match_symbolic_in_f64() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..100 {
            let p = Poly::<f64>::random(7, 4, 0.1, &mut rng);
            let pt: Vec<f64> = (0..7).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let (a, b) = (p.jet(&pt), p.symbolic_jet(&pt));
            let scale = 1.0 + a.value.abs();
            assert!((a.value - b.value).abs() <= 1e-12 * scale);
            for i in 0..7 {
                assert!((a.grad[i] - b.grad[i]).abs() <= 1e-12 * scale.max(b.grad[i].abs()));
                for j in 0..7 {
                    let (u, v) = (a.hess(i, j), b.hess(i, j));
                    assert!((u - v).abs() <= 1e-12 * (1.0 + v.abs()).max(scale));
                }
            }
        }
    }

    #[test]
    fn affine_field_application() {
        // (d/dx + 2y d/dz)(x z) = z + 2xy
        let d = 3;
        let p = Poly::<Rational>::var(0, d) * Poly::var(2, d);
        let c = vec![Rational::from_i64(1), Rational::from_i64(0), Rational::from_i64(0)];
        let mut lin = vec![vec![Rational::from_i64(0); d]; d];
        lin[2][1] = Rational::from_i64(2);
        let q = p.apply_affine_field(&c, &lin);
        let expect = Poly::var(2, d) + (Poly::var(0, d) * Poly::var(1, d)).scale(&Rational::from_i64(2));
        assert_eq!(q, expect);
    }

    #[test]
    fn monomial_count() {
        // C(7 + 3, 3) = 120 monomials of degree <= 3 in 7 variables
        assert_eq!(monomials_up_to(7, 3).len(), 120);
    }
}
