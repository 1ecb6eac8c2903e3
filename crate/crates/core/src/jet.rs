//! Second-order jets: value, gradient and symmetric Hessian of a scalar
//! function of `d` real variables at one point.
//!
//! The Hessian is stored as a packed upper triangle, so symmetry holds by
//! construction.

use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{QcError, Result};
use crate::scalar::{Real, Scalar};

#[derive(Clone, Debug, PartialEq)]
pub struct Jet2<S> {
    dim: usize,
    pub value: S,
    pub grad: Vec<S>,
    hess: Vec<S>,
}

#[inline]
fn packed_index(d: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * (2 * d - i + 1) / 2 + (j - i)
}

impl<S: Scalar> Jet2<S> {
    pub fn constant(value: S, dim: usize) -> Self {
        Self {
            dim,
            value,
            grad: vec![S::zero(); dim],
            hess: vec![S::zero(); dim * (dim + 1) / 2],
        }
    }

    /// The coordinate function `x_i` evaluated at `x_i = value`.
    pub fn variable(i: usize, value: S, dim: usize) -> Self {
        let mut j = Self::constant(value, dim);
        j.grad[i] = S::one();
        j
    }

    /// All `dim` coordinate jets at point `p`.
    pub fn coordinates(p: &[S]) -> Vec<Self> {
        let d = p.len();
        p.iter()
            .enumerate()
            .map(|(i, v)| Self::variable(i, v.clone(), d))
            .collect()
    }

    /// Builds a jet from a full Hessian matrix; only the upper triangle is read.
    pub fn from_parts(value: S, grad: Vec<S>, hess: &[Vec<S>]) -> Self {
        let dim = grad.len();
        let mut out = Self::constant(value, dim);
        out.grad = grad;
        for i in 0..dim {
            for j in i..dim {
                out.hess[packed_index(dim, i, j)] = hess[i][j].clone();
            }
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn hess(&self, i: usize, j: usize) -> &S {
        &self.hess[packed_index(self.dim, i, j)]
    }

    pub fn hess_matrix(&self) -> Vec<Vec<S>> {
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.hess(i, j).clone()).collect())
            .collect()
    }

    fn check_dim(&self, other: &Self) {
        assert_eq!(self.dim, other.dim, "jet dimension mismatch");
    }

    pub fn scale(&self, c: &S) -> Self {
        Self {
            dim: self.dim,
            value: self.value.clone() * c.clone(),
            grad: self.grad.iter().map(|g| g.clone() * c.clone()).collect(),
            hess: self.hess.iter().map(|h| h.clone() * c.clone()).collect(),
        }
    }

    pub fn add_scalar(&self, c: &S) -> Self {
        let mut out = self.clone();
        out.value = out.value + c.clone();
        out
    }

    /// Applies a univariate function given its value and first two derivatives
    /// at `self.value`.
    pub fn compose(&self, f: S, df: S, d2f: S) -> Self {
        let d = self.dim;
        let mut hess = Vec::with_capacity(self.hess.len());
        for i in 0..d {
            for j in i..d {
                hess.push(
                    df.clone() * self.hess[packed_index(d, i, j)].clone()
                        + d2f.clone() * self.grad[i].clone() * self.grad[j].clone(),
                );
            }
        }
        Self {
            dim: d,
            value: f,
            grad: self.grad.iter().map(|g| df.clone() * g.clone()).collect(),
            hess,
        }
    }

    pub fn recip(&self) -> Result<Self> {
        if self.value.is_zero() {
            return Err(QcError::Domain {
                op: "recip",
                value: self.value.as_f64(),
            });
        }
        let inv = S::one() / self.value.clone();
        let inv2 = inv.clone() * inv.clone();
        let inv3 = inv2.clone() * inv.clone();
        Ok(self.compose(inv, -inv2, S::two() * inv3))
    }

    pub fn div(&self, other: &Self) -> Result<Self> {
        Ok(self * &other.recip()?)
    }

    /// Integer power, valid for any base.
    pub fn powi(&self, k: u32) -> Self {
        let mut out = Self::constant(S::one(), self.dim);
        for _ in 0..k {
            out = &out * self;
        }
        out
    }

    pub fn zeros_like(&self) -> Self {
        Self::constant(S::zero(), self.dim)
    }
}

impl<S: Real> Jet2<S> {
    /// `self^p` for a real exponent; the base must be strictly positive.
    pub fn pow_real(&self, p: S) -> Result<Self> {
        if !(self.value > S::zero()) {
            return Err(QcError::Domain {
                op: "pow_real",
                value: self.value.as_f64(),
            });
        }
        let x = self.value;
        let f = x.powf(p);
        let df = p * f / x;
        let d2f = p * (p - S::one()) * f / (x * x);
        Ok(self.compose(f, df, d2f))
    }

    pub fn ln(&self) -> Result<Self> {
        if !(self.value > S::zero()) {
            return Err(QcError::Domain {
                op: "log",
                value: self.value.as_f64(),
            });
        }
        let x = self.value;
        Ok(self.compose(x.ln(), S::one() / x, -S::one() / (x * x)))
    }
}

impl<S: Scalar> Add for &Jet2<S> {
    type Output = Jet2<S>;
    fn add(self, rhs: Self) -> Jet2<S> {
        self.check_dim(rhs);
        Jet2 {
            dim: self.dim,
            value: self.value.clone() + rhs.value.clone(),
            grad: self
                .grad
                .iter()
                .zip(&rhs.grad)
                .map(|(a, b)| a.clone() + b.clone())
                .collect(),
            hess: self
                .hess
                .iter()
                .zip(&rhs.hess)
                .map(|(a, b)| a.clone() + b.clone())
                .collect(),
        }
    }
}

impl<S: Scalar> Sub for &Jet2<S> {
    type Output = Jet2<S>;
    fn sub(self, rhs: Self) -> Jet2<S> {
        self + &(-rhs)
    }
}

impl<S: Scalar> Neg for &Jet2<S> {
    type Output = Jet2<S>;
    fn neg(self) -> Jet2<S> {
        self.scale(&-S::one())
    }
}

impl<S: Scalar> Mul for &Jet2<S> {
    type Output = Jet2<S>;
    fn mul(self, rhs: Self) -> Jet2<S> {
        self.check_dim(rhs);
        let d = self.dim;
        let (a, b) = (&self.value, &rhs.value);
        let grad = (0..d)
            .map(|i| a.clone() * rhs.grad[i].clone() + b.clone() * self.grad[i].clone())
            .collect();
        let mut hess = Vec::with_capacity(self.hess.len());
        for i in 0..d {
            for j in i..d {
                let k = packed_index(d, i, j);
                hess.push(
                    a.clone() * rhs.hess[k].clone()
                        + b.clone() * self.hess[k].clone()
                        + self.grad[i].clone() * rhs.grad[j].clone()
                        + rhs.grad[i].clone() * self.grad[j].clone(),
                );
            }
        }
        Jet2 {
            dim: d,
            value: a.clone() * b.clone(),
            grad,
            hess,
        }
    }
}

macro_rules! owned_binop {
    ($tr:ident, $m:ident) => {
        impl<S: Scalar> $tr for Jet2<S> {
            type Output = Jet2<S>;
            fn $m(self, rhs: Self) -> Jet2<S> {
                (&self).$m(&rhs)
            }
        }
    };
}
owned_binop!(Add, add);
owned_binop!(Sub, sub);
owned_binop!(Mul, mul);

impl<S: Scalar> Neg for Jet2<S> {
    type Output = Jet2<S>;
    fn neg(self) -> Jet2<S> {
        -&self
    }
}

/// Arithmetic operations exposed through [`jet_arith`].
#[derive(Clone, Debug, PartialEq)]
pub enum JetOp<S> {
    Add,
    Sub,
    Mul,
    Div,
    /// `a^p`; `b` is ignored.
    PowReal(S),
    /// `ln a`; `b` is ignored.
    Log,
}

pub fn jet_arith<S: Real>(a: &Jet2<S>, b: &Jet2<S>, op: JetOp<S>) -> Result<Jet2<S>> {
    match op {
        JetOp::Add => Ok(a + b),
        JetOp::Sub => Ok(a - b),
        JetOp::Mul => Ok(a * b),
        JetOp::Div => a.div(b),
        JetOp::PowReal(p) => a.pow_real(p),
        JetOp::Log => a.ln(),
    }
}
