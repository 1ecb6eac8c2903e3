//! Scalar fields on `R^d`: anything that can report its order-2 jet at a point.

use smallvec::SmallVec;
use std::sync::Arc;

use crate::error::Result;
use crate::jet::Jet2;
use crate::poly::Poly;
use crate::scalar::{Real, Scalar};

pub trait ScalarField<S: Scalar>: Send + Sync {
    fn dim(&self) -> usize;

    fn jet(&self, p: &[S]) -> Result<Jet2<S>>;

    fn value(&self, p: &[S]) -> Result<S> {
        Ok(self.jet(p)?.value)
    }

    /// Value and ambient gradient. Fields on hot quadrature paths override
    /// this to skip the Hessian.
    fn value_grad(&self, p: &[S], grad: &mut [S]) -> Result<S> {
        let j = self.jet(p)?;
        grad.clone_from_slice(&j.grad);
        Ok(j.value)
    }
}

impl<S: Scalar, F: ScalarField<S> + ?Sized> ScalarField<S> for Arc<F> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn jet(&self, p: &[S]) -> Result<Jet2<S>> {
        (**self).jet(p)
    }
    fn value(&self, p: &[S]) -> Result<S> {
        (**self).value(p)
    }
    fn value_grad(&self, p: &[S], grad: &mut [S]) -> Result<S> {
        (**self).value_grad(p, grad)
    }
}

impl<S: Scalar, F: ScalarField<S> + ?Sized> ScalarField<S> for &F {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn jet(&self, p: &[S]) -> Result<Jet2<S>> {
        (**self).jet(p)
    }
    fn value(&self, p: &[S]) -> Result<S> {
        (**self).value(p)
    }
    fn value_grad(&self, p: &[S], grad: &mut [S]) -> Result<S> {
        (**self).value_grad(p, grad)
    }
}

impl<S: Scalar> ScalarField<S> for Poly<S> {
    fn dim(&self) -> usize {
        self.nvars()
    }
    fn jet(&self, p: &[S]) -> Result<Jet2<S>> {
        Ok(Poly::jet(self, p))
    }
    fn value(&self, p: &[S]) -> Result<S> {
        Ok(self.eval(p))
    }
}

/// A field given by a closure over the coordinate jets.
pub struct JetFn<S, F> {
    dim: usize,
    f: F,
    _s: std::marker::PhantomData<fn() -> S>,
}

impl<S, F> JetFn<S, F>
where
    S: Scalar,
    F: Fn(&[Jet2<S>]) -> Result<Jet2<S>> + Send + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        Self {
            dim,
            f,
            _s: std::marker::PhantomData,
        }
    }
}

impl<S, F> ScalarField<S> for JetFn<S, F>
where
    S: Scalar,
    F: Fn(&[Jet2<S>]) -> Result<Jet2<S>> + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }
    fn jet(&self, p: &[S]) -> Result<Jet2<S>> {
        (self.f)(&Jet2::coordinates(p))
    }
}

/// `x -> scale * inner(M x + b)`.
pub struct AffinePullback<S, F> {
    pub inner: F,
    pub matrix: Vec<Vec<S>>,
    pub offset: Vec<S>,
    pub scale: S,
}

impl<S: Scalar, F: ScalarField<S>> AffinePullback<S, F> {
    fn image(&self, p: &[S]) -> SmallVec<[S; 16]> {
        self.matrix
            .iter()
            .zip(&self.offset)
            .map(|(row, b)| {
                row.iter()
                    .zip(p)
                    .fold(b.clone(), |acc, (m, x)| acc + m.clone() * x.clone())
            })
            .collect()
    }
}

impl<S: Scalar, F: ScalarField<S>> ScalarField<S> for AffinePullback<S, F> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn jet(&self, p: &[S]) -> Result<Jet2<S>> {
        let inner = self.inner.jet(&self.image(p))?;
        let d = p.len();
        let m = &self.matrix;
        let grad: Vec<S> = (0..d)
            .map(|j| {
                (0..d).fold(S::zero(), |acc, i| {
                    acc + m[i][j].clone() * inner.grad[i].clone()
                })
            })
            .collect();
        // H' = M^T H M
        let h = inner.hess_matrix();
        let hm: Vec<Vec<S>> = (0..d)
            .map(|i| {
                (0..d)
                    .map(|l| {
                        (0..d).fold(S::zero(), |acc, k| acc + h[i][k].clone() * m[k][l].clone())
                    })
                    .collect()
            })
            .collect();
        let hess: Vec<Vec<S>> = (0..d)
            .map(|j| {
                (0..d)
                    .map(|l| {
                        (0..d).fold(S::zero(), |acc, i| acc + m[i][j].clone() * hm[i][l].clone())
                    })
                    .collect()
            })
            .collect();
        Ok(Jet2::from_parts(inner.value, grad, &hess).scale(&self.scale))
    }

    fn value(&self, p: &[S]) -> Result<S> {
        Ok(self.inner.value(&self.image(p))? * self.scale.clone())
    }

    fn value_grad(&self, p: &[S], grad: &mut [S]) -> Result<S> {
        let d = p.len();
        let mut inner_grad: SmallVec<[S; 16]> = smallvec::smallvec![S::zero(); d];
        let v = self.inner.value_grad(&self.image(p), &mut inner_grad)?;
        for (j, g) in grad.iter_mut().enumerate() {
            *g = (0..d).fold(S::zero(), |acc, i| {
                acc + self.matrix[i][j].clone() * inner_grad[i].clone()
            }) * self.scale.clone();
        }
        Ok(v * self.scale.clone())
    }
}

/// `a + coeff * b`.
pub struct Perturbed<S, A, B> {
    pub base: A,
    pub bump: B,
    pub coeff: S,
}

impl<S: Scalar, A: ScalarField<S>, B: ScalarField<S>> ScalarField<S> for Perturbed<S, A, B> {
    fn dim(&self) -> usize {
        self.base.dim()
    }
    fn jet(&self, p: &[S]) -> Result<Jet2<S>> {
        Ok(&self.base.jet(p)? + &self.bump.jet(p)?.scale(&self.coeff))
    }
    fn value(&self, p: &[S]) -> Result<S> {
        Ok(self.base.value(p)? + self.bump.value(p)? * self.coeff.clone())
    }
    fn value_grad(&self, p: &[S], grad: &mut [S]) -> Result<S> {
        let mut g2 = vec![S::zero(); p.len()];
        let a = self.base.value_grad(p, grad)?;
        let b = self.bump.value_grad(p, &mut g2)?;
        for (g, h) in grad.iter_mut().zip(g2) {
            *g = g.clone() + h * self.coeff.clone();
        }
        Ok(a + b * self.coeff.clone())
    }
}

/// Central-difference estimate of the jet of `f` at `p`, with one Richardson
/// step (steps `h` and `h/2`), so the truncation error is `O(h^4)` for
/// smooth fields.
pub fn fd_oracle<S: Real, F: ScalarField<S> + ?Sized>(f: &F, p: &[S], step: S) -> Result<Jet2<S>> {
    assert!(step > S::zero(), "finite-difference step must be positive");
    let d = p.len();
    let eval = |shifts: &[(usize, S)]| -> Result<S> {
        let mut x = p.to_vec();
        for (i, s) in shifts {
            x[*i] = x[*i] + *s;
        }
        f.value(&x)
    };
    let f0 = f.value(p)?;
    let two = S::two();
    let four = S::from_i64(4);
    let three = S::from_i64(3);
    let rich = |coarse: S, fine: S| (four * fine - coarse) / three;

    let first = |i: usize, h: S| -> Result<S> { Ok((eval(&[(i, h)])? - eval(&[(i, -h)])?) / (two * h)) };
    let second = |i: usize, j: usize, h: S| -> Result<S> {
        if i == j {
            Ok((eval(&[(i, h)])? - two * f0 + eval(&[(i, -h)])?) / (h * h))
        } else {
            Ok((eval(&[(i, h), (j, h)])? - eval(&[(i, h), (j, -h)])? - eval(&[(i, -h), (j, h)])?
                + eval(&[(i, -h), (j, -h)])?)
                / (four * h * h))
        }
    };
    let half = step / two;
    let mut grad = vec![S::zero(); d];
    let mut hess = vec![vec![S::zero(); d]; d];
    for i in 0..d {
        grad[i] = rich(first(i, step)?, first(i, half)?);
        for j in i..d {
            let v = rich(second(i, j, step)?, second(i, j, half)?);
            hess[i][j] = v;
            hess[j][i] = v;
        }
    }
    Ok(Jet2::from_parts(f0, grad, &hess))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fd_on_square() {
        let f = JetFn::new(1, |x: &[Jet2<f64>]| Ok(&x[0] * &x[0]));
        let j = fd_oracle(&f, &[0.0], 1e-2).unwrap();
        assert!((j.hess(0, 0) - 2.0).abs() < 1e-8);
    }

    #[test]
    fn fd_matches_symbolic_on_cubic() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let p = Poly::<f64>::random(7, 3, 0.5, &mut rng);
            let pt: Vec<f64> = (0..7).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let fd = fd_oracle(&p, &pt, 1e-2).unwrap();
            let ex = p.symbolic_jet(&pt);
            for i in 0..7 {
                assert!((fd.grad[i] - ex.grad[i]).abs() < 1e-7);
                for j in 0..7 {
                    assert!((fd.hess(i, j) - ex.hess(i, j)).abs() < 1e-7);
                }
            }
        }
    }

    #[test]
    fn affine_pullback_chain_rule() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = Poly::<f64>::random(3, 3, 0.6, &mut rng);
        let m = vec![
            vec![1.0, 2.0, 0.0],
            vec![0.0, -1.0, 0.5],
            vec![0.3, 0.0, 1.0],
        ];
        let b = vec![0.1, -0.2, 0.7];
        let pb = AffinePullback {
            inner: p.clone(),
            matrix: m.clone(),
            offset: b.clone(),
            scale: 2.0,
        };
        let composed = p.compose_affine(&m, &b).scale(&2.0);
        let x = [0.4, -0.9, 1.3];
        let (a, e) = (pb.jet(&x).unwrap(), composed.symbolic_jet(&x));
        assert!((a.value - e.value).abs() < 1e-12);
        for i in 0..3 {
            assert!((a.grad[i] - e.grad[i]).abs() < 1e-11);
            for j in 0..3 {
                assert!((a.hess(i, j) - e.hess(i, j)).abs() < 1e-10);
            }
        }
        let mut g = [0.0; 3];
        let v = pb.value_grad(&x, &mut g).unwrap();
        assert!((v - e.value).abs() < 1e-12);
        for i in 0..3 {
            assert!((g[i] - e.grad[i]).abs() < 1e-11);
        }
    }
}
