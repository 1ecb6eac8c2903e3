//! First- and second-order horizontal operators on `G(H)` evaluated from
//! ambient jets.

use crate::error::{QcError, Result};
use crate::field::ScalarField;
use crate::frame::HorizontalFrame;
use crate::jet::Jet2;
use crate::scalar::{dot, Scalar};

/// Horizontal derivative data of a function at a point, all in the
/// left-invariant frame.
#[derive(Clone, Debug, PartialEq)]
pub struct HorizontalJet<S> {
    pub value: S,
    /// `grad[a] = e_a f`.
    pub grad: Vec<S>,
    /// `hess[a][b] = e_a (e_b f)`, the flat `nabla d f (e_a, e_b)`.
    pub hess: Vec<Vec<S>>,
    /// `vert[s] = xi_s f`.
    pub vert: [S; 3],
    /// `mixed[a][s] = e_a (xi_s f)`.
    pub mixed: Vec<[S; 3]>,
}

impl<S: Scalar> HorizontalJet<S> {
    pub fn from_jet(frame: &HorizontalFrame<S>, p: &[S], jet: &Jet2<S>) -> Result<Self> {
        let d = frame.dim();
        if p.len() != d || jet.dim() != d {
            return Err(QcError::DimensionMismatch {
                expected: d,
                found: p.len().max(jet.dim()),
            });
        }
        let m = frame.horizontal_dim();
        let a = frame.coefficients(p);
        let h = jet.hess_matrix();
        let grad: Vec<S> = a.iter().map(|row| dot(row, &jet.grad)).collect();
        // rows of A times the ambient Hessian
        let ah: Vec<Vec<S>> = a
            .iter()
            .map(|row| (0..d).map(|j| (0..d).fold(S::zero(), |acc, i| acc + row[i].clone() * h[i][j].clone())).collect())
            .collect();
        let mut hess = vec![vec![S::zero(); m]; m];
        for x in 0..m {
            for y in 0..m {
                // first-order part: sum_ij A_xi (d_i B_yj) d_j f
                let lin = &frame.fields[y].linear;
                let mut first = S::zero();
                for j in 0..d {
                    let c = (0..d).fold(S::zero(), |acc, i| {
                        if lin[j][i].is_zero() {
                            acc
                        } else {
                            acc + a[x][i].clone() * lin[j][i].clone()
                        }
                    });
                    if !c.is_zero() {
                        first = first + c * jet.grad[j].clone();
                    }
                }
                hess[x][y] = first + dot(&ah[x], &a[y]);
            }
        }
        let vert = [0, 1, 2].map(|s| dot(&frame.reeb[s], &jet.grad));
        let mixed = ah
            .iter()
            .map(|row| [0, 1, 2].map(|s| dot(row, &frame.reeb[s])))
            .collect();
        Ok(Self {
            value: jet.value.clone(),
            grad,
            hess,
            vert,
            mixed,
        })
    }

    pub fn at<F: ScalarField<S> + ?Sized>(frame: &HorizontalFrame<S>, f: &F, p: &[S]) -> Result<Self> {
        Self::from_jet(frame, p, &f.jet(p)?)
    }

    pub fn sublaplacian(&self) -> S {
        (0..self.grad.len()).fold(S::zero(), |acc, a| acc + self.hess[a][a].clone())
    }

    pub fn grad_norm_sq(&self) -> S {
        crate::scalar::norm_sq(&self.grad)
    }

    /// `nabla d f (X, Y)` for frame-component vectors.
    pub fn hess_form(&self, x: &[S], y: &[S]) -> S {
        self.hess
            .iter()
            .zip(x)
            .fold(S::zero(), |acc, (row, xa)| acc + xa.clone() * dot(row, y))
    }
}

pub fn horiz_grad<S: Scalar, F: ScalarField<S> + ?Sized>(
    frame: &HorizontalFrame<S>,
    f: &F,
    p: &[S],
) -> Result<Vec<S>> {
    let mut g = vec![S::zero(); frame.dim()];
    f.value_grad(p, &mut g)?;
    Ok(horiz_from_ambient(frame, p, &g))
}

/// Frame components of the horizontal gradient from an ambient gradient.
pub fn horiz_from_ambient<S: Scalar>(frame: &HorizontalFrame<S>, p: &[S], ambient: &[S]) -> Vec<S> {
    frame.fields.iter().map(|e| dot(&e.at(p), ambient)).collect()
}

pub fn sublaplacian<S: Scalar, F: ScalarField<S> + ?Sized>(
    frame: &HorizontalFrame<S>,
    f: &F,
    p: &[S],
) -> Result<S> {
    Ok(HorizontalJet::at(frame, f, p)?.sublaplacian())
}

pub fn frame_hessian<S: Scalar, F: ScalarField<S> + ?Sized>(
    frame: &HorizontalFrame<S>,
    f: &F,
    p: &[S],
) -> Result<Vec<Vec<S>>> {
    Ok(HorizontalJet::at(frame, f, p)?.hess)
}

pub fn vertical_derivs<S: Scalar, F: ScalarField<S> + ?Sized>(
    frame: &HorizontalFrame<S>,
    f: &F,
    p: &[S],
) -> Result<[S; 3]> {
    let mut g = vec![S::zero(); frame.dim()];
    f.value_grad(p, &mut g)?;
    Ok([0, 1, 2].map(|s| dot(&frame.reeb[s], &g)))
}

/// `sum_a e_a (V(e_a))` for a horizontal 1-form given by its frame components.
pub fn horiz_divergence<S: Scalar, F: ScalarField<S>>(
    frame: &HorizontalFrame<S>,
    components: &[F],
    p: &[S],
) -> Result<S> {
    let m = frame.horizontal_dim();
    if components.len() != m {
        return Err(QcError::DimensionMismatch {
            expected: m,
            found: components.len(),
        });
    }
    let mut g = vec![S::zero(); frame.dim()];
    let mut acc = S::zero();
    for (e, v) in frame.fields.iter().zip(components) {
        v.value_grad(p, &mut g)?;
        acc = acc + dot(&e.at(p), &g);
    }
    Ok(acc)
}

/// Sparse form of the frame for hot loops: `e_a f` from an ambient gradient
/// without allocation.
#[derive(Clone, Debug)]
pub struct HorizontalGradient {
    constant: Vec<Vec<(usize, f64)>>,
    /// `(i, j, c)`: the coefficient of `d_i` picks up `c p_j`.
    linear: Vec<Vec<(usize, usize, f64)>>,
}

impl HorizontalGradient {
    pub fn new(frame: &HorizontalFrame<f64>) -> Self {
        let constant = frame
            .fields
            .iter()
            .map(|e| e.constant.iter().enumerate().filter(|(_, c)| **c != 0.0).map(|(i, c)| (i, *c)).collect())
            .collect();
        let linear = frame
            .fields
            .iter()
            .map(|e| {
                let mut v = Vec::new();
                for (i, row) in e.linear.iter().enumerate() {
                    for (j, c) in row.iter().enumerate() {
                        if *c != 0.0 {
                            v.push((i, j, *c));
                        }
                    }
                }
                v
            })
            .collect();
        Self { constant, linear }
    }

    pub fn component(&self, a: usize, p: &[f64], ambient: &[f64]) -> f64 {
        let mut acc = 0.0;
        for &(i, c) in &self.constant[a] {
            acc += c * ambient[i];
        }
        for &(i, j, c) in &self.linear[a] {
            acc += c * p[j] * ambient[i];
        }
        acc
    }

    /// `|grad_H f|^2` from the ambient gradient at `p`.
    pub fn norm_sq(&self, p: &[f64], ambient: &[f64]) -> f64 {
        (0..self.constant.len())
            .map(|a| {
                let g = self.component(a, p, ambient);
                g * g
            })
            .sum()
    }
}

/// `omega_s(e_a, e_b) = g(I_s e_a, e_b)`.
pub fn fundamental_form<S: Scalar>(frame: &HorizontalFrame<S>, s: usize) -> Vec<Vec<S>> {
    let j = &frame.complex[s];
    let m = j.len();
    (0..m).map(|a| (0..m).map(|b| j[b][a].clone()).collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{fd_oracle, JetFn};
    use crate::frame::{build_frame, build_frame_f64, rational_points};
    use crate::poly::Poly;
    use crate::scalar::Rational;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn q(v: i64) -> Rational {
        Rational::from_i64(v)
    }

    fn q_norm_sq(n: usize) -> Poly<Rational> {
        let d = 4 * n + 3;
        (0..4 * n).fold(Poly::zero(d), |acc, i| acc + Poly::var(i, d) * Poly::var(i, d))
    }

    #[test]
    fn sublaplacian_of_q_norm() {
        for n in 1..=2 {
            let f = build_frame(n).unwrap();
            let h = q_norm_sq(n);
            for p in rational_points(n, 10, 2, 5) {
                assert_eq!(sublaplacian(&f, &h, &p).unwrap(), q(8 * n as i64));
            }
        }
    }

    #[test]
    fn vertical_coordinate_is_harmonic() {
        let f = build_frame(2).unwrap();
        let w1 = Poly::var(8, 11);
        for p in rational_points(2, 10, 2, 6) {
            assert_eq!(sublaplacian(&f, &w1, &p).unwrap(), q(0));
            assert_eq!(vertical_derivs(&f, &w1, &p).unwrap(), [q(2), q(0), q(0)]);
        }
    }

    #[test]
    fn q_norm_has_no_vertical_derivatives() {
        let f = build_frame(1).unwrap();
        for p in rational_points(1, 5, 2, 7) {
            assert_eq!(vertical_derivs(&f, &q_norm_sq(1), &p).unwrap(), [q(0), q(0), q(0)]);
        }
    }

    #[test]
    fn constant_field_has_zero_derivatives() {
        let f = build_frame(1).unwrap();
        let c = Poly::constant(q(3), 7);
        let p = &rational_points(1, 1, 2, 8)[0];
        assert!(horiz_grad(&f, &c, p).unwrap().iter().all(|v| *v == q(0)));
        assert!(frame_hessian(&f, &c, p).unwrap().iter().flatten().all(|v| *v == q(0)));
        assert_eq!(sublaplacian(&f, &c, p).unwrap(), q(0));
    }

    #[test]
    fn coordinate_gradient_at_origin() {
        let f = build_frame(1).unwrap();
        let t1 = Poly::var(0, 7);
        let g = horiz_grad(&f, &t1, &vec![q(0); 7]).unwrap();
        assert_eq!(g, vec![q(1), q(0), q(0), q(0)]);
    }

    #[test]
    fn reeb_derivative_of_shifted_square() {
        // (sigma + |q|^2)^2 + |w + w0|^2 with w0 = (1,0,0), at the origin
        let f = build_frame(1).unwrap();
        let d = 7;
        let a = Poly::constant(q(1), d) + q_norm_sq(1);
        let w = (0..3).fold(Poly::zero(d), |acc, s| {
            let shift = if s == 0 { q(1) } else { q(0) };
            let c = Poly::var(4 + s, d) + Poly::constant(shift, d);
            acc + c.clone() * c
        });
        let h = a.clone() * a + w;
        let v = vertical_derivs(&f, &h, &vec![q(0); 7]).unwrap();
        assert_eq!(v, [q(4), q(0), q(0)]);
    }

    #[test]
    fn commutator_is_vertical() {
        // e_a e_b f - e_b e_a f = -2 sum_s (xi_s f) omega_s(e_a, e_b)
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 1..=2 {
            let f = build_frame(n).unwrap();
            let omegas: Vec<_> = (0..3).map(|s| fundamental_form(&f, s)).collect();
            let d = f.dim();
            for p in rational_points(n, 6, 2, 12 + n as u64) {
                let poly = Poly::<f64>::random(d, 3, 0.05, &mut rng).map_coeffs(|c| Rational::from_f64(*c));
                let hj = HorizontalJet::at(&f, &poly, &p).unwrap();
                for a in 0..4 * n {
                    for b in 0..4 * n {
                        let lhs = hj.hess[a][b].clone() - hj.hess[b][a].clone();
                        let rhs = (0..3).fold(q(0), |acc, s| {
                            acc - q(2) * hj.vert[s].clone() * omegas[s][a][b].clone()
                        });
                        assert_eq!(lhs, rhs);
                    }
                }
            }
        }
    }

    #[test]
    fn vertical_function_hessian_at_origin() {
        let f = build_frame(1).unwrap();
        let h = Poly::var(4, 7) * Poly::var(5, 7) + Poly::var(6, 7);
        let hj = HorizontalJet::at(&f, &h, &vec![q(0); 7]).unwrap();
        for a in 0..4 {
            for b in 0..4 {
                assert_eq!(hj.hess[a][b].clone() + hj.hess[b][a].clone(), q(0));
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences_along_frame() {
        let f = build_frame_f64(1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = JetFn::new(7, |x: &[Jet2<f64>]| {
            let r = x.iter().take(4).fold(Jet2::constant(1.0, 7), |acc, c| &acc + &(c * c));
            let w = x[4..].iter().fold(Jet2::constant(0.0, 7), |acc, c| &acc + &(c * c));
            Ok(&(&r * &r) + &w)
        });
        for _ in 0..20 {
            let p: Vec<f64> = (0..7).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let g = horiz_grad(&f, &h, &p).unwrap();
            let fd = fd_oracle(&h, &p, 1e-3).unwrap();
            let via_fd = horiz_from_ambient(&f, &p, &fd.grad);
            for (x, y) in g.iter().zip(&via_fd) {
                assert!((x - y).abs() < 1e-7 * (1.0 + x.abs()), "{x} {y}");
            }
        }
    }

    #[test]
    fn divergence_of_differential_is_sublaplacian() {
        let f = build_frame(1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let poly = Poly::<f64>::random(7, 3, 0.1, &mut rng).map_coeffs(|c| Rational::from_f64(*c));
        let comps: Vec<Poly<Rational>> = f
            .fields
            .iter()
            .map(|e| poly.apply_affine_field(&e.constant, &e.linear))
            .collect();
        for p in rational_points(1, 5, 2, 22) {
            assert_eq!(
                horiz_divergence(&f, &comps, &p).unwrap(),
                sublaplacian(&f, &poly, &p).unwrap()
            );
        }
        let consts: Vec<Poly<Rational>> = (0..4).map(|a| Poly::constant(q(a), 7)).collect();
        assert_eq!(horiz_divergence(&f, &consts, &vec![q(1); 7]).unwrap(), q(0));
    }

    #[test]
    fn sparse_gradient_matches_dense() {
        let f = build_frame_f64(2).unwrap();
        let fast = HorizontalGradient::new(&f);
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        for _ in 0..20 {
            let p: Vec<f64> = (0..11).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let g: Vec<f64> = (0..11).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let dense = horiz_from_ambient(&f, &p, &g);
            for (a, v) in dense.iter().enumerate() {
                assert!((fast.component(a, &p, &g) - v).abs() < 1e-13);
            }
            assert!((fast.norm_sq(&p, &g) - crate::scalar::norm_sq(&dense)).abs() < 1e-11);
        }
    }

    #[test]
    fn divergence_of_vertical_coordinate_matches_fd() {
        let f = build_frame_f64(1).unwrap();
        let w1 = Poly::<f64>::var(4, 7);
        let comps = vec![w1.clone(); 4];
        let p = [0.3, -1.2, 0.7, 1.9, 0.1, -0.4, 0.8];
        let div = horiz_divergence(&f, &comps, &p).unwrap();
        let fd = fd_oracle(&w1, &p, 1e-3).unwrap();
        let expect: f64 = horiz_from_ambient(&f, &p, &fd.grad).iter().sum();
        assert!((div - expect).abs() < 1e-9);
    }
}
