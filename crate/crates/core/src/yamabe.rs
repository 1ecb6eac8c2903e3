//! The explicit extremal family on `G(H)`, the qc Yamabe residual, and the
//! conformal change of scalar curvature and torsion.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{QcError, Result};
use crate::field::ScalarField;
use crate::frame::HorizontalFrame;
use crate::group::{ambient_dim, homogeneous_dim, GroupPoint};
use crate::jet::Jet2;
use crate::ops::HorizontalJet;
use crate::poly::Poly;
use crate::quat::Quaternion;
use crate::scalar::{Real, Scalar};
use crate::tensors::{casimir_parts, Sym2H};

#[derive(Clone, Debug, PartialEq)]
pub struct ExtremalParams<S> {
    pub n: usize,
    pub c0: S,
    pub sigma: S,
    pub base: GroupPoint<S>,
}

impl<S: Scalar> ExtremalParams<S> {
    pub fn new(c0: S, sigma: S, base: GroupPoint<S>) -> Result<Self> {
        if c0 <= S::zero() || sigma <= S::zero() {
            return Err(QcError::InvalidParameter(format!(
                "c0 and sigma must be positive, got {} and {}",
                c0.as_f64(),
                sigma.as_f64()
            )));
        }
        Ok(Self {
            n: base.n(),
            c0,
            sigma,
            base,
        })
    }

    pub fn centered(n: usize, c0: S, sigma: S) -> Result<Self> {
        Self::new(c0, sigma, GroupPoint::identity(n))
    }

    pub fn constants(&self) -> YamabeConstants {
        YamabeConstants::new(self.n, self.c0.as_f64(), self.sigma.as_f64())
    }

    pub fn map<T: Scalar>(&self, f: impl Fn(&S) -> T) -> ExtremalParams<T> {
        let c = self.base.to_coords();
        let mapped: Vec<T> = c.iter().map(&f).collect();
        ExtremalParams {
            n: self.n,
            c0: f(&self.c0),
            sigma: f(&self.sigma),
            base: GroupPoint::from_coords(&mapped).expect("same dimension"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct YamabeConstants {
    pub q_dim: usize,
    pub two_star: f64,
    pub s_theta: f64,
}

impl YamabeConstants {
    pub fn new(n: usize, c0: f64, sigma: f64) -> Self {
        let q = homogeneous_dim(n);
        Self {
            q_dim: q,
            two_star: 2.0 * q as f64 / (q as f64 - 2.0),
            s_theta: 128.0 * (n * (n + 2)) as f64 * c0 * sigma,
        }
    }

    /// Exponent `-(Q-2)/4` of `2h` in the conformal factor.
    pub fn phi_exponent(&self) -> f64 {
        -(self.q_dim as f64 - 2.0) / 4.0
    }

    /// `4(Q+2)/(Q-2)`.
    pub fn laplacian_coeff(&self) -> f64 {
        let q = self.q_dim as f64;
        4.0 * (q + 2.0) / (q - 2.0)
    }
}

/// `h(q, w) = c0 [(sigma + |q + q0|^2)^2 + |w + w0 + 2 Im q0 conj(q)|^2]`.
#[derive(Clone, Debug)]
pub struct ExtremalH<S> {
    pub params: ExtremalParams<S>,
    q0: Vec<S>,
    w0: [S; 3],
    /// `twist[s][i]`: coefficient of `q_i` in `2 Im(q0 conj(q))_s`.
    twist: [Vec<S>; 3],
}

pub fn h_explicit<S: Scalar>(params: &ExtremalParams<S>) -> ExtremalH<S> {
    let n = params.n;
    let mut twist = [vec![S::zero(); 4 * n], vec![S::zero(); 4 * n], vec![S::zero(); 4 * n]];
    for a in 0..n {
        for u in 0..4 {
            let im = (&params.base.q.components[a] * &Quaternion::<S>::basis(u).conj()).im();
            for (s, row) in twist.iter_mut().enumerate() {
                row[4 * a + u] = S::two() * im.component(s).clone();
            }
        }
    }
    let w = params.base.w.to_array();
    ExtremalH {
        q0: params.base.q.to_coords(),
        w0: w,
        twist,
        params: params.clone(),
    }
}

impl<S: Scalar> ExtremalH<S> {
    fn parts(&self, p: &[S]) -> (S, [S; 3]) {
        let n4 = 4 * self.params.n;
        let a = (0..n4).fold(self.params.sigma.clone(), |acc, i| {
            let x = p[i].clone() + self.q0[i].clone();
            acc + x.clone() * x
        });
        let b = [0, 1, 2].map(|s| {
            crate::scalar::dot(&self.twist[s], &p[..n4]) + p[n4 + s].clone() + self.w0[s].clone()
        });
        (a, b)
    }

    /// The same function as an explicit polynomial.
    pub fn to_poly(&self) -> Poly<S> {
        let n4 = 4 * self.params.n;
        let d = n4 + 3;
        let mut a = Poly::constant(self.params.sigma.clone(), d);
        for i in 0..n4 {
            let x = Poly::var(i, d) + Poly::constant(self.q0[i].clone(), d);
            a = a + x.clone() * x;
        }
        let mut acc = a.clone() * a;
        for s in 0..3 {
            let mut b = Poly::var(n4 + s, d) + Poly::constant(self.w0[s].clone(), d);
            for i in 0..n4 {
                if !self.twist[s][i].is_zero() {
                    b = b + Poly::var(i, d).scale(&self.twist[s][i]);
                }
            }
            acc = acc + b.clone() * b;
        }
        acc.scale(&self.params.c0)
    }
}

impl<S: Scalar> ScalarField<S> for ExtremalH<S> {
    fn dim(&self) -> usize {
        ambient_dim(self.params.n)
    }

    fn jet(&self, p: &[S]) -> Result<Jet2<S>> {
        let d = self.dim();
        let n4 = 4 * self.params.n;
        let (a, b) = self.parts(p);
        let mut ga = vec![S::zero(); d];
        let mut ha = vec![vec![S::zero(); d]; d];
        for i in 0..n4 {
            ga[i] = S::two() * (p[i].clone() + self.q0[i].clone());
            ha[i][i] = S::two();
        }
        let aj = Jet2::from_parts(a, ga, &ha);
        let zero = vec![vec![S::zero(); d]; d];
        let mut acc = &aj * &aj;
        for s in 0..3 {
            let mut g = vec![S::zero(); d];
            g[..n4].clone_from_slice(&self.twist[s]);
            g[n4 + s] = S::one();
            let bj = Jet2::from_parts(b[s].clone(), g, &zero);
            acc = &acc + &(&bj * &bj);
        }
        Ok(acc.scale(&self.params.c0))
    }

    fn value(&self, p: &[S]) -> Result<S> {
        let (a, b) = self.parts(p);
        let w = b.iter().fold(S::zero(), |acc, x| acc + x.clone() * x.clone());
        Ok(self.params.c0.clone() * (a.clone() * a + w))
    }

    fn value_grad(&self, p: &[S], grad: &mut [S]) -> Result<S> {
        let n4 = 4 * self.params.n;
        let (a, b) = self.parts(p);
        let c0 = self.params.c0.clone();
        let two = S::two();
        for i in 0..n4 {
            let mut g = two.clone() * a.clone() * two.clone() * (p[i].clone() + self.q0[i].clone());
            for s in 0..3 {
                g = g + two.clone() * b[s].clone() * self.twist[s][i].clone();
            }
            grad[i] = c0.clone() * g;
        }
        for s in 0..3 {
            grad[n4 + s] = c0.clone() * two.clone() * b[s].clone();
        }
        let w = b.iter().fold(S::zero(), |acc, x| acc + x.clone() * x.clone());
        Ok(c0 * (a.clone() * a + w))
    }
}

/// `Phi = (2h)^{-(Q-2)/4}`.
#[derive(Clone, Debug)]
pub struct Phi<F> {
    pub h: F,
    pub exponent: f64,
}

pub fn phi_from_h<F>(h: F, q_dim: usize) -> Phi<F> {
    Phi {
        h,
        exponent: -(q_dim as f64 - 2.0) / 4.0,
    }
}

impl<S: Real, F: ScalarField<S>> ScalarField<S> for Phi<F> {
    fn dim(&self) -> usize {
        self.h.dim()
    }

    fn jet(&self, p: &[S]) -> Result<Jet2<S>> {
        self.h.jet(p)?.scale(&S::two()).pow_real(S::from_f64(self.exponent))
    }

    fn value(&self, p: &[S]) -> Result<S> {
        let h = self.h.value(p)?;
        if h <= S::zero() {
            return Err(QcError::Domain {
                op: "conformal factor",
                value: h.as_f64(),
            });
        }
        Ok((S::two() * h).powf(S::from_f64(self.exponent)))
    }

    fn value_grad(&self, p: &[S], grad: &mut [S]) -> Result<S> {
        let h = self.h.value_grad(p, grad)?;
        if h <= S::zero() {
            return Err(QcError::Domain {
                op: "conformal factor",
                value: h.as_f64(),
            });
        }
        let e = S::from_f64(self.exponent);
        let v = if self.exponent.fract() == 0.0 {
            (S::two() * h).powi(self.exponent as i32)
        } else {
            (S::two() * h).powf(e)
        };
        // d/dh (2h)^e = e (2h)^e / h
        let k = e * v / h;
        for g in grad.iter_mut() {
            *g = *g * k;
        }
        Ok(v)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualTerms {
    /// `4(Q+2)/(Q-2) Delta Phi`.
    pub linear: f64,
    /// `S Phi^{2*-1}`.
    pub nonlinear: f64,
    pub residual: f64,
}

impl ResidualTerms {
    /// `|r|` relative to the larger of the two term magnitudes.
    pub fn relative(&self) -> f64 {
        let scale = self.linear.abs().max(self.nonlinear.abs()).max(1e-300);
        self.residual.abs() / scale
    }
}

/// `4(Q+2)/(Q-2) Delta Phi + S Phi^{2*-1}` at `p`.
pub fn yamabe_residual<F: ScalarField<f64> + ?Sized>(
    frame: &HorizontalFrame<f64>,
    phi: &F,
    s: f64,
    p: &[f64],
) -> Result<ResidualTerms> {
    let c = YamabeConstants::new(frame.n, 1.0, 1.0);
    let hj = HorizontalJet::at(frame, phi, p)?;
    if hj.value <= 0.0 {
        return Err(QcError::Domain {
            op: "yamabe residual",
            value: hj.value,
        });
    }
    let linear = c.laplacian_coeff() * hj.sublaplacian();
    let nonlinear = s * hj.value.powf(c.two_star - 1.0);
    Ok(ResidualTerms {
        linear,
        nonlinear,
        residual: linear + nonlinear,
    })
}

fn positive_jet<S: Scalar, F: ScalarField<S> + ?Sized>(
    frame: &HorizontalFrame<S>,
    h: &F,
    p: &[S],
    op: &'static str,
) -> Result<HorizontalJet<S>> {
    let hj = HorizontalJet::at(frame, h, p)?;
    if hj.value <= S::zero() {
        return Err(QcError::Domain {
            op,
            value: hj.value.as_f64(),
        });
    }
    Ok(hj)
}

/// Scalar curvature of `(2h)^{-1} Theta` given that of `Theta`.
pub fn conformal_scal<S: Scalar, F: ScalarField<S> + ?Sized>(
    frame: &HorizontalFrame<S>,
    h: &F,
    base_scal: S,
    p: &[S],
) -> Result<S> {
    let hj = positive_jet(frame, h, p, "conformal scalar curvature")?;
    let k = S::from_i64(frame.n as i64 + 2);
    let eight = S::from_i64(8);
    Ok(S::two() * hj.value.clone() * base_scal - eight.clone() * k.clone() * k.clone() * hj.grad_norm_sq() / hj.value.clone()
        + eight * k * hj.sublaplacian())
}

fn scaled<S: Scalar>(m: Vec<Vec<S>>, k: &S) -> Vec<Vec<S>> {
    m.into_iter()
        .map(|r| r.into_iter().map(|x| k.clone() * x).collect())
        .collect()
}

/// Torsion `(T0, U)` of `(2h)^{-1} Theta` on the flat group.
pub fn conformal_torsion<S: Scalar, F: ScalarField<S> + ?Sized>(
    frame: &HorizontalFrame<S>,
    h: &F,
    p: &[S],
) -> Result<(Sym2H<S>, Sym2H<S>)> {
    let hj = positive_jet(frame, h, p, "conformal torsion")?;
    let m = frame.horizontal_dim();
    let hinv = S::one() / hj.value.clone();
    // symmetric part: nabla dh + sum_s dh(xi_s) omega_s
    let sym: Vec<Vec<S>> = (0..m)
        .map(|a| {
            (0..m)
                .map(|b| {
                    (0..3).fold(hj.hess[a][b].clone(), |acc, s| {
                        acc + hj.vert[s].clone() * frame.complex[s][b][a].clone()
                    })
                })
                .collect()
        })
        .collect();
    let (_, m1) = casimir_parts(&sym, &frame.complex);
    let t0 = Sym2H::symmetrize(&scaled(m1, &hinv));
    let shifted: Vec<Vec<S>> = (0..m)
        .map(|a| {
            (0..m)
                .map(|b| sym[a][b].clone() - S::two() * hinv.clone() * hj.grad[a].clone() * hj.grad[b].clone())
                .collect()
        })
        .collect();
    let (p3, _) = casimir_parts(&shifted, &frame.complex);
    let k = S::half() * hinv;
    let u = Sym2H::symmetrize(&scaled(p3, &k)).trace_free();
    Ok((t0, u))
}

/// Compactly supported perturbation `(1 + c.(x-x0)/r) prod_i (1 - ((x_i - x0_i)/r_i)^2)^3`
/// on the box `|x_i - x0_i| < r_i`, zero outside.
#[derive(Clone, Debug, PartialEq)]
pub struct Bump {
    pub center: Vec<f64>,
    pub radii: Vec<f64>,
    pub slope: Vec<f64>,
}

impl Bump {
    pub fn random<R: Rng>(n: usize, half_width: f64, radius: f64, rng: &mut R) -> Self {
        let d = ambient_dim(n);
        Self {
            center: (0..d).map(|_| rng.gen_range(-half_width..half_width)).collect(),
            radii: (0..d).map(|_| radius * rng.gen_range(0.75..1.25)).collect(),
            slope: (0..d).map(|_| rng.gen_range(-0.5..0.5)).collect(),
        }
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.iter()
            .zip(&self.center)
            .zip(&self.radii)
            .all(|((x, c), r)| (x - c).abs() < *r)
    }

    /// The support box as `(lower, upper)` corners.
    pub fn support(&self) -> (Vec<f64>, Vec<f64>) {
        let lo = self.center.iter().zip(&self.radii).map(|(c, r)| c - r).collect();
        let hi = self.center.iter().zip(&self.radii).map(|(c, r)| c + r).collect();
        (lo, hi)
    }
}

impl ScalarField<f64> for Bump {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn jet(&self, p: &[f64]) -> Result<Jet2<f64>> {
        let d = self.dim();
        if !self.contains(p) {
            return Ok(Jet2::constant(0.0, d));
        }
        let x = Jet2::coordinates(p);
        let mut poly = Jet2::constant(1.0, d);
        let mut window = Jet2::constant(1.0, d);
        for i in 0..d {
            let t = x[i].add_scalar(&-self.center[i]).scale(&(1.0 / self.radii[i]));
            poly = &poly + &t.scale(&self.slope[i]);
            let one_minus = (&t * &t).scale(&-1.0).add_scalar(&1.0);
            window = &window * &one_minus.powi(3);
        }
        Ok(&poly * &window)
    }

    fn value_grad(&self, p: &[f64], grad: &mut [f64]) -> Result<f64> {
        if !self.contains(p) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            return Ok(0.0);
        }
        let d = self.dim();
        let mut poly = 1.0;
        let mut w = Vec::with_capacity(d);
        let mut dw = Vec::with_capacity(d);
        for i in 0..d {
            let t = (p[i] - self.center[i]) / self.radii[i];
            poly += self.slope[i] * t;
            let s = 1.0 - t * t;
            w.push(s * s * s);
            dw.push(-6.0 * t * s * s / self.radii[i]);
        }
        let window: f64 = w.iter().product();
        for i in 0..d {
            let others: f64 = w.iter().enumerate().filter(|(k, _)| *k != i).map(|(_, v)| v).product();
            grad[i] = self.slope[i] / self.radii[i] * window + poly * dw[i] * others;
        }
        Ok(poly * window)
    }
}

/// A random positive polynomial `c + (random cubic)^2`, used as a generic
/// non-extremal conformal factor.
pub fn random_positive_poly<R: Rng>(n: usize, rng: &mut R) -> Poly<f64> {
    let d = ambient_dim(n);
    let base = Poly::<f64>::random(d, 2, 0.15, rng);
    base.clone() * base + Poly::constant(rng.gen_range(0.5..2.0), d)
}
