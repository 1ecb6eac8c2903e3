//! Casimir projections on horizontal 2-tensors, torsion data, the auxiliary
//! one-forms and (0,3)-tensors built from them, and the identity suites.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{QcError, Result};
use crate::frame::HorizontalFrame;
use crate::jet::Jet2;
use crate::ops::HorizontalJet;
use crate::poly::Poly;
use crate::scalar::{dot, norm_sq, rel_residual, Rational, Scalar};

pub type Mat<S> = Vec<Vec<S>>;

/// The three complex structures as matrices `J_s[b][a] = g(I_s e_a, e_b)`.
pub type ComplexTriple<S> = [Mat<S>; 3];

/// A symmetric horizontal 2-tensor in the frame.
#[derive(Clone, Debug, PartialEq)]
pub struct Sym2H<S> {
    m: Mat<S>,
}

impl<S: Scalar> Sym2H<S> {
    pub fn new(m: Mat<S>) -> Result<Self> {
        let k = m.len();
        let mut worst = 0.0f64;
        for (i, row) in m.iter().enumerate() {
            if row.len() != k {
                return Err(QcError::DimensionMismatch {
                    expected: k,
                    found: row.len(),
                });
            }
            for j in 0..i {
                if row[j] != m[j][i] {
                    worst = worst.max((row[j].clone() - m[j][i].clone()).as_f64().abs());
                }
            }
        }
        if worst > 0.0 || m.iter().enumerate().any(|(i, r)| (0..i).any(|j| r[j] != m[j][i])) {
            return Err(QcError::NotSymmetric(worst));
        }
        Ok(Self { m })
    }

    /// `(M + M^T) / 2`, for matrices that are symmetric up to rounding.
    pub fn symmetrize(m: &[Vec<S>]) -> Self {
        let k = m.len();
        Self {
            m: (0..k)
                .map(|i| (0..k).map(|j| (m[i][j].clone() + m[j][i].clone()) * S::half()).collect())
                .collect(),
        }
    }

    pub fn zeros(k: usize) -> Self {
        Self {
            m: vec![vec![S::zero(); k]; k],
        }
    }

    pub fn identity(k: usize) -> Self {
        let mut z = Self::zeros(k);
        for i in 0..k {
            z.m[i][i] = S::one();
        }
        z
    }

    pub fn dim(&self) -> usize {
        self.m.len()
    }

    pub fn matrix(&self) -> &Mat<S> {
        &self.m
    }

    pub fn get(&self, a: usize, b: usize) -> &S {
        &self.m[a][b]
    }

    pub fn trace(&self) -> S {
        (0..self.dim()).fold(S::zero(), |acc, i| acc + self.m[i][i].clone())
    }

    pub fn norm_sq(&self) -> S {
        self.m.iter().fold(S::zero(), |acc, r| acc + norm_sq(r))
    }

    pub fn apply(&self, v: &[S]) -> Vec<S> {
        mat_vec(&self.m, v)
    }

    pub fn trace_free(&self) -> Self {
        let k = self.dim();
        let t = self.trace() / S::from_i64(k as i64);
        let mut out = self.clone();
        for i in 0..k {
            out.m[i][i] = out.m[i][i].clone() - t.clone();
        }
        out
    }

    pub fn map<T: Scalar>(&self, f: impl Fn(&S) -> T) -> Sym2H<T> {
        Sym2H {
            m: self.m.iter().map(|r| r.iter().map(&f).collect()).collect(),
        }
    }

    pub fn to_f64(&self) -> Sym2H<f64> {
        self.map(|x| x.as_f64())
    }
}

pub fn mat_vec<S: Scalar>(m: &[Vec<S>], v: &[S]) -> Vec<S> {
    m.iter().map(|row| dot(row, v)).collect()
}

/// `J^T v`.
pub fn mat_t_vec<S: Scalar>(m: &[Vec<S>], v: &[S]) -> Vec<S> {
    let k = m.first().map_or(0, |r| r.len());
    (0..k)
        .map(|a| m.iter().zip(v).fold(S::zero(), |acc, (row, x)| acc + row[a].clone() * x.clone()))
        .collect()
}

fn mat_mul<S: Scalar>(a: &[Vec<S>], b: &[Vec<S>]) -> Mat<S> {
    let k = b.first().map_or(0, |r| r.len());
    a.iter()
        .map(|row| {
            (0..k)
                .map(|j| row.iter().zip(b).fold(S::zero(), |acc, (x, br)| acc + x.clone() * br[j].clone()))
                .collect()
        })
        .collect()
}

fn transpose<S: Scalar>(a: &[Vec<S>]) -> Mat<S> {
    let k = a.first().map_or(0, |r| r.len());
    (0..k).map(|j| a.iter().map(|r| r[j].clone()).collect()).collect()
}

/// `P(I_s ., I_s .)` as a matrix, i.e. `J^T P J`.
pub fn conjugate<S: Scalar>(p: &[Vec<S>], j: &[Vec<S>]) -> Mat<S> {
    mat_mul(&transpose(j), &mat_mul(p, j))
}

/// `sum_s P(I_s ., I_s .)`.
pub fn casimir_sum<S: Scalar>(p: &[Vec<S>], cx: &ComplexTriple<S>) -> Mat<S> {
    let mut acc = conjugate(p, &cx[0]);
    for j in &cx[1..] {
        let c = conjugate(p, j);
        for (r, cr) in acc.iter_mut().zip(c) {
            for (x, y) in r.iter_mut().zip(cr) {
                *x = x.clone() + y;
            }
        }
    }
    acc
}

/// `([3] part, [-1] part)` of an arbitrary bilinear form, without the
/// symmetry requirement.
pub fn casimir_parts<S: Scalar>(p: &[Vec<S>], cx: &ComplexTriple<S>) -> (Mat<S>, Mat<S>) {
    let c = casimir_sum(p, cx);
    let quarter = S::from_ratio(1, 4);
    let three = S::from_i64(3);
    let p3 = p
        .iter()
        .zip(&c)
        .map(|(r, cr)| r.iter().zip(cr).map(|(x, y)| (x.clone() + y.clone()) * quarter.clone()).collect())
        .collect();
    let pm1 = p
        .iter()
        .zip(&c)
        .map(|(r, cr)| r.iter().zip(cr).map(|(x, y)| (three.clone() * x.clone() - y.clone()) * quarter.clone()).collect())
        .collect();
    (p3, pm1)
}

/// Splits a symmetric tensor into its Casimir `[3]` and `[-1]` components.
pub fn project_3_m1<S: Scalar>(p: &Sym2H<S>, cx: &ComplexTriple<S>) -> Result<(Sym2H<S>, Sym2H<S>)> {
    let (a, b) = casimir_parts(&p.m, cx);
    Ok((Sym2H::new(a)?, Sym2H::new(b)?))
}

/// Torsion-type data at a point: `T0` of type `[-1]`, trace-free `U` of type
/// `[3]`, the horizontal gradient `dh`, the vertical derivatives `dh(xi_s)`
/// and the value `h > 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct TorsionData<S> {
    pub n: usize,
    pub t0: Sym2H<S>,
    pub u: Sym2H<S>,
    pub dh: Vec<S>,
    pub dhxi: [S; 3],
    pub h: S,
    pub complex: ComplexTriple<S>,
}

impl<S: Scalar> TorsionData<S> {
    pub fn new(
        frame: &HorizontalFrame<S>,
        t0: Sym2H<S>,
        u: Sym2H<S>,
        dh: Vec<S>,
        dhxi: [S; 3],
        h: S,
    ) -> Result<Self> {
        let m = frame.horizontal_dim();
        for k in [t0.dim(), u.dim(), dh.len()] {
            if k != m {
                return Err(QcError::DimensionMismatch { expected: m, found: k });
            }
        }
        if h <= S::zero() {
            return Err(QcError::Domain {
                op: "torsion data",
                value: h.as_f64(),
            });
        }
        Ok(Self {
            n: frame.n,
            t0,
            u,
            dh,
            dhxi,
            h,
            complex: frame.complex.clone(),
        })
    }

    /// Largest violation of the type conditions on `T0` and `U` (zero for
    /// valid data in exact arithmetic).
    pub fn type_violation(&self) -> S {
        let mut worst = S::zero();
        let mut push = |v: S| {
            let a = v.abs();
            if a > worst {
                worst = a;
            }
        };
        let c = casimir_sum(&self.t0.m, &self.complex);
        for (r, cr) in self.t0.m.iter().zip(&c) {
            for (x, y) in r.iter().zip(cr) {
                push(x.clone() + y.clone());
            }
        }
        for j in &self.complex {
            let c = conjugate(&self.u.m, j);
            for (r, cr) in self.u.m.iter().zip(&c) {
                for (x, y) in r.iter().zip(cr) {
                    push(x.clone() - y.clone());
                }
            }
        }
        push(self.u.trace());
        push(self.t0.trace());
        worst
    }

    pub fn map<T: Scalar>(&self, f: impl Fn(&S) -> T) -> TorsionData<T> {
        let mat = |m: &Mat<S>| m.iter().map(|r| r.iter().map(&f).collect()).collect();
        TorsionData {
            n: self.n,
            t0: self.t0.map(&f),
            u: self.u.map(&f),
            dh: self.dh.iter().map(&f).collect(),
            dhxi: [0, 1, 2].map(|s| f(&self.dhxi[s])),
            h: f(&self.h),
            complex: [0, 1, 2].map(|s| mat(&self.complex[s])),
        }
    }

    pub fn to_f64(&self) -> TorsionData<f64> {
        self.map(|x| x.as_f64())
    }

    /// Same data with `T0 = U = 0`.
    pub fn without_torsion(&self) -> Self {
        let m = self.dh.len();
        Self {
            t0: Sym2H::zeros(m),
            u: Sym2H::zeros(m),
            ..self.clone()
        }
    }
}

fn random_small_rational<R: Rng>(rng: &mut R, range: i64) -> Rational {
    let den = rng.gen_range(1..=8i64);
    Rational::from_ratio(rng.gen_range(-range * den..=range * den), den)
}

fn random_symmetric<R: Rng>(k: usize, rng: &mut R) -> Mat<Rational> {
    let mut m = vec![vec![Rational::from_i64(0); k]; k];
    for i in 0..k {
        for j in 0..=i {
            let v = random_small_rational(rng, 3);
            m[i][j] = v.clone();
            m[j][i] = v;
        }
    }
    m
}

/// Random valid torsion data, exact. `T0` is the `[-1]` part and `U` the
/// trace-free `[3]` part of independent random symmetric matrices; `U` is
/// zero for `n = 1`.
pub fn random_torsion(frame: &HorizontalFrame<Rational>, seed: u64) -> TorsionData<Rational> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = frame.horizontal_dim();
    let (_, t0) = casimir_parts(&random_symmetric(m, &mut rng), &frame.complex);
    let (u3, _) = casimir_parts(&random_symmetric(m, &mut rng), &frame.complex);
    let u = if frame.n == 1 {
        Sym2H::zeros(m)
    } else {
        Sym2H { m: u3 }.trace_free()
    };
    let dh = (0..m).map(|_| random_small_rational(&mut rng, 2)).collect();
    let dhxi = [0, 1, 2].map(|_| random_small_rational(&mut rng, 2));
    let h = Rational::from_ratio(rng.gen_range(1..=40), rng.gen_range(1..=8));
    TorsionData {
        n: frame.n,
        t0: Sym2H { m: t0 },
        u,
        dh,
        dhxi,
        h,
        complex: frame.complex.clone(),
    }
}

/// The one-forms `D_s`, `D`, `E`, `F_s` and the function `f`, in frame
/// components. `a` holds the `A_s`, which vanish on the group.
#[derive(Clone, Debug, PartialEq)]
pub struct AuxForms<S> {
    pub d_s: [Vec<S>; 3],
    pub d: Vec<S>,
    pub e: Vec<S>,
    pub f_s: [Vec<S>; 3],
    pub a_s: [Vec<S>; 3],
    pub f: S,
}

pub fn aux_forms_from_torsion<S: Scalar>(td: &TorsionData<S>) -> AuxForms<S> {
    let m = td.dh.len();
    let hinv = S::one() / td.h.clone();
    let t0_dh = td.t0.apply(&td.dh);
    let d_s = [0, 1, 2].map(|s| {
        let j = &td.complex[s];
        let conj = mat_t_vec(j, &td.t0.apply(&mat_vec(j, &td.dh)));
        let k = -(S::half() * hinv.clone());
        t0_dh
            .iter()
            .zip(conj)
            .map(|(x, y)| k.clone() * (x.clone() + y))
            .collect::<Vec<S>>()
    });
    let d = t0_dh.iter().map(|x| -(hinv.clone() * x.clone())).collect();
    let e = td
        .u
        .apply(&td.dh)
        .into_iter()
        .map(|x| -(S::two() * hinv.clone() * x))
        .collect();
    let f_s = [0, 1, 2].map(|s| {
        td.t0
            .apply(&mat_vec(&td.complex[s], &td.dh))
            .into_iter()
            .map(|x| -(hinv.clone() * x))
            .collect::<Vec<S>>()
    });
    let f = S::half() + td.h.clone() + S::from_ratio(1, 4) * hinv * norm_sq(&td.dh);
    AuxForms {
        d_s,
        d,
        e,
        f_s,
        a_s: [vec![S::zero(); m], vec![S::zero(); m], vec![S::zero(); m]],
        f,
    }
}

/// A dense `(0,3)`-tensor on the horizontal space.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor3<S> {
    pub dim: usize,
    pub data: Vec<S>,
}

impl<S: Scalar> Tensor3<S> {
    pub fn get(&self, a: usize, b: usize, c: usize) -> &S {
        &self.data[(a * self.dim + b) * self.dim + c]
    }

    pub fn dot(&self, other: &Self) -> S {
        self.data
            .iter()
            .zip(&other.data)
            .fold(S::zero(), |acc, (x, y)| acc + x.clone() * y.clone())
    }

    pub fn norm_sq(&self) -> S {
        self.dot(self)
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().zip(&other.data).map(|(x, y)| x.clone() + y.clone()).collect(),
        }
    }
}

/// `k [dh(X) P(Y,Z) + dh(Y) P(X,Z) + sum_s dh(I_s X) P(I_s Y, Z) + sum_s dh(I_s Y) P(I_s X, Z)]`
fn symmetrized_with_dh<S: Scalar>(td: &TorsionData<S>, p: &Mat<S>, k: S) -> Tensor3<S> {
    let m = td.dh.len();
    // dh(I_s e_a) and P(I_s e_b, e_c)
    let g: Vec<Vec<S>> = td.complex.iter().map(|j| mat_t_vec(j, &td.dh)).collect();
    let ps: Vec<Mat<S>> = td.complex.iter().map(|j| mat_mul(&transpose(j), p)).collect();
    let mut data = Vec::with_capacity(m * m * m);
    for a in 0..m {
        for b in 0..m {
            for c in 0..m {
                let mut v = td.dh[a].clone() * p[b][c].clone() + td.dh[b].clone() * p[a][c].clone();
                for s in 0..3 {
                    v = v + g[s][a].clone() * ps[s][b][c].clone() + g[s][b].clone() * ps[s][a][c].clone();
                }
                data.push(k.clone() * v);
            }
        }
    }
    Tensor3 { dim: m, data }
}

/// The `(0,3)`-tensors built from `T0` and from `E = -2U`.
pub fn dd_ee_tensors<S: Scalar>(td: &TorsionData<S>) -> (Tensor3<S>, Tensor3<S>) {
    let k = S::one() / (S::from_i64(8) * td.h.clone());
    let dd = symmetrized_with_dh(td, &td.t0.m, -k.clone());
    let bold_e: Mat<S> = td.u.m.iter().map(|r| r.iter().map(|x| -(S::two() * x.clone())).collect()).collect();
    let ee = symmetrized_with_dh(td, &bold_e, k);
    (dd, ee)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    /// `|lhs - rhs| / max(|lhs|, |rhs|, 1e-30)`.
    pub residual: f64,
    /// The two sides agree exactly in the scalar type used.
    pub exact: bool,
}

impl IdentityCheck {
    pub fn new<S: Scalar>(name: &str, lhs: S, rhs: S) -> Self {
        let (l, r) = (lhs.as_f64(), rhs.as_f64());
        Self {
            name: name.to_string(),
            lhs: l,
            rhs: r,
            residual: if lhs == rhs { 0.0 } else { rel_residual(l, r) },
            exact: lhs == rhs,
        }
    }

    /// Componentwise comparison of two vectors; the residual is the largest
    /// component difference relative to the larger vector norm.
    pub fn vector<S: Scalar>(name: &str, lhs: &[S], rhs: &[S]) -> Self {
        let diff: Vec<S> = lhs.iter().zip(rhs).map(|(a, b)| a.clone() - b.clone()).collect();
        let worst = diff.iter().map(|x| x.as_f64().abs()).fold(0.0, f64::max);
        let scale = norm_sq(lhs).as_f64().sqrt().max(norm_sq(rhs).as_f64().sqrt()).max(1e-30);
        let exact = diff.iter().all(|x| x.is_zero());
        Self {
            name: name.to_string(),
            lhs: norm_sq(lhs).as_f64().sqrt(),
            rhs: norm_sq(rhs).as_f64().sqrt(),
            residual: if exact { 0.0 } else { worst / scale },
            exact,
        }
    }
}

fn cross_sum<S: Scalar>(v: &[Vec<S>; 3]) -> S {
    dot(&v[0], &v[1]) + dot(&v[0], &v[2]) + dot(&v[1], &v[2])
}

/// The three contraction identities for the `(0,3)`-tensors and their
/// consequence, each side computed independently: left by brute-force
/// contraction, right from the one-forms.
pub fn lemma_de_check<S: Scalar>(td: &TorsionData<S>) -> Vec<IdentityCheck> {
    let aux = aux_forms_from_torsion(td);
    let (dd, ee) = dd_ee_tensors(td);
    let h2inv = S::one() / (td.h.clone() * td.h.clone());
    let grad2 = norm_sq(&td.dh);
    let t0_2 = td.t0.norm_sq();
    let e_bold_2 = S::from_i64(4) * td.u.norm_sq();
    let eighth = S::from_ratio(1, 8);
    let quarter = S::from_ratio(1, 4);
    let ds2 = aux.d_s.iter().fold(S::zero(), |acc, v| acc + norm_sq(v));
    let e_ds = aux.d_s.iter().fold(S::zero(), |acc, v| acc + dot(&aux.e, v));
    let cross = cross_sum(&aux.d_s);

    let dd_rhs = eighth.clone() * h2inv.clone() * grad2.clone() * t0_2.clone() - quarter.clone() * ds2.clone()
        + S::half() * cross.clone();
    let ee_rhs = eighth * h2inv.clone() * grad2.clone() * e_bold_2.clone() - quarter.clone() * norm_sq(&aux.e);
    let de_rhs = quarter.clone() * e_ds.clone();
    let sum2 = dd.add(&ee).norm_sq();
    let ed_lhs = quarter * h2inv * grad2 * (t0_2 + e_bold_2);
    let ed_rhs = S::two() * sum2 - e_ds + S::half() * norm_sq(&aux.e) + S::half() * ds2 - cross;
    vec![
        IdentityCheck::new("dd_norm", dd.norm_sq(), dd_rhs),
        IdentityCheck::new("ee_norm", ee.norm_sq(), ee_rhs),
        IdentityCheck::new("dd_dot_ee", dd.dot(&ee), de_rhs),
        IdentityCheck::new("dd_plus_ee", ed_lhs, ed_rhs),
    ]
}

/// `D = D_1 + D_2 + D_3` and the expression of `F_i` through the `D_s`.
pub fn structural_check<S: Scalar>(td: &TorsionData<S>) -> Vec<IdentityCheck> {
    let aux = aux_forms_from_torsion(td);
    let m = td.dh.len();
    let sum: Vec<S> = (0..m)
        .map(|a| aux.d_s[0][a].clone() + aux.d_s[1][a].clone() + aux.d_s[2][a].clone())
        .collect();
    let mut out = vec![IdentityCheck::vector("d_is_sum_of_d_s", &aux.d, &sum)];
    let names = ["f1_from_d_s", "f2_from_d_s", "f3_from_d_s"];
    for i in 0..3 {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        // D_s(I_i e_a) = (J_i^T D_s)_a
        let di = mat_t_vec(&td.complex[i], &aux.d_s[i]);
        let dj = mat_t_vec(&td.complex[i], &aux.d_s[j]);
        let dk = mat_t_vec(&td.complex[i], &aux.d_s[k]);
        let rhs: Vec<S> = (0..m).map(|a| -di[a].clone() + dj[a].clone() + dk[a].clone()).collect();
        out.push(IdentityCheck::vector(names[i], &aux.f_s[i], &rhs));
    }
    out
}

/// Formal expressions in the horizontal jet of `h`, transcribed for use on a
/// structure of constant qc-scalar curvature `16n(n+2)`. They are evaluated,
/// never asserted pointwise on the flat group.
pub mod formal {
    use super::*;

    fn jv<S: Scalar>(j: &Mat<S>, hj: &HorizontalJet<S>, s_vec: &[S]) -> Vec<S> {
        // nabla dh(I_s e_a, I_s v) = (J^T H J v)_a
        mat_t_vec(j, &mat_vec(&hj.hess, &mat_vec(j, s_vec)))
    }

    /// `D` in terms of `h`.
    pub fn d_from_h<S: Scalar>(hj: &HorizontalJet<S>, cx: &ComplexTriple<S>) -> Vec<S> {
        let h2inv = S::one() / (hj.value.clone() * hj.value.clone());
        let hg = mat_vec(&hj.hess, &hj.grad);
        let conj: Vec<Vec<S>> = cx.iter().map(|j| jv(j, hj, &hj.grad)).collect();
        let ig: Vec<Vec<S>> = cx.iter().map(|j| mat_t_vec(j, &hj.grad)).collect();
        (0..hg.len())
            .map(|a| {
                let mut t = S::from_i64(3) * hg[a].clone();
                let mut v = S::zero();
                for s in 0..3 {
                    t = t - conj[s][a].clone();
                    v = v + hj.vert[s].clone() * ig[s][a].clone();
                }
                h2inv.clone() * (S::from_ratio(1, 4) * t + v)
            })
            .collect()
    }

    /// `E` in terms of `h`.
    pub fn e_from_h<S: Scalar>(hj: &HorizontalJet<S>, cx: &ComplexTriple<S>) -> Vec<S> {
        let h = hj.value.clone();
        let h2inv = S::one() / (h.clone() * h.clone());
        let hg = mat_vec(&hj.hess, &hj.grad);
        let conj: Vec<Vec<S>> = cx.iter().map(|j| jv(j, hj, &hj.grad)).collect();
        let c = -S::two() + S::from_i64(4) * h.clone() - S::from_i64(3) * hj.grad_norm_sq() / h;
        (0..hg.len())
            .map(|a| {
                let t = conj.iter().fold(hg[a].clone(), |acc, v| acc + v[a].clone());
                S::from_ratio(1, 4) * h2inv.clone() * (t + c.clone() * hj.grad[a].clone())
            })
            .collect()
    }

    /// `A_s` in terms of `h`.
    pub fn a_s_from_h<S: Scalar>(hj: &HorizontalJet<S>, cx: &ComplexTriple<S>, i: usize) -> Vec<S> {
        let h = hj.value.clone();
        let hinv = S::one() / h.clone();
        let h2inv = hinv.clone() * hinv.clone();
        let h3inv = h2inv.clone() * hinv.clone();
        let g2 = hj.grad_norm_sq();
        let m = hj.grad.len();
        let mut out: Vec<S> = hj
            .grad
            .iter()
            .map(|x| -(S::half() * h2inv.clone() * x.clone()) - S::half() * h3inv.clone() * g2.clone() * x.clone())
            .collect();
        for s in [(i + 1) % 3, (i + 2) % 3] {
            let j = &cx[s];
            // nabla dh(I_s e_a, xi_s) = sum_c J[c][a] e_c(xi_s h)
            let col: Vec<S> = hj.mixed.iter().map(|r| r[s].clone()).collect();
            let hx = mat_t_vec(j, &col);
            let ig = mat_t_vec(j, &hj.grad);
            let conj = jv(j, hj, &hj.grad);
            for a in 0..m {
                out[a] = out[a].clone() - S::half() * hinv.clone() * hx[a].clone()
                    + S::half() * h2inv.clone() * hj.vert[s].clone() * ig[a].clone()
                    + S::from_ratio(1, 4) * h2inv.clone() * conj[a].clone();
            }
        }
        out
    }

    /// `A = A_1 + A_2 + A_3` in terms of `h`.
    pub fn a_from_h<S: Scalar>(hj: &HorizontalJet<S>, cx: &ComplexTriple<S>) -> Vec<S> {
        let h = hj.value.clone();
        let hinv = S::one() / h;
        let h2inv = hinv.clone() * hinv.clone();
        let g2 = hj.grad_norm_sq();
        let three_half = S::from_ratio(3, 2);
        let mut out: Vec<S> = hj
            .grad
            .iter()
            .map(|x| -(three_half.clone() * h2inv.clone() * x.clone()) - three_half.clone() * h2inv.clone() * hinv.clone() * g2.clone() * x.clone())
            .collect();
        for (s, j) in cx.iter().enumerate() {
            let col: Vec<S> = hj.mixed.iter().map(|r| r[s].clone()).collect();
            let hx = mat_t_vec(j, &col);
            let ig = mat_t_vec(j, &hj.grad);
            let conj = jv(j, hj, &hj.grad);
            for a in 0..out.len() {
                out[a] = out[a].clone() - hinv.clone() * hx[a].clone()
                    + h2inv.clone() * hj.vert[s].clone() * ig[a].clone()
                    + S::half() * h2inv.clone() * conj[a].clone();
            }
        }
        out
    }

    /// The symmetric tensor `-T0` in terms of `h`.
    pub fn bold_d_from_h<S: Scalar>(hj: &HorizontalJet<S>, cx: &ComplexTriple<S>) -> Mat<S> {
        let m = hj.grad.len();
        let k = S::from_ratio(1, 4) / hj.value.clone();
        let conj = casimir_sum(&hj.hess, cx);
        (0..m)
            .map(|a| {
                (0..m)
                    .map(|b| {
                        let mut v = S::from_i64(3) * hj.hess[a][b].clone() - conj[a][b].clone();
                        for s in 0..3 {
                            v = v + S::from_i64(4) * hj.vert[s].clone() * cx[s][b][a].clone();
                        }
                        k.clone() * v
                    })
                    .collect()
            })
            .collect()
    }

    /// The tensor `-2U` in terms of `h`.
    pub fn bold_e_from_h<S: Scalar>(hj: &HorizontalJet<S>, cx: &ComplexTriple<S>) -> Mat<S> {
        let m = hj.grad.len();
        let h = hj.value.clone();
        let k = S::from_ratio(1, 4) / h.clone();
        let k2 = S::half() / (h.clone() * h.clone());
        let conj = casimir_sum(&hj.hess, cx);
        let ig: Vec<Vec<S>> = cx.iter().map(|j| mat_t_vec(j, &hj.grad)).collect();
        let c = S::two() - S::from_i64(4) * h.clone() + hj.grad_norm_sq() / h;
        (0..m)
            .map(|a| {
                (0..m)
                    .map(|b| {
                        let outer = ig.iter().fold(hj.grad[a].clone() * hj.grad[b].clone(), |acc, g| {
                            acc + g[a].clone() * g[b].clone()
                        });
                        let mut v = k.clone() * (hj.hess[a][b].clone() + conj[a][b].clone()) - k2.clone() * outer;
                        if a == b {
                            v = v - k.clone() * c.clone();
                        }
                        v
                    })
                    .collect()
            })
            .collect()
    }
}

/// Identities that hold for every positive `h`, checked at `p`:
/// the sum of the formal `D` and `E`, the contraction of the tensor
/// expressions into the one-form expressions, and the gradient of `f`
/// computed by differentiating `f` itself.
pub fn universal_identity_suite<S: Scalar>(
    frame: &HorizontalFrame<S>,
    h: &Poly<S>,
    p: &[S],
) -> Result<Vec<IdentityCheck>> {
    let hj = HorizontalJet::at(frame, h, p)?;
    if hj.value <= S::zero() {
        return Err(QcError::Domain {
            op: "identity suite",
            value: hj.value.as_f64(),
        });
    }
    let cx = &frame.complex;
    let m = frame.horizontal_dim();
    let hv = hj.value.clone();
    let hinv = S::one() / hv.clone();
    let h2inv = hinv.clone() * hinv.clone();
    let g2 = hj.grad_norm_sq();
    let d = formal::d_from_h(&hj, cx);
    let e = formal::e_from_h(&hj, cx);
    let ed: Vec<S> = d.iter().zip(&e).map(|(x, y)| x.clone() + y.clone()).collect();

    let hg = mat_vec(&hj.hess, &hj.grad);
    let ig: Vec<Vec<S>> = cx.iter().map(|j| mat_t_vec(j, &hj.grad)).collect();
    let vsum: Vec<S> = (0..m)
        .map(|a| (0..3).fold(S::zero(), |acc, s| acc + hj.vert[s].clone() * ig[s][a].clone()))
        .collect();
    let c = S::from_ratio(1, 4) * h2inv.clone() * (-S::two() + S::from_i64(4) * hv.clone() - S::from_i64(3) * hinv.clone() * g2.clone());
    let ed_rhs: Vec<S> = (0..m)
        .map(|a| h2inv.clone() * hg[a].clone() + h2inv.clone() * vsum[a].clone() + c.clone() * hj.grad[a].clone())
        .collect();

    // D(X) = h^{-1} bold D(X, grad h), E(X) = h^{-1} bold E(X, grad h)
    let bd = formal::bold_d_from_h(&hj, cx);
    let be = formal::bold_e_from_h(&hj, cx);
    let d_contr: Vec<S> = mat_vec(&bd, &hj.grad).into_iter().map(|x| hinv.clone() * x).collect();
    let e_contr: Vec<S> = mat_vec(&be, &hj.grad).into_iter().map(|x| hinv.clone() * x).collect();

    // f = 1/2 + h + 1/4 h^{-1} |grad h|^2 as a jet, from the polynomials e_b h
    let d_amb = frame.dim();
    let coords_jets: Vec<Jet2<S>> = frame
        .fields
        .iter()
        .map(|fld| h.apply_affine_field(&fld.constant, &fld.linear).jet(p))
        .collect();
    let hjet = h.jet(p);
    let g2_jet = coords_jets
        .iter()
        .fold(Jet2::constant(S::zero(), d_amb), |acc, j| &acc + &(j * j));
    let f_jet = &(&g2_jet.scale(&S::from_ratio(1, 4)) * &hjet.recip()?) + &hjet.add_scalar(&S::half());
    let fj = HorizontalJet::from_jet(frame, p, &f_jet)?;
    let two_df: Vec<S> = fj.grad.iter().map(|x| S::two() * x.clone()).collect();
    let fval = S::half() + hv.clone() + S::from_ratio(1, 4) * hinv.clone() * g2;
    let df_rhs: Vec<S> = (0..m)
        .map(|a| {
            hv.clone() * ed[a].clone() - hinv.clone() * vsum[a].clone() + hinv.clone() * fval.clone() * hj.grad[a].clone()
        })
        .collect();

    Ok(vec![
        IdentityCheck::vector("e_plus_d", &ed, &ed_rhs),
        IdentityCheck::vector("df", &two_df, &df_rhs),
        IdentityCheck::vector("d_from_tensor", &d, &d_contr),
        IdentityCheck::vector("e_from_tensor", &e, &e_contr),
    ])
}

/// `sum_rs Q_rs <V_r, V_s>` for the seven blocks `(E, D_1, D_2, D_3, A_1, A_2, A_3)`.
pub fn q_quadratic_form<S: Scalar>(q: &[Vec<S>], blocks: &[Vec<S>]) -> Result<S> {
    if blocks.len() != 7 || q.len() != 7 {
        return Err(QcError::DimensionMismatch {
            expected: 7,
            found: blocks.len().min(q.len()),
        });
    }
    let mut acc = S::zero();
    for r in 0..7 {
        for s in 0..7 {
            if blocks[r].len() != blocks[s].len() {
                return Err(QcError::DimensionMismatch {
                    expected: blocks[r].len(),
                    found: blocks[s].len(),
                });
            }
            acc = acc + q[r][s].clone() * dot(&blocks[r], &blocks[s]);
        }
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::{build_frame, rational_points};

    fn q(v: i64) -> Rational {
        Rational::from_i64(v)
    }

    #[test]
    fn identity_is_pure_type_three() {
        let f = build_frame(2).unwrap();
        let (p3, pm1) = project_3_m1(&Sym2H::identity(8), &f.complex).unwrap();
        assert_eq!(p3, Sym2H::identity(8));
        assert_eq!(pm1, Sym2H::zeros(8));
    }

    #[test]
    fn fundamental_forms_are_type_minus_one() {
        for n in 1..=2 {
            let f = build_frame(n).unwrap();
            for s in 0..3 {
                let w = crate::ops::fundamental_form(&f, s);
                let (p3, pm1) = casimir_parts(&w, &f.complex);
                assert!(p3.iter().flatten().all(|x| *x == q(0)));
                assert_eq!(pm1, w);
            }
        }
    }

    #[test]
    fn projections_split_and_are_idempotent() {
        let f = build_frame(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let p = Sym2H::new(random_symmetric(8, &mut rng)).unwrap();
            let (p3, pm1) = project_3_m1(&p, &f.complex).unwrap();
            for a in 0..8 {
                for b in 0..8 {
                    assert_eq!(p3.get(a, b).clone() + pm1.get(a, b).clone(), *p.get(a, b));
                }
            }
            let (p33, p3m) = project_3_m1(&p3, &f.complex).unwrap();
            assert_eq!(p33, p3);
            assert_eq!(p3m, Sym2H::zeros(8));
            let (pm3, pmm) = project_3_m1(&pm1, &f.complex).unwrap();
            assert_eq!(pmm, pm1);
            assert_eq!(pm3, Sym2H::zeros(8));
        }
    }

    #[test]
    fn asymmetric_input_rejected() {
        let mut m = vec![vec![q(0); 4]; 4];
        m[0][1] = q(1);
        assert!(matches!(Sym2H::new(m), Err(QcError::NotSymmetric(_))));
    }

    #[test]
    fn random_torsion_is_valid_and_reproducible() {
        for n in 1..=2 {
            let f = build_frame(n).unwrap();
            for seed in 0..20 {
                let td = random_torsion(&f, seed);
                assert_eq!(td.type_violation(), q(0));
                assert!(td.h > q(0));
                if n == 1 {
                    assert_eq!(td.u, Sym2H::zeros(4));
                }
                assert_eq!(td, random_torsion(&f, seed));
            }
        }
        let f = build_frame(2).unwrap();
        assert_ne!(random_torsion(&f, 1).u, Sym2H::zeros(8));
    }

    #[test]
    fn structural_identities_exact() {
        for n in 1..=2 {
            let f = build_frame(n).unwrap();
            for seed in 0..20 {
                for c in structural_check(&random_torsion(&f, seed)) {
                    assert!(c.exact, "{c:?}");
                }
            }
        }
    }

    #[test]
    fn lemma_identities_exact() {
        for n in 1..=2 {
            let f = build_frame(n).unwrap();
            for seed in 0..10 {
                for c in lemma_de_check(&random_torsion(&f, seed)) {
                    assert!(c.exact, "n={n} seed={seed} {c:?}");
                }
            }
        }
    }

    #[test]
    fn zero_torsion_gives_zero_forms() {
        let f = build_frame(2).unwrap();
        let td = random_torsion(&f, 3).without_torsion();
        let aux = aux_forms_from_torsion(&td);
        let zero = vec![q(0); 8];
        assert!(aux.d_s.iter().chain(aux.f_s.iter()).all(|v| *v == zero));
        assert_eq!(aux.d, zero);
        assert_eq!(aux.e, zero);
        let (dd, ee) = dd_ee_tensors(&td);
        assert!(dd.data.iter().chain(&ee.data).all(|x| *x == q(0)));
        for c in lemma_de_check(&td) {
            assert!(c.exact && c.lhs == 0.0, "{c:?}");
        }
    }

    #[test]
    fn dd_symmetric_in_first_two_slots() {
        let f = build_frame(2).unwrap();
        let (dd, ee) = dd_ee_tensors(&random_torsion(&f, 8));
        for a in 0..8 {
            for b in 0..8 {
                for c in 0..8 {
                    assert_eq!(dd.get(a, b, c), dd.get(b, a, c));
                    assert_eq!(ee.get(a, b, c), ee.get(b, a, c));
                }
            }
        }
    }

    #[test]
    fn universal_identities_exact_for_random_polynomials() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for n in 1..=2 {
            let f = build_frame(n).unwrap();
            let d = f.dim();
            for p in rational_points(n, 3, 1, 100 + n as u64) {
                let base = Poly::<f64>::random(d, 3, 0.03, &mut rng).map_coeffs(|c| Rational::from_f64(*c));
                let sq = base.clone() * base;
                let h = sq + Poly::constant(Rational::from_ratio(1, 3), d);
                for c in universal_identity_suite(&f, &h, &p).unwrap() {
                    assert!(c.exact, "{c:?}");
                }
            }
        }
    }

    #[test]
    fn constant_h_has_zero_residuals() {
        let f = build_frame(1).unwrap();
        let h = Poly::constant(q(2), 7);
        for c in universal_identity_suite(&f, &h, &vec![q(1); 7]).unwrap() {
            assert!(c.exact && c.lhs == 0.0);
        }
    }

    #[test]
    fn nonpositive_h_rejected() {
        let f = build_frame(1).unwrap();
        let h = Poly::var(0, 7);
        assert!(universal_identity_suite(&f, &h, &vec![q(0); 7]).is_err());
    }
}
