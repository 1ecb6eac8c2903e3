//! Left-invariant horizontal frame, Reeb fields, complex structures and the
//! standard contact form of `G(H)`, together with a mechanical audit of their
//! compatibility relations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{QcError, Result};
use crate::group::ambient_dim;
use crate::quat::Quaternion;
use crate::scalar::{Rational, Scalar};

/// First-order operator `sum_i c_i(p) d/dp_i` with `c(p) = constant + linear p`.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineVectorField<S> {
    pub constant: Vec<S>,
    /// `linear[i][j] = d c_i / d p_j`.
    pub linear: Vec<Vec<S>>,
}

impl<S: Scalar> AffineVectorField<S> {
    pub fn constant_field(c: Vec<S>) -> Self {
        let d = c.len();
        Self {
            constant: c,
            linear: vec![vec![S::zero(); d]; d],
        }
    }

    pub fn at(&self, p: &[S]) -> Vec<S> {
        self.constant
            .iter()
            .zip(&self.linear)
            .map(|(c, row)| {
                row.iter()
                    .zip(p)
                    .fold(c.clone(), |acc, (l, x)| acc + l.clone() * x.clone())
            })
            .collect()
    }

    pub fn scale(&self, k: &S) -> Self {
        Self {
            constant: self.constant.iter().map(|c| c.clone() * k.clone()).collect(),
            linear: self
                .linear
                .iter()
                .map(|r| r.iter().map(|c| c.clone() * k.clone()).collect())
                .collect(),
        }
    }

    pub fn map<T: Scalar>(&self, f: &impl Fn(&S) -> T) -> AffineVectorField<T> {
        AffineVectorField {
            constant: self.constant.iter().map(f).collect(),
            linear: self.linear.iter().map(|r| r.iter().map(f).collect()).collect(),
        }
    }
}

/// An `R^3`-valued 1-form with affine coefficients and constant differential.
#[derive(Clone, Debug, PartialEq)]
pub struct ContactForm<S> {
    /// `coeffs[s]` holds the coefficient functions of the `s`-th form.
    pub coeffs: Vec<AffineVectorField<S>>,
}

impl<S: Scalar> ContactForm<S> {
    /// The standard form `1/2 (dw - q . dq^* + dq . q^*)`, componentwise over `(i, j, k)`.
    pub fn standard(n: usize) -> Self {
        let d = ambient_dim(n);
        let half = S::half();
        let mut coeffs: Vec<AffineVectorField<S>> = (0..3)
            .map(|_| AffineVectorField {
                constant: vec![S::zero(); d],
                linear: vec![vec![S::zero(); d]; d],
            })
            .collect();
        for s in 0..3 {
            coeffs[s].constant[4 * n + s] = half.clone();
        }
        for a in 0..n {
            for u in 0..4 {
                // coefficient of d(q_a^u) is 1/2 Im(-q_a conj(e_u) + e_u conj(q_a)),
                // linear in q_a
                let eu = Quaternion::<S>::basis(u);
                for v in 0..4 {
                    let ev = Quaternion::<S>::basis(v);
                    let val = (-(&ev * &eu.conj())) + &eu * &ev.conj();
                    let im = val.im();
                    for s in 0..3 {
                        coeffs[s].linear[4 * a + u][4 * a + v] =
                            half.clone() * im.component(s).clone();
                    }
                }
            }
        }
        Self { coeffs }
    }

    pub fn eval(&self, s: usize, p: &[S], v: &[S]) -> S {
        crate::scalar::dot(&self.coeffs[s].at(p), v)
    }

    /// `d theta_s` as the constant antisymmetric matrix `W` with
    /// `d theta_s(X, Y) = X^T W Y`.
    pub fn differential(&self, s: usize) -> Vec<Vec<S>> {
        let lin = &self.coeffs[s].linear;
        let d = lin.len();
        (0..d)
            .map(|i| (0..d).map(|j| lin[j][i].clone() - lin[i][j].clone()).collect())
            .collect()
    }
}

/// How `I_s` acts on the quaternion slots of the frame.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ComplexStructureConvention {
    /// `I_s v = u_s v` with `u = (i, j, k)`.
    LeftMultiplication,
    /// `I_s v = v u_s`.
    RightMultiplication,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HorizontalFrame<S> {
    pub n: usize,
    /// `fields[4a + u]` is the left translate of `d/dq_a^u`.
    pub fields: Vec<AffineVectorField<S>>,
    pub reeb: [Vec<S>; 3],
    /// `complex[s][b][a] = g(I_s e_a, e_b)`, i.e. the matrix of `I_s` in the frame.
    pub complex: [Vec<Vec<S>>; 3],
    pub contact: ContactForm<S>,
    pub convention: ComplexStructureConvention,
}

fn complex_structures<S: Scalar>(n: usize, conv: ComplexStructureConvention) -> [Vec<Vec<S>>; 3] {
    let m = 4 * n;
    let units = [Quaternion::<S>::i(), Quaternion::j(), Quaternion::k()];
    let mk = |s: usize| {
        let mut j = vec![vec![S::zero(); m]; m];
        for a in 0..n {
            for v in 0..4 {
                let ev = Quaternion::<S>::basis(v);
                let img = match conv {
                    ComplexStructureConvention::LeftMultiplication => &units[s] * &ev,
                    ComplexStructureConvention::RightMultiplication => &ev * &units[s],
                };
                for (w, c) in img.to_array().into_iter().enumerate() {
                    j[4 * a + w][4 * a + v] = c;
                }
            }
        }
        j
    };
    [mk(0), mk(1), mk(2)]
}

/// Left-invariant horizontal fields: at `(q, w)` the field for slot `a`,
/// unit `e_u` is `(e_u in slot a, 2 Im(q_a conj(e_u)))`.
fn left_invariant_fields<S: Scalar>(n: usize) -> Vec<AffineVectorField<S>> {
    let d = ambient_dim(n);
    let mut out = Vec::with_capacity(4 * n);
    for a in 0..n {
        for u in 0..4 {
            let mut f = AffineVectorField::constant_field(vec![S::zero(); d]);
            f.constant[4 * a + u] = S::one();
            let eu = Quaternion::<S>::basis(u);
            for v in 0..4 {
                let im = (&Quaternion::<S>::basis(v) * &eu.conj()).im();
                for s in 0..3 {
                    f.linear[4 * n + s][4 * a + v] = S::two() * im.component(s).clone();
                }
            }
            out.push(f);
        }
    }
    out
}

impl<S: Scalar> HorizontalFrame<S> {
    pub fn with_convention(n: usize, convention: ComplexStructureConvention) -> Self {
        let d = ambient_dim(n);
        let reeb = [0, 1, 2].map(|s| {
            let mut v = vec![S::zero(); d];
            v[4 * n + s] = S::two();
            v
        });
        Self {
            n,
            fields: left_invariant_fields(n),
            reeb,
            complex: complex_structures(n, convention),
            contact: ContactForm::standard(n),
            convention,
        }
    }

    pub fn dim(&self) -> usize {
        ambient_dim(self.n)
    }

    pub fn horizontal_dim(&self) -> usize {
        4 * self.n
    }

    /// Matrix `A[a][i]` of frame coefficients at `p`.
    pub fn coefficients(&self, p: &[S]) -> Vec<Vec<S>> {
        self.fields.iter().map(|f| f.at(p)).collect()
    }

    /// `I_s X` for a frame-component vector `X`.
    pub fn apply_complex(&self, s: usize, x: &[S]) -> Vec<S> {
        self.complex[s]
            .iter()
            .map(|row| crate::scalar::dot(row, x))
            .collect()
    }

    pub fn map<T: Scalar>(&self, f: impl Fn(&S) -> T) -> HorizontalFrame<T> {
        let mat = |m: &Vec<Vec<S>>| m.iter().map(|r| r.iter().map(&f).collect()).collect();
        HorizontalFrame {
            n: self.n,
            fields: self.fields.iter().map(|v| v.map(&f)).collect(),
            reeb: [0, 1, 2].map(|s| self.reeb[s].iter().map(&f).collect()),
            complex: [0, 1, 2].map(|s| mat(&self.complex[s])),
            contact: ContactForm {
                coeffs: self.contact.coeffs.iter().map(|c| c.map(&f)).collect(),
            },
            convention: self.convention,
        }
    }

    pub fn to_f64(&self) -> HorizontalFrame<f64> {
        self.map(|x| x.as_f64())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditCheck {
    pub name: String,
    pub max_violation: f64,
    /// Every residual was exactly zero in the scalar type used.
    pub exact: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub n: usize,
    pub points: usize,
    pub checks: Vec<AuditCheck>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.exact)
    }

    pub fn check(&self, name: &str) -> Option<&AuditCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

struct Tally<S> {
    max: f64,
    exact: bool,
    _s: std::marker::PhantomData<S>,
}

impl<S: Scalar> Tally<S> {
    fn new() -> Self {
        Self {
            max: 0.0,
            exact: true,
            _s: std::marker::PhantomData,
        }
    }
    fn push(&mut self, r: S) {
        if !r.is_zero() {
            self.exact = false;
        }
        self.max = self.max.max(r.as_f64().abs());
    }
    fn finish(self, name: &str) -> AuditCheck {
        AuditCheck {
            name: name.to_string(),
            max_violation: self.max,
            exact: self.exact,
        }
    }
}

fn mat_mul<S: Scalar>(a: &[Vec<S>], b: &[Vec<S>]) -> Vec<Vec<S>> {
    let m = a.len();
    (0..m)
        .map(|i| {
            (0..m)
                .map(|j| (0..m).fold(S::zero(), |acc, k| acc + a[i][k].clone() * b[k][j].clone()))
                .collect()
        })
        .collect()
}

/// Checks, at every sample point:
/// `theta_s(e_a) = 0`, `theta_s(xi_k) = delta_sk`, `(xi_s _| d theta_k)|_H = 0`,
/// `d theta_s(e_a, e_b) = 2 g(I_s e_a, e_b)`, plus the quaternion relations and
/// orthogonality of the `I_s`.
pub fn frame_audit<S: Scalar>(frame: &HorizontalFrame<S>, points: &[Vec<S>]) -> AuditReport {
    let m = frame.horizontal_dim();
    let mut annihilate = Tally::<S>::new();
    let mut reeb = Tally::<S>::new();
    let mut reeb_interior = Tally::<S>::new();
    let mut compat = Tally::<S>::new();
    let dtheta: Vec<Vec<Vec<S>>> = (0..3).map(|s| frame.contact.differential(s)).collect();
    let bilinear = |w: &Vec<Vec<S>>, x: &[S], y: &[S]| -> S {
        w.iter()
            .zip(x)
            .fold(S::zero(), |acc, (row, xi)| acc + xi.clone() * crate::scalar::dot(row, y))
    };
    for p in points {
        let coeffs = frame.coefficients(p);
        for s in 0..3 {
            for e in &coeffs {
                annihilate.push(frame.contact.eval(s, p, e));
            }
            for k in 0..3 {
                let expect = if s == k { S::one() } else { S::zero() };
                reeb.push(frame.contact.eval(s, p, &frame.reeb[k]) - expect);
                for e in &coeffs {
                    reeb_interior.push(bilinear(&dtheta[k], &frame.reeb[s], e));
                }
            }
            for a in 0..m {
                for b in 0..m {
                    let lhs = bilinear(&dtheta[s], &coeffs[a], &coeffs[b]);
                    let rhs = S::two() * frame.complex[s][b][a].clone();
                    compat.push(lhs - rhs);
                }
            }
        }
    }

    let mut quat = Tally::<S>::new();
    let mut ortho = Tally::<S>::new();
    let id = |i: usize, j: usize| if i == j { S::one() } else { S::zero() };
    for s in 0..3 {
        let sq = mat_mul(&frame.complex[s], &frame.complex[s]);
        let (t, u) = ((s + 1) % 3, (s + 2) % 3);
        let prod = mat_mul(&frame.complex[s], &frame.complex[t]);
        for i in 0..m {
            for j in 0..m {
                quat.push(sq[i][j].clone() + id(i, j));
                quat.push(prod[i][j].clone() - frame.complex[u][i][j].clone());
                let o = (0..m).fold(S::zero(), |acc, k| {
                    acc + frame.complex[s][k][i].clone() * frame.complex[s][k][j].clone()
                });
                ortho.push(o - id(i, j));
            }
        }
    }

    AuditReport {
        n: frame.n,
        points: points.len(),
        checks: vec![
            annihilate.finish("contact_annihilates_horizontal"),
            reeb.finish("reeb_duality"),
            reeb_interior.finish("reeb_interior_horizontal"),
            compat.finish("contact_compatibility"),
            quat.finish("quaternion_relations"),
            ortho.finish("complex_orthogonality"),
        ],
    }
}

/// Random rational sample points with small denominators in the box
/// `[-half_width, half_width]`.
pub fn rational_points(n: usize, count: usize, half_width: i64, seed: u64) -> Vec<Vec<Rational>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            (0..ambient_dim(n))
                .map(|_| {
                    let den = rng.gen_range(1..=9i64);
                    Rational::from_ratio(rng.gen_range(-half_width * den..=half_width * den), den)
                })
                .collect()
        })
        .collect()
}

/// Builds the frame for `G(H)`, choosing the complex-structure convention
/// whose audit is exact.
pub fn build_frame(n: usize) -> Result<HorizontalFrame<Rational>> {
    if n == 0 {
        return Err(QcError::InvalidParameter("n must be at least 1".into()));
    }
    let pts = rational_points(n, 4, 2, 0x9e37);
    for conv in [
        ComplexStructureConvention::LeftMultiplication,
        ComplexStructureConvention::RightMultiplication,
    ] {
        let f = HorizontalFrame::with_convention(n, conv);
        if frame_audit(&f, &pts).passed() {
            return Ok(f);
        }
    }
    Err(QcError::InvalidParameter(
        "no complex-structure convention is compatible with the contact form".into(),
    ))
}

/// Floating-point copy of [`build_frame`].
pub fn build_frame_f64(n: usize) -> Result<HorizontalFrame<f64>> {
    Ok(build_frame(n)?.to_f64())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn audit_exact_for_small_n() {
        for n in 1..=2 {
            let f = build_frame(n).unwrap();
            let rep = frame_audit(&f, &rational_points(n, 100, 2, 42));
            assert!(rep.passed(), "{rep:?}");
            assert_eq!(f.convention, ComplexStructureConvention::LeftMultiplication);
        }
    }

    #[test]
    fn right_multiplication_rejected() {
        let f = HorizontalFrame::<Rational>::with_convention(1, ComplexStructureConvention::RightMultiplication);
        let rep = frame_audit(&f, &rational_points(1, 5, 2, 1));
        assert!(!rep.check("contact_compatibility").unwrap().exact);
        assert!(!rep.check("quaternion_relations").unwrap().exact);
    }

    #[test]
    fn swapped_complex_structures_violate_compatibility() {
        let mut f = build_frame(1).unwrap();
        f.complex.swap(0, 1);
        let rep = frame_audit(&f, &rational_points(1, 5, 2, 2));
        assert!(!rep.check("contact_compatibility").unwrap().exact);
        assert!(rep.check("contact_annihilates_horizontal").unwrap().exact);
    }

    #[test]
    fn halved_reeb_field_flagged() {
        let mut f = build_frame(1).unwrap();
        for v in f.reeb[0].iter_mut() {
            *v = v.clone() * Rational::half();
        }
        let rep = frame_audit(&f, &rational_points(1, 3, 2, 3));
        let c = rep.check("reeb_duality").unwrap();
        assert!(!c.exact);
        assert!((c.max_violation - 0.5).abs() < 1e-15);
    }

    #[test]
    fn frame_at_origin_is_coordinate_frame() {
        let f = build_frame(2).unwrap();
        let zero = vec![Rational::from_i64(0); f.dim()];
        for (a, row) in f.coefficients(&zero).iter().enumerate() {
            for (i, c) in row.iter().enumerate() {
                let expect = if i == a { Rational::from_i64(1) } else { Rational::from_i64(0) };
                assert_eq!(*c, expect);
            }
        }
    }

    #[test]
    fn matches_classical_coordinate_expressions() {
        // T = dt + 2x dw1 + 2y dw2 + 2z dw3, X = dx - 2t dw1 - 2z dw2 + 2y dw3,
        // Y = dy + 2z dw1 - 2t dw2 - 2x dw3, Z = dz - 2y dw1 + 2x dw2 - 2t dw3
        let f = build_frame(1).unwrap();
        let p: Vec<Rational> = [3, -2, 5, 7, 1, 1, 1]
            .iter()
            .map(|&v| Rational::from_i64(v))
            .collect();
        let (t, x, y, z) = (3i64, -2i64, 5i64, 7i64);
        let expect = [
            [1, 0, 0, 0, 2 * x, 2 * y, 2 * z],
            [0, 1, 0, 0, -2 * t, -2 * z, 2 * y],
            [0, 0, 1, 0, 2 * z, -2 * t, -2 * x],
            [0, 0, 0, 1, -2 * y, 2 * x, -2 * t],
        ];
        let got = f.coefficients(&p);
        for a in 0..4 {
            let e: Vec<Rational> = expect[a].iter().map(|&v| Rational::from_i64(v)).collect();
            assert_eq!(got[a], e);
        }
    }

    #[test]
    fn contact_form_matches_group_derivative_at_origin() {
        let c = ContactForm::<Rational>::standard(1);
        let zero = vec![Rational::from_i64(0); 7];
        for s in 0..3 {
            let co = c.coeffs[s].at(&zero);
            for (i, v) in co.iter().enumerate() {
                let expect = if i == 4 + s { Rational::half() } else { Rational::from_i64(0) };
                assert_eq!(*v, expect);
            }
        }
    }
}
