//! The 7x7 coefficient matrix of the divergence formula, with an exact
//! spectral certificate.

use num_traits::{One, Signed, Zero};

use crate::error::{QcError, Result};
use crate::scalar::{Rational, Scalar};

/// Exact 7x7 matrix acting on `(E, D_1, D_2, D_3, A_1, A_2, A_3)`.
#[derive(Clone, Debug, PartialEq)]
pub struct QMatrix {
    pub entries: Vec<Vec<Rational>>,
}

fn r(num: i64, den: i64) -> Rational {
    Rational::from_ratio(num, den)
}

/// The matrix with its printed entries.
pub fn build_q() -> QMatrix {
    let mut m = vec![vec![Rational::zero(); 7]; 7];
    for i in 0..4 {
        for j in 0..4 {
            m[i][j] = if i == j { r(5, 2) } else { r(-1, 2) };
        }
    }
    for s in 0..3 {
        m[0][4 + s] = r(-2, 1);
        m[4 + s][0] = r(-2, 1);
        for t in 0..3 {
            let c = if s == t { r(10, 3) } else { r(-2, 3) };
            m[1 + s][4 + t] = c.clone();
            m[4 + t][1 + s] = c;
            m[4 + s][4 + t] = if s == t { r(22, 3) } else { r(-2, 3) };
        }
    }
    QMatrix { entries: m }
}

impl QMatrix {
    pub fn get(&self, i: usize, j: usize) -> &Rational {
        &self.entries[i][j]
    }

    /// A copy with one entry replaced, used as a negative control.
    pub fn tampered(&self, i: usize, j: usize, value: Rational) -> Result<Self> {
        if i >= 7 || j >= 7 {
            return Err(QcError::InvalidParameter(format!("entry ({i}, {j}) outside 7x7")));
        }
        let mut out = self.clone();
        out.entries[i][j] = value;
        Ok(out)
    }

    pub fn is_symmetric(&self) -> bool {
        (0..7).all(|i| (0..i).all(|j| self.entries[i][j] == self.entries[j][i]))
    }

    /// `Q - mu I`.
    pub fn shifted(&self, mu: &Rational) -> Vec<Vec<Rational>> {
        let mut m = self.entries.clone();
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = &row[i] - mu;
        }
        m
    }

    pub fn to_f64(&self) -> Vec<Vec<f64>> {
        self.entries.iter().map(|row| row.iter().map(|x| x.as_f64()).collect()).collect()
    }
}

/// Exact determinant by Gaussian elimination with nonzero pivot search.
pub fn determinant(m: &[Vec<Rational>]) -> Rational {
    let n = m.len();
    let mut a: Vec<Vec<Rational>> = m.to_vec();
    let mut det = Rational::one();
    for c in 0..n {
        let Some(p) = (c..n).find(|&i| !a[i][c].is_zero()) else {
            return Rational::zero();
        };
        if p != c {
            a.swap(p, c);
            det = -det;
        }
        let pivot = a[c][c].clone();
        det *= &pivot;
        for i in c + 1..n {
            if a[i][c].is_zero() {
                continue;
            }
            let k = &a[i][c] / &pivot;
            for j in c..n {
                let v = &k * &a[c][j];
                a[i][j] -= v;
            }
        }
    }
    det
}

/// Determinants of the leading `k x k` blocks, `k = 1..n`.
pub fn leading_minors(m: &[Vec<Rational>]) -> Vec<Rational> {
    (1..=m.len())
        .map(|k| {
            let sub: Vec<Vec<Rational>> = m[..k].iter().map(|row| row[..k].to_vec()).collect();
            determinant(&sub)
        })
        .collect()
}

/// Smallest principal minor over all nonempty index subsets, with the subset.
pub fn min_principal_minor(m: &[Vec<Rational>]) -> (Rational, Vec<usize>) {
    let n = m.len();
    let mut best: Option<(Rational, Vec<usize>)> = None;
    for mask in 1u32..(1 << n) {
        let idx: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let sub: Vec<Vec<Rational>> = idx.iter().map(|&i| idx.iter().map(|&j| m[i][j].clone()).collect()).collect();
        let d = determinant(&sub);
        if best.as_ref().is_none_or(|(b, _)| d < *b) {
            best = Some((d, idx));
        }
    }
    best.expect("nonempty matrix")
}

/// Univariate polynomial with exact coefficients, lowest degree first.
#[derive(Clone, Debug, PartialEq)]
pub struct RatPoly {
    pub coeffs: Vec<Rational>,
}

impl RatPoly {
    pub fn new(mut coeffs: Vec<Rational>) -> Self {
        while coeffs.len() > 1 && coeffs.last().is_some_and(|c| c.is_zero()) {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(Rational::zero());
        }
        Self { coeffs }
    }

    pub fn from_i64(c: &[i64]) -> Self {
        Self::new(c.iter().map(|&v| Rational::from_i64(v)).collect())
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.len() == 1 && self.coeffs[0].is_zero()
    }

    pub fn eval(&self, x: &Rational) -> Rational {
        self.coeffs.iter().rev().fold(Rational::zero(), |acc, c| acc * x + c)
    }

    pub fn eval_f64(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c.as_f64())
    }

    /// Quotient and remainder.
    pub fn div_rem(&self, d: &RatPoly) -> (RatPoly, RatPoly) {
        assert!(!d.is_zero(), "division by zero polynomial");
        let mut rem = self.coeffs.clone();
        let dd = d.degree();
        if self.degree() < dd {
            return (RatPoly::new(vec![]), self.clone());
        }
        let lead = d.coeffs[dd].clone();
        let mut quot = vec![Rational::zero(); self.degree() - dd + 1];
        for k in (0..quot.len()).rev() {
            let c = &rem[k + dd] / &lead;
            for (i, dc) in d.coeffs.iter().enumerate() {
                let v = &c * dc;
                rem[k + i] -= v;
            }
            quot[k] = c;
        }
        rem.truncate(dd.max(1));
        (RatPoly::new(quot), RatPoly::new(rem))
    }

    /// Rational roots with multiplicity, by the rational root theorem.
    pub fn rational_roots(&self) -> Vec<(Rational, usize)> {
        let mut p = self.clone();
        let mut out = Vec::new();
        // strip zero roots
        let mut zero_mult = 0;
        while p.degree() > 0 && p.coeffs[0].is_zero() {
            p = RatPoly::new(p.coeffs[1..].to_vec());
            zero_mult += 1;
        }
        if zero_mult > 0 {
            out.push((Rational::zero(), zero_mult));
        }
        if p.degree() == 0 {
            return out;
        }
        // scale to integer coefficients
        let lcm = p.coeffs.iter().fold(num_bigint::BigInt::one(), |acc, c| num_integer::lcm(acc, c.denom().clone()));
        let ints: Vec<num_bigint::BigInt> = p.coeffs.iter().map(|c| (c * Rational::from_integer(lcm.clone())).to_integer()).collect();
        let a0 = ints[0].abs();
        let an = ints[ints.len() - 1].abs();
        for num in divisors(&a0) {
            for den in divisors(&an) {
                for sign in [1i64, -1] {
                    let x = Rational::new(num.clone() * sign, den.clone());
                    let mut mult = 0;
                    loop {
                        if p.degree() == 0 || !p.eval(&x).is_zero() {
                            break;
                        }
                        let lin = RatPoly::new(vec![-x.clone(), Rational::one()]);
                        p = p.div_rem(&lin).0;
                        mult += 1;
                    }
                    if mult > 0 && !out.iter().any(|(y, _)| *y == x) {
                        out.push((x, mult));
                    }
                }
            }
        }
        out.sort_by(|a, b| a.0.cmp(&b.0));
        out
    }
}

fn divisors(n: &num_bigint::BigInt) -> Vec<num_bigint::BigInt> {
    use num_bigint::BigInt;
    let mut out = Vec::new();
    let mut d = BigInt::one();
    while &d * &d <= *n {
        if (n % &d).is_zero() {
            out.push(d.clone());
            let e = n / &d;
            if e != d {
                out.push(e);
            }
        }
        d += 1;
    }
    out.sort();
    out
}

/// Characteristic polynomial `det(lambda I - M)` by Faddeev–LeVerrier.
pub fn char_poly(m: &[Vec<Rational>]) -> RatPoly {
    let n = m.len();
    let mul = |a: &[Vec<Rational>], b: &[Vec<Rational>]| -> Vec<Vec<Rational>> {
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| (0..n).fold(Rational::zero(), |acc, k| acc + &a[i][k] * &b[k][j]))
                    .collect()
            })
            .collect()
    };
    // c[n] = 1, M_k = A M_{k-1} + c_{n-k+1} I, c_{n-k} = -tr(A M_k) / k
    let mut coeffs = vec![Rational::zero(); n + 1];
    coeffs[n] = Rational::one();
    let mut mk = vec![vec![Rational::zero(); n]; n];
    for k in 1..=n {
        let mut next = mul(m, &mk);
        for (i, row) in next.iter_mut().enumerate() {
            row[i] += &coeffs[n - k + 1];
        }
        mk = next;
        let am = mul(m, &mk);
        let tr = (0..n).fold(Rational::zero(), |acc, i| acc + &am[i][i]);
        coeffs[n - k] = -tr / Rational::from_i64(k as i64);
    }
    RatPoly::new(coeffs)
}

/// `a + b sqrt(d)` with `d` a non-square positive integer, or `b = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticRoot {
    pub a: Rational,
    pub b: Rational,
    pub d: u64,
}

impl QuadraticRoot {
    pub fn rational(a: Rational) -> Self {
        Self {
            a,
            b: Rational::zero(),
            d: 0,
        }
    }

    pub fn value(&self) -> f64 {
        self.a.as_f64() + self.b.as_f64() * (self.d as f64).sqrt()
    }

    /// Minimal polynomial over the rationals (monic).
    pub fn minimal_poly(&self) -> RatPoly {
        if self.b.is_zero() {
            return RatPoly::new(vec![-self.a.clone(), Rational::one()]);
        }
        // (x - a)^2 - b^2 d
        let c = &self.a * &self.a - &self.b * &self.b * Rational::from_i64(self.d as i64);
        RatPoly::new(vec![c, -Rational::from_i64(2) * &self.a, Rational::one()])
    }

    pub fn label(&self) -> String {
        if self.b.is_zero() {
            return self.a.to_string();
        }
        let sign = if self.b.is_negative() { "-" } else { "+" };
        format!("{} {} {} sqrt({})", self.a, sign, self.b.abs(), self.d)
    }
}

/// Roots of a monic quadratic `x^2 + p x + q` with non-square discriminant.
pub fn quadratic_roots(poly: &RatPoly) -> Result<[QuadraticRoot; 2]> {
    if poly.degree() != 2 || !poly.coeffs[2].is_one() {
        return Err(QcError::InvalidParameter("expected a monic quadratic".into()));
    }
    let p = &poly.coeffs[1];
    let q = &poly.coeffs[0];
    // x = -p/2 +- sqrt(p^2 - 4q)/2; write the discriminant as (u/v)^2 * d
    let disc = p * p - Rational::from_i64(4) * q;
    if !disc.is_positive() {
        return Err(QcError::InvalidParameter("discriminant is not positive".into()));
    }
    let num = disc.numer() * disc.denom();
    let den = disc.denom().clone();
    let (root_sq, d) = square_split(&num)?;
    let b = Rational::new(root_sq, den) / Rational::from_i64(2);
    let a = -p / Rational::from_i64(2);
    Ok([
        QuadraticRoot {
            a: a.clone(),
            b: b.clone(),
            d,
        },
        QuadraticRoot { a, b: -b, d },
    ])
}

/// `n = s^2 d` with `d` square-free; errors if `d` does not fit in `u64`.
fn square_split(n: &num_bigint::BigInt) -> Result<(num_bigint::BigInt, u64)> {
    use num_traits::ToPrimitive;
    let mut rest = n.to_u64().ok_or_else(|| QcError::InvalidParameter("discriminant too large".into()))?;
    let mut s: u64 = 1;
    let mut f = 2u64;
    while f * f <= rest {
        while rest % (f * f) == 0 {
            rest /= f * f;
            s *= f;
        }
        f += 1;
    }
    Ok((num_bigint::BigInt::from(s), rest))
}

/// One irreducible factor of the characteristic polynomial.
#[derive(Clone, Debug, PartialEq)]
pub struct Factor {
    pub poly: RatPoly,
    pub multiplicity: usize,
    pub roots: Vec<QuadraticRoot>,
}

/// Factors the polynomial into rational linear factors and the remaining
/// quotient. Quadratic remainders are split further when they divide by a
/// `candidates` entry.
pub fn factor_with(poly: &RatPoly, candidates: &[RatPoly]) -> Result<(Vec<Factor>, RatPoly)> {
    let mut rest = poly.clone();
    let mut out = Vec::new();
    for (x, mult) in poly.rational_roots() {
        let lin = RatPoly::new(vec![-x.clone(), Rational::one()]);
        for _ in 0..mult {
            rest = rest.div_rem(&lin).0;
        }
        out.push(Factor {
            poly: lin,
            multiplicity: mult,
            roots: vec![QuadraticRoot::rational(x)],
        });
    }
    for c in candidates {
        let mut mult = 0;
        loop {
            let (q, rem) = rest.div_rem(c);
            if !rem.is_zero() || rest.degree() < c.degree() {
                break;
            }
            rest = q;
            mult += 1;
        }
        if mult > 0 {
            let roots = if c.degree() == 2 { quadratic_roots(c)?.to_vec() } else { Vec::new() };
            out.push(Factor {
                poly: c.clone(),
                multiplicity: mult,
                roots,
            });
        }
    }
    Ok((out, rest))
}

/// `p(alpha) = 0` for `alpha` a root of `minimal`, decided by exact division.
pub fn vanishes_at(p: &RatPoly, root: &QuadraticRoot) -> bool {
    p.div_rem(&root.minimal_poly()).1.is_zero()
}

/// The two quadratics whose roots are the irrational eigenvalues.
pub fn expected_quadratics() -> [RatPoly; 2] {
    [RatPoly::from_i64(&[2, -9, 1]), RatPoly::from_i64(&[8, -11, 1])]
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectralCertificate {
    pub symmetric: bool,
    pub char_poly: RatPoly,
    pub factors: Vec<Factor>,
    /// Part of the characteristic polynomial left after factoring (1 when
    /// fully factored).
    pub cofactor: RatPoly,
    /// Whether `1` and each root of the two expected quadratics is a root.
    pub expected_roots: Vec<(QuadraticRoot, bool)>,
    pub leading_minors: Vec<Rational>,
    pub positive_definite: bool,
    /// Leading minors of `Q - I`.
    pub shifted_leading_minors: Vec<Rational>,
    /// Smallest principal minor of `Q - I` and its index set; `Q - I` is
    /// positive semidefinite iff this is nonnegative.
    pub shifted_min_principal: (Rational, Vec<usize>),
    pub min_eigenvalue: Option<QuadraticRoot>,
    /// `(lo, hi)` with `Q - lo I` positive definite and `Q - hi I` not.
    pub min_eigenvalue_bracket: (Rational, Rational),
}

impl SpectralCertificate {
    pub fn shifted_leading_nonnegative(&self) -> bool {
        self.shifted_leading_minors.iter().all(|m| !m.is_negative())
    }

    pub fn shifted_psd(&self) -> bool {
        !self.shifted_min_principal.0.is_negative()
    }

    pub fn fully_factored(&self) -> bool {
        self.cofactor.degree() == 0
    }

    pub fn multiplicity_of(&self, root: &QuadraticRoot) -> usize {
        self.factors
            .iter()
            .filter(|f| f.roots.contains(root))
            .map(|f| f.multiplicity)
            .sum()
    }

    /// Every root with its multiplicity, ascending.
    pub fn spectrum(&self) -> Vec<(QuadraticRoot, usize)> {
        let mut out: Vec<(QuadraticRoot, usize)> = self
            .factors
            .iter()
            .flat_map(|f| f.roots.iter().map(move |r| (r.clone(), f.multiplicity)))
            .collect();
        out.sort_by(|a, b| a.0.value().total_cmp(&b.0.value()));
        out
    }
}

fn is_pd(m: &[Vec<Rational>]) -> bool {
    leading_minors(m).iter().all(|d| d.is_positive())
}

/// Characteristic polynomial, factorization and definiteness checks.
pub fn certify_pd(q: &QMatrix) -> Result<SpectralCertificate> {
    let cp = char_poly(&q.entries);
    let quads = expected_quadratics();
    let (factors, cofactor) = factor_with(&cp, &quads)?;
    let mut expected_roots = vec![QuadraticRoot::rational(Rational::one())];
    for quad in &quads {
        expected_roots.extend(quadratic_roots(quad)?);
    }
    let expected_roots = expected_roots
        .into_iter()
        .map(|root| {
            let ok = vanishes_at(&cp, &root);
            (root, ok)
        })
        .collect();
    let leading = leading_minors(&q.entries);
    let positive_definite = q.is_symmetric() && leading.iter().all(|d| d.is_positive());
    let shifted = q.shifted(&Rational::one());
    let min_eigenvalue = factors
        .iter()
        .flat_map(|f| f.roots.iter().cloned())
        .min_by(|a, b| a.value().total_cmp(&b.value()));
    let bracket = eigen_bracket(q, 1 << 10);
    Ok(SpectralCertificate {
        symmetric: q.is_symmetric(),
        char_poly: cp,
        factors,
        cofactor,
        expected_roots,
        leading_minors: leading,
        positive_definite,
        shifted_leading_minors: leading_minors(&shifted),
        shifted_min_principal: min_principal_minor(&shifted),
        min_eigenvalue,
        min_eigenvalue_bracket: bracket,
    })
}

/// Bisection on `mu` with exact definiteness tests of `Q - mu I`, to a
/// bracket of width `1 / resolution`.
fn eigen_bracket(q: &QMatrix, resolution: i64) -> (Rational, Rational) {
    let mut lo = Rational::zero();
    if !is_pd(&q.entries) {
        return (lo.clone(), lo);
    }
    let mut hi = Rational::one();
    while is_pd(&q.shifted(&hi)) {
        lo = hi.clone();
        hi *= Rational::from_i64(2);
    }
    let step = Rational::new(1.into(), resolution.into());
    while &hi - &lo > step {
        let mid = (&lo + &hi) / Rational::from_i64(2);
        if is_pd(&q.shifted(&mid)) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn printed_entries() {
        let q = build_q();
        assert_eq!(*q.get(0, 0), r(5, 2));
        assert_eq!(*q.get(4, 4), r(22, 3));
        assert_eq!(*q.get(1, 4), r(10, 3));
        assert_eq!(*q.get(1, 5), r(-2, 3));
        assert_eq!(*q.get(0, 1), r(-1, 2));
        assert_eq!(*q.get(0, 6), r(-2, 1));
        assert!(q.is_symmetric());
    }

    #[test]
    fn determinant_small_cases() {
        let m = vec![vec![r(1, 1), r(2, 1)], vec![r(3, 1), r(4, 1)]];
        assert_eq!(determinant(&m), r(-2, 1));
        let p = vec![vec![r(0, 1), r(1, 1)], vec![r(1, 1), r(0, 1)]];
        assert_eq!(determinant(&p), r(-1, 1));
    }

    #[test]
    fn char_poly_of_diagonal() {
        let m = vec![vec![r(2, 1), r(0, 1)], vec![r(0, 1), r(3, 1)]];
        assert_eq!(char_poly(&m), RatPoly::from_i64(&[6, -5, 1]));
    }

    #[test]
    fn char_poly_factors_completely() {
        let cert = certify_pd(&build_q()).unwrap();
        assert_eq!(cert.char_poly.degree(), 7);
        assert!(cert.char_poly.coeffs[7].is_one());
        assert!(cert.fully_factored());
        assert!(cert.expected_roots.iter().all(|(_, ok)| *ok));
        let one = QuadraticRoot::rational(Rational::one());
        assert_eq!(cert.multiplicity_of(&one), 1);
        let [a, _] = quadratic_roots(&expected_quadratics()[0]).unwrap();
        let [b, _] = quadratic_roots(&expected_quadratics()[1]).unwrap();
        assert_eq!(cert.multiplicity_of(&a), 1);
        assert_eq!(cert.multiplicity_of(&b), 2);
        let total: usize = cert.factors.iter().map(|f| f.multiplicity * f.poly.degree()).sum();
        assert_eq!(total, 7);
    }

    #[test]
    fn quadratic_roots_are_exact() {
        let [a, b] = quadratic_roots(&expected_quadratics()[0]).unwrap();
        assert_eq!(a.d, 73);
        assert_eq!(a.a, r(9, 2));
        assert_eq!(a.b, r(1, 2));
        assert!((a.value() - 8.772001872658765).abs() < 1e-12);
        assert!(vanishes_at(&expected_quadratics()[0], &b));
        let [c, _] = quadratic_roots(&expected_quadratics()[1]).unwrap();
        assert_eq!((c.a.clone(), c.d), (r(11, 2), 89));
    }

    #[test]
    fn positive_definite_with_bracketed_minimum() {
        let cert = certify_pd(&build_q()).unwrap();
        assert!(cert.positive_definite);
        assert_eq!(cert.leading_minors[0], r(5, 2));
        let min = cert.min_eigenvalue.clone().unwrap();
        let (lo, hi) = &cert.min_eigenvalue_bracket;
        assert!(lo.as_f64() <= min.value() && min.value() <= hi.as_f64());
        assert!(cert.shifted_leading_nonnegative());
        // the smallest eigenvalue sits below 1, so Q - I is indefinite
        assert!(!cert.shifted_psd());
        assert!(min.value() < 1.0);
    }

    #[test]
    fn tampered_matrix_breaks_certificate() {
        let q = build_q().tampered(0, 0, r(-1, 1)).unwrap();
        let cert = certify_pd(&q).unwrap();
        assert!(!cert.positive_definite);
        assert!(!cert.expected_roots.iter().all(|(_, ok)| *ok));
        let asym = build_q().tampered(0, 1, r(0, 1)).unwrap();
        assert!(!asym.is_symmetric());
        assert!(!certify_pd(&asym).unwrap().positive_definite);
    }

    #[test]
    fn rational_roots_with_multiplicity() {
        // (x - 1)^2 (2x + 3) x
        let p = RatPoly::from_i64(&[0, 3, -4, -1, 2]);
        let roots = p.rational_roots();
        assert_eq!(roots, vec![(r(-3, 2), 1), (r(0, 1), 1), (r(1, 1), 2)]);
    }
}
