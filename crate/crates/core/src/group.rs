//! The quaternionic Heisenberg group `G(H) = H^n x Im H`.
//!
//! Points are stored as `(q, w)` and flattened to ambient coordinates
//! `(t^1, x^1, y^1, z^1, ..., t^n, x^n, y^n, z^n, w_1, w_2, w_3)`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{QcError, Result};
use crate::field::AffinePullback;
use crate::quat::{im_product, HVector, ImQuaternion, Quaternion};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupPoint<S> {
    pub q: HVector<S>,
    pub w: ImQuaternion<S>,
}

/// Ambient dimension `4n + 3`.
pub fn ambient_dim(n: usize) -> usize {
    4 * n + 3
}

/// Homogeneous dimension `Q = 4n + 6`.
pub fn homogeneous_dim(n: usize) -> usize {
    4 * n + 6
}

impl<S: Scalar> GroupPoint<S> {
    pub fn new(q: HVector<S>, w: ImQuaternion<S>) -> Self {
        Self { q, w }
    }

    pub fn identity(n: usize) -> Self {
        Self::new(HVector::zeros(n), ImQuaternion::zero())
    }

    pub fn n(&self) -> usize {
        self.q.len()
    }

    pub fn to_coords(&self) -> Vec<S> {
        let mut c = self.q.to_coords();
        c.extend(self.w.to_array());
        c
    }

    pub fn from_coords(c: &[S]) -> Result<Self> {
        if c.len() < 7 || (c.len() - 3) % 4 != 0 {
            return Err(QcError::InvalidParameter(format!(
                "{} is not an ambient dimension 4n+3",
                c.len()
            )));
        }
        let m = c.len() - 3;
        Ok(Self::new(
            HVector::from_coords(&c[..m]),
            ImQuaternion::from_slice(&c[m..]),
        ))
    }

    pub fn inverse(&self) -> Self {
        Self::new(self.q.neg(), -self.w.clone())
    }

    /// Uniform random point of the box `[-half_width, half_width]^{4n+3}`.
    pub fn random<R: Rng>(n: usize, half_width: f64, rng: &mut R) -> Self {
        let c: Vec<S> = (0..ambient_dim(n))
            .map(|_| S::from_f64(rng.gen_range(-half_width..=half_width)))
            .collect();
        Self::from_coords(&c).expect("valid dimension")
    }
}

/// `(q0, w0) o (q, w) = (q0 + q, w + w0 + 2 Im(q0 conj(q)))`.
pub fn group_multiply<S: Scalar>(a: &GroupPoint<S>, b: &GroupPoint<S>) -> Result<GroupPoint<S>> {
    if a.n() != b.n() {
        return Err(QcError::DimensionMismatch {
            expected: a.n(),
            found: b.n(),
        });
    }
    let twist = im_product(&a.q, &b.q)?.scale(&S::two());
    Ok(GroupPoint::new(
        a.q.add(&b.q)?,
        b.w.clone() + a.w.clone() + twist,
    ))
}

/// Parabolic dilation `(q, w) -> (lambda q, lambda^2 w)`.
pub fn dilate<S: Scalar>(lambda: &S, p: &GroupPoint<S>) -> Result<GroupPoint<S>> {
    if !(*lambda > S::zero()) {
        return Err(QcError::InvalidParameter(format!(
            "dilation factor must be positive, got {}",
            lambda.as_f64()
        )));
    }
    let l2 = lambda.clone() * lambda.clone();
    Ok(GroupPoint::new(p.q.scale(lambda), p.w.scale(&l2)))
}

/// Left translation `p -> p0 o p` as an affine map `M p + b` on ambient
/// coordinates.
pub fn left_translation_affine<S: Scalar>(p0: &GroupPoint<S>) -> (Vec<Vec<S>>, Vec<S>) {
    let n = p0.n();
    let d = ambient_dim(n);
    let mut m = vec![vec![S::zero(); d]; d];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = S::one();
    }
    for a in 0..n {
        for u in 0..4 {
            // d/dq coordinate (a, u) of 2 Im(q0_a conj(q_a))
            let e = Quaternion::<S>::basis(u);
            let im = (&p0.q.components[a] * &e.conj()).im();
            for s in 0..3 {
                m[4 * n + s][4 * a + u] = S::two() * im.component(s).clone();
            }
        }
    }
    (m, p0.to_coords())
}

/// Dilation `delta_lambda` as a diagonal matrix on ambient coordinates.
pub fn dilation_matrix<S: Scalar>(n: usize, lambda: &S) -> Vec<Vec<S>> {
    let d = ambient_dim(n);
    let l2 = lambda.clone() * lambda.clone();
    (0..d)
        .map(|i| {
            (0..d)
                .map(|j| {
                    if i != j {
                        S::zero()
                    } else if i < 4 * n {
                        lambda.clone()
                    } else {
                        l2.clone()
                    }
                })
                .collect()
        })
        .collect()
}

/// `f o L_{p0}`.
pub fn left_translate_field<S: Scalar, F>(f: F, p0: &GroupPoint<S>) -> AffinePullback<S, F> {
    let (matrix, offset) = left_translation_affine(p0);
    AffinePullback {
        inner: f,
        matrix,
        offset,
        scale: S::one(),
    }
}

/// `scale * f o delta_lambda`.
pub fn dilate_field<S: Scalar, F>(f: F, n: usize, lambda: &S, scale: S) -> AffinePullback<S, F> {
    AffinePullback {
        inner: f,
        matrix: dilation_matrix(n, lambda),
        offset: vec![S::zero(); ambient_dim(n)],
        scale,
    }
}
