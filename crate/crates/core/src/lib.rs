//! Geometry of the quaternionic Heisenberg group and the quaternionic contact
//! Yamabe problem: quaternion algebra, second-order jets, the left-invariant
//! horizontal frame, qc torsion algebra, the explicit extremals and the
//! quadratic form controlling the divergence argument.

pub mod error;
pub mod field;
pub mod frame;
pub mod functional;
pub mod group;
pub mod jet;
pub mod ops;
pub mod poly;
pub mod qmatrix;
pub mod quat;
pub mod scalar;
pub mod tensors;
pub mod yamabe;

pub use error::{QcError, Result};
pub use field::ScalarField;
pub use frame::{build_frame, build_frame_f64, frame_audit, AuditReport, HorizontalFrame};
pub use group::{dilate, group_multiply, GroupPoint};
pub use jet::Jet2;
pub use poly::Poly;
pub use quat::{im_product, HVector, ImQuaternion, Quaternion};
pub use scalar::{Rational, Real, Scalar};

pub type Quat = Quaternion<f64>;
pub type QuatQ = Quaternion<Rational>;
pub type Point = GroupPoint<f64>;
pub type PointQ = GroupPoint<Rational>;
pub type Jet = Jet2<f64>;
pub type JetQ = Jet2<Rational>;
pub type Frame = HorizontalFrame<f64>;
pub type FrameQ = HorizontalFrame<Rational>;
