//! Matrix Lie groups for state evaluation: SO(3), SE(3) and the extended
//! pose group SE_2(3) bundling rotation, translation and linear velocity.
//!
//! Rotations are backed by a unit quaternion so that composing an element
//! with its own inverse yields the identity *exactly* (the Hamilton product
//! of `q` with `conj(q)` has a bitwise-zero vector part). Self-consistency
//! checks such as the error of a trajectory against itself therefore come
//! out as exact zeros instead of accumulated rounding noise. The 3x3 matrix
//! view is available through [`Rotation::matrix`].
//!
//! Extended poses are stored as `(rotation, translation, velocity)`; the
//! 5x5 homogeneous embedding exists only as a conversion for tests and
//! cross-checks ([`ExtendedPose::to_matrix`]).

use nalgebra::{Matrix3, Matrix4, Matrix5, Quaternion, UnitQuaternion, Vector3};
use thiserror::Error;

use crate::scalar::{real, Real};

/// Angle below which exp/log switch to second-order Taylor expansions.
const TAYLOR_THRESHOLD: f64 = 1e-5;

/// Angles this close to pi get the deterministic axis-sign convention.
const PI_CONVENTION_THRESHOLD: f64 = 1e-10;

#[derive(Debug, Error, PartialEq)]
pub enum LieError {
    /// Input to `so3_vee` was not skew-symmetric within tolerance.
    #[error("matrix is not skew-symmetric (max |S + S^T| entry = {asymmetry:.3e})")]
    NotSkewSymmetric { asymmetry: f64 },
    /// Matrix failed the orthonormality or determinant check.
    #[error("matrix is not a rotation: {0}")]
    InvalidRotation(&'static str),
    /// Quaternion has (near-)zero norm and cannot be normalized.
    #[error("quaternion norm too small to normalize")]
    ZeroQuaternion,
}

/// A rotation in SO(3).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rotation<T: Real>(UnitQuaternion<T>);

impl<T: Real> Rotation<T> {
    pub fn identity() -> Self {
        Rotation(UnitQuaternion::identity())
    }

    /// Builds a rotation from a scalar-last (Hamilton) quaternion,
    /// normalizing it. Components already unit to within 1e-8 are kept
    /// bit-exact, which makes text round-trips stable; the matrix and
    /// rotation formulas carry the norm factor, so the rotation invariants
    /// hold either way. Fails only for a (near-)zero quaternion.
    pub fn from_quaternion_xyzw(x: T, y: T, z: T, w: T) -> Result<Self, LieError> {
        let q = Quaternion::new(w, x, y, z);
        let n = q.norm();
        if n < real(1e-12) {
            return Err(LieError::ZeroQuaternion);
        }
        let q = if (n - T::one()).abs() <= real(1e-8) {
            q
        } else {
            q / n
        };
        Ok(Rotation(UnitQuaternion::new_unchecked(q)))
    }

    /// Validates `m^T m = I` (1e-9 per entry) and `det m = +1` (1e-9)
    /// before converting.
    pub fn from_matrix(m: &Matrix3<T>) -> Result<Self, LieError> {
        let gram = m.transpose() * m;
        let tol = real::<T>(1e-9);
        for i in 0..3 {
            for j in 0..3 {
                let target = if i == j { T::one() } else { T::zero() };
                if (gram[(i, j)] - target).abs() > tol {
                    return Err(LieError::InvalidRotation("columns are not orthonormal"));
                }
            }
        }
        if (m.determinant() - T::one()).abs() > tol {
            return Err(LieError::InvalidRotation("determinant is not +1"));
        }
        Ok(Self::from_matrix_unchecked(m))
    }

    /// Converts without validating; the caller guarantees `m` is a rotation.
    pub fn from_matrix_unchecked(m: &Matrix3<T>) -> Self {
        let r = nalgebra::Rotation3::from_matrix_unchecked(*m);
        Rotation(UnitQuaternion::from_rotation_matrix(&r))
    }

    #[rustfmt::skip]
    pub fn matrix(&self) -> Matrix3<T> {
        let q = self.0.quaternion();
        let (w, x, y, z) = (q.w, q.i, q.j, q.k);
        let s = real::<T>(2.0) / (w * w + x * x + y * y + z * z);
        Matrix3::new(
            T::one() - s * (y * y + z * z), s * (x * y - w * z),            s * (x * z + w * y),
            s * (x * y + w * z),            T::one() - s * (x * x + z * z), s * (y * z - w * x),
            s * (x * z - w * y),            s * (y * z + w * x),            T::one() - s * (x * x + y * y),
        )
    }

    /// Scalar-last quaternion components, canonicalized to `w >= 0`.
    pub fn quaternion_xyzw(&self) -> [T; 4] {
        let q = self.0.quaternion();
        if q.w < T::zero() {
            [-q.i, -q.j, -q.k, -q.w]
        } else {
            [q.i, q.j, q.k, q.w]
        }
    }

    /// Hamilton product, grouped as `(w1 v2 + v1 w2) + v1 x v2` per
    /// component so that composing with the conjugate cancels term by
    /// term and yields an exactly-zero imaginary part.
    pub fn compose(&self, other: &Self) -> Self {
        let a = self.0.quaternion();
        let b = other.0.quaternion();
        let w = a.w * b.w - (a.i * b.i + a.j * b.j + a.k * b.k);
        let x = (a.w * b.i + a.i * b.w) + (a.j * b.k - a.k * b.j);
        let y = (a.w * b.j + a.j * b.w) + (a.k * b.i - a.i * b.k);
        let z = (a.w * b.k + a.k * b.w) + (a.i * b.j - a.j * b.i);
        Rotation(UnitQuaternion::new_unchecked(Quaternion::new(w, x, y, z)))
    }

    /// Inverse by plain conjugation. The components are negated bitwise,
    /// so `r.inverse().compose(&r)` has an exactly-zero imaginary part and
    /// converts to the exact identity matrix.
    pub fn inverse(&self) -> Self {
        Rotation(UnitQuaternion::new_unchecked(
            self.0.quaternion().conjugate(),
        ))
    }

    /// Rotates a vector: `u + s w (v x u) + s v x (v x u)` for q = (w, v)
    /// with `s = 2 / |q|^2`.
    pub fn rotate(&self, u: &Vector3<T>) -> Vector3<T> {
        let q = self.0.quaternion();
        let v = q.imag();
        let s = real::<T>(2.0) / q.norm_squared();
        let t = v.cross(u) * s;
        u + t * q.w + v.cross(&t)
    }
}

/// A rigid transformation in SE(3).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose<T: Real> {
    pub rotation: Rotation<T>,
    pub translation: Vector3<T>,
}

impl<T: Real> Pose<T> {
    pub fn identity() -> Self {
        Pose {
            rotation: Rotation::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: Rotation<T>, translation: Vector3<T>) -> Self {
        Pose {
            rotation,
            translation,
        }
    }

    pub fn compose(&self, other: &Self) -> Self {
        Pose {
            rotation: self.rotation.compose(&other.rotation),
            translation: self.rotation.rotate(&other.translation) + self.translation,
        }
    }

    pub fn inverse(&self) -> Self {
        let rinv = self.rotation.inverse();
        Pose {
            rotation: rinv,
            translation: -rinv.rotate(&self.translation),
        }
    }

    /// 4x4 homogeneous embedding.
    pub fn to_matrix(&self) -> Matrix4<T> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0)
            .copy_from(&self.rotation.matrix());
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }
}

/// An element of SE_2(3): rotation, translation and linear velocity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExtendedPose<T: Real> {
    pub rotation: Rotation<T>,
    pub translation: Vector3<T>,
    pub velocity: Vector3<T>,
}

impl<T: Real> ExtendedPose<T> {
    pub fn identity() -> Self {
        ExtendedPose {
            rotation: Rotation::identity(),
            translation: Vector3::zeros(),
            velocity: Vector3::zeros(),
        }
    }

    pub fn new(rotation: Rotation<T>, translation: Vector3<T>, velocity: Vector3<T>) -> Self {
        ExtendedPose {
            rotation,
            translation,
            velocity,
        }
    }

    pub fn pose(&self) -> Pose<T> {
        Pose::new(self.rotation, self.translation)
    }

    /// Group composition: `(R1 R2, R1 X2 + X1, R1 V2 + V1)`.
    pub fn compose(&self, other: &Self) -> Self {
        ExtendedPose {
            rotation: self.rotation.compose(&other.rotation),
            translation: self.rotation.rotate(&other.translation) + self.translation,
            velocity: self.rotation.rotate(&other.velocity) + self.velocity,
        }
    }

    /// Group inverse: `(R^-1, -R^-1 X, -R^-1 V)`.
    pub fn inverse(&self) -> Self {
        let rinv = self.rotation.inverse();
        ExtendedPose {
            rotation: rinv,
            translation: -rinv.rotate(&self.translation),
            velocity: -rinv.rotate(&self.velocity),
        }
    }

    /// 5x5 homogeneous embedding `[R X V; 0 1 0; 0 0 1]` (test conversion).
    pub fn to_matrix(&self) -> Matrix5<T> {
        let mut m = Matrix5::identity();
        m.fixed_view_mut::<3, 3>(0, 0)
            .copy_from(&self.rotation.matrix());
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m.fixed_view_mut::<3, 1>(0, 4).copy_from(&self.velocity);
        m
    }

    /// Frobenius norm of the embedded element minus the identity.
    ///
    /// The bottom two rows of `E - I` vanish, so this reduces to
    /// `sqrt(|R - I|_F^2 + |t|^2 + |v|^2)`.
    pub fn frobenius_error(&self) -> T {
        let dr = self.rotation.matrix() - Matrix3::identity();
        let rot_sq = dr.iter().map(|e| *e * *e).fold(T::zero(), |a, b| a + b);
        (rot_sq + self.translation.norm_squared() + self.velocity.norm_squared()).sqrt()
    }
}

/// Hat operator: maps a 3-vector to the skew-symmetric matrix `w^` with
/// `w^ u = w x u`.
#[rustfmt::skip]
pub fn so3_hat<T: Real>(w: &Vector3<T>) -> Matrix3<T> {
    let z = T::zero();
    Matrix3::new(
        z,    -w.z,  w.y,
        w.z,   z,   -w.x,
       -w.y,   w.x,  z,
    )
}

/// Vee operator, inverse of [`so3_hat`]. Rejects matrices whose symmetric
/// part exceeds 1e-9 in any entry.
pub fn so3_vee<T: Real>(m: &Matrix3<T>) -> Result<Vector3<T>, LieError> {
    let sym = m + m.transpose();
    let asymmetry = sym.iter().fold(T::zero(), |a, e| a.max(e.abs()));
    if asymmetry >= real(1e-9) {
        return Err(LieError::NotSkewSymmetric {
            asymmetry: asymmetry.to_f64().unwrap_or(f64::NAN),
        });
    }
    let half = real::<T>(0.5);
    Ok(Vector3::new(
        (m[(2, 1)] - m[(1, 2)]) * half,
        (m[(0, 2)] - m[(2, 0)]) * half,
        (m[(1, 0)] - m[(0, 1)]) * half,
    ))
}

/// Exponential map so(3) -> SO(3) for a rotation vector (axis * angle).
pub fn so3_exp<T: Real>(w: &Vector3<T>) -> Rotation<T> {
    let theta_sq = w.norm_squared();
    let (re, im) = if theta_sq < real(TAYLOR_THRESHOLD * TAYLOR_THRESHOLD) {
        // cos(t/2) and sin(t/2)/t to second order.
        (
            T::one() - theta_sq * real(0.125),
            real::<T>(0.5) - theta_sq * real(1.0 / 48.0),
        )
    } else {
        let theta = theta_sq.sqrt();
        let half = theta * real(0.5);
        (half.cos(), half.sin() / theta)
    };
    Rotation(UnitQuaternion::new_unchecked(Quaternion::from_parts(
        re,
        w * im,
    )))
}

/// Logarithm map SO(3) -> so(3). Returns the rotation vector with
/// `|w| <= pi`; at a half-turn the axis sign is fixed by making the first
/// nonzero component positive.
pub fn so3_log<T: Real>(r: &Rotation<T>) -> Vector3<T> {
    let q = r.0.quaternion();
    // Canonicalize to w >= 0 so the angle lands in [0, pi].
    let (re, im) = if q.w < T::zero() {
        (-q.w, -q.imag())
    } else {
        (q.w, q.imag())
    };
    let vn_sq = im.norm_squared();
    let half_taylor = real::<T>(0.5 * TAYLOR_THRESHOLD);
    let mut out = if vn_sq < half_taylor * half_taylor {
        // theta/2 ~ |v|/w: 2/w * (1 - |v|^2 / (3 w^2)) to second order.
        let f = real::<T>(2.0) / re * (T::one() - vn_sq / (real::<T>(3.0) * re * re));
        im * f
    } else {
        let vn = vn_sq.sqrt();
        let theta = real::<T>(2.0) * vn.atan2(re);
        im * (theta / vn)
    };
    let theta = out.norm();
    if theta > T::pi() - real(PI_CONVENTION_THRESHOLD) {
        // Double-valued at pi: pick the representative whose first nonzero
        // component is positive.
        for k in 0..3 {
            if out[k] != T::zero() {
                if out[k] < T::zero() {
                    out = -out;
                }
                break;
            }
        }
    }
    out
}
