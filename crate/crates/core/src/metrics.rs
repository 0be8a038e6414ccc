//! Trajectory alignment and evaluation metrics.
//!
//! Three metrics are provided over an associated pair of trajectories:
//!
//! * **ATE** - absolute trajectory error: translation norm of
//!   `Q_i^-1 S P_i` per step, after similarity alignment `S`.
//! * **RPE** - relative pose error over a window of `delta` steps:
//!   translation norm of `(Q_i^-1 Q_{i+d})^-1 (P_i^-1 P_{i+d})`, no
//!   alignment.
//! * **ASE** - absolute state error: Frobenius norm of the SE_2(3) error
//!   element `Q_i^-1 S P_i` minus the identity, capturing rotation,
//!   translation and linear velocity in one number.
//!
//! Alignment is the closed-form similarity fit (Umeyama) on the paired
//! translations; the transform acts on a state as `R' = R_s R`,
//! `p' = s R_s p + t`, `v' = s R_s v`.

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

use crate::liegroups::{ExtendedPose, Pose, Rotation};
use crate::scalar::{real, Real};
use crate::trajectory::{AssociationPairing, Trajectory};

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("alignment needs at least {needed} point pairs, got {got}")]
    TooFewPairs { got: usize, needed: usize },
    #[error("point pairs are degenerate (coincident or collinear), alignment is ill-posed")]
    DegenerateGeometry,
    #[error("{which} trajectory carries no velocity; synthesize one first")]
    MissingVelocity { which: &'static str },
    #[error("association produced no pairs")]
    NoOverlap,
    #[error("delta {delta} too large for {pairs} associated pairs")]
    DeltaTooLarge { delta: usize, pairs: usize },
    #[error("duplicate timestamps make finite differences ill-defined")]
    DuplicateTimestamps,
}

/// How trajectories are aligned before an absolute metric is computed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AlignMode {
    /// Similarity transform: scale, rotation and translation.
    Sim3,
    /// Rigid transform: rotation and translation, scale fixed to 1.
    Se3,
    /// No alignment.
    Identity,
}

/// Similarity transform `{s, R, t}` used for trajectory alignment.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimilarityTransform<T: Real> {
    pub scale: T,
    pub rotation: Rotation<T>,
    pub translation: Vector3<T>,
}

impl<T: Real> SimilarityTransform<T> {
    pub fn identity() -> Self {
        SimilarityTransform {
            scale: T::one(),
            rotation: Rotation::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn apply_point(&self, p: &Vector3<T>) -> Vector3<T> {
        self.rotation.rotate(p) * self.scale + self.translation
    }

    /// Aligns a full state: `R' = R_s R`, `p' = s R_s p + t`,
    /// `v' = s R_s v`. Velocity picks up scale and rotation but no
    /// translation offset.
    pub fn apply(&self, x: &ExtendedPose<T>) -> ExtendedPose<T> {
        ExtendedPose::new(
            self.rotation.compose(&x.rotation),
            self.apply_point(&x.translation),
            self.rotation.rotate(&x.velocity) * self.scale,
        )
    }

    pub fn apply_pose(&self, x: &Pose<T>) -> Pose<T> {
        Pose::new(
            self.rotation.compose(&x.rotation),
            self.apply_point(&x.translation),
        )
    }
}

/// Per-step error series with its summary statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricReport<T: Real> {
    pub per_step: Vec<T>,
    pub rmse: T,
    pub std: T,
    pub median: T,
    pub count: usize,
}

impl<T: Real> MetricReport<T> {
    /// Summarizes a non-empty error series. `std` is the population
    /// standard deviation, matching the 1/N convention of the RMSE;
    /// the median of an even-length series is the mean of the two middle
    /// values.
    pub fn from_errors(per_step: Vec<T>) -> Self {
        assert!(!per_step.is_empty(), "error series must be non-empty");
        let count = per_step.len();
        let n = real::<T>(count as f64);
        let mean_sq = per_step
            .iter()
            .map(|e| *e * *e)
            .fold(T::zero(), |a, b| a + b)
            / n;
        let mean = per_step.iter().copied().fold(T::zero(), |a, b| a + b) / n;
        let rmse = mean_sq.sqrt();
        let std = (mean_sq - mean * mean).max(T::zero()).sqrt();
        let mut sorted = per_step.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        let median = if count % 2 == 1 {
            sorted[count / 2]
        } else {
            (sorted[count / 2 - 1] + sorted[count / 2]) * real(0.5)
        };
        MetricReport {
            per_step,
            rmse,
            std,
            median,
            count,
        }
    }
}

/// Closed-form least-squares similarity alignment of paired points:
/// minimizes `sum_i |ref_i - (s R est_i + t)|^2`. `Se3` fixes `s = 1`;
/// `Identity` returns the identity transform without looking at the data.
///
/// Bitwise-identical point sets short-circuit to the exact identity, so
/// aligning a trajectory to itself is exact in every mode.
pub fn umeyama_align<T: Real>(
    est: &[Vector3<T>],
    reference: &[Vector3<T>],
    mode: AlignMode,
) -> Result<SimilarityTransform<T>, MetricError> {
    assert_eq!(est.len(), reference.len(), "point sets must be paired");
    if mode == AlignMode::Identity {
        return Ok(SimilarityTransform::identity());
    }
    let n = est.len();
    if n < 3 {
        return Err(MetricError::TooFewPairs { got: n, needed: 3 });
    }
    if est == reference {
        return Ok(SimilarityTransform::identity());
    }

    let inv_n = T::one() / real::<T>(n as f64);
    let mu_est = est.iter().fold(Vector3::zeros(), |a, p| a + p) * inv_n;
    let mu_ref = reference.iter().fold(Vector3::zeros(), |a, p| a + p) * inv_n;

    let mut cov = Matrix3::zeros();
    let mut var_est = T::zero();
    for (e, r) in est.iter().zip(reference) {
        let de = e - mu_est;
        let dr = r - mu_ref;
        cov += dr * de.transpose();
        var_est += de.norm_squared();
    }
    cov *= inv_n;
    var_est *= inv_n;

    let svd = cov.svd(true, true);
    let u = svd.u.ok_or(MetricError::DegenerateGeometry)?;
    let v_t = svd.v_t.ok_or(MetricError::DegenerateGeometry)?;
    let d = svd.singular_values;

    let d_max = d.iter().fold(T::zero(), |a, s| a.max(*s));
    let mut min_idx = 0;
    for k in 1..3 {
        if d[k] < d[min_idx] {
            min_idx = k;
        }
    }
    // Rank < 2 (coincident or collinear points) leaves the rotation
    // unconstrained about the point axis.
    let second = (0..3)
        .filter(|&k| k != min_idx)
        .map(|k| d[k])
        .fold(d_max, T::min);
    if d_max == T::zero() || second <= d_max * real(1e-9) || var_est == T::zero() {
        return Err(MetricError::DegenerateGeometry);
    }

    // Umeyama's det correction: flip the direction of least extent when
    // U V^T would be a reflection.
    let mut signs = [T::one(), T::one(), T::one()];
    if (u.determinant() * v_t.determinant()) < T::zero() {
        signs[min_idx] = -T::one();
    }
    let mut s_mat = Matrix3::zeros();
    for k in 0..3 {
        s_mat[(k, k)] = signs[k];
    }
    let r = u * s_mat * v_t;
    let rotation = Rotation::from_matrix(&r).map_err(|_| MetricError::DegenerateGeometry)?;

    let scale = match mode {
        AlignMode::Sim3 => (d[0] * signs[0] + d[1] * signs[1] + d[2] * signs[2]) / var_est,
        _ => T::one(),
    };
    if scale.partial_cmp(&T::zero()) != Some(std::cmp::Ordering::Greater) {
        return Err(MetricError::DegenerateGeometry);
    }
    let translation = mu_ref - rotation.rotate(&mu_est) * scale;
    Ok(SimilarityTransform {
        scale,
        rotation,
        translation,
    })
}

fn paired_translations<T: Real>(
    est: &Trajectory<T>,
    reference: &Trajectory<T>,
    pairing: &AssociationPairing<T>,
) -> (Vec<Vector3<T>>, Vec<Vector3<T>>) {
    let mut e = Vec::with_capacity(pairing.len());
    let mut r = Vec::with_capacity(pairing.len());
    for &(i, j) in pairing.pairs() {
        e.push(est.states()[i].state.translation);
        r.push(reference.states()[j].state.translation);
    }
    (e, r)
}

/// Absolute state error over SE_2(3): per step the Frobenius norm of
/// `Q_i^-1 S P_i - I`, covering rotation, translation and velocity.
/// The alignment is fitted on the paired translations first and returned
/// alongside the report.
pub fn ase<T: Real>(
    est: &Trajectory<T>,
    reference: &Trajectory<T>,
    pairing: &AssociationPairing<T>,
    mode: AlignMode,
) -> Result<(MetricReport<T>, SimilarityTransform<T>), MetricError> {
    if !est.has_velocity() {
        return Err(MetricError::MissingVelocity { which: "estimated" });
    }
    if !reference.has_velocity() {
        return Err(MetricError::MissingVelocity { which: "reference" });
    }
    if pairing.is_empty() {
        return Err(MetricError::NoOverlap);
    }
    let (est_pts, ref_pts) = paired_translations(est, reference, pairing);
    let transform = umeyama_align(&est_pts, &ref_pts, mode)?;
    let errors = pairing
        .pairs()
        .iter()
        .map(|&(i, j)| {
            let aligned = transform.apply(&est.states()[i].state);
            reference.states()[j]
                .state
                .inverse()
                .compose(&aligned)
                .frobenius_error()
        })
        .collect();
    Ok((MetricReport::from_errors(errors), transform))
}

/// Absolute trajectory error over SE(3): per step the translation norm of
/// `Q_i^-1 S P_i`.
pub fn ate<T: Real>(
    est: &Trajectory<T>,
    reference: &Trajectory<T>,
    pairing: &AssociationPairing<T>,
    mode: AlignMode,
) -> Result<(MetricReport<T>, SimilarityTransform<T>), MetricError> {
    if pairing.is_empty() {
        return Err(MetricError::NoOverlap);
    }
    let (est_pts, ref_pts) = paired_translations(est, reference, pairing);
    let transform = umeyama_align(&est_pts, &ref_pts, mode)?;
    let errors = pairing
        .pairs()
        .iter()
        .map(|&(i, j)| {
            let aligned = transform.apply_pose(&est.states()[i].state.pose());
            reference.states()[j]
                .state
                .pose()
                .inverse()
                .compose(&aligned)
                .translation
                .norm()
        })
        .collect();
    Ok((MetricReport::from_errors(errors), transform))
}

/// Relative pose error over windows of `delta` associated steps: per step
/// the translation norm of `(Q_i^-1 Q_{i+d})^-1 (P_i^-1 P_{i+d})`. There
/// are `M = N - delta` terms and no alignment is applied.
pub fn rpe<T: Real>(
    est: &Trajectory<T>,
    reference: &Trajectory<T>,
    pairing: &AssociationPairing<T>,
    delta: usize,
) -> Result<MetricReport<T>, MetricError> {
    if pairing.is_empty() {
        return Err(MetricError::NoOverlap);
    }
    if delta == 0 || pairing.len() <= delta {
        return Err(MetricError::DeltaTooLarge {
            delta,
            pairs: pairing.len(),
        });
    }
    let pairs = pairing.pairs();
    let errors = (0..pairs.len() - delta)
        .map(|k| {
            let (i0, j0) = pairs[k];
            let (i1, j1) = pairs[k + delta];
            let ref_rel = reference.states()[j0]
                .state
                .pose()
                .inverse()
                .compose(&reference.states()[j1].state.pose());
            let est_rel = est.states()[i0]
                .state
                .pose()
                .inverse()
                .compose(&est.states()[i1].state.pose());
            ref_rel.inverse().compose(&est_rel).translation.norm()
        })
        .collect();
    Ok(MetricReport::from_errors(errors))
}

/// Centered finite-difference velocity baseline: interior states use
/// `(p_{i+1} - p_{i-1}) / (t_{i+1} - t_{i-1})`, the endpoints one-sided
/// first-order differences.
pub fn finite_difference_velocity<T: Real>(
    traj: &Trajectory<T>,
) -> Result<Vec<Vector3<T>>, MetricError> {
    let states = traj.states();
    let n = states.len();
    if n < 2 {
        return Err(MetricError::TooFewPairs { got: n, needed: 2 });
    }
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let (lo, hi) = if i == 0 {
            (0, 1)
        } else if i == n - 1 {
            (n - 2, n - 1)
        } else {
            (i - 1, i + 1)
        };
        let dt = states[hi].t - states[lo].t;
        if dt == T::zero() {
            return Err(MetricError::DuplicateTimestamps);
        }
        out.push((states[hi].state.translation - states[lo].state.translation) / dt);
    }
    Ok(out)
}
