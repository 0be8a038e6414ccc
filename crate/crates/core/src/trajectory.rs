//! Trajectory data model and I/O: TUM-style text parsing/writing, greedy
//! timestamp association, pseudospectral fitting of the translation
//! channels, velocity synthesis, and a compact binary fit format.
//!
//! The text interchange format is one state per line,
//! `t tx ty tz qx qy qz qw [vx vy vz]`, space-separated with `#` comments
//! and a Hamilton scalar-last quaternion. The optional three velocity
//! columns are an extension used for evaluated state estimates and for
//! synthesized reference velocities.

use nalgebra::{DMatrix, Vector3};
use thiserror::Error;

use crate::chebyshev::{
    fit_pseudospectral, ChebyshevError, ChebyshevFit, Domain, SampleSet, Weights,
};
use crate::liegroups::{ExtendedPose, Rotation};
use crate::scalar::{real, Real};

/// Quaternion norms may drift this far from 1 before a line is rejected.
const QUAT_DRIFT_TOL: f64 = 1e-3;

/// Timestamps above this are taken to be integer nanoseconds and rescaled.
const NANOSECOND_THRESHOLD: f64 = 1e12;

/// Magic bytes of the binary fit format.
const FIT_MAGIC: &[u8; 4] = b"CBF1";
const FIT_VERSION: u8 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum TrajectoryError {
    #[error("line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("line {line}: timestamps must be strictly increasing")]
    NonMonotoneTime { line: usize },
    #[error("line {line}: quaternion norm {norm} drifts more than 1e-3 from unit")]
    DenormalizedQuaternion { line: usize, norm: f64 },
    #[error("trajectory must contain at least one state")]
    Empty,
    #[error("no timestamp pairs within the association tolerance")]
    NoOverlap,
    #[error("not a fit file (bad magic)")]
    BadMagic,
    #[error("unsupported fit file version {version}")]
    VersionMismatch { version: u8 },
    #[error("fit file payload truncated")]
    TruncatedPayload,
    #[error("fit file has trailing bytes")]
    TrailingBytes,
    #[error("fit file header invalid: {0}")]
    InvalidHeader(String),
    #[error(transparent)]
    Fit(#[from] ChebyshevError),
}

/// One timestamped extended pose.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StampedState<T: Real> {
    pub t: T,
    pub state: ExtendedPose<T>,
}

/// A time-ordered, non-empty sequence of stamped states.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory<T: Real> {
    states: Vec<StampedState<T>>,
    has_velocity: bool,
}

impl<T: Real> Trajectory<T> {
    /// Timestamps must be finite and strictly increasing; at least one
    /// state is required.
    pub fn new(states: Vec<StampedState<T>>, has_velocity: bool) -> Result<Self, TrajectoryError> {
        if states.is_empty() {
            return Err(TrajectoryError::Empty);
        }
        for (i, pair) in states.windows(2).enumerate() {
            if pair[0].t.partial_cmp(&pair[1].t) != Some(std::cmp::Ordering::Less) {
                return Err(TrajectoryError::NonMonotoneTime { line: i + 2 });
            }
        }
        Ok(Trajectory {
            states,
            has_velocity,
        })
    }

    pub fn states(&self) -> &[StampedState<T>] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn has_velocity(&self) -> bool {
        self.has_velocity
    }

    pub fn times(&self) -> Vec<T> {
        self.states.iter().map(|s| s.t).collect()
    }

    pub fn translations(&self) -> Vec<Vector3<T>> {
        self.states.iter().map(|s| s.state.translation).collect()
    }

    /// Least-squares Chebyshev fit of the three translation channels over
    /// the trajectory's time span (or an explicitly widened domain).
    pub fn fit_translation(
        &self,
        degree: usize,
        options: &FitOptions<T>,
    ) -> Result<ChebyshevFit<T>, ChebyshevError> {
        fit_trajectory_translation(self, degree, options)
    }

    /// Replaces the velocity of every state with the derivative of a
    /// degree-`degree` translation fit evaluated at the state's timestamp.
    pub fn synthesize_velocity(
        &self,
        degree: usize,
        options: &FitOptions<T>,
    ) -> Result<Trajectory<T>, ChebyshevError> {
        let fit = fit_trajectory_translation(self, degree, options)?;
        let velocities = compute_velocity(&fit, &self.times())?;
        let states = self
            .states
            .iter()
            .zip(velocities)
            .map(|(s, v)| StampedState {
                t: s.t,
                state: ExtendedPose::new(s.state.rotation, s.state.translation, v),
            })
            .collect();
        Ok(Trajectory {
            states,
            has_velocity: true,
        })
    }
}

/// Index pairs matching estimated to reference states, time ordered.
#[derive(Clone, Debug, PartialEq)]
pub struct AssociationPairing<T: Real> {
    pairs: Vec<(usize, usize)>,
    max_diff: T,
}

impl<T: Real> AssociationPairing<T> {
    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn max_diff(&self) -> T {
        self.max_diff
    }
}

/// Parses TUM-format text. Lines beginning with `#` and blank lines are
/// skipped; each data line must have exactly 8 fields, or 11 when
/// `with_velocity` is set. Quaternions are normalized on read, tolerating
/// up to 1e-3 of norm drift. Integer-nanosecond timestamps are detected by
/// magnitude and rescaled to seconds.
pub fn parse_tum<T: Real>(
    text: &str,
    with_velocity: bool,
) -> Result<Trajectory<T>, TrajectoryError> {
    let expected = if with_velocity { 11 } else { 8 };
    let mut states: Vec<StampedState<T>> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() != expected {
            return Err(TrajectoryError::MalformedLine {
                line,
                reason: format!("expected {expected} fields, found {}", fields.len()),
            });
        }
        let mut parsed = [0.0f64; 11];
        for (k, field) in fields.iter().enumerate() {
            parsed[k] = field
                .parse::<f64>()
                .map_err(|_| TrajectoryError::MalformedLine {
                    line,
                    reason: format!("field {} is not a number: {field:?}", k + 1),
                })?;
            if !parsed[k].is_finite() {
                return Err(TrajectoryError::MalformedLine {
                    line,
                    reason: format!("field {} is not finite", k + 1),
                });
            }
        }
        let mut t = parsed[0];
        if t.abs() > NANOSECOND_THRESHOLD {
            t /= 1e9;
        }
        let quat_norm = (parsed[4] * parsed[4]
            + parsed[5] * parsed[5]
            + parsed[6] * parsed[6]
            + parsed[7] * parsed[7])
            .sqrt();
        if (quat_norm - 1.0).abs() > QUAT_DRIFT_TOL {
            return Err(TrajectoryError::DenormalizedQuaternion {
                line,
                norm: quat_norm,
            });
        }
        let rotation = Rotation::from_quaternion_xyzw(
            real::<T>(parsed[4]),
            real::<T>(parsed[5]),
            real::<T>(parsed[6]),
            real::<T>(parsed[7]),
        )
        .map_err(|_| TrajectoryError::DenormalizedQuaternion {
            line,
            norm: quat_norm,
        })?;
        let translation = Vector3::new(real(parsed[1]), real(parsed[2]), real(parsed[3]));
        let velocity = if with_velocity {
            Vector3::new(real(parsed[8]), real(parsed[9]), real(parsed[10]))
        } else {
            Vector3::zeros()
        };
        let t = real::<T>(t);
        if let Some(prev) = states.last() {
            if prev.t.partial_cmp(&t) != Some(std::cmp::Ordering::Less) {
                return Err(TrajectoryError::NonMonotoneTime { line });
            }
        }
        states.push(StampedState {
            t,
            state: ExtendedPose::new(rotation, translation, velocity),
        });
    }
    Trajectory::new(states, with_velocity)
}

/// Peeks at the first data line to see whether velocity columns are
/// present. Returns `None` for files with no data lines.
pub fn tum_has_velocity_columns(text: &str) -> Option<bool> {
    text.lines()
        .map(str::trim)
        .find(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| l.split_whitespace().count() >= 11)
}

/// Writes TUM-format text with nine fixed decimals per field; the inverse
/// of [`parse_tum`] up to quaternion sign canonicalization.
pub fn write_tum<T: Real>(traj: &Trajectory<T>) -> String {
    let mut out = String::new();
    out.push_str("# timestamp tx ty tz qx qy qz qw");
    if traj.has_velocity() {
        out.push_str(" vx vy vz");
    }
    out.push('\n');
    for s in traj.states() {
        let p = s.state.translation;
        let [qx, qy, qz, qw] = s.state.rotation.quaternion_xyzw();
        push_field(&mut out, s.t, false);
        for v in [p.x, p.y, p.z, qx, qy, qz, qw] {
            push_field(&mut out, v, true);
        }
        if traj.has_velocity() {
            let v = s.state.velocity;
            for c in [v.x, v.y, v.z] {
                push_field(&mut out, c, true);
            }
        }
        out.push('\n');
    }
    out
}

fn push_field<T: Real>(out: &mut String, value: T, leading_space: bool) {
    if leading_space {
        out.push(' ');
    }
    let s = format!("{:.9}", value.to_f64().unwrap_or(f64::NAN));
    // values that print as zero print unsigned, so the text is canonical
    if let Some(rest) = s.strip_prefix('-') {
        if rest.bytes().all(|b| b == b'0' || b == b'.') {
            out.push_str(rest);
            return;
        }
    }
    out.push_str(&s);
}

/// Greedy nearest-timestamp association: candidate pairs within `max_diff`
/// are taken in order of increasing gap, each index used at most once, and
/// the surviving pairs are returned in time order.
pub fn associate<T: Real>(
    est: &Trajectory<T>,
    reference: &Trajectory<T>,
    max_diff: T,
) -> Result<AssociationPairing<T>, TrajectoryError> {
    let ref_times = reference.times();
    let mut candidates: Vec<(T, usize, usize)> = Vec::new();
    for (i, s) in est.states().iter().enumerate() {
        // Window of reference indices within max_diff of this timestamp.
        let lo = ref_times.partition_point(|&t| t < s.t - max_diff);
        for (offset, &t_ref) in ref_times[lo..].iter().enumerate() {
            if t_ref > s.t + max_diff {
                break;
            }
            candidates.push(((s.t - t_ref).abs(), i, lo + offset));
        }
    }
    candidates.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.1.cmp(&b.1))
            .then(a.2.cmp(&b.2))
    });
    let mut est_used = vec![false; est.len()];
    let mut ref_used = vec![false; reference.len()];
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for (_, i, j) in candidates {
        if !est_used[i] && !ref_used[j] {
            est_used[i] = true;
            ref_used[j] = true;
            pairs.push((i, j));
        }
    }
    if pairs.is_empty() {
        return Err(TrajectoryError::NoOverlap);
    }
    pairs.sort_by_key(|&(i, _)| i);
    Ok(AssociationPairing { pairs, max_diff })
}

/// Options for translation fitting.
#[derive(Clone, Debug)]
pub struct FitOptions<T: Real> {
    /// Per-axis inverse-variance weights of the measuring device.
    pub weights: Weights<T>,
    /// Tikhonov ridge parameter; `None` reports rank deficiency instead of
    /// regularizing it.
    pub ridge: Option<T>,
    /// Fit domain override; defaults to the min/max sample timestamps.
    pub domain: Option<Domain<T>>,
}

impl<T: Real> Default for FitOptions<T> {
    fn default() -> Self {
        FitOptions {
            weights: Weights::Uniform,
            ridge: None,
            domain: None,
        }
    }
}

/// Pseudospectral least-squares fit of the trajectory's translation
/// channels (columns x, y, z).
pub fn fit_trajectory_translation<T: Real>(
    traj: &Trajectory<T>,
    degree: usize,
    options: &FitOptions<T>,
) -> Result<ChebyshevFit<T>, ChebyshevError> {
    let times = traj.times();
    let mut values = DMatrix::zeros(traj.len(), 3);
    for (i, s) in traj.states().iter().enumerate() {
        values[(i, 0)] = s.state.translation.x;
        values[(i, 1)] = s.state.translation.y;
        values[(i, 2)] = s.state.translation.z;
    }
    let samples = SampleSet::new(times, values, options.weights.clone())?;
    let domain = match options.domain {
        Some(d) => d,
        None => samples.time_span()?,
    };
    fit_pseudospectral(&samples, degree, &domain, options.ridge)
}

/// Derivative of a translation fit evaluated at the query times: row `i`
/// is the linear velocity at `times[i]`.
pub fn compute_velocity<T: Real>(
    fit: &ChebyshevFit<T>,
    times: &[T],
) -> Result<Vec<Vector3<T>>, ChebyshevError> {
    assert_eq!(fit.dims(), 3, "velocity requires a 3-axis translation fit");
    let derivative = fit.derivative();
    times
        .iter()
        .map(|&t| {
            let v = derivative.evaluate(t)?;
            Ok(Vector3::new(v[0], v[1], v[2]))
        })
        .collect()
}

/// Serializes a fit to the binary format: magic `CBF1`, version byte,
/// `u32` degree, `f64` domain bounds, `u32` axis count, then row-major
/// `f64` node values, all little-endian.
pub fn serialize_fit<T: Real>(fit: &ChebyshevFit<T>) -> Vec<u8> {
    let rows = fit.degree() + 1;
    let dims = fit.dims();
    let mut out = Vec::with_capacity(29 + 8 * rows * dims);
    out.extend_from_slice(FIT_MAGIC);
    out.push(FIT_VERSION);
    out.extend_from_slice(&(fit.degree() as u32).to_le_bytes());
    out.extend_from_slice(&fit.domain().a().to_f64().unwrap().to_le_bytes());
    out.extend_from_slice(&fit.domain().b().to_f64().unwrap().to_le_bytes());
    out.extend_from_slice(&(dims as u32).to_le_bytes());
    for i in 0..rows {
        for j in 0..dims {
            let v = fit.values()[(i, j)].to_f64().unwrap();
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

/// Inverse of [`serialize_fit`]; the payload length must match the header
/// exactly.
pub fn deserialize_fit<T: Real>(bytes: &[u8]) -> Result<ChebyshevFit<T>, TrajectoryError> {
    if bytes.len() < 4 {
        return Err(TrajectoryError::TruncatedPayload);
    }
    if &bytes[0..4] != FIT_MAGIC {
        return Err(TrajectoryError::BadMagic);
    }
    if bytes.len() < 5 {
        return Err(TrajectoryError::TruncatedPayload);
    }
    if bytes[4] != FIT_VERSION {
        return Err(TrajectoryError::VersionMismatch { version: bytes[4] });
    }
    if bytes.len() < 29 {
        return Err(TrajectoryError::TruncatedPayload);
    }
    let degree = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
    let a = f64::from_le_bytes(bytes[9..17].try_into().unwrap());
    let b = f64::from_le_bytes(bytes[17..25].try_into().unwrap());
    let dims = u32::from_le_bytes(bytes[25..29].try_into().unwrap()) as usize;
    if degree < 1 {
        return Err(TrajectoryError::InvalidHeader("degree must be >= 1".into()));
    }
    if dims < 1 {
        return Err(TrajectoryError::InvalidHeader(
            "axis count must be >= 1".into(),
        ));
    }
    let domain = Domain::new(real::<T>(a), real::<T>(b))
        .map_err(|e| TrajectoryError::InvalidHeader(e.to_string()))?;
    let rows = degree + 1;
    let payload = rows * dims * 8;
    if bytes.len() < 29 + payload {
        return Err(TrajectoryError::TruncatedPayload);
    }
    if bytes.len() > 29 + payload {
        return Err(TrajectoryError::TrailingBytes);
    }
    let mut values = DMatrix::zeros(rows, dims);
    let mut offset = 29;
    for i in 0..rows {
        for j in 0..dims {
            let v = f64::from_le_bytes(bytes[offset..offset + 8].try_into().unwrap());
            values[(i, j)] = real::<T>(v);
            offset += 8;
        }
    }
    ChebyshevFit::new(degree, domain, values).map_err(TrajectoryError::Fit)
}
