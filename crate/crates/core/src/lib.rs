//! stateval: trajectory and state-estimation evaluation.
//!
//! The crate evaluates robot state estimates against a reference. Beyond
//! the classic translation-only ATE/RPE metrics it computes an absolute
//! state error over the SE_2(3) group of extended poses, which scores
//! rotation, translation and linear velocity jointly as one number.
//!
//! Reference velocity is rarely recorded directly; [`trajectory`] can
//! synthesize it from motion-capture translations by fitting a Chebyshev
//! polynomial in pseudospectral form ([`chebyshev`]) and differentiating
//! the interpolant with the spectral differentiation matrix. The same fit
//! doubles as a compact trajectory representation for storage.
//!
//! Modules:
//! * [`liegroups`] - SO(3), SE(3) and SE_2(3) types and operations.
//! * [`chebyshev`] - nodes, barycentric interpolation, differentiation
//!   matrix, coefficient transform, weighted least-squares fitting.
//! * [`trajectory`] - data model, TUM text I/O, timestamp association,
//!   velocity synthesis, binary fit serialization.
//! * [`metrics`] - similarity alignment, ASE / ATE / RPE, and the
//!   finite-difference velocity baseline.
//!
//! Everything numeric is generic over the scalar type through
//! [`scalar::Real`] (`f32` or `f64`); the `*64`/`*32` aliases below pick a
//! concrete precision. All types are immutable values and all operations
//! are pure functions, so anything here may be used from multiple threads
//! without synchronization.

pub mod chebyshev;
pub mod liegroups;
pub mod metrics;
pub mod scalar;
pub mod trajectory;

// the public API speaks nalgebra types
pub use nalgebra;

pub use scalar::Real;

pub type Rotation64 = liegroups::Rotation<f64>;
pub type Pose64 = liegroups::Pose<f64>;
pub type ExtendedPose64 = liegroups::ExtendedPose<f64>;
pub type Domain64 = chebyshev::Domain<f64>;
pub type ChebyshevFit64 = chebyshev::ChebyshevFit<f64>;
pub type SampleSet64 = chebyshev::SampleSet<f64>;
pub type StampedState64 = trajectory::StampedState<f64>;
pub type Trajectory64 = trajectory::Trajectory<f64>;
pub type FitOptions64 = trajectory::FitOptions<f64>;
pub type SimilarityTransform64 = metrics::SimilarityTransform<f64>;
pub type MetricReport64 = metrics::MetricReport<f64>;

pub type Rotation32 = liegroups::Rotation<f32>;
pub type Pose32 = liegroups::Pose<f32>;
pub type ExtendedPose32 = liegroups::ExtendedPose<f32>;
pub type Domain32 = chebyshev::Domain<f32>;
pub type ChebyshevFit32 = chebyshev::ChebyshevFit<f32>;
pub type SampleSet32 = chebyshev::SampleSet<f32>;
pub type StampedState32 = trajectory::StampedState<f32>;
pub type Trajectory32 = trajectory::Trajectory<f32>;
pub type FitOptions32 = trajectory::FitOptions<f32>;
pub type SimilarityTransform32 = metrics::SimilarityTransform<f32>;
pub type MetricReport32 = metrics::MetricReport<f32>;
