//! Chebyshev pseudospectral machinery: Gauss-Lobatto nodes, barycentric
//! interpolation, the spectral differentiation matrix, and weighted
//! least-squares fitting of sampled vector signals.
//!
//! A polynomial of degree `N` is parameterized by its values at the `N + 1`
//! Chebyshev points `t_j = cos(j pi / N)` (descending, `t_0 = b`,
//! `t_N = a` after mapping onto the fit domain). Evaluation anywhere in the
//! domain is a single inner product against a barycentric weight row, and
//! differentiation is a matrix-vector product with [`diff_matrix`].

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::scalar::{real, Real};

/// Relative threshold for snapping a query point onto a node.
const NODE_SNAP_REL: f64 = 1e-13;

/// Relative slack tolerated outside the domain before erroring.
const DOMAIN_SLACK_REL: f64 = 1e-12;

/// Relative diagonal threshold below which the design matrix is reported
/// rank deficient.
const RANK_TOL_REL: f64 = 1e-10;

#[derive(Debug, Error, PartialEq)]
pub enum ChebyshevError {
    #[error("degenerate domain: a = {a} must be strictly less than b = {b}")]
    DegenerateDomain { a: f64, b: f64 },
    #[error("query point {x} outside domain [{a}, {b}]")]
    OutOfDomain { x: f64, a: f64, b: f64 },
    #[error("underdetermined fit: {samples} samples for degree requiring {needed}")]
    Underdetermined { samples: usize, needed: usize },
    #[error("design matrix is rank deficient (clustered sample times?); set a ridge parameter to regularize")]
    RankDeficient,
    #[error("fit degree must be at least 1")]
    InvalidDegree,
    #[error("sample set needs at least 2 points, got {got}")]
    TooFewSamples { got: usize },
    #[error("sample times must be strictly increasing")]
    NonMonotoneTimes,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("weights must be finite and positive")]
    InvalidWeights,
}

/// A time interval `[a, b]` with `a < b`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Domain<T: Real> {
    a: T,
    b: T,
}

impl<T: Real> Domain<T> {
    pub fn new(a: T, b: T) -> Result<Self, ChebyshevError> {
        if a.partial_cmp(&b) != Some(std::cmp::Ordering::Less) || !is_finite(a) || !is_finite(b) {
            return Err(ChebyshevError::DegenerateDomain {
                a: to_f64(a),
                b: to_f64(b),
            });
        }
        Ok(Domain { a, b })
    }

    pub fn a(&self) -> T {
        self.a
    }

    pub fn b(&self) -> T {
        self.b
    }

    pub fn length(&self) -> T {
        self.b - self.a
    }

    /// Checks `x` against the domain with the documented relative slack.
    fn check(&self, x: T) -> Result<(), ChebyshevError> {
        let slack = real::<T>(DOMAIN_SLACK_REL) * self.a.abs().max(self.b.abs()).max(T::one());
        if x < self.a - slack || x > self.b + slack {
            return Err(ChebyshevError::OutOfDomain {
                x: to_f64(x),
                a: to_f64(self.a),
                b: to_f64(self.b),
            });
        }
        Ok(())
    }
}

fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

fn is_finite<T: Real>(x: T) -> bool {
    x.to_f64().map(f64::is_finite).unwrap_or(false)
}

/// Chebyshev-Gauss-Lobatto points `cos(j pi / n)` mapped onto `domain`,
/// descending from `b` to `a`.
///
/// The sine form `sin(pi (n - 2j) / (2n))` is used so the grid is exactly
/// symmetric; the endpoints are pinned to the domain bounds.
pub fn cheb_points<T: Real>(n: usize, domain: &Domain<T>) -> Vec<T> {
    assert!(n >= 1, "degree must be at least 1");
    let mid = (domain.a + domain.b) * real(0.5);
    let half = (domain.b - domain.a) * real(0.5);
    let denom = real::<T>(2.0 * n as f64);
    let mut pts: Vec<T> = (0..=n)
        .map(|j| {
            let s = (T::pi() * real(n as f64 - 2.0 * j as f64) / denom).sin();
            mid + half * s
        })
        .collect();
    pts[0] = domain.b;
    pts[n] = domain.a;
    pts
}

/// Barycentric weights for the Chebyshev points: `(-1)^j`, halved at both
/// endpoints.
pub fn barycentric_weights<T: Real>(n: usize) -> Vec<T> {
    assert!(n >= 1, "degree must be at least 1");
    let mut w: Vec<T> = (0..=n)
        .map(|j| if j % 2 == 0 { T::one() } else { -T::one() })
        .collect();
    let half = real::<T>(0.5);
    w[0] *= half;
    w[n] *= half;
    w
}

/// Row of barycentric interpolation weights at `x`: the interpolant value
/// is the inner product of this row with the node values. At a node the
/// row degenerates to the corresponding unit vector.
pub fn interp_row<T: Real>(
    n: usize,
    domain: &Domain<T>,
    x: T,
) -> Result<DVector<T>, ChebyshevError> {
    domain.check(x)?;
    let nodes = cheb_points(n, domain);
    let weights = barycentric_weights::<T>(n);
    let snap = real::<T>(NODE_SNAP_REL);
    for (j, &node) in nodes.iter().enumerate() {
        if (x - node).abs() <= snap * x.abs().max(node.abs()).max(T::one()) {
            let mut row = DVector::zeros(n + 1);
            row[j] = T::one();
            return Ok(row);
        }
    }
    let mut row = DVector::zeros(n + 1);
    let mut denom = T::zero();
    for j in 0..=n {
        let term = weights[j] / (x - nodes[j]);
        row[j] = term;
        denom += term;
    }
    Ok(row / denom)
}

/// Spectral differentiation matrix on the mapped Chebyshev grid. Applied to
/// node values of a polynomial of degree <= n it returns the exact node
/// values of its derivative; the domain chain rule is built in. Diagonal
/// entries use the negative row-sum trick, so rows sum to zero.
pub fn diff_matrix<T: Real>(n: usize, domain: &Domain<T>) -> DMatrix<T> {
    assert!(n >= 1, "degree must be at least 1");
    let nodes = cheb_points(n, domain);
    let mut d = DMatrix::zeros(n + 1, n + 1);
    let endpoint = |j: usize| -> T {
        if j == 0 || j == n {
            real(2.0)
        } else {
            T::one()
        }
    };
    for i in 0..=n {
        let mut row_sum = T::zero();
        for j in 0..=n {
            if i == j {
                continue;
            }
            let sign = if (i + j) % 2 == 0 {
                T::one()
            } else {
                -T::one()
            };
            let entry = endpoint(i) / endpoint(j) * sign / (nodes[i] - nodes[j]);
            d[(i, j)] = entry;
            row_sum += entry;
        }
        d[(i, i)] = -row_sum;
    }
    d
}

/// Per-axis measurement weights (inverse variances) for the fit objective.
#[derive(Clone, Debug, PartialEq)]
pub enum Weights<T: Real> {
    /// All axes weighted equally.
    Uniform,
    /// One weight shared by every axis.
    Scalar(T),
    /// One weight per axis (column).
    PerAxis(Vec<T>),
}

impl<T: Real> Weights<T> {
    fn validate(&self, dims: usize) -> Result<(), ChebyshevError> {
        let check = |w: T| {
            if is_finite(w) && w > T::zero() {
                Ok(())
            } else {
                Err(ChebyshevError::InvalidWeights)
            }
        };
        match self {
            Weights::Uniform => Ok(()),
            Weights::Scalar(w) => check(*w),
            Weights::PerAxis(ws) => {
                if ws.len() != dims {
                    return Err(ChebyshevError::DimensionMismatch {
                        expected: dims,
                        got: ws.len(),
                    });
                }
                ws.iter().try_for_each(|w| check(*w))
            }
        }
    }

    fn for_axis(&self, axis: usize) -> T {
        match self {
            Weights::Uniform => T::one(),
            Weights::Scalar(w) => *w,
            Weights::PerAxis(ws) => ws[axis],
        }
    }
}

/// Timestamped vector samples to be fitted, with measurement weights.
#[derive(Clone, Debug)]
pub struct SampleSet<T: Real> {
    times: Vec<T>,
    values: DMatrix<T>,
    weights: Weights<T>,
}

impl<T: Real> SampleSet<T> {
    pub fn new(
        times: Vec<T>,
        values: DMatrix<T>,
        weights: Weights<T>,
    ) -> Result<Self, ChebyshevError> {
        if times.len() < 2 {
            return Err(ChebyshevError::TooFewSamples { got: times.len() });
        }
        if values.nrows() != times.len() {
            return Err(ChebyshevError::DimensionMismatch {
                expected: times.len(),
                got: values.nrows(),
            });
        }
        let increasing = |w: &[T]| w[0].partial_cmp(&w[1]) == Some(std::cmp::Ordering::Less);
        if times.windows(2).any(|w| !increasing(w)) || times.iter().any(|t| !is_finite(*t)) {
            return Err(ChebyshevError::NonMonotoneTimes);
        }
        weights.validate(values.ncols())?;
        Ok(SampleSet {
            times,
            values,
            weights,
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }

    pub fn values(&self) -> &DMatrix<T> {
        &self.values
    }

    pub fn dims(&self) -> usize {
        self.values.ncols()
    }

    /// Smallest domain covering the sample timestamps.
    pub fn time_span(&self) -> Result<Domain<T>, ChebyshevError> {
        Domain::new(self.times[0], self.times[self.times.len() - 1])
    }
}

/// A degree-`N` polynomial over a domain, stored as its values at the
/// `N + 1` Chebyshev points (one column per spatial axis).
#[derive(Clone, Debug, PartialEq)]
pub struct ChebyshevFit<T: Real> {
    degree: usize,
    domain: Domain<T>,
    values: DMatrix<T>,
}

impl<T: Real> ChebyshevFit<T> {
    pub fn new(
        degree: usize,
        domain: Domain<T>,
        values: DMatrix<T>,
    ) -> Result<Self, ChebyshevError> {
        if degree < 1 {
            return Err(ChebyshevError::InvalidDegree);
        }
        if values.nrows() != degree + 1 || values.ncols() == 0 {
            return Err(ChebyshevError::DimensionMismatch {
                expected: degree + 1,
                got: values.nrows(),
            });
        }
        Ok(ChebyshevFit {
            degree,
            domain,
            values,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn domain(&self) -> &Domain<T> {
        &self.domain
    }

    pub fn values(&self) -> &DMatrix<T> {
        &self.values
    }

    pub fn dims(&self) -> usize {
        self.values.ncols()
    }

    /// Evaluates the interpolant at `x` (one value per axis).
    pub fn evaluate(&self, x: T) -> Result<DVector<T>, ChebyshevError> {
        let row = interp_row(self.degree, &self.domain, x)?;
        Ok(self.values.tr_mul(&row))
    }

    /// Evaluates at many query points; row `i` corresponds to `times[i]`.
    pub fn evaluate_many(&self, times: &[T]) -> Result<DMatrix<T>, ChebyshevError> {
        let mut out = DMatrix::zeros(times.len(), self.dims());
        for (i, &t) in times.iter().enumerate() {
            out.set_row(i, &self.evaluate(t)?.transpose());
        }
        Ok(out)
    }

    /// Derivative of the interpolant, as a fit of the same degree over the
    /// same domain: `values' = D values`.
    pub fn derivative(&self) -> ChebyshevFit<T> {
        let d = diff_matrix(self.degree, &self.domain);
        ChebyshevFit {
            degree: self.degree,
            domain: self.domain,
            values: d * &self.values,
        }
    }

    /// Coefficients `a_k` of the truncated Chebyshev series interpolating
    /// the node values (one column per axis), via the type-I DCT cosine
    /// sum.
    pub fn to_coefficients(&self) -> DMatrix<T> {
        let n = self.degree;
        // cos(pi k j / n) = table[(k j) mod 2n]
        let table: Vec<T> = (0..2 * n)
            .map(|m| (T::pi() * real(m as f64) / real(n as f64)).cos())
            .collect();
        let mut coeffs = DMatrix::zeros(n + 1, self.dims());
        for col in 0..self.dims() {
            for k in 0..=n {
                let mut acc = T::zero();
                for j in 0..=n {
                    let c = table[(k * j) % (2 * n)];
                    let term = self.values[(j, col)] * c;
                    if j == 0 || j == n {
                        acc += term * real(0.5);
                    } else {
                        acc += term;
                    }
                }
                let scale = if k == 0 || k == n {
                    T::one() / real(n as f64)
                } else {
                    real::<T>(2.0) / real(n as f64)
                };
                coeffs[(k, col)] = acc * scale;
            }
        }
        coeffs
    }
}

/// Weighted least-squares fit of the samples by a degree-`n` polynomial in
/// pseudospectral form: minimizes `sum_i |z_i - X^T w(t_i)|^2_Omega` over
/// the node values `X`, solved in closed form by QR factorization of the
/// design matrix whose i-th row is `interp_row(n, domain, t_i)`.
///
/// With `ridge = Some(lambda)` a Tikhonov term `lambda |X_col|^2` is added
/// per axis, which regularizes rank-deficient sample distributions instead
/// of reporting them.
pub fn fit_pseudospectral<T: Real>(
    samples: &SampleSet<T>,
    degree: usize,
    domain: &Domain<T>,
    ridge: Option<T>,
) -> Result<ChebyshevFit<T>, ChebyshevError> {
    if degree < 1 {
        return Err(ChebyshevError::InvalidDegree);
    }
    let m = samples.len();
    let cols = degree + 1;
    if m < cols {
        return Err(ChebyshevError::Underdetermined {
            samples: m,
            needed: cols,
        });
    }
    let mut design = DMatrix::zeros(m, cols);
    for (i, &t) in samples.times().iter().enumerate() {
        design.set_row(i, &interp_row(degree, domain, t)?.transpose());
    }
    let lambda = ridge.unwrap_or_else(T::zero);
    if lambda < T::zero() || !is_finite(lambda) {
        return Err(ChebyshevError::InvalidWeights);
    }

    let values = if lambda == T::zero() {
        // Per-axis scalar weights rescale each column's objective uniformly
        // and drop out of the unregularized minimizer, so one factorization
        // serves every axis.
        let qr = design.qr();
        let r = qr.r();
        check_rank(&r)?;
        let mut work = samples.values().clone();
        qr.q_tr_mul(&mut work);
        let rhs = work.rows(0, cols).into_owned();
        r.solve_upper_triangular(&rhs)
            .ok_or(ChebyshevError::RankDeficient)?
    } else {
        // Ridge couples the data weight to the penalty; solve per axis on
        // the augmented system [sqrt(w) A; sqrt(lambda) I].
        let mut values = DMatrix::zeros(cols, samples.dims());
        for axis in 0..samples.dims() {
            let w_sqrt = samples.weights.for_axis(axis).sqrt();
            let mut aug = DMatrix::zeros(m + cols, cols);
            aug.rows_mut(0, m).copy_from(&(&design * w_sqrt));
            for k in 0..cols {
                aug[(m + k, k)] = lambda.sqrt();
            }
            let mut rhs = DVector::zeros(m + cols);
            for i in 0..m {
                rhs[i] = samples.values()[(i, axis)] * w_sqrt;
            }
            let qr = aug.qr();
            qr.q_tr_mul(&mut rhs);
            let solved = qr
                .r()
                .solve_upper_triangular(&rhs.rows(0, cols).into_owned())
                .ok_or(ChebyshevError::RankDeficient)?;
            values.set_column(axis, &solved);
        }
        values
    };
    ChebyshevFit::new(degree, *domain, values)
}

fn check_rank<T: Real>(r: &DMatrix<T>) -> Result<(), ChebyshevError> {
    let diag = r.diagonal();
    let max = diag.iter().fold(T::zero(), |a, d| a.max(d.abs()));
    let min = diag.iter().fold(max, |a, d| a.min(d.abs()));
    if max == T::zero() || min <= max * real(RANK_TOL_REL) {
        return Err(ChebyshevError::RankDeficient);
    }
    Ok(())
}
