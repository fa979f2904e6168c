//! Sampling a finite spanning set of the Jacobian space of a system.
//!
//! Jacobians `J(x)` are evaluated at points drawn uniformly from a box and
//! kept when they are numerically independent of the ones already kept.
//! Independence is tested on the row-major flattening of each matrix
//! against an incrementally maintained orthonormal basis.

use nalgebra::{DMatrix, DVector};

use crate::linalg::{flatten_row_major, OrthoBasis};
use crate::model::OdeSystem;
use crate::rng::SampleRng;

/// A sample is new when its residual against the span exceeds this
/// fraction of its own Frobenius norm.
pub const RANK_TOL: f64 = 1e-9;

/// Default number of consecutive dependent samples required to stop.
pub const DEFAULT_CONFIRMATIONS: usize = 3;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum JacobianError {
    #[error("invalid sampling domain: {0}")]
    InvalidDomain(String),
    #[error("{failures} consecutive samples hit a zero denominator (last at {last_point:?}); choose a different sampling box")]
    DomainExhausted { failures: usize, last_point: Vec<f64> },
    #[error("explicit sample point {index} is singular: drift component {component} has a zero denominator")]
    SingularPoint { index: usize, component: usize },
    #[error("sample point {index} has length {len}, expected {dim}")]
    PointDimension { index: usize, len: usize, dim: usize },
    #[error("basis grew past m^2 = {limit} matrices")]
    TooManyMatrices { limit: usize },
}

/// Axis-aligned sampling box together with the sampler settings.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingDomain {
    lower: Vec<f64>,
    upper: Vec<f64>,
    pub seed: u64,
    max_resamples: usize,
    confirmations: usize,
}

impl SamplingDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, JacobianError> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(JacobianError::InvalidDomain(format!(
                "bounds of length {} and {}",
                lower.len(),
                upper.len()
            )));
        }
        for (i, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(JacobianError::InvalidDomain(format!("coordinate {i}: need finite lower < upper, got [{lo}, {hi}]")));
            }
        }
        let m = lower.len();
        Ok(SamplingDomain { lower, upper, seed: 0, max_resamples: 100 * m, confirmations: DEFAULT_CONFIRMATIONS })
    }

    /// The box `[0, max(1, 2·max_i |x0_i|)]^m` over all initial conditions.
    pub fn default_for(sys: &OdeSystem) -> Self {
        let scale = sys
            .initial_conditions()
            .iter()
            .flat_map(|x0| x0.iter())
            .fold(0.0f64, |acc, v| acc.max(v.abs()));
        let hi = (2.0 * scale).max(1.0);
        let m = sys.dim();
        SamplingDomain::new(vec![0.0; m], vec![hi; m]).expect("default box is valid")
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_confirmations(mut self, confirmations: usize) -> Result<Self, JacobianError> {
        if confirmations == 0 {
            return Err(JacobianError::InvalidDomain("confirmations must be positive".into()));
        }
        self.confirmations = confirmations;
        Ok(self)
    }

    pub fn with_max_resamples(mut self, max_resamples: usize) -> Result<Self, JacobianError> {
        if max_resamples == 0 {
            return Err(JacobianError::InvalidDomain("max_resamples must be positive".into()));
        }
        self.max_resamples = max_resamples;
        Ok(self)
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn confirmations(&self) -> usize {
        self.confirmations
    }

    pub fn max_resamples(&self) -> usize {
        self.max_resamples
    }
}

/// Linearly independent Jacobian evaluations and the points that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobianBasis {
    dim: usize,
    matrices: Vec<DMatrix<f64>>,
    sample_points: Vec<DVector<f64>>,
    ortho_flat: OrthoBasis,
    seed: Option<u64>,
}

impl JacobianBasis {
    fn empty(dim: usize, seed: Option<u64>) -> Self {
        JacobianBasis { dim, matrices: Vec::new(), sample_points: Vec::new(), ortho_flat: OrthoBasis::new(), seed }
    }

    /// Build from given matrices, dropping the ones dependent on earlier ones.
    /// Sample points are unknown and left empty.
    pub fn from_matrices(dim: usize, matrices: impl IntoIterator<Item = DMatrix<f64>>) -> Self {
        let mut basis = JacobianBasis::empty(dim, None);
        for j in matrices {
            assert_eq!(j.shape(), (dim, dim), "matrix shape mismatch");
            basis.offer(j, None);
        }
        basis
    }

    fn offer(&mut self, j: DMatrix<f64>, point: Option<DVector<f64>>) -> bool {
        let (_, added) = self.ortho_flat.try_push(&flatten_row_major(&j), RANK_TOL);
        if added {
            self.matrices.push(j);
            if let Some(p) = point {
                self.sample_points.push(p);
            }
        }
        added
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrices(&self) -> &[DMatrix<f64>] {
        &self.matrices
    }

    pub fn sample_points(&self) -> &[DVector<f64>] {
        &self.sample_points
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }

    /// `‖vec(J) − proj(vec(J))‖₂` against the span of the basis.
    pub fn membership_residual(&self, j: &DMatrix<f64>) -> f64 {
        self.ortho_flat.residual(&flatten_row_major(j)).norm()
    }
}

/// Free-function form of [`JacobianBasis::membership_residual`].
pub fn membership_residual(basis: &JacobianBasis, j: &DMatrix<f64>) -> f64 {
    basis.membership_residual(j)
}

/// Randomized construction of a spanning set of the Jacobian space.
///
/// Stops after `dom.confirmations()` consecutive samples whose Jacobian lies
/// in the span of the matrices kept so far. Singular samples are redrawn, up
/// to `dom.max_resamples()` consecutive failures.
pub fn sample_jacobian_basis(sys: &OdeSystem, dom: &SamplingDomain) -> Result<JacobianBasis, JacobianError> {
    let m = sys.dim();
    if dom.dim() != m {
        return Err(JacobianError::InvalidDomain(format!("box of dimension {} for a system of dimension {m}", dom.dim())));
    }
    let mut rng = SampleRng::new(dom.seed);
    let mut basis = JacobianBasis::empty(m, Some(dom.seed));
    let mut dependent = 0;
    let mut failures = 0;
    while dependent < dom.confirmations {
        let x = rng.point_in_box(&dom.lower, &dom.upper);
        let jac = match sys.eval_drift_dual(&x) {
            Ok((_, jac)) => jac,
            Err(_) => {
                failures += 1;
                if failures >= dom.max_resamples {
                    return Err(JacobianError::DomainExhausted { failures, last_point: x });
                }
                continue;
            }
        };
        failures = 0;
        if basis.offer(jac, Some(DVector::from_vec(x))) {
            dependent = 0;
            if basis.len() > m * m {
                return Err(JacobianError::TooManyMatrices { limit: m * m });
            }
        } else {
            dependent += 1;
        }
    }
    log::debug!("sampled Jacobian basis of dimension {} for `{}`", basis.len(), sys.name());
    Ok(basis)
}

/// Deterministic variant evaluating `J` at the given points in order and
/// keeping the independent ones.
pub fn basis_from_points(sys: &OdeSystem, points: &[Vec<f64>]) -> Result<JacobianBasis, JacobianError> {
    let m = sys.dim();
    let mut basis = JacobianBasis::empty(m, None);
    for (index, p) in points.iter().enumerate() {
        if p.len() != m {
            return Err(JacobianError::PointDimension { index, len: p.len(), dim: m });
        }
        let (_, jac) = sys
            .eval_drift_dual(p)
            .map_err(|e| JacobianError::SingularPoint { index, component: e.component })?;
        basis.offer(jac, Some(DVector::from_column_slice(p)));
    }
    Ok(basis)
}
