//! Approximate constrained lumping.
//!
//! Starting from orthonormal rows spanning the observables, every row `r`
//! of the current lumping is pushed through every basis matrix `J_i`. When
//! the part of `r·J_i` orthogonal to the current row space is longer than
//! the tolerance `ε`, its normalized direction is appended as a new row.
//! Rows are visited oldest first and matrices in index order, and passes
//! repeat until one appends nothing. That order is part of the contract:
//! the output can depend on it.

// `!(x <= tol)` is deliberate: a NaN must fail the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::jacobian::JacobianBasis;
use crate::linalg::{self, rows_to_matrix, RankDeficient};
use crate::model::OdeSystem;

/// At `ε = 0` a candidate is appended only if its residual exceeds this
/// fraction of `‖r·J_i‖`, which absorbs floating-point residue.
pub const EXACT_REL_TOL: f64 = 1e-12;

/// Default bisection resolution.
pub const DEFAULT_D_MIN: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LumpingError {
    #[error("observable matrix is rank deficient: {0}")]
    RankDeficient(#[from] RankDeficient),
    #[error("observable matrix has no rows")]
    NoObservables,
    #[error("observables have {found} columns, basis matrices are {dim}×{dim}")]
    DimensionMismatch { found: usize, dim: usize },
    #[error("lumping tolerance must be finite and non-negative, got {0}")]
    InvalidEpsilon(f64),
    #[error("invalid search configuration: {0}")]
    InvalidConfig(String),
    #[error("bisection did not reach width {d_min} within {iterations} iterations")]
    MaxIterations { iterations: usize, d_min: f64 },
    #[error("drift component {component} has a zero denominator at the {} point", if *.at_projection { "projected" } else { "given" })]
    Eval { component: usize, at_projection: bool },
    #[error("rows of the lumping matrix are not orthonormal (max deviation {0:e})")]
    NotOrthonormal(f64),
}

/// Where a row of a [`LumpingMatrix`] came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RowOrigin {
    /// Orthonormalized observable row.
    Observable { index: usize },
    /// Normalized residual of `row · J_matrix`.
    Derived { row: usize, matrix: usize, distance: f64 },
    /// Supplied from outside (e.g. loaded from a file).
    External,
}

/// Orthonormal-row lumping matrix whose row space contains the observables.
#[derive(Debug, Clone, PartialEq)]
pub struct LumpingMatrix {
    rows: DMatrix<f64>,
    epsilon: f64,
    observable_rank: usize,
    origins: Vec<RowOrigin>,
}

impl LumpingMatrix {
    /// Wrap externally supplied rows, checking orthonormality to `1e-10`.
    pub fn from_orthonormal_rows(rows: DMatrix<f64>, epsilon: f64, observable_rank: usize) -> Result<Self, LumpingError> {
        let gram = &rows * rows.transpose();
        let off = linalg::max_abs(&(gram - DMatrix::identity(rows.nrows(), rows.nrows())));
        if !(off <= 1e-10) {
            return Err(LumpingError::NotOrthonormal(off));
        }
        let origins = vec![RowOrigin::External; rows.nrows()];
        Ok(LumpingMatrix { rows, epsilon, observable_rank, origins })
    }

    /// The `l × m` matrix `L`.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.rows
    }

    /// Reduced dimension `l`.
    pub fn size(&self) -> usize {
        self.rows.nrows()
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn observable_rank(&self) -> usize {
        self.observable_rank
    }

    pub fn origins(&self) -> &[RowOrigin] {
        &self.origins
    }

    /// `L̄ = Lᵀ`, valid because the rows are orthonormal.
    pub fn pseudoinverse(&self) -> DMatrix<f64> {
        self.rows.transpose()
    }

    /// Orthogonal projector `LᵀL` onto the row space.
    pub fn projector(&self) -> DMatrix<f64> {
        self.rows.transpose() * &self.rows
    }
}

/// One residual test of the lumping loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LumpStep {
    pub pass: usize,
    pub row: usize,
    pub matrix: usize,
    pub distance: f64,
    pub appended: bool,
}

fn project_out(v: &DVector<f64>, rows: &[DVector<f64>]) -> DVector<f64> {
    // v − v·Lᵀ·L for the current rows
    let mut pi = DVector::zeros(v.len());
    for q in rows {
        pi.axpy(q.dot(v), q, 1.0);
    }
    v - pi
}

fn check_inputs(basis: &JacobianBasis, m: &DMatrix<f64>) -> Result<DMatrix<f64>, LumpingError> {
    if m.nrows() == 0 {
        return Err(LumpingError::NoObservables);
    }
    if m.ncols() != basis.dim() {
        return Err(LumpingError::DimensionMismatch { found: m.ncols(), dim: basis.dim() });
    }
    Ok(linalg::orthonormalize_rows(m)?)
}

/// Orthonormal rows spanning the row space of `m`.
pub fn orthonormalize_rows(m: &DMatrix<f64>) -> Result<DMatrix<f64>, LumpingError> {
    if m.nrows() == 0 {
        return Err(LumpingError::NoObservables);
    }
    Ok(linalg::orthonormalize_rows(m)?)
}

/// Approximate constrained lumping with tolerance `epsilon`.
pub fn approximate_lump(basis: &JacobianBasis, m: &DMatrix<f64>, epsilon: f64) -> Result<LumpingMatrix, LumpingError> {
    lump_impl(basis, m, epsilon, None)
}

/// Like [`approximate_lump`], also returning every residual test performed.
pub fn approximate_lump_traced(
    basis: &JacobianBasis,
    m: &DMatrix<f64>,
    epsilon: f64,
) -> Result<(LumpingMatrix, Vec<LumpStep>), LumpingError> {
    let mut trace = Vec::new();
    let l = lump_impl(basis, m, epsilon, Some(&mut trace))?;
    Ok((l, trace))
}

fn lump_impl(
    basis: &JacobianBasis,
    m: &DMatrix<f64>,
    epsilon: f64,
    mut trace: Option<&mut Vec<LumpStep>>,
) -> Result<LumpingMatrix, LumpingError> {
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(LumpingError::InvalidEpsilon(epsilon));
    }
    let q = check_inputs(basis, m)?;
    let dim = basis.dim();
    let p = q.nrows();
    let mut rows: Vec<DVector<f64>> = q.row_iter().map(|r| r.transpose()).collect();
    let mut origins: Vec<RowOrigin> = (0..p).map(|index| RowOrigin::Observable { index }).collect();

    let mut pass = 0;
    loop {
        let mut appended_any = false;
        let mut r = 0;
        while r < rows.len() {
            for (i, jac) in basis.matrices().iter().enumerate() {
                let v = jac.tr_mul(&rows[r]);
                let resid = project_out(&v, &rows);
                let distance = resid.norm();
                let threshold = epsilon.max(EXACT_REL_TOL * v.norm());
                let mut appended = false;
                if distance > threshold && rows.len() < dim {
                    // second Gram–Schmidt pass keeps the new row orthogonal
                    // when the residual is much shorter than r·J_i
                    let refined = project_out(&resid, &rows);
                    let n = refined.norm();
                    if n > 0.0 {
                        rows.push(refined / n);
                        origins.push(RowOrigin::Derived { row: r, matrix: i, distance });
                        appended = true;
                        appended_any = true;
                    }
                }
                if let Some(t) = trace.as_deref_mut() {
                    t.push(LumpStep { pass, row: r, matrix: i, distance, appended });
                }
            }
            r += 1;
        }
        if !appended_any {
            break;
        }
        pass += 1;
    }

    Ok(LumpingMatrix { rows: rows_to_matrix(&rows, dim), epsilon, observable_rank: p, origins })
}

/// One full residual pass over `lumping`; returns the largest residual seen.
/// A lumping computed with tolerance `ε` is a fixpoint iff this is `≤ ε`.
pub fn max_residual(basis: &JacobianBasis, lumping: &DMatrix<f64>) -> f64 {
    let rows: Vec<DVector<f64>> = lumping.row_iter().map(|r| r.transpose()).collect();
    let mut worst = 0.0f64;
    for r in &rows {
        for jac in basis.matrices() {
            worst = worst.max(project_out(&jac.tr_mul(r), &rows).norm());
        }
    }
    worst
}

/// Smallest tolerance at which the lumping collapses onto the observable
/// row space: `max_{j,i} ‖r_j J_i − r_j J_i P‖` with `r_j` the orthonormalized
/// observable rows and `P` the projector onto their span.
pub fn epsilon_max(basis: &JacobianBasis, m: &DMatrix<f64>) -> Result<f64, LumpingError> {
    let q = check_inputs(basis, m)?;
    Ok(max_residual(basis, &q))
}

/// `‖L f(L̄Lx) − L f(x)‖` for an arbitrary full-row-rank `L` and right
/// inverse `L̄`.
pub fn deviation_with(sys: &OdeSystem, l: &DMatrix<f64>, lbar: &DMatrix<f64>, x: &[f64]) -> Result<f64, LumpingError> {
    let xv = DVector::from_column_slice(x);
    let px = lbar * (l * &xv);
    let fx = sys
        .eval_drift(x)
        .map_err(|e| LumpingError::Eval { component: e.component, at_projection: false })?;
    let fpx = sys
        .eval_drift(px.as_slice())
        .map_err(|e| LumpingError::Eval { component: e.component, at_projection: true })?;
    Ok((l * (fpx - fx)).norm())
}

/// Deviation of an orthonormal lumping at `x`, using `L̄ = Lᵀ`.
pub fn deviation(sys: &OdeSystem, lumping: &LumpingMatrix, x: &[f64]) -> Result<f64, LumpingError> {
    deviation_with(sys, lumping.matrix(), &lumping.pseudoinverse(), x)
}

/// Inputs of the size-targeted tolerance search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSearchConfig {
    pub cutoff: usize,
    pub d_min: f64,
    pub max_iterations: usize,
}

impl EpsilonSearchConfig {
    pub fn new(cutoff: usize, d_min: f64) -> Result<Self, LumpingError> {
        if cutoff == 0 {
            return Err(LumpingError::InvalidConfig("cutoff size must be at least 1".into()));
        }
        if !(d_min > 0.0 && d_min.is_finite()) {
            return Err(LumpingError::InvalidConfig(format!("d_min must be positive, got {d_min}")));
        }
        Ok(EpsilonSearchConfig { cutoff, d_min, max_iterations: 200 })
    }

    pub fn with_max_iterations(mut self, max_iterations: usize) -> Self {
        self.max_iterations = max_iterations;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchOutcome {
    /// Cutoff below the observable rank; `ε_max` returned.
    CutoffBelowObservables,
    /// The exact reduction already fits; `ε = 0` returned.
    ExactFits,
    Bisected,
}

/// One bisection step: the bracket before the step, its midpoint and the
/// reduced size there.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BisectionStep {
    pub lower: f64,
    pub upper: f64,
    pub midpoint: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonSearch {
    pub epsilon: f64,
    pub lumping: LumpingMatrix,
    pub epsilon_max: f64,
    pub size_at_zero: usize,
    pub outcome: SearchOutcome,
    /// Boundary evaluation counts as one iteration, each bisection step as one more.
    pub iterations: usize,
    pub history: Vec<BisectionStep>,
}

/// Bisection on `[0, ε_max]` for the tolerance at which the reduced size
/// first drops to `cfg.cutoff` or below. Returns the upper end of the final
/// bracket, whose size is `≤ cutoff`, with that lumping.
pub fn find_epsilon(basis: &JacobianBasis, m: &DMatrix<f64>, cfg: &EpsilonSearchConfig) -> Result<EpsilonSearch, LumpingError> {
    let eps_max = epsilon_max(basis, m)?;
    let at_max = approximate_lump(basis, m, eps_max)?;
    let at_zero = approximate_lump(basis, m, 0.0)?;
    let size_at_zero = at_zero.size();
    let smallest = at_max.size();

    if cfg.cutoff < smallest {
        log::warn!("cutoff {} is below the smallest reachable size {}; returning ε_max", cfg.cutoff, smallest);
        return Ok(EpsilonSearch {
            epsilon: eps_max,
            lumping: at_max,
            epsilon_max: eps_max,
            size_at_zero,
            outcome: SearchOutcome::CutoffBelowObservables,
            iterations: 1,
            history: Vec::new(),
        });
    }
    if cfg.cutoff >= size_at_zero {
        return Ok(EpsilonSearch {
            epsilon: 0.0,
            lumping: at_zero,
            epsilon_max: eps_max,
            size_at_zero,
            outcome: SearchOutcome::ExactFits,
            iterations: 1,
            history: Vec::new(),
        });
    }

    let (mut lo, mut hi) = (0.0, eps_max);
    let mut best = at_max;
    let mut history = Vec::new();
    while hi - lo >= cfg.d_min {
        if history.len() >= cfg.max_iterations {
            return Err(LumpingError::MaxIterations { iterations: history.len(), d_min: cfg.d_min });
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            // bracket cannot shrink further in floating point
            return Err(LumpingError::MaxIterations { iterations: history.len(), d_min: cfg.d_min });
        }
        let l = approximate_lump(basis, m, mid)?;
        history.push(BisectionStep { lower: lo, upper: hi, midpoint: mid, size: l.size() });
        if l.size() <= cfg.cutoff {
            hi = mid;
            best = l;
        } else {
            lo = mid;
        }
    }
    Ok(EpsilonSearch {
        epsilon: hi,
        lumping: best,
        epsilon_max: eps_max,
        size_at_zero,
        outcome: SearchOutcome::Bisected,
        iterations: 1 + history.len(),
        history,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StaircasePoint {
    pub epsilon: f64,
    pub size: usize,
}

/// Reduced size at each tolerance of `grid`, in grid order.
pub fn staircase(basis: &JacobianBasis, m: &DMatrix<f64>, grid: &[f64]) -> Result<Vec<StaircasePoint>, LumpingError> {
    grid.iter()
        .map(|&epsilon| Ok(StaircasePoint { epsilon, size: approximate_lump(basis, m, epsilon)?.size() }))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
#[error("reduced size increases from {smaller_size} at ε = {smaller_eps:e} to {larger_size} at ε = {larger_eps:e}")]
pub struct MonotonicityViolation {
    pub smaller_eps: f64,
    pub smaller_size: usize,
    pub larger_eps: f64,
    pub larger_size: usize,
}

/// Check that size never increases with ε. Reports the first offending
/// adjacent pair in ε order.
pub fn check_monotone(points: &[StaircasePoint]) -> Result<(), MonotonicityViolation> {
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.epsilon.total_cmp(&b.epsilon));
    for w in sorted.windows(2) {
        if w[1].size > w[0].size {
            return Err(MonotonicityViolation {
                smaller_eps: w[0].epsilon,
                smaller_size: w[0].size,
                larger_eps: w[1].epsilon,
                larger_size: w[1].size,
            });
        }
    }
    Ok(())
}
