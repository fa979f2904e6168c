//! ODE systems with rational drifts and linear observables.

mod dual;
mod expr;
mod parser;

pub use dual::Dual;
pub use expr::{Expr, ZeroDenominator};
pub use parser::{parse_expr, parse_model};

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use crate::linalg;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("line {line}, column {column}: undeclared variable `{name}`")]
    UndeclaredVariable { line: usize, column: usize, name: String },
    #[error("line {line}, column {column}: exponent must be a non-negative integer literal, found `{found}`")]
    NonIntegerExponent { line: usize, column: usize, found: String },
    #[error("line {line}, column {column}: variable `{name}` declared twice")]
    DuplicateVariable { line: usize, column: usize, name: String },
    #[error("line {line}: duplicate `{what}` for `{name}`")]
    DuplicateDefinition { line: usize, what: &'static str, name: String },
    #[error("line {line}: observable is not a linear combination of variables")]
    NonLinearObservable { line: usize },
    #[error("no variables declared")]
    NoVariables,
    #[error("missing equation for `{name}`")]
    MissingEquation { name: String },
    #[error("missing initial value for `{name}`")]
    MissingInit { name: String },
    #[error("missing `horizon`")]
    MissingHorizon,
    #[error("no observables declared")]
    MissingObservables,
    #[error("time horizon must be positive and finite, got {value}")]
    InvalidHorizon { value: f64 },
    #[error("need 1 <= p < m observables, got p = {p} for m = {m} variables")]
    ObservableCount { p: usize, m: usize },
    #[error("observable matrix is rank deficient (p = {p})")]
    RankDeficientObservables { p: usize },
    #[error("{0}")]
    Shape(String),
}

/// Drift evaluation hit a zero denominator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("drift component {component} has a zero denominator at the evaluation point")]
pub struct EvalError {
    pub component: usize,
}

/// An autonomous system `ẋ = f(x)` with linear observables `M x`.
///
/// Immutable once constructed; every invariant is checked by [`OdeSystem::new`].
#[derive(Debug, Clone, PartialEq)]
pub struct OdeSystem {
    name: String,
    var_names: Vec<String>,
    drift: Vec<Expr>,
    initial_conditions: Vec<DVector<f64>>,
    horizon: f64,
    observables: DMatrix<f64>,
}

impl OdeSystem {
    pub fn new(
        name: impl Into<String>,
        var_names: Vec<String>,
        drift: Vec<Expr>,
        initial_conditions: Vec<DVector<f64>>,
        horizon: f64,
        observables: DMatrix<f64>,
    ) -> Result<Self, ModelError> {
        let m = var_names.len();
        if m == 0 {
            return Err(ModelError::NoVariables);
        }
        if drift.len() != m {
            return Err(ModelError::Shape(format!("{} drift components for {m} variables", drift.len())));
        }
        if let Some(i) = drift.iter().filter_map(Expr::max_var).find(|&i| i >= m) {
            return Err(ModelError::Shape(format!("drift references variable index {i} >= {m}")));
        }
        if initial_conditions.is_empty() {
            return Err(ModelError::Shape("at least one initial condition is required".into()));
        }
        if let Some(x0) = initial_conditions.iter().find(|x0| x0.len() != m) {
            return Err(ModelError::Shape(format!("initial condition of length {} for {m} variables", x0.len())));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(ModelError::InvalidHorizon { value: horizon });
        }
        let p = observables.nrows();
        if observables.ncols() != m {
            return Err(ModelError::Shape(format!("observable matrix has {} columns for {m} variables", observables.ncols())));
        }
        if p == 0 || p >= m {
            return Err(ModelError::ObservableCount { p, m });
        }
        if linalg::orthonormalize_rows(&observables).is_err() {
            return Err(ModelError::RankDeficientObservables { p });
        }
        Ok(OdeSystem { name: name.into(), var_names, drift, initial_conditions, horizon, observables })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn var_names(&self) -> &[String] {
        &self.var_names
    }

    pub fn drift(&self) -> &[Expr] {
        &self.drift
    }

    pub fn initial_conditions(&self) -> &[DVector<f64>] {
        &self.initial_conditions
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn observables(&self) -> &DMatrix<f64> {
        &self.observables
    }

    /// Number of state variables `m`.
    pub fn dim(&self) -> usize {
        self.var_names.len()
    }

    /// Number of observable rows `p`.
    pub fn observable_count(&self) -> usize {
        self.observables.nrows()
    }

    /// Same system with a different horizon.
    pub fn with_horizon(&self, horizon: f64) -> Result<Self, ModelError> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(ModelError::InvalidHorizon { value: horizon });
        }
        Ok(OdeSystem { horizon, ..self.clone() })
    }

    /// Same system with different observables.
    pub fn with_observables(&self, observables: DMatrix<f64>) -> Result<Self, ModelError> {
        OdeSystem::new(
            self.name.clone(),
            self.var_names.clone(),
            self.drift.clone(),
            self.initial_conditions.clone(),
            self.horizon,
            observables,
        )
    }

    /// `f(x)`, written into `out`.
    pub fn eval_drift_into(&self, x: &[f64], out: &mut [f64]) -> Result<(), EvalError> {
        assert_eq!(x.len(), self.dim(), "state dimension mismatch");
        for (component, (e, o)) in self.drift.iter().zip(out.iter_mut()).enumerate() {
            *o = e.eval(x).map_err(|_| EvalError { component })?;
        }
        Ok(())
    }

    /// `f(x)`.
    pub fn eval_drift(&self, x: &[f64]) -> Result<DVector<f64>, EvalError> {
        let mut out = DVector::zeros(self.dim());
        self.eval_drift_into(x, out.as_mut_slice())?;
        Ok(out)
    }

    /// `f(x)` and the Jacobian `J(x)` (row `i` is the gradient of `f_i`),
    /// computed by forward-mode differentiation.
    pub fn eval_drift_dual(&self, x: &[f64]) -> Result<(DVector<f64>, DMatrix<f64>), EvalError> {
        let m = self.dim();
        assert_eq!(x.len(), m, "state dimension mismatch");
        let mut value = DVector::zeros(m);
        let mut jac = DMatrix::zeros(m, m);
        for (component, e) in self.drift.iter().enumerate() {
            let d = e.eval_dual(x).map_err(|_| EvalError { component })?;
            value[component] = d.value;
            for (j, p) in d.partials.iter().enumerate() {
                jac[(component, j)] = *p;
            }
        }
        Ok((value, jac))
    }

    /// Render back into the model text format. Only the first initial
    /// condition is written.
    pub fn to_model_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "model {}", self.name);
        let _ = writeln!(s, "var {}", self.var_names.join(", "));
        for (n, e) in self.var_names.iter().zip(&self.drift) {
            let _ = writeln!(s, "eq {n} = {}", e.display_with(&self.var_names));
        }
        for (n, v) in self.var_names.iter().zip(self.initial_conditions[0].iter()) {
            let _ = writeln!(s, "init {n} = {v:?}");
        }
        for row in self.observables.row_iter() {
            let terms: Vec<String> = row
                .iter()
                .zip(&self.var_names)
                .filter(|(c, _)| **c != 0.0)
                .map(|(c, n)| format!("({c:?})*{n}"))
                .collect();
            let _ = writeln!(s, "obs {}", terms.join(" + "));
        }
        let _ = writeln!(s, "horizon {:?}", self.horizon);
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear(a: &DMatrix<f64>) -> OdeSystem {
        let m = a.nrows();
        let drift = (0..m)
            .map(|i| {
                (0..m)
                    .map(|j| Expr::constant(a[(i, j)]) * Expr::var(j))
                    .reduce(|x, y| x + y)
                    .unwrap()
            })
            .collect();
        let mut obs = DMatrix::zeros(1, m);
        obs[(0, 0)] = 1.0;
        OdeSystem::new(
            "lin",
            (0..m).map(|i| format!("x{i}")).collect(),
            drift,
            vec![DVector::from_element(m, 1.0)],
            1.0,
            obs,
        )
        .unwrap()
    }

    #[test]
    fn linear_drift_vanishes_at_origin() {
        let a = DMatrix::from_row_slice(3, 3, &[1.0, -2.0, 0.5, 3.0, 0.0, 1.0, -1.0, 4.0, 2.0]);
        let sys = linear(&a);
        assert_eq!(sys.eval_drift(&[0.0; 3]).unwrap(), DVector::zeros(3));
        let (_, jac) = sys.eval_drift_dual(&[0.3, -1.0, 2.0]).unwrap();
        assert_eq!(jac, a);
    }

    #[test]
    fn constant_drift_has_zero_jacobian() {
        let sys = OdeSystem::new(
            "c",
            vec!["a".into(), "b".into()],
            vec![Expr::constant(1.5), Expr::constant(-2.0)],
            vec![DVector::zeros(2)],
            1.0,
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
        )
        .unwrap();
        let (f, j) = sys.eval_drift_dual(&[0.7, 0.1]).unwrap();
        assert_eq!(f.as_slice(), &[1.5, -2.0]);
        assert_eq!(j, DMatrix::zeros(2, 2));
    }

    #[test]
    fn zero_denominator_names_component() {
        let sys = OdeSystem::new(
            "d",
            vec!["a".into(), "b".into()],
            vec![Expr::constant(1.0), Expr::constant(1.0) / Expr::var(0)],
            vec![DVector::zeros(2)],
            1.0,
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
        )
        .unwrap();
        assert_eq!(sys.eval_drift(&[0.0, 1.0]), Err(EvalError { component: 1 }));
        assert_eq!(sys.eval_drift_dual(&[0.0, 1.0]).unwrap_err(), EvalError { component: 1 });
    }

    #[test]
    fn rejects_out_of_range_variable() {
        let r = OdeSystem::new(
            "bad",
            vec!["a".into(), "b".into()],
            vec![Expr::var(2), Expr::var(0)],
            vec![DVector::zeros(2)],
            1.0,
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
        );
        assert!(matches!(r, Err(ModelError::Shape(_))));
    }
}
