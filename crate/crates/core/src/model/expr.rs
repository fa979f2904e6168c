//! Rational expression trees over the variables of a system.

use std::fmt;

use super::dual::Dual;

/// A node of a rational expression over indexed variables.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(usize),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Pow(Box<Expr>, u32),
}

/// A denominator evaluated to exactly zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("division by zero")]
pub struct ZeroDenominator;

/// Arithmetic needed to evaluate an [`Expr`]; implemented for `f64` and [`Dual`].
pub(crate) trait Scalar: Sized {
    fn constant(c: f64, nvars: usize) -> Self;
    fn variable(index: usize, point: &[f64]) -> Self;
    fn add(self, rhs: Self) -> Self;
    fn sub(self, rhs: Self) -> Self;
    fn mul(self, rhs: Self) -> Self;
    fn div(self, rhs: Self) -> Result<Self, ZeroDenominator>;
    fn neg(self) -> Self;
    fn powi(self, n: u32) -> Self;
}

impl Scalar for f64 {
    fn constant(c: f64, _: usize) -> Self {
        c
    }
    fn variable(index: usize, point: &[f64]) -> Self {
        point[index]
    }
    fn add(self, rhs: Self) -> Self {
        self + rhs
    }
    fn sub(self, rhs: Self) -> Self {
        self - rhs
    }
    fn mul(self, rhs: Self) -> Self {
        self * rhs
    }
    fn div(self, rhs: Self) -> Result<Self, ZeroDenominator> {
        if rhs == 0.0 {
            Err(ZeroDenominator)
        } else {
            Ok(self / rhs)
        }
    }
    fn neg(self) -> Self {
        -self
    }
    fn powi(self, n: u32) -> Self {
        pow_u32(self, n)
    }
}

/// Exponentiation by squaring; `x^0 == 1` for every `x`.
pub(crate) fn pow_u32(x: f64, n: u32) -> f64 {
    let mut acc = 1.0;
    let mut base = x;
    let mut n = n;
    while n > 0 {
        if n & 1 == 1 {
            acc *= base;
        }
        base *= base;
        n >>= 1;
    }
    acc
}

impl Expr {
    pub fn constant(c: f64) -> Self {
        Expr::Const(c)
    }

    pub fn var(index: usize) -> Self {
        Expr::Var(index)
    }

    pub fn pow(self, n: u32) -> Self {
        Expr::Pow(Box::new(self), n)
    }

    /// Evaluate at `point`. Panics if a variable index is out of range.
    pub fn eval(&self, point: &[f64]) -> Result<f64, ZeroDenominator> {
        self.eval_generic::<f64>(point)
    }

    /// Evaluate value and gradient with respect to every coordinate of `point`.
    pub fn eval_dual(&self, point: &[f64]) -> Result<Dual, ZeroDenominator> {
        self.eval_generic::<Dual>(point)
    }

    pub(crate) fn eval_generic<S: Scalar>(&self, point: &[f64]) -> Result<S, ZeroDenominator> {
        Ok(match self {
            Expr::Const(c) => S::constant(*c, point.len()),
            Expr::Var(i) => S::variable(*i, point),
            Expr::Add(a, b) => a.eval_generic::<S>(point)?.add(b.eval_generic(point)?),
            Expr::Sub(a, b) => a.eval_generic::<S>(point)?.sub(b.eval_generic(point)?),
            Expr::Mul(a, b) => a.eval_generic::<S>(point)?.mul(b.eval_generic(point)?),
            Expr::Div(a, b) => a.eval_generic::<S>(point)?.div(b.eval_generic(point)?)?,
            Expr::Neg(a) => a.eval_generic::<S>(point)?.neg(),
            Expr::Pow(a, n) => a.eval_generic::<S>(point)?.powi(*n),
        })
    }

    /// Largest variable index referenced, if any.
    pub fn max_var(&self) -> Option<usize> {
        match self {
            Expr::Const(_) => None,
            Expr::Var(i) => Some(*i),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                match (a.max_var(), b.max_var()) {
                    (Some(x), Some(y)) => Some(x.max(y)),
                    (x, y) => x.or(y),
                }
            }
            Expr::Neg(a) | Expr::Pow(a, _) => a.max_var(),
        }
    }

    /// Fold constant subtrees. Folds that would produce a non-finite value
    /// (including division by a zero constant) are left in place so the
    /// failure surfaces at evaluation time.
    pub fn fold_constants(self) -> Expr {
        fn finite(v: f64) -> Option<Expr> {
            v.is_finite().then_some(Expr::Const(v))
        }
        match self {
            Expr::Const(_) | Expr::Var(_) => self,
            Expr::Neg(a) => match a.fold_constants() {
                Expr::Const(c) => Expr::Const(-c),
                a => Expr::Neg(Box::new(a)),
            },
            Expr::Pow(a, n) => match a.fold_constants() {
                Expr::Const(c) => finite(pow_u32(c, n)).unwrap_or(Expr::Pow(Box::new(Expr::Const(c)), n)),
                a => Expr::Pow(Box::new(a), n),
            },
            Expr::Add(a, b) => fold_binary(*a, *b, Expr::Add, |x, y| Some(x + y)),
            Expr::Sub(a, b) => fold_binary(*a, *b, Expr::Sub, |x, y| Some(x - y)),
            Expr::Mul(a, b) => fold_binary(*a, *b, Expr::Mul, |x, y| Some(x * y)),
            Expr::Div(a, b) => fold_binary(*a, *b, Expr::Div, |x, y| (y != 0.0).then(|| x / y)),
        }
    }

    /// Coefficients `(a, c)` such that the expression equals `a·x + c`, or
    /// `None` if it is not affine in the variables.
    pub fn affine_coefficients(&self, nvars: usize) -> Option<(Vec<f64>, f64)> {
        let is_const = |(a, _): &(Vec<f64>, f64)| a.iter().all(|v| *v == 0.0);
        match self {
            Expr::Const(c) => Some((vec![0.0; nvars], *c)),
            Expr::Var(i) => {
                let mut a = vec![0.0; nvars];
                *a.get_mut(*i)? = 1.0;
                Some((a, 0.0))
            }
            Expr::Add(x, y) | Expr::Sub(x, y) => {
                let sign = if matches!(self, Expr::Add(..)) { 1.0 } else { -1.0 };
                let (mut a, c) = x.affine_coefficients(nvars)?;
                let (b, d) = y.affine_coefficients(nvars)?;
                a.iter_mut().zip(&b).for_each(|(u, v)| *u += sign * v);
                Some((a, c + sign * d))
            }
            Expr::Neg(x) => {
                let (a, c) = x.affine_coefficients(nvars)?;
                Some((a.into_iter().map(|v| -v).collect(), -c))
            }
            Expr::Mul(x, y) => {
                let l = x.affine_coefficients(nvars)?;
                let r = y.affine_coefficients(nvars)?;
                let (lin, k) = if is_const(&l) {
                    (r, l.1)
                } else if is_const(&r) {
                    (l, r.1)
                } else {
                    return None;
                };
                Some((lin.0.into_iter().map(|v| v * k).collect(), lin.1 * k))
            }
            Expr::Div(x, y) => {
                let r = y.affine_coefficients(nvars)?;
                if !is_const(&r) || r.1 == 0.0 {
                    return None;
                }
                let (a, c) = x.affine_coefficients(nvars)?;
                Some((a.into_iter().map(|v| v / r.1).collect(), c / r.1))
            }
            Expr::Pow(x, n) => {
                let l = x.affine_coefficients(nvars)?;
                match n {
                    0 => Some((vec![0.0; nvars], 1.0)),
                    1 => Some(l),
                    _ if is_const(&l) => Some((vec![0.0; nvars], pow_u32(l.1, *n))),
                    _ => None,
                }
            }
        }
    }

    /// Fully parenthesized rendering that the model parser reads back into
    /// an identical tree.
    pub fn display_with<'a>(&'a self, names: &'a [String]) -> impl fmt::Display + 'a {
        Printer { expr: self, names }
    }
}

fn fold_binary(
    a: Expr,
    b: Expr,
    build: fn(Box<Expr>, Box<Expr>) -> Expr,
    op: impl Fn(f64, f64) -> Option<f64>,
) -> Expr {
    let a = a.fold_constants();
    let b = b.fold_constants();
    if let (Expr::Const(x), Expr::Const(y)) = (&a, &b) {
        if let Some(v) = op(*x, *y).filter(|v| v.is_finite()) {
            return Expr::Const(v);
        }
    }
    build(Box::new(a), Box::new(b))
}

struct Printer<'a> {
    expr: &'a Expr,
    names: &'a [String],
}

impl<'a> fmt::Display for Printer<'a> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sub = |e: &'a Expr| Printer { expr: e, names: self.names };
        match self.expr {
            Expr::Const(c) if *c < 0.0 || (*c == 0.0 && c.is_sign_negative()) => write!(f, "(-{:?})", -c),
            Expr::Const(c) => write!(f, "{c:?}"),
            Expr::Var(i) => match self.names.get(*i) {
                Some(n) => f.write_str(n),
                None => write!(f, "x{i}"),
            },
            Expr::Add(a, b) => write!(f, "({} + {})", sub(a), sub(b)),
            Expr::Sub(a, b) => write!(f, "({} - {})", sub(a), sub(b)),
            Expr::Mul(a, b) => write!(f, "({} * {})", sub(a), sub(b)),
            Expr::Div(a, b) => write!(f, "({} / {})", sub(a), sub(b)),
            Expr::Neg(a) => write!(f, "(-{})", sub(a)),
            Expr::Pow(a, n) => write!(f, "({}^{n})", sub(a)),
        }
    }
}

impl std::ops::Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        Expr::Add(Box::new(self), Box::new(rhs))
    }
}

impl std::ops::Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        Expr::Sub(Box::new(self), Box::new(rhs))
    }
}

impl std::ops::Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        Expr::Mul(Box::new(self), Box::new(rhs))
    }
}

impl std::ops::Div for Expr {
    type Output = Expr;
    fn div(self, rhs: Expr) -> Expr {
        Expr::Div(Box::new(self), Box::new(rhs))
    }
}

impl std::ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::Neg(Box::new(self))
    }
}
