//! Forward-mode dual numbers carrying a full gradient.

use super::expr::{pow_u32, Scalar, ZeroDenominator};

/// A value together with its partial derivatives with respect to every
/// system variable.
#[derive(Debug, Clone, PartialEq)]
pub struct Dual {
    pub value: f64,
    pub partials: Vec<f64>,
}

impl Dual {
    pub fn constant(value: f64, nvars: usize) -> Self {
        Dual { value, partials: vec![0.0; nvars] }
    }

    /// The seed for coordinate `index` of `point`.
    pub fn variable(index: usize, point: &[f64]) -> Self {
        let mut partials = vec![0.0; point.len()];
        partials[index] = 1.0;
        Dual { value: point[index], partials }
    }

    fn zip_with(mut self, rhs: &Dual, f: impl Fn(f64, f64) -> f64) -> Self {
        self.partials.iter_mut().zip(&rhs.partials).for_each(|(a, b)| *a = f(*a, *b));
        self
    }
}

impl Scalar for Dual {
    fn constant(c: f64, nvars: usize) -> Self {
        Dual::constant(c, nvars)
    }

    fn variable(index: usize, point: &[f64]) -> Self {
        Dual::variable(index, point)
    }

    fn add(self, rhs: Self) -> Self {
        let value = self.value + rhs.value;
        Dual { value, ..self.zip_with(&rhs, |a, b| a + b) }
    }

    fn sub(self, rhs: Self) -> Self {
        let value = self.value - rhs.value;
        Dual { value, ..self.zip_with(&rhs, |a, b| a - b) }
    }

    fn mul(self, rhs: Self) -> Self {
        let (u, v) = (self.value, rhs.value);
        Dual { value: u * v, ..self.zip_with(&rhs, |du, dv| du * v + u * dv) }
    }

    fn div(self, rhs: Self) -> Result<Self, ZeroDenominator> {
        let (u, v) = (self.value, rhs.value);
        if v == 0.0 {
            return Err(ZeroDenominator);
        }
        let v2 = v * v;
        Ok(Dual { value: u / v, ..self.zip_with(&rhs, |du, dv| (du * v - u * dv) / v2) })
    }

    fn neg(mut self) -> Self {
        self.value = -self.value;
        self.partials.iter_mut().for_each(|d| *d = -*d);
        self
    }

    fn powi(mut self, n: u32) -> Self {
        if n == 0 {
            self.value = 1.0;
            self.partials.iter_mut().for_each(|d| *d = 0.0);
            return self;
        }
        let scale = n as f64 * pow_u32(self.value, n - 1);
        self.value = pow_u32(self.value, n);
        self.partials.iter_mut().for_each(|d| *d *= scale);
        self
    }
}
