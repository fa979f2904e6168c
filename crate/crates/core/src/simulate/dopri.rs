//! Dormand–Prince 5(4) with the classic fourth-order continuous extension.

use nalgebra::DVector;

use super::{SolveError, SolverConfig, Trajectory, VectorField};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// fifth-order solution minus embedded fourth-order one
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 5.0;

/// Interpolation coefficients of one accepted step.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct DenseStep {
    pub t0: f64,
    pub h: f64,
    pub coeffs: [DVector<f64>; 5],
}

impl DenseStep {
    pub fn eval(&self, t: f64) -> DVector<f64> {
        let theta = (t - self.t0) / self.h;
        let theta1 = 1.0 - theta;
        let [r1, r2, r3, r4, r5] = &self.coeffs;
        let inner = r4 + r5 * theta1;
        let inner = r3 + inner * theta;
        let inner = r2 + inner * theta1;
        r1 + inner * theta
    }
}

fn eval_field<F: VectorField + ?Sized>(f: &F, t: f64, x: &DVector<f64>) -> Result<DVector<f64>, SolveError> {
    let mut out = DVector::zeros(x.len());
    f.eval(x.as_slice(), out.as_mut_slice()).map_err(|e| SolveError::Eval {
        t,
        state: x.iter().copied().collect(),
        component: e.component,
    })?;
    Ok(out)
}

pub(crate) fn integrate<F: VectorField + ?Sized>(
    f: &F,
    x0: &DVector<f64>,
    horizon: f64,
    cfg: &SolverConfig,
    stops: &[f64],
) -> Result<Trajectory, SolveError> {
    cfg.validate()?;
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(SolveError::InvalidConfig(format!("horizon must be positive, got {horizon}")));
    }
    if x0.len() != f.dim() {
        return Err(SolveError::InvalidConfig(format!("initial state of length {} for a field of dimension {}", x0.len(), f.dim())));
    }

    // interior times the step sequence must land on exactly
    let mut stops: Vec<f64> = stops.iter().copied().filter(|&s| s > 0.0 && s < horizon).collect();
    stops.sort_by(f64::total_cmp);
    stops.dedup();
    let mut next_stop = 0;

    let n = x0.len();
    let mut t = 0.0;
    let mut y = x0.clone();
    let mut k1 = eval_field(f, t, &y)?;
    let mut h = cfg.initial_step.min(cfg.max_step).min(horizon);

    let mut times = vec![0.0];
    let mut states = vec![y.clone()];
    let mut dense = Vec::new();
    let mut accepted = 0usize;
    let mut rejected = 0usize;
    let mut last_rejected = false;

    while t < horizon {
        if accepted + rejected >= cfg.max_steps {
            return Err(SolveError::MaxSteps { t, steps: accepted + rejected, rejected });
        }
        let target = stops.get(next_stop).copied().unwrap_or(horizon);
        let remaining = target - t;
        let last = h >= remaining;
        if last {
            h = remaining;
        }
        if h < 1e-14 * t.abs().max(1.0) {
            return Err(SolveError::StepUnderflow { t, h, rejected });
        }

        let k2 = eval_field(f, t + C2 * h, &(&y + &k1 * (h * A21)))?;
        let k3 = eval_field(f, t + C3 * h, &(&y + (&k1 * A31 + &k2 * A32) * h))?;
        let k4 = eval_field(f, t + C4 * h, &(&y + (&k1 * A41 + &k2 * A42 + &k3 * A43) * h))?;
        let k5 = eval_field(f, t + C5 * h, &(&y + (&k1 * A51 + &k2 * A52 + &k3 * A53 + &k4 * A54) * h))?;
        let k6 = eval_field(f, t + h, &(&y + (&k1 * A61 + &k2 * A62 + &k3 * A63 + &k4 * A64 + &k5 * A65) * h))?;
        let y_new = &y + (&k1 * A71 + &k3 * A73 + &k4 * A74 + &k5 * A75 + &k6 * A76) * h;
        let k7 = eval_field(f, t + h, &y_new)?;

        let err_vec = (&k1 * E1 + &k3 * E3 + &k4 * E4 + &k5 * E5 + &k6 * E6 + &k7 * E7) * h;
        let mut acc = 0.0;
        for i in 0..n {
            let scale = cfg.abs_tol.max(cfg.rel_tol * y[i].abs().max(y_new[i].abs()));
            acc += (err_vec[i] / scale).powi(2);
        }
        let err = (acc / n.max(1) as f64).sqrt();
        if !err.is_finite() {
            // overflow inside the stages; retry with a much smaller step
            rejected += 1;
            last_rejected = true;
            h *= FAC_MIN;
            continue;
        }

        let mut fac = if err == 0.0 { FAC_MAX } else { (SAFETY * err.powf(-0.2)).clamp(FAC_MIN, FAC_MAX) };
        if err <= 1.0 {
            if last_rejected {
                fac = fac.min(1.0);
            }
            let r2 = &y_new - &y;
            let r3 = &k1 * h - &r2;
            let r4 = &r2 - &k7 * h - &r3;
            let r5 = (&k1 * D1 + &k3 * D3 + &k4 * D4 + &k5 * D5 + &k6 * D6 + &k7 * D7) * h;
            dense.push(DenseStep { t0: t, h, coeffs: [y.clone(), r2, r3, r4, r5] });
            t = if last { target } else { t + h };
            if last && next_stop < stops.len() {
                next_stop += 1;
            }
            y = y_new;
            k1 = k7;
            times.push(t);
            states.push(y.clone());
            accepted += 1;
            last_rejected = false;
        } else {
            rejected += 1;
            last_rejected = true;
            fac = fac.min(1.0);
        }
        h = (h * fac).min(cfg.max_step);
    }

    if rejected > accepted {
        log::warn!("{rejected} rejected vs {accepted} accepted steps; the system may be stiff");
    }
    Ok(Trajectory { times, states, dense, accepted, rejected })
}
