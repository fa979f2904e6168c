#![allow(dead_code)]

use std::path::PathBuf;

use lumpkit::rng::SampleRng;
use lumpkit::{parse_model, OdeSystem};
use nalgebra::DMatrix;

pub fn models_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("models")
}

pub fn load(name: &str) -> OdeSystem {
    let text = std::fs::read_to_string(models_dir().join(name)).unwrap();
    parse_model(&text).unwrap()
}

pub fn lumpable() -> OdeSystem {
    load("lumpable.ode")
}

pub fn perturbed() -> OdeSystem {
    load("perturbed.ode")
}

pub const LUMPABLE_POINTS: [[f64; 3]; 5] = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 5.0, 2.0], [3.0, 3.0, 2.0]];

pub const PERTURBED_POINTS: [[f64; 3]; 6] =
    [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 5.0, 2.0], [3.0, 3.0, 2.0], [5.0, 2.0, 3.0]];

pub fn points(p: &[[f64; 3]]) -> Vec<Vec<f64>> {
    p.iter().map(|x| x.to_vec()).collect()
}

/// `(1,0,0)` and `(0,1,2)`.
pub fn two_row_lumping() -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 2.0])
}

fn coefficient(rng: &mut SampleRng) -> f64 {
    // two decimals so the text form is exact to parse back
    let c = (rng.uniform_in(-1.0, 1.0) * 100.0).round() / 100.0;
    if c == 0.0 {
        0.5
    } else {
        c
    }
}

/// Model text of a random polynomial system: `m` variables, one to four
/// monomials of total degree at most `max_degree` per equation, a random
/// rank-one observable and unit initial conditions.
pub fn random_polynomial_model(seed: u64, m: usize, max_degree: u32) -> String {
    let mut rng = SampleRng::new(seed);
    let names: Vec<String> = (1..=m).map(|i| format!("x{i}")).collect();
    let mut text = format!("model random{seed}\nvar {}\n", names.join(", "));
    for name in &names {
        let terms = 1 + rng.below(4) as usize;
        let mut monomials = Vec::new();
        for _ in 0..terms {
            let degree = rng.below(max_degree as u64 + 1) as u32;
            let mut factors = vec![format!("({})", coefficient(&mut rng))];
            for _ in 0..degree {
                factors.push(names[rng.below(m as u64) as usize].clone());
            }
            monomials.push(factors.join("*"));
        }
        text.push_str(&format!("eq {name} = {}\n", monomials.join(" + ")));
    }
    for name in &names {
        text.push_str(&format!("init {name} = 1\n"));
    }
    let obs: Vec<String> = names.iter().map(|n| format!("({})*{n}", coefficient(&mut rng))).collect();
    text.push_str(&format!("obs {}\nhorizon 1\n", obs.join(" + ")));
    text
}

pub fn random_polynomial_system(seed: u64, m: usize, max_degree: u32) -> OdeSystem {
    parse_model(&random_polynomial_model(seed, m, max_degree)).unwrap()
}

/// The `count` systems of the random corpus: sizes cycle through 3..=6,
/// degree at most 3.
pub fn random_corpus(count: usize) -> Vec<OdeSystem> {
    (0..count).map(|k| random_polynomial_system(1000 + k as u64, 3 + k % 4, 3)).collect()
}

/// Classic fixed-step fourth-order Runge–Kutta; the last step is shortened
/// to land on `horizon`.
pub fn rk4(sys: &OdeSystem, x0: &[f64], horizon: f64, h: f64) -> Vec<f64> {
    let f = |x: &[f64]| sys.eval_drift(x).unwrap().as_slice().to_vec();
    let axpy = |x: &[f64], k: &[f64], a: f64| x.iter().zip(k).map(|(xi, ki)| xi + a * ki).collect::<Vec<_>>();
    let mut x = x0.to_vec();
    let mut t = 0.0;
    while t < horizon {
        let step = h.min(horizon - t);
        let k1 = f(&x);
        let k2 = f(&axpy(&x, &k1, step / 2.0));
        let k3 = f(&axpy(&x, &k2, step / 2.0));
        let k4 = f(&axpy(&x, &k3, step));
        for i in 0..x.len() {
            x[i] += step / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        t += step;
        if horizon - t < 1e-12 {
            break;
        }
    }
    x
}

/// Central-difference Jacobian, row `i` holding the gradient of `f_i`.
pub fn finite_difference_jacobian(sys: &OdeSystem, x: &[f64]) -> DMatrix<f64> {
    let m = x.len();
    let mut jac = DMatrix::zeros(m, m);
    for j in 0..m {
        let h = 1e-6 * x[j].abs().max(1.0);
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[j] += h;
        xm[j] -= h;
        let fp = sys.eval_drift(&xp).unwrap();
        let fm = sys.eval_drift(&xm).unwrap();
        for i in 0..m {
            jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    jac
}
