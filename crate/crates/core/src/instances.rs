//! Built-in problem instances and a seeded generator of random valid plants.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{LqrError, Result};
use crate::linalg::{block2, eigenvalues, hstack, singular_values, Mat, Vector};
use crate::model::{structural_report, Instance, Plant};

pub const BUILTIN_NAMES: [&str; 4] = [
    "single-integrator",
    "example-3-1",
    "example-4-3",
    "example-5-1",
];

/// Default coupling `a` for the two-state examples.
pub const DEFAULT_COUPLING: f64 = 0.1;
/// Random plants are redrawn until every mode with `Re λ ≥ -0.1` is this
/// far from uncontrollable.
pub const MIN_STABILIZABILITY_MARGIN: f64 = 0.05;

fn m(r: usize, c: usize, v: &[f64]) -> Mat {
    Mat::from_row_slice(r, c, v)
}

/// `A = 0`, `B = 1/2`, `Q = R = W = 1`, `x0 = 1`.
pub fn single_integrator() -> Instance {
    let one = m(1, 1, &[1.0]);
    let plant = Plant::new(
        m(1, 1, &[0.0]),
        m(1, 1, &[0.5]),
        one.clone(),
        one.clone(),
        one,
    )
    .expect("built-in instance is valid");
    Instance {
        plant,
        b1: None,
        x0: Some(Vector::from_element(1, 1.0)),
    }
}

/// Symmetric two-state plant with singular `W`; optimal gains are not unique.
pub fn example_3_1(a: f64) -> Instance {
    let plant = Plant::new(
        m(2, 2, &[-1.0, a, a, -1.0]),
        m(2, 1, &[1.0, 1.0]),
        Mat::identity(2, 2),
        m(1, 1, &[1.0]),
        m(2, 2, &[1.0, -1.0, -1.0, 1.0]),
    )
    .expect("built-in instance is valid");
    Instance::new(plant)
}

/// Controllable two-state plant with `W = B B'` (carried as `B1 = B`).
pub fn example_4_3(a: f64) -> Instance {
    let b = m(2, 1, &[1.0, 1.0]);
    let plant = Plant::new(
        m(2, 2, &[-10.0, a, a, -1.0]),
        b.clone(),
        Mat::identity(2, 2),
        m(1, 1, &[1.0]),
        &b * b.transpose(),
    )
    .expect("built-in instance is valid");
    Instance {
        plant,
        b1: Some(b),
        x0: None,
    }
}

/// Scalar integrator `ẋ = u` started at `x0 = 1`, unit weights.
pub fn example_5_1() -> Instance {
    let one = m(1, 1, &[1.0]);
    let plant = Plant::new(m(1, 1, &[0.0]), one.clone(), one.clone(), one.clone(), one)
        .expect("built-in instance is valid");
    Instance {
        plant,
        b1: None,
        x0: Some(Vector::from_element(1, 1.0)),
    }
}

/// Look up a built-in by name; `coupling` overrides `a` where it applies.
pub fn builtin(name: &str, coupling: Option<f64>) -> Result<Instance> {
    let a = coupling.unwrap_or(DEFAULT_COUPLING);
    match name {
        "single-integrator" | "example-4-2" => Ok(single_integrator()),
        "example-3-1" => {
            if !(a > 0.0 && a < 1.0) {
                return Err(LqrError::Parameter(format!(
                    "example-3-1 needs 0 < a < 1, got {a}"
                )));
            }
            Ok(example_3_1(a))
        }
        "example-4-3" => Ok(example_4_3(a)),
        "example-5-1" => Ok(example_5_1()),
        other => Err(LqrError::InvalidInput(format!(
            "unknown built-in '{other}' (known: {})",
            BUILTIN_NAMES.join(", ")
        ))),
    }
}

fn gaussian(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Mat {
    Mat::from_fn(r, c, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Shape of randomly generated instances.
#[derive(Debug, Clone, Copy, Default)]
pub struct RandomShape {
    pub n: Option<usize>,
    pub m: Option<usize>,
}

/// A random plant with `Q, R, W ≻ 0` that satisfies stabilizability and
/// detectability; `n ≤ 6`, `m ≤ 3` unless fixed by `shape`. Deterministic
/// per seed.
pub fn random_plant(seed: u64, shape: RandomShape) -> Plant {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let n = shape.n.unwrap_or_else(|| rng.random_range(1..=6));
        let m = shape.m.unwrap_or_else(|| rng.random_range(1..=n.min(3)));
        let shift: f64 = rng.random_range(-0.5..0.5);
        let a = gaussian(&mut rng, n, n) / (n as f64).sqrt() - Mat::identity(n, n) * shift;
        let b = gaussian(&mut rng, n, m);
        let lq = gaussian(&mut rng, n, n);
        let q = &lq * lq.transpose() / n as f64 + Mat::identity(n, n) * 0.2;
        let lr = gaussian(&mut rng, m, m);
        let r = &lr * lr.transpose() / m as f64 + Mat::identity(m, m) * 0.5;
        let lw = gaussian(&mut rng, n, n);
        let w = &lw * lw.transpose() / n as f64 + Mat::identity(n, n) * 0.3;
        let Ok(plant) = Plant::new(a, b, q, r, w) else {
            continue;
        };
        let ok = structural_report(&plant, None)
            .map(|r| r.assumption1_holds)
            .unwrap_or(false);
        if ok && stabilizability_margin(plant.a(), plant.b()) >= MIN_STABILIZABILITY_MARGIN {
            return plant;
        }
    }
}

/// Smallest `σ_min([A - λI, B])` over eigenvalues with `Re λ ≥ -0.1`.
pub fn stabilizability_margin(a: &Mat, b: &Mat) -> f64 {
    let (n, m) = (b.nrows(), b.ncols());
    let Ok(eigs) = eigenvalues(a) else { return 0.0 };
    eigs.iter()
        .filter(|z| z.re >= -0.1)
        .map(|z| {
            let re = hstack(&(a - Mat::identity(n, n) * z.re), b);
            let mut im = Mat::zeros(n, n + m);
            im.view_mut((0, 0), (n, n)).fill_diagonal(-z.im);
            let embedded = block2(&re, &(-&im), &im, &re);
            singular_values(&embedded)[2 * n - 1]
        })
        .fold(f64::INFINITY, f64::min)
}

/// A random unit vector in `R^n`, deterministic per seed.
pub fn random_unit_vector(seed: u64, n: usize) -> Vector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    loop {
        let v = Vector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let norm = v.norm();
        if norm > 1e-3 {
            return v / norm;
        }
    }
}
