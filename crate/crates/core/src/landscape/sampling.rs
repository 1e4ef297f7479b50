use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LqrError, Result};
use crate::linalg::{sym_eigenvalues, Mat};
use crate::lyap_riccati::{closed_loop_gramian, cost, solve_care};
use crate::model::Plant;
use crate::tolerances::Tolerances;

/// How points of the sublevel set are obtained.
#[derive(Debug, Clone, PartialEq)]
pub enum Sampling {
    Random {
        count: usize,
        seed: u64,
    },
    /// Caller-supplied gains; those outside the sublevel set are dropped.
    Explicit(Vec<Mat>),
}

impl Sampling {
    pub fn seed(&self) -> Option<u64> {
        match self {
            Sampling::Random { seed, .. } => Some(*seed),
            Sampling::Explicit(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SublevelSamples {
    #[serde(with = "crate::serde_matrix::list")]
    pub gains: Vec<Mat>,
    pub attempts: usize,
    /// Some sampled ray stayed inside the sublevel set up to the search cap:
    /// the set looks unbounded and `λ_min(X)` can approach zero on it.
    pub unbounded: bool,
    /// The smallest Gramian eigenvalue over the samples and `K*` is zero to
    /// working precision, so `κ_lo → 0` and no PL constant can be certified.
    pub kappa_lo_vanishing: bool,
}

/// Per-sample tries before giving up; the 0.1% acceptance floor.
const MAX_TRIES_PER_SAMPLE: usize = 1000;
const BOUNDARY_FRACTION: f64 = 0.25;
const BISECTION_STEPS: usize = 60;

/// Independent stream for sample `i`.
pub(crate) fn stream(seed: u64, i: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(i as u64);
    rng
}

pub(crate) fn gaussian_direction(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Mat {
    loop {
        let v = Mat::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal));
        let norm = v.norm();
        if norm > 1e-6 {
            return v / norm;
        }
    }
}

/// `J(K)`, or `+∞` when `K` is not stabilizing.
pub(crate) fn cost_or_inf(plant: &Plant, k: &Mat) -> f64 {
    cost(plant, k).unwrap_or(f64::INFINITY)
}

struct Ray {
    t_boundary: f64,
    capped: bool,
}

/// Largest `t` (up to bisection accuracy) with `J(K* + tV) ≤ ν`, found by
/// doubling then bisection.
fn ray_boundary(plant: &Plant, k_star: &Mat, v: &Mat, nu: f64) -> Ray {
    let scale = 1.0 + k_star.norm();
    let cap = 1e4 * scale;
    let inside = |t: f64| cost_or_inf(plant, &(k_star + v * t)) <= nu;
    let mut lo = 0.0;
    let mut hi = 0.05 * scale;
    while inside(hi) {
        lo = hi;
        hi *= 2.0;
        if hi > cap {
            return Ray {
                t_boundary: lo,
                capped: true,
            };
        }
    }
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if inside(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ray {
        t_boundary: lo,
        capped: false,
    }
}

/// `count` stabilizing gains with `J(K) ≤ ν`, drawn along Gaussian rays
/// from the optimal gain.
pub fn sample_sublevel(plant: &Plant, nu: f64, count: usize, seed: u64) -> Result<SublevelSamples> {
    let k_star = solve_care(plant)?.k_star;
    sample_sublevel_around(plant, &k_star, nu, count, seed)
}

/// Rays from `k_star`: a quarter of the samples sit on the bisected
/// boundary, the rest uniformly in volume inside it with a small jitter.
/// Deterministic per seed and independent of the thread count.
pub fn sample_sublevel_around(
    plant: &Plant,
    k_star: &Mat,
    nu: f64,
    count: usize,
    seed: u64,
) -> Result<SublevelSamples> {
    plant.check_gain(k_star)?;
    let j_star = cost(plant, k_star)?;
    if !(nu > j_star) {
        return Err(LqrError::Parameter(format!(
            "sublevel value {nu} must exceed J* = {j_star}"
        )));
    }
    let (m, n) = (plant.m(), plant.n());
    let dim = (m * n) as f64;
    let draws: Vec<Result<(Mat, usize, bool)>> = (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, i);
            let mut capped_any = false;
            for attempt in 1..=MAX_TRIES_PER_SAMPLE {
                let v = gaussian_direction(&mut rng, m, n);
                let ray = ray_boundary(plant, k_star, &v, nu);
                capped_any |= ray.capped;
                let u: f64 = rng.random();
                let t = if rng.random::<f64>() < BOUNDARY_FRACTION {
                    ray.t_boundary
                } else {
                    ray.t_boundary * u.powf(1.0 / dim)
                };
                let jitter = gaussian_direction(&mut rng, m, n) * (0.01 * t * rng.random::<f64>());
                let k = k_star + &v * t + jitter;
                if cost_or_inf(plant, &k) <= nu {
                    return Ok((k, attempt, capped_any));
                }
                let k = k_star + &v * t;
                if cost_or_inf(plant, &k) <= nu {
                    return Ok((k, attempt, capped_any));
                }
            }
            Err(LqrError::Sampling(format!(
                "acceptance rate fell below 0.1% while drawing sample {i} of the J <= {nu} sublevel set"
            )))
        })
        .collect();
    let mut out = SublevelSamples {
        gains: Vec::with_capacity(count),
        attempts: 0,
        unbounded: false,
        kappa_lo_vanishing: false,
    };
    for d in draws {
        let (k, attempts, capped) = d?;
        out.gains.push(k);
        out.attempts += attempts;
        out.unbounded |= capped;
    }
    out.kappa_lo_vanishing = gramian_degenerate(plant, std::iter::once(k_star).chain(&out.gains));
    Ok(out)
}

fn gramian_degenerate<'a>(plant: &Plant, gains: impl Iterator<Item = &'a Mat>) -> bool {
    let tol = Tolerances::DEFAULT.lift_singular;
    gains
        .filter_map(|k| closed_loop_gramian(plant, k).ok())
        .any(|g| {
            let eig = sym_eigenvalues(&g.x);
            eig.first().copied().unwrap_or(0.0)
                <= tol * (1.0 + eig.last().copied().unwrap_or(0.0).abs())
        })
}

/// `K*` followed by the sampled or explicit gains inside `{J ≤ ν}`.
pub fn collect_samples(
    plant: &Plant,
    k_star: &Mat,
    nu: f64,
    sampling: &Sampling,
) -> Result<SublevelSamples> {
    let j_star = cost(plant, k_star)?;
    let mut gains = vec![k_star.clone()];
    let mut attempts = 0;
    let mut unbounded = false;
    let mut kappa_lo_vanishing = false;
    match sampling {
        Sampling::Random { count, seed } => {
            if nu > j_star * (1.0 + 1e-12) + 1e-14 {
                let s = sample_sublevel_around(plant, k_star, nu, *count, *seed)?;
                attempts = s.attempts;
                unbounded = s.unbounded;
                kappa_lo_vanishing = s.kappa_lo_vanishing;
                gains.extend(s.gains);
            }
        }
        Sampling::Explicit(list) => {
            for k in list {
                plant.check_gain(k)?;
                attempts += 1;
                if cost_or_inf(plant, k) <= nu * (1.0 + 1e-12) {
                    gains.push(k.clone());
                }
            }
        }
    }
    if gains.is_empty() {
        return Err(LqrError::Sampling("no gains in the sublevel set".into()));
    }
    kappa_lo_vanishing |= gramian_degenerate(plant, gains.iter());
    Ok(SublevelSamples {
        gains,
        attempts,
        unbounded,
        kappa_lo_vanishing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances;

    #[test]
    fn single_integrator_samples_stay_in_interval() {
        let p = instances::single_integrator().plant;
        let s = sample_sublevel(&p, 2.5, 100, 3).unwrap();
        assert_eq!(s.gains.len(), 100);
        assert!(!s.unbounded && !s.kappa_lo_vanishing);
        for k in &s.gains {
            let k = k[(0, 0)];
            assert!((-2.0 - 1e-9..=-0.5 + 1e-9).contains(&k), "{k}");
        }
        assert_eq!(s, sample_sublevel(&p, 2.5, 100, 3).unwrap());
    }

    #[test]
    fn near_optimal_level_clusters() {
        let p = instances::single_integrator().plant;
        let k_star = Mat::from_element(1, 1, -1.0);
        let s = sample_sublevel_around(&p, &k_star, 2.0 + 1e-4, 20, 0).unwrap();
        assert!(s.gains.iter().all(|k| (k[(0, 0)] + 1.0).abs() < 0.02));
    }

    #[test]
    fn unbounded_sublevel_set_is_flagged() {
        let p = instances::example_3_1(0.1).plant;
        let k_star = Mat::from_row_slice(1, 2, &[-1.0, -1.0]);
        let s = sample_sublevel_around(&p, &k_star, 1.0 / 1.1 + 0.1, 50, 1).unwrap();
        assert!(s.kappa_lo_vanishing);
    }

    #[test]
    fn rejects_level_below_optimum() {
        let p = instances::single_integrator().plant;
        assert!(sample_sublevel(&p, 1.5, 10, 0).is_err());
    }
}
