use serde::{Deserialize, Serialize};

use crate::error::{LqrError, Result};
use crate::linalg::{spectral_abscissa, Mat};
use crate::lyap_riccati::{closed_loop_gramian, cost, gradient, solve_care};
use crate::model::Plant;
use crate::serde_matrix;

use super::pl::{estimate_smoothness_around, pl_constant_around};
use super::sampling::Sampling;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepSize {
    Fixed(f64),
    /// `α = 1/L`.
    Auto,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PgdConfig {
    pub step: StepSize,
    pub max_iters: usize,
    pub grad_tol: f64,
    /// Known smoothness constant; estimated over `{J ≤ J(K0)}` when absent.
    pub smoothness: Option<f64>,
    /// Known PL constant; estimated over `{J ≤ J(K0)}` when absent.
    pub mu: Option<f64>,
    /// Sample set for the estimates above.
    pub sampling: Sampling,
}

impl Default for PgdConfig {
    fn default() -> Self {
        Self {
            step: StepSize::Auto,
            max_iters: 200,
            grad_tol: 1e-9,
            smoothness: None,
            mu: None,
            sampling: Sampling::Random {
                count: 200,
                seed: 0,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PgdIterate {
    pub iter: usize,
    #[serde(rename = "K", with = "serde_matrix")]
    pub k: Mat,
    #[serde(rename = "J")]
    pub j: f64,
    pub grad_norm: f64,
    pub dist_to_kstar: f64,
    /// `J - J*` through the completion-of-squares identity, free of the
    /// cancellation in the plain difference.
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PgdTrace {
    pub iterates: Vec<PgdIterate>,
    pub converged: bool,
    pub step_size: f64,
    pub smoothness: Option<f64>,
    pub mu: Option<f64>,
    pub j_star: f64,
    /// `max_k (J_{k+1} - J*) / (J_k - J*)` over steps above the roundoff floor.
    pub empirical_rate: Option<f64>,
    /// `γ = 1 - μ α (2 - L α)`.
    pub guaranteed_rate: Option<f64>,
    /// Steps whose observed contraction exceeded `γ`.
    pub rate_violations: usize,
}

/// Gaps below this fraction of `1 + J*` are at roundoff level and carry no
/// rate information.
const RATE_FLOOR: f64 = 1e-13;

fn snapshot(plant: &Plant, k: &Mat, k_star: &Mat, iter: usize) -> Result<(PgdIterate, Mat)> {
    let x = closed_loop_gramian(plant, k)?.x;
    let j = ((plant.q() + k.transpose() * plant.r() * k) * &x).trace();
    let d = k - k_star;
    let gap = (d.transpose() * plant.r() * &d * &x).trace();
    let g = gradient(plant, k)?;
    let it = PgdIterate {
        iter,
        k: k.clone(),
        j,
        grad_norm: g.norm(),
        dist_to_kstar: d.norm(),
        gap,
    };
    Ok((it, g))
}

/// Gradient descent `K ← K - α ∇J(K)` from a stabilizing `K0`. Leaving the
/// stabilizing set or increasing `J` aborts the run.
pub fn pgd_run(plant: &Plant, k0: &Mat, config: &PgdConfig) -> Result<PgdTrace> {
    plant.check_gain(k0)?;
    let j0 = cost(plant, k0)?;
    let sol = solve_care(plant)?;
    let k_star = sol.k_star;
    let j_star = cost(plant, &k_star)?;
    let needs_l = matches!(config.step, StepSize::Auto) || config.mu.is_none();
    let smoothness = match (config.smoothness, needs_l) {
        (Some(l), _) => Some(l),
        (None, true) => Some(estimate_smoothness_around(
            plant,
            &k_star,
            j0,
            &config.sampling,
        )?),
        (None, false) => None,
    };
    let alpha = match config.step {
        StepSize::Fixed(a) => a,
        StepSize::Auto => 1.0 / smoothness.expect("smoothness is set for automatic steps"),
    };
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(LqrError::Parameter(format!(
            "step size must be positive, got {alpha}"
        )));
    }
    if let Some(l) = smoothness {
        if alpha >= 2.0 / l {
            return Err(LqrError::Parameter(format!(
                "step size {alpha} is not below 2/L = {}",
                2.0 / l
            )));
        }
    }
    let mu = match config.mu {
        Some(mu) => Some(mu),
        None => pl_constant_around(plant, &k_star, j0, &config.sampling)
            .ok()
            .map(|e| e.mu),
    };
    let guaranteed_rate = match (mu, smoothness) {
        (Some(mu), Some(l)) => Some(1.0 - mu * alpha * (2.0 - l * alpha)),
        _ => None,
    };

    let (mut current, mut grad) = snapshot(plant, k0, &k_star, 0)?;
    let mut iterates = vec![current.clone()];
    let mut converged = current.grad_norm <= config.grad_tol;
    let floor = RATE_FLOOR * (1.0 + j_star.abs());
    let mut empirical_rate: Option<f64> = None;
    let mut rate_violations = 0;
    let mut iter = 0;
    while !converged && iter < config.max_iters {
        iter += 1;
        let k_next = &current.k - &grad * alpha;
        let abscissa = spectral_abscissa(&plant.closed_loop(&k_next)?)?;
        let (next, g_next) = match snapshot(plant, &k_next, &k_star, iter) {
            Ok(s) => s,
            Err(LqrError::Stability { .. }) => {
                return Err(LqrError::IterateUnstable {
                    iter,
                    abscissa,
                    step: alpha,
                });
            }
            Err(e) => return Err(e),
        };
        if next.j > current.j + 1e-12 * (1.0 + current.j.abs()) {
            return Err(LqrError::NonMonotone {
                iter,
                before: current.j,
                after: next.j,
            });
        }
        if current.gap > floor {
            let rate = next.gap / current.gap;
            empirical_rate = Some(empirical_rate.map_or(rate, |r: f64| r.max(rate)));
            if guaranteed_rate.is_some_and(|g| rate > g + 1e-12) {
                rate_violations += 1;
            }
        }
        converged = next.grad_norm <= config.grad_tol;
        current = next;
        grad = g_next;
        iterates.push(current.clone());
    }
    Ok(PgdTrace {
        iterates,
        converged,
        step_size: alpha,
        smoothness,
        mu,
        j_star,
        empirical_rate,
        guaranteed_rate,
        rate_violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances;
    use approx::assert_relative_eq;

    fn s(v: f64) -> Mat {
        Mat::from_element(1, 1, v)
    }

    #[test]
    fn single_integrator_first_step_and_convergence() {
        let p = instances::single_integrator().plant;
        let cfg = PgdConfig {
            step: StepSize::Fixed(1.0 / 16.0),
            smoothness: Some(16.0),
            mu: Some(0.0078125),
            ..Default::default()
        };
        let t = pgd_run(&p, &s(-0.5), &cfg).unwrap();
        assert_relative_eq!(t.iterates[1].k[(0, 0)], -0.6875, epsilon = 1e-12);
        assert!(t.iterates[1].j < 2.5);
        assert!(t.converged);
        assert!(t.iterates.len() <= 201);
        assert!(t.iterates.last().unwrap().dist_to_kstar <= 1e-6);
        assert_eq!(t.rate_violations, 0);
    }

    #[test]
    fn start_at_optimum_takes_no_steps() {
        let p = instances::single_integrator().plant;
        let t = pgd_run(
            &p,
            &s(-1.0),
            &PgdConfig {
                smoothness: Some(16.0),
                mu: Some(0.01),
                ..Default::default()
            },
        )
        .unwrap();
        assert!(t.converged);
        assert_eq!(t.iterates.len(), 1);
    }

    #[test]
    fn oversized_step_is_rejected() {
        let p = instances::single_integrator().plant;
        let cfg = PgdConfig {
            step: StepSize::Fixed(0.2),
            smoothness: Some(16.0),
            mu: Some(0.01),
            ..Default::default()
        };
        assert!(matches!(
            pgd_run(&p, &s(-0.5), &cfg),
            Err(LqrError::Parameter(_))
        ));
        let cfg = PgdConfig {
            step: StepSize::Fixed(3.0),
            smoothness: None,
            mu: Some(0.01),
            ..Default::default()
        };
        assert!(pgd_run(&p, &s(-0.5), &cfg).is_err());
    }
}
