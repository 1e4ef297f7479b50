use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LqrError, Result};
use crate::linalg::{
    commutation, kron, lambda_max, lambda_min, psd_sqrt, singular_values, solve_lu, spectral_norm,
    Mat,
};
use crate::lyap_riccati::{closed_loop_gramian, cost, gradient, solve_care};
use crate::model::{is_positive_definite, structural_report, Plant, SufficientCondition};
use crate::tolerances::Tolerances;

use super::ecl::{cauchy_direction, f_cvx_eval, f_cvx_grad, lift_coordinates};
use super::sampling::{collect_samples, cost_or_inf, gaussian_direction, stream, Sampling};

/// Relative slack before a sampled inequality counts as violated.
pub const VIOLATION_SLACK: f64 = 1e-6;
/// Absolute floor, relative to `1 + J*`, below which both sides count as zero.
const ROUNDOFF_FLOOR: f64 = 1e-12;
const SMOOTHNESS_SAFETY: f64 = 1.5;
const SMOOTHNESS_DIRECTIONS: usize = 6;

/// Gradient-dominance constants over a sampled sublevel set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PLEstimate {
    pub nu: f64,
    pub j_star: f64,
    pub kappa_lo: f64,
    pub kappa_hi: f64,
    pub op_norm: f64,
    pub mu_qg: f64,
    pub c_lqr: f64,
    pub mu: f64,
    pub kappa_closed_form: Option<f64>,
    pub sample_count: usize,
    pub seed: Option<u64>,
    pub unbounded: bool,
    pub kappa_lo_vanishing: bool,
    /// The gains the extrema were taken over, `K*` first.
    #[serde(skip)]
    pub samples: Vec<Mat>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlRow {
    pub sample_id: usize,
    #[serde(rename = "J")]
    pub j: f64,
    pub grad_norm_sq: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlReport {
    pub mu: f64,
    pub checked: usize,
    pub skipped: usize,
    pub violations: usize,
    pub worst_ratio: f64,
    pub rows: Vec<PlRow>,
}

/// Outcome of a sampled inequality `lhs ≤ rhs`; `ratio = lhs / rhs`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub checked: usize,
    pub skipped: usize,
    pub violations: usize,
    pub worst_ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CauchyBridgeReport {
    #[serde(flatten)]
    pub bridge: CheckReport,
    /// Samples where `‖g_c‖` fell below `(f(ζ) - f(ζ*)) / ‖ζ - ζ*‖`.
    pub lower_bound_violations: usize,
}

/// `lhs / rhs`, with both sides below `floor` treated as an exact tie.
fn ratio(lhs: f64, rhs: f64, floor: f64) -> f64 {
    if lhs <= floor && rhs <= floor {
        0.0
    } else if rhs <= 0.0 {
        f64::INFINITY
    } else {
        lhs / rhs
    }
}

fn violates(lhs: f64, rhs: f64, floor: f64) -> bool {
    lhs > (1.0 + VIOLATION_SLACK) * rhs + floor
}

fn summarize(results: impl Iterator<Item = Option<(f64, bool)>>) -> CheckReport {
    let mut r = CheckReport {
        checked: 0,
        skipped: 0,
        violations: 0,
        worst_ratio: 0.0,
    };
    for item in results {
        match item {
            None => r.skipped += 1,
            Some((ratio, bad)) => {
                r.checked += 1;
                r.violations += usize::from(bad);
                r.worst_ratio = r.worst_ratio.max(ratio);
            }
        }
    }
    r
}

/// `‖𝒜*^{-1} ∘ ℬ‖₂` with `𝒜*(X) = F X + X F'`, `F = A + B K*`, and
/// `ℬ(Y) = B Y + Y' B'`, assembled as Kronecker matrices on `vec`.
pub fn operator_norm_astar_inv_b(plant: &Plant, k_star: &Mat) -> Result<f64> {
    let (n, m) = (plant.n(), plant.m());
    let f = plant.closed_loop(k_star)?;
    let id = Mat::identity(n, n);
    let a_op = kron(&id, &f) + kron(&f, &id);
    let b_op = kron(&id, plant.b()) + kron(plant.b(), &id) * commutation(m, n);
    let composite = solve_lu(&a_op, &b_op).map_err(|_| LqrError::Stability {
        abscissa: crate::linalg::spectral_abscissa(&f).unwrap_or(f64::NAN),
    })?;
    Ok(singular_values(&composite).first().copied().unwrap_or(0.0))
}

fn unit_directions(m: usize, n: usize, seed: u64, i: usize) -> Vec<Mat> {
    if m * n == 1 {
        return vec![Mat::from_element(1, 1, 1.0)];
    }
    let mut rng = stream(seed ^ 0x5151_a5a5_0f0f_3c3c, i);
    (0..SMOOTHNESS_DIRECTIONS)
        .map(|_| gaussian_direction(&mut rng, m, n))
        .collect()
}

/// Central second difference of `J` along `v` at `k`, shrinking the step
/// until both neighbours stabilize.
fn directional_curvature(plant: &Plant, k: &Mat, v: &Mat) -> Option<f64> {
    let j0 = cost(plant, k).ok()?;
    let diff = |h: f64| {
        let jp = cost_or_inf(plant, &(k + v * h));
        let jm = cost_or_inf(plant, &(k - v * h));
        (jp.is_finite() && jm.is_finite()).then(|| (jp - 2.0 * j0 + jm) / (h * h))
    };
    let mut h = 1e-3 * (1.0 + k.norm());
    for _ in 0..30 {
        if let Some(coarse) = diff(h) {
            let fine = diff(h / 2.0)?;
            return Some((4.0 * fine - coarse) / 3.0);
        }
        h *= 0.5;
    }
    None
}

/// `L`: 1.5 times the largest sampled directional curvature of `J` over
/// `{J ≤ ν}`.
pub fn estimate_smoothness(plant: &Plant, nu: f64, sampling: &Sampling) -> Result<f64> {
    let k_star = solve_care(plant)?.k_star;
    estimate_smoothness_around(plant, &k_star, nu, sampling)
}

pub fn estimate_smoothness_around(
    plant: &Plant,
    k_star: &Mat,
    nu: f64,
    sampling: &Sampling,
) -> Result<f64> {
    let samples = collect_samples(plant, k_star, nu, sampling)?;
    let seed = sampling.seed().unwrap_or(0);
    let (m, n) = (plant.m(), plant.n());
    let curvature = samples
        .gains
        .par_iter()
        .enumerate()
        .map(|(i, k)| {
            unit_directions(m, n, seed, i)
                .iter()
                .filter_map(|v| directional_curvature(plant, k, v))
                .map(f64::abs)
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max);
    if !(curvature > 0.0) {
        return Err(LqrError::Sampling(
            "no usable curvature samples in the sublevel set".into(),
        ));
    }
    Ok(SMOOTHNESS_SAFETY * curvature)
}

/// `κ = λ_min(W)²/4 · (‖A‖₂/√λ_min(Q) + ‖B‖₂/√λ_min(R))^{-2}`, when `Q, W ≻ 0`.
pub fn kappa_closed_form(plant: &Plant) -> Option<f64> {
    let tol = Tolerances::DEFAULT;
    if !is_positive_definite(plant.q(), &tol) || !is_positive_definite(plant.w(), &tol) {
        return None;
    }
    let s = spectral_norm(plant.a()) / lambda_min(plant.q()).sqrt()
        + spectral_norm(plant.b()) / lambda_min(plant.r()).sqrt();
    Some(lambda_min(plant.w()).powi(2) / 4.0 / (s * s))
}

/// Compactness of the sublevel sets: `W ≻ 0`, or `W = B1 B1'` with
/// `(A, B1)` controllable, `Im B ⊆ Im B1` and `Q ≻ 0`. Without an explicit
/// factor, `B1 = W^{1/2}` is used.
pub fn check_compact_sublevels(plant: &Plant) -> Result<SufficientCondition> {
    let b1 = psd_sqrt(plant.w());
    let cond = structural_report(plant, Some(&b1))?.sufficient_condition;
    match cond {
        SufficientCondition::A | SufficientCondition::B => Ok(cond),
        _ => Err(LqrError::Assumption(
            "sublevel sets are not known to be compact: need W > 0, or W = B1 B1' with (A, B1) controllable, \
             Im B in Im B1 and Q > 0"
                .into(),
        )),
    }
}

pub fn pl_constant(plant: &Plant, nu: f64, sampling: &Sampling) -> Result<PLEstimate> {
    let k_star = solve_care(plant)?.k_star;
    pl_constant_around(plant, &k_star, nu, sampling)
}

/// `μ_qg = min(λ_min R / κ̄, λ_min R / (κ̄ ‖𝒜*^{-1}ℬ‖²))`,
/// `c = (κ_lo √n / 2) / (1 + √((ν - J*) / (κ_lo λ_min R)))`, `μ = μ_qg c²`,
/// with `κ_lo`, `κ̄` the extreme eigenvalues of `X` over the samples.
pub fn pl_constant_around(
    plant: &Plant,
    k_star: &Mat,
    nu: f64,
    sampling: &Sampling,
) -> Result<PLEstimate> {
    check_compact_sublevels(plant)?;
    let j_star = cost(plant, k_star)?;
    if nu < j_star * (1.0 - 1e-12) {
        return Err(LqrError::Parameter(format!(
            "sublevel value {nu} is below J* = {j_star}"
        )));
    }
    let samples = collect_samples(plant, k_star, nu, sampling)?;
    let extrema: Vec<(f64, f64)> = samples
        .gains
        .par_iter()
        .map(|k| closed_loop_gramian(plant, k).map(|g| (lambda_min(&g.x), lambda_max(&g.x))))
        .collect::<Result<_>>()?;
    let kappa_lo = extrema.iter().map(|e| e.0).fold(f64::INFINITY, f64::min);
    let kappa_hi = extrema
        .iter()
        .map(|e| e.1)
        .fold(f64::NEG_INFINITY, f64::max);
    let op_norm = operator_norm_astar_inv_b(plant, k_star)?;
    let lr = lambda_min(plant.r());
    let mu_qg = if op_norm > 0.0 {
        (lr / kappa_hi).min(lr / (kappa_hi * op_norm * op_norm))
    } else {
        lr / kappa_hi
    };
    let n = plant.n() as f64;
    let excess = (nu - j_star).max(0.0);
    let c_lqr = if kappa_lo > 0.0 {
        (kappa_lo * n.sqrt() / 2.0) / (1.0 + (excess / (kappa_lo * lr)).sqrt())
    } else {
        0.0
    };
    Ok(PLEstimate {
        nu,
        j_star,
        kappa_lo,
        kappa_hi,
        op_norm,
        mu_qg,
        c_lqr,
        mu: mu_qg * c_lqr * c_lqr,
        kappa_closed_form: kappa_closed_form(plant),
        sample_count: samples.gains.len(),
        seed: sampling.seed(),
        unbounded: samples.unbounded,
        kappa_lo_vanishing: samples.kappa_lo_vanishing,
        samples: samples.gains,
    })
}

/// `μ (J - J*) ≤ ½ ‖∇J‖²_F` on every sample inside `{J ≤ ν}`.
pub fn pl_check(plant: &Plant, nu: f64, mu: f64, samples: &[Mat]) -> Result<PlReport> {
    let k_star = solve_care(plant)?.k_star;
    let j_star = cost(plant, &k_star)?;
    let floor = ROUNDOFF_FLOOR * (1.0 + j_star.abs());
    let evaluated: Vec<Option<(PlRow, bool)>> = samples
        .par_iter()
        .enumerate()
        .map(|(i, k)| {
            let j = cost(plant, k).ok()?;
            if j > nu * (1.0 + 1e-9) {
                return None;
            }
            let g = gradient(plant, k).ok()?;
            let grad_norm_sq = g.norm_squared();
            let lhs = mu * (j - j_star).max(0.0);
            let rhs = 0.5 * grad_norm_sq;
            Some((
                PlRow {
                    sample_id: i,
                    j,
                    grad_norm_sq,
                    ratio: ratio(lhs, rhs, floor),
                },
                violates(lhs, rhs, floor),
            ))
        })
        .collect();
    let summary = summarize(
        evaluated
            .iter()
            .map(|e| e.as_ref().map(|(row, bad)| (row.ratio, *bad))),
    );
    Ok(PlReport {
        mu,
        checked: summary.checked,
        skipped: summary.skipped,
        violations: summary.violations,
        worst_ratio: summary.worst_ratio,
        rows: evaluated
            .into_iter()
            .flatten()
            .map(|(row, _)| row)
            .collect(),
    })
}

/// `f(ζ) - f* ≥ (μ_qg / 2)(‖Y - Y*‖² + ‖X - X*‖²)` on the lifted samples.
pub fn quadratic_growth_check(
    plant: &Plant,
    est: &PLEstimate,
    samples: &[Mat],
) -> Result<CheckReport> {
    let k_star = solve_care(plant)?.k_star;
    let x_star = closed_loop_gramian(plant, &k_star)?.x;
    let f_star = f_cvx_eval(plant, &Mat::zeros(plant.m(), plant.n()), &x_star, &k_star)?;
    let floor = ROUNDOFF_FLOOR * (1.0 + f_star.abs());
    let results: Vec<Option<(f64, bool)>> = samples
        .par_iter()
        .map(|k| {
            if cost(plant, k).ok()? > est.nu * (1.0 + 1e-9) {
                return None;
            }
            let x = closed_loop_gramian(plant, k).ok()?.x;
            let y = (k - &k_star) * &x;
            let gap = f_cvx_eval(plant, &y, &x, &k_star).ok()? - f_star;
            let growth = 0.5 * est.mu_qg * (y.norm_squared() + (&x - &x_star).norm_squared());
            Some((
                ratio(growth, gap.max(0.0), floor),
                violates(growth, gap, floor),
            ))
        })
        .collect();
    Ok(summarize(results.into_iter()))
}

/// `2 c ‖g_c‖ ≤ ‖∇J(K)‖_F` with `g_c` the Cauchy direction of the lifted
/// objective at `Ψ(K)`.
pub fn cauchy_bridge_check(
    plant: &Plant,
    est: &PLEstimate,
    samples: &[Mat],
) -> Result<CauchyBridgeReport> {
    let k_star = solve_care(plant)?.k_star;
    let x_star = closed_loop_gramian(plant, &k_star)?.x;
    let zero_y = Mat::zeros(plant.m(), plant.n());
    let f_star = f_cvx_eval(plant, &zero_y, &x_star, &k_star)?;
    let zeta_star = lift_coordinates(&zero_y, &x_star);
    let floor = ROUNDOFF_FLOOR * (1.0 + f_star.abs());
    let results: Vec<Option<(f64, bool, bool)>> = samples
        .par_iter()
        .map(|k| {
            if cost(plant, k).ok()? > est.nu * (1.0 + 1e-9) {
                return None;
            }
            let x = closed_loop_gramian(plant, k).ok()?.x;
            let y = (k - &k_star) * &x;
            let (gy, gx) = f_cvx_grad(plant, &y, &x, &k_star).ok()?;
            let gap = f_cvx_eval(plant, &y, &x, &k_star).ok()? - f_star;
            let cd = cauchy_direction(
                &lift_coordinates(&gy, &gx),
                &lift_coordinates(&y, &x),
                &zeta_star,
                gap,
            )
            .ok()?;
            let lhs = 2.0 * est.c_lqr * cd.norm;
            let rhs = gradient(plant, k).ok()?.norm();
            let below = cd.norm < cd.lower_bound - 1e-9;
            Some((ratio(lhs, rhs, floor), violates(lhs, rhs, floor), below))
        })
        .collect();
    let lower_bound_violations = results.iter().flatten().filter(|r| r.2).count();
    Ok(CauchyBridgeReport {
        bridge: summarize(results.into_iter().map(|r| r.map(|(q, bad, _)| (q, bad)))),
        lower_bound_violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances;
    use crate::linalg::{unvec, vec};
    use crate::lyap_riccati::solve_lyapunov;
    use approx::assert_relative_eq;

    fn s(v: f64) -> Mat {
        Mat::from_element(1, 1, v)
    }

    fn interval(lo: f64, hi: f64, count: usize) -> Sampling {
        Sampling::Explicit(
            (0..count)
                .map(|i| s(-(lo + (hi - lo) * i as f64 / (count - 1) as f64)))
                .collect(),
        )
    }

    #[test]
    fn single_integrator_constants() {
        let p = instances::single_integrator().plant;
        let est = pl_constant(&p, 2.5, &interval(0.5, 2.0, 151)).unwrap();
        assert_relative_eq!(est.kappa_lo, 0.5, epsilon = 1e-9);
        assert_relative_eq!(est.kappa_hi, 2.0, epsilon = 1e-9);
        assert_relative_eq!(est.op_norm, 1.0, epsilon = 1e-9);
        assert_relative_eq!(est.mu_qg, 0.5, epsilon = 1e-9);
        assert_relative_eq!(est.c_lqr, 0.125, epsilon = 1e-9);
        assert_relative_eq!(est.mu, 0.0078125, epsilon = 1e-9);
    }

    #[test]
    fn single_integrator_smoothness() {
        let p = instances::single_integrator().plant;
        let l = estimate_smoothness(
            &p,
            2.5,
            &Sampling::Random {
                count: 200,
                seed: 1,
            },
        )
        .unwrap();
        assert!((16.0..=24.0 + 1e-6).contains(&l), "{l}");
        let l = estimate_smoothness(&p, 2.0, &Sampling::Random { count: 10, seed: 1 }).unwrap();
        assert!(l > 0.0);
    }

    #[test]
    fn inflated_mu_is_caught() {
        let p = instances::single_integrator().plant;
        let ks: Vec<Mat> = [0.5, 0.8, 1.5, 2.0].iter().map(|&k| s(-k)).collect();
        let ok = pl_check(&p, 2.5, 0.0078125, &ks).unwrap();
        assert_eq!(ok.violations, 0);
        let bad = pl_check(&p, 2.5, 10.0, &ks).unwrap();
        assert!(bad.violations > 0);
        let at2 = pl_check(&p, 2.5, 0.0078125, &[s(-2.0)]).unwrap();
        assert_relative_eq!(at2.rows[0].grad_norm_sq * 0.5, 0.28125, epsilon = 1e-12);
    }

    #[test]
    fn operator_norm_matches_column_assembly() {
        let plant = crate::instances::random_plant(
            11,
            crate::instances::RandomShape {
                n: Some(3),
                m: Some(2),
            },
        );
        let k_star = solve_care(&plant).unwrap().k_star;
        let f = plant.closed_loop(&k_star).unwrap();
        let (n, m) = (3, 2);
        let mut cols = Mat::zeros(n * n, m * n);
        for j in 0..m * n {
            let mut e = crate::linalg::Vector::zeros(m * n);
            e[j] = 1.0;
            let y = unvec(&e, m, n);
            let by = plant.b() * &y;
            let x = solve_lyapunov(&f, &(&by + by.transpose())).unwrap();
            cols.set_column(j, &vec(&x));
        }
        let oracle = singular_values(&cols)[0];
        assert_relative_eq!(
            operator_norm_astar_inv_b(&plant, &k_star).unwrap(),
            oracle,
            max_relative = 1e-10
        );
    }

    #[test]
    fn zero_input_operator_norm() {
        let plant = Plant::new(
            Mat::identity(2, 2) * -1.0,
            Mat::zeros(2, 1),
            Mat::identity(2, 2),
            s(1.0),
            Mat::identity(2, 2),
        )
        .unwrap();
        assert_eq!(
            operator_norm_astar_inv_b(&plant, &Mat::zeros(1, 2)).unwrap(),
            0.0
        );
    }

    #[test]
    fn single_integrator_growth_and_bridge() {
        let p = instances::single_integrator().plant;
        let est = pl_constant(&p, 2.5, &interval(0.5, 2.0, 31)).unwrap();
        let qg = quadratic_growth_check(&p, &est, &est.samples).unwrap();
        assert_eq!(qg.violations, 0);
        let cb = cauchy_bridge_check(&p, &est, &est.samples).unwrap();
        assert_eq!(cb.bridge.violations + cb.lower_bound_violations, 0);
    }

    #[test]
    fn closed_form_kappa_requires_definite_weights() {
        assert!(kappa_closed_form(&instances::single_integrator().plant).is_some());
        assert!(kappa_closed_form(&instances::example_4_3(0.1).plant).is_none());
        assert!(pl_constant(
            &instances::example_3_1(0.1).plant,
            1.0,
            &Sampling::Random { count: 5, seed: 0 }
        )
        .is_err());
    }
}
