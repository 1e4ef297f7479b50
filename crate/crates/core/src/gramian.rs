//! Closed-loop trajectories, their state-input Gramians, membership in the
//! semidefinite outer set, and the optimal-value sandwich.

use serde::{Deserialize, Serialize};

use crate::duality::lift_primal;
use crate::error::{LqrError, Result};
use crate::linalg::{
    hstack, lambda_min, matrix_exp, spectral_abscissa, spectral_norm, sym, Mat, Vector,
};
use crate::lyap_riccati::{cost, solve_care, solve_lyapunov};
use crate::model::Plant;
use crate::serde_matrix;

/// Horizon cap for adaptive simulation.
pub const MAX_HORIZON: f64 = 1e4;
const MAX_STEPS: usize = 4_000_000;
const DECAY_TARGET: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    #[serde(with = "serde_matrix")]
    pub states: Mat,
    #[serde(with = "serde_matrix")]
    pub inputs: Mat,
    /// `∫_0^T [x; u][x; u]' dt` by Simpson's rule.
    #[serde(rename = "Z_T", with = "serde_matrix")]
    pub gramian: Mat,
    /// `∫_T^∞ [x; u][x; u]' dt` in closed form from `x(T)`.
    #[serde(with = "serde_matrix")]
    pub tail: Mat,
    /// `‖tail‖_F` plus the Richardson estimate of the quadrature error.
    pub tail_bound: f64,
    pub quadrature_error: f64,
}

impl Trajectory {
    pub fn horizon(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    /// Gramian over the infinite horizon.
    pub fn total_gramian(&self) -> Mat {
        &self.gramian + &self.tail
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GramianMembership {
    #[serde(rename = "Z", with = "serde_matrix")]
    pub z: Mat,
    pub sdp_residual: f64,
    pub psd_min_eig: f64,
    pub in_v_sdp: bool,
    pub static_structure_gap: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GramianGap {
    pub gap: f64,
    pub tolerance: f64,
    pub tail_bound: f64,
    /// `tr(diag(Q, R) Z)` of the trajectory Gramian including the tail.
    pub energy: f64,
    /// `J(K)` with `W = x0 x0'`.
    pub cost: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sandwich {
    #[serde(rename = "J1")]
    pub j1: f64,
    #[serde(rename = "J2")]
    pub j2: f64,
    pub gap: f64,
    pub degenerate: bool,
}

fn check_x0(plant: &Plant, x0: &Vector) -> Result<()> {
    if x0.len() != plant.n() {
        return Err(LqrError::Dimension(format!(
            "x0 must have length {}, got {}",
            plant.n(),
            x0.len()
        )));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(LqrError::InvalidInput("x0 has non-finite entries".into()));
    }
    Ok(())
}

/// `[I; K] S [I; K]'`.
fn lift_state_gramian(k: &Mat, s: &Mat) -> Mat {
    let n = s.nrows();
    let top = Mat::identity(n, n);
    let mut ik = Mat::zeros(n + k.nrows(), n);
    ik.view_mut((0, 0), (n, n)).copy_from(&top);
    ik.view_mut((n, 0), k.shape()).copy_from(k);
    sym(&(&ik * s * ik.transpose()))
}

/// Simulate `ẋ = (A + BK) x` on a uniform grid of `T / dt` steps (rounded
/// up to a multiple of four) using the exact one-step propagator.
pub fn simulate_closed_loop(
    plant: &Plant,
    k: &Mat,
    x0: &Vector,
    t_final: f64,
    dt: f64,
) -> Result<Trajectory> {
    plant.check_gain(k)?;
    check_x0(plant, x0)?;
    if !(dt > 0.0 && t_final.is_finite() && dt.is_finite()) || dt >= t_final {
        return Err(LqrError::Parameter(format!(
            "need 0 < dt < T, got dt = {dt}, T = {t_final}"
        )));
    }
    let f = plant.closed_loop(k)?;
    let abscissa = spectral_abscissa(&f)?;
    if abscissa >= -crate::tolerances::Tolerances::DEFAULT.stability {
        return Err(LqrError::Stability { abscissa });
    }
    let steps = ((t_final / dt).ceil() as usize).div_ceil(4) * 4;
    if steps > MAX_STEPS {
        return Err(LqrError::Parameter(format!(
            "{steps} steps exceed the limit of {MAX_STEPS}"
        )));
    }
    let h = t_final / steps as f64;
    let phi = matrix_exp(&(&f * h));
    let n = plant.n();

    let mut states = Mat::zeros(steps + 1, n);
    let mut x = x0.clone();
    let mut fine = Mat::zeros(n, n);
    let mut coarse = Mat::zeros(n, n);
    for i in 0..=steps {
        states.row_mut(i).copy_from(&x.transpose());
        let outer = &x * x.transpose();
        let w_fine = if i == 0 || i == steps {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        fine += &outer * w_fine;
        if i % 2 == 0 {
            let j = i / 2;
            let w_coarse = if j == 0 || j == steps / 2 {
                1.0
            } else if j % 2 == 1 {
                4.0
            } else {
                2.0
            };
            coarse += &outer * w_coarse;
        }
        if i < steps {
            x = &phi * &x;
        }
    }
    let fine = sym(&(fine * (h / 3.0)));
    let coarse = sym(&(coarse * (2.0 * h / 3.0)));
    let gramian = lift_state_gramian(k, &fine);
    let quadrature_error = (lift_state_gramian(k, &(&fine - &coarse))).norm() / 15.0;

    let x_t = states.row(steps).transpose();
    let tail_state = solve_lyapunov(&f, &(&x_t * x_t.transpose()))?;
    let tail = lift_state_gramian(k, &tail_state);
    let tail_bound = tail.norm() + quadrature_error;
    let inputs = &states * k.transpose();
    let times = (0..=steps).map(|i| i as f64 * h).collect();
    Ok(Trajectory {
        times,
        states,
        inputs,
        gramian,
        tail,
        tail_bound,
        quadrature_error,
    })
}

/// Smallest `T ≤ 10⁴` (by doubling from the abscissa estimate) with
/// `‖e^{(A+BK)T} x0‖ ≤ 1e-8 ‖x0‖`.
pub fn default_horizon(plant: &Plant, k: &Mat, x0: &Vector) -> Result<f64> {
    check_x0(plant, x0)?;
    let f = plant.closed_loop(k)?;
    let abscissa = spectral_abscissa(&f)?;
    if abscissa >= 0.0 {
        return Err(LqrError::Stability { abscissa });
    }
    let norm0 = x0.norm();
    let mut t = (-(DECAY_TARGET.ln()) / -abscissa).min(MAX_HORIZON);
    if norm0 == 0.0 {
        return Ok(t.max(1.0));
    }
    while t < MAX_HORIZON && (matrix_exp(&(&f * t)) * x0).norm() > DECAY_TARGET * norm0 {
        t = (2.0 * t).min(MAX_HORIZON);
    }
    Ok(t)
}

/// Simulation with the default horizon; `dt` starts at
/// `min(1e-2, 0.1/‖A+BK‖₂)` and is halved (at most three times) until the
/// Gramian moves by less than `1e-8`.
pub fn simulate_adaptive(plant: &Plant, k: &Mat, x0: &Vector) -> Result<Trajectory> {
    let t_final = default_horizon(plant, k, x0)?;
    let f = plant.closed_loop(k)?;
    let mut dt = 1e-2_f64
        .min(0.1 / spectral_norm(&f).max(1e-12))
        .min(t_final / 4.0);
    let mut traj = simulate_closed_loop(plant, k, x0, t_final, dt)?;
    for _ in 0..3 {
        let next_dt = dt / 2.0;
        if (t_final / next_dt) as usize > MAX_STEPS {
            break;
        }
        let next = simulate_closed_loop(plant, k, x0, t_final, next_dt)?;
        let change = (&next.gramian - &traj.gramian).norm();
        traj = next;
        dt = next_dt;
        if change < 1e-8 {
            break;
        }
    }
    Ok(traj)
}

/// Residuals of `Z` against `A Z11 + B Z12' + Z11 A' + Z12 B' + x0 x0' = 0`,
/// `Z ⪰ 0`; `tol` bounds both.
pub fn v_sdp_membership(
    z: &Mat,
    plant: &Plant,
    x0: &Vector,
    tol: f64,
) -> Result<GramianMembership> {
    check_x0(plant, x0)?;
    let (n, m) = (plant.n(), plant.m());
    if z.shape() != (n + m, n + m) {
        return Err(LqrError::Dimension(format!("Z must be {0}x{0}", n + m)));
    }
    let z = sym(z);
    let z11 = z.view((0, 0), (n, n)).clone_owned();
    let z12 = z.view((0, n), (n, m)).clone_owned();
    let z22 = z.view((n, n), (m, m)).clone_owned();
    let t = plant.a() * &z11 + plant.b() * z12.transpose();
    let sdp_residual = (&t + t.transpose() + x0 * x0.transpose()).norm();
    let psd_min_eig = lambda_min(&z);
    // Least-squares K from Z12 ≈ Z11 K'.
    let kt = z11
        .clone()
        .svd(true, true)
        .solve(&z12, 1e-12 * z11.norm().max(f64::MIN_POSITIVE))
        .map_err(|e| LqrError::Numerical(e.to_string()))?;
    let k = kt.transpose();
    let static_structure_gap = (&z12 - &z11 * &kt).norm() + (&z22 - &k * &z11 * &kt).norm();
    Ok(GramianMembership {
        in_v_sdp: sdp_residual <= tol && psd_min_eig >= -tol,
        z,
        sdp_residual,
        psd_min_eig,
        static_structure_gap,
        tolerance: tol,
    })
}

/// Membership of a simulated Gramian, with tolerance `2‖[A B]‖₂ · tail_bound`
/// plus a relative roundoff floor.
pub fn trajectory_membership(
    traj: &Trajectory,
    plant: &Plant,
    x0: &Vector,
) -> Result<GramianMembership> {
    let tol = 2.0 * spectral_norm(&hstack(plant.a(), plant.b())) * traj.tail_bound
        + 1e-9 * (1.0 + traj.gramian.norm());
    v_sdp_membership(&traj.gramian, plant, x0, tol)
}

/// Trajectory Gramian (with its closed-form tail) against the Lyapunov lift
/// for `W = x0 x0'`.
pub fn trajectory_gramian_vs_lyapunov(
    plant: &Plant,
    k: &Mat,
    x0: &Vector,
    t_final: f64,
    dt: f64,
) -> Result<GramianGap> {
    let traj = simulate_closed_loop(plant, k, x0, t_final, dt)?;
    compare_with_lyapunov(plant, k, x0, &traj)
}

pub fn compare_with_lyapunov(
    plant: &Plant,
    k: &Mat,
    x0: &Vector,
    traj: &Trajectory,
) -> Result<GramianGap> {
    let pinned = plant.with_initial_state(x0)?;
    let lift = lift_primal(&pinned, k)?;
    let total = traj.total_gramian();
    let n = plant.n();
    let energy = (plant.q() * total.view((0, 0), (n, n))).trace()
        + (plant.r() * total.view((n, n), (plant.m(), plant.m()))).trace();
    Ok(GramianGap {
        gap: (&total - &lift.z).norm(),
        tolerance: traj.tail_bound.max(1e-6),
        tail_bound: traj.tail_bound,
        energy,
        cost: cost(&pinned, k)?,
    })
}

/// `J1 = x0' P* x0` against `J2 = J(K*)` with `W = x0 x0'`.
pub fn optimality_sandwich(plant: &Plant, x0: &Vector) -> Result<Sandwich> {
    check_x0(plant, x0)?;
    let sol = solve_care(plant)?;
    if x0.iter().all(|v| *v == 0.0) {
        return Ok(Sandwich {
            j1: 0.0,
            j2: 0.0,
            gap: 0.0,
            degenerate: true,
        });
    }
    let j1 = (x0.transpose() * &sol.p_star * x0)[(0, 0)];
    let j2 = cost(&plant.with_initial_state(x0)?, &sol.k_star)?;
    Ok(Sandwich {
        j1,
        j2,
        gap: (j1 - j2).abs(),
        degenerate: false,
    })
}
