//! Named pass/fail checks over the built-in examples, grouped by module.
//!
//! Each check measures one scalar against a default tolerance; a caller may
//! substitute its own tolerance for every thresholded check at once.

use serde::Serialize;

use crate::duality::{certify, duality_gap};
use crate::error::{LqrError, Result};
use crate::gramian::{optimality_sandwich, simulate_closed_loop, trajectory_membership};
use crate::instances;
use crate::landscape::{
    cauchy_bridge_check, ecl_forward, ecl_inverse, hessian_slice, pgd_run, pl_check, pl_constant,
    quadratic_growth_check, sample_sublevel_around, slice_minimizer, PgdConfig, Sampling,
};
use crate::linalg::{Mat, Vector};
use crate::lyap_riccati::{closed_loop_gramian, cost, gradient, solve_care};
use crate::model::{structural_report, SufficientCondition};

pub const MODULES: [&str; 5] = [
    "lti_model",
    "lyap_riccati",
    "duality",
    "landscape",
    "gramian",
];

/// What a check measured. `measured ≤ tolerance` is required whenever the
/// check has a tolerance; `ok` carries every other condition.
struct Measurement {
    measured: f64,
    ok: bool,
    detail: String,
}

struct Check {
    name: &'static str,
    module: &'static str,
    tolerance: Option<f64>,
    run: fn() -> Result<Measurement>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub module: String,
    pub pass: bool,
    pub measured: f64,
    pub tolerance: Option<f64>,
    pub detail: String,
}

fn s(v: f64) -> Mat {
    Mat::from_element(1, 1, v)
}

fn measured(measured: f64, detail: String) -> Result<Measurement> {
    Ok(Measurement {
        measured,
        ok: true,
        detail,
    })
}

fn flag(ok: bool, detail: String) -> Result<Measurement> {
    Ok(Measurement {
        measured: f64::NAN,
        ok,
        detail,
    })
}

fn ex42_structure() -> Result<Measurement> {
    let r = structural_report(&instances::single_integrator().plant, None)?;
    flag(
        r.assumption1_holds && r.sufficient_condition == SufficientCondition::A,
        format!(
            "assumption holds: {}, condition {:?}",
            r.assumption1_holds, r.sufficient_condition
        ),
    )
}

fn ex43_structure() -> Result<Measurement> {
    let inst = instances::example_4_3(instances::DEFAULT_COUPLING);
    let r = structural_report(&inst.plant, inst.b1.as_ref())?;
    flag(
        r.stabilizable && r.controllable && r.sufficient_condition == SufficientCondition::B,
        format!(
            "stabilizable {}, controllable {}, condition {:?}",
            r.stabilizable, r.controllable, r.sufficient_condition
        ),
    )
}

fn ex31_structure() -> Result<Measurement> {
    let r = structural_report(
        &instances::example_3_1(instances::DEFAULT_COUPLING).plant,
        None,
    )?;
    flag(
        r.assumption1_holds && r.sufficient_condition == SufficientCondition::None,
        format!(
            "assumption holds: {}, condition {:?}",
            r.assumption1_holds, r.sufficient_condition
        ),
    )
}

fn ex42_cost() -> Result<Measurement> {
    let p = instances::single_integrator().plant;
    let mut worst: f64 = 0.0;
    for k in [0.5, 1.0, 2.0, 4.0] {
        worst = worst.max((cost(&p, &s(-k))? - (k + 1.0 / k)).abs());
    }
    measured(worst, format!("max |J(-k) - (k + 1/k)| = {worst:.3e}"))
}

fn ex42_care() -> Result<Measurement> {
    let sol = solve_care(&instances::single_integrator().plant)?;
    let err = (sol.p_star[(0, 0)] - 2.0)
        .abs()
        .max((sol.k_star[(0, 0)] + 1.0).abs());
    measured(
        err,
        format!("P* = {}, K* = {}", sol.p_star[(0, 0)], sol.k_star[(0, 0)]),
    )
}

fn ex31_non_unique() -> Result<Measurement> {
    let p = instances::example_3_1(instances::DEFAULT_COUPLING).plant;
    let target = 1.0 / (1.0 + instances::DEFAULT_COUPLING);
    let mut cost_err: f64 = 0.0;
    let mut xs = Vec::new();
    for k in [-1.0, -2.0, -5.0] {
        let kk = Mat::from_row_slice(1, 2, &[k, k]);
        cost_err = cost_err.max((cost(&p, &kk)? - target).abs());
        xs.push(closed_loop_gramian(&p, &kk)?.x);
    }
    let spread = xs.iter().map(|x| (x - &xs[0]).norm()).fold(0.0, f64::max);
    let ks = solve_care(&p)?.k_star;
    let k_diff = (ks[(0, 0)] - ks[(0, 1)]).abs();
    let worst = cost_err.max(spread).max(k_diff);
    measured(
        worst,
        format!("cost err {cost_err:.3e}, X spread {spread:.3e}, |K*_1 - K*_2| {k_diff:.3e}"),
    )
}

fn ex42_duality() -> Result<Measurement> {
    let p = instances::single_integrator().plant;
    let g = duality_gap(&p)?;
    let err = (g.p_star - 2.0)
        .abs()
        .max((g.d_star - 2.0).abs())
        .max(g.gap.abs());
    let strict = certify(&p)?.complementarity.strict;
    Ok(Measurement {
        measured: err,
        ok: strict,
        detail: format!(
            "p* = {}, d* = {}, strict complementarity {strict}",
            g.p_star, g.d_star
        ),
    })
}

fn ex31_duality() -> Result<Measurement> {
    let g = duality_gap(&instances::example_3_1(instances::DEFAULT_COUPLING).plant)?;
    let rel = g.gap.abs() / (1.0 + g.p_star.abs());
    measured(rel, format!("p* = {:.12}, d* = {:.12}", g.p_star, g.d_star))
}

fn ex42_pl_failure() -> Result<Measurement> {
    let p = instances::single_integrator().plant;
    let ratio = |k: f64| -> Result<f64> {
        Ok((cost(&p, &s(-k))? - 2.0) / gradient(&p, &s(-k))?.norm_squared())
    };
    let (r10, r1000) = (ratio(10.0)?, ratio(1000.0)?);
    flag(
        r1000 > 100.0 * r10,
        format!("ratio grows by {:.1} from k = 10 to k = 1000", r1000 / r10),
    )
}

fn ex42_pl_constants() -> Result<Measurement> {
    let p = instances::single_integrator().plant;
    let grid = Sampling::Explicit(
        (0..=300)
            .map(|i| s(-(0.5 + 1.5 * i as f64 / 300.0)))
            .collect(),
    );
    let e = pl_constant(&p, 2.5, &grid)?;
    let worst = [
        (e.kappa_lo, 0.5),
        (e.kappa_hi, 2.0),
        (e.op_norm, 1.0),
        (e.mu_qg, 0.5),
        (e.c_lqr, 0.125),
        (e.mu, 0.0078125),
    ]
    .iter()
    .map(|(a, b)| (a - b).abs())
    .fold(0.0, f64::max);
    measured(
        worst,
        format!("mu = {}, c = {}, mu_qg = {}", e.mu, e.c_lqr, e.mu_qg),
    )
}

fn ex42_pgd() -> Result<Measurement> {
    let p = instances::single_integrator().plant;
    let t = pgd_run(&p, &s(-0.5), &PgdConfig::default())?;
    let best = t
        .iterates
        .iter()
        .map(|it| it.dist_to_kstar)
        .fold(f64::INFINITY, f64::min);
    let rate_ok = t.rate_violations == 0;
    Ok(Measurement {
        measured: best,
        ok: rate_ok,
        detail: format!(
            "{} steps, rate {:.4} vs guaranteed {:.6}",
            t.iterates.len() - 1,
            t.empirical_rate.unwrap_or(f64::NAN),
            t.guaranteed_rate.unwrap_or(f64::NAN)
        ),
    })
}

fn ex43_dominance() -> Result<Measurement> {
    let p = instances::example_4_3(instances::DEFAULT_COUPLING).plant;
    let nu = 2.0 * cost(&p, &solve_care(&p)?.k_star)?;
    let est = pl_constant(
        &p,
        nu,
        &Sampling::Random {
            count: 500,
            seed: 0,
        },
    )?;
    let pl = pl_check(&p, nu, est.mu, &est.samples)?;
    let qg = quadratic_growth_check(&p, &est, &est.samples)?;
    let cb = cauchy_bridge_check(&p, &est, &est.samples)?;
    let total = pl.violations + qg.violations + cb.bridge.violations + cb.lower_bound_violations;
    flag(
        total == 0,
        format!(
            "mu = {:.3e}, {} samples, {total} violations",
            est.mu, pl.checked
        ),
    )
}

fn ex41_flattening() -> Result<Measurement> {
    let p = instances::example_3_1(instances::DEFAULT_COUPLING).plant;
    let mut curv = Vec::new();
    for b in [1.0, 10.0, 100.0, 1000.0] {
        curv.push(hessian_slice(&p, b, slice_minimizer(&p, b)?)?);
    }
    let monotone = curv.windows(2).all(|w| w[1] < w[0]);
    Ok(Measurement {
        measured: curv[3],
        ok: monotone,
        detail: format!("curvature at b = 1, 10, 100, 1000: {:.6?}", curv),
    })
}

fn ecl_errors(inst: crate::model::Instance, count: usize, seed: u64) -> Result<(f64, f64)> {
    let p = inst.plant;
    let ks = solve_care(&p)?.k_star;
    let nu = 2.0 * cost(&p, &ks)?;
    let (mut rt, mut fv): (f64, f64) = (0.0, 0.0);
    for k in sample_sublevel_around(&p, &ks, nu, count, seed)?.gains {
        let pt = ecl_forward(&p, &k, &ks)?;
        rt = rt.max((ecl_inverse(&pt.y, &pt.x, &ks)? - &k).norm() / (1.0 + k.norm()));
        fv = fv.max((pt.fcvx - pt.gamma).abs() / (1.0 + pt.gamma.abs()));
    }
    Ok((rt, fv))
}

fn ex42_ecl_round_trip() -> Result<Measurement> {
    let (rt, _) = ecl_errors(instances::single_integrator(), 100, 1)?;
    measured(rt, format!("100 samples, worst round trip {rt:.3e}"))
}

fn ex43_ecl_objective() -> Result<Measurement> {
    let (_, fv) = ecl_errors(instances::example_4_3(instances::DEFAULT_COUPLING), 100, 2)?;
    measured(
        fv,
        format!("100 samples, worst |f_cvx - J| / (1 + J) = {fv:.3e}"),
    )
}

fn ex31_singular_lift() -> Result<Measurement> {
    let p = instances::example_3_1(instances::DEFAULT_COUPLING).plant;
    let k = Mat::from_row_slice(1, 2, &[-1.0, -1.0]);
    let raised = matches!(ecl_forward(&p, &k, &k), Err(LqrError::SingularLift { .. }));
    flag(raised, format!("singular lift raised: {raised}"))
}

fn ex51_gramian() -> Result<Measurement> {
    let p = instances::example_5_1().plant;
    let t = simulate_closed_loop(&p, &s(-1.0), &Vector::from_element(1, 1.0), 40.0, 0.01)?;
    let expected = Mat::from_row_slice(2, 2, &[0.5, -0.5, -0.5, 0.5]);
    let err = (&t.gramian - expected).abs().max();
    measured(err, format!("Z_T = {:?}", t.gramian.as_slice()))
}

fn ex51_sandwich() -> Result<Measurement> {
    let inst = instances::example_5_1();
    let x0 = inst
        .x0
        .clone()
        .unwrap_or_else(|| Vector::from_element(1, 1.0));
    let sw = optimality_sandwich(&inst.plant, &x0)?;
    let k = solve_care(&inst.plant)?.k_star;
    let traj = crate::gramian::simulate_adaptive(&inst.plant, &k, &x0)?;
    let member = trajectory_membership(&traj, &inst.plant, &x0)?;
    Ok(Measurement {
        measured: sw.gap.abs() / (1.0 + sw.j1.abs()),
        ok: member.in_v_sdp,
        detail: format!(
            "J1 = {}, J2 = {}, trajectory Gramian in V_sdp: {}",
            sw.j1, sw.j2, member.in_v_sdp
        ),
    })
}

const CHECKS: &[Check] = &[
    Check {
        name: "ex4.2-structure",
        module: "lti_model",
        tolerance: None,
        run: ex42_structure,
    },
    Check {
        name: "ex4.3-structure",
        module: "lti_model",
        tolerance: None,
        run: ex43_structure,
    },
    Check {
        name: "ex3.1-structure",
        module: "lti_model",
        tolerance: None,
        run: ex31_structure,
    },
    Check {
        name: "ex4.2-cost",
        module: "lyap_riccati",
        tolerance: Some(1e-10),
        run: ex42_cost,
    },
    Check {
        name: "ex4.2-care",
        module: "lyap_riccati",
        tolerance: Some(1e-12),
        run: ex42_care,
    },
    Check {
        name: "ex3.1-non-unique-optima",
        module: "lyap_riccati",
        tolerance: Some(1e-8),
        run: ex31_non_unique,
    },
    Check {
        name: "ex4.2-strong-duality",
        module: "duality",
        tolerance: Some(1e-10),
        run: ex42_duality,
    },
    Check {
        name: "ex3.1-strong-duality",
        module: "duality",
        tolerance: Some(1e-8),
        run: ex31_duality,
    },
    Check {
        name: "ex4.2-pl-failure",
        module: "landscape",
        tolerance: None,
        run: ex42_pl_failure,
    },
    Check {
        name: "ex4.2-pl-constants",
        module: "landscape",
        tolerance: Some(1e-9),
        run: ex42_pl_constants,
    },
    Check {
        name: "ex4.2-gradient-descent",
        module: "landscape",
        tolerance: Some(1e-6),
        run: ex42_pgd,
    },
    Check {
        name: "ex4.3-gradient-dominance",
        module: "landscape",
        tolerance: None,
        run: ex43_dominance,
    },
    Check {
        name: "ex4.1-flattening",
        module: "landscape",
        tolerance: Some(1e-2),
        run: ex41_flattening,
    },
    Check {
        name: "ex4.2-ecl-round-trip",
        module: "landscape",
        tolerance: Some(1e-12),
        run: ex42_ecl_round_trip,
    },
    Check {
        name: "ex4.3-ecl-objective",
        module: "landscape",
        tolerance: Some(1e-9),
        run: ex43_ecl_objective,
    },
    Check {
        name: "ex3.1-singular-lift",
        module: "landscape",
        tolerance: None,
        run: ex31_singular_lift,
    },
    Check {
        name: "ex5.1-trajectory-gramian",
        module: "gramian",
        tolerance: Some(1e-6),
        run: ex51_gramian,
    },
    Check {
        name: "ex5.1-sandwich",
        module: "gramian",
        tolerance: Some(1e-8),
        run: ex51_sandwich,
    },
];

pub fn check_names() -> Vec<&'static str> {
    CHECKS.iter().map(|c| c.name).collect()
}

/// Run the checks whose name or module appears in `only` (all when empty).
/// `tolerance` replaces the default of every thresholded check.
pub fn run_checks(only: &[String], tolerance: Option<f64>) -> Result<Vec<CheckOutcome>> {
    if let Some(tol) = tolerance {
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(LqrError::Parameter(format!(
                "tolerance must be positive and finite, got {tol}"
            )));
        }
    }
    for sel in only {
        if !MODULES.contains(&sel.as_str()) && !CHECKS.iter().any(|c| c.name == sel) {
            return Err(LqrError::InvalidInput(format!(
                "unknown check or module '{sel}'"
            )));
        }
    }
    let selected = CHECKS
        .iter()
        .filter(|c| only.is_empty() || only.iter().any(|o| o == c.name || o == c.module));
    Ok(selected
        .map(|c| {
            let tol = c.tolerance.map(|t| tolerance.unwrap_or(t));
            let (pass, measured, detail) = match (c.run)() {
                Ok(m) => (
                    m.ok && tol.is_none_or(|t| m.measured <= t),
                    m.measured,
                    m.detail,
                ),
                Err(e) => (false, f64::NAN, format!("error: {e}")),
            };
            CheckOutcome {
                name: c.name.into(),
                module: c.module.into(),
                pass,
                measured,
                tolerance: tol,
                detail,
            }
        })
        .collect())
}
