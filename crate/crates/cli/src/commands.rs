//! One function per subcommand: resolve the config, write the manifest, run,
//! write CSV/JSON artifacts and print the main report.

use anyhow::{bail, Result};
use lqr_core::checks::run_checks;
use lqr_core::instances::{self, random_plant, random_unit_vector, RandomShape};
use lqr_core::serde_matrix;
use lqr_core::*;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::output::{manifest_hash, Sink};
use crate::{AcceptanceFailure, Common, RunFlags};

const DEFAULT_CERTIFY_TOL: f64 = 1e-7;
const MAX_GRID_POINTS: usize = 4_000_000;

#[derive(Serialize)]
struct InstanceEcho {
    source: String,
    a: Option<f64>,
    data: PlantFile,
}

#[derive(Serialize)]
struct RunConfig<'a> {
    tool: &'static str,
    version: &'static str,
    subcommand: &'a str,
    instance: Option<&'a InstanceEcho>,
    seed: u64,
    tol: Option<f64>,
    params: Value,
}

fn input_error(msg: impl Into<String>) -> anyhow::Error {
    LqrError::InvalidInput(msg.into()).into()
}

fn load(c: &Common) -> Result<(Instance, InstanceEcho)> {
    let name = c.name.as_ref().or(c.builtin.as_ref());
    let (inst, source) = match (name, &c.instance) {
        (Some(name), None) => (instances::builtin(name, c.a)?, format!("builtin:{name}")),
        (None, Some(path)) => {
            if c.a.is_some() {
                return Err(input_error("--a only applies to built-in instances"));
            }
            let text = std::fs::read_to_string(path)
                .map_err(|e| input_error(format!("reading {}: {e}", path.display())))?;
            (
                Instance::from_json(&text)?,
                format!("file:{}", path.display()),
            )
        }
        (None, None) => {
            return Err(input_error(
                "an instance is required: --instance PATH or --builtin NAME",
            ))
        }
        (Some(_), Some(_)) => {
            return Err(input_error(
                "give either an instance file or a built-in, not both",
            ))
        }
    };
    let echo = InstanceEcho {
        source,
        a: c.a,
        data: inst.to_file(),
    };
    Ok((inst, echo))
}

fn start(
    subcommand: &str,
    echo: Option<&InstanceEcho>,
    run: &RunFlags,
    params: Value,
) -> Result<Sink> {
    if let Some(tol) = run.tol {
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(LqrError::Parameter(format!(
                "--tol must be positive and finite, got {tol}"
            ))
            .into());
        }
    }
    let config = RunConfig {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        subcommand,
        instance: echo,
        seed: run.seed,
        tol: run.tol,
        params,
    };
    let sink = Sink::new(&run.out, manifest_hash(&config)?)?;
    sink.manifest(&config)?;
    Ok(sink)
}

/// Write a line to stdout, ignoring a closed pipe.
fn emit(line: &str) {
    use std::io::Write;
    let _ = writeln!(std::io::stdout().lock(), "{line}");
}

fn print(value: &Value) {
    emit(&serde_json::to_string_pretty(value).expect("JSON value serializes"));
}

fn parse_numbers(text: &str, what: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| input_error(format!("{what}: '{t}' is not a finite number")))
        })
        .collect()
}

/// Row-major `m × n` gain from `a,b,…` or `a,b;c,d`.
fn parse_gain(text: &str, m: usize, n: usize) -> Result<Mat> {
    let rows: Vec<Vec<f64>> = text
        .split(';')
        .map(|r| parse_numbers(r, "gain"))
        .collect::<Result<_>>()?;
    let flat: Vec<f64> = rows.concat();
    let shaped = rows.len() == 1 || (rows.len() == m && rows.iter().all(|r| r.len() == n));
    if flat.len() != m * n || !shaped {
        return Err(input_error(format!("gain must be {m}x{n}, got '{text}'")));
    }
    Ok(Mat::from_row_slice(m, n, &flat))
}

fn parse_range(text: &str, what: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    let bad = || input_error(format!("{what} must be lo:hi:count, got '{text}'"));
    let [lo, hi, count] = parts.as_slice() else {
        return Err(bad());
    };
    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
    let count: usize = count.trim().parse().map_err(|_| bad())?;
    if !(lo.is_finite() && hi.is_finite()) || count == 0 || count > MAX_GRID_POINTS {
        return Err(bad());
    }
    Ok(linspace(lo, hi, count))
}

fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    (0..count)
        .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
        .collect()
}

#[derive(Serialize)]
struct SolveReport {
    #[serde(rename = "K_star", with = "serde_matrix")]
    k_star: Mat,
    #[serde(rename = "P_star", with = "serde_matrix")]
    p_star: Mat,
    #[serde(rename = "J_star")]
    j_star: f64,
    are_residual: f64,
    lyapunov_residual: f64,
    closed_loop_abscissa: f64,
    structure: StructuralReport,
}

/// `--tol` replaces the relative Riccati residual bound.
pub fn solve(c: &Common) -> Result<()> {
    let (inst, echo) = load(c)?;
    let sink = start("solve", Some(&echo), &c.run, json!({}))?;
    let plant = &inst.plant;
    let tol = Tolerances {
        care_residual: c.run.tol.unwrap_or(Tolerances::DEFAULT.care_residual),
        ..Tolerances::DEFAULT
    };
    let structure = structural_report(plant, inst.b1.as_ref())?;
    let sol = solve_care_with(plant, &tol)?;
    let gram = closed_loop_gramian(plant, &sol.k_star)?;
    let report = SolveReport {
        j_star: cost(plant, &sol.k_star)?,
        are_residual: sol.are_residual,
        lyapunov_residual: gram.residual,
        closed_loop_abscissa: sol.closed_loop_abscissa,
        k_star: sol.k_star,
        p_star: sol.p_star,
        structure,
    };
    print(&sink.json("solve.json", &report)?);
    Ok(())
}

#[derive(Serialize)]
struct CertifyReport {
    #[serde(flatten)]
    bundle: CertificateBundle,
    gap_bound: f64,
    slackness_bound: f64,
    pass: bool,
}

fn certify_one(plant: &Plant, t: f64) -> Result<CertifyReport> {
    let bundle = lqr_core::certify(plant)?;
    let m = lmi_matrix(plant, &bundle.riccati.p_star)?;
    let gap_bound = t * (1.0 + bundle.duality_gap.p_star.abs());
    let slackness_bound = t * (1.0 + bundle.primal.z.norm() * m.norm());
    let pass = bundle.duality_gap.gap.abs() <= gap_bound
        && bundle.complementarity.slackness.abs() <= slackness_bound
        && bundle.dual.feasible;
    Ok(CertifyReport {
        bundle,
        gap_bound,
        slackness_bound,
        pass,
    })
}

#[derive(Serialize)]
struct RandomRow {
    seed: u64,
    n: usize,
    m: usize,
    gap: f64,
    slackness: f64,
    rank_sum: usize,
    strict: bool,
    pass: bool,
    error: Option<String>,
}

fn parse_random(spec: &[String]) -> Result<(RandomShape, u64)> {
    let mut shape = RandomShape::default();
    let mut seeds = 100;
    for item in spec {
        let Some((key, value)) = item.split_once('=') else {
            return Err(input_error(format!(
                "--random expects KEY=VALUE, got '{item}'"
            )));
        };
        let v: u64 = value
            .parse()
            .map_err(|_| input_error(format!("--random {key}: '{value}' is not a count")))?;
        match key {
            "n" if (1..=32).contains(&v) => shape.n = Some(v as usize),
            "m" if v >= 1 => shape.m = Some(v as usize),
            "seeds" if v >= 1 => seeds = v,
            _ => {
                return Err(input_error(format!(
                    "--random: unsupported setting '{item}'"
                )))
            }
        }
    }
    if let (Some(n), Some(m)) = (shape.n, shape.m) {
        if m > n {
            return Err(input_error("--random needs m <= n"));
        }
    }
    Ok((shape, seeds))
}

/// `--tol t` certifies when `|gap| ≤ t (1 + J*)` and
/// `|⟨Z, M⟩| ≤ t (1 + ‖Z‖ ‖M‖)`.
pub fn certify(c: &Common, random: Option<&[String]>) -> Result<()> {
    let t = c.run.tol.unwrap_or(DEFAULT_CERTIFY_TOL);
    let Some(spec) = random else {
        let (inst, echo) = load(c)?;
        let sink = start("certify", Some(&echo), &c.run, json!({ "tolerance": t }))?;
        let report = certify_one(&inst.plant, t)?;
        print(&sink.json("certificate.json", &report)?);
        if !report.pass {
            bail!(AcceptanceFailure(format!(
                "certificate rejected: gap {:.3e} (bound {:.3e}), slackness {:.3e} (bound {:.3e})",
                report.bundle.duality_gap.gap,
                report.gap_bound,
                report.bundle.complementarity.slackness,
                report.slackness_bound
            )));
        }
        return Ok(());
    };
    if c.name.is_some() || c.builtin.is_some() || c.instance.is_some() {
        return Err(input_error(
            "--random replaces the instance; drop --instance/--builtin",
        ));
    }
    let (shape, seeds) = parse_random(spec)?;
    let first = c.run.seed;
    let params = json!({ "tolerance": t, "random": { "n": shape.n, "m": shape.m, "seeds": seeds, "first_seed": first } });
    let sink = start("certify", None, &c.run, params)?;
    let rows: Vec<RandomRow> = (first..first + seeds)
        .into_par_iter()
        .map(|seed| {
            let plant = random_plant(seed, shape);
            let (n, m) = (plant.n(), plant.m());
            match certify_one(&plant, t) {
                Ok(r) => RandomRow {
                    seed,
                    n,
                    m,
                    gap: r.bundle.duality_gap.gap,
                    slackness: r.bundle.complementarity.slackness,
                    rank_sum: r.bundle.complementarity.rank_sum,
                    strict: r.bundle.complementarity.strict,
                    pass: r.pass,
                    error: None,
                },
                Err(e) => RandomRow {
                    seed,
                    n,
                    m,
                    gap: f64::NAN,
                    slackness: f64::NAN,
                    rank_sum: 0,
                    strict: false,
                    pass: false,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    let passed = rows.iter().filter(|r| r.pass).count();
    let strict = rows.iter().filter(|r| r.strict).count();
    let summary =
        json!({ "instances": rows.len(), "passed": passed, "strict": strict, "results": rows });
    sink.json("certify_random.json", &summary)?;
    emit(&format!(
        "{passed} of {} bundles pass, {strict} strictly complementary (manifest {})",
        rows.len(),
        sink.hash()
    ));
    if passed < rows.len() {
        let failing: Vec<u64> = rows.iter().filter(|r| !r.pass).map(|r| r.seed).collect();
        bail!(AcceptanceFailure(format!(
            "certificates rejected for seeds {failing:?}"
        )));
    }
    Ok(())
}

fn parse_slice(text: &str) -> Result<SliceSpec> {
    if text == "full" {
        return Ok(SliceSpec::Full);
    }
    let b = text
        .strip_prefix("b=")
        .and_then(|v| v.parse::<f64>().ok())
        .filter(|b| b.is_finite())
        .ok_or_else(|| input_error(format!("--slice must be 'full' or 'b=VALUE', got '{text}'")))?;
    Ok(SliceSpec::Line { b })
}

pub fn landscape(c: &Common, slice: &str, k1: Option<&str>, k2: Option<&str>) -> Result<()> {
    let (inst, echo) = load(c)?;
    let plant = &inst.plant;
    let spec = parse_slice(slice)?;
    let explicit_k1 = k1.map(|t| parse_range(t, "--k1")).transpose()?;
    let explicit_k2 = k2.map(|t| parse_range(t, "--k2")).transpose()?;
    let mut line_min = None;
    let (g1, g2) = match spec {
        SliceSpec::Line { b } => {
            if explicit_k2.is_some() {
                return Err(input_error("--k2 is fixed by the line slice"));
            }
            let g1 = match explicit_k1 {
                Some(g) => g,
                None => {
                    let kmin = slice_minimizer(plant, b)?;
                    line_min = Some(kmin);
                    let w = 2.0 * (1.0 + b.abs());
                    linspace(kmin - w, kmin + w, 401)
                }
            };
            (g1, None)
        }
        SliceSpec::Full => {
            let entries = plant.m() * plant.n();
            let needs_star = explicit_k1.is_none() || (entries == 2 && explicit_k2.is_none());
            let ks = if needs_star {
                Some(solve_care(plant)?.k_star)
            } else {
                None
            };
            let around = |i: usize, count: usize| {
                let ks = ks
                    .as_ref()
                    .expect("K* computed when a default range is needed");
                let w = 2.0 * (1.0 + ks.norm());
                linspace(ks[i] - w, ks[i] + w, count)
            };
            match entries {
                1 => {
                    if explicit_k2.is_some() {
                        return Err(input_error("--k2 needs a 2-entry gain"));
                    }
                    (explicit_k1.unwrap_or_else(|| around(0, 401)), None)
                }
                2 => {
                    let row_major = |i: usize| if plant.m() == 1 { i } else { i * plant.n() };
                    let g1 = explicit_k1.unwrap_or_else(|| around(row_major(0), 101));
                    let g2 = explicit_k2.unwrap_or_else(|| around(row_major(1), 101));
                    (g1, Some(g2))
                }
                _ => {
                    return Err(LqrError::Dimension(
                        "a full grid needs a gain with one or two entries".into(),
                    )
                    .into())
                }
            }
        }
    };
    let points = g1.len() * g2.as_ref().map_or(1, Vec::len);
    if points > MAX_GRID_POINTS {
        return Err(input_error(format!(
            "{points} grid points exceed the limit of {MAX_GRID_POINTS}"
        )));
    }
    let params = json!({ "slice": spec, "k1": g1, "k2": g2 });
    let sink = start("landscape", Some(&echo), &c.run, params)?;
    let rows = landscape_grid(plant, spec, &g1, g2.as_deref())?;
    let header = ["k1", "k2", "J"].map(String::from);
    sink.csv(
        "grid.csv",
        &header,
        rows.iter().map(|r| vec![Some(r.k1), r.k2, Some(r.j)]),
    )?;

    let best = rows
        .iter()
        .filter(|r| r.j.is_finite())
        .min_by(|a, b| a.j.total_cmp(&b.j));
    let mut summary = json!({
        "slice": spec,
        "points": rows.len(),
        "stabilizing_points": rows.iter().filter(|r| r.j.is_finite()).count(),
        "grid_min": best.map(|r| json!({ "k1": r.k1, "k2": r.k2, "J": r.j })),
    });
    if let SliceSpec::Line { b } = spec {
        let kmin = match line_min {
            Some(k) => k,
            None => slice_minimizer(plant, b)?,
        };
        summary["minimizer"] = json!(kmin);
        summary["curvature_at_minimizer"] = json!(hessian_slice(plant, b, kmin)?);
        summary["reference_curvature"] = json!(reference_slice_curvature(b));
    }
    print(&sink.json("landscape.json", &summary)?);
    Ok(())
}

#[derive(Serialize)]
struct PgdSummary {
    #[serde(rename = "K0", with = "serde_matrix")]
    k0: Mat,
    #[serde(rename = "K_final", with = "serde_matrix")]
    k_final: Mat,
    #[serde(rename = "J_final")]
    j_final: f64,
    #[serde(rename = "J_star")]
    j_star: f64,
    iterations: usize,
    converged: bool,
    step_size: f64,
    smoothness: Option<f64>,
    mu: Option<f64>,
    empirical_rate: Option<f64>,
    guaranteed_rate: Option<f64>,
    rate_violations: usize,
    final_dist_to_kstar: f64,
}

pub fn pgd(c: &Common, k0: Option<&str>, step: &str, iters: usize, samples: usize) -> Result<()> {
    let (inst, echo) = load(c)?;
    let plant = &inst.plant;
    let k0 = match k0 {
        Some(text) => parse_gain(text, plant.m(), plant.n())?,
        None => stabilizing_gain(plant)?,
    };
    let step = match step {
        "auto" => StepSize::Auto,
        other => StepSize::Fixed(
            other
                .parse::<f64>()
                .ok()
                .filter(|s| *s > 0.0 && s.is_finite())
                .ok_or_else(|| {
                    input_error(format!(
                        "--step must be 'auto' or a positive number, got '{other}'"
                    ))
                })?,
        ),
    };
    if samples == 0 {
        return Err(input_error("--samples must be positive"));
    }
    let grad_tol = c.run.tol.unwrap_or(PgdConfig::default().grad_tol);
    let params = json!({
        "K0": serde_matrix::to_rows(&k0),
        "step": match step { StepSize::Auto => json!("auto"), StepSize::Fixed(a) => json!(a) },
        "iters": iters,
        "grad_tol": grad_tol,
        "samples": samples,
    });
    let sink = start("pgd", Some(&echo), &c.run, params)?;
    let config = PgdConfig {
        step,
        max_iters: iters,
        grad_tol,
        sampling: Sampling::Random {
            count: samples,
            seed: c.run.seed,
        },
        ..PgdConfig::default()
    };
    let trace = pgd_run(plant, &k0, &config)?;
    let header = ["iter", "J", "grad_norm", "dist_to_Kstar"].map(String::from);
    sink.csv(
        "pgd.csv",
        &header,
        trace.iterates.iter().map(|it| {
            vec![
                Some(it.iter as f64),
                Some(it.j),
                Some(it.grad_norm),
                Some(it.dist_to_kstar),
            ]
        }),
    )?;
    let last = trace.iterates.last().expect("the trace holds at least K0");
    let summary = PgdSummary {
        k0,
        k_final: last.k.clone(),
        j_final: last.j,
        j_star: trace.j_star,
        iterations: trace.iterates.len() - 1,
        converged: trace.converged,
        step_size: trace.step_size,
        smoothness: trace.smoothness,
        mu: trace.mu,
        empirical_rate: trace.empirical_rate,
        guaranteed_rate: trace.guaranteed_rate,
        rate_violations: trace.rate_violations,
        final_dist_to_kstar: last.dist_to_kstar,
    };
    print(&sink.json("pgd.json", &summary)?);
    Ok(())
}

pub fn pl(c: &Common, nu_mult: f64, samples: usize) -> Result<()> {
    if c.run.tol.is_some() {
        return Err(input_error("pl has no tolerance to override"));
    }
    if !(nu_mult >= 1.0 && nu_mult.is_finite()) {
        return Err(
            LqrError::Parameter(format!("--nu-mult must be at least 1, got {nu_mult}")).into(),
        );
    }
    if samples == 0 {
        return Err(input_error("--samples must be positive"));
    }
    let (inst, echo) = load(c)?;
    let plant = &inst.plant;
    let sink = start(
        "pl",
        Some(&echo),
        &c.run,
        json!({ "nu_mult": nu_mult, "samples": samples }),
    )?;
    let k_star = solve_care(plant)?.k_star;
    let nu = nu_mult * cost(plant, &k_star)?;
    let est = pl_constant_around(
        plant,
        &k_star,
        nu,
        &Sampling::Random {
            count: samples,
            seed: c.run.seed,
        },
    )?;
    let pl = pl_check(plant, nu, est.mu, &est.samples)?;
    let qg = quadratic_growth_check(plant, &est, &est.samples)?;
    let cb = cauchy_bridge_check(plant, &est, &est.samples)?;
    let header = ["sample_id", "J", "grad_norm_sq", "ratio"].map(String::from);
    sink.csv(
        "pl.csv",
        &header,
        pl.rows.iter().map(|r| {
            vec![
                Some(r.sample_id as f64),
                Some(r.j),
                Some(r.grad_norm_sq),
                Some(r.ratio),
            ]
        }),
    )?;
    let violations =
        pl.violations + qg.violations + cb.bridge.violations + cb.lower_bound_violations;
    let summary = json!({
        "estimate": est,
        "pl": { "checked": pl.checked, "skipped": pl.skipped, "violations": pl.violations, "worst_ratio": pl.worst_ratio },
        "quadratic_growth": qg,
        "cauchy_bridge": cb,
        "violations": violations,
    });
    print(&sink.json("pl.json", &summary)?);
    if violations > 0 {
        bail!(AcceptanceFailure(format!(
            "{violations} sampled inequality violations"
        )));
    }
    Ok(())
}

#[derive(Serialize)]
struct GramianReport {
    #[serde(rename = "K", with = "serde_matrix")]
    k: Mat,
    #[serde(with = "serde_matrix::vector")]
    x0: Vector,
    horizon: f64,
    steps: usize,
    #[serde(rename = "Z_T", with = "serde_matrix")]
    z_t: Mat,
    #[serde(with = "serde_matrix")]
    tail: Mat,
    tail_bound: f64,
    quadrature_error: f64,
    membership: GramianMembership,
    lyapunov: GramianGap,
    sandwich: Sandwich,
    pass: bool,
}

pub fn gramian(
    c: &Common,
    k: Option<&str>,
    x0: Option<&str>,
    horizon: Option<f64>,
    dt: f64,
) -> Result<()> {
    let (inst, echo) = load(c)?;
    let plant = &inst.plant;
    let k = match k {
        Some(text) => parse_gain(text, plant.m(), plant.n())?,
        None => solve_care(plant)?.k_star,
    };
    let x0 = match (x0, &inst.x0) {
        (Some(text), _) => {
            let v = parse_numbers(text, "--x0")?;
            if v.len() != plant.n() {
                return Err(
                    LqrError::Dimension(format!("--x0 needs {} entries", plant.n())).into(),
                );
            }
            Vector::from_vec(v)
        }
        (None, Some(x0)) => x0.clone(),
        (None, None) => random_unit_vector(c.run.seed, plant.n()),
    };
    let params = json!({
        "K": serde_matrix::to_rows(&k),
        "x0": x0.as_slice(),
        "horizon": horizon,
        "dt": horizon.map(|_| dt),
    });
    let sink = start("gramian", Some(&echo), &c.run, params)?;
    let traj = match horizon {
        Some(t) => simulate_closed_loop(plant, &k, &x0, t, dt)?,
        None => simulate_adaptive(plant, &k, &x0)?,
    };
    let membership = match c.run.tol {
        Some(t) => v_sdp_membership(&traj.total_gramian(), plant, &x0, t)?,
        None => trajectory_membership(&traj, plant, &x0)?,
    };
    let lyapunov = compare_with_lyapunov(plant, &k, &x0, &traj)?;
    let sandwich = optimality_sandwich(plant, &x0)?;

    let (n, m) = (plant.n(), plant.m());
    let header: Vec<String> = std::iter::once("t".to_string())
        .chain((1..=n).map(|i| format!("x_{i}")))
        .chain((1..=m).map(|i| format!("u_{i}")))
        .collect();
    sink.csv(
        "trajectory.csv",
        &header,
        traj.times.iter().enumerate().map(|(i, &t)| {
            std::iter::once(Some(t))
                .chain(traj.states.row(i).iter().map(|v| Some(*v)))
                .chain(traj.inputs.row(i).iter().map(|v| Some(*v)))
                .collect()
        }),
    )?;
    let pass = membership.in_v_sdp && lyapunov.gap <= lyapunov.tolerance;
    let report = GramianReport {
        k,
        x0,
        horizon: traj.horizon(),
        steps: traj.times.len() - 1,
        z_t: traj.gramian.clone(),
        tail: traj.tail.clone(),
        tail_bound: traj.tail_bound,
        quadrature_error: traj.quadrature_error,
        membership,
        lyapunov,
        sandwich,
        pass,
    };
    print(&sink.json("gramian.json", &report)?);
    if !pass {
        bail!(AcceptanceFailure(format!(
            "trajectory Gramian check failed: V_sdp membership {}, Lyapunov gap {:.3e} (tolerance {:.3e})",
            report.membership.in_v_sdp, report.lyapunov.gap, report.lyapunov.tolerance
        )));
    }
    Ok(())
}

pub fn examples(run: &RunFlags, only: &[String]) -> Result<()> {
    let sink = start("examples", None, run, json!({ "only": only }))?;
    let outcomes = run_checks(only, run.tol)?;
    emit(&format!(
        "{:<6} {:<13} {:<26} {:>12} {:>9}  detail",
        "result", "module", "check", "measured", "tolerance"
    ));
    for o in &outcomes {
        let tol = o
            .tolerance
            .map(|t| format!("{t:.0e}"))
            .unwrap_or_else(|| "-".into());
        let measured = if o.measured.is_nan() {
            "-".into()
        } else {
            format!("{:.3e}", o.measured)
        };
        emit(&format!(
            "{:<6} {:<13} {:<26} {:>12} {:>9}  {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.module,
            o.name,
            measured,
            tol,
            o.detail
        ));
    }
    let failing: Vec<&str> = outcomes
        .iter()
        .filter(|o| !o.pass)
        .map(|o| o.name.as_str())
        .collect();
    sink.json(
        "examples.json",
        &json!({ "checks": outcomes, "passed": outcomes.len() - failing.len(), "failed": failing }),
    )?;
    emit(&format!(
        "{} of {} checks passed",
        outcomes.len() - failing.len(),
        outcomes.len()
    ));
    if !failing.is_empty() {
        bail!(AcceptanceFailure(format!(
            "failing checks: {}",
            failing.join(", ")
        )));
    }
    Ok(())
}
