use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LqrError, Result};
use crate::linalg::Mat;
use crate::lyap_riccati::cost;
use crate::model::Plant;

use super::sampling::cost_or_inf;

/// Coordinates of a two-parameter gain family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SliceSpec {
    /// The raw gain entries: `K = [k1]` or `K = [k1, k2]`.
    Full,
    /// `K = [k, -b - k]`.
    Line { b: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub k1: f64,
    pub k2: Option<f64>,
    /// `NaN` where the gain does not stabilize.
    #[serde(rename = "J")]
    pub j: f64,
}

fn line_gain(b: f64, k: f64) -> Mat {
    Mat::from_row_slice(1, 2, &[k, -b - k])
}

fn require_two_state_single_input(plant: &Plant) -> Result<()> {
    if plant.m() != 1 || plant.n() != 2 {
        return Err(LqrError::Dimension(
            "slice K = [k, -b-k] needs n = 2, m = 1".into(),
        ));
    }
    Ok(())
}

fn slice_cost(plant: &Plant, b: f64, k: f64) -> Result<f64> {
    cost(plant, &line_gain(b, k))
}

fn second_difference(plant: &Plant, b: f64, k: f64, h: f64) -> Result<f64> {
    let j0 = slice_cost(plant, b, k)?;
    Ok((slice_cost(plant, b, k + h)? - 2.0 * j0 + slice_cost(plant, b, k - h)?) / (h * h))
}

/// `∂²/∂k² J([k, -b-k])` by central differences (`h = 1e-4 (1 + |k|)`) with one
/// Richardson extrapolation.
pub fn hessian_slice(plant: &Plant, b: f64, k: f64) -> Result<f64> {
    require_two_state_single_input(plant)?;
    let h = 1e-4 * (1.0 + k.abs());
    let coarse = second_difference(plant, b, k, h)?;
    let fine = second_difference(plant, b, k, h / 2.0)?;
    Ok((4.0 * fine - coarse) / 3.0)
}

/// Minimizer of `J([k, -b-k])`: a coarse scan over `|k| ≤ 10(1+|b|)`, then
/// golden-section search between the neighbours of the best grid point.
pub fn slice_minimizer(plant: &Plant, b: f64) -> Result<f64> {
    require_two_state_single_input(plant)?;
    let radius = 10.0 * (1.0 + b.abs());
    let points = 2001;
    let grid: Vec<f64> = (0..points)
        .map(|i| -radius + 2.0 * radius * i as f64 / (points - 1) as f64)
        .collect();
    let values: Vec<f64> = grid
        .par_iter()
        .map(|&k| cost_or_inf(plant, &line_gain(b, k)))
        .collect();
    let best = (0..points)
        .filter(|&i| values[i].is_finite())
        .min_by(|&i, &j| values[i].total_cmp(&values[j]))
        .ok_or_else(|| LqrError::Stability { abscissa: f64::NAN })?;
    let (mut lo, mut hi) = (
        grid[best.saturating_sub(1)],
        grid[(best + 1).min(points - 1)],
    );
    let f = |k: f64| cost_or_inf(plant, &line_gain(b, k));
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (hi - lo).abs() <= 1e-10 * (1.0 + lo.abs()) {
            break;
        }
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = f(d);
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Reference curvature `5(304 + 84b) / (11(10b² + 29b + 18))`.
pub fn reference_slice_curvature(b: f64) -> f64 {
    5.0 * (304.0 + 84.0 * b) / (11.0 * (10.0 * b * b + 29.0 * b + 18.0))
}

/// `J` over a tensor grid of slice coordinates, in row-major order
/// (`k1` outer). Unstable gains give `NaN`.
pub fn landscape_grid(
    plant: &Plant,
    slice: SliceSpec,
    k1: &[f64],
    k2: Option<&[f64]>,
) -> Result<Vec<GridRow>> {
    if k1.iter().chain(k2.unwrap_or(&[])).any(|v| !v.is_finite()) {
        return Err(LqrError::InvalidInput("grid values must be finite".into()));
    }
    let points: Vec<(f64, Option<f64>, Mat)> = match slice {
        SliceSpec::Full => match (plant.m() * plant.n(), k2) {
            (1, None) => k1
                .iter()
                .map(|&a| (a, None, Mat::from_element(1, 1, a)))
                .collect(),
            (2, Some(k2)) => {
                let shape = (plant.m(), plant.n());
                k1.iter()
                    .flat_map(|&a| {
                        k2.iter().map(move |&b| {
                            (a, Some(b), Mat::from_row_slice(shape.0, shape.1, &[a, b]))
                        })
                    })
                    .collect()
            }
            _ => {
                return Err(LqrError::Dimension(
                    "a full grid needs one coordinate for a 1x1 gain or two for a 2-entry gain"
                        .into(),
                ))
            }
        },
        SliceSpec::Line { b } => {
            if plant.m() * plant.n() != 2 || plant.m() != 1 {
                return Err(LqrError::Dimension(
                    "slice K = [k, -b-k] needs a 1x2 gain".into(),
                ));
            }
            k1.iter()
                .map(|&k| (k, Some(-b - k), line_gain(b, k)))
                .collect()
        }
    };
    Ok(points
        .par_iter()
        .map(|(a, b, k)| GridRow {
            k1: *a,
            k2: *b,
            j: cost(plant, k).unwrap_or(f64::NAN),
        })
        .collect())
}
