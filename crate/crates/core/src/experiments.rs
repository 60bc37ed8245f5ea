//! λ-grid sweeps of `‖u_λ − u₀‖∞` and multi-start uniqueness probes.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::discounted::{
    run_fixed_point, sandwich, solve_discounted_with, Direction, SolveOptions,
};
use crate::error::{Error, Result};
use crate::limit::{prepare, u0_from, Analysis};
use crate::model::CostModel;
use crate::table::Potential;

pub const DEFAULT_GRID_STEPS: usize = 20;
pub const DEFAULT_CONV_TOL: f64 = 1e-6;
/// Tail length and ceiling of the slow-convergence criterion.
pub const TAIL_LEN: usize = 5;
pub const TAIL_CEILING: f64 = 1e-3;

/// `λ_k = 0.5·λ_max·2^{−k}`, `k = 0..20`.
pub fn default_grid(lambda_max: f64) -> Vec<f64> {
    (0..DEFAULT_GRID_STEPS as i32)
        .map(|k| 0.5 * lambda_max * 2f64.powi(-k))
        .collect()
}

/// `start·ratio^k` for `k < steps`, validated against `(0, lambda_max)`.
pub fn geometric_grid(start: f64, ratio: f64, steps: usize, lambda_max: f64) -> Result<Vec<f64>> {
    if steps == 0 {
        return Err(Error::InvalidGrid("grid needs at least one point".into()));
    }
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidGrid(format!(
            "ratio {ratio} must lie in (0, 1)"
        )));
    }
    let grid: Vec<f64> = (0..steps).map(|k| start * ratio.powi(k as i32)).collect();
    validate_grid(&grid, lambda_max)?;
    Ok(grid)
}

fn validate_grid(grid: &[f64], lambda_max: f64) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidGrid("empty grid".into()));
    }
    for (k, &l) in grid.iter().enumerate() {
        if !(l > 0.0 && l < lambda_max) {
            return Err(Error::InvalidGrid(format!(
                "lambda[{k}] = {l} outside (0, {lambda_max})"
            )));
        }
        if k > 0 && l >= grid[k - 1] {
            return Err(Error::InvalidGrid(format!(
                "grid is not strictly decreasing at index {k}"
            )));
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepReport {
    pub c0: f64,
    pub u0: Potential,
    pub lambdas: Vec<f64>,
    pub sup_errors: Vec<f64>,
    pub residuals: Vec<f64>,
    pub iterations: Vec<usize>,
    pub converged: bool,
}

impl SweepReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("lambda,sup_error,residual,iterations\n");
        for k in 0..self.lambdas.len() {
            writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{}",
                self.lambdas[k], self.sup_errors[k], self.residuals[k], self.iterations[k]
            )
            .unwrap();
        }
        out
    }

    /// gnuplot script plotting `sweep.csv` on log-log axes.
    pub fn gnuplot_script(csv_name: &str) -> String {
        format!(
            "set datafile separator ','\n\
             set logscale xy\n\
             set xlabel 'lambda'\n\
             set ylabel 'sup |u_lambda - u_0|'\n\
             set key off\n\
             plot '{csv_name}' every ::1 using 1:($2 > 0 ? $2 : 1e-17) with linespoints\n"
        )
    }
}

/// Final error below `conv_tol`, or a non-increasing tail of
/// [`TAIL_LEN`] errors all below [`TAIL_CEILING`].
pub fn sweep_converged(sup_errors: &[f64], conv_tol: f64) -> bool {
    let Some(&last) = sup_errors.last() else {
        return false;
    };
    if last <= conv_tol {
        return true;
    }
    if sup_errors.len() < TAIL_LEN {
        return false;
    }
    let tail = &sup_errors[sup_errors.len() - TAIL_LEN..];
    tail.windows(2).all(|w| w[1] <= w[0]) && tail.iter().all(|&e| e < TAIL_CEILING)
}

pub fn vanishing_discount_sweep(model: &CostModel, grid: &[f64]) -> Result<SweepReport> {
    let analysis = prepare(model)?;
    sweep_prepared(&analysis, grid, &SolveOptions::default(), DEFAULT_CONV_TOL)
}

pub fn sweep_prepared(
    analysis: &Analysis,
    grid: &[f64],
    opts: &SolveOptions,
    conv_tol: f64,
) -> Result<SweepReport> {
    let model = &analysis.normalized;
    validate_grid(grid, model.lambda_max())?;
    let limit = u0_from(analysis)?;
    let solved = grid
        .par_iter()
        .map(|&lambda| {
            solve_discounted_with(model, &analysis.barrier, lambda, opts).map_err(|e| {
                Error::AtLambda {
                    lambda,
                    source: Box::new(e),
                }
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let sup_errors: Vec<f64> = solved.iter().map(|s| s.u.sup_dist(&limit.u0)).collect();
    Ok(SweepReport {
        c0: analysis.c0,
        u0: limit.u0,
        lambdas: grid.to_vec(),
        converged: sweep_converged(&sup_errors, conv_tol),
        sup_errors,
        residuals: solved.iter().map(|s| s.residual).collect(),
        iterations: solved.iter().map(|s| s.iterations).collect(),
    })
}

/// Outcome of one start of a uniqueness probe.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StartOutcome {
    pub start: String,
    pub limit: Option<Potential>,
    pub residual: Option<f64>,
    pub iterations: Option<usize>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UniquenessReport {
    pub lambda: f64,
    pub starts: Vec<StartOutcome>,
    pub max_pairwise_gap: f64,
    pub unique: bool,
}

impl UniquenessReport {
    pub fn all_converged(&self) -> bool {
        self.starts.iter().all(|s| s.error.is_none())
    }
}

/// `count` potentials with entries uniform in `[−scale, scale]`.
pub fn random_starts(n: usize, count: usize, scale: f64, seed: u64) -> Vec<Potential> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| Potential::new((0..n).map(|_| rng.gen_range(-scale..=scale)).collect()))
        .collect()
}

/// Runs the fixed-point iteration from `u̲`, `ū`, `0` and every extra start.
pub fn uniqueness_probe(
    model: &CostModel,
    lambda: f64,
    extra_starts: &[Potential],
) -> Result<UniquenessReport> {
    let analysis = prepare(model)?;
    uniqueness_prepared(&analysis, lambda, extra_starts, &SolveOptions::default())
}

pub fn uniqueness_prepared(
    analysis: &Analysis,
    lambda: f64,
    extra_starts: &[Potential],
    opts: &SolveOptions,
) -> Result<UniquenessReport> {
    let model = &analysis.normalized;
    let n = model.len();
    if !(lambda > 0.0 && lambda < model.lambda_max()) {
        return Err(Error::InvalidLambda {
            lambda,
            lambda_max: model.lambda_max(),
        });
    }
    let (lower, upper) = sandwich(&analysis.barrier)?;
    let mut starts = vec![
        ("lower".to_string(), lower, Direction::Increasing),
        ("upper".to_string(), upper, Direction::Decreasing),
        ("zero".to_string(), Potential::zeros(n), Direction::Free),
    ];
    for (i, s) in extra_starts.iter().enumerate() {
        if s.len() != n {
            return Err(Error::Dimension {
                expected: n,
                found: s.len(),
            });
        }
        starts.push((format!("extra[{i}]"), s.clone(), Direction::Free));
    }
    let outcomes: Vec<StartOutcome> = starts
        .par_iter()
        .map(
            |(name, start, dir)| match run_fixed_point(model, lambda, start, *dir, opts) {
                Ok(run) => StartOutcome {
                    start: name.clone(),
                    residual: Some(run.residual),
                    iterations: Some(run.iterations()),
                    limit: Some(run.limit),
                    error: None,
                },
                Err(e) => StartOutcome {
                    start: name.clone(),
                    limit: None,
                    residual: None,
                    iterations: None,
                    error: Some(e.to_string()),
                },
            },
        )
        .collect();
    let limits: Vec<&Potential> = outcomes.iter().filter_map(|o| o.limit.as_ref()).collect();
    let mut gap = 0.0f64;
    for i in 0..limits.len() {
        for j in i + 1..limits.len() {
            gap = gap.max(limits[i].sup_dist(limits[j]));
        }
    }
    let converged = outcomes.iter().all(|o| o.error.is_none());
    Ok(UniquenessReport {
        lambda,
        unique: converged && gap <= 2.0 * opts.tol_fp,
        max_pairwise_gap: gap,
        starts: outcomes,
    })
}
