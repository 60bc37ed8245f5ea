//! The implicit operator
//! `Tφ(x) = min_z c(z, x, φ(z), Tφ(x))`
//! for costs that are `κ_u`-Lipschitz and non-decreasing in `u`,
//! `κ_v`-Lipschitz (`κ_v < 1`) and non-increasing in `v`.
//!
//! For fixed `φ` and `x` the map `f ↦ min_z c(z, x, φ(z), f)` is a
//! `κ_v`-contraction of the real line, so each state is solved on its own.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::table::Potential;

pub const DEFAULT_INNER_TOL: f64 = 1e-13;
pub const DEFAULT_INNER_CAP: usize = 1_000_000;

/// A cost `c(z, x, u, v)` on a finite space.
pub trait ImplicitCost: Sync {
    fn dim(&self) -> usize;
    fn eval(&self, z: usize, x: usize, u: f64, v: f64) -> f64;
    fn kappa_u(&self) -> f64;
    fn kappa_v(&self) -> f64;
}

/// A cost given by a closure.
pub struct GeneralCost<F> {
    n: usize,
    evaluator: F,
    kappa_u: f64,
    kappa_v: f64,
}

impl<F> GeneralCost<F>
where
    F: Fn(usize, usize, f64, f64) -> f64 + Sync,
{
    pub fn new(n: usize, kappa_u: f64, kappa_v: f64, evaluator: F) -> Result<Self> {
        if !(0.0..1.0).contains(&kappa_v) {
            return Err(Error::InvalidKappa { kappa_v });
        }
        if !(0.0..=1.0).contains(&kappa_u) {
            return Err(Error::InvalidModel(format!(
                "u-Lipschitz constant {kappa_u} must lie in [0, 1]"
            )));
        }
        Ok(Self {
            n,
            evaluator,
            kappa_u,
            kappa_v,
        })
    }
}

impl<F> ImplicitCost for GeneralCost<F>
where
    F: Fn(usize, usize, f64, f64) -> f64 + Sync,
{
    fn dim(&self) -> usize {
        self.n
    }

    fn eval(&self, z: usize, x: usize, u: f64, v: f64) -> f64 {
        (self.evaluator)(z, x, u, v)
    }

    fn kappa_u(&self) -> f64 {
        self.kappa_u
    }

    fn kappa_v(&self) -> f64 {
        self.kappa_v
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InnerOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for InnerOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_INNER_TOL,
            max_iter: DEFAULT_INNER_CAP,
        }
    }
}

/// Outcome of the scalar fixed-point solve at one state.
#[derive(Clone, Debug, PartialEq)]
pub struct InnerSolve {
    pub value: f64,
    pub iterations: usize,
    /// `|min_z c(z, x, φ(z), value) − value|`
    pub residual: f64,
    /// Minimizing source at the fixed point (lowest index on ties).
    pub argmin: usize,
    /// Step sizes `|f_{k+1} − f_k|`, when tracing was requested.
    pub steps: Vec<f64>,
}

#[inline]
fn min_over_sources<C: ImplicitCost + ?Sized>(
    cost: &C,
    phi: &Potential,
    x: usize,
    f: f64,
) -> (f64, usize) {
    let mut best = cost.eval(0, x, phi[0], f);
    let mut arg = 0;
    for z in 1..cost.dim() {
        let c = cost.eval(z, x, phi[z], f);
        if c < best {
            best = c;
            arg = z;
        }
    }
    (best, arg)
}

/// Solves `f = min_z c(z, x, φ(z), f)` by iteration from `f₀ = 0`.
pub fn solve_state<C: ImplicitCost + ?Sized>(
    cost: &C,
    phi: &Potential,
    x: usize,
    opts: InnerOptions,
    trace: bool,
) -> Result<InnerSolve> {
    let kappa_v = cost.kappa_v();
    if kappa_v.is_nan() || kappa_v >= 1.0 {
        return Err(Error::InvalidKappa { kappa_v });
    }
    let threshold = opts.tol * (1.0 - kappa_v);
    let mut f = 0.0;
    let mut steps = Vec::new();
    for k in 1..=opts.max_iter {
        let (next, _) = min_over_sources(cost, phi, x, f);
        let step = (next - f).abs();
        if trace {
            steps.push(step);
        }
        f = next;
        // below this, successive iterates differ only by rounding
        let floor = 8.0 * f64::EPSILON * f.abs();
        if step <= threshold.max(floor) {
            let (again, argmin) = min_over_sources(cost, phi, x, f);
            return Ok(InnerSolve {
                value: f,
                iterations: k,
                residual: (again - f).abs(),
                argmin,
                steps,
            });
        }
    }
    let (again, _) = min_over_sources(cost, phi, x, f);
    Err(Error::InnerNonConvergence {
        state: x,
        iterations: opts.max_iter,
        residual: (again - f).abs(),
    })
}

/// `Tφ` with per-state diagnostics.
pub fn apply_implicit_detailed<C: ImplicitCost + ?Sized>(
    cost: &C,
    phi: &Potential,
    opts: InnerOptions,
) -> Result<Vec<InnerSolve>> {
    if phi.len() != cost.dim() {
        return Err(Error::Dimension {
            expected: cost.dim(),
            found: phi.len(),
        });
    }
    (0..cost.dim())
        .map(|x| solve_state(cost, phi, x, opts, false))
        .collect()
}

/// `Tφ`.
pub fn apply_implicit<C: ImplicitCost + ?Sized>(cost: &C, phi: &Potential) -> Result<Potential> {
    apply_implicit_with(cost, phi, InnerOptions::default())
}

pub fn apply_implicit_with<C: ImplicitCost + ?Sized>(
    cost: &C,
    phi: &Potential,
    opts: InnerOptions,
) -> Result<Potential> {
    Ok(Potential::new(
        apply_implicit_detailed(cost, phi, opts)?
            .into_iter()
            .map(|s| s.value)
            .collect(),
    ))
}

/// Parallel variant of [`apply_implicit_with`]; results are identical.
pub fn apply_implicit_par<C: ImplicitCost + ?Sized>(
    cost: &C,
    phi: &Potential,
    opts: InnerOptions,
) -> Result<Potential> {
    if phi.len() != cost.dim() {
        return Err(Error::Dimension {
            expected: cost.dim(),
            found: phi.len(),
        });
    }
    let values: Result<Vec<f64>> = (0..cost.dim())
        .into_par_iter()
        .map(|x| solve_state(cost, phi, x, opts, false).map(|s| s.value))
        .collect();
    Ok(Potential::new(values?))
}

/// Samples (Lu), (Lv) and (M) on a 17×17 grid of `(u, v) ∈ [−10, 10]²`.
///
/// Returns one warning per violated property and state pair.
pub fn sample_hypotheses<C: ImplicitCost + ?Sized>(cost: &C) -> Vec<String> {
    const STEPS: usize = 17;
    let grid: Vec<f64> = (0..STEPS)
        .map(|i| -10.0 + 20.0 * i as f64 / (STEPS - 1) as f64)
        .collect();
    let slack = 1e-12;
    let n = cost.dim();
    let mut warnings = Vec::new();
    for z in 0..n {
        for x in 0..n {
            let (mut lu, mut lv, mut mu, mut mv) = (false, false, false, false);
            for i in 0..STEPS {
                for j in 0..STEPS {
                    let (u, v) = (grid[i], grid[j]);
                    let c = cost.eval(z, x, u, v);
                    if i + 1 < STEPS {
                        let cu = cost.eval(z, x, grid[i + 1], v);
                        let du = cu - c;
                        lu |= du.abs() > cost.kappa_u() * (grid[i + 1] - u) + slack;
                        mu |= du < -slack;
                    }
                    if j + 1 < STEPS {
                        let cv = cost.eval(z, x, u, grid[j + 1]);
                        let dv = cv - c;
                        lv |= dv.abs() > cost.kappa_v() * (grid[j + 1] - v) + slack;
                        mv |= dv > slack;
                    }
                }
            }
            for (bad, what) in [
                (lu, "u-Lipschitz bound (Lu)"),
                (lv, "v-Lipschitz bound (Lv)"),
                (mu, "monotonicity in u (M)"),
                (mv, "monotonicity in v (M)"),
            ] {
                if bad {
                    warnings.push(format!("({z},{x}): sampled violation of {what}"));
                }
            }
        }
    }
    warnings
}
