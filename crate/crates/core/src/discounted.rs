//! The discounted operator
//! `T_λφ(x) = min_z φ(z) + ℓ(z, x, λφ(z), λT_λφ(x))`
//! and its fixed points `u_λ`.
//!
//! Fixed points are reached by monotone iteration from a weak KAM
//! solution shifted below zero (`u̲`, the iterates increase) and one shifted
//! above zero (`ū`, the iterates decrease). Every fixed point lies between
//! the two.
//!
//! Plain iteration contracts at a rate of roughly `1 − λ|Λ|`, which is
//! hopeless for small `λ`. After a logged warm-up the solver therefore
//! switches to Newton steps on `u − T_λu` whose Jacobian is taken along the
//! current minimizing sources (policy iteration with a damped line search).
//! The polished point must stay on the correct side of the last monotone
//! iterate, otherwise the solver falls back to plain iteration.

use nalgebra::{DMatrix, DVector};

use crate::classical::{aubry_set, peierls_barrier, BarrierTable, TOL_FP};
use crate::error::{Error, Result};
use crate::implicit::{apply_implicit_detailed, apply_implicit_with, ImplicitCost, InnerOptions};
use crate::model::CostModel;
use crate::table::Potential;

const MONOTONE_TOL: f64 = 1e-10;
const SANDWICH_TOL: f64 = 1e-9;
/// Largest critical constant accepted as "normalized".
const NORMALIZED_TOL: f64 = 1e-9;
/// Iterates kept in a run's log.
const LOG_CAP: usize = 10_000;
const NEWTON_MAX_STEPS: usize = 60;
const LINE_SEARCH_STEPS: usize = 30;

/// `c(z, x, u, v) = u + ℓ(z, x, λu, λv)` as an implicit cost.
pub struct DiscountedCost<'a> {
    model: &'a CostModel,
    lambda: f64,
}

impl<'a> DiscountedCost<'a> {
    pub fn new(model: &'a CostModel, lambda: f64) -> Result<Self> {
        check_lambda(model, lambda)?;
        Ok(Self { model, lambda })
    }
}

impl ImplicitCost for DiscountedCost<'_> {
    fn dim(&self) -> usize {
        self.model.len()
    }

    #[inline]
    fn eval(&self, z: usize, x: usize, u: f64, v: f64) -> f64 {
        self.model.discounted_integrand(z, x, u, v, self.lambda)
    }

    fn kappa_u(&self) -> f64 {
        1.0
    }

    fn kappa_v(&self) -> f64 {
        self.lambda * self.model.kappa_v()
    }
}

fn check_lambda(model: &CostModel, lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda < model.lambda_max() {
        Ok(())
    } else {
        Err(Error::InvalidLambda {
            lambda,
            lambda_max: model.lambda_max(),
        })
    }
}

/// `T_λφ`.
pub fn apply_t_lambda(model: &CostModel, phi: &Potential, lambda: f64) -> Result<Potential> {
    apply_implicit_with(
        &DiscountedCost::new(model, lambda)?,
        phi,
        InnerOptions::default(),
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    /// Iterates must be entrywise non-decreasing.
    Increasing,
    /// Iterates must be entrywise non-increasing.
    Decreasing,
    /// No order is expected (arbitrary starting potentials).
    Free,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveOptions {
    pub tol_fp: f64,
    pub max_outer: usize,
    /// Plain iterations before Newton polishing starts.
    pub warmup: usize,
    pub accelerate: bool,
    pub inner: InnerOptions,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol_fp: TOL_FP,
            max_outer: 100_000,
            warmup: 64,
            accelerate: true,
            inner: InnerOptions::default(),
        }
    }
}

/// One fixed-point run from a given start.
#[derive(Clone, Debug, PartialEq)]
pub struct FixedPointRun {
    pub limit: Potential,
    /// Plain iterates, starting with the start itself (capped).
    pub iterates: Vec<Potential>,
    pub plain_steps: usize,
    pub newton_steps: usize,
    pub residual: f64,
}

impl FixedPointRun {
    pub fn iterations(&self) -> usize {
        self.plain_steps + self.newton_steps
    }

    /// Largest order violation along the logged iterates.
    pub fn order_violation(&self, direction: Direction) -> f64 {
        self.iterates
            .windows(2)
            .map(|w| match direction {
                Direction::Increasing => w[0].excess_over(&w[1]),
                Direction::Decreasing => w[1].excess_over(&w[0]),
                Direction::Free => 0.0,
            })
            .fold(0.0, f64::max)
    }
}

struct Stepper<'a> {
    model: &'a CostModel,
    cost: DiscountedCost<'a>,
    lambda: f64,
    inner: InnerOptions,
}

impl Stepper<'_> {
    fn apply(&self, u: &Potential) -> Result<Potential> {
        apply_implicit_with(&self.cost, u, self.inner)
    }

    /// `T_λu`, the minimizing sources, and the slopes `∂(T_λu)(x)/∂u(π(x))`.
    fn linearize(&self, u: &Potential) -> Result<(Potential, Vec<usize>, Vec<f64>)> {
        let solves = apply_implicit_detailed(&self.cost, u, self.inner)?;
        let lambda = self.lambda;
        let mut tu = Vec::with_capacity(solves.len());
        let mut policy = Vec::with_capacity(solves.len());
        let mut slope = Vec::with_capacity(solves.len());
        for (x, s) in solves.into_iter().enumerate() {
            let z = s.argmin;
            let dc_du = 1.0 + lambda * self.model.partial_u(z, x, lambda * u[z]);
            let dc_dv = lambda * self.model.partial_v(z, x, lambda * s.value);
            tu.push(s.value);
            policy.push(z);
            slope.push(dc_du / (1.0 - dc_dv));
        }
        Ok((Potential::new(tu), policy, slope))
    }

    /// Damped Newton on `u − T_λu`, run until the residual stops decreasing.
    fn polish(&self, start: Potential) -> Result<(Potential, usize)> {
        let n = start.len();
        let mut u = start;
        let (mut tu, mut policy, mut slope) = self.linearize(&u)?;
        let mut g = tu.sup_dist(&u);
        let mut steps = 0;
        while steps < NEWTON_MAX_STEPS && g > 0.0 {
            // First step: policy evaluation (I − J)·w = T_λu − J·u, δ = w − u.
            // Later steps refine in residual form (I − J)·δ = T_λu − u, whose
            // right-hand side does not cancel when λ is small.
            let mut m = DMatrix::<f64>::identity(n, n);
            let mut rhs = DVector::<f64>::zeros(n);
            for x in 0..n {
                let z = policy[x];
                m[(x, z)] -= slope[x];
                rhs[x] = if steps == 0 {
                    tu[x] - slope[x] * u[z]
                } else {
                    tu[x] - u[x]
                };
            }
            let Some(sol) = m.lu().solve(&rhs) else { break };
            if sol.iter().any(|d| !d.is_finite()) {
                break;
            }
            let delta: Vec<f64> = if steps == 0 {
                (0..n).map(|i| sol[i] - u[i]).collect()
            } else {
                sol.iter().copied().collect()
            };
            let target = (steps == 0).then(|| Potential::new(sol.iter().copied().collect()));
            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..LINE_SEARCH_STEPS {
                let trial = match &target {
                    Some(w) if t == 1.0 => w.clone(),
                    _ => u.map(|i, v| v + t * delta[i]),
                };
                let (t_tu, t_policy, t_slope) = self.linearize(&trial)?;
                let t_g = t_tu.sup_dist(&trial);
                if t_g < (1.0 - 1e-4 * t) * g {
                    u = trial;
                    tu = t_tu;
                    policy = t_policy;
                    slope = t_slope;
                    g = t_g;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            steps += 1;
            if !accepted {
                break;
            }
        }
        Ok((u, steps))
    }
}

/// Iterates `T_λ` from `start`, checking the expected order on the way.
pub fn run_fixed_point(
    model: &CostModel,
    lambda: f64,
    start: &Potential,
    direction: Direction,
    opts: &SolveOptions,
) -> Result<FixedPointRun> {
    let stepper = Stepper {
        model,
        cost: DiscountedCost::new(model, lambda)?,
        lambda,
        inner: opts.inner,
    };
    if start.len() != model.len() {
        return Err(Error::Dimension {
            expected: model.len(),
            found: start.len(),
        });
    }
    let stop = opts.tol_fp * (1.0 - lambda * model.kappa_u()) / 2.0;
    let mut u = start.clone();
    let mut iterates = vec![u.clone()];
    let mut plain_steps = 0;
    let mut newton_steps = 0;
    let mut polish_pending = opts.accelerate;

    let residual = loop {
        let budget_hit = opts.accelerate && polish_pending && plain_steps >= opts.warmup;
        if !budget_hit {
            let next = stepper.apply(&u)?;
            plain_steps += 1;
            let amount = match direction {
                Direction::Increasing => u.excess_over(&next),
                Direction::Decreasing => next.excess_over(&u),
                Direction::Free => 0.0,
            };
            if amount > MONOTONE_TOL {
                return Err(Error::MonotonicityViolation {
                    step: plain_steps,
                    amount,
                });
            }
            let step = next.sup_dist(&u);
            u = next;
            if iterates.len() < LOG_CAP {
                iterates.push(u.clone());
            }
            if step > stop && !(opts.accelerate && polish_pending && plain_steps >= opts.warmup) {
                if plain_steps >= opts.max_outer {
                    return Err(Error::NonConvergence {
                        lambda,
                        iterations: plain_steps,
                        residual: step,
                    });
                }
                continue;
            }
            if !polish_pending {
                break stepper.apply(&u)?.sup_dist(&u);
            }
        }

        // Newton polish from the last monotone iterate
        polish_pending = false;
        let (candidate, k) = stepper.polish(u.clone())?;
        newton_steps += k;
        let residual = stepper.apply(&candidate)?.sup_dist(&candidate);
        let ordered = match direction {
            Direction::Increasing => u.excess_over(&candidate) <= SANDWICH_TOL,
            Direction::Decreasing => candidate.excess_over(&u) <= SANDWICH_TOL,
            Direction::Free => true,
        };
        if residual <= opts.tol_fp && ordered {
            u = candidate;
            break residual;
        }
        // polishing failed; keep iterating plainly from the monotone iterate
    };
    if residual > opts.tol_fp {
        return Err(Error::NonConvergence {
            lambda,
            iterations: plain_steps + newton_steps,
            residual,
        });
    }
    Ok(FixedPointRun {
        limit: u,
        iterates,
        plain_steps,
        newton_steps,
        residual,
    })
}

/// Weak KAM solutions `ū ≥ 0` and `u̲ ≤ 0` built from the barrier row of
/// the lowest-index Aubry point.
pub fn sandwich(bt: &BarrierTable) -> Result<(Potential, Potential)> {
    let a = aubry_set(bt)?[0];
    let row = bt.row(a);
    Ok((row.shifted(-row.max()), row.shifted(-row.min())))
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiscountedSolution {
    pub lambda: f64,
    /// Limit of the iteration from `u̲`.
    pub u: Potential,
    pub residual: f64,
    pub iterations: usize,
    pub lower_bound_ok: bool,
    pub upper_bound_ok: bool,
    /// Limit of the iteration from `ū`.
    pub u_from_above: Potential,
    /// `‖u − u_from_above‖∞`
    pub gap: f64,
    pub unique: bool,
    pub lower_start: Potential,
    pub upper_start: Potential,
    pub lower_run: FixedPointRun,
    pub upper_run: FixedPointRun,
}

/// Solves `u = T_λu` on a critically normalized model.
pub fn solve_discounted(model: &CostModel, lambda: f64) -> Result<DiscountedSolution> {
    let bt = peierls_barrier(model.base())?;
    solve_discounted_with(model, &bt, lambda, &SolveOptions::default())
}

/// [`solve_discounted`] with a precomputed barrier of `model.base()`.
pub fn solve_discounted_with(
    model: &CostModel,
    bt: &BarrierTable,
    lambda: f64,
    opts: &SolveOptions,
) -> Result<DiscountedSolution> {
    check_lambda(model, lambda)?;
    if bt.c0.abs() > NORMALIZED_TOL {
        return Err(Error::NotNormalized { c0: bt.c0 });
    }
    let (lower, upper) = sandwich(bt)?;
    let lower_run = run_fixed_point(model, lambda, &lower, Direction::Increasing, opts)?;
    let upper_run = run_fixed_point(model, lambda, &upper, Direction::Decreasing, opts)?;
    let u = lower_run.limit.clone();
    let gap = u.sup_dist(&upper_run.limit);
    Ok(DiscountedSolution {
        lambda,
        residual: lower_run.residual,
        iterations: lower_run.iterations(),
        lower_bound_ok: lower.le_within(&u, SANDWICH_TOL),
        upper_bound_ok: u.le_within(&upper, SANDWICH_TOL),
        u_from_above: upper_run.limit.clone(),
        gap,
        unique: gap <= 2.0 * opts.tol_fp,
        u,
        lower_start: lower,
        upper_start: upper,
        lower_run,
        upper_run,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Orbit {
    /// `x₀, x₋₁, x₋₂, …`
    pub states: Vec<usize>,
    /// Largest `|u(x_{k}) − u(x_{k−1}) − ℓ(…)|` along the orbit.
    pub max_defect: f64,
}

/// Backward minimizing orbit of a discounted solution.
///
/// `x₋ₖ₋₁` minimizes `u(z) + ℓ(z, x₋ₖ, λu(z), λu(x₋ₖ))`, lowest index on ties.
pub fn backward_orbit(
    model: &CostModel,
    sol: &DiscountedSolution,
    x0: usize,
    length: usize,
) -> Orbit {
    let u = &sol.u;
    let lambda = sol.lambda;
    let mut states = Vec::with_capacity(length + 1);
    states.push(x0);
    let mut max_defect = 0.0f64;
    let mut x = x0;
    for _ in 0..length {
        let mut best = f64::INFINITY;
        let mut arg = 0;
        for z in 0..model.len() {
            let c = model.discounted_integrand(z, x, u[z], u[x], lambda);
            if c < best {
                best = c;
                arg = z;
            }
        }
        max_defect = max_defect.max((u[x] - best).abs());
        states.push(arg);
        x = arg;
    }
    Orbit { states, max_defect }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classical::lax_oleinik;
    use crate::model::{BaseCost, Coupling};
    use crate::table::Table;

    fn affine(l0: &[[f64; 2]; 2], alpha: &[f64], beta: &[f64]) -> CostModel {
        let (a, b) = Coupling::rate_tables(alpha, beta).unwrap();
        CostModel::from_parts(
            BaseCost::from_rows(l0).unwrap(),
            Coupling::affine(a, b).unwrap(),
        )
        .unwrap()
    }

    const E1: [[f64; 2]; 2] = [[0.0, -1.0], [2.0, 1.0]];
    const E2: [[f64; 2]; 2] = [[0.0, 2.0], [3.0, 0.0]];

    #[test]
    fn affine_reduction_example() {
        let m = affine(&E1, &[1.0, 1.0], &[0.0, 0.0]);
        let t = apply_t_lambda(&m, &Potential::constant(2, 2.0), 0.5).unwrap();
        assert_eq!(t.values(), &[1.0, 0.0]);
        let direct = lax_oleinik(m.base(), &Potential::constant(2, 1.0));
        assert_eq!(t, direct);
    }

    #[test]
    fn zero_potential_gives_column_minima() {
        let a = Table::from_rows(&[[0.3, 0.2], [0.1, 0.4]]).unwrap();
        let m = CostModel::from_parts(
            BaseCost::from_rows(&E1).unwrap(),
            Coupling::saturating(a.clone(), Table::zeros(2), 0.7).unwrap(),
        )
        .unwrap();
        let t = apply_t_lambda(&m, &Potential::zeros(2), 0.5).unwrap();
        assert_eq!(t.values(), &[0.0, -1.0]);

        // with B ≠ 0 the v-slot sees λT_λ0 ≠ 0, so only the implicit equation holds
        let b = Table::from_rows(&[[0.2, 0.5], [0.6, 0.1]]).unwrap();
        let m = CostModel::from_parts(
            BaseCost::from_rows(&E1).unwrap(),
            Coupling::saturating(a, b, 0.7).unwrap(),
        )
        .unwrap();
        let t = apply_t_lambda(&m, &Potential::zeros(2), 0.5).unwrap();
        for x in 0..2 {
            let rhs = (0..2)
                .map(|z| m.discounted_integrand(z, x, 0.0, t[x], 0.5))
                .fold(f64::INFINITY, f64::min);
            assert!((rhs - t[x]).abs() < 1e-12);
        }
        assert_eq!(t[0], 0.0);
        assert!(t[1] > -1.0);
    }

    #[test]
    fn vanishing_lambda_approaches_lax_oleinik() {
        let m = CostModel::from_parts(
            BaseCost::from_rows(&E1).unwrap(),
            Coupling::saturating(Table::filled(2, 1.0), Table::filled(2, 0.5), 1.0).unwrap(),
        )
        .unwrap();
        let phi = Potential::new(vec![0.4, -2.5]);
        let t = apply_t_lambda(&m, &phi, 1e-9).unwrap();
        assert!(t.sup_dist(&lax_oleinik(m.base(), &phi)) <= 1e-7);
    }

    #[test]
    fn solve_examples() {
        let m = affine(&E1, &[1.0, 1.0], &[0.0, 0.0]);
        let s = solve_discounted(&m, 0.25).unwrap();
        assert_eq!(s.u.values(), &[0.0, -1.0]);
        assert!(s.residual < 1e-10);
        assert!(s.lower_bound_ok && s.upper_bound_ok && s.unique);

        let m = affine(&E2, &[1.0, 1.0], &[0.0, 0.0]);
        for lambda in [0.8, 0.25, 1e-3, 1e-6] {
            let s = solve_discounted(&m, lambda).unwrap();
            assert_eq!(s.u.values(), &[0.0, 0.0], "lambda = {lambda}");
            assert!(s.unique);
        }
        assert!(matches!(
            solve_discounted(&m, 0.9),
            Err(Error::InvalidLambda { .. })
        ));
        assert!(matches!(
            solve_discounted(&m, 0.0),
            Err(Error::InvalidLambda { .. })
        ));
    }

    #[test]
    fn rejects_unnormalized_model() {
        let m = affine(&[[1.0, 2.0], [3.0, -1.0]], &[1.0, 1.0], &[0.0, 0.0]);
        assert!(matches!(
            solve_discounted(&m, 0.25),
            Err(Error::NotNormalized { .. })
        ));
    }

    #[test]
    fn plain_and_accelerated_agree() {
        let m = affine(&[[1.0, 3.0], [-1.0, 2.0]], &[0.5, 0.2], &[0.3, 0.1]);
        let c0 = crate::classical::critical_constant(m.base());
        let m = m.normalize_critical(c0);
        let bt = peierls_barrier(m.base()).unwrap();
        let plain = SolveOptions {
            accelerate: false,
            tol_fp: 1e-12,
            ..Default::default()
        };
        let a = solve_discounted_with(&m, &bt, 0.3, &SolveOptions::default()).unwrap();
        let b = solve_discounted_with(&m, &bt, 0.3, &plain).unwrap();
        assert!(a.u.sup_dist(&b.u) < 1e-9, "{:?} {:?}", a.u, b.u);
        assert!(b.lower_run.order_violation(Direction::Increasing) == 0.0);
    }

    #[test]
    fn orbit_examples() {
        let m = affine(&E1, &[1.0, 1.0], &[0.0, 0.0]);
        let s = solve_discounted(&m, 0.25).unwrap();
        let o = backward_orbit(&m, &s, 1, 4);
        assert_eq!(o.states, vec![1, 0, 0, 0, 0]);
        assert!(o.max_defect <= 2.0 * TOL_FP);
        assert_eq!(backward_orbit(&m, &s, 1, 0).states, vec![1]);

        let m = affine(&E2, &[1.0, 1.0], &[0.0, 0.0]);
        let s = solve_discounted(&m, 0.25).unwrap();
        assert_eq!(backward_orbit(&m, &s, 1, 3).states, vec![1, 1, 1, 1]);
        assert_eq!(backward_orbit(&m, &s, 0, 3).states, vec![0, 0, 0, 0]);
    }
}
