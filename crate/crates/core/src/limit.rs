//! The vanishing-discount limit `u₀`.
//!
//! Two independent routes are implemented:
//!
//! * the supremum of the constrained subsolution set `S₀`, one LP per state;
//! * the minimum over Mather vertices of a ratio of barrier integrals.
//!
//! [`u0`] runs both and cross-checks them.

use rayon::prelude::*;

use crate::classical::{
    critical_constant, is_subsolution, peierls_barrier, weak_kam_residual, BarrierTable, TOL_FP,
};
use crate::error::{Error, Result};
use crate::mather::{mather_vertices, solve_lp, LinearProgram, MatherPolytope, PairMeasure};
use crate::model::{AssumptionReport, CostModel, TOL_L4};
use crate::table::{Potential, Table};

/// Slack allowed on the vertex constraints of `S₀`.
pub const TOL_S0: f64 = 1e-9;
/// Largest accepted disagreement between the two formulas.
pub const TOL_FORMULAS: f64 = 1e-7;
/// Largest accepted `‖T₀u₀ − u₀‖∞`.
pub const TOL_LIMIT_FP: f64 = 1e-8;

/// `Σ (Du(z,x)·w(z) + Dv(z,x)·w(x))·μ(z,x)` with derivatives at the origin.
pub fn vertex_functional(model: &CostModel, mu: &PairMeasure, w: &Potential) -> f64 {
    let (du, dv) = model.derivative_at_zero();
    vertex_functional_with(&du, &dv, mu, w)
}

fn vertex_functional_with(du: &Table, dv: &Table, mu: &PairMeasure, w: &Potential) -> f64 {
    let n = mu.dim();
    let mut total = 0.0;
    for z in 0..n {
        for x in 0..n {
            let m = mu.weights().get(z, x);
            if m != 0.0 {
                total += m * (du.get(z, x) * w[z] + dv.get(z, x) * w[x]);
            }
        }
    }
    total
}

/// Membership in `S₀`: a subsolution of the normalized `ℓ₀` satisfying every
/// vertex constraint up to [`TOL_S0`].
pub fn in_s0(model: &CostModel, w: &Potential, vertices: &[PairMeasure]) -> bool {
    if !is_subsolution(model.base(), 0.0, w, TOL_FP) {
        return false;
    }
    let (du, dv) = model.derivative_at_zero();
    vertices
        .iter()
        .all(|mu| vertex_functional_with(&du, &dv, mu, w) >= -TOL_S0)
}

/// Errors with the first vertex where `∫Λ dμ < 0` fails.
pub fn require_l4(model: &CostModel, vertices: &[PairMeasure]) -> Result<AssumptionReport> {
    let report = model.check_assumptions(vertices)?;
    if let Some(i) = report.first_l4_failure() {
        return Err(Error::L4Violated {
            vertex: i,
            description: vertices[i].describe(model.space()),
            value: report.l4_values[i],
        });
    }
    Ok(report)
}

/// `max w(target)` over `S₀`, without checking (l4) first.
///
/// Variables are `w = p − q` with `p, q ≥ 0`, followed by one slack per
/// off-diagonal subsolution row and one surplus per vertex row. Diagonal
/// rows read `0 ≤ ℓ₀(z, z)` and are skipped.
pub fn sup_formula_lp(model: &CostModel, vertices: &[PairMeasure], target: usize) -> Result<f64> {
    let n = model.len();
    let base = model.base();
    let (du, dv) = model.derivative_at_zero();
    let off_diag = n * (n - 1);
    let total = 2 * n + off_diag + vertices.len();
    let mut objective = vec![0.0; total];
    objective[target] = -1.0;
    objective[n + target] = 1.0;
    let mut lp = LinearProgram::new(objective);

    let mut slack = 2 * n;
    for z in 0..n {
        for x in 0..n {
            if z == x {
                continue;
            }
            // w(x) − w(z) + s = ℓ₀(z, x)
            let mut row = vec![0.0; total];
            row[x] += 1.0;
            row[n + x] -= 1.0;
            row[z] -= 1.0;
            row[n + z] += 1.0;
            row[slack] = 1.0;
            slack += 1;
            lp.add_equality(row, base.get(z, x));
        }
    }
    for mu in vertices {
        // Σ coef·w − s = 0
        let mut row = vec![0.0; total];
        for z in 0..n {
            for x in 0..n {
                let m = mu.weights().get(z, x);
                if m == 0.0 {
                    continue;
                }
                row[z] += m * du.get(z, x);
                row[n + z] -= m * du.get(z, x);
                row[x] += m * dv.get(z, x);
                row[n + x] -= m * dv.get(z, x);
            }
        }
        row[slack] = -1.0;
        slack += 1;
        lp.add_equality(row, 0.0);
    }
    let sol = solve_lp(&lp)?;
    Ok(sol.x[target] - sol.x[n + target])
}

/// `u₀ = sup S₀`, pointwise, on a normalized model.
///
/// Checks (l4) first, then verifies the result is a fixed point of `T₀`.
pub fn compute_u0_sup_formula(model: &CostModel, vertices: &[PairMeasure]) -> Result<Potential> {
    require_l4(model, vertices)?;
    let values = (0..model.len())
        .into_par_iter()
        .map(|x| sup_formula_lp(model, vertices, x))
        .collect::<Result<Vec<f64>>>()?;
    let u = Potential::new(values);
    let residual = weak_kam_residual(model.base(), 0.0, &u);
    if residual > TOL_LIMIT_FP {
        return Err(Error::NotFixedPoint { residual });
    }
    Ok(u)
}

/// Ratio of barrier integrals for one Mather measure at state `x`.
///
/// Numerator `Σ (Du(z,y)·h(z,x) + Dv(z,y)·h(y,x))·μ(z,y)`, denominator `∫Λ dμ`.
pub fn mather_ratio(model: &CostModel, mu: &PairMeasure, bt: &BarrierTable, x: usize) -> f64 {
    let (du, dv) = model.derivative_at_zero();
    let n = model.len();
    let mut num = 0.0;
    let mut den = 0.0;
    for z in 0..n {
        for y in 0..n {
            let m = mu.weights().get(z, y);
            if m == 0.0 {
                continue;
            }
            num += m * (du.get(z, y) * bt.h.get(z, x) + dv.get(z, y) * bt.h.get(y, x));
            den += m * (du.get(z, y) + dv.get(z, y));
        }
    }
    num / den
}

/// `u₀(x) = min over Mather vertices of the barrier ratio`.
///
/// The ratio is linear-fractional in `μ` with a negative denominator on the
/// polytope, so its minimum over the polytope is attained at a vertex.
pub fn compute_u0_mather_formula(
    model: &CostModel,
    vertices: &[PairMeasure],
    bt: &BarrierTable,
) -> Result<Potential> {
    if vertices.is_empty() {
        return Err(Error::EmptyVertexList);
    }
    let lam = model.lambda_density();
    for (i, mu) in vertices.iter().enumerate() {
        let value = mu.integrate(&lam);
        if value >= -TOL_L4 {
            return Err(Error::L4Violated {
                vertex: i,
                description: mu.describe(model.space()),
                value,
            });
        }
    }
    let values = (0..model.len())
        .map(|x| {
            vertices
                .iter()
                .map(|mu| mather_ratio(model, mu, bt, x))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    Ok(Potential::new(values))
}

/// Everything derived from the base cost that the limit and the solver need.
#[derive(Clone, Debug)]
pub struct Analysis {
    /// Critical constant of the raw base cost.
    pub c0: f64,
    /// Model with base cost `ℓ₀ + c₀`.
    pub normalized: CostModel,
    pub barrier: BarrierTable,
    pub polytope: MatherPolytope,
    pub assumptions: AssumptionReport,
}

pub fn prepare(model: &CostModel) -> Result<Analysis> {
    let c0 = critical_constant(model.base());
    let normalized = model.normalize_critical(c0);
    let barrier = peierls_barrier(normalized.base())?;
    let polytope = mather_vertices(normalized.base())?;
    let assumptions = normalized.check_assumptions(&polytope.vertices)?;
    Ok(Analysis {
        c0,
        normalized,
        barrier,
        polytope,
        assumptions,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct LimitResult {
    pub c0: f64,
    /// The sup-formula result, reported as `u₀`.
    pub u0: Potential,
    pub u0_mather: Potential,
    /// `‖u0 − u0_mather‖∞`
    pub gap: f64,
    /// `‖T₀u₀ + c₀ − u₀‖∞` for the raw cost.
    pub fixed_point_residual: f64,
}

/// Both formulas on a prepared model, cross-checked.
pub fn u0_from(analysis: &Analysis) -> Result<LimitResult> {
    let model = &analysis.normalized;
    let vertices = &analysis.polytope.vertices;
    let sup = compute_u0_sup_formula(model, vertices)?;
    let ratio = compute_u0_mather_formula(model, vertices, &analysis.barrier)?;
    let gap = sup.sup_dist(&ratio);
    if gap > TOL_FORMULAS {
        return Err(Error::FormulaMismatch { gap });
    }
    let fixed_point_residual = weak_kam_residual(model.base(), 0.0, &sup);
    Ok(LimitResult {
        c0: analysis.c0,
        u0: sup,
        u0_mather: ratio,
        gap,
        fixed_point_residual,
    })
}

/// `u₀` of a raw model.
pub fn u0(model: &CostModel) -> Result<LimitResult> {
    u0_from(&prepare(model)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BaseCost, Coupling};

    fn affine(rows: &[[f64; 2]], alpha: &[f64], beta: &[f64]) -> CostModel {
        let (a, b) = Coupling::rate_tables(alpha, beta).unwrap();
        CostModel::from_parts(
            BaseCost::from_rows(rows).unwrap(),
            Coupling::affine(a, b).unwrap(),
        )
        .unwrap()
    }

    const E1: [[f64; 2]; 2] = [[0.0, -1.0], [2.0, 1.0]];
    const E2: [[f64; 2]; 2] = [[0.0, 2.0], [3.0, 0.0]];

    #[test]
    fn s0_membership() {
        let m = affine(&E1, &[1.0, 1.0], &[0.0, 0.0]);
        let p = mather_vertices(m.base()).unwrap();
        assert!(in_s0(&m, &Potential::new(vec![0.0, -1.0]), &p.vertices));
        assert!(!in_s0(&m, &Potential::new(vec![0.1, -0.9]), &p.vertices));
        let bt = peierls_barrier(m.base()).unwrap();
        let row = bt.row(0);
        assert!(in_s0(&m, &row.shifted(-row.max()), &p.vertices));
        // not a subsolution
        assert!(!in_s0(&m, &Potential::new(vec![-5.0, 0.0]), &p.vertices));
    }

    #[test]
    fn sup_formula_examples() {
        let m = affine(&E1, &[1.0, 1.0], &[0.0, 0.0]);
        let p = mather_vertices(m.base()).unwrap();
        let u = compute_u0_sup_formula(&m, &p.vertices).unwrap();
        assert!(u.sup_dist(&Potential::new(vec![0.0, -1.0])) < 1e-12);

        let m = affine(&E2, &[1.0, 1.0], &[0.0, 0.0]);
        let p = mather_vertices(m.base()).unwrap();
        let u = compute_u0_sup_formula(&m, &p.vertices).unwrap();
        assert!(u.sup_dist(&Potential::zeros(2)) < 1e-12);
    }

    #[test]
    fn l4_failure_is_reported() {
        let m = affine(&E2, &[1.0, 0.0], &[0.0, 0.0]);
        let p = mather_vertices(m.base()).unwrap();
        match compute_u0_sup_formula(&m, &p.vertices) {
            Err(Error::L4Violated {
                vertex,
                description,
                ..
            }) => {
                assert_eq!(vertex, 1);
                assert_eq!(description, "δ(b,b)");
            }
            other => panic!("{other:?}"),
        }
        // with every derivative zero the constraint set is invariant under constants
        let m = affine(&E2, &[0.0, 0.0], &[0.0, 0.0]);
        let p = mather_vertices(m.base()).unwrap();
        assert!(matches!(
            sup_formula_lp(&m, &p.vertices, 0),
            Err(Error::Unbounded)
        ));
    }

    #[test]
    fn mather_formula_examples() {
        let m = affine(&E1, &[1.0, 1.0], &[0.0, 0.0]);
        let p = mather_vertices(m.base()).unwrap();
        let bt = peierls_barrier(m.base()).unwrap();
        let u = compute_u0_mather_formula(&m, &p.vertices, &bt).unwrap();
        assert_eq!(u, bt.row(0));
        assert_eq!(u.values(), &[0.0, -1.0]);

        let m = affine(&E2, &[1.0, 1.0], &[0.0, 0.0]);
        let p = mather_vertices(m.base()).unwrap();
        let bt = peierls_barrier(m.base()).unwrap();
        let u = compute_u0_mather_formula(&m, &p.vertices, &bt).unwrap();
        assert_eq!(u.values(), &[0.0, 0.0]);
    }

    #[test]
    fn combined_examples() {
        let r = u0(&affine(&E1, &[1.0, 1.0], &[0.0, 0.0])).unwrap();
        assert!(r.u0.sup_dist(&Potential::new(vec![0.0, -1.0])) < 1e-12);
        assert!(r.gap <= TOL_FORMULAS);
        let r = u0(&affine(&E2, &[1.0, 1.0], &[0.0, 0.0])).unwrap();
        assert!(r.u0.sup_dist(&Potential::zeros(2)) < 1e-12);

        let (a, b) = Coupling::rate_tables(&[1.0], &[0.0]).unwrap();
        let m = CostModel::from_parts(
            BaseCost::from_rows(&[[3.5]]).unwrap(),
            Coupling::affine(a, b).unwrap(),
        )
        .unwrap();
        let r = u0(&m).unwrap();
        assert_eq!(r.c0, -3.5);
        assert_eq!(r.u0.values(), &[0.0]);
    }
}
