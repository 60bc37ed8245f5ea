//! Closed and Mather measures of a base cost.
//!
//! A closed measure is a probability on state pairs with equal marginals.
//! Mather measures minimize `∫ℓ₀ dμ` among closed measures, the minimum
//! being `−c₀`. The closed-measure polytope has the uniform measures on
//! elementary cycles as vertices, so the Mather polytope is spanned by the
//! uniform measures on minimum-mean cycles.

pub mod cycles;
pub mod simplex;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{BaseCost, FiniteSpace};
use crate::table::Table;

pub use cycles::simple_cycles;
pub use simplex::{solve_lp, LinearProgram, LpSolution};

const MASS_TOL: f64 = 1e-12;
const CLOSED_TOL: f64 = 1e-10;
/// Cycle means within this distance of the minimum are kept as Mather vertices.
const MEAN_TOL: f64 = 1e-9;
pub const DEFAULT_CYCLE_CAP: usize = 8;

#[derive(Clone, Debug)]
pub struct PairMeasure {
    weights: Table,
    cycle: Option<Vec<usize>>,
}

/// Measures compare by their weights only.
impl PartialEq for PairMeasure {
    fn eq(&self, other: &Self) -> bool {
        self.weights == other.weights
    }
}

impl PairMeasure {
    /// Validates non-negativity, unit mass and closedness.
    pub fn new(weights: Table) -> Result<Self> {
        let n = weights.dim();
        if weights.min() < 0.0 {
            return Err(Error::InvalidModel(format!(
                "measure has negative weight {}",
                weights.min()
            )));
        }
        let mass: f64 = weights.as_slice().iter().sum();
        if (mass - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidModel(format!("measure has mass {mass}")));
        }
        for z in 0..n {
            let out: f64 = (0..n).map(|x| weights.get(z, x)).sum();
            let inn: f64 = (0..n).map(|x| weights.get(x, z)).sum();
            if (out - inn).abs() > CLOSED_TOL {
                return Err(Error::InvalidModel(format!(
                    "measure is not closed at state {z}: {out} out vs {inn} in"
                )));
            }
        }
        Ok(Self {
            weights,
            cycle: None,
        })
    }

    /// Uniform measure on the edges of an elementary cycle.
    pub fn from_cycle(n: usize, cycle: &[usize]) -> Self {
        assert!(!cycle.is_empty());
        let w = 1.0 / cycle.len() as f64;
        let mut weights = Table::zeros(n);
        for (i, &z) in cycle.iter().enumerate() {
            let x = cycle[(i + 1) % cycle.len()];
            weights.set(z, x, weights.get(z, x) + w);
        }
        Self {
            weights,
            cycle: Some(cycle.to_vec()),
        }
    }

    /// Dirac mass `δ(z, x)`; closed only when `z == x`.
    pub fn point(n: usize, z: usize, x: usize) -> Self {
        assert_eq!(z, x, "a point mass off the diagonal is not closed");
        Self::from_cycle(n, &[z])
    }

    pub fn weights(&self) -> &Table {
        &self.weights
    }

    pub fn dim(&self) -> usize {
        self.weights.dim()
    }

    pub fn cycle(&self) -> Option<&[usize]> {
        self.cycle.as_deref()
    }

    pub fn support(&self) -> Vec<(usize, usize)> {
        let n = self.dim();
        let mut s = Vec::new();
        for z in 0..n {
            for x in 0..n {
                if self.weights.get(z, x) > 0.0 {
                    s.push((z, x));
                }
            }
        }
        s
    }

    /// `∫F dμ = Σ F(z, x)·μ(z, x)`.
    pub fn integrate(&self, f: &Table) -> f64 {
        integrate(self, f)
    }

    /// Human-readable form: `δ(b,b)` or `cycle a→b→a`.
    pub fn describe(&self, space: &FiniteSpace) -> String {
        match &self.cycle {
            Some(c) if c.len() == 1 => {
                let l = space.label(c[0]);
                format!("δ({l},{l})")
            }
            Some(c) => {
                let mut s: Vec<&str> = c.iter().map(|&i| space.label(i)).collect();
                s.push(space.label(c[0]));
                format!("cycle {}", s.join("→"))
            }
            None => {
                let parts: Vec<String> = self
                    .support()
                    .into_iter()
                    .map(|(z, x)| {
                        format!(
                            "{}·({},{})",
                            self.weights.get(z, x),
                            space.label(z),
                            space.label(x)
                        )
                    })
                    .collect();
                parts.join(" + ")
            }
        }
    }
}

/// `Σ F(z, x)·μ(z, x)`.
pub fn integrate(mu: &PairMeasure, f: &Table) -> f64 {
    assert_eq!(mu.dim(), f.dim(), "measure/table dimension");
    mu.weights
        .as_slice()
        .iter()
        .zip(f.as_slice())
        .filter(|(w, _)| **w != 0.0)
        .map(|(w, v)| w * v)
        .sum()
}

#[derive(Clone, Debug, PartialEq)]
pub struct MatherPolytope {
    pub vertices: Vec<PairMeasure>,
    /// `min ∫ℓ₀ dμ = −c₀`.
    pub value: f64,
}

/// Occupation-measure LP: minimize `∫ℓ₀ dμ` over closed probability measures.
pub fn mather_value_lp(base: &BaseCost) -> Result<(f64, PairMeasure)> {
    let n = base.len();
    let idx = |z: usize, x: usize| z * n + x;
    let mut lp = LinearProgram::new(base.table().as_slice().to_vec());
    for s in 0..n {
        let mut row = vec![0.0; n * n];
        for y in 0..n {
            row[idx(s, y)] += 1.0;
            row[idx(y, s)] -= 1.0;
        }
        lp.add_equality(row, 0.0);
    }
    lp.add_equality(vec![1.0; n * n], 1.0);
    let sol = match solve_lp(&lp) {
        Ok(s) => s,
        Err(Error::Infeasible) | Err(Error::Unbounded) => {
            unreachable!("closed-measure LP is feasible and bounded")
        }
        Err(e) => return Err(e),
    };
    let mass: f64 = sol.x.iter().sum();
    let weights = Table::from_fn(n, |z, x| sol.x[idx(z, x)] / mass);
    let witness = PairMeasure::new(weights)?;
    Ok((sol.value, witness))
}

/// Every uniform measure on a minimum-mean elementary cycle.
pub fn mather_vertices(base: &BaseCost) -> Result<MatherPolytope> {
    mather_vertices_capped(base, DEFAULT_CYCLE_CAP)
}

pub fn mather_vertices_capped(base: &BaseCost, cap: usize) -> Result<MatherPolytope> {
    let n = base.len();
    if n > cap {
        return Err(Error::CycleCapExceeded { n, cap });
    }
    let cycles = simple_cycles(&cycles::complete_digraph(n));
    let means: Vec<f64> = cycles
        .iter()
        .map(|c| {
            let total: f64 = (0..c.len())
                .map(|i| base.get(c[i], c[(i + 1) % c.len()]))
                .sum();
            total / c.len() as f64
        })
        .collect();
    let value = means.iter().copied().fold(f64::INFINITY, f64::min);
    let mut vertices: Vec<PairMeasure> = Vec::new();
    for (c, &m) in cycles.iter().zip(&means) {
        if m - value > MEAN_TOL {
            continue;
        }
        let mu = PairMeasure::from_cycle(n, c);
        if vertices
            .iter()
            .all(|v| v.weights.sup_dist(&mu.weights) > MASS_TOL)
        {
            vertices.push(mu);
        }
    }
    Ok(MatherPolytope { vertices, value })
}

/// Serializable view of a measure for artifacts.
#[derive(Clone, Debug, Serialize)]
pub struct MeasureRecord {
    pub description: String,
    pub cycle: Option<Vec<String>>,
    pub weights: Vec<Vec<f64>>,
}

impl MeasureRecord {
    pub fn new(mu: &PairMeasure, space: &FiniteSpace) -> Self {
        Self {
            description: mu.describe(space),
            cycle: mu
                .cycle()
                .map(|c| c.iter().map(|&i| space.label(i).to_string()).collect()),
            weights: mu.weights().to_rows(),
        }
    }
}
