//! Seeded model suites and independent oracles shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use weakkam::classical::BarrierTable;
use weakkam::mather::PairMeasure;
use weakkam::model::{BaseCost, CostModel, Coupling};
use weakkam::table::{Potential, Table};

pub const SUITE_SEED: u64 = 20261016;

pub fn rng(stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(SUITE_SEED);
    r.set_stream(stream);
    r
}

pub fn integer_cost(rng: &mut ChaCha8Rng, n: usize) -> BaseCost {
    BaseCost::new(Table::from_fn(n, |_, _| rng.gen_range(-5..=5) as f64)).unwrap()
}

/// Integer base costs with `n ∈ 1..=6`.
pub fn classical_suite(count: usize) -> Vec<BaseCost> {
    let mut r = rng(1);
    (0..count)
        .map(|_| {
            let n = r.gen_range(1..=6);
            integer_cost(&mut r, n)
        })
        .collect()
}

/// Models with `n ∈ 1..=5`, integer `ℓ₀`, rates `α, β ∈ [0.1, 1]`.
/// Even indices are affine, odd ones saturating with scale in `[0.5, 2]`.
pub fn admissible_suite(count: usize) -> Vec<CostModel> {
    let mut r = rng(2);
    (0..count)
        .map(|i| {
            let n = r.gen_range(1..=5);
            let base = integer_cost(&mut r, n);
            let alpha: Vec<f64> = (0..n).map(|_| r.gen_range(0.1..=1.0)).collect();
            let beta: Vec<f64> = (0..n).map(|_| r.gen_range(0.1..=1.0)).collect();
            let (a, b) = Coupling::rate_tables(&alpha, &beta).unwrap();
            let coupling = if i % 2 == 0 {
                Coupling::affine(a, b).unwrap()
            } else {
                Coupling::saturating(a, b, r.gen_range(0.5..=2.0)).unwrap()
            };
            CostModel::from_parts(base, coupling).unwrap()
        })
        .collect()
}

pub fn affine_rates(rows: &[[f64; 2]], alpha: &[f64], beta: &[f64]) -> CostModel {
    let (a, b) = Coupling::rate_tables(alpha, beta).unwrap();
    CostModel::from_parts(
        BaseCost::from_rows(rows).unwrap(),
        Coupling::affine(a, b).unwrap(),
    )
    .unwrap()
}

pub const E1: [[f64; 2]; 2] = [[0.0, -1.0], [2.0, 1.0]];
pub const E2: [[f64; 2]; 2] = [[0.0, 2.0], [3.0, 0.0]];

pub fn e1() -> CostModel {
    affine_rates(&E1, &[1.0, 1.0], &[0.0, 0.0])
}

pub fn e2() -> CostModel {
    affine_rates(&E2, &[1.0, 1.0], &[0.0, 0.0])
}

pub fn e2_bad() -> CostModel {
    affine_rates(&E2, &[1.0, 0.0], &[0.0, 0.0])
}

/// `min_{k ∈ [lo, hi]} (ℓ₀ + c₀)^{⊗k}` by plain repeated min-plus products.
pub fn windowed_liminf(tilde: &Table, lo: usize, hi: usize) -> Table {
    let n = tilde.dim();
    let mut power = tilde.clone();
    for _ in 1..lo {
        power = min_plus(&power, tilde);
    }
    let mut best = power.clone();
    for _ in lo..hi {
        power = min_plus(&power, tilde);
        best = Table::from_fn(n, |z, x| best.get(z, x).min(power.get(z, x)));
    }
    best
}

fn min_plus(p: &Table, q: &Table) -> Table {
    let n = p.dim();
    Table::from_fn(n, |z, x| {
        (0..n)
            .map(|y| p.get(z, y) + q.get(y, x))
            .fold(f64::INFINITY, f64::min)
    })
}

/// Vertices of the Mather polytope by basic-solution enumeration.
///
/// The polytope is `{μ ≥ 0 : closed, Σμ = 1, ∫ℓ₀ dμ = value}`. Every subset
/// of at most `n + 1` edges whose restricted system has a unique,
/// non-negative solution is a vertex.
pub fn lp_face_vertices(base: &BaseCost, value: f64) -> Vec<Table> {
    let n = base.len();
    let edges: Vec<(usize, usize)> = (0..n).flat_map(|z| (0..n).map(move |x| (z, x))).collect();
    let rows = n + 2;
    let mut found: Vec<Table> = Vec::new();
    let mut subset = Vec::new();
    fn visit(
        start: usize,
        max: usize,
        edges: &[(usize, usize)],
        subset: &mut Vec<usize>,
        f: &mut dyn FnMut(&[usize]),
    ) {
        if !subset.is_empty() {
            f(subset);
        }
        if subset.len() == max {
            return;
        }
        for i in start..edges.len() {
            subset.push(i);
            visit(i + 1, max, edges, subset, f);
            subset.pop();
        }
    }
    let mut check = |s: &[usize]| {
        let k = s.len();
        let a = DMatrix::from_fn(rows, k, |r, c| {
            let (z, x) = edges[s[c]];
            if r < n {
                (if z == r { 1.0 } else { 0.0 }) - (if x == r { 1.0 } else { 0.0 })
            } else if r == n {
                1.0
            } else {
                base.get(z, x)
            }
        });
        let mut b = DVector::zeros(rows);
        b[n] = 1.0;
        b[n + 1] = value;
        let svd = a.clone().svd(true, true);
        if svd.singular_values.min() < 1e-9 {
            return;
        }
        let Ok(sol) = svd.solve(&b, 1e-12) else {
            return;
        };
        if (&a * &sol - &b).amax() > 1e-9 || sol.min() < 1e-12 {
            return;
        }
        let mut t = Table::zeros(n);
        for (c, &e) in s.iter().enumerate() {
            let (z, x) = edges[e];
            t.set(z, x, sol[c]);
        }
        if found.iter().all(|v| v.sup_dist(&t) > 1e-9) {
            found.push(t);
        }
    };
    visit(0, n + 1, &edges, &mut subset, &mut check);
    found
}

/// Reduced limit formula when `∂_vℓ(·,·,0,0)` is constant:
/// `min_μ (∫Λ dμ)⁻¹ ∫Λ(z,y)·h(z,x) dμ(z,y)`.
pub fn reduced_formula_dv_constant(
    model: &CostModel,
    vertices: &[PairMeasure],
    bt: &BarrierTable,
) -> Potential {
    let n = model.len();
    let a = model.coupling().a();
    let b = model.coupling().b();
    let lam = Table::from_fn(n, |z, y| -a.get(z, y) - b.get(z, y));
    Potential::new(
        (0..n)
            .map(|x| {
                vertices
                    .iter()
                    .map(|mu| {
                        let w = mu.weights();
                        let mut den = 0.0;
                        let mut num = 0.0;
                        for z in 0..n {
                            for y in 0..n {
                                den += lam.get(z, y) * w.get(z, y);
                                num += lam.get(z, y) * bt.h.get(z, x) * w.get(z, y);
                            }
                        }
                        num / den
                    })
                    .fold(f64::INFINITY, f64::min)
            })
            .collect(),
    )
}

/// Reduced limit formula when `∂_uℓ(·,·,0,0)` is constant:
/// `min_μ (∫Λ(y,z) dμ(y,z))⁻¹ ∫Λ(z,y)·h(y,x) dμ(z,y)`.
pub fn reduced_formula_du_constant(
    model: &CostModel,
    vertices: &[PairMeasure],
    bt: &BarrierTable,
) -> Potential {
    let n = model.len();
    let a = model.coupling().a();
    let b = model.coupling().b();
    let lam = Table::from_fn(n, |z, y| -a.get(z, y) - b.get(z, y));
    Potential::new(
        (0..n)
            .map(|x| {
                vertices
                    .iter()
                    .map(|mu| {
                        let w = mu.weights();
                        let mut den = 0.0;
                        let mut num = 0.0;
                        for y in 0..n {
                            for z in 0..n {
                                den += lam.get(y, z) * w.get(y, z);
                            }
                        }
                        for z in 0..n {
                            for y in 0..n {
                                num += lam.get(z, y) * bt.h.get(y, x) * w.get(z, y);
                            }
                        }
                        num / den
                    })
                    .fold(f64::INFINITY, f64::min)
            })
            .collect(),
    )
}

/// Random point of the simplex of dimension `k`.
pub fn simplex_point(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let e: Vec<f64> = (0..k).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

/// Convex combination of vertex weight tables.
pub fn mix(vertices: &[PairMeasure], coeffs: &[f64]) -> Table {
    let n = vertices[0].dim();
    Table::from_fn(n, |z, x| {
        vertices
            .iter()
            .zip(coeffs)
            .map(|(v, c)| c * v.weights().get(z, x))
            .sum()
    })
}
