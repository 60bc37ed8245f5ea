//! Classical discrete weak KAM theory for a base cost `ℓ₀`.
//!
//! Everything here works on the complete digraph over the states with edge
//! weights `ℓ₀(z, x)`, self-loops included. The critical constant is minus
//! the minimum cycle mean; the Peierls barrier is assembled from the Mañé
//! potential through the Aubry set and checked against min-plus powers.

use crate::error::{Error, Result};
use crate::model::BaseCost;
use crate::table::{Potential, Table};

pub const TOL_AUBRY: f64 = 1e-9;
pub const TOL_FP: f64 = 1e-9;

/// Largest window start the internal barrier verification will use.
const MAX_ORACLE_START: u64 = 1 << 24;

/// `T₀f(x) = min_z f(z) + ℓ₀(z, x)`.
pub fn lax_oleinik(base: &BaseCost, f: &Potential) -> Potential {
    lax_oleinik_argmin(base, f).0
}

/// [`lax_oleinik`] together with the minimizing source of every state
/// (lowest index on ties).
pub fn lax_oleinik_argmin(base: &BaseCost, f: &Potential) -> (Potential, Vec<usize>) {
    let n = base.len();
    assert_eq!(f.len(), n, "potential dimension");
    let mut values = Vec::with_capacity(n);
    let mut argmin = Vec::with_capacity(n);
    for x in 0..n {
        let mut best = f[0] + base.get(0, x);
        let mut arg = 0;
        for z in 1..n {
            let c = f[z] + base.get(z, x);
            if c < best {
                best = c;
                arg = z;
            }
        }
        values.push(best);
        argmin.push(arg);
    }
    (Potential::new(values), argmin)
}

/// Minimum cycle mean of a weight table by Karp's algorithm.
///
/// `+inf` entries are missing edges; returns `None` for an acyclic graph.
pub fn min_cycle_mean(weights: &Table) -> Option<f64> {
    let n = weights.dim();
    if n == 0 {
        return None;
    }
    // walks[k][v]: least weight of a k-edge walk ending at v, from any start
    let mut walks = vec![vec![0.0; n]];
    for k in 1..=n {
        let prev = &walks[k - 1];
        let mut cur = vec![f64::INFINITY; n];
        for (z, &pz) in prev.iter().enumerate() {
            if pz == f64::INFINITY {
                continue;
            }
            for (x, c) in cur.iter_mut().enumerate() {
                let w = weights.get(z, x);
                if pz + w < *c {
                    *c = pz + w;
                }
            }
        }
        walks.push(cur);
    }
    let mut best: Option<f64> = None;
    #[allow(clippy::needless_range_loop)]
    for v in 0..n {
        let dn = walks[n][v];
        if dn == f64::INFINITY {
            continue;
        }
        let worst = (0..n)
            .filter(|&k| walks[k][v].is_finite())
            .map(|k| (dn - walks[k][v]) / (n - k) as f64)
            .fold(f64::NEG_INFINITY, f64::max);
        best = Some(match best {
            Some(b) if b <= worst => b,
            _ => worst,
        });
    }
    best
}

/// `c₀ = −(minimum cycle mean of ℓ₀)`.
pub fn critical_constant(base: &BaseCost) -> f64 {
    -min_cycle_mean(base.table()).expect("complete digraph has cycles")
}

/// Peierls barrier, Mañé potential and Aubry set of a base cost.
#[derive(Clone, Debug, PartialEq)]
pub struct BarrierTable {
    base: BaseCost,
    pub c0: f64,
    /// Least cost of a path of length ≥ 1 under `ℓ₀ + c₀`.
    pub mane: Table,
    pub h: Table,
    aubry: Vec<usize>,
}

impl BarrierTable {
    pub fn base(&self) -> &BaseCost {
        &self.base
    }

    pub fn dim(&self) -> usize {
        self.h.dim()
    }

    /// Row `h(x, ·)`.
    pub fn row(&self, x: usize) -> Potential {
        Potential::new(self.h.row(x).to_vec())
    }

    /// States flagged by the Mañé diagonal while the barrier was built.
    pub fn aubry_candidates(&self) -> &[usize] {
        &self.aubry
    }
}

/// `ℓ₀ + c₀` and its Mañé potential: min-plus powers `1..=n`, elementwise min.
pub fn mane_potential(tilde: &Table) -> Table {
    let n = tilde.dim();
    let mut power = tilde.clone();
    let mut mane = tilde.clone();
    for _ in 1..n {
        power = power.min_plus(tilde);
        mane = mane.elementwise_min(&power);
    }
    mane
}

fn through_aubry(mane: &Table, aubry: &[usize]) -> Table {
    let n = mane.dim();
    let leg = |from: usize, to: usize| if from == to { 0.0 } else { mane.get(from, to) };
    Table::from_fn(n, |x, y| {
        aubry
            .iter()
            .map(|&a| leg(x, a) + leg(a, y))
            .fold(f64::INFINITY, f64::min)
    })
}

/// `min_{k ∈ [start, start + len]} (ℓ₀ + c₀)^k` in the min-plus semiring.
///
/// For a window starting late enough this is `liminf_k h_k + k·c₀`.
pub fn liminf_oracle(tilde: &Table, start: u64, len: u64) -> Table {
    let mut power = tilde.min_plus_power(start.max(1));
    let mut best = power.clone();
    for _ in 0..len {
        power = power.min_plus(tilde);
        best = best.elementwise_min(&power);
    }
    best
}

/// A window start after which every minimal walk passes through the Aubry
/// set, so that [`liminf_oracle`] over `n + 1` consecutive powers is exact.
///
/// Walks that avoid the Aubry set only use cycles of mean at least `δ > 0`;
/// once they are long enough their cost exceeds every barrier value.
pub fn certified_oracle_start(tilde: &Table, h: &Table, aubry: &[usize]) -> Option<u64> {
    let n = tilde.dim();
    let outside: Vec<usize> = (0..n).filter(|s| !aubry.contains(s)).collect();
    let floor = 2 * n as u64;
    if outside.is_empty() {
        return Some(floor);
    }
    let sub = Table::from_fn(outside.len(), |i, j| tilde.get(outside[i], outside[j]));
    let Some(delta) = min_cycle_mean(&sub) else {
        return Some(floor.max(outside.len() as u64));
    };
    if delta <= 0.0 {
        return None;
    }
    let m = outside.len() as f64;
    let cheapest = sub.min().min(0.0);
    let ceiling = h.max().max(0.0);
    let need = (m - 1.0) + (ceiling - (m - 1.0) * cheapest) / delta + 1.0;
    if !need.is_finite() || need > MAX_ORACLE_START as f64 {
        return None;
    }
    Some(floor.max(need.ceil() as u64))
}

/// Peierls barrier through the Aubry set, verified against the liminf oracle
/// on a certified window.
pub fn peierls_barrier(base: &BaseCost) -> Result<BarrierTable> {
    let n = base.len();
    let c0 = critical_constant(base);
    let tilde = base.table().map(|w| w + c0);
    let mane = mane_potential(&tilde);
    let aubry: Vec<usize> = (0..n).filter(|&a| mane.get(a, a) <= TOL_AUBRY).collect();
    if aubry.is_empty() {
        return Err(Error::EmptyAubrySet);
    }
    let h = through_aubry(&mane, &aubry);
    if let Some(start) = certified_oracle_start(&tilde, &h, &aubry) {
        let oracle = liminf_oracle(&tilde, start, n as u64);
        let gap = oracle.sup_dist(&h);
        let scale = 1.0 + h.max().abs().max(h.min().abs());
        // repeated squaring sums `start` rounded terms
        let tol = 1e-9 * scale * (1.0 + start as f64 * f64::EPSILON * 1e3);
        if gap > tol {
            return Err(Error::BarrierOracleMismatch { gap });
        }
    }
    Ok(BarrierTable {
        base: base.clone(),
        c0,
        mane,
        h,
        aubry,
    })
}

/// `{x : |h(x, x)| ≤ TOL_AUBRY}`.
pub fn aubry_set(bt: &BarrierTable) -> Result<Vec<usize>> {
    let set: Vec<usize> = (0..bt.dim())
        .filter(|&x| bt.h.get(x, x).abs() <= TOL_AUBRY)
        .collect();
    if set.is_empty() {
        Err(Error::EmptyAubrySet)
    } else {
        Ok(set)
    }
}

/// `‖T₀u + c₀ − u‖∞`.
pub fn weak_kam_residual(base: &BaseCost, c0: f64, u: &Potential) -> f64 {
    lax_oleinik(base, u).shifted(c0).sup_dist(u)
}

/// `h(basepoint, ·)` for a basepoint in the Aubry set.
pub fn weak_kam_solution(bt: &BarrierTable, basepoint: usize) -> Result<Potential> {
    if !aubry_set(bt)?.contains(&basepoint) {
        return Err(Error::NotInAubrySet { state: basepoint });
    }
    let u = bt.row(basepoint);
    let residual = weak_kam_residual(&bt.base, bt.c0, &u);
    if residual > TOL_FP {
        return Err(Error::NotWeakKam { residual });
    }
    Ok(u)
}

/// Worst violation of `w(x) − w(z) ≤ ℓ₀(z, x) + c₀` (0 if none).
pub fn subsolution_violation(base: &BaseCost, c0: f64, w: &Potential) -> f64 {
    let n = base.len();
    let mut worst = 0.0f64;
    for z in 0..n {
        for x in 0..n {
            worst = worst.max(w[x] - w[z] - base.get(z, x) - c0);
        }
    }
    worst
}

pub fn is_subsolution(base: &BaseCost, c0: f64, w: &Potential, tol: f64) -> bool {
    subsolution_violation(base, c0, w) <= tol
}

/// Comparison principle: if `u ≥ v` on the Aubry set then `u ≥ v` everywhere.
///
/// Returns `Ok(false)` when the hypothesis does not hold on the Aubry set.
pub fn comparison_check(bt: &BarrierTable, u: &Potential, v: &Potential) -> Result<bool> {
    let residual = weak_kam_residual(&bt.base, bt.c0, u);
    if residual > TOL_FP {
        return Err(Error::NotWeakKam { residual });
    }
    let violation = subsolution_violation(&bt.base, bt.c0, v);
    if violation > TOL_FP {
        return Err(Error::NotSubsolution { violation });
    }
    let aubry = aubry_set(bt)?;
    if aubry.iter().any(|&a| u[a] < v[a] - TOL_FP) {
        return Ok(false);
    }
    for x in 0..u.len() {
        if u[x] < v[x] - TOL_FP {
            return Err(Error::ComparisonViolated {
                state: x,
                gap: u[x] - v[x],
            });
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base(rows: &[[f64; 2]]) -> BaseCost {
        BaseCost::from_rows(rows).unwrap()
    }

    const E1: [[f64; 2]; 2] = [[0.0, -1.0], [2.0, 1.0]];
    const E2: [[f64; 2]; 2] = [[0.0, 2.0], [3.0, 0.0]];

    #[test]
    fn lax_oleinik_examples() {
        assert_eq!(
            lax_oleinik(&base(&E1), &Potential::zeros(2)).values(),
            &[0.0, -1.0]
        );
        assert_eq!(
            lax_oleinik(&base(&E2), &Potential::new(vec![1.0, 0.0])).values(),
            &[1.0, 0.0]
        );
    }

    #[test]
    fn argmin_ties_go_to_lowest_index() {
        let b = BaseCost::from_rows(&[[0.0, 0.0], [0.0, 0.0]]).unwrap();
        let (_, arg) = lax_oleinik_argmin(&b, &Potential::zeros(2));
        assert_eq!(arg, vec![0, 0]);
    }

    #[test]
    fn critical_constant_examples() {
        assert_eq!(critical_constant(&base(&E2)), 0.0);
        assert_eq!(critical_constant(&base(&[[1.0, 2.0], [3.0, -1.0]])), 1.0);
        assert_eq!(critical_constant(&base(&[[4.0, 4.0], [4.0, 4.0]])), -4.0);
    }

    #[test]
    fn karp_on_two_cycle() {
        // loops cost 3, the 2-cycle has mean 0.5
        assert_eq!(critical_constant(&base(&[[3.0, 0.0], [1.0, 3.0]])), -0.5);
    }

    #[test]
    fn karp_with_missing_edges() {
        let inf = f64::INFINITY;
        let t = Table::from_rows(&[[inf, 1.0, inf], [inf, inf, 2.0], [inf, inf, inf]]).unwrap();
        assert_eq!(min_cycle_mean(&t), None);
        let t = Table::from_rows(&[[inf, 1.0, inf], [inf, inf, 2.0], [0.0, inf, inf]]).unwrap();
        assert_eq!(min_cycle_mean(&t), Some(1.0));
    }

    #[test]
    fn barrier_examples() {
        let bt = peierls_barrier(&base(&E1)).unwrap();
        assert_eq!(bt.h.to_rows(), vec![vec![0.0, -1.0], vec![2.0, 1.0]]);
        assert_eq!(aubry_set(&bt).unwrap(), vec![0]);

        let bt = peierls_barrier(&base(&E2)).unwrap();
        assert_eq!(bt.h.to_rows(), vec![vec![0.0, 2.0], vec![3.0, 0.0]]);
        assert_eq!(aubry_set(&bt).unwrap(), vec![0, 1]);

        let bt = peierls_barrier(&BaseCost::new(Table::zeros(3)).unwrap()).unwrap();
        assert_eq!(bt.h, Table::zeros(3));
        assert_eq!(aubry_set(&bt).unwrap(), vec![0, 1, 2]);
    }

    #[test]
    fn slow_transient_barrier() {
        // loop b is 1 above critical; reaching the Aubry point a costs 10 round trip
        let bt = peierls_barrier(&base(&[[0.0, 5.0], [5.0, 1.0]])).unwrap();
        assert_eq!(bt.h.get(1, 1), 10.0);
        let tilde = bt.base().table().map(|w| w + bt.c0);
        // a short window sees the cheaper non-Aubry loop instead
        assert_eq!(liminf_oracle(&tilde, 8, 8).get(1, 1), 8.0);
        let start = certified_oracle_start(&tilde, &bt.h, &[0]).unwrap();
        assert_eq!(liminf_oracle(&tilde, start, 2).get(1, 1), 10.0);
    }

    #[test]
    fn weak_kam_examples() {
        let bt = peierls_barrier(&base(&E1)).unwrap();
        assert_eq!(weak_kam_solution(&bt, 0).unwrap().values(), &[0.0, -1.0]);
        assert!(matches!(
            weak_kam_solution(&bt, 1),
            Err(Error::NotInAubrySet { state: 1 })
        ));
        let bt = peierls_barrier(&base(&E2)).unwrap();
        assert_eq!(weak_kam_solution(&bt, 1).unwrap().values(), &[3.0, 0.0]);
        let bt = peierls_barrier(&BaseCost::new(Table::zeros(3)).unwrap()).unwrap();
        assert_eq!(weak_kam_solution(&bt, 2).unwrap(), Potential::zeros(3));
    }

    #[test]
    fn subsolution_examples() {
        let b = base(&E1);
        assert!(is_subsolution(
            &b,
            0.0,
            &Potential::new(vec![0.0, -1.0]),
            0.0
        ));
        assert!(!is_subsolution(
            &b,
            0.0,
            &Potential::new(vec![0.0, 1.0]),
            1e-9
        ));
        assert!(is_subsolution(
            &base(&E2),
            0.0,
            &Potential::constant(2, 7.0),
            0.0
        ));
    }

    #[test]
    fn comparison_examples() {
        let bt = peierls_barrier(&base(&E1)).unwrap();
        let u = Potential::new(vec![0.0, -1.0]);
        assert!(comparison_check(&bt, &u, &u).unwrap());
        assert!(comparison_check(&bt, &u, &u.shifted(-1.0)).unwrap());
        assert!(!comparison_check(&bt, &u, &Potential::new(vec![0.5, -1.0])).unwrap());
        // not a weak KAM solution
        assert!(matches!(
            comparison_check(&bt, &Potential::new(vec![0.0, -3.0]), &u),
            Err(Error::NotWeakKam { .. })
        ));
        // not a subsolution
        assert!(matches!(
            comparison_check(&bt, &u, &Potential::new(vec![0.0, 1.0])),
            Err(Error::NotSubsolution { .. })
        ));
    }
}
