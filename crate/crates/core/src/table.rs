//! Square tables indexed by state pairs and potentials indexed by states.
//!
//! A [`Table`] entry `(z, x)` is read "from `z` to `x`": rows are sources,
//! columns are targets. Entries may be `+inf` for tables that encode missing
//! edges (min-plus powers of restricted graphs); cost tables proper are
//! always finite.

use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    n: usize,
    data: Vec<f64>,
}

impl Table {
    pub fn filled(n: usize, value: f64) -> Self {
        Self {
            n,
            data: vec![value; n * n],
        }
    }

    pub fn zeros(n: usize) -> Self {
        Self::filled(n, 0.0)
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for z in 0..n {
            for x in 0..n {
                data.push(f(z, x));
            }
        }
        Self { n, data }
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for row in rows {
            let row = row.as_ref();
            if row.len() != n {
                return Err(Error::Dimension {
                    expected: n,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Self { n, data })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, z: usize, x: usize) -> f64 {
        self.data[z * self.n + x]
    }

    #[inline]
    pub fn set(&mut self, z: usize, x: usize, value: f64) {
        self.data[z * self.n + x] = value;
    }

    pub fn row(&self, z: usize) -> &[f64] {
        &self.data[z * self.n..(z + 1) * self.n]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|z| self.row(z).to_vec()).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Sup-norm distance; both tables must share a dimension.
    pub fn sup_dist(&self, other: &Table) -> f64 {
        assert_eq!(self.n, other.n);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| if a == b { 0.0 } else { (a - b).abs() })
            .fold(0.0, f64::max)
    }

    /// Min-plus product: `(A ⊗ B)(z, x) = min_y A(z, y) + B(y, x)`.
    pub fn min_plus(&self, other: &Table) -> Table {
        assert_eq!(self.n, other.n);
        let n = self.n;
        let mut out = Table::filled(n, f64::INFINITY);
        for z in 0..n {
            for y in 0..n {
                let a = self.get(z, y);
                if a == f64::INFINITY {
                    continue;
                }
                for x in 0..n {
                    let s = a + other.get(y, x);
                    if s < out.data[z * n + x] {
                        out.data[z * n + x] = s;
                    }
                }
            }
        }
        out
    }

    pub fn elementwise_min(&self, other: &Table) -> Table {
        assert_eq!(self.n, other.n);
        Table {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| a.min(b))
                .collect(),
        }
    }

    /// `self^k` in the min-plus semiring, by repeated squaring. `k >= 1`.
    pub fn min_plus_power(&self, k: u64) -> Table {
        assert!(k >= 1, "min-plus power needs k >= 1");
        let mut result: Option<Table> = None;
        let mut base = self.clone();
        let mut k = k;
        loop {
            if k & 1 == 1 {
                result = Some(match result {
                    None => base.clone(),
                    Some(r) => r.min_plus(&base),
                });
            }
            k >>= 1;
            if k == 0 {
                break;
            }
            base = base.min_plus(&base);
        }
        result.expect("k >= 1")
    }
}

impl Index<(usize, usize)> for Table {
    type Output = f64;

    fn index(&self, (z, x): (usize, usize)) -> &f64 {
        &self.data[z * self.n + x]
    }
}

impl IndexMut<(usize, usize)> for Table {
    fn index_mut(&mut self, (z, x): (usize, usize)) -> &mut f64 {
        &mut self.data[z * self.n + x]
    }
}

/// A real-valued function on the states.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Potential(Vec<f64>);

impl Potential {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn constant(n: usize, value: f64) -> Self {
        Self(vec![value; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }

    pub fn all_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn shifted(&self, k: f64) -> Self {
        Self(self.0.iter().map(|v| v + k).collect())
    }

    pub fn map(&self, f: impl Fn(usize, f64) -> f64) -> Self {
        Self(self.0.iter().enumerate().map(|(i, &v)| f(i, v)).collect())
    }

    /// `‖self - other‖∞`.
    pub fn sup_dist(&self, other: &Potential) -> f64 {
        assert_eq!(self.len(), other.len());
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Largest amount by which `self` exceeds `other` anywhere (0 if `self <= other`).
    pub fn excess_over(&self, other: &Potential) -> f64 {
        assert_eq!(self.len(), other.len());
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| a - b)
            .fold(0.0, f64::max)
    }

    /// `self <= other + tol` entrywise.
    pub fn le_within(&self, other: &Potential, tol: f64) -> bool {
        self.excess_over(other) <= tol
    }
}

impl Index<usize> for Potential {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for Potential {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

impl From<Vec<f64>> for Potential {
    fn from(values: Vec<f64>) -> Self {
        Self(values)
    }
}
