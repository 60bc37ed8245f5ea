//! Cost models `ℓ(z, x, u, v)` on a finite state space.
//!
//! A model is a base cost `ℓ₀(z, x) = ℓ(z, x, 0, 0)` plus a coupling that
//! makes the cost depend on the potential values `u` (at the source `z`)
//! and `v` (at the target `x`):
//!
//! * affine: `ℓ = ℓ₀ − A·u − B·v`
//! * saturating: `ℓ = ℓ₀ − A·σ(u) − B·σ(v)` with `σ(t) = s·tanh(t/s)`
//!
//! `A, B ≥ 0` makes `ℓ` non-increasing in both slots, with Lipschitz
//! constants `κ_u = max A`, `κ_v = max B` and derivatives at the origin
//! `∂_uℓ = −A`, `∂_vℓ = −B`.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::classical::critical_constant;
use crate::error::{Error, Result};
use crate::mather::PairMeasure;
use crate::table::Table;

/// Strictness margin for (l4): `∫Λ dμ < −TOL_L4` at every Mather vertex.
pub const TOL_L4: f64 = 1e-9;

/// Fraction of `1 / max(κ_u, κ_v)` used as the default `lambda_max`.
const LAMBDA_MAX_FRACTION: f64 = 0.9;

#[derive(Clone, Debug, PartialEq)]
pub struct FiniteSpace {
    labels: Vec<String>,
}

impl FiniteSpace {
    pub fn new(labels: Vec<String>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::InvalidModel("state space must be non-empty".into()));
        }
        let mut seen = HashSet::new();
        for l in &labels {
            if !seen.insert(l.as_str()) {
                return Err(Error::InvalidModel(format!("duplicate state label {l:?}")));
            }
        }
        Ok(Self { labels })
    }

    /// States labelled `a, b, c, …` (then `s26, s27, …`).
    pub fn alphabetic(n: usize) -> Result<Self> {
        Self::new(
            (0..n)
                .map(|i| {
                    if i < 26 {
                        ((b'a' + i as u8) as char).to_string()
                    } else {
                        format!("s{i}")
                    }
                })
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

/// `ℓ₀`, finite everywhere.
#[derive(Clone, Debug, PartialEq)]
pub struct BaseCost(Table);

impl BaseCost {
    pub fn new(table: Table) -> Result<Self> {
        if table.dim() == 0 {
            return Err(Error::InvalidModel("base cost must be non-empty".into()));
        }
        for z in 0..table.dim() {
            for x in 0..table.dim() {
                if !table.get(z, x).is_finite() {
                    return Err(Error::InvalidModel(format!("l0[{z}][{x}] is not finite")));
                }
            }
        }
        Ok(Self(table))
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        Self::new(Table::from_rows(rows)?)
    }

    pub fn table(&self) -> &Table {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.dim()
    }

    pub fn is_empty(&self) -> bool {
        self.0.dim() == 0
    }

    #[inline]
    pub fn get(&self, z: usize, x: usize) -> f64 {
        self.0.get(z, x)
    }

    pub fn shifted(&self, k: f64) -> Self {
        Self(self.0.map(|v| v + k))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CouplingVariant {
    Affine,
    Saturating { scale: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Coupling {
    variant: CouplingVariant,
    a: Table,
    b: Table,
}

impl Coupling {
    pub fn new(variant: CouplingVariant, a: Table, b: Table) -> Result<Self> {
        if a.dim() != b.dim() {
            return Err(Error::Dimension {
                expected: a.dim(),
                found: b.dim(),
            });
        }
        if let CouplingVariant::Saturating { scale } = variant {
            if !(scale.is_finite() && scale > 0.0) {
                return Err(Error::InvalidModel(format!(
                    "saturating scale must be positive, got {scale}"
                )));
            }
        }
        for (name, t) in [("A", &a), ("B", &b)] {
            for z in 0..t.dim() {
                for x in 0..t.dim() {
                    let w = t.get(z, x);
                    if !w.is_finite() || w < 0.0 {
                        return Err(Error::InvalidModel(format!(
                            "coupling {name}[{z}][{x}] = {w} must be finite and >= 0"
                        )));
                    }
                }
            }
        }
        Ok(Self { variant, a, b })
    }

    pub fn affine(a: Table, b: Table) -> Result<Self> {
        Self::new(CouplingVariant::Affine, a, b)
    }

    pub fn saturating(a: Table, b: Table, scale: f64) -> Result<Self> {
        Self::new(CouplingVariant::Saturating { scale }, a, b)
    }

    pub fn zero(n: usize) -> Self {
        Self {
            variant: CouplingVariant::Affine,
            a: Table::zeros(n),
            b: Table::zeros(n),
        }
    }

    /// `A(z, x) = alpha[z]`, `B(z, x) = beta[x]`.
    pub fn rate_tables(alpha: &[f64], beta: &[f64]) -> Result<(Table, Table)> {
        if alpha.len() != beta.len() {
            return Err(Error::Dimension {
                expected: alpha.len(),
                found: beta.len(),
            });
        }
        let n = alpha.len();
        Ok((
            Table::from_fn(n, |z, _| alpha[z]),
            Table::from_fn(n, |_, x| beta[x]),
        ))
    }

    pub fn variant(&self) -> CouplingVariant {
        self.variant
    }

    pub fn a(&self) -> &Table {
        &self.a
    }

    pub fn b(&self) -> &Table {
        &self.b
    }

    #[inline]
    fn sigma(&self, t: f64) -> f64 {
        match self.variant {
            CouplingVariant::Affine => t,
            CouplingVariant::Saturating { scale } => scale * (t / scale).tanh(),
        }
    }

    #[inline]
    fn sigma_prime(&self, t: f64) -> f64 {
        match self.variant {
            CouplingVariant::Affine => 1.0,
            CouplingVariant::Saturating { scale } => {
                let th = (t / scale).tanh();
                1.0 - th * th
            }
        }
    }
}

/// Result of checking hypotheses (l1)–(l4).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AssumptionReport {
    pub kappa_u: f64,
    pub kappa_v: f64,
    pub l2_ok: bool,
    /// `∫Λ dμ` at each Mather vertex, `Λ = ∂_uℓ + ∂_vℓ` at the origin.
    pub l4_values: Vec<f64>,
    pub l4_ok: bool,
    pub messages: Vec<String>,
}

impl AssumptionReport {
    /// Index of the first vertex where (l4) fails.
    pub fn first_l4_failure(&self) -> Option<usize> {
        self.l4_values.iter().position(|&v| v >= -TOL_L4)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CostModel {
    space: FiniteSpace,
    base: BaseCost,
    coupling: Coupling,
    lambda_max: f64,
}

impl CostModel {
    /// Builds a model with the default `lambda_max = min(0.9 / max(κ_u, κ_v), 1)`.
    pub fn new(space: FiniteSpace, base: BaseCost, coupling: Coupling) -> Result<Self> {
        let n = space.len();
        if base.len() != n {
            return Err(Error::Dimension {
                expected: n,
                found: base.len(),
            });
        }
        if coupling.a.dim() != n {
            return Err(Error::Dimension {
                expected: n,
                found: coupling.a.dim(),
            });
        }
        let kappa = coupling.a.max().max(coupling.b.max());
        let lambda_max = if kappa > 0.0 {
            (LAMBDA_MAX_FRACTION / kappa.max(1e-12)).min(1.0)
        } else {
            1.0
        };
        Ok(Self {
            space,
            base,
            coupling,
            lambda_max,
        })
    }

    /// Model with alphabetic labels.
    pub fn from_parts(base: BaseCost, coupling: Coupling) -> Result<Self> {
        Self::new(FiniteSpace::alphabetic(base.len())?, base, coupling)
    }

    pub fn with_lambda_max(mut self, lambda_max: f64) -> Result<Self> {
        let kappa = self.kappa_u().max(self.kappa_v());
        if !(lambda_max > 0.0 && lambda_max * kappa < 1.0) {
            return Err(Error::InvalidModel(format!(
                "lambda_max {lambda_max} must be positive with lambda_max * max(kappa) < 1"
            )));
        }
        self.lambda_max = lambda_max;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.space.len()
    }

    pub fn is_empty(&self) -> bool {
        self.space.is_empty()
    }

    pub fn space(&self) -> &FiniteSpace {
        &self.space
    }

    pub fn base(&self) -> &BaseCost {
        &self.base
    }

    pub fn coupling(&self) -> &Coupling {
        &self.coupling
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    pub fn kappa_u(&self) -> f64 {
        self.coupling.a.max()
    }

    pub fn kappa_v(&self) -> f64 {
        self.coupling.b.max()
    }

    /// `ℓ(z, x, u, v)`.
    #[inline]
    pub fn eval_cost(&self, z: usize, x: usize, u: f64, v: f64) -> f64 {
        let c = &self.coupling;
        self.base.get(z, x) - c.a.get(z, x) * c.sigma(u) - c.b.get(z, x) * c.sigma(v)
    }

    /// `∂_uℓ(z, x, u, v)`.
    #[inline]
    pub fn partial_u(&self, z: usize, x: usize, u: f64) -> f64 {
        -self.coupling.a.get(z, x) * self.coupling.sigma_prime(u)
    }

    /// `∂_vℓ(z, x, u, v)`.
    #[inline]
    pub fn partial_v(&self, z: usize, x: usize, v: f64) -> f64 {
        -self.coupling.b.get(z, x) * self.coupling.sigma_prime(v)
    }

    /// The integrand of the discounted operator, `u + ℓ(z, x, λu, λv)`.
    ///
    /// The affine branch is grouped as `(1 − λA)u + ℓ₀ − B·λv` so that with
    /// `B = 0` it is bit-identical to the classical operator applied to
    /// `(1 − λA)u`.
    #[inline]
    pub fn discounted_integrand(&self, z: usize, x: usize, u: f64, v: f64, lambda: f64) -> f64 {
        let c = &self.coupling;
        match c.variant {
            CouplingVariant::Affine => {
                (1.0 - lambda * c.a.get(z, x)) * u + self.base.get(z, x)
                    - c.b.get(z, x) * (lambda * v)
            }
            CouplingVariant::Saturating { .. } => u + self.eval_cost(z, x, lambda * u, lambda * v),
        }
    }

    /// `(∂_uℓ(·,·,0,0), ∂_vℓ(·,·,0,0)) = (−A, −B)`.
    pub fn derivative_at_zero(&self) -> (Table, Table) {
        (
            self.coupling.a.map(|w| if w == 0.0 { 0.0 } else { -w }),
            self.coupling.b.map(|w| if w == 0.0 { 0.0 } else { -w }),
        )
    }

    /// `Λ = ∂_uℓ + ∂_vℓ` at the origin.
    pub fn lambda_density(&self) -> Table {
        let (du, dv) = self.derivative_at_zero();
        Table::from_fn(self.len(), |z, x| du.get(z, x) + dv.get(z, x))
    }

    /// Modulus of continuity for the first-order remainder at the origin.
    ///
    /// Affine couplings have no remainder. For the saturating family,
    /// `|σ(t) − t| ≤ t²/(2s)`, which gives `η(t) = 2(κ_u + κ_v)·t/s`.
    pub fn eta(&self, t: f64) -> f64 {
        match self.coupling.variant {
            CouplingVariant::Affine => 0.0,
            CouplingVariant::Saturating { scale } => {
                2.0 * (self.kappa_u() + self.kappa_v()) * t / scale
            }
        }
    }

    /// Checks (l1)–(l4). `vertices` must be the Mather polytope vertices of `ℓ₀`.
    pub fn check_assumptions(&self, vertices: &[PairMeasure]) -> Result<AssumptionReport> {
        if vertices.is_empty() {
            return Err(Error::EmptyVertexList);
        }
        let kappa_u = self.kappa_u();
        let kappa_v = self.kappa_v();
        let l2_ok = self.coupling.a.min() >= 0.0 && self.coupling.b.min() >= 0.0;
        let lam = self.lambda_density();
        let mut messages = Vec::new();
        if !l2_ok {
            messages.push("(l2) fails: negative coupling weight".to_string());
        }
        let mut l4_values = Vec::with_capacity(vertices.len());
        for (i, mu) in vertices.iter().enumerate() {
            if mu.dim() != self.len() {
                return Err(Error::Dimension {
                    expected: self.len(),
                    found: mu.dim(),
                });
            }
            let value = mu.integrate(&lam);
            if value >= -TOL_L4 {
                messages.push(format!(
                    "(l4) fails at vertex {i} {}: integral of Lambda = {value}",
                    mu.describe(&self.space)
                ));
            }
            l4_values.push(value);
        }
        let l4_ok = l4_values.iter().all(|&v| v < -TOL_L4);
        Ok(AssumptionReport {
            kappa_u,
            kappa_v,
            l2_ok,
            l4_values,
            l4_ok,
            messages,
        })
    }

    /// Returns the model with base cost `ℓ₀ + c₀`, whose critical constant is 0.
    pub fn normalize_critical(&self, c0: f64) -> CostModel {
        if c0 == 0.0 {
            return self.clone();
        }
        let normalized = CostModel {
            space: self.space.clone(),
            base: self.base.shifted(c0),
            coupling: self.coupling.clone(),
            lambda_max: self.lambda_max,
        };
        let residual = critical_constant(&normalized.base);
        debug_assert!(
            residual.abs() <= 1e-9 * (1.0 + c0.abs()),
            "normalization left critical constant {residual}"
        );
        normalized
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(s)?;
        file.into_model()
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&ModelFile::from_model(self)).expect("model serializes")
    }
}

/// On-disk model schema.
///
/// `coupling` either gives full `A`/`B` tables or per-state `alpha`/`beta`
/// vectors, read as `A(z, x) = alpha[z]` and `B(z, x) = beta[x]`. Missing
/// entries mean zero coupling.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub labels: Vec<String>,
    pub l0: Vec<Vec<f64>>,
    #[serde(default)]
    pub coupling: Option<CouplingFile>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingFile {
    pub variant: VariantName,
    #[serde(rename = "A", default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<Vec<f64>>>,
    #[serde(rename = "B", default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariantName {
    Affine,
    Saturating,
}

fn square_table(name: &str, rows: &[Vec<f64>], n: usize) -> Result<Table> {
    if rows.len() != n {
        return Err(Error::InvalidModel(format!(
            "{name} has {} rows, expected {n}",
            rows.len()
        )));
    }
    for (i, r) in rows.iter().enumerate() {
        if r.len() != n {
            return Err(Error::InvalidModel(format!(
                "{name} row {i} has {} entries, expected {n}",
                r.len()
            )));
        }
    }
    Table::from_rows(rows)
}

fn weight_table(
    name: &str,
    table: &Option<Vec<Vec<f64>>>,
    vector: &Option<Vec<f64>>,
    n: usize,
    by_source: bool,
) -> Result<Table> {
    match (table, vector) {
        (Some(_), Some(_)) => Err(Error::InvalidModel(format!(
            "coupling gives both a {name} table and its rate vector"
        ))),
        (Some(rows), None) => square_table(name, rows, n),
        (None, Some(v)) => {
            if v.len() != n {
                return Err(Error::InvalidModel(format!(
                    "{name} rate vector has {} entries, expected {n}",
                    v.len()
                )));
            }
            Ok(if by_source {
                Table::from_fn(n, |z, _| v[z])
            } else {
                Table::from_fn(n, |_, x| v[x])
            })
        }
        (None, None) => Ok(Table::zeros(n)),
    }
}

impl ModelFile {
    pub fn into_model(self) -> Result<CostModel> {
        let space = FiniteSpace::new(self.labels)?;
        let n = space.len();
        let base = BaseCost::new(square_table("l0", &self.l0, n)?)?;
        let coupling = match self.coupling {
            None => Coupling::zero(n),
            Some(c) => {
                let a = weight_table("A", &c.a, &c.alpha, n, true)?;
                let b = weight_table("B", &c.b, &c.beta, n, false)?;
                match c.variant {
                    VariantName::Affine => {
                        if c.scale.is_some() {
                            return Err(Error::InvalidModel(
                                "scale only applies to the saturating variant".into(),
                            ));
                        }
                        Coupling::affine(a, b)?
                    }
                    VariantName::Saturating => {
                        let scale = c.scale.ok_or_else(|| {
                            Error::InvalidModel("saturating coupling needs a scale".into())
                        })?;
                        Coupling::saturating(a, b, scale)?
                    }
                }
            }
        };
        CostModel::new(space, base, coupling)
    }

    pub fn from_model(model: &CostModel) -> Self {
        let (variant, scale) = match model.coupling.variant {
            CouplingVariant::Affine => (VariantName::Affine, None),
            CouplingVariant::Saturating { scale } => (VariantName::Saturating, Some(scale)),
        };
        ModelFile {
            labels: model.space.labels.clone(),
            l0: model.base.table().to_rows(),
            coupling: Some(CouplingFile {
                variant,
                a: Some(model.coupling.a.to_rows()),
                b: Some(model.coupling.b.to_rows()),
                alpha: None,
                beta: None,
                scale,
            }),
        }
    }
}
