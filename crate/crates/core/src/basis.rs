//! Orthonormal polynomial bases, multi-index truncation sets and design
//! matrices.
//!
//! Multi-indices are kept in graded lexicographic order: by total degree
//! first, then with larger leading entries first, so `(1, 0)` precedes
//! `(0, 1)`. Index 0 is always the zero multi-index.

use crate::error::{Error, Result};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// A univariate orthonormal polynomial family.
///
/// Implementations fill `out[n] = ψ_n(x)` for `n = 0..out.len()`.
pub trait OrthonormalFamily: Sync {
    fn name(&self) -> &'static str;
    fn eval_all(&self, x: f64, out: &mut [f64]);
}

/// Probabilists' Hermite polynomials normalised to unit variance under the
/// standard normal measure.
#[derive(Debug, Clone, Copy, Default)]
pub struct Hermite;

impl OrthonormalFamily for Hermite {
    fn name(&self) -> &'static str {
        "hermite"
    }

    fn eval_all(&self, x: f64, out: &mut [f64]) {
        // He_{n+1} = x He_n - n He_{n-1}, scaled by 1/sqrt(n!) at every step.
        if out.is_empty() {
            return;
        }
        out[0] = 1.0;
        if out.len() == 1 {
            return;
        }
        out[1] = x;
        for n in 1..out.len() - 1 {
            let nf = n as f64;
            out[n + 1] = (x * out[n] - nf.sqrt() * out[n - 1]) / (nf + 1.0).sqrt();
        }
    }
}

/// Orthonormal Hermite polynomial `ψ_n(x) = He_n(x)/√(n!)`.
pub fn hermite_orthonormal(n: usize, x: f64) -> f64 {
    let mut buf = vec![0.0; n + 1];
    Hermite.eval_all(x, &mut buf);
    buf[n]
}

/// Per-dimension polynomial degrees.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(alpha: Vec<u32>) -> Self {
        assert!(!alpha.is_empty(), "multi-index must have at least one entry");
        Self(alpha)
    }

    pub fn zero(dim: usize) -> Self {
        Self(vec![0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn total_degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn max_degree(&self) -> u32 {
        self.0.iter().copied().max().unwrap_or(0)
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&a| a == 0)
    }
}

impl std::ops::Index<usize> for MultiIndex {
    type Output = u32;
    fn index(&self, i: usize) -> &u32 {
        &self.0[i]
    }
}

/// Truncation rule selecting which multi-indices enter the expansion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Truncation {
    /// `|α| ≤ P`
    TotalDegree,
    /// `(Σ α_i^q)^{1/q} ≤ P` with `0 < q ≤ 1`
    Lq { q: f64 },
    /// `max α_i ≤ P`
    TensorProduct,
    /// `Π (α_i + 1) ≤ P + 1`
    HyperbolicCross,
}

impl Truncation {
    pub fn code(&self) -> &'static str {
        match self {
            Truncation::TotalDegree => "TD",
            Truncation::Lq { .. } => "LQ",
            Truncation::TensorProduct => "TP",
            Truncation::HyperbolicCross => "HC",
        }
    }

    pub fn q(&self) -> Option<f64> {
        match self {
            Truncation::Lq { q } => Some(*q),
            _ => None,
        }
    }

    /// Parses `TD`, `TP`, `HC` or `LQ` (case-insensitive); `q` is only read
    /// for `LQ` and defaults to 1.
    pub fn parse(code: &str, q: Option<f64>) -> Result<Self> {
        let t = match code.to_ascii_uppercase().as_str() {
            "TD" => Truncation::TotalDegree,
            "TP" => Truncation::TensorProduct,
            "HC" => Truncation::HyperbolicCross,
            "LQ" => Truncation::Lq { q: q.unwrap_or(1.0) },
            other => return Err(Error::Truncation(format!("unknown rule {other:?}"))),
        };
        t.check()?;
        Ok(t)
    }

    fn check(&self) -> Result<()> {
        if let Truncation::Lq { q } = *self {
            if !(q > 0.0 && q <= 1.0) {
                return Err(Error::Truncation(format!("q must lie in (0, 1], got {q}")));
            }
        }
        Ok(())
    }

    /// Largest total degree any admitted index can reach.
    fn degree_bound(&self, dim: usize, order: u32) -> u32 {
        match self {
            Truncation::TensorProduct => order * dim as u32,
            _ => order,
        }
    }
}

/// Enumerates compositions of `total` into `dim` parts with larger leading
/// entries first, keeping only prefixes accepted by `keep`.
fn compositions(
    dim: usize,
    total: u32,
    cap: u32,
    keep: &dyn Fn(&[u32]) -> bool,
    prefix: &mut Vec<u32>,
    out: &mut Vec<MultiIndex>,
) {
    let remaining_dims = dim - prefix.len();
    if remaining_dims == 1 {
        if total <= cap {
            prefix.push(total);
            if keep(prefix) {
                out.push(MultiIndex(prefix.clone()));
            }
            prefix.pop();
        }
        return;
    }
    for first in (0..=total.min(cap)).rev() {
        // the rest must absorb total - first with parts <= cap
        if (total - first) > cap * (remaining_dims as u32 - 1) {
            continue;
        }
        prefix.push(first);
        if keep(prefix) {
            compositions(dim, total - first, cap, keep, prefix, out);
        }
        prefix.pop();
    }
}

/// Ordered, rule-complete set of multi-indices.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisSpec {
    dim: usize,
    order: u32,
    truncation: Truncation,
    indices: Vec<MultiIndex>,
}

impl BasisSpec {
    pub fn new(dim: usize, order: u32, truncation: Truncation) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("basis dimension must be at least 1".into()));
        }
        truncation.check()?;
        let p = order as f64;
        // every admissible prefix test is monotone in the prefix, so it
        // doubles as a pruning rule
        let keep: Box<dyn Fn(&[u32]) -> bool> = match truncation {
            Truncation::TotalDegree | Truncation::TensorProduct => Box::new(|_: &[u32]| true),
            Truncation::Lq { q } => {
                let bound = p.powf(q) * (1.0 + 1e-12);
                Box::new(move |a: &[u32]| a.iter().map(|&x| (x as f64).powf(q)).sum::<f64>() <= bound)
            }
            Truncation::HyperbolicCross => {
                let bound = order as u64 + 1;
                Box::new(move |a: &[u32]| a.iter().map(|&x| x as u64 + 1).product::<u64>() <= bound)
            }
        };
        let cap = order;
        let mut indices = Vec::new();
        let mut prefix = Vec::with_capacity(dim);
        for total in 0..=truncation.degree_bound(dim, order) {
            compositions(dim, total, cap, keep.as_ref(), &mut prefix, &mut indices);
        }
        Ok(Self {
            dim,
            order,
            truncation,
            indices,
        })
    }

    /// Rebuilds a spec from stored indices, checking they match the rule.
    pub fn from_parts(dim: usize, order: u32, truncation: Truncation, indices: Vec<MultiIndex>) -> Result<Self> {
        let expected = Self::new(dim, order, truncation)?;
        if expected.indices != indices {
            return Err(Error::SpecMismatch(format!(
                "stored indices do not match {} truncation with K={dim}, P={order}",
                truncation.code()
            )));
        }
        Ok(expected)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn truncation(&self) -> Truncation {
        self.truncation
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    fn max_degree(&self) -> usize {
        self.indices.iter().map(|a| a.max_degree()).max().unwrap_or(0) as usize
    }

    /// Sparse view of each index: `(dimension, degree)` pairs with
    /// non-zero degree.
    fn sparse_terms(&self) -> Vec<Vec<(usize, usize)>> {
        self.indices
            .iter()
            .map(|a| {
                a.as_slice()
                    .iter()
                    .enumerate()
                    .filter(|(_, &d)| d > 0)
                    .map(|(k, &d)| (k, d as usize))
                    .collect()
            })
            .collect()
    }

    /// Evaluator that can be reused across many points.
    pub fn evaluator(&self) -> BasisEvaluator<'_> {
        BasisEvaluator {
            spec: self,
            terms: self.sparse_terms(),
            degrees: self.max_degree() + 1,
        }
    }
}

/// Cached per-spec data for evaluating basis functions at points.
pub struct BasisEvaluator<'a> {
    spec: &'a BasisSpec,
    terms: Vec<Vec<(usize, usize)>>,
    degrees: usize,
}

impl BasisEvaluator<'_> {
    fn univariate_table(&self, xi: &[f64], table: &mut Vec<f64>) {
        table.resize(self.spec.dim * self.degrees, 0.0);
        for (k, &x) in xi.iter().enumerate() {
            Hermite.eval_all(x, &mut table[k * self.degrees..(k + 1) * self.degrees]);
        }
    }

    /// Writes `Ψ_j(ξ)` for every basis term into `out`.
    pub fn eval_row(&self, xi: &[f64], out: &mut [f64], table: &mut Vec<f64>) {
        debug_assert_eq!(xi.len(), self.spec.dim);
        self.univariate_table(xi, table);
        for (o, term) in out.iter_mut().zip(&self.terms) {
            *o = term.iter().map(|&(k, d)| table[k * self.degrees + d]).product();
        }
    }

    /// `Σ_j c_j Ψ_j(ξ)`, skipping zero coefficients.
    pub fn eval_dot(&self, xi: &[f64], coeffs: &[f64], table: &mut Vec<f64>) -> f64 {
        debug_assert_eq!(coeffs.len(), self.terms.len());
        self.univariate_table(xi, table);
        let mut acc = 0.0;
        for (c, term) in coeffs.iter().zip(&self.terms) {
            if *c != 0.0 {
                let v: f64 = term.iter().map(|&(k, d)| table[k * self.degrees + d]).product();
                acc += c * v;
            }
        }
        acc
    }
}

/// Evaluated basis `Ψ(Ξ)` (N × N_K) together with its Gram matrix.
#[derive(Debug, Clone)]
pub struct DesignMatrix {
    values: DMatrix<f64>,
    gram: DMatrix<f64>,
}

impl DesignMatrix {
    /// Wraps an already evaluated matrix, e.g. a synthetic design.
    pub fn from_values(values: DMatrix<f64>) -> Result<Self> {
        for (idx, v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    row: idx % values.nrows(),
                    col: idx / values.nrows(),
                });
            }
        }
        let mut gram = values.tr_mul(&values);
        let n = gram.nrows();
        for j in 0..n {
            for i in (j + 1)..n {
                gram[(i, j)] = gram[(j, i)];
            }
        }
        Ok(Self { values, gram })
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    /// `Ψᵀ v`
    pub fn tr_mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.nrows());
        (0..self.ncols())
            .map(|j| {
                let col = self.values.column(j);
                col.iter().zip(v).map(|(a, b)| a * b).sum()
            })
            .collect()
    }

    /// `Ψ c`
    pub fn mul_vec(&self, c: &[f64]) -> Vec<f64> {
        assert_eq!(c.len(), self.ncols());
        let mut out = vec![0.0; self.nrows()];
        for (j, &cj) in c.iter().enumerate() {
            if cj != 0.0 {
                for (o, v) in out.iter_mut().zip(self.values.column(j).iter()) {
                    *o += cj * v;
                }
            }
        }
        out
    }
}

/// Evaluates every basis term at every row of `xi` (N × K).
pub fn evaluate_design(spec: &BasisSpec, xi: &DMatrix<f64>) -> Result<DesignMatrix> {
    if xi.ncols() != spec.dim() {
        return Err(Error::Dimension(format!(
            "inputs have {} columns but the basis has dimension {}",
            xi.ncols(),
            spec.dim()
        )));
    }
    for row in 0..xi.nrows() {
        for col in 0..xi.ncols() {
            if !xi[(row, col)].is_finite() {
                return Err(Error::NonFinite { row, col });
            }
        }
    }
    let n = xi.nrows();
    let nk = spec.len();
    let eval = spec.evaluator();
    let mut rows = vec![0.0; n * nk];
    rows.par_chunks_mut(nk.max(1)).enumerate().for_each_init(
        || (Vec::new(), vec![0.0; spec.dim()]),
        |(table, point), (r, out)| {
            for (k, p) in point.iter_mut().enumerate() {
                *p = xi[(r, k)];
            }
            eval.eval_row(point, out, table);
        },
    );
    DesignMatrix::from_values(DMatrix::from_row_slice(n, nk, &rows))
}

mod wire {
    use super::*;

    #[derive(Serialize, Deserialize)]
    pub struct BasisSpecWire {
        #[serde(rename = "K")]
        pub dim: usize,
        #[serde(rename = "P")]
        pub order: u32,
        pub rule: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pub q: Option<f64>,
        pub indices: Vec<MultiIndex>,
    }
}

impl Serialize for BasisSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        wire::BasisSpecWire {
            dim: self.dim,
            order: self.order,
            rule: self.truncation.code().to_string(),
            q: self.truncation.q(),
            indices: self.indices.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for BasisSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let w = wire::BasisSpecWire::deserialize(d)?;
        let truncation = Truncation::parse(&w.rule, w.q).map_err(serde::de::Error::custom)?;
        BasisSpec::from_parts(w.dim, w.order, truncation, w.indices).map_err(serde::de::Error::custom)
    }
}
