//! Finite bitopological models and Lipschitz kernels.
//!
//! A [`BitopModel`] is a finite point set carrying two metrics: a coarse
//! metric `rho` standing in for the compact topology, and a finer metric `d`
//! with respect to which Lipschitz constants are measured. Lower
//! semicontinuity of `d` has no finite counterpart; the model enforces
//! `d >= rho` entrywise together with a resolution `delta`, the smallest
//! coarse neighbourhood radius the model resolves.

mod generate;

use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::{self, Exec};
use crate::AXIOM_TOL;

pub(crate) use generate::lq_samples;
pub use generate::{make_model, ModelSpec, FAN_DEFAULT_DELTA};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("distance matrix is not square: row {row} has {len} entries, expected {n}")]
    NotSquare { row: usize, len: usize, n: usize },
    #[error("non-finite distance at ({i}, {j})")]
    NonFinite { i: usize, j: usize },
    #[error("label count {labels} does not match matrix size {n}")]
    LabelMismatch { labels: usize, n: usize },
    #[error("coarse and fine metrics have different point sets")]
    PointSetMismatch,
    #[error("empty point subset")]
    EmptySubset,
    #[error("point index {0} out of range")]
    IndexOutOfRange(usize),
    #[error("point {0} listed twice")]
    DuplicatePoint(usize),
    #[error("field has {got} values, model has {expected} points")]
    LengthMismatch { got: usize, expected: usize },
    #[error("non-finite field value at point {0}")]
    NonFiniteValue(usize),
    #[error("data is not {lip}-Lipschitz: pair ({i}, {j}) has difference quotient {ratio}")]
    NotLipschitz { i: usize, j: usize, ratio: f64, lip: f64 },
    #[error("values [{min}, {max}] are outside the range [{a}, {b}]")]
    RangeViolation { min: f64, max: f64, a: f64, b: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("model invariant violated: {0}")]
    InvariantViolated(String),
}

/// A finite metric stored as a dense row-major matrix.
///
/// The matrix and coordinates sit behind `Arc`, so cloning is cheap and two
/// metrics of a model may share storage.
#[derive(Clone, Debug)]
pub struct FiniteMetric {
    ids: Arc<Vec<String>>,
    dist: Arc<Vec<f64>>,
    coords: Option<Arc<Vec<Vec<f64>>>>,
}

impl PartialEq for FiniteMetric {
    fn eq(&self, other: &Self) -> bool {
        self.ids == other.ids && self.dist == other.dist && self.coords == other.coords
    }
}

impl FiniteMetric {
    /// Builds a metric from an explicit matrix. Only shape and finiteness are
    /// checked here; the metric axioms are reported by [`validate_metric`].
    pub fn from_matrix(ids: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self, MetricError> {
        let n = rows.len();
        if ids.len() != n {
            return Err(MetricError::LabelMismatch { labels: ids.len(), n });
        }
        let mut dist = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(MetricError::NotSquare { row: i, len: row.len(), n });
            }
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(MetricError::NonFinite { i, j });
                }
                dist.push(v);
            }
        }
        Ok(FiniteMetric { ids: Arc::new(ids), dist: Arc::new(dist), coords: None })
    }

    /// Builds a symmetric metric with zero diagonal from a distance function
    /// evaluated on `i < j`.
    pub fn from_fn<F>(ids: Vec<String>, f: F) -> Self
    where
        F: Fn(usize, usize) -> f64,
    {
        let n = ids.len();
        let mut dist = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let v = f(i, j);
                dist[i * n + j] = v;
                dist[j * n + i] = v;
            }
        }
        FiniteMetric { ids: Arc::new(ids), dist: Arc::new(dist), coords: None }
    }

    pub fn with_coords(mut self, coords: Vec<Vec<f64>>) -> Self {
        self.coords = Some(Arc::new(coords));
        self
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.dist[i * self.len() + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.len();
        &self.dist[i * n..(i + 1) * n]
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn coords(&self) -> Option<&[Vec<f64>]> {
        self.coords.as_deref().map(|c| c.as_slice())
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.row(i).to_vec()).collect()
    }

    /// Largest distance.
    pub fn diameter(&self) -> f64 {
        self.dist.iter().copied().fold(0.0, f64::max)
    }

    /// Smallest off-diagonal distance (`f64::INFINITY` for fewer than two points).
    pub fn min_separation(&self) -> f64 {
        let n = self.len();
        let mut best = f64::INFINITY;
        for i in 0..n {
            for j in (i + 1)..n {
                best = best.min(self.get(i, j));
            }
        }
        best
    }

    /// Distance from point `x` to the nearest point of `subset`.
    pub fn dist_to_set(&self, x: usize, subset: &[usize]) -> f64 {
        let row = self.row(x);
        subset.iter().map(|&h| row[h]).fold(f64::INFINITY, f64::min)
    }

    /// Largest pairwise distance inside `subset` (0 for fewer than two points).
    pub fn subset_diameter(&self, subset: &[usize]) -> f64 {
        let mut best: f64 = 0.0;
        for (a, &i) in subset.iter().enumerate() {
            let row = self.row(i);
            for &j in &subset[a + 1..] {
                best = best.max(row[j]);
            }
        }
        best
    }

    /// Smallest distance between two point sets.
    pub fn set_distance(&self, a: &[usize], b: &[usize]) -> f64 {
        a.iter().map(|&i| self.dist_to_set(i, b)).fold(f64::INFINITY, f64::min)
    }
}

/// One failed metric axiom.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    NonZeroDiagonal {
        i: usize,
        value: f64,
    },
    Negative {
        i: usize,
        j: usize,
        value: f64,
    },
    Asymmetric {
        i: usize,
        j: usize,
        forward: f64,
        backward: f64,
    },
    NotSeparated {
        i: usize,
        j: usize,
    },
    /// `d(i, k) > d(i, j) + d(j, k)`; `j` is the intermediate point.
    Triangle {
        i: usize,
        j: usize,
        k: usize,
        excess: f64,
    },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks every metric axiom, listing each violation with its offending
/// indices. Triangle checks are `O(n^3)`.
pub fn validate_metric(m: &FiniteMetric) -> ValidationReport {
    validate_metric_with(m, Exec::default())
}

pub fn validate_metric_with(m: &FiniteMetric, exec: Exec) -> ValidationReport {
    let n = m.len();
    let mut violations = Vec::new();
    for i in 0..n {
        let v = m.get(i, i);
        if v != 0.0 {
            violations.push(Violation::NonZeroDiagonal { i, value: v });
        }
    }
    for i in 0..n {
        for j in 0..n {
            let v = m.get(i, j);
            if v < 0.0 {
                violations.push(Violation::Negative { i, j, value: v });
            }
            if i < j {
                let w = m.get(j, i);
                if (v - w).abs() > AXIOM_TOL {
                    violations.push(Violation::Asymmetric { i, j, forward: v, backward: w });
                }
                if v <= 0.0 && w <= 0.0 {
                    violations.push(Violation::NotSeparated { i, j });
                }
            }
        }
    }
    let triangles = exec::map_indices(exec, n, |i| {
        let mut out = Vec::new();
        for k in (i + 1)..n {
            let direct = m.get(i, k);
            for j in 0..n {
                if j == i || j == k {
                    continue;
                }
                let excess = direct - (m.get(i, j) + m.get(j, k));
                if excess > AXIOM_TOL {
                    out.push(Violation::Triangle { i, j, k, excess });
                }
            }
        }
        out
    });
    violations.extend(triangles.into_iter().flatten());
    ValidationReport { violations }
}

/// A finite stand-in for a compact space with a finer metric.
#[derive(Clone, Debug, PartialEq)]
pub struct BitopModel {
    rho: FiniteMetric,
    d: FiniteMetric,
    delta: f64,
    spec: Option<ModelSpec>,
}

impl BitopModel {
    /// Checks the pairing invariants: shared point set, `d >= rho`, `delta > 0`.
    pub fn new(rho: FiniteMetric, d: FiniteMetric, delta: f64) -> Result<Self, MetricError> {
        if rho.len() != d.len() || rho.ids() != d.ids() {
            return Err(MetricError::PointSetMismatch);
        }
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(MetricError::InvalidParameter(format!("delta must be positive, got {delta}")));
        }
        let n = rho.len();
        for i in 0..n {
            for j in 0..n {
                if d.get(i, j) + AXIOM_TOL < rho.get(i, j) {
                    return Err(MetricError::InvariantViolated(format!(
                        "d({i},{j}) = {} < rho({i},{j}) = {}",
                        d.get(i, j),
                        rho.get(i, j)
                    )));
                }
            }
        }
        Ok(BitopModel { rho, d, delta, spec: None })
    }

    pub(crate) fn with_spec(mut self, spec: ModelSpec) -> Self {
        self.spec = Some(spec);
        self
    }

    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }

    pub fn rho(&self) -> &FiniteMetric {
        &self.rho
    }

    pub fn d(&self) -> &FiniteMetric {
        &self.d
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn spec(&self) -> Option<&ModelSpec> {
        self.spec.as_ref()
    }

    pub fn ids(&self) -> &[String] {
        self.d.ids()
    }

    pub fn coords(&self) -> Option<&[Vec<f64>]> {
        self.d.coords()
    }

    pub fn metric(&self, choice: MetricChoice) -> &FiniteMetric {
        match choice {
            MetricChoice::Fine => &self.d,
            MetricChoice::Coarse => &self.rho,
        }
    }

    /// Restriction of the model to `subset` (in the given order).
    pub fn restrict(&self, subset: &[usize]) -> Result<BitopModel, MetricError> {
        check_subset(self.len(), subset)?;
        let ids: Vec<String> = subset.iter().map(|&i| self.ids()[i].clone()).collect();
        let sub = |m: &FiniteMetric| {
            let mut out = FiniteMetric::from_fn(ids.clone(), |a, b| m.get(subset[a], subset[b]));
            if let Some(c) = m.coords() {
                out = out.with_coords(subset.iter().map(|&i| c[i].clone()).collect());
            }
            out
        };
        BitopModel::new(sub(&self.rho), sub(&self.d), self.delta)
    }

    pub fn to_document(&self) -> ModelDocument {
        ModelDocument {
            points: self.ids().to_vec(),
            rho_matrix: self.rho.to_rows(),
            d_matrix: self.d.to_rows(),
            delta: self.delta,
            coords: self.coords().map(|c| c.to_vec()),
            spec: self.spec.clone(),
        }
    }

    pub fn from_document(doc: ModelDocument) -> Result<Self, MetricError> {
        let mut rho = FiniteMetric::from_matrix(doc.points.clone(), doc.rho_matrix)?;
        let mut d = FiniteMetric::from_matrix(doc.points, doc.d_matrix)?;
        if let Some(c) = doc.coords {
            if c.len() != d.len() {
                return Err(MetricError::LengthMismatch { got: c.len(), expected: d.len() });
            }
            rho = rho.with_coords(c.clone());
            d = d.with_coords(c);
        }
        let mut model = BitopModel::new(rho, d, doc.delta)?;
        model.spec = doc.spec;
        Ok(model)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_document()).expect("model document serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, MetricError> {
        let doc: ModelDocument =
            serde_json::from_str(s).map_err(|e| MetricError::InvalidParameter(format!("model JSON: {e}")))?;
        BitopModel::from_document(doc)
    }
}

/// JSON form of a model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub points: Vec<String>,
    pub rho_matrix: Vec<Vec<f64>>,
    pub d_matrix: Vec<Vec<f64>>,
    pub delta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coords: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<ModelSpec>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricChoice {
    Fine,
    Coarse,
}

/// A real value per model point.
#[derive(Clone, Debug)]
pub struct ScalarField {
    model: BitopModel,
    values: Vec<f64>,
    lip_d: OnceLock<f64>,
}

impl ScalarField {
    pub fn new(model: &BitopModel, values: Vec<f64>) -> Result<Self, MetricError> {
        if values.len() != model.len() {
            return Err(MetricError::LengthMismatch { got: values.len(), expected: model.len() });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(MetricError::NonFiniteValue(i));
        }
        Ok(ScalarField { model: model.clone(), values, lip_d: OnceLock::new() })
    }

    pub fn from_fn<F: Fn(usize) -> f64>(model: &BitopModel, f: F) -> Result<Self, MetricError> {
        ScalarField::new(model, (0..model.len()).map(f).collect())
    }

    pub fn model(&self) -> &BitopModel {
        &self.model
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Cached Lipschitz constant with respect to the fine metric.
    pub fn lip_d(&self) -> f64 {
        *self.lip_d.get_or_init(|| pairwise_lip(self.model.d(), &self.values, Exec::default()).value)
    }

    /// Linear combination `sum_k coeffs[k] * fields[k]`, summed in index order.
    pub fn combine(model: &BitopModel, fields: &[ScalarField], coeffs: &[f64]) -> Result<Self, MetricError> {
        if fields.len() != coeffs.len() {
            return Err(MetricError::LengthMismatch { got: coeffs.len(), expected: fields.len() });
        }
        let mut values = vec![0.0; model.len()];
        for (f, &a) in fields.iter().zip(coeffs) {
            if f.values.len() != values.len() {
                return Err(MetricError::LengthMismatch { got: f.values.len(), expected: values.len() });
            }
            for (v, &x) in values.iter_mut().zip(&f.values) {
                *v += a * x;
            }
        }
        ScalarField::new(model, values)
    }
}

/// A Lipschitz constant together with the first pair attaining it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LipWitness {
    pub value: f64,
    pub pair: Option<(usize, usize)>,
}

/// Exact maximum of `|f(i) - f(j)| / m(i, j)` over unordered pairs.
///
/// Ties resolve to the first pair in row-major order. Fewer than two points
/// give 0.
pub fn pairwise_lip(m: &FiniteMetric, values: &[f64], exec: Exec) -> LipWitness {
    let n = m.len();
    let best = exec::argmax_rows(exec, n, |i| {
        let row = m.row(i);
        let fi = values[i];
        let mut best: Option<(f64, usize)> = None;
        for j in (i + 1)..n {
            let r = (fi - values[j]).abs() / row[j];
            if best.is_none_or(|(b, _)| r > b) {
                best = Some((r, j));
            }
        }
        best
    });
    match best {
        Some((i, v, j)) => LipWitness { value: v, pair: Some((i, j)) },
        None => LipWitness { value: 0.0, pair: None },
    }
}

/// Lipschitz constant of `f`; the fine-metric value is cached on the field.
pub fn lip_constant(f: &ScalarField, choice: MetricChoice) -> f64 {
    lip_constant_with(f, choice, Exec::default())
}

pub fn lip_constant_with(f: &ScalarField, choice: MetricChoice, exec: Exec) -> f64 {
    match choice {
        MetricChoice::Fine => *f.lip_d.get_or_init(|| pairwise_lip(f.model.d(), &f.values, exec).value),
        MetricChoice::Coarse => pairwise_lip(f.model.rho(), &f.values, exec).value,
    }
}

fn check_subset(n: usize, subset: &[usize]) -> Result<(), MetricError> {
    if subset.is_empty() {
        return Err(MetricError::EmptySubset);
    }
    let mut seen = vec![false; n];
    for &h in subset {
        if h >= n {
            return Err(MetricError::IndexOutOfRange(h));
        }
        if seen[h] {
            return Err(MetricError::DuplicatePoint(h));
        }
        seen[h] = true;
    }
    Ok(())
}

/// Extends `values` (given on `subset`) to the whole model with the McShane
/// formula `min_h (f(h) + lip * d(x, h))`, clamped to `range`.
///
/// The result agrees bit-for-bit with the data on `subset`, stays inside
/// `range`, and is `lip`-Lipschitz for `d`.
pub fn mcshane_extend(
    model: &BitopModel,
    subset: &[usize],
    values: &[f64],
    lip: f64,
    range: (f64, f64),
) -> Result<ScalarField, MetricError> {
    mcshane_extend_with(model, subset, values, lip, range, Exec::default())
}

pub fn mcshane_extend_with(
    model: &BitopModel,
    subset: &[usize],
    values: &[f64],
    lip: f64,
    range: (f64, f64),
    exec: Exec,
) -> Result<ScalarField, MetricError> {
    check_subset(model.len(), subset)?;
    if values.len() != subset.len() {
        return Err(MetricError::LengthMismatch { got: values.len(), expected: subset.len() });
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(MetricError::NonFiniteValue(subset[i]));
    }
    if !(lip >= 0.0 && lip.is_finite()) {
        return Err(MetricError::InvalidParameter(format!("Lipschitz bound must be finite and >= 0, got {lip}")));
    }
    let (a, b) = range;
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(a <= min && max <= b) {
        return Err(MetricError::RangeViolation { min, max, a, b });
    }
    let d = model.d();
    for (p, &h) in subset.iter().enumerate() {
        for (q, &k) in subset.iter().enumerate().skip(p + 1) {
            let diff = (values[p] - values[q]).abs();
            let allowed = lip * d.get(h, k);
            if diff > allowed + AXIOM_TOL * (1.0 + allowed) {
                return Err(MetricError::NotLipschitz { i: h, j: k, ratio: diff / d.get(h, k), lip });
            }
        }
    }
    let mut on_subset = vec![None; model.len()];
    for (p, &h) in subset.iter().enumerate() {
        on_subset[h] = Some(values[p]);
    }
    let out = exec::map_indices(exec, model.len(), |x| {
        if let Some(v) = on_subset[x] {
            return v;
        }
        let row = d.row(x);
        let inf = subset.iter().zip(values).map(|(&h, &v)| v + lip * row[h]).fold(f64::INFINITY, f64::min);
        inf.clamp(a, b)
    });
    ScalarField::new(model, out)
}

/// `{x : d(H, x) <= r}` as sorted point indices.
pub fn closed_ball(model: &BitopModel, subset: &[usize], r: f64) -> Result<Vec<usize>, MetricError> {
    check_subset(model.len(), subset)?;
    if !(r >= 0.0) {
        return Err(MetricError::InvalidParameter(format!("radius must be >= 0, got {r}")));
    }
    let d = model.d();
    Ok((0..model.len()).filter(|&x| d.dist_to_set(x, subset) <= r).collect())
}

/// Points of `within` inside the coarse ball of radius `r` around `x`.
///
/// Membership tolerates `AXIOM_TOL` so radii computed from grid spacings
/// resolve the neighbours they were derived from.
pub fn coarse_ball(model: &BitopModel, within: &[usize], x: usize, r: f64) -> Vec<usize> {
    let row = model.rho().row(x);
    within.iter().copied().filter(|&y| row[y] <= r + AXIOM_TOL).collect()
}
