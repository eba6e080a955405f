//! Szlenk-type set derivation on finite models.
//!
//! A point survives one derivation step when every resolved coarse
//! neighbourhood of it meets the current set in a piece of fine diameter at
//! least `eps`. On a finite model the coarse neighbourhoods are the `rho`
//! balls of radius `delta`, so only that single ball has to be checked.

mod dyadic;
mod quotient;
mod scaling;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::{self, Exec};
use crate::metric::{coarse_ball, BitopModel, MetricError};
use crate::AXIOM_TOL;

pub use dyadic::{build_dyadic_families, DyadicFamilies, DyadicNode};
pub use quotient::{
    check_quotient_monotonicity, default_quotient_eps, quotient_corpus, QuotientCase, QuotientReport, QuotientRow,
};
pub use scaling::{lq_scaling_experiment, ScalingConfig, ScalingRow, ScalingTable, SlopeFit};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FragError {
    #[error("resolution {delta} is coarser than eps/4 = {}", eps / 4.0)]
    ResolutionTooCoarse { eps: f64, delta: f64 },
    #[error("dyadic construction stopped at depth {achieved} of {requested}")]
    DepthExhausted { achieved: usize, requested: usize },
    #[error("map is not onto: point {0} of the target has no preimage")]
    NotOnto(usize),
    #[error("witness certification failed at point {point}: resolved diameter {diameter} < {required}")]
    WitnessInvalid { point: usize, diameter: f64, required: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

/// Outcome of iterating the derivation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Verdict {
    /// The derivation empties the set after `index` steps.
    Finite { index: usize },
    /// A nonempty set is fixed by the derivation.
    NonFragmentable { fixpoint: Vec<usize> },
}

impl Verdict {
    /// The index, with `None` standing for an infinite index.
    pub fn index(&self) -> Option<usize> {
        match self {
            Verdict::Finite { index } => Some(*index),
            Verdict::NonFragmentable { .. } => None,
        }
    }

    /// `self <= other` with an infinite index above every finite one.
    pub fn le(&self, other: &Verdict) -> bool {
        match (self.index(), other.index()) {
            (_, None) => true,
            (None, Some(_)) => false,
            (Some(a), Some(b)) => a <= b,
        }
    }

    pub fn label(&self) -> String {
        match self {
            Verdict::Finite { index } => format!("Finite({index})"),
            Verdict::NonFragmentable { fixpoint } => format!("NonFragmentable({} points)", fixpoint.len()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivationTrace {
    pub eps: f64,
    pub delta: f64,
    /// `A_0 ⊇ A_1 ⊇ ...`, starting from the initial set.
    pub levels: Vec<Vec<usize>>,
    pub verdict: Verdict,
}

fn check_eps_delta(eps: f64, delta: f64) -> Result<(), FragError> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(FragError::InvalidParameter(format!("eps must be positive, got {eps}")));
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(FragError::InvalidParameter(format!("delta must be positive, got {delta}")));
    }
    if delta > eps / 4.0 * (1.0 + 1e-12) {
        return Err(FragError::ResolutionTooCoarse { eps, delta });
    }
    Ok(())
}

fn check_set(model: &BitopModel, a: &[usize]) -> Result<(), FragError> {
    let mut seen = vec![false; model.len()];
    for &x in a {
        if x >= model.len() {
            return Err(MetricError::IndexOutOfRange(x).into());
        }
        if seen[x] {
            return Err(MetricError::DuplicatePoint(x).into());
        }
        seen[x] = true;
    }
    Ok(())
}

/// Whether the fine diameter of `ball` reaches `threshold`.
fn diameter_reaches(model: &BitopModel, ball: &[usize], threshold: f64) -> bool {
    let d = model.d();
    ball.iter().enumerate().any(|(p, &u)| {
        let row = d.row(u);
        ball[p + 1..].iter().any(|&v| row[v] >= threshold)
    })
}

/// Fine diameter of `A ∩ B_rho(x, delta)`.
pub fn resolved_diameter(model: &BitopModel, a: &[usize], x: usize, delta: f64) -> f64 {
    model.d().subset_diameter(&coarse_ball(model, a, x, delta))
}

pub(crate) fn derive_at(model: &BitopModel, a: &[usize], threshold: f64, delta: f64, exec: Exec) -> Vec<usize> {
    let cut = threshold - AXIOM_TOL;
    exec::filter_items(exec, a, |x| diameter_reaches(model, &coarse_ball(model, a, x, delta), cut))
}

/// One derivation step: the points of `a` whose resolved neighbourhood in
/// `a` has fine diameter at least `eps`.
pub fn derive_once(model: &BitopModel, a: &[usize], eps: f64, delta: f64) -> Result<Vec<usize>, FragError> {
    derive_once_with(model, a, eps, delta, Exec::default())
}

pub fn derive_once_with(
    model: &BitopModel,
    a: &[usize],
    eps: f64,
    delta: f64,
    exec: Exec,
) -> Result<Vec<usize>, FragError> {
    check_eps_delta(eps, delta)?;
    check_set(model, a)?;
    Ok(derive_at(model, a, eps, delta, exec))
}

fn iterate(
    model: &BitopModel,
    start: Vec<usize>,
    threshold: f64,
    delta: f64,
    exec: Exec,
) -> (Vec<Vec<usize>>, Verdict) {
    let mut levels = vec![start];
    loop {
        let cur = levels.last().expect("nonempty");
        if cur.is_empty() {
            let index = levels.len() - 1;
            return (levels, Verdict::Finite { index });
        }
        let next = derive_at(model, cur, threshold, delta, exec);
        if next.len() == cur.len() {
            let fixpoint = next;
            return (levels, Verdict::NonFragmentable { fixpoint });
        }
        levels.push(next);
    }
}

/// Iterates the derivation from the full point set.
pub fn szlenk_index(model: &BitopModel, eps: f64, delta: f64) -> Result<DerivationTrace, FragError> {
    szlenk_from(model, &(0..model.len()).collect::<Vec<_>>(), eps, delta, Exec::default())
}

/// Iterates the derivation from `start`.
pub fn szlenk_from(
    model: &BitopModel,
    start: &[usize],
    eps: f64,
    delta: f64,
    exec: Exec,
) -> Result<DerivationTrace, FragError> {
    check_eps_delta(eps, delta)?;
    check_set(model, start)?;
    let mut start = start.to_vec();
    start.sort_unstable();
    let (levels, verdict) = iterate(model, start, eps, delta, exec);
    Ok(DerivationTrace { eps, delta, levels, verdict })
}

/// A set every point of which has resolved fine diameter at least `3 eps`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NonFragWitness {
    subset: Vec<usize>,
    eps: f64,
    delta: f64,
    min_diameter: f64,
}

impl NonFragWitness {
    /// Checks the certification condition at every point of `subset`.
    pub fn certify(model: &BitopModel, subset: &[usize], eps: f64, delta: f64) -> Result<Self, FragError> {
        if subset.is_empty() {
            return Err(MetricError::EmptySubset.into());
        }
        check_set(model, subset)?;
        if !(eps > 0.0 && delta > 0.0) {
            return Err(FragError::InvalidParameter("eps and delta must be positive".into()));
        }
        let mut subset = subset.to_vec();
        subset.sort_unstable();
        let mut min_diameter = f64::INFINITY;
        for &x in &subset {
            let diameter = resolved_diameter(model, &subset, x, delta);
            if diameter < 3.0 * eps - AXIOM_TOL {
                return Err(FragError::WitnessInvalid { point: x, diameter, required: 3.0 * eps });
            }
            min_diameter = min_diameter.min(diameter);
        }
        Ok(NonFragWitness { subset, eps, delta, min_diameter })
    }

    pub fn subset(&self) -> &[usize] {
        &self.subset
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn min_diameter(&self) -> f64 {
        self.min_diameter
    }
}

/// Resolution used by the witness search: the model's own, capped at `3 eps / 4`.
pub fn witness_delta(model: &BitopModel, eps: f64) -> f64 {
    model.delta().min(0.75 * eps)
}

/// The derivation fixpoint at threshold `3 eps`, certified, or `None`.
pub fn find_witness(model: &BitopModel, eps: f64) -> Result<Option<NonFragWitness>, FragError> {
    find_witness_with(model, eps, Exec::default())
}

pub fn find_witness_with(model: &BitopModel, eps: f64, exec: Exec) -> Result<Option<NonFragWitness>, FragError> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(FragError::InvalidParameter(format!("eps must be positive, got {eps}")));
    }
    let delta = witness_delta(model, eps);
    let (_, verdict) = iterate(model, (0..model.len()).collect(), 3.0 * eps, delta, exec);
    match verdict {
        Verdict::Finite { .. } => Ok(None),
        Verdict::NonFragmentable { fixpoint } => NonFragWitness::certify(model, &fixpoint, eps, delta).map(Some),
    }
}
