//! Isometric embeddings of finite-dimensional spaces into `C(K)` and their
//! verifiers.
//!
//! An [`EmbeddingMap`] assigns a dual-ball vector `psi(t)` to every model
//! point; the induced operator sends `x` to the field `t -> <psi(t), x>`.

mod construct;
mod lp;
mod sphere;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::convex::{GeometryError, SourceNorm};
use crate::exec::{self, Exec};
use crate::frag::FragError;
use crate::metric::{pairwise_lip, BitopModel, MetricError, ScalarField};
use crate::VALUE_TOL;

pub use construct::{
    construct_c0, construct_ell1, embed_euclid2_circle, embed_polyhedral_bumps, embed_polyhedral_linf, BumpEmbedding,
    C0Construction, Ell1Construction,
};
pub use lp::{example_c0_in_ball, mazur_lip_probe, mazur_map, transfer_lp, BallFieldChecks, MazurProbe};
pub use sphere::{
    embed_euclid_via_cover, filling_curve_demo, hilbert_d2xy, sphere_cover, stereo_inverse, FillingRow, SphereCover,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EmbedError {
    #[error("dual ball has {faces} facets but only {capacity} = 2n are available")]
    FacesExceedCapacity { faces: usize, capacity: usize },
    #[error("sites are {separation} apart; disjoint bumps need more than {required}")]
    SiteSeparationError { separation: f64, required: f64 },
    #[error("no separated family found: best separation {best_separation}, required {required}")]
    WitnessInvalid { best_separation: f64, required: f64 },
    #[error("Mazur map from l_{q} to l_{q_prime} is not Lipschitz (q' > q)")]
    DirectionNotLipschitz { q: f64, q_prime: f64 },
    #[error("coverage defect {achieved} exceeds the certifiable {required}")]
    CoverageUncertified { achieved: f64, required: f64 },
    #[error("psi({point}) has dual norm {norm} > 1")]
    OutsideDualBall { point: usize, norm: f64 },
    #[error("empty test vector set")]
    NoTestVectors,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Frag(#[from] FragError),
}

/// `t -> psi(t)` with values in the dual ball of `norm`.
#[derive(Clone, Debug)]
pub struct EmbeddingMap {
    model: BitopModel,
    psi: Vec<Vec<f64>>,
    norm: SourceNorm,
}

impl EmbeddingMap {
    pub fn new(model: &BitopModel, psi: Vec<Vec<f64>>, norm: SourceNorm) -> Result<Self, EmbedError> {
        if psi.len() != model.len() {
            return Err(MetricError::LengthMismatch { got: psi.len(), expected: model.len() }.into());
        }
        let dim = norm.dim();
        for (t, p) in psi.iter().enumerate() {
            if p.len() != dim {
                return Err(GeometryError::DimensionMismatch { expected: dim, got: p.len() }.into());
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(MetricError::NonFiniteValue(t).into());
            }
            let n = norm.dual_norm(p);
            if n > 1.0 + VALUE_TOL {
                return Err(EmbedError::OutsideDualBall { point: t, norm: n });
            }
        }
        Ok(EmbeddingMap { model: model.clone(), psi, norm })
    }

    pub fn model(&self) -> &BitopModel {
        &self.model
    }

    pub fn psi(&self) -> &[Vec<f64>] {
        &self.psi
    }

    pub fn norm(&self) -> &SourceNorm {
        &self.norm
    }

    pub fn dim(&self) -> usize {
        self.norm.dim()
    }

    fn values(&self, x: &[f64]) -> Vec<f64> {
        self.psi.iter().map(|p| p.iter().zip(x).map(|(a, b)| a * b).sum()).collect()
    }

    /// `J(x)`, the field `t -> <psi(t), x>`.
    pub fn apply(&self, x: &[f64]) -> Result<ScalarField, EmbedError> {
        if x.len() != self.dim() {
            return Err(GeometryError::DimensionMismatch { expected: self.dim(), got: x.len() }.into());
        }
        Ok(ScalarField::new(&self.model, self.values(x))?)
    }

    /// The map `t -> s psi(t)`, for `s` in `[0, 1]`.
    pub fn scaled(&self, s: f64) -> Result<Self, EmbedError> {
        let psi = self.psi.iter().map(|p| p.iter().map(|v| v * s).collect()).collect();
        EmbeddingMap::new(&self.model, psi, self.norm.clone())
    }
}

/// Which sequence space a basis reproduces.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisTag {
    C0,
    Ell1,
}

/// Fields `f_1, ..., f_m` spanning a Lipschitz subspace.
#[derive(Clone, Debug)]
pub struct SubspaceBasis {
    pub model: BitopModel,
    pub fields: Vec<ScalarField>,
    pub tag: BasisTag,
}

impl SubspaceBasis {
    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    pub fn combine(&self, coeffs: &[f64]) -> Result<ScalarField, EmbedError> {
        Ok(ScalarField::combine(&self.model, &self.fields, coeffs)?)
    }

    /// The norm `sum a_n f_n` should have: `max |a_n|` or `sum |a_n|`.
    pub fn target_norm(&self, coeffs: &[f64]) -> f64 {
        match self.tag {
            BasisTag::C0 => coeffs.iter().fold(0.0, |m, a| m.max(a.abs())),
            BasisTag::Ell1 => coeffs.iter().map(|a| a.abs()).sum(),
        }
    }

    /// Source norm whose dual ball holds `t -> (f_1(t), ..., f_m(t))`.
    pub fn source_norm(&self) -> SourceNorm {
        let dim = self.fields.len();
        match self.tag {
            BasisTag::C0 => SourceNorm::Lp { p: f64::INFINITY, dim },
            BasisTag::Ell1 => SourceNorm::Lp { p: 1.0, dim },
        }
    }

    pub fn to_embedding(&self) -> Result<EmbeddingMap, EmbedError> {
        let psi = (0..self.model.len()).map(|t| self.fields.iter().map(|f| f.values()[t]).collect()).collect();
        EmbeddingMap::new(&self.model, psi, self.source_norm())
    }
}

/// Verification results for one embedding.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingReport {
    /// `max_x | sup_t |J(x)(t)| - ||x|| |`.
    pub isometry_defect: f64,
    /// Same, divided by `||x||`, over test vectors with `||x|| >= 1e-6`.
    pub relative_defect: f64,
    /// Test vector attaining the isometry defect.
    pub worst_vector: Option<usize>,
    /// `max_x L(J(x)) / ||x||` over the scanned test vectors.
    pub max_lip: f64,
    /// `max_x L(J(x)) / ||J(x)||_inf` over the scanned test vectors.
    pub lambda: f64,
    /// Lipschitz constant of `psi` into the dual norm, when scanned.
    pub psi_lip: Option<f64>,
    /// `max_x ||x|| / ||J(x)||_inf`.
    pub norming_constant: f64,
    /// Largest dual distance from a dual extreme point (or sphere point) to
    /// `psi(K) ∪ -psi(K)`.
    pub coverage_defect: Option<f64>,
    /// Largest dual norm of `psi(t)`.
    pub psi_dual_max: f64,
    pub tests_used: usize,
    pub lip_vectors_used: usize,
}

/// Pair-evaluation budget for the Lipschitz scans inside [`verify_isometry`].
pub const LIP_PAIR_BUDGET: usize = 200_000_000;

/// Default number of test vectors.
pub const DEFAULT_TESTS: usize = 200;

/// Test-vector count, seed and execution mode used by the constructors'
/// built-in verification.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VerifyOptions {
    pub tests: usize,
    pub seed: u64,
    pub exec: Exec,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions { tests: DEFAULT_TESTS, seed: 0, exec: Exec::default() }
    }
}

/// Deterministic test vectors: `±e_i`, `(±e_i ± e_j)/√2`, then seeded uniform
/// draws from `[-1, 1]^dim` up to `count`.
pub fn test_vectors(dim: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for i in 0..dim {
        for s in [1.0, -1.0] {
            let mut e = vec![0.0; dim];
            e[i] = s;
            out.push(e);
        }
    }
    let h = std::f64::consts::FRAC_1_SQRT_2;
    for i in 0..dim {
        for j in (i + 1)..dim {
            for (si, sj) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                let mut e = vec![0.0; dim];
                e[i] = si * h;
                e[j] = sj * h;
                out.push(e);
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    while out.len() < count {
        out.push((0..dim).map(|_| rng.gen_range(-1.0..=1.0)).collect());
    }
    out.truncate(count.max(1));
    out
}

/// Test vectors for `norm`, with facet centroids of polyhedral balls first.
pub fn test_vectors_for(norm: &SourceNorm, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut out = norm.facet_centroids();
    out.extend(test_vectors(norm.dim(), count.saturating_sub(out.len()).max(1), seed));
    out
}

/// Measures the isometry defect, Lipschitz ratios and dual coverage of `e`.
///
/// Lipschitz scans over all point pairs are capped at [`LIP_PAIR_BUDGET`]
/// pair evaluations: only the first `k` test vectors are scanned, with `k`
/// reported as `lip_vectors_used`. `psi_lip` is skipped past the budget.
pub fn verify_isometry(
    e: &EmbeddingMap,
    tests: &[Vec<f64>],
    dual_ext: Option<&[Vec<f64>]>,
    exec: Exec,
) -> Result<EmbeddingReport, EmbedError> {
    if tests.is_empty() {
        return Err(EmbedError::NoTestVectors);
    }
    for x in tests {
        if x.len() != e.dim() {
            return Err(GeometryError::DimensionMismatch { expected: e.dim(), got: x.len() }.into());
        }
    }
    let n = e.model.len();
    let pairs = (n * n.saturating_sub(1) / 2).max(1);
    let lip_k = (LIP_PAIR_BUDGET / pairs).clamp(1, tests.len());

    struct Row {
        defect: f64,
        rel: f64,
        norming: f64,
        lip: Option<(f64, f64)>,
    }
    let rows: Vec<Row> = exec::map_indices(exec, tests.len(), |i| {
        let x = &tests[i];
        let vals = e.values(x);
        let sup = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let norm = e.norm.norm(x);
        let defect = (sup - norm).abs();
        let rel = if norm >= 1e-6 { defect / norm } else { 0.0 };
        let norming = if norm == 0.0 {
            0.0
        } else if sup > 0.0 {
            norm / sup
        } else {
            f64::INFINITY
        };
        let lip = (i < lip_k).then(|| {
            let l = pairwise_lip(e.model.d(), &vals, Exec::Sequential).value;
            let by_norm = if norm > 0.0 { l / norm } else { 0.0 };
            let by_sup = if sup > 0.0 { l / sup } else { 0.0 };
            (by_norm, by_sup)
        });
        Row { defect, rel, norming, lip }
    });

    let mut report = EmbeddingReport { tests_used: tests.len(), lip_vectors_used: lip_k, ..Default::default() };
    for (i, r) in rows.iter().enumerate() {
        if r.defect > report.isometry_defect {
            report.isometry_defect = r.defect;
            report.worst_vector = Some(i);
        }
        report.relative_defect = report.relative_defect.max(r.rel);
        report.norming_constant = report.norming_constant.max(r.norming);
        if let Some((a, b)) = r.lip {
            report.max_lip = report.max_lip.max(a);
            report.lambda = report.lambda.max(b);
        }
    }
    report.psi_dual_max = e.psi.iter().map(|p| e.norm.dual_norm(p)).fold(0.0, f64::max);
    if pairs <= LIP_PAIR_BUDGET / 8 {
        let best = exec::argmax_rows(exec, n, |i| {
            let row = e.model.d().row(i);
            let mut best: Option<(f64, ())> = None;
            for j in (i + 1)..n {
                let diff: Vec<f64> = e.psi[i].iter().zip(&e.psi[j]).map(|(a, b)| a - b).collect();
                let r = e.norm.dual_norm(&diff) / row[j];
                if best.is_none_or(|(b, _)| r > b) {
                    best = Some((r, ()));
                }
            }
            best
        });
        report.psi_lip = Some(best.map_or(0.0, |(_, v, _)| v));
    }
    if let Some(ext) = dual_ext {
        let cov = exec::map_indices(exec, ext.len(), |k| {
            let u = &ext[k];
            e.psi
                .iter()
                .flat_map(|p| {
                    let minus: Vec<f64> = u.iter().zip(p).map(|(a, b)| a - b).collect();
                    let plus: Vec<f64> = u.iter().zip(p).map(|(a, b)| a + b).collect();
                    [e.norm.dual_norm(&minus), e.norm.dual_norm(&plus)]
                })
                .fold(f64::INFINITY, f64::min)
        });
        report.coverage_defect = Some(cov.into_iter().fold(0.0, f64::max));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convex::PolyhedralNorm;
    use crate::metric::{make_model, ModelSpec};

    fn l1_into_linf() -> EmbeddingMap {
        let m = make_model(&ModelSpec::Discrete { n: 2 }).unwrap();
        EmbeddingMap::new(&m, vec![vec![1.0, 1.0], vec![1.0, -1.0]], SourceNorm::Polyhedral(PolyhedralNorm::l1(2)))
            .unwrap()
    }

    #[test]
    fn exact_embedding_has_zero_defects() {
        let e = l1_into_linf();
        let ext = e.norm().dual_extreme_points().unwrap();
        let r = verify_isometry(&e, &test_vectors(2, 200, 1), Some(&ext), Exec::default()).unwrap();
        assert!(r.isometry_defect <= 1e-12);
        assert!(r.coverage_defect.unwrap() <= 1e-12);
        assert!(r.max_lip <= r.psi_lip.unwrap() + 1e-12);
    }

    #[test]
    fn shrinking_scales_the_defect() {
        let e = l1_into_linf();
        let tests = test_vectors(2, 200, 3);
        let max_norm = tests.iter().map(|x| e.norm().norm(x)).fold(0.0, f64::max);
        let ext = e.norm().dual_extreme_points().unwrap();
        for s in [0.0, 0.25, 0.9, 1.0] {
            let r = verify_isometry(&e.scaled(s).unwrap(), &tests, Some(&ext), Exec::default()).unwrap();
            assert!((r.isometry_defect - (1.0 - s) * max_norm).abs() < 1e-12, "s = {s}");
        }
        let r = verify_isometry(&e.scaled(0.9).unwrap(), &tests, Some(&ext), Exec::default()).unwrap();
        // dual norm is l_inf, distance from (1,1) to 0.9 (1,1)
        assert!((r.coverage_defect.unwrap() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn perturbation_bound() {
        let e = l1_into_linf();
        let tests = test_vectors(2, 200, 4);
        let max_norm = tests.iter().map(|x| e.norm().norm(x)).fold(0.0, f64::max);
        for eta in [1e-3, 1e-2] {
            let psi = vec![vec![1.0 - eta, 1.0 - eta], vec![1.0, -1.0 + eta]];
            let p = EmbeddingMap::new(e.model(), psi, e.norm().clone()).unwrap();
            let r = verify_isometry(&p, &tests, None, Exec::default()).unwrap();
            assert!(r.isometry_defect <= eta * max_norm + 1e-12);
        }
    }

    #[test]
    fn outside_dual_ball_rejected() {
        let m = make_model(&ModelSpec::Discrete { n: 1 }).unwrap();
        let r = EmbeddingMap::new(&m, vec![vec![2.0, 0.0]], SourceNorm::Lp { p: 2.0, dim: 2 });
        assert!(matches!(r, Err(EmbedError::OutsideDualBall { .. })));
    }

    #[test]
    fn test_vector_layout() {
        let v = test_vectors(3, 200, 0);
        assert_eq!(v.len(), 200);
        assert_eq!(v[0], vec![1.0, 0.0, 0.0]);
        assert_eq!(v[1], vec![-1.0, 0.0, 0.0]);
        assert!((crate::convex::lp_norm(2.0, &v[6]) - 1.0).abs() < 1e-12);
        assert_eq!(v, test_vectors(3, 200, 0));
        let e = l1_into_linf();
        assert!(matches!(verify_isometry(&e, &[], None, Exec::default()), Err(EmbedError::NoTestVectors)));
    }
}
