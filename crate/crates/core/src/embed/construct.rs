//! Constructors for exact and near-exact embeddings.

use std::f64::consts::PI;

use super::{
    test_vectors, test_vectors_for, verify_isometry, BasisTag, EmbedError, EmbeddingMap, EmbeddingReport,
    SubspaceBasis, VerifyOptions,
};
use crate::convex::{PolyhedralNorm, SourceNorm};
use crate::frag::{build_dyadic_families, DyadicFamilies, NonFragWitness};
use crate::metric::{make_model, mcshane_extend_with, BitopModel, MetricError, ModelSpec, ScalarField};

/// `t -> (cos πt, sin πt)` on `interval_grid(grid_n)`, a copy of the
/// Euclidean plane.
pub fn embed_euclid2_circle(
    grid_n: usize,
    opts: &VerifyOptions,
) -> Result<(EmbeddingMap, EmbeddingReport), EmbedError> {
    if grid_n < 2 {
        return Err(EmbedError::InvalidParameter("grid must have at least 2 points".into()));
    }
    let model = make_model(&ModelSpec::IntervalGrid { n: grid_n })?;
    let psi = (0..grid_n)
        .map(|i| {
            let t = i as f64 / (grid_n - 1) as f64;
            vec![(PI * t).cos(), (PI * t).sin()]
        })
        .collect();
    let map = EmbeddingMap::new(&model, psi, SourceNorm::Lp { p: 2.0, dim: 2 })?;
    let report = verify_isometry(&map, &test_vectors(2, opts.tests, opts.seed), None, opts.exec)?;
    Ok((map, report))
}

/// Embeds a polyhedral space into `linf^n` by listing one dual extreme point
/// per antipodal pair on the discrete model `{1, ..., n}`.
pub fn embed_polyhedral_linf(
    norm: &PolyhedralNorm,
    n: usize,
    opts: &VerifyOptions,
) -> Result<(EmbeddingMap, EmbeddingReport), EmbedError> {
    let dual = norm.polar_vertices()?;
    let faces = dual.ext_points.len();
    if 2 * n < faces {
        return Err(EmbedError::FacesExceedCapacity { faces, capacity: 2 * n });
    }
    let reps = dual.representatives();
    let model = make_model(&ModelSpec::Discrete { n })?;
    let psi = (0..n).map(|i| reps[i.min(reps.len() - 1)].clone()).collect();
    let source = SourceNorm::Polyhedral(norm.clone());
    let map = EmbeddingMap::new(&model, psi, source.clone())?;
    let report =
        verify_isometry(&map, &test_vectors_for(&source, opts.tests, opts.seed), Some(&dual.ext_points), opts.exec)?;
    Ok((map, report))
}

/// Result of [`embed_polyhedral_bumps`].
#[derive(Clone, Debug)]
pub struct BumpEmbedding {
    pub map: EmbeddingMap,
    pub bumps: Vec<ScalarField>,
    pub radius: f64,
    pub report: EmbeddingReport,
}

/// Places the dual extreme point representatives on disjointly supported
/// bumps centred at `sites`.
///
/// Each bump is 1 at its site, 0 at fine distance `r` or more, where `r` is
/// half the smallest site separation, and `1/r`-Lipschitz in between.
pub fn embed_polyhedral_bumps(
    norm: &PolyhedralNorm,
    model: &BitopModel,
    sites: &[usize],
    opts: &VerifyOptions,
) -> Result<BumpEmbedding, EmbedError> {
    let dual = norm.polar_vertices()?;
    let reps = dual.representatives();
    if sites.len() != reps.len() {
        return Err(EmbedError::InvalidParameter(format!(
            "{} sites given for {} dual extreme point pairs",
            sites.len(),
            reps.len()
        )));
    }
    if model.len() < 2 * dual.ext_points.len() {
        return Err(EmbedError::InvalidParameter(format!(
            "model has {} points, at least {} needed",
            model.len(),
            2 * dual.ext_points.len()
        )));
    }
    if let Some(&s) = sites.iter().find(|&&s| s >= model.len()) {
        return Err(MetricError::IndexOutOfRange(s).into());
    }
    let d = model.d();
    let mut separation = f64::INFINITY;
    for (p, &a) in sites.iter().enumerate() {
        for &b in &sites[p + 1..] {
            separation = separation.min(d.get(a, b));
        }
    }
    if sites.len() == 1 {
        separation = d.row(sites[0]).iter().copied().fold(0.0, f64::max);
    }
    let required = 2.0 * model.delta();
    if !(separation > required) {
        return Err(EmbedError::SiteSeparationError { separation, required });
    }
    let radius = separation / 2.0;
    let mut bumps = Vec::with_capacity(sites.len());
    for &s in sites {
        let mut subset = vec![s];
        let mut values = vec![1.0];
        for y in 0..model.len() {
            if y != s && d.get(s, y) >= radius {
                subset.push(y);
                values.push(0.0);
            }
        }
        bumps.push(mcshane_extend_with(model, &subset, &values, 1.0 / radius, (0.0, 1.0), opts.exec)?);
    }
    let dim = norm.dim();
    let psi = (0..model.len())
        .map(|t| {
            let mut v = vec![0.0; dim];
            for (b, r) in bumps.iter().zip(&reps) {
                let w = b.values()[t];
                for (vi, ri) in v.iter_mut().zip(r) {
                    *vi += w * ri;
                }
            }
            v
        })
        .collect();
    let source = SourceNorm::Polyhedral(norm.clone());
    let map = EmbeddingMap::new(model, psi, source.clone())?;
    let report =
        verify_isometry(&map, &test_vectors_for(&source, opts.tests, opts.seed), Some(&dual.ext_points), opts.exec)?;
    Ok(BumpEmbedding { map, bumps, radius, report })
}

/// Result of [`construct_c0`].
#[derive(Clone, Debug)]
pub struct C0Construction {
    pub basis: SubspaceBasis,
    pub t0: usize,
    pub centres: Vec<usize>,
    pub report: EmbeddingReport,
}

/// Greedy choice of centres `t_n` with `d(t_n, t0) >= 3 eps` and pairwise
/// `d > 6 eps`, in index order.
fn pick_centres(model: &BitopModel, t0: usize, eps: f64) -> (Vec<usize>, f64) {
    let d = model.d();
    let mut centres: Vec<usize> = Vec::new();
    let mut best: f64 = 0.0;
    for t in 0..model.len() {
        if t == t0 || d.get(t, t0) < 3.0 * eps {
            continue;
        }
        let sep = centres.iter().map(|&c| d.get(c, t)).fold(f64::INFINITY, f64::min);
        if sep > 6.0 * eps {
            centres.push(t);
        } else {
            best = best.max(sep);
        }
    }
    (centres, best)
}

/// Builds `f_1, ..., f_m` with disjoint supports `{d(., t_n) < 3 eps}` and
/// `f_n(t_n) = 1`, spanning an isometric copy of `c0^m`.
///
/// `t0` defaults to the first point of the model; `centres` are picked
/// greedily unless given.
pub fn construct_c0(
    model: &BitopModel,
    eps: f64,
    t0: Option<usize>,
    centres: Option<Vec<usize>>,
    opts: &VerifyOptions,
) -> Result<C0Construction, EmbedError> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(EmbedError::InvalidParameter(format!("eps must be positive, got {eps}")));
    }
    let t0 = t0.unwrap_or(0);
    if t0 >= model.len() {
        return Err(MetricError::IndexOutOfRange(t0).into());
    }
    let d = model.d();
    let centres = match centres {
        Some(c) => {
            if let Some(&t) = c.iter().find(|&&t| t >= model.len()) {
                return Err(MetricError::IndexOutOfRange(t).into());
            }
            let near_t0 = c.iter().any(|&a| d.get(a, t0) < 3.0 * eps);
            let mut sep = f64::INFINITY;
            for (p, &a) in c.iter().enumerate() {
                for &b in &c[p + 1..] {
                    sep = sep.min(d.get(a, b));
                }
            }
            if c.is_empty() || near_t0 || c.contains(&t0) || !(sep > 6.0 * eps) {
                return Err(EmbedError::WitnessInvalid { best_separation: sep, required: 6.0 * eps });
            }
            c
        }
        None => {
            let (c, best) = pick_centres(model, t0, eps);
            if c.len() < 2 {
                return Err(EmbedError::WitnessInvalid { best_separation: best, required: 6.0 * eps });
            }
            c
        }
    };
    let mut fields = Vec::with_capacity(centres.len());
    for &c in &centres {
        let mut subset = Vec::new();
        let mut values = Vec::new();
        for y in 0..model.len() {
            let r = d.get(c, y);
            if r <= eps {
                subset.push(y);
                values.push(1.0);
            } else if r >= 3.0 * eps {
                subset.push(y);
                values.push(0.0);
            }
        }
        fields.push(mcshane_extend_with(model, &subset, &values, 1.0 / eps, (0.0, 1.0), opts.exec)?);
    }
    let basis = SubspaceBasis { model: model.clone(), fields, tag: BasisTag::C0 };
    let map = basis.to_embedding()?;
    let report = verify_isometry(&map, &test_vectors(basis.len(), opts.tests, opts.seed), None, opts.exec)?;
    Ok(C0Construction { basis, t0, centres, report })
}

/// Result of [`construct_ell1`].
#[derive(Clone, Debug)]
pub struct Ell1Construction {
    pub basis: SubspaceBasis,
    pub families: DyadicFamilies,
    /// Points of the leaf sets, in leaf order.
    pub h: Vec<usize>,
    /// Sign pattern `(±1, ..., ±1)` of each point of `h`.
    pub signs: Vec<Vec<f64>>,
    /// Lipschitz bound used for every extension.
    pub lip: f64,
    pub report: EmbeddingReport,
}

/// Builds `f_1, ..., f_depth` spanning an isometric copy of `l1^depth`.
///
/// The leaf sets of the dyadic families carry the sign map; `f_n` extends the
/// `n`-th sign coordinate from the leaves with the Lipschitz constant it has
/// there, clamped to `[-1, 1]`.
pub fn construct_ell1(
    model: &BitopModel,
    witness: &NonFragWitness,
    depth: usize,
    opts: &VerifyOptions,
) -> Result<Ell1Construction, EmbedError> {
    if depth == 0 {
        return Err(EmbedError::InvalidParameter("depth must be positive".into()));
    }
    let families = build_dyadic_families(model, witness, depth)?;
    let mut h = Vec::new();
    let mut signs = Vec::new();
    for leaf in families.leaves() {
        let pattern: Vec<f64> = leaf.address.chars().map(|b| if b == '0' { 1.0 } else { -1.0 }).collect();
        for &t in &leaf.v {
            h.push(t);
            signs.push(pattern.clone());
        }
    }
    let d = model.d();
    let mut lip: f64 = 0.0;
    for (p, &a) in h.iter().enumerate() {
        for (q, &b) in h.iter().enumerate().skip(p + 1) {
            let jump = signs[p].iter().zip(&signs[q]).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            lip = lip.max(jump / d.get(a, b));
        }
    }
    let coords: Vec<Vec<f64>> = (0..depth).map(|n| signs.iter().map(|s| s[n]).collect()).collect();
    let mut fields = Vec::with_capacity(depth);
    for data in &coords {
        fields.push(mcshane_extend_with(model, &h, data, lip, (-1.0, 1.0), opts.exec)?);
    }
    let basis = SubspaceBasis { model: model.clone(), fields, tag: BasisTag::Ell1 };
    let map = basis.to_embedding()?;
    let report = verify_isometry(&map, &test_vectors(depth, opts.tests, opts.seed), None, opts.exec)?;
    Ok(Ell1Construction { basis, families, h, signs, lip, report })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frag::find_witness;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn opts() -> VerifyOptions {
        VerifyOptions::default()
    }

    #[test]
    fn circle_examples() {
        let (map, report) = embed_euclid2_circle(10_000, &opts()).unwrap();
        assert!(report.isometry_defect <= 1e-7);
        assert!(report.max_lip <= PI + 1e-9);
        let j = map.apply(&[1.0, 0.0]).unwrap();
        assert_eq!(j.sup_norm(), 1.0);
        assert_eq!(j.values()[0], 1.0);
        let j = map.apply(&[3.0, 4.0]).unwrap();
        assert!((j.sup_norm() - 5.0).abs() < 1e-7);
    }

    #[test]
    fn l1_into_linf2() {
        let (map, report) = embed_polyhedral_linf(&PolyhedralNorm::l1(2), 2, &opts()).unwrap();
        assert_eq!(map.psi(), &[vec![1.0, 1.0], vec![1.0, -1.0]]);
        assert!(report.isometry_defect <= 1e-12);
        assert!(report.coverage_defect.unwrap() <= 1e-12);
    }

    #[test]
    fn hexagon_capacity() {
        let hex = PolyhedralNorm::hexagon();
        assert!(matches!(
            embed_polyhedral_linf(&hex, 2, &opts()),
            Err(EmbedError::FacesExceedCapacity { faces: 6, capacity: 4 })
        ));
        let o = VerifyOptions { tests: 1000, ..opts() };
        let (map, report) = embed_polyhedral_linf(&hex, 3, &o).unwrap();
        assert!(report.isometry_defect <= 1e-9);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let x = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
            let sup = map.apply(&x).unwrap().sup_norm();
            assert!((sup - hex.norm_eval(&x).unwrap()).abs() <= 1e-9);
        }
    }

    #[test]
    fn bumps_on_interval() {
        let m = make_model(&ModelSpec::IntervalGrid { n: 200 }).unwrap();
        let b = embed_polyhedral_bumps(&PolyhedralNorm::l1(2), &m, &[50, 150], &opts()).unwrap();
        assert!(b.report.isometry_defect <= 1e-9);
        assert!(b.report.psi_dual_max <= 1.0 + 1e-9);
        assert!(b.report.coverage_defect.unwrap() <= 1e-12);
        for (p, q) in b.bumps[0].values().iter().zip(b.bumps[1].values()) {
            assert!(*p == 0.0 || *q == 0.0);
        }
        assert!(matches!(
            embed_polyhedral_bumps(&PolyhedralNorm::l1(2), &m, &[50, 51], &opts()),
            Err(EmbedError::SiteSeparationError { .. })
        ));
    }

    #[test]
    fn one_dimensional_bump() {
        let m = make_model(&ModelSpec::IntervalGrid { n: 50 }).unwrap();
        let b = embed_polyhedral_bumps(&PolyhedralNorm::l1(1), &m, &[25], &opts()).unwrap();
        let j = b.map.apply(&[-3.0]).unwrap();
        for (v, w) in j.values().iter().zip(b.bumps[0].values()) {
            assert_eq!(*v, -3.0 * w);
        }
        assert!(b.report.isometry_defect <= 1e-12);
    }

    #[test]
    fn c0_on_sequence() {
        let m = make_model(&ModelSpec::ConvergentSequence { m: 6, gap: 1.0 }).unwrap();
        let c = construct_c0(&m, 0.125, None, None, &opts()).unwrap();
        assert_eq!(c.basis.len(), 6);
        let f = c.basis.combine(&[1.0, -1.0, 0.5, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(f.sup_norm(), 1.0);
        let f1 = &c.basis.fields[0];
        assert_eq!(f1.sup_norm(), 1.0);
        for &t in &c.centres[1..] {
            assert_eq!(f1.values()[t], 0.0);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let a: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let f = c.basis.combine(&a).unwrap();
            assert!(f.lip_d() <= 16.0 * c.basis.target_norm(&a) + 1e-12);
        }
        assert!(c.report.max_lip <= 16.0 + 1e-12);
    }

    #[test]
    fn c0_needs_separation() {
        let m = make_model(&ModelSpec::IntervalGrid { n: 10 }).unwrap();
        assert!(matches!(construct_c0(&m, 0.5, None, None, &opts()), Err(EmbedError::WitnessInvalid { .. })));
    }

    #[test]
    fn ell1_on_cantor() {
        let m = make_model(&ModelSpec::CantorTree { depth: 3 }).unwrap();
        let w = find_witness(&m, 0.25).unwrap().unwrap();
        let c = construct_ell1(&m, &w, 3, &opts()).unwrap();
        let f = c.basis.combine(&[1.0, -2.0, 0.5]).unwrap();
        assert_eq!(f.sup_norm(), 3.5);
        let at = f.values().iter().position(|v| *v == 3.5).unwrap();
        let k = c.h.iter().position(|&t| t == at).unwrap();
        assert_eq!(c.signs[k], vec![1.0, -1.0, 1.0]);
        let e1 = c.basis.combine(&[1.0, 0.0, 0.0]).unwrap();
        assert_eq!(e1.sup_norm(), 1.0);
        assert!(e1.values().iter().all(|v| (-1.0..=1.0).contains(v)));
        for f in &c.basis.fields {
            assert!(f.lip_d() <= 4.0);
        }
    }
}
