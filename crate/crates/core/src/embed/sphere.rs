//! Sphere covers by inverse stereographic projection, and the filling-curve
//! demonstration built on them.

use serde::{Deserialize, Serialize};

use super::{
    embed_euclid2_circle, test_vectors, verify_isometry, EmbedError, EmbeddingMap, EmbeddingReport, VerifyOptions,
};
use crate::convex::{sphere_grid, SourceNorm};
use crate::exec::{self, Exec};
use crate::metric::{make_model, BitopModel, ModelSpec};

/// Inverse stereographic projection `u -> (2u, 1 - |u|^2) / (1 + |u|^2)`.
///
/// The origin goes to the north pole `e_{n+1}` and the unit ball onto the
/// closed upper hemisphere.
pub fn stereo_inverse(u: &[f64]) -> Vec<f64> {
    let r2: f64 = u.iter().map(|v| v * v).sum();
    let s = 1.0 + r2;
    let mut out: Vec<f64> = u.iter().map(|v| 2.0 * v / s).collect();
    out.push((1.0 - r2) / s);
    out
}

/// `psi(a) = stereo_inverse(2a - 1)` for `a` in `[0, 1]^n`.
fn cube_to_sphere(a: &[f64]) -> Vec<f64> {
    stereo_inverse(&a.iter().map(|v| 2.0 * v - 1.0).collect::<Vec<_>>())
}

fn euclid_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Coverage of `S^n` by `image ∪ -image`, measured on `sphere_grid(n, res)`.
fn coverage(image: &[Vec<f64>], n: usize, res: usize, exec: Exec) -> Result<f64, EmbedError> {
    let probe = sphere_grid(n, res)?;
    let gaps = exec::map_indices(exec, probe.len(), |k| {
        let p = &probe[k];
        image
            .iter()
            .map(|q| {
                let neg: Vec<f64> = q.iter().map(|v| -v).collect();
                euclid_dist(p, q).min(euclid_dist(p, &neg))
            })
            .fold(f64::INFINITY, f64::min)
    });
    Ok(gaps.into_iter().fold(0.0, f64::max))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SphereCover {
    pub n: usize,
    pub grid: usize,
    /// Cube grid points in `[0, 1]^n`.
    pub domain: Vec<Vec<f64>>,
    /// Their images on `S^n`.
    pub image: Vec<Vec<f64>>,
    /// Lipschitz constant of `psi` on the grid, Euclidean on both sides.
    pub lip: f64,
    /// Largest distance from a point of `sphere_grid(n, grid)` to
    /// `image ∪ -image`.
    pub coverage_defect: f64,
    /// `2π / grid`.
    pub coverage_bound: f64,
}

/// Tabulates `psi` on the `grid^n` cube grid and measures its Lipschitz
/// constant and sphere coverage.
pub fn sphere_cover(n: usize, grid: usize, exec: Exec) -> Result<SphereCover, EmbedError> {
    if !(1..=2).contains(&n) {
        return Err(EmbedError::InvalidParameter(format!("sphere cover supports n = 1, 2, got {n}")));
    }
    if grid < 8 {
        return Err(EmbedError::InvalidParameter(format!("grid must be >= 8, got {grid}")));
    }
    let step = 1.0 / (grid - 1) as f64;
    let domain: Vec<Vec<f64>> = (0..grid.pow(n as u32))
        .map(|mut idx| {
            let mut a = vec![0.0; n];
            for k in (0..n).rev() {
                a[k] = (idx % grid) as f64 * step;
                idx /= grid;
            }
            a
        })
        .collect();
    let image: Vec<Vec<f64>> = domain.iter().map(|a| cube_to_sphere(a)).collect();
    let m = domain.len();
    let lip = exec::argmax_rows(exec, m, |i| {
        let mut best: Option<(f64, ())> = None;
        for j in (i + 1)..m {
            let r = euclid_dist(&image[i], &image[j]) / euclid_dist(&domain[i], &domain[j]);
            if best.is_none_or(|(b, _)| r > b) {
                best = Some((r, ()));
            }
        }
        best
    })
    .map_or(0.0, |(_, v, _)| v);
    let coverage_defect = coverage(&image, n, grid, exec)?;
    Ok(SphereCover {
        n,
        grid,
        domain,
        image,
        lip,
        coverage_defect,
        coverage_bound: 2.0 * std::f64::consts::PI / grid as f64,
    })
}

/// `psi` composed with the projection of a Hilbert-cube model onto its first
/// `n` coordinates, as a copy of Euclidean `R^(n+1)`.
///
/// Coverage is certified on `sphere_grid(n, grid)` against `2π / grid`.
pub fn embed_euclid_via_cover(
    n: usize,
    model: &BitopModel,
    grid: usize,
    opts: &VerifyOptions,
) -> Result<(EmbeddingMap, EmbeddingReport), EmbedError> {
    if !(1..=2).contains(&n) {
        return Err(EmbedError::InvalidParameter(format!("n must be 1 or 2, got {n}")));
    }
    if grid < 8 {
        return Err(EmbedError::InvalidParameter(format!("grid must be >= 8, got {grid}")));
    }
    let coords = model.coords().ok_or_else(|| EmbedError::InvalidParameter("model carries no coordinates".into()))?;
    if coords.iter().any(|c| c.len() < n || c[..n].iter().any(|v| !(0.0..=1.0).contains(v))) {
        return Err(EmbedError::InvalidParameter(format!("model coordinates must lie in [0, 1]^{n}")));
    }
    let psi: Vec<Vec<f64>> = coords.iter().map(|c| cube_to_sphere(&c[..n])).collect();
    let map = EmbeddingMap::new(model, psi, SourceNorm::Lp { p: 2.0, dim: n + 1 })?;
    let probe = sphere_grid(n, grid)?;
    let report = verify_isometry(&map, &test_vectors(n + 1, opts.tests, opts.seed), Some(&probe), opts.exec)?;
    let achieved = report.coverage_defect.unwrap_or(f64::INFINITY);
    let required = 2.0 * std::f64::consts::PI / grid as f64;
    if achieved > required {
        return Err(EmbedError::CoverageUncertified { achieved, required });
    }
    Ok((map, report))
}

/// Cell `(x, y)` visited at step `d` of the Hilbert curve on a `side x side`
/// grid, `side` a power of two.
pub fn hilbert_d2xy(side: usize, d: usize) -> (usize, usize) {
    let (mut x, mut y) = (0, 0);
    let mut t = d;
    let mut s = 1;
    while s < side {
        let rx = 1 & (t / 2);
        let ry = 1 & (t ^ rx);
        if ry == 0 {
            if rx == 1 {
                x = s - 1 - x;
                y = s - 1 - y;
            }
            std::mem::swap(&mut x, &mut y);
        }
        x += s * rx;
        y += s * ry;
        t /= 4;
        s *= 2;
    }
    (x, y)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FillingRow {
    pub level: u32,
    pub points: usize,
    /// `max_x L(J(x)) / ||x||` for the curve embedding.
    pub max_lip: f64,
    pub isometry_defect: f64,
    /// The same ratio for the circle embedding on the same interval grid.
    pub circle_max_lip: f64,
}

/// Copies of Euclidean `R^3` over `[0, 1]` obtained by running the level-`k`
/// Hilbert curve through the sphere cover, one row per level.
pub fn filling_curve_demo(levels: &[u32], opts: &VerifyOptions) -> Result<Vec<FillingRow>, EmbedError> {
    if levels.is_empty() || levels.windows(2).any(|w| w[1] <= w[0]) {
        return Err(EmbedError::InvalidParameter("levels must be nonempty and increasing".into()));
    }
    if levels[0] == 0 || *levels.last().expect("nonempty") > 7 {
        return Err(EmbedError::InvalidParameter("levels must lie in 1..=7".into()));
    }
    let tests = test_vectors(3, opts.tests, opts.seed);
    let mut rows = Vec::with_capacity(levels.len());
    for &k in levels {
        let side = 1usize << k;
        let n = side * side;
        let model = make_model(&ModelSpec::IntervalGrid { n })?;
        let psi = (0..n)
            .map(|i| {
                let (x, y) = hilbert_d2xy(side, i);
                cube_to_sphere(&[(x as f64 + 0.5) / side as f64, (y as f64 + 0.5) / side as f64])
            })
            .collect();
        let map = EmbeddingMap::new(&model, psi, SourceNorm::Lp { p: 2.0, dim: 3 })?;
        let report = verify_isometry(&map, &tests, None, opts.exec)?;
        let (_, circle) = embed_euclid2_circle(n, opts)?;
        rows.push(FillingRow {
            level: k,
            points: n,
            max_lip: report.max_lip,
            isometry_defect: report.isometry_defect,
            circle_max_lip: circle.max_lip,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pole_and_hemisphere() {
        assert_eq!(stereo_inverse(&[0.0, 0.0]), vec![0.0, 0.0, 1.0]);
        assert_eq!(cube_to_sphere(&[0.5]), vec![0.0, 1.0]);
        for u in [[1.0, 0.0], [0.6, -0.8], [0.3, 0.2]] {
            let p = stereo_inverse(&u);
            assert!((p.iter().map(|v| v * v).sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(p[2] >= -1e-15);
        }
    }

    #[test]
    fn circle_cover() {
        let c = sphere_cover(1, 16, Exec::default()).unwrap();
        assert!(c.coverage_defect <= c.coverage_bound);
        // upper half circle is reached
        assert!(c.image.iter().any(|p| (p[0] + 1.0).abs() < 1e-12));
        assert!(c.image.iter().any(|p| (p[0] - 1.0).abs() < 1e-12));
        let finer = sphere_cover(1, 64, Exec::default()).unwrap();
        assert!(finer.coverage_defect <= finer.coverage_bound);
        assert!(c.lip.is_finite() && (finer.lip - c.lip).abs() < 0.05 * c.lip);
        assert!(sphere_cover(1, 4, Exec::default()).is_err());
    }

    #[test]
    fn two_sphere_cover() {
        let c = sphere_cover(2, 16, Exec::default()).unwrap();
        assert!(c.coverage_defect <= c.coverage_bound);
        assert!(c.lip <= 4.0 + 1e-9);
    }

    #[test]
    fn euclid_via_cover() {
        let model = make_model(&ModelSpec::HilbertCube { dim: 2, grid: 64 }).unwrap();
        let (map, r) = embed_euclid_via_cover(1, &model, 64, &VerifyOptions::default()).unwrap();
        assert!(r.isometry_defect <= 0.1);
        assert!(r.lambda.is_finite() && r.lambda > 0.0);
        let sup = map.apply(&[2.0, 0.0]).unwrap().sup_norm();
        let d = r.relative_defect;
        assert!(sup >= 2.0 * (1.0 - d) - 1e-12 && sup <= 2.0 * (1.0 + d) + 1e-12);
        let coarse = make_model(&ModelSpec::HilbertCube { dim: 1, grid: 3 }).unwrap();
        assert!(matches!(
            embed_euclid_via_cover(1, &coarse, 64, &VerifyOptions::default()),
            Err(EmbedError::CoverageUncertified { .. })
        ));
    }

    #[test]
    fn hilbert_curve_is_a_path() {
        for k in 1..5 {
            let side = 1usize << k;
            let mut seen = vec![false; side * side];
            let mut prev: Option<(usize, usize)> = None;
            for d in 0..side * side {
                let (x, y) = hilbert_d2xy(side, d);
                assert!(!seen[x * side + y]);
                seen[x * side + y] = true;
                if let Some((px, py)) = prev {
                    assert_eq!(px.abs_diff(x) + py.abs_diff(y), 1);
                }
                prev = Some((x, y));
            }
        }
    }
}
