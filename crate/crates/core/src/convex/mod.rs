//! Finite-dimensional norms, unit-ball polytopes and polar duality.
//!
//! Vertex enumeration is brute-force double description: every `dim`-subset
//! of facet (or vertex) functionals is intersected and the feasible
//! intersections are kept. Dimensions are capped at 4.

pub(crate) mod linalg;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use linalg::{dot, euclid, for_each_combination, rank, solve};

/// Largest dimension handled by the vertex enumeration.
pub const MAX_POLAR_DIM: usize = 4;

/// Euclidean tolerance for deduplicating extreme points.
pub const DEDUP_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("dimension {0} exceeds the vertex-enumeration cap of {MAX_POLAR_DIM}")]
    Unsupported(usize),
    #[error("unit ball is degenerate (does not span the space)")]
    Degenerate,
    #[error("representation is not origin-symmetric: no antipode for {0:?}")]
    NotSymmetric(Vec<f64>),
    #[error("invalid norm: {0}")]
    Invalid(String),
}

/// How a polyhedral unit ball is given.
#[derive(Clone, Debug, PartialEq)]
pub enum Representation {
    /// Unit-ball vertices.
    Vertices(Vec<Vec<f64>>),
    /// Facet functionals `u` with facets `{x : <u, x> = 1}`.
    Facets(Vec<Vec<f64>>),
}

/// A norm whose unit ball is an origin-symmetric polytope.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyhedralNorm {
    dim: usize,
    rep: Representation,
    name: Option<String>,
}

/// JSON form `{dim, v_rep?|h_rep?, name?}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormDocument {
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_rep: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_rep: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

fn dedup(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for p in points {
        if !out.iter().any(|q| linalg::euclid_dist(p, q) <= DEDUP_TOL) {
            out.push(p.clone());
        }
    }
    out
}

/// Lexicographically descending order, so `(1, 1)` precedes `(1, -1)`.
fn canonical_sort(points: &mut [Vec<f64>]) {
    points.sort_by(|a, b| {
        for (x, y) in a.iter().zip(b) {
            if (x - y).abs() > DEDUP_TOL {
                return y.total_cmp(x);
            }
        }
        std::cmp::Ordering::Equal
    });
}

fn check_points(dim: usize, points: &[Vec<f64>]) -> Result<(), GeometryError> {
    if dim == 0 {
        return Err(GeometryError::Invalid("dimension must be positive".into()));
    }
    for p in points {
        if p.len() != dim {
            return Err(GeometryError::DimensionMismatch { expected: dim, got: p.len() });
        }
        if p.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::Invalid("non-finite coordinate".into()));
        }
    }
    for p in points {
        let neg: Vec<f64> = p.iter().map(|v| -v).collect();
        if !points.iter().any(|q| linalg::euclid_dist(q, &neg) <= DEDUP_TOL) {
            return Err(GeometryError::NotSymmetric(p.clone()));
        }
    }
    if rank(points, dim) < dim {
        return Err(GeometryError::Degenerate);
    }
    Ok(())
}

/// Minkowski gauge of `conv(points)` at `x`, by exhaustive enumeration of the
/// basic solutions of `min sum(l) s.t. sum l_i p_i = x, l >= 0`.
///
/// `points` must span the space and be origin-symmetric.
pub fn gauge_of_hull(points: &[Vec<f64>], x: &[f64]) -> f64 {
    let dim = x.len();
    if x.iter().all(|&v| v == 0.0) {
        return 0.0;
    }
    let mut best = f64::INFINITY;
    for_each_combination(points.len(), dim, |idx| {
        // Columns p_i form the system sum_i l_i p_i = x; transpose to rows.
        let cols: Vec<Vec<f64>> = (0..dim).map(|r| idx.iter().map(|&i| points[i][r]).collect()).collect();
        let rows: Vec<&[f64]> = cols.iter().map(|r| r.as_slice()).collect();
        if let Some(l) = solve(&rows, x) {
            if l.iter().all(|&v| v >= -1e-12) {
                let s: f64 = l.iter().map(|v| v.max(0.0)).sum();
                best = best.min(s);
            }
        }
    });
    best
}

/// Vertices of `{y : <a, y> <= 1 for all a in functionals}`.
fn enumerate_polar(dim: usize, functionals: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut found: Vec<Vec<f64>> = Vec::new();
    let ones = vec![1.0; dim];
    for_each_combination(functionals.len(), dim, |idx| {
        let rows: Vec<&[f64]> = idx.iter().map(|&i| functionals[i].as_slice()).collect();
        if let Some(y) = solve(&rows, &ones) {
            if functionals.iter().all(|a| dot(a, &y) <= 1.0 + DEDUP_TOL)
                && !found.iter().any(|q| linalg::euclid_dist(q, &y) <= DEDUP_TOL)
            {
                found.push(y);
            }
        }
    });
    canonical_sort(&mut found);
    found
}

/// Points of `points` that are not in the convex hull of the others.
fn hull_extreme_points(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for (i, p) in points.iter().enumerate() {
        let rest: Vec<Vec<f64>> = points.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, q)| q.clone()).collect();
        if rank(&rest, p.len()) < p.len() || gauge_of_hull(&rest, p) > 1.0 + DEDUP_TOL {
            out.push(p.clone());
        }
    }
    canonical_sort(&mut out);
    out
}

impl PolyhedralNorm {
    pub fn from_vertices(dim: usize, vertices: Vec<Vec<f64>>) -> Result<Self, GeometryError> {
        check_points(dim, &vertices)?;
        Ok(PolyhedralNorm { dim, rep: Representation::Vertices(dedup(&vertices)), name: None })
    }

    pub fn from_facets(dim: usize, facets: Vec<Vec<f64>>) -> Result<Self, GeometryError> {
        check_points(dim, &facets)?;
        Ok(PolyhedralNorm { dim, rep: Representation::Facets(dedup(&facets)), name: None })
    }

    pub fn named(mut self, name: &str) -> Self {
        self.name = Some(name.to_string());
        self
    }

    /// `l1^dim`, given by its vertices `±e_i`.
    pub fn l1(dim: usize) -> Self {
        Self::from_vertices(dim, signed_basis(dim)).expect("cross-polytope").named(&format!("l1^{dim}"))
    }

    /// `linf^dim`, given by its facet functionals `±e_i`.
    pub fn linf(dim: usize) -> Self {
        Self::from_facets(dim, signed_basis(dim)).expect("cube").named(&format!("linf^{dim}"))
    }

    /// Regular hexagon with vertices `(±1, 0)`, `(±1/2, ±√3/2)`.
    pub fn hexagon() -> Self {
        let h = 3f64.sqrt() / 2.0;
        let v = vec![vec![1.0, 0.0], vec![0.5, h], vec![-0.5, h], vec![-1.0, 0.0], vec![-0.5, -h], vec![0.5, -h]];
        Self::from_vertices(2, v).expect("hexagon").named("hexagon")
    }

    /// Looks up a named preset: `l1:n`, `linf:n`, `hexagon`.
    pub fn preset(name: &str) -> Result<Self, GeometryError> {
        let (kind, arg) = name.split_once(':').unwrap_or((name, "2"));
        let n: usize = arg.parse().map_err(|_| GeometryError::Invalid(format!("bad preset dimension in '{name}'")))?;
        match kind {
            "l1" => Ok(Self::l1(n)),
            "linf" => Ok(Self::linf(n)),
            "hexagon" => Ok(Self::hexagon()),
            _ => Err(GeometryError::Invalid(format!("unknown norm preset '{name}'"))),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    pub fn representation(&self) -> &Representation {
        &self.rep
    }

    fn check_dim(&self, x: &[f64]) -> Result<(), GeometryError> {
        if x.len() != self.dim {
            Err(GeometryError::DimensionMismatch { expected: self.dim, got: x.len() })
        } else {
            Ok(())
        }
    }

    /// Norm of `x`: a facet maximum for `Facets`, a gauge computed by linear
    /// feasibility for `Vertices`.
    pub fn norm_eval(&self, x: &[f64]) -> Result<f64, GeometryError> {
        self.check_dim(x)?;
        Ok(match &self.rep {
            Representation::Facets(h) => h.iter().map(|u| dot(u, x)).fold(0.0, f64::max),
            Representation::Vertices(v) => gauge_of_hull(v, x),
        })
    }

    /// Dual norm `sup { <y, x> : ||x|| <= 1 }`.
    pub fn dual_norm(&self, y: &[f64]) -> Result<f64, GeometryError> {
        self.check_dim(y)?;
        Ok(match &self.rep {
            Representation::Vertices(v) => v.iter().map(|p| dot(p, y)).fold(0.0, f64::max),
            Representation::Facets(h) => gauge_of_hull(h, y),
        })
    }

    /// Extreme points of the dual unit ball.
    pub fn polar_vertices(&self) -> Result<DualBall, GeometryError> {
        if self.dim > MAX_POLAR_DIM {
            return Err(GeometryError::Unsupported(self.dim));
        }
        let ext = match &self.rep {
            Representation::Vertices(v) => enumerate_polar(self.dim, v),
            Representation::Facets(h) => hull_extreme_points(h),
        };
        if ext.is_empty() {
            return Err(GeometryError::Degenerate);
        }
        Ok(DualBall { dim: self.dim, ext_points: ext })
    }

    /// Vertices of the unit ball itself.
    pub fn ball_vertices(&self) -> Result<Vec<Vec<f64>>, GeometryError> {
        if self.dim > MAX_POLAR_DIM {
            return Err(GeometryError::Unsupported(self.dim));
        }
        Ok(match &self.rep {
            Representation::Vertices(v) => hull_extreme_points(v),
            Representation::Facets(h) => enumerate_polar(self.dim, h),
        })
    }

    /// Number of facets of the unit ball.
    pub fn face_count(&self) -> Result<usize, GeometryError> {
        Ok(self.polar_vertices()?.ext_points.len())
    }

    pub fn to_document(&self) -> NormDocument {
        let (v_rep, h_rep) = match &self.rep {
            Representation::Vertices(v) => (Some(v.clone()), None),
            Representation::Facets(h) => (None, Some(h.clone())),
        };
        NormDocument { dim: self.dim, v_rep, h_rep, name: self.name.clone() }
    }

    pub fn from_document(doc: NormDocument) -> Result<Self, GeometryError> {
        let norm = match (doc.v_rep, doc.h_rep) {
            (Some(v), None) => Self::from_vertices(doc.dim, v)?,
            (None, Some(h)) => Self::from_facets(doc.dim, h)?,
            _ => return Err(GeometryError::Invalid("exactly one of v_rep, h_rep is required".into())),
        };
        Ok(match doc.name {
            Some(n) => norm.named(&n),
            None => norm,
        })
    }
}

fn signed_basis(dim: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(2 * dim);
    for i in 0..dim {
        for s in [1.0, -1.0] {
            let mut e = vec![0.0; dim];
            e[i] = s;
            out.push(e);
        }
    }
    out
}

/// Extreme points of a dual unit ball.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualBall {
    pub dim: usize,
    pub ext_points: Vec<Vec<f64>>,
}

impl DualBall {
    /// Gauge of the dual ball, i.e. the dual norm.
    pub fn gauge(&self, y: &[f64]) -> f64 {
        gauge_of_hull(&self.ext_points, y)
    }

    /// One point per antipodal pair, chosen with a positive leading
    /// coordinate, in canonical order.
    pub fn representatives(&self) -> Vec<Vec<f64>> {
        self.ext_points
            .iter()
            .filter(|p| p.iter().find(|v| v.abs() > DEDUP_TOL).is_some_and(|&v| v > 0.0))
            .cloned()
            .collect()
    }

    /// The norm whose unit ball is this dual ball (given by vertices).
    pub fn as_norm(&self) -> Result<PolyhedralNorm, GeometryError> {
        PolyhedralNorm::from_vertices(self.dim, self.ext_points.clone())
    }
}

/// Deterministic quasi-uniform sample of the unit sphere `S^n ⊂ R^(n+1)`.
///
/// `n = 1` is an angular grid of `2 * resolution` points; `n = 2, 3` project
/// a `resolution`-subdivided cube surface onto the sphere. `±e_i` are always
/// present.
pub fn sphere_grid(n: usize, resolution: usize) -> Result<Vec<Vec<f64>>, GeometryError> {
    if !(1..=3).contains(&n) {
        return Err(GeometryError::Invalid(format!("sphere_grid supports n in 1..=3, got {n}")));
    }
    if resolution < 2 {
        return Err(GeometryError::Invalid("resolution must be >= 2".into()));
    }
    if n == 1 {
        let m = 2 * resolution;
        return Ok((0..m)
            .map(|k| {
                let a = std::f64::consts::PI * k as f64 / resolution as f64;
                match k % (resolution.max(1)) {
                    _ if 2 * k == resolution => vec![0.0, 1.0],
                    _ if k == resolution => vec![-1.0, 0.0],
                    _ if 2 * k == 3 * resolution => vec![0.0, -1.0],
                    _ => vec![a.cos(), a.sin()],
                }
            })
            .collect());
    }
    let dim = n + 1;
    let steps = resolution;
    let t = |i: usize| -1.0 + 2.0 * i as f64 / steps as f64;
    let mut out = Vec::new();
    for axis in 0..dim {
        for (si, sign) in [1.0, -1.0].into_iter().enumerate() {
            let free: Vec<usize> = (0..dim).filter(|&b| b != axis).collect();
            let total = (steps + 1).pow(free.len() as u32);
            for mut code in 0..total {
                let mut p = vec![0.0; dim];
                p[axis] = sign;
                let mut owned = true;
                for &b in &free {
                    let i = code % (steps + 1);
                    code /= steps + 1;
                    p[b] = t(i);
                    if i == 0 || i == steps {
                        let other_si = if i == steps { 0 } else { 1 };
                        if (b, other_si) < (axis, si) {
                            owned = false;
                        }
                    }
                }
                if owned {
                    let r = euclid(&p);
                    out.push(p.iter().map(|v| v / r).collect());
                }
            }
        }
    }
    if steps % 2 == 1 {
        out.extend(signed_basis(dim));
    }
    Ok(out)
}

/// Norms that embeddings may take as their source space `X`.
#[derive(Clone, Debug, PartialEq)]
pub enum SourceNorm {
    /// `l_p^dim`, `p` in `[1, ∞]`.
    Lp {
        p: f64,
        dim: usize,
    },
    Polyhedral(PolyhedralNorm),
}

/// Conjugate exponent, with `1 <-> ∞`.
pub fn conjugate(p: f64) -> f64 {
    if p == 1.0 {
        f64::INFINITY
    } else if p.is_infinite() {
        1.0
    } else {
        p / (p - 1.0)
    }
}

/// `l_p` norm of `x` for `p` in `[1, ∞]`.
pub fn lp_norm(p: f64, x: &[f64]) -> f64 {
    if p.is_infinite() {
        x.iter().fold(0.0, |m, v| m.max(v.abs()))
    } else if p == 1.0 {
        x.iter().map(|v| v.abs()).sum()
    } else if p == 2.0 {
        euclid(x)
    } else {
        x.iter().map(|v| v.abs().powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

impl SourceNorm {
    pub fn dim(&self) -> usize {
        match self {
            SourceNorm::Lp { dim, .. } => *dim,
            SourceNorm::Polyhedral(n) => n.dim(),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            SourceNorm::Lp { p, dim } if p.is_infinite() => format!("linf^{dim}"),
            SourceNorm::Lp { p, dim } => format!("l{p}^{dim}"),
            SourceNorm::Polyhedral(n) => {
                n.name().map(str::to_string).unwrap_or_else(|| format!("polyhedral^{}", n.dim()))
            }
        }
    }

    pub fn norm(&self, x: &[f64]) -> f64 {
        match self {
            SourceNorm::Lp { p, .. } => lp_norm(*p, x),
            SourceNorm::Polyhedral(n) => n.norm_eval(x).expect("dimension checked by caller"),
        }
    }

    pub fn dual_norm(&self, y: &[f64]) -> f64 {
        match self {
            SourceNorm::Lp { p, .. } => lp_norm(conjugate(*p), y),
            SourceNorm::Polyhedral(n) => n.dual_norm(y).expect("dimension checked by caller"),
        }
    }

    /// Extreme points of the dual ball when finitely many.
    pub fn dual_extreme_points(&self) -> Option<Vec<Vec<f64>>> {
        match self {
            SourceNorm::Lp { p, dim } if p.is_infinite() => Some(signed_basis(*dim)),
            SourceNorm::Lp { p, dim } if *p == 1.0 => Some(sign_patterns(*dim)),
            SourceNorm::Lp { .. } => None,
            SourceNorm::Polyhedral(n) => n.polar_vertices().ok().map(|b| b.ext_points),
        }
    }

    /// Unit-ball boundary points at which each dual extreme point is the
    /// unique norming functional (facet centroids), when cheaply known.
    pub fn facet_centroids(&self) -> Vec<Vec<f64>> {
        let (SourceNorm::Polyhedral(n), Some(ext)) = (self, self.dual_extreme_points()) else {
            return Vec::new();
        };
        let Ok(verts) = n.ball_vertices() else {
            return Vec::new();
        };
        ext.iter()
            .filter_map(|u| {
                let on: Vec<&Vec<f64>> = verts.iter().filter(|v| (dot(u, v) - 1.0).abs() <= 1e-9).collect();
                if on.is_empty() {
                    return None;
                }
                let mut c = vec![0.0; n.dim()];
                for v in &on {
                    for (ci, vi) in c.iter_mut().zip(v.iter()) {
                        *ci += vi / on.len() as f64;
                    }
                }
                Some(c)
            })
            .collect()
    }
}

/// `{±1}^dim` in lexicographically descending order.
pub fn sign_patterns(dim: usize) -> Vec<Vec<f64>> {
    (0..(1usize << dim))
        .map(|code| (0..dim).map(|b| if (code >> (dim - 1 - b)) & 1 == 0 { 1.0 } else { -1.0 }).collect())
        .collect()
}
