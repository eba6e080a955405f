//! Dyadic families `(U_s, V_s)` split out of a non-fragmentability witness.

use serde::{Deserialize, Serialize};

use super::{FragError, NonFragWitness};
use crate::metric::BitopModel;

/// One node of the binary tree, indexed by its address `s`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DyadicNode {
    pub address: String,
    pub u: Vec<usize>,
    pub v: Vec<usize>,
    pub x: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DyadicFamilies {
    pub depth: usize,
    pub eps: f64,
    /// `levels[k]` holds the `2^k` nodes with `|s| = k` in address order.
    pub levels: Vec<Vec<DyadicNode>>,
}

/// Pair `(a, b)` in `v` with `d > 3 eps`, maximising `rho`; ties go to the
/// lexicographically smallest pair.
fn split_pair(model: &BitopModel, v: &[usize], eps: f64) -> Option<(usize, usize)> {
    let mut best: Option<(f64, usize, usize)> = None;
    for (p, &a) in v.iter().enumerate() {
        for &b in &v[p + 1..] {
            if model.d().get(a, b) > 3.0 * eps {
                let r = model.rho().get(a, b);
                if best.is_none_or(|(br, _, _)| r > br) {
                    best = Some((r, a, b));
                }
            }
        }
    }
    best.map(|(_, a, b)| (a, b))
}

fn rho_ball(model: &BitopModel, within: &[usize], c: usize, r: f64) -> Vec<usize> {
    within.iter().copied().filter(|&y| model.rho().get(c, y) <= r).collect()
}

/// Largest coarse radius keeping the two halves `3 eps` apart in `d`.
fn split(model: &BitopModel, v: &[usize], a: usize, b: usize, eps: f64) -> (Vec<usize>, Vec<usize>) {
    let mut radii: Vec<f64> = v.iter().flat_map(|&y| [model.rho().get(a, y), model.rho().get(b, y)]).collect();
    radii.sort_by(|x, y| y.total_cmp(x));
    radii.dedup();
    for r in radii {
        let v0 = rho_ball(model, v, a, r);
        let v1 = rho_ball(model, v, b, r);
        if model.d().set_distance(&v0, &v1) >= 3.0 * eps {
            return (v0, v1);
        }
    }
    (vec![a], vec![b])
}

/// Builds the families to `depth` by repeated splitting.
///
/// The root is `U = K`, `V = A`. A node's `V` is cut into two coarse balls
/// around a `3 eps`-separated pair, and each child's `U` is the part of the
/// parent's `U` within fine distance `1.5 eps` of the child's `V`.
pub fn build_dyadic_families(
    model: &BitopModel,
    witness: &NonFragWitness,
    depth: usize,
) -> Result<DyadicFamilies, FragError> {
    let eps = witness.eps();
    let a = witness.subset();
    let root = DyadicNode { address: String::new(), u: (0..model.len()).collect(), v: a.to_vec(), x: a[0] };
    let mut levels = vec![vec![root]];
    for level in 0..depth {
        let mut next = Vec::with_capacity(2 * levels[level].len());
        for node in &levels[level] {
            let (xa, xb) = split_pair(model, &node.v, eps)
                .ok_or(FragError::DepthExhausted { achieved: level, requested: depth })?;
            let (v0, v1) = split(model, &node.v, xa, xb, eps);
            for (bit, v, x) in [('0', v0, xa), ('1', v1, xb)] {
                let u = node.u.iter().copied().filter(|&y| model.d().dist_to_set(y, &v) < 1.5 * eps).collect();
                next.push(DyadicNode { address: format!("{}{bit}", node.address), u, v, x });
            }
        }
        levels.push(next);
    }
    Ok(DyadicFamilies { depth, eps, levels })
}

fn subset_of(a: &[usize], b: &[usize]) -> bool {
    a.iter().all(|x| b.contains(x))
}

impl DyadicFamilies {
    /// Exhaustive check of nesting, disjointness, separation and choice
    /// conditions. Returns one message per violation.
    pub fn check_invariants(&self, model: &BitopModel) -> Vec<String> {
        let mut out = Vec::new();
        let d = model.d();
        for (k, level) in self.levels.iter().enumerate() {
            for node in level {
                let s = &node.address;
                if !node.v.contains(&node.x) {
                    out.push(format!("x_{s} not in V_{s}"));
                }
                let outside: Vec<usize> = (0..model.len()).filter(|y| !node.u.contains(y)).collect();
                if !outside.is_empty() && !node.v.is_empty() && d.set_distance(&node.v, &outside) <= self.eps {
                    out.push(format!("d(V_{s}, K \\ U_{s}) <= eps"));
                }
                if k + 1 < self.levels.len() {
                    let c0 = &self.levels[k + 1][2 * level_pos(level, s)];
                    let c1 = &self.levels[k + 1][2 * level_pos(level, s) + 1];
                    if !subset_of(&c0.u, &node.u) || !subset_of(&c1.u, &node.u) {
                        out.push(format!("children of {s} leave U_{s}"));
                    }
                    if !subset_of(&c0.v, &node.v) || !subset_of(&c1.v, &node.v) {
                        out.push(format!("children of {s} leave V_{s}"));
                    }
                    if c0.u.iter().any(|y| c1.u.contains(y)) {
                        out.push(format!("U_{s}0 and U_{s}1 intersect"));
                    }
                    if d.get(c0.x, c1.x) <= 3.0 * self.eps {
                        out.push(format!("d(x_{s}0, x_{s}1) <= 3 eps"));
                    }
                }
            }
        }
        out
    }

    /// Leaf sets `V_s` with `|s| = depth`, with their addresses.
    pub fn leaves(&self) -> &[DyadicNode] {
        self.levels.last().map(Vec::as_slice).unwrap_or(&[])
    }

    /// Smallest `d(x_s0, x_s1)` over all splits.
    pub fn min_split_separation(&self, model: &BitopModel) -> f64 {
        self.levels[1..]
            .iter()
            .flat_map(|l| l.chunks(2))
            .map(|p| model.d().get(p[0].x, p[1].x))
            .fold(f64::INFINITY, f64::min)
    }
}

fn level_pos(level: &[DyadicNode], address: &str) -> usize {
    level.iter().position(|n| n.address == address).expect("address on its level")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frag::find_witness;
    use crate::metric::{make_model, ModelSpec};

    fn cantor(depth: usize) -> BitopModel {
        make_model(&ModelSpec::CantorTree { depth }).unwrap()
    }

    #[test]
    fn cantor_full_depth() {
        let m = cantor(4);
        let w = find_witness(&m, 0.25).unwrap().unwrap();
        let f = build_dyadic_families(&m, &w, 4).unwrap();
        assert!(f.check_invariants(&m).is_empty(), "{:?}", f.check_invariants(&m));
        assert_eq!(f.leaves().len(), 16);
        assert!(f.leaves().iter().all(|n| n.v.len() == 1));
        assert_eq!(f.min_split_separation(&m), 1.0);
        // the first split follows the leading bit
        assert!(f.levels[1][0].v.iter().all(|&x| x < 8));
        assert!(f.levels[1][1].v.iter().all(|&x| x >= 8));
    }

    #[test]
    fn single_split() {
        let m = cantor(3);
        let w = find_witness(&m, 0.25).unwrap().unwrap();
        let f = build_dyadic_families(&m, &w, 1).unwrap();
        assert_eq!(f.levels.len(), 2);
        assert!(f.check_invariants(&m).is_empty());
    }

    #[test]
    fn depth_exhausted() {
        let m = cantor(3);
        let w = find_witness(&m, 0.25).unwrap().unwrap();
        assert_eq!(build_dyadic_families(&m, &w, 10), Err(FragError::DepthExhausted { achieved: 3, requested: 10 }));
    }
}
