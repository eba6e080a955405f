//! The standard model zoo.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{BitopModel, FiniteMetric, MetricError};

/// Resolution used by `fan:n` when none is given.
pub const FAN_DEFAULT_DELTA: f64 = 0.05;

/// Spike length of the fan; keeps apex-to-spike distance below 1.
const FAN_SPIKE: f64 = 0.75;

/// Generator parameters. Every generator is deterministic given its fields.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    /// `n` equally spaced points of `[0, 1]`, `rho = d = |x - y|`.
    IntervalGrid { n: usize },
    /// `{0} ∪ {1/k : k <= m}` with Euclidean `rho` and `d = gap` off the diagonal.
    ConvergentSequence { m: usize, gap: f64 },
    /// `{0,1}^depth` with `rho = 2^-k` (k = first differing position, 1-based)
    /// and the discrete `d`.
    CantorTree { depth: usize },
    /// Sample of the unit ball of `l_q^dim`: `d` is the `l_q` metric and `rho`
    /// the weighted coordinate metric `sum_k 2^-k |x_k - y_k|`.
    LqBall { q: f64, dim: usize, samples: usize, seed: u64 },
    /// `grid^dim` points of `[0,1]^dim` with `rho = d = sum_k 2^-k |a_k - b_k|`.
    HilbertCube { dim: usize, grid: usize },
    /// Apex plus `n` spikes `(3/4) e_k`: `d = l1`, `rho` a uniformly weighted
    /// `l1` putting the spikes at coarse distance `0.8 delta` from the apex.
    Fan { n: usize, delta: f64 },
    /// `n` points, `rho = d = 1` off the diagonal.
    Discrete { n: usize },
}

impl ModelSpec {
    pub fn fan(n: usize) -> Self {
        ModelSpec::Fan { n, delta: FAN_DEFAULT_DELTA }
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelSpec::IntervalGrid { n } => write!(f, "interval:{n}"),
            ModelSpec::ConvergentSequence { m, gap } => write!(f, "seq:{m}:{gap}"),
            ModelSpec::CantorTree { depth } => write!(f, "cantor:{depth}"),
            ModelSpec::LqBall { q, dim, samples, seed } => write!(f, "lq:{q}:{dim}:{samples}:{seed}"),
            ModelSpec::HilbertCube { dim, grid } => write!(f, "cube:{dim}:{grid}"),
            ModelSpec::Fan { n, delta } => write!(f, "fan:{n}:{delta}"),
            ModelSpec::Discrete { n } => write!(f, "discrete:{n}"),
        }
    }
}

impl FromStr for ModelSpec {
    type Err = MetricError;

    /// Parses the compact `kind:arg:...` form, e.g. `fan:8`, `cantor:4`,
    /// `seq:6:1`, `lq:2:8:500:7`, `cube:2:64`, `interval:101`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = |msg: &str| MetricError::InvalidParameter(format!("model '{s}': {msg}"));
        let mut parts = s.split(':');
        let kind = parts.next().unwrap_or_default();
        let args: Vec<&str> = parts.collect();
        let int = |i: usize| -> Result<usize, MetricError> {
            args.get(i).ok_or_else(|| bad("missing argument"))?.parse::<usize>().map_err(|_| bad("expected an integer"))
        };
        let real = |i: usize| -> Result<f64, MetricError> {
            args.get(i).ok_or_else(|| bad("missing argument"))?.parse::<f64>().map_err(|_| bad("expected a number"))
        };
        let spec = match kind {
            "interval" | "grid" => ModelSpec::IntervalGrid { n: int(0)? },
            "seq" | "sequence" => {
                ModelSpec::ConvergentSequence { m: int(0)?, gap: if args.len() > 1 { real(1)? } else { 1.0 } }
            }
            "cantor" => ModelSpec::CantorTree { depth: int(0)? },
            "lq" => ModelSpec::LqBall {
                q: real(0)?,
                dim: int(1)?,
                samples: int(2)?,
                seed: if args.len() > 3 { int(3)? as u64 } else { 0 },
            },
            "cube" | "hilbert" => ModelSpec::HilbertCube { dim: int(0)?, grid: int(1)? },
            "fan" => ModelSpec::Fan { n: int(0)?, delta: if args.len() > 1 { real(1)? } else { FAN_DEFAULT_DELTA } },
            "discrete" => ModelSpec::Discrete { n: int(0)? },
            _ => return Err(bad("unknown model kind")),
        };
        Ok(spec)
    }
}

fn positive(name: &str, v: usize) -> Result<(), MetricError> {
    if v == 0 {
        Err(MetricError::InvalidParameter(format!("{name} must be positive")))
    } else {
        Ok(())
    }
}

fn weighted(a: &[f64], b: &[f64]) -> f64 {
    let mut w = 0.5;
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        s += w * (x - y).abs();
        w *= 0.5;
    }
    s
}

fn lq_dist(q: f64, a: &[f64], b: &[f64]) -> f64 {
    if q == 1.0 {
        return a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum();
    }
    if q == 2.0 {
        return a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    }
    a.iter().zip(b).map(|(x, y)| (x - y).abs().powf(q)).sum::<f64>().powf(1.0 / q)
}

fn lq_norm(q: f64, a: &[f64]) -> f64 {
    a.iter().map(|x| x.abs().powf(q)).sum::<f64>().powf(1.0 / q)
}

fn from_coords<F>(ids: Vec<String>, coords: &[Vec<f64>], f: F) -> FiniteMetric
where
    F: Fn(&[f64], &[f64]) -> f64,
{
    FiniteMetric::from_fn(ids, |i, j| f(&coords[i], &coords[j])).with_coords(coords.to_vec())
}

/// Smallest positive coarse distance; the finest neighbourhood radius the
/// model resolves.
fn resolution(rho: &FiniteMetric) -> f64 {
    let s = rho.min_separation();
    if s.is_finite() && s > 0.0 {
        s
    } else {
        1.0
    }
}

/// Samples of the unit `l_q^dim` ball. The origin and `±e_k` come first;
/// the remaining points normalise a vector of signed uniform coordinates to
/// the unit `l_q` sphere and scale it by `u^(1/dim)`.
pub(crate) fn lq_samples(q: f64, dim: usize, samples: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut pts: Vec<Vec<f64>> = Vec::with_capacity(samples);
    pts.push(vec![0.0; dim]);
    for k in 0..dim {
        for s in [1.0, -1.0] {
            let mut e = vec![0.0; dim];
            e[k] = s;
            pts.push(e);
        }
    }
    pts.truncate(samples);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    while pts.len() < samples {
        let z: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let norm = lq_norm(q, &z);
        if norm < 1e-12 {
            continue;
        }
        let u: f64 = rng.gen_range(0.0..1.0);
        let r = u.powf(1.0 / dim as f64);
        pts.push(z.iter().map(|x| x / norm * r).collect());
    }
    pts
}

/// Builds a model from its generator spec.
pub fn make_model(spec: &ModelSpec) -> Result<BitopModel, MetricError> {
    let model = match *spec {
        ModelSpec::IntervalGrid { n } => {
            positive("n", n)?;
            let coords: Vec<Vec<f64>> =
                (0..n).map(|i| vec![if n == 1 { 0.0 } else { i as f64 / (n - 1) as f64 }]).collect();
            let ids = coords.iter().map(|c| format!("{}", c[0])).collect();
            let m = from_coords(ids, &coords, |a, b| (a[0] - b[0]).abs());
            let delta = resolution(&m);
            BitopModel::new(m.clone(), m, delta)?
        }
        ModelSpec::ConvergentSequence { m, gap } => {
            positive("m", m)?;
            if !(gap >= 1.0 && gap.is_finite()) {
                return Err(MetricError::InvalidParameter(format!(
                    "gap must be >= 1 so that d dominates rho, got {gap}"
                )));
            }
            let mut coords = vec![vec![0.0]];
            coords.extend((1..=m).map(|k| vec![1.0 / k as f64]));
            let mut ids = vec!["0".to_string()];
            ids.extend((1..=m).map(|k| format!("1/{k}")));
            let rho = from_coords(ids.clone(), &coords, |a, b| (a[0] - b[0]).abs());
            let d = FiniteMetric::from_fn(ids, |_, _| gap).with_coords(coords);
            let delta = resolution(&rho);
            BitopModel::new(rho, d, delta)?
        }
        ModelSpec::CantorTree { depth } => {
            positive("depth", depth)?;
            if depth > 12 {
                return Err(MetricError::InvalidParameter("cantor depth is capped at 12".into()));
            }
            let n = 1usize << depth;
            let ids: Vec<String> = (0..n).map(|x| format!("{x:0depth$b}")).collect();
            let coords: Vec<Vec<f64>> =
                (0..n).map(|x| (0..depth).map(|b| ((x >> (depth - 1 - b)) & 1) as f64).collect()).collect();
            let rho = FiniteMetric::from_fn(ids.clone(), |i, j| {
                let first_diff = ((i ^ j) as u64).leading_zeros() as usize - (64 - depth) + 1;
                0.5f64.powi(first_diff as i32)
            })
            .with_coords(coords.clone());
            let d = FiniteMetric::from_fn(ids, |_, _| 1.0).with_coords(coords);
            BitopModel::new(rho, d, 0.5f64.powi(depth as i32))?
        }
        ModelSpec::LqBall { q, dim, samples, seed } => {
            if !(q >= 1.0 && q.is_finite()) {
                return Err(MetricError::InvalidParameter(format!("q must be >= 1, got {q}")));
            }
            positive("dim", dim)?;
            positive("samples", samples)?;
            let coords = lq_samples(q, dim, samples, seed);
            let ids: Vec<String> = (0..coords.len()).map(|i| format!("x{i}")).collect();
            let rho = from_coords(ids.clone(), &coords, weighted);
            let d = from_coords(ids, &coords, |a, b| lq_dist(q, a, b));
            let delta = resolution(&rho);
            BitopModel::new(rho, d, delta)?
        }
        ModelSpec::HilbertCube { dim, grid } => {
            positive("dim", dim)?;
            if grid < 2 {
                return Err(MetricError::InvalidParameter("grid must be >= 2".into()));
            }
            let n = grid
                .checked_pow(dim as u32)
                .filter(|&n| n <= 1 << 14)
                .ok_or_else(|| MetricError::InvalidParameter("hilbert cube larger than 16384 points".into()))?;
            let step = 1.0 / (grid - 1) as f64;
            let coords: Vec<Vec<f64>> = (0..n)
                .map(|mut idx| {
                    let mut c = vec![0.0; dim];
                    for k in (0..dim).rev() {
                        c[k] = (idx % grid) as f64 * step;
                        idx /= grid;
                    }
                    c
                })
                .collect();
            let ids = coords.iter().map(|c| c.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")).collect();
            let m = from_coords(ids, &coords, weighted);
            let delta = resolution(&m);
            BitopModel::new(m.clone(), m, delta)?
        }
        ModelSpec::Fan { n, delta } => {
            positive("n", n)?;
            let weight = 0.8 * delta / FAN_SPIKE;
            if !(delta > 0.0 && weight <= 1.0) {
                return Err(MetricError::InvalidParameter(format!(
                    "fan delta must lie in (0, {}], got {delta}",
                    FAN_SPIKE / 0.8
                )));
            }
            let mut coords = vec![vec![0.0; n]];
            for k in 0..n {
                let mut e = vec![0.0; n];
                e[k] = FAN_SPIKE;
                coords.push(e);
            }
            let mut ids = vec!["apex".to_string()];
            ids.extend((1..=n).map(|k| format!("spike{k}")));
            let d = from_coords(ids.clone(), &coords, |a, b| lq_dist(1.0, a, b));
            let rho = from_coords(ids, &coords, |a, b| weight * lq_dist(1.0, a, b));
            BitopModel::new(rho, d, delta)?
        }
        ModelSpec::Discrete { n } => {
            positive("n", n)?;
            let ids = (1..=n).map(|i| i.to_string()).collect();
            let m = FiniteMetric::from_fn(ids, |_, _| 1.0);
            BitopModel::new(m.clone(), m, 0.5)?
        }
    };
    Ok(model.with_spec(spec.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::validate_metric;

    fn id(model: &BitopModel, label: &str) -> usize {
        model.ids().iter().position(|s| s == label).unwrap()
    }

    #[test]
    fn cantor_tree_three() {
        let m = make_model(&ModelSpec::CantorTree { depth: 3 }).unwrap();
        assert_eq!(m.len(), 8);
        let mut rho_vals: Vec<f64> = Vec::new();
        for i in 0..8 {
            for j in (i + 1)..8 {
                assert_eq!(m.d().get(i, j), 1.0);
                let r = m.rho().get(i, j);
                if !rho_vals.contains(&r) {
                    rho_vals.push(r);
                }
            }
        }
        rho_vals.sort_by(f64::total_cmp);
        assert_eq!(rho_vals, vec![0.125, 0.25, 0.5]);
        assert_eq!(m.rho().get(id(&m, "000"), id(&m, "100")), 0.5);
        assert_eq!(m.rho().get(id(&m, "000"), id(&m, "001")), 0.125);
    }

    #[test]
    fn hilbert_cube_corner_distance() {
        let m = make_model(&ModelSpec::HilbertCube { dim: 2, grid: 3 }).unwrap();
        assert_eq!(m.len(), 9);
        assert_eq!(m.rho().get(id(&m, "0,0"), id(&m, "1,1")), 0.75);
        assert_eq!(m.rho(), m.d());
    }

    #[test]
    fn convergent_sequence_four() {
        let m = make_model(&ModelSpec::ConvergentSequence { m: 4, gap: 1.0 }).unwrap();
        assert_eq!(m.len(), 5);
        for i in 0..5 {
            for j in 0..5 {
                assert_eq!(m.d().get(i, j), if i == j { 0.0 } else { 1.0 });
            }
        }
        assert_eq!(m.rho().get(id(&m, "1/1"), id(&m, "1/4")), 0.75);
    }

    #[test]
    fn every_generator_passes_validation() {
        let specs = [
            ModelSpec::IntervalGrid { n: 17 },
            ModelSpec::ConvergentSequence { m: 6, gap: 1.0 },
            ModelSpec::CantorTree { depth: 4 },
            ModelSpec::LqBall { q: 1.5, dim: 3, samples: 40, seed: 3 },
            ModelSpec::LqBall { q: 2.0, dim: 4, samples: 40, seed: 9 },
            ModelSpec::HilbertCube { dim: 2, grid: 5 },
            ModelSpec::fan(8),
            ModelSpec::Discrete { n: 4 },
        ];
        for spec in specs {
            let m = make_model(&spec).unwrap();
            assert!(validate_metric(m.rho()).is_valid(), "{spec}: rho");
            assert!(validate_metric(m.d()).is_valid(), "{spec}: d");
            for i in 0..m.len() {
                for j in 0..m.len() {
                    assert!(m.d().get(i, j) >= m.rho().get(i, j));
                }
            }
            assert!(m.delta() > 0.0);
        }
    }

    #[test]
    fn lq_samples_are_deterministic_and_in_ball() {
        let spec = ModelSpec::LqBall { q: 3.0, dim: 5, samples: 200, seed: 42 };
        let a = make_model(&spec).unwrap();
        let b = make_model(&spec).unwrap();
        assert_eq!(a, b);
        for c in a.coords().unwrap() {
            assert!(lq_norm(3.0, c) <= 1.0 + 1e-12);
        }
        assert_eq!(a.coords().unwrap()[1], vec![1.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn bad_parameters() {
        assert!(make_model(&ModelSpec::IntervalGrid { n: 0 }).is_err());
        assert!(make_model(&ModelSpec::LqBall { q: 0.5, dim: 2, samples: 10, seed: 0 }).is_err());
        assert!(make_model(&ModelSpec::CantorTree { depth: 0 }).is_err());
        assert!(make_model(&ModelSpec::ConvergentSequence { m: 3, gap: 0.5 }).is_err());
    }

    #[test]
    fn spec_strings_round_trip() {
        for s in ["fan:8:0.05", "cantor:4", "seq:6:1", "lq:2:8:500:7", "cube:2:64", "interval:101", "discrete:3"] {
            let spec: ModelSpec = s.parse().unwrap();
            assert_eq!(spec.to_string().parse::<ModelSpec>().unwrap(), spec);
        }
        assert_eq!("fan:8".parse::<ModelSpec>().unwrap(), ModelSpec::fan(8));
        assert!("blob:3".parse::<ModelSpec>().is_err());
    }

    #[test]
    fn json_round_trip() {
        let m = make_model(&ModelSpec::LqBall { q: 2.0, dim: 2, samples: 12, seed: 1 }).unwrap();
        let back = BitopModel::from_json(&m.to_json()).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_json(), m.to_json());
    }
}
