//! Index growth on sampled `l_q` balls as the scale shrinks.

use serde::{Deserialize, Serialize};

use super::{iterate, FragError};
use crate::exec::Exec;
use crate::metric::{make_model, ModelSpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingConfig {
    pub q_list: Vec<f64>,
    pub dims: Vec<usize>,
    pub samples: usize,
    /// Decreasing scales.
    pub eps_grid: Vec<f64>,
    pub seed: u64,
}

impl Default for ScalingConfig {
    fn default() -> Self {
        ScalingConfig {
            q_list: vec![1.0, 2.0],
            dims: vec![2],
            samples: 400,
            eps_grid: vec![0.8, 0.4, 0.2, 0.1],
            seed: 7,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub q: f64,
    pub dim: usize,
    pub eps: f64,
    pub delta: f64,
    /// `None` for a nonempty fixpoint.
    pub index: Option<usize>,
}

/// Least-squares slope of `log index` against `log(1/eps)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub q: f64,
    pub dim: usize,
    pub points: usize,
    pub slope: Option<f64>,
    pub std_error: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingTable {
    pub rows: Vec<ScalingRow>,
    pub fits: Vec<SlopeFit>,
    /// Consecutive scales where the index went down as `eps` shrank.
    pub monotonicity_violations: usize,
}

fn fit(xs: &[f64], ys: &[f64]) -> (Option<f64>, Option<f64>) {
    let n = xs.len();
    if n < 2 {
        return (None, None);
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx <= 0.0 {
        return (None, None);
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    if n < 3 {
        return (Some(slope), None);
    }
    let icept = my - slope * mx;
    let rss: f64 = xs.iter().zip(ys).map(|(x, y)| (y - icept - slope * x).powi(2)).sum();
    (Some(slope), Some((rss / (n - 2) as f64 / sxx).sqrt()))
}

/// Runs the derivation on `lq_ball(q, dim, samples, seed)` across the scale
/// grid, at one fixed resolution `min(eps_grid) / 4` so indices are
/// comparable along the grid.
pub fn lq_scaling_experiment(cfg: &ScalingConfig, exec: Exec) -> Result<ScalingTable, FragError> {
    if cfg.eps_grid.is_empty() || cfg.eps_grid.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
        return Err(FragError::InvalidParameter("eps grid must be nonempty and positive".into()));
    }
    if cfg.eps_grid.windows(2).any(|w| w[1] >= w[0]) {
        return Err(FragError::InvalidParameter("eps grid must be strictly decreasing".into()));
    }
    let delta = cfg.eps_grid.iter().copied().fold(f64::INFINITY, f64::min) / 4.0;
    let mut rows = Vec::new();
    let mut fits = Vec::new();
    let mut violations = 0;
    for &q in &cfg.q_list {
        for &dim in &cfg.dims {
            let model = make_model(&ModelSpec::LqBall { q, dim, samples: cfg.samples, seed: cfg.seed })?;
            let mut prev: Option<Option<usize>> = None;
            let (mut xs, mut ys) = (Vec::new(), Vec::new());
            for &eps in &cfg.eps_grid {
                let (_, verdict) = iterate(&model, (0..model.len()).collect(), eps, delta, exec);
                let index = verdict.index();
                if let Some(p) = prev {
                    let down = match (p, index) {
                        (None, Some(_)) => true,
                        (Some(a), Some(b)) => b < a,
                        _ => false,
                    };
                    violations += down as usize;
                }
                prev = Some(index);
                if let Some(k) = index.filter(|&k| k > 0) {
                    xs.push((1.0 / eps).ln());
                    ys.push((k as f64).ln());
                }
                rows.push(ScalingRow { q, dim, eps, delta, index });
            }
            let (slope, std_error) = fit(&xs, &ys);
            fits.push(SlopeFit { q, dim, points: xs.len(), slope, std_error });
        }
    }
    Ok(ScalingTable { rows, fits, monotonicity_violations: violations })
}
