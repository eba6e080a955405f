//! Sequence-space maps: the Mazur map, `l_p` transfer and the squared
//! coordinate fields on a Euclidean ball.

use serde::{Deserialize, Serialize};

use super::{test_vectors, verify_isometry, EmbedError, EmbeddingMap, EmbeddingReport, VerifyOptions};
use crate::convex::{conjugate, lp_norm, SourceNorm};
use crate::metric::{lq_samples, make_model, BitopModel, ModelSpec, ScalarField};

fn check_exponent(name: &str, q: f64) -> Result<(), EmbedError> {
    if q >= 1.0 && q.is_finite() {
        Ok(())
    } else {
        Err(EmbedError::InvalidParameter(format!("{name} must be a finite exponent >= 1, got {q}")))
    }
}

/// `x -> sign(x_n) |x_n|^(q1/q2)`, coordinatewise.
pub fn mazur_map(x: &[f64], q1: f64, q2: f64) -> Result<Vec<f64>, EmbedError> {
    check_exponent("q1", q1)?;
    check_exponent("q2", q2)?;
    let r = q1 / q2;
    Ok(x.iter().map(|&v| v.signum() * v.abs().powf(r)).collect())
}

/// Largest sampled `||Φ(x) - Φ(y)||_q2 / ||x - y||_q1` over random pairs of the
/// `l_q1` ball shrunk by `scale`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MazurProbe {
    pub q1: f64,
    pub q2: f64,
    pub dim: usize,
    pub scale: f64,
    pub pairs: usize,
    pub max_ratio: f64,
}

pub fn mazur_lip_probe(
    q1: f64,
    q2: f64,
    dim: usize,
    pairs: usize,
    seed: u64,
    scales: &[f64],
) -> Result<Vec<MazurProbe>, EmbedError> {
    check_exponent("q1", q1)?;
    check_exponent("q2", q2)?;
    if dim == 0 || pairs == 0 {
        return Err(EmbedError::InvalidParameter("dim and pairs must be positive".into()));
    }
    let skip = 1 + 2 * dim;
    let pts = lq_samples(q1, dim, skip + 2 * pairs, seed);
    let pts = &pts[skip..];
    let mut out = Vec::with_capacity(scales.len());
    for &scale in scales {
        let mut max_ratio: f64 = 0.0;
        for pair in pts.chunks_exact(2) {
            let x: Vec<f64> = pair[0].iter().map(|v| v * scale).collect();
            let y: Vec<f64> = pair[1].iter().map(|v| v * scale).collect();
            let dx: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
            let den = lp_norm(q1, &dx);
            if den == 0.0 {
                continue;
            }
            let fx = mazur_map(&x, q1, q2)?;
            let fy = mazur_map(&y, q1, q2)?;
            let df: Vec<f64> = fx.iter().zip(&fy).map(|(a, b)| a - b).collect();
            max_ratio = max_ratio.max(lp_norm(q2, &df) / den);
        }
        out.push(MazurProbe { q1, q2, dim, scale, pairs, max_ratio });
    }
    Ok(out)
}

/// Pushes the sampled `l_q` ball forward by `Φ_{q,q'}` and reads the result
/// as a dual-ball map for `l_{p'}^k`, `p'` conjugate to `q'`, `k = dim`.
pub fn transfer_lp(
    model: &BitopModel,
    dim: usize,
    q: f64,
    q_prime: f64,
    opts: &VerifyOptions,
) -> Result<(EmbeddingMap, EmbeddingReport), EmbedError> {
    check_exponent("q", q)?;
    check_exponent("q'", q_prime)?;
    if q_prime > q {
        return Err(EmbedError::DirectionNotLipschitz { q, q_prime });
    }
    let coords = model.coords().ok_or_else(|| EmbedError::InvalidParameter("model carries no coordinates".into()))?;
    if dim == 0 || coords.iter().any(|c| c.len() < dim) {
        return Err(EmbedError::InvalidParameter(format!("model coordinates shorter than {dim}")));
    }
    let psi = coords.iter().map(|c| mazur_map(&c[..dim], q, q_prime)).collect::<Result<Vec<_>, _>>()?;
    let map = EmbeddingMap::new(model, psi, SourceNorm::Lp { p: conjugate(q_prime), dim })?;
    let report = verify_isometry(&map, &test_vectors(dim, opts.tests, opts.seed), None, opts.exec)?;
    Ok((map, report))
}

/// Measured properties of `sum a_k x_k^2` on a sampled Euclidean ball.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallFieldChecks {
    /// `max |a_k|`.
    pub coeff_max: f64,
    /// Largest field value over the samples, in absolute value.
    pub sup: f64,
    pub lip: f64,
    pub within_sup_bound: bool,
    pub within_lip_bound: bool,
}

/// The field `sum a_k x_k^2` on `lq_ball(2, dim, samples, seed)`.
pub fn example_c0_in_ball(
    dim: usize,
    samples: usize,
    seed: u64,
    coeffs: &[f64],
) -> Result<(ScalarField, BallFieldChecks), EmbedError> {
    if coeffs.len() > dim {
        return Err(EmbedError::InvalidParameter(format!("{} coefficients for dimension {dim}", coeffs.len())));
    }
    let model = make_model(&ModelSpec::LqBall { q: 2.0, dim, samples, seed })?;
    let coords = model.coords().expect("sampled ball has coordinates");
    let field = ScalarField::from_fn(&model, |t| coeffs.iter().zip(&coords[t]).map(|(a, x)| a * x * x).sum())?;
    let coeff_max = coeffs.iter().fold(0.0, |m: f64, a| m.max(a.abs()));
    let sup = field.sup_norm();
    let lip = field.lip_d();
    let checks = BallFieldChecks {
        coeff_max,
        sup,
        lip,
        within_sup_bound: sup <= coeff_max + 1e-12,
        within_lip_bound: lip <= 2.0 * coeff_max + 1e-9,
    };
    Ok((field, checks))
}
