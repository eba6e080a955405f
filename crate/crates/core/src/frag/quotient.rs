//! Index comparison along Lipschitz quotient maps `phi: K2 -> K1`.

use serde::{Deserialize, Serialize};

use super::{iterate, FragError, Verdict};
use crate::exec::Exec;
use crate::metric::{make_model, BitopModel, ModelSpec};
use crate::AXIOM_TOL;

/// A shipped quotient map with its source `k2` and target `k1`.
#[derive(Clone, Debug)]
pub struct QuotientCase {
    pub name: String,
    pub k1: BitopModel,
    pub k2: BitopModel,
    pub phi: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuotientRow {
    pub eps: f64,
    /// Derivation scale on `k1`, `c * eps`.
    pub scaled_eps: f64,
    pub delta1: f64,
    pub delta2: f64,
    /// Whether the coarse balls of radius `delta1` pull back into balls of
    /// radius `delta2`; when true the inequality is forced.
    pub matched: bool,
    /// Largest `rho1(phi w, phi y)` over `rho2(w, y) <= delta2`.
    pub coarse_modulus: f64,
    pub sz_k1: Verdict,
    pub sz_k2: Verdict,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuotientReport {
    pub name: String,
    pub lip_phi: f64,
    pub c: f64,
    pub rows: Vec<QuotientRow>,
    pub violations: usize,
}

fn lip_of_map(k1: &BitopModel, k2: &BitopModel, phi: &[usize]) -> f64 {
    let mut lip: f64 = 0.0;
    for w in 0..k2.len() {
        for y in (w + 1)..k2.len() {
            let top = k1.d().get(phi[w], phi[y]);
            if top > 0.0 {
                lip = lip.max(top / k2.d().get(w, y));
            }
        }
    }
    lip
}

/// Checks `Sz(K1, c eps) <= Sz(K2, eps)` with `c = 2 L(phi)` for every `eps`.
///
/// `K2` is derived at resolution `eps / 4`. On `K1` the resolution is the
/// largest radius up to `c eps / 4` whose coarse balls pull back under `phi`
/// into resolved balls of `K2`.
pub fn check_quotient_monotonicity(
    name: &str,
    k1: &BitopModel,
    k2: &BitopModel,
    phi: &[usize],
    eps_list: &[f64],
    exec: Exec,
) -> Result<QuotientReport, FragError> {
    if phi.len() != k2.len() {
        return Err(FragError::InvalidParameter(format!(
            "map has {} entries, source has {} points",
            phi.len(),
            k2.len()
        )));
    }
    let mut hit = vec![false; k1.len()];
    for &z in phi {
        if z >= k1.len() {
            return Err(FragError::InvalidParameter(format!("map value {z} out of range")));
        }
        hit[z] = true;
    }
    if let Some(missing) = hit.iter().position(|h| !h) {
        return Err(FragError::NotOnto(missing));
    }
    let lip_phi = lip_of_map(k1, k2, phi);
    let c = if lip_phi > 0.0 { 2.0 * lip_phi } else { 2.0 };

    // spread[x][z] = max rho2(y, w) over y in phi^-1(x), w in phi^-1(z)
    let n1 = k1.len();
    let mut spread = vec![0.0f64; n1 * n1];
    for y in 0..k2.len() {
        for w in 0..k2.len() {
            let s = &mut spread[phi[y] * n1 + phi[w]];
            *s = s.max(k2.rho().get(y, w));
        }
    }

    let mut rows = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(FragError::InvalidParameter(format!("eps must be positive, got {eps}")));
        }
        let delta2 = eps / 4.0;
        let cap = c * eps / 4.0;
        let fibres_ok = (0..n1).all(|x| spread[x * n1 + x] <= delta2 + AXIOM_TOL);
        let bad = (0..n1)
            .flat_map(|x| (0..n1).map(move |z| (x, z)))
            .filter(|&(x, z)| x != z && spread[x * n1 + z] > delta2 + AXIOM_TOL)
            .map(|(x, z)| k1.rho().get(x, z))
            .fold(f64::INFINITY, f64::min);
        let delta1 = if bad > cap + AXIOM_TOL {
            cap
        } else {
            let below = (0..n1)
                .flat_map(|x| (0..n1).map(move |z| (x, z)))
                .filter(|&(x, z)| x != z)
                .map(|(x, z)| k1.rho().get(x, z))
                .filter(|&r| r < bad - 2.0 * AXIOM_TOL)
                .fold(0.0f64, f64::max);
            if below > 0.0 {
                below
            } else {
                (k1.rho().min_separation() / 2.0).min(cap)
            }
        };
        let mut coarse_modulus: f64 = 0.0;
        for y in 0..k2.len() {
            for w in 0..k2.len() {
                if k2.rho().get(y, w) <= delta2 + AXIOM_TOL {
                    coarse_modulus = coarse_modulus.max(k1.rho().get(phi[y], phi[w]));
                }
            }
        }
        let (_, sz_k1) = iterate(k1, (0..k1.len()).collect(), c * eps, delta1, exec);
        let (_, sz_k2) = iterate(k2, (0..k2.len()).collect(), eps, delta2, exec);
        let holds = sz_k1.le(&sz_k2);
        rows.push(QuotientRow {
            eps,
            scaled_eps: c * eps,
            delta1,
            delta2,
            matched: fibres_ok,
            coarse_modulus,
            sz_k1,
            sz_k2,
            holds,
        });
    }
    let violations = rows.iter().filter(|r| !r.holds).count();
    Ok(QuotientReport { name: name.to_string(), lip_phi, c, rows, violations })
}

pub fn default_quotient_eps() -> Vec<f64> {
    vec![0.4, 0.8, 1.6]
}

fn model(spec: ModelSpec) -> BitopModel {
    make_model(&spec).expect("corpus model")
}

/// The shipped map corpus: identities, symmetries, truncations, collapses
/// and constant maps.
pub fn quotient_corpus() -> Vec<QuotientCase> {
    let mut out = Vec::new();
    let identity = |name: &str, spec: ModelSpec| {
        let m = model(spec);
        QuotientCase { name: name.into(), phi: (0..m.len()).collect(), k1: m.clone(), k2: m }
    };
    out.push(identity("identity fan:8", ModelSpec::fan(8)));
    out.push(identity("identity cantor:4", ModelSpec::CantorTree { depth: 4 }));
    out.push(identity("identity seq:6", ModelSpec::ConvergentSequence { m: 6, gap: 1.0 }));
    out.push(identity("identity interval:21", ModelSpec::IntervalGrid { n: 21 }));

    let fan8 = model(ModelSpec::fan(8));
    let rotate: Vec<usize> = (0..9).map(|i| if i == 0 { 0 } else { i % 8 + 1 }).collect();
    out.push(QuotientCase { name: "fan:8 spike rotation".into(), k1: fan8.clone(), k2: fan8.clone(), phi: rotate });

    let c6 = model(ModelSpec::CantorTree { depth: 6 });
    let c4 = model(ModelSpec::CantorTree { depth: 4 });
    out.push(QuotientCase {
        name: "cantor:6 -> cantor:4 truncation".into(),
        k1: c4,
        k2: c6.clone(),
        phi: (0..64).map(|x| x >> 2).collect(),
    });
    out.push(QuotientCase {
        name: "cantor:6 -> fan:8 collapse".into(),
        k1: fan8.clone(),
        k2: c6,
        phi: (0..64).map(|x| if x == 0 { 0 } else { (x >> 3) + 1 }).collect(),
    });
    let point = model(ModelSpec::Discrete { n: 1 });
    out.push(QuotientCase { name: "fan:8 -> point".into(), k1: point, k2: fan8.clone(), phi: vec![0; 9] });
    let fan4 = model(ModelSpec::fan(4));
    out.push(QuotientCase {
        name: "fan:8 -> fan:4 fold".into(),
        k1: fan4,
        k2: fan8,
        phi: (0..9).map(|i| if i == 0 { 0 } else { (i - 1) % 4 + 1 }).collect(),
    });
    out
}
