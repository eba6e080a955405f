//! Acceptance criteria. Each criterion prints one `PASS` or `FAIL` line.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lipsub::convex::{lp_norm, PolyhedralNorm};
use lipsub::embed::{
    construct_c0, construct_ell1, embed_polyhedral_linf, filling_curve_demo, mazur_map, EmbedError, VerifyOptions,
};
use lipsub::exec::Exec;
use lipsub::frag::{
    check_quotient_monotonicity, default_quotient_eps, find_witness, lq_scaling_experiment, quotient_corpus,
    szlenk_index, ScalingConfig, Verdict,
};
use lipsub::metric::{make_model, mcshane_extend, pairwise_lip, BitopModel, FiniteMetric, ModelSpec};
use lipsub::report::{execute, RunConfig};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome { passed, detail: detail.into() }
}

fn within(elapsed: Duration, limit_s: f64) -> bool {
    elapsed.as_secs_f64() <= limit_s
}

fn random_coeffs(rng: &mut ChaCha8Rng, m: usize) -> Vec<f64> {
    (0..m).map(|_| rng.gen_range(-10.0..=10.0)).collect()
}

fn model(spec: &str) -> BitopModel {
    make_model(&spec.parse::<ModelSpec>().unwrap()).unwrap()
}

fn exact_isometries() -> Outcome {
    let opts = VerifyOptions { tests: 64, ..Default::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(1);

    let t = Instant::now();
    let c0 = construct_c0(&model("seq:6:1"), 0.125, None, None, &opts).unwrap();
    let mut c0_err: f64 = 0.0;
    for _ in 0..1000 {
        let a = random_coeffs(&mut rng, c0.basis.len());
        let target = a.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
        c0_err = c0_err.max((c0.basis.combine(&a).unwrap().sup_norm() - target).abs());
    }
    let c0_time = t.elapsed();

    let t = Instant::now();
    let k = model("cantor:4");
    let w = find_witness(&k, 0.25).unwrap().expect("cantor tree is not fragmentable");
    let l1 = construct_ell1(&k, &w, 4, &opts).unwrap();
    let mut l1_err: f64 = 0.0;
    for _ in 0..1000 {
        let a = random_coeffs(&mut rng, 4);
        let target: f64 = a.iter().map(|v| v.abs()).sum();
        l1_err = l1_err.max((l1.basis.combine(&a).unwrap().sup_norm() - target).abs());
    }
    let l1_time = t.elapsed();
    outcome(
        c0_err <= 1e-12 && l1_err <= 1e-12 && within(c0_time, 1.0) && within(l1_time, 1.0),
        format!(
            "c0 ({} fields) max err {c0_err:e} in {c0_time:?}; l1 max err {l1_err:e} in {l1_time:?}",
            c0.basis.len()
        ),
    )
}

fn lipschitz_bounds() -> Outcome {
    let opts = VerifyOptions { tests: 64, ..Default::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let eps = 0.125;
    let c0 = construct_c0(&model("seq:6:1"), eps, None, None, &opts).unwrap();
    let mut c0_bad = 0;
    let mut worst_ratio: f64 = 0.0;
    for _ in 0..1000 {
        let a = random_coeffs(&mut rng, c0.basis.len());
        let amax = a.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
        let l = c0.basis.combine(&a).unwrap().lip_d();
        worst_ratio = worst_ratio.max(l / amax);
        if l > 2.0 / eps * amax * (1.0 + 1e-12) {
            c0_bad += 1;
        }
    }
    let eps1 = 0.25;
    let k = model("cantor:4");
    let w = find_witness(&k, eps1).unwrap().unwrap();
    let l1 = construct_ell1(&k, &w, 4, &opts).unwrap();
    let l1_bad = l1.basis.fields.iter().filter(|f| f.lip_d() > (1.0 / eps1) * (1.0 + 1e-12)).count();
    outcome(
        c0_bad == 0 && l1_bad == 0,
        format!("c0: {c0_bad} violations (max L/max|a| = {worst_ratio}, bound {}); l1: {l1_bad} violations", 2.0 / eps),
    )
}

fn polyhedral_iff() -> Outcome {
    let t = Instant::now();
    let mut cases = 0;
    let mut bad = Vec::new();
    for name in ["l1:2", "linf:2", "linf:3", "hexagon"] {
        let norm = PolyhedralNorm::preset(name).unwrap();
        let faces = norm.face_count().unwrap();
        for n in 1..=6 {
            cases += 1;
            let res = embed_polyhedral_linf(&norm, n, &VerifyOptions::default());
            let ok = match res {
                Ok((_, r)) => 2 * n >= faces && r.isometry_defect <= 1e-9,
                Err(EmbedError::FacesExceedCapacity { .. }) => 2 * n < faces,
                Err(_) => false,
            };
            if !ok {
                bad.push(format!("{name}, n = {n}"));
            }
        }
    }
    let el = t.elapsed();
    outcome(bad.is_empty() && within(el, 1.0), format!("{cases} cases, failures {bad:?}, {el:?}"))
}

fn random_model(rng: &mut ChaCha8Rng) -> BitopModel {
    match rng.gen_range(0..4) {
        0 => model(&format!("interval:{}", rng.gen_range(2..60))),
        1 => model(&format!("cantor:{}", rng.gen_range(1..6))),
        2 => model(&format!(
            "lq:{}:{}:{}:{}",
            [1.0, 1.5, 2.0, 3.0][rng.gen_range(0..4)],
            rng.gen_range(1..4),
            rng.gen_range(5..80),
            rng.gen::<u32>()
        )),
        _ => {
            let n = rng.gen_range(2..40);
            let pts: Vec<Vec<f64>> = (0..n).map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
            let ids = (0..n).map(|i| i.to_string()).collect();
            let d = FiniteMetric::from_fn(ids, |i, j| {
                lp_norm(2.0, &[pts[i][0] - pts[j][0], pts[i][1] - pts[j][1], pts[i][2] - pts[j][2]])
            });
            BitopModel::new(d.clone(), d, 0.01).unwrap()
        }
    }
}

/// `|f(x) - f(y)| <= L d(x, y)` for every pair, up to the rounding of the
/// operands themselves (a few ulps of the largest one).
fn lipschitz_in_floats(m: &BitopModel, f: &[f64], l: f64) -> bool {
    let d = m.d();
    (0..f.len()).all(|x| {
        (x + 1..f.len()).all(|y| {
            let allowed = l * d.get(x, y);
            let scale = f[x].abs().max(f[y].abs()).max(allowed);
            (f[x] - f[y]).abs() <= allowed + 4.0 * f64::EPSILON * scale
        })
    })
}

fn extension_contract() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut restriction_bad = 0;
    let mut lip_bad = 0;
    for _ in 0..500 {
        let m = random_model(&mut rng);
        let n = m.len();
        let mut subset: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.3)).collect();
        if subset.is_empty() {
            subset.push(rng.gen_range(0..n));
        }
        let values: Vec<f64> = subset.iter().map(|_| rng.gen_range(-5.0..5.0)).collect();
        let sub = m.restrict(&subset).unwrap();
        let own = pairwise_lip(sub.d(), &values, Exec::default()).value;
        let l = own * rng.gen_range(1.0..2.0) + if own == 0.0 { 1.0 } else { 0.0 };
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let range = if rng.gen_bool(0.5) { (lo, hi) } else { (f64::NEG_INFINITY, f64::INFINITY) };
        let f = mcshane_extend(&m, &subset, &values, l, range).unwrap();
        if subset.iter().zip(&values).any(|(&h, v)| f.values()[h] != *v) {
            restriction_bad += 1;
        }
        if !lipschitz_in_floats(&m, f.values(), l) {
            lip_bad += 1;
        }
    }
    let el = t.elapsed();
    outcome(
        restriction_bad == 0 && lip_bad == 0 && within(el, 10.0),
        format!("500 instances: {restriction_bad} restriction, {lip_bad} Lipschitz violations, {el:?}"),
    )
}

fn mazur_identities() -> Outcome {
    let qs = [1.0, 1.5, 2.0, 3.0];
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    let mut odd_bad = 0;
    let mut pairs = 0;
    for &q1 in &qs {
        for &q2 in qs.iter().filter(|&&q2| q2 <= q1) {
            pairs += 1;
            for _ in 0..100_000 {
                let dim = rng.gen_range(1..=8);
                let x: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..=1.0)).collect();
                let y = mazur_map(&x, q1, q2).unwrap();
                let lhs: f64 = y.iter().map(|v| v.abs().powf(q2)).sum();
                let rhs: f64 = x.iter().map(|v| v.abs().powf(q1)).sum();
                worst = worst.max((lhs - rhs).abs());
                let neg: Vec<f64> = x.iter().map(|v| -v).collect();
                if mazur_map(&neg, q1, q2).unwrap().iter().zip(&y).any(|(a, b)| *a != -*b) {
                    odd_bad += 1;
                }
            }
        }
    }
    outcome(
        worst <= 1e-12 && odd_bad == 0,
        format!("{pairs} exponent pairs x 1e5 vectors: max power error {worst:e}, {odd_bad} oddness failures"),
    )
}

fn szlenk_engine() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    let mut timed = |name: &str, m: &BitopModel, eps: f64, delta: f64, expect: &dyn Fn(&Verdict) -> bool| {
        let t = Instant::now();
        let v = szlenk_index(m, eps, delta).unwrap().verdict;
        let el = t.elapsed();
        ok &= expect(&v) && within(el, 1.0);
        parts.push(format!("{name} {} ({el:?})", v.label()));
    };
    timed("fan:8", &model("fan:8"), 1.0, 0.05, &|v| *v == Verdict::Finite { index: 2 });
    timed("interval:1000", &model("interval:1000"), 0.1, 0.02, &|v| *v == Verdict::Finite { index: 1 });
    for depth in 2..=8 {
        let name = format!("cantor:{depth}");
        let m = model(&name);
        timed(&name, &m, 1.0, m.delta(), &|v| matches!(v, Verdict::NonFragmentable { .. }));
    }
    let eps = default_quotient_eps();
    let mut pairs = 0;
    let mut violations = 0;
    for case in quotient_corpus() {
        let r = check_quotient_monotonicity(&case.name, &case.k1, &case.k2, &case.phi, &eps, Exec::default()).unwrap();
        pairs += r.rows.len();
        violations += r.violations;
    }
    ok &= pairs >= 20 && violations == 0;
    parts.push(format!("quotient: {violations} violations over {pairs} pairs"));
    outcome(ok, parts.join("; "))
}

fn filling_curve() -> Outcome {
    let t = Instant::now();
    let rows = filling_curve_demo(&[1, 2, 3, 4, 5], &VerifyOptions::default()).unwrap();
    let el = t.elapsed();
    let ratios: Vec<f64> = rows.windows(3).map(|w| w[2].max_lip / w[0].max_lip).collect();
    let decreasing = rows.windows(2).all(|w| w[1].isometry_defect < w[0].isometry_defect);
    let circle = rows.iter().map(|r| r.circle_max_lip).fold(0.0, f64::max);
    outcome(
        ratios.len() >= 3
            && ratios.iter().all(|r| *r >= 1.8)
            && decreasing
            && circle <= std::f64::consts::PI + 0.01
            && within(el, 30.0),
        format!("two-level ratios {ratios:.3?}, defect decreasing {decreasing}, circle max {circle:.6}, {el:?}"),
    )
}

fn scaling_monotone() -> Outcome {
    let mut violations = 0;
    let mut slopes = Vec::new();
    for dim in [1, 2, 3] {
        let cfg = ScalingConfig { q_list: vec![1.0, 1.5, 2.0, 3.0], dims: vec![dim], ..Default::default() };
        let table = lq_scaling_experiment(&cfg, Exec::default()).unwrap();
        violations += table.monotonicity_violations;
        slopes.extend(table.fits.iter().map(|f| (f.q, f.dim, f.slope)));
    }
    outcome(violations == 0, format!("{violations} monotonicity violations; slopes (reported only) {slopes:?}"))
}

fn configs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn determinism() -> Outcome {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(configs_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    paths.sort();
    let mut bad = Vec::new();
    for p in &paths {
        let cfg = RunConfig::from_file(p).unwrap();
        let a = execute(&cfg).unwrap();
        let b = execute(&cfg).unwrap();
        let expected = if p.file_name().unwrap().to_string_lossy().starts_with("fail_") { 1 } else { 0 };
        if a.report_json() != b.report_json() || a.exit_code() != expected {
            bad.push(p.file_name().unwrap().to_string_lossy().into_owned());
        }
    }
    outcome(paths.len() >= 10 && bad.is_empty(), format!("{} configs, mismatches {bad:?}", paths.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("exact c0 and l1 isometries", exact_isometries),
        ("Lipschitz bounds of the bases", lipschitz_bounds),
        ("linf^n embedding iff 2n covers the facets", polyhedral_iff),
        ("extension contract", extension_contract),
        ("Mazur identities", mazur_identities),
        ("Szlenk engine and quotient monotonicity", szlenk_engine),
        ("filling-curve obstruction", filling_curve),
        ("index monotone in eps", scaling_monotone),
        ("deterministic reports", determinism),
    ];
    let mut failed = Vec::new();
    for (i, (name, f)) in criteria.iter().enumerate() {
        let o = f();
        println!("{} {}. {name}: {}", if o.passed { "PASS" } else { "FAIL" }, i + 1, o.detail);
        if !o.passed {
            failed.push(i + 1);
        }
    }
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
