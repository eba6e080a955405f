use std::f64::consts::PI;
use std::fs;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::svg::{Chart, Series};
use super::{Check, Outcome, RunConfig, RunError, Table};
use crate::convex::{self, lp_norm, sphere_grid, GeometryError, NormDocument, PolyhedralNorm, SourceNorm};
use crate::embed::{
    self, construct_c0, construct_ell1, embed_euclid2_circle, embed_euclid_via_cover, embed_polyhedral_bumps,
    embed_polyhedral_linf, example_c0_in_ball, filling_curve_demo, mazur_map, sphere_cover, test_vectors_for,
    transfer_lp, verify_isometry, EmbedError, EmbeddingMap, EmbeddingReport, VerifyOptions,
};
use crate::exec::Exec;
use crate::frag::{
    build_dyadic_families, check_quotient_monotonicity, default_quotient_eps, derive_once_with, find_witness_with,
    lq_scaling_experiment, quotient_corpus, szlenk_from, FragError, ScalingConfig,
};
use crate::metric::{
    closed_ball, make_model, mcshane_extend_with, pairwise_lip, validate_metric_with, BitopModel, MetricChoice,
    MetricError, ModelDocument, ModelSpec, ScalarField,
};

/// One row of `lipsub list`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CommandInfo {
    pub command: &'static str,
    pub operation: &'static str,
    pub anchor: &'static str,
}

const COMMANDS: &[(&str, &str, &str)] = &[
    ("validate", "validate_metric", "metric axioms of the coarse and fine metrics"),
    ("lip", "lip_constant", "Lipschitz constant of a field"),
    ("extend", "mcshane_extend", "Lipschitz extension with range clamping"),
    ("ball", "closed_ball", "closed fine balls around a set"),
    ("model", "make_model", "bitopological model generators"),
    ("norm", "norm_eval", "polyhedral norm evaluation"),
    ("polar", "polar_vertices", "extreme points of the dual ball"),
    ("faces", "face_count", "facet count of a polyhedral ball"),
    ("sphere-grid", "sphere_grid", "deterministic unit sphere grids"),
    ("embed circle", "embed_euclid2_circle", "Euclidean plane on the circle"),
    ("embed linf", "embed_polyhedral_linf", "polyhedral space into linf^n iff 2n covers the facets"),
    ("embed bumps", "embed_polyhedral_bumps", "polyhedral space on disjoint bumps"),
    ("c0-construct", "construct_c0", "isometric c0 from a separated sequence"),
    ("ell1", "construct_ell1", "isometric l1 from a non-fragmentable set"),
    ("c0-ball", "example_c0_in_ball", "squared coordinates on the Euclidean ball"),
    ("mazur", "mazur_map", "Mazur map between l_q spheres"),
    ("transfer", "transfer_lp", "l_p copies pushed through the Mazur map"),
    ("sphere-cover", "sphere_cover", "stereographic cover of the sphere"),
    ("embed cover", "embed_euclid_via_cover", "Euclidean space via a sphere cover"),
    ("filling-curve", "filling_curve_demo", "filling-curve obstruction for Euclidean 3-space"),
    ("verify", "verify_isometry", "extreme point test for isometric embeddings"),
    ("derive", "derive_once", "one Szlenk derivation step"),
    ("szlenk", "szlenk_index", "Szlenk index by exhaustive derivation"),
    ("witness", "find_witness", "non-fragmentability witness"),
    ("dyadic", "build_dyadic_families", "dyadic families inside a witness"),
    ("quotient-check", "check_quotient_monotonicity", "index monotonicity under Lipschitz quotients"),
    ("lq-scaling", "lq_scaling_experiment", "index growth on l_q balls"),
];

/// Every command with the operation it wraps and a short description.
pub fn list_commands() -> Vec<CommandInfo> {
    COMMANDS.iter().map(|&(command, operation, anchor)| CommandInfo { command, operation, anchor }).collect()
}

enum Failure {
    Run(RunError),
    Lib(String),
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        Failure::Run(e)
    }
}

macro_rules! lib_error {
    ($($t:ty),*) => {$(
        impl From<$t> for Failure {
            fn from(e: $t) -> Self {
                Failure::Lib(e.to_string())
            }
        }
    )*};
}
lib_error!(MetricError, GeometryError, EmbedError, FragError);

type Res = Result<Outcome, Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Run(RunError::Usage(msg.into()))
}

fn need<T>(v: Option<T>, flag: &str, command: &str) -> Result<T, Failure> {
    v.ok_or_else(|| usage(format!("`{command}` needs --{flag}")))
}

fn num(x: f64) -> String {
    format!("{x}")
}

fn vec_str(x: &[f64]) -> String {
    x.iter().map(|v| num(*v)).collect::<Vec<_>>().join(" ")
}

fn to_value<T: Serialize>(t: &T) -> Value {
    serde_json::to_value(t).expect("serializable")
}

/// An embedding as stored on disk: the model (by generator when known),
/// `psi`, and the source norm. `p = null` stands for `p = ∞`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EmbeddingDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    model_spec: Option<ModelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    model: Option<ModelDocument>,
    psi: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lp: Option<LpDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    polyhedral: Option<NormDocument>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LpDoc {
    p: Option<f64>,
    dim: usize,
}

impl EmbeddingDocument {
    fn of(map: &EmbeddingMap) -> Self {
        let spec = map.model().spec().cloned();
        let model = if spec.is_none() { Some(map.model().to_document()) } else { None };
        let (lp, polyhedral) = match map.norm() {
            SourceNorm::Lp { p, dim } => (Some(LpDoc { p: p.is_finite().then_some(*p), dim: *dim }), None),
            SourceNorm::Polyhedral(n) => (None, Some(n.to_document())),
        };
        EmbeddingDocument { model_spec: spec, model, psi: map.psi().to_vec(), lp, polyhedral }
    }

    fn into_map(self) -> Result<EmbeddingMap, Failure> {
        let model = match (self.model_spec, self.model) {
            (_, Some(doc)) => BitopModel::from_document(doc)?,
            (Some(spec), None) => make_model(&spec)?,
            (None, None) => return Err(usage("embedding file names no model")),
        };
        let norm = match (self.lp, self.polyhedral) {
            (Some(lp), None) => SourceNorm::Lp { p: lp.p.unwrap_or(f64::INFINITY), dim: lp.dim },
            (None, Some(doc)) => SourceNorm::Polyhedral(PolyhedralNorm::from_document(doc)?),
            _ => return Err(usage("embedding file needs exactly one of `lp`, `polyhedral`")),
        };
        Ok(EmbeddingMap::new(&model, self.psi, norm)?)
    }

    fn to_json(&self) -> String {
        let mut s = serde_json::to_string(self).expect("serializable");
        s.push('\n');
        s
    }
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    cmd: &'a str,
    exec: Exec,
    opts: VerifyOptions,
    out: Outcome,
}

impl<'a> Ctx<'a> {
    fn need<T: Clone>(&self, v: &Option<T>, flag: &str) -> Result<T, Failure> {
        need(v.clone(), flag, self.cmd)
    }

    fn model(&self, default: Option<&str>) -> Result<BitopModel, Failure> {
        if let Some(path) = &self.cfg.model_file {
            let s = fs::read_to_string(path).map_err(|e| RunError::Io(format!("{}: {e}", path.display())))?;
            return Ok(BitopModel::from_json(&s)?);
        }
        let spec = self
            .cfg
            .model
            .as_deref()
            .or(default)
            .ok_or_else(|| usage(format!("`{}` needs --model or --model-file", self.cmd)))?;
        let spec: ModelSpec = spec.parse().map_err(|e: MetricError| usage(e.to_string()))?;
        Ok(make_model(&spec)?)
    }

    fn norm(&self) -> Result<PolyhedralNorm, Failure> {
        if let Some(path) = &self.cfg.norm_file {
            let s = fs::read_to_string(path).map_err(|e| RunError::Io(format!("{}: {e}", path.display())))?;
            let doc: NormDocument = serde_json::from_str(&s).map_err(|e| usage(format!("{}: {e}", path.display())))?;
            return Ok(PolyhedralNorm::from_document(doc)?);
        }
        let name = self.need(&self.cfg.norm, "norm")?;
        PolyhedralNorm::preset(&name).map_err(|e| usage(e.to_string()))
    }

    fn tol(&self, default: f64) -> f64 {
        self.cfg.tolerance.unwrap_or(default)
    }

    fn check(&mut self, name: &str, passed: bool, detail: impl Into<String>) {
        self.out.checks.push(Check::new(name, passed, detail));
    }

    fn result(&mut self, v: Value) {
        self.out.result = v;
    }

    fn embedding_file(&mut self, map: &EmbeddingMap) {
        self.out.files.push(("embedding.json".into(), EmbeddingDocument::of(map).to_json()));
    }

    fn defect_check(&mut self, report: &EmbeddingReport, tol: f64) {
        let d = report.isometry_defect;
        self.check("isometry defect", d <= tol, format!("defect {d:e} vs tolerance {tol:e}"));
    }

    fn done(self) -> Res {
        Ok(self.out)
    }
}

fn vector_table(name: &str, rows: &[Vec<f64>]) -> Table {
    let dim = rows.first().map_or(0, |r| r.len());
    let headers: Vec<String> = std::iter::once("index".to_string()).chain((0..dim).map(|k| format!("x{k}"))).collect();
    let mut t = Table { name: name.into(), headers, rows: Vec::new() };
    for (i, r) in rows.iter().enumerate() {
        t.push(std::iter::once(i.to_string()).chain(r.iter().map(|v| num(*v))));
    }
    t
}

fn field_table(f: &ScalarField) -> Table {
    let mut t = Table::new("field", &["index", "id", "value"]);
    for (i, (id, v)) in f.model().ids().iter().zip(f.values()).enumerate() {
        t.push([i.to_string(), id.clone(), num(*v)]);
    }
    t
}

/// Dispatches one command.
pub(super) fn dispatch(cfg: &RunConfig) -> Result<Outcome, RunError> {
    let cmd = cfg.command.trim().to_string();
    let mut stored = cfg.clone();
    stored.out = None;
    stored.command = cmd.clone();
    let exec = if cfg.sequential { Exec::Sequential } else { Exec::default() };
    let ctx = Ctx {
        cfg,
        cmd: &cmd,
        exec,
        opts: VerifyOptions { tests: cfg.tests.unwrap_or(embed::DEFAULT_TESTS), seed: cfg.seed.unwrap_or(0), exec },
        out: Outcome {
            command: cmd.clone(),
            config: stored,
            result: Value::Null,
            checks: Vec::new(),
            tables: Vec::new(),
            charts: Vec::new(),
            files: Vec::new(),
        },
    };
    let fallback = ctx.out.clone();
    let res = match cmd.as_str() {
        "list" => list(ctx),
        "validate" => validate(ctx),
        "lip" => lip(ctx),
        "extend" => extend(ctx),
        "ball" => ball(ctx),
        "model" => model(ctx),
        "norm" => norm(ctx),
        "polar" => polar(ctx),
        "faces" => faces(ctx),
        "sphere-grid" => sphere_grid_cmd(ctx),
        "embed circle" => embed_circle(ctx),
        "embed linf" => embed_linf(ctx),
        "embed bumps" => embed_bumps(ctx),
        "embed cover" => embed_cover(ctx),
        "c0-construct" => c0_construct(ctx),
        "ell1" => ell1(ctx),
        "c0-ball" => c0_ball(ctx),
        "mazur" => mazur(ctx),
        "transfer" => transfer(ctx),
        "sphere-cover" => sphere_cover_cmd(ctx),
        "filling-curve" => filling_curve(ctx),
        "verify" => verify(ctx),
        "derive" => derive(ctx),
        "szlenk" => szlenk(ctx),
        "witness" => witness(ctx),
        "dyadic" => dyadic(ctx),
        "quotient-check" => quotient_check(ctx),
        "lq-scaling" => lq_scaling(ctx),
        _ => return Err(RunError::UnknownCommand(cmd)),
    };
    match res {
        Ok(o) => Ok(o),
        Err(Failure::Run(e)) => Err(e),
        Err(Failure::Lib(msg)) => {
            let mut o = fallback;
            o.result = json!({ "error": msg });
            o.checks.push(Check::new("completed", false, msg));
            Ok(o)
        }
    }
}

fn list(mut c: Ctx) -> Res {
    let rows = list_commands();
    let mut t = Table::new("commands", &["command", "operation", "anchor"]);
    for r in &rows {
        t.push([r.command.to_string(), r.operation.to_string(), r.anchor.to_string()]);
    }
    c.out.tables.push(t);
    c.result(json!({ "commands": rows }));
    c.done()
}

fn validate(mut c: Ctx) -> Res {
    let m = c.model(None)?;
    let rho = validate_metric_with(m.rho(), c.exec);
    let d = validate_metric_with(m.d(), c.exec);
    c.check("rho is a metric", rho.is_valid(), format!("{} violations", rho.violations.len()));
    c.check("d is a metric", d.is_valid(), format!("{} violations", d.violations.len()));
    c.result(json!({ "points": m.len(), "delta": m.delta(), "rho": rho, "d": d }));
    c.done()
}

fn lip(mut c: Ctx) -> Res {
    let m = c.model(None)?;
    let values = c.need(&c.cfg.values, "values")?;
    let choice = match c.cfg.metric.as_deref().unwrap_or("fine") {
        "fine" => MetricChoice::Fine,
        "coarse" => MetricChoice::Coarse,
        other => return Err(usage(format!("--metric must be fine or coarse, got {other}"))),
    };
    let f = ScalarField::new(&m, values)?;
    let w = pairwise_lip(m.metric(choice), f.values(), c.exec);
    c.check("finite", w.value.is_finite(), num(w.value));
    c.result(json!({ "metric": choice, "lip": w.value, "pair": w.pair }));
    c.done()
}

fn extend(mut c: Ctx) -> Res {
    let m = c.model(None)?;
    let subset = c.need(&c.cfg.subset, "subset")?;
    let values = c.need(&c.cfg.values, "values")?;
    let l = c.need(&c.cfg.lip, "lip")?;
    let range = match c.cfg.range.as_deref() {
        None => (f64::NEG_INFINITY, f64::INFINITY),
        Some([a, b]) => (*a, *b),
        Some(_) => return Err(usage("--range takes two values a,b")),
    };
    let f = mcshane_extend_with(&m, &subset, &values, l, range, c.exec)?;
    let exact = subset.iter().zip(&values).all(|(&h, v)| f.values()[h] == *v);
    let fl = pairwise_lip(m.d(), f.values(), c.exec).value;
    let in_range = f.values().iter().all(|v| range.0 <= *v && *v <= range.1);
    c.check("restriction exact", exact, "values on the subset are unchanged");
    c.check("lipschitz bound", fl <= l * (1.0 + 1e-12) + 1e-12, format!("L = {fl} vs {l}"));
    c.check("range", in_range, format!("[{}, {}]", range.0, range.1));
    c.out.tables.push(field_table(&f));
    c.result(json!({ "lip": fl, "values": f.values() }));
    c.done()
}

fn ball(mut c: Ctx) -> Res {
    let m = c.model(None)?;
    let subset = c.need(&c.cfg.subset, "subset")?;
    let r = c.need(&c.cfg.radius, "radius")?;
    let b = closed_ball(&m, &subset, r)?;
    c.check("contains the centre set", subset.iter().all(|h| b.contains(h)), format!("{} points", b.len()));
    c.result(json!({ "radius": r, "ball": b }));
    c.done()
}

fn model(mut c: Ctx) -> Res {
    let m = c.model(None)?;
    let rho = validate_metric_with(m.rho(), c.exec);
    let d = validate_metric_with(m.d(), c.exec);
    c.check("rho is a metric", rho.is_valid(), format!("{} violations", rho.violations.len()));
    c.check("d is a metric", d.is_valid(), format!("{} violations", d.violations.len()));
    c.out.files.push(("model.json".into(), format!("{}\n", m.to_json())));
    c.result(json!({
        "spec": m.spec().map(|s| s.to_string()),
        "points": m.len(),
        "delta": m.delta(),
        "rho_diameter": m.rho().diameter(),
        "d_diameter": m.d().diameter(),
        "d_min_separation": m.d().min_separation(),
    }));
    c.done()
}

fn norm(mut c: Ctx) -> Res {
    let n = c.norm()?;
    let x = c.need(&c.cfg.x, "x")?;
    let v = n.norm_eval(&x)?;
    let neg: Vec<f64> = x.iter().map(|a| -a).collect();
    let w = n.norm_eval(&neg)?;
    c.check("symmetric", (v - w).abs() <= 1e-12 * (1.0 + v), format!("{v} vs {w}"));
    c.result(json!({ "norm": v, "dual_norm": n.dual_norm(&x)? }));
    c.done()
}

fn polar(mut c: Ctx) -> Res {
    let n = c.norm()?;
    let dual = n.polar_vertices()?;
    let on_sphere = dual.ext_points.iter().all(|y| (n.dual_norm(y).unwrap_or(f64::NAN) - 1.0).abs() <= 1e-9);
    c.check("extreme points on the dual sphere", on_sphere, format!("{} points", dual.ext_points.len()));
    c.out.tables.push(vector_table("polar_vertices", &dual.ext_points));
    c.result(to_value(&dual));
    c.done()
}

fn faces(mut c: Ctx) -> Res {
    let n = c.norm()?;
    let f = n.face_count()?;
    let ext = n.polar_vertices()?.ext_points.len();
    c.check("facets match dual extreme points", f == ext, format!("{f} facets, {ext} dual extreme points"));
    c.result(json!({ "face_count": f }));
    c.done()
}

fn sphere_grid_cmd(mut c: Ctx) -> Res {
    let n = c.need(&c.cfg.n, "n")?;
    let res = c.need(&c.cfg.grid, "grid")?;
    let pts = sphere_grid(n, res)?;
    let worst = pts.iter().map(|p| (lp_norm(2.0, p) - 1.0).abs()).fold(0.0, f64::max);
    c.check("unit vectors", worst <= 1e-12, format!("max |‖p‖ - 1| = {worst:e}"));
    c.out.tables.push(vector_table("sphere_grid", &pts));
    c.result(json!({ "n": n, "resolution": res, "points": pts.len() }));
    c.done()
}

fn embed_circle(mut c: Ctx) -> Res {
    let grid = c.cfg.grid.unwrap_or(10_000);
    let (map, r) = embed_euclid2_circle(grid, &c.opts)?;
    let tol = c.tol(1e-7);
    c.defect_check(&r, tol);
    c.check("lipschitz ratio", r.max_lip <= PI + 0.01, format!("max L(Jx)/‖x‖ = {}", r.max_lip));
    c.embedding_file(&map);
    c.result(json!({ "construction": "circle", "grid": grid, "report": r }));
    c.done()
}

fn embed_linf(mut c: Ctx) -> Res {
    let norm = c.norm()?;
    let n = c.need(&c.cfg.n, "n")?;
    let faces = norm.face_count()?;
    match embed_polyhedral_linf(&norm, n, &c.opts) {
        Ok((map, r)) => {
            c.check("capacity", 2 * n >= faces, format!("{faces} facets, 2n = {}", 2 * n));
            let tol = c.tol(1e-9);
            c.defect_check(&r, tol);
            c.embedding_file(&map);
            c.result(json!({ "construction": "linf", "n": n, "face_count": faces, "report": r }));
        }
        Err(EmbedError::FacesExceedCapacity { faces, capacity }) => {
            c.check("capacity", capacity < faces, format!("{faces} facets exceed 2n = {capacity}"));
            c.result(json!({
                "construction": "linf",
                "n": n,
                "face_count": faces,
                "error": EmbedError::FacesExceedCapacity { faces, capacity }.to_string(),
            }));
        }
        Err(e) => return Err(e.into()),
    }
    c.done()
}

fn embed_bumps(mut c: Ctx) -> Res {
    let norm = c.norm()?;
    let m = c.model(None)?;
    let sites = c.need(&c.cfg.sites, "sites")?;
    let b = embed_polyhedral_bumps(&norm, &m, &sites, &c.opts)?;
    let tol = c.tol(1e-9);
    c.defect_check(&b.report, tol);
    let worst = b.bumps.iter().map(|f| f.lip_d()).fold(0.0, f64::max);
    c.check(
        "bump lipschitz bound",
        worst <= (1.0 / b.radius) * (1.0 + 1e-12),
        format!("max L = {worst}, 1/r = {}", 1.0 / b.radius),
    );
    c.embedding_file(&b.map);
    c.result(json!({ "construction": "bumps", "radius": b.radius, "report": b.report }));
    c.done()
}

fn embed_cover(mut c: Ctx) -> Res {
    let n = c.cfg.n.unwrap_or(1);
    let m = c.model(Some("cube:2:64"))?;
    let grid = c.cfg.grid.unwrap_or(64);
    let (map, r) = embed_euclid_via_cover(n, &m, grid, &c.opts)?;
    let tol = c.tol(0.1);
    c.defect_check(&r, tol);
    c.embedding_file(&map);
    c.result(json!({ "construction": "sphere cover", "n": n, "grid": grid, "report": r }));
    c.done()
}

/// Random coefficient vectors in `[-1, 1]^m`.
fn random_coeffs(m: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| (0..m).map(|_| rng.gen_range(-1.0..=1.0)).collect()).collect()
}

fn basis_checks(c: &mut Ctx, basis: &embed::SubspaceBasis, lip_factor: f64) -> Result<Value, Failure> {
    let trials = c.cfg.tests.unwrap_or(1000);
    let coeffs = random_coeffs(basis.len(), trials, c.opts.seed);
    let mut worst_norm: f64 = 0.0;
    let mut lip_violations = 0;
    for a in &coeffs {
        let f = basis.combine(a)?;
        let target = basis.target_norm(a);
        worst_norm = worst_norm.max((f.sup_norm() - target).abs());
        let bound = lip_factor * a.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
        if f.lip_d() > bound * (1.0 + 1e-12) + 1e-12 {
            lip_violations += 1;
        }
    }
    let tol = c.tol(1e-12);
    c.check("norm identity", worst_norm <= tol, format!("max error {worst_norm:e} over {trials} vectors"));
    c.check("lipschitz bound", lip_violations == 0, format!("{lip_violations} violations"));
    Ok(json!({ "trials": trials, "max_norm_error": worst_norm, "lip_violations": lip_violations }))
}

fn coeff_result(basis: &embed::SubspaceBasis, coeffs: Option<&[f64]>) -> Result<Value, Failure> {
    let Some(a) = coeffs else { return Ok(Value::Null) };
    if a.len() > basis.len() {
        return Err(usage(format!("{} coefficients for a basis of {}", a.len(), basis.len())));
    }
    let mut full = a.to_vec();
    full.resize(basis.len(), 0.0);
    let f = basis.combine(&full)?;
    Ok(json!({ "coeffs": full, "sup_norm": f.sup_norm(), "target_norm": basis.target_norm(&full), "lip": f.lip_d() }))
}

fn c0_construct(mut c: Ctx) -> Res {
    let m = c.model(Some("seq:6:1"))?;
    let eps = c.cfg.eps.unwrap_or(0.125);
    let built = construct_c0(&m, eps, None, None, &c.opts)?;
    let checks = basis_checks(&mut c, &built.basis, 2.0 / eps)?;
    let combo = coeff_result(&built.basis, c.cfg.coeffs.as_deref())?;
    c.result(json!({
        "construction": "c0",
        "eps": eps,
        "t0": built.t0,
        "centres": built.centres,
        "random": checks,
        "combination": combo,
        "report": built.report,
    }));
    c.done()
}

fn ell1(mut c: Ctx) -> Res {
    let m = c.model(Some("cantor:4"))?;
    let eps = c.cfg.eps.unwrap_or(0.25);
    let depth = c.cfg.depth.unwrap_or(4);
    let Some(w) = find_witness_with(&m, eps, c.exec)? else {
        return Err(Failure::Lib(format!("no non-fragmentability witness at eps = {eps}")));
    };
    let built = construct_ell1(&m, &w, depth, &c.opts)?;
    let worst = built.basis.fields.iter().map(|f| f.lip_d()).fold(0.0, f64::max);
    c.check(
        "field lipschitz bound",
        worst <= (1.0 / eps) * (1.0 + 1e-12),
        format!("max L(f_n) = {worst}, 1/eps = {}", 1.0 / eps),
    );
    let trials = c.cfg.tests.unwrap_or(1000);
    let coeffs = random_coeffs(built.basis.len(), trials, c.opts.seed);
    let mut worst_norm: f64 = 0.0;
    for a in &coeffs {
        let f = built.basis.combine(a)?;
        worst_norm = worst_norm.max((f.sup_norm() - built.basis.target_norm(a)).abs());
    }
    let tol = c.tol(1e-12);
    c.check("norm identity", worst_norm <= tol, format!("max error {worst_norm:e} over {trials} vectors"));
    let combo = coeff_result(&built.basis, c.cfg.coeffs.as_deref())?;
    if let Some(sup) = combo.get("sup_norm").and_then(Value::as_f64) {
        let target = combo["target_norm"].as_f64().unwrap_or(f64::NAN);
        c.check("given coefficients", (sup - target).abs() <= tol, format!("sup {sup} vs sum |a_n| {target}"));
    }
    let mut t = Table::new("leaves", &["point", "signs"]);
    for (h, s) in built.h.iter().zip(&built.signs) {
        t.push([h.to_string(), vec_str(s)]);
    }
    c.out.tables.push(t);
    let fields: Vec<&[f64]> = built.basis.fields.iter().map(|f| f.values()).collect();
    c.result(json!({
        "construction": "ell1",
        "eps": eps,
        "depth": depth,
        "witness": w.subset(),
        "witness_delta": w.delta(),
        "leaves": built.h,
        "field_lip_max": worst,
        "random": { "trials": trials, "max_norm_error": worst_norm },
        "combination": combo,
        "fields": fields,
        "report": built.report,
    }));
    c.done()
}

fn c0_ball(mut c: Ctx) -> Res {
    let dim = c.cfg.dim.unwrap_or(8);
    let samples = c.cfg.samples.unwrap_or(500);
    let seed = c.cfg.seed.unwrap_or(0);
    let coeffs = c.cfg.coeffs.clone().unwrap_or_else(|| vec![1.0]);
    let (_, checks) = example_c0_in_ball(dim, samples, seed, &coeffs)?;
    c.check("sup bound", checks.within_sup_bound, format!("sup {} vs max |a_k| {}", checks.sup, checks.coeff_max));
    c.check("lipschitz bound", checks.within_lip_bound, format!("L {} vs 2 max |a_k|", checks.lip));
    c.result(to_value(&checks));
    c.done()
}

fn mazur(mut c: Ctx) -> Res {
    let x = c.need(&c.cfg.x, "x")?;
    let q1 = c.need(&c.cfg.q, "q")?;
    let q2 = c.need(&c.cfg.q2, "q2")?;
    let y = mazur_map(&x, q1, q2)?;
    let lhs = y.iter().map(|v| v.abs().powf(q2)).sum::<f64>();
    let rhs = x.iter().map(|v| v.abs().powf(q1)).sum::<f64>();
    let neg: Vec<f64> = x.iter().map(|v| -v).collect();
    let odd = mazur_map(&neg, q1, q2)?.iter().zip(&y).all(|(a, b)| *a == -*b);
    let tol = c.tol(1e-12);
    c.check("power identity", (lhs - rhs).abs() <= tol, format!("{lhs} vs {rhs}"));
    c.check("odd", odd, "Φ(-x) = -Φ(x)");
    c.result(json!({ "q1": q1, "q2": q2, "image": y, "lipschitz_direction": q2 <= q1 }));
    c.done()
}

fn transfer(mut c: Ctx) -> Res {
    let m = c.model(Some("lq:2:3:2000:3"))?;
    let dim = c.cfg.dim.unwrap_or(3);
    let q = c.cfg.q.unwrap_or(2.0);
    let q2 = c.cfg.q2.unwrap_or(1.0);
    let (map, r) = transfer_lp(&m, dim, q, q2, &c.opts)?;
    let tol = c.tol(0.2);
    c.defect_check(&r, tol);
    c.embedding_file(&map);
    c.result(
        json!({ "construction": "mazur transfer", "q": q, "q_prime": q2, "p": convex::conjugate(q2), "report": r }),
    );
    c.done()
}

fn sphere_cover_cmd(mut c: Ctx) -> Res {
    let n = c.cfg.n.unwrap_or(1);
    let grid = c.cfg.grid.unwrap_or(64);
    let cov = sphere_cover(n, grid, c.exec)?;
    c.check(
        "coverage",
        cov.coverage_defect <= cov.coverage_bound,
        format!("{} vs 2π/grid = {}", cov.coverage_defect, cov.coverage_bound),
    );
    let mut t = Table::new("sphere_cover", &["index", "domain", "image"]);
    for (i, (a, p)) in cov.domain.iter().zip(&cov.image).enumerate() {
        t.push([i.to_string(), vec_str(a), vec_str(p)]);
    }
    c.out.tables.push(t);
    c.result(json!({
        "n": n,
        "grid": grid,
        "lip": cov.lip,
        "coverage_defect": cov.coverage_defect,
        "coverage_bound": cov.coverage_bound,
    }));
    c.done()
}

fn filling_curve(mut c: Ctx) -> Res {
    let levels = c.cfg.levels.clone().unwrap_or_else(|| vec![1, 2, 3, 4, 5]);
    let rows = filling_curve_demo(&levels, &c.opts)?;
    let mut growth = Vec::new();
    for (i, a) in rows.iter().enumerate() {
        if let Some(b) = rows[i + 1..].iter().find(|b| b.level == a.level + 2) {
            growth.push(json!({ "from": a.level, "to": b.level, "ratio": b.max_lip / a.max_lip }));
        }
    }
    let ratios: Vec<f64> = growth.iter().filter_map(|g| g["ratio"].as_f64()).collect();
    c.check(
        "lipschitz growth",
        ratios.len() >= 3 && ratios.iter().all(|r| *r >= 1.8),
        format!("two-level ratios {ratios:?}"),
    );
    let decreasing = rows.windows(2).all(|w| w[1].isometry_defect < w[0].isometry_defect);
    c.check(
        "defect decreasing",
        decreasing,
        format!("{:?}", rows.iter().map(|r| r.isometry_defect).collect::<Vec<_>>()),
    );
    let circle = rows.iter().map(|r| r.circle_max_lip).fold(0.0, f64::max);
    c.check("circle bounded", circle <= PI + 0.01, format!("max circle ratio {circle}"));
    let mut t = Table::new("filling_curve", &["level", "points", "max_lip", "isometry_defect", "circle_max_lip"]);
    for r in &rows {
        t.push([
            r.level.to_string(),
            r.points.to_string(),
            num(r.max_lip),
            num(r.isometry_defect),
            num(r.circle_max_lip),
        ]);
    }
    c.out.tables.push(t);
    let series = |name: &str, f: &dyn Fn(&embed::FillingRow) -> f64| Series {
        name: name.into(),
        points: rows.iter().map(|r| (r.level as f64, f(r))).collect(),
    };
    c.out.charts.push((
        "filling_curve".into(),
        Chart {
            title: "Lipschitz ratio and defect by refinement".into(),
            x_label: "level".into(),
            y_label: "value".into(),
            log_x: false,
            log_y: true,
            series: vec![
                series("curve max L", &|r| r.max_lip),
                series("circle max L", &|r| r.circle_max_lip),
                series("curve defect", &|r| r.isometry_defect),
            ],
        },
    ));
    c.result(json!({ "rows": rows, "growth": growth }));
    c.done()
}

fn verify(mut c: Ctx) -> Res {
    let path = c.need(&c.cfg.embedding_file, "embedding-file")?;
    let s = fs::read_to_string(&path).map_err(|e| RunError::Io(format!("{}: {e}", path.display())))?;
    let doc: EmbeddingDocument = serde_json::from_str(&s).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let mut map = doc.into_map()?;
    if let Some(s) = c.cfg.scale {
        map = map.scaled(s)?;
    }
    let tests = test_vectors_for(map.norm(), c.opts.tests, c.opts.seed);
    let dual = match map.norm() {
        SourceNorm::Polyhedral(_) => map.norm().dual_extreme_points(),
        SourceNorm::Lp { p, dim } if *p == 2.0 && (2..=3).contains(dim) => Some(sphere_grid(dim - 1, 64)?),
        _ => map.norm().dual_extreme_points(),
    };
    let r = verify_isometry(&map, &tests, dual.as_deref(), c.exec)?;
    let tol = c.tol(1e-9);
    c.defect_check(&r, tol);
    c.result(json!({ "source": map.norm().describe(), "points": map.model().len(), "report": r }));
    c.done()
}

fn start_set(c: &Ctx, m: &BitopModel) -> Vec<usize> {
    c.cfg.subset.clone().unwrap_or_else(|| (0..m.len()).collect())
}

fn derive(mut c: Ctx) -> Res {
    let m = c.model(None)?;
    let eps = c.need(&c.cfg.eps, "eps")?;
    let delta = c.cfg.delta.unwrap_or(eps / 4.0);
    let a = start_set(&c, &m);
    let next = derive_once_with(&m, &a, eps, delta, c.exec)?;
    c.check(
        "derived set is a subset",
        next.iter().all(|x| a.contains(x)),
        format!("{} -> {} points", a.len(), next.len()),
    );
    c.result(json!({ "eps": eps, "delta": delta, "input": a, "derived": next }));
    c.done()
}

fn szlenk(mut c: Ctx) -> Res {
    let m = c.model(None)?;
    let eps = c.need(&c.cfg.eps, "eps")?;
    let delta = c.cfg.delta.unwrap_or_else(|| m.delta().min(eps / 4.0));
    let start = start_set(&c, &m);
    let trace = szlenk_from(&m, &start, eps, delta, c.exec)?;
    let nested = trace.levels.windows(2).all(|w| w[1].len() < w[0].len() && w[1].iter().all(|x| w[0].contains(x)));
    c.check("strictly nested cascade", nested, format!("{} levels", trace.levels.len()));
    let label = m.spec().map_or_else(|| "file".to_string(), |s| s.to_string());
    let mut t = Table::new("cascade", &["model", "eps", "delta", "level", "size"]);
    for (k, a) in trace.levels.iter().enumerate() {
        t.push([label.clone(), num(eps), num(delta), k.to_string(), a.len().to_string()]);
    }
    c.out.tables.push(t);
    c.out.charts.push((
        "cascade".into(),
        Chart {
            title: format!("derivation cascade, {label}, eps = {eps}"),
            x_label: "level".into(),
            y_label: "|A_k|".into(),
            log_x: false,
            log_y: false,
            series: vec![Series {
                name: label.clone(),
                points: trace.levels.iter().enumerate().map(|(k, a)| (k as f64, a.len() as f64)).collect(),
            }],
        },
    ));
    let sizes: Vec<usize> = trace.levels.iter().map(Vec::len).collect();
    c.result(json!({
        "model": label,
        "eps": eps,
        "delta": delta,
        "verdict": trace.verdict,
        "label": trace.verdict.label(),
        "level_sizes": sizes,
    }));
    c.done()
}

fn witness(mut c: Ctx) -> Res {
    let m = c.model(None)?;
    let eps = c.need(&c.cfg.eps, "eps")?;
    let w = find_witness_with(&m, eps, c.exec)?;
    match &w {
        Some(w) => {
            let ok = w.min_diameter() >= 3.0 * eps - crate::AXIOM_TOL;
            c.check("certified", ok, format!("min resolved diameter {} vs 3 eps", w.min_diameter()));
        }
        None => c.check("certified", true, "derivation at 3 eps empties the model"),
    }
    c.result(json!({ "eps": eps, "delta": crate::frag::witness_delta(&m, eps), "witness": w }));
    c.done()
}

fn dyadic(mut c: Ctx) -> Res {
    let m = c.model(None)?;
    let eps = c.need(&c.cfg.eps, "eps")?;
    let depth = c.need(&c.cfg.depth, "depth")?;
    let Some(w) = find_witness_with(&m, eps, c.exec)? else {
        return Err(Failure::Lib(format!("no non-fragmentability witness at eps = {eps}")));
    };
    let fam = build_dyadic_families(&m, &w, depth)?;
    let problems = fam.check_invariants(&m);
    let detail = if problems.is_empty() { "all hold".to_string() } else { problems.join("; ") };
    c.check("family invariants", problems.is_empty(), detail);
    let mut t = Table::new("dyadic", &["address", "x", "v", "u"]);
    for node in fam.levels.iter().flatten() {
        let ids = |s: &[usize]| s.iter().map(usize::to_string).collect::<Vec<_>>().join(" ");
        t.push([node.address.clone(), node.x.to_string(), ids(&node.v), ids(&node.u)]);
    }
    c.out.tables.push(t);
    c.result(json!({ "min_split_separation": fam.min_split_separation(&m), "families": fam }));
    c.done()
}

fn quotient_check(mut c: Ctx) -> Res {
    let eps = c.cfg.eps_grid.clone().unwrap_or_else(default_quotient_eps);
    let mut reports = Vec::new();
    let mut t = Table::new("quotient", &["map", "eps", "c", "delta1", "delta2", "matched", "sz_k1", "sz_k2", "holds"]);
    for case in quotient_corpus() {
        let r = check_quotient_monotonicity(&case.name, &case.k1, &case.k2, &case.phi, &eps, c.exec)?;
        for row in &r.rows {
            t.push([
                r.name.clone(),
                num(row.eps),
                num(r.c),
                num(row.delta1),
                num(row.delta2),
                row.matched.to_string(),
                row.sz_k1.label(),
                row.sz_k2.label(),
                row.holds.to_string(),
            ]);
        }
        reports.push(r);
    }
    let pairs: usize = reports.iter().map(|r| r.rows.len()).sum();
    let violations: usize = reports.iter().map(|r| r.violations).sum();
    c.check("monotonicity", violations == 0, format!("{violations} violations over {pairs} (map, eps) pairs"));
    c.out.tables.push(t);
    c.result(json!({ "pairs": pairs, "violations": violations, "maps": reports }));
    c.done()
}

fn lq_scaling(mut c: Ctx) -> Res {
    let d = ScalingConfig::default();
    let cfg = ScalingConfig {
        q_list: c.cfg.q_list.clone().unwrap_or(d.q_list),
        dims: c.cfg.dims.clone().unwrap_or(d.dims),
        samples: c.cfg.samples.unwrap_or(d.samples),
        eps_grid: c.cfg.eps_grid.clone().unwrap_or(d.eps_grid),
        seed: c.cfg.seed.unwrap_or(d.seed),
    };
    let table = lq_scaling_experiment(&cfg, c.exec)?;
    c.check(
        "index nondecreasing as eps shrinks",
        table.monotonicity_violations == 0,
        format!("{} violations", table.monotonicity_violations),
    );
    let mut t = Table::new("lq_scaling", &["model", "eps", "delta", "index", "points"]);
    let mut series = Vec::new();
    for &q in &cfg.q_list {
        for &dim in &cfg.dims {
            let rows: Vec<_> = table.rows.iter().filter(|r| r.q == q && r.dim == dim).collect();
            let label = format!("lq:{q}:{dim}:{}:{}", cfg.samples, cfg.seed);
            for r in &rows {
                let idx = r.index.map_or_else(|| "inf".to_string(), |i| i.to_string());
                t.push([label.clone(), num(r.eps), num(r.delta), idx, cfg.samples.to_string()]);
            }
            series.push(Series {
                name: format!("q = {q}, dim = {dim}"),
                points: rows.iter().filter_map(|r| r.index.map(|i| (1.0 / r.eps, i as f64))).collect(),
            });
        }
    }
    c.out.tables.push(t);
    c.out.charts.push((
        "lq_scaling".into(),
        Chart {
            title: "Szlenk index against 1/eps".into(),
            x_label: "1/eps".into(),
            y_label: "index".into(),
            log_x: true,
            log_y: true,
            series,
        },
    ));
    c.result(json!({ "config": cfg, "table": table }));
    c.done()
}
