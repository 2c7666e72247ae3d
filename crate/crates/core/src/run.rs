//! Experiment orchestration: dispatch a [`RunConfig`] to its module, write the
//! CSV outputs and a JSON report, and record hashes of everything.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::{Method, Problem, RunConfig, Source};
use crate::error::{Error, Result};
use crate::grid::{Exterior, Field, GridDomain};
use crate::heat::{
    gaussian_1d, harmonic_field, kernel, lipschitz_seminorm, moment_check, self_convolution, smoothing_invariance,
    symbol_bounds, MixedSymbol,
};
use crate::io;
use crate::local::{make_coefficient, CoefficientField};
use crate::measure::{ellipticity, OperatorSpec};
use crate::nonlocal::{apply_fft, assemble_stencil, NonlocalOperator};
use crate::reglab::{boundary_run, fit_exponent, interior_experiment, InteriorConfig, Region};
use crate::solve::{
    build_barrier, check_max_principle, comparison_vlambda, concavity_check, max_principle_control, solve_direct,
    solve_picard, solve_resolvent, MixedProblem,
};

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct Output {
    pub file: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct Timing {
    pub phase: String,
    pub seconds: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunRecord {
    pub problem: String,
    pub config_hash: String,
    /// Git-style blob hash over the raw input files.
    pub input_hash: String,
    pub inputs: Vec<Output>,
    pub timings: Vec<Timing>,
    pub outputs: Vec<Output>,
    pub checks: Vec<Check>,
    pub report: Value,
    pub error: Option<String>,
    pub config: RunConfig,
}

impl RunRecord {
    pub fn all_pass(&self) -> bool {
        self.error.is_none() && self.checks.iter().all(|c| c.pass)
    }

    /// 0 when every check passes, 1 on a failed check, 3 on a numeric failure.
    pub fn exit_code(&self) -> i32 {
        if self.error.is_some() {
            3
        } else if self.all_pass() {
            0
        } else {
            1
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    /// File name for the main artifact, overriding the per-problem default.
    pub primary: Option<String>,
    pub gnuplot: bool,
    /// Raw input files (name, bytes) for the input hash.
    pub inputs: Vec<(String, Vec<u8>)>,
    /// Field CSV to apply L to, for the `apply` problem.
    pub field: Option<Field>,
}

/// `sha256("blob <len>\0" ++ bytes)`, as git does with sha-256 object ids.
pub fn blob_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    hex::encode(h.finalize())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    opts: &'a RunOptions,
    outputs: Vec<Output>,
    checks: Vec<Check>,
    timings: Vec<Timing>,
    plots: Vec<String>,
}

impl Ctx<'_> {
    fn check(&mut self, name: impl Into<String>, pass: bool, detail: impl Into<String>) {
        self.checks.push(Check {
            name: name.into(),
            pass,
            detail: detail.into(),
        });
    }

    fn timed<T>(&mut self, phase: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let t0 = Instant::now();
        let out = f();
        self.timings.push(Timing {
            phase: phase.to_string(),
            seconds: t0.elapsed().as_secs_f64(),
        });
        out
    }

    fn name(&self, default: &str) -> String {
        match &self.opts.primary {
            Some(p) if Path::new(p).extension() == Path::new(default).extension() => p.clone(),
            _ => default.to_string(),
        }
    }

    fn write(&mut self, name: &str, bytes: Vec<u8>) -> Result<()> {
        std::fs::write(self.opts.out_dir.join(name), &bytes)?;
        self.outputs.push(Output {
            file: name.to_string(),
            sha256: sha256_hex(&bytes),
            bytes: bytes.len(),
        });
        Ok(())
    }

    fn write_field(&mut self, name: &str, f: &Field) -> Result<()> {
        self.write(name, io::field_to_string(f).into_bytes())?;
        let cols = if f.grid.dim() == 1 { "1:2 with lines" } else { "1:2:3 with points palette" };
        let cmd = if f.grid.dim() == 1 { "plot" } else { "splot" };
        self.plots.push(format!("{cmd} '{name}' using {cols} title '{name}'"));
        Ok(())
    }

    fn write_table(&mut self, name: &str, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
        let mut buf = Vec::new();
        io::write_table(&mut buf, header, rows)?;
        self.write(name, buf)?;
        if header.len() >= 2 {
            self.plots.push(format!("plot '{name}' using 1:2 with linespoints title '{}'", header[1]));
        }
        Ok(())
    }
}

/// Runs the configured problem and writes outputs into `opts.out_dir`.
pub fn run(cfg: &RunConfig, opts: &RunOptions) -> RunRecord {
    let problem = cfg.problem.unwrap_or(Problem::Solve);
    let mut ctx = Ctx {
        cfg,
        opts,
        outputs: Vec::new(),
        checks: Vec::new(),
        timings: Vec::new(),
        plots: Vec::new(),
    };
    let result = std::fs::create_dir_all(&opts.out_dir)
        .map_err(Error::from)
        .and_then(|_| dispatch(problem, &mut ctx));
    let (report, error) = match result {
        Ok(v) => (v, None),
        Err(e) => (json!({ "error": e.to_string() }), Some(e.to_string())),
    };
    if opts.gnuplot && !ctx.plots.is_empty() {
        let mut script = String::from("set datafile separator ','\nset key autotitle columnhead\n");
        for p in &ctx.plots {
            script.push_str(p);
            script.push_str("\npause -1\n");
        }
        if let Err(e) = ctx.write("plot.gp", script.into_bytes()) {
            log::warn!("could not write plot.gp: {e}");
        }
    }
    let inputs: Vec<Output> = opts
        .inputs
        .iter()
        .map(|(name, bytes)| Output {
            file: name.clone(),
            sha256: blob_hash(bytes),
            bytes: bytes.len(),
        })
        .collect();
    let joined: String = inputs.iter().map(|i| format!("{} {}\n", i.sha256, i.file)).collect();
    let mut record = RunRecord {
        problem: problem.name().to_string(),
        config_hash: sha256_hex(cfg.canonical().as_bytes()),
        input_hash: blob_hash(joined.as_bytes()),
        inputs,
        timings: ctx.timings,
        outputs: ctx.outputs,
        checks: ctx.checks,
        report,
        error,
        config: cfg.clone(),
    };
    let manifest: String = record.outputs.iter().map(|o| format!("{}  {}\n", o.sha256, o.file)).collect();
    let _ = std::fs::write(opts.out_dir.join("manifest.txt"), manifest);
    let report_name = match &opts.primary {
        Some(p) if p.ends_with(".json") => p.clone(),
        _ => "report.json".to_string(),
    };
    match serde_json::to_vec_pretty(&record) {
        Ok(bytes) => {
            if let Err(e) = std::fs::write(opts.out_dir.join(&report_name), bytes) {
                record.error.get_or_insert(format!("could not write {report_name}: {e}"));
            }
        }
        Err(e) => {
            record.error.get_or_insert(e.to_string());
        }
    }
    record
}

fn dispatch(problem: Problem, ctx: &mut Ctx) -> Result<Value> {
    match problem {
        Problem::Symbol => run_symbol(ctx),
        Problem::Apply => run_apply(ctx),
        Problem::Solve => run_solve(ctx),
        Problem::Picard => run_picard(ctx),
        Problem::Heatkernel => run_heat(ctx),
        Problem::Maxprin => run_maxprin(ctx),
        Problem::Regularity => run_regularity(ctx),
        Problem::Boundary => run_boundary(ctx),
        Problem::Liouville => run_liouville(ctx),
        Problem::Barrier => run_barrier(ctx),
    }
}

fn grid(cfg: &RunConfig) -> Result<Arc<GridDomain>> {
    Ok(Arc::new(GridDomain::new(cfg.dim, cfg.halfwidth, cfg.points, cfg.domain.clone())?))
}

fn coefficient(cfg: &RunConfig, g: &Arc<GridDomain>) -> Result<Option<CoefficientField>> {
    cfg.coef
        .as_ref()
        .map(|c| make_coefficient(&c.kind, c.alpha, c.min, c.max, g))
        .transpose()
}

/// Constant local coefficient for the Fourier-side problems.
fn a_const(cfg: &RunConfig, notes: &mut Vec<String>) -> f64 {
    match &cfg.coef {
        None => 0.0,
        Some(c) if c.kind == "constant" => 0.5 * (c.min + c.max),
        Some(c) => {
            notes.push(format!("{} coefficient replaced by its lower bound {} on the Fourier side", c.kind, c.min));
            c.min
        }
    }
}

fn require_spec(cfg: &RunConfig) -> Result<OperatorSpec> {
    cfg.spec()
        .ok_or_else(|| Error::Precondition("this problem needs the nonlocal term (nonlocal = true)".into()))
}

fn source(cfg: &RunConfig, g: &Arc<GridDomain>) -> Field {
    let dim = g.dim();
    let c = g.shape().centroid(dim);
    let diam = g.omega_diameter();
    let f = match cfg.source {
        Source::One => Field::from_fn(g, Exterior::ZERO, |_| 1.0),
        Source::Gaussian => Field::from_fn(g, Exterior::ZERO, |p| {
            let r2: f64 = (0..dim).map(|k| (p[k] - c[k]).powi(2)).sum();
            (-r2 / (0.05 * diam * diam)).exp()
        }),
        Source::Bumps => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let bumps: Vec<([f64; 2], f64)> = (0..3)
                .map(|_| {
                    let mut p = c;
                    for x in p.iter_mut().take(dim) {
                        *x += rng.gen_range(-0.3..0.3) * diam;
                    }
                    (p, rng.gen_range(0.05..0.2) * diam)
                })
                .collect();
            Field::from_fn(g, Exterior::ZERO, |x| {
                bumps
                    .iter()
                    .map(|(p, w)| {
                        let r2: f64 = (0..dim).map(|k| (x[k] - p[k]).powi(2)).sum();
                        (-r2 / (w * w)).exp()
                    })
                    .sum()
            })
        }
    };
    f.restricted_to_omega()
}

fn problem(cfg: &RunConfig, lambda_shift: f64) -> Result<MixedProblem> {
    let g = grid(cfg)?;
    let coef = coefficient(cfg, &g)?;
    let f = source(cfg, &g);
    Ok(MixedProblem {
        spec: cfg.spec(),
        coef,
        grid: g,
        f,
        lambda_shift,
    })
}

fn run_symbol(ctx: &mut Ctx) -> Result<Value> {
    let cfg = ctx.cfg;
    let mut notes = Vec::new();
    let a = a_const(cfg, &mut notes);
    let spec = cfg.spec();
    let sym = ctx.timed("symbol", || {
        MixedSymbol::new(spec.as_ref(), a, cfg.dim, cfg.heat_halfwidth, cfg.heat_points)
    })?;
    let bounds = symbol_bounds(&sym);
    ctx.check(
        "symbol sandwich",
        bounds.lower > 0.0 && bounds.upper.is_finite() && bounds.lower <= bounds.upper,
        format!("lower {:e}, upper {:e}", bounds.lower, bounds.upper),
    );
    let n = sym.grid.points_per_axis();
    // ascending frequencies for an odd DFT length
    let order = |t: usize| (t + n / 2 + 1) % n;
    let mut rows = Vec::with_capacity(sym.values.len());
    if cfg.dim == 1 {
        for t in 0..n {
            let k = order(t);
            rows.push(vec![sym.frequency_of(k)[0], sym.values[k]]);
        }
        ctx.write_table(&ctx.name("symbol.csv"), &["xi", "value"], &rows)?;
    } else {
        for tj in 0..n {
            for ti in 0..n {
                let k = sym.grid.index(order(ti), order(tj));
                let xi = sym.frequency_of(k);
                rows.push(vec![xi[0], xi[1], sym.values[k]]);
            }
        }
        ctx.write_table(&ctx.name("symbol.csv"), &["xi", "eta", "value"], &rows)?;
    }
    let ell = match &spec {
        Some(s) => Some(ellipticity(&s.measure, s.s, 360)?),
        None => None,
    };
    Ok(json!({ "bounds": bounds, "ellipticity": ell, "a_const": a, "notes": notes }))
}

fn inner_half_rel_error(a: &Field, b: &Field) -> f64 {
    let g = &a.grid;
    let hw = g.halfwidth() / 2.0;
    let (mut err, mut scale) = (0.0f64, 0.0f64);
    for k in 0..g.len() {
        let p = g.coord(k);
        if p[0].abs() <= hw && p[1].abs() <= hw {
            err = err.max((a.values[k] - b.values[k]).abs());
            scale = scale.max(b.values[k].abs());
        }
    }
    err / scale
}

fn run_apply(ctx: &mut Ctx) -> Result<Value> {
    let cfg = ctx.cfg;
    let spec = require_spec(cfg)?;
    let (u, gaussian) = match &ctx.opts.field {
        Some(f) => (f.clone(), false),
        None => {
            let g = Arc::new(GridDomain::full_box(cfg.dim, cfg.halfwidth, cfg.points)?);
            let w = cfg.halfwidth / 6.0;
            (Field::from_fn(&g, Exterior::ZERO, |p| (-(p[0] * p[0] + p[1] * p[1]) / (w * w)).exp()), true)
        }
    };
    let op = NonlocalOperator::new(&spec, &u.grid)?;
    let lu = ctx.timed("apply", || op.apply_pointwise(&u))?;
    let oracle = ctx.timed("apply_fft", || Ok(apply_fft(&spec, &u, 256)))?;
    let rel = inner_half_rel_error(&lu, &oracle);
    if gaussian {
        ctx.check("oracle equivalence", rel <= 1e-4, format!("inner-half relative error {rel:e}"));
    }
    ctx.write_field(&ctx.name("apply.csv"), &lu)?;
    let mut notes = Vec::new();
    match assemble_stencil(&spec, &u.grid) {
        Ok(st) => {
            let mut buf = Vec::new();
            io::write_stencil(&mut buf, &st)?;
            ctx.write("stencil.csv", buf)?;
        }
        Err(e @ Error::GridTooLarge { .. }) => notes.push(format!("stencil dump skipped: {e}")),
        Err(e) => return Err(e),
    }
    Ok(json!({
        "input": if gaussian { "gaussian" } else { "field" },
        "oracle_rel_error": rel,
        "sup_Lu": lu.sup_norm(),
        "samples": op.sample_count(),
        "tail_radius": op.tail_radius(),
        "notes": notes,
    }))
}

fn run_solve(ctx: &mut Ctx) -> Result<Value> {
    let cfg = ctx.cfg;
    let p = problem(cfg, 0.0)?;
    let fsup = p.f.sup_norm();
    let report = match cfg.method {
        Method::Direct => ctx.timed("solve", || solve_direct(&p))?,
        Method::Picard => {
            let lambda = if cfg.lambda > 0.0 {
                cfg.lambda
            } else {
                ctx.timed("auto_lambda", || crate::solve::auto_lambda(&p))?.0
            };
            ctx.timed("solve", || solve_resolvent(&p, lambda, cfg.tol, cfg.max_iter))?
        }
    };
    let bound = match cfg.method {
        Method::Direct => cfg.tol * (fsup + 1.0),
        Method::Picard => 10.0 * report.lambda * cfg.tol * (fsup + 1.0),
    };
    ctx.check(
        "residual",
        report.residual_sup <= bound,
        format!("‖𝓔u - f‖∞ = {:e} (bound {bound:e})", report.residual_sup),
    );
    ctx.write_field(&ctx.name("solution.csv"), &report.u)?;
    Ok(json!({ "solve": report, "f_sup": fsup, "u_sup": report.u.omega_sup() }))
}

fn run_picard(ctx: &mut Ctx) -> Result<Value> {
    let cfg = ctx.cfg;
    let p = problem(cfg, cfg.lambda)?;
    let rep = ctx.timed("picard", || solve_picard(&p, cfg.tol, cfg.max_iter))?;
    let k = contraction_estimate(&rep.contraction_ratios);
    ctx.check("contraction", k < 0.9, format!("λ = {}, K = {k:.4}", rep.lambda));
    ctx.check(
        "geometric convergence",
        !rep.contraction_ratios.is_empty() && rep.contraction_ratios.iter().all(|&r| r < 1.0),
        format!("{} ratios, max {:.4}", rep.contraction_ratios.len(), rep.contraction_ratios.iter().fold(0.0f64, |a, &b| a.max(b))),
    );
    let shifted = MixedProblem {
        lambda_shift: rep.lambda,
        ..p.clone()
    };
    let direct = ctx.timed("direct", || solve_direct(&shifted))?;
    let diff = crate::grid::max_abs_diff(&rep.u.values, &direct.u.values);
    ctx.check(
        "matches direct shifted solve",
        diff <= 10.0 * cfg.tol,
        format!("‖u_picard - u_direct‖∞ = {diff:e}"),
    );
    ctx.write_field(&ctx.name("solution.csv"), &rep.u)?;
    let mut vl = Vec::new();
    if let Some(spec) = cfg.spec() {
        let g = grid(cfg)?;
        let barrier = ctx.timed("barrier", || build_barrier(&g, &spec, cfg.barrier_beta))?;
        for &lambda in &cfg.barrier_lambdas {
            let r = ctx.timed("vlambda", || comparison_vlambda(&g, &spec, lambda, &barrier))?;
            ctx.check(
                format!("‖v_λ‖∞ ≤ 2/λ at λ = {lambda}"),
                r.pass,
                format!("{:e} vs {:e}", r.v_sup, r.bound),
            );
            vl.push(r);
        }
    }
    Ok(json!({ "picard": rep, "contraction": k, "direct_difference": diff, "vlambda": vl }))
}

/// Geometric mean of the increment ratios, skipping the first two.
pub fn contraction_estimate(ratios: &[f64]) -> f64 {
    let tail = if ratios.len() > 3 { &ratios[2..] } else { ratios };
    if tail.is_empty() {
        return 0.0;
    }
    (tail.iter().map(|r| r.max(1e-300).ln()).sum::<f64>() / tail.len() as f64).exp()
}

fn heat_stats(sym: &MixedSymbol, t: f64, delta: f64) -> Result<(crate::heat::KernelSlice, f64, f64)> {
    let k = kernel(sym, t)?;
    let m = moment_check(&k.values, sym.order(), delta)?;
    let l = lipschitz_seminorm(&k.values);
    Ok((k, m, l))
}

fn run_heat(ctx: &mut Ctx) -> Result<Value> {
    let cfg = ctx.cfg;
    let mut notes = Vec::new();
    let a = a_const(cfg, &mut notes);
    let spec = cfg.spec();
    let (hw, n, t) = (cfg.heat_halfwidth, cfg.heat_points, cfg.heat_t);
    let sym = ctx.timed("symbol", || MixedSymbol::new(spec.as_ref(), a, cfg.dim, hw, n))?;
    let (k, moment, lip) = ctx.timed("kernel", || heat_stats(&sym, t, cfg.heat_delta))?;
    let mx = k.values.sup_norm();
    let min = k.values.values.iter().fold(f64::INFINITY, |m, &v| m.min(v));
    ctx.check("unit mass", (k.mass - 1.0).abs() <= 1e-6, format!("mass - 1 = {:e}", k.mass - 1.0));
    ctx.check("positivity", min >= -1e-6 * mx, format!("min/max = {:e}", min / mx));
    ctx.check("moment finite", moment.is_finite(), format!("δ = {}, moment {moment}", cfg.heat_delta));

    let fine = ctx.timed("refined", || MixedSymbol::new(spec.as_ref(), a, cfg.dim, hw, 2 * n - 1))?;
    let (_, moment2, lip2) = ctx.timed("refined kernel", || heat_stats(&fine, t, cfg.heat_delta))?;
    let dm = (moment2 - moment).abs() / moment.abs();
    let dl = (lip2 - lip).abs() / lip.abs();
    ctx.check("moment refinement", dm <= 0.05, format!("relative change {dm:e}"));
    ctx.check("Lipschitz refinement", dl <= 0.10, format!("relative change {dl:e}"));

    let k2 = ctx.timed("semigroup", || kernel(&sym, 2.0 * t))?;
    let semigroup = crate::grid::max_abs_diff(&self_convolution(&k).values, &k2.values.values);
    ctx.check("semigroup", semigroup <= 1e-6, format!("‖H∗H - H(2t)‖∞ = {semigroup:e}"));

    let mut gauss = None;
    if cfg.dim == 1 && a > 0.0 {
        let local = MixedSymbol::new(None, a, 1, hw, n)?;
        if let Ok(kl) = kernel(&local, t) {
            let g = &kl.values.grid;
            let err = (0..g.len())
                .map(|i| (kl.values.values[i] - gaussian_1d(a, t, g.coord(i)[0])).abs())
                .fold(0.0, f64::max);
            ctx.check("Gaussian limit", err <= 1e-6, format!("sup error {err:e}"));
            gauss = Some(err);
        }
    }
    ctx.write_field(&ctx.name("kernel.csv"), &k.values)?;
    let bounds = symbol_bounds(&sym);
    Ok(json!({
        "t": t,
        "mass": k.mass,
        "delta": cfg.heat_delta,
        "moment": moment,
        "moment_refined": moment2,
        "lipschitz": lip,
        "lipschitz_refined": lip2,
        "semigroup_defect": semigroup,
        "gaussian_error": gauss,
        "symbol_bounds": bounds,
        "max_imaginary": k.max_imaginary,
        "a_const": a,
        "notes": notes,
    }))
}

fn run_maxprin(ctx: &mut Ctx) -> Result<Value> {
    let cfg = ctx.cfg;
    let p = problem(cfg, 0.0)?;
    let rep = ctx.timed("trials", || check_max_principle(&p, cfg.trials, cfg.seed))?;
    for (i, t) in rep.trials.iter().enumerate() {
        ctx.check(
            format!("trial {}", i + 1),
            t.pass,
            format!("min u = {:e}, ‖f‖∞ = {:e}", t.min_u, t.f_sup),
        );
    }
    let control = ctx.timed("control", || max_principle_control(&p, cfg.seed.wrapping_add(1)))?;
    let rows: Vec<Vec<f64>> = rep
        .trials
        .iter()
        .enumerate()
        .map(|(i, t)| vec![(i + 1) as f64, t.min_u, t.f_sup, if t.pass { 1.0 } else { 0.0 }])
        .collect();
    ctx.write_table(&ctx.name("trials.csv"), &["trial", "min_u", "f_sup", "pass"], &rows)?;
    Ok(json!({ "trials": rep, "control": control }))
}

fn run_regularity(ctx: &mut Ctx) -> Result<Value> {
    let cfg = ctx.cfg;
    let spec = require_spec(cfg)?;
    let coef = cfg
        .coef
        .clone()
        .ok_or_else(|| Error::Precondition("regularity needs the local term".into()))?;
    let ic = InteriorConfig {
        dim: cfg.dim,
        spec,
        coef_kind: coef.kind.clone(),
        alpha: coef.alpha,
        gamma: cfg.reg_gamma,
        rough_source: cfg.reg_rough_source,
        points: cfg.points,
        orders: cfg.reg_orders.clone(),
        seed: cfg.seed,
    };
    let rep = ctx.timed("interior", || interior_experiment(&ic))?;
    for r in &rep.reports {
        ctx.check(format!("bounded at order {}", r.order), r.bounded, format!("{:?}", r.seminorms));
    }
    let mut calibration = None;
    if coef.kind == "weierstrass-alpha" {
        let g = Arc::new(GridDomain::full_box(cfg.dim, 1.0, cfg.points)?);
        let a = make_coefficient(&coef.kind, coef.alpha, coef.min, coef.max, &g)?;
        let r = ctx.timed("calibration", || fit_exponent(&a.samples, &Region::centered(cfg.dim, 1.0), &[coef.alpha], cfg.seed))?;
        let fitted = r[0].fitted_exponent;
        ctx.check(
            "generator exponent",
            (fitted - coef.alpha).abs() <= 0.1,
            format!("α = {}, fitted {fitted:.4}", coef.alpha),
        );
        calibration = Some(fitted);
    }
    let rows: Vec<Vec<f64>> = rep
        .reports
        .iter()
        .flat_map(|r| r.scales.iter().zip(&r.seminorms).map(move |(&s, &q)| vec![s, r.order, q]))
        .collect();
    ctx.write_table("seminorms.csv", &["scale", "order", "seminorm"], &rows)?;
    Ok(json!({ "interior": rep, "calibration_exponent": calibration }))
}

fn run_boundary(ctx: &mut Ctx) -> Result<Value> {
    let cfg = ctx.cfg;
    let spec = require_spec(cfg)?;
    let mut notes = Vec::new();
    let a = a_const(cfg, &mut notes);
    if a <= 0.0 {
        return Err(Error::Precondition("boundary needs the local term for the mixed run".into()));
    }
    let (um, mixed) = ctx.timed("mixed", || boundary_run(Some(&spec), a, cfg.points))?;
    let (up, pure) = ctx.timed("pure", || boundary_run(Some(&spec), 0.0, cfg.points))?;
    ctx.check("mixed κ = 1", (mixed.kappa - 1.0).abs() <= 0.05, format!("κ = {:.4} ± {:.4}", mixed.kappa, mixed.std_error));
    ctx.check("pure κ = s", (pure.kappa - spec.s).abs() <= 0.05, format!("κ = {:.4} ± {:.4}", pure.kappa, pure.std_error));
    let sep = (mixed.kappa - pure.kappa).abs() / mixed.std_error.hypot(pure.std_error);
    ctx.check("fits separated", sep >= 3.0, format!("{sep:.1} standard errors"));
    let g = &um.grid;
    let rows: Vec<Vec<f64>> = (0..g.len()).map(|k| vec![g.coord(k)[0], um.values[k], up.values[k]]).collect();
    ctx.write_table(&ctx.name("profile.csv"), &["x", "mixed", "pure"], &rows)?;
    Ok(json!({ "mixed": mixed, "pure": pure, "separation": sep, "notes": notes }))
}

/// Odd point count with the given spacing on [-hw, hw].
fn odd_points(hw: f64, h: f64) -> usize {
    let half = (hw / h).round() as usize;
    2 * half + 1
}

fn run_liouville(ctx: &mut Ctx) -> Result<Value> {
    let cfg = ctx.cfg;
    let mut notes = Vec::new();
    let a = a_const(cfg, &mut notes);
    let spec = cfg.spec();
    let h = cfg.liouville_spacing;
    let t = cfg.heat_t;
    let mut rows = Vec::new();
    let mut reps = Vec::new();
    for &hh in &cfg.liouville_boxes {
        let v = ctx.timed("harmonic", || harmonic_field(spec.as_ref(), a, cfg.dim, hh, odd_points(hh, h)))?;
        let sym = MixedSymbol::new(spec.as_ref(), a, cfg.dim, 0.75 * hh, odd_points(0.75 * hh, h))?;
        let r = ctx.timed("smoothing", || smoothing_invariance(&sym, &v, t))?;
        rows.push(vec![hh, r.defect, r.osc, r.defect / r.osc]);
        reps.push(r);
    }
    let rel: Vec<f64> = rows.iter().map(|r| r[3]).collect();
    let last = *rel.last().expect("at least one box");
    ctx.check("harmonic defect", last <= 1e-3, format!("finest ‖v - H∗v‖∞/osc = {last:e}"));
    ctx.check(
        "defect decreases under refinement",
        rel.windows(2).all(|w| w[1] < w[0]),
        format!("{rel:?}"),
    );
    let hh = cfg.liouville_boxes[0];
    let g = Arc::new(GridDomain::full_box(cfg.dim, hh, odd_points(hh, h))?);
    let sym = MixedSymbol::new(spec.as_ref(), a, cfg.dim, 0.75 * hh, odd_points(0.75 * hh, h))?;
    let c = Field::from_fn(&g, Exterior::Constant(1.0), |_| 1.0);
    let dc = smoothing_invariance(&sym, &c, t)?.defect;
    ctx.check("constants fixed", dc <= 1e-12, format!("defect {dc:e}"));
    let ext = Exterior::Affine {
        offset: 0.5,
        gradient: [0.3 / hh, if cfg.dim == 2 { -0.2 / hh } else { 0.0 }],
    };
    let l = Field::from_fn(&g, ext, |p| ext.eval(p));
    let da = smoothing_invariance(&sym, &l, t)?.defect;
    ctx.check("affines fixed", da <= 1e-8, format!("defect {da:e}"));
    ctx.write_table(&ctx.name("liouville.csv"), &["H", "defect", "osc", "relative"], &rows)?;
    Ok(json!({ "runs": reps, "boxes": cfg.liouville_boxes, "constant_defect": dc, "affine_defect": da, "notes": notes }))
}

fn run_barrier(ctx: &mut Ctx) -> Result<Value> {
    let cfg = ctx.cfg;
    let spec = require_spec(cfg)?;
    let g = grid(cfg)?;
    let b = ctx.timed("search", || build_barrier(&g, &spec, cfg.barrier_beta))?;
    ctx.check("supersolution", b.max_residual <= 1.0, format!("β = {}, max(Lw - Δw) = {:.6}", b.beta, b.max_residual));
    let conc = concavity_check(&b, &g, 16, 8);
    ctx.check("concave near Ω", conc <= 1e-12, format!("largest second difference {conc:e}"));
    let mut vl = Vec::new();
    for &lambda in &cfg.barrier_lambdas {
        let r = ctx.timed("vlambda", || comparison_vlambda(&g, &spec, lambda, &b))?;
        ctx.check(format!("‖v_λ‖∞ ≤ 2/λ at λ = {lambda}"), r.pass, format!("{:e} vs {:e}", r.v_sup, r.bound));
        vl.push(r);
    }
    ctx.write_field(&ctx.name("barrier.csv"), &b.w)?;
    Ok(json!({ "barrier": b, "concavity": conc, "vlambda": vl }))
}
