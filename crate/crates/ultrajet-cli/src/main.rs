//! Batch front end: wires the library modules into subcommands and emits
//! versioned JSON reports.
//!
//! Exit codes: 0 success, 2 when an inequality that must hold fails,
//! 1 on usage or configuration errors.

mod json;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::Instant;

use ultrajet::classnorms::{
    factorization_check, fourier_1d, seminorm, type_radius, ClassSpec, Family, IndexSet,
};
use ultrajet::diffgroup::{compose_diff, invert_diff, make_diffmap, DiffMap};
use ultrajet::explaw::{counterexample_run, explaw_compare};
use ultrajet::funcdsl::{eval_jet, parse, Expr};
use ultrajet::grid::GridSpec;
use ultrajet::jet::jet_to_json;
use ultrajet::sampled::SampledFunction;
use ultrajet::weightseq::{
    check_property, quasianalytic_partial_sums, SeqProperty, WeightConfig, WeightSequence,
};
use ultrajet::Rat;

const SCHEMA: &str = "ultrajet-report/1";

#[derive(Parser)]
#[command(name = "ultrajet", version, about = "Desk-scale ultradifferentiable calculus")]
struct Cli {
    /// Key=value config file; flags win on conflict.
    #[arg(long, global = true)]
    config: Option<String>,
    /// Worker threads (default: hardware parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Write the JSON report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Weight-sequence analysis.
    Ws {
        #[command(subcommand)]
        sub: WsCommand,
    },
    /// Sampled-function seminorms.
    #[command(name = "fn")]
    Fn {
        #[command(subcommand)]
        sub: FnCommand,
    },
    /// Exponential-law comparisons.
    Explaw {
        #[command(subcommand)]
        sub: ExplawCommand,
    },
    /// Diffeomorphism-group operations.
    Diff {
        #[command(subcommand)]
        sub: DiffCommand,
    },
    /// Jet-level operations.
    Jet {
        #[command(subcommand)]
        sub: JetCommand,
    },
    /// Fourier-transform checks.
    Fourier {
        #[command(subcommand)]
        sub: FourierCommand,
    },
}

#[derive(Subcommand)]
enum WsCommand {
    /// Property verdicts and quasianalyticity partial sums for a sequence.
    Analyze(WsAnalyze),
}

#[derive(Args)]
struct WsAnalyze {
    /// Weight sequence, e.g. gevrey:2, qsquare:2, one, table:1,2,6.
    #[arg(long)]
    seq: String,
    /// Horizon.
    #[arg(long, alias = "K", default_value_t = 40)]
    k: usize,
}

#[derive(Subcommand)]
enum FnCommand {
    /// Seminorm report of an expression against a class spec.
    Norm(FnNorm),
}

#[derive(Args)]
struct FnNorm {
    #[arg(long)]
    expr: String,
    /// Comma-separated axes a:b:points; one per dimension.
    #[arg(long, allow_hyphen_values = true, default_value = "-6:6:241")]
    grid: String,
    /// Truncation order of the sampled jets.
    #[arg(long, default_value_t = 8)]
    order: usize,
    /// Family: b, s, bm, slm, d, dm, wp, wmp.
    #[arg(long)]
    class: String,
    #[arg(long, alias = "M")]
    m: Option<String>,
    #[arg(long, alias = "L")]
    l: Option<String>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    p: Option<f64>,
    /// Also report the type-radius estimate against --m.
    #[arg(long, default_value_t = false)]
    type_radius: bool,
}

#[derive(Subcommand)]
enum ExplawCommand {
    /// Mixed-vs-joint seminorm comparison of a curried sample.
    Check(ExplawCheck),
    /// Divergence lab for a non-moderate weight sequence.
    Counterexample(ExplawCounterexample),
}

#[derive(Args)]
struct ExplawCheck {
    #[arg(long)]
    expr: String,
    /// Factor dimensions l:m.
    #[arg(long)]
    split: String,
    #[arg(long)]
    class: String,
    #[arg(long, alias = "M")]
    m: Option<String>,
    #[arg(long, alias = "L")]
    l: Option<String>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    p: Option<f64>,
    /// Second factor radius (defaults to --rho).
    #[arg(long)]
    rho2: Option<f64>,
    #[arg(long, alias = "K", default_value_t = 8)]
    k: usize,
    #[arg(long, allow_hyphen_values = true, default_value = "-6:6:41")]
    grid: String,
}

#[derive(Args)]
struct ExplawCounterexample {
    #[arg(long, alias = "M")]
    m: String,
    #[arg(long, alias = "L", default_value = "one")]
    l: String,
    #[arg(long, alias = "N", default_value_t = 5)]
    n: usize,
    /// Comma-separated sigma values.
    #[arg(long, default_value = "1,2,4,8")]
    sigmas: String,
    #[arg(long, alias = "K", default_value_t = 40)]
    k: usize,
}

#[derive(Subcommand)]
enum DiffCommand {
    /// Compose two maps Id+f and Id+g.
    Compose(DiffCompose),
    /// Invert a map Id+f on its grid.
    Invert(DiffInvert),
}

#[derive(Args)]
struct DiffCompose {
    /// Outer map as id+<expr>.
    #[arg(long)]
    map: String,
    /// Inner map as id+<expr>.
    #[arg(long)]
    map2: String,
    #[arg(long, allow_hyphen_values = true, default_value = "-6:6:241")]
    grid: String,
}

#[derive(Args)]
struct DiffInvert {
    /// Map as id+<expr>.
    #[arg(long)]
    map: String,
    #[arg(long, allow_hyphen_values = true, default_value = "-6:6:241")]
    grid: String,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    /// Jet order of the nodewise inverse jets.
    #[arg(long, default_value_t = 4)]
    order: usize,
}

#[derive(Subcommand)]
enum JetCommand {
    /// Invert the jet of an expression R^n -> R^n at a point.
    Invert(JetInvert),
}

#[derive(Args)]
struct JetInvert {
    #[arg(long)]
    expr: String,
    #[arg(long, default_value_t = 6)]
    order: usize,
    /// Comma-separated base point (defaults to the origin).
    #[arg(long, allow_hyphen_values = true)]
    at: Option<String>,
    /// Exact rational arithmetic (falls back to floats if a builtin is
    /// not exactly representable at the base point).
    #[arg(long, default_value_t = true)]
    exact: bool,
}

#[derive(Subcommand)]
enum FourierCommand {
    /// Transform a 1-D sample and compare against an optional reference.
    Check(FourierCheck),
}

#[derive(Args)]
struct FourierCheck {
    #[arg(long)]
    expr: String,
    #[arg(long, allow_hyphen_values = true, default_value = "-8:8:1025")]
    grid: String,
    #[arg(long, allow_hyphen_values = true, default_value = "-4:4:81")]
    xi_grid: String,
    /// Reference expression in the frequency variable x1.
    #[arg(long)]
    reference: Option<String>,
}

fn parse_seq(text: &str) -> Result<WeightSequence> {
    let (name, arg) = match text.split_once(':') {
        Some((n, a)) => (n, Some(a)),
        None => (text, None),
    };
    let seq = match (name, arg) {
        ("gevrey", Some(s)) => WeightSequence::gevrey(s.parse()?)?,
        ("qsquare", Some(q)) => WeightSequence::qsquare(q.parse()?)?,
        ("one", None) | ("constant_one", None) => WeightSequence::constant_one(),
        ("table", Some(vals)) => {
            let values: Vec<f64> = vals
                .split(',')
                .map(|v| v.parse().map_err(|e| anyhow!("bad table entry '{v}': {e}")))
                .collect::<Result<_>>()?;
            WeightSequence::table(values)?
        }
        _ => bail!("unknown weight sequence '{text}' (try gevrey:s, qsquare:q, one, table:...)"),
    };
    Ok(seq)
}

fn parse_grid(text: &str) -> Result<GridSpec> {
    let axes = text
        .split(',')
        .map(|a| GridSpec::parse_axis(a).map_err(|e| anyhow!("{e}")))
        .collect::<Result<Vec<_>>>()?;
    Ok(GridSpec::new(axes)?)
}

fn parse_family(text: &str) -> Result<Family> {
    Ok(match text.to_ascii_lowercase().as_str() {
        "b" => Family::B,
        "s" => Family::S,
        "bm" => Family::BM,
        "slm" => Family::SLM,
        "d" => Family::D,
        "dm" => Family::DM,
        "wp" => Family::Wp,
        "wmp" => Family::WMp,
        other => bail!("unknown class family '{other}'"),
    })
}

fn build_spec(
    class: &str,
    m: &Option<String>,
    l: &Option<String>,
    rho: Option<f64>,
    p: Option<f64>,
) -> Result<ClassSpec> {
    let family = parse_family(class)?;
    let spec = ClassSpec {
        family,
        m: m.as_deref().map(parse_seq).transpose()?,
        l: l.as_deref().map(parse_seq).transpose()?,
        rho,
        p,
    };
    spec.validate()?;
    Ok(spec)
}

/// Parse a map given as id+<expr> (the perturbation may be scalar for
/// n = 1 or a [..] vector).
fn parse_map(text: &str, grid: &GridSpec) -> Result<DiffMap> {
    let body = text
        .strip_prefix("id+")
        .or_else(|| text.strip_prefix("Id+"))
        .ok_or_else(|| anyhow!("map must be written as id+<expr>, got '{text}'"))?;
    let expr = parse(body, grid.dim()).map_err(|e| anyhow!("{e}"))?;
    let expr = if expr.target_dim() == 1 && grid.dim() == 1 {
        expr
    } else {
        expr
    };
    Ok(make_diffmap(expr, grid)?)
}

fn parse_point(text: &Option<String>, dim: usize) -> Result<Vec<f64>> {
    match text {
        None => Ok(vec![0.0; dim]),
        Some(t) => {
            let v: Vec<f64> = t
                .split(',')
                .map(|x| x.parse().map_err(|e| anyhow!("bad coordinate '{x}': {e}")))
                .collect::<Result<_>>()?;
            if v.len() != dim {
                bail!("point has {} coordinates, expected {dim}", v.len());
            }
            Ok(v)
        }
    }
}

fn sample(expr_text: &str, grid: &GridSpec, order: usize) -> Result<SampledFunction> {
    let e = parse(expr_text, grid.dim()).map_err(|e| anyhow!("{e}"))?;
    Ok(SampledFunction::sample(&e, grid, order)?)
}

/// Outcome of a subcommand: the results payload plus whether every
/// must-hold assertion held.
struct Outcome {
    results: serde_json::Value,
    assertions_ok: bool,
}

fn run_ws(a: &WsAnalyze) -> Result<Outcome> {
    let seq = parse_seq(&a.seq)?;
    let cfg = WeightConfig::default();
    let mut verdicts = Vec::new();
    for prop in [
        SeqProperty::LogConvex,
        SeqProperty::WeaklyLogConvex,
        SeqProperty::DerivationClosed,
        SeqProperty::ModerateGrowth,
    ] {
        verdicts.push(check_property(&seq, prop, a.k, &cfg)?);
    }
    let sums = quasianalytic_partial_sums(&seq, a.k.max(10), &cfg)?;
    Ok(Outcome {
        results: serde_json::json!({
            "sequence": seq,
            "horizon": a.k,
            "properties": verdicts,
            "quasianalytic": sums,
        }),
        assertions_ok: true,
    })
}

fn run_fn_norm(a: &FnNorm) -> Result<Outcome> {
    let grid = parse_grid(&a.grid)?;
    let f = sample(&a.expr, &grid, a.order)?;
    let spec = build_spec(&a.class, &a.m, &a.l, a.rho, a.p)?;
    let report = seminorm(&f, &spec, &IndexSet::All)?;
    let mut results = serde_json::json!({
        "expr": a.expr,
        "grid": grid,
        "order": a.order,
        "spec": spec,
        "report": report,
        "spot_check": f.spot_check(),
    });
    if a.type_radius {
        let m = spec
            .m
            .clone()
            .ok_or_else(|| anyhow!("--type-radius needs --m"))?;
        let tr = type_radius(&f, &m, a.order.min(12).max(6))?;
        results["type_radius"] = serde_json::to_value(&tr)?;
    }
    Ok(Outcome { results, assertions_ok: true })
}

fn run_explaw_check(a: &ExplawCheck) -> Result<Outcome> {
    let grid = parse_grid(&a.grid)?;
    let (l_dim, m_dim) = a
        .split
        .split_once(':')
        .ok_or_else(|| anyhow!("--split must be l:m"))?;
    let l_dim: usize = l_dim.parse()?;
    let m_dim: usize = m_dim.parse()?;
    if l_dim + m_dim != grid.dim() {
        bail!("split {l_dim}:{m_dim} does not match grid dimension {}", grid.dim());
    }
    let grid = if grid.dim() == 1 {
        bail!("explaw check needs at least 2 axes");
    } else {
        grid
    };
    let f = sample(&a.expr, &grid, a.k)?;
    let spec = build_spec(&a.class, &a.m, &a.l, a.rho, a.p)?;
    let rho1 = a.rho.unwrap_or(1.0);
    let rho2 = a.rho2.unwrap_or(rho1);
    let report = explaw_compare(&f, &spec, l_dim, rho1, rho2, &WeightConfig::default())?;
    let ok = report.direction1_ok && report.direction2_ok;
    Ok(Outcome {
        results: serde_json::json!({
            "expr": a.expr,
            "split": [l_dim, m_dim],
            "spec": spec,
            "rho1": rho1,
            "rho2": rho2,
            "report": report,
        }),
        assertions_ok: ok,
    })
}

fn run_explaw_counterexample(a: &ExplawCounterexample) -> Result<Outcome> {
    let m = parse_seq(&a.m)?;
    let l = parse_seq(&a.l)?;
    let sigmas: Vec<f64> = a
        .sigmas
        .split(',')
        .map(|s| s.parse().map_err(|e| anyhow!("bad sigma '{s}': {e}")))
        .collect::<Result<_>>()?;
    let run = counterexample_run(&m, &l, a.n, &sigmas, a.k, &WeightConfig::default())?;
    let ok = run.diverging;
    Ok(Outcome {
        results: serde_json::to_value(&run)?,
        assertions_ok: ok,
    })
}

fn run_diff_compose(a: &DiffCompose) -> Result<Outcome> {
    let grid = parse_grid(&a.grid)?;
    let f = parse_map(&a.map, &grid)?;
    let g = parse_map(&a.map2, &grid)?;
    let h = compose_diff(&f, &g)?;
    Ok(Outcome {
        results: serde_json::json!({
            "outer_inf_det": f.inf_det_estimate,
            "inner_inf_det": g.inf_det_estimate,
            "composite_inf_det": h.inf_det_estimate,
        }),
        assertions_ok: h.inf_det_estimate > 0.0,
    })
}

fn run_diff_invert(a: &DiffInvert) -> Result<Outcome> {
    let grid = parse_grid(&a.grid)?;
    let map = parse_map(&a.map, &grid)?;
    let inv = invert_diff(&map, a.tol, a.order)?;
    let nodes: Vec<serde_json::Value> = (0..grid.node_count())
        .map(|i| {
            serde_json::json!({
                "x": grid.node(i),
                "g": inv.g_values[i],
                "residual": inv.residuals[i],
                "g_jet": jet_to_json(&inv.g_jets[i]),
            })
        })
        .collect();
    let ok = inv.max_residual <= a.tol;
    Ok(Outcome {
        results: serde_json::json!({
            "inf_det": map.inf_det_estimate,
            "max_residual": inv.max_residual,
            "max_roundtrip_defect": inv.max_roundtrip_defect,
            "nodes": nodes,
        }),
        assertions_ok: ok,
    })
}

fn run_jet_invert(a: &JetInvert) -> Result<Outcome> {
    let n = {
        let probe = parse(&a.expr, 16).map_err(|e| anyhow!("{e}"))?;
        probe.min_arity().max(probe.target_dim())
    };
    let e: Expr = parse(&a.expr, n).map_err(|e| anyhow!("{e}"))?;
    let point = parse_point(&a.at, n)?;
    let mut exact_used = false;
    let jet = if a.exact {
        let rat_point: Option<Vec<Rat>> = point.iter().map(|&x| Rat::from_float(x)).collect();
        match rat_point
            .ok_or(())
            .and_then(|p| eval_jet::<Rat>(&e, &p, a.order).map_err(|_| ()))
            .and_then(|j| j.invert().map_err(|_| ()))
        {
            Ok(j) => {
                exact_used = true;
                // render exact coefficients through floats for the report
                let mut out = ultrajet::Jet::<f64>::new(
                    j.base_point().iter().map(|v| ultrajet::Scalar::to_f64(v)).collect(),
                    j.target_dim(),
                    j.order(),
                );
                for (alpha, v) in j.coeffs() {
                    out.set_coeff(
                        alpha.clone(),
                        v.iter().map(|x| ultrajet::Scalar::to_f64(x)).collect(),
                    );
                }
                out
            }
            Err(()) => eval_jet::<f64>(&e, &point, a.order)?.invert()?,
        }
    } else {
        eval_jet::<f64>(&e, &point, a.order)?.invert()?
    };
    Ok(Outcome {
        results: serde_json::json!({
            "expr": a.expr,
            "order": a.order,
            "at": point,
            "exact": exact_used,
            "inverse_jet": jet_to_json(&jet),
        }),
        assertions_ok: true,
    })
}

fn run_fourier_check(a: &FourierCheck) -> Result<Outcome> {
    let grid = parse_grid(&a.grid)?;
    let xi_grid = parse_grid(&a.xi_grid)?;
    let f = sample(&a.expr, &grid, 0)?;
    let transform = fourier_1d(&f, &xi_grid)?;
    let max_imag = transform
        .jets
        .iter()
        .map(|j| j.value()[1].abs())
        .fold(0.0f64, f64::max);
    let mut max_ref_err = None;
    if let Some(r) = &a.reference {
        let reff = sample(r, &xi_grid, 0)?;
        let err = transform
            .jets
            .iter()
            .zip(&reff.jets)
            .map(|(t, g)| (t.value()[0] - g.value()[0]).abs())
            .fold(0.0f64, f64::max);
        max_ref_err = Some(err);
    }
    let values: Vec<serde_json::Value> = transform
        .jets
        .iter()
        .map(|j| serde_json::json!([j.base_point()[0], j.value()[0], j.value()[1]]))
        .collect();
    let factorization = if grid.dim() == 2 {
        Some(factorization_check(&f, &xi_grid)?)
    } else {
        None
    };
    let ok = max_ref_err.map(|e| e <= 1e-6).unwrap_or(true);
    Ok(Outcome {
        results: serde_json::json!({
            "expr": a.expr,
            "max_imag": max_imag,
            "max_reference_error": max_ref_err,
            "factorization_discrepancy": factorization,
            "transform": values,
        }),
        assertions_ok: ok,
    })
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Ws { sub: WsCommand::Analyze(_) } => "ws analyze",
        Command::Fn { sub: FnCommand::Norm(_) } => "fn norm",
        Command::Explaw { sub: ExplawCommand::Check(_) } => "explaw check",
        Command::Explaw { sub: ExplawCommand::Counterexample(_) } => "explaw counterexample",
        Command::Diff { sub: DiffCommand::Compose(_) } => "diff compose",
        Command::Diff { sub: DiffCommand::Invert(_) } => "diff invert",
        Command::Jet { sub: JetCommand::Invert(_) } => "jet invert",
        Command::Fourier { sub: FourierCommand::Check(_) } => "fourier check",
    }
}

/// Merge config-file keys into argv as trailing --key value pairs, unless
/// the flag is already present (flags win).
fn merge_config(mut argv: Vec<String>) -> Result<Vec<String>> {
    let cfg_path = argv
        .iter()
        .position(|a| a == "--config")
        .and_then(|i| argv.get(i + 1).cloned());
    let Some(path) = cfg_path else { return Ok(argv) };
    let text = std::fs::read_to_string(&path)
        .with_context(|| format!("cannot read config file {path}"))?;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("config line {} is not key=value: '{line}'", lineno + 1))?;
        let flag = format!("--{}", key.trim());
        if argv.iter().any(|a| *a == flag) {
            continue;
        }
        argv.push(flag);
        argv.push(value.trim().to_string());
    }
    Ok(argv)
}

fn config_echo(argv: &[String]) -> serde_json::Value {
    let mut echo = BTreeMap::new();
    let mut i = 0;
    while i < argv.len() {
        if let Some(key) = argv[i].strip_prefix("--") {
            if i + 1 < argv.len() && !argv[i + 1].starts_with("--") {
                echo.insert(key.to_string(), argv[i + 1].clone());
                i += 2;
                continue;
            }
            echo.insert(key.to_string(), "true".to_string());
        }
        i += 1;
    }
    serde_json::json!(echo)
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let argv = match merge_config(argv) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(1);
        }
    };
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            // help/version are successes, everything else is a usage error
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(t) = cli.threads {
        if rayon::ThreadPoolBuilder::new().num_threads(t).build_global().is_err() {
            eprintln!("error: thread pool already initialized");
            return ExitCode::from(1);
        }
    }
    let start = Instant::now();
    let outcome = match &cli.command {
        Command::Ws { sub: WsCommand::Analyze(a) } => run_ws(a),
        Command::Fn { sub: FnCommand::Norm(a) } => run_fn_norm(a),
        Command::Explaw { sub: ExplawCommand::Check(a) } => run_explaw_check(a),
        Command::Explaw { sub: ExplawCommand::Counterexample(a) } => run_explaw_counterexample(a),
        Command::Diff { sub: DiffCommand::Compose(a) } => run_diff_compose(a),
        Command::Diff { sub: DiffCommand::Invert(a) } => run_diff_invert(a),
        Command::Jet { sub: JetCommand::Invert(a) } => run_jet_invert(a),
        Command::Fourier { sub: FourierCommand::Check(a) } => run_fourier_check(a),
    };
    let outcome = match outcome {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(1);
        }
    };
    let envelope = serde_json::json!({
        "schema": SCHEMA,
        "tool_version": env!("CARGO_PKG_VERSION"),
        "command": command_name(&cli.command),
        "config_echo": config_echo(&argv[1..]),
        "assertions_ok": outcome.assertions_ok,
        "results": outcome.results,
        "timings": { "total_ms": start.elapsed().as_secs_f64() * 1e3 },
    });
    let text = json::render(&envelope);
    if let Some(path) = &cli.out {
        if let Err(e) = std::fs::write(path, text + "\n") {
            eprintln!("error: cannot write {path}: {e}");
            return ExitCode::from(1);
        }
    } else {
        println!("{text}");
    }
    if outcome.assertions_ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}
