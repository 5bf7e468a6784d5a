use clap::{Args, Parser, Subcommand};
use halfsign_core::cusp::{build_cusp_triple, CuspError, CuspTriple, TrackKind};
use halfsign_core::expsums::verify::{verify, VerifyCase};
use halfsign_core::expsums::ExpSumError;
use halfsign_core::io::{
    envelope_json, error_json, read_form_cache, read_triple_cache, write_form_cache, write_triple_cache, IoError,
    OutputFormat, RunConfig,
};
use halfsign_core::qforms::{build_desk_form, check_vanishing_propagation, eigencheck, FormError, DESK_ELL};
use halfsign_core::signs::{
    count_sign_changes, meansq_fit, window_scan, IndexSet, SignsError,
};
use halfsign_core::voronoi::{
    direct_progression_sum, residual_decay, residual_scan, truncation_report, voronoi_progression, VoronoiError,
    VoronoiParams,
};
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "halfsign", version, about = "Half-integral weight cusp forms: coefficients, exponential sums, Voronoi sums, sign changes")]
struct Cli {
    /// Flat key=value configuration file.
    #[arg(long, env = "HALFSIGN_CONFIG")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Pairs {
    /// Parameters and configuration overrides as key=value.
    #[arg(value_name = "KEY=VALUE")]
    pairs: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build the desk form to order N, audit it and write the coefficient cache.
    FormBuild(Pairs),
    /// Extract the expansions at the other cusps and write the triple cache.
    CuspExtract(Pairs),
    /// Run an exponential-sum identity or bound suite (case=, bound=, exhaustive=, samples=).
    ExpsumVerify(Pairs),
    /// Compare the truncated Voronoi main term with the direct sum (x=, M=, d= or Q=, a=).
    VoronoiCompare(Pairs),
    /// Residuals on a grid (x=list, M=list, d=, a=, width= for off-integer medians).
    VoronoiScan(Pairs),
    /// Count sign changes (set=all|squarefree|progression, x=, a=, Q=).
    SignsCount(Pairs),
    /// Short-window sign-change scan (x0=, x1=, c0=, a=, Q=).
    SignsWindows(Pairs),
    /// Mean-square fit of the coefficients (grid=list).
    StatsMeansq(Pairs),
}

#[derive(Debug)]
struct Failure {
    code: u8,
    kind: &'static str,
    message: String,
}

impl Failure {
    fn input(kind: &'static str, message: impl Into<String>) -> Self {
        Self {
            code: 3,
            kind,
            message: message.into(),
        }
    }
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        let code = match e {
            IoError::UnknownKey(_) | IoError::InvalidValue { .. } => 3,
            _ => 2,
        };
        Self {
            code,
            kind: e.kind(),
            message: e.to_string(),
        }
    }
}

impl From<VoronoiError> for Failure {
    fn from(e: VoronoiError) -> Self {
        let (code, kind) = match e {
            VoronoiError::InvalidParams(_) => (3, "invalid_value"),
            VoronoiError::BeyondTruncation { .. } | VoronoiError::MissingCoefficients { .. } => (3, "beyond_truncation"),
            VoronoiError::ExpSum(_) => (3, "invalid_value"),
            _ => (1, "verification_failed"),
        };
        Self {
            code,
            kind,
            message: e.to_string(),
        }
    }
}

impl From<SignsError> for Failure {
    fn from(e: SignsError) -> Self {
        let (code, kind) = match e {
            SignsError::NotFound { .. } => (1, "not_found"),
            SignsError::BeyondTruncation { .. } => (3, "beyond_truncation"),
            SignsError::Voronoi(v) => return v.into(),
            _ => (3, "invalid_value"),
        };
        Self {
            code,
            kind,
            message: e.to_string(),
        }
    }
}

impl From<ExpSumError> for Failure {
    fn from(e: ExpSumError) -> Self {
        Self::input("invalid_value", e.to_string())
    }
}

impl From<FormError> for Failure {
    fn from(e: FormError) -> Self {
        Self {
            code: 1,
            kind: "form_error",
            message: e.to_string(),
        }
    }
}

impl From<CuspError> for Failure {
    fn from(e: CuspError) -> Self {
        Self {
            code: 1,
            kind: "cusp_error",
            message: e.to_string(),
        }
    }
}

/// Command parameters that are not configuration keys.
struct Params {
    map: BTreeMap<String, String>,
}

impl Params {
    fn take(allowed: &[&str], raw: BTreeMap<String, String>) -> Result<Self, Failure> {
        if let Some(k) = raw.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(Failure::input("unknown_key", format!("unknown parameter `{k}` (expected one of {allowed:?})")));
        }
        Ok(Self { map: raw })
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, Failure>
    where
        T::Err: std::fmt::Display,
    {
        self.map
            .get(key)
            .map(|v| {
                v.parse()
                    .map_err(|e: T::Err| Failure::input("invalid_value", format!("`{key}`: {e}")))
            })
            .transpose()
    }

    fn req<T: std::str::FromStr>(&self, key: &str) -> Result<T, Failure>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)?
            .ok_or_else(|| Failure::input("missing_parameter", format!("`{key}` is required")))
    }

    fn list<T: std::str::FromStr>(&self, key: &str) -> Result<Vec<T>, Failure>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self
            .map
            .get(key)
            .ok_or_else(|| Failure::input("missing_parameter", format!("`{key}` is required")))?;
        raw.split(',')
            .map(|s| {
                s.trim()
                    .parse()
                    .map_err(|e: T::Err| Failure::input("invalid_value", format!("`{key}`: {e}")))
            })
            .collect()
    }
}

struct Outcome {
    report: Value,
    /// Array inside `report` emitted as CSV rows; `None` gives key,value lines.
    rows: Option<&'static str>,
    passed: bool,
}

fn split_pairs(pairs: &[String], config: &mut RunConfig) -> Result<BTreeMap<String, String>, Failure> {
    let mut rest = BTreeMap::new();
    for p in pairs {
        let (k, v) = p
            .split_once('=')
            .ok_or_else(|| Failure::input("invalid_value", format!("expected key=value, got `{p}`")))?;
        if RunConfig::is_key(k) {
            config.set(k, v)?;
        } else {
            rest.insert(k.to_string(), v.to_string());
        }
    }
    Ok(rest)
}

fn load_triple(config: &RunConfig) -> Result<CuspTriple, Failure> {
    Ok(read_triple_cache(&config.cache_dir)?.0)
}

fn form_build(config: &RunConfig, _p: Params) -> Result<Outcome, Failure> {
    if config.ell != DESK_ELL {
        return Err(Failure::input("invalid_value", format!("the desk form has ell = {DESK_ELL}")));
    }
    let form = build_desk_form(config.n)?;
    let series = form.exact().expect("desk form carries exact coefficients");
    let mut checks = Vec::new();
    for p in [3u64, 5, 7] {
        checks.push(eigencheck(series, config.ell, p)?);
    }
    let vanishing = check_vanishing_propagation(series.coeffs(), (config.n as f64).sqrt() as u64);
    let passed = checks.iter().all(|c| c.passed()) && vanishing.violations.is_empty();
    let path = if passed {
        Some(write_form_cache(&config.cache_dir, &form)?.display().to_string())
    } else {
        None
    };
    Ok(Outcome {
        report: json!({
            "N": form.n_max(),
            "source": form.source_tag(),
            "eigenchecks": checks,
            "vanishing": {
                "zeros": vanishing.zeros,
                "pairs_checked": vanishing.pairs_checked,
                "violations": vanishing.violations.len(),
            },
            "cache": path,
            "passed": passed,
        }),
        rows: None,
        passed,
    })
}

fn cusp_extract(config: &RunConfig, _p: Params) -> Result<Outcome, Failure> {
    let form = read_form_cache(&config.cache_dir, config.n)?;
    let contour = config.contour();
    let triple = build_cusp_triple(&form, &contour, config.tolerance)?;
    let passed = triple.g_contours.passed && triple.h_contours.passed && triple.fricke.as_ref().map_or(true, |r| r.passed);
    write_triple_cache(&config.cache_dir, &triple, &contour)?;
    Ok(Outcome {
        report: json!({
            "n_cusp": triple.n_cusp,
            "h_kind": triple.h.kind,
            "h_source": triple.h.source,
            "h_certified": triple.h.kind == TrackKind::Certified,
            "fricke": triple.fricke,
            "g_contours": triple.g_contours,
            "h_contours": triple.h_contours,
            "passed": passed,
        }),
        rows: None,
        passed,
    })
}

fn expsum_verify(config: &RunConfig, p: Params) -> Result<Outcome, Failure> {
    let case: VerifyCase = p
        .req::<String>("case")?
        .parse()
        .map_err(|e: String| Failure::input("invalid_value", e))?;
    let mut b = case.default_bounds();
    if let Some(m) = p.get("bound")? {
        b.max_modulus = m;
        b.exhaustive_modulus = b.exhaustive_modulus.min(m);
    }
    if let Some(m) = p.get("exhaustive")? {
        b.exhaustive_modulus = m;
    }
    if let Some(s) = p.get("samples")? {
        b.samples = s;
    }
    b.seed = config.seed;
    b.ell = config.ell;
    let r = verify(case, &b)?;
    let passed = r.passed();
    Ok(Outcome {
        report: json!({ "bounds": b, "result": r, "passed": passed }),
        rows: None,
        passed,
    })
}

fn voronoi_compare(config: &RunConfig, p: Params) -> Result<Outcome, Failure> {
    let triple = load_triple(config)?;
    let x: f64 = p.req("x")?;
    let m: usize = p.req("M")?;
    let a: u64 = p.get("a")?.unwrap_or(0);
    let d: Option<u64> = p.get("d")?;
    let q: Option<u64> = p.get("Q")?;
    let mut params = match (d, q) {
        (Some(d), None) => VoronoiParams::new(x, m, d, a, config.ell)?,
        (None, Some(q)) => VoronoiParams::new(x, m, q, a, config.ell)?,
        _ => return Err(Failure::input("invalid_value", "give exactly one of d= and Q=")),
    };
    params.rho = config.rho;
    let row = if d.is_some() {
        serde_json::to_value(truncation_report(&params, &triple)?).expect("serializable")
    } else {
        let main = voronoi_progression(&params, &triple)?;
        let direct = direct_progression_sum(x, a, params.d, &triple.f)?;
        json!({ "x": x, "m": m, "q": params.d, "a": a % params.d, "main_term": main, "direct_value": direct, "residual": (direct - main).abs() })
    };
    Ok(Outcome {
        report: json!({ "rows": [row] }),
        rows: Some("rows"),
        passed: true,
    })
}

fn voronoi_scan(config: &RunConfig, p: Params) -> Result<Outcome, Failure> {
    let triple = load_triple(config)?;
    let xs: Vec<f64> = p.list("x")?;
    let ms: Vec<usize> = p.list("M")?;
    let d: u64 = p.get("d")?.unwrap_or(1);
    let a: u64 = p.get("a")?.unwrap_or(0);
    match p.get::<usize>("width")? {
        None => {
            let rows = residual_scan(&xs, &ms, d, a, &triple)?;
            Ok(Outcome {
                report: json!({ "rows": rows }),
                rows: Some("rows"),
                passed: true,
            })
        }
        Some(width) => {
            let mut fits = Vec::new();
            for &xc in &xs {
                let fit = residual_decay(xc, width, &ms, d, a, &triple)?;
                for (m, r) in fit.ms.iter().zip(&fit.median_residuals) {
                    fits.push(json!({ "x_centre": xc, "width": width, "d": d, "a": a, "m": m, "median_residual": r, "slope": fit.slope }));
                }
            }
            Ok(Outcome {
                report: json!({ "rows": fits }),
                rows: Some("rows"),
                passed: true,
            })
        }
    }
}

fn index_set(p: &Params, bound: usize) -> Result<IndexSet, Failure> {
    match p.get::<String>("set")?.as_deref().unwrap_or("all") {
        "all" => Ok(IndexSet::all(bound)),
        "squarefree" => Ok(IndexSet::squarefree(bound)),
        "progression" => {
            let q: u64 = p.req("Q")?;
            let a: u64 = p.get("a")?.unwrap_or(0);
            Ok(IndexSet::progression(a % q.max(1), q, bound)?)
        }
        other => Err(Failure::input("invalid_value", format!("unknown set `{other}`"))),
    }
}

fn signs_count(config: &RunConfig, p: Params) -> Result<Outcome, Failure> {
    let form = read_form_cache(&config.cache_dir, config.n)?;
    let x: usize = p.get("x")?.unwrap_or(form.n_max());
    let set = index_set(&p, form.n_max())?;
    let r = count_sign_changes(form.lambdas(), &set, x)?;
    let rows: Vec<Value> = r.intervals.iter().map(|&(i, j)| json!({ "i": i, "j": j })).collect();
    Ok(Outcome {
        report: json!({ "set": r.set, "x": r.x, "count": r.count, "intervals": rows }),
        rows: Some("intervals"),
        passed: true,
    })
}

fn signs_windows(config: &RunConfig, p: Params) -> Result<Outcome, Failure> {
    let form = read_form_cache(&config.cache_dir, config.n)?;
    let q: u64 = p.get("Q")?.unwrap_or(1);
    let a: u64 = p.get("a")?.unwrap_or(0);
    let set = if q == 1 {
        IndexSet::all(form.n_max())
    } else {
        IndexSet::progression(a % q.max(1), q, form.n_max())?
    };
    let x0: usize = p.req("x0")?;
    let x1: usize = p.req("x1")?;
    let c0: f64 = p.req("c0")?;
    let r = window_scan(form.lambdas(), &set, x0, x1, c0)?;
    Ok(Outcome {
        report: json!({
            "kind": "signs-windows",
            "x0": r.x0,
            "x1": r.x1,
            "c0": r.c0,
            "label": r.label,
            "c0_star": r.c0_star,
            "worst_x": r.worst_x,
            "windows": r.windows,
            "count": r.count,
            "implied_lower_bound": r.implied_lower_bound,
            "failure_count": r.failure_count,
            "failures": r.failures,
            "exponent_fit": Value::Null,
        }),
        rows: None,
        passed: true,
    })
}

fn stats_meansq(config: &RunConfig, p: Params) -> Result<Outcome, Failure> {
    let form = read_form_cache(&config.cache_dir, config.n)?;
    let grid: Vec<usize> = p.list("grid")?;
    let track = halfsign_core::io::form_track(&form);
    let fit = meansq_fit(&track, &grid)?;
    let rows: Vec<Value> = fit
        .grid
        .iter()
        .zip(&fit.sums)
        .zip(&fit.envelope)
        .map(|((x, s), e)| json!({ "x": x, "sum_sq": s, "d_fit": fit.d_fit, "envelope": e, "slope_resid": fit.slope_resid }))
        .collect();
    Ok(Outcome {
        report: json!({ "d_fit": fit.d_fit, "slope_resid": fit.slope_resid, "rows": rows }),
        rows: Some("rows"),
        passed: true,
    })
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string().replace(',', ";"),
    }
}

fn to_csv(out: &Outcome) -> String {
    let mut text = String::new();
    match out.rows.and_then(|k| out.report.get(k)).and_then(Value::as_array) {
        Some(rows) => {
            let cols: Vec<String> = rows
                .first()
                .and_then(Value::as_object)
                .map(|o| o.keys().cloned().collect())
                .unwrap_or_default();
            text.push_str(&cols.join(","));
            text.push('\n');
            for r in rows {
                let line: Vec<String> = cols.iter().map(|c| cell(&r[c])).collect();
                text.push_str(&line.join(","));
                text.push('\n');
            }
        }
        None => {
            text.push_str("key,value\n");
            if let Some(o) = out.report.as_object() {
                for (k, v) in o {
                    text.push_str(&format!("{k},{}\n", cell(v)));
                }
            }
        }
    }
    text
}

fn run(cli: Cli) -> Result<(String, bool), Failure> {
    let mut config = RunConfig::from_env();
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::input("invalid_value", format!("config {}: {e}", path.display())))?;
        config.apply_file_text(&text)?;
    }
    let (name, pairs, allowed, handler): (&str, &Pairs, &[&str], fn(&RunConfig, Params) -> Result<Outcome, Failure>) =
        match &cli.command {
            Command::FormBuild(p) => ("form-build", p, &[], form_build),
            Command::CuspExtract(p) => ("cusp-extract", p, &[], cusp_extract),
            Command::ExpsumVerify(p) => ("expsum-verify", p, &["case", "bound", "exhaustive", "samples"], expsum_verify),
            Command::VoronoiCompare(p) => ("voronoi-compare", p, &["x", "M", "d", "Q", "a"], voronoi_compare),
            Command::VoronoiScan(p) => ("voronoi-scan", p, &["x", "M", "d", "a", "width"], voronoi_scan),
            Command::SignsCount(p) => ("signs-count", p, &["set", "x", "a", "Q"], signs_count),
            Command::SignsWindows(p) => ("signs-windows", p, &["x0", "x1", "c0", "a", "Q"], signs_windows),
            Command::StatsMeansq(p) => ("stats-meansq", p, &["grid"], stats_meansq),
        };
    let raw = split_pairs(&pairs.pairs, &mut config)?;
    config.validate()?;
    let params = Params::take(allowed, raw)?;
    let out = handler(&config, params)?;
    let text = match config.format {
        OutputFormat::Json => envelope_json(name, &config, &out.report)?,
        OutputFormat::Csv => to_csv(&out),
    };
    Ok((text, out.passed))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            print!("{}", error_json("bad_arguments", &e.to_string()));
            return ExitCode::from(3);
        }
    };
    match run(cli) {
        Ok((text, passed)) => {
            print!("{text}");
            if passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(f) => {
            print!("{}", error_json(f.kind, &f.message));
            ExitCode::from(f.code)
        }
    }
}
