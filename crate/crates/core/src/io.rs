//! Coefficient caches, run configuration and report envelopes.
//!
//! Cache files are CSV with one header line
//! `# halfint ell=<ℓ> N=<N> source=<tag> kind=<exact|numeric|certified>`
//! followed by rows `n,lambda_re,lambda_im,abs_err` written with 17
//! significant digits, which round-trips every `f64` exactly.

use crate::cusp::{AgreementReport, CoefficientTrack, ContourSpec, CuspTriple, TrackKind};
use crate::qforms::HalfIntegralForm;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::{self, File, OpenOptions};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;
pub const CACHE_DIR_ENV: &str = "HALFSIGN_CACHE_DIR";
pub const DEFAULT_CACHE_DIR: &str = "halfsign-cache";
const LOCK_NAME: &str = ".lock";

#[derive(Debug, Error)]
pub enum IoError {
    #[error("cache file {0} not found; build it first")]
    CacheMissing(PathBuf),
    #[error("cache directory {0} is locked by another writer")]
    CacheLocked(PathBuf),
    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },
    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),
    #[error("invalid value for `{key}`: {msg}")]
    InvalidValue { key: String, msg: String },
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Json(#[from] serde_json::Error),
}

impl IoError {
    pub fn kind(&self) -> &'static str {
        match self {
            IoError::CacheMissing(_) => "cache_missing",
            IoError::CacheLocked(_) => "cache_locked",
            IoError::Parse { .. } => "cache_corrupt",
            IoError::UnknownKey(_) => "unknown_key",
            IoError::InvalidValue { .. } => "invalid_value",
            IoError::Io(_) => "io",
            IoError::Json(_) => "json",
        }
    }
}

fn kind_str(kind: TrackKind) -> &'static str {
    match kind {
        TrackKind::Exact => "exact",
        TrackKind::Numeric => "numeric",
        TrackKind::Certified => "certified",
    }
}

/// Serializes a track in the cache format.
pub fn track_to_csv(track: &CoefficientTrack, ell: u32) -> String {
    let n = track.n_max();
    let mut out = String::with_capacity(64 * (n + 1));
    let _ = writeln!(
        out,
        "# halfint ell={ell} N={n} source={} kind={}",
        track.source.replace(char::is_whitespace, "_"),
        kind_str(track.kind)
    );
    for k in 1..=n {
        let _ = writeln!(out, "{k},{:.16e},{:.16e},{:.16e}", track.re[k], track.im[k], track.err[k]);
    }
    out
}

/// Parses the cache format; returns `(ℓ, track)`.
pub fn track_from_csv(text: &str, path: &str) -> Result<(u32, CoefficientTrack), IoError> {
    let bad = |line: usize, msg: String| IoError::Parse {
        path: path.to_string(),
        line,
        msg,
    };
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| bad(1, "empty file".into()))?;
    let fields = header
        .strip_prefix("# halfint ")
        .ok_or_else(|| bad(1, "missing `# halfint` header".into()))?;
    let mut map = BTreeMap::new();
    for f in fields.split_whitespace() {
        let (k, v) = f.split_once('=').ok_or_else(|| bad(1, format!("bad header field `{f}`")))?;
        map.insert(k, v);
    }
    let get = |k: &str| map.get(k).copied().ok_or_else(|| bad(1, format!("header lacks `{k}`")));
    let ell: u32 = get("ell")?.parse().map_err(|e| bad(1, format!("ell: {e}")))?;
    let n: usize = get("N")?.parse().map_err(|e| bad(1, format!("N: {e}")))?;
    let source = get("source")?.to_string();
    let kind = match get("kind")? {
        "exact" => TrackKind::Exact,
        "numeric" => TrackKind::Numeric,
        "certified" => TrackKind::Certified,
        other => return Err(bad(1, format!("unknown kind `{other}`"))),
    };
    let mut re = vec![0.0; n + 1];
    let mut im = vec![0.0; n + 1];
    let mut err = vec![0.0; n + 1];
    let mut seen = 0;
    for (i, line) in lines.enumerate() {
        let ln = i + 2;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 4 {
            return Err(bad(ln, format!("expected 4 columns, got {}", cols.len())));
        }
        let k: usize = cols[0].parse().map_err(|e| bad(ln, format!("n: {e}")))?;
        if k != seen + 1 || k > n {
            return Err(bad(ln, format!("row n={k} out of sequence")));
        }
        let num = |s: &str, what: &str| s.parse::<f64>().map_err(|e| bad(ln, format!("{what}: {e}")));
        re[k] = num(cols[1], "lambda_re")?;
        im[k] = num(cols[2], "lambda_im")?;
        err[k] = num(cols[3], "abs_err")?;
        seen = k;
    }
    if seen != n {
        return Err(bad(n + 1, format!("expected {n} rows, found {seen}")));
    }
    Ok((
        ell,
        CoefficientTrack {
            kind,
            source,
            re,
            im,
            err,
        },
    ))
}

pub fn form_track(form: &HalfIntegralForm) -> CoefficientTrack {
    let mut t = CoefficientTrack::exact(form.lambdas(), form.source_tag());
    if form.exact().is_none() {
        t.kind = TrackKind::Numeric;
    }
    t
}

pub fn form_cache_path(dir: &Path, n: usize) -> PathBuf {
    dir.join(format!("form_N{n}.csv"))
}

/// Writes `text` through a temporary file and a rename.
fn write_atomic(path: &Path, text: &str) -> Result<(), IoError> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = File::create(&tmp)?;
        f.write_all(text.as_bytes())?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

fn read_existing(path: &Path) -> Result<String, IoError> {
    match fs::read_to_string(path) {
        Ok(s) => Ok(s),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(IoError::CacheMissing(path.to_path_buf())),
        Err(e) => Err(e.into()),
    }
}

pub fn write_form_cache(dir: &Path, form: &HalfIntegralForm) -> Result<PathBuf, IoError> {
    let _lock = CacheLock::acquire(dir)?;
    let path = form_cache_path(dir, form.n_max());
    write_atomic(&path, &track_to_csv(&form_track(form), form.ell()))?;
    Ok(path)
}

pub fn read_form_cache(dir: &Path, n: usize) -> Result<HalfIntegralForm, IoError> {
    let path = form_cache_path(dir, n);
    let text = read_existing(&path)?;
    let (ell, t) = track_from_csv(&text, &path.display().to_string())?;
    Ok(HalfIntegralForm::from_lambda(ell, t.re, &t.source))
}

/// Everything in a [`CuspTriple`] except the coefficient tracks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripleMeta {
    pub schema_version: u32,
    pub ell: u32,
    pub n_cusp: usize,
    pub contour: ContourMeta,
    pub fricke: Option<AgreementReport>,
    pub g_contours: AgreementReport,
    pub h_contours: AgreementReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContourMeta {
    pub y0: f64,
    pub samples: usize,
    pub n_max: usize,
    pub tail_bound: f64,
}

impl From<&ContourSpec> for ContourMeta {
    fn from(c: &ContourSpec) -> Self {
        Self {
            y0: c.y0,
            samples: c.samples,
            n_max: c.n_max,
            tail_bound: c.tail_bound,
        }
    }
}

pub fn triple_meta_path(dir: &Path) -> PathBuf {
    dir.join("cusp_meta.json")
}

pub fn triple_track_path(dir: &Path, which: &str) -> PathBuf {
    dir.join(format!("cusp_{which}.csv"))
}

pub fn write_triple_cache(dir: &Path, triple: &CuspTriple, contour: &ContourSpec) -> Result<(), IoError> {
    let _lock = CacheLock::acquire(dir)?;
    for (which, t) in [("f", &triple.f), ("g", &triple.g), ("h", &triple.h)] {
        write_atomic(&triple_track_path(dir, which), &track_to_csv(t, triple.ell))?;
    }
    let meta = TripleMeta {
        schema_version: SCHEMA_VERSION,
        ell: triple.ell,
        n_cusp: triple.n_cusp,
        contour: contour.into(),
        fricke: triple.fricke.clone(),
        g_contours: triple.g_contours.clone(),
        h_contours: triple.h_contours.clone(),
    };
    write_atomic(&triple_meta_path(dir), &(serde_json::to_string_pretty(&meta)? + "\n"))
}

pub fn read_triple_cache(dir: &Path) -> Result<(CuspTriple, TripleMeta), IoError> {
    let meta_path = triple_meta_path(dir);
    let meta: TripleMeta = serde_json::from_str(&read_existing(&meta_path)?)?;
    let mut tracks = Vec::with_capacity(3);
    for which in ["f", "g", "h"] {
        let path = triple_track_path(dir, which);
        let (ell, t) = track_from_csv(&read_existing(&path)?, &path.display().to_string())?;
        if ell != meta.ell {
            return Err(IoError::Parse {
                path: path.display().to_string(),
                line: 1,
                msg: format!("ell={ell} disagrees with metadata ell={}", meta.ell),
            });
        }
        tracks.push(t);
    }
    let h = tracks.pop().unwrap();
    let g = tracks.pop().unwrap();
    let f = tracks.pop().unwrap();
    Ok((
        CuspTriple {
            ell: meta.ell,
            n_cusp: meta.n_cusp,
            f,
            g,
            h,
            fricke: meta.fricke.clone(),
            g_contours: meta.g_contours.clone(),
            h_contours: meta.h_contours.clone(),
        },
        meta,
    ))
}

/// Exclusive writer lock on a cache directory, released on drop.
#[derive(Debug)]
pub struct CacheLock {
    path: PathBuf,
}

impl CacheLock {
    pub fn acquire(dir: &Path) -> Result<Self, IoError> {
        fs::create_dir_all(dir)?;
        let path = dir.join(LOCK_NAME);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
                Ok(Self { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(IoError::CacheLocked(dir.to_path_buf())),
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for CacheLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

/// Flat run configuration. Keys: `ell`, `N`, `rho`, `y0`, `S`, `n_max`,
/// `tail_bound`, `tolerance`, `cache_dir`, `format`, `seed`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub ell: u32,
    #[serde(rename = "N")]
    pub n: usize,
    pub rho: f64,
    pub y0: f64,
    #[serde(rename = "S")]
    pub samples: usize,
    pub n_max: usize,
    pub tail_bound: f64,
    /// Cusp agreement tolerance.
    pub tolerance: f64,
    pub cache_dir: PathBuf,
    pub format: OutputFormat,
    pub seed: u64,
}

pub const CONFIG_KEYS: &[&str] = &[
    "ell", "N", "rho", "y0", "S", "n_max", "tail_bound", "tolerance", "cache_dir", "format", "seed",
];

impl Default for RunConfig {
    fn default() -> Self {
        let c = ContourSpec::default();
        Self {
            ell: crate::qforms::DESK_ELL,
            n: 20_000,
            rho: 1.0 / 6.0,
            y0: c.y0,
            samples: c.samples,
            n_max: c.n_max,
            tail_bound: c.tail_bound,
            tolerance: 1e-6,
            cache_dir: PathBuf::from(DEFAULT_CACHE_DIR),
            format: OutputFormat::Json,
            seed: 0x5eed,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, IoError>
where
    T::Err: std::fmt::Display,
{
    v.trim().parse().map_err(|e: T::Err| IoError::InvalidValue {
        key: key.to_string(),
        msg: e.to_string(),
    })
}

impl RunConfig {
    /// Defaults, then the cache directory from the environment.
    pub fn from_env() -> Self {
        let mut c = Self::default();
        if let Some(dir) = std::env::var_os(CACHE_DIR_ENV) {
            c.cache_dir = PathBuf::from(dir);
        }
        c
    }

    pub fn is_key(key: &str) -> bool {
        CONFIG_KEYS.contains(&key)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), IoError> {
        match key {
            "ell" => self.ell = parse_num(key, value)?,
            "N" => self.n = parse_num(key, value)?,
            "rho" => self.rho = parse_num(key, value)?,
            "y0" => self.y0 = parse_num(key, value)?,
            "S" => self.samples = parse_num(key, value)?,
            "n_max" => self.n_max = parse_num(key, value)?,
            "tail_bound" => self.tail_bound = parse_num(key, value)?,
            "tolerance" => self.tolerance = parse_num(key, value)?,
            "cache_dir" => self.cache_dir = PathBuf::from(value.trim()),
            "format" => {
                self.format = match value.trim() {
                    "csv" => OutputFormat::Csv,
                    "json" => OutputFormat::Json,
                    other => {
                        return Err(IoError::InvalidValue {
                            key: key.into(),
                            msg: format!("`{other}` is not csv or json"),
                        })
                    }
                }
            }
            "seed" => self.seed = parse_num(key, value)?,
            _ => return Err(IoError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    /// Applies a `key=value` file; `#` starts a comment.
    pub fn apply_file_text(&mut self, text: &str) -> Result<(), IoError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| IoError::Parse {
                path: "config".into(),
                line: i + 1,
                msg: format!("expected key=value, got `{line}`"),
            })?;
            self.set(k.trim(), v)?;
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<(), IoError> {
        let fail = |key: &str, msg: &str| {
            Err(IoError::InvalidValue {
                key: key.into(),
                msg: msg.into(),
            })
        };
        if !(1..=20).contains(&self.ell) {
            return fail("ell", "must lie in 1..=20");
        }
        if self.n < crate::qforms::DESK_MIN_ORDER || self.n > 2_000_000 {
            return fail("N", "must lie in 25..=2000000");
        }
        if !(self.rho > 0.0 && self.rho <= 0.5) {
            return fail("rho", "must lie in (0, 1/2]");
        }
        if !(self.tolerance > 0.0 && self.tolerance < 1.0) {
            return fail("tolerance", "must lie in (0, 1)");
        }
        if !(self.tail_bound > 0.0 && self.tail_bound < 1.0) {
            return fail("tail_bound", "must lie in (0, 1)");
        }
        self.contour().validate().map_err(|e| IoError::InvalidValue {
            key: "contour".into(),
            msg: e.to_string(),
        })
    }

    pub fn contour(&self) -> ContourSpec {
        ContourSpec {
            y0: self.y0,
            samples: self.samples,
            n_max: self.n_max,
            tail_bound: self.tail_bound,
        }
    }
}

/// `{schema_version, command, config, report}`.
#[derive(Debug, Serialize)]
pub struct Envelope<'a, T: Serialize> {
    pub schema_version: u32,
    pub command: &'a str,
    pub config: &'a RunConfig,
    pub report: T,
}

pub fn envelope_json<T: Serialize>(command: &str, config: &RunConfig, report: T) -> Result<String, IoError> {
    let env = Envelope {
        schema_version: SCHEMA_VERSION,
        command,
        config,
        report,
    };
    Ok(serde_json::to_string_pretty(&env)? + "\n")
}

#[derive(Debug, Serialize)]
struct ErrorBody<'a> {
    kind: &'a str,
    message: String,
}

#[derive(Debug, Serialize)]
struct ErrorEnvelope<'a> {
    schema_version: u32,
    error: ErrorBody<'a>,
}

pub fn error_json(kind: &str, message: &str) -> String {
    let env = ErrorEnvelope {
        schema_version: SCHEMA_VERSION,
        error: ErrorBody {
            kind,
            message: message.to_string(),
        },
    };
    serde_json::to_string(&env).unwrap_or_else(|_| format!("{{\"schema_version\":{SCHEMA_VERSION}}}")) + "\n"
}

/// Rows as CSV with a header; values use `{}` so output is deterministic.
pub fn csv_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for r in rows {
        out.push_str(&r.join(","));
        out.push('\n');
    }
    out
}
