//! Sign changes of coefficient sequences, the `n₀` search, the kernel
//! detector `J_τ`, window scans and mean-square statistics.
//!
//! A sign change of `{v(n)}_{n∈𝒜}` is a pair `i < j` in `𝒜` with
//! `v(i) v(j) < 0` and `v(k) = 0` for every `k ∈ 𝒜` strictly between.

use crate::arith::{factorize, gcd_u64, is_squarefree};
use crate::cusp::{CoefficientTrack, CuspTriple};
use crate::expsums::{phi_a, ExpSumContext, ExpSumError};
use crate::numeric::{gauss_legendre, loglog_slope, KahanSum};
use crate::voronoi::{direct_progression_sum, VoronoiError};
use serde::Serialize;
use std::f64::consts::{PI, TAU};
use thiserror::Error;

/// Multiple of the error envelope a value must exceed to count as nonzero.
pub const CERTIFY_FACTOR: f64 = 10.0;
/// Default kernel width in units of `n₀^{−1/2}`.
pub const DEFAULT_ALPHA_SCALE: f64 = 4.0;
const GL_NODES: usize = 8;
const MAX_PIECE: f64 = 1.0 / 32.0;

#[derive(Debug, Error)]
pub enum SignsError {
    #[error("invalid index set: {0}")]
    InvalidSet(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("need values up to {needed}, have {available}")]
    BeyondTruncation { needed: usize, available: usize },
    #[error("no certified n0 for Q={q}, a={a} in 1..={scanned}")]
    NotFound { q: u64, a: u64, scanned: usize },
    #[error(transparent)]
    ExpSum(#[from] ExpSumError),
    #[error(transparent)]
    Voronoi(#[from] VoronoiError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum IndexKind {
    All,
    Squarefree,
    Progression { a: u64, q: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct IndexSet {
    pub kind: IndexKind,
    pub bound: usize,
}

impl IndexSet {
    pub fn all(bound: usize) -> Self {
        Self { kind: IndexKind::All, bound }
    }

    pub fn squarefree(bound: usize) -> Self {
        Self { kind: IndexKind::Squarefree, bound }
    }

    pub fn progression(a: u64, q: u64, bound: usize) -> Result<Self, SignsError> {
        if q == 0 || a >= q {
            return Err(SignsError::InvalidSet(format!("need Q >= 1 and 0 <= a < Q, got a={a}, Q={q}")));
        }
        Ok(Self {
            kind: IndexKind::Progression { a, q },
            bound,
        })
    }

    pub fn contains(&self, n: usize) -> bool {
        if n == 0 || n > self.bound {
            return false;
        }
        match self.kind {
            IndexKind::All => true,
            IndexKind::Squarefree => is_squarefree(n as u64),
            IndexKind::Progression { a, q } => n as u64 % q == a,
        }
    }

    /// Members `≤ min(x, bound)` in increasing order.
    pub fn members(&self, x: usize) -> impl Iterator<Item = usize> + '_ {
        let top = x.min(self.bound);
        let (start, step) = match self.kind {
            IndexKind::Progression { a, q } => (if a == 0 { q as usize } else { a as usize }, q as usize),
            _ => (1, 1),
        };
        (start..=top).step_by(step.max(1)).filter(move |&n| self.contains(n))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignChangeReport {
    pub set: IndexSet,
    pub x: usize,
    pub intervals: Vec<(usize, usize)>,
    pub count: usize,
}

/// Left-to-right scan over members `≤ x`; consecutive nonzero members of
/// opposite sign give one interval each.
pub fn count_sign_changes(values: &[f64], set: &IndexSet, x: usize) -> Result<SignChangeReport, SignsError> {
    let top = x.min(set.bound);
    if top >= values.len() {
        return Err(SignsError::BeyondTruncation {
            needed: top,
            available: values.len().saturating_sub(1),
        });
    }
    let mut intervals = Vec::new();
    let mut last: Option<usize> = None;
    for n in set.members(top) {
        let v = values[n];
        if v == 0.0 {
            continue;
        }
        if let Some(i) = last {
            if values[i] * v < 0.0 {
                intervals.push((i, n));
            }
        }
        last = Some(n);
    }
    Ok(SignChangeReport {
        set: *set,
        x,
        count: intervals.len(),
        intervals,
    })
}

/// Re-checks every interval against the definition. Returns the offending
/// intervals (empty when the report is valid).
pub fn validate_report(values: &[f64], report: &SignChangeReport) -> Vec<(usize, usize)> {
    let set = &report.set;
    let mut bad = Vec::new();
    let mut prev_end = 0;
    for &(i, j) in &report.intervals {
        let ok = i < j
            && j <= report.x.min(set.bound)
            && j < values.len()
            && i >= prev_end
            && set.contains(i)
            && set.contains(j)
            && values[i] * values[j] < 0.0
            && (i + 1..j).all(|k| !set.contains(k) || values[k] == 0.0);
        if !ok {
            bad.push((i, j));
        }
        prev_end = j;
    }
    bad
}

/// Which hypothesis of the sign-change theorem `(a, Q)` satisfies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TheoremCase {
    /// `Q = 1`.
    Trivial,
    /// `a = 0` and every `p^α ‖ Q` has `α` odd.
    ZeroResidue,
    /// `(a, Q) = 1` and `p² | Q` for every `p | Q`.
    Powerful,
}

pub fn theorem_case(a: u64, q: u64) -> Option<TheoremCase> {
    if q == 1 {
        return Some(TheoremCase::Trivial);
    }
    if q == 0 || q % 2 == 0 {
        return None;
    }
    let fac = factorize(q).ok()?;
    if a % q == 0 && fac.factors().iter().all(|&(_, e)| e % 2 == 1) {
        return Some(TheoremCase::ZeroResidue);
    }
    if gcd_u64(a % q, q) == 1 && fac.factors().iter().all(|&(_, e)| e >= 2) {
        return Some(TheoremCase::Powerful);
    }
    None
}

pub fn hypothesis_label(a: u64, q: u64) -> &'static str {
    match theorem_case(a, q) {
        Some(_) => "within theorem hypotheses",
        None => "outside theorem hypotheses",
    }
}

/// A certified `n₀ = 2^j f₀` and the kernel width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelParams {
    pub n0: usize,
    pub j: u32,
    pub f0: usize,
    pub alpha: f64,
    pub q: u64,
    pub a: u64,
}

impl KernelParams {
    pub fn with_alpha_scale(self, scale: f64) -> Self {
        Self {
            alpha: scale / (self.n0 as f64).sqrt(),
            ..self
        }
    }

    /// `t_m = (m + 1/8) n₀^{−1/2}`.
    pub fn t_m(&self, m: usize) -> f64 {
        (m as f64 + 0.125) / (self.n0 as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct N0Search {
    pub params: KernelParams,
    pub lambda_h: f64,
    pub phi_re: f64,
    pub value: f64,
    pub envelope: f64,
    pub case: Option<TheoremCase>,
    /// Candidates skipped because `φ_a(n, Q)` vanishes identically there.
    pub pruned: Vec<usize>,
    /// Candidates evaluated but not certified.
    pub uncertified: usize,
}

/// Whether `φ_a(n, Q)` is forced to vanish for a candidate `n = 2^j f₀`.
/// `a = 0`: a prime `p | (n, Q)` with `p^α ‖ Q`, `α` odd, kills the Salié
/// factor. `(a, Q) = 1`: `p | (n, Q)` with `p² | Q` leaves `y² ≡ an` insoluble.
pub fn phi_forced_zero(n: usize, a: u64, q: u64) -> bool {
    let Ok(fac) = factorize(q) else { return false };
    let a = a % q;
    let coprime = gcd_u64(a, q) == 1;
    fac.factors().iter().any(|&(p, e)| {
        n as u64 % p == 0 && ((a == 0 && e % 2 == 1) || (coprime && e >= 2))
    })
}

/// `(j, f₀)` with `n = 2^j f₀`, or `None` unless `f₀` is odd and squarefree.
pub fn split_n0(n: usize) -> Option<(u32, usize)> {
    if n == 0 {
        return None;
    }
    let j = n.trailing_zeros();
    let f0 = n >> j;
    is_squarefree(f0 as u64).then_some((j, f0))
}

/// Error envelope of `λ_h(n) φ_a(n, Q)`: the coefficient error times `|φ|`,
/// plus a rounding allowance for the character sum.
fn product_envelope(lambda: f64, err: f64, phi: f64, q: u64) -> f64 {
    let phi_round = 64.0 * f64::EPSILON * (2.0 * q as f64).sqrt() * q as f64;
    err * phi.abs() + (lambda.abs() + err) * phi_round
}

/// Smallest `n₀ = 2^j f₀ ≤ N_h` with `|λ_h(n₀) φ_a(n₀,Q)|` above
/// [`CERTIFY_FACTOR`] times its envelope.
pub fn find_n0(q: u64, a: u64, h: &CoefficientTrack, ell: u32) -> Result<N0Search, SignsError> {
    if q == 0 || q % 2 == 0 {
        return Err(SignsError::InvalidParams(format!("Q must be odd, got {q}")));
    }
    let a = a % q;
    let ctx = ExpSumContext::new(q, ell)?;
    let mut pruned = Vec::new();
    let mut uncertified = 0;
    for n in 1..=h.n_max() {
        let Some((j, f0)) = split_n0(n) else { continue };
        if phi_forced_zero(n, a, q) {
            pruned.push(n);
            continue;
        }
        let lambda = h.re[n];
        let err = h.err[n];
        if lambda.abs() <= CERTIFY_FACTOR * err {
            uncertified += 1;
            continue;
        }
        // λ_h(n) φ_a(n,Q) is real, so φ is real wherever λ_h(n) ≠ 0.
        let phi = phi_a(a as i64, n as i64, &ctx)?;
        let value = lambda * phi.re;
        let envelope = product_envelope(lambda, err, phi.norm(), q);
        if value.abs() > CERTIFY_FACTOR * envelope && value != 0.0 {
            return Ok(N0Search {
                params: KernelParams {
                    n0: n,
                    j,
                    f0,
                    alpha: DEFAULT_ALPHA_SCALE / (n as f64).sqrt(),
                    q,
                    a,
                },
                lambda_h: lambda,
                phi_re: phi.re,
                value,
                envelope,
                case: theorem_case(a, q),
                pruned,
                uncertified,
            });
        }
        uncertified += 1;
    }
    Err(SignsError::NotFound {
        q,
        a,
        scanned: h.n_max(),
    })
}

/// Prefix sums of `λ_f` over `n ≡ a (mod Q)`, checked once against the
/// divisor-sum route.
#[derive(Debug, Clone)]
pub struct ProgressionSums {
    pub q: u64,
    pub a: u64,
    prefix: Vec<f64>,
}

impl ProgressionSums {
    pub fn new(a: u64, q: u64, f: &CoefficientTrack) -> Result<Self, SignsError> {
        if q == 0 {
            return Err(SignsError::InvalidParams("Q = 0".into()));
        }
        let a = a % q;
        let mut prefix = Vec::with_capacity(f.n_max() + 1);
        prefix.push(0.0);
        let mut s = KahanSum::new();
        for n in 1..=f.n_max() {
            if n as u64 % q == a {
                s.add(f.re[n]);
            }
            prefix.push(s.value());
        }
        if f.n_max() > 0 {
            let top = f.n_max() as f64;
            let check = direct_progression_sum(top, a, q, f)?;
            debug_assert!((check - prefix[f.n_max()]).abs() <= 1e-9 * (1.0 + check.abs()));
        }
        Ok(Self { q, a, prefix })
    }

    pub fn n_max(&self) -> usize {
        self.prefix.len() - 1
    }

    /// `S^𝒜(y)` for real `y ≥ 0`.
    pub fn at(&self, y: f64) -> Result<f64, SignsError> {
        if y >= (self.n_max() + 1) as f64 {
            return Err(SignsError::BeyondTruncation {
                needed: y.floor() as usize,
                available: self.n_max(),
            });
        }
        Ok(if y < 1.0 { 0.0 } else { self.prefix[y.floor() as usize] })
    }
}

/// `k_τ(u) = (1 − |u|)(1 + τ cos(2π α √n₀ u))`.
pub fn kernel_k(u: f64, tau: f64, params: &KernelParams) -> f64 {
    (1.0 - u.abs()) * (1.0 + tau * (TAU * params.alpha * (params.n0 as f64).sqrt() * u).cos())
}

/// `J_τ(t) = ∫_{−1}^{1} F(t + αu) k_τ(u) du` with
/// `F(s) = π √Q S^𝒜((Qs)²) / √s`. The step function `S^𝒜` is integrated
/// piece by piece between the points where `(Q(t+αu))²` crosses an integer.
pub fn kernel_j(t: f64, tau: f64, params: &KernelParams, sums: &ProgressionSums) -> Result<f64, SignsError> {
    let alpha = params.alpha;
    let q = params.q as f64;
    if tau.abs() != 1.0 || alpha <= 0.0 || t - alpha <= 0.0 {
        return Err(SignsError::InvalidParams(format!("need tau = ±1 and t > alpha > 0 (t={t}, alpha={alpha})")));
    }
    let top = (q * (t + alpha)).powi(2);
    if top >= (sums.n_max() + 1) as f64 {
        return Err(SignsError::BeyondTruncation {
            needed: top.floor() as usize,
            available: sums.n_max(),
        });
    }
    let lo = (q * (t - alpha)).powi(2);
    let mut cuts = vec![-1.0, 0.0, 1.0];
    for n in (lo.floor() as usize + 1)..=(top.floor() as usize) {
        if n as u64 % sums.q == sums.a {
            cuts.push(((n as f64).sqrt() / q - t) / alpha);
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let (nodes, weights) = gauss_legendre(GL_NODES);
    let mut total = KahanSum::new();
    let pre = PI * q.sqrt();
    for w in cuts.windows(2) {
        let (u0, u1) = (w[0], w[1]);
        if u1 <= u0 {
            continue;
        }
        let mid = t + alpha * 0.5 * (u0 + u1);
        let s = sums.at((q * mid).powi(2))?;
        if s == 0.0 {
            continue;
        }
        let pieces = ((u1 - u0) / MAX_PIECE).ceil().max(1.0) as usize;
        let h = (u1 - u0) / pieces as f64;
        for p in 0..pieces {
            let a0 = u0 + p as f64 * h;
            let half = 0.5 * h;
            let c = a0 + half;
            let mut piece = 0.0;
            for (x, wt) in nodes.iter().zip(&weights) {
                let u = c + half * x;
                piece += wt * kernel_k(u, tau, params) / (t + alpha * u).sqrt();
            }
            total.add(pre * s * half * piece);
        }
    }
    Ok(total.value())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelRow {
    pub m: usize,
    pub t: f64,
    pub j_plus: f64,
    pub j_minus: f64,
    pub opposite: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelScan {
    pub params: KernelParams,
    pub rows: Vec<KernelRow>,
    pub fraction_opposite: f64,
}

/// `J_±(t_m)` for every `m` with `t_m − α ≥ t_min` and `(Q(t_m+α))² ≤ N`.
pub fn kernel_sign_scan(params: &KernelParams, sums: &ProgressionSums, t_min: f64) -> Result<KernelScan, SignsError> {
    let q = params.q as f64;
    let t_max = ((sums.n_max() + 1) as f64).sqrt() / q - params.alpha;
    let mut rows = Vec::new();
    let mut m = 0;
    loop {
        let t = params.t_m(m);
        m += 1;
        if t - params.alpha < t_min.max(f64::MIN_POSITIVE) {
            continue;
        }
        if t >= t_max {
            break;
        }
        let j_plus = kernel_j(t, 1.0, params, sums)?;
        let j_minus = kernel_j(t, -1.0, params, sums)?;
        rows.push(KernelRow {
            m: m - 1,
            t,
            j_plus,
            j_minus,
            opposite: j_plus * j_minus < 0.0,
        });
    }
    let hits = rows.iter().filter(|r| r.opposite).count();
    let fraction_opposite = if rows.is_empty() { 0.0 } else { hits as f64 / rows.len() as f64 };
    Ok(KernelScan {
        params: *params,
        rows,
        fraction_opposite,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowScan {
    pub x0: usize,
    pub x1: usize,
    pub c0: f64,
    pub set: IndexSet,
    pub label: &'static str,
    /// Smallest `c` such that every window `(x, x + c√x]` holds a sign change;
    /// `None` when some window cannot be closed within the data.
    pub c0_star: Option<f64>,
    pub worst_x: usize,
    pub windows: usize,
    /// Windows `(x, x + c0√x]` without a sign change at the requested `c0`.
    pub failures: Vec<usize>,
    pub failure_count: usize,
    /// Sign changes of the sequence with both ends in `(x0, x1]`.
    pub count: usize,
    /// `(x1 − x0) / (c0* √x1)`.
    pub implied_lower_bound: Option<f64>,
}

const MAX_LISTED_FAILURES: usize = 100;

/// Windows at every integer `x ∈ [x0, x1]`. Between integers the first
/// qualifying pair is fixed while `√x` grows, so integers are the worst case.
pub fn window_scan(
    values: &[f64],
    set: &IndexSet,
    x0: usize,
    x1: usize,
    c0: f64,
) -> Result<WindowScan, SignsError> {
    if x0 == 0 || x1 < x0 || !(c0 >= 0.0) {
        return Err(SignsError::InvalidParams(format!("need 1 <= x0 <= x1 and c0 >= 0 (x0={x0}, x1={x1}, c0={c0})")));
    }
    let top = set.bound.min(values.len().saturating_sub(1));
    if x1 > top {
        return Err(SignsError::BeyondTruncation { needed: x1, available: top });
    }
    // close[n]: smallest j such that a sign change lies in [n, j], for members.
    let none = usize::MAX;
    let mut next_pos = none;
    let mut next_neg = none;
    let mut close = vec![none; top + 2];
    for n in (1..=top).rev() {
        close[n] = close[n + 1];
        if !set.contains(n) || values[n] == 0.0 {
            continue;
        }
        let partner = if values[n] > 0.0 { next_neg } else { next_pos };
        close[n] = close[n].min(partner);
        if values[n] > 0.0 {
            next_pos = n;
        } else {
            next_neg = n;
        }
    }
    let mut failures = Vec::new();
    let mut failure_count = 0;
    let mut c_star: Option<f64> = Some(0.0);
    let mut worst_x = x0;
    for x in x0..=x1 {
        let j = close[x + 1];
        let need = if j == none { None } else { Some((j - x) as f64 / (x as f64).sqrt()) };
        match (need, c_star) {
            (Some(c), Some(best)) if c > best => {
                c_star = Some(c);
                worst_x = x;
            }
            (None, Some(_)) => {
                c_star = None;
                worst_x = x;
            }
            _ => {}
        }
        let ok = matches!(need, Some(c) if c <= c0 && x as f64 + c0 * (x as f64).sqrt() >= j as f64);
        if !ok {
            failure_count += 1;
            if failures.len() < MAX_LISTED_FAILURES {
                failures.push(x);
            }
        }
    }
    let count = count_sign_changes(values, set, x1)?
        .intervals
        .iter()
        .filter(|&&(i, _)| i > x0)
        .count();
    Ok(WindowScan {
        x0,
        x1,
        c0,
        set: *set,
        label: match set.kind {
            IndexKind::Progression { a, q } => hypothesis_label(a, q),
            _ => hypothesis_label(0, 1),
        },
        c0_star: c_star,
        worst_x,
        windows: x1 - x0 + 1,
        failures,
        failure_count,
        count,
        implied_lower_bound: c_star.filter(|&c| c > 0.0).map(|c| (x1 - x0) as f64 / (c * (x1 as f64).sqrt())),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeanSquareFit {
    pub grid: Vec<usize>,
    pub sums: Vec<f64>,
    /// Least squares `D` for `Σ_{n≤x} |λ(n)|² ≈ D x` through the origin.
    pub d_fit: f64,
    /// `max_{n≤x} |Σ_{k≤n} |λ(k)|² − D n|` at each grid point.
    pub envelope: Vec<f64>,
    /// Log-log slope of the envelope; `None` if it is zero throughout.
    pub slope_resid: Option<f64>,
}

pub fn meansq_fit(track: &CoefficientTrack, grid: &[usize]) -> Result<MeanSquareFit, SignsError> {
    let top = grid.iter().copied().max().unwrap_or(0);
    if top > track.n_max() {
        return Err(SignsError::BeyondTruncation {
            needed: top,
            available: track.n_max(),
        });
    }
    if grid.is_empty() || grid.contains(&0) {
        return Err(SignsError::InvalidParams("grid must be non-empty and positive".into()));
    }
    let mut prefix = vec![0.0; top + 1];
    let mut s = KahanSum::new();
    for n in 1..=top {
        s.add(track.re[n] * track.re[n] + track.im[n] * track.im[n]);
        prefix[n] = s.value();
    }
    let sums: Vec<f64> = grid.iter().map(|&x| prefix[x]).collect();
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (&x, &y) in grid.iter().zip(&sums) {
        sxy += x as f64 * y;
        sxx += (x as f64).powi(2);
    }
    let d_fit = sxy / sxx;
    let mut running = vec![0.0f64; top + 1];
    for n in 1..=top {
        running[n] = running[n - 1].max((prefix[n] - d_fit * n as f64).abs());
    }
    let envelope: Vec<f64> = grid.iter().map(|&x| running[x]).collect();
    let (xs, ys): (Vec<f64>, Vec<f64>) = grid
        .iter()
        .zip(&envelope)
        .filter(|(_, &r)| r > 0.0)
        .map(|(&x, &r)| (x as f64, r))
        .unzip();
    Ok(MeanSquareFit {
        grid: grid.to_vec(),
        sums,
        d_fit,
        envelope,
        slope_resid: if xs.len() >= 2 { loglog_slope(&xs, &ys) } else { None },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SquarefreeGrowth {
    pub grid: Vec<usize>,
    pub counts: Vec<usize>,
    /// Log-log growth exponent over grid points with a positive count.
    pub exponent: Option<f64>,
    /// `min((1 − 2ρ)/3, 1/4)`.
    pub predicted: f64,
}

pub fn squarefree_signchange_growth(values: &[f64], grid: &[usize], rho: f64) -> Result<SquarefreeGrowth, SignsError> {
    let top = grid.iter().copied().max().unwrap_or(0);
    let report = count_sign_changes(values, &IndexSet::squarefree(top), top)?;
    let counts: Vec<usize> = grid
        .iter()
        .map(|&x| report.intervals.partition_point(|&(_, j)| j <= x))
        .collect();
    let (xs, ys): (Vec<f64>, Vec<f64>) = grid
        .iter()
        .zip(&counts)
        .filter(|(_, &c)| c > 0)
        .map(|(&x, &c)| (x as f64, c as f64))
        .unzip();
    Ok(SquarefreeGrowth {
        grid: grid.to_vec(),
        counts,
        exponent: if xs.len() >= 2 { loglog_slope(&xs, &ys) } else { None },
        predicted: ((1.0 - 2.0 * rho) / 3.0).min(0.25),
    })
}

/// Convenience: the exact `λ_f` track of a triple as plain values.
pub fn f_values(triple: &CuspTriple) -> &[f64] {
    &triple.f.re
}
