//! Truncated Voronoi formula for `S_f(x, a/d) = Σ_{n≤x} λ_f(n) R_d(n−a)`.
//!
//! Main term: `(x^{1/4}/(π√2)) Σ_{n≤M} λ(n;d) φ_a(n,d) n^{−3/4} cos(4π√(nx)/q_d − (ℓ+1)π/2)`
//! with `λ(n;d)` taken from `f`, `g` or `h` according to `4 | d`, `2 ‖ d`, `2 ∤ d`.

use crate::arith::{divisors, ramanujan_sum};
use crate::cusp::{CoefficientTrack, CuspTriple};
use crate::expsums::{k_and_with, phi_from_k, table_for, ExpSumContext, ExpSumError, ParityClass};
use crate::numeric::{loglog_slope, median, ComplexSum, KahanSum};
use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;
use thiserror::Error;

/// Relative tolerance for realness and for the two-route progression check.
pub const REAL_TOL: f64 = 1e-9;
/// Absolute floor for per-summand realness.
pub const REAL_FLOOR: f64 = 1e-12;
pub const DEFAULT_RHO: f64 = 1.0 / 6.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VoronoiError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("x = {x} exceeds the coefficient range N = {n_max}")]
    BeyondTruncation { x: f64, n_max: usize },
    #[error("{cusp} coefficients known to n = {available}, need n = {needed}")]
    MissingCoefficients {
        cusp: &'static str,
        needed: usize,
        available: usize,
    },
    #[error("summand n = {n} for d = {d} is not real: {value}")]
    NotReal { n: usize, d: u64, value: Complex64 },
    #[error("main term imaginary part {im:e} exceeds {bound:e}")]
    ImaginaryResidue { im: f64, bound: f64 },
    #[error("progression routes disagree: {direct} vs {divisor_sum} (Q = {q}, a = {a}, x = {x})")]
    RouteMismatch {
        q: u64,
        a: u64,
        x: f64,
        direct: f64,
        divisor_sum: f64,
    },
    #[error(transparent)]
    ExpSum(#[from] ExpSumError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VoronoiParams {
    pub x: f64,
    pub m: usize,
    pub d: u64,
    pub a: u64,
    pub ell: u32,
    pub rho: f64,
}

impl VoronoiParams {
    pub fn new(x: f64, m: usize, d: u64, a: u64, ell: u32) -> Result<Self, VoronoiError> {
        let p = Self {
            x,
            m,
            d,
            a,
            ell,
            rho: DEFAULT_RHO,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), VoronoiError> {
        if !(self.x.is_finite() && self.x > 0.0) {
            return Err(VoronoiError::InvalidParams(format!("x = {} must be positive", self.x)));
        }
        if self.m < 2 || self.m as f64 > self.x {
            return Err(VoronoiError::InvalidParams(format!(
                "M = {} must satisfy 2 <= M <= x = {}",
                self.m, self.x
            )));
        }
        if self.d == 0 || (self.d as f64) > self.x.sqrt() {
            return Err(VoronoiError::InvalidParams(format!(
                "d = {} must satisfy 1 <= d <= sqrt(x)",
                self.d
            )));
        }
        if !(self.rho > 0.0 && self.rho <= 0.5) {
            return Err(VoronoiError::InvalidParams(format!("rho = {} not in (0, 1/2]", self.rho)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TruncationReport {
    pub x: f64,
    pub m: usize,
    pub d: u64,
    pub a: u64,
    pub main_term: f64,
    pub main_imag: f64,
    pub direct_value: f64,
    pub residual: f64,
}

fn check_range(x: f64, track: &CoefficientTrack) -> Result<usize, VoronoiError> {
    let n_max = track.n_max();
    if x >= (n_max + 1) as f64 {
        return Err(VoronoiError::BeyondTruncation { x, n_max });
    }
    Ok(if x < 1.0 { 0 } else { x.floor() as usize })
}

/// `Σ_{n≤x} λ_f(n) R_d(n−a)`.
pub fn direct_partial_sum(x: f64, a: u64, d: u64, f: &CoefficientTrack) -> Result<f64, VoronoiError> {
    if d == 0 {
        return Err(VoronoiError::InvalidParams("d = 0".into()));
    }
    let top = check_range(x, f)?;
    let r = ramanujan_table(d, a);
    let mut s = KahanSum::new();
    for n in 1..=top {
        let c = r[n % d as usize];
        if c != 0 {
            s.add(f.re[n] * c as f64);
        }
    }
    Ok(s.value())
}

/// `R_d(n − a)` indexed by `n mod d`.
fn ramanujan_table(d: u64, a: u64) -> Vec<i64> {
    (0..d)
        .map(|r| ramanujan_sum(d, r as i64 - (a % d) as i64))
        .collect()
}

/// Prefix sums `Σ_{n≤k} λ_f(n) R_d(n−a)` for all `k ≤ N`, accumulated
/// with compensation.
#[derive(Debug, Clone)]
pub struct PartialSums {
    pub d: u64,
    pub a: u64,
    prefix: Vec<f64>,
}

impl PartialSums {
    pub fn new(a: u64, d: u64, f: &CoefficientTrack) -> Result<Self, VoronoiError> {
        if d == 0 {
            return Err(VoronoiError::InvalidParams("d = 0".into()));
        }
        let r = ramanujan_table(d, a);
        let mut prefix = Vec::with_capacity(f.n_max() + 1);
        prefix.push(0.0);
        let mut s = KahanSum::new();
        for n in 1..=f.n_max() {
            let c = r[n % d as usize];
            if c != 0 {
                s.add(f.re[n] * c as f64);
            }
            prefix.push(s.value());
        }
        Ok(Self { d, a, prefix })
    }

    /// Sum over `n ≤ x`.
    pub fn at(&self, x: f64) -> Result<f64, VoronoiError> {
        let n_max = self.prefix.len() - 1;
        if x >= (n_max + 1) as f64 {
            return Err(VoronoiError::BeyondTruncation { x, n_max });
        }
        Ok(if x < 1.0 { 0.0 } else { self.prefix[x.floor() as usize] })
    }

    pub fn n_max(&self) -> usize {
        self.prefix.len() - 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TwoRouteReport {
    pub x: f64,
    pub q: u64,
    pub a: u64,
    pub direct: f64,
    pub divisor_sum: f64,
    pub scale: f64,
    pub discrepancy: f64,
    pub passed: bool,
}

/// `Σ_{n≤x, n≡a (Q)} λ_f(n)` computed directly and as `Q^{−1} Σ_{d|Q} S_f(x, a/d)`.
pub fn progression_two_route(
    x: f64,
    a: u64,
    q: u64,
    f: &CoefficientTrack,
) -> Result<TwoRouteReport, VoronoiError> {
    if q == 0 {
        return Err(VoronoiError::InvalidParams("Q = 0".into()));
    }
    let a = a % q;
    let top = check_range(x, f)?;
    let mut direct = KahanSum::new();
    let mut scale = KahanSum::new();
    for n in 1..=top {
        scale.add(f.re[n].abs());
        if n as u64 % q == a {
            direct.add(f.re[n]);
        }
    }
    let mut via = KahanSum::new();
    for d in divisors(q) {
        via.add(direct_partial_sum(x, a, d, f)?);
    }
    let direct = direct.value();
    let divisor_sum = via.value() / q as f64;
    let scale = scale.value().max(1.0);
    let discrepancy = (direct - divisor_sum).abs();
    Ok(TwoRouteReport {
        x,
        q,
        a,
        direct,
        divisor_sum,
        scale,
        discrepancy,
        passed: discrepancy < REAL_TOL * scale,
    })
}

/// Both routes of [`progression_two_route`], failing when they disagree.
pub fn direct_progression_sum(
    x: f64,
    a: u64,
    q: u64,
    f: &CoefficientTrack,
) -> Result<f64, VoronoiError> {
    let r = progression_two_route(x, a, q, f)?;
    if !r.passed {
        return Err(VoronoiError::RouteMismatch {
            q,
            a: r.a,
            x,
            direct: r.direct,
            divisor_sum: r.divisor_sum,
        });
    }
    Ok(r.direct)
}

/// The track feeding `λ(n;d)` and its scale: `λ_f`, `2^{ℓ+1/2} λ_g`, `λ_h`.
fn track_for<'t>(
    triple: &'t CuspTriple,
    parity: ParityClass,
) -> (&'static str, &'t CoefficientTrack, f64) {
    match parity {
        ParityClass::Div4 => ("f", &triple.f, 1.0),
        ParityClass::TwiceOdd => ("g", &triple.g, 2f64.powf(triple.ell as f64 + 0.5)),
        ParityClass::Odd => ("h", &triple.h, 1.0),
    }
}

/// `φ_a(n,d)` tabulated over one period in `n` (`d`, or `4d` when `2 ‖ d`).
pub fn phi_table(a: u64, ctx: &ExpSumContext) -> Result<Vec<Complex64>, VoronoiError> {
    let table = table_for(ctx)?;
    (0..table.modulus())
        .map(|r| Ok(phi_from_k(k_and_with(&table, a as i64, r as i64, ctx)?, ctx)))
        .collect()
}

/// Coefficients `c_n = λ(n;d) φ_a(n,d) n^{−3/4}` for `n ≤ M_max`, ready to
/// be summed against `cos(4π√(nx)/q_d − (ℓ+1)π/2)` for any `x`.
#[derive(Debug, Clone)]
pub struct MainTermEvaluator {
    ctx: ExpSumContext,
    a: u64,
    coeffs: Vec<Complex64>,
    abs_coeffs: Vec<f64>,
    shift: f64,
}

impl MainTermEvaluator {
    pub fn new(
        a: u64,
        d: u64,
        m_max: usize,
        triple: &CuspTriple,
    ) -> Result<Self, VoronoiError> {
        let ctx = ExpSumContext::new(d, triple.ell)?;
        let (cusp, track, scale) = track_for(triple, ctx.parity());
        if track.n_max() < m_max {
            return Err(VoronoiError::MissingCoefficients {
                cusp,
                needed: m_max,
                available: track.n_max(),
            });
        }
        let phi = phi_table(a, &ctx)?;
        let period = phi.len();
        let mut coeffs = vec![Complex64::new(0.0, 0.0); m_max + 1];
        let mut abs_coeffs = vec![0.0; m_max + 1];
        for n in 1..=m_max {
            let lam = Complex64::new(track.re[n], track.im[n]) * scale;
            let p = phi[n % period];
            let w = (n as f64).powf(-0.75);
            let c = lam * p * w;
            if ctx.parity() == ParityClass::Odd {
                let slack = REAL_TOL * c.norm() + REAL_FLOOR + p.norm() * scale * track.err[n] * w;
                if c.im.abs() > slack {
                    return Err(VoronoiError::NotReal { n, d, value: c });
                }
            }
            coeffs[n] = c;
            abs_coeffs[n] = c.norm() + p.norm() * scale * track.err[n] * w;
        }
        Ok(Self {
            ctx,
            a,
            coeffs,
            abs_coeffs,
            shift: (triple.ell as f64 + 1.0) * PI / 2.0,
        })
    }

    pub fn m_max(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn d(&self) -> u64 {
        self.ctx.d()
    }

    pub fn a(&self) -> u64 {
        self.a
    }

    /// Complex main terms at `x` for each `M` in ascending `ms`, with the
    /// scale `(x^{1/4}/(π√2)) Σ|c_n|` at that `M`.
    pub fn eval_many(&self, x: f64, ms: &[usize]) -> Result<Vec<(Complex64, f64)>, VoronoiError> {
        if ms.windows(2).any(|w| w[0] > w[1]) {
            return Err(VoronoiError::InvalidParams("M values must be ascending".into()));
        }
        if let Some(&last) = ms.last() {
            if last > self.m_max() {
                return Err(VoronoiError::InvalidParams(format!(
                    "M = {last} beyond prepared range {}",
                    self.m_max()
                )));
            }
        }
        let pre = x.powf(0.25) / (PI * 2f64.sqrt());
        let omega = 4.0 * PI * x.sqrt() / self.ctx.q_d() as f64;
        let mut out = Vec::with_capacity(ms.len());
        let mut s = ComplexSum::new();
        let mut scale = KahanSum::new();
        let mut n = 0;
        for &m in ms {
            while n < m {
                n += 1;
                let c = self.coeffs[n];
                if c.re == 0.0 && c.im == 0.0 {
                    continue;
                }
                let phase = omega * (n as f64).sqrt() - self.shift;
                s.add(c * phase.cos());
                scale.add(self.abs_coeffs[n]);
            }
            out.push((s.value() * pre, scale.value() * pre));
        }
        Ok(out)
    }

    /// The real main term, after the realness assertion on the total.
    pub fn eval(&self, x: f64, m: usize) -> Result<f64, VoronoiError> {
        let (z, scale) = self.eval_many(x, &[m])?[0];
        assert_real(z, scale)
    }
}

fn assert_real(z: Complex64, scale: f64) -> Result<f64, VoronoiError> {
    let bound = REAL_TOL * scale.max(REAL_FLOOR);
    if z.im.abs() > bound {
        return Err(VoronoiError::ImaginaryResidue { im: z.im, bound });
    }
    Ok(z.re)
}

pub fn voronoi_main_term(params: &VoronoiParams, triple: &CuspTriple) -> Result<f64, VoronoiError> {
    params.validate()?;
    check_ell(params.ell, triple)?;
    MainTermEvaluator::new(params.a, params.d, params.m, triple)?.eval(params.x, params.m)
}

fn check_ell(ell: u32, triple: &CuspTriple) -> Result<(), VoronoiError> {
    if ell != triple.ell {
        return Err(VoronoiError::InvalidParams(format!(
            "ell = {ell} does not match the form (ell = {})",
            triple.ell
        )));
    }
    Ok(())
}

/// `(1/Q) Σ_{d|Q}` of the main terms for odd `Q`, approximating the sum over
/// `n ≡ a (mod Q)`. `params.d` holds `Q`.
pub fn voronoi_progression(params: &VoronoiParams, triple: &CuspTriple) -> Result<f64, VoronoiError> {
    params.validate()?;
    check_ell(params.ell, triple)?;
    let q = params.d;
    if q % 2 == 0 {
        return Err(VoronoiError::InvalidParams(format!("Q = {q} must be odd")));
    }
    let a = params.a % q;
    let mut total = KahanSum::new();
    for d in divisors(q) {
        let ev = MainTermEvaluator::new(a, d, params.m, triple)?;
        total.add(ev.eval(params.x, params.m)?);
    }
    Ok(total.value() / q as f64)
}

pub fn truncation_report(params: &VoronoiParams, triple: &CuspTriple) -> Result<TruncationReport, VoronoiError> {
    params.validate()?;
    check_ell(params.ell, triple)?;
    let ev = MainTermEvaluator::new(params.a, params.d, params.m, triple)?;
    let (z, scale) = ev.eval_many(params.x, &[params.m])?[0];
    let main_term = assert_real(z, scale)?;
    let direct_value = direct_partial_sum(params.x, params.a, params.d, &triple.f)?;
    Ok(TruncationReport {
        x: params.x,
        m: params.m,
        d: params.d,
        a: params.a,
        main_term,
        main_imag: z.im,
        direct_value,
        residual: (direct_value - main_term).abs(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanRow {
    pub x: f64,
    pub m: usize,
    pub d: u64,
    pub a: u64,
    pub main: f64,
    pub direct: f64,
    pub residual: f64,
}

/// Residuals on the `(x, M)` grid, ordered by `x` then `M`. Cells with
/// `M > x` or `d > √x` lie outside the formula's range and are skipped.
pub fn residual_scan(
    x_grid: &[f64],
    m_grid: &[usize],
    d: u64,
    a: u64,
    triple: &CuspTriple,
) -> Result<Vec<ScanRow>, VoronoiError> {
    let mut ms = m_grid.to_vec();
    ms.sort_unstable();
    ms.dedup();
    let m_top = ms.last().copied().unwrap_or(0);
    if m_top == 0 {
        return Ok(Vec::new());
    }
    let ev = MainTermEvaluator::new(a, d, m_top, triple)?;
    let sums = PartialSums::new(a, d, &triple.f)?;
    let mut xs = x_grid.to_vec();
    xs.sort_by(f64::total_cmp);
    let mut rows = Vec::new();
    for &x in &xs {
        let valid: Vec<usize> = ms
            .iter()
            .copied()
            .filter(|&m| m >= 2 && m as f64 <= x && (d as f64) <= x.sqrt())
            .collect();
        if valid.is_empty() {
            continue;
        }
        let direct = sums.at(x)?;
        for ((z, scale), &m) in ev.eval_many(x, &valid)?.into_iter().zip(&valid) {
            let main = assert_real(z, scale)?;
            rows.push(ScanRow {
                x,
                m,
                d,
                a,
                main,
                direct,
                residual: (direct - main).abs(),
            });
        }
    }
    Ok(rows)
}

/// `x_c + k + 1/2` for `k = −w/2 .. w/2 − 1`.
pub fn off_integer_grid(x_centre: f64, width: usize) -> Vec<f64> {
    let half = (width / 2) as i64;
    (-half..width as i64 - half)
        .map(|k| x_centre.floor() + k as f64 + 0.5)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayFit {
    pub x_centre: f64,
    pub width: usize,
    pub d: u64,
    pub a: u64,
    pub ms: Vec<usize>,
    pub median_residuals: Vec<f64>,
    pub slope: Option<f64>,
}

/// Median residual over an off-integer grid around `x_centre` for each `M`,
/// and the least-squares slope of `log median` against `log M`.
pub fn residual_decay(
    x_centre: f64,
    width: usize,
    m_grid: &[usize],
    d: u64,
    a: u64,
    triple: &CuspTriple,
) -> Result<DecayFit, VoronoiError> {
    let xs = off_integer_grid(x_centre, width);
    let x_min = xs.first().copied().unwrap_or(x_centre);
    let mut ms: Vec<usize> = m_grid.iter().copied().filter(|&m| m as f64 <= x_min).collect();
    ms.sort_unstable();
    ms.dedup();
    let rows = residual_scan(&xs, &ms, d, a, triple)?;
    let median_residuals: Vec<f64> = ms
        .iter()
        .map(|&m| {
            let r: Vec<f64> = rows.iter().filter(|r| r.m == m).map(|r| r.residual).collect();
            median(&r).unwrap_or(f64::NAN)
        })
        .collect();
    let lm: Vec<f64> = ms.iter().map(|&m| m as f64).collect();
    let slope = loglog_slope(&lm, &median_residuals);
    Ok(DecayFit {
        x_centre,
        width,
        d,
        a,
        ms,
        median_residuals,
        slope,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthFit {
    pub m: usize,
    pub x_centres: Vec<f64>,
    pub median_residuals: Vec<f64>,
    pub slope: Option<f64>,
}

/// Growth exponent in `x` of the median residual at fixed `M`.
pub fn residual_growth_in_x(
    m: usize,
    x_centres: &[f64],
    width: usize,
    d: u64,
    a: u64,
    triple: &CuspTriple,
) -> Result<GrowthFit, VoronoiError> {
    let mut med = Vec::with_capacity(x_centres.len());
    for &xc in x_centres {
        let rows = residual_scan(&off_integer_grid(xc, width), &[m], d, a, triple)?;
        let r: Vec<f64> = rows.iter().map(|r| r.residual).collect();
        med.push(median(&r).unwrap_or(f64::NAN));
    }
    Ok(GrowthFit {
        m,
        x_centres: x_centres.to_vec(),
        slope: loglog_slope(x_centres, &med),
        median_residuals: med,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanValueMetric {
    pub x_min: usize,
    pub x_max: usize,
    pub exponent: f64,
    pub max_ratio: f64,
    pub argmax: usize,
}

/// `max_{X0≤x≤X} |Σ_{n≤x} λ_f(n)| / x^{e}`. The partial sum is constant on
/// `[n, n+1)` while `x^e` grows, so integer `x` suffice.
pub fn mean_value_metric(
    f: &CoefficientTrack,
    x_min: usize,
    x_max: usize,
    exponent: f64,
) -> Result<MeanValueMetric, VoronoiError> {
    if x_max > f.n_max() {
        return Err(VoronoiError::BeyondTruncation {
            x: x_max as f64,
            n_max: f.n_max(),
        });
    }
    let mut s = KahanSum::new();
    let mut best = MeanValueMetric {
        x_min,
        x_max,
        exponent,
        max_ratio: 0.0,
        argmax: 0,
    };
    for n in 1..=x_max {
        s.add(f.re[n]);
        if n < x_min {
            continue;
        }
        let r = s.value().abs() / (n as f64).powf(exponent);
        if r > best.max_ratio {
            best.max_ratio = r;
            best.argmax = n;
        }
    }
    Ok(best)
}

/// Mean-value exponent `(1+ρ)/3 + slack`.
pub fn mean_value_exponent(rho: f64, slack: f64) -> f64 {
    (1.0 + rho) / 3.0 + slack
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cusp::TrackKind;

    fn synthetic(lambda: Vec<f64>) -> CuspTriple {
        let t = CoefficientTrack::exact(&lambda, "synthetic");
        CuspTriple {
            ell: 4,
            n_cusp: 0,
            f: t.clone(),
            g: t.clone(),
            h: CoefficientTrack {
                kind: TrackKind::Certified,
                ..t
            },
            fricke: None,
            g_contours: dummy_agreement(),
            h_contours: dummy_agreement(),
        }
    }

    fn dummy_agreement() -> crate::cusp::AgreementReport {
        crate::cusp::AgreementReport {
            n_max: 0,
            max_ratio: 0.0,
            worst_n: 0,
            max_abs_diff: 0.0,
            max_imag_ratio: 0.0,
            passed: true,
        }
    }

    fn pseudo(n: usize) -> Vec<f64> {
        (0..=n)
            .map(|k| if k == 0 { 0.0 } else { ((k * 7919 % 1013) as f64 / 1013.0 - 0.5) * 2.0 })
            .collect()
    }

    #[test]
    fn direct_sums_basics() {
        let t = synthetic(pseudo(500));
        let plain: f64 = t.f.re[1..=100].iter().sum();
        assert!((direct_partial_sum(100.5, 0, 1, &t.f).unwrap() - plain).abs() < 1e-12);
        assert_eq!(direct_partial_sum(0.5, 0, 7, &t.f).unwrap(), 0.0);
        assert!(direct_partial_sum(501.0, 0, 1, &t.f).is_err());
        let brute: f64 = (1..=100)
            .map(|n| t.f.re[n] * ramanujan_sum(3, n as i64 - 1) as f64)
            .sum();
        assert!((direct_partial_sum(100.0, 1, 3, &t.f).unwrap() - brute).abs() < 1e-12);
        let ps = PartialSums::new(1, 3, &t.f).unwrap();
        assert!((ps.at(100.0).unwrap() - brute).abs() < 1e-12);
    }

    #[test]
    fn two_routes_agree() {
        let t = synthetic(pseudo(1000));
        let r = progression_two_route(1000.0, 2, 15, &t.f).unwrap();
        assert!(r.passed, "{r:?}");
        let full = progression_two_route(1000.0, 0, 1, &t.f).unwrap();
        let plain: f64 = t.f.re[1..].iter().sum();
        assert!((full.direct - plain).abs() < 1e-9);
        let a = progression_two_route(1000.0, 17, 15, &t.f).unwrap();
        assert_eq!(a.a, 2);
        assert_eq!(a.direct, r.direct);
    }

    #[test]
    fn zero_coefficients_give_zero_main_term() {
        let t = synthetic(vec![0.0; 200]);
        let p = VoronoiParams::new(150.5, 64, 1, 0, 4).unwrap();
        assert_eq!(voronoi_main_term(&p, &t).unwrap(), 0.0);
    }

    #[test]
    fn params_ranges() {
        assert!(VoronoiParams::new(100.0, 101, 1, 0, 4).is_err());
        assert!(VoronoiParams::new(100.0, 1, 1, 0, 4).is_err());
        assert!(VoronoiParams::new(100.0, 50, 11, 0, 4).is_err());
        assert!(VoronoiParams::new(100.0, 50, 10, 0, 4).is_ok());
    }

    #[test]
    fn progression_q1_is_main_term() {
        let t = synthetic(pseudo(300));
        let p = VoronoiParams::new(250.5, 128, 1, 0, 4).unwrap();
        let a = voronoi_main_term(&p, &t).unwrap();
        let b = voronoi_progression(&p, &t).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn missing_range_is_reported() {
        let mut t = synthetic(pseudo(300));
        t.g = CoefficientTrack::exact(&pseudo(50), "g");
        let p = VoronoiParams::new(250.5, 128, 2, 1, 4).unwrap();
        assert!(matches!(
            voronoi_main_term(&p, &t),
            Err(VoronoiError::MissingCoefficients { cusp: "g", .. })
        ));
    }

    #[test]
    fn odd_summands_are_real() {
        let t = synthetic(pseudo(400));
        for d in [1u64, 3, 5, 9, 15, 21] {
            for a in 0..d {
                MainTermEvaluator::new(a, d, 400, &t).unwrap();
            }
        }
    }

    #[test]
    fn mean_value_metric_basic() {
        let t = synthetic(vec![0.0, 1.0, 1.0, -2.0, 0.0]);
        let m = mean_value_metric(&t.f, 1, 4, 0.5).unwrap();
        assert_eq!(m.argmax, 2);
        assert!((m.max_ratio - 2.0 / 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn grid_is_off_integer() {
        let g = off_integer_grid(1000.0, 4);
        assert_eq!(g, vec![998.5, 999.5, 1000.5, 1001.5]);
    }
}
