//! Expansions at the cusps `−1/2` and `0` by numerical Fourier inversion:
//!
//! `g(z)/2^{ℓ+1/2} = (−8z+1)^{−(ℓ+1/2)} f(4z/(−8z+1)) = Σ λ_g(n) n^{ℓ/2−1/4} e(nz)`,
//! `h(z) = (−2iz)^{−(ℓ+1/2)} f(−1/(4z)) = Σ λ_h(n) n^{ℓ/2−1/4} e(nz)`.
//!
//! Errors are worst-case bounds under a growth bound for the coefficients of
//! `f` taken from the exact range (see [`GrowthBound`]).

use crate::qforms::{coefficient_bound_check, weight_factor, HalfIntegralForm, DESK_TAG};
use crate::numeric::{e, ComplexSum};
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use thiserror::Error;

const EPS: f64 = f64::EPSILON;
/// Per-term rounding allowance in units of `ε`.
const TERM_ULPS: f64 = 16.0;
/// Extra allowance for principal powers `w^{−(ℓ+1/2)}`.
const POWER_ULPS: f64 = 64.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CuspError {
    #[error("point {0} is not in the upper half-plane")]
    NotUpperHalfPlane(Complex64),
    #[error("series tail {tail:e} at Im z = {y} exceeds the bound {bound:e} with N = {n_max}")]
    TailTooLarge {
        y: f64,
        tail: f64,
        bound: f64,
        n_max: usize,
    },
    #[error("branch cut: {0} lies on the non-positive real axis")]
    BranchCut(Complex64),
    #[error("invalid contour: {0}")]
    InvalidContour(String),
    #[error("coefficient {n} has error bound {err:e} above tolerance {tolerance:e}")]
    ToleranceExceeded { n: usize, err: f64, tolerance: f64 },
    #[error("form has no coefficients")]
    EmptyForm,
}

/// Sampling segment `Im z = y0` with `samples` points over one period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContourSpec {
    pub y0: f64,
    pub samples: usize,
    pub n_max: usize,
    /// Allowed truncation error of each evaluation of `f`.
    pub tail_bound: f64,
}

impl Default for ContourSpec {
    fn default() -> Self {
        Self {
            y0: 0.05,
            samples: 4096,
            n_max: 50,
            tail_bound: 1e-16,
        }
    }
}

impl ContourSpec {
    pub fn validate(&self) -> Result<(), CuspError> {
        if !(self.y0 > 0.0 && self.y0.is_finite()) {
            return Err(CuspError::InvalidContour(format!("y0={} must be positive", self.y0)));
        }
        if !self.samples.is_power_of_two() || self.samples < 8 {
            return Err(CuspError::InvalidContour(format!(
                "samples={} must be a power of two >= 8",
                self.samples
            )));
        }
        if self.n_max == 0 || 4 * self.n_max > self.samples {
            return Err(CuspError::InvalidContour(format!(
                "n_max={} must lie in [1, samples/4]",
                self.n_max
            )));
        }
        if !(self.tail_bound > 0.0) {
            return Err(CuspError::InvalidContour("tail_bound must be positive".into()));
        }
        Ok(())
    }

    pub fn halved(&self) -> Self {
        Self {
            y0: self.y0 / 2.0,
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluated {
    pub value: Complex64,
    pub err: f64,
}

/// `|a(n)| ≤ G·n^{ℓ/2+1/4}`, from `|λ(t r²)| ≤ C t^{1/2} τ(r)² ≤ 4C n^{1/2}` with
/// `C` the largest ratio observed on the exact range, doubled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrowthBound {
    pub coefficient_bound_constant: f64,
    pub safety: f64,
    pub g: f64,
    pub exponent: f64,
}

impl GrowthBound {
    pub const SAFETY: f64 = 2.0;

    pub fn for_form(form: &HalfIntegralForm) -> Self {
        let c = coefficient_bound_check(form.lambdas(), 0.5).constant;
        Self {
            coefficient_bound_constant: c,
            safety: Self::SAFETY,
            g: 4.0 * Self::SAFETY * c,
            exponent: form.ell() as f64 / 2.0 + 0.25,
        }
    }

    fn term(&self, n: f64, log_r: f64) -> f64 {
        self.g * (self.exponent * n.ln() + n * log_r).exp()
    }

    /// Bound on `Σ_{n > n0} G n^k rⁿ` with `r = e^{log_r}`; infinite while the
    /// terms still grow.
    pub fn tail_after(&self, n0: usize, log_r: f64) -> f64 {
        let n1 = (n0 + 1) as f64;
        let ratio = ((n1 + 1.0) / n1).powf(self.exponent) * log_r.exp();
        if ratio >= 1.0 {
            return f64::INFINITY;
        }
        self.term(n1, log_r) / (1.0 - ratio)
    }
}

/// Evaluates `f(z) = Σ a(n) e(nz)` from the stored coefficients.
#[derive(Debug, Clone)]
pub struct FormEvaluator<'a> {
    form: &'a HalfIntegralForm,
    a: Vec<f64>,
    growth: GrowthBound,
    tail_bound: f64,
}

impl<'a> FormEvaluator<'a> {
    pub fn new(form: &'a HalfIntegralForm, tail_bound: f64) -> Result<Self, CuspError> {
        if form.n_max() == 0 {
            return Err(CuspError::EmptyForm);
        }
        let a = (0..=form.n_max()).map(|n| form.a(n)).collect();
        Ok(Self {
            form,
            a,
            growth: GrowthBound::for_form(form),
            tail_bound,
        })
    }

    pub fn growth(&self) -> GrowthBound {
        self.growth
    }

    pub fn form(&self) -> &HalfIntegralForm {
        self.form
    }

    /// `f(z)` with an absolute error bound.
    pub fn eval_f(&self, z: Complex64) -> Result<Evaluated, CuspError> {
        if !(z.im > 0.0) || !z.re.is_finite() {
            return Err(CuspError::NotUpperHalfPlane(z));
        }
        let n_max = self.form.n_max();
        let log_r = -TAU * z.im;
        let target = self.tail_bound * 1e-3;
        let mut cut = n_max;
        let mut tail = self.growth.tail_after(n_max, log_r);
        // first n0 whose tail is below the target
        let mut n0 = 1;
        while n0 < n_max {
            let t = self.growth.tail_after(n0, log_r);
            if t <= target {
                cut = n0;
                tail = t;
                break;
            }
            n0 += 1;
        }
        if tail > self.tail_bound {
            return Err(CuspError::TailTooLarge {
                y: z.im,
                tail,
                bound: self.tail_bound,
                n_max,
            });
        }
        let x = z.re.rem_euclid(1.0);
        let mut s = ComplexSum::new();
        let mut abs_sum = 0.0;
        for n in 1..=cut {
            let an = self.a[n];
            if an == 0.0 {
                continue;
            }
            let mag = an * (n as f64 * log_r).exp();
            let phase = (n as f64 * x).rem_euclid(1.0);
            s.add(e(phase) * mag);
            abs_sum += mag.abs();
        }
        let value = s.value();
        let err = tail + (TERM_ULPS * EPS + cut as f64 * EPS * EPS) * abs_sum;
        Ok(Evaluated { value, err })
    }

    /// `h(z) = (−2iz)^{−(ℓ+1/2)} f(−1/(4z))`.
    pub fn transform_h(&self, z: Complex64) -> Result<Evaluated, CuspError> {
        if !(z.im > 0.0) {
            return Err(CuspError::NotUpperHalfPlane(z));
        }
        let w = -1.0 / (4.0 * z);
        let inner = self.eval_f(w)?;
        let base = Complex64::new(0.0, -2.0) * z;
        self.apply_factor(base, inner)
    }

    /// `g(z)/2^{ℓ+1/2} = (−8z+1)^{−(ℓ+1/2)} f(4z/(−8z+1))`.
    pub fn transform_g(&self, z: Complex64) -> Result<Evaluated, CuspError> {
        if !(z.im > 0.0) {
            return Err(CuspError::NotUpperHalfPlane(z));
        }
        let base = -8.0 * z + 1.0;
        let w = 4.0 * z / base;
        let inner = self.eval_f(w)?;
        self.apply_factor(base, inner)
    }

    fn apply_factor(&self, base: Complex64, inner: Evaluated) -> Result<Evaluated, CuspError> {
        if base.im == 0.0 && base.re <= 0.0 {
            return Err(CuspError::BranchCut(base));
        }
        let k = self.form.ell() as f64 + 0.5;
        let factor = (-k * base.ln()).exp();
        let value = factor * inner.value;
        let fa = factor.norm();
        let err = fa * inner.err + POWER_ULPS * EPS * (1.0 + k * base.ln().norm()) * value.norm();
        Ok(Evaluated { value, err })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Cusp {
    /// The form itself, for self-inversion checks.
    F,
    G,
    H,
}

impl Cusp {
    fn centre(&self) -> f64 {
        match self {
            Cusp::G => 0.125,
            _ => 0.0,
        }
    }

    fn eval(&self, ev: &FormEvaluator<'_>, z: Complex64) -> Result<Evaluated, CuspError> {
        match self {
            Cusp::F => ev.eval_f(z),
            Cusp::G => ev.transform_g(z),
            Cusp::H => ev.transform_h(z),
        }
    }
}

/// Extracted `λ(n)` (complex) with error bounds, index 0 unused.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Extracted {
    pub cusp: Cusp,
    pub contour: ContourSpec,
    pub lambda: Vec<Complex64>,
    pub err: Vec<f64>,
}

/// `λ(n) n^{ℓ/2−1/4} = e^{2πn y0} (1/S) Σ_k F(x_k + i y0) e(−n x_k)` on a
/// window of length one centred where the pulled-back points are highest.
pub fn extract_coeffs(
    which: Cusp,
    contour: &ContourSpec,
    ev: &FormEvaluator<'_>,
    tolerance: f64,
) -> Result<Extracted, CuspError> {
    contour.validate()?;
    let s = contour.samples;
    let x_start = which.centre() - 0.5;
    let mut buf = Vec::with_capacity(s);
    let mut max_err = 0.0f64;
    let mut max_abs = 0.0f64;
    for k in 0..s {
        let z = Complex64::new(x_start + k as f64 / s as f64, contour.y0);
        let v = which.eval(ev, z)?;
        max_err = max_err.max(v.err);
        max_abs = max_abs.max(v.value.norm());
        buf.push(v.value);
    }
    let mut planner = FftPlanner::<f64>::new();
    planner.plan_fft_forward(s).process(&mut buf);
    let fft_err = 4.0 * (s as f64).log2() * EPS * max_abs;
    let growth = ev.growth();
    let ell = ev.form().ell();
    let mut lambda = vec![Complex64::new(0.0, 0.0); contour.n_max + 1];
    let mut err = vec![0.0; contour.n_max + 1];
    for n in 1..=contour.n_max {
        let amp = (TAU * n as f64 * contour.y0).exp();
        let c = buf[n] / s as f64 * e(-(n as f64) * x_start) * amp;
        // terms n + jS, j ≥ 1, folded onto n by sampling
        let alias = amp * growth.tail_after(n + s - 1, -TAU * contour.y0);
        let w = weight_factor(ell, n);
        let total = amp * (max_err + fft_err) + alias + 8.0 * EPS * c.norm();
        lambda[n] = c / w;
        err[n] = total / w;
        if !(err[n] <= tolerance) {
            return Err(CuspError::ToleranceExceeded {
                n,
                err: err[n],
                tolerance,
            });
        }
    }
    Ok(Extracted {
        cusp: which,
        contour: *contour,
        lambda,
        err,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrackKind {
    Exact,
    Numeric,
    /// Exact values justified by an identity and audited numerically.
    Certified,
}

/// Coefficients `λ(1..=N)` with per-entry absolute error.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoefficientTrack {
    pub kind: TrackKind,
    pub source: String,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
    pub err: Vec<f64>,
}

impl CoefficientTrack {
    pub fn exact(lambda: &[f64], source: &str) -> Self {
        Self {
            kind: TrackKind::Exact,
            source: source.to_string(),
            re: lambda.to_vec(),
            im: vec![0.0; lambda.len()],
            err: vec![0.0; lambda.len()],
        }
    }

    pub fn numeric(x: &Extracted, source: &str) -> Self {
        Self {
            kind: TrackKind::Numeric,
            source: source.to_string(),
            re: x.lambda.iter().map(|z| z.re).collect(),
            im: x.lambda.iter().map(|z| z.im).collect(),
            err: x.err.clone(),
        }
    }

    pub fn n_max(&self) -> usize {
        self.re.len().saturating_sub(1)
    }
}

/// Comparison of two extractions or of an extraction against exact values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub n_max: usize,
    /// `max |λ₁(n) − λ₂(n)| / (err₁(n) + err₂(n))`; at most 1 when consistent.
    pub max_ratio: f64,
    pub worst_n: usize,
    pub max_abs_diff: f64,
    /// `max |Im λ(n)| / err(n)` of the first argument.
    pub max_imag_ratio: f64,
    pub passed: bool,
}

pub fn agreement(x: &Extracted, re2: &[f64], im2: &[f64], err2: &[f64]) -> AgreementReport {
    let n_max = x.lambda.len() - 1;
    let mut r = AgreementReport {
        n_max,
        max_ratio: 0.0,
        worst_n: 0,
        max_abs_diff: 0.0,
        max_imag_ratio: 0.0,
        passed: true,
    };
    for n in 1..=n_max.min(re2.len() - 1) {
        let d = (x.lambda[n] - Complex64::new(re2[n], im2[n])).norm();
        let ratio = d / (x.err[n] + err2[n]);
        if ratio > r.max_ratio {
            r.max_ratio = ratio;
            r.worst_n = n;
        }
        r.max_abs_diff = r.max_abs_diff.max(d);
        r.max_imag_ratio = r.max_imag_ratio.max(x.lambda[n].im.abs() / x.err[n]);
    }
    r.passed = r.max_ratio <= 1.0 && r.max_imag_ratio <= 1.0;
    r
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CuspTriple {
    pub ell: u32,
    pub n_cusp: usize,
    pub f: CoefficientTrack,
    pub g: CoefficientTrack,
    pub h: CoefficientTrack,
    /// `λ_h` extracted numerically against `λ_f`; for the eta-theta desk form
    /// the two coincide identically.
    pub fricke: Option<AgreementReport>,
    pub g_contours: AgreementReport,
    pub h_contours: AgreementReport,
}

/// Extracts `λ_g`, `λ_h` on `contour` and on the contour at half height.
///
/// For the desk form `η(2z)¹²θ(z)⁻³`, `η(−1/(2z)) = √(−2iz) η(2z)` and
/// `θ(−1/(4z)) = √(−2iz) θ(z)` give `h = f`. When the numerical `λ_h`
/// agrees with `λ_f` within its error bounds the `h` track is the exact
/// `λ_f` over the full range (kind `certified`).
pub fn build_cusp_triple(
    form: &HalfIntegralForm,
    contour: &ContourSpec,
    tolerance: f64,
) -> Result<CuspTriple, CuspError> {
    let ev = FormEvaluator::new(form, contour.tail_bound)?;
    let g1 = extract_coeffs(Cusp::G, contour, &ev, tolerance)?;
    let g2 = extract_coeffs(Cusp::G, &contour.halved(), &ev, tolerance)?;
    let h1 = extract_coeffs(Cusp::H, contour, &ev, tolerance)?;
    let h2 = extract_coeffs(Cusp::H, &contour.halved(), &ev, tolerance)?;
    let im2 = |x: &Extracted| x.lambda.iter().map(|z| z.im).collect::<Vec<_>>();
    let re2 = |x: &Extracted| x.lambda.iter().map(|z| z.re).collect::<Vec<_>>();
    let g_contours = agreement(&g1, &re2(&g2), &im2(&g2), &g2.err);
    let h_contours = agreement(&h1, &re2(&h2), &im2(&h2), &h2.err);
    let f = CoefficientTrack::exact(form.lambdas(), form.source_tag());
    let zeros = vec![0.0; form.n_max() + 1];
    let fricke = (form.source_tag() == DESK_TAG)
        .then(|| agreement(&h1, form.lambdas(), &zeros, &zeros));
    let h = match &fricke {
        Some(rep) if rep.passed && h_contours.passed => CoefficientTrack {
            kind: TrackKind::Certified,
            source: format!("fricke({})", form.source_tag()),
            ..CoefficientTrack::exact(form.lambdas(), "")
        },
        _ => CoefficientTrack::numeric(&h1, "cusp-0"),
    };
    Ok(CuspTriple {
        ell: form.ell(),
        n_cusp: contour.n_max,
        f,
        g: CoefficientTrack::numeric(&g1, "cusp-1/2"),
        h,
        fricke,
        g_contours,
        h_contours,
    })
}
