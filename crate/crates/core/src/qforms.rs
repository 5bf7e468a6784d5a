//! Truncated integer q-series, eta and theta products, the weight 9/2 desk
//! form, Hecke operators `T(p²)` and coefficient diagnostics.

use crate::arith::{self, is_prime, jacobi, squarefree_split, tau};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum QSeriesError {
    #[error("coefficient overflow at q^{0}")]
    Overflow(usize),
    #[error("division needs constant term ±1, got {0}")]
    NonUnitConstant(i128),
    #[error("truncation orders differ: {0} vs {1}")]
    TruncationMismatch(usize, usize),
    #[error("eta power with t={t}, e={e} is not a power series in q (need t > 0, e ≥ 0, 24 | te)")]
    NotAPowerSeries { t: u64, e: i64 },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FormError {
    #[error("truncation N={0} too small (need N >= {1})")]
    TooShort(usize, usize),
    #[error(transparent)]
    Series(#[from] QSeriesError),
    #[error("theta division is not exact: re-multiplied series differs at q^{0}")]
    InexactDivision(usize),
    #[error("T({p}^2) eigencheck failed: {reason}")]
    Eigencheck { p: u64, reason: String },
    #[error("{0} is not an odd prime")]
    NotOddPrime(u64),
    #[error("leading coefficient a(1) is zero; cannot normalize")]
    ZeroLeading,
}

/// `Σ_{0 ≤ n ≤ N} a(n) qⁿ` with exact integer coefficients.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QSeries {
    coeffs: Vec<i128>,
}

impl QSeries {
    pub fn zero(order: usize) -> Self {
        Self {
            coeffs: vec![0; order + 1],
        }
    }

    pub fn one(order: usize) -> Self {
        let mut s = Self::zero(order);
        s.coeffs[0] = 1;
        s
    }

    /// Series with the given coefficients; the truncation order is `len − 1`.
    pub fn from_coeffs(coeffs: Vec<i128>) -> Self {
        assert!(!coeffs.is_empty(), "a q-series needs at least one coefficient");
        Self { coeffs }
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeff(&self, n: usize) -> i128 {
        self.coeffs[n]
    }

    pub fn coeffs(&self) -> &[i128] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<i128> {
        self.coeffs
    }

    pub fn nonzero_count(&self) -> usize {
        self.coeffs.iter().filter(|&&c| c != 0).count()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0)
    }

    pub fn truncate(&self, order: usize) -> Self {
        Self {
            coeffs: self.coeffs[..=order.min(self.order())].to_vec(),
        }
    }

    fn same_order(&self, other: &Self) -> Result<usize, QSeriesError> {
        if self.order() != other.order() {
            return Err(QSeriesError::TruncationMismatch(self.order(), other.order()));
        }
        Ok(self.order())
    }

    pub fn add(&self, other: &Self) -> Result<Self, QSeriesError> {
        self.same_order(other)?;
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .enumerate()
            .map(|(i, (a, b))| a.checked_add(*b).ok_or(QSeriesError::Overflow(i)))
            .collect::<Result<_, _>>()?;
        Ok(Self { coeffs })
    }

    pub fn neg(&self) -> Result<Self, QSeriesError> {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, a)| a.checked_neg().ok_or(QSeriesError::Overflow(i)))
            .collect::<Result<_, _>>()?;
        Ok(Self { coeffs })
    }

    pub fn sub(&self, other: &Self) -> Result<Self, QSeriesError> {
        self.add(&other.neg()?)
    }

    pub fn scale(&self, k: i128) -> Result<Self, QSeriesError> {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, a)| a.checked_mul(k).ok_or(QSeriesError::Overflow(i)))
            .collect::<Result<_, _>>()?;
        Ok(Self { coeffs })
    }

    /// `q^k · self`, truncated at the same order.
    pub fn shift(&self, k: usize) -> Self {
        let n = self.order();
        let mut out = Self::zero(n);
        for i in 0..=n.saturating_sub(k) {
            if i + k <= n {
                out.coeffs[i + k] = self.coeffs[i];
            }
        }
        out
    }

    /// Product; the loop runs over the nonzero terms of the sparser factor.
    pub fn mul(&self, other: &Self) -> Result<Self, QSeriesError> {
        let n = self.same_order(other)?;
        let (dense, sparse) = if self.nonzero_count() >= other.nonzero_count() {
            (self, other)
        } else {
            (other, self)
        };
        let terms: Vec<(usize, i128)> = sparse
            .coeffs
            .iter()
            .enumerate()
            .filter(|(_, &c)| c != 0)
            .map(|(k, &c)| (k, c))
            .collect();
        let mut out = vec![0i128; n + 1];
        for (k, c) in terms {
            for i in 0..=n - k {
                let a = dense.coeffs[i];
                if a == 0 {
                    continue;
                }
                let t = a.checked_mul(c).ok_or(QSeriesError::Overflow(i + k))?;
                out[i + k] = out[i + k]
                    .checked_add(t)
                    .ok_or(QSeriesError::Overflow(i + k))?;
            }
        }
        Ok(Self { coeffs: out })
    }

    /// Quotient `self / other`; `other(0)` must be `±1`.
    pub fn div(&self, other: &Self) -> Result<Self, QSeriesError> {
        let n = self.same_order(other)?;
        let b0 = other.coeffs[0];
        if b0 != 1 && b0 != -1 {
            return Err(QSeriesError::NonUnitConstant(b0));
        }
        let terms: Vec<(usize, i128)> = other
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .filter(|(_, &c)| c != 0)
            .map(|(k, &c)| (k, c))
            .collect();
        let mut q = vec![0i128; n + 1];
        for i in 0..=n {
            let mut s = self.coeffs[i];
            for &(k, c) in &terms {
                if k > i {
                    break;
                }
                let t = c.checked_mul(q[i - k]).ok_or(QSeriesError::Overflow(i))?;
                s = s.checked_sub(t).ok_or(QSeriesError::Overflow(i))?;
            }
            q[i] = s * b0;
        }
        Ok(Self { coeffs: q })
    }

    /// `self^k`. A sparse base is multiplied in `k` times so one factor stays
    /// sparse; a dense base uses binary powering.
    pub fn pow(&self, k: u32) -> Result<Self, QSeriesError> {
        let n = self.order();
        let nnz = self.nonzero_count();
        if nnz * nnz <= n + 1 {
            let mut acc = Self::one(n);
            for _ in 0..k {
                acc = acc.mul(self)?;
            }
            return Ok(acc);
        }
        let mut acc = Self::one(n);
        let mut base = self.clone();
        let mut e = k;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base)?;
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base)?;
            }
        }
        Ok(acc)
    }
}

/// `θ(z) = Σ_{m ∈ ℤ} q^{m²}`.
pub fn theta_series(order: usize) -> QSeries {
    let mut s = QSeries::zero(order);
    s.coeffs[0] = 1;
    let mut m = 1usize;
    while m * m <= order {
        s.coeffs[m * m] = 2;
        m += 1;
    }
    s
}

/// `Π_{n ≥ 1} (1 − q^{tn})` from Euler's pentagonal number theorem.
pub fn pentagonal(t: usize, order: usize) -> QSeries {
    let mut s = QSeries::zero(order);
    s.coeffs[0] = 1;
    let mut k = 1usize;
    loop {
        let sign = if k % 2 == 0 { 1 } else { -1 };
        let e1 = t * k * (3 * k - 1) / 2;
        let e2 = t * k * (3 * k + 1) / 2;
        if e1 > order {
            break;
        }
        s.coeffs[e1] += sign;
        if e2 <= order {
            s.coeffs[e2] += sign;
        }
        k += 1;
    }
    s
}

/// `η(tz)^e = q^{te/24} Π (1 − q^{tn})^e`.
pub fn eta_power(t: u64, e: i64, order: usize) -> Result<QSeries, QSeriesError> {
    if t == 0 || e < 0 || (t as i128 * e as i128) % 24 != 0 {
        return Err(QSeriesError::NotAPowerSeries { t, e });
    }
    let shift = (t as i128 * e as i128 / 24) as usize;
    if shift > order {
        return Ok(QSeries::zero(order));
    }
    let base = pentagonal(t as usize, order);
    Ok(base.pow(e as u32)?.shift(shift))
}

/// Real coefficients `λ(n)` of `Σ λ(n) n^{ℓ/2−1/4} e(nz)`, index 0 unused.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfIntegralForm {
    ell: u32,
    lambda: Vec<f64>,
    exact: Option<QSeries>,
    source_tag: String,
}

impl HalfIntegralForm {
    /// From an exact expansion `Σ a(n) qⁿ`, scaled so `λ(1) = 1`.
    pub fn from_series(ell: u32, series: QSeries, tag: &str) -> Result<Self, FormError> {
        let n = series.order();
        if n < 1 {
            return Err(FormError::TooShort(n, 1));
        }
        let a1 = series.coeff(1);
        if a1 == 0 {
            return Err(FormError::ZeroLeading);
        }
        let (series, scale) = if a1 == 1 || a1 == -1 {
            (series.scale(a1)?, 1.0)
        } else {
            (series, a1 as f64)
        };
        let lambda = (0..=n)
            .map(|k| {
                if k == 0 {
                    0.0
                } else {
                    series.coeff(k) as f64 / scale / weight_factor(ell, k)
                }
            })
            .collect();
        Ok(Self {
            ell,
            lambda,
            exact: Some(series),
            source_tag: tag.to_string(),
        })
    }

    /// From normalized coefficients (`lambda[0]` is ignored).
    pub fn from_lambda(ell: u32, mut lambda: Vec<f64>, tag: &str) -> Self {
        if lambda.is_empty() {
            lambda.push(0.0);
        }
        lambda[0] = 0.0;
        Self {
            ell,
            lambda,
            exact: None,
            source_tag: tag.to_string(),
        }
    }

    pub fn ell(&self) -> u32 {
        self.ell
    }

    pub fn n_max(&self) -> usize {
        self.lambda.len() - 1
    }

    pub fn lambda(&self, n: usize) -> f64 {
        self.lambda[n]
    }

    /// `λ(0..=N)` with `λ(0) = 0`.
    pub fn lambdas(&self) -> &[f64] {
        &self.lambda
    }

    pub fn exact(&self) -> Option<&QSeries> {
        self.exact.as_ref()
    }

    pub fn source_tag(&self) -> &str {
        &self.source_tag
    }

    /// Unnormalized coefficient `a(n) = λ(n) n^{ℓ/2−1/4}`.
    pub fn a(&self, n: usize) -> f64 {
        match &self.exact {
            Some(s) => s.coeff(n) as f64,
            None => self.lambda[n] * weight_factor(self.ell, n),
        }
    }
}

/// `n^{ℓ/2 − 1/4}`.
pub fn weight_factor(ell: u32, n: usize) -> f64 {
    (n as f64).powf(ell as f64 / 2.0 - 0.25)
}

pub const DESK_ELL: u32 = 4;
pub const DESK_MIN_ORDER: usize = 25;
pub const DESK_TAG: &str = "eta2^12/theta^3";

/// `η(2z)^{12} θ(z)^{-3}`: weight 9/2 on Γ₀(4), accepted only after the
/// exact `T(p²)` eigencheck for `p ∈ {3, 5, 7}`.
pub fn build_desk_form(order: usize) -> Result<HalfIntegralForm, FormError> {
    if order < DESK_MIN_ORDER {
        return Err(FormError::TooShort(order, DESK_MIN_ORDER));
    }
    let eta = eta_power(2, 12, order)?;
    let theta = theta_series(order);
    let f = eta.div(&theta)?.div(&theta)?.div(&theta)?;
    let back = f.mul(&theta)?.mul(&theta)?.mul(&theta)?;
    if let Some(i) = (0..=order).find(|&i| back.coeff(i) != eta.coeff(i)) {
        return Err(FormError::InexactDivision(i));
    }
    for p in [3u64, 5, 7] {
        let check = eigencheck(&f, DESK_ELL, p)?;
        if !check.passed() {
            return Err(FormError::Eigencheck {
                p,
                reason: format!(
                    "max residual {} over {} coefficients",
                    check.max_residual, check.checked
                ),
            });
        }
    }
    HalfIntegralForm::from_series(DESK_ELL, f, DESK_TAG)
}

/// `b(n) = a(p²n) + ((−1)^ℓ n / p) p^{ℓ−1} a(n) + p^{2ℓ−1} a(n/p²)` for
/// `1 ≤ n ≤ ⌊N/p²⌋`, the range where `a(p²n)` is known. Index 0 is 0; when
/// `p² > N` the result holds only that entry.
pub fn hecke_tp2(series: &QSeries, ell: u32, p: u64) -> Result<Vec<i128>, FormError> {
    if p < 3 || !is_prime(p) {
        return Err(FormError::NotOddPrime(p));
    }
    let p2 = (p * p) as usize;
    let top = series.order() / p2;
    let sign = if ell % 2 == 0 { 1i64 } else { -1 };
    let mid = (p as i128)
        .checked_pow(ell - 1)
        .ok_or(QSeriesError::Overflow(0))?;
    let last = (p as i128)
        .checked_pow(2 * ell - 1)
        .ok_or(QSeriesError::Overflow(0))?;
    let mut b = vec![0i128; top + 1];
    for (n, slot) in b.iter_mut().enumerate().skip(1) {
        let chi = jacobi(sign * n as i64, p as i64).map_err(|_| FormError::NotOddPrime(p))? as i128;
        let mut v = series.coeff(p2 * n);
        let m = chi
            .checked_mul(mid)
            .and_then(|x| x.checked_mul(series.coeff(n)))
            .ok_or(QSeriesError::Overflow(n))?;
        v = v.checked_add(m).ok_or(QSeriesError::Overflow(n))?;
        if n % p2 == 0 {
            let l = last
                .checked_mul(series.coeff(n / p2))
                .ok_or(QSeriesError::Overflow(n))?;
            v = v.checked_add(l).ok_or(QSeriesError::Overflow(n))?;
        }
        *slot = v;
    }
    Ok(b)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EigenCheck {
    pub p: u64,
    /// Eigenvalue read off the first nonzero coefficient, if it divides.
    pub omega: Option<i128>,
    pub checked: usize,
    /// `max |b(n) − ω a(n)|`; zero for an eigenform.
    pub max_residual: i128,
}

impl EigenCheck {
    pub fn passed(&self) -> bool {
        self.max_residual == 0 && (self.omega.is_some() || self.checked == 0)
    }
}

pub fn eigencheck(series: &QSeries, ell: u32, p: u64) -> Result<EigenCheck, FormError> {
    let b = hecke_tp2(series, ell, p)?;
    let checked = b.len() - 1;
    let lead = (1..b.len()).find(|&n| series.coeff(n) != 0);
    let Some(n0) = lead else {
        let max_residual = b.iter().map(|x| x.abs()).max().unwrap_or(0);
        return Ok(EigenCheck {
            p,
            omega: (max_residual == 0).then_some(0),
            checked,
            max_residual,
        });
    };
    let a0 = series.coeff(n0);
    if b[n0] % a0 != 0 {
        return Ok(EigenCheck {
            p,
            omega: None,
            checked,
            max_residual: b[n0].abs(),
        });
    }
    let omega = b[n0] / a0;
    let mut max_residual = 0i128;
    for n in 1..b.len() {
        let r = omega
            .checked_mul(series.coeff(n))
            .and_then(|x| b[n].checked_sub(x))
            .ok_or(QSeriesError::Overflow(n))?;
        max_residual = max_residual.max(r.abs());
    }
    Ok(EigenCheck {
        p,
        omega: Some(omega),
        checked,
        max_residual,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VanishingViolation {
    pub j: u32,
    pub t: u64,
    pub m: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VanishingReport {
    pub n_max: usize,
    /// Number of `2^j t` (odd squarefree `t`) with vanishing coefficient.
    pub zeros: usize,
    pub pairs_checked: usize,
    pub violations: Vec<VanishingViolation>,
}

/// For every `2^j t ≤ N` with `t` odd squarefree and `a(2^j t) = 0`, checks
/// `a(2^j t m²) = 0` for odd `m ≤ max_m`.
pub fn check_vanishing_propagation(coeffs: &[i128], max_m: u64) -> VanishingReport {
    let n_max = coeffs.len().saturating_sub(1);
    let mut zeros = 0;
    let mut pairs_checked = 0;
    let mut violations = Vec::new();
    for n0 in 1..=n_max {
        if coeffs[n0] != 0 {
            continue;
        }
        let j = n0.trailing_zeros();
        let t = (n0 >> j) as u64;
        if !arith::is_squarefree(t) {
            continue;
        }
        zeros += 1;
        let mut m = 3u64;
        while m <= max_m && n0 as u64 * m * m <= n_max as u64 {
            pairs_checked += 1;
            if coeffs[n0 * (m * m) as usize] != 0 {
                violations.push(VanishingViolation { j, t, m });
            }
            m += 2;
        }
    }
    VanishingReport {
        n_max,
        zeros,
        pairs_checked,
        violations,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoefficientBoundReport {
    pub rho: f64,
    pub n_max: usize,
    /// `max |λ(n)| / (t^ρ τ(r)²)` over `n = t r² ≤ N`.
    pub constant: f64,
    pub argmax: usize,
}

pub fn coefficient_bound_check(lambda: &[f64], rho: f64) -> CoefficientBoundReport {
    let mut best = (0.0f64, 0usize);
    for (n, &l) in lambda.iter().enumerate().skip(1) {
        let (t, r) = squarefree_split(n as u64).expect("n >= 1");
        let tr = tau(r) as f64;
        let v = l.abs() / ((t as f64).powf(rho) * tr * tr);
        if v > best.0 {
            best = (v, n);
        }
    }
    CoefficientBoundReport {
        rho,
        n_max: lambda.len().saturating_sub(1),
        constant: best.0,
        argmax: best.1,
    }
}
