//! Kloosterman, Salié and related character sums, and the kernels
//! `K(a,n;d)` and `φ_a(n,d)` used by the Voronoi main term.
//!
//! Sums over residues modulo 1 equal 1. Terms whose character vanishes are
//! skipped, which is the same as summing over units only.

pub mod verify;

use crate::arith::{
    self, crt_combine, eps_pow, factorize, gcd_u64, i_half_pow, i_pow, inv_unchecked, jacobi,
    mod_sqrt_all, ArithError, ResidueClass,
};
use crate::numeric::{ComplexSum, UnitTable};
use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

pub type ComplexValue = Complex64;

/// Largest modulus accepted by the direct evaluators.
pub const MAX_MODULUS: u64 = 1 << 31;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExpSumError {
    #[error("modulus must be odd, got {0}")]
    EvenModulus(u64),
    #[error("modulus must be divisible by 4, got {0}")]
    NotDivisibleBy4(u64),
    #[error("modulus must be positive")]
    ZeroModulus,
    #[error("modulus {0} exceeds the supported range")]
    ModulusTooLarge(u64),
    #[error("weight index ell must be at least 2, got {0}")]
    InvalidEll(u32),
    #[error("neither a={a} nor n={n} is coprime to d={d}")]
    NoCoprimeWitness { a: i64, n: i64, d: u64 },
    #[error(transparent)]
    Arith(#[from] ArithError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ParityClass {
    Div4,
    TwiceOdd,
    Odd,
}

impl ParityClass {
    pub fn of(d: u64) -> Self {
        if d % 4 == 0 {
            ParityClass::Div4
        } else if d % 2 == 0 {
            ParityClass::TwiceOdd
        } else {
            ParityClass::Odd
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExpSumContext {
    d: u64,
    parity: ParityClass,
    q_d: u64,
    ell: u32,
}

impl ExpSumContext {
    pub fn new(d: u64, ell: u32) -> Result<Self, ExpSumError> {
        if d == 0 {
            return Err(ExpSumError::ZeroModulus);
        }
        if 4 * d > MAX_MODULUS {
            return Err(ExpSumError::ModulusTooLarge(d));
        }
        if ell < 2 {
            return Err(ExpSumError::InvalidEll(ell));
        }
        let parity = ParityClass::of(d);
        let q_d = if parity == ParityClass::Div4 { d } else { 2 * d };
        Ok(Self { d, parity, q_d, ell })
    }

    pub fn d(&self) -> u64 {
        self.d
    }

    pub fn parity(&self) -> ParityClass {
        self.parity
    }

    pub fn q_d(&self) -> u64 {
        self.q_d
    }

    pub fn ell(&self) -> u32 {
        self.ell
    }
}

/// Units modulo `c` with their inverses, the relevant quadratic symbol and
/// a table of `e(j/c)`. Reused across many sums with the same modulus.
#[derive(Debug, Clone)]
pub struct ModTable {
    c: u64,
    units: Vec<u64>,
    inverses: Vec<u64>,
    /// `(x/c)` for odd `c`, `(c/x)` for `4 | c`, unused otherwise.
    symbols: Vec<i8>,
    unit: UnitTable,
}

impl ModTable {
    pub fn new(c: u64) -> Result<Self, ExpSumError> {
        if c == 0 {
            return Err(ExpSumError::ZeroModulus);
        }
        if c > MAX_MODULUS {
            return Err(ExpSumError::ModulusTooLarge(c));
        }
        let units: Vec<u64> = if c == 1 {
            vec![0]
        } else {
            (1..c).filter(|&x| gcd_u64(x, c) == 1).collect()
        };
        let inverses = units.iter().map(|&x| inv_unchecked(x, c)).collect();
        let symbols = match ParityClass::of(c) {
            ParityClass::Odd => units
                .iter()
                .map(|&x| jacobi(x as i64, c as i64))
                .collect::<Result<_, _>>()?,
            ParityClass::Div4 => units
                .iter()
                .map(|&x| jacobi(c as i64, x as i64))
                .collect::<Result<_, _>>()?,
            ParityClass::TwiceOdd => vec![0; units.len()],
        };
        Ok(Self {
            c,
            units,
            inverses,
            symbols,
            unit: UnitTable::new(c),
        })
    }

    pub fn modulus(&self) -> u64 {
        self.c
    }

    fn red(&self, m: i64) -> u64 {
        m.rem_euclid(self.c as i64) as u64
    }

    /// `S(m,n;c)` for odd `c`.
    pub fn salie(&self, m: i64, n: i64) -> Result<Complex64, ExpSumError> {
        if self.c % 2 == 0 {
            return Err(ExpSumError::EvenModulus(self.c));
        }
        if self.c == 1 {
            return Ok(Complex64::new(1.0, 0.0));
        }
        let (m, n) = (self.red(m), self.red(n));
        let mut s = ComplexSum::new();
        for i in 0..self.units.len() {
            let k = m * self.units[i] + n * self.inverses[i];
            s.add(self.unit.at_u(k) * self.symbols[i] as f64);
        }
        Ok(s.value())
    }

    /// Classical Kloosterman sum `Σ* e((mx+nx̄)/c)`.
    pub fn kloosterman(&self, m: i64, n: i64) -> Complex64 {
        if self.c == 1 {
            return Complex64::new(1.0, 0.0);
        }
        let (m, n) = (self.red(m), self.red(n));
        let mut s = ComplexSum::new();
        for i in 0..self.units.len() {
            s.add(self.unit.at_u(m * self.units[i] + n * self.inverses[i]));
        }
        s.value()
    }

    /// `K_k(m,n;c) = Σ* ε_d^{-k} (c/d) e((md+nd̄)/c)` for `4 | c`.
    pub fn twisted(&self, m: i64, n: i64, k: i64) -> Result<Complex64, ExpSumError> {
        if self.c % 4 != 0 {
            return Err(ExpSumError::NotDivisibleBy4(self.c));
        }
        let (m, n) = (self.red(m), self.red(n));
        let w3 = arith::i_pow(-k);
        let mut s = ComplexSum::new();
        for i in 0..self.units.len() {
            let d = self.units[i];
            let t = self.unit.at_u(m * d + n * self.inverses[i]) * self.symbols[i] as f64;
            s.add(if d % 4 == 1 { t } else { t * w3 });
        }
        Ok(s.value())
    }
}

pub fn salie_direct(m: i64, n: i64, c: u64) -> Result<ComplexValue, ExpSumError> {
    if c % 2 == 0 {
        return Err(ExpSumError::EvenModulus(c));
    }
    ModTable::new(c)?.salie(m, n)
}

pub fn kloosterman_twisted_direct(
    m: i64,
    n: i64,
    c: u64,
    k: i64,
) -> Result<ComplexValue, ExpSumError> {
    if c % 4 != 0 {
        return Err(ExpSumError::NotDivisibleBy4(c));
    }
    ModTable::new(c)?.twisted(m, n, k)
}

pub fn kloosterman_classical(m: i64, n: i64, c: u64) -> Result<ComplexValue, ExpSumError> {
    Ok(ModTable::new(c)?.kloosterman(m, n))
}

/// `K(a,n;d) = Σ*_{u mod d} ϖ_d(n, ū) e(−au/d)` through Kloosterman–Salié sums.
///
/// The weights `ϖ_d` are those of the expansion of `f` at the cusp `u/d`
/// (see [`varpi`]):
///
/// * `2 ∤ d`: `i^{ℓ+1/2} ε_d^{2ℓ+1} conj S(4̄n, a; d)`,
/// * `4 | d`: `i^{2ℓ+1} K_{2ℓ+1}(−n, −a; d)`,
/// * `2 ‖ d`: `(1/4) i^{2ℓ+1} K_{2ℓ+1}(−n, −4a; 4d)`, the sum over `u` being
///   enlarged to units mod `4d`, where `e(−au/d) = e(−4au/4d)`.
pub fn k_and(a: i64, n: i64, ctx: &ExpSumContext) -> Result<ComplexValue, ExpSumError> {
    k_and_with(&table_for(ctx)?, a, n, ctx)
}

/// The table [`k_and_with`] expects: modulus `4d` when `2 ‖ d`, else `d`.
pub fn table_for(ctx: &ExpSumContext) -> Result<ModTable, ExpSumError> {
    match ctx.parity {
        ParityClass::TwiceOdd => ModTable::new(4 * ctx.d),
        _ => ModTable::new(ctx.d),
    }
}

/// As [`k_and`] with a prebuilt table from [`table_for`].
pub fn k_and_with(
    table: &ModTable,
    a: i64,
    n: i64,
    ctx: &ExpSumContext,
) -> Result<ComplexValue, ExpSumError> {
    let d = ctx.d;
    let k = 2 * ctx.ell as i64 + 1;
    match ctx.parity {
        ParityClass::Odd => {
            let pre = i_half_pow(ctx.ell) * eps_pow(d as i64, k)?;
            if d == 1 {
                return Ok(pre);
            }
            let m = four_bar_times(n, d);
            Ok(pre * table.salie(m, a)?.conj())
        }
        ParityClass::Div4 => Ok(i_pow(k) * table.twisted(-n, -a, k)?),
        ParityClass::TwiceOdd => Ok(i_pow(k) * table.twisted(-n, -4 * a, k)? * 0.25),
    }
}

/// `K(a,n;d)` from the Kloosterman–Salié table, read literally:
/// `i^{ℓ+1/2} ε_d^{−(2ℓ+1)} conj S(4̄n, a; d)`, `conj K_{2ℓ+1}(n, a; d)` and
/// `(1/4) conj K_{2ℓ+1}(n, a; 4d)`. The first two agree with
/// [`k_and_table_literal`]; the third needs `4a` for that.
pub fn k_and_ks_literal(
    a: i64,
    n: i64,
    ctx: &ExpSumContext,
) -> Result<ComplexValue, ExpSumError> {
    let d = ctx.d;
    let k = 2 * ctx.ell as i64 + 1;
    match ctx.parity {
        ParityClass::Odd => {
            let pre = i_half_pow(ctx.ell) * eps_pow(d as i64, -k)?;
            if d == 1 {
                return Ok(pre);
            }
            Ok(pre * salie_direct(four_bar_times(n, d), a, d)?.conj())
        }
        ParityClass::Div4 => Ok(kloosterman_twisted_direct(n, a, d, k)?.conj()),
        ParityClass::TwiceOdd => Ok(kloosterman_twisted_direct(n, a, 4 * d, k)?.conj() * 0.25),
    }
}

fn four_bar_times(n: i64, d: u64) -> i64 {
    let inv4 = inv_unchecked(4, d) as i128;
    ((n as i128).rem_euclid(d as i128) * inv4 % d as i128) as i64
}

/// Weight of `λ(n;d)` in the expansion of `f` at the cusp `u/d`:
///
/// `f(u/d + τ) = (i/(q_d τ))^{ℓ+1/2} Σ_n λ(n;d) i^{−(ℓ+1/2)} ϖ n^{ℓ/2−1/4} e(−n/(q_d² τ))`
///
/// with `λ(n;d) = λ_f`, `2^{ℓ+1/2} λ_g`, `λ_h` for `4 | d`, `2 ‖ d`, `2 ∤ d`.
/// With `v = ū`:
///
/// * `2 ∤ d`: `i^{ℓ+1/2} ε_d^{2ℓ+1} (v/d) e(−4̄nv/d)`,
/// * `4 | d`: `i^{2ℓ+1} ε_v^{−(2ℓ+1)} (d/v) e(−nv/d)`,
/// * `2 ‖ d`: the mean over the lifts `v` of `ū` to units mod `4d` of
///   `i^{2ℓ+1} ε_v^{−(2ℓ+1)} (d/v) e(−nv/4d)`.
pub fn varpi(n: i64, u: u64, ctx: &ExpSumContext) -> Result<ComplexValue, ExpSumError> {
    let d = ctx.d;
    let k = 2 * ctx.ell as i64 + 1;
    if gcd_u64(u % d, d) != 1 {
        return Err(ExpSumError::Arith(ArithError::NotInvertible {
            value: u as i64,
            modulus: d as i64,
        }));
    }
    match ctx.parity {
        ParityClass::Odd => {
            let pre = i_half_pow(ctx.ell) * eps_pow(d as i64, k)?;
            if d == 1 {
                return Ok(pre);
            }
            let v = inv_unchecked(u % d, d) as i64;
            let chi = jacobi(v, d as i64)? as f64;
            let ph = (four_bar_times(n, d) as i128 * v as i128).rem_euclid(d as i128) as f64;
            Ok(pre * chi * crate::numeric::e(-ph / d as f64))
        }
        ParityClass::Div4 => {
            let v = inv_unchecked(u % d, d) as i64;
            even_weight(n, v, d, d, k)
        }
        ParityClass::TwiceOdd => {
            let v0 = inv_unchecked(u % d, d);
            let mut s = ComplexSum::new();
            for j in 0..4 {
                s.add(even_weight(n, (v0 + j * d) as i64, d, 4 * d, k)?);
            }
            Ok(s.value() * 0.25)
        }
    }
}

/// `i^k ε_v^{−k} (d/v) e(−nv/c)`.
fn even_weight(n: i64, v: i64, d: u64, c: u64, k: i64) -> Result<ComplexValue, ExpSumError> {
    let chi = jacobi(d as i64, v)? as f64;
    let ph = (n as i128 * v as i128).rem_euclid(c as i128) as f64;
    Ok(i_pow(k) * eps_pow(v, -k)? * chi * crate::numeric::e(-ph / c as f64))
}

/// `K(a,n;d) = Σ*_{u mod d} ϖ_d(n, ū) e(−au/d)` summed term by term from
/// [`varpi`]; the reference for [`k_and`].
pub fn k_and_definitional(
    a: i64,
    n: i64,
    ctx: &ExpSumContext,
) -> Result<ComplexValue, ExpSumError> {
    let d = ctx.d;
    if d == 1 {
        return varpi(n, 0, ctx);
    }
    let t = UnitTable::new(d);
    let ar = a.rem_euclid(d as i64);
    let mut s = ComplexSum::new();
    for u in (1..d).filter(|&u| gcd_u64(u, d) == 1) {
        let ph = (ar as i128 * u as i128 % d as i128) as i64;
        s.add(varpi(n, u, ctx)? * t.at(-ph));
    }
    Ok(s.value())
}

/// `K(a,n;d)` summed from the character table, read literally:
/// `ϖ_d(n,v) = ε_v^{2ℓ+1} (d/v) e(−nv/d)`, `ε_v^{2ℓ+1} (d/v) e(−nv/4d)`
/// and `i^{ℓ+1/2} ε_d^{−(2ℓ+1)} (v/d) e(−4̄nv/d)` for `4 | d`, `2 ‖ d`,
/// `2 ∤ d`. The `ε` exponents have the opposite sign to those of the cusp
/// expansions and the even rows lack `i^{2ℓ+1}`; see [`varpi`].
pub fn k_and_table_literal(
    a: i64,
    n: i64,
    ctx: &ExpSumContext,
) -> Result<ComplexValue, ExpSumError> {
    let d = ctx.d;
    let k = 2 * ctx.ell as i64 + 1;
    let mut s = ComplexSum::new();
    match ctx.parity {
        ParityClass::Odd => {
            let pre = i_half_pow(ctx.ell) * eps_pow(d as i64, -k)?;
            if d == 1 {
                return Ok(pre);
            }
            let t = UnitTable::new(d);
            let inv4 = inv_unchecked(4, d) as i64;
            for u in (1..d).filter(|&u| gcd_u64(u, d) == 1) {
                let v = inv_unchecked(u, d) as i64;
                let chi = jacobi(v, d as i64)? as f64;
                let ph = -(inv4 * n.rem_euclid(d as i64) % d as i64) * v
                    - a.rem_euclid(d as i64) * u as i64;
                s.add(t.at(ph % d as i64) * chi);
            }
            Ok(pre * s.value())
        }
        ParityClass::Div4 => {
            let t = UnitTable::new(d);
            for u in (1..d).filter(|&u| gcd_u64(u, d) == 1) {
                let v = inv_unchecked(u, d) as i64;
                let chi = jacobi(d as i64, v)? as f64 * eps_pow(v, k)?;
                let ph = -(n.rem_euclid(d as i64)) * v - a.rem_euclid(d as i64) * u as i64;
                s.add(t.at(ph) * chi);
            }
            Ok(s.value())
        }
        ParityClass::TwiceOdd => {
            let big = 4 * d;
            let t = UnitTable::new(big);
            for u in (1..big).filter(|&u| gcd_u64(u, big) == 1) {
                let v = inv_unchecked(u, big) as i64;
                let chi = jacobi(d as i64, v)? as f64 * eps_pow(v, k)?;
                let ph = -(n.rem_euclid(big as i64)) * v - 4 * a.rem_euclid(d as i64) * u as i64;
                s.add(t.at(ph) * chi);
            }
            Ok(s.value() * 0.25)
        }
    }
}

/// `Σ_{y mod d, y² ≡ b} e(y/d)` for odd `d`, from the square roots modulo
/// each prime power glued by CRT.
pub fn sqrt_exp_sum(b: i64, d: u64) -> Result<ComplexValue, ExpSumError> {
    if d % 2 == 0 {
        return Err(ExpSumError::EvenModulus(d));
    }
    if d == 1 {
        return Ok(Complex64::new(1.0, 0.0));
    }
    let fac = factorize(d)?;
    let mut root_sets: Vec<Vec<ResidueClass>> = Vec::new();
    for (p, alpha, _) in fac.prime_powers() {
        let roots = mod_sqrt_all(b, p as i64, alpha)?;
        if roots.is_empty() {
            return Ok(Complex64::new(0.0, 0.0));
        }
        root_sets.push(roots);
    }
    let mut idx = vec![0usize; root_sets.len()];
    let mut s = ComplexSum::new();
    let mut pick = Vec::with_capacity(root_sets.len());
    loop {
        pick.clear();
        pick.extend(idx.iter().zip(&root_sets).map(|(&i, set)| set[i]));
        let y = crt_combine(&pick)?;
        s.add(crate::numeric::e(y.value() as f64 / d as f64));
        let mut j = 0;
        loop {
            if j == idx.len() {
                return Ok(s.value());
            }
            idx[j] += 1;
            if idx[j] < root_sets[j].len() {
                break;
            }
            idx[j] = 0;
            j += 1;
        }
    }
}

/// `K(a,n;d)` for odd `d` through the closed form
/// `i^{ℓ+1/2} ε_d^{−2ℓ} d^{1/2} (x/d) Σ_{y² ≡ an} e(y/d)`,
/// where `x ∈ {a, n}` is coprime to `d`.
pub fn salie_closed_form(a: i64, n: i64, d: u64, ell: u32) -> Result<ComplexValue, ExpSumError> {
    closed_form_with_exponent(a, n, d, ell, -(2 * ell as i64))
}

fn closed_form_with_exponent(
    a: i64,
    n: i64,
    d: u64,
    ell: u32,
    eps_exp: i64,
) -> Result<ComplexValue, ExpSumError> {
    if d % 2 == 0 {
        return Err(ExpSumError::EvenModulus(d));
    }
    let witness = [a, n]
        .into_iter()
        .find(|&x| gcd_u64(x.unsigned_abs(), d) == 1)
        .ok_or(ExpSumError::NoCoprimeWitness { a, n, d })?;
    let b = ((a as i128 * n as i128).rem_euclid(d as i128)) as i64;
    let chi = jacobi(witness, d as i64)? as f64;
    Ok(i_half_pow(ell) * eps_pow(d as i64, eps_exp)? * ((d as f64).sqrt() * chi) * sqrt_exp_sum(b, d)?)
}

/// `φ_a(n,d) = √q_d · i^{-(ℓ+1/2)} · K(a,n;d)`.
pub fn phi_a(a: i64, n: i64, ctx: &ExpSumContext) -> Result<ComplexValue, ExpSumError> {
    Ok(phi_from_k(k_and(a, n, ctx)?, ctx))
}

pub fn phi_from_k(k: ComplexValue, ctx: &ExpSumContext) -> ComplexValue {
    k * i_half_pow(ctx.ell).conj() * (ctx.q_d as f64).sqrt()
}

/// `φ_a(n,Q)` for odd `Q` from Salié sums modulo the prime powers of `Q`:
/// `√(2Q) ε_Q^{−(2ℓ+1)} Π S(n·conj(4Q_p), a·conj(Q_p); p^α)` with `Q_p = Q/p^α`.
pub fn phi_factored(a: i64, n: i64, q: u64, ell: u32) -> Result<ComplexValue, ExpSumError> {
    if q % 2 == 0 {
        return Err(ExpSumError::EvenModulus(q));
    }
    let mut prod = Complex64::new(1.0, 0.0);
    for (_, _, pa) in factorize(q)?.prime_powers() {
        let qp = q / pa;
        let m = mul_inv(n, 4 * qp, pa);
        let nn = mul_inv(a, qp, pa);
        prod *= salie_direct(m, nn, pa)?;
    }
    let pre = eps_pow(q as i64, -(2 * ell as i64 + 1))? * (2.0 * q as f64).sqrt();
    Ok(pre * prod)
}

/// `x · conj(u) mod c`.
fn mul_inv(x: i64, u: u64, c: u64) -> i64 {
    let inv = inv_unchecked(u % c, c) as i128;
    ((x as i128).rem_euclid(c as i128) * inv % c as i128) as i64
}

/// `c_b(m,d) = Σ_{y mod d, y² ≡ bm²} e(y/d)`.
pub fn c_b(b: i64, m: i64, d: u64) -> Result<ComplexValue, ExpSumError> {
    if d == 0 {
        return Err(ExpSumError::ZeroModulus);
    }
    let target = ((b as i128) * (m as i128) * (m as i128)).rem_euclid(d as i128) as u64;
    if d % 2 == 1 {
        return sqrt_exp_sum(target as i64, d);
    }
    let unit = UnitTable::new(d);
    let mut s = ComplexSum::new();
    for y in 0..d {
        if ((y as u128 * y as u128) % d as u128) as u64 == target {
            s.add(unit.at_u(y));
        }
    }
    Ok(s.value())
}

/// `g(1,p^t) = Σ_{x mod p^t} e(x²/p^t)`.
pub fn gauss_sum(p: u64, t: u32) -> Result<ComplexValue, ExpSumError> {
    if p % 2 == 0 {
        return Err(ExpSumError::EvenModulus(p));
    }
    let c = p
        .checked_pow(t)
        .filter(|&c| c <= MAX_MODULUS)
        .ok_or(ExpSumError::ModulusTooLarge(p))?;
    let unit = UnitTable::new(c);
    let s: ComplexSum = (0..c).map(|x| unit.at_u(x * x % c)).collect();
    Ok(s.value())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::e;

    const TOL: f64 = 1e-9;
    const FIXTURE_S115: f64 = -3.618_033_988_749_895;

    fn close(a: Complex64, b: Complex64) -> bool {
        (a - b).norm() < TOL
    }

    /// Reference Salié sum written against the plain definition.
    fn salie_ref(m: i64, n: i64, c: i64) -> Complex64 {
        if c == 1 {
            return Complex64::new(1.0, 0.0);
        }
        let mut s = Complex64::new(0.0, 0.0);
        for x in 0..c {
            let j = jacobi(x, c).unwrap();
            if j == 0 {
                continue;
            }
            let xi = arith::mod_inverse(x, c).unwrap().value();
            s += e(((m * x + n * xi).rem_euclid(c)) as f64 / c as f64) * j as f64;
        }
        s
    }

    #[test]
    fn salie_examples() {
        assert!(close(salie_direct(0, 0, 1).unwrap(), Complex64::new(1.0, 0.0)));
        assert!(close(
            salie_direct(1, 0, 3).unwrap(),
            Complex64::new(0.0, 3f64.sqrt())
        ));
        let v = salie_direct(1, 1, 5).unwrap();
        assert!(close(v, salie_ref(1, 1, 5)));
        assert!((v.re - FIXTURE_S115).abs() < 1e-9, "{v}");
        assert!(v.im.abs() < 1e-9);
        assert!(salie_direct(1, 1, 4).is_err());
    }

    #[test]
    fn salie_matches_reference() {
        for c in (1..60).step_by(2) {
            for m in -3..c {
                for n in [0, 1, 2, c - 1, 7] {
                    assert!(close(salie_direct(m, n, c as u64).unwrap(), salie_ref(m, n, c)));
                }
            }
        }
    }

    #[test]
    fn twisted_examples() {
        let v = kloosterman_twisted_direct(0, 0, 4, 1).unwrap();
        // units 1,3: 1·(4/1) + i^{-1}·(4/3) = 1 − i
        assert!(close(v, Complex64::new(1.0, -1.0)), "{v}");
        assert!(kloosterman_twisted_direct(1, 1, 6, 1).is_err());
        let v = kloosterman_twisted_direct(1, 1, 8, 3).unwrap();
        let mut r = Complex64::new(0.0, 0.0);
        for d in [1i64, 3, 5, 7] {
            let di = arith::mod_inverse(d, 8).unwrap().value();
            r += eps_pow(d, -3).unwrap()
                * jacobi(8, d).unwrap() as f64
                * e(((d + di) % 8) as f64 / 8.0);
        }
        assert!(close(v, r));
    }

    #[test]
    fn twisted_conjugation() {
        // conj(ε_d^{-(k-2)}) = ε_d^{k-2} = ε_d^{-k} for odd k, since ε_d⁴ = 1
        for c in (4..64).step_by(4) {
            for m in 0..c {
                for n in [0, 1, 3] {
                    let lhs = kloosterman_twisted_direct(m, n, c as u64, 9).unwrap();
                    let rhs = kloosterman_twisted_direct(-m, -n, c as u64, 7).unwrap().conj();
                    assert!(close(lhs, rhs), "c={c} m={m} n={n}");
                }
            }
        }
    }

    #[test]
    fn classical_examples() {
        for c in 1..30u64 {
            let v = kloosterman_classical(0, 0, c).unwrap();
            assert!((v.re - arith::euler_phi(c) as f64).abs() < TOL);
        }
        let v = kloosterman_classical(1, 0, 6).unwrap();
        assert!(close(v, Complex64::new(arith::ramanujan_sum(6, 1) as f64, 0.0)));
        let v = kloosterman_classical(1, 1, 5).unwrap();
        let r: Complex64 = (1..5)
            .map(|x| e((x + arith::mod_inverse(x, 5).unwrap().value()) as f64 / 5.0))
            .sum();
        assert!(close(v, r));
        assert!(v.im.abs() < TOL);
    }

    #[test]
    fn k_and_examples() {
        let ctx = ExpSumContext::new(1, 4).unwrap();
        assert!(close(k_and(3, 7, &ctx).unwrap(), i_half_pow(4)));
        let ctx = ExpSumContext::new(5, 4).unwrap();
        assert!(close(
            k_and(0, 1, &ctx).unwrap(),
            k_and_definitional(0, 1, &ctx).unwrap()
        ));
    }

    #[test]
    fn k_and_matches_definition_all_parities() {
        for d in 1..=40u64 {
            let ctx = ExpSumContext::new(d, 4).unwrap();
            for a in 0..d as i64 {
                for n in 0..d as i64 {
                    let x = k_and(a, n, &ctx).unwrap();
                    let y = k_and_definitional(a, n, &ctx).unwrap();
                    assert!(close(x, y), "d={d} a={a} n={n}: {x} vs {y}");
                }
            }
        }
    }

    fn max_gap(d: u64, f: impl Fn(i64, i64, &ExpSumContext) -> Complex64, g: impl Fn(i64, i64, &ExpSumContext) -> Complex64) -> f64 {
        let ctx = ExpSumContext::new(d, 4).unwrap();
        (0..d as i64)
            .flat_map(|a| (0..d as i64).map(move |n| (a, n)))
            .map(|(a, n)| (f(a, n, &ctx) - g(a, n, &ctx)).norm())
            .fold(0.0, f64::max)
    }

    #[test]
    fn literal_ks_follows_literal_table_except_twice_odd() {
        let ks = |a, n, c: &ExpSumContext| k_and_ks_literal(a, n, c).unwrap();
        let table = |a, n, c: &ExpSumContext| k_and_table_literal(a, n, c).unwrap();
        for d in [1u64, 3, 4, 5, 8, 9, 12, 15, 16] {
            assert!(max_gap(d, ks, table) < TOL, "d={d}");
        }
        assert!(max_gap(6, ks, table) > 1.0);
    }

    #[test]
    fn literal_table_differs_from_cusp_weights() {
        let derived = |a, n, c: &ExpSumContext| k_and(a, n, c).unwrap();
        let table = |a, n, c: &ExpSumContext| k_and_table_literal(a, n, c).unwrap();
        assert!(max_gap(1, derived, table) < TOL);
        assert!(max_gap(5, derived, table) < TOL);
        for d in [3u64, 4, 6, 7, 8] {
            assert!(max_gap(d, derived, table) > 1.0, "d={d}");
        }
    }

    #[test]
    fn varpi_lifts_agree_on_support_of_g() {
        let ctx = ExpSumContext::new(10, 4).unwrap();
        let k = 9;
        for u in [1u64, 3, 7, 9] {
            let v0 = inv_unchecked(u, 10);
            for n in [1i64, 9, 17, 33] {
                let w: Vec<Complex64> = (0..4)
                    .map(|j| even_weight(n, (v0 + 10 * j) as i64, 10, 40, k).unwrap())
                    .collect();
                assert!(w.iter().all(|x| close(*x, w[0])));
            }
            assert!(varpi(2, u, &ctx).unwrap().norm() < TOL);
        }
    }

    #[test]
    fn closed_form_examples() {
        for (a, n, d) in [(1, 1, 3u64), (1, 4, 25)] {
            let ctx = ExpSumContext::new(d, 4).unwrap();
            assert!(close(
                salie_closed_form(a, n, d, 4).unwrap(),
                k_and(a, n, &ctx).unwrap()
            ));
        }
        assert!(matches!(
            salie_closed_form(0, 0, 9, 4),
            Err(ExpSumError::NoCoprimeWitness { .. })
        ));
    }

    #[test]
    fn phi_examples() {
        for ell in 2..6 {
            let ctx = ExpSumContext::new(1, ell).unwrap();
            assert!(close(phi_a(0, 1, &ctx).unwrap(), Complex64::new(2f64.sqrt(), 0.0)));
            assert!(close(
                phi_factored(0, 1, 1, ell).unwrap(),
                Complex64::new(2f64.sqrt(), 0.0)
            ));
        }
        for (a, n, q) in [(1, 2, 15u64), (0, 3, 9), (0, 1, 3)] {
            let ctx = ExpSumContext::new(q, 4).unwrap();
            let p = phi_a(a, n, &ctx).unwrap();
            assert!(close(p, phi_factored(a, n, q, 4).unwrap()));
            assert!(p.im.abs() < TOL);
        }
        assert!(phi_factored(1, 1, 6, 4).is_err());
    }

    #[test]
    fn phi_trivial_bound() {
        for d in 1..=60u64 {
            let ctx = ExpSumContext::new(d, 4).unwrap();
            for a in 0..d as i64 {
                for n in 0..d as i64 {
                    let p = phi_a(a, n, &ctx).unwrap();
                    assert!(p.norm() <= 2f64.sqrt() * (d as f64).powf(1.5) + TOL);
                }
            }
        }
    }

    #[test]
    fn c_b_examples() {
        let v = c_b(1, 1, 9).unwrap();
        assert!(close(v, Complex64::new(2.0 * (std::f64::consts::TAU / 9.0).cos(), 0.0)));
        assert!((v.re - 1.532_088_886_237_956).abs() < 1e-9);
        assert!(c_b(1, 3, 9).unwrap().norm() < TOL);
        assert!(c_b(2, 1, 5).unwrap().norm() < TOL);
        assert!(close(c_b(3, 1, 1).unwrap(), Complex64::new(1.0, 0.0)));
    }

    #[test]
    fn c_b_matches_brute_force() {
        for d in 1..=120u64 {
            for b in 0..d as i64 {
                for m in [1i64, 2, 3, 5] {
                    let t = (b * m * m).rem_euclid(d as i64);
                    let r: Complex64 = (0..d as i64)
                        .filter(|y| (y * y).rem_euclid(d as i64) == t)
                        .map(|y| e(y as f64 / d as f64))
                        .sum();
                    assert!(close(c_b(b, m, d).unwrap(), r), "b={b} m={m} d={d}");
                }
            }
        }
    }

    #[test]
    fn gauss_examples() {
        assert!(close(gauss_sum(3, 1).unwrap(), Complex64::new(0.0, 3f64.sqrt())));
        assert!(close(gauss_sum(5, 1).unwrap(), Complex64::new(5f64.sqrt(), 0.0)));
        assert!(gauss_sum(3, 2).unwrap().norm() <= 3.0 + TOL);
        for p in [3u64, 5, 7, 11, 13] {
            for t in 1..=4 {
                if p.pow(t) < 100_000 {
                    assert!(gauss_sum(p, t).unwrap().norm() <= (p as f64).powf(t as f64 / 2.0) + 1e-8);
                }
            }
        }
    }
}
