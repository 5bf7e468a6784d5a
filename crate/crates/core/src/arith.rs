//! Modular arithmetic: Jacobi symbols, theta multipliers, inverses, CRT,
//! square roots modulo prime powers, Ramanujan sums and factorization.
//!
//! Everything works on `i64`/`u64` with `i128` intermediates. Overflow is
//! reported as an error instead of wrapping.

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ArithError {
    #[error("modulus must be odd and positive, got {0}")]
    NotOddPositive(i64),
    #[error("modulus must be positive, got {0}")]
    NotPositive(i64),
    #[error("{value} is not invertible modulo {modulus}")]
    NotInvertible { value: i64, modulus: i64 },
    #[error("{0} is not an odd prime")]
    NotOddPrime(i64),
    #[error("cannot factor zero")]
    FactorZero,
    #[error("congruences are incompatible")]
    IncompatibleCongruences,
    #[error("integer overflow")]
    Overflow,
}

/// A residue `value` modulo `modulus`, kept in `[0, modulus)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ResidueClass {
    value: i64,
    modulus: i64,
}

impl ResidueClass {
    pub fn new(value: i64, modulus: i64) -> Result<Self, ArithError> {
        if modulus <= 0 {
            return Err(ArithError::NotPositive(modulus));
        }
        Ok(Self {
            value: value.rem_euclid(modulus),
            modulus,
        })
    }

    pub fn value(&self) -> i64 {
        self.value
    }

    pub fn modulus(&self) -> i64 {
        self.modulus
    }
}

/// Prime factorization, primes ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Factorization {
    factors: Vec<(u64, u32)>,
}

impl Factorization {
    pub fn factors(&self) -> &[(u64, u32)] {
        &self.factors
    }

    pub fn value(&self) -> u64 {
        self.factors.iter().map(|&(p, a)| p.pow(a)).product()
    }

    /// Prime powers `p^α` with `p^α ‖ n`.
    pub fn prime_powers(&self) -> impl Iterator<Item = (u64, u32, u64)> + '_ {
        self.factors.iter().map(|&(p, a)| (p, a, p.pow(a)))
    }

    pub fn is_squarefree(&self) -> bool {
        self.factors.iter().all(|&(_, a)| a == 1)
    }
}

pub fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.unsigned_abs(), b.unsigned_abs());
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a as i64
}

pub fn gcd_u64(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

pub fn pow_mod(mut b: u64, mut e: u64, m: u64) -> u64 {
    if m == 1 {
        return 0;
    }
    let mut r = 1u64;
    b %= m;
    while e > 0 {
        if e & 1 == 1 {
            r = mul_mod(r, b, m);
        }
        b = mul_mod(b, b, m);
        e >>= 1;
    }
    r
}

/// Jacobi symbol `(a/n)` for odd `n ≥ 1`.
pub fn jacobi(a: i64, n: i64) -> Result<i8, ArithError> {
    if n <= 0 || n % 2 == 0 {
        return Err(ArithError::NotOddPositive(n));
    }
    let mut a = a.rem_euclid(n) as u64;
    let mut n = n as u64;
    let mut r = 1i8;
    while a != 0 {
        while a % 2 == 0 {
            a /= 2;
            if n % 8 == 3 || n % 8 == 5 {
                r = -r;
            }
        }
        std::mem::swap(&mut a, &mut n);
        if a % 4 == 3 && n % 4 == 3 {
            r = -r;
        }
        a %= n;
    }
    Ok(if n == 1 { r } else { 0 })
}

/// `ε_d`: 1 for `d ≡ 1 (mod 4)`, `i` for `d ≡ 3 (mod 4)`.
pub fn eps(d: i64) -> Result<Complex64, ArithError> {
    eps_pow(d, 1)
}

/// `ε_d^k` computed exactly as a power of `i`.
pub fn eps_pow(d: i64, k: i64) -> Result<Complex64, ArithError> {
    if d % 2 == 0 {
        return Err(ArithError::NotOddPositive(d));
    }
    if d.rem_euclid(4) == 1 {
        Ok(Complex64::new(1.0, 0.0))
    } else {
        Ok(i_pow(k))
    }
}

/// `i^k` for integer `k`, exact.
pub fn i_pow(k: i64) -> Complex64 {
    match k.rem_euclid(4) {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

/// `i^{ℓ+1/2} = e^{iπ(2ℓ+1)/4}`.
pub fn i_half_pow(ell: u32) -> Complex64 {
    Complex64::from_polar(1.0, std::f64::consts::FRAC_PI_4 * (2 * ell + 1) as f64)
}

pub fn mod_inverse(u: i64, d: i64) -> Result<ResidueClass, ArithError> {
    if d <= 0 {
        return Err(ArithError::NotPositive(d));
    }
    let (g, x, _) = ext_gcd(u.rem_euclid(d) as i128, d as i128);
    if g != 1 {
        return Err(ArithError::NotInvertible {
            value: u,
            modulus: d,
        });
    }
    ResidueClass::new((x.rem_euclid(d as i128)) as i64, d)
}

fn ext_gcd(a: i128, b: i128) -> (i128, i128, i128) {
    let (mut r0, mut r1) = (a, b);
    let (mut s0, mut s1) = (1i128, 0i128);
    let (mut t0, mut t1) = (0i128, 1i128);
    while r1 != 0 {
        let q = r0 / r1;
        (r0, r1) = (r1, r0 - q * r1);
        (s0, s1) = (s1, s0 - q * s1);
        (t0, t1) = (t1, t0 - q * t1);
    }
    (r0, s0, t0)
}

/// Inverse of `u` modulo `d`; `0` when `d = 1`. Caller guarantees coprimality.
pub(crate) fn inv_unchecked(u: u64, d: u64) -> u64 {
    if d == 1 {
        return 0;
    }
    let (_, x, _) = ext_gcd((u % d) as i128, d as i128);
    x.rem_euclid(d as i128) as u64
}

/// All `y` in `[0, p^α)` with `y² ≡ b (mod p^α)`, ascending.
pub fn mod_sqrt_all(b: i64, p: i64, alpha: u32) -> Result<Vec<ResidueClass>, ArithError> {
    if p < 3 || p % 2 == 0 || !is_prime(p as u64) {
        return Err(ArithError::NotOddPrime(p));
    }
    if alpha == 0 {
        return Ok(vec![ResidueClass::new(0, 1)?]);
    }
    let pu = p as u64;
    let pa = checked_pow(pu, alpha)?;
    let b = b.rem_euclid(pa as i64) as u64;
    let mut out = Vec::new();
    if b == 0 {
        let step = pu.pow(alpha.div_ceil(2));
        let mut y = 0;
        while y < pa {
            out.push(y);
            y += step;
        }
    } else {
        let mut v = 0u32;
        let mut b1 = b;
        while b1 % pu == 0 {
            b1 /= pu;
            v += 1;
        }
        if v % 2 == 0 {
            let w = v / 2;
            let k = alpha - v;
            let pk = pu.pow(k);
            let pw = pu.pow(w);
            let lift = pu.pow(alpha - w);
            for z in sqrt_prime_power(b1 % pk, pu, k) {
                for j in 0..pw {
                    out.push((pw * z + j * lift) % pa);
                }
            }
        }
    }
    out.sort_unstable();
    out.dedup();
    out.into_iter()
        .map(|y| ResidueClass::new(y as i64, pa as i64))
        .collect()
}

/// Roots of `z² ≡ b (mod p^k)` for `p ∤ b`.
fn sqrt_prime_power(b: u64, p: u64, k: u32) -> Vec<u64> {
    let Some(r) = tonelli_shanks(b % p, p) else {
        return Vec::new();
    };
    let mut r = r;
    let mut pk = p;
    for _ in 1..k {
        let next = pk * p;
        // r ← r − (r² − b)/(2r)
        let r2 = mul_mod(r, r, next);
        let diff = (r2 + next - b % next) % next;
        let inv2r = inv_unchecked(mul_mod(2, r, next), next);
        r = (r + next - mul_mod(diff, inv2r, next)) % next;
        pk = next;
    }
    let other = (pk - r) % pk;
    if other == r {
        vec![r]
    } else {
        vec![r, other]
    }
}

fn tonelli_shanks(n: u64, p: u64) -> Option<u64> {
    let n = n % p;
    if n == 0 {
        return Some(0);
    }
    if pow_mod(n, (p - 1) / 2, p) != 1 {
        return None;
    }
    let mut q = p - 1;
    let mut s = 0;
    while q % 2 == 0 {
        q /= 2;
        s += 1;
    }
    let mut z = 2;
    while pow_mod(z, (p - 1) / 2, p) != p - 1 {
        z += 1;
    }
    let mut m = s;
    let mut c = pow_mod(z, q, p);
    let mut t = pow_mod(n, q, p);
    let mut r = pow_mod(n, q.div_ceil(2), p);
    while t != 1 {
        let mut i = 0;
        let mut tt = t;
        while tt != 1 {
            tt = mul_mod(tt, tt, p);
            i += 1;
        }
        let b = pow_mod(c, 1 << (m - i - 1), p);
        m = i;
        c = mul_mod(b, b, p);
        t = mul_mod(t, c, p);
        r = mul_mod(r, b, p);
    }
    Some(r)
}

fn checked_pow(p: u64, a: u32) -> Result<u64, ArithError> {
    p.checked_pow(a)
        .filter(|&v| v <= i64::MAX as u64)
        .ok_or(ArithError::Overflow)
}

pub fn mobius(n: u64) -> i8 {
    if n == 0 {
        return 0;
    }
    let f = factorize(n).expect("nonzero");
    if f.is_squarefree() {
        if f.factors.len() % 2 == 0 {
            1
        } else {
            -1
        }
    } else {
        0
    }
}

pub fn euler_phi(n: u64) -> u64 {
    if n == 0 {
        return 0;
    }
    factorize(n)
        .expect("nonzero")
        .factors
        .iter()
        .map(|&(p, a)| (p - 1) * p.pow(a - 1))
        .product()
}

pub fn divisors(n: u64) -> Vec<u64> {
    if n == 0 {
        return Vec::new();
    }
    let mut out = vec![1u64];
    for &(p, a) in factorize(n).expect("nonzero").factors() {
        let len = out.len();
        let mut pk = 1;
        for _ in 0..a {
            pk *= p;
            for i in 0..len {
                out.push(out[i] * pk);
            }
        }
    }
    out.sort_unstable();
    out
}

pub fn tau(n: u64) -> u64 {
    if n == 0 {
        return 0;
    }
    factorize(n)
        .expect("nonzero")
        .factors
        .iter()
        .map(|&(_, a)| a as u64 + 1)
        .product()
}

/// `R_d(m) = Σ_{δ | (d,m)} μ(d/δ) δ`.
pub fn ramanujan_sum(d: u64, m: i64) -> i64 {
    let g = gcd_u64(d, m.unsigned_abs());
    let g = if g == 0 { d } else { g };
    divisors(g)
        .into_iter()
        .map(|delta| mobius(d / delta) as i64 * delta as i64)
        .sum()
}

/// `n = t r²` with `t` squarefree.
pub fn squarefree_split(n: u64) -> Result<(u64, u64), ArithError> {
    let f = factorize(n)?;
    let mut t = 1;
    let mut r = 1;
    for &(p, a) in f.factors() {
        if a % 2 == 1 {
            t *= p;
        }
        r *= p.pow(a / 2);
    }
    Ok((t, r))
}

pub fn is_squarefree(n: u64) -> bool {
    n != 0 && factorize(n).map(|f| f.is_squarefree()).unwrap_or(false)
}

/// Trial division to 10⁶, then Pollard rho on the cofactor.
pub fn factorize(n: u64) -> Result<Factorization, ArithError> {
    if n == 0 {
        return Err(ArithError::FactorZero);
    }
    let mut m = n;
    let mut factors: Vec<(u64, u32)> = Vec::new();
    let mut push = |p: u64, m: &mut u64| {
        let mut a = 0;
        while *m % p == 0 {
            *m /= p;
            a += 1;
        }
        if a > 0 {
            factors.push((p, a));
        }
    };
    push(2, &mut m);
    let mut p = 3u64;
    while p <= 1_000_000 && p * p <= m {
        if m % p == 0 {
            push(p, &mut m);
        }
        p += 2;
    }
    if m > 1 {
        let mut big = Vec::new();
        split_large(m, &mut big);
        big.sort_unstable();
        for q in big {
            match factors.last_mut() {
                Some((last, a)) if *last == q => *a += 1,
                _ => factors.push((q, 1)),
            }
        }
    }
    factors.sort_unstable();
    Ok(Factorization { factors })
}

fn split_large(n: u64, out: &mut Vec<u64>) {
    if n == 1 {
        return;
    }
    if is_prime(n) {
        out.push(n);
        return;
    }
    let d = pollard_rho(n);
    split_large(d, out);
    split_large(n / d, out);
}

fn pollard_rho(n: u64) -> u64 {
    if n % 2 == 0 {
        return 2;
    }
    let mut c = 1u64;
    loop {
        let f = |x: u64| (mul_mod(x, x, n) + c) % n;
        let (mut x, mut y, mut d) = (2u64, 2u64, 1u64);
        while d == 1 {
            x = f(x);
            y = f(f(y));
            d = gcd_u64(x.abs_diff(y), n);
        }
        if d != n {
            return d;
        }
        c += 1;
    }
}

/// Deterministic Miller–Rabin for 64-bit inputs.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n % p == 0 {
            return n == p;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d % 2 == 0 {
        d /= 2;
        s += 1;
    }
    'witness: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Combine congruences; moduli need not be coprime as long as they agree.
pub fn crt_combine(classes: &[ResidueClass]) -> Result<ResidueClass, ArithError> {
    let mut acc = ResidueClass::new(0, 1)?;
    for c in classes {
        let (a1, m1) = (acc.value as i128, acc.modulus as i128);
        let (a2, m2) = (c.value as i128, c.modulus as i128);
        let (g, p, _) = ext_gcd(m1, m2);
        if (a2 - a1) % g != 0 {
            return Err(ArithError::IncompatibleCongruences);
        }
        let l = m1 / g * m2;
        if l > i64::MAX as i128 {
            return Err(ArithError::Overflow);
        }
        let k = ((a2 - a1) / g % (m2 / g)) * p % (m2 / g);
        let x = (a1 + m1 * k).rem_euclid(l);
        acc = ResidueClass::new(x as i64, l as i64)?;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_jacobi(a: i64, n: i64) -> i8 {
        // product of Legendre symbols via Euler's criterion
        let f = factorize(n as u64).unwrap();
        let mut r = 1i8;
        for &(p, e) in f.factors() {
            let p = p as i64;
            let am = a.rem_euclid(p);
            let l = if am == 0 {
                0
            } else if (1..p).any(|y| y * y % p == am) {
                1
            } else {
                -1
            };
            for _ in 0..e {
                r *= l;
            }
        }
        r
    }

    #[test]
    fn jacobi_examples() {
        assert_eq!(jacobi(1, 9).unwrap(), 1);
        assert_eq!(jacobi(0, 5).unwrap(), 0);
        assert_eq!(jacobi(2, 15).unwrap(), brute_jacobi(2, 15));
        assert_eq!(jacobi(2, 15).unwrap(), 1);
        assert!(jacobi(3, 8).is_err());
        assert!(jacobi(3, -3).is_err());
        assert_eq!(jacobi(5, 1).unwrap(), 1);
    }

    #[test]
    fn jacobi_matches_legendre_products() {
        for n in (1..200).step_by(2) {
            for a in -20..60 {
                assert_eq!(jacobi(a, n).unwrap(), brute_jacobi(a, n), "({a}/{n})");
            }
        }
    }

    #[test]
    fn jacobi_multiplicative_exhaustive() {
        for n in (1..1000i64).step_by(2) {
            let row: Vec<i8> = (0..n).map(|a| jacobi(a, n).unwrap()).collect();
            for a in 0..n.min(40) {
                for b in 0..n {
                    let ab = (a * b) % n;
                    assert_eq!(row[ab as usize], row[a as usize] * row[b as usize]);
                }
            }
        }
    }

    #[test]
    fn eps_values() {
        assert_eq!(eps(1).unwrap(), Complex64::new(1.0, 0.0));
        assert_eq!(eps(3).unwrap(), Complex64::new(0.0, 1.0));
        assert_eq!(eps(5).unwrap(), Complex64::new(1.0, 0.0));
        assert!(eps(4).is_err());
        for d in (1..100).step_by(2) {
            let e2 = eps(d).unwrap() * eps(d).unwrap();
            assert_eq!(e2.re, jacobi(-1, d).unwrap() as f64);
        }
    }

    #[test]
    fn inverse_examples() {
        assert_eq!(mod_inverse(1, 7).unwrap().value(), 1);
        assert_eq!(mod_inverse(3, 7).unwrap().value(), 5);
        assert!(mod_inverse(2, 4).is_err());
        assert_eq!(mod_inverse(-3, 7).unwrap().value(), 2);
    }

    fn brute_sqrt(b: i64, m: i64) -> Vec<i64> {
        (0..m).filter(|y| (y * y - b).rem_euclid(m) == 0).collect()
    }

    #[test]
    fn sqrt_examples() {
        let v = |b, p, a| -> Vec<i64> {
            mod_sqrt_all(b, p, a)
                .unwrap()
                .iter()
                .map(|r| r.value())
                .collect()
        };
        assert_eq!(v(2, 7, 1), vec![3, 4]);
        assert_eq!(v(1, 3, 2), vec![1, 8]);
        assert!(v(3, 5, 1).is_empty());
        assert!(mod_sqrt_all(1, 9, 1).is_err());
        assert!(mod_sqrt_all(1, 2, 1).is_err());
    }

    #[test]
    fn sqrt_matches_brute_force() {
        for p in [3i64, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47] {
            for alpha in 1..=4u32 {
                let m = p.pow(alpha);
                if m > 200_000 {
                    continue;
                }
                let bs: Vec<i64> = if m <= 2500 {
                    (0..m).collect()
                } else {
                    (0..m).step_by((m / 997) as usize).collect()
                };
                for b in bs {
                    let got: Vec<i64> = mod_sqrt_all(b, p, alpha)
                        .unwrap()
                        .iter()
                        .map(|r| r.value())
                        .collect();
                    assert_eq!(got, brute_sqrt(b, m), "b={b} p={p} a={alpha}");
                }
            }
        }
    }

    #[test]
    fn ramanujan_examples() {
        assert_eq!(ramanujan_sum(1, 17), 1);
        assert_eq!(ramanujan_sum(5, 1), -1);
        assert_eq!(ramanujan_sum(5, 5), 4);
        assert_eq!(ramanujan_sum(6, 0), 2);
    }

    #[test]
    fn ramanujan_matches_direct_sum() {
        for d in 1..=300u64 {
            for m in 0..d as i64 {
                let direct: f64 = (0..d)
                    .filter(|&u| gcd_u64(u, d) == 1)
                    .map(|u| {
                        (2.0 * std::f64::consts::PI * ((m as u64 * u) % d) as f64 / d as f64).cos()
                    })
                    .sum();
                assert!(
                    (direct - ramanujan_sum(d, m) as f64).abs() < 1e-8,
                    "d={d} m={m}"
                );
            }
        }
    }

    #[test]
    fn factor_helpers() {
        assert_eq!(squarefree_split(12).unwrap(), (3, 2));
        assert_eq!(tau(12), 6);
        assert!(factorize(0).is_err());
        assert_eq!(factorize(1).unwrap().factors(), &[] as &[(u64, u32)]);
        let big = 999_983u64 * 1_000_003;
        assert_eq!(
            factorize(big).unwrap().factors(),
            &[(999_983, 1), (1_000_003, 1)]
        );
        let f = factorize(600_851_475_143).unwrap();
        assert_eq!(f.value(), 600_851_475_143);
        assert_eq!(divisors(12), vec![1, 2, 3, 4, 6, 12]);
        assert_eq!(euler_phi(36), 12);
        assert_eq!(mobius(30), -1);
        assert_eq!(mobius(12), 0);
    }

    #[test]
    fn squarefree_split_exhaustive() {
        for n in 1..=100_000u64 {
            let (t, r) = squarefree_split(n).unwrap();
            assert_eq!(t * r * r, n);
            assert_ne!(mobius(t), 0);
        }
    }

    #[test]
    fn crt_examples() {
        let r = crt_combine(&[
            ResidueClass::new(2, 3).unwrap(),
            ResidueClass::new(3, 5).unwrap(),
        ])
        .unwrap();
        assert_eq!((r.value(), r.modulus()), (8, 15));
        assert!(crt_combine(&[
            ResidueClass::new(1, 4).unwrap(),
            ResidueClass::new(0, 6).unwrap()
        ])
        .is_err());
        let r = crt_combine(&[]).unwrap();
        assert_eq!((r.value(), r.modulus()), (0, 1));
    }

    #[test]
    fn primality() {
        let small: Vec<u64> = (0..60).filter(|&n| is_prime(n)).collect();
        assert_eq!(
            small,
            vec![2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59]
        );
        assert!(is_prime(1_000_000_007));
        assert!(!is_prime(3_215_031_751));
    }
}
