//! Sweeps that evaluate both sides of the exponential-sum identities and
//! bounds directly and report the largest discrepancy with its witness.

use super::{
    c_b, k_and_definitional, k_and_ks_literal, k_and_table_literal, k_and_with, phi_a,
    phi_factored, salie_closed_form, table_for, ExpSumContext, ExpSumError, ModTable,
};
use crate::arith::{self, gcd_u64, inv_unchecked, is_prime, tau};
use crate::numeric::UnitTable;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

pub const IDENTITY_TOL: f64 = 1e-9;
pub const DEFAULT_SEED: u64 = 20_240_917;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VerifyCase {
    /// `K_{2ℓ+1}(m,n;qr) = K_{2ℓ+2−q}(mq̄,nq̄;r) S(mr̄,nr̄;q)`.
    A,
    /// Twisted multiplicativity of Salié sums.
    B,
    /// `S(m,0;p^α) = 0` for odd `α` and `p | m`.
    C,
    /// Case `c` without the `m` having `p^{α−1} ‖ m`, where it fails.
    CRestricted,
    /// `|S(m,n;c)| ≤ (m,n,c)^{1/2} c^{1/2} τ(c)`.
    D,
    /// The same bound for `K_{2ℓ+1}` at powers of two.
    E,
    /// `|K(a,n;d)| ≤ (d,n)^{1/2} d^{1/2} τ(d)`.
    Kbound,
    /// Closed form of `K(a,n;d)` for odd `d`.
    Kform,
    /// `K(a,n;d)` against its definitional sum, all parity classes.
    Ks,
    /// The literal Kloosterman–Salié expressions against the literal
    /// character table; fails for `2 ‖ d`.
    KsLiteral,
    /// The literal character table against the cusp-expansion weights;
    /// fails for `d ≢ 1 (mod 4)` apart from `d = 1`.
    TableLiteral,
    /// `S(hk,0;Q) = (h/Q) S(k,0;Q)`.
    Twist,
    /// CRT-factored `φ_a(n,Q)` against the direct value.
    Phi,
    /// Vanishing and non-vanishing of `c_b(m,p^α)`.
    CbVanishing,
}

impl VerifyCase {
    pub const ALL: [VerifyCase; 14] = [
        VerifyCase::A,
        VerifyCase::B,
        VerifyCase::C,
        VerifyCase::CRestricted,
        VerifyCase::D,
        VerifyCase::E,
        VerifyCase::Kbound,
        VerifyCase::Kform,
        VerifyCase::Ks,
        VerifyCase::KsLiteral,
        VerifyCase::TableLiteral,
        VerifyCase::Twist,
        VerifyCase::Phi,
        VerifyCase::CbVanishing,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            VerifyCase::A => "a",
            VerifyCase::B => "b",
            VerifyCase::C => "c",
            VerifyCase::CRestricted => "c-restricted",
            VerifyCase::D => "d",
            VerifyCase::E => "e",
            VerifyCase::Kbound => "kbound",
            VerifyCase::Kform => "kform",
            VerifyCase::Ks => "ks",
            VerifyCase::KsLiteral => "ks-literal",
            VerifyCase::TableLiteral => "table-literal",
            VerifyCase::Twist => "twist",
            VerifyCase::Phi => "phi",
            VerifyCase::CbVanishing => "cb-vanishing",
        }
    }

    /// Sweep used when the caller gives no bound.
    pub fn default_bounds(&self) -> SweepBounds {
        let (max_modulus, exhaustive_modulus, samples) = match self {
            VerifyCase::A => (500, 0, 40),
            VerifyCase::B => (99, 99, 0),
            VerifyCase::C | VerifyCase::CRestricted => (11, 0, 0),
            VerifyCase::D => (500, 99, 40),
            VerifyCase::E => (512, 256, 2000),
            VerifyCase::Kbound => (300, 30, 40),
            VerifyCase::Kform => (200, 200, 0),
            VerifyCase::Ks | VerifyCase::KsLiteral | VerifyCase::TableLiteral => (60, 60, 0),
            VerifyCase::Twist => (99, 99, 0),
            VerifyCase::Phi => (105, 105, 0),
            VerifyCase::CbVanishing => (7, 0, 0),
        };
        SweepBounds {
            max_modulus,
            exhaustive_modulus,
            samples,
            seed: DEFAULT_SEED,
            ell: 4,
        }
    }
}

impl fmt::Display for VerifyCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for VerifyCase {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        VerifyCase::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown case {s:?}"))
    }
}

/// Sweep limits. `max_modulus` is the largest modulus (the largest prime for
/// cases `c` and `cb_vanishing`); moduli up to `exhaustive_modulus` are checked on
/// every residue pair, larger ones on `samples` seeded random pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SweepBounds {
    pub max_modulus: u64,
    pub exhaustive_modulus: u64,
    pub samples: usize,
    pub seed: u64,
    pub ell: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    Identity,
    Bound,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub params: BTreeMap<String, i64>,
    pub lhs: [f64; 2],
    pub rhs: [f64; 2],
    pub err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub case: String,
    pub sweep: String,
    pub kind: CheckKind,
    pub checked: u64,
    pub violations: u64,
    pub tolerance: f64,
    pub max_abs_err: f64,
    /// For bounds, the largest `|value| / bound`.
    pub max_ratio: Option<f64>,
    pub worst_witness: Option<Witness>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

struct Tracker {
    kind: CheckKind,
    checked: u64,
    violations: u64,
    max_err: f64,
    max_ratio: f64,
    worst: Option<Witness>,
}

impl Tracker {
    fn new(kind: CheckKind) -> Self {
        Self {
            kind,
            checked: 0,
            violations: 0,
            max_err: 0.0,
            max_ratio: 0.0,
            worst: None,
        }
    }

    fn witness(params: &[(&str, i64)], lhs: Complex64, rhs: Complex64, err: f64) -> Witness {
        Witness {
            params: params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            lhs: [lhs.re, lhs.im],
            rhs: [rhs.re, rhs.im],
            err,
        }
    }

    fn identity(&mut self, params: &[(&str, i64)], lhs: Complex64, rhs: Complex64) {
        self.checked += 1;
        let err = (lhs - rhs).norm();
        let bad = !err.is_finite() || err > IDENTITY_TOL;
        if bad {
            self.violations += 1;
        }
        if err > self.max_err || (bad && self.worst.is_none()) || self.worst.is_none() {
            self.max_err = self.max_err.max(err);
            self.worst = Some(Self::witness(params, lhs, rhs, err));
        }
    }

    fn bound(&mut self, params: &[(&str, i64)], value: Complex64, bound: f64) {
        self.checked += 1;
        let abs = value.norm();
        let excess = (abs - bound).max(0.0);
        let ratio = if bound > 0.0 { abs / bound } else { f64::INFINITY };
        let bad = !abs.is_finite() || abs > bound + IDENTITY_TOL * bound.max(1.0);
        if bad {
            self.violations += 1;
        }
        let replace = match &self.worst {
            None => true,
            Some(_) => ratio > self.max_ratio,
        };
        self.max_ratio = self.max_ratio.max(ratio);
        self.max_err = self.max_err.max(excess);
        if replace {
            self.worst = Some(Self::witness(
                params,
                value,
                Complex64::new(bound, 0.0),
                excess,
            ));
        }
    }

    /// A boolean property; a failure counts with unit error.
    fn property(&mut self, params: &[(&str, i64)], ok: bool, observed: Complex64) {
        self.checked += 1;
        if !ok {
            self.violations += 1;
            if self.max_err < 1.0 {
                self.worst = Some(Self::witness(params, observed, Complex64::new(0.0, 0.0), 1.0));
            }
            self.max_err = self.max_err.max(1.0);
        }
    }

    fn finish(self, case: VerifyCase, sweep: String) -> VerifyReport {
        VerifyReport {
            case: case.name().to_string(),
            sweep,
            kind: self.kind,
            checked: self.checked,
            violations: self.violations,
            tolerance: IDENTITY_TOL,
            max_abs_err: self.max_err,
            max_ratio: (self.kind == CheckKind::Bound).then_some(self.max_ratio),
            worst_witness: self.worst,
        }
    }
}

/// Residue pairs for modulus `c`: all of them up to the exhaustive limit,
/// otherwise seeded samples, half of which share a divisor with `c`.
fn pairs(c: u64, b: &SweepBounds, rng: &mut ChaCha8Rng) -> Vec<(i64, i64)> {
    let c = c as i64;
    if (c as u64) <= b.exhaustive_modulus {
        return (0..c).flat_map(|m| (0..c).map(move |n| (m, n))).collect();
    }
    let divs = arith::divisors(c as u64);
    (0..b.samples)
        .map(|i| {
            if i % 2 == 0 {
                (rng.gen_range(0..c), rng.gen_range(0..c))
            } else {
                let g = divs[rng.gen_range(0..divs.len())] as i64;
                let k = c / g;
                (g * rng.gen_range(0..k) % c, g * rng.gen_range(0..k) % c)
            }
        })
        .collect()
}

fn sqrtf(x: u64) -> f64 {
    (x as f64).sqrt()
}

pub fn verify(case: VerifyCase, bounds: &SweepBounds) -> Result<VerifyReport, ExpSumError> {
    let mut rng = ChaCha8Rng::seed_from_u64(bounds.seed);
    let b = bounds;
    let ell = b.ell as i64;
    match case {
        VerifyCase::A => {
            let mut t = Tracker::new(CheckKind::Identity);
            for c in (4..=b.max_modulus).step_by(4) {
                let tc = ModTable::new(c)?;
                for r in arith::divisors(c) {
                    let q = c / r;
                    if r % 4 != 0 || gcd_u64(q, r) != 1 {
                        continue;
                    }
                    let tr = ModTable::new(r)?;
                    let tq = ModTable::new(q)?;
                    let qbar = inv_unchecked(q, r) as i64;
                    let rbar = inv_unchecked(r % q, q) as i64;
                    for (m, n) in pairs(c, b, &mut rng) {
                        let lhs = tc.twisted(m, n, 2 * ell + 1)?;
                        let k1 = tr.twisted(m * qbar, n * qbar, 2 * ell + 2 - q as i64)?;
                        let s = tq.salie(m * rbar, n * rbar)?;
                        let p = [("c", c as i64), ("q", q as i64), ("r", r as i64), ("m", m), ("n", n)];
                        t.identity(&p, lhs, k1 * s);
                    }
                }
            }
            Ok(t.finish(
                case,
                format!(
                    "c=qr<={} with 4|r, (q,r)=1; {} sampled (m,n) per split; seed={}",
                    b.max_modulus, b.samples, b.seed
                ),
            ))
        }
        VerifyCase::B => {
            let mut t = Tracker::new(CheckKind::Identity);
            for q in (3..=b.max_modulus).step_by(2) {
                let tq = ModTable::new(q)?;
                for u in arith::divisors(q) {
                    let v = q / u;
                    if u == 1 || u >= v || gcd_u64(u, v) != 1 {
                        continue;
                    }
                    let tu = ModTable::new(u)?;
                    let tv = ModTable::new(v)?;
                    let ubar = inv_unchecked(u, v) as i64;
                    let vbar = inv_unchecked(v, u) as i64;
                    for (m, n) in pairs(q, b, &mut rng) {
                        let lhs = tq.salie(m, n)?;
                        let rhs = tv.salie(m * ubar, n * ubar)? * tu.salie(m * vbar, n * vbar)?;
                        t.identity(&[("q", q as i64), ("u", u as i64), ("v", v as i64), ("m", m), ("n", n)], lhs, rhs);
                    }
                }
            }
            Ok(t.finish(
                case,
                format!("odd q<={} split as uv with (u,v)=1; pairs exhaustive to {}", b.max_modulus, b.exhaustive_modulus),
            ))
        }
        VerifyCase::C | VerifyCase::CRestricted => {
            let mut t = Tracker::new(CheckKind::Identity);
            for p in (3..=b.max_modulus).filter(|&p| is_prime(p)) {
                for alpha in [1u32, 3] {
                    let c = p.pow(alpha);
                    let tc = ModTable::new(c)?;
                    let edge = p.pow(alpha - 1) as i64;
                    for m in (0..c as i64).step_by(p as usize) {
                        if case == VerifyCase::CRestricted && alpha > 1 && m % edge == 0 && m % (edge * p as i64) != 0 {
                            continue;
                        }
                        let lhs = tc.salie(m, 0)?;
                        t.identity(&[("p", p as i64), ("alpha", alpha as i64), ("m", m)], lhs, Complex64::new(0.0, 0.0));
                    }
                }
            }
            let which = if case == VerifyCase::C { "all p|m" } else { "p|m except p^(alpha-1)||m" };
            Ok(t.finish(case, format!("odd primes p<={}, alpha in {{1,3}}, {which} mod p^alpha", b.max_modulus)))
        }
        VerifyCase::D => {
            let mut t = Tracker::new(CheckKind::Bound);
            for c in (1..=b.max_modulus).step_by(2) {
                let tc = ModTable::new(c)?;
                let base = sqrtf(c) * tau(c) as f64;
                for (m, n) in pairs(c, b, &mut rng) {
                    let g = gcd_u64(gcd_u64(m as u64, n as u64), c);
                    t.bound(&[("c", c as i64), ("m", m), ("n", n)], tc.salie(m, n)?, base * sqrtf(g));
                }
            }
            Ok(t.finish(
                case,
                format!(
                    "odd c<={}; pairs exhaustive to {}, else {} samples; seed={}",
                    b.max_modulus, b.exhaustive_modulus, b.samples, b.seed
                ),
            ))
        }
        VerifyCase::E => {
            let mut t = Tracker::new(CheckKind::Bound);
            let mut r = 4u64;
            while r <= b.max_modulus {
                let tr = ModTable::new(r)?;
                let base = sqrtf(r) * tau(r) as f64;
                for (m, n) in pairs(r, b, &mut rng) {
                    let g = gcd_u64(gcd_u64(m as u64, n as u64), r);
                    t.bound(&[("r", r as i64), ("m", m), ("n", n)], tr.twisted(m, n, 2 * ell + 1)?, base * sqrtf(g));
                }
                r *= 2;
            }
            Ok(t.finish(
                case,
                format!(
                    "r=2^k in [4,{}]; pairs exhaustive to {}, else {} samples; seed={}",
                    b.max_modulus, b.exhaustive_modulus, b.samples, b.seed
                ),
            ))
        }
        VerifyCase::Kbound => {
            let mut t = Tracker::new(CheckKind::Bound);
            for d in 1..=b.max_modulus {
                let ctx = ExpSumContext::new(d, b.ell)?;
                let table = table_for(&ctx)?;
                let base = sqrtf(d) * tau(d) as f64;
                for (a, n) in pairs(d, b, &mut rng) {
                    let g = gcd_u64(d, n as u64);
                    let v = k_and_with(&table, a, n, &ctx)?;
                    t.bound(&[("d", d as i64), ("a", a), ("n", n)], v, base * sqrtf(g));
                }
            }
            Ok(t.finish(
                case,
                format!(
                    "d<={}; pairs exhaustive to {}, else {} samples; seed={}",
                    b.max_modulus, b.exhaustive_modulus, b.samples, b.seed
                ),
            ))
        }
        VerifyCase::Kform => {
            let mut t = Tracker::new(CheckKind::Identity);
            for d in (1..=b.max_modulus).step_by(2) {
                let ctx = ExpSumContext::new(d, b.ell)?;
                let table = table_for(&ctx)?;
                for (a, n) in pairs(d, b, &mut rng) {
                    if gcd_u64(a as u64, d) != 1 && gcd_u64(n as u64, d) != 1 {
                        continue;
                    }
                    let lhs = k_and_with(&table, a, n, &ctx)?;
                    let rhs = salie_closed_form(a, n, d, b.ell)?;
                    t.identity(&[("d", d as i64), ("a", a), ("n", n)], lhs, rhs);
                }
            }
            Ok(t.finish(
                case,
                format!("odd d<={}, (a,n) with a coprime witness, ell={}", b.max_modulus, b.ell),
            ))
        }
        VerifyCase::Ks | VerifyCase::KsLiteral | VerifyCase::TableLiteral => {
            let mut t = Tracker::new(CheckKind::Identity);
            for d in 1..=b.max_modulus {
                let ctx = ExpSumContext::new(d, b.ell)?;
                let table = table_for(&ctx)?;
                for (a, n) in pairs(d, b, &mut rng) {
                    let (lhs, rhs) = match case {
                        VerifyCase::Ks => (k_and_definitional(a, n, &ctx)?, k_and_with(&table, a, n, &ctx)?),
                        VerifyCase::KsLiteral => (
                            k_and_table_literal(a, n, &ctx)?,
                            k_and_ks_literal(a, n, &ctx)?,
                        ),
                        _ => (k_and_table_literal(a, n, &ctx)?, k_and_with(&table, a, n, &ctx)?),
                    };
                    t.identity(&[("d", d as i64), ("a", a), ("n", n)], lhs, rhs);
                }
            }
            Ok(t.finish(case, format!("d<={}, all (a,n) mod d, ell={}", b.max_modulus, b.ell)))
        }
        VerifyCase::Twist => {
            let mut t = Tracker::new(CheckKind::Identity);
            for q in (1..=b.max_modulus).step_by(2) {
                let tq = ModTable::new(q)?;
                let base: Vec<Complex64> = (0..q as i64).map(|k| tq.salie(k, 0)).collect::<Result<_, _>>()?;
                for h in (0..q as i64).filter(|&h| gcd_u64(h as u64, q) == 1) {
                    let chi = arith::jacobi(h, q as i64)? as f64;
                    for k in 0..q as i64 {
                        let lhs = tq.salie(h * k, 0)?;
                        t.identity(&[("q", q as i64), ("h", h), ("k", k)], lhs, base[k as usize] * chi);
                    }
                }
            }
            Ok(t.finish(case, format!("odd Q<={}, all units h and all k mod Q", b.max_modulus)))
        }
        VerifyCase::Phi => {
            let mut t = Tracker::new(CheckKind::Identity);
            for q in (1..=b.max_modulus).step_by(2) {
                let ctx = ExpSumContext::new(q, b.ell)?;
                for (a, n) in pairs(q, b, &mut rng) {
                    let lhs = phi_a(a, n, &ctx)?;
                    let rhs = phi_factored(a, n, q, b.ell)?;
                    t.identity(&[("q", q as i64), ("a", a), ("n", n)], lhs, rhs);
                }
            }
            Ok(t.finish(case, format!("odd Q<={}, all a,n<Q, ell={}", b.max_modulus, b.ell)))
        }
        VerifyCase::CbVanishing => cb_vanishing(b.max_modulus).map(|t| {
            t.finish(
                case,
                format!("odd primes p<={}, alpha in {{2,3,4}}, all b,m<p^alpha", b.max_modulus),
            )
        }),
    }
}

/// `c_b(m,p^α)` from the CRT path against a one-pass brute-force table, then
/// (i) `p | m ⇒ c_b(m,p^α) = 0` and (ii) `c_b(m,p^α) ≠ 0, p ∤ m ⇒ c_b(1,p^α) ≠ 0`.
fn cb_vanishing(max_prime: u64) -> Result<Tracker, ExpSumError> {
    let mut t = Tracker::new(CheckKind::Identity);
    let zero = |z: Complex64| z.norm() < IDENTITY_TOL;
    for p in (3..=max_prime).filter(|&p| is_prime(p)) {
        for alpha in 2..=4u32 {
            let d = p.pow(alpha);
            let unit = UnitTable::new(d);
            let mut brute = vec![Complex64::new(0.0, 0.0); d as usize];
            for y in 0..d {
                brute[(y * y % d) as usize] += unit.at_u(y);
            }
            for bb in 0..d as i64 {
                let at_one = brute[bb as usize];
                for m in 0..d as i64 {
                    let v = c_b(bb, m, d)?;
                    let target = (bb * (m * m % d as i64)) % d as i64;
                    let params = [("p", p as i64), ("alpha", alpha as i64), ("b", bb), ("m", m)];
                    t.identity(&params, v, brute[target as usize]);
                    if m as u64 % p == 0 {
                        t.property(&params, zero(v), v);
                    } else if !zero(v) {
                        t.property(&params, !zero(at_one), at_one);
                    }
                }
            }
        }
    }
    Ok(t)
}
