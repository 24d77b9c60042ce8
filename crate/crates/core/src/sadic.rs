//! Exact arithmetic in `Q` and `Z[1/S]`: p-adic valuations, p-adic fractional
//! parts and the character phases used by the duality calculus on solenoids.
//!
//! Everything here is exact. Phases are elements of `Q/Z` stored as reduced
//! rationals in `[0, 1)`; complex exponentials are never formed in this module.

use std::fmt;
use std::ops::Add;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Exact rational with arbitrary-precision numerator and positive denominator.
pub type Rational = BigRational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SadicError {
    #[error("{0} is not a prime")]
    NotPrime(u64),
    #[error("prime {0} listed twice")]
    DuplicatePrime(u64),
    #[error("malformed rational {0:?}")]
    MalformedRational(String),
    #[error("zero denominator in {0:?}")]
    ZeroDenominator(String),
    #[error("{value} is not an S-integer for S = {primes}")]
    NotSInteger { value: String, primes: String },
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2u64;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

/// The finite part of a set of places `S`; the archimedean place is implicit.
///
/// An empty prime set is legal and gives `Z[1/S] = Z`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<u64>", into = "Vec<u64>")]
pub struct PrimeSet {
    primes: Vec<u64>,
}

impl PrimeSet {
    pub fn new(primes: impl IntoIterator<Item = u64>) -> Result<Self, SadicError> {
        let mut primes: Vec<u64> = primes.into_iter().collect();
        for &p in &primes {
            if !is_prime(p) {
                return Err(SadicError::NotPrime(p));
            }
        }
        primes.sort_unstable();
        for w in primes.windows(2) {
            if w[0] == w[1] {
                return Err(SadicError::DuplicatePrime(w[0]));
            }
        }
        Ok(PrimeSet { primes })
    }

    pub fn empty() -> Self {
        PrimeSet { primes: Vec::new() }
    }

    pub fn primes(&self) -> &[u64] {
        &self.primes
    }

    pub fn contains(&self, p: u64) -> bool {
        self.primes.binary_search(&p).is_ok()
    }

    /// True iff `n` is `±` a product of powers of primes in the set.
    pub fn is_unit_integer(&self, n: &BigInt) -> bool {
        if n.is_zero() {
            return false;
        }
        let mut m = n.abs();
        for &p in &self.primes {
            let p = BigInt::from(p);
            while (&m % &p).is_zero() {
                m /= &p;
            }
        }
        m.is_one()
    }
}

impl TryFrom<Vec<u64>> for PrimeSet {
    type Error = SadicError;
    fn try_from(v: Vec<u64>) -> Result<Self, Self::Error> {
        PrimeSet::new(v)
    }
}

impl From<PrimeSet> for Vec<u64> {
    fn from(s: PrimeSet) -> Self {
        s.primes
    }
}

impl fmt::Display for PrimeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, p) in self.primes.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{p}")?;
        }
        write!(f, "}}")
    }
}

/// A place of `Q`: either the archimedean place or a finite prime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Place {
    Infinite,
    Prime(u64),
}

/// p-adic valuation, with `+∞` as a distinguished value for zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Valuation {
    Finite(i64),
    Infinity,
}

impl Valuation {
    pub fn is_nonnegative(self) -> bool {
        match self {
            Valuation::Finite(v) => v >= 0,
            Valuation::Infinity => true,
        }
    }
}

impl PartialOrd for Valuation {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Valuation {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        use std::cmp::Ordering::*;
        match (self, other) {
            (Valuation::Infinity, Valuation::Infinity) => Equal,
            (Valuation::Infinity, _) => Greater,
            (_, Valuation::Infinity) => Less,
            (Valuation::Finite(a), Valuation::Finite(b)) => a.cmp(b),
        }
    }
}

/// Element of `Q/Z`, stored as its representative in `[0, 1)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Phase(Rational);

impl Phase {
    pub fn zero() -> Self {
        Phase(Rational::zero())
    }

    /// Reduces any rational modulo 1.
    pub fn from_rational(x: &Rational) -> Self {
        Phase(x - x.floor())
    }

    pub fn value(&self) -> &Rational {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }
}

impl Add for &Phase {
    type Output = Phase;
    fn add(self, rhs: &Phase) -> Phase {
        Phase::from_rational(&(&self.0 + &rhs.0))
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_rational(&self.0))
    }
}

/// Largest `k` with `p^k | n`, and the cofactor. `n` must be nonzero.
fn split_prime_power(n: &BigInt, p: u64) -> (u64, BigInt) {
    let p = BigInt::from(p);
    let mut m = n.clone();
    let mut k = 0;
    loop {
        let (q, r) = m.div_rem(&p);
        if !r.is_zero() {
            return (k, m);
        }
        m = q;
        k += 1;
    }
}

pub fn padic_valuation(q: &Rational, p: u64) -> Valuation {
    if q.is_zero() {
        return Valuation::Infinity;
    }
    let (a, _) = split_prime_power(q.numer(), p);
    let (b, _) = split_prime_power(q.denom(), p);
    Valuation::Finite(a as i64 - b as i64)
}

/// The p-adic fractional part `{q}_p`: the unique `r = c/p^k` with
/// `0 ≤ r < 1` such that `q - r` is p-integral.
pub fn fractional_part_p(q: &Rational, p: u64) -> Phase {
    if q.is_zero() {
        return Phase::zero();
    }
    let (k, cofactor) = split_prime_power(q.denom(), p);
    if k == 0 {
        return Phase::zero();
    }
    let modulus = BigInt::from(p).pow(k as u32);
    // q = a / (p^k b'); r = a * b'^{-1} mod p^k, over p^k
    let inv = mod_inverse(&cofactor, &modulus).expect("cofactor is prime to p");
    let c = (q.numer() * inv).mod_floor(&modulus);
    Phase(Rational::new(c, modulus))
}

pub fn character_phase(x: &Rational, place: Place) -> Phase {
    match place {
        Place::Infinite => Phase::from_rational(x),
        Place::Prime(p) => fractional_part_p(x, p),
    }
}

pub fn is_s_integer(q: &Rational, primes: &PrimeSet) -> bool {
    primes.is_unit_integer(q.denom())
}

/// Inverse of `a` modulo `m`, if it exists.
pub fn mod_inverse(a: &BigInt, m: &BigInt) -> Option<BigInt> {
    let e = a.mod_floor(m).extended_gcd(m);
    if e.gcd.is_one() {
        Some(e.x.mod_floor(m))
    } else {
        None
    }
}

/// A rational number known to lie in `Z[1/S]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SRational {
    value: Rational,
    primes: PrimeSet,
}

impl SRational {
    pub fn new(value: Rational, primes: PrimeSet) -> Result<Self, SadicError> {
        if !is_s_integer(&value, &primes) {
            return Err(SadicError::NotSInteger { value: format_rational(&value), primes: primes.to_string() });
        }
        Ok(SRational { value, primes })
    }

    pub fn value(&self) -> &Rational {
        &self.value
    }

    pub fn prime_set(&self) -> &PrimeSet {
        &self.primes
    }
}

/// `q - Σ_{p∈S} {q}_p`. For `q ∈ Z[1/S]` this is always an integer: the
/// diagonal copy of `Z[1/S]` is exactly the annihilator of itself under the
/// product character over all places of `S`.
pub fn diagonal_annihilator_defect(q: &SRational) -> Rational {
    let mut acc = q.value.clone();
    for &p in q.primes.primes() {
        acc -= fractional_part_p(&q.value, p).0;
    }
    acc
}

/// Formats as `"num/den"`, or `"num"` when the denominator is 1.
pub fn format_rational(q: &Rational) -> String {
    if q.denom().is_one() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

pub fn parse_rational(s: &str) -> Result<Rational, SadicError> {
    let t = s.trim();
    let (num, den) = match t.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (t, "1"),
    };
    let malformed = || SadicError::MalformedRational(s.to_string());
    let n: BigInt = num.parse().map_err(|_| malformed())?;
    let d: BigInt = den.parse().map_err(|_| malformed())?;
    if d.is_zero() {
        return Err(SadicError::ZeroDenominator(s.to_string()));
    }
    Ok(Rational::new(n, d))
}

/// Nearest `f64`, for diagnostics only.
pub fn rational_to_f64(q: &Rational) -> f64 {
    q.to_f64().unwrap_or(f64::NAN)
}

pub fn rat(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}
