//! Finitely generated subgroups of `GL_d(Z[1/S])`: membership tests, word
//! evaluation, ball enumeration, and certified finiteness checks.

use std::collections::HashMap;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::MatQ;
use crate::poly::{char_poly, cyclotomic, totient, PolyQ};
use crate::sadic::{format_rational, is_s_integer, parse_rational, PrimeSet, Rational, SadicError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GroupError {
    #[error("generator {index} is not a {dim}x{dim} matrix")]
    BadShape { index: usize, dim: usize },
    #[error("generator {index} is not in GL_{dim}(Z[1/S]) for S = {primes}")]
    NotInGl { index: usize, dim: usize, primes: String },
    #[error("generators {0} and {1} coincide")]
    DuplicateGenerator(usize, usize),
    #[error("expected {expected} weights, got {got}")]
    WeightCount { expected: usize, got: usize },
    #[error("weight {0} is negative")]
    NegativeWeight(usize),
    #[error("weights sum to {0}, not 1")]
    WeightSum(String),
    #[error("not even-dimensional")]
    OddDimension,
    #[error("letter {0} does not name a generator")]
    BadLetter(i32),
    #[error("at least one generator is required")]
    NoGenerators,
    #[error(transparent)]
    Sadic(#[from] SadicError),
}

/// A word in the generators: letter `+i` is generator `i` (1-based), `-i` its inverse.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Word(pub Vec<i32>);

impl Word {
    pub fn empty() -> Self {
        Word(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn inverse(&self) -> Word {
        Word(self.0.iter().rev().map(|l| -l).collect())
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Word(v).reduced()
    }

    /// Free reduction: cancels adjacent `x x⁻¹` pairs.
    pub fn reduced(&self) -> Word {
        let mut out: Vec<i32> = Vec::with_capacity(self.0.len());
        for &l in &self.0 {
            if out.last() == Some(&-l) {
                out.pop();
            } else {
                out.push(l);
            }
        }
        Word(out)
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "e");
        }
        let parts: Vec<String> = self.0.iter().map(|&l| if l > 0 { format!("g{l}") } else { format!("g{}^-1", -l) }).collect();
        write!(f, "{}", parts.join("·"))
    }
}

/// The random-walk datum: a prime set, generator matrices, and a probability
/// vector on the listed generators.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupSpec {
    primes: PrimeSet,
    dim: usize,
    generators: Vec<MatQ>,
    inverses: Vec<MatQ>,
    weights: Vec<Rational>,
}

impl GroupSpec {
    pub fn new(primes: PrimeSet, dim: usize, generators: Vec<MatQ>, weights: Vec<Rational>) -> Result<Self, GroupError> {
        if generators.is_empty() {
            return Err(GroupError::NoGenerators);
        }
        let mut inverses = Vec::with_capacity(generators.len());
        for (index, g) in generators.iter().enumerate() {
            if g.rows() != dim || g.cols() != dim {
                return Err(GroupError::BadShape { index, dim });
            }
            if !in_gld_zs(g, &primes) {
                return Err(GroupError::NotInGl { index, dim, primes: primes.to_string() });
            }
            inverses.push(g.inverse().expect("unit determinant"));
        }
        for i in 0..generators.len() {
            for j in i + 1..generators.len() {
                if generators[i] == generators[j] {
                    return Err(GroupError::DuplicateGenerator(i, j));
                }
            }
        }
        if weights.len() != generators.len() {
            return Err(GroupError::WeightCount { expected: generators.len(), got: weights.len() });
        }
        if let Some(i) = weights.iter().position(|w| w.is_negative()) {
            return Err(GroupError::NegativeWeight(i));
        }
        let total: Rational = weights.iter().cloned().sum();
        if !total.is_one() {
            return Err(GroupError::WeightSum(format_rational(&total)));
        }
        Ok(GroupSpec { primes, dim, generators, inverses, weights })
    }

    /// Group with uniform weights.
    pub fn uniform(primes: PrimeSet, dim: usize, generators: Vec<MatQ>) -> Result<Self, GroupError> {
        let n = generators.len().max(1);
        let w = Rational::new(BigInt::one(), BigInt::from(n));
        GroupSpec::new(primes, dim, generators, vec![w; n])
    }

    pub fn prime_set(&self) -> &PrimeSet {
        &self.primes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn generators(&self) -> &[MatQ] {
        &self.generators
    }

    pub fn weights(&self) -> &[Rational] {
        &self.weights
    }

    pub fn num_generators(&self) -> usize {
        self.generators.len()
    }

    /// Matrix of a signed 1-based letter.
    pub fn letter(&self, l: i32) -> Result<&MatQ, GroupError> {
        let i = l.unsigned_abs() as usize;
        if l == 0 || i > self.generators.len() {
            return Err(GroupError::BadLetter(l));
        }
        Ok(if l > 0 { &self.generators[i - 1] } else { &self.inverses[i - 1] })
    }

    /// Letters in the fixed alphabet order `+1, -1, +2, -2, …`.
    pub fn alphabet(&self) -> Vec<i32> {
        (1..=self.generators.len() as i32).flat_map(|i| [i, -i]).collect()
    }

    /// The same group and weights with every generator transposed.
    pub fn transposed(&self) -> GroupSpec {
        GroupSpec {
            primes: self.primes.clone(),
            dim: self.dim,
            generators: self.generators.iter().map(MatQ::transpose).collect(),
            inverses: self.inverses.iter().map(MatQ::transpose).collect(),
            weights: self.weights.clone(),
        }
    }

    /// Symmetrized measure `(ν + ν̌)/2` as letters with weights, merging
    /// letters whose matrices coincide (e.g. involutions).
    pub fn symmetric_measure(&self) -> Vec<(i32, Rational)> {
        let half = Rational::new(BigInt::one(), BigInt::from(2));
        let mut out: Vec<(i32, Rational)> = Vec::new();
        for (i, w) in self.weights.iter().enumerate() {
            if w.is_zero() {
                continue;
            }
            for l in [i as i32 + 1, -(i as i32 + 1)] {
                let m = self.letter(l).unwrap();
                match out.iter_mut().find(|(k, _)| self.letter(*k).unwrap() == m) {
                    Some((_, acc)) => *acc += w * &half,
                    None => out.push((l, w * &half)),
                }
            }
        }
        out
    }

    /// The measure exactly as given, on positive letters.
    pub fn given_measure(&self) -> Vec<(i32, Rational)> {
        self.weights.iter().enumerate().filter(|(_, w)| !w.is_zero()).map(|(i, w)| (i as i32 + 1, w.clone())).collect()
    }

    /// True when `ν(g) = ν(g⁻¹)` for the measure as given.
    pub fn is_symmetric(&self) -> bool {
        let given = self.given_measure();
        given.iter().all(|(l, w)| {
            let inv = self.letter(-l).unwrap();
            let mass: Rational = given.iter().filter(|(k, _)| self.letter(*k).unwrap() == inv).map(|(_, v)| v.clone()).sum();
            &mass == w
        })
    }

    pub fn to_doc(&self) -> GroupSpecDoc {
        GroupSpecDoc {
            primes: self.primes.primes().to_vec(),
            d: self.dim,
            generators: self.generators.iter().map(matrix_to_strings).collect(),
            nu: self.weights.iter().map(format_rational).collect(),
        }
    }
}

/// JSON form of a [`GroupSpec`]; rationals are strings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupSpecDoc {
    #[serde(rename = "S")]
    pub primes: Vec<u64>,
    pub d: usize,
    pub generators: Vec<Vec<Vec<String>>>,
    pub nu: Vec<String>,
}

impl GroupSpecDoc {
    pub fn to_spec(&self) -> Result<GroupSpec, GroupError> {
        let primes = PrimeSet::new(self.primes.iter().copied())?;
        let generators = self.generators.iter().map(|g| matrix_from_strings(g)).collect::<Result<Vec<_>, _>>()?;
        let weights = self.nu.iter().map(|w| parse_rational(w)).collect::<Result<Vec<_>, _>>()?;
        GroupSpec::new(primes, self.d, generators, weights)
    }
}

pub fn matrix_to_strings(m: &MatQ) -> Vec<Vec<String>> {
    (0..m.rows()).map(|i| m.row(i).iter().map(format_rational).collect()).collect()
}

pub fn matrix_from_strings(rows: &[Vec<String>]) -> Result<MatQ, SadicError> {
    let parsed = rows.iter().map(|r| r.iter().map(|s| parse_rational(s)).collect::<Result<Vec<_>, _>>()).collect::<Result<Vec<_>, _>>()?;
    let c = parsed.first().map_or(0, Vec::len);
    if parsed.iter().any(|r| r.len() != c) {
        return Err(SadicError::MalformedRational("ragged matrix".into()));
    }
    Ok(MatQ::from_rows(parsed))
}

pub fn in_gld_zs(m: &MatQ, primes: &PrimeSet) -> bool {
    if !m.is_square() || !m.entries().iter().all(|x| is_s_integer(x, primes)) {
        return false;
    }
    let det = m.det();
    !det.is_zero() && primes.is_unit_integer(det.numer()) && primes.is_unit_integer(det.denom())
}

/// The standard symplectic form `[[0, I], [-I, 0]]` of size `2n`.
pub fn symplectic_form(n: usize) -> MatQ {
    let mut j = MatQ::zeros(2 * n, 2 * n);
    for i in 0..n {
        j[(i, n + i)] = Rational::one();
        j[(n + i, i)] = -Rational::one();
    }
    j
}

pub fn is_symplectic(m: &MatQ) -> Result<bool, GroupError> {
    if !m.is_square() || m.rows() % 2 != 0 {
        return Err(GroupError::OddDimension);
    }
    let j = symplectic_form(m.rows() / 2);
    Ok(&(&m.transpose() * &j) * m == j)
}

pub fn word_eval(spec: &GroupSpec, word: &Word) -> Result<MatQ, GroupError> {
    let mut acc = MatQ::identity(spec.dim);
    for &l in &word.0 {
        acc = &acc * spec.letter(l)?;
    }
    Ok(acc)
}

/// Distinct group elements of word length at most `radius`, each with its
/// shortlex-least word.
#[derive(Debug, Clone)]
pub struct GroupBall {
    pub elements: Vec<MatQ>,
    pub words: Vec<Word>,
    pub radius: usize,
    pub truncated: bool,
    index: HashMap<MatQ, usize>,
}

impl GroupBall {
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn position(&self, m: &MatQ) -> Option<usize> {
        self.index.get(m).copied()
    }

    pub fn contains(&self, m: &MatQ) -> bool {
        self.index.contains_key(m)
    }
}

/// Breadth-first enumeration over generators and inverses. Elements are
/// discovered in shortlex order of their words, so the output is deterministic.
pub fn bfs_ball(spec: &GroupSpec, radius: usize, cap: usize) -> GroupBall {
    let id = MatQ::identity(spec.dim);
    let mut index = HashMap::new();
    index.insert(id.clone(), 0);
    let mut elements = vec![id];
    let mut words = vec![Word::empty()];
    let mut frontier = vec![0usize];
    let mut truncated = false;
    let alphabet = spec.alphabet();
    'outer: for _ in 0..radius {
        let mut next = Vec::new();
        for &v in &frontier {
            for &l in &alphabet {
                let m = &elements[v] * spec.letter(l).unwrap();
                if index.contains_key(&m) {
                    continue;
                }
                if elements.len() >= cap {
                    truncated = true;
                    break 'outer;
                }
                let mut w = words[v].clone();
                w.0.push(l);
                index.insert(m.clone(), elements.len());
                next.push(elements.len());
                elements.push(m);
                words.push(w);
            }
        }
        if next.is_empty() {
            break;
        }
        frontier = next;
    }
    GroupBall { elements, words, radius, truncated, index }
}

/// Why an element has infinite order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InfiniteOrderWitness {
    /// Trace is not an integer of absolute value at most `d`.
    TraceOutOfRange { trace: Rational },
    /// A characteristic-polynomial coefficient is not an integer.
    NonIntegralCharPoly { coefficient: usize },
    /// A monic integer factor of the characteristic polynomial with no
    /// cyclotomic factor; some root is off the unit circle (Kronecker).
    EigenvalueOffUnitCircle { factor: PolyQ },
    /// `m^s - I` is nonzero and nilpotent.
    UnipotentPart { exponent: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OrderCertificate {
    Finite(u64),
    Infinite(InfiniteOrderWitness),
}

/// Orders `j` with `φ(j) ≤ d`, ascending.
fn cyclotomic_orders(d: usize) -> Vec<u64> {
    // φ(j) ≥ sqrt(j/2), so j ≤ 2d² bounds the search
    (1..=(2 * d * d).max(2) as u64).filter(|&j| totient(j) as usize <= d).collect()
}

/// Certified order of an invertible matrix.
pub fn element_order_certificate(m: &MatQ) -> OrderCertificate {
    let d = m.rows();
    if m.is_identity() {
        return OrderCertificate::Finite(1);
    }
    let tr = m.trace();
    if !tr.is_integer() || tr.abs() > Rational::from_integer(BigInt::from(d)) {
        return OrderCertificate::Infinite(InfiniteOrderWitness::TraceOutOfRange { trace: tr });
    }
    let cp = char_poly(m);
    if let Some(i) = cp.coeffs().iter().position(|c| !c.is_integer()) {
        return OrderCertificate::Infinite(InfiniteOrderWitness::NonIntegralCharPoly { coefficient: i });
    }
    let (orders, rest) = strip_cyclotomic_factors(&cp, d);
    if rest.degree().unwrap_or(0) > 0 {
        return OrderCertificate::Infinite(InfiniteOrderWitness::EigenvalueOffUnitCircle { factor: rest });
    }
    let s = orders.iter().fold(1u64, |acc, &j| acc.lcm(&j));
    if !m.pow(s).is_identity() {
        return OrderCertificate::Infinite(InfiniteOrderWitness::UnipotentPart { exponent: s });
    }
    let k = (1..=s).find(|k| s % k == 0 && m.pow(*k).is_identity()).unwrap();
    OrderCertificate::Finite(k)
}

/// Divides out cyclotomic factors `Φ_j` with `φ(j) ≤ d`; returns the orders
/// found and the cyclotomic-free remainder.
fn strip_cyclotomic_factors(p: &PolyQ, d: usize) -> (Vec<u64>, PolyQ) {
    let mut rest = p.clone();
    let mut orders = Vec::new();
    for j in cyclotomic_orders(d) {
        let phi = cyclotomic(j);
        loop {
            if rest.degree().unwrap_or(0) < phi.degree().unwrap() {
                break;
            }
            let (q, r) = rest.div_rem(&phi);
            if !r.is_zero() {
                break;
            }
            rest = q;
            if !orders.contains(&j) {
                orders.push(j);
            }
        }
    }
    (orders, rest)
}

impl OrderCertificate {
    /// Re-checks the certificate against `m` from scratch.
    pub fn verify(&self, m: &MatQ) -> bool {
        let d = m.rows();
        match self {
            OrderCertificate::Finite(k) => *k >= 1 && m.pow(*k).is_identity() && (1..*k).all(|j| *k % j != 0 || !m.pow(j).is_identity()),
            OrderCertificate::Infinite(w) => match w {
                InfiniteOrderWitness::TraceOutOfRange { trace } => {
                    &m.trace() == trace && (!trace.is_integer() || trace.abs() > Rational::from_integer(BigInt::from(d)))
                }
                InfiniteOrderWitness::NonIntegralCharPoly { coefficient } => {
                    char_poly(m).coeffs().get(*coefficient).is_some_and(|c| !c.is_integer())
                }
                InfiniteOrderWitness::EigenvalueOffUnitCircle { factor } => {
                    let cp = char_poly(m);
                    cp.is_integral()
                        && factor.is_integral()
                        && factor.leading().is_some_and(One::is_one)
                        && factor.degree().unwrap_or(0) > 0
                        && cp.div_rem(factor).1.is_zero()
                        && strip_cyclotomic_factors(factor, d).0.is_empty()
                }
                InfiniteOrderWitness::UnipotentPart { exponent } => {
                    let u = &m.pow(*exponent) - &MatQ::identity(d);
                    let cp = char_poly(&m.pow(*exponent));
                    // all eigenvalues of m^s equal 1 and m^s ≠ I
                    let ones = (0..d).fold(PolyQ::one(), |acc, _| acc.mul(&PolyQ::from_i64(&[-1, 1])));
                    cp == ones && !u.is_zero()
                }
            },
        }
    }
}

#[derive(Debug, Clone)]
pub enum Finiteness {
    /// The enumerated group, closed under right multiplication by generators.
    Finite {
        order: usize,
        elements: GroupBall,
    },
    Infinite {
        word: Word,
        witness: InfiniteOrderWitness,
    },
    Unknown,
}

/// Layered finiteness test: order certificates of short words, then a
/// closure computation bounded by `cap`.
pub fn is_finite_group(spec: &GroupSpec, cap: usize) -> Finiteness {
    let short = bfs_ball(spec, 2, cap.max(1));
    for (m, w) in short.elements.iter().zip(&short.words) {
        if let OrderCertificate::Infinite(witness) = element_order_certificate(m) {
            return Finiteness::Infinite { word: w.clone(), witness };
        }
    }
    let ball = bfs_ball(spec, usize::MAX, cap);
    if ball.truncated {
        return Finiteness::Unknown;
    }
    let closed = ball.elements.iter().all(|e| spec.generators.iter().all(|g| ball.contains(&(e * g))));
    if !closed {
        return Finiteness::Unknown;
    }
    Finiteness::Finite { order: ball.len(), elements: ball }
}

/// Smallest prime outside `S` dividing no denominator of any generator or
/// inverse entry and not dividing the determinant's numerator.
pub fn good_reduction_prime(spec: &GroupSpec) -> u64 {
    good_reduction_primes(spec, 1)[0]
}

/// The first `count` primes with good reduction, ascending.
pub fn good_reduction_primes(spec: &GroupSpec, count: usize) -> Vec<u64> {
    let mut bad = BigInt::one();
    for m in spec.generators.iter().chain(&spec.inverses) {
        for x in m.entries() {
            bad = bad.lcm(x.denom());
        }
        let det = m.det();
        bad = bad.lcm(&det.numer().abs());
    }
    let mut out = Vec::with_capacity(count);
    let mut q = 2u64;
    while out.len() < count {
        if crate::sadic::is_prime(q) && !spec.primes.contains(q) && !(&bad % q).is_zero() {
            out.push(q);
        }
        q += 1;
    }
    out
}

/// Reduction of a matrix with entries in `Z_(q)` modulo a prime `q`.
pub fn reduce_mod_prime(m: &MatQ, q: u64) -> Vec<u64> {
    let qb = BigInt::from(q);
    m.entries()
        .iter()
        .map(|x| {
            let inv = crate::sadic::mod_inverse(x.denom(), &qb).expect("denominator prime to q");
            (x.numer() * inv).mod_floor(&qb).to_u64().unwrap()
        })
        .collect()
}
