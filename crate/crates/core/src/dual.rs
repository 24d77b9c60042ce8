//! Characters of the S-adic solenoid, the transpose dual action, orbit
//! Schreier graphs, and certified lower bounds on Markov operator norms.

use std::collections::HashMap;

use num_bigint::{BigInt, BigUint};
use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{dot, MatQ, VecQ};
use crate::matgroup::{in_gld_zs, GroupSpec, Word};
use crate::sadic::{character_phase, format_rational, is_s_integer, Phase, Place, PrimeSet, Rational};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DualError {
    #[error("the trivial character is excluded")]
    ZeroCharacter,
    #[error("character coordinate {0} is not in Z[1/S]")]
    NotInLattice(usize),
    #[error("matrix does not preserve Z[1/S]^d")]
    LatticeViolation,
    #[error("character has dimension {got}, expected {expected}")]
    Dimension { expected: usize, got: usize },
}

/// A nonzero vector of `Z[1/S]^d`, read as a character of `Q_S^d / Z[1/S]^d`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Character {
    coords: VecQ,
    primes: PrimeSet,
}

impl Character {
    pub fn new(coords: VecQ, primes: PrimeSet) -> Result<Self, DualError> {
        if coords.iter().all(Zero::is_zero) {
            return Err(DualError::ZeroCharacter);
        }
        if let Some(i) = coords.iter().position(|c| !is_s_integer(c, &primes)) {
            return Err(DualError::NotInLattice(i));
        }
        Ok(Character { coords, primes })
    }

    pub fn coords(&self) -> &[Rational] {
        &self.coords
    }

    pub fn prime_set(&self) -> &PrimeSet {
        &self.primes
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn to_strings(&self) -> Vec<String> {
        self.coords.iter().map(format_rational).collect()
    }
}

/// `χ ↦ gᵗχ`, a right action: `(gh)ᵗχ = hᵗ(gᵗχ)`.
pub fn dual_act(g: &MatQ, chi: &Character) -> Result<Character, DualError> {
    if g.rows() != chi.dim() {
        return Err(DualError::Dimension { expected: g.rows(), got: chi.dim() });
    }
    if !in_gld_zs(g, &chi.primes) {
        return Err(DualError::LatticeViolation);
    }
    Ok(Character { coords: g.vec_mul(&chi.coords), primes: chi.primes.clone() })
}

/// Phase of the pairing `⟨x, χ⟩` at a place.
pub fn pairing_phase(x: &[Rational], chi: &Character, place: Place) -> Phase {
    character_phase(&dot(x, &chi.coords), place)
}

/// Breadth-first piece of an orbit `χ·Γ`.
///
/// `edges[i][v]` is the target of vertex `v` under alphabet letter `i`
/// (order `+1, -1, +2, -2, …`), or `None` when it falls outside the ball.
#[derive(Debug, Clone)]
pub struct OrbitGraph {
    pub vertices: Vec<Character>,
    pub words: Vec<Word>,
    pub depth: Vec<usize>,
    pub alphabet: Vec<i32>,
    pub edges: Vec<Vec<Option<usize>>>,
    pub radius: usize,
    pub truncated: bool,
    /// True when BFS ran out of new vertices: the whole orbit is present.
    pub closed: bool,
}

impl OrbitGraph {
    pub fn root(&self) -> &Character {
        &self.vertices[0]
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }
}

pub fn orbit_ball(spec: &GroupSpec, seed: &Character, radius: usize, cap: usize) -> Result<OrbitGraph, DualError> {
    if seed.dim() != spec.dim() {
        return Err(DualError::Dimension { expected: spec.dim(), got: seed.dim() });
    }
    let alphabet = spec.alphabet();
    let transposed: Vec<MatQ> = alphabet.iter().map(|&l| spec.letter(l).unwrap().transpose()).collect();
    let mut index: HashMap<VecQ, usize> = HashMap::from([(seed.coords.clone(), 0)]);
    let mut coords = vec![seed.coords.clone()];
    let mut words = vec![Word::empty()];
    let mut depth = vec![0];
    let mut edges = vec![Vec::new(); alphabet.len()];
    let mut truncated = false;
    let mut closed = true;
    let mut v = 0;
    while v < coords.len() {
        for (i, t) in transposed.iter().enumerate() {
            let w = t.mul_vec(&coords[v]);
            let target = match index.get(&w) {
                Some(&u) => Some(u),
                None if depth[v] < radius && coords.len() < cap => {
                    let u = coords.len();
                    index.insert(w.clone(), u);
                    coords.push(w);
                    let mut word = words[v].clone();
                    word.0.push(alphabet[i]);
                    words.push(word);
                    depth.push(depth[v] + 1);
                    Some(u)
                }
                None => {
                    closed = false;
                    truncated |= depth[v] < radius;
                    None
                }
            };
            edges[i].push(target);
        }
        v += 1;
    }
    // targets discovered later may close edges that were recorded as missing
    for (i, t) in transposed.iter().enumerate() {
        for (v, c) in coords.iter().enumerate() {
            if edges[i][v].is_none() {
                edges[i][v] = index.get(&t.mul_vec(c)).copied();
            }
        }
    }
    let primes = seed.primes.clone();
    let vertices = coords.into_iter().map(|c| Character { coords: c, primes: primes.clone() }).collect();
    Ok(OrbitGraph { vertices, words, depth, alphabet, edges, radius, truncated, closed })
}

/// Schreier generators `t_v g t_u⁻¹` of the stabilizer of the root, one per
/// positive-generator edge `v → u` inside the graph, freely reduced and
/// deduplicated.
pub fn stabilizer_gens(graph: &OrbitGraph) -> Vec<Word> {
    let mut out: Vec<Word> = Vec::new();
    for (i, &l) in graph.alphabet.iter().enumerate() {
        if l < 0 {
            continue;
        }
        for v in 0..graph.len() {
            let Some(u) = graph.edges[i][v] else { continue };
            let s = graph.words[v].concat(&Word(vec![l])).concat(&graph.words[u].inverse());
            if !s.is_empty() && !out.contains(&s) {
                out.push(s);
            }
        }
    }
    out
}

/// How a possibly non-symmetric `ν` is turned into a self-adjoint operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureMode {
    /// `(ν + ν̌)/2`.
    #[default]
    Symmetrized,
    /// `ν` itself, bounded through `ν̌ ∗ ν`.
    AsGiven,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateTarget {
    NormKappa1Orbit,
    NormLambdaGamma,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundPoint {
    pub parameter: usize,
    pub value: f64,
}

/// Nondecreasing certified lower bounds on an operator norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralEstimate {
    pub target: EstimateTarget,
    pub method: String,
    pub lower_bounds: Vec<BoundPoint>,
    pub truncated: bool,
}

impl SpectralEstimate {
    pub fn last(&self) -> Option<f64> {
        self.lower_bounds.last().map(|b| b.value)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MarkovParams {
    pub radius: usize,
    pub iters: usize,
    pub cap: usize,
    pub mode: MeasureMode,
}

impl Default for MarkovParams {
    fn default() -> Self {
        MarkovParams { radius: 12, iters: 20_000, cap: 200_000, mode: MeasureMode::Symmetrized }
    }
}

/// Relative allowance for floating-point error in the power iteration.
const SAFETY: f64 = 1e-12;
const TOLERANCE: f64 = 1e-12;

fn weighted_letters(spec: &GroupSpec, graph: &OrbitGraph, mode: MeasureMode) -> Vec<(usize, f64)> {
    let measure = match mode {
        MeasureMode::Symmetrized => spec.symmetric_measure(),
        MeasureMode::AsGiven => spec.given_measure(),
    };
    measure.into_iter().map(|(l, w)| (graph.alphabet.iter().position(|&a| a == l).unwrap(), w.to_f64().unwrap())).collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `‖Mf‖/‖f‖` from repeated application of a self-adjoint `M` to the root
/// indicator; the ratios increase toward `‖M‖` on the root's cyclic space.
fn power_ratio(n: usize, iters: usize, apply: impl Fn(&[f64]) -> Vec<f64>) -> f64 {
    let mut f = vec![0.0; n];
    f[0] = 1.0;
    let mut best: f64 = 0.0;
    let mut prev = f64::NAN;
    for _ in 0..iters {
        let g = apply(&f);
        let ng = norm(&g);
        let r = ng / norm(&f);
        best = best.max(r);
        if ng == 0.0 || (r - prev).abs() < TOLERANCE {
            break;
        }
        prev = r;
        f = g.into_iter().map(|x| x / ng).collect();
    }
    best
}

/// Lower bounds on the norm of the quasi-regular Markov operator of the
/// orbit through `seed`, one per radius `1..=radius`.
///
/// Symmetrized mode compresses `A` to the radius-`r` ball; as-given mode
/// compresses `A*A`, reading `A` on the radius-`(r+1)` ball, and takes a
/// square root. A finite orbit has the constant vector and gives exactly 1.
pub fn markov_lower_bound(spec: &GroupSpec, seed: &Character, params: &MarkovParams) -> Result<SpectralEstimate, DualError> {
    let graph = orbit_ball(spec, seed, params.radius + 1, params.cap)?;
    let letters = weighted_letters(spec, &graph, params.mode);
    let inverse_of: Vec<usize> = graph.alphabet.iter().map(|&l| graph.alphabet.iter().position(|&a| a == -l).unwrap()).collect();
    let method = match params.mode {
        MeasureMode::Symmetrized => "compressed_markov_power_iteration",
        MeasureMode::AsGiven => "compressed_gram_power_iteration",
    };
    let mut out = SpectralEstimate {
        target: EstimateTarget::NormKappa1Orbit,
        method: method.into(),
        lower_bounds: Vec::new(),
        truncated: graph.truncated,
    };
    let mut best: f64 = 0.0;
    for r in 1..=params.radius.max(1) {
        let value = if graph.closed {
            1.0
        } else {
            let n = graph.depth.iter().take_while(|&&d| d <= r).count();
            let raw = match params.mode {
                MeasureMode::Symmetrized => power_ratio(n, params.iters, |f| {
                    let mut g = vec![0.0; n];
                    for (v, gv) in g.iter_mut().enumerate() {
                        for &(i, w) in &letters {
                            if let Some(u) = graph.edges[i][v].filter(|&u| u < n) {
                                *gv += w * f[u];
                            }
                        }
                    }
                    g
                }),
                MeasureMode::AsGiven => {
                    let m = graph.depth.iter().take_while(|&&d| d <= r + 1).count();
                    let apply_a = |f: &[f64]| {
                        let mut g = vec![0.0; m];
                        for (v, gv) in g.iter_mut().enumerate() {
                            for &(i, w) in &letters {
                                if let Some(u) = graph.edges[i][v].filter(|&u| u < n) {
                                    *gv += w * f[u];
                                }
                            }
                        }
                        g
                    };
                    // (A* h)(u) = Σ w h(v) over edges v → u, i.e. u·l⁻¹ = v
                    let apply_adj = |h: &[f64]| {
                        let mut g = vec![0.0; n];
                        for (u, gu) in g.iter_mut().enumerate() {
                            for &(i, w) in &letters {
                                if let Some(v) = graph.edges[inverse_of[i]][u].filter(|&v| v < m) {
                                    *gu += w * h[v];
                                }
                            }
                        }
                        g
                    };
                    let sq = power_ratio(n, params.iters, |f| apply_adj(&apply_a(f)));
                    sq.sqrt()
                }
            };
            (raw * (1.0 - SAFETY)).min(1.0)
        };
        best = best.max(value);
        out.lower_bounds.push(BoundPoint { parameter: r, value: best });
    }
    Ok(out)
}

/// Exact return probabilities and the bounds derived from them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupNormEstimate {
    pub estimate: SpectralEstimate,
    /// `(2k, p_{2k}(e))` as exact rationals.
    pub return_probabilities: Vec<(usize, String)>,
    /// `(2k, ⌊p_{2k}^{1/2k}⌋)`.
    pub root_bounds: Vec<BoundPoint>,
    /// `(2k, ⌊(p_{2k}/p_{2k-2})^{1/2}⌋)`.
    pub ratio_bounds: Vec<BoundPoint>,
    #[serde(skip)]
    pub exact: Vec<Rational>,
}

/// Largest `f64` `y ≥ 0` found with `y^n ≤ q`, checked exactly.
pub fn root_floor(q: &Rational, n: u32) -> f64 {
    if q.is_zero() {
        return 0.0;
    }
    let mut y = q.to_f64().unwrap().powf(1.0 / f64::from(n));
    loop {
        let exact = Rational::from_float(y).unwrap();
        if num_traits::pow(exact, n as usize) <= *q {
            return y;
        }
        y = f64::from_bits(y.to_bits() - 1);
    }
}

type Key = Vec<i64>;

fn to_int_key(m: &MatQ) -> Option<Key> {
    m.entries().iter().map(|x| if x.is_integer() { x.to_integer().to_i64() } else { None }).collect()
}

fn mul_key(a: &[i64], b: &[i64], k: usize) -> Option<Key> {
    let mut c = vec![0i64; k * k];
    for i in 0..k {
        for l in 0..k {
            let x = a[i * k + l];
            if x == 0 {
                continue;
            }
            for j in 0..k {
                c[i * k + j] = c[i * k + j].checked_add(x.checked_mul(b[l * k + j])?)?;
            }
        }
    }
    Some(c)
}

/// Distribution of the `k`-step walk as integer counts over `D^k`, keyed by
/// exact group elements. Integer groups use `i64` keys with overflow checks.
enum Walk {
    Int(HashMap<Key, BigUint>, Vec<(Key, BigUint)>),
    Exact(HashMap<MatQ, BigUint>, Vec<(MatQ, BigUint)>),
}

impl Walk {
    fn new(spec: &GroupSpec, steps: &[(MatQ, BigUint)]) -> Walk {
        let k = spec.dim();
        let int_steps: Option<Vec<(Key, BigUint)>> = steps.iter().map(|(m, c)| to_int_key(m).map(|key| (key, c.clone()))).collect();
        match int_steps {
            Some(s) => {
                let id = to_int_key(&MatQ::identity(k)).unwrap();
                Walk::Int(HashMap::from([(id, BigUint::from(1u8))]), s)
            }
            None => Walk::Exact(HashMap::from([(MatQ::identity(k), BigUint::from(1u8))]), steps.to_vec()),
        }
    }

    fn len(&self) -> usize {
        match self {
            Walk::Int(d, _) => d.len(),
            Walk::Exact(d, _) => d.len(),
        }
    }

    /// Advances one step; `None` if an `i64` key overflowed.
    fn step(&mut self, k: usize) -> Option<()> {
        match self {
            Walk::Int(dist, steps) => {
                let mut next: HashMap<Key, BigUint> = HashMap::with_capacity(dist.len() * 3);
                for (x, c) in dist.iter() {
                    for (s, w) in steps.iter() {
                        *next.entry(mul_key(x, s, k)?).or_default() += c * w;
                    }
                }
                *dist = next;
            }
            Walk::Exact(dist, steps) => {
                let mut next: HashMap<MatQ, BigUint> = HashMap::with_capacity(dist.len() * 3);
                for (x, c) in dist.iter() {
                    for (s, w) in steps.iter() {
                        *next.entry(x * s).or_default() += c * w;
                    }
                }
                *dist = next;
            }
        }
        Some(())
    }

    fn sum_of_squares(&self) -> BigUint {
        match self {
            Walk::Int(d, _) => d.values().map(|c| c * c).sum(),
            Walk::Exact(d, _) => d.values().map(|c| c * c).sum(),
        }
    }
}

/// Lower bounds on `‖λ_Γ(ν)‖` from exact return probabilities of the
/// symmetrized walk, for `2k ≤ max_steps`.
///
/// With `μ` symmetric, `p_{2k} = Σ_x μ^{*k}(x)²`. Both `p_{2k}^{1/2k}` and
/// `(p_{2k}/p_{2k-2})^{1/2}` are at most the norm; the reported sequence is
/// the running maximum of the two, with each root rounded down and checked.
pub fn group_norm_lower(spec: &GroupSpec, max_steps: usize, cap: usize) -> GroupNormEstimate {
    let measure = spec.symmetric_measure();
    let denom: BigInt = measure.iter().fold(BigInt::from(1), |acc, (_, w)| num_integer::lcm(acc, w.denom().clone()));
    let steps: Vec<(MatQ, BigUint)> = measure
        .iter()
        .map(|(l, w)| {
            let c = (w * Rational::from_integer(denom.clone())).to_integer();
            (spec.letter(*l).unwrap().clone(), c.to_biguint().unwrap())
        })
        .collect();
    let k_dim = spec.dim();
    let mut walk = Walk::new(spec, &steps);
    let mut out = GroupNormEstimate {
        estimate: SpectralEstimate {
            target: EstimateTarget::NormLambdaGamma,
            method: "return_probability".into(),
            lower_bounds: Vec::new(),
            truncated: false,
        },
        return_probabilities: Vec::new(),
        root_bounds: Vec::new(),
        ratio_bounds: Vec::new(),
        exact: Vec::new(),
    };
    let mut prev = Rational::from_integer(BigInt::from(1));
    let mut best: f64 = 0.0;
    for k in 1..=max_steps / 2 {
        if walk.step(k_dim).is_none() || walk.len() > cap {
            out.estimate.truncated = true;
            break;
        }
        let den = num_traits::pow(BigInt::from(denom.clone()), 2 * k);
        let p = Rational::new(BigInt::from(walk.sum_of_squares()), den);
        let root = root_floor(&p, 2 * k as u32);
        let ratio = root_floor(&(&p / &prev), 2);
        best = best.max(root).max(ratio);
        out.return_probabilities.push((2 * k, format_rational(&p)));
        out.root_bounds.push(BoundPoint { parameter: 2 * k, value: root });
        out.ratio_bounds.push(BoundPoint { parameter: 2 * k, value: ratio });
        out.estimate.lower_bounds.push(BoundPoint { parameter: 2 * k, value: best });
        out.exact.push(p.clone());
        prev = p;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolenoidEstimate {
    pub per_seed: Vec<(Vec<String>, SpectralEstimate)>,
    /// Supremum of the per-orbit bounds: a lower bound on `‖κ₁(ν)‖`. A value
    /// away from 1 is not a proof of a gap.
    pub kappa1_lower_bound: f64,
}

pub fn solenoid_gap_estimate(spec: &GroupSpec, seeds: &[Character], params: &MarkovParams) -> Result<SolenoidEstimate, DualError> {
    let per_seed =
        seeds.par_iter().map(|s| Ok((s.to_strings(), markov_lower_bound(spec, s, params)?))).collect::<Result<Vec<_>, DualError>>()?;
    let sup = per_seed.iter().filter_map(|(_, e)| e.last()).fold(0.0, f64::max);
    Ok(SolenoidEstimate { per_seed, kappa1_lower_bound: sup })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matgroup::word_eval;
    use crate::sadic::{int, rat};

    fn s(p: &[u64]) -> PrimeSet {
        PrimeSet::new(p.iter().copied()).unwrap()
    }

    fn chi(x: &[i64], p: &[u64]) -> Character {
        Character::new(x.iter().map(|&a| int(a)).collect(), s(p)).unwrap()
    }

    fn t_group() -> GroupSpec {
        GroupSpec::uniform(s(&[2]), 2, vec![MatQ::from_i64(&[&[1, 1], &[0, 1]])]).unwrap()
    }

    fn sanov() -> GroupSpec {
        GroupSpec::uniform(PrimeSet::empty(), 2, vec![MatQ::from_i64(&[&[1, 2], &[0, 1]]), MatQ::from_i64(&[&[1, 0], &[2, 1]])]).unwrap()
    }

    #[test]
    fn dual_action_examples() {
        let t = MatQ::from_i64(&[&[1, 1], &[0, 1]]);
        assert_eq!(dual_act(&t, &chi(&[0, 1], &[2])).unwrap(), chi(&[0, 1], &[2]));
        assert_eq!(dual_act(&t, &chi(&[1, 0], &[2])).unwrap(), chi(&[1, 1], &[2]));
        let d = MatQ::diagonal(&[int(2), rat(1, 2)]);
        let got = dual_act(&d, &chi(&[1, 1], &[2])).unwrap();
        assert_eq!(got.coords(), &[int(2), rat(1, 2)]);
        assert_eq!(dual_act(&d, &chi(&[1, 1], &[])).unwrap_err(), DualError::LatticeViolation);
        assert_eq!(Character::new(vec![int(0), int(0)], s(&[2])).unwrap_err(), DualError::ZeroCharacter);
        assert!(Character::new(vec![rat(1, 3)], s(&[2])).is_err());
    }

    #[test]
    fn orbit_examples() {
        let g = orbit_ball(&t_group(), &chi(&[0, 1], &[2]), 10, 1000).unwrap();
        assert_eq!(g.len(), 1);
        assert!(g.closed);
        let g = orbit_ball(&t_group(), &chi(&[1, 0], &[2]), 4, 1000).unwrap();
        assert_eq!(g.len(), 9);
        for k in -4..=4 {
            assert!(g.vertices.contains(&chi(&[1, k], &[2])));
        }
        assert!(!g.closed);
        assert!(!g.truncated);
    }

    #[test]
    fn orbit_words_reach_their_vertices() {
        let spec = sanov();
        let g = orbit_ball(&spec, &chi(&[1, 0], &[]), 3, 10_000).unwrap();
        for (v, w) in g.vertices.iter().zip(&g.words) {
            let m = word_eval(&spec, w).unwrap();
            assert_eq!(&dual_act(&m, g.root()).unwrap(), v);
        }
    }

    #[test]
    fn stabilizer_examples() {
        let g = orbit_ball(&t_group(), &chi(&[0, 1], &[2]), 10, 1000).unwrap();
        assert_eq!(stabilizer_gens(&g), vec![Word(vec![1])]);
        let g = orbit_ball(&t_group(), &chi(&[1, 0], &[2]), 10, 1000).unwrap();
        assert!(stabilizer_gens(&g).is_empty());
        let sl2 = GroupSpec::uniform(s(&[2]), 2, vec![MatQ::from_i64(&[&[0, -1], &[1, 0]]), MatQ::from_i64(&[&[1, 1], &[0, 1]])]).unwrap();
        let g = orbit_ball(&sl2, &chi(&[1, 0], &[2]), 4, 10_000).unwrap();
        let stab = stabilizer_gens(&g);
        assert!(!stab.is_empty());
        for w in &stab {
            let m = word_eval(&sl2, w).unwrap();
            assert_eq!(&dual_act(&m, g.root()).unwrap(), g.root());
        }
    }

    #[test]
    fn fixed_character_gives_one() {
        let e = markov_lower_bound(&t_group(), &chi(&[0, 1], &[2]), &MarkovParams { radius: 5, ..Default::default() }).unwrap();
        assert!(e.lower_bounds.iter().all(|b| b.value == 1.0));
    }

    #[test]
    fn path_compression_matches_dense_eigensolve() {
        // dense symmetric eigensolve of the path compression at L = 6
        let l = 6usize;
        let n = 2 * l + 1;
        let mut m = nalgebra::DMatrix::<f64>::zeros(n, n);
        for i in 0..n - 1 {
            m[(i, i + 1)] = 0.5;
            m[(i + 1, i)] = 0.5;
        }
        let top = m.symmetric_eigenvalues().iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        let e = markov_lower_bound(&t_group(), &chi(&[1, 0], &[2]), &MarkovParams { radius: l, ..Default::default() }).unwrap();
        assert!((e.last().unwrap() - top).abs() < 1e-9);
        assert!(e.last().unwrap() <= top);
    }

    #[test]
    fn as_given_mode_bounds_the_gram_operator() {
        let spec = GroupSpec::new(
            s(&[2]),
            2,
            vec![MatQ::from_i64(&[&[1, 1], &[0, 1]]), MatQ::from_i64(&[&[1, -1], &[0, 1]])],
            vec![rat(1, 2), rat(1, 2)],
        )
        .unwrap();
        let p = MarkovParams { radius: 8, mode: MeasureMode::AsGiven, ..Default::default() };
        let e = markov_lower_bound(&spec, &chi(&[1, 0], &[2]), &p).unwrap();
        let v = e.last().unwrap();
        assert!(v > 0.9 && v <= 1.0);
    }

    #[test]
    fn free_group_return_probabilities() {
        let g = group_norm_lower(&sanov(), 8, 1_000_000);
        assert_eq!(g.exact[0], rat(1, 4));
        assert_eq!(g.exact[1], rat(7, 64));
        assert_eq!(g.exact[2], rat(29, 512));
        assert_eq!(g.exact[3], rat(523, 16384));
        assert_eq!(g.root_bounds[0].value, 0.5);
        assert!((g.root_bounds[1].value - 0.575_081_658_447_801_5).abs() < 1e-15);
    }

    #[test]
    fn integer_walk_on_z() {
        let g = group_norm_lower(&t_group(), 8, 1000);
        let expect = [rat(1, 2), rat(3, 8), rat(5, 16), rat(35, 128)];
        assert_eq!(g.exact, expect);
        assert!((g.root_bounds[0].value - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn exact_keys_for_s_integral_groups() {
        let d = GroupSpec::uniform(s(&[2]), 2, vec![MatQ::diagonal(&[int(2), rat(1, 2)])]).unwrap();
        let g = group_norm_lower(&d, 6, 1000);
        assert_eq!(g.exact, vec![rat(1, 2), rat(3, 8), rat(5, 16)]);
    }

    #[test]
    fn root_floor_is_exact() {
        let q = rat(7, 64);
        let y = root_floor(&q, 4);
        assert!(num_traits::pow(Rational::from_float(y).unwrap(), 4) <= q);
        let up = f64::from_bits(y.to_bits() + 1);
        assert!(num_traits::pow(Rational::from_float(up).unwrap(), 4) > q);
        assert_eq!(root_floor(&rat(1, 4), 2), 0.5);
    }
}
