//! The spectral-gap decision for `p_S(Γ)` acting on the S-adic solenoid:
//! there is no gap iff some nonzero `Γᵗ`-invariant rational subspace carries
//! a virtually abelian image.

use std::collections::{BTreeSet, HashMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::MatQ;
use crate::matgroup::{good_reduction_primes, is_finite_group, reduce_mod_prime, word_eval, Finiteness, GroupError, GroupSpec, Word};
use crate::meataxe::{check_coverage, is_certified_simple, minimal_invariant_subspaces, MeataxeError, SubspaceQ};
use crate::pingpong::{self, PingPongCertificate};
use crate::sadic::Rational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CriterionError {
    #[error("subspace not invariant")]
    NotInvariant,
    #[error(transparent)]
    Meataxe(#[from] MeataxeError),
    #[error(transparent)]
    Group(#[from] GroupError),
}

/// Limits for the virtual-abelianness search. Larger budgets can only turn
/// `Unknown` into a certified answer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchBudget {
    pub max_word_length: usize,
    pub max_power: u32,
    pub finite_cap: usize,
    pub congruence_cap: usize,
    pub max_candidates: usize,
}

impl Default for SearchBudget {
    fn default() -> Self {
        SearchBudget { max_word_length: 6, max_power: 32, finite_cap: 5000, congruence_cap: 5000, max_candidates: 48 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "layer", rename_all = "snake_case")]
pub enum AbelianLayer {
    Commuting,
    Finite,
    Congruence { prime: u64 },
}

/// Coset data for an abelian subgroup `H` of index at most `index`.
///
/// `transversal[0]` is the empty word and `coset_table[x][i] = y` records
/// `t_x g_i ∈ H t_y`. `H` is generated by the `t_x g_i t_y⁻¹`, which must all
/// appear among `subgroup_generators`; those commute pairwise. Every table
/// column must be a permutation so that the cosets `H t_x` are closed under
/// generators and inverses and hence cover the group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VaCertificate {
    #[serde(flatten)]
    pub layer: AbelianLayer,
    pub index: usize,
    pub transversal: Vec<Word>,
    pub coset_table: Vec<Vec<usize>>,
    pub subgroup_generators: Vec<MatQ>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum VAResult {
    VirtuallyAbelian(VaCertificate),
    NotVirtuallyAbelian(PingPongCertificate),
    Unknown { reason: String },
}

impl VAResult {
    pub fn is_virtually_abelian(&self) -> bool {
        matches!(self, VAResult::VirtuallyAbelian(_))
    }

    pub fn is_not_virtually_abelian(&self) -> bool {
        matches!(self, VAResult::NotVirtuallyAbelian(_))
    }
}

/// The action on `W` in a Hermite-reduced basis of `W ∩ Z^d`, so that the
/// restricted generators stay in `GL(Z[1/S])`. Generators that coincide on
/// `W` are merged and their weights added.
pub fn restrict_action(spec: &GroupSpec, w: &SubspaceQ) -> Result<GroupSpec, CriterionError> {
    if w.ambient() != spec.dim() || !w.is_invariant(spec.generators()) {
        return Err(CriterionError::NotInvariant);
    }
    let lattice: Vec<Vec<Rational>> = w.lattice_basis().into_iter().map(|v| v.into_iter().map(Rational::from_integer).collect()).collect();
    let coords: Vec<Vec<Rational>> = lattice.iter().map(|v| w.coordinates(v).unwrap()).collect();
    let change = MatQ::from_columns(&coords).inverse().expect("lattice basis spans W");
    let mut gens: Vec<MatQ> = Vec::new();
    let mut weights: Vec<Rational> = Vec::new();
    for (g, wt) in spec.generators().iter().zip(spec.weights()) {
        let cols: Vec<Vec<Rational>> = lattice.iter().map(|v| w.coordinates(&g.mul_vec(v)).unwrap()).collect();
        let r = &change * &MatQ::from_columns(&cols);
        match gens.iter().position(|h| h == &r) {
            Some(i) => weights[i] += wt,
            None => {
                gens.push(r);
                weights.push(wt.clone());
            }
        }
    }
    Ok(GroupSpec::new(spec.prime_set().clone(), w.dim(), gens, weights)?)
}

/// Layered decision: commuting generators, finiteness, congruence kernel,
/// ping-pong; `Unknown` when the budget runs out.
pub fn is_virtually_abelian(spec: &GroupSpec, budget: &SearchBudget) -> VAResult {
    if let Some(c) = commuting_layer(spec) {
        return VAResult::VirtuallyAbelian(c);
    }
    if let Finiteness::Finite { elements, .. } = is_finite_group(spec, budget.finite_cap) {
        let table =
            elements.elements.iter().map(|e| spec.generators().iter().map(|g| elements.position(&(e * g)).unwrap()).collect()).collect();
        return VAResult::VirtuallyAbelian(VaCertificate {
            layer: AbelianLayer::Finite,
            index: elements.len(),
            transversal: elements.words.clone(),
            coset_table: table,
            subgroup_generators: Vec::new(),
        });
    }
    if let Some(c) = congruence_layer(spec, budget.congruence_cap) {
        return VAResult::VirtuallyAbelian(c);
    }
    if let Some(c) = pingpong::search(spec, budget.max_word_length, budget.max_power, budget.max_candidates) {
        return VAResult::NotVirtuallyAbelian(c);
    }
    VAResult::Unknown {
        reason: format!(
            "budget exhausted: words up to length {}, powers up to {}, finite cap {}, congruence cap {}",
            budget.max_word_length, budget.max_power, budget.finite_cap, budget.congruence_cap
        ),
    }
}

fn commuting_layer(spec: &GroupSpec) -> Option<VaCertificate> {
    let g = spec.generators();
    let commuting = (0..g.len()).all(|i| (i + 1..g.len()).all(|j| g[i].commutes_with(&g[j])));
    commuting.then(|| VaCertificate {
        layer: AbelianLayer::Commuting,
        index: 1,
        transversal: vec![Word::empty()],
        coset_table: vec![vec![0; g.len()]],
        subgroup_generators: g.to_vec(),
    })
}

fn mul_mod(a: &[u64], b: &[u64], k: usize, q: u64) -> Vec<u64> {
    let mut c = vec![0u64; k * k];
    for i in 0..k {
        for l in 0..k {
            let x = a[i * k + l];
            if x == 0 {
                continue;
            }
            for j in 0..k {
                c[i * k + j] = (c[i * k + j] + x * b[l * k + j]) % q;
            }
        }
    }
    c
}

/// Number of good primes tried by the congruence probe. Reduction mod 2 can
/// keep torsion in the kernel; from 3 on the kernel is torsion-free.
const CONGRUENCE_PRIMES: usize = 3;

fn congruence_layer(spec: &GroupSpec, cap: usize) -> Option<VaCertificate> {
    good_reduction_primes(spec, CONGRUENCE_PRIMES).into_iter().find_map(|q| congruence_probe(spec, q, cap))
}

/// Enumerates the image mod a good prime `q`; the kernel of reduction has
/// finite index, and its Schreier generators are tested for commutation.
fn congruence_probe(spec: &GroupSpec, q: u64, cap: usize) -> Option<VaCertificate> {
    let k = spec.dim();
    let alphabet = spec.alphabet();
    let reduced: HashMap<i32, Vec<u64>> = alphabet.iter().map(|&l| (l, reduce_mod_prime(spec.letter(l).unwrap(), q))).collect();
    let id: Vec<u64> = (0..k * k).map(|i| u64::from(i % (k + 1) == 0)).collect();
    let mut index = HashMap::from([(id.clone(), 0usize)]);
    let mut images = vec![id];
    let mut words = vec![Word::empty()];
    let mut exact = vec![MatQ::identity(k)];
    let mut exact_inv = vec![MatQ::identity(k)];
    let mut i = 0;
    while i < images.len() {
        for &l in &alphabet {
            let m = mul_mod(&images[i], &reduced[&l], k, q);
            if index.contains_key(&m) {
                continue;
            }
            if images.len() >= cap {
                return None;
            }
            let mut w = words[i].clone();
            w.0.push(l);
            index.insert(m.clone(), images.len());
            images.push(m);
            words.push(w);
            exact.push(&exact[i] * spec.letter(l).unwrap());
            exact_inv.push(spec.letter(-l).unwrap() * &exact_inv[i]);
        }
        i += 1;
    }
    let mut table = Vec::with_capacity(images.len());
    let mut schreier = BTreeSet::new();
    for (x, img) in images.iter().enumerate() {
        let mut row = Vec::new();
        for (gi, g) in spec.generators().iter().enumerate() {
            let y = index[&mul_mod(img, &reduced[&(gi as i32 + 1)], k, q)];
            row.push(y);
            let s = &(&exact[x] * g) * &exact_inv[y];
            if !s.is_identity() {
                schreier.insert(s);
            }
        }
        table.push(row);
    }
    let gens: Vec<MatQ> = schreier.into_iter().collect();
    let abelian = (0..gens.len()).all(|a| (a + 1..gens.len()).all(|b| gens[a].commutes_with(&gens[b])));
    abelian.then(|| VaCertificate {
        layer: AbelianLayer::Congruence { prime: q },
        index: images.len(),
        transversal: words,
        coset_table: table,
        subgroup_generators: gens,
    })
}

/// Re-checks a virtual-abelianness certificate by direct multiplication.
pub fn verify_va(spec: &GroupSpec, c: &VaCertificate) -> Result<(), String> {
    let n = c.transversal.len();
    if n == 0 || !c.transversal[0].is_empty() {
        return Err("transversal must start at the identity".into());
    }
    if c.index != n || c.coset_table.len() != n {
        return Err("index does not match the transversal".into());
    }
    let ng = spec.num_generators();
    for gi in 0..ng {
        let mut seen = vec![false; n];
        for row in &c.coset_table {
            match row.get(gi) {
                Some(&y) if y < n && !seen[y] && row.len() == ng => seen[y] = true,
                _ => return Err("coset table column is not a permutation".into()),
            }
        }
    }
    let h = &c.subgroup_generators;
    if h.iter().any(|m| m.rows() != spec.dim() || m.cols() != spec.dim()) {
        return Err("subgroup generator has the wrong shape".into());
    }
    for a in 0..h.len() {
        for b in a + 1..h.len() {
            if !h[a].commutes_with(&h[b]) {
                return Err("commutator ≠ identity".into());
            }
        }
    }
    let listed: HashSet<&MatQ> = h.iter().collect();
    let t: Vec<MatQ> = c.transversal.iter().map(|w| word_eval(spec, w)).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
    let t_inv: Vec<MatQ> = t.iter().map(|m| m.inverse().expect("group element")).collect();
    for (x, row) in c.coset_table.iter().enumerate() {
        for (g, &y) in spec.generators().iter().zip(row) {
            let s = &(&t[x] * g) * &t_inv[y];
            if !s.is_identity() && !listed.contains(&s) {
                return Err("subgroup generator mismatch".into());
            }
        }
    }
    Ok(())
}

pub fn verify_va_result(spec: &GroupSpec, r: &VAResult) -> Result<(), String> {
    match r {
        VAResult::VirtuallyAbelian(c) => verify_va(spec, c),
        VAResult::NotVirtuallyAbelian(c) => pingpong::verify(spec, c),
        VAResult::Unknown { .. } => Ok(()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    Gap,
    NoGap,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubspaceCertificate {
    pub subspace: SubspaceQ,
    pub certified_minimal: bool,
    pub restricted_generators: Vec<MatQ>,
    pub result: VAResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapVerdict {
    pub verdict: Verdict,
    pub witness_subspace: Option<SubspaceQ>,
    /// One entry per isomorphism class of minimal `Γᵗ`-invariant subspaces.
    pub certificates: Vec<SubspaceCertificate>,
    pub complete: bool,
    /// Set when `Γ` itself is finite; then no gap holds trivially.
    pub finite_group_order: Option<usize>,
}

pub fn enveloping_algebra_basis(spec: &GroupSpec) -> Vec<MatQ> {
    crate::meataxe::algebra_closure(spec.generators(), spec.dim())
}

/// Minimal invariant subspaces of the given generators (pass transposes for
/// the dual action).
pub fn minimal_invariant_subspaces_of(spec: &GroupSpec) -> Result<Vec<(SubspaceQ, bool)>, CriterionError> {
    Ok(minimal_invariant_subspaces(spec.generators(), spec.dim())?.subspaces)
}

/// Decides the gap property from the transposed action.
pub fn corollary1_verdict(spec: &GroupSpec, budget: &SearchBudget) -> Result<GapVerdict, CriterionError> {
    let t = spec.transposed();
    let mins = minimal_invariant_subspaces(t.generators(), t.dim())?;
    let certificates = mins
        .subspaces
        .par_iter()
        .map(|(w, minimal)| {
            let r = restrict_action(&t, w)?;
            Ok(SubspaceCertificate {
                subspace: w.clone(),
                certified_minimal: *minimal,
                restricted_generators: r.generators().to_vec(),
                result: is_virtually_abelian(&r, budget),
            })
        })
        .collect::<Result<Vec<_>, CriterionError>>()?;
    let witness = certificates.iter().find(|c| c.result.is_virtually_abelian()).map(|c| c.subspace.clone());
    let verdict = if witness.is_some() {
        Verdict::NoGap
    } else if mins.complete && certificates.iter().all(|c| c.result.is_not_virtually_abelian()) {
        Verdict::Gap
    } else {
        Verdict::Unknown
    };
    let finite_group_order = match is_finite_group(spec, budget.finite_cap) {
        Finiteness::Finite { order, .. } => Some(order),
        _ => None,
    };
    Ok(GapVerdict { verdict, witness_subspace: witness, certificates, complete: mins.complete, finite_group_order })
}

/// Re-checks every certificate in a verdict against the group alone; the
/// error names the first failing check.
pub fn verify_verdict(spec: &GroupSpec, v: &GapVerdict) -> Result<(), String> {
    let t = spec.transposed();
    if let Some(w) = &v.witness_subspace {
        if w.ambient() != t.dim() || !w.is_invariant(t.generators()) {
            return Err("subspace not invariant".into());
        }
    }
    for c in &v.certificates {
        let r = restrict_action(&t, &c.subspace).map_err(|e| e.to_string())?;
        if r.generators() != c.restricted_generators.as_slice() {
            return Err("restricted generators do not match".into());
        }
        if c.certified_minimal && !is_certified_simple(t.generators(), &c.subspace) {
            return Err("subspace not minimal".into());
        }
        verify_va_result(&r, &c.result)?;
    }
    match v.verdict {
        Verdict::NoGap => {
            let w = v.witness_subspace.as_ref().ok_or("NoGap verdict without a witness subspace")?;
            let backed = v.certificates.iter().any(|c| &c.subspace == w && c.result.is_virtually_abelian());
            if !backed {
                return Err("witness subspace lacks an abelian certificate".into());
            }
        }
        Verdict::Gap => {
            if v.certificates.is_empty() || !v.certificates.iter().all(|c| c.result.is_not_virtually_abelian()) {
                return Err("Gap verdict with a subspace lacking a free-semigroup certificate".into());
            }
            let pieces: Vec<SubspaceQ> = v.certificates.iter().map(|c| c.subspace.clone()).collect();
            check_coverage(t.generators(), t.dim(), &pieces)?;
        }
        Verdict::Unknown => {}
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sadic::{int, rat, PrimeSet};

    fn group(s: &[u64], gens: Vec<MatQ>) -> GroupSpec {
        GroupSpec::uniform(PrimeSet::new(s.iter().copied()).unwrap(), gens[0].rows(), gens).unwrap()
    }

    fn t() -> MatQ {
        MatQ::from_i64(&[&[1, 1], &[0, 1]])
    }

    fn sl2() -> GroupSpec {
        group(&[2], vec![MatQ::from_i64(&[&[0, -1], &[1, 0]]), t()])
    }

    fn sanov() -> GroupSpec {
        group(&[], vec![MatQ::from_i64(&[&[1, 2], &[0, 1]]), MatQ::from_i64(&[&[1, 0], &[2, 1]])])
    }

    fn line(x: &[i64]) -> SubspaceQ {
        SubspaceQ::span(x.len(), &[x.iter().map(|&a| int(a)).collect()])
    }

    #[test]
    fn restriction_examples() {
        let tt = group(&[2], vec![t().transpose()]);
        let r = restrict_action(&tt, &line(&[0, 1])).unwrap();
        assert_eq!(r.generators(), &[MatQ::from_i64(&[&[1]])]);
        let d = group(&[2], vec![MatQ::diagonal(&[int(2), rat(1, 2)])]);
        let r = restrict_action(&d, &line(&[1, 0])).unwrap();
        assert_eq!(r.generators(), &[MatQ::from_i64(&[&[2]])]);
        let full = restrict_action(&sl2(), &SubspaceQ::full(2)).unwrap();
        assert_eq!(full.generators(), sl2().generators());
        assert_eq!(restrict_action(&d, &line(&[1, 1])).unwrap_err(), CriterionError::NotInvariant);
    }

    #[test]
    fn restriction_merges_coinciding_generators() {
        let g = group(&[], vec![MatQ::from_i64(&[&[1, 0], &[0, 1]]), MatQ::from_i64(&[&[1, 1], &[0, 1]])]);
        let r = restrict_action(&g, &line(&[1, 0])).unwrap();
        assert_eq!(r.num_generators(), 1);
        assert_eq!(r.weights(), &[int(1)]);
    }

    #[test]
    fn va_examples() {
        let b = SearchBudget::default();
        let r = is_virtually_abelian(&group(&[2], vec![t()]), &b);
        match &r {
            VAResult::VirtuallyAbelian(c) => assert_eq!(c.index, 1),
            other => panic!("{other:?}"),
        }
        let cat = group(&[], vec![MatQ::from_i64(&[&[2, 1], &[1, 1]])]);
        assert!(is_virtually_abelian(&cat, &b).is_virtually_abelian());
        let s = sanov();
        let r = is_virtually_abelian(&s, &b);
        assert!(r.is_not_virtually_abelian());
        assert!(verify_va_result(&s, &r).is_ok());
    }

    #[test]
    fn finite_layer_certificate() {
        let s6 = MatQ::from_i64(&[&[0, -1], &[1, 1]]);
        let refl = MatQ::from_i64(&[&[0, 1], &[1, 0]]);
        let d6 = group(&[], vec![s6, refl]);
        match is_virtually_abelian(&d6, &SearchBudget::default()) {
            VAResult::VirtuallyAbelian(c) => {
                assert_eq!(c.layer, AbelianLayer::Finite);
                assert_eq!(c.index, 12);
                assert!(verify_va(&d6, &c).is_ok());
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn congruence_layer_certificate() {
        // T and a reflection conjugating T to its inverse: infinite dihedral
        let refl = MatQ::from_i64(&[&[-1, 0], &[0, 1]]);
        let g = group(&[], vec![t(), refl]);
        match is_virtually_abelian(&g, &SearchBudget::default()) {
            VAResult::VirtuallyAbelian(c) => {
                assert!(matches!(c.layer, AbelianLayer::Congruence { .. }));
                assert!(c.index > 1);
                assert!(verify_va(&g, &c).is_ok());
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn va_tampering() {
        let cat = group(&[], vec![MatQ::from_i64(&[&[2, 1], &[1, 1]])]);
        let VAResult::VirtuallyAbelian(c) = is_virtually_abelian(&cat, &SearchBudget::default()) else { panic!() };
        let mut bad = c.clone();
        bad.subgroup_generators = vec![MatQ::from_i64(&[&[1, 2], &[0, 1]]), MatQ::from_i64(&[&[1, 0], &[2, 1]])];
        assert_eq!(verify_va(&cat, &bad).unwrap_err(), "commutator ≠ identity");
        let mut bad = c.clone();
        bad.subgroup_generators.clear();
        assert_eq!(verify_va(&cat, &bad).unwrap_err(), "subgroup generator mismatch");
        let mut bad = c;
        bad.coset_table = vec![vec![1]];
        assert_eq!(verify_va(&cat, &bad).unwrap_err(), "coset table column is not a permutation");
    }

    #[test]
    fn verdict_examples() {
        let b = SearchBudget::default();
        let v = corollary1_verdict(&group(&[2], vec![t()]), &b).unwrap();
        assert_eq!(v.verdict, Verdict::NoGap);
        assert_eq!(v.witness_subspace, Some(line(&[0, 1])));
        assert!(verify_verdict(&group(&[2], vec![t()]), &v).is_ok());

        let cat = group(&[], vec![MatQ::from_i64(&[&[2, 1], &[1, 1]])]);
        let v = corollary1_verdict(&cat, &b).unwrap();
        assert_eq!(v.verdict, Verdict::NoGap);
        assert_eq!(v.witness_subspace, Some(SubspaceQ::full(2)));

        for g in [sl2(), sanov()] {
            let v = corollary1_verdict(&g, &b).unwrap();
            assert_eq!(v.verdict, Verdict::Gap);
            assert!(v.complete);
            assert!(verify_verdict(&g, &v).is_ok());
        }
    }

    #[test]
    fn verdict_uses_the_transposed_action() {
        let g1 = MatQ::from_i64(&[&[1, 2, 0], &[0, 1, 1], &[0, 0, 1]]);
        let g2 = MatQ::from_i64(&[&[1, 0, 0], &[2, 1, 0], &[0, 0, 1]]);
        let b = SearchBudget::default();
        let spec = group(&[], vec![g1, g2]);
        let v = corollary1_verdict(&spec, &b).unwrap();
        assert_eq!(v.verdict, Verdict::NoGap);
        assert_eq!(v.witness_subspace, Some(line(&[0, 0, 1])));
        let v = corollary1_verdict(&spec.transposed(), &b).unwrap();
        assert_eq!(v.verdict, Verdict::Gap);
    }

    #[test]
    fn finite_group_is_flagged() {
        let rot = group(&[], vec![MatQ::from_i64(&[&[0, -1], &[1, 0]])]);
        let v = corollary1_verdict(&rot, &SearchBudget::default()).unwrap();
        assert_eq!(v.verdict, Verdict::NoGap);
        assert_eq!(v.finite_group_order, Some(4));
    }

    #[test]
    fn verdict_tampering() {
        let g = group(&[2], vec![t()]);
        let v = corollary1_verdict(&g, &SearchBudget::default()).unwrap();
        let mut bad = v.clone();
        bad.witness_subspace = Some(line(&[1, 1]));
        assert_eq!(verify_verdict(&g, &bad).unwrap_err(), "subspace not invariant");
        let mut bad = v;
        bad.certificates[0].subspace = line(&[1, 0]);
        assert_eq!(verify_verdict(&g, &bad).unwrap_err(), "subspace not invariant");
        let s = sanov();
        let v = corollary1_verdict(&s, &SearchBudget::default()).unwrap();
        let mut bad = v.clone();
        bad.certificates[0].result = VAResult::Unknown { reason: String::new() };
        assert!(verify_verdict(&s, &bad).is_err());
    }

    #[test]
    fn tiny_budget_only_loses_answers() {
        let tiny = SearchBudget { max_word_length: 1, max_power: 1, finite_cap: 2, congruence_cap: 2, max_candidates: 1 };
        for g in [group(&[2], vec![t()]), sl2(), sanov()] {
            let small = corollary1_verdict(&g, &tiny).unwrap().verdict;
            let big = corollary1_verdict(&g, &SearchBudget::default()).unwrap().verdict;
            assert!(small == Verdict::Unknown || small == big);
        }
    }
}
