//! Invariant subspaces of rational matrix groups by exact module
//! decomposition: socle, isotypic splitting, and commutant zero divisors.

use num_bigint::BigInt;
use num_traits::Zero;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::linalg::{hermite_rows, integer_kernel, is_zero_vec, primitive_integer_vector, span_rref, EchelonBasis, MatQ, VecQ};
use crate::poly::{factor, min_poly, PolyQ};
use crate::sadic::Rational;

/// Largest ambient dimension handled by [`minimal_invariant_subspaces`].
pub const MAX_DIMENSION: usize = 8;

/// A subspace of `Q^d`, stored as its reduced row echelon basis.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct SubspaceQ {
    ambient: usize,
    basis: Vec<VecQ>,
}

impl SubspaceQ {
    pub fn span(ambient: usize, vectors: &[VecQ]) -> Self {
        SubspaceQ { ambient, basis: span_rref(vectors, ambient) }
    }

    pub fn full(ambient: usize) -> Self {
        SubspaceQ { ambient, basis: MatQ::identity(ambient).to_rows() }
    }

    pub fn ambient(&self) -> usize {
        self.ambient
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[VecQ] {
        &self.basis
    }

    fn pivots(&self) -> Vec<usize> {
        self.basis.iter().map(|r| r.iter().position(|x| !x.is_zero()).unwrap()).collect()
    }

    /// Coordinates of `v` in the echelon basis, if `v` lies in the subspace.
    pub fn coordinates(&self, v: &[Rational]) -> Option<VecQ> {
        let coords: VecQ = self.pivots().iter().map(|&p| v[p].clone()).collect();
        let mut w = v.to_vec();
        for (row, c) in self.basis.iter().zip(&coords) {
            for (x, y) in w.iter_mut().zip(row) {
                *x -= y * c;
            }
        }
        is_zero_vec(&w).then_some(coords)
    }

    pub fn contains(&self, v: &[Rational]) -> bool {
        self.coordinates(v).is_some()
    }

    pub fn is_invariant(&self, gens: &[MatQ]) -> bool {
        gens.iter().all(|g| self.basis.iter().all(|b| self.contains(&g.mul_vec(b))))
    }

    /// Matrix of `m` on the subspace in echelon-basis coordinates, or `None`
    /// if the subspace is not `m`-invariant.
    pub fn restrict(&self, m: &MatQ) -> Option<MatQ> {
        let cols = self.basis.iter().map(|b| self.coordinates(&m.mul_vec(b))).collect::<Option<Vec<_>>>()?;
        Some(MatQ::from_columns(&cols))
    }

    /// Subspace spanned by vectors given in echelon-basis coordinates.
    pub fn lift(&self, local: &[VecQ]) -> SubspaceQ {
        let vs: Vec<VecQ> = local.iter().map(|c| self.embed(c)).collect();
        SubspaceQ::span(self.ambient, &vs)
    }

    pub fn embed(&self, local: &[Rational]) -> VecQ {
        let mut v = vec![Rational::zero(); self.ambient];
        for (row, c) in self.basis.iter().zip(local) {
            for (x, y) in v.iter_mut().zip(row) {
                *x += y * c;
            }
        }
        v
    }

    /// Hermite-reduced Z-basis of the lattice `W ∩ Z^d`.
    pub fn lattice_basis(&self) -> Vec<Vec<BigInt>> {
        let b = MatQ::from_rows(self.basis.clone());
        let perp: Vec<Vec<BigInt>> = b.kernel().iter().map(|v| primitive_integer_vector(v)).collect();
        hermite_rows(&integer_kernel(&perp, self.ambient), self.ambient)
    }
}

impl Serialize for SubspaceQ {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        MatQ::from_rows(self.basis.clone()).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for SubspaceQ {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let m = MatQ::deserialize(deserializer)?;
        if m.rows() == 0 || m.cols() == 0 {
            return Err(serde::de::Error::custom("empty subspace basis"));
        }
        let s = SubspaceQ::span(m.cols(), &m.to_rows());
        if s.dim() != m.rows() {
            return Err(serde::de::Error::custom("subspace basis is linearly dependent"));
        }
        Ok(s)
    }
}

fn flatten(m: &MatQ) -> VecQ {
    m.entries().to_vec()
}

/// Basis of the unital algebra generated by `gens`, as a list of matrices
/// (closure of `{I}` under right multiplication by generators).
pub fn algebra_closure(gens: &[MatQ], n: usize) -> Vec<MatQ> {
    let mut echelon = EchelonBasis::new(n * n);
    let mut basis = vec![MatQ::identity(n)];
    echelon.insert(&flatten(&basis[0]));
    let mut i = 0;
    while i < basis.len() {
        for g in gens {
            let m = &basis[i] * g;
            if echelon.insert(&flatten(&m)) {
                basis.push(m);
            }
        }
        i += 1;
    }
    basis
}

fn combine(basis: &[MatQ], coeffs: &[Rational]) -> MatQ {
    let n = basis[0].rows();
    let mut acc = MatQ::zeros(n, basis[0].cols());
    for (b, c) in basis.iter().zip(coeffs) {
        if !c.is_zero() {
            acc = &acc + &b.scale(c);
        }
    }
    acc
}

/// Jacobson radical as the kernel of the trace form `(x, y) ↦ tr(xy)`,
/// which is exact in characteristic zero.
pub fn radical_basis(alg: &[MatQ]) -> Vec<MatQ> {
    let k = alg.len();
    let mut gram = MatQ::zeros(k, k);
    for i in 0..k {
        for j in i..k {
            let t = (&alg[i] * &alg[j]).trace();
            gram[(i, j)] = t.clone();
            gram[(j, i)] = t;
        }
    }
    gram.kernel().iter().map(|c| combine(alg, c)).collect()
}

/// Socle of `Q^n` under `gens`: the common kernel of the radical.
pub fn socle(gens: &[MatQ], n: usize) -> SubspaceQ {
    let rad = radical_basis(&algebra_closure(gens, n));
    if rad.is_empty() {
        return SubspaceQ::full(n);
    }
    let rows: Vec<VecQ> = rad.iter().flat_map(MatQ::to_rows).collect();
    SubspaceQ::span(n, &MatQ::from_rows(rows).kernel())
}

/// Basis of `{X : X·a_g = b_g·X for all g}`, with `X` of shape `dim b × dim a`.
pub fn hom_basis(src: &[MatQ], dst: &[MatQ]) -> Vec<MatQ> {
    let k = src[0].rows();
    let p = dst[0].rows();
    let mut rows = Vec::new();
    for (a, b) in src.iter().zip(dst) {
        for i in 0..p {
            for j in 0..k {
                let mut row = vec![Rational::zero(); p * k];
                for l in 0..k {
                    row[i * k + l] += &a[(l, j)];
                }
                for l in 0..p {
                    row[l * k + j] -= &b[(i, l)];
                }
                rows.push(row);
            }
        }
    }
    let sys = MatQ::from_rows(rows);
    sys.kernel().into_iter().map(|v| MatQ::from_rows(v.chunks(k).map(<[Rational]>::to_vec).collect())).collect()
}

pub fn commutant_basis(gens: &[MatQ]) -> Vec<MatQ> {
    hom_basis(gens, gens)
}

/// Elements of the span of `alg` commuting with every matrix in `with`.
pub fn centralizer_in(alg: &[MatQ], with: &[MatQ]) -> Vec<MatQ> {
    let k = alg.len();
    let mut rows: Vec<VecQ> = Vec::new();
    let comms: Vec<Vec<VecQ>> = alg.iter().map(|a| with.iter().map(|w| flatten(&(&(a * w) - &(w * a)))).collect()).collect();
    let entries = comms.first().and_then(|c| c.first()).map_or(0, Vec::len);
    for wi in 0..with.len() {
        for e in 0..entries {
            rows.push((0..k).map(|j| comms[j][wi][e].clone()).collect());
        }
    }
    if rows.is_empty() {
        return alg.to_vec();
    }
    MatQ::from_rows(rows).kernel().iter().map(|c| combine(alg, c)).collect()
}

pub fn is_commutative(alg: &[MatQ]) -> bool {
    alg.iter().enumerate().all(|(i, a)| alg[i + 1..].iter().all(|b| a.commutes_with(b)))
}

/// An element of a commutative semisimple algebra whose minimal polynomial has
/// degree equal to the algebra dimension. Candidates run along the moment
/// curve `Σ t^i b_i`; at most `m²(m-1)/2 + 1` are needed.
pub fn primitive_element(comm: &[MatQ]) -> Option<(MatQ, PolyQ)> {
    let m = comm.len();
    let tries = m * m * m.saturating_sub(1) / 2 + 1;
    for t in 0..tries as i64 {
        let coeffs: Vec<Rational> = (0..m as u32).map(|i| Rational::from_integer(BigInt::from(t + 1).pow(i))).collect();
        let z = combine(comm, &coeffs);
        let mp = min_poly(&z);
        if mp.degree() == Some(m) {
            return Some((z, mp));
        }
    }
    None
}

/// True when the span of `alg` (assumed closed, commutative and semisimple)
/// is a field.
pub fn is_field(alg: &[MatQ]) -> bool {
    if !is_commutative(alg) {
        return false;
    }
    match primitive_element(alg) {
        Some((_, mp)) => {
            let f = factor(&mp);
            f.len() == 1 && f[0].1 == 1
        }
        None => false,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MeataxeError {
    #[error("dimension unsupported: {0} > {MAX_DIMENSION}")]
    DimensionUnsupported(usize),
    #[error("no primitive element found for the socle center")]
    NoPrimitiveElement,
}

/// One representative subspace per isomorphism class of simple submodules.
#[derive(Debug, Clone)]
pub struct MinimalSubspaces {
    /// `(subspace, certified_minimal)`, ordered by echelon basis.
    pub subspaces: Vec<(SubspaceQ, bool)>,
    /// Whether every simple submodule is isomorphic to a listed subspace
    /// (checked by [`check_coverage`]).
    pub complete: bool,
}

/// Decomposes `Q^d` under `gens` (acting on column vectors).
///
/// Each isotypic component of the socle contributes one subspace. Inside a
/// component, kernels of commutant elements with reducible minimal polynomial
/// cut it down; a piece whose commutant is commutative is simple. A piece that
/// cannot be cut further is still reported, flagged as not certified minimal:
/// it is isomorphic to a sum of copies of one simple module, so the group acts
/// on it faithfully iff it acts faithfully on that simple module.
pub fn minimal_invariant_subspaces(gens: &[MatQ], d: usize) -> Result<MinimalSubspaces, MeataxeError> {
    if d > MAX_DIMENSION {
        return Err(MeataxeError::DimensionUnsupported(d));
    }
    let soc = socle(gens, d);
    let sgens: Vec<MatQ> = gens.iter().map(|g| soc.restrict(g).expect("socle is invariant")).collect();
    let alg = algebra_closure(&sgens, soc.dim());
    let center = centralizer_in(&alg, &sgens);
    let (z, mp) = primitive_element(&center).ok_or(MeataxeError::NoPrimitiveElement)?;
    let mut out = Vec::new();
    for (f, _) in factor(&mp) {
        let comp = soc.lift(&f.eval_matrix(&z).kernel());
        out.push(refine(comp, gens));
    }
    out.sort();
    let pieces: Vec<SubspaceQ> = out.iter().map(|(s, _)| s.clone()).collect();
    let complete = check_coverage(gens, d, &pieces).is_ok();
    Ok(MinimalSubspaces { subspaces: out, complete })
}

fn refine(u: SubspaceQ, gens: &[MatQ]) -> (SubspaceQ, bool) {
    let local: Vec<MatQ> = gens.iter().map(|g| u.restrict(g).unwrap()).collect();
    let comm = commutant_basis(&local);
    if is_commutative(&comm) {
        return (u, true);
    }
    let mut candidates = comm.clone();
    for i in 0..comm.len() {
        for j in i + 1..comm.len() {
            candidates.push(&comm[i] + &comm[j]);
        }
    }
    for e in &candidates {
        let fs = factor(&min_poly(e));
        if fs.len() >= 2 {
            let k = fs[0].0.eval_matrix(e).kernel();
            return refine(u.lift(&k), gens);
        }
    }
    (u, false)
}

/// Checks that `pieces` are invariant, lie in the socle, are isotypic of
/// pairwise distinct types, and that their isotypic components fill the
/// socle. The returned message names the first failing check.
pub fn check_coverage(gens: &[MatQ], d: usize, pieces: &[SubspaceQ]) -> Result<(), String> {
    let soc = socle(gens, d);
    let sgens: Vec<MatQ> = gens.iter().map(|g| soc.restrict(g).unwrap()).collect();
    let mut total = EchelonBasis::new(d);
    let mut sum = 0;
    for p in pieces {
        if p.ambient() != d || !p.is_invariant(gens) {
            return Err("subspace not invariant".into());
        }
        if !p.basis().iter().all(|b| soc.contains(b)) {
            return Err("subspace outside the socle".into());
        }
        let pg: Vec<MatQ> = gens.iter().map(|g| p.restrict(g).unwrap()).collect();
        let end = commutant_basis(&pg);
        if !is_field(&centralizer_in(&end, &end)) {
            return Err("subspace not isotypic".into());
        }
        let mut comp = EchelonBasis::new(d);
        for x in hom_basis(&pg, &sgens) {
            for j in 0..x.cols() {
                let v = soc.embed(&x.column(j));
                comp.insert(&v);
                total.insert(&v);
            }
        }
        sum += comp.len();
    }
    if sum != soc.dim() || total.len() != soc.dim() {
        return Err("minimal subspace list incomplete".into());
    }
    Ok(())
}

/// Certifies that an invariant subspace is simple: its endomorphism algebra
/// is a field.
pub fn is_certified_simple(gens: &[MatQ], w: &SubspaceQ) -> bool {
    let Some(local) = gens.iter().map(|g| w.restrict(g)).collect::<Option<Vec<_>>>() else {
        return false;
    };
    let sem = radical_basis(&algebra_closure(&local, w.dim())).is_empty();
    sem && is_field(&commutant_basis(&local))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sadic::{int, rat};

    fn v(x: &[i64]) -> VecQ {
        x.iter().map(|&a| int(a)).collect()
    }

    #[test]
    fn enveloping_dimensions() {
        assert_eq!(algebra_closure(&[MatQ::identity(2)], 2).len(), 1);
        assert_eq!(algebra_closure(&[MatQ::from_i64(&[&[1, 1], &[0, 1]])], 2).len(), 2);
        let s = MatQ::from_i64(&[&[0, -1], &[1, 0]]);
        let t = MatQ::from_i64(&[&[1, 1], &[0, 1]]);
        assert_eq!(algebra_closure(&[s, t], 2).len(), 4);
    }

    #[test]
    fn unipotent_fixed_line() {
        let tt = MatQ::from_i64(&[&[1, 0], &[1, 1]]);
        let m = minimal_invariant_subspaces(&[tt], 2).unwrap();
        assert!(m.complete);
        assert_eq!(m.subspaces, vec![(SubspaceQ::span(2, &[v(&[0, 1])]), true)]);
    }

    #[test]
    fn irreducible_plane() {
        let s = MatQ::from_i64(&[&[0, 1], &[-1, 0]]);
        let t = MatQ::from_i64(&[&[1, 0], &[1, 1]]);
        let m = minimal_invariant_subspaces(&[s, t], 2).unwrap();
        assert_eq!(m.subspaces, vec![(SubspaceQ::full(2), true)]);
        let cat = MatQ::from_i64(&[&[2, 1], &[1, 1]]);
        let m = minimal_invariant_subspaces(&[cat], 2).unwrap();
        assert_eq!(m.subspaces, vec![(SubspaceQ::full(2), true)]);
    }

    #[test]
    fn diagonal_eigenlines() {
        let d = MatQ::diagonal(&[int(2), rat(1, 2)]);
        let m = minimal_invariant_subspaces(&[d], 2).unwrap();
        let lines: Vec<SubspaceQ> = m.subspaces.iter().map(|(s, _)| s.clone()).collect();
        assert_eq!(lines, vec![SubspaceQ::span(2, &[v(&[0, 1])]), SubspaceQ::span(2, &[v(&[1, 0])])]);
        assert!(m.complete);
    }

    #[test]
    fn trivial_action_gives_one_line() {
        let m = minimal_invariant_subspaces(&[MatQ::identity(3)], 3).unwrap();
        assert_eq!(m.subspaces.len(), 1);
        assert_eq!(m.subspaces[0].0.dim(), 1);
        assert!(m.subspaces[0].1);
        assert!(m.complete);
    }

    #[test]
    fn repeated_irreducible_is_cut_down() {
        // rotation of order 4 acting diagonally on Q^2 ⊕ Q^2
        let r = MatQ::from_i64(&[&[0, -1, 0, 0], &[1, 0, 0, 0], &[0, 0, 0, -1], &[0, 0, 1, 0]]);
        let m = minimal_invariant_subspaces(&[r.clone()], 4).unwrap();
        assert_eq!(m.subspaces.len(), 1);
        let (w, certified) = &m.subspaces[0];
        assert_eq!(w.dim(), 2);
        assert!(*certified);
        assert!(w.is_invariant(&[r]));
    }

    #[test]
    fn nonsplit_extension_socle() {
        // Sanov block with a nonsplit trivial quotient
        let g1 = MatQ::from_i64(&[&[1, 2, 0], &[0, 1, 1], &[0, 0, 1]]);
        let g2 = MatQ::from_i64(&[&[1, 0, 0], &[2, 1, 0], &[0, 0, 1]]);
        let m = minimal_invariant_subspaces(&[g1.clone(), g2.clone()], 3).unwrap();
        assert_eq!(m.subspaces, vec![(SubspaceQ::span(3, &[v(&[1, 0, 0]), v(&[0, 1, 0])]), true)]);
        let m = minimal_invariant_subspaces(&[g1.transpose(), g2.transpose()], 3).unwrap();
        assert_eq!(m.subspaces, vec![(SubspaceQ::span(3, &[v(&[0, 0, 1])]), true)]);
    }

    #[test]
    fn coverage_failures_are_named() {
        let d = MatQ::diagonal(&[int(2), rat(1, 2)]);
        let e1 = SubspaceQ::span(2, &[v(&[1, 0])]);
        assert_eq!(check_coverage(&[d.clone()], 2, &[e1.clone()]).unwrap_err(), "minimal subspace list incomplete");
        let bad = SubspaceQ::span(2, &[v(&[1, 1])]);
        assert_eq!(check_coverage(&[d.clone()], 2, &[bad]).unwrap_err(), "subspace not invariant");
        assert_eq!(check_coverage(&[d], 2, &[e1.clone(), e1]).unwrap_err(), "minimal subspace list incomplete");
    }

    #[test]
    fn dimension_bound() {
        let err = minimal_invariant_subspaces(&[MatQ::identity(9)], 9).unwrap_err();
        assert_eq!(err.to_string(), "dimension unsupported: 9 > 8");
    }

    #[test]
    fn lattice_basis_is_saturated() {
        let w = SubspaceQ::span(3, &[vec![int(1), rat(1, 2), int(0)]]);
        let b = w.lattice_basis();
        assert_eq!(b, vec![vec![BigInt::from(2), BigInt::from(1), BigInt::from(0)]]);
        assert_eq!(SubspaceQ::full(2).lattice_basis().len(), 2);
    }

    #[test]
    fn subspace_json_rejects_dependent_rows() {
        assert!(serde_json::from_str::<SubspaceQ>(r#"[["1","0"],["2","0"]]"#).is_err());
        let w: SubspaceQ = serde_json::from_str(r#"[["0","2"]]"#).unwrap();
        assert_eq!(w, SubspaceQ::span(2, &[v(&[0, 1])]));
    }
}
