//! Finite Heisenberg groups `H(Z/N)`, their Schrödinger representations,
//! Weil intertwiners and the two-norm bound combiner.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matgroup::GroupSpec;
use crate::sadic::{is_prime, mod_inverse, Rational};

pub type CMat = DMatrix<Complex64>;

/// Largest representation dimension `N^n` handled by the dense solvers.
pub const MAX_DIMENSION: usize = 125;

const NULL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HeisenbergError {
    #[error("modulus mismatch: {0} vs {1}")]
    ModulusMismatch(u64, u64),
    #[error("degree mismatch: {0} vs {1}")]
    DegreeMismatch(usize, usize),
    #[error("modulus {0} must be odd")]
    EvenModulus(u64),
    #[error("modulus {0} must be an odd prime")]
    NotOddPrime(u64),
    #[error("{t} is not a unit mod {modulus}")]
    NonUnit { t: u64, modulus: u64 },
    #[error("matrix is not symplectic mod {0}")]
    NotSymplectic(u64),
    #[error("matrix has shape {got}, expected {expected}x{expected}")]
    Shape { expected: usize, got: String },
    #[error("representation dimension {0} exceeds {MAX_DIMENSION}")]
    TooLarge(usize),
    #[error("Stone–von Neumann failure: intertwiner space has dimension {0}")]
    StoneVonNeumann(usize),
    #[error("norm {0} outside [0, 1]")]
    OutOfRange(f64),
    #[error("degree must be positive")]
    ZeroDegree,
    #[error("entry {0} is not defined mod {1}")]
    BadReduction(String, u64),
}

/// `((x, y), t)` with all coordinates reduced mod `N`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FiniteHeisenbergElement {
    pub modulus: u64,
    pub x: Vec<u64>,
    pub y: Vec<u64>,
    pub t: u64,
}

impl FiniteHeisenbergElement {
    pub fn new(modulus: u64, x: &[i64], y: &[i64], t: i64) -> Self {
        let r = |v: i64| v.rem_euclid(modulus as i64) as u64;
        FiniteHeisenbergElement { modulus, x: x.iter().map(|&v| r(v)).collect(), y: y.iter().map(|&v| r(v)).collect(), t: r(t) }
    }

    pub fn identity(modulus: u64, n: usize) -> Self {
        FiniteHeisenbergElement { modulus, x: vec![0; n], y: vec![0; n], t: 0 }
    }

    pub fn central(modulus: u64, n: usize, t: u64) -> Self {
        FiniteHeisenbergElement { t: t % modulus, ..Self::identity(modulus, n) }
    }

    pub fn degree(&self) -> usize {
        self.x.len()
    }

    pub fn inverse(&self) -> Self {
        let m = self.modulus;
        let neg = |v: &u64| (m - v) % m;
        FiniteHeisenbergElement { modulus: m, x: self.x.iter().map(neg).collect(), y: self.y.iter().map(neg).collect(), t: neg(&self.t) }
    }

    pub fn random(rng: &mut impl Rng, modulus: u64, n: usize) -> Self {
        FiniteHeisenbergElement {
            modulus,
            x: (0..n).map(|_| rng.gen_range(0..modulus)).collect(),
            y: (0..n).map(|_| rng.gen_range(0..modulus)).collect(),
            t: rng.gen_range(0..modulus),
        }
    }

    fn vector(&self) -> Vec<u64> {
        self.x.iter().chain(&self.y).copied().collect()
    }
}

/// `β((x,y),(x',y')) = x·y' − y·x' mod N`.
pub fn symplectic_pairing(a: &FiniteHeisenbergElement, b: &FiniteHeisenbergElement) -> u64 {
    let m = a.modulus;
    let d = |u: &[u64], v: &[u64]| u.iter().zip(v).fold(0, |acc, (p, q)| (acc + p * q) % m);
    (d(&a.x, &b.y) + m - d(&a.y, &b.x)) % m
}

pub fn heisenberg_mul(a: &FiniteHeisenbergElement, b: &FiniteHeisenbergElement) -> Result<FiniteHeisenbergElement, HeisenbergError> {
    if a.modulus != b.modulus {
        return Err(HeisenbergError::ModulusMismatch(a.modulus, b.modulus));
    }
    if a.degree() != b.degree() {
        return Err(HeisenbergError::DegreeMismatch(a.degree(), b.degree()));
    }
    let m = a.modulus;
    let add = |u: &[u64], v: &[u64]| u.iter().zip(v).map(|(p, q)| (p + q) % m).collect();
    Ok(FiniteHeisenbergElement { modulus: m, x: add(&a.x, &b.x), y: add(&a.y, &b.y), t: (a.t + b.t + symplectic_pairing(a, b)) % m })
}

/// Symplectic matrix over `Z/N`, row-major, size `2n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpMat {
    pub modulus: u64,
    pub size: usize,
    pub entries: Vec<u64>,
}

impl SpMat {
    pub fn identity(modulus: u64, n: usize) -> Self {
        let size = 2 * n;
        let mut entries = vec![0; size * size];
        for i in 0..size {
            entries[i * size + i] = 1 % modulus;
        }
        SpMat { modulus, size, entries }
    }

    /// `[[0, I], [−I, 0]]`.
    pub fn j(modulus: u64, n: usize) -> Self {
        let size = 2 * n;
        let mut entries = vec![0; size * size];
        for i in 0..n {
            entries[i * size + n + i] = 1;
            entries[(n + i) * size + i] = modulus - 1;
        }
        SpMat { modulus, size, entries }
    }

    pub fn from_i64(modulus: u64, rows: &[&[i64]]) -> Result<Self, HeisenbergError> {
        let size = rows.len();
        let entries = rows.iter().flat_map(|r| r.iter().map(|&v| v.rem_euclid(modulus as i64) as u64)).collect::<Vec<_>>();
        if size % 2 != 0 || entries.len() != size * size {
            return Err(HeisenbergError::Shape {
                expected: size + size % 2,
                got: format!("{}x{}", size, rows.first().map_or(0, |r| r.len())),
            });
        }
        let m = SpMat { modulus, size, entries };
        m.check()?;
        Ok(m)
    }

    /// Reduction of a rational matrix mod `N`, which must be symplectic.
    pub fn reduce(m: &crate::linalg::MatQ, modulus: u64) -> Result<Self, HeisenbergError> {
        let size = m.rows();
        if !m.is_square() || size % 2 != 0 {
            return Err(HeisenbergError::Shape { expected: size + size % 2, got: format!("{}x{}", m.rows(), m.cols()) });
        }
        let nb = num_bigint::BigInt::from(modulus);
        let entries = m
            .entries()
            .iter()
            .map(|q: &Rational| {
                let inv = mod_inverse(q.denom(), &nb).ok_or_else(|| HeisenbergError::BadReduction(q.to_string(), modulus))?;
                let r = num_integer::Integer::mod_floor(&(q.numer() * inv), &nb);
                Ok(num_traits::ToPrimitive::to_u64(&r).unwrap())
            })
            .collect::<Result<Vec<_>, _>>()?;
        let g = SpMat { modulus, size, entries };
        g.check()?;
        Ok(g)
    }

    pub fn n(&self) -> usize {
        self.size / 2
    }

    pub fn at(&self, i: usize, j: usize) -> u64 {
        self.entries[i * self.size + j]
    }

    pub fn mul(&self, other: &SpMat) -> SpMat {
        let (k, m) = (self.size, self.modulus);
        let mut entries = vec![0; k * k];
        for i in 0..k {
            for j in 0..k {
                entries[i * k + j] = (0..k).fold(0, |acc, l| (acc + self.at(i, l) * other.at(l, j)) % m);
            }
        }
        SpMat { modulus: m, size: k, entries }
    }

    pub fn transpose(&self) -> SpMat {
        let k = self.size;
        let entries = (0..k * k).map(|p| self.at(p % k, p / k)).collect();
        SpMat { entries, ..self.clone() }
    }

    pub fn apply(&self, v: &[u64]) -> Vec<u64> {
        (0..self.size).map(|i| (0..self.size).fold(0, |acc, j| (acc + self.at(i, j) * v[j]) % self.modulus)).collect()
    }

    pub fn is_symplectic(&self) -> bool {
        let j = SpMat::j(self.modulus, self.n());
        self.transpose().mul(&j).mul(self) == j
    }

    fn check(&self) -> Result<(), HeisenbergError> {
        if self.is_symplectic() {
            Ok(())
        } else {
            Err(HeisenbergError::NotSymplectic(self.modulus))
        }
    }

    /// `g·((x,y),t) = (g(x,y), t)`.
    pub fn act(&self, h: &FiniteHeisenbergElement) -> FiniteHeisenbergElement {
        let v = self.apply(&h.vector());
        let n = self.n();
        FiniteHeisenbergElement { modulus: h.modulus, x: v[..n].to_vec(), y: v[n..].to_vec(), t: h.t }
    }

    /// Random element of `Sp_{2n}(Z/N)`: a product of `J` and random
    /// symmetric shears.
    pub fn random(rng: &mut impl Rng, modulus: u64, n: usize) -> SpMat {
        let mut g = SpMat::identity(modulus, n);
        let j = SpMat::j(modulus, n);
        for _ in 0..12 {
            let mut shear = SpMat::identity(modulus, n);
            for a in 0..n {
                for b in a..n {
                    let v = rng.gen_range(0..modulus);
                    shear.entries[a * 2 * n + n + b] = v;
                    shear.entries[b * 2 * n + n + a] = v;
                }
            }
            g = g.mul(&shear);
            if rng.gen_bool(0.5) {
                g = g.mul(&j);
            }
        }
        g
    }
}

fn check_odd(modulus: u64) -> Result<(), HeisenbergError> {
    if modulus % 2 == 0 {
        Err(HeisenbergError::EvenModulus(modulus))
    } else {
        Ok(())
    }
}

fn check_odd_prime(modulus: u64) -> Result<(), HeisenbergError> {
    check_odd(modulus)?;
    if is_prime(modulus) {
        Ok(())
    } else {
        Err(HeisenbergError::NotOddPrime(modulus))
    }
}

/// `π_t((a,b),s)ξ(x) = e(ts)·e(t⟨a, 2x − b⟩)·ξ(x − b)` on functions on
/// `(Z/N)^n`, with `e(u) = exp(2πiu/N)`.
#[derive(Debug, Clone)]
pub struct SchrodingerRep {
    modulus: u64,
    degree: usize,
    t: u64,
    dim: usize,
}

pub fn schrodinger_rep(modulus: u64, degree: usize, t: u64) -> Result<SchrodingerRep, HeisenbergError> {
    check_odd(modulus)?;
    if degree == 0 {
        return Err(HeisenbergError::ZeroDegree);
    }
    if num_integer::gcd(t, modulus) != 1 {
        return Err(HeisenbergError::NonUnit { t, modulus });
    }
    let dim = (modulus as usize).checked_pow(degree as u32).filter(|&d| d <= MAX_DIMENSION).ok_or(HeisenbergError::TooLarge(usize::MAX))?;
    Ok(SchrodingerRep { modulus, degree, t: t % modulus, dim })
}

impl SchrodingerRep {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    /// `exp(2πi u / N)`.
    pub fn e(&self, u: u64) -> Complex64 {
        Complex64::from_polar(1.0, std::f64::consts::TAU * (u % self.modulus) as f64 / self.modulus as f64)
    }

    fn digits(&self, mut idx: usize) -> Vec<u64> {
        let mut out = vec![0; self.degree];
        for k in (0..self.degree).rev() {
            out[k] = (idx % self.modulus as usize) as u64;
            idx /= self.modulus as usize;
        }
        out
    }

    fn index(&self, v: &[u64]) -> usize {
        v.iter().fold(0, |acc, &d| acc * self.modulus as usize + d as usize)
    }

    pub fn matrix(&self, h: &FiniteHeisenbergElement) -> Result<CMat, HeisenbergError> {
        if h.modulus != self.modulus {
            return Err(HeisenbergError::ModulusMismatch(h.modulus, self.modulus));
        }
        if h.degree() != self.degree {
            return Err(HeisenbergError::DegreeMismatch(h.degree(), self.degree));
        }
        let m = self.modulus;
        let mut out = CMat::zeros(self.dim, self.dim);
        for col in 0..self.dim {
            let y = self.digits(col);
            let x: Vec<u64> = y.iter().zip(&h.y).map(|(p, b)| (p + b) % m).collect();
            let inner = h.x.iter().zip(&x).zip(&h.y).fold(0, |acc, ((a, xi), b)| (acc + a * ((2 * xi + m - b) % m)) % m);
            out[(self.index(&x), col)] = self.e(self.t * ((h.t + inner) % m) % m);
        }
        Ok(out)
    }

    /// Generators `(e_i,0,0)`, `(0,e_i,0)`, `(0,0,1)`.
    pub fn generators(&self) -> Vec<FiniteHeisenbergElement> {
        let n = self.degree;
        let mut out = Vec::new();
        for i in 0..n {
            let mut g = FiniteHeisenbergElement::identity(self.modulus, n);
            g.x[i] = 1;
            out.push(g);
        }
        for i in 0..n {
            let mut g = FiniteHeisenbergElement::identity(self.modulus, n);
            g.y[i] = 1;
            out.push(g);
        }
        out.push(FiniteHeisenbergElement::central(self.modulus, n, 1));
        out
    }
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |a, z| a.max(z.norm()))
}

/// Orthonormal basis of `{X : X·P_i = Q_i·X for all i}`, as vectorized
/// column-major matrices.
fn intertwining_space(pairs: &[(CMat, CMat)], dim: usize) -> Vec<CMat> {
    let id = CMat::identity(dim, dim);
    let mut gram = CMat::zeros(dim * dim, dim * dim);
    for (p, q) in pairs {
        let m = p.transpose().kronecker(&id) - id.kronecker(q);
        gram += m.adjoint() * &m;
    }
    let eig = gram.symmetric_eigen();
    eig.eigenvalues
        .iter()
        .enumerate()
        .filter(|(_, &v)| v.abs() < NULL_TOL)
        .map(|(k, _)| CMat::from_column_slice(dim, dim, eig.eigenvectors.column(k).as_slice()))
        .collect()
}

/// Dimension of the commutant of `π_t(H)`.
pub fn commutant_dimension(rep: &SchrodingerRep) -> Result<usize, HeisenbergError> {
    let pairs = rep.generators().iter().map(|h| rep.matrix(h).map(|m| (m.clone(), m))).collect::<Result<Vec<_>, _>>()?;
    Ok(intertwining_space(&pairs, rep.dim).len())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntertwinerDiagnostics {
    pub solution_dim: usize,
    /// `max_h ‖W π(h) W* − π(g h)‖_max` over the generators.
    pub residual: f64,
    /// `‖W* W − I‖_max`.
    pub unitarity: f64,
}

/// The unitary `W(g)` with `W π_t(h) W* = π_t(g h)`, normalized so the
/// first nonzero entry of its first column is real positive.
pub fn metaplectic_intertwiner(g: &SpMat, rep: &SchrodingerRep) -> Result<(CMat, IntertwinerDiagnostics), HeisenbergError> {
    check_odd_prime(rep.modulus)?;
    if g.modulus != rep.modulus {
        return Err(HeisenbergError::ModulusMismatch(g.modulus, rep.modulus));
    }
    if g.n() != rep.degree {
        return Err(HeisenbergError::DegreeMismatch(g.n(), rep.degree));
    }
    g.check()?;
    let gens = rep.generators();
    let pairs = gens.iter().map(|h| Ok((rep.matrix(h)?, rep.matrix(&g.act(h))?))).collect::<Result<Vec<_>, HeisenbergError>>()?;
    let space = intertwining_space(&pairs, rep.dim);
    if space.len() != 1 {
        return Err(HeisenbergError::StoneVonNeumann(space.len()));
    }
    let mut w = space[0].scale((rep.dim as f64).sqrt());
    let lead = w.column(0).iter().copied().find(|z| z.norm() > 1e-6).unwrap();
    w *= lead.conj() / lead.norm();
    let residual = pairs.iter().fold(0.0f64, |acc, (p, q)| acc.max(max_abs(&(&w * p * w.adjoint() - q))));
    let unitarity = max_abs(&(w.adjoint() * &w - CMat::identity(rep.dim, rep.dim)));
    Ok((w, IntertwinerDiagnostics { solution_dim: 1, residual, unitarity }))
}

/// `c(g,h)` with `W(g) W(h) ≈ c · W(gh)`, and the distance of
/// `W(g)W(h)W(gh)*` from the scalar `c·I`.
pub fn cocycle(wg: &CMat, wh: &CMat, wgh: &CMat) -> (Complex64, f64) {
    let d = wg.nrows();
    let prod = wg * wh * wgh.adjoint();
    let c = prod.trace() / d as f64;
    let dev = max_abs(&(&prod - CMat::identity(d, d) * c));
    (c, dev)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorCheck {
    pub tensor_singular_values: Vec<f64>,
    pub permutation_singular_values: Vec<f64>,
    pub discrepancy: f64,
    pub norm_omega: f64,
    pub norm_tensor: f64,
    /// `‖ω(ν)‖² ≤ ‖(ω⊗ω̄)(ν)‖` up to `1e-10`.
    pub cauchy_schwarz: bool,
}

fn sorted_singular_values(m: CMat) -> Vec<f64> {
    let mut s: Vec<f64> = m.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Compares `Σ ν(g) W(g) ⊗ conj W(g)` with the permutation operator of `ν`
/// on functions on `(Z/N)^{2n}`.
pub fn oscillator_tensor_check(measure: &[(SpMat, f64)], rep: &SchrodingerRep) -> Result<TensorCheck, HeisenbergError> {
    check_odd_prime(rep.modulus)?;
    let d = rep.dim;
    let dd = d * d;
    let mut omega = CMat::zeros(d, d);
    let mut tensor = CMat::zeros(dd, dd);
    let mut perm = CMat::zeros(dd, dd);
    let n2 = 2 * rep.degree;
    let m = rep.modulus as usize;
    for (g, w) in measure {
        let (wg, _) = metaplectic_intertwiner(g, rep)?;
        omega += wg.scale(*w);
        tensor += wg.kronecker(&wg.map(|z| z.conj())).scale(*w);
        for src in 0..dd {
            let mut v = vec![0u64; n2];
            let mut idx = src;
            for k in (0..n2).rev() {
                v[k] = (idx % m) as u64;
                idx /= m;
            }
            let gv = g.apply(&v);
            let dst = gv.iter().fold(0, |acc, &x| acc * m + x as usize);
            perm[(dst, src)] += Complex64::new(*w, 0.0);
        }
    }
    let ts = sorted_singular_values(tensor);
    let ps = sorted_singular_values(perm);
    let discrepancy = ts.iter().zip(&ps).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
    let norm_omega = sorted_singular_values(omega)[0];
    let norm_tensor = ts[0];
    Ok(TensorCheck {
        cauchy_schwarz: norm_omega * norm_omega <= norm_tensor + 1e-10,
        tensor_singular_values: ts,
        permutation_singular_values: ps,
        discrepancy,
        norm_omega,
        norm_tensor,
    })
}

/// `ν` of a group spec, reduced mod `N`.
pub fn reduce_measure(spec: &GroupSpec, modulus: u64) -> Result<Vec<(SpMat, f64)>, HeisenbergError> {
    spec.given_measure()
        .into_iter()
        .map(|(l, w)| Ok((SpMat::reduce(spec.letter(l).unwrap(), modulus)?, crate::sadic::rational_to_f64(&w))))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub norm_lambda: f64,
    pub norm_kappa1: f64,
    pub n: usize,
    pub combined: f64,
}

/// Smallest `f64` `y` found with `y^m ≥ q`, checked exactly.
fn root_ceil(q: f64, m: u32) -> f64 {
    if q == 0.0 || q == 1.0 {
        return q;
    }
    let target = Rational::from_float(q).unwrap();
    let mut y = q.powf(1.0 / f64::from(m));
    while num_traits::pow(Rational::from_float(y).unwrap(), m as usize) < target {
        y = f64::from_bits(y.to_bits() + 1);
    }
    y
}

/// `max(norm_lambda^{1/(2n+2)}, norm_kappa1)`, the root rounded up.
pub fn corollary3_bound(norm_lambda: f64, norm_kappa1: f64, n: usize) -> Result<BoundReport, HeisenbergError> {
    for v in [norm_lambda, norm_kappa1] {
        if !(0.0..=1.0).contains(&v) {
            return Err(HeisenbergError::OutOfRange(v));
        }
    }
    if n == 0 {
        return Err(HeisenbergError::ZeroDegree);
    }
    let root = root_ceil(norm_lambda, 2 * n as u32 + 2);
    Ok(BoundReport { norm_lambda, norm_kappa1, n, combined: root.max(norm_kappa1) })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabParams {
    pub modulus: u64,
    pub n: usize,
    pub t: u64,
    pub samples: usize,
    pub random_symplectic: usize,
    pub seed: u64,
}

impl Default for LabParams {
    fn default() -> Self {
        LabParams { modulus: 5, n: 1, t: 1, samples: 100, random_symplectic: 20, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocycleEntry {
    pub g: usize,
    pub h: usize,
    pub value: [f64; 2],
    pub modulus_defect: f64,
    pub scalar_defect: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabReport {
    pub params: LabParams,
    pub dimension: usize,
    pub representation_residual: f64,
    pub central_character_residual: f64,
    pub commutant_dimension: usize,
    pub intertwiners: Vec<IntertwinerDiagnostics>,
    pub max_intertwiner_residual: f64,
    pub cocycles: Vec<CocycleEntry>,
    pub max_cocycle_modulus_defect: f64,
    pub tensor: Option<TensorCheck>,
}

/// Runs the finite-model checks. Random symplectic matrices come from the
/// seed; with a group the cocycle table runs over its generators and the
/// tensor check over its measure, otherwise over the random matrices.
pub fn lab_report(params: &LabParams, group: Option<&GroupSpec>) -> Result<LabReport, HeisenbergError> {
    check_odd_prime(params.modulus)?;
    let rep = schrodinger_rep(params.modulus, params.n, params.t)?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut representation_residual = 0.0f64;
    for _ in 0..params.samples {
        let a = FiniteHeisenbergElement::random(&mut rng, params.modulus, params.n);
        let b = FiniteHeisenbergElement::random(&mut rng, params.modulus, params.n);
        let lhs = rep.matrix(&a)? * rep.matrix(&b)?;
        representation_residual = representation_residual.max(max_abs(&(lhs - rep.matrix(&heisenberg_mul(&a, &b)?)?)));
    }
    let mut central_character_residual = 0.0f64;
    for s in 0..params.modulus {
        let z = rep.matrix(&FiniteHeisenbergElement::central(params.modulus, params.n, s))?;
        let scalar = CMat::identity(rep.dim, rep.dim) * rep.e(params.t * s % params.modulus);
        central_character_residual = central_character_residual.max(max_abs(&(z - scalar)));
    }
    let randoms: Vec<SpMat> = (0..params.random_symplectic).map(|_| SpMat::random(&mut rng, params.modulus, params.n)).collect();
    let mut intertwiners = Vec::new();
    let mut ws = Vec::new();
    for g in &randoms {
        let (w, diag) = metaplectic_intertwiner(g, &rep)?;
        intertwiners.push(diag);
        ws.push(w);
    }
    let (table_mats, measure) = match group {
        Some(spec) => {
            let measure = reduce_measure(spec, params.modulus)?;
            (spec.generators().iter().map(|m| SpMat::reduce(m, params.modulus)).collect::<Result<Vec<_>, _>>()?, measure)
        }
        None => {
            let w = 1.0 / randoms.len().max(1) as f64;
            (randoms.clone(), randoms.iter().map(|g| (g.clone(), w)).collect())
        }
    };
    let table_ws = table_mats.iter().map(|g| metaplectic_intertwiner(g, &rep).map(|r| r.0)).collect::<Result<Vec<_>, _>>()?;
    let mut cocycles = Vec::new();
    for (i, g) in table_mats.iter().enumerate() {
        for (j, h) in table_mats.iter().enumerate() {
            let (wgh, _) = metaplectic_intertwiner(&g.mul(h), &rep)?;
            let (c, dev) = cocycle(&table_ws[i], &table_ws[j], &wgh);
            cocycles.push(CocycleEntry { g: i, h: j, value: [c.re, c.im], modulus_defect: (c.norm() - 1.0).abs(), scalar_defect: dev });
        }
    }
    for k in 0..randoms.len().saturating_sub(1) {
        let (wgh, _) = metaplectic_intertwiner(&randoms[k].mul(&randoms[k + 1]), &rep)?;
        let (c, dev) = cocycle(&ws[k], &ws[k + 1], &wgh);
        cocycles.push(CocycleEntry {
            g: table_mats.len() + k,
            h: table_mats.len() + k + 1,
            value: [c.re, c.im],
            modulus_defect: (c.norm() - 1.0).abs(),
            scalar_defect: dev,
        });
    }
    let tensor = if measure.is_empty() { None } else { Some(oscillator_tensor_check(&measure, &rep)?) };
    Ok(LabReport {
        params: params.clone(),
        dimension: rep.dim,
        representation_residual,
        central_character_residual,
        commutant_dimension: commutant_dimension(&rep)?,
        max_intertwiner_residual: intertwiners.iter().fold(0.0, |a, d| a.max(d.residual).max(d.unitarity)),
        intertwiners,
        max_cocycle_modulus_defect: cocycles.iter().fold(0.0, |a, c| a.max(c.modulus_defect)),
        cocycles,
        tensor,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::MatQ;
    use crate::sadic::PrimeSet;

    fn rep5() -> SchrodingerRep {
        schrodinger_rep(5, 1, 1).unwrap()
    }

    #[test]
    fn product_examples() {
        let a = FiniteHeisenbergElement::new(5, &[1], &[0], 0);
        let b = FiniteHeisenbergElement::new(5, &[0], &[1], 0);
        assert_eq!(heisenberg_mul(&a, &b).unwrap(), FiniteHeisenbergElement::new(5, &[1], &[1], 1));
        let z = heisenberg_mul(&FiniteHeisenbergElement::central(5, 1, 2), &FiniteHeisenbergElement::central(5, 1, 4)).unwrap();
        assert_eq!(z, FiniteHeisenbergElement::central(5, 1, 1));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let a = FiniteHeisenbergElement::random(&mut rng, 7, 2);
            assert_eq!(heisenberg_mul(&a, &a.inverse()).unwrap(), FiniteHeisenbergElement::identity(7, 2));
        }
        let c = FiniteHeisenbergElement::identity(7, 1);
        assert_eq!(heisenberg_mul(&a, &c).unwrap_err(), HeisenbergError::ModulusMismatch(5, 7));
    }

    #[test]
    fn representation_property() {
        let rep = rep5();
        assert!(max_abs(&(rep.matrix(&FiniteHeisenbergElement::identity(5, 1)).unwrap() - CMat::identity(5, 5))) < 1e-15);
        let z = rep.matrix(&FiniteHeisenbergElement::central(5, 1, 1)).unwrap();
        assert!(max_abs(&(z - CMat::identity(5, 5) * rep.e(1))) < 1e-12);
        let rep = schrodinger_rep(3, 2, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let a = FiniteHeisenbergElement::random(&mut rng, 3, 2);
            let b = FiniteHeisenbergElement::random(&mut rng, 3, 2);
            let lhs = rep.matrix(&a).unwrap() * rep.matrix(&b).unwrap();
            assert!(max_abs(&(lhs - rep.matrix(&heisenberg_mul(&a, &b).unwrap()).unwrap())) < 1e-12);
        }
    }

    #[test]
    fn parameter_errors() {
        assert_eq!(schrodinger_rep(5, 1, 5).unwrap_err(), HeisenbergError::NonUnit { t: 5, modulus: 5 });
        assert_eq!(schrodinger_rep(4, 1, 1).unwrap_err(), HeisenbergError::EvenModulus(4));
        let rep9 = schrodinger_rep(9, 1, 1).unwrap();
        assert_eq!(metaplectic_intertwiner(&SpMat::identity(9, 1), &rep9).unwrap_err(), HeisenbergError::NotOddPrime(9));
        assert!(SpMat::from_i64(5, &[&[1, 1], &[1, 1]]).is_err());
    }

    #[test]
    fn irreducible_commutant() {
        assert_eq!(commutant_dimension(&rep5()).unwrap(), 1);
        assert_eq!(commutant_dimension(&schrodinger_rep(3, 2, 1).unwrap()).unwrap(), 1);
    }

    #[test]
    fn identity_intertwiner_is_identity() {
        let (w, d) = metaplectic_intertwiner(&SpMat::identity(5, 1), &rep5()).unwrap();
        assert_eq!(d.solution_dim, 1);
        assert!(max_abs(&(w - CMat::identity(5, 5))) < 1e-10);
    }

    #[test]
    fn j_gives_a_fourier_matrix() {
        let rep = rep5();
        let (w, d) = metaplectic_intertwiner(&SpMat::j(5, 1), &rep).unwrap();
        assert!(d.residual < 1e-10);
        // W = W[0,0] · (e(c x y)) for some c, all entries of modulus 1/√5
        let c =
            (0..5).find(|&c| (0..5).all(|x| (0..5).all(|y| (w[(x, y)] - w[(0, 0)] * rep.e(c * (x * y) as u64 % 5) * 1.0).norm() < 1e-10)));
        assert!(c.is_some());
        assert!(w.iter().all(|z| (z.norm() - 1.0 / 5f64.sqrt()).abs() < 1e-10));
    }

    #[test]
    fn cocycles_are_unimodular() {
        let rep = rep5();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10 {
            let g = SpMat::random(&mut rng, 5, 1);
            let h = SpMat::random(&mut rng, 5, 1);
            assert!(g.is_symplectic());
            let (wg, _) = metaplectic_intertwiner(&g, &rep).unwrap();
            let (wh, _) = metaplectic_intertwiner(&h, &rep).unwrap();
            let (wgh, _) = metaplectic_intertwiner(&g.mul(&h), &rep).unwrap();
            let (c, dev) = cocycle(&wg, &wh, &wgh);
            assert!((c.norm() - 1.0).abs() < 1e-10);
            assert!(dev < 1e-10);
        }
    }

    #[test]
    fn tensor_square_matches_permutation_action() {
        let rep = rep5();
        let trivial = oscillator_tensor_check(&[(SpMat::identity(5, 1), 1.0)], &rep).unwrap();
        assert!(trivial.discrepancy < 1e-12);
        let s = SpMat::from_i64(5, &[&[0, -1], &[1, 0]]).unwrap();
        let t = SpMat::from_i64(5, &[&[1, 1], &[0, 1]]).unwrap();
        let si = SpMat::from_i64(5, &[&[0, 1], &[-1, 0]]).unwrap();
        let ti = SpMat::from_i64(5, &[&[1, -1], &[0, 1]]).unwrap();
        let nu: Vec<_> = [s, si, t, ti].into_iter().map(|g| (g, 0.25)).collect();
        let check = oscillator_tensor_check(&nu, &rep).unwrap();
        assert!(check.discrepancy < 1e-8);
        assert!(check.cauchy_schwarz);
        assert_eq!(check.tensor_singular_values.len(), 25);
    }

    #[test]
    fn reduction_of_rational_generators() {
        let m = MatQ::from_i64(&[&[0, -1], &[1, 0]]);
        assert_eq!(SpMat::reduce(&m, 5).unwrap(), SpMat::from_i64(5, &[&[0, 4], &[1, 0]]).unwrap());
        assert!(SpMat::reduce(&MatQ::from_i64(&[&[2, 0], &[0, 1]]), 5).is_err());
        let spec = GroupSpec::uniform(PrimeSet::empty(), 2, vec![m]).unwrap();
        assert_eq!(reduce_measure(&spec, 5).unwrap().len(), 1);
    }

    #[test]
    fn combiner_examples() {
        assert_eq!(corollary3_bound(1.0, 1.0, 3).unwrap().combined, 1.0);
        let b = corollary3_bound(0.75, 0.5, 1).unwrap().combined;
        assert!((b - 0.930_604_859_102_099_6).abs() < 1e-15);
        assert!(num_traits::pow(Rational::from_float(b).unwrap(), 4) >= Rational::from_float(0.75).unwrap());
        assert_eq!(corollary3_bound(0.0, 0.9, 2).unwrap().combined, 0.9);
        assert_eq!(corollary3_bound(1.2, 0.5, 1).unwrap_err(), HeisenbergError::OutOfRange(1.2));
        assert!(corollary3_bound(f64::NAN, 0.5, 1).is_err());
        assert!(corollary3_bound(0.5, 0.1, 2).unwrap().combined > corollary3_bound(0.5, 0.1, 1).unwrap().combined);
    }

    #[test]
    fn lab_report_defaults() {
        let r = lab_report(&LabParams { random_symplectic: 4, samples: 20, ..Default::default() }, None).unwrap();
        assert_eq!(r.commutant_dimension, 1);
        assert!(r.representation_residual < 1e-12);
        assert!(r.max_cocycle_modulus_defect < 1e-10);
        assert!(r.tensor.unwrap().discrepancy < 1e-8);
    }
}
