//! Univariate polynomials over `Q`, characteristic and minimal polynomials of
//! matrices, and factorization into irreducibles over `Q` (Berlekamp modulo a
//! small prime, Hensel lifting, and Zassenhaus recombination).

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::linalg::{EchelonBasis, MatQ};
use crate::sadic::{format_rational, Rational};

/// Polynomial over `Q`, coefficients from the constant term upward, without
/// trailing zeros (the zero polynomial is empty).
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct PolyQ(Vec<Rational>);

impl PolyQ {
    pub fn new(mut coeffs: Vec<Rational>) -> Self {
        while coeffs.last().is_some_and(Zero::is_zero) {
            coeffs.pop();
        }
        PolyQ(coeffs)
    }

    pub fn from_i64(coeffs: &[i64]) -> Self {
        Self::new(coeffs.iter().map(|&c| Rational::from_integer(BigInt::from(c))).collect())
    }

    pub fn one() -> Self {
        PolyQ(vec![Rational::one()])
    }

    pub fn x() -> Self {
        Self::from_i64(&[0, 1])
    }

    pub fn coeffs(&self) -> &[Rational] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    /// Degree; the zero polynomial reports `None`.
    pub fn degree(&self) -> Option<usize> {
        self.0.len().checked_sub(1)
    }

    pub fn leading(&self) -> Option<&Rational> {
        self.0.last()
    }

    pub fn monic(&self) -> Self {
        match self.leading() {
            None => self.clone(),
            Some(lc) => {
                let inv = lc.recip();
                PolyQ(self.0.iter().map(|c| c * &inv).collect())
            }
        }
    }

    pub fn mul(&self, other: &PolyQ) -> PolyQ {
        if self.is_zero() || other.is_zero() {
            return PolyQ(Vec::new());
        }
        let mut out = vec![Rational::zero(); self.0.len() + other.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in other.0.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        PolyQ::new(out)
    }

    pub fn sub(&self, other: &PolyQ) -> PolyQ {
        let n = self.0.len().max(other.0.len());
        let z = Rational::zero();
        PolyQ::new((0..n).map(|i| self.0.get(i).unwrap_or(&z) - other.0.get(i).unwrap_or(&z)).collect())
    }

    pub fn div_rem(&self, divisor: &PolyQ) -> (PolyQ, PolyQ) {
        let dd = divisor.degree().expect("division by zero polynomial");
        let mut rem = self.0.clone();
        if rem.len() <= dd {
            return (PolyQ(Vec::new()), self.clone());
        }
        let inv = divisor.leading().unwrap().recip();
        let mut quot = vec![Rational::zero(); rem.len() - dd];
        for k in (0..quot.len()).rev() {
            let c = &rem[k + dd] * &inv;
            if !c.is_zero() {
                for (j, d) in divisor.0.iter().enumerate() {
                    rem[k + j] -= &c * d;
                }
            }
            quot[k] = c;
        }
        rem.truncate(dd);
        (PolyQ::new(quot), PolyQ::new(rem))
    }

    /// Monic greatest common divisor.
    pub fn gcd(&self, other: &PolyQ) -> PolyQ {
        let mut a = self.clone();
        let mut b = other.clone();
        while !b.is_zero() {
            let r = a.div_rem(&b).1;
            a = b;
            b = r;
        }
        a.monic()
    }

    pub fn derivative(&self) -> PolyQ {
        PolyQ::new(self.0.iter().enumerate().skip(1).map(|(i, c)| c * Rational::from_integer(BigInt::from(i))).collect())
    }

    pub fn eval(&self, x: &Rational) -> Rational {
        self.0.iter().rev().fold(Rational::zero(), |acc, c| acc * x + c)
    }

    /// Evaluates at a square matrix by Horner's rule.
    pub fn eval_matrix(&self, m: &MatQ) -> MatQ {
        let n = m.rows();
        let mut acc = MatQ::zeros(n, n);
        for c in self.0.iter().rev() {
            acc = &(&acc * m) + &MatQ::identity(n).scale(c);
        }
        acc
    }

    /// True when every coefficient is an integer.
    pub fn is_integral(&self) -> bool {
        self.0.iter().all(|c| c.is_integer())
    }
}

impl fmt::Debug for PolyQ {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let terms: Vec<String> =
            self.0.iter().enumerate().filter(|(_, c)| !c.is_zero()).map(|(i, c)| format!("({})x^{i}", format_rational(c))).collect();
        write!(f, "{}", terms.join(" + "))
    }
}

/// Characteristic polynomial `det(xI - m)` by the Faddeev–LeVerrier recursion.
pub fn char_poly(m: &MatQ) -> PolyQ {
    assert!(m.is_square());
    let n = m.rows();
    let mut coeffs = vec![Rational::zero(); n + 1];
    coeffs[n] = Rational::one();
    let mut aux = MatQ::zeros(n, n);
    for k in 1..=n {
        aux = &(m * &aux) + &MatQ::identity(n).scale(&coeffs[n - k + 1]);
        let t = (m * &aux).trace();
        coeffs[n - k] = -t / Rational::from_integer(BigInt::from(k));
    }
    PolyQ::new(coeffs)
}

/// Minimal polynomial, found as the first linear dependency among powers of `m`.
pub fn min_poly(m: &MatQ) -> PolyQ {
    let n = m.rows();
    let mut powers = vec![MatQ::identity(n)];
    let mut basis = EchelonBasis::new(n * n);
    basis.insert(powers[0].entries());
    loop {
        let next = m * powers.last().unwrap();
        if basis.contains(next.entries()) {
            let cols: Vec<Vec<Rational>> = powers.iter().map(|p| p.entries().to_vec()).collect();
            let a = MatQ::from_columns(&cols);
            let c = a.solve(next.entries()).expect("dependent power lies in span");
            let mut coeffs: Vec<Rational> = c.into_iter().map(|x| -x).collect();
            coeffs.push(Rational::one());
            return PolyQ::new(coeffs);
        }
        basis.insert(next.entries());
        powers.push(next);
    }
}

/// Cyclotomic polynomial `Φ_n`.
pub fn cyclotomic(n: u64) -> PolyQ {
    let mut coeffs = vec![0i64; n as usize + 1];
    coeffs[0] = -1;
    coeffs[n as usize] = 1;
    let mut p = PolyQ::from_i64(&coeffs);
    for d in 1..n {
        if n % d == 0 {
            p = p.div_rem(&cyclotomic(d)).0;
        }
    }
    p
}

/// Euler's totient.
pub fn totient(n: u64) -> u64 {
    (1..=n).filter(|k| k.gcd(&n) == 1).count() as u64
}

/// Monic irreducible factors over `Q` with multiplicities, sorted by degree
/// and then coefficients so the output is deterministic.
pub fn factor(f: &PolyQ) -> Vec<(PolyQ, usize)> {
    let mut out = Vec::new();
    if f.degree().unwrap_or(0) == 0 {
        return out;
    }
    for (part, mult) in squarefree_decomposition(&f.monic()) {
        for g in factor_squarefree(&part) {
            out.push((g, mult));
        }
    }
    out.sort_by(|a, b| a.0.degree().cmp(&b.0.degree()).then_with(|| a.0 .0.cmp(&b.0 .0)).then(a.1.cmp(&b.1)));
    out
}

pub fn is_irreducible(f: &PolyQ) -> bool {
    let fs = factor(f);
    fs.len() == 1 && fs[0].1 == 1
}

/// Yun's algorithm: `f = Π a_i^i` with each `a_i` squarefree and pairwise coprime.
fn squarefree_decomposition(f: &PolyQ) -> Vec<(PolyQ, usize)> {
    let mut out = Vec::new();
    let d = f.derivative();
    let mut a = f.gcd(&d);
    let mut b = f.div_rem(&a).0;
    let mut c = d.div_rem(&a).0;
    let mut dd = c.sub(&b.derivative());
    let mut i = 1;
    while b.degree().unwrap_or(0) > 0 {
        a = b.gcd(&dd);
        if a.degree().unwrap_or(0) > 0 {
            out.push((a.monic(), i));
        }
        b = b.div_rem(&a).0;
        c = dd.div_rem(&a).0;
        dd = c.sub(&b.derivative());
        i += 1;
    }
    out
}

/// Factors a monic squarefree polynomial over `Q`.
fn factor_squarefree(f: &PolyQ) -> Vec<PolyQ> {
    let n = f.degree().unwrap();
    if n == 1 {
        return vec![f.monic()];
    }
    // primitive integer polynomial h with leading coefficient c
    let den = f.0.iter().fold(BigInt::one(), |acc, x| acc.lcm(x.denom()));
    let h: Vec<BigInt> = f.0.iter().map(|x| (x * Rational::from_integer(den.clone())).to_integer()).collect();
    let h = primitive_part(&h);
    let c = h[n].clone();
    // F(x) = c^{n-1} h(x / c) is monic with integer coefficients
    let big_f: Vec<BigInt> = (0..=n).map(|i| if i == n { BigInt::one() } else { &h[i] * c.pow((n - 1 - i) as u32) }).collect();
    zassenhaus_monic(&big_f)
        .into_iter()
        .map(|g| {
            // undo the substitution: g(c x), then primitive part, then monic over Q
            let scaled: Vec<BigInt> = g.iter().enumerate().map(|(i, a)| a * c.pow(i as u32)).collect();
            let prim = primitive_part(&scaled);
            PolyQ::new(prim.into_iter().map(Rational::from_integer).collect()).monic()
        })
        .collect()
}

fn primitive_part(v: &[BigInt]) -> Vec<BigInt> {
    let g = v.iter().fold(BigInt::zero(), |acc, x| acc.gcd(x));
    let mut out: Vec<BigInt> = v.iter().map(|x| x / &g).collect();
    if out.last().is_some_and(|x| x.is_negative()) {
        out.iter_mut().for_each(|x| *x = -x.clone());
    }
    out
}

// ---------------------------------------------------------------------------
// Zassenhaus for monic squarefree integer polynomials

fn zassenhaus_monic(f: &[BigInt]) -> Vec<Vec<BigInt>> {
    let n = f.len() - 1;
    if n <= 1 {
        return vec![f.to_vec()];
    }
    let p = choose_prime(f);
    let fp = reduce_mod(f, p);
    let local = berlekamp(&fp, p);
    if local.len() == 1 {
        return vec![f.to_vec()];
    }
    // Mignotte: coefficients of any factor are below 2^n * |f|_2
    let norm2: BigInt = f.iter().map(|a| a * a).sum();
    let bound = (BigInt::one() << n) * (norm2.sqrt() + BigInt::one());
    let pb = BigInt::from(p);
    let mut k = 1u32;
    let mut modulus = pb.clone();
    while modulus <= &bound * 2 {
        modulus *= &pb;
        k += 1;
    }
    let lifted = hensel_lift_all(f, &local, p, k);
    recombine(f, lifted, &modulus)
}

fn choose_prime(f: &[BigInt]) -> u64 {
    let mut p = 3u64;
    loop {
        if crate::sadic::is_prime(p) {
            let fp = reduce_mod(f, p);
            if fp.len() == f.len() {
                let d = fp_derivative(&fp, p);
                if fp_gcd(&fp, &d, p).len() == 1 {
                    return p;
                }
            }
        }
        p += 2;
    }
}

fn reduce_mod(f: &[BigInt], p: u64) -> Vec<u64> {
    let pb = BigInt::from(p);
    fp_trim(f.iter().map(|a| a.mod_floor(&pb).to_u64().unwrap()).collect())
}

fn recombine(f: &[BigInt], mut local: Vec<Vec<BigInt>>, modulus: &BigInt) -> Vec<Vec<BigInt>> {
    let mut remaining = f.to_vec();
    let mut found = Vec::new();
    let mut size = 1;
    while 2 * size <= local.len() {
        let mut hit = None;
        for subset in subsets(local.len(), size) {
            let mut cand = vec![BigInt::one()];
            for &i in &subset {
                cand = zpoly_mul_mod(&cand, &local[i], modulus);
            }
            let cand: Vec<BigInt> = cand.iter().map(|c| symmetric_mod(c, modulus)).collect();
            if let Some(q) = zpoly_div_monic_exact(&remaining, &cand) {
                hit = Some((subset, cand, q));
                break;
            }
        }
        match hit {
            Some((subset, cand, q)) => {
                found.push(cand);
                remaining = q;
                let mut idx = 0;
                local.retain(|_| {
                    let keep = !subset.contains(&idx);
                    idx += 1;
                    keep
                });
            }
            None => size += 1,
        }
    }
    found.push(remaining);
    found
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            go(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, k, &mut Vec::new(), &mut out);
    out
}

fn symmetric_mod(c: &BigInt, m: &BigInt) -> BigInt {
    let r = c.mod_floor(m);
    if &r * 2 > *m {
        r - m
    } else {
        r
    }
}

fn zpoly_mul_mod(a: &[BigInt], b: &[BigInt], m: &BigInt) -> Vec<BigInt> {
    let mut out = vec![BigInt::zero(); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out.iter().map(|c| c.mod_floor(m)).collect()
}

/// Quotient `a / b` when `b` is monic and divides `a` exactly over `Z`.
fn zpoly_div_monic_exact(a: &[BigInt], b: &[BigInt]) -> Option<Vec<BigInt>> {
    let db = b.len() - 1;
    if a.len() < b.len() {
        return None;
    }
    let mut rem = a.to_vec();
    let mut q = vec![BigInt::zero(); a.len() - db];
    for k in (0..q.len()).rev() {
        let c = rem[k + db].clone();
        if !c.is_zero() {
            for (j, d) in b.iter().enumerate() {
                rem[k + j] -= &c * d;
            }
        }
        q[k] = c;
    }
    rem[..db].iter().all(Zero::is_zero).then_some(q)
}

/// Lifts a factorization `f ≡ Π g_i (mod p)` into monic factors modulo `p^k`.
fn hensel_lift_all(f: &[BigInt], factors: &[Vec<u64>], p: u64, k: u32) -> Vec<Vec<BigInt>> {
    let modulus = BigInt::from(p).pow(k);
    let mut target: Vec<BigInt> = f.iter().map(|c| c.mod_floor(&modulus)).collect();
    let mut out = Vec::new();
    for i in 0..factors.len() - 1 {
        let g = &factors[i];
        let h = factors[i + 1..].iter().fold(vec![1u64], |acc, x| fp_mul(&acc, x, p));
        let (gl, hl) = hensel_lift_pair(&target, g, &h, p, k);
        out.push(gl);
        target = hl;
    }
    out.push(target);
    out
}

fn hensel_lift_pair(target: &[BigInt], g: &[u64], h: &[u64], p: u64, k: u32) -> (Vec<BigInt>, Vec<BigInt>) {
    let modulus = BigInt::from(p).pow(k);
    let (_, _, t) = fp_ext_gcd(g, h, p);
    let mut gl: Vec<BigInt> = g.iter().map(|&c| BigInt::from(c)).collect();
    let mut hl: Vec<BigInt> = h.iter().map(|&c| BigInt::from(c)).collect();
    let mut pj = BigInt::from(p);
    for _ in 1..k {
        let prod = zpoly_mul_mod(&gl, &hl, &modulus);
        let n = target.len().max(prod.len());
        let diff: Vec<BigInt> = (0..n)
            .map(|i| {
                let a = target.get(i).cloned().unwrap_or_default();
                let b = prod.get(i).cloned().unwrap_or_default();
                (a - b).mod_floor(&modulus)
            })
            .collect();
        let e: Vec<u64> = fp_trim(diff.iter().map(|c| (c / &pj).mod_floor(&BigInt::from(p)).to_u64().unwrap()).collect());
        if !e.is_empty() {
            let te = fp_mul(&t, &e, p);
            let b = fp_divrem(&te, g, p).1;
            let num = fp_sub(&e, &fp_mul(&b, h, p), p);
            let a = fp_divrem(&num, g, p).0;
            add_scaled(&mut gl, &b, &pj, &modulus);
            add_scaled(&mut hl, &a, &pj, &modulus);
        }
        pj *= p;
    }
    (gl, hl)
}

fn add_scaled(dst: &mut Vec<BigInt>, src: &[u64], scale: &BigInt, modulus: &BigInt) {
    if dst.len() < src.len() {
        dst.resize(src.len(), BigInt::zero());
    }
    for (d, &s) in dst.iter_mut().zip(src) {
        *d = (&*d + scale * s).mod_floor(modulus);
    }
}

// ---------------------------------------------------------------------------
// Arithmetic in F_p[x], coefficients as u64 with p < 2^31

fn fp_trim(mut v: Vec<u64>) -> Vec<u64> {
    while v.last() == Some(&0) {
        v.pop();
    }
    v
}

fn fp_mul(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0u64; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] = (out[i + j] + x * y) % p;
        }
    }
    fp_trim(out)
}

fn fp_sub(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
    let n = a.len().max(b.len());
    fp_trim((0..n).map(|i| (a.get(i).copied().unwrap_or(0) + p - b.get(i).copied().unwrap_or(0)) % p).collect())
}

fn fp_inv(a: u64, p: u64) -> u64 {
    fp_pow(a, p - 2, p)
}

fn fp_pow(mut a: u64, mut e: u64, p: u64) -> u64 {
    let mut acc = 1;
    a %= p;
    while e > 0 {
        if e & 1 == 1 {
            acc = acc * a % p;
        }
        a = a * a % p;
        e >>= 1;
    }
    acc
}

fn fp_divrem(a: &[u64], b: &[u64], p: u64) -> (Vec<u64>, Vec<u64>) {
    let db = b.len() - 1;
    if a.len() < b.len() {
        return (Vec::new(), a.to_vec());
    }
    let inv = fp_inv(b[db], p);
    let mut rem = a.to_vec();
    let mut q = vec![0u64; a.len() - db];
    for k in (0..q.len()).rev() {
        let c = rem[k + db] * inv % p;
        if c != 0 {
            for (j, &d) in b.iter().enumerate() {
                rem[k + j] = (rem[k + j] + p - c * d % p) % p;
            }
        }
        q[k] = c;
    }
    rem.truncate(db);
    (fp_trim(q), fp_trim(rem))
}

fn fp_monic(a: &[u64], p: u64) -> Vec<u64> {
    match a.last() {
        None => Vec::new(),
        Some(&lc) => {
            let inv = fp_inv(lc, p);
            a.iter().map(|&c| c * inv % p).collect()
        }
    }
}

fn fp_gcd(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    while !b.is_empty() {
        let r = fp_divrem(&a, &b, p).1;
        a = b;
        b = r;
    }
    fp_monic(&a, p)
}

/// Returns `(g, s, t)` with `s a + t b = g = gcd(a, b)`, `g` monic.
fn fp_ext_gcd(a: &[u64], b: &[u64], p: u64) -> (Vec<u64>, Vec<u64>, Vec<u64>) {
    let (mut r0, mut r1) = (a.to_vec(), b.to_vec());
    let (mut s0, mut s1) = (vec![1u64], Vec::new());
    let (mut t0, mut t1) = (Vec::new(), vec![1u64]);
    while !r1.is_empty() {
        let (q, r) = fp_divrem(&r0, &r1, p);
        let s2 = fp_sub(&s0, &fp_mul(&q, &s1, p), p);
        let t2 = fp_sub(&t0, &fp_mul(&q, &t1, p), p);
        r0 = std::mem::replace(&mut r1, r);
        s0 = std::mem::replace(&mut s1, s2);
        t0 = std::mem::replace(&mut t1, t2);
    }
    let inv = fp_inv(*r0.last().unwrap(), p);
    let sc = |v: &[u64]| fp_trim(v.iter().map(|&c| c * inv % p).collect());
    (sc(&r0), sc(&s0), sc(&t0))
}

fn fp_derivative(a: &[u64], p: u64) -> Vec<u64> {
    fp_trim(a.iter().enumerate().skip(1).map(|(i, &c)| (i as u64 % p) * c % p).collect())
}

/// Berlekamp factorization of a monic squarefree polynomial over `F_p`.
fn berlekamp(f: &[u64], p: u64) -> Vec<Vec<u64>> {
    let n = f.len() - 1;
    // rows of Q: x^{ip} mod f
    let xp = fp_powmod_x(p, f, p);
    let mut rows = vec![vec![1u64]];
    for i in 1..n {
        let next = fp_divrem(&fp_mul(&rows[i - 1], &xp, p), f, p).1;
        rows.push(next);
    }
    // left kernel of Q - I: solve (Q - I)^t v = 0
    let mut m = vec![vec![0u64; n]; n];
    for (i, row) in rows.iter().enumerate() {
        for j in 0..n {
            let q = row.get(j).copied().unwrap_or(0);
            let val = if i == j { (q + p - 1) % p } else { q };
            m[j][i] = val;
        }
    }
    let kernel = fp_kernel(m, n, p);
    let r = kernel.len();
    let mut factors = vec![f.to_vec()];
    if r == 1 {
        return factors;
    }
    for v in kernel.iter() {
        let v = fp_trim(v.clone());
        if v.len() <= 1 {
            continue;
        }
        for s in 0..p {
            let shifted = fp_sub(&v, &[s], p);
            let mut next = Vec::new();
            for u in factors {
                if u.len() <= 2 {
                    next.push(u);
                    continue;
                }
                let g = fp_gcd(&u, &shifted, p);
                if g.len() > 1 && g.len() < u.len() {
                    let q = fp_divrem(&u, &g, p).0;
                    next.push(g);
                    next.push(fp_monic(&q, p));
                } else {
                    next.push(u);
                }
            }
            factors = next;
            if factors.len() == r {
                factors.sort();
                return factors;
            }
        }
    }
    factors.sort();
    factors
}

fn fp_powmod_x(e: u64, f: &[u64], p: u64) -> Vec<u64> {
    let mut acc = vec![1u64];
    let mut base = fp_divrem(&[0, 1], f, p).1;
    let mut e = e;
    while e > 0 {
        if e & 1 == 1 {
            acc = fp_divrem(&fp_mul(&acc, &base, p), f, p).1;
        }
        base = fp_divrem(&fp_mul(&base, &base, p), f, p).1;
        e >>= 1;
    }
    acc
}

fn fp_kernel(mut m: Vec<Vec<u64>>, n: usize, p: u64) -> Vec<Vec<u64>> {
    let rows = m.len();
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..n {
        let Some(piv) = (r..rows).find(|&i| m[i][c] != 0) else { continue };
        m.swap(r, piv);
        let inv = fp_inv(m[r][c], p);
        for j in 0..n {
            m[r][j] = m[r][j] * inv % p;
        }
        for i in 0..rows {
            if i != r && m[i][c] != 0 {
                let f = m[i][c];
                for j in 0..n {
                    m[i][j] = (m[i][j] + p - f * m[r][j] % p) % p;
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    let mut basis = Vec::new();
    for free in (0..n).filter(|c| !pivots.contains(c)) {
        let mut v = vec![0u64; n];
        v[free] = 1;
        for (i, &pc) in pivots.iter().enumerate() {
            v[pc] = (p - m[i][free]) % p;
        }
        basis.push(v);
    }
    basis
}
