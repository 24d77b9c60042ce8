//! Free-subsemigroup certificates by projective ping-pong.
//!
//! Two elements `a`, `b` and simplicial cones `C_a`, `C_b` with
//! `a(C_a ∪ C_b) ⊂ ±int C_a`, `b(C_a ∪ C_b) ⊂ ±int C_b` and
//! `P(C_a) ∩ P(C_b) = ∅` generate a free semigroup, which forces exponential
//! growth. Floating point only proposes candidates; acceptance is exact.

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_traits::Signed;
use serde::{Deserialize, Serialize};

use crate::linalg::{dot, MatQ, VecQ};
use crate::matgroup::{bfs_ball, word_eval, GroupSpec, Word};
use crate::sadic::Rational;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PingPongCertificate {
    /// Base words; the ping-pong players are `a^power` and `b^power`.
    pub a: Word,
    pub b: Word,
    pub power: u32,
    /// Rows are the cone generators.
    pub cone_a: MatQ,
    pub cone_b: MatQ,
    /// Row 0 separates `C_a` from `C_b`, row 1 separates `C_a` from `-C_b`.
    pub separators: MatQ,
    /// Largest `|λ₂/λ₁|` of the base words; diagnostic only.
    pub contraction: f64,
}

/// Sign `s` with `m·v ∈ s·int(C)` for every row `v` of `src`, where `c_inv`
/// inverts the generator-column matrix of `C`.
fn uniform_sign(m: &MatQ, src: &MatQ, c_inv: &MatQ) -> Option<i8> {
    let mut sign = 0i8;
    for v in src.to_rows() {
        let coords = c_inv.mul_vec(&m.mul_vec(&v));
        let s = if coords.iter().all(Signed::is_positive) {
            1
        } else if coords.iter().all(Signed::is_negative) {
            -1
        } else {
            return None;
        };
        if sign != 0 && s != sign {
            return None;
        }
        sign = s;
    }
    Some(sign)
}

pub fn verify(spec: &GroupSpec, c: &PingPongCertificate) -> Result<(), String> {
    let k = spec.dim();
    if c.a.is_empty() || c.b.is_empty() || c.power == 0 {
        return Err("empty ping-pong word".into());
    }
    let shape_ok = |m: &MatQ, r: usize| m.rows() == r && m.cols() == k;
    if !shape_ok(&c.cone_a, k) || !shape_ok(&c.cone_b, k) || !shape_ok(&c.separators, 2) {
        return Err("malformed ping-pong cones".into());
    }
    let a = word_eval(spec, &c.a).map_err(|e| e.to_string())?.pow(u64::from(c.power));
    let b = word_eval(spec, &c.b).map_err(|e| e.to_string())?.pow(u64::from(c.power));
    let (Some(ia), Some(ib)) = (c.cone_a.transpose().inverse(), c.cone_b.transpose().inverse()) else {
        return Err("cone generators are not independent".into());
    };
    for (m, inv) in [(&a, &ia), (&b, &ib)] {
        for src in [&c.cone_a, &c.cone_b] {
            if uniform_sign(m, src, inv).is_none() {
                return Err("ping-pong inclusion fails".into());
            }
        }
    }
    let f1 = c.separators.row(0);
    let f2 = c.separators.row(1);
    let pos = |f: &[Rational], v: &VecQ| dot(f, v).is_positive();
    let neg = |f: &[Rational], v: &VecQ| dot(f, v).is_negative();
    let ra = c.cone_a.to_rows();
    let rb = c.cone_b.to_rows();
    let separated = ra.iter().all(|v| pos(f1, v) && pos(f2, v)) && rb.iter().all(|v| neg(f1, v) && pos(f2, v));
    if !separated {
        return Err("cones are not separated".into());
    }
    Ok(())
}

struct Proximal {
    word: Word,
    float: DMatrix<f64>,
    ratio: f64,
    attracting: Vec<f64>,
    repelling: Vec<f64>,
}

fn to_dmatrix(m: &MatQ) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), &m.to_f64())
}

fn null_vector(m: DMatrix<f64>) -> Vec<f64> {
    let svd = m.svd(false, true);
    let vt = svd.v_t.expect("requested V^t");
    let (i, _) = svd.singular_values.iter().enumerate().min_by(|x, y| x.1.total_cmp(y.1)).unwrap();
    let v: Vec<f64> = vt.row(i).iter().copied().collect();
    normalize(v)
}

fn normalize(v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

fn proximal(word: &Word, m: &MatQ) -> Option<Proximal> {
    let f = to_dmatrix(m);
    let mut ev: Vec<_> = f.complex_eigenvalues().iter().copied().collect();
    ev.sort_by(|x, y| y.norm().total_cmp(&x.norm()));
    let top = ev[0];
    if top.im.abs() > 1e-9 * top.norm() || ev[1].norm() * 1.001 >= top.norm() {
        return None;
    }
    let k = m.rows();
    let shift = DMatrix::<f64>::identity(k, k) * top.re;
    Some(Proximal {
        word: word.clone(),
        ratio: ev[1].norm() / top.norm(),
        attracting: null_vector(&f - &shift),
        repelling: null_vector(f.transpose() - shift),
        float: f,
    })
}

const DENOMINATOR: i64 = 1 << 20;

fn rationalize(v: &[f64]) -> VecQ {
    v.iter().map(|x| Rational::new(BigInt::from((x * DENOMINATOR as f64).round() as i64), BigInt::from(DENOMINATOR))).collect()
}

/// Simplicial cone with `u` in its interior: `u + ε w_i` for an orthonormal
/// basis `w_i` of `u^⊥`, plus `u - ε Σ w_i`.
fn cone_around(u: &[f64], eps: f64) -> MatQ {
    let k = u.len();
    let mut perp: Vec<Vec<f64>> = Vec::new();
    for i in 0..k {
        let mut w: Vec<f64> = (0..k).map(|j| if i == j { 1.0 } else { 0.0 }).collect();
        for b in std::iter::once(u).chain(perp.iter().map(Vec::as_slice)) {
            let c: f64 = w.iter().zip(b).map(|(x, y)| x * y).sum();
            w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
        }
        let n = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-6 && perp.len() < k - 1 {
            perp.push(w.into_iter().map(|x| x / n).collect());
        }
    }
    let mut rows: Vec<VecQ> = perp.iter().map(|w| rationalize(&u.iter().zip(w).map(|(a, b)| a + eps * b).collect::<Vec<_>>())).collect();
    let last: Vec<f64> = (0..k).map(|j| u[j] - eps * perp.iter().map(|w| w[j]).sum::<f64>()).collect();
    rows.push(rationalize(&last));
    MatQ::from_rows(rows)
}

fn float_screen(a: &DMatrix<f64>, b: &DMatrix<f64>, ca: &MatQ, cb: &MatQ) -> bool {
    let fa = to_dmatrix(ca);
    let fb = to_dmatrix(cb);
    let (Some(ia), Some(ib)) = (fa.transpose().try_inverse(), fb.transpose().try_inverse()) else {
        return false;
    };
    let maps = |m: &DMatrix<f64>, inv: &DMatrix<f64>| {
        [&fa, &fb].iter().all(|src| {
            let coords = inv * m * src.transpose();
            coords.iter().all(|x| *x > 0.0) || coords.iter().all(|x| *x < 0.0)
        })
    };
    maps(a, &ia) && maps(b, &ib)
}

fn normalized_power(m: &DMatrix<f64>, e: u32) -> DMatrix<f64> {
    let mut acc = DMatrix::<f64>::identity(m.nrows(), m.ncols());
    for _ in 0..e {
        acc = &acc * m;
        let s = acc.amax();
        if s > 0.0 {
            acc /= s;
        }
    }
    acc
}

/// Searches pairs of proximal elements among words of length at most
/// `max_word_length` for an exactly verified ping-pong certificate.
pub fn search(spec: &GroupSpec, max_word_length: usize, max_power: u32, max_candidates: usize) -> Option<PingPongCertificate> {
    if spec.dim() < 2 {
        return None;
    }
    let ball = bfs_ball(spec, max_word_length, 20_000);
    let cands: Vec<Proximal> =
        ball.elements.iter().zip(&ball.words).skip(1).filter_map(|(m, w)| proximal(w, m)).take(max_candidates).collect();
    let powers: Vec<u32> = (0..8).map(|i| 1u32 << i).filter(|&p| p <= max_power).collect();
    for i in 0..cands.len() {
        for j in i + 1..cands.len() {
            if let Some(c) = try_pair(spec, &cands[i], &cands[j], &powers) {
                return Some(c);
            }
        }
    }
    None
}

fn fdot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn try_pair(spec: &GroupSpec, p: &Proximal, q: &Proximal, powers: &[u32]) -> Option<PingPongCertificate> {
    let ua = &p.attracting;
    let mut ub = q.attracting.clone();
    if fdot(ua, &ub) < 0.0 {
        ub.iter_mut().for_each(|x| *x = -*x);
    }
    let cos = fdot(ua, &ub);
    if cos > 1.0 - 1e-6 || fdot(&p.repelling, &ub).abs() < 1e-6 || fdot(&q.repelling, ua).abs() < 1e-6 {
        return None;
    }
    let diff: Vec<f64> = ua.iter().zip(&ub).map(|(x, y)| x - y).collect();
    let sum: Vec<f64> = ua.iter().zip(&ub).map(|(x, y)| x + y).collect();
    let separators = MatQ::from_rows(vec![rationalize(&normalize(diff)), rationalize(&normalize(sum))]);
    for &power in powers {
        let fa = normalized_power(&p.float, power);
        let fb = normalized_power(&q.float, power);
        for eps in [0.3, 0.1, 0.03, 0.01, 0.001] {
            let cone_a = cone_around(ua, eps);
            let cone_b = cone_around(&ub, eps);
            if !float_screen(&fa, &fb, &cone_a, &cone_b) {
                continue;
            }
            let cert = PingPongCertificate {
                a: p.word.clone(),
                b: q.word.clone(),
                power,
                cone_a,
                cone_b,
                separators: separators.clone(),
                contraction: p.ratio.max(q.ratio),
            };
            if verify(spec, &cert).is_ok() {
                return Some(cert);
            }
        }
    }
    None
}

impl PingPongCertificate {
    /// The two players `a^power`, `b^power`.
    pub fn players(&self, spec: &GroupSpec) -> Option<(MatQ, MatQ)> {
        let a = word_eval(spec, &self.a).ok()?.pow(u64::from(self.power));
        let b = word_eval(spec, &self.b).ok()?.pow(u64::from(self.power));
        Some((a, b))
    }
}
