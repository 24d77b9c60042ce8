//! One PASS/FAIL line per acceptance criterion. Lines go straight to
//! stderr so they show up without `--nocapture`.

use std::io::Write;
use std::path::Path;
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use solgap_cli::{cmd_analyze, cmd_verify, write_atomic, RunArgs};
use solgap_core::criterion::Verdict;
use solgap_core::dual::{dual_act, group_norm_lower, markov_lower_bound, pairing_phase, Character, MarkovParams};
use solgap_core::heisenberg::{corollary3_bound, lab_report, LabParams};
use solgap_core::linalg::MatQ;
use solgap_core::matgroup::GroupSpec;
use solgap_core::sadic::{diagonal_annihilator_defect, int, rat, Place, PrimeSet, Rational, SRational};

struct Outcome {
    ok: bool,
    detail: String,
}

fn outcome(ok: bool, detail: impl Into<String>) -> Outcome {
    Outcome { ok, detail: detail.into() }
}

fn report(id: u32, name: &str, limit: Duration, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let out = f();
    let took = start.elapsed();
    let in_time = took <= limit;
    let ok = out.ok && in_time;
    let timing = if in_time { String::new() } else { format!(" over the {:.0?} limit", limit) };
    let line = format!("{} criterion {id}: {name} [{:.2?}{timing}] {}", if ok { "PASS" } else { "FAIL" }, took, out.detail);
    writeln!(std::io::stderr().lock(), "{line}").unwrap();
    ok
}

fn primes(p: &[u64]) -> PrimeSet {
    PrimeSet::new(p.iter().copied()).unwrap()
}

fn random_s_rational(rng: &mut ChaCha8Rng, s: &[u64]) -> Rational {
    let mut den = BigInt::from(1);
    for &p in s {
        den *= BigInt::from(p).pow(rng.gen_range(0..12u32));
    }
    let num = BigInt::from(rng.gen_range(-1_000_000_000i64..1_000_000_000));
    Rational::new(num, den)
}

fn annihilator() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut checked = 0;
    for s in [&[2u64][..], &[2, 3], &[2, 3, 5]] {
        for _ in 0..1000 {
            let q = SRational::new(random_s_rational(&mut rng, s), primes(s)).unwrap();
            if !diagonal_annihilator_defect(&q).is_integer() {
                return outcome(false, format!("non-integral defect for {} over {s:?}", q.value()));
            }
            checked += 1;
        }
    }
    outcome(true, format!("{checked} defects integral"))
}

fn verdicts(dir: &Path) -> Outcome {
    let cases = [
        ("unipotent", r#"[[["1","1"],["0","1"]]]"#, Verdict::NoGap),
        ("cat_map", r#"[[["2","1"],["1","1"]]]"#, Verdict::NoGap),
        ("sl2", r#"[[["0","-1"],["1","0"]], [["1","1"],["0","1"]]]"#, Verdict::Gap),
        ("sanov", r#"[[["1","2"],["0","1"]], [["1","0"],["2","1"]]]"#, Verdict::Gap),
    ];
    let mut seen = Vec::new();
    for (name, gens, expected) in cases {
        let cfg = dir.join(format!("{name}.json"));
        std::fs::write(&cfg, format!(r#"{{"group": {{"S": [], "d": 2, "generators": {gens}}}}}"#)).unwrap();
        let r = match cmd_analyze(&RunArgs { config: cfg, ..Default::default() }) {
            Ok(r) => r,
            Err(e) => return outcome(false, format!("{name}: {e}")),
        };
        let got = r.verdict.as_ref().unwrap().verdict;
        if got != expected {
            return outcome(false, format!("{name}: expected {expected:?}, got {got:?}"));
        }
        let out = dir.join(format!("{name}_report.json"));
        write_atomic(&out, serde_json::to_string(&r).unwrap().as_bytes()).unwrap();
        if let Err(e) = cmd_verify(&out).unwrap() {
            return outcome(false, format!("{name}: certificate rejected: {e}"));
        }
        seen.push(format!("{name}={got:?}"));
    }
    outcome(true, format!("{} (all re-verified)", seen.join(" ")))
}

fn sanov() -> GroupSpec {
    GroupSpec::uniform(PrimeSet::empty(), 2, vec![MatQ::from_i64(&[&[1, 2], &[0, 1]]), MatQ::from_i64(&[&[1, 0], &[2, 1]])]).unwrap()
}

/// Closed walks on the 4-regular tree over `4^{2k}`, 2k = 2..24.
const TREE_RETURNS: [(i64, i64); 12] = [
    (1, 4),
    (7, 64),
    (29, 512),
    (523, 16384),
    (2483, 131072),
    (24419, 2097152),
    (123181, 16777216),
    (5068915, 1073741824),
    (26477975, 8589934592),
    (280099481, 137438953472),
    (1496955595, 1099511627776),
    (32281933727, 35184372088832),
];

fn kesten() -> Outcome {
    let g = group_norm_lower(&sanov(), 24, 10_000_000);
    if g.estimate.truncated || g.exact.len() != 12 {
        return outcome(false, format!("sequence truncated at {} terms", g.exact.len()));
    }
    for (k, &(n, d)) in TREE_RETURNS.iter().enumerate() {
        if g.exact[k] != rat(n, d) {
            return outcome(false, format!("p_{} = {} differs from the tree count {n}/{d}", 2 * k + 2, g.exact[k]));
        }
    }
    let vals: Vec<f64> = g.estimate.lower_bounds.iter().map(|b| b.value).collect();
    let ceiling = 3f64.sqrt() / 2.0 + 1e-12;
    let monotone = vals.windows(2).all(|w| w[0] <= w[1]);
    let bounded = vals.iter().all(|&v| v <= ceiling);
    let last = *vals.last().unwrap();
    let window = (0.80..=0.8661).contains(&last);
    outcome(
        monotone && bounded && window,
        format!(
            "p2={} p4={} nondecreasing={monotone} all<=sqrt(3)/2={bounded} term@24={last:.6} in [0.80,0.8661]={window} (pure root@24={:.6})",
            g.return_probabilities[0].1,
            g.return_probabilities[1].1,
            g.root_bounds.last().unwrap().value
        ),
    )
}

/// cos(π/102).
const PATH_ORACLE: f64 = 0.999_525_719_713_365_874_67;

fn amenable_endpoint() -> Outcome {
    let spec = GroupSpec::uniform(primes(&[2]), 2, vec![MatQ::from_i64(&[&[1, 1], &[0, 1]])]).unwrap();
    let chi = Character::new(vec![int(1), int(0)], primes(&[2])).unwrap();
    let e = markov_lower_bound(&spec, &chi, &MarkovParams { radius: 50, ..Default::default() }).unwrap();
    let v = e.last().unwrap();
    let err = (v - PATH_ORACLE).abs();
    outcome(err < 1e-6, format!("final={v:.12} oracle={PATH_ORACLE:.12} |diff|={err:.2e}"))
}

fn pairing() -> Outcome {
    let s = primes(&[2, 3]);
    let pool = [
        MatQ::from_i64(&[&[1, 1], &[0, 1]]),
        MatQ::from_i64(&[&[1, 0], &[1, 1]]),
        MatQ::from_i64(&[&[0, -1], &[1, 0]]),
        MatQ::diagonal(&[int(2), rat(1, 3)]),
        MatQ::diagonal(&[rat(1, 2), int(-3)]),
        MatQ::from_rows(vec![vec![int(1), rat(5, 6)], vec![int(0), int(1)]]),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let places = [Place::Infinite, Place::Prime(2), Place::Prime(3), Place::Prime(5), Place::Prime(7)];
    for trial in 0..500 {
        let len = rng.gen_range(0..8);
        let mut g = MatQ::identity(2);
        for _ in 0..len {
            let m = &pool[rng.gen_range(0..pool.len())];
            g = if rng.gen_bool(0.5) { &g * m } else { &g * &m.inverse().unwrap() };
        }
        let x: Vec<Rational> = (0..2).map(|_| random_s_rational(&mut rng, &[2, 3])).collect();
        let mut c: Vec<Rational> = (0..2).map(|_| random_s_rational(&mut rng, &[2, 3])).collect();
        if c.iter().all(|v| *v == int(0)) {
            c[0] = int(1);
        }
        let chi = Character::new(c, s.clone()).unwrap();
        let gchi = dual_act(&g, &chi).unwrap();
        let gx = g.mul_vec(&x);
        for &p in &places {
            if pairing_phase(&gx, &chi, p) != pairing_phase(&x, &gchi, p) {
                return outcome(false, format!("phase mismatch at trial {trial}, place {p:?}"));
            }
        }
    }
    outcome(true, "500 triples, places {inf, 2, 3, 5, 7}, exact equality")
}

fn heisenberg() -> Outcome {
    let params = LabParams { modulus: 5, n: 1, t: 1, samples: 100, random_symplectic: 20, seed: 11 };
    let r = match lab_report(&params, None) {
        Ok(r) => r,
        Err(e) => return outcome(false, e.to_string()),
    };
    let dims_ok = r.intertwiners.len() == 20 && r.intertwiners.iter().all(|d| d.solution_dim == 1);
    let tensor = r.tensor.as_ref().unwrap();
    let ok = r.representation_residual < 1e-12
        && r.central_character_residual < 1e-12
        && dims_ok
        && r.max_intertwiner_residual < 1e-10
        && r.max_cocycle_modulus_defect < 1e-10
        && tensor.discrepancy < 1e-8
        && tensor.cauchy_schwarz
        && r.commutant_dimension == 1;
    outcome(
        ok,
        format!(
            "rep={:.1e} central={:.1e} intertwiner dims all 1={dims_ok} residual={:.1e} cocycle |c|-1={:.1e} tensor spectra={:.1e} commutant={}",
            r.representation_residual,
            r.central_character_residual,
            r.max_intertwiner_residual,
            r.max_cocycle_modulus_defect,
            tensor.discrepancy,
            r.commutant_dimension
        ),
    )
}

/// 0.75^{1/4} to 20 digits.
const COMBINER_ORACLE: f64 = 0.930_604_859_102_099_598_94;

fn combiner() -> Outcome {
    let b = corollary3_bound(0.75, 0.5, 1).unwrap().combined;
    let err = (b - COMBINER_ORACLE).abs();
    let grid: Vec<f64> = (0..20).map(|i| i as f64 / 19.0).collect();
    let mut monotone = true;
    for n in 1..=3 {
        for (i, &l) in grid.iter().enumerate() {
            for (j, &k) in grid.iter().enumerate() {
                let v = corollary3_bound(l, k, n).unwrap().combined;
                if i + 1 < grid.len() && corollary3_bound(grid[i + 1], k, n).unwrap().combined < v {
                    monotone = false;
                }
                if j + 1 < grid.len() && corollary3_bound(l, grid[j + 1], n).unwrap().combined < v {
                    monotone = false;
                }
            }
        }
    }
    outcome(err < 1e-12 && monotone, format!("value={b:.17} |diff|={err:.1e} monotone on 20x20 grid (n=1..3)={monotone}"))
}

fn determinism(dir: &Path) -> Outcome {
    let cfg = dir.join("determinism.json");
    std::fs::write(
        &cfg,
        r#"{
  "group": {"S": [2, 3], "d": 3, "generators": [
    [["2","0","0"],["0","1/3","0"],["0","0","3/2"]],
    [["1","1","0"],["0","1","1/6"],["0","0","1"]]]},
  "seeds": [["1","0","0"]],
  "sample_seeds": {"count": 4, "bound": 6},
  "budgets": {"radius": 5, "max_steps": 8},
  "run_estimates": true,
  "random_seed": 42
}"#,
    )
    .unwrap();
    let run = |threads| cmd_analyze(&RunArgs { config: cfg.clone(), threads: Some(threads), ..Default::default() }).unwrap();
    let a = serde_json::to_string(&run(1).without_provenance()).unwrap();
    let b = serde_json::to_string(&run(8).without_provenance()).unwrap();
    outcome(a == b, format!("threads 1 vs 8: {} bytes each, identical={}", a.len(), a == b))
}

#[test]
fn acceptance_suite() {
    writeln!(std::io::stderr().lock()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let results = [
        report(1, "annihilator identity", Duration::from_secs(1), annihilator),
        report(2, "verdicts with certificates", Duration::from_secs(10), || verdicts(dir.path())),
        report(3, "Kesten lower bounds", Duration::from_secs(60), kesten),
        report(4, "amenable endpoint", Duration::from_secs(5), amenable_endpoint),
        report(5, "duality pairing invariance", Duration::from_secs(5), pairing),
        report(6, "Heisenberg finite model", Duration::from_secs(30), heisenberg),
        report(7, "two-norm combiner", Duration::from_secs(1), combiner),
        report(8, "determinism across threads", Duration::from_secs(20), || determinism(dir.path())),
    ];
    let failed: Vec<usize> = results.iter().enumerate().filter(|(_, ok)| !**ok).map(|(i, _)| i + 1).collect();
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}
