//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use condmeas_core::oracle::{
    cone_sample_check, directed_chi_witness, hoffman_ratio_sample, hoffmanbar_ratio_sample,
    random_corpus, random_nonsingular, sample_chi_lower, sample_chibar_lower, RngConfig,
};
use condmeas_core::{
    apply_signature, chi, chibar, cone_max, cone_min, enumerate_signatures, grassmann, hoffman,
    hoffman_simple, hoffmanbar, renegar_distance, signed_max_hoffman, signed_scan, stack_pm,
    Matrix, Signature, SignedEntry, Tolerances,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const CORPUS_SEED: u64 = 0x00c0_ffee;
const CORPUS_SIZE: usize = 200;
const IDENTITY_RTOL: f64 = 1e-7;
const GOLDEN_ATOL: f64 = 1e-10;
const CROSS_PATH_RTOL: f64 = 1e-9;
const ORACLE_SAMPLES: usize = 10_000;
const DIRECTED_FRACTION: f64 = 0.999;
const RIGHT_FACTORS: usize = 20;
const PHI: f64 = 1.618_033_988_749_895;

fn m(rows: &[&[f64]]) -> Matrix {
    Matrix::from_rows(rows).unwrap()
}

fn golden() -> Matrix {
    m(&[&[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0]])
}

fn edge_cases() -> Vec<Matrix> {
    vec![
        golden(),
        Matrix::identity(3),
        m(&[&[1.0, 0.0], &[0.0, -1.0], &[-1.0, -1.0]]),
        m(&[&[1.0, 0.0], &[0.0, 0.0], &[1.0, 1.0]]),
        m(&[&[1.0, 0.0], &[1.0, 1e-3]]),
        m(&[&[1.0], &[-1.0]]),
        m(&[&[2.0], &[3.0], &[-1.0]]),
    ]
}

fn has_zero_row(a: &Matrix) -> bool {
    (0..a.rows()).any(|i| a.row(i).iter().all(|&x| x == 0.0))
}

fn rel(a: f64, b: f64) -> f64 {
    let s = a.abs().max(b.abs());
    if s == 0.0 {
        0.0
    } else {
        (a - b).abs() / s
    }
}

/// Worst observed error against a tolerance, plus a description of the
/// first violation.
struct Tally {
    tol: f64,
    worst: f64,
    checks: usize,
    failures: usize,
    first: Option<String>,
}

impl Tally {
    fn new(tol: f64) -> Self {
        Self {
            tol,
            worst: 0.0,
            checks: 0,
            failures: 0,
            first: None,
        }
    }

    fn check(&mut self, err: f64, what: impl FnOnce() -> String) {
        self.checks += 1;
        if err.is_nan() || err > self.tol {
            self.failures += 1;
            if self.first.is_none() {
                self.first = Some(what());
            }
        }
        if err > self.worst || err.is_nan() {
            self.worst = err;
        }
    }

    fn fail(&mut self, what: String) {
        self.checks += 1;
        self.failures += 1;
        self.first.get_or_insert(what);
    }

    fn pass(&self) -> bool {
        self.failures == 0 && self.checks > 0
    }

    fn summary(&self) -> String {
        let mut s = format!(
            "{} checks, {} failures, worst error {:.2e} (tolerance {:.0e})",
            self.checks, self.failures, self.worst, self.tol
        );
        if let Some(f) = &self.first {
            s.push_str(&format!("; first failure: {f}"));
        }
        s
    }
}

struct Case {
    a: Matrix,
    chi: f64,
    chibar: f64,
    scan: Vec<SignedEntry>,
}

struct Suite {
    tol: Tolerances,
    cases: Vec<Case>,
    results: Vec<bool>,
}

impl Suite {
    fn report(&mut self, id: usize, title: &str, pass: bool, detail: String, started: Instant) {
        println!(
            "criterion {id:>2} {} {title}: {detail} [{:.1} s]",
            if pass { "PASS" } else { "FAIL" },
            started.elapsed().as_secs_f64()
        );
        self.results.push(pass);
    }

    fn nonzero_row_cases(&self) -> impl Iterator<Item = &Case> {
        self.cases.iter().filter(|c| !has_zero_row(&c.a))
    }
}

fn max_of(it: impl Iterator<Item = f64>) -> Option<f64> {
    it.fold(None, |acc, v| Some(acc.map_or(v, |a: f64| a.max(v))))
}

fn criterion_1(s: &mut Suite) {
    let t0 = Instant::now();
    let mut tally = Tally::new(IDENTITY_RTOL);
    for (k, c) in s.cases.iter().enumerate() {
        let sm = signed_max_hoffman(&c.a, false, &s.tol).unwrap();
        tally.check(rel(c.chi, sm.value), || format!("case {k}: max_S H(SA) = {} vs chi = {}", sm.value, c.chi));
        let st = hoffman(&stack_pm(&c.a), &s.tol).unwrap().value;
        tally.check(rel(c.chi, st), || format!("case {k}: H([A; -A]) = {st} vs chi = {}", c.chi));
    }
    let (pass, detail) = (tally.pass(), tally.summary());
    s.report(1, "chi(A) = max_S H(SA) = H([A; -A])", pass, detail, t0);
}

fn criterion_2(s: &mut Suite) {
    let t0 = Instant::now();
    let mut tally = Tally::new(IDENTITY_RTOL);
    for (k, c) in s.nonzero_row_cases().enumerate() {
        let all = max_of(c.scan.iter().map(|e| e.hoffman)).unwrap();
        match max_of(c.scan.iter().filter(|e| e.strictly_feasible).map(|e| e.hoffman)) {
            Some(f) => tally.check(rel(all, f), || format!("case {k}: filtered {f} vs all {all}")),
            None => tally.fail(format!("case {k}: no strictly feasible signature")),
        }
    }
    let (pass, detail) = (tally.pass(), tally.summary());
    s.report(2, "strictly feasible signatures attain max_S H(SA)", pass, detail, t0);
}

fn criterion_3(s: &mut Suite) {
    let t0 = Instant::now();
    let mut tally = Tally::new(IDENTITY_RTOL);
    for (k, c) in s.cases.iter().enumerate() {
        let hb = max_of(c.scan.iter().map(|e| e.hoffmanbar)).unwrap();
        tally.check(rel(c.chibar, hb), || format!("case {k}: max_S Hbar(SA) = {hb} vs chibar = {}", c.chibar));
    }
    let (pass, detail) = (tally.pass(), tally.summary());
    s.report(3, "chibar(A) = max_S Hbar(SA)", pass, detail, t0);
}

fn criterion_4(s: &mut Suite) {
    let t0 = Instant::now();
    let mut tally = Tally::new(IDENTITY_RTOL);
    for (k, c) in s.cases.iter().enumerate() {
        for e in c.scan.iter().filter(|e| e.strictly_feasible) {
            let r = e.renegar.unwrap();
            tally.check((e.hoffman * r - 1.0).abs(), || {
                format!("case {k} signature {}: H R = {}", e.signature, e.hoffman * r)
            });
        }
    }
    let (pass, detail) = (tally.pass(), tally.summary());
    s.report(4, "H(SA) R(SA) = 1 for strictly feasible SA", pass, detail, t0);
}

fn criterion_5(s: &mut Suite) {
    let t0 = Instant::now();
    let mut tally = Tally::new(IDENTITY_RTOL);
    for (k, c) in s.nonzero_row_cases().enumerate() {
        match max_of(c.scan.iter().filter_map(|e| e.grassmann)) {
            Some(g) => tally.check(rel(c.chibar, g), || format!("case {k}: max G(SA) = {g} vs chibar = {}", c.chibar)),
            None => tally.fail(format!("case {k}: no strictly feasible signature")),
        }
    }
    let (pass, detail) = (tally.pass(), tally.summary());
    s.report(5, "chibar(A) = max over strictly feasible S of G(SA)", pass, detail, t0);
}

fn criterion_6(s: &mut Suite) {
    let t0 = Instant::now();
    let t = &s.tol;
    let a = golden();
    let c = chi(&a, t).unwrap().value;
    let h = hoffman(&a, t).unwrap().value;
    let r = renegar_distance(&a, t).unwrap().value;
    let sm = signed_max_hoffman(&a, false, t).unwrap();
    let pmm = Signature::new(vec![1, -1, -1]).unwrap();
    let h_pmm = hoffman(&apply_signature(&pmm, &a).unwrap(), t).unwrap().value;
    let errs = [
        ("chi - phi", (c - PHI).abs()),
        ("H - 1", (h - 1.0).abs()),
        ("R - 1", (r - 1.0).abs()),
        ("max_S H(SA) - chi", (sm.value - c).abs()),
        ("H((+,-,-)A) - chi", (h_pmm - c).abs()),
    ];
    let pass = errs.iter().all(|(_, e)| *e <= GOLDEN_ATOL);
    let first = sm.signature.as_ref().map_or("none".into(), |s| s.to_string());
    let detail = format!(
        "chi = {c:.17}, H = {h:.17}, R = {r:.17}, H((+,-,-)A) = {h_pmm:.17}; worst |error| {:.2e} (tolerance {GOLDEN_ATOL:.0e}); first attaining signature in enumeration order {first}",
        errs.iter().map(|e| e.1).fold(0.0, f64::max)
    );
    s.report(6, "golden 3x2 example", pass, detail, t0);
}

fn criterion_7(s: &mut Suite) {
    let t0 = Instant::now();
    let t = s.tol;
    let mut tally = Tally::new(IDENTITY_RTOL);
    let mut rng = ChaCha8Rng::seed_from_u64(CORPUS_SEED ^ 7);
    for (k, c) in s.cases.iter().enumerate() {
        for sig in enumerate_signatures(c.a.rows(), &t).unwrap() {
            let sa = apply_signature(&sig, &c.a).unwrap();
            let x = chi(&sa, &t).unwrap().value;
            tally.check(rel(x, c.chi), || format!("case {k} signature {sig}: chi {x} vs {}", c.chi));
            let x = chibar(&sa, &t).unwrap().value;
            tally.check(rel(x, c.chibar), || format!("case {k} signature {sig}: chibar {x} vs {}", c.chibar));
        }
        let hb = hoffmanbar(&c.a, &t).unwrap().value;
        let g = grassmann(&c.a, &t).ok().map(|r| r.value);
        for _ in 0..RIGHT_FACTORS {
            let r = random_nonsingular(&mut rng, c.a.cols(), 1e3);
            let ar = c.a.matmul(&r).unwrap();
            let x = chibar(&ar, &t).unwrap().value;
            tally.check(rel(x, c.chibar), || format!("case {k}: chibar(AR) {x} vs {}", c.chibar));
            let x = hoffmanbar(&ar, &t).unwrap().value;
            tally.check(rel(x, hb), || format!("case {k}: Hbar(AR) {x} vs {hb}"));
            match (g, grassmann(&ar, &t)) {
                (Some(g), Ok(x)) => tally.check(rel(x.value, g), || format!("case {k}: G(AR) {} vs {g}", x.value)),
                (None, Err(_)) => {}
                _ => tally.fail(format!("case {k}: strict feasibility changed under a right factor")),
            }
        }
    }
    let (pass, detail) = (tally.pass(), tally.summary());
    s.report(7, "sign invariance of chi, chibar; right invariance of chibar, Hbar, G", pass, detail, t0);
}

fn criterion_8(s: &mut Suite) {
    let t0 = Instant::now();
    let t = s.tol;
    let mut tally = Tally::new(IDENTITY_RTOL);
    let mut directed = Tally::new(0.0);
    for (k, c) in s.cases.iter().enumerate() {
        let a = &c.a;
        let cfg = RngConfig {
            seed: CORPUS_SEED.wrapping_add(k as u64),
            sample_count: ORACLE_SAMPLES,
            ..RngConfig::default()
        };
        let excess = |sampled: f64, bound: f64| (sampled - bound).max(0.0) / bound.abs().max(f64::MIN_POSITIVE);

        let w = sample_chi_lower(a, &cfg, &t).unwrap();
        tally.check(excess(w.best, c.chi), || format!("case {k}: sampled |A_D^+| {} > chi {}", w.best, c.chi));
        let w = sample_chibar_lower(a, &cfg, &t).unwrap();
        tally.check(excess(w.best, c.chibar), || format!("case {k}: sampled |A A_D^+| {} > chibar {}", w.best, c.chibar));

        let h = hoffman(a, &t).unwrap().value;
        let r = hoffman_ratio_sample(a, &cfg, &t).unwrap();
        tally.check(excess(r.max_ratio, h), || format!("case {k}: Hoffman ratio {} > H {h}", r.max_ratio));
        let hb = hoffmanbar(a, &t).unwrap().value;
        let r = hoffmanbar_ratio_sample(a, &cfg, &t).unwrap();
        tally.check(excess(r.max_ratio, hb), || format!("case {k}: Hbar ratio {} > Hbar {hb}", r.max_ratio));

        let g = a.outer_gram();
        let (lo, hi) = cone_sample_check(&g, &cfg, &t).unwrap();
        let (cmax, _) = cone_max(&g, &t).unwrap();
        let (cmin, _) = cone_min(&g, &t).unwrap();
        tally.check(excess(hi, cmax), || format!("case {k}: cone sample {hi} > max {cmax}"));
        let scale = cmax.max(f64::MIN_POSITIVE);
        tally.check((cmin - lo).max(0.0) / scale, || format!("case {k}: cone sample {lo} < min {cmin}"));

        let j = chi(a, &t).unwrap().argmax_subset.unwrap();
        let d = directed_chi_witness(a, &j, &t).unwrap();
        directed.check((DIRECTED_FRACTION - d / c.chi).max(0.0), || {
            format!("case {k}: directed witness {d} < {DIRECTED_FRACTION} chi {}", c.chi)
        });
    }
    let pass = tally.pass() && directed.pass();
    let detail = format!(
        "{ORACLE_SAMPLES} samples per oracle: {}; directed witness >= {DIRECTED_FRACTION} chi: {} failures of {}",
        tally.summary(),
        directed.failures,
        directed.checks
    );
    s.report(8, "sampling oracles never exceed the exact values", pass, detail, t0);
}

fn criterion_9(s: &mut Suite) {
    let t0 = Instant::now();
    let t = s.tol;
    let mut tally = Tally::new(CROSS_PATH_RTOL);
    for (k, c) in s.cases.iter().enumerate() {
        for e in c.scan.iter().filter(|e| e.strictly_feasible) {
            let sa = apply_signature(&e.signature, &c.a).unwrap();
            let simple = hoffman_simple(&sa, &t).unwrap().value;
            tally.check(rel(simple, e.hoffman), || {
                format!("case {k} signature {}: simple {simple} vs scan {}", e.signature, e.hoffman)
            });
        }
    }
    let (pass, detail) = (tally.pass(), tally.summary());
    s.report(9, "Hoffman by cone enumeration equals Hoffman by submatrix scan", pass, detail, t0);
}

struct Run {
    code: Option<i32>,
    stdout: Vec<u8>,
}

fn run_cli(args: &[&str]) -> Run {
    let out = Command::new(env!("CARGO_BIN_EXE_condmeas"))
        .args(args)
        .env_remove("CONDMEAS_THREADS")
        .output()
        .expect("the CLI binary runs");
    Run {
        code: out.status.code(),
        stdout: out.stdout,
    }
}

fn scratch_dir() -> PathBuf {
    let dir = std::env::temp_dir().join(format!("condmeas-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn criterion_10(s: &mut Suite) {
    let t0 = Instant::now();
    let dir = scratch_dir();
    let good = write(&dir, "golden.csv", "1,0\n0,1\n1,1\n");
    let near = write(&dir, "near.csv", "1,0\n1,0.001\n");
    let ragged = write(&dir, "ragged.csv", "1,0\n0\n");

    let first = run_cli(&["verify", "--input", &good, "--seed", "11"]);
    let second = run_cli(&["verify", "--input", &good, "--seed", "11"]);
    let identical = first.stdout == second.stdout && !first.stdout.is_empty();
    let injected = run_cli(&["verify", "--input", &near, "--seed", "11", "--feas-tol", "9e-3"]);
    let bad = run_cli(&["verify", "--input", &ragged]);
    std::fs::remove_dir_all(&dir).ok();

    let pass = identical && first.code == Some(0) && injected.code == Some(2) && bad.code == Some(1);
    let detail = format!(
        "repeat verify byte-identical: {identical}; exit codes pass={:?} (want 0), corrupted tolerance={:?} (want 2), ragged CSV={:?} (want 1)",
        first.code, injected.code, bad.code
    );
    s.report(10, "CLI determinism and exit codes", pass, detail, t0);
}

fn main() {
    let started = Instant::now();
    let tol = Tolerances::default();
    let mut matrices = random_corpus(CORPUS_SEED, CORPUS_SIZE, &tol);
    matrices.extend(edge_cases());
    let cases: Vec<Case> = matrices
        .into_iter()
        .map(|a| Case {
            chi: chi(&a, &tol).unwrap().value,
            chibar: chibar(&a, &tol).unwrap().value,
            scan: signed_scan(&a, &tol).unwrap(),
            a,
        })
        .collect();
    println!(
        "acceptance: {} random matrices (seed {CORPUS_SEED:#x}) plus {} edge cases, scans ready in {:.1} s",
        CORPUS_SIZE,
        cases.len() - CORPUS_SIZE,
        started.elapsed().as_secs_f64()
    );
    let mut suite = Suite {
        tol,
        cases,
        results: Vec::new(),
    };
    criterion_1(&mut suite);
    criterion_2(&mut suite);
    criterion_3(&mut suite);
    criterion_4(&mut suite);
    criterion_5(&mut suite);
    criterion_6(&mut suite);
    criterion_7(&mut suite);
    criterion_8(&mut suite);
    criterion_9(&mut suite);
    criterion_10(&mut suite);
    let failed = suite.results.iter().filter(|p| !**p).count();
    println!(
        "acceptance: {} of {} criteria passed in {:.1} s",
        suite.results.len() - failed,
        suite.results.len(),
        started.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
