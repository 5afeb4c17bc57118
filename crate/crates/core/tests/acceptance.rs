//! Acceptance criteria, one PASS/FAIL line each.

mod common;

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{add_worlds, assignments, random_hps, scale_worlds, worlds_distance, xi, ProgramGen};
use hqb::assert::{parse_bound, Verdict};
use hqb::boolexpr::Var;
use hqb::cases::{self, BrusBody, CaseSpec, Expected};
use hqb::exact::ExactReal;
use hqb::hps::Hps;
use hqb::lang::types::TypeError;
use hqb::lang::{compile_str, qasm, LangError};
use hqb::memory::Addr;
use hqb::oracle;
use hqb::rewrite::{self, Strategy};
use hqb::scalar::Scalar;
use hqb::semantics::{ExecContext, NormalizePolicy};

const PREC: u32 = 96;
const TOL: f64 = 1e-9;

type Outcome = Result<String, String>;

fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn within(label: &str, t: Duration, limit: u64) -> Result<(), String> {
    if t > Duration::from_secs(limit) {
        return Err(format!("{label} took {:.1}s, limit {limit}s", t.as_secs_f64()));
    }
    Ok(())
}

fn run_case(c: &CaseSpec) -> Result<(hqb::assert::TripleReport, Duration), String> {
    let t0 = Instant::now();
    let r = c.check(&mut ExecContext::new(), PREC).map_err(|e| format!("{}: {e}", c.label()))?;
    let t = t0.elapsed();
    if !c.reproduced(&r) {
        return Err(format!("{}: verdict {}", c.label(), r.verdict()));
    }
    Ok((r, t))
}

fn exact_probability(r: &hqb::assert::TripleReport) -> Option<ExactReal> {
    r.check.probability.as_ref().and_then(|p| p.value.as_exact().cloned())
}

// ---------- 1 ----------

fn rewrite_soundness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let st = Strategy::default();
    let names = ["HH", "PB", "Filter", "CV", "PE", "Split", "FD", "NeutralAdd", "Scalar", "Phase"];
    let mut fired = [0usize; 10];
    let t0 = Instant::now();
    for case in 0..1000 {
        let h = random_hps(&mut rng);
        let rhos = assignments(&[&h]);
        let base: Vec<_> = rhos.iter().map(|r| xi(&h, r)).collect();
        let agree = |h2: &Hps, modulus: bool| rhos.iter().zip(&base).map(|(r, b)| worlds_distance(b, &xi(h2, r), modulus)).fold(0.0, f64::max);
        let check = |fired: &mut [usize; 10], idx: usize, h2: &Hps, modulus: bool| -> Result<(), String> {
            fired[idx] += 1;
            let d = agree(h2, modulus);
            if d > TOL {
                return Err(format!("{} changed ξ by {d:e} on case {case}", names[idx]));
            }
            Ok(())
        };
        let rules: [fn(&Hps, &Strategy) -> Option<(Hps, rewrite::RuleApplication)>; 5] =
            [rewrite::apply_hh, rewrite::apply_pb, rewrite::apply_filter, rewrite::apply_cv_heuristic, rewrite::apply_pe];
        for (i, rule) in rules.iter().enumerate() {
            if let Some((h2, _)) = rule(&h, &st) {
                check(&mut fired, i, &h2, i == 4)?;
            }
        }
        if let Some(&y) = h.support.iter().next() {
            let (h0, h1) = rewrite::apply_split(&h, y).map_err(|e| e.to_string())?;
            fired[5] += 1;
            for (r, b) in rhos.iter().zip(&base) {
                let d = worlds_distance(b, &add_worlds(&xi(&h0, r), &xi(&h1, r)), false);
                if d > TOL {
                    return Err(format!("Split changed ξ by {d:e} on case {case}"));
                }
            }
        }
        let keep = [Addr::new("q", 0)].into_iter().collect();
        if let Some((a, b)) = rewrite::apply_fd(&h, &keep, &Default::default()) {
            let t = a.tensor(&b).map_err(|e| e.to_string())?;
            check(&mut fired, 6, &t, false)?;
        }
        check(&mut fired, 7, &rewrite::neutral_add(&h, Var::path(h.fresh_id())), false)?;
        let c = rng.gen_range(-4..=4i64);
        let scaled = rewrite::apply_scalar(&Scalar::ratio(c, 5), &h);
        fired[8] += 1;
        for (r, b) in rhos.iter().zip(&base) {
            let d = worlds_distance(&scale_worlds(b, Complex64::new(c as f64 / 5.0, 0.0)), &xi(&scaled, r), false);
            if d > TOL {
                return Err(format!("Scalar changed ξ by {d:e} on case {case}"));
            }
        }
        if let Some(h2) = rewrite::apply_phase(&h) {
            check(&mut fired, 9, &h2, false)?;
        }
    }
    let t = t0.elapsed();
    within("1000 HPS", t, 60)?;
    if let Some(i) = fired.iter().position(|&n| n == 0) {
        return Err(format!("{} never applied", names[i]));
    }
    let counts: Vec<String> = names.iter().zip(fired).map(|(n, c)| format!("{n}={c}")).collect();
    Ok(format!("1000 HPS in {:.2}s, applications {}", t.as_secs_f64(), counts.join(" ")))
}

// ---------- 2, 3 ----------

fn program_corpus() -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0xc0de);
    (0..200)
        .map(|_| {
            let g = ProgramGen { nq: rng.gen_range(1..=5), stmts: rng.gen_range(1..=15), inputs: true };
            g.source(&mut rng)
        })
        .collect()
}

fn oracle_equivalence() -> Outcome {
    let t0 = Instant::now();
    let mut worst: f64 = 0.0;
    let mut assignments = 0;
    for (i, src) in program_corpus().iter().enumerate() {
        let t = compile_str(src).map_err(|e| format!("program {i}: {e}\n{src}"))?;
        for policy in [NormalizePolicy::Off, NormalizePolicy::AfterStatement] {
            let r = oracle::cross_check(&t, &Hps::empty(), &mut ExecContext::with_policy(policy)).map_err(|e| format!("program {i}: {e}"))?;
            if r.max_distance > TOL {
                return Err(format!("program {i} ({policy:?}) differs by {:e}\n{src}", r.max_distance));
            }
            worst = worst.max(r.max_distance);
            assignments += r.assignments;
        }
    }
    let t = t0.elapsed();
    within("200 programs", t, 300)?;
    Ok(format!("200 programs, {assignments} assignments, max distance {worst:.1e}, {:.2}s", t.as_secs_f64()))
}

fn conservation() -> Outcome {
    let mut worst: f64 = 0.0;
    for (i, src) in program_corpus().iter().enumerate() {
        let t = compile_str(src).map_err(|e| e.to_string())?;
        for policy in [NormalizePolicy::Off, NormalizePolicy::AfterGate] {
            let r = oracle::cross_check(&t, &Hps::empty(), &mut ExecContext::with_policy(policy)).map_err(|e| format!("program {i}: {e}"))?;
            let d = (r.norm_after.0 - r.trace_before).abs().max((r.norm_after.1 - r.trace_before).abs());
            if d > TOL {
                return Err(format!("program {i} ({policy:?}): Σ|ξ|² in [{}, {}], before {}", r.norm_after.0, r.norm_after.1, r.trace_before));
            }
            worst = worst.max(d);
        }
    }
    Ok(format!("200 programs, max |Σ|ξ|² - 1| = {worst:.1e}"))
}

// ---------- 4 ----------

fn teleportation() -> Outcome {
    let mut notes = Vec::new();
    for n in [1, 10, 100, 500] {
        let (_, t) = run_case(&cases::teleportation(n).map_err(|e| e.to_string())?)?;
        if n == 500 {
            within("n=500", t, 60)?;
        }
        notes.push(format!("n={n} {:.2}s", t.as_secs_f64()));
    }
    Ok(notes.join(", "))
}

// ---------- 5 ----------

fn qpe_exact() -> Outcome {
    let mut notes = Vec::new();
    for n in 2..=5 {
        let (r, t) = run_case(&cases::qpe(n, None, true).map_err(|e| e.to_string())?)?;
        within(&format!("n={n}"), t, 10)?;
        if exact_probability(&r) != Some(ExactReal::one()) {
            return Err(format!("n={n}: probability is not exactly 1"));
        }
        notes.push(format!("n={n} {:.2}s", t.as_secs_f64()));
    }
    Ok(format!("Pr = 1 exactly, {}", notes.join(", ")))
}

// ---------- 6 ----------

/// Eigen-index used for the off-grid runs.
fn off_grid_index(n: u32) -> u64 {
    (1 << (n - 1)) - 2
}

fn dense_probability(c: &CaseSpec, reg: &str, k: u64) -> Result<f64, String> {
    let empty = BTreeMap::new();
    let init = Hps::empty().density_map(&empty).map_err(|e| e.to_string())?;
    let v = oracle::simulate(&c.program, &init, &empty, 0).map_err(|e| e.to_string())?;
    let mut p = 0.0;
    for (key, m) in &v.mats {
        let hit = v.keys.iter().zip(key).all(|(a, b)| &*a.reg != reg || (k >> a.idx & 1 == 1) == *b);
        if hit {
            p += (0..v.dim).map(|i| m[i * v.dim + i].re).sum::<f64>();
        }
    }
    Ok(p)
}

fn qpe_approximate() -> Outcome {
    let mut notes = Vec::new();
    for n in 3..=5 {
        let k = off_grid_index(n);
        let c = cases::qpe(n, Some(k), false).map_err(|e| e.to_string())?;
        let (r, t) = run_case(&c)?;
        let iv = r.check.probability.as_ref().ok_or("no probability")?.value.to_interval(PREC);
        if iv.width_f64() >= 1e-6 {
            return Err(format!("n={n}: enclosure width {:e}", iv.width_f64()));
        }
        if n == 3 {
            let d = dense_probability(&c, "C", k)?;
            if (d - iv.lo_f64()).abs() > TOL || (d - iv.hi_f64()).abs() > TOL {
                return Err(format!("n=3: dense {d} vs [{}, {}]", iv.lo_f64(), iv.hi_f64()));
            }
        }
        notes.push(format!("n={n} Pr∈[{:.12}, {:.12}] {:.2}s", iv.lo_f64(), iv.hi_f64(), t.as_secs_f64()));
    }
    Ok(notes.join(", "))
}

// ---------- 7 ----------

fn qec() -> Outcome {
    let mut notes = Vec::new();
    for p in [q(0, 1), q(1, 10), q(1, 4)] {
        let (r, t) = run_case(&cases::qec3(&p).map_err(|e| e.to_string())?)?;
        within("qec3", t, 5)?;
        let one = q(1, 1);
        let want = (&one - &p).pow(3) + q(3, 1) * &p * (&one - &p).pow(2);
        if exact_probability(&r) != Some(ExactReal::from_rational(want.clone())) {
            return Err(format!("p={p}: probability differs from {want}"));
        }
        notes.push(format!("p={p} Pr={want} {:.2}s", t.as_secs_f64()));
    }
    let xs: Vec<BigRational> = (0..5).map(|i| q(i, 7)).collect();
    let poly = cases::qec3_polynomial(&xs).map_err(|e| e.to_string())?;
    if poly != vec![q(1, 1), q(0, 1), q(-3, 1), q(2, 1)] {
        return Err(format!("polynomial coefficients {poly:?}"));
    }
    notes.push("Pr(p) = 1 - 3p^2 + 2p^3".into());
    Ok(notes.join(", "))
}

// ---------- 8 ----------

fn brus() -> Outcome {
    for k in 1..=10u32 {
        let (r, _) = run_case(&cases::brus(&BrusBody::h_coin(), k, "1/2").map_err(|e| e.to_string())?)?;
        let got = r.check.parts[0].probability.as_ref().and_then(|p| p.value.as_exact().cloned());
        let want = ExactReal::from_rational(q(1, 1) - BigRational::new(BigInt::from(1), BigInt::from(1u64 << k)));
        if got != Some(want) {
            return Err(format!("h-coin k={k}: Pr(cont) is not 1 - 2^-{k}"));
        }
    }
    let u = BrusBody::qpe(3, off_grid_index(3)).map_err(|e| e.to_string())?;
    let delta = cases::verify_delta(&u, "4/pi^2", PREC).map_err(|e| e.to_string())?;
    if !delta.verdict.holds() {
        return Err(format!("single attempt: {}", delta.verdict));
    }
    let t0 = Instant::now();
    let (r, _) = run_case(&cases::brus(&u, 3, "4/pi^2").map_err(|e| e.to_string())?)?;
    let p = r.check.parts[0].probability.as_ref().map(|p| p.value.to_f64()).unwrap_or(f64::NAN);
    let bound = parse_bound("1 - (1 - 4/pi^2)^3", PREC).map_err(|e| e.to_string())?.to_interval(PREC).hi_f64();
    Ok(format!("h-coin k=1..10 exact, qpe3 k=3 Pr(cont)={p:.9} ≥ {bound:.9} ({:.2}s)", t0.elapsed().as_secs_f64()))
}

// ---------- 9 ----------

fn qft() -> Outcome {
    let mut notes = Vec::new();
    for n in [8, 16] {
        let (_, t) = run_case(&cases::qft_equiv(n, 11, false).map_err(|e| e.to_string())?)?;
        if n == 16 {
            within("n=16", t, 60)?;
        }
        notes.push(format!("n={n} holds {:.2}s", t.as_secs_f64()));
    }
    let bad = cases::qft_equiv(8, 11, true).map_err(|e| e.to_string())?;
    assert_eq!(bad.expected, Expected::Fails);
    let (r, _) = run_case(&bad)?;
    match r.verdict() {
        Verdict::Fails(d) if d.contains("residual phase") => notes.push(format!("injected Z_2 fails: {d}")),
        v => return Err(format!("injected Z_2 gave {v}")),
    }
    Ok(notes.join(", "))
}

// ---------- 10 ----------

fn round_trip_and_typing() -> Outcome {
    let progs = [
        cases::teleportation(3),
        cases::qpe(3, None, true),
        cases::qpe(3, Some(off_grid_index(3)), false),
        cases::brus(&BrusBody::h_coin(), 3, "1/2"),
        cases::brus(&BrusBody::qpe(3, off_grid_index(3)).map_err(|e| e.to_string())?, 3, "4/pi^2"),
        cases::qec3(&q(1, 10)),
        cases::qft_equiv(8, 11, false),
        cases::qft_equiv(8, 11, true),
    ];
    for c in progs {
        let c = c.map_err(|e| e.to_string())?;
        let text = qasm::export(&c.program.program).map_err(|e| format!("{}: export: {e}", c.label()))?;
        let back = qasm::import(&text).map_err(|e| format!("{}: import: {e}", c.label()))?;
        if !qasm::alpha_equivalent(&c.program.program, &back) {
            return Err(format!("{}: round trip is not α-equivalent", c.label()));
        }
    }
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/negative");
    let mut rejected = 0;
    for e in std::fs::read_dir(dir).map_err(|e| e.to_string())? {
        let p = e.map_err(|e| e.to_string())?.path();
        let name = p.file_stem().unwrap().to_string_lossy().into_owned();
        let src = std::fs::read_to_string(&p).map_err(|e| e.to_string())?;
        let ok = match (name.rsplit_once('_').map(|x| x.0), compile_str(&src)) {
            (Some("control_target_overlap"), Err(LangError::Type(TypeError::ControlTargetOverlap(_)))) => true,
            (Some("not_unitary_branch"), Err(LangError::Type(TypeError::NotUnitaryBranch(_)))) => true,
            (Some("allocation_profile_mismatch"), Err(LangError::Type(TypeError::AllocationProfileMismatch(_)))) => true,
            (Some("reinit"), Err(LangError::Type(TypeError::ReInit(_)))) => true,
            _ => false,
        };
        if !ok {
            return Err(format!("fixture {name} not rejected with its error"));
        }
        rejected += 1;
    }
    if rejected != 12 {
        return Err(format!("{rejected} negative fixtures, expected 12"));
    }
    Ok("8 case programs round-trip, 12 negative fixtures rejected".into())
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("rewrite soundness", rewrite_soundness),
        ("oracle equivalence", oracle_equivalence),
        ("conservation", conservation),
        ("teleportation", teleportation),
        ("qpe exact", qpe_exact),
        ("qpe approximate", qpe_approximate),
        ("qec", qec),
        ("brus", brus),
        ("qft equivalence", qft),
        ("round trip and typing", round_trip_and_typing),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let out = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let secs = t0.elapsed().as_secs_f64();
        match out {
            Ok(detail) => println!("criterion {:>2} PASS  {name} [{secs:.2}s]: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name} [{secs:.2}s]: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
