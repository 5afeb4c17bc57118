mod common;

use std::collections::BTreeMap;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{assignments, random_hps, worlds_distance, xi, ProgramGen};
use hqb::assert::{check_prob, probability, Bound, Method, Pred};
use hqb::hps::Hps;
use hqb::lang::{compile_str, qasm};
use hqb::memory::Addr;
use hqb::oracle;
use hqb::rewrite::{self, normalize, Strategy};
use hqb::semantics::{run, ExecContext, NormalizePolicy};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn max_distance(a: &Hps, b: &Hps, modulus: bool) -> f64 {
    assignments(&[a, b]).iter().map(|r| worlds_distance(&xi(a, r), &xi(b, r), modulus)).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn phase_exact_normalization_preserves_xi(seed in any::<u64>()) {
        let h = random_hps(&mut rng(seed));
        let st = Strategy { allow_pe: false, ..Strategy::default() };
        let (nf, _) = normalize(&h, &st);
        prop_assert!(max_distance(&h, &nf, false) < 1e-9);
    }

    #[test]
    fn normalization_preserves_modulus(seed in any::<u64>()) {
        let h = random_hps(&mut rng(seed));
        let (nf, _) = normalize(&h, &Strategy::default());
        prop_assert!(max_distance(&h, &nf, true) < 1e-9);
    }

    #[test]
    fn normalization_is_idempotent(seed in any::<u64>()) {
        let h = random_hps(&mut rng(seed));
        let st = Strategy { allow_pe: false, ..Strategy::default() };
        let (nf, _) = normalize(&h, &st);
        let (again, trace) = normalize(&nf, &st);
        prop_assert_eq!(trace.total(), 0);
        prop_assert_eq!(again, nf);
    }

    #[test]
    fn self_equivalence(seed in any::<u64>()) {
        let h = random_hps(&mut rng(seed));
        let renamed = rewrite::canonical_rename(&h, 100);
        prop_assert!(matches!(rewrite::equivalent(&h, &renamed), rewrite::Equivalence::Holds(_)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn execution_agrees_with_dense_oracle(seed in any::<u64>(), nq in 1u32..=3, stmts in 1usize..=8) {
        let src = ProgramGen { nq, stmts, inputs: true }.source(&mut rng(seed));
        let t = compile_str(&src).unwrap();
        for policy in [NormalizePolicy::Off, NormalizePolicy::AfterGate] {
            let r = oracle::cross_check(&t, &Hps::empty(), &mut ExecContext::with_policy(policy)).unwrap();
            prop_assert!(r.max_distance < 1e-9, "{:?}: {}\n{}", policy, r.max_distance, src);
            prop_assert!((r.norm_after.0 - 1.0).abs() < 1e-9 && (r.norm_after.1 - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn symbolic_probability_matches_enumeration(seed in any::<u64>(), nq in 1u32..=3, stmts in 1usize..=8, bit in 0u32..2) {
        let src = ProgramGen { nq, stmts, inputs: false }.source(&mut rng(seed));
        let h = run(&compile_str(&src).unwrap(), &mut ExecContext::new()).unwrap();
        let cond = Pred::eq_int(&[Addr::new("c", bit)], 1);
        let p = probability(&h, &cond, 64).unwrap();
        let cell = Addr::new("c", bit);
        let want = h.proba(&BTreeMap::new(), &|m: &BTreeMap<Addr, bool>| m.get(&cell).copied().unwrap_or(false)).unwrap();
        let iv = p.value.to_interval(64);
        prop_assert!(iv.lo_f64() - 1e-9 <= want && want <= iv.hi_f64() + 1e-9, "{:?} [{}, {}] vs {}\n{}", p.method, iv.lo_f64(), iv.hi_f64(), want, src);
        if p.method == Method::Symbolic {
            prop_assert!(iv.width_f64() < 1e-12);
        }
    }

    #[test]
    fn probability_verdicts_are_monotone(seed in any::<u64>(), stmts in 1usize..=6, num in 0i64..=8) {
        let src = ProgramGen { nq: 2, stmts, inputs: false }.source(&mut rng(seed));
        let h = run(&compile_str(&src).unwrap(), &mut ExecContext::new()).unwrap();
        let cond = Pred::eq_int(&[Addr::new("c", 0)], 1);
        let ge = |n: i64| check_prob(&h, &cond, hqb::assert::Rel::Ge, &Bound::rational(n, 8), 64).unwrap().verdict;
        if ge(num).holds() {
            for n in 0..num {
                prop_assert!(ge(n).holds());
            }
        }
    }

    #[test]
    fn unitary_programs_round_trip_through_qasm(seed in any::<u64>(), nq in 1u32..=4, stmts in 1usize..=12) {
        let src = unitary_source(seed, nq, stmts);
        let t = compile_str(&src).unwrap();
        let text = qasm::export(&t.program).unwrap();
        let back = qasm::import(&text).unwrap();
        prop_assert!(qasm::alpha_equivalent(&t.program, &back), "{}\n{}", src, text);
    }
}

/// Gates, measurements and resets only.
fn unitary_source(seed: u64, nq: u32, stmts: usize) -> String {
    use rand::Rng;
    use std::fmt::Write;
    let mut r = rng(seed);
    let mut s = format!("qreg q[{nq}];\ncreg c[{nq}];\ninit q;\n");
    for _ in 0..stmts {
        let a = r.gen_range(0..nq);
        let b = (a + r.gen_range(1..nq.max(2))) % nq;
        let _ = match r.gen_range(0..9) {
            0 => writeln!(s, "H(q[{a}]);"),
            1 => writeln!(s, "X(q[{a}]);"),
            2 => writeln!(s, "Z[{}](q[{a}]);", r.gen_range(1..=4)),
            3 => writeln!(s, "Zdg[{}](q[{a}]);", r.gen_range(1..=4)),
            4 if a != b => writeln!(s, "CNOT(q[{a}], q[{b}]);"),
            5 if a != b => writeln!(s, "CZ[{}](q[{a}], q[{b}]);", r.gen_range(1..=3)),
            6 => writeln!(s, "measure(q[{a}], c[{a}]);"),
            7 => writeln!(s, "reset q[{a}];"),
            _ => writeln!(s, "S(q[{a}]);"),
        };
    }
    s
}
