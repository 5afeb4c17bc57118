use std::path::Path;

use hqb::lang::{compile_str, pretty, qasm, LangError, ProgType, Stmt, TypeError};

fn fixtures() -> Vec<(String, String)> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/negative");
    let mut v: Vec<(String, String)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_stem().unwrap().to_string_lossy().into_owned(), std::fs::read_to_string(&p).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn negative_fixtures_raise_their_error() {
    let all = fixtures();
    assert_eq!(all.len(), 12);
    for (name, src) in all {
        let err = compile_str(&src).expect_err(&name);
        let ok = match (name.rsplit_once('_').unwrap().0, &err) {
            ("control_target_overlap", LangError::Type(TypeError::ControlTargetOverlap(_))) => true,
            ("not_unitary_branch", LangError::Type(TypeError::NotUnitaryBranch(_))) => true,
            ("allocation_profile_mismatch", LangError::Type(TypeError::AllocationProfileMismatch(_))) => true,
            ("reinit", LangError::Type(TypeError::ReInit(_))) => true,
            _ => false,
        };
        assert!(ok, "{name}: {err}");
    }
}

#[test]
fn unitary_programs_are_qprog() {
    let ast = hqb::lang::syntax::parse("qreg q[3]; H(q); CCX(q[0], q[1], q[2]); q[0] => S(q[2]);").unwrap();
    let prog = hqb::lang::elaborate(&ast, &Default::default(), &Default::default()).unwrap();
    let live = (0..3).map(|i| hqb::memory::Addr::new("q", i)).collect();
    assert_eq!(hqb::lang::types::typecheck_from(prog, live).unwrap().ty, ProgType::QProg);
    let t = compile_str("qreg q[1]; creg c[1]; init q; H(q); q -o c;").unwrap();
    assert_eq!(t.ty, ProgType::Prog);
}

#[test]
fn macros_loops_and_sugar() {
    let src = "
        param n = 3;
        qreg q[n];
        def layer(r, k) { for i = 0 .. k - 1 { r[i] |> H; } }
        def rot(j) { Z[j + 1](q[j]); }
        init q;
        layer(q, n);
        q =>> rot;
        let m = n - 1 in { CNOT(q[0], q[m]); }
        SWAP(q[0], q[1]);
    ";
    let t = compile_str(src).unwrap();
    let gates: usize = t.program.gate_count();
    // 3 H + 3 Z + 1 CNOT + 3 CNOT for the swap
    assert_eq!(gates, 10, "{:?}", t.program.body);
    assert!(t.program.body.iter().any(|s| *s == Stmt::Gate(hqb::lang::Gate::Z(3), hqb::memory::Addr::new("q", 2))));
}

#[test]
fn unknown_names_are_reported() {
    assert!(matches!(compile_str("qreg q[1]; init q; Foo(q);"), Err(LangError::Type(TypeError::UnknownGate(_)))));
    assert!(matches!(compile_str("qreg q[1]; init q; H(r);"), Err(LangError::Type(_))));
    assert!(matches!(compile_str("qreg q[1]; H(q);"), Err(LangError::Type(TypeError::UnallocatedGateTarget(_)))));
    assert!(matches!(compile_str("qreg q[1] init q;"), Err(LangError::Parse(_))));
}

#[test]
fn mixed_gates_and_oracles() {
    let src = "
        qreg q[1]; creg c[2]; creg d[1];
        oracle maj(a[2]) = [a[0] & a[1]];
        mixed flip(x[1]) { 9/10 : skip; 1/10 : X(x[0]); }
        init q;
        flip(q);
        q -o c[0];
        d := maj(c);
    ";
    let t = compile_str(src).unwrap();
    assert_eq!(t.ty, ProgType::Prog);
    let bad = "qreg q[1]; mixed m(x[1]) { 1/2 : skip; 1/3 : X(x[0]); } init q; m(q);";
    assert!(matches!(compile_str(bad), Err(LangError::Type(TypeError::WeightSumNotOne(_)))));
}

#[test]
fn pretty_round_trip() {
    let src = "
        qreg q[2]; creg c[2];
        mixed dep(x[1]) { 1/2 : skip; 1/2 : Z(x[0]); }
        input q; H(q[0]); CNOT(q[0], q[1]); dep(q[1]); T(q[1]); Tdg(q[0]);
        measure(q, c);
        if c == 2 { X(q[0]); } else { Z[4](q[1]); }
    ";
    let p = compile_str(src).unwrap().program;
    let text = pretty::to_hqb(&p);
    let back = compile_str(&text).unwrap().program;
    assert_eq!(p, back, "{text}");
}

#[test]
fn qasm_import_handles_register_gates() {
    let src = "OPENQASM 2.0;\ninclude \"qelib1.inc\";\nqreg q[3];\ncreg c[3];\nh q;\ncx q[0],q[1];\nu1(pi/8) q[2];\ncu1(-pi/4) q[0],q[2];\nbarrier q;\nmeasure q -> c;\nif(c==5) x q[1];\n";
    let p = qasm::import(src).unwrap();
    let out = qasm::export(&p).unwrap();
    let again = qasm::import(&out).unwrap();
    assert!(qasm::alpha_equivalent(&p, &again), "{out}");
    assert!(hqb::lang::typecheck(p).is_ok());
}

#[test]
fn qasm_rejects_gate_definitions_and_assignments() {
    assert!(matches!(qasm::import("qreg q[1]; gate foo a { h a; }"), Err(qasm::QasmError::UnsupportedQasmConstruct(_))));
    let p = compile_str("qreg q[1]; creg c[1]; creg d[1]; oracle id(a[1]) = [a[0]]; init q; q -o c; d := id(c);").unwrap().program;
    assert!(matches!(qasm::export(&p), Err(qasm::QasmError::UnsupportedQasmConstruct(_))));
}

#[test]
fn alpha_equivalence_ignores_register_names() {
    let a = compile_str("qreg q[2]; init q; H(q[0]); CNOT(q[0], q[1]);").unwrap().program;
    let b = compile_str("qreg r[2]; init r[0]; init r[1]; H(r[0]); skip; CX(r[0], r[1]);").unwrap().program;
    let c = compile_str("qreg r[2]; init r; H(r[1]); CNOT(r[1], r[0]);").unwrap().program;
    assert!(qasm::alpha_equivalent(&a, &b));
    assert!(!qasm::alpha_equivalent(&a, &c));
}
