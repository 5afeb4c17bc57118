use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn programs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../programs")
}

fn hqb(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hqb")).current_dir(programs()).args(args).output().expect("spawn hqb")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn json_report(args: &[&str]) -> (i32, Value) {
    let mut full = args.to_vec();
    full.extend(["--json", "-"]);
    let o = hqb(&full);
    (code(&o), serde_json::from_slice(&o.stdout).expect("json on stdout"))
}

fn scratch(name: &str, text: &str) -> (TempDir, String) {
    let d = tempfile::tempdir().unwrap();
    let p = d.path().join(name);
    std::fs::write(&p, text).unwrap();
    (d, p.to_string_lossy().into_owned())
}

fn rules(r: &Value) -> Vec<(String, u64)> {
    r["rewritings"]["rules"].as_object().unwrap().iter().map(|(k, v)| (k.clone(), v.as_u64().unwrap())).collect()
}

#[test]
fn teleport_run_matches_table_shape() {
    let (c, v) = json_report(&["run", "teleport.hqb"]);
    assert_eq!(c, 0);
    let r = &v["report"];
    assert_eq!(r["wires"]["total"], 5);
    assert_eq!(r["gates"], 6);
    assert_eq!(r["worlds"]["nonzero"], 4);
    assert_eq!(r["worlds"]["log2"], 2.0);
    assert_eq!(rules(r), vec![("CV".into(), 1)]);
}

#[test]
fn teleport_check_holds_with_three_rewritings() {
    let (c, v) = json_report(&["check", "teleport.hqb", "--assert", "telep.sat"]);
    assert_eq!(c, 0);
    let r = &v["report"];
    assert_eq!(r["verdict"]["verdict"], "holds");
    assert_eq!(r["rewritings"]["total"], 3);
    assert_eq!(rules(r), vec![("CV".into(), 1), ("Discard".into(), 1), ("FD-factor".into(), 1)]);
}

#[test]
fn qec3_report_matches_table_row() {
    let (c, v) = json_report(&["run", "qec3.hqb"]);
    assert_eq!(c, 0);
    let r = &v["report"];
    assert_eq!(r["wires"]["total"], 7);
    assert_eq!(r["gates"], 16);
    assert_eq!(r["worlds"]["nonzero"], 4);
    assert_eq!(r["rewritings"]["total"], 2);
}

#[test]
fn qec3_assertion_holds() {
    let o = hqb(&["check", "qec3.hqb", "--assert", "qec3.sat"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(stdout(&o).contains("verdict: holds"));
}

#[test]
fn skip_echoes_its_input() {
    let o = hqb(&["run", "skip.hqb", "--input", "skip.input.json"]);
    assert_eq!(code(&o), 0);
    let input: hqb::hps::Hps = serde_json::from_str(&std::fs::read_to_string(programs().join("skip.input.json")).unwrap()).unwrap();
    let first = stdout(&o).lines().next().unwrap().to_string();
    assert_eq!(first, format!("state: {input}"));
}

#[test]
fn rewrite_counters_sum_to_total() {
    for args in [&["run", "qec3.hqb"][..], &["check", "teleport.hqb", "--assert", "telep.sat"], &["equiv", "qft8.hqb", "qft8_shuffled.hqb"]] {
        let (_, v) = json_report(args);
        let r = &v["report"];
        let sum: u64 = rules(r).iter().map(|(_, n)| n).sum();
        assert_eq!(r["rewritings"]["total"].as_u64().unwrap(), sum, "{args:?}");
        assert_eq!(r["rewritings"]["steps"].as_u64().unwrap(), sum, "{args:?}");
    }
}

#[test]
fn reports_are_deterministic_apart_from_time() {
    for args in [&["run", "qec3.hqb"][..], &["check", "teleport.hqb", "--assert", "telep.sat"]] {
        let strip = |mut v: Value| {
            v["report"]["time_seconds"] = Value::Null;
            serde_json::to_string(&v).unwrap()
        };
        let a = strip(json_report(args).1);
        let b = strip(json_report(args).1);
        assert_eq!(a, b);
    }
}

#[test]
fn json_written_to_file() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().join("r.json");
    let o = hqb(&["run", "qec3.hqb", "--json", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).starts_with("state: "));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(v["report"]["gates"], 16);
}

#[test]
fn normalize_policies_agree_on_teleport_worlds() {
    for policy in ["off", "gate", "stmt"] {
        let (c, v) = json_report(&["run", "teleport.hqb", "--normalize", policy]);
        assert_eq!(c, 0, "{policy}");
        assert_eq!(v["report"]["worlds"]["nonzero"], 4, "{policy}");
    }
}

#[test]
fn qft8_variant_is_equivalent() {
    let o = hqb(&["equiv", "qft8.hqb", "qft8_shuffled.hqb"]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o).lines().next(), Some("equivalent"));
}

#[test]
fn qft8_with_extra_phase_is_not_equivalent() {
    let o = hqb(&["equiv", "qft8.hqb", "qft8_broken.hqb"]);
    assert_eq!(code(&o), 5);
    assert!(stdout(&o).starts_with("not equivalent"));
}

#[test]
fn equiv_accepts_qasm() {
    let d = tempfile::tempdir().unwrap();
    let q = d.path().join("qft8.qasm");
    let o = hqb(&["qasm-export", "qft8.hqb", "--out", q.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let o = hqb(&["equiv", "qft8_shuffled.hqb", q.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
}

#[test]
fn qasm_round_trip_preserves_report() {
    let d = tempfile::tempdir().unwrap();
    let q = d.path().join("t.qasm");
    let h = d.path().join("t.hqb");
    assert_eq!(code(&hqb(&["qasm-export", "teleport.hqb", "-o", q.to_str().unwrap()])), 0);
    assert_eq!(code(&hqb(&["qasm-import", q.to_str().unwrap(), "-o", h.to_str().unwrap()])), 0);
    let strip = |mut v: Value| {
        v["report"]["time_seconds"] = Value::Null;
        v["report"]["case"] = Value::Null;
        serde_json::to_string(&v).unwrap()
    };
    let direct = strip(json_report(&["run", "teleport.hqb"]).1);
    assert_eq!(strip(json_report(&["run", q.to_str().unwrap()]).1), direct);
    assert_eq!(strip(json_report(&["run", h.to_str().unwrap()]).1), direct);
}

#[test]
fn bench_teleportation_reproduces_table_row() {
    let o = hqb(&["bench", "--suite", "teleportation", "--scale", "100"]);
    assert_eq!(code(&o), 0);
    let mut rd = csv::Reader::from_reader(o.stdout.as_slice());
    let header: Vec<String> = rd.headers().unwrap().iter().map(str::to_string).collect();
    assert_eq!(header, ["case", "wires", "gates", "worlds", "worlds_bound", "time_s", "rewritings", "rules", "verdict"]);
    let rows: Vec<csv::StringRecord> = rd.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 1);
    let r = &rows[0];
    assert_eq!((&r[1], &r[2], &r[4], &r[6], &r[8]), ("500", "600", "2^200", "102", "holds"));
    assert_eq!(&r[7], "CV:100 Discard:1 FD-factor:1");
}

#[test]
fn bench_at_scale_500_is_a_single_row() {
    let o = hqb(&["bench", "--suite", "teleportation", "--scale", "500"]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[1].starts_with("teleportation(n=500),2500,3000,"));
}

#[test]
fn bench_json_lists_reports() {
    let o = hqb(&["bench", "--suite", "qec", "--format", "json"]);
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    let rows = v.as_array().unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0]["wires"]["total"], 7);
    assert_eq!(rows[0]["verdict"]["verdict"], "holds");
}

#[test]
fn exit_1_on_parse_errors() {
    let (_d, p) = scratch("p.hqb", "qreg q[1]; H(q");
    assert_eq!(code(&hqb(&["run", &p])), 1);
    assert_eq!(code(&hqb(&["run", "no-such-file.hqb"])), 1);
    assert_eq!(code(&hqb(&["run"])), 1);
    assert_eq!(code(&hqb(&["bench", "--suite", "nope"])), 1);
    let (_q, q) = scratch("p.qasm", "OPENQASM 2.0;\nqreg q[1];\nu3(0.1,0.2,0.3) q[0];\n");
    assert_eq!(code(&hqb(&["run", &q])), 1);
    let (_s, s) = scratch("bad.sat", "{\"pre\": null}");
    assert_eq!(code(&hqb(&["check", "teleport.hqb", "--assert", &s])), 1);
    let o = Command::new(env!("CARGO_BIN_EXE_hqb"))
        .current_dir(programs())
        .env("HQB_PRECISION", "lots")
        .args(["check", "teleport.hqb", "--assert", "telep.sat"])
        .output()
        .unwrap();
    assert_eq!(code(&o), 1);
}

#[test]
fn exit_2_on_type_errors() {
    let (_d, p) = scratch("t.hqb", "qreg q[1];\ncreg c[1];\nH(c[0]);\n");
    assert_eq!(code(&hqb(&["run", &p])), 2);
    let (_e, e) = scratch("m.hqb", "qreg q[1];\ncreg c[1];\ninit q;\nmeasure(q, c);\n");
    assert_eq!(code(&hqb(&["equiv", &e, "qft8.hqb"])), 2);
}

#[test]
fn exit_3_on_runtime_errors() {
    let (_d, p) = scratch("r.hqb", "qreg b[1];\ninit b;\n");
    let o = hqb(&["run", &p, "--input", "skip.input.json"]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    let (_e, e) = scratch("e.hqb", "qreg q[1];\ncreg c[1];\ninit q;\nmeasure(q, c);\nif c[0] { X(q[0]); } else { H(q[0]); }\n");
    assert_eq!(code(&hqb(&["run", &e])), 0);
    assert_eq!(code(&hqb(&["qasm-export", &e])), 3);
}

#[test]
fn exit_4_when_fuel_runs_out() {
    let o = hqb(&["run", "qec3.hqb", "--fuel", "0"]);
    assert_eq!(code(&o), 4);
}

#[test]
fn exit_5_on_failed_assertion() {
    let sat = std::fs::read_to_string(programs().join("telep.sat")).unwrap().replace("\"b[0]\": \"x0\"", "\"b[0]\": \"x0 ^ 1\"");
    let (_d, p) = scratch("wrong.sat", &sat);
    let o = hqb(&["check", "teleport.hqb", "--assert", &p]);
    assert_eq!(code(&o), 5);
    assert!(stdout(&o).contains("verdict: fails"));
}

#[test]
fn precision_env_is_honoured() {
    let o = Command::new(env!("CARGO_BIN_EXE_hqb"))
        .current_dir(programs())
        .env("HQB_PRECISION", "32")
        .args(["check", "qec3.hqb", "--assert", "qec3.sat"])
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
}
