//! Benchmark-style run reports.

use std::collections::{BTreeMap, BTreeSet};

use serde_json::{json, Value};

use hqb::assert::Checked;
use hqb::boolexpr::Var;
use hqb::hps::Hps;
use hqb::lang::{Program, Stmt};
use hqb::rewrite::RewriteTrace;

/// Path-sums with more path or input variables are not enumerated.
const WORLD_ENUM_LIMIT: usize = 20;
const INPUT_ENUM_LIMIT: usize = 10;

#[derive(Clone, Debug, PartialEq)]
pub struct Worlds {
    /// Distinct visible histories of nonzero weight, when enumerable.
    pub nonzero: Option<u64>,
    /// Path variables read by visible classical cells; `2^k` bounds the histories.
    pub classical_path_vars: usize,
}

impl Worlds {
    pub fn of(h: &Hps) -> Worlds {
        let mut vars: BTreeSet<Var> = BTreeSet::new();
        for (a, col) in h.mem.cl.columns() {
            if h.mem.cl.is_hidden(a) {
                continue;
            }
            for (_, e) in col {
                vars.extend(e.val.vars().into_iter().filter(|v| v.is_path()));
                vars.extend(e.def.vars().into_iter().filter(|v| v.is_path()));
            }
        }
        Worlds { nonzero: nonzero_histories(h), classical_path_vars: vars.len() }
    }

    pub fn log2(&self) -> Option<f64> {
        self.nonzero.map(|n| (n.max(1) as f64).log2())
    }

    /// Table-style cell: the exact count when known, else the bound.
    pub fn cell(&self) -> String {
        match self.nonzero {
            Some(n) => n.to_string(),
            None => format!("<=2^{}", self.classical_path_vars),
        }
    }

    pub fn to_json(&self) -> Value {
        json!({
            "nonzero": self.nonzero,
            "log2": self.log2(),
            "classical_path_vars": self.classical_path_vars,
            "bound": format!("2^{}", self.classical_path_vars),
        })
    }
}

fn nonzero_histories(h: &Hps) -> Option<u64> {
    if h.support.len() > WORLD_ENUM_LIMIT || h.input_vars().len() > INPUT_ENUM_LIMIT {
        return None;
    }
    let mut seen: BTreeSet<Vec<u8>> = BTreeSet::new();
    for (_, w) in h.xi_all_inputs().ok()? {
        let visible: Vec<usize> = (0..w.caddrs.len()).filter(|c| !w.hidden[*c]).collect();
        let mut mass: BTreeMap<Vec<u8>, f64> = BTreeMap::new();
        for (key, v) in &w.worlds {
            let proj: Vec<u8> = visible.iter().flat_map(|c| key[c * w.age..(c + 1) * w.age].iter().copied()).collect();
            *mass.entry(proj).or_default() += hqb::hps::WorldVector::world_norm_sqr(v);
        }
        seen.extend(mass.into_iter().filter(|(_, m)| *m > 1e-12).map(|(k, _)| k));
    }
    Some(seen.len() as u64)
}

/// Quantum gate applications after unrolling; measurements and resets excluded.
pub fn count_gates(body: &[Stmt]) -> u64 {
    body.iter()
        .map(|s| match s {
            Stmt::Gate(..) | Stmt::Mixed { .. } => 1,
            Stmt::If { then, els, .. } => count_gates(then) + count_gates(els),
            _ => 0,
        })
        .sum()
}

pub fn count_wires(p: &Program) -> (u64, u64) {
    let q = p.qregs.iter().map(|(_, w)| *w as u64).sum();
    let c = p.cregs.iter().map(|(_, w)| *w as u64).sum();
    (q, c)
}

#[derive(Clone, Debug)]
pub struct RunReport {
    pub name: String,
    pub quantum_wires: u64,
    pub classical_wires: u64,
    pub gates: u64,
    pub worlds: Worlds,
    pub seconds: f64,
    pub rewrites: RewriteTrace,
    pub verdict: Option<Checked>,
}

impl RunReport {
    pub fn new(name: &str, p: &Program, result: &Hps, rewrites: RewriteTrace, seconds: f64) -> RunReport {
        let (quantum_wires, classical_wires) = count_wires(p);
        RunReport {
            name: name.to_string(),
            quantum_wires,
            classical_wires,
            gates: count_gates(&p.body),
            worlds: Worlds::of(result),
            seconds,
            rewrites,
            verdict: None,
        }
    }

    pub fn wires(&self) -> u64 {
        self.quantum_wires + self.classical_wires
    }

    pub fn rule_counts(&self) -> BTreeMap<String, usize> {
        self.rewrites.counters.iter().map(|(r, n)| (r.to_string(), *n)).collect()
    }

    pub fn verdict_name(&self) -> &'static str {
        self.verdict.as_ref().map_or("none", |c| c.verdict.name())
    }

    pub fn to_json(&self) -> Value {
        json!({
            "case": self.name,
            "wires": { "quantum": self.quantum_wires, "classical": self.classical_wires, "total": self.wires() },
            "gates": self.gates,
            "worlds": self.worlds.to_json(),
            "time_seconds": self.seconds,
            "rewritings": { "total": self.rewrites.total(), "steps": self.rewrites.steps.len(), "rules": self.rule_counts() },
            "verdict": self.verdict.as_ref().map(|c| c.to_json()),
        })
    }

    pub const CSV_HEADER: [&'static str; 9] = ["case", "wires", "gates", "worlds", "worlds_bound", "time_s", "rewritings", "rules", "verdict"];

    pub fn csv_row(&self) -> Vec<String> {
        let rules: Vec<String> = self.rule_counts().into_iter().map(|(r, n)| format!("{r}:{n}")).collect();
        vec![
            self.name.clone(),
            self.wires().to_string(),
            self.gates.to_string(),
            self.worlds.nonzero.map_or(String::new(), |n| n.to_string()),
            format!("2^{}", self.worlds.classical_path_vars),
            format!("{:.6}", self.seconds),
            self.rewrites.total().to_string(),
            rules.join(" "),
            self.verdict_name().to_string(),
        ]
    }

    pub fn text(&self) -> String {
        let rules: Vec<String> = self.rule_counts().into_iter().map(|(r, n)| format!("{r}={n}")).collect();
        let mut s = format!(
            "wires: {} ({} quantum, {} classical)\ngates: {}\nworlds: {} (bound 2^{})\ntime: {:.6}s\nrewritings: {}",
            self.wires(),
            self.quantum_wires,
            self.classical_wires,
            self.gates,
            self.worlds.cell(),
            self.worlds.classical_path_vars,
            self.seconds,
            self.rewrites.total(),
        );
        if !rules.is_empty() {
            s.push_str(&format!(" [{}]", rules.join(", ")));
        }
        if let Some(c) = &self.verdict {
            s.push_str(&format!("\nverdict: {}", c.verdict));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use hqb::lang::compile_str;
    use hqb::semantics::{run, ExecContext};

    #[test]
    fn bell_measurement_has_two_worlds() {
        let t = compile_str("qreg q[2]; creg c[2]; init q; H(q[0]); CNOT(q[0], q[1]); measure(q, c);").unwrap();
        let h = run(&t, &mut ExecContext::new()).unwrap();
        let r = RunReport::new("bell", &t.program, &h, RewriteTrace::default(), 0.0);
        assert_eq!((r.wires(), r.gates), (4, 2));
        assert_eq!(r.worlds.nonzero, Some(2));
        assert_eq!(r.worlds.classical_path_vars, 1);
    }

    #[test]
    fn json_is_stable_apart_from_time() {
        let t = compile_str("qreg q[1]; creg c[1]; init q; H(q); measure(q, c);").unwrap();
        let h = run(&t, &mut ExecContext::new()).unwrap();
        let mut a = RunReport::new("x", &t.program, &h, RewriteTrace::default(), 1.0).to_json();
        let mut b = RunReport::new("x", &t.program, &h, RewriteTrace::default(), 2.0).to_json();
        a["time_seconds"] = json!(0);
        b["time_seconds"] = json!(0);
        assert_eq!(a.to_string(), b.to_string());
    }
}
