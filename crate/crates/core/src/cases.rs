//! Case-study library: teleportation, phase estimation, bounded
//! repeat-until-success, the 3-qubit bit-flip code and QFT equivalence.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;
use std::fmt::Write;

use crate::assert::{check_prob, check_triple, parse_bound, AssertError, Assertion, HoareTriple, Pred, ProbValue, Rel, Sidecar, TripleReport};
use crate::boolexpr::{BoolExpr, Var};
use crate::exact::ExactReal;
use crate::hps::Hps;
use crate::lang::pretty::to_hqb;
use crate::lang::{compile_str, typecheck, unitary_inverse, LangError, Program, Stmt, TypedProg};
use crate::memory::Addr;
use crate::prob::Probability;
use crate::semantics::{run, ExecContext};

#[derive(Debug, thiserror::Error)]
pub enum CaseError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Lang(#[from] LangError),
    #[error(transparent)]
    Assert(#[from] AssertError),
    #[error("{0}")]
    Inexact(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Expected {
    Holds,
    Fails,
}

/// A generated program together with its pre- and postcondition.
#[derive(Clone, Debug)]
pub struct CaseSpec {
    pub name: String,
    pub params: Vec<(String, String)>,
    pub source: String,
    pub program: TypedProg,
    pub pre: Hps,
    pub post: Assertion,
    pub expected: Expected,
}

impl CaseSpec {
    fn new(name: &str, params: Vec<(&str, String)>, source: String, post: Assertion, expected: Expected) -> Result<CaseSpec, CaseError> {
        let program = compile_str(&source)?;
        Ok(CaseSpec {
            name: name.to_string(),
            params: params.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
            source,
            program,
            pre: Hps::empty(),
            post,
            expected,
        })
    }

    /// Display label, e.g. `qpe(n=3, k=2, exact=false)`.
    pub fn label(&self) -> String {
        let ps: Vec<String> = self.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
        format!("{}({})", self.name, ps.join(", "))
    }

    pub fn triple(&self) -> HoareTriple {
        HoareTriple { pre: self.pre.clone(), prog: self.program.clone(), post: self.post.clone() }
    }

    pub fn check(&self, ctx: &mut ExecContext, prec: u32) -> Result<TripleReport, AssertError> {
        check_triple(&self.triple(), ctx, prec)
    }

    /// Whether `report` matches the expected verdict.
    pub fn reproduced(&self, report: &TripleReport) -> bool {
        match self.expected {
            Expected::Holds => report.verdict().holds(),
            Expected::Fails => matches!(report.verdict(), crate::assert::Verdict::Fails(_)),
        }
    }

    pub fn sidecar(&self, program_path: &str) -> Sidecar {
        Sidecar { pre: self.pre.clone(), program: Some(program_path.to_string()), post: self.post.clone() }
    }
}

fn addrs(reg: &str, n: u32) -> Vec<Addr> {
    (0..n).map(|i| Addr::new(reg, i)).collect()
}

fn inputs(n: u32) -> Vec<BoolExpr> {
    (0..n).map(|i| BoolExpr::var(Var::input(i))).collect()
}

/// Teleportation of `n` qubits: `≼ ⟨|x⃗⟩_b⟩`.
pub fn teleportation(n: u32) -> Result<CaseSpec, CaseError> {
    if n == 0 {
        return Err(CaseError::InvalidParameter("teleportation needs n >= 1".into()));
    }
    let mut s = String::new();
    let _ = writeln!(s, "qreg psi[{n}];\nqreg a[{n}];\nqreg b[{n}];\ncreg psic[{n}];\ncreg ac[{n}];");
    s.push_str("input psi;\ninit a;\ninit b;\nH(a);\nCNOT(a, b);\nCNOT(psi, a);\nH(psi);\nmeasure(psi, psic);\nmeasure(a, ac);\n");
    let _ = writeln!(s, "for i = 0..{} {{\n  ac[i] => X(b[i]);\n  psic[i] => Z(b[i]);\n}}", n - 1);
    let target = Hps::basis(addrs("b", n).into_iter().zip(inputs(n)));
    CaseSpec::new("teleportation", vec![("n", n.to_string())], s, Assertion::SatR(target), Expected::Holds)
}

/// Inverse QFT on `c[0..n]`, leaving the bits of the phase reversed.
fn inverse_qft(s: &mut String, reg: &str, n: u32) {
    for i in (0..n).rev() {
        for j in (i + 1..n).rev() {
            let _ = writeln!(s, "CZdg[{}]({reg}[{j}], {reg}[{i}]);", j - i + 1);
        }
        let _ = writeln!(s, "H({reg}[{i}]);");
    }
}

/// Phase-estimation round on `c` against `E`, measured into `C`.
fn qpe_round(s: &mut String, n: u32, m: u32) {
    s.push_str("H(c);\n");
    for i in 0..n {
        for b in 0..m {
            if i + b < m {
                let _ = writeln!(s, "CZ[{}](c[{i}], E[{b}]);", m - i - b);
            }
        }
    }
    inverse_qft(s, "c", n);
    for i in 0..n {
        let _ = writeln!(s, "measure(c[{i}], C[{}]);", n - 1 - i);
    }
}

/// Eigen-register preparation: `m` bits holding `v`.
fn prepare(s: &mut String, reg: &str, m: u32, v: u64) {
    let _ = writeln!(s, "init {reg};");
    for b in 0..m {
        if v >> b & 1 == 1 {
            let _ = writeln!(s, "X({reg}[{b}]);");
        }
    }
}

/// Phase estimation with `n` counting qubits. The oracle multiplies `|e⟩_E`
/// by `e^{2πi e/2^m}`; exact runs use `m = n` and eigen-index `k` (symbolic
/// when `None`), approximate runs use `m = n + 1` and `e = 2k + 1`, so the
/// phase lies halfway between `k` and `k + 1`.
pub fn qpe(n: u32, k: Option<u64>, exact: bool) -> Result<CaseSpec, CaseError> {
    if n == 0 || n > 62 {
        return Err(CaseError::InvalidParameter("qpe needs 1 <= n <= 62".into()));
    }
    if k.is_some_and(|k| k >> n != 0) {
        return Err(CaseError::InvalidParameter(format!("eigen-index must be below 2^{n}")));
    }
    let m = if exact { n } else { n + 1 };
    let mut s = String::new();
    let _ = writeln!(s, "qreg c[{n}];\nqreg E[{m}];\ncreg C[{n}];\ninit c;");
    let cells = addrs("C", n);
    let (cond, bound) = match (k, exact) {
        (None, true) => {
            s.push_str("input E;\n");
            (Pred::eq_exprs(&cells, inputs(n)), "1")
        }
        (None, false) => return Err(CaseError::InvalidParameter("approximate qpe needs a concrete index".into())),
        (Some(k), true) => {
            prepare(&mut s, "E", m, k);
            (Pred::eq_int(&cells, k), "1")
        }
        (Some(k), false) => {
            prepare(&mut s, "E", m, 2 * k + 1);
            (Pred::eq_int(&cells, k), "4/pi^2")
        }
    };
    qpe_round(&mut s, n, m);
    let rel = if exact { Rel::Eq } else { Rel::Ge };
    let post = Assertion::Prob { cond, rel, bound: parse_bound(bound, 64).map_err(CaseError::InvalidParameter)? };
    let k_text = k.map_or("symbolic".to_string(), |k| k.to_string());
    CaseSpec::new("qpe", vec![("n", n.to_string()), ("k", k_text), ("exact", exact.to_string())], s, post, Expected::Holds)
}

/// Body of a bounded repeat-until-success loop.
#[derive(Clone, Debug)]
pub struct BrusBody {
    pub name: String,
    /// Declarations and one-off preparation.
    pub setup: String,
    /// One attempt.
    pub body: String,
    /// Success condition in source syntax.
    pub cont: String,
    pub cont_pred: Pred,
}

impl BrusBody {
    /// Hadamard coin: measure `H|0⟩`, succeed on 1.
    pub fn h_coin() -> BrusBody {
        BrusBody {
            name: "h-coin".into(),
            setup: "qreg q[1];\ncreg c[1];\ninit q;\n".into(),
            body: "reset q[0];\nH(q[0]);\nmeasure(q[0], c[0]);\n".into(),
            cont: "c[0]".into(),
            cont_pred: Pred::eq_int(&[Addr::new("c", 0)], 1),
        }
    }

    /// Off-grid phase estimation round; succeeds when the estimate is `k`.
    pub fn qpe(n: u32, k: u64) -> Result<BrusBody, CaseError> {
        if n == 0 || n > 62 || k >> n != 0 {
            return Err(CaseError::InvalidParameter("qpe body needs 1 <= n <= 62 and k < 2^n".into()));
        }
        let m = n + 1;
        let mut setup = String::new();
        let _ = writeln!(setup, "qreg c[{n}];\nqreg E[{m}];\nqreg f[1];\ncreg C[{n}];\ncreg ok[1];");
        if n >= 3 {
            let _ = writeln!(setup, "qreg w[{}];\ninit w;", n - 2);
        }
        setup.push_str("init c;\ninit f;\n");
        prepare(&mut setup, "E", m, 2 * k + 1);
        let mut body = String::from("reset c;\nreset f;\n");
        if n >= 3 {
            body.push_str("reset w;\n");
        }
        qpe_round(&mut body, n, m);
        // c[i] now holds C[n-1-i]; flag f when every bit matches k
        for i in 0..n {
            if k >> (n - 1 - i) & 1 == 0 {
                let _ = writeln!(body, "X(c[{i}]);");
            }
        }
        match n {
            1 => body.push_str("CNOT(c[0], f[0]);\n"),
            2 => body.push_str("CCX(c[0], c[1], f[0]);\n"),
            _ => {
                body.push_str("CCX(c[0], c[1], w[0]);\n");
                for j in 1..n - 2 {
                    let _ = writeln!(body, "CCX(w[{}], c[{}], w[{j}]);", j - 1, j + 1);
                }
                let _ = writeln!(body, "CCX(w[{}], c[{}], f[0]);", n - 3, n - 1);
            }
        }
        body.push_str("measure(f[0], ok[0]);\n");
        Ok(BrusBody { name: format!("qpe{n}"), setup, body, cont: "ok[0]".into(), cont_pred: Pred::eq_int(&[Addr::new("ok", 0)], 1) })
    }

    fn source(&self, k: u32) -> String {
        let body: String = self.body.lines().map(|l| format!("  {l}\n")).collect();
        format!("{}for i = 1..{k} {{\n  !{} => {{\n{body}  }}\n}}\n", self.setup, self.cont)
    }
}

/// `k` guarded attempts of `u`; asserts `Pr(cont) ≥ 1-(1-δ)^k` and `Pr(¬cont) ≤ (1-δ)^k`.
pub fn brus(u: &BrusBody, k: u32, delta: &str) -> Result<CaseSpec, CaseError> {
    if k == 0 {
        return Err(CaseError::InvalidParameter("brus needs k >= 1".into()));
    }
    let fail = format!("(1 - ({delta}))^{k}");
    let post = Assertion::All(vec![
        Assertion::Prob { cond: u.cont_pred.clone(), rel: Rel::Ge, bound: parse_bound(&format!("1 - {fail}"), 64).map_err(CaseError::InvalidParameter)? },
        Assertion::Prob { cond: u.cont_pred.clone().not(), rel: Rel::Le, bound: parse_bound(&fail, 64).map_err(CaseError::InvalidParameter)? },
    ]);
    let params = vec![("U", u.name.clone()), ("k", k.to_string()), ("delta", delta.to_string())];
    CaseSpec::new("brus", params, u.source(k), post, Expected::Holds)
}

/// Single-attempt success probability of `u`.
pub fn brus_delta(u: &BrusBody, prec: u32) -> Result<ProbValue, CaseError> {
    let p = compile_str(&u.source(1))?;
    let h = run(&p, &mut ExecContext::new()).map_err(AssertError::from)?;
    Ok(crate::assert::probability(&h, &u.cont_pred, prec)?)
}

fn qec3_source(p: &BigRational) -> String {
    format!(
        "param p = {};
qreg psi[1];
qreg Q[2];
qreg c[2];
creg C[2];
mixed Itilde(q[1]) {{
  1 - p : skip;
  p : X(q[0]);
}}
input psi;
init Q;
CNOT(psi[0], Q[0]);
CNOT(Q[0], Q[1]);
Itilde(psi);
Itilde(Q);
init c;
H(c);
c[0] => {{ Z(psi[0]); Z(Q[0]); }}
c[1] => {{ Z(Q[0]); Z(Q[1]); }}
H(c);
measure(c, C);
C[0] & C[1] => X(Q[0]);
C[0] & !C[1] => X(psi[0]);
!C[0] & C[1] => X(Q[1]);
",
        rational_text(p)
    )
}

fn rational_text(q: &BigRational) -> String {
    if q.is_integer() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

/// `(1-p)^3 + 3p(1-p)^2`.
pub fn qec3_expected(p: &BigRational) -> BigRational {
    let q = BigRational::one() - p;
    &q * &q * &q + BigRational::from_integer(3.into()) * p * &q * &q
}

fn qec3_cond() -> Pred {
    let x = BoolExpr::var(Var::input(0));
    Pred::eq_exprs(&[Addr::new("psi", 0), Addr::new("Q", 0), Addr::new("Q", 1)], vec![x.clone(), x.clone(), x])
}

/// Bit-flip code with flip probability `p`; `Pr(⌈ψQ₀Q₁⌉ = xxx) = (1-p)³+3p(1-p)²`.
pub fn qec3(p: &BigRational) -> Result<CaseSpec, CaseError> {
    if p < &BigRational::zero() || p > &BigRational::one() {
        return Err(CaseError::InvalidParameter("qec3 needs 0 <= p <= 1".into()));
    }
    let post = Assertion::Prob { cond: qec3_cond(), rel: Rel::Eq, bound: crate::assert::Bound::Exact(ExactReal::from_rational(qec3_expected(p))) };
    CaseSpec::new("qec3", vec![("p", rational_text(p))], qec3_source(p), post, Expected::Holds)
}

/// Exact success probability of the bit-flip code at `p`.
pub fn qec3_probability(p: &BigRational) -> Result<BigRational, CaseError> {
    let case = qec3(p)?;
    let h = run(&case.program, &mut ExecContext::new()).map_err(AssertError::from)?;
    match crate::assert::probability(&h, &qec3_cond(), 64)?.value {
        Probability::Exact(e) => e.as_rational().ok_or_else(|| CaseError::Inexact(format!("irrational probability {e}"))),
        Probability::Approx(i) => Err(CaseError::Inexact(format!("probability only enclosed in {i}"))),
    }
}

/// Success probability of the bit-flip code as a polynomial in `p`
/// (coefficients from degree 0), interpolated exactly through `points`.
pub fn qec3_polynomial(points: &[BigRational]) -> Result<Vec<BigRational>, CaseError> {
    let values = points.iter().map(qec3_probability).collect::<Result<Vec<_>, _>>()?;
    Ok(lagrange(points, &values))
}

/// Exact interpolating polynomial through `(xs[i], ys[i])`.
pub fn lagrange(xs: &[BigRational], ys: &[BigRational]) -> Vec<BigRational> {
    let n = xs.len();
    let mut out = vec![BigRational::zero(); n];
    for i in 0..n {
        let mut basis = vec![BigRational::one()];
        let mut denom = BigRational::one();
        for j in (0..n).filter(|&j| j != i) {
            let mut next = vec![BigRational::zero(); basis.len() + 1];
            for (d, c) in basis.iter().enumerate() {
                next[d + 1] += c;
                next[d] -= c * &xs[j];
            }
            basis = next;
            denom *= &xs[i] - &xs[j];
        }
        for (d, c) in basis.iter().enumerate() {
            out[d] += c * &ys[i] / &denom;
        }
    }
    while out.len() > 1 && out.last().is_some_and(Zero::is_zero) {
        out.pop();
    }
    out
}

/// Gate of a QFT-style circuit over `q`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CGate {
    H(u32),
    X(u32),
    Z(u32, u32),
    Zdg(u32, u32),
    CZ(u32, u32, u32),
    CZdg(u32, u32, u32),
    CX(u32, u32),
}

impl CGate {
    fn qubits(self) -> Vec<u32> {
        match self {
            CGate::H(q) | CGate::X(q) | CGate::Z(_, q) | CGate::Zdg(_, q) => vec![q],
            CGate::CZ(_, a, b) | CGate::CZdg(_, a, b) | CGate::CX(a, b) => vec![a, b],
        }
    }

    fn diagonal(self) -> bool {
        matches!(self, CGate::Z(..) | CGate::Zdg(..) | CGate::CZ(..) | CGate::CZdg(..))
    }

    fn commutes(self, o: CGate) -> bool {
        (self.diagonal() && o.diagonal()) || self.qubits().iter().all(|q| !o.qubits().contains(q))
    }

    pub fn inverse(self) -> CGate {
        match self {
            CGate::Z(k, q) if k > 1 => CGate::Zdg(k, q),
            CGate::Zdg(k, q) => CGate::Z(k, q),
            CGate::CZ(k, a, b) if k > 1 => CGate::CZdg(k, a, b),
            CGate::CZdg(k, a, b) => CGate::CZ(k, a, b),
            g => g,
        }
    }

    fn text(self) -> String {
        match self {
            CGate::H(q) => format!("H(q[{q}]);"),
            CGate::X(q) => format!("X(q[{q}]);"),
            CGate::Z(k, q) => format!("Z[{k}](q[{q}]);"),
            CGate::Zdg(k, q) => format!("Zdg[{k}](q[{q}]);"),
            CGate::CZ(k, a, b) => format!("CZ[{k}](q[{a}], q[{b}]);"),
            CGate::CZdg(k, a, b) => format!("CZdg[{k}](q[{a}], q[{b}]);"),
            CGate::CX(a, b) => format!("CNOT(q[{a}], q[{b}]);"),
        }
    }
}

/// QFT on `n` qubits (no final swaps).
pub fn qft_gates(n: u32) -> Vec<CGate> {
    let mut g = Vec::new();
    for i in 0..n {
        g.push(CGate::H(i));
        for j in i + 1..n {
            g.push(CGate::CZ(j - i + 1, j, i));
        }
    }
    g
}

/// QFT with commuting gates shuffled and identity gadgets inserted;
/// `inject` adds one stray `Z_2`.
pub fn qft_variant_gates(n: u32, seed: u64, inject: bool) -> Vec<CGate> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = qft_gates(n);
    for _ in 0..4 * g.len() {
        let i = rng.gen_range(0..g.len() - 1);
        if g[i].commutes(g[i + 1]) {
            g.swap(i, i + 1);
        }
    }
    for _ in 0..n {
        let a = rng.gen_range(0..n);
        let b = (a + rng.gen_range(1..n)) % n;
        let gadgets: [Vec<CGate>; 5] = [
            vec![CGate::H(a), CGate::H(a)],
            vec![CGate::X(a), CGate::X(a)],
            vec![CGate::Z(2, a), CGate::Zdg(2, a)],
            vec![CGate::CX(a, b), CGate::CX(a, b)],
            vec![CGate::H(a), CGate::Z(1, a), CGate::H(a), CGate::X(a)],
        ];
        let gadget = gadgets.choose(&mut rng).expect("non-empty").clone();
        let at = rng.gen_range(0..=g.len());
        g.splice(at..at, gadget);
    }
    if inject {
        let at = rng.gen_range(0..=g.len());
        g.insert(at, CGate::Z(2, rng.gen_range(0..n)));
    }
    g
}

/// Standalone program `qreg q[n]; input q; gates`.
pub fn circuit_source(n: u32, gates: &[CGate]) -> String {
    let mut s = format!("qreg q[{n}];\ninput q;\n");
    for g in gates {
        s.push_str(&g.text());
        s.push('\n');
    }
    s
}

fn unitary_part(p: &Program) -> Vec<Stmt> {
    p.body.iter().filter(|s| !matches!(s, Stmt::Init(_) | Stmt::Input(_))).cloned().collect()
}

/// `input` on every qubit of `a` and `b`, then `a`, then `b†`; allocation
/// statements of both are dropped.
pub fn miter(a: &Program, b: &Program) -> Result<Program, String> {
    let inv = unitary_inverse(b, &unitary_part(b)).ok_or("second program is not a unitary block")?;
    if unitary_inverse(a, &unitary_part(a)).is_none() {
        return Err("first program is not a unitary block".into());
    }
    let mut qregs = a.qregs.clone();
    for r in &b.qregs {
        match qregs.iter().find(|(n, _)| *n == r.0) {
            Some(x) if x.1 != r.1 => return Err(format!("register `{}` has widths {} and {}", r.0, x.1, r.1)),
            Some(_) => {}
            None => qregs.push(r.clone()),
        }
    }
    let mut cregs = a.cregs.clone();
    for r in &b.cregs {
        if !cregs.contains(r) {
            cregs.push(r.clone());
        }
    }
    let all: BTreeSet<Addr> = a.qaddrs().into_iter().chain(b.qaddrs()).collect();
    let mut body = vec![Stmt::Input(all.into_iter().collect())];
    body.extend(unitary_part(a));
    body.extend(inv);
    Ok(Program { qregs, cregs, body })
}

/// Identity target on every qubit of `p`, inputs numbered in address order.
pub fn identity_target(p: &Program) -> Hps {
    let q: BTreeSet<Addr> = p.qaddrs().into_iter().collect();
    Hps::basis(q.into_iter().enumerate().map(|(i, a)| (a, BoolExpr::var(Var::input(i as u32)))))
}

/// `QFT ; variant† ≡ id`.
pub fn qft_equiv(n: u32, seed: u64, inject: bool) -> Result<CaseSpec, CaseError> {
    if n < 2 {
        return Err(CaseError::InvalidParameter("qft_equiv needs n >= 2".into()));
    }
    let a = compile_str(&circuit_source(n, &qft_gates(n)))?.program;
    let b = compile_str(&circuit_source(n, &qft_variant_gates(n, seed, inject)))?.program;
    let m = miter(&a, &b).map_err(CaseError::InvalidParameter)?;
    let target = identity_target(&m);
    let source = to_hqb(&m);
    let program = typecheck(m).map_err(LangError::from)?;
    let params = vec![("n".to_string(), n.to_string()), ("seed".to_string(), seed.to_string()), ("inject".to_string(), inject.to_string())];
    Ok(CaseSpec {
        name: "qft_equiv".into(),
        params,
        source,
        program,
        pre: Hps::empty(),
        post: Assertion::EquivR(target),
        expected: if inject { Expected::Fails } else { Expected::Holds },
    })
}

/// Named suites for the benchmark harness.
pub fn suite(name: &str, scale: u32) -> Result<Vec<CaseSpec>, CaseError> {
    let scale = scale.max(1);
    Ok(match name {
        "teleportation" => vec![teleportation(scale)?],
        "qpe" => vec![qpe(scale, None, true)?, qpe(scale, Some(0), false)?],
        "brus" => vec![brus(&BrusBody::h_coin(), scale, "1/2")?],
        "brus-qpe" => vec![brus(&BrusBody::qpe(3, 2)?, scale, "4/pi^2")?],
        "qec" => vec![qec3(&BigRational::new(BigInt::from(1), BigInt::from(10)))?],
        "qft" => vec![qft_equiv(scale.max(2), 1, false)?],
        "all" => vec![
            teleportation(scale)?,
            qpe(3, None, true)?,
            qpe(3, Some(2), false)?,
            brus(&BrusBody::h_coin(), scale, "1/2")?,
            qec3(&BigRational::new(BigInt::from(1), BigInt::from(10)))?,
            qft_equiv(8, scale as u64, false)?,
        ],
        s => return Err(CaseError::InvalidParameter(format!("unknown suite `{s}`"))),
    })
}

pub const SUITES: &[&str] = &["teleportation", "qpe", "brus", "brus-qpe", "qec", "qft", "all"];

/// `Pr(cont)` after one attempt, compared against `δ`.
pub fn verify_delta(u: &BrusBody, delta: &str, prec: u32) -> Result<crate::assert::ProbCheck, CaseError> {
    let p = compile_str(&u.source(1))?;
    let h = run(&p, &mut ExecContext::new()).map_err(AssertError::from)?;
    let bound = parse_bound(delta, prec).map_err(CaseError::InvalidParameter)?;
    Ok(check_prob(&h, &u.cont_pred, Rel::Ge, &bound, prec)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    fn holds(c: &CaseSpec) -> TripleReport {
        let r = c.check(&mut ExecContext::new(), 64).unwrap();
        assert!(c.reproduced(&r), "{}: {}", c.label(), r.verdict());
        r
    }

    #[test]
    fn teleportation_small() {
        holds(&teleportation(1).unwrap());
        holds(&teleportation(3).unwrap());
    }

    #[test]
    fn qpe_exact_and_concrete() {
        holds(&qpe(2, None, true).unwrap());
        holds(&qpe(2, Some(1), true).unwrap());
        holds(&qpe(3, Some(5), true).unwrap());
    }

    #[test]
    fn qpe_approximate_three() {
        let r = holds(&qpe(3, Some(2), false).unwrap());
        let p = r.check.probability.unwrap().value.to_f64();
        let d = 1.0 / (64.0 * (std::f64::consts::PI / 16.0).sin().powi(2));
        assert!((p - d).abs() < 1e-9, "{p} vs {d}");
    }

    #[test]
    fn brus_h_coin() {
        let r = holds(&brus(&BrusBody::h_coin(), 4, "1/2").unwrap());
        assert_eq!(r.check.parts[0].probability.as_ref().unwrap().value.as_exact(), Some(&ExactReal::from_ratio(15, 16)));
        assert!(verify_delta(&BrusBody::h_coin(), "1/2", 64).unwrap().verdict.holds());
    }

    #[test]
    fn brus_qpe_three() {
        let u = BrusBody::qpe(3, 2).unwrap();
        let d = brus_delta(&u, 64).unwrap().value.to_f64();
        let want = 1.0 / (64.0 * (std::f64::consts::PI / 16.0).sin().powi(2));
        assert!((d - want).abs() < 1e-9, "{d} vs {want}");
        holds(&brus(&u, 2, "4/pi^2").unwrap());
    }

    #[test]
    fn case_programs_round_trip_through_qasm() {
        use crate::lang::qasm;
        let cases = [
            teleportation(2).unwrap(),
            qpe(3, Some(2), false).unwrap(),
            brus(&BrusBody::h_coin(), 3, "1/2").unwrap(),
            brus(&BrusBody::qpe(3, 2).unwrap(), 2, "4/pi^2").unwrap(),
            qec3(&q(1, 10)).unwrap(),
            qft_equiv(3, 1, false).unwrap(),
        ];
        for c in &cases {
            let text = qasm::export(&c.program.program).unwrap_or_else(|e| panic!("{}: {e}", c.label()));
            let back = qasm::import(&text).unwrap();
            assert!(qasm::alpha_equivalent(&c.program.program, &back), "{}", c.label());
        }
    }

    #[test]
    fn qec3_values() {
        for p in [q(0, 1), q(1, 10), q(1, 4)] {
            holds(&qec3(&p).unwrap());
        }
        assert_eq!(qec3_probability(&q(1, 4)).unwrap(), q(54, 64));
    }

    #[test]
    fn lagrange_recovers_cubic() {
        let xs: Vec<BigRational> = (0..5).map(|i| q(i, 3)).collect();
        let ys: Vec<BigRational> = xs.iter().map(qec3_expected).collect();
        assert_eq!(lagrange(&xs, &ys), vec![q(1, 1), q(0, 1), q(-3, 1), q(2, 1)]);
    }

    #[test]
    fn qft_equivalence_small() {
        holds(&qft_equiv(3, 7, false).unwrap());
        holds(&qft_equiv(4, 2, true).unwrap());
    }

    #[test]
    fn variant_is_a_permutation_plus_gadgets() {
        let g = qft_variant_gates(5, 3, false);
        let base = qft_gates(5);
        assert!(g.len() > base.len());
        for x in &base {
            assert!(g.iter().filter(|y| *y == x).count() >= base.iter().filter(|y| *y == x).count());
        }
    }
}
