//! Elaborated programs: concrete addresses, no parameters, loops or macros.

use num_rational::BigRational;
use num_traits::{One, Zero};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use crate::boolexpr::{BoolExpr, Var};
use crate::memory::Addr;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Gate {
    H,
    X,
    /// Phase `e^{2πi/2^k}` on `|1⟩`.
    Z(u32),
    /// Inverse of `Z(k)`.
    Zdg(u32),
}

impl Gate {
    pub fn inverse(self) -> Gate {
        match self {
            Gate::Z(k) if k > 1 => Gate::Zdg(k),
            Gate::Zdg(k) => Gate::Z(k),
            g => g,
        }
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Gate::H => f.write_str("H"),
            Gate::X => f.write_str("X"),
            Gate::Z(k) => write!(f, "Z[{k}]"),
            Gate::Zdg(k) => write!(f, "Zdg[{k}]"),
        }
    }
}

/// Boolean condition over memory cells.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum BExp {
    Const(bool),
    Bit(Addr),
    Not(Box<BExp>),
    And(Box<BExp>, Box<BExp>),
    Xor(Box<BExp>, Box<BExp>),
    Or(Box<BExp>, Box<BExp>),
}

impl BExp {
    pub fn not(self) -> BExp {
        BExp::Not(Box::new(self))
    }

    pub fn and(self, o: BExp) -> BExp {
        BExp::And(Box::new(self), Box::new(o))
    }

    pub fn xor(self, o: BExp) -> BExp {
        BExp::Xor(Box::new(self), Box::new(o))
    }

    pub fn or(self, o: BExp) -> BExp {
        BExp::Or(Box::new(self), Box::new(o))
    }

    /// Conjunction of the bits of a register.
    pub fn all(addrs: &[Addr]) -> BExp {
        addrs.iter().map(|a| BExp::Bit(a.clone())).reduce(BExp::and).unwrap_or(BExp::Const(true))
    }

    /// `⌈r⌉ = n`, bit 0 least significant.
    pub fn equals(addrs: &[Addr], n: u64) -> BExp {
        addrs
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let b = BExp::Bit(a.clone());
                if n >> i & 1 == 1 {
                    b
                } else {
                    b.not()
                }
            })
            .reduce(BExp::and)
            .unwrap_or(BExp::Const(true))
    }

    pub fn collect_addrs(&self, out: &mut BTreeSet<Addr>) {
        match self {
            BExp::Const(_) => {}
            BExp::Bit(a) => {
                out.insert(a.clone());
            }
            BExp::Not(e) => e.collect_addrs(out),
            BExp::And(a, b) | BExp::Xor(a, b) | BExp::Or(a, b) => {
                a.collect_addrs(out);
                b.collect_addrs(out);
            }
        }
    }

    pub fn addrs(&self) -> BTreeSet<Addr> {
        let mut s = BTreeSet::new();
        self.collect_addrs(&mut s);
        s
    }

    /// ANF with each cell replaced by `read(cell)`.
    pub fn to_boolexpr<E>(&self, read: &mut dyn FnMut(&Addr) -> Result<BoolExpr, E>) -> Result<BoolExpr, E> {
        Ok(match self {
            BExp::Const(b) => BoolExpr::constant(*b),
            BExp::Bit(a) => read(a)?,
            BExp::Not(e) => e.to_boolexpr(read)?.not(),
            BExp::And(a, b) => a.to_boolexpr(read)?.and(&b.to_boolexpr(read)?),
            BExp::Xor(a, b) => a.to_boolexpr(read)?.xor(&b.to_boolexpr(read)?),
            BExp::Or(a, b) => a.to_boolexpr(read)?.or(&b.to_boolexpr(read)?),
        })
    }

    /// ANF over placeholder variables, one per cell in `index` order.
    pub fn anf(&self, index: &BTreeMap<Addr, u32>) -> BoolExpr {
        self.to_boolexpr::<()>(&mut |a| Ok(BoolExpr::var(Var::input(index[a])))).unwrap()
    }

    pub fn eval(&self, get: &dyn Fn(&Addr) -> bool) -> bool {
        match self {
            BExp::Const(b) => *b,
            BExp::Bit(a) => get(a),
            BExp::Not(e) => !e.eval(get),
            BExp::And(a, b) => a.eval(get) && b.eval(get),
            BExp::Xor(a, b) => a.eval(get) ^ b.eval(get),
            BExp::Or(a, b) => a.eval(get) || b.eval(get),
        }
    }

    pub fn map_addrs(&self, f: &dyn Fn(&Addr) -> Addr) -> BExp {
        match self {
            BExp::Const(b) => BExp::Const(*b),
            BExp::Bit(a) => BExp::Bit(f(a)),
            BExp::Not(e) => e.map_addrs(f).not(),
            BExp::And(a, b) => a.map_addrs(f).and(b.map_addrs(f)),
            BExp::Xor(a, b) => a.map_addrs(f).xor(b.map_addrs(f)),
            BExp::Or(a, b) => a.map_addrs(f).or(b.map_addrs(f)),
        }
    }
}

impl fmt::Display for BExp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BExp::Const(b) => write!(f, "{b}"),
            BExp::Bit(a) => write!(f, "{a}"),
            BExp::Not(e) => write!(f, "!{e}"),
            BExp::And(a, b) => write!(f, "({a} & {b})"),
            BExp::Xor(a, b) => write!(f, "({a} ^ {b})"),
            BExp::Or(a, b) => write!(f, "({a} | {b})"),
        }
    }
}

/// Boolean circuit `C1 := f(C2)`; outputs are written over placeholders
/// `x0..x{inputs-1}` standing for the argument bits.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Oracle {
    pub name: String,
    pub inputs: usize,
    pub outputs: Vec<BoolExpr>,
}

impl Oracle {
    pub fn apply(&self, args: &[BoolExpr]) -> Vec<BoolExpr> {
        let sigma: BTreeMap<Var, BoolExpr> = args.iter().enumerate().map(|(i, e)| (Var::input(i as u32), e.clone())).collect();
        self.outputs.iter().map(|o| o.substitute(&sigma)).collect()
    }
}

/// Formal register used inside mixed-gate bodies.
pub const FORMAL: &str = "%q";

/// Probabilistic choice among unitaries; branch `w` has weight `weights[w]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MixedGate {
    pub name: String,
    pub arity: u32,
    pub weights: Vec<BigRational>,
    /// Bodies over `%q[0..arity]`.
    pub bodies: Vec<Vec<Stmt>>,
}

impl MixedGate {
    /// Number of selector bits.
    pub fn width(&self) -> u32 {
        let n = self.weights.len().max(1);
        usize::BITS - (n - 1).leading_zeros()
    }

    /// Weight of branch `w`, zero past the declared branches.
    pub fn weight(&self, w: usize) -> BigRational {
        self.weights.get(w).cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn body(&self, w: usize, qubits: &[Addr]) -> Vec<Stmt> {
        let f = |a: &Addr| if &*a.reg == FORMAL { qubits[a.idx as usize].clone() } else { a.clone() };
        self.bodies.get(w).map(|b| b.iter().map(|s| s.map_addrs(&f)).collect()).unwrap_or_default()
    }

    pub fn weights_valid(&self) -> bool {
        self.weights.iter().all(|w| *w >= BigRational::zero()) && self.weights.iter().sum::<BigRational>() == BigRational::one()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Stmt {
    Skip,
    /// Allocate cells to `|0⟩`.
    Init(Vec<Addr>),
    /// Allocate cells to symbolic basis inputs.
    Input(Vec<Addr>),
    Gate(Gate, Addr),
    Measure { q: Vec<Addr>, c: Vec<Addr> },
    Assign { target: Vec<Addr>, oracle: Arc<Oracle>, args: Vec<Addr> },
    If { cond: BExp, then: Vec<Stmt>, els: Vec<Stmt> },
    Mixed { gate: Arc<MixedGate>, qubits: Vec<Addr> },
    /// Measure into scratch, then flip back to `|0⟩`.
    Reset(Addr),
}

impl Stmt {
    pub fn map_addrs(&self, f: &dyn Fn(&Addr) -> Addr) -> Stmt {
        let m = |v: &[Addr]| v.iter().map(f).collect::<Vec<_>>();
        let mb = |v: &[Stmt]| v.iter().map(|s| s.map_addrs(f)).collect::<Vec<_>>();
        match self {
            Stmt::Skip => Stmt::Skip,
            Stmt::Init(a) => Stmt::Init(m(a)),
            Stmt::Input(a) => Stmt::Input(m(a)),
            Stmt::Gate(g, a) => Stmt::Gate(*g, f(a)),
            Stmt::Measure { q, c } => Stmt::Measure { q: m(q), c: m(c) },
            Stmt::Assign { target, oracle, args } => Stmt::Assign { target: m(target), oracle: oracle.clone(), args: m(args) },
            Stmt::If { cond, then, els } => Stmt::If { cond: cond.map_addrs(f), then: mb(then), els: mb(els) },
            Stmt::Mixed { gate, qubits } => Stmt::Mixed { gate: gate.clone(), qubits: m(qubits) },
            Stmt::Reset(a) => Stmt::Reset(f(a)),
        }
    }

    /// Quantum cells written by the statement.
    pub fn qwrites(&self, out: &mut BTreeSet<Addr>) {
        match self {
            Stmt::Init(a) | Stmt::Input(a) => out.extend(a.iter().cloned()),
            Stmt::Gate(_, a) | Stmt::Reset(a) => {
                out.insert(a.clone());
            }
            Stmt::If { then, els, .. } => {
                for s in then.iter().chain(els) {
                    s.qwrites(out);
                }
            }
            Stmt::Mixed { qubits, .. } => out.extend(qubits.iter().cloned()),
            _ => {}
        }
    }

    /// Classical cells written by the statement.
    pub fn cwrites(&self, out: &mut BTreeSet<Addr>) {
        match self {
            Stmt::Measure { c, .. } => out.extend(c.iter().cloned()),
            Stmt::Assign { target, .. } => out.extend(target.iter().cloned()),
            Stmt::If { then, els, .. } => {
                for s in then.iter().chain(els) {
                    s.cwrites(out);
                }
            }
            _ => {}
        }
    }

    pub fn gate_count(&self) -> usize {
        match self {
            Stmt::Gate(..) => 1,
            Stmt::If { cond, then, els } => {
                let inner: usize = then.iter().chain(els).map(Stmt::gate_count).sum();
                if cond.addrs().is_empty() {
                    inner
                } else {
                    inner.max(1)
                }
            }
            Stmt::Mixed { qubits, .. } => qubits.len(),
            Stmt::Measure { q, .. } => q.len(),
            Stmt::Reset(_) => 1,
            _ => 0,
        }
    }
}

/// Adjoint of a unitary block; `None` if the block measures, allocates or branches on classical data.
pub fn unitary_inverse(p: &Program, body: &[Stmt]) -> Option<Vec<Stmt>> {
    let mut out = Vec::with_capacity(body.len());
    for s in body.iter().rev() {
        out.push(match s {
            Stmt::Skip => Stmt::Skip,
            Stmt::Gate(g, a) => Stmt::Gate(g.inverse(), a.clone()),
            Stmt::If { cond, then, els } if cond.addrs().iter().all(|a| p.is_quantum(a)) => {
                Stmt::If { cond: cond.clone(), then: unitary_inverse(p, then)?, els: unitary_inverse(p, els)? }
            }
            _ => return None,
        });
    }
    Some(out)
}

/// A whole elaborated program.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Program {
    pub qregs: Vec<(String, u32)>,
    pub cregs: Vec<(String, u32)>,
    pub body: Vec<Stmt>,
}

impl Program {
    pub fn is_quantum(&self, a: &Addr) -> bool {
        self.qregs.iter().any(|(n, _)| **n == *a.reg)
    }

    pub fn is_classical(&self, a: &Addr) -> bool {
        self.cregs.iter().any(|(n, _)| **n == *a.reg)
    }

    pub fn qaddrs(&self) -> Vec<Addr> {
        self.qregs.iter().flat_map(|(n, w)| (0..*w).map(move |i| Addr::new(n, i))).collect()
    }

    pub fn caddrs(&self) -> Vec<Addr> {
        self.cregs.iter().flat_map(|(n, w)| (0..*w).map(move |i| Addr::new(n, i))).collect()
    }

    pub fn width(&self, reg: &str) -> Option<u32> {
        self.qregs.iter().chain(&self.cregs).find(|(n, _)| n == reg).map(|(_, w)| *w)
    }

    pub fn gate_count(&self) -> usize {
        self.body.iter().map(Stmt::gate_count).sum()
    }

    /// Wire count: quantum plus classical bits.
    pub fn wires(&self) -> usize {
        self.qregs.iter().chain(&self.cregs).map(|(_, w)| *w as usize).sum()
    }

    /// Inverse of a unitary statement list.
    pub fn inverse(body: &[Stmt]) -> Option<Vec<Stmt>> {
        body.iter()
            .rev()
            .map(|s| match s {
                Stmt::Skip => Some(Stmt::Skip),
                Stmt::Gate(g, a) => Some(Stmt::Gate(g.inverse(), a.clone())),
                Stmt::If { cond, then, els } => Some(Stmt::If {
                    cond: cond.clone(),
                    then: Program::inverse(then)?,
                    els: Program::inverse(els)?,
                }),
                _ => None,
            })
            .collect()
    }
}
