//! Hybrid memories: quantum cells and classical history columns.

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::boolexpr::{BoolExpr, MissingVar, Var};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum MemoryError {
    #[error("unallocated address {0}")]
    UnallocatedAddress(Addr),
    #[error("read of a hole at {0}")]
    HoleRead(Addr),
    #[error("register {0} is not readable")]
    Unreadable(Addr),
    #[error("address {0} present in both memories")]
    AddressClash(Addr),
    #[error("classical ages differ ({0} vs {1})")]
    AgeMismatch(usize, usize),
    #[error("memories have different address sets")]
    ShapeMismatch,
    #[error(transparent)]
    Missing(#[from] MissingVar),
}

/// A single bit address `reg[idx]`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Addr {
    pub reg: Arc<str>,
    pub idx: u32,
}

impl Addr {
    pub fn new(reg: &str, idx: u32) -> Addr {
        Addr { reg: Arc::from(reg), idx }
    }
}

impl fmt::Display for Addr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{}]", self.reg, self.idx)
    }
}

impl FromStr for Addr {
    type Err = String;
    fn from_str(s: &str) -> Result<Addr, String> {
        let s = s.trim();
        let open = s.find('[').ok_or_else(|| format!("bad address {s:?}"))?;
        let idx = s[open + 1..]
            .strip_suffix(']')
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| format!("bad address {s:?}"))?;
        Ok(Addr::new(&s[..open], idx))
    }
}

impl Serialize for Addr {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Addr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Addr, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A history cell: holds `val` where `def` is true, a hole elsewhere.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Entry {
    pub def: BoolExpr,
    pub val: BoolExpr,
}

impl Entry {
    pub fn value(val: BoolExpr) -> Entry {
        Entry { def: BoolExpr::one(), val }
    }

    fn map(&self, f: &dyn Fn(&BoolExpr) -> BoolExpr) -> Entry {
        Entry { def: f(&self.def), val: f(&self.val) }
    }

    fn is_hole(&self) -> bool {
        self.def.is_zero()
    }
}

/// Per-column history stacks with a shared age. Rows not listed are holes.
#[derive(Clone, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ClassicalMemory {
    columns: BTreeMap<Addr, Vec<(usize, Entry)>>,
    age: usize,
    hidden: BTreeSet<Arc<str>>,
}

impl ClassicalMemory {
    pub fn from_parts(columns: BTreeMap<Addr, Vec<(usize, Entry)>>, age: usize, hidden: BTreeSet<Arc<str>>) -> ClassicalMemory {
        ClassicalMemory { columns, age, hidden }
    }

    pub fn age(&self) -> usize {
        self.age
    }

    pub fn set_age(&mut self, age: usize) {
        self.age = age;
    }

    pub fn columns(&self) -> impl Iterator<Item = (&Addr, &Vec<(usize, Entry)>)> {
        self.columns.iter()
    }

    pub fn addrs(&self) -> impl Iterator<Item = &Addr> {
        self.columns.keys()
    }

    pub fn num_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn contains(&self, a: &Addr) -> bool {
        self.columns.contains_key(a)
    }

    pub fn is_hidden(&self, a: &Addr) -> bool {
        self.hidden.contains(&a.reg)
    }

    pub fn hidden(&self) -> &BTreeSet<Arc<str>> {
        &self.hidden
    }

    /// Marks a register as program-unreadable.
    pub fn hide(&mut self, reg: &str) {
        self.hidden.insert(Arc::from(reg));
    }

    /// Adds an all-hole column.
    pub fn alloc(&mut self, a: Addr) {
        self.columns.entry(a).or_default();
    }

    pub fn column(&self, a: &Addr) -> Option<&[(usize, Entry)]> {
        self.columns.get(a).map(|v| v.as_slice())
    }

    /// Entry at a given row, `None` for a syntactic hole.
    pub fn entry(&self, a: &Addr, row: usize) -> Option<&Entry> {
        let col = self.columns.get(a)?;
        col.binary_search_by_key(&row, |(r, _)| *r).ok().map(|i| &col[i].1)
    }

    /// Present value regardless of readability.
    pub fn present_raw(&self, a: &Addr) -> Result<BoolExpr, MemoryError> {
        let col = self.columns.get(a).ok_or_else(|| MemoryError::UnallocatedAddress(a.clone()))?;
        let mut def = BoolExpr::zero();
        let mut val = BoolExpr::zero();
        for (_, e) in col {
            if e.def.is_one() {
                def = BoolExpr::one();
                val = e.val.clone();
            } else {
                val = BoolExpr::select(&e.def, &val, &e.val);
                def = def.or(&e.def);
            }
        }
        if def.is_one() {
            Ok(val)
        } else {
            Err(MemoryError::HoleRead(a.clone()))
        }
    }

    /// Present value with holes read as `0`; unallocated columns read as `0`.
    pub fn present_or_zero(&self, a: &Addr) -> BoolExpr {
        let Some(col) = self.columns.get(a) else {
            return BoolExpr::zero();
        };
        let mut val = BoolExpr::zero();
        for (_, e) in col {
            val = if e.def.is_one() { e.val.clone() } else { BoolExpr::select(&e.def, &val, &e.val) };
        }
        val
    }

    pub fn read_present(&self, a: &Addr) -> Result<BoolExpr, MemoryError> {
        if self.is_hidden(a) && self.columns.contains_key(a) {
            return Err(MemoryError::Unreadable(a.clone()));
        }
        self.present_raw(a)
    }

    /// Appends one row; `writes` fill it, other columns get holes.
    pub fn push(&mut self, writes: &[(Addr, BoolExpr)]) -> Result<(), MemoryError> {
        for (a, _) in writes {
            if !self.columns.contains_key(a) {
                return Err(MemoryError::UnallocatedAddress(a.clone()));
            }
        }
        let row = self.age;
        for (a, b) in writes {
            let col = self.columns.get_mut(a).unwrap();
            if let Some((r, e)) = col.last_mut() {
                if *r == row {
                    *e = Entry::value(b.clone());
                    continue;
                }
            }
            col.push((row, Entry::value(b.clone())));
        }
        self.age += 1;
        Ok(())
    }

    /// Appends `k` all-hole rows.
    pub fn pad(&mut self, k: usize) {
        self.age += k;
    }

    pub fn map_exprs(&self, f: &dyn Fn(&BoolExpr) -> BoolExpr) -> ClassicalMemory {
        let columns = self
            .columns
            .iter()
            .map(|(a, col)| {
                let col = col
                    .iter()
                    .map(|(r, e)| (*r, e.map(f)))
                    .filter(|(_, e)| !e.is_hole())
                    .collect();
                (a.clone(), col)
            })
            .collect();
        ClassicalMemory { columns, age: self.age, hidden: self.hidden.clone() }
    }

    pub fn collect_vars(&self, s: &mut BTreeSet<Var>) {
        for col in self.columns.values() {
            for (_, e) in col {
                e.def.collect_vars(s);
                e.val.collect_vars(s);
            }
        }
    }

    /// Pointwise `select(c, self, other)`; shapes must agree.
    pub fn select(c: &BoolExpr, if_false: &ClassicalMemory, if_true: &ClassicalMemory) -> Result<ClassicalMemory, MemoryError> {
        if if_false.age != if_true.age {
            return Err(MemoryError::AgeMismatch(if_false.age, if_true.age));
        }
        if !if_false.columns.keys().eq(if_true.columns.keys()) {
            return Err(MemoryError::ShapeMismatch);
        }
        let hole = Entry { def: BoolExpr::zero(), val: BoolExpr::zero() };
        let mut columns = BTreeMap::new();
        for (a, cf) in &if_false.columns {
            let ct = &if_true.columns[a];
            let rows: BTreeSet<usize> = cf.iter().chain(ct.iter()).map(|(r, _)| *r).collect();
            let mut col = Vec::with_capacity(rows.len());
            for r in rows {
                let ef = cf.iter().find(|(x, _)| *x == r).map(|(_, e)| e).unwrap_or(&hole);
                let et = ct.iter().find(|(x, _)| *x == r).map(|(_, e)| e).unwrap_or(&hole);
                let e = if ef == et {
                    ef.clone()
                } else {
                    Entry {
                        def: BoolExpr::select(c, &ef.def, &et.def),
                        val: BoolExpr::select(c, &ef.val, &et.val),
                    }
                };
                if !e.is_hole() {
                    col.push((r, e));
                }
            }
            columns.insert(a.clone(), col);
        }
        let mut hidden = if_false.hidden.clone();
        hidden.extend(if_true.hidden.iter().cloned());
        Ok(ClassicalMemory { columns, age: if_false.age, hidden })
    }

    /// Instantiates the table under an assignment: per column, per row,
    /// `0` hole, `1` false, `2` true.
    pub fn instantiate(&self, rho: &dyn Fn(Var) -> Option<bool>) -> Result<Vec<Vec<u8>>, MemoryError> {
        let mut out = Vec::with_capacity(self.columns.len());
        for col in self.columns.values() {
            let mut row = vec![0u8; self.age];
            for (r, e) in col {
                if e.def.evaluate(rho)? {
                    row[*r] = 1 + e.val.evaluate(rho)? as u8;
                }
            }
            out.push(row);
        }
        Ok(out)
    }

    /// Splits off the given columns.
    pub fn partition(&self, keep: &BTreeSet<Addr>) -> (ClassicalMemory, ClassicalMemory) {
        let mut a = ClassicalMemory { columns: BTreeMap::new(), age: self.age, hidden: self.hidden.clone() };
        let mut b = a.clone();
        for (k, col) in &self.columns {
            if keep.contains(k) {
                a.columns.insert(k.clone(), col.clone());
            } else {
                b.columns.insert(k.clone(), col.clone());
            }
        }
        for m in [&mut a, &mut b] {
            if m.columns.is_empty() {
                m.age = 0;
            }
            let regs: BTreeSet<Arc<str>> = m.columns.keys().map(|a| a.reg.clone()).collect();
            m.hidden.retain(|r| regs.contains(r));
        }
        (a, b)
    }

    /// Widens to include every column of `other` (as holes) and its age.
    pub fn conform(&mut self, other: &ClassicalMemory) {
        for a in other.columns.keys() {
            self.columns.entry(a.clone()).or_default();
        }
        self.hidden.extend(other.hidden.iter().cloned());
        if self.age < other.age {
            self.age = other.age;
        }
    }

    pub fn disjoint_union(&self, o: &ClassicalMemory) -> Result<ClassicalMemory, MemoryError> {
        for a in o.columns.keys() {
            if self.columns.contains_key(a) {
                return Err(MemoryError::AddressClash(a.clone()));
            }
        }
        let age = if self.columns.is_empty() {
            o.age.max(if o.columns.is_empty() { self.age } else { 0 })
        } else if o.columns.is_empty() || o.age == self.age {
            self.age
        } else {
            return Err(MemoryError::AgeMismatch(self.age, o.age));
        };
        let mut columns = self.columns.clone();
        columns.extend(o.columns.iter().map(|(a, c)| (a.clone(), c.clone())));
        let mut hidden = self.hidden.clone();
        hidden.extend(o.hidden.iter().cloned());
        Ok(ClassicalMemory { columns, age, hidden })
    }

    /// JSON table rows × columns; holes are `null`.
    pub fn to_json_table(&self) -> serde_json::Value {
        let names: Vec<String> = self.columns.keys().map(|a| a.to_string()).collect();
        let rows: Vec<serde_json::Value> = (0..self.age)
            .map(|r| {
                let cells: Vec<serde_json::Value> = self
                    .columns
                    .keys()
                    .map(|a| match self.entry(a, r) {
                        None => serde_json::Value::Null,
                        Some(e) if e.def.is_one() => serde_json::Value::String(e.val.to_string()),
                        Some(e) => serde_json::json!({"def": e.def.to_string(), "val": e.val.to_string()}),
                    })
                    .collect();
                serde_json::Value::Array(cells)
            })
            .collect();
        serde_json::json!({"columns": names, "rows": rows})
    }
}

/// Quantum cells plus classical history.
#[derive(Clone, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct HybridMemory {
    pub qu: BTreeMap<Addr, BoolExpr>,
    pub cl: ClassicalMemory,
}

impl HybridMemory {
    pub fn new() -> HybridMemory {
        HybridMemory::default()
    }

    pub fn read_quantum(&self, a: &Addr) -> Result<&BoolExpr, MemoryError> {
        self.qu.get(a).ok_or_else(|| MemoryError::UnallocatedAddress(a.clone()))
    }

    pub fn write_quantum(&mut self, a: &Addr, b: BoolExpr) -> Result<(), MemoryError> {
        match self.qu.get_mut(a) {
            Some(c) => {
                *c = b;
                Ok(())
            }
            None => Err(MemoryError::UnallocatedAddress(a.clone())),
        }
    }

    pub fn alloc_quantum(&mut self, a: Addr, b: BoolExpr) {
        self.qu.insert(a, b);
    }

    pub fn read_present(&self, a: &Addr) -> Result<BoolExpr, MemoryError> {
        self.cl.read_present(a)
    }

    pub fn push_classical(&mut self, writes: &[(Addr, BoolExpr)]) -> Result<(), MemoryError> {
        self.cl.push(writes)
    }

    pub fn map_exprs(&self, f: &dyn Fn(&BoolExpr) -> BoolExpr) -> HybridMemory {
        HybridMemory {
            qu: self.qu.iter().map(|(a, b)| (a.clone(), f(b))).collect(),
            cl: self.cl.map_exprs(f),
        }
    }

    pub fn substitute(&self, sigma: &BTreeMap<Var, BoolExpr>) -> HybridMemory {
        self.map_exprs(&|b| b.substitute(sigma))
    }

    pub fn substitute_bits(&self, rho: &BTreeMap<Var, bool>) -> HybridMemory {
        self.map_exprs(&|b| b.substitute_bits(rho))
    }

    pub fn collect_vars(&self, s: &mut BTreeSet<Var>) {
        for b in self.qu.values() {
            b.collect_vars(s);
        }
        self.cl.collect_vars(s);
    }

    pub fn vars(&self) -> BTreeSet<Var> {
        let mut s = BTreeSet::new();
        self.collect_vars(&mut s);
        s
    }

    /// Variables of the classical part only.
    pub fn classical_vars(&self) -> BTreeSet<Var> {
        let mut s = BTreeSet::new();
        self.cl.collect_vars(&mut s);
        s
    }

    pub fn select(c: &BoolExpr, if_false: &HybridMemory, if_true: &HybridMemory) -> Result<HybridMemory, MemoryError> {
        if !if_false.qu.keys().eq(if_true.qu.keys()) {
            return Err(MemoryError::ShapeMismatch);
        }
        let qu = if_false
            .qu
            .iter()
            .map(|(a, bf)| {
                let bt = &if_true.qu[a];
                let v = if bf == bt { bf.clone() } else { BoolExpr::select(c, bf, bt) };
                (a.clone(), v)
            })
            .collect();
        Ok(HybridMemory { qu, cl: ClassicalMemory::select(c, &if_false.cl, &if_true.cl)? })
    }

    pub fn disjoint_union(&self, o: &HybridMemory) -> Result<HybridMemory, MemoryError> {
        for a in o.qu.keys() {
            if self.qu.contains_key(a) {
                return Err(MemoryError::AddressClash(a.clone()));
            }
        }
        let mut qu = self.qu.clone();
        qu.extend(o.qu.iter().map(|(a, b)| (a.clone(), b.clone())));
        Ok(HybridMemory { qu, cl: self.cl.disjoint_union(&o.cl)? })
    }

    /// Splits into (kept quantum + kept classical, rest).
    pub fn partition(&self, qkeep: &BTreeSet<Addr>, ckeep: &BTreeSet<Addr>) -> (HybridMemory, HybridMemory) {
        let (mut qa, mut qb) = (BTreeMap::new(), BTreeMap::new());
        for (a, b) in &self.qu {
            if qkeep.contains(a) {
                qa.insert(a.clone(), b.clone());
            } else {
                qb.insert(a.clone(), b.clone());
            }
        }
        let (ca, cb) = self.cl.partition(ckeep);
        (HybridMemory { qu: qa, cl: ca }, HybridMemory { qu: qb, cl: cb })
    }

    /// Every quantum and classical address.
    pub fn addresses(&self) -> BTreeSet<Addr> {
        self.qu.keys().chain(self.cl.addrs()).cloned().collect()
    }

    pub fn to_json(&self) -> serde_json::Value {
        let qu: serde_json::Map<String, serde_json::Value> =
            self.qu.iter().map(|(a, b)| (a.to_string(), serde_json::Value::String(b.to_string()))).collect();
        serde_json::json!({"quantum": qu, "classical": self.cl.to_json_table()})
    }
}

impl fmt::Display for HybridMemory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (a, b) in &self.qu {
            if !first {
                write!(f, " ")?;
            }
            first = false;
            write!(f, "|{b}>_{a}")?;
        }
        for a in self.cl.addrs() {
            if let Ok(v) = self.cl.present_raw(a) {
                if !first {
                    write!(f, " ")?;
                }
                first = false;
                write!(f, "[{v}]_{a}")?;
            }
        }
        if first {
            write!(f, "{{}}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn y(i: u32) -> BoolExpr {
        BoolExpr::var(Var::path(i))
    }

    #[test]
    fn push_and_read() {
        let mut m = ClassicalMemory::default();
        let a = Addr::new("c", 0);
        m.alloc(a.clone());
        assert!(matches!(m.read_present(&a), Err(MemoryError::HoleRead(_))));
        m.push(&[(a.clone(), y(0))]).unwrap();
        m.push(&[(a.clone(), y(1))]).unwrap();
        assert_eq!(m.read_present(&a).unwrap(), y(1));
        m.push(&[]).unwrap();
        assert_eq!(m.age(), 3);
        assert_eq!(m.read_present(&a).unwrap(), y(1));
    }

    #[test]
    fn select_merges_holes() {
        let a = Addr::new("c", 0);
        let mut base = ClassicalMemory::default();
        base.alloc(a.clone());
        base.push(&[(a.clone(), BoolExpr::zero())]).unwrap();
        let mut t = base.clone();
        t.push(&[(a.clone(), BoolExpr::one())]).unwrap();
        let mut f = base.clone();
        f.pad(1);
        let m = ClassicalMemory::select(&y(5), &f, &t).unwrap();
        assert_eq!(m.read_present(&a).unwrap(), y(5));
        let rho = |v: Var| Some(v == Var::path(5));
        assert_eq!(m.instantiate(&rho).unwrap(), vec![vec![1, 2]]);
        let rho0 = |_: Var| Some(false);
        assert_eq!(m.instantiate(&rho0).unwrap(), vec![vec![1, 0]]);
    }

    #[test]
    fn union_rules() {
        let mut a = HybridMemory::new();
        a.alloc_quantum(Addr::new("b", 0), BoolExpr::var(Var::input(0)));
        let mut b = HybridMemory::new();
        b.cl.alloc(Addr::new("c", 0));
        b.push_classical(&[(Addr::new("c", 0), y(1))]).unwrap();
        let u = a.disjoint_union(&b).unwrap();
        assert_eq!(u.cl.age(), 1);
        assert!(matches!(u.disjoint_union(&a), Err(MemoryError::AddressClash(_))));
        assert_eq!(HybridMemory::new().disjoint_union(&HybridMemory::new()).unwrap(), HybridMemory::new());
        let (k, r) = u.partition(&[Addr::new("b", 0)].into_iter().collect(), &BTreeSet::new());
        assert_eq!(k, a);
        assert_eq!(r, b);
    }

    #[test]
    fn hidden_registers() {
        let mut m = ClassicalMemory::default();
        let a = Addr::new("dump", 0);
        m.alloc(a.clone());
        m.hide("dump");
        m.push(&[(a.clone(), y(0))]).unwrap();
        assert!(matches!(m.read_present(&a), Err(MemoryError::Unreadable(_))));
        assert_eq!(m.present_raw(&a).unwrap(), y(0));
    }

    #[test]
    fn json_table_holes() {
        let mut m = ClassicalMemory::default();
        m.alloc(Addr::new("a", 0));
        m.alloc(Addr::new("p", 0));
        m.push(&[(Addr::new("p", 0), y(1))]).unwrap();
        m.push(&[(Addr::new("a", 0), y(0))]).unwrap();
        let j = m.to_json_table();
        assert_eq!(j["rows"][0][0], serde_json::Value::Null);
        assert_eq!(j["rows"][1][0], serde_json::json!("y0"));
    }
}
