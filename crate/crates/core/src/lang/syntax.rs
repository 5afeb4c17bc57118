//! Native `.hqb` syntax: tokens, surface AST and a recursive-descent parser.

use crate::error::ParseError;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Int(u64),
    Sym(&'static str),
    Eof,
}

#[derive(Clone, Debug)]
pub struct Token {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

const SYMBOLS: &[&str] = &[
    "=>>", "|>", "-o", "=>", "==", "!=", "..", ":=", "->", "(", ")", "[", "]", "{", "}", ";", ",", ":", "+", "-", "*", "/", "^",
    "&", "|", "!", "=",
];

pub fn lex(src: &str) -> Result<Vec<Token>, ParseError> {
    let b = src.as_bytes();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let mut out = Vec::new();
    let adv = |i: &mut usize, line: &mut usize, col: &mut usize, n: usize| {
        for k in 0..n {
            if b[*i + k] == b'\n' {
                *line += 1;
                *col = 1;
            } else {
                *col += 1;
            }
        }
        *i += n;
    };
    while i < b.len() {
        let c = b[i];
        if c.is_ascii_whitespace() {
            adv(&mut i, &mut line, &mut col, 1);
            continue;
        }
        if src[i..].starts_with("//") {
            while i < b.len() && b[i] != b'\n' {
                adv(&mut i, &mut line, &mut col, 1);
            }
            continue;
        }
        if src[i..].starts_with("/*") {
            let (l0, c0) = (line, col);
            match src[i + 2..].find("*/") {
                Some(k) => adv(&mut i, &mut line, &mut col, k + 4),
                None => return Err(ParseError::at("unterminated comment", l0, c0)),
            }
            continue;
        }
        let (l0, c0) = (line, col);
        if c.is_ascii_digit() {
            let s = i;
            while i < b.len() && b[i].is_ascii_digit() {
                adv(&mut i, &mut line, &mut col, 1);
            }
            let n = src[s..i].parse::<u64>().map_err(|_| ParseError::at("integer literal too large", l0, c0))?;
            out.push(Token { tok: Tok::Int(n), line: l0, col: c0 });
            continue;
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            let s = i;
            while i < b.len() && (b[i].is_ascii_alphanumeric() || b[i] == b'_') {
                adv(&mut i, &mut line, &mut col, 1);
            }
            out.push(Token { tok: Tok::Ident(src[s..i].to_string()), line: l0, col: c0 });
            continue;
        }
        match SYMBOLS.iter().find(|s| src[i..].starts_with(**s)) {
            Some(s) => {
                adv(&mut i, &mut line, &mut col, s.len());
                out.push(Token { tok: Tok::Sym(s), line: l0, col: c0 });
            }
            None => {
                let ch = src[i..].chars().next().unwrap();
                return Err(ParseError::at(format!("unexpected character `{ch}`"), l0, c0));
            }
        }
    }
    out.push(Token { tok: Tok::Eof, line, col });
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub enum IExpr {
    Lit(u64),
    Name(String, Pos),
    Width(String, Pos),
    Neg(Box<IExpr>),
    Bin(char, Box<IExpr>, Box<IExpr>),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Sel {
    All,
    Index(IExpr),
    /// Inclusive range.
    Slice(IExpr, IExpr),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegRef {
    pub name: String,
    pub sel: Sel,
    pub pos: Pos,
}

#[derive(Clone, Debug, PartialEq)]
pub enum SCond {
    Const(bool),
    Reg(RegRef),
    Eq(RegRef, IExpr),
    Not(Box<SCond>),
    And(Box<SCond>, Box<SCond>),
    Xor(Box<SCond>, Box<SCond>),
    Or(Box<SCond>, Box<SCond>),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Arg {
    /// Bare identifier; register or integer, resolved later.
    Name(String, Pos),
    Reg(RegRef),
    Int(IExpr),
}

#[derive(Clone, Debug, PartialEq)]
pub enum SStmt {
    Skip,
    Init(RegRef),
    Input(RegRef),
    Reset(RegRef),
    /// Gate, mixed-gate or macro application.
    Call { name: String, index: Option<IExpr>, args: Vec<Arg>, pos: Pos },
    Measure(RegRef, RegRef),
    Assign { target: RegRef, oracle: String, arg: RegRef, pos: Pos },
    If(SCond, Vec<SStmt>, Vec<SStmt>),
    For(String, IExpr, IExpr, Vec<SStmt>),
    Let(String, IExpr, Vec<SStmt>),
    /// `q =>> f` applies `f(k)` for each index of `q`.
    Iterate(RegRef, String, Pos),
}

#[derive(Clone, Debug, PartialEq)]
pub struct OracleDecl {
    pub name: String,
    pub formal: String,
    pub inputs: IExpr,
    pub outputs: Vec<SCond>,
    pub pos: Pos,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MixedDecl {
    pub name: String,
    pub formal: String,
    pub arity: IExpr,
    pub branches: Vec<(IExpr, Vec<SStmt>)>,
    pub pos: Pos,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MacroDecl {
    pub name: String,
    pub params: Vec<String>,
    pub body: Vec<SStmt>,
    pub pos: Pos,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Item {
    QReg(String, IExpr, Pos),
    CReg(String, IExpr, Pos),
    Param(String, Option<IExpr>, Pos),
    Oracle(OracleDecl),
    Mixed(MixedDecl),
    Def(MacroDecl),
    Stmt(SStmt),
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct Ast {
    pub items: Vec<Item>,
}

pub fn parse(src: &str) -> Result<Ast, ParseError> {
    let toks = lex(src)?;
    let mut p = Parser { toks, i: 0 };
    let mut items = Vec::new();
    while p.peek() != &Tok::Eof {
        items.push(p.item()?);
    }
    Ok(Ast { items })
}

struct Parser {
    toks: Vec<Token>,
    i: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.i].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.i + k).min(self.toks.len() - 1)].tok
    }

    fn pos(&self) -> Pos {
        let t = &self.toks[self.i];
        Pos { line: t.line, col: t.col }
    }

    fn err<T>(&self, m: impl Into<String>) -> Result<T, ParseError> {
        let t = &self.toks[self.i];
        Err(ParseError::at(m, t.line, t.col))
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.i].tok.clone();
        if self.i + 1 < self.toks.len() {
            self.i += 1;
        }
        t
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(x) if *x == s)
    }

    fn is_kw(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Ident(x) if x == s)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if self.is_sym(s) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, s: &str) -> Result<(), ParseError> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            self.err(format!("expected `{s}`, found {}", describe(self.peek())))
        }
    }

    fn expect_kw(&mut self, s: &str) -> Result<(), ParseError> {
        if self.is_kw(s) {
            self.bump();
            Ok(())
        } else {
            self.err(format!("expected `{s}`, found {}", describe(self.peek())))
        }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) if !is_keyword(&s) => {
                self.bump();
                Ok(s)
            }
            t => self.err(format!("expected identifier, found {}", describe(&t))),
        }
    }

    fn item(&mut self) -> Result<Item, ParseError> {
        let pos = self.pos();
        if self.is_kw("qreg") || self.is_kw("creg") {
            let q = self.is_kw("qreg");
            self.bump();
            let name = self.ident()?;
            self.expect_sym("[")?;
            let w = self.iexpr()?;
            self.expect_sym("]")?;
            self.expect_sym(";")?;
            return Ok(if q { Item::QReg(name, w, pos) } else { Item::CReg(name, w, pos) });
        }
        if self.is_kw("param") {
            self.bump();
            let name = self.ident()?;
            let e = if self.eat_sym("=") { Some(self.iexpr()?) } else { None };
            self.expect_sym(";")?;
            return Ok(Item::Param(name, e, pos));
        }
        if self.is_kw("oracle") {
            self.bump();
            let name = self.ident()?;
            self.expect_sym("(")?;
            let formal = self.ident()?;
            self.expect_sym("[")?;
            let inputs = self.iexpr()?;
            self.expect_sym("]")?;
            self.expect_sym(")")?;
            self.expect_sym("=")?;
            self.expect_sym("[")?;
            let mut outputs = vec![self.cond()?];
            while self.eat_sym(",") {
                outputs.push(self.cond()?);
            }
            self.expect_sym("]")?;
            self.expect_sym(";")?;
            return Ok(Item::Oracle(OracleDecl { name, formal, inputs, outputs, pos }));
        }
        if self.is_kw("mixed") {
            self.bump();
            let name = self.ident()?;
            self.expect_sym("(")?;
            let formal = self.ident()?;
            self.expect_sym("[")?;
            let arity = self.iexpr()?;
            self.expect_sym("]")?;
            self.expect_sym(")")?;
            self.expect_sym("{")?;
            let mut branches = Vec::new();
            while !self.eat_sym("}") {
                let w = self.iexpr()?;
                self.expect_sym(":")?;
                let body = self.block()?;
                branches.push((w, body));
                self.eat_sym(",");
            }
            return Ok(Item::Mixed(MixedDecl { name, formal, arity, branches, pos }));
        }
        if self.is_kw("def") {
            self.bump();
            let name = self.ident()?;
            self.expect_sym("(")?;
            let mut params = Vec::new();
            if !self.eat_sym(")") {
                params.push(self.ident()?);
                while self.eat_sym(",") {
                    params.push(self.ident()?);
                }
                self.expect_sym(")")?;
            }
            let body = self.block()?;
            return Ok(Item::Def(MacroDecl { name, params, body, pos }));
        }
        Ok(Item::Stmt(self.stmt()?))
    }

    fn block(&mut self) -> Result<Vec<SStmt>, ParseError> {
        if !self.is_sym("{") {
            return Ok(vec![self.stmt()?]);
        }
        self.bump();
        let mut out = Vec::new();
        while !self.eat_sym("}") {
            if self.peek() == &Tok::Eof {
                return self.err("unclosed block");
            }
            out.push(self.stmt()?);
        }
        Ok(out)
    }

    fn stmt(&mut self) -> Result<SStmt, ParseError> {
        let pos = self.pos();
        if self.is_kw("skip") {
            self.bump();
            self.expect_sym(";")?;
            return Ok(SStmt::Skip);
        }
        for (kw, mk) in [("init", SStmt::Init as fn(RegRef) -> SStmt), ("input", SStmt::Input), ("reset", SStmt::Reset)] {
            if self.is_kw(kw) {
                self.bump();
                let r = self.regref()?;
                self.expect_sym(";")?;
                return Ok(mk(r));
            }
        }
        if self.is_kw("measure") {
            self.bump();
            self.expect_sym("(")?;
            let q = self.regref()?;
            self.expect_sym(",")?;
            let c = self.regref()?;
            self.expect_sym(")")?;
            self.expect_sym(";")?;
            return Ok(SStmt::Measure(q, c));
        }
        if self.is_kw("if") {
            self.bump();
            let c = self.cond()?;
            if self.is_kw("then") {
                self.bump();
            }
            let t = self.block()?;
            let e = if self.is_kw("else") {
                self.bump();
                self.block()?
            } else {
                vec![SStmt::Skip]
            };
            return Ok(SStmt::If(c, t, e));
        }
        if self.is_kw("for") {
            self.bump();
            let v = self.ident()?;
            if self.is_kw("in") {
                self.bump();
                let r = self.regref()?;
                if r.sel != Sel::All {
                    return self.err("`for ... in` takes a whole register");
                }
                let hi = IExpr::Bin('-', Box::new(IExpr::Width(r.name.clone(), r.pos)), Box::new(IExpr::Lit(1)));
                let body = self.block()?;
                return Ok(SStmt::For(v, IExpr::Lit(0), hi, body));
            }
            self.expect_sym("=")?;
            let lo = self.iexpr()?;
            self.expect_sym("..")?;
            let hi = self.iexpr()?;
            let body = self.block()?;
            return Ok(SStmt::For(v, lo, hi, body));
        }
        if self.is_kw("let") {
            self.bump();
            let v = self.ident()?;
            self.expect_sym("=")?;
            let e = self.iexpr()?;
            self.expect_kw("in")?;
            let body = self.block()?;
            return Ok(SStmt::Let(v, e, body));
        }
        if self.is_sym("(") || self.is_sym("!") || self.is_kw("true") || self.is_kw("false") {
            let c = self.cond()?;
            self.expect_sym("=>")?;
            let body = self.block()?;
            return Ok(SStmt::If(c, body, vec![SStmt::Skip]));
        }
        let Tok::Ident(name) = self.peek().clone() else {
            return self.err(format!("expected statement, found {}", describe(self.peek())));
        };
        if is_keyword(&name) {
            return self.err(format!("unexpected keyword `{name}`"));
        }
        // call form: NAME [k] ( args ) ;
        let call_like = match self.peek_at(1) {
            Tok::Sym("(") => true,
            Tok::Sym("[") => self.bracket_then_paren(),
            _ => false,
        };
        if call_like {
            self.bump();
            let index = if self.eat_sym("[") {
                let e = self.iexpr()?;
                self.expect_sym("]")?;
                Some(e)
            } else {
                None
            };
            self.expect_sym("(")?;
            let mut args = Vec::new();
            if !self.eat_sym(")") {
                args.push(self.arg()?);
                while self.eat_sym(",") {
                    args.push(self.arg()?);
                }
                self.expect_sym(")")?;
            }
            self.expect_sym(";")?;
            return Ok(SStmt::Call { name, index, args, pos });
        }
        // register-led sugar or assignment, or condition => body
        let save = self.i;
        let r = self.regref()?;
        if self.eat_sym("|>") {
            let g = self.ident()?;
            let index = if self.eat_sym("[") {
                let e = self.iexpr()?;
                self.expect_sym("]")?;
                Some(e)
            } else {
                None
            };
            self.expect_sym(";")?;
            return Ok(SStmt::Call { name: g, index, args: vec![Arg::Reg(r)], pos });
        }
        if self.eat_sym("-o") {
            let c = self.regref()?;
            self.expect_sym(";")?;
            return Ok(SStmt::Measure(r, c));
        }
        if self.eat_sym("=>>") {
            let f = self.ident()?;
            self.expect_sym(";")?;
            return Ok(SStmt::Iterate(r, f, pos));
        }
        if self.eat_sym(":=") {
            let f = self.ident()?;
            self.expect_sym("(")?;
            let arg = self.regref()?;
            self.expect_sym(")")?;
            self.expect_sym(";")?;
            return Ok(SStmt::Assign { target: r, oracle: f, arg, pos });
        }
        self.i = save;
        let c = self.cond()?;
        if self.eat_sym("=>") {
            let body = self.block()?;
            return Ok(SStmt::If(c, body, vec![SStmt::Skip]));
        }
        self.err(format!("expected `|>`, `-o`, `:=`, `=>>` or `=>`, found {}", describe(self.peek())))
    }

    /// Whether `NAME [ ... ] (` follows, distinguishing `Z[k](q)` from `q[i] |> H`.
    fn bracket_then_paren(&self) -> bool {
        let mut depth = 0usize;
        let mut k = 1;
        loop {
            match self.peek_at(k) {
                Tok::Sym("[") => depth += 1,
                Tok::Sym("]") => {
                    depth -= 1;
                    if depth == 0 {
                        return matches!(self.peek_at(k + 1), Tok::Sym("("));
                    }
                }
                Tok::Eof => return false,
                _ => {}
            }
            k += 1;
        }
    }

    fn arg(&mut self) -> Result<Arg, ParseError> {
        let pos = self.pos();
        if let Tok::Ident(n) = self.peek().clone() {
            if !is_keyword(&n) {
                match self.peek_at(1) {
                    Tok::Sym("[") => return Ok(Arg::Reg(self.regref()?)),
                    Tok::Sym(",") | Tok::Sym(")") => {
                        self.bump();
                        return Ok(Arg::Name(n, pos));
                    }
                    _ => {}
                }
            }
        }
        Ok(Arg::Int(self.iexpr()?))
    }

    fn regref(&mut self) -> Result<RegRef, ParseError> {
        let pos = self.pos();
        let name = self.ident()?;
        let sel = if self.eat_sym("[") {
            let a = self.iexpr()?;
            let s = if self.eat_sym("..") { Sel::Slice(a, self.iexpr()?) } else { Sel::Index(a) };
            self.expect_sym("]")?;
            s
        } else {
            Sel::All
        };
        Ok(RegRef { name, sel, pos })
    }

    fn cond(&mut self) -> Result<SCond, ParseError> {
        let mut l = self.cond_xor()?;
        while self.eat_sym("|") {
            l = SCond::Or(Box::new(l), Box::new(self.cond_xor()?));
        }
        Ok(l)
    }

    fn cond_xor(&mut self) -> Result<SCond, ParseError> {
        let mut l = self.cond_and()?;
        while self.eat_sym("^") {
            l = SCond::Xor(Box::new(l), Box::new(self.cond_and()?));
        }
        Ok(l)
    }

    fn cond_and(&mut self) -> Result<SCond, ParseError> {
        let mut l = self.cond_unary()?;
        while self.eat_sym("&") {
            l = SCond::And(Box::new(l), Box::new(self.cond_unary()?));
        }
        Ok(l)
    }

    fn cond_unary(&mut self) -> Result<SCond, ParseError> {
        if self.eat_sym("!") {
            return Ok(SCond::Not(Box::new(self.cond_unary()?)));
        }
        if self.eat_sym("(") {
            let c = self.cond()?;
            self.expect_sym(")")?;
            return Ok(c);
        }
        if self.is_kw("true") || self.is_kw("false") {
            let b = self.is_kw("true");
            self.bump();
            return Ok(SCond::Const(b));
        }
        if let Tok::Int(n @ (0 | 1)) = self.peek().clone() {
            self.bump();
            return Ok(SCond::Const(n == 1));
        }
        let r = self.regref()?;
        if self.eat_sym("==") {
            return Ok(SCond::Eq(r, self.iatom()?));
        }
        if self.eat_sym("!=") {
            return Ok(SCond::Not(Box::new(SCond::Eq(r, self.iatom()?))));
        }
        Ok(SCond::Reg(r))
    }

    fn iexpr(&mut self) -> Result<IExpr, ParseError> {
        let mut l = self.iterm()?;
        loop {
            let op = if self.is_sym("+") {
                '+'
            } else if self.is_sym("-") {
                '-'
            } else {
                return Ok(l);
            };
            self.bump();
            l = IExpr::Bin(op, Box::new(l), Box::new(self.iterm()?));
        }
    }

    fn iterm(&mut self) -> Result<IExpr, ParseError> {
        let mut l = self.ipow()?;
        loop {
            let op = if self.is_sym("*") {
                '*'
            } else if self.is_sym("/") {
                '/'
            } else {
                return Ok(l);
            };
            self.bump();
            l = IExpr::Bin(op, Box::new(l), Box::new(self.ipow()?));
        }
    }

    fn ipow(&mut self) -> Result<IExpr, ParseError> {
        let b = self.iunary()?;
        if self.eat_sym("^") {
            return Ok(IExpr::Bin('^', Box::new(b), Box::new(self.ipow()?)));
        }
        Ok(b)
    }

    fn iunary(&mut self) -> Result<IExpr, ParseError> {
        if self.eat_sym("-") {
            return Ok(IExpr::Neg(Box::new(self.iunary()?)));
        }
        self.iatom()
    }

    fn iatom(&mut self) -> Result<IExpr, ParseError> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Int(n) => {
                self.bump();
                Ok(IExpr::Lit(n))
            }
            Tok::Ident(s) if !is_keyword(&s) => {
                self.bump();
                Ok(IExpr::Name(s, pos))
            }
            Tok::Sym("(") => {
                self.bump();
                let e = self.iexpr()?;
                self.expect_sym(")")?;
                Ok(e)
            }
            Tok::Sym("|") => {
                self.bump();
                let n = self.ident()?;
                self.expect_sym("|")?;
                Ok(IExpr::Width(n, pos))
            }
            t => self.err(format!("expected integer expression, found {}", describe(&t))),
        }
    }
}

const KEYWORDS: &[&str] = &[
    "qreg", "creg", "param", "oracle", "mixed", "def", "skip", "init", "input", "reset", "measure", "if", "then", "else", "for", "in",
    "let", "true", "false",
];

fn is_keyword(s: &str) -> bool {
    KEYWORDS.contains(&s)
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Int(n) => format!("`{n}`"),
        Tok::Sym(s) => format!("`{s}`"),
        Tok::Eof => "end of input".into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sugar_forms() {
        let a = parse("qreg q[2]; creg c[2]; init q; q[0] |> H; q -o c; c[0] => { X(q[1]); } q =>> f;").unwrap();
        assert_eq!(a.items.len(), 7);
        match &a.items[3] {
            Item::Stmt(SStmt::Call { name, args, .. }) => {
                assert_eq!(name, "H");
                assert!(matches!(&args[0], Arg::Reg(r) if r.name == "q"));
            }
            o => panic!("{o:?}"),
        }
        assert!(matches!(&a.items[4], Item::Stmt(SStmt::Measure(..))));
        assert!(matches!(&a.items[5], Item::Stmt(SStmt::If(SCond::Reg(_), _, e)) if e == &vec![SStmt::Skip]));
        assert!(matches!(&a.items[6], Item::Stmt(SStmt::Iterate(..))));
    }

    #[test]
    fn gate_index_vs_register_index() {
        let a = parse("Z[3](q[0]); q[1] |> Z[2]; CZ[2](q[0], q[1]);").unwrap();
        assert!(matches!(&a.items[0], Item::Stmt(SStmt::Call { index: Some(IExpr::Lit(3)), .. })));
        assert!(matches!(&a.items[1], Item::Stmt(SStmt::Call { index: Some(IExpr::Lit(2)), .. })));
    }

    #[test]
    fn errors_have_positions() {
        let e = parse("qreg q[2];\ninit q\nH(q);").unwrap_err();
        assert_eq!((e.line, e.col), (3, 1));
        assert!(parse("qreg q[2];\n  @").unwrap_err().col == 3);
    }

    #[test]
    fn declarations() {
        let a = parse("param p = 1/10; oracle par(a[2]) = [a[0] ^ a[1]]; mixed flip(q[1]) { 1 - p : skip; p : { X(q[0]); } } def f(k) { H(r[k]); }").unwrap();
        assert_eq!(a.items.len(), 4);
        match &a.items[2] {
            Item::Mixed(m) => assert_eq!(m.branches.len(), 2),
            o => panic!("{o:?}"),
        }
    }
}
