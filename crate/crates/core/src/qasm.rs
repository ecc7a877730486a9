//! OpenQASM 2.0 subset reader and writer.
//!
//! Accepted statements: the `OPENQASM 2.0;` header, `include` (ignored),
//! `qreg`/`creg`, the gates `id x y z h s sdg t tdg u1 p cx cy cz`,
//! `barrier` and `measure`. Several quantum registers are folded into one
//! index space in declaration order: a register declared after registers
//! totalling `k` qubits has its qubit `i` mapped to `k + i`. Barriers are
//! always recorded as full-register barriers.
//!
//! Angles accept `+ - * /`, parentheses, `pi` and decimal literals, so
//! `pi/4`, `3*pi/15` and `-0.5` all work.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::{Circuit, GateKind, GateOp, Instruction, MAX_QUBITS};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParseErrorKind {
    Syntax,
    UnknownGate,
    Range,
    Redeclaration,
    Unsupported,
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ParseErrorKind::Syntax => "syntax error",
            ParseErrorKind::UnknownGate => "unknown gate",
            ParseErrorKind::Range => "range error",
            ParseErrorKind::Redeclaration => "redeclaration",
            ParseErrorKind::Unsupported => "unsupported",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("{line}:{column}: {kind}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub kind: ParseErrorKind,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Num(f64),
    Str(String),
    Sym(char),
    Arrow,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Num(n) => write!(f, "number {n}"),
            Tok::Str(s) => write!(f, "string \"{s}\""),
            Tok::Sym(c) => write!(f, "`{c}`"),
            Tok::Arrow => f.write_str("`->`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

fn err(line: usize, column: usize, kind: ParseErrorKind, message: impl Into<String>) -> ParseError {
    ParseError { line, column, kind, message: message.into() }
}

fn lex(source: &str) -> Result<Vec<Token>, ParseError> {
    let mut out = Vec::new();
    let chars: Vec<char> = source.chars().collect();
    let (mut i, mut line, mut col) = (0, 1, 1);
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        let advance = |n: usize, i: &mut usize, col: &mut usize| {
            *i += n;
            *col += n;
        };
        match c {
            '\n' => {
                i += 1;
                line += 1;
                col = 1;
            }
            c if c.is_whitespace() => advance(1, &mut i, &mut col),
            '/' if chars.get(i + 1) == Some(&'/') => {
                while i < chars.len() && chars[i] != '\n' {
                    advance(1, &mut i, &mut col);
                }
            }
            '-' if chars.get(i + 1) == Some(&'>') => {
                out.push(Token { tok: Tok::Arrow, line: tl, column: tc });
                advance(2, &mut i, &mut col);
            }
            '"' => {
                let start = i + 1;
                let end = chars[start..]
                    .iter()
                    .position(|&c| c == '"' || c == '\n')
                    .map(|p| start + p)
                    .filter(|&e| chars[e] == '"')
                    .ok_or_else(|| err(tl, tc, ParseErrorKind::Syntax, "unterminated string"))?;
                let s: String = chars[start..end].iter().collect();
                advance(end + 1 - i, &mut i, &mut col);
                out.push(Token { tok: Tok::Str(s), line: tl, column: tc });
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    advance(1, &mut i, &mut col);
                }
                out.push(Token { tok: Tok::Ident(chars[start..i].iter().collect()), line: tl, column: tc });
            }
            c if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    advance(1, &mut i, &mut col);
                }
                if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                    let mut j = i + 1;
                    if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                        j += 1;
                    }
                    if j < chars.len() && chars[j].is_ascii_digit() {
                        while j < chars.len() && chars[j].is_ascii_digit() {
                            j += 1;
                        }
                        advance(j - i, &mut i, &mut col);
                    }
                }
                let text: String = chars[start..i].iter().collect();
                let value = text
                    .parse::<f64>()
                    .map_err(|_| err(tl, tc, ParseErrorKind::Syntax, format!("bad number `{text}`")))?;
                out.push(Token { tok: Tok::Num(value), line: tl, column: tc });
            }
            ';' | '[' | ']' | '(' | ')' | ',' | '+' | '-' | '*' | '/' | '{' | '}' | '=' | '>' | '<' | '^' => {
                out.push(Token { tok: Tok::Sym(c), line: tl, column: tc });
                advance(1, &mut i, &mut col);
            }
            other => return Err(err(tl, tc, ParseErrorKind::Syntax, format!("unexpected character `{other}`"))),
        }
    }
    out.push(Token { tok: Tok::Eof, line, column: col });
    Ok(out)
}

struct Register {
    offset: usize,
    size: usize,
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    qregs: BTreeMap<String, Register>,
    cregs: BTreeMap<String, usize>,
    n_qubits: usize,
}

enum Stmt {
    Gate(GateKind, Vec<(usize, Token)>, Token),
    Barrier,
    Measure(Vec<usize>),
    Nop,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn next(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn syntax<T>(&self, t: &Token, expected: &str) -> Result<T, ParseError> {
        Err(err(t.line, t.column, ParseErrorKind::Syntax, format!("expected {expected}, found {}", t.tok)))
    }

    fn expect_sym(&mut self, c: char) -> Result<Token, ParseError> {
        let t = self.next();
        if t.tok == Tok::Sym(c) {
            Ok(t)
        } else {
            self.syntax(&t, &format!("`{c}`"))
        }
    }

    fn ident(&mut self) -> Result<(String, Token), ParseError> {
        let t = self.next();
        match &t.tok {
            Tok::Ident(s) => Ok((s.clone(), t.clone())),
            _ => self.syntax(&t, "identifier"),
        }
    }

    fn size(&mut self) -> Result<(usize, Token), ParseError> {
        let t = self.next();
        match t.tok {
            Tok::Num(v) if v >= 0.0 && v.fract() == 0.0 && v < 1e9 => Ok((v as usize, t)),
            _ => self.syntax(&t, "non-negative integer"),
        }
    }

    fn header(&mut self) -> Result<(), ParseError> {
        let t = self.peek().clone();
        match &t.tok {
            Tok::Ident(s) if s == "OPENQASM" => {
                self.next();
                let v = self.next();
                match v.tok {
                    Tok::Num(x) if x == 2.0 => {}
                    _ => return Err(err(v.line, v.column, ParseErrorKind::Unsupported, "only OPENQASM 2.0 is supported")),
                }
                self.expect_sym(';')?;
                Ok(())
            }
            _ => self.syntax(&t, "`OPENQASM 2.0;` header"),
        }
    }

    /// `name[index]` or bare `name` (whole register).
    fn qubit_arg(&mut self) -> Result<Vec<(usize, Token)>, ParseError> {
        let (name, t) = self.ident()?;
        let (offset, size) = match self.qregs.get(&name) {
            Some(r) => (r.offset, r.size),
            None => return Err(err(t.line, t.column, ParseErrorKind::Range, format!("undeclared quantum register `{name}`"))),
        };
        if self.peek().tok == Tok::Sym('[') {
            self.next();
            let (i, it) = self.size()?;
            self.expect_sym(']')?;
            if i >= size {
                return Err(err(it.line, it.column, ParseErrorKind::Range, format!("index {i} out of range for `{name}[{size}]`")));
            }
            Ok(vec![(offset + i, t)])
        } else {
            Ok((0..size).map(|i| (offset + i, t.clone())).collect())
        }
    }

    fn creg_arg(&mut self) -> Result<usize, ParseError> {
        let (name, t) = self.ident()?;
        let size = *self
            .cregs
            .get(&name)
            .ok_or_else(|| err(t.line, t.column, ParseErrorKind::Range, format!("undeclared classical register `{name}`")))?;
        if self.peek().tok == Tok::Sym('[') {
            self.next();
            let (i, it) = self.size()?;
            self.expect_sym(']')?;
            if i >= size {
                return Err(err(it.line, it.column, ParseErrorKind::Range, format!("index {i} out of range for `{name}[{size}]`")));
            }
            Ok(1)
        } else {
            Ok(size)
        }
    }

    fn expr(&mut self) -> Result<f64, ParseError> {
        let mut v = self.term()?;
        loop {
            match self.peek().tok {
                Tok::Sym('+') => {
                    self.next();
                    v += self.term()?;
                }
                Tok::Sym('-') => {
                    self.next();
                    v -= self.term()?;
                }
                _ => return Ok(v),
            }
        }
    }

    fn term(&mut self) -> Result<f64, ParseError> {
        let mut v = self.unary()?;
        loop {
            match self.peek().tok {
                Tok::Sym('*') => {
                    self.next();
                    v *= self.unary()?;
                }
                Tok::Sym('/') => {
                    self.next();
                    v /= self.unary()?;
                }
                _ => return Ok(v),
            }
        }
    }

    fn unary(&mut self) -> Result<f64, ParseError> {
        let t = self.next();
        match &t.tok {
            Tok::Sym('-') => Ok(-self.unary()?),
            Tok::Sym('+') => self.unary(),
            Tok::Num(v) => Ok(*v),
            Tok::Ident(s) if s == "pi" => Ok(PI),
            Tok::Sym('(') => {
                let v = self.expr()?;
                self.expect_sym(')')?;
                Ok(v)
            }
            _ => self.syntax(&t, "angle expression"),
        }
    }

    fn statement(&mut self) -> Result<Option<Stmt>, ParseError> {
        let t = self.next();
        let word = match &t.tok {
            Tok::Eof => return Ok(None),
            Tok::Ident(s) => s.clone(),
            _ => return self.syntax(&t, "statement"),
        };
        match word.as_str() {
            "include" => {
                let s = self.next();
                if !matches!(s.tok, Tok::Str(_)) {
                    return self.syntax(&s, "file name string");
                }
                self.expect_sym(';')?;
                Ok(Some(Stmt::Nop))
            }
            "qreg" | "creg" => {
                let (name, nt) = self.ident()?;
                self.expect_sym('[')?;
                let (size, st) = self.size()?;
                self.expect_sym(']')?;
                self.expect_sym(';')?;
                if size == 0 {
                    return Err(err(st.line, st.column, ParseErrorKind::Range, "register size must be positive"));
                }
                if self.qregs.contains_key(&name) || self.cregs.contains_key(&name) {
                    return Err(err(nt.line, nt.column, ParseErrorKind::Redeclaration, format!("register `{name}` already declared")));
                }
                if word == "qreg" {
                    if self.n_qubits + size > MAX_QUBITS {
                        return Err(err(st.line, st.column, ParseErrorKind::Range, format!("more than {MAX_QUBITS} qubits")));
                    }
                    self.qregs.insert(name, Register { offset: self.n_qubits, size });
                    self.n_qubits += size;
                } else {
                    self.cregs.insert(name, size);
                }
                Ok(Some(Stmt::Nop))
            }
            "barrier" => {
                self.qubit_arg()?;
                while self.peek().tok == Tok::Sym(',') {
                    self.next();
                    self.qubit_arg()?;
                }
                self.expect_sym(';')?;
                Ok(Some(Stmt::Barrier))
            }
            "measure" => {
                let qs = self.qubit_arg()?;
                let arrow = self.next();
                if arrow.tok != Tok::Arrow {
                    return self.syntax(&arrow, "`->`");
                }
                let width = self.creg_arg()?;
                let semi = self.expect_sym(';')?;
                if width != qs.len() {
                    return Err(err(semi.line, semi.column, ParseErrorKind::Range, "measure operands differ in width"));
                }
                Ok(Some(Stmt::Measure(qs.into_iter().map(|(q, _)| q).collect())))
            }
            "if" | "gate" | "opaque" | "reset" => Err(err(
                t.line,
                t.column,
                ParseErrorKind::Unsupported,
                format!("`{word}` statements are not supported"),
            )),
            _ => self.gate_call(&word, t),
        }
    }

    fn gate_call(&mut self, word: &str, t: Token) -> Result<Option<Stmt>, ParseError> {
        let (arity, base) = match word {
            "id" | "x" | "y" | "z" | "h" | "s" | "sdg" | "t" | "tdg" => (1, word),
            "u1" | "p" => (1, "p"),
            "cx" => (2, "x"),
            "cy" => (2, "y"),
            "cz" => (2, "z"),
            "CX" => (2, "x"),
            _ => return Err(err(t.line, t.column, ParseErrorKind::UnknownGate, format!("unknown gate `{word}`"))),
        };
        let theta = if base == "p" {
            self.expect_sym('(')?;
            let v = self.expr()?;
            self.expect_sym(')')?;
            if !v.is_finite() {
                return Err(err(t.line, t.column, ParseErrorKind::Range, "angle is not finite"));
            }
            Some(v)
        } else {
            if self.peek().tok == Tok::Sym('(') {
                let p = self.peek().clone();
                return Err(err(p.line, p.column, ParseErrorKind::Syntax, format!("gate `{word}` takes no parameters")));
            }
            None
        };
        let kind = GateKind::from_name(base, theta).expect("gate table is consistent");
        let mut args = Vec::new();
        for k in 0..arity {
            if k > 0 {
                self.expect_sym(',')?;
            }
            let qs = self.qubit_arg()?;
            if qs.len() != 1 {
                let q = &qs[0].1;
                return Err(err(q.line, q.column, ParseErrorKind::Unsupported, "register-wide gate application is not supported"));
            }
            args.extend(qs);
        }
        self.expect_sym(';')?;
        Ok(Some(Stmt::Gate(kind, args, t)))
    }
}

/// Parses a program into a [`Circuit`].
pub fn parse(source: &str) -> Result<Circuit, ParseError> {
    let mut p = Parser { toks: lex(source)?, pos: 0, qregs: BTreeMap::new(), cregs: BTreeMap::new(), n_qubits: 0 };
    p.header()?;
    let mut stmts = Vec::new();
    while let Some(s) = p.statement()? {
        stmts.push(s);
    }
    if p.n_qubits == 0 {
        let t = p.peek().clone();
        return Err(err(t.line, t.column, ParseErrorKind::Syntax, "program declares no quantum register"));
    }
    let mut c = Circuit::new(p.n_qubits).expect("width checked at declaration");
    for s in stmts {
        match s {
            Stmt::Gate(kind, args, t) => {
                let op = if args.len() == 2 {
                    if args[0].0 == args[1].0 {
                        let a = &args[1].1;
                        return Err(err(a.line, a.column, ParseErrorKind::Range, "control and target must differ"));
                    }
                    GateOp { kind, target: args[1].0, control: Some(args[0].0) }
                } else {
                    GateOp::new(kind, args[0].0)
                };
                c.push(op).map_err(|e| err(t.line, t.column, ParseErrorKind::Range, e.to_string()))?;
            }
            Stmt::Barrier => {
                c.barrier();
            }
            Stmt::Nop => {}
            Stmt::Measure(qs) => {
                for q in qs {
                    c.measure(q).expect("index checked");
                }
            }
        }
    }
    Ok(c)
}

/// Renders `theta` so that parsing the text yields the identical `f64`.
pub fn format_angle(theta: f64) -> String {
    if theta == 0.0 {
        return "0".into();
    }
    let ratio = theta / PI;
    for m in 1..=64i64 {
        let k = (ratio * m as f64).round();
        if k == 0.0 || k.abs() > 1e6 {
            continue;
        }
        let k = k as i64;
        if gcd(k.abs(), m) != 1 {
            continue;
        }
        let sign = if k < 0 { "-" } else { "" };
        let ka = k.abs();
        let text = match (ka, m) {
            (1, 1) => format!("{sign}pi"),
            (1, m) => format!("{sign}pi/{m}"),
            (k, 1) => format!("{sign}{k}*pi"),
            (k, m) => format!("{sign}{k}*pi/{m}"),
        };
        if eval_angle(&text) == Some(theta) {
            return text;
        }
    }
    format!("{theta:?}")
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn eval_angle(text: &str) -> Option<f64> {
    let mut p = Parser { toks: lex(text).ok()?, pos: 0, qregs: BTreeMap::new(), cregs: BTreeMap::new(), n_qubits: 0 };
    let v = p.expr().ok()?;
    (p.peek().tok == Tok::Eof).then_some(v)
}

/// Canonical text form: header, `qreg q[n];`, `creg c[n];` when anything is
/// measured, one statement per line, measurements last, LF line endings.
pub fn emit(circuit: &Circuit) -> String {
    let n = circuit.n_qubits();
    let mut out = String::from("OPENQASM 2.0;\ninclude \"qelib1.inc\";\n");
    let _ = writeln!(out, "qreg q[{n}];");
    if !circuit.measured().is_empty() {
        let _ = writeln!(out, "creg c[{n}];");
    }
    for op in circuit.ops() {
        match op {
            Instruction::Barrier => out.push_str("barrier q;\n"),
            Instruction::Gate(g) => {
                let _ = match (g.control, g.kind) {
                    (Some(c), k) => writeln!(out, "c{} q[{c}],q[{}];", k.name(), g.target),
                    (None, GateKind::P(theta)) => writeln!(out, "u1({}) q[{}];", format_angle(theta), g.target),
                    (None, k) => writeln!(out, "{} q[{}];", k.name(), g.target),
                };
            }
        }
    }
    for q in circuit.measured() {
        let _ = writeln!(out, "measure q[{q}] -> c[{q}];");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "OPENQASM 2.0;\ninclude \"qelib1.inc\";\n";

    #[test]
    fn parses_minimal_program() {
        let c = parse(&format!("{HEADER}qreg q[1];\nh q[0];\n")).unwrap();
        assert_eq!(c.n_qubits(), 1);
        assert_eq!(c.gates().copied().collect::<Vec<_>>(), vec![GateOp::new(GateKind::H, 0)]);
    }

    #[test]
    fn u1_quarter_pi_is_t() {
        let c = parse(&format!("{HEADER}qreg q[1];\nu1(pi/4) q[0];\n")).unwrap();
        let g = c.gates().next().unwrap();
        assert!(g.kind.matrix().max_abs_diff(&GateKind::T.matrix()) < 1e-15);
    }

    #[test]
    fn angle_grammar() {
        for (text, value) in [
            ("pi", PI),
            ("-pi/2", -PI / 2.0),
            ("3*pi/15", 3.0 * PI / 15.0),
            ("0.25", 0.25),
            ("-1.5e-1", -0.15),
            ("2*(pi/8)", PI / 4.0),
        ] {
            assert_eq!(eval_angle(text), Some(value), "{text}");
        }
    }

    #[test]
    fn range_error_position() {
        let e = parse(&format!("{HEADER}qreg q[2];\nh q[2];\n")).unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::Range);
        assert_eq!((e.line, e.column), (4, 5));
    }

    #[test]
    fn rejections() {
        let cases = [
            ("qreg q[1];\nfoo q[0];\n", ParseErrorKind::UnknownGate, 4, 1),
            ("qreg q[1];\nqreg q[2];\n", ParseErrorKind::Redeclaration, 4, 6),
            ("qreg q[1];\nh q[0]\n", ParseErrorKind::Syntax, 5, 1),
            ("qreg q[1];\ncreg c[1];\nif(c==1) x q[0];\n", ParseErrorKind::Unsupported, 5, 1),
            ("qreg q[1];\ngate foo a { h a; }\n", ParseErrorKind::Unsupported, 4, 1),
            ("qreg q[2];\ncx q[1],q[1];\n", ParseErrorKind::Range, 4, 9),
            ("qreg q[1];\nh(0.1) q[0];\n", ParseErrorKind::Syntax, 4, 2),
            ("qreg q[1];\nh r[0];\n", ParseErrorKind::Range, 4, 3),
        ];
        for (body, kind, line, column) in cases {
            let e = parse(&format!("{HEADER}{body}")).unwrap_err();
            assert_eq!((e.kind, e.line, e.column), (kind, line, column), "{body:?}: {e}");
        }
        let e = parse("qreg q[1];").unwrap_err();
        assert_eq!((e.line, e.column), (1, 1));
        let e = parse("OPENQASM 3.0;\n").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::Unsupported);
    }

    #[test]
    fn multiple_registers_fold_by_offset() {
        let c = parse(&format!("{HEADER}qreg a[2];\nqreg b[3];\ncreg c[1];\nx b[1];\ncx a[0],b[2];\nmeasure b[0] -> c[0];\n")).unwrap();
        assert_eq!(c.n_qubits(), 5);
        let gates: Vec<_> = c.gates().copied().collect();
        assert_eq!(gates[0], GateOp::new(GateKind::X, 3));
        assert_eq!(gates[1], GateOp::controlled(GateKind::X, 0, 4).unwrap());
        assert!(c.measured().contains(&2));
    }

    #[test]
    fn canonical_emit() {
        let mut c = Circuit::new(1).unwrap();
        c.gate(GateKind::H, 0).unwrap();
        assert_eq!(emit(&c), format!("{HEADER}qreg q[1];\nh q[0];\n"));

        let mut c = Circuit::new(2).unwrap();
        c.gate(GateKind::P(PI), 1).unwrap();
        assert!(emit(&c).contains("u1(pi) q[1];\n"));
    }

    #[test]
    fn angle_formatting_round_trips_bits() {
        for theta in [PI, -PI, PI / 4.0, 3.0 * PI / 15.0, -PI / 2.0, 0.1, 1.0 / 3.0, 7.0 * PI, 0.0] {
            let text = format_angle(theta);
            assert_eq!(eval_angle(&text), Some(theta), "{text}");
        }
        assert_eq!(format_angle(PI / 4.0), "pi/4");
        assert_eq!(format_angle(-PI / 2.0), "-pi/2");
    }

    #[test]
    fn whole_register_measure_and_barrier() {
        let c = parse(&format!("{HEADER}qreg q[3];\ncreg c[3];\nbarrier q[0],q[2];\nmeasure q -> c;\n")).unwrap();
        assert_eq!(c.measured().len(), 3);
        assert_eq!(c.ops(), &[Instruction::Barrier]);
    }
}
