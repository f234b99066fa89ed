//! First-order terms for the toy calculus.
//!
//! Surface syntax: identifiers `[a-zA-Z_][a-zA-Z0-9_']*`, numerals, prefix
//! application `f(a, b)` (juxtaposition `f a b` is also accepted), the infix
//! operators `⟹ ⟶ ∨ ∧ = + *`, prefix `¬`, and the binders `∀x. t` / `∃x. t`.
//! ASCII spellings (`==>`, `-->`, `|`, `&`, `~`, `ALL`, `EX`) are accepted and
//! normalised to the Unicode symbols by the lexer.
//!
//! An identifier in argument position is a variable when it is a single
//! letter optionally followed by digits and primes (`a`, `x1`, `b'`); every
//! other identifier, every numeral and every application head is a constant.
//! Bound variables are stored as de Bruijn indices, so structural equality is
//! alpha-equivalence.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Quantifier {
    All,
    Ex,
}

impl Quantifier {
    pub fn symbol(self) -> &'static str {
        match self {
            Quantifier::All => "∀",
            Quantifier::Ex => "∃",
        }
    }
}

#[derive(Debug, Clone)]
pub enum Term {
    Var(String),
    Const(String),
    App(String, Vec<Term>),
    Bound(usize),
    Binder {
        quant: Quantifier,
        hint: String,
        body: Box<Term>,
    },
}

// Binder hints are presentation only.
impl PartialEq for Term {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Term::Var(a), Term::Var(b)) => a == b,
            (Term::Const(a), Term::Const(b)) => a == b,
            (Term::App(f, xs), Term::App(g, ys)) => f == g && xs == ys,
            (Term::Bound(i), Term::Bound(j)) => i == j,
            (
                Term::Binder { quant: q1, body: b1, .. },
                Term::Binder { quant: q2, body: b2, .. },
            ) => q1 == q2 && b1 == b2,
            _ => false,
        }
    }
}

impl Eq for Term {}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("unexpected end of input")]
    UnexpectedEnd,
    #[error("unexpected token `{0}`")]
    Unexpected(String),
    #[error("unbalanced parentheses")]
    Unbalanced,
    #[error("empty input")]
    Empty,
}

/// Lexical token. Symbols are already normalised to their Unicode spelling.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Token {
    Ident(String),
    Num(String),
    Sym(&'static str),
    LParen,
    RParen,
    Comma,
    Dot,
    Other(char),
}

impl Token {
    /// Text of the token, `None` for pure punctuation.
    pub fn lexeme(&self) -> Option<String> {
        match self {
            Token::Ident(s) | Token::Num(s) => Some(s.clone()),
            Token::Sym(s) => Some((*s).to_string()),
            Token::Other(c) => Some(c.to_string()),
            Token::LParen | Token::RParen | Token::Comma | Token::Dot => None,
        }
    }
}

const ASCII_SYMBOLS: &[(&str, &str)] = &[
    ("==>", "⟹"),
    ("-->", "⟶"),
    ("&", "∧"),
    ("|", "∨"),
    ("~", "¬"),
    ("=", "="),
    ("+", "+"),
    ("*", "*"),
];

const UNICODE_SYMBOLS: &[char] = &['⟹', '⟶', '∧', '∨', '¬', '∀', '∃'];

fn unicode_symbol(c: char) -> &'static str {
    match c {
        '⟹' => "⟹",
        '⟶' => "⟶",
        '∧' => "∧",
        '∨' => "∨",
        '¬' => "¬",
        '∀' => "∀",
        _ => "∃",
    }
}

pub fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

pub fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '\''
}

/// Total tokenizer: never fails, unknown characters become `Token::Other`.
pub fn tokenize(text: &str) -> Vec<Token> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    'outer: while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if is_ident_start(c) {
            let start = i;
            while i < chars.len() && is_ident_char(chars[i]) {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            out.push(match word.as_str() {
                "ALL" => Token::Sym("∀"),
                "EX" => Token::Sym("∃"),
                _ => Token::Ident(word),
            });
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            out.push(Token::Num(chars[start..i].iter().collect()));
            continue;
        }
        if UNICODE_SYMBOLS.contains(&c) {
            out.push(Token::Sym(unicode_symbol(c)));
            i += 1;
            continue;
        }
        for (ascii, sym) in ASCII_SYMBOLS {
            let len = ascii.chars().count();
            if i + len <= chars.len() && chars[i..i + len].iter().copied().eq(ascii.chars()) {
                out.push(Token::Sym(sym));
                i += len;
                continue 'outer;
            }
        }
        out.push(match c {
            '(' => Token::LParen,
            ')' => Token::RParen,
            ',' => Token::Comma,
            '.' => Token::Dot,
            other => Token::Other(other),
        });
        i += 1;
    }
    out
}

/// `a`, `x1`, `b'` are variables; `ab`, `add_zero`, `x_1` are not.
pub fn is_variable_name(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() => {}
        _ => return false,
    }
    let rest: String = chars.collect();
    let digits_end = rest.find(|c: char| !c.is_ascii_digit()).unwrap_or(rest.len());
    rest[digits_end..].chars().all(|c| c == '\'')
}

fn binary_info(sym: &str) -> Option<(u8, Assoc)> {
    match sym {
        "⟹" => Some((1, Assoc::Right)),
        "⟶" => Some((2, Assoc::Right)),
        "∨" => Some((3, Assoc::Right)),
        "∧" => Some((4, Assoc::Right)),
        "=" => Some((6, Assoc::Left)),
        "+" => Some((7, Assoc::Left)),
        "*" => Some((8, Assoc::Left)),
        _ => None,
    }
}

const NOT_PREC: u8 = 5;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Assoc {
    Left,
    Right,
}

/// Raw parse tree before name resolution.
enum Raw {
    Name(String),
    Num(String),
    App(String, Vec<Raw>),
    Binder(Quantifier, String, Box<Raw>),
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn expr(&mut self, min_prec: u8) -> Result<Raw, ParseError> {
        let mut lhs = self.unary()?;
        while let Some(Token::Sym(sym)) = self.peek() {
            let sym = *sym;
            let Some((prec, assoc)) = binary_info(sym) else { break };
            if prec < min_prec {
                break;
            }
            self.pos += 1;
            let next_min = if assoc == Assoc::Right { prec } else { prec + 1 };
            let rhs = self.expr(next_min)?;
            lhs = Raw::App(sym.to_string(), vec![lhs, rhs]);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Raw, ParseError> {
        match self.peek() {
            Some(Token::Sym("¬")) => {
                self.pos += 1;
                let arg = self.expr(NOT_PREC)?;
                Ok(Raw::App("¬".into(), vec![arg]))
            }
            Some(Token::Sym(q @ ("∀" | "∃"))) => {
                let quant = if *q == "∀" { Quantifier::All } else { Quantifier::Ex };
                self.pos += 1;
                let mut names = Vec::new();
                loop {
                    match self.next() {
                        Some(Token::Ident(n)) => names.push(n),
                        Some(Token::Dot) if !names.is_empty() => break,
                        Some(t) => return Err(ParseError::Unexpected(format!("{t:?}"))),
                        None => return Err(ParseError::UnexpectedEnd),
                    }
                }
                let body = self.expr(0)?;
                Ok(names
                    .into_iter()
                    .rev()
                    .fold(body, |acc, n| Raw::Binder(quant, n, Box::new(acc))))
            }
            _ => self.application(),
        }
    }

    fn starts_atom(&self) -> bool {
        matches!(
            self.peek(),
            Some(Token::Ident(_)) | Some(Token::Num(_)) | Some(Token::LParen)
        )
    }

    fn application(&mut self) -> Result<Raw, ParseError> {
        let head = self.atom()?;
        if !self.starts_atom() {
            return match head {
                Atom::Single(r) => Ok(r),
                Atom::Tuple(_) => Err(ParseError::Unexpected(",".into())),
            };
        }
        let name = match head {
            Atom::Single(Raw::Name(n)) => n,
            _ => return Err(ParseError::Unexpected("application of non-identifier".into())),
        };
        let mut args = Vec::new();
        while self.starts_atom() {
            match self.atom()? {
                Atom::Single(r) => args.push(r),
                Atom::Tuple(rs) => args.extend(rs),
            }
        }
        Ok(Raw::App(name, args))
    }

    fn atom(&mut self) -> Result<Atom, ParseError> {
        match self.next() {
            Some(Token::Ident(n)) => Ok(Atom::Single(Raw::Name(n))),
            Some(Token::Num(n)) => Ok(Atom::Single(Raw::Num(n))),
            Some(Token::LParen) => {
                let mut items = vec![self.expr(0)?];
                loop {
                    match self.next() {
                        Some(Token::RParen) => break,
                        Some(Token::Comma) => items.push(self.expr(0)?),
                        Some(t) => return Err(ParseError::Unexpected(format!("{t:?}"))),
                        None => return Err(ParseError::Unbalanced),
                    }
                }
                if items.len() == 1 {
                    Ok(Atom::Single(items.pop().expect("one item")))
                } else {
                    Ok(Atom::Tuple(items))
                }
            }
            Some(Token::RParen) => Err(ParseError::Unbalanced),
            Some(t) => Err(ParseError::Unexpected(t.lexeme().unwrap_or_else(|| format!("{t:?}")))),
            None => Err(ParseError::UnexpectedEnd),
        }
    }
}

enum Atom {
    Single(Raw),
    Tuple(Vec<Raw>),
}

fn resolve(raw: Raw, scope: &mut Vec<String>) -> Term {
    match raw {
        Raw::Name(n) => {
            if let Some(pos) = scope.iter().rposition(|b| *b == n) {
                Term::Bound(scope.len() - 1 - pos)
            } else if is_variable_name(&n) {
                Term::Var(n)
            } else {
                Term::Const(n)
            }
        }
        Raw::Num(n) => Term::Const(n),
        Raw::App(f, args) => Term::App(f, args.into_iter().map(|a| resolve(a, scope)).collect()),
        Raw::Binder(quant, hint, body) => {
            scope.push(hint.clone());
            let body = resolve(*body, scope);
            scope.pop();
            Term::Binder { quant, hint, body: Box::new(body) }
        }
    }
}

impl Term {
    pub fn parse(text: &str) -> Result<Term, ParseError> {
        let tokens = tokenize(text);
        if tokens.is_empty() {
            return Err(ParseError::Empty);
        }
        let mut parser = Parser { tokens, pos: 0 };
        let raw = parser.expr(0)?;
        if let Some(t) = parser.peek() {
            return Err(match t {
                Token::RParen => ParseError::Unbalanced,
                other => ParseError::Unexpected(
                    other.lexeme().unwrap_or_else(|| format!("{other:?}")),
                ),
            });
        }
        Ok(resolve(raw, &mut Vec::new()))
    }

    pub fn app(head: &str, args: Vec<Term>) -> Term {
        if args.is_empty() {
            Term::Const(head.to_string())
        } else {
            Term::App(head.to_string(), args)
        }
    }

    pub fn truth() -> Term {
        Term::Const("True".into())
    }

    pub fn is_true(&self) -> bool {
        matches!(self, Term::Const(c) if c == "True")
    }

    /// `(lhs, rhs)` if this is an equation.
    pub fn as_equation(&self) -> Option<(&Term, &Term)> {
        match self {
            Term::App(f, args) if f == "=" && args.len() == 2 => Some((&args[0], &args[1])),
            _ => None,
        }
    }

    /// Splits `P1 ⟹ P2 ⟹ C` into premises and conclusion.
    pub fn strip_meta_implication(&self) -> (Vec<&Term>, &Term) {
        let mut premises = Vec::new();
        let mut cur = self;
        while let Term::App(f, args) = cur {
            if f == "⟹" && args.len() == 2 {
                premises.push(&args[0]);
                cur = &args[1];
            } else {
                break;
            }
        }
        (premises, cur)
    }

    /// Head constant: the application head, constant name, or binder symbol.
    pub fn head(&self) -> Option<&str> {
        match self {
            Term::App(f, _) => Some(f),
            Term::Const(c) => Some(c),
            Term::Binder { quant, .. } => Some(quant.symbol()),
            Term::Var(_) | Term::Bound(_) => None,
        }
    }

    pub fn contains_var(&self, name: &str) -> bool {
        match self {
            Term::Var(v) => v == name,
            Term::App(_, args) => args.iter().any(|a| a.contains_var(name)),
            Term::Binder { body, .. } => body.contains_var(name),
            Term::Const(_) | Term::Bound(_) => false,
        }
    }

    pub fn visit_vars<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Term::Var(v) => out.push(v),
            Term::App(_, args) => args.iter().for_each(|a| a.visit_vars(out)),
            Term::Binder { body, .. } => body.visit_vars(out),
            Term::Const(_) | Term::Bound(_) => {}
        }
    }

    /// Constant names, application heads and binder symbols.
    pub fn constants(&self, out: &mut std::collections::BTreeSet<String>) {
        match self {
            Term::Const(c) => {
                out.insert(c.clone());
            }
            Term::App(f, args) => {
                out.insert(f.clone());
                args.iter().for_each(|a| a.constants(out));
            }
            Term::Binder { quant, body, .. } => {
                out.insert(quant.symbol().to_string());
                body.constants(out);
            }
            Term::Var(_) | Term::Bound(_) => {}
        }
    }

    /// Height counting internal nodes only; atoms have depth 0.
    pub fn depth(&self) -> usize {
        match self {
            Term::App(_, args) => 1 + args.iter().map(Term::depth).max().unwrap_or(0),
            Term::Binder { body, .. } => 1 + body.depth(),
            _ => 0,
        }
    }

    pub fn substitute_var(&self, name: &str, replacement: &Term) -> Term {
        match self {
            Term::Var(v) if v == name => replacement.clone(),
            Term::App(f, args) => Term::App(
                f.clone(),
                args.iter().map(|a| a.substitute_var(name, replacement)).collect(),
            ),
            Term::Binder { quant, hint, body } => Term::Binder {
                quant: *quant,
                hint: hint.clone(),
                body: Box::new(body.substitute_var(name, replacement)),
            },
            other => other.clone(),
        }
    }

    /// Canonical prefix rendering used for fingerprints: variables get a `?`
    /// prefix, bound variables are positional (`#i`), binder hints vanish.
    pub fn canonical(&self) -> String {
        let mut s = String::new();
        self.write_canonical(&mut s);
        s
    }

    fn write_canonical(&self, out: &mut String) {
        match self {
            Term::Var(v) => {
                out.push('?');
                out.push_str(v);
            }
            Term::Const(c) => out.push_str(c),
            Term::Bound(i) => {
                out.push('#');
                out.push_str(&i.to_string());
            }
            Term::App(f, args) => {
                out.push('(');
                out.push_str(f);
                for a in args {
                    out.push(' ');
                    a.write_canonical(out);
                }
                out.push(')');
            }
            Term::Binder { quant, body, .. } => {
                out.push('(');
                out.push_str(quant.symbol());
                out.push_str(". ");
                body.write_canonical(out);
                out.push(')');
            }
        }
    }

    fn render(&self, names: &mut Vec<String>, out: &mut String, ctx_prec: u8) {
        match self {
            Term::Var(v) | Term::Const(v) => out.push_str(v),
            Term::Bound(i) => {
                let name = names
                    .len()
                    .checked_sub(1 + i)
                    .and_then(|k| names.get(k))
                    .cloned()
                    .unwrap_or_else(|| format!("#{i}"));
                out.push_str(&name);
            }
            Term::App(f, args) => {
                if let (Some((prec, assoc)), 2) = (binary_info(f), args.len()) {
                    let paren = prec < ctx_prec;
                    if paren {
                        out.push('(');
                    }
                    let (lp, rp) = match assoc {
                        Assoc::Left => (prec, prec + 1),
                        Assoc::Right => (prec + 1, prec),
                    };
                    args[0].render(names, out, lp);
                    out.push(' ');
                    out.push_str(f);
                    out.push(' ');
                    args[1].render(names, out, rp);
                    if paren {
                        out.push(')');
                    }
                } else if f == "¬" && args.len() == 1 {
                    let paren = NOT_PREC < ctx_prec;
                    if paren {
                        out.push('(');
                    }
                    out.push_str("¬ ");
                    args[0].render(names, out, NOT_PREC);
                    if paren {
                        out.push(')');
                    }
                } else {
                    out.push_str(f);
                    out.push('(');
                    for (k, a) in args.iter().enumerate() {
                        if k > 0 {
                            out.push_str(", ");
                        }
                        a.render(names, out, 0);
                    }
                    out.push(')');
                }
            }
            Term::Binder { quant, hint, body } => {
                let paren = ctx_prec > 0;
                if paren {
                    out.push('(');
                }
                let mut name = hint.clone();
                while names.contains(&name) || body.contains_var(&name) {
                    name.push('\'');
                }
                out.push_str(quant.symbol());
                out.push_str(&name);
                out.push_str(". ");
                names.push(name);
                body.render(names, out, 0);
                names.pop();
                if paren {
                    out.push(')');
                }
            }
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        self.render(&mut Vec::new(), &mut s, 0);
        f.write_str(&s)
    }
}

/// Does `t` reference a binder outside itself?
fn has_loose_bound(t: &Term, level: usize) -> bool {
    match t {
        Term::Bound(i) => *i >= level,
        Term::App(_, args) => args.iter().any(|a| has_loose_bound(a, level)),
        Term::Binder { body, .. } => has_loose_bound(body, level + 1),
        Term::Var(_) | Term::Const(_) => false,
    }
}

pub type Subst = BTreeMap<String, Term>;

/// One-way matching. Variables of `pattern` are schematic when `schematic`
/// is set; otherwise they only match themselves.
pub fn match_term(pattern: &Term, term: &Term, schematic: bool, subst: &mut Subst) -> bool {
    match_at(pattern, term, schematic, subst, 0)
}

fn match_at(pattern: &Term, term: &Term, schematic: bool, subst: &mut Subst, level: usize) -> bool {
    match (pattern, term) {
        (Term::Var(v), _) if schematic => {
            if has_loose_bound(term, level) {
                return false;
            }
            match subst.get(v) {
                Some(bound) => bound == term,
                None => {
                    subst.insert(v.clone(), term.clone());
                    true
                }
            }
        }
        (Term::App(f, xs), Term::App(g, ys)) => {
            f == g
                && xs.len() == ys.len()
                && xs
                    .iter()
                    .zip(ys)
                    .all(|(x, y)| match_at(x, y, schematic, subst, level))
        }
        (
            Term::Binder { quant: q1, body: b1, .. },
            Term::Binder { quant: q2, body: b2, .. },
        ) => q1 == q2 && match_at(b1, b2, schematic, subst, level + 1),
        (p, t) => p == t,
    }
}

pub fn instantiate(t: &Term, subst: &Subst) -> Term {
    match t {
        Term::Var(v) => subst.get(v).cloned().unwrap_or_else(|| t.clone()),
        Term::App(f, args) => Term::App(f.clone(), args.iter().map(|a| instantiate(a, subst)).collect()),
        Term::Binder { quant, hint, body } => Term::Binder {
            quant: *quant,
            hint: hint.clone(),
            body: Box::new(instantiate(body, subst)),
        },
        other => other.clone(),
    }
}

/// Replace `Bound(level)` with `with`.
fn open_binder(t: &Term, level: usize, with: &Term) -> Term {
    match t {
        Term::Bound(i) if *i == level => with.clone(),
        Term::App(f, args) => Term::App(f.clone(), args.iter().map(|a| open_binder(a, level, with)).collect()),
        Term::Binder { quant, hint, body } => Term::Binder {
            quant: *quant,
            hint: hint.clone(),
            body: Box::new(open_binder(body, level + 1, with)),
        },
        other => other.clone(),
    }
}

/// Replace the free variable `name` with `Bound(level)`.
fn close_binder(t: &Term, level: usize, name: &str) -> Term {
    match t {
        Term::Var(v) if v == name => Term::Bound(level),
        Term::App(f, args) => Term::App(f.clone(), args.iter().map(|a| close_binder(a, level, name)).collect()),
        Term::Binder { quant, hint, body } => Term::Binder {
            quant: *quant,
            hint: hint.clone(),
            body: Box::new(close_binder(body, level + 1, name)),
        },
        other => other.clone(),
    }
}

#[derive(Debug, Clone)]
pub struct RewriteRule {
    pub name: String,
    pub lhs: Term,
    pub rhs: Term,
    /// Rule variables are pattern variables (false for hypotheses, whose
    /// free variables are fixed).
    pub schematic: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum RewriteError {
    #[error("rewrite step limit exceeded")]
    StepLimit,
    #[error("time budget exceeded")]
    Deadline,
}

/// Leftmost-outermost rewriting to normal form.
pub struct Rewriter<'a> {
    pub rules: &'a [RewriteRule],
    pub max_steps: usize,
    pub deadline: Option<std::time::Instant>,
}

impl Rewriter<'_> {
    pub fn normalize(&self, t: &Term) -> Result<(Term, usize), RewriteError> {
        let mut cur = t.clone();
        let mut steps = 0;
        let mut fresh = 0usize;
        while let Some(next) = self.rewrite_once(&cur, &mut fresh) {
            steps += 1;
            if steps > self.max_steps {
                return Err(RewriteError::StepLimit);
            }
            if let Some(deadline) = self.deadline {
                if std::time::Instant::now() > deadline {
                    return Err(RewriteError::Deadline);
                }
            }
            cur = next;
        }
        Ok((cur, steps))
    }

    fn rewrite_once(&self, t: &Term, fresh: &mut usize) -> Option<Term> {
        for rule in self.rules {
            let mut subst = Subst::new();
            if match_term(&rule.lhs, t, rule.schematic, &mut subst) {
                let out = if rule.schematic { instantiate(&rule.rhs, &subst) } else { rule.rhs.clone() };
                if out != *t {
                    return Some(out);
                }
            }
        }
        match t {
            Term::App(f, args) => {
                for (k, a) in args.iter().enumerate() {
                    if let Some(new) = self.rewrite_once(a, fresh) {
                        let mut args = args.clone();
                        args[k] = new;
                        return Some(Term::App(f.clone(), args));
                    }
                }
                None
            }
            Term::Binder { quant, hint, body } => {
                *fresh += 1;
                let name = format!("\u{b7}{fresh}");
                let opened = open_binder(body, 0, &Term::Var(name.clone()));
                let new = self.rewrite_once(&opened, fresh)?;
                Some(Term::Binder {
                    quant: *quant,
                    hint: hint.clone(),
                    body: Box::new(close_binder(&new, 0, &name)),
                })
            }
            _ => None,
        }
    }
}

/// Built-in logical simplifications shared by every `simp` call.
pub fn builtin_simp_rules() -> Vec<RewriteRule> {
    const RULES: &[(&str, &str, &str)] = &[
        ("refl", "x = x", "True"),
        ("conj_true_l", "True ∧ p", "p"),
        ("conj_true_r", "p ∧ True", "p"),
        ("conj_false_l", "False ∧ p", "False"),
        ("conj_false_r", "p ∧ False", "False"),
        ("disj_true_l", "True ∨ p", "True"),
        ("disj_true_r", "p ∨ True", "True"),
        ("disj_false_l", "False ∨ p", "p"),
        ("disj_false_r", "p ∨ False", "p"),
        ("imp_true_l", "True ⟶ p", "p"),
        ("imp_true_r", "p ⟶ True", "True"),
        ("imp_false_l", "False ⟶ p", "True"),
        ("not_true", "¬ True", "False"),
        ("not_false", "¬ False", "True"),
        ("all_true", "∀x. True", "True"),
        ("ex_true", "∃x. True", "True"),
    ];
    RULES
        .iter()
        .map(|(name, l, r)| RewriteRule {
            name: (*name).to_string(),
            lhs: Term::parse(l).expect("builtin rule parses"),
            rhs: Term::parse(r).expect("builtin rule parses"),
            schematic: true,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(s: &str) -> Term {
        Term::parse(s).unwrap()
    }

    #[test]
    fn parses_equation_with_precedence() {
        let t = p("a + 0 = a");
        assert_eq!(
            t,
            Term::App(
                "=".into(),
                vec![
                    Term::App("+".into(), vec![Term::Var("a".into()), Term::Const("0".into())]),
                    Term::Var("a".into())
                ]
            )
        );
        assert_eq!(t.to_string(), "a + 0 = a");
        assert_eq!(t.depth(), 2);
    }

    #[test]
    fn prefix_and_juxtaposed_application_agree() {
        assert_eq!(p("f(a, b)"), p("f a b"));
        assert_eq!(p("P (f b)"), p("P(f(b))"));
        assert_eq!(p("P (f b)").to_string(), "P(f(b))");
    }

    #[test]
    fn ascii_aliases_normalise() {
        assert_eq!(p("ALL x. P x --> Q x"), p("∀x. P(x) ⟶ Q(x)"));
        assert_eq!(p("a & b | c"), p("(a ∧ b) ∨ c"));
        assert_eq!(p("A ==> B"), p("A ⟹ B"));
    }

    #[test]
    fn alpha_equivalent_binders_are_equal() {
        assert_eq!(p("∀x. P(x)"), p("∀y. P(y)"));
        assert_eq!(p("∀x. P(x)").canonical(), p("∀z. P(z)").canonical());
        assert_ne!(p("∀x. P(x)"), p("∀x. P(y)"));
    }

    #[test]
    fn variable_convention() {
        assert!(is_variable_name("a"));
        assert!(is_variable_name("x1"));
        assert!(is_variable_name("b'"));
        assert!(!is_variable_name("ab"));
        assert!(!is_variable_name("x_1"));
        assert!(!is_variable_name("0"));
        assert_eq!(p("plus(a, zero)").head(), Some("plus"));
        assert!(matches!(p("zero"), Term::Const(_)));
    }

    #[test]
    fn malformed_inputs_error() {
        assert_eq!(Term::parse("f(a"), Err(ParseError::Unbalanced));
        assert!(Term::parse("a)").is_err());
        assert_eq!(Term::parse("   "), Err(ParseError::Empty));
        assert!(Term::parse("No subgoals!").is_err());
        assert!(Term::parse("(a, b)").is_err());
    }

    #[test]
    fn render_freshens_clashing_binder_names() {
        // ∀x. P(x, x_free) where the free variable is also called x
        let t = Term::Binder {
            quant: Quantifier::All,
            hint: "x".into(),
            body: Box::new(Term::App("P".into(), vec![Term::Bound(0), Term::Var("x".into())])),
        };
        let shown = t.to_string();
        assert_eq!(shown, "∀x'. P(x', x)");
        assert_eq!(p(&shown), t);
    }

    #[test]
    fn rewriting_reaches_normal_form() {
        let rules = vec![RewriteRule {
            name: "add_zero".into(),
            lhs: p("x + 0"),
            rhs: p("x"),
            schematic: true,
        }];
        let rw = Rewriter { rules: &rules, max_steps: 1000, deadline: None };
        let (t, steps) = rw.normalize(&p("(a + 0) + 0 = a")).unwrap();
        assert_eq!(t, p("a = a"));
        assert_eq!(steps, 2);
    }

    #[test]
    fn rewriting_under_binders() {
        let mut rules = vec![RewriteRule {
            name: "add_zero".into(),
            lhs: p("x + 0"),
            rhs: p("x"),
            schematic: true,
        }];
        rules.extend(builtin_simp_rules());
        let rw = Rewriter { rules: &rules, max_steps: 1000, deadline: None };
        let (t, _) = rw.normalize(&p("∀y. y + 0 = y")).unwrap();
        assert!(t.is_true());
    }

    #[test]
    fn looping_rules_hit_the_step_limit() {
        let rules = vec![
            RewriteRule { name: "ab".into(), lhs: p("f(x)"), rhs: p("g(x)"), schematic: true },
            RewriteRule { name: "ba".into(), lhs: p("g(x)"), rhs: p("f(x)"), schematic: true },
        ];
        let rw = Rewriter { rules: &rules, max_steps: 1000, deadline: None };
        assert_eq!(rw.normalize(&p("f(a)")), Err(RewriteError::StepLimit));
    }

    #[test]
    fn non_linear_patterns_require_equal_instances() {
        let mut s = Subst::new();
        assert!(match_term(&p("x = x"), &p("f(a) = f(a)"), true, &mut s));
        let mut s = Subst::new();
        assert!(!match_term(&p("x = x"), &p("f(a) = f(b)"), true, &mut s));
    }

    fn arb_term() -> impl Strategy<Value = Term> {
        let leaf = prop_oneof![
            prop::sample::select(vec!["a", "b", "x", "y1"]).prop_map(|v| Term::Var(v.into())),
            prop::sample::select(vec!["0", "zero", "nil", "True"]).prop_map(|c| Term::Const(c.into())),
        ];
        leaf.prop_recursive(4, 24, 3, |inner| {
            prop_oneof![
                (prop::sample::select(vec!["=", "+", "*", "∧", "∨", "⟶"]), inner.clone(), inner.clone())
                    .prop_map(|(op, l, r)| Term::App(op.into(), vec![l, r])),
                (prop::sample::select(vec!["f", "g", "plus", "P"]), prop::collection::vec(inner.clone(), 1..3))
                    .prop_map(|(f, args)| Term::App(f.into(), args)),
                inner.clone().prop_map(|t| Term::App("¬".into(), vec![t])),
                inner.prop_map(|t| {
                    // bind x: replace Var("x") with Bound(0)
                    Term::Binder {
                        quant: Quantifier::All,
                        hint: "x".into(),
                        body: Box::new(close_binder(&t, 0, "x")),
                    }
                }),
            ]
        })
    }

    proptest! {
        #[test]
        fn render_parse_round_trip(t in arb_term()) {
            let text = t.to_string();
            let back = Term::parse(&text).unwrap();
            prop_assert_eq!(&back, &t, "rendered as {}", text);
        }

        #[test]
        fn canonical_form_is_injective_on_samples(a in arb_term(), b in arb_term()) {
            prop_assert_eq!(a == b, a.canonical() == b.canonical());
        }
    }
}
