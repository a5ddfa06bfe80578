//! Finite lambda-terms over a first-order signature.
//!
//! Terms use a locally nameless representation: free variables are named
//! and drawn from an ordered [`Context`], bound variables are de Bruijn
//! indices (`Bound(0)` is the innermost binder). Binders carry an optional
//! display hint that printing may use; hints never participate in equality,
//! so structural equality of terms is exactly alpha-equivalence.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::lex::{self, Tok, Token};

#[derive(Debug, Error)]
pub enum TermError {
    #[error("syntax error at line {line}, column {col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("unknown identifier `{0}`")]
    UnknownIdentifier(String),
    #[error("`{0}` is a variable, not a signature symbol; application is written with `@`")]
    NotASymbol(String),
    #[error("symbol `{symbol}` expects {expected} argument(s), got {got}")]
    Arity {
        symbol: String,
        expected: usize,
        got: usize,
    },
    #[error("symbol `{symbol}` of arity {arity} must be applied with parentheses")]
    UnappliedSymbol { symbol: String, arity: usize },
    #[error("duplicate name `{0}`")]
    DuplicateName(String),
    #[error("invalid name `{0}`")]
    InvalidName(String),
    #[error("no mapping for context variable `{0}`")]
    MissingMapping(String),
    #[error("`{0}` is not in the target context")]
    NotInTargetContext(String),
    #[error("free variable `{0}` is not in the context")]
    FreeVarNotInContext(String),
    #[error("bound index {index} exceeds binder depth {depth}")]
    UnboundIndex { index: u32, depth: usize },
}

/// First-order signature: a finite map from symbol names to arities.
///
/// Symbol names are ordinary identifiers, so they can never collide with
/// the reserved tokens `@`, `\` and `_|_`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Signature {
    arities: BTreeMap<String, usize>,
}

impl Signature {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn new<S: Into<String>>(
        symbols: impl IntoIterator<Item = (S, usize)>,
    ) -> Result<Self, TermError> {
        let mut arities = BTreeMap::new();
        for (name, arity) in symbols {
            let name = name.into();
            if !lex::is_ident(&name) {
                return Err(TermError::InvalidName(name));
            }
            if arities.insert(name.clone(), arity).is_some() {
                return Err(TermError::DuplicateName(name));
            }
        }
        Ok(Self { arities })
    }

    pub fn arity(&self, symbol: &str) -> Option<usize> {
        self.arities.get(symbol).copied()
    }

    pub fn contains(&self, symbol: &str) -> bool {
        self.arities.contains_key(symbol)
    }

    pub fn is_empty(&self) -> bool {
        self.arities.is_empty()
    }

    /// Symbols with their arities, in name order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, usize)> {
        self.arities.iter().map(|(s, a)| (s.as_str(), *a))
    }
}

/// Ordered list of distinct free-variable names.
///
/// The order is meaningful: term graphs, renamings and interpreted context
/// maps all treat the context as a coordinate list, not a set.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Context {
    names: Vec<String>,
}

impl Context {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Result<Self, TermError> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for name in names {
            let name = name.into();
            if !lex::is_ident(&name) {
                return Err(TermError::InvalidName(name));
            }
            if !seen.insert(name.clone()) {
                return Err(TermError::DuplicateName(name));
            }
            out.push(name);
        }
        Ok(Self { names: out })
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.position(name).is_some()
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Concatenation; the added names must keep the context distinct.
    pub fn extended<S: Into<String>>(
        &self,
        names: impl IntoIterator<Item = S>,
    ) -> Result<Context, TermError> {
        Context::new(self.names.iter().cloned().chain(names.into_iter().map(Into::into)))
    }
}

impl fmt::Display for Context {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.names.join(", "))
    }
}

/// A finite term. `Abs` carries a display hint used only by printing.
#[derive(Debug, Clone)]
pub enum Term {
    Free(String),
    Bound(u32),
    App(Box<Term>, Box<Term>),
    Abs(Box<Term>, Option<String>),
    Op(String, Vec<Term>),
    Bottom,
}

impl PartialEq for Term {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Term::Free(a), Term::Free(b)) => a == b,
            (Term::Bound(i), Term::Bound(j)) => i == j,
            (Term::App(a, b), Term::App(c, d)) => a == c && b == d,
            // Hints are ignored: equality is alpha-equivalence.
            (Term::Abs(a, _), Term::Abs(b, _)) => a == b,
            (Term::Op(s, xs), Term::Op(t, ys)) => s == t && xs == ys,
            (Term::Bottom, Term::Bottom) => true,
            _ => false,
        }
    }
}

impl Eq for Term {}

impl Term {
    pub fn free(name: impl Into<String>) -> Term {
        Term::Free(name.into())
    }

    pub fn bound(index: u32) -> Term {
        Term::Bound(index)
    }

    pub fn app(left: Term, right: Term) -> Term {
        Term::App(Box::new(left), Box::new(right))
    }

    pub fn abs(body: Term) -> Term {
        Term::Abs(Box::new(body), None)
    }

    pub fn abs_named(name: impl Into<String>, body: Term) -> Term {
        Term::Abs(Box::new(body), Some(name.into()))
    }

    pub fn op(symbol: impl Into<String>, args: impl IntoIterator<Item = Term>) -> Term {
        Term::Op(symbol.into(), args.into_iter().collect())
    }

    /// Names of the free variables, in name order.
    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut out);
        out
    }

    fn collect_free(&self, out: &mut BTreeSet<String>) {
        match self {
            Term::Free(x) => {
                out.insert(x.clone());
            }
            Term::Bound(_) | Term::Bottom => {}
            Term::App(l, r) => {
                l.collect_free(out);
                r.collect_free(out);
            }
            Term::Abs(b, _) => b.collect_free(out),
            Term::Op(_, args) => {
                for a in args {
                    a.collect_free(out);
                }
            }
        }
    }

    /// Height of the syntax tree; leaves (including nullary operations)
    /// have depth 0.
    pub fn depth(&self) -> usize {
        match self {
            Term::Free(_) | Term::Bound(_) | Term::Bottom => 0,
            Term::App(l, r) => 1 + l.depth().max(r.depth()),
            Term::Abs(b, _) => 1 + b.depth(),
            Term::Op(_, args) => match args.iter().map(Term::depth).max() {
                Some(d) => 1 + d,
                None => 0,
            },
        }
    }

    /// Replaces every node at depth `k` by `Bottom`; `cut(t, 0)` is `Bottom`.
    pub fn cut(&self, k: usize) -> Term {
        if k == 0 {
            return Term::Bottom;
        }
        match self {
            Term::Free(_) | Term::Bound(_) | Term::Bottom => self.clone(),
            Term::App(l, r) => Term::App(Box::new(l.cut(k - 1)), Box::new(r.cut(k - 1))),
            Term::Abs(b, h) => Term::Abs(Box::new(b.cut(k - 1)), h.clone()),
            Term::Op(s, args) => {
                Term::Op(s.clone(), args.iter().map(|a| a.cut(k - 1)).collect())
            }
        }
    }

    /// Checks well-formedness over `sig` and `ctx`: free names lie in the
    /// context, operation arities match the signature, and every bound
    /// index is under that many binders.
    pub fn validate(&self, sig: &Signature, ctx: &Context) -> Result<(), TermError> {
        self.validate_at(sig, ctx, 0)
    }

    fn validate_at(&self, sig: &Signature, ctx: &Context, depth: usize) -> Result<(), TermError> {
        match self {
            Term::Free(x) => {
                if ctx.contains(x) {
                    Ok(())
                } else {
                    Err(TermError::FreeVarNotInContext(x.clone()))
                }
            }
            Term::Bound(i) => {
                if (*i as usize) < depth {
                    Ok(())
                } else {
                    Err(TermError::UnboundIndex { index: *i, depth })
                }
            }
            Term::App(l, r) => {
                l.validate_at(sig, ctx, depth)?;
                r.validate_at(sig, ctx, depth)
            }
            Term::Abs(b, _) => b.validate_at(sig, ctx, depth + 1),
            Term::Op(s, args) => {
                let arity = sig
                    .arity(s)
                    .ok_or_else(|| TermError::UnknownIdentifier(s.clone()))?;
                if arity != args.len() {
                    return Err(TermError::Arity {
                        symbol: s.clone(),
                        expected: arity,
                        got: args.len(),
                    });
                }
                for a in args {
                    a.validate_at(sig, ctx, depth)?;
                }
                Ok(())
            }
            Term::Bottom => Ok(()),
        }
    }
}

/// Structural equality on the nameless representation, i.e.
/// alpha-equivalence of finite terms. Display hints are ignored.
pub fn alpha_eq(left: &Term, right: &Term) -> bool {
    left == right
}

/// Applies a total renaming `map : from -> to` to the free variables.
pub fn rename(
    t: &Term,
    from: &Context,
    to: &Context,
    map: &BTreeMap<String, String>,
) -> Result<Term, TermError> {
    for name in from.names() {
        let target = map
            .get(name)
            .ok_or_else(|| TermError::MissingMapping(name.clone()))?;
        if !to.contains(target) {
            return Err(TermError::NotInTargetContext(target.clone()));
        }
    }
    rename_rec(t, from, map)
}

fn rename_rec(
    t: &Term,
    from: &Context,
    map: &BTreeMap<String, String>,
) -> Result<Term, TermError> {
    Ok(match t {
        Term::Free(x) => {
            if !from.contains(x) {
                return Err(TermError::FreeVarNotInContext(x.clone()));
            }
            Term::Free(map[x].clone())
        }
        Term::Bound(i) => Term::Bound(*i),
        Term::App(l, r) => Term::App(
            Box::new(rename_rec(l, from, map)?),
            Box::new(rename_rec(r, from, map)?),
        ),
        Term::Abs(b, h) => Term::Abs(Box::new(rename_rec(b, from, map)?), h.clone()),
        Term::Op(s, args) => Term::Op(
            s.clone(),
            args.iter()
                .map(|a| rename_rec(a, from, map))
                .collect::<Result<_, _>>()?,
        ),
        Term::Bottom => Term::Bottom,
    })
}

/// Simultaneous substitution: replaces each free variable `x` of `t` (a
/// term over `from`) by `map[x]`, a term over `to`.
///
/// Bound variables are untouched. Because inserted terms are index-closed
/// over their own context, no index shifting is needed and capture is
/// impossible by construction.
pub fn substitute(
    t: &Term,
    from: &Context,
    to: &Context,
    map: &BTreeMap<String, Term>,
) -> Result<Term, TermError> {
    for name in from.names() {
        let value = map
            .get(name)
            .ok_or_else(|| TermError::MissingMapping(name.clone()))?;
        for free in value.free_vars() {
            if !to.contains(&free) {
                return Err(TermError::FreeVarNotInContext(free));
            }
        }
        check_closed(value, 0)?;
    }
    substitute_rec(t, from, map)
}

fn check_closed(t: &Term, depth: usize) -> Result<(), TermError> {
    match t {
        Term::Bound(i) if *i as usize >= depth => {
            Err(TermError::UnboundIndex { index: *i, depth })
        }
        Term::Bound(_) | Term::Free(_) | Term::Bottom => Ok(()),
        Term::App(l, r) => {
            check_closed(l, depth)?;
            check_closed(r, depth)
        }
        Term::Abs(b, _) => check_closed(b, depth + 1),
        Term::Op(_, args) => {
            for a in args {
                check_closed(a, depth)?;
            }
            Ok(())
        }
    }
}

fn substitute_rec(
    t: &Term,
    from: &Context,
    map: &BTreeMap<String, Term>,
) -> Result<Term, TermError> {
    Ok(match t {
        Term::Free(x) => {
            if !from.contains(x) {
                return Err(TermError::FreeVarNotInContext(x.clone()));
            }
            map[x].clone()
        }
        Term::Bound(i) => Term::Bound(*i),
        Term::App(l, r) => Term::App(
            Box::new(substitute_rec(l, from, map)?),
            Box::new(substitute_rec(r, from, map)?),
        ),
        Term::Abs(b, h) => Term::Abs(Box::new(substitute_rec(b, from, map)?), h.clone()),
        Term::Op(s, args) => Term::Op(
            s.clone(),
            args.iter()
                .map(|a| substitute_rec(a, from, map))
                .collect::<Result<_, _>>()?,
        ),
        Term::Bottom => Term::Bottom,
    })
}

/// The identity substitution on `ctx`, the unit of substitution composition.
pub fn identity_substitution(ctx: &Context) -> BTreeMap<String, Term> {
    ctx.names()
        .iter()
        .map(|n| (n.clone(), Term::free(n.clone())))
        .collect()
}

/// Parses term text over the given signature and context.
///
/// Grammar:
/// ```text
/// term := lam | app
/// lam  := "\" ident+ "." term
/// app  := atom ("@" atom)*          (left-associative)
/// atom := ident | ident "(" term ("," term)* ")" | "(" term ")" | "_|_"
/// ```
/// A bare identifier resolves, in priority order, to the innermost bound
/// name, a context variable, or a nullary signature symbol. Symbols of
/// positive arity must be applied with parentheses and exact arity.
pub fn parse_term(text: &str, sig: &Signature, ctx: &Context) -> Result<Term, TermError> {
    let toks = lex::tokenize(text).map_err(|(line, col, msg)| TermError::Syntax {
        line,
        col,
        msg,
    })?;
    let toks: Vec<Token> = toks.into_iter().filter(|t| t.kind != Tok::Newline).collect();
    parse_term_tokens(&toks, sig, ctx, false)
}

/// Parses a complete term from a token slice. With `allow_caret`, the
/// extra atom `^k` denotes `Bound(k)` regardless of local binder depth;
/// scheme files use it for rules living under binders of other rules.
pub(crate) fn parse_term_tokens(
    toks: &[Token],
    sig: &Signature,
    ctx: &Context,
    allow_caret: bool,
) -> Result<Term, TermError> {
    let mut p = Parser {
        toks,
        pos: 0,
        sig,
        ctx,
        scope: Vec::new(),
        allow_caret,
    };
    let t = p.term()?;
    if p.pos != toks.len() {
        return Err(p.err_here("expected end of term"));
    }
    Ok(t)
}

struct Parser<'a> {
    toks: &'a [Token],
    pos: usize,
    sig: &'a Signature,
    ctx: &'a Context,
    scope: Vec<String>,
    allow_caret: bool,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.kind)
    }

    fn bump(&mut self) -> Option<Token> {
        let t = self.toks.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn err_here(&self, msg: &str) -> TermError {
        let (line, col) = match self.toks.get(self.pos).or_else(|| self.toks.last()) {
            Some(t) => (t.line, t.col),
            None => (1, 1),
        };
        TermError::Syntax {
            line,
            col,
            msg: msg.to_string(),
        }
    }

    fn expect(&mut self, kind: Tok) -> Result<(), TermError> {
        match self.peek() {
            Some(k) if *k == kind => {
                self.pos += 1;
                Ok(())
            }
            Some(k) => Err(self.err_here(&format!("expected {kind}, found {k}"))),
            None => Err(self.err_here(&format!("expected {kind}, found end of input"))),
        }
    }

    fn term(&mut self) -> Result<Term, TermError> {
        if self.peek() == Some(&Tok::Backslash) {
            self.lam()
        } else {
            self.app()
        }
    }

    fn lam(&mut self) -> Result<Term, TermError> {
        self.expect(Tok::Backslash)?;
        let mut names = Vec::new();
        while let Some(Tok::Ident(name)) = self.peek() {
            names.push(name.clone());
            self.pos += 1;
        }
        if names.is_empty() {
            return Err(self.err_here("expected at least one binder name after `\\`"));
        }
        self.expect(Tok::Dot)?;
        for n in &names {
            self.scope.push(n.clone());
        }
        let mut t = self.term()?;
        for n in names.iter().rev() {
            self.scope.pop();
            t = Term::Abs(Box::new(t), Some(n.clone()));
        }
        Ok(t)
    }

    fn app(&mut self) -> Result<Term, TermError> {
        let mut t = self.atom()?;
        while self.peek() == Some(&Tok::At) {
            self.pos += 1;
            let r = self.atom()?;
            t = Term::App(Box::new(t), Box::new(r));
        }
        Ok(t)
    }

    fn atom(&mut self) -> Result<Term, TermError> {
        match self.peek().cloned() {
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                if self.peek() == Some(&Tok::LParen) {
                    self.symbol_application(name)
                } else {
                    self.resolve_bare(name)
                }
            }
            Some(Tok::Bottom) => {
                self.pos += 1;
                Ok(Term::Bottom)
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let t = self.term()?;
                self.expect(Tok::RParen)?;
                Ok(t)
            }
            Some(Tok::Caret) if self.allow_caret => {
                self.pos += 1;
                match self.bump().map(|t| t.kind) {
                    Some(Tok::Nat(n)) => Ok(Term::Bound(n as u32)),
                    _ => Err(self.err_here("expected an index after `^`")),
                }
            }
            _ => Err(self.err_here("expected a term")),
        }
    }

    fn symbol_application(&mut self, name: String) -> Result<Term, TermError> {
        let arity = match self.sig.arity(&name) {
            Some(a) => a,
            None => {
                let known = self.scope.contains(&name) || self.ctx.contains(&name);
                return Err(if known {
                    TermError::NotASymbol(name)
                } else {
                    TermError::UnknownIdentifier(name)
                });
            }
        };
        self.expect(Tok::LParen)?;
        let mut args = vec![self.term()?];
        while self.peek() == Some(&Tok::Comma) {
            self.pos += 1;
            args.push(self.term()?);
        }
        self.expect(Tok::RParen)?;
        if args.len() != arity {
            return Err(TermError::Arity {
                symbol: name,
                expected: arity,
                got: args.len(),
            });
        }
        Ok(Term::Op(name, args))
    }

    fn resolve_bare(&mut self, name: String) -> Result<Term, TermError> {
        if let Some(i) = self.scope.iter().rev().position(|n| *n == name) {
            return Ok(Term::Bound(i as u32));
        }
        if self.ctx.contains(&name) {
            return Ok(Term::Free(name));
        }
        match self.sig.arity(&name) {
            Some(0) => Ok(Term::Op(name, Vec::new())),
            Some(arity) => Err(TermError::UnappliedSymbol {
                symbol: name,
                arity,
            }),
            None => Err(TermError::UnknownIdentifier(name)),
        }
    }
}

/// Prints a term over `ctx`. Binder names come from display hints when
/// that is unambiguous, otherwise from the sequence `x0, x1, ...`,
/// always skipping context names and enclosing binder names.
pub fn print_term(t: &Term, ctx: &Context) -> String {
    print_term_reserved(t, ctx, &BTreeSet::new())
}

/// Like [`print_term`] but additionally avoids the `reserved` names when
/// choosing binder names (callers printing alongside a signature or a
/// nonterminal list pass those names here so output re-parses).
pub fn print_term_reserved(t: &Term, ctx: &Context, reserved: &BTreeSet<String>) -> String {
    let mut pr = Printer {
        ctx,
        reserved,
        scope: Vec::new(),
        counter: 0,
        out: String::new(),
    };
    pr.term(t);
    pr.out
}

struct Printer<'a> {
    ctx: &'a Context,
    reserved: &'a BTreeSet<String>,
    scope: Vec<String>,
    counter: usize,
    out: String,
}

impl<'a> Printer<'a> {
    fn taken(&self, name: &str) -> bool {
        self.ctx.contains(name)
            || self.reserved.contains(name)
            || self.scope.iter().any(|n| n == name)
    }

    fn pick_binder(&mut self, hint: &Option<String>) -> String {
        if let Some(h) = hint {
            if lex::is_ident(h) && !self.taken(h) {
                return h.clone();
            }
        }
        loop {
            let cand = format!("x{}", self.counter);
            self.counter += 1;
            if !self.taken(&cand) {
                return cand;
            }
        }
    }

    fn term(&mut self, t: &Term) {
        match t {
            Term::Abs(body, hint) => {
                let name = self.pick_binder(hint);
                self.out.push('\\');
                self.out.push_str(&name);
                self.out.push_str(". ");
                self.scope.push(name);
                self.term(body);
                self.scope.pop();
            }
            Term::App(l, r) => {
                self.operand(l, true);
                self.out.push_str(" @ ");
                self.operand(r, false);
            }
            Term::Free(x) => self.out.push_str(x),
            Term::Bound(i) => {
                let i = *i as usize;
                if i < self.scope.len() {
                    let name = self.scope[self.scope.len() - 1 - i].clone();
                    self.out.push_str(&name);
                } else {
                    // Reference into an ambient binder outside this term;
                    // only flat-system rule bodies print these.
                    self.out.push('^');
                    self.out.push_str(&i.to_string());
                }
            }
            Term::Op(s, args) => {
                self.out.push_str(s);
                if !args.is_empty() {
                    self.out.push('(');
                    for (k, a) in args.iter().enumerate() {
                        if k > 0 {
                            self.out.push_str(", ");
                        }
                        self.term(a);
                    }
                    self.out.push(')');
                }
            }
            Term::Bottom => self.out.push_str("_|_"),
        }
    }

    fn operand(&mut self, t: &Term, left: bool) {
        let parens = match t {
            Term::Abs(..) => true,
            Term::App(..) => !left,
            _ => false,
        };
        if parens {
            self.out.push('(');
            self.term(t);
            self.out.push(')');
        } else {
            self.term(t);
        }
    }
}
