//! Higher-order recursion schemes: systems of equations `p = t` whose
//! right-hand sides are finite terms mentioning the nonterminals as extra
//! nullary leaves.
//!
//! A guarded scheme (no rule is a bare nonterminal) has a unique solution
//! assigning a rational term graph to every nonterminal. Solving goes
//! through flattening: each composite subterm of a rule gets its own fresh
//! nonterminal, leaving only single-constructor rules, which map directly
//! onto a [`FlatSystem`](crate::graph::FlatSystem).
//!
//! Nonterminal names beginning with an underscore are auxiliary: the
//! flattener and the solution printer generate such names (`_t0`, `_g0_1`),
//! and the file-level entry points solve them as part of the system
//! without reporting them as roots. This keeps printed solutions and
//! flattened schemes re-parseable and re-solvable.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::graph::{
    self, graph_from_term, solve_flat_system_roots, substitute_graph, validate_graph, FlatRule,
    FlatSystem, GraphError, NodeId, NodeLabel, TermGraph,
};
use crate::lex::{self, is_ident, Tok, Token};
use crate::term::{parse_term_tokens, Context, Signature, Term, TermError};

#[derive(Debug, Error)]
pub enum SchemeError {
    #[error(transparent)]
    Term(#[from] TermError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("unguarded: the rule for `{0}` is a bare nonterminal")]
    Unguarded(String),
    #[error("`{0}` is both a nonterminal and a signature symbol")]
    NameClash(String),
    #[error("duplicate rule for `{0}`")]
    DuplicateRule(String),
    #[error("line {line}: {block} block must come before {before}")]
    MisplacedBlock {
        line: usize,
        block: &'static str,
        before: &'static str,
    },
    #[error("line {line}: expected {expected}, found {found}")]
    BlockSyntax {
        line: usize,
        expected: &'static str,
        found: String,
    },
    #[error("no nonterminal named `{0}`")]
    UnknownNonterminal(String),
    #[error("missing candidate for nonterminal `{0}`")]
    MissingCandidate(String),
}

/// A recursion scheme: signature, global context, and one rule per
/// nonterminal. Rule bodies are finite terms over the context extended by
/// the nonterminal names (each nonterminal occurs as a nullary leaf).
#[derive(Debug, Clone)]
pub struct RecursionScheme {
    sig: Signature,
    ctx: Context,
    nonterminals: Vec<String>,
    rules: BTreeMap<String, Term>,
}

impl RecursionScheme {
    /// Rule order fixes the nonterminal order. Names must be distinct,
    /// disjoint from the context and the signature; bodies may reference
    /// only nonterminals, context variables, and signature symbols.
    pub fn new(
        sig: Signature,
        ctx: Context,
        rules: Vec<(String, Term)>,
    ) -> Result<Self, SchemeError> {
        let nonterminals: Vec<String> = rules.iter().map(|(n, _)| n.clone()).collect();
        for n in &nonterminals {
            if sig.contains(n) {
                return Err(SchemeError::NameClash(n.clone()));
            }
        }
        // Also enforces valid, pairwise distinct names and disjointness
        // from the context.
        let ctx_ext = extend_context(&ctx, &nonterminals)?;
        for (_, body) in &rules {
            check_body(body, &sig, &ctx_ext)?;
        }
        Ok(Self {
            sig,
            ctx,
            nonterminals,
            rules: rules.into_iter().collect(),
        })
    }

    pub fn signature(&self) -> &Signature {
        &self.sig
    }

    pub fn context(&self) -> &Context {
        &self.ctx
    }

    pub fn nonterminals(&self) -> &[String] {
        &self.nonterminals
    }

    pub fn rule(&self, p: &str) -> Option<&Term> {
        self.rules.get(p)
    }

    /// Context over which rule bodies live: the global context followed by
    /// the nonterminal names.
    pub fn extended_context(&self) -> Context {
        extend_context(&self.ctx, &self.nonterminals).expect("checked at construction")
    }

    /// The non-auxiliary nonterminals (names not starting with `_`).
    pub fn roots(&self) -> Vec<String> {
        self.nonterminals
            .iter()
            .filter(|n| !n.starts_with('_'))
            .cloned()
            .collect()
    }
}

fn extend_context(ctx: &Context, nts: &[String]) -> Result<Context, TermError> {
    Context::new(ctx.names().iter().cloned().chain(nts.iter().cloned()))
}

/// Body validity without an index-depth check: rule bodies may carry
/// over-deep indices (written `^k`) that only become meaningful once the
/// solution graph is assembled, where soundness is checked for real.
fn check_body(t: &Term, sig: &Signature, ctx_ext: &Context) -> Result<(), TermError> {
    match t {
        Term::Free(x) => {
            if ctx_ext.contains(x) {
                Ok(())
            } else {
                Err(TermError::FreeVarNotInContext(x.clone()))
            }
        }
        Term::Bound(_) | Term::Bottom => Ok(()),
        Term::App(l, r) => {
            check_body(l, sig, ctx_ext)?;
            check_body(r, sig, ctx_ext)
        }
        Term::Abs(b, _) => check_body(b, sig, ctx_ext),
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
                check_body(a, sig, ctx_ext)?;
            }
            Ok(())
        }
    }
}

/// Parses the scheme file format: an optional `signature { name/arity; … }`
/// block, an optional `context { name; … }` block, then one `p = term`
/// line per nonterminal. Separators inside blocks may be `;` or `,`.
pub fn parse_scheme(text: &str) -> Result<RecursionScheme, SchemeError> {
    let toks = lex::tokenize(text).map_err(|(line, col, msg)| TermError::Syntax {
        line,
        col,
        msg,
    })?;
    let mut i = 0;
    let mut sig = Signature::empty();
    let mut ctx = Context::empty();
    let mut seen_sig = false;
    let mut seen_ctx = false;
    // (name, body tokens, line) per rule, in file order.
    let mut raw_rules: Vec<(String, Vec<Token>, usize)> = Vec::new();

    while i < toks.len() {
        if toks[i].kind == Tok::Newline {
            i += 1;
            continue;
        }
        let line = toks[i].line;
        let is_block = |name: &str, at: usize| {
            matches!(&toks[at].kind, Tok::Ident(id) if id == name)
                && matches!(toks.get(at + 1).map(|t| &t.kind), Some(Tok::LBrace))
        };
        if is_block("signature", i) {
            if seen_sig || seen_ctx || !raw_rules.is_empty() {
                return Err(SchemeError::MisplacedBlock {
                    line,
                    block: "signature",
                    before: "the context block and all rules",
                });
            }
            let (entries, next) = block_entries(&toks, i + 2)?;
            let mut pairs = Vec::new();
            for entry in entries {
                pairs.push(signature_entry(&entry)?);
            }
            sig = Signature::new(pairs)?;
            seen_sig = true;
            i = next;
        } else if is_block("context", i) {
            if seen_ctx || !raw_rules.is_empty() {
                return Err(SchemeError::MisplacedBlock {
                    line,
                    block: "context",
                    before: "all rules",
                });
            }
            let (entries, next) = block_entries(&toks, i + 2)?;
            let mut names = Vec::new();
            for entry in entries {
                names.push(context_entry(&entry)?);
            }
            ctx = Context::new(names)?;
            seen_ctx = true;
            i = next;
        } else {
            let name = match &toks[i].kind {
                Tok::Ident(id) => id.clone(),
                other => {
                    return Err(SchemeError::BlockSyntax {
                        line,
                        expected: "a rule `name = term`",
                        found: other.to_string(),
                    })
                }
            };
            if !matches!(toks.get(i + 1).map(|t| &t.kind), Some(Tok::Eq)) {
                return Err(SchemeError::BlockSyntax {
                    line,
                    expected: "`=` after the rule name",
                    found: toks
                        .get(i + 1)
                        .map_or("end of input".to_string(), |t| t.kind.to_string()),
                });
            }
            let mut j = i + 2;
            while j < toks.len() && toks[j].kind != Tok::Newline {
                j += 1;
            }
            raw_rules.push((name, toks[i + 2..j].to_vec(), line));
            i = j;
        }
    }

    let mut seen = BTreeSet::new();
    for (name, _, _) in &raw_rules {
        if !seen.insert(name.clone()) {
            return Err(SchemeError::DuplicateRule(name.clone()));
        }
    }
    let nts: Vec<String> = raw_rules.iter().map(|(n, _, _)| n.clone()).collect();
    for n in &nts {
        if sig.contains(n) {
            return Err(SchemeError::NameClash(n.clone()));
        }
    }
    let ctx_ext = extend_context(&ctx, &nts)?;
    let mut rules = Vec::new();
    for (name, body_toks, line) in raw_rules {
        if body_toks.is_empty() {
            return Err(SchemeError::BlockSyntax {
                line,
                expected: "a term after `=`",
                found: "end of line".to_string(),
            });
        }
        let body = parse_term_tokens(&body_toks, &sig, &ctx_ext, true)?;
        rules.push((name, body));
    }
    RecursionScheme::new(sig, ctx, rules)
}

/// Splits a `{ … }` block into entries at `;` or `,`, skipping newlines.
/// Returns the entries and the index just past the closing brace.
fn block_entries(toks: &[Token], mut i: usize) -> Result<(Vec<Vec<Token>>, usize), SchemeError> {
    let mut entries = Vec::new();
    let mut current: Vec<Token> = Vec::new();
    while i < toks.len() {
        match &toks[i].kind {
            Tok::RBrace => {
                if !current.is_empty() {
                    entries.push(current);
                }
                return Ok((entries, i + 1));
            }
            Tok::Semi | Tok::Comma => {
                if !current.is_empty() {
                    entries.push(std::mem::take(&mut current));
                }
                i += 1;
            }
            Tok::Newline => i += 1,
            _ => {
                current.push(toks[i].clone());
                i += 1;
            }
        }
    }
    let line = toks.last().map_or(1, |t| t.line);
    Err(SchemeError::BlockSyntax {
        line,
        expected: "`}` closing the block",
        found: "end of input".to_string(),
    })
}

fn signature_entry(entry: &[Token]) -> Result<(String, usize), SchemeError> {
    match entry {
        [a, b, c] => {
            if let (Tok::Ident(name), Tok::Slash, Tok::Nat(n)) = (&a.kind, &b.kind, &c.kind) {
                return Ok((name.clone(), *n));
            }
            Err(bad_entry(a.line, "`name/arity`", entry))
        }
        _ => Err(bad_entry(
            entry.first().map_or(1, |t| t.line),
            "`name/arity`",
            entry,
        )),
    }
}

fn context_entry(entry: &[Token]) -> Result<String, SchemeError> {
    match entry {
        [a] => {
            if let Tok::Ident(name) = &a.kind {
                return Ok(name.clone());
            }
            Err(bad_entry(a.line, "a variable name", entry))
        }
        _ => Err(bad_entry(
            entry.first().map_or(1, |t| t.line),
            "a variable name",
            entry,
        )),
    }
}

fn bad_entry(line: usize, expected: &'static str, entry: &[Token]) -> SchemeError {
    let found = entry
        .iter()
        .map(|t| t.kind.to_string())
        .collect::<Vec<_>>()
        .join(" ");
    SchemeError::BlockSyntax {
        line,
        expected,
        found,
    }
}

/// Guardedness: no rule body may be a bare nonterminal leaf. Returns the
/// first offending nonterminal in declaration order, or `None`.
pub fn check_guarded(s: &RecursionScheme) -> Option<&str> {
    s.nonterminals.iter().find_map(|p| match &s.rules[p] {
        Term::Free(x) if s.rules.contains_key(x) => Some(p.as_str()),
        _ => None,
    })
}

/// One simultaneous rewriting step for bare-alias rules: a rule `p = q`
/// (with `q` a nonterminal) is replaced by `q`'s current body. Longer
/// alias chains stay unguarded and are rejected later, by design.
pub fn inline_bare_aliases(s: &RecursionScheme) -> RecursionScheme {
    let rules: Vec<(String, Term)> = s
        .nonterminals
        .iter()
        .map(|p| {
            let body = match &s.rules[p] {
                Term::Free(x) if s.rules.contains_key(x) => s.rules[x].clone(),
                other => other.clone(),
            };
            (p.clone(), body)
        })
        .collect();
    RecursionScheme::new(s.sig.clone(), s.ctx.clone(), rules)
        .expect("inlining preserves well-formedness")
}

/// Flat rule bodies: one constructor applied to nonterminal names, or an
/// atom. `BoundVar` is an index into the binders that enclose the rule's
/// use sites (written `^k` in files).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FlatBody {
    App(String, String),
    Abs(String, Option<String>),
    Op(String, Vec<String>),
    CtxVar(String),
    BoundVar(u32),
    Bottom,
}

/// Result of flattening: the original header plus rules in flat shape.
/// Fresh nonterminals are named `_t<N>`, skipping taken names.
#[derive(Debug, Clone)]
pub struct FlatScheme {
    sig: Signature,
    ctx: Context,
    original: Vec<String>,
    rules: Vec<(String, FlatBody)>,
}

impl FlatScheme {
    pub fn signature(&self) -> &Signature {
        &self.sig
    }

    pub fn context(&self) -> &Context {
        &self.ctx
    }

    /// Nonterminals of the scheme this was flattened from.
    pub fn original_nonterminals(&self) -> &[String] {
        &self.original
    }

    pub fn rules(&self) -> &[(String, FlatBody)] {
        &self.rules
    }

    pub fn fresh_count(&self) -> usize {
        self.rules.len() - self.original.len()
    }

    /// The equation system the flat rules denote: constructor rules map
    /// one-to-one, atoms become single-node constant graphs.
    pub fn to_flat_system(&self) -> Result<FlatSystem, GraphError> {
        let single = |label: NodeLabel| {
            TermGraph::new(vec![label], NodeId(0), self.ctx.clone())
        };
        let mut rules = Vec::new();
        for (name, body) in &self.rules {
            let rule = match body {
                FlatBody::App(a, b) => FlatRule::App(a.clone(), b.clone()),
                FlatBody::Abs(b, h) => FlatRule::Abs(b.clone(), h.clone()),
                FlatBody::Op(s, args) => FlatRule::Op(s.clone(), args.clone()),
                FlatBody::CtxVar(x) => FlatRule::Const(single(NodeLabel::Free(x.clone()))?),
                FlatBody::BoundVar(i) => FlatRule::Const(single(NodeLabel::Bound(*i))?),
                FlatBody::Bottom => FlatRule::Const(single(NodeLabel::Bottom)?),
            };
            rules.push((name.clone(), rule));
        }
        FlatSystem::new(self.ctx.clone(), rules)
    }

    /// Renders the flat scheme in the scheme file format, which re-parses
    /// to an equivalent scheme (binder references print as `^k`).
    pub fn to_scheme_text(&self) -> String {
        let mut out = String::new();
        push_header(&mut out, &self.sig, &self.ctx);
        let taken: BTreeSet<String> = self
            .rules
            .iter()
            .map(|(n, _)| n.clone())
            .chain(self.ctx.names().iter().cloned())
            .collect();
        for (name, body) in &self.rules {
            let rhs = match body {
                FlatBody::App(a, b) => format!("{a} @ {b}"),
                FlatBody::Abs(b, h) => {
                    format!("\\{}. {b}", binder_name(h.as_deref(), &taken))
                }
                FlatBody::Op(s, args) if args.is_empty() => s.clone(),
                FlatBody::Op(s, args) => format!("{s}({})", args.join(", ")),
                FlatBody::CtxVar(x) => x.clone(),
                FlatBody::BoundVar(i) => format!("^{i}"),
                FlatBody::Bottom => "_|_".to_string(),
            };
            out.push_str(&format!("{name} = {rhs}\n"));
        }
        out
    }
}

fn push_header(out: &mut String, sig: &Signature, ctx: &Context) {
    if !sig.is_empty() {
        let entries: Vec<String> = sig.iter().map(|(n, a)| format!("{n}/{a}")).collect();
        out.push_str(&format!("signature {{ {} }}\n", entries.join("; ")));
    }
    if !ctx.is_empty() {
        out.push_str(&format!("context {{ {} }}\n", ctx.names().join("; ")));
    }
}

/// A display name for a binder that no atom in the output could collide
/// with; rule bodies never mention binders by name, so this is cosmetic.
fn binder_name(hint: Option<&str>, taken: &BTreeSet<String>) -> String {
    if let Some(h) = hint {
        if is_ident(h) && !taken.contains(h) {
            return h.to_string();
        }
    }
    let mut n = 0usize;
    loop {
        let cand = format!("x{n}");
        if !taken.contains(&cand) {
            return cand;
        }
        n += 1;
    }
}

/// Flattens a guarded scheme: each composite subterm of a rule body gets a
/// fresh nonterminal (preorder, left to right), bare nonterminal operands
/// are referenced directly, and atoms become atom rules. An already-flat
/// scheme comes back with zero fresh nonterminals.
pub fn flatten(s: &RecursionScheme) -> Result<FlatScheme, SchemeError> {
    if let Some(p) = check_guarded(s) {
        return Err(SchemeError::Unguarded(p.to_string()));
    }
    let mut taken: BTreeSet<String> = s.nonterminals.iter().cloned().collect();
    let mut counter = 0usize;
    let mut rules: Vec<(String, Option<FlatBody>)> = Vec::new();

    fn dispatch(
        t: &Term,
        s: &RecursionScheme,
        rules: &mut Vec<(String, Option<FlatBody>)>,
        taken: &mut BTreeSet<String>,
        counter: &mut usize,
    ) -> FlatBody {
        match t {
            Term::Free(x) if s.rules.contains_key(x) => {
                unreachable!("bare nonterminal bodies are rejected by the guard check")
            }
            Term::Free(x) => FlatBody::CtxVar(x.clone()),
            Term::Bound(i) => FlatBody::BoundVar(*i),
            Term::Bottom => FlatBody::Bottom,
            Term::App(l, r) => {
                let a = operand(l, s, rules, taken, counter);
                let b = operand(r, s, rules, taken, counter);
                FlatBody::App(a, b)
            }
            Term::Abs(b, h) => {
                let body = operand(b, s, rules, taken, counter);
                FlatBody::Abs(body, h.clone())
            }
            Term::Op(sym, args) => {
                let parts = args
                    .iter()
                    .map(|a| operand(a, s, rules, taken, counter))
                    .collect();
                FlatBody::Op(sym.clone(), parts)
            }
        }
    }

    // An operand that is already a nonterminal is referenced in place;
    // anything else gets a fresh rule of its own.
    fn operand(
        t: &Term,
        s: &RecursionScheme,
        rules: &mut Vec<(String, Option<FlatBody>)>,
        taken: &mut BTreeSet<String>,
        counter: &mut usize,
    ) -> String {
        if let Term::Free(x) = t {
            if s.rules.contains_key(x) {
                return x.clone();
            }
        }
        let name = loop {
            let cand = format!("_t{counter}");
            *counter += 1;
            if taken.insert(cand.clone()) {
                break cand;
            }
        };
        let idx = rules.len();
        rules.push((name.clone(), None));
        let body = dispatch(t, s, rules, taken, counter);
        rules[idx].1 = Some(body);
        name
    }

    for p in &s.nonterminals {
        let idx = rules.len();
        rules.push((p.clone(), None));
        let body = dispatch(&s.rules[p], s, &mut rules, &mut taken, &mut counter);
        rules[idx].1 = Some(body);
    }
    Ok(FlatScheme {
        sig: s.sig.clone(),
        ctx: s.ctx.clone(),
        original: s.nonterminals.clone(),
        rules: rules
            .into_iter()
            .map(|(n, b)| (n, b.expect("every allocated rule is filled")))
            .collect(),
    })
}

/// Unique solution of a guarded scheme, for the given nonterminals only.
/// Other nonterminals participate in the equations but need not stand on
/// their own (their graphs may reference binders of enclosing rules).
pub fn solve_roots(
    s: &RecursionScheme,
    roots: &[String],
) -> Result<BTreeMap<String, TermGraph>, SchemeError> {
    for r in roots {
        if !s.rules.contains_key(r) {
            return Err(SchemeError::UnknownNonterminal(r.clone()));
        }
    }
    if let Some(p) = check_guarded(s) {
        return Err(SchemeError::Unguarded(p.to_string()));
    }
    let flat = flatten(s)?;
    let system = flat.to_flat_system()?;
    let sol = solve_flat_system_roots(&system, roots)?;
    for g in sol.values() {
        validate_graph(g, &s.sig)?;
    }
    Ok(sol)
}

/// Unique solution for the scheme's root nonterminals (auxiliary
/// underscore-prefixed names are solved but not returned).
pub fn solve(s: &RecursionScheme) -> Result<BTreeMap<String, TermGraph>, SchemeError> {
    solve_roots(s, &s.roots())
}

/// Checks a candidate solution: for each rule `p = f`, the graph of `f`
/// with every nonterminal leaf replaced by its candidate graph (shared,
/// by graph substitution) must be bisimilar to the candidate for `p`.
pub fn verify_solution(
    s: &RecursionScheme,
    cand: &BTreeMap<String, TermGraph>,
) -> Result<bool, SchemeError> {
    Ok(first_failing_rule(s, cand)?.is_none())
}

/// Like [`verify_solution`], but names the first rule (in declaration
/// order) whose equation does not hold.
pub fn first_failing_rule(
    s: &RecursionScheme,
    cand: &BTreeMap<String, TermGraph>,
) -> Result<Option<String>, SchemeError> {
    let ctx_ext = s.extended_context();
    let mut map: BTreeMap<String, TermGraph> = BTreeMap::new();
    for x in s.ctx.names() {
        map.insert(x.clone(), TermGraph::free_var(&s.ctx, x)?);
    }
    for p in &s.nonterminals {
        let g = cand
            .get(p)
            .ok_or_else(|| SchemeError::MissingCandidate(p.clone()))?;
        map.insert(p.clone(), g.clone());
    }
    for p in &s.nonterminals {
        let body = graph_from_term(&s.rules[p], &ctx_ext);
        let applied = substitute_graph(&body, &s.ctx, &map)?;
        if !graph::bisim_eq(&applied, &cand[p])? {
            return Ok(Some(p.clone()));
        }
    }
    Ok(None)
}

/// Renames the global context of a scheme along a total map; nonterminal
/// leaves are untouched.
pub fn rename_scheme(
    s: &RecursionScheme,
    to: &Context,
    map: &BTreeMap<String, String>,
) -> Result<RecursionScheme, SchemeError> {
    let from_ext = s.extended_context();
    let to_ext = extend_context(to, &s.nonterminals)?;
    let mut full: BTreeMap<String, String> = map.clone();
    for p in &s.nonterminals {
        full.insert(p.clone(), p.clone());
    }
    let mut rules = Vec::new();
    for p in &s.nonterminals {
        let body = crate::term::rename(&s.rules[p], &from_ext, &to_ext, &full)?;
        rules.push((p.clone(), body));
    }
    RecursionScheme::new(s.sig.clone(), to.clone(), rules)
}

/// Renders a solution map as a scheme file: per graph, the root node's
/// rule carries the nonterminal's name and every other node gets an
/// auxiliary `_g<i>_<j>` rule, so the text re-parses and re-solves to
/// bisimilar graphs.
pub fn print_solution(
    sig: &Signature,
    ctx: &Context,
    parts: &[(String, &TermGraph)],
) -> String {
    let mut out = String::new();
    push_header(&mut out, sig, ctx);
    let mut taken: BTreeSet<String> = ctx.names().iter().cloned().collect();
    for (i, (name, g)) in parts.iter().enumerate() {
        taken.insert(name.clone());
        for j in 1..g.node_count() {
            taken.insert(format!("_g{i}_{j}"));
        }
    }
    for (i, (name, g)) in parts.iter().enumerate() {
        let node_name = |id: NodeId| {
            if id == g.root() {
                name.clone()
            } else {
                format!("_g{i}_{}", id.0)
            }
        };
        for (j, label) in g.nodes().iter().enumerate() {
            let lhs = node_name(NodeId(j as u32));
            let rhs = match label {
                NodeLabel::App(a, b) => format!("{} @ {}", node_name(*a), node_name(*b)),
                NodeLabel::Abs(b, h) => {
                    format!("\\{}. {}", binder_name(h.as_deref(), &taken), node_name(*b))
                }
                NodeLabel::Op(s, args) if args.is_empty() => s.clone(),
                NodeLabel::Op(s, args) => {
                    let parts: Vec<String> = args.iter().map(|a| node_name(*a)).collect();
                    format!("{s}({})", parts.join(", "))
                }
                NodeLabel::Free(x) => x.clone(),
                NodeLabel::Bound(k) => format!("^{k}"),
                NodeLabel::Bottom => "_|_".to_string(),
            };
            out.push_str(&format!("{lhs} = {rhs}\n"));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{abs_graph, app_graph, bisim_eq, subtree_count, unfold};
    use crate::term::parse_term;

    const Y_TEXT: &str = "Y = \\f. f @ (Y @ f)\n";
    const EQ_TEXT: &str = "context { y }\np1 = p1 @ (\\x. p2)\np2 = y @ p1\n";

    fn y_scheme() -> RecursionScheme {
        parse_scheme(Y_TEXT).unwrap()
    }

    fn eq_scheme() -> RecursionScheme {
        parse_scheme(EQ_TEXT).unwrap()
    }

    #[test]
    fn parses_the_fixpoint_scheme() {
        let s = y_scheme();
        assert_eq!(s.nonterminals(), ["Y".to_string()]);
        assert!(s.context().is_empty());
        let expected = parse_term(
            "\\f. f @ (Y @ f)",
            &Signature::empty(),
            &Context::new(["Y"]).unwrap(),
        )
        .unwrap();
        assert_eq!(s.rule("Y"), Some(&expected));
    }

    #[test]
    fn parses_headers_and_rule_order() {
        let s = parse_scheme("signature { s/2; o/1 }\ncontext { y; z }\np = s(y, o(z))\n")
            .unwrap();
        assert_eq!(s.signature().arity("s"), Some(2));
        assert_eq!(s.context().names(), &["y".to_string(), "z".to_string()]);
        let two = eq_scheme();
        assert_eq!(two.nonterminals(), ["p1".to_string(), "p2".to_string()]);
    }

    #[test]
    fn comma_and_semicolon_both_separate_block_entries() {
        let a = parse_scheme("signature { s/2, o/1 }\np = o(s(p, p))\n").unwrap();
        let b = parse_scheme("signature { s/2; o/1 }\np = o(s(p, p))\n").unwrap();
        assert_eq!(a.signature().arity("o"), b.signature().arity("o"));
    }

    #[test]
    fn undeclared_reference_is_an_error() {
        let err = parse_scheme("p = q @ p\n").unwrap_err();
        assert!(matches!(
            err,
            SchemeError::Term(TermError::UnknownIdentifier(ref q)) if q == "q"
        ));
    }

    #[test]
    fn duplicate_rules_and_clashes_are_rejected() {
        assert!(matches!(
            parse_scheme("p = \\x. p\np = \\x. x\n"),
            Err(SchemeError::DuplicateRule(_))
        ));
        assert!(matches!(
            parse_scheme("signature { p/1 }\np = \\x. x\n"),
            Err(SchemeError::NameClash(_))
        ));
        assert!(matches!(
            parse_scheme("context { p }\np = \\x. x\n"),
            Err(SchemeError::Term(TermError::DuplicateName(_)))
        ));
    }

    #[test]
    fn blocks_must_precede_rules() {
        assert!(matches!(
            parse_scheme("p = \\x. x\ncontext { y }\n"),
            Err(SchemeError::MisplacedBlock { .. })
        ));
        assert!(matches!(
            parse_scheme("context { y }\nsignature { s/1 }\np = y\n"),
            Err(SchemeError::MisplacedBlock { .. })
        ));
    }

    #[test]
    fn guardedness_is_the_bare_nonterminal_check() {
        assert_eq!(check_guarded(&y_scheme()), None);
        let s = parse_scheme("p = p\n").unwrap();
        assert_eq!(check_guarded(&s), Some("p"));
        // A bare alias is rejected at the alias, even though inlining
        // could guard it.
        let alias = parse_scheme("p = q\nq = \\x. p\n").unwrap();
        assert_eq!(check_guarded(&alias), Some("p"));
        // Context variables are not nonterminals: p = y is guarded.
        let cv = parse_scheme("context { y }\np = y\n").unwrap();
        assert_eq!(check_guarded(&cv), None);
    }

    #[test]
    fn inlining_rewrites_one_alias_level() {
        let alias = parse_scheme("p = q\nq = \\x. p\n").unwrap();
        let inlined = inline_bare_aliases(&alias);
        assert_eq!(check_guarded(&inlined), None);
        let chain = parse_scheme("p = q\nq = r\nr = \\x. r\n").unwrap();
        let once = inline_bare_aliases(&chain);
        assert_eq!(check_guarded(&once), Some("p"));
        let cyclic = parse_scheme("p = q\nq = p\n").unwrap();
        assert_eq!(check_guarded(&inline_bare_aliases(&cyclic)), Some("p"));
    }

    #[test]
    fn flattening_the_two_equation_system() {
        let flat = flatten(&eq_scheme()).unwrap();
        assert_eq!(flat.fresh_count(), 2);
        let expected = [
            ("p1", FlatBody::App("p1".into(), "_t0".into())),
            ("_t0", FlatBody::Abs("p2".into(), Some("x".into()))),
            ("p2", FlatBody::App("_t1".into(), "p1".into())),
            ("_t1", FlatBody::CtxVar("y".into())),
        ];
        assert_eq!(flat.rules().len(), expected.len());
        for ((name, body), (en, eb)) in flat.rules().iter().zip(expected) {
            assert_eq!(name, en);
            assert_eq!(body, &eb);
        }
    }

    #[test]
    fn flattening_the_fixpoint_scheme() {
        let flat = flatten(&y_scheme()).unwrap();
        let shapes: Vec<&FlatBody> = flat.rules().iter().map(|(_, b)| b).collect();
        assert_eq!(
            shapes,
            [
                &FlatBody::Abs("_t0".into(), Some("f".into())),
                &FlatBody::App("_t1".into(), "_t2".into()),
                &FlatBody::BoundVar(0),
                &FlatBody::App("Y".into(), "_t3".into()),
                &FlatBody::BoundVar(0),
            ]
        );
    }

    #[test]
    fn already_flat_schemes_gain_no_fresh_nonterminals() {
        let s = parse_scheme("context { y }\na = a @ b\nb = \\x. a\nc = y\n").unwrap();
        let flat = flatten(&s).unwrap();
        assert_eq!(flat.fresh_count(), 0);
    }

    #[test]
    fn fresh_names_skip_taken_ones() {
        let s = parse_scheme("_t0 = \\x. _t0 @ _t0\np = p @ (\\x. _t0)\n").unwrap();
        let flat = flatten(&s).unwrap();
        let names: Vec<&str> = flat.rules().iter().map(|(n, _)| n.as_str()).collect();
        assert!(names.contains(&"_t1"), "{names:?}");
        let uniq: BTreeSet<&str> = names.iter().copied().collect();
        assert_eq!(uniq.len(), names.len());
    }

    #[test]
    fn solves_the_fixpoint_scheme() {
        let sol = solve(&y_scheme()).unwrap();
        let g = &sol["Y"];
        assert!(bisim_eq(g, &crate::graph::tests::y_graph()).unwrap());
        assert_eq!(subtree_count(g), 4);
        let cut = parse_term(
            "\\f. f @ ((\\f. _|_) @ f)",
            &Signature::empty(),
            &Context::empty(),
        )
        .unwrap();
        assert_eq!(unfold(g, 4), cut);
    }

    #[test]
    fn solves_the_two_equation_system() {
        let sol = solve(&eq_scheme()).unwrap();
        let ctx = Context::new(["y"]).unwrap();
        let y = TermGraph::free_var(&ctx, "y").unwrap();
        // p2 = y @ p1 and p1 = p1 @ (\x. p2), both up to bisimilarity.
        let p2 = app_graph(&y, &sol["p1"]).unwrap();
        assert!(bisim_eq(&p2, &sol["p2"]).unwrap());
        let p1 = app_graph(&sol["p1"], &abs_graph(&sol["p2"], Some("x"))).unwrap();
        assert!(bisim_eq(&p1, &sol["p1"]).unwrap());
    }

    #[test]
    fn solves_a_non_recursive_scheme_to_an_acyclic_graph() {
        let s = parse_scheme("signature { s/1 }\ncontext { y }\np = s(y)\n").unwrap();
        let sol = solve(&s).unwrap();
        assert_eq!(sol["p"].node_count(), 2);
        let expected = parse_term(
            "s(y)",
            s.signature(),
            s.context(),
        )
        .unwrap();
        assert_eq!(unfold(&sol["p"], 4), expected);
    }

    #[test]
    fn solve_rejects_unguarded_schemes() {
        let s = parse_scheme("p = p\n").unwrap();
        assert!(matches!(solve(&s), Err(SchemeError::Unguarded(p)) if p == "p"));
    }

    #[test]
    fn caret_atoms_denote_enclosing_binders() {
        let a = parse_scheme("p = \\x. ^0\n").unwrap();
        let b = parse_scheme("p = \\x. x\n").unwrap();
        let (ga, gb) = (solve(&a).unwrap(), solve(&b).unwrap());
        assert!(bisim_eq(&ga["p"], &gb["p"]).unwrap());
    }

    #[test]
    fn underscore_nonterminals_are_not_roots() {
        let s = parse_scheme("p = \\x. _h\n_h = p @ ^0\n").unwrap();
        assert_eq!(s.roots(), ["p".to_string()]);
        let sol = solve(&s).unwrap();
        assert_eq!(sol.len(), 1);
        assert!(sol.contains_key("p"));
        // _h references p's binder, so it has no standalone graph.
        assert!(matches!(
            solve_roots(&s, &["_h".to_string()]),
            Err(SchemeError::Graph(GraphError::UnsoundIndex { .. }))
        ));
    }

    #[test]
    fn verifies_its_own_solutions() {
        for s in [y_scheme(), eq_scheme()] {
            let sol = solve(&s).unwrap();
            assert!(verify_solution(&s, &sol).unwrap());
        }
    }

    #[test]
    fn rejects_perturbed_solutions() {
        let s = y_scheme();
        let sol = solve(&s).unwrap();
        let g = &sol["Y"];
        // Swap the children of the outer App.
        let mut nodes = g.nodes().to_vec();
        for label in &mut nodes {
            if let NodeLabel::App(a, b) = label {
                std::mem::swap(a, b);
                break;
            }
        }
        let swapped = TermGraph::new(nodes, g.root(), g.context().clone()).unwrap();
        let cand = BTreeMap::from([("Y".to_string(), swapped)]);
        assert!(!verify_solution(&s, &cand).unwrap());
        // A missing entry is an error, not a failure.
        assert!(matches!(
            verify_solution(&s, &BTreeMap::new()),
            Err(SchemeError::MissingCandidate(_))
        ));
    }

    #[test]
    fn solving_commutes_with_context_renaming() {
        let s = eq_scheme();
        let to = Context::new(["w"]).unwrap();
        let map = BTreeMap::from([("y".to_string(), "w".to_string())]);
        let renamed = rename_scheme(&s, &to, &map).unwrap();
        let a = solve(&renamed).unwrap();
        let b = solve(&s).unwrap();
        for p in ["p1", "p2"] {
            let moved = crate::graph::rename_graph(&b[p], &to, &map).unwrap();
            assert!(bisim_eq(&a[p], &moved).unwrap(), "{p}");
        }
    }

    #[test]
    fn flattened_text_reparses_and_resolves() {
        for (text, roots) in [(Y_TEXT, vec!["Y"]), (EQ_TEXT, vec!["p1", "p2"])] {
            let s = parse_scheme(text).unwrap();
            let flat_text = flatten(&s).unwrap().to_scheme_text();
            let reparsed = parse_scheme(&flat_text).unwrap();
            let roots: Vec<String> = roots.into_iter().map(str::to_string).collect();
            assert_eq!(reparsed.roots(), roots);
            let a = solve(&reparsed).unwrap();
            let b = solve(&s).unwrap();
            for p in &roots {
                assert!(bisim_eq(&a[p], &b[p]).unwrap(), "{p}");
            }
        }
    }

    #[test]
    fn printed_solutions_reparse_to_bisimilar_graphs() {
        let s = eq_scheme();
        let sol = solve(&s).unwrap();
        let parts: Vec<(String, &TermGraph)> = s
            .roots()
            .into_iter()
            .map(|p| {
                let g = &sol[&p];
                (p, g)
            })
            .collect();
        let text = print_solution(s.signature(), s.context(), &parts);
        let reparsed = parse_scheme(&text).unwrap();
        let re = solve(&reparsed).unwrap();
        for p in ["p1", "p2"] {
            assert!(bisim_eq(&re[p], &sol[p]).unwrap(), "{p}\n{text}");
        }
    }

    #[test]
    fn printed_fixpoint_solution_text_is_stable() {
        let s = y_scheme();
        let sol = solve(&s).unwrap();
        let text = print_solution(s.signature(), s.context(), &[("Y".to_string(), &sol["Y"])]);
        assert_eq!(
            text,
            "Y = \\f. _g0_1\n_g0_1 = _g0_2 @ _g0_3\n_g0_2 = ^0\n_g0_3 = Y @ _g0_2\n"
        );
    }
}
