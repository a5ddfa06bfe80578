//! Finite CPO models of the calculus: a tower of function spaces over the
//! two-element chain, interpretation of finite terms as monotone tables,
//! and least interpreted solutions of recursion schemes by Kleene
//! iteration.
//!
//! The tower starts at the 2-chain and takes monotone self-map spaces:
//! D_{n+1} = [D_n -> D_n], related by embedding-projection pairs (j∘e =
//! id, e∘j ≤ id). The top level D plays the role of a reflexive domain at
//! finite rank: `fold : [D -> D] -> D` and `unfold : D -> [D -> D]`
//! satisfy fold∘unfold = id on D and unfold∘fold ≤ id on the function
//! space. That direction is forced by finiteness; it is the opposite of
//! the retraction a genuine reflexive domain would carry, and every check
//! in this module relies only on the laws that literally hold here.
//!
//! Elements are named `#0, #1, …` in enumeration order; `#0` is bottom at
//! every level.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::scheme::RecursionScheme;
use crate::term::{Context, Term};

#[derive(Debug, Error)]
pub enum CpoError {
    #[error("not a poset: {0}")]
    InvalidPoset(String),
    #[error("the tower needs at least one function-space level")]
    TowerHeight,
    #[error("table needs {needed} cells, over the budget of {budget}")]
    Budget { needed: u128, budget: usize },
    #[error("a table was expected to be monotone but is not ({0})")]
    NotMonotone(String),
    #[error("no table for symbol `{0}`")]
    MissingOp(String),
    #[error("ops file defines `{0}`, which is not in the signature")]
    UnknownOp(String),
    #[error("symbol `{symbol}` expects {expected} argument(s), got {got}")]
    OpArity {
        symbol: String,
        expected: usize,
        got: usize,
    },
    #[error("element #{index} is out of range (the domain has {size} elements)")]
    BadElement { index: usize, size: usize },
    #[error("table for `{symbol}` is missing row {row}")]
    NotTotal { symbol: String, row: String },
    #[error("table for `{symbol}` defines row {row} twice")]
    DuplicateRow { symbol: String, row: String },
    #[error("elements #{0} and #{1} have no least upper bound")]
    NoJoin(usize, usize),
    #[error("elements #{0} and #{1} have no greatest lower bound")]
    NoMeet(usize, usize),
    #[error("ops file line {line}: {msg}")]
    OpsSyntax { line: usize, msg: String },
    #[error("bottom is not interpretable here (enable the bottom-as-least reading)")]
    BottomDisabled,
    #[error("bound index {index} has no binder at interpretation depth {depth}")]
    OpenIndex { index: u32, depth: usize },
    #[error("free variable `{0}` is not in the context")]
    FreeVarNotInContext(String),
    #[error("context maps disagree on their contexts: {left} vs {right}")]
    ContextMismatch { left: Context, right: Context },
    #[error("no mapping for context variable `{0}`")]
    MissingMapping(String),
    #[error("missing candidate for nonterminal `{0}`")]
    MissingCandidate(String),
    #[error("internal invariant broken: {0}")]
    Internal(String),
}

/// A finite partial order with a least element, as a boolean table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FinitePoset {
    size: usize,
    leq: Vec<bool>,
    bottom: usize,
}

impl FinitePoset {
    /// Validates reflexivity, antisymmetry, transitivity, and the
    /// existence of a least element. `leq` is row-major: `leq[a*size+b]`
    /// means a ≤ b.
    pub fn new(size: usize, leq: Vec<bool>) -> Result<Self, CpoError> {
        if size == 0 || leq.len() != size * size {
            return Err(CpoError::InvalidPoset(format!(
                "table has {} entries for {} elements",
                leq.len(),
                size
            )));
        }
        let at = |a: usize, b: usize| leq[a * size + b];
        for a in 0..size {
            if !at(a, a) {
                return Err(CpoError::InvalidPoset(format!("#{a} is not below itself")));
            }
            for b in 0..size {
                if a != b && at(a, b) && at(b, a) {
                    return Err(CpoError::InvalidPoset(format!(
                        "#{a} and #{b} are below each other"
                    )));
                }
                for c in 0..size {
                    if at(a, b) && at(b, c) && !at(a, c) {
                        return Err(CpoError::InvalidPoset(format!(
                            "#{a} ≤ #{b} ≤ #{c} but not #{a} ≤ #{c}"
                        )));
                    }
                }
            }
        }
        let bottom = (0..size)
            .find(|&a| (0..size).all(|b| at(a, b)))
            .ok_or_else(|| CpoError::InvalidPoset("no least element".to_string()))?;
        Ok(Self { size, leq, bottom })
    }

    /// The n-element chain 0 ≤ 1 ≤ … ≤ n-1.
    pub fn chain(n: usize) -> Self {
        let mut leq = vec![false; n * n];
        for a in 0..n {
            for b in a..n {
                leq[a * n + b] = true;
            }
        }
        Self {
            size: n,
            leq,
            bottom: 0,
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn bottom(&self) -> usize {
        self.bottom
    }

    pub fn le(&self, a: usize, b: usize) -> bool {
        self.leq[a * self.size + b]
    }

    /// Least upper bound, if the pair has one.
    pub fn join(&self, a: usize, b: usize) -> Option<usize> {
        let ups: Vec<usize> = (0..self.size)
            .filter(|&u| self.le(a, u) && self.le(b, u))
            .collect();
        ups.iter()
            .copied()
            .find(|&u| ups.iter().all(|&v| self.le(u, v)))
    }

    /// Greatest lower bound, if the pair has one.
    pub fn meet(&self, a: usize, b: usize) -> Option<usize> {
        let downs: Vec<usize> = (0..self.size)
            .filter(|&d| self.le(d, a) && self.le(d, b))
            .collect();
        downs
            .iter()
            .copied()
            .find(|&d| downs.iter().all(|&v| self.le(v, d)))
    }

    /// Length of the longest strictly increasing chain, counted in steps.
    pub fn height(&self) -> usize {
        let mut memo = vec![usize::MAX; self.size];
        fn go(p: &FinitePoset, v: usize, memo: &mut Vec<usize>) -> usize {
            if memo[v] != usize::MAX {
                return memo[v];
            }
            memo[v] = 0;
            let mut best = 0;
            for w in 0..p.size {
                if w != v && p.le(v, w) {
                    best = best.max(1 + go(p, w, memo));
                }
            }
            memo[v] = best;
            best
        }
        (0..self.size)
            .map(|v| go(self, v, &mut memo))
            .max()
            .unwrap_or(0)
    }
}

/// A monotone map between two finite posets, as its value table in domain
/// index order. The posets themselves are supplied at the use site.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct MonotoneTable {
    values: Vec<usize>,
}

impl MonotoneTable {
    pub fn new(
        dom: &FinitePoset,
        cod: &FinitePoset,
        values: Vec<usize>,
    ) -> Result<Self, CpoError> {
        if values.len() != dom.size() {
            return Err(CpoError::InvalidPoset(format!(
                "table has {} entries for a domain of {}",
                values.len(),
                dom.size()
            )));
        }
        for &v in &values {
            if v >= cod.size() {
                return Err(CpoError::BadElement {
                    index: v,
                    size: cod.size(),
                });
            }
        }
        for a in 0..dom.size() {
            for b in 0..dom.size() {
                if dom.le(a, b) && !cod.le(values[a], values[b]) {
                    return Err(CpoError::NotMonotone(format!(
                        "#{a} ≤ #{b} but values #{} and #{} are unrelated or reversed",
                        values[a], values[b]
                    )));
                }
            }
        }
        Ok(Self { values })
    }

    pub fn apply(&self, x: usize) -> usize {
        self.values[x]
    }

    pub fn values(&self) -> &[usize] {
        &self.values
    }
}

/// All monotone maps P → Q, each exactly once, sorted lexicographically by
/// value vectors (inputs in index order). The constant-bottom map comes
/// first. `budget` caps the total number of table cells produced.
pub fn enumerate_monotone(
    p: &FinitePoset,
    q: &FinitePoset,
    budget: usize,
) -> Result<Vec<Vec<usize>>, CpoError> {
    // Index order on a function-space poset built here is a linear
    // extension of the pointwise order, so while extending position i only
    // earlier positions below i constrain the value from below. General
    // posets may order indices arbitrarily; both directions are checked.
    let n = p.size();
    let mut out: Vec<Vec<usize>> = Vec::new();
    let mut cur = vec![0usize; n];
    let mut cells: u128 = 0;
    fn extend(
        p: &FinitePoset,
        q: &FinitePoset,
        i: usize,
        cur: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
        cells: &mut u128,
        budget: usize,
    ) -> Result<(), CpoError> {
        if i == p.size() {
            *cells += p.size() as u128;
            if *cells > budget as u128 {
                return Err(CpoError::Budget {
                    needed: *cells,
                    budget,
                });
            }
            out.push(cur.clone());
            return Ok(());
        }
        for v in 0..q.size() {
            let ok = (0..i).all(|j| {
                (!p.le(j, i) || q.le(cur[j], v)) && (!p.le(i, j) || q.le(v, cur[j]))
            });
            if ok {
                cur[i] = v;
                extend(p, q, i + 1, cur, out, cells, budget)?;
            }
        }
        Ok(())
    }
    extend(p, q, 0, &mut cur, &mut out, &mut cells, budget)?;
    Ok(out)
}

const DEFAULT_CELL_BUDGET: usize = 1_000_000;

struct SigmaOp {
    arity: usize,
    table: Vec<usize>,
}

/// The finite model: the tower D_0 … D_N with its embedding-projection
/// pairs, fold/unfold on the top level D = D_N, and one table per
/// signature symbol (installed from an ops file).
pub struct Model {
    levels: Vec<FinitePoset>,
    // fns[n][d] is the value table of element d of D_{n+1}, sorted lex.
    fns: Vec<Vec<Vec<usize>>>,
    embed: Vec<Vec<usize>>,
    project: Vec<Vec<usize>>,
    sigma_ops: BTreeMap<String, SigmaOp>,
    cell_budget: usize,
}

/// Tower of the default height 2: D = [[2 -> 2] -> [2 -> 2]], 10 elements.
pub fn build_tower_default() -> Model {
    build_tower(2).expect("the rank-2 tower fits any budget")
}

pub fn build_tower(n: usize) -> Result<Model, CpoError> {
    build_tower_with_budget(n, DEFAULT_CELL_BUDGET)
}

pub fn build_tower_with_budget(n: usize, budget: usize) -> Result<Model, CpoError> {
    if n == 0 {
        return Err(CpoError::TowerHeight);
    }
    let mut levels = vec![FinitePoset::chain(2)];
    let mut fns: Vec<Vec<Vec<usize>>> = Vec::new();
    for level in 0..n {
        let tables = enumerate_monotone(&levels[level], &levels[level], budget)?;
        let size = tables.len();
        let base = &levels[level];
        let mut leq = vec![false; size * size];
        for a in 0..size {
            for b in 0..size {
                leq[a * size + b] = tables[a]
                    .iter()
                    .zip(&tables[b])
                    .all(|(&x, &y)| base.le(x, y));
            }
        }
        levels.push(FinitePoset::new(size, leq)?);
        fns.push(tables);
    }
    // Embedding-projection pairs up the tower. At the base, an element
    // embeds as the constant map and a map projects to its value at ⊥.
    let mut embed: Vec<Vec<usize>> = Vec::new();
    let mut project: Vec<Vec<usize>> = Vec::new();
    let find = |tables: &Vec<Vec<usize>>, key: &Vec<usize>| -> Result<usize, CpoError> {
        tables
            .binary_search(key)
            .map_err(|_| CpoError::Internal("composite map missing from enumeration".into()))
    };
    for level in 0..n {
        let dn = levels[level].size();
        let dn1 = levels[level + 1].size();
        let (e, j) = if level == 0 {
            let mut e = Vec::with_capacity(dn);
            for d in 0..dn {
                e.push(find(&fns[0], &vec![d; dn])?);
            }
            let bot = levels[0].bottom();
            let j = (0..dn1).map(|f| fns[0][f][bot]).collect();
            (e, j)
        } else {
            let (pe, pj) = (&embed[level - 1], &project[level - 1]);
            let mut e = Vec::with_capacity(dn);
            for f in 0..dn {
                let table: Vec<usize> = (0..dn).map(|x| pe[fns[level - 1][f][pj[x]]]).collect();
                e.push(find(&fns[level], &table)?);
            }
            let prev = levels[level - 1].size();
            let mut j = Vec::with_capacity(dn1);
            for g in 0..dn1 {
                let table: Vec<usize> = (0..prev).map(|x| pj[fns[level][g][pe[x]]]).collect();
                j.push(find(&fns[level - 1], &table)?);
            }
            (e, j)
        };
        embed.push(e);
        project.push(j);
    }
    Ok(Model {
        levels,
        fns,
        embed,
        project,
        sigma_ops: BTreeMap::new(),
        cell_budget: budget,
    })
}

impl Model {
    /// Number of function-space levels above the base chain.
    pub fn tower_height(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn level(&self, n: usize) -> &FinitePoset {
        &self.levels[n]
    }

    /// The top-level poset D.
    pub fn d(&self) -> &FinitePoset {
        self.levels.last().unwrap()
    }

    pub fn dsize(&self) -> usize {
        self.d().size()
    }

    pub fn bottom(&self) -> usize {
        self.d().bottom()
    }

    pub fn le(&self, a: usize, b: usize) -> bool {
        self.d().le(a, b)
    }

    pub fn cell_budget(&self) -> usize {
        self.cell_budget
    }

    /// Budget for interpretation tables (cells per table). Tower levels
    /// are already built and unaffected.
    pub fn with_cell_budget(mut self, budget: usize) -> Model {
        self.cell_budget = budget;
        self
    }

    pub fn embed_table(&self, level: usize) -> &[usize] {
        &self.embed[level]
    }

    pub fn project_table(&self, level: usize) -> &[usize] {
        &self.project[level]
    }

    /// Packs a monotone self-map of D down into a D-element. Inverse of
    /// [`unfold`](Model::unfold) on the image side: fold∘unfold = id.
    pub fn fold(&self, f: &MonotoneTable) -> Result<usize, CpoError> {
        if f.values().len() != self.dsize() {
            return Err(CpoError::InvalidPoset(format!(
                "self-map table has {} entries for a domain of {}",
                f.values().len(),
                self.dsize()
            )));
        }
        self.fold_slice(f.values())
    }

    fn fold_slice(&self, values: &[usize]) -> Result<usize, CpoError> {
        let top = self.levels.len() - 1;
        let e = &self.embed[top - 1];
        let j = &self.project[top - 1];
        let prev = self.levels[top - 1].size();
        let table: Vec<usize> = (0..prev).map(|x| j[values[e[x]]]).collect();
        self.fns[top - 1]
            .binary_search(&table)
            .map_err(|_| CpoError::NotMonotone("fold of a non-monotone table".into()))
    }

    /// Unpacks a D-element into a monotone self-map of D.
    pub fn unfold(&self, d: usize) -> MonotoneTable {
        let top = self.levels.len() - 1;
        let e = &self.embed[top - 1];
        let j = &self.project[top - 1];
        let values = (0..self.dsize())
            .map(|x| e[self.fns[top - 1][d][j[x]]])
            .collect();
        MonotoneTable { values }
    }

    /// Application: unfold the left argument and evaluate.
    pub fn app(&self, a: usize, b: usize) -> usize {
        let top = self.levels.len() - 1;
        self.embed[top - 1][self.fns[top - 1][a][self.project[top - 1][b]]]
    }

    pub fn sigma_op(&self, symbol: &str) -> Option<(usize, &[usize])> {
        self.sigma_ops
            .get(symbol)
            .map(|op| (op.arity, op.table.as_slice()))
    }
}

/// A monotone map D^Γ → D as a total table. Row-major with the first
/// context variable most significant; the empty context has one cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContextMap {
    ctx: Context,
    table: Vec<usize>,
}

/// Number of cells of a table over `width` coordinates, against a budget.
fn table_cells(k: usize, width: usize, budget: usize) -> Result<usize, CpoError> {
    let needed = (k as u128).pow(width as u32);
    if needed > budget as u128 {
        return Err(CpoError::Budget { needed, budget });
    }
    Ok(needed as usize)
}

/// The coordinates of cell `idx` in a width-`width` table over `k`
/// elements, most significant first.
pub fn decode_tuple(idx: usize, k: usize, width: usize) -> Vec<usize> {
    let mut t = vec![0usize; width];
    let mut rest = idx;
    for slot in t.iter_mut().rev() {
        *slot = rest % k;
        rest /= k;
    }
    t
}

impl ContextMap {
    /// Validates size, element range, and monotonicity in the product
    /// order.
    pub fn new(ctx: Context, table: Vec<usize>, m: &Model) -> Result<Self, CpoError> {
        let k = m.dsize();
        let cells = table_cells(k, ctx.len(), m.cell_budget())?;
        if table.len() != cells {
            return Err(CpoError::InvalidPoset(format!(
                "table has {} entries, the context needs {}",
                table.len(),
                cells
            )));
        }
        for &v in &table {
            if v >= k {
                return Err(CpoError::BadElement { index: v, size: k });
            }
        }
        let cm = Self { ctx, table };
        cm.check_monotone(m)?;
        Ok(cm)
    }

    fn check_monotone(&self, m: &Model) -> Result<(), CpoError> {
        let k = m.dsize();
        let w = self.ctx.len();
        for a in 0..self.table.len() {
            let ta = decode_tuple(a, k, w);
            'next: for b in 0..self.table.len() {
                let tb = decode_tuple(b, k, w);
                for (x, y) in ta.iter().zip(&tb) {
                    if !m.d().le(*x, *y) {
                        continue 'next;
                    }
                }
                if !m.le(self.table[a], self.table[b]) {
                    return Err(CpoError::NotMonotone(format!(
                        "cells {a} and {b} of a context map"
                    )));
                }
            }
        }
        Ok(())
    }

    /// The everywhere-bottom map.
    pub fn bottom(ctx: &Context, m: &Model) -> Result<Self, CpoError> {
        let cells = table_cells(m.dsize(), ctx.len(), m.cell_budget())?;
        Ok(Self {
            ctx: ctx.clone(),
            table: vec![m.bottom(); cells],
        })
    }

    /// The coordinate projection for `name`.
    pub fn projection(ctx: &Context, name: &str, m: &Model) -> Result<Self, CpoError> {
        let pos = ctx
            .position(name)
            .ok_or_else(|| CpoError::FreeVarNotInContext(name.to_string()))?;
        let k = m.dsize();
        let cells = table_cells(k, ctx.len(), m.cell_budget())?;
        let table = (0..cells)
            .map(|i| decode_tuple(i, k, ctx.len())[pos])
            .collect();
        Ok(Self {
            ctx: ctx.clone(),
            table,
        })
    }

    pub fn context(&self) -> &Context {
        &self.ctx
    }

    pub fn table(&self) -> &[usize] {
        &self.table
    }

    /// Value at an explicit coordinate tuple (in context order).
    pub fn get(&self, tuple: &[usize], m: &Model) -> usize {
        let k = m.dsize();
        let idx = tuple.iter().fold(0usize, |acc, &t| acc * k + t);
        self.table[idx]
    }

    pub fn le(&self, other: &ContextMap, m: &Model) -> bool {
        self.ctx == other.ctx
            && self
                .table
                .iter()
                .zip(&other.table)
                .all(|(&a, &b)| m.le(a, b))
    }

    /// Pointwise least upper bound.
    pub fn join(&self, other: &ContextMap, m: &Model) -> Result<ContextMap, CpoError> {
        if self.ctx != other.ctx {
            return Err(CpoError::ContextMismatch {
                left: self.ctx.clone(),
                right: other.ctx.clone(),
            });
        }
        let mut table = Vec::with_capacity(self.table.len());
        for (&a, &b) in self.table.iter().zip(&other.table) {
            table.push(m.d().join(a, b).ok_or(CpoError::NoJoin(a, b))?);
        }
        Ok(ContextMap {
            ctx: self.ctx.clone(),
            table,
        })
    }
}

/// Compositional interpretation of a finite term as a [`ContextMap`]:
/// variables are projections, application goes through unfold,
/// abstraction folds the table over the innermost coordinate, and
/// signature symbols use their installed tables. `Bottom` is rejected.
pub fn interpret(t: &Term, ctx: &Context, m: &Model) -> Result<ContextMap, CpoError> {
    interpret_inner(t, ctx, m, false)
}

/// Like [`interpret`], but `Bottom` denotes the least element. This is the
/// reading under which depth cuts of an unfolding approximate a solution.
pub fn interpret_with_bottom(t: &Term, ctx: &Context, m: &Model) -> Result<ContextMap, CpoError> {
    interpret_inner(t, ctx, m, true)
}

fn interpret_inner(
    t: &Term,
    ctx: &Context,
    m: &Model,
    allow_bottom: bool,
) -> Result<ContextMap, CpoError> {
    let table = eval(t, ctx, m, 0, allow_bottom)?;
    Ok(ContextMap {
        ctx: ctx.clone(),
        table,
    })
}

/// Bottom-up tabulation over the context extended by `depth` binder
/// coordinates; the innermost binder is the last (least significant)
/// coordinate, so abstraction folds contiguous slices.
fn eval(
    t: &Term,
    ctx: &Context,
    m: &Model,
    depth: usize,
    allow_bottom: bool,
) -> Result<Vec<usize>, CpoError> {
    let k = m.dsize();
    let width = ctx.len() + depth;
    let cells = table_cells(k, width, m.cell_budget())?;
    match t {
        Term::Bottom => {
            if !allow_bottom {
                return Err(CpoError::BottomDisabled);
            }
            Ok(vec![m.bottom(); cells])
        }
        Term::Free(x) => {
            let pos = ctx
                .position(x)
                .ok_or_else(|| CpoError::FreeVarNotInContext(x.clone()))?;
            Ok((0..cells)
                .map(|i| decode_tuple(i, k, width)[pos])
                .collect())
        }
        Term::Bound(i) => {
            if *i as usize >= depth {
                return Err(CpoError::OpenIndex { index: *i, depth });
            }
            let pos = width - 1 - *i as usize;
            Ok((0..cells)
                .map(|idx| decode_tuple(idx, k, width)[pos])
                .collect())
        }
        Term::App(l, r) => {
            let lv = eval(l, ctx, m, depth, allow_bottom)?;
            let rv = eval(r, ctx, m, depth, allow_bottom)?;
            Ok(lv.iter().zip(&rv).map(|(&a, &b)| m.app(a, b)).collect())
        }
        Term::Abs(b, _) => {
            let body = eval(b, ctx, m, depth + 1, allow_bottom)?;
            let mut out = Vec::with_capacity(cells);
            for i in 0..cells {
                out.push(m.fold_slice(&body[i * k..(i + 1) * k])?);
            }
            Ok(out)
        }
        Term::Op(s, args) => {
            let (arity, table) = m
                .sigma_op(s)
                .ok_or_else(|| CpoError::MissingOp(s.clone()))?;
            if arity != args.len() {
                return Err(CpoError::OpArity {
                    symbol: s.clone(),
                    expected: arity,
                    got: args.len(),
                });
            }
            let evaled: Vec<Vec<usize>> = args
                .iter()
                .map(|a| eval(a, ctx, m, depth, allow_bottom))
                .collect::<Result<_, _>>()?;
            Ok((0..cells)
                .map(|i| {
                    let row = evaled.iter().fold(0usize, |acc, col| acc * k + col[i]);
                    table[row]
                })
                .collect())
        }
    }
}

/// Collapses a context map to a single D-element by folding coordinates
/// from the innermost outwards; the empty context evaluates at the empty
/// tuple.
pub fn interpret_in_d(c: &ContextMap, m: &Model) -> Result<usize, CpoError> {
    let k = m.dsize();
    let mut table = c.table.clone();
    for _ in 0..c.ctx.len() {
        let mut next = Vec::with_capacity(table.len() / k);
        for i in 0..table.len() / k {
            next.push(m.fold_slice(&table[i * k..(i + 1) * k])?);
        }
        table = next;
    }
    Ok(table[0])
}

/// Substitution on the semantic side: precompose `outer` with the tuple of
/// assigned maps. `assign` must cover every variable of `outer`'s context,
/// with all values over one common context.
pub fn mult(
    outer: &ContextMap,
    assign: &BTreeMap<String, ContextMap>,
    m: &Model,
) -> Result<ContextMap, CpoError> {
    let mut parts: Vec<&ContextMap> = Vec::with_capacity(outer.ctx.len());
    for name in outer.ctx.names() {
        parts.push(
            assign
                .get(name)
                .ok_or_else(|| CpoError::MissingMapping(name.clone()))?,
        );
    }
    let target = match parts.first() {
        Some(first) => first.ctx.clone(),
        // An empty outer context ignores the assignment entirely.
        None => Context::empty(),
    };
    for p in &parts {
        if p.ctx != target {
            return Err(CpoError::ContextMismatch {
                left: target.clone(),
                right: p.ctx.clone(),
            });
        }
    }
    let k = m.dsize();
    let cells = table_cells(k, target.len(), m.cell_budget())?;
    let mut table = Vec::with_capacity(cells);
    for i in 0..cells {
        let row = parts.iter().fold(0usize, |acc, p| acc * k + p.table[i]);
        table.push(outer.table[row]);
    }
    Ok(ContextMap { ctx: target, table })
}

/// How a candidate relates to one application of the scheme's rule
/// operator Φ.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    Fixed,
    PostFixed,
    Neither,
}

/// One application of Φ: each rule body, interpreted over the extended
/// context, precomposed with the candidate on nonterminal coordinates and
/// projections on context coordinates.
fn phi(
    s: &RecursionScheme,
    m: &Model,
    bodies: &BTreeMap<String, ContextMap>,
    cand: &BTreeMap<String, ContextMap>,
) -> Result<BTreeMap<String, ContextMap>, CpoError> {
    let mut assign: BTreeMap<String, ContextMap> = BTreeMap::new();
    for x in s.context().names() {
        assign.insert(x.clone(), ContextMap::projection(s.context(), x, m)?);
    }
    for (p, c) in cand {
        assign.insert(p.clone(), c.clone());
    }
    let mut next = BTreeMap::new();
    for p in s.nonterminals() {
        next.insert(p.clone(), mult(&bodies[p], &assign, m)?);
    }
    Ok(next)
}

fn interpret_bodies(
    s: &RecursionScheme,
    m: &Model,
) -> Result<BTreeMap<String, ContextMap>, CpoError> {
    let ctx_ext = s.extended_context();
    let mut bodies = BTreeMap::new();
    for p in s.nonterminals() {
        let body = s.rule(p).expect("every nonterminal has a rule");
        bodies.insert(p.clone(), interpret_with_bottom(body, &ctx_ext, m)?);
    }
    Ok(bodies)
}

/// Least interpreted solution by Kleene iteration from the everywhere-⊥
/// candidate. Guardedness is not required. Returns the fixed point and the
/// number of Φ applications, including the one that confirms stability.
pub fn solve_interpreted(
    s: &RecursionScheme,
    m: &Model,
) -> Result<(BTreeMap<String, ContextMap>, usize), CpoError> {
    let bodies = interpret_bodies(s, m)?;
    let mut cand: BTreeMap<String, ContextMap> = BTreeMap::new();
    for p in s.nonterminals() {
        cand.insert(p.clone(), ContextMap::bottom(s.context(), m)?);
    }
    let per = table_cells(m.dsize(), s.context().len(), m.cell_budget())? * m.d().height();
    let bound = per * s.nonterminals().len() + 2;
    let mut iterations = 0usize;
    loop {
        iterations += 1;
        if iterations > bound {
            return Err(CpoError::Internal(
                "iteration exceeded the lattice height bound".to_string(),
            ));
        }
        let next = phi(s, m, &bodies, &cand)?;
        if next == cand {
            return Ok((cand, iterations));
        }
        cand = next;
    }
}

/// One application of the scheme's rule operator to a candidate: every
/// nonterminal is replaced by its rule body with the candidate plugged in.
/// The candidate must cover every nonterminal, over the scheme's context.
pub fn apply_rules(
    s: &RecursionScheme,
    m: &Model,
    cand: &BTreeMap<String, ContextMap>,
) -> Result<BTreeMap<String, ContextMap>, CpoError> {
    for p in s.nonterminals() {
        if !cand.contains_key(p) {
            return Err(CpoError::MissingCandidate(p.clone()));
        }
    }
    let bodies = interpret_bodies(s, m)?;
    phi(s, m, &bodies, cand)
}

/// Classifies a candidate: `Fixed` when Φ(c) = c (the solution equations
/// hold exactly), `PostFixed` when Φ(c) ≤ c pointwise, else `Neither`.
pub fn check_interpreted(
    s: &RecursionScheme,
    m: &Model,
    cand: &BTreeMap<String, ContextMap>,
) -> Result<Classification, CpoError> {
    for p in s.nonterminals() {
        if !cand.contains_key(p) {
            return Err(CpoError::MissingCandidate(p.clone()));
        }
    }
    let bodies = interpret_bodies(s, m)?;
    let next = phi(s, m, &bodies, cand)?;
    if next == *cand {
        return Ok(Classification::Fixed);
    }
    if s.nonterminals().iter().all(|p| next[p].le(&cand[p], m)) {
        return Ok(Classification::PostFixed);
    }
    Ok(Classification::Neither)
}

/// Parsed ops file: an optional tower height and one entry per symbol.
#[derive(Debug, Clone, Default)]
pub struct OpsFile {
    pub tower: Option<usize>,
    pub ops: Vec<(String, OpSpec)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OpSpec {
    Join,
    Meet,
    Bot,
    Id,
    Table(Vec<(Vec<usize>, usize)>),
}

/// Parses the ops file format: an optional `model tower N` line, then per
/// symbol either `op s = join|meet|bot|id` or an explicit table block
/// `op s { #i #j -> #k ; … }` covering every input tuple.
pub fn parse_ops_file(text: &str) -> Result<OpsFile, CpoError> {
    use crate::lex::{tokenize, Tok};
    let toks = tokenize(text).map_err(|(line, _, msg)| CpoError::OpsSyntax { line, msg })?;
    let mut out = OpsFile::default();
    let mut i = 0;
    let syntax = |line: usize, msg: &str| CpoError::OpsSyntax {
        line,
        msg: msg.to_string(),
    };
    while i < toks.len() {
        match &toks[i].kind {
            Tok::Newline => i += 1,
            Tok::Ident(w) if w == "model" => {
                let line = toks[i].line;
                if out.tower.is_some() {
                    return Err(syntax(line, "more than one model line"));
                }
                match (toks.get(i + 1).map(|t| &t.kind), toks.get(i + 2).map(|t| &t.kind)) {
                    (Some(Tok::Ident(kw)), Some(Tok::Nat(n))) if kw == "tower" => {
                        out.tower = Some(*n);
                        i += 3;
                    }
                    _ => return Err(syntax(line, "expected `model tower N`")),
                }
            }
            Tok::Ident(w) if w == "op" => {
                let line = toks[i].line;
                let name = match toks.get(i + 1).map(|t| &t.kind) {
                    Some(Tok::Ident(n)) => n.clone(),
                    _ => return Err(syntax(line, "expected a symbol name after `op`")),
                };
                match toks.get(i + 2).map(|t| &t.kind) {
                    Some(Tok::Eq) => {
                        let spec = match toks.get(i + 3).map(|t| &t.kind) {
                            Some(Tok::Ident(s)) if s == "join" => OpSpec::Join,
                            Some(Tok::Ident(s)) if s == "meet" => OpSpec::Meet,
                            Some(Tok::Ident(s)) if s == "bot" => OpSpec::Bot,
                            Some(Tok::Ident(s)) if s == "id" => OpSpec::Id,
                            _ => {
                                return Err(syntax(
                                    line,
                                    "expected one of join, meet, bot, id",
                                ))
                            }
                        };
                        out.ops.push((name, spec));
                        i += 4;
                    }
                    Some(Tok::LBrace) => {
                        let mut rows = Vec::new();
                        i += 3;
                        loop {
                            while matches!(toks.get(i).map(|t| &t.kind), Some(Tok::Newline)) {
                                i += 1;
                            }
                            match toks.get(i).map(|t| &t.kind) {
                                Some(Tok::RBrace) => {
                                    i += 1;
                                    break;
                                }
                                None => {
                                    return Err(syntax(line, "unclosed table block"))
                                }
                                _ => {}
                            }
                            let mut inputs = Vec::new();
                            loop {
                                match toks.get(i).map(|t| &t.kind) {
                                    Some(Tok::Hash) => {
                                        match toks.get(i + 1).map(|t| &t.kind) {
                                            Some(Tok::Nat(n)) => {
                                                inputs.push(*n);
                                                i += 2;
                                            }
                                            _ => {
                                                return Err(syntax(
                                                    toks[i].line,
                                                    "expected a number after `#`",
                                                ))
                                            }
                                        }
                                    }
                                    Some(Tok::Arrow) => break,
                                    _ => {
                                        return Err(syntax(
                                            toks.get(i).map_or(line, |t| t.line),
                                            "expected `#i` or `->` in a table row",
                                        ))
                                    }
                                }
                            }
                            i += 1;
                            let value = match (
                                toks.get(i).map(|t| &t.kind),
                                toks.get(i + 1).map(|t| &t.kind),
                            ) {
                                (Some(Tok::Hash), Some(Tok::Nat(n))) => *n,
                                _ => {
                                    return Err(syntax(
                                        toks.get(i).map_or(line, |t| t.line),
                                        "expected `#k` after `->`",
                                    ))
                                }
                            };
                            i += 2;
                            if !matches!(toks.get(i).map(|t| &t.kind), Some(Tok::Semi)) {
                                return Err(syntax(
                                    toks.get(i).map_or(line, |t| t.line),
                                    "expected `;` after a table row",
                                ));
                            }
                            i += 1;
                            rows.push((inputs, value));
                        }
                        out.ops.push((name, OpSpec::Table(rows)));
                    }
                    _ => return Err(syntax(line, "expected `=` or `{` after the symbol name")),
                }
            }
            other => {
                return Err(syntax(
                    toks[i].line,
                    &format!("expected `model` or `op`, found {other}"),
                ))
            }
        }
    }
    Ok(out)
}

impl Model {
    /// Installs one table per signature symbol from a parsed ops file,
    /// checking arity, totality, and monotonicity; `join`/`meet`
    /// shorthands are verified to exist on the whole domain.
    pub fn install_ops(
        &mut self,
        file: &OpsFile,
        sig: &crate::term::Signature,
    ) -> Result<(), CpoError> {
        let k = self.dsize();
        for (name, spec) in &file.ops {
            let arity = sig
                .arity(name)
                .ok_or_else(|| CpoError::UnknownOp(name.clone()))?;
            let expect_arity = |want: usize| {
                if arity != want {
                    Err(CpoError::OpArity {
                        symbol: name.clone(),
                        expected: want,
                        got: arity,
                    })
                } else {
                    Ok(())
                }
            };
            let cells = table_cells(k, arity, self.cell_budget)?;
            let table = match spec {
                OpSpec::Join => {
                    expect_arity(2)?;
                    let mut t = Vec::with_capacity(cells);
                    for a in 0..k {
                        for b in 0..k {
                            t.push(self.d().join(a, b).ok_or(CpoError::NoJoin(a, b))?);
                        }
                    }
                    t
                }
                OpSpec::Meet => {
                    expect_arity(2)?;
                    let mut t = Vec::with_capacity(cells);
                    for a in 0..k {
                        for b in 0..k {
                            t.push(self.d().meet(a, b).ok_or(CpoError::NoMeet(a, b))?);
                        }
                    }
                    t
                }
                OpSpec::Bot => vec![self.bottom(); cells],
                OpSpec::Id => {
                    expect_arity(1)?;
                    (0..k).collect()
                }
                OpSpec::Table(rows) => {
                    let mut t = vec![usize::MAX; cells];
                    for (inputs, value) in rows {
                        if inputs.len() != arity {
                            return Err(CpoError::OpArity {
                                symbol: name.clone(),
                                expected: arity,
                                got: inputs.len(),
                            });
                        }
                        for &x in inputs.iter().chain([value]) {
                            if x >= k {
                                return Err(CpoError::BadElement { index: x, size: k });
                            }
                        }
                        let idx = inputs.iter().fold(0usize, |acc, &x| acc * k + x);
                        if t[idx] != usize::MAX {
                            return Err(CpoError::DuplicateRow {
                                symbol: name.clone(),
                                row: row_text(inputs),
                            });
                        }
                        t[idx] = *value;
                    }
                    if let Some(hole) = t.iter().position(|&v| v == usize::MAX) {
                        return Err(CpoError::NotTotal {
                            symbol: name.clone(),
                            row: row_text(&decode_tuple(hole, k, arity)),
                        });
                    }
                    t
                }
            };
            // Monotonicity in the product order over all tuple pairs.
            for a in 0..cells {
                let ta = decode_tuple(a, k, arity);
                'pairs: for b in 0..cells {
                    let tb = decode_tuple(b, k, arity);
                    for (x, y) in ta.iter().zip(&tb) {
                        if !self.d().le(*x, *y) {
                            continue 'pairs;
                        }
                    }
                    if !self.le(table[a], table[b]) {
                        return Err(CpoError::NotMonotone(format!(
                            "table for `{name}` at rows {} and {}",
                            row_text(&ta),
                            row_text(&tb)
                        )));
                    }
                }
            }
            self.sigma_ops.insert(
                name.clone(),
                SigmaOp {
                    arity,
                    table,
                },
            );
        }
        for (name, _) in sig.iter() {
            if !self.sigma_ops.contains_key(name) {
                return Err(CpoError::MissingOp(name.to_string()));
            }
        }
        Ok(())
    }
}

fn row_text(tuple: &[usize]) -> String {
    if tuple.is_empty() {
        return "()".to_string();
    }
    tuple
        .iter()
        .map(|x| format!("#{x}"))
        .collect::<Vec<_>>()
        .join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scheme::parse_scheme;
    use crate::term::{parse_term, Signature};

    #[test]
    fn poset_construction_validates_the_axioms() {
        FinitePoset::new(2, vec![true, true, false, true]).unwrap();
        // Symmetric pair breaks antisymmetry.
        assert!(FinitePoset::new(2, vec![true, true, true, true]).is_err());
        // Missing reflexivity.
        assert!(FinitePoset::new(1, vec![false]).is_err());
        // Two incomparable elements have no bottom.
        assert!(FinitePoset::new(2, vec![true, false, false, true]).is_err());
    }

    #[test]
    fn chain_heights() {
        assert_eq!(FinitePoset::chain(2).height(), 1);
        assert_eq!(FinitePoset::chain(3).height(), 2);
        assert_eq!(FinitePoset::chain(1).height(), 0);
    }

    #[test]
    fn joins_and_meets_on_chains() {
        let c = FinitePoset::chain(3);
        assert_eq!(c.join(1, 2), Some(2));
        assert_eq!(c.meet(1, 2), Some(1));
        assert_eq!(c.join(0, 0), Some(0));
    }

    #[test]
    fn monotone_maps_of_the_two_chain() {
        let c2 = FinitePoset::chain(2);
        let maps = enumerate_monotone(&c2, &c2, 1000).unwrap();
        assert_eq!(maps, vec![vec![0, 0], vec![0, 1], vec![1, 1]]);
    }

    #[test]
    fn monotone_maps_of_the_three_chain() {
        let c3 = FinitePoset::chain(3);
        let maps = enumerate_monotone(&c3, &c3, 1000).unwrap();
        assert_eq!(maps.len(), 10);
        assert_eq!(maps[0], vec![0, 0, 0], "constant-bottom first");
        let mut sorted = maps.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted, maps, "sorted and duplicate-free");
    }

    #[test]
    fn enumeration_starts_at_constant_bottom_off_chains_too() {
        // The V-shape: bottom below two incomparable points.
        let v = FinitePoset::new(
            3,
            vec![
                true, true, true, // 0 ≤ all
                false, true, false, // 1 ≤ 1
                false, false, true, // 2 ≤ 2
            ],
        )
        .unwrap();
        let maps = enumerate_monotone(&v, &v, 10_000).unwrap();
        assert_eq!(maps[0], vec![0, 0, 0]);
        for m in &maps {
            MonotoneTable::new(&v, &v, m.clone()).unwrap();
        }
    }

    #[test]
    fn tower_sizes_match_the_enumeration() {
        assert_eq!(build_tower(1).unwrap().dsize(), 3);
        assert_eq!(build_tower(2).unwrap().dsize(), 10);
    }

    #[test]
    fn tower_embedding_projection_laws() {
        let m = build_tower(2).unwrap();
        for level in 0..2 {
            let (dn, dn1) = (m.level(level).size(), m.level(level + 1).size());
            let (e, j) = (m.embed_table(level), m.project_table(level));
            for d in 0..dn {
                assert_eq!(j[e[d]], d, "projection inverts embedding at {level}");
            }
            for f in 0..dn1 {
                assert!(
                    m.level(level + 1).le(e[j[f]], f),
                    "e∘j deflates at level {level}"
                );
            }
        }
    }

    #[test]
    fn fold_unfold_is_the_identity_on_d() {
        let m = build_tower(2).unwrap();
        for d in 0..m.dsize() {
            assert_eq!(m.fold(&m.unfold(d)).unwrap(), d);
        }
    }

    #[test]
    fn unfold_fold_deflates_pointwise() {
        let m = build_tower(1).unwrap();
        let d = m.d().clone();
        for f in enumerate_monotone(&d, &d, 10_000).unwrap() {
            let t = MonotoneTable::new(&d, &d, f.clone()).unwrap();
            let back = m.unfold(m.fold(&t).unwrap());
            for (x, &fx) in f.iter().enumerate() {
                assert!(d.le(back.apply(x), fx));
            }
        }
    }

    #[test]
    fn application_is_strict_and_monotone() {
        let m = build_tower(2).unwrap();
        let k = m.dsize();
        for b in 0..k {
            assert_eq!(m.app(m.bottom(), b), m.bottom());
        }
        for a in 0..k {
            for a2 in 0..k {
                if !m.le(a, a2) {
                    continue;
                }
                for b in 0..k {
                    assert!(m.le(m.app(a, b), m.app(a2, b)));
                    assert!(m.le(m.app(b, a), m.app(b, a2)));
                }
            }
        }
    }

    #[test]
    fn applying_folded_identity_projects() {
        let m = build_tower(2).unwrap();
        let ident = MonotoneTable::new(m.d(), m.d(), (0..m.dsize()).collect()).unwrap();
        let fid = m.fold(&ident).unwrap();
        let top = m.tower_height();
        let (e, j) = (m.embed_table(top - 1), m.project_table(top - 1));
        for b in 0..m.dsize() {
            // unfold(fold(id)) is the deflation e∘j, so application lands
            // exactly on the embedded projection of the argument.
            assert_eq!(m.app(fid, b), e[j[b]]);
            assert!(m.le(m.app(fid, b), b));
        }
    }

    #[test]
    fn interpreting_a_variable_gives_the_identity_table() {
        let m = build_tower(2).unwrap();
        let ctx = Context::new(["y"]).unwrap();
        let t = parse_term("y", &Signature::empty(), &ctx).unwrap();
        let c = interpret(&t, &ctx, &m).unwrap();
        let expected: Vec<usize> = (0..m.dsize()).collect();
        assert_eq!(c.table(), expected.as_slice());
    }

    #[test]
    fn interpreting_the_identity_function_folds_the_identity() {
        let m = build_tower(2).unwrap();
        let t = parse_term("\\x. x", &Signature::empty(), &Context::empty()).unwrap();
        let c = interpret(&t, &Context::empty(), &m).unwrap();
        let ident = MonotoneTable::new(m.d(), m.d(), (0..m.dsize()).collect()).unwrap();
        assert_eq!(c.table(), &[m.fold(&ident).unwrap()]);
    }

    #[test]
    fn bottom_needs_the_permissive_reading() {
        let m = build_tower(1).unwrap();
        let t = parse_term("_|_", &Signature::empty(), &Context::empty()).unwrap();
        assert!(matches!(
            interpret(&t, &Context::empty(), &m),
            Err(CpoError::BottomDisabled)
        ));
        let c = interpret_with_bottom(&t, &Context::empty(), &m).unwrap();
        assert_eq!(c.table(), &[0]);
    }

    #[test]
    fn missing_sigma_tables_are_reported() {
        let m = build_tower(1).unwrap();
        let sig = Signature::new([("s", 1usize)]).unwrap();
        let ctx = Context::new(["y"]).unwrap();
        let t = parse_term("s(y)", &sig, &ctx).unwrap();
        assert!(matches!(
            interpret(&t, &ctx, &m),
            Err(CpoError::MissingOp(s)) if s == "s"
        ));
    }

    #[test]
    fn interpretation_tables_are_monotone() {
        let m = build_tower(2).unwrap();
        let ctx = Context::new(["y", "z"]).unwrap();
        for text in ["y @ z", "\\x. x @ y", "\\x. \\w. (w @ z) @ (y @ x)"] {
            let t = parse_term(text, &Signature::empty(), &ctx).unwrap();
            let c = interpret(&t, &ctx, &m).unwrap();
            ContextMap::new(ctx.clone(), c.table().to_vec(), &m).unwrap();
        }
    }

    #[test]
    fn collapsing_to_d_folds_coordinates() {
        let m = build_tower(2).unwrap();
        let ctx = Context::new(["y"]).unwrap();
        let ident = ContextMap::projection(&ctx, "y", &m).unwrap();
        let table = MonotoneTable::new(m.d(), m.d(), (0..m.dsize()).collect()).unwrap();
        assert_eq!(
            interpret_in_d(&ident, &m).unwrap(),
            m.fold(&table).unwrap()
        );
        let empty = interpret(
            &parse_term("\\x. x", &Signature::empty(), &Context::empty()).unwrap(),
            &Context::empty(),
            &m,
        )
        .unwrap();
        assert_eq!(interpret_in_d(&empty, &m).unwrap(), empty.table()[0]);
    }

    #[test]
    fn mult_with_projections_is_the_identity() {
        let m = build_tower(2).unwrap();
        let ctx = Context::new(["y", "z"]).unwrap();
        let t = parse_term("\\x. y @ (x @ z)", &Signature::empty(), &ctx).unwrap();
        let outer = interpret(&t, &ctx, &m).unwrap();
        let assign = BTreeMap::from([
            ("y".to_string(), ContextMap::projection(&ctx, "y", &m).unwrap()),
            ("z".to_string(), ContextMap::projection(&ctx, "z", &m).unwrap()),
        ]);
        assert_eq!(mult(&outer, &assign, &m).unwrap(), outer);
    }

    #[test]
    fn mult_through_the_identity_is_the_assignment() {
        let m = build_tower(2).unwrap();
        let u = Context::new(["u"]).unwrap();
        let outer = ContextMap::projection(&u, "u", &m).unwrap();
        let ctx = Context::new(["y"]).unwrap();
        let t = parse_term("\\x. y", &Signature::empty(), &ctx).unwrap();
        let value = interpret(&t, &ctx, &m).unwrap();
        let assign = BTreeMap::from([("u".to_string(), value.clone())]);
        assert_eq!(mult(&outer, &assign, &m).unwrap(), value);
    }

    #[test]
    fn substitution_lemma_spot_check() {
        let m = build_tower(2).unwrap();
        let from = Context::new(["y"]).unwrap();
        let to = Context::new(["z"]).unwrap();
        let t = parse_term("\\x. x @ y", &Signature::empty(), &from).unwrap();
        let repl = parse_term("\\x. x @ z", &Signature::empty(), &to).unwrap();
        let subst = BTreeMap::from([("y".to_string(), repl.clone())]);
        let substituted =
            crate::term::substitute(&t, &from, &to, &subst).unwrap();
        let lhs = interpret(&substituted, &to, &m).unwrap();
        let assign = BTreeMap::from([(
            "y".to_string(),
            interpret(&repl, &to, &m).unwrap(),
        )]);
        let rhs = mult(&interpret(&t, &from, &m).unwrap(), &assign, &m).unwrap();
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn least_solution_of_a_projection_rule() {
        let m = build_tower(2).unwrap();
        let s = parse_scheme("context { y }\np = y\n").unwrap();
        let (sol, iters) = solve_interpreted(&s, &m).unwrap();
        assert_eq!(iters, 2, "one improving step, one confirming step");
        let expected = ContextMap::projection(s.context(), "y", &m).unwrap();
        assert_eq!(sol["p"], expected);
        assert_eq!(
            check_interpreted(&s, &m, &sol).unwrap(),
            Classification::Fixed
        );
    }

    #[test]
    fn unguarded_self_reference_solves_to_bottom() {
        let m = build_tower(2).unwrap();
        let s = parse_scheme("context { y }\np = p\n").unwrap();
        let (sol, iters) = solve_interpreted(&s, &m).unwrap();
        assert_eq!(iters, 1, "bottom is already fixed");
        assert_eq!(sol["p"], ContextMap::bottom(s.context(), &m).unwrap());
    }

    #[test]
    fn top_candidate_is_post_fixed_for_the_projection_rule() {
        let m = build_tower(2).unwrap();
        let s = parse_scheme("context { y }\np = y\n").unwrap();
        let k = m.dsize();
        let top = ContextMap::new(s.context().clone(), vec![k - 1; k], &m).unwrap();
        let cand = BTreeMap::from([("p".to_string(), top)]);
        assert_eq!(
            check_interpreted(&s, &m, &cand).unwrap(),
            Classification::PostFixed
        );
    }

    #[test]
    fn fixpoint_scheme_iteration_stays_within_the_height_bound() {
        let m = build_tower(2).unwrap();
        let s = parse_scheme("Y = \\f. f @ (Y @ f)\n").unwrap();
        let (sol, iters) = solve_interpreted(&s, &m).unwrap();
        let bound = m.d().height() + 1;
        assert!(iters <= bound, "{iters} vs bound {bound}");
        assert_eq!(
            check_interpreted(&s, &m, &sol).unwrap(),
            Classification::Fixed
        );
    }

    #[test]
    fn ops_shorthands_build_validated_tables() {
        let mut m = build_tower(2).unwrap();
        let sig = Signature::new([("s", 2usize), ("o", 1), ("c", 0)]).unwrap();
        let file =
            parse_ops_file("model tower 2\nop s = join\nop o = id\nop c = bot\n").unwrap();
        assert_eq!(file.tower, Some(2));
        m.install_ops(&file, &sig).unwrap();
        let (arity, table) = m.sigma_op("s").unwrap();
        assert_eq!(arity, 2);
        let k = m.dsize();
        for a in 0..k {
            assert_eq!(table[a * k + a], a, "join is idempotent");
            for b in 0..k {
                assert_eq!(table[a * k + b], table[b * k + a], "join is commutative");
            }
        }
        assert_eq!(m.sigma_op("c").unwrap().1, &[0]);
    }

    #[test]
    fn explicit_tables_are_checked_for_totality_and_monotonicity() {
        let sig = Signature::new([("o", 1usize)]).unwrap();
        let mut m = build_tower(1).unwrap();
        let good = parse_ops_file("op o { #0 -> #0 ; #1 -> #2 ; #2 -> #2 ; }\n").unwrap();
        m.install_ops(&good, &sig).unwrap();
        assert_eq!(m.sigma_op("o").unwrap().1, &[0, 2, 2]);

        let mut m = build_tower(1).unwrap();
        let partial = parse_ops_file("op o { #0 -> #0 ; #2 -> #2 ; }\n").unwrap();
        assert!(matches!(
            m.install_ops(&partial, &sig),
            Err(CpoError::NotTotal { .. })
        ));

        let mut m = build_tower(1).unwrap();
        let skew = parse_ops_file("op o { #0 -> #2 ; #1 -> #0 ; #2 -> #2 ; }\n").unwrap();
        assert!(matches!(
            m.install_ops(&skew, &sig),
            Err(CpoError::NotMonotone(_))
        ));

        let mut m = build_tower(1).unwrap();
        let dup = parse_ops_file("op o { #0 -> #0 ; #0 -> #1 ; #1 -> #1 ; #2 -> #2 ; }\n")
            .unwrap();
        assert!(matches!(
            m.install_ops(&dup, &sig),
            Err(CpoError::DuplicateRow { .. })
        ));
    }

    #[test]
    fn ops_must_cover_the_signature_and_nothing_else() {
        let mut m = build_tower(1).unwrap();
        let sig = Signature::new([("s", 2usize)]).unwrap();
        assert!(matches!(
            m.install_ops(&OpsFile::default(), &sig),
            Err(CpoError::MissingOp(s)) if s == "s"
        ));
        let mut m = build_tower(1).unwrap();
        let extra = parse_ops_file("op t = id\n").unwrap();
        assert!(matches!(
            m.install_ops(&extra, &sig),
            Err(CpoError::UnknownOp(t)) if t == "t"
        ));
    }

    #[test]
    fn budgets_reject_oversized_tables() {
        assert!(matches!(
            build_tower_with_budget(2, 10),
            Err(CpoError::Budget { .. })
        ));
        // The third function-space level has millions of elements; the
        // default budget cuts the enumeration off early instead of
        // exhausting memory.
        assert!(matches!(build_tower(3), Err(CpoError::Budget { .. })));
        let m = build_tower(2).unwrap().with_cell_budget(50);
        let ctx = Context::new(["y", "z"]).unwrap();
        let t = parse_term("y @ z", &Signature::empty(), &ctx).unwrap();
        assert!(matches!(
            interpret(&t, &ctx, &m),
            Err(CpoError::Budget { needed: 100, .. })
        ));
    }

    #[test]
    fn open_indices_are_not_interpretable() {
        let m = build_tower(1).unwrap();
        let s = parse_scheme("p = \\x. p @ ^1\n").unwrap();
        assert!(matches!(
            solve_interpreted(&s, &m),
            Err(CpoError::OpenIndex { index: 1, .. })
        ));
    }
}
