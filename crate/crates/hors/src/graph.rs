//! Term graphs: finite, possibly cyclic presentations of infinite terms.
//!
//! A rational term (an infinite term with finitely many distinct subtrees
//! up to alpha-equivalence) is represented by a rooted graph whose nodes
//! carry the same constructors as finite terms. Cycles encode infinite
//! unfolding; `Bound` nodes are de Bruijn indices counted along graph
//! paths, so validity requires every index to be covered by `Abs` nodes on
//! every path from the root ("binder-depth soundness").
//!
//! Equality of the presented infinite terms is bisimilarity of the graphs
//! and is decided by partition refinement. The quotient by bisimilarity is
//! the unique minimal presentation; its node count is the number of
//! distinct subtrees of the unfolding.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use thiserror::Error;

use crate::term::{Context, Signature, Term};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl NodeId {
    pub(crate) fn idx(self) -> usize {
        self.0 as usize
    }
}

/// Node constructors mirror [`Term`]; children are node references, so
/// sharing and cycles are possible. `Abs` keeps a display hint that never
/// affects bisimilarity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NodeLabel {
    App(NodeId, NodeId),
    Abs(NodeId, Option<String>),
    Op(String, Vec<NodeId>),
    Free(String),
    Bound(u32),
    Bottom,
}

impl NodeLabel {
    /// Child node ids in positional order.
    pub fn children(&self) -> Vec<NodeId> {
        match self {
            NodeLabel::App(a, b) => vec![*a, *b],
            NodeLabel::Abs(b, _) => vec![*b],
            NodeLabel::Op(_, args) => args.clone(),
            _ => Vec::new(),
        }
    }

    /// The same label with every child rewritten through `f`.
    pub fn map_children(&self, mut f: impl FnMut(NodeId) -> NodeId) -> NodeLabel {
        match self {
            NodeLabel::App(a, b) => NodeLabel::App(f(*a), f(*b)),
            NodeLabel::Abs(b, h) => NodeLabel::Abs(f(*b), h.clone()),
            NodeLabel::Op(s, args) => {
                NodeLabel::Op(s.clone(), args.iter().map(|a| f(*a)).collect())
            }
            other => other.clone(),
        }
    }

    fn is_abs(&self) -> bool {
        matches!(self, NodeLabel::Abs(..))
    }
}

/// Label key for bisimulation: constructor and payload, children and
/// display hints excluded.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum LocalKey {
    App,
    Abs,
    Op(String, usize),
    Free(String),
    Bound(u32),
    Bottom,
}

fn local_key(label: &NodeLabel) -> LocalKey {
    match label {
        NodeLabel::App(..) => LocalKey::App,
        NodeLabel::Abs(..) => LocalKey::Abs,
        NodeLabel::Op(s, args) => LocalKey::Op(s.clone(), args.len()),
        NodeLabel::Free(x) => LocalKey::Free(x.clone()),
        NodeLabel::Bound(i) => LocalKey::Bound(*i),
        NodeLabel::Bottom => LocalKey::Bottom,
    }
}

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("node n{node} has a dangling edge to n{child}")]
    DanglingEdge { node: u32, child: u32 },
    #[error("root n{0} is not a node")]
    DanglingRoot(u32),
    #[error("graph has no nodes")]
    Empty,
    #[error("node n{0} is unreachable from the root")]
    Unreachable(u32),
    #[error(
        "unsound bound variable: index {index} at binder-depth {depth} (node n{node}, path {})",
        format_path(path)
    )]
    UnsoundIndex {
        node: u32,
        index: u32,
        depth: usize,
        path: Vec<u32>,
    },
    #[error("free variable `{0}` is not in the context")]
    FreeVarNotInContext(String),
    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),
    #[error("symbol `{symbol}` expects {expected} argument(s), got {got}")]
    Arity {
        symbol: String,
        expected: usize,
        got: usize,
    },
    #[error("contexts differ: {left} vs {right}")]
    ContextMismatch { left: Context, right: Context },
    #[error("equation variable `{0}` is defined twice")]
    DuplicateVariable(String),
    #[error("equation variable `{0}` is referenced but not defined")]
    UndefinedVariable(String),
    #[error("no mapping for context variable `{0}`")]
    MissingMapping(String),
    #[error("builder node n{0} was reserved but never set")]
    UnsetNode(u32),
}

fn format_path(path: &[u32]) -> String {
    path.iter()
        .map(|n| format!("n{n}"))
        .collect::<Vec<_>>()
        .join(" -> ")
}

/// A rooted term graph over a context of free-variable names.
#[derive(Debug, Clone)]
pub struct TermGraph {
    nodes: Vec<NodeLabel>,
    root: NodeId,
    ctx: Context,
}

impl TermGraph {
    /// Builds a graph after checking that the root and all edges point at
    /// existing nodes. Reachability and binder-depth soundness are checked
    /// separately by [`validate_graph`], so violation reports for them can
    /// be produced from constructed values.
    pub fn new(nodes: Vec<NodeLabel>, root: NodeId, ctx: Context) -> Result<Self, GraphError> {
        if nodes.is_empty() {
            return Err(GraphError::Empty);
        }
        if root.idx() >= nodes.len() {
            return Err(GraphError::DanglingRoot(root.0));
        }
        for (i, label) in nodes.iter().enumerate() {
            for child in label.children() {
                if child.idx() >= nodes.len() {
                    return Err(GraphError::DanglingEdge {
                        node: i as u32,
                        child: child.0,
                    });
                }
            }
        }
        Ok(Self { nodes, root, ctx })
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn context(&self) -> &Context {
        &self.ctx
    }

    pub fn node(&self, id: NodeId) -> &NodeLabel {
        &self.nodes[id.idx()]
    }

    pub fn nodes(&self) -> &[NodeLabel] {
        &self.nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Single-node graph presenting the context variable `name`.
    pub fn free_var(ctx: &Context, name: &str) -> Result<TermGraph, GraphError> {
        if !ctx.contains(name) {
            return Err(GraphError::FreeVarNotInContext(name.to_string()));
        }
        TermGraph::new(
            vec![NodeLabel::Free(name.to_string())],
            NodeId(0),
            ctx.clone(),
        )
    }

    /// Duplicates the root node `steps` times; each copy becomes the new
    /// root with its children pointing at the previous graph. Unrolling
    /// never changes the presented term, only the presentation.
    pub fn unroll(&self, steps: usize) -> TermGraph {
        let mut g = self.clone();
        for _ in 0..steps {
            let copy = g.nodes[g.root.idx()].clone();
            g.nodes.push(copy);
            g.root = NodeId((g.nodes.len() - 1) as u32);
        }
        g
    }
}

/// Builder for hand-made graphs; cycles are created by reserving a node id
/// before its label is known.
pub struct GraphBuilder {
    ctx: Context,
    nodes: Vec<Option<NodeLabel>>,
}

impl GraphBuilder {
    pub fn new(ctx: Context) -> Self {
        Self {
            ctx,
            nodes: Vec::new(),
        }
    }

    pub fn reserve(&mut self) -> NodeId {
        self.nodes.push(None);
        NodeId((self.nodes.len() - 1) as u32)
    }

    pub fn set(&mut self, id: NodeId, label: NodeLabel) {
        self.nodes[id.idx()] = Some(label);
    }

    pub fn node(&mut self, label: NodeLabel) -> NodeId {
        self.nodes.push(Some(label));
        NodeId((self.nodes.len() - 1) as u32)
    }

    pub fn app(&mut self, left: NodeId, right: NodeId) -> NodeId {
        self.node(NodeLabel::App(left, right))
    }

    pub fn abs(&mut self, body: NodeId) -> NodeId {
        self.node(NodeLabel::Abs(body, None))
    }

    pub fn abs_named(&mut self, name: impl Into<String>, body: NodeId) -> NodeId {
        self.node(NodeLabel::Abs(body, Some(name.into())))
    }

    pub fn op(&mut self, symbol: impl Into<String>, args: Vec<NodeId>) -> NodeId {
        self.node(NodeLabel::Op(symbol.into(), args))
    }

    pub fn free(&mut self, name: impl Into<String>) -> NodeId {
        self.node(NodeLabel::Free(name.into()))
    }

    pub fn bound(&mut self, index: u32) -> NodeId {
        self.node(NodeLabel::Bound(index))
    }

    pub fn bottom(&mut self) -> NodeId {
        self.node(NodeLabel::Bottom)
    }

    pub fn finish(self, root: NodeId) -> Result<TermGraph, GraphError> {
        let mut nodes = Vec::with_capacity(self.nodes.len());
        for (i, n) in self.nodes.into_iter().enumerate() {
            nodes.push(n.ok_or(GraphError::UnsetNode(i as u32))?);
        }
        TermGraph::new(nodes, root, self.ctx)
    }
}

/// Minimum number of `Abs` nodes strictly above each node over all paths
/// from the root, with a parent map for witness paths. Unreachable nodes
/// get `usize::MAX`.
fn min_binder_depth(g: &TermGraph) -> (Vec<usize>, Vec<Option<NodeId>>) {
    let n = g.node_count();
    let mut dist = vec![usize::MAX; n];
    let mut parent: Vec<Option<NodeId>> = vec![None; n];
    let mut queue = VecDeque::new();
    dist[g.root.idx()] = 0;
    queue.push_back(g.root);
    // 0-1 BFS: an edge out of an Abs node costs one binder, others cost none.
    while let Some(u) = queue.pop_front() {
        let w = usize::from(g.nodes[u.idx()].is_abs());
        for c in g.nodes[u.idx()].children() {
            let nd = dist[u.idx()] + w;
            if nd < dist[c.idx()] {
                dist[c.idx()] = nd;
                parent[c.idx()] = Some(u);
                if w == 0 {
                    queue.push_front(c);
                } else {
                    queue.push_back(c);
                }
            }
        }
    }
    (dist, parent)
}

fn witness_path(parent: &[Option<NodeId>], end: NodeId) -> Vec<u32> {
    let mut path = vec![end.0];
    let mut cur = end;
    while let Some(p) = parent[cur.idx()] {
        path.push(p.0);
        cur = p;
    }
    path.reverse();
    path
}

/// Signature-independent part of validation: reachability, binder-depth
/// soundness, and context membership of free variables.
fn validate_core(g: &TermGraph) -> Result<(), GraphError> {
    let (dist, parent) = min_binder_depth(g);
    for (i, d) in dist.iter().enumerate() {
        if *d == usize::MAX {
            return Err(GraphError::Unreachable(i as u32));
        }
    }
    for (i, label) in g.nodes.iter().enumerate() {
        match label {
            NodeLabel::Bound(index) => {
                if *index as usize >= dist[i] {
                    return Err(GraphError::UnsoundIndex {
                        node: i as u32,
                        index: *index,
                        depth: dist[i],
                        path: witness_path(&parent, NodeId(i as u32)),
                    });
                }
            }
            NodeLabel::Free(x) if !g.ctx.contains(x) => {
                return Err(GraphError::FreeVarNotInContext(x.clone()));
            }
            _ => {}
        }
    }
    Ok(())
}

/// Full validation: every node reachable, no dangling edges (enforced on
/// construction), bound indices covered by `Abs` nodes on every root path,
/// free names in the context, and operation arities matching `sig`.
pub fn validate_graph(g: &TermGraph, sig: &Signature) -> Result<(), GraphError> {
    validate_core(g)?;
    for label in &g.nodes {
        if let NodeLabel::Op(s, args) = label {
            let arity = sig
                .arity(s)
                .ok_or_else(|| GraphError::UnknownSymbol(s.clone()))?;
            if arity != args.len() {
                return Err(GraphError::Arity {
                    symbol: s.clone(),
                    expected: arity,
                    got: args.len(),
                });
            }
        }
    }
    Ok(())
}

/// Embeds a finite term as an acyclic graph, one node per subterm
/// occurrence, in preorder (the root is node 0).
pub fn graph_from_term(t: &Term, ctx: &Context) -> TermGraph {
    fn go(t: &Term, nodes: &mut Vec<NodeLabel>) -> NodeId {
        let id = NodeId(nodes.len() as u32);
        nodes.push(NodeLabel::Bottom);
        let label = match t {
            Term::Free(x) => NodeLabel::Free(x.clone()),
            Term::Bound(i) => NodeLabel::Bound(*i),
            Term::Bottom => NodeLabel::Bottom,
            Term::App(l, r) => {
                let a = go(l, nodes);
                let b = go(r, nodes);
                NodeLabel::App(a, b)
            }
            Term::Abs(b, h) => {
                let body = go(b, nodes);
                NodeLabel::Abs(body, h.clone())
            }
            Term::Op(s, args) => {
                let ids = args.iter().map(|a| go(a, nodes)).collect();
                NodeLabel::Op(s.clone(), ids)
            }
        };
        nodes[id.idx()] = label;
        id
    }
    let mut nodes = Vec::new();
    let root = go(t, &mut nodes);
    TermGraph {
        nodes,
        root,
        ctx: ctx.clone(),
    }
}

/// The depth-`k` cut of the unfolding: expansion stops with `Bottom` once
/// the depth budget is spent. Output size can be exponential in `k` on
/// graphs with shared children.
pub fn unfold(g: &TermGraph, k: usize) -> Term {
    fn go(g: &TermGraph, id: NodeId, fuel: usize) -> Term {
        if fuel == 0 {
            return Term::Bottom;
        }
        match g.node(id) {
            NodeLabel::Free(x) => Term::Free(x.clone()),
            NodeLabel::Bound(i) => Term::Bound(*i),
            NodeLabel::Bottom => Term::Bottom,
            NodeLabel::App(a, b) => Term::App(
                Box::new(go(g, *a, fuel - 1)),
                Box::new(go(g, *b, fuel - 1)),
            ),
            NodeLabel::Abs(b, h) => Term::Abs(Box::new(go(g, *b, fuel - 1)), h.clone()),
            NodeLabel::Op(s, args) => Term::Op(
                s.clone(),
                args.iter().map(|a| go(g, *a, fuel - 1)).collect(),
            ),
        }
    }
    go(g, g.root, k)
}

/// Stable partition of the given labels by bisimilarity: nodes end in the
/// same block iff their infinite unfoldings agree. Deterministic block
/// numbering (first member in node order).
fn refine(labels: &[NodeLabel]) -> Vec<usize> {
    let n = labels.len();
    let mut block = vec![0usize; n];
    let mut seen: BTreeMap<LocalKey, usize> = BTreeMap::new();
    for (i, label) in labels.iter().enumerate() {
        let next = seen.len();
        block[i] = *seen.entry(local_key(label)).or_insert(next);
    }
    let mut count = seen.len();
    loop {
        let mut table: BTreeMap<(usize, Vec<usize>), usize> = BTreeMap::new();
        let mut next_block = vec![0usize; n];
        for (i, label) in labels.iter().enumerate() {
            let sig = (
                block[i],
                label.children().iter().map(|c| block[c.idx()]).collect(),
            );
            let fresh = table.len();
            next_block[i] = *table.entry(sig).or_insert(fresh);
        }
        let next_count = table.len();
        block = next_block;
        if next_count == count {
            return block;
        }
        count = next_count;
    }
}

/// Decides whether two graphs present alpha-equivalent infinite terms.
/// Both must be over the same context.
pub fn bisim_eq(g: &TermGraph, h: &TermGraph) -> Result<bool, GraphError> {
    if g.ctx != h.ctx {
        return Err(GraphError::ContextMismatch {
            left: g.ctx.clone(),
            right: h.ctx.clone(),
        });
    }
    let offset = g.node_count() as u32;
    let mut labels: Vec<NodeLabel> = g.nodes.clone();
    labels.extend(
        h.nodes
            .iter()
            .map(|l| l.map_children(|c| NodeId(c.0 + offset))),
    );
    let block = refine(&labels);
    Ok(block[g.root.idx()] == block[(h.root.0 + offset) as usize])
}

/// Compares the depth-`k` cuts of two unfoldings without materializing
/// them (memoized product walk). Both graphs must share a context.
pub fn cut_eq(g: &TermGraph, h: &TermGraph, k: usize) -> Result<bool, GraphError> {
    if g.ctx != h.ctx {
        return Err(GraphError::ContextMismatch {
            left: g.ctx.clone(),
            right: h.ctx.clone(),
        });
    }
    fn go(
        g: &TermGraph,
        h: &TermGraph,
        u: NodeId,
        v: NodeId,
        fuel: usize,
        memo: &mut HashMap<(u32, u32, usize), bool>,
    ) -> bool {
        if fuel == 0 {
            return true;
        }
        if let Some(&r) = memo.get(&(u.0, v.0, fuel)) {
            return r;
        }
        let (lu, lv) = (g.node(u), h.node(v));
        let r = if local_key(lu) != local_key(lv) {
            false
        } else {
            lu.children()
                .into_iter()
                .zip(lv.children())
                .all(|(a, b)| go(g, h, a, b, fuel - 1, memo))
        };
        memo.insert((u.0, v.0, fuel), r);
        r
    }
    Ok(go(g, h, g.root, h.root, k, &mut HashMap::new()))
}

/// Quotient by bisimilarity, restricted to the reachable part: the unique
/// minimal presentation of the same infinite term. Nodes are ordered by
/// breadth-first discovery from the root, children in constructor order.
pub fn minimize(g: &TermGraph) -> TermGraph {
    // Restrict to the reachable part first.
    let mut order = Vec::new();
    let mut seen = vec![false; g.node_count()];
    let mut queue = VecDeque::from([g.root]);
    seen[g.root.idx()] = true;
    while let Some(u) = queue.pop_front() {
        order.push(u);
        for c in g.nodes[u.idx()].children() {
            if !seen[c.idx()] {
                seen[c.idx()] = true;
                queue.push_back(c);
            }
        }
    }
    let mut remap = vec![NodeId(0); g.node_count()];
    for (new, old) in order.iter().enumerate() {
        remap[old.idx()] = NodeId(new as u32);
    }
    let reach_labels: Vec<NodeLabel> = order
        .iter()
        .map(|old| g.nodes[old.idx()].map_children(|c| remap[c.idx()]))
        .collect();

    let block = refine(&reach_labels);
    // Representative of each block: its first member in BFS order, which
    // also supplies the display hint.
    let nblocks = block.iter().max().map_or(0, |m| m + 1);
    let mut rep = vec![usize::MAX; nblocks];
    for (i, b) in block.iter().enumerate() {
        if rep[*b] == usize::MAX {
            rep[*b] = i;
        }
    }
    // BFS over blocks from the root block fixes the output order.
    let root_block = block[0];
    let mut new_id = vec![usize::MAX; nblocks];
    let mut out_blocks = Vec::new();
    new_id[root_block] = 0;
    out_blocks.push(root_block);
    let mut queue = VecDeque::from([root_block]);
    while let Some(b) = queue.pop_front() {
        for c in reach_labels[rep[b]].children() {
            let cb = block[c.idx()];
            if new_id[cb] == usize::MAX {
                new_id[cb] = out_blocks.len();
                out_blocks.push(cb);
                queue.push_back(cb);
            }
        }
    }
    let nodes: Vec<NodeLabel> = out_blocks
        .iter()
        .map(|b| reach_labels[rep[*b]].map_children(|c| NodeId(new_id[block[c.idx()]] as u32)))
        .collect();
    TermGraph {
        nodes,
        root: NodeId(0),
        ctx: g.ctx.clone(),
    }
}

/// Number of distinct subtrees of the unfolding, i.e. the node count of
/// the bisimulation quotient.
pub fn subtree_count(g: &TermGraph) -> usize {
    minimize(g).node_count()
}

/// Applies a total renaming `map : g.ctx -> to` to the free-variable nodes.
pub fn rename_graph(
    g: &TermGraph,
    to: &Context,
    map: &BTreeMap<String, String>,
) -> Result<TermGraph, GraphError> {
    for name in g.ctx.names() {
        let target = map
            .get(name)
            .ok_or_else(|| GraphError::MissingMapping(name.clone()))?;
        if !to.contains(target) {
            return Err(GraphError::FreeVarNotInContext(target.clone()));
        }
    }
    let nodes = g
        .nodes
        .iter()
        .map(|label| match label {
            NodeLabel::Free(x) => NodeLabel::Free(map[x].clone()),
            other => other.clone(),
        })
        .collect();
    Ok(TermGraph {
        nodes,
        root: g.root,
        ctx: to.clone(),
    })
}

/// Simultaneous substitution by splicing: every `Free(x)` node is replaced
/// by one shared copy of `map[x]`, so all occurrences of `x` point at the
/// same subgraph. The result is over `to` and pruned to the reachable
/// part; it is not minimized.
pub fn substitute_graph(
    g: &TermGraph,
    to: &Context,
    map: &BTreeMap<String, TermGraph>,
) -> Result<TermGraph, GraphError> {
    for name in g.ctx.names() {
        let value = map
            .get(name)
            .ok_or_else(|| GraphError::MissingMapping(name.clone()))?;
        if value.ctx != *to {
            return Err(GraphError::ContextMismatch {
                left: value.ctx.clone(),
                right: to.clone(),
            });
        }
    }
    let mut nodes: Vec<NodeLabel> = Vec::new();
    // One shared copy of each replacement graph, keyed by variable name.
    let mut copy_root: BTreeMap<&str, NodeId> = BTreeMap::new();
    for name in g.ctx.names() {
        let value = &map[name];
        let base = nodes.len() as u32;
        nodes.extend(
            value
                .nodes
                .iter()
                .map(|l| l.map_children(|c| NodeId(c.0 + base))),
        );
        copy_root.insert(name.as_str(), NodeId(value.root.0 + base));
    }
    // Nodes of g follow; Free nodes become aliases for the copy roots.
    let base = nodes.len() as u32;
    let mut alias: Vec<NodeId> = Vec::with_capacity(g.node_count());
    for (i, label) in g.nodes.iter().enumerate() {
        match label {
            NodeLabel::Free(x) => {
                let root = *copy_root
                    .get(x.as_str())
                    .ok_or_else(|| GraphError::FreeVarNotInContext(x.clone()))?;
                alias.push(root);
            }
            _ => alias.push(NodeId(i as u32 + base)),
        }
    }
    for label in &g.nodes {
        nodes.push(label.map_children(|c| alias[c.idx()]));
    }
    let root = alias[g.root.idx()];
    let assembled = TermGraph {
        nodes,
        root,
        ctx: to.clone(),
    };
    Ok(restrict_reachable(&assembled))
}

/// New graph applying `l` to `r`: an App root over spliced copies of both
/// graphs. Contexts must agree.
pub fn app_graph(l: &TermGraph, r: &TermGraph) -> Result<TermGraph, GraphError> {
    if l.ctx != r.ctx {
        return Err(GraphError::ContextMismatch {
            left: l.ctx.clone(),
            right: r.ctx.clone(),
        });
    }
    let mut nodes = vec![NodeLabel::Bottom];
    let lbase = nodes.len() as u32;
    nodes.extend(l.nodes.iter().map(|n| n.map_children(|c| NodeId(c.0 + lbase))));
    let rbase = nodes.len() as u32;
    nodes.extend(r.nodes.iter().map(|n| n.map_children(|c| NodeId(c.0 + rbase))));
    nodes[0] = NodeLabel::App(NodeId(l.root.0 + lbase), NodeId(r.root.0 + rbase));
    Ok(TermGraph {
        nodes,
        root: NodeId(0),
        ctx: l.ctx.clone(),
    })
}

/// New graph abstracting over `body`: an Abs root above a spliced copy.
/// In the nameless reading, index-0 references of `body` that were open
/// become bound by the new Abs.
pub fn abs_graph(body: &TermGraph, hint: Option<&str>) -> TermGraph {
    let mut nodes = vec![NodeLabel::Bottom];
    let base = nodes.len() as u32;
    nodes.extend(
        body.nodes
            .iter()
            .map(|n| n.map_children(|c| NodeId(c.0 + base))),
    );
    nodes[0] = NodeLabel::Abs(NodeId(body.root.0 + base), hint.map(str::to_string));
    TermGraph {
        nodes,
        root: NodeId(0),
        ctx: body.ctx.clone(),
    }
}

/// Reachable part of the graph in BFS order from the root.
pub(crate) fn restrict_reachable(g: &TermGraph) -> TermGraph {
    let mut order = Vec::new();
    let mut new_id = vec![usize::MAX; g.node_count()];
    let mut queue = VecDeque::from([g.root]);
    new_id[g.root.idx()] = 0;
    order.push(g.root);
    while let Some(u) = queue.pop_front() {
        for c in g.nodes[u.idx()].children() {
            if new_id[c.idx()] == usize::MAX {
                new_id[c.idx()] = order.len();
                order.push(c);
                queue.push_back(c);
            }
        }
    }
    let nodes = order
        .iter()
        .map(|old| g.nodes[old.idx()].map_children(|c| NodeId(new_id[c.idx()] as u32)))
        .collect();
    TermGraph {
        nodes,
        root: NodeId(0),
        ctx: g.ctx.clone(),
    }
}

/// Right-hand side of one flat equation: a single constructor applied to
/// equation variables, or a constant graph spliced in as-is.
///
/// Constant graphs normally present closed-or-contextual values; a
/// single-node `Bound(k)` constant is also accepted so schemes can refer
/// to binders introduced by `Abs` rules, and binder-depth soundness of
/// such references is checked on the assembled graph.
#[derive(Debug, Clone)]
pub enum FlatRule {
    App(String, String),
    Abs(String, Option<String>),
    Op(String, Vec<String>),
    Const(TermGraph),
}

/// A system of flat equations over a shared context. Every equation
/// variable is defined exactly once; rules may reference variables
/// defined later (or themselves), which is how cycles arise.
#[derive(Debug, Clone)]
pub struct FlatSystem {
    ctx: Context,
    rules: Vec<(String, FlatRule)>,
}

impl FlatSystem {
    pub fn new(ctx: Context, rules: Vec<(String, FlatRule)>) -> Result<Self, GraphError> {
        let mut defined = BTreeSet::new();
        for (name, _) in &rules {
            if !defined.insert(name.clone()) {
                return Err(GraphError::DuplicateVariable(name.clone()));
            }
        }
        for (_, rule) in &rules {
            let refs: Vec<&String> = match rule {
                FlatRule::App(a, b) => vec![a, b],
                FlatRule::Abs(b, _) => vec![b],
                FlatRule::Op(_, args) => args.iter().collect(),
                FlatRule::Const(_) => Vec::new(),
            };
            for r in refs {
                if !defined.contains(r) {
                    return Err(GraphError::UndefinedVariable(r.clone()));
                }
            }
            if let FlatRule::Const(c) = rule {
                if c.ctx != ctx {
                    return Err(GraphError::ContextMismatch {
                        left: c.ctx.clone(),
                        right: ctx.clone(),
                    });
                }
            }
        }
        Ok(Self { ctx, rules })
    }

    pub fn context(&self) -> &Context {
        &self.ctx
    }

    pub fn rules(&self) -> &[(String, FlatRule)] {
        &self.rules
    }

    pub fn variables(&self) -> impl Iterator<Item = &str> {
        self.rules.iter().map(|(n, _)| n.as_str())
    }
}

/// Solves the system for every equation variable. Each variable must have
/// a valid standalone graph; use [`solve_flat_system_roots`] when helper
/// variables live under binders of other rules.
pub fn solve_flat_system(s: &FlatSystem) -> Result<BTreeMap<String, TermGraph>, GraphError> {
    let roots: Vec<String> = s.variables().map(str::to_string).collect();
    solve_flat_system_roots(s, &roots)
}

/// Solves the system for the requested roots only. The solution assigns
/// one node per variable (constants are spliced by copy); each returned
/// graph is the reachable part from its variable's node, validated for
/// binder-depth soundness and minimized.
pub fn solve_flat_system_roots(
    s: &FlatSystem,
    roots: &[String],
) -> Result<BTreeMap<String, TermGraph>, GraphError> {
    let mut nodes: Vec<NodeLabel> = Vec::new();
    let mut var_node: BTreeMap<&str, NodeId> = BTreeMap::new();
    for (name, rule) in &s.rules {
        match rule {
            FlatRule::Const(c) => {
                let base = nodes.len() as u32;
                nodes.extend(
                    c.nodes
                        .iter()
                        .map(|l| l.map_children(|ch| NodeId(ch.0 + base))),
                );
                var_node.insert(name, NodeId(c.root.0 + base));
            }
            _ => {
                nodes.push(NodeLabel::Bottom);
                var_node.insert(name, NodeId(nodes.len() as u32 - 1));
            }
        }
    }
    for (name, rule) in &s.rules {
        let id = var_node[name.as_str()];
        let label = match rule {
            FlatRule::App(a, b) => {
                NodeLabel::App(var_node[a.as_str()], var_node[b.as_str()])
            }
            FlatRule::Abs(b, hint) => NodeLabel::Abs(var_node[b.as_str()], hint.clone()),
            FlatRule::Op(sym, args) => NodeLabel::Op(
                sym.clone(),
                args.iter().map(|a| var_node[a.as_str()]).collect(),
            ),
            FlatRule::Const(_) => continue,
        };
        nodes[id.idx()] = label;
    }
    let pool = TermGraph {
        nodes,
        root: NodeId(0),
        ctx: s.ctx.clone(),
    };
    let mut out = BTreeMap::new();
    for r in roots {
        let node = *var_node
            .get(r.as_str())
            .ok_or_else(|| GraphError::UndefinedVariable(r.clone()))?;
        let rooted = TermGraph {
            nodes: pool.nodes.clone(),
            root: node,
            ctx: s.ctx.clone(),
        };
        let g = restrict_reachable(&rooted);
        validate_core(&g)?;
        out.insert(r.clone(), minimize(&g));
    }
    Ok(out)
}

/// DOT rendering with nodes in BFS order from the root; the root is drawn
/// with doubled peripheries. Edge labels give child positions for nodes
/// with more than one child.
pub fn to_dot(g: &TermGraph) -> String {
    to_dot_named(g, "term")
}

pub fn to_dot_named(g: &TermGraph, name: &str) -> String {
    let g = restrict_reachable(g);
    let mut out = String::new();
    out.push_str(&format!("digraph \"{name}\" {{\n"));
    for (i, label) in g.nodes.iter().enumerate() {
        let text = match label {
            NodeLabel::App(..) => "@".to_string(),
            NodeLabel::Abs(_, Some(h)) if crate::lex::is_ident(h) => format!("\u{3bb} {h}"),
            NodeLabel::Abs(..) => "\u{3bb}".to_string(),
            NodeLabel::Op(s, _) => s.clone(),
            NodeLabel::Free(x) => x.clone(),
            NodeLabel::Bound(k) => format!("^{k}"),
            NodeLabel::Bottom => "\u{22a5}".to_string(),
        };
        let marker = if i == 0 { ", peripheries=2" } else { "" };
        out.push_str(&format!("  n{i} [label=\"{text}\"{marker}];\n"));
    }
    for (i, label) in g.nodes.iter().enumerate() {
        let children = label.children();
        for (pos, c) in children.iter().enumerate() {
            if children.len() > 1 {
                out.push_str(&format!("  n{i} -> n{} [label=\"{pos}\"];\n", c.0));
            } else {
                out.push_str(&format!("  n{i} -> n{};\n", c.0));
            }
        }
    }
    out.push_str("}\n");
    out
}
