//! Seeded random generators for terms, graphs, schemes, substitutions,
//! and model-side tables. Everything draws from a caller-supplied
//! [`ChaCha8Rng`], so a fixed seed reproduces the exact same inputs on
//! every run and platform; there is no global randomness anywhere.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cpo::{apply_rules, decode_tuple, ContextMap, CpoError, Model};
use crate::graph::{
    bisim_eq, minimize, restrict_reachable, validate_graph, GraphError, NodeId, NodeLabel,
    TermGraph,
};
use crate::scheme::{check_guarded, RecursionScheme};
use crate::term::{Context, Signature, Term};

/// Deterministic generator for a seed.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

const BINDER_HINTS: [Option<&str>; 4] = [None, Some("x"), Some("u"), Some("v")];

/// A well-formed term over the signature and context with roughly
/// `max_size` constructors. Bound indices always point at real binders.
pub fn random_term<R: Rng>(rng: &mut R, sig: &Signature, ctx: &Context, max_size: usize) -> Term {
    gen_term(rng, sig, ctx, max_size.max(1), 0)
}

fn gen_term<R: Rng>(
    rng: &mut R,
    sig: &Signature,
    ctx: &Context,
    budget: usize,
    depth: u32,
) -> Term {
    if budget <= 1 || rng.gen_bool(0.2) {
        let mut picks: Vec<Term> = vec![Term::Bottom];
        for n in ctx.names() {
            picks.push(Term::Free(n.clone()));
        }
        for i in 0..depth {
            picks.push(Term::Bound(i));
        }
        for (s, a) in sig.iter() {
            if a == 0 {
                picks.push(Term::Op(s.to_string(), Vec::new()));
            }
        }
        return picks.choose(rng).cloned().expect("bottom is always a leaf");
    }
    enum Kind {
        App,
        Abs,
        Op(String, usize),
    }
    let mut kinds = vec![Kind::App, Kind::App, Kind::Abs, Kind::Abs];
    for (s, a) in sig.iter() {
        if a >= 1 {
            kinds.push(Kind::Op(s.to_string(), a));
        }
    }
    match &kinds[rng.gen_range(0..kinds.len())] {
        Kind::App => {
            let left = rng.gen_range(1..budget);
            Term::App(
                Box::new(gen_term(rng, sig, ctx, left, depth)),
                Box::new(gen_term(rng, sig, ctx, budget - left, depth)),
            )
        }
        Kind::Abs => {
            let hint = BINDER_HINTS
                .choose(rng)
                .copied()
                .flatten()
                .map(str::to_string);
            Term::Abs(Box::new(gen_term(rng, sig, ctx, budget - 1, depth + 1)), hint)
        }
        Kind::Op(s, a) => {
            let each = ((budget - 1) / a).max(1);
            let args = (0..*a)
                .map(|_| gen_term(rng, sig, ctx, each, depth))
                .collect();
            Term::Op(s.clone(), args)
        }
    }
}

/// A valid term graph with at most `max_nodes` nodes: random labels and
/// edges, then repaired until it validates (unsound bound indices become
/// `⊥`, unreachable nodes are dropped).
pub fn random_graph<R: Rng>(
    rng: &mut R,
    sig: &Signature,
    ctx: &Context,
    max_nodes: usize,
) -> TermGraph {
    let n = rng.gen_range(1..=max_nodes.max(1));
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        labels.push(random_label(rng, sig, ctx, n));
    }
    repair(labels, sig, ctx)
}

fn random_label<R: Rng>(rng: &mut R, sig: &Signature, ctx: &Context, n: usize) -> NodeLabel {
    let pick = |rng: &mut R| NodeId(rng.gen_range(0..n) as u32);
    match rng.gen_range(0..10u8) {
        0..=2 => {
            let (l, r) = (pick(rng), pick(rng));
            NodeLabel::App(l, r)
        }
        3..=4 => {
            let hint = BINDER_HINTS
                .choose(rng)
                .copied()
                .flatten()
                .map(str::to_string);
            let body = pick(rng);
            NodeLabel::Abs(body, hint)
        }
        5 => NodeLabel::Bottom,
        6..=7 => match ctx.names().first() {
            Some(_) => {
                let name = ctx.names()[rng.gen_range(0..ctx.len())].clone();
                NodeLabel::Free(name)
            }
            None => NodeLabel::Bottom,
        },
        8 => NodeLabel::Bound(rng.gen_range(0..3)),
        _ => {
            let syms: Vec<(String, usize)> =
                sig.iter().map(|(s, a)| (s.to_string(), a)).collect();
            match syms.get(rng.gen_range(0..syms.len().max(1))) {
                Some((s, a)) => {
                    let args = (0..*a).map(|_| pick(rng)).collect();
                    NodeLabel::Op(s.clone(), args)
                }
                None => {
                    let (l, r) = (pick(rng), pick(rng));
                    NodeLabel::App(l, r)
                }
            }
        }
    }
}

/// Patches a raw label vector into a valid graph. Each unsound index patch
/// removes a bound-variable node and each reachability pass shrinks the
/// graph, so this terminates.
fn repair(mut labels: Vec<NodeLabel>, sig: &Signature, ctx: &Context) -> TermGraph {
    loop {
        let g = TermGraph::new(labels.clone(), NodeId(0), ctx.clone())
            .expect("generated edges stay in range");
        match validate_graph(&g, sig) {
            Ok(()) => return g,
            Err(GraphError::UnsoundIndex { node, .. }) => {
                labels[node as usize] = NodeLabel::Bottom;
            }
            Err(GraphError::Unreachable(_)) => {
                labels = restrict_reachable(&g).nodes().to_vec();
            }
            Err(e) => unreachable!("generator stays within signature and context: {e}"),
        }
    }
}

/// A pair of valid graphs over one context: sometimes a bisimilar variant
/// of the first (its minimization, or a node duplication), sometimes a
/// perturbed or unrelated graph. Consumers decide equality themselves.
pub fn random_graph_pair<R: Rng>(
    rng: &mut R,
    sig: &Signature,
    ctx: &Context,
    max_nodes: usize,
) -> (TermGraph, TermGraph) {
    let g = random_graph(rng, sig, ctx, max_nodes);
    let h = match rng.gen_range(0..4u8) {
        0 => minimize(&g),
        1 => duplicate_node(rng, &g),
        2 => perturb_graph(rng, &g, sig)
            .unwrap_or_else(|| random_graph(rng, sig, ctx, max_nodes)),
        _ => random_graph(rng, sig, ctx, max_nodes),
    };
    (g, h)
}

/// Copies one node and redirects a random subset of the edges into it to
/// the copy; the result is bisimilar to the input by construction.
pub fn duplicate_node<R: Rng>(rng: &mut R, g: &TermGraph) -> TermGraph {
    let n = g.node_count();
    let target = NodeId(rng.gen_range(0..n) as u32);
    let fresh = NodeId(n as u32);
    let mut labels: Vec<NodeLabel> = g.nodes().to_vec();
    labels.push(labels[target.idx()].clone());
    for lab in labels.iter_mut().take(n) {
        *lab = lab.map_children(|c| {
            if c == target && rng.gen_bool(0.5) {
                fresh
            } else {
                c
            }
        });
    }
    let root = if g.root() == target && rng.gen_bool(0.5) {
        fresh
    } else {
        g.root()
    };
    // The copy sees a subset of the original's incoming paths, so every
    // bound index under it stays sound; whichever of the two ends up
    // unreferenced is dropped here.
    let widened = TermGraph::new(labels, root, g.context().clone())
        .expect("duplication preserves edge ranges");
    restrict_reachable(&widened)
}

/// One structural mutation of the graph (child swap, edge retarget, label
/// change) that still validates but is not bisimilar to the input. `None`
/// if no attempt out of 40 produced one.
pub fn perturb_graph<R: Rng>(rng: &mut R, g: &TermGraph, sig: &Signature) -> Option<TermGraph> {
    for _ in 0..40 {
        let mut labels = g.nodes().to_vec();
        let v = rng.gen_range(0..labels.len());
        let Some(mutated) = mutate_label(rng, &labels[v], g.context(), labels.len()) else {
            continue;
        };
        labels[v] = mutated;
        let Ok(h) = TermGraph::new(labels, g.root(), g.context().clone()) else {
            continue;
        };
        if validate_graph(&h, sig).is_err() {
            continue;
        }
        if !bisim_eq(g, &h).expect("contexts are equal") {
            return Some(h);
        }
    }
    None
}

fn mutate_label<R: Rng>(
    rng: &mut R,
    lab: &NodeLabel,
    ctx: &Context,
    n: usize,
) -> Option<NodeLabel> {
    let pick = |rng: &mut R| NodeId(rng.gen_range(0..n) as u32);
    let mut options: Vec<NodeLabel> = Vec::new();
    match lab {
        NodeLabel::App(l, r) => {
            if l != r {
                options.push(NodeLabel::App(*r, *l));
            }
            options.push(NodeLabel::App(pick(rng), *r));
            options.push(NodeLabel::App(*l, pick(rng)));
        }
        NodeLabel::Abs(_, hint) => {
            options.push(NodeLabel::Abs(pick(rng), hint.clone()));
        }
        NodeLabel::Op(s, args) if !args.is_empty() => {
            let mut alt = args.clone();
            let slot = rng.gen_range(0..alt.len());
            alt[slot] = pick(rng);
            options.push(NodeLabel::Op(s.clone(), alt));
        }
        NodeLabel::Op(..) => {}
        NodeLabel::Free(x) => {
            for name in ctx.names() {
                if name != x {
                    options.push(NodeLabel::Free(name.clone()));
                }
            }
            options.push(NodeLabel::Bottom);
        }
        NodeLabel::Bound(i) => {
            options.push(NodeLabel::Bottom);
            if *i > 0 {
                options.push(NodeLabel::Bound(i - 1));
            }
        }
        NodeLabel::Bottom => {
            for name in ctx.names() {
                options.push(NodeLabel::Free(name.clone()));
            }
        }
    }
    options.choose(rng).cloned()
}

/// A guarded recursion scheme over the context `{y}` and the signature
/// `{s/2, o/1, c/0}`, with up to `max_rules` nonterminals `p0, p1, …`.
/// Rule bodies whose head would be a bare nonterminal are wrapped in `o`
/// to keep the scheme guarded.
pub fn random_scheme<R: Rng>(rng: &mut R, max_rules: usize) -> RecursionScheme {
    let sig = Signature::new([("s", 2usize), ("o", 1), ("c", 0)]).expect("fixed signature");
    let ctx = Context::new(["y"]).expect("fixed context");
    let count = rng.gen_range(1..=max_rules.max(1));
    let names: Vec<String> = (0..count).map(|i| format!("p{i}")).collect();
    let ctx_ext = Context::new(
        ctx.names()
            .iter()
            .cloned()
            .chain(names.iter().cloned()),
    )
    .expect("generated names are distinct");
    let mut rules = Vec::with_capacity(count);
    for name in &names {
        let mut body = gen_term(rng, &sig, &ctx_ext, 8, 0);
        if matches!(&body, Term::Free(x) if names.contains(x)) {
            body = Term::Op("o".to_string(), vec![body]);
        }
        rules.push((name.clone(), body));
    }
    let s = RecursionScheme::new(sig, ctx, rules).expect("generated schemes are well-formed");
    debug_assert!(check_guarded(&s).is_none());
    s
}

/// One random well-formed replacement term over `to` per variable of
/// `from`.
pub fn random_substitution<R: Rng>(
    rng: &mut R,
    sig: &Signature,
    from: &Context,
    to: &Context,
    max_size: usize,
) -> BTreeMap<String, Term> {
    from.names()
        .iter()
        .map(|n| (n.clone(), random_term(rng, sig, to, max_size)))
        .collect()
}

/// A uniformly sampled monotone table over the context: cells are filled
/// in index order (a linear extension of the product order in tower
/// models), each value drawn from the up-set of the already-assigned cells
/// below it.
pub fn random_context_map<R: Rng>(
    rng: &mut R,
    ctx: &Context,
    m: &Model,
) -> Result<ContextMap, CpoError> {
    let k = m.dsize();
    let width = ctx.len();
    let mut table = ContextMap::bottom(ctx, m)?.table().to_vec();
    for i in 0..table.len() {
        let t = decode_tuple(i, k, width);
        let candidates: Vec<usize> = (0..k)
            .filter(|&v| {
                (0..i).all(|j| {
                    let tj = decode_tuple(j, k, width);
                    let below = tj.iter().zip(&t).all(|(a, b)| m.d().le(*a, *b));
                    !below || m.le(table[j], v)
                })
            })
            .collect();
        table[i] = *candidates
            .choose(rng)
            .expect("the top element satisfies every lower constraint");
    }
    ContextMap::new(ctx.clone(), table, m)
}

/// A random post-fixed point of the scheme's rule operator: start from
/// random monotone tables and join in one rule application at a time until
/// the candidate absorbs it.
pub fn random_post_fixed<R: Rng>(
    rng: &mut R,
    s: &RecursionScheme,
    m: &Model,
) -> Result<BTreeMap<String, ContextMap>, CpoError> {
    let mut cand: BTreeMap<String, ContextMap> = BTreeMap::new();
    for p in s.nonterminals() {
        cand.insert(p.clone(), random_context_map(rng, s.context(), m)?);
    }
    loop {
        let next = apply_rules(s, m, &cand)?;
        let mut joined = BTreeMap::new();
        let mut stable = true;
        for p in s.nonterminals() {
            let j = cand[p].join(&next[p], m)?;
            stable &= j == cand[p];
            joined.insert(p.clone(), j);
        }
        if stable {
            return Ok(joined);
        }
        cand = joined;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cpo::{build_tower, check_interpreted, Classification};
    use crate::scheme::{parse_scheme, solve};
    use crate::term::print_term;

    fn sig() -> Signature {
        Signature::new([("s", 2usize), ("o", 1), ("c", 0)]).unwrap()
    }

    fn ctx() -> Context {
        Context::new(["y", "z"]).unwrap()
    }

    #[test]
    fn same_seed_reproduces_terms_and_graphs() {
        let (sig, ctx) = (sig(), ctx());
        let a = random_term(&mut rng(7), &sig, &ctx, 12);
        let b = random_term(&mut rng(7), &sig, &ctx, 12);
        assert_eq!(print_term(&a, &ctx), print_term(&b, &ctx));
        let g = random_graph(&mut rng(7), &sig, &ctx, 8);
        let h = random_graph(&mut rng(7), &sig, &ctx, 8);
        assert!(bisim_eq(&g, &h).unwrap());
        assert_eq!(g.node_count(), h.node_count());
    }

    #[test]
    fn random_terms_validate() {
        let (sig, ctx) = (sig(), ctx());
        let mut r = rng(11);
        for _ in 0..100 {
            let t = random_term(&mut r, &sig, &ctx, 15);
            t.validate(&sig, &ctx).unwrap();
        }
    }

    #[test]
    fn random_graphs_validate_and_respect_the_size_cap() {
        let (sig, ctx) = (sig(), ctx());
        let mut r = rng(13);
        for _ in 0..100 {
            let g = random_graph(&mut r, &sig, &ctx, 8);
            validate_graph(&g, &sig).unwrap();
            assert!(g.node_count() <= 8);
        }
    }

    #[test]
    fn graph_pairs_are_both_valid() {
        let (sig, ctx) = (sig(), ctx());
        let mut r = rng(17);
        let mut equal = 0;
        for _ in 0..60 {
            let (g, h) = random_graph_pair(&mut r, &sig, &ctx, 6);
            validate_graph(&g, &sig).unwrap();
            validate_graph(&h, &sig).unwrap();
            equal += usize::from(bisim_eq(&g, &h).unwrap());
        }
        assert!(equal > 5, "planted bisimilar variants show up ({equal})");
        assert!(equal < 55, "perturbed and fresh graphs show up ({equal})");
    }

    #[test]
    fn duplication_preserves_bisimilarity() {
        let (sig, ctx) = (sig(), ctx());
        let mut r = rng(19);
        for _ in 0..60 {
            let g = random_graph(&mut r, &sig, &ctx, 6);
            let h = duplicate_node(&mut r, &g);
            validate_graph(&h, &sig).unwrap();
            assert!(bisim_eq(&g, &h).unwrap());
        }
    }

    #[test]
    fn perturbation_breaks_bisimilarity_when_it_reports_success() {
        let g = crate::graph::tests::y_graph();
        let mut r = rng(23);
        let mut found = 0;
        for _ in 0..20 {
            if let Some(h) = perturb_graph(&mut r, &g, &Signature::empty()) {
                validate_graph(&h, &Signature::empty()).unwrap();
                assert!(!bisim_eq(&g, &h).unwrap());
                found += 1;
            }
        }
        assert!(found > 0, "the fixpoint graph admits perturbations");
    }

    #[test]
    fn random_schemes_are_guarded_and_solvable() {
        let mut r = rng(29);
        for _ in 0..25 {
            let s = random_scheme(&mut r, 5);
            assert!(check_guarded(&s).is_none());
            let sol = solve(&s).unwrap();
            assert_eq!(sol.len(), s.nonterminals().len());
        }
    }

    #[test]
    fn random_context_maps_are_monotone_and_reproducible() {
        let m = build_tower(2).unwrap();
        let ctx = Context::new(["y"]).unwrap();
        // Construction goes through the validating constructor already;
        // a second pass with the same seed must agree cell for cell.
        let a = random_context_map(&mut rng(31), &ctx, &m).unwrap();
        let b = random_context_map(&mut rng(31), &ctx, &m).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn generated_post_fixed_points_classify_as_fixed_or_post_fixed() {
        let m = build_tower(2).unwrap();
        let s = parse_scheme("Y = \\f. f @ (Y @ f)\n").unwrap();
        for seed in 0..5 {
            let cand = random_post_fixed(&mut rng(seed), &s, &m).unwrap();
            let class = check_interpreted(&s, &m, &cand).unwrap();
            assert!(
                matches!(class, Classification::Fixed | Classification::PostFixed),
                "seed {seed} gave {class:?}"
            );
        }
    }
}
