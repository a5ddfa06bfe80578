//! Decide equality of rational terms by bisimulation: hand-build two
//! different-looking cyclic graphs with the same unfolding, compare them,
//! and minimize one to the canonical representative.

use hors::graph::{bisim_eq, cut_eq, minimize, subtree_count, unfold, GraphBuilder};
use hors::term::{print_term, Context};

fn main() {
    // f applied to itself forever, tightly: g = f @ g.
    let ctx = Context::new(["f"]).expect("distinct names");
    let mut b = GraphBuilder::new(ctx.clone());
    let loop_node = b.reserve();
    let f = b.free("f");
    b.set(loop_node, hors::graph::NodeLabel::App(f, loop_node));
    let tight = b.finish(loop_node).expect("all nodes set");

    // The same term unrolled once: g = f @ (f @ g).
    let mut b = GraphBuilder::new(ctx.clone());
    let outer = b.reserve();
    let f1 = b.free("f");
    let f2 = b.free("f");
    let inner = b.reserve();
    b.set(inner, hors::graph::NodeLabel::App(f2, outer));
    b.set(outer, hors::graph::NodeLabel::App(f1, inner));
    let unrolled = b.finish(outer).expect("all nodes set");

    println!(
        "tight: {} nodes, unrolled: {} nodes",
        tight.node_count(),
        unrolled.node_count()
    );
    println!(
        "bisimilar: {}",
        bisim_eq(&tight, &unrolled).expect("same context")
    );

    // Finite cuts agree at every depth; one deep cut is already decisive
    // once it exceeds the product of the node counts.
    let k = tight.node_count() * unrolled.node_count() + 1;
    println!(
        "cut comparison at k={k}: {}",
        cut_eq(&tight, &unrolled, k).expect("same context")
    );
    println!(
        "sample cut: {}",
        print_term(&unfold(&unrolled, 3), &ctx)
    );

    // Minimization collapses the unrolled copy back to the tight one.
    let canon = minimize(&unrolled);
    println!(
        "minimized unrolled copy: {} nodes ({} distinct subtrees)",
        canon.node_count(),
        subtree_count(&unrolled)
    );
    assert!(bisim_eq(&canon, &tight).expect("same context"));

    // A genuinely different term: f @ (f @ (f @ …)) vs f @ ((f @ f) @ …).
    let mut b = GraphBuilder::new(ctx.clone());
    let root = b.reserve();
    let f3 = b.free("f");
    let skew = b.app(f3, f3);
    b.set(root, hors::graph::NodeLabel::App(skew, root));
    let other = b.finish(root).expect("all nodes set");
    println!(
        "against a different loop: {}",
        bisim_eq(&tight, &other).expect("same context")
    );
}
