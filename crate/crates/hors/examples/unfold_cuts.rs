//! Watch a cyclic solution graph approximate its infinite unfolding: each
//! depth cut replaces everything below the cut line with ⊥, and deeper
//! cuts refine shallower ones.

use hors::graph::unfold;
use hors::scheme::{parse_scheme, solve};
use hors::term::{alpha_eq, print_term};

const EQ_SCHEME: &str = include_str!("../schemes/eq23.scheme");

fn main() {
    let scheme = parse_scheme(EQ_SCHEME).expect("the bundled scheme parses");
    let solution = solve(&scheme).expect("the scheme is guarded");

    for p in ["p1", "p2"] {
        println!("cuts of {p}:");
        for depth in 0..=6 {
            let cut = unfold(&solution[p], depth);
            println!("  k={depth}:  {}", print_term(&cut, scheme.context()));
        }
        println!();
    }

    // A cut at depth k, cut again at j ≤ k, is the depth-j cut: the
    // approximations are coherent.
    let deep = unfold(&solution["p2"], 6);
    for j in 0..=6 {
        let direct = unfold(&solution["p2"], j);
        assert!(alpha_eq(&deep.cut(j), &direct));
    }
    println!("cut coherence holds up to depth 6");
}
