//! Interpret schemes in finite models: build the tower of monotone
//! function spaces over the 2-chain, compute least solutions by Kleene
//! iteration, and check them against independently generated post-fixed
//! points.

use hors::cpo::{
    build_tower, check_interpreted, decode_tuple, solve_interpreted, Classification,
};
use hors::random::{random_post_fixed, rng};
use hors::scheme::parse_scheme;

const Y_SCHEME: &str = include_str!("../schemes/y.scheme");
const EQ_SCHEME: &str = include_str!("../schemes/eq23.scheme");

fn main() {
    for n in 1..=2 {
        let m = build_tower(n).expect("small towers fit the budget");
        println!(
            "tower {n}: |D| = {}, height = {}",
            m.dsize(),
            m.d().height()
        );
    }

    let m = build_tower(2).expect("fits the budget");
    let scheme = parse_scheme(EQ_SCHEME).expect("the bundled scheme parses");
    let (solution, iterations) = solve_interpreted(&scheme, &m).expect("terms interpret");
    println!("\nleast solution after {iterations} rule applications:");
    for p in scheme.nonterminals() {
        let table = solution[p].table();
        // Strict application sends p1 to ⊥ everywhere; p2 = y @ p1 keeps
        // some information about y.
        let nonbottom = table.iter().filter(|&&v| v != m.bottom()).count();
        println!("  {p}: {nonbottom} of {} entries above bottom", table.len());
        for (i, v) in table.iter().enumerate().filter(|(_, &v)| v != 0) {
            let t = decode_tuple(i, m.dsize(), scheme.context().len());
            println!("    y=#{} -> #{v}", t[0]);
        }
    }
    assert_eq!(
        check_interpreted(&scheme, &m, &solution).expect("candidate is complete"),
        Classification::Fixed
    );
    println!("the solution satisfies its equations exactly");

    // Least means least: every post-fixed point dominates it.
    let y = parse_scheme(Y_SCHEME).expect("the bundled scheme parses");
    let (least, _) = solve_interpreted(&y, &m).expect("terms interpret");
    let mut dominated = 0;
    for seed in 0..10 {
        let candidate = random_post_fixed(&mut rng(seed), &y, &m).expect("joins exist");
        if least["Y"].le(&candidate["Y"], &m) {
            dominated += 1;
        }
    }
    println!("\nleast solution for Y below {dominated}/10 random post-fixed points");
    assert_eq!(dominated, 10);
}
