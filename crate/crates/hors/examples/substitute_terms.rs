//! Finite terms as a syntax monoid: parsing, printing, capture-avoiding
//! substitution along a context change, and renaming.

use std::collections::BTreeMap;

use hors::term::{
    alpha_eq, identity_substitution, parse_term, print_term, rename, substitute, Context,
    Signature,
};

fn main() {
    let sig = Signature::new([("pair", 2usize)]).expect("distinct symbols");
    let from = Context::new(["y", "z"]).expect("distinct names");
    let to = Context::new(["w"]).expect("distinct names");

    let t = parse_term("\\x. pair(x @ y, z)", &sig, &from).expect("well-formed");
    println!("t           = {}", print_term(&t, &from));

    // Substitute both context variables by terms over the new context.
    let map = BTreeMap::from([
        (
            "y".to_string(),
            parse_term("\\u. u @ w", &sig, &to).expect("well-formed"),
        ),
        ("z".to_string(), parse_term("w", &sig, &to).expect("well-formed")),
    ]);
    let applied = substitute(&t, &from, &to, &map).expect("total on the context");
    println!("t[y,z := …] = {}", print_term(&applied, &to));

    // The identity substitution is a unit.
    let unit = substitute(&t, &from, &from, &identity_substitution(&from))
        .expect("identity is total");
    assert!(alpha_eq(&unit, &t));
    println!("identity substitution is a unit: true");

    // Renaming is the special case that maps variables to variables.
    let swapped = Context::new(["z", "y"]).expect("distinct names");
    let swap = BTreeMap::from([
        ("y".to_string(), "y".to_string()),
        ("z".to_string(), "z".to_string()),
    ]);
    let renamed = rename(&t, &from, &swapped, &swap).expect("total on the context");
    println!("t over swapped context: {}", print_term(&renamed, &swapped));

    // Binder hints never affect equality: these two differ only in the
    // display name under the lambda.
    let a = parse_term("\\x. x", &sig, &from).expect("well-formed");
    let b = parse_term("\\v. v", &sig, &from).expect("well-formed");
    println!("\\x. x ≡α \\v. v: {}", alpha_eq(&a, &b));
}
