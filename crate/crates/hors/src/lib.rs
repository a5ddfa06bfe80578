//! Rational lambda-terms over a first-order signature.
//!
//! The crate models four layers and a thin command-line wrapper:
//!
//! - [`term`]: finite lambda-terms with named free variables, nameless
//!   (de Bruijn) bound variables, signature operations and an explicit
//!   bottom leaf; parsing, printing, renaming, simultaneous substitution,
//!   alpha-equality and depth cuts.
//! - [`graph`]: possibly cyclic term graphs as finite presentations of
//!   infinite (rational) terms; validation, bounded unfolding, bisimulation
//!   equality, minimization, substitution by splicing, and unique solutions
//!   of flat equation systems.
//! - [`scheme`]: recursion schemes (mutually recursive equations whose
//!   right-hand sides mix lambdas, applications and signature symbols),
//!   guardedness checking, flattening to systems of single-constructor
//!   equations, solving into term graphs, and solution checking.
//! - [`cpo`]: finite towers of pointed posets closed under their own
//!   monotone function spaces, interpretation of terms as monotone context
//!   maps, and least interpreted solutions of schemes by Kleene iteration.
//! - [`cli`]: the subcommand interface used by the `hors` binary, written
//!   against injected writers so its byte output is testable.
//!
//! The runnable examples under `examples/` walk through each capability.

pub mod cli;
pub mod cpo;
pub mod graph;
mod lex;
pub mod random;
pub mod scheme;
pub mod term;
