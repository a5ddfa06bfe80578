//! Batch command-line front end. Each subcommand reads scheme files,
//! drives the library, and writes machine-readable results to standard
//! output; diagnostics go to standard error. Exit status 0 is a positive
//! answer, 1 a parse/validation error, 2 a semantic negative (unguarded,
//! unequal, failed verification, golden mismatch).

use std::error::Error;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::cpo::{
    self, build_tower, check_interpreted, decode_tuple, parse_ops_file, Classification,
    ContextMap, Model, OpsFile,
};
use crate::graph::{bisim_eq, cut_eq, to_dot_named, unfold};
use crate::scheme::{
    check_guarded, first_failing_rule, flatten, inline_bare_aliases, parse_scheme,
    print_solution, solve, solve_roots, RecursionScheme,
};
use crate::term::print_term;

#[derive(Parser)]
#[command(
    name = "hors",
    version,
    about = "Solve, inspect, and interpret higher-order recursion schemes over rational terms"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Report whether every rule is guarded; an unguarded witness exits 2.
    Check {
        file: PathBuf,
        /// Rewrite one level of bare-alias rules before checking.
        #[arg(long)]
        inline: bool,
    },
    /// Print the flattened scheme (one constructor per rule).
    Flatten {
        file: PathBuf,
        #[arg(long)]
        inline: bool,
    },
    /// Solve the scheme and print the minimized solution graphs.
    Solve {
        file: PathBuf,
        /// `text` prints a flat system per nonterminal, `dot` a digraph.
        #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
        format: OutputFormat,
        /// Write to a file instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        inline: bool,
    },
    /// Print the depth-cut unfolding of one solution as term text.
    Unfold {
        file: PathBuf,
        /// Which nonterminal to unfold; defaults to the file's only one.
        #[arg(long)]
        nonterminal: Option<String>,
        #[arg(long, default_value_t = 8)]
        depth: usize,
        #[arg(long)]
        inline: bool,
    },
    /// Solve two single-nonterminal files and compare the solutions.
    Alphaeq {
        file1: PathBuf,
        file2: PathBuf,
        /// Compare depth-cut unfoldings instead of full bisimilarity.
        #[arg(long)]
        depth: Option<usize>,
        #[arg(long)]
        inline: bool,
    },
    /// Least solution in a finite model, as value tables per nonterminal.
    Interpret {
        file: PathBuf,
        /// Model spec `tower:N`; defaults to the ops file's model line,
        /// then to tower:2.
        #[arg(long)]
        model: Option<String>,
        /// Table file for the signature's symbols.
        #[arg(long)]
        ops: Option<PathBuf>,
        /// Compare standard output against this file; mismatch exits 2.
        #[arg(long)]
        golden: Option<PathBuf>,
        #[arg(long)]
        inline: bool,
    },
    /// Check a candidate solution file against a scheme's equations.
    Verify {
        file: PathBuf,
        /// Scheme file whose solutions (named like FILE's nonterminals)
        /// are the candidates.
        #[arg(long)]
        solution: PathBuf,
        #[arg(long)]
        inline: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputFormat {
    Text,
    Dot,
}

/// Runs the CLI against explicit streams and returns the exit status.
/// `argv` includes the program name.
pub fn run<I, S>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let rendered = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(stderr, "{rendered}");
                1
            } else {
                let _ = write!(stdout, "{rendered}");
                0
            };
        }
    };
    match dispatch(cli.cmd, stdout, stderr) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            1
        }
    }
}

fn load_scheme(path: &Path, inline: bool) -> Result<RecursionScheme, Box<dyn Error>> {
    let text = fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let s = parse_scheme(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(if inline { inline_bare_aliases(&s) } else { s })
}

fn sole_root(s: &RecursionScheme, path: &Path) -> Result<String, Box<dyn Error>> {
    let roots = s.roots();
    match roots.as_slice() {
        [one] => Ok(one.clone()),
        _ => Err(format!(
            "{} defines {} nonterminals; expected exactly one",
            path.display(),
            roots.len()
        )
        .into()),
    }
}

fn dispatch(cmd: Cmd, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, Box<dyn Error>> {
    match cmd {
        Cmd::Check { file, inline } => {
            let s = load_scheme(&file, inline)?;
            match check_guarded(&s) {
                None => {
                    writeln!(out, "guarded")?;
                    Ok(0)
                }
                Some(p) => {
                    writeln!(out, "unguarded: {p}")?;
                    Ok(2)
                }
            }
        }
        Cmd::Flatten { file, inline } => {
            let s = load_scheme(&file, inline)?;
            let flat = flatten(&s)?;
            write!(out, "{}", flat.to_scheme_text())?;
            Ok(0)
        }
        Cmd::Solve {
            file,
            format,
            out: out_path,
            inline,
        } => {
            let s = load_scheme(&file, inline)?;
            let sol = solve(&s)?;
            let text = match format {
                OutputFormat::Text => {
                    let parts: Vec<(String, &crate::graph::TermGraph)> = s
                        .roots()
                        .into_iter()
                        .map(|r| {
                            let g = &sol[&r];
                            (r, g)
                        })
                        .collect();
                    print_solution(s.signature(), s.context(), &parts)
                }
                OutputFormat::Dot => {
                    let mut text = String::new();
                    for r in s.roots() {
                        text.push_str(&to_dot_named(&sol[&r], &r));
                    }
                    text
                }
            };
            match out_path {
                Some(p) => fs::write(&p, text)
                    .map_err(|e| format!("cannot write {}: {e}", p.display()))?,
                None => write!(out, "{text}")?,
            }
            Ok(0)
        }
        Cmd::Unfold {
            file,
            nonterminal,
            depth,
            inline,
        } => {
            let s = load_scheme(&file, inline)?;
            let target = match nonterminal {
                Some(n) => n,
                None => sole_root(&s, &file)?,
            };
            let sol = solve_roots(&s, std::slice::from_ref(&target))?;
            let cut = unfold(&sol[&target], depth);
            writeln!(out, "{}", print_term(&cut, s.context()))?;
            Ok(0)
        }
        Cmd::Alphaeq {
            file1,
            file2,
            depth,
            inline,
        } => {
            let s1 = load_scheme(&file1, inline)?;
            let s2 = load_scheme(&file2, inline)?;
            let r1 = sole_root(&s1, &file1)?;
            let r2 = sole_root(&s2, &file2)?;
            let g1 = &solve_roots(&s1, std::slice::from_ref(&r1))?[&r1];
            let g2 = &solve_roots(&s2, std::slice::from_ref(&r2))?[&r2];
            let equal = match depth {
                None => bisim_eq(g1, g2)?,
                Some(k) => cut_eq(g1, g2, k)?,
            };
            if equal {
                writeln!(out, "equal")?;
                Ok(0)
            } else {
                writeln!(out, "not equal")?;
                Ok(2)
            }
        }
        Cmd::Interpret {
            file,
            model,
            ops,
            golden,
            inline,
        } => {
            let s = load_scheme(&file, inline)?;
            let ops_file = match &ops {
                Some(p) => {
                    let text = fs::read_to_string(p)
                        .map_err(|e| format!("cannot read {}: {e}", p.display()))?;
                    parse_ops_file(&text).map_err(|e| format!("{}: {e}", p.display()))?
                }
                None => OpsFile::default(),
            };
            let flag_n = model.map(|spec| parse_model_spec(&spec)).transpose()?;
            let n = match (flag_n, ops_file.tower) {
                (Some(a), Some(b)) if a != b => {
                    return Err(format!(
                        "--model tower:{a} disagrees with the ops file's `model tower {b}`"
                    )
                    .into())
                }
                (Some(a), _) => a,
                (None, Some(b)) => b,
                (None, None) => 2,
            };
            let mut m = build_tower(n)?;
            m.install_ops(&ops_file, s.signature())?;
            let (sol, iterations) = cpo::solve_interpreted(&s, &m)?;
            if check_interpreted(&s, &m, &sol)? != Classification::Fixed {
                writeln!(err, "error: the computed tables do not satisfy the rule equations")?;
                return Ok(1);
            }
            cut_diagnostic(&s, &m, &sol, err);
            let text = render_interpretation(&s, &m, &sol, iterations, n);
            write!(out, "{text}")?;
            if let Some(p) = golden {
                let want = fs::read_to_string(&p)
                    .map_err(|e| format!("cannot read {}: {e}", p.display()))?;
                if want != text {
                    writeln!(err, "golden mismatch: {}", p.display())?;
                    return Ok(2);
                }
            }
            Ok(0)
        }
        Cmd::Verify {
            file,
            solution,
            inline,
        } => {
            let s = load_scheme(&file, inline)?;
            let sol_scheme = load_scheme(&solution, inline)?;
            let cand = solve_roots(&sol_scheme, s.nonterminals())?;
            match first_failing_rule(&s, &cand)? {
                None => {
                    writeln!(out, "ok")?;
                    Ok(0)
                }
                Some(p) => {
                    writeln!(out, "failed: {p}")?;
                    Ok(2)
                }
            }
        }
    }
}

fn parse_model_spec(spec: &str) -> Result<usize, Box<dyn Error>> {
    let n = spec
        .strip_prefix("tower:")
        .and_then(|rest| rest.parse::<usize>().ok())
        .ok_or_else(|| format!("unsupported model spec `{spec}` (expected `tower:N`)"))?;
    Ok(n)
}

/// Per-nonterminal value tables in the same row syntax the ops files use,
/// preceded by the model and the iteration count.
fn render_interpretation(
    s: &RecursionScheme,
    m: &Model,
    sol: &std::collections::BTreeMap<String, ContextMap>,
    iterations: usize,
    n: usize,
) -> String {
    let k = m.dsize();
    let width = s.context().len();
    let mut text = format!("model tower {n}\niterations {iterations}\n");
    for p in s.nonterminals() {
        text.push_str(&format!("solution {p} {{\n"));
        let table = sol[p].table();
        for (i, v) in table.iter().enumerate() {
            let tuple = decode_tuple(i, k, width);
            text.push_str("  ");
            for t in &tuple {
                text.push_str(&format!("#{t} "));
            }
            text.push_str(&format!("-> #{v} ;\n"));
        }
        text.push_str("}\n");
    }
    text
}

/// Sanity note on standard error when a depth-8 cut of the graph solution
/// interprets to something not below the computed least solution. Skipped
/// when the scheme has no graph solution (for instance, unguarded rules).
fn cut_diagnostic(
    s: &RecursionScheme,
    m: &Model,
    sol: &std::collections::BTreeMap<String, ContextMap>,
    err: &mut dyn Write,
) {
    let Ok(graphs) = solve(s) else { return };
    for r in s.roots() {
        let cut = unfold(&graphs[&r], 8);
        let Ok(approx) = cpo::interpret_with_bottom(&cut, s.context(), m) else {
            continue;
        };
        if !approx.le(&sol[&r], m) {
            let _ = writeln!(
                err,
                "note: the depth-8 cut of {r} interprets above the least solution"
            );
        }
    }
}
