//! Problem-file parsing and the command surface used by the binary: solve,
//! sat, classify, enumerate, oracle, trace, and export. With a fixed seed
//! and configuration all outputs are byte-identical across runs.

use crate::alphabet::{Alphabet, SymbolId, SymbolKind, Word};
use crate::edt0l::Classification;
use crate::fproduct::{Factor, FactorKind, FreeProductSpec};
use crate::nfa::LetterNfa;
use crate::oracle::{format_tuple, restrict_to_targets, solve_bruteforce, OracleQuery};
use crate::reduction::{normalize_formula, Atom, ConstraintDef, Formula, InputProblem, Mode, ProblemCtx};
use crate::recompress::solve_all;
use crate::{Error, Result};
use std::collections::BTreeSet;
use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Sat,
    Solve,
    Classify,
    Enumerate,
    Oracle,
    Trace,
    Export,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Text,
    Dot,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub input: String,
    pub kappa: usize,
    pub max_len: usize,
    pub seed: u64,
    pub budget_steps: usize,
    pub budget_enum: usize,
    pub format: OutputFormat,
}

impl RunConfig {
    pub fn new(command: Command, input: String) -> Self {
        RunConfig {
            command,
            input,
            kappa: 100,
            max_len: 6,
            seed: 0,
            budget_steps: 10_000_000,
            budget_enum: 10_000_000,
            format: OutputFormat::Text,
        }
    }
}

#[derive(Debug)]
pub struct RunOutput {
    pub stdout: String,
    pub exit: i32,
}

/// Parses the line-oriented problem format. Lines, `#` comments allowed:
///
/// ```text
/// mode free-group|free-monoid|free-product
/// factor free-group a b
/// factor free-monoid c inv c=c
/// factor finite-group name table <rows as ;-separated index lists>
/// vars X Y
/// eq <tokens> = <tokens>
/// neq <tokens> = <tokens>
/// nfa <name> <states> init <i..> final <f..> <p>:<letter|1>:<q> ...
/// constraint X in <nfa-name>
/// formula (and|or|not ...) with atoms (eq u v), (neq u v), (in X nfa)
/// target X Y
/// ```
pub fn parse_problem(text: &str) -> Result<InputProblem> {
    let mut alphabet = Alphabet::new();
    alphabet.add_marker("#")?;
    let mut mode: Option<Mode> = None;
    let mut factors: Vec<Factor> = Vec::new();
    let mut variables: Vec<SymbolId> = Vec::new();
    let mut targets: Vec<SymbolId> = Vec::new();
    let mut conjuncts: Vec<Formula> = Vec::new();
    let mut constraints: Vec<ConstraintDef> = Vec::new();
    let mut pending_formula: Option<(usize, String)> = None;

    let err = |line: usize, msg: String| Error::Parse { line, msg };

    for (ln0, raw) in text.lines().enumerate() {
        let ln = ln0 + 1;
        let line = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        };
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.is_empty() {
            continue;
        }
        match toks[0] {
            "mode" => {
                mode = Some(match toks.get(1).copied() {
                    Some("free-group") => Mode::FreeGroup,
                    Some("free-monoid") => Mode::FreeMonoid,
                    Some("free-product") => Mode::FreeProduct,
                    other => return Err(err(ln, format!("unknown mode {other:?}"))),
                });
            }
            "factor" => match toks.get(1).copied() {
                Some("free-group") => {
                    let mut letters = Vec::new();
                    for name in &toks[2..] {
                        let (l, lbar) =
                            alphabet.add_pair(SymbolKind::Constant, name, &format!("{name}'"))?;
                        letters.push(l);
                        letters.push(lbar);
                    }
                    if letters.is_empty() {
                        return Err(err(ln, "free-group factor needs generators".into()));
                    }
                    factors.push(Factor { kind: FactorKind::FreeGroup, letters });
                }
                Some("free-monoid") => {
                    // names up to an optional `inv` section; `inv a=b` links
                    // partners, `inv c=c` makes c self-involuting
                    let mut names: Vec<String> = Vec::new();
                    let mut invs: Vec<(String, String)> = Vec::new();
                    let mut in_inv = false;
                    for t in &toks[2..] {
                        if *t == "inv" {
                            in_inv = true;
                        } else if in_inv {
                            let (a, b) = t
                                .split_once('=')
                                .ok_or_else(|| err(ln, "inv entries look like a=b".into()))?;
                            invs.push((a.to_string(), b.to_string()));
                        } else {
                            names.push(t.to_string());
                        }
                    }
                    if names.is_empty() {
                        return Err(err(ln, "free-monoid factor needs letters".into()));
                    }
                    let mut letters = Vec::new();
                    let mut linked: BTreeSet<String> = BTreeSet::new();
                    for (a, b) in &invs {
                        if !names.contains(a) || !names.contains(b) {
                            return Err(err(ln, format!("inv uses undeclared letter {a} or {b}")));
                        }
                        if a == b {
                            let l = alphabet.add_self_involuting(SymbolKind::Constant, a)?;
                            letters.push(l);
                        } else {
                            let (l, lbar) = alphabet.add_pair(SymbolKind::Constant, a, b)?;
                            letters.push(l);
                            letters.push(lbar);
                        }
                        linked.insert(a.clone());
                        linked.insert(b.clone());
                    }
                    for name in &names {
                        if !linked.contains(name) {
                            let (l, lbar) =
                                alphabet.add_pair(SymbolKind::Constant, name, &format!("{name}'"))?;
                            letters.push(l);
                            letters.push(lbar);
                        }
                    }
                    factors.push(Factor { kind: FactorKind::FreeMonoid, letters });
                }
                Some("finite-group") => {
                    // factor finite-group <elem-names...> table <rows ;-separated>
                    let table_pos = toks
                        .iter()
                        .position(|&t| t == "table")
                        .ok_or_else(|| err(ln, "finite-group factor needs a table".into()))?;
                    let names: Vec<&str> = toks[2..table_pos].to_vec();
                    if names.is_empty() {
                        return Err(err(ln, "finite-group factor needs non-identity element names".into()));
                    }
                    let n = names.len() + 1;
                    let rows: Vec<&str> = toks[table_pos + 1..].to_vec();
                    let flat: Vec<usize> = rows
                        .join(" ")
                        .split(';')
                        .flat_map(|r| r.split_whitespace().map(|x| x.parse::<usize>()))
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|_| err(ln, "bad table entry".into()))?;
                    if flat.len() != n * n {
                        return Err(err(ln, format!("table must have {}x{} entries", n, n)));
                    }
                    let table: Vec<Vec<usize>> = flat.chunks(n).map(|r| r.to_vec()).collect();
                    // allocate letters; pair each element with its inverse
                    let mut ids: Vec<Option<SymbolId>> = vec![None; n];
                    for (i, name) in names.iter().enumerate() {
                        let e = i + 1;
                        if ids[e].is_some() {
                            continue;
                        }
                        let inv = table[e]
                            .iter()
                            .position(|&p| p == 0)
                            .ok_or_else(|| err(ln, "element without inverse".into()))?;
                        if inv == e {
                            ids[e] = Some(alphabet.add_self_involuting(SymbolKind::Constant, name)?);
                        } else {
                            if inv == 0 || inv > names.len() {
                                return Err(err(ln, "inverse outside element range".into()));
                            }
                            let partner_name = names[inv - 1];
                            let (l, lbar) =
                                alphabet.add_pair(SymbolKind::Constant, name, partner_name)?;
                            ids[e] = Some(l);
                            ids[inv] = Some(lbar);
                        }
                    }
                    let letters: Vec<SymbolId> = ids.into_iter().skip(1).map(|x| x.unwrap()).collect();
                    factors.push(Factor { kind: FactorKind::FiniteGroup { table }, letters });
                }
                other => return Err(err(ln, format!("unknown factor kind {other:?}"))),
            },
            "vars" => {
                for name in &toks[1..] {
                    let (v, _) = alphabet.add_pair(SymbolKind::Variable, name, &format!("{name}'"))?;
                    variables.push(v);
                }
            }
            "target" => {
                for name in &toks[1..] {
                    let v = alphabet
                        .lookup(name)
                        .ok_or_else(|| err(ln, format!("unknown target `{name}`")))?;
                    targets.push(v);
                }
            }
            "eq" | "neq" => {
                let rest = toks[1..].join(" ");
                let (u, v) = rest
                    .split_once('=')
                    .ok_or_else(|| err(ln, "equation needs `=`".into()))?;
                let uw = parse_word(&alphabet, u, ln)?;
                let vw = parse_word(&alphabet, v, ln)?;
                let atom = if toks[0] == "eq" { Atom::Eq(uw, vw) } else { Atom::Neq(uw, vw) };
                conjuncts.push(Formula::Atom(atom));
            }
            "nfa" => {
                // nfa <name> <states> init <i..> final <f..> <p>:<letter|1>:<q>...
                let name = toks.get(1).ok_or_else(|| err(ln, "nfa needs a name".into()))?.to_string();
                let states: usize = toks
                    .get(2)
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| err(ln, "nfa needs a state count".into()))?;
                let mut nfa = LetterNfa::new(states);
                let mut section = "";
                for t in &toks[3..] {
                    match *t {
                        "init" | "final" => section = t,
                        _ if t.contains(':') => {
                            let parts: Vec<&str> = t.split(':').collect();
                            if parts.len() != 3 {
                                return Err(err(ln, "transitions look like p:letter:q".into()));
                            }
                            let p: usize = parts[0].parse().map_err(|_| err(ln, "bad state".into()))?;
                            let q: usize = parts[2].parse().map_err(|_| err(ln, "bad state".into()))?;
                            let label = if parts[1] == "1" {
                                None
                            } else {
                                Some(alphabet.lookup(parts[1]).ok_or_else(|| {
                                    err(ln, format!("unknown letter `{}` in nfa", parts[1]))
                                })?)
                            };
                            if p >= states || q >= states {
                                return Err(err(ln, "transition state out of range".into()));
                            }
                            nfa.transitions.insert((p, label, q));
                        }
                        _ => {
                            let s: u32 = t.parse().map_err(|_| err(ln, "bad state".into()))?;
                            match section {
                                "init" => {
                                    nfa.initial.insert(s);
                                }
                                "final" => {
                                    nfa.final_.insert(s);
                                }
                                _ => return Err(err(ln, "state list outside init/final".into())),
                            }
                        }
                    }
                }
                constraints.push(ConstraintDef { name, nfa });
            }
            "constraint" => {
                // constraint X in <nfa-name>
                if toks.len() != 4 || toks[2] != "in" {
                    return Err(err(ln, "constraint looks like: constraint X in <nfa>".into()));
                }
                let v = alphabet
                    .lookup(toks[1])
                    .ok_or_else(|| err(ln, format!("unknown variable `{}`", toks[1])))?;
                let idx = constraints
                    .iter()
                    .position(|c| c.name == toks[3])
                    .ok_or_else(|| err(ln, format!("unknown nfa `{}`", toks[3])))?;
                conjuncts.push(Formula::Atom(Atom::InLang(v, idx)));
            }
            "formula" => {
                pending_formula = Some((ln, toks[1..].join(" ")));
            }
            other => return Err(err(ln, format!("unknown directive `{other}`"))),
        }
    }
    let mode = mode.ok_or_else(|| err(0, "missing `mode` line".into()))?;
    if factors.is_empty() {
        return Err(err(0, "missing `factor` lines".into()));
    }
    match mode {
        Mode::FreeGroup => {
            if factors.len() != 1 || factors[0].kind != FactorKind::FreeGroup {
                return Err(err(0, "free-group mode needs exactly one free-group factor".into()));
            }
        }
        Mode::FreeMonoid => {
            if factors.len() != 1 || factors[0].kind != FactorKind::FreeMonoid {
                return Err(err(0, "free-monoid mode needs exactly one free-monoid factor".into()));
            }
        }
        Mode::FreeProduct => {}
    }
    let spec = FreeProductSpec::new(&alphabet, factors)?;
    if let Some((ln, text)) = pending_formula {
        let f = parse_formula(&alphabet, &constraints, &text, ln)?;
        conjuncts.push(f);
    }
    if conjuncts.is_empty() {
        return Err(err(0, "no equations, inequalities or formula given".into()));
    }
    let formula = if conjuncts.len() == 1 { conjuncts.pop().unwrap() } else { Formula::And(conjuncts) };
    if variables.is_empty() {
        return Err(err(0, "missing `vars` line".into()));
    }
    if targets.is_empty() {
        targets = variables.clone();
    }
    Ok(InputProblem { alphabet, mode, spec, formula, targets, variables, constraints })
}

fn parse_word(alphabet: &Alphabet, text: &str, ln: usize) -> Result<Word> {
    let mut out = Vec::new();
    for tok in text.split_whitespace() {
        if tok == "1" {
            continue;
        }
        let id = alphabet
            .lookup(tok)
            .ok_or_else(|| Error::Parse { line: ln, msg: format!("unknown symbol `{tok}`") })?;
        out.push(id);
    }
    Ok(out)
}

/// S-expression formula syntax: (and ...), (or ...), (not f),
/// (eq <word> <word>), (neq <word> <word>), (in X <nfa-name>); words are
/// dot-separated symbol names or 1 for the empty word.
fn parse_formula(alphabet: &Alphabet, constraints: &[ConstraintDef], text: &str, ln: usize) -> Result<Formula> {
    #[derive(Debug)]
    enum Sexp {
        Atom(String),
        List(Vec<Sexp>),
    }
    fn tokenize(text: &str) -> Vec<String> {
        text.replace('(', " ( ").replace(')', " ) ").split_whitespace().map(|s| s.to_string()).collect()
    }
    fn parse(toks: &[String], pos: &mut usize) -> Option<Sexp> {
        if *pos >= toks.len() {
            return None;
        }
        let t = &toks[*pos];
        *pos += 1;
        if t == "(" {
            let mut items = Vec::new();
            while *pos < toks.len() && toks[*pos] != ")" {
                items.push(parse(toks, pos)?);
            }
            if *pos >= toks.len() {
                return None;
            }
            *pos += 1; // consume ')'
            Some(Sexp::List(items))
        } else if t == ")" {
            None
        } else {
            Some(Sexp::Atom(t.clone()))
        }
    }
    fn word_of(alphabet: &Alphabet, s: &str, ln: usize) -> Result<Word> {
        if s == "1" {
            return Ok(Vec::new());
        }
        let mut out = Vec::new();
        for part in s.split('.') {
            out.push(
                alphabet
                    .lookup(part)
                    .ok_or_else(|| Error::Parse { line: ln, msg: format!("unknown symbol `{part}`") })?,
            );
        }
        Ok(out)
    }
    fn build(alphabet: &Alphabet, constraints: &[ConstraintDef], s: &Sexp, ln: usize) -> Result<Formula> {
        let err = |msg: &str| Error::Parse { line: ln, msg: msg.to_string() };
        match s {
            Sexp::Atom(_) => Err(err("expected a list")),
            Sexp::List(items) => {
                let head = match items.first() {
                    Some(Sexp::Atom(h)) => h.as_str(),
                    _ => return Err(err("formula list needs a head symbol")),
                };
                match head {
                    "and" | "or" => {
                        let parts = items[1..]
                            .iter()
                            .map(|i| build(alphabet, constraints, i, ln))
                            .collect::<Result<Vec<_>>>()?;
                        Ok(if head == "and" { Formula::And(parts) } else { Formula::Or(parts) })
                    }
                    "not" => {
                        if items.len() != 2 {
                            return Err(err("not takes one argument"));
                        }
                        Ok(Formula::Not(Box::new(build(alphabet, constraints, &items[1], ln)?)))
                    }
                    "eq" | "neq" => {
                        let (u, v) = match (&items.get(1), &items.get(2)) {
                            (Some(Sexp::Atom(u)), Some(Sexp::Atom(v))) => (u, v),
                            _ => return Err(err("eq/neq take two words")),
                        };
                        let uw = word_of(alphabet, u, ln)?;
                        let vw = word_of(alphabet, v, ln)?;
                        Ok(Formula::Atom(if head == "eq" { Atom::Eq(uw, vw) } else { Atom::Neq(uw, vw) }))
                    }
                    "in" => {
                        let (x, name) = match (&items.get(1), &items.get(2)) {
                            (Some(Sexp::Atom(x)), Some(Sexp::Atom(n))) => (x, n),
                            _ => return Err(err("in takes a variable and an nfa name")),
                        };
                        let v = alphabet
                            .lookup(x)
                            .ok_or_else(|| err(&format!("unknown variable `{x}`")))?;
                        let idx = constraints
                            .iter()
                            .position(|c| c.name == *name)
                            .ok_or_else(|| err(&format!("unknown nfa `{name}`")))?;
                        Ok(Formula::Atom(Atom::InLang(v, idx)))
                    }
                    other => Err(err(&format!("unknown formula head `{other}`"))),
                }
            }
        }
    }
    let toks = tokenize(text);
    let mut pos = 0;
    let sexp = parse(&toks, &mut pos).ok_or(Error::Parse { line: ln, msg: "unbalanced formula".into() })?;
    build(alphabet, constraints, &sexp, ln)
}

/// Prints a problem back in the input grammar (used for round-trip tests).
pub fn print_problem(p: &InputProblem) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "mode {}", p.mode);
    for f in &p.spec.factors {
        match &f.kind {
            FactorKind::FreeGroup => {
                let gens: Vec<&str> = f
                    .letters
                    .iter()
                    .filter(|&&l| l < p.alphabet.partner(l))
                    .map(|&l| p.alphabet.name(l))
                    .collect();
                let _ = writeln!(s, "factor free-group {}", gens.join(" "));
            }
            FactorKind::FreeMonoid => {
                let mut names = Vec::new();
                let mut invs = Vec::new();
                for &l in &f.letters {
                    let partner = p.alphabet.partner(l);
                    if l == partner {
                        names.push(p.alphabet.name(l).to_string());
                        invs.push(format!("{}={}", p.alphabet.name(l), p.alphabet.name(l)));
                    } else if l < partner {
                        names.push(p.alphabet.name(l).to_string());
                        if !p.alphabet.name(partner).ends_with('\'') {
                            invs.push(format!("{}={}", p.alphabet.name(l), p.alphabet.name(partner)));
                            names.push(p.alphabet.name(partner).to_string());
                        }
                    }
                }
                let inv_str = if invs.is_empty() { String::new() } else { format!(" inv {}", invs.join(" ")) };
                let _ = writeln!(s, "factor free-monoid {}{}", names.join(" "), inv_str);
            }
            FactorKind::FiniteGroup { table } => {
                let names: Vec<&str> = f.letters.iter().map(|&l| p.alphabet.name(l)).collect();
                let rows: Vec<String> = table
                    .iter()
                    .map(|r| r.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" "))
                    .collect();
                let _ = writeln!(s, "factor finite-group {} table {}", names.join(" "), rows.join(" ; "));
            }
        }
    }
    let vars: Vec<&str> = p.variables.iter().map(|&v| p.alphabet.name(v)).collect();
    let _ = writeln!(s, "vars {}", vars.join(" "));
    for def in &p.constraints {
        let mut line = format!("nfa {} {} init", def.name, def.nfa.states);
        for i in &def.nfa.initial {
            let _ = write!(line, " {i}");
        }
        let _ = write!(line, " final");
        for f in &def.nfa.final_ {
            let _ = write!(line, " {f}");
        }
        for &(pp, l, q) in &def.nfa.transitions {
            let lname = l.map_or("1".to_string(), |x| p.alphabet.name(x).to_string());
            let _ = write!(line, " {pp}:{lname}:{q}");
        }
        let _ = writeln!(s, "{line}");
    }
    let _ = writeln!(s, "formula {}", fmt_formula(p, &p.formula));
    let tg: Vec<&str> = p.targets.iter().map(|&v| p.alphabet.name(v)).collect();
    let _ = writeln!(s, "target {}", tg.join(" "));
    s
}

fn fmt_formula(p: &InputProblem, f: &Formula) -> String {
    let word = |w: &Word| -> String {
        if w.is_empty() {
            "1".to_string()
        } else {
            w.iter().map(|&l| p.alphabet.name(l)).collect::<Vec<_>>().join(".")
        }
    };
    match f {
        Formula::Atom(Atom::Eq(u, v)) => format!("(eq {} {})", word(u), word(v)),
        Formula::Atom(Atom::Neq(u, v)) => format!("(neq {} {})", word(u), word(v)),
        Formula::Atom(Atom::InLang(x, i)) => {
            format!("(in {} {})", p.alphabet.name(*x), p.constraints[*i].name)
        }
        Formula::Atom(Atom::In(..)) => unreachable!("element atoms are internal"),
        Formula::And(fs) => format!("(and {})", fs.iter().map(|g| fmt_formula(p, g)).collect::<Vec<_>>().join(" ")),
        Formula::Or(fs) => format!("(or {})", fs.iter().map(|g| fmt_formula(p, g)).collect::<Vec<_>>().join(" ")),
        Formula::Not(g) => format!("(not {})", fmt_formula(p, g)),
    }
}

/// Runs one command over a parsed problem. Exit codes: 0 = success/SAT,
/// 1 = UNSAT, 2 = internal error (mapped by the caller).
pub fn run(config: &RunConfig) -> Result<RunOutput> {
    let problem = parse_problem(&config.input)?;
    let ctx = ProblemCtx::build(&problem, config.kappa)?;
    let mut out = String::new();
    let exit;
    match config.command {
        Command::Oracle => {
            let tuples = oracle_tuples(&ctx, &problem, config)?;
            for t in &tuples {
                let _ = writeln!(out, "{t}");
            }
            exit = 0;
        }
        Command::Sat => {
            let (sys, ..) = solve_all(
                &ctx,
                &problem.formula,
                config.max_len,
                config.seed,
                config.budget_steps,
                config.budget_enum,
                false,
            )?;
            if sys.is_empty() {
                let _ = writeln!(out, "UNSAT");
                exit = 1;
            } else {
                let _ = writeln!(out, "SAT");
                exit = 0;
            }
        }
        Command::Solve => {
            let (sys, ..) = solve_all(
                &ctx,
                &problem.formula,
                config.max_len,
                config.seed,
                config.budget_steps,
                config.budget_enum,
                false,
            )?;
            match config.format {
                OutputFormat::Text => out.push_str(&sys.serialize()),
                OutputFormat::Dot => out.push_str(&sys.to_dot()),
            }
            exit = 0;
        }
        Command::Export => {
            let (sys, ..) = solve_all(
                &ctx,
                &problem.formula,
                config.max_len,
                config.seed,
                config.budget_steps,
                config.budget_enum,
                false,
            )?;
            out.push_str(&sys.to_dot());
            exit = 0;
        }
        Command::Classify => {
            let (sys, ..) = solve_all(
                &ctx,
                &problem.formula,
                config.max_len,
                config.seed,
                config.budget_steps,
                config.budget_enum,
                false,
            )?;
            let c = sys.classify(config.budget_enum)?;
            let _ = writeln!(out, "{c}");
            exit = 0;
        }
        Command::Enumerate => {
            let tuples = enumerate_tuples(&ctx, &problem, config)?;
            for t in &tuples {
                let _ = writeln!(out, "{t}");
            }
            exit = 0;
        }
        Command::Trace => {
            let (_, stats, traces) = solve_all(
                &ctx,
                &problem.formula,
                config.max_len,
                config.seed,
                config.budget_steps,
                config.budget_enum,
                true,
            )?;
            let _ = writeln!(
                out,
                "branches={} witnesses={} arcs={} forward-checks={}",
                stats.branches, stats.witnesses, stats.arcs, stats.forward_checks
            );
            for line in &traces {
                let _ = writeln!(out, "{line}");
            }
            exit = 0;
        }
    }
    Ok(RunOutput { stdout: out, exit })
}

/// Oracle solution tuples at the per-variable bound, printed sorted, with
/// every component of length ≤ max_len.
pub fn oracle_tuples(ctx: &ProblemCtx, problem: &InputProblem, config: &RunConfig) -> Result<Vec<String>> {
    let branches = normalize_formula(ctx, &problem.formula)?;
    let mut tuples: BTreeSet<(usize, String)> = BTreeSet::new();
    for branch in &branches {
        let q = OracleQuery { ctx, atoms: branch.clone(), bound: config.max_len, budget: config.budget_enum };
        for sol in solve_bruteforce(&q)? {
            let tuple = restrict_to_targets(ctx, &sol);
            let total: usize = tuple.iter().map(|w| w.len()).sum();
            tuples.insert((total, format_tuple(&ctx.alphabet, &tuple)));
        }
    }
    Ok(tuples.into_iter().map(|(_, t)| t).collect())
}

/// NFA-enumerated solution tuples, decoded and filtered so that every
/// component has length ≤ max_len, printed like the oracle's.
pub fn enumerate_tuples(ctx: &ProblemCtx, problem: &InputProblem, config: &RunConfig) -> Result<Vec<String>> {
    let (sys, ..) = solve_all(
        &ctx.clone(),
        &problem.formula,
        config.max_len,
        config.seed,
        config.budget_steps,
        config.budget_enum,
        false,
    )?;
    let k = ctx.targets.len().max(1);
    let raw_budget = k * config.max_len * 2 + k;
    let words = sys.enumerate(raw_budget, config.budget_enum)?;
    let mut tuples: BTreeSet<(usize, String)> = BTreeSet::new();
    for w in words {
        // split into components on the marker (the decode already ran)
        let mut parts: Vec<Word> = vec![Vec::new()];
        for &l in &w {
            if Some(l) == ctx.alphabet.marker() {
                parts.push(Vec::new());
            } else {
                parts.last_mut().unwrap().push(l);
            }
        }
        if parts.len() != k {
            continue;
        }
        if parts.iter().any(|p| p.len() > config.max_len) {
            continue;
        }
        let total: usize = parts.iter().map(|p| p.len()).sum();
        tuples.insert((total, format_tuple(&ctx.alphabet, &parts)));
    }
    Ok(tuples.into_iter().map(|(_, t)| t).collect())
}

/// Convenience: parse, solve, enumerate and compare with the oracle; used by
/// the acceptance suite.
pub fn enumerate_matches_oracle(input: &str, max_len: usize, seed: u64) -> Result<(bool, usize)> {
    let problem = parse_problem(input)?;
    let mut config = RunConfig::new(Command::Enumerate, input.to_string());
    config.max_len = max_len;
    config.seed = seed;
    let ctx = ProblemCtx::build(&problem, config.kappa)?;
    let nfa_side = enumerate_tuples(&ctx, &problem, &config)?;
    let oracle_side = oracle_tuples(&ctx, &problem, &config)?;
    Ok((nfa_side == oracle_side, oracle_side.len()))
}

/// Classification through the full pipeline; used by the acceptance suite.
pub fn classify_input(input: &str, max_len: usize) -> Result<Classification> {
    let problem = parse_problem(input)?;
    let config = RunConfig::new(Command::Classify, input.to_string());
    let ctx = ProblemCtx::build(&problem, config.kappa)?;
    let (sys, ..) = solve_all(&ctx, &problem.formula, max_len, 0, config.budget_steps, config.budget_enum, false)?;
    sys.classify(config.budget_enum)
}
