//! Randomized cross-validation: generates small instances and checks that
//! the constructed system enumerates exactly the oracle's solution set.
//!
//!     cargo run --release --example fuzz -- <mode> <count> <bound> <seed>

use wordeq::cli::{enumerate_tuples, oracle_tuples, parse_problem, Command, RunConfig};
use wordeq::reduction::ProblemCtx;
use wordeq::Rng;

fn main() {
    let mode_arg = std::env::args().nth(1).unwrap_or_else(|| "free-monoid".into());
    let count: usize = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(40);
    let bound: usize = std::env::args().nth(3).and_then(|s| s.parse().ok()).unwrap_or(3);
    let seed0: u64 = std::env::args().nth(4).and_then(|s| s.parse().ok()).unwrap_or(1);
    let mut failures = 0;
    for i in 0..count {
        let mut rng = Rng::new(seed0 + i as u64);
        let (header, letters): (&str, Vec<&str>) = match mode_arg.as_str() {
            "free-group" => ("mode free-group\nfactor free-group a b\n", vec!["a", "a'", "b", "b'"]),
            "free-product" => (
                "mode free-product\nfactor finite-group s table 0 1 ; 1 0\nfactor finite-group t t2 table 0 1 2 ; 1 2 0 ; 2 0 1\n",
                vec!["s", "t", "t2"],
            ),
            "selfinv" => ("mode free-monoid\nfactor free-monoid s t inv s=s\n", vec!["s", "t", "t'"]),
            _ => ("mode free-monoid\nfactor free-monoid a b\n", vec!["a", "a'", "b", "b'"]),
        };
        let nvars = 1 + (rng.next_u64() % 2) as usize;
        let vars: Vec<&str> = ["X", "Y"][..nvars].to_vec();
        let mut token = |rng: &mut Rng| -> String {
            let pool_vars = rng.next_u64() % 3 == 0;
            if pool_vars {
                vars[(rng.next_u64() as usize) % vars.len()].to_string()
            } else {
                letters[(rng.next_u64() as usize) % letters.len()].to_string()
            }
        };
        let mut side = |rng: &mut Rng, must_var: bool| -> String {
            let len = 1 + (rng.next_u64() % 3) as usize;
            let mut toks: Vec<String> = (0..len).map(|_| token(rng)).collect();
            if must_var && !toks.iter().any(|t| vars.contains(&t.as_str())) {
                toks[0] = vars[0].to_string();
            }
            toks.join(" ")
        };
        let u = side(&mut rng, true);
        let v = side(&mut rng, false);
        let mut body = format!("eq {} = {}\n", u, v);
        if rng.next_u64() % 3 == 0 {
            let u2 = side(&mut rng, true);
            let v2 = side(&mut rng, false);
            body.push_str(&format!("eq {} = {}\n", u2, v2));
        }
        if rng.next_u64() % 3 == 0 && letters.len() >= 2 {
            let w = side(&mut rng, false);
            body.push_str(&format!("neq {} = {}\n", vars[0], w));
        }
        let input = format!("{header}vars {}\n{body}", vars.join(" "));
        let problem = match parse_problem(&input) {
            Ok(p) => p,
            Err(e) => {
                eprintln!("[{i}] parse error: {e}\n{input}");
                failures += 1;
                continue;
            }
        };
        let mut config = RunConfig::new(Command::Enumerate, input.clone());
        config.max_len = bound;
        config.budget_enum = 500_000_000;
        config.budget_steps = 50_000_000;
        let ctx = ProblemCtx::build(&problem, 100).unwrap();
        let oracle = match oracle_tuples(&ctx, &problem, &config) {
            Ok(o) => o,
            Err(e) => {
                eprintln!("[{i}] oracle error: {e}\n{input}");
                failures += 1;
                continue;
            }
        };
        let nfa = match enumerate_tuples(&ctx, &problem, &config) {
            Ok(n) => n,
            Err(e) => {
                eprintln!("[{i}] solve error: {e}\n{input}");
                failures += 1;
                continue;
            }
        };
        if oracle != nfa {
            eprintln!("[{i}] MISMATCH ({} vs {})\n{input}", oracle.len(), nfa.len());
            for line in oracle.iter().take(4) { eprintln!("  oracle: {line}"); }
            for line in nfa.iter().take(4) { eprintln!("  nfa:    {line}"); }
            failures += 1;
        }
    }
    if failures == 0 {
        println!("{mode_arg}: all {count} random instances match at bound {bound}");
    } else {
        println!("{mode_arg}: {failures}/{count} FAILURES");
        std::process::exit(1);
    }
}
