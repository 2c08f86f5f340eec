//! Brute-force ground truth: every solution up to a per-variable length
//! bound, for any supported mode. Used for tests, witness generation, and
//! the acceptance suite.

use crate::alphabet::{Alphabet, SymbolId, SymbolKind, Word};
use crate::monoid::bool_mat_accepts;
use crate::reduction::{Atom, ProblemCtx};
use crate::{Error, Result};
use std::collections::BTreeMap;

/// The unique reduced word with the same free-group image; idempotent.
pub fn free_reduce(alphabet: &Alphabet, w: &[SymbolId]) -> Word {
    let mut stack: Word = Vec::with_capacity(w.len());
    for &x in w {
        if stack.last().is_some_and(|&t| alphabet.partner(t) == x) {
            stack.pop();
        } else {
            stack.push(x);
        }
    }
    stack
}

/// All mode-reduced words of length ≤ bound, in length-lexicographic order.
/// Geodesics are prefix-closed, so extension by the two-letter rule is
/// complete.
pub fn enumerate_reduced(ctx: &ProblemCtx, bound: usize) -> Vec<Word> {
    let letters = ctx.spec.letters();
    let mut out: Vec<Word> = vec![vec![]];
    let mut layer: Vec<Word> = vec![vec![]];
    for _ in 0..bound {
        let mut next: Vec<Word> = Vec::new();
        for w in &layer {
            for &l in &letters {
                let ok = w
                    .last()
                    .is_none_or(|&last| ctx.spec.junction_geodesic(&ctx.alphabet, last, l));
                if ok {
                    let mut w2 = w.clone();
                    w2.push(l);
                    next.push(w2);
                }
            }
        }
        out.extend(next.iter().cloned());
        layer = next;
    }
    out
}

#[derive(Debug, Clone)]
pub struct OracleQuery<'a> {
    pub ctx: &'a ProblemCtx,
    pub atoms: Vec<Atom>,
    /// Per-variable length bound.
    pub bound: usize,
    pub budget: usize,
}

/// Exactly the assignments σ (over the unbarred declared variables) with
/// every |σ(X)| ≤ bound, σ(X̄) = involute(σ(X)), all images reduced, the
/// equations satisfied in the mode's structure, inequalities strict, and all
/// rational constraints met.
pub fn solve_bruteforce(q: &OracleQuery) -> Result<Vec<BTreeMap<SymbolId, Word>>> {
    let ctx = q.ctx;
    let _ = &ctx.alphabet;
    let candidates = enumerate_reduced(ctx, q.bound);
    let vars: Vec<SymbolId> = ctx.variables.clone();
    let mut out: Vec<BTreeMap<SymbolId, Word>> = Vec::new();
    let mut assign: BTreeMap<SymbolId, Word> = BTreeMap::new();
    let mut steps: usize = 0;

    fn atom_ready(al: &Alphabet, assign: &BTreeMap<SymbolId, Word>, atom: &Atom) -> bool {
        let word_ready = |w: &Word| {
            w.iter().all(|&x| al.kind(x) != SymbolKind::Variable || assign.contains_key(&x))
        };
        match atom {
            Atom::Eq(u, v) | Atom::Neq(u, v) => word_ready(u) && word_ready(v),
            Atom::In(x, _, _) | Atom::InLang(x, _) => assign.contains_key(x),
        }
    }

    fn atom_holds(ctx: &ProblemCtx, assign: &BTreeMap<SymbolId, Word>, atom: &Atom) -> Result<bool> {
        let al = &ctx.alphabet;
        let expand = |w: &Word| -> Word {
            let mut out = Vec::new();
            for &x in w {
                match assign.get(&x) {
                    Some(img) => out.extend(img.iter()),
                    None => out.push(x),
                }
            }
            out
        };
        Ok(match atom {
            Atom::Eq(u, v) => {
                let lu = ctx.spec.pi_normal_form(al, &expand(u));
                let lv = ctx.spec.pi_normal_form(al, &expand(v));
                lu == lv
            }
            Atom::Neq(u, v) => {
                let lu = ctx.spec.pi_normal_form(al, &expand(u));
                let lv = ctx.spec.pi_normal_form(al, &expand(v));
                lu != lv
            }
            Atom::In(x, i, m) => {
                let rho = &ctx.user_rhos[*i];
                let w = assign.get(x).expect("checked ready");
                rho.eval(al, w)? == *m
            }
            Atom::InLang(x, i) => {
                let rho = &ctx.user_rhos[*i];
                let w = assign.get(x).expect("checked ready");
                let e = rho.eval(al, w)?;
                let (init, fin) = &ctx.user_accept[*i];
                bool_mat_accepts(&rho.monoid, e, init, fin)
            }
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn rec(
        q: &OracleQuery,
        vars: &[SymbolId],
        candidates: &[Word],
        assign: &mut BTreeMap<SymbolId, Word>,
        out: &mut Vec<BTreeMap<SymbolId, Word>>,
        steps: &mut usize,
    ) -> Result<()> {
        let ctx = q.ctx;
        let al = &ctx.alphabet;
        let Some(&x) = vars.first() else {
            out.push(
                assign
                    .iter()
                    .filter(|(k, _)| al.kind(**k) == SymbolKind::Variable)
                    .filter(|(k, _)| ctx.variables.contains(k))
                    .map(|(k, v)| (*k, v.clone()))
                    .collect(),
            );
            return Ok(());
        };
        let rest = &vars[1..];
        for w in candidates {
            *steps += 1;
            if *steps > q.budget {
                return Err(Error::Budget(format!(
                    "oracle exceeded {} candidate steps ({} partial results kept)",
                    q.budget,
                    out.len()
                )));
            }
            assign.insert(x, w.clone());
            assign.insert(al.partner(x), al.involute_word(w)?);
            let mut ok = true;
            for atom in &q.atoms {
                if atom_ready(al, assign, atom) && !atom_holds(ctx, assign, atom)? {
                    ok = false;
                    break;
                }
            }
            if ok {
                rec(q, rest, candidates, assign, out, steps)?;
            }
            assign.remove(&x);
            assign.remove(&al.partner(x));
        }
        Ok(())
    }

    rec(q, &vars, &candidates, &mut assign, &mut out, &mut steps)?;
    out.sort();
    out.dedup();
    Ok(out)
}

/// The target tuple of an assignment, decoded to source letters.
pub fn restrict_to_targets(ctx: &ProblemCtx, assign: &BTreeMap<SymbolId, Word>) -> Vec<Word> {
    ctx.targets
        .iter()
        .map(|t| assign.get(t).cloned().unwrap_or_default())
        .collect()
}

/// Canonical print form of a solution tuple: components joined by " # ",
/// letters by spaces, the empty word as "1".
pub fn format_tuple(alphabet: &Alphabet, tuple: &[Word]) -> String {
    tuple
        .iter()
        .map(|w| alphabet.display_word(w))
        .collect::<Vec<_>>()
        .join(" # ")
}
