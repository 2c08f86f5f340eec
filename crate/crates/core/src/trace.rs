//! Partially commutative monoids M(B, X, θ, μ) for the two restricted type
//! relation shapes: letter typing (x, c) and block typing (x x̄, c c̄) /
//! (X, c c̄). Words are canonicalized by the lexicographically least
//! representative, computed by greedy front extraction over a tokenization
//! into commuting units.

use crate::alphabet::{Alphabet, SymbolId, Word};
use crate::monoid::ConstraintMorphism;
use crate::{Error, Result};
use std::collections::{BTreeMap, BTreeSet, VecDeque};

/// Left side of a θ entry: a single symbol or the two-letter word x x̄.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Entity {
    Sym(SymbolId),
    Pair(SymbolId),
}

/// Right side of a θ entry: the distinguished letter c or the block c c̄.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum BlockPartner {
    Letter(SymbolId),
    Pair(SymbolId),
}

/// Irreflexive, antisymmetric, involution-closed relation with at most one
/// partner per entity; only the shapes (x, c)/(x̄, c̄) with a single
/// distinguished letter, or (X, c c̄)/(a ā, c c̄), are representable.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord)]
pub struct TypeRelation {
    entries: BTreeMap<Entity, BlockPartner>,
}

impl TypeRelation {
    pub fn new() -> Self {
        TypeRelation::default()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&Entity, &BlockPartner)> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    /// Adds (x, c) together with (x̄, c̄).
    pub fn insert_letter(&mut self, alphabet: &Alphabet, x: SymbolId, c: SymbolId) {
        self.entries.insert(Entity::Sym(x), BlockPartner::Letter(c));
        self.entries
            .insert(Entity::Sym(alphabet.partner(x)), BlockPartner::Letter(alphabet.partner(c)));
    }

    /// Adds (x, c c̄); the involution closure of a block entry is itself
    /// for pair entities and the barred variable for variable entities.
    pub fn insert_block(&mut self, alphabet: &Alphabet, x: Entity, c: SymbolId) {
        self.entries.insert(x, BlockPartner::Pair(c));
        if let Entity::Sym(v) = x {
            self.entries.insert(Entity::Sym(alphabet.partner(v)), BlockPartner::Pair(c));
        }
    }

    pub fn partner_of(&self, e: &Entity) -> Option<BlockPartner> {
        self.entries.get(e).copied()
    }

    pub fn type_of_symbol(&self, x: SymbolId) -> Option<BlockPartner> {
        self.entries.get(&Entity::Sym(x)).copied()
    }

    /// Drops all entries mentioning any of the given letters (used by
    /// alphabet-reduction arcs) or the given variable.
    pub fn remove_mentioning(&mut self, symbols: &BTreeSet<SymbolId>) {
        self.entries.retain(|e, p| {
            let el = match e {
                Entity::Sym(x) => !symbols.contains(x),
                Entity::Pair(a) => !symbols.contains(a),
            };
            let pl = match p {
                BlockPartner::Letter(c) => !symbols.contains(c),
                BlockPartner::Pair(c) => !symbols.contains(c),
            };
            el && pl
        });
    }

    pub fn symbols_mentioned(&self, alphabet: &Alphabet) -> BTreeSet<SymbolId> {
        let mut out = BTreeSet::new();
        for (e, p) in &self.entries {
            match e {
                Entity::Sym(x) => {
                    out.insert(*x);
                }
                Entity::Pair(a) => {
                    out.insert(*a);
                    out.insert(alphabet.partner(*a));
                }
            }
            match p {
                BlockPartner::Letter(c) => {
                    out.insert(*c);
                }
                BlockPartner::Pair(c) => {
                    out.insert(*c);
                    out.insert(alphabet.partner(*c));
                }
            }
        }
        out
    }

    /// The distinguished letter, when the relation is nonempty.
    pub fn distinguished(&self, alphabet: &Alphabet) -> Option<SymbolId> {
        self.entries.values().next().map(|p| match p {
            BlockPartner::Letter(c) => std::cmp::min(*c, alphabet.partner(*c)),
            BlockPartner::Pair(c) => std::cmp::min(*c, alphabet.partner(*c)),
        })
    }

    /// Shape, closure, and μ-compatibility checks.
    pub fn validate(&self, alphabet: &Alphabet, mu: Option<&ConstraintMorphism>) -> Result<()> {
        if self.entries.is_empty() {
            return Ok(());
        }
        let mut kinds = BTreeSet::new();
        let mut distinguished = BTreeSet::new();
        for (e, p) in &self.entries {
            match p {
                BlockPartner::Letter(c) => {
                    kinds.insert("letter");
                    distinguished.insert(std::cmp::min(*c, alphabet.partner(*c)));
                    let x = match e {
                        Entity::Sym(x) => *x,
                        Entity::Pair(_) => {
                            return Err(Error::TypeRelation("pair entity with letter partner".into()))
                        }
                    };
                    if x == *c || x == alphabet.partner(*c) {
                        return Err(Error::TypeRelation("entity inside {c, c̄}".into()));
                    }
                }
                BlockPartner::Pair(c) => {
                    kinds.insert("block");
                    distinguished.insert(std::cmp::min(*c, alphabet.partner(*c)));
                    match e {
                        Entity::Sym(x) => {
                            if alphabet.kind(*x) != crate::alphabet::SymbolKind::Variable {
                                return Err(Error::TypeRelation(
                                    "block partner for a non-variable symbol".into(),
                                ));
                            }
                        }
                        Entity::Pair(a) => {
                            if *a == *c || *a == alphabet.partner(*c) {
                                return Err(Error::TypeRelation("pair entity inside {c, c̄}".into()));
                            }
                            if self.entries.contains_key(&Entity::Pair(alphabet.partner(*a))) {
                                return Err(Error::TypeRelation(
                                    "both a ā and ā a typed; tokenization would be ambiguous".into(),
                                ));
                            }
                        }
                    }
                }
            }
        }
        if kinds.len() > 1 {
            return Err(Error::TypeRelation("mixed letter and block shapes".into()));
        }
        if distinguished.len() > 1 {
            return Err(Error::TypeRelation("more than one distinguished letter".into()));
        }
        // involution closure
        for (e, p) in &self.entries {
            let (ebar, pbar) = involute_entry(alphabet, e, p);
            if self.entries.get(&ebar) != Some(&pbar) {
                return Err(Error::TypeRelation("not closed under involution".into()));
            }
        }
        if let Some(mu) = mu {
            for (e, p) in &self.entries {
                let xw = entity_word(alphabet, e);
                let pw = partner_word(alphabet, p);
                let mut xy = xw.clone();
                xy.extend(&pw);
                let mut yx = pw.clone();
                yx.extend(&xw);
                let a = mu.eval(alphabet, &xy)?;
                let b = mu.eval(alphabet, &yx)?;
                if a != b {
                    return Err(Error::TypeRelation(format!(
                        "μ(xy) ≠ μ(yx) for ({}, {})",
                        alphabet.display_word(&xw),
                        alphabet.display_word(&pw)
                    )));
                }
            }
        }
        Ok(())
    }
}

fn involute_entry(alphabet: &Alphabet, e: &Entity, p: &BlockPartner) -> (Entity, BlockPartner) {
    let eb = match e {
        Entity::Sym(x) => Entity::Sym(alphabet.partner(*x)),
        Entity::Pair(a) => Entity::Pair(*a),
    };
    let pb = match p {
        BlockPartner::Letter(c) => BlockPartner::Letter(alphabet.partner(*c)),
        BlockPartner::Pair(c) => BlockPartner::Pair(*c),
    };
    (eb, pb)
}

pub fn entity_word(alphabet: &Alphabet, e: &Entity) -> Word {
    match e {
        Entity::Sym(x) => vec![*x],
        Entity::Pair(a) => vec![*a, alphabet.partner(*a)],
    }
}

pub fn partner_word(alphabet: &Alphabet, p: &BlockPartner) -> Word {
    match p {
        BlockPartner::Letter(c) => vec![*c],
        BlockPartner::Pair(c) => vec![*c, alphabet.partner(*c)],
    }
}

/// A token is a maximal commuting unit: either a single symbol or one of
/// the two-letter words appearing in θ. Distinct token words never overlap,
/// so the decomposition is canonical.
fn tokenize<'a>(alphabet: &Alphabet, theta: &TypeRelation, w: &'a [SymbolId]) -> Vec<&'a [SymbolId]> {
    let mut two: BTreeSet<(SymbolId, SymbolId)> = BTreeSet::new();
    for (e, p) in theta.entries() {
        if let Entity::Pair(a) = e {
            two.insert((*a, alphabet.partner(*a)));
        }
        if let BlockPartner::Pair(c) = p {
            two.insert((*c, alphabet.partner(*c)));
        }
    }
    let mut out = Vec::with_capacity(w.len());
    let mut i = 0;
    while i < w.len() {
        if i + 1 < w.len() && two.contains(&(w[i], w[i + 1])) {
            out.push(&w[i..i + 2]);
            i += 2;
        } else {
            out.push(&w[i..i + 1]);
            i += 1;
        }
    }
    out
}

fn token_entity(tok: &[SymbolId]) -> Entity {
    if tok.len() == 2 {
        Entity::Pair(tok[0])
    } else {
        Entity::Sym(tok[0])
    }
}

fn tokens_commute(theta: &TypeRelation, a: &[SymbolId], b: &[SymbolId]) -> bool {
    let (ea, eb) = (token_entity(a), token_entity(b));
    let matches = |e: &Entity, other: &[SymbolId]| -> bool {
        match theta.partner_of(e) {
            Some(BlockPartner::Letter(c)) => other.len() == 1 && other[0] == c,
            Some(BlockPartner::Pair(c)) => other.len() == 2 && other[0] == c,
            None => false,
        }
    };
    matches(&ea, b) || matches(&eb, a)
}

/// Lexicographically least representative under the fixed symbol-id order;
/// equal traces yield equal normal forms.
///
/// Both admissible θ shapes are stars: per orientation there is one mobile
/// token (the letter c, or the block c c̄) that commutes with every typed
/// entity, while typed entities stay rigid among themselves. The least
/// representative therefore splits into maximal zones of mobile and
/// permeable tokens, each minimized by a shuffle merge in linear time.
pub fn trace_normal_form(alphabet: &Alphabet, w: &[SymbolId], theta: &TypeRelation) -> Word {
    if theta.is_empty() {
        return w.to_vec();
    }
    let tokens = tokenize(alphabet, theta, w);
    #[derive(PartialEq, Clone, Copy)]
    enum Class {
        Mobile(u8),
        Permeable(u8),
        Rigid,
    }
    let classify = |tok: &[SymbolId]| -> Class {
        let e = token_entity(tok);
        // a mobile token is a partner word of some entry
        let mut mobile_orient = None;
        for (_, p) in theta.entries() {
            let pw = partner_word(alphabet, p);
            if pw == tok {
                // orientation 0 for the canonical partner, 1 for its bar
                let o = match p {
                    BlockPartner::Letter(c) => u8::from(*c > alphabet.partner(*c)),
                    BlockPartner::Pair(_) => 0,
                };
                mobile_orient = Some(o);
                break;
            }
            // the barred letter partner
            if let BlockPartner::Letter(c) = p {
                if tok.len() == 1 && tok[0] == alphabet.partner(*c) {
                    mobile_orient = Some(u8::from(alphabet.partner(*c) > *c));
                    break;
                }
            }
        }
        if let Some(o) = mobile_orient {
            return Class::Mobile(o);
        }
        if let Some(p) = theta.partner_of(&e) {
            let o = match p {
                BlockPartner::Letter(c) => u8::from(c > alphabet.partner(c)),
                BlockPartner::Pair(_) => 0,
            };
            return Class::Permeable(o);
        }
        Class::Rigid
    };
    let classes: Vec<Class> = tokens.iter().map(|t| classify(t)).collect();
    let mut out: Word = Vec::with_capacity(w.len());
    let mut i = 0;
    while i < tokens.len() {
        let orient = match classes[i] {
            Class::Rigid => {
                out.extend_from_slice(tokens[i]);
                i += 1;
                continue;
            }
            Class::Mobile(o) | Class::Permeable(o) => o,
        };
        // a zone: maximal run of mobile/permeable tokens of one orientation
        let mut j = i;
        let mut mobiles = 0usize;
        let mut mobile_word: &[SymbolId] = &[];
        let mut rigid_seq: Vec<&[SymbolId]> = Vec::new();
        while j < tokens.len() {
            match classes[j] {
                Class::Mobile(o) if o == orient => {
                    mobiles += 1;
                    mobile_word = tokens[j];
                }
                Class::Permeable(o) if o == orient => rigid_seq.push(tokens[j]),
                _ => break,
            }
            j += 1;
        }
        // shuffle merge: all mobiles are identical, so first-letter
        // comparison decides (token words never share first letters)
        let mut r = 0;
        while mobiles > 0 || r < rigid_seq.len() {
            let take_mobile = if mobiles == 0 {
                false
            } else if r >= rigid_seq.len() {
                true
            } else {
                mobile_word < rigid_seq[r]
            };
            if take_mobile {
                out.extend_from_slice(mobile_word);
                mobiles -= 1;
            } else {
                out.extend_from_slice(rigid_seq[r]);
                r += 1;
            }
        }
        i = j;
    }
    out
}

pub fn trace_equal(alphabet: &Alphabet, u: &[SymbolId], v: &[SymbolId], theta: &TypeRelation) -> bool {
    if theta.is_empty() {
        return u == v;
    }
    trace_normal_form(alphabet, u, theta) == trace_normal_form(alphabet, v, theta)
}

/// All representatives of a trace, by BFS over adjacent token swaps. Returns
/// None when the closure exceeds `cap`.
pub fn representatives(alphabet: &Alphabet, w: &[SymbolId], theta: &TypeRelation, cap: usize) -> Option<BTreeSet<Word>> {
    let mut seen: BTreeSet<Word> = BTreeSet::new();
    seen.insert(w.to_vec());
    if theta.is_empty() {
        return Some(seen);
    }
    let mut queue: VecDeque<Word> = VecDeque::new();
    queue.push_back(w.to_vec());
    while let Some(cur) = queue.pop_front() {
        let toks = tokenize(alphabet, theta, &cur);
        for i in 0..toks.len().saturating_sub(1) {
            if tokens_commute(theta, toks[i], toks[i + 1]) {
                let mut next: Word = Vec::with_capacity(cur.len());
                for (j, t) in toks.iter().enumerate() {
                    if j == i {
                        next.extend_from_slice(toks[i + 1]);
                    } else if j == i + 1 {
                        next.extend_from_slice(toks[i]);
                    } else {
                        next.extend_from_slice(t);
                    }
                }
                if seen.insert(next.clone()) {
                    if seen.len() > cap {
                        return None;
                    }
                    queue.push_back(next);
                }
            }
        }
    }
    Some(seen)
}

fn contains_subword(hay: &[SymbolId], needle: &[SymbolId]) -> bool {
    if needle.is_empty() {
        return true;
    }
    hay.windows(needle.len()).any(|w| w == needle)
}

/// True iff some representative of `w` contains a representative of `f` as a
/// contiguous factor. Falls back to normal-form matching when the closure
/// exceeds the cap.
pub fn is_trace_factor(alphabet: &Alphabet, f: &[SymbolId], w: &[SymbolId], theta: &TypeRelation) -> bool {
    assert!(!f.is_empty(), "factor must be nonempty");
    if theta.is_empty() {
        return contains_subword(w, f);
    }
    let cap = 20_000;
    match (representatives(alphabet, f, theta, cap), representatives(alphabet, w, theta, cap)) {
        (Some(fs), Some(ws)) => ws.iter().any(|wr| fs.iter().any(|fr| contains_subword(wr, fr))),
        _ => {
            let nf = trace_normal_form(alphabet, f, theta);
            let nw = trace_normal_form(alphabet, w, theta);
            contains_subword(&nw, &nf)
        }
    }
}

/// Context for well-formedness checks of an extended-equation word.
pub struct WellFormedCtx<'a> {
    pub alphabet: &'a Alphabet,
    pub marker: SymbolId,
    pub n: usize,
    pub kappa: usize,
    pub init_marker_count: usize,
    /// Letters that must each occur as a factor `# a #`.
    pub aplus: &'a [SymbolId],
}

/// Checks the well-formedness clauses on W. Returns the list of violated
/// clauses (empty = well-formed).
pub fn well_formed_diagnostics(
    ctx: &WellFormedCtx,
    w: &[SymbolId],
    b_set: &BTreeSet<SymbolId>,
    x_set: &BTreeSet<SymbolId>,
    theta: &TypeRelation,
    mu: &ConstraintMorphism,
) -> Vec<String> {
    let mut bad = Vec::new();
    let al = ctx.alphabet;
    if w.len() > ctx.kappa * ctx.n {
        bad.push(format!("|W| = {} exceeds kappa*n = {}", w.len(), ctx.kappa * ctx.n));
    }
    let hashes = w.iter().filter(|&&x| x == ctx.marker).count();
    if hashes != ctx.init_marker_count {
        bad.push(format!("|W|_# = {} but expected {}", hashes, ctx.init_marker_count));
    }
    for &x in b_set.iter().chain(x_set.iter()) {
        match mu.get(x) {
            None => bad.push(format!("μ undefined on `{}`", al.name(x))),
            Some(e) if mu.monoid.is_zero(e) && x != ctx.marker => {
                bad.push(format!("μ(`{}`) = 0", al.name(x)))
            }
            _ => {}
        }
    }
    // B* ∩ μ⁻¹(1) = {1}: no nonempty product of letter images is the identity
    {
        let m = &mu.monoid;
        let gens: Vec<crate::monoid::Elem> = b_set
            .iter()
            .filter(|&&b| b != ctx.marker)
            .filter_map(|&b| mu.get(b))
            .collect();
        let mut reach: BTreeSet<crate::monoid::Elem> = gens.iter().copied().collect();
        let mut queue: VecDeque<crate::monoid::Elem> = reach.iter().copied().collect();
        let budget = 100_000;
        let mut steps = 0;
        while let Some(e) = queue.pop_front() {
            for &g in &gens {
                steps += 1;
                if steps > budget {
                    queue.clear();
                    break;
                }
                let p = m.mul(e, g);
                if reach.insert(p) {
                    queue.push_back(p);
                }
            }
        }
        if reach.contains(&m.identity()) {
            bad.push("a nonempty constant word maps to 1".into());
        }
    }
    // every proper (nonempty, #-free) factor has μ ≠ 0: scan the normal form
    let nf = trace_normal_form(al, w, theta);
    let m = &mu.monoid;
    'outer: for i in 0..nf.len() {
        if nf[i] == ctx.marker {
            continue;
        }
        let mut acc = match mu.get(nf[i]) {
            Some(e) => e,
            None => continue,
        };
        if m.is_zero(acc) {
            bad.push(format!("proper factor `{}` has μ = 0", al.name(nf[i])));
            break;
        }
        for &x in nf.iter().skip(i + 1) {
            if x == ctx.marker {
                break;
            }
            acc = m.mul(acc, mu.get(x).unwrap_or_else(|| m.identity()));
            if m.is_zero(acc) {
                bad.push("a proper factor has μ = 0".into());
                break 'outer;
            }
        }
    }
    // proper factors closed under involution: check maximal #-free segments
    {
        let segments: Vec<&[SymbolId]> = nf
            .split(|&x| x == ctx.marker)
            .filter(|s| !s.is_empty())
            .collect();
        for s in &segments {
            let inv = al.involute_word(s).expect("segment symbols known");
            let nf_inv = trace_normal_form(al, &inv, theta);
            let found = segments.iter().any(|t| {
                if theta.is_empty() {
                    contains_subword(t, &nf_inv)
                } else if s.len() <= 10 {
                    is_trace_factor(al, &inv, t, theta)
                } else {
                    contains_subword(&trace_normal_form(al, t, theta), &nf_inv)
                }
            });
            if !found {
                bad.push(format!(
                    "factor `{}` has no involuted counterpart",
                    al.display_word(s)
                ));
                break;
            }
        }
    }
    // for every a ∈ A± there is a factor #a#
    for &a in ctx.aplus {
        let mut found = false;
        for i in 0..nf.len().saturating_sub(2) {
            if nf[i] == ctx.marker && nf[i + 1] == a && nf[i + 2] == ctx.marker {
                found = true;
                break;
            }
        }
        if !found {
            bad.push(format!("missing factor #{}#", al.name(a)));
        }
    }
    bad
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alphabet::SymbolKind;

    fn setup() -> (Alphabet, SymbolId, SymbolId, SymbolId, SymbolId) {
        let mut al = Alphabet::new();
        al.add_marker("#").unwrap();
        let (d, _) = al.add_pair(SymbolKind::Constant, "d", "d'").unwrap();
        let (e, _) = al.add_pair(SymbolKind::Constant, "e", "e'").unwrap();
        // ids: lam < c so the least representative moves lam first
        let (lam, _) = al.add_pair(SymbolKind::Constant, "cl", "cl'").unwrap();
        let (c, _) = al.add_pair(SymbolKind::Constant, "c", "c'").unwrap();
        (al, d, e, lam, c)
    }

    #[test]
    fn normal_form_empty_theta_identity() {
        let (al, d, e, ..) = setup();
        let th = TypeRelation::new();
        assert_eq!(trace_normal_form(&al, &[e, d, e], &th), vec![e, d, e]);
    }

    #[test]
    fn normal_form_two_representatives() {
        let (al, _, _, lam, c) = setup();
        let mut th = TypeRelation::new();
        th.insert_letter(&al, lam, c);
        th.validate(&al, None).unwrap();
        // w = c c_λ with id(c_λ) < id(c): least representative is c_λ c
        assert_eq!(trace_normal_form(&al, &[c, lam], &th), vec![lam, c]);
    }

    #[test]
    fn normal_form_marker_position_irrelevant() {
        let (al, d, e, lam, c) = setup();
        let mut th = TypeRelation::new();
        th.insert_letter(&al, lam, c);
        // d c_λ c^{λ-1} e equals d c^{ℓ1} c_λ c^{ℓ2} e for ℓ1+ℓ2 = λ-1
        let lambda = 4;
        let base: Word = {
            let mut w = vec![d, lam];
            w.extend(std::iter::repeat(c).take(lambda - 1));
            w.push(e);
            w
        };
        for l1 in 0..lambda {
            let mut w = vec![d];
            w.extend(std::iter::repeat(c).take(l1));
            w.push(lam);
            w.extend(std::iter::repeat(c).take(lambda - 1 - l1));
            w.push(e);
            assert!(trace_equal(&al, &base, &w, &th), "l1 = {l1}");
        }
    }

    #[test]
    fn trace_equal_no_commutation() {
        let (al, .., lam, c) = setup();
        let albar = al.clone();
        let lam_bar = albar.partner(lam);
        let c_bar = albar.partner(c);
        let mut th = TypeRelation::new();
        th.insert_letter(&al, lam, c);
        // c c̄_λ vs c̄_λ c: θ(c̄_λ) = {c̄}, no commutation with c applies
        assert!(!trace_equal(&al, &[c, lam_bar], &[lam_bar, c], &th));
        assert!(trace_equal(&al, &[c_bar, lam_bar], &[lam_bar, c_bar], &th));
    }

    #[test]
    fn block_typing_commutes_pairs() {
        let (al, .., lam, c) = setup();
        let lam_bar = al.partner(lam);
        let c_bar = al.partner(c);
        let mut th = TypeRelation::new();
        th.insert_block(&al, Entity::Pair(lam), c);
        th.validate(&al, None).unwrap();
        // c_λ c̄_λ (c c̄)² vs (c c̄) c_λ c̄_λ (c c̄)
        let u: Word = vec![lam, lam_bar, c, c_bar, c, c_bar];
        let v: Word = vec![c, c_bar, lam, lam_bar, c, c_bar];
        assert!(trace_equal(&al, &u, &v, &th));
        // but single letters do not commute
        assert!(!trace_equal(&al, &[lam, c], &[c, lam], &th));
    }

    #[test]
    fn factor_tests() {
        let (al, .., lam, c) = setup();
        let mut th = TypeRelation::new();
        th.insert_letter(&al, lam, c);
        let w: Word = vec![c, lam];
        assert!(is_trace_factor(&al, &w, &w, &th));
        assert!(is_trace_factor(&al, &[lam, c], &w, &th));
        let empty = TypeRelation::new();
        let (d, e) = (SymbolId(1), SymbolId(3));
        assert!(is_trace_factor(&al, &[d], &[e, d, e], &empty));
        assert!(!is_trace_factor(&al, &[d, d], &[e, d, e], &empty));
    }

    #[test]
    fn normal_form_agrees_with_closure_min() {
        // exhaustive rewriting closure on words of length ≤ 8
        let (al, d, _, lam, c) = setup();
        let mut th = TypeRelation::new();
        th.insert_letter(&al, lam, c);
        th.insert_letter(&al, d, c);
        let letters = [d, lam, c];
        let mut words: Vec<Word> = vec![vec![]];
        for _ in 0..4 {
            let mut next = Vec::new();
            for w in &words {
                for &l in &letters {
                    let mut w2 = w.clone();
                    w2.push(l);
                    next.push(w2);
                }
            }
            words = next;
        }
        for w in &words {
            let reps = representatives(&al, w, &th, 100_000).unwrap();
            let min = reps.iter().min().unwrap().clone();
            assert_eq!(trace_normal_form(&al, w, &th), min, "w = {:?}", al.display_word(w));
            for r in &reps {
                assert!(trace_equal(&al, w, r, &th));
            }
        }
    }

    #[test]
    fn length_and_counts_invariant_under_rewrites() {
        let (al, d, _, lam, c) = setup();
        let mut th = TypeRelation::new();
        th.insert_letter(&al, lam, c);
        th.insert_letter(&al, d, c);
        let w: Word = vec![d, c, lam, c, d, lam];
        let reps = representatives(&al, &w, &th, 10_000).unwrap();
        for r in &reps {
            assert_eq!(r.len(), w.len());
            for &l in &[d, c, lam] {
                assert_eq!(
                    r.iter().filter(|&&x| x == l).count(),
                    w.iter().filter(|&&x| x == l).count()
                );
            }
        }
    }

    #[test]
    fn well_formed_clauses() {
        use crate::monoid::{build_reduced_word_monoid, ConstraintMorphism};
        let mut al = Alphabet::new();
        let marker = al.add_marker("#").unwrap();
        let (a, abar) = al.add_pair(SymbolKind::Constant, "a", "a'").unwrap();
        let letters = vec![a, abar];
        let (m, mu0) = build_reduced_word_monoid(&al, &letters, marker).unwrap();
        let mu = ConstraintMorphism { monoid: m, map: mu0.map.clone() };
        let b: BTreeSet<SymbolId> = [marker, a, abar].into_iter().collect();
        let x: BTreeSet<SymbolId> = BTreeSet::new();
        let th = TypeRelation::new();
        // well-formed: # a # a' #
        let good: Word = vec![marker, a, marker, abar, marker];
        let ctx = WellFormedCtx {
            alphabet: &al,
            marker,
            n: good.len(),
            kappa: 100,
            init_marker_count: 3,
            aplus: &letters,
        };
        assert!(well_formed_diagnostics(&ctx, &good, &b, &x, &th, &mu).is_empty());
        // a proper factor a a' has μ = 0
        let bad: Word = vec![marker, a, abar, marker, a, marker];
        let diags = well_formed_diagnostics(&ctx, &bad, &b, &x, &th, &mu);
        assert!(diags.iter().any(|d| d.contains("μ = 0")), "{diags:?}");
        // and a a' is not a trace factor of the well-formed word
        assert!(!is_trace_factor(&al, &[a, abar], &good, &th));
        // missing factor # a' #
        let missing: Word = vec![marker, a, marker, a, marker];
        let diags = well_formed_diagnostics(&ctx, &missing, &b, &x, &th, &mu);
        assert!(diags.iter().any(|d| d.contains("missing factor")), "{diags:?}");
    }

    #[test]
    fn validate_rejects_bad_shapes() {
        let (al, d, e, lam, c) = setup();
        let mut th = TypeRelation::new();
        th.insert_letter(&al, d, c);
        th.insert_letter(&al, e, lam); // second distinguished letter
        assert!(th.validate(&al, None).is_err());

        let mut th2 = TypeRelation::new();
        th2.insert_letter(&al, c, c);
        assert!(th2.validate(&al, None).is_err());
    }
}
