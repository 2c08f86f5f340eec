//! The directed labeled graph of extended equations: vertices (W, B, X, θ, μ),
//! the six arc kinds with their side conditions, the forward property,
//! canonicalization and interning, usefulness pruning, and assembly of the
//! endomorphism-labeled NFA.

use crate::alphabet::{Alphabet, SymbolId, SymbolKind, Word};
use crate::edt0l::{EdtolSystem, EndoNfa, Endomorphism};
use crate::monoid::{Elem, Monoid};
use crate::trace::{trace_equal, trace_normal_form, TypeRelation};
use crate::{Error, Result};
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::rc::Rc;

/// An extended equation (W, B, X, θ, μ).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Vertex {
    pub w: Word,
    pub b: BTreeSet<SymbolId>,
    pub x: BTreeSet<SymbolId>,
    pub theta: TypeRelation,
    pub mu: BTreeMap<SymbolId, Elem>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ArcKind {
    Df1,
    Df2,
    Df3,
    Df4,
    Df5,
    Df6,
}

impl std::fmt::Display for ArcKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ArcKind::Df1 => "df1",
            ArcKind::Df2 => "df2",
            ArcKind::Df3 => "df3",
            ArcKind::Df4 => "df4",
            ArcKind::Df5 => "df5",
            ArcKind::Df6 => "df6",
        };
        write!(f, "{s}")
    }
}

/// Final vertices have no variables, no commutation, and a self-involutive
/// equation word.
pub fn is_final(alphabet: &Alphabet, v: &Vertex) -> bool {
    v.x.is_empty()
        && v.theta.is_empty()
        && alphabet
            .involute_word(&v.w)
            .map(|inv| trace_equal(alphabet, &v.w, &inv, &v.theta))
            .unwrap_or(false)
}

fn reject(kind: &'static str, clause: impl Into<String>) -> Error {
    Error::ArcRejected { kind, clause: clause.into() }
}

fn mu_eval(m: &Monoid, mu: &BTreeMap<SymbolId, Elem>, w: &[SymbolId]) -> Option<Elem> {
    let mut acc = m.identity();
    for x in w {
        acc = m.mul(acc, *mu.get(x)?);
    }
    Some(acc)
}

/// The defining letter of a compression label: the unbarred mapped letter.
pub fn label_letter(alphabet: &Alphabet, h: &Endomorphism) -> Option<SymbolId> {
    let mut keys: Vec<SymbolId> = h.map.keys().copied().collect();
    keys.sort();
    keys.iter()
        .copied()
        .find(|&c| c <= alphabet.partner(c))
        .or_else(|| keys.first().copied())
}

/// Validates an arc of the given kind between two concrete vertices. All
/// side conditions are checked; a violated clause produces a typed
/// rejection naming it.
pub fn validate_arc(
    alphabet: &Alphabet,
    monoid: &Rc<Monoid>,
    kind: ArcKind,
    src: &Vertex,
    dst: &Vertex,
    label: &Endomorphism,
) -> Result<()> {
    match kind {
        ArcKind::Df1 | ArcKind::Df2 => {
            let c = label_letter(alphabet, label)
                .ok_or_else(|| reject("df1/df2", "label maps no letter"))?;
            let u = label.image(c);
            if u.is_empty() {
                return Err(reject("df1/df2", "empty image"));
            }
            if !label.respects_involution(alphabet)? {
                return Err(reject("df1/df2", "label violates the involution"));
            }
            if u.iter().any(|l| !src.b.contains(l)) {
                return Err(reject("df1/df2", "image uses letters outside B"));
            }
            // 0 ≠ μ'(c) = μ(h(c)) ≠ 1
            let img_mu = mu_eval(monoid, &src.mu, &u)
                .ok_or_else(|| reject("df1/df2", "μ undefined on image"))?;
            let c_mu = *dst.mu.get(&c).ok_or_else(|| reject("df1/df2", "μ' undefined on c"))?;
            if monoid.is_zero(c_mu) || c_mu == monoid.identity() {
                return Err(reject("df1/df2", "μ'(c) is 0 or 1"));
            }
            if c_mu != img_mu {
                return Err(reject("df1/df2", "μ'(c) ≠ μ(h(c))"));
            }
            match kind {
                ArcKind::Df1 => {
                    if u.len() != 1 {
                        return Err(reject("df1", "renaming image must be a single letter"));
                    }
                    let mut bigger = src.b.clone();
                    bigger.insert(c);
                    bigger.insert(alphabet.partner(c));
                    if dst.b != bigger || src.b.contains(&c) {
                        return Err(reject("df1", "B' must be B ∪ {c, c̄} with c fresh"));
                    }
                    for (e, p) in src.theta.entries() {
                        if dst.theta.partner_of(e) != Some(*p) {
                            return Err(reject("df1", "θ ⊄ θ'"));
                        }
                    }
                }
                ArcKind::Df2 => {
                    if u.len() > 3 {
                        return Err(reject("df2", "|h(c)| > 3"));
                    }
                    if u.len() == 3 {
                        // u = a ā c with a = c or the blocks related in θ
                        let (a, abar, last) = (u[0], u[1], u[2]);
                        if abar != alphabet.partner(a) || last != c {
                            return Err(reject("df2", "length-3 image must be a ā c"));
                        }
                        let linked = a == c
                            || dst.theta.partner_of(&crate::trace::Entity::Pair(c))
                                == Some(crate::trace::BlockPartner::Pair(a))
                            || dst.theta.partner_of(&crate::trace::Entity::Pair(a))
                                == Some(crate::trace::BlockPartner::Pair(c));
                        if !linked {
                            return Err(reject("df2", "a ā and c c̄ not related by θ"));
                        }
                    }
                    let same_b = src.b == dst.b;
                    if same_b {
                        if src.theta != dst.theta {
                            return Err(reject("df2", "θ must be unchanged when B = B'"));
                        }
                    } else {
                        let mut bigger = src.b.clone();
                        bigger.insert(c);
                        bigger.insert(alphabet.partner(c));
                        if dst.b != bigger || src.b.contains(&c) {
                            return Err(reject("df2", "B' must be B ∪ {c, c̄}"));
                        }
                        if !src.theta.is_empty() || !dst.theta.is_empty() {
                            return Err(reject("df2", "θ must be empty when B grows"));
                        }
                    }
                }
                _ => unreachable!(),
            }
            if src.x != dst.x {
                return Err(reject("df1/df2", "variables must not change"));
            }
            // μ agrees on (B ∩ B') ∪ X except at the mapped letters, where
            // μ'(c) = μ(h(c)) is checked above
            for s in src.b.intersection(&dst.b).chain(src.x.iter()) {
                if label.map.contains_key(s) {
                    continue;
                }
                if src.mu.get(s) != dst.mu.get(s) {
                    return Err(reject("df1/df2", format!("μ differs at `{}`", alphabet.name(*s))));
                }
            }
            // h well-defined on the target trace monoid
            for (e, p) in dst.theta.entries() {
                let ew = crate::trace::entity_word(alphabet, e);
                let pw = crate::trace::partner_word(alphabet, p);
                let mut xy = ew.clone();
                xy.extend(&pw);
                let mut yx = pw;
                yx.extend(&ew);
                if !trace_equal(alphabet, &label.apply(&xy), &label.apply(&yx), &src.theta) {
                    return Err(reject("df1/df2", "h does not respect θ'"));
                }
            }
            // W = h(W')
            if !trace_equal(alphabet, &src.w, &label.apply(&dst.w), &src.theta) {
                return Err(reject("df1/df2", "W ≠ h(W')"));
            }
        }
        ArcKind::Df3 => {
            if !label.map.is_empty() {
                return Err(reject("df3", "alphabet reduction must carry the identity"));
            }
            if !dst.b.is_subset(&src.b) || dst.b == src.b {
                return Err(reject("df3", "B' must be a proper subset of B"));
            }
            if !dst.theta.is_empty() {
                return Err(reject("df3", "θ' must be empty"));
            }
            if src.x != dst.x {
                return Err(reject("df3", "variables must not change"));
            }
            if !trace_equal(alphabet, &src.w, &dst.w, &src.theta) {
                return Err(reject("df3", "W must be unchanged"));
            }
            if dst.w.iter().any(|l| alphabet.kind(*l) != SymbolKind::Variable && !dst.b.contains(l)) {
                return Err(reject("df3", "W uses removed letters"));
            }
            for s in dst.b.iter().chain(dst.x.iter()) {
                if src.mu.get(s) != dst.mu.get(s) {
                    return Err(reject("df3", "μ' is not the restriction of μ"));
                }
            }
        }
        ArcKind::Df4 | ArcKind::Df5 | ArcKind::Df6 => {
            if !label.map.is_empty() {
                return Err(reject("df4/df5/df6", "substitution arcs carry the identity label"));
            }
            if src.b != dst.b {
                return Err(reject("df4/df5/df6", "constants must not change"));
            }
            match kind {
                ArcKind::Df4 => {
                    let removed: Vec<SymbolId> = src.x.difference(&dst.x).copied().collect();
                    let (x, xbar) = match removed.as_slice() {
                        [a] if alphabet.partner(*a) == *a => (*a, *a),
                        [a, b] if alphabet.partner(*a) == *b => (*a, *b),
                        _ => return Err(reject("df4", "exactly one variable pair must be removed")),
                    };
                    let tau: Word = src.w.iter().copied().filter(|&s| s != x && s != xbar).collect();
                    if !trace_equal(alphabet, &tau, &dst.w, &dst.theta) {
                        return Err(reject("df4", "W' ≠ τ(W) for τ(X) = 1"));
                    }
                }
                ArcKind::Df5 => {
                    if src.x != dst.x
                        || src.mu != dst.mu
                        || !trace_equal(alphabet, &src.w, &dst.w, &dst.theta)
                    {
                        return Err(reject("df5", "only θ may change"));
                    }
                    let mut new_entries = Vec::new();
                    for (e, p) in dst.theta.entries() {
                        if src.theta.partner_of(e) != Some(*p) {
                            new_entries.push((*e, *p));
                        }
                    }
                    if new_entries.is_empty() {
                        return Err(reject("df5", "no new typing added"));
                    }
                    for (e, p) in &new_entries {
                        let x = match e {
                            crate::trace::Entity::Sym(x) => *x,
                            _ => return Err(reject("df5", "only variables may be typed here")),
                        };
                        if alphabet.kind(x) != SymbolKind::Variable {
                            return Err(reject("df5", "typed symbol is not a variable"));
                        }
                        if src.theta.type_of_symbol(x).is_some() {
                            return Err(reject("df5", "variable already typed"));
                        }
                        let pw = crate::trace::partner_word(alphabet, p);
                        let mut xp: Word = vec![x];
                        xp.extend(&pw);
                        let mut px: Word = pw.clone();
                        px.push(x);
                        let l = mu_eval(monoid, &src.mu, &xp);
                        let r = mu_eval(monoid, &src.mu, &px);
                        if l.is_none() || l != r {
                            return Err(reject("df5", "μ(Xp) ≠ μ(pX)"));
                        }
                    }
                    dst.theta
                        .validate(alphabet, None)
                        .map_err(|e| reject("df5", format!("θ' invalid: {e}")))?;
                }
                ArcKind::Df6 => {
                    if src.x != dst.x || src.theta != dst.theta {
                        return Err(reject("df6", "variables and θ must not change"));
                    }
                    // the substituted variable sits next to the first point
                    // where the words disagree; try those first, then any
                    // variable with a changed μ, then the rest
                    let mut candidates: Vec<SymbolId> = Vec::new();
                    let d = src
                        .w
                        .iter()
                        .zip(dst.w.iter())
                        .position(|(a, b)| a != b)
                        .unwrap_or(0);
                    let lo = d.saturating_sub(2);
                    let hi = (d + 8).min(dst.w.len());
                    for &s in &dst.w[lo..hi] {
                        if src.x.contains(&s) && !candidates.contains(&s) {
                            candidates.push(s);
                            let bar = alphabet.partner(s);
                            if !candidates.contains(&bar) {
                                candidates.push(bar);
                            }
                        }
                    }
                    for v in src.x.iter().copied() {
                        if src.mu.get(&v) != dst.mu.get(&v) && !candidates.contains(&v) {
                            candidates.push(v);
                        }
                    }
                    for v in src.x.iter().copied() {
                        if !candidates.contains(&v) {
                            candidates.push(v);
                        }
                    }
                    let mut ok = false;
                    'cand: for &x in &candidates {
                        let occ = src.w.iter().filter(|&&s| s == x || s == alphabet.partner(x)).count();
                        if occ == 0 {
                            continue;
                        }
                        let plen = match dst.w.len().checked_sub(src.w.len()) {
                            Some(d) if d % occ == 0 && d / occ >= 1 => d / occ,
                            _ => continue,
                        };
                        // read p off W' around an occurrence of X or X̄
                        let mut ps: Vec<Word> = Vec::new();
                        if let Some(pos) = dst.w.iter().position(|&s| s == x) {
                            if pos >= plen {
                                ps.push(dst.w[pos - plen..pos].to_vec());
                            }
                        }
                        if let Some(pos) = dst.w.iter().position(|&s| s == alphabet.partner(x)) {
                            if pos + 1 + plen <= dst.w.len() {
                                let pbar = dst.w[pos + 1..pos + 1 + plen].to_vec();
                                ps.push(alphabet.involute_word(&pbar)?);
                            }
                        }
                        for p in ps {
                            if try_df6(alphabet, monoid, src, dst, x, &p)? {
                                ok = true;
                                break 'cand;
                            }
                        }
                    }
                    if !ok {
                        return Err(reject("df6", "no variable substitution X ↦ pX matches"));
                    }
                }
                _ => unreachable!(),
            }
        }
    }
    Ok(())
}

/// Checks one candidate df6 substitution τ(X) = pX against the target.
fn try_df6(
    alphabet: &Alphabet,
    monoid: &Rc<Monoid>,
    src: &Vertex,
    dst: &Vertex,
    x: SymbolId,
    p: &[SymbolId],
) -> Result<bool> {
    if p.is_empty() || p.iter().any(|l| !src.b.contains(l)) {
        return Ok(false);
    }
    // θ(X) ⊆ {p}
    if let Some(bp) = src.theta.type_of_symbol(x) {
        let pw = crate::trace::partner_word(alphabet, &bp);
        if pw != p {
            return Ok(false);
        }
    }
    // μ(X) = μ(p) μ'(X)
    let (mx, mx2) = match (src.mu.get(&x), dst.mu.get(&x)) {
        (Some(a), Some(b)) => (*a, *b),
        _ => return Ok(false),
    };
    let mp = match mu_eval(monoid, &src.mu, p) {
        Some(m) => m,
        None => return Ok(false),
    };
    if mx != monoid.mul(mp, mx2) {
        return Ok(false);
    }
    let xbar = alphabet.partner(x);
    let pbar = alphabet.involute_word(p)?;
    let apply_tau = |w: &[SymbolId]| -> Word {
        let mut out = Vec::new();
        for &s in w {
            if s == x {
                out.extend(p.iter());
                out.push(x);
            } else if s == xbar {
                out.push(xbar);
                out.extend(pbar.iter());
            } else {
                out.push(s);
            }
        }
        out
    };
    if !trace_equal(alphabet, &apply_tau(&src.w), &dst.w, &dst.theta) {
        return Ok(false);
    }
    // τ respects θ: τ(ey) = τ(ye) for every typed pair
    for (e, bp) in dst.theta.entries() {
        let ew = crate::trace::entity_word(alphabet, e);
        let pw = crate::trace::partner_word(alphabet, bp);
        let mut ey = ew.clone();
        ey.extend(&pw);
        let mut ye = pw.clone();
        ye.extend(&ew);
        if !trace_equal(alphabet, &apply_tau(&ey), &apply_tau(&ye), &dst.theta) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// The forward property at an arc: α σ(W) = α h σ'(W') exactly in A*.
pub fn check_forward(
    alphabet: &Alphabet,
    src: &Vertex,
    dst: &Vertex,
    label: &Endomorphism,
    alpha: &BTreeMap<SymbolId, Word>,
    sigma: &BTreeMap<SymbolId, Word>,
    sigma2: &BTreeMap<SymbolId, Word>,
) -> Result<()> {
    let subst = |w: &[SymbolId], map: &BTreeMap<SymbolId, Word>| -> Word {
        let mut out = Vec::new();
        for &s in w {
            match map.get(&s) {
                Some(img) => out.extend(img.iter()),
                None => out.push(s),
            }
        }
        out
    };
    let lhs = subst(&subst(&src.w, sigma), alpha);
    let rhs = subst(&label.apply(&subst(&dst.w, sigma2)), alpha);
    if lhs == rhs {
        Ok(())
    } else {
        Err(Error::ForwardViolation(format!(
            "ασ(W) = {} but αhσ'(W') = {}",
            alphabet.display_word(&lhs),
            alphabet.display_word(&rhs)
        )))
    }
}

/// Interning graph of canonicalized vertices. Non-protected symbols are
/// renamed by first occurrence in a fixed linearization of (W, B, θ, μ);
/// for empty type relations equality of canonical forms is an isomorphism
/// test.
#[derive(Debug)]
pub struct EquationGraph {
    pub canon: Alphabet,
    protected: u32,
    const_pool: Vec<(SymbolId, SymbolId)>,
    var_pool: Vec<(SymbolId, SymbolId)>,
    pub vertices: Vec<Vertex>,
    index: BTreeMap<Vertex, usize>,
    pub labels: Vec<Endomorphism>,
    label_index: BTreeMap<Endomorphism, usize>,
    /// (src, label, dst, kind)
    pub arcs: BTreeSet<(usize, usize, usize, ArcKind)>,
    pub initial: BTreeSet<usize>,
    pub final_: BTreeSet<usize>,
}

impl EquationGraph {
    pub fn new(base: &Alphabet) -> Self {
        EquationGraph {
            canon: base.clone(),
            protected: base.len() as u32,
            const_pool: Vec::new(),
            var_pool: Vec::new(),
            vertices: Vec::new(),
            index: BTreeMap::new(),
            labels: Vec::new(),
            label_index: BTreeMap::new(),
            arcs: BTreeSet::new(),
            initial: BTreeSet::new(),
            final_: BTreeSet::new(),
        }
    }

    fn pool_pair(&mut self, kind: SymbolKind, i: usize) -> (SymbolId, SymbolId) {
        let (pool, prefix) = match kind {
            SymbolKind::Variable => (&mut self.var_pool, "v"),
            _ => (&mut self.const_pool, "g"),
        };
        while pool.len() <= i {
            let n = pool.len();
            let name = format!("%{prefix}{n}");
            let bar = format!("%{prefix}{n}'");
            let pair = self.canon.add_pair(kind, &name, &bar).expect("pool name free");
            pool.push(pair);
        }
        pool[i]
    }

    /// Canonical renaming of a vertex.
    pub fn canonicalize(&mut self, alphabet: &Alphabet, v: &Vertex) -> (Vertex, BTreeMap<SymbolId, SymbolId>) {
        let mut rename: BTreeMap<SymbolId, SymbolId> = BTreeMap::new();
        let mut const_next = 0usize;
        let mut var_next = 0usize;
        // first occurrence in the stored word itself: the raw order is
        // shared between the two ends of substitution arcs, whose words
        // coincide while θ differs
        let mut order: Vec<SymbolId> = v.w.clone();
        let mut rest: Vec<SymbolId> = v
            .b
            .iter()
            .chain(v.x.iter())
            .copied()
            .filter(|s| !v.w.contains(s))
            .collect();
        rest.sort_by_key(|s| (v.mu.get(s).copied(), *s));
        order.extend(rest);
        order.extend(v.theta.symbols_mentioned(alphabet));
        for s in order {
            if s.0 < self.protected || rename.contains_key(&s) {
                continue;
            }
            let kind = alphabet.kind(s);
            let (g, gbar) = match kind {
                SymbolKind::Variable => {
                    let p = self.pool_pair(SymbolKind::Variable, var_next);
                    var_next += 1;
                    p
                }
                _ => {
                    let p = self.pool_pair(SymbolKind::Constant, const_next);
                    const_next += 1;
                    p
                }
            };
            rename.insert(s, g);
            rename.insert(alphabet.partner(s), gbar);
        }
        let map = |s: SymbolId| rename.get(&s).copied().unwrap_or(s);
        let w: Word = v.w.iter().map(|&s| map(s)).collect();
        let b = v.b.iter().map(|&s| map(s)).collect();
        let x = v.x.iter().map(|&s| map(s)).collect();
        let mut theta = TypeRelation::new();
        for (e, p) in v.theta.entries() {
            let e2 = match e {
                crate::trace::Entity::Sym(s) => crate::trace::Entity::Sym(map(*s)),
                crate::trace::Entity::Pair(s) => crate::trace::Entity::Pair(map(*s)),
            };
            match p {
                crate::trace::BlockPartner::Letter(c) => {
                    if let crate::trace::Entity::Sym(s) = e2 {
                        theta.insert_letter(&self.canon, s, map(*c));
                    }
                }
                crate::trace::BlockPartner::Pair(c) => theta.insert_block(&self.canon, e2, map(*c)),
            }
        }
        let mu = v.mu.iter().map(|(&k, &e)| (map(k), e)).collect();
        let mut out = Vertex { w, b, x, theta, mu };
        out.w = trace_normal_form(&self.canon, &out.w, &out.theta);
        (out, rename)
    }

    pub fn intern(&mut self, alphabet: &Alphabet, v: &Vertex) -> (usize, BTreeMap<SymbolId, SymbolId>) {
        let (cv, rename) = self.canonicalize(alphabet, v);
        let id = match self.index.get(&cv) {
            Some(&i) => i,
            None => {
                let i = self.vertices.len();
                self.vertices.push(cv.clone());
                self.index.insert(cv, i);
                i
            }
        };
        (id, rename)
    }

    pub fn add_label(&mut self, h: Endomorphism) -> usize {
        if let Some(&i) = self.label_index.get(&h) {
            return i;
        }
        let i = self.labels.len();
        self.labels.push(h.clone());
        self.label_index.insert(h, i);
        i
    }

    /// Translates a local arc label into canonical names: the canonical
    /// label sends r_dst(x) to r_src(h(x)) for every symbol of the target.
    pub fn translate_label(
        &self,
        dst_local: &Vertex,
        label: &Endomorphism,
        r_src: &BTreeMap<SymbolId, SymbolId>,
        r_dst: &BTreeMap<SymbolId, SymbolId>,
    ) -> Endomorphism {
        let msrc = |s: SymbolId| r_src.get(&s).copied().unwrap_or(s);
        let mdst = |s: SymbolId| r_dst.get(&s).copied().unwrap_or(s);
        let mut map = BTreeMap::new();
        for &sym in dst_local.b.iter().chain(dst_local.x.iter()) {
            let key = mdst(sym);
            let img: Word = label.image(sym).iter().map(|&l| msrc(l)).collect();
            if img.len() == 1 && img[0] == key {
                continue;
            }
            map.insert(key, img);
        }
        Endomorphism { map, extraction: label.extraction }
    }

    pub fn add_arc(&mut self, src: usize, dst: usize, kind: ArcKind, label: Endomorphism) {
        let l = self.add_label(label);
        self.arcs.insert((src, l, dst, kind));
    }

    /// Useful(V) = 1 iff V lies on a path from an initial to a final vertex.
    pub fn compute_useful(&self) -> Vec<bool> {
        let fwd = self.reach(&self.initial, false);
        let bwd = self.reach(&self.final_, true);
        (0..self.vertices.len()).map(|i| fwd.contains(&i) && bwd.contains(&i)).collect()
    }

    fn reach(&self, from: &BTreeSet<usize>, backward: bool) -> BTreeSet<usize> {
        let mut seen = from.clone();
        let mut queue: VecDeque<usize> = from.iter().copied().collect();
        while let Some(s) = queue.pop_front() {
            for &(p, _, q, _) in &self.arcs {
                let (a, b) = if backward { (q, p) } else { (p, q) };
                if a == s && seen.insert(b) {
                    queue.push_back(b);
                }
            }
        }
        seen
    }

    /// Builds the NFA over endomorphism labels: states are the useful
    /// vertices plus the sink; every final vertex gains an extraction arc
    /// labeled by g(#) = u1 # … # uk. With no useful vertex the result is a
    /// one-state NFA without final states.
    pub fn assemble_nfa(
        &self,
        marker: SymbolId,
        k: usize,
        target_letters: &BTreeSet<SymbolId>,
        output_map: Option<BTreeMap<SymbolId, Option<SymbolId>>>,
    ) -> Result<EdtolSystem> {
        let useful = self.compute_useful();
        let live: Vec<usize> = (0..self.vertices.len()).filter(|&i| useful[i]).collect();
        if live.is_empty() {
            let nfa = EndoNfa { states: 1, ..Default::default() };
            return Ok(EdtolSystem {
                alphabet: self.canon.clone(),
                target: target_letters.clone(),
                seed: marker,
                nfa,
                output_map,
            });
        }
        let mut remap: BTreeMap<usize, usize> = BTreeMap::new();
        for (new, &old) in live.iter().enumerate() {
            remap.insert(old, new);
        }
        let sink = live.len();
        let mut nfa = EndoNfa { states: live.len() + 1, ..Default::default() };
        nfa.final_.insert(sink);
        for &i in self.initial.iter().filter(|i| useful[**i]) {
            nfa.initial.insert(remap[&i]);
        }
        let mut label_map: BTreeMap<usize, usize> = BTreeMap::new();
        for &(p, l, q, _) in &self.arcs {
            if useful[p] && useful[q] {
                let nl = *label_map
                    .entry(l)
                    .or_insert_with(|| nfa.add_label(self.labels[l].clone()));
                nfa.arcs.insert((remap[&p], nl, remap[&q]));
            }
        }
        for &f in self.final_.iter().filter(|f| useful[**f]) {
            let v = &self.vertices[f];
            let w1 = extraction_prefix(marker, k, &v.w)?;
            let g = Endomorphism { map: BTreeMap::from([(marker, w1)]), extraction: true };
            let nl = nfa.add_label(g);
            nfa.arcs.insert((remap[&f], nl, sink));
        }
        Ok(EdtolSystem {
            alphabet: self.canon.clone(),
            target: target_letters.clone(),
            seed: marker,
            nfa,
            output_map,
        })
    }
}

/// The prefix u1 # … # uk of W' = # u1 # … # uk # …, the image of the seed
/// under the extraction map.
pub fn extraction_prefix(marker: SymbolId, k: usize, w: &[SymbolId]) -> Result<Word> {
    if w.first() != Some(&marker) {
        return Err(Error::Invalid("final equation does not start with #".into()));
    }
    let mut out: Word = Vec::new();
    let mut hashes = 0usize;
    for &s in &w[1..] {
        if s == marker {
            hashes += 1;
            if hashes == k {
                return Ok(out);
            }
        }
        out.push(s);
    }
    Err(Error::Invalid("fewer than k components in the final equation".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::monoid::build_reduced_word_monoid;

    fn setup() -> (Alphabet, Rc<Monoid>, BTreeMap<SymbolId, Elem>, SymbolId, SymbolId, SymbolId) {
        let mut al = Alphabet::new();
        let h = al.add_marker("#").unwrap();
        let (a, _abar) = al.add_pair(SymbolKind::Constant, "a", "a'").unwrap();
        let (b, _bbar) = al.add_pair(SymbolKind::Constant, "b", "b'").unwrap();
        let letters: Vec<SymbolId> = vec![a, al.partner(a), b, al.partner(b)];
        let (m, mu0) = build_reduced_word_monoid(&al, &letters, h).unwrap();
        let mut mu: BTreeMap<SymbolId, Elem> = BTreeMap::new();
        for &l in &letters {
            mu.insert(l, mu0.get(l).unwrap());
        }
        mu.insert(h, 0);
        (al, m, mu, h, a, b)
    }

    #[test]
    fn final_vertex_detection() {
        let (al, _m, mu, h, a, _b) = setup();
        let abar = al.partner(a);
        let v = Vertex {
            w: vec![h, a, h, abar, h],
            b: BTreeSet::from([a, abar, h]),
            x: BTreeSet::new(),
            theta: TypeRelation::new(),
            mu: mu.clone(),
        };
        assert!(is_final(&al, &v));
        let mut al2 = al.clone();
        let (x, xbar) = al2.add_pair(SymbolKind::Variable, "X", "X'").unwrap();
        let v2 = Vertex {
            w: vec![h, x, h, xbar, h],
            b: BTreeSet::from([a, abar, h]),
            x: BTreeSet::from([x, xbar]),
            theta: TypeRelation::new(),
            mu,
        };
        assert!(!is_final(&al2, &v2));
    }

    #[test]
    fn df4_removal_arc() {
        let (mut al, m, mut mu, h, a, _b) = setup();
        let abar = al.partner(a);
        let (x, xbar) = al.add_pair(SymbolKind::Variable, "X", "X'").unwrap();
        mu.insert(x, m.identity());
        mu.insert(xbar, m.identity());
        let src = Vertex {
            w: vec![h, x, a, h, abar, xbar, h],
            b: BTreeSet::from([h, a, abar]),
            x: BTreeSet::from([x, xbar]),
            theta: TypeRelation::new(),
            mu: mu.clone(),
        };
        let mut dst_mu = mu.clone();
        dst_mu.remove(&x);
        dst_mu.remove(&xbar);
        let dst = Vertex {
            w: vec![h, a, h, abar, h],
            b: src.b.clone(),
            x: BTreeSet::new(),
            theta: TypeRelation::new(),
            mu: dst_mu,
        };
        validate_arc(&al, &m, ArcKind::Df4, &src, &dst, &Endomorphism::identity()).unwrap();
        assert!(is_final(&al, &dst));
    }

    #[test]
    fn df2_compression_restores_word() {
        let (mut al, m, mut mu, h, a, b) = setup();
        let abar = al.partner(a);
        let bbar = al.partner(b);
        al.set_capacity(1000);
        let (c, cbar) = al.fresh_letters(1).unwrap()[0];
        let ab_mu = m.mul(mu[&a], mu[&b]);
        mu.insert(c, ab_mu);
        mu.insert(cbar, m.inv(ab_mu));
        let src_w = vec![h, a, h, abar, h, b, h, bbar, h, a, b, h, bbar, abar, h];
        let dst_w = vec![h, a, h, abar, h, b, h, bbar, h, c, h, cbar, h];
        let b_small: BTreeSet<SymbolId> = BTreeSet::from([h, a, abar, b, bbar]);
        let mut b_big = b_small.clone();
        b_big.insert(c);
        b_big.insert(cbar);
        let mut mu_small = mu.clone();
        mu_small.remove(&c);
        mu_small.remove(&cbar);
        let src = Vertex { w: src_w, b: b_small, x: BTreeSet::new(), theta: TypeRelation::new(), mu: mu_small };
        let dst = Vertex { w: dst_w, b: b_big, x: BTreeSet::new(), theta: TypeRelation::new(), mu };
        let label = Endomorphism::define(&al, c, &[a, b]).unwrap();
        validate_arc(&al, &m, ArcKind::Df2, &src, &dst, &label).unwrap();
        assert_eq!(label.apply(&dst.w), src.w);
    }

    #[test]
    fn df6_rejects_wrong_mu() {
        let (mut al, m, mut mu, h, a, _b) = setup();
        let abar = al.partner(a);
        let (x, xbar) = al.add_pair(SymbolKind::Variable, "X", "X'").unwrap();
        mu.insert(x, mu[&a]);
        mu.insert(xbar, m.inv(mu[&a]));
        let src = Vertex {
            w: vec![h, x, h, xbar, h],
            b: BTreeSet::from([h, a, abar]),
            x: BTreeSet::from([x, xbar]),
            theta: TypeRelation::new(),
            mu: mu.clone(),
        };
        let mut good_mu = mu.clone();
        good_mu.insert(x, m.identity());
        good_mu.insert(xbar, m.identity());
        let dst_good = Vertex {
            w: vec![h, a, x, h, xbar, abar, h],
            b: src.b.clone(),
            x: src.x.clone(),
            theta: TypeRelation::new(),
            mu: good_mu,
        };
        validate_arc(&al, &m, ArcKind::Df6, &src, &dst_good, &Endomorphism::identity()).unwrap();
        // violating μ'(X) = (ā, ā): then μ(a)·μ'(X) = 0 ≠ μ(X)
        let mut bad_mu = mu.clone();
        bad_mu.insert(x, mu[&abar]);
        bad_mu.insert(xbar, m.inv(mu[&abar]));
        let dst_bad = Vertex { mu: bad_mu, ..dst_good.clone() };
        assert!(validate_arc(&al, &m, ArcKind::Df6, &src, &dst_bad, &Endomorphism::identity()).is_err());
    }

    #[test]
    fn forward_property_identity_arc() {
        let (al, _m, mu, h, a, _b) = setup();
        let abar = al.partner(a);
        let v = Vertex {
            w: vec![h, a, h, abar, h],
            b: BTreeSet::from([h, a, abar]),
            x: BTreeSet::new(),
            theta: TypeRelation::new(),
            mu,
        };
        let empty = BTreeMap::new();
        check_forward(&al, &v, &v, &Endomorphism::identity(), &empty, &empty, &empty).unwrap();
    }

    #[test]
    fn canonicalization_swaps_fresh_letters() {
        let (mut al, _m, mu, h, a, _b) = setup();
        al.set_capacity(1000);
        let base = al.clone();
        let pairs = al.fresh_letters(2).unwrap();
        let (c, cbar) = pairs[0];
        let (d, dbar) = pairs[1];
        let mk = |w: Word, extra: &[(SymbolId, SymbolId)]| {
            let mut bset: BTreeSet<SymbolId> = BTreeSet::from([h, a, al.partner(a)]);
            let mut muv = mu.clone();
            for &(l, lb) in extra {
                bset.insert(l);
                bset.insert(lb);
                muv.insert(l, mu[&a]);
                muv.insert(lb, mu[&al.partner(a)]);
            }
            Vertex { w, b: bset, x: BTreeSet::new(), theta: TypeRelation::new(), mu: muv }
        };
        let v1 = mk(vec![h, c, d, h, dbar, cbar, h], &[(c, cbar), (d, dbar)]);
        let v2 = mk(vec![h, d, c, h, cbar, dbar, h], &[(c, cbar), (d, dbar)]);
        let mut g = EquationGraph::new(&base);
        let (c1, _) = g.canonicalize(&al, &v1);
        let (c2, _) = g.canonicalize(&al, &v2);
        assert_eq!(c1, c2);
        // a vertex using only protected letters is unchanged
        let v3 = mk(vec![h, a, h, al.partner(a), h], &[]);
        let (c3, r3) = g.canonicalize(&al, &v3);
        assert_eq!(c3.w, v3.w);
        assert!(r3.is_empty());
        // idempotent
        let canon = g.canon.clone();
        let (c4, _) = g.canonicalize(&canon, &c1);
        assert_eq!(c4, c1);
    }

    #[test]
    fn useful_and_assembly() {
        let (al, _m, mu, h, a, _b) = setup();
        let abar = al.partner(a);
        let mut g = EquationGraph::new(&al);
        let v1 = Vertex {
            w: vec![h, a, h, abar, h],
            b: BTreeSet::from([h, a, abar]),
            x: BTreeSet::new(),
            theta: TypeRelation::new(),
            mu: mu.clone(),
        };
        let v2 = Vertex { w: vec![h, a, a, h, abar, abar, h], ..v1.clone() };
        let (i1, _) = g.intern(&al, &v1);
        let (i2, _) = g.intern(&al, &v2);
        g.initial.insert(i1);
        assert!(g.compute_useful().iter().all(|u| !u));
        let sys = g.assemble_nfa(h, 1, &BTreeSet::from([a, abar]), None).unwrap();
        assert_eq!(sys.nfa.states, 1);
        assert!(sys.nfa.final_.is_empty());
        assert!(sys.is_empty());
        g.final_.insert(i2);
        g.add_arc(i1, i2, ArcKind::Df2, Endomorphism::identity());
        assert!(g.compute_useful().iter().all(|u| *u));
        let sys = g.assemble_nfa(h, 1, &BTreeSet::from([a, abar]), None).unwrap();
        let outs = sys.enumerate(4, 100_000).unwrap();
        assert!(outs.contains(&vec![a, a]));
    }

    #[test]
    fn useful_matches_path_enumeration() {
        let (al, _m, mu, h, a, _b) = setup();
        let abar = al.partner(a);
        let mut g = EquationGraph::new(&al);
        let mut ids = Vec::new();
        for i in 0..6 {
            let mut w = vec![h];
            for _ in 0..=i {
                w.push(a);
            }
            w.push(h);
            for _ in 0..=i {
                w.push(abar);
            }
            w.push(h);
            let v = Vertex {
                w,
                b: BTreeSet::from([h, a, abar]),
                x: BTreeSet::new(),
                theta: TypeRelation::new(),
                mu: mu.clone(),
            };
            let (id, _) = g.intern(&al, &v);
            ids.push(id);
        }
        let mut rng = crate::Rng::new(17);
        let mut edges: Vec<(usize, usize)> = Vec::new();
        for _ in 0..8 {
            let p = ids[(rng.next_u64() % 6) as usize];
            let q = ids[(rng.next_u64() % 6) as usize];
            edges.push((p, q));
            g.add_arc(p, q, ArcKind::Df2, Endomorphism::identity());
        }
        g.initial.insert(ids[0]);
        g.final_.insert(ids[5]);
        let useful = g.compute_useful();
        fn dfs(cur: usize, target: usize, edges: &[(usize, usize)], path: &mut Vec<usize>, on: &mut Vec<bool>) {
            if cur == target {
                for &v in path.iter() {
                    on[v] = true;
                }
                return;
            }
            for &(p, q) in edges {
                if p == cur && !path.contains(&q) {
                    path.push(q);
                    dfs(q, target, edges, path, on);
                    path.pop();
                }
            }
        }
        let mut on_path = vec![false; g.vertices.len()];
        let mut path = vec![ids[0]];
        dfs(ids[0], ids[5], &edges, &mut path, &mut on_path);
        for (i, &u) in useful.iter().enumerate() {
            assert_eq!(u, on_path[i], "vertex {i}");
        }
    }

    #[test]
    fn extraction_prefix_components() {
        let (al, ..) = setup();
        let h = al.marker().unwrap();
        let a = al.lookup("a").unwrap();
        let b = al.lookup("b").unwrap();
        let w = vec![h, a, h, b, b, h, a];
        assert_eq!(extraction_prefix(h, 2, &w).unwrap(), vec![a, h, b, b]);
        assert_eq!(extraction_prefix(h, 1, &w).unwrap(), vec![a]);
        assert!(extraction_prefix(h, 4, &w).is_err());
    }
}
