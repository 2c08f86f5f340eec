//! EDT0L semantics: endomorphisms of C*, rational control (an NFA whose
//! transitions are labeled by endomorphisms), path evaluation, enumeration,
//! emptiness, finiteness classification, and a byte-stable text format.

use crate::alphabet::{Alphabet, SymbolId, Word};
use crate::{Error, Result};
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write as _;

/// A finite mapping letter → word over C; identity on unmapped letters.
/// Unless flagged as an extraction map, h(c̄) = involute(h(c)) for every
/// mapped c.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Endomorphism {
    pub map: BTreeMap<SymbolId, Word>,
    pub extraction: bool,
}

impl Endomorphism {
    pub fn identity() -> Self {
        Endomorphism::default()
    }

    pub fn is_identity(&self) -> bool {
        self.map.iter().all(|(k, v)| v.len() == 1 && v[0] == *k)
    }

    /// Defines c ↦ u and c̄ ↦ involute(u).
    pub fn define(alphabet: &Alphabet, c: SymbolId, u: &[SymbolId]) -> Result<Self> {
        let mut map = BTreeMap::new();
        map.insert(c, u.to_vec());
        let cbar = alphabet.partner(c);
        if cbar != c {
            map.insert(cbar, alphabet.involute_word(u)?);
        }
        Ok(Endomorphism { map, extraction: false })
    }

    pub fn image(&self, x: SymbolId) -> Word {
        match self.map.get(&x) {
            Some(w) => w.clone(),
            None => vec![x],
        }
    }

    /// Pointwise substitution.
    pub fn apply(&self, w: &[SymbolId]) -> Word {
        let mut out = Vec::with_capacity(w.len());
        for &x in w {
            match self.map.get(&x) {
                Some(u) => out.extend_from_slice(u),
                None => out.push(x),
            }
        }
        out
    }

    /// self ∘ inner: (self ∘ inner)(x) = self(inner(x)).
    pub fn compose(&self, inner: &Endomorphism) -> Endomorphism {
        let mut map = BTreeMap::new();
        for (&x, u) in &inner.map {
            map.insert(x, self.apply(u));
        }
        for (&x, u) in &self.map {
            map.entry(x).or_insert_with(|| u.clone());
        }
        Endomorphism { map, extraction: self.extraction || inner.extraction }
    }

    pub fn respects_involution(&self, alphabet: &Alphabet) -> Result<bool> {
        for (&x, u) in &self.map {
            let bar = alphabet.partner(x);
            let expect = alphabet.involute_word(u)?;
            if self.image(bar) != expect {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// NFA over endomorphism labels. The accepted language is a set of label
/// words, each evaluated right-to-left on the seed.
#[derive(Debug, Clone, Default)]
pub struct EndoNfa {
    pub states: usize,
    pub initial: BTreeSet<usize>,
    pub final_: BTreeSet<usize>,
    pub labels: Vec<Endomorphism>,
    pub arcs: BTreeSet<(usize, usize, usize)>, // (from, label, to)
}

impl EndoNfa {
    pub fn add_label(&mut self, h: Endomorphism) -> usize {
        if let Some(i) = self.labels.iter().position(|l| *l == h) {
            return i;
        }
        self.labels.push(h);
        self.labels.len() - 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    Empty,
    Finite,
    Infinite,
}

impl std::fmt::Display for Classification {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Classification::Empty => write!(f, "empty"),
            Classification::Finite => write!(f, "finite"),
            Classification::Infinite => write!(f, "infinite"),
        }
    }
}

/// An EDT0L system: extended alphabet C, target alphabet A, rational control
/// R, and the seed symbol. The language is { φ(seed) : φ ∈ L(R) }.
/// `output_map`, when present, is applied letterwise to accepted outputs
/// (decoding an encoded working alphabet back to the source letters; `None`
/// images erase).
#[derive(Debug, Clone)]
pub struct EdtolSystem {
    pub alphabet: Alphabet,
    pub target: BTreeSet<SymbolId>,
    pub seed: SymbolId,
    pub nfa: EndoNfa,
    pub output_map: Option<BTreeMap<SymbolId, Option<SymbolId>>>,
}

impl EdtolSystem {
    /// φ(seed) for the composition of the given labels, rightmost applied
    /// first.
    pub fn evaluate_path(&self, labels: &[usize]) -> Word {
        let mut w = vec![self.seed];
        for &l in labels.iter().rev() {
            w = self.nfa.labels[l].apply(&w);
        }
        w
    }

    /// Checks that a label word is accepted, then evaluates it.
    pub fn evaluate_accepted(&self, labels: &[usize]) -> Result<Word> {
        let mut states: BTreeSet<usize> = self.nfa.initial.clone();
        for &l in labels {
            let mut next = BTreeSet::new();
            for &p in &states {
                for &(s, lab, t) in &self.nfa.arcs {
                    if s == p && lab == l {
                        next.insert(t);
                    }
                }
            }
            states = next;
        }
        if states.iter().any(|q| self.nfa.final_.contains(q)) {
            Ok(self.evaluate_path(labels))
        } else {
            Err(Error::Invalid("path not accepted by the rational control".into()))
        }
    }

    pub fn decode(&self, w: &[SymbolId]) -> Word {
        match &self.output_map {
            None => w.to_vec(),
            Some(map) => w
                .iter()
                .filter_map(|x| match map.get(x) {
                    Some(Some(y)) => Some(*y),
                    Some(None) => None,
                    None => Some(*x),
                })
                .collect(),
        }
    }

    /// Letters erasable by some composition of system labels.
    fn erasable(&self) -> BTreeSet<SymbolId> {
        let mut erasable: BTreeSet<SymbolId> = BTreeSet::new();
        loop {
            let mut changed = false;
            for h in &self.nfa.labels {
                for (&x, u) in &h.map {
                    if !erasable.contains(&x) && u.iter().all(|c| erasable.contains(c)) {
                        erasable.insert(x);
                        changed = true;
                    }
                }
            }
            if !changed {
                return erasable;
            }
        }
    }

    /// Exactly { φ(seed) : φ ∈ L(R), |φ(seed)| ≤ max_len } ∩ target*,
    /// computed by breadth-first backward expansion from the final states,
    /// pruned when the non-erasable content already exceeds the bound.
    /// Outputs are decoded through `output_map` when present; the length
    /// bound applies to the undecoded word.
    pub fn enumerate(&self, max_len: usize, budget: usize) -> Result<BTreeSet<Word>> {
        let erasable = self.erasable();
        let lower_bound = |w: &[SymbolId]| w.iter().filter(|c| !erasable.contains(c)).count();
        let mut out = BTreeSet::new();
        let mut seen: BTreeSet<(usize, Word)> = BTreeSet::new();
        let mut queue: VecDeque<(usize, Word)> = VecDeque::new();
        for &f in &self.nfa.final_ {
            let item = (f, vec![self.seed]);
            if seen.insert(item.clone()) {
                queue.push_back(item);
            }
        }
        let mut steps = 0usize;
        while let Some((state, word)) = queue.pop_front() {
            steps += 1;
            if steps > budget {
                return Err(Error::EnumerationBudget);
            }
            if self.nfa.initial.contains(&state)
                && word.len() <= max_len
                && word.iter().all(|c| self.target.contains(c))
            {
                out.insert(self.decode(&word));
            }
            for &(p, l, q) in &self.nfa.arcs {
                if q == state {
                    let w2 = self.nfa.labels[l].apply(&word);
                    if lower_bound(&w2) > max_len {
                        continue;
                    }
                    let item = (p, w2);
                    if seen.insert(item.clone()) {
                        queue.push_back(item);
                    }
                }
            }
        }
        Ok(out)
    }

    /// States on a path from an initial to a final state.
    pub fn useful_states(&self) -> BTreeSet<usize> {
        let fwd = reach(&self.nfa.initial, &self.nfa.arcs, false);
        let bwd = reach(&self.nfa.final_, &self.nfa.arcs, true);
        fwd.intersection(&bwd).copied().collect()
    }

    /// True iff no accepting path exists.
    pub fn is_empty(&self) -> bool {
        self.useful_states().is_empty()
    }

    /// Classification of the solution language. The morphism language is
    /// infinite iff a useful state lies on a cycle; when it does, the output
    /// level is confirmed by pumping a detected cycle twice and comparing
    /// output lengths, falling back to bounded enumeration if the pump does
    /// not grow.
    pub fn classify(&self, budget: usize) -> Result<Classification> {
        let useful = self.useful_states();
        if useful.is_empty() {
            return Ok(Classification::Empty);
        }
        match self.find_useful_cycle(&useful) {
            None => Ok(Classification::Finite),
            Some((state, cycle_labels)) => {
                if let Some((pre, post)) = self.through(state, &useful) {
                    let mut once = pre.clone();
                    once.extend(cycle_labels.iter());
                    once.extend(post.iter());
                    let mut twice = pre;
                    twice.extend(cycle_labels.iter());
                    twice.extend(cycle_labels.iter());
                    twice.extend(post.iter());
                    let w1 = self.evaluate_path(&once);
                    let w2 = self.evaluate_path(&twice);
                    if w2.len() > w1.len() {
                        return Ok(Classification::Infinite);
                    }
                }
                let small = self.enumerate(64, budget)?;
                Ok(if small.len() > 32 { Classification::Infinite } else { Classification::Finite })
            }
        }
    }

    fn find_useful_cycle(&self, useful: &BTreeSet<usize>) -> Option<(usize, Vec<usize>)> {
        for &start in useful {
            let mut stack = vec![(start, Vec::new())];
            let mut visited = BTreeSet::new();
            while let Some((s, path)) = stack.pop() {
                for &(p, l, q) in &self.nfa.arcs {
                    if p == s && useful.contains(&q) {
                        let mut path2 = path.clone();
                        path2.push(l);
                        if q == start {
                            return Some((start, path2));
                        }
                        if visited.insert(q) {
                            stack.push((q, path2));
                        }
                    }
                }
            }
        }
        None
    }

    /// Label sequences from an initial state to `state` and from `state` to
    /// a final state, within the useful subgraph.
    fn through(&self, state: usize, useful: &BTreeSet<usize>) -> Option<(Vec<usize>, Vec<usize>)> {
        let pre = self.path_labels(&self.nfa.initial, state, useful, false)?;
        let post = self.path_labels(&BTreeSet::from([state]), usize::MAX, useful, true)?;
        Some((pre, post))
    }

    fn path_labels(&self, from: &BTreeSet<usize>, to: usize, useful: &BTreeSet<usize>, to_final: bool) -> Option<Vec<usize>> {
        let mut prev: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
        let mut queue: VecDeque<usize> = from.iter().copied().collect();
        let mut seen: BTreeSet<usize> = from.clone();
        let target_hit = |s: usize| if to_final { self.nfa.final_.contains(&s) } else { s == to };
        let mut found = None;
        'outer: while let Some(s) = queue.pop_front() {
            if target_hit(s) {
                found = Some(s);
                break 'outer;
            }
            for &(p, l, q) in &self.nfa.arcs {
                if p == s && useful.contains(&q) && seen.insert(q) {
                    prev.insert(q, (s, l));
                    queue.push_back(q);
                }
            }
        }
        let mut cur = found?;
        let mut labels = Vec::new();
        while let Some(&(p, l)) = prev.get(&cur) {
            labels.push(l);
            cur = p;
        }
        labels.reverse();
        Some(labels)
    }

    /// Line-oriented text serialization; canonical ordering, stable across
    /// runs.
    pub fn serialize(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "edt0l v1");
        let _ = writeln!(s, "symbols {}", self.alphabet.len());
        for id in self.alphabet.ids() {
            let sym = self.alphabet.get(id).unwrap();
            let kind = match sym.kind {
                crate::alphabet::SymbolKind::Constant => "const",
                crate::alphabet::SymbolKind::Variable => "var",
                crate::alphabet::SymbolKind::Marker => "marker",
            };
            let _ = writeln!(s, "symbol {} {} {} {}", id.0, kind, sym.partner.0, sym.name);
        }
        let _ = writeln!(s, "seed {}", self.seed.0);
        let target: Vec<String> = self.target.iter().map(|t| t.0.to_string()).collect();
        let _ = writeln!(s, "target {}", target.join(" "));
        if let Some(map) = &self.output_map {
            for (k, v) in map {
                match v {
                    Some(v) => {
                        let _ = writeln!(s, "decode {} {}", k.0, v.0);
                    }
                    None => {
                        let _ = writeln!(s, "decode {} -", k.0);
                    }
                }
            }
        }
        let _ = writeln!(s, "states {}", self.nfa.states);
        let initial: Vec<String> = self.nfa.initial.iter().map(|x| x.to_string()).collect();
        let _ = writeln!(s, "initial {}", initial.join(" "));
        let final_: Vec<String> = self.nfa.final_.iter().map(|x| x.to_string()).collect();
        let _ = writeln!(s, "final {}", final_.join(" "));
        for (i, h) in self.nfa.labels.iter().enumerate() {
            let mut parts = Vec::new();
            for (k, v) in &h.map {
                let img: Vec<String> = v.iter().map(|x| x.0.to_string()).collect();
                parts.push(format!("{}:{}", k.0, img.join(",")));
            }
            let flag = if h.extraction { "x" } else { "i" };
            let _ = writeln!(s, "endo {} {} {}", i, flag, parts.join(" "));
        }
        for &(p, l, q) in &self.nfa.arcs {
            let _ = writeln!(s, "arc {} {} {}", p, l, q);
        }
        s
    }

    pub fn deserialize(text: &str) -> Result<EdtolSystem> {
        let mut raw_symbols: Vec<(u32, String, u32, String)> = Vec::new();
        let mut seed = None;
        let mut target = BTreeSet::new();
        let mut output_map: BTreeMap<SymbolId, Option<SymbolId>> = BTreeMap::new();
        let mut nfa = EndoNfa::default();
        let err = |line: usize, msg: &str| Error::Parse { line: line + 1, msg: msg.to_string() };
        for (ln, line) in text.lines().enumerate() {
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.is_empty() {
                continue;
            }
            match toks[0] {
                "edt0l" | "symbols" => {}
                "symbol" => {
                    if toks.len() < 5 {
                        return Err(err(ln, "symbol needs: id kind partner name"));
                    }
                    let id: u32 = toks[1].parse().map_err(|_| err(ln, "bad id"))?;
                    let partner: u32 = toks[3].parse().map_err(|_| err(ln, "bad partner"))?;
                    raw_symbols.push((id, toks[2].into(), partner, toks[4].into()));
                }
                "seed" => seed = Some(SymbolId(toks[1].parse().map_err(|_| err(ln, "bad seed"))?)),
                "target" => {
                    for t in &toks[1..] {
                        target.insert(SymbolId(t.parse().map_err(|_| err(ln, "bad target"))?));
                    }
                }
                "decode" => {
                    let k = SymbolId(toks[1].parse().map_err(|_| err(ln, "bad decode key"))?);
                    let v = if toks[2] == "-" {
                        None
                    } else {
                        Some(SymbolId(toks[2].parse().map_err(|_| err(ln, "bad decode value"))?))
                    };
                    output_map.insert(k, v);
                }
                "states" => nfa.states = toks[1].parse().map_err(|_| err(ln, "bad state count"))?,
                "initial" => {
                    for t in &toks[1..] {
                        nfa.initial.insert(t.parse().map_err(|_| err(ln, "bad initial"))?);
                    }
                }
                "final" => {
                    for t in &toks[1..] {
                        nfa.final_.insert(t.parse().map_err(|_| err(ln, "bad final"))?);
                    }
                }
                "endo" => {
                    let idx: usize = toks[1].parse().map_err(|_| err(ln, "bad endo index"))?;
                    if idx != nfa.labels.len() {
                        return Err(err(ln, "endo indices must be consecutive"));
                    }
                    let mut h = Endomorphism { map: BTreeMap::new(), extraction: toks[2] == "x" };
                    for part in &toks[3..] {
                        let (k, img) = part.split_once(':').ok_or_else(|| err(ln, "bad endo entry"))?;
                        let k: u32 = k.parse().map_err(|_| err(ln, "bad endo key"))?;
                        let img: Word = if img.is_empty() {
                            Vec::new()
                        } else {
                            img.split(',')
                                .map(|x| x.parse().map(SymbolId))
                                .collect::<std::result::Result<_, _>>()
                                .map_err(|_| err(ln, "bad endo image"))?
                        };
                        h.map.insert(SymbolId(k), img);
                    }
                    nfa.labels.push(h);
                }
                "arc" => {
                    if toks.len() < 4 {
                        return Err(err(ln, "arc needs: from label to"));
                    }
                    let p: usize = toks[1].parse().map_err(|_| err(ln, "bad arc"))?;
                    let l: usize = toks[2].parse().map_err(|_| err(ln, "bad arc"))?;
                    let q: usize = toks[3].parse().map_err(|_| err(ln, "bad arc"))?;
                    nfa.arcs.insert((p, l, q));
                }
                other => return Err(err(ln, &format!("unknown directive `{other}`"))),
            }
        }
        let mut alphabet = Alphabet::new();
        raw_symbols.sort_by_key(|r| r.0);
        for (i, (id, kind, _partner, name)) in raw_symbols.iter().enumerate() {
            if *id as usize != i {
                return Err(Error::Parse { line: 0, msg: "symbol ids must be dense".into() });
            }
            match kind.as_str() {
                "marker" => {
                    alphabet.add_marker(name)?;
                }
                "const" => {
                    alphabet.add_self_involuting(crate::alphabet::SymbolKind::Constant, name)?;
                }
                "var" => {
                    alphabet.add_self_involuting(crate::alphabet::SymbolKind::Variable, name)?;
                }
                _ => return Err(Error::Parse { line: 0, msg: "bad symbol kind".into() }),
            }
        }
        for (id, _, partner, _) in &raw_symbols {
            alphabet.relink_partner(SymbolId(*id), SymbolId(*partner));
        }
        alphabet.check_involution()?;
        let seed = seed.ok_or(Error::Parse { line: 0, msg: "missing seed".into() })?;
        Ok(EdtolSystem {
            alphabet,
            target,
            seed,
            nfa,
            output_map: if output_map.is_empty() { None } else { Some(output_map) },
        })
    }

    /// DOT export for visualization.
    pub fn to_dot(&self) -> String {
        let mut s = String::from("digraph edt0l {\n  rankdir=LR;\n");
        for i in 0..self.nfa.states {
            let shape = if self.nfa.final_.contains(&i) { "doublecircle" } else { "circle" };
            let style = if self.nfa.initial.contains(&i) { ",style=bold" } else { "" };
            let _ = writeln!(s, "  q{} [shape={}{}];", i, shape, style);
        }
        for &(p, l, q) in &self.nfa.arcs {
            let h = &self.nfa.labels[l];
            let mut desc: Vec<String> = Vec::new();
            for (k, v) in &h.map {
                let img = if v.is_empty() {
                    "1".to_string()
                } else {
                    v.iter().map(|x| self.alphabet.name(*x).to_string()).collect::<Vec<_>>().join(" ")
                };
                desc.push(format!("{}->{}", self.alphabet.name(*k), img));
            }
            let label = if desc.is_empty() { "id".to_string() } else { desc.join("; ") };
            let _ = writeln!(s, "  q{} -> q{} [label=\"{}\"];", p, q, label.replace('"', "'"));
        }
        s.push_str("}\n");
        s
    }
}

fn reach(from: &BTreeSet<usize>, arcs: &BTreeSet<(usize, usize, usize)>, backward: bool) -> BTreeSet<usize> {
    let mut seen = from.clone();
    let mut queue: VecDeque<usize> = from.iter().copied().collect();
    while let Some(s) = queue.pop_front() {
        for &(p, _, q) in arcs {
            let (src, dst) = if backward { (q, p) } else { (p, q) };
            if src == s && seen.insert(dst) {
                queue.push_back(dst);
            }
        }
    }
    seen
}

/// The copy-language example: f(#) = $$, g_a($) = $a, g_b($) = $b, h($) = 1
/// with control h {g_a, g_b}* f produces { vv : v ∈ {a,b}* }.
pub fn example_copy_language() -> EdtolSystem {
    let mut al = Alphabet::new();
    let seed = al.add_marker("#").unwrap();
    let (a, _abar) = al.add_pair(crate::alphabet::SymbolKind::Constant, "a", "a'").unwrap();
    let (b, _bbar) = al.add_pair(crate::alphabet::SymbolKind::Constant, "b", "b'").unwrap();
    let (dollar, _) = al.add_pair(crate::alphabet::SymbolKind::Constant, "$", "$'").unwrap();
    let mut nfa = EndoNfa { states: 3, ..Default::default() };
    nfa.initial.insert(0);
    nfa.final_.insert(2);
    let f = nfa.add_label(Endomorphism { map: BTreeMap::from([(seed, vec![dollar, dollar])]), extraction: true });
    let ga = nfa.add_label(Endomorphism { map: BTreeMap::from([(dollar, vec![dollar, a])]), extraction: true });
    let gb = nfa.add_label(Endomorphism { map: BTreeMap::from([(dollar, vec![dollar, b])]), extraction: true });
    let h = nfa.add_label(Endomorphism { map: BTreeMap::from([(dollar, vec![])]), extraction: true });
    // label word shape: h {g_a, g_b}* f, applied right-to-left (f first)
    nfa.arcs.insert((0, h, 1));
    nfa.arcs.insert((1, ga, 1));
    nfa.arcs.insert((1, gb, 1));
    nfa.arcs.insert((1, f, 2));
    EdtolSystem { alphabet: al, target: BTreeSet::from([a, b]), seed, nfa, output_map: None }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn apply_and_compose() {
        let sys = example_copy_language();
        let al = &sys.alphabet;
        let a = al.lookup("a").unwrap();
        let b = al.lookup("b").unwrap();
        let c = al.lookup("$").unwrap();
        let id = Endomorphism::identity();
        assert_eq!(id.apply(&[a, b]), vec![a, b]);
        let h = Endomorphism { map: BTreeMap::from([(c, vec![a, b])]), extraction: false };
        assert_eq!(h.apply(&[c, b, c]), vec![a, b, b, a, b]);
        // compose(g, h)(w) = g(h(w))
        let g = Endomorphism { map: BTreeMap::from([(a, vec![b, b])]), extraction: false };
        for w in [vec![c], vec![c, a], vec![a, b, c, c]] {
            assert_eq!(g.compose(&h).apply(&w), g.apply(&h.apply(&w)));
        }
    }

    #[test]
    fn example1_path_evaluation() {
        let sys = example_copy_language();
        let al = &sys.alphabet;
        let (a, b) = (al.lookup("a").unwrap(), al.lookup("b").unwrap());
        // labels: 0 = f, 1 = g_a, 2 = g_b, 3 = h
        // word h g_a g_b f evaluates to abab
        let w = sys.evaluate_accepted(&[3, 1, 2, 0]).unwrap();
        assert_eq!(w, vec![a, b, a, b]);
        // h f evaluates to the empty word (v = 1)
        let w = sys.evaluate_accepted(&[3, 0]).unwrap();
        assert_eq!(w, Vec::<SymbolId>::new());
        // empty path from seed is just #
        assert_eq!(sys.evaluate_path(&[]), vec![sys.seed]);
        assert!(sys.evaluate_accepted(&[0]).is_err());
    }

    #[test]
    fn example1_enumeration_is_copy_language() {
        let sys = example_copy_language();
        let al = &sys.alphabet;
        let (a, b) = (al.lookup("a").unwrap(), al.lookup("b").unwrap());
        let got = sys.enumerate(4, 1_000_000).unwrap();
        let mut expect = BTreeSet::new();
        let mut vs: Vec<Word> = vec![vec![]];
        let mut layer: Vec<Word> = vec![vec![]];
        for _ in 0..2 {
            let mut next = Vec::new();
            for v in &layer {
                for &l in &[a, b] {
                    let mut v2 = v.clone();
                    v2.push(l);
                    next.push(v2);
                }
            }
            vs.extend(next.clone());
            layer = next;
        }
        for v in vs {
            let mut vv = v.clone();
            vv.extend(v.iter());
            if vv.len() <= 4 {
                expect.insert(vv);
            }
        }
        assert_eq!(got, expect);
    }

    #[test]
    fn empty_nfa_enumerates_nothing() {
        let mut sys = example_copy_language();
        sys.nfa.final_.clear();
        assert!(sys.is_empty());
        assert!(sys.enumerate(5, 10_000).unwrap().is_empty());
        assert_eq!(sys.classify(10_000).unwrap(), Classification::Empty);
    }

    #[test]
    fn identity_only_nfa() {
        let mut sys = example_copy_language();
        sys.nfa = EndoNfa { states: 1, ..Default::default() };
        sys.nfa.initial.insert(0);
        sys.nfa.final_.insert(0);
        // seed # is not a target letter, so the language is empty
        assert_eq!(sys.enumerate(5, 10_000).unwrap().len(), 0);
        assert!(!sys.is_empty());
    }

    #[test]
    fn classify_cycles() {
        let sys = example_copy_language();
        assert_eq!(sys.classify(1_000_000).unwrap(), Classification::Infinite);
        let mut acyclic = sys.clone();
        acyclic.nfa.arcs = BTreeSet::from([(0usize, 3usize, 1usize), (1, 0, 2)]);
        assert_eq!(acyclic.classify(10_000).unwrap(), Classification::Finite);
    }

    #[test]
    fn serialization_round_trip() {
        let sys = example_copy_language();
        let text = sys.serialize();
        let back = EdtolSystem::deserialize(&text).unwrap();
        assert_eq!(back.serialize(), text);
        let a = sys.enumerate(4, 100_000).unwrap();
        let b = back.enumerate(4, 100_000).unwrap();
        assert_eq!(a, b);
        assert!(EdtolSystem::deserialize("garbage here").is_err());
    }
}
