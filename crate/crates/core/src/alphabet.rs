//! Symbol universe with involution: constants, variables, the marker `#`,
//! words, and fresh-letter allocation against a capacity budget.

use crate::{Error, Result};
use std::collections::BTreeMap;
use std::fmt;

/// Dense small-integer handle for a symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SymbolId(pub u32);

impl SymbolId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for SymbolId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SymbolKind {
    Constant,
    Variable,
    Marker,
}

#[derive(Debug, Clone)]
pub struct Symbol {
    pub name: String,
    pub kind: SymbolKind,
    pub partner: SymbolId,
}

/// A word is a sequence of symbol ids.
pub type Word = Vec<SymbolId>;

/// Symbol table closed under involution. The involution is stored as an
/// explicit partner table so taking bars is O(1) and serialization is stable.
///
/// Construction is single-owner; solver branches work on value-semantic
/// clones and extend them independently.
#[derive(Debug, Clone, Default)]
pub struct Alphabet {
    symbols: Vec<Symbol>,
    by_name: BTreeMap<String, SymbolId>,
    marker: Option<SymbolId>,
    /// Maximum number of constants (|C| = kappa * n); unlimited until set.
    capacity: Option<usize>,
    fresh_counter: u32,
}

impl Alphabet {
    pub fn new() -> Self {
        Alphabet::default()
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = SymbolId> + '_ {
        (0..self.symbols.len() as u32).map(SymbolId)
    }

    pub fn get(&self, id: SymbolId) -> Result<&Symbol> {
        self.symbols.get(id.index()).ok_or(Error::UnknownSymbol(id.0))
    }

    pub fn name(&self, id: SymbolId) -> &str {
        &self.symbols[id.index()].name
    }

    pub fn kind(&self, id: SymbolId) -> SymbolKind {
        self.symbols[id.index()].kind
    }

    pub fn partner(&self, id: SymbolId) -> SymbolId {
        self.symbols[id.index()].partner
    }

    pub fn is_self_involuting(&self, id: SymbolId) -> bool {
        self.partner(id) == id
    }

    pub fn marker(&self) -> Option<SymbolId> {
        self.marker
    }

    pub fn lookup(&self, name: &str) -> Option<SymbolId> {
        self.by_name.get(name).copied()
    }

    pub fn set_capacity(&mut self, cap: usize) {
        self.capacity = Some(cap);
    }

    pub fn constant_count(&self) -> usize {
        self.symbols
            .iter()
            .filter(|s| s.kind != SymbolKind::Variable)
            .count()
    }

    fn push(&mut self, name: String, kind: SymbolKind, partner: SymbolId) -> Result<SymbolId> {
        if self.by_name.contains_key(&name) {
            return Err(Error::Invalid(format!("duplicate symbol name `{name}`")));
        }
        let id = SymbolId(self.symbols.len() as u32);
        self.symbols.push(Symbol { name: name.clone(), kind, partner });
        self.by_name.insert(name, id);
        Ok(id)
    }

    /// The unique self-involuting marker `#`.
    pub fn add_marker(&mut self, name: &str) -> Result<SymbolId> {
        if self.marker.is_some() {
            return Err(Error::Invalid("marker already present".into()));
        }
        let id = SymbolId(self.symbols.len() as u32);
        let id2 = self.push(name.to_string(), SymbolKind::Marker, id)?;
        debug_assert_eq!(id, id2);
        self.marker = Some(id);
        Ok(id)
    }

    /// Adds an involutive pair (x, x̄) of the given kind.
    pub fn add_pair(&mut self, kind: SymbolKind, name: &str, bar_name: &str) -> Result<(SymbolId, SymbolId)> {
        let a = SymbolId(self.symbols.len() as u32);
        let b = SymbolId(self.symbols.len() as u32 + 1);
        self.push(name.to_string(), kind, b)?;
        self.push(bar_name.to_string(), kind, a)?;
        Ok((a, b))
    }

    /// Adds a self-involuting constant (Part-II raw alphabets only; the
    /// encoded working alphabet never contains one besides the marker).
    pub fn add_self_involuting(&mut self, kind: SymbolKind, name: &str) -> Result<SymbolId> {
        let id = SymbolId(self.symbols.len() as u32);
        let id2 = self.push(name.to_string(), kind, id)?;
        debug_assert_eq!(id, id2);
        Ok(id)
    }

    /// Reverse of w with each symbol replaced by its partner.
    pub fn involute_word(&self, w: &[SymbolId]) -> Result<Word> {
        let mut out = Vec::with_capacity(w.len());
        for &id in w.iter().rev() {
            out.push(self.get(id)?.partner);
        }
        Ok(out)
    }

    /// True iff no factor `a ā` occurs.
    pub fn is_reduced_free_group(&self, w: &[SymbolId]) -> bool {
        w.windows(2).all(|p| self.partner(p[0]) != p[1])
    }

    /// Allocates `count` fresh involutive constant pairs (c, c̄), disjoint
    /// from everything present. Errors when the kappa budget is exhausted.
    pub fn fresh_letters(&mut self, count: usize) -> Result<Vec<(SymbolId, SymbolId)>> {
        if let Some(cap) = self.capacity {
            let have = self.constant_count();
            if have + 2 * count > cap {
                return Err(Error::AlphabetBudget { need: 2 * count, avail: cap.saturating_sub(have) });
            }
        }
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            let n = self.fresh_counter;
            self.fresh_counter += 1;
            let name = format!("%c{n}");
            let bar = format!("%c{n}'");
            out.push(self.add_pair(SymbolKind::Constant, &name, &bar)?);
        }
        Ok(out)
    }

    /// Fresh variable pair allocation, counter-based so reductions are
    /// reproducible byte-for-byte.
    pub fn fresh_variable_pair(&mut self, hint: &str) -> Result<(SymbolId, SymbolId)> {
        let n = self.fresh_counter;
        self.fresh_counter += 1;
        let name = format!("%{hint}{n}");
        let bar = format!("%{hint}{n}'");
        self.add_pair(SymbolKind::Variable, &name, &bar)
    }

    /// Rewires a partner link; used only when rebuilding an alphabet from a
    /// serialized symbol table.
    pub fn relink_partner(&mut self, id: SymbolId, partner: SymbolId) {
        self.symbols[id.index()].partner = partner;
    }

    pub fn display_word(&self, w: &[SymbolId]) -> String {
        if w.is_empty() {
            return "1".to_string();
        }
        w.iter().map(|&id| self.name(id)).collect::<Vec<_>>().join(" ")
    }

    /// Checks the partner table is a perfect matching apart from the marker
    /// (and any explicitly self-involuting raw constants).
    pub fn check_involution(&self) -> Result<()> {
        for id in self.ids() {
            let p = self.partner(id);
            let s = self.get(id)?;
            if self.partner(p) != id {
                return Err(Error::Invalid(format!("involution not involutive at `{}`", s.name)));
            }
            if self.kind(p) != s.kind {
                return Err(Error::Invalid(format!("involution changes kind at `{}`", s.name)));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn small() -> (Alphabet, SymbolId, SymbolId, SymbolId, SymbolId, SymbolId) {
        let mut al = Alphabet::new();
        let h = al.add_marker("#").unwrap();
        let (a, abar) = al.add_pair(SymbolKind::Constant, "a", "a'").unwrap();
        let (b, bbar) = al.add_pair(SymbolKind::Constant, "b", "b'").unwrap();
        let _ = bbar;
        (al, h, a, abar, b, bbar)
    }

    #[test]
    fn involute_empty() {
        let (al, ..) = small();
        assert_eq!(al.involute_word(&[]).unwrap(), Vec::<SymbolId>::new());
    }

    #[test]
    fn involute_definition_unrolled() {
        let (al, _, a, abar, b, bbar) = small();
        // a b -> b' a'
        assert_eq!(al.involute_word(&[a, b]).unwrap(), vec![bbar, abar]);
    }

    #[test]
    fn involute_marker_self() {
        let (al, h, a, abar, ..) = small();
        // # a # -> # a' #
        assert_eq!(al.involute_word(&[h, a, h]).unwrap(), vec![h, abar, h]);
    }

    #[test]
    fn involute_unknown_symbol_errors() {
        let (al, ..) = small();
        assert!(al.involute_word(&[SymbolId(999)]).is_err());
    }

    #[test]
    fn reduced_predicate() {
        let (al, _, a, abar, b, _) = small();
        assert!(!al.is_reduced_free_group(&[a, abar, b]));
        assert!(al.is_reduced_free_group(&[a, b]));
    }

    #[test]
    fn reduced_count_length_two() {
        // over A± with |A+| = 2 there are 16 pairs and 12 reduced ones
        let (al, _, a, abar, b, bbar) = small();
        let letters = [a, abar, b, bbar];
        let mut count = 0;
        for &x in &letters {
            for &y in &letters {
                if al.is_reduced_free_group(&[x, y]) {
                    count += 1;
                }
            }
        }
        assert_eq!(count, 12);
    }

    #[test]
    fn fresh_allocation_and_budget() {
        let (mut al, ..) = small();
        al.set_capacity(100);
        let before = al.len();
        let pairs = al.fresh_letters(1).unwrap();
        assert_eq!(pairs.len(), 1);
        assert_eq!(al.len(), before + 2);

        let mut tight = Alphabet::new();
        tight.add_marker("#").unwrap();
        tight.add_pair(SymbolKind::Constant, "a", "a'").unwrap();
        tight.set_capacity(4);
        assert!(matches!(tight.fresh_letters(1), Err(Error::AlphabetBudget { .. })));
    }

    #[test]
    fn fresh_triple_disjoint_valid() {
        let (mut al, ..) = small();
        al.set_capacity(100);
        let pairs = al.fresh_letters(3).unwrap();
        for &(c, cbar) in &pairs {
            assert_eq!(al.partner(c), cbar);
            assert_eq!(al.partner(cbar), c);
            assert_ne!(c, cbar);
        }
        let mut all: Vec<SymbolId> = pairs.iter().flat_map(|&(x, y)| [x, y]).collect();
        all.sort();
        all.dedup();
        assert_eq!(all.len(), 6);
        al.check_involution().unwrap();
    }

    proptest! {
        // involution is a length-preserving anti-morphism
        #[test]
        fn involution_antimorphism(u in proptest::collection::vec(0usize..5, 0..8),
                                   v in proptest::collection::vec(0usize..5, 0..8)) {
            let (al, h, a, abar, b, bbar) = small();
            let letters = [h, a, abar, b, bbar];
            let u: Word = u.into_iter().map(|i| letters[i]).collect();
            let v: Word = v.into_iter().map(|i| letters[i]).collect();
            let uv: Word = u.iter().chain(v.iter()).copied().collect();
            let mut rhs = al.involute_word(&v).unwrap();
            rhs.extend(al.involute_word(&u).unwrap());
            prop_assert_eq!(al.involute_word(&uv).unwrap(), rhs);
            prop_assert_eq!(al.involute_word(&u).unwrap().len(), u.len());
            let back = al.involute_word(&al.involute_word(&u).unwrap()).unwrap();
            prop_assert_eq!(back, u);
        }
    }
}
