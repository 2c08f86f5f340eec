//! Finite monoids with involution and the morphisms that encode rational
//! constraints: the reduced-word pair monoids, explicit multiplication
//! tables, Boolean matrix monoids of NFAs, direct products (with optional
//! zero-collapse on designated components), and the dual lift `M × M^T`.

use crate::alphabet::{Alphabet, SymbolId};
use crate::nfa::LetterNfa;
use crate::{Error, Result};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::rc::Rc;

/// Elements are values in a compact encoding, not indices into a table;
/// O(log |N|) bits as required for an efficient representation.
pub type Elem = u128;

/// Junction rule of a pair monoid {1,0} ∪ L×L: the product
/// (a,b)·(c,d) is 0 exactly when (b,c) is a forbidden junction.
#[derive(Debug, Clone)]
pub struct Junction {
    pub forbidden: BTreeSet<(SymbolId, SymbolId)>,
}

#[derive(Debug)]
pub enum MonoidKind {
    /// Explicit multiplication table (finite groups from the input, {1,0}).
    Table {
        elems: Vec<String>,
        mult: Vec<Vec<usize>>,
        inv: Vec<usize>,
        identity: usize,
        zero: Option<usize>,
    },
    /// {1, 0} ∪ L×L with rule-based product; involution (a,b) ↦ (b̄, ā).
    Pair {
        letters: Vec<SymbolId>,
        index: BTreeMap<SymbolId, usize>,
        partner: Vec<usize>,
        junction: Junction,
    },
    /// n×n Boolean matrices, elements encoded as row-major bitmasks;
    /// involution is transposition.
    BoolMat { n: usize },
    /// Direct product. Components flagged in `fold` have their zeros
    /// collapsed: any product with a zero in a folded component is the
    /// global zero (a Rees quotient by that ideal).
    Product {
        factors: Vec<Rc<Monoid>>,
        fold: Vec<bool>,
    },
    /// M × M^T with (x, y)·(x', y') = (xx', y'y) and involution (x,y) ↦ (y,x).
    Dual { base: Rc<Monoid> },
}

#[derive(Debug)]
pub struct Monoid {
    pub kind: MonoidKind,
    size: u128,
}

/// Encoded-zero marker for folded products.
const FOLDED_ZERO: Elem = 0;

impl Monoid {
    pub fn table(elems: Vec<String>, mult: Vec<Vec<usize>>, inv: Vec<usize>, identity: usize, zero: Option<usize>) -> Rc<Monoid> {
        let size = elems.len() as u128;
        Rc::new(Monoid { kind: MonoidKind::Table { elems, mult, inv, identity, zero }, size })
    }

    /// The two-element monoid {1, 0} used to recognize unit letters.
    pub fn bool2() -> Rc<Monoid> {
        Monoid::table(
            vec!["1".into(), "0".into()],
            vec![vec![0, 1], vec![1, 1]],
            vec![0, 1],
            0,
            Some(1),
        )
    }

    pub fn pair(alphabet: &Alphabet, letters: Vec<SymbolId>, junction: Junction) -> Result<Rc<Monoid>> {
        let mut index = BTreeMap::new();
        for (i, &l) in letters.iter().enumerate() {
            index.insert(l, i);
        }
        let mut partner = Vec::with_capacity(letters.len());
        for &l in &letters {
            let p = alphabet.partner(l);
            let pi = *index
                .get(&p)
                .ok_or_else(|| Error::Invalid(format!("pair monoid letters not closed under involution at `{}`", alphabet.name(l))))?;
            partner.push(pi);
        }
        let size = 2 + (letters.len() as u128) * (letters.len() as u128);
        Ok(Rc::new(Monoid { kind: MonoidKind::Pair { letters, index, partner, junction }, size }))
    }

    pub fn bool_mat(n: usize) -> Result<Rc<Monoid>> {
        if n * n > 120 {
            return Err(Error::MonoidTooLarge);
        }
        let size = 1u128 << (n * n);
        Ok(Rc::new(Monoid { kind: MonoidKind::BoolMat { n }, size }))
    }

    pub fn product(factors: Vec<Rc<Monoid>>, fold: Vec<bool>) -> Result<Rc<Monoid>> {
        assert_eq!(factors.len(), fold.len());
        let mut size: u128 = 1;
        for f in &factors {
            size = size.checked_mul(f.size).ok_or(Error::MonoidTooLarge)?;
        }
        // one extra code point for the collapsed zero
        size = size.checked_add(1).ok_or(Error::MonoidTooLarge)?;
        Ok(Rc::new(Monoid { kind: MonoidKind::Product { factors, fold }, size }))
    }

    pub fn dual(base: Rc<Monoid>) -> Result<Rc<Monoid>> {
        let size = base.size.checked_mul(base.size).ok_or(Error::MonoidTooLarge)?;
        Ok(Rc::new(Monoid { kind: MonoidKind::Dual { base }, size }))
    }

    pub fn size(&self) -> u128 {
        self.size
    }

    pub fn identity(&self) -> Elem {
        match &self.kind {
            MonoidKind::Table { identity, .. } => *identity as Elem,
            MonoidKind::Pair { .. } => 1, // encoding: 0 = zero, 1 = identity, 2+ = pairs
            MonoidKind::BoolMat { n } => {
                let mut m: Elem = 0;
                for i in 0..*n {
                    m |= 1 << (i * n + i);
                }
                m
            }
            MonoidKind::Product { factors, .. } => {
                let parts: Vec<Elem> = factors.iter().map(|f| f.identity()).collect();
                self.encode_tuple(&parts)
            }
            MonoidKind::Dual { base } => base.identity() * base.size + base.identity(),
        }
    }

    pub fn zero(&self) -> Option<Elem> {
        match &self.kind {
            MonoidKind::Table { zero, .. } => zero.map(|z| z as Elem),
            MonoidKind::Pair { .. } => Some(0),
            MonoidKind::BoolMat { .. } => Some(0),
            MonoidKind::Product { factors, fold, .. } => {
                if fold.iter().any(|&f| f) {
                    Some(FOLDED_ZERO)
                } else {
                    let parts: Vec<Elem> = factors.iter().map(|f| f.zero()).collect::<Option<Vec<_>>>()?;
                    Some(self.encode_tuple(&parts))
                }
            }
            MonoidKind::Dual { base } => {
                let z = base.zero()?;
                Some(z * base.size + z)
            }
        }
    }

    pub fn is_zero(&self, e: Elem) -> bool {
        self.zero() == Some(e)
    }

    /// Encodes a component tuple of a product (1 + mixed radix; 0 reserved
    /// for the collapsed zero).
    pub fn encode_tuple(&self, parts: &[Elem]) -> Elem {
        match &self.kind {
            MonoidKind::Product { factors, .. } => {
                let mut v: Elem = 0;
                for (f, &p) in factors.iter().zip(parts) {
                    v = v * f.size + p;
                }
                v + 1
            }
            _ => panic!("encode_tuple on non-product"),
        }
    }

    pub fn decode_tuple(&self, e: Elem) -> Option<Vec<Elem>> {
        match &self.kind {
            MonoidKind::Product { factors, .. } => {
                if e == FOLDED_ZERO {
                    return None;
                }
                let mut v = e - 1;
                let mut parts = vec![0; factors.len()];
                for (i, f) in factors.iter().enumerate().rev() {
                    parts[i] = v % f.size;
                    v /= f.size;
                }
                Some(parts)
            }
            _ => panic!("decode_tuple on non-product"),
        }
    }

    /// Projection onto component `i` of a product; the collapsed zero maps
    /// to the component's own zero.
    pub fn component(&self, e: Elem, i: usize) -> Elem {
        match &self.kind {
            MonoidKind::Product { factors, .. } => match self.decode_tuple(e) {
                Some(parts) => parts[i],
                None => factors[i].zero().expect("folded product component must have zero"),
            },
            _ => panic!("component on non-product"),
        }
    }

    pub fn mul(&self, a: Elem, b: Elem) -> Elem {
        match &self.kind {
            MonoidKind::Table { mult, .. } => mult[a as usize][b as usize] as Elem,
            MonoidKind::Pair { letters, partner: _, junction, .. } => {
                if a == 0 || b == 0 {
                    return 0;
                }
                if a == 1 {
                    return b;
                }
                if b == 1 {
                    return a;
                }
                let k = letters.len() as Elem;
                let (a1, a2) = ((a - 2) / k, (a - 2) % k);
                let (b1, b2) = ((b - 2) / k, (b - 2) % k);
                let mid = (letters[a2 as usize], letters[b1 as usize]);
                if junction.forbidden.contains(&mid) {
                    0
                } else {
                    2 + a1 * k + b2
                }
            }
            MonoidKind::BoolMat { n } => {
                let n = *n;
                let mut out: Elem = 0;
                for i in 0..n {
                    for j in 0..n {
                        for l in 0..n {
                            if a >> (i * n + l) & 1 == 1 && b >> (l * n + j) & 1 == 1 {
                                out |= 1 << (i * n + j);
                                break;
                            }
                        }
                    }
                }
                out
            }
            MonoidKind::Product { factors, fold } => {
                if (a == FOLDED_ZERO || b == FOLDED_ZERO)
                    && fold.iter().any(|&f| f) {
                        return FOLDED_ZERO;
                    }
                let pa = self.decode_tuple(a).expect("zero in unfolded product");
                let pb = self.decode_tuple(b).expect("zero in unfolded product");
                let mut parts = Vec::with_capacity(factors.len());
                let mut dead = false;
                for (i, f) in factors.iter().enumerate() {
                    let p = f.mul(pa[i], pb[i]);
                    if fold[i] && f.is_zero(p) {
                        dead = true;
                    }
                    parts.push(p);
                }
                if dead {
                    FOLDED_ZERO
                } else {
                    self.encode_tuple(&parts)
                }
            }
            MonoidKind::Dual { base } => {
                let (x1, y1) = (a / base.size, a % base.size);
                let (x2, y2) = (b / base.size, b % base.size);
                base.mul(x1, x2) * base.size + base.mul(y2, y1)
            }
        }
    }

    pub fn inv(&self, a: Elem) -> Elem {
        match &self.kind {
            MonoidKind::Table { inv, .. } => inv[a as usize] as Elem,
            MonoidKind::Pair { letters, partner, .. } => {
                if a <= 1 {
                    return a;
                }
                let k = letters.len() as Elem;
                let (a1, a2) = ((a - 2) / k, (a - 2) % k);
                2 + (partner[a2 as usize] as Elem) * k + partner[a1 as usize] as Elem
            }
            MonoidKind::BoolMat { n } => {
                let n = *n;
                let mut out: Elem = 0;
                for i in 0..n {
                    for j in 0..n {
                        if a >> (i * n + j) & 1 == 1 {
                            out |= 1 << (j * n + i);
                        }
                    }
                }
                out
            }
            MonoidKind::Product { factors, .. } => {
                if a == FOLDED_ZERO {
                    return FOLDED_ZERO;
                }
                let pa = self.decode_tuple(a).unwrap();
                let parts: Vec<Elem> = factors.iter().zip(&pa).map(|(f, &p)| f.inv(p)).collect();
                self.encode_tuple(&parts)
            }
            MonoidKind::Dual { base } => {
                let (x, y) = (a / base.size, a % base.size);
                y * base.size + x
            }
        }
    }

    pub fn pow(&self, a: Elem, mut k: usize) -> Elem {
        let mut acc = self.identity();
        let mut base = a;
        while k > 0 {
            if k & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            k >>= 1;
        }
        acc
    }

    pub fn display(&self, e: Elem, alphabet: &Alphabet) -> String {
        match &self.kind {
            MonoidKind::Table { elems, .. } => elems[e as usize].clone(),
            MonoidKind::Pair { letters, .. } => match e {
                0 => "0".into(),
                1 => "1".into(),
                _ => {
                    let k = letters.len() as Elem;
                    let (a1, a2) = ((e - 2) / k, (e - 2) % k);
                    format!("({},{})", alphabet.name(letters[a1 as usize]), alphabet.name(letters[a2 as usize]))
                }
            },
            MonoidKind::BoolMat { n } => {
                let mut s = String::from("[");
                for i in 0..*n {
                    for j in 0..*n {
                        let _ = write!(s, "{}", (e >> (i * n + j)) & 1);
                    }
                    if i + 1 < *n {
                        s.push('|');
                    }
                }
                s.push(']');
                s
            }
            MonoidKind::Product { factors, .. } => match self.decode_tuple(e) {
                None => "0".into(),
                Some(parts) => {
                    let inner: Vec<String> = factors.iter().zip(&parts).map(|(f, &p)| f.display(p, alphabet)).collect();
                    format!("<{}>", inner.join(","))
                }
            },
            MonoidKind::Dual { base } => {
                let (x, y) = (e / base.size, e % base.size);
                format!("({},{}^T)", base.display(x, alphabet), base.display(y, alphabet))
            }
        }
    }

    /// All elements, for exhaustive law checks on small monoids.
    pub fn enumerate(&self, cap: usize) -> Option<Vec<Elem>> {
        if self.size > cap as u128 {
            return None;
        }
        match &self.kind {
            MonoidKind::Table { .. } | MonoidKind::Pair { .. } | MonoidKind::BoolMat { .. } => {
                Some((0..self.size as usize).map(|i| i as Elem).collect())
            }
            MonoidKind::Product { factors, fold } => {
                let mut items: Vec<Vec<Elem>> = vec![vec![]];
                for f in factors {
                    let sub = f.enumerate(cap)?;
                    let mut next = Vec::new();
                    for base in &items {
                        for &e in &sub {
                            let mut b = base.clone();
                            b.push(e);
                            next.push(b);
                        }
                    }
                    items = next;
                }
                let mut out: Vec<Elem> = Vec::new();
                if fold.iter().any(|&f| f) {
                    out.push(FOLDED_ZERO);
                }
                for tuple in items {
                    let dead = factors
                        .iter()
                        .zip(fold)
                        .zip(&tuple)
                        .any(|((f, &fo), &p)| fo && f.is_zero(p));
                    if !dead {
                        out.push(self.encode_tuple(&tuple));
                    }
                }
                Some(out)
            }
            MonoidKind::Dual { base } => {
                let sub = base.enumerate(cap)?;
                let mut out = Vec::new();
                for &x in &sub {
                    for &y in &sub {
                        out.push(x * base.size + y);
                    }
                }
                Some(out)
            }
        }
    }

    /// Associativity, involution anti-automorphism, and unit/zero laws.
    /// Exhaustive when |N| ≤ `exhaustive_cap`, otherwise sampled.
    pub fn check_laws(&self, exhaustive_cap: usize, rng: &mut crate::Rng) -> Result<()> {
        let elems = match self.enumerate(exhaustive_cap) {
            Some(e) => e,
            None => {
                // sampled: build random products of generators we can reach
                let mut pool = vec![self.identity()];
                if let Some(z) = self.zero() {
                    pool.push(z);
                }
                for _ in 0..64 {
                    let a = pool[(rng.next_u64() % pool.len() as u64) as usize];
                    let b = pool[(rng.next_u64() % pool.len() as u64) as usize];
                    pool.push(self.mul(a, b));
                }
                pool
            }
        };
        let one = self.identity();
        if self.inv(one) != one {
            return Err(Error::MonoidLaw("1̄ ≠ 1".into()));
        }
        if let Some(z) = self.zero() {
            if self.inv(z) != z {
                return Err(Error::MonoidLaw("0̄ ≠ 0".into()));
            }
        }
        let n = elems.len();
        let idx = |i: usize| elems[i];
        let triple_budget = 200_000usize;
        let full = n.saturating_mul(n).saturating_mul(n) <= triple_budget;
        let check3 = |a: Elem, b: Elem, c: Elem| -> Result<()> {
            if self.mul(self.mul(a, b), c) != self.mul(a, self.mul(b, c)) {
                return Err(Error::MonoidLaw("associativity fails".into()));
            }
            Ok(())
        };
        if full {
            for i in 0..n {
                for j in 0..n {
                    if self.inv(self.mul(idx(i), idx(j))) != self.mul(self.inv(idx(j)), self.inv(idx(i))) {
                        return Err(Error::MonoidLaw("involution not an anti-automorphism".into()));
                    }
                    if self.inv(self.inv(idx(i))) != idx(i) {
                        return Err(Error::MonoidLaw("involution not involutive".into()));
                    }
                    for k in 0..n {
                        check3(idx(i), idx(j), idx(k))?;
                    }
                }
            }
        } else {
            for _ in 0..5000 {
                let a = idx((rng.next_u64() % n as u64) as usize);
                let b = idx((rng.next_u64() % n as u64) as usize);
                let c = idx((rng.next_u64() % n as u64) as usize);
                check3(a, b, c)?;
                if self.inv(self.mul(a, b)) != self.mul(self.inv(b), self.inv(a)) {
                    return Err(Error::MonoidLaw("involution not an anti-automorphism".into()));
                }
            }
        }
        for &e in elems.iter().take(512) {
            if self.mul(one, e) != e || self.mul(e, one) != e {
                return Err(Error::MonoidLaw("identity law fails".into()));
            }
            if let Some(z) = self.zero() {
                if self.mul(z, e) != z || self.mul(e, z) != z {
                    return Err(Error::MonoidLaw("zero not absorbing".into()));
                }
            }
        }
        Ok(())
    }
}

/// A morphism from symbols (constants and variables) into a finite monoid
/// with involution. μ(x̄) = inv(μ(x)) is maintained by `set`.
#[derive(Debug, Clone)]
pub struct ConstraintMorphism {
    pub monoid: Rc<Monoid>,
    pub map: BTreeMap<SymbolId, Elem>,
}

impl ConstraintMorphism {
    pub fn new(monoid: Rc<Monoid>) -> Self {
        ConstraintMorphism { monoid, map: BTreeMap::new() }
    }

    pub fn get(&self, x: SymbolId) -> Option<Elem> {
        self.map.get(&x).copied()
    }

    /// Sets μ(x) and μ(x̄) = inv(μ(x)) together.
    pub fn set(&mut self, alphabet: &Alphabet, x: SymbolId, e: Elem) {
        self.map.insert(x, e);
        let bar = alphabet.partner(x);
        self.map.insert(bar, self.monoid.inv(e));
    }

    pub fn remove(&mut self, alphabet: &Alphabet, x: SymbolId) {
        self.map.remove(&x);
        self.map.remove(&alphabet.partner(x));
    }

    /// Product of images, left to right.
    pub fn eval(&self, alphabet: &Alphabet, w: &[SymbolId]) -> Result<Elem> {
        let mut acc = self.monoid.identity();
        for &x in w {
            let v = self
                .get(x)
                .ok_or_else(|| Error::UnmappedSymbol(alphabet.name(x).to_string()))?;
            acc = self.monoid.mul(acc, v);
        }
        Ok(acc)
    }

    pub fn respects_involution(&self, alphabet: &Alphabet) -> bool {
        self.map.iter().all(|(&x, &e)| {
            self.get(alphabet.partner(x)) == Some(self.monoid.inv(e))
        })
    }
}

/// The reduced-word monoid N = {1,0} ∪ A± × A± with (a,b)·(c,d) = 0 iff
/// b = c̄, plus the morphism μ₀ with μ₀(#) = 0 and μ₀(a) = (a,a);
/// μ₀(w) ≠ 0 iff w is #-free and reduced.
pub fn build_reduced_word_monoid(alphabet: &Alphabet, letters: &[SymbolId], marker: SymbolId) -> Result<(Rc<Monoid>, ConstraintMorphism)> {
    for &l in letters {
        if alphabet.is_self_involuting(l) {
            return Err(Error::SelfInvoluting(alphabet.name(l).to_string()));
        }
    }
    let mut forbidden = BTreeSet::new();
    for &b in letters {
        forbidden.insert((b, alphabet.partner(b)));
    }
    let m = Monoid::pair(alphabet, letters.to_vec(), Junction { forbidden })?;
    let mut mu = ConstraintMorphism::new(m.clone());
    for &a in letters {
        mu.set(alphabet, a, pair_elem(&m, a, a));
    }
    mu.map.insert(marker, 0);
    Ok((m, mu))
}

/// The encoded element (a, b) of a pair monoid.
pub fn pair_elem(m: &Monoid, a: SymbolId, b: SymbolId) -> Elem {
    match &m.kind {
        MonoidKind::Pair { letters, index, .. } => {
            let k = letters.len() as Elem;
            2 + (index[&a] as Elem) * k + index[&b] as Elem
        }
        _ => panic!("pair_elem on non-pair monoid"),
    }
}

/// First/last letters of a nonzero, non-identity pair-monoid element.
pub fn pair_letters(m: &Monoid, e: Elem) -> Option<(SymbolId, SymbolId)> {
    match &m.kind {
        MonoidKind::Pair { letters, .. } => {
            if e <= 1 {
                return None;
            }
            let k = letters.len() as Elem;
            Some((letters[((e - 2) / k) as usize], letters[((e - 2) % k) as usize]))
        }
        _ => panic!("pair_letters on non-pair monoid"),
    }
}

/// Componentwise product morphism into N1 × N2 (no folding); recognizes
/// every Boolean combination of what the components recognize.
pub fn product_morphism(alphabet: &Alphabet, m1: &ConstraintMorphism, m2: &ConstraintMorphism) -> Result<(Rc<Monoid>, ConstraintMorphism)> {
    let prod = Monoid::product(vec![m1.monoid.clone(), m2.monoid.clone()], vec![false, false])?;
    let mut mu = ConstraintMorphism::new(prod.clone());
    for (&x, &e1) in &m1.map {
        if let Some(e2) = m2.get(x) {
            mu.map.insert(x, prod.encode_tuple(&[e1, e2]));
        }
    }
    let _ = alphabet;
    Ok((prod, mu))
}

/// Lifts a plain homomorphism ρ to the involutive morphism
/// μ(x) = (ρ(x), ρ(x̄)^T) into N × N^T.
pub fn dual_lift(alphabet: &Alphabet, rho: &ConstraintMorphism) -> Result<(Rc<Monoid>, ConstraintMorphism)> {
    let dual = Monoid::dual(rho.monoid.clone())?;
    let base_size = rho.monoid.size();
    let mut mu = ConstraintMorphism::new(dual.clone());
    for (&x, &e) in &rho.map {
        let bar = alphabet.partner(x);
        let ebar = rho
            .get(bar)
            .ok_or_else(|| Error::UnmappedSymbol(alphabet.name(bar).to_string()))?;
        mu.map.insert(x, e * base_size + ebar);
    }
    Ok((dual, mu))
}

/// First projection η of a dual-lift element: η∘μ = ρ.
pub fn dual_first(m: &Monoid, e: Elem) -> Elem {
    match &m.kind {
        MonoidKind::Dual { base } => e / base.size(),
        _ => panic!("dual_first on non-dual monoid"),
    }
}

/// ρ into n×n Boolean matrices for an (ε-free) NFA: ρ(a)_{ij} = 1 iff
/// (i, a, j) is a transition; then w ∈ L(A) iff ρ(w) ∈ ρ(L(A)).
pub fn boolean_matrix_monoid(_alphabet: &Alphabet, nfa: &LetterNfa) -> Result<(Rc<Monoid>, ConstraintMorphism)> {
    let nfa = nfa.eliminate_epsilon();
    let n = nfa.states;
    let m = Monoid::bool_mat(n)?;
    let mut mu = ConstraintMorphism::new(m.clone());
    let mut mats: BTreeMap<SymbolId, Elem> = BTreeMap::new();
    for &(p, label, q) in &nfa.transitions {
        let a = label.expect("epsilon eliminated");
        *mats.entry(a).or_insert(0) |= 1 << (p * n + q);
    }
    for (a, mat) in mats {
        mu.map.insert(a, mat);
    }
    Ok((m, mu))
}

/// Whether a Boolean matrix element sends some initial state to some final
/// state (acceptance through ρ).
pub fn bool_mat_accepts(m: &Monoid, e: Elem, initial: &BTreeSet<usize>, final_: &BTreeSet<usize>) -> bool {
    match &m.kind {
        MonoidKind::BoolMat { n } => initial
            .iter()
            .any(|&i| final_.iter().any(|&j| e >> (i * n + j) & 1 == 1)),
        _ => panic!("bool_mat_accepts on non-matrix monoid"),
    }
}
