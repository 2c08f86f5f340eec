//! Front-end reductions: formula normalization into conjunctive branches,
//! triangulation, the free-group and free-product reductions of triangular
//! equations and of inequalities to word equations over a free monoid with
//! involution, the working-alphabet encoding, assembly of the initial
//! palindromic equation, and the enumeration of admissible initial
//! constraint morphisms.

use crate::alphabet::{Alphabet, SymbolId, SymbolKind, Word};
use crate::fproduct::{FreeProductSpec, IotaEncoding};
use crate::monoid::{
    bool_mat_accepts, boolean_matrix_monoid, dual_first, pair_letters, ConstraintMorphism, Elem,
    Junction, Monoid, MonoidKind,
};
use crate::nfa::LetterNfa;
use crate::{Error, Result};
use std::collections::{BTreeMap, BTreeSet};
use std::rc::Rc;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    FreeGroup,
    FreeMonoid,
    FreeProduct,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Mode::FreeGroup => write!(f, "free-group"),
            Mode::FreeMonoid => write!(f, "free-monoid"),
            Mode::FreeProduct => write!(f, "free-product"),
        }
    }
}

/// A rational constraint given as an NFA over the source letters.
#[derive(Debug, Clone)]
pub struct ConstraintDef {
    pub name: String,
    pub nfa: LetterNfa,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Atom {
    /// U = V over source letters and variables.
    Eq(Word, Word),
    /// U ≠ V.
    Neq(Word, Word),
    /// ρ_i(σ(X)) = m for the i-th registered constraint morphism.
    In(SymbolId, usize, Elem),
    /// σ(X) ∈ L(nfa_i); sugar expanded during normalization.
    InLang(SymbolId, usize),
}

#[derive(Debug, Clone)]
pub enum Formula {
    Atom(Atom),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Not(Box<Formula>),
}

#[derive(Debug, Clone)]
pub struct InputProblem {
    pub alphabet: Alphabet,
    pub mode: Mode,
    pub spec: FreeProductSpec,
    pub formula: Formula,
    pub targets: Vec<SymbolId>,
    /// Declared variables, unbarred, in declaration order.
    pub variables: Vec<SymbolId>,
    pub constraints: Vec<ConstraintDef>,
}

/// Per-variable requirements beyond the equations; checked on μ values and
/// by the oracle on words.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VarReq {
    /// First projection of the user component equals the given element.
    User { index: usize, elem: Elem },
    /// The word is a unit (the ψ_U part of the geodesy component is 1).
    UnitsOne,
    /// The decoded word is geodesic (ψ_F part nonzero).
    Geodesic,
}

/// A conjunctive branch reduced all the way to word equations over the
/// working alphabet with involution.
#[derive(Debug, Clone)]
pub struct MonoidSystem {
    /// Value-semantic extension of the problem alphabet (fresh variables).
    pub alphabet: Alphabet,
    pub equations: Vec<(Word, Word)>,
    /// All variables of the system, closed under involution.
    pub variables: BTreeSet<SymbolId>,
    pub reqs: Vec<(SymbolId, VarReq)>,
    /// Variables with a forced μ value (the triangulation unit variable).
    pub forced: BTreeMap<SymbolId, Elem>,
    /// Witness values over the working alphabet, for every variable.
    pub sigma: BTreeMap<SymbolId, Word>,
}

/// The shared problem context: working alphabet, combined constraint
/// monoid, and the layout of its components.
#[derive(Debug, Clone)]
pub struct ProblemCtx {
    pub alphabet: Alphabet,
    pub mode: Mode,
    pub spec: FreeProductSpec,
    pub enc: IotaEncoding,
    pub marker: SymbolId,
    /// Working letters A± in id order.
    pub working: Vec<SymbolId>,
    pub monoid: Rc<Monoid>,
    /// μ₀ on working letters and the marker; μ₀(#) = 0.
    pub mu0: ConstraintMorphism,
    /// Component index of the geodesy/units dual (Part-II modes).
    pub geo_component: Option<usize>,
    /// Component index of the first user-constraint dual.
    pub user_component_base: usize,
    /// ρ_i over source letters (for the oracle), with accept data.
    pub user_rhos: Vec<ConstraintMorphism>,
    pub user_accept: Vec<(BTreeSet<usize>, BTreeSet<usize>)>,
    /// Reachable ρ_i images of source words.
    pub user_reachable: Vec<BTreeSet<Elem>>,
    pub targets: Vec<SymbolId>,
    pub variables: Vec<SymbolId>,
    pub kappa: usize,
}

impl ProblemCtx {
    pub fn build(problem: &InputProblem, kappa: usize) -> Result<ProblemCtx> {
        let mut alphabet = problem.alphabet.clone();
        let source_letters = problem.spec.letters();
        let has_self_inv = source_letters.iter().any(|&l| alphabet.is_self_involuting(l));
        let enc = if has_self_inv {
            IotaEncoding::build(&mut alphabet, &source_letters)?
        } else {
            identity_encoding(&source_letters)
        };
        let working = enc.working.clone();
        let marker = alphabet.marker().ok_or_else(|| Error::Invalid("no marker".into()))?;

        // fold component: reducedness (free group) or image validity (Part II)
        let fold: Rc<Monoid> = match problem.mode {
            Mode::FreeGroup => {
                let mut forbidden = BTreeSet::new();
                for &b in &working {
                    forbidden.insert((b, alphabet.partner(b)));
                }
                Monoid::pair(&alphabet, working.clone(), Junction { forbidden })?
            }
            Mode::FreeMonoid | Mode::FreeProduct => {
                let forbidden = enc.image_junction(&alphabet);
                Monoid::pair(&alphabet, working.clone(), Junction { forbidden })?
            }
        };
        let mut factors: Vec<Rc<Monoid>> = vec![fold.clone()];
        let mut fold_mask = vec![true];
        let mut homs: Vec<ConstraintMorphism> = Vec::new();

        let geo_component = match problem.mode {
            Mode::FreeGroup => None,
            Mode::FreeMonoid | Mode::FreeProduct => {
                let (psi_m, psi) = crate::fproduct::build_product_constraint_monoid(&alphabet, &problem.spec)?;
                // ρ_geo over working letters: ψ(η(x)); erased letters map to 1
                let mut rho = ConstraintMorphism::new(psi_m.clone());
                for &x in &working {
                    let v = match enc.eta.get(&x) {
                        Some(Some(src)) => psi.get(*src).unwrap_or_else(|| psi_m.identity()),
                        _ => psi_m.identity(),
                    };
                    rho.map.insert(x, v);
                }
                let (dual, mu) = crate::monoid::dual_lift(&alphabet, &rho)?;
                factors.push(dual);
                fold_mask.push(false);
                homs.push(mu);
                Some(1)
            }
        };
        let user_component_base = factors.len();

        let mut user_rhos = Vec::new();
        let mut user_accept = Vec::new();
        let mut user_reachable = Vec::new();
        for def in &problem.constraints {
            let eps_free = def.nfa.eliminate_epsilon();
            let (mat_m, rho_src) = boolean_matrix_monoid(&alphabet, &eps_free)?;
            let init: BTreeSet<usize> = eps_free.initial.iter().map(|&x| x as usize).collect();
            let fin: BTreeSet<usize> = eps_free.final_.iter().map(|&x| x as usize).collect();
            // reachable image of source words under ρ
            let mut reach: BTreeSet<Elem> = BTreeSet::from([mat_m.identity()]);
            let mut queue: Vec<Elem> = reach.iter().copied().collect();
            while let Some(e) = queue.pop() {
                for &l in &source_letters {
                    let g = rho_src.get(l).unwrap_or(0);
                    let p = mat_m.mul(e, g);
                    if reach.insert(p) {
                        queue.push(p);
                    }
                }
            }
            // lift over the working alphabet through η
            let mut rho_w = ConstraintMorphism::new(mat_m.clone());
            for &x in &working {
                let v = match enc.eta.get(&x) {
                    Some(Some(src)) => rho_src.get(*src).unwrap_or(0),
                    _ => mat_m.identity(),
                };
                rho_w.map.insert(x, v);
            }
            let (dual, mu) = crate::monoid::dual_lift(&alphabet, &rho_w)?;
            factors.push(dual);
            fold_mask.push(false);
            homs.push(mu);
            // ρ over source letters, with unlabeled letters mapped to the
            // empty-language matrix
            let mut rho_full = ConstraintMorphism::new(mat_m);
            for &l in &source_letters {
                rho_full.map.insert(l, rho_src.get(l).unwrap_or(0));
            }
            user_rhos.push(rho_full);
            user_accept.push((init, fin));
            user_reachable.push(reach);
        }

        let monoid = Monoid::product(factors, fold_mask)?;
        let mut mu0 = ConstraintMorphism::new(monoid.clone());
        for &x in &working {
            let mut parts: Vec<Elem> = Vec::new();
            parts.push(crate::monoid::pair_elem(&fold, x, x));
            for h in &homs {
                parts.push(h.get(x).expect("hom defined on working letters"));
            }
            mu0.map.insert(x, monoid.encode_tuple(&parts));
        }
        mu0.map.insert(marker, monoid.zero().expect("folded product has zero"));

        Ok(ProblemCtx {
            alphabet,
            mode: problem.mode,
            spec: problem.spec.clone(),
            enc,
            marker,
            working,
            monoid,
            mu0,
            geo_component,
            user_component_base,
            user_rhos,
            user_accept,
            user_reachable,
            targets: problem.targets.clone(),
            variables: problem.variables.clone(),
            kappa,
        })
    }

    /// Whether a μ value satisfies a requirement.
    pub fn req_holds(&self, req: &VarReq, e: Elem) -> bool {
        if self.monoid.is_zero(e) {
            return false;
        }
        match req {
            VarReq::User { index, elem } => {
                let comp = self.monoid.component(e, self.user_component_base + index);
                let dual = match &self.monoid.kind {
                    MonoidKind::Product { factors, .. } => &factors[self.user_component_base + index],
                    _ => unreachable!(),
                };
                dual_first(dual, comp) == *elem
            }
            VarReq::UnitsOne | VarReq::Geodesic => {
                let gi = match self.geo_component {
                    Some(gi) => gi,
                    None => return true, // free-group mode: reducedness is the fold
                };
                let comp = self.monoid.component(e, gi);
                let dual = match &self.monoid.kind {
                    MonoidKind::Product { factors, .. } => &factors[gi],
                    _ => unreachable!(),
                };
                let first = dual_first(dual, comp);
                let base = match &dual.kind {
                    MonoidKind::Dual { base } => base,
                    _ => unreachable!(),
                };
                match req {
                    VarReq::UnitsOne => base.component(first, 1) == 0,
                    _ => {
                        let nf_part = base.component(first, 0);
                        let nf_m = match &base.kind {
                            MonoidKind::Product { factors, .. } => &factors[0],
                            _ => unreachable!(),
                        };
                        !nf_m.is_zero(nf_part)
                    }
                }
            }
        }
    }

    /// Values admissible for a variable in Part-II modes must also have
    /// image-compatible end letters.
    pub fn ends_compatible(&self, e: Elem) -> bool {
        if self.monoid.is_zero(e) {
            return false;
        }
        let fold = self.monoid.component(e, 0);
        if fold == 1 {
            return true; // identity: empty word
        }
        let fold_m = match &self.monoid.kind {
            MonoidKind::Product { factors, .. } => &factors[0],
            _ => unreachable!(),
        };
        match pair_letters(fold_m, fold) {
            Some((first, last)) => self.enc.ends_admissible(&self.alphabet, first, last),
            None => true,
        }
    }
}

fn identity_encoding(letters: &[SymbolId]) -> IotaEncoding {
    let mut iota = BTreeMap::new();
    let mut eta = BTreeMap::new();
    for &l in letters {
        iota.insert(l, vec![l]);
        eta.insert(l, Some(l));
    }
    IotaEncoding { iota, eta, must_precede_bar: BTreeSet::new(), working: letters.to_vec() }
}

/// Pushes negations to atoms and distributes into conjunctive branches.
/// Negated constraints become positive ones over the other reachable
/// elements; the union of the branches has the same solution set.
pub fn normalize_formula(ctx: &ProblemCtx, formula: &Formula) -> Result<Vec<Vec<Atom>>> {
    fn nnf(ctx: &ProblemCtx, f: &Formula, neg: bool) -> Result<Formula> {
        Ok(match f {
            Formula::Atom(a) => {
                if !neg {
                    match a {
                        Atom::InLang(x, i) => {
                            let ors = lang_elems(ctx, *i, true)
                                .into_iter()
                                .map(|m| Formula::Atom(Atom::In(*x, *i, m)))
                                .collect();
                            Formula::Or(ors)
                        }
                        other => Formula::Atom(other.clone()),
                    }
                } else {
                    match a {
                        Atom::Eq(u, v) => Formula::Atom(Atom::Neq(u.clone(), v.clone())),
                        Atom::Neq(u, v) => Formula::Atom(Atom::Eq(u.clone(), v.clone())),
                        Atom::In(x, i, m) => {
                            let reach = &ctx.user_reachable[*i];
                            if reach.len() < 2 {
                                return Err(Error::NegationOverTrivialMonoid);
                            }
                            let ors = reach
                                .iter()
                                .filter(|&&e| e != *m)
                                .map(|&e| Formula::Atom(Atom::In(*x, *i, e)))
                                .collect();
                            Formula::Or(ors)
                        }
                        Atom::InLang(x, i) => {
                            let ors = lang_elems(ctx, *i, false)
                                .into_iter()
                                .map(|m| Formula::Atom(Atom::In(*x, *i, m)))
                                .collect();
                            Formula::Or(ors)
                        }
                    }
                }
            }
            Formula::Not(inner) => nnf(ctx, inner, !neg)?,
            Formula::And(fs) => {
                let parts = fs.iter().map(|g| nnf(ctx, g, neg)).collect::<Result<Vec<_>>>()?;
                if neg {
                    Formula::Or(parts)
                } else {
                    Formula::And(parts)
                }
            }
            Formula::Or(fs) => {
                let parts = fs.iter().map(|g| nnf(ctx, g, neg)).collect::<Result<Vec<_>>>()?;
                if neg {
                    Formula::And(parts)
                } else {
                    Formula::Or(parts)
                }
            }
        })
    }
    fn lang_elems(ctx: &ProblemCtx, i: usize, accept: bool) -> Vec<Elem> {
        let (init, fin) = &ctx.user_accept[i];
        let m = &ctx.user_rhos[i].monoid;
        ctx.user_reachable[i]
            .iter()
            .copied()
            .filter(|&e| bool_mat_accepts(m, e, init, fin) == accept)
            .collect()
    }
    fn dnf(f: &Formula) -> Vec<Vec<Atom>> {
        match f {
            Formula::Atom(a) => vec![vec![a.clone()]],
            Formula::Or(fs) => fs.iter().flat_map(dnf).collect(),
            Formula::And(fs) => {
                let mut acc: Vec<Vec<Atom>> = vec![vec![]];
                for g in fs {
                    let gs = dnf(g);
                    let mut next = Vec::new();
                    for base in &acc {
                        for branch in &gs {
                            let mut b = base.clone();
                            b.extend(branch.iter().cloned());
                            next.push(b);
                        }
                    }
                    acc = next;
                }
                acc
            }
            Formula::Not(_) => unreachable!("negations already pushed"),
        }
    }
    let pushed = nnf(ctx, formula, false)?;
    Ok(dnf(&pushed))
}

/// A triangular system: equations X = y z over single symbols, a unit
/// variable with σ = 1, and the fresh-variable definitions in dependency
/// order (for witness extension).
#[derive(Debug, Clone)]
pub struct TriangularSystem {
    pub triples: Vec<(SymbolId, SymbolId, SymbolId)>,
    pub unit_var: SymbolId,
    pub defs: Vec<(SymbolId, Word)>,
}

/// Replaces a system of equations U_i = V_i by triangular equations plus the
/// constraint μ(Y) = 1 for a fresh Y. The equation Y = 1 itself is not kept.
pub fn triangulate(alphabet: &mut Alphabet, eqs: &[(Word, Word)]) -> Result<TriangularSystem> {
    let (y, _ybar) = alphabet.fresh_variable_pair("t")?;
    let mut triples = Vec::new();
    let mut defs: Vec<(SymbolId, Word)> = vec![(y, vec![])];
    fn split(
        alphabet: &mut Alphabet,
        x: SymbolId,
        w: &[SymbolId],
        triples: &mut Vec<(SymbolId, SymbolId, SymbolId)>,
        defs: &mut Vec<(SymbolId, Word)>,
    ) -> Result<()> {
        assert!(w.len() >= 2);
        if w.len() == 2 {
            triples.push((x, w[0], w[1]));
            return Ok(());
        }
        let (x2, _) = alphabet.fresh_variable_pair("t")?;
        defs.push((x2, w[..2].to_vec()));
        triples.push((x2, w[0], w[1]));
        let mut rest: Word = vec![x2];
        rest.extend_from_slice(&w[2..]);
        split(alphabet, x, &rest, triples, defs)
    }
    for (u, v) in eqs {
        let (x, _) = alphabet.fresh_variable_pair("t")?;
        let mut uyy = u.clone();
        uyy.push(y);
        uyy.push(y);
        let mut vyy = v.clone();
        vyy.push(y);
        vyy.push(y);
        defs.push((x, u.clone()));
        split(alphabet, x, &uyy, &mut triples, &mut defs)?;
        split(alphabet, x, &vyy, &mut triples, &mut defs)?;
    }
    Ok(TriangularSystem { triples, unit_var: y, defs })
}

/// The free-group reduction of one triangular equation x = yz: three monoid
/// equations x = PR, y = PQ, z = Q̄R over fresh P, Q, R.
pub struct GroupSplit {
    pub equations: Vec<(Word, Word)>,
    pub p: SymbolId,
    pub q: SymbolId,
    pub r: SymbolId,
}

pub fn group_to_monoid(alphabet: &mut Alphabet, x: SymbolId, y: SymbolId, z: SymbolId) -> Result<GroupSplit> {
    let (p, _) = alphabet.fresh_variable_pair("p")?;
    let (q, qbar) = alphabet.fresh_variable_pair("q")?;
    let (r, _) = alphabet.fresh_variable_pair("r")?;
    let equations = vec![
        (vec![x], vec![p, r]),
        (vec![y], vec![p, q]),
        (vec![z], vec![qbar, r]),
    ];
    Ok(GroupSplit { equations, p, q, r })
}

/// Witness values for P, Q, R given reduced words with x = yz in the group:
/// the cancellation length is t = (|y| + |z| - |x|) / 2.
pub fn group_split_witness(alphabet: &Alphabet, sx: &[SymbolId], sy: &[SymbolId], sz: &[SymbolId]) -> Result<(Word, Word, Word)> {
    let total = sy.len() + sz.len();
    if total < sx.len() || !(total - sx.len()).is_multiple_of(2) {
        return Err(Error::Invalid("witness does not satisfy the group equation".into()));
    }
    let t = (total - sx.len()) / 2;
    if t > sy.len() || t > sz.len() {
        return Err(Error::Invalid("cancellation longer than a side".into()));
    }
    let p = sy[..sy.len() - t].to_vec();
    let q = sy[sy.len() - t..].to_vec();
    let r = sz[t..].to_vec();
    let qbar = alphabet.involute_word(&q)?;
    if sz[..t] != qbar[..] {
        return Err(Error::Invalid("cancelled parts are not mutually inverse".into()));
    }
    let mut pr = p.clone();
    pr.extend(&r);
    if pr != sx {
        return Err(Error::Invalid("x ≠ PR after cancellation".into()));
    }
    Ok((p, q, r))
}

/// The free-product reduction of x = π(yz): x = PaQ, y = PbR, z = R̄cQ with
/// a = π(bc) and R a unit.
pub struct Fig2Split {
    pub equations: Vec<(Word, Word)>,
    pub p: SymbolId,
    pub q: SymbolId,
    pub r: SymbolId,
    pub a: Word,
    pub b: Word,
    pub c: Word,
}

/// Determines (P, Q, R, a, b, c) from geodesic witness values of y and z.
pub fn fig2_witness(
    alphabet: &Alphabet,
    spec: &FreeProductSpec,
    sy: &[SymbolId],
    sz: &[SymbolId],
) -> (Word, Word, Word, Word, Word, Word) {
    let mut u: Word = sy.to_vec();
    let mut v: Word = sz.to_vec();
    let mut rbar: Word = Vec::new(); // cancelled prefix of z: R̄
    while let (Some(&lu), Some(&lv)) = (u.last(), v.first()) {
        if spec.pi_of_pair(alphabet, lu, lv) == Some(None) {
            u.pop();
            rbar.push(lv);
            v.remove(0);
        } else {
            break;
        }
    }
    let r = alphabet.involute_word(&rbar).expect("letters known");
    match (u.last().copied(), v.first().copied()) {
        (Some(lu), Some(lv)) if !spec.junction_geodesic(alphabet, lu, lv) => {
            // merge: π(bc) = a is a single letter since the pair does not
            // cancel completely
            let a = spec
                .pi_of_pair(alphabet, lu, lv)
                .and_then(|x| x)
                .expect("non-geodesic non-cancelling pair merges");
            u.pop();
            v.remove(0);
            (u, v, r, vec![a], vec![lu], vec![lv])
        }
        _ => (u, v, r, vec![], vec![], vec![]),
    }
}

pub fn fig2_split(alphabet: &mut Alphabet, x: SymbolId, y: SymbolId, z: SymbolId, a: &Word, b: &Word, c: &Word) -> Result<Fig2Split> {
    let (p, _) = alphabet.fresh_variable_pair("p")?;
    let (q, _) = alphabet.fresh_variable_pair("q")?;
    let (r, rbar) = alphabet.fresh_variable_pair("r")?;
    let mut paq: Word = vec![p];
    paq.extend(a.iter());
    paq.push(q);
    let mut pbr: Word = vec![p];
    pbr.extend(b.iter());
    pbr.push(r);
    let mut rcq: Word = vec![rbar];
    rcq.extend(c.iter());
    rcq.push(q);
    let equations = vec![(vec![x], paq), (vec![y], pbr), (vec![z], rcq)];
    Ok(Fig2Split { equations, p, q, r, a: a.clone(), b: b.clone(), c: c.clone() })
}

/// The inequality reduction splits on the common-prefix geometry: two
/// geodesics differ iff they disagree at some position after a common prefix
/// (x = PbQ and y = PcR with letters b ≠ c) or one properly extends the
/// other (y = xbQ, or symmetrically). Every case is a conjunction of word
/// equations over fresh variables; no extension letter is needed, so the
/// split works over any free product.
#[derive(Debug, Clone)]
pub enum IneqShape {
    /// x = P b Q and y = P c R with b ≠ c.
    Split { b: SymbolId, c: SymbolId, p: Word, q: Word, r: Word },
    /// The longer side equals the shorter one followed by b Q.
    Extend { x_is_prefix: bool, b: SymbolId, q: Word },
}

pub fn inequality_witness(sx: &[SymbolId], sy: &[SymbolId]) -> Result<IneqShape> {
    if sx == sy {
        return Err(Error::Invalid("inequality witness on equal words".into()));
    }
    let lcp = sx.iter().zip(sy.iter()).take_while(|(u, v)| u == v).count();
    if lcp < sx.len() && lcp < sy.len() {
        Ok(IneqShape::Split {
            b: sx[lcp],
            c: sy[lcp],
            p: sx[..lcp].to_vec(),
            q: sx[lcp + 1..].to_vec(),
            r: sy[lcp + 1..].to_vec(),
        })
    } else if lcp == sx.len() {
        Ok(IneqShape::Extend { x_is_prefix: true, b: sy[lcp], q: sy[lcp + 1..].to_vec() })
    } else {
        Ok(IneqShape::Extend { x_is_prefix: false, b: sx[lcp], q: sx[lcp + 1..].to_vec() })
    }
}

/// The initial palindromic equation.
#[derive(Debug, Clone)]
pub struct InitialEquation {
    pub w_init: Word,
    pub n: usize,
    pub marker_count: usize,
    /// The symbols listed before U': targets, other variables, letters.
    pub listed: Vec<SymbolId>,
}

/// W_init = # x1 # … # xℓ # U' # V' # U̅' # V̅' # x̄ℓ # … # x̄1 # with
/// x_i = X_i for the specified variables and the rest of A± ∪ Ω after them.
pub fn build_winit(
    alphabet: &Alphabet,
    marker: SymbolId,
    working: &[SymbolId],
    targets: &[SymbolId],
    variables: &BTreeSet<SymbolId>,
    equations: &[(Word, Word)],
) -> Result<InitialEquation> {
    if equations.is_empty() {
        return Err(Error::IllFormedSystem("no equations".into()));
    }
    for (u, v) in equations {
        for &s in u.iter().chain(v.iter()) {
            if s == marker {
                return Err(Error::IllFormedSystem("marker inside an equation".into()));
            }
            if alphabet.kind(s) == SymbolKind::Variable && !variables.contains(&s) {
                return Err(Error::IllFormedSystem(format!(
                    "equation uses unregistered variable `{}`",
                    alphabet.name(s)
                )));
            }
        }
    }
    let mut listed: Vec<SymbolId> = Vec::new();
    for &t in targets {
        listed.push(t);
    }
    for &v in variables.iter() {
        if !listed.contains(&v) {
            listed.push(v);
        }
    }
    for &l in working {
        listed.push(l);
    }
    let mut w: Word = vec![marker];
    for &x in &listed {
        w.push(x);
        w.push(marker);
    }
    let mut uprime: Word = Vec::new();
    let mut vprime: Word = Vec::new();
    for (i, (u, v)) in equations.iter().enumerate() {
        if i > 0 {
            uprime.push(marker);
            vprime.push(marker);
        }
        uprime.extend(u.iter());
        vprime.extend(v.iter());
    }
    w.extend(uprime.iter());
    w.push(marker);
    w.extend(vprime.iter());
    w.push(marker);
    w.extend(alphabet.involute_word(&uprime)?);
    w.push(marker);
    w.extend(alphabet.involute_word(&vprime)?);
    w.push(marker);
    for &x in listed.iter().rev() {
        w.push(alphabet.partner(x));
        w.push(marker);
    }
    let marker_count = w.iter().filter(|&&x| x == marker).count();
    if marker_count % 2 != 1 {
        return Err(Error::IllFormedSystem("marker count is even".into()));
    }
    let n = w.len();
    Ok(InitialEquation { w_init: w, n, marker_count, listed })
}

/// All admissible μ_init assignments: nonzero values per variable pair,
/// pruned by μ(U) = μ(V) ≠ 0 on every equation and by the per-variable
/// requirements. Depth-first with a result cap.
pub fn guess_mu_init(
    ctx: &ProblemCtx,
    system: &MonoidSystem,
    cap: usize,
) -> Result<Vec<BTreeMap<SymbolId, Elem>>> {
    let m = &ctx.monoid;
    let values: Vec<Elem> = m
        .enumerate(4096)
        .ok_or(Error::MonoidTooLarge)?
        .into_iter()
        .filter(|&e| !m.is_zero(e))
        .collect();
    let mut pairs: Vec<SymbolId> = Vec::new();
    let mut seen = BTreeSet::new();
    for &v in &system.variables {
        let rep = std::cmp::min(v, system.alphabet.partner(v));
        if seen.insert(rep) {
            pairs.push(rep);
        }
    }
    let mut out = Vec::new();
    let mut assign: BTreeMap<SymbolId, Elem> = BTreeMap::new();
    fn consistent(ctx: &ProblemCtx, system: &MonoidSystem, assign: &BTreeMap<SymbolId, Elem>) -> bool {
        let m = &ctx.monoid;
        for (u, v) in &system.equations {
            let eval = |w: &Word| -> Option<Elem> {
                let mut acc = m.identity();
                for &x in w {
                    let e = match ctx.mu0.get(x) {
                        Some(e) => e,
                        None => *assign.get(&x)?,
                    };
                    acc = m.mul(acc, e);
                }
                Some(acc)
            };
            if let (Some(a), Some(b)) = (eval(u), eval(v)) {
                if a != b || m.is_zero(a) {
                    return false;
                }
            }
        }
        true
    }
    #[allow(clippy::too_many_arguments)]
    fn rec(
        ctx: &ProblemCtx,
        system: &MonoidSystem,
        pairs: &[SymbolId],
        values: &[Elem],
        assign: &mut BTreeMap<SymbolId, Elem>,
        out: &mut Vec<BTreeMap<SymbolId, Elem>>,
        cap: usize,
    ) {
        if out.len() >= cap {
            return;
        }
        let Some(&x) = pairs.first() else {
            out.push(assign.clone());
            return;
        };
        let rest = &pairs[1..];
        let al = &system.alphabet;
        let candidates: Vec<Elem> = match system.forced.get(&x) {
            Some(&f) => vec![f],
            None => values.to_vec(),
        };
        for e in candidates {
            if ctx.mode != Mode::FreeGroup && e != ctx.monoid.identity() && !ctx.ends_compatible(e) {
                continue;
            }
            let reqs_ok = system
                .reqs
                .iter()
                .filter(|(v, _)| *v == x || *v == al.partner(x))
                .all(|(v, r)| {
                    let val = if *v == x { e } else { ctx.monoid.inv(e) };
                    ctx.req_holds(r, val)
                });
            if !reqs_ok {
                continue;
            }
            assign.insert(x, e);
            assign.insert(al.partner(x), ctx.monoid.inv(e));
            if consistent(ctx, system, assign) {
                rec(ctx, system, rest, values, assign, out, cap);
            }
            assign.remove(&x);
            assign.remove(&al.partner(x));
        }
    }
    rec(ctx, system, &pairs, &values, &mut assign, &mut out, cap);
    Ok(out)
}

/// Reduces one conjunctive branch to a monoid system, steered by a witness
/// assignment over the source alphabet. The witness is extended to every
/// fresh variable; the free-product sub-branch letters come from the witness
/// geometry.
pub fn reduce_branch_with_witness(
    ctx: &ProblemCtx,
    atoms: &[Atom],
    witness: &BTreeMap<SymbolId, Word>,
) -> Result<MonoidSystem> {
    let mut alphabet = ctx.alphabet.clone();
    let mut sigma_src: BTreeMap<SymbolId, Word> = BTreeMap::new();
    for (&x, w) in witness {
        sigma_src.insert(x, w.clone());
        sigma_src.insert(alphabet.partner(x), alphabet.involute_word(w)?);
    }
    let mut variables: BTreeSet<SymbolId> = BTreeSet::new();
    for &v in &ctx.variables {
        variables.insert(v);
        variables.insert(alphabet.partner(v));
    }
    let mut reqs: Vec<(SymbolId, VarReq)> = Vec::new();
    let mut forced: BTreeMap<SymbolId, Elem> = BTreeMap::new();

    let mut eqs: Vec<(Word, Word)> = Vec::new();
    let mut neqs: Vec<(Word, Word)> = Vec::new();
    // the inequality reduction produces equations that already hold at the
    // word level; they bypass the group/product reduction below
    let mut direct_eqs: Vec<(Word, Word)> = Vec::new();
    for atom in atoms {
        match atom {
            Atom::Eq(u, v) => eqs.push((u.clone(), v.clone())),
            Atom::Neq(u, v) => neqs.push((u.clone(), v.clone())),
            Atom::In(x, i, m) => reqs.push((*x, VarReq::User { index: *i, elem: *m })),
            Atom::InLang(..) => {
                return Err(Error::Invalid("InLang must be expanded by normalization".into()))
            }
        }
    }

    fn subst_nf(
        ctx: &ProblemCtx,
        alphabet: &Alphabet,
        sigma: &BTreeMap<SymbolId, Word>,
        w: &[SymbolId],
    ) -> Result<Word> {
        let mut out = Vec::new();
        for &x in w {
            match alphabet.kind(x) {
                SymbolKind::Variable => {
                    let img = sigma
                        .get(&x)
                        .ok_or_else(|| Error::UnmappedSymbol(alphabet.name(x).to_string()))?;
                    out.extend(img.iter());
                }
                _ => out.push(x),
            }
        }
        Ok(ctx.spec.pi_normal_form(alphabet, &out))
    }

    // inequalities: defining variables plus the common-prefix split
    for (u, v) in &neqs {
        let su = subst_nf(ctx, &alphabet, &sigma_src, u)?;
        let sv = subst_nf(ctx, &alphabet, &sigma_src, v)?;
        let (xu, _) = alphabet.fresh_variable_pair("d")?;
        let (xv, _) = alphabet.fresh_variable_pair("d")?;
        for (var, word) in [(xu, su.clone()), (xv, sv.clone())] {
            sigma_src.insert(var, word.clone());
            sigma_src.insert(alphabet.partner(var), alphabet.involute_word(&word)?);
        }
        eqs.push((vec![xu], u.clone()));
        eqs.push((vec![xv], v.clone()));
        let bind = |alphabet: &mut Alphabet,
                        sigma_src: &mut BTreeMap<SymbolId, Word>,
                        word: Word|
         -> Result<SymbolId> {
            let (var, _) = alphabet.fresh_variable_pair("i")?;
            sigma_src.insert(var, word.clone());
            sigma_src.insert(alphabet.partner(var), alphabet.involute_word(&word)?);
            Ok(var)
        };
        let mut fresh_here: Vec<SymbolId> = vec![xu, xv];
        match inequality_witness(&su, &sv)? {
            IneqShape::Split { b, c, p, q, r } => {
                let pv = bind(&mut alphabet, &mut sigma_src, p)?;
                let qv = bind(&mut alphabet, &mut sigma_src, q)?;
                let rv = bind(&mut alphabet, &mut sigma_src, r)?;
                direct_eqs.push((vec![xu], vec![pv, b, qv]));
                direct_eqs.push((vec![xv], vec![pv, c, rv]));
                fresh_here.extend([pv, qv, rv]);
            }
            IneqShape::Extend { x_is_prefix, b, q } => {
                let qv = bind(&mut alphabet, &mut sigma_src, q)?;
                if x_is_prefix {
                    direct_eqs.push((vec![xv], vec![xu, b, qv]));
                } else {
                    direct_eqs.push((vec![xu], vec![xv, b, qv]));
                }
                fresh_here.push(qv);
            }
        }
        for var in fresh_here {
            variables.insert(var);
            variables.insert(alphabet.partner(var));
            reqs.push((var, VarReq::Geodesic));
        }
    }

    let mut monoid_eqs: Vec<(Word, Word)> = direct_eqs;
    match ctx.mode {
        Mode::FreeMonoid => {
            monoid_eqs.extend(eqs.iter().cloned());
        }
        Mode::FreeGroup | Mode::FreeProduct => {
            let tri = triangulate(&mut alphabet, &eqs)?;
            sigma_src.insert(tri.unit_var, vec![]);
            sigma_src.insert(alphabet.partner(tri.unit_var), vec![]);
            forced.insert(tri.unit_var, ctx.monoid.identity());
            forced.insert(alphabet.partner(tri.unit_var), ctx.monoid.identity());
            variables.insert(tri.unit_var);
            variables.insert(alphabet.partner(tri.unit_var));
            for (var, def) in &tri.defs {
                if *var == tri.unit_var {
                    continue;
                }
                let val = subst_nf(ctx, &alphabet, &sigma_src, def)?;
                sigma_src.insert(*var, val.clone());
                sigma_src.insert(alphabet.partner(*var), alphabet.involute_word(&val)?);
                variables.insert(*var);
                variables.insert(alphabet.partner(*var));
            }
            for &(x, y, z) in &tri.triples {
                let sy = subst_nf(ctx, &alphabet, &sigma_src, &[y])?;
                let sz = subst_nf(ctx, &alphabet, &sigma_src, &[z])?;
                match ctx.mode {
                    Mode::FreeGroup => {
                        let sx = subst_nf(ctx, &alphabet, &sigma_src, &[x])?;
                        let split = group_to_monoid(&mut alphabet, x, y, z)?;
                        let (p, q, r) = group_split_witness(&alphabet, &sx, &sy, &sz)?;
                        for (var, word) in [(split.p, p), (split.q, q), (split.r, r)] {
                            sigma_src.insert(var, word.clone());
                            sigma_src.insert(alphabet.partner(var), alphabet.involute_word(&word)?);
                            variables.insert(var);
                            variables.insert(alphabet.partner(var));
                        }
                        monoid_eqs.extend(split.equations);
                    }
                    Mode::FreeProduct => {
                        let (p, q, r, a, b, c) = fig2_witness(&alphabet, &ctx.spec, &sy, &sz);
                        let split = fig2_split(&mut alphabet, x, y, z, &a, &b, &c)?;
                        for (var, word) in [(split.p, p), (split.q, q), (split.r, r)] {
                            sigma_src.insert(var, word.clone());
                            sigma_src.insert(alphabet.partner(var), alphabet.involute_word(&word)?);
                            variables.insert(var);
                            variables.insert(alphabet.partner(var));
                        }
                        reqs.push((split.r, VarReq::UnitsOne));
                        monoid_eqs.extend(split.equations);
                    }
                    Mode::FreeMonoid => unreachable!(),
                }
            }
        }
    }

    if ctx.mode != Mode::FreeGroup {
        for &v in &variables {
            reqs.push((v, VarReq::Geodesic));
        }
    }

    // encode through ι into the working alphabet
    let encode_word = |alphabet: &Alphabet, w: &[SymbolId]| -> Word {
        let mut out = Vec::new();
        for &x in w {
            match alphabet.kind(x) {
                SymbolKind::Variable => out.push(x),
                _ => out.extend(ctx.enc.iota.get(&x).cloned().unwrap_or_else(|| vec![x])),
            }
        }
        out
    };
    let equations: Vec<(Word, Word)> = monoid_eqs
        .iter()
        .map(|(u, v)| (encode_word(&alphabet, u), encode_word(&alphabet, v)))
        .collect();
    let mut sigma: BTreeMap<SymbolId, Word> = BTreeMap::new();
    for (&x, w) in &sigma_src {
        if variables.contains(&x) {
            sigma.insert(x, ctx.enc.encode(w));
        }
    }

    // the witness must satisfy every encoded equation literally
    for (u, v) in &equations {
        let expand = |w: &Word| -> Word {
            let mut out = Vec::new();
            for &x in w {
                match sigma.get(&x) {
                    Some(img) => out.extend(img.iter()),
                    None => out.push(x),
                }
            }
            out
        };
        if expand(u) != expand(v) {
            return Err(Error::IllFormedSystem(format!(
                "witness does not satisfy encoded equation {} = {}",
                alphabet.display_word(u),
                alphabet.display_word(v)
            )));
        }
    }

    Ok(MonoidSystem { alphabet, equations, variables, reqs, forced, sigma })
}
