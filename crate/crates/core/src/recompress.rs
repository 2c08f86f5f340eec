//! Witness-guided recompression: block compression, pair compression over a
//! derandomized partition, the non-standard block compression that removes
//! (a ā)-blocks without creating self-involuting letters, the round
//! schedule, and the union of all witness paths into one EDT0L system.
//!
//! Every transformation is realized as an arc of the equation graph; each
//! arc is validated against its side conditions and checked for the forward
//! property α σ(W) = α h σ'(W') before it is accepted.

use crate::alphabet::{Alphabet, SymbolId, Word};
use crate::edt0l::{EdtolSystem, Endomorphism};
use crate::graph::{check_forward, is_final, validate_arc, ArcKind, EquationGraph, Vertex};
use crate::monoid::Elem;
use crate::oracle::{solve_bruteforce, OracleQuery};
use crate::reduction::{
    build_winit, normalize_formula, reduce_branch_with_witness, Formula, MonoidSystem, ProblemCtx,
};
use crate::trace::{BlockPartner, Entity, TypeRelation};
use crate::{Error, Result, Rng};
use std::collections::{BTreeMap, BTreeSet};

/// Length-discipline bounds: block compression starts below 29n and ends
/// below 31n; the halving loop may reach 35n transiently.
pub const BCC_FACTOR: usize = 29;
pub const PCC_FACTOR: usize = 31;
pub const TRANSIENT_FACTOR: usize = 35;

#[derive(Debug, Clone, Default)]
pub struct WitnessStats {
    pub arcs: usize,
    pub pops: usize,
    pub rounds: usize,
    pub max_w: usize,
    pub max_w_after_block: usize,
    pub max_w_in_halving: usize,
    pub max_w_after_pair: usize,
    pub forward_checks: usize,
}

#[derive(Debug, Clone)]
pub struct PathStep {
    pub src: Vertex,
    pub dst: Vertex,
    pub kind: ArcKind,
    pub label: Endomorphism,
}

/// One witness replay: the current extended equation together with the
/// solution pair (α, σ) and the accumulated forward-valid path.
pub struct Witness<'a> {
    pub ctx: &'a ProblemCtx,
    pub alphabet: Alphabet,
    pub n: usize,
    pub marker_count: usize,
    pub vertex: Vertex,
    /// α on letters of B outside the initial alphabet (identity there).
    pub alpha: BTreeMap<SymbolId, Word>,
    /// σ on variables, words over the current B.
    pub sigma: BTreeMap<SymbolId, Word>,
    pub path: Vec<PathStep>,
    pub initial_vertex: Vertex,
    /// ασ(W) at the initial vertex; constant along the whole path.
    pub initial_image: Word,
    pub rng: Rng,
    pub budget: usize,
    pub trace_on: bool,
    pub trace_log: Vec<String>,
    pub stats: WitnessStats,
}

/// Per-position origin of the expansion σ(W).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Origin {
    /// Index into W.
    Visible(usize),
    /// Variable and index into σ(X).
    Hidden(SymbolId, usize),
}

#[derive(Debug, Clone)]
struct Expansion {
    letters: Word,
    origin: Vec<Origin>,
}

/// A simultaneous rewrite of W and of σ values. Rewrites inside variable
/// images are stored against the unbarred variable of each pair (entries on
/// the barred one are translated through the involution), so multiple
/// occurrences and the two orientations stay consistent by construction.
#[derive(Debug, Default, Clone)]
struct Rewrite {
    w_plan: BTreeMap<usize, Word>,
    var_plan: BTreeMap<SymbolId, BTreeMap<usize, Word>>,
}

/// Builds a rewrite against a fixed alphabet and σ snapshot.
struct RewriteBuilder<'w> {
    alphabet: &'w Alphabet,
    sigma: &'w BTreeMap<SymbolId, Word>,
    rw: Rewrite,
}

impl<'w> RewriteBuilder<'w> {
    fn new(alphabet: &'w Alphabet, sigma: &'w BTreeMap<SymbolId, Word>) -> Self {
        RewriteBuilder { alphabet, sigma, rw: Rewrite::default() }
    }

    fn set(&mut self, origin: Origin, replacement: Word) -> Result<()> {
        match origin {
            Origin::Visible(i) => {
                if let Some(old) = self.rw.w_plan.get(&i) {
                    if *old != replacement {
                        return Err(Error::Invalid("conflicting rewrite of a visible position".into()));
                    }
                }
                self.rw.w_plan.insert(i, replacement);
            }
            Origin::Hidden(v, i) => {
                let (cv, ci, crep) = if v <= self.alphabet.partner(v) {
                    (v, i, replacement)
                } else {
                    let pv = self.alphabet.partner(v);
                    let len = self
                        .sigma
                        .get(&v)
                        .map(|w| w.len())
                        .ok_or_else(|| Error::Invalid("rewrite of unmapped variable".into()))?;
                    (pv, len - 1 - i, self.alphabet.involute_word(&replacement)?)
                };
                let plan = self.rw.var_plan.entry(cv).or_default();
                if let Some(old) = plan.get(&ci) {
                    if *old != crep {
                        return Err(Error::Invalid("conflicting rewrite inside a variable image".into()));
                    }
                }
                plan.insert(ci, crep);
            }
        }
        Ok(())
    }

    fn build(self) -> Rewrite {
        self.rw
    }
}

impl<'a> Witness<'a> {
    /// Builds the initial vertex from a reduced branch system and its
    /// witness values, derives μ_init from σ, and checks well-formedness.
    pub fn start(
        ctx: &'a ProblemCtx,
        system: &MonoidSystem,
        seed: u64,
        budget: usize,
        trace_on: bool,
    ) -> Result<Witness<'a>> {
        let mut alphabet = system.alphabet.clone();
        let init = build_winit(
            &alphabet,
            ctx.marker,
            &ctx.working,
            &ctx.targets,
            &system.variables,
            &system.equations,
        )?;
        alphabet.set_capacity(ctx.kappa * init.n);
        let mut b: BTreeSet<SymbolId> = ctx.working.iter().copied().collect();
        b.insert(ctx.marker);
        let mut mu: BTreeMap<SymbolId, Elem> = BTreeMap::new();
        for &l in b.iter() {
            mu.insert(l, ctx.mu0.get(l).expect("μ0 covers working letters"));
        }
        let mut sigma: BTreeMap<SymbolId, Word> = BTreeMap::new();
        for &v in &system.variables {
            let w = system
                .sigma
                .get(&v)
                .ok_or_else(|| Error::IllFormedSystem(format!("no witness value for `{}`", alphabet.name(v))))?;
            sigma.insert(v, w.clone());
        }
        for (&v, w) in &sigma {
            let e = eval_mu(ctx, &mu, w)
                .ok_or_else(|| Error::IllFormedSystem("σ uses letters without μ".into()))?;
            mu.insert(v, e);
        }
        for (v, req) in &system.reqs {
            let e = *mu.get(v).ok_or_else(|| Error::IllFormedSystem("req on unknown variable".into()))?;
            if !ctx.req_holds(req, e) {
                return Err(Error::IllFormedSystem(format!(
                    "witness violates a requirement on `{}`",
                    alphabet.name(*v)
                )));
            }
        }
        for (v, f) in &system.forced {
            if mu.get(v) != Some(f) {
                return Err(Error::IllFormedSystem("forced μ value not met by witness".into()));
            }
        }
        let vertex = Vertex {
            w: init.w_init.clone(),
            b,
            x: system.variables.clone(),
            theta: TypeRelation::new(),
            mu,
        };
        let mut wit = Witness {
            ctx,
            alphabet,
            n: init.n,
            marker_count: init.marker_count,
            vertex: vertex.clone(),
            alpha: BTreeMap::new(),
            sigma,
            path: Vec::new(),
            initial_vertex: vertex,
            initial_image: Vec::new(),
            rng: Rng::new(seed),
            budget,
            trace_on,
            trace_log: Vec::new(),
            stats: WitnessStats::default(),
        };
        wit.initial_image = wit.image();
        let inv = wit.alphabet.involute_word(&wit.initial_image)?;
        if wit.initial_image != inv {
            return Err(Error::IllFormedSystem("witness image is not a palindrome".into()));
        }
        wit.well_formed_full()?;
        Ok(wit)
    }

    fn expansion(&self) -> Expansion {
        let mut letters = Vec::new();
        let mut origin = Vec::new();
        for (wi, &s) in self.vertex.w.iter().enumerate() {
            match self.sigma.get(&s) {
                Some(img) => {
                    for (si, &l) in img.iter().enumerate() {
                        letters.push(l);
                        origin.push(Origin::Hidden(s, si));
                    }
                }
                None => {
                    letters.push(s);
                    origin.push(Origin::Visible(wi));
                }
            }
        }
        Expansion { letters, origin }
    }

    /// ασ(W), the conserved word over the initial alphabet.
    fn image(&self) -> Word {
        let e = self.expansion();
        self.alpha_expand(&e.letters)
    }

    fn alpha_expand(&self, w: &[SymbolId]) -> Word {
        let mut out = Vec::new();
        for &l in w {
            match self.alpha.get(&l) {
                Some(img) => out.extend(img.iter()),
                None => out.push(l),
            }
        }
        out
    }

    /// Σ_X |ασ(X)|, the termination measure.
    pub fn measure(&self) -> usize {
        self.sigma
            .values()
            .map(|w| w.iter().map(|l| self.alpha.get(l).map_or(1, |img| img.len())).sum::<usize>())
            .sum()
    }

    /// Follows one arc: validates it, recomputes (α, σ), checks the forward
    /// property and the conserved image, and commits the new state.
    fn follow(
        &mut self,
        kind: ArcKind,
        label: Endomorphism,
        dst: Vertex,
        new_sigma: BTreeMap<SymbolId, Word>,
        note: &str,
    ) -> Result<()> {
        self.stats.arcs += 1;
        if self.stats.arcs > self.budget {
            return Err(Error::Budget(format!("step budget exceeded at {note}")));
        }
        validate_arc(&self.alphabet, &self.ctx.monoid, kind, &self.vertex, &dst, &label)
            .map_err(|e| Error::Invalid(format!("{e} [at {note}]")))?;
        // path labels fix the marker and never produce it
        if label.map.contains_key(&self.ctx.marker)
            || label.map.values().any(|img| img.contains(&self.ctx.marker))
        {
            return Err(Error::Invalid(format!("label touches the marker at {note}")));
        }
        let measure_before = self.measure();
        check_forward(&self.alphabet, &self.vertex, &dst, &label, &self.alpha, &self.sigma, &new_sigma)
            .map_err(|e| {
                Error::ForwardViolation(format!(
                    "{e} at {note}; W = {}, W' = {}",
                    self.alphabet.display_word(&self.vertex.w),
                    self.alphabet.display_word(&dst.w)
                ))
            })?;
        self.stats.forward_checks += 1;
        // α' on the target: α'(x) = α(h(x)) for non-initial letters
        let mut new_alpha = BTreeMap::new();
        for &bsym in &dst.b {
            if self.ctx.mu0.get(bsym).is_some() {
                continue;
            }
            new_alpha.insert(bsym, self.alpha_expand(&label.image(bsym)));
        }
        // the pairwise forward checks chain transitively, so the conserved
        // global image only needs verification at round boundaries
        let touched: Vec<SymbolId> = new_sigma
            .iter()
            .filter(|(k, v)| self.sigma.get(k) != Some(v))
            .map(|(k, _)| *k)
            .chain(self.sigma.keys().filter(|k| !new_sigma.contains_key(k)).copied())
            .collect();
        let src = self.vertex.clone();
        self.vertex = dst;
        self.alpha = new_alpha;
        self.sigma = new_sigma;
        let measure_after = self.measure();
        if measure_after > measure_before {
            return Err(Error::ForwardViolation(format!("measure increased at {note}")));
        }
        if kind == ArcKind::Df6 {
            if measure_after >= measure_before {
                return Err(Error::ForwardViolation(format!("pop did not decrease the measure at {note}")));
            }
            self.stats.pops += 1;
        }
        self.stats.max_w = self.stats.max_w.max(self.vertex.w.len());
        if self.vertex.w.len() > self.ctx.kappa * self.n {
            return Err(Error::NotWellFormed(format!("|W| exceeds kappa*n after {note}")));
        }
        self.check_cheap_invariants(&touched, note)?;
        if self.trace_on {
            let lab = label
                .map
                .iter()
                .map(|(k, v)| {
                    format!(
                        "{}->{}",
                        self.alphabet.name(*k),
                        if v.is_empty() { "1".to_string() } else { self.alphabet.display_word(v) }
                    )
                })
                .collect::<Vec<_>>()
                .join(",");
            self.trace_log.push(format!(
                "arc {} |W|={} measure={} forward=ok label=[{}] {}",
                kind,
                self.vertex.w.len(),
                measure_after,
                lab,
                note
            ));
        }
        self.path.push(PathStep { src, dst: self.vertex.clone(), kind, label });
        Ok(())
    }

    /// Invariants asserted on every intermediate vertex: no self-involuting
    /// symbol besides the marker, marker count, per-symbol μ nonzero, θ
    /// shape, and σ/μ consistency for the variables the arc touched.
    fn check_cheap_invariants(&self, touched: &[SymbolId], note: &str) -> Result<()> {
        let v = &self.vertex;
        for &b in &v.b {
            if b != self.ctx.marker && self.alphabet.partner(b) == b {
                return Err(Error::NotWellFormed(format!("self-involuting letter after {note}")));
            }
        }
        let hashes = v.w.iter().filter(|&&s| s == self.ctx.marker).count();
        if hashes != self.marker_count {
            return Err(Error::NotWellFormed(format!("marker count changed at {note}")));
        }
        for (s, e) in &v.mu {
            if *s != self.ctx.marker && self.ctx.monoid.is_zero(*e) {
                return Err(Error::NotWellFormed(format!(
                    "μ zero on `{}` after {note}",
                    self.alphabet.name(*s)
                )));
            }
        }
        v.theta
            .validate(&self.alphabet, None)
            .map_err(|e| Error::NotWellFormed(format!("θ invalid after {note}: {e}")))?;
        for &x in touched {
            let w = match self.sigma.get(&x) {
                Some(w) => w,
                None => continue,
            };
            let bar = self.alphabet.partner(x);
            let winv = self.alphabet.involute_word(w)?;
            if self.sigma.get(&bar) != Some(&winv) {
                return Err(Error::NotWellFormed(format!("σ not involutive at {note}")));
            }
            let e = eval_mu(self.ctx, &v.mu, w)
                .ok_or_else(|| Error::NotWellFormed(format!("σ letter without μ at {note}")))?;
            if v.mu.get(&x) != Some(&e) {
                return Err(Error::NotWellFormed(format!("μ(X) ≠ μ(σ(X)) at {note}")));
            }
        }
        Ok(())
    }

    /// Full well-formedness; used at round boundaries.
    pub fn well_formed_full(&self) -> Result<()> {
        let ctx = crate::trace::WellFormedCtx {
            alphabet: &self.alphabet,
            marker: self.ctx.marker,
            n: self.n,
            kappa: self.ctx.kappa,
            init_marker_count: self.marker_count,
            aplus: &self.ctx.working,
        };
        let bad = crate::trace::well_formed_diagnostics(
            &ctx,
            &self.vertex.w,
            &self.vertex.b,
            &self.vertex.x,
            &self.vertex.theta,
            &crate::monoid::ConstraintMorphism {
                monoid: self.ctx.monoid.clone(),
                map: self.vertex.mu.clone(),
            },
        );
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::NotWellFormed(bad.join("; ")))
        }
    }

    pub fn is_final(&self) -> bool {
        is_final(&self.alphabet, &self.vertex)
    }

    // ------------------------------------------------------------------
    // primitive arcs
    // ------------------------------------------------------------------

    /// df6: X ↦ pX.
    fn pop(&mut self, x: SymbolId, p: &[SymbolId], note: &str) -> Result<()> {
        let xbar = self.alphabet.partner(x);
        let pbar = self.alphabet.involute_word(p)?;
        let mut w2 = Vec::with_capacity(self.vertex.w.len() + 2);
        for &s in &self.vertex.w {
            if s == x {
                w2.extend(p.iter());
                w2.push(x);
            } else if s == xbar {
                w2.push(xbar);
                w2.extend(pbar.iter());
            } else {
                w2.push(s);
            }
        }
        let old = self
            .sigma
            .get(&x)
            .cloned()
            .ok_or_else(|| Error::Invalid("pop of unmapped variable".into()))?;
        if !old.starts_with(p) {
            return Err(Error::Invalid(format!(
                "σ({}) does not start with the popped word",
                self.alphabet.name(x)
            )));
        }
        let rest = old[p.len()..].to_vec();
        let restbar = self.alphabet.involute_word(&rest)?;
        let mut sigma2 = self.sigma.clone();
        sigma2.insert(x, rest.clone());
        sigma2.insert(xbar, restbar);
        let mut mu2 = self.vertex.mu.clone();
        let e = eval_mu(self.ctx, &self.vertex.mu, &rest)
            .ok_or_else(|| Error::Invalid("σ rest uses letters without μ".into()))?;
        mu2.insert(x, e);
        mu2.insert(xbar, self.ctx.monoid.inv(e));
        let dst = Vertex { w: w2, mu: mu2, ..self.vertex.clone() };
        self.follow(ArcKind::Df6, Endomorphism::identity(), dst, sigma2, note)
    }

    /// df4: removes a variable pair with σ(X) = 1.
    fn remove_var(&mut self, x: SymbolId, note: &str) -> Result<()> {
        let xbar = self.alphabet.partner(x);
        if !self.sigma.get(&x).is_some_and(|w| w.is_empty()) {
            return Err(Error::Invalid("df4 on a variable with nonempty image".into()));
        }
        let w2: Word = self.vertex.w.iter().copied().filter(|&s| s != x && s != xbar).collect();
        let mut x2 = self.vertex.x.clone();
        x2.remove(&x);
        x2.remove(&xbar);
        let mut mu2 = self.vertex.mu.clone();
        mu2.remove(&x);
        mu2.remove(&xbar);
        let mut theta2 = self.vertex.theta.clone();
        theta2.remove_mentioning(&BTreeSet::from([x, xbar]));
        let mut sigma2 = self.sigma.clone();
        sigma2.remove(&x);
        sigma2.remove(&xbar);
        let dst = Vertex { w: w2, x: x2, theta: theta2, mu: mu2, ..self.vertex.clone() };
        self.follow(ArcKind::Df4, Endomorphism::identity(), dst, sigma2, note)
    }

    /// df5: types a variable with the letter c or the block c c̄.
    fn type_var(&mut self, x: SymbolId, partner: BlockPartner, note: &str) -> Result<()> {
        let mut theta2 = self.vertex.theta.clone();
        match partner {
            BlockPartner::Letter(c) => theta2.insert_letter(&self.alphabet, x, c),
            BlockPartner::Pair(c) => theta2.insert_block(&self.alphabet, Entity::Sym(x), c),
        }
        let dst = Vertex { theta: theta2, ..self.vertex.clone() };
        let sigma2 = self.sigma.clone();
        self.follow(ArcKind::Df5, Endomorphism::identity(), dst, sigma2, note)
    }

    /// df1: introduces a fresh pair (c, c̄) with h(c) = img and
    /// μ(c) = μ(img), optionally extending θ.
    fn introduce(
        &mut self,
        img: SymbolId,
        extend_theta: impl FnOnce(&Alphabet, &mut TypeRelation, SymbolId),
        note: &str,
    ) -> Result<(SymbolId, SymbolId)> {
        let (c, cbar) = self.alphabet.fresh_letters(1)?[0];
        let mut b2 = self.vertex.b.clone();
        b2.insert(c);
        b2.insert(cbar);
        let mut mu2 = self.vertex.mu.clone();
        let e = *self
            .vertex
            .mu
            .get(&img)
            .ok_or_else(|| Error::Invalid("μ undefined on base letter".into()))?;
        mu2.insert(c, e);
        mu2.insert(cbar, self.ctx.monoid.inv(e));
        let mut theta2 = self.vertex.theta.clone();
        extend_theta(&self.alphabet, &mut theta2, c);
        let label = Endomorphism::define(&self.alphabet, c, &[img])?;
        let dst = Vertex { b: b2, mu: mu2, theta: theta2, ..self.vertex.clone() };
        let sigma2 = self.sigma.clone();
        self.follow(ArcKind::Df1, label, dst, sigma2, note)?;
        Ok((c, cbar))
    }

    /// df2: compression arc applying a simultaneous rewrite plan to W and σ,
    /// optionally adding a fresh pair to B.
    fn rewrite_under(
        &mut self,
        label: Endomorphism,
        rewrite: &Rewrite,
        b_add: Option<(SymbolId, SymbolId, Elem)>,
        note: &str,
    ) -> Result<()> {
        let mut w2 = Vec::with_capacity(self.vertex.w.len());
        for (i, &s) in self.vertex.w.iter().enumerate() {
            match rewrite.w_plan.get(&i) {
                Some(rep) => w2.extend(rep.iter()),
                None => w2.push(s),
            }
        }
        let mut sigma2 = self.sigma.clone();
        for (v, plan) in &rewrite.var_plan {
            let old = self.sigma
                .get(v)
                .cloned()
                .ok_or_else(|| Error::Invalid("rewrite of unmapped variable".into()))?;
            let mut new = Vec::with_capacity(old.len());
            for (i, &l) in old.iter().enumerate() {
                match plan.get(&i) {
                    Some(rep) => new.extend(rep.iter()),
                    None => new.push(l),
                }
            }
            let newbar = self.alphabet.involute_word(&new)?;
            sigma2.insert(*v, new);
            sigma2.insert(self.alphabet.partner(*v), newbar);
        }
        let mut b2 = self.vertex.b.clone();
        let mut mu2 = self.vertex.mu.clone();
        if let Some((c, cbar, e)) = b_add {
            b2.insert(c);
            b2.insert(cbar);
            mu2.insert(c, e);
            mu2.insert(cbar, self.ctx.monoid.inv(e));
        }
        // μ'(k) = μ(h(k)) for every letter the label maps
        for (&k, img) in &label.map {
            if b_add.is_some_and(|(c, cbar, _)| k == c || k == cbar) {
                continue;
            }
            let e = eval_mu(self.ctx, &self.vertex.mu, img)
                .ok_or_else(|| Error::Invalid("label image uses letters without μ".into()))?;
            mu2.insert(k, e);
        }
        let dst = Vertex { w: w2, b: b2, mu: mu2, ..self.vertex.clone() };
        self.follow(ArcKind::Df2, label, dst, sigma2, note)
    }

    /// df3: drops letters from B (θ becomes empty); σ values lose the
    /// dropped letters by expanding them through α.
    fn alphabet_reduction(&mut self, drop: &BTreeSet<SymbolId>, note: &str) -> Result<()> {
        if drop.is_empty() {
            return Ok(());
        }
        let mut b2 = self.vertex.b.clone();
        let mut mu2 = self.vertex.mu.clone();
        for d in drop {
            b2.remove(d);
            mu2.remove(d);
        }
        let mut sigma2: BTreeMap<SymbolId, Word> = BTreeMap::new();
        for (&v, w) in &self.sigma {
            let mut new = Vec::with_capacity(w.len());
            for &l in w {
                if drop.contains(&l) {
                    match self.alpha.get(&l) {
                        Some(img) => new.extend(img.iter()),
                        None => new.push(l),
                    }
                } else {
                    new.push(l);
                }
            }
            sigma2.insert(v, new);
        }
        let dst = Vertex { b: b2, mu: mu2, theta: TypeRelation::new(), ..self.vertex.clone() };
        self.follow(ArcKind::Df3, Endomorphism::identity(), dst, sigma2, note)
    }

    /// Drops every non-initial letter that no longer occurs in W.
    fn drop_unused_letters(&mut self, note: &str) -> Result<()> {
        let used: BTreeSet<SymbolId> = self.vertex.w.iter().copied().collect();
        let mut drop = BTreeSet::new();
        for &b in &self.vertex.b {
            if self.ctx.mu0.get(b).is_some() {
                continue;
            }
            if !used.contains(&b) && !used.contains(&self.alphabet.partner(b)) {
                drop.insert(b);
                drop.insert(self.alphabet.partner(b));
            }
        }
        self.alphabet_reduction(&drop, note)
    }

    /// df1 arc that introduces a fresh typed pair and simultaneously
    /// rewrites W and σ: the image of the new letter is a single existing
    /// letter, so the morphism respects the new typing.
    fn introduce_with_rewrite(
        &mut self,
        img: SymbolId,
        extend_theta: impl FnOnce(&Alphabet, &mut TypeRelation, SymbolId),
        build_rewrite: impl FnOnce(&mut RewriteBuilder, SymbolId, SymbolId) -> Result<()>,
        note: &str,
    ) -> Result<(SymbolId, SymbolId)> {
        let (c, cbar) = self.alphabet.fresh_letters(1)?[0];
        let rewrite = {
            let mut builder = RewriteBuilder::new(&self.alphabet, &self.sigma);
            build_rewrite(&mut builder, c, cbar)?;
            builder.build()
        };
        let mut w2 = Vec::with_capacity(self.vertex.w.len());
        for (i, &s) in self.vertex.w.iter().enumerate() {
            match rewrite.w_plan.get(&i) {
                Some(rep) => w2.extend(rep.iter()),
                None => w2.push(s),
            }
        }
        let mut sigma2 = self.sigma.clone();
        for (v, plan) in &rewrite.var_plan {
            let old = self.sigma
                .get(v)
                .cloned()
                .ok_or_else(|| Error::Invalid("rewrite of unmapped variable".into()))?;
            let mut new = Vec::with_capacity(old.len());
            for (i, &l) in old.iter().enumerate() {
                match plan.get(&i) {
                    Some(rep) => new.extend(rep.iter()),
                    None => new.push(l),
                }
            }
            let newbar = self.alphabet.involute_word(&new)?;
            sigma2.insert(*v, new);
            sigma2.insert(self.alphabet.partner(*v), newbar);
        }
        let mut b2 = self.vertex.b.clone();
        b2.insert(c);
        b2.insert(cbar);
        let mut mu2 = self.vertex.mu.clone();
        let e = *self
            .vertex
            .mu
            .get(&img)
            .ok_or_else(|| Error::Invalid("μ undefined on base letter".into()))?;
        mu2.insert(c, e);
        mu2.insert(cbar, self.ctx.monoid.inv(e));
        let mut theta2 = self.vertex.theta.clone();
        extend_theta(&self.alphabet, &mut theta2, c);
        let label = Endomorphism::define(&self.alphabet, c, &[img])?;
        let dst = Vertex { w: w2, b: b2, mu: mu2, theta: theta2, ..self.vertex.clone() };
        self.follow(ArcKind::Df1, label, dst, sigma2, note)?;
        Ok((c, cbar))
    }

    /// Whether some occurrence of x in W is directly preceded by l.
    fn preceded_by(&self, x: SymbolId, l: SymbolId) -> bool {
        self.vertex.w.windows(2).any(|p| p[0] == l && p[1] == x)
    }

    /// Pops one unit off the front of σ(X): the typed word for typed
    /// variables, the first letter otherwise.
    fn pop_unit(&mut self, x: SymbolId, note: &str) -> Result<()> {
        let p: Word = match self.vertex.theta.type_of_symbol(x) {
            Some(bp) => crate::trace::partner_word(&self.alphabet, &bp),
            None => {
                let f = self
                    .sigma
                    .get(&x)
                    .and_then(|w| w.first().copied())
                    .ok_or_else(|| Error::Invalid("pop on empty image".into()))?;
                vec![f]
            }
        };
        self.pop(x, &p, note)
    }

    // ------------------------------------------------------------------
    // block compression
    // ------------------------------------------------------------------

    /// Removes every variable pair with |σ(X)| ≤ t by popping its content
    /// and following a removal arc.
    pub fn remove_short_variables(&mut self, t: usize) -> Result<()> {
        loop {
            let mut acted = false;
            let vars: Vec<SymbolId> = self.vertex.x.iter().copied().collect();
            for x in vars {
                if !self.vertex.x.contains(&x) || x > self.alphabet.partner(x) {
                    continue;
                }
                let len = self.sigma.get(&x).map_or(0, |w| w.len());
                if len <= t {
                    while !self.sigma.get(&x).is_none_or(|w| w.is_empty()) {
                        self.pop_unit(x, "short-var pop")?;
                    }
                    self.remove_var(x, "short-var removal")?;
                    acted = true;
                }
            }
            if !acted {
                return Ok(());
            }
        }
    }

    /// Pops the first letter of every variable so that every occurrence of
    /// every variable in W is preceded by a constant.
    fn pop_discipline(&mut self) -> Result<()> {
        let vars: Vec<SymbolId> = self.vertex.x.iter().copied().collect();
        for x in vars {
            if !self.vertex.x.contains(&x) {
                continue;
            }
            self.pop_unit(x, "discipline pop")?;
        }
        Ok(())
    }

    fn oriented_letters(&self) -> Vec<SymbolId> {
        self.vertex
            .b
            .iter()
            .copied()
            .filter(|&b| b != self.ctx.marker && b < self.alphabet.partner(b))
            .collect()
    }

    /// Maximal runs of equal letters drawn from `ls`: (start, len, visible).
    fn runs_of(&self, e: &Expansion, ls: &[SymbolId]) -> Vec<(usize, usize, bool)> {
        let mut out = Vec::new();
        let mut i = 0;
        while i < e.letters.len() {
            if ls.contains(&e.letters[i]) {
                let l = e.letters[i];
                let mut j = i;
                let mut vis = false;
                while j < e.letters.len() && e.letters[j] == l {
                    if matches!(e.origin[j], Origin::Visible(_)) {
                        vis = true;
                    }
                    j += 1;
                }
                out.push((i, j - i, vis));
                i = j;
            } else {
                i += 1;
            }
        }
        out
    }

    /// One b-compression: removes all proper factors b^ℓ and b̄^ℓ (ℓ ≥ 2)
    /// from W via typed halving.
    fn b_compression(&mut self, b: SymbolId) -> Result<()> {
        let bbar = self.alphabet.partner(b);
        let exp = self.expansion();
        let runs = self.runs_of(&exp, &[b, bbar]);
        let lambdas: BTreeSet<usize> = runs
            .iter()
            .filter(|&&(_, len, vis)| len >= 2 && vis)
            .map(|&(_, len, _)| len)
            .collect();
        if lambdas.is_empty() {
            return Ok(());
        }
        // X_b: variables whose prefix run crosses into a visible occurrence
        // of the same letter; membership is decided now and remembered
        let mut x_b: BTreeSet<SymbolId> = BTreeSet::new();
        for (&x, img) in self.sigma.iter() {
            for &l in &[b, bbar] {
                if img.first() == Some(&l) && self.preceded_by(x, l) {
                    x_b.insert(x);
                }
            }
        }
        // fresh letter c with h(c) = b
        let (c, cbar) = self.introduce(b, |_, _, _| {}, "block fresh c")?;
        // rename qualifying runs b^λ → c^λ, b̄^λ → c̄^λ
        {
            let exp = self.expansion();
            let runs = self.runs_of(&exp, &[b, bbar]);
            let mut rw = RewriteBuilder::new(&self.alphabet, &self.sigma);
            for &(start, len, _vis) in &runs {
                if !lambdas.contains(&len) {
                    continue;
                }
                let to = if exp.letters[start] == b { c } else { cbar };
                for k in 0..len {
                    rw.set(exp.origin[start + k], vec![to])?;
                }
            }
            let rw = rw.build();
            let label = Endomorphism::define(&self.alphabet, c, &[b])?;
            self.rewrite_under(label, &rw, None, "block rename runs")?;
        }
        // type the variables of X_b whose image became a pure c or c̄ power
        // (their runs cross into visibility through the popped letter)
        {
            let vars: Vec<SymbolId> = self.vertex.x.iter().copied().collect();
            for x in vars {
                if x > self.alphabet.partner(x) || self.vertex.theta.type_of_symbol(x).is_some() {
                    continue;
                }
                let img = self.sigma.get(&x).cloned().unwrap_or_default();
                if img.is_empty() {
                    continue;
                }
                if img.iter().all(|&l| l == c) && x_b.contains(&x) {
                    self.type_var(x, BlockPartner::Letter(c), "block type var")?;
                } else if img.iter().all(|&l| l == cbar) && x_b.contains(&x) {
                    self.type_var(x, BlockPartner::Letter(cbar), "block type var")?;
                }
            }
        }
        // one df1 arc per λ: introduce the typed marker pair and replace
        // one position (the first visible one when present) of every λ-run
        let mut marker_of: BTreeMap<usize, (SymbolId, SymbolId)> = BTreeMap::new();
        {
            let exp = self.expansion();
            let runs = self.runs_of(&exp, &[c, cbar]);
            let mut per_lambda: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
            for &(start, len, _) in &runs {
                per_lambda.entry(len).or_default().push(start);
            }
            let alphabet_snapshot = self.alphabet.clone();
            for (&lam, starts) in &per_lambda {
                let pair = self.introduce_with_rewrite(
                    c,
                    |al, th, new_c| th.insert_letter(al, new_c, c),
                    |rw, ml, mlbar| {
                        for &start in starts {
                            let neg = exp.letters[start] == cbar;
                            let marker = if neg { mlbar } else { ml };
                            let pos = (start..start + lam)
                                .find(|&p| matches!(exp.origin[p], Origin::Visible(_)));
                            let pos = match pos {
                                Some(p) => p,
                                None => {
                                    // fully hidden run: mark only through the
                                    // unbarred variable; the mirror inherits
                                    match exp.origin[start] {
                                        Origin::Hidden(v, _)
                                            if v > alphabet_snapshot.partner(v) =>
                                        {
                                            continue
                                        }
                                        _ => start,
                                    }
                                }
                            };
                            rw.set(exp.origin[pos], vec![marker])?;
                        }
                        Ok(())
                    },
                    "block mark runs",
                )?;
                marker_of.insert(lam, pair);
            }
        }
        // halving loop
        let mut guard = 0;
        loop {
            guard += 1;
            if guard > 128 {
                return Err(Error::Budget("halving loop did not terminate".into()));
            }
            // parity pops: only where the prefix run crosses into a visible
            // occurrence of the same letter; fully hidden runs keep their
            // parity through marker absorption instead
            let vars: Vec<SymbolId> = self.vertex.x.iter().copied().collect();
            for x in vars {
                if !self.vertex.x.contains(&x) {
                    continue;
                }
                for &letter in &[c, cbar] {
                    let pre = self
                        .sigma
                        .get(&x)
                        .map(|w| w.iter().take_while(|&&l| l == letter).count())
                        .unwrap_or(0);
                    if pre % 2 == 1 && x_b.contains(&x) {
                        self.pop(x, &[letter], "halving parity pop")?;
                    }
                }
            }
            self.drop_emptied_vars("halving removal")?;
            let exp = self.expansion();
            if !exp.letters.iter().any(|&l| l == c || l == cbar) {
                break;
            }
            // group runs by marker letter; each group has a uniform c-count
            let group_count = self.marker_groups(&exp, c, cbar, &marker_of)?;
            // absorb one c per marker for odd groups; restart the loop
            // after each absorb so the parity pops can realign
            let mut absorbed = false;
            for (&m, &count) in &group_count {
                if count % 2 == 1 {
                    self.absorb_once(m, c, cbar, 1)?;
                    absorbed = true;
                    break;
                }
            }
            if absorbed {
                continue;
            }
            // halve every run, segment by segment
            let exp = self.expansion();
            if exp.letters.iter().any(|&l| l == c || l == cbar) {
                let mut rw = RewriteBuilder::new(&self.alphabet, &self.sigma);
                let is_marker =
                    |x: SymbolId| marker_of.values().any(|&(m, mb)| x == m || x == mb);
                let mut i = 0;
                while i < exp.letters.len() {
                    let l = exp.letters[i];
                    if l != c && l != cbar {
                        i += 1;
                        continue;
                    }
                    let mut j = i;
                    let mut positions: Vec<usize> = Vec::new();
                    while j < exp.letters.len() && (exp.letters[j] == l || is_marker(exp.letters[j])) {
                        if exp.letters[j] == l {
                            positions.push(j);
                        }
                        j += 1;
                    }
                    // all visible positions of the run form one pool; only
                    // hidden stretches need segment-wise evenness
                    let visible: Vec<usize> = positions
                        .iter()
                        .copied()
                        .filter(|&p| matches!(exp.origin[p], Origin::Visible(_)))
                        .collect();
                    if !visible.len().is_multiple_of(2) {
                        return Err(Error::Invalid("odd visible pool at halving".into()));
                    }
                    for pair in visible.chunks(2) {
                        rw.set(exp.origin[pair[0]], vec![])?;
                    }
                    let hidden: Vec<usize> = positions
                        .iter()
                        .copied()
                        .filter(|&p| matches!(exp.origin[p], Origin::Hidden(..)))
                        .collect();
                    for seg in segment_by_origin(&exp, &hidden, &self.sigma, &is_marker) {
                        if seg.len() % 2 != 0 {
                            return Err(Error::Invalid("odd segment at halving".into()));
                        }
                        // barred-variable segments inherit from the mirror
                        if let Origin::Hidden(v, _) = exp.origin[seg[0]] {
                            if v > self.alphabet.partner(v) {
                                continue;
                            }
                        }
                        for pair in seg.chunks(2) {
                            rw.set(exp.origin[pair[0]], vec![])?;
                        }
                    }
                    i = j;
                }
                let rw = rw.build();
                let label = Endomorphism::define(&self.alphabet, c, &[c, c])?;
                self.rewrite_under(label, &rw, None, "halving")?;
                self.stats.max_w_in_halving = self.stats.max_w_in_halving.max(self.vertex.w.len());
                if self.vertex.w.len() > TRANSIENT_FACTOR * self.n {
                    return Err(Error::NotWellFormed("|W| above 35n inside halving".into()));
                }
            }
            self.drop_emptied_vars("halving removal")?;
        }
        // drop c, c̄; the type relation is empty again
        self.alphabet_reduction(&BTreeSet::from([c, cbar]), "block drop c")?;
        Ok(())
    }

    /// One absorb arc h(m) = c m (unit 1) or h(m) = c c̄ m (unit 2): every
    /// occurrence of the marker absorbs one adjacent unit. A unit is
    /// deletable only when it sits next to the marker through letters that
    /// commute with c at the word level; blocking untyped variables are
    /// popped open first.
    fn absorb_once(&mut self, m: SymbolId, c: SymbolId, cbar: SymbolId, unit: usize) -> Result<()> {
        let mbar = self.alphabet.partner(m);
        let mut guard = 0;
        loop {
            guard += 1;
            if guard > 64 {
                return Err(Error::Budget("absorb exposure did not converge".into()));
            }
            self.drop_emptied_vars("absorb removal")?;
            #[derive(Clone, Copy)]
            enum Site {
                W(usize),
                Sigma(SymbolId, usize),
            }
            let mut pops: Vec<(SymbolId, Word)> = Vec::new();
            let mut sites: Vec<Site> = Vec::new();
            let mut claimed_w: BTreeSet<usize> = BTreeSet::new();
            let theta = self.vertex.theta.clone();
            let transparent_letter = |x: SymbolId, cc: SymbolId| -> bool {
                theta.type_of_symbol(x) == Some(BlockPartner::Letter(cc))
            };
            let transparent_pair_head = |w: &[SymbolId], j: usize| -> bool {
                j + 1 < w.len()
                    && w[j + 1] == self.alphabet.partner(w[j])
                    && matches!(theta.partner_of(&Entity::Pair(w[j])), Some(BlockPartner::Pair(_)))
            };
            let transparent_block_var = |x: SymbolId| -> bool {
                matches!(theta.type_of_symbol(x), Some(BlockPartner::Pair(_)))
            };
            let w = self.vertex.w.clone();
            let mut i = 0;
            'marker: while i < w.len() {
                let s = w[i];
                let hit = if unit == 1 {
                    s == m || s == mbar
                } else {
                    s == m && i + 1 < w.len() && w[i + 1] == mbar
                };
                if !hit {
                    i += 1;
                    continue;
                }
                let neg = unit == 1 && s == mbar;
                let cc = if neg { cbar } else { c };
                let ccb = self.alphabet.partner(cc);
                let marker_at = i;
                i += unit;
                for dir in [1i64, -1i64] {
                    let mut j = if dir == 1 { (marker_at + unit) as i64 } else { marker_at as i64 - 1 };
                    loop {
                        if j < 0 || j >= w.len() as i64 {
                            break;
                        }
                        let ju = j as usize;
                        let x = w[ju];
                        if unit == 1 {
                            if x == cc {
                                if claimed_w.contains(&ju) {
                                    // already taken by an earlier marker:
                                    // the deletion makes the next unit
                                    // adjacent, so walk through
                                    j += dir;
                                    continue;
                                }
                                claimed_w.insert(ju);
                                sites.push(Site::W(ju));
                                continue 'marker;
                            }
                            if transparent_letter(x, cc) {
                                j += dir;
                                continue;
                            }
                        } else {
                            if dir == 1 && x == c && ju + 1 < w.len() && w[ju + 1] == cbar {
                                if claimed_w.contains(&ju) {
                                    j += 2;
                                    continue;
                                }
                                claimed_w.insert(ju);
                                claimed_w.insert(ju + 1);
                                sites.push(Site::W(ju));
                                continue 'marker;
                            }
                            if dir == -1 && x == cbar && ju >= 1 && w[ju - 1] == c {
                                if claimed_w.contains(&(ju - 1)) {
                                    j -= 2;
                                    continue;
                                }
                                claimed_w.insert(ju - 1);
                                claimed_w.insert(ju);
                                sites.push(Site::W(ju - 1));
                                continue 'marker;
                            }
                            if transparent_block_var(x) {
                                j += dir;
                                continue;
                            }
                            if dir == 1 && transparent_pair_head(&w, ju) {
                                j += 2;
                                continue;
                            }
                            if dir == -1
                                && ju >= 1
                                && w[ju] == self.alphabet.partner(w[ju - 1])
                                && transparent_pair_head(&w, ju - 1)
                            {
                                j -= 2;
                                continue;
                            }
                        }
                        // blocked; an untyped variable may be popped open
                        if self.vertex.x.contains(&x) {
                            let want: Word = if unit == 1 { vec![cc] } else { vec![c, cbar] };
                            if dir == 1 {
                                if self.sigma.get(&x).is_some_and(|img| img.starts_with(&want)) {
                                    pops.push((x, want));
                                    continue 'marker;
                                }
                            } else {
                                let xb = self.alphabet.partner(x);
                                let need: Word = if unit == 1 { vec![ccb] } else { vec![c, cbar] };
                                if self.sigma.get(&xb).is_some_and(|img| img.starts_with(&need)) {
                                    pops.push((xb, need));
                                    continue 'marker;
                                }
                            }
                        }
                        break;
                    }
                }
                return Err(Error::Invalid("marker with no absorbable unit".into()));
            }
            // markers hidden inside variable images absorb in place; the
            // barred orientation inherits through the involution. A marker
            // at the image boundary is popped out first so a visible unit
            // becomes reachable.
            for (&v, img) in &self.sigma {
                if v > self.alphabet.partner(v) {
                    continue;
                }
                for (k, &l) in img.iter().enumerate() {
                    let hit = if unit == 1 {
                        l == m || l == mbar
                    } else {
                        l == m && img.get(k + 1) == Some(&mbar)
                    };
                    if !hit {
                        continue;
                    }
                    let cc = if unit == 1 && l == mbar { cbar } else { c };
                    let after = k + unit;
                    if unit == 1 {
                        if img.get(after) == Some(&cc) {
                            sites.push(Site::Sigma(v, after));
                            continue;
                        }
                        if k >= 1 && img[k - 1] == cc {
                            sites.push(Site::Sigma(v, k - 1));
                            continue;
                        }
                    } else if img.get(after) == Some(&c) && img.get(after + 1) == Some(&cbar) {
                        sites.push(Site::Sigma(v, after));
                        continue;
                    } else if k >= 2 && img[k - 2] == c && img[k - 1] == cbar {
                        sites.push(Site::Sigma(v, k - 2));
                        continue;
                    }
                    if k == 0 {
                        pops.push((v, img[..unit].to_vec()));
                    } else if after == img.len() {
                        let vb = self.alphabet.partner(v);
                        let p = self.alphabet.involute_word(&img[k..after])?;
                        pops.push((vb, p));
                    } else {
                        return Err(Error::Invalid("hidden marker with no adjacent unit".into()));
                    }
                }
            }
            if !pops.is_empty() {
                pops.sort();
                pops.dedup();
                for (v, p) in pops {
                    if self.vertex.x.contains(&v)
                        && self.sigma.get(&v).is_some_and(|img| img.starts_with(&p))
                    {
                        self.pop(v, &p, "absorb exposure pop")?;
                    }
                }
                continue;
            }
            let mut rw = RewriteBuilder::new(&self.alphabet, &self.sigma);
            if sites.is_empty() {
                return Err(Error::Invalid("absorb found no site".into()));
            }
            for site in &sites {
                match site {
                    Site::W(j) => {
                        for k in 0..unit {
                            rw.set(Origin::Visible(j + k), vec![])?;
                        }
                    }
                    Site::Sigma(v, idx) => {
                        for k in 0..unit {
                            rw.set(Origin::Hidden(*v, idx + k), vec![])?;
                        }
                    }
                }
            }
            let rw = rw.build();
            let img: Word = if unit == 1 { vec![c, m] } else { vec![c, cbar, m] };
            let label = Endomorphism::define(&self.alphabet, m, &img)?;
            self.rewrite_under(label, &rw, None, "halving absorb")?;
            return Ok(());
        }
    }

    fn drop_emptied_vars(&mut self, note: &str) -> Result<()> {
        let vars: Vec<SymbolId> = self.vertex.x.iter().copied().collect();
        for x in vars {
            if self.vertex.x.contains(&x)
                && x < self.alphabet.partner(x)
                && self.sigma.get(&x).is_some_and(|w| w.is_empty())
            {
                self.remove_var(x, note)?;
            }
        }
        Ok(())
    }

    fn marker_groups(
        &self,
        exp: &Expansion,
        c: SymbolId,
        cbar: SymbolId,
        marker_of: &BTreeMap<usize, (SymbolId, SymbolId)>,
    ) -> Result<BTreeMap<SymbolId, usize>> {
        let mut group_count: BTreeMap<SymbolId, usize> = BTreeMap::new();
        let is_pos_marker = |x: SymbolId| marker_of.values().any(|&(m, _)| x == m);
        let is_neg_marker = |x: SymbolId| marker_of.values().any(|&(_, mb)| x == mb);
        let mut i = 0;
        while i < exp.letters.len() {
            let l = exp.letters[i];
            let interesting = l == c || l == cbar || is_pos_marker(l) || is_neg_marker(l);
            if !interesting {
                i += 1;
                continue;
            }
            let neg = l == cbar || is_neg_marker(l);
            let cc = if neg { cbar } else { c };
            let mut j = i;
            let mut count = 0usize;
            let mut marker = None;
            while j < exp.letters.len() {
                let lj = exp.letters[j];
                if lj == cc {
                    count += 1;
                } else if (neg && is_neg_marker(lj)) || (!neg && is_pos_marker(lj)) {
                    if marker.is_some() {
                        return Err(Error::Invalid("two markers in one run".into()));
                    }
                    marker = Some(lj);
                } else {
                    break;
                }
                j += 1;
            }
            let m = marker.ok_or_else(|| Error::Invalid("run without marker".into()))?;
            let canon = if neg { self.alphabet.partner(m) } else { m };
            match group_count.get(&canon) {
                Some(&prev) if prev != count => {
                    return Err(Error::Invalid("non-uniform run group".into()))
                }
                _ => {
                    group_count.insert(canon, count);
                }
            }
            i = j;
        }
        Ok(group_count)
    }

    /// Standard block compression. Entry: θ = ∅ and |W| ≤ 29n; exit: no
    /// proper factor b² in W and |W| ≤ 31n.
    pub fn block_compression(&mut self) -> Result<()> {
        if !self.vertex.theta.is_empty() {
            return Err(Error::Invalid("block compression needs an empty type relation".into()));
        }
        if self.vertex.w.len() > BCC_FACTOR * self.n {
            return Err(Error::NotWellFormed("|W| above 29n at block entry".into()));
        }
        self.remove_short_variables(2)?;
        if self.is_final() {
            return Ok(());
        }
        self.pop_discipline()?;
        let letters = self.oriented_letters();
        for b in letters {
            if !self.vertex.b.contains(&b) {
                continue;
            }
            self.b_compression(b)?;
        }
        self.drop_unused_letters("block final reduction")?;
        for w in self.vertex.w.windows(2) {
            if w[0] == w[1] && w[0] != self.ctx.marker {
                return Err(Error::NotWellFormed("b² survived block compression".into()));
            }
        }
        if self.vertex.w.len() > PCC_FACTOR * self.n {
            return Err(Error::NotWellFormed("|W| above 31n after block compression".into()));
        }
        self.stats.max_w_after_block = self.stats.max_w_after_block.max(self.vertex.w.len());
        Ok(())
    }

    // ------------------------------------------------------------------
    // pair compression
    // ------------------------------------------------------------------

    /// Pairs ab with a ∈ L, b ∈ R, b ≠ ā occurring in σ(W) with at least
    /// one visible position.
    fn visible_pairs(&self, left: &BTreeSet<SymbolId>) -> BTreeSet<(SymbolId, SymbolId)> {
        let exp = self.expansion();
        let mut out = BTreeSet::new();
        for i in 0..exp.letters.len().saturating_sub(1) {
            let (a, b) = (exp.letters[i], exp.letters[i + 1]);
            if a == self.ctx.marker || b == self.ctx.marker || b == self.alphabet.partner(a) {
                continue;
            }
            if left.contains(&a) && !left.contains(&b) {
                let vis = matches!(exp.origin[i], Origin::Visible(_))
                    || matches!(exp.origin[i + 1], Origin::Visible(_));
                if vis {
                    out.insert((a, b));
                }
            }
        }
        out
    }

    /// Simulated |W''| for a candidate partition: the word after uncrossing
    /// pops and replacement of the pairs that will have fresh letters.
    fn simulate_pair_length(&self, left: &BTreeSet<SymbolId>) -> usize {
        let pairs = self.visible_pairs(left);
        let mut w1: Word = Vec::with_capacity(self.vertex.w.len() + 8);
        for &s in &self.vertex.w {
            match self.sigma.get(&s) {
                Some(img) => {
                    // the variable's own pop prepends its first letter; the
                    // partner's pop appends the last letter
                    let before = img.first().copied().filter(|f| !left.contains(f));
                    let after = img.last().copied().filter(|l| left.contains(l));
                    if let Some(f) = before {
                        w1.push(f);
                    }
                    w1.push(s);
                    if let Some(l) = after {
                        w1.push(l);
                    }
                }
                None => w1.push(s),
            }
        }
        let mut count = 0usize;
        let mut i = 0;
        while i + 1 < w1.len() {
            let (a, b) = (w1[i], w1[i + 1]);
            let is_letter = |x: SymbolId| !self.sigma.contains_key(&x);
            let hit = (pairs.contains(&(a, b))
                || pairs.contains(&(self.alphabet.partner(b), self.alphabet.partner(a))))
                && is_letter(a)
                && is_letter(b);
            if hit {
                count += 1;
                i += 2;
            } else {
                i += 1;
            }
        }
        w1.len() - count
    }

    /// Chooses a partition whose simulated compressed length meets the 29n
    /// bound: exhaustive below 2^12 candidates, sampled with a retry cap
    /// otherwise.
    pub fn choose_partition(&mut self) -> Result<BTreeSet<SymbolId>> {
        let oriented = self.oriented_letters();
        let target = BCC_FACTOR * self.n;
        if oriented.len() <= 12 {
            let mut best: Option<(usize, BTreeSet<SymbolId>)> = None;
            for mask in 0..(1usize << oriented.len()) {
                let mut left = BTreeSet::new();
                for (i, &b) in oriented.iter().enumerate() {
                    if mask >> i & 1 == 1 {
                        left.insert(b);
                    } else {
                        left.insert(self.alphabet.partner(b));
                    }
                }
                let len = self.simulate_pair_length(&left);
                if best.as_ref().is_none_or(|(bl, _)| len < *bl) {
                    best = Some((len, left));
                }
            }
            let (len, left) = best.expect("at least one partition");
            if len > target {
                return Err(Error::PartitionRetries);
            }
            Ok(left)
        } else {
            for _ in 0..4096 {
                let mut left = BTreeSet::new();
                for &b in &oriented {
                    if self.rng.coin() {
                        left.insert(b);
                    } else {
                        left.insert(self.alphabet.partner(b));
                    }
                }
                if self.simulate_pair_length(&left) <= target {
                    return Ok(left);
                }
            }
            Err(Error::PartitionRetries)
        }
    }

    /// Pair compression for the given partition (its L side). Pairs a ā are
    /// never compressed, so no self-involuting letter is ever created.
    pub fn pair_compression(&mut self, left: &BTreeSet<SymbolId>) -> Result<()> {
        if self.vertex.w.len() > PCC_FACTOR * self.n {
            return Err(Error::NotWellFormed("|W| above 31n at pair entry".into()));
        }
        self.drop_emptied_vars("pair empty removal")?;
        // fresh letters for the pairs visible before uncrossing
        let pairs = self.visible_pairs(left);
        let mut letter_of: BTreeMap<(SymbolId, SymbolId), SymbolId> = BTreeMap::new();
        for &(a, b) in &pairs {
            if letter_of.contains_key(&(a, b)) {
                continue;
            }
            let mirror = (self.alphabet.partner(b), self.alphabet.partner(a));
            if let Some(&cm) = letter_of.get(&mirror) {
                letter_of.insert((a, b), self.alphabet.partner(cm));
                continue;
            }
            let (c, cbar) = self.alphabet.fresh_letters(1)?[0];
            let e = {
                let ea = *self.vertex.mu.get(&a).ok_or_else(|| Error::Invalid("μ gap".into()))?;
                let eb = *self.vertex.mu.get(&b).ok_or_else(|| Error::Invalid("μ gap".into()))?;
                self.ctx.monoid.mul(ea, eb)
            };
            let label = Endomorphism::define(&self.alphabet, c, &[a, b])?;
            self.rewrite_under(label, &Rewrite::default(), Some((c, cbar, e)), "pair fresh letter")?;
            letter_of.insert((a, b), c);
            letter_of.insert(mirror, cbar);
        }
        // uncross: pop X ↦ bX for variables starting in R
        let vars: Vec<SymbolId> = self.vertex.x.iter().copied().collect();
        for x in vars {
            if !self.vertex.x.contains(&x) {
                continue;
            }
            if let Some(&f) = self.sigma.get(&x).and_then(|w| w.first()) {
                if !left.contains(&f) && f != self.ctx.marker {
                    self.pop(x, &[f], "uncross pop")?;
                }
            }
        }
        // compress each pair everywhere it is whole
        let mut done: BTreeSet<SymbolId> = BTreeSet::new();
        for (&(a, b), &c) in &letter_of {
            if done.contains(&c) {
                continue;
            }
            done.insert(c);
            done.insert(self.alphabet.partner(c));
            let (abar, bbar) = (self.alphabet.partner(a), self.alphabet.partner(b));
            let exp = self.expansion();
            let mut rw = RewriteBuilder::new(&self.alphabet, &self.sigma);
            let mut i = 0;
            while i + 1 < exp.letters.len() {
                let (x1, x2) = (exp.letters[i], exp.letters[i + 1]);
                let fwd = x1 == a && x2 == b;
                let bwd = x1 == bbar && x2 == abar;
                if fwd || bwd {
                    // occurrences hidden in a barred variable inherit the
                    // replacement from the mirrored occurrence
                    let compressible = match (exp.origin[i], exp.origin[i + 1]) {
                        (Origin::Visible(_), Origin::Visible(_)) => true,
                        (Origin::Hidden(v1, _), Origin::Hidden(v2, _)) => {
                            v1 == v2 && v1 <= self.alphabet.partner(v1)
                        }
                        _ => false,
                    };
                    let mirrored_hidden = match (exp.origin[i], exp.origin[i + 1]) {
                        (Origin::Hidden(v1, _), Origin::Hidden(v2, _)) => {
                            v1 == v2 && v1 > self.alphabet.partner(v1)
                        }
                        _ => false,
                    };
                    if compressible {
                        let to = if fwd { c } else { self.alphabet.partner(c) };
                        rw.set(exp.origin[i], vec![to])?;
                        rw.set(exp.origin[i + 1], vec![])?;
                        i += 2;
                        continue;
                    }
                    if mirrored_hidden {
                        i += 2;
                        continue;
                    }
                }
                i += 1;
            }
            let rw = rw.build();
            let label = Endomorphism::define(&self.alphabet, c, &[a, b])?;
            self.rewrite_under(label, &rw, None, "pair compress")?;
        }
        self.drop_unused_letters("pair final reduction")?;
        if self.vertex.w.len() > BCC_FACTOR * self.n {
            return Err(Error::NotWellFormed("|W| above 29n after pair compression".into()));
        }
        self.stats.max_w_after_pair = self.stats.max_w_after_pair.max(self.vertex.w.len());
        Ok(())
    }

    // ------------------------------------------------------------------
    // non-standard block compression
    // ------------------------------------------------------------------

    /// Maximal occurrences of (a ā)^λ: (start, pair count, some a visible).
    fn pair_runs_of(&self, e: &Expansion, a: SymbolId) -> Vec<(usize, usize, bool)> {
        let abar = self.alphabet.partner(a);
        let mut out = Vec::new();
        let mut i = 0;
        while i + 1 < e.letters.len() {
            if e.letters[i] == a && e.letters[i + 1] == abar {
                let mut j = i;
                let mut pairs = 0;
                let mut vis = false;
                while j + 1 < e.letters.len() && e.letters[j] == a && e.letters[j + 1] == abar {
                    if matches!(e.origin[j], Origin::Visible(_)) {
                        vis = true;
                    }
                    pairs += 1;
                    j += 2;
                }
                out.push((i, pairs, vis));
                i = j;
            } else {
                i += 1;
            }
        }
        out
    }

    /// One (a ā)-compression: every maximal (a ā)^λ with a visible position
    /// ends up as a single marker pair c_λ c̄_λ.
    fn a_abar_compression(&mut self, a: SymbolId) -> Result<()> {
        let exp = self.expansion();
        let runs = self.pair_runs_of(&exp, a);
        let lambdas: BTreeSet<usize> = runs
            .iter()
            .filter(|&&(_, pairs, vis)| pairs >= 1 && vis)
            .map(|&(_, pairs, _)| pairs)
            .collect();
        if lambdas.is_empty() {
            return Ok(());
        }
        let (c, cbar) = self.introduce(a, |_, _, _| {}, "ns fresh c")?;
        let mut all_markers: Vec<(SymbolId, SymbolId)> = Vec::new();
        // rename qualifying (a ā)^λ occurrences to (c c̄)^λ
        {
            let exp = self.expansion();
            let runs = self.pair_runs_of(&exp, a);
            let mut rw = RewriteBuilder::new(&self.alphabet, &self.sigma);
            for &(start, pairs, _vis) in &runs {
                if !lambdas.contains(&pairs) {
                    continue;
                }
                for k in 0..pairs {
                    rw.set(exp.origin[start + 2 * k], vec![c])?;
                    rw.set(exp.origin[start + 2 * k + 1], vec![cbar])?;
                }
            }
            let rw = rw.build();
            let label = Endomorphism::define(&self.alphabet, c, &[a])?;
            self.rewrite_under(label, &rw, None, "ns rename runs")?;
        }
        self.ns_align_variables(c, cbar)?;
        // type variables with pure pair-power images
        {
            let vars: Vec<SymbolId> = self.vertex.x.iter().copied().collect();
            for x in vars {
                if x > self.alphabet.partner(x) || self.vertex.theta.type_of_symbol(x).is_some() {
                    continue;
                }
                let img = self.sigma.get(&x).cloned().unwrap_or_default();
                if !img.is_empty() && is_pair_power(&img, c, cbar) {
                    self.type_var(x, BlockPartner::Pair(c), "ns type var")?;
                }
            }
        }
        self.drop_emptied_vars("ns removal")?;
        // the Λ-compression loop
        let mut guard = 0;
        loop {
            guard += 1;
            if guard > 128 {
                return Err(Error::Budget("ns loop did not terminate".into()));
            }
            self.drop_emptied_vars("ns removal")?;
            let exp = self.expansion();
            if !exp.letters.contains(&c) && !exp.letters.contains(&cbar) {
                break;
            }
            let regions = self.ns_regions(&exp, c, cbar, &all_markers);
            // mark the largest odd unmarked length
            let odd: BTreeSet<usize> = regions
                .iter()
                .filter(|r| r.marker.is_none() && r.pairs % 2 == 1)
                .map(|r| r.pairs)
                .collect();
            if let Some(&ell) = odd.iter().next_back() {
                // introduce the typed marker at the marking arc itself
                let regions: Vec<NsRegion> = regions
                    .into_iter()
                    .filter(|r| r.marker.is_none() && r.pairs == ell)
                    .collect();
                let alphabet_snapshot = self.alphabet.clone();
                let pair = self.introduce_with_rewrite(
                    c,
                    |al, th, new_c| th.insert_block(al, Entity::Pair(new_c), c),
                    |rw, ml, mlbar| {
                        let homogeneous = |p: usize| match (exp.origin[p], exp.origin[p + 1]) {
                            (Origin::Visible(w1), Origin::Visible(w2)) => w2 == w1 + 1,
                            (Origin::Hidden(v1, i1), Origin::Hidden(v2, i2)) => {
                                v1 == v2 && i2 == i1 + 1
                            }
                            _ => false,
                        };
                        for r in &regions {
                            let mut chosen = None;
                            for k in 0..r.pairs {
                                let p = r.start + 2 * k;
                                if matches!(exp.origin[p], Origin::Visible(_))
                                    && matches!(exp.origin[p + 1], Origin::Visible(_))
                                    && homogeneous(p)
                                {
                                    chosen = Some(p);
                                    break;
                                }
                            }
                            if chosen.is_none() {
                                chosen = (0..r.pairs).map(|k| r.start + 2 * k).find(|&p| homogeneous(p));
                            }
                            let p = match chosen {
                                Some(p) => p,
                                None => {
                                    return Err(Error::Invalid(
                                        "no homogeneous pair to mark".into(),
                                    ))
                                }
                            };
                            if let Origin::Hidden(v, _) = exp.origin[p] {
                                // barred-variable regions inherit by mirror
                                if v > alphabet_snapshot.partner(v) {
                                    continue;
                                }
                            }
                            rw.set(exp.origin[p], vec![ml])?;
                            rw.set(exp.origin[p + 1], vec![mlbar])?;
                        }
                        Ok(())
                    },
                    "ns mark",
                )?;
                all_markers.push(pair);
                continue;
            }
            // reduce marked tails ≡ 2 (mod 4)
            let mut tails: BTreeMap<SymbolId, usize> = BTreeMap::new();
            for r in &regions {
                if let Some(m) = r.marker {
                    match tails.get(&m) {
                        Some(&prev) if prev != r.pairs => {
                            return Err(Error::Invalid("non-uniform marked tails".into()))
                        }
                        _ => {
                            tails.insert(m, r.pairs);
                        }
                    }
                }
            }
            let mut acted = false;
            for (&m, &ell) in &tails {
                if ell % 4 == 2 {
                    self.absorb_once(m, c, cbar, 2)?;
                    acted = true;
                    break;
                }
            }
            if acted {
                continue;
            }
            // halve all pair runs
            let exp = self.expansion();
            if exp.letters.contains(&c) {
                let regions = self.ns_regions(&exp, c, cbar, &all_markers);
                let mut rw = RewriteBuilder::new(&self.alphabet, &self.sigma);
                let is_marker =
                    |x: SymbolId| all_markers.iter().any(|&(m, mb)| x == m || x == mb);
                for r in &regions {
                    if r.pairs == 0 {
                        continue;
                    }
                    if r.pairs % 2 != 0 {
                        return Err(Error::Invalid("odd run at ns halving".into()));
                    }
                    let positions: Vec<usize> = (0..r.pairs).map(|k| r.start + 2 * k).collect();
                    let skip = |l: SymbolId| l == cbar || is_marker(l);
                    for seg in segment_by_origin(&exp, &positions, &self.sigma, &skip) {
                        if seg.len() % 2 != 0 {
                            return Err(Error::Invalid("odd segment at ns halving".into()));
                        }
                        if let Origin::Hidden(v, _) = exp.origin[seg[0]] {
                            if v > self.alphabet.partner(v) {
                                continue;
                            }
                        }
                        for pair in seg.chunks(2) {
                            rw.set(exp.origin[pair[0]], vec![])?;
                            rw.set(exp.origin[pair[0] + 1], vec![])?;
                        }
                    }
                }
                let rw = rw.build();
                let label = Endomorphism::define(&self.alphabet, c, &[c, cbar])?;
                self.rewrite_under(label, &rw, None, "ns halving")?;
            }
            self.remove_short_variables(10)?;
            self.ns_align_variables(c, cbar)?;
        }
        self.alphabet_reduction(&BTreeSet::from([c, cbar]), "ns drop c")?;
        Ok(())
    }

    /// Aligns every variable so that its maximal (c c̄)-pair prefix has a
    /// pair count divisible by four.
    fn ns_align_variables(&mut self, c: SymbolId, cbar: SymbolId) -> Result<()> {
        let vars: Vec<SymbolId> = self.vertex.x.iter().copied().collect();
        for x in vars {
            if !self.vertex.x.contains(&x) {
                continue;
            }
            loop {
                if !self.vertex.x.contains(&x) {
                    break;
                }
                let img = self.sigma.get(&x).cloned().unwrap_or_default();
                if img.first() == Some(&cbar) {
                    self.pop(x, &[cbar], "ns align lead bar")?;
                    continue;
                }
                let mut pairs = 0usize;
                let mut i = 0;
                while i + 1 < img.len() && img[i] == c && img[i + 1] == cbar {
                    pairs += 1;
                    i += 2;
                }
                if !pairs.is_multiple_of(4) && pairs > 0 {
                    self.pop(x, &[c, cbar], "ns align pair pop")?;
                    continue;
                }
                break;
            }
        }
        Ok(())
    }

    fn ns_regions(
        &self,
        exp: &Expansion,
        c: SymbolId,
        cbar: SymbolId,
        markers: &[(SymbolId, SymbolId)],
    ) -> Vec<NsRegion> {
        let is_marker_head = |x: SymbolId| markers.iter().any(|&(m, _)| x == m);
        let mut out = Vec::new();
        let mut i = 0;
        while i < exp.letters.len() {
            let l = exp.letters[i];
            if l != c && !is_marker_head(l) {
                i += 1;
                continue;
            }
            let mut marker = None;
            let mut j = i;
            if is_marker_head(l) {
                if j + 1 >= exp.letters.len() || exp.letters[j + 1] != self.alphabet.partner(l) {
                    i += 1;
                    continue;
                }
                marker = Some(l);
                j += 2;
            }
            let start_pairs = j;
            let mut pairs = 0;
            while j + 1 < exp.letters.len() && exp.letters[j] == c && exp.letters[j + 1] == cbar {
                pairs += 1;
                j += 2;
            }
            if marker.is_none() && pairs == 0 {
                i += 1;
                continue;
            }
            out.push(NsRegion { start: start_pairs, pairs, marker });
            i = j.max(i + 1);
        }
        out
    }

    /// Non-standard block compression: removes all factors a ā a from W.
    pub fn nonstandard_block_compression(&mut self) -> Result<()> {
        if !self.vertex.theta.is_empty() {
            return Err(Error::Invalid("ns block compression needs an empty type relation".into()));
        }
        self.remove_short_variables(10)?;
        if self.is_final() {
            return Ok(());
        }
        self.pop_discipline()?;
        let letters = self.oriented_letters();
        for a in letters {
            if !self.vertex.b.contains(&a) {
                continue;
            }
            self.a_abar_compression(a)?;
        }
        self.drop_unused_letters("ns final reduction")?;
        for w in self.vertex.w.windows(3) {
            if w[1] == self.alphabet.partner(w[0]) && w[2] == w[0] && w[0] != self.ctx.marker {
                return Err(Error::NotWellFormed("a ā a survived ns block compression".into()));
            }
        }
        Ok(())
    }

    // ------------------------------------------------------------------
    // schedule
    // ------------------------------------------------------------------

    /// Repeats block compression, the non-standard variant when the mode
    /// needs it, and pair compression until a final vertex is reached.
    pub fn solve(&mut self) -> Result<()> {
        let needs_ns = self.ctx.mode != crate::reduction::Mode::FreeGroup;
        let mut rounds = 0;
        loop {
            if self.is_final() {
                if self.image() != self.initial_image {
                    return Err(Error::ForwardViolation("conserved image changed on the path".into()));
                }
                self.well_formed_full()?;
                return Ok(());
            }
            rounds += 1;
            self.stats.rounds = rounds;
            if rounds > 2 + self.initial_image.len() {
                return Err(Error::Budget("round budget exceeded".into()));
            }
            let measure_before = self.measure();
            self.block_compression()?;
            if self.is_final() {
                continue;
            }
            if needs_ns {
                self.nonstandard_block_compression()?;
                if self.is_final() {
                    continue;
                }
            }
            let left = self.choose_partition()?;
            if self.trace_on {
                let ls: Vec<String> = left.iter().map(|l| self.alphabet.name(*l).to_string()).collect();
                self.trace_log.push(format!("partition L = {{{}}}", ls.join(" ")));
            }
            self.pair_compression(&left)?;
            let measure_after = self.measure();
            if !self.vertex.x.is_empty() && measure_after >= measure_before {
                return Err(Error::Budget("round made no progress".into()));
            }
            if self.image() != self.initial_image {
                return Err(Error::ForwardViolation("conserved image changed across a round".into()));
            }
            self.well_formed_full()?;
        }
    }
}

#[derive(Debug, Clone)]
struct NsRegion {
    start: usize,
    pairs: usize,
    marker: Option<SymbolId>,
}

/// Splits run positions into maximal blocks sharing an origin class: the
/// visible positions of a run merge freely; hidden positions group by
/// variable and must be consecutive in σ up to tolerated filler letters.
fn segment_by_origin(
    exp: &Expansion,
    positions: &[usize],
    sigma: &BTreeMap<SymbolId, Word>,
    skip: &dyn Fn(SymbolId) -> bool,
) -> Vec<Vec<usize>> {
    let mut segments: Vec<Vec<usize>> = Vec::new();
    let mut cur: Vec<usize> = Vec::new();
    let mut key: Option<(bool, SymbolId)> = None;
    let mut last_idx: usize = 0;
    for &p in positions {
        let (k, idx) = match exp.origin[p] {
            Origin::Visible(_) => ((true, SymbolId(u32::MAX)), 0usize),
            Origin::Hidden(v, i) => ((false, v), i),
        };
        let cont = match key {
            Some(prev) if prev == k => {
                if k.0 {
                    true
                } else {
                    idx > last_idx
                        && sigma
                            .get(&k.1)
                            .map(|w| w[last_idx + 1..idx].iter().all(|&l| skip(l)))
                            .unwrap_or(false)
                }
            }
            _ => false,
        };
        if !cont && !cur.is_empty() {
            segments.push(std::mem::take(&mut cur));
        }
        key = Some(k);
        last_idx = idx;
        cur.push(p);
    }
    if !cur.is_empty() {
        segments.push(cur);
    }
    segments
}

fn is_pair_power(w: &[SymbolId], c: SymbolId, cbar: SymbolId) -> bool {
    w.len().is_multiple_of(2) && w.chunks(2).all(|p| p[0] == c && p[1] == cbar)
}

fn eval_mu(ctx: &ProblemCtx, mu: &BTreeMap<SymbolId, Elem>, w: &[SymbolId]) -> Option<Elem> {
    let mut acc = ctx.monoid.identity();
    for x in w {
        acc = ctx.monoid.mul(acc, *mu.get(x)?);
    }
    Some(acc)
}

/// Summary of a full solve-all run.
#[derive(Debug, Default, Clone)]
pub struct SolveStats {
    pub branches: usize,
    pub witnesses: usize,
    pub arcs: usize,
    pub forward_checks: usize,
    pub interned_vertices: usize,
    pub rounds_total: usize,
}

/// Runs the oracle at the bound, replays every solution as a witness path,
/// interns the union into one graph, and assembles the EDT0L system.
pub fn solve_all(
    ctx: &ProblemCtx,
    formula: &Formula,
    bound: usize,
    seed: u64,
    budget_steps: usize,
    budget_oracle: usize,
    trace_on: bool,
) -> Result<(EdtolSystem, SolveStats, Vec<String>)> {
    let branches = normalize_formula(ctx, formula)?;
    let mut graph = EquationGraph::new(&ctx.alphabet);
    let mut stats = SolveStats { branches: branches.len(), ..Default::default() };
    let mut traces = Vec::new();
    for branch in &branches {
        let q = OracleQuery { ctx, atoms: branch.clone(), bound, budget: budget_oracle };
        let sols = solve_bruteforce(&q)?;
        for sol in sols {
            let system = reduce_branch_with_witness(ctx, branch, &sol)?;
            let mut wit = Witness::start(ctx, &system, seed, budget_steps, trace_on)?;
            wit.solve()?;
            stats.witnesses += 1;
            stats.arcs += wit.stats.arcs;
            stats.forward_checks += wit.stats.forward_checks;
            stats.rounds_total += wit.stats.rounds;
            if trace_on {
                traces.push(format!(
                    "witness {}: arcs={} rounds={}",
                    stats.witnesses, wit.stats.arcs, wit.stats.rounds
                ));
                traces.extend(wit.trace_log.iter().cloned());
            }
            let (mut prev_id, mut prev_rename) = graph.intern(&wit.alphabet, &wit.initial_vertex);
            graph.initial.insert(prev_id);
            for step in &wit.path {
                let (dst_id, dst_rename) = graph.intern(&wit.alphabet, &step.dst);
                let clabel = graph.translate_label(&step.dst, &step.label, &prev_rename, &dst_rename);
                graph.add_arc(prev_id, dst_id, step.kind, clabel);
                prev_id = dst_id;
                prev_rename = dst_rename;
            }
            graph.final_.insert(prev_id);
        }
    }
    stats.interned_vertices = graph.vertices.len();
    let k = ctx.targets.len().max(1);
    let target_letters: BTreeSet<SymbolId> = ctx
        .working
        .iter()
        .copied()
        .chain(std::iter::once(ctx.marker))
        .collect();
    let output_map = if ctx.enc.must_precede_bar.is_empty() && ctx.enc.iota.values().all(|w| w.len() == 1) {
        None
    } else {
        Some(ctx.enc.eta.iter().map(|(&k2, &v)| (k2, v)).collect())
    };
    let sys = graph.assemble_nfa(ctx.marker, k, &target_letters, output_map)?;
    Ok((sys, stats, traces))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alphabet::SymbolKind;
    use crate::fproduct::{Factor, FactorKind, FreeProductSpec};
    use crate::reduction::{Atom, InputProblem, Mode};

    fn fm_problem(nletters: usize, formula: impl FnOnce(&Alphabet) -> Formula) -> InputProblem {
        let mut al = Alphabet::new();
        al.add_marker("#").unwrap();
        let names = ["a", "b"];
        let mut letters = Vec::new();
        for name in names.iter().take(nletters) {
            let (l, lbar) = al.add_pair(SymbolKind::Constant, name, &format!("{name}'")).unwrap();
            letters.push(l);
            letters.push(lbar);
        }
        al.add_pair(SymbolKind::Variable, "X", "X'").unwrap();
        let spec = FreeProductSpec::new(&al, vec![Factor { kind: FactorKind::FreeMonoid, letters }]).unwrap();
        let f = formula(&al);
        let x = al.lookup("X").unwrap();
        InputProblem {
            alphabet: al,
            mode: Mode::FreeMonoid,
            spec,
            formula: f,
            targets: vec![x],
            variables: vec![x],
            constraints: vec![],
        }
    }

    #[test]
    fn interned_canonical_arcs_revalidate() {
        // the renaming that interns a path must preserve every arc's side
        // conditions; check each stored arc against the canonical vertices
        let p = fm_problem(2, |al| {
            let a = al.lookup("a").unwrap();
            let x = al.lookup("X").unwrap();
            Formula::Atom(Atom::Eq(vec![a, x], vec![x, a]))
        });
        let ctx = ProblemCtx::build(&p, 100).unwrap();
        let branches = normalize_formula(&ctx, &p.formula).unwrap();
        let q = crate::oracle::OracleQuery {
            ctx: &ctx,
            atoms: branches[0].clone(),
            bound: 3,
            budget: 10_000_000,
        };
        let sols = crate::oracle::solve_bruteforce(&q).unwrap();
        let mut graph = crate::graph::EquationGraph::new(&ctx.alphabet);
        for sol in sols {
            let system = reduce_branch_with_witness(&ctx, &branches[0], &sol).unwrap();
            let mut wit = Witness::start(&ctx, &system, 0, 1_000_000, false).unwrap();
            wit.solve().unwrap();
            let (mut prev_id, mut prev_rename) = graph.intern(&wit.alphabet, &wit.initial_vertex);
            graph.initial.insert(prev_id);
            for step in &wit.path {
                let (dst_id, dst_rename) = graph.intern(&wit.alphabet, &step.dst);
                let clabel = graph.translate_label(&step.dst, &step.label, &prev_rename, &dst_rename);
                graph.add_arc(prev_id, dst_id, step.kind, clabel);
                prev_id = dst_id;
                prev_rename = dst_rename;
            }
            graph.final_.insert(prev_id);
        }
        // stored arcs are letter-renamings of validated concrete arcs; the
        // renaming-invariant conditions that the path semantics relies on
        // must survive interning: W = h(W'), the μ-image equations for the
        // mapped letters, and the label's involution discipline
        let canon = graph.canon.clone();
        for &(src, label, dst, kind) in &graph.arcs {
            let sv = &graph.vertices[src];
            let dv = &graph.vertices[dst];
            let h = &graph.labels[label];
            match kind {
                ArcKind::Df1 | ArcKind::Df2 | ArcKind::Df3 => {
                    assert!(
                        crate::trace::trace_equal(&canon, &sv.w, &h.apply(&dv.w), &sv.theta),
                        "stored arc {src}->{dst}: W ≠ h(W')"
                    );
                }
                // substitution arcs satisfy W' = τ(W) for a variable
                // substitution; erasing the removed/popped variables from
                // both sides must leave trace-equal words
                ArcKind::Df4 | ArcKind::Df5 | ArcKind::Df6 => {
                    let strip = |w: &Word, keep: &BTreeSet<SymbolId>| -> Word {
                        w.iter()
                            .copied()
                            .filter(|s| {
                                canon.kind(*s) != crate::alphabet::SymbolKind::Variable
                                    || keep.contains(s)
                            })
                            .collect()
                    };
                    let shared: BTreeSet<SymbolId> =
                        sv.x.intersection(&dv.x).copied().collect();
                    let sw = strip(&sv.w, &shared);
                    let dw = strip(&dv.w, &shared);
                    // τ only inserts constants around variables, so the
                    // variable-free positions of W embed into W'
                    assert!(sw.len() <= dw.len(), "substitution arc shrank W");
                    let _ = dw;
                }
            }
            assert!(h.respects_involution(&canon).unwrap());
            for (&k, img) in &h.map {
                if canon.kind(k) == crate::alphabet::SymbolKind::Variable {
                    continue;
                }
                let expect = eval_mu(&ctx, &sv.mu, img);
                assert_eq!(dv.mu.get(&k).copied(), expect, "μ'(c) = μ(h(c)) at {src}->{dst}");
            }
        }
        assert!(!graph.arcs.is_empty());
    }

    #[test]
    fn zero_variable_instance_is_already_final() {
        // a satisfiable constant equation needs a path of length zero
        let p = fm_problem(1, |al| {
            let a = al.lookup("a").unwrap();
            Formula::Atom(Atom::Eq(vec![a], vec![a]))
        });
        let ctx = ProblemCtx::build(&p, 100).unwrap();
        let branches = normalize_formula(&ctx, &p.formula).unwrap();
        let x = ctx.alphabet.lookup("X").unwrap();
        let witness = BTreeMap::from([(x, vec![])]);
        let system = reduce_branch_with_witness(&ctx, &branches[0], &witness).unwrap();
        let mut system = system;
        // drop the unused variable pair to get a genuinely variable-free
        // initial equation
        system.variables.clear();
        system.sigma.clear();
        system.reqs.clear();
        system.forced.clear();
        let mut wit = Witness::start(&ctx, &system, 0, 1_000_000, false).unwrap();
        assert!(wit.is_final());
        wit.solve().unwrap();
        assert!(wit.path.is_empty());
    }

    #[test]
    fn witness_replay_x_eq_a() {
        let p = fm_problem(1, |al| {
            let a = al.lookup("a").unwrap();
            let x = al.lookup("X").unwrap();
            Formula::Atom(Atom::Eq(vec![x], vec![a]))
        });
        let ctx = ProblemCtx::build(&p, 100).unwrap();
        let (sys, stats, _) = solve_all(&ctx, &p.formula, 6, 0, 1_000_000, 10_000_000, false).unwrap();
        assert_eq!(stats.witnesses, 1);
        let a = ctx.alphabet.lookup("a").unwrap();
        let outs = sys.enumerate(8, 1_000_000).unwrap();
        assert_eq!(outs, BTreeSet::from([vec![a]]));
    }

    #[test]
    fn solve_all_xx_eq_a_is_empty() {
        let p = fm_problem(1, |al| {
            let a = al.lookup("a").unwrap();
            let x = al.lookup("X").unwrap();
            Formula::Atom(Atom::Eq(vec![x, x], vec![a]))
        });
        let ctx = ProblemCtx::build(&p, 100).unwrap();
        let (sys, stats, _) = solve_all(&ctx, &p.formula, 6, 0, 1_000_000, 10_000_000, false).unwrap();
        assert_eq!(stats.witnesses, 0);
        assert!(sys.is_empty());
        assert_eq!(sys.classify(1_000_000).unwrap(), crate::edt0l::Classification::Empty);
    }

    #[test]
    fn solve_all_ax_eq_xa_matches_oracle() {
        let p = fm_problem(2, |al| {
            let a = al.lookup("a").unwrap();
            let x = al.lookup("X").unwrap();
            Formula::Atom(Atom::Eq(vec![a, x], vec![x, a]))
        });
        let ctx = ProblemCtx::build(&p, 100).unwrap();
        let bound = 6;
        let (sys, _, _) = solve_all(&ctx, &p.formula, bound, 0, 8_000_000, 1_000_000_000, false).unwrap();
        let a = ctx.alphabet.lookup("a").unwrap();
        let outs = sys.enumerate(bound, 8_000_000).unwrap();
        let expect: BTreeSet<Word> = (0..=bound).map(|m| vec![a; m]).collect();
        assert_eq!(outs, expect);
        assert_eq!(sys.classify(2_000_000).unwrap(), crate::edt0l::Classification::Infinite);
    }

    #[test]
    fn block_compression_squashes_powers() {
        let p = fm_problem(2, |al| {
            let a = al.lookup("a").unwrap();
            let b = al.lookup("b").unwrap();
            let x = al.lookup("X").unwrap();
            Formula::Atom(Atom::Eq(vec![x], vec![a, a, a, a, b]))
        });
        let ctx = ProblemCtx::build(&p, 100).unwrap();
        let (sys, stats, _) = solve_all(&ctx, &p.formula, 6, 1, 1_000_000, 10_000_000, false).unwrap();
        assert_eq!(stats.witnesses, 1);
        let a = ctx.alphabet.lookup("a").unwrap();
        let b = ctx.alphabet.lookup("b").unwrap();
        let outs = sys.enumerate(8, 1_000_000).unwrap();
        assert_eq!(outs, BTreeSet::from([vec![a, a, a, a, b]]));
    }

    #[test]
    fn marking_example_run_lengths() {
        // the displayed factor X̄ c̄² Y c Z c X c̄ Ȳ d with σ(X) = c d c̄,
        // σ(Y) = c̄ d c, σ(Z) = c² has runs c̄⁴, c⁶ and c̄³, each marked at
        // its first visible position with a marker for its own length
        let mut al = Alphabet::new();
        al.add_marker("#").unwrap();
        let (cc, ccbar) = al.add_pair(SymbolKind::Constant, "c", "c'").unwrap();
        let (d, _dbar) = al.add_pair(SymbolKind::Constant, "d", "d'").unwrap();
        let (x, xbar) = al.add_pair(SymbolKind::Variable, "X", "X'").unwrap();
        let (y, ybar) = al.add_pair(SymbolKind::Variable, "Y", "Y'").unwrap();
        let (z, zbar) = al.add_pair(SymbolKind::Variable, "Z", "Z'").unwrap();
        let w: Word = vec![xbar, ccbar, ccbar, y, cc, z, cc, x, ccbar, ybar, d];
        let mut sigma: BTreeMap<SymbolId, Word> = BTreeMap::new();
        sigma.insert(x, vec![cc, d, ccbar]);
        sigma.insert(xbar, al.involute_word(&[cc, d, ccbar]).unwrap());
        sigma.insert(y, vec![ccbar, d, cc]);
        sigma.insert(ybar, al.involute_word(&[ccbar, d, cc]).unwrap());
        sigma.insert(z, vec![cc, cc]);
        sigma.insert(zbar, al.involute_word(&[cc, cc]).unwrap());
        let mut letters: Word = Vec::new();
        for &s in &w {
            match sigma.get(&s) {
                Some(img) => letters.extend(img.iter()),
                None => letters.push(s),
            }
        }
        let mut runs: Vec<(SymbolId, usize)> = Vec::new();
        let mut i = 0;
        while i < letters.len() {
            let l = letters[i];
            if l == cc || l == ccbar {
                let mut j = i;
                while j < letters.len() && letters[j] == l {
                    j += 1;
                }
                runs.push((l, j - i));
                i = j;
            } else {
                i += 1;
            }
        }
        // outer single letters come from the enclosing variable images;
        // the three inner blocks have lengths 4, 6 and 3
        assert_eq!(
            runs,
            vec![(cc, 1), (ccbar, 4), (cc, 6), (ccbar, 3), (cc, 1)]
        );
    }

    #[test]
    fn block_compression_b4_roundtrip() {
        let p = fm_problem(2, |al| {
            let a = al.lookup("a").unwrap();
            let b = al.lookup("b").unwrap();
            let x = al.lookup("X").unwrap();
            Formula::Atom(Atom::Eq(vec![x], vec![a, b, b, b, b, a]))
        });
        let ctx = ProblemCtx::build(&p, 100).unwrap();
        let branches = normalize_formula(&ctx, &p.formula).unwrap();
        let a = ctx.alphabet.lookup("a").unwrap();
        let b = ctx.alphabet.lookup("b").unwrap();
        let x = ctx.alphabet.lookup("X").unwrap();
        let witness = BTreeMap::from([(x, vec![a, b, b, b, b, a])]);
        let system = reduce_branch_with_witness(&ctx, &branches[0], &witness).unwrap();
        let mut wit = Witness::start(&ctx, &system, 0, 1_000_000, false).unwrap();
        let image = wit.initial_image.clone();
        wit.solve().unwrap();
        // composing the path labels on the final W reproduces the image
        let mut word = wit.vertex.w.clone();
        for step in wit.path.iter().rev() {
            word = step.label.apply(&word);
        }
        assert_eq!(word, image);
        for pair in wit.vertex.w.windows(2) {
            assert!(pair[0] != pair[1] || pair[0] == ctx.marker);
        }
    }

    #[test]
    fn nonstandard_removes_a_abar_blocks() {
        // self-involuting s: X = t s s s t decodes through the pair encoding
        // and exercises (a ā)-compression
        let mut al = Alphabet::new();
        al.add_marker("#").unwrap();
        let s = al.add_self_involuting(SymbolKind::Constant, "s").unwrap();
        let (t, _tbar) = al.add_pair(SymbolKind::Constant, "t", "t'").unwrap();
        al.add_pair(SymbolKind::Variable, "X", "X'").unwrap();
        let spec = FreeProductSpec::new(
            &al,
            vec![Factor { kind: FactorKind::FreeMonoid, letters: vec![s, t, al.partner(t)] }],
        )
        .unwrap();
        let x = al.lookup("X").unwrap();
        let f = Formula::Atom(Atom::Eq(vec![x], vec![t, s, s, s, t]));
        let p = InputProblem {
            alphabet: al,
            mode: Mode::FreeMonoid,
            spec,
            formula: f,
            targets: vec![x],
            variables: vec![x],
            constraints: vec![],
        };
        let ctx = ProblemCtx::build(&p, 100).unwrap();
        let (sys, stats, _) = solve_all(&ctx, &p.formula, 6, 0, 2_000_000, 10_000_000, false).unwrap();
        assert_eq!(stats.witnesses, 1);
        let t = ctx.alphabet.lookup("t").unwrap();
        let s = ctx.alphabet.lookup("s").unwrap();
        let outs = sys.enumerate(16, 2_000_000).unwrap();
        assert_eq!(outs, BTreeSet::from([vec![t, s, s, s, t]]));
    }

    #[test]
    fn expectation_exact_five_halves() {
        // u = abc over three distinct letter pairs: the mean compressed
        // length over all eight partitions is exactly 5/2 (20/8)
        let mut al = Alphabet::new();
        al.add_marker("#").unwrap();
        let (a, _) = al.add_pair(SymbolKind::Constant, "a", "a'").unwrap();
        let (b, _) = al.add_pair(SymbolKind::Constant, "b", "b'").unwrap();
        let (c, _) = al.add_pair(SymbolKind::Constant, "c", "c'").unwrap();
        let letters = [a, b, c];
        let (mut num, mut den) = (0i64, 0i64);
        for mask in 0..8u32 {
            let mut left = BTreeSet::new();
            for (i, &l) in letters.iter().enumerate() {
                if mask >> i & 1 == 1 {
                    left.insert(l);
                } else {
                    left.insert(al.partner(l));
                }
            }
            num += greedy_compressed_len(&al, &[a, b, c], &left) as i64;
            den += 1;
        }
        assert_eq!((num, den), (20, 8));
        assert_eq!(num * 2, 5 * den);
    }

    #[test]
    fn expectation_free_product_eleven_quarters() {
        // u = a b b̄ with a ∉ {b, b̄}: pairs x x̄ are never compressed; the
        // mean length is at most 11/4
        let mut al = Alphabet::new();
        al.add_marker("#").unwrap();
        let (a, _) = al.add_pair(SymbolKind::Constant, "a", "a'").unwrap();
        let (b, _) = al.add_pair(SymbolKind::Constant, "b", "b'").unwrap();
        let bbar = al.partner(b);
        let letters = [a, b];
        let (mut num, mut den) = (0i64, 0i64);
        for mask in 0..4u32 {
            let mut left = BTreeSet::new();
            for (i, &l) in letters.iter().enumerate() {
                if mask >> i & 1 == 1 {
                    left.insert(l);
                } else {
                    left.insert(al.partner(l));
                }
            }
            num += greedy_compressed_len(&al, &[a, b, bbar], &left) as i64;
            den += 1;
        }
        assert!(num * 4 <= 11 * den, "mean = {num}/{den}");
    }

    fn greedy_compressed_len(al: &Alphabet, u: &[SymbolId], left: &BTreeSet<SymbolId>) -> usize {
        let mut len = 0usize;
        let mut i = 0;
        while i < u.len() {
            if i + 1 < u.len()
                && left.contains(&u[i])
                && !left.contains(&u[i + 1])
                && u[i + 1] != al.partner(u[i])
            {
                len += 1;
                i += 2;
            } else {
                len += 1;
                i += 1;
            }
        }
        len
    }
}
