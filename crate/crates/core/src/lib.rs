//! Word equations with rational constraints over free groups, free monoids
//! with involution, and free products of such, solved into EDT0L systems.
//!
//! The pipeline: an input problem is normalized into conjunctive branches,
//! reduced to word equations over a free monoid with involution, assembled
//! into a single palindromic equation `W_init`, and then driven through a
//! graph of extended equations by recompression (block compression, pair
//! compression, and the non-standard block compression needed when reduced
//! words may contain factors `a ā`). Every solution found by the brute-force
//! oracle yields a forward-valid path; the union of those paths, pruned to
//! useful vertices, is a finite automaton whose transitions are labeled by
//! endomorphisms. The language `{φ(#)}` of that automaton is exactly the set
//! of solution tuples, an EDT0L language.

pub mod alphabet;
pub mod cli;
pub mod edt0l;
pub mod fproduct;
pub mod graph;
pub mod monoid;
pub mod nfa;
pub mod oracle;
pub mod recompress;
pub mod reduction;
pub mod trace;

pub use alphabet::{Alphabet, Symbol, SymbolId, SymbolKind, Word};
pub use edt0l::{EdtolSystem, EndoNfa, Endomorphism};
pub use monoid::{ConstraintMorphism, Elem, Monoid};

/// Library-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("unknown symbol id {0}")]
    UnknownSymbol(u32),
    #[error("alphabet budget exceeded: need {need} fresh symbols, {avail} available (kappa too small)")]
    AlphabetBudget { need: usize, avail: usize },
    #[error("unmapped symbol `{0}` in morphism")]
    UnmappedSymbol(String),
    #[error("self-involuting letter `{0}` not allowed here")]
    SelfInvoluting(String),
    #[error("constraint state space too large")]
    MonoidTooLarge,
    #[error("monoid law violated: {0}")]
    MonoidLaw(String),
    #[error("invalid type relation: {0}")]
    TypeRelation(String),
    #[error("arc rejected ({kind}): {clause}")]
    ArcRejected { kind: &'static str, clause: String },
    #[error("vertex not well-formed: {0}")]
    NotWellFormed(String),
    #[error("forward property violated at arc: {0}")]
    ForwardViolation(String),
    #[error("negated constraint over a one-element monoid")]
    NegationOverTrivialMonoid,
    #[error("ill-formed system: {0}")]
    IllFormedSystem(String),
    #[error("budget exceeded: {0}")]
    Budget(String),
    #[error("enumeration budget exceeded")]
    EnumerationBudget,
    #[error("partition retry cap exhausted")]
    PartitionRetries,
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Deterministic xorshift RNG used for partition sampling. Seeded per run so
/// that a fixed seed yields byte-identical outputs.
#[derive(Debug, Clone)]
pub struct Rng(u64);

impl Rng {
    pub fn new(seed: u64) -> Self {
        // avoid the all-zero state
        Rng(seed.wrapping_add(0x9e37_79b9_7f4a_7c15))
    }

    pub fn next_u64(&mut self) -> u64 {
        let mut x = self.0;
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
        self.0 = x;
        x
    }

    pub fn coin(&mut self) -> bool {
        self.next_u64() & 1 == 1
    }
}
