//! Boolean expressions over the nine WVF symbols `Symbol_0..Symbol_8`.
//!
//! Grammar, loosest binding first:
//!
//! ```text
//! or    := and ('|' and)*
//! and   := unary ('&' unary)*
//! unary := '~' unary | atom
//! atom  := 'Symbol_' digits | '(' or ')'
//! ```

mod parser;
mod print;

pub use parser::{parse, tokenize, SyntaxError, SyntaxErrorKind, Token};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::gridworld::{Attribute, ObjectSet, ObjectSpec};

pub const SYMBOL_COUNT: u8 = 9;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum BoolExpr {
    Var(u8),
    Not(Box<BoolExpr>),
    And(Box<BoolExpr>, Box<BoolExpr>),
    Or(Box<BoolExpr>, Box<BoolExpr>),
}

impl BoolExpr {
    pub fn var(i: u8) -> Self {
        assert!(i < SYMBOL_COUNT, "symbol index {i} out of range");
        BoolExpr::Var(i)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(e: BoolExpr) -> Self {
        BoolExpr::Not(Box::new(e))
    }

    pub fn and(l: BoolExpr, r: BoolExpr) -> Self {
        BoolExpr::And(Box::new(l), Box::new(r))
    }

    pub fn or(l: BoolExpr, r: BoolExpr) -> Self {
        BoolExpr::Or(Box::new(l), Box::new(r))
    }

    pub fn depth(&self) -> usize {
        match self {
            BoolExpr::Var(_) => 1,
            BoolExpr::Not(e) => 1 + e.depth(),
            BoolExpr::And(l, r) | BoolExpr::Or(l, r) => 1 + l.depth().max(r.depth()),
        }
    }

    /// Symbols referenced anywhere in the expression.
    pub fn symbols(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.visit_vars(&mut |i| out.push(i));
        out.sort_unstable();
        out.dedup();
        out
    }

    fn visit_vars(&self, f: &mut impl FnMut(u8)) {
        match self {
            BoolExpr::Var(i) => f(*i),
            BoolExpr::Not(e) => e.visit_vars(f),
            BoolExpr::And(l, r) | BoolExpr::Or(l, r) => {
                l.visit_vars(f);
                r.visit_vars(f);
            }
        }
    }

    /// Truth value with each symbol's value supplied by `var`.
    pub fn eval(&self, var: &impl Fn(u8) -> bool) -> bool {
        match self {
            BoolExpr::Var(i) => var(*i),
            BoolExpr::Not(e) => !e.eval(var),
            BoolExpr::And(l, r) => l.eval(var) && r.eval(var),
            BoolExpr::Or(l, r) => l.eval(var) || r.eval(var),
        }
    }
}

/// Token count of the canonical rendering.
pub fn expr_length(expr: &BoolExpr) -> usize {
    tokenize(&expr.to_string())
        .expect("canonical rendering always tokenizes")
        .len()
}

/// Bijection between symbol indices and basis attributes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolMap {
    to_attribute: [Attribute; 9],
}

impl SymbolMap {
    /// Symbol `i` names attribute `i` (colors first, then shapes).
    pub fn identity() -> Self {
        Self {
            to_attribute: std::array::from_fn(Attribute::from_index),
        }
    }

    /// Random assignment of identifiers to attributes, fixed by `seed`.
    pub fn shuffled(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut attrs: Vec<Attribute> = Attribute::all().collect();
        attrs.shuffle(&mut rng);
        Self {
            to_attribute: std::array::from_fn(|i| attrs[i]),
        }
    }

    pub fn from_attributes(attrs: [Attribute; 9]) -> Option<Self> {
        let mut seen = [false; 9];
        for a in attrs {
            if std::mem::replace(&mut seen[a.index()], true) {
                return None;
            }
        }
        Some(Self {
            to_attribute: attrs,
        })
    }

    pub fn attribute(&self, symbol: u8) -> Attribute {
        self.to_attribute[symbol as usize]
    }

    pub fn symbol(&self, attribute: Attribute) -> u8 {
        self.to_attribute
            .iter()
            .position(|a| *a == attribute)
            .expect("map is a bijection") as u8
    }
}

/// Objects satisfying `expr`, read as a predicate over identities.
pub fn denotation(expr: &BoolExpr, map: &SymbolMap) -> ObjectSet {
    ObjectSet::from_fn(|o: ObjectSpec| expr.eval(&|i| o.satisfies(map.attribute(i))))
}

pub fn equivalent(a: &BoolExpr, b: &BoolExpr, map: &SymbolMap) -> bool {
    denotation(a, map) == denotation(b, map)
}
