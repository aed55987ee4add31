//! LTL formulae over finite traces, cost homomorphisms and fragment checks.

mod overfit;
mod text;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use overfit::{overfit, overfit_trace};
pub use text::{parse_formula, ParseError};

/// Index of an atomic proposition in an [`crate::trace::Alphabet`].
pub type PropId = u16;

/// Syntax tree of an LTL formula.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Formula {
    Atom(PropId),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Next(Box<Formula>),
    Finally(Box<Formula>),
    Globally(Box<Formula>),
    Until(Box<Formula>, Box<Formula>),
}

/// Connective of a formula node, used to index cost tables.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Connective {
    Atom,
    Not,
    And,
    Or,
    Next,
    Finally,
    Globally,
    Until,
}

impl Connective {
    pub const ALL: [Connective; 8] = [
        Connective::Atom,
        Connective::Not,
        Connective::And,
        Connective::Or,
        Connective::Next,
        Connective::Finally,
        Connective::Globally,
        Connective::Until,
    ];

    pub fn arity(self) -> usize {
        match self {
            Connective::Atom => 0,
            Connective::Not | Connective::Next | Connective::Finally | Connective::Globally => 1,
            Connective::And | Connective::Or | Connective::Until => 2,
        }
    }
}

/// Positive integer cost per connective, extended additively over formulae.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostHomomorphism {
    pub atom: u64,
    pub not: u64,
    pub and: u64,
    pub or: u64,
    pub next: u64,
    pub finally: u64,
    pub globally: u64,
    pub until: u64,
}

impl CostHomomorphism {
    pub const fn uniform() -> Self {
        CostHomomorphism {
            atom: 1,
            not: 1,
            and: 1,
            or: 1,
            next: 1,
            finally: 1,
            globally: 1,
            until: 1,
        }
    }

    pub fn of(&self, op: Connective) -> u64 {
        match op {
            Connective::Atom => self.atom,
            Connective::Not => self.not,
            Connective::And => self.and,
            Connective::Or => self.or,
            Connective::Next => self.next,
            Connective::Finally => self.finally,
            Connective::Globally => self.globally,
            Connective::Until => self.until,
        }
    }

    /// Every entry must be at least 1.
    pub fn is_valid(&self) -> bool {
        Connective::ALL.iter().all(|&op| self.of(op) >= 1)
    }
}

impl Default for CostHomomorphism {
    fn default() -> Self {
        Self::uniform()
    }
}

impl Formula {
    pub fn atom(p: PropId) -> Self {
        Formula::Atom(p)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Self {
        Formula::Not(Box::new(f))
    }

    pub fn and(l: Formula, r: Formula) -> Self {
        Formula::And(Box::new(l), Box::new(r))
    }

    pub fn or(l: Formula, r: Formula) -> Self {
        Formula::Or(Box::new(l), Box::new(r))
    }

    pub fn next(f: Formula) -> Self {
        Formula::Next(Box::new(f))
    }

    pub fn finally(f: Formula) -> Self {
        Formula::Finally(Box::new(f))
    }

    pub fn globally(f: Formula) -> Self {
        Formula::Globally(Box::new(f))
    }

    pub fn until(l: Formula, r: Formula) -> Self {
        Formula::Until(Box::new(l), Box::new(r))
    }

    /// `p0 | !p0`.
    pub fn tt() -> Self {
        Formula::or(Formula::Atom(0), Formula::not(Formula::Atom(0)))
    }

    /// `p0 & !p0`.
    pub fn ff() -> Self {
        Formula::and(Formula::Atom(0), Formula::not(Formula::Atom(0)))
    }

    pub fn connective(&self) -> Connective {
        match self {
            Formula::Atom(_) => Connective::Atom,
            Formula::Not(_) => Connective::Not,
            Formula::And(..) => Connective::And,
            Formula::Or(..) => Connective::Or,
            Formula::Next(_) => Connective::Next,
            Formula::Finally(_) => Connective::Finally,
            Formula::Globally(_) => Connective::Globally,
            Formula::Until(..) => Connective::Until,
        }
    }

    /// Direct children, left to right.
    pub fn children(&self) -> impl Iterator<Item = &Formula> {
        let (a, b): (Option<&Formula>, Option<&Formula>) = match self {
            Formula::Atom(_) => (None, None),
            Formula::Not(x) | Formula::Next(x) | Formula::Finally(x) | Formula::Globally(x) => {
                (Some(x), None)
            }
            Formula::And(x, y) | Formula::Or(x, y) | Formula::Until(x, y) => (Some(x), Some(y)),
        };
        a.into_iter().chain(b)
    }

    /// Pre-order traversal with an explicit stack, so deep formulae are safe.
    pub fn nodes(&self) -> impl Iterator<Item = &Formula> {
        let mut stack = vec![self];
        std::iter::from_fn(move || {
            let node = stack.pop()?;
            let mut kids: Vec<&Formula> = node.children().collect();
            kids.reverse();
            stack.extend(kids);
            Some(node)
        })
    }

    pub fn cost(&self, h: &CostHomomorphism) -> u64 {
        self.nodes().map(|n| h.of(n.connective())).sum()
    }

    pub fn size(&self) -> usize {
        self.nodes().count()
    }

    /// Negation only ever applied to atoms.
    pub fn is_nnf(&self) -> bool {
        self.nodes().all(|n| match n {
            Formula::Not(child) => matches!(**child, Formula::Atom(_)),
            _ => true,
        })
    }

    pub fn is_until_free(&self) -> bool {
        self.nodes().all(|n| !matches!(n, Formula::Until(..)))
    }

    /// Largest proposition id used, if any atom occurs.
    pub fn max_prop(&self) -> Option<PropId> {
        self.nodes()
            .filter_map(|n| match n {
                Formula::Atom(p) => Some(*p),
                _ => None,
            })
            .max()
    }

    /// Renders with declared proposition names instead of `pN`.
    pub fn display_with<'a>(&'a self, names: &'a [String]) -> impl fmt::Display + 'a {
        text::Printer {
            formula: self,
            names: Some(names),
        }
    }
}

/// Pre-order printer; `print(parse(s))` re-parses to the same tree.
impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        text::Printer {
            formula: self,
            names: None,
        }
        .fmt(f)
    }
}

/// Text form of a formula using `pN` proposition names.
pub fn print_formula(f: &Formula) -> String {
    f.to_string()
}

// Box chains of a few thousand nodes are common after divide-and-conquer, and the
// derived drop recurses once per node.
impl Drop for Formula {
    fn drop(&mut self) {
        let mut stack: Vec<Box<Formula>> = Vec::new();
        let take = |f: &mut Formula, stack: &mut Vec<Box<Formula>>| match f {
            Formula::Atom(_) => {}
            Formula::Not(x) | Formula::Next(x) | Formula::Finally(x) | Formula::Globally(x) => {
                stack.push(std::mem::replace(x, Box::new(Formula::Atom(0))));
            }
            Formula::And(x, y) | Formula::Or(x, y) | Formula::Until(x, y) => {
                stack.push(std::mem::replace(x, Box::new(Formula::Atom(0))));
                stack.push(std::mem::replace(y, Box::new(Formula::Atom(0))));
            }
        };
        take(self, &mut stack);
        while let Some(mut node) = stack.pop() {
            take(&mut node, &mut stack);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(i: PropId) -> Formula {
        Formula::atom(i)
    }

    #[test]
    fn cost_examples() {
        let h = CostHomomorphism::uniform();
        assert_eq!(Formula::tt().cost(&h), 4);
        assert_eq!(Formula::ff().cost(&h), 4);
        assert_eq!(p(0).cost(&h), 1);
        let f = Formula::or(Formula::finally(p(0)), Formula::globally(p(1)));
        assert_eq!(f.cost(&h), 5);
    }

    #[test]
    fn weighted_cost() {
        let h = CostHomomorphism {
            until: 5,
            atom: 2,
            ..CostHomomorphism::uniform()
        };
        let f = Formula::until(p(0), Formula::next(p(1)));
        assert_eq!(f.cost(&h), 5 + 2 + 1 + 2);
    }

    #[test]
    fn nnf_examples() {
        assert!(Formula::not(p(0)).is_nnf());
        assert!(!Formula::not(Formula::finally(p(0))).is_nnf());
        assert!(Formula::until(Formula::not(p(0)), Formula::globally(p(1))).is_nnf());
    }

    #[test]
    fn until_free_examples() {
        assert!(Formula::globally(Formula::or(p(0), Formula::next(p(1)))).is_until_free());
        assert!(!Formula::until(p(0), p(1)).is_until_free());
        assert!(!Formula::finally(Formula::until(p(0), p(1))).is_until_free());
    }

    #[test]
    fn deep_formula_drops_without_overflow() {
        let mut f = p(0);
        for _ in 0..200_000 {
            f = Formula::next(f);
        }
        assert_eq!(f.size(), 200_001);
        drop(f);
    }
}
