//! Reference semantics and a brute-force minimal learner.
//!
//! Nothing here touches the bit-level kernels; these functions are the ground
//! truth that the fast paths are tested against.

use std::collections::HashSet;

use crate::formula::{Connective, CostHomomorphism, Formula, PropId};
use crate::trace::{Specification, SuffixTable, Trace};
use crate::Error;

/// `tr, i ⊨ f` by direct recursion on the satisfaction clauses. Positions at or
/// past the end of the trace satisfy nothing.
pub fn holds(tr: &Trace, i: usize, f: &Formula) -> bool {
    let n = tr.len();
    if i >= n {
        return false;
    }
    match f {
        Formula::Atom(p) => tr.chars()[i].contains(*p),
        Formula::Not(x) => !holds(tr, i, x),
        Formula::And(x, y) => holds(tr, i, x) && holds(tr, i, y),
        Formula::Or(x, y) => holds(tr, i, x) || holds(tr, i, y),
        Formula::Next(x) => holds(tr, i + 1, x),
        Formula::Finally(x) => (i..n).any(|j| holds(tr, j, x)),
        Formula::Globally(x) => (i..n).all(|j| holds(tr, j, x)),
        Formula::Until(x, y) => {
            (i..n).any(|j| holds(tr, j, y) && (i..j).all(|k| holds(tr, k, x)))
        }
    }
}

/// Truth value of `f` at every position of `tr`.
///
/// Evaluates subformulae once per position instead of re-deriving them, so it
/// stays usable for long traces and large formulae.
pub fn truth_table(tr: &Trace, f: &Formula) -> Vec<bool> {
    let n = tr.len();
    match f {
        Formula::Atom(p) => tr.chars().iter().map(|c| c.contains(*p)).collect(),
        Formula::Not(x) => truth_table(tr, x).into_iter().map(|b| !b).collect(),
        Formula::And(x, y) => {
            let (a, b) = (truth_table(tr, x), truth_table(tr, y));
            a.iter().zip(&b).map(|(p, q)| *p && *q).collect()
        }
        Formula::Or(x, y) => {
            let (a, b) = (truth_table(tr, x), truth_table(tr, y));
            a.iter().zip(&b).map(|(p, q)| *p || *q).collect()
        }
        Formula::Next(x) => {
            let a = truth_table(tr, x);
            (0..n).map(|i| i + 1 < n && a[i + 1]).collect()
        }
        Formula::Finally(x) => {
            let a = truth_table(tr, x);
            let mut out = vec![false; n];
            let mut seen = false;
            for i in (0..n).rev() {
                seen |= a[i];
                out[i] = seen;
            }
            out
        }
        Formula::Globally(x) => {
            let a = truth_table(tr, x);
            let mut out = vec![false; n];
            let mut all = true;
            for i in (0..n).rev() {
                all &= a[i];
                out[i] = all;
            }
            out
        }
        Formula::Until(x, y) => {
            let (a, b) = (truth_table(tr, x), truth_table(tr, y));
            let mut out = vec![false; n];
            let mut later = false;
            for i in (0..n).rev() {
                later = b[i] || (a[i] && later);
                out[i] = later;
            }
            out
        }
    }
}

/// `tr ⊨ f`.
pub fn accepts(tr: &Trace, f: &Formula) -> bool {
    !tr.is_empty() && truth_table(tr, f)[0]
}

/// Whether `f` uses only `X` and boolean connectives; direct recursion on
/// such formulae visits every node at most once per trace.
fn next_only(f: &Formula) -> bool {
    f.nodes()
        .all(|n| !matches!(n, Formula::Finally(_) | Formula::Globally(_) | Formula::Until(..)))
}

/// Verdicts of `f` on many traces, picking the cheaper evaluator.
fn verdicts<'a>(f: &'a Formula, traces: impl Iterator<Item = &'a Trace> + 'a) -> impl Iterator<Item = bool> + 'a {
    let direct = next_only(f);
    traces.map(move |t| if direct { holds(t, 0, f) } else { accepts(t, f) })
}

/// Indices of the traces in `L(f)`.
pub fn language_filter(f: &Formula, traces: &[Trace]) -> Vec<usize> {
    verdicts(f, traces.iter())
        .enumerate()
        .filter(|(_, ok)| *ok)
        .map(|(i, _)| i)
        .collect()
}

/// Number of traces the formula misclassifies.
pub fn error_count(f: &Formula, spec: &Specification) -> usize {
    verdicts(f, spec.positives().iter()).filter(|ok| !ok).count()
        + verdicts(f, spec.negatives().iter()).filter(|ok| *ok).count()
}

pub fn separates(f: &Formula, spec: &Specification) -> bool {
    error_count(f, spec) == 0
}

/// Fragment restrictions shared by the learners.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Fragment {
    /// Negation only over atoms.
    pub nnf: bool,
    /// No `U`.
    pub until_free: bool,
}

struct Table {
    /// Immediate suffix of every suffix, if non-empty.
    succ: Vec<Option<usize>>,
    suffixes: Vec<Trace>,
}

impl Table {
    fn atom(&self, p: PropId) -> Vec<bool> {
        self.suffixes.iter().map(|s| s.chars()[0].contains(p)).collect()
    }

    /// Follows the immediate-suffix chain from `s`, including `s`.
    fn chain(&self, s: usize) -> impl Iterator<Item = usize> + '_ {
        std::iter::successors(Some(s), move |&t| self.succ[t])
    }

    fn unary(&self, op: Connective, a: &[bool]) -> Vec<bool> {
        (0..a.len())
            .map(|s| match op {
                Connective::Not => !a[s],
                Connective::Next => self.succ[s].is_some_and(|t| a[t]),
                Connective::Finally => self.chain(s).any(|t| a[t]),
                Connective::Globally => self.chain(s).all(|t| a[t]),
                _ => unreachable!(),
            })
            .collect()
    }

    fn binary(&self, op: Connective, a: &[bool], b: &[bool]) -> Vec<bool> {
        (0..a.len())
            .map(|s| match op {
                Connective::And => a[s] && b[s],
                Connective::Or => a[s] || b[s],
                Connective::Until => {
                    for t in self.chain(s) {
                        if b[t] {
                            return true;
                        }
                        if !a[t] {
                            return false;
                        }
                    }
                    false
                }
                _ => unreachable!(),
            })
            .collect()
    }
}

/// Exhaustive search for a cheapest separating formula.
///
/// Candidates are deduplicated by their truth table over the non-empty suffix
/// closure of the specification; the satisfaction clauses are compositional
/// over suffixes, so that quotient loses no minimal solution. Intended for
/// small specifications only.
pub fn bruteforce_min(
    spec: &Specification,
    props: usize,
    h: &CostHomomorphism,
    fragment: Fragment,
    ceiling: u64,
) -> Result<Formula, Error> {
    if spec.positives().iter().any(Trace::is_empty) {
        return Err(Error::EmptyPositiveTrace);
    }
    let suffix_table = SuffixTable::new(spec);
    let suffixes = suffix_table.suffixes().to_vec();
    let index: std::collections::HashMap<&Trace, usize> =
        suffixes.iter().enumerate().map(|(i, t)| (t, i)).collect();
    let succ = suffixes
        .iter()
        .map(|s| (s.len() > 1).then(|| index[&s.suffix(1)]))
        .collect();
    let table = Table { succ, suffixes: suffixes.clone() };
    let roots: Vec<(Option<usize>, bool)> = spec
        .positives()
        .iter()
        .map(|t| (index.get(t).copied(), true))
        .chain(spec.negatives().iter().map(|t| (index.get(t).copied(), false)))
        .collect();
    let separates = |tt: &[bool]| {
        roots
            .iter()
            .all(|&(root, want)| root.is_some_and(|r| tt[r]) == want)
    };

    let mut seen: HashSet<Vec<bool>> = HashSet::new();
    // levels[c] holds the distinct tables first reached at cost c
    let mut levels: Vec<Vec<(Vec<bool>, Formula)>> = vec![Vec::new(); ceiling as usize + 1];
    let mut atoms: Vec<(Vec<bool>, PropId)> = Vec::new();
    for c in 1..=ceiling {
        let mut fresh: Vec<(Vec<bool>, Formula)> = Vec::new();
        let mut offer = |tt: Vec<bool>, f: Formula, fresh: &mut Vec<(Vec<bool>, Formula)>| {
            if separates(&tt) {
                return Some(f);
            }
            if seen.insert(tt.clone()) {
                fresh.push((tt, f));
            }
            None
        };
        if c == h.atom {
            for p in 0..props as PropId {
                let tt = table.atom(p);
                atoms.push((tt.clone(), p));
                if let Some(f) = offer(tt, Formula::Atom(p), &mut fresh) {
                    return Ok(f);
                }
            }
        }
        for op in [
            Connective::Not,
            Connective::And,
            Connective::Or,
            Connective::Next,
            Connective::Finally,
            Connective::Globally,
            Connective::Until,
        ] {
            if op == Connective::Until && fragment.until_free {
                continue;
            }
            let oc = h.of(op);
            if oc >= c {
                continue;
            }
            let rest = c - oc;
            match op.arity() {
                1 if op == Connective::Not && fragment.nnf => {
                    if rest == h.atom {
                        for (tt, p) in &atoms {
                            let f = Formula::not(Formula::Atom(*p));
                            if let Some(f) = offer(table.unary(op, tt), f, &mut fresh) {
                                return Ok(f);
                            }
                        }
                    }
                }
                1 => {
                    for (tt, child) in &levels[rest as usize] {
                        let f = rebuild(op, child, None);
                        if let Some(f) = offer(table.unary(op, tt), f, &mut fresh) {
                            return Ok(f);
                        }
                    }
                }
                _ => {
                    for a in 1..rest {
                        let b = rest - a;
                        for (ta, fa) in &levels[a as usize] {
                            for (tb, fb) in &levels[b as usize] {
                                let f = rebuild(op, fa, Some(fb));
                                if let Some(f) = offer(table.binary(op, ta, tb), f, &mut fresh) {
                                    return Ok(f);
                                }
                            }
                        }
                    }
                }
            }
        }
        levels[c as usize] = fresh;
    }
    Err(Error::CeilingExceeded(ceiling))
}

fn rebuild(op: Connective, a: &Formula, b: Option<&Formula>) -> Formula {
    let a = a.clone();
    match (op, b) {
        (Connective::Not, _) => Formula::not(a),
        (Connective::Next, _) => Formula::next(a),
        (Connective::Finally, _) => Formula::finally(a),
        (Connective::Globally, _) => Formula::globally(a),
        (Connective::And, Some(b)) => Formula::and(a, b.clone()),
        (Connective::Or, Some(b)) => Formula::or(a, b.clone()),
        (Connective::Until, Some(b)) => Formula::until(a, b.clone()),
        _ => unreachable!(),
    }
}
