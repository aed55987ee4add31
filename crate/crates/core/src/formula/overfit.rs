use super::{Formula, PropId};
use crate::trace::{Alphabet, Character, Specification, Trace};
use crate::Error;

fn conjoin(mut items: Vec<Formula>) -> Option<Formula> {
    let mut acc = items.pop()?;
    while let Some(left) = items.pop() {
        acc = Formula::and(left, acc);
    }
    Some(acc)
}

/// `(⋀ present) ∧ (⋀ ¬absent)`, right-nested in proposition order.
fn character(c: Character, alphabet: &Alphabet) -> Formula {
    let (present, absent): (Vec<PropId>, Vec<PropId>) =
        (0..alphabet.len() as PropId).partition(|&p| c.contains(p));
    let pos = conjoin(present.into_iter().map(Formula::Atom).collect());
    let neg = conjoin(
        absent
            .into_iter()
            .map(|p| Formula::not(Formula::Atom(p)))
            .collect(),
    );
    match (pos, neg) {
        (Some(p), Some(n)) => Formula::and(p, n),
        (Some(f), None) | (None, Some(f)) => f,
        (None, None) => unreachable!("alphabet is nonempty"),
    }
}

/// `¬X true`: holds exactly at the last position of a trace.
fn end_marker() -> Formula {
    Formula::not(Formula::next(Formula::tt()))
}

/// Formula whose language is exactly `{tr}`.
///
/// The final character is conjoined with `¬X true` directly, so the formula is
/// satisfied at the last in-range position rather than one past the end.
pub fn overfit_trace(tr: &Trace, alphabet: &Alphabet) -> Formula {
    let chars = tr.chars();
    let Some((&last, init)) = chars.split_last() else {
        return end_marker();
    };
    let mut acc = Formula::and(character(last, alphabet), end_marker());
    for &c in init.iter().rev() {
        acc = Formula::and(character(c, alphabet), Formula::next(acc));
    }
    acc
}

/// Disjunction of [`overfit_trace`] over the positive traces, right-nested in
/// list order.
pub fn overfit(spec: &Specification, alphabet: &Alphabet) -> Result<Formula, Error> {
    let mut parts: Vec<Formula> = spec
        .positives()
        .iter()
        .map(|tr| overfit_trace(tr, alphabet))
        .collect();
    let mut acc = parts.pop().ok_or(Error::EmptyPositiveSet)?;
    while let Some(left) = parts.pop() {
        acc = Formula::or(left, acc);
    }
    Ok(acc)
}
