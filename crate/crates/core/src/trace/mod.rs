//! Alphabets, traces, specifications and the non-empty suffix closure.

mod io;

use std::collections::{BTreeSet, HashMap, HashSet};

use itertools::Itertools;

pub use io::{format_spec, load_spec, parse_spec, save_spec};

use crate::formula::PropId;
use crate::Error;

/// Longest trace a single 64-bit characteristic sequence can hold.
pub const MAX_TRACE_LEN: usize = 63;

/// Ordered, duplicate-free list of atomic proposition names.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Alphabet {
    names: Vec<String>,
}

impl Alphabet {
    pub const MAX_PROPS: usize = 64;

    pub fn new(names: Vec<String>) -> Result<Self, Error> {
        if names.is_empty() || names.len() > Self::MAX_PROPS {
            return Err(Error::InvalidAlphabet(format!(
                "alphabet needs between 1 and {} propositions, got {}",
                Self::MAX_PROPS,
                names.len()
            )));
        }
        if let Some(dup) = names.iter().duplicates().next() {
            return Err(Error::InvalidAlphabet(format!("duplicate name `{dup}`")));
        }
        Ok(Alphabet { names })
    }

    /// `p0 .. p{n-1}`.
    pub fn indexed(n: usize) -> Result<Self, Error> {
        Self::new((0..n).map(|i| format!("p{i}")).collect())
    }

    /// The two-proposition alphabet used by the benchmark generators.
    pub fn boolean() -> Self {
        Self::indexed(2).unwrap()
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index_of(&self, name: &str) -> Option<PropId> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| i as PropId)
    }

    /// Number of distinct characters, `2^|Σ|`, saturating at `u64::MAX`.
    pub fn character_count(&self) -> u64 {
        1u64.checked_shl(self.len() as u32).unwrap_or(u64::MAX)
    }

    /// Bitmask of all propositions.
    pub fn full(&self) -> Character {
        Character(if self.len() == 64 {
            u64::MAX
        } else {
            (1u64 << self.len()) - 1
        })
    }
}

/// A set of propositions, bit `p` set iff proposition `p` holds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Character(pub u64);

impl Character {
    pub fn contains(self, p: PropId) -> bool {
        (self.0 >> p) & 1 == 1
    }
}

/// Finite sequence of characters.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Trace {
    chars: Vec<Character>,
}

impl Trace {
    pub fn new(chars: Vec<Character>) -> Self {
        Trace { chars }
    }

    pub fn empty() -> Self {
        Trace::default()
    }

    /// A word: every position holds exactly the given proposition.
    pub fn word(props: &[PropId]) -> Self {
        Trace::new(props.iter().map(|&p| Character(1 << p)).collect())
    }

    pub fn len(&self) -> usize {
        self.chars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chars.is_empty()
    }

    pub fn chars(&self) -> &[Character] {
        &self.chars
    }

    pub fn at(&self, i: usize) -> Option<Character> {
        self.chars.get(i).copied()
    }

    pub fn suffix(&self, start: usize) -> Trace {
        Trace::new(self.chars[start.min(self.len())..].to_vec())
    }

    pub fn fits(&self, alphabet: &Alphabet) -> bool {
        let full = alphabet.full().0;
        self.chars.iter().all(|c| c.0 & !full == 0)
    }
}

/// Number of positions where two equal-length traces differ.
pub fn hamming_distance(a: &Trace, b: &Trace) -> Option<usize> {
    (a.len() == b.len()).then(|| {
        a.chars()
            .iter()
            .zip(b.chars())
            .filter(|(x, y)| x != y)
            .count()
    })
}

/// Positive and negative example traces, in a fixed order.
///
/// Rows of every characteristic matrix follow this order: positives first,
/// then negatives.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Specification {
    positives: Vec<Trace>,
    negatives: Vec<Trace>,
}

impl Specification {
    /// Deduplicates each side (keeping first occurrences) and rejects traces
    /// that occur on both sides.
    pub fn new(positives: Vec<Trace>, negatives: Vec<Trace>) -> Result<Self, Error> {
        let positives = dedup_side(positives, "positive");
        let negatives = dedup_side(negatives, "negative");
        let index: HashMap<&Trace, usize> =
            positives.iter().enumerate().map(|(i, t)| (t, i)).collect();
        if let Some((n, p)) = negatives
            .iter()
            .enumerate()
            .find_map(|(j, t)| index.get(t).map(|&i| (j, i)))
        {
            return Err(Error::OverlappingTrace {
                positive: p,
                negative: n,
            });
        }
        Ok(Specification {
            positives,
            negatives,
        })
    }

    pub fn positives(&self) -> &[Trace] {
        &self.positives
    }

    pub fn negatives(&self) -> &[Trace] {
        &self.negatives
    }

    /// All traces in row order.
    pub fn traces(&self) -> impl Iterator<Item = &Trace> {
        self.positives.iter().chain(&self.negatives)
    }

    /// `|P| + |N|`.
    pub fn len(&self) -> usize {
        self.positives.len() + self.negatives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Sum of trace lengths.
    pub fn size(&self) -> usize {
        self.traces().map(Trace::len).sum()
    }

    pub fn max_len(&self) -> usize {
        self.traces().map(Trace::len).max().unwrap_or(0)
    }

    pub fn fits(&self, alphabet: &Alphabet) -> bool {
        self.traces().all(|t| t.fits(alphabet))
    }
}

fn dedup_side(traces: Vec<Trace>, side: &str) -> Vec<Trace> {
    let before = traces.len();
    let mut seen = HashSet::with_capacity(before);
    let kept: Vec<Trace> = traces
        .into_iter()
        .filter(|t| seen.insert(t.clone()))
        .collect();
    if kept.len() != before {
        log::warn!(
            "dropped {} duplicate {side} trace(s)",
            before - kept.len()
        );
    }
    kept
}

/// All non-empty suffixes of the given traces, deduplicated.
pub fn suffix_closure_nonempty<'a>(traces: impl IntoIterator<Item = &'a Trace>) -> BTreeSet<Trace> {
    traces
        .into_iter()
        .flat_map(|t| (0..t.len()).map(move |i| t.suffix(i)))
        .collect()
}

/// Locates every `(row, position)` of a specification's characteristic
/// matrix and groups the positions by the suffix they represent.
#[derive(Clone, Debug)]
pub struct SuffixTable {
    /// Distinct non-empty suffixes in first-seen row order.
    suffixes: Vec<Trace>,
    /// For each row, the suffix index of every position.
    slots: Vec<Vec<usize>>,
    /// For each suffix, the first `(row, position)` that represents it.
    representative: Vec<(usize, usize)>,
}

impl SuffixTable {
    pub fn new(spec: &Specification) -> Self {
        let mut ids: HashMap<&[Character], usize> = HashMap::new();
        let mut suffixes = Vec::new();
        let mut representative = Vec::new();
        let mut slots = Vec::with_capacity(spec.len());
        for (row, tr) in spec.traces().enumerate() {
            let mut row_slots = Vec::with_capacity(tr.len());
            for pos in 0..tr.len() {
                let key = &tr.chars()[pos..];
                let id = *ids.entry(key).or_insert_with(|| {
                    suffixes.push(Trace::new(key.to_vec()));
                    representative.push((row, pos));
                    suffixes.len() - 1
                });
                row_slots.push(id);
            }
            slots.push(row_slots);
        }
        SuffixTable {
            suffixes,
            slots,
            representative,
        }
    }

    /// `|SUFFIXNE(P ∪ N)|`.
    pub fn len(&self) -> usize {
        self.suffixes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.suffixes.is_empty()
    }

    pub fn suffixes(&self) -> &[Trace] {
        &self.suffixes
    }

    /// Suffix index stored at `(row, position)` of the matrix layout.
    pub fn slot(&self, row: usize, pos: usize) -> Option<usize> {
        self.slots.get(row)?.get(pos).copied()
    }

    /// One `(row, position)` per distinct suffix.
    pub fn representatives(&self) -> &[(usize, usize)] {
        &self.representative
    }
}

/// Every trace of the same length as `tr` at Hamming distance exactly `delta`.
pub fn hamming_ball(tr: &Trace, delta: usize, alphabet: &Alphabet) -> Vec<Trace> {
    if delta > tr.len() {
        return Vec::new();
    }
    let chars = alphabet.character_count();
    let mut out = Vec::new();
    for positions in (0..tr.len()).combinations(delta) {
        // odometer over the (a-1)^delta replacement choices
        let mut digits = vec![0u64; delta];
        loop {
            let mut chars_out = tr.chars().to_vec();
            for (&pos, &d) in positions.iter().zip(&digits) {
                let orig = tr.chars()[pos].0;
                let replacement = if d >= orig { d + 1 } else { d };
                chars_out[pos] = Character(replacement);
            }
            out.push(Trace::new(chars_out));
            let mut k = 0;
            while k < delta {
                digits[k] += 1;
                if digits[k] < chars - 1 {
                    break;
                }
                digits[k] = 0;
                k += 1;
            }
            if k == delta {
                break;
            }
        }
    }
    out
}
