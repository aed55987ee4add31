//! Exact sampler for traces of a given polarity under a formula.
//!
//! The state of a position is the truth vector of all subformulae there; it
//! depends only on the character at that position and the state one step
//! later. Counting states backward gives, for every suffix length, how many
//! suffixes end up in each state, which is enough to draw a uniformly random
//! trace of a given length and verdict without rejection.

use std::collections::BTreeMap;

use rand::distributions::WeightedIndex;
use rand::prelude::Distribution;
use rand::Rng;

use crate::formula::{Connective, Formula, PropId};
use crate::trace::{Alphabet, Character, Trace};
use crate::Error;

const MAX_SUBFORMULAE: usize = 64;
const MAX_PROPS: usize = 8;

#[derive(Clone, Copy, Debug)]
struct Node {
    op: Connective,
    prop: PropId,
    a: usize,
    b: usize,
}

pub struct GuidedSampler {
    nodes: Vec<Node>,
    chars: u64,
    /// `counts[t]`: state at position 0 of a length-`t` trace, with multiplicity.
    counts: Vec<BTreeMap<u64, f64>>,
    lo: usize,
    hi: usize,
}

fn flatten(f: &Formula, nodes: &mut Vec<Node>) -> usize {
    let kids: Vec<usize> = f.children().map(|c| flatten(c, nodes)).collect();
    let prop = match f {
        Formula::Atom(p) => *p,
        _ => 0,
    };
    nodes.push(Node {
        op: f.connective(),
        prop,
        a: kids.first().copied().unwrap_or(0),
        b: kids.get(1).copied().unwrap_or(0),
    });
    nodes.len() - 1
}

impl GuidedSampler {
    pub fn new(f: &Formula, alphabet: &Alphabet, lo: usize, hi: usize) -> Result<Self, Error> {
        if lo > hi || lo == 0 {
            return Err(Error::Generator(format!("bad length range [{lo}, {hi}]")));
        }
        if alphabet.len() > MAX_PROPS {
            return Err(Error::Generator(format!("guided sampling supports at most {MAX_PROPS} propositions")));
        }
        if f.max_prop().is_some_and(|p| p as usize >= alphabet.len()) {
            return Err(Error::OutsideAlphabet);
        }
        let mut nodes = Vec::new();
        flatten(f, &mut nodes);
        if nodes.len() > MAX_SUBFORMULAE {
            return Err(Error::Generator(format!(
                "formula has {} subformulae, at most {MAX_SUBFORMULAE} supported",
                nodes.len()
            )));
        }
        let mut s = GuidedSampler {
            nodes,
            chars: alphabet.character_count(),
            counts: vec![BTreeMap::new()],
            lo,
            hi,
        };
        for t in 1..=hi {
            let mut level: BTreeMap<u64, f64> = BTreeMap::new();
            for c in 0..s.chars {
                if t == 1 {
                    *level.entry(s.step(c, None)).or_default() += 1.0;
                } else {
                    for (&next, &n) in &s.counts[t - 1] {
                        *level.entry(s.step(c, Some(next))).or_default() += n;
                    }
                }
            }
            s.counts.push(level);
        }
        Ok(s)
    }

    /// State at a position holding `c`, given the state one step later.
    fn step(&self, c: u64, next: Option<u64>) -> u64 {
        let mut v = 0u64;
        let bit = |v: u64, i: usize| v >> i & 1 == 1;
        for (i, n) in self.nodes.iter().enumerate() {
            let later = |j: usize| next.is_some_and(|s| bit(s, j));
            let val = match n.op {
                Connective::Atom => Character(c).contains(n.prop),
                Connective::Not => !bit(v, n.a),
                Connective::And => bit(v, n.a) && bit(v, n.b),
                Connective::Or => bit(v, n.a) || bit(v, n.b),
                Connective::Next => later(n.a),
                Connective::Finally => bit(v, n.a) || later(i),
                Connective::Globally => bit(v, n.a) && (next.is_none() || later(i)),
                Connective::Until => bit(v, n.b) || (bit(v, n.a) && later(i)),
            };
            v |= (val as u64) << i;
        }
        v
    }

    fn root(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Number of length-`len` traces on which the formula evaluates to `verdict`.
    pub fn count(&self, len: usize, verdict: bool) -> f64 {
        let root = self.root();
        self.counts[len]
            .iter()
            .filter(|(&s, _)| (s >> root & 1 == 1) == verdict)
            .map(|(_, &n)| n)
            .sum()
    }

    /// Probability that a trace of uniformly random length in range, with
    /// uniformly random characters, has the given verdict.
    pub fn verdict_weights(&self, verdict: bool) -> Vec<f64> {
        (self.lo..=self.hi)
            .map(|l| self.count(l, verdict) / (self.chars as f64).powi(l as i32))
            .collect()
    }

    pub fn possible(&self, verdict: bool) -> bool {
        self.verdict_weights(verdict).iter().any(|&w| w > 0.0)
    }

    /// Draws a trace with the given verdict. The result follows the
    /// distribution of uniform draws filtered by verdict.
    pub fn sample(&self, verdict: bool, rng: &mut impl Rng) -> Option<Trace> {
        let weights = self.verdict_weights(verdict);
        let len = self.lo + WeightedIndex::new(&weights).ok()?.sample(rng);
        let root = self.root();
        let starts: Vec<(u64, f64)> = self.counts[len]
            .iter()
            .filter(|(&s, _)| (s >> root & 1 == 1) == verdict)
            .map(|(&s, &n)| (s, n))
            .collect();
        let mut state = pick(&starts, rng)?;
        let mut chars = Vec::with_capacity(len);
        for i in 0..len {
            let rest = len - i - 1;
            let mut options: Vec<((u64, Option<u64>), f64)> = Vec::new();
            for c in 0..self.chars {
                if rest == 0 {
                    if self.step(c, None) == state {
                        options.push(((c, None), 1.0));
                    }
                } else {
                    for (&next, &n) in &self.counts[rest] {
                        if self.step(c, Some(next)) == state {
                            options.push(((c, Some(next)), n));
                        }
                    }
                }
            }
            let (c, next) = pick(&options, rng)?;
            chars.push(Character(c));
            if let Some(next) = next {
                state = next;
            }
        }
        Some(Trace::new(chars))
    }
}

fn pick<T: Copy>(options: &[(T, f64)], rng: &mut impl Rng) -> Option<T> {
    let dist = WeightedIndex::new(options.iter().map(|o| o.1)).ok()?;
    Some(options[dist.sample(rng)].0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::parse_formula;
    use crate::oracle;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn counts_match_enumeration() {
        let alphabet = Alphabet::boolean();
        for text in ["F p0", "p0 U p1", "G(p0 | X p1)", "!X(p0 | !p0)", "X X p1"] {
            let f = parse_formula(text, &alphabet).unwrap();
            let s = GuidedSampler::new(&f, &alphabet, 1, 5).unwrap();
            for len in 1..=5usize {
                let mut yes = 0.0;
                for code in 0..4u64.pow(len as u32) {
                    let tr = Trace::new((0..len).map(|i| Character(code >> (2 * i) & 3)).collect());
                    if oracle::accepts(&tr, &f) {
                        yes += 1.0;
                    }
                }
                assert_eq!(s.count(len, true), yes, "{text} at {len}");
                assert_eq!(s.count(len, false), 4f64.powi(len as i32) - yes);
            }
        }
    }

    #[test]
    fn samples_have_the_requested_verdict() {
        let alphabet = Alphabet::boolean();
        let f = parse_formula("G p0", &alphabet).unwrap();
        let s = GuidedSampler::new(&f, &alphabet, 63, 63).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for verdict in [true, false] {
            for _ in 0..50 {
                let tr = s.sample(verdict, &mut rng).unwrap();
                assert_eq!(tr.len(), 63);
                assert_eq!(oracle::accepts(&tr, &f), verdict);
            }
        }
        assert!(!GuidedSampler::new(&Formula::ff(), &alphabet, 1, 4).unwrap().possible(true));
    }

    #[test]
    fn uniform_within_a_class() {
        // F p0 over one proposition at length 2: {10, 01, 11} equally likely
        let alphabet = Alphabet::indexed(1).unwrap();
        let f = parse_formula("F p0", &alphabet).unwrap();
        let s = GuidedSampler::new(&f, &alphabet, 2, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut hist: BTreeMap<Trace, u32> = BTreeMap::new();
        for _ in 0..3000 {
            *hist.entry(s.sample(true, &mut rng).unwrap()).or_default() += 1;
        }
        assert_eq!(hist.len(), 3);
        assert!(hist.values().all(|&n| (850..1150).contains(&n)), "{hist:?}");
    }
}
