//! Bottom-up enumeration of formulae by increasing cost.
//!
//! Within a cost level connectives are tried in the order ¬, ∧, ∨, X, F, G, U
//! and children in cache order. Candidates are evaluated in batches (in
//! parallel when enabled) and merged back strictly in that order, so the
//! outcome does not depend on the number of threads.

use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bitsem::{apply_binary, apply_unary, Layout};
use crate::cache::{
    EntryId, Fingerprint, FingerprintMode, Fingerprinter, HashScheme, LanguageCache, LevelStats, Record,
};
use crate::formula::{overfit, Connective, CostHomomorphism, Formula, PropId};
use crate::trace::{Alphabet, Specification, Trace, MAX_TRACE_LEN};
use crate::Error;

/// Connective order inside a cost level.
pub const OP_ORDER: [Connective; 7] = [
    Connective::Not,
    Connective::And,
    Connective::Or,
    Connective::Next,
    Connective::Finally,
    Connective::Globally,
    Connective::Until,
];

const BATCH: usize = 1 << 12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    /// Most traces handed to one enumerator call.
    pub max_traces: usize,
    pub max_len: usize,
    pub cost: CostHomomorphism,
    /// Negation only directly over atoms.
    pub nnf: bool,
    pub until_free: bool,
    pub hash: HashScheme,
    /// Cache budget in bytes.
    pub budget: usize,
    /// Fraction of misclassified traces tolerated.
    pub noise: f64,
    /// Lowers the overfit-cost ceiling.
    pub ceiling: Option<u64>,
    pub timeout: Option<Duration>,
    pub parallel: bool,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig {
            max_traces: 64,
            max_len: MAX_TRACE_LEN,
            cost: CostHomomorphism::uniform(),
            nnf: false,
            until_free: false,
            hash: HashScheme::default(),
            budget: 2 << 30,
            noise: 0.0,
            ceiling: None,
            timeout: None,
            parallel: true,
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<(), Error> {
        if self.max_traces == 0 {
            return Err(Error::Config("max_traces must be at least 1".into()));
        }
        if self.max_len > MAX_TRACE_LEN {
            return Err(Error::Config(format!("max_len above {MAX_TRACE_LEN}")));
        }
        if !(0.0..=1.0).contains(&self.noise) {
            return Err(Error::Config("noise must lie in [0, 1]".into()));
        }
        if !self.cost.is_valid() {
            return Err(Error::Config("connective costs must be positive".into()));
        }
        Ok(())
    }

    /// Misclassified traces accepted for a spec of `n` traces.
    pub fn tolerance(&self, n: usize) -> usize {
        (self.noise * n as f64 + 1e-9).floor() as usize
    }

    fn enabled(&self, op: Connective) -> bool {
        match op {
            Connective::Not => !self.nnf,
            Connective::Until => !self.until_free,
            Connective::Atom => false,
            _ => true,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnumStats {
    pub rows: usize,
    pub fingerprint: Option<FingerprintMode>,
    pub candidates: u64,
    pub admitted: u64,
    pub duplicates: u64,
    pub peak_bytes: usize,
    pub levels: Vec<LevelStats>,
    /// Wall time per entry of `levels`; empty when timing is not wanted.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub level_ms: Vec<u64>,
}

impl EnumStats {
    pub fn clear_timings(&mut self) {
        self.level_ms.clear();
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum EnumOutcome {
    Solved { formula: Formula, cost: u64, stats: EnumStats },
    OutOfMemory { stats: EnumStats },
    /// Carries the overfitting formula.
    CeilingReached { formula: Formula, stats: EnumStats },
    Timeout { stats: EnumStats },
}

impl EnumOutcome {
    pub fn stats(&self) -> &EnumStats {
        match self {
            EnumOutcome::Solved { stats, .. }
            | EnumOutcome::OutOfMemory { stats }
            | EnumOutcome::CeilingReached { stats, .. }
            | EnumOutcome::Timeout { stats } => stats,
        }
    }

    /// The returned formula, if any.
    pub fn formula(&self) -> Option<&Formula> {
        match self {
            EnumOutcome::Solved { formula, .. } | EnumOutcome::CeilingReached { formula, .. } => Some(formula),
            _ => None,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            EnumOutcome::Solved { .. } => "solved",
            EnumOutcome::OutOfMemory { .. } => "oom",
            EnumOutcome::CeilingReached { .. } => "ceiling",
            EnumOutcome::Timeout { .. } => "timeout",
        }
    }
}

/// Records of every candidate of cost exactly `c` with top connective `op`,
/// in enumeration order. Conjunction and disjunction take each unordered pair
/// of distinct entries once.
pub fn handle_op(op: Connective, c: u64, cache: &LanguageCache, h: &CostHomomorphism) -> Vec<Record> {
    op_blocks(op, c, cache, h).into_iter().flat_map(Block::records).collect()
}

#[derive(Clone, Debug)]
enum Block {
    Unary(Connective, std::ops::Range<EntryId>),
    Binary {
        op: Connective,
        left: std::ops::Range<EntryId>,
        right: std::ops::Range<EntryId>,
        triangular: bool,
    },
}

impl Block {
    fn records(self) -> Box<dyn Iterator<Item = Record>> {
        match self {
            Block::Unary(op, r) => Box::new(r.map(move |a| Record::Unary(op, a))),
            Block::Binary {
                op,
                left,
                right,
                triangular,
            } => Box::new(left.flat_map(move |a| {
                let lo = if triangular { right.start.max(a + 1) } else { right.start };
                (lo..right.end).map(move |b| Record::Binary(op, a, b))
            })),
        }
    }
}

fn op_blocks(op: Connective, c: u64, cache: &LanguageCache, h: &CostHomomorphism) -> Vec<Block> {
    let oc = h.of(op);
    if oc >= c {
        return Vec::new();
    }
    let rest = c - oc;
    let mut blocks = Vec::new();
    match op.arity() {
        1 => {
            let r = cache.bucket(rest);
            if !r.is_empty() {
                blocks.push(Block::Unary(op, r));
            }
        }
        2 => {
            let commutative = op != Connective::Until;
            for a in 1..rest {
                let b = rest - a;
                if commutative && a > b {
                    break;
                }
                let (left, right) = (cache.bucket(a), cache.bucket(b));
                if left.is_empty() || right.is_empty() {
                    continue;
                }
                blocks.push(Block::Binary {
                    op,
                    left,
                    right,
                    triangular: commutative && a == b,
                });
            }
        }
        _ => {}
    }
    blocks
}

struct Search<'a> {
    spec: &'a Specification,
    layout: Layout,
    cfg: &'a LearnerConfig,
    cache: LanguageCache,
    tolerance: usize,
    started: Instant,
    level_ms: Vec<u64>,
    level_started: Instant,
}

enum Stop {
    Solved(Formula),
    OutOfMemory,
    Timeout,
}

struct Evaluated {
    fp: Fingerprint,
    errors: usize,
    seen: bool,
}

impl<'a> Search<'a> {
    fn build(&self, record: Record, out: &mut [u64]) {
        match record {
            Record::Atom(p) => self.layout.atom_rows(self.spec, p, out),
            Record::Unary(op, a) => apply_unary(op, self.cache.cm(a), &self.layout, out),
            Record::Binary(op, a, b) => apply_binary(op, self.cache.cm(a), self.cache.cm(b), &self.layout, out),
        }
    }

    fn formula_of(&self, record: Record) -> Formula {
        record.build(|id| self.cache.reconstruct(id))
    }

    fn timed_out(&self) -> bool {
        self.cfg.timeout.is_some_and(|t| self.started.elapsed() >= t)
    }

    /// Evaluates a batch, then checks and admits it in order.
    fn flush(&mut self, batch: &mut Vec<Record>) -> Option<Stop> {
        if batch.is_empty() {
            return None;
        }
        if self.timed_out() {
            return Some(Stop::Timeout);
        }
        let rows = self.layout.rows();
        let mut buf = vec![0u64; batch.len() * rows];
        let eval = |(out, rec): (&mut [u64], &Record)| {
            self.build(*rec, out);
            let fp = self.cache.fingerprinter().fingerprint(out);
            Evaluated {
                fp,
                errors: self.layout.error_count(out),
                seen: self.cache.contains(fp),
            }
        };
        let results: Vec<Evaluated> = if self.cfg.parallel {
            buf.par_chunks_mut(rows).zip(batch.par_iter()).map(eval).collect()
        } else {
            buf.chunks_mut(rows).zip(batch.iter()).map(eval).collect()
        };
        for (k, ev) in results.iter().enumerate() {
            if ev.errors <= self.tolerance {
                let f = self.formula_of(batch[k]);
                batch.clear();
                return Some(Stop::Solved(f));
            }
            if ev.seen {
                self.cache.note_duplicate();
                continue;
            }
            let cm = &buf[k * rows..(k + 1) * rows];
            if self.cache.try_admit_with(ev.fp, cm, batch[k]).is_err() {
                batch.clear();
                return Some(Stop::OutOfMemory);
            }
        }
        batch.clear();
        None
    }

    fn run_level(&mut self, c: u64, negated_atoms: &[EntryId]) -> Option<Stop> {
        self.cache.begin_level(c);
        self.level_started = Instant::now();
        let h = self.cfg.cost;
        let mut blocks: Vec<Block> = Vec::new();
        if !negated_atoms.is_empty() {
            for &a in negated_atoms {
                blocks.push(Block::Unary(Connective::Not, a..a + 1));
            }
        }
        for op in OP_ORDER {
            if self.cfg.enabled(op) {
                blocks.extend(op_blocks(op, c, &self.cache, &h));
            }
        }
        let mut batch = Vec::with_capacity(BATCH);
        for block in blocks {
            for rec in block.records() {
                batch.push(rec);
                if batch.len() == BATCH {
                    if let Some(stop) = self.flush(&mut batch) {
                        return Some(stop);
                    }
                }
            }
        }
        let stop = self.flush(&mut batch);
        self.level_ms.push(self.level_started.elapsed().as_millis() as u64);
        stop
    }

    fn stats(&self) -> EnumStats {
        let levels: Vec<LevelStats> = self.cache.levels().to_vec();
        let mut level_ms = self.level_ms.clone();
        level_ms.resize(levels.len(), self.level_started.elapsed().as_millis() as u64);
        let keep: Vec<bool> = levels.iter().map(|l| l.offered > 0).collect();
        let mut k = keep.iter();
        level_ms.retain(|_| *k.next().unwrap());
        let levels: Vec<LevelStats> = levels.into_iter().filter(|l| l.offered > 0).collect();
        EnumStats {
            rows: self.layout.rows(),
            fingerprint: Some(self.cache.fingerprinter().mode()),
            candidates: levels.iter().map(|l| l.offered).sum(),
            admitted: levels.iter().map(|l| l.admitted).sum(),
            duplicates: levels.iter().map(|l| l.duplicates).sum(),
            peak_bytes: self.cache.bytes(),
            levels,
            level_ms,
        }
    }
}

/// Checks the preconditions of [`enum_learn`].
pub fn check_input(spec: &Specification, alphabet: &Alphabet, cfg: &LearnerConfig) -> Result<(), Error> {
    cfg.validate()?;
    if spec.len() > cfg.max_traces {
        return Err(Error::TooManyTraces {
            got: spec.len(),
            limit: cfg.max_traces,
        });
    }
    if spec.max_len() > cfg.max_len {
        return Err(Error::TraceTooLong {
            got: spec.max_len(),
            limit: cfg.max_len,
        });
    }
    if spec.positives().is_empty() {
        return Err(Error::EmptyPositiveSet);
    }
    if spec.positives().iter().any(Trace::is_empty) {
        return Err(Error::EmptyPositiveTrace);
    }
    if !spec.fits(alphabet) {
        return Err(Error::OutsideAlphabet);
    }
    Ok(())
}

/// Searches for a cheapest formula separating `spec`, stopping at the cost
/// of the overfitting formula.
pub fn enum_learn(spec: &Specification, alphabet: &Alphabet, cfg: &LearnerConfig) -> Result<EnumOutcome, Error> {
    check_input(spec, alphabet, cfg)?;
    let h = cfg.cost;
    let fallback = overfit(spec, alphabet)?;
    let ceiling = fallback.cost(&h).min(cfg.ceiling.unwrap_or(u64::MAX));
    let layout = Layout::new(spec)?;
    let fingerprinter = Fingerprinter::new(spec, &layout, cfg.hash);
    let rows = layout.rows();
    let mut search = Search {
        spec,
        cache: LanguageCache::new(rows, fingerprinter, cfg.budget),
        layout,
        cfg,
        tolerance: cfg.tolerance(spec.len()),
        started: Instant::now(),
        level_ms: Vec::new(),
        level_started: Instant::now(),
    };

    // atoms
    let mut atom_batch: Vec<Record> = (0..alphabet.len() as PropId).map(Record::Atom).collect();
    if h.atom < ceiling {
        search.cache.begin_level(h.atom);
        search.level_started = Instant::now();
        let stop = search.flush(&mut atom_batch);
        search.level_ms.push(search.level_started.elapsed().as_millis() as u64);
        if let Some(stop) = stop {
            return Ok(finish(stop, &search, &h));
        }
    }
    let atoms: Vec<EntryId> = search.cache.bucket(h.atom).collect();
    let not_atom_cost = h.not + h.atom;
    let max_op = OP_ORDER.iter().map(|&op| h.of(op)).max().unwrap_or(1);

    let mut c = h.atom + 1;
    while c < ceiling {
        let negated: &[EntryId] = if cfg.nnf && c == not_atom_cost { &atoms } else { &[] };
        if let Some(stop) = search.run_level(c, negated) {
            return Ok(finish(stop, &search, &h));
        }
        // no candidate can be built once every non-empty bucket is too cheap
        let top = search.cache.max_nonempty_cost().unwrap_or(0);
        if c > 2 * top + max_op && c > not_atom_cost {
            break;
        }
        c += 1;
    }
    Ok(EnumOutcome::CeilingReached {
        formula: fallback,
        stats: search.stats(),
    })
}

fn finish(stop: Stop, search: &Search<'_>, h: &CostHomomorphism) -> EnumOutcome {
    let stats = search.stats();
    match stop {
        Stop::Solved(formula) => EnumOutcome::Solved {
            cost: formula.cost(h),
            formula,
            stats,
        },
        Stop::OutOfMemory => EnumOutcome::OutOfMemory { stats },
        Stop::Timeout => EnumOutcome::Timeout { stats },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bitsem::eval_formula;
    use crate::oracle;
    use crate::trace::Character;

    fn word(bits: &[u64]) -> Trace {
        Trace::new(bits.iter().map(|&b| Character(b)).collect())
    }

    fn seeded_cache(spec: &Specification, props: usize) -> LanguageCache {
        let layout = Layout::new(spec).unwrap();
        let fp = Fingerprinter::new(spec, &layout, HashScheme::default());
        let mut cache = LanguageCache::new(layout.rows(), fp, 1 << 20);
        cache.begin_level(1);
        for p in 0..props as PropId {
            let mut rows = vec![0; layout.rows()];
            layout.atom_rows(spec, p, &mut rows);
            cache.try_admit(&rows, Record::Atom(p)).unwrap();
        }
        cache
    }

    #[test]
    fn candidate_counts() {
        let spec = Specification::new(vec![word(&[1, 2, 3])], vec![word(&[2, 1])]).unwrap();
        let cache = seeded_cache(&spec, 2);
        let h = CostHomomorphism::uniform();
        assert_eq!(handle_op(Connective::Next, 2, &cache, &h).len(), 2);
        assert_eq!(handle_op(Connective::And, 3, &cache, &h), vec![Record::Binary(Connective::And, 0, 1)]);
        assert_eq!(handle_op(Connective::Until, 3, &cache, &h).len(), 4);
        assert!(handle_op(Connective::Or, 2, &cache, &h).is_empty());
    }

    #[test]
    fn atom_fast_path() {
        let spec = Specification::new(vec![word(&[1]), word(&[3, 0])], vec![word(&[0]), word(&[2, 1])]).unwrap();
        let out = enum_learn(&spec, &Alphabet::boolean(), &LearnerConfig::default()).unwrap();
        match out {
            EnumOutcome::Solved { formula, cost, stats } => {
                assert_eq!(formula, Formula::Atom(0));
                assert_eq!(cost, 1);
                assert!(stats.admitted == 0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn learns_next() {
        let spec = Specification::new(vec![word(&[0, 1])], vec![word(&[1, 0]), word(&[0, 0])]).unwrap();
        let out = enum_learn(&spec, &Alphabet::indexed(1).unwrap(), &LearnerConfig::default()).unwrap();
        assert_eq!(out.formula(), Some(&Formula::next(Formula::Atom(0))));
    }

    #[test]
    fn low_ceiling_returns_overfit() {
        let spec = Specification::new(vec![word(&[0, 1])], vec![word(&[1, 0]), word(&[0, 0])]).unwrap();
        let alphabet = Alphabet::indexed(1).unwrap();
        let cfg = LearnerConfig {
            ceiling: Some(2),
            ..LearnerConfig::default()
        };
        match enum_learn(&spec, &alphabet, &cfg).unwrap() {
            EnumOutcome::CeilingReached { formula, .. } => {
                assert_eq!(formula, overfit(&spec, &alphabet).unwrap());
                assert!(oracle::separates(&formula, &spec));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn noise_tolerance() {
        // p0 is wrong on exactly two of eight traces
        let p = vec![word(&[1]), word(&[1, 1]), word(&[1, 0]), word(&[0, 1])];
        let n = vec![word(&[0]), word(&[0, 0]), word(&[2]), word(&[1, 2, 2])];
        let spec = Specification::new(p, n).unwrap();
        let alphabet = Alphabet::boolean();
        let layout = Layout::new(&spec).unwrap();
        let cm = eval_formula(&Formula::Atom(0), &spec, &layout);
        assert_eq!(cm.error_count(&layout), 2);
        let noisy = LearnerConfig {
            noise: 0.25,
            ..LearnerConfig::default()
        };
        let out = enum_learn(&spec, &alphabet, &noisy).unwrap();
        assert_eq!(out.formula(), Some(&Formula::Atom(0)));
        let exact = enum_learn(&spec, &alphabet, &LearnerConfig::default()).unwrap();
        let f = exact.formula().unwrap();
        assert_ne!(f, &Formula::Atom(0));
        assert!(oracle::separates(f, &spec));
    }

    #[test]
    fn nnf_mode_uses_negated_atoms_only() {
        let spec = Specification::new(vec![word(&[0]), word(&[2])], vec![word(&[1]), word(&[3])]).unwrap();
        let cfg = LearnerConfig {
            nnf: true,
            until_free: true,
            ..LearnerConfig::default()
        };
        let out = enum_learn(&spec, &Alphabet::boolean(), &cfg).unwrap();
        assert_eq!(out.formula(), Some(&Formula::not(Formula::Atom(0))));
    }

    #[test]
    fn out_of_memory_is_reported() {
        let spec = Specification::new(
            vec![word(&[1, 2, 3, 0, 1]), word(&[2, 2, 1])],
            vec![word(&[1, 2, 3, 0, 2]), word(&[2, 2, 2])],
        )
        .unwrap();
        let cfg = LearnerConfig {
            budget: 200,
            ..LearnerConfig::default()
        };
        let out = enum_learn(&spec, &Alphabet::boolean(), &cfg).unwrap();
        assert!(matches!(out, EnumOutcome::OutOfMemory { .. }), "{out:?}");
    }

    #[test]
    fn rejects_oversized_input() {
        let p: Vec<Trace> = (0..40u64).map(|i| word(&[i & 3, i >> 2 & 3, i >> 4 & 3])).collect();
        let n: Vec<Trace> = (0..40u64).map(|i| word(&[i & 3, i >> 2 & 3, i >> 4 & 3, 1])).collect();
        let spec = Specification::new(p, n).unwrap();
        assert!(matches!(
            enum_learn(&spec, &Alphabet::boolean(), &LearnerConfig::default()),
            Err(Error::TooManyTraces { got: 80, limit: 64 })
        ));
    }

    #[test]
    fn parallel_and_sequential_agree() {
        let spec = Specification::new(
            vec![word(&[1, 2, 3, 0, 1]), word(&[2, 2, 1]), word(&[3, 1, 0, 0])],
            vec![word(&[1, 2, 3, 0, 2]), word(&[2, 2, 2]), word(&[0, 1])],
        )
        .unwrap();
        let alphabet = Alphabet::boolean();
        let mut runs = [true, false].map(|parallel| {
            let cfg = LearnerConfig {
                parallel,
                ..LearnerConfig::default()
            };
            let out = enum_learn(&spec, &alphabet, &cfg).unwrap();
            let mut stats = out.stats().clone();
            stats.clear_timings();
            (out.formula().cloned(), stats)
        });
        let (b, a) = (runs[1].clone(), &mut runs[0]);
        assert_eq!(*a, b);
        assert!(oracle::separates(a.0.as_ref().unwrap(), &spec));
    }
}
