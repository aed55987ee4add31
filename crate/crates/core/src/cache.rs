//! Cost-indexed language cache with relaxed uniqueness admission.
//!
//! Characteristic matrices live in one flat arena; entries of equal cost are
//! contiguous because admission proceeds level by level. Admission is decided
//! by a 126-bit fingerprint. The fingerprint is exact whenever the distinct
//! suffixes of the specification fit into it, otherwise it is a hash and two
//! different matrices may collide (the second is then dropped).

use std::collections::HashSet;
use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::bitsem::{position_bit, Layout};
use crate::formula::{Connective, Formula, PropId};
use crate::trace::{Specification, SuffixTable};

pub const FINGERPRINT_BITS: u32 = 126;
const FINGERPRINT_MASK: u128 = (1 << FINGERPRINT_BITS) - 1;

/// 126 significant bits; the top two are always clear.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Fingerprint(u128);

impl Fingerprint {
    pub fn new(bits: u128) -> Self {
        Fingerprint(bits & FINGERPRINT_MASK)
    }

    pub fn bits(self) -> u128 {
        self.0
    }

    /// Clears the `k` least significant bits.
    pub fn masked(self, k: u32) -> Self {
        match k {
            0 => self,
            k if k >= FINGERPRINT_BITS => Fingerprint(0),
            k => Fingerprint(self.0 & !((1u128 << k) - 1)),
        }
    }
}

impl fmt::Display for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:032x}", self.0)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HashKind {
    #[default]
    MuellerStyle,
    FirstKPercent,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HashScheme {
    pub kind: HashKind,
    /// Number of low fingerprint bits forced to zero, at most 126.
    pub mask_bits: u32,
}

impl HashScheme {
    pub fn new(kind: HashKind, mask_bits: u32) -> Self {
        HashScheme {
            kind,
            mask_bits: mask_bits.min(FINGERPRINT_BITS),
        }
    }
}

/// How a [`Fingerprinter`] maps matrices to fingerprints.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FingerprintMode {
    /// All live bits, concatenated.
    Identity,
    /// One bit per distinct suffix.
    Gather,
    /// Lossy.
    Hashed(HashKind),
}

impl FingerprintMode {
    pub fn is_precise(self) -> bool {
        !matches!(self, FingerprintMode::Hashed(_))
    }
}

/// fmix64 finalizer.
#[inline]
fn fmix64(mut k: u64) -> u64 {
    k ^= k >> 33;
    k = k.wrapping_mul(0xff51_afd7_ed55_8ccd);
    k ^= k >> 33;
    k = k.wrapping_mul(0xc4ce_b9fe_1a85_ec53);
    k ^ (k >> 33)
}

/// Per-word avalanche mix, folded into two lanes by multiply-xor.
pub fn mueller_style(rows: &[u64]) -> u128 {
    const K1: u64 = 0x9e37_79b9_7f4a_7c15;
    const K2: u64 = 0xd6e8_feb8_6659_fd93;
    let mut a = 0x243f_6a88_85a3_08d3u64;
    let mut b = 0x1319_8a2e_0370_7344u64;
    for (i, &w) in rows.iter().enumerate() {
        let h = fmix64(w ^ (i as u64).wrapping_mul(K1));
        a = (a ^ h).wrapping_mul(K1).rotate_left(27);
        b = (b ^ h.rotate_left(32)).wrapping_mul(K2).rotate_left(31);
    }
    let hi = fmix64(a ^ (rows.len() as u64));
    let lo = fmix64(b ^ hi);
    ((hi as u128) << 64 | lo as u128) & FINGERPRINT_MASK
}

/// Bits taken from the front of every row by the first-k-percent scheme.
pub fn fkp_bits_per_row(rows: usize) -> u32 {
    if rows == 0 {
        return 0;
    }
    let b = (FINGERPRINT_BITS as f64 / rows as f64).round() as u32;
    b.clamp(1, 64)
}

/// Leading bits of each row, concatenated and cut at 126 bits.
pub fn first_k_percent(rows: &[u64]) -> u128 {
    let b = fkp_bits_per_row(rows.len());
    let mut acc = 0u128;
    let mut used = 0u32;
    for &w in rows {
        if used >= FINGERPRINT_BITS {
            break;
        }
        let take = b.min(FINGERPRINT_BITS - used);
        let chunk = if take == 64 { w } else { w >> (64 - take) };
        acc = (acc << take) | chunk as u128;
        used += take;
    }
    acc << (FINGERPRINT_BITS - used)
}

/// Computes fingerprints for matrices over one specification.
#[derive(Clone, Debug)]
pub struct Fingerprinter {
    mode: FingerprintMode,
    mask_bits: u32,
    lens: Vec<u32>,
    /// `(row, bit)` per distinct suffix, used in gather mode.
    gather: Vec<(u32, u64)>,
}

impl Fingerprinter {
    pub fn new(spec: &Specification, layout: &Layout, scheme: HashScheme) -> Self {
        let lens: Vec<u32> = layout.lens().iter().map(|&l| l as u32).collect();
        let mut gather = Vec::new();
        let mode = if layout.live_bits() <= FINGERPRINT_BITS as usize {
            FingerprintMode::Identity
        } else {
            let table = SuffixTable::new(spec);
            if table.len() <= FINGERPRINT_BITS as usize {
                gather = table
                    .representatives()
                    .iter()
                    .map(|&(row, pos)| (row as u32, position_bit(pos)))
                    .collect();
                FingerprintMode::Gather
            } else {
                FingerprintMode::Hashed(scheme.kind)
            }
        };
        Fingerprinter {
            mode,
            mask_bits: scheme.mask_bits.min(FINGERPRINT_BITS),
            lens,
            gather,
        }
    }

    pub fn mode(&self) -> FingerprintMode {
        self.mode
    }

    pub fn is_precise(&self) -> bool {
        self.mode.is_precise() && self.mask_bits == 0
    }

    pub fn fingerprint(&self, rows: &[u64]) -> Fingerprint {
        let raw = match self.mode {
            FingerprintMode::Identity => {
                let mut acc = 0u128;
                for (&w, &len) in rows.iter().zip(&self.lens) {
                    if len > 0 {
                        acc = (acc << len) | (w >> (64 - len)) as u128;
                    }
                }
                acc
            }
            FingerprintMode::Gather => self.gather.iter().fold(0u128, |acc, &(row, bit)| {
                (acc << 1) | (rows[row as usize] & bit != 0) as u128
            }),
            FingerprintMode::Hashed(HashKind::MuellerStyle) => mueller_style(rows),
            FingerprintMode::Hashed(HashKind::FirstKPercent) => first_k_percent(rows),
        };
        Fingerprint::new(raw).masked(self.mask_bits)
    }
}

pub type EntryId = u32;

/// How to rebuild the formula of a cache entry.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Record {
    Atom(PropId),
    Unary(Connective, EntryId),
    Binary(Connective, EntryId, EntryId),
}

impl Record {
    /// Builds the formula, resolving children through `lookup`.
    pub fn build(&self, lookup: impl Fn(EntryId) -> Formula) -> Formula {
        match *self {
            Record::Atom(p) => Formula::Atom(p),
            Record::Unary(op, a) => {
                let a = lookup(a);
                match op {
                    Connective::Not => Formula::not(a),
                    Connective::Next => Formula::next(a),
                    Connective::Finally => Formula::finally(a),
                    Connective::Globally => Formula::globally(a),
                    _ => panic!("{op:?} is not unary"),
                }
            }
            Record::Binary(op, a, b) => {
                let (a, b) = (lookup(a), lookup(b));
                match op {
                    Connective::And => Formula::and(a, b),
                    Connective::Or => Formula::or(a, b),
                    Connective::Until => Formula::until(a, b),
                    _ => panic!("{op:?} is not binary"),
                }
            }
        }
    }
}

/// Admission would exceed the memory budget.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OutOfMemory {
    pub bytes: usize,
    pub budget: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelStats {
    pub cost: u64,
    pub offered: u64,
    pub admitted: u64,
    pub duplicates: u64,
    pub bytes: usize,
}

/// View of one stored entry.
#[derive(Clone, Copy, Debug)]
pub struct CacheEntry<'a> {
    pub id: EntryId,
    pub cm: &'a [u64],
    pub record: Record,
    pub cost: u64,
}

pub struct LanguageCache {
    rows: usize,
    fingerprinter: Fingerprinter,
    arena: Vec<u64>,
    records: Vec<Record>,
    costs: Vec<u64>,
    /// `(cost, first id, end id)`, ascending by cost.
    buckets: Vec<(u64, EntryId, EntryId)>,
    seen: HashSet<Fingerprint>,
    bytes: usize,
    budget: usize,
    levels: Vec<LevelStats>,
}

impl LanguageCache {
    pub fn new(rows: usize, fingerprinter: Fingerprinter, budget: usize) -> Self {
        LanguageCache {
            rows,
            fingerprinter,
            arena: Vec::new(),
            records: Vec::new(),
            costs: Vec::new(),
            buckets: Vec::new(),
            seen: HashSet::new(),
            bytes: 0,
            budget,
            levels: Vec::new(),
        }
    }

    pub fn entry_bytes(&self) -> usize {
        self.rows * 8 + 16
    }

    pub fn fingerprinter(&self) -> &Fingerprinter {
        &self.fingerprinter
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn bytes(&self) -> usize {
        self.bytes
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn distinct_fingerprints(&self) -> usize {
        self.seen.len()
    }

    /// Cost currently being filled, if any.
    pub fn frontier(&self) -> Option<u64> {
        self.levels.last().map(|l| l.cost)
    }

    pub fn levels(&self) -> &[LevelStats] {
        &self.levels
    }

    pub fn contains(&self, fp: Fingerprint) -> bool {
        self.seen.contains(&fp)
    }

    /// Opens the bucket for `cost`, freezing everything cheaper.
    pub fn begin_level(&mut self, cost: u64) {
        if let Some(frontier) = self.frontier() {
            assert!(cost > frontier, "cost levels must increase");
        }
        let next = self.records.len() as EntryId;
        self.buckets.push((cost, next, next));
        self.levels.push(LevelStats {
            cost,
            ..LevelStats::default()
        });
    }

    /// Counts a candidate rejected before reaching [`try_admit`](Self::try_admit).
    pub fn note_duplicate(&mut self) {
        let level = self.levels.last_mut().expect("no open level");
        level.offered += 1;
        level.duplicates += 1;
    }

    /// Stores `cm` unless its fingerprint was seen before.
    pub fn try_admit(&mut self, cm: &[u64], record: Record) -> Result<bool, OutOfMemory> {
        let fp = self.fingerprinter.fingerprint(cm);
        self.try_admit_with(fp, cm, record)
    }

    /// As [`try_admit`](Self::try_admit) with a precomputed fingerprint.
    pub fn try_admit_with(&mut self, fp: Fingerprint, cm: &[u64], record: Record) -> Result<bool, OutOfMemory> {
        debug_assert_eq!(cm.len(), self.rows);
        let level = self.levels.last_mut().expect("no open level");
        level.offered += 1;
        if self.seen.contains(&fp) {
            level.duplicates += 1;
            return Ok(false);
        }
        let need = self.bytes + self.rows * 8 + 16;
        if need > self.budget {
            return Err(OutOfMemory {
                bytes: need,
                budget: self.budget,
            });
        }
        self.seen.insert(fp);
        self.arena.extend_from_slice(cm);
        self.records.push(record);
        let bucket = self.buckets.last_mut().unwrap();
        self.costs.push(bucket.0);
        bucket.2 += 1;
        self.bytes = need;
        level.admitted += 1;
        level.bytes = self.bytes;
        Ok(true)
    }

    /// Ids of the entries of cost `c`.
    pub fn bucket(&self, c: u64) -> Range<EntryId> {
        match self.buckets.binary_search_by_key(&c, |b| b.0) {
            Ok(i) => self.buckets[i].1..self.buckets[i].2,
            Err(_) => 0..0,
        }
    }

    pub fn entries_of_cost(&self, c: u64) -> impl Iterator<Item = CacheEntry<'_>> + '_ {
        self.bucket(c).map(move |id| self.entry(id))
    }

    pub fn cm(&self, id: EntryId) -> &[u64] {
        let start = id as usize * self.rows;
        &self.arena[start..start + self.rows]
    }

    pub fn entry(&self, id: EntryId) -> CacheEntry<'_> {
        CacheEntry {
            id,
            cm: self.cm(id),
            record: self.records[id as usize],
            cost: self.costs[id as usize],
        }
    }

    /// Largest cost with a non-empty bucket.
    pub fn max_nonempty_cost(&self) -> Option<u64> {
        self.buckets.iter().rev().find(|b| b.2 > b.1).map(|b| b.0)
    }

    pub fn reconstruct(&self, id: EntryId) -> Formula {
        self.records[id as usize].build(|child| {
            assert!(child < id, "dangling child {child} of entry {id}");
            self.reconstruct(child)
        })
    }
}
