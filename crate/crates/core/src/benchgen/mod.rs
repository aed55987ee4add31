//! Benchmark generators and experiment drivers.

mod guided;

use std::collections::HashSet;
use std::time::Instant;

use rand::distributions::WeightedIndex;
use rand::prelude::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use guided::GuidedSampler;

use crate::cache::{HashKind, HashScheme};
use crate::dnc::{dnc_learn, SplitConfig};
use crate::enumerator::{enum_learn, EnumOutcome, LearnerConfig};
use crate::formula::{parse_formula, print_formula, Formula};
use crate::trace::{hamming_ball, Alphabet, Character, Specification, Trace};
use crate::Error;

/// Draws attempts allowed per requested trace before giving up.
const ATTEMPTS_PER_TRACE: usize = 1000;

fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Number of traces over `alphabet` of each length in `[lo, hi]`.
fn trace_counts(alphabet: &Alphabet, lo: usize, hi: usize) -> Vec<f64> {
    let c = alphabet.character_count() as f64;
    (lo..=hi).map(|l| c.powi(l as i32)).collect()
}

fn uniform_trace(alphabet: &Alphabet, len: usize, rng: &mut impl Rng) -> Trace {
    let c = alphabet.character_count();
    Trace::new((0..len).map(|_| Character(rng.gen_range(0..c))).collect())
}

/// `2k` distinct traces drawn uniformly from all traces with length in
/// `[lo, hi]`, the first `k` positive.
pub fn gen_simple(alphabet: &Alphabet, k: usize, lo: usize, hi: usize, seed: u64) -> Result<Specification, Error> {
    if lo > hi || lo == 0 || k == 0 {
        return Err(Error::Generator(format!("bad parameters k={k}, lo={lo}, hi={hi}")));
    }
    if alphabet.len() > 32 {
        return Err(Error::Generator("alphabet too large for uniform sampling".into()));
    }
    let counts = trace_counts(alphabet, lo, hi);
    if ((2 * k) as f64) > counts.iter().sum::<f64>() {
        return Err(Error::Generator(format!("fewer than {} traces with length in [{lo}, {hi}]", 2 * k)));
    }
    let lengths = WeightedIndex::new(&counts).expect("positive weights");
    let mut rng = rng_for(seed);
    let mut seen = HashSet::new();
    let mut drawn = Vec::with_capacity(2 * k);
    let mut attempts = 0;
    while drawn.len() < 2 * k {
        attempts += 1;
        if attempts > ATTEMPTS_PER_TRACE * 2 * k {
            return Err(Error::Generator("rejection budget exhausted".into()));
        }
        let tr = uniform_trace(alphabet, lo + lengths.sample(&mut rng), &mut rng);
        if seen.insert(tr.clone()) {
            drawn.push(tr);
        }
    }
    let negatives = drawn.split_off(k);
    Specification::new(drawn, negatives)
}

/// `k` distinct traces satisfying `f` and `k` falsifying it, lengths in
/// `[lo, hi]`.
pub fn gen_guided(
    alphabet: &Alphabet,
    f: &Formula,
    k: usize,
    lo: usize,
    hi: usize,
    seed: u64,
) -> Result<Specification, Error> {
    let sampler = GuidedSampler::new(f, alphabet, lo, hi)?;
    for (verdict, side) in [(true, "positive"), (false, "negative")] {
        if !sampler.possible(verdict) {
            return Err(Error::Generator(format!("no {side} trace with length in [{lo}, {hi}]")));
        }
    }
    let mut rng = rng_for(seed);
    let mut sides: [Vec<Trace>; 2] = [Vec::new(), Vec::new()];
    for (side, verdict) in sides.iter_mut().zip([true, false]) {
        let mut seen = HashSet::new();
        let mut attempts = 0;
        while side.len() < k {
            attempts += 1;
            if attempts > ATTEMPTS_PER_TRACE * k {
                return Err(Error::Generator(format!(
                    "could not find {k} distinct traces with verdict {verdict}"
                )));
            }
            let tr = sampler.sample(verdict, &mut rng).expect("verdict is possible");
            if seen.insert(tr.clone()) {
                side.push(tr);
            }
        }
    }
    let [p, n] = sides;
    Specification::new(p, n)
}

/// `({tr}, HAMMING(tr, δ))` for a uniformly drawn `tr` of length `l`.
pub fn gen_hamming(alphabet: &Alphabet, l: usize, delta: usize, seed: u64) -> Result<Specification, Error> {
    if delta > l || l == 0 {
        return Err(Error::Generator(format!("need 0 < δ ≤ l, got δ={delta}, l={l}")));
    }
    let mut rng = rng_for(seed);
    let tr = uniform_trace(alphabet, l, &mut rng);
    let ball = hamming_ball(&tr, delta, alphabet);
    Specification::new(vec![tr], ball)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleBench {
    pub spec: Specification,
    pub seed_spec: Specification,
    pub formula: Formula,
    /// Uniform cost of `formula`, minimal for `seed_spec` among U-free NNF formulae.
    pub cost: u64,
}

/// Specs whose seed search needs more cache than this are skipped.
pub const SEED_BUDGET: usize = 64 << 20;

/// Learner used for the seed formula of a SampleBench instance.
pub fn seed_learner() -> LearnerConfig {
    LearnerConfig {
        nnf: true,
        until_free: true,
        budget: SEED_BUDGET,
        ..LearnerConfig::default()
    }
}

/// Seed spec `SIMPLE(𝔹, i, 2, 5)`, its minimal U-free NNF formula `φ`, and
/// `k` positive and `k` negative traces of length 63 separated by `φ`,
/// optionally joined with the seed spec.
///
/// Seeds whose spec has no U-free NNF solution below the overfit ceiling, or
/// whose formula is constant at length 63, are skipped by deriving a new seed.
pub fn gen_samplebench(i: usize, k: usize, conservative: bool, seed: u64) -> Result<SampleBench, Error> {
    if i == 0 || i > 8 {
        return Err(Error::Generator("SampleBench needs 1 ≤ i ≤ 8".into()));
    }
    let alphabet = Alphabet::boolean();
    let cfg = LearnerConfig {
        parallel: false,
        ..seed_learner()
    };
    let mut derive = rng_for(seed);
    for attempt in 0..64 {
        let s = if attempt == 0 { seed } else { derive.gen() };
        let seed_spec = gen_simple(&alphabet, i, 2, 5, s)?;
        let formula = match enum_learn(&seed_spec, &alphabet, &cfg)? {
            EnumOutcome::Solved { formula, .. } => formula,
            _ => continue,
        };
        let sampled = match gen_guided(&alphabet, &formula, k, 63, 63, s ^ 0x5a5a_5a5a) {
            Ok(sp) => sp,
            Err(Error::Generator(msg)) => {
                log::debug!("seed {s}: {msg}");
                continue;
            }
            Err(e) => return Err(e),
        };
        let spec = if conservative {
            join(&seed_spec, &sampled)?
        } else {
            sampled
        };
        return Ok(SampleBench {
            cost: formula.cost(&cfg.cost),
            spec,
            seed_spec,
            formula,
        });
    }
    Err(Error::Generator("no usable seed specification".into()))
}

/// Union of two specifications; traces of `extra` clashing with `base` are dropped.
pub fn join(base: &Specification, extra: &Specification) -> Result<Specification, Error> {
    let pos: HashSet<&Trace> = base.positives().iter().collect();
    let neg: HashSet<&Trace> = base.negatives().iter().collect();
    let p = base
        .positives()
        .iter()
        .chain(extra.positives().iter().filter(|t| !neg.contains(t)))
        .cloned()
        .collect();
    let n = base
        .negatives()
        .iter()
        .chain(extra.negatives().iter().filter(|t| !pos.contains(t)))
        .cloned()
        .collect();
    Specification::new(p, n)
}

/// A generator with its parameters.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "kebab-case")]
pub enum Generator {
    Simple {
        props: usize,
        k: usize,
        lo: usize,
        hi: usize,
    },
    Guided {
        props: usize,
        formula: String,
        k: usize,
        lo: usize,
        hi: usize,
    },
    SampleBench {
        i: usize,
        k: usize,
        conservative: bool,
    },
    Hamming {
        props: usize,
        l: usize,
        delta: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchSpec {
    #[serde(flatten)]
    pub generator: Generator,
    pub seed: u64,
}

/// A generated benchmark.
#[derive(Clone, Debug, PartialEq)]
pub struct Generated {
    pub spec: Specification,
    pub alphabet: Alphabet,
    /// Seed formula of SampleBench instances, or the guiding formula.
    pub formula: Option<Formula>,
}

impl BenchSpec {
    pub fn generate(&self) -> Result<Generated, Error> {
        let seed = self.seed;
        Ok(match &self.generator {
            Generator::Simple { props, k, lo, hi } => {
                let alphabet = Alphabet::indexed(*props)?;
                Generated {
                    spec: gen_simple(&alphabet, *k, *lo, *hi, seed)?,
                    alphabet,
                    formula: None,
                }
            }
            Generator::Guided {
                props,
                formula,
                k,
                lo,
                hi,
            } => {
                let alphabet = Alphabet::indexed(*props)?;
                let f = parse_formula(formula, &alphabet).map_err(|e| Error::Generator(e.to_string()))?;
                Generated {
                    spec: gen_guided(&alphabet, &f, *k, *lo, *hi, seed)?,
                    alphabet,
                    formula: Some(f),
                }
            }
            Generator::SampleBench { i, k, conservative } => {
                let sb = gen_samplebench(*i, *k, *conservative, seed)?;
                Generated {
                    spec: sb.spec,
                    alphabet: Alphabet::boolean(),
                    formula: Some(sb.formula),
                }
            }
            Generator::Hamming { props, l, delta } => {
                let alphabet = Alphabet::indexed(*props)?;
                Generated {
                    spec: gen_hamming(&alphabet, *l, *delta, seed)?,
                    alphabet,
                    formula: None,
                }
            }
        })
    }
}

/// Guiding formulae of the fuzz corpus.
const FUZZ_FORMULAE: [&str; 8] = [
    "F p0",
    "G(p0 | p1)",
    "p0 U p1",
    "X(p0 & F p1)",
    "F(p0 & X p1)",
    "G(p0 | X p1)",
    "!p1 U (p0 & p1)",
    "F G p0",
];

/// A mixed corpus of `4n` specifications, `n` per generator, each with at
/// most 512 traces of length at most 63.
pub fn fuzz_corpus(n: usize, seed: u64) -> Vec<BenchSpec> {
    let mut rng = rng_for(seed);
    let mut out = Vec::with_capacity(4 * n);
    for j in 0..n {
        let k = rng.gen_range(2..=64);
        let lo = rng.gen_range(1..=6);
        out.push(BenchSpec {
            generator: Generator::Simple {
                props: 2,
                k,
                lo,
                hi: rng.gen_range(lo + 4..=20),
            },
            seed: rng.gen(),
        });
        let lo = rng.gen_range(2..=20);
        out.push(BenchSpec {
            generator: Generator::Guided {
                props: 2,
                formula: FUZZ_FORMULAE[j % FUZZ_FORMULAE.len()].to_string(),
                k: rng.gen_range(2..=128),
                lo,
                hi: rng.gen_range(lo + 5..=63),
            },
            seed: rng.gen(),
        });
        out.push(BenchSpec {
            generator: Generator::SampleBench {
                i: rng.gen_range(2..=8),
                k: rng.gen_range(2..=96),
                conservative: rng.gen_bool(0.5),
            },
            seed: rng.gen(),
        });
        let delta = rng.gen_range(1..=2);
        out.push(BenchSpec {
            generator: Generator::Hamming {
                props: 2,
                l: if delta == 1 { rng.gen_range(3..=30) } else { rng.gen_range(3..=10) },
                delta,
            },
            seed: rng.gen(),
        });
    }
    out
}

/// One row of the masking sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaskRow {
    pub k: u32,
    pub outcome: String,
    pub formula: Option<String>,
    pub cost: Option<u64>,
    pub ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ms: Option<u64>,
}

/// `k = 1, 6, ..., 126`.
pub fn sweep_mask_bits() -> Vec<u32> {
    (1..=126).step_by(5).collect()
}

/// One learner run per mask width.
pub fn run_masking_sweep(
    spec: &Specification,
    alphabet: &Alphabet,
    ks: &[u32],
    cfg: &LearnerConfig,
    split: &SplitConfig,
) -> Vec<MaskRow> {
    let run = |&k: &u32| {
        let cfg = LearnerConfig {
            hash: HashScheme::new(cfg.hash.kind, k),
            ..cfg.clone()
        };
        let started = Instant::now();
        let res = dnc_learn(spec, alphabet, &cfg, split);
        let ms = Some(started.elapsed().as_millis() as u64);
        match res {
            Ok(out) => MaskRow {
                k,
                outcome: if out.stats.ceilings > 0 && out.stats.splits == 0 {
                    "overfit".into()
                } else {
                    "learned".into()
                },
                formula: Some(print_formula(&out.formula)),
                cost: Some(out.cost),
                ratio: Some(out.ratio),
                ms,
            },
            Err(Error::WindowExhausted { .. }) => MaskRow {
                k,
                outcome: "oom".into(),
                formula: None,
                cost: None,
                ratio: None,
                ms,
            },
            Err(e) => MaskRow {
                k,
                outcome: format!("error: {e}"),
                formula: None,
                cost: None,
                ratio: None,
                ms,
            },
        }
    };
    if cfg.parallel {
        ks.par_iter().map(run).collect()
    } else {
        ks.iter().map(run).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RucParams {
    pub specs: usize,
    pub i: usize,
    pub k: usize,
    pub seed: u64,
}

impl Default for RucParams {
    fn default() -> Self {
        RucParams {
            specs: 20,
            i: 8,
            k: 24,
            seed: 0,
        }
    }
}

/// Learning result for one spec under one hash.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RucRun {
    pub hash: HashKind,
    pub spec: usize,
    pub traces: usize,
    pub precise: bool,
    pub minimal: u64,
    pub cost: Option<u64>,
    /// `cost - minimal` relative to `minimal`; absent on OOM.
    pub extra: Option<f64>,
    pub outcome: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RucRow {
    pub hash: HashKind,
    pub traces: usize,
    pub runs: usize,
    pub avg_extra_cost: f64,
    pub oom_rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RucReport {
    pub runs: Vec<RucRun>,
    pub rows: Vec<RucRow>,
}

/// Learns conservative SampleBench specs, whose minimal cost is known, under
/// both hash schemes. The seed specs themselves are learned too, as the
/// precise-mode baseline.
pub fn run_ruc_experiment(params: &RucParams, cfg: &LearnerConfig) -> Result<RucReport, Error> {
    let mut rng = rng_for(params.seed);
    let seeds: Vec<u64> = (0..params.specs).map(|_| rng.gen()).collect();
    let benches: Vec<SampleBench> = seeds
        .iter()
        .map(|&s| gen_samplebench(params.i, params.k, true, s))
        .collect::<Result<_, _>>()?;
    let alphabet = Alphabet::boolean();
    let mut jobs = Vec::new();
    for (idx, sb) in benches.iter().enumerate() {
        for hash in [HashKind::MuellerStyle, HashKind::FirstKPercent] {
            jobs.push((idx, hash, &sb.seed_spec, sb.cost));
            jobs.push((idx, hash, &sb.spec, sb.cost));
        }
    }
    let run = |&(idx, hash, spec, minimal): &(usize, HashKind, &Specification, u64)| {
        let cfg = LearnerConfig {
            hash: HashScheme::new(hash, cfg.hash.mask_bits),
            nnf: true,
            until_free: true,
            parallel: false,
            ..cfg.clone()
        };
        let layout = crate::bitsem::Layout::new(spec)?;
        let precise = crate::cache::Fingerprinter::new(spec, &layout, cfg.hash).is_precise();
        let out = enum_learn(spec, &alphabet, &cfg)?;
        let cost = out.formula().map(|f| f.cost(&cfg.cost));
        Ok(RucRun {
            hash,
            spec: idx,
            traces: spec.len(),
            precise,
            minimal,
            cost,
            extra: cost.map(|c| (c as f64 - minimal as f64) / minimal as f64),
            outcome: out.label().into(),
        })
    };
    let runs: Vec<RucRun> = if cfg.parallel {
        jobs.par_iter().map(run).collect::<Result<_, Error>>()?
    } else {
        jobs.iter().map(run).collect::<Result<_, Error>>()?
    };
    let mut rows = Vec::new();
    for hash in [HashKind::MuellerStyle, HashKind::FirstKPercent] {
        let mut sizes: Vec<usize> = runs.iter().filter(|r| r.hash == hash).map(|r| r.traces).collect();
        sizes.sort_unstable();
        sizes.dedup();
        for traces in sizes {
            let group: Vec<&RucRun> = runs.iter().filter(|r| r.hash == hash && r.traces == traces).collect();
            let finished: Vec<f64> = group.iter().filter_map(|r| r.extra).collect();
            rows.push(RucRow {
                hash,
                traces,
                runs: group.len(),
                avg_extra_cost: if finished.is_empty() {
                    0.0
                } else {
                    finished.iter().sum::<f64>() / finished.len() as f64
                },
                oom_rate: (group.len() - finished.len()) as f64 / group.len() as f64,
            });
        }
    }
    Ok(RucReport { runs, rows })
}
