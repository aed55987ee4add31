//! Divide and conquer over specifications too large for one enumerator call.
//!
//! A node whose specification fits into the split window goes straight to the
//! enumerator; otherwise it is split, four sub-formulae are learned and
//! recombined as `(φ11 ∧ φ12) ∨ (φ21 ∧ φ22)`. When the enumerator runs out of
//! memory (or time) the window is halved, never grown again.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bitsem::accepts_each;
use crate::enumerator::{check_input, enum_learn, EnumOutcome, LearnerConfig};
use crate::formula::{overfit, Formula};
use crate::oracle;
use crate::trace::{Alphabet, Specification, Trace};
use crate::Error;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    #[default]
    #[serde(rename = "det")]
    Deterministic,
    #[serde(rename = "rand")]
    Random,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitConfig {
    pub strategy: Strategy,
    pub window: usize,
    pub seed: u64,
    pub min_window: usize,
    /// Re-check every node with the oracle.
    pub check_nodes: bool,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            strategy: Strategy::Deterministic,
            window: 64,
            seed: 0,
            min_window: 4,
            check_nodes: cfg!(debug_assertions),
        }
    }
}

impl SplitConfig {
    pub fn validate(&self) -> Result<(), Error> {
        if self.min_window < 2 {
            return Err(Error::Config("minimum window must be at least 2".into()));
        }
        if self.window < self.min_window {
            return Err(Error::Config(format!(
                "window {} below minimum {}",
                self.window, self.min_window
            )));
        }
        Ok(())
    }
}

/// One line of the D&C trace log.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeLog {
    pub id: String,
    pub parent: Option<String>,
    pub kind: String,
    pub window: usize,
    pub positives: usize,
    pub negatives: usize,
    pub outcome: String,
    pub cost: Option<u64>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DncStats {
    pub enum_calls: u64,
    pub splits: u64,
    pub halvings: u64,
    pub ceilings: u64,
    pub candidates: u64,
    pub admitted: u64,
    pub duplicates: u64,
    pub peak_bytes: usize,
    /// Nodes whose recombined formula failed the oracle check.
    pub violations: u64,
    pub checked_nodes: u64,
}

impl DncStats {
    fn merge(&mut self, o: &DncStats) {
        self.enum_calls += o.enum_calls;
        self.splits += o.splits;
        self.halvings += o.halvings;
        self.ceilings += o.ceilings;
        self.candidates += o.candidates;
        self.admitted += o.admitted;
        self.duplicates += o.duplicates;
        self.peak_bytes = self.peak_bytes.max(o.peak_bytes);
        self.violations += o.violations;
        self.checked_nodes += o.checked_nodes;
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DncOutcome {
    pub formula: Formula,
    pub cost: u64,
    pub overfit_cost: u64,
    /// `cost / overfit_cost`.
    pub ratio: f64,
    pub final_window: usize,
    pub stats: DncStats,
    pub nodes: Vec<NodeLog>,
}

struct Ctx<'a> {
    alphabet: &'a Alphabet,
    cfg: &'a LearnerConfig,
    split: &'a SplitConfig,
}

struct Learned {
    formula: Formula,
    window: usize,
    stats: DncStats,
    nodes: Vec<NodeLog>,
}

/// Learns a formula separating `spec`, splitting as needed.
pub fn dnc_learn(
    spec: &Specification,
    alphabet: &Alphabet,
    cfg: &LearnerConfig,
    split: &SplitConfig,
) -> Result<DncOutcome, Error> {
    split.validate()?;
    let probe = LearnerConfig {
        max_traces: usize::MAX,
        ..cfg.clone()
    };
    check_input(spec, alphabet, &probe)?;
    if spec.negatives().is_empty() {
        return Err(Error::Config("no negative traces".into()));
    }
    let ctx = Ctx { alphabet, cfg, split };
    let window = split.window.min(cfg.max_traces).max(split.min_window);
    let learned = learn(&ctx, spec, window, "r".into(), None, split.seed)?;
    let h = &cfg.cost;
    let overfit_cost = overfit(spec, alphabet)?.cost(h);
    let cost = learned.formula.cost(h);
    Ok(DncOutcome {
        ratio: cost as f64 / overfit_cost as f64,
        cost,
        overfit_cost,
        formula: learned.formula,
        final_window: learned.window,
        stats: learned.stats,
        nodes: learned.nodes,
    })
}

fn node(id: &str, parent: Option<&str>, kind: &str, window: usize, spec: &Specification) -> NodeLog {
    NodeLog {
        id: id.to_string(),
        parent: parent.map(str::to_string),
        kind: kind.to_string(),
        window,
        positives: spec.positives().len(),
        negatives: spec.negatives().len(),
        outcome: String::new(),
        cost: None,
    }
}

fn learn(
    ctx: &Ctx<'_>,
    spec: &Specification,
    window: usize,
    id: String,
    parent: Option<&str>,
    seed: u64,
) -> Result<Learned, Error> {
    let h = &ctx.cfg.cost;
    if spec.positives().is_empty() || spec.negatives().is_empty() {
        let formula = if spec.positives().is_empty() { Formula::ff() } else { Formula::tt() };
        let mut log = node(&id, parent, "degenerate", window, spec);
        log.outcome = if spec.positives().is_empty() { "false" } else { "true" }.into();
        log.cost = Some(formula.cost(h));
        return Ok(Learned {
            formula,
            window,
            stats: DncStats::default(),
            nodes: vec![log],
        });
    }
    let mut window = window;
    let mut stats = DncStats::default();
    let mut nodes = Vec::new();
    while spec.len() <= window {
        let mut log = node(&id, parent, "leaf", window, spec);
        let outcome = run_enum(ctx, spec, &mut stats)?;
        if let Some(f) = outcome.formula() {
            log.outcome = outcome.label().into();
            log.cost = Some(f.cost(h));
            nodes.push(log);
            let formula = f.clone();
            check(ctx, spec, &formula, &mut stats);
            return Ok(Learned {
                formula,
                window,
                stats,
                nodes,
            });
        }
        window = halve(window, ctx, &outcome, spec)?;
        stats.halvings += 1;
        log.outcome = format!("{}-halved", outcome.label());
        nodes.push(log);
    }
    let mut inner = match ctx.split.strategy {
        Strategy::Deterministic => det_split(ctx, spec, window, &id, parent, seed)?,
        Strategy::Random => rand_split(ctx, spec, window, &id, parent, seed)?,
    };
    inner.stats.merge(&stats);
    nodes.append(&mut inner.nodes);
    inner.nodes = nodes;
    Ok(inner)
}

fn run_enum(ctx: &Ctx<'_>, spec: &Specification, stats: &mut DncStats) -> Result<EnumOutcome, Error> {
    let out = enum_learn(spec, ctx.alphabet, ctx.cfg)?;
    let s = out.stats();
    stats.enum_calls += 1;
    stats.candidates += s.candidates;
    stats.admitted += s.admitted;
    stats.duplicates += s.duplicates;
    stats.peak_bytes = stats.peak_bytes.max(s.peak_bytes);
    if matches!(out, EnumOutcome::CeilingReached { .. }) {
        stats.ceilings += 1;
    }
    Ok(out)
}

fn halve(window: usize, ctx: &Ctx<'_>, outcome: &EnumOutcome, spec: &Specification) -> Result<usize, Error> {
    let next = window / 2;
    if next < ctx.split.min_window {
        return Err(Error::WindowExhausted {
            window,
            detail: format!(
                "{} on {}+{} traces after {} candidates",
                outcome.label(),
                spec.positives().len(),
                spec.negatives().len(),
                outcome.stats().candidates
            ),
        });
    }
    log::info!("{} at window {window}, halving", outcome.label());
    Ok(next)
}

fn check(ctx: &Ctx<'_>, spec: &Specification, f: &Formula, stats: &mut DncStats) {
    if !ctx.split.check_nodes {
        return;
    }
    stats.checked_nodes += 1;
    let errors = if ctx.cfg.noise > 0.0 {
        0
    } else {
        oracle::error_count(f, spec)
    };
    if errors > 0 {
        log::error!("node formula misclassifies {errors} traces");
        stats.violations += 1;
    }
}

/// Splits a slice in two, the first half taking the extra element.
pub fn halves<T: Clone>(xs: &[T]) -> (Vec<T>, Vec<T>) {
    let mid = xs.len().div_ceil(2);
    (xs[..mid].to_vec(), xs[mid..].to_vec())
}

/// Partitions `traces` by membership in `L(f)`.
fn partition(f: &Formula, traces: &[Trace]) -> (Vec<Trace>, Vec<Trace>) {
    let verdicts = accepts_each(f, traces);
    let (mut inside, mut outside) = (Vec::new(), Vec::new());
    for (t, ok) in traces.iter().zip(verdicts) {
        if ok { inside.push(t.clone()) } else { outside.push(t.clone()) }
    }
    (inside, outside)
}

fn sub(p: Vec<Trace>, n: Vec<Trace>) -> Specification {
    Specification::new(p, n).expect("sub-specification of a valid specification")
}

/// `a ∧ b`, folding the constant abbreviations.
pub fn conj(a: Formula, b: Formula) -> Formula {
    let (tt, ff) = (Formula::tt(), Formula::ff());
    if a == ff || b == ff {
        ff
    } else if a == tt {
        b
    } else if b == tt {
        a
    } else {
        Formula::and(a, b)
    }
}

/// `a ∨ b`, folding the constant abbreviations.
pub fn disj(a: Formula, b: Formula) -> Formula {
    let (tt, ff) = (Formula::tt(), Formula::ff());
    if a == tt || b == tt {
        tt
    } else if a == ff {
        b
    } else if b == ff {
        a
    } else {
        Formula::or(a, b)
    }
}

fn combine(
    ctx: &Ctx<'_>,
    spec: &Specification,
    mut log: NodeLog,
    parts: [Learned; 4],
) -> Learned {
    let [a, b, c, d] = parts;
    let mut stats = DncStats {
        splits: 1,
        ..DncStats::default()
    };
    let mut nodes = Vec::new();
    let window = [a.window, b.window, c.window, d.window].into_iter().min().unwrap();
    for part in [&a, &b, &c, &d] {
        stats.merge(&part.stats);
    }
    let formula = disj(conj(a.formula, b.formula), conj(c.formula, d.formula));
    check(ctx, spec, &formula, &mut stats);
    log.outcome = "split".into();
    log.cost = Some(formula.cost(&ctx.cfg.cost));
    nodes.push(log);
    for part in [a.nodes, b.nodes, c.nodes, d.nodes] {
        nodes.extend(part);
    }
    Learned {
        formula,
        window,
        stats,
        nodes,
    }
}

/// First and second half of a trace list.
pub type Halves = (Vec<Trace>, Vec<Trace>);

/// Halves `P` and `N` in load order.
pub fn det_split_specs(spec: &Specification) -> (Halves, Halves) {
    (halves(spec.positives()), halves(spec.negatives()))
}

fn det_split(
    ctx: &Ctx<'_>,
    spec: &Specification,
    window: usize,
    id: &str,
    parent: Option<&str>,
    seed: u64,
) -> Result<Learned, Error> {
    let log = node(id, parent, "det", window, spec);
    let ((p1, p2), (n1, n2)) = det_split_specs(spec);
    let child = |k: &str| format!("{id}.{k}");

    let f11 = learn(ctx, &sub(p1.clone(), n1.clone()), window, child("11"), Some(id), seed)?;
    let (n2_in, _) = partition(&f11.formula, &n2);
    let f12 = learn(ctx, &sub(p1, n2_in), f11.window, child("12"), Some(id), seed)?;
    let covered = conj(f11.formula.clone(), f12.formula.clone());
    let (_, p2_rest) = partition(&covered, &p2);
    let f21 = learn(ctx, &sub(p2_rest.clone(), n1), f12.window, child("21"), Some(id), seed)?;
    let (n2_in21, _) = partition(&f21.formula, &n2);
    let f22 = learn(ctx, &sub(p2_rest, n2_in21), f21.window, child("22"), Some(id), seed)?;
    Ok(combine(ctx, spec, log, [f11, f12, f21, f22]))
}

/// Balanced sample sizes `(|P0|, |N0|)` for a window.
pub fn sample_sizes(positives: usize, negatives: usize, window: usize) -> (usize, usize) {
    let n0 = negatives.min(window / 2);
    let p0 = positives.min(window - n0);
    let n0 = negatives.min(window - p0);
    (p0, n0)
}

/// Learns from a random balanced sample of at most `window` traces, halving
/// the window on failure. Returns the formula and the window that worked.
pub fn rand_aux(
    spec: &Specification,
    alphabet: &Alphabet,
    cfg: &LearnerConfig,
    split: &SplitConfig,
    window: usize,
    seed: u64,
) -> Result<(Formula, usize), Error> {
    let ctx = Ctx {
        alphabet,
        cfg,
        split,
    };
    let mut stats = DncStats::default();
    rand_aux_in(&ctx, spec, window, seed, &mut stats).map(|(f, w, _)| (f, w))
}

fn rand_aux_in(
    ctx: &Ctx<'_>,
    spec: &Specification,
    mut window: usize,
    seed: u64,
    stats: &mut DncStats,
) -> Result<(Formula, usize, Specification), Error> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let (np, nn) = sample_sizes(spec.positives().len(), spec.negatives().len(), window);
        let pick = |traces: &[Trace], k: usize, rng: &mut ChaCha8Rng| -> Vec<Trace> {
            let mut idx = sample(rng, traces.len(), k).into_vec();
            idx.sort_unstable();
            idx.into_iter().map(|i| traces[i].clone()).collect()
        };
        let p0 = pick(spec.positives(), np, &mut rng);
        let n0 = pick(spec.negatives(), nn, &mut rng);
        let sample_spec = sub(p0, n0);
        let outcome = run_enum(ctx, &sample_spec, stats)?;
        if let Some(f) = outcome.formula() {
            return Ok((f.clone(), window, sample_spec));
        }
        window = halve(window, ctx, &outcome, &sample_spec)?;
        stats.halvings += 1;
    }
}

fn rand_split(
    ctx: &Ctx<'_>,
    spec: &Specification,
    window: usize,
    id: &str,
    parent: Option<&str>,
    seed: u64,
) -> Result<Learned, Error> {
    let mut log = node(id, parent, "rand", window, spec);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let seeds: [u64; 4] = std::array::from_fn(|_| rng.gen());
    let mut aux_stats = DncStats::default();
    let (f11, window, sample_spec) = rand_aux_in(ctx, spec, window, seeds[0], &mut aux_stats)?;
    log.window = window;
    let mut aux_log = node(&format!("{id}.11"), Some(id), "sample", window, &sample_spec);
    aux_log.outcome = "solved".into();
    aux_log.cost = Some(f11.cost(&ctx.cfg.cost));
    check(ctx, &sample_spec, &f11, &mut aux_stats);

    let (p_in, p_out) = partition(&f11, spec.positives());
    let (n_in, n_out) = partition(&f11, spec.negatives());
    let s12 = sub(p_in, n_in.clone());
    let s21 = sub(p_out.clone(), n_out);
    let s22 = sub(p_out, n_in);
    let child = |k: &str| format!("{id}.{k}");
    let run = |s: &Specification, k: &str, seed: u64| learn(ctx, s, window, child(k), Some(id), seed);

    let (r12, (r21, r22)) = if ctx.cfg.parallel {
        rayon::join(
            || run(&s12, "12", seeds[1]),
            || rayon::join(|| run(&s21, "21", seeds[2]), || run(&s22, "22", seeds[3])),
        )
    } else {
        (run(&s12, "12", seeds[1]), (run(&s21, "21", seeds[2]), run(&s22, "22", seeds[3])))
    };
    let first = Learned {
        formula: f11,
        window,
        stats: aux_stats,
        nodes: vec![aux_log],
    };
    Ok(combine(ctx, spec, log, [first, r12?, r21?, r22?]))
}
