//! Commands behind the `ltlearn` binary.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use ltlearn::benchgen::{
    fuzz_corpus, gen_samplebench, run_masking_sweep, run_ruc_experiment, sweep_mask_bits, BenchSpec, Generator,
    MaskRow, RucParams, RucReport,
};
use ltlearn::cache::{HashKind, HashScheme};
use ltlearn::dnc::{dnc_learn, DncStats, NodeLog, SplitConfig, Strategy};
use ltlearn::enumerator::{enum_learn, EnumOutcome, EnumStats, LearnerConfig};
use ltlearn::formula::{overfit, parse_formula, print_formula};
use ltlearn::oracle;
use ltlearn::trace::{format_spec, load_spec, save_spec};
use ltlearn::{Alphabet, Specification};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum StrategyArg {
    Det,
    Rand,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum HashArg {
    Mueller,
    Fkp,
}

/// Parses byte counts with an optional K, M or G suffix (powers of 1024).
pub fn parse_bytes(s: &str) -> Result<usize, String> {
    let s = s.trim();
    let (num, shift) = match s.chars().last().map(|c| c.to_ascii_uppercase()) {
        Some('K') => (&s[..s.len() - 1], 10),
        Some('M') => (&s[..s.len() - 1], 20),
        Some('G') => (&s[..s.len() - 1], 30),
        _ => (s, 0),
    };
    let n: usize = num.trim().parse().map_err(|e| format!("bad byte count `{s}`: {e}"))?;
    n.checked_shl(shift)
        .filter(|v| v >> shift == n)
        .ok_or_else(|| format!("byte count `{s}` overflows"))
}

/// Learner and splitting flags shared by every subcommand that learns.
#[derive(Clone, Debug, Args)]
pub struct LearnFlags {
    /// Largest specification sent to the enumerator directly.
    #[arg(long, global = true, default_value_t = 64)]
    pub window: usize,
    #[arg(long, global = true, value_enum, default_value_t = StrategyArg::Det)]
    pub strategy: StrategyArg,
    #[arg(long, global = true, value_enum, default_value_t = HashArg::Mueller)]
    pub hash: HashArg,
    /// Low fingerprint bits forced to zero.
    #[arg(long, global = true, default_value_t = 0, value_parser = clap::value_parser!(u32).range(0..=126))]
    pub mask_bits: u32,
    /// Negation only over atoms.
    #[arg(long, global = true)]
    pub nnf: bool,
    #[arg(long, global = true)]
    pub no_until: bool,
    /// Fraction of misclassified traces tolerated.
    #[arg(long, global = true, default_value_t = 0.0)]
    pub noise: f64,
    /// Cache budget per enumerator call, e.g. 512M.
    #[arg(long, global = true, default_value = "2G", value_parser = parse_bytes)]
    pub budget: usize,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Wall-clock limit per enumerator call, in seconds.
    #[arg(long, global = true)]
    pub timeout: Option<f64>,
    /// Sequential reference behaviour.
    #[arg(long, global = true)]
    pub single_thread: bool,
    /// Call the enumerator once, without splitting.
    #[arg(long, global = true)]
    pub no_dnc: bool,
    /// Oracle-check every divide-and-conquer node.
    #[arg(long, global = true)]
    pub check_nodes: bool,
    /// Fail unless the result re-parses and separates the input.
    #[arg(long, global = true)]
    pub verify: bool,
    /// Leave wall times out of reports.
    #[arg(long, global = true)]
    pub omit_timing: bool,
}

impl Default for LearnFlags {
    fn default() -> Self {
        LearnFlags {
            window: 64,
            strategy: StrategyArg::Det,
            hash: HashArg::Mueller,
            mask_bits: 0,
            nnf: false,
            no_until: false,
            noise: 0.0,
            budget: 2 << 30,
            seed: 0,
            timeout: None,
            single_thread: false,
            no_dnc: false,
            check_nodes: false,
            verify: false,
            omit_timing: false,
        }
    }
}

impl LearnFlags {
    pub fn learner(&self) -> LearnerConfig {
        LearnerConfig {
            nnf: self.nnf,
            until_free: self.no_until,
            hash: HashScheme::new(
                match self.hash {
                    HashArg::Mueller => HashKind::MuellerStyle,
                    HashArg::Fkp => HashKind::FirstKPercent,
                },
                self.mask_bits,
            ),
            budget: self.budget,
            noise: self.noise,
            timeout: self.timeout.map(Duration::from_secs_f64),
            parallel: !self.single_thread,
            ..LearnerConfig::default()
        }
    }

    pub fn split(&self) -> SplitConfig {
        SplitConfig {
            strategy: match self.strategy {
                StrategyArg::Det => Strategy::Deterministic,
                StrategyArg::Rand => Strategy::Random,
            },
            window: self.window,
            seed: self.seed,
            check_nodes: self.check_nodes,
            ..SplitConfig::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputInfo {
    /// SHA-256 of the normalized trace file.
    pub digest: String,
    pub positives: usize,
    pub negatives: usize,
    pub props: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub learner: LearnerConfig,
    pub split: SplitConfig,
    pub mode: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RunStats {
    Enum(EnumStats),
    Dnc(DncStats),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub input: InputInfo,
    pub config: ConfigEcho,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub outcome: Option<String>,
    pub formula: Option<String>,
    pub cost: Option<u64>,
    pub overfit_cost: Option<u64>,
    pub ratio: Option<f64>,
    /// Misclassified traces under the oracle.
    pub errors: Option<usize>,
    pub final_window: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_ms: Option<u64>,
    pub stats: Option<RunStats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace_log: Option<String>,
    #[serde(skip)]
    pub nodes: Vec<NodeLog>,
}

impl RunReport {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

pub fn digest(spec: &Specification, alphabet: &Alphabet) -> String {
    let text = format_spec(spec, alphabet).unwrap_or_default();
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Learns `spec` and checks the result with the oracle. Failures are
/// reported in the returned report rather than as errors.
pub fn learn_spec(spec: &Specification, alphabet: &Alphabet, flags: &LearnFlags) -> RunReport {
    let learner = flags.learner();
    let split = flags.split();
    let mode = if flags.no_dnc { "enum" } else { "dnc" };
    let mut report = RunReport {
        input: InputInfo {
            digest: digest(spec, alphabet),
            positives: spec.positives().len(),
            negatives: spec.negatives().len(),
            props: alphabet.len(),
        },
        config: ConfigEcho {
            learner: learner.clone(),
            split: split.clone(),
            mode: mode.into(),
        },
        status: "ok".into(),
        error: None,
        outcome: None,
        formula: None,
        cost: None,
        overfit_cost: None,
        ratio: None,
        errors: None,
        final_window: None,
        wall_ms: None,
        stats: None,
        trace_log: None,
        nodes: Vec::new(),
    };
    let started = Instant::now();
    let learned = if flags.no_dnc {
        enum_learn(spec, alphabet, &learner).map(|out| {
            let mut stats = out.stats().clone();
            if flags.omit_timing {
                stats.clear_timings();
            }
            report.outcome = Some(out.label().into());
            report.stats = Some(RunStats::Enum(stats));
            match out {
                EnumOutcome::Solved { formula, .. } | EnumOutcome::CeilingReached { formula, .. } => Some(formula),
                _ => None,
            }
        })
    } else {
        dnc_learn(spec, alphabet, &learner, &split).map(|out| {
            report.outcome = Some(if out.stats.splits > 0 { "split" } else { "solved" }.into());
            report.final_window = Some(out.final_window);
            report.stats = Some(RunStats::Dnc(out.stats));
            report.nodes = out.nodes;
            Some(out.formula)
        })
    };
    if !flags.omit_timing {
        report.wall_ms = Some(started.elapsed().as_millis() as u64);
    }
    let formula = match learned {
        Ok(Some(f)) => f,
        Ok(None) => {
            report.status = "failed".into();
            return report;
        }
        Err(e) => {
            report.status = "failed".into();
            report.error = Some(e.to_string());
            return report;
        }
    };
    let h = &learner.cost;
    let cost = formula.cost(h);
    report.cost = Some(cost);
    if let Ok(o) = overfit(spec, alphabet) {
        let oc = o.cost(h);
        report.overfit_cost = Some(oc);
        report.ratio = Some(cost as f64 / oc as f64);
    }
    let errors = oracle::error_count(&formula, spec);
    report.errors = Some(errors);
    let text = print_formula(&formula);
    if errors > learner.tolerance(spec.len()) {
        report.status = "unsound".into();
    }
    if flags.verify && parse_formula(&text, alphabet).ok().as_ref() != Some(&formula) {
        report.status = "unsound".into();
        report.error = Some("formula does not re-parse".into());
    }
    report.formula = Some(text);
    report
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_node_log(path: &Path, nodes: &[NodeLog]) -> Result<()> {
    let mut f = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    for n in nodes {
        writeln!(f, "{}", serde_json::to_string(n)?)?;
    }
    Ok(())
}

/// `learn FILE`.
pub fn cmd_learn(file: &Path, flags: &LearnFlags, json: Option<&Path>, trace_log: Option<&Path>) -> Result<RunReport> {
    let (spec, alphabet) = load_spec(file).with_context(|| format!("reading {}", file.display()))?;
    let mut report = learn_spec(&spec, &alphabet, flags);
    if let Some(path) = trace_log {
        write_node_log(path, &report.nodes)?;
        report.trace_log = Some(path.display().to_string());
    }
    if let Some(path) = json {
        write_json(path, &report)?;
    }
    Ok(report)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    #[serde(flatten)]
    pub bench: BenchSpec,
    pub positives: usize,
    pub negatives: usize,
    pub digest: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub formula: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub formula_cost: Option<u64>,
}

/// `gen`: writes the trace file and a JSON manifest next to it.
pub fn cmd_gen(bench: &BenchSpec, out: &Path, manifest: Option<&Path>) -> Result<Manifest> {
    let g = bench.generate()?;
    save_spec(&g.spec, &g.alphabet, out)?;
    let m = Manifest {
        bench: bench.clone(),
        positives: g.spec.positives().len(),
        negatives: g.spec.negatives().len(),
        digest: digest(&g.spec, &g.alphabet),
        formula_cost: g.formula.as_ref().map(|f| f.cost(&Default::default())),
        formula: g.formula.as_ref().map(print_formula),
    };
    let path = manifest.map(Path::to_path_buf).unwrap_or_else(|| manifest_path(out));
    write_json(&path, &m)?;
    Ok(m)
}

fn manifest_path(out: &Path) -> PathBuf {
    let mut p = out.as_os_str().to_owned();
    p.push(".json");
    PathBuf::from(p)
}

/// One CSV row of a benchmark sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub id: usize,
    pub generator: String,
    pub params: String,
    pub seed: u64,
    pub positives: usize,
    pub negatives: usize,
    pub status: String,
    pub cost: Option<u64>,
    pub overfit_cost: Option<u64>,
    pub ratio: Option<f64>,
    pub wall_ms: Option<u64>,
    pub formula: Option<String>,
}

/// Entry of a benchmark run: the generator and its learning report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub bench: BenchSpec,
    pub report: Option<RunReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

fn generator_name(g: &Generator) -> &'static str {
    match g {
        Generator::Simple { .. } => "simple",
        Generator::Guided { .. } => "guided",
        Generator::SampleBench { .. } => "samplebench",
        Generator::Hamming { .. } => "hamming",
    }
}

/// Generates and learns every benchmark in order.
pub fn run_benches(benches: &[BenchSpec], flags: &LearnFlags) -> (Vec<BenchRecord>, Vec<BenchRow>) {
    let mut records = Vec::new();
    let mut rows = Vec::new();
    for (id, b) in benches.iter().enumerate() {
        let params = serde_json::to_value(&b.generator)
            .map(|mut v| {
                if let Some(o) = v.as_object_mut() {
                    o.remove("generator");
                }
                v.to_string()
            })
            .unwrap_or_default();
        let mut row = BenchRow {
            id,
            generator: generator_name(&b.generator).into(),
            params,
            seed: b.seed,
            positives: 0,
            negatives: 0,
            status: String::new(),
            cost: None,
            overfit_cost: None,
            ratio: None,
            wall_ms: None,
            formula: None,
        };
        match b.generate() {
            Ok(g) => {
                let report = learn_spec(&g.spec, &g.alphabet, flags);
                row.positives = g.spec.positives().len();
                row.negatives = g.spec.negatives().len();
                row.status = report.status.clone();
                row.cost = report.cost;
                row.overfit_cost = report.overfit_cost;
                row.ratio = report.ratio;
                row.wall_ms = report.wall_ms;
                row.formula = report.formula.clone();
                records.push(BenchRecord {
                    bench: b.clone(),
                    report: Some(report),
                    error: None,
                });
            }
            Err(e) => {
                row.status = format!("generator error: {e}");
                records.push(BenchRecord {
                    bench: b.clone(),
                    report: None,
                    error: Some(e.to_string()),
                });
            }
        }
        rows.push(row);
    }
    (records, rows)
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Hamming sweep `l = 3, 6, ..., lmax`.
pub fn hamming_benches(lmax: usize, delta: usize, props: usize, seed: u64) -> Vec<BenchSpec> {
    (3..=lmax)
        .step_by(3)
        .enumerate()
        .map(|(j, l)| BenchSpec {
            generator: Generator::Hamming { props, l, delta },
            seed: seed.wrapping_add(j as u64),
        })
        .collect()
}

/// The fuzz corpus: `per_generator` specs from each generator.
pub fn corpus_benches(per_generator: usize, seed: u64) -> Vec<BenchSpec> {
    fuzz_corpus(per_generator, seed)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaskingReport {
    pub digest: String,
    pub traces: usize,
    pub fingerprint: String,
    /// Run without any mask.
    pub unmasked: MaskRow,
    /// Run with `k = 0`.
    pub baseline: MaskRow,
    pub rows: Vec<MaskRow>,
}

/// `experiment masking`: masks `k = 1, 6, ..., 126` plus the two references.
pub fn cmd_masking(spec: &Specification, alphabet: &Alphabet, flags: &LearnFlags) -> Result<MaskingReport> {
    let cfg = flags.learner();
    let split = flags.split();
    let layout = ltlearn::bitsem::Layout::new(spec)?;
    let mode = ltlearn::cache::Fingerprinter::new(spec, &layout, cfg.hash).mode();
    let mut unmasked_cfg = cfg.clone();
    unmasked_cfg.hash.mask_bits = 0;
    let strip = |mut rows: Vec<MaskRow>| {
        if flags.omit_timing {
            rows.iter_mut().for_each(|r| r.ms = None);
        }
        rows
    };
    let unmasked = strip(run_masking_sweep(spec, alphabet, &[0], &unmasked_cfg, &split)).remove(0);
    let baseline = strip(run_masking_sweep(spec, alphabet, &[0], &cfg, &split)).remove(0);
    let rows = strip(run_masking_sweep(spec, alphabet, &sweep_mask_bits(), &cfg, &split));
    Ok(MaskingReport {
        digest: digest(spec, alphabet),
        traces: spec.len(),
        fingerprint: format!("{mode:?}"),
        unmasked,
        baseline,
        rows,
    })
}

/// Default spec of the masking experiment.
pub fn masking_spec(i: usize, k: usize, seed: u64) -> Result<(Specification, Alphabet)> {
    let sb = gen_samplebench(i, k, true, seed)?;
    Ok((sb.spec, Alphabet::boolean()))
}

/// `experiment ruc`.
pub fn cmd_ruc(params: &RucParams, flags: &LearnFlags) -> Result<RucReport> {
    if flags.nnf || flags.no_until {
        log::info!("the experiment always learns U-free NNF formulae");
    }
    Ok(run_ruc_experiment(params, &flags.learner())?)
}

/// Fails if any report is not sound.
pub fn ensure_sound<'a>(reports: impl IntoIterator<Item = &'a RunReport>) -> Result<()> {
    let bad: Vec<&RunReport> = reports.into_iter().filter(|r| r.status == "unsound").collect();
    if !bad.is_empty() {
        bail!("{} unsound result(s), first: {:?}", bad.len(), bad[0].formula);
    }
    Ok(())
}
