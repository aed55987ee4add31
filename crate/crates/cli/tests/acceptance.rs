//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test --release -p ltlearn-cli --test acceptance`; pass
//! criterion numbers after `--` to run a subset.

use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, ExitCode};
use std::sync::OnceLock;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ltlearn::benchgen::{gen_samplebench, gen_simple, run_ruc_experiment, sweep_mask_bits, RucParams};
use ltlearn::bitsem::{
    cs_finally, cs_globally, cs_next, cs_not, cs_until, eval_on, finally_rounds, instrument, parse_row, render_row,
    row_mask, rounds_for_len, until_rounds, UntilStep, PROPAGATION_ROUNDS,
};
use ltlearn::cache::HashKind;
use ltlearn::dnc::{dnc_learn, SplitConfig, Strategy};
use ltlearn::enumerator::{enum_learn, EnumOutcome, LearnerConfig};
use ltlearn::formula::{overfit, parse_formula};
use ltlearn::oracle::{self, bruteforce_min, Fragment};
use ltlearn::trace::Character;
use ltlearn::{Alphabet, CostHomomorphism, Formula, Trace};
use ltlearn_cli::{cmd_masking, masking_spec, BenchRecord, LearnFlags, RunStats};

type Outcome = Result<String, String>;
type Criterion = (u32, &'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// 1 ------------------------------------------------------------------------

fn squeegee() -> (Alphabet, Trace) {
    let alphabet = Alphabet::new(["s", "q", "u", "e", "g"].map(String::from).to_vec()).unwrap();
    let ids: Vec<_> = "squeegee"
        .chars()
        .map(|c| alphabet.index_of(&c.to_string()).unwrap())
        .collect();
    (alphabet, Trace::word(&ids))
}

fn golden_vectors() -> Outcome {
    let (alphabet, tr) = squeegee();
    let g = Formula::atom(alphabet.index_of("g").unwrap());
    let row = |f: &Formula| render_row(eval_on(f, std::slice::from_ref(&tr))[0], 8, 8);

    let shifted = [
        "00000100", "00001000", "00010000", "00100000", "01000000", "10000000", "00000000", "00000000",
    ];
    let mut f = g.clone();
    for (n, want) in shifted.iter().enumerate() {
        ensure(row(&f) == *want, || format!("X^{n} g: {} != {want}", row(&f)))?;
        f = Formula::next(f);
    }

    let unions = [
        "00000100", "00001100", "00011100", "00111100", "01111100", "11111100", "11111100", "11111100",
    ];
    let (mut f, mut xn) = (g.clone(), g.clone());
    for (n, want) in unions.iter().enumerate() {
        ensure(row(&f) == *want, || format!("or of X^0..{n} g: {} != {want}", row(&f)))?;
        xn = Formula::next(xn);
        f = Formula::or(f, xn.clone());
    }

    let start = parse_row("0000000000000100");
    let mut states = Vec::new();
    let end = finally_rounds(start, rounds_for_len(16), |_, x| states.push(render_row(x, 16, 16)));
    let want = ["0000000000001100", "0000000000111100", "0000001111111100", "1111111111111100"];
    ensure(states == want, || format!("F chain {states:?}"))?;
    ensure(cs_finally(start) & row_mask(16) == end, || "full-width F differs".into())?;

    let (x, y) = (parse_row("11111110"), parse_row("00000001"));
    let mut steps = Vec::new();
    let out = until_rounds(x, y, rounds_for_len(8), |s| {
        let (x, y) = match s {
            UntilStep::Reach { x, y, .. } | UntilStep::Hold { x, y, .. } => (x, y),
        };
        steps.push((render_row(x, 8, 8), render_row(y, 8, 8)));
    });
    let want = [
        ("11111110", "00000011"),
        ("11111100", "00000011"),
        ("11111100", "00001111"),
        ("11110000", "00001111"),
        ("11110000", "11111111"),
    ];
    let got: Vec<(&str, &str)> = steps.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
    ensure(got == want, || format!("U chain {got:?}"))?;
    ensure(render_row(out, 8, 8) == "11111111" && cs_until(x, y) == out, || "U result".into())?;
    Ok("X^n g, or-chain, F chain (4 states), U chain (5 states) bit-exact".into())
}

// 2 ------------------------------------------------------------------------

fn naive_next(v: &[bool]) -> Vec<bool> {
    (0..v.len()).map(|i| i + 1 < v.len() && v[i + 1]).collect()
}

fn naive_finally(v: &[bool]) -> Vec<bool> {
    (0..v.len()).map(|i| v[i..].iter().any(|&b| b)).collect()
}

fn naive_globally(v: &[bool]) -> Vec<bool> {
    (0..v.len()).map(|i| v[i..].iter().all(|&b| b)).collect()
}

fn naive_until(a: &[bool], b: &[bool]) -> Vec<bool> {
    (0..a.len())
        .map(|i| (i..a.len()).any(|k| b[k] && a[i..k].iter().all(|&x| x)))
        .collect()
}

fn bits(row: u64, len: usize) -> Vec<bool> {
    (0..len).map(|j| row >> (63 - j) & 1 == 1).collect()
}

/// Every connective on every operand vector of every length up to 10.
fn kernels_exhaustive(max_len: usize) -> Result<u64, String> {
    let mut checked = 0u64;
    for len in 1..=max_len {
        let mask = row_mask(len);
        let row = |v: u64| v << (64 - len);
        for a in 0..1u64 << len {
            let x = row(a);
            let xv = bits(x, len);
            let unary = [
                ("not", cs_not(x, mask), xv.iter().map(|b| !b).collect::<Vec<_>>()),
                ("next", cs_next(x) & mask, naive_next(&xv)),
                ("finally", cs_finally(x), naive_finally(&xv)),
                ("globally", cs_globally(x, mask), naive_globally(&xv)),
            ];
            for (name, got, want) in unary {
                ensure(got & !mask == 0 || name == "next", || format!("{name} leaks past len {len}"))?;
                ensure(bits(got, len) == want, || format!("{name} on {a:0len$b}"))?;
                checked += 1;
            }
            for b in 0..1u64 << len {
                let y = row(b);
                let yv = bits(y, len);
                let and: Vec<bool> = xv.iter().zip(&yv).map(|(p, q)| *p && *q).collect();
                let or: Vec<bool> = xv.iter().zip(&yv).map(|(p, q)| *p || *q).collect();
                ensure(bits(x & y, len) == and && bits(x | y, len) == or, || format!("and/or at {len}"))?;
                let u = cs_until(x, y);
                ensure(u & !mask == 0, || format!("until leaks past len {len}"))?;
                ensure(bits(u, len) == naive_until(&xv, &yv), || {
                    format!("{a:0len$b} U {b:0len$b}")
                })?;
                checked += 3;
            }
        }
    }
    Ok(checked)
}

/// All formulae of uniform cost `1..=max` over `props` propositions.
fn formulae_up_to(max: usize, props: u16) -> Vec<Formula> {
    let mut by_cost: Vec<Vec<Formula>> = vec![Vec::new(); max + 1];
    by_cost[1] = (0..props).map(Formula::atom).collect();
    for c in 2..=max {
        let mut level = Vec::new();
        for f in &by_cost[c - 1] {
            level.push(Formula::not(f.clone()));
            level.push(Formula::next(f.clone()));
            level.push(Formula::finally(f.clone()));
            level.push(Formula::globally(f.clone()));
        }
        for a in 1..c - 1 {
            for x in &by_cost[a] {
                for y in &by_cost[c - 1 - a] {
                    level.push(Formula::and(x.clone(), y.clone()));
                    level.push(Formula::or(x.clone(), y.clone()));
                    level.push(Formula::until(x.clone(), y.clone()));
                }
            }
        }
        by_cost[c] = level;
    }
    by_cost.concat()
}

fn all_traces(max_len: usize, props: u32) -> Vec<Trace> {
    let chars = 1u64 << props;
    let mut out = vec![Trace::empty()];
    for len in 1..=max_len {
        for code in 0..chars.pow(len as u32) {
            out.push(Trace::new((0..len).map(|i| Character(code / chars.pow(i as u32) % chars)).collect()));
        }
    }
    out
}

fn agree(f: &Formula, traces: &[Trace]) -> Result<(), String> {
    for (tr, row) in traces.iter().zip(eval_on(f, traces)) {
        let want = oracle::truth_table(tr, f);
        if bits(row, tr.len()) != want || row & !row_mask(tr.len()) != 0 {
            return Err(format!("{f} on a length-{} trace", tr.len()));
        }
    }
    Ok(())
}

fn random_formula(rng: &mut ChaCha8Rng, budget: u32) -> Formula {
    if budget <= 1 || rng.gen_bool(0.15) {
        return Formula::atom(rng.gen_range(0..2));
    }
    let sub = |rng: &mut ChaCha8Rng| random_formula(rng, budget - 1);
    match rng.gen_range(0..7) {
        0 => Formula::not(sub(rng)),
        1 => Formula::next(sub(rng)),
        2 => Formula::finally(sub(rng)),
        3 => Formula::globally(sub(rng)),
        op => {
            let split = rng.gen_range(1..budget);
            let a = random_formula(rng, split);
            let b = random_formula(rng, budget - split);
            match op {
                4 => Formula::and(a, b),
                5 => Formula::or(a, b),
                _ => Formula::until(a, b),
            }
        }
    }
}

fn oracle_equivalence() -> Outcome {
    let kernels = kernels_exhaustive(10)?;

    let formulae = formulae_up_to(7, 2);
    let traces = all_traces(5, 2);
    for f in &formulae {
        agree(f, &traces)?;
    }
    let small = formulae_up_to(3, 2);
    let long = all_traces(10, 2);
    for f in &small {
        agree(f, &long)?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..100_000 {
        let budget = rng.gen_range(1..16);
        let f = random_formula(&mut rng, budget);
        let len = rng.gen_range(0..=63);
        let tr = Trace::new((0..len).map(|_| Character(rng.gen_range(0..4))).collect());
        agree(&f, std::slice::from_ref(&tr))?;
    }
    Ok(format!(
        "0 mismatches: {kernels} kernel cases (all operands, len <= 10); {} formulae (cost <= 7) x {} traces (len <= 5); {} formulae (cost <= 3) x {} traces (len <= 10); 1e5 random pairs (len <= 63)",
        formulae.len(),
        traces.len(),
        small.len(),
        long.len()
    ))
}

// 3 ------------------------------------------------------------------------

fn round_counts() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut inputs: Vec<(u64, u64)> = vec![(0, 0), (!0, !0), (0, !0), (!0, 0), (1, 1 << 63)];
    inputs.extend((0..1000).map(|_| (rng.gen(), rng.gen())));
    instrument::take_rounds();
    for &(x, y) in &inputs {
        let f = instrument::take_rounds();
        cs_finally(x);
        let fr = instrument::take_rounds();
        cs_until(x, y);
        let ur = instrument::take_rounds();
        cs_globally(x, !0);
        let gr = instrument::take_rounds();
        ensure(f == 0 && fr == 6 && ur == 6 && gr == 6, || {
            format!("rounds F={fr} U={ur} G={gr} on ({x:#x}, {y:#x})")
        })?;
    }
    let f = parse_formula("F p0 U G p1", &Alphabet::boolean()).unwrap();
    let traces: Vec<Trace> = (1..=63)
        .map(|l| Trace::new((0..l).map(|_| Character(rng.gen_range(0..4))).collect()))
        .collect();
    instrument::take_rounds();
    eval_on(&f, &traces);
    let total = instrument::take_rounds();
    ensure(total == 3 * 6 * traces.len() as u64, || format!("formula rounds {total}"))?;
    Ok(format!(
        "F, U and G run {PROPAGATION_ROUNDS} rounds on {} inputs and on traces of length 1..=63",
        inputs.len()
    ))
}

// 4 ------------------------------------------------------------------------

fn minimality() -> Outcome {
    let alphabet = Alphabet::boolean();
    let h = CostHomomorphism::uniform();
    let cfg = LearnerConfig::default();
    let mut costs = Vec::new();
    for seed in 0..50 {
        let spec = gen_simple(&alphabet, 4, 2, 5, seed).map_err(|e| e.to_string())?;
        let out = enum_learn(&spec, &alphabet, &cfg).map_err(|e| e.to_string())?;
        let f = out.formula().ok_or_else(|| format!("seed {seed}: {}", out.label()))?;
        let cost = f.cost(&h);
        ensure(oracle::separates(f, &spec), || format!("seed {seed}: {f} does not separate"))?;
        let brute = bruteforce_min(&spec, 2, &h, Fragment::default(), cost).map_err(|e| e.to_string())?;
        ensure(brute.cost(&h) == cost, || format!("seed {seed}: {f} vs {brute}"))?;
        costs.push(cost);
    }
    Ok(format!("50/50 costs equal brute force (mean {:.2})", costs.iter().sum::<u64>() as f64 / 50.0))
}

// 5, 9, 10 -----------------------------------------------------------------

const CORPUS_SEED: &str = "7";
const CORPUS_BUDGET: &str = "128M";

struct CorpusRuns {
    first: Vec<u8>,
    second: Vec<u8>,
    records: Vec<BenchRecord>,
}

fn corpus_run(out: &Path) -> Result<Vec<u8>, String> {
    let status = Command::new(env!("CARGO_BIN_EXE_ltlearn"))
        .args(["bench", "corpus", "--per-generator", "50", "--seed", CORPUS_SEED, "--budget", CORPUS_BUDGET])
        .args(["--single-thread", "--check-nodes", "--omit-timing", "--json"])
        .arg(out)
        .stdout(std::process::Stdio::null())
        .status()
        .map_err(|e| e.to_string())?;
    let bytes = std::fs::read(out).map_err(|e| format!("{e} (exit {status})"))?;
    Ok(bytes)
}

fn corpus() -> &'static Result<CorpusRuns, String> {
    static RUNS: OnceLock<Result<CorpusRuns, String>> = OnceLock::new();
    RUNS.get_or_init(|| {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let first = corpus_run(&dir.path().join("a.json"))?;
        let second = corpus_run(&dir.path().join("b.json"))?;
        let records = serde_json::from_slice(&first).map_err(|e| e.to_string())?;
        Ok(CorpusRuns { first, second, records })
    })
}

fn soundness_fuzz() -> Outcome {
    let runs = corpus().as_ref().map_err(Clone::clone)?;
    ensure(runs.records.len() == 200, || format!("{} records", runs.records.len()))?;
    let mut failures = Vec::new();
    let mut ratios = Vec::new();
    let mut ceiling_checks = 0;
    for (i, rec) in runs.records.iter().enumerate() {
        let g = rec.bench.generate().map_err(|e| format!("spec {i}: {e}"))?;
        let (spec, alphabet) = (&g.spec, &g.alphabet);
        ensure(spec.len() <= 512 && spec.max_len() <= 63, || format!("spec {i} outside desk scale"))?;
        let learned = rec
            .report
            .as_ref()
            .and_then(|r| r.formula.as_deref())
            .and_then(|t| parse_formula(t, alphabet).ok());
        match learned {
            Some(f) if oracle::separates(&f, spec) => {
                ratios.push(f.cost(&CostHomomorphism::uniform()) as f64 / overfit(spec, alphabet).unwrap().cost(&CostHomomorphism::uniform()) as f64);
            }
            _ => failures.push(format!(
                "{i} ({:?}): {}",
                rec.bench.generator,
                rec.report.as_ref().and_then(|r| r.error.clone()).unwrap_or_else(|| "not separating".into())
            )),
        }

        let cfg = LearnerConfig {
            max_traces: usize::MAX,
            ceiling: Some(1),
            parallel: false,
            ..LearnerConfig::default()
        };
        match enum_learn(spec, alphabet, &cfg).map_err(|e| e.to_string())? {
            EnumOutcome::CeilingReached { formula, .. } => {
                let all: Vec<Trace> = spec.traces().cloned().collect();
                let accepted = oracle::language_filter(&formula, &all);
                ensure(accepted == (0..spec.positives().len()).collect::<Vec<_>>(), || {
                    format!("spec {i}: overfit language differs from P")
                })?;
                ceiling_checks += 1;
            }
            other => return Err(format!("spec {i}: low ceiling gave {}", other.label())),
        }
    }
    ensure(failures.is_empty(), || format!("{} of 200 failed: {}", failures.len(), failures.join("; ")))?;
    Ok(format!(
        "200/200 oracle-verified (mean ratio {:.3}); {ceiling_checks} low-ceiling runs return L = P",
        ratios.iter().sum::<f64>() / ratios.len() as f64
    ))
}

fn node_soundness() -> Outcome {
    let runs = corpus().as_ref().map_err(Clone::clone)?;
    let (mut checked, mut violations) = (0, 0);
    for rec in &runs.records {
        if let Some(RunStats::Dnc(s)) = rec.report.as_ref().and_then(|r| r.stats.as_ref()) {
            checked += s.checked_nodes;
            violations += s.violations;
        }
    }
    ensure(checked > 0, || "no nodes checked".into())?;
    ensure(violations == 0, || format!("{violations} violations in {checked} nodes"))?;
    Ok(format!("{checked} recombination nodes oracle-checked, 0 violations"))
}

fn determinism() -> Outcome {
    let runs = corpus().as_ref().map_err(Clone::clone)?;
    ensure(runs.first == runs.second, || "reports differ between runs".into())?;
    Ok(format!("two single-thread corpus runs byte-identical ({} bytes)", runs.first.len()))
}

// 6 ------------------------------------------------------------------------

fn scaling() -> Outcome {
    let started = Instant::now();
    let sb = gen_samplebench(8, 4096, true, 6).map_err(|e| e.to_string())?;
    let spec = &sb.spec;
    let alphabet = Alphabet::boolean();
    ensure(spec.positives().len() >= 4096 && spec.negatives().len() >= 4096, || {
        format!("{}+{} traces", spec.positives().len(), spec.negatives().len())
    })?;
    let gen_s = started.elapsed().as_secs_f64();
    let h = CostHomomorphism::uniform();
    let overfit_cost = overfit(spec, &alphabet).unwrap().cost(&h);
    let mut parts = Vec::new();
    for strategy in [Strategy::Deterministic, Strategy::Random] {
        let t = Instant::now();
        let split = SplitConfig {
            strategy,
            seed: 6,
            check_nodes: false,
            ..SplitConfig::default()
        };
        let out = dnc_learn(spec, &alphabet, &LearnerConfig::default(), &split).map_err(|e| e.to_string())?;
        let secs = t.elapsed().as_secs_f64();
        ensure(oracle::separates(&out.formula, spec), || format!("{strategy:?} unsound"))?;
        let ratio = out.formula.cost(&h) as f64 / overfit_cost as f64;
        ensure(ratio < 1.0, || format!("{strategy:?} ratio {ratio}"))?;
        parts.push(format!("{strategy:?}: cost {} ratio {ratio:.2e} in {secs:.1}s", out.cost));
    }
    let total = started.elapsed().as_secs_f64();
    ensure(total < 600.0, || format!("took {total:.0}s"))?;
    Ok(format!(
        "{}+{} traces of length {} (generated in {gen_s:.1}s); {}",
        spec.positives().len(),
        spec.negatives().len(),
        spec.max_len(),
        parts.join("; ")
    ))
}

// 7 ------------------------------------------------------------------------

fn ruc_direction() -> Outcome {
    let cfg = LearnerConfig {
        budget: 256 << 20,
        ..LearnerConfig::default()
    };
    let report = run_ruc_experiment(&RucParams::default(), &cfg).map_err(|e| e.to_string())?;
    let precise_extra: Vec<f64> = report.runs.iter().filter(|r| r.precise).filter_map(|r| r.extra).collect();
    ensure(!precise_extra.is_empty() && precise_extra.iter().all(|&e| e == 0.0), || {
        format!("precise extra costs {precise_extra:?}")
    })?;
    let negative: Vec<_> = report.runs.iter().filter(|r| r.extra.is_some_and(|e| e < 0.0)).collect();
    ensure(negative.is_empty(), || format!("{} runs with negative extra cost", negative.len()))?;
    let mean = |kind: HashKind| {
        let xs: Vec<f64> = report
            .runs
            .iter()
            .filter(|r| !r.precise && r.hash == kind)
            .filter_map(|r| r.extra)
            .collect();
        let ooms = report.runs.iter().filter(|r| !r.precise && r.hash == kind && r.extra.is_none()).count();
        (xs.iter().sum::<f64>() / xs.len().max(1) as f64, xs.len(), ooms)
    };
    let (m, mn, mo) = mean(HashKind::MuellerStyle);
    let (f, fnn, fo) = mean(HashKind::FirstKPercent);
    ensure(m <= f, || format!("Mueller {m:.4} > FKP {f:.4}"))?;
    Ok(format!(
        "precise runs 0 extra ({}); Mueller {m:.4} over {mn} runs ({mo} oom) <= FKP {f:.4} over {fnn} runs ({fo} oom); none negative",
        precise_extra.len()
    ))
}

// 8 ------------------------------------------------------------------------

fn masking_shape() -> Outcome {
    let (spec, alphabet) = masking_spec(8, 24, 0).map_err(|e| e.to_string())?;
    let flags = LearnFlags {
        budget: 256 << 20,
        omit_timing: true,
        ..LearnFlags::default()
    };
    let report = cmd_masking(&spec, &alphabet, &flags).map_err(|e| e.to_string())?;
    let (u, b) = (&report.unmasked, &report.baseline);
    ensure(u.outcome == b.outcome && u.formula == b.formula && u.cost == b.cost, || {
        format!("k=0 {:?} differs from unmasked {:?}", b.formula, u.formula)
    })?;
    let ks: Vec<u32> = report.rows.iter().map(|r| r.k).collect();
    ensure(ks == sweep_mask_bits() && ks.len() == 26, || format!("sweep ks {ks:?}"))?;
    let last = report.rows.last().unwrap();
    ensure(last.k == 126 && matches!(last.outcome.as_str(), "overfit" | "oom"), || {
        format!("k=126 gave {}", last.outcome)
    })?;
    let trend: Vec<String> = report
        .rows
        .iter()
        .map(|r| match r.cost {
            Some(c) if r.outcome == "learned" => c.to_string(),
            _ => r.outcome.clone(),
        })
        .collect();
    Ok(format!(
        "k=0 matches unmasked (cost {:?}); 26 rows; k=126 {}; costs by k: {}",
        u.cost,
        last.outcome,
        trend.join(" ")
    ))
}

// --------------------------------------------------------------------------

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        (1, "golden vectors", golden_vectors),
        (2, "oracle equivalence", oracle_equivalence),
        (3, "propagation rounds", round_counts),
        (4, "precise-mode minimality", minimality),
        (5, "soundness and completeness fuzz", soundness_fuzz),
        (6, "high-cardinality scaling", scaling),
        (7, "hash degradation direction", ruc_direction),
        (8, "masking sweep shape", masking_shape),
        (9, "divide-and-conquer node soundness", node_soundness),
        (10, "determinism", determinism),
    ];
    let wanted: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (n, name, run) in criteria {
        if !wanted.is_empty() && !wanted.contains(&n) {
            continue;
        }
        let started = Instant::now();
        let result = panic::catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into()))
        });
        let secs = started.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("criterion {n:>2} ({name}): PASS [{secs:.1}s] {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {n:>2} ({name}): FAIL [{secs:.1}s] {detail}");
            }
        }
    }
    if failed > 0 {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
