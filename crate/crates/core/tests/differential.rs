use proptest::prelude::*;

use ltlearn::benchgen::gen_simple;
use ltlearn::bitsem::{eval_on, position_bit, row_mask};
use ltlearn::dnc::{dnc_learn, SplitConfig, Strategy as Split};
use ltlearn::enumerator::LearnerConfig;
use ltlearn::oracle;
use ltlearn::trace::Character;
use ltlearn::{Alphabet, Formula, Trace};

fn formula() -> impl Strategy<Value = Formula> {
    let leaf = (0u16..2).prop_map(Formula::atom);
    leaf.prop_recursive(6, 40, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(Formula::not),
            inner.clone().prop_map(Formula::next),
            inner.clone().prop_map(Formula::finally),
            inner.clone().prop_map(Formula::globally),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::and(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::or(a, b)),
            (inner.clone(), inner).prop_map(|(a, b)| Formula::until(a, b)),
        ]
    })
}

fn trace(max: usize) -> impl Strategy<Value = Trace> {
    prop::collection::vec(0u64..4, 0..=max).prop_map(|cs| Trace::new(cs.into_iter().map(Character).collect()))
}

proptest! {
    #[test]
    fn bit_parallel_matches_oracle(f in formula(), traces in prop::collection::vec(trace(63), 1..8)) {
        for (tr, row) in traces.iter().zip(eval_on(&f, &traces)) {
            prop_assert_eq!(row & !row_mask(tr.len()), 0);
            let want = oracle::truth_table(tr, &f);
            for (j, &w) in want.iter().enumerate() {
                prop_assert_eq!(row & position_bit(j) != 0, w, "{} at {}", f, j);
            }
        }
    }

    #[test]
    fn derived_identities(f in formula(), tr in trace(40)) {
        let t = std::slice::from_ref(&tr);
        let g = eval_on(&Formula::globally(f.clone()), t);
        let dual = eval_on(&Formula::not(Formula::finally(Formula::not(f.clone()))), t);
        prop_assert_eq!(g, dual);
        let fin = eval_on(&Formula::finally(f.clone()), t);
        let until = eval_on(&Formula::until(Formula::tt(), f), t);
        prop_assert_eq!(fin, until);
    }
}

#[test]
fn divide_and_conquer_is_sound_on_small_windows() {
    let alphabet = Alphabet::boolean();
    let cfg = LearnerConfig {
        budget: 32 << 20,
        parallel: false,
        ..LearnerConfig::default()
    };
    for seed in 0..12 {
        let spec = gen_simple(&alphabet, 40, 2, 10, seed).unwrap();
        for strategy in [Split::Deterministic, Split::Random] {
            let split = SplitConfig {
                strategy,
                window: 16,
                seed,
                check_nodes: true,
                ..SplitConfig::default()
            };
            let out = dnc_learn(&spec, &alphabet, &cfg, &split).unwrap();
            assert!(oracle::separates(&out.formula, &spec), "seed {seed} {strategy:?}");
            assert_eq!(out.stats.violations, 0);
            assert!(out.stats.splits > 0);
        }
    }
}
