//! Invariants over randomly generated problems.

mod common;

use common::{random_file, random_problem, SMALL};
use mpsoc_dse::ga::{evolve, mutate_beg, mutate_three_step, GaConfig, Preset, SimEvaluator};
use mpsoc_dse::heuristics::Heuristic;
use mpsoc_dse::metrics::pusage;
use mpsoc_dse::model::{random_mapping, Mapping, Problem, ProblemFile};
use mpsoc_dse::simulator::{simulate, SimConfig};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn sim() -> SimConfig {
    SimConfig {
        frames: 4,
        warmup_frames: 1,
        ..SimConfig::default()
    }
}

/// Pinned genes keep their processor and free genes stay off reserved ones.
fn respects_pins(p: &Problem, m: &Mapping) -> bool {
    p.check_mapping(m).is_ok()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn json_round_trip(seed in any::<u64>()) {
        let f = random_file(&mut ChaCha8Rng::seed_from_u64(seed), &SMALL);
        let text = f.to_json();
        let back = ProblemFile::from_json(&text).unwrap();
        prop_assert_eq!(back.to_json(), text);
    }

    #[test]
    fn mapping_text_round_trip(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_problem(&mut rng, &SMALL);
        let m = random_mapping(&p, &mut rng);
        prop_assert_eq!(p.parse_mapping(&p.format_mapping(&m)).unwrap(), m);
    }

    #[test]
    fn simulation_is_deterministic(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_problem(&mut rng, &SMALL);
        let m = random_mapping(&p, &mut rng);
        let a = simulate(&p, &m, &sim()).unwrap();
        let b = simulate(&p, &m, &sim()).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn heuristics_give_valid_mappings(seed in any::<u64>()) {
        let p = random_problem(&mut ChaCha8Rng::seed_from_u64(seed), &SMALL);
        for h in [Heuristic::Mct, Heuristic::Met, Heuristic::MinMin, Heuristic::Orb] {
            let m = h.run(&p);
            prop_assert!(respects_pins(&p, &m), "{}", h.name());
        }
    }

    #[test]
    fn mutations_keep_mappings_valid(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_problem(&mut rng, &SMALL);
        let m = random_mapping(&p, &mut rng);
        let before = pusage(&p, &m).makespan();
        let beg = mutate_beg(&p, &m, &mut rng);
        prop_assert!(respects_pins(&p, &beg.mapping));
        prop_assert!(respects_pins(&p, &mutate_three_step(&p, &m, &mut rng)));
        // Only a regenerated mapping may end up with a larger makespan.
        if !matches!(beg.branch, mpsoc_dse::ga::BegBranch::Regenerated) {
            prop_assert!(pusage(&p, &beg.mapping).makespan() <= before);
        }
    }
}

#[test]
fn ga_results_are_valid_and_reproducible() {
    for seed in 0..6 {
        let p = random_problem(&mut ChaCha8Rng::seed_from_u64(seed), &SMALL);
        let eval = SimEvaluator {
            problem: &p,
            config: sim(),
        };
        for preset in [Preset::Beg, Preset::Eg, Preset::Ga3sm] {
            let cfg = GaConfig {
                max_generations: 6,
                stall_generations: 6,
                seed,
                ..GaConfig::preset(preset)
            };
            let (best, log) = evolve(&p, &cfg, &eval).unwrap();
            assert!(respects_pins(&p, &best));
            assert_eq!(log.best.len(), p.num_tasks());
            let (again, log2) = evolve(&p, &cfg, &eval).unwrap();
            assert_eq!(best, again);
            assert_eq!(log.records, log2.records);
            let obj = simulate(&p, &best, &sim()).unwrap().objective(p.objective_kind());
            assert_eq!(obj, log.best_objective);
        }
    }
}
