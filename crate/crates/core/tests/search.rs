use std::collections::BTreeSet;

use dnas_core::algorithms::{run, RunResult, SpeciesKey};
use dnas_core::experiment::call_seeds;
use dnas_core::plant::{bundled_datasets, SurrogatePlantParams};
use dnas_core::{Algorithm, Dataset, NasConfig};

fn data() -> Dataset {
    let full = bundled_datasets(&SurrogatePlantParams::default())
        .unwrap()
        .into_iter()
        .next()
        .unwrap();
    Dataset::new("head", full.inputs[..800].to_vec(), full.targets[..800].to_vec(), full.nominal(), 1.0).unwrap()
}

fn small(alg: Algorithm) -> NasConfig {
    let mut c = NasConfig::preset(alg);
    c.pop_size = 12;
    c.generations = 6;
    c.du_max = 8;
    c.dy_max = 8;
    c.max_nin_lay = 4;
    c.train.max_epochs = 15;
    c
}

fn without_clock(mut r: RunResult) -> RunResult {
    r.wall_clock_seconds = 0.0;
    r
}

#[test]
fn runs_replay_from_their_seed() {
    let d = data();
    for alg in Algorithm::ALL_NAS {
        let cfg = small(alg);
        let a = without_clock(run(&cfg, &d, call_seeds(9, 0)).unwrap());
        let b = without_clock(run(&cfg, &d, call_seeds(9, 0)).unwrap());
        assert_eq!(a, b, "{alg}");
        assert_eq!(a.trace, b.trace, "{alg}");
        let c = without_clock(run(&cfg, &d, call_seeds(9, 1)).unwrap());
        assert_ne!(a, c, "{alg}");
    }
}

#[test]
fn best_fitness_never_drops() {
    let d = data();
    for alg in Algorithm::ALL_NAS {
        for s in 0..3 {
            let r = run(&small(alg), &d, call_seeds(s, 0)).unwrap();
            assert_eq!(r.generations.len(), 7);
            assert!(r.generations.windows(2).all(|w| w[1].best_fitness >= w[0].best_fitness), "{alg} seed {s}");
            assert_eq!(r.generations.last().unwrap().best_fitness, r.best_record.fitness);
            assert!(r.best.validate().is_ok());
        }
    }
}

#[test]
fn dominated_generations_cross_within_species() {
    let d = data();
    let mut cfg = small(Algorithm::Dnas3);
    cfg.generations = 12;
    cfg.hm_best = 3;
    let mut dominated = 0;
    for s in 0..4 {
        let r = run(&cfg, &d, call_seeds(s, 0)).unwrap();
        for t in &r.trace {
            if t.dominated {
                dominated += 1;
                assert_eq!(t.p_cross, 1.0);
                assert!(t.crossover_species.iter().all(|(a, b)| a == b), "{:?}", t.crossover_species);
            } else {
                assert!(t.p_cross == cfg.p_cross || t.p_cross == 0.2);
            }
            if r.generations[t.generation].dominated {
                let mut per_species = std::collections::BTreeMap::new();
                for k in &t.survivors {
                    *per_species.entry(k).or_insert(0) += 1;
                }
                assert!(per_species.values().all(|&n| n <= cfg.hm_best));
            } else {
                assert_eq!(t.survivors.len(), cfg.pop_size);
            }
        }
    }
    assert!(dominated > 0, "no generation was dominated");
}

#[test]
fn hybrid_population_holds_one_member_per_species() {
    let d = data();
    let cfg = small(Algorithm::Dnas4);
    for s in 0..2 {
        let r = run(&cfg, &d, call_seeds(s, 0)).unwrap();
        assert!(r.best_trainer.is_some());
        for t in &r.trace {
            let unique: BTreeSet<&SpeciesKey> = t.survivors.iter().collect();
            assert_eq!(unique.len(), t.survivors.len(), "generation {}", t.generation);
            assert!(t.survivors.iter().all(|k| matches!(k, SpeciesKey::FullArchitecture { .. })));
            assert!(t.survivors.len() <= cfg.pop_size);
        }
    }
}

#[test]
fn fixed_delays_stay_fixed_in_dnas1() {
    let r = run(&small(Algorithm::Dnas1), &data(), call_seeds(3, 0)).unwrap();
    assert_eq!((r.best.du, r.best.dy), (5, 5));
    let mut cfg = small(Algorithm::Dnas1);
    cfg.du = None;
    assert!(run(&cfg, &data(), call_seeds(3, 0)).is_err());
}
