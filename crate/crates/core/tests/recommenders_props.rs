mod common;

use std::collections::HashSet;

use fairtail::recommenders::{fit, similarity, Algorithm, ModelState, RecommenderConfig};
use fairtail::{build_matrix, InteractionMatrix, InteractionRecord};
use proptest::prelude::*;

use common::{random_matrix, BruteKnn};

fn matrix_strategy() -> impl Strategy<Value = InteractionMatrix> {
    (2usize..12, 2usize..20, 0.05f64..0.8, any::<u64>())
        .prop_map(|(u, i, d, seed)| random_matrix(u, i, d, seed))
}

fn config_strategy() -> impl Strategy<Value = RecommenderConfig> {
    (
        prop::sample::select(Algorithm::ALL.to_vec()),
        1usize..8,
        1usize..6,
        1usize..12,
        any::<u64>(),
        any::<bool>(),
        any::<bool>(),
    )
        .prop_map(|(a, k, factors, n, seed, exclude, mp)| {
            let mut c = RecommenderConfig::new(a).with_n(n).with_seed(seed);
            c.k = k;
            c.factors = factors;
            c.epochs = 15;
            c.exclude_seen = exclude;
            c.mostpop_exclude_seen = mp;
            c
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn similarity_symmetric_and_bounded(m in matrix_strategy()) {
        for u in 0..m.num_users() {
            for v in 0..m.num_users() {
                let s = similarity(&m, u, v).unwrap();
                prop_assert!((0.0..=1.0).contains(&s));
                prop_assert_eq!(s, similarity(&m, v, u).unwrap());
            }
        }
    }

    #[test]
    fn recommendation_sets_satisfy_invariants(m in matrix_strategy(), cfg in config_strategy()) {
        let model = fit(&cfg, &m).unwrap();
        let recs = model.recommend_all(&cfg);
        prop_assert_eq!(recs.num_users(), m.num_users());
        let personal_exclusion = cfg.exclude_seen
            && (cfg.algorithm != Algorithm::MostPop || cfg.mostpop_exclude_seen);
        for (u, list) in recs.lists.iter().enumerate() {
            let candidates = if personal_exclusion {
                m.num_items() - m.row(u).len()
            } else {
                m.num_items()
            };
            prop_assert_eq!(list.len(), cfg.n.min(candidates));
            let distinct: HashSet<usize> = list.iter().map(|r| r.item).collect();
            prop_assert_eq!(distinct.len(), list.len());
            prop_assert!(list.windows(2).all(|w| w[0].score >= w[1].score));
            if personal_exclusion {
                prop_assert!(list.iter().all(|r| !m.contains(u, r.item)));
            }
        }
        prop_assert_eq!(&recs, &model.recommend_all_serial(&cfg));
    }

    #[test]
    fn nmf_factors_stay_non_negative(m in matrix_strategy(), seed in any::<u64>(), reg in 0.0f64..1.0) {
        let mut cfg = RecommenderConfig::new(Algorithm::Nmf).with_seed(seed);
        cfg.factors = 4;
        cfg.epochs = 20;
        cfg.reg = reg;
        let model = fit(&cfg, &m).unwrap();
        let ModelState::Nmf(s) = model.state() else { unreachable!() };
        prop_assert!(s.trace.iter().all(|t| t.min_factor >= 0.0));
        prop_assert!(s.final_objective() < s.initial_objective);
    }
}

#[test]
fn knn_matches_brute_force_across_k() {
    for (seed, k) in [(1u64, 1usize), (2, 3), (3, 10), (4, 40)] {
        let m = random_matrix(20, 30, 0.25, seed);
        let mut cfg = RecommenderConfig::new(Algorithm::UserKnn).with_n(7);
        cfg.k = k;
        let model = fit(&cfg, &m).unwrap();
        let oracle = BruteKnn::new(&m, k);
        let ModelState::UserKnn(state) = model.state() else {
            unreachable!()
        };
        assert_eq!(state.neighbors, oracle.neighbors);
        for u in 0..m.num_users() {
            for i in 0..m.num_items() {
                assert!((model.score(u, i).unwrap() - oracle.predict(u, i)).abs() < 1e-10);
            }
            let got: Vec<usize> = model.recommend(u, &cfg).iter().map(|r| r.item).collect();
            let want: Vec<usize> = oracle.top_n(u, 7, true).iter().map(|r| r.0).collect();
            assert_eq!(got, want);
        }
    }
}

#[test]
fn knn_single_co_rater_prediction() {
    // Only u1 rated i3; with k covering everyone the prediction is u1's rating.
    let m = build_matrix(&[
        InteractionRecord::new("u0", "i0", 2),
        InteractionRecord::new("u0", "i1", 1),
        InteractionRecord::new("u1", "i0", 5),
        InteractionRecord::new("u1", "i3", 7),
        InteractionRecord::new("u2", "i1", 4),
        InteractionRecord::new("u2", "i2", 4),
    ])
    .unwrap();
    let mut cfg = RecommenderConfig::new(Algorithm::UserKnn);
    cfg.k = 10;
    let model = fit(&cfg, &m).unwrap();
    let i3 = m.items().iter().position(|s| s == "i3").unwrap();
    assert_eq!(model.score(0, i3).unwrap(), 7.0);
}

#[test]
fn fit_is_deterministic_for_every_algorithm() {
    let m = random_matrix(15, 25, 0.3, 11);
    for a in Algorithm::ALL {
        let cfg = RecommenderConfig::new(a).with_seed(99);
        assert_eq!(fit(&cfg, &m).unwrap(), fit(&cfg, &m).unwrap(), "{a}");
    }
}

#[test]
fn different_seeds_change_nmf_and_random() {
    let m = random_matrix(15, 25, 0.3, 12);
    for a in [Algorithm::Nmf, Algorithm::Random] {
        let c1 = RecommenderConfig::new(a).with_seed(1);
        let c2 = RecommenderConfig::new(a).with_seed(2);
        assert_ne!(
            fit(&c1, &m).unwrap().recommend_all(&c1),
            fit(&c2, &m).unwrap().recommend_all(&c2),
            "{a}"
        );
    }
}

#[test]
fn parallel_and_serial_agree_under_thread_pools() {
    let m = random_matrix(40, 60, 0.2, 13);
    for a in Algorithm::ALL {
        let cfg = RecommenderConfig::new(a).with_seed(5);
        let model = fit(&cfg, &m).unwrap();
        let serial = model.recommend_all_serial(&cfg);
        for threads in [1, 2, 7] {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            assert_eq!(pool.install(|| model.recommend_all(&cfg)), serial, "{a}");
        }
    }
}

#[test]
fn random_is_uniform_over_unseen_items() {
    let mut recs: Vec<InteractionRecord> = (0..50)
        .map(|i| InteractionRecord::new("other", format!("i{i}"), 1))
        .collect();
    for i in [3, 7, 11, 19, 42] {
        recs.push(InteractionRecord::new("target", format!("i{i}"), 2));
    }
    let m = build_matrix(&recs).unwrap();
    let mut counts = vec![0u64; 50];
    for seed in 0..10_000u64 {
        let cfg = RecommenderConfig::new(Algorithm::Random)
            .with_seed(seed)
            .with_n(10);
        for r in fit(&cfg, &m).unwrap().recommend(1, &cfg) {
            counts[r.item] += 1;
        }
    }
    let unseen: Vec<u64> = (0..50)
        .filter(|&i| !m.contains(1, i))
        .map(|i| counts[i])
        .collect();
    assert_eq!(unseen.iter().sum::<u64>(), 100_000);
    let p = common::chi_square_uniform_p(&unseen);
    assert!(p > 0.001, "p = {p}");
}
