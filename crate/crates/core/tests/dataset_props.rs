use fairtail::dataset::{write_interactions, Entry};
use fairtail::{
    build_matrix, generate_synthetic, parse_interactions, scale_ratings, Dialect,
    InteractionRecord, ScalingScheme, SyntheticConfig,
};
use proptest::prelude::*;

fn records() -> impl Strategy<Value = Vec<InteractionRecord>> {
    prop::collection::vec((0u8..12, 0u8..15, 1u64..50), 1..80).prop_map(|cells| {
        cells
            .into_iter()
            .map(|(u, i, c)| InteractionRecord::new(format!("u{u}"), format!("i{i}"), c))
            .collect()
    })
}

fn support(rows: &[Vec<Entry>]) -> Vec<Vec<usize>> {
    rows.iter()
        .map(|r| r.iter().map(|e| e.item).collect())
        .collect()
}

proptest! {
    #[test]
    fn parse_build_preserves_event_total(recs in records()) {
        let text = write_interactions(&recs);
        let parsed = parse_interactions(&text, &Dialect::default()).unwrap();
        let m = build_matrix(&parsed).unwrap();
        let input: u64 = recs.iter().map(|r| r.count).sum();
        prop_assert_eq!(m.total_count(), input);
        prop_assert_eq!(m.value_sum(), input as f64);
    }

    #[test]
    fn built_matrix_is_well_formed(recs in records()) {
        let m = build_matrix(&recs).unwrap();
        let mut pairs = std::collections::HashSet::new();
        for r in &recs {
            pairs.insert((r.user.clone(), r.item.clone()));
        }
        prop_assert_eq!(m.nnz(), pairs.len());
        prop_assert_eq!(m.rows().len(), m.num_users());
        for row in m.rows() {
            prop_assert!(row.windows(2).all(|w| w[0].item < w[1].item));
            prop_assert!(row.iter().all(|e| e.value > 0.0 && e.item < m.num_items()));
        }
    }

    #[test]
    fn scaling_keeps_support_and_range(recs in records()) {
        let m = build_matrix(&recs).unwrap();
        for scheme in [ScalingScheme::Raw, ScalingScheme::Log, ScalingScheme::MinMax] {
            let s = scale_ratings(&m, scheme);
            prop_assert_eq!(support(s.rows()), support(m.rows()));
            prop_assert!(s.rows().iter().flatten().all(|e| e.value.is_finite() && e.value > 0.0));
        }
        let mm = scale_ratings(&m, ScalingScheme::MinMax);
        prop_assert!(mm.rows().iter().flatten().all(|e| (1.0..=1000.0).contains(&e.value)));
    }
}

#[test]
fn synthetic_identical_across_thread_counts() {
    let cfg = SyntheticConfig {
        num_users: 300,
        num_items: 500,
        events_per_user: 40,
        zipf_exponent: 1.0,
        seed: 123,
    };
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| generate_synthetic(&cfg).unwrap())
    };
    let one = run(1);
    assert_eq!(one, run(3));
    assert_eq!(one, run(8));
}

/// Least-squares slope of log frequency against log rank.
fn log_log_slope(freqs: &[u64]) -> f64 {
    let pts: Vec<(f64, f64)> = freqs
        .iter()
        .enumerate()
        .filter(|(_, &f)| f > 0)
        .map(|(r, &f)| (((r + 1) as f64).ln(), (f as f64).ln()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

#[test]
fn synthetic_rank_frequency_slope_matches_exponent() {
    let cfg = SyntheticConfig {
        num_users: 500,
        num_items: 200,
        events_per_user: 400,
        zipf_exponent: 1.2,
        seed: 9,
    };
    let recs = generate_synthetic(&cfg).unwrap();
    let mut freqs = vec![0u64; cfg.num_items];
    for r in &recs {
        let rank: usize = r.item[1..].parse().unwrap();
        freqs[rank] += r.count;
    }
    // the 200 ranks are well populated at 200k draws
    assert!(freqs.iter().all(|&f| f > 50));
    let slope = log_log_slope(&freqs);
    assert!((slope + 1.2).abs() <= 0.2, "slope {slope}");
}

#[test]
fn synthetic_output_round_trips() {
    let cfg = SyntheticConfig {
        num_users: 10,
        num_items: 20,
        events_per_user: 50,
        zipf_exponent: 1.0,
        seed: 7,
    };
    let recs = generate_synthetic(&cfg).unwrap();
    let parsed = parse_interactions(&write_interactions(&recs), &Dialect::default()).unwrap();
    assert_eq!(parsed, recs);
    assert_eq!(build_matrix(&parsed).unwrap().num_users(), 10);
}
