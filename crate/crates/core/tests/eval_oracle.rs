//! Metric implementations against naive reference computations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use prge_core::eval::{
    auc, classify, filtered_mean_rank, fit_thresholds, threshold_accuracy, RankedList,
};

/// Brute-force filtered ranks: for each noisy triple, sort the clean triples
/// plus itself and scan for its position.
fn oracle_filtered(energies: &[f64], labels: &[bool]) -> (f64, f64) {
    let mut rank_sum = 0.0;
    let mut reciprocal_sum = 0.0;
    let mut noisy = 0usize;
    for i in 0..energies.len() {
        if !labels[i] {
            continue;
        }
        let mut pool: Vec<usize> = (0..energies.len())
            .filter(|&j| j == i || !labels[j])
            .collect();
        pool.sort_by(|&a, &b| {
            energies[b]
                .partial_cmp(&energies[a])
                .unwrap()
                .then_with(|| a.cmp(&b))
        });
        let rank = (pool.iter().position(|&j| j == i).unwrap() + 1) as f64;
        rank_sum += rank;
        reciprocal_sum += 1.0 / rank;
        noisy += 1;
    }
    (rank_sum / noisy as f64, reciprocal_sum / noisy as f64)
}

/// Pairwise AUC: count positive-over-negative pairs, ties half.
fn oracle_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for i in 0..scores.len() {
        if !labels[i] {
            continue;
        }
        for j in 0..scores.len() {
            if labels[j] {
                continue;
            }
            pairs += 1.0;
            if scores[i] > scores[j] {
                wins += 1.0;
            } else if scores[i] == scores[j] {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

/// Accuracy-maximizing threshold by naive per-candidate rescan.
fn oracle_threshold(items: &[(f64, bool)]) -> (f64, f64) {
    let mut sorted: Vec<f64> = items.iter().map(|(s, _)| *s).collect();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut candidates = vec![sorted[0] - 1.0];
    for w in sorted.windows(2) {
        if w[0] < w[1] {
            candidates.push((w[0] + w[1]) / 2.0);
        }
    }
    candidates.push(sorted[sorted.len() - 1] + 1.0);
    let mut best_tau = f64::NAN;
    let mut best_acc = f64::NEG_INFINITY;
    for &tau in &candidates {
        let correct = items
            .iter()
            .filter(|&&(s, positive)| (s < tau) == positive)
            .count();
        let acc = correct as f64 / items.len() as f64;
        if acc > best_acc {
            best_acc = acc;
            best_tau = tau;
        }
    }
    (best_tau, best_acc)
}

fn random_instance(rng: &mut ChaCha12Rng, max_triples: usize) -> (Vec<f64>, Vec<bool>, Vec<u32>) {
    let n = rng.random_range(3..=max_triples);
    let n_rel = rng.random_range(1..=4u32);
    let quantize = rng.random_bool(0.4);
    let mut scores = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    let mut relations = Vec::with_capacity(n);
    for _ in 0..n {
        let s: f64 = rng.random_range(0.0..1.0);
        // quantized instances force plenty of ties
        scores.push(if quantize { (s * 8.0).round() / 8.0 } else { s });
        labels.push(rng.random_bool(0.3));
        relations.push(rng.random_range(0..n_rel));
    }
    // both classes must exist
    labels[0] = true;
    let last = labels.len() - 1;
    labels[last] = false;
    (scores, labels, relations)
}

#[test]
fn metrics_match_brute_force_on_random_instances() {
    let mut rng = ChaCha12Rng::seed_from_u64(2718);
    for _ in 0..60 {
        let (scores, labels, relations) = random_instance(&mut rng, 200);

        let ranked = RankedList::from_energies(&scores).unwrap();
        let (fmr, fmrr) = filtered_mean_rank(&ranked, &labels).unwrap();
        let (ofmr, ofmrr) = oracle_filtered(&scores, &labels);
        assert!((fmr - ofmr).abs() <= 1e-12, "{fmr} vs {ofmr}");
        assert!((fmrr - ofmrr).abs() <= 1e-12, "{fmrr} vs {ofmrr}");

        let got = auc(&scores, &labels).unwrap();
        let want = oracle_auc(&scores, &labels);
        assert!((got - want).abs() <= 1e-12, "{got} vs {want}");

        // threshold fit per relation, labels flipped: positives are clean
        let positives: Vec<bool> = labels.iter().map(|&l| !l).collect();
        let table = fit_thresholds(&scores, &positives, &relations).unwrap();
        for r in 0..4u32 {
            let items: Vec<(f64, bool)> = scores
                .iter()
                .zip(&positives)
                .zip(&relations)
                .filter(|(_, &rel)| rel == r)
                .map(|((&s, &p), _)| (s, p))
                .collect();
            if items.is_empty() {
                assert_eq!(table.threshold_for(r), table.global);
                continue;
            }
            let (otau, _) = oracle_threshold(&items);
            assert_eq!(table.threshold_for(r), otau, "relation {r}");
        }
    }
}

#[test]
fn rank_matches_sort_oracle_on_large_input() {
    let mut rng = ChaCha12Rng::seed_from_u64(1234);
    let scores: Vec<f64> = (0..1000)
        .map(|_| (rng.random_range(0.0..1.0f64) * 50.0).round() / 50.0)
        .collect();
    let ranked = RankedList::from_energies(&scores).unwrap();
    let mut expect: Vec<usize> = (0..scores.len()).collect();
    expect.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap()
            .then_with(|| a.cmp(&b))
    });
    assert_eq!(ranked.order(), expect.as_slice());
    for w in ranked.energies().windows(2) {
        assert!(w[0] >= w[1]);
    }
}

#[test]
fn fit_accuracy_is_at_least_the_class_prior() {
    let mut rng = ChaCha12Rng::seed_from_u64(77);
    for _ in 0..40 {
        let (scores, labels, relations) = random_instance(&mut rng, 80);
        let positives: Vec<bool> = labels.iter().map(|&l| !l).collect();
        let table = fit_thresholds(&scores, &positives, &relations).unwrap();
        let accuracy = threshold_accuracy(&table, &scores, &positives, &relations);
        let pos = positives.iter().filter(|&&p| p).count() as f64 / positives.len() as f64;
        let prior = pos.max(1.0 - pos);
        // global-threshold accuracy can only improve per relation
        assert!(
            accuracy >= prior - 1e-12,
            "accuracy {accuracy} below prior {prior}"
        );
    }
}

#[test]
fn random_scores_give_chance_level_roc() {
    let mut rng = ChaCha12Rng::seed_from_u64(31);
    let n = 10_000;
    let val_scores: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
    let val_pos: Vec<bool> = (0..n).map(|i| i % 2 == 0).collect();
    let relations: Vec<u32> = (0..n).map(|i| (i % 5) as u32).collect();
    let table = fit_thresholds(&val_scores, &val_pos, &relations).unwrap();

    let test_scores: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
    let test_pos: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
    let out = classify(&test_scores, &test_pos, &relations, &table, 5).unwrap();
    assert!(
        (0.47..=0.53).contains(&out.roc_auc),
        "null ROC-AUC {}",
        out.roc_auc
    );
    assert_eq!(out.skipped, 0);
}

#[test]
fn self_consistency_of_fit_and_classify() {
    let mut rng = ChaCha12Rng::seed_from_u64(55);
    let (scores, labels, relations) = random_instance(&mut rng, 120);
    let positives: Vec<bool> = labels.iter().map(|&l| !l).collect();
    let table = fit_thresholds(&scores, &positives, &relations).unwrap();
    let fit_acc = threshold_accuracy(&table, &scores, &positives, &relations);
    let out = classify(&scores, &positives, &relations, &table, 4).unwrap();
    assert!((out.accuracy - fit_acc).abs() <= 1e-12);
}
