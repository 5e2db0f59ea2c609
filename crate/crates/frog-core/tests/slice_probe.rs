//! Throwaway calibration probe (run with --ignored). Not part of the suite.

use frog_core::data::{generate_synthetic, split_temporal, SynthConfig};
use frog_core::model::{shape_for_dataset, Variant};
use frog_core::rng;
use frog_core::train::{evaluate, hit_rate_at_k, model_ranks, train, QuerySpec, TrainConfig};
use rand::Rng;

#[test]
#[ignore]
fn long_run_two_seeds() {
    let synth = SynthConfig::default();
    for seed in [101u64, 555u64] {
        let ds = generate_synthetic(&synth, seed).unwrap();
        let split = split_temporal(
            &ds.instances,
            &ds.model_graph(),
            &ds.interactions,
            rng::sub_seed(seed, "split"),
        )
        .unwrap();
        let cfg = TrainConfig {
            max_epochs: 18,
            val_queries: 256,
            seed: rng::sub_seed(seed, "train"),
            ..TrainConfig::default()
        };
        for variant in [Variant::Full, Variant::NoMatching, Variant::NoGlobal] {
            let shape = shape_for_dataset(&ds, 16, 16, 16, variant);
            let t0 = std::time::Instant::now();
            let (model, report) = train::<f64>(&cfg, &shape, &ds, &split).unwrap();
            let es = rng::sub_seed(seed, "eval");
            let overall = evaluate(&model, &ds, &split.test, &cfg, es).unwrap();
            eprintln!(
                "seed {seed} {:<12} HR@10 {:.4} NDCG@10 {:.4} best_epoch {:<2} wall {:.0}s val {:?}",
                variant.name(),
                overall.hr[&10],
                overall.ndcg[&10],
                report.best_epoch,
                t0.elapsed().as_secs_f64(),
                report.val_hr10.iter().map(|x| (x * 1000.0).round() / 1000.0).collect::<Vec<_>>()
            );
        }
    }
}

#[test]
#[ignore]
fn slice_hr_by_pair_kind() {
    let seed = 777u64;
    let synth = SynthConfig::default();
    let ds = generate_synthetic(&synth, seed).unwrap();
    let split = split_temporal(&ds.instances, &ds.model_graph(), &ds.interactions, rng::sub_seed(seed, "split")).unwrap();

    let mut fr = rng::stream(seed, "synth-facets");
    let primary: Vec<usize> = (0..synth.n).map(|_| fr.gen_range(0..synth.communities)).collect();
    let secondary: Vec<usize> = (0..synth.n).map(|_| fr.gen_range(0..synth.communities)).collect();
    let partner = |k: usize| (k + synth.communities / 2) % synth.communities;
    let comp = |k: usize, l: usize| k != l && (partner(k) == l || partner(l) == k);
    let shares = |u: usize, v: usize| {
        primary[u] == primary[v]
            || primary[u] == secondary[v]
            || secondary[u] == primary[v]
            || secondary[u] == secondary[v]
    };

    let queries: Vec<QuerySpec> = split
        .test
        .iter()
        .filter(|i| i.label == 1)
        .map(|i| QuerySpec { src: i.src, dst: i.dst })
        .collect();
    let kinds: Vec<&str> = queries
        .iter()
        .map(|q| {
            let (u, v) = (q.src as usize, q.dst as usize);
            if shares(u, v) {
                "shared"
            } else if comp(primary[u], primary[v]) {
                "partner"
            } else {
                "other"
            }
        })
        .collect();

    let cfg = TrainConfig {
        max_epochs: 12,
        val_queries: 128,
        seed: rng::sub_seed(seed, "train"),
        ..TrainConfig::default()
    };
    let model_graph = ds.model_graph();
    for variant in [Variant::Full, Variant::NoMatching, Variant::NoGlobal] {
        let shape = shape_for_dataset(&ds, 16, 16, 16, variant);
        let (model, report) = train::<f64>(&cfg, &shape, &ds, &split).unwrap();
        let es = rng::sub_seed(seed, "eval");
        let overall = evaluate(&model, &ds, &split.test, &cfg, es).unwrap();
        let rank_set = model_ranks(
            &model.shape,
            &model.params,
            &model_graph,
            &ds.graph,
            &ds.users,
            &ds.interactions,
            rng::sub_seed(es, "eval-neighborhoods"),
            rng::sub_seed(es, "eval-negatives"),
            cfg.eval_negatives,
            &queries,
        )
        .unwrap();
        assert_eq!(rank_set.skipped, 0);
        for kind in ["shared", "partner", "other"] {
            let slice: Vec<usize> = rank_set
                .ranks
                .iter()
                .zip(&kinds)
                .filter(|(_, k)| **k == kind)
                .map(|(r, _)| *r)
                .collect();
            if slice.is_empty() {
                continue;
            }
            eprintln!(
                "{:<12} {:<8} n={:<5} HR@10 {:.3}",
                variant.name(),
                kind,
                slice.len(),
                hit_rate_at_k(&slice, 10).unwrap()
            );
        }
        eprintln!(
            "{:<12} overall HR@10 {:.4} best_epoch {} val_hr10 {:?}",
            variant.name(),
            overall.hr[&10],
            report.best_epoch,
            report.val_hr10.iter().map(|x| (x * 1000.0).round() / 1000.0).collect::<Vec<_>>()
        );
    }
}
