mod common;

use fastread::active::{Phase, ReviewState, TreatmentCode, TreatmentConfig};
use fastread::corpus::{Corpus, Relevance, Study};
use fastread::eval::{recall_target, scott_knott, simulate, simulate_traced, ScottKnottConfig, SimOptions};
use fastread::features::SparseVec;
use fastread::svm::{ClassWeights, SvmParams, SvmTrainer};
use proptest::prelude::*;

fn label(b: bool) -> Relevance {
    if b {
        Relevance::Relevant
    } else {
        Relevance::Irrelevant
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn csv_round_trip(rows in prop::collection::vec(("[a-z ,\"\n]{0,20}", "[a-zA-Z ,\"\n\r]{0,40}", any::<bool>()), 1..20)) {
        let studies = rows
            .iter()
            .map(|(t, a, rel)| Study::new(0, t.clone(), a.clone()).with_label(label(*rel)))
            .collect();
        let c = Corpus::new("p", studies);
        let back = Corpus::from_reader("p", c.to_csv_string().unwrap().as_bytes()).unwrap();
        prop_assert_eq!(back.len(), c.len());
        for (i, (a, b)) in c.studies.iter().zip(&back.studies).enumerate() {
            prop_assert_eq!(b.id, i);
            prop_assert_eq!(&a.title, &b.title);
            prop_assert_eq!(&a.abstract_text, &b.abstract_text);
            prop_assert_eq!(a.oracle_label, b.oracle_label);
        }
        let r = back.relevant_ids().len();
        let i = back.studies.iter().filter(|s| s.oracle_label == Some(Relevance::Irrelevant)).count();
        prop_assert_eq!(r + i, back.len());
    }

    #[test]
    fn partition_holds(n in 1usize..60, ops in prop::collection::vec((any::<prop::sample::Index>(), any::<bool>()), 0..80)) {
        let mut s = ReviewState::new(n, 0);
        for (idx, rel) in ops {
            let id = idx.index(n);
            if s.label_of(id).is_none() {
                s.record_label(id, label(rel)).unwrap();
            } else {
                s.set_label(id, label(rel)).unwrap();
            }
            prop_assert_eq!(s.labeled().len() + s.unlabeled().len(), n);
            prop_assert_eq!(s.n_relevant() + s.n_irrelevant(), s.n_labeled());
            for &u in s.unlabeled() {
                prop_assert!(s.label_of(u).is_none());
            }
        }
    }

    #[test]
    fn svm_is_deterministic_and_scale_free(seed in any::<u64>(), k in 0.1f64..10.0) {
        let mut r = common::rng(seed);
        let inst = common::random_instance(&mut r, 1.0, true);
        let rows: Vec<SparseVec> = inst.x.iter().map(|x| SparseVec::from_dense(x)).collect();
        let refs: Vec<&SparseVec> = rows.iter().collect();
        let dim = inst.x[0].len();
        let w = ClassWeights {
            relevant: inst.y.iter().zip(&inst.upper).find(|(l, _)| l.is_relevant()).unwrap().1.to_owned(),
            irrelevant: inst.y.iter().zip(&inst.upper).find(|(l, _)| !l.is_relevant()).unwrap().1.to_owned(),
        };
        let tight = SvmParams { tolerance: 1e-9, gap_tolerance: 1e-12, max_epochs: 200_000, ..SvmParams::default() };
        let a = SvmTrainer::new(tight).train(&refs, &inst.y, dim, Some(w), seed).unwrap();
        let b = SvmTrainer::new(tight).train(&refs, &inst.y, dim, Some(w), seed).unwrap();
        prop_assert_eq!(a.summary(), b.summary());

        let scaled = SvmTrainer::new(SvmParams { c: 1.0 / k, ..tight })
            .train(&refs, &inst.y, dim, Some(w.scaled(k)), seed)
            .unwrap();
        for (x, y) in a.weights.iter().chain([&a.bias]).zip(scaled.weights.iter().chain([&scaled.bias])) {
            prop_assert!((x - y).abs() <= 1e-5 * x.abs().max(1.0), "{:?} vs {:?}", a, scaled);
        }
    }

    #[test]
    fn separable_data_is_fit(seed in any::<u64>()) {
        let inst = common::separable_instance(&mut common::rng(seed), 0.25);
        let rows: Vec<SparseVec> = inst.x.iter().map(|x| SparseVec::from_dense(x)).collect();
        let refs: Vec<&SparseVec> = rows.iter().collect();
        let m = SvmTrainer::new(SvmParams { c: 100.0, ..SvmParams::default() })
            .train(&refs, &inst.y, inst.x[0].len(), None, seed)
            .unwrap();
        for (x, y) in inst.x.iter().zip(&inst.y) {
            prop_assert_eq!(m.score_dense(x).unwrap() > 0.0, y.is_relevant());
        }
    }

    #[test]
    fn scott_knott_ranks_follow_medians(seed in any::<u64>(), groups in 1usize..6) {
        let mut r = common::rng(seed);
        let samples: Vec<(String, Vec<f64>)> = (0..groups)
            .map(|g| {
                use rand::Rng;
                let shift = r.random_range(0.0..100.0);
                (format!("T{g}"), (0..20).map(|_| shift + r.random_range(0.0..20.0)).collect())
            })
            .collect();
        let ranks = scott_knott(&samples, &ScottKnottConfig { seed, ..ScottKnottConfig::default() }).unwrap();
        let median = |name: &str| {
            let mut v = samples.iter().find(|s| s.0 == name).unwrap().1.clone();
            v.sort_by(f64::total_cmp);
            v[v.len().div_ceil(2) - 1]
        };
        let mut by_median = ranks.clone();
        by_median.sort_by(|a, b| median(&a.0).total_cmp(&median(&b.0)));
        prop_assert!(by_median.windows(2).all(|w| w[0].1 <= w[1].1), "{:?}", by_median);
        prop_assert_eq!(ranks[0].1, 1);

        let same: Vec<(String, Vec<f64>)> = (0..groups).map(|g| (format!("S{g}"), samples[0].1.clone())).collect();
        let flat = scott_knott(&same, &ScottKnottConfig::default()).unwrap();
        prop_assert!(flat.iter().all(|(_, r)| *r == 1));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn simulation_trajectories(seed in any::<u64>(), code in prop::sample::select(TreatmentCode::all())) {
        let data = common::synthetic_data("p", 300, 20, seed % 7);
        let cfg = TreatmentConfig::default();
        let res = simulate(&data, code, &cfg, seed).unwrap();
        prop_assert!(res.trajectory.windows(2).all(|w| w[1].1 >= w[0].1 && w[1].0 == w[0].0 + 1));
        prop_assert_eq!(res.trajectory.last().unwrap().1, recall_target(0.95, 20));
        prop_assert_eq!(res.x95, res.trajectory.len());
        prop_assert!((res.wss95 + res.x95 as f64 / 300.0 - 0.95).abs() <= 1e-12);
        prop_assert_eq!(res.missed.len(), 20 - recall_target(0.95, 20));
    }

    #[test]
    fn uncertainty_codes_turn_certain(seed in any::<u64>(), code in prop::sample::select(
        TreatmentCode::all().into_iter().filter(|c| c.to_string().as_bytes().get(1) == Some(&b'U')).collect::<Vec<_>>()
    )) {
        let data = common::synthetic_data("p", 600, 60, seed % 5);
        let (_, trace) = simulate_traced(&data, code, &TreatmentConfig::default(), seed, &SimOptions::default()).unwrap();
        let stable: Vec<_> = trace.iter().filter(|r| r.found_before >= 30).collect();
        prop_assert!(!stable.is_empty());
        prop_assert!(stable.iter().all(|r| r.phase == Phase::Certainty), "{}", code);
    }
}

#[test]
fn hutm_dominates_linear_on_separable_corpora() {
    let cfg = TreatmentConfig::default();
    for seed in 0..3 {
        let data = common::synthetic_data("sep", 2000, 40, 100 + seed);
        let median = |code| {
            let runs = fastread::eval::repeat(&data, code, &cfg, 9, 1).unwrap();
            let x: Vec<f64> = runs.iter().map(|r| r.x95 as f64).collect();
            fastread::eval::median_iqr(&x).unwrap().0
        };
        let (h, l) = (median(TreatmentCode::FASTREAD), median(TreatmentCode::Linear));
        assert!(h < l / 5.0, "corpus {seed}: HUTM {h}, linear {l}");
    }
}
