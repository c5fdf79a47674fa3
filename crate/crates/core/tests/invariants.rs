use std::collections::BTreeSet;

use gdm_core::data_io::{
    export_metrics, generate_synthetic, load_dataset, parse_metrics_table, parse_summary,
    write_dataset, DatasetSplit, MetricsFormat, SequenceDataset, SyntheticSpec,
};
use gdm_core::dual_memory::{GdmConfig, GdmModel, TestContext, CATEGORY_TABLE, INSTANCE_TABLE};
use gdm_core::harness::{run_batch, run_trials, Experiment, ScenarioKind, TcMode};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn small(seed: u64, categories: usize) -> (SequenceDataset, DatasetSplit) {
    let ds = generate_synthetic(&SyntheticSpec {
        n_categories: categories,
        instances_per_category: 3,
        sequences_per_instance: 6,
        frames_per_sequence: 8,
        dim: 8,
        seed,
        ..SyntheticSpec::default()
    })
    .unwrap();
    let split = DatasetSplit::by_sessions(&ds, &[3]).unwrap();
    (ds, split)
}

fn train_sequences(model: &mut GdmModel, ds: &SequenceDataset, seqs: &[usize]) {
    for &s in seqs {
        model.reset_context();
        for f in ds.sequence_frames(s) {
            model
                .train_step(&f.features, f.instance, f.category)
                .unwrap();
        }
    }
}

fn semantic_states(model: &GdmModel) -> Vec<(usize, Vec<f64>)> {
    model
        .semantic()
        .neurons()
        .map(|(id, n)| {
            (
                id,
                (0..=n.depth())
                    .flat_map(|k| n.context(k).to_vec())
                    .collect(),
            )
        })
        .collect()
}

#[test]
fn semantic_neurons_move_only_on_a_match_and_near_the_bmu() {
    let ds = generate_synthetic(&SyntheticSpec::default()).unwrap();
    let split = DatasetSplit::by_sessions(&ds, &[3, 7, 10]).unwrap();
    let mut model = GdmModel::new(ds.dim(), &GdmConfig::default()).unwrap();

    let (mut frozen_checks, mut mismatches) = (0, 0);
    for &s in split.train.iter().step_by(3) {
        model.reset_context();
        for f in ds.sequence_frames(s) {
            let before = semantic_states(&model);
            let edges: Vec<(usize, usize)> =
                model.semantic().edges().map(|(i, j, _)| (i, j)).collect();
            let r = model
                .train_step(&f.features, f.instance, f.category)
                .unwrap();
            let mut may_move = BTreeSet::new();
            if r.semantic.adapted {
                let b = r.semantic.matched.unwrap().bmu;
                may_move.insert(b);
                for &(i, j) in &edges {
                    if i == b {
                        may_move.insert(j);
                    } else if j == b {
                        may_move.insert(i);
                    }
                }
            } else {
                mismatches += 1;
            }
            for (id, state) in before {
                if may_move.contains(&id) || !model.semantic().contains(id) {
                    continue;
                }
                let n = model.semantic().neuron(id).unwrap();
                let now: Vec<f64> = (0..=n.depth())
                    .flat_map(|k| n.context(k).to_vec())
                    .collect();
                assert_eq!(
                    now, state,
                    "neuron {id} moved outside the matched neighbourhood"
                );
                frozen_checks += 1;
            }
        }
    }
    assert!(
        mismatches > 0 && frozen_checks > 0,
        "{mismatches} {frozen_checks}"
    );
}

#[test]
fn semantic_memory_stays_smaller_than_episodic() {
    let (ds, split) = small(5, 3);
    let r = run_batch(&ds, &split, &GdmConfig::default(), TcMode::Full, Some(6), 5).unwrap();
    for rec in &r.log.records {
        assert!(rec.sm_neurons < rec.em_neurons, "{rec:?}");
    }
}

#[test]
fn frame_order_carries_signal() {
    let ds = generate_synthetic(&SyntheticSpec::default()).unwrap();
    let split = DatasetSplit::by_sessions(&ds, &[3, 7, 10]).unwrap();
    let model = run_batch(
        &ds,
        &split,
        &GdmConfig::default(),
        TcMode::Full,
        Some(15),
        1,
    )
    .unwrap()
    .model;
    let ordered: Vec<_> = split
        .test
        .iter()
        .flat_map(|&s| ds.sequence_frames(s))
        .collect();
    let mut shuffled = ordered.clone();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(3));
    let accuracy = |frames: &[&gdm_core::data_io::FrameRecord]| {
        let p = model
            .classify_sequence(
                frames.iter().map(|f| f.features.as_slice()),
                TestContext::Full,
            )
            .unwrap();
        let hits = p
            .iter()
            .zip(frames)
            .filter(|(p, f)| p.instance == Some(f.instance))
            .count();
        100.0 * hits as f64 / frames.len() as f64
    };
    let (a, b) = (accuracy(&ordered), accuracy(&shuffled));
    assert!(a > b, "ordered {a:.2}% vs shuffled {b:.2}%");
}

#[test]
fn replayed_trajectories_follow_temporal_links_and_labels() {
    let (ds, split) = small(9, 3);
    let mut model = GdmModel::new(ds.dim(), &GdmConfig::default()).unwrap();
    train_sequences(&mut model, &ds, &split.train);
    let (rnats, _) = model.generate_rnats().unwrap();
    assert!(!rnats.is_empty());
    let em = model.episodic();
    for r in &rnats {
        assert!(r.len() >= 2 && r.len() <= model.lambda());
        assert_eq!(r.neurons[0], r.source);
        for (i, &id) in r.neurons.iter().enumerate() {
            assert_eq!(r.elements[i], em.neuron(id).unwrap().weight());
            assert_eq!(
                Some(r.instance_labels[i]),
                em.predict_label(id, INSTANCE_TABLE).unwrap()
            );
            assert_eq!(
                Some(r.category_labels[i]),
                em.predict_label(id, CATEGORY_TABLE).unwrap()
            );
            if i > 0 {
                assert_eq!(em.next_neuron(r.neurons[i - 1]).unwrap(), Some(id));
            }
        }
    }
}

#[test]
fn metrics_files_round_trip() {
    let (ds, split) = small(4, 2);
    let exp = Experiment::new(ScenarioKind::Nc);
    let out = run_trials(&ds, &split, &exp, &[1, 2], 1).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let tsv = dir.path().join("metrics.tsv");
    let json = dir.path().join("summary.json");
    export_metrics(&out.report, &tsv, MetricsFormat::Tsv).unwrap();
    export_metrics(&out.report, &json, MetricsFormat::Json).unwrap();

    let rows = parse_metrics_table(&std::fs::read_to_string(&tsv).unwrap()).unwrap();
    let expected: Vec<_> = out
        .report
        .trials
        .iter()
        .flat_map(|l| l.records.iter().map(move |r| (l.trial, r.clone())))
        .collect();
    assert_eq!(rows, expected);
    let summary = parse_summary(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(summary, out.report);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn dataset_files_round_trip(seed in 0u64..1000, dim in 1usize..6, frames in 1usize..5) {
        let ds = generate_synthetic(&SyntheticSpec {
            n_categories: 2,
            instances_per_category: 2,
            sequences_per_instance: 2,
            frames_per_sequence: frames,
            dim,
            seed,
            ..SyntheticSpec::default()
        })
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        for name in ["data.gdmf", "data.csv"] {
            let path = dir.path().join(name);
            write_dataset(&ds, &path).unwrap();
            let back = load_dataset(&path).unwrap();
            prop_assert_eq!(&back, &ds);
            prop_assert_eq!(back.sequences(), ds.sequences());
        }
    }
}
