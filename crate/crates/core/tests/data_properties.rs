use drn_core::data::{generate_synthetic, split, MultiTaskDataset, SplitSpec, SyntheticSpec, TaskData};
use drn_core::DenseMatrix;
use proptest::prelude::*;

fn cosine(w: &drn_core::Tensor3, a: usize, b: usize) -> f64 {
    let sa = w.slice3(a).unwrap();
    let sb = w.slice3(b).unwrap();
    let dot: f64 = sa.as_slice().iter().zip(sb.as_slice()).map(|(x, y)| x * y).sum();
    dot / (sa.frobenius_norm() * sb.frobenius_norm())
}

#[test]
fn correlated_tasks_have_similar_ground_truth() {
    let omega =
        DenseMatrix::from_rows(&[&[1.0, 0.95, 0.0], &[0.95, 1.0, 0.0], &[0.0, 0.0, 1.0]]).unwrap();
    let mut hits = 0;
    for seed in 0..10 {
        let spec = SyntheticSpec {
            num_tasks: 3,
            feature_dim: 10,
            num_classes: 3,
            samples_per_task: 1,
            task_covariance: omega.clone(),
            noise_scale: 1.0,
            seed,
        };
        let (_, w) = generate_synthetic(&spec).unwrap();
        let ab = cosine(&w, 0, 1);
        if ab > cosine(&w, 0, 2) && ab > cosine(&w, 1, 2) {
            hits += 1;
        }
    }
    assert!(hits >= 9, "only {hits} of 10 seeds");
}

#[test]
fn labels_are_not_degenerate() {
    for seed in 0..5 {
        let spec = SyntheticSpec {
            num_tasks: 2,
            feature_dim: 20,
            num_classes: 3,
            samples_per_task: 1000,
            task_covariance: DenseMatrix::identity(2),
            noise_scale: 1.0,
            seed,
        };
        let (ds, _) = generate_synthetic(&spec).unwrap();
        for task in ds.tasks() {
            let mut counts = [0usize; 3];
            task.labels.iter().for_each(|&y| counts[y] += 1);
            assert!(counts.iter().all(|&c| c >= 10), "seed {seed}: {counts:?}");
        }
    }
}

fn dataset_strategy() -> impl Strategy<Value = MultiTaskDataset> {
    prop::collection::vec(2usize..40, 1..4).prop_map(|sizes| {
        let tasks = sizes
            .iter()
            .map(|&n| TaskData {
                features: (0..n).map(|i| vec![i as f64]).collect(),
                labels: (0..n).map(|i| i % 2).collect(),
            })
            .collect();
        let names = (0..sizes.len()).map(|t| format!("t{t}")).collect();
        MultiTaskDataset::new(names, tasks, 1, 2).unwrap()
    })
}

proptest! {
    #[test]
    fn splits_partition_each_task(ds in dataset_strategy(), f in 0.05f64..0.95, seed in any::<u64>()) {
        let spec = SplitSpec { train_fraction: f, stratified: false, seed };
        if let Ok((train, test)) = split(&ds, &spec) {
            for t in 0..ds.num_tasks() {
                let mut seen: Vec<f64> = train.task(t).features.iter()
                    .chain(&test.task(t).features)
                    .map(|x| x[0])
                    .collect();
                seen.sort_by(f64::total_cmp);
                let all: Vec<f64> = (0..ds.task(t).len()).map(|i| i as f64).collect();
                prop_assert_eq!(seen, all);
            }
            prop_assert_eq!(split(&ds, &spec).unwrap(), (train, test));
        }
    }
}
