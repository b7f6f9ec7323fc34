//! Sanity checks against the real MNIST files.

mod common;

use ewclab::idx;
use ewclab::load_mnist_dir;
use ewclab_core::rng::{derive_seed, STREAM_INIT};
use ewclab_core::{
    accuracy, build_task_sequence, train_task, AnchorState, NetworkParams, SequenceSpec,
    SiAccumulator, TaskDataset, TrainConfig,
};

#[test]
fn full_mnist_loads_with_expected_geometry() {
    let dir = common::require_mnist();
    let (train_inputs, train_labels) =
        idx::load_idx(&dir.join(idx::TRAIN_IMAGES), &dir.join(idx::TRAIN_LABELS)).unwrap();
    assert_eq!(train_inputs.shape(), (60000, 784));
    assert_eq!(train_labels.len(), 60000);
    assert!(train_inputs.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
    // Plenty of saturated pixels: the 255 -> 1.0 scaling is visible.
    assert!(train_inputs.data().contains(&1.0));

    let (test_inputs, test_labels) =
        idx::load_idx(&dir.join(idx::TEST_IMAGES), &dir.join(idx::TEST_LABELS)).unwrap();
    assert_eq!(test_inputs.shape(), (10000, 784));
    assert_eq!(test_labels.len(), 10000);
}

#[test]
fn untrained_network_sits_near_chance() {
    let dir = common::require_mnist();
    let source = load_mnist_dir(&dir).unwrap();
    let params = NetworkParams::init(&[784, 300, 150, 10], 99).unwrap();
    let test = TaskDataset::raw(source.test_inputs, source.test_labels);
    let acc = accuracy(&params, &test).unwrap();
    assert!((0.05..=0.2).contains(&acc), "untrained accuracy {acc}");
}

#[test]
fn six_epochs_on_one_task_clears_95_percent() {
    let dir = common::require_mnist();
    let source = load_mnist_dir(&dir).unwrap();
    let spec = SequenceSpec { num_tasks: 1, master_seed: 1, train_cap: None, test_cap: None };
    let sequence = build_task_sequence(source, &spec).unwrap();
    let config = TrainConfig { lambda: 0.0, ..TrainConfig::default() };
    let task = sequence.task(0).unwrap();
    let init_seed = derive_seed(config.master_seed, STREAM_INIT, 0, 0);
    let params = NetworkParams::init(&[784, 300, 150, 10], init_seed).unwrap();
    let mut si = SiAccumulator::new(&params);
    let (trained, log) =
        train_task(params, &task, &AnchorState::empty(), &config, &mut si).unwrap();
    let acc = accuracy(&trained, &task.test).unwrap();
    assert!(acc > 0.95, "single-task accuracy {acc}, per-epoch {:?}", log.test_accuracy);
}
