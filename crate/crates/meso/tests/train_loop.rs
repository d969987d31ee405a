//! Training-loop behavior on the synthetic overfit fixture.

mod common;

use meso::arch::{build, spec_meso_plus6, Model};
use meso::dataset::InMemoryDataset;
use meso::training::{fit, train_epoch, AdamState, TrainConfig};

fn fixture() -> InMemoryDataset {
    common::synthetic_dataset(&["DeepFake", "FaceSwap", "Real"], 10, 64, 7)
}

fn fixture_model(seed: u64) -> Model {
    let spec = spec_meso_plus6(3, vec!["DeepFake".into(), "FaceSwap".into(), "Real".into()])
        .unwrap()
        .with_input(64, 64)
        .unwrap();
    build(&spec, seed).unwrap()
}

fn config() -> TrainConfig {
    TrainConfig {
        epochs: 5,
        batch_size: 6,
        learning_rate: 1e-3,
        seed: 11,
        shuffle: true,
    }
}

#[test]
fn zero_learning_rate_leaves_parameters_unchanged() {
    let data = fixture();
    let mut model = fixture_model(1);
    let before: Vec<Vec<f32>> = model.parameters().iter().map(|t| t.data().to_vec()).collect();
    let cfg = TrainConfig { learning_rate: 0.0, epochs: 1, ..config() };
    let mut opt = AdamState::for_model(0.0, &model).unwrap();
    train_epoch(&mut model, &data, &mut opt, &cfg, 0).unwrap();
    let after: Vec<Vec<f32>> = model.parameters().iter().map(|t| t.data().to_vec()).collect();
    assert_eq!(before, after);
}

#[test]
fn same_seed_gives_bitwise_identical_losses() {
    let data = fixture();
    let cfg = TrainConfig { epochs: 2, ..config() };
    let mut run = || {
        let mut model = fixture_model(2);
        fit(&mut model, &data, None::<&InMemoryDataset>, &cfg).unwrap()
    };
    let a = run();
    let b = run();
    for (ea, eb) in a.epochs.iter().zip(&b.epochs) {
        assert_eq!(ea.train_loss.to_bits(), eb.train_loss.to_bits());
        assert_eq!(ea.train_accuracy, eb.train_accuracy);
    }
}

#[test]
fn loss_decreases_across_early_epochs() {
    let data = fixture();
    let mut model = fixture_model(3);
    let cfg = config();
    let history = fit(&mut model, &data, None::<&InMemoryDataset>, &cfg).unwrap();
    assert_eq!(history.epochs.len(), 5);
    let losses: Vec<f64> = history.epochs.iter().map(|e| e.train_loss).collect();
    let drops = losses.windows(2).filter(|w| w[1] < w[0]).count();
    assert!(drops >= 4, "loss sequence {losses:?} dropped only {drops}/4 times");
}

#[test]
fn validation_on_the_training_set_tracks_train_accuracy() {
    let data = fixture();
    let mut model = fixture_model(4);
    let cfg = TrainConfig { epochs: 8, ..config() };
    let history = fit(&mut model, &data, Some(&data), &cfg).unwrap();
    let last = history.epochs.last().unwrap();
    let val_acc = last.val_accuracy.expect("validation ran");
    assert!(
        val_acc >= last.train_accuracy - 0.05,
        "val {val_acc} vs train {}",
        last.train_accuracy
    );
}

#[test]
fn history_matches_epoch_count_and_optional_validation() {
    let data = fixture();
    let mut model = fixture_model(5);
    let cfg = TrainConfig { epochs: 3, ..config() };
    let history = fit(&mut model, &data, None::<&InMemoryDataset>, &cfg).unwrap();
    assert_eq!(history.epochs.len(), 3);
    assert!(history.epochs.iter().all(|e| e.val_loss.is_none() && e.val_accuracy.is_none()));
}

#[test]
fn empty_dataset_is_a_data_error() {
    let data = InMemoryDataset::new(vec![], vec![], vec!["A".into(), "B".into(), "C".into()]).unwrap();
    let mut model = fixture_model(6);
    let mut opt = AdamState::for_model(1e-3, &model).unwrap();
    assert!(matches!(
        train_epoch(&mut model, &data, &mut opt, &config(), 0),
        Err(meso::Error::Data(_))
    ));
}

#[test]
fn class_count_mismatch_is_a_config_error() {
    let data = common::synthetic_dataset(&["A", "B"], 4, 64, 1);
    let mut model = fixture_model(7); // 3-class head
    let mut opt = AdamState::for_model(1e-3, &model).unwrap();
    assert!(matches!(
        train_epoch(&mut model, &data, &mut opt, &config(), 0),
        Err(meso::Error::Config(_))
    ));
}
