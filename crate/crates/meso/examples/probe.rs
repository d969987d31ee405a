mod common { include!("crates/meso/tests/common/mod.rs"); }
use meso::arch::{build, spec_meso_plus6};
use meso::dataset::InMemoryDataset;
use meso::training::{fit, TrainConfig};

fn main() {
    let data = common::synthetic_dataset(&["DeepFake", "FaceSwap", "Real"], 10, 64, 7);
    for (bs, lr, seed, mseed) in [(6usize, 1e-3f32, 11u64, 3u64), (10, 1e-3, 11, 3), (30, 1e-3, 11, 3), (10, 2e-3, 11, 3), (10, 1e-3, 5, 3), (10, 1e-3, 11, 1), (30, 2e-3, 11, 3), (15, 1e-3, 11, 3)] {
        let spec = spec_meso_plus6(3, vec!["DeepFake".into(), "FaceSwap".into(), "Real".into()])
            .unwrap().with_input(64, 64).unwrap();
        let mut model = build(&spec, mseed).unwrap();
        let cfg = TrainConfig { epochs: 12, batch_size: bs, learning_rate: lr, seed, shuffle: true };
        let h = fit(&mut model, &data, None::<&InMemoryDataset>, &cfg).unwrap();
        let losses: Vec<String> = h.epochs.iter().map(|e| format!("{:.3}", e.train_loss)).collect();
        let accs: Vec<String> = h.epochs.iter().map(|e| format!("{:.2}", e.train_accuracy)).collect();
        let drops = h.epochs.windows(2).filter(|w| w[1].train_loss < w[0].train_loss).count();
        println!("bs={bs} lr={lr} seed={seed} mseed={mseed} drops5={} loss={losses:?} acc={accs:?}", h.epochs[..5].windows(2).filter(|w| w[1].train_loss < w[0].train_loss).count());
        let _ = drops;
    }
}
